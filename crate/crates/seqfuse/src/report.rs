//! Evaluation reports and training loss logs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use seqfuse_core::data::CameraId;
use seqfuse_core::eval::{EvalReport, OrderReport, Protocol};
use seqfuse_core::train::IterationLog;

/// Everything `eval` writes to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalDocument {
    pub protocol: Protocol,
    /// Gallery cameras when the protocol is FSP.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gallery: Option<Vec<CameraId>>,
    pub reports: Vec<EvalReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub order_checks: Vec<OrderCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderCheck {
    pub fuser: seqfuse_core::eval::Fuser,
    pub plan: usize,
    pub gallery_cameras: Vec<CameraId>,
    pub result: OrderReport,
}

fn cams(c: &[CameraId]) -> String {
    c.iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

impl EvalDocument {
    /// Aligned text: one summary row per query-set size, then one row per
    /// plan. Rank-1 and mAP are percentages.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "protocol {}", self.protocol);
        if let Some(g) = &self.gallery {
            let _ = writeln!(out, "gallery cameras {}", cams(g));
        }
        let _ = writeln!(out);

        let mut head = format!("{:>4} {:>6}", "|Q|", "plans");
        for r in &self.reports {
            let _ = write!(
                head,
                " {:>16} {:>16}",
                format!("{} r1", r.fuser),
                format!("{} mAP", r.fuser)
            );
        }
        let _ = writeln!(out, "{head}");
        let sizes: Vec<usize> = self
            .reports
            .first()
            .map_or(vec![], |r| r.by_size.iter().map(|s| s.size).collect());
        for size in sizes {
            let plans = self.reports[0].summary(size).map_or(0, |s| s.plans);
            let mut row = format!("{size:>4} {plans:>6}");
            for r in &self.reports {
                let (r1, map) = r
                    .summary(size)
                    .map_or((f64::NAN, f64::NAN), |s| (s.rank1, s.map));
                let _ = write!(row, " {:>16} {:>16}", pct(r1), pct(map));
            }
            let _ = writeln!(out, "{row}");
        }
        let mut row = format!(
            "{:>4} {:>6}",
            "all",
            self.reports.first().map_or(0, |r| r.plans.len())
        );
        for r in &self.reports {
            let _ = write!(
                row,
                " {:>16} {:>16}",
                pct(r.mean_rank1()),
                pct(r.mean_map())
            );
        }
        let _ = writeln!(out, "{row}\n");

        let mut head = format!(
            "{:>5} {:>13} {:>13} {:>6}",
            "plan", "gallery", "query", "ids"
        );
        for r in &self.reports {
            let _ = write!(
                head,
                " {:>16} {:>16}",
                format!("{} r1", r.fuser),
                format!("{} mAP", r.fuser)
            );
        }
        let _ = writeln!(out, "{head}");
        if let Some(first) = self.reports.first() {
            for (i, p) in first.plans.iter().enumerate() {
                let mut row = format!(
                    "{:>5} {:>13} {:>13} {:>6}",
                    p.plan,
                    cams(&p.gallery_cameras),
                    cams(&p.query_cameras),
                    p.queries
                );
                for r in &self.reports {
                    let q = &r.plans[i];
                    let _ = write!(row, " {:>16} {:>16}", pct(q.rank1), pct(q.map));
                }
                let _ = writeln!(out, "{row}");
            }
        }

        for c in &self.order_checks {
            let _ = writeln!(
                out,
                "\norder check {} plan {} (gallery {}): rank-1 spread {} mAP spread {} over {} orders",
                c.fuser,
                c.plan,
                cams(&c.gallery_cameras),
                pct(c.result.rank1_spread),
                pct(c.result.map_spread),
                c.result.orders.len()
            );
            for (order, (r1, map)) in c
                .result
                .orders
                .iter()
                .zip(c.result.rank1.iter().zip(&c.result.map))
            {
                let _ = writeln!(
                    out,
                    "  {:>13} {:>8} {:>8}",
                    cams(order),
                    pct(*r1),
                    pct(*map)
                );
            }
        }
        out
    }
}

pub const LOSS_LOG_HEADER: &str = "iter\tlr\tlambda\tloss_total\tloss_tri\tloss_mon";

/// One tab-separated loss log line; floats use shortest round-trip form.
pub fn loss_line(log: &IterationLog) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}",
        log.iteration, log.lr, log.lambda, log.loss.total, log.loss.triplet, log.loss.monotonicity
    )
}
