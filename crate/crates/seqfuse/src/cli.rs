//! The `seqfuse` command.
//!
//! Subcommands write their primary outputs (manifests, checkpoints, loss
//! logs, reports) deterministically: the same flags and seed give the same
//! bytes. Flag combinations are checked before anything is read or written.

use std::fs;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use clap::{Args, Parser, Subcommand, ValueEnum};

use seqfuse_core::data::{generate_synthetic, CameraId, SyntheticSpec};
use seqfuse_core::eval::{
    fsp_plans, order_invariance_experiment, run_protocol, vsp_plans, Fuser, Protocol,
};
use seqfuse_core::model::{FusionModel, GruInput};
use seqfuse_core::train::{
    train, CameraOrder, IterationLog, PositiveSource, TrainConfig, TrainObserver, TripletKind,
};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::error::{Error, Result};
use crate::manifest::{load_manifest, write_manifest, DatasetSummary, FeatureStorage};
use crate::report::{loss_line, EvalDocument, OrderCheck, LOSS_LOG_HEADER};
use crate::service::{router, Engine, Service};

#[derive(Debug, Parser)]
#[command(
    name = "seqfuse",
    version,
    about = "Sequential multi-camera feature fusion for person re-identification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic multi-camera feature manifest.
    Gen(GenArgs),
    /// Train a fusion model on the train split of a manifest.
    Train(TrainArgs),
    /// Evaluate fusers under the variable or fixed set protocol.
    Eval(EvalArgs),
    /// Run the operator service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Manifest to write.
    #[arg(long, env = "SEQFUSE_MANIFEST")]
    pub out: PathBuf,
    /// JSON synthetic spec used as the base; flags override its fields.
    #[arg(long, env = "SEQFUSE_SPEC")]
    pub spec: Option<PathBuf>,
    /// Identities with train records [default: 200].
    #[arg(long)]
    pub train_ids: Option<usize>,
    /// Identities with query and gallery records [default: 100].
    #[arg(long)]
    pub test_ids: Option<usize>,
    /// Gallery-only identities seen in one camera [default: 0].
    #[arg(long)]
    pub distractors: Option<usize>,
    /// Camera count [default: 6].
    #[arg(long)]
    pub cameras: Option<usize>,
    /// Feature dimension [default: 32].
    #[arg(long)]
    pub dim: Option<usize>,
    /// Std of identity latents [default: 1.0].
    #[arg(long)]
    pub latent_scale: Option<f64>,
    /// Perturbation of the per-camera rotation [default: 0.15].
    #[arg(long)]
    pub transform_scale: Option<f64>,
    /// Std of the per-camera bias [default: 0.3].
    #[arg(long)]
    pub bias_scale: Option<f64>,
    /// Per-record noise σ [default: 0.24].
    #[arg(long)]
    pub noise: Option<f64>,
    /// Comma-separated weights of "seen in exactly n cameras", n = 1, 2, ...
    /// [default: 0 for n = 1, 3^(n-2) otherwise].
    #[arg(long, value_delimiter = ',')]
    pub visibility: Option<Vec<f64>>,
    /// Max train records per identity and camera [default: 2].
    #[arg(long)]
    pub train_per_camera: Option<usize>,
    /// Max gallery records per identity and camera [default: 3].
    #[arg(long)]
    pub gallery_per_camera: Option<usize>,
    /// Store features in a little-endian f32 sidecar next to the manifest.
    #[arg(long)]
    pub sidecar: bool,
    /// Generator seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TripletArg {
    Soft,
    Hinge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GruInputArg {
    Pooled,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PositiveArg {
    Own,
    Cross,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    Ascending,
    Shuffled,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, env = "SEQFUSE_MANIFEST")]
    pub manifest: PathBuf,
    /// Checkpoint to write.
    #[arg(long, env = "SEQFUSE_CHECKPOINT")]
    pub out: PathBuf,
    /// Loss log path [default: <out>.loss.tsv].
    #[arg(long, env = "SEQFUSE_LOSS_LOG")]
    pub loss_log: Option<PathBuf>,
    /// JSON training config used as the base; flags override its fields.
    #[arg(long, env = "SEQFUSE_TRAIN_CONFIG", conflicts_with = "desk")]
    pub config: Option<PathBuf>,
    /// Start from the small-scale preset (lr 5e-4, t0 3000, t1 5000,
    /// lambda0 1.0, 5000 iterations, hidden 64, shuffled order).
    #[arg(long)]
    pub desk: bool,
    /// Initial learning rate [default: 1e-4].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Iteration where the learning rate starts to decay [default: 15000].
    #[arg(long)]
    pub lr_t0: Option<u64>,
    /// Iteration where the decay reaches 0.001x [default: 25000].
    #[arg(long)]
    pub lr_t1: Option<u64>,
    /// Initial triplet weight lambda0 [default: 0.01].
    #[arg(long)]
    pub lambda0: Option<f64>,
    /// Adam beta1 [default: 0.9].
    #[arg(long)]
    pub beta1: Option<f64>,
    /// Adam beta2 [default: 0.999].
    #[arg(long)]
    pub beta2: Option<f64>,
    /// Adam epsilon [default: 1e-8].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Identities per batch [default: 8].
    #[arg(long)]
    pub batch_ids: Option<usize>,
    /// Training iterations [default: 25000].
    #[arg(long)]
    pub iters: Option<u64>,
    /// Hidden and embedding size [default: 512].
    #[arg(long)]
    pub hidden: Option<usize>,
    /// GRU input: running mean of embeddings or the current embedding [default: pooled].
    #[arg(long, value_enum)]
    pub gru_input: Option<GruInputArg>,
    /// Triplet form [default: soft].
    #[arg(long, value_enum)]
    pub triplet: Option<TripletArg>,
    /// Hinge margin, with --triplet hinge [default: 0.3].
    #[arg(long)]
    pub margin: Option<f64>,
    /// Train with the triplet term only.
    #[arg(long)]
    pub no_mloss: bool,
    /// Positive source [default: own].
    #[arg(long, value_enum)]
    pub positive: Option<PositiveArg>,
    /// Camera order of training sequences [default: ascending].
    #[arg(long, value_enum)]
    pub camera_order: Option<OrderArg>,
    /// Also write `<out>.iter<N>` every N iterations.
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// Seed of initialisation and batch sampling [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, env = "SEQFUSE_MANIFEST")]
    pub manifest: PathBuf,
    /// Required when the gru fuser is selected.
    #[arg(long, env = "SEQFUSE_CHECKPOINT")]
    pub checkpoint: Option<PathBuf>,
    /// Directory for report.json and report.txt.
    #[arg(long, env = "SEQFUSE_REPORT_DIR")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "fsp")]
    pub protocol: ProtocolArg,
    /// Gallery cameras for the fixed set protocol, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub gallery: Option<Vec<CameraId>>,
    /// Fusers to run: comma-separated from gru, mean, max, single-query, or all.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub fuser: Vec<String>,
    /// Re-score the largest query set under N random camera orders.
    #[arg(long, value_name = "N")]
    pub order_check: Option<usize>,
    /// Seed of the random orders.
    #[arg(long, default_value_t = 0)]
    pub order_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Vsp,
    Fsp,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "SEQFUSE_MANIFEST")]
    pub manifest: PathBuf,
    /// Without a checkpoint only the mean, max and single-query fusers work.
    #[arg(long, env = "SEQFUSE_CHECKPOINT")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// 0 picks a free port.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Expose identities and first-correct ranks in responses.
    #[arg(long)]
    pub study: bool,
    /// Append-only session journal; replayed on start when it exists.
    #[arg(long, env = "SEQFUSE_JOURNAL")]
    pub journal: Option<PathBuf>,
}

/// Parses `args` and runs the command, writing human output to `out`.
/// Returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a, out),
        Command::Train(a) => cmd_train(&a, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Serve(a) => cmd_serve(&a, out),
    }
}

fn console(out: &mut dyn Write, text: &str) {
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| Error::io(p, e)),
        _ => Ok(()),
    }
}

pub fn gen_spec(a: &GenArgs) -> Result<SyntheticSpec> {
    let mut spec = match &a.spec {
        Some(p) => read_json(p)?,
        None => SyntheticSpec::default(),
    };
    if let Some(c) = a.cameras {
        spec = spec.with_cameras(c);
    }
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {$(if let Some(v) = a.$flag.clone() { spec.$field = v; })*};
    }
    set!(train_ids => train_identities, test_ids => test_identities, distractors => distractors, dim => dim,
        latent_scale => latent_scale, transform_scale => transform_scale, bias_scale => bias_scale, noise => noise,
        visibility => visibility, train_per_camera => train_per_camera, gallery_per_camera => gallery_per_camera,
        seed => seed);
    spec.validate()?;
    Ok(spec)
}

fn cmd_gen(a: &GenArgs, out: &mut dyn Write) -> Result<()> {
    let spec = gen_spec(a)?;
    let ds = generate_synthetic(&spec)?;
    ensure_parent(&a.out)?;
    let storage = if a.sidecar {
        FeatureStorage::Sidecar
    } else {
        FeatureStorage::Inline
    };
    let written = write_manifest(&a.out, &ds, storage)?;
    let mut text = DatasetSummary::of(&ds).to_string();
    for p in written {
        text.push_str(&format!("wrote {}\n", p.display()));
    }
    console(out, &text);
    Ok(())
}

pub fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = match (&a.config, a.desk) {
        (Some(p), _) => read_json(p)?,
        (None, true) => TrainConfig::desk(),
        (None, false) => TrainConfig::default(),
    };
    if let Some(v) = a.lr {
        cfg.learning_rate.initial = v;
    }
    if let Some(v) = a.lr_t0 {
        cfg.learning_rate.t0 = v;
    }
    if let Some(v) = a.lr_t1 {
        cfg.learning_rate.t1 = v;
    }
    if let Some(v) = a.lambda0 {
        cfg.lambda0 = v;
    }
    if let Some(v) = a.beta1 {
        cfg.adam.beta1 = v;
    }
    if let Some(v) = a.beta2 {
        cfg.adam.beta2 = v;
    }
    if let Some(v) = a.epsilon {
        cfg.adam.epsilon = v;
    }
    if let Some(v) = a.batch_ids {
        cfg.batch_identities = v;
    }
    if let Some(v) = a.iters {
        cfg.iterations = v;
    }
    if let Some(v) = a.hidden {
        cfg.hidden = v;
    }
    if let Some(v) = a.gru_input {
        cfg.gru_input = match v {
            GruInputArg::Pooled => GruInput::Pooled,
            GruInputArg::Raw => GruInput::Raw,
        };
    }
    match (a.triplet, a.margin) {
        (Some(TripletArg::Soft), Some(_)) => {
            return Err(Error::Usage(
                "--margin applies to --triplet hinge only".into(),
            ))
        }
        (Some(TripletArg::Soft), None) => cfg.triplet = TripletKind::SoftMargin,
        (Some(TripletArg::Hinge), m) => {
            cfg.triplet = TripletKind::Hinge {
                margin: m.unwrap_or(TripletKind::DEFAULT_MARGIN),
            }
        }
        (None, Some(m)) => match &mut cfg.triplet {
            TripletKind::Hinge { margin } => *margin = m,
            TripletKind::SoftMargin => {
                return Err(Error::Usage(
                    "--margin applies to --triplet hinge only".into(),
                ))
            }
        },
        (None, None) => {}
    }
    if a.no_mloss {
        cfg.monotonicity = false;
    }
    if let Some(v) = a.positive {
        cfg.positive = match v {
            PositiveArg::Own => PositiveSource::OwnSequence,
            PositiveArg::Cross => PositiveSource::CrossSequence,
        };
    }
    if let Some(v) = a.camera_order {
        cfg.camera_order = match v {
            OrderArg::Ascending => CameraOrder::Ascending,
            OrderArg::Shuffled => CameraOrder::Shuffled,
        };
    }
    if let Some(v) = a.checkpoint_every {
        cfg.checkpoint_every = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn default_loss_log(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.file_name().unwrap_or_default().to_os_string();
    name.push(".loss.tsv");
    checkpoint.with_file_name(name)
}

fn iteration_path(checkpoint: &Path, done: u64) -> PathBuf {
    let mut name = checkpoint.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".iter{done}"));
    checkpoint.with_file_name(name)
}

/// Streams the loss log and writes periodic checkpoints. IO failures are
/// kept here and reported after training stops.
struct FileObserver<'a> {
    log: BufWriter<fs::File>,
    log_path: PathBuf,
    checkpoint: &'a Path,
    cfg: &'a TrainConfig,
    failure: Option<Error>,
}

impl FileObserver<'_> {
    fn stop(&mut self, e: Error) -> seqfuse_core::Error {
        let detail = e.to_string();
        self.failure = Some(e);
        seqfuse_core::Error::Argument {
            op: "train observer",
            detail,
        }
    }
}

impl TrainObserver for FileObserver<'_> {
    fn on_iteration(&mut self, log: &IterationLog) -> seqfuse_core::Result<()> {
        if let Err(e) = writeln!(self.log, "{}", loss_line(log)) {
            let e = Error::io(&self.log_path, e);
            return Err(self.stop(e));
        }
        Ok(())
    }

    fn on_checkpoint(&mut self, completed: u64, model: &FusionModel) -> seqfuse_core::Result<()> {
        let path = iteration_path(self.checkpoint, completed);
        if let Err(e) = save_checkpoint(&path, model, self.cfg.seed, Some(self.cfg.clone())) {
            return Err(self.stop(e));
        }
        Ok(())
    }
}

fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = train_config(a)?;
    let ds = load_manifest(&a.manifest)?;
    let log_path = a
        .loss_log
        .clone()
        .unwrap_or_else(|| default_loss_log(&a.out));
    ensure_parent(&a.out)?;
    ensure_parent(&log_path)?;
    let file = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut observer = FileObserver {
        log: BufWriter::new(file),
        log_path: log_path.clone(),
        checkpoint: &a.out,
        cfg: &cfg,
        failure: None,
    };
    writeln!(observer.log, "{LOSS_LOG_HEADER}").map_err(|e| Error::io(&log_path, e))?;
    let result = train(&ds, &cfg, &mut observer);
    observer.log.flush().map_err(|e| Error::io(&log_path, e))?;
    if let Some(e) = observer.failure.take() {
        return Err(e);
    }
    let outcome = result?;
    save_checkpoint(&a.out, &outcome.model, cfg.seed, Some(cfg.clone()))?;
    let last = outcome.history.last();
    console(
        out,
        &format!(
            "trained {} iterations, final loss {}\nwrote {}\nwrote {}\n",
            cfg.iterations,
            last.map_or("n/a".to_string(), |l| format!("{:.6}", l.loss.total)),
            a.out.display(),
            log_path.display()
        ),
    );
    Ok(())
}

pub fn parse_fusers(raw: &[String]) -> Result<Vec<Fuser>> {
    let mut fusers = Vec::new();
    for name in raw {
        let name = name.trim();
        if name == "all" {
            fusers.extend(Fuser::ALL);
        } else {
            fusers.push(
                name.parse::<Fuser>()
                    .map_err(|e| Error::Usage(e.to_string()))?,
            );
        }
    }
    fusers.sort();
    fusers.dedup();
    if fusers.is_empty() {
        return Err(Error::Usage("no fuser selected".into()));
    }
    Ok(fusers)
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let fusers = parse_fusers(&a.fuser)?;
    let protocol = match a.protocol {
        ProtocolArg::Vsp => Protocol::Vsp,
        ProtocolArg::Fsp => Protocol::Fsp,
    };
    match (protocol, &a.gallery) {
        (Protocol::Fsp, None) => return Err(Error::Usage("--protocol fsp needs --gallery".into())),
        (Protocol::Vsp, Some(_)) => {
            return Err(Error::Usage(
                "--gallery applies to --protocol fsp only".into(),
            ))
        }
        _ => {}
    }
    if fusers.contains(&Fuser::Gru) && a.checkpoint.is_none() {
        return Err(Error::Usage("the gru fuser needs --checkpoint".into()));
    }
    if a.order_check == Some(0) {
        return Err(Error::Usage(
            "--order-check needs at least one order".into(),
        ));
    }

    let ds = load_manifest(&a.manifest)?;
    let model = match &a.checkpoint {
        Some(p) => {
            let ck = load_checkpoint(p)?;
            if ck.model.input_dim() != ds.dim() {
                return Err(Error::format(
                    p,
                    format!(
                        "checkpoint expects {}-dimensional features, manifest has {}",
                        ck.model.input_dim(),
                        ds.dim()
                    ),
                ));
            }
            ck.model
        }
        // Pool and single-query fusers never touch the model.
        None => FusionModel::zeros(ds.dim().max(1), 1),
    };
    let plans = match protocol {
        Protocol::Vsp => vsp_plans(ds.camera_count(), &ds)?,
        Protocol::Fsp => fsp_plans(a.gallery.as_deref().unwrap_or_default(), &ds)?,
    };
    if plans.is_empty() {
        return Err(Error::format(
            &a.manifest,
            "no protocol plan has an eligible identity",
        ));
    }
    let mut reports = Vec::new();
    for &f in &fusers {
        reports.push(run_protocol(&model, &ds, &plans, f)?);
    }
    let mut order_checks = Vec::new();
    if let Some(n) = a.order_check {
        let largest = plans.iter().map(|p| p.size()).max().unwrap_or(0);
        let plan = plans
            .iter()
            .find(|p| p.size() == largest)
            .expect("plans are non-empty");
        for &f in &fusers {
            let result = order_invariance_experiment(&model, &ds, plan, f, n, a.order_seed)?;
            order_checks.push(OrderCheck {
                fuser: f,
                plan: plan.id,
                gallery_cameras: plan.gallery_cameras.clone(),
                result,
            });
        }
    }
    let doc = EvalDocument {
        protocol,
        gallery: a.gallery.clone(),
        reports,
        order_checks,
    };
    let text = doc.to_text();
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let json_path = a.out_dir.join("report.json");
    let mut json =
        serde_json::to_vec_pretty(&doc).map_err(|e| Error::format(&json_path, e.to_string()))?;
    json.push(b'\n');
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    let txt_path = a.out_dir.join("report.txt");
    fs::write(&txt_path, &text).map_err(|e| Error::io(&txt_path, e))?;
    console(
        out,
        &format!(
            "{text}\nwrote {}\nwrote {}\n",
            json_path.display(),
            txt_path.display()
        ),
    );
    Ok(())
}

fn cmd_serve(a: &ServeArgs, out: &mut dyn Write) -> Result<()> {
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .or_else(|_| {
            use std::net::ToSocketAddrs;
            (a.host.as_str(), a.port)
                .to_socket_addrs()
                .ok()
                .and_then(|mut it| it.next())
                .ok_or(())
        })
        .map_err(|()| Error::Usage(format!("cannot resolve host {:?}", a.host)))?;
    let ds = load_manifest(&a.manifest)?;
    let model = match &a.checkpoint {
        Some(p) => {
            let ck = load_checkpoint(p)?;
            if ck.model.input_dim() != ds.dim() {
                return Err(Error::format(
                    p,
                    "checkpoint and manifest feature dimensions differ",
                ));
            }
            Some(Arc::new(ck.model))
        }
        None => None,
    };
    let engine = Engine::new(Arc::new(ds), model, a.study);
    let mut service = Service::new(engine);
    if let Some(j) = &a.journal {
        service = service.with_journal(j)?;
    }
    let shared = Arc::new(Mutex::new(service));
    let app = router(Arc::clone(&shared));

    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::Usage(format!("cannot start runtime: {e}")))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Error::Io {
                path: PathBuf::from(addr.to_string()),
                source: e,
            })?;
        let bound = listener.local_addr().map_err(|e| Error::Io {
            path: PathBuf::from(addr.to_string()),
            source: e,
        })?;
        console(out, &format!("listening on http://{bound}\n"));
        axum::serve(listener, app)
            .with_graceful_shutdown(shutdown_signal())
            .await
            .map_err(|e| Error::Io {
                path: PathBuf::from(bound.to_string()),
                source: e,
            })
    })?;
    let mut s = shared.lock().unwrap_or_else(|p| p.into_inner());
    s.flush()?;
    console(out, "shut down\n");
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}
