use alloc::vec;
use alloc::vec::Vec;

use crate::math::euclidean;

/// CMC curves stop at this rank or the gallery size, whichever is smaller.
pub const CMC_MAX_RANK: usize = 50;

/// Gallery positions sorted by distance to `query`, ties by position.
pub fn rank_gallery<S: AsRef<[f64]>>(query: &[f64], gallery: &[S]) -> Vec<usize> {
    let dist: Vec<f64> = gallery
        .iter()
        .map(|g| euclidean(query, g.as_ref()))
        .collect();
    let mut order: Vec<usize> = (0..gallery.len()).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    order
}

/// 1-based rank of the first relevant entry.
pub fn first_correct_rank(relevant: &[bool]) -> Option<usize> {
    relevant.iter().position(|&r| r).map(|i| i + 1)
}

/// Mean of precision@i over relevant positions; `None` without relevant items.
pub fn average_precision(relevant: &[bool]) -> Option<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &r) in relevant.iter().enumerate() {
        if r {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

/// `cmc[r-1]` is the fraction of queries whose first correct match has rank ≤ r.
/// Queries without a match count as misses at every rank.
pub fn cmc(first_correct: &[Option<usize>], max_rank: usize) -> Vec<f64> {
    let mut curve = vec![0.0; max_rank];
    if first_correct.is_empty() {
        return curve;
    }
    for rank in first_correct.iter().flatten() {
        for slot in curve.iter_mut().skip(rank - 1) {
            *slot += 1.0;
        }
    }
    let n = first_correct.len() as f64;
    curve.iter_mut().for_each(|v| *v /= n);
    curve
}
