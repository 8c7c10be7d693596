use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolKind {
    Mean,
    Max,
}

/// Elementwise mean or max over raw feature vectors.
///
/// The mean is summed sequentially in slice order, so any permutation gives
/// the same result to within rounding (≤ 1e-12 for unit-scale inputs) and
/// canonically ordered inputs give bitwise-identical output.
pub fn pool_fuse<S: AsRef<[f64]>>(kind: PoolKind, features: &[S]) -> Result<Vec<f64>> {
    let Some(first) = features.first() else {
        return Err(Error::arg("pool_fuse", "empty feature list"));
    };
    let dim = first.as_ref().len();
    let mut acc = first.as_ref().to_vec();
    for f in &features[1..] {
        let f = f.as_ref();
        if f.len() != dim {
            return Err(Error::dim(
                "pool_fuse",
                alloc::format!("{} vs {dim}", f.len()),
            ));
        }
        for (a, &v) in acc.iter_mut().zip(f) {
            match kind {
                PoolKind::Mean => *a += v,
                PoolKind::Max => *a = a.max(v),
            }
        }
    }
    if kind == PoolKind::Mean {
        let n = features.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn examples() {
        let xs = [vec![1.0, 3.0], vec![3.0, 1.0]];
        assert_eq!(pool_fuse(PoolKind::Mean, &xs).unwrap(), vec![2.0, 2.0]);
        assert_eq!(pool_fuse(PoolKind::Max, &xs).unwrap(), vec![3.0, 3.0]);
        let same = vec![vec![0.3, -0.7]; 4];
        assert_eq!(pool_fuse(PoolKind::Mean, &same).unwrap(), vec![0.3, -0.7]);
        assert_eq!(pool_fuse(PoolKind::Max, &same).unwrap(), vec![0.3, -0.7]);
        assert!(pool_fuse::<Vec<f64>>(PoolKind::Mean, &[]).is_err());
    }

    #[test]
    fn max_pool_is_permutation_invariant() {
        let xs = [
            vec![0.1, 2.0, -1.0],
            vec![-3.0, 0.5, 4.0],
            vec![1.5, 1.5, 0.0],
        ];
        let rev: Vec<_> = xs.iter().rev().cloned().collect();
        assert_eq!(
            pool_fuse(PoolKind::Max, &xs).unwrap(),
            pool_fuse(PoolKind::Max, &rev).unwrap()
        );
    }
}
