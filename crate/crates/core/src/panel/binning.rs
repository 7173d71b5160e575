use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinningMode {
    /// One set of breakpoints from the counts of all actors in all waves.
    #[default]
    Pooled,
    /// Separate breakpoints per wave.
    PerWave,
}

/// Discretized behavior plus the breakpoints that produced it.
///
/// A count `c` maps to `1 + #{k : c > breakpoints[k]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binning {
    pub mode: BinningMode,
    /// One entry for pooled binning, one per wave otherwise; each of length `L - 1`.
    pub breakpoints: Vec<Vec<u64>>,
    pub levels: Vec<Vec<u32>>,
}

/// Nearest-rank quantiles at `k / L`, `k = 1..L-1`.
fn quantile_breakpoints(values: &mut [u64], n_levels: u32) -> Result<Vec<u64>, DataError> {
    values.sort_unstable();
    let mut distinct = values.to_vec();
    distinct.dedup();
    if distinct.len() > 1 && distinct.len() < n_levels as usize {
        return Err(DataError::TooFewDistinctCounts {
            distinct: distinct.len(),
            n_levels,
        });
    }
    let m = values.len();
    Ok((1..n_levels)
        .map(|k| {
            let q = k as f64 / n_levels as f64;
            let rank = ((q * m as f64) - 1e-9).ceil().max(1.0) as usize;
            values[rank.min(m) - 1]
        })
        .collect())
}

fn apply(counts: &[u64], breakpoints: &[u64]) -> Vec<u32> {
    counts
        .iter()
        .map(|&c| 1 + breakpoints.iter().filter(|&&b| c > b).count() as u32)
        .collect()
}

/// Maps raw non-negative counts (`counts[wave][actor]`) to levels in `[1, L]`.
///
/// A distribution with a single distinct value collapses to level 1; one with
/// more than one but fewer than `L` distinct values is rejected.
pub fn bin_counts_to_levels(counts: &[Vec<u64>], n_levels: u32, mode: BinningMode) -> Result<Binning, DataError> {
    if n_levels < 2 {
        return Err(DataError::Invalid(format!("n_levels must be >= 2, got {n_levels}")));
    }
    match mode {
        BinningMode::Pooled => {
            let mut pooled: Vec<u64> = counts.iter().flatten().copied().collect();
            if pooled.is_empty() {
                return Err(DataError::Invalid("no counts to bin".into()));
            }
            let bp = quantile_breakpoints(&mut pooled, n_levels)?;
            let levels = counts.iter().map(|w| apply(w, &bp)).collect();
            Ok(Binning {
                mode,
                breakpoints: vec![bp],
                levels,
            })
        }
        BinningMode::PerWave => {
            let mut breakpoints = Vec::with_capacity(counts.len());
            let mut levels = Vec::with_capacity(counts.len());
            for wave in counts {
                if wave.is_empty() {
                    return Err(DataError::Invalid("no counts to bin".into()));
                }
                let bp = quantile_breakpoints(&mut wave.clone(), n_levels)?;
                levels.push(apply(wave, &bp));
                breakpoints.push(bp);
            }
            Ok(Binning {
                mode,
                breakpoints,
                levels,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn all_zero_collapses_to_lowest() {
        let b = bin_counts_to_levels(&[vec![0; 5], vec![0; 5]], 3, BinningMode::Pooled).unwrap();
        assert!(b.levels.iter().flatten().all(|&l| l == 1));
    }

    #[test]
    fn median_split() {
        let b = bin_counts_to_levels(&[vec![0, 10, 20, 30]], 2, BinningMode::Pooled).unwrap();
        assert_eq!(b.breakpoints, vec![vec![10]]);
        assert_eq!(b.levels, vec![vec![1, 1, 2, 2]]);
    }

    #[test]
    fn too_few_distinct_values() {
        let err = bin_counts_to_levels(&[vec![0, 0, 1, 1]], 3, BinningMode::Pooled).unwrap_err();
        assert!(matches!(err, DataError::TooFewDistinctCounts { distinct: 2, n_levels: 3 }));
    }

    #[test]
    fn pooled_breakpoints_apply_to_every_wave() {
        let counts = vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]];
        let pooled = bin_counts_to_levels(&counts, 2, BinningMode::Pooled).unwrap();
        assert_eq!(pooled.levels, vec![vec![1, 1, 1, 1], vec![2, 2, 2, 2]]);
        let per_wave = bin_counts_to_levels(&counts, 2, BinningMode::PerWave).unwrap();
        assert_eq!(per_wave.levels, vec![vec![1, 1, 2, 2], vec![1, 1, 2, 2]]);
    }

    proptest! {
        #[test]
        fn monotone_and_permutation_equivariant(
            wave in prop::collection::vec(0u64..50, 8..30),
            shift in 0usize..30,
        ) {
            let counts = vec![wave.clone()];
            let Ok(b) = bin_counts_to_levels(&counts, 4, BinningMode::Pooled) else { return Ok(()) };
            let levels = &b.levels[0];
            for a in 0..wave.len() {
                prop_assert!((1..=4).contains(&levels[a]));
                for c in 0..wave.len() {
                    if wave[a] <= wave[c] {
                        prop_assert!(levels[a] <= levels[c]);
                    }
                }
            }
            let mut rotated = wave.clone();
            rotated.rotate_left(shift % wave.len());
            let rb = bin_counts_to_levels(&[rotated], 4, BinningMode::Pooled).unwrap();
            let mut expect = levels.clone();
            expect.rotate_left(shift % wave.len());
            prop_assert_eq!(&rb.levels[0], &expect);
        }
    }
}
