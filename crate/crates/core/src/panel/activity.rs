use serde::{Deserialize, Serialize};

/// Posting-activity class of an actor within one wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActivityLabel {
    /// Most active posters: top decile.
    Map,
    /// Least active posters: bottom decile.
    Lap,
    /// Everyone else.
    MoAp,
}

impl ActivityLabel {
    #[inline]
    pub fn is_map(self) -> bool {
        self == ActivityLabel::Map
    }

    #[inline]
    pub fn is_lap(self) -> bool {
        self == ActivityLabel::Lap
    }
}

/// Percentile positions of the LAP and MAP cutoffs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityCutoffs {
    pub lower: f64,
    pub upper: f64,
}

impl Default for ActivityCutoffs {
    fn default() -> Self {
        Self {
            lower: 0.10,
            upper: 0.90,
        }
    }
}

/// Number of actors a nearest-rank tail of mass `p` covers, at least one.
fn tail_rank(p: f64, n: usize) -> usize {
    // 0.1 * 30 evaluates to 3.0000000000000004; don't let that round up.
    (((p * n as f64) - 1e-9).ceil() as usize).clamp(1, n)
}

/// Labels one wave of behavior levels.
///
/// The MAP cutoff is the `ceil((1 - upper) N)`-th largest level and the LAP
/// cutoff the `ceil(lower N)`-th smallest; actors at or beyond a cutoff take
/// its label. An actor satisfying both cutoffs (a wave without dispersion) is
/// MoAP.
pub fn classify_activity(levels: &[u32], cutoffs: ActivityCutoffs) -> Vec<ActivityLabel> {
    let n = levels.len();
    if n == 0 {
        return Vec::new();
    }
    let mut sorted = levels.to_vec();
    sorted.sort_unstable();
    let upper_cut = sorted[n - tail_rank(1.0 - cutoffs.upper, n)];
    let lower_cut = sorted[tail_rank(cutoffs.lower, n) - 1];
    levels
        .iter()
        .map(|&p| match (p >= upper_cut, p <= lower_cut) {
            (true, false) => ActivityLabel::Map,
            (false, true) => ActivityLabel::Lap,
            _ => ActivityLabel::MoAp,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ActivityLabel::*;

    #[test]
    fn distinct_levels_one_each_side() {
        let levels: Vec<u32> = (1..=10).collect();
        let labels = classify_activity(&levels, ActivityCutoffs::default());
        assert_eq!(labels[9], Map);
        assert_eq!(labels[0], Lap);
        assert!(labels[1..9].iter().all(|&l| l == MoAp));
    }

    #[test]
    fn constant_wave_is_all_moap() {
        let labels = classify_activity(&[3; 7], ActivityCutoffs::default());
        assert!(labels.iter().all(|&l| l == MoAp));
    }

    #[test]
    fn ties_at_max_are_all_map() {
        let mut levels: Vec<u32> = (1..=18).collect();
        levels.extend([25, 25]);
        let labels = classify_activity(&levels, ActivityCutoffs::default());
        assert_eq!(labels.iter().filter(|l| l.is_map()).count(), 2);
        assert!(labels[18].is_map() && labels[19].is_map());
        // ceil(0.1 * 20) = 2 smallest: levels 1 and 2
        assert_eq!(labels.iter().filter(|l| l.is_lap()).count(), 2);
    }

    #[test]
    fn ties_at_cutoff_extend_the_class() {
        let levels = [1, 1, 1, 2, 2, 2, 2, 2, 3, 3];
        let labels = classify_activity(&levels, ActivityCutoffs::default());
        assert_eq!(labels.iter().filter(|l| l.is_lap()).count(), 3);
        assert_eq!(labels.iter().filter(|l| l.is_map()).count(), 2);
    }

    #[test]
    fn rank_rounding_is_stable() {
        assert_eq!(tail_rank(0.1, 30), 3);
        assert_eq!(tail_rank(1.0 - 0.9, 10), 1);
        assert_eq!(tail_rank(0.1, 3), 1);
    }
}
