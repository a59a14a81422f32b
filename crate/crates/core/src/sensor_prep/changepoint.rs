//! Binary segmentation under a Gaussian mean-shift model and the piecewise
//! 3σ repair built on it.

use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_MIN_SEG: usize = 30;

/// Per-split penalty `3 ln n`.
pub fn default_penalty(n: usize) -> f64 {
    3.0 * (n as f64).ln()
}

/// Piecewise-constant mean and standard deviation of one signal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segmentation {
    pub n: usize,
    /// Segment start indices, excluding 0; strictly increasing and `< n`.
    pub breakpoints: Vec<usize>,
    pub seg_mean: Vec<f64>,
    /// Population standard deviation within each segment.
    pub seg_std: Vec<f64>,
}

impl Segmentation {
    fn from_breakpoints(signal: &[f64], breakpoints: Vec<usize>) -> Self {
        let mut seg_mean = Vec::with_capacity(breakpoints.len() + 1);
        let mut seg_std = Vec::with_capacity(breakpoints.len() + 1);
        let bounds = std::iter::once(0).chain(breakpoints.iter().copied()).zip(
            breakpoints
                .iter()
                .copied()
                .chain(std::iter::once(signal.len())),
        );
        for (a, b) in bounds {
            let seg = &signal[a..b];
            let m = seg.iter().sum::<f64>() / seg.len() as f64;
            let var = seg.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / seg.len() as f64;
            seg_mean.push(m);
            seg_std.push(var.sqrt());
        }
        Segmentation {
            n: signal.len(),
            breakpoints,
            seg_mean,
            seg_std,
        }
    }

    /// One segment covering the whole signal.
    pub fn single(signal: &[f64]) -> Self {
        Self::from_breakpoints(signal, Vec::new())
    }

    pub fn n_segments(&self) -> usize {
        self.breakpoints.len() + 1
    }

    /// Half-open `[start, end)` ranges of every segment.
    pub fn segments(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        std::iter::once(0)
            .chain(self.breakpoints.iter().copied())
            .zip(
                self.breakpoints
                    .iter()
                    .copied()
                    .chain(std::iter::once(self.n)),
            )
    }

    pub fn segment_of(&self, i: usize) -> usize {
        self.breakpoints.partition_point(|&b| b <= i)
    }

    /// The piecewise-constant mean approximation.
    pub fn mean_signal(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n);
        for (s, (a, b)) in self.segments().enumerate() {
            out.extend(std::iter::repeat_n(self.seg_mean[s], b - a));
        }
        out
    }
}

struct PrefixSums {
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl PrefixSums {
    fn new(signal: &[f64]) -> Self {
        // Centering keeps the running sums well conditioned for signals
        // sitting far from zero (temperatures around 400 °C).
        let center = signal.iter().sum::<f64>() / signal.len() as f64;
        let mut s1 = Vec::with_capacity(signal.len() + 1);
        let mut s2 = Vec::with_capacity(signal.len() + 1);
        let (mut a, mut b) = (0.0, 0.0);
        s1.push(0.0);
        s2.push(0.0);
        for &x in signal {
            let y = x - center;
            a += y;
            b += y * y;
            s1.push(a);
            s2.push(b);
        }
        PrefixSums { s1, s2 }
    }

    /// Residual sum of squares of `[a, b)` about its own mean.
    fn sse(&self, a: usize, b: usize) -> f64 {
        let n = (b - a) as f64;
        let s = self.s1[b] - self.s1[a];
        (self.s2[b] - self.s2[a] - s * s / n).max(0.0)
    }
}

/// Best split of `[a, b)`: returns `(k, gain)` where the gain is twice the
/// log-likelihood improvement of a mean shift at `k`, with the variance
/// estimated on the candidate segment: `len · ln(SSE_whole / SSE_split)`.
fn best_split(sums: &PrefixSums, a: usize, b: usize, min_seg: usize) -> Option<(usize, f64)> {
    if b - a < 2 * min_seg {
        return None;
    }
    let whole = sums.sse(a, b);
    if whole <= 0.0 {
        return None;
    }
    let mut best: Option<(usize, f64)> = None;
    for k in a + min_seg..=b - min_seg {
        let split = sums.sse(a, k) + sums.sse(k, b);
        let gain = if split <= 0.0 {
            f64::INFINITY
        } else {
            (b - a) as f64 * (whole / split).ln()
        };
        if best.is_none_or(|(_, g)| gain > g) {
            best = Some((k, gain));
        }
    }
    best
}

/// Binary segmentation: split wherever the mean-shift likelihood-ratio gain
/// exceeds `penalty`, recursing into both halves. Every segment keeps at
/// least `min_seg` samples.
pub fn detect_change_points(signal: &[f64], penalty: f64, min_seg: usize) -> Result<Segmentation> {
    let min_seg = min_seg.max(1);
    if signal.len() < 2 * min_seg {
        return Err(Error::SeriesTooShort {
            needed: 2 * min_seg,
            got: signal.len(),
        });
    }
    if signal.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "signal contains non-finite values".into(),
        ));
    }
    let sums = PrefixSums::new(signal);
    let mut breakpoints = Vec::new();
    let mut stack = vec![(0, signal.len())];
    while let Some((a, b)) = stack.pop() {
        if let Some((k, gain)) = best_split(&sums, a, b, min_seg) {
            if gain > penalty {
                breakpoints.push(k);
                stack.push((a, k));
                stack.push((k, b));
            }
        }
    }
    breakpoints.sort_unstable();
    Ok(Segmentation::from_breakpoints(signal, breakpoints))
}

/// Replaces every sample further than three segment standard deviations
/// from its segment mean with that mean. Returns the repaired series and the
/// number of replaced samples.
pub fn repair_short_term(signal: &[f64], seg: &Segmentation) -> (Vec<f64>, usize) {
    let mut out = signal.to_vec();
    let mut count = 0;
    for (s, (a, b)) in seg.segments().enumerate() {
        let (m, sd) = (seg.seg_mean[s], seg.seg_std[s]);
        for x in &mut out[a..b] {
            if (*x - m).abs() > 3.0 * sd {
                *x = m;
                count += 1;
            }
        }
    }
    (out, count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn noise(rng: &mut ChaCha8Rng, n: usize, sd: f64) -> Vec<f64> {
        (0..n)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    #[test]
    fn single_step_is_found() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut x = noise(&mut rng, 100, 0.1);
        for v in &mut x[50..] {
            *v += 5.0;
        }
        let seg = detect_change_points(&x, default_penalty(100), DEFAULT_MIN_SEG).unwrap();
        assert_eq!(seg.breakpoints.len(), 1);
        assert!(seg.breakpoints[0].abs_diff(50) <= 1);
        assert!((seg.seg_mean[1] - seg.seg_mean[0] - 5.0).abs() < 0.1);
    }

    #[test]
    fn pure_noise_rarely_splits() {
        let mut quiet = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = noise(&mut rng, 500, 1.0);
            let seg = detect_change_points(&x, default_penalty(500), DEFAULT_MIN_SEG).unwrap();
            if seg.breakpoints.is_empty() {
                quiet += 1;
            }
        }
        assert!(
            quiet >= 95,
            "{quiet} of 100 null trials without breakpoints"
        );
    }

    #[test]
    fn constant_signal() {
        let seg = detect_change_points(&[4.0; 80], default_penalty(80), 30).unwrap();
        assert!(seg.breakpoints.is_empty());
        assert_eq!(seg.seg_std, vec![0.0]);
        assert_eq!(seg.seg_mean, vec![4.0]);
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            detect_change_points(&[1.0; 10], 1.0, 30),
            Err(Error::SeriesTooShort {
                needed: 60,
                got: 10
            })
        ));
    }

    #[test]
    fn three_sigma_rule() {
        let seg = Segmentation {
            n: 3,
            breakpoints: vec![],
            seg_mean: vec![10.0],
            seg_std: vec![1.0],
        };
        let (out, n) = repair_short_term(&[14.0, 12.9, 7.5], &seg);
        assert_eq!(out, vec![10.0, 12.9, 7.5]);
        assert_eq!(n, 1);
    }

    #[test]
    fn segmentation_reduces_within_variance_on_shifted_signals() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x = noise(&mut rng, 600, 1.0);
            for v in &mut x[200..450] {
                *v += 3.0;
            }
            let seg = detect_change_points(&x, default_penalty(600), DEFAULT_MIN_SEG).unwrap();
            let pooled: f64 = seg
                .segments()
                .enumerate()
                .map(|(s, (a, b))| (b - a) as f64 * seg.seg_std[s].powi(2))
                .sum::<f64>()
                / 600.0;
            let whole = Segmentation::single(&x).seg_std[0].powi(2);
            assert!(pooled <= whole);
            assert!(seg.breakpoints.len() >= 2);
        }
    }

    proptest! {
        #[test]
        fn segmentation_invariants(xs in prop::collection::vec(-50.0f64..50.0, 60..400), min_seg in 5usize..30) {
            let seg = detect_change_points(&xs, default_penalty(xs.len()), min_seg).unwrap();
            let mut prev = 0;
            for (a, b) in seg.segments() {
                prop_assert!(b - a >= min_seg);
                prop_assert!(a == prev);
                prev = b;
            }
            prop_assert_eq!(prev, xs.len());
            prop_assert!(seg.seg_std.iter().all(|&s| s >= 0.0));
        }

        #[test]
        fn repair_only_touches_far_samples(xs in prop::collection::vec(-50.0f64..50.0, 60..300)) {
            let seg = detect_change_points(&xs, default_penalty(xs.len()), 20).unwrap();
            let (out, count) = repair_short_term(&xs, &seg);
            let mut changed = 0;
            for (i, (&x, &y)) in xs.iter().zip(&out).enumerate() {
                let s = seg.segment_of(i);
                let (m, sd) = (seg.seg_mean[s], seg.seg_std[s]);
                if (x - m).abs() <= 3.0 * sd {
                    prop_assert_eq!(x, y);
                } else {
                    changed += 1;
                }
                prop_assert!((y - m).abs() <= 3.0 * sd + 1e-12);
            }
            prop_assert_eq!(changed, count);
        }
    }
}
