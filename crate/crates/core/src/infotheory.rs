//! Gaussian detection model, mutual information and capacity of the binary
//! OISK channel.
//!
//! `P_ij` is the probability of deciding symbol `i` when symbol `j` was
//! sent. Probability mass that lands in no band is an erasure and is simply
//! missing from the matrix.

use serde::Serialize;

use crate::domain::{validate_config, ExperimentConfig};
use crate::psychophysics::{build_scheme, IntensityBand};
use crate::simulation::{simulate_symbol, Execution, SymbolStats};
use crate::Error;

/// Grid step of the coarse capacity search.
const COARSE_STEP: f64 = 1e-3;
/// Width at which golden-section refinement stops.
const ALPHA_TOLERANCE: f64 = 1e-9;

/// CDF of N(mu, sigma²) at `x`.
///
/// Uses `libm::erfc` (the fdlibm rational approximations, error below one
/// ulp over the whole real line), so the absolute error of the result is
/// far below 1e-10. For `x` above the mean the upper tail is complemented
/// rather than the lower tail, which keeps the small tail accurate.
pub fn gaussian_cdf(x: f64, mu: f64, sigma: f64) -> f64 {
    debug_assert!(sigma > 0.0);
    let z = (x - mu) / (sigma * std::f64::consts::SQRT_2);
    0.5 * libm::erfc(-z)
}

/// Upper tail `1 − gaussian_cdf(x, mu, sigma)`, accurate when it is tiny.
pub fn gaussian_sf(x: f64, mu: f64, sigma: f64) -> f64 {
    debug_assert!(sigma > 0.0);
    let z = (x - mu) / (sigma * std::f64::consts::SQRT_2);
    0.5 * libm::erfc(z)
}

/// Probability that N(mean, std²) falls inside the band's concentration
/// interval. With zero spread the density collapses to a point mass and the
/// result is an indicator.
pub fn detection_probability(stats: &SymbolStats, band: &IntensityBand) -> f64 {
    band_probability(stats.mean, stats.std_dev, band.conc_lo, band.conc_hi)
}

pub(crate) fn band_probability(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    if sigma <= 0.0 {
        return if lo <= mu && mu <= hi { 1.0 } else { 0.0 };
    }
    let p = if lo > mu {
        gaussian_sf(lo, mu, sigma) - gaussian_sf(hi, mu, sigma)
    } else {
        gaussian_cdf(hi, mu, sigma) - gaussian_cdf(lo, mu, sigma)
    };
    p.clamp(0.0, 1.0)
}

/// Binary detection probabilities. `p_ij = Pr(Y = i | X = j)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetectionMatrix {
    #[serde(rename = "P00")]
    pub p00: f64,
    #[serde(rename = "P01")]
    pub p01: f64,
    #[serde(rename = "P10")]
    pub p10: f64,
    #[serde(rename = "P11")]
    pub p11: f64,
}

impl DetectionMatrix {
    pub fn new(p00: f64, p01: f64, p10: f64, p11: f64) -> Self {
        Self { p00, p01, p10, p11 }
    }

    /// Perfect, erasure-free channel.
    pub fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 1.0)
    }

    pub fn is_valid(&self) -> bool {
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        let eps = 1e-12;
        unit(self.p00)
            && unit(self.p01)
            && unit(self.p10)
            && unit(self.p11)
            && self.p00 + self.p10 <= 1.0 + eps
            && self.p01 + self.p11 <= 1.0 + eps
    }

    /// Relabels the symbols: 0 becomes 1 and 1 becomes 0.
    pub fn swapped(&self) -> Self {
        Self::new(self.p11, self.p10, self.p01, self.p00)
    }

    /// Probability of an erasure given X = 0 and X = 1.
    pub fn erasure(&self) -> (f64, f64) {
        ((1.0 - self.p00 - self.p10).max(0.0), (1.0 - self.p01 - self.p11).max(0.0))
    }

    /// Builds the matrix from fitted per-symbol statistics and their bands.
    pub fn from_gaussian_fit(stats: [&SymbolStats; 2], bands: [&IntensityBand; 2]) -> Self {
        Self::new(
            detection_probability(stats[0], bands[0]),
            detection_probability(stats[1], bands[0]),
            detection_probability(stats[0], bands[1]),
            detection_probability(stats[1], bands[1]),
        )
    }
}

/// `w·log2(p/q)` with the conventions that a zero weight contributes
/// nothing.
fn weighted_log_ratio(w: f64, p: f64, q: f64) -> f64 {
    if w <= 0.0 || p <= 0.0 {
        0.0
    } else {
        w * (p / q).log2()
    }
}

/// Mutual information in bits for input law `Pr(X = 0) = alpha`.
///
/// Sums over the two decodable outputs only; erasure mass is left out, so
/// the output law is sub-normalised.
pub fn mutual_information(m: &DetectionMatrix, alpha: f64) -> f64 {
    let beta = 1.0 - alpha;
    let q0 = alpha * m.p00 + beta * m.p01;
    let q1 = alpha * m.p10 + beta * m.p11;
    weighted_log_ratio(alpha * m.p00, m.p00, q0)
        + weighted_log_ratio(alpha * m.p10, m.p10, q1)
        + weighted_log_ratio(beta * m.p01, m.p01, q0)
        + weighted_log_ratio(beta * m.p11, m.p11, q1)
}

/// Standard mutual information of the binary-input, three-output channel
/// that keeps erasures as an output symbol. For comparison with
/// [`mutual_information`] only.
pub fn erasure_channel_mutual_information(m: &DetectionMatrix, alpha: f64) -> f64 {
    let beta = 1.0 - alpha;
    let (e0, e1) = m.erasure();
    let qe = alpha * e0 + beta * e1;
    mutual_information(m, alpha) + weighted_log_ratio(alpha * e0, e0, qe) + weighted_log_ratio(beta * e1, e1, qe)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CapacityResult {
    /// bit/slot
    pub capacity: f64,
    /// Maximising `Pr(X = 0)`.
    pub alpha_star: f64,
    pub matrix: DetectionMatrix,
}

/// Maximises a concave function on [0, 1]: a coarse grid locates the peak,
/// golden-section search refines it.
fn maximize_on_unit_interval(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let steps = (1.0 / COARSE_STEP).round() as usize;
    let (mut best_i, mut best_v) = (0, f(0.0));
    for i in 1..=steps {
        let v = f(i as f64 / steps as f64);
        if v > best_v {
            best_i = i;
            best_v = v;
        }
    }
    let centre = best_i as f64 / steps as f64;
    let mut lo = (centre - COARSE_STEP).max(0.0);
    let mut hi = (centre + COARSE_STEP).min(1.0);

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > ALPHA_TOLERANCE {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        }
    }
    let alpha = 0.5 * (lo + hi);
    let value = f(alpha);
    // The grid point can beat the refined one only at a kink or endpoint.
    if best_v > value {
        (centre, best_v)
    } else {
        (alpha, value)
    }
}

/// Capacity in bit/slot and the maximising input probability.
pub fn channel_capacity(m: &DetectionMatrix) -> CapacityResult {
    let (alpha_star, capacity) = maximize_on_unit_interval(|a| mutual_information(m, a));
    CapacityResult {
        capacity: capacity.max(0.0),
        alpha_star,
        matrix: *m,
    }
}

/// Capacity of the three-output erasure channel, for comparison with
/// [`channel_capacity`].
pub fn erasure_channel_capacity(m: &DetectionMatrix) -> CapacityResult {
    let (alpha_star, capacity) = maximize_on_unit_interval(|a| erasure_channel_mutual_information(m, a));
    CapacityResult {
        capacity: capacity.max(0.0),
        alpha_star,
        matrix: *m,
    }
}

/// Everything the capacity pipeline produced for one configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineOutput {
    pub stats: Vec<SymbolStats>,
    pub result: CapacityResult,
    /// Fraction of trials decoded as each symbol, indexed `[sent][decided]`,
    /// with the erasure fraction last.
    pub empirical: Vec<Vec<f64>>,
}

/// Simulate both symbols, fit Gaussians, integrate them over the bands and
/// maximise the mutual information.
pub fn capacity_pipeline(cfg: &ExperimentConfig) -> Result<CapacityResult, Error> {
    capacity_pipeline_with(cfg, Execution::default()).map(|o| o.result)
}

pub fn capacity_pipeline_with(cfg: &ExperimentConfig, exec: Execution) -> Result<PipelineOutput, Error> {
    let cfg = validate_config(cfg.clone())?;
    let scheme = build_scheme(&cfg.scheme_levels, cfg.intensity_halfwidth, &cfg.odorant)?;
    if scheme.len() != 2 {
        return Err(Error::UnsupportedAlphabet(scheme.len()));
    }
    let runs = [
        simulate_symbol(&scheme, 0, &cfg, exec)?,
        simulate_symbol(&scheme, 1, &cfg, exec)?,
    ];
    let bands = [&scheme.symbols()[0].band, &scheme.symbols()[1].band];
    let matrix = DetectionMatrix::from_gaussian_fit([&runs[0].stats, &runs[1].stats], bands);
    Ok(PipelineOutput {
        stats: runs.iter().map(|r| r.stats.clone()).collect(),
        result: channel_capacity(&matrix),
        empirical: runs.iter().map(|r| r.counts.frequencies()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Standard normal CDF from the Taylor series of erf (small |z|) or the
    /// Laplace continued fraction of the Mills ratio (large |z|), summed to
    /// convergence.
    fn reference_phi(z: f64) -> f64 {
        if z.abs() < 3.0 {
            let x = z / std::f64::consts::SQRT_2;
            let mut term = x;
            let mut sum = x;
            let mut n = 0.0;
            while term.abs() > 1e-18 * sum.abs().max(1e-300) {
                n += 1.0;
                term *= -x * x / n;
                sum += term / (2.0 * n + 1.0);
            }
            0.5 + sum / std::f64::consts::PI.sqrt()
        } else {
            let t = z.abs();
            let mut cf = t;
            for k in (1..=200).rev() {
                cf = t + k as f64 / cf;
            }
            let tail = (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt() / cf;
            if z > 0.0 {
                1.0 - tail
            } else {
                tail
            }
        }
    }

    fn stats(mean: f64, std_dev: f64) -> SymbolStats {
        SymbolStats {
            symbol: 0,
            mean,
            std_dev,
            trial_count: 100_000,
            std_error: std_dev / 100_000f64.sqrt(),
        }
    }

    fn band(lo: f64, hi: f64) -> IntensityBand {
        IntensityBand {
            level: 0.0,
            intensity_lo: 0.0,
            intensity_hi: 0.0,
            conc_lo: lo,
            conc_hi: hi,
        }
    }

    #[test]
    fn cdf_basic_identities() {
        assert_eq!(gaussian_cdf(3.0, 3.0, 2.0), 0.5);
        for &a in &[-4.0, 0.3, 1.7, 9.0] {
            let s = gaussian_cdf(a, 1.5, 0.8) + gaussian_cdf(2.0 * 1.5 - a, 1.5, 0.8);
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cdf_matches_series_oracle() {
        // Frozen from the series oracle (and 50-digit arithmetic):
        // Φ(1.6630) = 0.951843782253...
        let frozen = reference_phi(1.6630);
        assert!((frozen - 0.951843782253).abs() < 1e-11, "{frozen}");
        assert!((gaussian_cdf(1.6630, 0.0, 1.0) - frozen).abs() < 1e-10);
        for i in -80..=80 {
            let z = i as f64 * 0.1;
            let got = gaussian_cdf(z, 0.0, 1.0);
            let want = reference_phi(z);
            assert!((got - want).abs() < 1e-10, "z={z}: {got} vs {want}");
        }
    }

    #[test]
    fn detection_probabilities_from_fitted_gaussians() {
        let b0 = band(17.9815, 28.0463);
        let b1 = band(43.7448, 68.2320);
        let p00 = detection_probability(&stats(26.3879, 0.9972), &b0);
        let p11 = detection_probability(&stats(64.2000, 1.0049), &b1);
        let p01 = detection_probability(&stats(26.3879, 0.9972), &b1);
        assert!((p00 - 0.951849).abs() < 1e-5, "{p00}");
        assert!((p11 - 0.99997).abs() < 1e-5, "{p11}");
        assert!(p01 < 1e-12);
    }

    #[test]
    fn zero_spread_is_an_indicator() {
        let b = band(43.7448, 68.2320);
        assert_eq!(detection_probability(&stats(50.0, 0.0), &b), 1.0);
        assert_eq!(detection_probability(&stats(0.0, 0.0), &b), 0.0);
        assert_eq!(detection_probability(&stats(68.2320, 0.0), &b), 1.0);
    }

    #[test]
    fn far_tail_probabilities_are_tiny_but_not_cancelled() {
        let p = band_probability(0.0, 1.0, 8.0, 9.0);
        let want = reference_phi(-8.0) - reference_phi(-9.0);
        assert!(p > 0.0);
        assert!((p / want - 1.0).abs() < 1e-6, "{p} vs {want}");
    }

    #[test]
    fn mutual_information_examples() {
        assert!((mutual_information(&DetectionMatrix::identity(), 0.5) - 1.0).abs() < 1e-15);
        let m = DetectionMatrix::new(0.951849, 0.0, 0.0, 0.99997);
        assert_eq!(mutual_information(&m, 0.0), 0.0);
        assert_eq!(mutual_information(&DetectionMatrix::new(0.7, 0.2, 0.1, 0.6), 0.0), 0.0);
        let mi = mutual_information(&m, 0.5051);
        assert!((mi - 0.9759).abs() < 2e-4, "{mi}");
    }

    #[test]
    fn capacity_examples() {
        let perfect = channel_capacity(&DetectionMatrix::identity());
        assert!((perfect.capacity - 1.0).abs() < 1e-12);
        assert!((perfect.alpha_star - 0.5).abs() < 1e-7);

        let sym = channel_capacity(&DetectionMatrix::new(0.9, 0.0, 0.0, 0.9));
        assert!((sym.alpha_star - 0.5).abs() < 1e-7);

        let paper = channel_capacity(&DetectionMatrix::new(0.951849, 0.0, 0.0, 0.99997));
        assert!((paper.capacity - 0.9759).abs() < 5e-4, "{}", paper.capacity);
        assert!((0.500..=0.510).contains(&paper.alpha_star), "{}", paper.alpha_star);
    }

    #[test]
    fn label_swap_maps_alpha_to_complement() {
        let m = DetectionMatrix::new(0.951849, 0.0, 0.0, 0.99997);
        let a = channel_capacity(&m);
        let b = channel_capacity(&m.swapped());
        assert!((a.alpha_star - (1.0 - b.alpha_star)).abs() < 1e-7);
        assert!((a.capacity - b.capacity).abs() < 1e-14);
    }

    #[test]
    fn capacity_argmax_is_stationary() {
        // d/dα [a·α·log2(1/α) + b·(1−α)·log2(1/(1−α))] = 0
        // ⇔ a(ln(1/α) − 1) = b(ln(1/(1−α)) − 1), solved here by bisection.
        let (a, b) = (0.951849, 0.99997);
        let g = |x: f64| a * ((1.0 / x).ln() - 1.0) - b * ((1.0 / (1.0 - x)).ln() - 1.0);
        let (mut lo, mut hi) = (0.3, 0.7);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let res = channel_capacity(&DetectionMatrix::new(a, 0.0, 0.0, b));
        assert!((res.alpha_star - lo).abs() < 1e-7, "{} vs {lo}", res.alpha_star);
    }

    #[test]
    fn erasure_channel_differs_from_two_output_form() {
        let m = DetectionMatrix::new(0.951849, 0.0, 0.0, 0.99997);
        let two = channel_capacity(&m).capacity;
        let three = erasure_channel_capacity(&m).capacity;
        assert!((two - 0.9759).abs() < 5e-4);
        assert!(three > 0.97 && (three - two).abs() > 1e-3, "{three} vs {two}");
        assert!((erasure_channel_capacity(&DetectionMatrix::identity()).capacity - 1.0).abs() < 1e-12);
    }

    fn arb_matrix() -> impl Strategy<Value = DetectionMatrix> {
        (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(a, b, c, d)| {
            // Split each column's unit mass into (decide 0, decide 1, erasure).
            DetectionMatrix::new(a, c, (1.0 - a) * b, (1.0 - c) * d)
        })
    }

    proptest! {
        #[test]
        fn mutual_information_is_bounded(m in arb_matrix(), alpha in 0.0f64..=1.0) {
            prop_assert!(m.is_valid());
            let mi = mutual_information(&m, alpha);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&mi), "{}", mi);
        }

        #[test]
        fn mutual_information_is_concave(m in arb_matrix(), a1 in 0.0f64..=1.0, a2 in 0.0f64..=1.0) {
            let mid = mutual_information(&m, 0.5 * (a1 + a2));
            let avg = 0.5 * (mutual_information(&m, a1) + mutual_information(&m, a2));
            prop_assert!(mid >= avg - 1e-12);
        }

        #[test]
        fn capacity_dominates_random_probes(m in arb_matrix(), probes in prop::collection::vec(0.0f64..=1.0, 1000)) {
            let c = channel_capacity(&m);
            prop_assert!(c.capacity >= 0.0 && c.capacity <= 1.0 + 1e-12);
            for a in probes {
                prop_assert!(c.capacity >= mutual_information(&m, a) - 1e-12);
            }
        }

        #[test]
        fn label_swap_mirrors_the_input_law(m in arb_matrix(), alpha in 0.0f64..=1.0) {
            let s = m.swapped();
            prop_assert!((mutual_information(&m, alpha) - mutual_information(&s, 1.0 - alpha)).abs() < 1e-12);
            let c = channel_capacity(&m);
            let cs = channel_capacity(&s);
            prop_assert!((c.capacity - cs.capacity).abs() < 1e-12);
            // Flat optima leave the maximiser loosely determined, so compare values.
            let mirrored = mutual_information(&m, 1.0 - cs.alpha_star);
            prop_assert!((mutual_information(&m, c.alpha_star) - mirrored).abs() < 1e-12);
        }
    }
}
