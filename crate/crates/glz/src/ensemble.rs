//! Random-gap machinery: reproducible Gaussian sampling, Monte Carlo
//! averages of transition probabilities, zero-transition couplings along
//! the characteristic curve, and optimization of the control coupling.
//!
//! Reproducibility contract: each sample index gets its own counter-based
//! RNG stream derived from the seed, so the gap assigned to index k never
//! depends on thread count or scheduling. Reductions run in index order
//! over the collected per-sample values, which makes parallel and serial
//! results bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::models::{ErrorModel, GlzParams, PulseKind, DEFAULT_LAMBDA0, DEFAULT_TIME};
use crate::propagate::{adiabaticity_area, transition_probability, IntegratorConfig};
use crate::{GlzError, Result};

/// Normal gap distribution with a reproducibility seed.
///
/// The paper-standard operating envelope keeps sigma <= mu/5 when mu > 0,
/// which bounds the probability of drawing a nonpositive gap below 1e-7
/// per sample; wider settings are allowed but flagged by
/// [`GapDistribution::within_envelope`] and by the nonpositive-draw counter
/// on every ensemble result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapDistribution {
    pub mean: f64,
    pub std_dev: f64,
    pub seed: u64,
}

impl GapDistribution {
    pub fn new(mean: f64, std_dev: f64, seed: u64) -> Result<Self> {
        if !(std_dev >= 0.0) || !mean.is_finite() || !std_dev.is_finite() {
            return Err(GlzError::InvalidParam(format!(
                "gap distribution requires finite mean and nonnegative deviation, \
                 got N({mean}, {std_dev}^2)"
            )));
        }
        Ok(Self {
            mean,
            std_dev,
            seed,
        })
    }

    pub fn within_envelope(&self) -> bool {
        self.mean <= 0.0 || self.std_dev <= self.mean / 5.0
    }

    /// Standard-normal draw for sample index k, independent of how many
    /// samples are requested or on which thread the draw happens.
    fn z_score(&self, index: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        StandardNormal.sample(&mut rng)
    }

    fn gap(&self, index: u64) -> f64 {
        self.mean + self.std_dev * self.z_score(index)
    }

    /// n gap draws, bitwise reproducible from the seed.
    pub fn sample(&self, n: usize) -> Vec<f64> {
        if !self.within_envelope() {
            log::warn!(
                "sigma = {} exceeds the mu/5 operating envelope of N({}, sigma^2)",
                self.std_dev,
                self.mean
            );
        }
        (0..n as u64).map(|k| self.gap(k)).collect()
    }
}

/// Monte Carlo estimate with its sampling metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub mean: f64,
    /// Sample standard deviation / sqrt(n).
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// How many sampled gaps were <= 0 (envelope diagnostics).
    pub nonpositive_gaps: usize,
    /// Per-sample values when retention was requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
}

fn summarize(values: Vec<f64>, dist: &GapDistribution, gaps: &[f64], keep: bool) -> EnsembleResult {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let nonpositive = gaps.iter().filter(|g| **g <= 0.0).count();
    if nonpositive > 0 {
        log::warn!(
            "{nonpositive} of {n} sampled gaps were nonpositive for N({}, {}^2)",
            dist.mean,
            dist.std_dev
        );
    }
    EnsembleResult {
        mean,
        std_error: (var / n as f64).sqrt(),
        n_samples: n,
        seed: dist.seed,
        nonpositive_gaps: nonpositive,
        samples: keep.then_some(values),
    }
}

/// One point on the characteristic curve of zero-transition couplings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CharacteristicPoint {
    pub gap: f64,
    pub b0: f64,
    pub angle: f64,
    /// Transition probability left at the root.
    pub residual: f64,
}

/// Outcome of the control-coupling optimization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizedControl {
    pub b_star: f64,
    pub p_star: EnsembleResult,
    /// Set when the minimizer ran into the bracket edge and the result
    /// fell back to the zero-transition coupling of the mean gap.
    pub at_bracket_edge: bool,
}

/// Everything an ensemble run holds fixed while the gap varies: pulse
/// shape, imperfection, sweeps, protocol time, integrator settings and the
/// execution mode.
#[derive(Debug, Clone)]
pub struct ModelTemplate {
    pub pulse: PulseKind,
    pub error: Option<ErrorModel>,
    pub lambda0: f64,
    pub time: f64,
    /// Tangent-ramp shape parameter for the bias sweep; linear ramps when
    /// `None`.
    pub tangent_shape: Option<f64>,
    pub integrator: IntegratorConfig,
    /// Force serial execution even when compiled with rayon support.
    pub serial: bool,
}

impl Default for ModelTemplate {
    fn default() -> Self {
        Self {
            pulse: PulseKind::Lorentzian,
            error: None,
            lambda0: DEFAULT_LAMBDA0,
            time: DEFAULT_TIME,
            tangent_shape: None,
            integrator: IntegratorConfig::default(),
            serial: false,
        }
    }
}

impl ModelTemplate {
    /// Concrete parameter set for one (gap, control, angle) triple.
    pub fn params(&self, gap: f64, control: f64, angle: f64) -> Result<GlzParams> {
        let mut p = GlzParams::new(gap, control, angle)?
            .with_pulse(self.pulse)
            .with_time(self.time)?
            .with_linear_sweep(self.lambda0)?;
        if let Some(shape) = self.tangent_shape {
            p = p.with_tangent_sweeps(self.lambda0, shape)?;
        }
        if let Some(e) = self.error {
            p = p.with_error(e)?;
        }
        p.validate()?;
        Ok(p)
    }

    /// Map a fallible kernel over sample indices, parallel unless `serial`
    /// is set (or the crate was built without the `parallel` feature).
    /// Output order is index order either way.
    fn map_samples<T, F>(&self, n: usize, kernel: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            if !self.serial {
                return (0..n).into_par_iter().map(kernel).collect();
            }
        }
        (0..n).map(kernel).collect()
    }
}

/// Monte Carlo mean of the transition probability at fixed control and
/// angle over the gap distribution.
pub fn average_probability(
    dist: &GapDistribution,
    control: f64,
    angle: f64,
    template: &ModelTemplate,
    n: usize,
) -> Result<EnsembleResult> {
    average_probability_impl(dist, control, angle, template, n, false)
}

/// Same as [`average_probability`] but retains per-sample values.
pub fn average_probability_retaining(
    dist: &GapDistribution,
    control: f64,
    angle: f64,
    template: &ModelTemplate,
    n: usize,
) -> Result<EnsembleResult> {
    average_probability_impl(dist, control, angle, template, n, true)
}

fn average_probability_impl(
    dist: &GapDistribution,
    control: f64,
    angle: f64,
    template: &ModelTemplate,
    n: usize,
    keep: bool,
) -> Result<EnsembleResult> {
    if n == 0 {
        return Err(GlzError::InvalidParam("ensemble size must be >= 1".into()));
    }
    let gaps = dist.sample(n);
    let values = template.map_samples(n, |k| {
        let p = template.params(gaps[k], control, angle)?;
        transition_probability(&p, &template.integrator)
    })?;
    Ok(summarize(values, dist, &gaps, keep))
}

/// Ensemble mean of the time-integrated excited population, with the
/// control fixed at the zero-transition coupling of the mean gap (the
/// single-control-field setting).
pub fn average_area(
    dist: &GapDistribution,
    angle: f64,
    template: &ModelTemplate,
    n: usize,
) -> Result<EnsembleResult> {
    if n == 0 {
        return Err(GlzError::InvalidParam("ensemble size must be >= 1".into()));
    }
    let b0 = characteristic_b0(dist.mean, angle, template)?.b0;
    let gaps = dist.sample(n);
    let values = template.map_samples(n, |k| {
        let p = template.params(gaps[k], b0, angle)?;
        adiabaticity_area(&p, &template.integrator)
    })?;
    Ok(summarize(values, dist, &gaps, false))
}

/// Residual threshold defining a zero of the transition probability; the
/// integrator's own error floor makes exact zeros meaningless.
pub const ROOT_THRESHOLD: f64 = 1e-6;

/// Smallest control coupling that suppresses the asymptotic transition for
/// a single gap, found by a coarse scan over [1/(10a), 50/a] refined by
/// golden-section descent into the first basin whose minimum reaches the
/// root threshold.
///
/// Trusted for gaps in (0, 2); beyond that the curve turns irregular and
/// multivalued and the smallest-root convention is what this returns.
pub fn characteristic_b0(
    gap: f64,
    angle: f64,
    template: &ModelTemplate,
) -> Result<CharacteristicPoint> {
    if !(gap > 0.0) {
        return Err(GlzError::InvalidParam(format!(
            "characteristic coupling needs a positive gap, got {gap}"
        )));
    }
    let lo = 1.0 / (10.0 * gap);
    let hi = 50.0 / gap;
    let probe = |b: f64| -> Result<f64> {
        transition_probability(&template.params(gap, b, angle)?, &template.integrator)
    };

    // log-spaced scan; the zero-transition dips sit on O(1) wide basins
    const SCAN: usize = 240;
    let ratio = (hi / lo).ln() / (SCAN - 1) as f64;
    let mut best = (lo, f64::INFINITY);
    let mut prev_b = lo;
    let mut prev_p = probe(lo)?;
    let mut before = (prev_b, prev_p);
    for k in 1..SCAN {
        let b = lo * (ratio * k as f64).exp();
        let p = probe(b)?;
        if p > prev_p && prev_p < before.1 {
            // local minimum at prev_b: refine the bracket [before.b, b]
            let (bm, pm) = golden_min(&probe, before.0, b, 1e-5 * prev_b)?;
            if pm <= ROOT_THRESHOLD {
                return Ok(CharacteristicPoint {
                    gap,
                    b0: bm,
                    angle,
                    residual: pm,
                });
            }
            if pm < best.1 {
                best = (bm, pm);
            }
        }
        if prev_p < best.1 {
            best = (prev_b, prev_p);
        }
        before = (prev_b, prev_p);
        prev_b = b;
        prev_p = p;
    }
    Err(GlzError::NoRoot {
        gap,
        lo,
        hi,
        best_b: best.0,
        best_p: best.1,
    })
}

/// Golden-section minimization of a fallible scalar function on [a, b].
fn golden_min<F>(f: &F, mut a: f64, mut b: f64, xtol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > xtol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 < f2 { (x1, f1) } else { (x2, f2) })
}

/// Minimize the ensemble-averaged transition probability over the control
/// coupling.
///
/// Common random numbers: one gap sample set is drawn up front and reused
/// for every objective evaluation, which makes the objective deterministic
/// in b and cancels most of the Monte Carlo noise out of the comparison.
/// The search runs golden-section on [b0/2, 2 b0] around the
/// zero-transition coupling of the mean gap, to a relative coupling
/// tolerance of 1e-3. If the minimizer lands on a bracket edge the result
/// falls back to b0 with `at_bracket_edge` set.
pub fn optimize_bstar(
    dist: &GapDistribution,
    angle: f64,
    template: &ModelTemplate,
    n: usize,
) -> Result<OptimizedControl> {
    if !(dist.mean > 0.0) {
        return Err(GlzError::InvalidParam(
            "control optimization needs a positive mean gap".into(),
        ));
    }
    if n < 100 {
        return Err(GlzError::InvalidParam(format!(
            "control optimization needs at least 100 samples, got {n}"
        )));
    }
    let b0 = characteristic_b0(dist.mean, angle, template)?.b0;
    let gaps = dist.sample(n);
    let objective = |b: f64| -> Result<f64> {
        let values = template.map_samples(n, |k| {
            let p = template.params(gaps[k], b, angle)?;
            transition_probability(&p, &template.integrator)
        })?;
        Ok(values.iter().sum::<f64>() / n as f64)
    };

    let (lo, hi) = (0.5 * b0, 2.0 * b0);
    let (bm, _) = golden_min(&objective, lo, hi, 1e-3 * b0)?;
    let edge = bm - lo < 2e-3 * b0 || hi - bm < 2e-3 * b0;
    let b_star = if edge { b0 } else { bm };
    let p_star = average_probability(dist, b_star, angle, template, n)?;
    Ok(OptimizedControl {
        b_star,
        p_star,
        at_bracket_edge: edge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::avg_plz;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn sampling_is_deterministic_and_unaffected_by_batch_size() {
        let d = GapDistribution::new(0.5, 0.1, 42).unwrap();
        let a = d.sample(1000);
        let b = d.sample(1000);
        assert_eq!(a, b);
        // prefixes agree: streams are keyed by index, not by batch
        let c = d.sample(10);
        assert_eq!(&a[..10], &c[..]);
    }

    #[test]
    fn zero_width_gives_constant_samples() {
        let d = GapDistribution::new(0.7, 0.0, 1).unwrap();
        assert!(d.sample(100).iter().all(|g| *g == 0.7));
    }

    #[test]
    fn sample_mean_obeys_law_of_large_numbers() {
        let d = GapDistribution::new(0.5, 0.1, 7).unwrap();
        let n = 100_000;
        let mean = d.sample(n).iter().sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 3.0 * 0.1 / (n as f64).sqrt());
    }

    #[test]
    fn envelope_flagging() {
        assert!(GapDistribution::new(0.5, 0.1, 0).unwrap().within_envelope());
        assert!(!GapDistribution::new(0.5, 0.2, 0).unwrap().within_envelope());
        assert!(GapDistribution::new(0.0, 1.0, 0).unwrap().within_envelope());
        assert!(GapDistribution::new(0.5, -0.1, 0).is_err());
    }

    #[test]
    fn serial_and_parallel_agree_bitwise() {
        let d = GapDistribution::new(0.5, 0.1, 11).unwrap();
        let tpl = ModelTemplate {
            serial: true,
            ..ModelTemplate::default()
        };
        let serial = average_probability(&d, 2.0, FRAC_PI_2, &tpl, 64).unwrap();
        let tpl = ModelTemplate {
            serial: false,
            ..tpl
        };
        let parallel = average_probability(&d, 2.0, FRAC_PI_2, &tpl, 64).unwrap();
        assert_eq!(serial.mean.to_bits(), parallel.mean.to_bits());
        assert_eq!(serial.std_error.to_bits(), parallel.std_error.to_bits());
    }

    #[test]
    fn uncontrolled_average_matches_closed_form() {
        // b = 0 Monte Carlo against the Gaussian-average formula
        let d = GapDistribution::new(0.5, 0.1, 3).unwrap();
        let tpl = ModelTemplate::default();
        let r = average_probability(&d, 0.0, 0.0, &tpl, 2000).unwrap();
        let expected = avg_plz(0.5, 0.1).unwrap();
        assert!(
            (r.mean - expected).abs() < 3.0 * r.std_error + 2e-3,
            "{} vs {expected} (se {})",
            r.mean,
            r.std_error
        );
        assert_eq!(r.nonpositive_gaps, 0);
    }

    #[test]
    fn per_sample_retention() {
        let d = GapDistribution::new(0.5, 0.1, 2).unwrap();
        let tpl = ModelTemplate::default();
        let r = average_probability_retaining(&d, 2.0, FRAC_PI_2, &tpl, 16).unwrap();
        let kept = r.samples.as_ref().unwrap();
        assert_eq!(kept.len(), 16);
        let mean = kept.iter().sum::<f64>() / 16.0;
        assert_eq!(mean.to_bits(), r.mean.to_bits());
    }

    #[test]
    fn single_gap_counterdiabatic_average_vanishes() {
        let d = GapDistribution::new(0.5, 0.0, 9).unwrap();
        let tpl = ModelTemplate::default();
        let r = average_probability(&d, 2.0, FRAC_PI_2, &tpl, 8).unwrap();
        assert!(r.mean <= 1e-4, "{}", r.mean);
    }

    #[test]
    fn characteristic_curve_inverse_law_for_cd_control() {
        let tpl = ModelTemplate::default();
        for a in [0.25, 0.5, 1.0, 1.5] {
            let cp = characteristic_b0(a, FRAC_PI_2, &tpl).unwrap();
            assert!(
                (cp.b0 * a - 1.0).abs() < 1e-3,
                "a={a}: b0={} residual={}",
                cp.b0,
                cp.residual
            );
            assert!(cp.residual <= ROOT_THRESHOLD);
        }
    }

    #[test]
    fn characteristic_b0_specific_point() {
        let tpl = ModelTemplate::default();
        let cp = characteristic_b0(1.25, FRAC_PI_2, &tpl).unwrap();
        assert!((cp.b0 - 0.8).abs() < 0.8 * 1e-3, "b0 = {}", cp.b0);
    }

    #[test]
    fn characteristic_b0_flat_control_matches_grid_scan() {
        // independent fine-grid oracle over the coupling axis
        let tpl = ModelTemplate::default();
        let a = 0.5;
        let cp = characteristic_b0(a, 0.0, &tpl).unwrap();
        assert!(cp.residual <= ROOT_THRESHOLD);

        let lo = 0.5;
        let hi = 4.0;
        let n = 2000;
        let mut best = (0.0, f64::INFINITY);
        for k in 0..n {
            let b = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            let p =
                transition_probability(&tpl.params(a, b, 0.0).unwrap(), &tpl.integrator).unwrap();
            if p < best.1 {
                best = (b, p);
            }
        }
        let spacing = (hi - lo) / (n - 1) as f64;
        assert!(
            (cp.b0 - best.0).abs() <= spacing,
            "refined {} vs scan {}",
            cp.b0,
            best.0
        );
    }

    #[test]
    fn optimizer_recovers_inverse_law_at_tiny_width() {
        let d = GapDistribution::new(0.5, 1e-4, 21).unwrap();
        let tpl = ModelTemplate::default();
        let out = optimize_bstar(&d, FRAC_PI_2, &tpl, 100).unwrap();
        assert!((out.b_star - 2.0).abs() < 2.0 * 1e-2, "b* = {}", out.b_star);
        assert!(!out.at_bracket_edge);
    }

    #[test]
    fn cd_ensemble_area_vanishes_at_zero_width() {
        let d = GapDistribution::new(0.5, 0.0, 5).unwrap();
        let tpl = ModelTemplate::default();
        let r = average_area(&d, FRAC_PI_2, &tpl, 4).unwrap();
        assert!(r.mean <= 1e-3, "{}", r.mean);
    }

    #[test]
    fn nonpositive_mean_or_tiny_ensemble_rejected() {
        let tpl = ModelTemplate::default();
        let d = GapDistribution::new(0.0, 0.1, 0).unwrap();
        assert!(optimize_bstar(&d, 0.0, &tpl, 100).is_err());
        let d = GapDistribution::new(0.5, 0.1, 0).unwrap();
        assert!(optimize_bstar(&d, 0.0, &tpl, 50).is_err());
    }
}
