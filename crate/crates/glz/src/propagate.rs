//! Numerical propagation of the two-level Schroedinger equation over the
//! finite sweep window, plus the analytic delta-kick composition.
//!
//! The stepper is an explicit embedded Dormand-Prince 5(4) pair with
//! PI step-size control. The problem is non-stiff and mildly oscillatory at
//! the default protocol scale, which this pair handles efficiently; pulse
//! discontinuities are passed in as mandatory landing points so the stepper
//! never loses order across them.

use num_complex::Complex64;

use crate::models::GlzParams;
use crate::pauli::{pauli_exp, sigma_phi, PauliVector, StateVector, Unitary2, NORM_DRIFT_LIMIT};
use crate::{GlzError, Result};

/// Number of uniform sample points recorded along a trajectory.
pub const GRID_POINTS: usize = 1001;

#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    /// Relative tolerance, at least 1e-13.
    pub rtol: f64,
    /// Absolute tolerance, at least 1e-15.
    pub atol: f64,
    /// Step-size cap as a fraction of the integration span.
    pub max_step: f64,
    /// Extra mandatory landing points in normalized time.
    pub breakpoints: Vec<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            max_step: 0.05,
            breakpoints: Vec::new(),
        }
    }
}

impl IntegratorConfig {
    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.rtol = rtol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol >= 1e-13 && self.rtol <= 1e-1) {
            return Err(GlzError::InvalidParam(format!(
                "rtol must lie in [1e-13, 1e-1], got {}",
                self.rtol
            )));
        }
        if !(self.atol >= 1e-15 && self.atol.is_finite()) {
            return Err(GlzError::InvalidParam(format!(
                "atol must be at least 1e-15, got {}",
                self.atol
            )));
        }
        if !(self.max_step > 0.0 && self.max_step <= 1.0) {
            return Err(GlzError::InvalidParam(format!(
                "max_step must lie in (0, 1], got {}",
                self.max_step
            )));
        }
        Ok(())
    }
}

/// Uniformly sampled trajectory data.
#[derive(Debug, Clone)]
pub struct TrajectorySamples {
    /// Normalized times, `GRID_POINTS` uniform points on [0, 1].
    pub grid: Vec<f64>,
    /// Instantaneous excited-state population at each grid point.
    pub prob: Vec<f64>,
    /// |norm^2 - 1| at each grid point.
    pub norm_err: Vec<f64>,
    /// Trapezoid integral of `prob` in physical-time units (dt = T du).
    pub area: f64,
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    /// Excited-state population at the end of the window.
    pub final_prob: f64,
    /// Largest |norm^2 - 1| seen along the way.
    pub max_norm_drift: f64,
    /// Sum of accepted per-step truncation error estimates; an upper proxy
    /// for the global error of `final_prob`.
    pub error_estimate: f64,
    /// Present when the trajectory was recorded.
    pub samples: Option<TrajectorySamples>,
}

type State = [Complex64; 2];

/// psi' = -i (n0 + n.sigma) psi
fn schrodinger_rhs(n: &PauliVector, y: &State) -> State {
    let i = Complex64::i();
    let off = Complex64::new(n.n1, -n.n2);
    [
        -i * ((n.n0 + n.n3) * y[0] + off * y[1]),
        -i * (off.conj() * y[0] + (n.n0 - n.n3) * y[1]),
    ]
}

#[derive(Clone, Copy)]
struct Landing {
    t: f64,
    record: bool,
}

struct Integration {
    y: State,
    max_drift: f64,
    err_accum: f64,
}

/// Dormand-Prince 5(4) with mandatory landing points.
///
/// `observe` fires at every landing point flagged `record`, including t0 if
/// flagged. Landing points must be sorted and inside [t0, t1]; t1 itself is
/// always landed on.
#[allow(clippy::too_many_arguments)]
fn dopri5<F, O>(
    rhs: F,
    t0: f64,
    t1: f64,
    y0: State,
    cfg: &IntegratorConfig,
    hard_cap: f64,
    landings: &[Landing],
    mut observe: O,
) -> Result<Integration>
where
    F: Fn(f64, &State) -> State,
    O: FnMut(f64, &State, f64),
{
    debug_assert!(t1 > t0);
    let span = t1 - t0;
    let max_h = (cfg.max_step * span).min(hard_cap);

    let mut t = t0;
    let mut y = y0;
    let mut max_drift = 0.0f64;
    let mut err_accum = 0.0f64;
    let mut land_idx = 0usize;

    // leading landings at t0
    while land_idx < landings.len() && landings[land_idx].t <= t0 {
        if landings[land_idx].record {
            observe(t0, &y, 0.0);
        }
        land_idx += 1;
    }

    let mut h = (1e-3 * span).min(max_h);
    let mut err_prev: f64 = 1.0;
    let mut rejects_in_a_row = 0usize;
    let mut drift_warned = false;

    while t < t1 {
        let next_stop = if land_idx < landings.len() {
            landings[land_idx].t.min(t1)
        } else {
            t1
        };
        let mut landing_here = false;
        if t + h >= next_stop - 1e-14 * span {
            h = next_stop - t;
            landing_here = true;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(span) {
            return Err(GlzError::StepUnderflow { location: t });
        }

        // Dormand-Prince tableau
        let k1 = rhs(t, &y);
        let yk = st_add(&y, &[(0.2 * h, &k1)]);
        let k2 = rhs(t + 0.2 * h, &yk);
        let yk = st_add(&y, &[(3.0 / 40.0 * h, &k1), (9.0 / 40.0 * h, &k2)]);
        let k3 = rhs(t + 0.3 * h, &yk);
        let yk = st_add(
            &y,
            &[
                (44.0 / 45.0 * h, &k1),
                (-56.0 / 15.0 * h, &k2),
                (32.0 / 9.0 * h, &k3),
            ],
        );
        let k4 = rhs(t + 0.8 * h, &yk);
        let yk = st_add(
            &y,
            &[
                (19372.0 / 6561.0 * h, &k1),
                (-25360.0 / 2187.0 * h, &k2),
                (64448.0 / 6561.0 * h, &k3),
                (-212.0 / 729.0 * h, &k4),
            ],
        );
        let k5 = rhs(t + 8.0 / 9.0 * h, &yk);
        let yk = st_add(
            &y,
            &[
                (9017.0 / 3168.0 * h, &k1),
                (-355.0 / 33.0 * h, &k2),
                (46732.0 / 5247.0 * h, &k3),
                (49.0 / 176.0 * h, &k4),
                (-5103.0 / 18656.0 * h, &k5),
            ],
        );
        let k6 = rhs(t + h, &yk);
        let y5 = st_add(
            &y,
            &[
                (35.0 / 384.0 * h, &k1),
                (500.0 / 1113.0 * h, &k3),
                (125.0 / 192.0 * h, &k4),
                (-2187.0 / 6784.0 * h, &k5),
                (11.0 / 84.0 * h, &k6),
            ],
        );
        let k7 = rhs(t + h, &y5);
        // difference between the 5th and embedded 4th order results
        let err_vec = st_add(
            &[Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)],
            &[
                (71.0 / 57600.0 * h, &k1),
                (-71.0 / 16695.0 * h, &k3),
                (71.0 / 1920.0 * h, &k4),
                (-17253.0 / 339200.0 * h, &k5),
                (22.0 / 525.0 * h, &k6),
                (-1.0 / 40.0 * h, &k7),
            ],
        );

        let mut err: f64 = 0.0;
        for i in 0..2 {
            let sc = cfg.atol + cfg.rtol * y[i].norm().max(y5[i].norm());
            let r = err_vec[i].norm() / sc;
            err += r * r;
        }
        let err = (err / 2.0).sqrt();

        if err <= 1.0 {
            t = if landing_here { next_stop } else { t + h };
            y = y5;
            err_accum += (err_vec[0].norm_sqr() + err_vec[1].norm_sqr()).sqrt();
            rejects_in_a_row = 0;

            let drift = (y[0].norm_sqr() + y[1].norm_sqr() - 1.0).abs();
            max_drift = max_drift.max(drift);
            if drift > NORM_DRIFT_LIMIT {
                if !drift_warned {
                    log::warn!(
                        "norm drift {drift:.2e} at t = {t:.6}; renormalizing (check tolerances)"
                    );
                    drift_warned = true;
                }
                let n = (y[0].norm_sqr() + y[1].norm_sqr()).sqrt();
                y[0] /= n;
                y[1] /= n;
            }

            if landing_here {
                while land_idx < landings.len() && landings[land_idx].t <= t {
                    if landings[land_idx].record {
                        observe(t, &y, drift);
                    }
                    land_idx += 1;
                }
            }

            // PI controller
            let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            h = (h * fac.clamp(0.2, 5.0)).min(max_h);
            err_prev = err.max(1e-10);
        } else {
            rejects_in_a_row += 1;
            if rejects_in_a_row > 60 {
                return Err(GlzError::StepUnderflow { location: t });
            }
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }

    Ok(Integration {
        y,
        max_drift,
        err_accum,
    })
}

fn st_add(y: &State, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += *c * k[0];
        out[1] += *c * k[1];
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Band {
    Ground,
    Excited,
}

/// Instantaneous eigenstate of the bias-plus-gap part -lam*s3 + a*s1,
/// branch-selected so the expressions stay well conditioned on both sides
/// of the crossing. Real by construction.
pub(crate) fn crossing_eigenstate(lam: f64, gap: f64, band: Band) -> StateVector {
    let e = lam.hypot(gap);
    if e == 0.0 {
        // degenerate point: take the lam -> 0- limit labels
        return match band {
            Band::Ground => StateVector::basis_minus(),
            Band::Excited => StateVector::basis_plus(),
        };
    }
    let (x, y) = match (band, lam <= 0.0) {
        (Band::Ground, true) => (gap, lam - e),
        (Band::Ground, false) => (lam + e, -gap),
        (Band::Excited, true) => (e - lam, gap),
        (Band::Excited, false) => (gap, lam + e),
    };
    let n = x.hypot(y);
    StateVector::new(Complex64::new(x / n, 0.0), Complex64::new(y / n, 0.0))
}

fn excited_population(u: f64, params: &GlzParams, y: &State) -> f64 {
    let (lam, _) = params.sweep.eval(u);
    let e = crossing_eigenstate(lam, params.gap, Band::Excited);
    let psi = StateVector::new(y[0], y[1]);
    e.inner(&psi).norm_sqr()
}

fn merged_landings(params: &GlzParams, cfg: &IntegratorConfig, record: bool) -> Vec<Landing> {
    let mut lands: Vec<Landing> = Vec::new();
    if record {
        lands.extend((0..GRID_POINTS).map(|k| Landing {
            t: k as f64 / (GRID_POINTS - 1) as f64,
            record: true,
        }));
    }
    lands.extend(
        params
            .breakpoints()
            .into_iter()
            .chain(cfg.breakpoints.iter().copied())
            .filter(|u| *u > 0.0 && *u < 1.0)
            .map(|t| Landing { t, record: false }),
    );
    lands.push(Landing { t: 1.0, record });
    lands.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
    lands.dedup_by(|a, b| {
        if (a.t - b.t).abs() < 1e-13 {
            b.record |= a.record;
            true
        } else {
            false
        }
    });
    lands
}

/// Cap that stops the stepper from striding over a narrow pulse: roughly a
/// tenth of the pulse core width in normalized time.
fn pulse_step_cap(params: &GlzParams) -> f64 {
    if params.control == 0.0 {
        return f64::INFINITY;
    }
    let (_, dlam) = params.pulse_sweep.eval(0.5);
    0.1 / (params.control.abs() * dlam)
}

/// Propagate the generalized crossing over u in [0, 1].
///
/// The initial state is the exact instantaneous ground state of the
/// bias-plus-gap part at u = 0 and the final population is taken against
/// the instantaneous excited state at u = 1; populations along the way are
/// sampled on a uniform grid when `record` is set.
pub fn propagate(
    params: &GlzParams,
    cfg: &IntegratorConfig,
    record: bool,
) -> Result<TrajectoryRecord> {
    params.validate()?;
    cfg.validate()?;

    let (lam0, _) = params.sweep.eval(0.0);
    let g0 = crossing_eigenstate(lam0, params.gap, Band::Ground);
    let y0: State = [g0.c_plus, g0.c_minus];

    let lands = merged_landings(params, cfg, record);
    let mut grid = Vec::new();
    let mut prob = Vec::new();
    let mut norm_err = Vec::new();

    let rhs = |u: f64, y: &State| schrodinger_rhs(&params.hamiltonian_at(u), y);
    let out = dopri5(
        rhs,
        0.0,
        1.0,
        y0,
        cfg,
        pulse_step_cap(params),
        &lands,
        |u, y, drift| {
            if record {
                grid.push(u);
                prob.push(excited_population(u, params, y));
                norm_err.push(drift);
            }
        },
    )?;

    let final_prob = excited_population(1.0, params, &out.y);
    let samples = record.then(|| {
        let du = 1.0 / (GRID_POINTS - 1) as f64;
        let mut area = 0.0;
        for k in 1..prob.len() {
            area += 0.5 * (prob[k - 1] + prob[k]) * du;
        }
        TrajectorySamples {
            grid,
            prob,
            norm_err,
            area: params.time * area,
        }
    });

    Ok(TrajectoryRecord {
        final_prob,
        max_norm_drift: out.max_drift,
        error_estimate: out.err_accum,
        samples,
    })
}

/// Final excited-state population; thin wrapper over [`propagate`] without
/// trajectory recording.
pub fn transition_probability(params: &GlzParams, cfg: &IntegratorConfig) -> Result<f64> {
    Ok(propagate(params, cfg, false)?.final_prob)
}

/// Time integral of the excited-state population over the window, in
/// physical-time units.
pub fn adiabaticity_area(params: &GlzParams, cfg: &IntegratorConfig) -> Result<f64> {
    Ok(propagate(params, cfg, true)?
        .samples
        .expect("recorded run")
        .area)
}

/// Propagator of the bare crossing i dpsi/dt = (-t s3 + a s1) psi over the
/// raw window [t_i, t_f], as a Cayley-Klein pair.
///
/// Integrates the first column of the unitary; the second follows from the
/// SU(2) structure.
pub fn bare_lz_propagator(
    gap: f64,
    t_i: f64,
    t_f: f64,
    cfg: &IntegratorConfig,
) -> Result<Unitary2> {
    cfg.validate()?;
    if !(t_f > t_i) {
        return Err(GlzError::InvalidParam(format!(
            "window must satisfy t_i < t_f, got [{t_i}, {t_f}]"
        )));
    }
    let rhs = |t: f64, y: &State| schrodinger_rhs(&PauliVector::traceless(gap, 0.0, -t), y);
    let y0: State = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    let out = dopri5(
        rhs,
        t_i,
        t_f,
        y0,
        cfg,
        f64::INFINITY,
        &[Landing {
            t: t_f,
            record: false,
        }],
        |_, _, _| {},
    )?;
    Ok(Unitary2::new(out.y[0], -out.y[1].conj()))
}

/// Transition probability of the bare crossing interrupted by an
/// instantaneous pi-pulse about the in-plane axis at angle `phi`.
///
/// The kick is never integrated numerically: the two half-window
/// propagators are composed with the closed-form kick unitary
/// exp(-i (pi/2) s_phi). The result is projected on the instantaneous
/// eigenstates at the window edges, which removes the O(1/t_f) mixing of
/// the bare basis and converges to the closed-form limit as t_f grows.
pub fn delta_kick_probability(
    gap: f64,
    angle: f64,
    t_f: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    if !(t_f > 0.0) {
        return Err(GlzError::InvalidParam(format!(
            "half-window length must be positive, got {t_f}"
        )));
    }
    let before = bare_lz_propagator(gap, -t_f, 0.0, cfg)?;
    let after = bare_lz_propagator(gap, 0.0, t_f, cfg)?;
    let kick = pauli_exp(&sigma_phi(angle).scale(std::f64::consts::FRAC_PI_2));
    let full = after.compose(&kick.compose(&before));

    let g = crossing_eigenstate(-t_f, gap, Band::Ground);
    let e = crossing_eigenstate(t_f, gap, Band::Excited);
    Ok(e.inner(&full.apply(&g)).norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::PulseKind;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    #[test]
    fn lz_formula_recovered_at_default_window() {
        for a in [0.25, 0.5, 1.0, 1.5] {
            let p = GlzParams::new(a, 0.0, 0.0).unwrap();
            let prob = transition_probability(&p, &cfg()).unwrap();
            let exact = (-PI * a * a).exp();
            assert!(
                (prob - exact).abs() < 2e-3,
                "a={a}: prob={prob}, exact={exact}"
            );
        }
    }

    #[test]
    fn large_gap_probability_is_tiny() {
        let p = GlzParams::new(2.0, 0.0, 0.0).unwrap();
        let prob = transition_probability(&p, &cfg()).unwrap();
        assert!((prob - (-4.0 * PI).exp()).abs() < 1e-4);
    }

    #[test]
    fn zero_gap_full_transfer() {
        let p = GlzParams::new(0.0, 0.0, 0.0).unwrap();
        let prob = transition_probability(&p, &cfg()).unwrap();
        assert_abs_diff_eq!(prob, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn counterdiabatic_control_suppresses_all_transitions() {
        let a = 0.5;
        let p = GlzParams::new(a, 1.0 / a, FRAC_PI_2).unwrap();
        let rec = propagate(&p, &cfg(), true).unwrap();
        assert!(rec.final_prob <= 1e-4, "final {}", rec.final_prob);
        let max_p = rec
            .samples
            .unwrap()
            .prob
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        assert!(max_p <= 1e-3, "max along the way {max_p}");
    }

    #[test]
    fn in_plane_control_vanishes_only_asymptotically() {
        // at the zero-transition coupling for phi = 0 the population
        // transits through a visible bump near the crossing
        let a = 0.5;
        let b0 = 1.6887; // near the phi = 0 zero for this gap
        let p = GlzParams::new(a, b0, 0.0).unwrap();
        let rec = propagate(&p, &cfg(), true).unwrap();
        assert!(rec.final_prob <= 1e-3, "final {}", rec.final_prob);
        let max_p = rec
            .samples
            .unwrap()
            .prob
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        assert!(max_p > 0.05, "expected a transient peak, got {max_p}");
    }

    #[test]
    fn mirror_symmetry_in_gap_and_control() {
        let pairs = [(0.37, 0.9), (0.8, 1.4), (1.1, 0.3), (0.55, 2.2), (1.6, 0.7)];
        for (a, b) in pairs {
            for phi in [0.0, 0.4, FRAC_PI_2] {
                let p1 = GlzParams::new(a, b, phi).unwrap();
                let p2 = GlzParams::new(-a, -b, phi).unwrap();
                let q1 = transition_probability(&p1, &cfg()).unwrap();
                let q2 = transition_probability(&p2, &cfg()).unwrap();
                assert!(
                    (q1 - q2).abs() < 1e-6,
                    "a={a} b={b} phi={phi}: {q1} vs {q2}"
                );
            }
        }
    }

    #[test]
    fn norm_is_conserved() {
        let p = GlzParams::new(0.8, 1.2, 0.3).unwrap();
        let rec = propagate(&p, &cfg(), true).unwrap();
        assert!(rec.max_norm_drift < 1e-8, "drift {}", rec.max_norm_drift);
        for q in rec.samples.unwrap().prob {
            assert!((-1e-9..=1.0 + 1e-9).contains(&q));
        }
    }

    #[test]
    fn tolerance_convergence() {
        // halving rtol moves the answer by less than 10x the reported
        // error estimate
        let cases = [
            (0.3, 0.0, 0.0),
            (0.7, 1.1, 0.5),
            (1.2, 0.4, FRAC_PI_2),
            (0.5, 2.0, 1.0),
        ];
        for rtol in [1e-8, 1e-9] {
            for (a, b, phi) in cases {
                let p = GlzParams::new(a, b, phi).unwrap();
                let c1 = IntegratorConfig::default().with_rtol(rtol);
                let c2 = IntegratorConfig::default().with_rtol(rtol / 2.0);
                let r1 = propagate(&p, &c1, false).unwrap();
                let r2 = propagate(&p, &c2, false).unwrap();
                assert!(
                    (r1.final_prob - r2.final_prob).abs() <= 10.0 * r1.error_estimate.max(1e-14),
                    "a={a} b={b} phi={phi} rtol={rtol}: diff {} vs estimate {}",
                    (r1.final_prob - r2.final_prob).abs(),
                    r1.error_estimate
                );
            }
        }
    }

    #[test]
    fn bare_propagator_is_unitary_and_composes() {
        let u_full = bare_lz_propagator(0.8, -3.0, 3.0, &cfg()).unwrap();
        let u_l = bare_lz_propagator(0.8, -3.0, 0.5, &cfg()).unwrap();
        let u_r = bare_lz_propagator(0.8, 0.5, 3.0, &cfg()).unwrap();
        assert!(u_full.det_defect().abs() < 1e-8);
        let u_c = u_r.compose(&u_l);
        assert!((u_full.a - u_c.a).norm() < 1e-8);
        assert!((u_full.b - u_c.b).norm() < 1e-8);
    }

    #[test]
    fn half_window_relations() {
        // A(0,-t) = A(t,0)*, B(0,-t) = B(t,0) for the bare crossing
        let cases = [
            (0.3, 1.0),
            (0.3, 4.0),
            (0.8, 2.5),
            (0.8, 5.0),
            (1.2, 1.5),
            (1.2, 3.5),
            (0.5, 2.0),
            (1.7, 2.0),
            (1.0, 6.0),
            (0.6, 3.0),
        ];
        for (a, t) in cases {
            let minus = bare_lz_propagator(a, -t, 0.0, &cfg()).unwrap();
            let plus = bare_lz_propagator(a, 0.0, t, &cfg()).unwrap();
            assert!(
                (minus.a - plus.a.conj()).norm() < 1e-6,
                "a={a} t={t}: A relation"
            );
            assert!((minus.b - plus.b).norm() < 1e-6, "a={a} t={t}: B relation");
        }
    }

    #[test]
    fn symmetric_window_diagonal_is_real() {
        for (a, t) in [(0.4, 3.0), (0.9, 5.0), (1.5, 2.0)] {
            let minus = bare_lz_propagator(a, -t, 0.0, &cfg()).unwrap();
            let plus = bare_lz_propagator(a, 0.0, t, &cfg()).unwrap();
            let full = plus.compose(&minus);
            assert!(full.a.im.abs() < 1e-6, "a={a} t={t}: Im A = {}", full.a.im);
        }
    }

    #[test]
    fn delta_kick_zero_gap_is_transitionless() {
        for phi in [0.0, 0.7, FRAC_PI_2] {
            let p = delta_kick_probability(0.0, phi, 10.0, &cfg()).unwrap();
            assert!(p < 1e-6, "phi={phi}: {p}");
        }
    }

    #[test]
    fn kick_probability_matches_closed_form_spot_values() {
        for (a, phi) in [(1.0, 0.0), (0.5, std::f64::consts::FRAC_PI_4)] {
            let numeric = delta_kick_probability(a, phi, 20.0, &cfg()).unwrap();
            let closed = crate::specfun::p_infinity(a, phi);
            assert!(
                (numeric - closed).abs() < 1e-3,
                "a={a} phi={phi}: {numeric} vs {closed}"
            );
        }
    }

    #[test]
    fn angle_independence_at_zero_gap() {
        for b in [0.5, 2.0, 8.0] {
            let reference =
                transition_probability(&GlzParams::new(0.0, b, 0.0).unwrap(), &cfg()).unwrap();
            for phi in [std::f64::consts::FRAC_PI_4, FRAC_PI_2] {
                let p =
                    transition_probability(&GlzParams::new(0.0, b, phi).unwrap(), &cfg()).unwrap();
                assert!(
                    (p - reference).abs() < 1e-6,
                    "b={b} phi={phi}: {p} vs {reference}"
                );
            }
        }
    }

    #[test]
    fn discontinuous_pulses_propagate_cleanly() {
        for kind in [PulseKind::Rect, PulseKind::Triangle] {
            let p = GlzParams::new(0.5, 2.0, FRAC_PI_2)
                .unwrap()
                .with_pulse(kind);
            let rec = propagate(&p, &cfg(), false).unwrap();
            assert!(rec.final_prob.is_finite());
            assert!(rec.max_norm_drift < 1e-8);
        }
    }

    #[test]
    fn area_of_counterdiabatic_run_is_zero() {
        let a = 0.7;
        let p = GlzParams::new(a, 1.0 / a, FRAC_PI_2).unwrap();
        let area = adiabaticity_area(&p, &cfg()).unwrap();
        assert!(area <= 1e-3, "area {area}");
        assert!(area >= 0.0);
    }

    #[test]
    fn area_decreases_with_gap_without_control() {
        let mut last = f64::INFINITY;
        for a in [1.0, 1.5, 2.0] {
            let p = GlzParams::new(a, 0.0, 0.0).unwrap();
            let area = adiabaticity_area(&p, &cfg()).unwrap();
            assert!(area < last, "a={a}: {area} vs {last}");
            last = area;
        }
    }

    #[test]
    fn invalid_windows_rejected() {
        assert!(bare_lz_propagator(0.5, 1.0, 1.0, &cfg()).is_err());
        assert!(delta_kick_probability(0.5, 0.0, -1.0, &cfg()).is_err());
    }

    #[test]
    fn eigenstates_are_orthonormal_across_the_crossing() {
        for lam in [-5.0, -0.5, 0.0, 0.5, 5.0] {
            for gap in [0.0, 0.3, 2.0] {
                let g = crossing_eigenstate(lam, gap, Band::Ground);
                let e = crossing_eigenstate(lam, gap, Band::Excited);
                assert_abs_diff_eq!(g.norm_sqr(), 1.0, epsilon = 1e-14);
                assert_abs_diff_eq!(e.norm_sqr(), 1.0, epsilon = 1e-14);
                assert!(g.inner(&e).norm() < 1e-14, "lam={lam} gap={gap}");
            }
        }
    }
}
