//! Hamiltonian families: pulse shapes, sweep functions, imperfection models
//! and the generalized two-level crossing parameters.
//!
//! All pulse shapes satisfy the same area-peak normalization: value b/2 at
//! the center and total area pi/2 over the real line, so the control
//! coupling `b` has the same meaning for every shape.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::pauli::PauliVector;
use crate::quad;
use crate::{GlzError, Result};

/// Pulse catalog, named by the single-letter codes used in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PulseKind {
    /// `L`: b/2 / (b^2 t^2 + 1)
    Lorentzian,
    /// `g`: (b/2) exp(-b^2 t^2 / pi)
    Gaussian,
    /// `s`: sin(b t) / (2 t)
    Sinc,
    /// `r`: (b/2) for |t| < pi/(2b), else 0
    Rect,
    /// `t`: (1/2)(b - |t| b^2 / pi) for |t| < pi/b, else 0
    Triangle,
}

impl PulseKind {
    pub const ALL: [PulseKind; 5] = [
        PulseKind::Lorentzian,
        PulseKind::Gaussian,
        PulseKind::Sinc,
        PulseKind::Rect,
        PulseKind::Triangle,
    ];

    pub fn code(&self) -> char {
        match self {
            PulseKind::Lorentzian => 'L',
            PulseKind::Gaussian => 'g',
            PulseKind::Sinc => 's',
            PulseKind::Rect => 'r',
            PulseKind::Triangle => 't',
        }
    }

    pub fn from_code(c: char) -> Option<PulseKind> {
        match c {
            'L' => Some(PulseKind::Lorentzian),
            'g' => Some(PulseKind::Gaussian),
            's' => Some(PulseKind::Sinc),
            'r' => Some(PulseKind::Rect),
            't' => Some(PulseKind::Triangle),
            _ => None,
        }
    }
}

/// A pulse shape with its control coupling `b > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    pub kind: PulseKind,
    pub b: f64,
}

impl PulseShape {
    pub fn new(kind: PulseKind, b: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(GlzError::InvalidParam(format!(
                "pulse coupling b must be positive and finite, got {b}"
            )));
        }
        Ok(Self { kind, b })
    }

    /// Unperturbed pulse value at time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let b = self.b;
        match self.kind {
            PulseKind::Lorentzian => 0.5 * b / (b * b * t * t + 1.0),
            PulseKind::Gaussian => 0.5 * b * (-b * b * t * t / PI).exp(),
            PulseKind::Sinc => {
                let x = b * t;
                if x.abs() < 1e-8 {
                    // sin(x)/(2t) = (b/2)(1 - x^2/6 + ...)
                    0.5 * b * (1.0 - x * x / 6.0)
                } else {
                    0.5 * x.sin() / t
                }
            }
            PulseKind::Rect => {
                if t.abs() < FRAC_PI_2 / b {
                    0.5 * b
                } else {
                    0.0
                }
            }
            PulseKind::Triangle => {
                if t.abs() < PI / b {
                    0.5 * (b - t.abs() * b * b / PI)
                } else {
                    0.0
                }
            }
        }
    }

    /// Times where the shape is discontinuous or kinked; adaptive steppers
    /// must land on these exactly.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.kind {
            PulseKind::Rect => {
                let e = FRAC_PI_2 / self.b;
                vec![-e, e]
            }
            PulseKind::Triangle => {
                let e = PI / self.b;
                vec![-e, 0.0, e]
            }
            _ => Vec::new(),
        }
    }
}

/// Imperfection applied to the control pulse.
///
/// Integer codes used in config files: 1 scales value (both area and peak),
/// 2 rescales time keeping the peak fixed, 3 combines both keeping the area
/// fixed to first order. Kinds 2 and 3 are defined on the Lorentzian shape
/// only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImperfectionKind {
    ScaleBoth,
    FixPeak,
    FixArea,
}

impl ImperfectionKind {
    pub fn code(&self) -> u8 {
        match self {
            ImperfectionKind::ScaleBoth => 1,
            ImperfectionKind::FixPeak => 2,
            ImperfectionKind::FixArea => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            1 => Some(ImperfectionKind::ScaleBoth),
            2 => Some(ImperfectionKind::FixPeak),
            3 => Some(ImperfectionKind::FixArea),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub kind: ImperfectionKind,
    pub epsilon: f64,
}

impl ErrorModel {
    pub fn new(kind: ImperfectionKind, epsilon: f64) -> Result<Self> {
        if !(epsilon > -1.0 && epsilon < 1.0) {
            return Err(GlzError::InvalidParam(format!(
                "imperfection parameter must lie in (-1, 1), got {epsilon}"
            )));
        }
        Ok(Self { kind, epsilon })
    }
}

/// A pulse together with an optional imperfection, validated as a pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbedPulse {
    pub shape: PulseShape,
    pub error: Option<ErrorModel>,
}

impl PerturbedPulse {
    pub fn new(shape: PulseShape, error: Option<ErrorModel>) -> Result<Self> {
        if let Some(e) = error {
            if e.kind != ImperfectionKind::ScaleBoth && shape.kind != PulseKind::Lorentzian {
                return Err(GlzError::InvalidParam(format!(
                    "imperfection kind {} is defined for the Lorentzian pulse only",
                    e.kind.code()
                )));
            }
        }
        Ok(Self { shape, error })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.error {
            None => self.shape.eval(t),
            Some(ErrorModel {
                kind: ImperfectionKind::ScaleBoth,
                epsilon,
            }) => (1.0 + epsilon) * self.shape.eval(t),
            Some(ErrorModel { kind, epsilon }) => {
                // Lorentzian-only branches: time axis rescaled by (1 - eps)
                let b = self.shape.b;
                let s = b * (1.0 - epsilon);
                let base = 0.5 * b / (s * s * t * t + 1.0);
                match kind {
                    ImperfectionKind::FixPeak => base,
                    ImperfectionKind::FixArea => (1.0 + epsilon) * base,
                    ImperfectionKind::ScaleBoth => unreachable!(),
                }
            }
        }
    }
}

/// Numeric area of a (possibly perturbed) pulse over the whole real line.
///
/// Adaptive quadrature over a shape-specific window plus analytic tails for
/// the slowly decaying shapes (Lorentzian: exact arctan tail; sinc:
/// asymptotic sine-integral tail). Used by validation tests as the
/// independent check of the area-peak normalization.
pub fn pulse_area_numeric(pulse: &PerturbedPulse, tol: f64) -> f64 {
    let b = pulse.shape.b;
    let (scale, slope) = match pulse.error {
        None => (1.0, b),
        Some(ErrorModel { kind, epsilon }) => match kind {
            ImperfectionKind::ScaleBoth => (1.0 + epsilon, b),
            ImperfectionKind::FixPeak => (1.0, b * (1.0 - epsilon)),
            ImperfectionKind::FixArea => (1.0 + epsilon, b * (1.0 - epsilon)),
        },
    };
    match pulse.shape.kind {
        PulseKind::Lorentzian => {
            let w = 50.0 / slope;
            let body = quad::integrate(|t| pulse.eval(t), -w, w, tol / 4.0);
            // int_w^inf (b/2)/(slope^2 t^2 + 1) dt, both sides
            let tail = scale * (b / slope) * (FRAC_PI_2 - (slope * w).atan());
            body + tail
        }
        PulseKind::Gaussian => {
            let w = 13.0 / b;
            quad::integrate(|t| pulse.eval(t), -w, w, tol / 2.0)
        }
        PulseKind::Sinc => {
            // window ends at a zero of sin(b t); asymptotic tail of the
            // sine integral: int_x^inf sin(u)/u du =
            //   cos(x)(1/x - 2/x^3 + 24/x^5) + sin(x)(1/x^2 - 6/x^4) + O(x^-7)
            let x = 60.0 * PI;
            let w = x / b;
            let body = quad::integrate(|t| pulse.eval(t), -w, w, tol / 4.0);
            let even = x.cos() * (1.0 / x - 2.0 / x.powi(3) + 24.0 / x.powi(5));
            let odd = x.sin() * (1.0 / x.powi(2) - 6.0 / x.powi(4));
            body + scale * (even + odd)
        }
        PulseKind::Rect => {
            let e = (FRAC_PI_2 / b) * (1.0 - 1e-12);
            quad::integrate(|t| pulse.eval(t), -e, e, tol / 2.0)
        }
        PulseKind::Triangle => {
            let e = PI / b;
            quad::integrate_split(|t| pulse.eval(t), -e, e, &[0.0], tol / 2.0)
        }
    }
}

/// Reference counterdiabatic pulse (1/2) a / (t^2 + a^2) for a single gap
/// `a`; identical to the Lorentzian shape evaluated with b = 1/a.
pub fn cd_pulse_reference(gap: f64, t: f64) -> Result<f64> {
    if gap == 0.0 || !gap.is_finite() {
        return Err(GlzError::InvalidParam(
            "counterdiabatic reference pulse requires a nonzero gap".into(),
        ));
    }
    Ok(0.5 * gap / (t * t + gap * gap))
}

/// Ramp of the level bias over normalized time u in [0, 1].
///
/// Both kinds run from -lambda0/2 at u = 0 to +lambda0/2 at u = 1 and are
/// strictly increasing. The tangent ramp concentrates resolution near the
/// crossing; its `shape` parameter plays the same role as a gap scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SweepSpec {
    Linear { lambda0: f64 },
    Tangent { lambda0: f64, shape: f64 },
}

impl SweepSpec {
    pub fn linear(lambda0: f64) -> Result<Self> {
        if !(lambda0 > 0.0) || !lambda0.is_finite() {
            return Err(GlzError::InvalidParam(format!(
                "sweep amplitude must be positive, got {lambda0}"
            )));
        }
        Ok(SweepSpec::Linear { lambda0 })
    }

    pub fn tangent(lambda0: f64, shape: f64) -> Result<Self> {
        if !(lambda0 > 0.0) || !lambda0.is_finite() {
            return Err(GlzError::InvalidParam(format!(
                "sweep amplitude must be positive, got {lambda0}"
            )));
        }
        if !(shape > 0.0) || !shape.is_finite() {
            return Err(GlzError::InvalidParam(format!(
                "tangent sweep shape parameter must be positive, got {shape}"
            )));
        }
        Ok(SweepSpec::Tangent { lambda0, shape })
    }

    pub fn lambda0(&self) -> f64 {
        match *self {
            SweepSpec::Linear { lambda0 } | SweepSpec::Tangent { lambda0, .. } => lambda0,
        }
    }

    /// Value and analytic derivative (lambda, dlambda/du) at u.
    pub fn eval(&self, u: f64) -> (f64, f64) {
        match *self {
            SweepSpec::Linear { lambda0 } => (lambda0 * (u - 0.5), lambda0),
            SweepSpec::Tangent { lambda0, shape } => {
                let theta = (1.0 / shape).atan();
                let tan = (theta * (2.0 * u - 1.0)).tan();
                let lam = 0.5 * lambda0 * shape * tan;
                let dlam = lambda0 * shape * theta * (1.0 + tan * tan);
                (lam, dlam)
            }
        }
    }

    /// Inverse map: the u at which the ramp passes through `lam`, if it
    /// does so inside (0, 1).
    pub fn invert(&self, lam: f64) -> Option<f64> {
        let u = match *self {
            SweepSpec::Linear { lambda0 } => lam / lambda0 + 0.5,
            SweepSpec::Tangent { lambda0, shape } => {
                let theta = (1.0 / shape).atan();
                0.5 + (2.0 * lam / (lambda0 * shape)).atan() / (2.0 * theta)
            }
        };
        (u > 0.0 && u < 1.0).then_some(u)
    }
}

/// Full parameter set of the generalized two-level crossing.
///
/// The evolution runs over normalized time u in [0, 1] with Hamiltonian
///
/// ```text
///   H(u) = T(-lambda(u) s3 + a s1) + dlambda_p/du f(lambda_p(u)) s_phi
/// ```
///
/// where `lambda` is the bias ramp, `lambda_p` the (possibly distinct) ramp
/// feeding the pulse argument and f the perturbed pulse. The two ramps
/// coincide for linear sweeps; for tangent sweeps the bias ramp uses a
/// gap-like shape parameter while the pulse ramp uses the control coupling.
///
/// `control` may be negative: the pulse is extended oddly,
/// f(t; -b) = -f(t; b), which is the algebraic continuation of every shape
/// in the catalog and is what the mirror symmetry P(a, b) = P(-a, -b)
/// requires. `control = 0` switches the pulse term off entirely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlzParams {
    pub gap: f64,
    pub control: f64,
    pub angle: f64,
    pub pulse: PulseKind,
    pub error: Option<ErrorModel>,
    pub sweep: SweepSpec,
    pub pulse_sweep: SweepSpec,
    pub time: f64,
}

pub const DEFAULT_LAMBDA0: f64 = 10.0;
pub const DEFAULT_TIME: f64 = 10.0;

impl GlzParams {
    /// Lorentzian pulse, linear ramps, T = lambda0 = 10.
    pub fn new(gap: f64, control: f64, angle: f64) -> Result<Self> {
        let sweep = SweepSpec::linear(DEFAULT_LAMBDA0)?;
        let p = Self {
            gap,
            control,
            angle,
            pulse: PulseKind::Lorentzian,
            error: None,
            sweep,
            pulse_sweep: sweep,
            time: DEFAULT_TIME,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_pulse(mut self, kind: PulseKind) -> Self {
        self.pulse = kind;
        self
    }

    pub fn with_error(mut self, error: ErrorModel) -> Result<Self> {
        self.error = Some(error);
        self.validate()?;
        Ok(self)
    }

    pub fn with_time(mut self, time: f64) -> Result<Self> {
        self.time = time;
        self.validate()?;
        Ok(self)
    }

    pub fn with_linear_sweep(mut self, lambda0: f64) -> Result<Self> {
        self.sweep = SweepSpec::linear(lambda0)?;
        self.pulse_sweep = self.sweep;
        Ok(self)
    }

    /// Tangent ramps: the bias ramp gets `shape` (a gap-scale choice, kept
    /// fixed across an ensemble), the pulse ramp gets |control|.
    pub fn with_tangent_sweeps(mut self, lambda0: f64, shape: f64) -> Result<Self> {
        self.sweep = SweepSpec::tangent(lambda0, shape)?;
        self.pulse_sweep = if self.control != 0.0 {
            SweepSpec::tangent(lambda0, self.control.abs())?
        } else {
            SweepSpec::linear(lambda0)?
        };
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.time > 0.0) || !self.time.is_finite() {
            return Err(GlzError::InvalidParam(format!(
                "protocol time must be positive, got {}",
                self.time
            )));
        }
        if !self.gap.is_finite() || !self.control.is_finite() || !self.angle.is_finite() {
            return Err(GlzError::InvalidParam(
                "gap, control and angle must be finite".into(),
            ));
        }
        if self.control != 0.0 {
            // validates the pulse/error combination
            PerturbedPulse::new(PulseShape::new(self.pulse, self.control.abs())?, self.error)?;
        }
        Ok(())
    }

    fn perturbed_pulse(&self) -> PerturbedPulse {
        PerturbedPulse {
            shape: PulseShape {
                kind: self.pulse,
                b: self.control.abs(),
            },
            error: self.error,
        }
    }

    /// Pauli coefficients of H(u). Always traceless.
    pub fn hamiltonian_at(&self, u: f64) -> PauliVector {
        let (lam, _) = self.sweep.eval(u);
        let n3 = -self.time * lam;
        let mut n1 = self.time * self.gap;
        let mut n2 = 0.0;
        if self.control != 0.0 {
            let (lam_p, dlam_p) = self.pulse_sweep.eval(u);
            let f = self.control.signum() * dlam_p * self.perturbed_pulse().eval(lam_p);
            n1 += f * self.angle.cos();
            n2 = f * self.angle.sin();
        }
        PauliVector::traceless(n1, n2, n3)
    }

    /// Normalized-time locations of pulse discontinuities and kinks.
    pub fn breakpoints(&self) -> Vec<f64> {
        if self.control == 0.0 {
            return Vec::new();
        }
        self.perturbed_pulse()
            .shape
            .breakpoints()
            .into_iter()
            .filter_map(|x| self.pulse_sweep.invert(x))
            .collect()
    }

    /// Dense matrix of H(u), for tests and spot checks.
    pub fn hamiltonian_matrix(&self, u: f64) -> [[Complex64; 2]; 2] {
        self.hamiltonian_at(u).to_matrix()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn peaks_are_exactly_half_b() {
        for kind in PulseKind::ALL {
            for b in [0.5, 1.0, 2.0, 5.0] {
                let p = PulseShape::new(kind, b).unwrap();
                assert_eq!(p.eval(0.0), 0.5 * b, "{kind:?} b={b}");
            }
        }
    }

    #[test]
    fn areas_are_half_pi() {
        for kind in PulseKind::ALL {
            for b in [0.5, 1.0, 2.0, 5.0] {
                let p = PerturbedPulse::new(PulseShape::new(kind, b).unwrap(), None).unwrap();
                let area = pulse_area_numeric(&p, 1e-9);
                assert_abs_diff_eq!(area, FRAC_PI_2, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn rect_vanishes_outside_support() {
        let p = PulseShape::new(PulseKind::Rect, 2.0).unwrap();
        assert_eq!(p.eval(PI / 4.0 + 1e-9), 0.0);
        assert_eq!(p.eval(-PI / 4.0 - 1e-9), 0.0);
        assert_eq!(p.eval(PI / 4.0 - 1e-9), 1.0);
    }

    #[test]
    fn nonpositive_coupling_rejected() {
        assert!(PulseShape::new(PulseKind::Lorentzian, 0.0).is_err());
        assert!(PulseShape::new(PulseKind::Sinc, -1.0).is_err());
    }

    #[test]
    fn imperfection_peak_values() {
        let shape = PulseShape::new(PulseKind::Lorentzian, 2.0).unwrap();
        let e1 = ErrorModel::new(ImperfectionKind::ScaleBoth, 0.1).unwrap();
        let p = PerturbedPulse::new(shape, Some(e1)).unwrap();
        assert_abs_diff_eq!(p.eval(0.0), 1.1, epsilon = 1e-15);

        let e2 = ErrorModel::new(ImperfectionKind::FixPeak, 0.1).unwrap();
        let p = PerturbedPulse::new(shape, Some(e2)).unwrap();
        assert_abs_diff_eq!(p.eval(0.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn fix_area_imperfection_area() {
        let shape = PulseShape::new(PulseKind::Lorentzian, 2.0).unwrap();
        let e3 = ErrorModel::new(ImperfectionKind::FixArea, 0.1).unwrap();
        let p = PerturbedPulse::new(shape, Some(e3)).unwrap();
        let area = pulse_area_numeric(&p, 1e-9);
        assert_abs_diff_eq!(area, FRAC_PI_2 * 1.1 / 0.9, epsilon = 1e-6);
    }

    #[test]
    fn lorentzian_only_imperfections_rejected_elsewhere() {
        let e2 = ErrorModel::new(ImperfectionKind::FixPeak, 0.1).unwrap();
        for kind in [
            PulseKind::Gaussian,
            PulseKind::Sinc,
            PulseKind::Rect,
            PulseKind::Triangle,
        ] {
            let shape = PulseShape::new(kind, 1.0).unwrap();
            assert!(PerturbedPulse::new(shape, Some(e2)).is_err(), "{kind:?}");
        }
        // kind 1 applies to any shape
        let e1 = ErrorModel::new(ImperfectionKind::ScaleBoth, 0.1).unwrap();
        let shape = PulseShape::new(PulseKind::Gaussian, 1.0).unwrap();
        assert!(PerturbedPulse::new(shape, Some(e1)).is_ok());
    }

    #[test]
    fn epsilon_domain() {
        assert!(ErrorModel::new(ImperfectionKind::ScaleBoth, 1.0).is_err());
        assert!(ErrorModel::new(ImperfectionKind::ScaleBoth, -1.0).is_err());
        assert!(ErrorModel::new(ImperfectionKind::ScaleBoth, 0.999).is_ok());
    }

    #[test]
    fn linear_sweep_midpoint() {
        let s = SweepSpec::linear(10.0).unwrap();
        let (lam, dlam) = s.eval(0.5);
        assert_eq!(lam, 0.0);
        assert_eq!(dlam, 10.0);
    }

    #[test]
    fn tangent_sweep_boundaries_and_value() {
        for c in [0.1, 0.5, 1.0, 2.0] {
            let s = SweepSpec::tangent(10.0, c).unwrap();
            assert_abs_diff_eq!(s.eval(0.0).0, -5.0, epsilon = 1e-12);
            assert_abs_diff_eq!(s.eval(1.0).0, 5.0, epsilon = 1e-12);
        }
        // frozen from a high-precision evaluation of the closed form:
        // 2.5 * tan(arctan(2) * (-0.5)) with tan(arctan(2)/2) = (sqrt(5)-1)/2
        let s = SweepSpec::tangent(10.0, 0.5).unwrap();
        assert_abs_diff_eq!(s.eval(0.25).0, -1.545_084_971_874_737_2, epsilon = 1e-13);
    }

    #[test]
    fn tangent_sweep_derivative_matches_finite_differences() {
        let s = SweepSpec::tangent(10.0, 0.7).unwrap();
        let h = 1e-6;
        for k in 1..20 {
            let u = k as f64 / 20.0;
            let (_, dlam) = s.eval(u);
            let fd = (s.eval(u + h).0 - s.eval(u - h).0) / (2.0 * h);
            assert_abs_diff_eq!(dlam, fd, epsilon = 1e-6 * dlam.abs().max(1.0));
        }
    }

    #[test]
    fn tangent_shape_must_be_positive() {
        assert!(SweepSpec::tangent(10.0, 0.0).is_err());
        assert!(SweepSpec::tangent(10.0, -0.5).is_err());
    }

    #[test]
    fn sweep_inversion_round_trips() {
        for s in [
            SweepSpec::linear(10.0).unwrap(),
            SweepSpec::tangent(10.0, 0.8).unwrap(),
        ] {
            for k in 1..10 {
                let u = k as f64 / 10.0;
                let (lam, _) = s.eval(u);
                let back = s.invert(lam).unwrap();
                assert_abs_diff_eq!(back, u, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn hamiltonian_pulse_off_at_crossing() {
        let p = GlzParams::new(0.7, 0.0, 0.0).unwrap();
        let n = p.hamiltonian_at(0.5);
        assert_eq!(n.n0, 0.0);
        assert_abs_diff_eq!(n.n1, 7.0, epsilon = 1e-12);
        assert_eq!(n.n2, 0.0);
        assert_abs_diff_eq!(n.n3, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn hamiltonian_matches_transported_cd_form() {
        // With T = lambda0 the normalized-time equation maps onto the raw
        // crossing H = -t s3 + a s1 + (1/2) a/(a^2+t^2) s2 under t = lambda(u),
        // picking up the overall factor dlambda/du = lambda0. Spot check at
        // the crossing.
        let a = 0.5;
        let p = GlzParams::new(a, 1.0 / a, FRAC_PI_2).unwrap();
        let n = p.hamiltonian_at(0.5);
        assert_abs_diff_eq!(n.n1, 10.0 * a, epsilon = 1e-12);
        assert_abs_diff_eq!(
            n.n2,
            10.0 * cd_pulse_reference(a, 0.0).unwrap(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(n.n3, 0.0, epsilon = 1e-12);
        // off-center, against the raw form at t = lambda(u)
        let u = 0.62;
        let (lam, _) = p.sweep.eval(u);
        let n = p.hamiltonian_at(u);
        assert_abs_diff_eq!(n.n3, -10.0 * lam, epsilon = 1e-12);
        assert_abs_diff_eq!(
            n.n2,
            10.0 * cd_pulse_reference(a, lam).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn hamiltonian_always_traceless() {
        let p = GlzParams::new(0.4, 1.7, 0.3)
            .unwrap()
            .with_pulse(PulseKind::Gaussian);
        for k in 0..100 {
            let u = k as f64 / 99.0;
            assert_eq!(p.hamiltonian_at(u).n0, 0.0);
        }
    }

    #[test]
    fn odd_extension_mirrors_hamiltonian() {
        // H(a, b) = s3 H(-a, -b) s3 pointwise
        let p = GlzParams::new(0.6, 1.3, 0.4).unwrap();
        let q = GlzParams::new(-0.6, -1.3, 0.4).unwrap();
        for k in 0..30 {
            let u = k as f64 / 29.0;
            let np = p.hamiltonian_at(u);
            let nq = q.hamiltonian_at(u);
            assert_abs_diff_eq!(np.n1, -nq.n1, epsilon = 1e-12);
            assert_abs_diff_eq!(np.n2, -nq.n2, epsilon = 1e-12);
            assert_abs_diff_eq!(np.n3, nq.n3, epsilon = 1e-12);
        }
    }

    /// Trace inner product of two Pauli vectors: tr(A^dag B) = 2(n0 m0 + n.m).
    fn dot(a: &PauliVector, b: &PauliVector) -> f64 {
        2.0 * (a.n0 * b.n0 + a.n1 * b.n1 + a.n2 * b.n2 + a.n3 * b.n3)
    }

    #[test]
    fn cd_orthogonality_conditions() {
        // The counterdiabatic direction s2 is orthogonal (in the trace inner
        // product) to 1, H0 and dH0/dt for the bare crossing; tilting the
        // control to s_phi with phi != pi/2 breaks exactly the second
        // condition, by 2 a f cos(phi) at the crossing.
        for (a, t) in [(0.5, 0.0), (0.5, 1.3), (1.2, -0.7), (2.0, 0.4)] {
            let f = cd_pulse_reference(a, t).unwrap();
            let h0 = PauliVector::traceless(a, 0.0, -t);
            let dh0 = PauliVector::traceless(0.0, 0.0, -1.0);
            let hcd = PauliVector::traceless(0.0, f, 0.0);
            let one = PauliVector {
                n0: 1.0,
                n1: 0.0,
                n2: 0.0,
                n3: 0.0,
            };
            assert_eq!(dot(&hcd, &one), 0.0);
            assert_eq!(dot(&hcd, &h0), 0.0);
            assert_eq!(dot(&hcd, &dh0), 0.0);

            for phi in [0.0, 0.3, 1.0] {
                let s = crate::pauli::sigma_phi(phi);
                let hctl = PauliVector::traceless(f * s.n1, f * s.n2, 0.0);
                assert_eq!(dot(&hctl, &one), 0.0);
                assert_eq!(dot(&hctl, &dh0), 0.0);
                assert_abs_diff_eq!(dot(&hctl, &h0), 2.0 * a * f * phi.cos(), epsilon = 1e-14);
                if a != 0.0 {
                    assert!(dot(&hctl, &h0).abs() > 0.0);
                }
            }
        }
    }

    #[test]
    fn cd_reference_pulse_values() {
        assert_abs_diff_eq!(cd_pulse_reference(1.0, 0.0).unwrap(), 0.5, epsilon = 1e-15);
        // frozen scalar evaluation: 0.5 * 0.5 / (0.25 + 0.25)
        assert_abs_diff_eq!(cd_pulse_reference(0.5, 0.5).unwrap(), 0.5, epsilon = 1e-15);
        assert!(cd_pulse_reference(0.0, 1.0).is_err());
        // identity with the Lorentzian shape at b = 1/a
        let a = 0.7;
        let shape = PulseShape::new(PulseKind::Lorentzian, 1.0 / a).unwrap();
        for t in [-2.0, -0.3, 0.0, 0.5, 4.0] {
            assert_abs_diff_eq!(
                cd_pulse_reference(a, t).unwrap(),
                shape.eval(t),
                epsilon = 1e-15
            );
        }
        // area of the reference pulse; both tails together are
        // int_{|t|>w} (1/2)/(t^2+1) dt = pi/2 - atan(w)
        let area = quad::integrate(
            |t| cd_pulse_reference(1.0, t).unwrap(),
            -3000.0,
            3000.0,
            1e-8,
        ) + (FRAC_PI_2 - 3000.0f64.atan());
        assert_abs_diff_eq!(area, FRAC_PI_2, epsilon = 1e-6);
    }

    #[test]
    fn rect_breakpoints_land_in_normalized_time() {
        let p = GlzParams::new(0.5, 2.0, 0.0)
            .unwrap()
            .with_pulse(PulseKind::Rect);
        let bps = p.breakpoints();
        assert_eq!(bps.len(), 2);
        // edges at lambda = +-pi/4, linear ramp lambda0 = 10
        assert_abs_diff_eq!(bps[0], 0.5 - PI / 40.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bps[1], 0.5 + PI / 40.0, epsilon = 1e-12);
    }

    #[test]
    fn invalid_time_rejected() {
        assert!(GlzParams::new(0.5, 1.0, 0.0)
            .unwrap()
            .with_time(0.0)
            .is_err());
        assert!(GlzParams::new(0.5, 1.0, 0.0)
            .unwrap()
            .with_time(-3.0)
            .is_err());
    }
}
