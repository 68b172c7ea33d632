//! Exact 2x2 complex algebra: state vectors, Pauli coefficient vectors and
//! unitaries stored as Cayley-Klein pairs.
//!
//! Every propagator of the two-level problems in this crate is generated by
//! a traceless Hermitian Hamiltonian, so it lives in SU(2) and is fully
//! described by the pair (A, B) with |A|^2 + |B|^2 = 1:
//!
//! ```text
//!     U = |  A    B  |
//!         | -B*   A* |
//! ```
//!
//! Storing the pair instead of a general matrix halves the state and makes
//! the unimodular invariant checkable in a single expression.

use num_complex::Complex64;

/// Threshold above which norm drift is repaired (with a logged warning)
/// instead of silently carried along.
pub const NORM_DRIFT_LIMIT: f64 = 1e-8;

/// Two-component complex wavefunction in the basis |+> = (1,0), |-> = (0,1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    pub c_plus: Complex64,
    pub c_minus: Complex64,
}

impl StateVector {
    pub fn new(c_plus: Complex64, c_minus: Complex64) -> Self {
        Self { c_plus, c_minus }
    }

    /// Basis state |+> = (1, 0).
    pub fn basis_plus() -> Self {
        Self::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    /// Basis state |-> = (0, 1).
    pub fn basis_minus() -> Self {
        Self::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c_plus.norm_sqr() + self.c_minus.norm_sqr()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        Self::new(self.c_plus / n, self.c_minus / n)
    }

    /// Inner product `<self|other>` (antilinear in `self`).
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.c_plus.conj() * other.c_plus + self.c_minus.conj() * other.c_minus
    }
}

/// Coefficients of a Hermitian matrix n0*1 + n1*s1 + n2*s2 + n3*s3.
///
/// Hermiticity is structural: all coefficients are real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliVector {
    pub n0: f64,
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
}

impl PauliVector {
    /// Traceless vector (n0 = 0).
    pub fn traceless(n1: f64, n2: f64, n3: f64) -> Self {
        Self {
            n0: 0.0,
            n1,
            n2,
            n3,
        }
    }

    /// Euclidean norm of the traceless part (n1, n2, n3).
    pub fn norm(&self) -> f64 {
        (self.n1 * self.n1 + self.n2 * self.n2 + self.n3 * self.n3).sqrt()
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            n0: k * self.n0,
            n1: k * self.n1,
            n2: k * self.n2,
            n3: k * self.n3,
        }
    }

    /// Dense 2x2 matrix, row major.
    pub fn to_matrix(&self) -> [[Complex64; 2]; 2] {
        let i = Complex64::i();
        [
            [
                Complex64::new(self.n0 + self.n3, 0.0),
                Complex64::new(self.n1, 0.0) - i * self.n2,
            ],
            [
                Complex64::new(self.n1, 0.0) + i * self.n2,
                Complex64::new(self.n0 - self.n3, 0.0),
            ],
        ]
    }
}

/// In-plane Pauli direction s1*cos(phi) + s2*sin(phi).
///
/// `phi` is normally in [0, pi/2]; values outside are accepted and act as
/// an extrapolation of the same formula.
pub fn sigma_phi(phi: f64) -> PauliVector {
    PauliVector::traceless(phi.cos(), phi.sin(), 0.0)
}

/// SU(2) element stored as the Cayley-Klein pair (A, B).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2 {
    pub a: Complex64,
    pub b: Complex64,
}

impl Unitary2 {
    pub const IDENTITY: Unitary2 = Unitary2 {
        a: Complex64::new(1.0, 0.0),
        b: Complex64::new(0.0, 0.0),
    };

    pub fn new(a: Complex64, b: Complex64) -> Self {
        Self { a, b }
    }

    /// |A|^2 + |B|^2 - 1. Zero for an exactly unimodular pair.
    pub fn det_defect(&self) -> f64 {
        self.a.norm_sqr() + self.b.norm_sqr() - 1.0
    }

    /// Matrix-vector action on a state.
    pub fn apply(&self, psi: &StateVector) -> StateVector {
        StateVector::new(
            self.a * psi.c_plus + self.b * psi.c_minus,
            -self.b.conj() * psi.c_plus + self.a.conj() * psi.c_minus,
        )
    }

    /// Matrix product `self * first`: `first` acts before `self`.
    pub fn compose(&self, first: &Unitary2) -> Unitary2 {
        Unitary2::new(
            self.a * first.a - self.b * first.b.conj(),
            self.a * first.b + self.b * first.a.conj(),
        )
    }

    /// Inverse (= adjoint).
    pub fn adjoint(&self) -> Unitary2 {
        Unitary2::new(self.a.conj(), -self.b)
    }

    pub fn to_matrix(&self) -> [[Complex64; 2]; 2] {
        [[self.a, self.b], [-self.b.conj(), self.a.conj()]]
    }
}

/// Closed-form exponential exp(-i (n0*1 + n.sigma)).
///
/// Splitting the exponential series into even and odd powers gives
/// cos|n| * 1 - i sin|n| (n_hat . sigma), times the global phase from n0.
/// The |n| -> 0 limit is taken by series, so the function is total.
pub fn pauli_exp(n: &PauliVector) -> Unitary2 {
    let r = n.norm();
    // sin(r)/r, stable at the origin
    let sinc = if r < 1e-6 {
        1.0 - r * r / 6.0
    } else {
        r.sin() / r
    };
    let cos = r.cos();
    let i = Complex64::i();
    let a = Complex64::new(cos, 0.0) - i * (sinc * n.n3);
    let b = -i * sinc * Complex64::new(n.n1, -n.n2);
    let u = Unitary2::new(a, b);
    if n.n0 == 0.0 {
        u
    } else {
        let phase = Complex64::from_polar(1.0, -n.n0);
        Unitary2::new(phase * u.a, phase * u.b)
    }
}
