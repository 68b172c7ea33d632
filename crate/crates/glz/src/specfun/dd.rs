//! Minimal double-double (compensated) arithmetic for the Kummer series.
//!
//! The confluent-hypergeometric series behind the parabolic cylinder
//! functions cancels catastrophically on the certified window: at |t| = 6
//! the largest term reaches ~e^36 while the sum stays O(1), so plain f64
//! accumulation loses everything. Carrying each term as an unevaluated
//! (hi, lo) pair keeps ~32 significant digits, which leaves the final sum
//! with ~16 digits of headroom.

#[derive(Debug, Clone, Copy)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, f64::mul_add(a, b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact product of two f64 values.
    #[inline]
    pub fn from_prod(a: f64, b: f64) -> Dd {
        let (hi, lo) = two_prod(a, b);
        Dd { hi, lo }
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    #[inline]
    pub fn add(self, rhs: Dd) -> Dd {
        let (s1, e1) = two_sum(self.hi, rhs.hi);
        let (s2, e2) = two_sum(self.lo, rhs.lo);
        let (s1, e1) = quick_two_sum(s1, e1 + s2);
        let (hi, lo) = quick_two_sum(s1, e1 + e2);
        Dd { hi, lo }
    }

    #[inline]
    pub fn sub(self, rhs: Dd) -> Dd {
        self.add(rhs.neg())
    }

    #[inline]
    pub fn mul(self, rhs: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    /// Two-iteration division; relative error at the double-double level.
    #[inline]
    pub fn div(self, rhs: Dd) -> Dd {
        let q1 = self.hi / rhs.hi;
        let r = self.sub(rhs.mul(Dd::from_f64(q1)));
        let q2 = (r.hi + r.lo) / (rhs.hi + rhs.lo);
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Complex number with double-double components.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CDd {
    pub re: Dd,
    pub im: Dd,
}

impl CDd {
    pub const ONE: CDd = CDd {
        re: Dd::ONE,
        im: Dd::ZERO,
    };

    #[inline]
    pub fn new(re: Dd, im: Dd) -> CDd {
        CDd { re, im }
    }

    #[inline]
    pub fn add(self, rhs: CDd) -> CDd {
        CDd::new(self.re.add(rhs.re), self.im.add(rhs.im))
    }

    #[inline]
    pub fn mul(self, rhs: CDd) -> CDd {
        CDd::new(
            self.re.mul(rhs.re).sub(self.im.mul(rhs.im)),
            self.re.mul(rhs.im).add(self.im.mul(rhs.re)),
        )
    }

    #[inline]
    pub fn div_real(self, rhs: Dd) -> CDd {
        CDd::new(self.re.div(rhs), self.im.div(rhs))
    }

    /// Cheap magnitude bound for convergence checks.
    #[inline]
    pub fn mag(self) -> f64 {
        self.re.hi.abs() + self.im.hi.abs()
    }

    #[inline]
    pub fn to_c64(self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.re.to_f64(), self.im.to_f64())
    }
}
