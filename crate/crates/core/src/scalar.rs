//! Scalar abstraction for the closed-form wave algebra.
//!
//! Everything algebraic (equation of state, wave speeds, eigenvalues,
//! eigenvectors) is written once over [`Scalar`] and instantiated with
//! `f64`/`f32` for evaluation or with [`Dual7`] to obtain machine-precision
//! gradients of the same formulas by forward-mode differentiation. The
//! gradient path is what backs the interaction-coefficient formulas; the
//! finite-difference oracles never go through [`Dual7`].

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Field-like scalar with the elementary functions the wave algebra needs.
pub trait Scalar:
    Copy
    + fmt::Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn from_f64(x: f64) -> Self;
    /// Principal (derivative-free) value.
    fn value(self) -> f64;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn abs(self) -> Self;
    /// Power with a constant (state-independent) exponent.
    fn powf_c(self, e: f64) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    fn is_finite_scalar(self) -> bool {
        self.value().is_finite()
    }
}

macro_rules! impl_scalar_for_float {
    ($t:ty) => {
        impl Scalar for $t {
            fn from_f64(x: f64) -> Self {
                num_traits::cast(x).expect("float cast")
            }
            fn value(self) -> f64 {
                num_traits::cast(self).expect("float cast")
            }
            fn sqrt(self) -> Self {
                num_traits::Float::sqrt(self)
            }
            fn exp(self) -> Self {
                num_traits::Float::exp(self)
            }
            fn ln(self) -> Self {
                num_traits::Float::ln(self)
            }
            fn abs(self) -> Self {
                num_traits::Float::abs(self)
            }
            fn powf_c(self, e: f64) -> Self {
                // The adiabatic exponent is 2 for the default parameter set;
                // avoid a transcendental call on that hot path.
                if e == 1.0 {
                    self
                } else if e == 2.0 {
                    self * self
                } else {
                    num_traits::Float::powf(self, Self::from_f64(e))
                }
            }
        }
    };
}

impl_scalar_for_float!(f32);
impl_scalar_for_float!(f64);

/// Forward-mode dual number carrying a value and its gradient with respect
/// to the seven state components.
#[derive(Clone, Copy, Debug)]
pub struct Dual7 {
    pub v: f64,
    pub d: [f64; 7],
}

impl Dual7 {
    pub const fn constant(v: f64) -> Self {
        Dual7 { v, d: [0.0; 7] }
    }

    /// Independent variable: value `v`, unit derivative in slot `k`.
    pub fn seeded(v: f64, k: usize) -> Self {
        let mut d = [0.0; 7];
        d[k] = 1.0;
        Dual7 { v, d }
    }
}

impl PartialEq for Dual7 {
    fn eq(&self, other: &Self) -> bool {
        self.v == other.v
    }
}

impl PartialOrd for Dual7 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.v.partial_cmp(&other.v)
    }
}

impl Add for Dual7 {
    type Output = Self;
    fn add(self, r: Self) -> Self {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(r.d) {
            *a += b;
        }
        Dual7 { v: self.v + r.v, d }
    }
}

impl Sub for Dual7 {
    type Output = Self;
    fn sub(self, r: Self) -> Self {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(r.d) {
            *a -= b;
        }
        Dual7 { v: self.v - r.v, d }
    }
}

impl Mul for Dual7 {
    type Output = Self;
    fn mul(self, r: Self) -> Self {
        let mut d = [0.0; 7];
        for i in 0..7 {
            d[i] = self.d[i] * r.v + self.v * r.d[i];
        }
        Dual7 { v: self.v * r.v, d }
    }
}

impl Div for Dual7 {
    type Output = Self;
    fn div(self, r: Self) -> Self {
        let inv = 1.0 / r.v;
        let v = self.v * inv;
        let mut d = [0.0; 7];
        for i in 0..7 {
            d[i] = (self.d[i] - v * r.d[i]) * inv;
        }
        Dual7 { v, d }
    }
}

impl Neg for Dual7 {
    type Output = Self;
    fn neg(self) -> Self {
        let mut d = self.d;
        for a in d.iter_mut() {
            *a = -*a;
        }
        Dual7 { v: -self.v, d }
    }
}

impl AddAssign for Dual7 {
    fn add_assign(&mut self, r: Self) {
        *self = *self + r;
    }
}
impl SubAssign for Dual7 {
    fn sub_assign(&mut self, r: Self) {
        *self = *self - r;
    }
}
impl MulAssign for Dual7 {
    fn mul_assign(&mut self, r: Self) {
        *self = *self * r;
    }
}

impl Scalar for Dual7 {
    fn from_f64(x: f64) -> Self {
        Dual7::constant(x)
    }
    fn value(self) -> f64 {
        self.v
    }
    fn sqrt(self) -> Self {
        let v = self.v.sqrt();
        let s = 0.5 / v;
        let mut d = self.d;
        for a in d.iter_mut() {
            *a *= s;
        }
        Dual7 { v, d }
    }
    fn exp(self) -> Self {
        let v = self.v.exp();
        let mut d = self.d;
        for a in d.iter_mut() {
            *a *= v;
        }
        Dual7 { v, d }
    }
    fn ln(self) -> Self {
        let s = 1.0 / self.v;
        let mut d = self.d;
        for a in d.iter_mut() {
            *a *= s;
        }
        Dual7 { v: self.v.ln(), d }
    }
    fn abs(self) -> Self {
        if self.v < 0.0 {
            -self
        } else {
            self
        }
    }
    fn powf_c(self, e: f64) -> Self {
        if e == 1.0 {
            return self;
        }
        if e == 2.0 {
            return self * self;
        }
        let v = self.v.powf(e);
        let s = e * self.v.powf(e - 1.0);
        let mut d = self.d;
        for a in d.iter_mut() {
            *a *= s;
        }
        Dual7 { v, d }
    }
}

/// Dot product over the first `n` slots.
pub fn dot_n<S: Scalar>(a: &[S; 7], b: &[S; 7], n: usize) -> S {
    let mut acc = S::zero();
    for k in 0..n {
        acc += a[k] * b[k];
    }
    acc
}

pub fn dot7(a: &[f64; 7], b: &[f64; 7]) -> f64 {
    dot_n(a, b, 7)
}

/// `m · x` treating `m` as rows, over the leading `n × n` block.
pub fn matvec_n(m: &[[f64; 7]; 7], x: &[f64; 7], n: usize) -> [f64; 7] {
    let mut out = [0.0; 7];
    for (i, row) in m.iter().enumerate().take(n) {
        out[i] = dot_n(row, x, n);
    }
    out
}
