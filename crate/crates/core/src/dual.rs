//! Forward-mode automatic differentiation with a fixed set of tangent lanes.
//!
//! The camera has exactly 8 parameters, so the renderer propagates all
//! partial derivatives at once through [`Dual8`]: one primal value plus an
//! 8-lane tangent vector. The soft rasterizer is written once against the
//! [`Scalar`] trait and instantiated at `f64` for plain renders and at
//! `Dual8` for renders with camera gradients.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Numeric scalar the rasterizer and projection are generic over.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Lifts a constant (zero tangent).
    fn c(x: f64) -> Self;
    /// Primal value.
    fn val(self) -> f64;
    /// Multiplies by a constant.
    fn scale(self, k: f64) -> Self;
    /// Adds a constant.
    fn shift(self, k: f64) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    /// Reciprocal, kept separate because `Dual8` implements it cheaper than
    /// a full division.
    fn recip(self) -> Self;
}

impl Scalar for f64 {
    #[inline(always)]
    fn c(x: f64) -> Self {
        x
    }
    #[inline(always)]
    fn val(self) -> f64 {
        self
    }
    #[inline(always)]
    fn scale(self, k: f64) -> Self {
        self * k
    }
    #[inline(always)]
    fn shift(self, k: f64) -> Self {
        self + k
    }
    #[inline(always)]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline(always)]
    fn exp(self) -> Self {
        fast_exp(self)
    }
    #[inline(always)]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline(always)]
    fn recip(self) -> Self {
        1.0 / self
    }
}

/// Inlinable exponential: range reduction to `2^k * e^z` with `|z| <= ln2/2`
/// and a degree-9 Taylor polynomial. Relative error stays below 3e-10, far
/// inside the tolerances of every consumer; the rasterizer calls this per
/// band pixel, where the libm call is the dominant cost.
#[inline(always)]
pub fn fast_exp(x: f64) -> f64 {
    if x < -700.0 {
        return 0.0;
    }
    if x > 700.0 {
        return f64::INFINITY;
    }
    let y = x * std::f64::consts::LOG2_E;
    let k = y.round();
    let z = (y - k) * std::f64::consts::LN_2;
    // exp(z) via Horner, coefficients 1/n!.
    let p = 1.0
        + z * (1.0
            + z * (0.5
                + z * (1.0 / 6.0
                    + z * (1.0 / 24.0
                        + z * (1.0 / 120.0
                            + z * (1.0 / 720.0
                                + z * (1.0 / 5040.0
                                    + z * (1.0 / 40320.0 + z * (1.0 / 362880.0)))))))));
    let scale = f64::from_bits(((k as i64 + 1023) << 52) as u64);
    p * scale
}

/// Number of tangent lanes (one per camera parameter).
pub const LANES: usize = 8;

/// Dual number with 8 simultaneous tangent lanes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual8 {
    pub v: f64,
    pub d: [f64; LANES],
}

impl Dual8 {
    pub const ZERO: Dual8 = Dual8 { v: 0.0, d: [0.0; LANES] };

    /// A variable seeded on tangent lane `lane`.
    pub fn var(v: f64, lane: usize) -> Self {
        let mut d = [0.0; LANES];
        d[lane] = 1.0;
        Dual8 { v, d }
    }
}

impl Add for Dual8 {
    type Output = Dual8;
    #[inline(always)]
    fn add(self, o: Dual8) -> Dual8 {
        let mut d = [0.0; LANES];
        for i in 0..LANES {
            d[i] = self.d[i] + o.d[i];
        }
        Dual8 { v: self.v + o.v, d }
    }
}

impl Sub for Dual8 {
    type Output = Dual8;
    #[inline(always)]
    fn sub(self, o: Dual8) -> Dual8 {
        let mut d = [0.0; LANES];
        for i in 0..LANES {
            d[i] = self.d[i] - o.d[i];
        }
        Dual8 { v: self.v - o.v, d }
    }
}

impl Mul for Dual8 {
    type Output = Dual8;
    #[inline(always)]
    fn mul(self, o: Dual8) -> Dual8 {
        let mut d = [0.0; LANES];
        for i in 0..LANES {
            d[i] = self.d[i] * o.v + self.v * o.d[i];
        }
        Dual8 { v: self.v * o.v, d }
    }
}

impl Div for Dual8 {
    type Output = Dual8;
    #[inline(always)]
    fn div(self, o: Dual8) -> Dual8 {
        let inv = 1.0 / o.v;
        let v = self.v * inv;
        let mut d = [0.0; LANES];
        for i in 0..LANES {
            d[i] = (self.d[i] - v * o.d[i]) * inv;
        }
        Dual8 { v, d }
    }
}

impl Neg for Dual8 {
    type Output = Dual8;
    #[inline(always)]
    fn neg(self) -> Dual8 {
        let mut d = [0.0; LANES];
        for i in 0..LANES {
            d[i] = -self.d[i];
        }
        Dual8 { v: -self.v, d }
    }
}

impl Scalar for Dual8 {
    #[inline(always)]
    fn c(x: f64) -> Self {
        Dual8 { v: x, d: [0.0; LANES] }
    }

    #[inline(always)]
    fn val(self) -> f64 {
        self.v
    }

    #[inline(always)]
    fn scale(self, k: f64) -> Self {
        let mut d = [0.0; LANES];
        for i in 0..LANES {
            d[i] = self.d[i] * k;
        }
        Dual8 { v: self.v * k, d }
    }

    #[inline(always)]
    fn shift(self, k: f64) -> Self {
        Dual8 { v: self.v + k, d: self.d }
    }

    #[inline(always)]
    fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        let k = 0.5 / r;
        let mut d = [0.0; LANES];
        for i in 0..LANES {
            d[i] = self.d[i] * k;
        }
        Dual8 { v: r, d }
    }

    #[inline(always)]
    fn exp(self) -> Self {
        let e = fast_exp(self.v);
        let mut d = [0.0; LANES];
        for i in 0..LANES {
            d[i] = self.d[i] * e;
        }
        Dual8 { v: e, d }
    }

    #[inline(always)]
    fn ln(self) -> Self {
        let inv = 1.0 / self.v;
        let mut d = [0.0; LANES];
        for i in 0..LANES {
            d[i] = self.d[i] * inv;
        }
        Dual8 { v: self.v.ln(), d }
    }

    #[inline(always)]
    fn recip(self) -> Self {
        let inv = 1.0 / self.v;
        let k = -inv * inv;
        let mut d = [0.0; LANES];
        for i in 0..LANES {
            d[i] = self.d[i] * k;
        }
        Dual8 { v: inv, d }
    }
}

/// Logistic sigmoid, numerically stable on both tails.
#[inline(always)]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x.val() >= 0.0 {
        // 1 / (1 + e^-x)
        (T::c(1.0) + (-x).exp()).recip()
    } else {
        // e^x / (1 + e^x)
        let e = x.exp();
        e * (e.shift(1.0)).recip()
    }
}
