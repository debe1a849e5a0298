//! Double-double arithmetic for phases on the circle.
//!
//! A [`DoubleDouble`] carries roughly 106 bits. The rotation `x ↦ x + α mod 1`
//! is iterated with compensated additions so that phase error stays near
//! `1e-30` per step instead of `1e-16`.

use std::ops::{Add, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };

    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Self { hi, lo }
    }

    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    /// Product with an integer that is exactly representable as `f64`.
    pub fn mul_int(self, k: i64) -> Self {
        let kf = k as f64;
        let p = self.hi * kf;
        let e = self.hi.mul_add(kf, -p);
        let (hi, lo) = quick_two_sum(p, e + self.lo * kf);
        Self { hi, lo }
    }

    /// Representative in `[0, 1)`.
    pub fn fract(self) -> Self {
        let f = self.hi.floor();
        Self::new(self.hi - f, self.lo).wrap_unit()
    }

    #[inline]
    fn wrap_unit(self) -> Self {
        const ONE: DoubleDouble = DoubleDouble { hi: 1.0, lo: 0.0 };
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            self + ONE
        } else if self.hi >= 1.0 && !(self.hi == 1.0 && self.lo < 0.0) {
            self - ONE
        } else {
            self
        }
    }

    /// Representative in `[-1/2, 1/2)`.
    pub fn centered(self) -> Self {
        let r = self.fract();
        if r.hi >= 0.5 {
            r - Self::from_f64(1.0)
        } else {
            r
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Self { hi, lo }
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

/// A point on `R/Z` advanced by a fixed rotation with compensated addition.
#[derive(Debug, Clone, Copy)]
pub struct Phase {
    x: DoubleDouble,
}

impl Phase {
    pub fn new(x: f64) -> Self {
        Self { x: DoubleDouble::from_f64(x).fract() }
    }

    pub fn from_dd(x: DoubleDouble) -> Self {
        Self { x: x.fract() }
    }

    /// Current representative in `[0, 1)`.
    #[inline]
    pub fn value(&self) -> f64 {
        let v = self.x.hi;
        if v >= 1.0 {
            0.0
        } else {
            v
        }
    }

    pub fn dd(&self) -> DoubleDouble {
        self.x
    }

    #[inline]
    pub fn advance(&mut self, step: DoubleDouble) {
        self.x = (self.x + step).wrap_unit();
    }
}

/// Signed distance of `x` to the nearest integer, as a representative in `[-1/2, 1/2)`.
pub fn circle_diff(a: f64, b: f64) -> f64 {
    let d = a - b;
    d - d.round()
}
