//! Extended-precision product oracle shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::LN_2;

use cocycle_lab::linalg2::Mat2;
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

/// Mantissa bits kept through the product.
pub const BITS: u64 = 256;

/// `x = m · 2^e` exactly.
fn split(x: f64) -> (BigInt, i64) {
    assert!(x.is_finite());
    if x == 0.0 {
        return (BigInt::zero(), 0);
    }
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = (bits & ((1u64 << 52) - 1)) as i64;
    let (m, e) = if exp == 0 { (frac, -1074) } else { (frac | (1 << 52), exp - 1075) };
    let m = BigInt::from(m);
    (if bits >> 63 == 1 { -m } else { m }, e)
}

fn ln_big(x: &BigInt) -> f64 {
    let b = x.bits();
    if b <= 64 {
        x.to_f64().unwrap().ln()
    } else {
        (x >> (b - 64)).to_f64().unwrap().ln() + (b - 64) as f64 * LN_2
    }
}

/// `num / den` for positive integers of any size.
fn ratio(num: &BigInt, den: &BigInt) -> f64 {
    if num.is_zero() {
        0.0
    } else {
        (ln_big(num) - ln_big(den)).exp()
    }
}

/// A product `2^e · M` with integer entries `[a, b, c, d]` truncated to [`BITS`] bits.
#[derive(Debug, Clone)]
pub struct BigProduct {
    m: [BigInt; 4],
    e: i64,
}

impl Default for BigProduct {
    fn default() -> Self {
        Self::identity()
    }
}

impl BigProduct {
    pub fn identity() -> Self {
        Self { m: [1.into(), 0.into(), 0.into(), 1.into()], e: 0 }
    }

    fn exact(a: &Mat2) -> ([BigInt; 4], i64) {
        let parts = [split(a.a), split(a.b), split(a.c), split(a.d)];
        let e0 = parts.iter().filter(|p| !p.0.is_zero()).map(|p| p.1).min().unwrap_or(0);
        let m = parts.map(|(m, e)| if m.is_zero() { m } else { m << ((e - e0) as usize) });
        (m, e0)
    }

    /// Left-multiplies by `a`, whose entries are taken exactly.
    pub fn left_mul(&mut self, a: &Mat2) {
        let ([a0, a1, a2, a3], ae) = Self::exact(a);
        let [m0, m1, m2, m3] = &self.m;
        let mut next = [&a0 * m0 + &a1 * m2, &a0 * m1 + &a1 * m3, &a2 * m0 + &a3 * m2, &a2 * m1 + &a3 * m3];
        let mut e = ae + self.e;
        let top = next.iter().map(|x| x.bits()).max().unwrap();
        if top > BITS {
            let shift = top - BITS;
            for x in next.iter_mut() {
                *x = &*x >> shift;
            }
            e += shift as i64;
        }
        self.m = next;
        self.e = e;
    }

    /// `log‖·‖` from `‖·‖² = (F + √(F² − 4D²))/2`, with `F² − 4D²` formed exactly.
    pub fn log_norm(&self) -> f64 {
        let [m0, m1, m2, m3] = &self.m;
        let f: BigInt = m0 * m0 + m1 * m1 + m2 * m2 + m3 * m3;
        let d: BigInt = m0 * m3 - m1 * m2;
        let two_d = &d.abs() * 2;
        let disc = (&f - &two_d) * (&f + &two_d);
        let s = ratio(&disc, &(&f * &f));
        0.5 * (ln_big(&f) + ((1.0 + s.sqrt()) / 2.0).ln()) + self.e as f64 * LN_2
    }
}

/// `log‖A_k ··· A_1‖` of the matrices in order of application.
pub fn oracle_log_norm<'a>(factors: impl IntoIterator<Item = &'a Mat2>) -> f64 {
    let mut p = BigProduct::identity();
    for m in factors {
        p.left_mul(m);
    }
    p.log_norm()
}
