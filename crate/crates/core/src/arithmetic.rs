//! Continued fractions of the frequency, convergent denominators and
//! Diophantine margins.
//!
//! Expansion runs the Gauss map `x ↦ {1/x}` on exact rationals seeded from the
//! input, so the only error source is the uncertainty of the input itself.
//! That uncertainty bounds the usable depth: once `q_k² · ε` is no longer
//! small the next quotient is not determined by the input.

use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::dd::DoubleDouble;
use crate::{Error, Result};

/// Partial quotients above this are treated as evidence of a rational input.
pub const BLOWUP_QUOTIENT: u64 = 1_000_000_000_000;

/// Largest denominator kept, so that every `q_k` is exact as an `f64`.
const MAX_DENOMINATOR: u64 = 1 << 53;

/// A rotation number together with a truncated continued-fraction expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct Frequency {
    value: DoubleDouble,
    partial_quotients: Vec<u64>,
    denominators: Vec<u64>,
    numerators: Vec<u64>,
}

impl Frequency {
    /// The golden mean `(√5 − 1)/2`, built from its all-ones expansion.
    pub fn golden() -> Self {
        Self::from_quotients(&[1; 70]).expect("Fibonacci denominators fit")
    }

    /// `√2 − 1`, built from its all-twos expansion.
    pub fn silver() -> Self {
        Self::from_quotients(&[2; 40]).expect("Pell denominators fit")
    }

    /// Frequency `[0; a_1, a_2, ...]` truncated at the given quotients. The
    /// value is the last convergent, accurate to `1/q_K²`.
    pub fn from_quotients(quotients: &[u64]) -> Result<Self> {
        if quotients.is_empty() {
            return Err(Error::InvalidFrequency("empty quotient list".into()));
        }
        if quotients.contains(&0) {
            return Err(Error::InvalidFrequency("partial quotients must be positive".into()));
        }
        if quotients.len() == 1 && quotients[0] == 1 {
            return Err(Error::InvalidFrequency("[0; 1] is not in (0, 1)".into()));
        }
        let mut f = Self {
            value: DoubleDouble::ZERO,
            partial_quotients: Vec::with_capacity(quotients.len()),
            denominators: Vec::with_capacity(quotients.len()),
            numerators: Vec::with_capacity(quotients.len()),
        };
        for &a in quotients {
            if !f.push_quotient(a) {
                return Err(Error::DepthExceeded { requested: quotients.len(), supported: f.depth() });
            }
        }
        let (p, q) = (f.p(f.depth()), f.q(f.depth()));
        f.value = ratio_dd(p, q);
        Ok(f)
    }

    /// Parses a config value: `"golden"`, `"silver"`, a quotient list such as
    /// `"[1, 2, 2, 1]"`, or a decimal string expanded to its supported depth.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        match t {
            "golden" => return Ok(Self::golden()),
            "silver" => return Ok(Self::silver()),
            _ => {}
        }
        if let Some(body) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let qs = body
                .split(',')
                .map(|w| w.trim().parse::<u64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidFrequency(format!("{t}: {e}")))?;
            return Self::from_quotients(&qs);
        }
        Self::from_decimal(t, None)
    }

    /// Expands an exact decimal string. Its uncertainty is half a unit in the
    /// last printed digit.
    pub fn from_decimal(s: &str, depth: Option<usize>) -> Result<Self> {
        let (exact, eps) = parse_decimal(s)?;
        expand(exact, eps, depth)
    }

    pub fn value(&self) -> f64 {
        self.value.hi
    }

    /// The value as a double-double, used for phase rotation.
    pub fn value_dd(&self) -> DoubleDouble {
        self.value
    }

    pub fn partial_quotients(&self) -> &[u64] {
        &self.partial_quotients
    }

    /// `q_1, q_2, ...` (the implicit `q_0 = 1` is not stored).
    pub fn denominators(&self) -> &[u64] {
        &self.denominators
    }

    pub fn numerators(&self) -> &[u64] {
        &self.numerators
    }

    pub fn depth(&self) -> usize {
        self.partial_quotients.len()
    }

    /// `q_k` with `q_0 = 1`.
    pub fn q(&self, k: usize) -> u64 {
        if k == 0 {
            1
        } else {
            self.denominators[k - 1]
        }
    }

    /// `p_k` with `p_0 = 0`.
    pub fn p(&self, k: usize) -> u64 {
        if k == 0 {
            0
        } else {
            self.numerators[k - 1]
        }
    }

    /// `‖qα‖`, the distance from `qα` to the nearest integer.
    pub fn dist_to_int(&self, q: u64) -> f64 {
        self.value.mul_int(q as i64).centered().to_f64().abs()
    }

    fn push_quotient(&mut self, a: u64) -> bool {
        let k = self.depth();
        let (q1, q0) = (self.q(k) as u128, if k == 0 { 0 } else { self.q(k - 1) as u128 });
        let (p1, p0) = (self.p(k) as u128, if k == 0 { 1 } else { self.p(k - 1) as u128 });
        let q = a as u128 * q1 + q0;
        let p = a as u128 * p1 + p0;
        if q > MAX_DENOMINATOR as u128 {
            return false;
        }
        self.partial_quotients.push(a);
        self.denominators.push(q as u64);
        self.numerators.push(p as u64);
        true
    }
}

impl FromStr for Frequency {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Expands `value` to `depth` partial quotients.
///
/// The input is taken as exact, with uncertainty half an ulp. Fails with
/// [`Error::RationalDetected`] when the expansion terminates or a quotient
/// exceeds [`BLOWUP_QUOTIENT`], and with [`Error::DepthExceeded`] when
/// `depth` is beyond what that uncertainty supports.
///
/// # Example
///
/// ```
/// use cocycle_lab::arithmetic::continued_fraction_expand;
/// let f = continued_fraction_expand((5f64.sqrt() - 1.0) / 2.0, 8).unwrap();
/// assert_eq!(f.denominators(), &[1, 2, 3, 5, 8, 13, 21, 34]);
/// ```
pub fn continued_fraction_expand(value: f64, depth: usize) -> Result<Frequency> {
    if !(value > 0.0 && value < 1.0) {
        return Err(Error::InvalidFrequency(format!("{value} is not in (0, 1)")));
    }
    let exact = BigRational::from_float(value).expect("finite");
    let ulp = f64::from_bits(value.to_bits() + 1) - value;
    expand(exact, ulp / 2.0, Some(depth))
}

fn expand(exact: BigRational, eps: f64, depth: Option<usize>) -> Result<Frequency> {
    if exact <= BigRational::zero() || exact >= BigRational::one() {
        return Err(Error::InvalidFrequency("value must lie in (0, 1)".into()));
    }
    let mut f = Frequency { value: rational_dd(&exact), partial_quotients: Vec::new(), denominators: Vec::new(), numerators: Vec::new() };
    let limit = depth.unwrap_or(usize::MAX);
    let mut x = exact;
    while f.depth() < limit {
        let k = f.depth() + 1;
        if x.is_zero() {
            return Err(Error::RationalDetected { depth: k, quotient: "terminated".into() });
        }
        let inv = x.recip();
        let a = inv.floor();
        if a > BigRational::from_integer(BigInt::from(BLOWUP_QUOTIENT)) {
            return Err(Error::RationalDetected { depth: k, quotient: a.to_integer().to_string() });
        }
        let a_int = a.to_integer().to_u64().expect("bounded by BLOWUP_QUOTIENT");
        let mut trial = f.clone();
        let fits = trial.push_quotient(a_int) && {
            let q = trial.q(k) as f64;
            64.0 * q * q * eps <= 1.0
        };
        if !fits {
            if depth.is_none() {
                break;
            }
            return Err(Error::DepthExceeded { requested: limit, supported: f.depth() });
        }
        f = trial;
        x = inv - a;
    }
    if f.depth() == 0 {
        return Err(Error::DepthExceeded { requested: 1, supported: 0 });
    }
    Ok(f)
}

fn parse_decimal(s: &str) -> Result<(BigRational, f64)> {
    let bad = || Error::InvalidFrequency(format!("cannot parse {s:?}"));
    let (int_part, frac_part) = s.split_once('.').ok_or_else(bad)?;
    if !int_part.chars().all(|c| c.is_ascii_digit()) || frac_part.is_empty() || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let num = BigInt::from_str(&digits).map_err(|_| bad())?;
    let den = BigInt::from(10u32).pow(frac_part.len() as u32);
    let eps = 0.5 * 10f64.powi(-(frac_part.len() as i32));
    Ok((BigRational::new(num, den), eps))
}

fn ratio_dd(p: u64, q: u64) -> DoubleDouble {
    let (pf, qf) = (p as f64, q as f64);
    let hi = pf / qf;
    let r = (-hi).mul_add(qf, pf);
    DoubleDouble::new(hi, r / qf)
}

fn rational_dd(x: &BigRational) -> DoubleDouble {
    let hi = ratio_to_f64(x);
    let rest = x - BigRational::from_float(hi).expect("finite");
    DoubleDouble::new(hi, ratio_to_f64(&rest))
}

fn ratio_to_f64(x: &BigRational) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    // Scale so the integer quotient carries 64 significant bits, then let the
    // final multiplication by a power of two round once more.
    let (n, d) = (x.numer().abs(), x.denom().clone());
    let shift = 64 - (n.bits() as i64 - d.bits() as i64);
    let scaled = if shift >= 0 { (n << shift as usize).div_floor(&d) } else { n.div_floor(&(d << (-shift) as usize)) };
    let v = scaled.to_f64().expect("64-bit quotient") * 2f64.powi(-shift as i32);
    if x.is_negative() {
        -v
    } else {
        v
    }
}

/// Empirical Diophantine constant `min_{1≤q≤q_max} ‖qα‖ · q^{τ−1}`.
///
/// For `τ ≥ 1` the minimum is attained at a convergent denominator (best
/// approximation property), so only `q_0 = 1` and the stored `q_k` are
/// visited. Beyond the stored expansion the remaining range is scanned.
pub fn diophantine_margin(freq: &Frequency, tau: f64, q_max: u64) -> f64 {
    let weight = |q: u64| freq.dist_to_int(q) * (q as f64).powf(tau - 1.0);
    let mut best = weight(1);
    for &q in freq.denominators() {
        if q > q_max {
            return best;
        }
        best = best.min(weight(q));
    }
    let last = *freq.denominators().last().unwrap_or(&1);
    for q in last + 1..=q_max {
        best = best.min(weight(q));
    }
    best
}

/// The induction scales `q_N, ..., q_{N+count−1}`.
pub fn resonance_scales(freq: &Frequency, n: usize, count: usize) -> Result<Vec<u64>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if n == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    let last = n + count - 1;
    if last > freq.depth() {
        return Err(Error::DepthExceeded { requested: last, supported: freq.depth() });
    }
    Ok((n..=last).map(|k| freq.q(k)).collect())
}
