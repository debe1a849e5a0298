//! SL(2,R) primitives.
//!
//! A unimodular `A` with `‖A‖ > 1` factors as
//! `A = R_u · diag(‖A‖, ‖A‖⁻¹) · R_{π/2−s}`, where `s` is the most contracted
//! input direction and `u` the most expanded output direction. Both angles are
//! projective, living in `[0, π)`, and are read off the Gram matrices in closed
//! form.
//!
//! Long products are kept in an [`OrbitProduct`]: a frame rescaled by exact
//! powers of two plus the accumulated log scale.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};
use std::ops::Mul;

use crate::{Error, Result};

/// Default rotation threshold: matrices with `‖A‖ < 1 + EPS_ROT` have no
/// well-defined polar angles.
pub const EPS_ROT: f64 = 1e-9;

/// Frames are rescaled once their Frobenius norm exceeds this.
pub const RENORM_THRESHOLD: f64 = 1125899906842624.0; // 2^50

/// A real 2×2 matrix `[[a, b], [c, d]]`, row-major.
///
/// Step matrices and accumulated products are unimodular
/// (`|det − 1| ≤ 1e-10·(1 + ‖·‖_F²)`); renormalized frames are not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    /// Checked constructor enforcing the determinant invariant.
    pub fn unimodular(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let m = Self::new(a, b, c, d);
        if m.is_unimodular() {
            Ok(m)
        } else {
            Err(Error::NotUnimodular { det: m.det() })
        }
    }

    pub fn diag(l: f64) -> Self {
        Self::new(l, 0.0, 0.0, 1.0 / l)
    }

    /// Counter-clockwise rotation by `theta` radians.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, -s, s, c)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d
    }

    pub fn is_unimodular(&self) -> bool {
        (self.det() - 1.0).abs() <= 1e-10 * (1.0 + self.frobenius_sq())
    }

    /// Inverse assuming `det = 1`.
    pub fn inverse_unimodular(&self) -> Self {
        Self::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.a, self.c, self.b, self.d)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.a * k, self.b * k, self.c * k, self.d * k)
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    /// Largest singular value of an arbitrary matrix.
    pub fn op_norm(&self) -> f64 {
        let f = self.frobenius_sq();
        let det = self.det().abs();
        let disc = ((f - 2.0 * det) * (f + 2.0 * det)).max(0.0);
        ((f + disc.sqrt()) / 2.0).sqrt()
    }

    /// Direction of an input vector of minimal stretch.
    pub fn contracted_direction(&self) -> ProjectiveAngle {
        let (p, q, r) = (self.a * self.a + self.c * self.c, self.b * self.b + self.d * self.d, self.a * self.b + self.c * self.d);
        ProjectiveAngle::new(0.5 * (2.0 * r).atan2(p - q) + FRAC_PI_2)
    }

    /// Direction of the image of maximal stretch.
    pub fn expanded_direction(&self) -> ProjectiveAngle {
        let (p, q, r) = (self.a * self.a + self.b * self.b, self.c * self.c + self.d * self.d, self.a * self.c + self.b * self.d);
        ProjectiveAngle::new(0.5 * (2.0 * r).atan2(p - q))
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    #[inline]
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a * o.a + self.b * o.c, self.a * o.b + self.b * o.d, self.c * o.a + self.d * o.c, self.c * o.b + self.d * o.d)
    }
}

/// A point of RP¹, stored as an angle in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ProjectiveAngle(f64);

impl ProjectiveAngle {
    pub fn new(theta: f64) -> Self {
        let mut t = theta.rem_euclid(PI);
        if t >= PI {
            t = 0.0;
        }
        Self(t)
    }

    pub fn theta(self) -> f64 {
        self.0
    }

    /// Signed difference `self − other` reduced to `(−π/2, π/2]`.
    pub fn signed_diff(self, other: Self) -> f64 {
        wrap_half_pi(self.0 - other.0)
    }

    /// Projective distance `min(|θ₁ − θ₂|, π − |θ₁ − θ₂|)`.
    pub fn dist(self, other: Self) -> f64 {
        let d = (self.0 - other.0).abs();
        d.min(PI - d)
    }
}

/// Reduces an angle to the representative in `(−π/2, π/2]`.
pub fn wrap_half_pi(x: f64) -> f64 {
    let mut y = x.rem_euclid(PI);
    if y > FRAC_PI_2 {
        y -= PI;
    }
    y
}

/// Polar data of a unimodular matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarParts {
    pub log_norm: f64,
    pub s: ProjectiveAngle,
    pub u: ProjectiveAngle,
}

impl PolarParts {
    /// `R_u · diag(σ, 1/σ) · R_{π/2−s}` for the stored lifts of `u` and `s`.
    pub fn recompose(&self) -> Mat2 {
        let sigma = self.log_norm.exp();
        Mat2::rotation(self.u.theta()) * Mat2::new(sigma, 0.0, 0.0, 1.0 / sigma) * Mat2::rotation(FRAC_PI_2 - self.s.theta())
    }
}

/// `‖m‖` for a unimodular matrix, from `σ² + σ⁻² = ‖m‖_F²`.
pub fn norm_sl2(m: &Mat2) -> Result<f64> {
    let f = m.frobenius_sq();
    if f < 2.0 - 1e-9 {
        return Err(Error::DegenerateNorm { frobenius_sq: f });
    }
    let disc = ((f - 2.0) * (f + 2.0)).max(0.0);
    Ok(((f + disc.sqrt()) / 2.0).sqrt())
}

/// Polar decomposition with the default rotation threshold.
pub fn polar_decompose(m: &Mat2) -> Result<PolarParts> {
    polar_decompose_with(m, EPS_ROT)
}

pub fn polar_decompose_with(m: &Mat2, eps_rot: f64) -> Result<PolarParts> {
    let norm = norm_sl2(m)?;
    if norm - 1.0 < eps_rot {
        return Err(Error::NearRotation { norm });
    }
    let (s, u) = (m.contracted_direction(), m.expanded_direction());
    Ok(PolarParts { log_norm: norm.ln(), s, u })
}

/// Running product `A_k ··· A_1` stored as `2^e · frame`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitProduct {
    log_scale: f64,
    frame: Mat2,
    steps: u64,
}

impl Default for OrbitProduct {
    fn default() -> Self {
        Self::identity()
    }
}

impl OrbitProduct {
    pub fn identity() -> Self {
        Self { log_scale: 0.0, frame: Mat2::IDENTITY, steps: 0 }
    }

    /// Left-multiplies the product by `m`.
    #[inline]
    pub fn extend(&mut self, m: &Mat2) {
        self.frame = *m * self.frame;
        self.steps += 1;
        let f = self.frame.frobenius_sq();
        if f > RENORM_THRESHOLD * RENORM_THRESHOLD {
            // Exact rescaling by a power of two near the Frobenius norm.
            let e = (f.log2() * 0.5).floor() as i32;
            self.frame = self.frame.scale(2f64.powi(-e));
            self.log_scale += e as f64 * LN_2;
        }
    }

    /// Log of the accumulated rescaling factor.
    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn frame(&self) -> &Mat2 {
        &self.frame
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// `log ‖A_k ··· A_1‖`.
    pub fn log_norm(&self) -> f64 {
        self.log_scale + self.frame.op_norm().ln()
    }

    /// The represented product, if it is within `f64` range.
    pub fn product(&self) -> Mat2 {
        self.frame.scale(self.log_scale.exp())
    }

    /// `|det(product) − 1|` relative to `1 + ‖product‖_F²`, evaluated on the
    /// frame so it stays meaningful after rescaling.
    pub fn det_defect(&self) -> f64 {
        let k = (-2.0 * self.log_scale).exp();
        (self.frame.det() - k).abs() / (k + self.frame.frobenius_sq())
    }

    /// Most contracted direction of the product (scale-invariant).
    pub fn contracted_direction(&self) -> ProjectiveAngle {
        self.frame.contracted_direction()
    }

    /// Most expanded image direction of the product.
    pub fn expanded_direction(&self) -> ProjectiveAngle {
        self.frame.expanded_direction()
    }
}

/// Functional form of [`OrbitProduct::extend`].
pub fn orbit_product_extend(mut acc: OrbitProduct, m: &Mat2) -> OrbitProduct {
    acc.extend(m);
    acc
}

/// `(s_n, u_n)`: `s` of the forward product and `s` of the backward product.
pub fn orbit_directions(forward: &OrbitProduct, backward: &OrbitProduct) -> Result<(ProjectiveAngle, ProjectiveAngle)> {
    let floor = EPS_ROT.ln_1p();
    for p in [forward, backward] {
        let ln = p.log_norm();
        if ln < floor {
            return Err(Error::NearRotation { norm: ln.exp() });
        }
    }
    Ok((forward.contracted_direction(), backward.contracted_direction()))
}
