//! Potentials, the two step maps and orbit iteration.
//!
//! The Schrödinger form is `A(x) = [[E − λv(x), −1], [1, 0]]`. The rescaled
//! form is `diag(g, 1/g) · M(x)` with `M` the rotation taking `cot φ = t − v(x)`
//! and `t = E/λ`; its gain `g = λ(x, t)` is the constant `λ` unless the
//! tilted gain `λ·((t − v)² + 1)^{1/2}` or a custom one is chosen.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::arithmetic::Frequency;
use crate::dd::{DoubleDouble, Phase};
use crate::linalg2::{Mat2, OrbitProduct};
use crate::{Error, Result};

/// A cocycle over the rotation `x ↦ x + α`.
pub trait Cocycle: Sync {
    fn alpha(&self) -> DoubleDouble;

    fn step(&self, x: f64) -> Mat2;

    fn step_inverse(&self, x: f64) -> Mat2 {
        self.step(x).inverse_unimodular()
    }

    /// The coupling `λ` against which growth is measured.
    fn coupling(&self) -> f64;

    /// Closed-form level-1 angle function, when the cocycle has one.
    fn first_angle(&self, _x: f64) -> Option<f64> {
        None
    }

    /// The specification behind the cocycle, for estimators that need the potential.
    fn as_spec(&self) -> Option<&CocycleSpec> {
        None
    }
}

/// A one-parameter family of cocycles indexed by the energy `E`.
pub trait EnergyFamily: Sync {
    type Member: Cocycle + Send + Sync;
    fn at(&self, energy: f64) -> Self::Member;
}

/// Periodic cubic spline through uniformly spaced samples on `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSpline {
    values: Vec<f64>,
    second: Vec<f64>,
}

impl PeriodicSpline {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let m = values.len();
        if m < 4 {
            return Err(Error::InvalidArgument("a table needs at least 4 samples".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("table values must be finite".into()));
        }
        let h = 1.0 / m as f64;
        let rhs: Vec<f64> = (0..m).map(|i| 6.0 / (h * h) * (values[(i + 1) % m] - 2.0 * values[i] + values[(i + m - 1) % m])).collect();
        // M_{i-1} + 4 M_i + M_{i+1} = rhs_i is strictly diagonally dominant.
        let mut second = vec![0.0; m];
        for _ in 0..200 {
            let mut delta: f64 = 0.0;
            for i in 0..m {
                let new = (rhs[i] - second[(i + m - 1) % m] - second[(i + 1) % m]) / 4.0;
                delta = delta.max((new - second[i]).abs());
                second[i] = new;
            }
            let scale = second.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
            if delta <= 1e-15 * scale {
                break;
            }
        }
        Ok(Self { values, second })
    }

    pub fn samples(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, x: f64) -> f64 {
        let m = self.values.len();
        let h = 1.0 / m as f64;
        let y = x.rem_euclid(1.0) * m as f64;
        let i = (y.floor() as usize).min(m - 1);
        let t = y - i as f64;
        let j = (i + 1) % m;
        let u = 1.0 - t;
        u * self.values[i] + t * self.values[j] + h * h / 6.0 * ((u * u * u - u) * self.second[i] + (t * t * t - t) * self.second[j])
    }
}

/// A periodic potential `v` on `R/Z`.
#[derive(Clone)]
pub enum Potential {
    /// `a·cos(2πx) + b·cos⁴(2πx)`.
    CosFamily {
        a: f64,
        b: f64,
    },
    Table(PeriodicSpline),
    Custom {
        name: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::CosFamily { a, b } => write!(f, "CosFamily {{ a: {a}, b: {b} }}"),
            Potential::Table(t) => write!(f, "Table({} samples)", t.samples().len()),
            Potential::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl Potential {
    pub fn cos_family(a: f64, b: f64) -> Self {
        Potential::CosFamily { a, b }
    }

    pub fn custom(name: &str, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Potential::Custom { name: name.to_string(), f: Arc::new(f) }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Potential::CosFamily { a, b } => {
                let c = (TAU * x).cos();
                let c2 = c * c;
                a * c + b * c2 * c2
            }
            Potential::Table(t) => t.value(x),
            Potential::Custom { f, .. } => f(x),
        }
    }

    /// `v(x + iε)` for the analytic family; `None` for tabulated or custom potentials.
    pub fn complex_value(&self, x: f64, eps: f64) -> Option<Complex64> {
        match self {
            Potential::CosFamily { a, b } => {
                let c = (Complex64::new(x, eps) * TAU).cos();
                let c2 = c * c;
                Some(*a * c + *b * c2 * c2)
            }
            _ => None,
        }
    }

    /// Smoothness class the potential is meant to represent.
    pub fn smoothness_note(&self) -> &'static str {
        match self {
            Potential::CosFamily { .. } => "analytic",
            Potential::Table(_) => "C^2 (periodic cubic spline)",
            Potential::Custom { .. } => "user supplied",
        }
    }

    /// `(inf v, sup v)` from a dense sample.
    pub fn range(&self) -> (f64, f64) {
        let n = 1 << 16;
        (0..n).map(|i| self.value(i as f64 / n as f64)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}

/// Outcome of [`validate_cos_type`].
#[derive(Debug, Clone, PartialEq)]
pub struct CosTypeReport {
    pub critical_points: Vec<f64>,
    pub second_derivatives: Vec<f64>,
}

/// Checks that `v` has exactly two non-degenerate critical points.
///
/// Sign changes of a centred finite-difference `v′` on the grid are refined by
/// bisection; `v″` is a second difference at each root.
pub fn validate_cos_type(p: &Potential, grid_size: usize, second_deriv_floor: f64) -> Result<CosTypeReport> {
    if grid_size < 1024 {
        return Err(Error::InvalidArgument("grid_size must be at least 1024".into()));
    }
    let period_gap = (p.value(0.0) - p.value(1.0 - 1e-12)).abs();
    if period_gap > 1e-10 {
        return Err(Error::NotCosType { critical_points: 0, detail: format!("not periodic: jump {period_gap:e}") });
    }
    let hd = 1e-6;
    let dv = |x: f64| (p.value(x + hd) - p.value(x - hd)) / (2.0 * hd);
    let h = 1.0 / grid_size as f64;
    let positive: Vec<bool> = (0..grid_size).map(|g| dv(g as f64 * h) > 0.0).collect();
    let mut points = Vec::new();
    for g in 0..grid_size {
        let next = (g + 1) % grid_size;
        if positive[g] == positive[next] {
            continue;
        }
        let (mut lo, mut hi) = (g as f64 * h, (g + 1) as f64 * h);
        let lo_positive = positive[g];
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if (dv(mid) > 0.0) == lo_positive {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        points.push((0.5 * (lo + hi)).rem_euclid(1.0));
    }
    let h2 = 1e-4;
    let second: Vec<f64> = points.iter().map(|&x| (p.value(x + h2) - 2.0 * p.value(x) + p.value(x - h2)) / (h2 * h2)).collect();
    if points.len() != 2 {
        return Err(Error::NotCosType { critical_points: points.len(), detail: format!("critical points at {points:?}") });
    }
    if let Some(k) = second.iter().position(|s| s.abs() < second_deriv_floor) {
        return Err(Error::NotCosType {
            critical_points: 2,
            detail: format!("degenerate extremum at {} with v'' = {:e}", points[k], second[k]),
        });
    }
    Ok(CosTypeReport { critical_points: points, second_derivatives: second })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    /// `[[E − λv, −1], [1, 0]]`.
    Schrodinger,
    /// `diag(g, 1/g) · M(x, t)`.
    Rescaled,
}

/// The gain `λ(x, t)` of the rescaled form.
#[derive(Clone)]
pub enum Gain {
    /// `λ(x, t) = λ`.
    Constant,
    /// `λ(x, t) = λ·((t − v(x))² + 1)^{1/2}`.
    Tilted,
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Gain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gain::Constant => write!(f, "Constant"),
            Gain::Tilted => write!(f, "Tilted"),
            Gain::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Frequency, coupling, potential, energy and form of a Schrödinger cocycle.
#[derive(Debug, Clone)]
pub struct CocycleSpec {
    freq: Frequency,
    alpha: DoubleDouble,
    lambda: f64,
    potential: Potential,
    form: Form,
    energy_param: f64,
    gain: Gain,
}

impl CocycleSpec {
    /// Schrödinger form at energy `E`.
    pub fn schrodinger(freq: Frequency, lambda: f64, potential: Potential, energy: f64) -> Self {
        let alpha = freq.value_dd();
        Self { freq, alpha, lambda, potential, form: Form::Schrodinger, energy_param: energy, gain: Gain::Constant }
    }

    /// Rescaled form at energy `E`, stored as `t = E/λ`.
    pub fn rescaled(freq: Frequency, lambda: f64, potential: Potential, energy: f64, gain: Gain) -> Result<Self> {
        let alpha = freq.value_dd();
        let spec = Self { freq, alpha, lambda, potential, form: Form::Rescaled, energy_param: energy / lambda, gain };
        spec.check_gain()?;
        Ok(spec)
    }

    /// Almost Mathieu: `v = 2cos(2πx)` in Schrödinger form.
    pub fn almost_mathieu(freq: Frequency, lambda: f64, energy: f64) -> Self {
        Self::schrodinger(freq, lambda, Potential::cos_family(2.0, 0.0), energy)
    }

    fn check_gain(&self) -> Result<()> {
        if let Gain::Custom(_) = self.gain {
            for i in 0..1024 {
                let g = self.gain_at(i as f64 / 1024.0);
                if !(g >= self.lambda) {
                    return Err(Error::GainBoundViolated { gain: g, lambda: self.lambda });
                }
            }
        }
        Ok(())
    }

    pub fn frequency(&self) -> &Frequency {
        &self.freq
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn gain(&self) -> &Gain {
        &self.gain
    }

    /// `E` for the Schrödinger form, `t` for the rescaled form.
    pub fn energy_param(&self) -> f64 {
        self.energy_param
    }

    pub fn energy(&self) -> f64 {
        match self.form {
            Form::Schrodinger => self.energy_param,
            Form::Rescaled => self.energy_param * self.lambda,
        }
    }

    /// `t = E/λ`.
    pub fn t(&self) -> f64 {
        match self.form {
            Form::Schrodinger => self.energy_param / self.lambda,
            Form::Rescaled => self.energy_param,
        }
    }

    pub fn with_energy(&self, energy: f64) -> Self {
        let mut s = self.clone();
        s.energy_param = match self.form {
            Form::Schrodinger => energy,
            Form::Rescaled => energy / self.lambda,
        };
        s
    }

    /// The domain `J = [inf v − 2/λ, sup v + 2/λ]` of relevant `t`.
    pub fn t_domain(&self) -> (f64, f64) {
        let (lo, hi) = self.potential.range();
        (lo - 2.0 / self.lambda, hi + 2.0 / self.lambda)
    }

    fn gain_at(&self, x: f64) -> f64 {
        match &self.gain {
            Gain::Constant => self.lambda,
            Gain::Tilted => {
                let st = self.energy_param - self.potential.value(x);
                self.lambda * (st * st + 1.0).sqrt()
            }
            Gain::Custom(f) => f(x, self.energy_param),
        }
    }

    #[inline]
    fn rescaled_unchecked(&self, x: f64) -> Mat2 {
        let st = self.energy_param - self.potential.value(x);
        let n = (st * st + 1.0).sqrt();
        let g = match self.gain {
            Gain::Constant => self.lambda,
            _ => self.gain_at(x),
        };
        let (gn, ign) = (g / n, 1.0 / (g * n));
        Mat2::new(gn * st, -gn, ign, ign * st)
    }
}

/// `[[E − λv(x), −1], [1, 0]]`.
pub fn schrodinger_step(spec: &CocycleSpec, x: f64) -> Result<Mat2> {
    if spec.form != Form::Schrodinger {
        return Err(Error::WrongForm("schrodinger"));
    }
    Ok(Mat2::new(spec.energy_param - spec.lambda * spec.potential.value(x), -1.0, 1.0, 0.0))
}

/// `diag(λ(x,t), λ(x,t)⁻¹) · ((t−v)²+1)^{−1/2} · [[t−v, −1], [1, t−v]]`.
pub fn rescaled_step(spec: &CocycleSpec, x: f64) -> Result<Mat2> {
    if spec.form != Form::Rescaled {
        return Err(Error::WrongForm("rescaled"));
    }
    let g = spec.gain_at(x);
    if g < spec.lambda {
        return Err(Error::GainBoundViolated { gain: g, lambda: spec.lambda });
    }
    Ok(spec.rescaled_unchecked(x))
}

impl Cocycle for CocycleSpec {
    fn alpha(&self) -> DoubleDouble {
        self.alpha
    }

    #[inline]
    fn step(&self, x: f64) -> Mat2 {
        match self.form {
            Form::Schrodinger => Mat2::new(self.energy_param - self.lambda * self.potential.value(x), -1.0, 1.0, 0.0),
            Form::Rescaled => self.rescaled_unchecked(x),
        }
    }

    fn coupling(&self) -> f64 {
        self.lambda
    }

    fn first_angle(&self, x: f64) -> Option<f64> {
        Some((self.t() - self.potential.value(x)).atan())
    }

    fn as_spec(&self) -> Option<&CocycleSpec> {
        Some(self)
    }
}

impl EnergyFamily for CocycleSpec {
    type Member = CocycleSpec;
    fn at(&self, energy: f64) -> CocycleSpec {
        self.with_energy(energy)
    }
}

/// The same matrix at every phase; a test fixture with known answers.
#[derive(Debug, Clone)]
pub struct ConstantCocycle {
    pub matrix: Mat2,
    pub alpha: DoubleDouble,
    pub coupling: f64,
}

impl ConstantCocycle {
    /// `diag(λ, 1/λ)` over the golden rotation.
    pub fn diagonal(lambda: f64) -> Self {
        Self { matrix: Mat2::diag(lambda), alpha: Frequency::golden().value_dd(), coupling: lambda }
    }

    /// A fixed rotation by `theta`, with nominal coupling `lambda`.
    pub fn rotation(theta: f64, lambda: f64) -> Self {
        Self { matrix: Mat2::rotation(theta), alpha: Frequency::golden().value_dd(), coupling: lambda }
    }
}

impl Cocycle for ConstantCocycle {
    fn alpha(&self) -> DoubleDouble {
        self.alpha
    }
    fn step(&self, _x: f64) -> Mat2 {
        self.matrix
    }
    fn coupling(&self) -> f64 {
        self.coupling
    }
}

impl EnergyFamily for ConstantCocycle {
    type Member = ConstantCocycle;
    fn at(&self, _energy: f64) -> ConstantCocycle {
        self.clone()
    }
}

/// `A_n(x0)` (forward) or `A_{−n}(x0) = A(x0−nα)⁻¹ ··· A(x0−α)⁻¹` (backward).
pub fn iterate_orbit<C: Cocycle + ?Sized>(c: &C, x0: f64, n: usize, direction: Direction) -> OrbitProduct {
    let mut acc = OrbitProduct::identity();
    let mut phase = Phase::new(x0);
    let alpha = c.alpha();
    match direction {
        Direction::Forward => {
            for _ in 0..n {
                acc.extend(&c.step(phase.value()));
                phase.advance(alpha);
            }
        }
        Direction::Backward => {
            let back = -alpha;
            for _ in 0..n {
                phase.advance(back);
                acc.extend(&c.step_inverse(phase.value()));
            }
        }
    }
    acc
}

/// Log norms `log‖A_n(x0)‖` at each of the increasing checkpoints, in one pass.
pub fn log_norms_at<C: Cocycle + ?Sized>(c: &C, x0: f64, checkpoints: &[usize], direction: Direction) -> Vec<f64> {
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut acc = OrbitProduct::identity();
    let mut phase = Phase::new(x0);
    let alpha = match direction {
        Direction::Forward => c.alpha(),
        Direction::Backward => -c.alpha(),
    };
    let mut done = 0usize;
    for &cp in checkpoints {
        while done < cp {
            match direction {
                Direction::Forward => {
                    acc.extend(&c.step(phase.value()));
                    phase.advance(alpha);
                }
                Direction::Backward => {
                    phase.advance(alpha);
                    acc.extend(&c.step_inverse(phase.value()));
                }
            }
            done += 1;
        }
        out.push(acc.log_norm());
    }
    out
}
