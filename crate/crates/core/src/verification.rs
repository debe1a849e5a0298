//! Verification suites for the closed-form identities and the appendix
//! integral scalings.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::angle::{lemma6_sensitivities, norm_identity_sides, sandwich_bounds, sandwich_matrix, SensitivityInputs};
use crate::linalg2::{norm_sl2, Mat2};
use crate::lyapunov::ap_verify;
use crate::reduce::par_map;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub trials: usize,
    /// Worst value of the check's error metric.
    pub worst_relative_error: f64,
    pub tolerance: f64,
    /// Trials breaking a side condition (for example a bound), counted separately.
    pub violations: usize,
    pub pass: bool,
    pub seed: u64,
}

impl CheckReport {
    fn new(name: &str, trials: usize, worst: f64, tolerance: f64, violations: usize, seed: u64) -> Self {
        Self {
            name: name.into(),
            trials,
            worst_relative_error: worst,
            tolerance,
            violations,
            pass: worst <= tolerance && violations == 0,
            seed,
        }
    }

    pub fn to_json(&self) -> String {
        format!(
            "{{\"name\":\"{}\",\"trials\":{},\"worst_relative_error\":{:e},\"tolerance\":{:e},\"violations\":{},\"pass\":{},\"seed\":{}}}",
            self.name, self.trials, self.worst_relative_error, self.tolerance, self.violations, self.pass, self.seed
        )
    }
}

fn require_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    Ok(())
}

/// `(λ₁, λ₂, θ)` uniform on `[2,100]² × (0.05, π/2 − 0.05)`; the first trial
/// is the corner `(2, 2, 0.05)`.
fn sensitivity_inputs(trials: usize, seed: u64) -> Vec<SensitivityInputs> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|k| {
            if k == 0 {
                SensitivityInputs { lambda1: 2.0, lambda2: 2.0, theta: 0.05 }
            } else {
                SensitivityInputs {
                    lambda1: rng.gen_range(2.0..100.0),
                    lambda2: rng.gen_range(2.0..100.0),
                    theta: rng.gen_range(0.05..FRAC_PI_2 - 0.05),
                }
            }
        })
        .collect()
}

pub const LEMMA6_TOL: f64 = 1e-5;
const FD_STEP: f64 = 1e-6;

fn log_norm(inp: &SensitivityInputs) -> Result<f64> {
    Ok(norm_sl2(&sandwich_matrix(inp))?.ln())
}

/// Relative errors of the three sensitivity ratios against central
/// differences, and whether the λ-ratios respect `|·| ≤ 1/λᵢ`.
pub fn lemma6_trial(inp: &SensitivityInputs) -> Result<([f64; 3], bool)> {
    let s = lemma6_sensitivities(inp)?;
    let central = |plus: SensitivityInputs, minus: SensitivityInputs, h: f64| -> Result<f64> {
        Ok((log_norm(&plus)? - log_norm(&minus)?) / (2.0 * h))
    };
    let ht = FD_STEP;
    let fd_theta = central(SensitivityInputs { theta: inp.theta + ht, ..*inp }, SensitivityInputs { theta: inp.theta - ht, ..*inp }, ht)?;
    let h1 = FD_STEP * inp.lambda1;
    let fd_l1 =
        central(SensitivityInputs { lambda1: inp.lambda1 + h1, ..*inp }, SensitivityInputs { lambda1: inp.lambda1 - h1, ..*inp }, h1)?;
    let h2 = FD_STEP * inp.lambda2;
    let fd_l2 =
        central(SensitivityInputs { lambda2: inp.lambda2 + h2, ..*inp }, SensitivityInputs { lambda2: inp.lambda2 - h2, ..*inp }, h2)?;
    // Errors are relative to the derivative or, where it nearly vanishes, to
    // a thousandth of its natural scale (1 for θ, 1/λᵢ for λᵢ).
    let rel = |a: f64, fd: f64, scale: f64| (a - fd).abs() / fd.abs().max(1e-3 * scale);
    let errs =
        [rel(s.dtheta_ratio, fd_theta, 1.0), rel(s.dlam1_ratio, fd_l1, 1.0 / inp.lambda1), rel(s.dlam2_ratio, fd_l2, 1.0 / inp.lambda2)];
    let within = s.dlam1_ratio.abs() <= (1.0 + 1e-12) / inp.lambda1 && s.dlam2_ratio.abs() <= (1.0 + 1e-12) / inp.lambda2;
    Ok((errs, within))
}

/// Sensitivity formulas against finite differences, tolerance `10⁻⁵`.
pub fn check_lemma6_fd(trials: usize, seed: u64) -> Result<CheckReport> {
    require_trials(trials)?;
    let inputs = sensitivity_inputs(trials, seed);
    let rows = par_map(trials, |k| lemma6_trial(&inputs[k]));
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    for r in rows {
        let (errs, within) = r?;
        worst = errs.iter().fold(worst, |w, &e| w.max(e));
        violations += (!within) as usize;
    }
    Ok(CheckReport::new("lemma6_fd", trials, worst, LEMMA6_TOL, violations, seed))
}

pub const NORM_IDENTITY_TOL: f64 = 1e-10;

/// The norm identity on `[2,100]² × [0, π]`, tolerance `10⁻¹⁰`.
pub fn check_norm_identity(trials: usize, seed: u64) -> Result<CheckReport> {
    require_trials(trials)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<SensitivityInputs> = (0..trials)
        .map(|_| SensitivityInputs {
            lambda1: rng.gen_range(2.0..100.0),
            lambda2: rng.gen_range(2.0..100.0),
            theta: rng.gen_range(0.0..std::f64::consts::PI),
        })
        .collect();
    let mut worst: f64 = 0.0;
    for inp in &inputs {
        let (lhs, rhs) = norm_identity_sides(inp)?;
        worst = worst.max((lhs - rhs).abs() / rhs);
    }
    Ok(CheckReport::new("norm_identity", trials, worst, NORM_IDENTITY_TOL, 0, seed))
}

/// Lower and upper bounds on `|∂_θ‖A‖|/‖A‖` in terms of `W`. The metric is
/// the worst slack ratio; violations count trials outside the bounds.
pub fn check_sandwich(trials: usize, seed: u64) -> Result<CheckReport> {
    require_trials(trials)?;
    let inputs = sensitivity_inputs(trials, seed);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for inp in &inputs {
        let d = lemma6_sensitivities(inp)?.dtheta_ratio.abs();
        let (lo, hi) = sandwich_bounds(inp)?;
        if !(lo <= d && d <= hi) {
            violations += 1;
        }
        worst = worst.max(lo / d).max(d / hi);
    }
    Ok(CheckReport::new("sandwich", trials, worst, 1.0, violations, seed))
}

/// A chain `E_1..E_n` with `‖E_j‖ ∈ [μ, 10μ]` and every consecutive pair
/// meeting the angle condition, built by rejection on each new factor.
pub fn random_ap_chain(rng: &mut impl Rng, mu: f64, n: usize) -> Vec<Mat2> {
    let half_log_mu = 0.5 * mu.ln();
    let draw = |rng: &mut dyn rand::RngCore| {
        let s = mu * 10f64.powf(rng.gen_range(0.0..1.0));
        let (phi, psi) = (rng.gen_range(0.0..std::f64::consts::PI), rng.gen_range(0.0..std::f64::consts::PI));
        Mat2::rotation(phi) * Mat2::diag(s) * Mat2::rotation(psi)
    };
    let mut chain: Vec<Mat2> = vec![draw(rng)];
    while chain.len() < n {
        let next = draw(rng);
        let last = chain[chain.len() - 1];
        let gap = norm_sl2(&next).unwrap().ln() + norm_sl2(&last).unwrap().ln() - norm_sl2(&(next * last)).unwrap().ln();
        // Margin keeps rounding away from the strict inequality.
        if gap < half_log_mu - 1e-6 {
            chain.push(next);
        }
    }
    chain
}

/// The avalanche identity residual over random chains, measured in units of
/// `n/μ`; tolerance `c`.
pub fn check_avalanche(trials: usize, seed: u64, mu: f64, n: usize, c: f64) -> Result<CheckReport> {
    require_trials(trials)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chains: Vec<Vec<Mat2>> = (0..trials).map(|_| random_ap_chain(&mut rng, mu, n)).collect();
    let mut worst: f64 = 0.0;
    for chain in &chains {
        let r = ap_verify(chain, mu, c)?;
        worst = worst.max(r.identity_residual * mu / n as f64);
    }
    Ok(CheckReport::new("avalanche", trials, worst, c, 0, seed))
}

#[allow(clippy::excessive_precision)]
mod quad {
    use crate::{Error, Result};

    const XGK: [f64; 8] = [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.0,
    ];
    const WGK: [f64; 8] = [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ];
    const WG: [f64; 4] = [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ];

    /// Gauss–Kronrod 7/15: `(kronrod, |kronrod − gauss|)`.
    pub fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let fc = f(c);
        let mut k = WGK[7] * fc;
        let mut g = WG[3] * fc;
        for i in 0..7 {
            let s = f(c - h * XGK[i]) + f(c + h * XGK[i]);
            k += WGK[i] * s;
            if i % 2 == 1 {
                g += WG[i / 2] * s;
            }
        }
        (k * h, ((k - g) * h).abs())
    }

    pub const DEPTH_CAP: usize = 60;

    pub fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, depth: usize) -> Result<f64> {
        let (v, err) = gk15(f, a, b);
        if err <= abs_tol.max(1e-12 * v.abs()) {
            return Ok(v);
        }
        if depth >= DEPTH_CAP {
            return Err(Error::QuadratureFailure { a, b });
        }
        let m = 0.5 * (a + b);
        Ok(adaptive(f, a, m, 0.5 * abs_tol, depth + 1)? + adaptive(f, m, b, 0.5 * abs_tol, depth + 1)?)
    }

    /// Breakpoints on `[a, b]` refining by decades towards `a`, down to
    /// offsets below `smallest`.
    pub fn breaks_toward_left(a: f64, b: f64, smallest: f64) -> Vec<f64> {
        let mut pts = vec![b];
        let mut d = b - a;
        while d > smallest && d > 0.0 {
            d *= 0.1;
            pts.push(a + d);
        }
        pts.push(a);
        pts.reverse();
        pts.dedup();
        pts
    }

    /// Sum over the pieces between consecutive breakpoints.
    pub fn integrate_pieces(f: &dyn Fn(f64) -> f64, pts: &[f64], rel_tol: f64) -> Result<f64> {
        let scale: f64 = pts.windows(2).map(|w| gk15(f, w[0], w[1]).0.abs()).sum();
        let abs_tol = rel_tol * scale.max(f64::MIN_POSITIVE) / pts.len() as f64;
        let mut total = 0.0;
        for w in pts.windows(2) {
            if w[1] > w[0] {
                total += adaptive(f, w[0], w[1], abs_tol, 0)?;
            }
        }
        Ok(total)
    }
}

pub use quad::gk15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppendixIntegral {
    /// `∫ sgn(x² − ε₁²)/√((x² − ε₁²)² + ε₂⁴)`
    SignedRoot,
    /// `∫ 1/√((x² + ε₁²)² + ε₂⁴)`
    PlusRoot,
    /// `∫ (x² − ε₁²)/((x² − ε₁²)² + ε₂⁴)`
    MinusRational,
    /// `∫ (x² + ε₁²)/((x² + ε₁²)² + ε₂⁴)`
    PlusRational,
}

const QUAD_REL_TOL: f64 = 1e-10;

/// `∫_0^{1/q}` of the chosen integrand. Near the ridge `x = ε₁` the points
/// `ε₁ ± u` are integrated together with the cancellation done in closed form.
pub fn appendix_integral(which: AppendixIntegral, e1: f64, e2: f64, q: f64) -> Result<f64> {
    if !(e1 > 0.0 && e2 > 0.0 && q > 0.0) {
        return Err(Error::InvalidArgument("ε₁, ε₂ and q must be positive".into()));
    }
    let end = 1.0 / q;
    let e22 = e2 * e2;
    let e = e22 * e22;
    let minus = |x: f64| (x - e1) * (x + e1);
    let plus = |x: f64| x * x + e1 * e1;
    let smallest = e1.min(e2) * 1e-3;
    match which {
        AppendixIntegral::PlusRoot => {
            let f = move |x: f64| 1.0 / plus(x).hypot(e22);
            quad::integrate_pieces(&f, &quad::breaks_toward_left(0.0, end, smallest), QUAD_REL_TOL)
        }
        AppendixIntegral::PlusRational => {
            let f = move |x: f64| {
                let d = plus(x);
                d / (d * d + e)
            };
            quad::integrate_pieces(&f, &quad::breaks_toward_left(0.0, end, smallest), QUAD_REL_TOL)
        }
        AppendixIntegral::SignedRoot | AppendixIntegral::MinusRational => {
            let signed = which == AppendixIntegral::SignedRoot;
            let direct = move |x: f64| {
                let d = minus(x);
                if signed {
                    d.signum() / d.hypot(e22)
                } else {
                    d / (d * d + e)
                }
            };
            if e1 >= end {
                return quad::integrate_pieces(&direct, &quad::breaks_toward_left(0.0, end, smallest), QUAD_REL_TOL);
            }
            let w = e1.min(end - e1);
            let paired = move |u: f64| {
                let dp = u * (2.0 * e1 + u);
                let dm = -u * (2.0 * e1 - u);
                if signed {
                    let (ra, rb) = (dp.hypot(e22), dm.hypot(e22));
                    -8.0 * e1 * u * u * u / (ra * rb * (ra + rb))
                } else {
                    2.0 * u * u * (e - u * u * (4.0 * e1 * e1 - u * u)) / ((dp * dp + e) * (dm * dm + e))
                }
            };
            let u_feature = (e22 / e1).min(w);
            let mut total = quad::integrate_pieces(&paired, &quad::breaks_toward_left(0.0, w, u_feature * 1e-3), QUAD_REL_TOL)?;
            if e1 - w > 0.0 {
                total += quad::integrate_pieces(&direct, &[0.0, e1 - w], QUAD_REL_TOL)?;
            }
            if e1 + w < end {
                total += quad::integrate_pieces(&direct, &quad::breaks_toward_left(e1 + w, end, w * 1e-3), QUAD_REL_TOL)?;
            }
            Ok(total)
        }
    }
}

/// One scaling regime of the appendix estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `SignedRoot·ε₁` bounded above for `ε₁ ≥ 10ε₂`.
    SignedRootUpper,
    /// `PlusRoot·ε₁` bounded above and below for `ε₁ ≥ 10ε₂`.
    PlusRootTwoSided,
    /// `−MinusRational/q` positive and bounded for `ε₁ ≥ (ε₂²/q)^{1/3}`.
    MinusLinearInQ,
    /// `|MinusRational|·ε₁³/ε₂²` bounded for `ε₂ < ε₁ < (ε₂²/q)^{1/3}`.
    MinusCubic,
    /// `MinusRational·ε₂` bounded for `ε₁ ≤ ε₂`.
    MinusInverseEps2,
    /// `PlusRational·ε₁` bounded for `ε₁ > ε₂`.
    PlusInverseEps1,
    /// `PlusRational·ε₂` bounded for `ε₁ ≤ ε₂`.
    PlusInverseEps2,
}

impl Regime {
    pub const ALL: [Regime; 7] = [
        Regime::SignedRootUpper,
        Regime::PlusRootTwoSided,
        Regime::MinusLinearInQ,
        Regime::MinusCubic,
        Regime::MinusInverseEps2,
        Regime::PlusInverseEps1,
        Regime::PlusInverseEps2,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Regime::SignedRootUpper => "signed_root_upper",
            Regime::PlusRootTwoSided => "plus_root_two_sided",
            Regime::MinusLinearInQ => "minus_rational_linear_q",
            Regime::MinusCubic => "minus_rational_cubic",
            Regime::MinusInverseEps2 => "minus_rational_inverse_eps2",
            Regime::PlusInverseEps1 => "plus_rational_inverse_eps1",
            Regime::PlusInverseEps2 => "plus_rational_inverse_eps2",
        }
    }

    fn applies(self, e1: f64, e2: f64, q: f64) -> bool {
        let knee = (e2 * e2 / q).cbrt();
        match self {
            Regime::SignedRootUpper | Regime::PlusRootTwoSided => e1 >= 10.0 * e2,
            Regime::MinusLinearInQ => e1 >= knee,
            Regime::MinusCubic => e2 < e1 && e1 < knee,
            Regime::MinusInverseEps2 | Regime::PlusInverseEps2 => e1 <= e2,
            Regime::PlusInverseEps1 => e1 > e2,
        }
    }

    /// Whether the claim is an equality up to a positive constant, checked by
    /// the spread of the ratio; otherwise it is an `O(1)` bound on `|ratio|`.
    pub fn two_sided(self) -> bool {
        matches!(self, Regime::PlusRootTwoSided | Regime::MinusLinearInQ)
    }

    fn integral(self) -> AppendixIntegral {
        match self {
            Regime::SignedRootUpper => AppendixIntegral::SignedRoot,
            Regime::PlusRootTwoSided => AppendixIntegral::PlusRoot,
            Regime::MinusLinearInQ | Regime::MinusCubic | Regime::MinusInverseEps2 => AppendixIntegral::MinusRational,
            Regime::PlusInverseEps1 | Regime::PlusInverseEps2 => AppendixIntegral::PlusRational,
        }
    }

    fn ratio(self, v: f64, e1: f64, e2: f64, q: f64) -> f64 {
        match self {
            Regime::SignedRootUpper => v.abs() * e1,
            Regime::PlusRootTwoSided | Regime::PlusInverseEps1 => v * e1,
            Regime::MinusLinearInQ => -v / q,
            Regime::MinusCubic => v * e1 * e1 * e1 / (e2 * e2),
            Regime::MinusInverseEps2 | Regime::PlusInverseEps2 => v * e2,
        }
    }
}

/// Cap on `|ratio|` for the `O(1)` bounds.
pub const BOUND_CAP: f64 = 20.0;
/// Cap on `max/min` of the ratio within a two-sided regime.
pub const SPREAD_CAP: f64 = 25.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeCheck {
    pub regime: Regime,
    pub points: usize,
    /// `log₁₀(max ε₁ / min ε₁)` over the points in the regime.
    pub decades: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Sign changes of the ratio along increasing `ε₁`.
    pub sign_changes: usize,
    pub pass: bool,
}

impl RegimeCheck {
    pub fn utilization(&self) -> f64 {
        if self.regime.two_sided() {
            if self.min_ratio > 0.0 {
                self.max_ratio / self.min_ratio / SPREAD_CAP
            } else {
                f64::INFINITY
            }
        } else {
            self.max_ratio.abs().max(self.min_ratio.abs()) / BOUND_CAP
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppendixReport {
    pub q: f64,
    pub regimes: Vec<RegimeCheck>,
    pub evaluations: usize,
}

impl AppendixReport {
    pub fn pass(&self) -> bool {
        self.regimes.iter().all(|r| r.pass)
    }

    /// Summary in the common report shape. The metric is the worst
    /// utilization: spread over its cap, or `|ratio|` over its cap.
    pub fn to_check_report(&self) -> CheckReport {
        let worst = self.regimes.iter().map(RegimeCheck::utilization).fold(0.0f64, f64::max);
        let failed = self.regimes.iter().filter(|r| !r.pass).count();
        CheckReport::new("appendix", self.evaluations, worst, 1.0, failed, 0)
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<String> = self
            .regimes
            .iter()
            .map(|r| {
                format!(
                    "{{\"regime\":\"{}\",\"points\":{},\"decades\":{:.3},\"min_ratio\":{:e},\"max_ratio\":{:e},\"sign_changes\":{},\"pass\":{}}}",
                    r.regime.label(),
                    r.points,
                    r.decades,
                    r.min_ratio,
                    r.max_ratio,
                    r.sign_changes,
                    r.pass
                )
            })
            .collect();
        format!("{{\"q\":{:e},\"pass\":{},\"regimes\":[{}]}}", self.q, self.pass(), rows.join(","))
    }
}

/// Evaluates every applicable regime at each `ε₁` with `ε₂ = eps2_rule(ε₁)`.
/// Regimes with fewer than two points are omitted.
pub fn check_appendix_integrals(eps1_grid: &[f64], eps2_rule: &(dyn Fn(f64) -> f64 + Sync), q: f64) -> Result<AppendixReport> {
    let pairs: Vec<(f64, f64)> = eps1_grid.iter().map(|&e1| (e1, eps2_rule(e1))).collect();
    for &(e1, e2) in &pairs {
        if !(e1 > 0.0 && e1 < 0.1) || !(e2 > 0.0) || q * e1.max(e2) > 0.1 {
            return Err(Error::InvalidArgument(format!("ε₁ = {e1:e}, ε₂ = {e2:e} outside the admissible range for q = {q}")));
        }
    }
    let mut regimes = Vec::new();
    let mut evaluations = 0;
    for regime in Regime::ALL {
        let mut pts: Vec<(f64, f64)> = pairs.iter().copied().filter(|&(e1, e2)| regime.applies(e1, e2, q)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pts.len() < 2 {
            continue;
        }
        let values = par_map(pts.len(), |k| appendix_integral(regime.integral(), pts[k].0, pts[k].1, q));
        let mut ratios = Vec::with_capacity(pts.len());
        for (v, &(e1, e2)) in values.into_iter().zip(&pts) {
            ratios.push(regime.ratio(v?, e1, e2, q));
        }
        evaluations += pts.len();
        let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e_lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let e_hi = pts.iter().map(|p| p.0).fold(0.0, f64::max);
        let sign_changes = ratios.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
        let mut check =
            RegimeCheck { regime, points: pts.len(), decades: (e_hi / e_lo).log10(), min_ratio, max_ratio, sign_changes, pass: false };
        check.pass = check.utilization() <= 1.0;
        regimes.push(check);
    }
    Ok(AppendixReport { q, regimes, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lemma6_suite_passes() {
        let r = check_lemma6_fd(1000, 7).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn corner_input_passes() {
        let (errs, within) = lemma6_trial(&SensitivityInputs { lambda1: 2.0, lambda2: 2.0, theta: 0.05 }).unwrap();
        assert!(errs.iter().all(|&e| e <= LEMMA6_TOL), "{errs:?}");
        assert!(within);
    }

    #[test]
    fn zero_trials_is_rejected() {
        assert!(check_lemma6_fd(0, 1).is_err());
        assert!(check_norm_identity(0, 1).is_err());
    }

    #[test]
    fn norm_identity_special_angles() {
        let inp = SensitivityInputs { lambda1: 3.0, lambda2: 7.0, theta: 0.0 };
        assert!((norm_sl2(&sandwich_matrix(&inp)).unwrap() - 21.0).abs() < 1e-12);
        let inp = SensitivityInputs { lambda1: 5.0, lambda2: 5.0, theta: FRAC_PI_2 };
        let (lhs, rhs) = norm_identity_sides(&inp).unwrap();
        assert!((rhs - 2.0).abs() < 1e-12 && (lhs - 2.0).abs() < 1e-9);
        assert!((norm_sl2(&sandwich_matrix(&inp)).unwrap() - 1.0).abs() < 1e-6);
        assert!(check_norm_identity(1000, 3).unwrap().pass);
    }

    #[test]
    fn sandwich_suite_passes() {
        let r = check_sandwich(1000, 11).unwrap();
        assert_eq!(r.violations, 0, "{r:?}");
    }

    #[test]
    fn chains_meet_hypotheses() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let chain = random_ap_chain(&mut rng, 1e3, 100);
        let r = ap_verify(&chain, 1e3, 10.0).unwrap();
        assert!(r.gap_condition_margin > 0.0);
        assert!(r.holds());
    }

    #[test]
    fn gk15_is_exact_on_polynomials() {
        let (v, e) = gk15(&|x| x.powi(7) - 3.0 * x * x, -1.0, 2.0);
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert!((v - exact).abs() < 1e-12 && e < 1e-10);
    }

    /// `∫_0^{1/q} dx/(x² + a²) = atan(1/(qa))/a`, the `ε₂ → 0` limit of the
    /// positive-rational integral.
    #[test]
    fn plus_rational_matches_closed_form_limit() {
        let (a, q) = (1e-3, 10.0);
        let v = appendix_integral(AppendixIntegral::PlusRational, a, 1e-9, q).unwrap();
        let exact = (1.0 / (q * a)).atan() / a;
        assert!((v - exact).abs() < 1e-9 * exact);
    }

    /// The principal value `∫_0^{1/q} dx/(x² − a²) = ln((1/q − a)/(1/q + a))/(2a)` is
    /// the `ε₂ → 0` limit of the negative-rational integral.
    #[test]
    fn minus_rational_matches_principal_value() {
        let (a, q) = (1e-3, 10.0);
        let v = appendix_integral(AppendixIntegral::MinusRational, a, 1e-9, q).unwrap();
        let pv = ((1.0 / q - a) / (1.0 / q + a)).ln() / (2.0 * a);
        assert!((v - pv).abs() < 1e-6 * pv.abs(), "{v} vs {pv}");
    }

    #[test]
    fn paired_ridge_matches_direct_quadrature_when_resolvable() {
        // With ε₂ comparable to ε₁ the ridge is wide and direct quadrature works.
        let (e1, e2, q) = (1e-3, 5e-4, 10.0);
        for (which, signed) in [(AppendixIntegral::MinusRational, false), (AppendixIntegral::SignedRoot, true)] {
            let direct = move |x: f64| {
                let d = (x - e1) * (x + e1);
                if signed {
                    d.signum() / d.hypot(e2 * e2)
                } else {
                    d / (d * d + e2.powi(4))
                }
            };
            let pts = [0.0, e1, 2.0 * e1, 1e-2, 0.1];
            let reference = quad::integrate_pieces(&direct, &pts, 1e-12).unwrap();
            let v = appendix_integral(which, e1, e2, q).unwrap();
            assert!((v - reference).abs() < 1e-8 * reference.abs(), "{which:?}: {v} vs {reference}");
        }
    }

    #[test]
    fn signed_root_example_bound() {
        let v = appendix_integral(AppendixIntegral::SignedRoot, 1e-2, 1e-4, 10.0).unwrap();
        assert!(v.abs() * 1e-2 <= BOUND_CAP);
    }

    #[test]
    fn plus_root_scaled_converges_as_eps2_vanishes() {
        let e1 = 1e-3;
        let vals: Vec<f64> =
            [1e-5, 1e-6, 1e-7, 1e-8].iter().map(|&e2| appendix_integral(AppendixIntegral::PlusRoot, e1, e2, 10.0).unwrap() * e1).collect();
        let limit = (1.0 / (10.0 * e1)).atan();
        let gaps: Vec<f64> = vals.iter().map(|v| (v - limit).abs()).collect();
        assert!(gaps.windows(2).all(|w| w[1] <= w[0]) && gaps[1] < gaps[0], "{gaps:?}");
        assert!(gaps[3] < 1e-8);
    }

    fn acceptance_grid() -> Vec<f64> {
        (0..=60).map(|k| 1e-15 * 10f64.powf(k as f64 * 12.9 / 60.0)).collect()
    }

    #[test]
    fn regimes_hold_on_fixed_eps2() {
        let r = check_appendix_integrals(&acceptance_grid(), &|_| 1e-12, 10.0).unwrap();
        assert_eq!(r.regimes.len(), Regime::ALL.len());
        assert!(r.pass(), "{}", r.to_json());
        assert!(r.regimes.iter().all(|c| c.decades >= 2.0));
    }

    #[test]
    fn wrong_exponent_breaks_the_bound() {
        // The middle branch scaled by ε₁² instead of ε₁³ grows like 1/ε₁.
        let (e2, q) = (1e-12, 10.0);
        let worst = acceptance_grid()
            .into_iter()
            .filter(|&e1| Regime::MinusCubic.applies(e1, e2, q))
            .map(|e1| appendix_integral(AppendixIntegral::MinusRational, e1, e2, q).unwrap() * e1 * e1 / (e2 * e2))
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst > 1e3 * BOUND_CAP, "{worst}");
    }

    #[test]
    fn out_of_range_grid_is_rejected() {
        assert!(check_appendix_integrals(&[0.5], &|e| e, 10.0).is_err());
    }

    #[test]
    fn equal_eps_is_in_the_inverse_eps2_branch() {
        let e = 1e-6;
        let v = appendix_integral(AppendixIntegral::MinusRational, e, e, 10.0).unwrap();
        assert!((v * e).abs() > 0.1 && (v * e).abs() < 10.0);
    }
}
