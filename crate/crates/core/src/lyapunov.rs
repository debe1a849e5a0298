//! Finite Lyapunov exponents, large-deviation sets, avalanche-principle
//! checks and doubling extrapolation.
//!
//! `L_n = (1/n) ∫ log‖A_n(x)‖ dx` is approximated by the mean over a uniform
//! phase grid. Extrapolation uses `L ≈ 2L_{2n} − L_n` and doubles `n` until two
//! consecutive estimates agree.

use rayon::prelude::*;

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::cocycle::{iterate_orbit, Cocycle, CocycleSpec, Direction, Form};
use crate::dd::{DoubleDouble, Phase};
use crate::linalg2::{norm_sl2, Mat2, OrbitProduct};
use crate::reduce::{mean, par_map};
use crate::{ApCondition, Error, Result};

/// `L_n` at one scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeEstimate {
    pub n: usize,
    pub value: f64,
    pub grid_size: usize,
    pub error_hint: f64,
}

fn clamp_le(v: f64) -> f64 {
    if (-1e-10..0.0).contains(&v) {
        0.0
    } else {
        v
    }
}

/// `(1/n)·mean_g log‖A_n(g/grid)‖`.
pub fn finite_le<C: Cocycle>(c: &C, n: usize, grid_size: usize) -> Result<LeEstimate> {
    check_grid(grid_size)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let logs = par_map(grid_size, |g| iterate_orbit(c, g as f64 / grid_size as f64, n, Direction::Forward).log_norm());
    Ok(LeEstimate { n, value: clamp_le(mean(&logs) / n as f64), grid_size, error_hint: 0.0 })
}

fn check_grid(grid_size: usize) -> Result<()> {
    if grid_size < 64 {
        return Err(Error::InvalidArgument("grid_size must be at least 64".into()));
    }
    Ok(())
}

/// Per-phase orbit products that can be advanced to longer lengths.
pub struct Ladder<'a, C: Cocycle> {
    cocycle: &'a C,
    states: Vec<(OrbitProduct, Phase)>,
    n: usize,
}

impl<'a, C: Cocycle> Ladder<'a, C> {
    pub fn new(cocycle: &'a C, grid_size: usize) -> Self {
        let states = (0..grid_size).map(|g| (OrbitProduct::identity(), Phase::new(g as f64 / grid_size as f64))).collect();
        Self { cocycle, states, n: 0 }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Extends every orbit to length `m` and returns `L_m`.
    pub fn advance_to(&mut self, m: usize) -> f64 {
        clamp_le(self.advance_raw(m))
    }

    /// As [`Ladder::advance_to`], without clamping rounding-level negatives to zero.
    fn advance_raw(&mut self, m: usize) -> f64 {
        let c = self.cocycle;
        let alpha = c.alpha();
        let extra = m.saturating_sub(self.n);
        self.states.par_iter_mut().for_each(|(acc, phase)| {
            for _ in 0..extra {
                acc.extend(&c.step(phase.value()));
                phase.advance(alpha);
            }
        });
        self.n = self.n.max(m);
        let logs: Vec<f64> = self.states.iter().map(|(acc, _)| acc.log_norm()).collect();
        mean(&logs) / self.n as f64
    }
}

/// One row of the doubling schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleRow {
    pub n: usize,
    pub l_n: f64,
    pub l_2n: f64,
    pub extrapolated: f64,
    pub error_hint: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolation {
    pub estimate: LeEstimate,
    pub rows: Vec<ScaleRow>,
}

impl Extrapolation {
    /// Longest orbit that was iterated.
    pub fn n_final(&self) -> usize {
        4 * self.estimate.n
    }
}

/// Default ceiling on the orbit length used by [`le_extrapolate`].
pub const DEFAULT_MAX_N: usize = 1 << 17;

/// `2L_{2n} − L_n` at the first `n = n0·2^k` where it agrees with the next
/// scale to within `tol`. Orbits never exceed `max_n`.
pub fn le_extrapolate<C: Cocycle>(c: &C, n0: usize, grid_size: usize, tol: f64, max_n: usize) -> Result<Extrapolation> {
    check_grid(grid_size)?;
    if n0 < 32 {
        return Err(Error::InvalidArgument("n0 must be at least 32".into()));
    }
    if 4 * n0 > max_n {
        return Err(Error::NoConvergence { max_n, last_diff: f64::NAN });
    }
    let mut ladder = Ladder::new(c, grid_size);
    let mut n = n0;
    let mut l = [ladder.advance_to(n), ladder.advance_to(2 * n), ladder.advance_to(4 * n)];
    let mut rows = Vec::new();
    loop {
        let e1 = 2.0 * l[1] - l[0];
        let e2 = 2.0 * l[2] - l[1];
        let diff = (e1 - e2).abs();
        rows.push(ScaleRow { n, l_n: l[0], l_2n: l[1], extrapolated: e1, error_hint: diff });
        if diff <= tol {
            let estimate = LeEstimate { n, value: clamp_le(e1), grid_size, error_hint: diff };
            return Ok(Extrapolation { estimate, rows });
        }
        if 8 * n > max_n {
            return Err(Error::NoConvergence { max_n, last_diff: diff });
        }
        n *= 2;
        l = [l[1], l[2], ladder.advance_to(4 * n)];
    }
}

/// Extrapolated difference `L(c1) − L(c0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferenceEstimate {
    pub n: usize,
    pub value: f64,
    pub grid_size: usize,
    pub error_hint: f64,
}

/// `L(c1) − L(c0)` with both cocycles iterated on the same phase grid and
/// the doubling extrapolation applied to `Δ_n = L_n(c1) − L_n(c0)`. The
/// finite-`n` corrections of nearby energies largely cancel in `Δ_n`, so this
/// converges far faster than two independent extrapolations.
pub fn le_difference_extrapolate<C: Cocycle>(
    c0: &C,
    c1: &C,
    n0: usize,
    grid_size: usize,
    tol: f64,
    max_n: usize,
) -> Result<DifferenceEstimate> {
    check_grid(grid_size)?;
    if n0 < 32 {
        return Err(Error::InvalidArgument("n0 must be at least 32".into()));
    }
    if 4 * n0 > max_n {
        return Err(Error::NoConvergence { max_n, last_diff: f64::NAN });
    }
    let (mut a, mut b) = (Ladder::new(c0, grid_size), Ladder::new(c1, grid_size));
    let mut step = |m: usize| -> f64 {
        let l1 = b.advance_raw(m);
        let l0 = a.advance_raw(m);
        l1 - l0
    };
    let mut n = n0;
    let mut d = [step(n), step(2 * n), step(4 * n)];
    loop {
        let e1 = 2.0 * d[1] - d[0];
        let e2 = 2.0 * d[2] - d[1];
        let diff = (e1 - e2).abs();
        if diff <= tol {
            return Ok(DifferenceEstimate { n, value: e1, grid_size, error_hint: diff });
        }
        if 8 * n > max_n {
            return Err(Error::NoConvergence { max_n, last_diff: diff });
        }
        n *= 2;
        d = [d[1], d[2], step(4 * n)];
    }
}

/// Default alignment length for [`le_strip`].
pub const STRIP_BURN_IN: usize = 400;
/// Largest tolerated gap between the measured ε-slope and `2π·ω`.
pub const AFFINE_TOL: f64 = 1e-6;

/// Exponent of the phase-complexified cocycle `x ↦ A(x + iε)` for a
/// Schrödinger cocycle with an analytic potential. Each grid phase pushes a
/// vector through `burn_in` steps so it aligns with the unstable direction,
/// then contributes the log growth of one more step. For a uniformly
/// hyperbolic cocycle this average converges exponentially in both the grid
/// size and the burn-in; `ε = 0` gives the real exponent.
pub fn le_strip(spec: &CocycleSpec, eps: f64, grid_size: usize, burn_in: usize) -> Result<f64> {
    check_grid(grid_size)?;
    if spec.form() != Form::Schrodinger {
        return Err(Error::WrongForm("schrodinger"));
    }
    let pot = spec.potential();
    if pot.complex_value(0.0, eps).is_none() {
        return Err(Error::InvalidArgument("the strip estimator needs an analytic (cos-family) potential".into()));
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument("ε must be nonnegative".into()));
    }
    let (energy, lambda, alpha) = (spec.energy(), spec.lambda(), spec.alpha());
    let logs = par_map(grid_size, |g| {
        let x0 = DoubleDouble::from_f64(g as f64 / grid_size as f64) - alpha.mul_int(burn_in as i64);
        let mut phase = Phase::from_dd(x0);
        let (mut w0, mut w1) = (Complex64::new(1.0, 0.0), Complex64::new(0.3, 0.1));
        let mut growth = 0.0;
        for _ in 0..=burn_in {
            let a = energy - lambda * pot.complex_value(phase.value(), eps).unwrap_or_default();
            let next = a * w0 - w1;
            w1 = w0;
            w0 = next;
            let norm = (w0.norm_sqr() + w1.norm_sqr()).sqrt();
            growth = norm.ln();
            w0 /= norm;
            w1 /= norm;
            phase.advance(alpha);
        }
        growth
    });
    Ok(mean(&logs))
}

/// `L(E)` recovered from the strip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripEstimate {
    pub value: f64,
    /// The integer `ω` with `L_ε = L + 2πωε` on the sampled strip.
    pub acceleration: i64,
    pub eps: f64,
    /// Distance of the measured slopes from `2πω`.
    pub slope_defect: f64,
    /// Change of the value when grid and burn-in are doubled.
    pub error_hint: f64,
}

/// `L(E) = L_ε − 2πωε`, using that `ε ↦ L_ε` is convex and piecewise affine
/// with slopes in `2πZ`. Checks affinity on `ε, 2ε, 4ε`; valid when no kink
/// lies in `(0, ε)`, which holds on the spectrum for small `ε` but not inside
/// a gap. `ε = 0` returns the aligned real estimate directly.
pub fn le_via_strip(spec: &CocycleSpec, eps: f64, grid_size: usize, burn_in: usize) -> Result<StripEstimate> {
    let fine = |e: f64| le_strip(spec, e, 2 * grid_size, 2 * burn_in);
    let l1 = fine(eps)?;
    let error_hint = (l1 - le_strip(spec, eps, grid_size, burn_in)?).abs();
    if eps == 0.0 {
        return Ok(StripEstimate { value: l1, acceleration: 0, eps, slope_defect: 0.0, error_hint });
    }
    let (l2, l4) = (fine(2.0 * eps)?, fine(4.0 * eps)?);
    let (s1, s2) = ((l2 - l1) / eps, (l4 - l2) / (2.0 * eps));
    let omega = (s1 / TAU).round();
    let slope_defect = (s1 - TAU * omega).abs().max((s2 - TAU * omega).abs());
    if slope_defect > AFFINE_TOL {
        return Err(Error::NotAffine { slope_defect });
    }
    Ok(StripEstimate { value: l1 - TAU * omega * eps, acceleration: omega as i64, eps, slope_defect, error_hint })
}

/// Grid measure of `{x : (1/i)·log‖A_i(x)‖ ≤ fraction·ln λ}`.
pub fn ldt_deviation_measure<C: Cocycle>(c: &C, i: usize, grid_size: usize, fraction: f64) -> Result<f64> {
    if i < 10 {
        return Err(Error::InvalidArgument("i must be at least 10".into()));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument("fraction must lie in (0, 1)".into()));
    }
    let threshold = fraction * c.coupling().ln() * i as f64;
    let hits = par_map(grid_size, |g| {
        let ln = iterate_orbit(c, g as f64 / grid_size as f64, i, Direction::Forward).log_norm();
        (ln <= threshold) as u64
    });
    Ok(hits.iter().sum::<u64>() as f64 / grid_size as f64)
}

/// Least-squares fit of `log m_i ≈ a − c·i·ln λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdtFit {
    pub c: f64,
    pub intercept: f64,
    pub points_used: usize,
}

/// Fits the decay rate from `(i, measure)` pairs, skipping empty sets.
pub fn fit_ldt_decay(points: &[(usize, f64)], ln_lambda: f64) -> Result<LdtFit> {
    let used: Vec<(f64, f64)> = points.iter().filter(|(_, m)| *m > 0.0).map(|&(i, m)| (i as f64 * ln_lambda, m.ln())).collect();
    if used.len() < 2 {
        return Err(Error::InsufficientData { usable: used.len(), needed: 2 });
    }
    let (slope, intercept, _) = least_squares(&used);
    Ok(LdtFit { c: -slope, intercept, points_used: used.len() })
}

/// `(slope, intercept, rms residual)` of an ordinary least-squares line.
pub fn least_squares(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Result of checking the avalanche principle on a chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApReport {
    pub mu: f64,
    pub n: usize,
    /// `½ log μ − max_j |log‖E_{j+1}‖ + log‖E_j‖ − log‖E_{j+1}E_j‖|`.
    pub gap_condition_margin: f64,
    /// `|log‖E_n···E_1‖ + Σ_{j=2}^{n−1} log‖E_j‖ − Σ_{j=1}^{n−1} log‖E_{j+1}E_j‖|`.
    pub identity_residual: f64,
    /// `C·n/μ`.
    pub bound: f64,
    /// `log‖E_n···E_1‖` from the renormalized product.
    pub log_norm_product: f64,
}

impl ApReport {
    pub fn holds(&self) -> bool {
        self.identity_residual <= self.bound
    }
}

/// Checks the chain hypotheses and evaluates the avalanche identity residual.
///
/// A violated size condition reports [`ApCondition::NormFloor`] with the first index whose
/// norm is below `μ` (index 0 when `μ < n`); a violated pair condition reports
/// [`ApCondition::AngleGap`] with the first offending pair.
pub fn ap_verify(chain: &[Mat2], mu: f64, c: f64) -> Result<ApReport> {
    let n = chain.len();
    if n < 3 {
        return Err(Error::InvalidArgument("chain length must be at least 3".into()));
    }
    if mu < n as f64 {
        return Err(Error::PreconditionFailed { condition: ApCondition::NormFloor, index: 0 });
    }
    let mut logs = Vec::with_capacity(n);
    for (j, m) in chain.iter().enumerate() {
        let norm = norm_sl2(m)?;
        // Relative slack absorbs the last-bit rounding of the norm formula.
        if norm < mu * (1.0 - 1e-12) {
            return Err(Error::PreconditionFailed { condition: ApCondition::NormFloor, index: j });
        }
        logs.push(norm.ln());
    }
    let half_log_mu = 0.5 * mu.ln();
    let mut pair_logs = Vec::with_capacity(n - 1);
    let mut worst: f64 = 0.0;
    for j in 0..n - 1 {
        let pair = norm_sl2(&(chain[j + 1] * chain[j]))?.ln();
        let gap = (logs[j + 1] + logs[j] - pair).abs();
        if gap >= half_log_mu {
            return Err(Error::PreconditionFailed { condition: ApCondition::AngleGap, index: j });
        }
        worst = worst.max(gap);
        pair_logs.push(pair);
    }
    let mut acc = OrbitProduct::identity();
    for m in chain {
        acc.extend(m);
    }
    let log_norm_product = acc.log_norm();
    let inner: f64 = logs[1..n - 1].iter().sum();
    let pairs: f64 = pair_logs.iter().sum();
    Ok(ApReport {
        mu,
        n,
        gap_condition_margin: half_log_mu - worst,
        identity_residual: (log_norm_product + inner - pairs).abs(),
        bound: c * n as f64 / mu,
        log_norm_product,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::Frequency;
    use crate::cocycle::{ConstantCocycle, Potential};
    use proptest::prelude::*;

    #[test]
    fn strip_recovers_amo_exponent_on_the_spectrum() {
        let est = le_via_strip(&amo(0.0), 0.02, 1024, STRIP_BURN_IN).unwrap();
        assert_eq!(est.acceleration, 1);
        assert!((est.value - 10f64.ln()).abs() < 1e-12, "{est:?}");
        assert!(est.error_hint < 1e-12);
    }

    #[test]
    fn strip_exponent_is_affine_with_integer_slope() {
        let s = amo(1.0);
        let l: Vec<f64> = [0.01, 0.03, 0.05].iter().map(|&e| le_strip(&s, e, 1024, STRIP_BURN_IN).unwrap()).collect();
        assert!(((l[1] - l[0]) / 0.02 - TAU).abs() < 1e-9);
        assert!(((l[2] - l[1]) / 0.02 - TAU).abs() < 1e-9);
    }

    #[test]
    fn aligned_real_estimate_matches_extrapolation_in_a_gap() {
        // E = 7 lies in the largest gap, where the real cocycle is uniformly hyperbolic.
        let s = amo(7.0);
        let aligned = le_via_strip(&s, 0.0, 1024, 2000).unwrap();
        let ext = le_extrapolate(&s, 256, 1024, 1e-10, 1 << 16).unwrap().estimate;
        assert!((aligned.value - ext.value).abs() < 1e-9, "{aligned:?} {ext:?}");
        assert!(aligned.value > 10f64.ln() + 1e-3);
    }

    #[test]
    fn strip_needs_an_analytic_potential() {
        let table = Potential::Table(crate::cocycle::PeriodicSpline::new(vec![0.0, 1.0, 0.0, -1.0]).unwrap());
        let s = CocycleSpec::schrodinger(Frequency::golden(), 2.0, table, 0.0);
        assert!(matches!(le_strip(&s, 0.01, 256, 10), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn strip_agrees_with_extrapolation_off_the_amo_family() {
        let s = CocycleSpec::schrodinger(Frequency::golden(), 10.0, Potential::cos_family(1.0, 0.2), 0.7);
        let strip = le_via_strip(&s, 0.02, 1024, STRIP_BURN_IN).unwrap();
        let ext = le_extrapolate(&s, 256, 8192, 1e-7, 1 << 16).unwrap().estimate;
        assert!((strip.value - ext.value).abs() <= 10.0 * ext.error_hint, "{strip:?} {ext:?}");
        assert!(strip.error_hint < 1e-12);
    }

    fn amo(e: f64) -> CocycleSpec {
        CocycleSpec::almost_mathieu(Frequency::golden(), 10.0, e)
    }

    #[test]
    fn constant_diagonal_gives_log_lambda() {
        let c = ConstantCocycle::diagonal(5.0);
        for (n, grid) in [(1, 64), (17, 128), (300, 64)] {
            let le = finite_le(&c, n, grid).unwrap();
            assert!((le.value - 5f64.ln()).abs() < 1e-14, "{le:?}");
        }
    }

    #[test]
    fn rotations_give_zero() {
        let le = finite_le(&ConstantCocycle::rotation(0.7, 10.0), 500, 64).unwrap();
        assert!(le.value.abs() <= 1e-9);
    }

    #[test]
    fn small_grid_rejected() {
        assert!(finite_le(&ConstantCocycle::diagonal(2.0), 10, 32).is_err());
    }

    #[test]
    fn amo_finite_le_near_log_lambda() {
        let le = finite_le(&amo(0.0), 4096, 8192).unwrap();
        assert!((le.value - 10f64.ln()).abs() < 1e-2, "{le:?}");
    }

    #[test]
    fn ladder_matches_direct_evaluation() {
        let s = amo(0.4);
        let mut ladder = Ladder::new(&s, 64);
        let a = ladder.advance_to(40);
        let b = ladder.advance_to(100);
        assert_eq!(a.to_bits(), finite_le(&s, 40, 64).unwrap().value.to_bits());
        assert_eq!(b.to_bits(), finite_le(&s, 100, 64).unwrap().value.to_bits());
    }

    #[test]
    fn extrapolation_of_constant_cocycle_stops_at_first_scale() {
        let ex = le_extrapolate(&ConstantCocycle::diagonal(3.0), 32, 64, 1e-12, DEFAULT_MAX_N).unwrap();
        assert_eq!(ex.estimate.n, 32);
        assert!((ex.estimate.value - 3f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn amo_extrapolation_at_zero_energy() {
        let ex = le_extrapolate(&amo(0.0), 32, 1024, 1e-4, 1 << 14).unwrap();
        assert!((ex.estimate.value - 10f64.ln()).abs() < 5e-3, "{ex:?}");
    }

    #[test]
    fn extrapolation_outside_the_spectrum_is_fast() {
        // Above 2 + λ·sup|v| = 22.
        let ex = le_extrapolate(&amo(25.0), 32, 256, 1e-10, DEFAULT_MAX_N).unwrap();
        assert!(ex.estimate.n <= 4 * 32);
    }

    #[test]
    fn exhausted_schedule_is_no_convergence() {
        let e = le_extrapolate(&amo(0.0), 32, 64, 0.0, 256).unwrap_err();
        assert!(matches!(e, Error::NoConvergence { max_n: 256, .. }));
    }

    #[test]
    fn subadditivity_across_scales() {
        let s = amo(0.9);
        let grid = 1024;
        let l: Vec<f64> = (1..=64).map(|n| finite_le(&s, n, grid).unwrap().value * n as f64).collect();
        for m in 1..=32 {
            for n in 1..=32 {
                assert!(l[m + n - 1] <= l[m - 1] + l[n - 1] + 1e-6, "m={m} n={n}");
            }
        }
    }

    #[test]
    fn ldt_trivial_cases() {
        assert_eq!(ldt_deviation_measure(&ConstantCocycle::diagonal(10.0), 20, 64, 0.99).unwrap(), 0.0);
        assert_eq!(ldt_deviation_measure(&ConstantCocycle::rotation(0.4, 10.0), 20, 64, 0.9).unwrap(), 1.0);
        assert!(ldt_deviation_measure(&amo(0.0), 5, 64, 0.9).is_err());
    }

    #[test]
    fn ldt_fit_recovers_planted_rate() {
        let ln_l = 10f64.ln();
        let pts: Vec<(usize, f64)> = [50, 100, 200].iter().map(|&i| (i, 3.0 * (-0.02 * i as f64 * ln_l).exp())).collect();
        let fit = fit_ldt_decay(&pts, ln_l).unwrap();
        assert!((fit.c - 0.02).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn aligned_chain_has_zero_residual() {
        let mu = 1e3;
        let chain = vec![Mat2::diag(mu); 50];
        let r = ap_verify(&chain, mu, 10.0).unwrap();
        assert!(r.identity_residual < 1e-9);
        assert!(r.holds());
    }

    #[test]
    fn rotation_in_chain_fails_size_condition() {
        let mut chain = vec![Mat2::diag(1e3); 10];
        chain[4] = Mat2::rotation(0.2);
        assert_eq!(ap_verify(&chain, 1e3, 10.0).unwrap_err(), Error::PreconditionFailed { condition: ApCondition::NormFloor, index: 4 });
        assert_eq!(
            ap_verify(&chain[..3], 2.0, 1.0).unwrap_err(),
            Error::PreconditionFailed { condition: ApCondition::NormFloor, index: 0 }
        );
    }

    #[test]
    fn anti_aligned_pair_fails_gap_condition() {
        let mu = 1e3;
        let mut chain = vec![Mat2::diag(mu); 5];
        // diag(μ)·R_{π/2}·diag(μ) collapses the pair norm.
        chain[2] = Mat2::rotation(std::f64::consts::FRAC_PI_2) * Mat2::diag(mu);
        assert!(matches!(ap_verify(&chain, mu, 10.0), Err(Error::PreconditionFailed { condition: ApCondition::AngleGap, .. })));
    }

    proptest! {
        #[test]
        fn random_chains_satisfy_the_bound(thetas in prop::collection::vec(-0.3f64..0.3, 100)) {
            let mu = 1e3;
            let chain: Vec<Mat2> = thetas.iter().map(|&t| Mat2::diag(mu) * Mat2::rotation(t)).collect();
            let r = ap_verify(&chain, mu, 10.0).unwrap();
            prop_assert!(r.holds(), "{:?}", r);
        }

        #[test]
        fn finite_le_is_nonnegative(e in -25.0f64..25.0, n in 1usize..200) {
            let le = finite_le(&amo(e), n, 64).unwrap();
            prop_assert!(le.value >= -1e-10);
        }
    }
}
