//! Spectrum tests, gap edges, resonance metrics, β and point classification.
//!
//! Spectrum membership is never asserted at finite scale. [`uh_certificate`]
//! either certifies uniform hyperbolicity or declines to, and [`ids`] gives an
//! independent eigenvalue-count oracle.

use crate::angle::{critical_ladder, level_profiles, CriticalStructure, IntervalRule, ProfileType, Thresholds};
use crate::arithmetic::Frequency;
use crate::cocycle::{iterate_orbit, Cocycle, CocycleSpec, Direction, EnergyFamily, Form};
use crate::dd::{circle_diff, DoubleDouble, Phase};
use crate::linalg2::{OrbitProduct, ProjectiveAngle, EPS_ROT};
use crate::reduce::par_map;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    UniformlyHyperbolic,
    NotCertified,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::UniformlyHyperbolic => "uniformly_hyperbolic",
            Verdict::NotCertified => "not_certified",
        }
    }
}

/// Thresholds for [`uh_certificate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UhThresholds {
    pub gap_floor: f64,
    pub drift_ceiling: f64,
}

impl Default for UhThresholds {
    fn default() -> Self {
        Self { gap_floor: 1e-12, drift_ceiling: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UhCertificate {
    pub level_pair: (usize, usize),
    /// Minimum of `|s_n − u_n|` in the projective metric.
    pub min_angle_gap: f64,
    /// `sup max(d(s_n, s_{2n}), d(u_n, u_{2n}))`.
    pub direction_drift: f64,
    /// Sign changes of the signed gap `s_n − u_n` near zero.
    pub crossings: usize,
    pub verdict: Verdict,
    pub diagnostic: Option<String>,
}

struct TwoScale {
    gap_n: f64,
    drift: f64,
}

fn two_scale<C: Cocycle + ?Sized>(c: &C, x: f64, n: usize) -> Result<TwoScale> {
    let alpha = c.alpha();
    let run = |step: DoubleDouble, forward: bool| -> Result<(ProjectiveAngle, ProjectiveAngle)> {
        let mut acc = OrbitProduct::identity();
        let mut phase = Phase::new(x);
        let mut first = None;
        for j in 0..2 * n {
            if forward {
                acc.extend(&c.step(phase.value()));
                phase.advance(step);
            } else {
                phase.advance(step);
                acc.extend(&c.step_inverse(phase.value()));
            }
            if j + 1 == n {
                first = Some(acc);
            }
        }
        let first = first.expect("n ≥ 1");
        let floor = EPS_ROT.ln_1p();
        for p in [&first, &acc] {
            if p.log_norm() < floor {
                return Err(Error::NearRotation { norm: p.log_norm().exp() });
            }
        }
        Ok((first.contracted_direction(), acc.contracted_direction()))
    };
    let (s_n, s_2n) = run(alpha, true)?;
    let (u_n, u_2n) = run(-alpha, false)?;
    Ok(TwoScale { gap_n: s_n.signed_diff(u_n), drift: s_n.dist(s_2n).max(u_n.dist(u_2n)) })
}

fn signed_gap<C: Cocycle + ?Sized>(c: &C, x: f64, n: usize) -> Result<f64> {
    let f = iterate_orbit(c, x, n, Direction::Forward);
    let b = iterate_orbit(c, x, n, Direction::Backward);
    let (s, u) = crate::linalg2::orbit_directions(&f, &b)?;
    Ok(s.signed_diff(u))
}

const REFINED_MINIMA: usize = 5;

/// Certifies uniform hyperbolicity from the separation of `s_n`, `u_n` on a
/// phase grid and their stability between scales `n` and `2n`. The deepest
/// grid minima of `|s_n − u_n|` are refined by golden-section search.
pub fn uh_certificate<C: Cocycle + ?Sized>(c: &C, n: usize, grid_size: usize, th: &UhThresholds) -> Result<UhCertificate> {
    if n < 32 {
        return Err(Error::InvalidArgument(format!("n = {n} must be at least 32")));
    }
    if grid_size < 16 {
        return Err(Error::InvalidArgument("grid_size must be at least 16".into()));
    }
    let h = 1.0 / grid_size as f64;
    let rows = par_map(grid_size, |k| two_scale(c, k as f64 * h, n));
    let not_certified = |e: Error, gap: f64, drift: f64| UhCertificate {
        level_pair: (n, 2 * n),
        min_angle_gap: gap,
        direction_drift: drift,
        crossings: 0,
        verdict: Verdict::NotCertified,
        diagnostic: Some(e.to_string()),
    };
    let mut gaps = Vec::with_capacity(grid_size);
    let mut drift: f64 = 0.0;
    for r in rows {
        match r {
            Ok(t) => {
                gaps.push(t.gap_n);
                drift = drift.max(t.drift);
            }
            Err(e) => return Ok(not_certified(e, 0.0, f64::NAN)),
        }
    }
    let crossings = (0..grid_size)
        .filter(|&k| {
            let (a, b) = (gaps[k], gaps[(k + 1) % grid_size]);
            (a > 0.0) != (b > 0.0) && a.abs() < 0.5 && b.abs() < 0.5
        })
        .count();
    let abs: Vec<f64> = gaps.iter().map(|g| g.abs()).collect();
    let mut minima: Vec<usize> =
        (0..grid_size).filter(|&k| abs[k] <= abs[(k + grid_size - 1) % grid_size] && abs[k] <= abs[(k + 1) % grid_size]).collect();
    minima.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    minima.truncate(REFINED_MINIMA);
    let mut min_gap = abs.iter().copied().fold(f64::INFINITY, f64::min);
    if crossings > 0 {
        min_gap = 0.0;
    } else {
        for &k in &minima {
            let x0 = k as f64 * h;
            let f = |x: f64| signed_gap(c, x, n).map(f64::abs);
            match golden_section(x0 - h, x0 + h, 1e-14, &f) {
                Ok(v) => min_gap = min_gap.min(v),
                Err(e) => return Ok(not_certified(e, min_gap, drift)),
            }
        }
    }
    let verdict = if crossings == 0 && min_gap >= th.gap_floor && drift <= th.drift_ceiling {
        Verdict::UniformlyHyperbolic
    } else {
        Verdict::NotCertified
    };
    Ok(UhCertificate { level_pair: (n, 2 * n), min_angle_gap: min_gap, direction_drift: drift, crossings, verdict, diagnostic: None })
}

fn golden_section(mut a: f64, mut b: f64, tol: f64, f: &dyn Fn(f64) -> Result<f64>) -> Result<f64> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    let mut best = f1.min(f2);
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        }
        best = best.min(f1).min(f2);
    }
    Ok(best)
}

/// Integrated density of states: the fraction of eigenvalues below `E` of
/// the Dirichlet truncation to `[0, n)`, averaged over `phases`.
pub fn ids(spec: &CocycleSpec, energy: f64, n: usize, phases: &[f64]) -> Result<f64> {
    if spec.form() != Form::Schrodinger {
        return Err(Error::WrongForm("ids needs the Schrödinger form"));
    }
    if n == 0 || phases.is_empty() {
        return Err(Error::InvalidArgument("n and the phase set must be nonempty".into()));
    }
    let lambda = spec.lambda();
    let alpha = spec.alpha();
    let counts = par_map(phases.len(), |i| {
        let mut phase = Phase::new(phases[i]);
        let mut count = 0usize;
        let mut d = 1.0f64;
        for k in 0..n {
            let diag = lambda * spec.potential().value(phase.value()) - energy;
            d = if k == 0 { diag } else { diag - 1.0 / d };
            if d.abs() < 1e-300 {
                d = 1e-300;
            }
            if d < 0.0 {
                count += 1;
            }
            phase.advance(alpha);
        }
        count
    });
    let total: usize = counts.iter().sum();
    Ok(total as f64 / (n as f64 * phases.len() as f64))
}

/// A maximal run of scan energies over which the IDS stays constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdsPlateau {
    /// Scan point just below the run, or the first point if the run starts the scan.
    pub below: f64,
    pub first: f64,
    pub last: f64,
    /// Scan point just above the run, or the last point if the run ends the scan.
    pub above: f64,
    pub ids: f64,
}

impl IdsPlateau {
    pub fn width(&self) -> f64 {
        self.last - self.first
    }
}

/// Plateaus of the IDS over increasing `energies`: runs of at least two
/// points whose consecutive IDS values differ by at most `quantum`. Gaps of
/// the operator show up as plateaus; the ends of the scan bound two of them.
pub fn ids_plateaus(spec: &CocycleSpec, energies: &[f64], n: usize, phases: &[f64], quantum: f64) -> Result<Vec<IdsPlateau>> {
    if energies.len() < 2 || energies.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("energies must be increasing with at least two points".into()));
    }
    let values = par_map(energies.len(), |i| ids(spec, energies[i], n, phases));
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=energies.len() {
        if i < energies.len() && values[i] - values[i - 1] <= quantum {
            continue;
        }
        if i - 1 > start {
            out.push(IdsPlateau {
                below: energies[start.saturating_sub(1)],
                first: energies[start],
                last: energies[i - 1],
                above: energies[i.min(energies.len() - 1)],
                ids: values[start],
            });
        }
        start = i;
    }
    Ok(out)
}

/// Settings for [`gap_edge_bisect`].
#[derive(Debug, Clone, PartialEq)]
pub struct BisectOptions {
    pub n: usize,
    pub grid_size: usize,
    pub thresholds: UhThresholds,
    /// UH-side probes checked after convergence.
    pub probes: usize,
    /// Not-certified probes tolerated on the UH side.
    pub max_flips: usize,
    /// Truncation length and phases for the IDS cross-check.
    pub ids_check: Option<(usize, Vec<f64>)>,
}

impl Default for BisectOptions {
    fn default() -> Self {
        Self { n: 1024, grid_size: 2048, thresholds: UhThresholds::default(), probes: 4, max_flips: 0, ids_check: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapEdge {
    pub energy: f64,
    /// Final `(E_in, E_out)`.
    pub bracket: (f64, f64),
    pub steps: usize,
    /// IDS at the final UH end and at the original UH end.
    pub ids_pair: Option<(f64, f64)>,
    pub ids_consistent: Option<bool>,
}

/// Bisects between a not-certified energy and a UH energy.
pub fn gap_edge_bisect(family: &CocycleSpec, bracket: (f64, f64), tol: f64, opts: &BisectOptions) -> Result<GapEdge> {
    let (mut e_in, mut e_out) = bracket;
    let verdict = |e: f64| -> Result<Verdict> { Ok(uh_certificate(&family.at(e), opts.n, opts.grid_size, &opts.thresholds)?.verdict) };
    let inconsistent = |lo: f64, hi: f64, reason: &str| Error::InconsistentBracket { lo, hi, reason: reason.into() };
    if verdict(e_in)? != Verdict::NotCertified {
        return Err(inconsistent(e_in, e_out, "inner end is certified UH"));
    }
    if verdict(e_out)? != Verdict::UniformlyHyperbolic {
        return Err(inconsistent(e_in, e_out, "outer end is not certified"));
    }
    let mut steps = 0;
    while (e_out - e_in).abs() > tol {
        let m = 0.5 * (e_in + e_out);
        match verdict(m)? {
            Verdict::UniformlyHyperbolic => e_out = m,
            Verdict::NotCertified => e_in = m,
        }
        steps += 1;
    }
    let mut flips = 0;
    for p in 1..=opts.probes {
        let frac = 0.5f64.powi(p as i32);
        let e = e_out + frac * (bracket.1 - e_out);
        if verdict(e)? != Verdict::UniformlyHyperbolic {
            flips += 1;
        }
    }
    if flips > opts.max_flips {
        return Err(inconsistent(e_in, e_out, &format!("{flips} uncertified probes on the UH side")));
    }
    let (ids_pair, ids_consistent) = match &opts.ids_check {
        Some((n, phases)) => {
            let a = ids(family, e_out, *n, phases)?;
            let b = ids(family, bracket.1, *n, phases)?;
            (Some((a, b)), Some((a - b).abs() <= 1.0 / *n as f64 + 1e-15))
        }
        None => (None, None),
    };
    Ok(GapEdge { energy: 0.5 * (e_in + e_out), bracket: (e_in, e_out), steps, ids_pair, ids_consistent })
}

/// `d_n`, the resonance distance `k_n` and `log‖A_{|k_n|}‖` at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceMetrics {
    pub level: usize,
    /// `c_{n,1} − c_{n,2}`, nearest representative to 0.
    pub d_n: f64,
    /// Smallest `|k|` with `(I_{n,1} + kα) ∩ I_{n,2} ≠ ∅`.
    pub k_n: Option<i64>,
    pub log_norm_kn: Option<f64>,
    /// `‖c_{n,1} + k_nα − c_{n,2}‖`.
    pub offset: Option<f64>,
}

/// Resonance metrics of a level structure; `NoResonanceWithinHorizon` when
/// no `|k| ≤ k_max` brings the intervals together.
pub fn resonance_metrics<C: Cocycle + ?Sized>(c: &C, structure: &CriticalStructure, k_max: u64) -> Result<ResonanceMetrics> {
    let pts = &structure.critical_points;
    if pts.len() != 2 || pts[0] == pts[1] {
        return Err(Error::InvalidArgument("resonance metrics need two distinct critical points".into()));
    }
    let (c1, c2) = (pts[0], pts[1]);
    let d_n = circle_diff(c1, c2);
    let alpha = c.alpha();
    let reach = 2.0 * structure.interval_radius;
    let base = DoubleDouble::from_f64(c1) - DoubleDouble::from_f64(c2);
    let mut plus = Phase::from_dd(base + alpha);
    let mut minus = Phase::from_dd(base - alpha);
    for k in 1..=k_max {
        for (sign, p) in [(1i64, &plus), (-1i64, &minus)] {
            let off = p.dd().centered().to_f64().abs();
            if off <= reach {
                let k_n = sign * k as i64;
                let x = if k_n > 0 { c1 } else { c2 };
                let log_norm = iterate_orbit(c, x, k as usize, Direction::Forward).log_norm();
                return Ok(ResonanceMetrics {
                    level: structure.level,
                    d_n,
                    k_n: Some(k_n),
                    log_norm_kn: Some(log_norm),
                    offset: Some(off),
                });
            }
        }
        plus.advance(alpha);
        minus.advance(-alpha);
    }
    Err(Error::NoResonanceWithinHorizon { k_max })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaEstimate {
    pub value: f64,
    pub scales_used: Vec<usize>,
    pub per_scale_terms: Vec<f64>,
    /// No level showed a resonance.
    pub resonance_absent: bool,
}

/// `½ + log‖A_{k_n}‖ / (2·log(1/offset))` for one level.
pub fn beta_term(m: &ResonanceMetrics) -> Option<f64> {
    let (ln, off) = (m.log_norm_kn?, m.offset?);
    if off <= 0.0 {
        return Some(0.5);
    }
    Some(0.5 + ln / (2.0 * (1.0 / off).ln()))
}

/// Finite-scale β from per-level metrics: the minimum of the terms and 1,
/// clamped to `[½, 1]`.
pub fn beta_from_metrics(metrics: &[ResonanceMetrics]) -> BetaEstimate {
    let mut scales = Vec::new();
    let mut terms = Vec::new();
    for m in metrics {
        if let Some(t) = beta_term(m) {
            scales.push(m.level);
            terms.push(t);
        }
    }
    let value = terms.iter().copied().fold(1.0f64, f64::min).clamp(0.5, 1.0);
    BetaEstimate { value, resonance_absent: terms.is_empty(), scales_used: scales, per_scale_terms: terms }
}

/// β over the given level structures. `k_max` defaults to each level's
/// return-time floor `q_{N+n−1}`.
pub fn beta_indicator<C: Cocycle + ?Sized>(c: &C, structures: &[CriticalStructure], k_max: Option<u64>) -> Result<BetaEstimate> {
    if structures.len() < 3 {
        return Err(Error::InsufficientData { usable: structures.len(), needed: 3 });
    }
    let mut metrics = Vec::new();
    for s in structures {
        match resonance_metrics(c, s, k_max.unwrap_or(s.floor)) {
            Ok(m) => metrics.push(m),
            Err(Error::NoResonanceWithinHorizon { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(beta_from_metrics(&metrics))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    EpLike,
    FrLike,
    Undetermined,
}

impl PointClass {
    pub fn label(self) -> &'static str {
        match self {
            PointClass::EpLike => "EP_like",
            PointClass::FrLike => "FR_like",
            PointClass::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyOptions {
    pub levels: usize,
    /// First level whose profile type is inspected.
    pub threshold_level: usize,
    /// Minima below this are treated as already zero when checking decay.
    pub noise_floor: f64,
    /// Required contraction of `min |g_n|` between consecutive levels.
    pub decay_ratio: f64,
    pub samples: usize,
    pub thresholds: Thresholds,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { levels: 3, threshold_level: 2, noise_floor: 1e-10, decay_ratio: 0.5, samples: 1025, thresholds: Thresholds::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointAnalysis {
    pub class: PointClass,
    pub structures: Vec<CriticalStructure>,
    /// Profile types of `g_n` for `n = 2..=levels`.
    pub profile_types: Vec<Vec<ProfileType>>,
    /// `min |g_n|` over the critical intervals, `n = 1..=levels`.
    pub min_angles: Vec<f64>,
    pub failure: Option<String>,
}

/// Finite-scale EP/FR classification. EP-like: profiles of type II or III
/// from the threshold level on and `min |g_n|` decaying across those levels.
/// FR-like: type I profiles from the threshold level on.
pub fn classify_point<C: Cocycle>(c: &C, freq: &Frequency, rule: &IntervalRule, opts: &ClassifyOptions) -> PointAnalysis {
    let mut out = PointAnalysis {
        class: PointClass::Undetermined,
        structures: Vec::new(),
        profile_types: Vec::new(),
        min_angles: Vec::new(),
        failure: None,
    };
    let thr = opts.threshold_level.max(2);
    if opts.levels < thr + 1 {
        out.failure = Some(format!("need at least {} levels", thr + 1));
        return out;
    }
    let run = |out: &mut PointAnalysis| -> Result<()> {
        out.structures = critical_ladder(c, freq, rule, opts.levels)?;
        out.min_angles = out.structures.iter().map(|s| s.min_abs_angle.iter().copied().fold(f64::INFINITY, f64::min)).collect();
        for prev in &out.structures[..opts.levels - 1] {
            let p = level_profiles(c, prev, opts.samples, &opts.thresholds)?;
            out.profile_types.push(p.iter().map(|p| p.classification).collect());
        }
        Ok(())
    };
    if let Err(e) = run(&mut out) {
        out.failure = Some(e.to_string());
        return out;
    }
    let inspected = &out.profile_types[thr - 2..];
    let all_tangent = inspected.iter().all(|v| v.iter().all(|t| matches!(t, ProfileType::II | ProfileType::III)));
    let all_type_one = inspected.iter().all(|v| v.iter().all(|t| t.is_type_one()));
    let mins = &out.min_angles[thr - 1..];
    let decays = mins.windows(2).all(|w| w[1] <= opts.decay_ratio * w[0] || w[1].max(w[0]) <= opts.noise_floor);
    out.class = if all_tangent && decays {
        PointClass::EpLike
    } else if all_type_one {
        PointClass::FrLike
    } else {
        PointClass::Undetermined
    };
    out
}

/// One row of the spectrum CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub energy: f64,
    pub n: usize,
    pub verdict: Verdict,
    pub min_angle_gap: f64,
    pub ids: Option<f64>,
    pub d_n: Option<f64>,
    pub k_n: Option<i64>,
    pub beta: Option<f64>,
}

pub const SPECTRUM_CSV_HEADER: &str = "E,n,verdict,min_angle_gap,ids,d_n,k_n,beta";

impl SpectrumRow {
    pub fn to_csv(&self) -> String {
        fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        format!(
            "{:.17e},{},{},{:.6e},{},{},{},{}",
            self.energy,
            self.n,
            self.verdict.label(),
            self.min_angle_gap,
            opt(self.ids),
            opt(self.d_n),
            opt(self.k_n),
            opt(self.beta)
        )
    }
}
