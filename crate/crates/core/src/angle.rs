//! Angle functions, critical points, return times and profile types.
//!
//! At level 1 the angle function is `g_1(x) = arctan(t − v(x))`. At level
//! `n ≥ 2` it is `g_n(x) = s_r(x) − u_r(x)` with `r = r_{n−1}` the return time
//! of the level-`(n−1)` critical intervals, where `s_r` is the most contracted
//! direction of `A_r(x)` and `u_r` that of `A_{−r}(x)`. Zeros of `g_n` mark
//! near-tangencies of the finite-scale stable and unstable directions.

use std::f64::consts::PI;

use crate::arithmetic::Frequency;
use crate::cocycle::{iterate_orbit, Cocycle, Direction};
use crate::dd::{circle_diff, DoubleDouble, Phase};
use crate::linalg2::{orbit_directions, wrap_half_pi};
use crate::reduce::par_map;
use crate::{Error, Result};

/// `s[A_fwd(x)] − s[A_{−bwd}(x)]` in `(−π/2, π/2]`.
pub fn angle_gap<C: Cocycle + ?Sized>(c: &C, x: f64, fwd_len: usize, bwd_len: usize) -> Result<f64> {
    if fwd_len == 0 || bwd_len == 0 {
        return Err(Error::InvalidArgument("orbit lengths must be positive".into()));
    }
    let f = iterate_orbit(c, x, fwd_len, Direction::Forward);
    let b = iterate_orbit(c, x, bwd_len, Direction::Backward);
    let (s, u) = orbit_directions(&f, &b)?;
    Ok(s.signed_diff(u))
}

/// `g_level(x)`, where `return_time` is `r_{level−1}` (ignored at level 1).
pub fn level_angle<C: Cocycle + ?Sized>(c: &C, x: f64, level: usize, return_time: u64) -> Result<f64> {
    if level <= 1 {
        if let Some(g) = c.first_angle(x) {
            return Ok(g);
        }
        return angle_gap(c, x, 1, 1);
    }
    angle_gap(c, x, return_time as usize, return_time as usize)
}

/// Critical-interval radius `2^{−n}·q_{N+n−1}^{−2τ}` (or `q^{−C}` with an
/// exponent override) and return-time floor `q_{N+n−1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalRule {
    pub n_base: usize,
    pub tau: f64,
    pub exponent: Option<f64>,
}

impl IntervalRule {
    pub fn new(n_base: usize, tau: f64) -> Self {
        Self { n_base, tau, exponent: None }
    }

    fn scale_index(&self, level: usize) -> usize {
        self.n_base + level - 1
    }

    pub fn floor(&self, freq: &Frequency, level: usize) -> Result<u64> {
        let k = self.scale_index(level);
        if k > freq.depth() {
            return Err(Error::DepthExceeded { requested: k, supported: freq.depth() });
        }
        Ok(freq.q(k))
    }

    pub fn radius(&self, freq: &Frequency, level: usize) -> Result<f64> {
        let q = self.floor(freq, level)? as f64;
        let e = self.exponent.unwrap_or(2.0 * self.tau);
        Ok(0.5f64.powi(level as i32) * q.powf(-e))
    }
}

/// Critical points and intervals at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalStructure {
    pub level: usize,
    /// `c_{n,1}, c_{n,2}`; equal when the two minima merge.
    pub critical_points: Vec<f64>,
    /// `|I_{n,j}|/2`.
    pub interval_radius: f64,
    /// `min |g_n|` on each level-`(n−1)` interval.
    pub min_abs_angle: Vec<f64>,
    /// `r_{n−1}`, the orbit length defining `g_n` (1 at level 1).
    pub angle_return: u64,
    /// `q_{N+n−1}`.
    pub floor: u64,
    /// `r_n`: first `j ≥ floor` with `(I_n + jα) ∩ I_n ≠ ∅`.
    pub return_time: u64,
}

/// Default cap on return-time scans.
pub const DEFAULT_RETURN_CAP: u64 = 50_000_000;

const COARSE_POINTS: usize = 1025;
const LEVEL_ONE_POINTS: usize = 4096;
const PHASE_TOL: f64 = 1e-14;

/// Golden-section minimization of `f` on `[a, b]`.
fn golden_min(mut a: f64, mut b: f64, tol: f64, f: &dyn Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
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
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

/// Critical structure at `prev.level + 1`, or level 1 when `prev` is `None`.
pub fn find_critical_points<C: Cocycle>(
    c: &C,
    freq: &Frequency,
    rule: &IntervalRule,
    prev: Option<&CriticalStructure>,
) -> Result<CriticalStructure> {
    let level = prev.map_or(1, |p| p.level + 1);
    let interval_radius = rule.radius(freq, level)?;
    let floor = rule.floor(freq, level)?;
    let (points, mins, angle_return) = match prev {
        None => {
            let (p, m) = level_one_minima(c)?;
            (p, m, 1)
        }
        Some(p) => {
            let r = p.return_time;
            let g = |x: f64| level_angle(c, x, level, r).map(f64::abs);
            let mut pts = Vec::new();
            let mut mins = Vec::new();
            for (j, &center) in p.critical_points.iter().enumerate() {
                let lo = center - p.interval_radius;
                let h = 2.0 * p.interval_radius / (COARSE_POINTS - 1) as f64;
                let vals = par_map(COARSE_POINTS, |k| g(lo + k as f64 * h));
                let vals = vals.into_iter().collect::<Result<Vec<f64>>>()?;
                let k = argmin(&vals);
                if k == 0 || k == COARSE_POINTS - 1 {
                    return Err(Error::UnresolvedMinimum { level, interval: j });
                }
                let (a, b) = (lo + (k - 1) as f64 * h, lo + (k + 1) as f64 * h);
                let (x, v) = golden_min(a, b, PHASE_TOL, &g)?;
                let (x, v) = if v <= vals[k] { (x, v) } else { (lo + k as f64 * h, vals[k]) };
                pts.push(x.rem_euclid(1.0));
                mins.push(v);
            }
            (pts, mins, r)
        }
    };
    let return_time = structure_return_time(c.alpha(), &points, interval_radius, floor, DEFAULT_RETURN_CAP)?;
    Ok(CriticalStructure { level, critical_points: points, interval_radius, min_abs_angle: mins, angle_return, floor, return_time })
}

fn argmin(v: &[f64]) -> usize {
    let mut k = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[k] {
            k = i;
        }
    }
    k
}

/// The two deepest local minima of `|g_1|` on the circle.
fn level_one_minima<C: Cocycle>(c: &C) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = LEVEL_ONE_POINTS;
    let h = 1.0 / n as f64;
    let g = |x: f64| level_angle(c, x, 1, 1).map(f64::abs);
    let vals = par_map(n, |k| g(k as f64 * h)).into_iter().collect::<Result<Vec<f64>>>()?;
    let mut minima: Vec<usize> = (0..n).filter(|&k| vals[k] <= vals[(k + n - 1) % n] && vals[k] < vals[(k + 1) % n]).collect();
    minima.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    minima.truncate(2);
    if minima.is_empty() {
        return Err(Error::UnresolvedMinimum { level: 1, interval: 0 });
    }
    let mut pts = Vec::new();
    let mut mins = Vec::new();
    for &k in &minima {
        let x0 = k as f64 * h;
        let (x, v) = golden_min(x0 - h, x0 + h, PHASE_TOL, &g)?;
        pts.push(x.rem_euclid(1.0));
        mins.push(v);
    }
    if pts.len() == 1 {
        pts.push(pts[0]);
        mins.push(mins[0]);
    }
    // Order by phase so c_{n,1} < c_{n,2}.
    if pts[0] > pts[1] {
        pts.swap(0, 1);
        mins.swap(0, 1);
    }
    Ok((pts, mins))
}

/// Structures for levels `1..=levels`.
pub fn critical_ladder<C: Cocycle>(c: &C, freq: &Frequency, rule: &IntervalRule, levels: usize) -> Result<Vec<CriticalStructure>> {
    let mut out: Vec<CriticalStructure> = Vec::with_capacity(levels);
    for _ in 0..levels {
        let next = find_critical_points(c, freq, rule, out.last())?;
        out.push(next);
    }
    Ok(out)
}

/// First `j ≥ floor` such that some `I_{n,i} + jα` meets some `I_{n,k}`.
pub fn structure_return_time(alpha: DoubleDouble, points: &[f64], radius: f64, floor: u64, cap: u64) -> Result<u64> {
    let floor = floor.max(1);
    let mut offsets: Vec<Phase> = Vec::new();
    for &a in points {
        for &b in points {
            let start = DoubleDouble::from_f64(a) - DoubleDouble::from_f64(b) + alpha.mul_int(floor as i64);
            offsets.push(Phase::from_dd(start));
        }
    }
    let reach = 2.0 * radius;
    for j in floor..=cap {
        for p in offsets.iter_mut() {
            let v = p.value();
            if v <= reach || 1.0 - v <= reach {
                return Ok(j);
            }
            p.advance(alpha);
        }
    }
    Err(Error::CapExceeded { cap })
}

/// First forward and backward return times of a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReturnTimes {
    pub forward: u64,
    pub backward: u64,
    pub floor: u64,
}

/// First `j ≥ floor` with `x ± jα` inside one of the structure's intervals.
pub fn return_times(alpha: DoubleDouble, x: f64, structure: &CriticalStructure, floor: u64, cap: u64) -> Result<ReturnTimes> {
    let inside = |y: f64| structure.critical_points.iter().any(|&c| circle_diff(y, c).abs() <= structure.interval_radius);
    let scan = |step: DoubleDouble| -> Result<u64> {
        let floor = floor.max(1);
        let mut p = Phase::from_dd(DoubleDouble::from_f64(x) + step.mul_int(floor as i64));
        for j in floor..=cap {
            if inside(p.value()) {
                return Ok(j);
            }
            p.advance(step);
        }
        Err(Error::CapExceeded { cap })
    };
    Ok(ReturnTimes { forward: scan(alpha)?, backward: scan(-alpha)?, floor })
}

/// Shape of an angle function on a critical interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileType {
    /// Single monotone crossing with positive slope.
    IPlus,
    /// Single monotone crossing with negative slope.
    IMinus,
    /// Tangency shape: one interior critical point, at most two zeros.
    II,
    /// A near-π pulse on top of a monotone trend.
    III,
    Unresolved,
}

impl ProfileType {
    pub fn is_type_one(self) -> bool {
        matches!(self, ProfileType::IPlus | ProfileType::IMinus)
    }

    pub fn label(self) -> &'static str {
        match self {
            ProfileType::IPlus => "I+",
            ProfileType::IMinus => "I-",
            ProfileType::II => "II",
            ProfileType::III => "III",
            ProfileType::Unresolved => "unresolved",
        }
    }
}

/// Classification thresholds. The floors default to `r²` and `c·r³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub c: f64,
    pub pulse_depth: f64,
    pub deriv_floor: Option<f64>,
    pub curvature_floor: Option<f64>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { c: 0.1, pulse_depth: 0.75 * PI, deriv_floor: None, curvature_floor: None }
    }
}

impl Thresholds {
    pub fn deriv_floor(&self, r: f64) -> f64 {
        self.deriv_floor.unwrap_or(r * r)
    }

    pub fn curvature_floor(&self, r: f64) -> f64 {
        self.curvature_floor.unwrap_or(self.c * r * r * r)
    }
}

/// A sampled angle function, lifted from RP¹ to the reals by continuity.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleProfile {
    pub level: usize,
    /// `(phase, lifted angle)`, sorted by phase.
    pub samples: Vec<(f64, f64)>,
    pub classification: ProfileType,
    pub zero_count: usize,
    pub derivative_floor: f64,
}

const MAX_PROFILE_SAMPLES: usize = 40_000;

impl AngleProfile {
    /// Samples `f` (any representative mod π) on `[lo, hi]` at `n` uniform
    /// points, lifts the values by continuity starting from the lift nearest
    /// `seed`, and inserts extra points where the second difference is
    /// anomalously large so that narrow pulses are resolved.
    pub fn sample(f: &(dyn Fn(f64) -> Result<f64> + Sync), lo: f64, hi: f64, n: usize, seed: f64, level: usize) -> Result<Self> {
        let n = n.max(3);
        let h = (hi - lo) / (n - 1) as f64;
        let xs: Vec<f64> = (0..n).map(|k| lo + k as f64 * h).collect();
        let vs = par_map(n, |k| f(xs[k])).into_iter().collect::<Result<Vec<f64>>>()?;
        let mut pts: Vec<(f64, f64)> = xs.into_iter().zip(vs).collect();
        let min_gap = (hi - lo) * 1e-10;
        let rel = |a: f64, b: f64| wrap_half_pi(b - a);
        for _ in 0..40 {
            if pts.len() >= MAX_PROFILE_SAMPLES {
                break;
            }
            let d2: Vec<f64> = (1..pts.len() - 1).map(|i| (rel(pts[i].1, pts[i + 1].1) - rel(pts[i - 1].1, pts[i].1)).abs()).collect();
            let mut sorted = d2.clone();
            sorted.sort_by(f64::total_cmp);
            let median = sorted[sorted.len() / 2];
            let cut = (20.0 * median).max(1e-9);
            let mut new_x = Vec::new();
            for (i, &d) in d2.iter().enumerate() {
                if d > cut {
                    let k = i + 1;
                    for (a, b) in [(k - 1, k), (k, k + 1)] {
                        if pts[b].0 - pts[a].0 > min_gap {
                            new_x.push(0.5 * (pts[a].0 + pts[b].0));
                        }
                    }
                }
            }
            new_x.sort_by(f64::total_cmp);
            new_x.dedup();
            new_x.truncate(MAX_PROFILE_SAMPLES.saturating_sub(pts.len()));
            if new_x.is_empty() {
                break;
            }
            let new_v = par_map(new_x.len(), |k| f(new_x[k])).into_iter().collect::<Result<Vec<f64>>>()?;
            pts.extend(new_x.into_iter().zip(new_v));
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        let mut lifted = Vec::with_capacity(pts.len());
        let mut prev = seed + wrap_half_pi(pts[0].1 - seed);
        lifted.push((pts[0].0, prev));
        for &(x, v) in &pts[1..] {
            prev += wrap_half_pi(v - prev);
            lifted.push((x, prev));
        }
        let zero_count = count_sign_changes(lifted.iter().map(|p| p.1));
        Ok(Self { level, samples: lifted, classification: ProfileType::Unresolved, zero_count, derivative_floor: 0.0 })
    }

    /// `(phase, angle, level)` rows for plotting.
    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        for (x, g) in &self.samples {
            s.push_str(&format!("{x:.17e},{g:.17e},{}\n", self.level));
        }
        s
    }
}

fn count_sign_changes(vals: impl Iterator<Item = f64>) -> usize {
    let mut count = 0;
    let mut last = 0.0f64;
    for v in vals {
        if v == 0.0 {
            continue;
        }
        if last != 0.0 && (v > 0.0) != (last > 0.0) {
            count += 1;
        }
        last = v;
    }
    count
}

struct Derivatives {
    first: Vec<f64>,
    second: Vec<f64>,
}

fn derivatives(s: &[(f64, f64)]) -> Derivatives {
    let n = s.len();
    let slope = |i: usize, j: usize| (s[j].1 - s[i].1) / (s[j].0 - s[i].0);
    let first: Vec<f64> = (0..n)
        .map(|i| match i {
            0 => slope(0, 1),
            _ if i == n - 1 => slope(n - 2, n - 1),
            _ => slope(i - 1, i + 1),
        })
        .collect();
    let second: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            if a == b {
                0.0
            } else {
                (first[b] - first[a]) / (s[b].0 - s[a].0)
            }
        })
        .collect();
    Derivatives { first, second }
}

/// Classifies a lifted profile on an interval of half-width `radius`.
pub fn classify_profile(profile: &AngleProfile, radius: f64, th: &Thresholds) -> ProfileType {
    let s = &profile.samples;
    if s.len() < 257 {
        return ProfileType::Unresolved;
    }
    let (lo, hi) = (s[0].0, s[s.len() - 1].0);
    let window = (hi - lo) / 8.0;

    // Type III: a localized jump of nearly π.
    let mut j = 0;
    let mut max_jump: f64 = 0.0;
    for i in 0..s.len() {
        if j < i {
            j = i;
        }
        while j + 1 < s.len() && s[j + 1].0 - s[i].0 <= window {
            j += 1;
        }
        max_jump = max_jump.max((s[j].1 - s[i].1).abs());
    }
    if max_jump >= th.pulse_depth {
        return ProfileType::III;
    }

    let d = derivatives(s);
    let scale = d.first.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let significant: Vec<(usize, bool)> =
        d.first.iter().enumerate().filter(|(_, v)| v.abs() > 1e-9 * scale).map(|(i, v)| (i, *v > 0.0)).collect();
    let mut crit = Vec::new();
    for w in significant.windows(2) {
        if w[0].1 != w[1].1 {
            crit.push(w[1].0);
        }
    }
    let zeros: Vec<usize> = (0..s.len() - 1).filter(|&i| (s[i].1 > 0.0) != (s[i + 1].1 > 0.0)).collect();
    let deriv_floor = th.deriv_floor(radius);

    if zeros.len() == 1 && crit.len() <= 1 {
        let i = zeros[0];
        let t = s[i].1 / (s[i].1 - s[i + 1].1);
        let x0 = s[i].0 + t * (s[i + 1].0 - s[i].0);
        let slope = (s[i + 1].1 - s[i].1) / (s[i + 1].0 - s[i].0);
        let crit_near = crit.iter().any(|&k| (s[k].0 - x0).abs() < radius / 2.0);
        if slope.abs() >= deriv_floor && !crit_near {
            return if slope > 0.0 { ProfileType::IPlus } else { ProfileType::IMinus };
        }
    }
    if crit.len() == 1 && zeros.len() <= 2 {
        let k = crit[0];
        if d.second[k].abs() >= th.curvature_floor(radius) {
            return ProfileType::II;
        }
    }
    ProfileType::Unresolved
}

/// Profiles of `g_{prev.level+1}` on the intervals of `prev`, classified.
pub fn level_profiles<C: Cocycle>(c: &C, prev: &CriticalStructure, samples: usize, th: &Thresholds) -> Result<Vec<AngleProfile>> {
    let level = prev.level + 1;
    let r = prev.return_time;
    let g = |x: f64| level_angle(c, x, level, r);
    let mut out = Vec::new();
    for &center in &prev.critical_points {
        let (lo, hi) = (center - prev.interval_radius, center + prev.interval_radius);
        let seed = level_angle(c, lo, prev.level, prev.angle_return)?;
        let mut p = AngleProfile::sample(&g, lo, hi, samples, seed, level)?;
        p.derivative_floor = th.deriv_floor(prev.interval_radius);
        p.classification = classify_profile(&p, prev.interval_radius, th);
        out.push(p);
    }
    Ok(out)
}

/// Inputs of the sensitivity formulas for `diag(λ₁)·R_θ·diag(λ₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityInputs {
    pub lambda1: f64,
    pub lambda2: f64,
    pub theta: f64,
}

/// Logarithmic derivatives of `‖diag(λ₁,1/λ₁)·R_θ·diag(λ₂,1/λ₂)‖` and `W`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivities {
    pub dtheta_ratio: f64,
    pub dlam1_ratio: f64,
    pub dlam2_ratio: f64,
    pub w: f64,
}

/// `diag(λ₁,1/λ₁)·R_θ·diag(λ₂,1/λ₂)`.
pub fn sandwich_matrix(inp: &SensitivityInputs) -> crate::linalg2::Mat2 {
    use crate::linalg2::Mat2;
    Mat2::diag(inp.lambda1) * Mat2::rotation(inp.theta) * Mat2::diag(inp.lambda2)
}

/// Closed forms of `∂_θ‖A‖/‖A‖`, `∂_{λ₁}‖A‖/‖A‖`, `∂_{λ₂}‖A‖/‖A‖` and
/// `W = |cot θ|/(cot²θ + λ₁⁻⁴ + λ₂⁻⁴)`.
///
/// The θ-derivative carries the sign `−sgn(tan θ)` and the λ-derivatives the
/// sign `sgn(tan θ)`; both agree with finite differences on all of `(0, π)`.
pub fn lemma6_sensitivities(inp: &SensitivityInputs) -> Result<Sensitivities> {
    let SensitivityInputs { lambda1, lambda2, theta } = *inp;
    if !(lambda1 > 1.0 && lambda2 > 1.0) {
        return Err(Error::InvalidArgument("lambda1 and lambda2 must exceed 1".into()));
    }
    let (sn, cs) = theta.sin_cos();
    if sn.abs() < 1e-12 || cs.abs() < 1e-12 {
        return Err(Error::AngleSingularity { theta });
    }
    let (tan, cot) = (sn / cs, cs / sn);
    let a = lambda1.powi(-4);
    let b = lambda2.powi(-4);
    let ab = a * b;
    let den = ((1.0 - ab).powi(2) * cot * cot + (a - b).powi(2) * tan * tan + 2.0 * (1.0 + ab) * (a + b) - 8.0 * ab).sqrt();
    let sgn = tan.signum();
    Ok(Sensitivities {
        dtheta_ratio: -sgn * (1.0 - a) * (1.0 - b) / den,
        dlam1_ratio: sgn / lambda1 * ((1.0 - ab) * cot + (b - a) * tan) / den,
        dlam2_ratio: sgn / lambda2 * ((1.0 - ab) * cot + (a - b) * tan) / den,
        w: cot.abs() / (cot * cot + a + b),
    })
}

/// Both sides of `‖A‖² + ‖A‖⁻² = (λ₁²λ₂² + λ₁⁻²λ₂⁻²)cos²θ + (λ₁²λ₂⁻² + λ₁⁻²λ₂²)sin²θ`.
pub fn norm_identity_sides(inp: &SensitivityInputs) -> Result<(f64, f64)> {
    let n = crate::linalg2::norm_sl2(&sandwich_matrix(inp))?;
    let (l1, l2) = (inp.lambda1 * inp.lambda1, inp.lambda2 * inp.lambda2);
    let (sn, cs) = inp.theta.sin_cos();
    let rhs = (l1 * l2 + 1.0 / (l1 * l2)) * cs * cs + (l1 / l2 + l2 / l1) * sn * sn;
    Ok((n * n + 1.0 / (n * n), rhs))
}

/// Lower and upper bounds on `|∂_θ‖A‖/‖A‖|` in terms of `W`.
pub fn sandwich_bounds(inp: &SensitivityInputs) -> Result<(f64, f64)> {
    let s = lemma6_sensitivities(inp)?;
    let a = inp.lambda1.powi(-4);
    let b = inp.lambda2.powi(-4);
    let tan = inp.theta.tan();
    let lower = (1.0 - 6.0 * a - 6.0 * b) * s.w;
    let upper = (1.0 + 6.0 * a + 6.0 * b) * (tan * tan * (a + b).sqrt() / 2.0 + s.w);
    Ok((lower, upper))
}
