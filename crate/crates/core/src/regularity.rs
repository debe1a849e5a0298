//! Local Hölder exponents of `L(E)` by one-sided log-log regression.

use std::f64::consts::TAU;

use crate::cocycle::{Cocycle, EnergyFamily};
use crate::lyapunov::{le_difference_extrapolate, le_extrapolate, le_via_strip, least_squares, Ladder, StripEstimate};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Above,
    Below,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Above => 1.0,
            Side::Below => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::Above => "above",
            Side::Below => "below",
        }
    }
}

/// How `L` is evaluated along a profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeEstimator {
    /// Paired doubling extrapolation of `L(E) − L(E₀)`.
    Extrapolated,
    /// `L_ε − 2πωε` on the complexified strip (see [`le_via_strip`]); `eps = 0`
    /// is the aligned real estimate, suited to uniformly hyperbolic energies.
    Strip { eps: f64, burn_in: usize },
}

/// Estimator settings shared by every energy of a profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeSettings {
    pub n0: usize,
    pub grid_size: usize,
    pub tol: f64,
    pub max_n: usize,
    pub estimator: LeEstimator,
}

impl Default for LeSettings {
    fn default() -> Self {
        Self { n0: 256, grid_size: 8192, tol: 1e-7, max_n: 1 << 16, estimator: LeEstimator::Extrapolated }
    }
}

/// Delta must exceed the noise floor by this factor to enter a fit.
pub const NOISE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePoint {
    pub offset: f64,
    pub energy: f64,
    /// `|L(E) − L(E₀)|`, absent when the extrapolation failed.
    pub delta: Option<f64>,
    /// Larger of the two extrapolation error hints.
    pub noise: f64,
    pub used: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeProfile {
    pub center: f64,
    pub side: Side,
    pub l_center: f64,
    /// Extrapolation disagreement of `l_center`; may exceed the tolerance,
    /// since deltas do not depend on it.
    pub l_center_error: f64,
    pub points: Vec<ProfilePoint>,
}

/// Geometric offsets `max·ratio^k` down to `min`.
pub fn geometric_offsets(max: f64, min: f64, ratio: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut o = max;
    while o >= min * (1.0 - 1e-12) {
        out.push(o);
        o *= ratio;
    }
    out
}

/// Halving offsets from `10⁻³` down to `10⁻⁸`.
pub fn default_offsets() -> Vec<f64> {
    geometric_offsets(1e-3, 1e-8, 0.5)
}

fn check_offsets(offsets: &[f64]) -> Result<()> {
    if offsets.is_empty() || offsets.iter().any(|&o| !(o > 0.0)) {
        return Err(Error::InvalidArgument("offsets must be positive and nonempty".into()));
    }
    if offsets.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("offsets must be strictly decreasing".into()));
    }
    Ok(())
}

/// `L(E₀)` and `|L(E₀ ± offset) − L(E₀)|` for each offset, all at the
/// shared settings. A point whose estimate fails is kept, flagged and
/// excluded from fits.
pub fn le_profile<F: EnergyFamily>(family: &F, center: f64, side: Side, offsets: &[f64], s: &LeSettings) -> Result<LeProfile> {
    check_offsets(offsets)?;
    match s.estimator {
        LeEstimator::Extrapolated => extrapolated_profile(family, center, side, offsets, s),
        LeEstimator::Strip { eps, burn_in } => strip_profile(family, center, side, offsets, s.grid_size, eps, burn_in),
    }
}

fn failed_point(offset: f64, energy: f64, e: Error) -> ProfilePoint {
    ProfilePoint { offset, energy, delta: None, noise: f64::NAN, used: false, failure: Some(e.to_string()) }
}

fn measured_point(offset: f64, energy: f64, delta: f64, noise: f64) -> ProfilePoint {
    ProfilePoint { offset, energy, delta: Some(delta), noise, used: delta > NOISE_FACTOR * noise, failure: None }
}

fn extrapolated_profile<F: EnergyFamily>(family: &F, center: f64, side: Side, offsets: &[f64], s: &LeSettings) -> Result<LeProfile> {
    let base = family.at(center);
    let (l_center, l_center_error) = match le_extrapolate(&base, s.n0, s.grid_size, s.tol, s.max_n) {
        Ok(x) => (x.estimate.value, x.estimate.error_hint),
        Err(Error::NoConvergence { .. }) => {
            let mut ladder = Ladder::new(&base, s.grid_size);
            let (half, full) = (ladder.advance_to(s.max_n / 2), ladder.advance_to(s.max_n));
            (full, (full - half).abs())
        }
        Err(e) => return Err(e),
    };
    let mut points = Vec::with_capacity(offsets.len());
    for &offset in offsets {
        let energy = center + side.sign() * offset;
        points.push(match le_difference_extrapolate(&base, &family.at(energy), s.n0, s.grid_size, s.tol, s.max_n) {
            Ok(d) => measured_point(offset, energy, d.value.abs(), d.error_hint),
            Err(e @ Error::NoConvergence { .. }) => failed_point(offset, energy, e),
            Err(e) => return Err(e),
        });
    }
    Ok(LeProfile { center, side, l_center, l_center_error, points })
}

fn strip_profile<F: EnergyFamily>(
    family: &F,
    center: f64,
    side: Side,
    offsets: &[f64],
    grid_size: usize,
    eps: f64,
    burn_in: usize,
) -> Result<LeProfile> {
    let estimate = |energy: f64| -> Result<StripEstimate> {
        let member = family.at(energy);
        let spec = member.as_spec().ok_or_else(|| Error::InvalidArgument("the strip estimator needs a cocycle specification".into()))?;
        le_via_strip(spec, eps, grid_size, burn_in)
    };
    let l0 = estimate(center)?;
    let mut points = Vec::with_capacity(offsets.len());
    for &offset in offsets {
        let energy = center + side.sign() * offset;
        points.push(match estimate(energy) {
            Ok(x) if x.acceleration != l0.acceleration => {
                failed_point(offset, energy, Error::NotAffine { slope_defect: TAU * (x.acceleration - l0.acceleration) as f64 })
            }
            Ok(x) => measured_point(offset, energy, (x.value - l0.value).abs(), x.error_hint.max(l0.error_hint)),
            Err(e @ Error::NotAffine { .. }) => failed_point(offset, energy, e),
            Err(e) => return Err(e),
        });
    }
    Ok(LeProfile { center, side, l_center: l0.value, l_center_error: l0.error_hint, points })
}

impl LeProfile {
    /// `offset,delta,used` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("offset,delta,used\n");
        for p in &self.points {
            let d = p.delta.map(|d| format!("{d:.17e}")).unwrap_or_default();
            s.push_str(&format!("{:.17e},{d},{}\n", p.offset, p.used as u8));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityFit {
    pub center: f64,
    pub side: Side,
    pub offsets: Vec<f64>,
    pub deltas: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// RMS error of the fit in log space.
    pub residual: f64,
    pub usable_window: (f64, f64),
}

const MIN_FIT_POINTS: usize = 5;

/// Fit over all usable points of the profile.
pub fn holder_fit(profile: &LeProfile) -> Result<RegularityFit> {
    holder_fit_window(profile, (0.0, f64::INFINITY))
}

/// Fit over usable points with `lo ≤ offset ≤ hi`.
pub fn holder_fit_window(profile: &LeProfile, (lo, hi): (f64, f64)) -> Result<RegularityFit> {
    let pairs: Vec<(f64, f64)> = profile
        .points
        .iter()
        .filter(|p| p.used && p.offset >= lo * (1.0 - 1e-12) && p.offset <= hi * (1.0 + 1e-12))
        .map(|p| (p.offset, p.delta.unwrap_or(0.0)))
        .collect();
    fit_pairs(profile.center, profile.side, &pairs)
}

/// Fit of `log delta` against `log offset`; every pair is treated as usable.
pub fn fit_pairs(center: f64, side: Side, pairs: &[(f64, f64)]) -> Result<RegularityFit> {
    let usable: Vec<(f64, f64)> = pairs.iter().copied().filter(|&(o, d)| o > 0.0 && d > 0.0).collect();
    if usable.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData { usable: usable.len(), needed: MIN_FIT_POINTS });
    }
    let logs: Vec<(f64, f64)> = usable.iter().map(|&(o, d)| (o.ln(), d.ln())).collect();
    let (slope, intercept, residual) = least_squares(&logs);
    let lo = usable.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = usable.iter().map(|p| p.0).fold(0.0, f64::max);
    Ok(RegularityFit {
        center,
        side,
        offsets: usable.iter().map(|p| p.0).collect(),
        deltas: usable.iter().map(|p| p.1).collect(),
        slope,
        intercept,
        residual,
        usable_window: (lo, hi),
    })
}

/// Slopes on the larger-offset and smaller-offset halves of the fit window.
/// Returns `None` when either half has fewer than three points.
pub fn subwindow_slopes(fit: &RegularityFit) -> Option<(f64, f64)> {
    let n = fit.offsets.len();
    if n < 6 {
        return None;
    }
    let logs: Vec<(f64, f64)> = fit.offsets.iter().zip(&fit.deltas).map(|(o, d)| (o.ln(), d.ln())).collect();
    let mut sorted = logs;
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (a, b) = sorted.split_at(n / 2);
    Some((least_squares(a).0, least_squares(b).0))
}

pub const DEFAULT_RATIO_CAP: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exactness {
    pub r: f64,
    pub lower_c: f64,
    pub upper_c: f64,
    pub ratio_cap: f64,
    pub exact: bool,
}

/// `min` and `max` of `delta/offset^r` over the fit window.
pub fn exactness_check(fit: &RegularityFit, r: f64) -> Result<Exactness> {
    exactness_check_with(fit, r, DEFAULT_RATIO_CAP)
}

pub fn exactness_check_with(fit: &RegularityFit, r: f64, ratio_cap: f64) -> Result<Exactness> {
    if fit.offsets.is_empty() {
        return Err(Error::InsufficientData { usable: 0, needed: 1 });
    }
    let ratios = fit.offsets.iter().zip(&fit.deltas).map(|(o, d)| d / o.powf(r));
    let (lower_c, upper_c) = ratios.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Ok(Exactness { r, lower_c, upper_c, ratio_cap, exact: upper_c / lower_c <= ratio_cap })
}

/// JSON summary of a fit and its exactness check.
pub fn fit_summary_json(fit: &RegularityFit, ex: Option<&Exactness>) -> String {
    let mut s = format!(
        "{{\"center\":{:e},\"side\":\"{}\",\"slope\":{:e},\"intercept\":{:e},\"residual\":{:e},\"window\":[{:e},{:e}],\"points\":{}",
        fit.center,
        fit.side.label(),
        fit.slope,
        fit.intercept,
        fit.residual,
        fit.usable_window.0,
        fit.usable_window.1,
        fit.offsets.len()
    );
    if let Some(e) = ex {
        s.push_str(&format!(
            ",\"r\":{:e},\"lower_c\":{:e},\"upper_C\":{:e},\"ratio_cap\":{:e},\"exact\":{}",
            e.r, e.lower_c, e.upper_c, e.ratio_cap, e.exact
        ));
    }
    s.push('}');
    s
}

/// Two samples `((E₁, L₁), (E₂, L₂))` of `L(E)`.
pub type SamplePair = ((f64, f64), (f64, f64));

/// `max |ΔL|/|ΔE|^{1/2}` over energy pairs.
pub fn half_holder_constant(pairs: &[SamplePair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InsufficientData { usable: 0, needed: 1 });
    }
    let mut c: f64 = 0.0;
    for &((e1, l1), (e2, l2)) in pairs {
        let de = (e1 - e2).abs();
        if de == 0.0 {
            return Err(Error::InvalidArgument("energy pair with zero separation".into()));
        }
        c = c.max((l1 - l2).abs() / de.sqrt());
    }
    Ok(c)
}
