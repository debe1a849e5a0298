//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when a criterion fails without its documented diagnosis.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use cocycle_lab::angle::{angle_gap, critical_ladder, IntervalRule};
use cocycle_lab::arithmetic::Frequency;
use cocycle_lab::cocycle::{iterate_orbit, Cocycle, CocycleSpec, Direction, Gain, Potential};
use cocycle_lab::dd::Phase;
use cocycle_lab::linalg2::{polar_decompose, Mat2};
use cocycle_lab::lyapunov::{
    ap_verify, finite_le, fit_ldt_decay, ldt_deviation_measure, le_extrapolate, le_strip, le_via_strip, STRIP_BURN_IN,
};
use cocycle_lab::reduce::par_map;
use cocycle_lab::regularity::{
    exactness_check, fit_pairs, geometric_offsets, half_holder_constant, holder_fit_window, le_profile, LeEstimator, LeProfile, LeSettings,
    Side, NOISE_FACTOR,
};
use cocycle_lab::spectrum::{
    beta_indicator, classify_point, gap_edge_bisect, ids, ids_plateaus, uh_certificate, BisectOptions, ClassifyOptions, PointClass,
    UhThresholds, Verdict,
};
use cocycle_lab::verification::{
    check_appendix_integrals, check_avalanche, check_lemma6_fd, check_norm_identity, check_sandwich, random_ap_chain,
};
use cocycle_lab::Error;
use common::oracle_log_norm;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;
const LAMBDA: f64 = 10.0;
const FR_ENERGIES: [f64; 4] = [-7.3, 0.7, 5.3, 9.6];

struct Outcome {
    pass: bool,
    /// A failing criterion whose cause was confirmed by the run itself.
    diagnosed: Option<String>,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, diagnosed: None, detail }
    }
}

fn amo(e: f64) -> CocycleSpec {
    CocycleSpec::almost_mathieu(Frequency::golden(), LAMBDA, e)
}

fn generic(e: f64) -> CocycleSpec {
    CocycleSpec::schrodinger(Frequency::golden(), LAMBDA, Potential::cos_family(1.0, 0.2), e)
}

fn rule() -> IntervalRule {
    IntervalRule::new(2, 2.5)
}

fn strip_settings(grid_size: usize) -> LeSettings {
    LeSettings { grid_size, estimator: LeEstimator::Strip { eps: 0.02, burn_in: STRIP_BURN_IN }, ..Default::default() }
}

fn lemma6() -> Outcome {
    let t = Instant::now();
    let r = check_lemma6_fd(1000, SEED).expect("lemma 6 check");
    let dt = t.elapsed();
    Outcome::new(
        r.pass && dt < Duration::from_secs(5),
        format!("worst rel err {:.2e} (tol {:.0e}), bound violations {}, {dt:.2?}", r.worst_relative_error, r.tolerance, r.violations),
    )
}

fn norm_identity() -> Outcome {
    let a = check_norm_identity(1000, SEED).expect("norm identity");
    let b = check_sandwich(1000, SEED).expect("sandwich");
    Outcome::new(
        a.pass && b.pass,
        format!("identity worst rel err {:.2e} (tol {:.0e}); sandwich violations {}", a.worst_relative_error, a.tolerance, b.violations),
    )
}

fn avalanche() -> Outcome {
    let (trials, mu, n, c) = (1000, 1e3, 100, 10.0);
    let t = Instant::now();
    let r = check_avalanche(trials, SEED, mu, n, c).expect("avalanche");
    // Same generator and seed, so these are the chains checked above.
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst_oracle: f64 = 0.0;
    for _ in 0..trials {
        let chain = random_ap_chain(&mut rng, mu, n);
        let rep = ap_verify(&chain, mu, c).expect("chain meets the hypotheses");
        let exact = oracle_log_norm(&chain);
        worst_oracle = worst_oracle.max((rep.log_norm_product - exact).abs() / exact);
    }
    let dt = t.elapsed();
    Outcome::new(
        r.pass && worst_oracle <= 1e-10 && dt < Duration::from_secs(30),
        format!("worst residual·μ/n {:.3} (tol {c}), oracle rel err {worst_oracle:.2e}, {dt:.2?}", r.worst_relative_error),
    )
}

fn le_amo() -> Outcome {
    let t = Instant::now();
    let ext = le_extrapolate(&amo(0.0), 256, 1 << 14, 1e-6, 1 << 14).expect("extrapolation");
    let dt = t.elapsed();
    let direct = finite_le(&amo(0.0), 100_000, 256).expect("direct").value;
    let exact = LAMBDA.ln();
    let err = (ext.estimate.value - exact).abs();
    Outcome::new(
        err <= 5e-3 && (direct - exact).abs() <= 5e-3 && ext.n_final() <= 1 << 14 && dt < Duration::from_secs(300),
        format!("L {:.10} vs ln 10 (err {err:.2e}), direct n=1e5 {direct:.10}, n_final {}, {dt:.2?}", ext.estimate.value, ext.n_final()),
    )
}

/// Lower edge of the largest AMO gap, located from the IDS plateau whose
/// label is `α` and then bisected on the UH verdict.
fn amo_edge() -> (f64, f64) {
    let energies: Vec<f64> = (0..=880).map(|k| -22.0 + 0.05 * k as f64).collect();
    let plateaus = ids_plateaus(&amo(0.0), &energies, 2048, &[0.1, 0.37], 1e-12).expect("plateau scan");
    let widest = plateaus
        .iter()
        .filter(|p| p.ids > 0.0 && p.ids < 1.0 && p.first > 0.0)
        .max_by(|a, b| a.width().total_cmp(&b.width()))
        .expect("an interior plateau");
    let opts = BisectOptions { ids_check: Some((1 << 16, vec![0.1, 0.37])), ..Default::default() };
    let edge = gap_edge_bisect(&amo(0.0), (widest.below, widest.first), 1e-11, &opts).expect("bisection");
    let label = ids(&amo(0.0), edge.energy, 1 << 16, &[0.1, 0.37]).expect("ids");
    (edge.energy, label)
}

fn profile_line(p: &LeProfile) -> String {
    let used = p.points.iter().filter(|q| q.used).count();
    let max_delta = p.points.iter().filter_map(|q| q.delta).fold(0.0f64, f64::max);
    let max_noise = p.points.iter().map(|q| q.noise).filter(|v| v.is_finite()).fold(0.0f64, f64::max);
    format!("{used}/{} usable, max delta {max_delta:.2e}, max noise {max_noise:.2e}", p.points.len())
}

/// Fit on the gap side of the edge. Points use the aligned real estimate,
/// which needs uniform hyperbolicity, so the center comes from the strip.
fn gap_side(edge: f64, offsets: &[f64]) -> String {
    let center = le_via_strip(&amo(edge), 0.02, 1024, STRIP_BURN_IN).expect("strip at the edge");
    let mut pairs = Vec::new();
    for &o in offsets {
        let Ok(p) = le_via_strip(&amo(edge + o), 0.0, 1 << 16, 200) else { continue };
        let delta = p.value - center.value;
        if delta > NOISE_FACTOR * p.error_hint.max(center.error_hint) {
            pairs.push((o, delta));
        }
    }
    match fit_pairs(edge, Side::Above, &pairs) {
        Ok(f) => {
            let ex = exactness_check(&f, 0.5).expect("exactness");
            format!("slope {:.3} over {} points, C/c {:.3}", f.slope, pairs.len(), ex.upper_c / ex.lower_c)
        }
        Err(e) => e.to_string(),
    }
}

fn edge_holder(edge: f64, label: f64) -> Outcome {
    let t = Instant::now();
    let alpha = Frequency::golden().value();
    let offsets = geometric_offsets(1e-3, 1e-7, 0.5);
    let spec_side = le_profile(&amo(0.0), edge, Side::Below, &offsets, &strip_settings(4096)).expect("profile");
    let fit = holder_fit_window(&spec_side, (1e-7, 1e-3));
    let gap_fit = gap_side(edge, &offsets);
    let dt = t.elapsed();
    let head = format!("edge {edge:.14} (IDS {label:.6} vs α {alpha:.6})");
    match fit {
        Ok(f) => {
            let ex = exactness_check(&f, 0.5).expect("exactness");
            Outcome::new(
                (0.40..=0.60).contains(&f.slope) && ex.upper_c / ex.lower_c <= 25.0 && dt < Duration::from_secs(1800),
                format!("{head}: slope {:.3}, C/c {:.2}; gap side {gap_fit}, {dt:.2?}", f.slope, ex.upper_c / ex.lower_c),
            )
        }
        Err(e) => {
            // L is identically ln λ on the AMO spectrum, so every delta must sit
            // at the noise floor and the strip value must equal ln λ.
            let flat =
                spec_side.points.iter().all(|p| p.delta.is_some_and(|d| d < 1e-11)) && (spec_side.l_center - LAMBDA.ln()).abs() < 1e-11;
            let labelled = (label - alpha).abs() <= 2.0 / (1 << 16) as f64;
            let mut o =
                Outcome::new(false, format!("{head}: spectrum side {e} ({}); gap side {gap_fit}, {dt:.2?}", profile_line(&spec_side)));
            if flat && labelled && matches!(e, Error::InsufficientData { .. }) {
                o.diagnosed = Some("L ≡ ln λ on the AMO spectrum, so the spectrum side carries no Hölder signal".into());
            }
            o
        }
    }
}

fn fr_lipschitz() -> (Outcome, Vec<f64>) {
    let opts = ClassifyOptions { levels: 3, ..Default::default() };
    let offsets = geometric_offsets(1e-3, 1e-6, 0.5);
    let mut fr = Vec::new();
    let mut lines = Vec::new();
    for &e in &FR_ENERGIES {
        let s = generic(e);
        let class = classify_point(&s, &Frequency::golden(), &rule(), &opts).class;
        let uh = uh_certificate(&s, 1024, 2048, &UhThresholds::default()).expect("certificate").verdict;
        if class != PointClass::FrLike || uh == Verdict::UniformlyHyperbolic {
            lines.push(format!("E={e}: {} {}", class.label(), uh.label()));
            continue;
        }
        fr.push(e);
        let p = le_profile(&generic(0.0), e, Side::Above, &offsets, &strip_settings(4096)).expect("profile");
        match holder_fit_window(&p, (1e-6, 1e-3)) {
            Ok(f) => lines.push(format!("E={e}: slope {:.4}", f.slope)),
            Err(err) => lines.push(format!("E={e}: {err}")),
        }
    }
    let slopes: Vec<f64> = lines.iter().filter_map(|l| l.split("slope ").nth(1)?.parse().ok()).collect();
    let good = slopes.iter().filter(|&&s| s >= 0.85).count();
    (Outcome::new(good >= 3, format!("{good} FR_like energies with slope ≥ 0.85: {}", lines.join("; "))), fr)
}

fn beta_check(edge: f64, fr: &[f64]) -> Outcome {
    let f = Frequency::golden();
    let s = amo(edge);
    let ladder = critical_ladder(&s, &f, &rule(), 4).expect("edge ladder");
    let b = beta_indicator(&s, &ladder[1..], None).expect("edge beta");
    let mut ok = (0.4..=0.6).contains(&b.value) && !b.resonance_absent;
    let mut lines = vec![format!("edge β {:.4} (terms {:?})", b.value, b.per_scale_terms)];
    for &e in fr {
        let s = generic(e);
        let ladder = critical_ladder(&s, &f, &rule(), 4).expect("FR ladder");
        let b = beta_indicator(&s, &ladder[1..], None).expect("FR beta");
        ok &= b.value == 1.0 && b.resonance_absent;
        lines.push(format!("E={e} β {} absent={}", b.value, b.resonance_absent));
    }
    ok &= fr.len() >= 3;
    Outcome::new(ok, lines.join("; "))
}

fn ldt() -> Outcome {
    let s = amo(0.0);
    let lens = [50usize, 100, 200];
    let m: Vec<f64> = lens.iter().map(|&i| ldt_deviation_measure(&s, i, 1 << 16, 0.98).expect("ldt")).collect();
    let pts: Vec<(usize, f64)> = lens.iter().copied().zip(m.iter().copied()).collect();
    let fit = fit_ldt_decay(&pts, LAMBDA.ln()).expect("decay fit");
    Outcome::new(
        m[0] > m[1] && m[1] > m[2] && fit.c > 0.0 && m[2] <= 1e-3,
        format!("measures {:?} at i = {lens:?}, fitted c {:.4}", m.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(), fit.c),
    )
}

fn in_spectrum(e: f64) -> bool {
    uh_certificate(&generic(e), 256, 1024, &UhThresholds::default()).is_ok_and(|c| c.verdict == Verdict::NotCertified)
}

fn strip_value(e: f64) -> Option<f64> {
    le_via_strip(&generic(e), 0.02, 1024, STRIP_BURN_IN).ok().map(|s| s.value)
}

fn global_holder() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (lo, hi) = (-11.0, 15.0);
    let mut pairs = Vec::new();
    let mut rejected = 0usize;
    while pairs.len() < 200 {
        let e1: f64 = rng.gen_range(lo..hi);
        let de = 10f64.powf(rng.gen_range(-6.0..-1.0));
        let e2 = e1 + if rng.gen_bool(0.5) { de } else { -de };
        if !in_spectrum(e1) || !in_spectrum(e2) {
            rejected += 1;
            continue;
        }
        match (strip_value(e1), strip_value(e2)) {
            (Some(l1), Some(l2)) => pairs.push(((e1, l1), (e2, l2))),
            _ => rejected += 1,
        }
    }
    let c = half_holder_constant(&pairs).expect("constant");
    let mut by_sep: Vec<_> = pairs.clone();
    by_sep.sort_by(|a, b| (a.0 .0 - a.1 .0).abs().total_cmp(&(b.0 .0 - b.1 .0).abs()));
    let (near, far) = by_sep.split_at(100);
    let c_near = half_holder_constant(near).expect("near");
    let c_far = half_holder_constant(far).expect("far");
    let dt = t.elapsed();
    Outcome::new(
        c.is_finite() && c_near <= 2.0 * c_far,
        format!("C′ = {c:.4} over 200 pairs; small-|ΔE| half {c_near:.4}, large half {c_far:.4}; {rejected} draws rejected, {dt:.2?}"),
    )
}

fn appendix() -> Outcome {
    let t = Instant::now();
    let grid: Vec<f64> = (0..=60).map(|k| 1e-15 * 10f64.powf(k as f64 * 12.9 / 60.0)).collect();
    let fixed = check_appendix_integrals(&grid, &|_| 1e-12, 10.0).expect("fixed ε₂");
    let prop = check_appendix_integrals(&grid[20..], &|e| e / 100.0, 10.0).expect("proportional ε₂");
    let dt = t.elapsed();
    let min_decades = fixed.regimes.iter().map(|r| r.decades).fold(f64::INFINITY, f64::min);
    let worst = fixed.regimes.iter().chain(&prop.regimes).map(|r| r.utilization()).fold(0.0f64, f64::max);
    Outcome::new(
        fixed.pass() && prop.pass() && min_decades >= 2.0 && fixed.regimes.len() == 7 && dt < Duration::from_secs(60),
        format!(
            "{} + {} regimes, min decades {min_decades:.1}, worst cap utilization {worst:.2}, {} evaluations, {dt:.2?}",
            fixed.regimes.len(),
            prop.regimes.len(),
            fixed.evaluations + prop.evaluations
        ),
    )
}

fn random_sl2(rng: &mut ChaCha8Rng) -> Mat2 {
    let l: f64 = rng.gen_range(0.05..8.0);
    Mat2::rotation(rng.gen_range(0.0..PI)) * Mat2::diag(l.exp()) * Mat2::rotation(rng.gen_range(0.0..PI))
}

fn max_entry_diff(a: &Mat2, b: &Mat2) -> f64 {
    (a.a - b.a).abs().max((a.b - b.b).abs()).max((a.c - b.c).abs()).max((a.d - b.d).abs())
}

fn structural() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut fails = Vec::new();

    let mut det_worst: f64 = 0.0;
    for _ in 0..200 {
        let e = rng.gen_range(-12.0..14.0);
        let s = if rng.gen_bool(0.5) { amo(e) } else { generic(e) };
        let n = rng.gen_range(1..5000);
        let p = iterate_orbit(&s, rng.gen_range(0.0..1.0), n, Direction::Forward);
        det_worst = det_worst.max(p.det_defect() / n as f64);
    }
    if det_worst > 1e-10 {
        fails.push(format!("det defect per step {det_worst:.2e}"));
    }

    let mut sub_worst = f64::NEG_INFINITY;
    for _ in 0..200 {
        let s = generic(rng.gen_range(-12.0..14.0));
        let x = rng.gen_range(0.0..1.0);
        let (m, n) = (rng.gen_range(1..500), rng.gen_range(1..500));
        let whole = iterate_orbit(&s, x, m + n, Direction::Forward).log_norm();
        let head = iterate_orbit(&s, x, m, Direction::Forward).log_norm();
        let mut shifted = Phase::new(x);
        for _ in 0..m {
            shifted.advance(s.alpha());
        }
        let tail = iterate_orbit(&s, shifted.value(), n, Direction::Forward).log_norm();
        sub_worst = sub_worst.max((whole - head - tail) / (m + n) as f64);
    }
    let mean_l: Vec<f64> = (1..=48).map(|n| finite_le(&amo(0.9), n, 1024).unwrap().value * n as f64).collect();
    let mut avg_worst = f64::NEG_INFINITY;
    for m in 1..=24 {
        for n in 1..=24 {
            avg_worst = avg_worst.max(mean_l[m + n - 1] - mean_l[m - 1] - mean_l[n - 1]);
        }
    }
    if sub_worst > 1e-12 || avg_worst > 1e-6 {
        fails.push(format!("subadditivity excess {sub_worst:.2e} pointwise, {avg_worst:.2e} averaged"));
    }

    let (mut recomp, mut swap): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let m = random_sl2(&mut rng);
        let p = polar_decompose(&m).unwrap();
        let r = p.recompose();
        let scale = m.frobenius_sq().sqrt();
        recomp = recomp.max(max_entry_diff(&r, &m).min(max_entry_diff(&r.scale(-1.0), &m)) / scale);
        let q = polar_decompose(&m.inverse_unimodular()).unwrap();
        swap = swap.max(q.s.dist(p.u)).max(q.u.dist(p.s));
    }
    if recomp > 1e-8 {
        fails.push(format!("recomposition {recomp:.2e}"));
    }
    if swap > 1e-10 {
        fails.push(format!("s(A⁻¹) vs u(A) {swap:.2e}"));
    }

    let mut g1: f64 = 0.0;
    for _ in 0..1000 {
        let s =
            CocycleSpec::rescaled(Frequency::golden(), LAMBDA, Potential::cos_family(1.0, 0.2), rng.gen_range(-12.0..14.0), Gain::Constant)
                .unwrap();
        let x = rng.gen_range(0.0..1.0);
        let polar = angle_gap(&s, x, 1, 1).unwrap();
        g1 = g1.max((polar - (s.t() - s.potential().value(x)).atan()).abs());
    }
    if g1 > 1e-8 {
        fails.push(format!("g₁ vs polar s₁ {g1:.2e}"));
    }

    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let le = finite_le(&generic(0.7), 300, 2048).unwrap().value;
            let strip = le_strip(&generic(0.7), 0.02, 1024, STRIP_BURN_IN).unwrap();
            let d = ids(&amo(1.3), 1.3, 4096, &[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
            let v: f64 = par_map(1000, |i| (i as f64).sqrt()).iter().sum();
            let lemma = check_lemma6_fd(100, SEED).unwrap().worst_relative_error;
            [le, strip, d, v, lemma].map(f64::to_bits)
        })
    };
    let base = run(1);
    if [2, 4].iter().any(|&k| run(k) != base) {
        fails.push("results depend on the worker count".into());
    }

    let detail = format!(
        "det {det_worst:.1e}/step, subadd {sub_worst:.1e}, recompose {recomp:.1e}, swap {swap:.1e}, g₁ {g1:.1e}, threads 1/2/4 identical: {}",
        !fails.iter().any(|f| f.contains("worker"))
    );
    Outcome::new(fails.is_empty(), if fails.is_empty() { detail } else { format!("{detail}; failed: {}", fails.join(", ")) })
}

fn main() {
    let mut unexplained = 0;
    let mut report = |id: usize, name: &str, o: Outcome, t: Instant| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{id:>2}] {name}: {} ({:.1?})", o.detail, t.elapsed());
        match (&o.diagnosed, o.pass) {
            (_, true) => {}
            (Some(why), false) => println!("       diagnosed: {why}"),
            (None, false) => unexplained += 1,
        }
    };
    let t = Instant::now();
    report(1, "angle sensitivities", lemma6(), t);
    let t = Instant::now();
    report(2, "norm identity and sandwich bound", norm_identity(), t);
    let t = Instant::now();
    report(3, "avalanche principle", avalanche(), t);
    let t = Instant::now();
    report(4, "AMO Lyapunov exponent", le_amo(), t);
    let t = Instant::now();
    let (edge, label) = amo_edge();
    report(5, "gap-edge half-Hölder", edge_holder(edge, label), t);
    let t = Instant::now();
    let (o, fr) = fr_lipschitz();
    report(6, "Lipschitz at FR_like energies", o, t);
    let t = Instant::now();
    report(7, "β indicator", beta_check(edge, &fr), t);
    let t = Instant::now();
    report(8, "large deviations", ldt(), t);
    let t = Instant::now();
    report(9, "global half-Hölder screen", global_holder(), t);
    let t = Instant::now();
    report(10, "appendix integrals", appendix(), t);
    let t = Instant::now();
    report(11, "structural properties", structural(), t);
    if unexplained > 0 {
        println!("{unexplained} criteria failed without a diagnosis");
        std::process::exit(1);
    }
}
