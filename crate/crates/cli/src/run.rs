//! Subcommands. Each returns its CSV artifacts, the stdout summary and an exit status.

use cocycle_lab::angle::critical_ladder;
use cocycle_lab::cocycle::{Cocycle, CocycleSpec, Form};
use cocycle_lab::lyapunov::{fit_ldt_decay, ldt_deviation_measure, le_extrapolate, le_via_strip};
use cocycle_lab::regularity::{exactness_check, fit_summary_json, geometric_offsets, holder_fit, le_profile};
use cocycle_lab::spectrum::{
    beta_from_metrics, beta_term, gap_edge_bisect, ids, ids_plateaus, resonance_metrics, uh_certificate, BisectOptions, SpectrumRow,
    SPECTRUM_CSV_HEADER,
};
use cocycle_lab::verification::{
    check_appendix_integrals, check_avalanche, check_lemma6_fd, check_norm_identity, check_sandwich, CheckReport,
};
use cocycle_lab::Error;

use crate::config::{ConfigError, EstimatorKind, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum VerifyKind {
    Lemma6,
    NormIdentity,
    Ap,
    Ldt,
    Appendix,
}

impl VerifyKind {
    pub fn label(self) -> &'static str {
        match self {
            VerifyKind::Lemma6 => "lemma6",
            VerifyKind::NormIdentity => "norm-identity",
            VerifyKind::Ap => "ap",
            VerifyKind::Ldt => "ldt",
            VerifyKind::Appendix => "appendix",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Le,
    Sweep,
    Spectrum,
    Gaps,
    Holder,
    Beta,
    Verify(VerifyKind),
}

impl Command {
    pub fn label(self) -> String {
        match self {
            Command::Le => "le".into(),
            Command::Sweep => "sweep".into(),
            Command::Spectrum => "spectrum".into(),
            Command::Gaps => "gaps".into(),
            Command::Holder => "holder".into(),
            Command::Beta => "beta".into(),
            Command::Verify(k) => format!("verify-{}", k.label()),
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Numeric(Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numeric(_) | CliError::Io(_) => EXIT_NUMERIC,
        }
    }

    pub fn to_json(&self) -> String {
        let v = match self {
            CliError::Config(e) => serde_json::json!({"error": "config", "field": e.field, "message": e.message}),
            CliError::Numeric(e) => serde_json::json!({"error": "numeric", "kind": kind_of(e), "message": e.to_string()}),
            CliError::Io(m) => serde_json::json!({"error": "io", "message": m}),
        };
        v.to_string()
    }
}

fn kind_of(e: &Error) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("").to_string()
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Numeric(e)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

pub struct Output {
    pub files: Vec<(String, String)>,
    pub summary: String,
    pub status: i32,
}

impl Output {
    fn ok(files: Vec<(String, String)>, summary: String) -> Self {
        Self { files, summary, status: EXIT_OK }
    }
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Output, CliError> {
    match cmd {
        Command::Le => le(cfg),
        Command::Sweep => sweep(cfg),
        Command::Spectrum => spectrum(cfg),
        Command::Gaps => gaps(cfg),
        Command::Holder => holder(cfg),
        Command::Beta => beta(cfg),
        Command::Verify(k) => verify(k, cfg),
    }
}

fn need_spec(cfg: &RunConfig, energy: f64, what: &str) -> Result<CocycleSpec, CliError> {
    cfg.spec(energy).ok_or_else(|| CliError::Config(ConfigError::new("form", format!("{what} needs a Schrödinger or rescaled cocycle"))))
}

fn need_schrodinger(spec: &CocycleSpec, what: &str) -> Result<(), CliError> {
    if spec.form() != Form::Schrodinger {
        return Err(CliError::Config(ConfigError::new("form", format!("{what} needs the Schrödinger form"))));
    }
    Ok(())
}

/// `(L, error hint, longest orbit)` at one energy.
fn le_point(cfg: &RunConfig, energy: f64) -> Result<(f64, f64, usize), CliError> {
    match (cfg.spec(energy), cfg.estimator) {
        (None, _) => generic_le(&cfg.constant(), cfg),
        (Some(s), EstimatorKind::Extrapolated) => generic_le(&s, cfg),
        (Some(s), EstimatorKind::Strip) => {
            let est = le_via_strip(&s, cfg.strip_eps, cfg.grid, cfg.strip_burn_in)?;
            Ok((est.value, est.error_hint, 2 * cfg.strip_burn_in + 1))
        }
    }
}

fn generic_le<C: Cocycle>(c: &C, cfg: &RunConfig) -> Result<(f64, f64, usize), CliError> {
    let ext = le_extrapolate(c, cfg.n0, cfg.grid, cfg.tol, cfg.max_n)?;
    Ok((ext.estimate.value, ext.estimate.error_hint, ext.n_final()))
}

const SWEEP_HEADER: &str = "E,L,err_hint,n_final\n";

fn le(cfg: &RunConfig) -> Result<Output, CliError> {
    let (l, hint, n) = le_point(cfg, cfg.energy)?;
    let csv = format!("{SWEEP_HEADER}{:.17e},{l:.17e},{hint:.6e},{n}\n", cfg.energy);
    Ok(Output::ok(vec![("le.csv".into(), csv)], format!("{l}\n")))
}

fn sweep(cfg: &RunConfig) -> Result<Output, CliError> {
    let mut csv = String::from(SWEEP_HEADER);
    let mut failures = 0;
    for e in cfg.energies() {
        match le_point(cfg, e) {
            Ok((l, hint, n)) => csv.push_str(&format!("{e:.17e},{l:.17e},{hint:.6e},{n}\n")),
            Err(CliError::Numeric(Error::NoConvergence { max_n, last_diff })) => {
                failures += 1;
                csv.push_str(&format!("{e:.17e},,{last_diff:.6e},{max_n}\n"));
            }
            Err(err) => return Err(err),
        }
    }
    let summary = format!("{} energies, {failures} without convergence\n", cfg.e_points);
    let status = if failures > 0 { EXIT_NUMERIC } else { EXIT_OK };
    Ok(Output { files: vec![("sweep.csv".into(), csv)], summary, status })
}

fn spectrum(cfg: &RunConfig) -> Result<Output, CliError> {
    let base = need_spec(cfg, 0.0, "spectrum")?;
    let with_ids = base.form() == Form::Schrodinger;
    let mut csv = format!("{SPECTRUM_CSV_HEADER}\n");
    let mut uh = 0;
    for e in cfg.energies() {
        let s = base.with_energy(e);
        let cert = uh_certificate(&s, cfg.uh_n, cfg.uh_grid, &cfg.uh_thresholds())?;
        let d = if with_ids { Some(ids(&s, e, cfg.ids_n, &cfg.ids_phases)?) } else { None };
        uh += (cert.verdict == cocycle_lab::spectrum::Verdict::UniformlyHyperbolic) as usize;
        let row = SpectrumRow {
            energy: e,
            n: cfg.uh_n,
            verdict: cert.verdict,
            min_angle_gap: cert.min_angle_gap,
            ids: d,
            d_n: None,
            k_n: None,
            beta: None,
        };
        csv.push_str(&row.to_csv());
        csv.push('\n');
    }
    let summary = format!("{} energies, {uh} certified uniformly hyperbolic\n", cfg.e_points);
    Ok(Output::ok(vec![("spectrum.csv".into(), csv)], summary))
}

fn gaps(cfg: &RunConfig) -> Result<Output, CliError> {
    let spec = need_spec(cfg, 0.0, "gaps")?;
    need_schrodinger(&spec, "gaps")?;
    let quantum = 0.5 / (cfg.ids_n as f64 * cfg.ids_phases.len() as f64);
    let mut plateaus: Vec<_> = ids_plateaus(&spec, &cfg.energies(), cfg.ids_n, &cfg.ids_phases, quantum)?
        .into_iter()
        .filter(|p| p.ids > 0.0 && p.ids < 1.0)
        .collect();
    plateaus.sort_by(|a, b| b.width().total_cmp(&a.width()).then(a.first.total_cmp(&b.first)));
    plateaus.truncate(cfg.gaps_max);
    let opts = BisectOptions {
        n: cfg.uh_n,
        grid_size: cfg.uh_grid,
        thresholds: cfg.uh_thresholds(),
        ids_check: Some((cfg.ids_n, cfg.ids_phases.clone())),
        ..Default::default()
    };
    let mut csv = String::from("ids,edge,energy,bracket_in,bracket_out,steps,ids_consistent,failure\n");
    let mut found = 0;
    for p in &plateaus {
        for (edge, bracket) in [("lower", (p.below, p.first)), ("upper", (p.above, p.last))] {
            match gap_edge_bisect(&spec, bracket, cfg.bisect_tol, &opts) {
                Ok(g) => {
                    found += 1;
                    let consistent = g.ids_consistent.map(|b| b.to_string()).unwrap_or_default();
                    csv.push_str(&format!(
                        "{:.9},{edge},{:.17e},{:.17e},{:.17e},{},{consistent},\n",
                        p.ids, g.energy, g.bracket.0, g.bracket.1, g.steps
                    ));
                }
                Err(e) => csv.push_str(&format!("{:.9},{edge},,{:.17e},{:.17e},,,\"{e}\"\n", p.ids, bracket.0, bracket.1)),
            }
        }
    }
    let summary = format!("{} gaps scanned, {found} edges bisected\n", plateaus.len());
    Ok(Output::ok(vec![("gaps.csv".into(), csv)], summary))
}

fn holder(cfg: &RunConfig) -> Result<Output, CliError> {
    let spec = need_spec(cfg, cfg.energy, "holder")?;
    let offsets = geometric_offsets(cfg.offset_max, cfg.offset_min, cfg.offset_ratio);
    let profile = le_profile(&spec, cfg.energy, cfg.side(), &offsets, &cfg.le_settings())?;
    let mut files = vec![("holder.csv".into(), profile.to_csv())];
    match holder_fit(&profile) {
        Ok(fit) => {
            let ex = exactness_check(&fit, cfg.exactness_r)?;
            let json = fit_summary_json(&fit, Some(&ex));
            files.push(("fit.json".into(), json.clone() + "\n"));
            Ok(Output::ok(files, json + "\n"))
        }
        Err(e @ Error::InsufficientData { .. }) => {
            let json = serde_json::json!({"error": "numeric", "kind": kind_of(&e), "message": e.to_string()}).to_string();
            files.push(("fit.json".into(), json.clone() + "\n"));
            Ok(Output { files, summary: json + "\n", status: EXIT_NUMERIC })
        }
        Err(e) => Err(e.into()),
    }
}

fn beta(cfg: &RunConfig) -> Result<Output, CliError> {
    let spec = need_spec(cfg, cfg.energy, "beta")?;
    let freq = cfg.frequency();
    let ladder = critical_ladder(&spec, &freq, &cfg.interval_rule(), cfg.max_level)?;
    let first = cfg.beta_first_level.max(1);
    let mut metrics = Vec::new();
    let mut rows = Vec::new();
    for s in ladder.iter().filter(|s| s.level >= first) {
        match resonance_metrics(&spec, s, s.floor) {
            Ok(m) => {
                rows.push((s.level, Some(m.d_n), m.k_n, beta_term(&m)));
                metrics.push(m);
            }
            Err(Error::NoResonanceWithinHorizon { .. }) => {
                let d = s.critical_points.get(1).map(|c2| cocycle_lab::dd::circle_diff(s.critical_points[0], *c2));
                rows.push((s.level, d, None, None));
            }
            Err(e) => return Err(e.into()),
        }
    }
    let b = beta_from_metrics(&metrics);
    let mut csv = String::from("level,d_n,k_n,term,beta\n");
    for (level, d, k, term) in rows {
        let d = d.map(|v| format!("{v:.17e}")).unwrap_or_default();
        let k = k.map(|v| v.to_string()).unwrap_or_default();
        let term = term.map(|v| format!("{v:.17e}")).unwrap_or_default();
        csv.push_str(&format!("{level},{d},{k},{term},{:.17e}\n", b.value));
    }
    let summary = format!("beta = {} (resonance absent: {})\n", b.value, b.resonance_absent);
    Ok(Output::ok(vec![("beta.csv".into(), csv)], summary))
}

const CHECK_HEADER: &str = "name,trials,worst_relative_error,tolerance,violations,pass,seed\n";

fn check_rows(reports: &[CheckReport]) -> Output {
    let mut csv = String::from(CHECK_HEADER);
    let mut json = Vec::new();
    for r in reports {
        csv.push_str(&format!(
            "{},{},{:e},{:e},{},{},{}\n",
            r.name, r.trials, r.worst_relative_error, r.tolerance, r.violations, r.pass, r.seed
        ));
        json.push(r.to_json());
    }
    let pass = reports.iter().all(|r| r.pass);
    let summary = format!("[{}]\n", json.join(","));
    Output {
        files: vec![("verify.csv".into(), csv), ("report.json".into(), summary.clone())],
        summary,
        status: if pass { EXIT_OK } else { EXIT_VERIFICATION },
    }
}

fn verify(kind: VerifyKind, cfg: &RunConfig) -> Result<Output, CliError> {
    match kind {
        VerifyKind::Lemma6 => Ok(check_rows(&[check_lemma6_fd(cfg.trials, cfg.seed)?])),
        VerifyKind::NormIdentity => Ok(check_rows(&[check_norm_identity(cfg.trials, cfg.seed)?, check_sandwich(cfg.trials, cfg.seed)?])),
        VerifyKind::Ap => Ok(check_rows(&[check_avalanche(cfg.trials, cfg.seed, cfg.ap_mu, cfg.ap_n, cfg.ap_c)?])),
        VerifyKind::Ldt => verify_ldt(cfg),
        VerifyKind::Appendix => verify_appendix(cfg),
    }
}

fn verify_ldt(cfg: &RunConfig) -> Result<Output, CliError> {
    let spec = need_spec(cfg, cfg.energy, "verify ldt")?;
    let mut csv = String::from("i,measure\n");
    let mut pts = Vec::new();
    for &i in &cfg.ldt_lengths {
        let m = ldt_deviation_measure(&spec, i, cfg.grid, cfg.ldt_fraction)?;
        csv.push_str(&format!("{i},{m:.17e}\n"));
        pts.push((i, m));
    }
    let decreasing = pts.windows(2).all(|w| w[1].1 < w[0].1);
    let (c, fit_note) = match fit_ldt_decay(&pts, cfg.lambda.ln()) {
        Ok(f) => (Some(f.c), String::new()),
        Err(e) => (None, e.to_string()),
    };
    let pass = decreasing && c.is_some_and(|c| c > 0.0);
    let summary = serde_json::json!({
        "name": "ldt",
        "fraction": cfg.ldt_fraction,
        "measures": pts.iter().map(|p| p.1).collect::<Vec<_>>(),
        "strictly_decreasing": decreasing,
        "c": c,
        "fit_error": if fit_note.is_empty() { None } else { Some(fit_note) },
        "pass": pass,
    })
    .to_string()
        + "\n";
    Ok(Output {
        files: vec![("ldt.csv".into(), csv), ("report.json".into(), summary.clone())],
        summary,
        status: if pass { EXIT_OK } else { EXIT_VERIFICATION },
    })
}

fn verify_appendix(cfg: &RunConfig) -> Result<Output, CliError> {
    let q = cfg.appendix_q;
    let top = (0.08 / q).min(0.079).log10();
    let grid: Vec<f64> = (0..=60).map(|k| 10f64.powf(-15.0 + k as f64 * (top + 15.0) / 60.0)).collect();
    let r = check_appendix_integrals(&grid, &|_| 1e-12, q)?;
    let mut csv = String::from("regime,points,decades,min_ratio,max_ratio,sign_changes,pass\n");
    for c in &r.regimes {
        csv.push_str(&format!(
            "{},{},{:.3},{:e},{:e},{},{}\n",
            c.regime.label(),
            c.points,
            c.decades,
            c.min_ratio,
            c.max_ratio,
            c.sign_changes,
            c.pass
        ));
    }
    let summary = r.to_json() + "\n";
    Ok(Output {
        files: vec![("appendix.csv".into(), csv), ("report.json".into(), summary.clone())],
        summary,
        status: if r.pass() { EXIT_OK } else { EXIT_VERIFICATION },
    })
}
