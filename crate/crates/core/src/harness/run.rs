use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::artifacts::{sha256_hex, ArtifactWriter, Manifest, SCHEMA_VERSION};
use super::config::{ExperimentConfig, ResolvedProblem, TruncationPolicy};
use crate::backward::{
    backward_induction, error_functionals, fallback_horizon, solve_picard, truncation_horizon, BoundSequence,
    ErrorReport, PicardOptions, QuadratureOptions, TruncationHorizon,
};
use crate::error::{Error, Result};
use crate::forward::{
    detect_discrete_exit, exit_gap_moments, reference_exit_times, simulate_paths, write_exit_csv, ExitGapStats,
    ExitSamples, PathBundle, SimOptions, Storage,
};
use crate::moments::{exp_moment_scan, freidlin_check_bundle, geometric_batches, one_d_threshold, FreidlinReport, ScanRow};
use crate::problem::{Domain, GridSpec};
use crate::stats::{fit_rate, MeanCi, RateFit};
use crate::theory::{
    dyadic_lags, em_strong_error_slope, euler_exit_family, gronwall_batch, kolmogorov_ratio_fit,
    two_stopping_gap_check, EmSlopeReport, EmVerdict, GapReport, GapVerdict, GronwallBatch, Horizon, KolmogorovFit,
    SampledPaths, GAP_SLOPE_SLACK,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Simulate,
    Solve,
    Rates,
    Moments,
    Checks,
    All,
}

impl Stage {
    fn simulates(self) -> bool {
        !matches!(self, Stage::Checks)
    }
    fn solves(self) -> bool {
        matches!(self, Stage::Solve | Stage::Rates | Stage::All)
    }
    fn fits(self) -> bool {
        matches!(self, Stage::Rates | Stage::All)
    }
    fn moments(self) -> bool {
        matches!(self, Stage::Moments | Stage::All)
    }
    fn checks(self) -> bool {
        matches!(self, Stage::Checks | Stage::All)
    }
    pub fn name(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Solve => "solve",
            Stage::Rates => "rates",
            Stage::Moments => "moments",
            Stage::Checks => "checks",
            Stage::All => "all",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Root of the output tree; falls back to `BSDE_LAB_OUT`, the config,
    /// then `out`.
    pub out_root: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Directory name under `<root>/<name>/`; a UTC timestamp by default.
    pub stamp: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub h: f64,
    pub solver: String,
    pub t_trunc: f64,
    pub rigorous_truncation: bool,
    pub e1: MeanCi,
    pub e2: MeanCi,
    pub terminal: MeanCi,
    pub exit_gap: ExitGapStats,
    pub v0: f64,
    pub n_paths: usize,
    pub censored: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub column: String,
    pub solver: String,
    pub fit: Option<RateFit>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    pub fits: Vec<SlopeFit>,
}

impl RateTable {
    pub fn slope(&self, column: &str, solver: &str) -> Option<f64> {
        self.fits
            .iter()
            .find(|f| f.column == column && f.solver == solver)
            .and_then(|f| f.fit.as_ref().map(|r| r.slope))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowCheck {
    pub name: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub pass: bool,
}

impl WindowCheck {
    fn new(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self { name: name.into(), value, lo, hi, pass: value >= lo && value <= hi }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TheoryResults {
    pub gronwall: Option<GronwallBatch>,
    pub kolmogorov_brownian: Vec<KolmogorovFit>,
    pub kolmogorov_euler: Option<KolmogorovFit>,
    pub em_fixed: Option<EmSlopeReport>,
    pub em_stopped: Option<EmSlopeReport>,
    pub two_stopping: Option<GapReport>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChecksDoc {
    pub schema_version: u32,
    pub experiment: String,
    pub suite: String,
    pub truncation: Vec<(f64, TruncationHorizon)>,
    pub rate_fits: Vec<SlopeFit>,
    pub freidlin: Vec<FreidlinReport>,
    pub mean_exit_time: Option<MeanCi>,
    pub theory: Option<TheoryResults>,
    pub windows: Vec<WindowCheck>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub rates: Option<RateTable>,
    pub checks: ChecksDoc,
}

impl RunOutcome {
    pub fn windows_pass(&self) -> bool {
        self.checks.windows.iter().all(|w| w.pass)
    }
}

const SUITE_LABEL: &str = "default suite of this crate (B1-B4 across the configured stepsizes); not a published experiment set";

pub(crate) fn num(x: f64) -> String {
    format!("{x}")
}

fn stamp_now() -> String {
    chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string()
}

fn run_dir(cfg: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    let root = opts
        .out_root
        .clone()
        .or_else(|| std::env::var_os("BSDE_LAB_OUT").map(PathBuf::from))
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let base = root.join(&cfg.name);
    let stamp = opts.stamp.clone().unwrap_or_else(stamp_now);
    let mut dir = base.join(&stamp);
    let mut k = 1;
    while dir.exists() {
        dir = base.join(format!("{stamp}-{k}"));
        k += 1;
    }
    dir
}

fn staged<T>(stage: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Stage { .. } => e,
        e => Error::Stage { stage: stage.to_string(), source: Box::new(e) },
    })
}

/// Runs `stage` of the experiment and writes its artifacts. On failure the
/// files written so far stay on disk with a manifest naming the stage.
pub fn run_experiment(cfg: &ExperimentConfig, stage: Stage, opts: &RunOptions) -> Result<RunOutcome> {
    let mut cfg = cfg.clone();
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    staged("validate", cfg.validate())?;
    let resolved = staged("validate", cfg.resolve_problem())?;
    let config_text = staged("validate", cfg.to_toml_string())?;
    let mut w = ArtifactWriter::create(run_dir(&cfg, opts))?;
    w.write_bytes("config.toml", config_text.as_bytes())?;
    let mut manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        experiment: cfg.name.clone(),
        command: stage.name().to_string(),
        seed: cfg.seed,
        config_sha256: sha256_hex(config_text.as_bytes()),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        suite: SUITE_LABEL.to_string(),
        failed_stage: None,
        error: None,
        files: Vec::new(),
    };
    let mut checks = ChecksDoc {
        schema_version: SCHEMA_VERSION,
        experiment: cfg.name.clone(),
        suite: SUITE_LABEL.to_string(),
        truncation: Vec::new(),
        rate_fits: Vec::new(),
        freidlin: Vec::new(),
        mean_exit_time: None,
        theory: None,
        windows: Vec::new(),
        notes: Vec::new(),
    };
    match run_stages(&cfg, &resolved, stage, &mut w, &mut checks) {
        Ok(rates) => {
            w.write_json("checks.json", &checks)?;
            let dir = w.finish(manifest)?;
            Ok(RunOutcome { dir, rates, checks })
        }
        Err(e) => {
            if let Error::Stage { stage, .. } = &e {
                manifest.failed_stage = Some(stage.clone());
            }
            manifest.error = Some(e.to_string());
            let _ = w.write_json("checks.json", &checks);
            let _ = w.finish(manifest);
            Err(e)
        }
    }
}

fn horizon_for(cfg: &ExperimentConfig, r: &ResolvedProblem, h: f64) -> Result<TruncationHorizon> {
    match cfg.truncation {
        TruncationPolicy::Explicit { t } => {
            let g = GridSpec::covering(h, t)?;
            Ok(TruncationHorizon { t_trunc: g.t_max, nodes: g.nodes(), tail_bound: f64::NAN, rigorous: false })
        }
        TruncationPolicy::Auto { m_bound, tol, level, factor, pilot_t_max, pilot_paths } => {
            let feasible = cfg.validate()?.budget.map(|b| b.feasible).unwrap_or(false);
            if let (Some(m), true, Some(b)) = (m_bound, feasible, cfg.budget) {
                return truncation_horizon(m, b.rho, tol, h);
            }
            let grid = GridSpec::covering(h, pilot_t_max)?;
            let pilot = simulate_paths(r.problem.clone(), grid, pilot_paths, cfg.seed ^ 0x5049_4c4f_5400, Storage::Exits)?;
            fallback_horizon(&detect_discrete_exit(&pilot), level, factor, h)
        }
    }
}

fn mean_ci_cells(m: &MeanCi) -> [String; 2] {
    [num(m.mean), num(m.ci)]
}

fn run_stages(
    cfg: &ExperimentConfig,
    r: &ResolvedProblem,
    stage: Stage,
    w: &mut ArtifactWriter,
    checks: &mut ChecksDoc,
) -> Result<Option<RateTable>> {
    let mut rows: Vec<RateRow> = Vec::new();
    let mut gaps: Vec<(f64, ExitGapStats)> = Vec::new();
    let mut last_reference: Option<ExitSamples> = None;
    let mut solution_rows: Vec<Vec<String>> = Vec::new();
    if stage.simulates() {
        for &h in &cfg.h {
            let tag = format!("h={h}");
            let th = staged(&format!("simulate {tag}"), horizon_for(cfg, r, h))?;
            checks.truncation.push((h, th));
            let grid = staged("simulate", GridSpec::new(h, th.t_trunc))?;
            let storage = if stage.solves() && cfg.solver.picard { Storage::Nodes } else { Storage::Exits };
            let opts = SimOptions { refine: cfg.refine, storage, ..SimOptions::default() };
            let bundle = staged(
                &format!("simulate {tag}"),
                PathBundle::simulate(r.problem.clone(), grid, cfg.n_paths, cfg.seed, opts),
            )?;
            let name = format!("exits_h{h}.csv");
            staged("simulate", write_exit_csv(&bundle, &w.dir().join(&name)))?;
            w.adopt(&name)?;
            let gap = staged("simulate", exit_gap_moments(&bundle, 1.0))?;
            gaps.push((h, gap));
            last_reference = Some(staged("simulate", reference_exit_times(&bundle))?);
            if stage.solves() {
                staged(&format!("solve {tag}"), solve_h(cfg, r, &bundle, th, gap, w, &mut rows, &mut solution_rows))?;
            }
            if stage.moments() && cfg.moments.freidlin {
                if let Some(rep) = freidlin_for(cfg, r, &bundle, checks) {
                    checks.freidlin.push(staged(&format!("moments {tag}"), rep)?);
                }
            }
        }
        let gap_rows: Vec<Vec<String>> = gaps
            .iter()
            .map(|(h, g)| vec![num(*h), num(g.estimate), num(g.ci), g.n_effective.to_string(), num(g.censor_fraction)])
            .collect();
        w.write_csv("exit_gaps.csv", &["h", "mean_abs_gap", "ci", "n", "censored_fraction"], &gap_rows)?;
    }
    if stage.solves() {
        w.write_csv("solutions.csv", &["h", "solver", "v0", "analytic", "detail"], &solution_rows)?;
    }
    let mut table = None;
    if stage.fits() {
        let t = staged("rates", fit_table(cfg, rows, &gaps, w, checks))?;
        table = Some(t);
    }
    if stage.moments() {
        staged("moments", moment_stage(cfg, r, last_reference.as_ref(), w, checks))?;
    }
    if stage.checks() {
        let th = staged("checks", theory_stage(cfg, r, checks))?;
        checks.theory = Some(th);
    }
    Ok(table)
}

#[allow(clippy::too_many_arguments)]
fn solve_h(
    cfg: &ExperimentConfig,
    r: &ResolvedProblem,
    bundle: &PathBundle,
    th: TruncationHorizon,
    gap: ExitGapStats,
    w: &mut ArtifactWriter,
    rows: &mut Vec<RateRow>,
    solution_rows: &mut Vec<Vec<String>>,
) -> Result<()> {
    let h = bundle.grid.h;
    let x0 = r.problem.x0.clone();
    let analytic = r.solution.as_ref().map(|u| u(&x0));
    let mut node_rows: Vec<Vec<String>> = Vec::new();
    let mut push = |solver: &str, rep: Option<ErrorReport>, v0: f64, detail: String, rows: &mut Vec<RateRow>| {
        solution_rows.push(vec![
            num(h),
            solver.to_string(),
            num(v0),
            analytic.map(num).unwrap_or_default(),
            detail,
        ]);
        if let Some(rep) = rep {
            for (n, m) in rep.per_node.iter().enumerate() {
                node_rows.push(vec![solver.to_string(), n.to_string(), num(n as f64 * h), num(m.mean), num(m.ci)]);
            }
            rows.push(RateRow {
                h,
                solver: solver.to_string(),
                t_trunc: th.t_trunc,
                rigorous_truncation: th.rigorous,
                e1: rep.e1,
                e2: rep.e2,
                terminal: rep.terminal,
                exit_gap: gap,
                v0,
                n_paths: rep.n_paths,
                censored: rep.censored,
            });
        }
    };
    if cfg.solver.quadrature {
        let q = QuadratureOptions { mesh_points: cfg.solver.mesh_points, gh_order: cfg.solver.gh_order, ..Default::default() };
        let v = backward_induction(r.problem.clone(), h, bundle.grid.nodes(), &q)?;
        let rep = match &r.solution {
            Some(u) => Some(error_functionals(&v, bundle, u)?),
            None => None,
        };
        let detail = format!("max_iterations={} majorant_ok={}", v.max_iterations, v.majorant.ok);
        push("quadrature", rep, v.value_at(0, &x0), detail, rows);
    }
    if cfg.solver.picard {
        let po = PicardOptions { max_iterations: cfg.solver.picard_max_iterations, bins: cfg.solver.bins, ..Default::default() };
        let sol = solve_picard(bundle, &po)?;
        let bound = BoundSequence { seq: &sol.seq, bundle };
        let rep = match &r.solution {
            Some(u) => Some(error_functionals(&bound, bundle, u)?),
            None => None,
        };
        let v0 = crate::backward::DiscreteSolution::value(&bound, 0, 0, &x0);
        let detail = format!("iterations={} converged={} max_ratio={}", sol.history.len(), sol.converged, sol.max_ratio());
        push("picard", rep, v0, detail, rows);
    }
    if !node_rows.is_empty() {
        w.write_csv(&format!("errors_h{h}.csv"), &["solver", "node", "t", "window_error", "ci"], &node_rows)?;
    }
    Ok(())
}

fn freidlin_for(
    cfg: &ExperimentConfig,
    r: &ResolvedProblem,
    bundle: &PathBundle,
    checks: &mut ChecksDoc,
) -> Option<Result<FreidlinReport>> {
    let centred = {
        let (lo, hi) = r.problem.domain.bounding_box();
        let rad = r.problem.domain.half_width();
        let euclid = matches!(r.problem.domain, Domain::Ball { .. }) && r.problem.dim > 1;
        !euclid && lo.iter().chain(&hi).all(|v| (v.abs() - rad).abs() < 1e-12)
    };
    let rad = r.problem.domain.half_width();
    if !centred || rad - bundle.grid.h.powf(cfg.moments.alpha) <= 0.0 {
        let note = format!("Freidlin check skipped at h={}: needs a centred sup-norm ball and a positive cut-off radius", bundle.grid.h);
        if !checks.notes.contains(&note) {
            checks.notes.push(note);
        }
        return None;
    }
    Some(freidlin_check_bundle(bundle, cfg.moments.alpha, &cfg.moments.powers))
}

fn fit_column(points: &[(f64, f64, f64)]) -> (Option<RateFit>, Option<String>) {
    // Rows whose interval contains 0 carry no slope information.
    let kept: Vec<(f64, f64, f64)> = points.iter().copied().filter(|(_, v, c)| v - c > 0.0).collect();
    match fit_rate(&kept) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

fn fit_table(
    cfg: &ExperimentConfig,
    rows: Vec<RateRow>,
    gaps: &[(f64, ExitGapStats)],
    w: &mut ArtifactWriter,
    checks: &mut ChecksDoc,
) -> Result<RateTable> {
    let mut solvers: Vec<String> = rows.iter().map(|r| r.solver.clone()).collect();
    solvers.dedup();
    solvers.sort();
    solvers.dedup();
    let mut fits = Vec::new();
    for s in &solvers {
        let mine: Vec<&RateRow> = rows.iter().filter(|r| &r.solver == s).collect();
        for (col, get) in [
            ("e1", (|r: &RateRow| r.e1) as fn(&RateRow) -> MeanCi),
            ("e2", |r: &RateRow| r.e2),
            ("terminal", |r: &RateRow| r.terminal),
        ] {
            let pts: Vec<(f64, f64, f64)> = mine.iter().map(|r| (r.h, get(r).mean, get(r).ci)).collect();
            let (fit, error) = fit_column(&pts);
            fits.push(SlopeFit { column: col.to_string(), solver: s.clone(), fit, error });
        }
        if let Some(f) = fits.iter().find(|f| f.column == "e1" && &f.solver == s).and_then(|f| f.fit.clone()) {
            checks.windows.push(WindowCheck::new(format!("e1 slope ({s})"), f.slope, cfg.windows.e1_slope_min, f64::INFINITY));
        }
        let e2_ok = mine.iter().all(|r| r.e2.mean >= r.e1.mean);
        checks.windows.push(WindowCheck::new(format!("e2 >= e1 on every row ({s})"), e2_ok as u8 as f64, 1.0, 1.0));
        // Nonincreasing as h shrinks, up to the CIs.
        let mono = mine.windows(2).all(|p| p[1].e1.mean - p[1].e1.ci <= p[0].e1.mean + p[0].e1.ci);
        checks.windows.push(WindowCheck::new(format!("e1 nonincreasing in h ({s})"), mono as u8 as f64, 1.0, 1.0));
    }
    let gap_pts: Vec<(f64, f64, f64)> = gaps.iter().map(|(h, g)| (*h, g.estimate, g.ci)).collect();
    let (fit, error) = fit_column(&gap_pts);
    if let Some(f) = &fit {
        let [lo, hi] = cfg.windows.exit_gap_slope;
        checks.windows.push(WindowCheck::new("exit gap slope", f.slope, lo, hi));
    }
    fits.push(SlopeFit { column: "exit_gap".into(), solver: "forward".into(), fit, error });
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![num(r.h), r.solver.clone(), num(r.t_trunc), r.rigorous_truncation.to_string()];
            v.extend(mean_ci_cells(&r.e1));
            v.extend(mean_ci_cells(&r.e2));
            v.extend(mean_ci_cells(&r.terminal));
            v.extend([num(r.exit_gap.estimate), num(r.exit_gap.ci), num(r.v0), r.n_paths.to_string(), r.censored.to_string()]);
            v
        })
        .collect();
    w.write_csv(
        "rates.csv",
        &[
            "h", "solver", "t_trunc", "rigorous_truncation", "e1", "e1_ci", "e2", "e2_ci", "terminal", "terminal_ci",
            "exit_gap", "exit_gap_ci", "v0", "n_paths", "censored",
        ],
        &csv_rows,
    )?;
    let slope_rows: Vec<Vec<String>> = fits
        .iter()
        .map(|f| match &f.fit {
            Some(r) => vec![f.column.clone(), f.solver.clone(), num(r.slope), num(r.stderr), r.n_used.to_string(), String::new()],
            None => vec![f.column.clone(), f.solver.clone(), String::new(), String::new(), "0".into(), f.error.clone().unwrap_or_default()],
        })
        .collect();
    w.write_csv("slopes.csv", &["column", "solver", "slope", "stderr", "n_used", "error"], &slope_rows)?;
    checks.rate_fits = fits.clone();
    Ok(RateTable { rows, fits })
}

fn moment_stage(
    cfg: &ExperimentConfig,
    r: &ResolvedProblem,
    reference: Option<&ExitSamples>,
    w: &mut ArtifactWriter,
    checks: &mut ChecksDoc,
) -> Result<()> {
    let mut csv_rows: Vec<Vec<String>> = Vec::new();
    if let Some(s) = reference {
        checks.mean_exit_time = Some(s.truncated_mean());
        let mut ms = cfg.moments.m_values.clone();
        if ms.is_empty() {
            if let Domain::Interval { lo, hi } = r.problem.domain {
                let x = r.problem.x0[0];
                if let Ok(star) = one_d_threshold(x - lo, hi - x) {
                    ms = cfg.moments.fractions.iter().map(|f| f * star).collect();
                }
            }
        }
        if s.len() < 10_000 {
            checks.notes.push(format!("exponential-moment scan skipped: {} samples, need 10^4", s.len()));
        } else if !ms.is_empty() {
            let rows: Vec<ScanRow> = exp_moment_scan(s, &ms, &geometric_batches(s.len()))?;
            for row in &rows {
                let verdict = serde_json::to_value(row.verdict).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
                for (n, est) in &row.estimates {
                    csv_rows.push(vec![num(row.m), n.to_string(), num(*est), verdict.clone(), num(row.censor_mass)]);
                }
            }
        }
    }
    w.write_csv("moments.csv", &["m", "batch", "estimate", "verdict", "censor_mass"], &csv_rows)?;
    Ok(())
}

fn theory_stage(cfg: &ExperimentConfig, r: &ResolvedProblem, checks: &mut ChecksDoc) -> Result<TheoryResults> {
    let c = cfg.checks;
    let win = cfg.windows;
    let mut out = TheoryResults::default();
    let seed = cfg.seed;
    if c.gronwall {
        let g = gronwall_batch(c.gronwall_chains, 3, seed)?;
        checks.windows.push(WindowCheck::new("gronwall violations", g.violations as f64, 0.0, 0.0));
        out.gronwall = Some(g);
    }
    if c.kolmogorov {
        let bp = SampledPaths::brownian(r.problem.dim, 1.0 / 64.0, 64, c.n_paths, seed)?;
        for p in [2.0, 4.0] {
            let k = kolmogorov_ratio_fit(&bp, p, &dyadic_lags(&bp))?;
            let [lo, hi] = win.kolmogorov_alpha;
            checks.windows.push(WindowCheck::new(format!("kolmogorov alpha brownian p={p}"), k.alpha, lo, hi));
            out.kolmogorov_brownian.push(k);
        }
        let h = cfg.h[cfg.h.len() - 1];
        let steps = (1.0 / h).round() as usize;
        let ep = SampledPaths::euler_interpolation(&r.problem, h, 4, steps.max(1), c.n_paths, seed)?;
        out.kolmogorov_euler = Some(kolmogorov_ratio_fit(&ep, 4.0, &dyadic_lags(&ep))?);
    }
    if c.em_slope {
        let divides_one = cfg.h.iter().all(|h| ((1.0 / h).round() * h - 1.0).abs() < 1e-9);
        if cfg.h.len() >= 3 && divides_one {
            let fixed = em_strong_error_slope(&r.problem, &cfg.h, Horizon::Fixed { t: 1.0 }, c.refine, c.n_paths, seed, 2.0)?;
            let stopped =
                em_strong_error_slope(&r.problem, &cfg.h, Horizon::CoarseExit { t_max: 20.0 }, c.refine, c.n_paths, seed, 2.0)?;
            for (name, rep, [lo, hi]) in [("fixed", &fixed, win.em_order_fixed), ("stopped", &stopped, win.em_order_stopped)] {
                match (rep.verdict, rep.order) {
                    (EmVerdict::Degenerate, _) => out.notes.push(format!("EM strong error ({name}) is identically zero")),
                    (_, Some(o)) => checks.windows.push(WindowCheck::new(format!("em strong order ({name})"), o, lo, hi)),
                    _ => out.notes.push(format!("EM strong slope ({name}) could not be fitted")),
                }
            }
            out.em_fixed = Some(fixed);
            out.em_stopped = Some(stopped);
        } else {
            out.notes.push("EM slope skipped: needs >= 3 stepsizes dividing 1".into());
        }
    }
    if c.two_stopping {
        let hs = [cfg.h[0], cfg.h[cfg.h.len() - 1]];
        if hs[0] > hs[1] {
            let fam = euler_exit_family(&r.problem, &hs, c.refine, 30.0, c.n_paths, seed, 2.0)?;
            let rep = two_stopping_gap_check(&fam, 2.0, 0.5, 0.05, GAP_SLOPE_SLACK)?;
            if rep.verdict != GapVerdict::Degenerate {
                checks.windows.push(WindowCheck::new(
                    "two-stopping ratio bounded",
                    (rep.verdict == GapVerdict::Bounded) as u8 as f64,
                    1.0,
                    1.0,
                ));
            }
            out.two_stopping = Some(rep);
        } else {
            out.notes.push("two-stopping check skipped: needs two stepsizes".into());
        }
    }
    Ok(out)
}
