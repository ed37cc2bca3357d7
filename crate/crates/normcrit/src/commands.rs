//! Command implementations. Each returns the process exit status.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Result};
use normcrit_core::asymptotics::{
    cold_control, fit_exponent, sweep, sweep_ground_state, sweep_point, SweepRecord, SWEEP_COLUMNS,
};
use normcrit_core::bubbles::bubble_norm_orders;
use normcrit_core::functional::gn_estimate;
use normcrit_core::minimize::{evaluate_state, in_ball, solve_local_min, SolveResult};
use normcrit_core::mountain::{level_bound_check, level_bound_curve, solve_mountain_pass};
use normcrit_core::{DerivedConstants, MultiplierPair};
use serde::Serialize;

use crate::cli::{Cli, Command, Common};
use crate::config::{load_config, RunSpec};
use crate::io::{emit, read_solve, write_fields, write_table, Document, StateDump};
use crate::jobs::{self, Task};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_UNCONVERGED: i32 = 2;

/// Error with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

trait Classify<T> {
    fn usage(self) -> std::result::Result<T, Failure>;
    fn numeric(self) -> std::result::Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for std::result::Result<T, E> {
    fn usage(self) -> std::result::Result<T, Failure> {
        self.map_err(|e| Failure { code: EXIT_USAGE, error: e.into() })
    }
    fn numeric(self) -> std::result::Result<T, Failure> {
        self.map_err(|e| Failure { code: EXIT_UNCONVERGED, error: e.into() })
    }
}

type Outcome = std::result::Result<i32, Failure>;

fn status(ok: bool) -> i32 {
    if ok {
        EXIT_OK
    } else {
        EXIT_UNCONVERGED
    }
}

/// Effective spec: the config (or defaults) with the output paths filled in.
fn spec_for(common: &Common) -> Result<RunSpec> {
    let mut spec = match &common.config {
        Some(p) => load_config(p)?,
        None => RunSpec::default().resolve()?,
    };
    if let Some(o) = &common.out {
        spec.outputs.out = Some(o.display().to_string());
    }
    Ok(spec)
}

fn out_path(spec: &RunSpec) -> Option<PathBuf> {
    spec.outputs.out.as_ref().map(PathBuf::from)
}

#[derive(Debug, Serialize)]
pub struct DiagnosticsReport {
    pub descent_steps: usize,
    pub tail_mass: f64,
    pub max_mass_error: f64,
    pub ball_rejections: usize,
    pub rearrangements: usize,
    pub newton_iterations: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct SolveReport {
    pub grid_id: String,
    pub converged: bool,
    pub level: f64,
    pub kinetic: f64,
    pub multipliers: MultiplierPair,
    pub multipliers_pohozaev: Option<MultiplierPair>,
    /// Largest relative gap between the two multiplier estimates.
    pub multiplier_agreement: Option<f64>,
    pub grad_residual: f64,
    pub poho_residual: f64,
    pub iterations: usize,
    pub constants: Option<DerivedConstants>,
    pub in_ball: Option<bool>,
    /// m_ν + (1/N)μ_max^{(2−N)/2}S^{N/2}, the strict upper bound of the mountain-pass level.
    pub level_bound: Option<f64>,
    pub path_levels: Option<Vec<f64>>,
    pub diagnostics: DiagnosticsReport,
    pub state: StateDump,
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

impl SolveReport {
    pub fn of(r: &SolveResult) -> Self {
        let d = &r.diagnostics;
        let agreement = d.multipliers_pohozaev.map(|m| {
            rel_gap(m.lambda1, r.multipliers.lambda1).max(rel_gap(m.lambda2, r.multipliers.lambda2))
        });
        SolveReport {
            grid_id: r.state.grid().id(),
            converged: r.converged,
            level: r.level,
            kinetic: r.kinetic,
            multipliers: r.multipliers,
            multipliers_pohozaev: d.multipliers_pohozaev,
            multiplier_agreement: agreement,
            grad_residual: r.grad_residual,
            poho_residual: r.poho_residual,
            iterations: r.iterations,
            constants: r.constants,
            in_ball: r.constants.as_ref().map(|c| in_ball(&r.state, c)),
            level_bound: None,
            path_levels: None,
            diagnostics: DiagnosticsReport {
                descent_steps: d.energy_history.len(),
                tail_mass: d.tail_mass,
                max_mass_error: d.max_mass_error,
                ball_rejections: d.ball_rejections,
                rearrangements: d.rearrangements,
                newton_iterations: d.newton_iterations,
                notes: d.notes.clone(),
            },
            state: StateDump::of(&r.state),
        }
    }
}

fn constants(common: &Common) -> Outcome {
    let spec = spec_for(common).usage()?;
    let c = spec.derived().usage()?;
    #[derive(Serialize)]
    struct Report {
        constants: DerivedConstants,
        /// (1/N)μ_max^{(2−N)/2}S^{N/2}.
        bubble_energy: f64,
        geometry_guaranteed: bool,
    }
    let r = Report { constants: c, bubble_energy: spec.params.bubble_energy(), geometry_guaranteed: c.geometry_guaranteed(spec.params.nu) };
    emit(out_path(&spec).as_deref(), &Document::new("constants", &spec, r).render().usage()?).usage()?;
    Ok(EXIT_OK)
}

fn solve_min(common: &Common, fields: Option<&Path>) -> Outcome {
    let mut spec = spec_for(common).usage()?;
    if let Some(f) = fields {
        spec.outputs.fields = Some(f.display().to_string());
    }
    let grid = spec.build_grid().usage()?;
    let c = spec.derived().usage()?;
    let r = solve_local_min(&spec.params, grid, &c, &spec.solver, None).numeric()?;
    if let Some(f) = &spec.outputs.fields {
        write_fields(Path::new(f), &r.state).usage()?;
    }
    let doc = Document::new("solve-min", &spec, SolveReport::of(&r));
    emit(out_path(&spec).as_deref(), &doc.render().usage()?).usage()?;
    Ok(status(r.converged))
}

/// Spec and reconstructed minimizer from a solve-min document.
fn load_minimizer(common: &Common, min: &Path) -> std::result::Result<(RunSpec, SolveResult), Failure> {
    let doc = read_solve(min).usage()?;
    let mut spec = match &common.config {
        Some(_) => spec_for(common).usage()?,
        None => {
            let mut s = doc.spec.clone().resolve().usage()?;
            s.outputs = Default::default();
            if let Some(o) = &common.out {
                s.outputs.out = Some(o.display().to_string());
            }
            s
        }
    };
    if spec.params != doc.spec.params {
        return Err(anyhow!("the configured params differ from those of {}", min.display())).usage();
    }
    spec.outputs.fields = None;
    let grid = spec.build_grid().usage()?;
    let state = doc.result.state.to_state(&grid).usage()?;
    let c = spec.derived().usage()?;
    let r = evaluate_state(&spec.params, state, Some(c), &spec.solver).usage()?;
    Ok((spec, r))
}

fn solve_mp(common: &Common, min: &Path, fields: Option<&Path>, path: Option<&Path>) -> Outcome {
    let (mut spec, minimizer) = load_minimizer(common, min)?;
    if let Some(f) = fields {
        spec.outputs.fields = Some(f.display().to_string());
    }
    let (r, p) = solve_mountain_pass(&spec.params, &minimizer, &spec.mp).numeric()?;
    if let Some(f) = &spec.outputs.fields {
        write_fields(Path::new(f), &r.state).usage()?;
    }
    if let Some(f) = path {
        let rows = p.levels.iter().enumerate().map(|(i, l)| vec![i.to_string(), crate::json::float(*l)]);
        write_table(f, &["index", "level"], rows).usage()?;
    }
    let mut rep = SolveReport::of(&r);
    rep.level_bound = Some(minimizer.level + spec.params.bubble_energy());
    rep.path_levels = Some(p.levels.clone());
    emit(out_path(&spec).as_deref(), &Document::new("solve-mp", &spec, rep).render().usage()?).usage()?;
    Ok(status(r.converged))
}

fn level_bound(common: &Common, min: &Path, n: &[f64], curves: Option<&Path>) -> Outcome {
    let (spec, minimizer) = load_minimizer(common, min)?;
    let check = level_bound_check(&spec.params, &minimizer, n, &spec.level_bound).numeric()?;
    if let Some(prefix) = curves {
        let o = &spec.level_bound;
        let ts: Vec<f64> =
            (0..o.t_points).map(|k| o.t_lo + (o.t_hi - o.t_lo) * k as f64 / (o.t_points - 1) as f64).collect();
        for &nn in n {
            let pts = level_bound_curve(&spec.params, &minimizer.state, nn, check.component, &ts).numeric()?;
            let file = PathBuf::from(format!("{}_n{}.csv", prefix.display(), nn));
            let rows = pts.iter().map(|p| vec![crate::json::float(p.t), crate::json::float(p.closed)]);
            write_table(&file, &["t", "H"], rows).usage()?;
        }
    }
    let ok = check.reports.last().is_some_and(|r| r.satisfied);
    emit(out_path(&spec).as_deref(), &Document::new("level-bound", &spec, check).render().usage()?).usage()?;
    Ok(status(ok))
}

fn bubble_orders(common: &Common, n: &[f64]) -> Outcome {
    let spec = spec_for(common).usage()?;
    let rep = bubble_norm_orders(spec.params.dim, n).usage()?;
    emit(out_path(&spec).as_deref(), &Document::new("bubble-orders", &spec, rep).render().usage()?).usage()?;
    Ok(EXIT_OK)
}

fn gn(common: &Common) -> Outcome {
    let spec = spec_for(common).usage()?;
    let grid = spec.build_grid().usage()?;
    let rep = gn_estimate(grid, spec.params.alpha, spec.params.beta, spec.gn.trials, spec.seed).numeric()?;
    emit(out_path(&spec).as_deref(), &Document::new("gn-estimate", &spec, rep).render().usage()?).usage()?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub expected: f64,
}

fn fit(recs: &[SweepRecord], y: impl Fn(&SweepRecord) -> f64, expected: f64) -> Option<ExponentFit> {
    let pts: Vec<(f64, f64)> = recs.iter().map(|r| (r.nu, y(r))).filter(|p| p.1.is_finite() && p.1 > 0.0).collect();
    fit_exponent(&pts).ok().map(|(slope, intercept, r2)| ExponentFit { slope, intercept, r2, expected })
}

#[derive(Debug, Serialize)]
pub struct SweepReport {
    pub nu_list: Vec<f64>,
    pub ground_state_level: f64,
    pub ground_state_converged: bool,
    /// (1/N)min μᵢ^{(2−N)/2}S^{N/2}, the ν → 0 limit of the mountain-pass level.
    pub mp_limit: f64,
    pub lambda_sum_fit: Option<ExponentFit>,
    pub kinetic_fit: Option<ExponentFit>,
    pub t_nu_fit: Option<ExponentFit>,
    pub records: Vec<SweepRecord>,
}

fn sweep_records(spec: &RunSpec, jobs: usize) -> Result<SweepReport> {
    let grid = spec.build_grid()?;
    let opts = spec.sweep_opts();
    let nus = spec.nu_list()?;
    let gs = sweep_ground_state(&spec.params, grid.clone(), &opts)?;
    let gs_state = &gs.state;
    let mut recs = if spec.sweep.warm_start {
        let cold_wanted = spec.sweep.cold_controls && nus.len() > 1;
        let g2 = grid.clone();
        let mut tasks: Vec<Task<Result<Vec<SweepRecord>>>> = vec![Box::new(|| {
            Ok(sweep(&spec.params, &nus, g2, Some(gs_state), &opts)?)
        })];
        if cold_wanted {
            let last = *nus.last().unwrap();
            let (g3, o3) = (grid.clone(), &opts);
            tasks.push(Box::new(move || Ok(vec![sweep_point(&spec.params, last, g3, Some(gs_state), o3)])));
        }
        let mut out = jobs::run(jobs, tasks).into_iter();
        let mut recs = out.next().unwrap()?;
        if let Some(cold) = out.next() {
            let cold = cold_control(&cold?[0]);
            let first = cold_control(&recs[0]);
            recs[0].cold = Some(first);
            recs.last_mut().unwrap().cold = Some(cold);
        }
        recs
    } else {
        spec.params.validate()?;
        let tasks: Vec<Task<SweepRecord>> = nus
            .iter()
            .map(|&nu| {
                let (g, o) = (grid.clone(), &opts);
                Box::new(move || sweep_point(&spec.params, nu, g, Some(gs_state), o)) as Task<SweepRecord>
            })
            .collect();
        let mut recs = jobs::run(jobs, tasks);
        for k in [0, recs.len() - 1] {
            recs[k].cold = Some(cold_control(&recs[k]));
        }
        recs
    };
    if recs.is_empty() {
        bail!("empty sweep");
    }
    for r in &mut recs {
        r.gs_unique_unverified = true;
    }
    let e = 2.0 / (2.0 - spec.params.gamma());
    let ok = |r: &SweepRecord| r.converged_min();
    let conv: Vec<SweepRecord> = recs.iter().filter(|r| ok(r)).cloned().collect();
    Ok(SweepReport {
        nu_list: nus.clone(),
        ground_state_level: gs.level,
        ground_state_converged: gs.converged,
        mp_limit: spec.params.bubble_energy(),
        lambda_sum_fit: fit(&conv, |r| r.min.lambda1 + r.min.lambda2, e),
        kinetic_fit: fit(&conv, |r| r.min.kinetic, e),
        t_nu_fit: fit(&conv, |r| r.t_nu, e / 2.0),
        records: recs,
    })
}

fn csv_cell(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::from("NaN")
    }
}

pub fn sweep_rows(recs: &[SweepRecord]) -> Vec<Vec<String>> {
    recs.iter()
        .map(|r| {
            let row = r.csv_row();
            let mut cells: Vec<String> = row[..15].iter().map(|&x| csv_cell(x)).collect();
            cells.push(r.converged_min().to_string());
            cells.push(r.converged_mp().to_string());
            cells
        })
        .collect()
}

fn run_sweep(common: &Common, records: Option<&Path>, jobs: usize) -> Outcome {
    let spec = spec_for(common).usage()?;
    spec.nu_list().and_then(|l| {
        if l.is_empty() || l.iter().any(|&x| !(x > 0.0)) || l.windows(2).any(|w| !(w[1] < w[0])) {
            bail!("invalid `sweep.nu_list`: must be positive and strictly decreasing");
        }
        Ok(())
    })
    .usage()?;
    let rep = sweep_records(&spec, jobs).numeric()?;
    let ok = rep.records.iter().all(|r| r.converged_min() && (spec.sweep.min_only || r.converged_mp()));
    let rows = sweep_rows(&rep.records);
    let json_path = records.map(Path::to_path_buf).or_else(|| out_path(&spec).map(|p| p.with_extension("json")));
    match out_path(&spec) {
        Some(p) => write_table(&p, &SWEEP_COLUMNS, rows).usage()?,
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            w.write_record(SWEEP_COLUMNS).usage()?;
            for r in rows {
                w.write_record(&r).usage()?;
            }
            w.flush().usage()?;
        }
    }
    if let Some(p) = json_path {
        emit(Some(&p), &Document::new("sweep", &spec, rep).render().usage()?).usage()?;
    }
    Ok(status(ok))
}

pub fn run(cli: &Cli) -> i32 {
    let jobs = jobs::resolve_jobs(cli.jobs);
    let res = match &cli.command {
        Command::Constants(c) => constants(c),
        Command::SolveMin { common, fields } => solve_min(common, fields.as_deref()),
        Command::SolveMp { common, min, fields, path } => solve_mp(common, min, fields.as_deref(), path.as_deref()),
        Command::LevelBound { common, min, n, curves } => level_bound(common, min, n, curves.as_deref()),
        Command::BubbleOrders { common, n } => bubble_orders(common, n),
        Command::Sweep { common, records } => run_sweep(common, records.as_deref(), jobs),
        Command::GnEstimate(c) => gn(c),
    };
    match res {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {f}");
            f.code
        }
    }
}

/// Entry point shared by the binary: parse errors map to the usage status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}
