//! ν → 0 sweeps: scaling exponents, blow-up normalization and distances to the limit ground state.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::bubbles::{a_n, aubin_talenti};
use crate::error::{Error, Result};
use crate::functional::StatePair;
use crate::grid::{RadialField, RadialGrid, ScaleWindow};
use crate::minimize::{scan_max_log, solve_limit_ground_state, solve_local_min, SolveResult, SolverOpts};
use crate::mountain::{solve_mountain_pass, solve_mountain_pass_from, Component, MpOpts};
use crate::params::{derive_constants, DerivedConstants, ProblemParams};

/// Least-squares line through (log x, log y); returns (slope, intercept, R²).
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if points.len() < 3 {
        return Err(Error::Degenerate("a log-log fit needs at least three points"));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return Err(Error::invalid("points", "log-log fit needs positive data"));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = points.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("log-log fit needs at least two distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok((slope, intercept, r2))
}

/// Amplitude μ^{(2−N)/4} of the bubble solving −Δw = μw^{2*−1}.
pub fn bubble_amplitude(dim: u32, mu: f64) -> f64 {
    mu.powf((2.0 - dim as f64) / 4.0)
}

/// Concentration scale ε such that ε^{(N−2)/2}f(ε·) has the sup of μ^{(2−N)/4}U.
pub fn extract_epsilon(f: &RadialField, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::invalid("mu", "must be positive"));
    }
    let dim = f.grid().dim();
    let top = f.values()[0];
    let sup = f.sup_norm();
    if !(top > 0.0) || top < sup * (1.0 - 1e-9) {
        return Err(Error::Degenerate("the profile must attain a positive maximum at the origin"));
    }
    let k = (dim as f64 - 2.0) / 2.0;
    Ok((bubble_amplitude(dim, mu) * a_n(dim) / top).powf(1.0 / k))
}

/// Relative D^{1,2} distance of the normalized dilation of f to μ^{(2−N)/4}U.
pub fn bubble_distance(f: &RadialField, mu: f64) -> Result<f64> {
    let eps = extract_epsilon(f, mu)?;
    let g = f.dilate(eps, &ScaleWindow::default())?;
    let c = bubble_amplitude(f.grid().dim(), mu);
    let target = aubin_talenti(f.grid()).scale(c);
    let diff: Vec<f64> = g.values().iter().zip(target.values()).map(|(a, b)| a - b).collect();
    Ok((f.grid().grad_sq(&diff) / target.grad_sq()).sqrt())
}

fn e_norm_diff(g: &RadialGrid, u: &[f64], v: &[f64], a: &StatePair) -> f64 {
    let du: Vec<f64> = u.iter().zip(a.u.values()).map(|(x, y)| x - y).collect();
    let dv: Vec<f64> = v.iter().zip(a.v.values()).map(|(x, y)| x - y).collect();
    (g.grad_sq(&du) + g.grad_sq(&dv) + g.mass_sq(&du) + g.mass_sq(&dv)).sqrt()
}

/// argmin over t of ‖t⋆s − gs‖_E and the minimal distance.
pub fn ground_state_distance(s: &StatePair, gs: &StatePair) -> Result<(f64, f64)> {
    if !s.u.same_grid(&gs.u) {
        return Err(Error::GridMismatch);
    }
    let (ks, kg) = (s.kinetic(), gs.kinetic());
    if !(ks > 0.0 && kg > 0.0) {
        return Err(Error::Degenerate("ground-state distance needs nonzero states"));
    }
    let g = s.grid().clone();
    let dim = g.dim() as f64;
    let scale = (kg / ks).sqrt();
    let w = ScaleWindow::default();
    let lo = (scale / 1e2).max(w.lo);
    let hi = (scale * 1e2).min(w.hi);
    let mut obj = |t: f64| -> f64 {
        let amp = t.powf(dim / 2.0);
        let u = g.rescale(s.u.values(), amp, t);
        let v = g.rescale(s.v.values(), amp, t);
        -e_norm_diff(&g, &u, &v, gs)
    };
    let (t, d) = scan_max_log(&mut obj, lo, hi, 81);
    Ok((t, -d))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SweepOpts {
    pub solver: SolverOpts,
    pub mp: MpOpts,
    /// Start each ν from the solutions at the previous ν.
    pub warm_start: bool,
    /// Skip the mountain-pass solve.
    pub min_only: bool,
    pub c_gn: f64,
    pub nu0_fraction: f64,
}

impl Default for SweepOpts {
    fn default() -> Self {
        SweepOpts {
            solver: SolverOpts::default(),
            mp: MpOpts::default(),
            warm_start: true,
            min_only: false,
            c_gn: 0.208_415_633_176_509_77,
            nu0_fraction: 0.5,
        }
    }
}

/// The reportable part of a SolveResult.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StateSummary {
    pub level: f64,
    pub kinetic: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub sup_u: f64,
    pub sup_v: f64,
    pub grad_residual: f64,
    pub poho_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub notes: Vec<String>,
}

impl StateSummary {
    pub fn of(r: &SolveResult) -> Self {
        StateSummary {
            level: r.level,
            kinetic: r.kinetic,
            lambda1: r.multipliers.lambda1,
            lambda2: r.multipliers.lambda2,
            sup_u: r.state.u.sup_norm(),
            sup_v: r.state.v.sup_norm(),
            grad_residual: r.grad_residual,
            poho_residual: r.poho_residual,
            iterations: r.iterations,
            converged: r.converged,
            notes: r.diagnostics.notes.clone(),
        }
    }

    fn failed(note: String) -> Self {
        StateSummary {
            level: f64::NAN,
            kinetic: f64::NAN,
            lambda1: f64::NAN,
            lambda2: f64::NAN,
            sup_u: f64::NAN,
            sup_v: f64::NAN,
            grad_residual: f64::NAN,
            poho_residual: f64::NAN,
            iterations: 0,
            converged: false,
            notes: alloc::vec![note],
        }
    }
}

/// Levels of a cold-started solve at the same ν.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ColdControl {
    pub m_level: f64,
    pub mp_level: f64,
    pub converged_min: bool,
    pub converged_mp: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRecord {
    pub nu: f64,
    pub min: StateSummary,
    pub mp: Option<StateSummary>,
    pub t_nu: f64,
    pub gs_distance: f64,
    /// Component whose rescaling is compared with the bubble.
    pub blowup_component: Component,
    pub eps_nu: f64,
    pub bubble_distance: f64,
    /// The limit ground state is one computed representative; uniqueness is not known.
    pub gs_unique_unverified: bool,
    pub cold: Option<ColdControl>,
    pub grid_id: String,
    pub constants: Option<DerivedConstants>,
}

impl SweepRecord {
    pub fn converged_min(&self) -> bool {
        self.min.converged
    }

    pub fn converged_mp(&self) -> bool {
        self.mp.as_ref().is_some_and(|m| m.converged)
    }
}

/// CSV header of `SweepRecord::csv_row`.
pub const SWEEP_COLUMNS: [&str; 17] = [
    "nu", "m_level", "mp_level", "kinetic_min", "kinetic_mp", "lambda1", "lambda2", "lambda1_mp", "lambda2_mp",
    "supnorm_u", "supnorm_v", "t_nu", "gs_distance", "eps_nu", "bubble_distance", "converged_min", "converged_mp",
];

impl SweepRecord {
    /// Values in `SWEEP_COLUMNS` order; booleans as 0/1.
    pub fn csv_row(&self) -> [f64; 17] {
        let nan = f64::NAN;
        let mp = self.mp.as_ref();
        let pick = |g: fn(&StateSummary) -> f64| mp.map_or(nan, g);
        [
            self.nu,
            self.min.level,
            pick(|m| m.level),
            self.min.kinetic,
            pick(|m| m.kinetic),
            self.min.lambda1,
            self.min.lambda2,
            pick(|m| m.lambda1),
            pick(|m| m.lambda2),
            self.min.sup_u,
            self.min.sup_v,
            self.t_nu,
            self.gs_distance,
            self.eps_nu,
            self.bubble_distance,
            self.converged_min() as u8 as f64,
            self.converged_mp() as u8 as f64,
        ]
    }
}

/// ν̄₀·2^{−k} for k in the given range.
pub fn default_nu_list(c: &DerivedConstants, ks: core::ops::RangeInclusive<i32>) -> Vec<f64> {
    ks.map(|k| c.nu_bar0 * 2.0.powi(-k)).collect()
}

/// Ground state of the limit system for the sweep's distance column.
pub fn sweep_ground_state(base: &ProblemParams, grid: Arc<RadialGrid>, opts: &SweepOpts) -> Result<SolveResult> {
    solve_limit_ground_state(base, grid, &opts.solver, None)
}

struct Prev {
    nu: f64,
    min: StatePair,
    mp: Option<StatePair>,
}

fn blowup_component(p: &ProblemParams, mp: &StatePair) -> Component {
    if p.mu1 == p.mu2 {
        if mp.v.sup_norm() > mp.u.sup_norm() {
            Component::V
        } else {
            Component::U
        }
    } else {
        Component::dominant(p)
    }
}

fn record(
    p: &ProblemParams,
    grid: &Arc<RadialGrid>,
    gs: Option<&StatePair>,
    opts: &SweepOpts,
    prev: Option<&Prev>,
) -> (SweepRecord, Option<Prev>) {
    let c = derive_constants(p, opts.c_gn, opts.nu0_fraction).ok();
    let mut rec = SweepRecord {
        nu: p.nu,
        min: StateSummary::failed(String::new()),
        mp: None,
        t_nu: f64::NAN,
        gs_distance: f64::NAN,
        blowup_component: Component::dominant(p),
        eps_nu: f64::NAN,
        bubble_distance: f64::NAN,
        gs_unique_unverified: true,
        cold: None,
        grid_id: grid.id(),
        constants: c,
    };
    let Some(c) = c else {
        rec.min = StateSummary::failed(String::from("constants could not be derived"));
        return (rec, None);
    };
    let gamma = p.gamma();
    let init = prev.and_then(|q| {
        let t = (p.nu / q.nu).powf(1.0 / (2.0 - gamma));
        q.min.fiber_scale(t, &opts.solver.window).ok()
    });
    let min = match solve_local_min(p, grid.clone(), &c, &opts.solver, init) {
        Ok(r) => r,
        Err(e) => {
            rec.min = StateSummary::failed(alloc::format!("local minimization failed: {e}"));
            return (rec, None);
        }
    };
    rec.min = StateSummary::of(&min);
    if let Some(gs) = gs {
        if let Ok((t, d)) = ground_state_distance(&min.state, gs) {
            rec.t_nu = t;
            rec.gs_distance = d;
        }
    }
    let mut next = Prev { nu: p.nu, min: min.state.clone(), mp: None };
    if opts.min_only {
        return (rec, Some(next));
    }
    let mp = match prev.and_then(|q| q.mp.as_ref()) {
        Some(init) => solve_mountain_pass_from(p, &min, init, &opts.mp),
        None => solve_mountain_pass(p, &min, &opts.mp).map(|(r, _)| r),
    };
    match mp {
        Ok(r) => {
            let comp = blowup_component(p, &r.state);
            rec.blowup_component = comp;
            let (field, mu) = match comp {
                Component::U => (&r.state.u, p.mu1),
                Component::V => (&r.state.v, p.mu2),
            };
            if let Ok(eps) = extract_epsilon(field, mu) {
                rec.eps_nu = eps;
                rec.bubble_distance = bubble_distance(field, mu).unwrap_or(f64::NAN);
            }
            rec.mp = Some(StateSummary::of(&r));
            next.mp = Some(r.state);
        }
        Err(e) => rec.mp = Some(StateSummary::failed(alloc::format!("mountain-pass solve failed: {e}"))),
    }
    (rec, Some(next))
}

/// One record solved from cold starts, without warm-start information.
pub fn sweep_point(base: &ProblemParams, nu: f64, grid: Arc<RadialGrid>, gs: Option<&StatePair>, opts: &SweepOpts) -> SweepRecord {
    let p = base.with_nu(nu);
    record(&p, &grid, gs, opts, None).0
}

/// Cold-start control for a record.
pub fn cold_control(r: &SweepRecord) -> ColdControl {
    ColdControl {
        m_level: r.min.level,
        mp_level: r.mp.as_ref().map_or(f64::NAN, |m| m.level),
        converged_min: r.converged_min(),
        converged_mp: r.converged_mp(),
    }
}

/// Local minimizer and mountain pass along a decreasing list of ν, each
/// warm-started from the previous one. Failed solves yield non-converged
/// records and the chain restarts cold at the next ν. Cold-start controls are
/// left empty; `sweep_point` computes them.
pub fn sweep(base: &ProblemParams, nu_list: &[f64], grid: Arc<RadialGrid>, gs: Option<&StatePair>, opts: &SweepOpts) -> Result<Vec<SweepRecord>> {
    if nu_list.is_empty() {
        return Err(Error::invalid("nu_list", "must not be empty"));
    }
    if nu_list.iter().any(|&n| !(n > 0.0)) {
        return Err(Error::invalid("nu_list", "values must be positive"));
    }
    if nu_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("nu_list", "must be strictly decreasing"));
    }
    base.validate()?;
    let mut out = Vec::with_capacity(nu_list.len());
    let mut prev: Option<Prev> = None;
    for &nu in nu_list {
        let p = base.with_nu(nu);
        let (rec, next) = record(&p, &grid, gs, opts, if opts.warm_start { prev.as_ref() } else { None });
        prev = next;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grading;
    use rand::{Rng, SeedableRng};

    fn grid(dim: u32) -> Arc<RadialGrid> {
        Arc::new(RadialGrid::default_for(dim).unwrap())
    }

    #[test]
    fn power_law_slope_is_exact() {
        let pts: Vec<(f64, f64)> = (1..6).map(|k| (k as f64, (k * k) as f64)).collect();
        let (s, _, r2) = fit_exponent(&pts).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<(f64, f64)> = (0..12)
            .map(|k| {
                let x = 2.0f64.powi(-k);
                (x, 3.0 * x.powf(0.7) * (1.0 + 0.01 * rng.gen_range(-1.0..1.0)))
            })
            .collect();
        let (s, _, _) = fit_exponent(&pts).unwrap();
        assert!((s - 0.7).abs() < 0.05);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_exponent(&[(1.0, 1.0)]).is_err());
        assert!(fit_exponent(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit_exponent(&[(1.0, 1.0), (2.0, -2.0), (3.0, 1.0)]).is_err());
        assert!(fit_exponent(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
    }

    #[test]
    fn epsilon_fixed_point_and_round_trip() {
        for dim in [3, 4] {
            let g = grid(dim);
            for mu in [1.0, 2.0] {
                let b = aubin_talenti(&g).scale(bubble_amplitude(dim, mu));
                assert!((extract_epsilon(&b, mu).unwrap() - 1.0).abs() < 1e-14);
                assert!(bubble_distance(&b, mu).unwrap() < 1e-10);
                for e0 in [0.1, 0.5, 3.0] {
                    let d = b.dilate(e0, &ScaleWindow::default()).unwrap();
                    assert!((extract_epsilon(&d, mu).unwrap() * e0 - 1.0).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn epsilon_rejects_off_centre_peak() {
        let g = grid(3);
        let f = RadialField::from_fn(g.clone(), |r| (-(r - 2.0) * (r - 2.0)).exp());
        assert!(extract_epsilon(&f, 1.0).is_err());
        assert!(extract_epsilon(&RadialField::zeros(g), 1.0).is_err());
    }

    #[test]
    fn bubble_distance_linear_response() {
        let g = grid(3);
        let b = aubin_talenti(&g);
        // perturbation vanishing at the origin so ε stays 1
        let phi = RadialField::from_fn(g.clone(), |r| r * r * (-r).exp());
        let d = |delta: f64| {
            let vals: Vec<f64> = b.values().iter().zip(phi.values()).map(|(x, y)| x + delta * y).collect();
            bubble_distance(&RadialField::new(g.clone(), vals).unwrap(), 1.0).unwrap()
        };
        let (d1, d2) = (d(1e-3), d(2e-3));
        let expect = 1e-3 * (phi.grad_sq() / b.grad_sq()).sqrt();
        assert!((d1 / expect - 1.0).abs() < 1e-6);
        assert!((d2 / d1 - 2.0).abs() < 1e-6);
    }

    #[test]
    fn ground_state_distance_of_itself() {
        let g = Arc::new(RadialGrid::build(3, 40.0, 2000, Grading::Exponential { h_min: 1e-5 }).unwrap());
        let s = StatePair::new(
            RadialField::from_fn(g.clone(), |r| (-r * r / 2.0).exp()),
            RadialField::from_fn(g.clone(), |r| (-r * r / 3.0).exp()),
        )
        .unwrap();
        let (t, d) = ground_state_distance(&s, &s).unwrap();
        assert!((t - 1.0).abs() < 1e-5, "{t}");
        assert!(d < 1e-6);
        let w = ScaleWindow::default();
        let scaled = s.fiber_scale(0.5, &w).unwrap();
        let (t, d) = ground_state_distance(&scaled, &s).unwrap();
        assert!((t - 2.0).abs() < 1e-3, "{t}");
        assert!(d < 1e-2, "{d}");
    }

    #[test]
    fn sweep_rejects_bad_lists() {
        let p = ProblemParams::default();
        let o = SweepOpts::default();
        assert!(sweep(&p, &[], grid(3), None, &o).is_err());
        assert!(sweep(&p, &[0.1, 0.2], grid(3), None, &o).is_err());
        assert!(sweep(&p, &[0.1, -0.2], grid(3), None, &o).is_err());
    }

    #[test]
    fn csv_row_matches_header() {
        let r = SweepRecord {
            nu: 0.5,
            min: StateSummary::failed(String::new()),
            mp: None,
            t_nu: 1.0,
            gs_distance: 0.0,
            blowup_component: Component::U,
            eps_nu: 1.0,
            bubble_distance: 0.0,
            gs_unique_unverified: true,
            cold: None,
            grid_id: String::new(),
            constants: None,
        };
        let row = r.csv_row();
        assert_eq!(row.len(), SWEEP_COLUMNS.len());
        assert_eq!(row[0], 0.5);
        assert_eq!(row[15], 0.0);
        assert!(row[2].is_nan());
    }
}
