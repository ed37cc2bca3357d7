//! Constrained minimization on the L² torus: the local minimizer inside V_{ρ₀}
//! and the ground state of the limit functional.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::functional::{Functional, MultiplierPair, StatePair};
use crate::grid::{RadialGrid, ScaleWindow};
use crate::linalg::Tridiag;
use crate::newton::newton;
use crate::params::{DerivedConstants, ProblemParams};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SolverOpts {
    /// L² norm of the projected gradient at which a solve counts as converged.
    pub tol_grad: f64,
    pub tol_mass: f64,
    /// Bound on |P_ν|/max(1, kinetic) reported as a diagnostic.
    pub tol_poho: f64,
    pub max_iter: usize,
    /// Apply the Schwartz rearrangement every k accepted steps (0 disables).
    pub rearrange_every: usize,
    /// Finish with bordered Newton iterations.
    pub newton_polish: bool,
    pub newton_iter: usize,
    pub window: ScaleWindow,
}

impl Default for SolverOpts {
    fn default() -> Self {
        SolverOpts {
            tol_grad: 1e-6,
            tol_mass: 1e-10,
            tol_poho: 1e-4,
            max_iter: 20_000,
            rearrange_every: 0,
            newton_polish: true,
            newton_iter: 30,
            window: ScaleWindow::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Diagnostics {
    /// Fraction of the total mass beyond R/2.
    pub tail_mass: f64,
    /// Energy after each accepted descent step.
    pub energy_history: Vec<f64>,
    pub multipliers_pohozaev: Option<MultiplierPair>,
    /// Largest relative mass error seen right after a projection.
    pub max_mass_error: f64,
    pub ball_rejections: usize,
    pub rearrangements: usize,
    pub newton_iterations: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub state: StatePair,
    pub level: f64,
    pub multipliers: MultiplierPair,
    pub grad_residual: f64,
    pub poho_residual: f64,
    pub kinetic: f64,
    pub iterations: usize,
    pub converged: bool,
    pub constants: Option<DerivedConstants>,
    pub diagnostics: Diagnostics,
}

/// Golden-section search for a maximum of a unimodal function on [a, b].
pub(crate) fn golden_max(f: &mut dyn FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Maximizer of a function of log t: coarse scan over [lo, hi], then golden refinement.
pub(crate) fn scan_max_log(f: &mut dyn FnMut(f64) -> f64, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let (l0, l1) = (lo.ln(), hi.ln());
    let step = (l1 - l0) / (points - 1) as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    for k in 0..points {
        let y = f((l0 + step * k as f64).exp());
        if y > best.1 {
            best = (k, y);
        }
    }
    let a = l0 + step * best.0.saturating_sub(1) as f64;
    let b = l0 + step * (best.0 + 1).min(points - 1) as f64;
    let mut g = |x: f64| f(x.exp());
    let (x, y) = golden_max(&mut g, a, b, 1e-10);
    if y >= best.1 {
        (x.exp(), y)
    } else {
        ((l0 + step * best.0 as f64).exp(), best.1)
    }
}

/// Gaussians c₁e^{−(r/w₁)²}, c₂e^{−(r/w₂)²} normalized to the masses of `f`.
pub fn gaussian_pair(f: &Functional, w1: f64, w2: f64) -> StatePair {
    let grid = f.grid();
    let mk = |w: f64, m: f64| {
        let mut x: Vec<f64> = grid.nodes().iter().map(|r| (-(r / w).powi(2)).exp()).collect();
        let last = x.len() - 1;
        x[last] = 0.0;
        let c = m / grid.mass_sq(&x).sqrt();
        x.iter_mut().for_each(|y| *y *= c);
        x
    };
    StatePair::from_vecs(grid, mk(w1, f.a), mk(w2, f.b))
}

/// Gaussian pair whose width is chosen along the fiber to minimize the energy,
/// subject to kinetic < `kin_max` when given. The fiber map of a Gaussian is a
/// Gaussian, so no interpolation is involved.
pub fn fiber_optimal_gaussians(f: &Functional, kin_max: Option<f64>) -> StatePair {
    let base = gaussian_pair(f, 1.0, 1.0);
    let q = f.parts(&base);
    let k = q.ku + q.kv;
    let hi = match kin_max {
        Some(km) => (0.9 * km / k).sqrt().min(1e3),
        None => 1e3,
    };
    let lo = (1e-3f64).min(0.5 * hi);
    let mut neg = |t: f64| -f.fiber_of(&q, t);
    let (t, _) = scan_max_log(&mut neg, lo, hi, 400);
    gaussian_pair(f, 1.0 / t, 1.0 / t)
}

pub(crate) struct Precond {
    factor: Tridiag,
    pub(crate) shift: f64,
}

impl Precond {
    /// (shift·W + stretch·L) with the outermost node decoupled.
    pub(crate) fn new(grid: &RadialGrid, shift: f64, stretch: f64) -> Self {
        let (ld, lo) = grid.stiffness();
        let w = grid.weights();
        let m = grid.len();
        let mut diag: Vec<f64> = (0..m).map(|i| shift * w[i] + stretch * ld[i]).collect();
        let mut off: Vec<f64> = lo.iter().map(|x| stretch * x).collect();
        diag[m - 1] = 1.0;
        off[m - 2] = 0.0;
        Precond { factor: Tridiag::factor(&diag, &off), shift }
    }
}

/// Direction −(P⁻¹Wg − κP⁻¹Wx), tangent to the sphere through x in the W inner product.
pub(crate) fn tangent_direction(p: &Precond, w: &[f64], g: &[f64], x: &[f64], out: &mut [f64], scratch: &mut [Vec<f64>; 3]) {
    let m = x.len();
    let [rg, rx, px] = scratch;
    for i in 0..m {
        rg[i] = w[i] * g[i];
        rx[i] = w[i] * x[i];
    }
    rg[m - 1] = 0.0;
    rx[m - 1] = 0.0;
    p.factor.solve(rg, out);
    p.factor.solve(rx, px);
    let num: f64 = rx.iter().zip(out.iter()).map(|(a, b)| a * b).sum();
    let den: f64 = rx.iter().zip(px.iter()).map(|(a, b)| a * b).sum();
    let kappa = if den > 0.0 { num / den } else { 0.0 };
    for i in 0..m {
        out[i] = -(out[i] - kappa * px[i]);
    }
    out[m - 1] = 0.0;
}

pub(crate) struct DescentOut {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub residual: f64,
    pub lam: MultiplierPair,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub max_mass_error: f64,
    pub ball_rejections: usize,
    pub rearrangements: usize,
}

pub(crate) fn normalize(grid: &RadialGrid, x: &mut [f64], m: f64) -> f64 {
    let c = m / grid.mass_sq(x).sqrt();
    x.iter_mut().for_each(|y| *y *= c);
    (grid.mass_sq(x).sqrt() - m).abs() / m
}

pub(crate) fn shift_for(lam: &MultiplierPair) -> f64 {
    let l = lam.lambda1.max(lam.lambda2);
    if l > 0.0 && l.is_finite() {
        l.clamp(1e-10, 1e3)
    } else {
        1.0
    }
}

/// Preconditioned projected gradient descent with Barzilai–Borwein steps and
/// an energy-decrease line search. Steps reaching kinetic ≥ `kin_max` are halved.
pub(crate) fn descend(f: &Functional, u0: &[f64], v0: &[f64], kin_max: Option<f64>, opts: &SolverOpts) -> DescentOut {
    let grid = f.grid().clone();
    let w = grid.weights();
    let m = grid.len();
    let (mut u, mut v) = (u0.to_vec(), v0.to_vec());
    u[m - 1] = 0.0;
    v[m - 1] = 0.0;
    let mut max_mass_error = normalize(&grid, &mut u, f.a).max(normalize(&grid, &mut v, f.b));
    let (mut gu, mut gv) = (alloc::vec![0.0; m], alloc::vec![0.0; m]);
    let (mut du, mut dv) = (alloc::vec![0.0; m], alloc::vec![0.0; m]);
    let mut scratch = [alloc::vec![0.0; m], alloc::vec![0.0; m], alloc::vec![0.0; m]];
    let mut energy = f.energy_raw(&u, &v);
    let mut history = alloc::vec![energy];
    let mut prev: Option<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    let mut tau = 1.0;
    let (mut residual, mut lam) = f.projected_residual_raw(&u, &v, &mut gu, &mut gv);
    let mut pre = Precond::new(&grid, shift_for(&lam), 1.0);
    let mut iterations = 0;
    let mut ball_rejections = 0;
    let mut rearrangements = 0;
    let mut stalls = 0;
    for it in 0..opts.max_iter {
        if residual < opts.tol_grad {
            break;
        }
        iterations = it + 1;
        let s = shift_for(&lam);
        if it % 50 == 0 && (s / pre.shift > 2.0 || pre.shift / s > 2.0) {
            pre = Precond::new(&grid, s, 1.0);
            prev = None;
        }
        tangent_direction(&pre, w, &gu, &u, &mut du, &mut scratch);
        tangent_direction(&pre, w, &gv, &v, &mut dv, &mut scratch);
        if let Some((pu, pv, pdu, pdv)) = &prev {
            let mut ss = 0.0;
            let mut sy = 0.0;
            for i in 0..m {
                let (su, sv) = (u[i] - pu[i], v[i] - pv[i]);
                ss += w[i] * (su * su + sv * sv);
                sy -= w[i] * (su * (du[i] - pdu[i]) + sv * (dv[i] - pdv[i]));
            }
            tau = if sy > 0.0 { ss / sy } else { 2.0 * tau };
            tau = tau.clamp(1e-4, 1e4);
        }
        let mut accepted = None;
        let mut t = tau;
        while t >= 1e-12 {
            let mut un: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + t * b).collect();
            let mut vn: Vec<f64> = v.iter().zip(&dv).map(|(a, b)| a + t * b).collect();
            let err = normalize(&grid, &mut un, f.a).max(normalize(&grid, &mut vn, f.b));
            if let Some(km) = kin_max {
                if grid.grad_sq(&un) + grid.grad_sq(&vn) >= km {
                    ball_rejections += 1;
                    t *= 0.5;
                    continue;
                }
            }
            let en = f.energy_raw(&un, &vn);
            if en <= energy + 1e-14 * energy.abs() {
                accepted = Some((un, vn, en, err));
                break;
            }
            t *= 0.5;
        }
        let Some((un, vn, en, err)) = accepted else {
            stalls += 1;
            prev = None;
            tau = 1.0;
            if stalls > 3 {
                break;
            }
            continue;
        };
        stalls = 0;
        max_mass_error = max_mass_error.max(err);
        tau = t;
        prev = Some((core::mem::replace(&mut u, un), core::mem::replace(&mut v, vn), du.clone(), dv.clone()));
        energy = en;
        history.push(energy);

        if opts.rearrange_every > 0 && iterations % opts.rearrange_every == 0 {
            let (ur, _) = crate::rearrange::rearrange(w, &u);
            let (vr, _) = crate::rearrange::rearrange(w, &v);
            let (mut ur, mut vr) = (ur, vr);
            ur[m - 1] = 0.0;
            vr[m - 1] = 0.0;
            let err = normalize(&grid, &mut ur, f.a).max(normalize(&grid, &mut vr, f.b));
            let er = f.energy_raw(&ur, &vr);
            let inside = kin_max.map_or(true, |km| grid.grad_sq(&ur) + grid.grad_sq(&vr) < km);
            if inside && er <= energy + 1e-6 * energy.abs() {
                u = ur;
                v = vr;
                energy = er.min(energy);
                max_mass_error = max_mass_error.max(err);
                rearrangements += 1;
                prev = None;
            }
        }
        let r = f.projected_residual_raw(&u, &v, &mut gu, &mut gv);
        residual = r.0;
        lam = r.1;
    }
    DescentOut { u, v, residual, lam, iterations, history, max_mass_error, ball_rejections, rearrangements }
}

/// Assembles a [`SolveResult`] from a final iterate.
pub(crate) fn finish(f: &Functional, u: Vec<f64>, v: Vec<f64>, iterations: usize, opts: &SolverOpts, mut diag: Diagnostics) -> SolveResult {
    let grid = f.grid().clone();
    let m = grid.len();
    let (mut gu, mut gv) = (alloc::vec![0.0; m], alloc::vec![0.0; m]);
    let (residual, lam) = f.projected_residual_raw(&u, &v, &mut gu, &mut gv);
    let q = f.parts_raw(&u, &v);
    let kinetic = q.ku + q.kv;
    let poho = f.pohozaev_of(&q);
    let half = grid.nodes_within(0.5 * grid.radius());
    let w = grid.weights();
    let tail: f64 = (half..m).map(|i| w[i] * (u[i] * u[i] + v[i] * v[i])).sum();
    diag.tail_mass = tail / (f.a * f.a + f.b * f.b);
    diag.multipliers_pohozaev = Some(f.multipliers_pohozaev_of(&q));
    let state = StatePair::from_vecs(&grid, u, v);
    let on_torus = state.check_torus(f.a, f.b, opts.tol_mass).is_ok();
    SolveResult {
        level: f.energy_of(&q),
        multipliers: lam,
        grad_residual: residual,
        poho_residual: poho.abs() / kinetic.max(1.0),
        kinetic,
        iterations,
        converged: residual <= opts.tol_grad && on_torus,
        constants: None,
        diagnostics: diag,
        state,
    }
}

/// Descent followed by an optional Newton polish. The Newton iterate is kept only
/// if it lowers the residual without raising the energy or leaving the ball.
pub(crate) fn solve_with(f: &Functional, init: StatePair, kin_max: Option<f64>, opts: &SolverOpts) -> Result<SolveResult> {
    if !Arc::ptr_eq(init.grid(), f.grid()) && **init.grid() != **f.grid() {
        return Err(Error::GridMismatch);
    }
    let d = descend(f, init.u.values(), init.v.values(), kin_max, opts);
    let mut diag = Diagnostics {
        energy_history: d.history,
        max_mass_error: d.max_mass_error,
        ball_rejections: d.ball_rejections,
        rearrangements: d.rearrangements,
        ..Diagnostics::default()
    };
    let (mut u, mut v) = (d.u, d.v);
    if opts.newton_polish && d.residual > 1e-3 * opts.tol_grad {
        let e0 = f.energy_raw(&u, &v);
        let nt = newton(f, &u, &v, d.lam, opts.newton_iter, 1e-3 * opts.tol_grad);
        diag.newton_iterations = nt.iterations;
        let (mut nu_, mut nv_) = (nt.u, nt.v);
        let grid = f.grid();
        let err = normalize(grid, &mut nu_, f.a).max(normalize(grid, &mut nv_, f.b));
        let e1 = f.energy_raw(&nu_, &nv_);
        let inside = kin_max.map_or(true, |km| grid.grad_sq(&nu_) + grid.grad_sq(&nv_) < km);
        let m = grid.len();
        let (mut gu, mut gv) = (alloc::vec![0.0; m], alloc::vec![0.0; m]);
        let r1 = f.projected_residual_raw(&nu_, &nv_, &mut gu, &mut gv).0;
        if r1 < d.residual && inside && e1 <= e0 + 1e-9 * e0.abs().max(1e-12) {
            u = nu_;
            v = nv_;
            diag.max_mass_error = diag.max_mass_error.max(err);
        } else {
            diag.notes.push(String::from("newton polish rejected"));
        }
    }
    Ok(finish(f, u, v, d.iterations, opts, diag))
}

/// (‖∇u‖²+‖∇v‖²)^{1/2} < ρ₀.
pub fn in_ball(s: &StatePair, c: &DerivedConstants) -> bool {
    s.kinetic().sqrt() < c.rho0
}

/// Local minimizer of I_ν on T(a,b) ∩ V_{ρ₀}. Without an initial state the
/// descent starts from Gaussians placed at the fiber minimum inside the ball.
pub fn solve_local_min(
    p: &ProblemParams,
    grid: Arc<RadialGrid>,
    c: &DerivedConstants,
    opts: &SolverOpts,
    init: Option<StatePair>,
) -> Result<SolveResult> {
    let f = Functional::new(p, grid)?;
    let kin_max = c.rho0 * c.rho0;
    let start = match init {
        Some(s) => s,
        None => fiber_optimal_gaussians(&f, Some(kin_max)),
    };
    if p.nu == 0.0 {
        let mut r = finish(&f, start.u.into_values(), start.v.into_values(), 0, opts, Diagnostics::default());
        r.converged = false;
        r.constants = Some(*c);
        r.diagnostics.notes.push(String::from(
            "nu = 0: the infimum 0 is approached by kinetic collapse and is not attained",
        ));
        return Ok(r);
    }
    let mut r = solve_with(&f, start, Some(kin_max), opts)?;
    r.constants = Some(*c);
    let notes = &mut r.diagnostics.notes;
    if !c.geometry_guaranteed(p.nu) {
        notes.push(alloc::format!("nu = {} is not below nu_bar0 = {}; local geometry not guaranteed", p.nu, c.nu_bar0));
    }
    if !(r.level < 0.0) {
        notes.push(String::from("geometry violation: level is not negative"));
    }
    if !(r.kinetic < kin_max) {
        notes.push(String::from("iterate left the ball V_rho0"));
    }
    if !(r.multipliers.lambda1 > 0.0 && r.multipliers.lambda2 > 0.0) {
        notes.push(String::from("a Lagrange multiplier is not positive"));
    }
    Ok(r)
}

/// Ground state of J(u,v) = ½(‖∇u‖²+‖∇v‖²) − ∫|u|^α|v|^β on T(a,b).
pub fn solve_limit_ground_state(p: &ProblemParams, grid: Arc<RadialGrid>, opts: &SolverOpts, init: Option<StatePair>) -> Result<SolveResult> {
    let f = Functional::limit(p, grid)?;
    let start = match init {
        Some(s) => s,
        None => fiber_optimal_gaussians(&f, None),
    };
    let mut r = solve_with(&f, start, None, opts)?;
    if !(r.level < 0.0) {
        r.diagnostics.notes.push(String::from("limit level is not negative"));
    }
    Ok(r)
}

/// Level, multipliers and residuals of a given state, e.g. one read back from disk.
pub fn evaluate_state(p: &ProblemParams, state: StatePair, constants: Option<DerivedConstants>, opts: &SolverOpts) -> Result<SolveResult> {
    let f = Functional::new(p, state.grid().clone())?;
    let mut r = finish(&f, state.u.into_values(), state.v.into_values(), 0, opts, Diagnostics::default());
    r.constants = constants;
    Ok(r)
}

/// The fiber window used when a solver needs to rescale a state.
pub fn default_window() -> ScaleWindow {
    ScaleWindow::default()
}
