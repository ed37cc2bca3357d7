//! Mountain-pass solutions and the truncated-bubble level bound.
//!
//! A path on the torus from the local minimizer to a state below twice its
//! level is deformed by descending its highest vertex. The highest vertex is
//! then refined by minimizing Ψ(w) = max_t I(t⋆w) over the torus, and polished
//! by Newton's method. Along a fiber the functional is
//! `I(t⋆w) = t²K/2 − t^{2*}C/2* − νt^γ·∫|u|^α|v|^β`, so the gradient of Ψ at w is
//! t² times the gradient of I with μᵢ scaled by t^{2*−2} and ν by t^{γ−2}.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::asymptotics::fit_exponent;
use crate::bubbles::{nodes_per_scale, truncated_bubble, Fit};
use crate::error::{Error, Result};
use crate::functional::{Functional, MultiplierPair, StatePair};
use crate::grid::{interaction_raw, RadialGrid, ScaleWindow};
use crate::minimize::{
    finish, golden_max, normalize, scan_max_log, shift_for, tangent_direction, Diagnostics, Precond, SolveResult,
    SolverOpts,
};
use crate::newton::newton;
use crate::params::ProblemParams;

/// Which component carries the bubble in the level-bound test functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Component {
    U,
    V,
}

impl Component {
    /// The component with the larger μ (u on ties).
    pub fn dominant(p: &ProblemParams) -> Self {
        if p.mu2 > p.mu1 {
            Component::V
        } else {
            Component::U
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PathKind {
    /// (1+(T−1)s)⋆(u,v).
    Fiber,
    /// The level-bound curve t ↦ (W_{n,t}, τ⋆v), t ∈ [0, T].
    Bubble,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct MpOpts {
    /// Number of path vertices K.
    pub path_points: usize,
    pub path: PathKind,
    /// Bubble index n of the initial bubble path.
    pub bubble_n: f64,
    /// Bubble component; the larger-μ one when absent.
    pub component: Option<Component>,
    pub deform_iter: usize,
    pub redistribute_every: usize,
    pub solver: SolverOpts,
}

impl Default for MpOpts {
    fn default() -> Self {
        MpOpts {
            path_points: 64,
            path: PathKind::Bubble,
            bubble_n: 16.0,
            component: None,
            deform_iter: 200,
            redistribute_every: 10,
            solver: SolverOpts::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Path {
    pub points: Vec<StatePair>,
    pub levels: Vec<f64>,
}

impl Path {
    fn from_points(f: &Functional, points: Vec<StatePair>) -> Self {
        let levels = points.iter().map(|s| f.energy(s)).collect();
        Path { points, levels }
    }

    /// Index of the highest vertex; ties go to the smallest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &l) in self.levels.iter().enumerate() {
            if l > self.levels[best] {
                best = i;
            }
        }
        best
    }

    pub fn max_level(&self) -> f64 {
        self.levels[self.argmax()]
    }
}

fn pinned_fiber(grid: &RadialGrid, x: &[f64], t: f64, mass: f64) -> Vec<f64> {
    let mut y = grid.rescale(x, t.powf(grid.dim() as f64 / 2.0), t);
    let m = y.len();
    y[m - 1] = 0.0;
    normalize(grid, &mut y, mass);
    y
}

/// First T in 2, 4, 8, … with I(T⋆s) < 2·level.
pub fn choose_t(f: &Functional, state: &StatePair, level: f64, window: &ScaleWindow) -> Result<f64> {
    let q = f.parts(state);
    let mut t = 2.0;
    loop {
        window.check(t)?;
        if f.fiber_of(&q, t) < 2.0 * level {
            return Ok(t);
        }
        t *= 2.0;
    }
}

/// Vertices (1+(T−1)j/(K−1))⋆(u,v), re-projected to the torus.
pub fn initial_path(f: &Functional, minimizer: &StatePair, t_end: f64, k: usize) -> Result<Path> {
    if k < 32 {
        return Err(Error::invalid("path_points", "need at least 32 vertices"));
    }
    ScaleWindow::default().check(t_end)?;
    let grid = f.grid();
    let mut points = Vec::with_capacity(k);
    points.push(minimizer.clone());
    for j in 1..k {
        let s = 1.0 + (t_end - 1.0) * j as f64 / (k - 1) as f64;
        let u = pinned_fiber(grid, minimizer.u.values(), s, f.a);
        let v = pinned_fiber(grid, minimizer.v.values(), s, f.b);
        points.push(StatePair::from_vecs(grid, u, v));
    }
    Ok(Path::from_points(f, points))
}

/// Evaluation of H_n at one t.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HnPoint {
    pub t: f64,
    pub tau: f64,
    /// Grid energy of the constructed pair (W_{n,t}, τ⋆v).
    pub direct: f64,
    /// The same value from integrals of u + tU_n and v, without interpolation.
    pub closed: f64,
    /// Relative deviations of the two masses from (a, b).
    pub mass_error: f64,
}

struct Bubbled<'a> {
    f: &'a Functional,
    comp: Component,
    /// Component that receives the bubble, and the other one.
    host: &'a [f64],
    other: &'a [f64],
    bubble: Vec<f64>,
    other_kin: f64,
    other_crit: f64,
}

impl<'a> Bubbled<'a> {
    fn new(f: &'a Functional, s: &'a StatePair, comp: Component, n: f64) -> Result<Self> {
        let grid = f.grid();
        let bubble = truncated_bubble(grid, n)?.into_values();
        let (host, other) = match comp {
            Component::U => (s.u.values(), s.v.values()),
            Component::V => (s.v.values(), s.u.values()),
        };
        let p = f.two_star;
        Ok(Bubbled { f, comp, host, other, bubble, other_kin: grid.grad_sq(other), other_crit: grid.lp_pow(other, p) })
    }

    fn host_mass(&self) -> f64 {
        match self.comp {
            Component::U => self.f.a,
            Component::V => self.f.b,
        }
    }

    fn sum(&self, t: f64) -> Vec<f64> {
        self.host.iter().zip(&self.bubble).map(|(h, b)| h + t * b).collect()
    }

    fn closed(&self, t: f64) -> (f64, f64) {
        let f = self.f;
        let g = f.grid();
        let x = self.sum(t);
        let tau = g.mass_sq(&x).sqrt() / self.host_mass();
        let p = f.two_star;
        let (mu_h, mu_o, exp_h) = match self.comp {
            Component::U => (f.mu1, f.mu2, f.alpha),
            Component::V => (f.mu2, f.mu1, f.beta),
        };
        let inter = match self.comp {
            Component::U => interaction_raw(g, &x, self.other, f.alpha, f.beta),
            Component::V => interaction_raw(g, self.other, &x, f.alpha, f.beta),
        };
        let e = 0.5 * g.grad_sq(&x) + 0.5 * tau * tau * self.other_kin
            - (mu_h * g.lp_pow(&x, p) + mu_o * tau.powf(p) * self.other_crit) / p
            - f.nu * tau.powf(f.gamma - exp_h) * inter;
        (e, tau)
    }

    /// The pair (W_{n,t}, τ⋆v) (or its mirror) built by interpolation.
    fn pair(&self, t: f64) -> Result<(StatePair, f64)> {
        let g = self.f.grid();
        let x = self.sum(t);
        let tau = g.mass_sq(&x).sqrt() / self.host_mass();
        ScaleWindow::default().check(tau)?;
        let amp = tau.powf(g.dim() as f64 / 2.0);
        let w = g.rescale(&x, amp / tau, tau);
        let o = g.rescale(self.other, amp, tau);
        let s = match self.comp {
            Component::U => StatePair::from_vecs(g, w, o),
            Component::V => StatePair::from_vecs(g, o, w),
        };
        Ok((s, tau))
    }

    fn point(&self, t: f64) -> Result<HnPoint> {
        let (closed, tau) = self.closed(t);
        let (s, _) = self.pair(t)?;
        let (mu, mv) = s.masses();
        let f = self.f;
        Ok(HnPoint {
            t,
            tau,
            direct: f.energy(&s),
            closed,
            mass_error: ((mu - f.a).abs() / f.a).max((mv - f.b).abs() / f.b),
        })
    }
}

/// The test-function path t ↦ (W_{n,tT}, τ⋆v), with T the first power of two
/// where H_n drops below 2m.
pub fn bubble_path(f: &Functional, minimizer: &StatePair, level: f64, n: f64, comp: Component, k: usize) -> Result<Path> {
    if k < 32 {
        return Err(Error::invalid("path_points", "need at least 32 vertices"));
    }
    let b = Bubbled::new(f, minimizer, comp, n)?;
    let mut t_end = 2.0;
    while b.closed(t_end).0 >= 2.0 * level {
        t_end *= 2.0;
        if t_end > 1e6 {
            return Err(Error::Degenerate("H_n stays above 2m"));
        }
    }
    let grid = f.grid();
    let mut points = Vec::with_capacity(k);
    points.push(minimizer.clone());
    for j in 1..k {
        let (mut s, _) = b.pair(t_end * j as f64 / (k - 1) as f64)?;
        let (u, v) = (s.u.values_mut(), s.v.values_mut());
        let m = u.len();
        u[m - 1] = 0.0;
        v[m - 1] = 0.0;
        normalize(grid, u, f.a);
        normalize(grid, v, f.b);
        points.push(s);
    }
    Ok(Path::from_points(f, points))
}

fn e_distance(g: &RadialGrid, a: &StatePair, b: &StatePair) -> f64 {
    let du: Vec<f64> = a.u.values().iter().zip(b.u.values()).map(|(x, y)| x - y).collect();
    let dv: Vec<f64> = a.v.values().iter().zip(b.v.values()).map(|(x, y)| x - y).collect();
    (g.grad_sq(&du) + g.grad_sq(&dv) + g.mass_sq(&du) + g.mass_sq(&dv)).sqrt()
}

/// Equal E-arclength spacing by linear interpolation between old vertices.
fn redistribute(f: &Functional, path: &Path) -> Path {
    let g = f.grid();
    let k = path.points.len();
    let mut arc = alloc::vec![0.0; k];
    for j in 1..k {
        arc[j] = arc[j - 1] + e_distance(g, &path.points[j - 1], &path.points[j]);
    }
    let total = arc[k - 1];
    let mut points = Vec::with_capacity(k);
    points.push(path.points[0].clone());
    let mut seg = 0;
    for j in 1..k - 1 {
        let s = total * j as f64 / (k - 1) as f64;
        while seg + 1 < k - 1 && arc[seg + 1] < s {
            seg += 1;
        }
        let len = arc[seg + 1] - arc[seg];
        let th = if len > 0.0 { (s - arc[seg]) / len } else { 0.0 };
        let (p0, p1) = (&path.points[seg], &path.points[seg + 1]);
        let mix = |x: &[f64], y: &[f64], m: f64| {
            let mut z: Vec<f64> = x.iter().zip(y).map(|(a, b)| (1.0 - th) * a + th * b).collect();
            normalize(g, &mut z, m);
            z
        };
        points.push(StatePair::from_vecs(g, mix(p0.u.values(), p1.u.values(), f.a), mix(p0.v.values(), p1.v.values(), f.b)));
    }
    points.push(path.points[k - 1].clone());
    Path::from_points(f, points)
}

/// Lowers the path by descending its highest vertex. Returns the deformed path
/// and the sequence of path maxima.
pub fn deform(f: &Functional, mut path: Path, iterations: usize, redistribute_every: usize, tol_grad: f64) -> Result<(Path, Vec<f64>)> {
    let k = path.points.len();
    if k < 3 {
        return Err(Error::invalid("path_points", "a path needs interior vertices"));
    }
    let start = path.levels[0];
    if !(path.levels[k - 1] < 2.0 * start) {
        return Err(Error::Degenerate("path end is not below twice the minimizer level"));
    }
    let grid = f.grid().clone();
    let w = grid.weights();
    let m = grid.len();
    let mut history = alloc::vec![path.max_level()];
    let mut steps = alloc::vec![1.0; k];
    let (mut gu, mut gv) = (alloc::vec![0.0; m], alloc::vec![0.0; m]);
    let (mut du, mut dv) = (alloc::vec![0.0; m], alloc::vec![0.0; m]);
    let mut scratch = [alloc::vec![0.0; m], alloc::vec![0.0; m], alloc::vec![0.0; m]];
    for it in 0..iterations {
        let j = path.argmax();
        let (u, v) = (path.points[j].u.values(), path.points[j].v.values());
        let (res, lam) = f.projected_residual_raw(u, v, &mut gu, &mut gv);
        if res <= tol_grad {
            break;
        }
        let pre = Precond::new(&grid, shift_for(&lam), 1.0);
        tangent_direction(&pre, w, &gu, u, &mut du, &mut scratch);
        tangent_direction(&pre, w, &gv, v, &mut dv, &mut scratch);
        // drop the component along the path so the vertex cannot slide off the ridge
        let (a, b) = (&path.points[j - 1], &path.points[j + 1]);
        let tu: Vec<f64> = b.u.values().iter().zip(a.u.values()).map(|(x, y)| x - y).collect();
        let tv: Vec<f64> = b.v.values().iter().zip(a.v.values()).map(|(x, y)| x - y).collect();
        let tt = grid.mass_sq(&tu) + grid.mass_sq(&tv);
        if tt > 0.0 {
            let c = (grid.dot(&du, &tu) + grid.dot(&dv, &tv)) / tt;
            du.iter_mut().zip(&tu).for_each(|(d, x)| *d -= c * x);
            dv.iter_mut().zip(&tv).for_each(|(d, x)| *d -= c * x);
        }
        let mut s = steps[j];
        let mut moved = None;
        for _ in 0..40 {
            let mut un: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + s * b).collect();
            let mut vn: Vec<f64> = v.iter().zip(&dv).map(|(a, b)| a + s * b).collect();
            normalize(&grid, &mut un, f.a);
            normalize(&grid, &mut vn, f.b);
            let e = f.energy_raw(&un, &vn);
            if e < path.levels[j] {
                moved = Some((un, vn, e));
                break;
            }
            s *= 0.5;
        }
        let Some((un, vn, e)) = moved else { break };
        steps[j] = (2.0 * s).min(4.0);
        path.points[j] = StatePair::from_vecs(&grid, un, vn);
        path.levels[j] = e;
        if redistribute_every > 0 && (it + 1) % redistribute_every == 0 {
            let cand = redistribute(f, &path);
            if cand.max_level() <= path.max_level() {
                path = cand;
                steps.iter_mut().for_each(|x| *x = 1.0);
            }
        }
        history.push(path.max_level());
    }
    Ok((path, history))
}

/// Argmax of the fiber energy of the parts of w.
fn fiber_peak(f: &Functional, u: &[f64], v: &[f64]) -> (f64, f64) {
    let q = f.parts_raw(u, v);
    let mut g = |t: f64| f.fiber_of(&q, t);
    scan_max_log(&mut g, 0.02, 50.0, 240)
}

fn scaled(f: &Functional, t: f64) -> Functional {
    let mut ft = f.clone();
    ft.mu1 *= t.powf(f.two_star - 2.0);
    ft.mu2 *= t.powf(f.two_star - 2.0);
    ft.nu *= t.powf(f.gamma - 2.0);
    ft
}

pub(crate) struct PsiOut {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub residual: f64,
    pub lam: MultiplierPair,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Minimizes Ψ(w) = max_t I(t⋆w) on the torus by preconditioned projected descent.
/// The iterate is re-centred on its fiber maximum whenever |t−1| > 0.05.
pub(crate) fn psi_descend(f: &Functional, u0: &[f64], v0: &[f64], opts: &SolverOpts) -> PsiOut {
    let grid = f.grid().clone();
    let w = grid.weights();
    let m = grid.len();
    let (mut u, mut v) = (u0.to_vec(), v0.to_vec());
    u[m - 1] = 0.0;
    v[m - 1] = 0.0;
    normalize(&grid, &mut u, f.a);
    normalize(&grid, &mut v, f.b);
    let (mut gu, mut gv) = (alloc::vec![0.0; m], alloc::vec![0.0; m]);
    let (mut du, mut dv) = (alloc::vec![0.0; m], alloc::vec![0.0; m]);
    let mut scratch = [alloc::vec![0.0; m], alloc::vec![0.0; m], alloc::vec![0.0; m]];
    let mut history = Vec::new();
    let mut prev: Option<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    let mut tau = 1.0;
    let mut residual = f64::INFINITY;
    let mut lam = MultiplierPair { lambda1: 0.0, lambda2: 0.0 };
    let mut iterations = 0;
    let mut stalls = 0;
    let mut pre: Option<Precond> = None;
    let (mut t, mut psi) = fiber_peak(f, &u, &v);
    for it in 0..opts.max_iter {
        if (t - 1.0).abs() > 0.05 {
            u = pinned_fiber(&grid, &u, t, f.a);
            v = pinned_fiber(&grid, &v, t, f.b);
            (t, psi) = fiber_peak(f, &u, &v);
            prev = None;
        }
        let ft = scaled(f, t);
        let (r, l) = ft.projected_residual_raw(&u, &v, &mut gu, &mut gv);
        let t2 = t * t;
        residual = t2 * r;
        lam = MultiplierPair { lambda1: t2 * l.lambda1, lambda2: t2 * l.lambda2 };
        history.push(psi);
        if residual <= opts.tol_grad {
            break;
        }
        iterations = it + 1;
        let s = shift_for(&l);
        let refresh = match &pre {
            Some(p) => s / p.shift > 2.0 || p.shift / s > 2.0,
            None => true,
        };
        if refresh {
            pre = Some(Precond::new(&grid, s, 1.0));
            prev = None;
        }
        let p = pre.as_ref().unwrap();
        tangent_direction(p, w, &gu, &u, &mut du, &mut scratch);
        tangent_direction(p, w, &gv, &v, &mut dv, &mut scratch);
        if let Some((pu, pv, pdu, pdv)) = &prev {
            let (mut ss, mut sy) = (0.0, 0.0);
            for i in 0..m {
                let (su, sv) = (u[i] - pu[i], v[i] - pv[i]);
                ss += w[i] * (su * su + sv * sv);
                sy -= w[i] * (su * (du[i] - pdu[i]) + sv * (dv[i] - pdv[i]));
            }
            tau = if sy > 0.0 { (ss / sy).clamp(1e-4, 1e4) } else { (2.0 * tau).min(1e4) };
        }
        let mut step = tau;
        let mut accepted = None;
        while step >= 1e-12 {
            let mut un: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + step * b).collect();
            let mut vn: Vec<f64> = v.iter().zip(&dv).map(|(a, b)| a + step * b).collect();
            normalize(&grid, &mut un, f.a);
            normalize(&grid, &mut vn, f.b);
            let (tn, pn) = fiber_peak(f, &un, &vn);
            if pn <= psi + 1e-14 * psi.abs() {
                accepted = Some((un, vn, tn, pn));
                break;
            }
            step *= 0.5;
        }
        let Some((un, vn, tn, pn)) = accepted else {
            stalls += 1;
            prev = None;
            tau = 1.0;
            if stalls > 3 {
                break;
            }
            continue;
        };
        stalls = 0;
        tau = step;
        prev = Some((core::mem::replace(&mut u, un), core::mem::replace(&mut v, vn), du.clone(), dv.clone()));
        t = tn;
        psi = pn;
    }
    // move onto the fiber maximum itself
    if (t - 1.0).abs() > 1e-12 {
        u = pinned_fiber(&grid, &u, t, f.a);
        v = pinned_fiber(&grid, &v, t, f.b);
        let r = f.projected_residual_raw(&u, &v, &mut gu, &mut gv);
        residual = r.0;
        lam = r.1;
    }
    PsiOut { u, v, residual, lam, iterations, history }
}

/// Ψ-descent from `start`, Newton polish, and the level checks against k₀ and the bubble bound.
fn refine(p: &ProblemParams, f: &Functional, minimizer: &SolveResult, u: &[f64], v: &[f64], opts: &MpOpts, mut diag: Diagnostics, iterations: usize) -> SolveResult {
    let so = &opts.solver;
    let handover = SolverOpts { tol_grad: so.tol_grad.max(1e-4), ..so.clone() };
    let ps = psi_descend(f, u, v, if so.newton_polish { &handover } else { so });
    diag.energy_history.extend(ps.history.iter().cloned());
    let (mut u, mut v) = (ps.u, ps.v);
    let grid = f.grid();
    if so.newton_polish && ps.residual > 1e-3 * so.tol_grad {
        let nt = newton(f, &u, &v, ps.lam, so.newton_iter, 1e-3 * so.tol_grad);
        diag.newton_iterations = nt.iterations;
        let (mut nu_, mut nv_) = (nt.u, nt.v);
        normalize(grid, &mut nu_, f.a);
        normalize(grid, &mut nv_, f.b);
        let m = grid.len();
        let (mut gu, mut gv) = (alloc::vec![0.0; m], alloc::vec![0.0; m]);
        let r1 = f.projected_residual_raw(&nu_, &nv_, &mut gu, &mut gv).0;
        let drift = (f.energy_raw(&nu_, &nv_) - f.energy_raw(&u, &v)).abs();
        if r1 < ps.residual && drift < 1e-4 * f.energy_raw(&u, &v).abs().max(1e-12) {
            u = nu_;
            v = nv_;
        } else {
            diag.notes.push(String::from("newton polish rejected"));
        }
    }
    let mut r = finish(f, u, v, iterations + ps.iterations, so, diag);
    r.constants = minimizer.constants;
    let bound = minimizer.level + p.bubble_energy();
    if let Some(c) = &r.constants {
        if !(r.level >= c.k0) {
            r.diagnostics.notes.push(alloc::format!("level {} is below k0 = {}: collapse onto the minimizer?", r.level, c.k0));
        }
    }
    if !(r.level < bound) {
        r.diagnostics.notes.push(alloc::format!("level {} is not below the bubble bound {}", r.level, bound));
    }
    if !(r.multipliers.lambda1 > 0.0 && r.multipliers.lambda2 > 0.0) {
        r.diagnostics.notes.push(String::from("a Lagrange multiplier is not positive"));
    }
    r
}

/// Mountain-pass solution from a converged local minimizer: initial path,
/// deformation, Ψ-descent from the highest vertex and Newton polish.
pub fn solve_mountain_pass(p: &ProblemParams, minimizer: &SolveResult, opts: &MpOpts) -> Result<(SolveResult, Path)> {
    let grid = minimizer.state.grid().clone();
    let f = Functional::new(p, grid)?;
    let min = &minimizer.state;
    let path = match opts.path {
        PathKind::Fiber => {
            let t_end = choose_t(&f, min, minimizer.level, &opts.solver.window)?;
            initial_path(&f, min, t_end, opts.path_points)?
        }
        PathKind::Bubble => {
            let comp = opts.component.unwrap_or_else(|| Component::dominant(p));
            bubble_path(&f, min, minimizer.level, opts.bubble_n, comp, opts.path_points)?
        }
    };
    let (path, history) = deform(&f, path, opts.deform_iter, opts.redistribute_every, opts.solver.tol_grad)?;
    let top = &path.points[path.argmax()];
    let diag = Diagnostics { energy_history: history, ..Diagnostics::default() };
    let r = refine(p, &f, minimizer, top.u.values(), top.v.values(), opts, diag, opts.deform_iter);
    Ok((r, path))
}

/// Ψ-descent and polish from a given state, typically the solution at a nearby ν.
pub fn solve_mountain_pass_from(p: &ProblemParams, minimizer: &SolveResult, init: &StatePair, opts: &MpOpts) -> Result<SolveResult> {
    let grid = minimizer.state.grid().clone();
    if !init.u.same_grid(&minimizer.state.u) {
        return Err(Error::GridMismatch);
    }
    let f = Functional::new(p, grid)?;
    Ok(refine(p, &f, minimizer, init.u.values(), init.v.values(), opts, Diagnostics::default(), 0))
}

/// H_n on a list of t values.
pub fn level_bound_curve(p: &ProblemParams, minimizer: &StatePair, n: f64, comp: Component, t_grid: &[f64]) -> Result<Vec<HnPoint>> {
    let f = Functional::new(p, minimizer.grid().clone())?;
    let b = Bubbled::new(&f, minimizer, comp, n)?;
    t_grid.iter().map(|&t| b.point(t)).collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LevelBoundOpts {
    pub t_lo: f64,
    pub t_hi: f64,
    pub t_points: usize,
    pub component: Option<Component>,
}

impl Default for LevelBoundOpts {
    fn default() -> Self {
        LevelBoundOpts { t_lo: 0.05, t_hi: 4.0, t_points: 64, component: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CrossTerms {
    /// ∫uU_n for the bubble-carrying component u.
    pub linear: f64,
    /// ∫uU_n^{2*−1}.
    pub critical: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelBoundReport {
    pub n: f64,
    pub t_max: f64,
    pub h_max: f64,
    /// Grid energy of the interpolated pair at t_max.
    pub h_max_direct: f64,
    pub bound: f64,
    pub satisfied: bool,
    pub cross_terms: CrossTerms,
    pub nodes_per_scale: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelBoundCheck {
    pub component: Component,
    /// H_n(0), equal to the minimizer level.
    pub h0: f64,
    pub bound: f64,
    pub reports: Vec<LevelBoundReport>,
    /// Fits of log ∫uU_n and log ∫uU_n^{2*−1} against log n (three or more n).
    pub cross_linear: Option<Fit>,
    pub cross_critical: Option<Fit>,
    pub t_bracket: (f64, f64),
}

pub fn level_bound_check(p: &ProblemParams, minimizer: &SolveResult, n_list: &[f64], opts: &LevelBoundOpts) -> Result<LevelBoundCheck> {
    if n_list.is_empty() {
        return Err(Error::invalid("n", "empty list"));
    }
    if !(opts.t_lo > 0.0 && opts.t_hi > opts.t_lo && opts.t_points >= 3) {
        return Err(Error::invalid("t_grid", "need 0 < t_lo < t_hi and at least three points"));
    }
    let state = &minimizer.state;
    let grid = state.grid().clone();
    let f = Functional::new(p, grid.clone())?;
    let comp = opts.component.unwrap_or_else(|| Component::dominant(p));
    let bound = minimizer.level + p.bubble_energy();
    let ts = f.two_star;
    let mut reports = Vec::with_capacity(n_list.len());
    let mut h0 = f64::NAN;
    for &n in n_list {
        let nps = nodes_per_scale(&grid, n);
        if nps < 8 {
            return Err(Error::invalid("n", alloc::format!("n = {n} is not resolved: {nps} nodes in [0, 1/n]")));
        }
        let b = Bubbled::new(&f, state, comp, n)?;
        h0 = b.closed(0.0).0;
        let (l0, l1) = (opts.t_lo.ln(), opts.t_hi.ln());
        let step = (l1 - l0) / (opts.t_points - 1) as f64;
        let vals: Vec<f64> = (0..opts.t_points).map(|i| b.closed((l0 + step * i as f64).exp()).0).collect();
        let imax = (0..vals.len()).fold(0, |bi, i| if vals[i] > vals[bi] { i } else { bi });
        let a = l0 + step * imax.saturating_sub(1) as f64;
        let c = l0 + step * (imax + 1).min(opts.t_points - 1) as f64;
        let mut g = |x: f64| b.closed(x.exp()).0;
        let (x, h) = golden_max(&mut g, a, c, 1e-9);
        let (t_max, h_max) = if h >= vals[imax] { (x.exp(), h) } else { ((l0 + step * imax as f64).exp(), vals[imax]) };
        let direct = b.point(t_max)?.direct;
        let un = &b.bubble;
        let linear = grid.dot(b.host, un);
        let crit: Vec<f64> = un.iter().map(|x| x.powf(ts - 1.0)).collect();
        let critical = grid.dot(b.host, &crit);
        reports.push(LevelBoundReport {
            n,
            t_max,
            h_max,
            h_max_direct: direct,
            bound,
            satisfied: h_max < bound,
            cross_terms: CrossTerms { linear, critical },
            nodes_per_scale: nps,
        });
    }
    let fit = |pick: &dyn Fn(&CrossTerms) -> f64| -> Option<Fit> {
        if reports.len() < 3 {
            return None;
        }
        let pts: Vec<(f64, f64)> = reports.iter().map(|r| (r.n, pick(&r.cross_terms))).collect();
        fit_exponent(&pts).ok().map(|(slope, intercept, r2)| Fit { slope, intercept, r2 })
    };
    let lo = reports.iter().map(|r| r.t_max).fold(f64::INFINITY, f64::min);
    let hi = reports.iter().map(|r| r.t_max).fold(0.0, f64::max);
    Ok(LevelBoundCheck {
        component: comp,
        h0,
        bound,
        cross_linear: fit(&|c| c.linear),
        cross_critical: fit(&|c| c.critical),
        reports,
        t_bracket: (lo, hi),
    })
}
