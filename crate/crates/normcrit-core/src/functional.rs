//! The constrained energy, its L² gradient, the Pohozaev functional, fiber
//! energies, Lagrange multipliers and the Gagliardo–Nirenberg ratio.

use alloc::sync::Arc;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{interaction_raw, RadialField, RadialGrid, ScaleWindow};
use crate::params::ProblemParams;

/// sign(x)|x|^p, continuous with value 0 at 0.
#[inline]
pub(crate) fn spow(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(p)
    }
}

/// Relative mass tolerance used when an operation requires torus membership.
pub const TORUS_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct StatePair {
    pub u: RadialField,
    pub v: RadialField,
}

impl StatePair {
    pub fn new(u: RadialField, v: RadialField) -> Result<Self> {
        if !u.same_grid(&v) {
            return Err(Error::GridMismatch);
        }
        Ok(StatePair { u, v })
    }

    pub(crate) fn from_vecs(grid: &Arc<RadialGrid>, u: Vec<f64>, v: Vec<f64>) -> Self {
        StatePair { u: RadialField::from_vec(grid.clone(), u), v: RadialField::from_vec(grid.clone(), v) }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.u.grid()
    }

    pub fn kinetic(&self) -> f64 {
        self.u.grad_sq() + self.v.grad_sq()
    }

    /// (‖u‖₂, ‖v‖₂).
    pub fn masses(&self) -> (f64, f64) {
        (self.u.mass_sq().sqrt(), self.v.mass_sq().sqrt())
    }

    pub fn fiber_scale(&self, t: f64, window: &ScaleWindow) -> Result<StatePair> {
        Ok(StatePair { u: self.u.fiber_scale(t, window)?, v: self.v.fiber_scale(t, window)? })
    }

    /// Rescales each component to the prescribed L² norm.
    pub fn project(&mut self, a: f64, b: f64) -> Result<()> {
        for (f, m, name) in [(&mut self.u, a, "u"), (&mut self.v, b, "v")] {
            let n = f.mass_sq().sqrt();
            if !(n > 0.0) {
                return Err(Error::Degenerate(if name == "u" { "u vanishes" } else { "v vanishes" }));
            }
            let c = m / n;
            f.values_mut().iter_mut().for_each(|x| *x *= c);
        }
        Ok(())
    }

    /// Checks ‖u‖₂ = a and ‖v‖₂ = b to relative tolerance `tol`.
    pub fn check_torus(&self, a: f64, b: f64, tol: f64) -> Result<()> {
        let (nu, nv) = self.masses();
        if (nu - a).abs() > tol * a {
            return Err(Error::NotOnTorus { component: "u", norm: nu, target: a });
        }
        if (nv - b).abs() > tol * b {
            return Err(Error::NotOnTorus { component: "v", norm: nv, target: b });
        }
        Ok(())
    }
}

/// The five integrals every functional is assembled from.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Parts {
    /// ‖∇u‖₂²
    pub ku: f64,
    pub kv: f64,
    /// ‖u‖_{2*}^{2*}
    pub cu: f64,
    pub cv: f64,
    /// ∫|u|^α|v|^β
    pub inter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MultiplierPair {
    pub lambda1: f64,
    pub lambda2: f64,
}

/// I_ν(u,v) = ½(‖∇u‖²+‖∇v‖²) − (μ₁/2*)‖u‖_{2*}^{2*} − (μ₂/2*)‖v‖_{2*}^{2*} − ν∫|u|^α|v|^β
/// on a fixed grid. Setting μ₁ = μ₂ = 0, ν = 1 gives the limit functional J.
#[derive(Debug, Clone)]
pub struct Functional {
    grid: Arc<RadialGrid>,
    pub dim: u32,
    pub a: f64,
    pub b: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    pub two_star: f64,
    pub gamma: f64,
    crit_pow: i32,
}

impl Functional {
    pub fn new(p: &ProblemParams, grid: Arc<RadialGrid>) -> Result<Self> {
        let p = p.validate()?;
        if p.dim != grid.dim() {
            return Err(Error::invalid("N", "grid dimension differs from the problem dimension"));
        }
        Ok(Functional {
            grid,
            dim: p.dim,
            a: p.a,
            b: p.b,
            mu1: p.mu1,
            mu2: p.mu2,
            alpha: p.alpha,
            beta: p.beta,
            nu: p.nu,
            two_star: p.two_star(),
            gamma: p.gamma(),
            crit_pow: if p.dim == 3 { 6 } else { 4 },
        })
    }

    /// J(u,v) = ½(‖∇u‖²+‖∇v‖²) − ∫|u|^α|v|^β, the energy of the limit system.
    pub fn limit(p: &ProblemParams, grid: Arc<RadialGrid>) -> Result<Self> {
        let mut f = Self::new(&p.with_nu(1.0), grid)?;
        f.mu1 = 0.0;
        f.mu2 = 0.0;
        Ok(f)
    }

    pub fn with_nu(&self, nu: f64) -> Self {
        Functional { nu, ..self.clone() }
    }

    pub fn with_masses(&self, a: f64, b: f64) -> Self {
        Functional { a, b, ..self.clone() }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    fn check(&self, s: &StatePair) -> Result<()> {
        if !(Arc::ptr_eq(s.grid(), &self.grid) || **s.grid() == *self.grid) || !s.u.same_grid(&s.v) {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub(crate) fn parts_raw(&self, u: &[f64], v: &[f64]) -> Parts {
        let g = &self.grid;
        let w = g.weights();
        let p = self.crit_pow;
        let mut cu = 0.0;
        let mut cv = 0.0;
        for i in 0..w.len() {
            cu += w[i] * u[i].powi(p);
            cv += w[i] * v[i].powi(p);
        }
        Parts {
            ku: g.grad_sq(u),
            kv: g.grad_sq(v),
            cu,
            cv,
            inter: interaction_raw(g, u, v, self.alpha, self.beta),
        }
    }

    pub fn parts(&self, s: &StatePair) -> Parts {
        self.parts_raw(s.u.values(), s.v.values())
    }

    pub fn energy_of(&self, q: &Parts) -> f64 {
        0.5 * (q.ku + q.kv) - (self.mu1 * q.cu + self.mu2 * q.cv) / self.two_star - self.nu * q.inter
    }

    pub fn pohozaev_of(&self, q: &Parts) -> f64 {
        q.ku + q.kv - self.mu1 * q.cu - self.mu2 * q.cv - self.nu * self.gamma * q.inter
    }

    /// I(t⋆s) from the norms of s: t²K/2 − t^{2*}C/2* − νt^γ·∫|u|^α|v|^β.
    pub fn fiber_of(&self, q: &Parts, t: f64) -> f64 {
        0.5 * t * t * (q.ku + q.kv)
            - t.powf(self.two_star) * (self.mu1 * q.cu + self.mu2 * q.cv) / self.two_star
            - self.nu * t.powf(self.gamma) * q.inter
    }

    pub(crate) fn energy_raw(&self, u: &[f64], v: &[f64]) -> f64 {
        self.energy_of(&self.parts_raw(u, v))
    }

    pub fn energy(&self, s: &StatePair) -> f64 {
        self.energy_of(&self.parts(s))
    }

    /// Writes the L² gradient at every node, the outermost one included.
    pub(crate) fn gradient_raw(&self, u: &[f64], v: &[f64], gu: &mut [f64], gv: &mut [f64]) {
        self.grid.neg_laplacian_into(u, gu);
        self.grid.neg_laplacian_into(v, gv);
        let p = self.crit_pow - 2;
        let (al, be) = (self.alpha, self.beta);
        for i in 0..u.len() {
            let (x, y) = (u[i], v[i]);
            let (ax, ay) = (x.abs(), y.abs());
            gu[i] -= self.mu1 * x.powi(p) * x;
            gv[i] -= self.mu2 * y.powi(p) * y;
            if self.nu != 0.0 && ax > 0.0 && ay > 0.0 {
                gu[i] -= self.nu * al * spow(x, al - 1.0) * ay.powf(be);
                gv[i] -= self.nu * be * spow(y, be - 1.0) * ax.powf(al);
            }
        }
    }

    pub fn gradient(&self, s: &StatePair) -> Result<StatePair> {
        self.check(s)?;
        let m = self.grid.len();
        let (mut gu, mut gv) = (alloc::vec![0.0; m], alloc::vec![0.0; m]);
        self.gradient_raw(s.u.values(), s.v.values(), &mut gu, &mut gv);
        Ok(StatePair::from_vecs(&self.grid, gu, gv))
    }

    pub fn pohozaev(&self, s: &StatePair) -> f64 {
        self.pohozaev_of(&self.parts(s))
    }

    pub fn fiber_energy_closed(&self, s: &StatePair, t: f64) -> f64 {
        self.fiber_of(&self.parts(s), t)
    }

    /// Ĩ(σ, s) = I(e^σ ⋆ s) evaluated in closed form.
    pub fn aux_energy(&self, sigma: f64, s: &StatePair, window: &ScaleWindow) -> Result<f64> {
        let t = sigma.exp();
        window.check(t)?;
        Ok(self.fiber_energy_closed(s, t))
    }

    /// λ₁ = −⟨∇_u I, u⟩/a², λ₂ = −⟨∇_v I, v⟩/b².
    pub fn multipliers_residual(&self, s: &StatePair) -> Result<MultiplierPair> {
        self.check(s)?;
        s.check_torus(self.a, self.b, TORUS_TOL)?;
        let q = self.parts(s);
        Ok(self.multipliers_from_pairing(&q))
    }

    /// Pairing ⟨∇I, (u,0)⟩ = ‖∇u‖² − μ₁‖u‖_{2*}^{2*} − να∫|u|^α|v|^β is exact on the grid
    /// because the discrete Laplacian is the Riesz map of the discrete Dirichlet form.
    pub(crate) fn multipliers_from_pairing(&self, q: &Parts) -> MultiplierPair {
        MultiplierPair {
            lambda1: -(q.ku - self.mu1 * q.cu - self.nu * self.alpha * q.inter) / (self.a * self.a),
            lambda2: -(q.kv - self.mu2 * q.cv - self.nu * self.beta * q.inter) / (self.b * self.b),
        }
    }

    pub fn multipliers_pohozaev(&self, s: &StatePair) -> Result<MultiplierPair> {
        self.check(s)?;
        s.check_torus(self.a, self.b, TORUS_TOL)?;
        Ok(self.multipliers_pohozaev_of(&self.parts(s)))
    }

    pub(crate) fn multipliers_pohozaev_of(&self, q: &Parts) -> MultiplierPair {
        let ni = self.nu * q.inter;
        MultiplierPair {
            lambda1: (q.kv - self.mu2 * q.cv - (self.gamma - self.alpha) * ni) / (self.a * self.a),
            lambda2: (q.ku - self.mu1 * q.cu - (self.gamma - self.beta) * ni) / (self.b * self.b),
        }
    }

    /// L² norm of the constrained gradient (∇_u I + λ₁u, ∇_v I + λ₂v) with the
    /// outermost node pinned.
    pub(crate) fn projected_residual_raw(&self, u: &[f64], v: &[f64], gu: &mut [f64], gv: &mut [f64]) -> (f64, MultiplierPair) {
        self.gradient_raw(u, v, gu, gv);
        let m = u.len();
        gu[m - 1] = 0.0;
        gv[m - 1] = 0.0;
        let g = &self.grid;
        let l1 = -g.dot(gu, u) / g.mass_sq(u);
        let l2 = -g.dot(gv, v) / g.mass_sq(v);
        let w = g.weights();
        let mut r = 0.0;
        for i in 0..m {
            let x = gu[i] + l1 * u[i];
            let y = gv[i] + l2 * v[i];
            r += w[i] * (x * x + y * y);
        }
        (r.sqrt(), MultiplierPair { lambda1: l1, lambda2: l2 })
    }

    pub fn projected_residual(&self, s: &StatePair) -> Result<f64> {
        self.check(s)?;
        let m = self.grid.len();
        let (mut gu, mut gv) = (alloc::vec![0.0; m], alloc::vec![0.0; m]);
        Ok(self.projected_residual_raw(s.u.values(), s.v.values(), &mut gu, &mut gv).0)
    }
}

/// ∫|u|^α|v|^β / [(‖u‖²+‖v‖²)^{(α+β−γ)/2} (‖∇u‖²+‖∇v‖²)^{γ/2}].
pub fn gn_ratio(s: &StatePair, alpha: f64, beta: f64) -> Result<f64> {
    let g = s.grid();
    let dim = g.dim() as f64;
    let gamma = dim * (alpha + beta - 2.0) / 2.0;
    let mass = s.u.mass_sq() + s.v.mass_sq();
    let kin = s.kinetic();
    if !(mass > 0.0) || !(kin > 0.0) {
        return Err(Error::Degenerate("gn_ratio needs nonzero mass and gradient"));
    }
    let i = interaction_raw(g, s.u.values(), s.v.values(), alpha, beta);
    Ok(i / (mass.powf((alpha + beta - gamma) / 2.0) * kin.powf(gamma / 2.0)))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GnEstimate {
    pub c_gn: f64,
    /// Mass split angle of the maximizer: (‖u‖₂, ‖v‖₂) ∝ (cos θ, sin θ).
    pub theta: f64,
    /// (θ, ratio) for every evaluated split.
    pub samples: Vec<(f64, f64)>,
}

/// Estimates the Gagliardo–Nirenberg constant as the largest ratio found.
///
/// At fixed masses the ratio is maximized by the ground state of the limit
/// functional J (minimizing J over the fiber reduces to maximizing the ratio), so
/// each trial draws a random mass split and random Gaussian widths, descends J on
/// that torus, and the best split is then refined by golden-section ascent.
pub fn gn_estimate(grid: Arc<RadialGrid>, alpha: f64, beta: f64, trials: usize, seed: u64) -> Result<GnEstimate> {
    let p = ProblemParams { dim: grid.dim(), a: 1.0, b: 1.0, alpha, beta, ..ProblemParams::default() };
    p.validate()?;
    if trials == 0 {
        return Err(Error::invalid("trials", "need at least one trial"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    let eval = |theta: f64, w1: f64, w2: f64| -> Result<f64> {
        let q = ProblemParams { a: theta.cos(), b: theta.sin(), ..p };
        let f = Functional::limit(&q, grid.clone())?;
        let init = crate::minimize::gaussian_pair(&f, w1, w2);
        let r = crate::minimize::solve_with(&f, init, None, &crate::minimize::SolverOpts::default())?;
        gn_ratio(&r.state, alpha, beta)
    };
    let lo = 0.05;
    let hi = core::f64::consts::FRAC_PI_2 - 0.05;
    for _ in 0..trials {
        let theta = rng.gen_range(lo..hi);
        let w1 = rng.gen_range(0.5..2.0);
        let w2 = rng.gen_range(0.5..2.0);
        samples.push((theta, eval(theta, w1, w2)?));
    }
    let best = samples.iter().cloned().fold((0.0, f64::NEG_INFINITY), |b, s| if s.1 > b.1 { s } else { b });
    let step = (hi - lo) / (trials as f64 + 1.0);
    let (a0, b0) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let mut f = |t: f64| -> f64 {
        let r = eval(t, 1.0, 1.0).unwrap_or(f64::NEG_INFINITY);
        samples.push((t, r));
        r
    };
    let (theta, value) = crate::minimize::golden_max(&mut f, a0, b0, 1e-3);
    let (theta, c_gn) = if value > best.1 { (theta, value) } else { (best.0, best.1) };
    Ok(GnEstimate { c_gn, theta, samples })
}
