//! Radial grids, quadrature and the discrete operators acting on radial profiles.
//!
//! The discrete Dirichlet form is exact for the piecewise-linear interpolant,
//! `∫|f'|² ω r^{N-1} dr = Σ c_i (f_{i+1} - f_i)²`, and the nodal weights are the
//! dual-cell volumes for which the induced Laplacian `W⁻¹L` reproduces `Δr² = 2N`
//! at every node, the origin included. All weights are positive and sum to the
//! ball volume.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::pchip::Pchip;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", deny_unknown_fields))]
pub enum Grading {
    Uniform,
    /// r = R·x², clustered at the origin.
    Graded,
    /// r = c·(e^{κx} − 1) with first spacing `h_min`: constant relative resolution.
    Exponential { h_min: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    dim: u32,
    radius: f64,
    grading: Grading,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    cond: Vec<f64>,
}

/// Area of the unit sphere in ℝᴺ.
pub fn omega(dim: u32) -> f64 {
    match dim {
        3 => 4.0 * PI,
        _ => 2.0 * PI * PI,
    }
}

fn exponential_rate(radius: f64, m: usize, h_min: f64) -> Result<f64> {
    let x1 = 1.0 / (m - 1) as f64;
    let first = |k: f64| radius * (k * x1).exp_m1() / k.exp_m1();
    if !(h_min > 0.0) || h_min >= radius * x1 {
        return Err(Error::invalid(
            "h_min",
            format!("must lie in (0, R/(M-1)) = (0, {}), got {h_min}", radius * x1),
        ));
    }
    let (mut lo, mut hi) = (1e-9, 700.0);
    if first(hi) > h_min {
        return Err(Error::invalid("h_min", "too small for this node count"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if first(mid) > h_min {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

impl RadialGrid {
    pub fn build(dim: u32, radius: f64, m: usize, grading: Grading) -> Result<Self> {
        if dim != 3 && dim != 4 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("R", format!("must be positive, got {radius}")));
        }
        if m < 16 {
            return Err(Error::invalid("M", format!("need at least 16 nodes, got {m}")));
        }
        let last = (m - 1) as f64;
        let mut nodes: Vec<f64> = match grading {
            Grading::Uniform => (0..m).map(|i| radius * i as f64 / last).collect(),
            Grading::Graded => (0..m).map(|i| radius * (i as f64 / last).powi(2)).collect(),
            Grading::Exponential { h_min } => {
                let k = exponential_rate(radius, m, h_min)?;
                let c = radius / k.exp_m1();
                (0..m).map(|i| c * (k * i as f64 / last).exp_m1()).collect()
            }
        };
        nodes[0] = 0.0;
        nodes[m - 1] = radius;
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("M", "nodes are not strictly increasing"));
        }

        let om = omega(dim);
        let nf = dim as f64;
        let mut cond = Vec::with_capacity(m - 1);
        let mut phi = Vec::with_capacity(m - 1);
        for w in nodes.windows(2) {
            let (r0, r1) = (w[0], w[1]);
            let h = r1 - r0;
            // (r1^N − r0^N)/h without cancellation
            let mut s = 0.0;
            for k in 0..dim {
                s += r1.powi((dim - 1 - k) as i32) * r0.powi(k as i32);
            }
            let c = om * s / (nf * h);
            cond.push(c);
            phi.push(c * h * (r1 + r0));
        }
        let mut weights = Vec::with_capacity(m);
        weights.push(phi[0] / (2.0 * nf));
        for i in 1..m - 1 {
            weights.push((phi[i] - phi[i - 1]) / (2.0 * nf));
        }
        weights.push(om * radius.powi(dim as i32) / nf - phi[m - 2] / (2.0 * nf));
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::invalid("M", "grid produced a nonpositive quadrature weight"));
        }
        Ok(RadialGrid { dim, radius, grading, nodes, weights, cond })
    }

    /// Default resolution: exponential grading with R = 100 (N = 3) or 60 (N = 4).
    /// A first spacing much below 1e-6 lets roundoff dominate the pointwise Laplacian at the origin.
    pub fn default_for(dim: u32) -> Result<Self> {
        let radius = match dim {
            3 => 100.0,
            4 => 60.0,
            n => return Err(Error::UnsupportedDimension(n)),
        };
        Self::build(dim, radius, 8000, Grading::Exponential { h_min: 1e-6 })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn grading(&self) -> Grading {
        self.grading
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    /// Cell conductances c_i of the discrete Dirichlet form.
    pub fn conductances(&self) -> &[f64] {
        &self.cond
    }

    pub fn id(&self) -> String {
        let g = match self.grading {
            Grading::Uniform => String::from("uniform"),
            Grading::Graded => String::from("graded"),
            Grading::Exponential { h_min } => format!("exponential(h_min={h_min:e})"),
        };
        format!("N={};R={};M={};{g}", self.dim, self.radius, self.len())
    }

    pub fn ball_volume(&self) -> f64 {
        omega(self.dim) * self.radius.powi(self.dim as i32) / self.dim as f64
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, x)| w * x).sum()
    }

    /// ∫fg.
    pub fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights.iter().zip(f).zip(g).map(|((w, x), y)| w * x * y).sum()
    }

    pub fn mass_sq(&self, f: &[f64]) -> f64 {
        self.dot(f, f)
    }

    pub fn grad_sq(&self, f: &[f64]) -> f64 {
        self.grad_dot(f, f)
    }

    /// ∫∇f·∇g.
    pub fn grad_dot(&self, f: &[f64], g: &[f64]) -> f64 {
        self.cond
            .iter()
            .enumerate()
            .map(|(i, c)| c * (f[i + 1] - f[i]) * (g[i + 1] - g[i]))
            .sum()
    }

    /// ∫|f|^p.
    pub fn lp_pow(&self, f: &[f64], p: f64) -> f64 {
        self.weights.iter().zip(f).map(|(w, x)| w * x.abs().powf(p)).sum()
    }

    /// Stiffness matrix L as (diagonal, off-diagonal); `L f = W·(−Δf)`.
    pub fn stiffness(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.len();
        let mut diag = alloc::vec![0.0; m];
        for (i, c) in self.cond.iter().enumerate() {
            diag[i] += c;
            diag[i + 1] += c;
        }
        let off = self.cond.iter().map(|c| -c).collect();
        (diag, off)
    }

    /// Writes −Δf into `out`. The outermost node sees only the inward flux;
    /// solvers pin it to zero, which realizes the Dirichlet condition at R.
    pub fn neg_laplacian_into(&self, f: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, c) in self.cond.iter().enumerate() {
            let flux = c * (f[i + 1] - f[i]);
            out[i] -= flux;
            out[i + 1] += flux;
        }
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o /= w;
        }
    }

    /// Number of nodes in [0, r].
    pub fn nodes_within(&self, r: f64) -> usize {
        self.nodes.partition_point(|&x| x <= r)
    }

    /// Samples `amp·f(arg·r)` at the nodes from samples of f, by monotone
    /// cubic interpolation with zero extension beyond R.
    pub fn rescale(&self, f: &[f64], amp: f64, arg: f64) -> Vec<f64> {
        let q: Vec<f64> = self.nodes.iter().map(|r| arg * r).collect();
        let mut out = alloc::vec![0.0; self.len()];
        Pchip::new(&self.nodes, f).eval_sorted(&q, &mut out);
        out.iter_mut().for_each(|x| *x *= amp);
        out
    }

    /// Transfers samples from another grid of the same dimension.
    pub fn resample_from(&self, other: &RadialGrid, f: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.len()];
        Pchip::new(&other.nodes, f).eval_sorted(&self.nodes, &mut out);
        out
    }
}

/// Admissible range of the fiber and dilation factors.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ScaleWindow {
    pub lo: f64,
    pub hi: f64,
}

impl Default for ScaleWindow {
    fn default() -> Self {
        ScaleWindow { lo: 1e-4, hi: 1e4 }
    }
}

impl ScaleWindow {
    pub fn check(&self, factor: f64) -> Result<()> {
        if factor >= self.lo && factor <= self.hi {
            Ok(())
        } else {
            Err(Error::Window { factor, lo: self.lo, hi: self.hi })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Norms {
    pub mass_sq: f64,
    pub grad_sq: f64,
    /// (p, ∫|f|^p) for each requested p.
    pub lp: Vec<(f64, f64)>,
}

/// A radial profile sampled at the nodes of a shared grid.
#[derive(Debug, Clone)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("values", "field contains non-finite samples"));
        }
        Ok(RadialField { grid, values })
    }

    pub(crate) fn from_vec(grid: Arc<RadialGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        RadialField { grid, values }
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        RadialField { grid, values }
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let values = alloc::vec![0.0; grid.len()];
        RadialField { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &RadialField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn mass_sq(&self) -> f64 {
        self.grid.mass_sq(&self.values)
    }
    pub fn grad_sq(&self) -> f64 {
        self.grid.grad_sq(&self.values)
    }
    pub fn lp_pow(&self, p: f64) -> f64 {
        self.grid.lp_pow(&self.values, p)
    }
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn norms(&self, ps: &[f64]) -> Norms {
        Norms {
            mass_sq: self.mass_sq(),
            grad_sq: self.grad_sq(),
            lp: ps.iter().map(|&p| (p, self.lp_pow(p))).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> RadialField {
        RadialField { grid: self.grid.clone(), values: self.values.iter().map(|x| c * x).collect() }
    }

    /// Δf with the symmetric limit at the origin built into the weights.
    pub fn laplacian(&self) -> RadialField {
        let mut out = alloc::vec![0.0; self.values.len()];
        self.grid.neg_laplacian_into(&self.values, &mut out);
        out.iter_mut().for_each(|x| *x = -*x);
        RadialField { grid: self.grid.clone(), values: out }
    }

    /// Mass-preserving fiber map t⋆f = t^{N/2} f(t·).
    pub fn fiber_scale(&self, t: f64, window: &ScaleWindow) -> Result<RadialField> {
        window.check(t)?;
        let amp = t.powf(self.grid.dim() as f64 / 2.0);
        Ok(RadialField { grid: self.grid.clone(), values: self.grid.rescale(&self.values, amp, t) })
    }

    /// D^{1,2}-invariant dilation ε^{(N−2)/2} f(ε·).
    pub fn dilate(&self, eps: f64, window: &ScaleWindow) -> Result<RadialField> {
        window.check(eps)?;
        let amp = eps.powf((self.grid.dim() as f64 - 2.0) / 2.0);
        Ok(RadialField { grid: self.grid.clone(), values: self.grid.rescale(&self.values, amp, eps) })
    }

    /// Discrete symmetric decreasing rearrangement. Negative samples are clamped
    /// to zero; the flag reports whether that happened.
    pub fn schwartz_rearrange(&self) -> (RadialField, bool) {
        let (values, clamped) = crate::rearrange::rearrange(self.grid.weights(), &self.values);
        (RadialField { grid: self.grid.clone(), values }, clamped)
    }
}

/// ∫|u|^α|v|^β.
pub fn interaction(u: &RadialField, v: &RadialField, alpha: f64, beta: f64) -> Result<f64> {
    if !u.same_grid(v) {
        return Err(Error::GridMismatch);
    }
    Ok(interaction_raw(&u.grid, &u.values, &v.values, alpha, beta))
}

pub(crate) fn interaction_raw(g: &RadialGrid, u: &[f64], v: &[f64], alpha: f64, beta: f64) -> f64 {
    g.weights()
        .iter()
        .zip(u.iter().zip(v))
        .map(|(w, (x, y))| {
            if *x == 0.0 || *y == 0.0 {
                0.0
            } else {
                w * x.abs().powf(alpha) * y.abs().powf(beta)
            }
        })
        .sum()
}
