//! Bordered Newton iteration for the constrained Euler–Lagrange system
//! `∇I(u,v) + (λ₁u, λ₂v) = 0`, `‖u‖₂ = a`, `‖v‖₂ = b`.
//!
//! Unknowns are interleaved (u₀, v₀, u₁, v₁, …) so the Jacobian is a band
//! matrix with two sub- and super-diagonals; the two mass constraints border it
//! and are eliminated through a 2×2 Schur complement.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::functional::{spow, Functional, MultiplierPair};
use crate::linalg::BandLu;

pub(crate) struct NewtonOut {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub iterations: usize,
}

struct Sys<'a> {
    f: &'a Functional,
    gu: Vec<f64>,
    gv: Vec<f64>,
}

impl<'a> Sys<'a> {
    /// Full residual vector (weighted equations then constraints) and its norm.
    fn residual(&mut self, u: &[f64], v: &[f64], lam: &MultiplierPair) -> (Vec<f64>, f64) {
        let f = self.f;
        let g = f.grid();
        let w = g.weights();
        let n = u.len() - 1;
        f.gradient_raw(u, v, &mut self.gu, &mut self.gv);
        let mut r = Vec::with_capacity(2 * n + 2);
        for i in 0..n {
            r.push(w[i] * (self.gu[i] + lam.lambda1 * u[i]));
            r.push(w[i] * (self.gv[i] + lam.lambda2 * v[i]));
        }
        r.push(0.5 * (g.mass_sq(u) - f.a * f.a));
        r.push(0.5 * (g.mass_sq(v) - f.b * f.b));
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        (r, norm)
    }

    fn jacobian(&self, u: &[f64], v: &[f64], lam: &MultiplierPair) -> BandLu {
        let f = self.f;
        let g = f.grid();
        let w = g.weights();
        let c = g.conductances();
        let n = u.len() - 1;
        let mut j = BandLu::zeros(2 * n, 2, 2);
        for i in 0..n {
            let diag = c[i] + if i > 0 { c[i - 1] } else { 0.0 };
            j.add(2 * i, 2 * i, diag);
            j.add(2 * i + 1, 2 * i + 1, diag);
            if i + 1 < n {
                j.add(2 * i, 2 * i + 2, -c[i]);
                j.add(2 * i + 2, 2 * i, -c[i]);
                j.add(2 * i + 1, 2 * i + 3, -c[i]);
                j.add(2 * i + 3, 2 * i + 1, -c[i]);
            }
        }
        let umax = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let (al, be, p) = (f.alpha, f.beta, f.two_star);
        for i in 0..n {
            let au = u[i].abs().max(1e-14 * umax);
            let av = v[i].abs().max(1e-14 * vmax);
            let duu = lam.lambda1 - f.mu1 * (p - 1.0) * au.powf(p - 2.0)
                - f.nu * al * (al - 1.0) * au.powf(al - 2.0) * av.powf(be);
            let dvv = lam.lambda2 - f.mu2 * (p - 1.0) * av.powf(p - 2.0)
                - f.nu * be * (be - 1.0) * av.powf(be - 2.0) * au.powf(al);
            let duv = -f.nu * al * be * spow(u[i], al - 1.0) * spow(v[i], be - 1.0);
            j.add(2 * i, 2 * i, w[i] * duu);
            j.add(2 * i + 1, 2 * i + 1, w[i] * dvv);
            j.add(2 * i, 2 * i + 1, w[i] * duv);
            j.add(2 * i + 1, 2 * i, w[i] * duv);
        }
        j
    }
}

pub(crate) fn newton(f: &Functional, u0: &[f64], v0: &[f64], lam0: MultiplierPair, max_iter: usize, tol: f64) -> NewtonOut {
    let m = u0.len();
    let n = m - 1;
    let w = f.grid().weights().to_vec();
    let mut sys = Sys { f, gu: alloc::vec![0.0; m], gv: alloc::vec![0.0; m] };
    let (mut u, mut v, mut lam) = (u0.to_vec(), v0.to_vec(), lam0);
    u[n] = 0.0;
    v[n] = 0.0;
    let mut iterations = 0;
    let mut residual = projected(f, &u, &v);
    for _ in 0..max_iter {
        if residual < tol {
            break;
        }
        iterations += 1;
        let (r, rn) = sys.residual(&u, &v, &lam);
        let mut jac = sys.jacobian(&u, &v, &lam);
        if !jac.factor() {
            break;
        }
        let mut x0: Vec<f64> = r[..2 * n].to_vec();
        jac.solve(&mut x0);
        let mut b1 = alloc::vec![0.0; 2 * n];
        let mut b2 = alloc::vec![0.0; 2 * n];
        for i in 0..n {
            b1[2 * i] = w[i] * u[i];
            b2[2 * i + 1] = w[i] * v[i];
        }
        let (c1, c2) = (b1.clone(), b2.clone());
        jac.solve(&mut b1);
        jac.solve(&mut b2);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        // (Bᵀ J⁻¹ B) dλ = G − Bᵀ J⁻¹ R
        let s11 = dot(&c1, &b1);
        let s12 = dot(&c1, &b2);
        let s21 = dot(&c2, &b1);
        let s22 = dot(&c2, &b2);
        let r1 = r[2 * n] - dot(&c1, &x0);
        let r2 = r[2 * n + 1] - dot(&c2, &x0);
        let det = s11 * s22 - s12 * s21;
        if !(det.abs() > 0.0) || !det.is_finite() {
            break;
        }
        let dl1 = (r1 * s22 - s12 * r2) / det;
        let dl2 = (s11 * r2 - s21 * r1) / det;
        let dz: Vec<f64> = (0..2 * n).map(|k| -x0[k] - b1[k] * dl1 - b2[k] * dl2).collect();

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut un = u.clone();
            let mut vn = v.clone();
            for i in 0..n {
                un[i] += step * dz[2 * i];
                vn[i] += step * dz[2 * i + 1];
            }
            let ln = MultiplierPair { lambda1: lam.lambda1 + step * dl1, lambda2: lam.lambda2 + step * dl2 };
            let (_, nn) = sys.residual(&un, &vn, &ln);
            if nn.is_finite() && nn < (1.0 - 1e-4 * step) * rn {
                u = un;
                v = vn;
                lam = ln;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        residual = projected(f, &u, &v);
    }
    NewtonOut { u, v, iterations }
}

fn projected(f: &Functional, u: &[f64], v: &[f64]) -> f64 {
    let m = u.len();
    let (mut gu, mut gv) = (alloc::vec![0.0; m], alloc::vec![0.0; m]);
    f.projected_residual_raw(u, v, &mut gu, &mut gv).0
}
