//! The Aubin–Talenti profile, the truncated bubbles U_n and their norm expansions.

use alloc::sync::Arc;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::asymptotics::fit_exponent;
use crate::error::{Error, Result};
use crate::grid::{omega, RadialField, RadialGrid};
use crate::params::{sobolev_constant, two_star};
use crate::quad;

/// A_N = [N(N−2)]^{(N−2)/4}.
pub fn a_n(dim: u32) -> f64 {
    let n = dim as f64;
    (n * (n - 2.0)).powf((n - 2.0) / 4.0)
}

/// U(r) = A_N(1+r²)^{−(N−2)/2}.
pub fn bubble_profile(dim: u32, r: f64) -> f64 {
    let k = (dim as f64 - 2.0) / 2.0;
    a_n(dim) * (1.0 + r * r).powf(-k)
}

/// Θ_n(r): the bubble at scale 1/n on [0,1), a linear ramp to zero on [1,2), zero beyond.
pub fn theta(dim: u32, n: f64, r: f64) -> f64 {
    let k = (dim as f64 - 2.0) / 2.0;
    let a = a_n(dim);
    if r < 1.0 {
        a * (n / (1.0 + n * n * r * r)).powf(k)
    } else if r < 2.0 {
        a * (n / (1.0 + n * n)).powf(k) * (2.0 - r)
    } else {
        0.0
    }
}

fn theta_prime(dim: u32, n: f64, r: f64) -> f64 {
    let k = (dim as f64 - 2.0) / 2.0;
    let a = a_n(dim);
    if r < 1.0 {
        -a * n.powf(k) * 2.0 * k * n * n * r * (1.0 + n * n * r * r).powf(-k - 1.0)
    } else if r < 2.0 {
        -a * (n / (1.0 + n * n)).powf(k)
    } else {
        0.0
    }
}

pub fn aubin_talenti(grid: &Arc<RadialGrid>) -> RadialField {
    let dim = grid.dim();
    RadialField::from_fn(grid.clone(), |r| bubble_profile(dim, r))
}

/// Samples Θ_n at the nodes. Fails when the grid does not reach r = 2.
pub fn truncated_bubble(grid: &Arc<RadialGrid>, n: f64) -> Result<RadialField> {
    if !(n >= 1.0) {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    if grid.radius() < 2.0 {
        return Err(Error::invalid("R", "the grid must cover the support [0, 2] of the truncated bubble"));
    }
    let dim = grid.dim();
    Ok(RadialField::from_fn(grid.clone(), |r| theta(dim, n, r)))
}

/// Number of grid nodes in [0, 1/n]; at least 8 are needed to resolve U_n.
pub fn nodes_per_scale(grid: &RadialGrid, n: f64) -> usize {
    grid.nodes_within(1.0 / n)
}

/// ξ(n) = ∫₀ⁿ s^{N−1}/(1+s²)^{N−2} ds.
pub fn xi(dim: u32, n: f64) -> Result<f64> {
    match dim {
        3 => Ok(n - n.atan()),
        4 => {
            let q = 1.0 + n * n;
            Ok(0.5 * (q.ln() + 1.0 / q - 1.0))
        }
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// ‖∇U‖₂² / ‖U‖_{2*}² with the contributions beyond R added in closed form.
pub fn rayleigh_quotient(grid: &Arc<RadialGrid>) -> f64 {
    let dim = grid.dim();
    let p = two_star(dim);
    let u = aubin_talenti(grid);
    let om = omega(dim);
    let nm1 = dim as i32 - 1;
    let k = (dim as f64 - 2.0) / 2.0;
    let a = a_n(dim);
    let du = |r: f64| -a * 2.0 * k * r * (1.0 + r * r).powf(-k - 1.0);
    let tail_grad = om * quad::integrate_to_infinity(&|r| du(r).powi(2) * r.powi(nm1), grid.radius(), 1e-14);
    let tail_crit = om * quad::integrate_to_infinity(&|r| bubble_profile(dim, r).powf(p) * r.powi(nm1), grid.radius(), 1e-14);
    let grad = u.grad_sq() + tail_grad;
    let crit = u.lp_pow(p) + tail_crit;
    grad / crit.powf(2.0 / p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BubbleNorms {
    pub n: f64,
    pub mass_sq: f64,
    pub grad_sq: f64,
    pub crit_norm: f64,
    pub xi: f64,
}

/// Norms of U_n by adaptive quadrature of the closed-form profile.
pub fn bubble_norms(dim: u32, n: f64) -> Result<BubbleNorms> {
    if dim != 3 && dim != 4 {
        return Err(Error::UnsupportedDimension(dim));
    }
    let om = omega(dim);
    let nm1 = dim as i32 - 1;
    let p = two_star(dim);
    let mut breaks: Vec<f64> = [0.0, 0.25 / n, 1.0 / n, 4.0 / n, 16.0 / n].into_iter().filter(|&b| b < 1.0).collect();
    breaks.extend([1.0, 2.0]);
    let int = |g: &dyn Fn(f64) -> f64| -> f64 {
        om * breaks.windows(2).map(|w| quad::integrate(g, w[0], w[1], 1e-15)).sum::<f64>()
    };
    Ok(BubbleNorms {
        n,
        mass_sq: int(&|r| theta(dim, n, r).powi(2) * r.powi(nm1)),
        grad_sq: int(&|r| theta_prime(dim, n, r).powi(2) * r.powi(nm1)),
        crit_norm: int(&|r| theta(dim, n, r).powf(p) * r.powi(nm1)),
        xi: xi(dim, n)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BubbleOrderReport {
    pub dim: u32,
    /// S^{N/2}.
    pub limit: f64,
    pub norms: Vec<BubbleNorms>,
    /// Fit of log|‖∇U_n‖₂² − S^{N/2}| against log n.
    pub grad: Fit,
    /// Fit of log|‖U_n‖_{2*}^{2*} − S^{N/2}| against log n.
    pub crit: Fit,
    /// ‖U_n‖₂²/(ξ(n)/n²) per n.
    pub mass_ratios: Vec<f64>,
    /// max/min of `mass_ratios`.
    pub mass_ratio_spread: f64,
}

pub fn bubble_norm_orders(dim: u32, n_list: &[f64]) -> Result<BubbleOrderReport> {
    if n_list.len() < 3 {
        return Err(Error::Degenerate("an order fit needs at least three values of n"));
    }
    let limit = sobolev_constant(dim)?.powf(dim as f64 / 2.0);
    let norms = n_list.iter().map(|&n| bubble_norms(dim, n)).collect::<Result<Vec<_>>>()?;
    let fit = |pick: &dyn Fn(&BubbleNorms) -> f64| -> Result<Fit> {
        let pts: Vec<(f64, f64)> = norms.iter().map(|b| (b.n, (pick(b) - limit).abs())).collect();
        let (slope, intercept, r2) = fit_exponent(&pts)?;
        Ok(Fit { slope, intercept, r2 })
    };
    let mass_ratios: Vec<f64> = norms.iter().map(|b| b.mass_sq / (b.xi / (b.n * b.n))).collect();
    let hi = mass_ratios.iter().cloned().fold(f64::MIN, f64::max);
    let lo = mass_ratios.iter().cloned().fold(f64::MAX, f64::min);
    Ok(BubbleOrderReport {
        dim,
        limit,
        grad: fit(&|b| b.grad_sq)?,
        crit: fit(&|b| b.crit_norm)?,
        norms,
        mass_ratio_spread: hi / lo,
        mass_ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grading;
    use proptest::prelude::*;

    #[test]
    fn profile_at_origin() {
        assert!((a_n(3) - 3f64.powf(0.25)).abs() < 1e-15);
        assert!((a_n(3) - 1.31607).abs() < 1e-5);
        assert!((a_n(4) - 8f64.sqrt()).abs() < 1e-15);
        assert_eq!(bubble_profile(4, 0.0), a_n(4));
        for n in [1.0, 4.0, 64.0] {
            assert!((theta(3, n, 0.0) - a_n(3) * n.sqrt()).abs() < 1e-12);
            assert!((theta(4, n, 0.0) - a_n(4) * n).abs() < 1e-12);
        }
    }

    #[test]
    fn truncated_bubble_is_continuous_and_supported_in_two() {
        for dim in [3, 4] {
            for n in [1.0, 3.0, 50.0] {
                let left = theta(dim, n, 1.0 - 1e-13);
                let right = theta(dim, n, 1.0);
                assert!((left - right).abs() < 1e-10 * right);
                assert_eq!(theta(dim, n, 2.0), 0.0);
                assert_eq!(theta(dim, n, 2.5), 0.0);
            }
        }
        let grid = Arc::new(RadialGrid::build(3, 1.5, 100, Grading::Uniform).unwrap());
        assert!(truncated_bubble(&grid, 4.0).is_err());
    }

    #[test]
    fn xi_closed_forms() {
        assert!((xi(3, 1.0).unwrap() - (1.0 - core::f64::consts::FRAC_PI_4)).abs() < 1e-15);
        assert!((xi(3, 1.0).unwrap() - 0.21460).abs() < 1e-5);
        assert!((xi(4, 1.0).unwrap() - 0.09657).abs() < 1e-5);
        // oracle: direct quadrature of the defining integral
        for dim in [3u32, 4] {
            for n in [1.0, 7.0, 64.0] {
                let q = quad::integrate(&|s| s.powi(dim as i32 - 1) / (1.0 + s * s).powi(dim as i32 - 2), 0.0, n, 1e-13);
                assert!((xi(dim, n).unwrap() - q).abs() < 1e-10 * q.max(1.0));
            }
        }
        let r = xi(3, 64.0).unwrap() / 64.0;
        assert!((r - 1.0).abs() < 0.05);
    }

    #[test]
    fn bubble_solves_critical_equation_in_the_interior() {
        for dim in [3, 4] {
            let grid = Arc::new(RadialGrid::default_for(dim).unwrap());
            let u = aubin_talenti(&grid);
            let lap = u.laplacian();
            let p = two_star(dim);
            let half = grid.nodes_within(0.5 * grid.radius());
            let mut worst = 0.0f64;
            for i in 0..half {
                let x = u.values()[i];
                worst = worst.max((-lap.values()[i] - x.powf(p - 1.0)).abs());
            }
            assert!(worst / u.sup_norm().powf(p - 1.0) < 1e-3, "N={dim}: {worst}");
        }
    }

    #[test]
    fn rayleigh_quotient_matches_talenti() {
        for dim in [3, 4] {
            let grid = Arc::new(RadialGrid::default_for(dim).unwrap());
            let s = sobolev_constant(dim).unwrap();
            let q = rayleigh_quotient(&grid);
            assert!((q / s - 1.0).abs() < 1e-2, "N={dim}: {q} vs {s}");
        }
    }

    #[test]
    fn grid_norms_of_truncated_bubble_agree_with_quadrature() {
        let grid = Arc::new(RadialGrid::default_for(3).unwrap());
        let u = truncated_bubble(&grid, 16.0).unwrap();
        let b = bubble_norms(3, 16.0).unwrap();
        assert!(nodes_per_scale(&grid, 16.0) >= 8);
        // the kink at r = 2 falls inside a cell, an O(h) error in the Dirichlet energy
        assert!((u.grad_sq() / b.grad_sq - 1.0).abs() < 1e-3);
        assert!((u.mass_sq() / b.mass_sq - 1.0).abs() < 1e-4);
        assert!((u.lp_pow(6.0) / b.crit_norm - 1.0).abs() < 1e-4);
    }

    #[test]
    fn expansion_orders() {
        let ns = [4.0, 8.0, 16.0, 32.0, 64.0];
        for dim in [3u32, 4] {
            let rep = bubble_norm_orders(dim, &ns).unwrap();
            let d = dim as f64;
            assert!((rep.grad.slope + (d - 2.0)).abs() < 0.15 * (d - 2.0), "{:?}", rep.grad);
            assert!((rep.crit.slope + d).abs() < 0.15 * d, "{:?}", rep.crit);
            assert!(rep.mass_ratio_spread < 2.0);
            for b in &rep.norms {
                assert!(b.grad_sq > rep.limit * (1.0 - 1e-3));
                assert!(b.mass_sq > 0.0 && b.crit_norm > 0.0 && b.xi > 0.0);
            }
        }
        assert!(bubble_norm_orders(3, &[4.0, 8.0]).is_err());
    }

    proptest! {
        #[test]
        fn theta_is_nonincreasing(n in 1.0f64..500.0, r in 0.0f64..2.5, dr in 0.0f64..0.5, dim in 3u32..5) {
            prop_assert!(theta(dim, n, r + dr) <= theta(dim, n, r) * (1.0 + 1e-14));
        }

        #[test]
        fn theta_decreases_in_n_beyond_the_core(r0 in 0.01f64..0.99, k in 1.0f64..50.0, dim in 3u32..5) {
            let n = 1.0 / r0 * (1.0 + k / 10.0);
            prop_assert!(theta(dim, n * 1.5, r0) < theta(dim, n, r0));
        }
    }
}
