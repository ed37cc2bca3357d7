//! Problem instances and the closed-form constants of the local-minimum geometry.

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ProblemParams {
    #[cfg_attr(feature = "serde", serde(rename = "N"))]
    pub dim: u32,
    pub a: f64,
    pub b: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
}

/// N = 3, a = b = 1, μ₁ = μ₂ = 1, α = β = 1.2 and ν = 0.1·ν̄₀ for C_gn = 0.20841563317650977.
impl Default for ProblemParams {
    fn default() -> Self {
        ProblemParams { dim: 3, a: 1.0, b: 1.0, mu1: 1.0, mu2: 1.0, alpha: 1.2, beta: 1.2, nu: 0.520_143_922_727_450_9 }
    }
}

impl ProblemParams {
    pub fn validate(self) -> Result<Self> {
        if self.dim != 3 && self.dim != 4 {
            return Err(Error::UnsupportedDimension(self.dim));
        }
        for (key, x) in [("a", self.a), ("b", self.b), ("mu1", self.mu1), ("mu2", self.mu2)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::invalid(key, alloc::format!("must be positive and finite, got {x}")));
            }
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::invalid("nu", alloc::format!("must be nonnegative and finite, got {}", self.nu)));
        }
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha", alloc::format!("must exceed 1, got {}", self.alpha)));
        }
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return Err(Error::invalid("beta", alloc::format!("must exceed 1, got {}", self.beta)));
        }
        let cap = 2.0 + 4.0 / self.dim as f64;
        if self.alpha + self.beta >= cap {
            return Err(Error::invalid(
                "alpha+beta",
                alloc::format!("alpha + beta = {} must be below 2 + 4/N = {cap}", self.alpha + self.beta),
            ));
        }
        Ok(self)
    }

    pub fn two_star(&self) -> f64 {
        two_star(self.dim)
    }

    /// Dilation exponent N(α+β−2)/2 of the coupling term.
    pub fn gamma(&self) -> f64 {
        self.dim as f64 * (self.alpha + self.beta - 2.0) / 2.0
    }

    pub fn mu_max(&self) -> f64 {
        self.mu1.max(self.mu2)
    }

    /// (1/N)·min{μ₁^{(2−N)/2}, μ₂^{(2−N)/2}}·S^{N/2}, the energy of one critical bubble.
    pub fn bubble_energy(&self) -> f64 {
        let n = self.dim as f64;
        let e = (2.0 - n) / 2.0;
        let s = sobolev_constant(self.dim).unwrap_or(f64::NAN);
        self.mu1.powf(e).min(self.mu2.powf(e)) * s.powf(n / 2.0) / n
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }
}

pub fn two_star(dim: u32) -> f64 {
    let n = dim as f64;
    2.0 * n / (n - 2.0)
}

/// Sharp Sobolev constant S, the value of ‖∇U‖₂²/‖U‖_{2*}² at the Aubin–Talenti profile.
pub fn sobolev_constant(dim: u32) -> Result<f64> {
    match dim {
        3 => Ok(5.477_904_089_531_331_9),
        4 => Ok(10.260_398_641_294_913),
        n => Err(Error::UnsupportedDimension(n)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct DerivedConstants {
    pub gamma: f64,
    pub two_star: f64,
    #[cfg_attr(feature = "serde", serde(rename = "S"))]
    pub s: f64,
    #[cfg_attr(feature = "serde", serde(rename = "C_gn"))]
    pub c_gn: f64,
    #[cfg_attr(feature = "serde", serde(rename = "A"))]
    pub a: f64,
    #[cfg_attr(feature = "serde", serde(rename = "B"))]
    pub b: f64,
    pub rho_nu: f64,
    pub nu_bar0: f64,
    pub rho0: f64,
    pub nu0: f64,
    pub k0: f64,
}

pub fn derive_constants(p: &ProblemParams, c_gn: f64, nu0_fraction: f64) -> Result<DerivedConstants> {
    let p = p.validate()?;
    if !(c_gn > 0.0 && c_gn.is_finite()) {
        return Err(Error::invalid("c_gn", alloc::format!("must be positive, got {c_gn}")));
    }
    if !(nu0_fraction > 0.0 && nu0_fraction < 1.0) {
        return Err(Error::invalid("nu0_fraction", alloc::format!("must lie in (0,1), got {nu0_fraction}")));
    }
    let s = sobolev_constant(p.dim)?;
    let ts = p.two_star();
    let g = p.gamma();
    let a = c_gn * (p.a * p.a + p.b * p.b).powf((p.alpha + p.beta - g) / 2.0);
    let b = s.powf(-ts / 2.0) * p.mu_max() / ts;
    // ρ_ν = ν^{1/(2*−γ)}·c1 maximizes h_ν.
    let c1 = (a * (2.0 - g) / (b * (ts - 2.0))).powf(1.0 / (ts - g));
    let nu_bar0 = (0.5 / (a * c1.powf(g - 2.0) + b * c1.powf(ts - 2.0))).powf((ts - g) / (ts - 2.0));
    let rho0 = nu_bar0.powf(1.0 / (ts - g)) * c1;
    let nu0 = nu0_fraction * nu_bar0;
    let mut c = DerivedConstants {
        gamma: g,
        two_star: ts,
        s,
        c_gn,
        a,
        b,
        rho_nu: p.nu.powf(1.0 / (ts - g)) * c1,
        nu_bar0,
        rho0,
        nu0,
        k0: 0.0,
    };
    c.k0 = rho0 * rho0 * c.h(nu0, rho0);
    Ok(c)
}

impl DerivedConstants {
    /// h_ν(ρ) = ½ − νAρ^{γ−2} − Bρ^{2*−2}.
    pub fn h(&self, nu: f64, rho: f64) -> f64 {
        0.5 - nu * self.a * rho.powf(self.gamma - 2.0) - self.b * rho.powf(self.two_star - 2.0)
    }

    /// Whether ν lies below ν̄₀, where the local-minimum geometry is guaranteed.
    pub fn geometry_guaranteed(&self, nu: f64) -> bool {
        nu < self.nu_bar0
    }

    /// Stationary point of h_ν for an arbitrary ν.
    pub fn rho_at(&self, nu: f64) -> f64 {
        let (g, ts) = (self.gamma, self.two_star);
        (nu * self.a * (2.0 - g) / (self.b * (ts - 2.0))).powf(1.0 / (ts - g))
    }
}

pub fn h_profile(c: &DerivedConstants, nu: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::invalid("rho", "must be positive"));
    }
    Ok(c.h(nu, rho))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ProblemParams {
        ProblemParams::default()
    }

    fn talenti(dim: u32) -> f64 {
        let n = dim as f64;
        core::f64::consts::PI * n * (n - 2.0)
            * (libm::tgamma(n / 2.0) / libm::tgamma(n)).powf(2.0 / n)
    }

    #[test]
    fn default_coupling_is_a_tenth_of_the_threshold() {
        let c = derive_constants(&base(), 0.208_415_633_176_509_77, 0.5).unwrap();
        assert!((base().nu / (0.1 * c.nu_bar0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn validate_accepts_and_rejects() {
        assert!(base().validate().is_ok());
        let bad = ProblemParams { dim: 4, alpha: 1.6, beta: 1.6, ..base() };
        match bad.validate() {
            Err(Error::Invalid { key, .. }) => assert_eq!(key, "alpha+beta"),
            e => panic!("{e:?}"),
        }
        assert_eq!(ProblemParams { dim: 5, ..base() }.validate(), Err(Error::UnsupportedDimension(5)));
        assert!(ProblemParams { a: 0.0, ..base() }.validate().is_err());
        assert!(ProblemParams { nu: -1e-3, ..base() }.validate().is_err());
        assert!(ProblemParams { alpha: 1.0, ..base() }.validate().is_err());
    }

    #[test]
    fn sobolev_matches_talenti() {
        for d in [3, 4] {
            let s = sobolev_constant(d).unwrap();
            assert!((s - talenti(d)).abs() < 1e-13 * s, "N={d}");
        }
        assert!((sobolev_constant(3).unwrap() - 5.4779).abs() < 1e-4);
        assert!((sobolev_constant(4).unwrap() - 10.2604).abs() < 1e-4);
    }

    // Independent route: the fully expanded expression for ν̄₀.
    fn nu_bar0_expanded(p: &ProblemParams, c_gn: f64) -> f64 {
        let s = sobolev_constant(p.dim).unwrap();
        let ts = p.two_star();
        let g = p.gamma();
        let m = p.mu_max();
        let num = m.powf((g - 2.0) / (ts - 2.0))
            * (ts - 2.0)
            * (ts * (2.0 - g)).powf((2.0 - g) / (ts - 2.0))
            * s.powf(ts * (2.0 - g) / (2.0 * (ts - 2.0)));
        let den = (2.0 * (ts - g)).powf((ts - g) / (ts - 2.0))
            * c_gn
            * (p.a * p.a + p.b * p.b).powf((p.alpha + p.beta - g) / 2.0);
        num / den
    }

    #[test]
    fn nu_bar0_closed_forms_agree() {
        for p in [
            base(),
            ProblemParams { mu2: 2.0, a: 0.7, b: 1.3, alpha: 1.1, beta: 1.4, ..base() },
            ProblemParams { dim: 4, alpha: 1.3, beta: 1.4, ..base() },
        ] {
            let c = derive_constants(&p, 0.21, 0.5).unwrap();
            let e = nu_bar0_expanded(&p, 0.21);
            assert!((c.nu_bar0 - e).abs() < 1e-12 * e, "{} vs {}", c.nu_bar0, e);
        }
    }

    #[test]
    fn h_vanishes_at_threshold_and_is_stationary() {
        let c = derive_constants(&base(), 0.2084, 0.5).unwrap();
        assert!(c.h(c.nu_bar0, c.rho0).abs() < 1e-13);
        let nu = 0.3 * c.nu_bar0;
        let r = c.rho_at(nu);
        let d = 1e-6 * r;
        let dh = (c.h(nu, r + d) - c.h(nu, r - d)) / (2.0 * d);
        assert!(dh.abs() < 1e-8, "{dh}");
        assert!(c.k0 > 0.0);
        assert!((c.nu0 - 0.5 * c.nu_bar0).abs() < 1e-15);
    }

    #[test]
    fn h_limits() {
        let c = derive_constants(&base(), 0.2084, 0.5).unwrap();
        assert!((c.h(0.0, 1e-8) - 0.5).abs() < 1e-10);
        assert!(c.h(0.1, 1e-12) < -1e3);
        assert!(h_profile(&c, 0.1, 0.0).is_err());
    }

    #[test]
    fn h_max_matches_dense_scan() {
        let c = derive_constants(&base(), 0.2084, 0.5).unwrap();
        let nu = 0.37 * c.nu_bar0;
        let r = c.rho_at(nu);
        let best = (0..200_001)
            .map(|i| {
                let rho = 1e-3 * (1e4f64).powf(i as f64 / 200_000.0);
                c.h(nu, rho)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(c.h(nu, r) >= best - 1e-12);
        assert!((c.h(nu, r) - best).abs() < 1e-8);
    }

    #[test]
    fn nu_bar0_decreases_with_mass() {
        let p1 = base();
        let p2 = ProblemParams { a: 2.0, b: 2.0, ..base() };
        let c1 = derive_constants(&p1, 0.2084, 0.5).unwrap();
        let c2 = derive_constants(&p2, 0.2084, 0.5).unwrap();
        assert!(c2.nu_bar0 <= c1.nu_bar0);
    }

    #[test]
    fn rejects_bad_fraction_and_cgn() {
        assert!(derive_constants(&base(), 0.0, 0.5).is_err());
        assert!(derive_constants(&base(), 0.2, 1.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn params() -> impl Strategy<Value = ProblemParams> {
            (prop_oneof![Just(3u32), Just(4u32)], 0.2..3.0f64, 0.2..3.0f64, 0.2..4.0f64, 0.2..4.0f64, 0.01..0.99f64, 0.01..0.99f64, 0.0..0.95f64)
                .prop_map(|(dim, a, b, mu1, mu2, sa, sb, fnu)| {
                    // α, β > 1 with α+β below the mass-critical cap
                    let room = 4.0 / dim as f64;
                    let alpha = 1.0 + 0.5 * room * sa;
                    let beta = 1.0 + 0.5 * room * sb * 0.999;
                    ProblemParams { dim, a, b, mu1, mu2, alpha, beta, nu: fnu }
                })
        }

        proptest! {
            #[test]
            fn exponent_ordering(p in params()) {
                let p = p.validate().unwrap();
                let c = derive_constants(&p, 0.2, 0.5).unwrap();
                prop_assert!(c.gamma > 0.0 && c.gamma < 2.0);
                prop_assert!(c.gamma < c.two_star && 2.0 < c.two_star);
            }

            #[test]
            fn stationary_point_is_global_max(p in params(), frac in 0.01..0.99f64) {
                let c = derive_constants(&p, 0.2, 0.5).unwrap();
                let nu = frac * c.nu_bar0;
                let r = c.rho_at(nu);
                let top = c.h(nu, r);
                for i in 0..400 {
                    let rho = r * (1e-3f64).powf(1.0 - i as f64 / 200.0);
                    prop_assert!(c.h(nu, rho) <= top + 1e-12 * top.abs().max(1.0));
                }
            }

            #[test]
            fn k0_positive(p in params(), frac in 0.01..0.99f64) {
                let c = derive_constants(&p, 0.2, frac).unwrap();
                prop_assert!(c.k0 > 0.0);
            }

            #[test]
            fn nu_bar0_monotone(p in params(), c_gn in 0.05..1.0f64, scale in 1.01..3.0f64) {
                let c = derive_constants(&p, c_gn, 0.5).unwrap();
                let bigger_c = derive_constants(&p, c_gn * scale, 0.5).unwrap();
                prop_assert!(bigger_c.nu_bar0 < c.nu_bar0);
                let q = ProblemParams { a: p.a * scale, ..p };
                let bigger_mass = derive_constants(&q, c_gn, 0.5).unwrap();
                prop_assert!(bigger_mass.nu_bar0 < c.nu_bar0);
            }
        }
    }
}
