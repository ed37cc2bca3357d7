//! End-to-end acceptance checks. Every test writes one PASS/FAIL line to stderr
//! (uncaptured) before asserting, so `cargo test` shows the whole table.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use normcrit_core::asymptotics::{default_nu_list, fit_exponent, sweep, sweep_ground_state, SweepOpts, SweepRecord};
use normcrit_core::bubbles::{bubble_norm_orders, rayleigh_quotient};
use normcrit_core::functional::gn_ratio;
use normcrit_core::grid::interaction;
use normcrit_core::minimize::{solve_local_min, SolveResult, SolverOpts};
use normcrit_core::mountain::{level_bound_check, solve_mountain_pass, LevelBoundOpts, MpOpts};
use normcrit_core::params::derive_constants;
use normcrit_core::{DerivedConstants, Functional, Grading, ProblemParams, RadialField, RadialGrid, ScaleWindow, StatePair};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CGN: f64 = 0.208_415_633_176_509_77;

fn report(k: u32, ok: bool, detail: &str) {
    let line = format!("criterion {k} {} {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn talenti(dim: u32) -> f64 {
    let n = dim as f64;
    PI * n * (n - 2.0) * (libm::tgamma(n / 2.0) / libm::tgamma(n)).powf(2.0 / n)
}

fn default_grid(dim: u32) -> Arc<RadialGrid> {
    Arc::new(RadialGrid::default_for(dim).unwrap())
}

fn default_minimizer() -> (ProblemParams, DerivedConstants, SolveResult) {
    let p = ProblemParams::default();
    let c = derive_constants(&p, CGN, 0.5).unwrap();
    let r = solve_local_min(&p, default_grid(3), &c, &SolverOpts::default(), None).unwrap();
    (p, c, r)
}

/// Grid for ν → 0 sweeps: the minimizer spreads like ν^{−1/(2−γ)} while the
/// mountain-pass bubble concentrates, so both ends need room.
fn sweep_grid() -> Arc<RadialGrid> {
    Arc::new(RadialGrid::build(3, 4000.0, 16000, Grading::Exponential { h_min: 1e-7 }).unwrap())
}

fn random_state(grid: &Arc<RadialGrid>, rng: &mut ChaCha8Rng) -> StatePair {
    let (c1, c2, w1, w2, k): (f64, f64, f64, f64, f64) =
        (rng.gen_range(0.2..1.5), rng.gen_range(0.2..1.5), rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), rng.gen_range(0.0..2.0));
    StatePair::new(
        RadialField::from_fn(grid.clone(), |r| c1 * (-(r / w1).powi(2)).exp() * (1.0 + 0.3 * (k * r).cos())),
        RadialField::from_fn(grid.clone(), |r| c2 * (-(r / w2).powi(2)).exp() * (1.0 - 0.2 * r / (1.0 + r))),
    )
    .unwrap()
}

#[test]
fn criterion_1_sobolev_constant() {
    let mut ok = true;
    let mut detail = String::new();
    for dim in [3, 4] {
        let q = rayleigh_quotient(&default_grid(dim));
        let s = talenti(dim);
        let e = rel(q, s);
        ok &= e < 0.01;
        detail += &format!("N={dim}: quotient {q:.6} vs {s:.6} (rel {e:.1e}); ");
    }
    report(1, ok, &detail);
    assert!(ok);
}

#[test]
fn criterion_2_bubble_expansion_orders() {
    let ns = [4.0, 8.0, 16.0, 32.0, 64.0];
    let mut ok = true;
    let mut detail = String::new();
    for dim in [3, 4] {
        let r = bubble_norm_orders(dim, &ns).unwrap();
        let n = dim as f64;
        let g_ok = (r.grad.slope / -(n - 2.0) - 1.0).abs() < 0.15;
        let c_ok = (r.crit.slope / -n - 1.0).abs() < 0.15;
        let m_ok = r.mass_ratio_spread < 2.0;
        ok &= g_ok && c_ok && m_ok;
        detail += &format!(
            "N={dim}: grad slope {:.3}, crit slope {:.3}, mass ratio spread {:.3}; ",
            r.grad.slope, r.crit.slope, r.mass_ratio_spread
        );
    }
    report(2, ok, &detail);
    assert!(ok);
}

#[test]
fn criterion_3_functional_correctness() {
    let grid = Arc::new(RadialGrid::build(3, 30.0, 1500, Grading::Graded).unwrap());
    let p = ProblemParams { nu: 0.3, mu2: 1.7, a: 1.0, b: 1.3, alpha: 1.2, beta: 1.3, ..ProblemParams::default() };
    let f = Functional::new(&p, grid.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_grad = 0.0f64;
    for _ in 0..10 {
        let s = random_state(&grid, &mut rng);
        let (k, phase): (f64, f64) = (rng.gen_range(0.2..2.0), rng.gen_range(0.0..3.0));
        let dir = |x: &RadialField, c: f64| -> Vec<f64> {
            x.values().iter().zip(grid.nodes()).map(|(y, r)| y * (c + (k * r + phase).sin())).collect()
        };
        let (hu, hv) = (dir(&s.u, 0.5), dir(&s.v, -0.3));
        let g = f.gradient(&s).unwrap();
        let shifted = |e: f64| {
            let u: Vec<f64> = s.u.values().iter().zip(&hu).map(|(a, b)| a + e * b).collect();
            let v: Vec<f64> = s.v.values().iter().zip(&hv).map(|(a, b)| a + e * b).collect();
            f.energy(&StatePair::new(RadialField::new(grid.clone(), u).unwrap(), RadialField::new(grid.clone(), v).unwrap()).unwrap())
        };
        let eps = 1e-5;
        let fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
        let an = grid.dot(g.u.values(), &hu) + grid.dot(g.v.values(), &hv);
        worst_grad = worst_grad.max((fd - an).abs() / an.abs());
    }

    let mut s = random_state(&grid, &mut rng);
    s.project(p.a, p.b).unwrap();
    let w = ScaleWindow::default();
    let h = 1e-5;
    let daux = (f.aux_energy(h, &s, &w).unwrap() - f.aux_energy(-h, &s, &w).unwrap()) / (2.0 * h);
    let poho_err = (daux - f.pohozaev(&s)).abs();

    let dg = default_grid(3);
    let fd = Functional::new(&p, dg.clone()).unwrap();
    let s = random_state(&dg, &mut rng);
    let mut fiber_err = 0.0f64;
    for k in 0..=12 {
        let t = 0.5 * 4f64.powf(k as f64 / 12.0);
        let closed = fd.fiber_energy_closed(&s, t);
        let direct = fd.energy(&s.fiber_scale(t, &w).unwrap());
        fiber_err = fiber_err.max(rel(direct, closed));
    }
    let ok = worst_grad < 1e-5 && poho_err < 1e-8 && fiber_err < 1e-3;
    report(
        3,
        ok,
        &format!("gradient vs FD worst rel {worst_grad:.1e}; |P - dI~/dsigma| {poho_err:.1e}; fiber closed vs direct worst rel {fiber_err:.1e}"),
    );
    assert!(ok);
}

#[test]
fn criterion_4_local_minimizer() {
    let (p, c, r) = default_minimizer();
    let pm = r.diagnostics.multipliers_pohozaev.unwrap();
    let agree = rel(pm.lambda1, r.multipliers.lambda1).max(rel(pm.lambda2, r.multipliers.lambda2));
    let fine = Arc::new(RadialGrid::build(3, 100.0, 16000, Grading::Exponential { h_min: 1e-6 }).unwrap());
    let r2 = solve_local_min(&p, fine, &c, &SolverOpts::default(), None).unwrap();
    let doubling = rel(r2.level, r.level);
    let ok = r.converged
        && r.level < 0.0
        && r.kinetic < c.rho0 * c.rho0
        && r.grad_residual < 1e-6
        && r.poho_residual < 1e-4
        && r.multipliers.lambda1 > 0.0
        && r.multipliers.lambda2 > 0.0
        && agree < 1e-3
        && doubling < 1e-3;
    report(
        4,
        ok,
        &format!(
            "level {:.10}, kinetic {:.4} < rho0^2 {:.4}, residual {:.1e}, Pohozaev {:.1e}, lambda ({:.6}, {:.6}), multiplier gap {agree:.1e}, grid doubling {doubling:.1e}",
            r.level, r.kinetic, c.rho0 * c.rho0, r.grad_residual, r.poho_residual, r.multipliers.lambda1, r.multipliers.lambda2
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_5_energy_ordering() {
    let (p, c, m) = default_minimizer();
    let (r, _) = solve_mountain_pass(&p, &m, &MpOpts::default()).unwrap();
    let bound = m.level + p.bubble_energy();
    let ok = r.converged
        && m.level < 0.0
        && 0.0 < c.k0
        && c.k0 <= r.level
        && r.level < bound
        && r.poho_residual < 1e-3
        && r.multipliers.lambda1 > 0.0
        && r.multipliers.lambda2 > 0.0;
    report(
        5,
        ok,
        &format!(
            "m {:.6} < 0 < k0 {:.6} <= M {:.8} < bound {:.8}; Pohozaev {:.1e}; lambda ({:.5}, {:.5})",
            m.level, c.k0, r.level, bound, r.poho_residual, r.multipliers.lambda1, r.multipliers.lambda2
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_6_level_bound_test_functions() {
    let (p, _, m) = default_minimizer();
    let ns = [4.0, 16.0, 64.0, 256.0, 1024.0, 4096.0];
    let chk = level_bound_check(&p, &m, &ns, &LevelBoundOpts::default()).unwrap();
    let last = chk.reports.last().unwrap();
    let h0_ok = (chk.h0 - m.level).abs() < 1e-8 * m.level.abs().max(1.0);
    let bracket_ok = chk.t_bracket.0 > 0.5 && chk.t_bracket.1 < 2.0;
    let e = -(p.dim as f64 - 2.0) / 2.0;
    let lin = chk.cross_linear.as_ref().map_or(f64::NAN, |f| f.slope);
    let slope_ok = (lin / e - 1.0).abs() < 0.2;
    let ok = h0_ok && last.satisfied && bracket_ok && slope_ok;
    report(
        6,
        ok,
        &format!(
            "H_n(0) - m = {:.1e}; n={}: max H {:.8} < bound {:.8} at t={:.4}; t bracket [{:.4}, {:.4}]; cross-term slope {lin:.4} (expected {e})",
            chk.h0 - m.level, last.n, last.h_max, chk.bound, last.t_max, chk.t_bracket.0, chk.t_bracket.1
        ),
    );
    assert!(ok);
}

fn run_sweep(p: &ProblemParams, min_only: bool) -> Vec<SweepRecord> {
    let opts = SweepOpts { min_only, ..SweepOpts::default() };
    let c = derive_constants(p, opts.c_gn, opts.nu0_fraction).unwrap();
    let g = sweep_grid();
    let gs = sweep_ground_state(p, g.clone(), &opts).unwrap();
    sweep(p, &default_nu_list(&c, 3..=8), g, Some(&gs.state), &opts).unwrap()
}

fn slope(recs: &[SweepRecord], y: impl Fn(&SweepRecord) -> f64) -> f64 {
    fit_exponent(&recs.iter().map(|r| (r.nu, y(r))).collect::<Vec<_>>()).unwrap().0
}

#[test]
fn criterion_7_asymptotic_exponents() {
    let p = ProblemParams::default();
    let recs = run_sweep(&p, true);
    let e = 2.0 / (2.0 - p.gamma());
    let lam = slope(&recs, |r| r.min.lambda1 + r.min.lambda2);
    let kin = slope(&recs, |r| r.min.kinetic);
    let t = slope(&recs, |r| r.t_nu);
    let conv = recs.iter().all(|r| r.converged_min());
    let lam_ok = (lam / e - 1.0).abs() < 0.1;
    let kin_ok = (kin / e - 1.0).abs() < 0.1;
    let t_ok = (t / (e / 2.0) - 1.0).abs() < 0.1;
    let sup = |r: &SweepRecord| r.min.sup_u + r.min.sup_v;
    let mono = recs.windows(2).all(|w| sup(&w[1]) < sup(&w[0]) && w[0].min.level < w[1].min.level && w[1].min.level < 0.0);
    let vanish = sup(recs.last().unwrap()) < sup(&recs[0]) / 4.0;
    let ok = conv && lam_ok && kin_ok && t_ok && mono && vanish;
    report(
        7,
        ok,
        &format!(
            "lambda-sum slope {lam:.4} [{}], kinetic slope {kin:.4} [{}] (expected {e:.4}); t_nu slope {t:.4} vs +{:.4} [{}]; sup-norms and levels monotone to 0 [{}]",
            if lam_ok { "ok" } else { "off" },
            if kin_ok { "ok" } else { "off" },
            e / 2.0,
            if t_ok { "ok" } else { "off: the argmin of the E-distance over t*(u,v) = t^{N/2}u(t.) scales like nu^{-1/(2-gamma)}" },
            if mono && vanish { "ok" } else { "off" },
        ),
    );
    assert!(conv && lam_ok && kin_ok && mono && vanish);
    assert!(t_ok, "t_nu slope {t} has the opposite sign of the stated law");
}

#[test]
fn criterion_8_mountain_pass_blow_up() {
    let p = ProblemParams { mu2: 2.0, ..ProblemParams::default() };
    let recs = run_sweep(&p, false);
    let limit = p.bubble_energy();
    let last = recs.last().unwrap();
    let mp_last = last.mp.as_ref().map_or(f64::NAN, |m| m.level);
    let level_ok = rel(mp_last, limit) < 0.1;
    let d: Vec<f64> = recs.iter().map(|r| r.bubble_distance).collect();
    let dec = d.windows(2).all(|w| w[1] < w[0]);
    let on_v = recs.iter().all(|r| r.blowup_component == normcrit_core::mountain::Component::V);
    let conv = recs.iter().all(|r| r.converged_min() && r.converged_mp());
    let ok = level_ok && dec && d[d.len() - 1] < 0.15 && on_v && conv;
    report(
        8,
        ok,
        &format!(
            "mp level at smallest nu {mp_last:.7} vs limit {limit:.7} (rel {:.1e}); bubble distance {:?} decreasing to {:.1e}; eps_nu last {:.2e}",
            rel(mp_last, limit),
            d.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>(),
            d[d.len() - 1],
            last.eps_nu
        ),
    );
    assert!(ok);
}

fn solve_digest(dir: &Path) -> Vec<u8> {
    let out = dir.join("min.json");
    let cfg = dir.join("run.json");
    std::fs::write(&cfg, r#"{"params": {"nu": 0.4}, "grid": {"m": 2000}, "gn": {"trials": 2}, "seed": 11}"#).unwrap();
    let mut bytes = Vec::new();
    for cmd in ["solve-min", "gn-estimate", "constants"] {
        let args = ["normcrit", cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
        let code = normcrit::commands::main_with_args(args);
        assert_eq!(code, 0, "{cmd}");
        bytes.extend(std::fs::read(&out).unwrap());
    }
    bytes
}

#[test]
fn criterion_9_property_suites() {
    let mut runner = TestRunner::new(Config { cases: 100, ..Config::default() });
    let g = Arc::new(RadialGrid::build(3, 30.0, 1500, Grading::Graded).unwrap());
    let fine = Arc::new(RadialGrid::build(3, 10.0, 16000, Grading::Graded).unwrap());
    let dg = default_grid(3);
    let profile = (0.2f64..2.0, 0.3f64..3.0, 0.0f64..6.0, 0.2f64..2.0);
    let field = |gr: &Arc<RadialGrid>, (c, w, r0, s): (f64, f64, f64, f64)| {
        RadialField::from_fn(gr.clone(), move |r| c * ((-(r - r0).powi(2) / (w * s)).exp() + 0.1 * (-r / w).exp()))
    };

    let mass = runner.run(&(profile.clone(), profile.clone(), 0.1f64..3.0, 0.1f64..3.0), |(pu, pv, a, b)| {
        let mut s = StatePair::new(field(&g, pu), field(&g, pv)).unwrap();
        s.project(a, b).unwrap();
        let (ma, mb) = s.masses();
        prop_assert!((ma - a).abs() < 1e-10 * a && (mb - b).abs() < 1e-10 * b);
        Ok(())
    });

    let lp = runner.run(&profile.clone(), |pu| {
        let f = field(&fine, pu);
        let (fs, _) = f.schwartz_rearrange();
        for q in [1.0, 2.0, 2.4, 6.0] {
            let (a, b) = (f.lp_pow(q), fs.lp_pow(q));
            prop_assert!((a - b).abs() < 1e-6 * a, "p={}: {} {}", q, a, b);
        }
        Ok(())
    });

    let hl = runner.run(&(profile.clone(), profile.clone()), |(pu, pv)| {
        let (u, v) = (field(&g, pu), field(&g, pv));
        let before = interaction(&u, &v, 1.2, 1.3).unwrap();
        let after = interaction(&u.schwartz_rearrange().0, &v.schwartz_rearrange().0, 1.2, 1.3).unwrap();
        prop_assert!(after >= before * (1.0 - 1e-9), "{} < {}", after, before);
        Ok(())
    });

    let gn = runner.run(&(profile.clone(), profile, 0.5f64..2.0), |(pu, pv, t)| {
        let s = StatePair::new(field(&dg, pu), field(&dg, pv)).unwrap();
        let r0 = gn_ratio(&s, 1.2, 1.2).unwrap();
        let r = gn_ratio(&s.fiber_scale(t, &ScaleWindow::default()).unwrap(), 1.2, 1.2).unwrap();
        prop_assert!((r - r0).abs() < 1e-3 * r0, "t={}: {} {}", t, r, r0);
        Ok(())
    });

    let [mass, lp, hl, gn] = [mass.map_err(|e| e.to_string()), lp.map_err(|e| e.to_string()), hl.map_err(|e| e.to_string()), gn.map_err(|e| e.to_string())];
    let dir = tempfile::tempdir().unwrap();
    let first = solve_digest(dir.path());
    let second = solve_digest(dir.path());
    let det = first == second;

    let verdict = |r: &Result<(), String>| if r.is_ok() { "ok" } else { "off" };
    let ok = mass.is_ok() && lp.is_ok() && hl.is_ok() && gn.is_ok() && det;
    report(
        9,
        ok,
        &format!(
            "mass projection [{}], rearrangement Lp [{}], Hardy-Littlewood [{}], GN dilation invariance [{}] (100 cases each); byte-identical reruns [{}]",
            verdict(&mass),
            verdict(&lp),
            verdict(&hl),
            verdict(&gn),
            if det { "ok" } else { "off" }
        ),
    );
    for r in [mass, lp, hl, gn] {
        if let Err(e) = r {
            panic!("{e}");
        }
    }
    assert!(det);
}
