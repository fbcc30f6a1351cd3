//! End-to-end acceptance checks at desk scale.
//!
//! Runs without the libtest harness so that every check prints exactly one
//! `PASS`/`FAIL` line; the process exits non-zero if any check fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DVector;

use chg_core::autgroup::{jacobian_at_base, normalizing_map};
use chg_core::bergman::{
    bergman_metric, equivalence_bounds_scan, equivalence_ratios, fit_coeffs_p1, fit_holdout_error, g_series,
};
use chg_core::curvature::{curvature_bounds, hsc, hsc_origin, trace_chain_terms, sharp_directions};
use chg_core::domain::{aux_xy, random_symmetric, random_unit, sample_interior, Sampler};
use chg_core::kemetric::{
    boundary_blowup_probe, ma_residual, metric_blocks_closed, metric_pullback, DetRoute, ProbeConfig,
};
use chg_core::linalg::{self, SymMatrix};
use chg_core::oracle::{fd_hsc, fd_metric, holomorphic_jacobian};
use chg_core::{BergmanCoeffs, DomainParams, FdConfig, Point, Tangent, C64};

const CONFIGS: [(usize, usize); 4] = [(1, 1), (2, 1), (2, 2), (3, 1)];
const SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn special(p: usize, r: usize) -> DomainParams {
    DomainParams::with_special_k(r, p).expect("valid parameters")
}

fn monge_ampere() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (p, r) in CONFIGS {
        let params = special(p, r);
        let (mut closed, mut numeric) = (0.0f64, 0.0f64);
        for pt in sample_interior(&params, SEED, 1000) {
            closed = closed.max(ma_residual(&params, &pt, DetRoute::ClosedForm).unwrap_or(f64::INFINITY));
            numeric = numeric.max(ma_residual(&params, &pt, DetRoute::Numeric).unwrap_or(f64::INFINITY));
        }
        pass &= closed <= 1e-8 && numeric <= 1e-6;
        parts.push(format!("(p={p},r={r}) closed {closed:.2e} numeric {numeric:.2e}"));
    }
    outcome(pass, parts.join("; "))
}

fn negative_control() -> Outcome {
    let params = DomainParams::new(1, 2, 1.0).expect("valid parameters");
    let points = sample_interior(&params, SEED, 1000);
    let failing = points
        .iter()
        .filter(|pt| ma_residual(&params, pt, DetRoute::ClosedForm).map_or(true, |v| v > 1e-3))
        .count();
    let frac = failing as f64 / points.len() as f64;
    outcome(frac >= 0.9, format!("K=1: residual > 1e-3 at {:.1}% of points", 100.0 * frac))
}

fn oracle_equivalence() -> Outcome {
    let cfg = FdConfig { step: 1e-4, richardson: false };
    let mut pass = true;
    let mut parts = Vec::new();
    for (p, r) in CONFIGS {
        let params = special(p, r);
        let (mut fd_err, mut route_err) = (0.0f64, 0.0f64);
        for pt in sample_interior(&params, SEED + 1, 50) {
            let closed = metric_blocks_closed(&params, &pt).expect("closed blocks").assemble();
            let pulled = metric_pullback(&params, &pt).expect("pullback");
            let fd = fd_metric(&params, &pt, &cfg);
            fd_err = fd_err.max(fd.map_or(f64::INFINITY, |m| linalg::rel_diff(&m, closed.matrix())));
            route_err = route_err.max(linalg::rel_diff(closed.matrix(), pulled.matrix()));
        }
        pass &= fd_err <= 1e-5 && route_err <= 1e-8;
        parts.push(format!("(p={p},r={r}) fd {fd_err:.2e} routes {route_err:.2e}"));
    }
    outcome(pass, parts.join("; "))
}

fn curvature_range() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (p, r) in CONFIGS {
        let params = special(p, r);
        let (lo, hi) = curvature_bounds(&params);
        let mut sampler = Sampler::new(params, SEED + 2);
        let (mut wmin, mut wmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut in_range = true;
        for _ in 0..1000 {
            let pt = sampler.point();
            let t = Tangent::from_row(&params, &sampler.tangent_row()).expect("tangent");
            let w = hsc(&params, &pt, &t).unwrap_or(f64::NAN);
            in_range &= w >= lo - 1e-6 && w <= hi + 1e-6;
            if p == 1 {
                in_range &= (w + 2.0).abs() <= 1e-10;
            }
            wmin = wmin.min(w);
            wmax = wmax.max(w);
        }
        let (rank_one, scalar) = sharp_directions(&params);
        let w0 = DVector::zeros(r);
        let s_lo = hsc_origin(&params, &w0, &rank_one).unwrap_or(f64::NAN);
        let s_hi = hsc_origin(&params, &w0, &scalar).unwrap_or(f64::NAN);
        let sharp = (s_lo - lo).abs() <= 1e-10 && (s_hi - hi).abs() <= 1e-10;
        pass &= in_range && sharp;
        parts.push(format!("(p={p},r={r}) ω ∈ [{wmin:.6}, {wmax:.6}] ⊂ [{lo:.6}, {hi:.6}], sharp {s_lo:.12}/{s_hi:.12}"));
    }
    outcome(pass, parts.join("; "))
}

fn fd_curvature() -> Outcome {
    let params = special(2, 1);
    let mut sampler = Sampler::new(params, SEED + 3);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let pt = sampler.point();
        let t = Tangent::from_row(&params, &sampler.tangent_row()).expect("tangent");
        let exact = hsc(&params, &pt, &t).unwrap_or(f64::NAN);
        let fd = fd_hsc(&params, &pt, &t, &FdConfig::curvature()).unwrap_or(f64::NAN);
        let err = (fd - exact).abs();
        worst = if err.is_nan() { f64::INFINITY } else { worst.max(err) };
    }
    // convergence order of the plain second-order scheme on a fixed pair
    let pt = sampler.point();
    let t = Tangent::from_row(&params, &sampler.tangent_row()).expect("tangent");
    let exact = hsc(&params, &pt, &t).unwrap_or(f64::NAN);
    let err_at = |step: f64| {
        (fd_hsc(&params, &pt, &t, &FdConfig { step, richardson: false }).unwrap_or(f64::NAN) - exact).abs()
    };
    let ratio = err_at(0.02) / err_at(0.01);
    outcome(worst <= 1e-4 && ratio >= 3.0, format!("max |fd − ω| {worst:.2e}; halving ratio {ratio:.2}"))
}

fn automorphism_laws() -> Outcome {
    let fd_cfg = FdConfig { step: 1e-4, richardson: true };
    let mut pass = true;
    let mut parts = Vec::new();
    for (p, r) in CONFIGS {
        let params = special(p, r);
        let mut sampler = Sampler::new(params, SEED + 4);
        let (mut x_err, mut det_err, mut jac_err) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..200 {
            let pt = sampler.point();
            let base = sampler.symmetric(0.9);
            let map = normalizing_map(&params, &base).expect("map");
            let image = map.apply(&pt).expect("image");
            let x0 = aux_xy(&params, &pt).expect("aux").x;
            let x1 = aux_xy(&params, &image).map_or(f64::INFINITY, |a| a.x);
            x_err = x_err.max((x1 - x0).abs());

            let jac = jacobian_at_base(&params, &pt).expect("jacobian");
            let expect = chg_core::autgroup::ln_jacobian_det_sq(&params, &pt.z).expect("det");
            det_err = det_err.max((jac.ln_det_abs_sq() - expect).exp_m1().abs());

            let f = |coords: &[C64]| {
                let q = Point::from_coords(&params, coords).ok()?;
                Some(map.apply(&q).ok()?.to_coords().as_slice().to_vec())
            };
            let fd = holomorphic_jacobian(f, pt.to_coords().as_slice(), &fd_cfg);
            let closed = map.jacobian(&pt).expect("jacobian");
            jac_err = jac_err.max(fd.map_or(f64::INFINITY, |j| linalg::rel_diff(&j, &closed.assembled)));

            let own = normalizing_map(&params, &pt.z).expect("map");
            let f0 = |coords: &[C64]| {
                let q = Point::from_coords(&params, coords).ok()?;
                Some(own.apply(&q).ok()?.to_coords().as_slice().to_vec())
            };
            let fd0 = holomorphic_jacobian(f0, pt.to_coords().as_slice(), &fd_cfg);
            jac_err = jac_err.max(fd0.map_or(f64::INFINITY, |j| linalg::rel_diff(&j, &jac.assembled)));
        }
        pass &= x_err <= 1e-12 && det_err <= 1e-8 && jac_err <= 1e-5;
        parts.push(format!("(p={p},r={r}) X {x_err:.1e} det {det_err:.1e} J {jac_err:.1e}"));
    }
    outcome(pass, parts.join("; "))
}

fn trace_chain() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [2, 3] {
        let params = special(p, 1);
        let mut sampler = Sampler::new(params, SEED + 5);
        let mut chain = true;
        for _ in 0..1000 {
            let z = random_symmetric(sampler.rng(), p);
            let (t1, t2, t3) = trace_chain_terms(&z);
            let slack = 1e-12 * t3.max(1.0);
            chain &= t1 <= t2 + slack && t2 <= t3 + slack;
        }
        let mut diag = vec![0.0; p];
        diag[0] = 1.0;
        let (a1, a2, _) = trace_chain_terms(&SymMatrix::from_real_diagonal(&diag));
        let (_, b2, b3) = trace_chain_terms(&SymMatrix::identity(p));
        let witnesses = (a1 - a2).abs() <= 1e-12 && (b2 - b3).abs() <= 1e-12;
        pass &= chain && witnesses;
        parts.push(format!("p={p}: chain {chain}, witnesses {witnesses}"));
    }
    outcome(pass, parts.join("; "))
}

fn ball_exactness() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in [1, 2] {
        let params = DomainParams::new(r, 1, 1.0).expect("valid parameters");
        let Ok(coeffs) = fit_coeffs_p1(r) else {
            return outcome(false, format!("fit failed for r={r}"));
        };
        let lead = [2.0, 6.0][r - 1];
        let mut g_err = 0.0f64;
        for y in [1.0, 1.5, 3.0, 10.0, 100.0] {
            let g = g_series(&coeffs, y).expect("series").0;
            g_err = g_err.max((g / (lead * y.powi(r as i32 + 2)) - 1.0).abs());
        }
        let holdout = fit_holdout_error(&coeffs, 100).unwrap_or(f64::INFINITY);
        let nplus1 = (params.n() + 1) as f64;
        let mut metric_err = 0.0f64;
        for pt in sample_interior(&params, SEED + 6, 500) {
            let b = bergman_metric(&params, &coeffs, &pt).expect("bergman");
            let ke = metric_pullback(&params, &pt).expect("metric").matrix().map(|v| v * nplus1);
            metric_err = metric_err.max(linalg::rel_diff(b.matrix(), &ke));
        }
        pass &= g_err <= 1e-10 && holdout <= 1e-9 && metric_err <= 1e-8;
        let mut line = format!("r={r}: G/({lead}Y^{}) − 1 {g_err:.1e}, holdout {holdout:.1e}, metric {metric_err:.1e}", r + 2);
        if r == 1 {
            let bounds = equivalence_bounds_scan(&params, &coeffs, 64).expect("scan");
            let flat = (bounds.a - 3.0).abs() <= 1e-10 && (bounds.b - 3.0).abs() <= 1e-10;
            pass &= flat;
            line.push_str(&format!(", scan a={:.12} b={:.12}", bounds.a, bounds.b));
        }
        parts.push(line);
    }
    outcome(pass, parts.join("; "))
}

fn ratio_limits() -> Outcome {
    let x: f64 = 1.0 - 1e-6;
    let mut cases: Vec<(DomainParams, BergmanCoeffs)> = Vec::new();
    for r in [1, 2] {
        cases.push((DomainParams::new(r, 1, 1.0).expect("params"), fit_coeffs_p1(r).expect("fit")));
    }
    let synthetic = [
        vec![1.0, 1.0, 1.0, 1.0, 1.0],
        vec![0.5, 2.0, 0.1, 3.0, 1.0],
        vec![0.0, 0.0, 0.0, 0.0, 1.0],
        vec![4.0, 0.0, 2.0, 0.0, 0.25],
    ];
    for r in [1, 2] {
        for b in &synthetic {
            cases.push((special(2, r), BergmanCoeffs::new(r, 2, b.clone()).expect("coefficients")));
        }
    }
    let mut worst = 0.0f64;
    let mut bounds_ok = true;
    for (params, coeffs) in &cases {
        let target = (params.n() + 1) as f64;
        let y = 1.0 / (1.0 - x);
        for lambda in [0.0, 0.3, x.sqrt(), (x * y).sqrt()] {
            let t = equivalence_ratios(params, coeffs, x, lambda).expect("ratios");
            for v in [t.phi, t.psi, t.upsilon] {
                worst = worst.max((v / target - 1.0).abs());
            }
        }
        let bounds = equivalence_bounds_scan(params, coeffs, 64).expect("scan");
        bounds_ok &= bounds.b > 0.0 && bounds.b <= bounds.a;
    }
    outcome(
        worst <= 1e-3 && bounds_ok,
        format!("{} coefficient sets: max relative deviation from N+1 {worst:.2e}; 0 < b ≤ a {bounds_ok}", cases.len()),
    )
}

fn boundary_blowup() -> Outcome {
    let cfg = ProbeConfig::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (p, r) in CONFIGS {
        let params = special(p, r);
        let mut sampler = Sampler::new(params, SEED + 8);
        let (mut w_min, mut z_min) = (f64::INFINITY, f64::INFINITY);
        let (m, n) = (params.m(), params.n());
        for _ in 0..20 {
            let start = sampler.point();
            let wdir = random_unit(sampler.rng(), r);
            let mut dir = DVector::zeros(n);
            dir.rows_mut(m, r).copy_from(&wdir);
            let trace = boundary_blowup_probe(&params, &start, &dir, 400, &cfg);
            let ok = trace.as_ref().is_ok_and(|t| t.diverged(&cfg));
            w_min = w_min.min(trace.map_or(f64::NEG_INFINITY, |t| if ok { t.growth() } else { f64::NEG_INFINITY }));

            // Z-ward rays start on the w = 0 slice with σ_max(Z) ≤ 1/2
            let z_start = Point::new(sampler.symmetric(0.5), DVector::zeros(r));
            let zdir = random_unit(sampler.rng(), m);
            let mut dir = DVector::zeros(n);
            dir.rows_mut(0, m).copy_from(&zdir);
            let trace = boundary_blowup_probe(&params, &z_start, &dir, 400, &cfg);
            let ok = trace.as_ref().is_ok_and(|t| t.diverged(&cfg));
            z_min = z_min.min(trace.map_or(f64::NEG_INFINITY, |t| if ok { t.growth() } else { f64::NEG_INFINITY }));
        }
        pass &= w_min >= cfg.min_growth && z_min >= cfg.min_growth;
        parts.push(format!("(p={p},r={r}) min growth w-ward {w_min:.2} Z-ward {z_min:.2}"));
    }
    outcome(pass, parts.join("; "))
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Outcome); 10] = [
        ("monge-ampere identity at special K", monge_ampere),
        ("negative control at K = 1", negative_control),
        ("finite-difference metric and block routes", oracle_equivalence),
        ("curvature range and sharp directions", curvature_range),
        ("finite-difference curvature", fd_curvature),
        ("automorphism invariance and Jacobians", automorphism_laws),
        ("trace inequality chain", trace_chain),
        ("ball case Bergman exactness", ball_exactness),
        ("equivalence ratio limits", ratio_limits),
        ("boundary blow-up of the potential", boundary_blowup),
    ];
    let mut failures = 0;
    for (i, (name, run)) in checks.iter().enumerate() {
        let started = Instant::now();
        let out = run();
        let status = if out.pass { "PASS" } else { "FAIL" };
        if !out.pass {
            failures += 1;
        }
        println!("{status} [{:>2}] {name} ({:.1}s): {}", i + 1, started.elapsed().as_secs_f64(), out.detail);
    }
    println!("acceptance: {} passed, {failures} failed", checks.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
