//! Acceptance suite. Runs without the libtest harness so that every criterion
//! prints exactly one PASS/FAIL line; exits nonzero if any criterion fails.

mod support;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use choquard_core::analysis::{
    classification_report, recenter, recenter_pair, rescale_exponents, scalar_level_identity,
    symmetry_checks, tau_rescale, SymmetryTolerances,
};
use choquard_core::functionals::{action_general, action_j, residual_system, scalar_action};
use choquard_core::params::two_star;
use choquard_core::potentials::{bessel_solve, riesz_bilinear, riesz_convolve};
use choquard_core::solvers::{picard_step, solve_scalar, solve_system, SolveConfig};
use choquard_core::{Error, Field, Grid, ProblemParams};
use rand::Rng;
use support::{band_limited, direct_riesz, random_field, relative_l2, rng, GaussianSum};

const TOL_RESIDUAL: f64 = 1e-8;

struct Outcome {
    ok: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            ok: true,
            lines: Vec::new(),
        }
    }

    /// Records `value ≤ bound`.
    fn le(&mut self, what: &str, value: f64, bound: f64) {
        let pass = value <= bound;
        self.ok &= pass;
        self.lines.push(format!(
            "{} {what}: {value:.3e} <= {bound:.1e}",
            if pass { "ok  " } else { "FAIL" }
        ));
    }

    fn holds(&mut self, what: &str, pass: bool) {
        self.ok &= pass;
        self.lines
            .push(format!("{} {what}", if pass { "ok  " } else { "FAIL" }));
    }
}

struct Benchmark {
    params: ProblemParams,
    grid: Grid,
    w: Field,
    u: Field,
    v: Field,
    scalar_residual: f64,
    system_residual: f64,
    scalar_converged: bool,
    system_converged: bool,
}

fn benchmark() -> Result<Benchmark, Error> {
    let params = ProblemParams::symmetric(2, 1.0, 2.0, 1.0)?;
    let grid = Grid::new(2, 20.0, 128)?;
    let config = SolveConfig {
        tol_residual: TOL_RESIDUAL,
        ..Default::default()
    };
    let (w, srep) = solve_scalar(&params, &grid, &config)?;
    let (u, v, rep) = solve_system(&params, &grid, &config, 0.3)?;
    Ok(Benchmark {
        params,
        grid,
        w,
        u,
        v,
        scalar_residual: *srep.residual_history.last().unwrap(),
        system_residual: *rep.residual_history.last().unwrap(),
        scalar_converged: srep.converged,
        system_converged: rep.converged,
    })
}

fn classification(b: &Benchmark) -> Outcome {
    let mut o = Outcome::new();
    o.holds("scalar solve converged", b.scalar_converged);
    o.holds("system solve converged", b.system_converged);
    o.le("scalar relative residual", b.scalar_residual, TOL_RESIDUAL);
    o.le("system relative residual", b.system_residual, TOL_RESIDUAL);
    let diff = b.u.sub(&b.v).unwrap().l2_norm().min(b.u.add(&b.v).unwrap().l2_norm());
    o.le("min(|u-v|, |u+v|) / |u|", diff / b.u.l2_norm(), 1e-3);
    let j = action_j(&b.u, &b.v, &b.params).unwrap();
    let a = scalar_action(&b.w, &b.params).unwrap();
    o.le("|J(u,v) - 2A(w)| / |J|", (j - 2.0 * a).abs() / j.abs(), 1e-3);
    o
}

fn level_chain(b: &Benchmark) -> Outcome {
    let mut o = Outcome::new();
    o.le(
        "|2A(kw) - ((p-1)/p) S^(p/(p-1))| relative",
        scalar_level_identity(&b.w, &b.params).unwrap(),
        1e-3,
    );
    let report = classification_report(&b.u, &b.v, &b.w, &b.params, 1e-3).unwrap();
    let dev = report.get("a_b_equal_s_power").unwrap().deviation.unwrap();
    o.le("max(|a - S^(p/(p-1))|, |b - S^(p/(p-1))|) relative", dev, 1e-3);
    o
}

fn symmetry(b: &Benchmark) -> Outcome {
    let mut o = Outcome::new();
    let (ru, rv, dist) = recenter_pair(&b.u, &b.v).unwrap();
    o.le("distance between maxima of u and v (cells)", dist, 1.0);
    let rw = recenter(&b.w).unwrap();
    let tol = SymmetryTolerances {
        radial: 1e-3,
        monotonicity: 1e-6,
        reflection: 1e-8,
    };
    for (label, f) in [("u", &ru), ("v", &rv), ("w", &rw)] {
        for c in symmetry_checks(label, f, &tol).unwrap().checks {
            o.le(&c.name, c.deviation.unwrap(), c.tolerance);
        }
    }
    o
}

fn fixed_point(b: &Benchmark) -> Outcome {
    let mut o = Outcome::new();
    let (up, vp) = picard_step(&b.u, &b.v, &b.params).unwrap();
    o.le(
        "|u+ - u| / |u|",
        up.sub(&b.u).unwrap().l2_norm() / b.u.l2_norm(),
        10.0 * TOL_RESIDUAL,
    );
    o.le(
        "|v+ - v| / |v|",
        vp.sub(&b.v).unwrap().l2_norm() / b.v.l2_norm(),
        10.0 * TOL_RESIDUAL,
    );
    o
}

fn operators() -> Outcome {
    let mut o = Outcome::new();
    let mut r = rng(2024);
    for (dim, alpha) in [(1, 0.5), (2, 1.0), (3, 2.0), (3, 1.3)] {
        let grid = Grid::new(dim, 6.0, 32).unwrap();
        let f = GaussianSum::random(&mut r, dim, 3, 1.0).sample(&grid, 1.0);
        let spectral = riesz_convolve(&f, alpha).unwrap();
        let direct = direct_riesz(&f, alpha);
        o.le(
            &format!("riesz vs direct quadrature, N={dim}, alpha={alpha}"),
            relative_l2(spectral.values(), &direct),
            0.03,
        );
    }

    let grid = Grid::new(3, 8.0, 32).unwrap();
    let bump = Field::from_fn(&grid, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 0.36).exp())
        .unwrap();
    let bump = bump.scale(1.0 / bump.integrate());
    let phi = riesz_convolve(&bump, 2.0).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..grid.len() {
        let x = grid.point(i);
        let rad = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if (2.0..=7.5).contains(&rad) {
            let exact = 1.0 / (4.0 * PI * rad);
            worst = worst.max((phi.values()[i] - exact).abs() / exact);
        }
    }
    o.le("Newtonian potential vs 1/(4 pi |x|), 2 <= |x| <= 7.5", worst, 0.02);

    for dim in 1..=3 {
        let grid = Grid::new(dim, 5.0, 32).unwrap();
        let f = band_limited(&grid, &mut r, 6);
        let u = bessel_solve(&f, 1.7).unwrap();
        let back = u.helmholtz(1.7);
        o.le(
            &format!("bessel round trip, N={dim}"),
            relative_l2(back.values(), f.values()),
            1e-10,
        );
    }
    o
}

fn inequalities() -> Outcome {
    let mut o = Outcome::new();
    let mut r = rng(7);
    let grid = Grid::new(2, 4.0, 16).unwrap();
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let alpha = r.gen_range(0.1..1.9);
        let f = random_field(&grid, &mut r);
        let g = random_field(&grid, &mut r);
        let bfg = riesz_bilinear(&f, &g, alpha).unwrap();
        let bff = riesz_bilinear(&f, &f, alpha).unwrap();
        let bgg = riesz_bilinear(&g, &g, alpha).unwrap();
        let excess = bfg.abs() - (bff * bgg).sqrt();
        let rel = excess / (bff * bgg).sqrt();
        worst = worst.max(rel);
        if rel > 1e-12 {
            violations += 1;
        }
    }
    o.holds(
        &format!("Cauchy-Schwarz on 1000 random pairs: {violations} violations (worst relative excess {worst:.2e})"),
        violations == 0,
    );
    let mut worst_sat: f64 = 0.0;
    for lambda in [-3.0, -0.5, 0.25, 2.0] {
        let f = random_field(&grid, &mut r);
        let g = f.scale(lambda);
        let bfg = riesz_bilinear(&f, &g, 1.0).unwrap();
        let bff = riesz_bilinear(&f, &f, 1.0).unwrap();
        let bgg = riesz_bilinear(&g, &g, 1.0).unwrap();
        worst_sat = worst_sat.max((bfg.abs() / (bff * bgg).sqrt() - 1.0).abs());
    }
    o.le("Cauchy-Schwarz saturation at v = lambda u", worst_sat, 1e-10);

    let grid = Grid::new(2, 16.0, 128).unwrap();
    let alpha = 1.0;
    let pr = ProblemParams::symmetric(2, alpha, 2.0, 1.0).unwrap();
    let th = pr.find_thetas().unwrap();
    let mut drift: f64 = 0.0;
    for _ in 0..3 {
        let fs = GaussianSum::random(&mut r, 2, 3, 2.0);
        let gs = GaussianSum::random(&mut r, 2, 3, 2.0);
        let quotient = |scale: f64| {
            let f = fs.sample(&grid, scale);
            let g = gs.sample(&grid, scale);
            riesz_bilinear(&f, &g, alpha).unwrap().abs()
                / (f.lp_norm(th.theta1) * g.lp_norm(th.theta2))
        };
        let base = quotient(1.0);
        for scale in [0.5, 2.0] {
            drift = drift.max((quotient(scale) / base - 1.0).abs());
        }
    }
    o.le("HLS quotient drift under dilation by 1/2 and 2", drift, 0.02);
    o
}

/// Direct transcription of the hypothesis inequalities.
fn oracle_h(n: usize, alpha: f64, p: f64, q: f64) -> (bool, bool) {
    let nf = n as f64;
    let ts = if n <= 2 { f64::INFINITY } else { 2.0 * nf / (nf - 2.0) };
    let tas = if n <= 2 {
        f64::INFINITY
    } else {
        2.0 * (nf + alpha) / (nf - 2.0)
    };
    let lower = 1f64.max(2.0 * alpha / nf);
    let h1 = lower < p
        && lower < q
        && p < ts
        && q < ts
        && 2.0 * (nf + alpha) / nf < p + q
        && p + q < tas;
    let h2 = 2.0 <= p && 2.0 <= q && p < ts && q < ts && p + q < tas;
    (h1, h2)
}

fn parameter_gate() -> Outcome {
    let mut o = Outcome::new();
    let mut r = rng(99);
    let (mut h1_mismatch, mut h2_mismatch, mut theta_fail, mut h2_not_h1) = (0, 0, 0, 0);
    let mut worst_sum: f64 = 0.0;
    for _ in 0..1000 {
        let n = r.gen_range(1..=3usize);
        let alpha = r.gen_range(0.01..0.99) * n as f64;
        let p = r.gen_range(1.01..8.0);
        let q = r.gen_range(1.01..8.0);
        let pr = ProblemParams::new(n, alpha, p, q, 1.0, 1.0).unwrap();
        let (h1, h2) = oracle_h(n, alpha, p, q);
        if pr.check_h1().admissible != h1 {
            h1_mismatch += 1;
        }
        if pr.check_h2().admissible != h2 {
            h2_mismatch += 1;
        }
        if h2 && !pr.check_h1().admissible {
            h2_not_h1 += 1;
        }
        match pr.find_thetas() {
            Ok(th) => {
                let sum = 1.0 / th.theta1 + 1.0 / th.theta2;
                let target = (n as f64 + alpha) / n as f64;
                worst_sum = worst_sum.max((sum - target).abs() / target);
                let nf = n as f64;
                let ts = two_star(n);
                let inside = th.theta1 > 1.0
                    && th.theta1 < nf / alpha
                    && th.theta2 > 1.0
                    && th.theta2 < nf / alpha
                    && 2.0 < th.theta1 * p
                    && 2.0 < th.theta2 * q
                    && ts.exceeds(th.theta1 * p)
                    && ts.exceeds(th.theta2 * q);
                if !inside || !th.violations(&pr).is_empty() {
                    theta_fail += 1;
                }
            }
            Err(_) => {
                if h1 {
                    theta_fail += 1;
                }
            }
        }
    }
    o.holds(&format!("check_h1 agrees with oracle ({h1_mismatch} mismatches)"), h1_mismatch == 0);
    o.holds(&format!("check_h2 agrees with oracle ({h2_mismatch} mismatches)"), h2_mismatch == 0);
    o.holds(&format!("(H2) implies (H1) ({h2_not_h1} counterexamples)"), h2_not_h1 == 0);
    o.holds(
        &format!("theta pairs exist under (H1) and satisfy all constraints ({theta_fail} failures)"),
        theta_fail == 0,
    );
    o.le("theta pair sum identity, relative", worst_sum, 1e-12);
    o
}

fn rescaling(b: &Benchmark) -> Outcome {
    let mut o = Outcome::new();
    let tau_new = 4.0;
    let (u4, v4, p4) = tau_rescale(&b.u, &b.v, tau_new, &b.params).unwrap();
    let (r1, r2) = residual_system(&u4, &v4, &p4).unwrap();
    let scale = (u4.helmholtz(p4.tau()).l2_norm().powi(2) + v4.helmholtz(p4.eta()).l2_norm().powi(2))
        .sqrt();
    let rel = (r1.l2_norm().powi(2) + r2.l2_norm().powi(2)).sqrt() / scale;
    o.le("rescaled system residual", rel, 10.0 * b.system_residual);
    let expected = tau_new.powf((b.params.alpha() + 2.0) / (4.0 * (b.params.p() - 1.0)));
    o.le(
        "amplitude ratio vs tau^((alpha+2)/(4(p-1)))",
        (u4.max() / b.u.max() - expected).abs() / expected,
        1e-10,
    );
    o.le(
        "exponent law for v",
        (v4.max() / b.v.max() - expected).abs() / expected,
        1e-10,
    );
    let (ea, _) = rescale_exponents(&b.params);
    o.le("exponent (alpha+2)/(4(p-1))", (ea - 0.75).abs(), 1e-15);
    o
}

fn gradient() -> Outcome {
    let mut o = Outcome::new();
    let pr = ProblemParams::new(2, 1.0, 2.5, 3.0, 1.0, 1.6).unwrap();
    let grid = Grid::new(2, 6.0, 32).unwrap();
    let mut r = rng(31);
    let u = GaussianSum::random(&mut r, 2, 3, 1.5).sample(&grid, 1.0).map(|x| x + 0.3);
    let v = GaussianSum::random(&mut r, 2, 3, 1.5).sample(&grid, 1.0).map(|x| 0.8 * x + 0.3);
    let phi = band_limited(&grid, &mut r, 3);
    let xi = band_limited(&grid, &mut r, 3);
    let scale = 0.25 / phi.max_abs().max(xi.max_abs());
    let (phi, xi) = (phi.scale(scale), xi.scale(scale));

    let (r1, r2) = residual_system(&u, &v, &pr).unwrap();
    let pairing = r1.dot(&phi).unwrap() + r2.dot(&xi).unwrap();
    let error = |eps: f64| {
        let plus = action_general(
            &u.axpby(1.0, &phi, eps).unwrap(),
            &v.axpby(1.0, &xi, eps).unwrap(),
            &pr,
        )
        .unwrap();
        let minus = action_general(
            &u.axpby(1.0, &phi, -eps).unwrap(),
            &v.axpby(1.0, &xi, -eps).unwrap(),
            &pr,
        )
        .unwrap();
        ((plus - minus) / (2.0 * eps) - pairing).abs()
    };
    let eps: Vec<f64> = (0..4).map(|k| 0.4 / 2f64.powi(k)).collect();
    let errs: Vec<f64> = eps.iter().map(|&e| error(e)).collect();
    for (k, w) in errs.windows(2).enumerate() {
        let order = (w[0] / w[1]).log2();
        o.le(
            &format!("|order - 2| at eps {:.3} -> {:.3} (order {order:.4})", eps[k], eps[k + 1]),
            (order - 2.0).abs(),
            0.1,
        );
    }
    o
}

fn main() -> ExitCode {
    let start = Instant::now();
    let bench = benchmark();
    let bench_time = start.elapsed();
    let mut all_ok = true;
    let mut report = |id: u32, title: &str, outcome: Result<Outcome, String>| {
        let (ok, lines) = match outcome {
            Ok(o) => (o.ok, o.lines),
            Err(e) => (false, vec![format!("FAIL error: {e}")]),
        };
        all_ok &= ok;
        println!("criterion {id} [{title}]: {}", if ok { "PASS" } else { "FAIL" });
        for l in lines {
            println!("    {l}");
        }
    };
    let with_bench = |f: fn(&Benchmark) -> Outcome| match &bench {
        Ok(b) => Ok(f(b)),
        Err(e) => Err(e.to_string()),
    };
    report(1, "classification u = v", with_bench(classification));
    report(2, "level chain", with_bench(level_chain));
    report(3, "radial symmetry", with_bench(symmetry));
    report(4, "integral fixed point", with_bench(fixed_point));
    report(5, "nonlocal operators", Ok(operators()));
    report(6, "inequality suite", Ok(inequalities()));
    report(7, "parameter gate", Ok(parameter_gate()));
    report(8, "tau rescaling", with_bench(rescaling));
    report(9, "gradient consistency", Ok(gradient()));
    if let Ok(b) = &bench {
        println!(
            "benchmark solves (N={}, n={}): {:.2?}; total {:.2?}",
            b.grid.dim(),
            b.grid.points(),
            bench_time,
            start.elapsed()
        );
    }
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
