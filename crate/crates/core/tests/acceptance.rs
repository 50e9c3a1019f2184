//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::f64::consts::SQRT_2;
use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use hmbo::harness::{self, convergence_study, ErrorReport, ExperimentConfig};
use hmbo::verify::{
    eikonal_over_run, loglog_slope, moment_identity, one_step_mcf_error, rel_err, solver_vs_poisson,
    standing_mode_order,
};
use hmbo::{cfl_max_dt, hmcf_circle_radius, FlowMode, Grid2D, HmboConfig, Point, Reinit, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

fn paper_config() -> ExperimentConfig {
    ExperimentConfig { mode: FlowMode::Mcf, r0: 1.0, n_tau: 150, gamma: 1.0, ..Default::default() }
}

fn within_frac(x: f64, target: f64, frac: f64) -> bool {
    (x - target).abs() <= frac * target
}

fn table(report: &ErrorReport) -> String {
    report.rows.iter().map(|r| format!("N={} Nsτ={:.6} Err={:.6}", r.n, r.ns_tau, r.err)).collect::<Vec<_>>().join("; ")
}

fn criterion_1(report: &ErrorReport) -> Outcome {
    let row = |n| report.row(n).ok_or(format!("no row for N = {n}"));
    let (r32, r64, r128, r256) = (row(32)?, row(64)?, row(128)?, row(256)?);
    let decreasing = r32.err > r64.err && r64.err > r128.err;
    let e64 = within_frac(r64.err, 0.022746, 0.5);
    let e128 = within_frac(r128.err, 0.008509, 0.5);
    let t128 = (r128.ns_tau - 0.473333).abs() <= 0.05;
    let t256 = (r256.ns_tau - 0.486667).abs() <= 0.03;
    Ok((
        decreasing && e64 && e128 && t128 && t256,
        format!(
            "decreasing 32>64>128: {decreasing}; Err64 {:.6} vs 0.022746±50%: {e64}; Err128 {:.6} vs 0.008509±50%: {e128}; \
             Nsτ128 {:.6} vs 0.473333±0.05: {t128}; Nsτ256 {:.6} vs 0.486667±0.03: {t256}",
            r64.err, r128.err, r128.ns_tau, r256.ns_tau
        ),
    ))
}

fn criterion_2(report: &ErrorReport) -> Outcome {
    let times: Vec<f64> = report.rows.iter().map(|r| r.ns_tau).collect();
    if report.rows.iter().map(|r| r.n).collect::<Vec<_>>() != [16, 32, 64, 128, 256] {
        return Err("study does not cover N = 16..256".into());
    }
    let increasing = times.windows(2).all(|w| w[1] > w[0]);
    let below = times.iter().all(|&t| t < 0.5);
    Ok((increasing && below, format!("Nsτ = {times:.6?}; increasing {increasing}; all < 0.5 {below}")))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let mut worst = 0.0f64;
    let mut count = 0;
    for _ in 0..20 {
        let rad = 0.1 * rng.gen::<f64>().sqrt();
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let x = Point::new(rad * phi.cos(), rad * phi.sin());
        let t = rng.gen_range(0.01..=0.1);
        let kappa = if rng.gen_bool(0.5) { -2.0 } else { 1.0 };
        let c = if rng.gen_bool(0.5) { 1.0 } else { SQRT_2 };
        for which in 0..4 {
            let (q, exact) = moment_identity(which, kappa, c, t, x);
            // Relative error, with values below 1e-11 compared absolutely.
            worst = worst.max(rel_err(q, exact, 1e-11));
            count += 1;
        }
    }
    Ok((worst < 1e-6, format!("{count} evaluations (20 points x 4 identities), max rel err {worst:.2e} (tol 1e-6)")))
}

fn criterion_4() -> Outcome {
    let (c, tau) = (SQRT_2, 0.1);
    let mut worst = 0.0f64;
    for x in [Point::new(0.0, 0.0), Point::new(0.3, -0.2), Point::new(-0.7, 0.45)] {
        let (num, exact) = solver_vs_poisson(256, c, tau, 0.5, x, -1.0).map_err(|e| e.to_string())?;
        worst = worst.max(rel_err(num, exact, 1e-12));
    }
    let (flipped, exact) =
        solver_vs_poisson(256, c, tau, 0.5, Point::new(0.3, -0.2), 1.0).map_err(|e| e.to_string())?;
    let control = rel_err(flipped, exact, 1e-12);
    Ok((
        worst < 1e-2 && control > 1e-2,
        format!(
            "N=256, CFL 0.5, c=√2, τ=0.1: max rel diff {worst:.2e} (tol 1e-2); \
             with u_t(0)=+v0 instead the diff is {control:.2e}"
        ),
    ))
}

fn criterion_5() -> Outcome {
    let sm = standing_mode_order(65, 1.0, 0.5, 0.5).map_err(|e| e.to_string())?;
    Ok((
        sm.ratio >= 3.5 && sm.energy_drift < 1e-3,
        format!(
            "L∞ error {:.3e} -> {:.3e} (ratio {:.3}, need ≥ 3.5); energy drift {:.2e} (need < 1e-3)",
            sm.coarse, sm.fine, sm.ratio, sm.energy_drift
        ),
    ))
}

fn criterion_6() -> Outcome {
    let g = Grid2D::square(128, -2.0, 2.0).map_err(|e| e.to_string())?;
    let tau: f64 = 1.0 / 300.0;
    let dt = tau / (tau / (0.5 * cfl_max_dt(6.0 / tau, &g).map_err(|e| e.to_string())?)).ceil();
    let cfg = HmboConfig::mcf(g.clone(), 1.0, tau, dt, 20).map_err(|e| e.to_string())?;
    let d0 = ScalarField::from_fn(&g, |p| p.norm() - 1.0);
    let e = eikonal_over_run(&cfg, &d0, 20).map_err(|e| e.to_string())?;
    Ok((
        e.steps == 20 && e.max_residual < 0.05,
        format!(
            "N=128, {} redistanced fields, {} nodes checked, max | |∇d|-1 | = {:.4} (tol 0.05); \
             {} nodes straddling the distance ridge excluded",
            e.steps, e.checked, e.max_residual, e.ridge_nodes
        ),
    ))
}

fn criterion_7() -> Outcome {
    let cfg = ExperimentConfig {
        mode: FlowMode::Hmcf,
        alpha: Some(1.0),
        beta: Some(1.0),
        gamma: 1.0,
        r0: 1.0,
        n_tau: 150,
        grid_sizes: vec![128],
        ..Default::default()
    };
    let tau = cfg.tau();
    let track = |cfg: &ExperimentConfig| -> Result<(f64, usize, usize), String> {
        let run = harness::run_single(cfg, 128).map_err(|e| e.to_string())?;
        let t_end = run.numeric.times.last().copied().unwrap_or(0.0);
        let ode = hmcf_circle_radius(&cfg.physical(), 1.0, 0.0, t_end.max(tau), tau / 20.0)
            .map_err(|e| e.to_string())?;
        let mut worst = 0.0f64;
        let (mut agree, mut total) = (0, 0);
        let alive = run.numeric.radii.len() - usize::from(run.went_extinct());
        for i in 0..alive {
            let t = run.numeric.times[i];
            if t <= 0.3 + 1e-12 {
                worst = worst.max((run.numeric.radii[i] - ode.sample(t)).abs());
            }
            if i > 0 {
                let mid = t - 0.5 * tau;
                let rate = (ode.sample(mid + 0.05 * tau) - ode.sample(mid - 0.05 * tau)).signum();
                let step = (run.numeric.radii[i] - run.numeric.radii[i - 1]).signum();
                total += 1;
                agree += usize::from(rate == step);
            }
        }
        Ok((worst, agree, total))
    };
    let (worst, agree, total) = track(&cfg)?;
    let frac = agree as f64 / total.max(1) as f64;
    let exact_cfg = ExperimentConfig { reinit: Some(Reinit::Exact), ..cfg.clone() };
    let (worst_exact, _, _) = track(&exact_cfg)?;
    Ok((
        worst < 0.05 && frac >= 0.9 && total > 0,
        format!(
            "N=128, τ={tau:.6}: max |r~ - r_ode| on t ≤ 0.3 = {worst:.4} (tol 0.05); sign of Δr~ matches ṙ_ode \
             in {agree}/{total} steps ({:.1}%, need ≥ 90%); [with exact-polygon reinit: {worst_exact:.4}]",
            100.0 * frac
        ),
    ))
}

fn criterion_8() -> Outcome {
    let radii = [0.5, 0.75, 1.0, 1.25, 1.5];
    let taus = [1.0 / 75.0, 1.0 / 150.0, 1.0 / 300.0];
    let mut errs = Vec::new();
    for &tau in &taus {
        errs.push(one_step_mcf_error(256, 1.0, tau, &radii).map_err(|e| e.to_string())?);
    }
    let slope = loglog_slope(&taus, &errs);
    Ok((slope >= 0.8, format!("mean |Δr/τ - γ/r| = {errs:.5?} at τ = 1/75, 1/150, 1/300; slope {slope:.3} (need ≥ 0.8)")))
}

fn criterion_9(first: &ErrorReport, cfg: &ExperimentConfig) -> Outcome {
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    harness::write_report(dirs[0].path(), cfg, first).map_err(|e| e.to_string())?;
    // Second run on a different thread count.
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().map_err(|e| e.to_string())?;
    let second = pool.install(|| convergence_study(cfg)).map_err(|e| e.to_string())?;
    harness::write_report(dirs[1].path(), cfg, &second).map_err(|e| e.to_string())?;
    let mut same = true;
    let mut files = 0;
    for entry in fs::read_dir(dirs[0].path()).map_err(|e| e.to_string())? {
        let name = entry.map_err(|e| e.to_string())?.file_name();
        let a = fs::read(dirs[0].path().join(&name)).map_err(|e| e.to_string())?;
        let b = fs::read(dirs[1].path().join(&name)).map_err(|e| e.to_string())?;
        same &= a == b;
        files += 1;
    }
    let table = fs::read(dirs[0].path().join("error_table.csv")).map_err(|e| e.to_string())?;
    Ok((same && files >= 3, format!("{files} output files byte-identical across two runs: {same} (error_table.csv {} bytes)", table.len())))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let cfg = paper_config();
    let study = convergence_study(&cfg);
    let study_secs = start.elapsed().as_secs_f64();
    let report = match &study {
        Ok(r) => {
            println!("table: {} ({study_secs:.1}s)", table(r));
            for w in &r.warnings {
                println!("note: {w}");
            }
            Some(r)
        }
        Err(e) => {
            println!("convergence study failed: {e}");
            None
        }
    };
    let missing = || Err::<(bool, String), String>("convergence study did not run".into());

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("Table 1 trend reproduction", Box::new(|| report.map_or_else(missing, criterion_1))),
        ("extinction-time convergence", Box::new(|| report.map_or_else(missing, criterion_2))),
        ("Poisson moment identities", Box::new(criterion_3)),
        ("solver vs Poisson cross-check", Box::new(criterion_4)),
        ("standing-mode wave accuracy", Box::new(criterion_5)),
        ("eikonal property suite", Box::new(criterion_6)),
        ("HMCF damped mode vs RK4 oracle", Box::new(criterion_7)),
        ("MCF one-step order", Box::new(criterion_8)),
        ("determinism", Box::new(|| report.map_or_else(missing, |r| criterion_9(r, &cfg)))),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (ok, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!ok);
        println!(
            "{} criterion {}: {name} ({:.1}s): {detail}",
            if ok { "PASS" } else { "FAIL" },
            k + 1,
            t0.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed in {:.1}s", criteria.len() - failed, criteria.len(), start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
