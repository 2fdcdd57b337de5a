//! Acceptance run over the robot-teaming scenario and random small games.
//! Prints one PASS/FAIL line per criterion and exits nonzero if any fails.
//! Determinism is checked through the CLI entry point, run in-process.

mod oracles;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{ensure, Context, Result};
use rand::Rng;
use stackmeta_core::diagnostics::check_task;
use stackmeta_core::io::{write_model, RngStreams, RunConfig, Scenario};
use stackmeta_core::linalg::{asymmetry, min_eigenvalue, Mat, Vector};
use stackmeta_core::lqg::{
    expected_cost, follower_best_response, model_solution, solve_riccati, true_response_matrix, FollowerType,
    GameSpec, ResponseParam, Task,
};
use stackmeta_core::matdiff::{d_expected_cost, DEFAULT_FD_STEP};
use stackmeta_core::meta::{train_meta, MetaTraining, TrainConfig};
use stackmeta_core::sim::{
    monte_carlo_cost, rollout, run_adaptation_experiment, run_individual_experiment, run_unilateral_experiment,
    ExperimentReport, Noise,
};

use oracles::*;

const RANDOM_SEED: u64 = 2024;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

fn print(id: usize, name: &str, outcome: &Result<Outcome>, elapsed: Duration) -> bool {
    let (passed, detail) = match outcome {
        Ok(o) => (o.passed, o.detail.clone()),
        Err(e) => (false, format!("error: {e:#}")),
    };
    println!(
        "criterion {id:>2} {}: {name} ({:.1} s) | {detail}",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    passed
}

fn random_games(count: usize, label: u64) -> Vec<(GameSpec, FollowerType)> {
    let mut rng = RngStreams::new(RANDOM_SEED).stream(&[label]);
    (0..count).map(|_| random_instance(&mut rng)).collect()
}

/// `M_true` plus a uniform perturbation in `[-0.1, 0.1]`.
fn perturbed_true(spec: &GameSpec, f: &FollowerType, rng: &mut impl Rng) -> Result<ResponseParam> {
    let m = true_response_matrix(spec, f)?;
    Ok(ResponseParam::new(m.matrix().map(|v| v + rng.random_range(-0.1..=0.1)))?)
}

fn best_response_oracle() -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = RngStreams::new(RANDOM_SEED).stream(&[10]);
    let mut worst = 0.0f64;
    for (spec, f) in random_games(200, 1) {
        let x = Vector::from_fn(spec.state_dim(), |_, _| rng.random_range(-3.0..=3.0));
        let ul = Vector::from_fn(spec.leader_dim(), |_, _| rng.random_range(-3.0..=3.0));
        let closed = follower_best_response(&spec, &f, &x, &ul)?;
        let drift = &spec.a * &x + &spec.b_leader * &ul;
        let numeric = minimize_follower_cost(&f, &drift);
        worst = worst.max((&closed - &numeric).amax());
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(Outcome::new(
        worst <= 1e-6 && secs < 10.0,
        format!("max |u_closed - u_numeric| = {worst:.2e} over 200 games (tol 1e-6), {secs:.2} s (limit 10 s)"),
    ))
}

fn gradient_suite(robot: &Scenario) -> Result<Outcome> {
    let start = Instant::now();
    let cfg = TrainConfig { seed: RANDOM_SEED, ..TrainConfig::default() };
    let mut rng = RngStreams::new(RANDOM_SEED).stream(&[20]);
    let mut checks = Vec::new();
    let mut worst_oracle = 0.0f64;
    let mut games = random_games(50, 2);
    let robot_games: Vec<(GameSpec, FollowerType)> =
        robot.followers.iter().map(|f| (robot.spec.clone(), f.clone())).collect();
    games.extend(robot_games);
    for (i, (spec, f)) in games.iter().enumerate() {
        let m = perturbed_true(spec, f, &mut rng)?;
        let task = Task::new(spec, f);
        checks.extend(check_task(task, &m, &cfg, DEFAULT_FD_STEP, i as u64)?);

        // Three routes to ∂J/∂M: chain rule, adjoint, central differences.
        let analytic = d_expected_cost(spec, f, &m)?;
        let adjoint = adjoint_cost_gradient(spec, f, m.matrix());
        let fd = central_difference(|x| reference_solution(spec, f, x).cost, m.matrix(), DEFAULT_FD_STEP);
        worst_oracle = worst_oracle.max(relative(&analytic, &adjoint)).max(relative(&adjoint, &fd));
    }
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}={:.1e}", c.name, c.relative_error))
        .collect();
    let worst = checks.iter().map(|c| c.relative_error).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    let mut detail = format!(
        "{} checks on 50 random games + 5 robot types, worst relative error {worst:.2e}; \
         adjoint/FD oracle worst {worst_oracle:.2e} (tol 1e-4), {secs:.1} s (limit 120 s)",
        checks.len()
    );
    if !failed.is_empty() {
        write!(detail, "; failed: {}", failed.join(", "))?;
    }
    Ok(Outcome::new(failed.is_empty() && worst_oracle <= 1e-4 && secs < 120.0, detail))
}

fn riccati_sanity() -> Result<Outcome> {
    let mut rng = RngStreams::new(RANDOM_SEED).stream(&[30]);
    let (mut worst_asym, mut worst_eig, mut worst_ref) = (0.0f64, 0.0f64, 0.0f64);
    let mut res_t_zero = true;
    for (spec, f) in random_games(200, 3) {
        let m = perturbed_true(&spec, &f, &mut rng)?;
        let sol = model_solution(&spec, &f, &m)?;
        let reference = reference_solution(&spec, &f, m.matrix());
        for (p, q) in sol.p.iter().zip(&reference.p) {
            let scale = p.amax().max(1.0);
            worst_asym = worst_asym.max(asymmetry(p) / scale);
            worst_eig = worst_eig.min(min_eigenvalue(p) / scale);
            worst_ref = worst_ref.max(relative(p, q));
        }
        res_t_zero &= sol.res[spec.horizon] == 0.0;
    }
    let s = |v: f64| Mat::from_element(1, 1, v);
    let sol = solve_riccati(&s(1.0), &s(1.0), &s(1.0), &s(1.0), &s(1.0), 1, &s(0.5))?;
    let spec = GameSpec::new(s(1.0), s(1.0), s(0.5), s(1.0), s(1.0), s(1.0), 1, Vector::from_element(1, 2.0))?;
    let inert = FollowerType::new(0, s(0.0), s(1.0), s(1.0))?;
    let cost = expected_cost(&spec, &inert, &ResponseParam::new(s(0.3))?)?;
    let scalar_err = (sol.p[0][(0, 0)] - 1.5).abs().max((sol.k[0][(0, 0)] - 0.5).abs()).max((cost - 6.5).abs());
    let passed = worst_asym <= 1e-12 && worst_eig >= -1e-9 && worst_ref <= 1e-9 && res_t_zero && scalar_err <= 1e-12;
    Ok(Outcome::new(
        passed,
        format!(
            "200 games: max asymmetry {worst_asym:.1e}, min eigenvalue/scale {worst_eig:.1e}, \
             vs Joseph-form reference {worst_ref:.1e}, res_T = 0 exactly: {res_t_zero}; \
             scalar case (P_0, K_0, cost) error {scalar_err:.1e}"
        ),
    ))
}

fn analytic_vs_simulated(robot: &Scenario) -> Result<Outcome> {
    let mut worst_noise_free = 0.0f64;
    let mut games = random_games(50, 4);
    games.extend(robot.followers.iter().map(|f| (robot.spec.clone(), f.clone())));
    for (spec, f) in &games {
        let quiet = spec.with_sigma(Mat::zeros(spec.state_dim(), spec.state_dim()))?;
        let m = true_response_matrix(&quiet, f)?;
        let traj = rollout(Task::new(&quiet, f), &m, Noise::Off, 0)?;
        let expected = expected_cost(&quiet, f, &m)?;
        worst_noise_free = worst_noise_free.max((traj.realized_cost - expected).abs());
    }
    let mut detail = format!("noise-free |rollout - expected| max {worst_noise_free:.1e} (tol 1e-8); noisy z-scores");
    let mut noisy_ok = true;
    for f in &robot.followers {
        let task = Task::new(&robot.spec, f);
        let m = true_response_matrix(&robot.spec, f)?;
        let expected = expected_cost(&robot.spec, f, &m)?;
        let mut zs = Vec::new();
        for runs in [10, 100, 1000] {
            let sim = monte_carlo_cost(task, &m, runs, 40 + f.id as u64)?;
            zs.push((sim.mean_cost - expected) / sim.standard_error());
        }
        noisy_ok &= zs[2].abs() <= 3.0;
        write!(detail, " type {}: {:+.2}/{:+.2}/{:+.2}", f.id, zs[0], zs[1], zs[2])?;
    }
    detail.push_str(" (10/100/1000 runs, need |z| <= 3 at 1000)");
    Ok(Outcome::new(worst_noise_free <= 1e-8 && noisy_ok, detail))
}

fn meta_descent(robot: &Scenario, shared: &mut Option<MetaTraining>) -> Result<Outcome> {
    let start = Instant::now();
    let tasks: Vec<Task> = robot.setup().tasks();
    let mut descended = 0;
    let mut lines = Vec::new();
    for seed in 0..20u64 {
        let cfg = TrainConfig { seed, ..robot.train.clone() };
        let trained = train_meta(&tasks, &robot.dist, &cfg)?;
        let first = trained.trace.initial_meta_cost().context("empty trace")?;
        let last = trained.trace.final_meta_cost().context("empty trace")?;
        if last < first {
            descended += 1;
        }
        lines.push(format!("{first:.1}->{last:.1}"));
        if seed == robot.train.seed {
            *shared = Some(trained);
        }
    }
    ensure!(shared.is_some(), "configured seed {} not among the 20 runs", robot.train.seed);
    let secs = start.elapsed().as_secs_f64();
    Ok(Outcome::new(
        descended >= 18 && secs < 600.0,
        format!(
            "{descended}/20 initializations end below their initial meta-cost (need 18), {secs:.0} s (limit 600 s); {}",
            lines.join(" ")
        ),
    ))
}

fn adaptation_benefit(robot: &Scenario, report: &ExperimentReport) -> Result<Outcome> {
    let threshold = robot.settings.sim_gap_threshold;
    let mut passed = true;
    let mut parts = Vec::new();
    for r in &report.rows {
        let (meta, exp, sim) = (
            r.expected_meta.context("meta")?,
            r.expected_adapted.context("adapted")?,
            r.simulated_adapted.context("simulated")?,
        );
        let gap = (sim - exp) / exp;
        let ok = exp <= meta * 1.01 && gap > 0.0 && gap < threshold;
        passed &= ok;
        parts.push(format!(
            "type {}: meta {meta:.2} adapted {exp:.2} sim {sim:.2} gap {:+.1}%{}",
            r.type_id,
            100.0 * gap,
            if ok { "" } else { " x" }
        ));
    }
    Ok(Outcome::new(passed, format!("{} (gap must be in (0, {threshold}))", parts.join("; "))))
}

fn unilateral_degradation(adapted: &ExperimentReport, unilateral: &ExperimentReport) -> Result<Outcome> {
    let mut worse = 0;
    let mut parts = Vec::new();
    for (a, u) in adapted.rows.iter().zip(&unilateral.rows) {
        let (sa, su) = (a.simulated_adapted.context("adapted")?, u.simulated_unilateral.context("unilateral")?);
        if su > sa {
            worse += 1;
        }
        parts.push(format!("type {}: unilateral {su:.2} vs adapted {sa:.2}", a.type_id));
    }
    let identical = unilateral.models.windows(2).all(|w| w[0] == w[1]);
    Ok(Outcome::new(
        worse >= 4 && identical,
        format!("{worse}/5 types where unilateral sim > adapted sim (need 4), models identical: {identical}; {}", parts.join("; ")),
    ))
}

fn transferability(robot: &Scenario, adapted: &ExperimentReport, individual: &ExperimentReport) -> Result<Outcome> {
    let source = robot.settings.transfer_source;
    let (mut better, mut compared, mut within) = (0, 0, true);
    let mut parts = Vec::new();
    for (a, i) in adapted.rows.iter().zip(&individual.rows) {
        let sa = a.simulated_adapted.context("adapted")?;
        let st = i.simulated_transfer.context("transfer")?;
        let ea = a.expected_adapted.context("adapted")?;
        let ei = i.expected_individual.context("individual")?;
        if a.type_id != source {
            compared += 1;
            if sa <= st {
                better += 1;
            }
        }
        let advantage = (ea - ei) / ea;
        within &= advantage <= 0.10;
        parts.push(format!(
            "type {}: sim adapted {sa:.2} transfer {st:.2}, individual advantage {:+.1}%",
            a.type_id,
            100.0 * advantage
        ));
    }
    Ok(Outcome::new(
        better >= 3 && within,
        format!(
            "meta-adapted <= transferred on {better}/{compared} non-source types (need 3); \
             individual advantage <= 10% on every type: {within}; {}",
            parts.join("; ")
        ),
    ))
}

fn guidance(robot: &Scenario, adapted: &ExperimentReport) -> Result<Outcome> {
    let task = Task::new(&robot.spec, &robot.followers[0]);
    let traj = rollout(task, &adapted.models[0], Noise::Off, 0)?;
    let positions = |x: &Vector| Vector::from_vec(vec![x[0], x[1], x[4], x[5]]).norm();
    let first = positions(&traj.states[0]);
    let last = positions(traj.states.last().context("empty trajectory")?);
    let ratio = last / first;
    Ok(Outcome::new(
        ratio < 0.1,
        format!("joint position norm {first:.3} -> {last:.3}, ratio {ratio:.3} (need < 0.1)"),
    ))
}

fn need(r: &stackmeta_core::Result<ExperimentReport>) -> Result<&ExperimentReport> {
    r.as_ref().map_err(|e| anyhow::anyhow!("{e}"))
}

fn run_cli(args: &[&str]) -> Result<()> {
    let code = stackmeta_cli::run(std::iter::once("stackmeta").chain(args.iter().copied()));
    ensure!(code == 0, "stackmeta {args:?} exited with {code}");
    Ok(())
}

fn snapshot(dir: &Path) -> Result<Vec<(PathBuf, Vec<u8>)>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        files.push((path.strip_prefix(dir)?.to_path_buf(), std::fs::read(&path)?));
    }
    files.sort();
    Ok(files)
}

fn determinism(meta: &ResponseParam) -> Result<Outcome> {
    let small = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/small_matrices.toml");
    let small = small.to_str().context("config path")?;
    let mut cases: Vec<(String, Vec<String>)> = [
        "train",
        "adapt",
        "baseline-unilateral",
        "baseline-individual",
        "transfer",
        "check-gradients",
    ]
    .iter()
    .map(|c| (format!("{c} (small)"), vec![c.to_string(), "--config".into(), small.into()]))
    .collect();
    cases.push((
        "simulate (small)".into(),
        vec!["simulate".into(), "--config".into(), small.into(), "--model".into(), "small_model.txt".into()],
    ));
    cases.push(("adapt (robot)".into(), vec!["adapt".into(), "--model".into(), "robot_model.txt".into()]));
    cases.push(("check-gradients (robot)".into(), vec!["check-gradients".into()]));

    let dir = tempfile::tempdir()?;
    let small_model = dir.path().join("small_model.txt");
    let robot_model = dir.path().join("robot_model.txt");
    write_model(&ResponseParam::new(Mat::from_element(1, 2, 0.1))?, &small_model)?;
    write_model(meta, &robot_model)?;
    let out = dir.path().join("out");
    let paths = [
        ("small_model.txt", small_model.to_str().context("path")?),
        ("robot_model.txt", robot_model.to_str().context("path")?),
    ];

    let mut identical = 0;
    let mut mismatched = Vec::new();
    for (name, args) in &cases {
        let mut full: Vec<&str> = args
            .iter()
            .map(|a| paths.iter().find(|(k, _)| k == a).map_or(a.as_str(), |(_, v)| *v))
            .collect();
        full.extend(["--out", out.to_str().context("path")?]);
        let mut runs = Vec::new();
        for _ in 0..2 {
            if out.exists() {
                std::fs::remove_dir_all(&out)?;
            }
            run_cli(&full)?;
            runs.push(snapshot(&out)?);
        }
        if runs[0] == runs[1] && !runs[0].is_empty() {
            identical += 1;
        } else {
            mismatched.push(name.clone());
        }
    }
    Ok(Outcome::new(
        mismatched.is_empty(),
        format!(
            "{identical}/{} subcommand runs byte-identical on repeat{}",
            cases.len(),
            if mismatched.is_empty() { String::new() } else { format!("; differing: {}", mismatched.join(", ")) }
        ),
    ))
}

fn main() {
    let robot = RunConfig::default().scenario().expect("default scenario is valid");
    let mut passed = 0;
    let mut run = |id: usize, name: &str, f: &mut dyn FnMut() -> Result<Outcome>| {
        let start = Instant::now();
        let outcome = f();
        if print(id, name, &outcome, start.elapsed()) {
            passed += 1;
        }
    };

    run(1, "best response closed form vs numerical minimization", &mut best_response_oracle);
    run(2, "analytic derivatives vs finite differences", &mut || gradient_suite(&robot));
    run(3, "Riccati symmetry, PSD, residues, scalar case", &mut riccati_sanity);
    run(4, "analytic vs simulated cost at the true response", &mut || analytic_vs_simulated(&robot));

    let mut shared = None;
    run(5, "meta-training reduces the meta-cost", &mut || meta_descent(&robot, &mut shared));
    let Some(meta) = shared else {
        println!("meta-training failed; criteria 6-10 cannot run");
        std::process::exit(1);
    };

    let setup = robot.setup();
    let adapted = run_adaptation_experiment(&setup, &meta.model);
    let unilateral = run_unilateral_experiment(&setup);
    let individual = run_individual_experiment(&setup);

    run(6, "adaptation lowers expected cost; simulated gap bounded", &mut || {
        adaptation_benefit(&robot, need(&adapted)?)
    });
    run(7, "unilateral learning degrades simulated cost", &mut || {
        unilateral_degradation(need(&adapted)?, need(&unilateral)?)
    });
    run(8, "meta-adaptation transfers better than an individual model", &mut || {
        transferability(&robot, need(&adapted)?, need(&individual)?)
    });
    run(9, "adapted type-0 plan drives positions toward zero", &mut || guidance(&robot, need(&adapted)?));
    run(10, "repeated runs are byte-identical", &mut || determinism(&meta.model));

    println!("acceptance: {passed}/10 criteria passed");
    if passed < 10 {
        std::process::exit(1);
    }
}
