use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use nlsgraph::blowup::{
    blowup_csv, blowup_report, envelope_csv, gnuplot_script, mass_descent, midpoint, profile_csv, BlowupConfig,
    DescentSetup, RescaleConfig,
};
use nlsgraph::discretize::{Discretization, GraphFunction};
use nlsgraph::energy::{multiplier, EnergyParams, MorseConfig};
use nlsgraph::graph::MetricGraph;
use nlsgraph::solvers::threshold::{threshold_from_lambda2, threshold_lower_bound};
use nlsgraph::solvers::trace::state_file_name;
use nlsgraph::solvers::*;
use nlsgraph::spectral::{eigenpairs, lambda2_on, DEFAULT_TOL};
use serde_json::json;

use crate::output::Run;
use crate::{CliError, Command, Common};

pub const STATE_HEADER: &str =
    "origin,p,rho,mu,lambda,energy,mass,residual,max_kirchhoff,morse_unconstrained,morse_constrained,u_max,u_min";

/// Newton target after a gradient flow. Small multipliers put the roundoff
/// floor of the scaled residual near 1e-9.
const POLISH_TOL: f64 = 1e-9;

pub fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Eig { common, k } => eig(&common, k),
        Command::Threshold { common } => threshold(&common),
        Command::SolveConstant { common } => solve_constant(&common),
        Command::Minimize {
            common,
            kick,
            max_iters,
        } => minimize(&common, kick, max_iters),
        Command::MountainPass { common } => mountain(&common),
        Command::Continue {
            common,
            schedule,
            no_morse,
        } => cont(&common, &schedule, no_morse),
        Command::Blowup {
            trace,
            out,
            window,
            cutoff,
            c1,
            c2,
        } => blowup(&trace, &out, window, cutoff, c1, c2),
        Command::Verify { common, state, lambda } => verify(&common, &state, lambda),
    }
}

fn read_graph(path: &Path) -> Result<(MetricGraph, String), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let g = MetricGraph::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((g, text))
}

fn spacing(c: &Common, g: &MetricGraph) -> Result<f64, CliError> {
    let h = c.h.unwrap_or(g.min_edge_length() / 64.0);
    if !(h.is_finite() && h > 0.0) {
        return Err(CliError::Config(format!("--h must be positive, got {h}")));
    }
    Ok(h)
}

/// Graph, mesh and a manifest seeded with the common inputs.
fn setup(name: &'static str, c: &Common) -> Result<(MetricGraph, Discretization, Run), CliError> {
    let (g, text) = read_graph(&c.graph)?;
    let h = spacing(c, &g)?;
    let d = Discretization::uniform(&g, h)?;
    let mut run = Run::new(name, c.out.clone())?;
    run.input("graph_file", c.graph.display().to_string());
    run.input("graph", text);
    run.input("p", c.p);
    run.input("rho", c.rho);
    run.input("h", h);
    run.input("seed", c.seed);
    run.input("dofs", d.num_dofs());
    if let Some(mu) = c.mu {
        run.input("mu", mu);
    }
    if let Some(tol) = c.tol {
        run.input("tol", tol);
    }
    Ok((g, d, run))
}

fn morse_cfg(c: &Common) -> MorseConfig {
    MorseConfig {
        seed: c.seed,
        ..MorseConfig::default()
    }
}

fn mu1(d: &Discretization, c: &Common) -> Result<f64, CliError> {
    let l2 = lambda2_on(&d.mesh, &d.ops, DEFAULT_TOL, c.seed)?;
    Ok(threshold_from_lambda2(d.graph().total_length(), l2.value, c.p))
}

fn params(c: &Common, mu: f64) -> Result<EnergyParams, CliError> {
    Ok(EnergyParams::new(c.p, c.rho, mu)?)
}

fn required_mu(c: &Common) -> Result<f64, CliError> {
    c.mu.ok_or_else(|| CliError::Config("--mu is required".into()))
}

/// Mass from `--mu`, or half the threshold.
fn mu_or_half_threshold(c: &Common, d: &Discretization, run: &mut Run) -> Result<f64, CliError> {
    match c.mu {
        Some(mu) => Ok(mu),
        None => {
            let m1 = mu1(d, c)?;
            run.result("mu1", m1);
            run.input("mu", 0.5 * m1);
            Ok(0.5 * m1)
        }
    }
}

pub fn state_row(s: &BoundState) -> String {
    let (mu_u, mu_c) = match &s.morse {
        Some(m) => (m.unconstrained.to_string(), m.constrained.to_string()),
        None => (String::new(), String::new()),
    };
    format!(
        "{:?},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{mu_u},{mu_c},{:e},{:e}",
        s.origin,
        s.params.p,
        s.params.rho,
        s.params.mu,
        s.lambda,
        s.energy,
        s.mass,
        s.residuals.combined,
        s.residuals.max_kirchhoff,
        s.u.max(),
        s.u.min()
    )
}

/// Prints and writes a state with its verification report. Fails when a
/// check fails.
fn emit_state(run: &mut Run, d: &Discretization, s: &BoundState) -> Result<(), CliError> {
    let report = verify_solution(d, s);
    println!("lambda = {:.10e}", s.lambda);
    println!("energy = {:.10e}", s.energy);
    println!("u_max = {:.10e}", s.u.max());
    println!("u_min = {:.10e}", s.u.min());
    if let Some(m) = &s.morse {
        println!("morse = {} (constrained {})", m.unconstrained, m.constrained);
    }
    print!("{report}");
    run.write("state.csv", &s.u.to_csv())?;
    run.write("summary.csv", &format!("{STATE_HEADER}\n{}\n", state_row(s)))?;
    run.write("verify.txt", &report.to_string())?;
    run.result("lambda", s.lambda);
    run.result("energy", s.energy);
    run.result("verified", report.all_pass());
    if !report.all_pass() {
        return Err(CliError::Solver(format!("verification failed: {:?}", report.failures())));
    }
    Ok(())
}

fn eig(c: &Common, k: usize) -> Result<(), CliError> {
    let (_, d, mut run) = setup("eig", c)?;
    if k < 2 {
        return Err(CliError::Config("--k must be at least 2".into()));
    }
    let tol = c.tol.unwrap_or(DEFAULT_TOL);
    let res = eigenpairs(&d.mesh, &d.ops, k, tol, c.seed)?;
    let mut csv = String::from("index,eigenvalue,residual\n");
    for (i, (v, r)) in res.eigenvalues.iter().zip(&res.residuals).enumerate() {
        println!("{i} {v:.12e}");
        let _ = writeln!(csv, "{i},{v:e},{r:e}");
    }
    run.write("eigenvalues.csv", &csv)?;
    for (i, f) in res.eigenfunctions.iter().enumerate() {
        run.write(&format!("eigenfunctions/phi_{i:03}.csv"), &f.to_csv())?;
    }
    run.result("eigenvalues", res.eigenvalues.clone());
    run.finish()
}

fn threshold(c: &Common) -> Result<(), CliError> {
    let (g, d, mut run) = setup("threshold", c)?;
    if !(c.p.is_finite() && c.p > 6.0) {
        return Err(CliError::Config(format!("--p must exceed 6, got {}", c.p)));
    }
    let l2 = lambda2_on(&d.mesh, &d.ops, c.tol.unwrap_or(DEFAULT_TOL), c.seed)?;
    let ell = g.total_length();
    let m1 = threshold_from_lambda2(ell, l2.value, c.p);
    let lower = threshold_lower_bound(ell, c.p);
    if m1 < lower * (1.0 - 1e-12) {
        log::warn!("mu1 = {m1} falls below its lower bound {lower}");
    }
    println!("lambda2 = {:.10}", l2.value);
    println!("multiplicity = {}", l2.multiplicity);
    println!("mu1 = {m1:.6}");
    println!("lower_bound = {lower:.6}");
    run.write(
        "threshold.csv",
        &format!(
            "p,total_length,lambda2,multiplicity,mu1,lower_bound\n{:e},{:e},{:e},{},{:e},{:e}\n",
            c.p, ell, l2.value, l2.multiplicity, m1, lower
        ),
    )?;
    run.write("phi2.csv", &l2.eigenfunction.to_csv())?;
    run.result("lambda2", l2.value);
    run.result("mu1", m1);
    run.result("lower_bound", lower);
    run.finish()
}

fn solve_constant(c: &Common) -> Result<(), CliError> {
    let (g, d, mut run) = setup("solve-constant", c)?;
    let pr = params(c, required_mu(c)?)?;
    let s = constant_state(&d, pr, Some(&morse_cfg(c)))?;
    println!("kappa = {:.10e}", pr.kappa(g.total_length()));
    let r = emit_state(&mut run, &d, &s);
    run.finish()?;
    r
}

fn minimize(c: &Common, kick: f64, max_iters: usize) -> Result<(), CliError> {
    let (g, d, mut run) = setup("minimize", c)?;
    run.input("kick", kick);
    run.input("max_iters", max_iters);
    let pr = params(c, required_mu(c)?)?;
    let l2 = lambda2_on(&d.mesh, &d.ops, DEFAULT_TOL, c.seed)?;
    let kappa = pr.kappa(g.total_length());
    let u0: Vec<f64> = l2.eigenfunction.values().iter().map(|x| kappa + kick * x).collect();
    let cfg = FlowConfig {
        tol: c.tol.unwrap_or(FlowConfig::default().tol),
        max_iters,
        ..FlowConfig::default()
    };
    let out = flow_iterate(&d, &u0, &pr, &cfg)?;
    run.result("iterations", out.iterations);
    run.result("residual", out.residual);
    if !out.converged {
        println!("energy = {:.10e}", out.energy);
        run.write("last_iterate.csv", &d.function(out.u)?.to_csv())?;
        run.finish()?;
        return Err(CliError::Solver(format!(
            "flow did not converge after {} steps (residual {:e}{})",
            out.iterations,
            out.residual,
            if out.stalled { ", line search stalled" } else { "" }
        )));
    }
    // the flow stops on its own residual; a few Newton steps bring the
    // strong residual down to the verification tolerance
    let lambda = multiplier(&d, &out.u, &pr);
    let morse = morse_cfg(c);
    let mut s = match newton_refine(&d, &out.u, lambda, &pr, POLISH_TOL, Some(&morse)) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("refinement skipped: {e}");
            BoundState::evaluate(&d, d.function(out.u)?, lambda, pr, Some(&morse), Origin::Minimizer)?
        }
    };
    s.origin = Origin::Minimizer;
    let r = emit_state(&mut run, &d, &s);
    run.finish()?;
    r
}

fn mountain_config(c: &Common) -> MountainPassConfig {
    let mut cfg = MountainPassConfig {
        morse: morse_cfg(c),
        ..MountainPassConfig::default()
    };
    if let Some(tol) = c.tol {
        cfg.newton_tol = tol;
    }
    cfg
}

fn mountain(c: &Common) -> Result<(), CliError> {
    let (_, d, mut run) = setup("mountain-pass", c)?;
    let mu = mu_or_half_threshold(c, &d, &mut run)?;
    let pr = params(c, mu)?;
    let mp = mountain_pass(&d, &pr, &mountain_config(c))?;
    println!("level = {:.10e}", mp.level);
    let mut hist = String::from("sweep,level\n");
    for (i, l) in mp.level_history.iter().enumerate() {
        let _ = writeln!(hist, "{i},{l:e}");
    }
    run.write("levels.csv", &hist)?;
    let mut path = String::from("node,energy\n");
    for (i, u) in mp.path.iter().enumerate() {
        let _ = writeln!(path, "{i},{:e}", nlsgraph::energy::energy(&d, u.values(), &pr));
    }
    run.write("path.csv", &path)?;
    run.result("level", mp.level);
    run.result("iterations", mp.iterations);
    let r = emit_state(&mut run, &d, &mp.candidate);
    run.finish()?;
    r
}

enum Plan {
    Rho(f64, f64, f64),
    Mu(usize),
    Descent(usize),
}

fn parse_schedule(s: &str) -> Result<Plan, CliError> {
    let bad = || CliError::Config(format!("bad schedule {s:?}; expected rho:FROM:TO:STEP, mu:N or descent:N"));
    let parts: Vec<&str> = s.split(':').collect();
    let num = |x: &str| x.parse::<f64>().map_err(|_| bad());
    let count = |x: &str| x.parse::<usize>().map_err(|_| bad());
    match parts.as_slice() {
        ["rho", a, b, st] => {
            let (a, b, st) = (num(a)?, num(b)?, num(st)?);
            if !(st > 0.0 && a < b) {
                return Err(bad());
            }
            Ok(Plan::Rho(a, b, st))
        }
        ["mu", n] => Ok(Plan::Mu(count(n)?)),
        ["descent", n] => Ok(Plan::Descent(count(n)?)),
        _ => Err(bad()),
    }
}

fn descent_setup(c: &Common) -> DescentSetup {
    let mut setup = DescentSetup::default();
    if let Some(h) = c.h {
        setup.h_max = h;
    }
    setup
}

fn cont(c: &Common, schedule: &str, no_morse: bool) -> Result<(), CliError> {
    if c.out.is_none() {
        return Err(CliError::Config("continue needs --out".into()));
    }
    let plan = parse_schedule(schedule)?;
    let (g, d, mut run) = setup("continue", c)?;
    run.input("schedule", schedule);
    // Morse indices on the graded descent meshes cost minutes and are not
    // used by the blow-up analysis
    let morse = !no_morse && !matches!(plan, Plan::Descent(_));
    run.input("morse", morse);
    let mu = match (&plan, c.mu) {
        (Plan::Descent(_), None) => {
            let m1 = mass_threshold(&g, c.p, descent_setup(c).h_max)?.mu1;
            run.result("mu1", m1);
            run.input("mu", 0.5 * m1);
            0.5 * m1
        }
        _ => mu_or_half_threshold(c, &d, &mut run)?,
    };
    let mut cfg = ContinuationConfig {
        morse: morse.then(|| morse_cfg(c)),
        ..ContinuationConfig::default()
    };
    if let Some(tol) = c.tol {
        cfg.newton.tol = tol;
    }
    let trace = match plan {
        Plan::Rho(from, to, step) => {
            let start = EnergyParams::new(c.p, from, mu)?;
            let mp = mountain_pass(&d, &start, &mountain_config(c))?;
            continuation(&d, mp.candidate, &Schedule::rho_grid(from, to, step), &cfg)?
        }
        Plan::Mu(n) => {
            let mp = mountain_pass(&d, &params(c, mu)?, &mountain_config(c))?;
            continuation(&d, mp.candidate, &Schedule::mu_halvings(mu, n), &cfg)?
        }
        Plan::Descent(n) => {
            let setup = descent_setup(c);
            run.input("descent_h_max", setup.h_max);
            run.input("descent_h_min_rel", setup.h_min_rel);
            run.input("descent_rate", setup.rate);
            run.input("descent_exponent", setup.exponent);
            mass_descent(&setup, &g, midpoint(&g), &params(c, mu)?, n, &cfg)?
        }
    };
    let dir = run.dir().expect("checked above").to_path_buf();
    write_trace_dir(&dir, &trace)?;
    run.wrote("graph.txt");
    run.wrote("trace.csv");
    for k in 0..trace.entries.len() {
        run.wrote(&format!("states/{}", state_file_name(k)));
    }
    let mut failed = Vec::new();
    for (k, e) in trace.entries.iter().enumerate() {
        println!(
            "{k} {:.6e} lambda = {:.10e} energy = {:.10e} {}",
            e.parameter,
            e.state.lambda,
            e.state.energy,
            if e.report.all_pass() { "PASS" } else { "FAIL" }
        );
        if !e.report.all_pass() {
            failed.push(k);
        }
    }
    run.result("steps", trace.entries.len());
    run.result("accepted_steps", trace.accepted_steps);
    run.result("rejected_steps", trace.rejected_steps);
    run.result("lambdas", trace.entries.iter().map(|e| e.state.lambda).collect::<Vec<_>>());
    run.finish()?;
    if !failed.is_empty() {
        return Err(CliError::Solver(format!("steps {failed:?} failed verification")));
    }
    Ok(())
}

fn blowup(trace: &Path, out: &Path, window: f64, cutoff: f64, c1: f64, c2: f64) -> Result<(), CliError> {
    let (g, records) = read_trace_dir(trace)?;
    let mut run = Run::new("blowup", Some(out.to_path_buf()))?;
    run.input("trace", trace.display().to_string());
    run.input("graph", g.to_text());
    run.input("window", window);
    run.input("cutoff", cutoff);
    run.input("c1", c1);
    run.input("c2", c2);
    let cfg = BlowupConfig {
        rescale: RescaleConfig {
            window,
            cutoff,
            ..RescaleConfig::default()
        },
        c1,
        c2,
    };
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for r in &records {
        let d = Discretization::new(Arc::clone(r.u.mesh()));
        let s = BoundState::evaluate(&d, r.u.clone(), r.lambda, r.params, None, Origin::Continuation)?;
        match blowup_report(&s, &cfg) {
            Ok(rep) => {
                run.write(&format!("profiles/step_{:03}.csv", r.step), &profile_csv(&rep))?;
                run.write(&format!("envelope/step_{:03}.csv", r.step), &envelope_csv(&s, &rep))?;
                let sup = rep.interior_sup_error().map_or("-".to_string(), |e| format!("{e:.3e}"));
                println!(
                    "{} lambda = {:.6e} peaks = {} sup_error = {sup} envelope = {} fitted_c2 = {:.4}",
                    r.step,
                    rep.lambda,
                    rep.profiles.len(),
                    if rep.envelope.pass { "PASS" } else { "FAIL" },
                    rep.fitted_c2
                );
                reports.push((r.step, rep));
            }
            Err(e) => {
                eprintln!("step {}: {e}", r.step);
                skipped.push(json!({"step": r.step, "reason": e.to_string()}));
            }
        }
    }
    run.write("blowup.csv", &blowup_csv(&g, &reports))?;
    let steps: Vec<usize> = reports.iter().map(|r| r.0).collect();
    run.write("blowup.gp", &gnuplot_script(&steps))?;
    run.result("steps", steps.clone());
    run.result("skipped", skipped);
    run.finish()?;
    if steps.is_empty() {
        return Err(CliError::Solver("no step of the trace could be analysed".into()));
    }
    Ok(())
}

fn verify(c: &Common, state: &Path, lambda: Option<f64>) -> Result<(), CliError> {
    let (g, text) = read_graph(&c.graph)?;
    let csv = fs::read_to_string(state).map_err(|e| CliError::Config(format!("{}: {e}", state.display())))?;
    let u = GraphFunction::from_csv(&g, &csv)?;
    let d = Discretization::new(Arc::clone(u.mesh()));
    let mut run = Run::new("verify", c.out.clone())?;
    run.input("graph", text);
    run.input("state", state.display().to_string());
    let mu = c.mu.unwrap_or_else(|| d.mass(u.values()));
    let pr = params(c, mu)?;
    let lambda = lambda.unwrap_or_else(|| multiplier(&d, u.values(), &pr));
    run.input("p", c.p);
    run.input("rho", c.rho);
    run.input("mu", mu);
    run.input("lambda", lambda);
    let s = BoundState::evaluate(&d, u, lambda, pr, None, Origin::Refined)?;
    let report = verify_solution(&d, &s);
    print!("{report}");
    run.write("verify.txt", &report.to_string())?;
    run.result("verified", report.all_pass());
    run.finish()?;
    if !report.all_pass() {
        return Err(CliError::Solver(format!("verification failed: {:?}", report.failures())));
    }
    Ok(())
}
