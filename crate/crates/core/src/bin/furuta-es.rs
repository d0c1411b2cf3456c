use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use furuta_es::baseline::random_search;
use furuta_es::config::AppConfig;
use furuta_es::controller::{design_lqr, GainVector};
use furuta_es::dynamics::{inertia_constants, State};
use furuta_es::entropy_search::{run_entropy_search, TerminatedBy};
use furuta_es::output::{fmt_f64, fmt_opt, CsvSink};
use furuta_es::simulator::{EvalPool, Simulator};
use furuta_es::sweep::{paper_gains, paper_q2_values, run_sweep, uniform_values, SweepAxis, SweepSpec};
use furuta_es::{Error, Result};

#[derive(Parser)]
#[command(name = "furuta-es", version, about = "Furuta pendulum swing-up tuned by Entropy Search")]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the subcommand's random number generator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// CSV output path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one gain vector and report its cost.
    Simulate {
        /// kp,kE,kv,kx
        #[arg(long, value_parser = parse4, allow_hyphen_values = true)]
        gains: Option<[f64; 4]>,
        /// q1,q2,dq1,dq2 in rad and rad/s.
        #[arg(long, value_parser = parse4, allow_hyphen_values = true)]
        ic: Option<[f64; 4]>,
    },
    /// Print the upright LQR design.
    Lqr,
    /// Uniform random search over the gain box.
    RandomSearch {
        #[arg(long)]
        n: Option<usize>,
        /// Draw kE uniformly in log scale.
        #[arg(long)]
        log_uniform_ke: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Entropy Search over the gain box.
    EsOptimize {
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Cost of fixed gain vectors over a range of initial conditions.
    Sweep {
        #[arg(long, value_enum, default_value_t = Axis::Q2)]
        axis: Axis,
        /// Explicit comma-separated values in rad.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Option<Vec<f64>>,
        /// Evenly spaced values over [-pi, pi].
        #[arg(long)]
        points: Option<usize>,
        /// Baseline state whose swept coordinate is overwritten.
        #[arg(long, value_parser = parse4, allow_hyphen_values = true)]
        base: Option<[f64; 4]>,
        /// Extra gain vectors as label=kp,kE,kv,kx; defaults to K_nom and K_ES.
        #[arg(long = "gains")]
        gains: Vec<String>,
        #[arg(long, default_value_t = 1)]
        repetitions: usize,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    #[value(name = "q1_0")]
    Q1,
    #[value(name = "q2_0")]
    Q2,
}

fn parse4(s: &str) -> std::result::Result<[f64; 4], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected 4 comma-separated numbers, got {}", v.len()))
}

fn parse_labeled(s: &str) -> Result<(String, GainVector)> {
    let (label, rest) =
        s.split_once('=').ok_or_else(|| Error::Config(format!("gains {s:?}: expected label=kp,kE,kv,kx")))?;
    let k = parse4(rest).map_err(Error::Config)?;
    Ok((label.to_string(), GainVector::from_array(k)?))
}

fn header(name: &str, cfg: &AppConfig, extra: serde_json::Value) -> String {
    format!("furuta-es {name} config={} args={}", cfg.to_json_line(), extra)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Domain(_) => 2,
        _ => 3,
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::default(),
    };
    let out = cli.out.as_deref();
    // Summaries go to stdout unless the CSV already does.
    let summary = |v: serde_json::Value| {
        if out.is_some() {
            println!("{v}");
        } else {
            eprintln!("{v}");
        }
    };

    match cli.command {
        Command::Simulate { gains, ic } => {
            let gains = match gains {
                Some(k) => GainVector::from_array(k)?,
                None => GainVector::nominal(),
            };
            if let Some(x) = ic {
                cfg.sim.initial_state = State::from(x);
            }
            cfg.validate()?;
            let sim = Simulator::new(&cfg.physical, &cfg.lqr, cfg.sim)?;
            let traj = sim.simulate(&gains)?;
            let cost = sim.score(&gains, &traj);
            let cols = ["t", "q1", "q2", "dq1", "dq2", "u", "mode", "E"];
            let mut w = CsvSink::create(out, &header("simulate", &cfg, json!({ "gains": gains })), &cols)?;
            for i in 0..traj.len() {
                let s = traj.states[i];
                w.row([
                    fmt_f64(traj.times[i]),
                    fmt_f64(s.q1),
                    fmt_f64(s.q2),
                    fmt_f64(s.dq1),
                    fmt_f64(s.dq2),
                    fmt_f64(traj.inputs[i]),
                    traj.modes[i].as_str().to_string(),
                    fmt_f64(traj.energies[i]),
                ])?;
            }
            w.finish()?;
            summary(json!({
                "J": cost.j,
                "swingup_success": cost.swingup_success,
                "settle_time": cost.settle_time,
                "diverged": cost.diverged,
                "guard_events": cost.guard_events,
            }));
        }
        Command::Lqr => {
            cfg.validate()?;
            let c = inertia_constants(&cfg.physical)?;
            let d = design_lqr(&c, &cfg.lqr)?;
            let eig = furuta_es::care::closed_loop_eigenvalues(&d.a, &d.b, &d.solution.gain);
            let rows = |m: &nalgebra::DMatrix<f64>| -> Vec<Vec<f64>> {
                m.row_iter().map(|r| r.iter().copied().collect()).collect()
            };
            let mut w = CsvSink::create(out, &header("lqr", &cfg, json!({})), &["quantity", "i", "j", "re", "im"])?;
            for (name, m) in [("A", &d.a), ("B", &d.b), ("P", &d.solution.p), ("K", &d.solution.gain)] {
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        w.row([name.to_string(), i.to_string(), j.to_string(), fmt_f64(m[(i, j)]), fmt_f64(0.0)])?;
                    }
                }
            }
            for (i, e) in eig.iter().enumerate() {
                w.row(["eig".to_string(), i.to_string(), "0".to_string(), fmt_f64(e.re), fmt_f64(e.im)])?;
            }
            w.finish()?;
            summary(json!({
                "A": rows(&d.a),
                "B": rows(&d.b),
                "P": rows(&d.solution.p),
                "gain": d.gain.iter().collect::<Vec<_>>(),
                "eigenvalues": eig.iter().map(|e| [e.re, e.im]).collect::<Vec<_>>(),
                "residual_norm": d.solution.residual_norm,
            }));
        }
        Command::RandomSearch { n, log_uniform_ke, threads } => {
            if let Some(n) = n {
                cfg.search.n = n;
            }
            if let Some(s) = cli.seed {
                cfg.search.seed = s;
            }
            if let Some(t) = threads {
                cfg.search.threads = t;
            }
            cfg.search.log_uniform_ke |= log_uniform_ke;
            cfg.validate()?;
            let sim = Simulator::new(&cfg.physical, &cfg.lqr, cfg.sim)?;
            let pool = EvalPool::new(cfg.search.threads)?;
            let s = cfg.search;
            let report = random_search(s.n, &cfg.domain, &sim, &pool, s.log_uniform_ke, s.seed)?;
            let cols = ["rank", "kp", "kE", "kv", "kx", "J", "swingup_success", "settle_time"];
            let mut w = CsvSink::create(out, &header("random-search", &cfg, json!({})), &cols)?;
            for (r, c) in report.ranked.iter().enumerate() {
                let k = c.gains;
                w.row([
                    (r + 1).to_string(),
                    fmt_f64(k.kp),
                    fmt_f64(k.ke),
                    fmt_f64(k.kv),
                    fmt_f64(k.kx),
                    fmt_f64(c.j),
                    c.swingup_success.to_string(),
                    fmt_opt(c.settle_time),
                ])?;
            }
            w.finish()?;
            let best = report.best();
            summary(json!({
                "best": best.gains,
                "J": best.j,
                "evaluations": report.evaluations,
                "seed": report.seed,
            }));
        }
        Command::EsOptimize { max_iter } => {
            if let Some(m) = max_iter {
                cfg.es.max_iter = m;
            }
            if let Some(s) = cli.seed {
                cfg.es.seed = s;
            }
            cfg.validate()?;
            let sim = Simulator::new(&cfg.physical, &cfg.lqr, cfg.sim)?;
            let mut eval = |k: &[f64; 4]| sim.evaluate(&GainVector::from_array(*k)?).map(|c| c.j);
            let res = run_entropy_search(&mut eval, &cfg.domain, &cfg.gp, &cfg.es)?;
            let cols = [
                "iter",
                "kp",
                "kE",
                "kv",
                "kx",
                "J",
                "mu_bg",
                "sigma2_bg",
                "kp_bg",
                "kE_bg",
                "kv_bg",
                "kx_bg",
                "delta_H",
            ];
            let mut w = CsvSink::create(out, &header("es-optimize", &cfg, json!({})), &cols)?;
            for it in &res.log {
                let mut row = vec![it.iter.to_string()];
                row.extend(it.k_next.iter().map(|v| fmt_f64(*v)));
                row.extend([fmt_f64(it.j), fmt_f64(it.mu_bg), fmt_f64(it.sigma2_bg)]);
                row.extend(it.k_bg.iter().map(|v| fmt_f64(*v)));
                row.push(fmt_f64(it.delta_h));
                w.row(row)?;
            }
            w.finish()?;
            let k = GainVector::from_array(res.best_guess)?;
            summary(json!({
                "K_bg": k,
                "J(K_bg)": res.best_value,
                "terminated_by": match res.terminated_by {
                    TerminatedBy::Converged => "Converged",
                    TerminatedBy::MaxIter => "MaxIter",
                },
                "iterations": res.log.len(),
                "initial": res.initial.iter().map(|(x, y)| json!({"K": x, "J": y})).collect::<Vec<_>>(),
            }));
        }
        Command::Sweep { axis, values, points, base, gains, repetitions, threads } => {
            if let Some(t) = threads {
                cfg.search.threads = t;
            }
            cfg.validate()?;
            let axis = match axis {
                Axis::Q1 => SweepAxis::Q1,
                Axis::Q2 => SweepAxis::Q2,
            };
            let values = match (values, points) {
                (Some(v), _) => v,
                (None, Some(n)) => uniform_values(n),
                (None, None) => paper_q2_values(),
            };
            let base = match (base, axis) {
                (Some(b), _) => State::from(b),
                (None, SweepAxis::Q1) => State::new(0.0, 5.0 * std::f64::consts::PI / 6.0, 0.0, 0.0),
                (None, SweepAxis::Q2) => State::origin(),
            };
            let gains = if gains.is_empty() {
                paper_gains()
            } else {
                gains.iter().map(|g| parse_labeled(g)).collect::<Result<Vec<_>>>()?
            };
            let spec = SweepSpec { axis, values, gains, base, repetitions };
            let sim = Simulator::new(&cfg.physical, &cfg.lqr, cfg.sim)?;
            let pool = EvalPool::new(cfg.search.threads)?;
            let rows = run_sweep(&spec, &sim, &pool)?;
            let extra = json!({
                "axis": axis.as_str(),
                "base": base.to_array(),
                "gains": spec.gains,
                "repetitions": repetitions,
            });
            let cols = ["axis", "value", "label", "kp", "kE", "kv", "kx", "J", "swingup_success", "diverged"];
            let mut w = CsvSink::create(out, &header("sweep", &cfg, extra), &cols)?;
            for r in &rows {
                w.row([
                    r.axis.as_str().to_string(),
                    fmt_f64(r.value),
                    r.label.clone(),
                    fmt_f64(r.gains.kp),
                    fmt_f64(r.gains.ke),
                    fmt_f64(r.gains.kv),
                    fmt_f64(r.gains.kx),
                    fmt_f64(r.j),
                    r.swingup_success.to_string(),
                    r.diverged.to_string(),
                ])?;
            }
            w.finish()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
