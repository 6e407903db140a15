use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use jkoflow::energy::{check_kappa_convexity, ConvexityGrid};
use jkoflow::entropycheck::SpaceTimeData;
use jkoflow_harness::accept::{Acceptance, CRITERIA};
use jkoflow_harness::convergence::convergence_study;
use jkoflow_harness::pipeline::{cli_run, entropy_sweep, frame_times, Problem, Verdict};
use jkoflow_harness::{plotdata, ExperimentConfig};

#[derive(Parser)]
#[command(name = "jkoflow", version, about = "Minimizing-movement solver, reference solver and verification harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the entropy test bank; overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured pipeline and write report.txt.
    Run(Common),
    /// Error table under (tau, n) refinement.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        tau: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
    },
    /// Run one acceptance criterion (1-10) or `all`.
    Accept {
        criterion: String,
        #[command(flatten)]
        common: Common,
    },
    /// Entropy sweep of the configured FV solution.
    EntropySweep(Common),
    /// Transform round trip and convexity certificate for the configured problem.
    TransformCheck(Common),
}

fn load(common: &Common) -> anyhow::Result<ExperimentConfig> {
    let path = common.config.as_ref().context("--config is required for this subcommand")?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn report(verdicts: &[Verdict]) -> bool {
    for v in verdicts {
        println!("{}", v.line());
    }
    verdicts.iter().all(|v| v.passed)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let common = match &cli.command {
        Command::Run(c) | Command::EntropySweep(c) | Command::TransformCheck(c) => c,
        Command::Convergence { common, .. } | Command::Accept { common, .. } => common,
    };
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global()?;
    }
    match &cli.command {
        Command::Run(common) => {
            let cfg = load(common)?;
            let outcome = cli_run(&cfg, &cfg.output_dir)?;
            let ok = report(&outcome.verdicts);
            println!("report written to {}", outcome.out_dir.join("report.txt").display());
            Ok(ok)
        }
        Command::Convergence { common, tau, n } => {
            let cfg = load(common)?;
            let table = convergence_study(&cfg, tau, n)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            std::fs::write(cfg.output_dir.join("convergence.csv"), table.to_csv())?;
            plotdata::emit_convergence(&table, &cfg.output_dir)?;
            println!("reference: {} at t = {}", table.reference, table.time);
            print!("{}", table.to_csv());
            if let Some(p) = table.order_l1 {
                println!("fitted L1 order {p:.3}");
            }
            if let Some(p) = table.order_w2 {
                println!("fitted W2 order {p:.3}");
            }
            let ok = table.rows.len() < 2 || table.monotone();
            println!("{} errors decrease under refinement", if ok { "PASS" } else { "FAIL" });
            Ok(ok)
        }
        Command::Accept { criterion, common } => {
            let ids: Vec<u8> = if criterion == "all" {
                CRITERIA.to_vec()
            } else {
                match criterion.parse::<u8>() {
                    Ok(id) if CRITERIA.contains(&id) => vec![id],
                    _ => bail!("unknown criterion `{criterion}`; expected 1-10 or `all`"),
                }
            };
            let acc = Acceptance::new(common.seed.unwrap_or(1));
            let mut ok = true;
            for id in ids {
                let r = acc.run(id);
                println!("{}", r.line());
                ok &= r.passed;
            }
            Ok(ok)
        }
        Command::EntropySweep(common) => {
            let cfg = load(common)?;
            let problem = Problem::from_config(&cfg)?;
            let datum = cfg.initial.datum(problem.m);
            let t0 = cfg.initial.t0();
            let grid = problem.y_grid(cfg.fv.dy)?;
            let times = frame_times(t0, cfg.jko.t_end, cfg.checks.frame_dt, &[]);
            let fv = problem.run_fv(&datum, grid, cfg.fv.nu, cfg.fv.cfl_safety, t0, &times)?;
            let mut ts = vec![t0];
            ts.extend_from_slice(&fv.times);
            let mut frames = vec![datum.density(grid)?];
            frames.extend(fv.states);
            let data = SpaceTimeData::new(ts, &frames)?;
            let rep = entropy_sweep(
                &data,
                &problem.b,
                problem.m,
                cfg.checks.k_levels,
                cfg.checks.test_functions,
                cfg.seed,
                problem.y_window,
            )?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            rep.write_csv(cfg.output_dir.join("entropy_fv.csv"))?;
            let ok = rep.passes(cfg.checks.entropy_tol);
            println!(
                "{} entropy sweep: min residual {:.3e}, scale {:.3e}, {} entries (seed {})",
                if ok { "PASS" } else { "FAIL" },
                rep.min_residual,
                rep.scale,
                rep.entries.len(),
                cfg.seed
            );
            Ok(ok)
        }
        Command::TransformCheck(common) => {
            let cfg = load(common)?;
            let problem = Problem::from_config(&cfg)?;
            let tc = &problem.tc;
            let m = problem.m;
            let back = jkoflow::transform::b_from_a(&tc.a, m)?;
            let b_err = back
                .nodes()
                .map(|x| (back.eval(x) - problem.b.eval(tc.t(x))).abs())
                .fold(0.0, f64::max);
            let t_alt = jkoflow::transform::t_from_a(&tc.a, m)?;
            let t_err = tc.t_map.nodes().map(|x| (t_alt.eval(x) - tc.t(x)).abs()).fold(0.0, f64::max);
            let u = cfg.initial.datum(m).density(problem.y_grid(cfg.fv.dy)?)?;
            let rho = tc.rescale(&u, problem.x_grid(cfg.fv.dy)?)?;
            let mass_err = (rho.mass() - 1.0).abs();
            let (x0, x1) = tc.x_window();
            let cert = check_kappa_convexity(&problem.ef, &ConvexityGrid::new((x0, x1), (0.05, 20.0)))?;
            cert.write(cfg.output_dir.join("convexity"))?;
            let verdicts = [
                Verdict::new("b -> a -> b", b_err <= 1e-4, format!("sup error {b_err:.2e}")),
                Verdict::new("T routes", t_err <= 1e-6, format!("sup difference {t_err:.2e}")),
                Verdict::new("rescale mass", mass_err <= 1e-8, format!("|mass - 1| = {mass_err:.2e}")),
            ];
            let ok = report(&verdicts);
            println!("convexity: {}", cert.verdict);
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
