use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use aclab::config::RunConfig;
use aclab::diagnostics::coercivity_check;
use aclab::experiments::{refinement_study, run_sweep, SweepPlan};
use aclab::io::{gnuplot_script, write_csv, write_snapshot, RunManifest};
use aclab::potential::{solve_profile, Potential};
use aclab::solver::Simulation;
use aclab::Error;

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BANDS: u8 = 3;

#[derive(Parser)]
#[command(name = "aclab", version, about = "Allen-Cahn verification lab")]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweeps and field loops.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Deterministic mode; this tool has no random components, so it cannot be turned off.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true", default_value = "true")]
    seedless: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the equilibrium profile and check the normalization.
    Profile {
        #[arg(default_value = "standard")]
        potential: String,
        #[arg(long, default_value_t = aclab::potential::DEFAULT_S_MAX)]
        s_max: f64,
        #[arg(long, default_value_t = aclab::potential::DEFAULT_SAMPLES)]
        n: usize,
    },
    /// Run one simulation and write its diagnostics.
    Simulate,
    /// Run an ε-sweep and fit the convergence rates.
    Sweep,
    /// Refine (h, Δt) jointly and report residual convergence orders.
    CheckIdentities {
        #[arg(long, default_value_t = 3)]
        levels: u32,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let config = match &e {
            Error::InvalidConfig(_)
            | Error::UnknownPotential(_)
            | Error::InvalidPotential(_)
            | Error::Json(_) => true,
            Error::Member { source, .. } => matches!(**source, Error::InvalidConfig(_)),
            _ => false,
        };
        if config {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<bool, Failure>;

fn load(cli: &Cli) -> Result<(RunConfig, PathBuf), Failure> {
    let path = cli
        .config
        .clone()
        .ok_or_else(|| Failure::Config("--config is required for this command".into()))?;
    let text = fs::read_to_string(&path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok((RunConfig::from_json(&text)?, path))
}

fn profile(cli: &Cli, name: &str, s_max: f64, n: usize) -> Outcome {
    let p = Potential::by_name(name)?;
    let table = solve_profile(&p, s_max, n)?;
    fs::create_dir_all(&cli.out)?;
    let path = cli.out.join(format!("profile_{name}.csv"));
    let mut s = String::from("s,theta,theta_prime\n");
    for ((x, v), d) in table.abscissae().iter().zip(table.values()).zip(table.derivatives()) {
        s.push_str(&format!("{x:e},{v:e},{d:e}\n"));
    }
    fs::write(&path, s)?;
    println!("normalization ∫√(2W) = {:.9}", p.normalization());
    println!("profile ODE residual max|θ' - √(2W(θ))| = {:.3e}", table.ode_error());
    println!("wrote {}", path.display());
    Ok(true)
}

fn simulate(cli: &Cli) -> Outcome {
    let (raw, cfg_path) = load(cli)?;
    let cfg = raw.resolve()?;
    let started = Instant::now();
    let sim = Simulation::new(cfg.clone())?;
    let out = sim.run()?;
    let elapsed = started.elapsed().as_secs_f64();

    fs::create_dir_all(&cli.out)?;
    let mut manifest = RunManifest::new("simulate", Some(&cfg_path), &cli.out);
    manifest.resolved_config = serde_json::to_value(&cfg).map_err(Error::from)?;
    let csv = cli.out.join("diagnostics.csv");
    write_csv(&csv, &out.records)?;
    manifest.add("csv", &csv);
    for snap in &out.snapshots {
        let path = cli.out.join(format!("snapshot_{:08}.bin", snap.step));
        let side = write_snapshot(&path, &sim.grid, cfg.epsilon, snap.t, snap.step, &snap.values)?;
        manifest.add("snapshot", &path);
        manifest.add("snapshot-meta", &side);
    }
    let plot = cli.out.join("plot.gp");
    fs::write(&plot, gnuplot_script("diagnostics.csv", &format!("ε = {}", cfg.epsilon)))?;
    manifest.add("plot-script", &plot);
    manifest.timings_s.insert("run".into(), elapsed);
    manifest.write()?;

    let violations: Vec<String> = out
        .records
        .iter()
        .flat_map(|b| {
            coercivity_check(b, &cfg.cutoff)
                .violations()
                .map(|c| format!("t = {:.4}: {} = {:.3e} > {:.3e}", b.t, c.name, c.lhs, c.bound))
                .collect::<Vec<_>>()
        })
        .collect();
    let last = out.records.last().expect("a run records at least t = 0");
    println!(
        "{} steps, {} records; final E[u|I] = {:.4e}, err_L1 = {:.4e}; clamp events {}",
        out.steps,
        out.records.len(),
        last.rel_entropy,
        last.err_l1,
        out.clamp_events
    );
    for v in &violations {
        println!("coercivity violation at {v}");
    }
    println!("wrote {}", cli.out.display());
    Ok(violations.is_empty())
}

fn eps_label(eps: f64) -> String {
    format!("{eps}").replace('.', "p")
}

fn sweep(cli: &Cli) -> Outcome {
    let (raw, cfg_path) = load(cli)?;
    let plan = SweepPlan::from_config(&raw)?;
    let started = Instant::now();
    let (report, members) = run_sweep(&plan)?;
    let elapsed = started.elapsed().as_secs_f64();

    fs::create_dir_all(&cli.out)?;
    let mut manifest = RunManifest::new("sweep", Some(&cfg_path), &cli.out);
    manifest.resolved_config = serde_json::to_value(
        members.iter().map(|m| &m.config).collect::<Vec<_>>(),
    )
    .map_err(Error::from)?;
    for m in &members {
        let csv = cli.out.join(format!("eps_{}.csv", eps_label(m.summary.epsilon)));
        write_csv(&csv, &m.output.records)?;
        manifest.add("csv", &csv);
    }
    let summary = cli.out.join("report.json");
    fs::write(&summary, serde_json::to_string_pretty(&report).map_err(Error::from)?)?;
    manifest.add("summary", &summary);
    manifest.timings_s.insert("sweep".into(), elapsed);
    manifest.write()?;

    for (k, fit) in &report.slopes {
        println!("slope {k} = {:.3} (fit residual {:.2e})", fit.slope, fit.residual);
    }
    println!("gronwall constants {:?}", report.gronwall_constants);
    for (k, ok) in &report.pass_flags {
        println!("{} {k}", if *ok { "PASS" } else { "FAIL" });
    }
    Ok(report.pass())
}

fn check_identities(cli: &Cli, levels: u32) -> Outcome {
    let (raw, cfg_path) = load(cli)?;
    let mut cfg = raw.resolve()?;
    cfg.diagnostics.identity = true;
    let started = Instant::now();
    let report = refinement_study(&cfg, levels)?;
    let elapsed = started.elapsed().as_secs_f64();

    fs::create_dir_all(&cli.out)?;
    let mut manifest = RunManifest::new("check-identities", Some(&cfg_path), &cli.out);
    manifest.resolved_config = serde_json::to_value(&cfg).map_err(Error::from)?;
    let path = cli.out.join("refinement.json");
    fs::write(&path, serde_json::to_string_pretty(&report).map_err(Error::from)?)?;
    manifest.add("summary", &path);
    manifest.timings_s.insert("study".into(), elapsed);
    manifest.write()?;

    for l in &report.levels {
        println!(
            "h = {:.4e}, Δt = {:.4e}: identity residual {:.3e}, dissipation residual {:.3e}",
            l.h,
            l.dt,
            l.identity_residual.unwrap_or(f64::NAN),
            l.dissipation_residual
        );
    }
    println!("identity orders {:?}", report.identity_orders);
    println!("dissipation orders {:?}", report.dissipation_orders);
    let ok = report.identity_converged(1.0) && report.dissipation_converged(1.0);
    println!("{} identity convergence", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn dispatch(cli: &Cli) -> Outcome {
    if !cli.seedless {
        return Err(Failure::Config(
            "--seedless=false is not supported: every computation is deterministic".into(),
        ));
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    match &cli.command {
        Command::Profile { potential, s_max, n } => profile(cli, potential, *s_max, *n),
        Command::Simulate => simulate(cli),
        Command::Sweep => sweep(cli),
        Command::CheckIdentities { levels } => check_identities(cli, *levels),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_BANDS),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
