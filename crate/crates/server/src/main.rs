use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use antsteer::{exact_optimum, SteeringScript};
use antsteer_server::config::{ConfigFile, ParamOverrides, DATA_ENV, DEFAULT_BIND};
use antsteer_server::solve::{cluster, load_instance, load_script, solve};
use antsteer_server::{router, AppState, ServiceConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "antsteer", version, about = "Ant Colony System TSP solver with human steering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a session to the end and write its directory.
    Solve(SolveArgs),
    /// Serve the HTTP API and live stream.
    Serve(ServeArgs),
    /// Print the exact optimum of a small instance.
    Optimum { instance: PathBuf },
    /// Solve the first `split` nodes and the rest separately, then merge.
    Cluster(ClusterArgs),
}

#[derive(Args)]
struct ParamArgs {
    /// TOML file with defaults; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    ants: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    q0: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Improve every ant tour with 2-opt.
    #[arg(long)]
    two_opt: bool,
}

impl ParamArgs {
    fn overrides(&self) -> ParamOverrides {
        ParamOverrides {
            ants: self.ants,
            iterations: self.iterations,
            alpha: self.alpha,
            beta: self.beta,
            rho: self.rho,
            q0: self.q0,
            seed: self.seed,
            two_opt: self.two_opt.then_some(true),
            sigma: None,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// TSPLIB file, or the name of a bundled instance.
    instance: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    /// Human impact factor in [0, 1].
    #[arg(long)]
    hif: Option<f64>,
    /// Steering script (JSON lines of {iteration_applied, update}).
    #[arg(long)]
    script: Option<PathBuf>,
    /// Compare the best tour with the exact optimum.
    #[arg(long)]
    compare_optimal: bool,
    /// Session directory to write.
    #[arg(long, default_value = "antsteer-run")]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    /// Address to listen on.
    #[arg(long)]
    bind: Option<String>,
    /// Persistence root for sessions and uploaded instances.
    #[arg(long, env = DATA_ENV)]
    data: Option<PathBuf>,
    /// Delay between iterations of live sessions, in milliseconds.
    #[arg(long)]
    iteration_delay_ms: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    instance: PathBuf,
    /// Nodes `0..split` form the first cluster.
    #[arg(long)]
    split: usize,
    #[command(flatten)]
    params: ParamArgs,
}

type Failure = Box<dyn std::error::Error>;

fn run_solve(args: SolveArgs) -> Result<(), Failure> {
    let file = ConfigFile::load_optional(args.params.config.as_deref())?;
    let config = file.run_config(&args.params.overrides(), args.hif);
    let instance = Arc::new(load_instance(&args.instance)?);
    let script = match &args.script {
        Some(path) => load_script(path)?,
        None => SteeringScript::new(Vec::new()),
    };
    let session = solve(instance, &config, script, args.compare_optimal, &args.out)?;
    let result = session.result();
    println!("best length: {}", result.best_length);
    if let (Some(optimum), Some(gap)) = (&result.optimum, result.gap_percent) {
        println!("optimum: {}", optimum.length);
        println!("gap: {gap:.4}%");
    }
    println!("written to {}", args.out.display());
    Ok(())
}

fn run_serve(args: ServeArgs) -> Result<(), Failure> {
    let file = ConfigFile::load_optional(args.config.as_deref())?;
    let bind = args.bind.or(file.bind.clone()).unwrap_or_else(|| DEFAULT_BIND.to_string());
    let config = ServiceConfig {
        data_dir: args.data.or(file.data_dir.clone()),
        iteration_delay: Duration::from_millis(args.iteration_delay_ms.or(file.iteration_delay_ms).unwrap_or(0)),
        default_hif: file.run_config(&ParamOverrides::default(), None).hif,
        default_params: file.run_config(&ParamOverrides::default(), None).params,
    };
    let state = AppState::new(config)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind).await?;
        println!("listening on {}", listener.local_addr()?);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    Ok(())
}

fn run_optimum(path: &Path) -> Result<(), Failure> {
    let instance = load_instance(path)?;
    let optimum = exact_optimum(&instance)?;
    println!("length: {}", optimum.length);
    println!("order: {:?}", optimum.order);
    Ok(())
}

fn run_cluster(args: ClusterArgs) -> Result<(), Failure> {
    let file = ConfigFile::load_optional(args.params.config.as_deref())?;
    let config = file.run_config(&args.params.overrides(), None);
    let instance = load_instance(&args.instance)?;
    let tour = cluster(&instance, args.split, &config.params)?;
    println!("length: {}", tour.length());
    println!("order: {:?}", tour.order());
    Ok(())
}

fn main() -> ExitCode {
    let outcome = match Cli::parse().command {
        Command::Solve(args) => run_solve(args),
        Command::Serve(args) => run_serve(args),
        Command::Optimum { instance } => run_optimum(&instance),
        Command::Cluster(args) => run_cluster(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
