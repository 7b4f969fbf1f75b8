use clap::{Args, Parser, Subcommand, ValueEnum};
use reassign_core::controller::AdaptationConfig;
use reassign_core::harness::{
    emit_report, run_experiment, ClockMode, ExperimentConfig, HarnessError, MockPlannerSpec, PlannerChoice,
    ReportFormat,
};
use reassign_core::planner::{ChatEndpointConfig, API_KEY_ENV};
use reassign_core::sim::DEFAULT_EVENT_LIMIT;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;
use tracing_subscriber::EnvFilter;

const EXIT_FAILURE: u8 = 1;
const EXIT_SCENARIO: u8 = 2;
const EXIT_REQUIRED_SUCCESS: u8 = 3;

#[derive(Parser)]
#[command(name = "reassignd", version, about = "Failure-driven task reassignment experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run repeated trials of a scenario and report reassignment metrics.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PlannerKind {
    Oracle,
    Mock,
    Llm,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum, default_value = "oracle")]
    planner: PlannerKind,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 4)]
    max_retries: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 3 if any trial exhausts its retries.
    #[arg(long)]
    require_success: bool,
    /// Chat-completion base URL for `--planner llm`, e.g. https://api.openai.com/v1
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, default_value = "gpt-4o")]
    model: String,
    /// Per-call planner deadline in seconds.
    #[arg(long, default_value_t = 60)]
    deadline_secs: u64,
    /// Check reachability at drop-off locations only.
    #[arg(long)]
    dropoff_only: bool,
    /// Mock planner: probability that the first attempt of an episode is correct.
    #[arg(long, default_value_t = 0.6)]
    first_attempt_prob: f64,
    /// Mock planner: probability that a retry is correct.
    #[arg(long, default_value_t = 0.8)]
    retry_prob: f64,
    #[arg(long, default_value_t = DEFAULT_EVENT_LIMIT)]
    event_limit: usize,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .with_target(false)
        .init();

    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => run(args),
    }
}

fn run(args: RunArgs) -> ExitCode {
    let deadline = Duration::from_secs(args.deadline_secs);
    let (planner, clock) = match args.planner {
        PlannerKind::Oracle => (PlannerChoice::Oracle, logical()),
        PlannerKind::Mock => (
            PlannerChoice::Mock(MockPlannerSpec::stochastic(
                args.first_attempt_prob,
                args.retry_prob,
                args.seed,
            )),
            logical(),
        ),
        PlannerKind::Llm => {
            let Some(url) = args.endpoint.clone() else {
                eprintln!("error: --planner llm requires --endpoint");
                return ExitCode::from(EXIT_FAILURE);
            };
            let mut endpoint = ChatEndpointConfig::from_env(url, args.model.clone());
            endpoint.timeout = deadline;
            if endpoint.api_key.is_none() {
                eprintln!("warning: {API_KEY_ENV} is not set; sending requests without an API key");
            }
            (PlannerChoice::Llm(endpoint), ClockMode::Wall)
        }
    };

    let cfg = ExperimentConfig {
        trials: args.trials,
        adaptation: AdaptationConfig {
            max_retries: args.max_retries,
            planner_deadline: deadline,
            strict_dropoff_only: args.dropoff_only,
        },
        event_limit: args.event_limit,
        clock,
    };

    let result = match run_experiment(&args.scenario, &planner, &cfg, args.out.as_deref()) {
        Ok(result) => result,
        Err(e @ HarnessError::Scenario(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_SCENARIO);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    };

    let format = match args.format {
        Format::Table => ReportFormat::Table,
        Format::Json => ReportFormat::Json,
    };
    print!("{}", emit_report(&result.summary, format));

    if args.require_success && result.summary.exhausted_trials > 0 {
        eprintln!(
            "error: {} of {} trials exhausted their retries",
            result.summary.exhausted_trials, result.summary.trials
        );
        return ExitCode::from(EXIT_REQUIRED_SUCCESS);
    }
    ExitCode::SUCCESS
}

fn logical() -> ClockMode {
    ClockMode::Logical {
        per_call: Duration::from_secs(1),
    }
}
