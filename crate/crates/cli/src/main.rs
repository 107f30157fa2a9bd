use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use nfph_core::bench::{
    build_homotopy, emit_merit_samples, emit_table, merit_local_min, registry_get, run_benchmark, table_specs,
    BenchmarkSpec, Instance, OutputFormat, SolveReport,
};
use nfph_core::tracker::write_trace_jsonl;
use nfph_core::{merit_descent, HomotopyKind, Orientation, Parametrization, PolishConfig, Strategy};

/// Exit code when a run ends without a candidate root.
const TRACKER_FAILURE: u8 = 2;

#[derive(Parser)]
#[command(name = "nfph", version, about = "Newton fixed-point homotopy benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and print its report row.
    Solve(SolveArgs),
    /// Run one of the benchmark tables (1 to 7).
    Table {
        k: u8,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sample theta(x) = F(x)^2 / 2 of a scalar problem as CSV.
    Merit {
        #[arg(long, default_value = "ex4")]
        problem: String,
        #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        hi: f64,
        #[arg(long, default_value_t = 4001)]
        count: usize,
        /// Print only the refined local minimiser inside [lo, hi].
        #[arg(long)]
        local_min: bool,
    },
    /// Gauss-Newton descent on theta from a scalar start.
    Descent {
        #[arg(long, default_value = "ex4")]
        problem: String,
        #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
        x0: f64,
        #[arg(long, default_value_t = 500)]
        maxit: usize,
    },
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    parametrization: Option<Parametrization>,
    #[arg(long)]
    orientation: Option<Orientation>,
    #[arg(long, default_value = "table")]
    out: OutputFormat,
}

impl CommonArgs {
    fn apply(&self, spec: &mut BenchmarkSpec) {
        if let Some(s) = self.strategy {
            spec.strategy = s;
        }
        if let Some(p) = self.parametrization {
            spec.parametrization = p;
        }
        if let Some(o) = self.orientation {
            spec.orientation = o;
        }
        spec.format = self.out;
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    problem: String,
    #[arg(long)]
    method: Option<HomotopyKind>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    sf: Option<f64>,
    #[arg(long)]
    cn: Option<usize>,
    /// Comma-separated start point.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    anchor: Option<Vec<f64>>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hypothesis-check samples; 0 skips the checks.
    #[arg(long, default_value_t = 0)]
    diagnostics: usize,
    /// Write the tracked points as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

impl SolveArgs {
    fn spec(&self) -> BenchmarkSpec {
        let mut spec = BenchmarkSpec::new(&self.problem);
        if let Some(m) = self.method {
            spec.method = m;
        }
        if let Some(a) = self.alpha {
            spec.alpha = a;
        }
        if let Some(sf) = self.sf {
            spec.s_final = sf;
        }
        if let Some(cn) = self.cn {
            spec.checkpoints = cn;
        }
        if let Some(b) = self.beta {
            spec.beta = b;
        }
        spec.anchor = self.anchor.clone();
        spec.seed = self.seed;
        spec.diagnostic_samples = self.diagnostics;
        self.common.apply(&mut spec);
        spec
    }
}

type CliResult = Result<ExitCode, Box<dyn std::error::Error>>;

fn finish(specs: &[BenchmarkSpec], reports: &[SolveReport], format: OutputFormat) -> CliResult {
    print!("{}", emit_table(specs, reports, format)?);
    if reports.iter().all(|r| r.status.is_success()) {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(TRACKER_FAILURE))
    }
}

fn solve(args: &SolveArgs) -> CliResult {
    let spec = args.spec();
    let report = run_benchmark(&spec)?;
    if let Some(path) = &args.trace {
        let built = build_homotopy(&spec)?;
        write_trace_jsonl(&report.trace, built.as_dyn(), BufWriter::new(File::create(path)?))?;
    }
    finish(std::slice::from_ref(&spec), &[report], spec.format)
}

fn scalar_problem(id: &str) -> Result<nfph_core::Problem, Box<dyn std::error::Error>> {
    match registry_get(id)?.instance {
        Instance::Equation(p) => Ok(p),
        Instance::Ncp(n) => Err(nfph_core::Error::NotScalar(n.dim()).into()),
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Solve(args) => solve(&args),
        Command::Table { k, common } => {
            let mut specs = table_specs(k)?;
            for s in &mut specs {
                common.apply(s);
            }
            let reports = specs.iter().map(run_benchmark).collect::<Result<Vec<_>, _>>()?;
            finish(&specs, &reports, common.out)
        }
        Command::Merit {
            problem,
            lo,
            hi,
            count,
            local_min,
        } => {
            if local_min {
                let (x, theta) = merit_local_min(&scalar_problem(&problem)?, lo, hi, count)?;
                println!("x,theta\n{x:.10},{theta:.10e}");
            } else {
                println!("x,theta");
                for (x, theta) in emit_merit_samples(&problem, lo, hi, count)? {
                    println!("{x},{theta:e}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Descent { problem, x0, maxit } => {
            let p = scalar_problem(&problem)?;
            let cfg = PolishConfig {
                maxit,
                ..PolishConfig::default()
            };
            let x0 = DVector::from_element(p.dim(), x0);
            let r = merit_descent(&p, &x0, &cfg)?;
            let f = p.eval(&r.x)?.amax();
            println!("status: {:?}", r.status);
            println!("x: {:?}", r.x.as_slice());
            println!("|F|_inf: {f:.8e}");
            println!("iterations: {}", r.iterations);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
