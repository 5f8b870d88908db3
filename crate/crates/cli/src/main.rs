use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cci_core::bench::{
    run_linear_gaussian_suite, run_nonlinear_suite, run_scaling, run_table1_suite, SuiteFailure,
    SuiteOptions, SuiteResult, SuiteTest, LINEAR_GAUSSIAN_SIZES,
};
use cci_core::citests::{BasisSpec, CiTest, ScreenOptions, TestKind};
use cci_core::dataset::Dataset;
use cci_core::pcsearch::{search, SearchConfig};
use cci_core::simulate::{random_dag_fixed_edges, random_dag_ordered, simulate, ModelType};
use cci_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cci",
    version,
    about = "Conditional independence testing and PC search"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random DAG and sample a dataset from it.
    Simulate(SimulateArgs),
    /// Run PC or PC-Stable on a CSV dataset.
    Search(SearchArgs),
    /// Run a benchmark suite and write a CSV report.
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct TestArgs {
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// `power:k` (k ≤ 12) or `hermite:k`.
    #[arg(long, default_value = "power:7")]
    basis: String,
    /// Stop a CCI call at the first decisive basis pair.
    #[arg(long)]
    early_exit: bool,
}

impl TestArgs {
    fn build(&self, kind: TestKind) -> Result<Arc<dyn CiTest>> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        let basis: BasisSpec = self.basis.parse()?;
        let options = ScreenOptions {
            early_exit: self.early_exit,
            parallel: false,
        };
        Ok(kind.build(self.alpha, &basis, options))
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// `gaussian` or a generalized SEM type 1..=14.
    #[arg(long, default_value = "gaussian")]
    model_type: String,
    #[arg(long, default_value_t = 5)]
    n_nodes: usize,
    /// Exact edge count; without it each forward edge appears with
    /// probability `--edge-prob`.
    #[arg(long)]
    n_edges: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    edge_prob: f64,
    #[arg(long, default_value_t = 1000)]
    n_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SearchArgs {
    data: PathBuf,
    #[arg(long, default_value = "cci")]
    test: String,
    #[command(flatten)]
    test_args: TestArgs,
    /// PC-Stable; pairs within a depth run in parallel.
    #[arg(long)]
    stable: bool,
    #[arg(long)]
    max_depth: Option<usize>,
    /// Pattern output; the summary goes next to it with a `.summary.json`
    /// suffix.
    #[arg(long, default_value = "pattern.txt")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    LinearGaussian,
    Nonlinear,
    Table1,
    Scaling,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    /// Tests to run; repeat or comma-separate. Default: all three (scaling:
    /// cci).
    #[arg(long, value_delimiter = ',')]
    test: Vec<String>,
    /// Also score the d-separation oracle.
    #[arg(long)]
    oracle: bool,
    #[command(flatten)]
    test_args: TestArgs,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample sizes (linear-gaussian, scaling).
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    /// Model types (nonlinear).
    #[arg(long, value_delimiter = ',')]
    types: Vec<u8>,
    #[arg(long)]
    n_nodes: Option<usize>,
    #[arg(long)]
    n_edges: Option<usize>,
    #[arg(long)]
    n_samples: Option<usize>,
    /// Conditioning-set size for the scaling suite.
    #[arg(long, default_value_t = 1)]
    cond_set_size: usize,
    /// Use PC-Stable (always on for table1).
    #[arg(long)]
    stable: bool,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, default_value = "report.csv")]
    out: PathBuf,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::InvalidArgument(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents)
        .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let model: ModelType = args.model_type.parse()?;
    if args.n_samples == 0 {
        return Err(Error::InvalidArgument(
            "--n-samples must be at least 1".into(),
        ));
    }
    let dag = match args.n_edges {
        Some(m) => random_dag_fixed_edges(args.n_nodes, m, args.seed)?,
        None => random_dag_ordered(args.n_nodes, args.edge_prob, args.seed)?,
    };
    let (data, sem) = simulate(
        dag,
        model,
        args.n_samples,
        args.seed ^ cci_core::simulate::STREAM_SPLIT,
    )?;
    create_dir(&args.out_dir)?;
    let data_path = args.out_dir.join("data.csv");
    let dag_path = args.out_dir.join("dag.txt");
    let manifest_path = args.out_dir.join("manifest.json");
    data.save_csv(&data_path)?;
    write_file(&dag_path, &sem.dag().to_edge_list())?;
    write_file(
        &manifest_path,
        &sem.manifest(model, args.seed, args.n_samples).to_json(),
    )?;
    println!(
        "wrote {} ({} x {}), {} ({} edges), {}",
        data_path.display(),
        data.n_samples(),
        data.n_vars(),
        dag_path.display(),
        sem.dag().edge_count(),
        manifest_path.display()
    );
    Ok(())
}

fn summary_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".summary.json");
    out.with_file_name(name)
}

fn cmd_search(args: &SearchArgs, threads: usize) -> Result<()> {
    let kind: TestKind = args.test.parse()?;
    let test = args.test_args.build(kind)?;
    let data = Dataset::load_csv(&args.data)?;
    let vars: Vec<usize> = (0..data.n_vars()).collect();
    let config = SearchConfig {
        test: test.as_ref(),
        max_depth: args.max_depth,
        stable: args.stable,
        parallel: args.stable && threads > 1,
    };
    let start = Instant::now();
    let out = search(&vars, &config, &data)?;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;

    write_file(&args.out, &out.pattern.to_edge_list())?;
    let summary = serde_json::json!({
        "test": test.name(),
        "alpha": args.test_args.alpha,
        "basis": args.test_args.basis,
        "stable": args.stable,
        "max_depth": args.max_depth,
        "depth_reached": out.depth_reached,
        "tests_run": out.tests_run,
        "edges": out.pattern.edge_count(),
        "elapsed_ms": elapsed_ms,
    });
    let summary_file = summary_path(&args.out);
    write_file(
        &summary_file,
        &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
    )?;
    print!("{}", out.pattern.to_edge_list());
    println!(
        "{} edges, depth {}, {} tests, {:.1} ms; wrote {} and {}",
        out.pattern.edge_count(),
        out.depth_reached,
        out.tests_run,
        elapsed_ms,
        args.out.display(),
        summary_file.display()
    );
    Ok(())
}

fn suite_tests(args: &BenchmarkArgs, default: &[TestKind]) -> Result<Vec<SuiteTest>> {
    let kinds: Vec<TestKind> = if args.test.is_empty() {
        default.to_vec()
    } else {
        args.test.iter().map(|t| t.parse()).collect::<Result<_>>()?
    };
    let mut tests: Vec<SuiteTest> = kinds
        .into_iter()
        .map(|k| args.test_args.build(k).map(SuiteTest::Fixed))
        .collect::<Result<_>>()?;
    if args.oracle {
        tests.push(SuiteTest::Oracle);
    }
    Ok(tests)
}

fn finish_report(result: SuiteResult, out: &Path) -> Result<()> {
    match result {
        Ok(report) => {
            report.save_csv(out)?;
            print!("{}", report.summary_table());
            println!("wrote {} ({} rows)", out.display(), report.rows.len());
            Ok(())
        }
        Err(failure) => {
            let SuiteFailure { partial, error } = *failure;
            partial.save_csv(out)?;
            Err(error.context(format!(
                "suite aborted; {} completed rows flushed to {}",
                partial.rows.len(),
                out.display()
            )))
        }
    }
}

fn cmd_benchmark(args: &BenchmarkArgs, threads: usize) -> Result<()> {
    let opts = SuiteOptions {
        stable: args.stable,
        parallel_search: args.stable && threads > 1,
        concurrent_rows: true,
        max_depth: args.max_depth,
    };
    match args.suite {
        Suite::LinearGaussian => {
            let tests = suite_tests(args, &TestKind::ALL)?;
            let sizes = if args.sizes.is_empty() {
                LINEAR_GAUSSIAN_SIZES.to_vec()
            } else {
                args.sizes.clone()
            };
            let reps = args.reps.unwrap_or(100);
            finish_report(
                run_linear_gaussian_suite(&tests, &sizes, reps, args.seed, opts),
                &args.out,
            )
        }
        Suite::Nonlinear => {
            let tests = suite_tests(args, &TestKind::ALL)?;
            let types = if args.types.is_empty() {
                (1..=14).collect()
            } else {
                args.types.clone()
            };
            finish_report(
                run_nonlinear_suite(
                    &tests,
                    &types,
                    args.n_samples.unwrap_or(1000),
                    args.reps.unwrap_or(20),
                    args.seed,
                    opts,
                ),
                &args.out,
            )
        }
        Suite::Table1 => {
            let tests = suite_tests(args, &TestKind::ALL)?;
            let opts = SuiteOptions {
                stable: true,
                parallel_search: threads > 1,
                ..opts
            };
            finish_report(
                run_table1_suite(
                    &tests,
                    args.n_nodes.unwrap_or(200),
                    args.n_edges.unwrap_or(200),
                    args.n_samples.unwrap_or(2000),
                    args.reps.unwrap_or(1),
                    args.seed,
                    opts,
                ),
                &args.out,
            )
        }
        Suite::Scaling => {
            let kind = match args.test.as_slice() {
                [] => TestKind::Cci,
                [one] => one.parse()?,
                _ => {
                    return Err(Error::InvalidArgument(
                        "the scaling suite times one test at a time".into(),
                    ))
                }
            };
            let test = args.test_args.build(kind)?;
            let sizes = if args.sizes.is_empty() {
                vec![250, 500, 1000, 2000]
            } else {
                args.sizes.clone()
            };
            let report = run_scaling(
                test.as_ref(),
                &sizes,
                args.cond_set_size,
                args.reps.unwrap_or(10),
                args.seed,
            )?;
            report.save_csv(&args.out)?;
            print!("{}", report.summary_table());
            println!("wrote {}", args.out.display());
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let threads = match cli.threads {
        Some(0) => {
            return Err(Error::InvalidArgument(
                "--threads must be at least 1".into(),
            ))
        }
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Search(a) => cmd_search(a, threads),
        Command::Benchmark(a) => cmd_benchmark(a, threads),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
