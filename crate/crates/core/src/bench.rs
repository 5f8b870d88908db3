//! Adjacency precision/recall and the experiment suites built on it.
//!
//! Row `k` of a suite grid draws its DAG from seed `master + k` and its data
//! from `(master + k) ^ STREAM_SPLIT`, so any single row can be rerun alone.

use std::collections::{BTreeSet, HashSet};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::citests::CiTest;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::{pattern_from_dag, Dag, Graph};
use crate::pcsearch::{oracle_test, search, SearchConfig};
use crate::simulate::{
    random_dag_fixed_edges, random_dag_ordered, simulate_generalized, simulate_linear_gaussian,
    STREAM_SPLIT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdjacencyScore {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl AdjacencyScore {
    /// `tp / (tp + fp)`, undefined when nothing was estimated.
    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    /// `tp / (tp + fn)`, undefined when the truth has no adjacencies.
    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }
}

/// Compares unordered adjacencies by node name; orientations are ignored.
pub fn adjacency_score(estimated: &Graph, truth: &Graph) -> Result<AdjacencyScore> {
    let a: BTreeSet<&String> = estimated.nodes().iter().collect();
    let b: BTreeSet<&String> = truth.nodes().iter().collect();
    if a != b {
        return Err(Error::InvalidArgument(
            "estimated and true graphs have different node sets".into(),
        ));
    }
    let est: HashSet<(String, String)> = estimated.adjacency_names().into_iter().collect();
    let tru: HashSet<(String, String)> = truth.adjacency_names().into_iter().collect();
    let tp = est.intersection(&tru).count();
    Ok(AdjacencyScore {
        tp,
        fp: est.len() - tp,
        fn_: tru.len() - tp,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub config: String,
    pub test: String,
    pub n: usize,
    pub model_type: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub elapsed_ms: f64,
    pub seed: u64,
}

/// Means over one `(config, test, n, model_type)` group. Undefined values
/// are left out of the mean and counted.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub config: String,
    pub test: String,
    pub n: usize,
    pub model_type: String,
    pub rows: usize,
    pub mean_precision: Option<f64>,
    pub precision_undefined: usize,
    pub mean_recall: Option<f64>,
    pub recall_undefined: usize,
    pub mean_elapsed_ms: f64,
}

fn defined_mean(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize) {
    let (mut sum, mut count, mut missing) = (0.0, 0usize, 0usize);
    for v in values {
        match v {
            Some(x) => {
                sum += x;
                count += 1;
            }
            None => missing += 1,
        }
    }
    ((count > 0).then(|| sum / count as f64), missing)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

pub const REPORT_HEADER: [&str; 8] = [
    "config",
    "test",
    "n",
    "model_type",
    "precision",
    "recall",
    "elapsed_ms",
    "seed",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut keys: Vec<(&str, &str, usize, &str)> = Vec::new();
        for r in &self.rows {
            let k = (
                r.config.as_str(),
                r.test.as_str(),
                r.n,
                r.model_type.as_str(),
            );
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys.into_iter()
            .map(|(config, test, n, model_type)| {
                let group: Vec<&ReportRow> = self
                    .rows
                    .iter()
                    .filter(|r| {
                        r.config == config
                            && r.test == test
                            && r.n == n
                            && r.model_type == model_type
                    })
                    .collect();
                let (mean_precision, precision_undefined) =
                    defined_mean(group.iter().map(|r| r.precision));
                let (mean_recall, recall_undefined) = defined_mean(group.iter().map(|r| r.recall));
                Aggregate {
                    config: config.to_string(),
                    test: test.to_string(),
                    n,
                    model_type: model_type.to_string(),
                    rows: group.len(),
                    mean_precision,
                    precision_undefined,
                    mean_recall,
                    recall_undefined,
                    mean_elapsed_ms: group.iter().map(|r| r.elapsed_ms).sum::<f64>()
                        / group.len() as f64,
                }
            })
            .collect()
    }

    /// The aggregate for one test at one sample size and model type.
    pub fn aggregate(&self, test: &str, n: usize, model_type: &str) -> Option<Aggregate> {
        self.aggregates()
            .into_iter()
            .find(|a| a.test == test && a.n == n && a.model_type == model_type)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(REPORT_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.config.clone(),
                r.test.clone(),
                r.n.to_string(),
                r.model_type.clone(),
                fmt_opt(r.precision),
                fmt_opt(r.recall),
                format!("{:.3}", r.elapsed_ms),
                r.seed.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<report>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| e.context(format!("writing {}", path.display())))
    }

    /// Plain-text table of the aggregates.
    pub fn summary_table(&self) -> String {
        let mut out = format!(
            "{:<16} {:<9} {:>6} {:>5} {:>5} {:>9} {:>6} {:>9} {:>6} {:>11}\n",
            "config",
            "test",
            "n",
            "model",
            "rows",
            "precision",
            "undef",
            "recall",
            "undef",
            "mean_ms"
        );
        for a in self.aggregates() {
            let f = |v: Option<f64>| v.map_or_else(|| "NA".into(), |x| format!("{x:.3}"));
            out.push_str(&format!(
                "{:<16} {:<9} {:>6} {:>5} {:>5} {:>9} {:>6} {:>9} {:>6} {:>11.2}\n",
                a.config,
                a.test,
                a.n,
                a.model_type,
                a.rows,
                f(a.mean_precision),
                a.precision_undefined,
                f(a.mean_recall),
                a.recall_undefined,
                a.mean_elapsed_ms
            ));
        }
        out
    }
}

/// A test to run in a suite. `Oracle` answers from the row's true DAG.
#[derive(Clone)]
pub enum SuiteTest {
    Fixed(Arc<dyn CiTest>),
    Oracle,
}

impl SuiteTest {
    pub fn name(&self) -> &str {
        match self {
            SuiteTest::Fixed(t) => t.name(),
            SuiteTest::Oracle => "oracle",
        }
    }
}

impl From<Arc<dyn CiTest>> for SuiteTest {
    fn from(t: Arc<dyn CiTest>) -> Self {
        SuiteTest::Fixed(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteOptions {
    pub stable: bool,
    /// Parallel pair evaluation inside each search (stable only).
    pub parallel_search: bool,
    /// Run grid rows concurrently. Elapsed times then include contention.
    pub concurrent_rows: bool,
    pub max_depth: Option<usize>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            stable: false,
            parallel_search: false,
            concurrent_rows: true,
            max_depth: None,
        }
    }
}

/// Per-row seed of the grid.
pub fn row_seed(master: u64, row: usize) -> u64 {
    master.wrapping_add(row as u64)
}

struct Cell {
    config: &'static str,
    n: usize,
    model_type: String,
    seed: u64,
    truth: Dag,
    data: Dataset,
}

fn run_cell(cell: &Cell, tests: &[SuiteTest], opts: SuiteOptions) -> Result<Vec<ReportRow>> {
    let truth_pattern = pattern_from_dag(&cell.truth);
    let vars: Vec<usize> = (0..cell.data.n_vars()).collect();
    tests
        .iter()
        .map(|t| {
            let oracle;
            let test: &dyn CiTest = match t {
                SuiteTest::Fixed(a) => a.as_ref(),
                SuiteTest::Oracle => {
                    oracle = oracle_test(cell.truth.clone());
                    &oracle
                }
            };
            let config = SearchConfig {
                test,
                max_depth: opts.max_depth,
                stable: opts.stable,
                parallel: opts.parallel_search,
            };
            let start = Instant::now();
            let out = search(&vars, &config, &cell.data).map_err(|e| {
                e.context(format!(
                    "{} n={} model={} seed={} test={}",
                    cell.config,
                    cell.n,
                    cell.model_type,
                    cell.seed,
                    t.name()
                ))
            })?;
            let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
            let score = adjacency_score(&out.pattern, &truth_pattern)?;
            Ok(ReportRow {
                config: cell.config.to_string(),
                test: t.name().to_string(),
                n: cell.n,
                model_type: cell.model_type.clone(),
                precision: score.precision(),
                recall: score.recall(),
                elapsed_ms,
                seed: cell.seed,
            })
        })
        .collect()
}

fn run_grid(
    n_cells: usize,
    make: impl Fn(usize) -> Result<Cell> + Sync,
    tests: &[SuiteTest],
    opts: SuiteOptions,
) -> SuiteResult {
    if tests.is_empty() {
        return Err(Error::Empty("suite needs at least one test").into());
    }
    let one = |k: usize| make(k).and_then(|cell| run_cell(&cell, tests, opts));
    let cells: Vec<Result<Vec<ReportRow>>> = if opts.concurrent_rows {
        (0..n_cells).into_par_iter().map(one).collect()
    } else {
        // stop at the first failure
        let mut out = Vec::with_capacity(n_cells);
        for k in 0..n_cells {
            let r = one(k);
            let failed = r.is_err();
            out.push(r);
            if failed {
                break;
            }
        }
        out
    };
    let mut report = ExperimentReport::default();
    for cell in cells {
        match cell {
            Ok(rows) => report.rows.extend(rows),
            Err(error) => {
                return Err(Box::new(SuiteFailure {
                    partial: report,
                    error,
                }))
            }
        }
    }
    Ok(report)
}

/// A suite that stopped early, with the rows completed before the failing
/// one.
#[derive(Debug)]
pub struct SuiteFailure {
    pub partial: ExperimentReport,
    pub error: Error,
}

impl From<Error> for Box<SuiteFailure> {
    fn from(error: Error) -> Self {
        Box::new(SuiteFailure {
            partial: ExperimentReport::default(),
            error,
        })
    }
}

impl From<Box<SuiteFailure>> for Error {
    fn from(f: Box<SuiteFailure>) -> Self {
        f.error
    }
}

pub type SuiteResult = std::result::Result<ExperimentReport, Box<SuiteFailure>>;

fn check_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be at least 1".into()));
    }
    Ok(())
}

pub const LINEAR_GAUSSIAN_SIZES: [usize; 5] = [100, 250, 400, 550, 700];

/// Four variables, forward edges with probability 0.5, linear-Gaussian data.
pub fn run_linear_gaussian_suite(
    tests: &[SuiteTest],
    sizes: &[usize],
    reps: usize,
    seed: u64,
    opts: SuiteOptions,
) -> SuiteResult {
    check_reps(reps)?;
    run_grid(
        sizes.len() * reps,
        |k| {
            let s = row_seed(seed, k);
            let truth = random_dag_ordered(4, 0.5, s)?;
            let n = sizes[k / reps];
            let (data, _) = simulate_linear_gaussian(truth.clone(), n, s ^ STREAM_SPLIT)?;
            Ok(Cell {
                config: "linear-gaussian",
                n,
                model_type: "gaussian".into(),
                seed: s,
                truth,
                data,
            })
        },
        tests,
        opts,
    )
}

/// Five nodes, five edges, generalized SEM of each listed type.
pub fn run_nonlinear_suite(
    tests: &[SuiteTest],
    type_indices: &[u8],
    n_samples: usize,
    reps: usize,
    seed: u64,
    opts: SuiteOptions,
) -> SuiteResult {
    check_reps(reps)?;
    run_grid(
        type_indices.len() * reps,
        |k| {
            let s = row_seed(seed, k);
            let truth = random_dag_fixed_edges(5, 5, s)?;
            let t = type_indices[k / reps];
            let (data, _) = simulate_generalized(truth.clone(), t, n_samples, s ^ STREAM_SPLIT)?;
            Ok(Cell {
                config: "nonlinear",
                n: n_samples,
                model_type: t.to_string(),
                seed: s,
                truth,
                data,
            })
        },
        tests,
        opts,
    )
}

/// Sparse log-cosh model, `n_edges` edges over `n_nodes` nodes.
pub fn run_table1_suite(
    tests: &[SuiteTest],
    n_nodes: usize,
    n_edges: usize,
    n_samples: usize,
    reps: usize,
    seed: u64,
    opts: SuiteOptions,
) -> SuiteResult {
    check_reps(reps)?;
    run_grid(
        reps,
        |k| {
            let s = row_seed(seed, k);
            let truth = random_dag_fixed_edges(n_nodes, n_edges, s)?;
            let (data, _) = simulate_generalized(truth.clone(), 13, n_samples, s ^ STREAM_SPLIT)?;
            Ok(Cell {
                config: "table1",
                n: n_samples,
                model_type: "13".into(),
                seed: s,
                truth,
                data,
            })
        },
        tests,
        opts,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub n: usize,
    pub calls: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub test: String,
    pub cond_set_size: usize,
    pub rows: Vec<TimingRow>,
    /// Least-squares slope of `ln(mean)` on `ln(n)`.
    pub slope: Option<f64>,
}

impl ScalingReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "test",
            "n",
            "cond_set_size",
            "calls",
            "mean_ms",
            "median_ms",
        ])?;
        for r in &self.rows {
            w.write_record([
                self.test.clone(),
                r.n.to_string(),
                self.cond_set_size.to_string(),
                r.calls.to_string(),
                format!("{:.6}", r.mean_ms),
                format!("{:.6}", r.median_ms),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<report>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| e.context(format!("writing {}", path.display())))
    }

    pub fn summary_table(&self) -> String {
        let mut out = format!(
            "{:>7} {:>6} {:>12} {:>12}\n",
            "n", "calls", "mean_ms", "median_ms"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:>7} {:>6} {:>12.4} {:>12.4}\n",
                r.n, r.calls, r.mean_ms, r.median_ms
            ));
        }
        match self.slope {
            Some(s) => out.push_str(&format!("log-log slope: {s:.3}\n")),
            None => out.push_str("log-log slope: NA\n"),
        }
        out
    }
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return None;
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub const SCALING_WARMUP: usize = 3;

/// Data for timing: `x` and `y` both depend on the first conditioning
/// variable, the rest are independent noise.
fn scaling_data(n: usize, cond: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); cond.max(1) + 2];
    for _ in 0..n {
        let z: Vec<f64> = (0..cond.max(1))
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let x = z[0].sin() + 0.3 * rng.random_range(-1.0..1.0);
        let y = z[0] * z[0] + 0.3 * rng.random_range(-1.0..1.0);
        cols[0].push(x);
        cols[1].push(y);
        for (c, v) in z.into_iter().enumerate() {
            cols[c + 2].push(v);
        }
    }
    let names = (0..cols.len())
        .map(|i| match i {
            0 => "x".to_string(),
            1 => "y".to_string(),
            k => format!("z{}", k - 1),
        })
        .collect();
    Dataset::new(names, cols)
}

/// Wall-clock of single CI calls with `cond_set_size` conditioning variables,
/// after `SCALING_WARMUP` discarded calls per size.
pub fn run_scaling(
    test: &dyn CiTest,
    sizes: &[usize],
    cond_set_size: usize,
    reps: usize,
    seed: u64,
) -> Result<ScalingReport> {
    check_reps(reps)?;
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "sizes must be strictly ascending".into(),
        ));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for (k, &n) in sizes.iter().enumerate() {
        let data = scaling_data(n, cond_set_size, row_seed(seed, k))?;
        let z: Vec<usize> = (2..2 + cond_set_size).collect();
        for _ in 0..SCALING_WARMUP {
            test.independent(0, 1, &z, &data)?;
        }
        let mut times = Vec::with_capacity(reps);
        for _ in 0..reps {
            let start = Instant::now();
            std::hint::black_box(test.independent(0, 1, &z, &data)?);
            times.push(start.elapsed().as_secs_f64() * 1e3);
        }
        let mean_ms = times.iter().sum::<f64>() / reps as f64;
        let median_ms = crate::dataset::median(&times)?;
        rows.push(TimingRow {
            n,
            calls: reps,
            mean_ms,
            median_ms,
        });
    }
    let slope = log_log_slope(
        &rows
            .iter()
            .map(|r| (r.n as f64, r.mean_ms))
            .collect::<Vec<_>>(),
    );
    Ok(ScalingReport {
        test: test.name().to_string(),
        cond_set_size,
        rows,
        slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::citests::{FisherZTest, TestKind};
    use proptest::prelude::*;

    fn graph(nodes: &[&str], edges: &[(&str, &str)]) -> Graph {
        let mut g = Graph::new(nodes.iter().copied()).unwrap();
        for (a, b) in edges {
            let (a, b) = (g.index_of(a).unwrap(), g.index_of(b).unwrap());
            g.add_undirected(a, b).unwrap();
        }
        g
    }

    #[test]
    fn score_examples() {
        let truth = graph(&["a", "b", "c"], &[("a", "b"), ("a", "c")]);
        let s = adjacency_score(&truth, &truth).unwrap();
        assert_eq!((s.precision(), s.recall()), (Some(1.0), Some(1.0)));

        let est = graph(&["a", "b", "c"], &[("a", "b"), ("b", "c")]);
        let s = adjacency_score(&est, &truth).unwrap();
        assert_eq!((s.tp, s.fp, s.fn_), (1, 1, 1));
        assert_eq!((s.precision(), s.recall()), (Some(0.5), Some(0.5)));

        let empty = graph(&["a", "b", "c"], &[]);
        let s = adjacency_score(&empty, &truth).unwrap();
        assert_eq!((s.precision(), s.recall()), (None, Some(0.0)));

        let other = graph(&["a", "b", "d"], &[]);
        assert!(adjacency_score(&other, &truth).is_err());
    }

    #[test]
    fn orientation_is_ignored() {
        let mut est = graph(&["a", "b"], &[]);
        est.add_directed(1, 0).unwrap();
        let truth = graph(&["a", "b"], &[("a", "b")]);
        assert_eq!(adjacency_score(&est, &truth).unwrap().tp, 1);
    }

    #[test]
    fn oracle_rows_are_perfect() {
        let report = run_linear_gaussian_suite(
            &[SuiteTest::Oracle],
            &[100, 250],
            5,
            3,
            SuiteOptions::default(),
        )
        .unwrap();
        assert_eq!(report.rows.len(), 10);
        for r in &report.rows {
            if r.recall.is_some() {
                assert_eq!((r.precision, r.recall), (Some(1.0), Some(1.0)), "{r:?}");
            } else {
                assert_eq!(r.precision, None);
            }
        }
        let r = run_nonlinear_suite(
            &[SuiteTest::Oracle],
            &[13],
            50,
            4,
            9,
            SuiteOptions::default(),
        )
        .unwrap();
        assert!(r
            .rows
            .iter()
            .all(|r| r.precision == Some(1.0) && r.recall == Some(1.0)));
    }

    #[test]
    fn one_row_per_test_and_cell() {
        let fz: Arc<dyn CiTest> = Arc::new(FisherZTest::new(0.01));
        let tests = [SuiteTest::Fixed(fz), SuiteTest::Oracle];
        let r = run_linear_gaussian_suite(&tests, &[100], 1, 0, SuiteOptions::default()).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0].test, "fisher-z");
        assert_eq!(r.rows[0].seed, 0);
        let r = run_linear_gaussian_suite(
            &tests,
            &LINEAR_GAUSSIAN_SIZES,
            3,
            1,
            SuiteOptions::default(),
        )
        .unwrap();
        assert_eq!(r.rows.len(), 3 * 5 * 2);
        assert!(run_linear_gaussian_suite(&tests, &[100], 0, 0, SuiteOptions::default()).is_err());
    }

    #[test]
    fn rows_reproduce_bitwise() {
        let t: Arc<dyn CiTest> =
            TestKind::FisherZ.build(0.01, &Default::default(), Default::default());
        let tests = [SuiteTest::Fixed(t)];
        let a = run_nonlinear_suite(&tests, &[1, 13], 200, 3, 5, SuiteOptions::default()).unwrap();
        let b = run_nonlinear_suite(
            &tests,
            &[1, 13],
            200,
            3,
            5,
            SuiteOptions {
                concurrent_rows: false,
                ..Default::default()
            },
        )
        .unwrap();
        let strip = |r: &ExperimentReport| -> Vec<_> {
            r.rows
                .iter()
                .map(|r| {
                    (
                        r.seed,
                        r.precision.map(f64::to_bits),
                        r.recall.map(f64::to_bits),
                    )
                })
                .collect()
        };
        assert_eq!(strip(&a), strip(&b));
        // a single row rerun from its own seed
        let single =
            run_nonlinear_suite(&tests, &[1], 200, 1, 5 + 1, SuiteOptions::default()).unwrap();
        assert_eq!(strip(&single)[0], strip(&a)[1]);
    }

    #[test]
    fn failure_keeps_completed_rows() {
        let cci: Arc<dyn CiTest> = Arc::new(crate::citests::CciTest::default());
        let opts = SuiteOptions {
            concurrent_rows: false,
            ..Default::default()
        };
        // the second size is below the CCI minimum
        let err =
            run_linear_gaussian_suite(&[SuiteTest::Fixed(cci)], &[60, 10], 2, 0, opts).unwrap_err();
        assert_eq!(err.partial.rows.len(), 2);
        assert!(err.error.to_string().contains("n=10"), "{}", err.error);
    }

    #[test]
    fn csv_uses_na_for_undefined() {
        let report = ExperimentReport {
            rows: vec![ReportRow {
                config: "c".into(),
                test: "t".into(),
                n: 10,
                model_type: "12".into(),
                precision: None,
                recall: Some(0.5),
                elapsed_ms: 1.25,
                seed: 7,
            }],
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "config,test,n,model_type,precision,recall,elapsed_ms,seed\nc,t,10,12,NA,0.5,1.250,7\n"
        );
        let agg = report.aggregates();
        assert_eq!(agg[0].mean_precision, None);
        assert_eq!(agg[0].precision_undefined, 1);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = [250.0, 500.0, 1000.0]
            .iter()
            .map(|&n: &f64| (n, 3.0 * n * n))
            .collect();
        assert!((log_log_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(log_log_slope(&[(1.0, 1.0)]), None);
    }

    #[test]
    fn scaling_runs() {
        let t = FisherZTest::new(0.01);
        let r = run_scaling(&t, &[100, 200], 1, 3, 0).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.slope.is_some());
        assert!(run_scaling(&t, &[200, 100], 1, 3, 0).is_err());
    }

    proptest! {
        #[test]
        fn aggregate_is_the_plain_mean(values in proptest::collection::vec(proptest::option::of(0.0f64..=1.0), 1..40)) {
            let rows = values.iter().enumerate().map(|(i, v)| ReportRow {
                config: "c".into(), test: "t".into(), n: 1, model_type: "1".into(),
                precision: *v, recall: Some(0.0), elapsed_ms: 0.0, seed: i as u64,
            }).collect();
            let report = ExperimentReport { rows };
            let agg = &report.aggregates()[0];
            let defined: Vec<f64> = values.iter().flatten().copied().collect();
            prop_assert_eq!(agg.precision_undefined, values.len() - defined.len());
            match agg.mean_precision {
                None => prop_assert!(defined.is_empty()),
                Some(m) => {
                    let direct = defined.iter().sum::<f64>() / defined.len() as f64;
                    prop_assert!((m - direct).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn score_is_relabeling_invariant(edges in proptest::collection::vec((0usize..5, 0usize..5), 0..10),
                                         truth_edges in proptest::collection::vec((0usize..5, 0usize..5), 0..10),
                                         perm in Just((0..5).collect::<Vec<usize>>()).prop_shuffle()) {
            let build = |es: &[(usize, usize)], names: &dyn Fn(usize) -> String| {
                let mut g = Graph::new((0..5).map(names)).unwrap();
                for &(a, b) in es {
                    if a != b && !g.adjacent(a, b) {
                        g.add_undirected(a, b).unwrap();
                    }
                }
                g
            };
            let plain = |i: usize| format!("n{i}");
            let relabeled = |i: usize| format!("n{}", perm[i]);
            let s1 = adjacency_score(&build(&edges, &plain), &build(&truth_edges, &plain)).unwrap();
            let s2 = adjacency_score(&build(&edges, &relabeled), &build(&truth_edges, &relabeled)).unwrap();
            prop_assert_eq!(s1, s2);
        }
    }
}
