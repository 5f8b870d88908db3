//! Random DAGs and forward sampling of structural equation models.
//!
//! Every generator takes a 64-bit seed and draws from one ChaCha8 stream in
//! a fixed order: per-node parameters first (in topological order), then the
//! noise for each sample, row by row, nodes in topological order. The same
//! seed and configuration always give the same bits.
//!
//! # Connection catalog
//!
//! With `s = Σ a_i·p_i` over the parents `p_i` and `e` the node's noise draw:
//!
//! | type | child |
//! |------|-------|
//! | 1 | `s + e` |
//! | 2 | `s³ + e` |
//! | 3 | `s² + e` |
//! | 4 | `tanh(s) + e` |
//! | 5 | `1 / (1 + abs(s)) + e` |
//! | 6 | `sign(s)·sqrt(abs(s)) + e` |
//! | 7 | `ln(1 + exp(s)) + e` |
//! | 8 | `sin(s) + e` |
//! | 9 | `exp(-abs(s)) + e` |
//! | 10 | `round(2s) / 2 + e` |
//! | 11 | `atan(s) + e` |
//! | 12 | `s · e` |
//! | 13 | `Σ a_i·ln(cosh(p_i)) + e` |
//! | 14 | one of 1 to 13 per node, drawn uniformly |
//!
//! Root nodes are pure noise under every type.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::{Dag, Graph};

/// Mixed into a seed when one seed has to drive two independent streams.
pub const STREAM_SPLIT: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn node_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("X{i}")).collect()
}

/// Forward edges `v_i -> v_j` (`i < j`) in index order, each kept with
/// probability `edge_prob`.
pub fn random_dag_ordered(n: usize, edge_prob: f64, seed: u64) -> Result<Dag> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "a DAG needs at least one node".into(),
        ));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::InvalidArgument(format!(
            "edge probability must lie in [0, 1], got {edge_prob}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::new(node_names(n))?;
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(edge_prob) {
                g.add_directed(i, j)?;
            }
        }
    }
    Dag::new(g)
}

/// Exactly `m` edges, forward along a random order, chosen uniformly without
/// replacement.
pub fn random_dag_fixed_edges(n: usize, m: usize, seed: u64) -> Result<Dag> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "a DAG needs at least one node".into(),
        ));
    }
    let max = n * (n - 1) / 2;
    if m > max {
        return Err(Error::InvalidArgument(format!(
            "edge count exceeds maximum {max}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let pairs = rand::seq::index::sample(&mut rng, max, m);
    let mut g = Graph::new(node_names(n))?;
    for k in pairs.iter() {
        let (i, j) = pair_from_index(n, k);
        g.add_directed(order[i], order[j])?;
    }
    Dag::new(g)
}

/// The `k`-th pair `(i, j)`, `i < j`, in row-major order.
fn pair_from_index(n: usize, mut k: usize) -> (usize, usize) {
    let mut i = 0;
    while k >= n - 1 - i {
        k -= n - 1 - i;
        i += 1;
    }
    (i, i + 1 + k)
}

/// Catalog entries 1–13.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(into = "u8")]
pub struct Connection(u8);

impl Connection {
    pub const LINEAR: Self = Self(1);
    pub const MULTIPLICATIVE: Self = Self(12);
    pub const LOG_COSH: Self = Self(13);

    pub fn new(index: u8) -> Result<Self> {
        if (1..=13).contains(&index) {
            Ok(Self(index))
        } else {
            Err(Error::InvalidArgument(format!(
                "connection type must be 1..=13, got {index}"
            )))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// Whether the noise enters as `g(parents) + e`.
    pub fn is_additive(self) -> bool {
        self.0 != 12
    }

    /// The noise-free part `g(parents)` of an additive entry; for type 12,
    /// the factor `s` that multiplies the noise.
    pub fn systematic(self, coefficients: &[f64], parents: &[f64]) -> f64 {
        if self.0 == 13 {
            return coefficients
                .iter()
                .zip(parents)
                .map(|(a, p)| a * p.cosh().ln())
                .sum();
        }
        let s: f64 = coefficients.iter().zip(parents).map(|(a, p)| a * p).sum();
        match self.0 {
            1 | 12 => s,
            2 => s * s * s,
            3 => s * s,
            4 => s.tanh(),
            5 => 1.0 / (1.0 + s.abs()),
            6 => s.signum() * s.abs().sqrt(),
            7 => s.max(0.0) + (-s.abs()).exp().ln_1p(),
            8 => s.sin(),
            9 => (-s.abs()).exp(),
            10 => (2.0 * s).round() / 2.0,
            11 => s.atan(),
            _ => unreachable!("validated in Connection::new"),
        }
    }

    pub fn apply(self, coefficients: &[f64], parents: &[f64], noise: f64) -> f64 {
        let g = self.systematic(coefficients, parents);
        if self.is_additive() {
            g + noise
        } else {
            g * noise
        }
    }
}

impl From<Connection> for u8 {
    fn from(c: Connection) -> u8 {
        c.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Noise {
    Gaussian {
        std: f64,
    },
    /// Uniform on `[-half_width, half_width]`.
    Uniform {
        half_width: f64,
    },
}

impl Noise {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Noise::Gaussian { std } => Normal::new(0.0, std)
                .expect("noise std validated positive")
                .sample(rng),
            Noise::Uniform { half_width } => rng.random_range(-half_width..=half_width),
        }
    }

    fn valid(&self) -> bool {
        match *self {
            Noise::Gaussian { std } => std > 0.0 && std.is_finite(),
            Noise::Uniform { half_width } => half_width > 0.0 && half_width.is_finite(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemNode {
    /// DAG parents in increasing index order.
    pub parents: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub connection: Connection,
    pub noise: Noise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sem {
    dag: Dag,
    nodes: Vec<SemNode>,
}

impl Sem {
    pub fn new(dag: Dag, nodes: Vec<SemNode>) -> Result<Self> {
        if nodes.len() != dag.n() {
            return Err(Error::LengthMismatch {
                expected: dag.n(),
                found: nodes.len(),
            });
        }
        for (v, node) in nodes.iter().enumerate() {
            if node.parents != dag.parents(v) {
                return Err(Error::InvalidArgument(format!(
                    "parents of {} do not match the DAG",
                    dag.node(v)
                )));
            }
            if node.coefficients.len() != node.parents.len()
                || node.coefficients.iter().any(|a| !a.is_finite())
            {
                return Err(Error::InvalidArgument(format!(
                    "coefficients of {} must be finite, one per parent",
                    dag.node(v)
                )));
            }
            if !node.noise.valid() {
                return Err(Error::InvalidArgument(format!(
                    "noise of {} must have positive finite scale",
                    dag.node(v)
                )));
            }
        }
        Ok(Self { dag, nodes })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn nodes(&self) -> &[SemNode] {
        &self.nodes
    }

    /// Noise columns (one per node), drawn row by row in topological order.
    pub fn draw_noise(&self, n_samples: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let order = self.dag.topological_order();
        let mut noise = vec![vec![0.0; n_samples]; self.nodes.len()];
        for row in 0..n_samples {
            for &v in &order {
                noise[v][row] = self.nodes[v].noise.draw(rng);
            }
        }
        noise
    }

    /// Evaluates the equations on given noise columns.
    pub fn sample_with_noise(&self, noise: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if noise.len() != self.nodes.len() {
            return Err(Error::LengthMismatch {
                expected: self.nodes.len(),
                found: noise.len(),
            });
        }
        let n = noise.first().map_or(0, Vec::len);
        if let Some(bad) = noise.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        let mut cols = vec![Vec::new(); self.nodes.len()];
        let mut pv = Vec::new();
        for v in self.dag.topological_order() {
            let node = &self.nodes[v];
            let col = (0..n)
                .map(|row| {
                    if node.parents.is_empty() {
                        return noise[v][row];
                    }
                    pv.clear();
                    pv.extend(node.parents.iter().map(|&p| cols[p][row]));
                    node.connection
                        .apply(&node.coefficients, &pv, noise[v][row])
                })
                .collect();
            cols[v] = col;
        }
        Ok(cols)
    }

    /// Draws `n_samples` rows, continuing the given stream.
    pub fn sample(&self, n_samples: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
        if n_samples == 0 {
            return Err(Error::NoSamples);
        }
        let noise = self.draw_noise(n_samples, rng);
        let cols = self.sample_with_noise(&noise)?;
        Dataset::new(self.dag.nodes().to_vec(), cols)
    }

    pub fn manifest(&self, model: ModelType, seed: u64, n_samples: usize) -> Manifest {
        let names = self.dag.nodes();
        Manifest {
            seed,
            model: model.to_string(),
            n_samples,
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(v, node)| NodeRecord {
                    name: names[v].clone(),
                    parents: node.parents.iter().map(|&p| names[p].clone()).collect(),
                    coefficients: node.coefficients.clone(),
                    connection: node.connection,
                    noise: node.noise,
                })
                .collect(),
        }
    }
}

/// Audit record of a simulated dataset.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub model: String,
    pub n_samples: usize,
    pub nodes: Vec<NodeRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeRecord {
    pub name: String,
    pub parents: Vec<String>,
    pub coefficients: Vec<f64>,
    pub connection: Connection,
    pub noise: Noise,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// `gaussian` or a generalized catalog index 1–14.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelType {
    Gaussian,
    Generalized(u8),
}

impl FromStr for ModelType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("gaussian") {
            return Ok(Self::Gaussian);
        }
        match s.parse::<u8>() {
            Ok(k) if (1..=14).contains(&k) => Ok(Self::Generalized(k)),
            _ => Err(Error::InvalidArgument(format!(
                "model type must be `gaussian` or 1..=14, got `{s}`"
            ))),
        }
    }
}

impl fmt::Display for ModelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gaussian => f.write_str("gaussian"),
            Self::Generalized(k) => write!(f, "{k}"),
        }
    }
}

fn parent_coefficients(rng: &mut ChaCha8Rng, k: usize, bound: f64) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(-bound..bound)).collect()
}

/// Coefficients `U(-2, 2)`, Gaussian noise with std `U(0.1, 0.6)`.
pub fn linear_gaussian_sem(dag: Dag, rng: &mut ChaCha8Rng) -> Result<Sem> {
    let mut nodes: Vec<Option<SemNode>> = vec![None; dag.n()];
    for v in dag.topological_order() {
        let parents = dag.parents(v);
        let coefficients = parent_coefficients(rng, parents.len(), 2.0);
        let std = rng.random_range(0.1..0.6);
        nodes[v] = Some(SemNode {
            parents,
            coefficients,
            connection: Connection::LINEAR,
            noise: Noise::Gaussian { std },
        });
    }
    Sem::new(dag, nodes.into_iter().map(Option::unwrap).collect())
}

/// Coefficients `U(-1, 1)`, noise `U(-1, 1)`, connection per catalog entry.
pub fn generalized_sem(dag: Dag, type_index: u8, rng: &mut ChaCha8Rng) -> Result<Sem> {
    if !(1..=14).contains(&type_index) {
        return Err(Error::InvalidArgument(format!(
            "model type must be 1..=14, got {type_index}"
        )));
    }
    let mut nodes: Vec<Option<SemNode>> = vec![None; dag.n()];
    for v in dag.topological_order() {
        let connection = if type_index == 14 {
            Connection(rng.random_range(1..=13))
        } else {
            Connection(type_index)
        };
        let parents = dag.parents(v);
        let coefficients = parent_coefficients(rng, parents.len(), 1.0);
        nodes[v] = Some(SemNode {
            parents,
            coefficients,
            connection,
            noise: Noise::Uniform { half_width: 1.0 },
        });
    }
    Sem::new(dag, nodes.into_iter().map(Option::unwrap).collect())
}

pub fn simulate_linear_gaussian(dag: Dag, n_samples: usize, seed: u64) -> Result<(Dataset, Sem)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sem = linear_gaussian_sem(dag, &mut rng)?;
    let data = sem.sample(n_samples, &mut rng)?;
    Ok((data, sem))
}

pub fn simulate_generalized(
    dag: Dag,
    type_index: u8,
    n_samples: usize,
    seed: u64,
) -> Result<(Dataset, Sem)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sem = generalized_sem(dag, type_index, &mut rng)?;
    let data = sem.sample(n_samples, &mut rng)?;
    Ok((data, sem))
}

pub fn simulate(dag: Dag, model: ModelType, n_samples: usize, seed: u64) -> Result<(Dataset, Sem)> {
    match model {
        ModelType::Gaussian => simulate_linear_gaussian(dag, n_samples, seed),
        ModelType::Generalized(k) => simulate_generalized(dag, k, n_samples, seed),
    }
}

/// Sparse log-cosh benchmark: `n_edges` random edges over `n_nodes` nodes.
/// The DAG is drawn from `seed`, the data from `seed ^ STREAM_SPLIT`.
pub fn simulate_table1_scaled(
    n_nodes: usize,
    n_edges: usize,
    n_samples: usize,
    seed: u64,
) -> Result<(Dataset, Dag)> {
    let dag = random_dag_fixed_edges(n_nodes, n_edges, seed)?;
    let (data, sem) = simulate_generalized(dag, 13, n_samples, seed ^ STREAM_SPLIT)?;
    Ok((data, sem.dag))
}

/// 200 nodes, 200 edges, 2000 samples.
pub fn simulate_table1(seed: u64) -> Result<(Dataset, Dag)> {
    simulate_table1_scaled(200, 200, 2000, seed)
}
