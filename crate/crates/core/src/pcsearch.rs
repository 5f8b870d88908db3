//! PC and PC-Stable structure search.
//!
//! The adjacency phase starts from the complete undirected graph and, depth
//! by depth, removes `x --- y` on the first conditioning set `S` (of size
//! `depth`, drawn from `adj(x) \ {y}` and then `adj(y) \ {x}`) that the test
//! accepts as separating. Pairs and subsets are enumerated in the order of
//! the `vars` list, so vanilla PC is reproducible even though its output
//! depends on that order.
//!
//! PC-Stable freezes adjacencies when a depth begins. Every pair's decision
//! at that depth then depends only on the frozen graph, so decisions can be
//! computed in parallel and merged at the end of the depth.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::citests::{CiTest, IndependenceDecision};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::{d_separated, meek_closure, Dag, Graph, Pattern};

#[derive(Clone, Copy)]
pub struct SearchConfig<'a> {
    pub test: &'a dyn CiTest,
    /// Largest conditioning-set size tried; `None` for unlimited.
    pub max_depth: Option<usize>,
    pub stable: bool,
    /// Evaluate pairs within a depth on the rayon pool. Requires `stable`.
    pub parallel: bool,
}

impl<'a> SearchConfig<'a> {
    pub fn pc(test: &'a dyn CiTest) -> Self {
        Self {
            test,
            max_depth: None,
            stable: false,
            parallel: false,
        }
    }

    pub fn pc_stable(test: &'a dyn CiTest) -> Self {
        Self {
            stable: true,
            ..Self::pc(test)
        }
    }

    pub fn with_max_depth(mut self, depth: Option<usize>) -> Self {
        self.max_depth = depth;
        self
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.parallel && !self.stable {
            return Err(Error::InvalidArgument(
                "parallel search requires the stable variant".into(),
            ));
        }
        Ok(())
    }
}

/// Separating sets keyed by unordered node pair (graph indices).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SepsetMap {
    map: HashMap<(usize, usize), Vec<usize>>,
}

impl SepsetMap {
    fn key(a: usize, b: usize) -> (usize, usize) {
        (a.min(b), a.max(b))
    }

    pub fn insert(&mut self, a: usize, b: usize, set: Vec<usize>) {
        self.map.insert(Self::key(a, b), set);
    }

    pub fn get(&self, a: usize, b: usize) -> Option<&[usize]> {
        self.map.get(&Self::key(a, b)).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &Vec<usize>)> {
        self.map.iter()
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    /// Undirected graph over the searched variables, in `vars` order.
    pub skeleton: Graph,
    pub sepsets: SepsetMap,
    /// Largest depth at which any test ran.
    pub depth_reached: usize,
    pub tests_run: usize,
}

#[derive(Debug, Clone)]
pub struct PcOutcome {
    pub pattern: Pattern,
    pub sepsets: SepsetMap,
    pub depth_reached: usize,
    pub tests_run: usize,
}

/// Calls `f` on each `k`-subset of `items` in lexicographic order until it
/// returns `Some`.
fn first_subset<T>(
    items: &[usize],
    k: usize,
    mut f: impl FnMut(&[usize]) -> Result<Option<T>>,
) -> Result<Option<T>> {
    if k > items.len() {
        return Ok(None);
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut subset = vec![0; k];
    loop {
        for (s, &i) in subset.iter_mut().zip(&idx) {
            *s = items[i];
        }
        if let Some(v) = f(&subset)? {
            return Ok(Some(v));
        }
        // advance to the next combination
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(None);
            }
            i -= 1;
            if idx[i] != i + items.len() - k {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

struct Searcher<'a> {
    config: &'a SearchConfig<'a>,
    data: &'a Dataset,
    vars: &'a [usize],
}

impl Searcher<'_> {
    fn test(&self, a: usize, b: usize, s: &[usize]) -> Result<IndependenceDecision> {
        let cols: Vec<usize> = s.iter().map(|&v| self.vars[v]).collect();
        self.config
            .test
            .independent(self.vars[a], self.vars[b], &cols, self.data)
            .map_err(|e| Error::TestFailed {
                test: self.config.test.name().to_string(),
                x: self.data.name(self.vars[a]).to_string(),
                y: self.data.name(self.vars[b]).to_string(),
                z: cols
                    .iter()
                    .map(|&c| self.data.name(c).to_string())
                    .collect(),
                source: Box::new(e),
            })
    }

    /// First separating set of size `depth` for `a --- b`, with the number of
    /// tests spent looking for it.
    fn separate(
        &self,
        a: usize,
        b: usize,
        adj_a: &[usize],
        adj_b: &[usize],
        depth: usize,
    ) -> Result<(Option<Vec<usize>>, usize)> {
        let mut calls = 0;
        let mut check = |s: &[usize]| -> Result<Option<Vec<usize>>> {
            calls += 1;
            Ok(self.test(a, b, s)?.independent.then(|| s.to_vec()))
        };
        if let Some(s) = first_subset(adj_a, depth, &mut check)? {
            return Ok((Some(s), calls));
        }
        // skip subsets already tried from the other side
        let found = first_subset(adj_b, depth, |s| {
            if s.iter().all(|v| adj_a.contains(v)) {
                Ok(None)
            } else {
                check(s)
            }
        })?;
        Ok((found, calls))
    }
}

fn others(g: &Graph, v: usize, exclude: usize) -> Vec<usize> {
    g.adjacents(v)
        .into_iter()
        .filter(|&u| u != exclude)
        .collect()
}

/// Edge-removal phase of PC / PC-Stable over the columns `vars` of `data`.
pub fn adjacency_search(
    vars: &[usize],
    config: &SearchConfig<'_>,
    data: &Dataset,
) -> Result<SearchOutcome> {
    config.validate()?;
    if vars.len() < 2 {
        return Err(Error::InvalidArgument(
            "search needs at least two variables".into(),
        ));
    }
    if let Some(&bad) = vars.iter().find(|&&v| v >= data.n_vars()) {
        return Err(Error::UnknownVariable(format!("column index {bad}")));
    }
    let names: Vec<String> = vars.iter().map(|&v| data.name(v).to_string()).collect();
    let mut g = Graph::complete(names)?;
    let n = g.n();
    let searcher = Searcher { config, data, vars };
    let mut sepsets = SepsetMap::default();
    let mut tests_run = 0;
    let mut depth_reached = 0;

    for depth in 0.. {
        if config.max_depth.is_some_and(|m| depth > m) {
            break;
        }
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|&(a, b)| g.adjacent(a, b))
            .collect();
        let frozen: Vec<Vec<usize>> = (0..n).map(|v| g.adjacents(v)).collect();
        if !pairs
            .iter()
            .any(|&(a, b)| frozen[a].len() > depth || frozen[b].len() > depth)
        {
            break;
        }
        depth_reached = depth;

        if config.stable {
            let decide = |&(a, b): &(usize, usize)| {
                let adj_a: Vec<usize> = frozen[a].iter().copied().filter(|&u| u != b).collect();
                let adj_b: Vec<usize> = frozen[b].iter().copied().filter(|&u| u != a).collect();
                searcher
                    .separate(a, b, &adj_a, &adj_b, depth)
                    .map(|(s, calls)| (a, b, s, calls))
            };
            let results: Vec<_> = if config.parallel {
                pairs.par_iter().map(decide).collect::<Result<_>>()?
            } else {
                pairs.iter().map(decide).collect::<Result<_>>()?
            };
            for (a, b, sep, calls) in results {
                tests_run += calls;
                if let Some(s) = sep {
                    g.remove_edge(a, b);
                    sepsets.insert(a, b, s);
                }
            }
        } else {
            for (a, b) in pairs {
                if !g.adjacent(a, b) {
                    continue;
                }
                let (adj_a, adj_b) = (others(&g, a, b), others(&g, b, a));
                let (sep, calls) = searcher.separate(a, b, &adj_a, &adj_b, depth)?;
                tests_run += calls;
                if let Some(s) = sep {
                    g.remove_edge(a, b);
                    sepsets.insert(a, b, s);
                }
            }
        }
    }
    Ok(SearchOutcome {
        skeleton: g,
        sepsets,
        depth_reached,
        tests_run,
    })
}

/// Orients unshielded colliders `x -> y <- z` (whenever `y` is not in the
/// set that separated `x` and `z`) and closes under the Meek rules.
///
/// An edge already pointing away from `y` is left alone rather than turned
/// into a conflict.
pub fn orient(skeleton: &Graph, sepsets: &SepsetMap) -> Pattern {
    let mut g = skeleton.clone();
    let n = g.n();
    for y in 0..n {
        let adj = skeleton.adjacents(y);
        for (i, &x) in adj.iter().enumerate() {
            for &z in &adj[i + 1..] {
                if skeleton.adjacent(x, z) {
                    continue;
                }
                if sepsets.get(x, z).is_some_and(|s| !s.contains(&y)) {
                    for p in [x, z] {
                        if !g.is_directed(y, p) {
                            g.orient(p, y);
                        }
                    }
                }
            }
        }
    }
    meek_closure(&mut g);
    Pattern::from_search(g)
}

/// Full PC / PC-Stable: adjacency search, collider orientation, Meek rules.
pub fn search(vars: &[usize], config: &SearchConfig<'_>, data: &Dataset) -> Result<PcOutcome> {
    let out = adjacency_search(vars, config, data)?;
    Ok(PcOutcome {
        pattern: orient(&out.skeleton, &out.sepsets),
        sepsets: out.sepsets,
        depth_reached: out.depth_reached,
        tests_run: out.tests_run,
    })
}

pub fn pc(vars: &[usize], config: &SearchConfig<'_>, data: &Dataset) -> Result<Pattern> {
    search(vars, config, data).map(|o| o.pattern)
}

/// A test that answers from d-separation in a known DAG. Variables are
/// matched to DAG nodes by name.
#[derive(Debug, Clone)]
pub struct OracleTest {
    dag: Dag,
}

pub fn oracle_test(dag: Dag) -> OracleTest {
    OracleTest { dag }
}

impl OracleTest {
    pub fn dag(&self) -> &Dag {
        &self.dag
    }
}

impl CiTest for OracleTest {
    fn name(&self) -> &str {
        "oracle"
    }

    fn independent(
        &self,
        x: usize,
        y: usize,
        z: &[usize],
        data: &Dataset,
    ) -> Result<IndependenceDecision> {
        let node = |i: usize| self.dag.index_of(data.name(i));
        let zs: Vec<usize> = z.iter().map(|&i| node(i)).collect::<Result<_>>()?;
        let sep = d_separated(&self.dag, node(x)?, node(y)?, &zs)?;
        Ok(IndependenceDecision::scalar(
            sep,
            if sep { 1.0 } else { 0.0 },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::pattern_from_dag;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dag(nodes: &[&str], edges: &[(&str, &str)]) -> Dag {
        let mut g = Graph::new(nodes.iter().copied()).unwrap();
        for (a, b) in edges {
            let (a, b) = (g.index_of(a).unwrap(), g.index_of(b).unwrap());
            g.add_directed(a, b).unwrap();
        }
        Dag::new(g).unwrap()
    }

    fn random_dag(rng: &mut ChaCha8Rng, max_nodes: usize, max_edges: usize) -> Dag {
        let n = rng.random_range(2..=max_nodes);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        pairs.shuffle(rng);
        let m = rng.random_range(0..=max_edges.min(pairs.len()));
        let mut g = Graph::new((0..n).map(|i| format!("v{i}"))).unwrap();
        for &(i, j) in &pairs[..m] {
            g.add_directed(order[i], order[j]).unwrap();
        }
        Dag::new(g).unwrap()
    }

    fn oracle_run(truth: &Dag, stable: bool) -> PcOutcome {
        let data = Dataset::placeholder(truth.nodes().to_vec()).unwrap();
        let test = oracle_test(truth.clone());
        let mut cfg = SearchConfig::pc(&test);
        cfg.stable = stable;
        let vars: Vec<usize> = (0..truth.n()).collect();
        search(&vars, &cfg, &data).unwrap()
    }

    #[test]
    fn subsets_enumerate_lexicographically() {
        let mut seen = Vec::new();
        let none: Option<()> = first_subset(&[3, 5, 7, 9], 2, |s| {
            seen.push(s.to_vec());
            Ok(None)
        })
        .unwrap();
        assert!(none.is_none());
        assert_eq!(
            seen,
            vec![
                vec![3, 5],
                vec![3, 7],
                vec![3, 9],
                vec![5, 7],
                vec![5, 9],
                vec![7, 9]
            ]
        );
        let mut count = 0;
        first_subset::<()>(&[1, 2], 0, |s| {
            assert!(s.is_empty());
            count += 1;
            Ok(None)
        })
        .unwrap();
        assert_eq!(count, 1);
        assert!(first_subset::<()>(&[1], 2, |_| unreachable!())
            .unwrap()
            .is_none());
    }

    #[test]
    fn oracle_chain_and_collider() {
        let chain = dag(&["a", "b", "c"], &[("a", "b"), ("b", "c")]);
        let out = oracle_run(&chain, false);
        assert_eq!(out.pattern.skeleton(), chain.skeleton());
        assert_eq!(out.sepsets.get(0, 2), Some(&[1usize][..]));
        assert_eq!(out.pattern.graph(), &chain.skeleton());

        let coll = dag(&["a", "b", "c"], &[("a", "b"), ("c", "b")]);
        let out = oracle_run(&coll, true);
        assert_eq!(out.sepsets.get(2, 0), Some(&[][..]));
        assert_eq!(out.pattern.graph(), coll.graph());
    }

    #[test]
    fn oracle_test_answers_d_separation() {
        let chain = dag(&["a", "b", "c"], &[("a", "b"), ("b", "c")]);
        let data = Dataset::placeholder(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let t = oracle_test(chain);
        assert!(t.independent(0, 2, &[1], &data).unwrap().independent);
        assert!(!t.independent(0, 2, &[], &data).unwrap().independent);
        let coll = dag(&["a", "b", "c"], &[("a", "b"), ("c", "b")]);
        let t = oracle_test(coll);
        assert!(!t.independent(0, 2, &[1], &data).unwrap().independent);
        let other = Dataset::placeholder(vec!["a".into(), "q".into()]).unwrap();
        assert!(t.independent(0, 1, &[], &other).is_err());
    }

    #[test]
    fn oracle_recovers_pattern_on_random_dags() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let truth = random_dag(&mut rng, 8, 10);
            let expected = pattern_from_dag(&truth);
            for stable in [false, true] {
                let out = oracle_run(&truth, stable);
                assert_eq!(out.pattern, expected, "stable={stable}\n{truth}");
            }
        }
    }

    #[test]
    fn oracle_symmetry_on_random_dags() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..30 {
            let truth = random_dag(&mut rng, 7, 9);
            let data = Dataset::placeholder(truth.nodes().to_vec()).unwrap();
            let t = oracle_test(truth.clone());
            let n = truth.n();
            for a in 0..n {
                for c in a + 1..n {
                    let z: Vec<usize> = (0..n)
                        .filter(|&v| v != a && v != c && rng.random_bool(0.4))
                        .collect();
                    assert_eq!(
                        t.independent(a, c, &z, &data).unwrap(),
                        t.independent(c, a, &z, &data).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn deeper_budget_only_removes_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..40 {
            let truth = random_dag(&mut rng, 8, 12);
            let data = Dataset::placeholder(truth.nodes().to_vec()).unwrap();
            let test = oracle_test(truth.clone());
            let vars: Vec<usize> = (0..truth.n()).collect();
            let mut prev: Option<Graph> = None;
            for d in 0..5 {
                let cfg = SearchConfig::pc_stable(&test).with_max_depth(Some(d));
                let sk = adjacency_search(&vars, &cfg, &data).unwrap().skeleton;
                if let Some(p) = &prev {
                    for (a, b) in sk.adjacency_names() {
                        assert!(p.adjacent(p.index_of(&a).unwrap(), p.index_of(&b).unwrap()));
                    }
                }
                prev = Some(sk);
            }
        }
    }

    #[test]
    fn parallel_requires_stable() {
        let truth = dag(&["a", "b"], &[("a", "b")]);
        let data = Dataset::placeholder(truth.nodes().to_vec()).unwrap();
        let test = oracle_test(truth);
        let cfg = SearchConfig::pc(&test).with_parallel(true);
        assert!(adjacency_search(&[0, 1], &cfg, &data).is_err());
        assert!(adjacency_search(&[0], &SearchConfig::pc(&test), &data).is_err());
    }

    #[test]
    fn test_errors_carry_context() {
        let truth = dag(&["a", "b"], &[("a", "b")]);
        // `c` is unknown to the oracle
        let data = Dataset::placeholder(vec!["a".into(), "c".into()]).unwrap();
        let test = oracle_test(truth);
        let err = adjacency_search(&[0, 1], &SearchConfig::pc(&test), &data).unwrap_err();
        match err {
            Error::TestFailed { x, y, .. } => assert_eq!((x.as_str(), y.as_str()), ("a", "c")),
            other => panic!("{other:?}"),
        }
    }
}
