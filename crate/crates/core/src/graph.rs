//! Mixed graphs over named nodes, DAGs, patterns (CPDAGs), d-separation and
//! the Meek orientation rules.
//!
//! Nodes are addressed by index; names are carried for I/O and for matching
//! graphs built over different node orders. At most one edge joins any pair
//! of nodes and every edge is either directed or undirected.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Directed,
    Undirected,
}

/// An edge by endpoint index. Directed edges run `from -> to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

/// Endpoint mark stored at `[a][b]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mark {
    None,
    Undirected,
    /// a -> b
    Out,
    /// a <- b
    In,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    marks: Vec<Mark>,
}

impl Graph {
    pub fn new<S: Into<String>>(nodes: impl IntoIterator<Item = S>) -> Result<Self> {
        let nodes: Vec<String> = nodes.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, name) in nodes.iter().enumerate() {
            if name.is_empty() || name.contains(',') || name.chars().any(char::is_whitespace) {
                return Err(Error::BadNames(format!("invalid node name {name:?}")));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::BadNames(format!("duplicate node {name:?}")));
            }
        }
        let n = nodes.len();
        Ok(Self {
            nodes,
            index,
            marks: vec![Mark::None; n * n],
        })
    }

    /// Complete undirected graph over `nodes`.
    pub fn complete<S: Into<String>>(nodes: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut g = Self::new(nodes)?;
        for a in 0..g.n() {
            for b in a + 1..g.n() {
                g.set(a, b, Mark::Undirected);
            }
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &str {
        &self.nodes[i]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    fn mark(&self, a: usize, b: usize) -> Mark {
        self.marks[a * self.n() + b]
    }

    fn set(&mut self, a: usize, b: usize, m: Mark) {
        let n = self.n();
        let back = match m {
            Mark::Out => Mark::In,
            Mark::In => Mark::Out,
            other => other,
        };
        self.marks[a * n + b] = m;
        self.marks[b * n + a] = back;
    }

    fn check_new_edge(&self, a: usize, b: usize) -> Result<()> {
        if a >= self.n() || b >= self.n() {
            return Err(Error::BadEdge(format!(
                "{a} - {b}: node index out of range"
            )));
        }
        if a == b {
            return Err(Error::BadEdge(format!("self-loop on {}", self.nodes[a])));
        }
        if self.adjacent(a, b) {
            return Err(Error::BadEdge(format!(
                "{} and {} are already adjacent",
                self.nodes[a], self.nodes[b]
            )));
        }
        Ok(())
    }

    pub fn add_directed(&mut self, from: usize, to: usize) -> Result<()> {
        self.check_new_edge(from, to)?;
        self.set(from, to, Mark::Out);
        Ok(())
    }

    pub fn add_undirected(&mut self, a: usize, b: usize) -> Result<()> {
        self.check_new_edge(a, b)?;
        self.set(a, b, Mark::Undirected);
        Ok(())
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        self.set(a, b, Mark::None);
    }

    /// Replaces whatever joins `from` and `to` with `from -> to`.
    pub fn orient(&mut self, from: usize, to: usize) {
        debug_assert!(from != to);
        self.set(from, to, Mark::Out);
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.mark(a, b) != Mark::None
    }

    /// True iff `a -> b`.
    pub fn is_directed(&self, a: usize, b: usize) -> bool {
        self.mark(a, b) == Mark::Out
    }

    pub fn is_undirected(&self, a: usize, b: usize) -> bool {
        self.mark(a, b) == Mark::Undirected
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<EdgeKind> {
        match self.mark(a, b) {
            Mark::None => None,
            Mark::Undirected => Some(EdgeKind::Undirected),
            Mark::Out | Mark::In => Some(EdgeKind::Directed),
        }
    }

    fn with_mark(&self, v: usize, m: Mark) -> Vec<usize> {
        (0..self.n()).filter(|&u| self.mark(v, u) == m).collect()
    }

    pub fn parents(&self, v: usize) -> Vec<usize> {
        self.with_mark(v, Mark::In)
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        self.with_mark(v, Mark::Out)
    }

    /// Nodes joined to `v` by an undirected edge.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        self.with_mark(v, Mark::Undirected)
    }

    pub fn adjacents(&self, v: usize) -> Vec<usize> {
        (0..self.n()).filter(|&u| self.adjacent(v, u)).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.marks.iter().filter(|m| **m != Mark::None).count() / 2
    }

    /// Every edge once, ordered by endpoint names (smaller name first);
    /// undirected edges list the smaller name as `from`.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::with_capacity(self.edge_count());
        for a in 0..self.n() {
            for b in a + 1..self.n() {
                let e = match self.mark(a, b) {
                    Mark::None => continue,
                    Mark::Out => Edge {
                        from: a,
                        to: b,
                        kind: EdgeKind::Directed,
                    },
                    Mark::In => Edge {
                        from: b,
                        to: a,
                        kind: EdgeKind::Directed,
                    },
                    Mark::Undirected => {
                        let (from, to) = if self.nodes[a] <= self.nodes[b] {
                            (a, b)
                        } else {
                            (b, a)
                        };
                        Edge {
                            from,
                            to,
                            kind: EdgeKind::Undirected,
                        }
                    }
                };
                out.push(e);
            }
        }
        out.sort_by(|e, f| self.edge_key(e).cmp(&self.edge_key(f)));
        out
    }

    fn edge_key(&self, e: &Edge) -> (&str, &str) {
        let (a, b) = (self.nodes[e.from].as_str(), self.nodes[e.to].as_str());
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    /// Unordered adjacencies as name pairs, smaller name first.
    pub fn adjacency_names(&self) -> Vec<(String, String)> {
        self.edges()
            .iter()
            .map(|e| {
                let (a, b) = self.edge_key(e);
                (a.to_string(), b.to_string())
            })
            .collect()
    }

    /// Same adjacencies with every edge undirected.
    pub fn skeleton(&self) -> Graph {
        let mut g = self.clone();
        for m in g.marks.iter_mut() {
            if *m != Mark::None {
                *m = Mark::Undirected;
            }
        }
        g
    }

    /// True when the directed edges contain a cycle.
    pub fn has_directed_cycle(&self) -> bool {
        self.topological_order().is_none()
    }

    /// Kahn's algorithm over the directed edges; `None` on a cycle.
    /// Ties resolve to the smallest index, so the order is deterministic.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.n();
        let mut indeg: Vec<usize> = (0..n).map(|v| self.parents(v).len()).collect();
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for c in self.children(v) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Same graph with nodes relabelled into `order` (a permutation of the
    /// node names).
    pub fn reorder(&self, order: &[String]) -> Result<Graph> {
        if order.len() != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                found: order.len(),
            });
        }
        let mut g = Graph::new(order.iter().cloned())?;
        let n = g.n();
        let map: Vec<usize> = self
            .nodes
            .iter()
            .map(|name| g.index_of(name))
            .collect::<Result<_>>()?;
        for a in 0..self.n() {
            for b in 0..self.n() {
                g.marks[map[a] * n + map[b]] = self.mark(a, b);
            }
        }
        Ok(g)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("nodes: {}\n", self.nodes.join(", "));
        for e in self.edges() {
            let arrow = match e.kind {
                EdgeKind::Directed => "->",
                EdgeKind::Undirected => "---",
            };
            out.push_str(&format!(
                "{} {arrow} {}\n",
                self.nodes[e.from], self.nodes[e.to]
            ));
        }
        out
    }

    /// Parses the edge-list text format. Nodes come from the `nodes:` line
    /// (if present) followed by any new names seen in edges.
    pub fn parse_edge_list(text: &str) -> Result<Graph> {
        let mut names: Vec<String> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut edges = Vec::new();
        let mut add_name = |name: &str, names: &mut Vec<String>| {
            if seen.insert(name.to_string()) {
                names.push(name.to_string());
            }
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("nodes:") {
                for name in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    add_name(name, &mut names);
                }
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let kind = match parts.as_slice() {
                [_, "->", _] => EdgeKind::Directed,
                [_, "---", _] => EdgeKind::Undirected,
                _ => {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("expected `A -> B` or `A --- B`, got {line:?}"),
                    })
                }
            };
            add_name(parts[0], &mut names);
            add_name(parts[2], &mut names);
            edges.push((i + 1, parts[0].to_string(), parts[2].to_string(), kind));
        }
        let mut g = Graph::new(names)?;
        for (line, a, b, kind) in edges {
            let (a, b) = (g.index_of(&a)?, g.index_of(&b)?);
            let res = match kind {
                EdgeKind::Directed => g.add_directed(a, b),
                EdgeKind::Undirected => g.add_undirected(a, b),
            };
            res.map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
        }
        Ok(g)
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_edge_list())
    }
}

/// A graph whose edges are all directed and which has no directed cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag(Graph);

impl Dag {
    pub fn new(graph: Graph) -> Result<Self> {
        if graph.marks.contains(&Mark::Undirected) {
            return Err(Error::BadEdge(
                "a DAG cannot contain undirected edges".into(),
            ));
        }
        if graph.has_directed_cycle() {
            return Err(Error::Cyclic);
        }
        Ok(Self(graph))
    }

    pub fn graph(&self) -> &Graph {
        &self.0
    }

    pub fn into_graph(self) -> Graph {
        self.0
    }

    pub fn topological_order(&self) -> Vec<usize> {
        self.0.topological_order().expect("DAG invariant: acyclic")
    }
}

impl Deref for Dag {
    type Target = Graph;
    fn deref(&self) -> &Graph {
        &self.0
    }
}

/// A partially directed graph standing for a Markov equivalence class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern(Graph);

impl Pattern {
    pub fn new(graph: Graph) -> Result<Self> {
        if graph.has_directed_cycle() {
            return Err(Error::Cyclic);
        }
        Ok(Self(graph))
    }

    /// Wraps a search result as is. With an imperfect test the orientation
    /// phase can produce directed cycles, which callers should be able to see.
    pub(crate) fn from_search(graph: Graph) -> Self {
        Self(graph)
    }

    pub fn graph(&self) -> &Graph {
        &self.0
    }

    pub fn into_graph(self) -> Graph {
        self.0
    }
}

impl Deref for Pattern {
    type Target = Graph;
    fn deref(&self) -> &Graph {
        &self.0
    }
}

impl fmt::Display for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Whether `z` d-separates `x` and `y` in `g`.
///
/// Reachability in the style of Bayes-ball: a walk is tracked together with
/// the direction it entered each node, and colliders pass only when they are
/// ancestors of `z`.
pub fn d_separated(g: &Dag, x: usize, y: usize, z: &[usize]) -> Result<bool> {
    let n = g.n();
    for &v in z.iter().chain([&x, &y]) {
        if v >= n {
            return Err(Error::UnknownVariable(format!("node index {v}")));
        }
    }
    if x == y || z.contains(&x) || z.contains(&y) {
        return Err(Error::InvalidArgument(
            "d_separated requires distinct x, y outside z".into(),
        ));
    }
    let mut in_z = vec![false; n];
    for &v in z {
        in_z[v] = true;
    }
    // ancestors of z, z included
    let mut anc = in_z.clone();
    let mut stack: Vec<usize> = z.to_vec();
    while let Some(v) = stack.pop() {
        for p in g.parents(v) {
            if !anc[p] {
                anc[p] = true;
                stack.push(p);
            }
        }
    }

    // (node, arrived_from_child): true means the walk moves up into v
    let mut visited = vec![[false; 2]; n];
    let mut queue = VecDeque::from([(x, true)]);
    while let Some((v, up)) = queue.pop_front() {
        if std::mem::replace(&mut visited[v][up as usize], true) {
            continue;
        }
        if v == y {
            return Ok(false);
        }
        if up {
            if !in_z[v] {
                queue.extend(g.parents(v).into_iter().map(|p| (p, true)));
                queue.extend(g.children(v).into_iter().map(|c| (c, false)));
            }
        } else {
            if !in_z[v] {
                queue.extend(g.children(v).into_iter().map(|c| (c, false)));
            }
            if anc[v] {
                queue.extend(g.parents(v).into_iter().map(|p| (p, true)));
            }
        }
    }
    Ok(true)
}

/// Name-based convenience over [`d_separated`].
pub fn d_separated_names(g: &Dag, x: &str, y: &str, z: &[&str]) -> Result<bool> {
    let z: Vec<usize> = z.iter().map(|s| g.index_of(s)).collect::<Result<_>>()?;
    d_separated(g, g.index_of(x)?, g.index_of(y)?, &z)
}

/// The CPDAG of `g`: skeleton, unshielded colliders, then Meek closure.
pub fn pattern_from_dag(g: &Dag) -> Pattern {
    let mut p = g.skeleton();
    for v in 0..g.n() {
        let pa = g.parents(v);
        for (i, &a) in pa.iter().enumerate() {
            for &b in &pa[i + 1..] {
                if !g.adjacent(a, b) {
                    p.orient(a, v);
                    p.orient(b, v);
                }
            }
        }
    }
    meek_closure(&mut p);
    Pattern(p)
}

/// Closes `p` under Meek rules R1–R4.
pub fn apply_meek_rules(p: &Pattern) -> Pattern {
    let mut g = p.0.clone();
    meek_closure(&mut g);
    Pattern(g)
}

/// Applies R1–R4 in place until nothing changes. Only undirected edges are
/// ever oriented, so the loop terminates.
pub(crate) fn meek_closure(g: &mut Graph) {
    while meek_pass(g) {}
}

fn meek_pass(g: &mut Graph) -> bool {
    let n = g.n();
    let mut changed = false;
    for a in 0..n {
        for b in 0..n {
            if a == b || !g.is_undirected(a, b) {
                continue;
            }
            if meek_should_orient(g, a, b) {
                g.orient(a, b);
                changed = true;
            }
        }
    }
    changed
}

/// Whether the undirected edge `a --- b` is compelled to `a -> b`.
fn meek_should_orient(g: &Graph, a: usize, b: usize) -> bool {
    let n = g.n();
    // R1: c -> a --- b, c and b nonadjacent
    if (0..n).any(|c| g.is_directed(c, a) && !g.adjacent(c, b) && c != b) {
        return true;
    }
    // R2: a -> c -> b
    if (0..n).any(|c| g.is_directed(a, c) && g.is_directed(c, b)) {
        return true;
    }
    // R3: a --- c -> b, a --- d -> b, c and d nonadjacent
    let mids: Vec<usize> = (0..n)
        .filter(|&c| g.is_undirected(a, c) && g.is_directed(c, b))
        .collect();
    for (i, &c) in mids.iter().enumerate() {
        if mids[i + 1..].iter().any(|&d| !g.adjacent(c, d)) {
            return true;
        }
    }
    // R4: a --- c -> d -> b, c and b nonadjacent, a adjacent to d
    for c in 0..n {
        if c == b || !g.is_undirected(a, c) || g.adjacent(c, b) {
            continue;
        }
        if (0..n).any(|d| g.is_directed(c, d) && g.is_directed(d, b) && g.adjacent(a, d)) {
            return true;
        }
    }
    false
}
