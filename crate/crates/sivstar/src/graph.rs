//! Directed contact networks.
//!
//! Nodes are `0..N`. An edge `i -> j` means node `i` can influence node `j`
//! (stored at adjacency entry `(j, i)`, so `adjacency(i, j) = 1` reads "j is
//! an in-neighbor of i"). Graphs are immutable after construction and safe to
//! share across worker threads.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    /// Row-major N*N; entry (j, i) set iff there is an edge i -> j.
    adj: Vec<bool>,
    in_nbrs: Vec<Vec<usize>>,
    out_nbrs: Vec<Vec<usize>>,
}

impl Graph {
    /// Build a graph from a list of directed `(from, to)` edges.
    /// Duplicate edges collapse; self-loops and out-of-range endpoints are errors.
    pub fn new(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidInput("node_count must be positive".into()));
        }
        let n = node_count;
        let mut adj = vec![false; n * n];
        for &(from, to) in edges {
            if from >= n || to >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({from}, {to}) out of range for {n} nodes"
                )));
            }
            if from == to {
                return Err(Error::InvalidInput(format!("self-loop on node {from}")));
            }
            adj[to * n + from] = true;
        }
        Ok(Self::from_adj(n, adj))
    }

    fn from_adj(n: usize, adj: Vec<bool>) -> Self {
        let mut in_nbrs = vec![Vec::new(); n];
        let mut out_nbrs = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                if adj[j * n + i] {
                    // edge i -> j
                    out_nbrs[i].push(j);
                    in_nbrs[j].push(i);
                }
            }
        }
        Self {
            node_count: n,
            adj,
            in_nbrs,
            out_nbrs,
        }
    }

    /// Directed Erdős–Rényi graph: every ordered pair (i, j), i != j, gets an
    /// edge i -> j independently with probability `edge_probability`.
    /// Deterministic for a fixed seed.
    pub fn erdos_renyi(node_count: usize, edge_probability: f64, seed: u64) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidInput("node_count must be positive".into()));
        }
        if !(0.0..=1.0).contains(&edge_probability) {
            return Err(Error::InvalidInput(format!(
                "edge probability {edge_probability} outside [0, 1]"
            )));
        }
        let n = node_count;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut adj = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.random_bool(edge_probability) {
                    adj[j * n + i] = true;
                }
            }
        }
        Ok(Self::from_adj(n, adj))
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&b| b).count()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.adj[to * self.node_count + from]
    }

    /// Adjacency entry (i, j): 1 iff j is an in-neighbor of i (edge j -> i).
    pub fn adjacency(&self, i: usize, j: usize) -> u8 {
        u8::from(self.adj[i * self.node_count + j])
    }

    /// Nodes j with an edge j -> i.
    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_nbrs[i]
    }

    /// Nodes j with an edge i -> j.
    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out_nbrs[i]
    }

    /// All edges as `(from, to)` pairs in (from, to) lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for from in 0..self.node_count {
            for &to in &self.out_nbrs[from] {
                out.push((from, to));
            }
        }
        out
    }

    /// Dense adjacency matrix A with `A[(j, i)] = 1` iff edge i -> j.
    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.node_count, self.node_count, |j, i| {
            if self.adj[j * self.node_count + i] {
                1.0
            } else {
                0.0
            }
        })
    }

    /// True iff every node reaches every other node along directed edges.
    /// Decided by one forward and one backward traversal from node 0.
    pub fn is_strongly_connected(&self) -> bool {
        let n = self.node_count;
        if n <= 1 {
            return true;
        }
        let reach = |nbrs: &[Vec<usize>]| -> bool {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            let mut count = 1;
            while let Some(u) = stack.pop() {
                for &v in &nbrs[u] {
                    if !seen[v] {
                        seen[v] = true;
                        count += 1;
                        stack.push(v);
                    }
                }
            }
            count == n
        };
        reach(&self.out_nbrs) && reach(&self.in_nbrs)
    }

    /// Serialize as an edge-list document (`nodes N` header, one `from to`
    /// pair per line, lexicographic order). Byte-stable for a given graph.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "nodes {}", self.node_count);
        for (from, to) in self.edges() {
            let _ = writeln!(s, "{from} {to}");
        }
        s
    }

    /// Parse an edge-list document: `from to` pairs, `#` comments, optional
    /// `nodes N` header (otherwise N = max index + 1).
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut declared: Option<usize> = None;
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.split_once('#') {
                Some((head, _)) => head.trim(),
                None => raw.trim(),
            };
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let first = parts.next().unwrap();
            if first == "nodes" {
                let count = parts
                    .next()
                    .ok_or_else(|| Error::Parse(format!("line {}: bare `nodes`", lineno + 1)))?;
                declared = Some(count.parse().map_err(|_| {
                    Error::Parse(format!("line {}: bad node count `{count}`", lineno + 1))
                })?);
                continue;
            }
            let to = parts
                .next()
                .ok_or_else(|| Error::Parse(format!("line {}: missing endpoint", lineno + 1)))?;
            if parts.next().is_some() {
                return Err(Error::Parse(format!(
                    "line {}: expected `from to`",
                    lineno + 1
                )));
            }
            let from: usize = first
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad index `{first}`", lineno + 1)))?;
            let to: usize = to
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad index `{to}`", lineno + 1)))?;
            edges.push((from, to));
        }
        let n = declared.unwrap_or_else(|| {
            edges
                .iter()
                .map(|&(a, b)| a.max(b) + 1)
                .max()
                .unwrap_or(1)
        });
        Graph::new(n, &edges)
    }

    /// Erdős–Rényi draw retried with incremented seeds until the result is
    /// strongly connected; returns the graph and the seed that produced it.
    pub fn erdos_renyi_strongly_connected(
        node_count: usize,
        edge_probability: f64,
        seed: u64,
        max_tries: usize,
    ) -> Result<(Self, u64)> {
        for attempt in 0..max_tries as u64 {
            let candidate = Self::erdos_renyi(node_count, edge_probability, seed + attempt)?;
            if candidate.is_strongly_connected() {
                return Ok((candidate, seed + attempt));
            }
        }
        Err(Error::InvalidInput(format!(
            "no strongly connected draw in {max_tries} seeds from {seed} \
             (N = {node_count}, p = {edge_probability})"
        )))
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_edge_list())?;
        Ok(())
    }

    pub fn read_edge_list(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_edge_list(&text)
    }
}
