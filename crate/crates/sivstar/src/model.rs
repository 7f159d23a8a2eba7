//! SI*V* model instances: state-space dimensions, per-node rate matrices,
//! per-edge infection rates, and the small matrix helpers the stability
//! analysis consumes.
//!
//! A node is always in one of `1 + m + n` compartments: susceptible `S`,
//! infectious `I^1..I^m`, or vigilant `V^1..V^n`. All rates are nonnegative
//! reals in units of 1/day. A `Model` is validated at construction and
//! immutable afterwards.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Diagonal matrix of row sums of `q` (square of size nrows).
pub fn degree_matrix(q: &DMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(q.nrows(), q.nrows());
    for k in 0..q.nrows() {
        d[(k, k)] = q.row(k).sum();
    }
    d
}

/// Laplacian `deg(q) - q`; rows of the result sum to zero.
pub fn laplacian(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if q.nrows() != q.ncols() {
        return Err(Error::InvalidInput(format!(
            "laplacian requires a square matrix, got {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    Ok(degree_matrix(q) - q)
}

/// Per-node transition rates.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeParams {
    /// m x n recovery rates, entry (k, l) = rate I^k -> V^l.
    pub recovery: DMatrix<f64>,
    /// m x m internal infectious rates, entry (k, k') = rate I^k -> I^k'; zero diagonal.
    pub infectious_internal: DMatrix<f64>,
    /// n x n internal vigilant rates, entry (l, l') = rate V^l -> V^l'; zero diagonal.
    pub vigilant_internal: DMatrix<f64>,
    /// Length-n rates V^l -> S.
    pub susceptibility: DVector<f64>,
    /// Length-n rates S -> V^l.
    pub vigilance: DVector<f64>,
}

impl NodeParams {
    /// All-zero parameters for the given dimensions.
    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            recovery: DMatrix::zeros(m, n),
            infectious_internal: DMatrix::zeros(m, m),
            vigilant_internal: DMatrix::zeros(n, n),
            susceptibility: DVector::zeros(n),
            vigilance: DVector::zeros(n),
        }
    }
}

/// Infection rates attached to one directed edge `from -> to`: entry k is the
/// influence of `from` in state I^k on `to`'s S -> I^1 transition.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeInfection {
    pub from: usize,
    pub to: usize,
    pub beta: DVector<f64>,
}

/// Validation outcome; `ok` iff `errors` is empty.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
}

/// Uniform sampling bounds for random model instantiation; every entry of a
/// family is drawn i.i.d. from its `[lo, hi]` interval.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ParamRanges {
    pub delta: (f64, f64),
    pub epsilon: (f64, f64),
    pub mu: (f64, f64),
    pub gamma: (f64, f64),
    pub theta: (f64, f64),
    pub beta: (f64, f64),
}

impl ParamRanges {
    pub fn zero() -> Self {
        Self {
            delta: (0.0, 0.0),
            epsilon: (0.0, 0.0),
            mu: (0.0, 0.0),
            gamma: (0.0, 0.0),
            theta: (0.0, 0.0),
            beta: (0.0, 0.0),
        }
    }
}

/// A validated, immutable SI*V* model instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    graph: Graph,
    m: usize,
    n: usize,
    nodes: Vec<NodeParams>,
    /// incoming[i] = [(j, beta_ij)] for stored in-edges j -> i, ordered by j.
    incoming: Vec<Vec<(usize, DVector<f64>)>>,
}

impl Model {
    /// Validate and build. Edges without an `EdgeInfection` entry carry zero
    /// infection rates.
    pub fn new(
        graph: Graph,
        m: usize,
        n: usize,
        nodes: Vec<NodeParams>,
        edges: Vec<EdgeInfection>,
    ) -> Result<Self> {
        let report = validate_parts(&graph, m, n, &nodes, &edges);
        if !report.ok {
            return Err(Error::InvalidModel(report));
        }
        let mut incoming: Vec<BTreeMap<usize, DVector<f64>>> =
            vec![BTreeMap::new(); graph.node_count()];
        for e in edges {
            incoming[e.to].insert(e.from, e.beta);
        }
        let incoming = incoming
            .into_iter()
            .map(|m| m.into_iter().collect())
            .collect();
        Ok(Self {
            graph,
            m,
            n,
            nodes,
            incoming,
        })
    }

    /// One set of node parameters and one edge rate vector broadcast to every
    /// node and every edge of the graph.
    pub fn homogeneous(
        graph: Graph,
        m: usize,
        n: usize,
        node: NodeParams,
        beta: DVector<f64>,
    ) -> Result<Self> {
        let nodes = vec![node; graph.node_count()];
        let edges = graph
            .edges()
            .into_iter()
            .map(|(from, to)| EdgeInfection {
                from,
                to,
                beta: beta.clone(),
            })
            .collect();
        Self::new(graph, m, n, nodes, edges)
    }

    /// Draw every rate i.i.d. uniformly from its family's range. Deterministic
    /// for a fixed seed: nodes are filled in index order (recovery,
    /// infectious_internal, vigilant_internal, susceptibility, vigilance,
    /// row-major), then edges in `Graph::edges` order.
    pub fn sample_from_ranges(
        graph: Graph,
        m: usize,
        n: usize,
        ranges: &ParamRanges,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |lo: f64, hi: f64, rng: &mut ChaCha8Rng| -> Result<f64> {
            if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi < lo {
                return Err(Error::InvalidInput(format!("bad range [{lo}, {hi}]")));
            }
            Ok(if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            })
        };
        let mut nodes = Vec::with_capacity(graph.node_count());
        for _ in 0..graph.node_count() {
            let mut p = NodeParams::zeros(m, n);
            for k in 0..m {
                for l in 0..n {
                    p.recovery[(k, l)] = draw(ranges.delta.0, ranges.delta.1, &mut rng)?;
                }
            }
            for k in 0..m {
                for k2 in 0..m {
                    if k != k2 {
                        p.infectious_internal[(k, k2)] =
                            draw(ranges.epsilon.0, ranges.epsilon.1, &mut rng)?;
                    }
                }
            }
            for l in 0..n {
                for l2 in 0..n {
                    if l != l2 {
                        p.vigilant_internal[(l, l2)] = draw(ranges.mu.0, ranges.mu.1, &mut rng)?;
                    }
                }
            }
            for l in 0..n {
                p.susceptibility[l] = draw(ranges.gamma.0, ranges.gamma.1, &mut rng)?;
            }
            for l in 0..n {
                p.vigilance[l] = draw(ranges.theta.0, ranges.theta.1, &mut rng)?;
            }
            nodes.push(p);
        }
        let mut edges = Vec::new();
        for (from, to) in graph.edges() {
            let mut beta = DVector::zeros(m);
            for k in 0..m {
                beta[k] = draw(ranges.beta.0, ranges.beta.1, &mut rng)?;
            }
            edges.push(EdgeInfection { from, to, beta });
        }
        Self::new(graph, m, n, nodes, edges)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    /// Number of infectious states.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of vigilant states.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn node(&self, i: usize) -> &NodeParams {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[NodeParams] {
        &self.nodes
    }

    /// Stored in-edges of node `i` with their infection rate vectors.
    pub fn incoming(&self, i: usize) -> &[(usize, DVector<f64>)] {
        &self.incoming[i]
    }

    /// Infection rates on edge `from -> to`, if stored.
    pub fn beta(&self, from: usize, to: usize) -> Option<&DVector<f64>> {
        self.incoming[to]
            .iter()
            .find(|(j, _)| *j == from)
            .map(|(_, b)| b)
    }

    /// Stored infection edges in `(from, to)` order.
    pub fn infection_edges(&self) -> Vec<EdgeInfection> {
        let mut out = Vec::new();
        for (to, list) in self.incoming.iter().enumerate() {
            for (from, beta) in list {
                out.push(EdgeInfection {
                    from: *from,
                    to,
                    beta: beta.clone(),
                });
            }
        }
        out.sort_by_key(|e| (e.from, e.to));
        out
    }

    /// Copy with every infection rate multiplied by `factor` (sweep axis).
    pub fn with_scaled_beta(&self, factor: f64) -> Result<Model> {
        if !(factor >= 0.0) {
            return Err(Error::InvalidInput("beta factor must be nonnegative".into()));
        }
        let edges = self
            .infection_edges()
            .into_iter()
            .map(|mut e| {
                e.beta *= factor;
                e
            })
            .collect();
        Model::new(
            self.graph.clone(),
            self.m,
            self.n,
            self.nodes.clone(),
            edges,
        )
    }

    /// Copy with every recovery rate multiplied by `factor` (sweep axis).
    pub fn with_scaled_recovery(&self, factor: f64) -> Result<Model> {
        if !(factor >= 0.0) {
            return Err(Error::InvalidInput("recovery factor must be nonnegative".into()));
        }
        let nodes = self
            .nodes
            .iter()
            .map(|p| {
                let mut p = p.clone();
                p.recovery *= factor;
                p
            })
            .collect();
        Model::new(
            self.graph.clone(),
            self.m,
            self.n,
            nodes,
            self.infection_edges(),
        )
    }

    /// Re-run validation. For a constructed model the report is always ok;
    /// warnings (absorbing vigilant states etc.) may still be present.
    pub fn validate(&self) -> ValidationReport {
        validate_parts(
            &self.graph,
            self.m,
            self.n,
            &self.nodes,
            &self.infection_edges(),
        )
    }
}

/// Pure validation over unassembled parts. Errors make the parts unusable;
/// warnings flag assumptions of the stability analysis (simulation remains
/// well-defined).
pub fn validate_parts(
    graph: &Graph,
    m: usize,
    n: usize,
    nodes: &[NodeParams],
    edges: &[EdgeInfection],
) -> ValidationReport {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    if m == 0 {
        errors.push("m must be positive (at least one infectious state)".into());
    }
    if n == 0 {
        errors.push("n must be positive (at least one vigilant state)".into());
    }
    if nodes.len() != graph.node_count() {
        errors.push(format!(
            "expected {} node parameter sets, got {}",
            graph.node_count(),
            nodes.len()
        ));
    }
    if !errors.is_empty() {
        return ValidationReport {
            ok: false,
            warnings,
            errors,
        };
    }

    let check_nonneg = |name: &str, i: usize, values: &[f64], errors: &mut Vec<String>| {
        if values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            errors.push(format!("negative rate in {name} of node {i}"));
        }
    };

    for (i, p) in nodes.iter().enumerate() {
        if p.recovery.nrows() != m || p.recovery.ncols() != n {
            errors.push(format!("node {i}: recovery matrix is not {m}x{n}"));
            continue;
        }
        if p.infectious_internal.nrows() != m || p.infectious_internal.ncols() != m {
            errors.push(format!("node {i}: infectious_internal is not {m}x{m}"));
            continue;
        }
        if p.vigilant_internal.nrows() != n || p.vigilant_internal.ncols() != n {
            errors.push(format!("node {i}: vigilant_internal is not {n}x{n}"));
            continue;
        }
        if p.susceptibility.len() != n || p.vigilance.len() != n {
            errors.push(format!("node {i}: gamma/theta are not length {n}"));
            continue;
        }
        check_nonneg("recovery", i, p.recovery.as_slice(), &mut errors);
        check_nonneg(
            "infectious_internal",
            i,
            p.infectious_internal.as_slice(),
            &mut errors,
        );
        check_nonneg(
            "vigilant_internal",
            i,
            p.vigilant_internal.as_slice(),
            &mut errors,
        );
        check_nonneg("susceptibility", i, p.susceptibility.as_slice(), &mut errors);
        check_nonneg("vigilance", i, p.vigilance.as_slice(), &mut errors);
        for k in 0..m {
            if p.infectious_internal[(k, k)] != 0.0 {
                errors.push(format!("node {i}: infectious_internal diagonal ({k},{k}) nonzero"));
            }
        }
        for l in 0..n {
            if p.vigilant_internal[(l, l)] != 0.0 {
                errors.push(format!("node {i}: vigilant_internal diagonal ({l},{l}) nonzero"));
            }
        }

        // Absorbing vigilant state: no way back to S and no internal way out.
        for l in 0..n {
            if p.susceptibility.len() == n
                && p.vigilant_internal.nrows() == n
                && p.susceptibility[l] == 0.0
                && p.vigilant_internal.row(l).iter().all(|&x| x == 0.0)
            {
                warnings.push(format!(
                    "node {i}: absorbing vigilant state V{} (gamma and mu row both zero); \
                     stability analysis assumptions do not hold",
                    l + 1
                ));
            }
        }
        if p.vigilance.iter().all(|&x| x == 0.0) && p.susceptibility.iter().all(|&x| x == 0.0) {
            warnings.push(format!("node {i}: theta and gamma are all zero"));
        }
    }

    let mut seen = std::collections::BTreeSet::new();
    for e in edges {
        if e.from >= graph.node_count() || e.to >= graph.node_count() {
            errors.push(format!("beta on out-of-range edge ({}, {})", e.from, e.to));
            continue;
        }
        if !graph.has_edge(e.from, e.to) {
            errors.push(format!(
                "beta stored for absent edge {} -> {}",
                e.from, e.to
            ));
        }
        if !seen.insert((e.from, e.to)) {
            errors.push(format!("duplicate beta entry for edge {} -> {}", e.from, e.to));
        }
        if e.beta.len() != m {
            errors.push(format!(
                "edge {} -> {}: beta has length {}, expected {m}",
                e.from,
                e.to,
                e.beta.len()
            ));
        } else if e.beta.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            errors.push(format!("negative rate in beta of edge {} -> {}", e.from, e.to));
        }
    }

    ValidationReport {
        ok: errors.is_empty(),
        warnings,
        errors,
    }
}

// ---------------------------------------------------------------------------
// JSON model files
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum GraphField {
    Inline {
        nodes: usize,
        edges: Vec<(usize, usize)>,
    },
    Path {
        path: String,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeField {
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
    #[serde(rename = "E")]
    e: Vec<Vec<f64>>,
    #[serde(rename = "M")]
    mu: Vec<Vec<f64>>,
    gamma: Vec<f64>,
    theta: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeField {
    from: usize,
    to: usize,
    beta: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RangesField {
    delta: (f64, f64),
    #[serde(default)]
    epsilon: Option<(f64, f64)>,
    #[serde(default)]
    mu: Option<(f64, f64)>,
    gamma: (f64, f64),
    theta: (f64, f64),
    beta: (f64, f64),
}

/// On-disk model document: either explicit `nodes` + `edges`, or a `ranges`
/// block with a `seed` for random instantiation.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    m: usize,
    n: usize,
    graph: GraphField,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nodes: Option<Vec<NodeField>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edges: Option<Vec<EdgeField>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ranges: Option<RangesField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse(format!("{what}: ragged matrix rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| m.row(r).iter().copied().collect())
        .collect()
}

/// Parse a model JSON document. `base_dir` resolves a relative graph `path`.
pub fn model_from_json(text: &str, base_dir: Option<&Path>) -> Result<Model> {
    let file: ModelFile = serde_json::from_str(text)?;
    let graph = match &file.graph {
        GraphField::Inline { nodes, edges } => Graph::new(*nodes, edges)?,
        GraphField::Path { path } => {
            let p = Path::new(path);
            let resolved = if p.is_relative() {
                base_dir.map(|d| d.join(p)).unwrap_or_else(|| p.to_path_buf())
            } else {
                p.to_path_buf()
            };
            Graph::read_edge_list(&resolved)?
        }
    };
    if let Some(ranges) = &file.ranges {
        let seed = file
            .seed
            .ok_or_else(|| Error::Parse("ranges variant requires a seed".into()))?;
        let ranges = ParamRanges {
            delta: ranges.delta,
            epsilon: ranges.epsilon.unwrap_or((0.0, 0.0)),
            mu: ranges.mu.unwrap_or((0.0, 0.0)),
            gamma: ranges.gamma,
            theta: ranges.theta,
            beta: ranges.beta,
        };
        return Model::sample_from_ranges(graph, file.m, file.n, &ranges, seed);
    }
    let node_fields = file
        .nodes
        .ok_or_else(|| Error::Parse("model file needs either `nodes` or `ranges`".into()))?;
    let mut nodes = Vec::with_capacity(node_fields.len());
    for (i, nf) in node_fields.iter().enumerate() {
        nodes.push(NodeParams {
            recovery: matrix_from_rows(&nf.d, &format!("node {i} D"))?,
            infectious_internal: matrix_from_rows(&nf.e, &format!("node {i} E"))?,
            vigilant_internal: matrix_from_rows(&nf.mu, &format!("node {i} M"))?,
            susceptibility: DVector::from_vec(nf.gamma.clone()),
            vigilance: DVector::from_vec(nf.theta.clone()),
        });
    }
    let edges = file
        .edges
        .unwrap_or_default()
        .into_iter()
        .map(|e| EdgeInfection {
            from: e.from,
            to: e.to,
            beta: DVector::from_vec(e.beta),
        })
        .collect();
    Model::new(graph, file.m, file.n, nodes, edges)
}

/// Serialize a model to the explicit (`nodes` + `edges`) JSON form.
pub fn model_to_json(model: &Model) -> String {
    let file = ModelFile {
        m: model.m(),
        n: model.n(),
        graph: GraphField::Inline {
            nodes: model.node_count(),
            edges: model.graph().edges(),
        },
        nodes: Some(
            model
                .nodes()
                .iter()
                .map(|p| NodeField {
                    d: matrix_to_rows(&p.recovery),
                    e: matrix_to_rows(&p.infectious_internal),
                    mu: matrix_to_rows(&p.vigilant_internal),
                    gamma: p.susceptibility.iter().copied().collect(),
                    theta: p.vigilance.iter().copied().collect(),
                })
                .collect(),
        ),
        edges: Some(
            model
                .infection_edges()
                .into_iter()
                .map(|e| EdgeField {
                    from: e.from,
                    to: e.to,
                    beta: e.beta.iter().copied().collect(),
                })
                .collect(),
        ),
        ranges: None,
        seed: None,
    };
    serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
}

pub fn load_model(path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(path)?;
    model_from_json(&text, path.parent())
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_json(model))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;

    #[test]
    fn degree_matrix_examples() {
        let q = dmatrix![1.0, 2.0; 3.0, 4.0];
        assert_eq!(degree_matrix(&q), DMatrix::from_diagonal(&dvector![3.0, 7.0]));
        let z = DMatrix::<f64>::zeros(2, 3);
        assert_eq!(degree_matrix(&z), DMatrix::zeros(2, 2));
        let one = dmatrix![0.5];
        assert_eq!(degree_matrix(&one), dmatrix![0.5]);
    }

    #[test]
    fn laplacian_examples() {
        let q = dmatrix![0.0, 1.0; 1.0, 0.0];
        assert_eq!(laplacian(&q).unwrap(), dmatrix![1.0, -1.0; -1.0, 1.0]);
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(laplacian(&z).unwrap(), z);
        let q = dmatrix![0.0, 2.0; 0.0, 0.0];
        assert_eq!(laplacian(&q).unwrap(), dmatrix![2.0, -2.0; 0.0, 0.0]);
        assert!(laplacian(&DMatrix::<f64>::zeros(2, 3)).is_err());
    }

    fn toy_model() -> Model {
        let graph = Graph::new(2, &[(0, 1)]).unwrap();
        let node = NodeParams {
            recovery: dmatrix![0.2],
            infectious_internal: dmatrix![0.0],
            vigilant_internal: dmatrix![0.0],
            susceptibility: dvector![0.5],
            vigilance: dvector![0.5],
        };
        Model::homogeneous(graph, 1, 1, node, dvector![0.3]).unwrap()
    }

    #[test]
    fn well_formed_model_validates_clean() {
        let report = toy_model().validate();
        assert!(report.ok);
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn negative_rate_is_an_error() {
        let graph = Graph::new(1, &[]).unwrap();
        let mut node = NodeParams::zeros(1, 1);
        node.recovery[(0, 0)] = -0.1;
        node.susceptibility[0] = 1.0;
        let err = Model::new(graph, 1, 1, vec![node], vec![]).unwrap_err();
        match err {
            Error::InvalidModel(report) => {
                assert!(report.errors.iter().any(|e| e.contains("negative rate")));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn absorbing_vigilant_state_is_a_warning() {
        let graph = Graph::new(1, &[]).unwrap();
        let mut node = NodeParams::zeros(1, 1);
        node.vigilance[0] = 0.4; // theta > 0, gamma = 0, M = [0]
        let model = Model::new(graph, 1, 1, vec![node], vec![]).unwrap();
        let report = model.validate();
        assert!(report.ok);
        assert!(report
            .warnings
            .iter()
            .any(|w| w.contains("absorbing vigilant state")));
    }

    #[test]
    fn nonzero_internal_diagonal_rejected() {
        let graph = Graph::new(1, &[]).unwrap();
        let mut node = NodeParams::zeros(2, 1);
        node.infectious_internal[(0, 0)] = 0.1;
        let err = Model::new(graph, 2, 1, vec![node], vec![]).unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
    }

    #[test]
    fn beta_on_missing_edge_rejected() {
        let graph = Graph::new(2, &[(0, 1)]).unwrap();
        let nodes = vec![NodeParams::zeros(1, 1), NodeParams::zeros(1, 1)];
        let edges = vec![EdgeInfection {
            from: 1,
            to: 0,
            beta: dvector![0.1],
        }];
        let err = Model::new(graph, 1, 1, nodes, edges).unwrap_err();
        match err {
            Error::InvalidModel(report) => {
                assert!(report.errors.iter().any(|e| e.contains("absent edge")));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn zero_m_or_n_rejected() {
        let graph = Graph::new(1, &[]).unwrap();
        assert!(Model::new(graph.clone(), 0, 1, vec![NodeParams::zeros(0, 1)], vec![]).is_err());
        assert!(Model::new(graph, 1, 0, vec![NodeParams::zeros(1, 0)], vec![]).is_err());
    }

    #[test]
    fn ranges_sampling_is_deterministic_and_in_bounds() {
        let graph = Graph::erdos_renyi(6, 0.5, 3).unwrap();
        let ranges = ParamRanges {
            delta: (0.1, 0.4),
            epsilon: (0.0, 0.2),
            mu: (0.0, 0.0),
            gamma: (0.2, 0.7),
            theta: (0.3, 0.8),
            beta: (0.1, 0.4),
        };
        let a = Model::sample_from_ranges(graph.clone(), 2, 1, &ranges, 9).unwrap();
        let b = Model::sample_from_ranges(graph, 2, 1, &ranges, 9).unwrap();
        assert_eq!(a, b);
        for p in a.nodes() {
            assert!(p.recovery.iter().all(|&x| (0.1..=0.4).contains(&x)));
            assert!(p.vigilance.iter().all(|&x| (0.3..=0.8).contains(&x)));
        }
        for e in a.infection_edges() {
            assert!(e.beta.iter().all(|&x| (0.1..=0.4).contains(&x)));
        }
    }

    #[test]
    fn json_round_trip() {
        let model = toy_model();
        let text = model_to_json(&model);
        let back = model_from_json(&text, None).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn json_ranges_variant() {
        let text = r#"{
            "m": 1, "n": 1,
            "graph": { "nodes": 4, "edges": [[0,1],[1,2],[2,3],[3,0]] },
            "ranges": { "delta": [0.1,0.4], "gamma": [0.2,0.7], "theta": [0.3,0.8], "beta": [0.1,0.4] },
            "seed": 11
        }"#;
        let model = model_from_json(text, None).unwrap();
        assert_eq!(model.node_count(), 4);
        assert!(model.validate().ok);
    }

    proptest! {
        #[test]
        fn laplacian_rows_sum_to_zero(rows in proptest::collection::vec(
            proptest::collection::vec(0.0f64..5.0, 4), 4)) {
            let q = matrix_from_rows(&rows, "q").unwrap();
            let l = laplacian(&q).unwrap();
            for r in 0..4 {
                prop_assert!(l.row(r).sum().abs() < 1e-12);
            }
            // -L(Q) is Metzler for nonnegative Q.
            for r in 0..4 {
                for c in 0..4 {
                    if r != c {
                        prop_assert!(-l[(r, c)] >= 0.0);
                    }
                }
            }
        }
    }
}
