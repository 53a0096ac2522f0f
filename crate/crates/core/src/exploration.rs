//! Projection of factors to the data layer, node ranking, tree and
//! subnetwork extraction, and synthetic data generation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;

use crate::corpus::{SparseCountMatrix, Vocabulary};
use crate::distributions::{gamma_unchecked, sample_poisson};
use crate::error::{param, GbnError, Result};
use crate::matrix::ColMatrix;
use crate::model::{GbnNetwork, Link};
use crate::scalar::Real;

/// Layer `t`'s factors expressed over the observed rows.
#[derive(Clone, Debug)]
pub struct ProjectedFactors {
    pub layer: usize,
    /// `Phi^(1) ... Phi^(t)`, `V x K_t`.
    pub matrix: ColMatrix<f64>,
    /// `r^(t) = Phi^(t+1) ... Phi^(T) r`.
    pub weights: Vec<f64>,
}

fn phi64<F: Real>(network: &GbnNetwork<F>, t: usize) -> ColMatrix<f64> {
    let phi = network.phi(t);
    let data = phi.as_slice().iter().map(|x| x.f()).collect();
    ColMatrix::from_col_major(phi.rows(), phi.cols(), data).expect("same shape")
}

fn mat_mul(a: &ColMatrix<f64>, b: &ColMatrix<f64>) -> ColMatrix<f64> {
    let mut out = ColMatrix::zeros(a.rows(), b.cols());
    for c in 0..b.cols() {
        let dst = out.col_mut(c);
        for (k, &w) in b.col(c).iter().enumerate() {
            if w != 0.0 {
                for (d, &x) in dst.iter_mut().zip(a.col(k)) {
                    *d += w * x;
                }
            }
        }
    }
    out
}

fn check_layer<F: Real>(network: &GbnNetwork<F>, t: usize) -> Result<()> {
    if t == 0 || t > network.depth() {
        return Err(param("layer", t as f64, "must lie in 1..=depth"));
    }
    Ok(())
}

/// Node weights `r^(t)` for every layer `t`, pushed down from `r`.
pub fn node_weights<F: Real>(network: &GbnNetwork<F>, t: usize) -> Result<Vec<f64>> {
    check_layer(network, t)?;
    let mut w: Vec<f64> = network.r.iter().map(|x| x.f()).collect();
    for l in (t + 1..=network.depth()).rev() {
        let phi = network.phi(l);
        let mut next = vec![0.0; phi.rows()];
        for (k, &wk) in w.iter().enumerate() {
            for (n, x) in next.iter_mut().zip(phi.col(k)) {
                *n += x.f() * wk;
            }
        }
        w = next;
    }
    Ok(w)
}

pub fn project<F: Real>(network: &GbnNetwork<F>, t: usize) -> Result<ProjectedFactors> {
    check_layer(network, t)?;
    let mut matrix = phi64(network, 1);
    for l in 2..=t {
        matrix = mat_mul(&matrix, &phi64(network, l));
    }
    Ok(ProjectedFactors {
        layer: t,
        matrix,
        weights: node_weights(network, t)?,
    })
}

/// Node indices ordered by decreasing weight; ties keep index order. This
/// is a view; stored indices never change.
pub fn rank_nodes(weights: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
    order
}

/// The `n` most probable rows of column `k` (clamped to `V`), with their
/// probabilities. Ties go to the lower row id.
pub fn top_words(projected: &ProjectedFactors, k: usize, n: usize) -> Result<Vec<(usize, f64)>> {
    if k >= projected.matrix.cols() {
        return Err(param("node", k as f64, "out of range"));
    }
    let col = projected.matrix.col(k);
    let order = rank_nodes(col);
    Ok(order.into_iter().take(n).map(|v| (v, col[v])).collect())
}

/// Plain-text report: one line per node in rank order with its weight and
/// top terms.
pub fn top_words_report(projected: &ProjectedFactors, vocab: &Vocabulary, n: usize) -> Result<String> {
    if vocab.len() != projected.matrix.rows() {
        return Err(GbnError::Shape(format!(
            "vocabulary has {} terms, model has {} rows",
            vocab.len(),
            projected.matrix.rows()
        )));
    }
    let mut out = String::new();
    for (rank, k) in rank_nodes(&projected.weights).into_iter().enumerate() {
        let words: Vec<&str> = top_words(projected, k, n)?
            .into_iter()
            .map(|(v, _)| vocab.term(v))
            .collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{:.6}\t{}",
            NodeId::new(projected.layer, k),
            rank,
            projected.weights[k],
            words.join(" ")
        );
    }
    Ok(out)
}

/// A hidden unit: layer `1..=T`, zero-based index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct NodeId {
    pub layer: usize,
    pub index: usize,
}

impl NodeId {
    pub fn new(layer: usize, index: usize) -> Self {
        Self { layer, index }
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "L{}_{}", self.layer, self.index)
    }
}

impl std::str::FromStr for NodeId {
    type Err = GbnError;

    /// Accepts `layer:index` or `L<layer>_<index>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let body = s.strip_prefix('L').unwrap_or(s);
        let (a, b) = body
            .split_once([':', '_'])
            .ok_or_else(|| GbnError::DegenerateInput(format!("bad node id {s:?}")))?;
        let parse = |x: &str| {
            x.parse::<usize>()
                .map_err(|_| GbnError::DegenerateInput(format!("bad node id {s:?}")))
        };
        Ok(Self::new(parse(a)?, parse(b)?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Edge {
    pub parent: NodeId,
    pub child: NodeId,
    /// `Phi^(t)(k', k)`.
    pub weight: f64,
}

/// Tree (one root) or subnetwork (several roots).
#[derive(Clone, Debug, Serialize)]
pub struct TreeSpec {
    pub roots: Vec<NodeId>,
    /// `tau_t` per layer, indexed from layer 1.
    pub tau: Vec<f64>,
    pub nodes: Vec<NodeId>,
    pub edges: Vec<Edge>,
}

impl TreeSpec {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Graphviz source; pen width is proportional to `sqrt(Phi^(t)(k', k))`.
    pub fn to_dot(&self, label: &dyn Fn(NodeId) -> String) -> String {
        let mut out = String::from("digraph gbn {\n  node [shape=box];\n");
        for n in &self.nodes {
            let _ = writeln!(out, "  {n} [label={:?}];", label(*n));
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  {} -> {} [penwidth={:.4}, weight={:e}];",
                e.parent,
                e.child,
                DOT_PEN_SCALE * e.weight.sqrt(),
                e.weight
            );
        }
        out.push_str("}\n");
        out
    }
}

const DOT_PEN_SCALE: f64 = 5.0;

fn tau_at(tau: &[f64], t: usize) -> f64 {
    tau.get(t - 1).or(tau.last()).copied().unwrap_or(0.0)
}

/// Grow downward from `root`, following edges with
/// `Phi^(t)(k', k) > tau_t / K_{t-1}`. `tau[t - 1]` applies to layer `t`;
/// missing entries repeat the last one.
pub fn extract_tree<F: Real>(network: &GbnNetwork<F>, root: NodeId, tau: &[f64]) -> Result<TreeSpec> {
    extract_subnetwork(network, &[root], tau)
}

/// Union of the trees of `roots`, nodes and edges deduplicated.
pub fn extract_subnetwork<F: Real>(network: &GbnNetwork<F>, roots: &[NodeId], tau: &[f64]) -> Result<TreeSpec> {
    if tau.iter().any(|t| t.is_nan() || *t < 0.0) {
        return Err(param("tau", f64::NAN, "thresholds must be nonnegative"));
    }
    for r in roots {
        check_layer(network, r.layer)?;
        if r.index >= network.width(r.layer) {
            return Err(param("root index", r.index as f64, "out of range"));
        }
    }
    let mut nodes = BTreeSet::new();
    let mut edges = BTreeMap::new();
    let mut queue: VecDeque<NodeId> = VecDeque::new();
    for &r in roots {
        if nodes.insert(r) {
            queue.push_back(r);
        }
    }
    while let Some(node) = queue.pop_front() {
        let t = node.layer;
        if t < 2 {
            continue;
        }
        let phi = network.phi(t);
        let below = phi.rows();
        let threshold = tau_at(tau, t) / below as f64;
        for (kp, w) in phi.col(node.index).iter().enumerate() {
            let w = w.f();
            if w > threshold {
                let child = NodeId::new(t - 1, kp);
                edges.insert((node, child), w);
                if nodes.insert(child) {
                    queue.push_back(child);
                }
            }
        }
    }
    Ok(TreeSpec {
        roots: roots.to_vec(),
        tau: tau.to_vec(),
        nodes: nodes.into_iter().collect(),
        edges: edges
            .into_iter()
            .map(|((parent, child), weight)| Edge { parent, child, weight })
            .collect(),
    })
}

/// Documents drawn by passing `theta^(T) ~ Gam(r, 1/c^(T+1))` down the network.
#[derive(Clone, Debug)]
pub struct Synthetic {
    /// `Phi^(1) theta_j^(1)` per document.
    pub rates: Vec<Vec<f64>>,
    /// Poisson draws (count link) or their indicators (binary link).
    pub observations: Option<SparseCountMatrix>,
}

impl Synthetic {
    /// The `n` largest-rate rows of each document.
    pub fn top_rows(&self, n: usize) -> Vec<Vec<usize>> {
        self.rates
            .iter()
            .map(|r| rank_nodes(r).into_iter().take(n).collect())
            .collect()
    }
}

/// `c` holds `c^(2) .. c^(T+1)`; falls back to the network's stored medians.
pub fn generate_synthetic<F: Real, R: Rng + ?Sized>(
    network: &GbnNetwork<F>,
    num_docs: usize,
    c_override: Option<&[f64]>,
    rng: &mut R,
) -> Result<Synthetic> {
    let depth = network.depth();
    let stored: Option<Vec<f64>> = network.c_medians.as_ref().map(|c| c.iter().map(|x| x.f()).collect());
    let c = c_override
        .map(<[f64]>::to_vec)
        .or(stored)
        .ok_or_else(|| GbnError::DegenerateInput("no scale medians stored and none supplied".into()))?;
    if c.len() != depth {
        return Err(GbnError::Shape(format!("need {depth} scale values, got {}", c.len())));
    }
    if let Some(&bad) = c.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(param("c", bad, "must be positive and finite"));
    }
    let phis: Vec<ColMatrix<f64>> = (1..=depth).map(|t| phi64(network, t)).collect();
    let r: Vec<f64> = network.r.iter().map(|x| x.f()).collect();
    let v_count = network.n_rows();
    let mut rates = Vec::with_capacity(num_docs);
    let mut docs = Vec::with_capacity(num_docs);
    for _ in 0..num_docs {
        let mut theta: Vec<f64> = r.iter().map(|&s| gamma_unchecked(s, 1.0 / c[depth - 1], rng)).collect();
        for t in (1..depth).rev() {
            let phi = &phis[t];
            let mut shape = vec![0.0; phi.rows()];
            for (k, &th) in theta.iter().enumerate() {
                for (s, x) in shape.iter_mut().zip(phi.col(k)) {
                    *s += x * th;
                }
            }
            theta = shape
                .into_iter()
                .map(|s| gamma_unchecked(s.max(f64::MIN_POSITIVE), 1.0 / c[t - 1], rng))
                .collect();
        }
        let mut rate = vec![0.0; v_count];
        for (k, &th) in theta.iter().enumerate() {
            for (d, x) in rate.iter_mut().zip(phis[0].col(k)) {
                *d += x * th;
            }
        }
        let mut doc = Vec::new();
        if matches!(network.link, Link::PoissonCount | Link::BernoulliPoisson) {
            for (v, &l) in rate.iter().enumerate() {
                let n = sample_poisson(l, rng)?;
                if n > 0 {
                    let y = if network.link == Link::BernoulliPoisson { 1 } else { n.min(u32::MAX as u64) as u32 };
                    doc.push((v, y));
                }
            }
        }
        docs.push(doc);
        rates.push(rate);
    }
    let observations = match network.link {
        Link::PoissonRandomizedGamma => None,
        _ => Some(SparseCountMatrix::from_docs(v_count, &docs)?),
    };
    Ok(Synthetic { rates, observations })
}
