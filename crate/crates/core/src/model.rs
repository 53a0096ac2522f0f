//! Network parameters, per-document latent state and the model file format.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{dirichlet_unchecked, gamma_unchecked};
use crate::error::{param, GbnError, Result};
use crate::matrix::{ColMatrix, CountMatrix};
use crate::scalar::Real;

pub const MODEL_VERSION: &str = "gbn-model/1";

/// How the first hidden layer generates the observations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Link {
    /// `x ~ Pois(Phi theta)`.
    PoissonCount,
    /// `b = 1(x >= 1)`, `x ~ Pois(Phi theta)`.
    BernoulliPoisson,
    /// `y ~ Gam(x, 1/a)`, `x ~ Pois(Phi theta)`.
    PoissonRandomizedGamma,
}

impl Link {
    pub fn as_str(&self) -> &'static str {
        match self {
            Link::PoissonCount => "poisson-count",
            Link::BernoulliPoisson => "bernoulli-poisson",
            Link::PoissonRandomizedGamma => "poisson-randomized-gamma",
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Link {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "poisson" | "poisson-count" | "count" | "counts" | "pfa" => Ok(Link::PoissonCount),
            "bernoulli" | "bernoulli-poisson" | "binary" | "berpo" => Ok(Link::BernoulliPoisson),
            "prg" | "poisson-randomized-gamma" | "real" | "nonneg-real" => Ok(Link::PoissonRandomizedGamma),
            other => Err(format!("unknown link {other:?}")),
        }
    }
}

/// Dirichlet concentration of one layer's factor columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Concentration {
    Symmetric(f64),
    PerRow(Vec<f64>),
}

impl Concentration {
    #[inline]
    pub fn at(&self, row: usize) -> f64 {
        match self {
            Concentration::Symmetric(e) => *e,
            Concentration::PerRow(v) => v[row],
        }
    }

    pub fn total(&self, rows: usize) -> f64 {
        match self {
            Concentration::Symmetric(e) => *e * rows as f64,
            Concentration::PerRow(v) => v.iter().sum(),
        }
    }

    fn validate(&self, rows: usize) -> Result<()> {
        match self {
            Concentration::Symmetric(e) if !(*e > 0.0 && e.is_finite()) => {
                Err(param("eta", *e, "must be positive"))
            }
            Concentration::PerRow(v) if v.len() != rows => Err(GbnError::Shape(format!(
                "per-row eta has {} entries, layer has {rows} rows",
                v.len()
            ))),
            Concentration::PerRow(v) => match v.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
                Some(e) => Err(param("eta", *e, "must be positive")),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// One entry per layer; the last entry is reused for deeper layers.
    pub eta: Vec<Concentration>,
    pub a0: f64,
    pub b0: f64,
    pub e0: f64,
    pub f0: f64,
    pub gamma0_init: f64,
    pub c0_init: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            eta: vec![Concentration::Symmetric(0.05)],
            a0: 0.01,
            b0: 0.01,
            e0: 1.0,
            f0: 1.0,
            gamma0_init: 1.0,
            c0_init: 1.0,
        }
    }
}

impl Hyperparams {
    pub fn with_eta(eta: f64) -> Self {
        Self {
            eta: vec![Concentration::Symmetric(eta)],
            ..Self::default()
        }
    }

    /// Concentration for layer `t` (1-based).
    pub fn eta(&self, t: usize) -> &Concentration {
        let i = (t - 1).min(self.eta.len() - 1);
        &self.eta[i]
    }

    pub fn validate(&self) -> Result<()> {
        if self.eta.is_empty() {
            return Err(GbnError::DegenerateInput("no eta given".into()));
        }
        for (name, v) in [
            ("a0", self.a0),
            ("b0", self.b0),
            ("e0", self.e0),
            ("f0", self.f0),
            ("gamma0_init", self.gamma0_init),
            ("c0_init", self.c0_init),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(param(name, v, "hyperparameters must be positive"));
            }
        }
        for e in &self.eta {
            if let Concentration::Symmetric(_) = e {
                e.validate(0)?;
            }
        }
        Ok(())
    }
}

/// Global parameters of a gamma belief network with `T` hidden layers.
#[derive(Clone, Debug, PartialEq)]
pub struct GbnNetwork<F> {
    pub link: Link,
    pub hyper: Hyperparams,
    /// `phi[t-1]` is the `K_{t-1} x K_t` matrix of layer `t`; columns sum to one.
    pub phi: Vec<ColMatrix<F>>,
    /// Gamma shapes of the top layer's hidden units (length `K_T`).
    pub r: Vec<F>,
    pub gamma0: F,
    pub c0: F,
    /// Width caps `K_tmax` each layer was grown with.
    pub width_caps: Vec<usize>,
    /// Per-layer medians of the inferred document scales `c^(2) .. c^(T+1)`.
    pub c_medians: Option<Vec<F>>,
    /// Resolved run configuration, echoed into the model file.
    pub config: BTreeMap<String, String>,
}

impl<F: Real> GbnNetwork<F> {
    /// Single-hidden-layer network with `k1max` factors drawn from the prior.
    pub fn init<R: Rng + ?Sized>(
        n_rows: usize,
        k1max: usize,
        link: Link,
        hyper: Hyperparams,
        rng: &mut R,
    ) -> Result<Self> {
        if n_rows == 0 {
            return Err(param("V", 0.0, "need at least one row"));
        }
        if k1max == 0 {
            return Err(param("k1max", 0.0, "need at least one factor"));
        }
        hyper.validate()?;
        hyper.eta(1).validate(n_rows)?;
        let phi = draw_factor_matrix(hyper.eta(1), n_rows, k1max, rng);
        let gamma0 = hyper.gamma0_init;
        let c0 = hyper.c0_init;
        let r = (0..k1max)
            .map(|_| F::of_positive(gamma_unchecked(gamma0 / k1max as f64, 1.0 / c0, rng)))
            .collect();
        Ok(Self {
            link,
            hyper,
            phi: vec![phi],
            r,
            gamma0: F::of(gamma0),
            c0: F::of(c0),
            width_caps: vec![k1max],
            c_medians: None,
            config: BTreeMap::new(),
        })
    }

    /// Stack a new top layer whose width cap is the current top width.
    /// Its factor columns and `r` are drawn from the prior.
    pub fn add_layer<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let below = self.top_width();
        let t = self.depth() + 1;
        self.hyper.eta(t).validate(below)?;
        let phi = draw_factor_matrix(self.hyper.eta(t), below, below, rng);
        self.phi.push(phi);
        self.width_caps.push(below);
        let shape = self.gamma0.f() / below as f64;
        let scale = 1.0 / self.c0.f();
        self.r = (0..below)
            .map(|_| F::of_positive(gamma_unchecked(shape, scale, rng)))
            .collect();
        self.c_medians = None;
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.phi.len()
    }

    /// `V`, the number of observed rows.
    pub fn n_rows(&self) -> usize {
        self.phi[0].rows()
    }

    /// `K_1 .. K_T`.
    pub fn widths(&self) -> Vec<usize> {
        self.phi.iter().map(|p| p.cols()).collect()
    }

    pub fn width(&self, t: usize) -> usize {
        if t == 0 {
            self.n_rows()
        } else {
            self.phi[t - 1].cols()
        }
    }

    pub fn top_width(&self) -> usize {
        self.phi.last().map(|p| p.cols()).unwrap_or(0)
    }

    /// `Phi^(t)`, 1-based.
    pub fn phi(&self, t: usize) -> &ColMatrix<F> {
        &self.phi[t - 1]
    }

    /// Number of factors the top-layer shape prior `Gam(gamma0 / K, 1/c0)`
    /// is spread over: the cap the top layer was grown with.
    pub fn top_cap(&self) -> usize {
        self.width_caps.last().copied().unwrap_or(1).max(1)
    }

    /// Check every structural invariant.
    pub fn validate(&self) -> Result<()> {
        if self.phi.is_empty() {
            return Err(GbnError::Invariant("network has no layers".into()));
        }
        if self.width_caps.len() != self.phi.len() {
            return Err(GbnError::Invariant(format!(
                "{} width caps for {} layers",
                self.width_caps.len(),
                self.phi.len()
            )));
        }
        for (i, phi) in self.phi.iter().enumerate() {
            let t = i + 1;
            if i > 0 && phi.rows() != self.phi[i - 1].cols() {
                return Err(GbnError::Invariant(format!(
                    "layer {t} has {} rows but layer {} has {} factors",
                    phi.rows(),
                    i,
                    self.phi[i - 1].cols()
                )));
            }
            if phi.cols() == 0 {
                return Err(GbnError::Invariant(format!("layer {t} has no factors")));
            }
            for (k, col) in phi.columns().enumerate() {
                let mut sum = 0.0;
                for &x in col {
                    let x = x.f();
                    if !(0.0..=1.0).contains(&x) {
                        return Err(GbnError::Invariant(format!(
                            "Phi^({t})[.., {k}] has entry {x} outside [0, 1]"
                        )));
                    }
                    sum += x;
                }
                if (sum - 1.0).abs() > F::STOCHASTIC_TOL {
                    return Err(GbnError::Invariant(format!(
                        "Phi^({t}) column {k} sums to {sum}"
                    )));
                }
            }
        }
        if self.r.len() != self.top_width() {
            return Err(GbnError::Invariant(format!(
                "r has {} entries, top layer has {} factors",
                self.r.len(),
                self.top_width()
            )));
        }
        if let Some(x) = self.r.iter().find(|x| !(x.f() > 0.0 && x.f().is_finite())) {
            return Err(GbnError::Invariant(format!("r entry {x} not strictly positive")));
        }
        for (name, v) in [("gamma0", self.gamma0), ("c0", self.c0)] {
            if !(v.f() > 0.0 && v.f().is_finite()) {
                return Err(GbnError::Invariant(format!("{name} = {v} not strictly positive")));
            }
        }
        if let Some(c) = &self.c_medians {
            if c.len() != self.depth() {
                return Err(GbnError::Invariant(format!(
                    "{} c medians for {} layers",
                    c.len(),
                    self.depth()
                )));
            }
        }
        Ok(())
    }

    /// Convert the stored precision.
    pub fn cast<G: Real>(&self) -> GbnNetwork<G> {
        GbnNetwork {
            link: self.link,
            hyper: self.hyper.clone(),
            phi: self
                .phi
                .iter()
                .map(|p| {
                    let cols = p
                        .columns()
                        .map(|c| normalized::<G>(c.iter().map(|x| x.f())))
                        .collect();
                    ColMatrix::from_columns(p.rows(), cols).expect("same shape")
                })
                .collect(),
            r: self.r.iter().map(|x| G::of_positive(x.f())).collect(),
            gamma0: G::of_positive(self.gamma0.f()),
            c0: G::of_positive(self.c0.f()),
            width_caps: self.width_caps.clone(),
            c_medians: self
                .c_medians
                .as_ref()
                .map(|c| c.iter().map(|x| G::of(x.f())).collect()),
            config: self.config.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            version: MODEL_VERSION.to_string(),
            precision: F::NAME.to_string(),
            link: self.link,
            hyper: self.hyper.clone(),
            widths: self.widths(),
            width_caps: self.width_caps.clone(),
            r: self.r.iter().map(|x| x.f()).collect(),
            gamma0: self.gamma0.f(),
            c0: self.c0.f(),
            phi: self
                .phi
                .iter()
                .map(|p| p.as_slice().iter().map(|x| x.f()).collect())
                .collect(),
            c_medians: self
                .c_medians
                .as_ref()
                .map(|c| c.iter().map(|x| x.f()).collect()),
            config: self.config.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Parse and validate a model file. Nothing is returned unless the
    /// version matches and every invariant holds.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value.get("version").and_then(|v| v.as_str()).unwrap_or("<missing>");
        if version != MODEL_VERSION {
            return Err(GbnError::ModelVersion {
                found: version.to_string(),
                expected: MODEL_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_value(value)?;
        if file.phi.len() != file.widths.len() || file.phi.is_empty() {
            return Err(GbnError::Invariant(format!(
                "{} factor matrices for {} widths",
                file.phi.len(),
                file.widths.len()
            )));
        }
        let mut phi = Vec::with_capacity(file.phi.len());
        let mut rows = file.phi[0].len() / file.widths[0].max(1);
        for (t, (data, &k)) in file.phi.into_iter().zip(&file.widths).enumerate() {
            let m = ColMatrix::from_col_major(rows, k, data.into_iter().map(F::of).collect())
                .ok_or_else(|| GbnError::Invariant(format!("layer {} factor matrix is not {rows} x {k}", t + 1)))?;
            phi.push(m);
            rows = k;
        }
        let net = Self {
            link: file.link,
            hyper: file.hyper,
            phi,
            r: file.r.into_iter().map(F::of).collect(),
            gamma0: F::of(file.gamma0),
            c0: F::of(file.c0),
            width_caps: file.width_caps,
            c_medians: file.c_medians.map(|c| c.into_iter().map(F::of).collect()),
            config: file.config,
        };
        net.validate()?;
        Ok(net)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: String,
    precision: String,
    link: Link,
    hyper: Hyperparams,
    widths: Vec<usize>,
    width_caps: Vec<usize>,
    r: Vec<f64>,
    gamma0: f64,
    c0: f64,
    /// Per layer, column-major.
    phi: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c_medians: Option<Vec<f64>>,
    #[serde(default)]
    config: BTreeMap<String, String>,
}

pub(crate) fn normalized<F: Real>(values: impl Iterator<Item = f64>) -> Vec<F> {
    let v: Vec<f64> = values.collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| F::of(x / s)).collect()
}

pub(crate) fn draw_factor_matrix<F: Real, R: Rng + ?Sized>(
    eta: &Concentration,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> ColMatrix<F> {
    let mut buf = vec![0.0; rows];
    let mut out = ColMatrix::zeros(rows, cols);
    for k in 0..cols {
        dirichlet_unchecked((0..rows).map(|v| eta.at(v)), &mut buf, rng);
        store_column(out.col_mut(k), &buf);
    }
    out
}

/// Narrow a probability vector into `F`, renormalizing after the cast.
/// Entries are kept strictly positive so that no row can lose all its
/// mass to underflow.
pub(crate) fn store_column<F: Real>(dst: &mut [F], src: &[f64]) {
    if F::NAME == "f64" {
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = F::of_positive(s);
        }
        return;
    }
    let narrowed: Vec<f64> = src.iter().map(|&s| F::of_positive(s).f()).collect();
    let sum: f64 = narrowed.iter().sum();
    for (d, s) in dst.iter_mut().zip(narrowed) {
        *d = F::of_positive(s / sum);
    }
}

/// Per-document hidden units and scales of a `T`-layer network.
#[derive(Clone, Debug, PartialEq)]
pub struct DocLatentState<F> {
    /// `theta[t-1]` = `theta_j^(t)`, length `K_t`.
    pub theta: Vec<Vec<F>>,
    /// `p_j^(2)`.
    pub p2: F,
    /// `c[i]` = `c_j^(i+2)`, for `i = 0..T`; `c[0] = (1 - p2) / p2`.
    pub c: Vec<F>,
    /// `q[i]` = `-ln(1 - p_j^(i+1))`, for `i = 0..=T`; `q[0] = 1`.
    pub q: Vec<F>,
    /// Gamma rate of the nonnegative-real link (unused by the other links).
    pub a: F,
}

impl<F: Real> DocLatentState<F> {
    /// Initial state: every hidden unit 0.1, every scale `c = 1`.
    pub fn initial(widths: &[usize]) -> Self {
        let depth = widths.len();
        let mut s = Self {
            theta: widths.iter().map(|&k| vec![F::of(0.1); k]).collect(),
            p2: F::of(0.5),
            c: vec![F::one(); depth],
            q: vec![F::one(); depth + 1],
            a: F::one(),
        };
        s.derive_probabilities();
        s
    }

    pub fn depth(&self) -> usize {
        self.theta.len()
    }

    /// `p_j^(t)` for `t = 1 ..= T+1`.
    pub fn p(&self, t: usize) -> f64 {
        -(-self.q[t - 1].f()).exp_m1()
    }

    /// Recompute `c^(2)` from `p2` and `p^(t)` for `t >= 3` from the scale
    /// recursion `p^(t+1) = -ln(1 - p^(t)) / (c^(t+1) - ln(1 - p^(t)))`.
    pub fn derive_probabilities(&mut self) {
        let p2 = self.p2.f();
        self.c[0] = F::of_positive((1.0 - p2) / p2);
        self.q[0] = F::one();
        // -ln(1 - p^(t+1)) = ln(1 + q_t / c^(t+1))
        self.q[1] = F::of_positive(-(-p2).ln_1p());
        for t in 2..self.q.len() {
            let q = self.q[t - 1].f();
            let c = self.c[t - 1].f();
            self.q[t] = F::of_positive((q / c).ln_1p());
        }
    }

    pub fn validate(&self, widths: &[usize]) -> Result<()> {
        let depth = widths.len();
        if self.theta.len() != depth || self.c.len() != depth || self.q.len() != depth + 1 {
            return Err(GbnError::Invariant(format!(
                "document state shaped for {} layers, network has {depth}",
                self.theta.len()
            )));
        }
        for (t, (th, &k)) in self.theta.iter().zip(widths).enumerate() {
            if th.len() != k {
                return Err(GbnError::Invariant(format!(
                    "theta^({}) has {} entries, layer has {k}",
                    t + 1,
                    th.len()
                )));
            }
            if let Some(x) = th.iter().find(|x| !(x.f() > 0.0 && x.f().is_finite())) {
                return Err(GbnError::Invariant(format!("theta^({}) entry {x} not positive", t + 1)));
            }
        }
        let p2 = self.p2.f();
        if !(p2 > 0.0 && p2 < 1.0) {
            return Err(GbnError::Invariant(format!("p2 = {p2} outside (0, 1)")));
        }
        if let Some(c) = self.c.iter().find(|c| !(c.f() > 0.0 && c.f().is_finite())) {
            return Err(GbnError::Invariant(format!("scale c = {c} not positive")));
        }
        // stored values are rounded to F; recompute the chain in f64 and compare
        let rel = 1e3 * F::epsilon().f();
        let close = |got: f64, want: f64| (got - want).abs() <= rel * want.abs() + 10.0 * F::TINY;
        let c2 = (1.0 - p2) / p2;
        if !close(self.c[0].f(), c2) {
            return Err(GbnError::Invariant(format!("c^(2) = {} but (1-p2)/p2 = {c2}", self.c[0])));
        }
        if self.q[0].f() != 1.0 {
            return Err(GbnError::Invariant("p^(1) differs from 1 - e^-1".into()));
        }
        for t in 1..=depth + 1 {
            let p = self.p(t);
            if !(p > 0.0 && p < 1.0) {
                return Err(GbnError::Invariant(format!("p^({t}) = {p} outside (0, 1)")));
            }
        }
        for t in 1..=depth {
            // -ln(1 - p^(t+1)) = ln(1 + q_t / c^(t+1))
            let want = (self.q[t - 1].f() / self.c[t - 1].f()).ln_1p();
            if !close(self.q[t].f(), want) {
                return Err(GbnError::Invariant(format!(
                    "p^({}) = {} breaks the scale recursion",
                    t + 1,
                    self.p(t + 1)
                )));
            }
        }
        if !(self.a.f() > 0.0 && self.a.f().is_finite()) {
            return Err(GbnError::Invariant(format!("a = {} not positive", self.a)));
        }
        Ok(())
    }
}

/// Augmented counts of one document.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DocCounts {
    /// `x_vj^(1)` on the document's observed (nonzero) cells, in storage order.
    pub x1: Vec<u32>,
    /// `m[t-1]` = `m_j^(t)(t+1)`, i.e. `x_{.jk}^(t)`, length `K_t`.
    pub m: Vec<Vec<u32>>,
    /// `next[t-1]` = `x_j^(t+1)`, the CRT table counts, length `K_t`.
    pub next: Vec<Vec<u32>>,
}

impl DocCounts {
    pub fn zeros(nnz: usize, widths: &[usize]) -> Self {
        Self {
            x1: vec![0; nnz],
            m: widths.iter().map(|&k| vec![0; k]).collect(),
            next: widths.iter().map(|&k| vec![0; k]).collect(),
        }
    }

    /// `x_{.j}^(t)` for `t = 1 ..= T+1`.
    pub fn layer_totals(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.next.len() + 1);
        out.push(self.x1.iter().map(|&x| x as u64).sum());
        out.extend(self.next.iter().map(|n| n.iter().map(|&x| x as u64).sum::<u64>()));
        out
    }
}

/// All augmented counts of the network: per-document vectors plus the
/// per-layer `x_{v.k}^(t)` aggregates the factor updates need.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentCountState {
    /// `row_factor[t-1]` = `x_{v.k}^(t)`, a `K_{t-1} x K_t` matrix.
    pub row_factor: Vec<CountMatrix>,
    pub docs: Vec<DocCounts>,
}

impl LatentCountState {
    pub fn zeros(n_rows: usize, widths: &[usize], nnz_per_doc: impl Iterator<Item = usize>) -> Self {
        let mut rows = n_rows;
        let row_factor = widths
            .iter()
            .map(|&k| {
                let m = CountMatrix::zeros(rows, k);
                rows = k;
                m
            })
            .collect();
        Self {
            row_factor,
            docs: nnz_per_doc.map(|n| DocCounts::zeros(n, widths)).collect(),
        }
    }

    /// `sum_j x_.j^(t)` for `t = 1 ..= T+1`.
    pub fn layer_totals(&self) -> Vec<u64> {
        let depth = self.row_factor.len();
        let mut out = vec![0u64; depth + 1];
        for d in &self.docs {
            for (o, x) in out.iter_mut().zip(d.layer_totals()) {
                *o += x;
            }
        }
        out
    }

    /// `x_{..k}^(t)`: how many layer-`t` counts each factor explains.
    pub fn factor_totals(&self, t: usize) -> Vec<u64> {
        self.row_factor[t - 1].col_sums()
    }

    /// `x_{k.}^(t+1)` summed over documents, for `t = 1..=T`.
    pub fn next_totals(&self, t: usize) -> Vec<u64> {
        let k = self.row_factor[t - 1].cols();
        let mut out = vec![0u64; k];
        for d in &self.docs {
            for (o, &x) in out.iter_mut().zip(&d.next[t - 1]) {
                *o += x as u64;
            }
        }
        out
    }

    /// Check the conservation identities against the layer-one counts.
    ///
    /// * `m_.j^(t)(t+1) = x_.j^(t)` for every document and layer;
    /// * `0 <= x_kj^(t+1) <= m_kj^(t)(t+1)`, zero iff `m` is zero;
    /// * `x_{v.k}^(t)` sums over `k` to `sum_j x_vj^(t)` and over `v` to
    ///   `sum_j m_kj^(t)(t+1)`.
    ///
    /// `x1_rows[j]` lists the row index of each observed cell of document `j`.
    pub fn check(&self, x1_rows: &dyn Fn(usize) -> Vec<usize>) -> Result<()> {
        let depth = self.row_factor.len();
        let mut row_totals: Vec<Vec<u64>> = self.row_factor.iter().map(|m| vec![0; m.rows()]).collect();
        let mut factor_totals: Vec<Vec<u64>> = self.row_factor.iter().map(|m| vec![0; m.cols()]).collect();
        for (j, d) in self.docs.iter().enumerate() {
            if d.m.len() != depth || d.next.len() != depth {
                return Err(GbnError::Invariant(format!("document {j} has counts for the wrong depth")));
            }
            let rows = x1_rows(j);
            if rows.len() != d.x1.len() {
                return Err(GbnError::Invariant(format!("document {j}: x1 misaligned with observed cells")));
            }
            for (&v, &x) in rows.iter().zip(&d.x1) {
                row_totals[0][v] += x as u64;
            }
            let mut below: u64 = d.x1.iter().map(|&x| x as u64).sum();
            for t in 0..depth {
                let m = &d.m[t];
                let next = &d.next[t];
                if m.len() != self.row_factor[t].cols() || next.len() != m.len() {
                    return Err(GbnError::Invariant(format!("document {j}, layer {}: width mismatch", t + 1)));
                }
                let msum: u64 = m.iter().map(|&x| x as u64).sum();
                if msum != below {
                    return Err(GbnError::Invariant(format!(
                        "document {j}, layer {}: m sums to {msum} but x sums to {below}",
                        t + 1
                    )));
                }
                for (k, (&mk, &xk)) in m.iter().zip(next).enumerate() {
                    if xk > mk || ((xk == 0) != (mk == 0)) {
                        return Err(GbnError::Invariant(format!(
                            "document {j}, layer {}, factor {k}: CRT count {xk} vs {mk} customers",
                            t + 1
                        )));
                    }
                    factor_totals[t][k] += mk as u64;
                    if t + 1 < depth {
                        row_totals[t + 1][k] += xk as u64;
                    }
                }
                below = next.iter().map(|&x| x as u64).sum();
            }
        }
        for t in 0..depth {
            let rf = &self.row_factor[t];
            if rf.row_sums() != row_totals[t] {
                return Err(GbnError::Invariant(format!(
                    "layer {}: row aggregates do not conserve the layer's counts",
                    t + 1
                )));
            }
            if rf.col_sums() != factor_totals[t] {
                return Err(GbnError::Invariant(format!(
                    "layer {}: factor aggregates disagree with per-document counts",
                    t + 1
                )));
            }
        }
        Ok(())
    }
}
