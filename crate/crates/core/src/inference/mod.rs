//! Upward-downward Gibbs sampling for all three link functions.
//!
//! One sweep:
//!
//! 1. per document, upward: layer-one latent counts (binary / nonnegative
//!    links), the layer-one partition (collapsed token moves or an explicit
//!    multinomial split), then CRT tables and partitions for every layer
//!    above;
//! 2. factor matrices `Phi^(t)` from the aggregated counts;
//! 3. per document: `p^(2)`, `c^(3..T+1)`, the derived scale chain;
//! 4. `c0`, `gamma0` (with `r` integrated out) and `r`;
//! 5. per document, downward: `theta^(T) .. theta^(1)`.
//!
//! Per-document phases draw from random lanes keyed by (seed, sweep, phase,
//! document), so explicit-mode results do not depend on the thread count.

mod collapsed;
pub mod steps;

use std::sync::Arc;

use log::warn;
use rayon::prelude::*;

use crate::corpus::Observations;
use crate::error::{GbnError, Result};
use crate::matrix::CountMatrix;
use crate::model::{DocCounts, DocLatentState, GbnNetwork, LatentCountState, Link};
use crate::rng::RngStream;
use crate::scalar::Real;
use crate::distributions::gamma_unchecked;

use collapsed::TokenState;
pub use steps::*;

/// How layer one of the count link is sampled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Layer1Mode {
    /// Collapsed for the count link on one thread, explicit otherwise.
    #[default]
    Auto,
    /// Token-level moves with `Phi^(1)` and `theta^(1)` integrated out
    /// (count link only).
    Collapsed,
    /// Multinomial partition given explicit `Phi^(1)`, `theta^(1)`.
    Explicit,
}

#[derive(Clone, Debug)]
pub struct SamplerConfig {
    pub mode: Layer1Mode,
    pub threads: usize,
    /// Check every invariant after each sweep.
    pub validate: bool,
    /// Hold `Phi`, `r`, `gamma0` and `c0` fixed.
    pub freeze_global: bool,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            mode: Layer1Mode::Auto,
            threads: 1,
            validate: false,
            freeze_global: false,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn seeded(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// Observed cells in document-major order.
#[derive(Debug)]
pub(crate) struct Cells {
    pub n_rows: usize,
    pub doc_ptr: Vec<usize>,
    pub rows: Vec<u32>,
    /// Counts (count link) or ones (binary link); empty for real data.
    pub counts: Vec<u32>,
    /// Positive values (nonnegative-real link); empty otherwise.
    pub y: Vec<f64>,
    pub y_totals: Vec<f64>,
}

impl Cells {
    fn build<F: Real>(data: &Observations<F>, link: Link) -> Result<Self> {
        let mismatch = || {
            GbnError::Modality(format!(
                "link {link} cannot be used with {} observations",
                data.kind()
            ))
        };
        match (data, link) {
            (Observations::Counts(m), Link::PoissonCount) | (Observations::Binary(m), Link::BernoulliPoisson) => {
                if link == Link::BernoulliPoisson && !m.is_binary() {
                    return Err(GbnError::Modality("binary observations contain counts above one".into()));
                }
                Ok(Self {
                    n_rows: m.n_terms(),
                    doc_ptr: m.doc_ptr().to_vec(),
                    rows: m.terms().to_vec(),
                    counts: m.counts().to_vec(),
                    y: Vec::new(),
                    y_totals: Vec::new(),
                })
            }
            (Observations::NonnegReal(d), Link::PoissonRandomizedGamma) => {
                let mut doc_ptr = vec![0];
                let mut rows = Vec::new();
                let mut y = Vec::new();
                let mut y_totals = Vec::with_capacity(d.n_cols());
                for j in 0..d.n_cols() {
                    let mut total = 0.0;
                    for (v, &x) in d.col(j).iter().enumerate() {
                        let x = x.f();
                        if x > 0.0 {
                            rows.push(v as u32);
                            y.push(x);
                            total += x;
                        }
                    }
                    y_totals.push(total);
                    doc_ptr.push(rows.len());
                }
                Ok(Self {
                    n_rows: d.n_rows(),
                    doc_ptr,
                    rows,
                    counts: Vec::new(),
                    y,
                    y_totals,
                })
            }
            _ => Err(mismatch()),
        }
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ptr.len() - 1
    }

    pub fn range(&self, j: usize) -> std::ops::Range<usize> {
        self.doc_ptr[j]..self.doc_ptr[j + 1]
    }
}

const PHASE_UP: u64 = 0;
const PHASE_SCALES: u64 = 1;
const PHASE_DOWN: u64 = 2;
const PHASE_TOKENS: u64 = 3;
const PHASE_GROW: u64 = 4;
const PHASES: u64 = 8;

/// Gibbs sampler owning the network, per-document state and latent counts.
#[derive(Clone)]
pub struct GibbsSampler<F> {
    network: GbnNetwork<F>,
    docs: Vec<DocLatentState<F>>,
    counts: LatentCountState,
    cells: Arc<Cells>,
    tokens: Option<TokenState>,
    config: SamplerConfig,
    rng: RngStream,
    sweeps: u64,
    epochs: u64,
    pool: Option<Arc<rayon::ThreadPool>>,
    x1_draws: usize,
}

impl<F: Real> GibbsSampler<F> {
    /// Fresh chain: hidden units 0.1, scales 1, latent counts from one
    /// explicit upward pass.
    pub fn new(network: GbnNetwork<F>, data: &Observations<F>, config: SamplerConfig) -> Result<Self> {
        let widths = network.widths();
        let docs = (0..data.n_docs()).map(|_| DocLatentState::initial(&widths)).collect();
        Self::with_state(network, docs, data, config)
    }

    /// Chain started from the given per-document state.
    pub fn with_state(
        network: GbnNetwork<F>,
        docs: Vec<DocLatentState<F>>,
        data: &Observations<F>,
        config: SamplerConfig,
    ) -> Result<Self> {
        network.validate()?;
        if data.n_rows() != network.n_rows() {
            return Err(GbnError::Shape(format!(
                "data has {} rows, network expects {}",
                data.n_rows(),
                network.n_rows()
            )));
        }
        if docs.len() != data.n_docs() {
            return Err(GbnError::Shape(format!(
                "{} document states for {} documents",
                docs.len(),
                data.n_docs()
            )));
        }
        let widths = network.widths();
        for d in &docs {
            d.validate(&widths)?;
        }
        let cells = Arc::new(Cells::build(data, network.link)?);
        let collapsed = match config.mode {
            Layer1Mode::Auto => network.link == Link::PoissonCount && config.threads <= 1 && !config.freeze_global,
            Layer1Mode::Collapsed => {
                if network.link != Link::PoissonCount {
                    return Err(GbnError::Modality("collapsed sampling needs the count link".into()));
                }
                if config.freeze_global {
                    return Err(GbnError::DegenerateInput(
                        "collapsed sampling integrates Phi^(1) out and cannot hold it fixed".into(),
                    ));
                }
                if config.threads > 1 {
                    warn!("collapsed token sampling is single-threaded; ignoring threads = {}", config.threads);
                }
                true
            }
            Layer1Mode::Explicit => false,
        };
        let pool = if config.threads > 1 {
            Some(Arc::new(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.threads)
                    .build()
                    .map_err(|e| GbnError::DegenerateInput(format!("thread pool: {e}")))?,
            ))
        } else {
            None
        };
        let counts = LatentCountState::zeros(
            network.n_rows(),
            &widths,
            (0..cells.n_docs()).map(|j| cells.range(j).len()),
        );
        let mut sampler = Self {
            rng: RngStream::new(config.seed),
            network,
            docs,
            counts,
            cells,
            tokens: None,
            config,
            sweeps: 0,
            epochs: 0,
            pool,
            x1_draws: 0,
        };
        sampler.initialize(collapsed)?;
        Ok(sampler)
    }

    fn initialize(&mut self, collapsed: bool) -> Result<()> {
        let epoch = self.next_epoch();
        self.upward(epoch, Upward::Initial)?;
        if collapsed {
            // token labels drawn from the explicit partition just made
            let mut rng = RngStream::lane(self.config.seed, epoch * PHASES + PHASE_TOKENS, 0);
            self.tokens = Some(TokenState::from_partition(
                &self.network,
                &self.docs,
                &self.cells,
                &mut self.counts,
                &mut rng,
            )?);
            let epoch = self.next_epoch();
            self.upward(epoch, Upward::Refresh)?;
        }
        Ok(())
    }

    /// Swap in new observations of the same shape (for example, resampled
    /// data in a joint-distribution test); latent counts are rebuilt from
    /// the current parameters.
    pub fn replace_observations(&mut self, data: &Observations<F>) -> Result<()> {
        if data.n_docs() != self.docs.len() || data.n_rows() != self.network.n_rows() {
            return Err(GbnError::Shape("replacement observations change the shape".into()));
        }
        self.cells = Arc::new(Cells::build(data, self.network.link)?);
        let widths = self.network.widths();
        self.counts = LatentCountState::zeros(
            self.network.n_rows(),
            &widths,
            (0..self.cells.n_docs()).map(|j| self.cells.range(j).len()),
        );
        let collapsed = self.tokens.is_some();
        self.tokens = None;
        self.initialize(collapsed)
    }

    pub fn network(&self) -> &GbnNetwork<F> {
        &self.network
    }

    pub fn network_mut(&mut self) -> &mut GbnNetwork<F> {
        &mut self.network
    }

    pub fn into_network(self) -> GbnNetwork<F> {
        self.network
    }

    pub fn docs(&self) -> &[DocLatentState<F>] {
        &self.docs
    }

    pub fn counts(&self) -> &LatentCountState {
        &self.counts
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    pub fn is_collapsed(&self) -> bool {
        self.tokens.is_some()
    }

    /// Truncated-Poisson variates drawn for the binary link in the last sweep.
    pub fn last_x1_draws(&self) -> usize {
        self.x1_draws
    }

    /// Row indices of document `j`'s observed cells.
    pub fn observed_rows(&self, j: usize) -> &[u32] {
        &self.cells.rows[self.cells.range(j)]
    }

    /// Token topic labels of document `j` (collapsed mode only), in
    /// term-then-token order.
    pub fn token_labels(&self, j: usize) -> Option<&[u32]> {
        self.tokens.as_ref().map(|t| t.doc_labels(j))
    }

    /// Medians over documents of `c^(2) .. c^(T+1)`.
    pub fn scale_medians(&self) -> Vec<f64> {
        let depth = self.network.depth();
        (0..depth)
            .map(|i| {
                let mut v: Vec<f64> = self.docs.iter().map(|d| d.c[i].f()).collect();
                median(&mut v)
            })
            .collect()
    }

    fn next_epoch(&mut self) -> u64 {
        self.epochs += 1;
        self.epochs
    }

    /// Run one full sweep.
    pub fn sweep(&mut self) -> Result<()> {
        let epoch = self.next_epoch();
        self.upward(epoch, Upward::Sweep)?;
        if !self.config.freeze_global {
            self.sample_factors();
        }
        self.sample_scales(epoch)?;
        if !self.config.freeze_global {
            self.sample_top();
        }
        self.downward(epoch)?;
        self.sweeps += 1;
        if self.config.validate {
            self.check_invariants()?;
        }
        Ok(())
    }

    pub fn run(&mut self, sweeps: usize) -> Result<()> {
        for _ in 0..sweeps {
            self.sweep()?;
        }
        Ok(())
    }

    /// One collapsed pass over the layer-one tokens with every other
    /// quantity held fixed. Collapsed mode only.
    pub fn resample_tokens(&mut self) -> Result<()> {
        let epoch = self.next_epoch();
        let seed = self.config.seed;
        let tokens = self
            .tokens
            .as_mut()
            .ok_or_else(|| GbnError::DegenerateInput("token moves need collapsed mode".into()))?;
        for (j, (doc, dc)) in self.docs.iter().zip(self.counts.docs.iter_mut()).enumerate() {
            let mut rng = RngStream::lane(seed, epoch * PHASES + PHASE_TOKENS, j as u64);
            let shape = upper_shape(&self.network, doc, 1);
            tokens.sample_doc(j, &self.cells, &shape, &mut dc.m[0], &mut rng);
        }
        tokens.write_row_factor(&mut self.counts.row_factor[0]);
        Ok(())
    }

    fn upward(&mut self, epoch: u64, kind: Upward) -> Result<()> {
        let seed = self.config.seed;
        let network = &self.network;
        let cells = &*self.cells;
        let collapsed = self.tokens.is_some() && kind != Upward::Initial;
        let depth = network.depth();
        let widths = network.widths();
        let resample_x1 = kind != Upward::Refresh;
        let x1_draws = std::sync::atomic::AtomicUsize::new(0);

        if let Some(tokens) = self.tokens.as_mut().filter(|_| collapsed) {
            if kind == Upward::Sweep {
                for (j, (doc, dc)) in self.docs.iter().zip(self.counts.docs.iter_mut()).enumerate() {
                    let mut rng = RngStream::lane(seed, epoch * PHASES + PHASE_UP, j as u64);
                    let shape = upper_shape(network, doc, 1);
                    tokens.sample_doc(j, cells, &shape, &mut dc.m[0], &mut rng);
                }
            }
            tokens.write_row_factor(&mut self.counts.row_factor[0]);
        }

        let zero = || -> Vec<CountMatrix> {
            let mut rows = network.n_rows();
            widths
                .iter()
                .map(|&k| {
                    let m = CountMatrix::zeros(rows, k);
                    rows = k;
                    m
                })
                .collect()
        };
        let op = |j: usize, doc: &mut DocLatentState<F>, dc: &mut DocCounts, acc: &mut Vec<CountMatrix>| -> Result<()> {
            let mut rng = RngStream::lane(seed, epoch * PHASES + PHASE_UP, j as u64);
            let range = cells.range(j);
            let rows = &cells.rows[range.clone()];
            let theta1: Vec<f64> = doc.theta[0].iter().map(|x| x.f()).collect();
            if resample_x1 {
                match network.link {
                    Link::PoissonCount => dc.x1.copy_from_slice(&cells.counts[range.clone()]),
                    Link::BernoulliPoisson => {
                        let n = sample_x1_binary(rows, &network.phi[0], &theta1, j, &mut dc.x1, &mut rng)?;
                        x1_draws.fetch_add(n, std::sync::atomic::Ordering::Relaxed);
                    }
                    Link::PoissonRandomizedGamma => {
                        let a = doc.a.f();
                        sample_x1_real(rows, &cells.y[range.clone()], &network.phi[0], &theta1, a, j, &mut dc.x1, &mut rng)?;
                        doc.a = F::of_positive(sample_a(&dc.x1, cells.y_totals[j], &network.hyper, &mut rng));
                    }
                }
            }
            let kmax = widths.iter().copied().max().unwrap_or(1);
            let mut weights = vec![0.0; kmax];
            let mut buf = vec![0u64; kmax];
            if !collapsed {
                let k1 = widths[0];
                dc.m[0].iter_mut().for_each(|x| *x = 0);
                partition_counts(
                    rows.iter().zip(&dc.x1).map(|(&v, &x)| (v as usize, x)),
                    &network.phi[0],
                    &theta1,
                    1,
                    j,
                    &mut acc[0],
                    &mut dc.m[0],
                    &mut weights[..k1],
                    &mut buf[..k1],
                    &mut rng,
                )?;
            }
            for t in 1..=depth {
                let shape = upper_shape(network, doc, t);
                crt_to_next_layer(&dc.m[t - 1], &shape, &mut dc.next[t - 1], &mut rng)?;
                if t < depth {
                    let k = widths[t];
                    let theta: Vec<f64> = doc.theta[t].iter().map(|x| x.f()).collect();
                    let m_up = &mut dc.m[t];
                    m_up.iter_mut().for_each(|x| *x = 0);
                    partition_counts(
                        dc.next[t - 1].iter().enumerate().map(|(v, &x)| (v, x)),
                        &network.phi[t],
                        &theta,
                        t + 1,
                        j,
                        &mut acc[t],
                        m_up,
                        &mut weights[..k],
                        &mut buf[..k],
                        &mut rng,
                    )?;
                }
            }
            Ok(())
        };

        let pool = if collapsed { None } else { self.pool.as_deref() };
        let acc = for_each_doc_acc(pool, &mut self.docs, &mut self.counts.docs, zero, op)?;
        for (t, a) in acc.into_iter().enumerate() {
            if t == 0 && collapsed {
                continue;
            }
            self.counts.row_factor[t] = a;
        }
        self.x1_draws = x1_draws.into_inner();
        Ok(())
    }

    fn sample_factors(&mut self) {
        for t in 1..=self.network.depth() {
            let eta = self.network.hyper.eta(t).clone();
            self.network.phi[t - 1] = sample_phi(&self.counts.row_factor[t - 1], &eta, &mut self.rng);
        }
    }

    fn sample_scales(&mut self, epoch: u64) -> Result<()> {
        let seed = self.config.seed;
        let network = &self.network;
        let r_total: f64 = network.r.iter().map(|x| x.f()).sum();
        let op = |j: usize, doc: &mut DocLatentState<F>, dc: &mut DocCounts| -> Result<()> {
            let mut rng = RngStream::lane(seed, epoch * PHASES + PHASE_SCALES, j as u64);
            let totals: Vec<f64> = doc.theta.iter().map(|th| th.iter().map(|x| x.f()).sum()).collect();
            let m1: u64 = dc.m[0].iter().map(|&x| x as u64).sum();
            sample_scales(doc, m1, &totals, r_total, &network.hyper, &mut rng);
            Ok(())
        };
        for_each_doc(self.pool.as_deref(), &mut self.docs, &mut self.counts.docs, op)
    }

    fn sample_top(&mut self) {
        let depth = self.network.depth();
        let xtop = self.counts.next_totals(depth);
        let q: f64 = self.docs.iter().map(|d| d.q[depth].f()).sum();
        let k_cap = self.network.top_cap();
        let hyper = self.network.hyper.clone();
        let r: Vec<f64> = self.network.r.iter().map(|x| x.f()).collect();
        let gamma0 = self.network.gamma0.f();
        let c0 = sample_c0(gamma0, &r, k_cap, &hyper, &mut self.rng);
        let gamma0 = sample_gamma0(&xtop, q, gamma0, c0, k_cap, &hyper, &mut self.rng);
        let r = sample_r(&xtop, q, gamma0, c0, k_cap, &mut self.rng);
        self.network.c0 = F::of_positive(c0);
        self.network.gamma0 = F::of_positive(gamma0);
        self.network.r = r.into_iter().map(F::of_positive).collect();
    }

    fn downward(&mut self, epoch: u64) -> Result<()> {
        let seed = self.config.seed;
        let network = &self.network;
        let depth = network.depth();
        let op = |j: usize, doc: &mut DocLatentState<F>, dc: &mut DocCounts| -> Result<()> {
            let mut rng = RngStream::lane(seed, epoch * PHASES + PHASE_DOWN, j as u64);
            for t in (1..=depth).rev() {
                let shape = upper_shape(network, doc, t);
                let rate = doc.c[t - 1].f() + doc.q[t - 1].f();
                let mut out = std::mem::take(&mut doc.theta[t - 1]);
                sample_theta(&shape, &dc.m[t - 1], rate, &mut out, &mut rng);
                doc.theta[t - 1] = out;
            }
            Ok(())
        };
        for_each_doc(self.pool.as_deref(), &mut self.docs, &mut self.counts.docs, op)
    }

    /// Check every network, document-state and latent-count invariant.
    pub fn check_invariants(&self) -> Result<()> {
        self.network.validate()?;
        let widths = self.network.widths();
        for (j, d) in self.docs.iter().enumerate() {
            d.validate(&widths)
                .map_err(|e| GbnError::Invariant(format!("document {j}: {e}")))?;
        }
        let cells = &self.cells;
        self.counts
            .check(&|j| cells.rows[cells.range(j)].iter().map(|&v| v as usize).collect())?;
        for (j, dc) in self.counts.docs.iter().enumerate() {
            let range = cells.range(j);
            match self.network.link {
                Link::PoissonCount => {
                    if dc.x1[..] != cells.counts[range] {
                        return Err(GbnError::Invariant(format!("document {j}: x1 differs from the data")));
                    }
                }
                _ => {
                    if dc.x1.iter().any(|&x| x == 0) {
                        return Err(GbnError::Invariant(format!(
                            "document {j}: zero latent count on a positive observation"
                        )));
                    }
                }
            }
        }
        if let Some(tokens) = &self.tokens {
            tokens.check(&self.cells, &self.counts)?;
        }
        Ok(())
    }

    /// Remove the top layer's factors that explain no counts. Returns the
    /// kept factor indices (in their original order).
    pub fn prune_top(&mut self) -> Vec<usize> {
        let depth = self.network.depth();
        let totals = self.counts.factor_totals(depth);
        let r: Vec<f64> = self.network.r.iter().map(|x| x.f()).collect();
        let keep = crate::training::active_factors(&totals, &r);
        if totals.iter().all(|&x| x == 0) {
            warn!("every factor of layer {depth} is inactive; keeping factor {} with the largest weight", keep[0]);
        }
        if keep.len() == totals.len() {
            return keep;
        }
        let t = depth - 1;
        self.network.phi[t] = self.network.phi[t].select_cols(&keep);
        self.network.r = keep.iter().map(|&k| self.network.r[k]).collect();
        self.counts.row_factor[t] = self.counts.row_factor[t].select_cols(&keep);
        for d in &mut self.docs {
            d.theta[t] = keep.iter().map(|&k| d.theta[t][k]).collect();
        }
        for dc in &mut self.counts.docs {
            dc.m[t] = keep.iter().map(|&k| dc.m[t][k]).collect();
            dc.next[t] = keep.iter().map(|&k| dc.next[t][k]).collect();
        }
        if depth == 1 {
            if let Some(tokens) = &mut self.tokens {
                tokens.remap(&keep);
            }
        }
        keep
    }

    /// Stack a new top layer (width cap = current top width) with its
    /// factors, `r` and hidden units drawn from the prior, then rebuild the
    /// counts above layer one.
    pub fn grow(&mut self) -> Result<()> {
        self.network.add_layer(&mut self.rng)?;
        let epoch = self.next_epoch();
        let depth = self.network.depth();
        let k = self.network.top_width();
        let r: Vec<f64> = self.network.r.iter().map(|x| x.f()).collect();
        let seed = self.config.seed;
        for (j, d) in self.docs.iter_mut().enumerate() {
            let mut rng = RngStream::lane(seed, epoch * PHASES + PHASE_GROW, j as u64);
            d.c.push(F::one());
            d.q.push(F::one());
            d.theta
                .push(r.iter().map(|&s| F::of_positive(gamma_unchecked(s, 1.0, &mut rng))).collect());
            d.derive_probabilities();
        }
        self.counts.row_factor.push(CountMatrix::zeros(k, k));
        for dc in &mut self.counts.docs {
            dc.m.push(vec![0; k]);
            dc.next.push(vec![0; k]);
        }
        debug_assert_eq!(self.network.depth(), depth);
        self.upward(epoch, Upward::Refresh)
    }

    /// Replace the network's global parameters keeping the structure.
    pub fn set_network(&mut self, network: GbnNetwork<F>) -> Result<()> {
        if network.widths() != self.network.widths() || network.link != self.network.link {
            return Err(GbnError::Shape("replacement network changes the structure".into()));
        }
        network.validate()?;
        self.network = network;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Upward {
    /// First pass: explicit partition everywhere, x1 sampled.
    Initial,
    /// Regular sweep.
    Sweep,
    /// Rebuild counts above the stored layer-one state without moving it.
    Refresh,
}

/// Gamma shapes feeding layer `t` from above: `Phi^(t+1) theta^(t+1)`, or
/// `r` at the top.
pub(crate) fn upper_shape<F: Real>(network: &GbnNetwork<F>, doc: &DocLatentState<F>, t: usize) -> Vec<f64> {
    if t == network.depth() {
        network.r.iter().map(|x| x.f()).collect()
    } else {
        let theta: Vec<f64> = doc.theta[t].iter().map(|x| x.f()).collect();
        let mut out = vec![0.0; network.phi[t].rows()];
        mat_vec(&network.phi[t], &theta, &mut out);
        out
    }
}

fn for_each_doc<F, Op>(
    pool: Option<&rayon::ThreadPool>,
    docs: &mut [DocLatentState<F>],
    counts: &mut [DocCounts],
    op: Op,
) -> Result<()>
where
    F: Real,
    Op: Fn(usize, &mut DocLatentState<F>, &mut DocCounts) -> Result<()> + Sync,
{
    match pool {
        None => docs
            .iter_mut()
            .zip(counts.iter_mut())
            .enumerate()
            .try_for_each(|(j, (d, c))| op(j, d, c)),
        Some(pool) => pool.install(|| {
            docs.par_iter_mut()
                .zip(counts.par_iter_mut())
                .enumerate()
                .try_for_each(|(j, (d, c))| op(j, d, c))
        }),
    }
}

fn for_each_doc_acc<F, Z, Op>(
    pool: Option<&rayon::ThreadPool>,
    docs: &mut [DocLatentState<F>],
    counts: &mut [DocCounts],
    zero: Z,
    op: Op,
) -> Result<Vec<CountMatrix>>
where
    F: Real,
    Z: Fn() -> Vec<CountMatrix> + Sync,
    Op: Fn(usize, &mut DocLatentState<F>, &mut DocCounts, &mut Vec<CountMatrix>) -> Result<()> + Sync,
{
    match pool {
        None => {
            let mut acc = zero();
            for (j, (d, c)) in docs.iter_mut().zip(counts.iter_mut()).enumerate() {
                op(j, d, c, &mut acc)?;
            }
            Ok(acc)
        }
        Some(pool) => {
            let min_len = (docs.len() / (4 * pool.current_num_threads()).max(1)).max(1);
            pool.install(|| {
                docs.par_iter_mut()
                    .zip(counts.par_iter_mut())
                    .enumerate()
                    .with_min_len(min_len)
                    .try_fold(&zero, |mut acc, (j, (d, c))| {
                        op(j, d, c, &mut acc)?;
                        Ok(acc)
                    })
                    .try_reduce(&zero, |mut a, b| {
                        for (x, y) in a.iter_mut().zip(&b) {
                            for (p, q) in x.as_mut_slice().iter_mut().zip(y.as_slice()) {
                                *p += q;
                            }
                        }
                        Ok(a)
                    })
            })
        }
    }
}

pub(crate) fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
