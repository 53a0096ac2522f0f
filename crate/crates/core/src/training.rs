//! Layer-wise network growth with width inference, and fixed-structure runs.

use std::time::Instant;

use log::{debug, info};
use serde::Serialize;

use crate::corpus::Observations;
use crate::error::{param, Result};
use crate::inference::{GibbsSampler, Layer1Mode, SamplerConfig};
use crate::model::{GbnNetwork, Hyperparams, Link};
use crate::rng::RngStream;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSchedule {
    /// Maximum depth.
    pub t_max: usize,
    /// Width cap of the first layer.
    pub k1max: usize,
    /// Sweeps before pruning, per depth (the last entry repeats).
    pub burnin: Vec<usize>,
    /// Sweeps after pruning, per depth (the last entry repeats).
    pub post: Vec<usize>,
    pub seed: u64,
    pub threads: usize,
    pub mode: Layer1Mode,
    /// Check invariants after every sweep.
    pub validate: bool,
    /// Stop growing once the top layer's table count `sum_j x_.j^(T+1)`
    /// falls below this many.
    pub early_stop_floor: Option<u64>,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            t_max: 1,
            k1max: 100,
            burnin: vec![500],
            post: vec![500],
            seed: 0,
            threads: 1,
            mode: Layer1Mode::Auto,
            validate: false,
            early_stop_floor: Some(10),
        }
    }
}

impl TrainSchedule {
    /// `B_T`.
    pub fn b(&self, t: usize) -> usize {
        self.burnin[(t - 1).min(self.burnin.len() - 1)]
    }

    /// `C_T`.
    pub fn c(&self, t: usize) -> usize {
        self.post[(t - 1).min(self.post.len() - 1)]
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_max == 0 {
            return Err(param("t_max", 0.0, "need at least one layer"));
        }
        if self.k1max == 0 {
            return Err(param("k1max", 0.0, "need at least one factor"));
        }
        if self.burnin.is_empty() || self.burnin.contains(&0) {
            return Err(param("B", 0.0, "every depth needs at least one sweep before pruning"));
        }
        if self.post.is_empty() || self.post.contains(&0) {
            return Err(param("C", 0.0, "every depth needs at least one sweep after pruning"));
        }
        Ok(())
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            mode: self.mode,
            threads: self.threads,
            validate: self.validate,
            freeze_global: false,
            seed: self.seed,
        }
    }
}

/// One line of the training log.
#[derive(Clone, Debug, Serialize)]
pub struct TrainRecord {
    pub depth: usize,
    pub iter: usize,
    pub widths: Vec<usize>,
    /// `sum_j x_.j^(t)` for `t = 1 ..= T+1`.
    pub layer_totals: Vec<u64>,
    pub pruned: bool,
    pub elapsed_secs: f64,
}

pub struct TrainOutput<F> {
    /// One network per depth `1..=T`.
    pub networks: Vec<GbnNetwork<F>>,
    /// Final chain, for continued sampling.
    pub sampler: GibbsSampler<F>,
}

/// Train networks of depth `1, 2, ..., t_max`, each stacked on the last.
///
/// For depth `T`: the new layer's width cap is the inferred width of the
/// layer below (`k1max` for `T = 1`); all layers are sampled jointly for
/// `B_T` sweeps, layer `T`'s zero-count factors are pruned, and `C_T` more
/// sweeps follow. `on_record` sees every sweep.
pub fn train_layerwise<F: Real>(
    data: &Observations<F>,
    link: Link,
    hyper: Hyperparams,
    schedule: &TrainSchedule,
    on_record: &mut dyn FnMut(&TrainRecord),
) -> Result<TrainOutput<F>> {
    schedule.validate()?;
    let mut init_rng = RngStream::substream(schedule.seed, 1);
    let network = GbnNetwork::init(data.n_rows(), schedule.k1max, link, hyper, &mut init_rng)?;
    let mut sampler = GibbsSampler::new(network, data, schedule.sampler_config())?;
    let start = Instant::now();
    let mut networks = Vec::with_capacity(schedule.t_max);
    for depth in 1..=schedule.t_max {
        if depth > 1 {
            sampler.grow()?;
        }
        let (b, c) = (schedule.b(depth), schedule.c(depth));
        info!(
            "depth {depth}: width cap {}, {b} + {c} sweeps",
            sampler.network().top_cap()
        );
        for iter in 1..=b + c {
            sampler.sweep()?;
            let pruned = iter == b;
            if pruned {
                let kept = prune_layer(&mut sampler);
                debug!("depth {depth}: kept {} factors", kept.len());
            }
            on_record(&TrainRecord {
                depth,
                iter,
                widths: sampler.network().widths(),
                layer_totals: sampler.counts().layer_totals(),
                pruned,
                elapsed_secs: start.elapsed().as_secs_f64(),
            });
        }
        let mut snapshot = sampler.network().clone();
        snapshot.c_medians = Some(sampler.scale_medians().into_iter().map(F::of).collect());
        info!("depth {depth}: widths {:?}", snapshot.widths());
        networks.push(snapshot);
        if let Some(floor) = schedule.early_stop_floor {
            let top = *sampler.counts().layer_totals().last().unwrap_or(&0);
            if top < floor && depth < schedule.t_max {
                info!("stopping at depth {depth}: top-layer count {top} below {floor}");
                break;
            }
        }
    }
    Ok(TrainOutput { networks, sampler })
}

/// Prune the top layer's factors with `x_{..k}^(T) = 0`; returns the kept
/// factor indices. If none are active the factor with the largest `r` is kept.
pub fn prune_layer<F: Real>(sampler: &mut GibbsSampler<F>) -> Vec<usize> {
    sampler.prune_top()
}

/// Indices of factors with a positive aggregate count, in order. If every
/// count is zero, the single factor with the largest weight (first on ties).
pub fn active_factors(totals: &[u64], weights: &[f64]) -> Vec<usize> {
    let keep: Vec<usize> = (0..totals.len()).filter(|&k| totals[k] > 0).collect();
    if !keep.is_empty() || weights.is_empty() {
        return keep;
    }
    let best = (0..weights.len()).fold(0, |b, k| if weights[k] > weights[b] { k } else { b });
    vec![best]
}

/// `iterations` joint sweeps with no structural change.
pub fn train_fixed<F: Real>(
    network: GbnNetwork<F>,
    data: &Observations<F>,
    iterations: usize,
    config: SamplerConfig,
) -> Result<GibbsSampler<F>> {
    let mut sampler = GibbsSampler::new(network, data, config)?;
    sampler.run(iterations)?;
    Ok(sampler)
}

/// Number of factors whose share of `r`-weighted usage exceeds `threshold`;
/// a diagnostic only, pruning uses the strict zero-count rule.
pub fn effective_width(weights: &[f64], threshold: f64) -> usize {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return 0;
    }
    weights.iter().filter(|&&w| w / total > threshold).count()
}
