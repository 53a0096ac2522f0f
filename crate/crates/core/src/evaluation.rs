//! Held-out-word perplexity and posterior feature extraction.

use std::io::Write;

use serde::Serialize;

use crate::corpus::{HeldoutSplit, Observations, SparseCountMatrix};
use crate::error::{param, GbnError, Result};
use crate::inference::{GibbsSampler, SamplerConfig};
use crate::model::{GbnNetwork, Link};
use crate::scalar::Real;

#[derive(Clone, Debug, Serialize)]
pub struct PerplexityReport {
    /// Perplexity computed from each collected sample alone.
    pub per_sample: Vec<f64>,
    /// Perplexity of the sample-averaged predictive rates.
    pub perplexity: f64,
    pub samples: usize,
    pub thin: usize,
    pub heldout_tokens: u64,
}

/// `exp(-(1/y..) sum_vj y_vj ln(num_vj / den_j))` over the held-out counts
/// `y`. `num` holds unnormalized predictive rates aligned with `heldout`'s
/// stored entries and `den` their per-document normalizers.
pub fn perplexity_from_rates(heldout: &SparseCountMatrix, num: &[f64], den: &[f64]) -> Result<f64> {
    let total = heldout.total();
    if total == 0 {
        return Err(GbnError::DegenerateInput("held-out set is empty".into()));
    }
    if num.len() != heldout.nnz() || den.len() != heldout.n_docs() {
        return Err(GbnError::Shape("rates do not match the held-out matrix".into()));
    }
    let ptr = heldout.doc_ptr();
    let mut acc = 0.0;
    for j in 0..heldout.n_docs() {
        let (terms, counts) = heldout.doc(j);
        if terms.is_empty() {
            continue;
        }
        let ln_den = den[j].ln();
        for (i, (&v, &y)) in (ptr[j]..).zip(terms.iter().zip(counts)) {
            let f = num[i];
            if !(f > 0.0 && f.is_finite()) {
                return Err(GbnError::DegenerateRate { layer: 1, row: v as usize, doc: j });
            }
            acc += y as f64 * (f.ln() - ln_den);
        }
    }
    Ok((-acc / total as f64).exp())
}

/// Conditional Gibbs on `split.train` starting from `network` (all
/// parameters resampled, widths fixed): `burnin` sweeps, then `collect`
/// sweeps keeping every `thin`-th sample of `Phi^(1) theta^(1)`.
pub fn heldout_perplexity<F: Real>(
    network: &GbnNetwork<F>,
    split: &HeldoutSplit,
    burnin: usize,
    collect: usize,
    thin: usize,
    config: SamplerConfig,
) -> Result<PerplexityReport> {
    if network.link != Link::PoissonCount {
        return Err(GbnError::Modality(format!(
            "perplexity needs the count link, model uses {}",
            network.link
        )));
    }
    if thin == 0 {
        return Err(param("thin", 0.0, "must be at least one"));
    }
    if collect < thin {
        return Err(param("collect", collect as f64, "collects no samples at this thinning"));
    }
    let heldout = &split.heldout;
    if heldout.total() == 0 {
        return Err(GbnError::DegenerateInput("held-out set is empty".into()));
    }
    if heldout.n_docs() != split.train.n_docs() || heldout.n_terms() != split.train.n_terms() {
        return Err(GbnError::Shape("train and held-out matrices differ in shape".into()));
    }
    let config = SamplerConfig {
        freeze_global: false,
        ..config
    };
    let data = Observations::Counts(split.train.clone());
    let mut sampler = GibbsSampler::new(network.clone(), &data, config)?;
    sampler.run(burnin)?;

    let n_docs = heldout.n_docs();
    let ptr = heldout.doc_ptr().to_vec();
    let mut num_sum = vec![0.0; heldout.nnz()];
    let mut den_sum = vec![0.0; n_docs];
    let mut num_s = vec![0.0; heldout.nnz()];
    let mut den_s = vec![0.0; n_docs];
    let mut per_sample = Vec::new();
    for iter in 1..=collect {
        sampler.sweep()?;
        if iter % thin != 0 {
            continue;
        }
        let phi = sampler.network().phi(1);
        let col_sums: Vec<f64> = phi.columns().map(|c| c.iter().map(|x| x.f()).sum()).collect();
        for (j, doc) in sampler.docs().iter().enumerate() {
            let theta = &doc.theta[0];
            den_s[j] = theta.iter().zip(&col_sums).map(|(t, s)| t.f() * s).sum();
            let (terms, _) = heldout.doc(j);
            for (i, &v) in (ptr[j]..ptr[j + 1]).zip(terms) {
                num_s[i] = theta
                    .iter()
                    .enumerate()
                    .map(|(k, t)| phi[(v as usize, k)].f() * t.f())
                    .sum();
            }
        }
        per_sample.push(perplexity_from_rates(heldout, &num_s, &den_s)?);
        for (a, b) in num_sum.iter_mut().zip(&num_s) {
            *a += b;
        }
        for (a, b) in den_sum.iter_mut().zip(&den_s) {
            *a += b;
        }
    }
    let perplexity = perplexity_from_rates(heldout, &num_sum, &den_sum)?;
    Ok(PerplexityReport {
        samples: per_sample.len(),
        per_sample,
        perplexity,
        thin,
        heldout_tokens: heldout.total(),
    })
}

/// Posterior-mean feature usage proportions `theta_j^(1) / theta_.j^(1)`.
#[derive(Clone, Debug, Serialize)]
pub struct FeatureMatrix {
    /// `J x K_1`, one row per document.
    pub rows: Vec<Vec<f64>>,
    /// Documents with no observations; their rows are prior-driven.
    pub empty: Vec<bool>,
    pub samples: usize,
}

impl FeatureMatrix {
    /// CSV with a header of factor ids and a trailing `empty` flag column.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let k = self.rows.first().map_or(0, Vec::len);
        let header: Vec<String> = (0..k).map(|i| format!("factor_{i}")).collect();
        writeln!(w, "{},empty", header.join(","))?;
        for (row, &empty) in self.rows.iter().zip(&self.empty) {
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{},{}", cells.join(","), u8::from(empty))?;
        }
        Ok(())
    }
}

/// Monte Carlo average of the normalized `theta_j^(1)` over `collect` sweeps
/// after `burnin`, with the global parameters held at `network`'s values.
pub fn extract_features<F: Real>(
    network: &GbnNetwork<F>,
    data: &Observations<F>,
    burnin: usize,
    collect: usize,
    config: SamplerConfig,
) -> Result<FeatureMatrix> {
    if collect == 0 {
        return Err(param("collect", 0.0, "must be at least one"));
    }
    let config = SamplerConfig {
        freeze_global: true,
        ..config
    };
    let mut sampler = GibbsSampler::new(network.clone(), data, config)?;
    sampler.run(burnin)?;
    let k = network.width(1);
    let n_docs = data.n_docs();
    let mut rows = vec![vec![0.0; k]; n_docs];
    for _ in 0..collect {
        sampler.sweep()?;
        for (row, doc) in rows.iter_mut().zip(sampler.docs()) {
            let theta = &doc.theta[0];
            let total: f64 = theta.iter().map(|t| t.f()).sum();
            for (r, t) in row.iter_mut().zip(theta) {
                *r += t.f() / total;
            }
        }
    }
    for row in &mut rows {
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|r| *r /= total);
    }
    let empty = (0..n_docs).map(|j| is_empty_doc(data, j)).collect();
    Ok(FeatureMatrix {
        rows,
        empty,
        samples: collect,
    })
}

fn is_empty_doc<F: Real>(data: &Observations<F>, j: usize) -> bool {
    match data {
        Observations::Counts(m) | Observations::Binary(m) => m.doc(j).0.is_empty(),
        Observations::NonnegReal(m) => m.col(j).iter().all(|y| y.f() == 0.0),
    }
}
