//! Conditional draws that make up one upward-downward sweep.
//!
//! Each function is a single Gibbs step on plain slices so that it can be
//! tested (and reused) outside the sampler.

use rand::Rng;

use crate::distributions::{
    beta_unchecked, crt_unchecked, dirichlet_unchecked, gamma_unchecked, partition_unchecked,
    sample_truncated_poisson_counted, truncated_bessel_unchecked,
};
use crate::error::{param, GbnError, Result};
use crate::matrix::{ColMatrix, CountMatrix};
use crate::model::{store_column, Concentration, DocLatentState, Hyperparams};
use crate::scalar::Real;

/// Count link: the latent counts are the observations.
pub fn sample_x1_count(counts: &[u32]) -> Vec<u32> {
    counts.to_vec()
}

/// `sum_k phi_vk theta_k` for row `v`.
#[inline]
pub fn cell_rate<F: Real>(phi: &ColMatrix<F>, v: usize, theta: &[f64]) -> f64 {
    let rows = phi.rows();
    let data = phi.as_slice();
    theta.iter().enumerate().map(|(k, &th)| data[k * rows + v].f() * th).sum()
}

/// Bernoulli-Poisson link for one document. `rows` lists the cells with
/// `b_vj = 1`; every other cell has `x1 = 0` and costs nothing. Returns the
/// number of truncated-Poisson variates drawn.
pub fn sample_x1_binary<F: Real, R: Rng + ?Sized>(
    rows: &[u32],
    phi1: &ColMatrix<F>,
    theta1: &[f64],
    doc: usize,
    out: &mut [u32],
    rng: &mut R,
) -> Result<usize> {
    for (o, &v) in out.iter_mut().zip(rows) {
        let rate = cell_rate(phi1, v as usize, theta1);
        if !(rate > 0.0) {
            return Err(GbnError::DegenerateRate {
                layer: 1,
                row: v as usize,
                doc,
            });
        }
        let (x, _) = sample_truncated_poisson_counted(rate, rng)?;
        *o = x.min(u32::MAX as u64) as u32;
    }
    Ok(rows.len())
}

/// Poisson-randomized-gamma link for one document: `x1 = 0` where `y = 0`,
/// otherwise a truncated Bessel draw. `rows` / `y` list the positive cells.
pub fn sample_x1_real<F: Real, R: Rng + ?Sized>(
    rows: &[u32],
    y: &[f64],
    phi1: &ColMatrix<F>,
    theta1: &[f64],
    a: f64,
    doc: usize,
    out: &mut [u32],
    rng: &mut R,
) -> Result<()> {
    for ((o, &v), &yv) in out.iter_mut().zip(rows).zip(y) {
        let rate = cell_rate(phi1, v as usize, theta1);
        if !(rate > 0.0) {
            return Err(GbnError::DegenerateRate {
                layer: 1,
                row: v as usize,
                doc,
            });
        }
        let alpha = 2.0 * (a * yv * rate).sqrt();
        *o = truncated_bessel_unchecked(alpha.max(f64::MIN_POSITIVE), rng).min(u32::MAX as u64) as u32;
    }
    Ok(())
}

/// `a_j ~ Gam(e0 + sum_v x_vj, 1 / (f0 + sum_v y_vj))`.
pub fn sample_a<R: Rng + ?Sized>(x1: &[u32], y_total: f64, hyper: &Hyperparams, rng: &mut R) -> f64 {
    let x: u64 = x1.iter().map(|&x| x as u64).sum();
    gamma_unchecked(hyper.e0 + x as f64, 1.0 / (hyper.f0 + y_total), rng)
}

/// Partition one document's layer-`t` counts over the layer's factors.
///
/// `cells` yields `(row, count)` pairs. Each count is split multinomially
/// with weights `phi_rk theta_k`; the pieces are added to `row_factor`
/// (`x_{v.k}`) and to `m` (`x_{.jk}`). `weights` / `buf` are scratch of
/// length `K_t`.
#[allow(clippy::too_many_arguments)]
pub fn partition_counts<F: Real, R: Rng + ?Sized>(
    cells: impl Iterator<Item = (usize, u32)>,
    phi: &ColMatrix<F>,
    theta: &[f64],
    layer: usize,
    doc: usize,
    row_factor: &mut CountMatrix,
    m: &mut [u32],
    weights: &mut [f64],
    buf: &mut [u64],
    rng: &mut R,
) -> Result<()> {
    let rows = phi.rows();
    let data = phi.as_slice();
    let rf_rows = row_factor.rows();
    let rf = row_factor.as_mut_slice();
    for (v, x) in cells {
        if x == 0 {
            continue;
        }
        let mut sum = 0.0;
        for (k, w) in weights.iter_mut().enumerate() {
            *w = data[k * rows + v].f() * theta[k];
            sum += *w;
        }
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(GbnError::DegenerateRate { layer, row: v, doc });
        }
        buf.iter_mut().for_each(|b| *b = 0);
        partition_unchecked(x as u64, weights, sum, buf, rng);
        for (k, &b) in buf.iter().enumerate() {
            if b > 0 {
                let b = b as u32;
                rf[k * rf_rows + v] += b;
                m[k] += b;
            }
        }
    }
    Ok(())
}

/// `x_kj^(t+1) ~ CRT(m_kj, shape_k)` for one document.
pub fn crt_to_next_layer<R: Rng + ?Sized>(m: &[u32], shape: &[f64], out: &mut [u32], rng: &mut R) -> Result<()> {
    for ((o, &mk), &s) in out.iter_mut().zip(m).zip(shape) {
        if mk > 0 && !(s > 0.0 && s.is_finite()) {
            return Err(param("shape", s, "CRT concentration must be positive"));
        }
        *o = crt_unchecked(mk as u64, s, rng) as u32;
    }
    Ok(())
}

/// `phi_k ~ Dir(eta_1 + x_{1.k}, ..., eta_V + x_{V.k})` for every column.
pub fn sample_phi<F: Real, R: Rng + ?Sized>(
    row_factor: &CountMatrix,
    eta: &Concentration,
    rng: &mut R,
) -> ColMatrix<F> {
    let rows = row_factor.rows();
    let mut out = ColMatrix::zeros(rows, row_factor.cols());
    let mut buf = vec![0.0; rows];
    for k in 0..row_factor.cols() {
        let counts = row_factor.col(k);
        dirichlet_unchecked(counts.iter().enumerate().map(|(v, &x)| eta.at(v) + x as f64), &mut buf, rng);
        store_column(out.col_mut(k), &buf);
    }
    out
}

/// `r_k ~ Gam(gamma0 / K + x_{k.}, 1 / (c0 + q))` where `q = -sum_j ln(1 - p_j^(T+1))`.
pub fn sample_r<R: Rng + ?Sized>(xtop: &[u64], q: f64, gamma0: f64, c0: f64, k_cap: usize, rng: &mut R) -> Vec<f64> {
    let scale = 1.0 / (c0 + q);
    xtop.iter()
        .map(|&x| gamma_unchecked(gamma0 / k_cap as f64 + x as f64, scale, rng))
        .collect()
}

/// `c0 ~ Gam(e0 + K_T gamma0 / K, 1 / (f0 + sum_k r_k))`.
pub fn sample_c0<R: Rng + ?Sized>(gamma0: f64, r: &[f64], k_cap: usize, hyper: &Hyperparams, rng: &mut R) -> f64 {
    let shape = hyper.e0 + gamma0 * r.len() as f64 / k_cap as f64;
    let rsum: f64 = r.iter().sum();
    gamma_unchecked(shape, 1.0 / (hyper.f0 + rsum), rng)
}

/// `gamma0` with `r` integrated out: `l_k ~ CRT(x_{k.}, gamma0 / K)`, then
/// `gamma0 ~ Gam(a0 + sum_k l_k, 1 / (b0 - (1/K) sum_k ln(1 - p~)))`,
/// `p~ = q / (c0 + q)`.
pub fn sample_gamma0<R: Rng + ?Sized>(
    xtop: &[u64],
    q: f64,
    gamma0: f64,
    c0: f64,
    k_cap: usize,
    hyper: &Hyperparams,
    rng: &mut R,
) -> f64 {
    let conc = gamma0 / k_cap as f64;
    let tables: u64 = xtop.iter().map(|&x| crt_unchecked(x, conc, rng)).sum();
    // -ln(1 - p~) = ln(1 + q / c0)
    let per_factor = (q / c0).ln_1p();
    let rate = hyper.b0 + per_factor * xtop.len() as f64 / k_cap as f64;
    gamma_unchecked(hyper.a0 + tables as f64, 1.0 / rate, rng)
}

/// `theta ~ Gam(shape + m, 1 / rate)`, clamped strictly positive.
pub fn sample_theta<F: Real, R: Rng + ?Sized>(shape: &[f64], m: &[u32], rate: f64, out: &mut [F], rng: &mut R) {
    let scale = 1.0 / rate;
    for ((o, &s), &mk) in out.iter_mut().zip(shape).zip(m) {
        *o = F::of_positive(gamma_unchecked(s + mk as f64, scale, rng));
    }
}

/// Resample `p_j^(2)` and `c_j^(3..T+1)` and rederive the scale chain.
///
/// `m1_total = m_.j^(1)(2)`; `theta_totals[t-1] = theta_.j^(t)` for
/// `t = 1..=T`, and `r_total = theta_.j^(T+1) := r_.`.
pub fn sample_scales<F: Real, R: Rng + ?Sized>(
    doc: &mut DocLatentState<F>,
    m1_total: u64,
    theta_totals: &[f64],
    r_total: f64,
    hyper: &Hyperparams,
    rng: &mut R,
) {
    let depth = doc.depth();
    let total = |t: usize| if t == depth + 1 { r_total } else { theta_totals[t - 1] };
    doc.p2 = F::of(beta_unchecked(hyper.a0 + m1_total as f64, hyper.b0 + total(2), rng));
    for t in 3..=depth + 1 {
        let c = gamma_unchecked(hyper.e0 + total(t), 1.0 / (hyper.f0 + total(t - 1)), rng);
        doc.c[t - 2] = F::of_positive(c);
    }
    // a p2 that rounds to 0 or 1 in F would break the scale chain
    let p2 = doc.p2.f();
    if !(p2 > 0.0 && p2 < 1.0) {
        let eps = F::epsilon().f();
        doc.p2 = F::of(p2.clamp(eps, 1.0 - eps));
    }
    doc.derive_probabilities();
}

/// `Phi theta` computed in `f64`.
pub fn mat_vec<F: Real>(phi: &ColMatrix<F>, theta: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (col, &th) in phi.columns().zip(theta) {
        for (o, &p) in out.iter_mut().zip(col) {
            *o += p.f() * th;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn crt_edges() {
        let mut rng = RngStream::new(1);
        let mut out = [9u32; 3];
        crt_to_next_layer(&[0, 1, 5], &[2.0, 0.3, 1.0], &mut out, &mut rng).unwrap();
        assert_eq!(out[0], 0);
        assert_eq!(out[1], 1);
        assert!((1..=5).contains(&out[2]));
        assert!(crt_to_next_layer(&[1], &[0.0], &mut out[..1], &mut rng).is_err());
    }

    #[test]
    fn partition_single_factor_keeps_counts() {
        let mut rng = RngStream::new(2);
        let phi = ColMatrix::from_col_major(3, 1, vec![0.2, 0.3, 0.5]).unwrap();
        let mut rf = CountMatrix::zeros(3, 1);
        let mut m = [0u32];
        partition_counts(
            [(0, 4), (2, 7)].into_iter(),
            &phi,
            &[1.5],
            1,
            0,
            &mut rf,
            &mut m,
            &mut [0.0],
            &mut [0],
            &mut rng,
        )
        .unwrap();
        assert_eq!(rf.as_slice(), &[4, 0, 7]);
        assert_eq!(m, [11]);
    }

    #[test]
    fn partition_rejects_zero_rate() {
        let mut rng = RngStream::new(3);
        let phi = ColMatrix::from_col_major(2, 1, vec![1.0, 0.0]).unwrap();
        let mut rf = CountMatrix::zeros(2, 1);
        let err = partition_counts(
            [(1, 1)].into_iter(),
            &phi,
            &[1.0],
            1,
            4,
            &mut rf,
            &mut [0],
            &mut [0.0],
            &mut [0],
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, GbnError::DegenerateRate { layer: 1, row: 1, doc: 4 }));
    }

    #[test]
    fn phi_columns_stochastic() {
        let mut rng = RngStream::new(4);
        let mut rf = CountMatrix::zeros(4, 3);
        rf[(0, 0)] = 1_000_000;
        let phi: ColMatrix<f64> = sample_phi(&rf, &Concentration::Symmetric(0.01), &mut rng);
        for col in phi.columns() {
            assert!((col.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
        assert!((phi[(0, 0)] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn scales_stay_in_domain() {
        let mut rng = RngStream::new(5);
        let hyper = Hyperparams::default();
        let mut doc = DocLatentState::<f64>::initial(&[3, 2, 2]);
        for _ in 0..200 {
            sample_scales(&mut doc, 0, &[0.0, 0.0, 0.0], 0.0, &hyper, &mut rng);
            doc.validate(&[3, 2, 2]).unwrap();
        }
    }
}
