//! Random variates for the augmented sampler.
//!
//! Everything here is computed in `f64`. Gamma variates are generated in
//! log space so that tiny shape parameters (Dirichlet concentrations of
//! 0.01, `gamma0 / K` for a wide top layer) never underflow to an exact
//! zero.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson, StandardNormal};

use crate::error::{param, GbnError, Result};

#[inline]
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // (0, 1]
    1.0 - rng.random::<f64>()
}

/// Marsaglia-Tsang for shape >= 1, unit scale.
fn std_gamma_ge1<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = open_unit(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Log of a unit-scale gamma variate. Caller guarantees `shape > 0`.
pub(crate) fn ln_std_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        std_gamma_ge1(shape, rng).ln()
    } else {
        // G(a) = G(a + 1) * U^(1/a)
        std_gamma_ge1(shape + 1.0, rng).ln() + open_unit(rng).ln() / shape
    }
}

/// Gamma variate with the given shape and scale, clamped away from zero.
/// Caller guarantees `shape > 0` and `scale > 0`.
#[inline]
pub(crate) fn gamma_unchecked<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    (ln_std_gamma(shape, rng) + scale.ln())
        .exp()
        .max(f64::MIN_POSITIVE)
}

/// `Gam(shape, scale)`: mean `shape * scale`.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(param("shape", shape, "must be positive and finite"));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(param("scale", scale, "must be positive and finite"));
    }
    Ok(gamma_unchecked(shape, scale, rng))
}

/// `Beta(a, b)` via a ratio of log-gamma variates; the result lies strictly
/// inside (0, 1).
pub fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(param("a", a, "must be positive and finite"));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(param("b", b, "must be positive and finite"));
    }
    Ok(beta_unchecked(a, b, rng))
}

pub(crate) fn beta_unchecked<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let lx = ln_std_gamma(a, rng);
    let ly = ln_std_gamma(b, rng);
    // x / (x + y) = 1 / (1 + exp(ly - lx))
    let p = 1.0 / (1.0 + (ly - lx).exp());
    p.clamp(f64::EPSILON * 0.5, 1.0 - f64::EPSILON * 0.5)
}

/// Dirichlet draw written into `out`. Every concentration must be positive.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], out: &mut [f64], rng: &mut R) -> Result<()> {
    if alpha.len() != out.len() {
        return Err(GbnError::Shape(format!(
            "dirichlet: {} concentrations, {} outputs",
            alpha.len(),
            out.len()
        )));
    }
    if let Some(&a) = alpha.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(param("alpha", a, "Dirichlet concentrations must be positive"));
    }
    dirichlet_unchecked(alpha.iter().copied(), out, rng);
    Ok(())
}

pub(crate) fn dirichlet_unchecked<R, I>(alpha: I, out: &mut [f64], rng: &mut R)
where
    R: Rng + ?Sized,
    I: IntoIterator<Item = f64>,
{
    let mut max = f64::NEG_INFINITY;
    for (o, a) in out.iter_mut().zip(alpha) {
        *o = ln_std_gamma(a, rng);
        max = max.max(*o);
    }
    let mut sum = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

pub fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    if lambda == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(lambda).map_err(|_| param("lambda", lambda, "must be nonnegative and finite"))?;
    Ok(dist.sample(rng) as u64)
}

/// Chinese restaurant table count: the sum of `n` independent
/// `Bernoulli(r / (r + i - 1))` indicators.
pub fn sample_crt<R: Rng + ?Sized>(n: u64, r: f64, rng: &mut R) -> Result<u64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(param("r", r, "CRT concentration must be positive"));
    }
    Ok(crt_unchecked(n, r, rng))
}

pub(crate) fn crt_unchecked<R: Rng + ?Sized>(n: u64, r: f64, rng: &mut R) -> u64 {
    if n == 0 {
        return 0;
    }
    // the first customer always opens a table
    let mut tables = 1;
    for i in 1..n {
        if rng.random::<f64>() * (r + i as f64) < r {
            tables += 1;
        }
    }
    tables
}

/// Logarithmic distribution, PMF `p^u / (-u ln(1 - p))` on u >= 1 (Kemp's
/// second accelerated generator).
pub fn sample_log<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<u64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(param("p", p, "must lie in (0, 1)"));
    }
    let h = (-p).ln_1p();
    loop {
        let v: f64 = rng.random();
        if v >= p {
            return Ok(1);
        }
        let u: f64 = rng.random();
        let q = -(u * h).exp_m1();
        if v <= q * q {
            let k = (1.0 + v.ln() / q.ln()).floor();
            if k < 1.0 || v == 0.0 || !k.is_finite() {
                continue;
            }
            return Ok(k as u64);
        }
        return Ok(if v >= q { 1 } else { 2 });
    }
}

/// Zero-truncated Poisson variate together with the number of proposals the
/// sampler consumed (always 1 on the inverse-CDF branch).
pub fn sample_truncated_poisson_counted<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<(u64, u32)> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(param("lambda", lambda, "must be positive and finite"));
    }
    if lambda >= 1.0 {
        let dist = Poisson::new(lambda).map_err(|_| param("lambda", lambda, "out of range"))?;
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            let k = dist.sample(rng) as u64;
            if k >= 1 {
                return Ok((k, attempts));
            }
        }
    }
    // inverse CDF on the truncated PMF; P(1) = lambda / (e^lambda - 1)
    let u: f64 = rng.random();
    let mut pmf = lambda / lambda.exp_m1();
    let mut cum = pmf;
    let mut k = 1u64;
    while u > cum && pmf > 0.0 {
        k += 1;
        pmf *= lambda / k as f64;
        cum += pmf;
    }
    Ok((k, 1))
}

pub fn sample_truncated_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    sample_truncated_poisson_counted(lambda, rng).map(|(k, _)| k)
}

/// Probability that one `Pois(lambda)` proposal is accepted by the
/// rejection branch.
pub fn truncated_poisson_acceptance(lambda: f64) -> f64 {
    -(-lambda).exp_m1()
}

// Asymptotic expansion threshold for ln I_1.
const BESSEL_ASYMPTOTIC_FROM: f64 = 40.0;

/// `ln I_1(alpha)` (equivalently `ln I_{-1}`, the two coincide for integer order).
///
/// Series summed in log space for small arguments, Hankel expansion above
/// `BESSEL_ASYMPTOTIC_FROM` (truncation error below 1e-13 relative there).
pub fn ln_bessel_i1(alpha: f64) -> f64 {
    if alpha > BESSEL_ASYMPTOTIC_FROM {
        ln_bessel_i1_asymptotic(alpha)
    } else {
        ln_bessel_i1_series(alpha)
    }
}

pub(crate) fn ln_bessel_i1_series(alpha: f64) -> f64 {
    let half = (0.5 * alpha).ln();
    // terms (alpha/2)^(2n-1) / (n! (n-1)!), n >= 1
    let mut terms = Vec::with_capacity(64);
    let mut t = half;
    let mut n = 1u64;
    let mut max = t;
    loop {
        terms.push(t);
        max = max.max(t);
        let nf = n as f64;
        if nf * nf > alpha * alpha && t < max - 40.0 {
            break;
        }
        n += 1;
        let nf = n as f64;
        t += 2.0 * half - nf.ln() - (nf - 1.0).ln();
    }
    max + terms.iter().map(|&t| (t - max).exp()).sum::<f64>().ln()
}

pub(crate) fn ln_bessel_i1_asymptotic(alpha: f64) -> f64 {
    // I_nu(z) ~ e^z / sqrt(2 pi z) * sum_k (-1)^k a_k(nu) / z^k, mu = 4 nu^2 = 4
    let mut a = 1.0;
    let mut sum = 1.0;
    let mut zk = 1.0;
    for k in 1..=10u32 {
        let odd = (2 * k - 1) as f64;
        a *= (4.0 - odd * odd) / (8.0 * k as f64);
        zk *= alpha;
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
        sum += sign * a / zk;
    }
    alpha - 0.5 * (2.0 * std::f64::consts::PI * alpha).ln() + sum.ln()
}

/// Log of the truncated Bessel PMF `(alpha/2)^(2n-1) / (I_{-1}(alpha) n! Gamma(n))`, n >= 1.
pub fn truncated_bessel_ln_pmf(n: u64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(param("alpha", alpha, "must be positive and finite"));
    }
    if n == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let ln_fact = |m: u64| (1..=m).map(|i| (i as f64).ln()).sum::<f64>();
    Ok((2 * n - 1) as f64 * (0.5 * alpha).ln() - ln_fact(n) - ln_fact(n - 1) - ln_bessel_i1(alpha))
}

/// Truncated Bessel variate on {1, 2, ...} by inverse CDF, extending the
/// tail on demand.
pub fn sample_truncated_bessel<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<u64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(param("alpha", alpha, "must be positive and finite"));
    }
    Ok(truncated_bessel_unchecked(alpha, rng))
}

pub(crate) fn truncated_bessel_unchecked<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> u64 {
    let ln_norm = ln_bessel_i1(alpha);
    let half = (0.5 * alpha).ln();
    let u: f64 = rng.random();
    let mut n = 1u64;
    let mut ln_term = half - ln_norm;
    let mut cum = ln_term.exp();
    let mode = 0.5 * alpha;
    while cum < u {
        n += 1;
        let nf = n as f64;
        ln_term += 2.0 * half - nf.ln() - (nf - 1.0).ln();
        let pmf = ln_term.exp();
        cum += pmf;
        if nf > mode + 1.0 && pmf < 1e-18 {
            // rounding left `cum` a hair below 1; the remaining mass is negligible
            break;
        }
    }
    n
}

/// Log density (x > 0) or log point mass (x = 0) of the Poisson randomized
/// gamma distribution `x ~ Gam(n, 1/c), n ~ Pois(lambda)`.
pub fn prg_logdensity(x: f64, lambda: f64, c: f64) -> Result<f64> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(param("x", x, "must be nonnegative and finite"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(param("lambda", lambda, "must be positive"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(param("c", c, "must be positive"));
    }
    if x == 0.0 {
        return Ok(-lambda);
    }
    let lcx = lambda * c * x;
    Ok(-lambda - c * x + 0.5 * (lambda * c / x).ln() + ln_bessel_i1(2.0 * lcx.sqrt()))
}

pub fn sample_prg<R: Rng + ?Sized>(lambda: f64, c: f64, rng: &mut R) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(param("c", c, "must be positive"));
    }
    let n = sample_poisson(lambda, rng)?;
    if n == 0 {
        return Ok(0.0);
    }
    Ok(gamma_unchecked(n as f64, 1.0 / c, rng))
}

/// `NB(r, p)` as a gamma-mixed Poisson.
pub fn sample_negative_binomial<R: Rng + ?Sized>(r: f64, p: f64, rng: &mut R) -> Result<u64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(param("p", p, "must lie in (0, 1)"));
    }
    let lambda = sample_gamma(r, p / (1.0 - p), rng)?;
    sample_poisson(lambda, rng)
}

/// `(n, l)`: `l ~ Pois(-r ln(1-p))`, `n` the sum of `l` logarithmic variates.
pub fn sample_poisson_log_bivariate<R: Rng + ?Sized>(r: f64, p: f64, rng: &mut R) -> Result<(u64, u64)> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(param("r", r, "must be positive"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(param("p", p, "must lie in (0, 1)"));
    }
    let l = sample_poisson(-r * (-p).ln_1p(), rng)?;
    let mut n = 0;
    for _ in 0..l {
        n += sample_log(p, rng)?;
    }
    Ok((n, l))
}

// Below this many units per category the partition draws units one by one.
const UNITWISE_PER_CATEGORY: u64 = 4;

/// Split `total` into `out.len()` multinomial counts with probabilities
/// proportional to `weights`.
pub fn sample_multinomial_partition<R: Rng + ?Sized>(
    total: u64,
    weights: &[f64],
    out: &mut [u64],
    rng: &mut R,
) -> Result<()> {
    if weights.len() != out.len() {
        return Err(GbnError::Shape(format!(
            "partition: {} weights, {} outputs",
            weights.len(),
            out.len()
        )));
    }
    if let Some(&w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(param("weight", w, "must be nonnegative and finite"));
    }
    out.iter_mut().for_each(|o| *o = 0);
    if total == 0 {
        return Ok(());
    }
    let sum: f64 = weights.iter().sum();
    if !(sum > 0.0) {
        return Err(GbnError::DegenerateInput(format!(
            "cannot partition {total} units over all-zero weights"
        )));
    }
    partition_unchecked(total, weights, sum, out, rng);
    Ok(())
}

/// Requires `sum == weights.iter().sum() > 0` and zeroed `out`.
pub(crate) fn partition_unchecked<R: Rng + ?Sized>(
    total: u64,
    weights: &[f64],
    sum: f64,
    out: &mut [u64],
    rng: &mut R,
) {
    let k = weights.len();
    if k == 1 {
        out[0] += total;
        return;
    }
    if total <= UNITWISE_PER_CATEGORY * k as u64 {
        for _ in 0..total {
            let mut u = rng.random::<f64>() * sum;
            let mut chosen = k - 1;
            for (i, &w) in weights.iter().enumerate() {
                if u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            // floating-point slack can walk past the end; land on the last positive weight
            if weights[chosen] == 0.0 {
                chosen = weights.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            out[chosen] += 1;
        }
        return;
    }
    let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(k - 1);
    let mut remaining = total;
    let mut mass = sum;
    for i in 0..last {
        if remaining == 0 {
            return;
        }
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        let p = (w / mass).clamp(0.0, 1.0);
        let x = if p >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, p).map(|b| b.sample(rng)).unwrap_or(0)
        };
        out[i] += x;
        remaining -= x;
        mass -= w;
        if !(mass > 0.0) {
            mass = weights[i + 1..].iter().sum();
        }
    }
    out[last] += remaining;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn crt_edges() {
        let mut rng = RngStream::new(1);
        assert_eq!(sample_crt(0, 3.0, &mut rng).unwrap(), 0);
        for _ in 0..100 {
            assert_eq!(sample_crt(1, 5.0, &mut rng).unwrap(), 1);
            let l = sample_crt(20, 0.7, &mut rng).unwrap();
            assert!((1..=20).contains(&l));
        }
        assert!(sample_crt(3, 0.0, &mut rng).is_err());
        assert!(sample_crt(3, -1.0, &mut rng).is_err());
    }

    #[test]
    fn log_domain() {
        let mut rng = RngStream::new(2);
        assert!(sample_log(0.0, &mut rng).is_err());
        assert!(sample_log(1.0, &mut rng).is_err());
        for _ in 0..1000 {
            assert_eq!(sample_log(1e-12, &mut rng).unwrap(), 1);
            assert!(sample_log(0.9, &mut rng).unwrap() >= 1);
        }
    }

    #[test]
    fn truncated_poisson_support() {
        let mut rng = RngStream::new(3);
        assert!(sample_truncated_poisson(0.0, &mut rng).is_err());
        for &lam in &[1e-300, 1e-6, 0.3, 0.999, 1.0, 4.0, 50.0] {
            for _ in 0..200 {
                assert!(sample_truncated_poisson(lam, &mut rng).unwrap() >= 1);
            }
        }
        assert!((truncated_poisson_acceptance(1.0) - 0.632_120_558_828_557_7).abs() < 1e-15);
    }

    #[test]
    fn bessel_normalizer_branches_agree() {
        for &a in &[40.0, 45.0, 60.0, 100.0] {
            let s = ln_bessel_i1_series(a);
            let z = ln_bessel_i1_asymptotic(a);
            assert!((s - z).abs() < 1e-11, "alpha={a}: {s} vs {z}");
        }
        // I_1(1) = 0.565159103992485...
        assert!((ln_bessel_i1(1.0).exp() - 0.565_159_103_992_485).abs() < 1e-14);
    }

    #[test]
    fn bessel_pmf_normalizes() {
        let total: f64 = (1..=200)
            .map(|n| truncated_bessel_ln_pmf(n, 4.0).unwrap().exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-10, "{total}");
        assert!(truncated_bessel_ln_pmf(1, 0.0).is_err());
    }

    #[test]
    fn bessel_small_alpha_is_one() {
        let mut rng = RngStream::new(4);
        assert!(truncated_bessel_ln_pmf(1, 1e-6).unwrap().abs() < 1e-10);
        for _ in 0..1000 {
            assert_eq!(sample_truncated_bessel(1e-6, &mut rng).unwrap(), 1);
        }
        for _ in 0..100 {
            assert!(sample_truncated_bessel(5000.0, &mut rng).unwrap() >= 1);
        }
    }

    #[test]
    fn prg_point_mass() {
        for &c in &[0.1, 1.0, 7.0] {
            assert_eq!(prg_logdensity(0.0, 1.0, c).unwrap(), -1.0);
        }
        assert!(prg_logdensity(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn prg_density_integrates_to_one() {
        // point mass plus trapezoid over the continuous part
        let (lambda, c) = (3.0, 2.0);
        let mut mass = prg_logdensity(0.0, lambda, c).unwrap().exp();
        let h = 1e-4;
        let mut prev = None;
        let mut x = h;
        while x < 40.0 {
            let f = prg_logdensity(x, lambda, c).unwrap().exp();
            if let Some(p) = prev {
                mass += 0.5 * h * (p + f);
            } else {
                // f(x) ~ lambda c e^{-lambda} near 0
                mass += h * f;
            }
            prev = Some(f);
            x += h;
        }
        assert!((mass - 1.0).abs() < 1e-4, "{mass}");
    }

    #[test]
    fn bivariate_zero_tables_zero_customers() {
        let mut rng = RngStream::new(5);
        for _ in 0..2000 {
            let (n, l) = sample_poisson_log_bivariate(0.05, 0.3, &mut rng).unwrap();
            assert!(l <= n);
            assert_eq!(l == 0, n == 0);
        }
    }

    #[test]
    fn partition_conservation() {
        let mut rng = RngStream::new(6);
        let mut out = [0u64; 2];
        sample_multinomial_partition(10, &[0.5, 0.5], &mut out, &mut rng).unwrap();
        assert_eq!(out.iter().sum::<u64>(), 10);
        sample_multinomial_partition(0, &[0.5, 0.5], &mut out, &mut rng).unwrap();
        assert_eq!(out, [0, 0]);
        assert!(sample_multinomial_partition(3, &[0.0, 0.0], &mut out, &mut rng).is_err());
        let mut out = [0u64; 4];
        sample_multinomial_partition(1_000, &[0.0, 1.0, 0.0, 2.0], &mut out, &mut rng).unwrap();
        assert_eq!(out[0] + out[2], 0);
        assert_eq!(out.iter().sum::<u64>(), 1_000);
    }

    #[test]
    fn gamma_tiny_shape_stays_positive() {
        let mut rng = RngStream::new(7);
        for _ in 0..1000 {
            assert!(sample_gamma(1e-4, 1.0, &mut rng).unwrap() > 0.0);
        }
        assert!(sample_gamma(0.0, 1.0, &mut rng).is_err());
        let b = sample_beta(0.01, 0.01, &mut rng).unwrap();
        assert!(b > 0.0 && b < 1.0);
    }

    #[test]
    fn dirichlet_single_category() {
        let mut rng = RngStream::new(8);
        let mut out = [0.0];
        sample_dirichlet(&[0.05], &mut out, &mut rng).unwrap();
        assert_eq!(out, [1.0]);
        let mut out = [0.0; 5];
        sample_dirichlet(&[0.01; 5], &mut out, &mut rng).unwrap();
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
