mod common;

use gbn::corpus::split_tokens;
use gbn::{
    extract_features, heldout_perplexity, perplexity_from_rates, Hyperparams, Link, Network, Observations,
    RngStream, SamplerConfig, SparseCountMatrix,
};

#[test]
fn two_term_example() {
    let heldout = SparseCountMatrix::from_docs(2, &[vec![(0, 8), (1, 2)]]).unwrap();
    let p = perplexity_from_rates(&heldout, &[0.8, 0.2], &[1.0]).unwrap();
    let expected = (-(8.0 * 0.8f64.ln() + 2.0 * 0.2f64.ln()) / 10.0).exp();
    assert!((p - expected).abs() < 1e-12);
    assert!((p - 1.6494).abs() < 1e-4);
}

#[test]
fn uniform_rates_give_vocabulary_size() {
    let v = 7;
    let heldout = common::block_corpus(v, 1, 5, 30, 3);
    let num = vec![2.5; heldout.nnz()];
    let den = vec![2.5 * v as f64; heldout.n_docs()];
    let p = perplexity_from_rates(&heldout, &num, &den).unwrap();
    assert!((p - v as f64).abs() < 1e-9);
}

#[test]
fn empty_heldout_rejected() {
    let heldout = SparseCountMatrix::from_docs(3, &[vec![]]).unwrap();
    assert!(perplexity_from_rates(&heldout, &[], &[1.0]).is_err());
}

#[test]
fn perplexity_needs_count_link() {
    let data = common::block_corpus(12, 3, 10, 20, 1);
    let split = split_tokens(&data, 0.5, &mut RngStream::new(0)).unwrap();
    let mut rng = RngStream::new(1);
    let net = Network::init(12, 3, Link::BernoulliPoisson, Hyperparams::default(), &mut rng).unwrap();
    assert!(heldout_perplexity(&net, &split, 1, 2, 1, SamplerConfig::default()).is_err());
}

#[test]
fn perplexity_bounded_by_vocabulary() {
    let data = common::block_corpus(12, 3, 20, 30, 1);
    let split = split_tokens(&data, 0.5, &mut RngStream::new(0)).unwrap();
    let mut rng = RngStream::new(1);
    let net = Network::init(12, 4, Link::PoissonCount, Hyperparams::default(), &mut rng).unwrap();
    let report = heldout_perplexity(&net, &split, 20, 20, 5, SamplerConfig::seeded(2)).unwrap();
    assert_eq!(report.samples, 4);
    assert_eq!(report.per_sample.len(), 4);
    assert!(report.perplexity > 1.0 && report.perplexity < 12.0, "{}", report.perplexity);
}

#[test]
fn feature_rows_are_proportions() {
    let data = common::toy_counts();
    let mut rng = RngStream::new(5);
    let net = Network::init(12, 4, Link::PoissonCount, Hyperparams::default(), &mut rng).unwrap();
    let f = extract_features(&net, &data, 5, 10, SamplerConfig::seeded(1)).unwrap();
    assert_eq!(f.rows.len(), data.n_docs());
    for row in &f.rows {
        assert_eq!(row.len(), 4);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        assert!(row.iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn single_factor_features_are_one() {
    let data = common::toy_counts();
    let mut rng = RngStream::new(5);
    let net = Network::init(12, 1, Link::PoissonCount, Hyperparams::default(), &mut rng).unwrap();
    let f = extract_features(&net, &data, 2, 3, SamplerConfig::seeded(1)).unwrap();
    assert!(f.rows.iter().all(|r| r == &vec![1.0]));
}

#[test]
fn identical_documents_get_similar_features() {
    let doc = vec![(0usize, 10u32), (1, 6), (5, 3)];
    let data = Observations::Counts(SparseCountMatrix::from_docs(12, &vec![doc; 2]).unwrap());
    let mut rng = RngStream::new(5);
    let net = Network::init(12, 3, Link::PoissonCount, Hyperparams::default(), &mut rng).unwrap();
    let f = extract_features(&net, &data, 50, 2000, SamplerConfig::seeded(4)).unwrap();
    for (a, b) in f.rows[0].iter().zip(&f.rows[1]) {
        assert!((a - b).abs() < 0.05, "{:?}", f.rows);
    }
}

#[test]
fn csv_has_header_and_flag() {
    let data = common::toy_counts();
    let mut rng = RngStream::new(5);
    let net = Network::init(12, 2, Link::PoissonCount, Hyperparams::default(), &mut rng).unwrap();
    let f = extract_features(&net, &data, 1, 2, SamplerConfig::default()).unwrap();
    let mut out = Vec::new();
    f.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("factor_0,factor_1,empty"));
    assert_eq!(lines.count(), data.n_docs());
}
