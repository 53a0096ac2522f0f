mod common;

use common::{toy_binary, toy_counts, toy_real};
use gbn::{GbnNetwork, Hyperparams, Layer1Mode, Link, Observations, RngStream, Sampler, SamplerConfig};

fn network(data: &Observations<f64>, link: Link, depth: usize, seed: u64) -> GbnNetwork<f64> {
    let mut rng = RngStream::new(seed);
    let mut net = GbnNetwork::init(data.n_rows(), 6, link, Hyperparams::default(), &mut rng).unwrap();
    for _ in 1..depth {
        net.add_layer(&mut rng).unwrap();
    }
    net
}

fn config(mode: Layer1Mode, threads: usize, seed: u64) -> SamplerConfig {
    SamplerConfig {
        mode,
        threads,
        validate: true,
        seed,
        ..SamplerConfig::default()
    }
}

#[test]
fn invariants_hold_for_every_link_and_mode() {
    let cases = [
        (toy_counts(), Link::PoissonCount, Layer1Mode::Collapsed),
        (toy_counts(), Link::PoissonCount, Layer1Mode::Explicit),
        (toy_binary(), Link::BernoulliPoisson, Layer1Mode::Explicit),
        (toy_real(), Link::PoissonRandomizedGamma, Layer1Mode::Explicit),
    ];
    for (data, link, mode) in cases {
        let net = network(&data, link, 3, 1);
        let mut s = Sampler::new(net, &data, config(mode, 1, 2)).unwrap();
        s.run(30).unwrap();
        s.check_invariants().unwrap();
    }
}

#[test]
fn explicit_mode_ignores_thread_count() {
    let data = toy_counts();
    let net = network(&data, Link::PoissonCount, 2, 3);
    let mut a = Sampler::new(net.clone(), &data, config(Layer1Mode::Explicit, 1, 9)).unwrap();
    let mut b = Sampler::new(net, &data, config(Layer1Mode::Explicit, 4, 9)).unwrap();
    a.run(10).unwrap();
    b.run(10).unwrap();
    assert_eq!(a.network().to_json().unwrap(), b.network().to_json().unwrap());
    assert_eq!(a.counts().layer_totals(), b.counts().layer_totals());
}

#[test]
fn cloned_chain_resumes_bit_exactly() {
    let data = toy_counts();
    let net = network(&data, Link::PoissonCount, 2, 4);
    let mut a = Sampler::new(net, &data, config(Layer1Mode::Auto, 1, 5)).unwrap();
    a.run(5).unwrap();
    let mut b = a.clone();
    a.run(5).unwrap();
    b.run(5).unwrap();
    assert_eq!(a.network().to_json().unwrap(), b.network().to_json().unwrap());
}

#[test]
fn pruning_and_growth_keep_state_consistent() {
    let data = toy_counts();
    let net = network(&data, Link::PoissonCount, 1, 6);
    let mut s = Sampler::new(net, &data, config(Layer1Mode::Auto, 1, 7)).unwrap();
    s.run(20).unwrap();
    let kept = s.prune_top();
    assert_eq!(s.network().width(1), kept.len());
    s.check_invariants().unwrap();
    s.grow().unwrap();
    assert_eq!(s.network().depth(), 2);
    assert_eq!(s.network().top_cap(), kept.len());
    s.run(10).unwrap();
}

#[test]
fn f32_chain_runs() {
    let m = common::block_corpus(12, 3, 10, 15, 2);
    let data: Observations<f32> = Observations::Counts(m);
    let mut rng = RngStream::new(1);
    let net = GbnNetwork::<f32>::init(12, 5, Link::PoissonCount, Hyperparams::default(), &mut rng).unwrap();
    let mut s = gbn::Sampler32::new(net, &data, config(Layer1Mode::Auto, 1, 1)).unwrap();
    s.run(20).unwrap();
}
