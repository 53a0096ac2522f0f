mod common;

use gbn::training::effective_width;
use gbn::{active_factors, train_fixed, train_layerwise, Hyperparams, Link, Network, RngStream, SamplerConfig, TrainSchedule};

fn schedule(t_max: usize, seed: u64) -> TrainSchedule {
    TrainSchedule {
        t_max,
        k1max: 8,
        burnin: vec![20],
        post: vec![10],
        seed,
        validate: true,
        early_stop_floor: None,
        ..TrainSchedule::default()
    }
}

#[test]
fn pruning_keeps_positive_counts() {
    assert_eq!(active_factors(&[5, 0, 3, 0], &[0.1, 0.2, 0.3, 0.4]), vec![0, 2]);
}

#[test]
fn pruning_all_zero_keeps_largest_weight() {
    assert_eq!(active_factors(&[0, 0, 0], &[0.2, 0.9, 0.1]), vec![1]);
    assert_eq!(active_factors(&[0, 0], &[0.5, 0.5]), vec![0]);
}

#[test]
fn single_depth_gives_one_snapshot() {
    let data = common::toy_counts();
    let out = train_layerwise(&data, Link::PoissonCount, Hyperparams::default(), &schedule(1, 4), &mut |_| {}).unwrap();
    assert_eq!(out.networks.len(), 1);
    assert_eq!(out.networks[0].widths().len(), 1);
    assert!(out.networks[0].width(1) <= 8);
}

#[test]
fn widths_never_exceed_caps() {
    for (data, link) in [
        (common::toy_counts(), Link::PoissonCount),
        (common::toy_binary(), Link::BernoulliPoisson),
        (common::toy_real(), Link::PoissonRandomizedGamma),
    ] {
        let mut records = Vec::new();
        let out = train_layerwise(&data, link, Hyperparams::default(), &schedule(3, 9), &mut |r| {
            records.push(r.clone())
        })
        .unwrap();
        for (i, net) in out.networks.iter().enumerate() {
            assert_eq!(net.depth(), i + 1);
            let w = net.widths();
            for t in 1..w.len() {
                assert!(w[t] <= w[t - 1], "{link}: {w:?}");
            }
            assert_eq!(net.c_medians.as_ref().map(Vec::len), Some(i + 1));
        }
        assert_eq!(records.iter().filter(|r| r.pruned).count(), out.networks.len());
        for r in &records {
            for t in 1..r.layer_totals.len() {
                assert!(r.layer_totals[t] <= r.layer_totals[t - 1]);
            }
        }
    }
}

#[test]
fn training_is_reproducible() {
    let data = common::toy_counts();
    let run = || {
        train_layerwise(&data, Link::PoissonCount, Hyperparams::default(), &schedule(2, 11), &mut |_| {})
            .unwrap()
            .networks
    };
    assert_eq!(run(), run());
}

#[test]
fn zero_iterations_leave_network_unchanged() {
    let data = common::toy_counts();
    let mut rng = RngStream::new(2);
    let net = Network::init(12, 5, Link::PoissonCount, Hyperparams::default(), &mut rng).unwrap();
    let sampler = train_fixed(net.clone(), &data, 0, SamplerConfig::seeded(1)).unwrap();
    assert_eq!(sampler.network(), &net);
    let sampler = train_fixed(net.clone(), &data, 3, SamplerConfig::seeded(1)).unwrap();
    assert_eq!(sampler.network().widths(), net.widths());
}

#[test]
fn bad_schedule_rejected() {
    let data = common::toy_counts();
    let mut s = schedule(1, 0);
    s.burnin = vec![0];
    assert!(train_layerwise(&data, Link::PoissonCount, Hyperparams::default(), &s, &mut |_| {}).is_err());
}

#[test]
fn effective_width_counts_heavy_factors() {
    assert_eq!(effective_width(&[0.5, 0.3, 0.19, 0.01], 0.05), 3);
}
