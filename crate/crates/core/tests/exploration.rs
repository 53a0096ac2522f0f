use gbn::exploration::NodeId;
use gbn::{
    extract_subnetwork, extract_tree, generate_synthetic, project, rank_nodes, top_words, ColMatrix, Hyperparams,
    Link, Network, RngStream,
};
use proptest::prelude::*;

fn random_net(v: usize, k: usize, depth: usize, seed: u64) -> Network {
    let mut rng = RngStream::new(seed);
    let mut net = Network::init(v, k, Link::PoissonCount, Hyperparams::with_eta(0.3), &mut rng).unwrap();
    for _ in 1..depth {
        net.add_layer(&mut rng).unwrap();
    }
    net
}

/// Two layers: `Phi2 = [[0.9, 0.05], [0.05, 0.9], [0.05, 0.05]]`.
fn example_net() -> Network {
    let mut net = random_net(4, 3, 2, 1);
    net.phi[1] = ColMatrix::from_columns(3, vec![vec![0.9, 0.05, 0.05], vec![0.05, 0.9, 0.05]]).unwrap();
    net.r = vec![1.0, 1.0];
    net.width_caps = vec![3, 3];
    net.validate().unwrap();
    net
}

#[test]
fn tree_example() {
    let net = example_net();
    let tree = extract_tree(&net, NodeId::new(2, 0), &[1.0]).unwrap();
    assert_eq!(tree.nodes, vec![NodeId::new(1, 0), NodeId::new(2, 0)]);
    assert_eq!(tree.edges.len(), 1);
    assert_eq!(tree.edges[0].child, NodeId::new(1, 0));
    assert!((tree.edges[0].weight - 0.9).abs() < 1e-12);
}

#[test]
fn infinite_threshold_keeps_root_only() {
    let net = example_net();
    let tree = extract_tree(&net, NodeId::new(2, 1), &[f64::INFINITY]).unwrap();
    assert_eq!(tree.nodes, vec![NodeId::new(2, 1)]);
    assert!(tree.edges.is_empty());
    let dot = tree.to_dot(&|n| n.to_string());
    assert!(dot.contains("L2_1") && !dot.contains("->"));
}

#[test]
fn out_of_range_root_rejected() {
    let net = example_net();
    assert!(extract_tree(&net, NodeId::new(2, 5), &[1.0]).is_err());
    assert!(extract_tree(&net, NodeId::new(3, 0), &[1.0]).is_err());
}

#[test]
fn top_words_ties_go_to_lower_id() {
    assert_eq!(rank_nodes(&[0.2, 0.5, 0.2, 0.5]), vec![1, 3, 0, 2]);
    let mut net = random_net(4, 1, 1, 2);
    net.phi[0] = ColMatrix::from_columns(4, vec![vec![0.25; 4]]).unwrap();
    let p = project(&net, 1).unwrap();
    let top: Vec<usize> = top_words(&p, 0, 3).unwrap().into_iter().map(|x| x.0).collect();
    assert_eq!(top, vec![0, 1, 2]);
}

#[test]
fn synthetic_mean_single_factor() {
    let mut net = random_net(1, 1, 1, 3);
    net.r = vec![2.0];
    let n = 200_000;
    let out = generate_synthetic(&net, n, Some(&[1.0]), &mut RngStream::new(7)).unwrap();
    let mean = out.rates.iter().map(|r| r[0]).sum::<f64>() / n as f64;
    let se = (2.0 / n as f64).sqrt();
    assert!((mean - 2.0).abs() < 3.0 * se, "{mean}");
}

#[test]
fn synthetic_needs_scales() {
    let net = random_net(5, 3, 2, 3);
    assert!(generate_synthetic(&net, 3, None, &mut RngStream::new(0)).is_err());
    assert!(generate_synthetic(&net, 3, Some(&[1.0]), &mut RngStream::new(0)).is_err());
    let out = generate_synthetic(&net, 3, Some(&[1.0, 1.0]), &mut RngStream::new(0)).unwrap();
    assert_eq!(out.observations.unwrap().n_docs(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projections_are_stochastic(v in 2usize..15, k in 1usize..8, depth in 1usize..4, seed: u64) {
        let net = random_net(v, k, depth, seed);
        for t in 1..=depth {
            let p = project(&net, t).unwrap();
            prop_assert_eq!(p.matrix.rows(), v);
            prop_assert_eq!(p.weights.len(), net.width(t));
            for col in p.matrix.columns() {
                prop_assert!((col.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            let total: f64 = p.weights.iter().sum();
            let r_total: f64 = net.r.iter().sum();
            prop_assert!((total - r_total).abs() < 1e-9 * r_total.max(1.0));
        }
    }

    #[test]
    fn tree_shrinks_as_threshold_grows(seed: u64, lo in 0.0f64..3.0, extra in 0.0f64..3.0) {
        let net = random_net(10, 6, 3, seed);
        let root = NodeId::new(3, 0);
        let small = extract_tree(&net, root, &[lo + extra]).unwrap();
        let big = extract_tree(&net, root, &[lo]).unwrap();
        for n in &small.nodes {
            prop_assert!(big.nodes.contains(n));
        }
        for e in &small.edges {
            prop_assert!(big.edges.iter().any(|b| b.parent == e.parent && b.child == e.child));
        }
    }

    #[test]
    fn subnetwork_contains_each_tree(seed: u64) {
        let net = random_net(10, 6, 3, seed);
        let roots = [NodeId::new(3, 0), NodeId::new(2, 1)];
        let tau = [1.0, 0.5];
        let sub = extract_subnetwork(&net, &roots, &tau).unwrap();
        for root in roots {
            if root.index >= net.width(root.layer) {
                continue;
            }
            for n in extract_tree(&net, root, &tau).unwrap().nodes {
                prop_assert!(sub.nodes.contains(&n));
            }
        }
    }

    #[test]
    fn synthetic_rates_match_bottom_layer(seed: u64, depth in 1usize..4) {
        let net = random_net(6, 4, depth, seed);
        let c = vec![1.0; depth];
        let out = generate_synthetic(&net, 20, Some(&c), &mut RngStream::new(seed)).unwrap();
        prop_assert_eq!(out.rates.len(), 20);
        for r in &out.rates {
            prop_assert_eq!(r.len(), 6);
            prop_assert!(r.iter().all(|&x| x >= 0.0 && x.is_finite()));
        }
    }
}
