//! Augmentable gamma belief networks.
//!
//! A gamma belief network stacks `T` layers of gamma-distributed hidden
//! units; each layer's shape parameters are the product of a
//! column-stochastic connection matrix and the hidden units above it. Count,
//! binary and nonnegative-real observations attach to the first layer through
//! Poisson, Bernoulli-Poisson and Poisson-randomized-gamma links.
//!
//! Inference is an upward-downward Gibbs sampler ([`GibbsSampler`]): latent
//! counts are partitioned and propagated upward with Chinese restaurant table
//! draws, then hidden units are resampled top-down. [`train_layerwise`]
//! grows the network one layer at a time, pruning unused factors.
//!
//! Stored parameters are generic over [`Real`] (`f32` or `f64`); random
//! variates are always computed in `f64`.

pub mod corpus;
pub mod distributions;
pub mod error;
pub mod evaluation;
pub mod exploration;
pub mod inference;
pub mod matrix;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod training;

pub use corpus::{DenseNonnegMatrix, HeldoutSplit, Observations, SparseCountMatrix, Vocabulary};
pub use error::{GbnError, Result};
pub use evaluation::{extract_features, heldout_perplexity, perplexity_from_rates, FeatureMatrix, PerplexityReport};
pub use exploration::{
    extract_subnetwork, extract_tree, generate_synthetic, node_weights, project, rank_nodes, top_words, Edge, NodeId,
    ProjectedFactors, Synthetic, TreeSpec,
};
pub use inference::{GibbsSampler, Layer1Mode, SamplerConfig};
pub use matrix::{ColMatrix, CountMatrix};
pub use model::{Concentration, DocCounts, DocLatentState, GbnNetwork, Hyperparams, LatentCountState, Link};
pub use rng::RngStream;
pub use scalar::Real;
pub use training::{active_factors, prune_layer, train_fixed, train_layerwise, TrainOutput, TrainRecord, TrainSchedule};

/// Double-precision network.
pub type Network = GbnNetwork<f64>;
/// Single-precision network.
pub type Network32 = GbnNetwork<f32>;
/// Double-precision sampler.
pub type Sampler = GibbsSampler<f64>;
/// Single-precision sampler.
pub type Sampler32 = GibbsSampler<f32>;
