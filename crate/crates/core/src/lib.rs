//! Desk-scale numerical workbench for the InfoNCE loss family and its
//! robust-reweighting interpretation.
//!
//! The crate covers five connected pieces:
//!
//! * [`scores`] — unit-sphere embeddings, cosine similarity, and batched
//!   positive/negative score sets;
//! * [`losses`] — InfoNCE, the un-tempered objective, its mean-variance
//!   surrogate, and kernel-reweighted InfoNCE (ADNCE), with analytic score
//!   gradients;
//! * [`dro`] — worst-case negative reweighting inside a divergence ball,
//!   the scalar dual that identifies the temperature with the ball radius,
//!   and the finite-sample deviation bound;
//! * [`phidiv`] — convex divergence generators, conjugates, and variational
//!   divergence estimation (shifted and plain bounds);
//! * [`mi`] — mutual-information estimation on correlated Gaussians with a
//!   trainable quadratic critic;
//! * [`toytrain`] — synthetic contrastive-learning experiments: cluster
//!   data, a linear encoder trained end to end, linear evaluation, and the
//!   temperature/variance sweep protocols.
//!
//! Everything is `f64`, deterministic under explicit 64-bit seeds, and
//! exercised against independent oracles (closed forms, finite differences,
//! brute-force enumeration) in the test suites.

pub mod dro;
pub mod error;
pub mod losses;
pub mod mi;
pub mod num;
pub mod phidiv;
pub mod scores;
pub mod toytrain;

pub use dro::{
    alpha_variance_approx, cl_dro_loss, equivalence_gap, generalization_bound, kl_divergence,
    optimal_alpha, worst_case_weights_constrained, worst_case_weights_kl, BoundParams,
    DroConstraint, DualSolution, WeightVector,
};
pub use error::{Error, Result};
pub use losses::{
    adnce, adnce_weights, alternative_weights, basic_loss, infonce, loss_gradient,
    mean_variance_loss, LossConfig, LossKind, LossValue, ScoreGradient, WeightFamily,
};
pub use mi::{
    compare_estimators, estimate_mi, sample_pairs, true_mi, GaussianPairConfig, MiEstimate,
    MiEstimator, MiRunConfig, QuadraticCritic,
};
pub use phidiv::{
    chi2_variational, dv_divergence, exact_discrete_divergence, numeric_conjugate,
    optimal_lambda, register_divergence, tight_divergence_tabular, tight_variational_divergence,
    PhiSpec, SampleSet, TabularFit,
};
pub use scores::{build_score_batch, cosine_similarity, normalize, Embedding, ScoreBatch};
pub use toytrain::{
    argmax_tau_per_ratio, linear_eval, make_clusters, sample_contrastive_batch, tau_sweep,
    train_encoder, variance_sweep, ClusterDataConfig, ContrastiveItem, Dataset, Encoder,
    NoiseConfig, SweepSettings, TauSweepCell, TrainConfig, TrainLog, TrainStepRecord,
    VarianceSweepRow,
};
