//! Feature alignment between rendered and camera-like images at desk scale:
//! a tiny encoder, the paired spatial loss, the adversarial domain loss with
//! gradient reversal, and finite-difference checks of every gradient.

pub mod demo;
pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod objective;

pub use demo::{
    align_demo, compare_runs, synthesize, trace_csv, AlignReport, DemoConfig, DemoData, DemoImages, RunSummary,
    SeedComparison, StepRecord,
};
pub use gradcheck::{check_gradients, central_difference, relative_error, GradCheck, GradCheckReport, FD_STEP, REL_TOL};
pub use loss::{
    anneal_lambda, global_loss, global_loss_grad, global_pool, global_pool_backward, grl_backward, grl_forward,
    spatial_loss, spatial_loss_grad, total_loss, AnnealState, LossWeights,
};
pub use model::{patch_means, DomainClassifier, FeatureMap, LinearHead, TinyEncoder, LOGIT_CLAMP, PATCH};
pub use objective::{evaluate, gradients, AlignModel, Batch, Gradients, LossBreakdown, Reversal};
