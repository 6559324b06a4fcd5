//! Recovery perturbation, cross-agent views, clip curation and dataset jobs.

pub mod clips;
pub mod dataset;
pub mod perturb;
pub mod seed;

pub use clips::{
    clip_is_valid, clip_windows, constant_velocity_ade, constant_velocity_ade_with, curate, CandidateClip, ClipConfig,
    ClipSample, ClipWindow, PlanarPose, DEFAULT_ADE_THRESHOLD, DEFAULT_DT,
};
pub use dataset::{
    build_dataset, cross_agent_job, ego_job, footprints_overlap, render_job, render_view, DatasetConfig, EgoFilter,
    PerturbationRecord, Provenance, RenderJob, RenderedView,
};
pub use perturb::{perturb_trajectory, perturb_trajectory_with_draw, OffsetProfile, PerturbationDraw, PerturbationSpec};
pub use seed::{fnv1a64, job_seed, selection_seed, splitmix64};
