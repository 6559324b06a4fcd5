//! Desk-scale alignment demo on synthetic two-domain data.
//!
//! The "raster" domain is this crate's renderer with the default palette on
//! black. The stand-in "real" domain renders the same scenes with the
//! alternate palette, a sky/ground backdrop and per-pixel noise. The task
//! head regresses vehicle pixel coverage and only ever sees raster labels, so
//! its error on real images measures how well the features transfer.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{anneal_lambda, global_pool, AnnealState, LossWeights};
use super::model::patch_means;
use super::objective::{gradients, AlignModel, Batch, Reversal};
use crate::augment::splitmix64;
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, CameraMount, SE3Pose, Vec3};
use crate::raster::{render_frame, Background, Framebuffer, RenderConfig};
use crate::scene::{Cuboid, Palette, Polyline, Rgb, SceneFrame, SemanticClass};

/// Loss weights for the demo. At this scale the task gradient dwarfs the
/// alignment terms under the full-model weights, so both are raised.
pub const DEMO_WEIGHTS: LossWeights = LossWeights {
    lambda_s: 2.0,
    lambda_g: 50.0,
};

/// Regression target is vehicle pixel coverage times this.
pub const TARGET_SCALE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub seed: u64,
    pub steps: usize,
    pub train_scenes: usize,
    pub heldout_scenes: usize,
    /// Training scenes whose raster and real renders form spatial pairs.
    pub paired: usize,
    pub width: u32,
    pub height: u32,
    /// Per-channel pixel noise of the real domain, in 8-bit levels.
    pub noise_std: f64,
    pub hidden: usize,
    pub feature_dim: usize,
    pub classifier_hidden: usize,
    pub weights: LossWeights,
    /// Reverse the domain gradient into the encoder. With `false` the
    /// classifier still trains as a probe but the encoder ignores it.
    pub grl: bool,
    /// Schedule shape; `p` is overwritten with the training progress.
    pub anneal: AnnealState,
    pub lr_encoder: f64,
    pub lr_head: f64,
    pub lr_classifier: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            seed: 0,
            steps: 600,
            train_scenes: 64,
            heldout_scenes: 64,
            paired: 64,
            width: 64,
            height: 32,
            noise_std: 12.0,
            hidden: 16,
            feature_dim: 8,
            classifier_hidden: 8,
            weights: DEMO_WEIGHTS,
            grl: true,
            anneal: AnnealState::default(),
            lr_encoder: 0.1,
            lr_head: 0.1,
            lr_classifier: 0.2,
        }
    }
}

impl DemoConfig {
    /// Same data and optimizer, no alignment terms and no reversal.
    pub fn baseline(&self) -> DemoConfig {
        DemoConfig {
            weights: LossWeights::NONE,
            grl: false,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.steps == 0 || self.train_scenes == 0 || self.heldout_scenes == 0 {
            return Err(Error::Insufficient("demo needs steps, training and held-out scenes".into()));
        }
        if self.paired > self.train_scenes {
            return Err(Error::Config(format!(
                "paired = {} exceeds train_scenes = {}",
                self.paired, self.train_scenes
            )));
        }
        if self.hidden == 0 || self.feature_dim == 0 || self.classifier_hidden == 0 {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        for (name, lr) in [
            ("lr_encoder", self.lr_encoder),
            ("lr_head", self.lr_head),
            ("lr_classifier", self.lr_classifier),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {lr}")));
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config(format!("noise_std must be non-negative, got {}", self.noise_std)));
        }
        anneal_lambda(&AnnealState { p: 1.0, ..self.anneal })?;
        Ok(())
    }
}

/// Patch means and targets of one split of one domain.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DemoImages {
    pub patches: Vec<Vec<[f64; 3]>>,
    pub targets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoData {
    pub train_raster: DemoImages,
    pub train_real: DemoImages,
    pub heldout_raster: DemoImages,
    pub heldout_real: DemoImages,
    /// `(real, raster)` indices into the training sets.
    pub pairs: Vec<(usize, usize)>,
}

fn demo_mount(width: u32, height: u32) -> CameraMount {
    let f = width as f64 * 0.45;
    let intr = CameraIntrinsics {
        fx: f,
        fy: f,
        cx: width as f64 / 2.0,
        cy: height as f64 / 2.0,
    };
    CameraMount::forward("demo", intr, Vec3::new(0.0, 0.0, 1.6), 0.06, width, height)
}

fn flat(class: SemanticClass, corners: &[(f64, f64)], closed: bool) -> Polyline {
    Polyline::new(corners.iter().map(|&(x, y)| Vec3::new(x, y, 0.0)).collect(), class, closed).expect("demo polyline")
}

/// A random road scene seen from the origin.
pub fn demo_scene(rng: &mut impl Rng, width: u32, height: u32) -> SceneFrame {
    use SemanticClass::*;
    let half = rng.random_range(4.0..8.0);
    let mut map = vec![flat(RoadSurface, &[(-5.0, -half), (150.0, -half), (150.0, half), (-5.0, half)], true)];
    if rng.random_bool(0.4) {
        let x = rng.random_range(12.0..40.0);
        map.push(flat(Crosswalk, &[(x, -half), (x + 3.0, -half), (x + 3.0, half), (x, half)], true));
    }
    for y in [-1.75, 1.75] {
        map.push(flat(LaneLine, &[(0.0, y), (50.0, y), (150.0, y)], false));
    }
    let mut actors = Vec::new();
    for _ in 0..rng.random_range(0..=4) {
        let oncoming = rng.random_bool(0.3);
        let yaw = rng.random_range(-0.4..0.4) + if oncoming { std::f64::consts::PI } else { 0.0 };
        actors.push(Cuboid {
            length: rng.random_range(3.8..5.2),
            width: rng.random_range(1.7..2.1),
            height: rng.random_range(1.4..1.9),
            pose: SE3Pose::from_yaw(yaw, Vec3::new(rng.random_range(5.0..40.0), rng.random_range(-6.0..6.0), 0.0)),
            class: Vehicle,
        });
    }
    for _ in 0..rng.random_range(0..=2) {
        actors.push(Cuboid {
            length: 0.6,
            width: 0.6,
            height: rng.random_range(1.5..1.9),
            pose: SE3Pose::from_translation(Vec3::new(rng.random_range(6.0..30.0), rng.random_range(-7.0..7.0), 0.0)),
            class: Pedestrian,
        });
    }
    SceneFrame {
        timestamp: 0.0,
        map,
        actors,
        lights: Vec::new(),
        rigs: vec![demo_mount(width, height).rig_for(&SE3Pose::from_translation(Vec3::ZERO))],
    }
}

/// Fraction of pixels showing a vehicle.
pub fn vehicle_coverage(frame: &SceneFrame) -> Result<f64> {
    let mut palette = Palette::default();
    for c in SemanticClass::ALL {
        palette.set(c, Rgb::BLACK);
    }
    palette.set(SemanticClass::Vehicle, Rgb([255, 255, 255]));
    let cfg = RenderConfig {
        depth_decay: false,
        palette,
        ..Default::default()
    };
    let fb = render_frame(frame, 0, &cfg)?;
    let hits = fb.color.chunks_exact(3).filter(|p| p[0] > 0).count();
    Ok(hits as f64 / (fb.width * fb.height) as f64)
}

/// Render settings of the two domains.
pub fn domain_configs() -> (RenderConfig, RenderConfig) {
    let raster = RenderConfig::default();
    let real = RenderConfig {
        palette: Palette::alternate(),
        background: Background::SkyGround,
        ..Default::default()
    };
    (raster, real)
}

fn add_noise(fb: &mut Framebuffer, std: f64, rng: &mut impl Rng) {
    if std == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, std).expect("finite std");
    for c in fb.color.iter_mut() {
        *c = (*c as f64 + normal.sample(rng)).round().clamp(0.0, 255.0) as u8;
    }
}

struct Rendered {
    raster: Vec<[f64; 3]>,
    real: Vec<[f64; 3]>,
    target: f64,
}

fn render_scene(cfg: &DemoConfig, scene_seed: u64) -> Result<Rendered> {
    let mut rng = ChaCha8Rng::seed_from_u64(scene_seed);
    let frame = demo_scene(&mut rng, cfg.width, cfg.height);
    let (raster_cfg, real_cfg) = domain_configs();
    let raster = render_frame(&frame, 0, &raster_cfg)?;
    let mut real = render_frame(&frame, 0, &real_cfg)?;
    add_noise(&mut real, cfg.noise_std, &mut rng);
    Ok(Rendered {
        raster: patch_means(&raster)?,
        real: patch_means(&real)?,
        target: TARGET_SCALE * vehicle_coverage(&frame)?,
    })
}

fn render_split(cfg: &DemoConfig, base: u64, n: usize) -> Result<(DemoImages, DemoImages)> {
    let rendered: Vec<Rendered> = (0..n as u64)
        .into_par_iter()
        .map(|i| render_scene(cfg, splitmix64(base.wrapping_add(i))))
        .collect::<Result<_>>()?;
    let mut raster = DemoImages::default();
    let mut real = DemoImages::default();
    for r in rendered {
        raster.patches.push(r.raster);
        raster.targets.push(r.target);
        real.patches.push(r.real);
        real.targets.push(r.target);
    }
    Ok((raster, real))
}

/// Renders the training and held-out scenes of both domains.
pub fn synthesize(cfg: &DemoConfig) -> Result<DemoData> {
    cfg.validate()?;
    let root = splitmix64(cfg.seed ^ 0x414C_4947_4E44_454D);
    let (train_raster, train_real) = render_split(cfg, root, cfg.train_scenes)?;
    let (heldout_raster, heldout_real) = render_split(cfg, splitmix64(root), cfg.heldout_scenes)?;
    Ok(DemoData {
        train_raster,
        train_real,
        heldout_raster,
        heldout_real,
        pairs: (0..cfg.paired).map(|i| (i, i)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub lambda: f64,
    pub task: f64,
    pub spatial: f64,
    pub global: f64,
    pub total: f64,
    pub domain_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignReport {
    pub seed: u64,
    pub grl: bool,
    pub weights: LossWeights,
    pub trace: Vec<StepRecord>,
    /// Domain-classifier accuracy on held-out images of both domains.
    pub heldout_domain_accuracy: f64,
    /// Mean squared error of the task head on held-out real images.
    pub probe_error_real: f64,
    /// Same on held-out raster images.
    pub probe_error_raster: f64,
}

fn domain_accuracy(model: &AlignModel, raster: &[Vec<[f64; 3]>], real: &[Vec<[f64; 3]>]) -> f64 {
    let predict = |p: &Vec<[f64; 3]>| model.classifier.predict(&global_pool(model.encoder.forward(p).features())) > 0.5;
    let correct = raster.iter().filter(|p| !predict(p)).count() + real.iter().filter(|p| predict(p)).count();
    correct as f64 / (raster.len() + real.len()) as f64
}

fn probe_error(model: &AlignModel, images: &DemoImages) -> f64 {
    let sum: f64 = images
        .patches
        .iter()
        .zip(&images.targets)
        .map(|(p, y)| {
            let e = model.head.predict(&global_pool(model.encoder.forward(p).features())) - y;
            e * e
        })
        .sum();
    sum / images.patches.len() as f64
}

fn descend(params: &mut [f64], grad: &[f64], lr: f64) {
    for (p, g) in params.iter_mut().zip(grad) {
        *p -= lr * g;
    }
}

/// Trains encoder, head and domain classifier with full-batch gradient
/// descent. The classifier minimizes the unweighted domain loss; the encoder
/// gets the total objective with the domain term reversed when `cfg.grl`.
pub fn align_demo(data: &DemoData, cfg: &DemoConfig) -> Result<AlignReport> {
    cfg.validate()?;
    let batch = Batch {
        raster: &data.train_raster.patches,
        targets: &data.train_raster.targets,
        real: &data.train_real.patches,
        pairs: &data.pairs,
    };
    batch.validate()?;
    if data.heldout_raster.patches.is_empty() || data.heldout_real.patches.is_empty() {
        return Err(Error::Insufficient("no held-out images".into()));
    }
    let mut model = AlignModel::new(cfg.hidden, cfg.feature_dim, cfg.classifier_hidden, splitmix64(cfg.seed));
    let mut trace = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let p = step as f64 / cfg.steps as f64;
        let lambda = if cfg.grl {
            anneal_lambda(&AnnealState { p, ..cfg.anneal })?
        } else {
            0.0
        };
        let reversal = if cfg.grl { Reversal::Grl(lambda) } else { Reversal::Identity };
        let encoder_weights = if cfg.grl {
            cfg.weights
        } else {
            LossWeights {
                lambda_g: 0.0,
                ..cfg.weights
            }
        };
        let (loss, g) = gradients(&model, &batch, &encoder_weights, reversal)?;
        trace.push(StepRecord {
            step,
            lambda,
            task: loss.task,
            spatial: loss.spatial,
            global: loss.global,
            total: loss.total,
            domain_accuracy: domain_accuracy(&model, batch.raster, batch.real),
        });
        if !loss.total.is_finite() {
            return Err(Error::invalid(format!("loss diverged at step {step}")));
        }
        descend(&mut model.encoder.params, &g.encoder, cfg.lr_encoder);
        descend(&mut model.head.params, &g.head, cfg.lr_head);
        descend(&mut model.classifier.params, &g.classifier, cfg.lr_classifier);
    }
    Ok(AlignReport {
        seed: cfg.seed,
        grl: cfg.grl,
        weights: cfg.weights,
        trace,
        heldout_domain_accuracy: domain_accuracy(&model, &data.heldout_raster.patches, &data.heldout_real.patches),
        probe_error_real: probe_error(&model, &data.heldout_real),
        probe_error_raster: probe_error(&model, &data.heldout_raster),
    })
}

/// Per-step trace as CSV.
pub fn trace_csv(report: &AlignReport) -> String {
    let mut s = String::from("step,lambda,task,spatial,global,total,domain_accuracy\n");
    for r in &report.trace {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.step, r.lambda, r.task, r.spatial, r.global, r.total, r.domain_accuracy
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub heldout_domain_accuracy: f64,
    pub probe_error_real: f64,
    pub probe_error_raster: f64,
}

impl From<&AlignReport> for RunSummary {
    fn from(r: &AlignReport) -> Self {
        RunSummary {
            heldout_domain_accuracy: r.heldout_domain_accuracy,
            probe_error_real: r.probe_error_real,
            probe_error_raster: r.probe_error_raster,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedComparison {
    pub seed: u64,
    pub aligned: RunSummary,
    pub baseline: RunSummary,
}

impl SeedComparison {
    /// Aligned run confuses the classifier, the baseline does not, and the
    /// aligned head transfers better to real images.
    pub fn holds(&self) -> bool {
        (0.4..=0.6).contains(&self.aligned.heldout_domain_accuracy)
            && self.baseline.heldout_domain_accuracy > 0.9
            && self.aligned.probe_error_real < self.baseline.probe_error_real
    }
}

/// Runs the aligned configuration and its baseline on the same data for
/// each seed.
pub fn compare_runs(cfg: &DemoConfig, seeds: &[u64]) -> Result<Vec<SeedComparison>> {
    seeds
        .iter()
        .map(|&seed| {
            let cfg = DemoConfig { seed, ..cfg.clone() };
            let data = synthesize(&cfg)?;
            let aligned = align_demo(&data, &cfg)?;
            let baseline = align_demo(&data, &cfg.baseline())?;
            Ok(SeedComparison {
                seed,
                aligned: (&aligned).into(),
                baseline: (&baseline).into(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DemoConfig {
        DemoConfig {
            steps: 20,
            train_scenes: 6,
            heldout_scenes: 4,
            paired: 4,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let cfg = small();
        let data = synthesize(&cfg).unwrap();
        let a = align_demo(&data, &cfg).unwrap();
        let b = align_demo(&synthesize(&cfg).unwrap(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(trace_csv(&a).lines().count(), 21);
    }

    #[test]
    fn baseline_logs_alignment_terms() {
        let cfg = small().baseline();
        let r = align_demo(&synthesize(&cfg).unwrap(), &cfg).unwrap();
        assert!(r.trace.iter().all(|s| s.lambda == 0.0 && s.spatial > 0.0 && s.global > 0.0));
    }

    #[test]
    fn empty_inputs_rejected() {
        let cfg = small();
        let mut data = synthesize(&cfg).unwrap();
        data.train_real = DemoImages::default();
        data.pairs.clear();
        assert!(align_demo(&data, &cfg).is_err());
        assert!(synthesize(&DemoConfig { paired: 7, ..small() }).is_err());
    }

    #[test]
    fn coverage_counts_vehicles() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut frame = demo_scene(&mut rng, 64, 32);
        frame.actors.clear();
        assert_eq!(vehicle_coverage(&frame).unwrap(), 0.0);
        frame.actors.push(Cuboid {
            length: 4.5,
            width: 1.9,
            height: 1.6,
            pose: SE3Pose::from_translation(Vec3::new(8.0, 0.0, 0.0)),
            class: SemanticClass::Vehicle,
        });
        assert!(vehicle_coverage(&frame).unwrap() > 0.02);
    }
}
