//! The combined objective over a batch of paired raster/real images and its
//! hand-written gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{
    global_pool, global_pool_backward, grl_backward, grl_forward, spatial_loss, spatial_loss_grad, total_loss, LossWeights,
};
use super::model::{DomainClassifier, EncoderCache, FeatureMap, LinearHead, TinyEncoder};
use crate::error::{Error, Result};

/// Domain labels for the classifier.
pub const RASTER_LABEL: f64 = 0.0;
pub const REAL_LABEL: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignModel {
    pub encoder: TinyEncoder,
    pub head: LinearHead,
    pub classifier: DomainClassifier,
}

impl AlignModel {
    pub fn new(hidden: usize, feature_dim: usize, classifier_hidden: usize, seed: u64) -> AlignModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = TinyEncoder::new(hidden, feature_dim, &mut rng);
        let classifier = DomainClassifier::new(feature_dim, classifier_hidden, &mut rng);
        AlignModel {
            encoder,
            head: LinearHead::zeros(feature_dim),
            classifier,
        }
    }
}

/// Patch means of raster images (with task targets), real images, and
/// `(real, raster)` index pairs showing the same scene.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub raster: &'a [Vec<[f64; 3]>],
    pub targets: &'a [f64],
    pub real: &'a [Vec<[f64; 3]>],
    pub pairs: &'a [(usize, usize)],
}

impl Batch<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.raster.is_empty() || self.real.is_empty() {
            return Err(Error::Insufficient("alignment needs raster and real images".into()));
        }
        if self.targets.len() != self.raster.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} targets for {} raster images",
                self.targets.len(),
                self.raster.len()
            )));
        }
        if let Some(&(r, s)) = self.pairs.iter().find(|(r, s)| *r >= self.real.len() || *s >= self.raster.len()) {
            return Err(Error::invalid(format!("pair ({r}, {s}) is out of range")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Mean squared error of the head on raster images.
    pub task: f64,
    /// Mean spatial loss over pairs.
    pub spatial: f64,
    /// Mean domain cross-entropy over all images.
    pub global: f64,
    pub total: f64,
}

/// How the domain loss reaches the encoder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reversal {
    /// Plain backpropagation: the exact gradient of the total objective.
    Identity,
    /// Gradient reversal with strength `λ`.
    Grl(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// Encoder update direction: task, `λ_s`-weighted spatial and
    /// `λ_g`-weighted domain terms, the last after the reversal.
    pub encoder: Vec<f64>,
    /// Encoder gradients of the individual, unweighted terms. The domain one
    /// is the plain (identity-layer) gradient.
    pub encoder_task: Vec<f64>,
    pub encoder_spatial: Vec<f64>,
    pub encoder_global: Vec<f64>,
    /// `encoder_global` as delivered through the reversal layer.
    pub encoder_global_reversed: Vec<f64>,
    pub head: Vec<f64>,
    /// `∂L_global/∂θ_D`, unweighted. The total objective's classifier
    /// gradient is `λ_g` times this.
    pub classifier: Vec<f64>,
}

struct Forward {
    raster: Vec<EncoderCache>,
    real: Vec<EncoderCache>,
}

fn forward(model: &AlignModel, batch: &Batch) -> Forward {
    Forward {
        raster: batch.raster.iter().map(|p| model.encoder.forward(p)).collect(),
        real: batch.real.iter().map(|p| model.encoder.forward(p)).collect(),
    }
}

fn losses(model: &AlignModel, batch: &Batch, fw: &Forward, frozen: Option<&[FeatureMap]>, w: &LossWeights) -> Result<LossBreakdown> {
    let mut task = 0.0;
    for (c, y) in fw.raster.iter().zip(batch.targets) {
        let e = model.head.predict(&global_pool(c.features())) - y;
        task += e * e;
    }
    task /= batch.raster.len() as f64;
    let mut spatial = 0.0;
    for (k, &(r, s)) in batch.pairs.iter().enumerate() {
        let raster = frozen.map_or_else(|| fw.raster[s].features(), |f| &f[k]);
        spatial += spatial_loss(fw.real[r].features(), raster)?;
    }
    if !batch.pairs.is_empty() {
        spatial /= batch.pairs.len() as f64;
    }
    let mut global = 0.0;
    for (caches, label) in [(&fw.raster, RASTER_LABEL), (&fw.real, REAL_LABEL)] {
        for c in caches {
            global += DomainClassifier::bce(&model.classifier.forward(&global_pool(c.features())), label);
        }
    }
    global /= (fw.raster.len() + fw.real.len()) as f64;
    Ok(LossBreakdown {
        task,
        spatial,
        global,
        total: total_loss(task, spatial, global, w),
    })
}

/// Loss values. With `frozen_raster`, the spatial term compares against those
/// fixed maps (one per pair) instead of re-encoding the raster images, which
/// is the function whose gradient [`gradients`] returns.
pub fn evaluate(model: &AlignModel, batch: &Batch, w: &LossWeights, frozen_raster: Option<&[FeatureMap]>) -> Result<LossBreakdown> {
    batch.validate()?;
    losses(model, batch, &forward(model, batch), frozen_raster, w)
}

/// Raster feature maps of each pair at the current parameters.
pub fn paired_raster_features(model: &AlignModel, batch: &Batch) -> Vec<FeatureMap> {
    batch
        .pairs
        .iter()
        .map(|&(_, s)| model.encoder.forward(&batch.raster[s]).features().clone())
        .collect()
}

/// Loss values and gradients. The spatial term's raster side is detached;
/// the reversal applies to the encoder's share of the domain loss.
pub fn gradients(model: &AlignModel, batch: &Batch, w: &LossWeights, reversal: Reversal) -> Result<(LossBreakdown, Gradients)> {
    batch.validate()?;
    let fw = forward(model, batch);
    let breakdown = losses(model, batch, &fw, None, w)?;
    let ne = model.encoder.params.len();
    let mut enc_task = vec![0.0; ne];
    let mut enc_spatial = vec![0.0; ne];
    let mut enc_global = vec![0.0; ne];
    let mut head = vec![0.0; model.head.params.len()];
    let mut cls = vec![0.0; model.classifier.params.len()];
    let n_raster = batch.raster.len() as f64;
    let n_all = (batch.raster.len() + batch.real.len()) as f64;

    for (c, y) in fw.raster.iter().zip(batch.targets) {
        let g = global_pool(c.features());
        let gy = 2.0 * (model.head.predict(&g) - y) / n_raster;
        let gg = model.head.backward(&g, gy, &mut head);
        model.encoder.backward(c, &global_pool_backward(&gg, c.features().n), &mut enc_task);
    }

    if !batch.pairs.is_empty() {
        let mut real_grads: Vec<Option<FeatureMap>> = vec![None; fw.real.len()];
        let scale = 1.0 / batch.pairs.len() as f64;
        for &(r, s) in batch.pairs {
            let (g_real, _detached) = spatial_loss_grad(fw.real[r].features(), fw.raster[s].features())?;
            let acc = real_grads[r].get_or_insert_with(|| FeatureMap::zeros(g_real.n, g_real.d));
            for (a, b) in acc.values.iter_mut().zip(&g_real.values) {
                *a += scale * b;
            }
        }
        for (c, g) in fw.real.iter().zip(&real_grads) {
            if let Some(g) = g {
                model.encoder.backward(c, g, &mut enc_spatial);
            }
        }
    }

    for (caches, label) in [(&fw.raster, RASTER_LABEL), (&fw.real, REAL_LABEL)] {
        for c in caches.iter() {
            let g = grl_forward(&global_pool(c.features()));
            let cc = model.classifier.forward(&g);
            let gg = model.classifier.backward(&cc, label, 1.0 / n_all, &mut cls);
            model.encoder.backward(c, &global_pool_backward(&gg, c.features().n), &mut enc_global);
        }
    }
    // The encoder backward pass is linear in its upstream gradient, so the
    // reversal can be applied once to the accumulated parameter gradient.
    let enc_global_reversed = match reversal {
        Reversal::Identity => enc_global.clone(),
        Reversal::Grl(lambda) => grl_backward(&enc_global, lambda),
    };
    let encoder = (0..ne)
        .map(|i| enc_task[i] + w.lambda_s * enc_spatial[i] + w.lambda_g * enc_global_reversed[i])
        .collect();
    Ok((
        breakdown,
        Gradients {
            encoder,
            encoder_task: enc_task,
            encoder_spatial: enc_spatial,
            encoder_global: enc_global,
            encoder_global_reversed: enc_global_reversed,
            head,
            classifier: cls,
        },
    ))
}
