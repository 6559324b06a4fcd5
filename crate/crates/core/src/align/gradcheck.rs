//! Central finite differences against the hand-written gradients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{spatial_loss, spatial_loss_grad, LossWeights};
use super::objective::{evaluate, gradients, paired_raster_features, AlignModel, Batch, Reversal};
use crate::error::Result;

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
/// Denominator floor for the relative error. Without it, entries whose true
/// value is near zero compare roundoff against roundoff.
pub const REL_FLOOR: f64 = 1e-5;

/// `|a − n| / max(|a|, |n|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Central differences of every output of `f` with respect to every entry of
/// `x`: `out[k][i] = ∂f_k/∂x_i`.
pub fn central_difference<F>(f: F, x: &[f64], h: f64) -> Vec<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let cols: Vec<Vec<f64>> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let mut xp = x.to_vec();
            xp[i] = x[i] + h;
            let fp = f(&xp);
            xp[i] = x[i] - h;
            let fm = f(&xp);
            fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        })
        .collect();
    let outputs = cols.first().map_or(0, Vec::len);
    (0..outputs).map(|k| cols.iter().map(|c| c[k]).collect()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
}

pub fn compare(analytic: &[f64], numeric: &[f64]) -> GradCheck {
    let mut out = GradCheck {
        checked: analytic.len(),
        ..Default::default()
    };
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        let e = relative_error(*a, *n);
        if e > out.max_rel_error || e.is_nan() {
            out.max_rel_error = e;
            out.worst_index = i;
        }
    }
    out
}

/// Every comparison made for one model and batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub spatial_encoder: GradCheck,
    pub global_encoder: GradCheck,
    /// Reversed encoder gradient divided by `−λ`, against differences of the
    /// unreversed loss.
    pub global_encoder_reversed: GradCheck,
    pub global_classifier: GradCheck,
    pub total_encoder: GradCheck,
    pub total_classifier: GradCheck,
    pub total_head: GradCheck,
    /// Reversed encoder gradient is exactly `−λ ×` the identity-layer one.
    pub grl_exact: bool,
    /// The spatial gradient with respect to the raster features is exactly
    /// zero while the loss value still depends on them.
    pub raster_detached: bool,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        [
            self.spatial_encoder,
            self.global_encoder,
            self.global_encoder_reversed,
            self.global_classifier,
            self.total_encoder,
            self.total_classifier,
            self.total_head,
        ]
        .iter()
        .map(|c| c.max_rel_error)
        .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() < REL_TOL && self.grl_exact && self.raster_detached
    }
}

/// Checks the gradients of the spatial, domain and total losses with respect
/// to every encoder, classifier and head parameter.
pub fn check_gradients(model: &AlignModel, batch: &Batch, w: &LossWeights, lambda: f64) -> Result<GradCheckReport> {
    let frozen = paired_raster_features(model, batch);
    let (_, plain) = gradients(model, batch, w, Reversal::Identity)?;
    let (_, reversed) = gradients(model, batch, w, Reversal::Grl(lambda))?;

    let terms = |m: &AlignModel| {
        let l = evaluate(m, batch, w, Some(&frozen)).expect("batch was validated");
        vec![l.spatial, l.global, l.total]
    };
    let enc = central_difference(
        |p| {
            let mut m = model.clone();
            m.encoder.params.copy_from_slice(p);
            terms(&m)
        },
        &model.encoder.params,
        FD_STEP,
    );
    let cls = central_difference(
        |p| {
            let mut m = model.clone();
            m.classifier.params.copy_from_slice(p);
            terms(&m)
        },
        &model.classifier.params,
        FD_STEP,
    );
    let head = central_difference(
        |p| {
            let mut m = model.clone();
            m.head.params.copy_from_slice(p);
            terms(&m)
        },
        &model.head.params,
        FD_STEP,
    );

    let unreversed: Vec<f64> = if lambda != 0.0 {
        reversed.encoder_global_reversed.iter().map(|g| g / -lambda).collect()
    } else {
        plain.encoder_global.clone()
    };
    let total_cls: Vec<f64> = plain.classifier.iter().map(|g| w.lambda_g * g).collect();
    let grl_exact = plain
        .encoder_global
        .iter()
        .zip(&reversed.encoder_global_reversed)
        .all(|(p, r)| *r == -lambda * p);

    let raster_detached = match batch.pairs.first() {
        Some(&(r, s)) => {
            let real = model.encoder.forward(&batch.real[r]).features().clone();
            let raster = model.encoder.forward(&batch.raster[s]).features().clone();
            let mut moved = raster.clone();
            moved.values.iter_mut().for_each(|v| *v += 0.25);
            let (_, g) = spatial_loss_grad(&real, &raster)?;
            g.values.iter().all(|v| *v == 0.0) && spatial_loss(&real, &moved)? != spatial_loss(&real, &raster)?
        }
        None => true,
    };

    Ok(GradCheckReport {
        spatial_encoder: compare(&plain.encoder_spatial, &enc[0]),
        global_encoder: compare(&plain.encoder_global, &enc[1]),
        global_encoder_reversed: compare(&unreversed, &enc[1]),
        global_classifier: compare(&plain.classifier, &cls[1]),
        total_encoder: compare(&plain.encoder, &enc[2]),
        total_classifier: compare(&total_cls, &cls[2]),
        total_head: compare(&plain.head, &head[2]),
        grl_exact,
        raster_detached,
    })
}
