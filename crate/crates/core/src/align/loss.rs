use serde::{Deserialize, Serialize};

use super::model::{DomainClassifier, FeatureMap};
use crate::error::{Error, Result};

/// Mean over locations of the squared distance between paired features.
/// The raster side is treated as a constant.
pub fn spatial_loss(real: &FeatureMap, raster: &FeatureMap) -> Result<f64> {
    real.same_shape(raster)?;
    let sum: f64 = real.values.iter().zip(&raster.values).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / real.n as f64)
}

/// Gradients of [`spatial_loss`]: `(∂/∂real, ∂/∂raster)`. The raster
/// gradient is identically zero because that branch is detached.
pub fn spatial_loss_grad(real: &FeatureMap, raster: &FeatureMap) -> Result<(FeatureMap, FeatureMap)> {
    real.same_shape(raster)?;
    let s = 2.0 / real.n as f64;
    let g = real.values.iter().zip(&raster.values).map(|(a, b)| s * (a - b)).collect();
    Ok((
        FeatureMap {
            n: real.n,
            d: real.d,
            values: g,
        },
        FeatureMap::zeros(raster.n, raster.d),
    ))
}

/// Column mean over the `N` locations.
pub fn global_pool(f: &FeatureMap) -> Vec<f64> {
    let mut g = vec![0.0; f.d];
    for j in 0..f.n {
        for (acc, v) in g.iter_mut().zip(f.row(j)) {
            *acc += v;
        }
    }
    g.iter_mut().for_each(|v| *v /= f.n as f64);
    g
}

/// Backward of [`global_pool`]: every row receives `grad / N`.
pub fn global_pool_backward(grad: &[f64], n: usize) -> FeatureMap {
    let row: Vec<f64> = grad.iter().map(|v| v / n as f64).collect();
    FeatureMap {
        n,
        d: grad.len(),
        values: row.iter().copied().cycle().take(n * grad.len()).collect(),
    }
}

/// Gradient reversal, forward: identity.
pub fn grl_forward(x: &[f64]) -> Vec<f64> {
    x.to_vec()
}

/// Gradient reversal, backward: `−λ · upstream`.
pub fn grl_backward(upstream: &[f64], lambda: f64) -> Vec<f64> {
    upstream.iter().map(|g| -lambda * g).collect()
}

/// Training progress and shape of the reversal-strength schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealState {
    pub p: f64,
    pub gamma: f64,
    pub scale: f64,
}

impl Default for AnnealState {
    fn default() -> Self {
        AnnealState {
            p: 0.0,
            gamma: 10.0,
            scale: 0.1,
        }
    }
}

impl AnnealState {
    pub fn at(p: f64) -> AnnealState {
        AnnealState { p, ..Default::default() }
    }
}

/// `scale · (2 / (1 + e^{−γp}) − 1)`.
pub fn anneal_lambda(state: &AnnealState) -> Result<f64> {
    if !(0.0..=1.0).contains(&state.p) {
        return Err(Error::OutOfRange {
            what: "training progress p",
            value: state.p,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if !(state.gamma > 0.0) {
        return Err(Error::invalid(format!("gamma must be positive, got {}", state.gamma)));
    }
    Ok(state.scale * (2.0 / (1.0 + (-state.gamma * state.p).exp()) - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_s: f64,
    pub lambda_g: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_s: 0.002,
            lambda_g: 0.1,
        }
    }
}

impl LossWeights {
    pub const NONE: LossWeights = LossWeights {
        lambda_s: 0.0,
        lambda_g: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if self.lambda_s >= 0.0 && self.lambda_g >= 0.0 && self.lambda_s.is_finite() && self.lambda_g.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("loss weights must be finite and non-negative"))
        }
    }
}

/// Binary cross-entropy of the domain classifier on pooled features `g`.
pub fn global_loss(g: &[f64], label: f64, d: &DomainClassifier) -> f64 {
    DomainClassifier::bce(&d.forward(g), label)
}

/// Gradients of [`global_loss`] as seen by each side of the reversal layer:
/// `(classifier params, ∂/∂g before the GRL, ∂/∂g after the GRL)`.
pub fn global_loss_grad(g: &[f64], label: f64, d: &DomainClassifier, lambda: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let cache = d.forward(&grl_forward(g));
    let mut gd = vec![0.0; d.params.len()];
    let upstream = d.backward(&cache, label, 1.0, &mut gd);
    let reversed = grl_backward(&upstream, lambda);
    (gd, upstream, reversed)
}

/// `task + λ_s · spatial + λ_g · global`.
pub fn total_loss(task: f64, spatial: f64, global: f64, w: &LossWeights) -> f64 {
    task + w.lambda_s * spatial + w.lambda_g * global
}
