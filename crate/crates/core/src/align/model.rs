//! Tiny encoder, domain classifier and linear head with closed-form backward
//! passes. Parameters live in flat vectors so finite differences can sweep them.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Framebuffer;

/// Side of the square patches averaged by the encoder, pixels.
pub const PATCH: u32 = 8;
/// Logits are clamped to this magnitude before the sigmoid.
pub const LOGIT_CLAMP: f64 = 30.0;

/// `N × d′` grid of features, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub n: usize,
    pub d: usize,
    pub values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<FeatureMap> {
        if n == 0 || d == 0 {
            return Err(Error::invalid("feature map needs N, d' >= 1"));
        }
        if values.len() != n * d {
            return Err(Error::ShapeMismatch(format!("{} values for a {n}x{d} map", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature map has non-finite entries"));
        }
        Ok(FeatureMap { n, d, values })
    }

    pub fn zeros(n: usize, d: usize) -> FeatureMap {
        FeatureMap {
            n,
            d,
            values: vec![0.0; n * d],
        }
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.d..(j + 1) * self.d]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.d..(j + 1) * self.d]
    }

    pub fn same_shape(&self, other: &FeatureMap) -> Result<()> {
        if (self.n, self.d) == (other.n, other.d) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.n, self.d, other.n, other.d
            )))
        }
    }
}

/// Mean color of each `PATCH × PATCH` block in `[0, 1]`, row-major over
/// blocks. Partial blocks at the right and bottom edges are dropped.
pub fn patch_means(fb: &Framebuffer) -> Result<Vec<[f64; 3]>> {
    let (bw, bh) = (fb.width / PATCH, fb.height / PATCH);
    if bw == 0 || bh == 0 {
        return Err(Error::invalid(format!(
            "image {}x{} is smaller than one {PATCH}x{PATCH} patch",
            fb.width, fb.height
        )));
    }
    let w = fb.width as usize;
    let scale = 1.0 / (255.0 * (PATCH * PATCH) as f64);
    let mut out = Vec::with_capacity((bw * bh) as usize);
    for by in 0..bh as usize {
        for bx in 0..bw as usize {
            let mut acc = [0u32; 3];
            for y in by * PATCH as usize..(by + 1) * PATCH as usize {
                for x in bx * PATCH as usize..(bx + 1) * PATCH as usize {
                    let i = (y * w + x) * 3;
                    for c in 0..3 {
                        acc[c] += fb.color[i + c] as u32;
                    }
                }
            }
            out.push(acc.map(|a| a as f64 * scale));
        }
    }
    Ok(out)
}

fn init(rng: &mut impl Rng, n: usize, fan_in: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).expect("positive std");
    (0..n).map(|_| normal.sample(rng)).collect()
}

/// Patch average followed by `x → tanh(W₂ tanh(W₁x + b₁) + b₂)` per patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinyEncoder {
    pub hidden: usize,
    pub out: usize,
    /// `W₁ (hidden×3) | b₁ | W₂ (out×hidden) | b₂`.
    pub params: Vec<f64>,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderCache {
    patches: Vec<[f64; 3]>,
    hidden: Vec<f64>,
    features: FeatureMap,
}

impl EncoderCache {
    pub fn features(&self) -> &FeatureMap {
        &self.features
    }
}

impl TinyEncoder {
    pub fn new(hidden: usize, out: usize, rng: &mut impl Rng) -> TinyEncoder {
        let mut params = init(rng, hidden * 3, 3);
        params.extend(vec![0.0; hidden]);
        params.extend(init(rng, out * hidden, hidden));
        params.extend(vec![0.0; out]);
        TinyEncoder { hidden, out, params }
    }

    pub fn num_params(&self) -> usize {
        self.hidden * 3 + self.hidden + self.out * self.hidden + self.out
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let (w1, rest) = self.params.split_at(self.hidden * 3);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(self.out * self.hidden);
        (w1, b1, w2, b2)
    }

    pub fn encode(&self, fb: &Framebuffer) -> Result<FeatureMap> {
        Ok(self.forward(&patch_means(fb)?).features)
    }

    pub fn forward(&self, patches: &[[f64; 3]]) -> EncoderCache {
        let (w1, b1, w2, b2) = self.split();
        let (hd, od) = (self.hidden, self.out);
        let mut hidden = vec![0.0; patches.len() * hd];
        let mut feats = vec![0.0; patches.len() * od];
        for (j, x) in patches.iter().enumerate() {
            let h = &mut hidden[j * hd..(j + 1) * hd];
            for k in 0..hd {
                let r = &w1[k * 3..k * 3 + 3];
                h[k] = (r[0] * x[0] + r[1] * x[1] + r[2] * x[2] + b1[k]).tanh();
            }
            let f = &mut feats[j * od..(j + 1) * od];
            for (o, fo) in f.iter_mut().enumerate() {
                let r = &w2[o * hd..(o + 1) * hd];
                *fo = (r.iter().zip(h.iter()).map(|(a, b)| a * b).sum::<f64>() + b2[o]).tanh();
            }
        }
        EncoderCache {
            patches: patches.to_vec(),
            hidden,
            features: FeatureMap {
                n: patches.len(),
                d: od,
                values: feats,
            },
        }
    }

    /// Accumulates `∂L/∂params` into `grad` given `∂L/∂features`.
    pub fn backward(&self, cache: &EncoderCache, grad_features: &FeatureMap, grad: &mut [f64]) {
        let (_, _, w2, _) = self.split();
        let (hd, od) = (self.hidden, self.out);
        let (gw1, rest) = grad.split_at_mut(hd * 3);
        let (gb1, rest) = rest.split_at_mut(hd);
        let (gw2, gb2) = rest.split_at_mut(od * hd);
        let mut ga2 = vec![0.0; od];
        let mut gh = vec![0.0; hd];
        for (j, x) in cache.patches.iter().enumerate() {
            let h = &cache.hidden[j * hd..(j + 1) * hd];
            let f = cache.features.row(j);
            let gf = grad_features.row(j);
            for o in 0..od {
                ga2[o] = gf[o] * (1.0 - f[o] * f[o]);
            }
            gh.iter_mut().for_each(|v| *v = 0.0);
            for o in 0..od {
                let g = ga2[o];
                if g == 0.0 {
                    continue;
                }
                gb2[o] += g;
                let row = &w2[o * hd..(o + 1) * hd];
                let grow = &mut gw2[o * hd..(o + 1) * hd];
                for k in 0..hd {
                    grow[k] += g * h[k];
                    gh[k] += g * row[k];
                }
            }
            for k in 0..hd {
                let ga1 = gh[k] * (1.0 - h[k] * h[k]);
                gb1[k] += ga1;
                gw1[k * 3] += ga1 * x[0];
                gw1[k * 3 + 1] += ga1 * x[1];
                gw1[k * 3 + 2] += ga1 * x[2];
            }
        }
    }
}

/// `g → σ(clamp(vᵀ tanh(U g + d) + e))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainClassifier {
    pub input: usize,
    pub hidden: usize,
    /// `U (hidden×input) | d | v | e`.
    pub params: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ClassifierCache {
    input: Vec<f64>,
    hidden: Vec<f64>,
    logit: f64,
    pub prob: f64,
}

impl DomainClassifier {
    pub fn new(input: usize, hidden: usize, rng: &mut impl Rng) -> DomainClassifier {
        let mut params = init(rng, hidden * input, input);
        params.extend(vec![0.0; hidden]);
        params.extend(init(rng, hidden, hidden));
        params.push(0.0);
        DomainClassifier { input, hidden, params }
    }

    pub fn num_params(&self) -> usize {
        self.hidden * self.input + 2 * self.hidden + 1
    }

    pub fn forward(&self, g: &[f64]) -> ClassifierCache {
        let (hd, id) = (self.hidden, self.input);
        let (u, rest) = self.params.split_at(hd * id);
        let (d, rest) = rest.split_at(hd);
        let (v, e) = rest.split_at(hd);
        let hidden: Vec<f64> = (0..hd)
            .map(|k| (u[k * id..(k + 1) * id].iter().zip(g).map(|(a, b)| a * b).sum::<f64>() + d[k]).tanh())
            .collect();
        let logit = v.iter().zip(&hidden).map(|(a, b)| a * b).sum::<f64>() + e[0];
        let clamped = logit.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
        ClassifierCache {
            input: g.to_vec(),
            hidden,
            logit,
            prob: 1.0 / (1.0 + (-clamped).exp()),
        }
    }

    pub fn predict(&self, g: &[f64]) -> f64 {
        self.forward(g).prob
    }

    /// Binary cross-entropy of the cached prediction against `label`.
    pub fn bce(cache: &ClassifierCache, label: f64) -> f64 {
        let z = cache.logit.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
        // −[y log σ(z) + (1−y) log(1−σ(z))] = y·softplus(−z) + (1−y)·softplus(z)
        label * softplus(-z) + (1.0 - label) * softplus(z)
    }

    /// Backward of `scale · bce`: accumulates parameter gradients into `grad`
    /// and returns `∂/∂g`.
    pub fn backward(&self, cache: &ClassifierCache, label: f64, scale: f64, grad: &mut [f64]) -> Vec<f64> {
        let (hd, id) = (self.hidden, self.input);
        let gz = if cache.logit.abs() < LOGIT_CLAMP {
            scale * (cache.prob - label)
        } else {
            0.0
        };
        let (u, rest) = self.params.split_at(hd * id);
        let v = &rest[hd..2 * hd];
        let (gu, rest) = grad.split_at_mut(hd * id);
        let (gd, rest) = rest.split_at_mut(hd);
        let (gv, ge) = rest.split_at_mut(hd);
        ge[0] += gz;
        let mut gg = vec![0.0; id];
        for k in 0..hd {
            let q = cache.hidden[k];
            gv[k] += gz * q;
            let ga = gz * v[k] * (1.0 - q * q);
            gd[k] += ga;
            for i in 0..id {
                gu[k * id + i] += ga * cache.input[i];
                gg[i] += ga * u[k * id + i];
            }
        }
        gg
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `ŷ = aᵀg + c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    /// `a | c`.
    pub params: Vec<f64>,
}

impl LinearHead {
    pub fn zeros(input: usize) -> LinearHead {
        LinearHead {
            params: vec![0.0; input + 1],
        }
    }

    pub fn predict(&self, g: &[f64]) -> f64 {
        let (a, c) = self.params.split_at(g.len());
        a.iter().zip(g).map(|(x, y)| x * y).sum::<f64>() + c[0]
    }

    /// Accumulates `gy · ∂ŷ/∂params` and returns `gy · ∂ŷ/∂g`.
    pub fn backward(&self, g: &[f64], gy: f64, grad: &mut [f64]) -> Vec<f64> {
        let n = g.len();
        for i in 0..n {
            grad[i] += gy * g[i];
        }
        grad[n] += gy;
        self.params[..n].iter().map(|a| gy * a).collect()
    }
}
