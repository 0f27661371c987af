//! Shared-trunk two-head regressor with hand-written backpropagation.
//!
//! Each frame sees a window of `window` frames of `features` inputs (zeros past
//! the sequence ends). The trunk is one dense layer with tanh; the spotting
//! head is a logistic unit and the recognition head a softmax over `classes`.
//! Both heads read the same trunk activation and share nothing else.

use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("non-finite input at frame {frame}, feature {feature}")]
    NonFiniteInput { frame: usize, feature: usize },
    #[error("frame {frame} has {got} features, model expects {expected}")]
    FeatureMismatch {
        frame: usize,
        got: usize,
        expected: usize,
    },
    #[error("empty input sequence")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    /// Odd context length in frames.
    pub window: usize,
    pub features: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl ModelShape {
    pub fn input_width(&self) -> usize {
        self.window * self.features
    }

    pub fn trunk_params(&self) -> usize {
        self.hidden * self.input_width() + self.hidden
    }

    pub fn spot_head_params(&self) -> usize {
        self.hidden + 1
    }

    pub fn rec_head_params(&self) -> usize {
        self.classes * self.hidden + self.classes
    }

    pub fn param_count(&self) -> usize {
        self.trunk_params() + self.spot_head_params() + self.rec_head_params()
    }

    /// Parameters of a spotting-only plus a recognition-only model of the
    /// same sizes, each with its own trunk.
    pub fn separate_param_count(&self) -> usize {
        2 * self.trunk_params() + self.spot_head_params() + self.rec_head_params()
    }
}

/// All trainable arrays. Also used to hold gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// `hidden` rows of `window * features`, row-major.
    pub trunk_w: Vec<f64>,
    pub trunk_b: Vec<f64>,
    pub spot_w: Vec<f64>,
    pub spot_b: f64,
    /// `classes` rows of `hidden`, row-major.
    pub rec_w: Vec<f64>,
    pub rec_b: Vec<f64>,
}

impl Params {
    pub fn zeros(shape: &ModelShape) -> Self {
        Self {
            trunk_w: vec![0.0; shape.hidden * shape.input_width()],
            trunk_b: vec![0.0; shape.hidden],
            spot_w: vec![0.0; shape.hidden],
            spot_b: 0.0,
            rec_w: vec![0.0; shape.classes * shape.hidden],
            rec_b: vec![0.0; shape.classes],
        }
    }

    /// Flat view in the order trunk_w, trunk_b, spot_w, spot_b, rec_w, rec_b.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.trunk_w);
        v.extend_from_slice(&self.trunk_b);
        v.extend_from_slice(&self.spot_w);
        v.push(self.spot_b);
        v.extend_from_slice(&self.rec_w);
        v.extend_from_slice(&self.rec_b);
        v
    }

    pub fn len(&self) -> usize {
        self.trunk_w.len()
            + self.trunk_b.len()
            + self.spot_w.len()
            + 1
            + self.rec_w.len()
            + self.rec_b.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        self.trunk_w.iter_mut().for_each(&mut f);
        self.trunk_b.iter_mut().for_each(&mut f);
        self.spot_w.iter_mut().for_each(&mut f);
        f(&mut self.spot_b);
        self.rec_w.iter_mut().for_each(&mut f);
        self.rec_b.iter_mut().for_each(&mut f);
    }

    /// Mutable reference to the `i`-th flat parameter.
    pub fn get_mut(&mut self, mut i: usize) -> &mut f64 {
        for part in [&mut self.trunk_w, &mut self.trunk_b, &mut self.spot_w] {
            if i < part.len() {
                return &mut part[i];
            }
            i -= part.len();
        }
        if i == 0 {
            return &mut self.spot_b;
        }
        i -= 1;
        if i < self.rec_w.len() {
            return &mut self.rec_w[i];
        }
        i -= self.rec_w.len();
        &mut self.rec_b[i]
    }

    /// Element-wise combination `self[i] = f(self[i], other[i])`.
    pub fn zip_apply(&mut self, other: &Params, mut f: impl FnMut(&mut f64, f64)) {
        let flat = other.flatten();
        let mut it = flat.into_iter();
        self.for_each_mut(|x| f(x, it.next().expect("same shape")));
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinyModel {
    pub shape: ModelShape,
    pub params: Params,
}

/// Per-frame model outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    pub spot: Vec<f64>,
    pub emo: Vec<Vec<f64>>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct ForwardCache {
    pub inputs: Vec<Vec<f64>>,
    pub hidden: Vec<Vec<f64>>,
    pub output: ModelOutput,
}

pub(crate) fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl TinyModel {
    pub fn zeros(shape: ModelShape) -> Self {
        Self {
            params: Params::zeros(&shape),
            shape,
        }
    }

    /// Uniform initialisation in `±1/sqrt(fan_in)` per layer.
    pub fn init(shape: ModelShape, seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let mut m = Self::zeros(shape);
        let a = 1.0 / (shape.input_width() as f64).sqrt();
        m.params.trunk_w.iter_mut().for_each(|w| *w = rng.uniform(-a, a));
        let b = 1.0 / (shape.hidden as f64).sqrt();
        m.params.spot_w.iter_mut().for_each(|w| *w = rng.uniform(-b, b));
        m.params.rec_w.iter_mut().for_each(|w| *w = rng.uniform(-b, b));
        m
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Context window for frame `t`, zero-padded at both ends.
    fn context(&self, features: &[Vec<f64>], t: usize) -> Vec<f64> {
        let s = &self.shape;
        let half = s.window / 2;
        let mut x = vec![0.0; s.input_width()];
        for j in 0..s.window {
            let src = t as i64 + j as i64 - half as i64;
            if src >= 0 && (src as usize) < features.len() {
                x[j * s.features..(j + 1) * s.features].copy_from_slice(&features[src as usize]);
            }
        }
        x
    }

    fn check_input(&self, features: &[Vec<f64>]) -> Result<(), ModelError> {
        if features.is_empty() {
            return Err(ModelError::Empty);
        }
        for (frame, row) in features.iter().enumerate() {
            if row.len() != self.shape.features {
                return Err(ModelError::FeatureMismatch {
                    frame,
                    got: row.len(),
                    expected: self.shape.features,
                });
            }
            if let Some(feature) = row.iter().position(|v| !v.is_finite()) {
                return Err(ModelError::NonFiniteInput { frame, feature });
            }
        }
        Ok(())
    }

    pub(crate) fn forward_cached(&self, features: &[Vec<f64>]) -> Result<ForwardCache, ModelError> {
        self.check_input(features)?;
        let s = &self.shape;
        let p = &self.params;
        let width = s.input_width();
        let mut inputs = Vec::with_capacity(features.len());
        let mut hidden = Vec::with_capacity(features.len());
        let mut spot = Vec::with_capacity(features.len());
        let mut emo = Vec::with_capacity(features.len());
        for t in 0..features.len() {
            let x = self.context(features, t);
            let h: Vec<f64> = (0..s.hidden)
                .map(|j| {
                    let row = &p.trunk_w[j * width..(j + 1) * width];
                    let z: f64 = row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>() + p.trunk_b[j];
                    z.tanh()
                })
                .collect();
            let zs: f64 = p.spot_w.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + p.spot_b;
            let logits: Vec<f64> = (0..s.classes)
                .map(|k| {
                    let row = &p.rec_w[k * s.hidden..(k + 1) * s.hidden];
                    row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + p.rec_b[k]
                })
                .collect();
            spot.push(logistic(zs));
            emo.push(softmax(&logits));
            inputs.push(x);
            hidden.push(h);
        }
        Ok(ForwardCache {
            inputs,
            hidden,
            output: ModelOutput { spot, emo },
        })
    }

    /// Spotting probability and emotion distribution for every frame.
    pub fn forward(&self, features: &[Vec<f64>]) -> Result<ModelOutput, ModelError> {
        Ok(self.forward_cached(features)?.output)
    }
}
