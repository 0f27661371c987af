//! Joint objective: frame-mean squared error on the spotting output plus
//! frame-mean class-weighted cross-entropy on the recognition output.

use serde::{Deserialize, Serialize};

use super::model::{ModelError, ModelOutput, Params, TinyModel};

/// Per-frame supervision for one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTargets {
    /// Spotting regression targets in `[0, 1]`.
    pub spot: Vec<f64>,
    /// Recognition class index per frame, 0 for neutral.
    pub class: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub mse_term: f64,
    pub ce_term: f64,
    pub total: f64,
}

/// Sums of per-frame terms; divided by the frame count at the end.
#[derive(Debug, Clone, Copy, Default)]
struct LossSums {
    sq: f64,
    ce: f64,
    frames: usize,
}

impl LossSums {
    fn add(&mut self, out: &ModelOutput, targets: &FrameTargets, class_weights: &[f64]) {
        for t in 0..out.spot.len() {
            let d = out.spot[t] - targets.spot[t];
            self.sq += d * d;
            let c = targets.class[t];
            let p = out.emo[t][c].max(f64::MIN_POSITIVE);
            self.ce -= class_weights[c] * p.ln();
        }
        self.frames += out.spot.len();
    }

    fn finish(self) -> LossBreakdown {
        let n = self.frames.max(1) as f64;
        let mse_term = self.sq / n;
        let ce_term = self.ce / n;
        LossBreakdown {
            mse_term,
            ce_term,
            total: mse_term + ce_term,
        }
    }
}

pub fn loss(out: &ModelOutput, targets: &FrameTargets, class_weights: &[f64]) -> LossBreakdown {
    let mut sums = LossSums::default();
    sums.add(out, targets, class_weights);
    sums.finish()
}

/// A training sequence: features with their targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub features: Vec<Vec<f64>>,
    pub targets: FrameTargets,
}

/// Loss over a batch, pooling frames of every sequence.
pub fn batch_loss(
    model: &TinyModel,
    batch: &[Sequence],
    class_weights: &[f64],
) -> Result<LossBreakdown, ModelError> {
    let mut sums = LossSums::default();
    for seq in batch {
        sums.add(&model.forward(&seq.features)?, &seq.targets, class_weights);
    }
    Ok(sums.finish())
}

/// Analytic gradient of [`batch_loss`] with respect to every parameter.
pub fn gradients(
    model: &TinyModel,
    batch: &[Sequence],
    class_weights: &[f64],
) -> Result<(Params, LossBreakdown), ModelError> {
    let s = model.shape;
    let p = &model.params;
    let width = s.input_width();
    let frames: usize = batch.iter().map(|b| b.features.len()).sum();
    let mut g = Params::zeros(&s);
    let mut sums = LossSums::default();
    let mut dh = vec![0.0; s.hidden];

    for seq in batch {
        let cache = model.forward_cached(&seq.features)?;
        sums.add(&cache.output, &seq.targets, class_weights);
        for t in 0..seq.features.len() {
            let h = &cache.hidden[t];
            let x = &cache.inputs[t];
            dh.iter_mut().for_each(|v| *v = 0.0);

            let sp = cache.output.spot[t];
            let dz_spot = 2.0 * (sp - seq.targets.spot[t]) * sp * (1.0 - sp);
            for j in 0..s.hidden {
                g.spot_w[j] += dz_spot * h[j];
                dh[j] += dz_spot * p.spot_w[j];
            }
            g.spot_b += dz_spot;

            let c = seq.targets.class[t];
            let w = class_weights[c];
            for k in 0..s.classes {
                let dz = w * (cache.output.emo[t][k] - if k == c { 1.0 } else { 0.0 });
                let row = k * s.hidden;
                for j in 0..s.hidden {
                    g.rec_w[row + j] += dz * h[j];
                    dh[j] += dz * p.rec_w[row + j];
                }
                g.rec_b[k] += dz;
            }

            for j in 0..s.hidden {
                let da = dh[j] * (1.0 - h[j] * h[j]);
                let row = j * width;
                for (gw, xi) in g.trunk_w[row..row + width].iter_mut().zip(x) {
                    *gw += da * xi;
                }
                g.trunk_b[j] += da;
            }
        }
    }
    // Frame sums above, frame means here.
    let n = frames.max(1) as f64;
    g.for_each_mut(|v| *v /= n);
    Ok((g, sums.finish()))
}
