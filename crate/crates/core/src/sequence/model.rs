//! A small Elman recurrent network trained with CTC.
//!
//! Per frame: flatten the window, update the tanh state from the input and
//! the previous state, project the state to class scores, and log-softmax.
//! Training is minibatch SGD on the mean CTC loss with the gradient norm
//! clipped; per-line gradients are computed in parallel and summed in a fixed
//! order, so a run is a pure function of its seed.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ctc::{ctc_grad, decode_best_path, CtcError, LogProbMatrix};
use super::frames::FrameSequence;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("frame has {actual} inputs, model expects {expected}")]
    InputDim { expected: usize, actual: usize },
    #[error(transparent)]
    Ctc(#[from] CtcError),
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged {
        epoch: usize,
        last_finite: Box<ToyModel>,
    },
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyModel {
    pub input_dim: usize,
    pub state_dim: usize,
    pub output_dim: usize,
    /// Frame geometry the model was built for.
    pub frame_height: usize,
    pub window: usize,
    pub seed: u64,
    pub epoch: usize,
    pub loss_curve: Vec<f64>,
    /// `state_dim x input_dim`, row-major.
    pub w_in: Vec<f64>,
    /// `state_dim x state_dim`.
    pub w_rec: Vec<f64>,
    pub b_state: Vec<f64>,
    /// `output_dim x state_dim`.
    pub w_out: Vec<f64>,
    pub b_out: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            learning_rate: 0.05,
            batch_size: 8,
            clip_norm: 5.0,
            seed: 0,
        }
    }
}

/// One training line: frames plus target classes (no blanks).
#[derive(Clone, Debug)]
pub struct Sample {
    pub features: Vec<f64>,
    pub frames: usize,
    pub label: Vec<u32>,
}

impl Sample {
    pub fn new(seq: &FrameSequence, label: Vec<u32>) -> Sample {
        Sample {
            features: seq.features(),
            frames: seq.len(),
            label,
        }
    }
}

struct Trace {
    states: Vec<f64>,
    logits: Vec<f64>,
}

#[derive(Clone)]
struct Grads {
    w_in: Vec<f64>,
    w_rec: Vec<f64>,
    b_state: Vec<f64>,
    w_out: Vec<f64>,
    b_out: Vec<f64>,
}

impl Grads {
    fn zeros(m: &ToyModel) -> Grads {
        Grads {
            w_in: vec![0.0; m.w_in.len()],
            w_rec: vec![0.0; m.w_rec.len()],
            b_state: vec![0.0; m.b_state.len()],
            w_out: vec![0.0; m.w_out.len()],
            b_out: vec![0.0; m.b_out.len()],
        }
    }

    fn parts(&self) -> [&Vec<f64>; 5] {
        [&self.w_in, &self.w_rec, &self.b_state, &self.w_out, &self.b_out]
    }

    fn parts_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [
            &mut self.w_in,
            &mut self.w_rec,
            &mut self.b_state,
            &mut self.w_out,
            &mut self.b_out,
        ]
    }

    fn add(&mut self, other: &Grads) {
        for (mine, theirs) in self.parts_mut().into_iter().zip(other.parts()) {
            mine.iter_mut().zip(theirs).for_each(|(a, b)| *a += b);
        }
    }

    fn norm(&self) -> f64 {
        self.parts()
            .iter()
            .flat_map(|p| p.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, limit: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
}

impl ToyModel {
    /// Fresh model with Glorot-uniform weights drawn from `seed`.
    pub fn new(frame_height: usize, window: usize, state_dim: usize, output_dim: usize, seed: u64) -> ToyModel {
        let input_dim = frame_height * window;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lim_in = (6.0 / (input_dim + state_dim) as f64).sqrt();
        let lim_rec = (6.0 / (2 * state_dim) as f64).sqrt() * 0.5;
        let lim_out = (6.0 / (state_dim + output_dim) as f64).sqrt();
        ToyModel {
            input_dim,
            state_dim,
            output_dim,
            frame_height,
            window,
            seed,
            epoch: 0,
            loss_curve: Vec::new(),
            w_in: uniform(&mut rng, state_dim * input_dim, lim_in),
            w_rec: uniform(&mut rng, state_dim * state_dim, lim_rec),
            b_state: vec![0.0; state_dim],
            w_out: uniform(&mut rng, output_dim * state_dim, lim_out),
            b_out: vec![0.0; output_dim],
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.w_in.len() + self.w_rec.len() + self.b_state.len() + self.w_out.len() + self.b_out.len()
    }

    fn forward(&self, features: &[f64], frames: usize) -> Trace {
        let (d, s, o) = (self.input_dim, self.state_dim, self.output_dim);
        let mut states = vec![0.0; frames * s];
        let mut logits = vec![0.0; frames * o];
        let mut pre = vec![0.0; s];
        for t in 0..frames {
            let x = &features[t * d..(t + 1) * d];
            pre.copy_from_slice(&self.b_state);
            for (i, acc) in pre.iter_mut().enumerate() {
                let row = &self.w_in[i * d..(i + 1) * d];
                *acc += x.iter().zip(row).filter(|(xv, _)| **xv != 0.0).map(|(xv, w)| xv * w).sum::<f64>();
            }
            if t > 0 {
                let prev = &states[(t - 1) * s..t * s];
                for (i, acc) in pre.iter_mut().enumerate() {
                    let row = &self.w_rec[i * s..(i + 1) * s];
                    *acc += prev.iter().zip(row).map(|(h, w)| h * w).sum::<f64>();
                }
            }
            let h = &mut states[t * s..(t + 1) * s];
            h.iter_mut().zip(&pre).for_each(|(h, a)| *h = a.tanh());
            let z = &mut logits[t * o..(t + 1) * o];
            for (k, zk) in z.iter_mut().enumerate() {
                let row = &self.w_out[k * s..(k + 1) * s];
                *zk = self.b_out[k] + h.iter().zip(row).map(|(h, w)| h * w).sum::<f64>();
            }
        }
        Trace { states, logits }
    }

    fn check_input(&self, features: &[f64], frames: usize) -> Result<(), ModelError> {
        if frames == 0 || features.len() != frames * self.input_dim {
            return Err(ModelError::InputDim {
                expected: self.input_dim,
                actual: features.len().checked_div(frames).unwrap_or(0),
            });
        }
        Ok(())
    }

    pub fn log_probs(&self, seq: &FrameSequence) -> Result<LogProbMatrix, ModelError> {
        self.log_probs_features(&seq.features(), seq.len())
    }

    /// As [`ToyModel::log_probs`] on pre-flattened frames.
    pub fn log_probs_features(&self, features: &[f64], frames: usize) -> Result<LogProbMatrix, ModelError> {
        self.check_input(features, frames)?;
        let trace = self.forward(features, frames);
        Ok(LogProbMatrix::from_logits(frames, self.output_dim, &trace.logits)?)
    }

    /// Greedy transcription of one framed line, as class indices.
    pub fn transcribe(&self, seq: &FrameSequence) -> Result<Vec<u32>, ModelError> {
        Ok(decode_best_path(&self.log_probs(seq)?))
    }

    pub fn transcribe_features(&self, features: &[f64], frames: usize) -> Result<Vec<u32>, ModelError> {
        Ok(decode_best_path(&self.log_probs_features(features, frames)?))
    }

    fn loss_and_grads(&self, sample: &Sample) -> Result<(f64, Grads), ModelError> {
        let (d, s, o) = (self.input_dim, self.state_dim, self.output_dim);
        let frames = sample.frames;
        let trace = self.forward(&sample.features, frames);
        let p = LogProbMatrix::from_logits(frames, o, &trace.logits)?;
        let (loss, dlogits) = ctc_grad(&p, &sample.label)?;

        let mut g = Grads::zeros(self);
        let mut dh_next = vec![0.0; s];
        let mut dpre = vec![0.0; s];
        for t in (0..frames).rev() {
            let h = &trace.states[t * s..(t + 1) * s];
            let dz = &dlogits[t * o..(t + 1) * o];
            let mut dh = dh_next.clone();
            for k in 0..o {
                g.b_out[k] += dz[k];
                let row = &mut g.w_out[k * s..(k + 1) * s];
                let wrow = &self.w_out[k * s..(k + 1) * s];
                for j in 0..s {
                    row[j] += dz[k] * h[j];
                    dh[j] += dz[k] * wrow[j];
                }
            }
            for j in 0..s {
                dpre[j] = dh[j] * (1.0 - h[j] * h[j]);
                g.b_state[j] += dpre[j];
            }
            let x = &sample.features[t * d..(t + 1) * d];
            for j in 0..s {
                if dpre[j] == 0.0 {
                    continue;
                }
                let row = &mut g.w_in[j * d..(j + 1) * d];
                for (i, &xv) in x.iter().enumerate() {
                    if xv != 0.0 {
                        row[i] += dpre[j] * xv;
                    }
                }
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            if t > 0 {
                let prev = &trace.states[(t - 1) * s..t * s];
                for j in 0..s {
                    let row = &mut g.w_rec[j * s..(j + 1) * s];
                    let wrow = &self.w_rec[j * s..(j + 1) * s];
                    for i in 0..s {
                        row[i] += dpre[j] * prev[i];
                        dh_next[i] += dpre[j] * wrow[i];
                    }
                }
            }
        }
        Ok((loss, g))
    }

    fn apply(&mut self, g: &Grads, step: f64) {
        let params = [
            &mut self.w_in,
            &mut self.w_rec,
            &mut self.b_state,
            &mut self.w_out,
            &mut self.b_out,
        ];
        for (p, gp) in params.into_iter().zip(g.parts()) {
            p.iter_mut().zip(gp.iter()).for_each(|(w, d)| *w -= step * d);
        }
    }

    fn is_finite(&self) -> bool {
        [&self.w_in, &self.w_rec, &self.b_state, &self.w_out, &self.b_out]
            .iter()
            .all(|p| p.iter().all(|v| v.is_finite()))
    }

    /// Mean CTC loss over `samples` without updating anything.
    pub fn mean_loss(&self, samples: &[Sample]) -> Result<f64, ModelError> {
        let losses: Result<Vec<f64>, ModelError> = samples
            .par_iter()
            .map(|smp| {
                self.check_input(&smp.features, smp.frames)?;
                let trace = self.forward(&smp.features, smp.frames);
                let p = LogProbMatrix::from_logits(smp.frames, self.output_dim, &trace.logits)?;
                Ok(super::ctc::ctc_loss(&p, &smp.label)?)
            })
            .collect();
        let losses = losses?;
        Ok(losses.iter().sum::<f64>() / losses.len().max(1) as f64)
    }
}

/// Trains for `config.epochs` epochs. The loss recorded per epoch is the mean
/// training loss seen during that epoch. A non-finite loss or parameter
/// aborts with the model as it was at the end of the last good epoch.
pub fn train_toy(mut model: ToyModel, samples: &[Sample], config: &TrainConfig) -> Result<ToyModel, ModelError> {
    train_toy_with(&mut model, samples, config, |_, _| {})?;
    Ok(model)
}

/// [`train_toy`] with a progress callback `(epoch, mean_loss)`.
pub fn train_toy_with(
    model: &mut ToyModel,
    samples: &[Sample],
    config: &TrainConfig,
    mut progress: impl FnMut(usize, f64),
) -> Result<(), ModelError> {
    for smp in samples {
        model.check_input(&smp.features, smp.frames)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let batch = config.batch_size.max(1);
    for _ in 0..config.epochs {
        let checkpoint = model.clone();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let results: Result<Vec<(f64, Grads)>, ModelError> = chunk
                .par_iter()
                .map(|&i| model.loss_and_grads(&samples[i]))
                .collect();
            let results = results?;
            let mut total = Grads::zeros(model);
            for (loss, g) in &results {
                epoch_loss += loss;
                total.add(g);
            }
            let scale = 1.0 / chunk.len() as f64;
            let norm = total.norm() * scale;
            let clip = if norm > config.clip_norm { config.clip_norm / norm } else { 1.0 };
            model.apply(&total, config.learning_rate * scale * clip);
        }
        let mean = epoch_loss / samples.len().max(1) as f64;
        if !mean.is_finite() || !model.is_finite() {
            let epoch = model.epoch + 1;
            return Err(ModelError::Diverged {
                epoch,
                last_finite: Box::new(checkpoint),
            });
        }
        model.epoch += 1;
        model.loss_curve.push(mean);
        progress(model.epoch, mean);
    }
    Ok(())
}

const MAGIC: &[u8; 8] = b"SCRTOY01";

#[derive(Serialize, Deserialize)]
struct Header {
    input_dim: usize,
    state_dim: usize,
    output_dim: usize,
    frame_height: usize,
    window: usize,
    seed: u64,
    epoch: usize,
    loss_curve: Vec<f64>,
}

impl ToyModel {
    /// Checkpoint bytes: 8-byte magic `SCRTOY01`, u32 LE header length, the
    /// JSON header, then every parameter as f64 LE in the order w_in, w_rec,
    /// b_state, w_out, b_out.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            input_dim: self.input_dim,
            state_dim: self.state_dim,
            output_dim: self.output_dim,
            frame_height: self.frame_height,
            window: self.window,
            seed: self.seed,
            epoch: self.epoch,
            loss_curve: self.loss_curve.clone(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = MAGIC.to_vec();
        out.extend((json.len() as u32).to_le_bytes());
        out.extend(json);
        for p in [&self.w_in, &self.w_rec, &self.b_state, &self.w_out, &self.b_out] {
            for v in p.iter() {
                out.extend(v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ToyModel, ModelError> {
        let bad = |m: &str| ModelError::Checkpoint(m.to_string());
        if !bytes.starts_with(MAGIC) || bytes.len() < 12 {
            return Err(bad("missing SCRTOY01 magic"));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let json = bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
        let h: Header = serde_json::from_slice(json).map_err(|e| bad(&e.to_string()))?;
        if h.input_dim != h.frame_height * h.window {
            return Err(bad("input_dim does not match frame geometry"));
        }
        let mut model = ToyModel {
            input_dim: h.input_dim,
            state_dim: h.state_dim,
            output_dim: h.output_dim,
            frame_height: h.frame_height,
            window: h.window,
            seed: h.seed,
            epoch: h.epoch,
            loss_curve: h.loss_curve,
            w_in: Vec::new(),
            w_rec: Vec::new(),
            b_state: Vec::new(),
            w_out: Vec::new(),
            b_out: Vec::new(),
        };
        let sizes = [
            h.state_dim * h.input_dim,
            h.state_dim * h.state_dim,
            h.state_dim,
            h.output_dim * h.state_dim,
            h.output_dim,
        ];
        let body = &bytes[12 + hlen..];
        if body.len() != 8 * sizes.iter().sum::<usize>() {
            return Err(bad("parameter block has the wrong length"));
        }
        let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let targets = [
            &mut model.w_in,
            &mut model.w_rec,
            &mut model.b_state,
            &mut model.w_out,
            &mut model.b_out,
        ];
        for (target, n) in targets.into_iter().zip(sizes) {
            target.extend(values.by_ref().take(n));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ToyModel, ModelError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        ToyModel::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::BinaryImage;
    use crate::segmentation::ReadingOrder;
    use crate::sequence::frames::make_frames;

    /// Columns of solid ink read as symbol 1, empty columns as symbol 2,
    /// separated by single half-height columns.
    fn stripes(rng: &mut ChaCha8Rng, len: usize) -> (BinaryImage, Vec<u32>) {
        let h = 4;
        let label: Vec<u32> = (0..len).map(|_| rng.gen_range(1..=2)).collect();
        let mut img = BinaryImage::new(len * 4, h);
        for (i, &l) in label.iter().enumerate() {
            for dx in 0..3 {
                for y in 0..h {
                    let ink = match l {
                        1 => true,
                        _ => y == 0 || y == h - 1,
                    };
                    img.set(i * 4 + dx, y, ink);
                }
            }
        }
        (img, label)
    }

    fn corpus(seed: u64, n: usize) -> Vec<Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let len = rng.gen_range(1..6);
                let (img, label) = stripes(&mut rng, len);
                Sample::new(&make_frames(&img, 3, ReadingOrder::Ltr).unwrap(), label)
            })
            .collect()
    }

    #[test]
    fn zero_epochs_is_identity() {
        let model = ToyModel::new(4, 3, 8, 3, 1);
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        assert_eq!(train_toy(model.clone(), &corpus(1, 5), &cfg).unwrap(), model);
    }

    #[test]
    fn same_seed_same_curve() {
        let data = corpus(2, 20);
        let cfg = TrainConfig { epochs: 3, seed: 4, ..TrainConfig::default() };
        let a = train_toy(ToyModel::new(4, 3, 8, 3, 7), &data, &cfg).unwrap();
        let b = train_toy(ToyModel::new(4, 3, 8, 3, 7), &data, &cfg).unwrap();
        assert_eq!(a.loss_curve.len(), 3);
        assert_eq!(
            a.loss_curve.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.loss_curve.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(a, b);
    }

    #[test]
    fn separable_stripes_are_learned() {
        let train = corpus(3, 200);
        let test = corpus(4, 50);
        let cfg = TrainConfig {
            epochs: 30,
            learning_rate: 0.1,
            batch_size: 4,
            clip_norm: 5.0,
            seed: 5,
        };
        let model = train_toy(ToyModel::new(4, 3, 12, 3, 9), &train, &cfg).unwrap();
        assert!(model.loss_curve.last().unwrap() < model.loss_curve.first().unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut correct = 0;
        for _ in 0..test.len() {
            let len = rng.gen_range(1..6);
            let (img, label) = stripes(&mut rng, len);
            let seq = make_frames(&img, 3, ReadingOrder::Ltr).unwrap();
            if model.transcribe(&seq).unwrap() == label {
                correct += 1;
            }
        }
        assert!(correct as f64 / test.len() as f64 >= 0.99, "{correct}/{}", test.len());
    }

    #[test]
    fn model_gradient_matches_finite_differences() {
        let data = corpus(6, 1);
        let mut model = ToyModel::new(4, 3, 5, 3, 11);
        model.b_state.iter_mut().enumerate().for_each(|(i, b)| *b = 0.1 * i as f64);
        let (_, g) = model.loss_and_grads(&data[0]).unwrap();
        let h = 1e-6;
        let loss_at = |m: &ToyModel| m.mean_loss(&data).unwrap();
        for (which, idx) in [(0usize, 3usize), (1, 7), (2, 2), (3, 4), (4, 1)] {
            let mut plus = model.clone();
            let mut minus = model.clone();
            let pick = |m: &mut ToyModel| -> *mut f64 {
                match which {
                    0 => &mut m.w_in[idx],
                    1 => &mut m.w_rec[idx],
                    2 => &mut m.b_state[idx],
                    3 => &mut m.w_out[idx],
                    _ => &mut m.b_out[idx],
                }
            };
            unsafe {
                *pick(&mut plus) += h;
                *pick(&mut minus) -= h;
            }
            let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            let analytic = g.parts()[which][idx];
            assert!((fd - analytic).abs() <= 1e-5 * analytic.abs().max(1e-2), "{which}/{idx}: {fd} vs {analytic}");
        }
    }

    #[test]
    fn divergence_returns_last_good_model() {
        let data = corpus(7, 10);
        let mut model = ToyModel::new(4, 3, 6, 3, 2);
        model.w_out[0] = f64::NAN;
        let cfg = TrainConfig { epochs: 2, ..TrainConfig::default() };
        match train_toy(model.clone(), &data, &cfg) {
            Err(ModelError::Diverged { epoch, last_finite }) => {
                assert_eq!(epoch, 1);
                assert_eq!(last_finite.epoch, 0);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn checkpoint_roundtrip() {
        let mut model = ToyModel::new(4, 3, 6, 3, 2);
        model.loss_curve = vec![1.5, 0.25];
        model.epoch = 2;
        let bytes = model.to_bytes();
        assert_eq!(&bytes[..8], b"SCRTOY01");
        let back = ToyModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, model);
        assert!(ToyModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(ToyModel::from_bytes(b"garbage").is_err());
    }
}
