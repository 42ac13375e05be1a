//! Kernel-attention neural operator.
//!
//! Per-vertex features pass through an encoder MLP, a stack of attention
//! blocks, and a linear decoder to the four surface fields. Attention
//! logits are affine in the embedding inner products — theta1 * <phi_i,
//! phi_j> + theta2 — and in nothing else, so predictions depend on the
//! embedding only through the gauge-invariant kernel estimates. Gradients
//! are exact reverse-mode derivatives, checked against central finite
//! differences.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::mesh::{vertex_normals, SurfaceMesh};
use crate::spectral::{FilterSpec, SpectralEmbedding};

/// Number of per-vertex input features: position (3), outward normal (3),
/// map point (5).
pub const INPUT_DIM: usize = 11;

/// Number of predicted channels: pressure and the three shear components.
pub const OUTPUT_DIM: usize = 4;

/// Full attention (k + 1 >= N) is only allowed up to this size.
pub const FULL_ATTENTION_CAP: usize = 2000;

pub const CHECKPOINT_VERSION: &str = "gist-mini-1";

/// Trainable parameters of the operator.
#[derive(Debug, Clone)]
pub struct GistModel {
    pub input_dim: usize,
    pub hidden: usize,
    pub blocks: usize,
    pub encoder_w: DMatrix<f64>,
    pub encoder_b: DVector<f64>,
    pub value_w: Vec<DMatrix<f64>>,
    pub value_b: Vec<DVector<f64>>,
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub decoder_w: DMatrix<f64>,
    pub decoder_b: DVector<f64>,
}

/// Closed-form parameter count for a given architecture.
pub fn param_count(input_dim: usize, hidden: usize, blocks: usize) -> usize {
    (input_dim * hidden + hidden)
        + blocks * (hidden * hidden + hidden + 2)
        + (hidden * OUTPUT_DIM + OUTPUT_DIM)
}

fn gaussian_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_iterator(
        rows,
        cols,
        (0..rows * cols).map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            g * scale
        }),
    )
}

/// Initializes weights from a zero-mean Gaussian scaled by 1/sqrt(fan-in);
/// biases start at zero, attention parameters at theta1 = 1, theta2 = 0.
pub fn init_model(input_dim: usize, hidden: usize, blocks: usize, seed: u64) -> Result<GistModel> {
    if input_dim == 0 || hidden == 0 {
        return Err(Error::InvalidParameter(
            "input and hidden widths must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let encoder_w = gaussian_matrix(hidden, input_dim, 1.0 / (input_dim as f64).sqrt(), &mut rng);
    let mut value_w = Vec::with_capacity(blocks);
    let mut value_b = Vec::with_capacity(blocks);
    for _ in 0..blocks {
        value_w.push(gaussian_matrix(hidden, hidden, 1.0 / (hidden as f64).sqrt(), &mut rng));
        value_b.push(DVector::zeros(hidden));
    }
    let decoder_w = gaussian_matrix(OUTPUT_DIM, hidden, 1.0 / (hidden as f64).sqrt(), &mut rng);
    Ok(GistModel {
        input_dim,
        hidden,
        blocks,
        encoder_w,
        encoder_b: DVector::zeros(hidden),
        value_w,
        value_b,
        theta1: vec![1.0; blocks],
        theta2: vec![0.0; blocks],
        decoder_w,
        decoder_b: DVector::zeros(OUTPUT_DIM),
    })
}

impl GistModel {
    pub fn num_params(&self) -> usize {
        param_count(self.input_dim, self.hidden, self.blocks)
    }

    /// Parameters as one flat vector in a fixed order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        out.extend_from_slice(self.encoder_w.as_slice());
        out.extend_from_slice(self.encoder_b.as_slice());
        for b in 0..self.blocks {
            out.extend_from_slice(self.value_w[b].as_slice());
            out.extend_from_slice(self.value_b[b].as_slice());
            out.push(self.theta1[b]);
            out.push(self.theta2[b]);
        }
        out.extend_from_slice(self.decoder_w.as_slice());
        out.extend_from_slice(self.decoder_b.as_slice());
        out
    }

    /// Writes a flat vector (same order as [`GistModel::flatten`]) back
    /// into the parameter tensors.
    pub fn unflatten(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::ShapeMismatch(format!(
                "flat vector has {} entries, model has {}",
                flat.len(),
                self.num_params()
            )));
        }
        let mut at = 0usize;
        let take = |dst: &mut [f64], from: &[f64]| {
            dst.copy_from_slice(&from[..dst.len()]);
        };
        take(self.encoder_w.as_mut_slice(), &flat[at..]);
        at += self.encoder_w.len();
        take(self.encoder_b.as_mut_slice(), &flat[at..]);
        at += self.encoder_b.len();
        for b in 0..self.blocks {
            take(self.value_w[b].as_mut_slice(), &flat[at..]);
            at += self.value_w[b].len();
            take(self.value_b[b].as_mut_slice(), &flat[at..]);
            at += self.value_b[b].len();
            self.theta1[b] = flat[at];
            at += 1;
            self.theta2[b] = flat[at];
            at += 1;
        }
        take(self.decoder_w.as_mut_slice(), &flat[at..]);
        at += self.decoder_w.len();
        take(self.decoder_b.as_mut_slice(), &flat[at..]);
        at += self.decoder_b.len();
        debug_assert_eq!(at, flat.len());
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.flatten().iter().all(|p| p.is_finite())
    }
}

// ---------------------------------------------------------------------------
// Attention graph
// ---------------------------------------------------------------------------

/// Sparse attention support: per vertex, the top-k others by kernel
/// estimate plus the vertex itself, with the kernel values attached.
#[derive(Debug, Clone)]
pub struct AttentionGraph {
    k: usize,
    neighbors: Vec<Vec<usize>>,
    kernels: Vec<Vec<f64>>,
}

impl AttentionGraph {
    pub fn vertex_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn kernels(&self, i: usize) -> &[f64] {
        &self.kernels[i]
    }

    /// Relabels vertices by a permutation; test helper for equivariance.
    pub fn permuted(&self, perm: &[usize]) -> AttentionGraph {
        let n = self.vertex_count();
        let mut neighbors = vec![Vec::new(); n];
        let mut kernels = vec![Vec::new(); n];
        for i in 0..n {
            let mut pairs: Vec<(usize, f64)> = self.neighbors[i]
                .iter()
                .zip(&self.kernels[i])
                .map(|(&j, &v)| (perm[j], v))
                .collect();
            pairs.sort_by(|a, b| a.0.cmp(&b.0));
            neighbors[perm[i]] = pairs.iter().map(|p| p.0).collect();
            kernels[perm[i]] = pairs.iter().map(|p| p.1).collect();
        }
        AttentionGraph {
            k: self.k,
            neighbors,
            kernels,
        }
    }
}

/// Builds the attention support from an embedding. Each vertex keeps
/// min(k + 1, N) entries. Requesting full attention (k + 1 >= N) is
/// allowed only for N <= [`FULL_ATTENTION_CAP`].
pub fn build_attention_graph(emb: &SpectralEmbedding, k: usize) -> Result<AttentionGraph> {
    if k == 0 {
        return Err(Error::InvalidParameter("attention needs k >= 1".into()));
    }
    let n = emb.vertex_count();
    if k + 1 >= n && n > FULL_ATTENTION_CAP {
        return Err(Error::SizeLimit(format!(
            "full attention requested for N = {n}, cap is {FULL_ATTENTION_CAP}"
        )));
    }
    let phi = emb.matrix();
    let mut neighbors = Vec::with_capacity(n);
    let mut kernels = Vec::with_capacity(n);
    for i in 0..n {
        let scores: DVector<f64> = phi * phi.row(i).transpose();
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let mut chosen: Vec<usize> = order.into_iter().take(k.min(n - 1)).collect();
        chosen.push(i);
        chosen.sort_unstable();
        let vals: Vec<f64> = chosen.iter().map(|&j| scores[j]).collect();
        neighbors.push(chosen);
        kernels.push(vals);
    }
    Ok(AttentionGraph {
        k,
        neighbors,
        kernels,
    })
}

/// Row-normalized attention weights: softmax over each neighbor list of
/// theta1 * kernel + theta2. Shifting theta2 leaves the rows unchanged.
pub fn attention_weights(attn: &AttentionGraph, theta1: f64, theta2: f64) -> Vec<Vec<f64>> {
    (0..attn.vertex_count())
        .map(|i| softmax_row(attn.kernels(i), theta1, theta2))
        .collect()
}

fn softmax_row(kernels: &[f64], theta1: f64, theta2: f64) -> Vec<f64> {
    let logits: Vec<f64> = kernels.iter().map(|k| theta1 * k + theta2).collect();
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    w
}

// ---------------------------------------------------------------------------
// Samples and normalization
// ---------------------------------------------------------------------------

/// One mesh with its operating condition and per-vertex target fields.
#[derive(Debug, Clone)]
pub struct FieldSample {
    positions: Vec<[f64; 3]>,
    normals: Vec<[f64; 3]>,
    map: [f64; 5],
    targets: DMatrix<f64>,
}

impl FieldSample {
    pub fn new(mesh: &SurfaceMesh, map: [f64; 5], targets: DMatrix<f64>) -> Result<Self> {
        if targets.nrows() != mesh.vertex_count() || targets.ncols() != OUTPUT_DIM {
            return Err(Error::ShapeMismatch(format!(
                "targets are {}x{}, expected {}x{OUTPUT_DIM}",
                targets.nrows(),
                targets.ncols(),
                mesh.vertex_count()
            )));
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("targets must be finite".into()));
        }
        Ok(Self {
            positions: mesh.vertices().to_vec(),
            normals: vertex_normals(mesh),
            map,
            targets,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    pub fn map(&self) -> [f64; 5] {
        self.map
    }

    /// Raw feature matrix: position, normal, broadcast map point.
    pub fn features(&self) -> DMatrix<f64> {
        let n = self.vertex_count();
        DMatrix::from_fn(n, INPUT_DIM, |i, c| match c {
            0..=2 => self.positions[i][c],
            3..=5 => self.normals[i][c - 3],
            _ => self.map[c - 6],
        })
    }
}

/// Per-channel z-scoring statistics fitted on the training split.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Normalizer {
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub target_mean: Vec<f64>,
    pub target_std: Vec<f64>,
}

fn column_stats(rows: usize, cols: usize, get: impl Fn(usize, usize) -> f64) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0; cols];
    let mut std = vec![0.0; cols];
    for c in 0..cols {
        let mut acc = 0.0;
        for i in 0..rows {
            acc += get(i, c);
        }
        mean[c] = acc / rows as f64;
        let mut var = 0.0;
        for i in 0..rows {
            let d = get(i, c) - mean[c];
            var += d * d;
        }
        // constant channels (for example identically-zero shear components)
        // normalize with unit scale
        let s = (var / rows as f64).sqrt();
        std[c] = if s > 1e-12 { s } else { 1.0 };
    }
    (mean, std)
}

impl Normalizer {
    pub fn identity() -> Self {
        Self {
            input_mean: vec![0.0; INPUT_DIM],
            input_std: vec![1.0; INPUT_DIM],
            target_mean: vec![0.0; OUTPUT_DIM],
            target_std: vec![1.0; OUTPUT_DIM],
        }
    }

    /// Fits means and standard deviations over all vertices of the given
    /// samples.
    pub fn fit(samples: &[&FieldSample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("cannot fit a normalizer on no samples".into()));
        }
        let features: Vec<DMatrix<f64>> = samples.iter().map(|s| s.features()).collect();
        let total: usize = samples.iter().map(|s| s.vertex_count()).sum();
        let flat_f = |i: usize, c: usize| {
            let mut at = i;
            for f in &features {
                if at < f.nrows() {
                    return f[(at, c)];
                }
                at -= f.nrows();
            }
            unreachable!()
        };
        let flat_t = |i: usize, c: usize| {
            let mut at = i;
            for s in samples {
                if at < s.vertex_count() {
                    return s.targets[(at, c)];
                }
                at -= s.vertex_count();
            }
            unreachable!()
        };
        let (input_mean, input_std) = column_stats(total, INPUT_DIM, flat_f);
        let (target_mean, target_std) = column_stats(total, OUTPUT_DIM, flat_t);
        Ok(Self {
            input_mean,
            input_std,
            target_mean,
            target_std,
        })
    }

    pub fn normalize_inputs(&self, features: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(features.nrows(), features.ncols(), |i, c| {
            (features[(i, c)] - self.input_mean[c]) / self.input_std[c]
        })
    }

    pub fn normalize_targets(&self, targets: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(targets.nrows(), targets.ncols(), |i, c| {
            (targets[(i, c)] - self.target_mean[c]) / self.target_std[c]
        })
    }

    pub fn denormalize_outputs(&self, outputs: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(outputs.nrows(), outputs.ncols(), |i, c| {
            outputs[(i, c)] * self.target_std[c] + self.target_mean[c]
        })
    }
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

struct BlockCache {
    h_in: DMatrix<f64>,
    values: DMatrix<f64>,
    weights: Vec<Vec<f64>>,
    h_out: DMatrix<f64>,
}

struct ForwardCache {
    h0: DMatrix<f64>,
    blocks: Vec<BlockCache>,
}

fn forward_internal(
    model: &GistModel,
    x: &DMatrix<f64>,
    attn: &AttentionGraph,
) -> Result<(DMatrix<f64>, ForwardCache)> {
    let n = x.nrows();
    if x.ncols() != model.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "features have {} columns, model expects {}",
            x.ncols(),
            model.input_dim
        )));
    }
    if attn.vertex_count() != n {
        return Err(Error::ShapeMismatch(format!(
            "attention graph has {} vertices, features have {n}",
            attn.vertex_count()
        )));
    }

    let mut h = x * model.encoder_w.transpose();
    for i in 0..n {
        for c in 0..model.hidden {
            h[(i, c)] = (h[(i, c)] + model.encoder_b[c]).tanh();
        }
    }
    let h0 = h.clone();

    let mut blocks = Vec::with_capacity(model.blocks);
    for b in 0..model.blocks {
        let h_in = h.clone();
        let mut values = &h_in * model.value_w[b].transpose();
        for i in 0..n {
            for c in 0..model.hidden {
                values[(i, c)] += model.value_b[b][c];
            }
        }
        let weights = attention_weights(attn, model.theta1[b], model.theta2[b]);
        let mut mixed = DMatrix::<f64>::zeros(n, model.hidden);
        for i in 0..n {
            for (&j, &w) in attn.neighbors(i).iter().zip(&weights[i]) {
                for c in 0..model.hidden {
                    mixed[(i, c)] += w * values[(j, c)];
                }
            }
        }
        let mut h_out = h_in.clone();
        h_out += &mixed;
        h_out.apply(|v| *v = v.tanh());
        blocks.push(BlockCache {
            h_in,
            values,
            weights,
            h_out: h_out.clone(),
        });
        h = h_out;
    }

    let mut out = &h * model.decoder_w.transpose();
    for i in 0..n {
        for c in 0..OUTPUT_DIM {
            out[(i, c)] += model.decoder_b[c];
        }
    }
    Ok((out, ForwardCache { h0, blocks }))
}

/// Runs the operator on a feature matrix (already normalized if the model
/// was trained on normalized inputs). Output is N x 4 in the model's
/// working scale.
pub fn forward(model: &GistModel, x: &DMatrix<f64>, attn: &AttentionGraph) -> Result<DMatrix<f64>> {
    Ok(forward_internal(model, x, attn)?.0)
}

/// Full inference pipeline: normalize features, run the operator, undo the
/// target scaling.
pub fn predict(
    model: &GistModel,
    sample: &FieldSample,
    attn: &AttentionGraph,
    normalizer: &Normalizer,
) -> Result<DMatrix<f64>> {
    let x = normalizer.normalize_inputs(&sample.features());
    let out = forward(model, &x, attn)?;
    Ok(normalizer.denormalize_outputs(&out))
}

/// Mean squared error over all N x 4 entries after dividing each channel
/// by its training-set standard deviation.
pub fn loss(pred: &DMatrix<f64>, target: &DMatrix<f64>, channel_std: &[f64; OUTPUT_DIM]) -> Result<f64> {
    if pred.shape() != target.shape() || pred.ncols() != OUTPUT_DIM {
        return Err(Error::ShapeMismatch(format!(
            "loss over {}x{} vs {}x{}",
            pred.nrows(),
            pred.ncols(),
            target.nrows(),
            target.ncols()
        )));
    }
    let mut acc = 0.0;
    for c in 0..OUTPUT_DIM {
        let s = channel_std[c];
        for i in 0..pred.nrows() {
            let d = (pred[(i, c)] - target[(i, c)]) / s;
            acc += d * d;
        }
    }
    Ok(acc / (pred.nrows() * OUTPUT_DIM) as f64)
}

/// Gradients with the same layout as [`GistModel::flatten`].
pub struct GradientSet {
    pub flat: Vec<f64>,
    pub loss: f64,
}

/// Loss and exact reverse-mode gradients of the working-scale MSE with
/// respect to every parameter.
pub fn loss_and_gradients(
    model: &GistModel,
    x: &DMatrix<f64>,
    target: &DMatrix<f64>,
    attn: &AttentionGraph,
) -> Result<GradientSet> {
    let (pred, cache) = forward_internal(model, x, attn)?;
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch(format!(
            "targets are {}x{}, predictions {}x{}",
            target.nrows(),
            target.ncols(),
            pred.nrows(),
            pred.ncols()
        )));
    }
    let n = pred.nrows();
    let scale = 2.0 / (n * OUTPUT_DIM) as f64;
    let loss_value = {
        let mut acc = 0.0;
        for v in (&pred - target).iter() {
            acc += v * v;
        }
        acc / (n * OUTPUT_DIM) as f64
    };

    let d_pred = (&pred - target) * scale;

    // decoder
    let h_last = cache
        .blocks
        .last()
        .map(|b| &b.h_out)
        .unwrap_or(&cache.h0);
    let d_decoder_w = d_pred.transpose() * h_last;
    let d_decoder_b = DVector::from_fn(OUTPUT_DIM, |c, _| d_pred.column(c).sum());
    let mut d_h = &d_pred * &model.decoder_w;

    // blocks, reversed
    let mut d_value_w = vec![DMatrix::<f64>::zeros(model.hidden, model.hidden); model.blocks];
    let mut d_value_b = vec![DVector::<f64>::zeros(model.hidden); model.blocks];
    let mut d_theta1 = vec![0.0; model.blocks];
    let mut d_theta2 = vec![0.0; model.blocks];

    for b in (0..model.blocks).rev() {
        let blk = &cache.blocks[b];
        // through tanh(h_in + mixed)
        let mut d_z = d_h;
        for i in 0..n {
            for c in 0..model.hidden {
                let t = blk.h_out[(i, c)];
                d_z[(i, c)] *= 1.0 - t * t;
            }
        }
        let mut d_h_in = d_z.clone();
        // mixed_i = sum_j w_ij values_j
        let mut d_values = DMatrix::<f64>::zeros(n, model.hidden);
        for i in 0..n {
            let nbrs = attn.neighbors(i);
            let w = &blk.weights[i];
            // value path
            for (&j, &wij) in nbrs.iter().zip(w) {
                for c in 0..model.hidden {
                    d_values[(j, c)] += wij * d_z[(i, c)];
                }
            }
            // attention-weight path through the softmax of this row
            let dw: Vec<f64> = nbrs
                .iter()
                .map(|&j| {
                    let mut acc = 0.0;
                    for c in 0..model.hidden {
                        acc += d_z[(i, c)] * blk.values[(j, c)];
                    }
                    acc
                })
                .collect();
            let inner: f64 = w.iter().zip(&dw).map(|(wi, di)| wi * di).sum();
            for ((&kij, wi), di) in attn.kernels(i).iter().zip(w).zip(&dw) {
                let dl = wi * (di - inner);
                d_theta1[b] += dl * kij;
                d_theta2[b] += dl;
            }
        }
        // values = h_in W_v^T + b
        d_value_w[b] = d_values.transpose() * &blk.h_in;
        d_value_b[b] = DVector::from_fn(model.hidden, |c, _| d_values.column(c).sum());
        d_h_in += &d_values * &model.value_w[b];
        d_h = d_h_in;
    }

    // encoder: h0 = tanh(x W_e^T + b_e)
    let mut d_z0 = d_h;
    for i in 0..n {
        for c in 0..model.hidden {
            let t = cache.h0[(i, c)];
            d_z0[(i, c)] *= 1.0 - t * t;
        }
    }
    let d_encoder_w = d_z0.transpose() * x;
    let d_encoder_b = DVector::from_fn(model.hidden, |c, _| d_z0.column(c).sum());

    let mut flat = Vec::with_capacity(model.num_params());
    flat.extend_from_slice(d_encoder_w.as_slice());
    flat.extend_from_slice(d_encoder_b.as_slice());
    for b in 0..model.blocks {
        flat.extend_from_slice(d_value_w[b].as_slice());
        flat.extend_from_slice(d_value_b[b].as_slice());
        flat.push(d_theta1[b]);
        flat.push(d_theta2[b]);
    }
    flat.extend_from_slice(d_decoder_w.as_slice());
    flat.extend_from_slice(d_decoder_b.as_slice());

    Ok(GradientSet {
        flat,
        loss: loss_value,
    })
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// One training item: normalized features, normalized targets, and the
/// attention support of the item's mesh (shared across samples on the same
/// mesh).
#[derive(Clone)]
pub struct TrainItem {
    pub features: DMatrix<f64>,
    pub targets: DMatrix<f64>,
    pub attn: Arc<AttentionGraph>,
}

#[derive(Debug, Clone, Copy)]
pub struct TrainOpts {
    pub learning_rate: f64,
    pub epochs: usize,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainOpts {
    fn default() -> Self {
        Self {
            learning_rate: 0.03,
            epochs: 400,
            momentum: 0.9,
            seed: 0,
        }
    }
}

/// Momentum gradient descent over shuffled samples. Returns the mean loss
/// per epoch. Deterministic given the seed; aborts with a divergence error
/// if the loss stops being finite.
pub fn train(model: &mut GistModel, items: &[TrainItem], opts: &TrainOpts) -> Result<Vec<f64>> {
    train_with_progress(model, items, opts, &mut |_, _| {})
}

/// [`train`] with a per-epoch progress callback `(epoch, mean loss)`.
pub fn train_with_progress(
    model: &mut GistModel,
    items: &[TrainItem],
    opts: &TrainOpts,
    progress: &mut dyn FnMut(usize, f64),
) -> Result<Vec<f64>> {
    if items.is_empty() {
        return Err(Error::InvalidParameter("training needs at least one sample".into()));
    }
    let mut params = model.flatten();
    let mut velocity = vec![0.0f64; params.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut history = Vec::with_capacity(opts.epochs);

    for epoch in 0..opts.epochs {
        let mut order: Vec<usize> = (0..items.len()).collect();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &idx in &order {
            let item = &items[idx];
            let grads = loss_and_gradients(model, &item.features, &item.targets, item.attn.as_ref())?;
            if !grads.loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            epoch_loss += grads.loss;
            for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grads.flat) {
                *v = opts.momentum * *v - opts.learning_rate * g;
                *p += *v;
            }
            model.unflatten(&params)?;
        }
        let mean = epoch_loss / items.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.push(mean);
        progress(epoch, mean);
    }
    Ok(history)
}

// ---------------------------------------------------------------------------
// Checkpoint format
// ---------------------------------------------------------------------------

/// Everything needed to reproduce inference: architecture, embedding
/// pipeline settings, normalization statistics, parameters, and the alpha
/// range the model was trained on.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Checkpoint {
    pub version: String,
    pub hidden: usize,
    pub blocks: usize,
    pub k: usize,
    pub r: usize,
    pub filter: Vec<f64>,
    pub embed_seed: u64,
    pub train_alpha_min: f64,
    pub train_alpha_max: f64,
    /// Mesh resolution the model was trained at; sweeps default to it.
    pub resolution: usize,
    pub flow: crate::loads::FlowConstants,
    pub recipe: crate::datagen::FieldRecipe,
    pub normalizer: Normalizer,
    pub params: BTreeMap<String, Vec<f64>>,
}

impl Checkpoint {
    pub fn from_model(
        model: &GistModel,
        k: usize,
        r: usize,
        filter: &FilterSpec,
        embed_seed: u64,
        train_alpha: (f64, f64),
        normalizer: &Normalizer,
    ) -> Self {
        let mut params = BTreeMap::new();
        params.insert("encoder_w".to_string(), model.encoder_w.as_slice().to_vec());
        params.insert("encoder_b".to_string(), model.encoder_b.as_slice().to_vec());
        for b in 0..model.blocks {
            params.insert(format!("block{b}_value_w"), model.value_w[b].as_slice().to_vec());
            params.insert(format!("block{b}_value_b"), model.value_b[b].as_slice().to_vec());
            params.insert(format!("block{b}_theta"), vec![model.theta1[b], model.theta2[b]]);
        }
        params.insert("decoder_w".to_string(), model.decoder_w.as_slice().to_vec());
        params.insert("decoder_b".to_string(), model.decoder_b.as_slice().to_vec());
        Checkpoint {
            version: CHECKPOINT_VERSION.to_string(),
            hidden: model.hidden,
            blocks: model.blocks,
            k,
            r,
            filter: filter.coefficients().to_vec(),
            embed_seed,
            train_alpha_min: train_alpha.0,
            train_alpha_max: train_alpha.1,
            resolution: 16,
            flow: crate::loads::FlowConstants::default(),
            recipe: crate::datagen::FieldRecipe::default(),
            normalizer: normalizer.clone(),
            params,
        }
    }

    pub fn to_model(&self) -> Result<GistModel> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {:?}, expected {CHECKPOINT_VERSION:?}",
                self.version
            )));
        }
        let mut model = init_model(INPUT_DIM, self.hidden, self.blocks, 0)?;
        let get = |name: &str| -> Result<&Vec<f64>> {
            self.params
                .get(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter array {name:?}")))
        };
        let fill = |dst: &mut [f64], src: &[f64], name: &str| -> Result<()> {
            if dst.len() != src.len() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name:?} has {} entries, expected {}",
                    src.len(),
                    dst.len()
                )));
            }
            dst.copy_from_slice(src);
            Ok(())
        };
        fill(model.encoder_w.as_mut_slice(), get("encoder_w")?, "encoder_w")?;
        fill(model.encoder_b.as_mut_slice(), get("encoder_b")?, "encoder_b")?;
        for b in 0..self.blocks {
            fill(
                model.value_w[b].as_mut_slice(),
                get(&format!("block{b}_value_w"))?,
                "value_w",
            )?;
            fill(
                model.value_b[b].as_mut_slice(),
                get(&format!("block{b}_value_b"))?,
                "value_b",
            )?;
            let theta = get(&format!("block{b}_theta"))?;
            if theta.len() != 2 {
                return Err(Error::Checkpoint("theta array must have 2 entries".into()));
            }
            model.theta1[b] = theta[0];
            model.theta2[b] = theta[1];
        }
        fill(model.decoder_w.as_mut_slice(), get("decoder_w")?, "decoder_w")?;
        fill(model.decoder_b.as_mut_slice(), get("decoder_b")?, "decoder_b")?;
        Ok(model)
    }

    pub fn filter_spec(&self) -> Result<FilterSpec> {
        FilterSpec::new(self.filter.clone())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = std::fs::read_to_string(path)?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {:?}",
                ck.version
            )));
        }
        Ok(ck)
    }
}
