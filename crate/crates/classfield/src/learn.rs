//! From-scratch MLP refinement predictor: forward/backward passes, full-batch
//! Adam on the hierarchy prefix loss, the diagnostic baselines, and child-slot
//! canonicalization.

use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::hierarchy::Hierarchy;
use crate::linalg::{sub, sym_eigh, Mat};
use crate::rng::SeedStream;
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Gelu,
}

impl Activation {
    fn apply<S: Scalar>(self, z: S) -> S {
        match self {
            Activation::Relu => z.max(S::zero()),
            Activation::Gelu => {
                let x = z.f64();
                S::of(0.5 * x * (1.0 + erf(x / std::f64::consts::SQRT_2)))
            }
        }
    }

    fn derivative<S: Scalar>(self, z: S) -> S {
        match self {
            Activation::Relu => {
                if z > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::Gelu => {
                let x = z.f64();
                let phi_cdf = 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2));
                let phi_pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
                S::of(phi_cdf + x * phi_pdf)
            }
        }
    }
}

/// MLP mapping a parent point to a d×K residual matrix (output read
/// column-major: slot k occupies entries k·d .. (k+1)·d).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpParams<S> {
    pub d: usize,
    pub k: usize,
    pub dims: Vec<usize>,
    pub weights: Vec<Mat<S>>,
    pub biases: Vec<Vec<S>>,
    pub activation: Activation,
}

impl<S: Scalar> MlpParams<S> {
    /// Kaiming-style uniform fan-in init from the seeded stream.
    pub fn init(
        d: usize,
        k: usize,
        hidden: &[usize],
        activation: Activation,
        rng: &mut SeedStream,
    ) -> Self {
        let mut dims = vec![d];
        dims.extend_from_slice(hidden);
        dims.push(d * k);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..dims.len() - 1 {
            let fan_in = dims[l] as f64;
            let wlim = (6.0 / fan_in).sqrt();
            let blim = 1.0 / fan_in.sqrt();
            weights.push(Mat::from_fn(dims[l + 1], dims[l], |_, _| {
                S::of(rng.uniform_in(-wlim, wlim))
            }));
            biases.push((0..dims[l + 1]).map(|_| S::of(rng.uniform_in(-blim, blim))).collect());
        }
        MlpParams {
            d,
            k,
            dims,
            weights,
            biases,
            activation,
        }
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn n_params(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.data.len() + b.len())
            .sum()
    }

    /// Raw network output of length d·K.
    pub fn forward(&self, x: &[S]) -> Vec<S> {
        let mut h = x.to_vec();
        let last = self.n_layers() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w.matvec(&h);
            for (zi, bi) in z.iter_mut().zip(b) {
                *zi = *zi + *bi;
            }
            h = if l == last {
                z
            } else {
                z.into_iter().map(|v| self.activation.apply(v)).collect()
            };
        }
        h
    }

    /// Forward pass keeping pre-activations and layer inputs for backprop.
    fn forward_cached(&self, x: &[S]) -> (Vec<Vec<S>>, Vec<Vec<S>>) {
        let mut inputs = vec![x.to_vec()];
        let mut pre = Vec::new();
        let last = self.n_layers() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w.matvec(inputs.last().unwrap());
            for (zi, bi) in z.iter_mut().zip(b) {
                *zi = *zi + *bi;
            }
            pre.push(z.clone());
            let out = if l == last {
                z
            } else {
                z.into_iter().map(|v| self.activation.apply(v)).collect()
            };
            inputs.push(out);
        }
        (inputs, pre)
    }

    pub fn residual_matrix(&self, x: &[S]) -> Mat<S> {
        let out = self.forward(x);
        Mat::from_fn(self.d, self.k, |i, c| out[c * self.d + i])
    }

    pub fn flatten(&self) -> Vec<S> {
        let mut flat = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            flat.extend_from_slice(&w.data);
            flat.extend_from_slice(b);
        }
        flat
    }

    pub fn assign_from_flat(&mut self, flat: &[S]) {
        let mut off = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let wn = w.data.len();
            w.data.copy_from_slice(&flat[off..off + wn]);
            off += wn;
            let bn = b.len();
            b.copy_from_slice(&flat[off..off + bn]);
            off += bn;
        }
        debug_assert_eq!(off, flat.len());
    }

    /// Accumulate d(loss)/d(params) for one input given d(loss)/d(output),
    /// into a flat buffer laid out like `flatten`.
    fn backprop_into(&self, x: &[S], grad_out: &[S], grads: &mut [S]) {
        let (inputs, pre) = self.forward_cached(x);
        let n = self.n_layers();
        let mut delta = grad_out.to_vec();
        // per-layer flat offsets
        let mut offsets = Vec::with_capacity(n);
        let mut off = 0;
        for (w, b) in self.weights.iter().zip(&self.biases) {
            offsets.push(off);
            off += w.data.len() + b.len();
        }
        for l in (0..n).rev() {
            let w = &self.weights[l];
            let input = &inputs[l];
            let base = offsets[l];
            for i in 0..w.rows {
                let di = delta[i];
                let row = base + i * w.cols;
                for j in 0..w.cols {
                    grads[row + j] = grads[row + j] + di * input[j];
                }
                grads[base + w.data.len() + i] = grads[base + w.data.len() + i] + di;
            }
            if l > 0 {
                let mut prev = vec![S::zero(); w.cols];
                for i in 0..w.rows {
                    let di = delta[i];
                    for j in 0..w.cols {
                        prev[j] = prev[j] + w[(i, j)] * di;
                    }
                }
                for (pj, zj) in prev.iter_mut().zip(&pre[l - 1]) {
                    *pj = *pj * self.activation.derivative(*zj);
                }
                delta = prev;
            }
        }
    }
}

/// One observed refinement: parent, its K ordered children, and the step
/// scale a = s^{l+1}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrefixTuple<S> {
    pub parent: Vec<S>,
    pub children: Vec<Vec<S>>,
    pub scale: S,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrefixDataset<S> {
    pub d: usize,
    pub k: usize,
    pub tuples: Vec<PrefixTuple<S>>,
}

/// Parent-to-children tuples from levels 0..l_train-1 of the hierarchy, so
/// observed centres span levels 0..l_train.
pub fn prefix_dataset<S: Scalar>(h: &Hierarchy<S>, l_train: usize) -> Result<PrefixDataset<S>> {
    if l_train == 0 || l_train > h.depth() {
        return Err(Error::InvalidArgument(format!(
            "l_train must be in 1..={}, got {l_train}",
            h.depth()
        )));
    }
    let mut tuples = Vec::new();
    for l in 0..l_train {
        let a = S::of(h.s.powi(l as i32 + 1));
        for (pi, parent) in h.levels[l].iter().enumerate() {
            let children = (0..h.k)
                .map(|c| h.levels[l + 1][pi * h.k + c].clone())
                .collect();
            tuples.push(PrefixTuple {
                parent: parent.clone(),
                children,
                scale: a,
            });
        }
    }
    Ok(PrefixDataset {
        d: h.d,
        k: h.k,
        tuples,
    })
}

/// Sum-form squared rollout-step loss and its gradient in flat layout.
pub fn prefix_loss<S: Scalar>(params: &MlpParams<S>, data: &PrefixDataset<S>) -> (f64, Vec<S>) {
    let mut grads = vec![S::zero(); params.n_params()];
    let mut loss = 0.0f64;
    let d = params.d;
    for tup in &data.tuples {
        let out = params.forward(&tup.parent);
        let mut grad_out = vec![S::zero(); out.len()];
        for k in 0..params.k {
            for i in 0..d {
                let e = tup.parent[i] + tup.scale * out[k * d + i] - tup.children[k][i];
                loss += (e * e).f64();
                grad_out[k * d + i] = S::of(2.0) * tup.scale * e;
            }
        }
        params.backprop_into(&tup.parent, &grad_out, &mut grads);
    }
    (loss, grads)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            epochs: 3000,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            seed: 0,
        }
    }
}

/// Full-batch Adam over a flat parameter vector.
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    cfg: TrainConfig,
}

impl Adam {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            cfg: cfg.clone(),
        }
    }

    pub fn step<S: Scalar>(&mut self, params: &mut [S], grads: &[S]) {
        self.t += 1;
        let b1 = self.cfg.beta1;
        let b2 = self.cfg.beta2;
        let bc1 = 1.0 - b1.powi(self.t);
        let bc2 = 1.0 - b2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i].f64();
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] =
                params[i] - S::of(self.cfg.lr * mhat / (vhat.sqrt() + self.cfg.eps_adam));
        }
    }
}

/// Train an MLP on the prefix loss; returns the model and per-epoch losses.
pub fn train_mlp<S: Scalar>(
    data: &PrefixDataset<S>,
    hidden: &[usize],
    activation: Activation,
    cfg: &TrainConfig,
) -> Result<(MlpParams<S>, Vec<f64>)> {
    if data.tuples.is_empty() {
        return Err(Error::TrainingFailure("empty dataset".into()));
    }
    let mut rng = SeedStream::new(cfg.seed);
    let mut params = MlpParams::<S>::init(data.d, data.k, hidden, activation, &mut rng);
    let mut flat = params.flatten();
    let mut adam = Adam::new(flat.len(), cfg);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, grads) = prefix_loss(&params, data);
        if !loss.is_finite() {
            return Err(Error::TrainingFailure(format!(
                "loss diverged to {loss} at epoch {epoch} (history length {})",
                history.len()
            )));
        }
        history.push(loss);
        adam.step(&mut flat, &grads);
        params.assign_from_flat(&flat);
    }
    Ok((params, history))
}

/// Paper-scale predictor architecture: hidden width 64, hidden depth 3.
pub const DEFAULT_HIDDEN: [usize; 3] = [64, 64, 64];

/// Train the refinement predictor on levels 0..l_train of a hierarchy.
pub fn train_cfp<S: Scalar>(
    h: &Hierarchy<S>,
    l_train: usize,
    hidden: &[usize],
    activation: Activation,
    cfg: &TrainConfig,
) -> Result<(Generator<S>, Vec<f64>)> {
    let data = prefix_dataset(h, l_train)?;
    let (params, history) = train_mlp(&data, hidden, activation, cfg)?;
    Ok((Generator::LearnedCfp(params), history))
}

/// Closed-form location-independent template: slot-wise mean of observed
/// residuals normalized by their level scales.
pub fn avg_residual_baseline<S: Scalar>(h: &Hierarchy<S>, l_train: usize) -> Result<Generator<S>> {
    let data = prefix_dataset(h, l_train)?;
    let n_par = data.tuples.len();
    let mut cols = vec![vec![S::zero(); h.d]; h.k];
    for tup in &data.tuples {
        for (k, col) in cols.iter_mut().enumerate() {
            for i in 0..h.d {
                *col.get_mut(i).unwrap() =
                    col[i] + (tup.children[k][i] - tup.parent[i]) / tup.scale;
            }
        }
    }
    let inv = S::of(1.0 / n_par as f64);
    for col in &mut cols {
        for v in col.iter_mut() {
            *v = *v * inv;
        }
    }
    Ok(Generator::Constant {
        columns: Mat::from_cols(&cols),
        tag: "baseline-avg".into(),
    })
}

/// Learnable constant r̂(x)_k = c_k trained with the same loss and Adam loop.
pub fn learnable_const_baseline<S: Scalar>(
    h: &Hierarchy<S>,
    l_train: usize,
    cfg: &TrainConfig,
) -> Result<(Generator<S>, Vec<f64>)> {
    let data = prefix_dataset(h, l_train)?;
    let (d, k) = (data.d, data.k);
    let mut rng = SeedStream::new(cfg.seed);
    let lim = 1.0 / (d as f64).sqrt();
    let mut c: Vec<S> = (0..d * k).map(|_| S::of(rng.uniform_in(-lim, lim))).collect();
    let mut adam = Adam::new(c.len(), cfg);
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut loss = 0.0f64;
        let mut grads = vec![S::zero(); c.len()];
        for tup in &data.tuples {
            for slot in 0..k {
                for i in 0..d {
                    let e = tup.parent[i] + tup.scale * c[slot * d + i] - tup.children[slot][i];
                    loss += (e * e).f64();
                    grads[slot * d + i] = grads[slot * d + i] + S::of(2.0) * tup.scale * e;
                }
            }
        }
        history.push(loss);
        adam.step(&mut c, &grads);
    }
    let cols: Vec<Vec<S>> = (0..k).map(|slot| c[slot * d..(slot + 1) * d].to_vec()).collect();
    Ok((
        Generator::Constant {
            columns: Mat::from_cols(&cols),
            tag: "baseline-const".into(),
        },
        history,
    ))
}

/// Affine rule r̂(x)_k = A_k x + b_k: a single linear layer trained with the
/// shared loop, then unpacked into per-slot matrices.
pub fn affine_baseline<S: Scalar>(
    h: &Hierarchy<S>,
    l_train: usize,
    cfg: &TrainConfig,
) -> Result<(Generator<S>, Vec<f64>)> {
    let data = prefix_dataset(h, l_train)?;
    let (params, history) = train_mlp(&data, &[], Activation::Relu, cfg)?;
    let (d, k) = (data.d, data.k);
    let w = &params.weights[0];
    let b = &params.biases[0];
    let mats: Vec<Mat<S>> = (0..k)
        .map(|slot| Mat::from_fn(d, d, |i, j| w[(slot * d + i, j)]))
        .collect();
    let offsets: Vec<Vec<S>> = (0..k).map(|slot| b[slot * d..(slot + 1) * d].to_vec()).collect();
    Ok((
        Generator::Affine {
            mats,
            offsets,
            tag: "baseline-affine".into(),
        },
        history,
    ))
}

/// Outcome of child-slot canonicalization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CanonReport {
    /// True when the centroid covariance was rank-deficient and coordinate
    /// axes were used instead of PCA directions.
    pub axis_fallback: bool,
}

fn pca_plane<S: Scalar>(h: &Hierarchy<S>) -> (Vec<S>, Vec<S>, bool) {
    let d = h.d;
    let pts: Vec<&Vec<S>> = h.levels.iter().flatten().collect();
    let n = pts.len() as f64;
    let mut mean = vec![S::zero(); d];
    for p in &pts {
        for i in 0..d {
            mean[i] = mean[i] + p[i];
        }
    }
    for m in mean.iter_mut() {
        *m = *m / S::of(n);
    }
    let mut cov: Mat<S> = Mat::zeros(d, d);
    for p in &pts {
        let delta = sub(p, &mean);
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] = cov[(i, j)] + delta[i] * delta[j] / S::of(n);
            }
        }
    }
    let (vals, vecs) = sym_eigh(&cov);
    let rank_ok = vals.len() >= 2 && vals[1].f64() > 1e-12 * vals[0].f64().max(1e-300);
    if !rank_ok {
        let mut u1 = vec![S::zero(); d];
        let mut u2 = vec![S::zero(); d];
        u1[0] = S::one();
        u2[1] = S::one();
        return (u1, u2, true);
    }
    let fix_sign = |mut u: Vec<S>| -> Vec<S> {
        if let Some(first) = u.iter().find(|v| **v != S::zero()) {
            if *first < S::zero() {
                for v in u.iter_mut() {
                    *v = -*v;
                }
            }
        }
        u
    };
    (fix_sign(vecs.col(0)), fix_sign(vecs.col(1)), false)
}

fn reorder_with<S: Scalar>(
    h: &Hierarchy<S>,
    mut slot_order: impl FnMut(usize, usize, &Hierarchy<S>) -> Vec<usize>,
) -> Hierarchy<S> {
    let k = h.k;
    let mut out = h.clone();
    let mut perm: Vec<usize> = vec![0]; // new flat index -> old flat index
    for l in 0..h.depth() {
        let mut next_perm = Vec::with_capacity(h.levels[l + 1].len());
        let mut next_level = Vec::with_capacity(h.levels[l + 1].len());
        for &old_parent in perm.iter() {
            let order = slot_order(l, old_parent, h);
            debug_assert_eq!(order.len(), k);
            for &slot in &order {
                let old_idx = old_parent * k + slot;
                next_perm.push(old_idx);
                next_level.push(h.levels[l + 1][old_idx].clone());
            }
        }
        out.levels[l + 1] = next_level;
        perm = next_perm;
    }
    out
}

/// Sort each parent's children by the polar angle of their displacement in
/// the PCA plane (norm as tie-breaker), carrying descendant subtrees along.
pub fn canonicalize_children<S: Scalar>(h: &Hierarchy<S>) -> Result<(Hierarchy<S>, CanonReport)> {
    if h.d < 2 {
        return Err(Error::InvalidArgument(
            "canonicalization needs d >= 2".into(),
        ));
    }
    if h.depth() < 1 {
        return Err(Error::InvalidArgument(
            "canonicalization needs at least one refinement level".into(),
        ));
    }
    let (u1, u2, axis_fallback) = pca_plane(h);
    let reordered = reorder_with(h, |l, old_parent, h| {
        let parent = &h.levels[l][old_parent];
        let mut keyed: Vec<(usize, f64, f64)> = (0..h.k)
            .map(|slot| {
                let child = &h.levels[l + 1][old_parent * h.k + slot];
                let delta = sub(child, parent);
                let z1 = crate::linalg::dot(&u1, &delta).f64();
                let z2 = crate::linalg::dot(&u2, &delta).f64();
                let theta = z2.atan2(z1);
                (slot, theta, crate::linalg::norm2(&delta).f64())
            })
            .collect();
        keyed.sort_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .unwrap()
                .then(a.2.partial_cmp(&b.2).unwrap())
        });
        keyed.into_iter().map(|(slot, _, _)| slot).collect()
    });
    Ok((reordered, CanonReport { axis_fallback }))
}

/// Independently permute each parent's children (with their subtrees);
/// ablation counterpart of canonicalization.
pub fn permute_children<S: Scalar>(h: &Hierarchy<S>, rng: &mut SeedStream) -> Hierarchy<S> {
    reorder_with(h, |_, _, h| {
        let mut order: Vec<usize> = (0..h.k).collect();
        for i in (1..order.len()).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            order.swap(i, j);
        }
        order
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::rollout;

    fn const_gen(cols: &[Vec<f64>]) -> Generator<f64> {
        Generator::Constant {
            columns: Mat::from_cols(cols),
            tag: "constant".into(),
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut rng = SeedStream::new(0);
        let mut p = MlpParams::<f64>::init(2, 3, &[8], Activation::Relu, &mut rng);
        let flat = vec![0.0; p.n_params()];
        p.assign_from_flat(&flat);
        assert_eq!(p.forward(&[0.4, -0.3]), vec![0.0; 6]);
    }

    #[test]
    fn single_layer_is_affine() {
        let mut rng = SeedStream::new(1);
        let p = MlpParams::<f64>::init(2, 2, &[], Activation::Relu, &mut rng);
        let x = [0.7, -0.2];
        let out = p.forward(&x);
        let mut z = p.weights[0].matvec(&x);
        for (zi, bi) in z.iter_mut().zip(&p.biases[0]) {
            *zi += *bi;
        }
        assert_eq!(out, z);
    }

    fn numerical_grad(p: &MlpParams<f64>, data: &PrefixDataset<f64>, step: f64) -> Vec<f64> {
        let flat = p.flatten();
        let mut num = vec![0.0; flat.len()];
        for i in 0..flat.len() {
            let mut plus = p.clone();
            let mut minus = p.clone();
            let mut fp = flat.clone();
            fp[i] += step;
            plus.assign_from_flat(&fp);
            fp[i] -= 2.0 * step;
            minus.assign_from_flat(&fp);
            num[i] = (prefix_loss(&plus, data).0 - prefix_loss(&minus, data).0) / (2.0 * step);
        }
        num
    }

    fn has_kink(p: &MlpParams<f64>, data: &PrefixDataset<f64>) -> bool {
        data.tuples.iter().any(|t| {
            let (_, pre) = p.forward_cached(&t.parent);
            pre[..pre.len() - 1]
                .iter()
                .flatten()
                .any(|z| z.abs() < 1e-6)
        })
    }

    #[test]
    fn gradients_match_finite_differences() {
        for activation in [Activation::Relu, Activation::Gelu] {
            let mut checked = 0;
            let mut attempt = 0u64;
            while checked < 20 {
                attempt += 1;
                let mut rng = SeedStream::new(1000 + attempt);
                let p = MlpParams::<f64>::init(2, 2, &[5, 4], activation, &mut rng);
                let data = PrefixDataset {
                    d: 2,
                    k: 2,
                    tuples: vec![PrefixTuple {
                        parent: vec![rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)],
                        children: vec![
                            vec![rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)],
                            vec![rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)],
                        ],
                        scale: 0.5,
                    }],
                };
                if activation == Activation::Relu && has_kink(&p, &data) {
                    continue; // finite differences are invalid at kinks
                }
                let (_, analytic) = prefix_loss(&p, &data);
                let numeric = numerical_grad(&p, &data, 1e-5);
                let norm: f64 = numeric.iter().map(|g| g * g).sum::<f64>().sqrt();
                for (a, n) in analytic.iter().zip(&numeric) {
                    let denom = n.abs().max(norm.max(1e-8));
                    assert!(
                        (a - n).abs() / denom <= 1e-4,
                        "{activation:?}: analytic {a} vs numeric {n}"
                    );
                }
                checked += 1;
            }
        }
    }

    #[test]
    fn loss_zero_when_children_reproduced() {
        // residual rule r = C generates the data, and the loss of any model
        // matching it vanishes
        let cols = vec![vec![0.5, 0.0], vec![0.0, 0.5]];
        let g = const_gen(&cols);
        let h = rollout(&g, &[0.0, 0.0], 0.5, 2, false).unwrap();
        let data = prefix_dataset(&h, 2).unwrap();
        // encode the constant rule as a zero-weight single layer with bias C
        let mut rng = SeedStream::new(0);
        let mut p = MlpParams::<f64>::init(2, 2, &[], Activation::Relu, &mut rng);
        let mut flat = vec![0.0; p.n_params()];
        // bias entries live after the 4x2 weight block, column-major slots
        flat[8] = 0.5;
        flat[9] = 0.0;
        flat[10] = 0.0;
        flat[11] = 0.5;
        p.assign_from_flat(&flat);
        let (loss, _) = prefix_loss(&p, &data);
        assert!(loss < 1e-28, "loss {loss}");
    }

    #[test]
    fn loss_single_tuple_expansion() {
        // x=0, a=1, one child at c, zero model: loss = ‖c‖²
        let mut rng = SeedStream::new(0);
        let mut p = MlpParams::<f64>::init(2, 1, &[], Activation::Relu, &mut rng);
        p.assign_from_flat(&vec![0.0; p.n_params()]);
        let data = PrefixDataset {
            d: 2,
            k: 1,
            tuples: vec![PrefixTuple {
                parent: vec![0.0, 0.0],
                children: vec![vec![0.3, -0.4]],
                scale: 1.0,
            }],
        };
        let (loss, _) = prefix_loss(&p, &data);
        assert!((loss - 0.25).abs() < 1e-15);
    }

    #[test]
    fn training_is_deterministic() {
        let g = const_gen(&[vec![0.4, 0.1], vec![-0.2, 0.5]]);
        let h = rollout(&g, &[0.0, 0.0], 0.5, 2, false).unwrap();
        let data = prefix_dataset(&h, 2).unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            ..Default::default()
        };
        let (a, ha) = train_mlp(&data, &[8], Activation::Relu, &cfg).unwrap();
        let (b, hb) = train_mlp(&data, &[8], Activation::Relu, &cfg).unwrap();
        assert_eq!(a.flatten(), b.flatten());
        assert_eq!(ha, hb);
    }

    #[test]
    fn avg_residual_recovers_constant_rule() {
        let cols = vec![vec![0.4, 0.1], vec![-0.2, 0.5]];
        let g = const_gen(&cols);
        let h = rollout(&g, &[0.0, 0.0], 0.5, 3, false).unwrap();
        let avg = avg_residual_baseline(&h, 2).unwrap();
        let r = avg.residuals(&[0.0, 0.0]);
        for (k, col) in cols.iter().enumerate() {
            for i in 0..2 {
                assert!((r[(i, k)] - col[i]).abs() < 1e-12);
            }
        }
        // and its rollout matches the source hierarchy exactly
        let h2 = rollout(&avg, &[0.0, 0.0], 0.5, 3, false).unwrap();
        for l in 0..=3 {
            for (a, b) in h.levels[l].iter().zip(&h2.levels[l]) {
                for i in 0..2 {
                    assert!((a[i] - b[i]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn avg_residual_is_slotwise_mean() {
        // two parents with different slot-0 normalized residuals u, v
        let h = Hierarchy {
            d: 1,
            k: 1,
            s: 1.0,
            root: vec![0.0],
            levels: vec![vec![vec![0.0]], vec![vec![0.2]], vec![vec![0.8]]],
            generator_tag: "manual".into(),
        };
        let avg = avg_residual_baseline::<f64>(&h, 2).unwrap();
        // residuals: 0.2 and 0.6, mean 0.4
        let r = avg.residuals(&[0.0]);
        assert!((r[(0, 0)] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn const_baseline_converges_on_constant_data() {
        let cols = vec![vec![0.4, 0.1], vec![-0.2, 0.5], vec![0.0, -0.3]];
        let g = const_gen(&cols);
        let h = rollout(&g, &[0.0, 0.0], 0.5, 2, false).unwrap();
        let cfg = TrainConfig {
            epochs: 4000,
            lr: 5e-3,
            ..Default::default()
        };
        let (gen, history) = learnable_const_baseline(&h, 2, &cfg).unwrap();
        assert!(history.last().unwrap() < &1e-8, "final loss {}", history.last().unwrap());
        let r = gen.residuals(&[9.9, -9.9]); // location-independent
        for (k, col) in cols.iter().enumerate() {
            for i in 0..2 {
                assert!((r[(i, k)] - col[i]).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn affine_baseline_recovers_affine_rule() {
        let mats = vec![
            Mat::from_cols(&[vec![0.3, -0.1], vec![0.2, 0.4]]),
            Mat::from_cols(&[vec![-0.2, 0.0], vec![0.1, 0.3]]),
        ];
        let offsets = vec![vec![0.5, 0.0], vec![-0.3, 0.2]];
        let truth = Generator::Affine {
            mats: mats.clone(),
            offsets: offsets.clone(),
            tag: "truth".into(),
        };
        let h = rollout(&truth, &[0.1, 0.2], 0.5, 3, false).unwrap();
        let cfg = TrainConfig {
            epochs: 8000,
            lr: 5e-3,
            ..Default::default()
        };
        let (gen, _) = affine_baseline(&h, 3, &cfg).unwrap();
        // compare predictions over the data range
        let mut rng = SeedStream::new(2);
        for _ in 0..20 {
            let x = [rng.uniform_in(-0.3, 0.5), rng.uniform_in(-0.3, 0.5)];
            let rt = truth.residuals(&x);
            let rl = gen.residuals(&x);
            for k in 0..2 {
                for i in 0..2 {
                    assert!(
                        (rt[(i, k)] - rl[(i, k)]).abs() < 1e-3,
                        "slot {k} coord {i}: {} vs {}",
                        rt[(i, k)],
                        rl[(i, k)]
                    );
                }
            }
        }
    }

    #[test]
    fn affine_baseline_on_constant_data_zeroes_matrix() {
        let cols = vec![vec![0.4, 0.1], vec![-0.2, 0.5]];
        let g = const_gen(&cols);
        let h = rollout(&g, &[0.1, -0.2], 0.5, 3, false).unwrap();
        let cfg = TrainConfig {
            epochs: 8000,
            lr: 5e-3,
            ..Default::default()
        };
        let (gen, _) = affine_baseline(&h, 3, &cfg).unwrap();
        match &gen {
            Generator::Affine { mats, offsets, .. } => {
                for (k, col) in cols.iter().enumerate() {
                    assert!(mats[k].frobenius_norm() < 2e-2, "A_{k} not ~0");
                    for i in 0..2 {
                        assert!((offsets[k][i] - col[i]).abs() < 1e-2);
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn self_distillation_reaches_near_zero_loss() {
        let mut rng = SeedStream::new(77);
        let teacher_params = MlpParams::<f64>::init(2, 3, &[16], Activation::Relu, &mut rng);
        let teacher = Generator::LearnedCfp(teacher_params);
        let h = rollout(&teacher, &[0.0, 0.0], 0.5, 3, false).unwrap();
        let data = prefix_dataset(&h, 2).unwrap();
        let cfg = TrainConfig {
            epochs: 20_000,
            lr: 1e-2,
            seed: 5,
            ..Default::default()
        };
        let (_, history) = train_mlp(&data, &[16], Activation::Relu, &cfg).unwrap();
        assert!(
            history.last().unwrap() < &1e-6,
            "final loss {}",
            history.last().unwrap()
        );
    }

    #[test]
    fn cfp_matches_avg_baseline_on_constant_data() {
        let cols = vec![vec![0.4, 0.1], vec![-0.2, 0.5], vec![0.1, -0.3]];
        let g = const_gen(&cols);
        let h = rollout(&g, &[0.0, 0.0], 0.5, 2, false).unwrap();
        let cfg = TrainConfig {
            epochs: 60_000,
            lr: 1e-2,
            ..Default::default()
        };
        // train through depth 2 so every rollout input is an observed parent;
        // both methods then recover the unique constant rule there
        let (cfp, history) = train_cfp(&h, 2, &[16, 16], Activation::Relu, &cfg).unwrap();
        assert!(history.last().unwrap() < &1e-10, "final loss {}", history.last().unwrap());
        let avg = avg_residual_baseline(&h, 2).unwrap();
        let ha = rollout(&cfp, &[0.0, 0.0], 0.5, 2, false).unwrap();
        let hb = rollout(&avg, &[0.0, 0.0], 0.5, 2, false).unwrap();
        for l in 0..=2 {
            for (a, b) in ha.levels[l].iter().zip(&hb.levels[l]) {
                for i in 0..2 {
                    assert!((a[i] - b[i]).abs() < 1e-4, "level {l}: {a:?} vs {b:?}");
                }
            }
        }
    }

    #[test]
    fn loss_mostly_non_increasing() {
        let cols = vec![vec![0.4, 0.1], vec![-0.2, 0.5], vec![0.1, -0.3]];
        let g = const_gen(&cols);
        let h = rollout(&g, &[0.0, 0.0], 0.5, 3, false).unwrap();
        let data = prefix_dataset(&h, 2).unwrap();
        let cfg = TrainConfig {
            epochs: 1000,
            ..Default::default()
        };
        let (_, history) = train_mlp(&data, &[32, 32], Activation::Relu, &cfg).unwrap();
        let drops = history.windows(2).filter(|w| w[1] <= w[0]).count();
        assert!(
            drops as f64 >= 0.9 * (history.len() - 1) as f64,
            "only {drops} of {} epochs non-increasing",
            history.len() - 1
        );
        assert!(history.last().unwrap() < history.first().unwrap());
    }

    #[test]
    fn canonicalize_sorted_children_is_identity() {
        // children already in increasing-angle order around the parent
        let angles = [0.2f64, 2.0, 4.0];
        let cols: Vec<Vec<f64>> = angles.iter().map(|t| vec![t.cos(), t.sin()]).collect();
        let g = const_gen(&cols);
        let h = rollout(&g, &[0.0, 0.0], 0.5, 2, false).unwrap();
        let (canon, report) = canonicalize_children(&h).unwrap();
        assert!(!report.axis_fallback);
        // a permutation-free pass keeps the level arrays intact up to the
        // PCA frame's angle origin: check idempotence instead of raw equality
        let (canon2, _) = canonicalize_children(&canon).unwrap();
        assert_eq!(canon, canon2);
    }

    #[test]
    fn canonicalization_undoes_random_permutation() {
        let angles = [0.2f64, 2.0, 4.0];
        let cols: Vec<Vec<f64>> = angles.iter().map(|t| vec![t.cos(), t.sin()]).collect();
        let g = const_gen(&cols);
        let h = rollout(&g, &[0.0, 0.0], 0.5, 3, false).unwrap();
        let (canon_ref, _) = canonicalize_children(&h).unwrap();
        for seed in 0..5 {
            let mut rng = SeedStream::new(seed);
            let permuted = permute_children(&h, &mut rng);
            let (canon, _) = canonicalize_children(&permuted).unwrap();
            assert_eq!(canon, canon_ref, "seed {seed}");
        }
    }

    #[test]
    fn degenerate_pca_falls_back_to_axes() {
        // all centroids on a line: second eigenvalue is zero
        let h = Hierarchy {
            d: 2,
            k: 2,
            s: 1.0,
            root: vec![0.0, 0.0],
            levels: vec![
                vec![vec![0.0, 0.0]],
                vec![vec![1.0, 0.0], vec![2.0, 0.0]],
            ],
            generator_tag: "manual".into(),
        };
        let (_, report) = canonicalize_children(&h).unwrap();
        assert!(report.axis_fallback);
    }
}
