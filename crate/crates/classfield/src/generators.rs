//! Refinement rules: the randomly parametrized neural generator family, the
//! IFS benchmark families, learned predictors, and the axiom checkers that
//! certify their geometric constants.

use crate::error::{Error, Result};
use crate::geom::{haar_sample, reference_packing, ReferencePacking};
use crate::learn::MlpParams;
use crate::linalg::{add, dist_p, expm_skew, norm2, scale, sub, Mat};
use crate::rng::SeedStream;
use crate::scalar::{sigmoid, Scalar};
use serde::{Deserialize, Serialize};

/// A refinement rule x ↦ d×K residual matrix r(x) = (r_1(x)|…|r_K(x)).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Generator<S> {
    /// r(x) ≡ C. Covers the constant baselines; `tag` records which.
    Constant { columns: Mat<S>, tag: String },
    /// Per-slot affine rule r(x)_k = A_k x + b_k.
    Affine {
        mats: Vec<Mat<S>>,
        offsets: Vec<Vec<S>>,
        tag: String,
    },
    PackedNeural(NeuralCfg<S>),
    Ifs(IfsFamily<S>),
    LearnedCfp(MlpParams<S>),
}

impl<S: Scalar> Generator<S> {
    pub fn d(&self) -> usize {
        match self {
            Generator::Constant { columns, .. } => columns.rows,
            Generator::Affine { mats, .. } => mats[0].rows,
            Generator::PackedNeural(g) => g.packing.d(),
            Generator::Ifs(f) => f.root.len(),
            Generator::LearnedCfp(m) => m.d,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Generator::Constant { columns, .. } => columns.cols,
            Generator::Affine { mats, .. } => mats.len(),
            Generator::PackedNeural(g) => g.packing.k(),
            Generator::Ifs(f) => f.maps.len(),
            Generator::LearnedCfp(m) => m.k,
        }
    }

    pub fn kind_tag(&self) -> String {
        match self {
            Generator::Constant { tag, .. } => tag.clone(),
            Generator::Affine { tag, .. } => tag.clone(),
            Generator::PackedNeural(_) => "packed-neural".into(),
            Generator::Ifs(f) => format!("ifs-{}", f.name),
            Generator::LearnedCfp(_) => "learned-cfp".into(),
        }
    }

    /// Evaluate the full residual matrix at x.
    pub fn residuals(&self, x: &[S]) -> Mat<S> {
        match self {
            Generator::Constant { columns, .. } => columns.clone(),
            Generator::Affine { mats, offsets, .. } => {
                let cols: Vec<Vec<S>> = mats
                    .iter()
                    .zip(offsets)
                    .map(|(a, b)| add(&a.matvec(x), b))
                    .collect();
                Mat::from_cols(&cols)
            }
            Generator::PackedNeural(g) => g.residuals(x),
            Generator::Ifs(f) => {
                let cols: Vec<Vec<S>> = f.maps.iter().map(|m| sub(&m.apply(x), x)).collect();
                Mat::from_cols(&cols)
            }
            Generator::LearnedCfp(m) => m.residual_matrix(x),
        }
    }

    pub fn residual_column(&self, x: &[S], k: usize) -> Vec<S> {
        self.residuals(x).col(k)
    }

    /// Certified radius of the root ball B(x0, λ_max): the annulus bound
    /// σ_max·λ+ for the neural family, 1 for IFS benchmarks, and a generic
    /// default of 1 otherwise.
    pub fn certified_lambda_max(&self) -> f64 {
        match self {
            Generator::PackedNeural(g) => g.sigma_max.f64() * g.packing.lambda_plus.f64(),
            _ => 1.0,
        }
    }

    /// Natural rollout scale: IFS families bake the contraction into the maps
    /// and run at s = 1; everything else has no intrinsic scale.
    /// Canonical rollout root: the stored root for IFS families, the origin
    /// otherwise.
    pub fn default_root(&self) -> Vec<S> {
        match self {
            Generator::Ifs(fam) => fam.root.clone(),
            _ => vec![S::zero(); self.d()],
        }
    }

    pub fn natural_scale(&self) -> Option<f64> {
        match self {
            Generator::Ifs(_) => Some(1.0),
            _ => None,
        }
    }
}

/// Neural generator r(x) = exp(S_1(x))·diag(σ(x))·exp(S_2(x))·C over a
/// reference template C, with skew fields read off gated sigmoid heads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeuralCfg<S> {
    pub packing: ReferencePacking<S>,
    pub nu: S,
    pub sigma_min: S,
    pub sigma_max: S,
    /// Residual-norm admissibility guard applied during rollout.
    pub lambda_chk: S,
    pub w1: Mat<S>,
    pub b1: Vec<S>,
    pub bb1: Mat<S>,
    pub w2: Mat<S>,
    pub b2: Vec<S>,
    pub bb2: Mat<S>,
    pub w_sig: Mat<S>,
    pub b_sig: Vec<S>,
    pub bb_sig: Mat<S>,
}

impl<S: Scalar> NeuralCfg<S> {
    fn head(w: &Mat<S>, b: &[S], bb: &Mat<S>, x: &[S]) -> Vec<S> {
        let hidden: Vec<S> = add(&w.matvec(x), b).iter().map(|v| v.tanh()).collect();
        bb.matvec(&hidden)
    }

    fn skew(&self, w: &Mat<S>, b: &[S], bb: &Mat<S>, x: &[S]) -> Mat<S> {
        let d = self.packing.d();
        let raw = Self::head(w, b, bb, x);
        // column-major reshape of the d² head output, then anti-symmetrize
        let atilde = Mat::from_fn(d, d, |i, j| self.nu * sigmoid(raw[i + j * d]));
        atilde.sub(&atilde.transpose()).scale(S::of(0.5))
    }

    pub fn sigma(&self, x: &[S]) -> Vec<S> {
        Self::head(&self.w_sig, &self.b_sig, &self.bb_sig, x)
            .iter()
            .map(|v| self.sigma_min + (self.sigma_max - self.sigma_min) * sigmoid(*v))
            .collect()
    }

    /// The two orthogonal factors exp(S_1(x)), exp(S_2(x)).
    pub fn orthogonal_factors(&self, x: &[S]) -> (Mat<S>, Mat<S>) {
        (
            expm_skew(&self.skew(&self.w1, &self.b1, &self.bb1, x)),
            expm_skew(&self.skew(&self.w2, &self.b2, &self.bb2, x)),
        )
    }

    pub fn residuals(&self, x: &[S]) -> Mat<S> {
        let (q1, q2) = self.orthogonal_factors(x);
        let sig = self.sigma(x);
        let d = self.packing.d();
        let mut mid = q2.matmul(&self.packing.columns);
        for i in 0..d {
            for j in 0..mid.cols {
                mid[(i, j)] = mid[(i, j)] * sig[i];
            }
        }
        // diag scaling applies on the left of exp(S_2)·C
        q1.matmul(&mid)
    }
}

/// Hyperparameters of the neural generator sampler.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeuralCfgConfig {
    pub nu: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub hidden: usize,
    pub template_radius: f64,
    pub lambda_chk: f64,
    /// Optional enforced template separation; `None` accepts plain sphere
    /// draws and records their measured separation.
    pub template_eps: Option<f64>,
}

impl Default for NeuralCfgConfig {
    fn default() -> Self {
        NeuralCfgConfig {
            nu: 3.25,
            sigma_min: 0.1,
            sigma_max: 1.0,
            hidden: 500,
            template_radius: 1.0,
            lambda_chk: 1.0,
            template_eps: None,
        }
    }
}

/// Sample a neural generator for trial `t`: the template uses seed 1000+t,
/// the network parameters seed 2000+t, all weight entries standard normal.
pub fn sample_neural_cfg<S: Scalar>(
    d: usize,
    k: usize,
    cfg: &NeuralCfgConfig,
    trial: u64,
) -> Result<Generator<S>> {
    let mut pack_rng = SeedStream::new(1000 + trial);
    let mut packing: ReferencePacking<S> = match cfg.template_eps {
        Some(eps) => reference_packing(d, k, eps, cfg.template_radius, 100_000, &mut pack_rng)?,
        None => {
            let cols: Vec<Vec<S>> = (0..k)
                .map(|_| {
                    Ok(scale(
                        &haar_sample::<S>(d, &mut pack_rng)?,
                        S::of(cfg.template_radius),
                    ))
                })
                .collect::<Result<_>>()?;
            let mut min_sep = f64::INFINITY;
            for i in 0..k {
                for j in (i + 1)..k {
                    min_sep = min_sep.min(dist_p(&cols[i], &cols[j], 2.0).f64());
                }
            }
            if !min_sep.is_finite() {
                min_sep = 2.0 * cfg.template_radius; // K = 1: no pair
            }
            ReferencePacking {
                columns: Mat::from_cols(&cols),
                lambda_minus: S::of(cfg.template_radius),
                lambda_plus: S::of(cfg.template_radius),
                epsilon: S::of(min_sep),
            }
        }
    };
    packing.validate()?;
    // keep the recorded separation tight: downstream separation certificates
    // use the measured value
    let mut measured = f64::INFINITY;
    for i in 0..k {
        for j in (i + 1)..k {
            measured = measured.min(dist_p(&packing.columns.col(i), &packing.columns.col(j), 2.0).f64());
        }
    }
    if measured.is_finite() {
        packing.epsilon = S::of(measured);
    }

    fn nmat<S: Scalar>(rng: &mut SeedStream, rows: usize, cols: usize) -> Mat<S> {
        Mat::from_fn(rows, cols, |_, _| S::of(rng.normal()))
    }
    fn nvec<S: Scalar>(rng: &mut SeedStream, n: usize) -> Vec<S> {
        (0..n).map(|_| S::of(rng.normal())).collect()
    }
    let mut rng = SeedStream::new(2000 + trial);
    let h = cfg.hidden;
    let w1 = nmat(&mut rng, h, d);
    let b1 = nvec(&mut rng, h);
    let bb1 = nmat(&mut rng, d * d, h);
    let w2 = nmat(&mut rng, h, d);
    let b2 = nvec(&mut rng, h);
    let bb2 = nmat(&mut rng, d * d, h);
    let w_sig = nmat(&mut rng, h, d);
    let b_sig = nvec(&mut rng, h);
    let bb_sig = nmat(&mut rng, d, h);

    Ok(Generator::PackedNeural(NeuralCfg {
        packing,
        nu: S::of(cfg.nu),
        sigma_min: S::of(cfg.sigma_min),
        sigma_max: S::of(cfg.sigma_max),
        lambda_chk: S::of(cfg.lambda_chk),
        w1,
        b1,
        bb1,
        w2,
        b2,
        bb2,
        w_sig,
        b_sig,
        bb_sig,
    }))
}

/// Result of probing the annulus and separation axioms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxiomReport {
    pub probes: usize,
    pub violations: Vec<String>,
    pub min_column_norm: f64,
    pub max_column_norm: f64,
    pub min_pair_separation: f64,
}

impl AxiomReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check that every probe satisfies the annulus bounds on column norms and
/// the pairwise column separation, against the supplied certified constants.
pub fn check_cfg_axioms<S: Scalar>(
    g: &Generator<S>,
    probes: &[Vec<S>],
    s_sep_expected: f64,
    lambda_min_expected: f64,
    lambda_max_expected: f64,
) -> AxiomReport {
    let tol = 1e-9;
    let k = g.k();
    let mut report = AxiomReport {
        probes: probes.len(),
        violations: Vec::new(),
        min_column_norm: f64::INFINITY,
        max_column_norm: 0.0,
        min_pair_separation: f64::INFINITY,
    };
    for (pi, x) in probes.iter().enumerate() {
        let r = g.residuals(x);
        let cols: Vec<Vec<S>> = (0..k).map(|c| r.col(c)).collect();
        for (ki, col) in cols.iter().enumerate() {
            let n = norm2(col).f64();
            report.min_column_norm = report.min_column_norm.min(n);
            report.max_column_norm = report.max_column_norm.max(n);
            if n < lambda_min_expected - tol || n > lambda_max_expected + tol {
                report.violations.push(format!(
                    "probe {pi} column {ki}: norm {n} outside [{lambda_min_expected}, {lambda_max_expected}]"
                ));
            }
        }
        for i in 0..k {
            for j in (i + 1)..k {
                let sep = dist_p(&cols[i], &cols[j], 2.0).f64();
                report.min_pair_separation = report.min_pair_separation.min(sep);
                if sep < s_sep_expected - tol {
                    report.violations.push(format!(
                        "probe {pi} columns {i},{j}: separation {sep} < {s_sep_expected}"
                    ));
                }
            }
        }
    }
    report
}

/// Uniform draw from the unit ball (Haar direction times a radius with the
/// correct density).
pub fn ball_sample<S: Scalar>(d: usize, rng: &mut SeedStream) -> Result<Vec<S>> {
    let dir = haar_sample::<S>(d, rng)?;
    let r = rng.uniform().powf(1.0 / d as f64);
    Ok(scale(&dir, S::of(r)))
}

/// Empirical Lipschitz constant: max over sampled pairs in the unit ball of
/// max_k ‖r_k(x) − r_k(x̃)‖ / ‖x − x̃‖.
pub fn lipschitz_probe<S: Scalar>(
    g: &Generator<S>,
    pairs: usize,
    rng: &mut SeedStream,
) -> Result<f64> {
    let d = g.d();
    let mut best = 0.0f64;
    for _ in 0..pairs {
        let x = ball_sample::<S>(d, rng)?;
        let y = ball_sample::<S>(d, rng)?;
        let denom = dist_p(&x, &y, 2.0).f64();
        if denom < 1e-9 {
            continue;
        }
        let rx = g.residuals(&x);
        let ry = g.residuals(&y);
        for k in 0..g.k() {
            let num = dist_p(&rx.col(k), &ry.col(k), 2.0).f64();
            best = best.max(num / denom);
        }
    }
    Ok(best)
}

/// Probe the factor maps of a neural generator separately and return the
/// composite Lipschitz bound λ+·(σ_max·L_Q1 + L_σ + σ_max·L_Q2), estimated
/// on the same pair set as `lipschitz_probe` would use with this stream.
pub fn neural_lipschitz_bound<S: Scalar>(
    g: &NeuralCfg<S>,
    pairs: usize,
    rng: &mut SeedStream,
) -> Result<f64> {
    let d = g.packing.d();
    let (mut l_q1, mut l_q2, mut l_sig) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..pairs {
        let x = ball_sample::<S>(d, rng)?;
        let y = ball_sample::<S>(d, rng)?;
        let denom = dist_p(&x, &y, 2.0).f64();
        if denom < 1e-9 {
            continue;
        }
        let (q1x, q2x) = g.orthogonal_factors(&x);
        let (q1y, q2y) = g.orthogonal_factors(&y);
        l_q1 = l_q1.max(q1x.sub(&q1y).spectral_norm().f64() / denom);
        l_q2 = l_q2.max(q2x.sub(&q2y).spectral_norm().f64() / denom);
        let ds = sub(&g.sigma(&x), &g.sigma(&y));
        let diag_norm = ds.iter().fold(S::zero(), |m, v| m.max(v.abs())).f64();
        l_sig = l_sig.max(diag_norm / denom);
    }
    let sm = g.sigma_max.f64();
    Ok(g.packing.lambda_plus.f64() * (sm * l_q1 + l_sig + sm * l_q2))
}

/// One child map of an iterated function system with a sinusoidal warp.
/// The quadratic term is an extension point; its coefficient is zero in all
/// reported configurations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IfsMap<S> {
    pub a: Mat<S>,
    pub b: Vec<S>,
    pub alpha: S,
    pub w1: Vec<S>,
    pub w2: Vec<S>,
    pub phi: S,
    pub quad: S,
}

impl<S: Scalar> IfsMap<S> {
    pub fn apply(&self, x: &[S]) -> Vec<S> {
        let mut y = add(&self.a.matvec(x), &self.b);
        if self.alpha != S::zero() {
            let p1 = crate::linalg::dot(&self.w1, x) + self.phi;
            let p2 = crate::linalg::dot(&self.w2, x) - S::of(0.37) * self.phi;
            y[0] = y[0] + self.alpha * p1.sin();
            y[1] = y[1] + self.alpha * p2.cos();
        }
        if self.quad != S::zero() {
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi = *yi + self.quad * *xi * *xi;
            }
        }
        y
    }

    /// Global Lipschitz certificate ‖A‖₂ + α·√(‖w1‖² + ‖w2‖²).
    pub fn lipschitz_certificate(&self) -> f64 {
        self.a.spectral_norm().f64()
            + self.alpha.f64() * (norm2(&self.w1).f64().powi(2) + norm2(&self.w2).f64().powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IfsFamily<S> {
    pub name: String,
    pub maps: Vec<IfsMap<S>>,
    pub root: Vec<S>,
    /// Fixed families are identical across trials; random ones resample.
    pub fixed: bool,
}

pub const IFS_NAMES: [&str; 8] = [
    "sierpinski",
    "cantor",
    "koch",
    "random-affine",
    "nl-sierpinski",
    "nl-cantor",
    "nl-koch",
    "nl-random",
];

fn rot2<S: Scalar>(theta: f64) -> Mat<S> {
    let (s, c) = theta.sin_cos();
    let mut m = Mat::zeros(2, 2);
    m[(0, 0)] = S::of(c);
    m[(0, 1)] = S::of(-s);
    m[(1, 0)] = S::of(s);
    m[(1, 1)] = S::of(c);
    m
}

fn scaled_identity<S: Scalar>(c: f64) -> Mat<S> {
    Mat::identity(2).scale(S::of(c))
}

/// Shared frequency schedule of the fixed nonlinear families, 0-based slot k.
fn warp_frequencies<S: Scalar>(k: usize) -> (Vec<S>, Vec<S>) {
    let kf = k as f64;
    (
        vec![S::of(3.00 + 0.30 * kf), S::of(2.10 - 0.20 * kf)],
        vec![S::of(-1.80 + 0.20 * kf), S::of(3.00 + 0.25 * kf)],
    )
}

fn affine_map<S: Scalar>(a: Mat<S>, b: Vec<S>) -> IfsMap<S> {
    IfsMap {
        a,
        b,
        alpha: S::zero(),
        w1: vec![S::zero(); 2],
        w2: vec![S::zero(); 2],
        phi: S::zero(),
        quad: S::zero(),
    }
}

fn warped_map<S: Scalar>(a: Mat<S>, b: Vec<S>, alpha: f64, k: usize, phase_step: f64) -> IfsMap<S> {
    let (w1, w2) = warp_frequencies(k);
    IfsMap {
        a,
        b,
        alpha: S::of(alpha),
        w1,
        w2,
        phi: S::of(phase_step * k as f64),
        quad: S::zero(),
    }
}

fn sierpinski_bases<S: Scalar>() -> (Vec<(Mat<S>, Vec<S>)>, Vec<S>) {
    let verts = [
        [0.0, 0.0],
        [1.0, 0.0],
        [0.5, 3.0f64.sqrt() / 2.0],
    ];
    let maps = verts
        .iter()
        .map(|v| {
            (
                scaled_identity(0.5),
                vec![S::of(v[0] / 2.0), S::of(v[1] / 2.0)],
            )
        })
        .collect();
    let root = vec![S::of(0.5), S::of(3.0f64.sqrt() / 6.0)];
    (maps, root)
}

fn cantor_bases<S: Scalar>() -> (Vec<(Mat<S>, Vec<S>)>, Vec<S>) {
    let offs = [[0.0, 0.0], [2.0 / 3.0, 0.0], [0.0, 2.0 / 3.0], [2.0 / 3.0, 2.0 / 3.0]];
    let maps = offs
        .iter()
        .map(|b| (scaled_identity(1.0 / 3.0), vec![S::of(b[0]), S::of(b[1])]))
        .collect();
    (maps, vec![S::of(0.5), S::of(0.5)])
}

fn koch_bases<S: Scalar>() -> (Vec<(Mat<S>, Vec<S>)>, Vec<S>) {
    let deg60 = std::f64::consts::PI / 3.0;
    let maps = vec![
        (scaled_identity(1.0 / 3.0), vec![S::zero(), S::zero()]),
        (
            rot2::<S>(deg60).scale(S::of(1.0 / 3.0)),
            vec![S::of(1.0 / 3.0), S::zero()],
        ),
        (
            rot2::<S>(-deg60).scale(S::of(1.0 / 3.0)),
            vec![S::of(0.5), S::of(3.0f64.sqrt() / 6.0)],
        ),
        (scaled_identity(1.0 / 3.0), vec![S::of(2.0 / 3.0), S::zero()]),
    ];
    (maps, vec![S::of(0.5), S::zero()])
}

/// Construct one of the eight benchmark families. Fixed families ignore the
/// stream; the random families draw from it (fork per trial for independence).
pub fn ifs_family<S: Scalar>(name: &str, rng: &mut SeedStream) -> Result<IfsFamily<S>> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let fam = match name {
        "sierpinski" => {
            let (bases, root) = sierpinski_bases::<S>();
            IfsFamily {
                name: name.into(),
                maps: bases.into_iter().map(|(a, b)| affine_map(a, b)).collect(),
                root,
                fixed: true,
            }
        }
        "cantor" => {
            let (bases, root) = cantor_bases::<S>();
            IfsFamily {
                name: name.into(),
                maps: bases.into_iter().map(|(a, b)| affine_map(a, b)).collect(),
                root,
                fixed: true,
            }
        }
        "koch" => {
            let (bases, root) = koch_bases::<S>();
            IfsFamily {
                name: name.into(),
                maps: bases.into_iter().map(|(a, b)| affine_map(a, b)).collect(),
                root,
                fixed: true,
            }
        }
        "random-affine" => {
            let maps = (0..3)
                .map(|_| {
                    let c = rng.uniform_in(0.2, 0.45);
                    let theta = rng.uniform_in(0.0, two_pi);
                    let b = vec![
                        S::of(rng.uniform_in(-0.5, 0.5)),
                        S::of(rng.uniform_in(-0.5, 0.5)),
                    ];
                    affine_map(rot2::<S>(theta).scale(S::of(c)), b)
                })
                .collect();
            IfsFamily {
                name: name.into(),
                maps,
                root: vec![S::zero(); 2],
                fixed: false,
            }
        }
        "nl-sierpinski" => {
            let (bases, root) = sierpinski_bases::<S>();
            IfsFamily {
                name: name.into(),
                maps: bases
                    .into_iter()
                    .enumerate()
                    .map(|(k, (a, b))| warped_map(a, b, 0.080, k, 0.80))
                    .collect(),
                root,
                fixed: true,
            }
        }
        "nl-cantor" => {
            let (bases, root) = cantor_bases::<S>();
            IfsFamily {
                name: name.into(),
                maps: bases
                    .into_iter()
                    .enumerate()
                    .map(|(k, (a, b))| warped_map(a, b, 0.080, k, 0.60))
                    .collect(),
                root,
                fixed: true,
            }
        }
        "nl-koch" => {
            let (bases, root) = koch_bases::<S>();
            IfsFamily {
                name: name.into(),
                maps: bases
                    .into_iter()
                    .enumerate()
                    .map(|(k, (a, b))| warped_map(a, b, 0.080, k, 0.70))
                    .collect(),
                root,
                fixed: true,
            }
        }
        "nl-random" => {
            let maps = (0..3)
                .map(|_| {
                    let c = rng.uniform_in(0.20, 0.38);
                    let theta = rng.uniform_in(0.0, two_pi);
                    let b = vec![
                        S::of(rng.uniform_in(-0.45, 0.45)),
                        S::of(rng.uniform_in(-0.45, 0.45)),
                    ];
                    let mut dir = |scale_lo: f64, scale_hi: f64| -> Result<Vec<S>> {
                        let u = haar_sample::<S>(2, rng)?;
                        Ok(scale(&u, S::of(rng.uniform_in(scale_lo, scale_hi))))
                    };
                    let w1 = dir(2.5, 3.5)?;
                    let w2 = dir(2.5, 3.5)?;
                    let phi = rng.uniform_in(0.0, two_pi);
                    let alpha = rng.uniform_in(0.055, 0.085);
                    Ok(IfsMap {
                        a: rot2::<S>(theta).scale(S::of(c)),
                        b,
                        alpha: S::of(alpha),
                        w1,
                        w2,
                        phi: S::of(phi),
                        quad: S::zero(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            IfsFamily {
                name: name.into(),
                maps,
                root: vec![S::zero(); 2],
                fixed: false,
            }
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown IFS family '{other}'"
            )))
        }
    };
    Ok(fam)
}

/// Per-map Lipschitz certificates; errors if any map fails contractivity.
pub fn contractivity_certificate<S: Scalar>(fam: &IfsFamily<S>) -> Result<Vec<f64>> {
    let ls: Vec<f64> = fam.maps.iter().map(|m| m.lipschitz_certificate()).collect();
    for (k, l) in ls.iter().enumerate() {
        if *l >= 1.0 {
            return Err(Error::Validation(format!(
                "map {k} of family {} is not contractive: L = {l}",
                fam.name
            )));
        }
    }
    Ok(ls)
}

/// View an IFS family as a residual rule r(x)_k = f_k(x) − x (rollout at s=1).
pub fn ifs_as_generator<S: Scalar>(fam: IfsFamily<S>) -> Generator<S> {
    Generator::Ifs(fam)
}
