//! Uniform sampling on spheres and separated reference packings.

use crate::error::{Error, Result};
use crate::linalg::{dist_p, norm2, scale, Mat};
use crate::rng::SeedStream;
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// Uniform draw from the unit sphere S^{d-1}: a normalized Gaussian vector.
pub fn haar_sample<S: Scalar>(d: usize, rng: &mut SeedStream) -> Result<Vec<S>> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "haar_sample needs d >= 2, got {d}"
        )));
    }
    loop {
        let g: Vec<S> = (0..d).map(|_| S::of(rng.normal())).collect();
        let n = norm2(&g);
        if n > S::of(1e-30) {
            return Ok(scale(&g, S::one() / n));
        }
    }
}

/// Spherical-cap constant κ_d = Γ(d/2) / ((d-1) √π Γ((d-1)/2)).
pub fn kappa(d: usize) -> f64 {
    assert!(d >= 2);
    let ln = ln_gamma(d as f64 / 2.0) - ln_gamma((d as f64 - 1.0) / 2.0);
    ln.exp() / ((d as f64 - 1.0) * std::f64::consts::PI.sqrt())
}

/// Upper bound κ_d ε^{d-1} on the probability that a Haar draw lands within
/// distance ε of a fixed point on the sphere.
pub fn cap_probability_bound(d: usize, eps: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("d >= 2 required, got {d}")));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be in (0,1], got {eps}"
        )));
    }
    Ok(kappa(d) * eps.powi(d as i32 - 1))
}

/// Lower bound 1 - C(m,2) κ_d ε^{d-1} on the probability that m independent
/// Haar draws are pairwise ε-separated, clamped at 0.
pub fn pair_separation_bound(d: usize, m: usize, eps: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("m >= 2 required, got {m}")));
    }
    if eps == 0.0 {
        return Ok(1.0); // zero-radius cap
    }
    let pairs = (m * (m - 1) / 2) as f64;
    Ok((1.0 - pairs * cap_probability_bound(d, eps)?).max(0.0))
}

/// A d×K column matrix of annulus-bounded, pairwise-separated points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferencePacking<S> {
    pub columns: Mat<S>,
    pub lambda_minus: S,
    pub lambda_plus: S,
    pub epsilon: S,
}

impl<S: Scalar> ReferencePacking<S> {
    pub fn d(&self) -> usize {
        self.columns.rows
    }

    pub fn k(&self) -> usize {
        self.columns.cols
    }

    /// Assert the packing invariants: column norms in [λ-, λ+] and pairwise
    /// separation >= ε.
    pub fn validate(&self) -> Result<()> {
        let tol = S::of(1e-12);
        for k in 0..self.k() {
            let n = norm2(&self.columns.col(k));
            if n < self.lambda_minus - tol || n > self.lambda_plus + tol {
                return Err(Error::Validation(format!(
                    "column {k} norm {n} outside [{}, {}]",
                    self.lambda_minus, self.lambda_plus
                )));
            }
        }
        for i in 0..self.k() {
            for j in (i + 1)..self.k() {
                let d = dist_p(&self.columns.col(i), &self.columns.col(j), 2.0);
                if d < self.epsilon - tol {
                    return Err(Error::Validation(format!(
                        "columns {i},{j} at distance {d} < epsilon {}",
                        self.epsilon
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Rejection-sample K points on the radius-`lambda_radius` sphere with
/// pairwise distances >= eps * lambda_radius. Points are kept in draw order.
pub fn reference_packing<S: Scalar>(
    d: usize,
    k: usize,
    eps: f64,
    lambda_radius: f64,
    max_attempts: usize,
    rng: &mut SeedStream,
) -> Result<ReferencePacking<S>> {
    if k < 1 {
        return Err(Error::InvalidArgument("K >= 1 required".into()));
    }
    if eps <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let sep = S::of(eps * lambda_radius);
    let mut accepted: Vec<Vec<S>> = Vec::with_capacity(k);
    for attempt in 0..max_attempts {
        let cand = scale(&haar_sample::<S>(d, rng)?, S::of(lambda_radius));
        if accepted.iter().all(|a| dist_p(a, &cand, 2.0) >= sep) {
            accepted.push(cand);
            if accepted.len() == k {
                let packing = ReferencePacking {
                    columns: Mat::from_cols(&accepted),
                    lambda_minus: S::of(lambda_radius),
                    lambda_plus: S::of(lambda_radius),
                    epsilon: sep,
                };
                packing.validate()?;
                return Ok(packing);
            }
        }
        if attempt + 1 == max_attempts {
            break;
        }
    }
    Err(Error::PackingFailure {
        requested: k,
        accepted: accepted.len(),
        attempts: max_attempts,
    })
}

/// Default rejection budget; generous for all desk-scale configurations.
pub const DEFAULT_MAX_ATTEMPTS: usize = 100_000;
