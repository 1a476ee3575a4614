//! Nuclear-norm matrix completion by fixed-point continuation.
//!
//! Each iteration takes a gradient step on the data-fit term and then
//! soft-thresholds the singular values:
//!
//! ```text
//! Y = M − Δ·P*(P(M) − M^E)
//! M ← S_{τΔ}(Y)
//! ```
//!
//! `τ` starts near the spectral norm of the observations and decays
//! geometrically down to a floor. Within a stage the iteration stops
//! once the relative change drops below `β`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::{PartialSpectrumMatrix, SpectrumMatrix};

/// Matrices with both sides at or above this use the truncated SVD.
pub const FULL_SVD_LIMIT: usize = 512;

/// RSE reported for an exact recovery.
pub const RSE_FLOOR_DB: f64 = -300.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpcaConfig {
    /// `τ₁` as a fraction of the spectral norm of the zero-filled observations.
    pub tau_initial_factor: f64,
    /// Ratio `τ_{s+1} / τ_s`.
    pub tau_decay: f64,
    /// Final `τ` as a fraction of `τ₁`.
    pub tau_floor_factor: f64,
    /// Absolute lower bound on the final `τ`; the larger floor applies.
    pub tau_floor_abs: Option<f64>,
    /// Gradient step `Δ`.
    pub step_delta: f64,
    /// Relative-change stopping threshold `β`.
    pub stop_beta: f64,
    /// Rank cap for the truncated SVD; `None` means a quarter of the
    /// smaller dimension.
    pub max_rank: Option<usize>,
    pub max_iters_per_stage: usize,
}

impl Default for FpcaConfig {
    fn default() -> Self {
        FpcaConfig {
            tau_initial_factor: 0.99,
            tau_decay: 0.25,
            tau_floor_factor: 1e-8,
            tau_floor_abs: None,
            step_delta: 1.0,
            stop_beta: 1e-6,
            max_rank: None,
            max_iters_per_stage: 1000,
        }
    }
}

impl FpcaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_decay > 0.0 && self.tau_decay < 1.0) {
            return Err(Error::domain(format!("tau_decay must be in (0, 1), got {}", self.tau_decay)));
        }
        if !(self.step_delta > 0.0 && self.step_delta < 2.0) {
            return Err(Error::domain(format!("step_delta must be in (0, 2), got {}", self.step_delta)));
        }
        if !(self.stop_beta > 0.0) {
            return Err(Error::domain("stop_beta must be positive"));
        }
        if !(self.tau_initial_factor > 0.0 && self.tau_floor_factor > 0.0 && self.tau_floor_factor <= 1.0) {
            return Err(Error::domain("tau factors must be positive and the floor at most 1"));
        }
        if self.tau_floor_abs.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::domain("absolute tau floor must be positive and finite"));
        }
        if self.max_iters_per_stage == 0 || self.max_rank == Some(0) {
            return Err(Error::domain("iteration and rank limits must be positive"));
        }
        Ok(())
    }
}

/// Thin singular value decomposition `M ≈ U·diag(σ)·Vᵀ`, singular
/// values in non-increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    pub fn full(m: &DMatrix<f64>) -> Result<Self> {
        let svd = m.clone().svd(true, true);
        let (Some(u), Some(vt)) = (svd.u, svd.v_t) else {
            return Err(Error::domain("SVD did not produce singular vectors"));
        };
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let u = DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
        let v = DMatrix::from_fn(vt.ncols(), order.len(), |i, j| vt[(order[j], i)]);
        let sigma = DVector::from_iterator(order.len(), order.iter().map(|&k| svd.singular_values[k]));
        Ok(Svd { u, sigma, v })
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `U·diag(f(σ))·Vᵀ`, skipping components that map to zero.
    pub fn recompose_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.u.nrows(), self.v.nrows());
        for k in 0..self.rank() {
            let s = f(self.sigma[k]);
            if s != 0.0 {
                out.ger(s, &self.u.column(k), &self.v.column(k), 1.0);
            }
        }
        out
    }

    pub fn recompose(&self) -> DMatrix<f64> {
        self.recompose_with(|s| s)
    }
}

/// Soft-thresholds every singular value of `m` by `nu`.
pub fn shrink(m: &DMatrix<f64>, nu: f64) -> Result<DMatrix<f64>> {
    if !(nu >= 0.0) {
        return Err(Error::domain(format!("shrinkage amount must be non-negative, got {nu}")));
    }
    Ok(Svd::full(m)?.recompose_with(|s| (s - nu).max(0.0)))
}

pub fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().sum()
}

fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    let (p, q) = m.shape();
    if p.min(q) >= FULL_SVD_LIMIT {
        Ok(truncated_svd(m, 1)?.sigma[0])
    } else {
        Ok(m.singular_values().max())
    }
}

const SUBSPACE_SEED: u64 = 0x7153_5644;
const SUBSPACE_OVERSAMPLE: usize = 8;
const SUBSPACE_MAX_ITERS: usize = 300;

/// Top-`r` singular triplets by block subspace iteration from a fixed
/// Gaussian start, finished with a Rayleigh–Ritz step.
pub fn truncated_svd(m: &DMatrix<f64>, r: usize) -> Result<Svd> {
    let (p, q) = m.shape();
    let n = p.min(q);
    if r == 0 || r > n {
        return Err(Error::domain(format!("rank {r} outside 1..={n}")));
    }
    let k = (r + SUBSPACE_OVERSAMPLE).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(SUBSPACE_SEED);
    let omega = DMatrix::<f64>::from_fn(q, k, |_, _| StandardNormal.sample(&mut rng));
    let mut basis = (m * omega).qr().q();
    let mut prev: Option<DVector<f64>> = None;
    for _ in 0..SUBSPACE_MAX_ITERS {
        let right = (m.transpose() * &basis).qr().q();
        basis = (m * right).qr().q();
        let sv = (basis.transpose() * m).singular_values();
        let top = sv.max().max(f64::MIN_POSITIVE);
        let done = prev
            .as_ref()
            .is_some_and(|p| p.iter().zip(sv.iter()).take(r).all(|(a, b)| (a - b).abs() <= 1e-13 * top));
        prev = Some(sv);
        if done || k == n {
            break;
        }
    }
    let small = Svd::full(&(basis.transpose() * m))?;
    Ok(Svd {
        u: (&basis * small.u.columns(0, r)).into_owned(),
        sigma: small.sigma.rows(0, r).into_owned(),
        v: small.v.columns(0, r).into_owned(),
    })
}

fn shrink_with_cap(m: &DMatrix<f64>, nu: f64, cap: Option<usize>) -> Result<DMatrix<f64>> {
    match cap {
        Some(r) => Ok(truncated_svd(m, r)?.recompose_with(|s| (s - nu).max(0.0))),
        None => shrink(m, nu),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub matrix: SpectrumMatrix,
    /// False when any stage hit the iteration limit.
    pub converged: bool,
    pub iterations: usize,
    /// `τ_s‖M_s‖_* + ½‖P(M_s) − M^E‖²_F` at the end of each stage.
    pub stage_objectives: Vec<f64>,
    pub final_tau: f64,
}

/// Completes `obs` by fixed-point continuation. Unknown entries start
/// at the mean of the known ones.
pub fn fpca_complete(obs: &PartialSpectrumMatrix, cfg: &FpcaConfig) -> Result<Completion> {
    cfg.validate()?;
    let known_count = obs.known_count();
    if known_count == 0 {
        return Err(Error::EmptyMask);
    }
    let (p, q) = obs.shape();
    let cap = (p.min(q) >= FULL_SVD_LIMIT).then(|| cfg.max_rank.unwrap_or(p.min(q) / 4).clamp(1, p.min(q)));
    let observed = DMatrix::from_fn(p, q, |i, j| if obs.known[(i, j)] { obs.values[(i, j)] } else { 0.0 });
    let mean = observed.sum() / known_count as f64;
    let mut m = DMatrix::from_fn(p, q, |i, j| if obs.known[(i, j)] { obs.values[(i, j)] } else { mean });

    let tau_1 = cfg.tau_initial_factor * spectral_norm(&observed)?;
    let floor = (cfg.tau_floor_factor * tau_1).max(cfg.tau_floor_abs.unwrap_or(0.0)).min(tau_1);
    let delta = cfg.step_delta;
    let mut tau = tau_1;
    let mut converged = true;
    let mut iterations = 0;
    let mut stage_objectives = Vec::new();
    loop {
        let mut stage_done = false;
        for _ in 0..cfg.max_iters_per_stage {
            let mut y = m.clone();
            for ((yv, &k), &o) in y.iter_mut().zip(obs.known.iter()).zip(observed.iter()) {
                if k {
                    *yv -= delta * (*yv - o);
                }
            }
            let next = shrink_with_cap(&y, tau * delta, cap)?;
            let change = (&next - &m).norm() / m.norm().max(1.0);
            m = next;
            iterations += 1;
            if change <= cfg.stop_beta {
                stage_done = true;
                break;
            }
        }
        if !stage_done {
            converged = false;
            log::warn!("completion stage at tau {tau:.3e} stopped at the iteration limit");
        }
        stage_objectives.push(objective(&m, &observed, &obs.known, tau));
        if tau <= floor {
            break;
        }
        tau = (tau * cfg.tau_decay).max(floor);
    }
    Ok(Completion {
        matrix: SpectrumMatrix::new(m),
        converged,
        iterations,
        stage_objectives,
        final_tau: tau,
    })
}

fn objective(m: &DMatrix<f64>, observed: &DMatrix<f64>, known: &DMatrix<bool>, tau: f64) -> f64 {
    let fit: f64 = m
        .iter()
        .zip(observed.iter())
        .zip(known.iter())
        .filter(|(_, &k)| k)
        .map(|((a, b), _)| (a - b).powi(2))
        .sum();
    tau * nuclear_norm(m) + 0.5 * fit
}

/// Recovery error `10·log10(‖M̃ − G‖_F / ‖G‖_F)` in dB.
pub fn rse_db(recovered: &SpectrumMatrix, truth: &SpectrumMatrix) -> Result<f64> {
    if recovered.shape() != truth.shape() {
        return Err(Error::Dimension {
            expected: truth.shape(),
            got: recovered.shape(),
        });
    }
    let denom = truth.values.norm();
    if denom == 0.0 {
        return Err(Error::domain("truth matrix has zero norm"));
    }
    let num = (&recovered.values - &truth.values).norm();
    if num == 0.0 {
        return Ok(RSE_FLOOR_DB);
    }
    Ok((10.0 * (num / denom).log10()).max(RSE_FLOOR_DB))
}
