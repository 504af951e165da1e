//! Solvers: the online sparse/low-rank separation step, the standalone
//! multi-prior sparse recovery solver and the batch bootstrap.

mod corpca;
mod pcp;
mod ramsia;

pub use corpca::{corpca_step, solve_instance, Background, StepOutput};
pub use pcp::{batch_pcp, bootstrap_prior, PcpConfig, PcpResult};
pub use ramsia::ramsia_solve;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::linalg::{spectral_norm, spectral_norm_power, thin_svd, ThinSvd};

/// Linear sensing operator `Φ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Sensing {
    /// `Φ = I_n` (full observation).
    Identity(usize),
    Dense(DMatrix<f64>),
}

impl Sensing {
    pub fn rows(&self) -> usize {
        match self {
            Sensing::Identity(n) => *n,
            Sensing::Dense(m) => m.nrows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Sensing::Identity(n) => *n,
            Sensing::Dense(m) => m.ncols(),
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Sensing::Identity(_) => x.clone(),
            Sensing::Dense(m) => m * x,
        }
    }

    pub fn apply_t(&self, r: &DVector<f64>) -> DVector<f64> {
        match self {
            Sensing::Identity(_) => r.clone(),
            Sensing::Dense(m) => m.tr_mul(r),
        }
    }

    /// `σ_max(Φ)`. Large dense operators use a power-iteration estimate
    /// inflated by 1% so that step sizes derived from it stay safe.
    pub fn spectral_norm(&self) -> f64 {
        match self {
            Sensing::Identity(_) => 1.0,
            Sensing::Dense(m) if m.nrows().min(m.ncols()) <= 600 => spectral_norm(m),
            Sensing::Dense(m) => {
                1.01 * spectral_norm_power(|x| m * x, |y| m.tr_mul(y), m.ncols(), 100)
            }
        }
    }
}

/// A sensing operator and the measurement vector it produced.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    pub phi: Sensing,
    pub y: DVector<f64>,
}

impl MeasurementModel {
    pub fn new(phi: Sensing, y: DVector<f64>) -> Result<Self> {
        if y.len() != phi.rows() {
            return Err(invalid(format!(
                "measurement vector has length {}, Φ has {} rows",
                y.len(),
                phi.rows()
            )));
        }
        if phi.rows() > phi.cols() {
            return Err(invalid(format!(
                "Φ must have m <= n, got {}x{}",
                phi.rows(),
                phi.cols()
            )));
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(invalid("measurement vector contains non-finite entries"));
        }
        Ok(MeasurementModel { phi, y })
    }

    /// Measures `x + v`.
    pub fn observe(phi: Sensing, x: &DVector<f64>, v: &DVector<f64>) -> Result<Self> {
        if x.len() != phi.cols() || v.len() != phi.cols() {
            return Err(invalid("signal length does not match Φ"));
        }
        let y = phi.apply(&(x + v));
        Self::new(phi, y)
    }

    pub fn m(&self) -> usize {
        self.phi.rows()
    }

    pub fn n(&self) -> usize {
        self.phi.cols()
    }

    /// `Φᵀ(Φp − y)`, the gradient of `½‖Φp − y‖²` with respect to either
    /// component of `p = x + v`.
    pub fn gradient(&self, p: &DVector<f64>) -> DVector<f64> {
        let r = self.phi.apply(p) - &self.y;
        self.phi.apply_t(&r)
    }

    /// `½‖Φp − y‖²`.
    pub fn data_fit(&self, p: &DVector<f64>) -> f64 {
        0.5 * (self.phi.apply(p) - &self.y).norm_squared()
    }
}

/// How the continuation parameter starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuInit {
    /// `μ_0 = 0`, so that `μ_k = μ̄` for every `k ≥ 1`.
    Literal,
    /// `μ_0 = scale · ‖Φᵀy‖_∞ / λ`, decreased geometrically by `ε` down to `μ̄`.
    Warm { scale: f64 },
}

/// Gradient step in front of `∇f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `1 / (2 σ_max(Φ)²)`.
    Spectral,
    /// The constant `½`.
    Literal,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Weight `λ` of the sparse penalty.
    pub lambda: f64,
    /// Continuation factor and weight smoothing `ε ∈ (0, 1)`.
    pub epsilon: f64,
    /// Continuation floor `μ̄`.
    pub mu_bar: f64,
    pub mu_init: MuInit,
    pub step: StepRule,
    /// Relative squared-subgradient tolerance of the stopping rule.
    pub tol: f64,
    /// Stopping also needs `‖Δ(x, v)‖² ≤ step_tol · ‖(x, v)‖²` for the last
    /// step. Momentum carries a step of that size into the next iteration.
    pub step_tol: f64,
    /// Reset the momentum whenever the last step points against the
    /// gradient-mapping direction.
    pub restart: bool,
    pub max_iter: usize,
    /// Recompute `W_j`, `β_j` every iteration. Disabled for the plain ℓ1
    /// and ℓ1-ℓ1 baselines, which keep their weights frozen.
    pub reweight: bool,
}

impl SolverConfig {
    /// Settings used for the synthetic experiments: `ε = 0.8`, `λ = 1/√n`.
    ///
    /// The stopping tolerance is tight: with `N(0, 1/m)` sensing the split
    /// between `x` and `v` is decided by the small penalty terms alone, and
    /// a looser value such as `2e-7` stops before that split has settled.
    pub fn for_dimension(n: usize) -> Self {
        SolverConfig {
            lambda: 1.0 / (n as f64).sqrt(),
            epsilon: 0.8,
            mu_bar: 0.1,
            mu_init: MuInit::Warm { scale: 0.99 },
            step: StepRule::Spectral,
            tol: 1e-9,
            step_tol: 1e-12,
            restart: true,
            max_iter: 2000,
            reweight: true,
        }
    }

    /// One-line `key:value` rendering for output headers.
    pub fn describe(&self) -> String {
        let mu0 = match self.mu_init {
            MuInit::Literal => "zero".to_string(),
            MuInit::Warm { scale } => format!("warm({scale})"),
        };
        let step = match self.step {
            StepRule::Spectral => "spectral".to_string(),
            StepRule::Literal => "half".to_string(),
            StepRule::Fixed(s) => format!("fixed({s})"),
        };
        format!(
            "lambda:{} epsilon:{} mu_bar:{} mu0:{mu0} step:{step} tol:{} step_tol:{} restart:{} max_iter:{} reweight:{}",
            self.lambda, self.epsilon, self.mu_bar, self.tol, self.step_tol, self.restart, self.max_iter, self.reweight
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(invalid(format!("λ must be > 0, got {}", self.lambda)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid(format!("ε must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(self.mu_bar > 0.0) {
            return Err(invalid(format!("μ̄ must be > 0, got {}", self.mu_bar)));
        }
        if let MuInit::Warm { scale } = self.mu_init {
            if !(scale > 0.0) {
                return Err(invalid("warm μ scale must be > 0"));
            }
        }
        if let StepRule::Fixed(s) = self.step {
            if !(s > 0.0) {
                return Err(invalid("fixed step must be > 0"));
            }
        }
        if !(self.tol >= 0.0) || !(self.step_tol >= 0.0) || self.max_iter == 0 {
            return Err(invalid("tolerance must be >= 0 and max_iter positive"));
        }
        Ok(())
    }

    pub(crate) fn step_size(&self, phi: &Sensing) -> f64 {
        match self.step {
            StepRule::Spectral => {
                let s = phi.spectral_norm();
                0.5 / (s * s).max(f64::MIN_POSITIVE)
            }
            StepRule::Literal => 0.5,
            StepRule::Fixed(s) => s,
        }
    }

    pub(crate) fn initial_mu(&self, meas: &MeasurementModel) -> f64 {
        match self.mu_init {
            MuInit::Literal => self.mu_bar,
            MuInit::Warm { scale } => {
                let top = meas.phi.apply_t(&meas.y).amax();
                (scale * top / self.lambda).max(self.mu_bar)
            }
        }
    }
}

/// Per-instance solver output.
#[derive(Debug, Clone)]
pub struct SeparationResult {
    pub x_hat: DVector<f64>,
    pub v_hat: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value at the returned point, with the final weights and
    /// `μ`.
    pub objective: f64,
}

/// Low-rank prior `B` (`n × d`) with a compact SVD of it.
#[derive(Debug, Clone)]
pub struct LowRankPrior {
    pub b: DMatrix<f64>,
    pub svd: ThinSvd,
    pub d: usize,
}

impl LowRankPrior {
    /// Factors `b`, keeping only its nonzero singular triplets.
    pub fn from_matrix(b: DMatrix<f64>) -> Result<Self> {
        let d = b.ncols();
        let svd = if d == 0 {
            ThinSvd::empty(b.nrows())
        } else {
            thin_svd(&b)?.compact(1e-13)
        };
        Ok(LowRankPrior { b, svd, d })
    }

    /// An `n × d` prior built as `U diag(s)` (zero-padded to `d` columns).
    ///
    /// `‖[B v]‖_*` depends on `B` only through `BBᵀ`, so this has the same
    /// nuclear-norm behaviour as any `B` with these left factors and
    /// singular values.
    pub fn from_factors(u: DMatrix<f64>, s: DVector<f64>, d: usize) -> Self {
        let n = u.nrows();
        let k = s.len().min(d);
        let mut b = DMatrix::zeros(n, d);
        for j in 0..k {
            b.column_mut(j).copy_from(&(u.column(j) * s[j]));
        }
        let mut v = DMatrix::zeros(d, k);
        for j in 0..k {
            v[(j, j)] = 1.0;
        }
        LowRankPrior {
            b,
            svd: ThinSvd {
                u: u.columns(0, k).into_owned(),
                s: s.rows(0, k).into_owned(),
                v,
            },
            d,
        }
    }

    pub fn n(&self) -> usize {
        self.b.nrows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measurement_dimension_checks() {
        let phi = Sensing::Dense(DMatrix::zeros(3, 5));
        assert!(MeasurementModel::new(phi.clone(), DVector::zeros(4)).is_err());
        assert!(MeasurementModel::new(Sensing::Dense(DMatrix::zeros(6, 5)), DVector::zeros(6)).is_err());
        assert!(MeasurementModel::new(phi, DVector::zeros(3)).is_ok());
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::for_dimension(100);
        assert!((cfg.lambda - 0.1).abs() < 1e-15);
        cfg.validate().unwrap();
        cfg.epsilon = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn factor_prior_reconstructs() {
        let u = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let s = DVector::from_column_slice(&[2.0, 1.0]);
        let prior = LowRankPrior::from_factors(u, s, 4);
        assert_eq!(prior.b.ncols(), 4);
        assert!((prior.svd.reconstruct() - &prior.b).amax() < 1e-15);
    }
}
