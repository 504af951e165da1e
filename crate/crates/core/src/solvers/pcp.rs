use nalgebra::DMatrix;

use super::LowRankPrior;
use crate::error::{invalid, CorpcaError, Result};
use crate::linalg::thin_svd;
use crate::prox::{soft_scalar, SideInfoSet};

/// Settings for the batch low-rank + sparse decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct PcpConfig {
    /// Sparse weight; `None` selects `1/√max(n, T)`.
    pub lambda: Option<f64>,
    /// Stationarity tolerance of the stopping rule.
    pub tol: f64,
    /// Required `‖M − L − S‖_F / ‖M‖_F` before stopping.
    pub residual_tol: f64,
    pub max_iter: usize,
    /// Continuation factor for `μ`.
    pub eta: f64,
    /// `μ̄ = floor_ratio · μ_0`.
    pub floor_ratio: f64,
}

impl Default for PcpConfig {
    fn default() -> Self {
        PcpConfig {
            lambda: None,
            tol: 1e-7,
            residual_tol: 1e-6,
            max_iter: 2000,
            eta: 0.9,
            floor_ratio: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PcpResult {
    pub low_rank: DMatrix<f64>,
    pub sparse: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl PcpResult {
    pub fn relative_residual(&self, m: &DMatrix<f64>) -> f64 {
        (m - &self.low_rank - &self.sparse).norm() / m.norm().max(f64::MIN_POSITIVE)
    }
}

/// Accelerated proximal gradient for
/// `min μ‖L‖_* + μλ‖S‖₁ + ½‖M − L − S‖²_F` with `μ` decreased
/// geometrically towards a small floor.
pub fn batch_pcp(m: &DMatrix<f64>, cfg: &PcpConfig) -> Result<PcpResult> {
    let (n, t) = m.shape();
    if n == 0 || t == 0 {
        return Err(invalid("batch_pcp needs a non-empty matrix"));
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(invalid("batch_pcp input contains non-finite entries"));
    }
    let lambda = cfg.lambda.unwrap_or(1.0 / (n.max(t) as f64).sqrt());
    if !(lambda > 0.0) {
        return Err(invalid(format!("λ must be > 0, got {lambda}")));
    }
    let m_norm = m.norm();
    if m_norm == 0.0 {
        return Ok(PcpResult {
            low_rank: DMatrix::zeros(n, t),
            sparse: DMatrix::zeros(n, t),
            iterations: 0,
            converged: true,
        });
    }

    // Lipschitz constant of the joint gradient is 2
    let lf = 2.0;
    let mut mu = 0.99 * thin_svd(m)?.s[0];
    let mu_bar = cfg.floor_ratio * mu;

    let mut l = DMatrix::zeros(n, t);
    let mut s = DMatrix::zeros(n, t);
    let mut l_prev = l.clone();
    let mut s_prev = s.clone();
    let mut tk = 1.0f64;
    let mut tk_prev = 1.0f64;

    for k in 0..cfg.max_iter {
        let momentum = (tk_prev - 1.0) / tk;
        let yl = &l + (&l - &l_prev) * momentum;
        let ys = &s + (&s - &s_prev) * momentum;
        let grad = (&yl + &ys - m) / lf;

        let gl = &yl - &grad;
        let l_next = thin_svd(&gl)?.shrink(mu / lf).reconstruct();
        let gs = &ys - &grad;
        let tau = lambda * mu / lf;
        let s_next = gs.map(|v| soft_scalar(v, tau));

        if !l_next.iter().chain(s_next.iter()).all(|v| v.is_finite()) {
            return Err(CorpcaError::Divergence {
                iteration: k,
                detail: "non-finite batch iterate".into(),
            });
        }

        // subgradient of the objective at the new point
        let coupling = &l_next + &s_next - &yl - &ys;
        let sub_l = (&yl - &l_next) * lf + &coupling;
        let sub_s = (&ys - &s_next) * lf + &coupling;
        let stationarity = (sub_l.norm_squared() + sub_s.norm_squared()).sqrt();
        let scale = (l_next.norm_squared() + s_next.norm_squared()).sqrt().max(1.0);
        let residual = (m - &l_next - &s_next).norm() / m_norm;

        l_prev = std::mem::replace(&mut l, l_next);
        s_prev = std::mem::replace(&mut s, s_next);
        let tk_next = (1.0 + (1.0 + 4.0 * tk * tk).sqrt()) / 2.0;
        tk_prev = tk;
        tk = tk_next;

        if mu == mu_bar && stationarity < cfg.tol * lf * scale && residual <= cfg.residual_tol {
            return Ok(PcpResult {
                low_rank: l,
                sparse: s,
                iterations: k + 1,
                converged: true,
            });
        }
        mu = (cfg.eta * mu).max(mu_bar);
    }
    Ok(PcpResult {
        low_rank: l,
        sparse: s,
        iterations: cfg.max_iter,
        converged: false,
    })
}

/// Separates the training columns and turns the result into initial priors:
/// `B_0` is the recovered low-rank part and `Z_0` holds `j` zero vectors.
pub fn bootstrap_prior(
    training: &DMatrix<f64>,
    cfg: &PcpConfig,
    j: usize,
) -> Result<(LowRankPrior, SideInfoSet)> {
    let n = training.nrows();
    if training.ncols() == 0 {
        return Err(invalid("bootstrap needs at least one training column"));
    }
    let pcp = batch_pcp(training, cfg)?;
    let prior = LowRankPrior::from_matrix(pcp.low_rank)?;
    Ok((prior, SideInfoSet::zeros(n, j)))
}
