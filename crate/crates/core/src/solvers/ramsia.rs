use nalgebra::DVector;

use super::corpca::sparse_subgradient_sq;
use super::{MeasurementModel, MuInit, Sensing, SolverConfig};
use crate::error::{invalid, CorpcaError, Result};
use crate::prox::{prox_nl1_unchecked, reweight_in_place, SideInfoSet};

/// Multi-prior sparse recovery: FISTA on `½‖Φx − y‖²` with the weighted
/// n-ℓ1 proximal map and per-iteration weight updates.
///
/// With `J = 0` and frozen weights this is plain ℓ1 recovery; with one
/// prior, unit weights and `β = (½, ½)` frozen it is ℓ1-ℓ1 recovery. The
/// continuation schedule is the same as the online solver's.
pub fn ramsia_solve(
    y: &DVector<f64>,
    phi: &Sensing,
    si: &SideInfoSet,
    cfg: &SolverConfig,
) -> Result<DVector<f64>> {
    cfg.validate()?;
    si.validate()?;
    let meas = MeasurementModel::new(phi.clone(), y.clone())?;
    let n = meas.n();
    if si.dim() != n {
        return Err(invalid("side information length does not match Φ"));
    }
    let step = cfg.step_size(phi);
    let mut mu = match cfg.mu_init {
        MuInit::Literal => 0.0,
        MuInit::Warm { .. } => cfg.initial_mu(&meas),
    };

    let mut weights = si.clone();
    let mut x = DVector::zeros(n);
    let mut x_prev = DVector::zeros(n);
    let mut t = 1.0f64;
    let mut t_prev = 1.0f64;
    let mut grad = meas.gradient(&x);
    let mut grad_prev = grad.clone();

    for k in 0..cfg.max_iter {
        let momentum = (t_prev - 1.0) / t;
        let x_ex = &x + (&x - &x_prev) * momentum;
        let grad_ex = &grad * (1.0 + momentum) - &grad_prev * momentum;
        let x_next = prox_nl1_unchecked(&(&x_ex - &grad_ex * step), &weights, mu * step * cfg.lambda);
        if cfg.reweight {
            reweight_in_place(&x_next, &mut weights, cfg.epsilon);
        }
        let grad_next = meas.gradient(&x_next);
        if !grad_next.iter().chain(x_next.iter()).all(|v| v.is_finite()) {
            return Err(CorpcaError::Divergence {
                iteration: k,
                detail: "non-finite iterate or gradient".into(),
            });
        }
        let done = mu == cfg.mu_bar
            && sparse_subgradient_sq(&grad_next, &x_next, &weights, mu * cfg.lambda)
                < cfg.tol * x_next.norm_squared()
            && (&x_next - &x).norm_squared() <= cfg.step_tol * x_next.norm_squared();

        let reset = cfg.restart && (&x_ex - &x_next).dot(&(&x_next - &x)) > 0.0;
        x_prev = std::mem::replace(&mut x, x_next);
        grad_prev = std::mem::replace(&mut grad, grad_next);
        if reset {
            t_prev = 1.0;
            t = 1.0;
        } else {
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            t_prev = t;
            t = t_next;
        }
        if done {
            break;
        }
        mu = (cfg.epsilon * mu).max(cfg.mu_bar);
    }
    Ok(x)
}
