use nalgebra::DVector;

use super::{LowRankPrior, MeasurementModel, SeparationResult, SolverConfig};
use crate::error::{invalid, CorpcaError, Result};
use crate::linalg::{thin_svd, ColumnAppend, REORTHO_TOL};
use crate::prox::{prox_nl1_unchecked, reweight_in_place, SideInfoSet};

/// Treatment of the low-rank component inside one instance.
#[derive(Debug, Clone, Copy)]
pub enum Background<'a> {
    /// `v` is held at zero; the iteration reduces to the sparse solver.
    Pinned,
    /// `v` is regularised by `‖[B v]‖_*` for the given prior `B`.
    Prior(&'a LowRankPrior),
}

/// Result of one online step plus the priors for the next instance.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub result: SeparationResult,
    pub side_info: SideInfoSet,
    pub prior: LowRankPrior,
}

/// Everything the inner loop leaves behind.
pub(crate) struct InstanceSolution {
    pub result: SeparationResult,
    /// Weights in force at the last iteration.
    pub weights: SideInfoSet,
    /// Core factorisation of `[B u]` from the last iteration.
    pub last_append: Option<ColumnAppend>,
    /// Threshold applied to singular values at the last iteration.
    pub last_svt: f64,
}

fn check_dims(meas: &MeasurementModel, si: &SideInfoSet, background: Background<'_>) -> Result<()> {
    si.validate()?;
    let n = meas.n();
    if si.dim() != n {
        return Err(invalid(format!(
            "side information has length {}, Φ has {} columns",
            si.dim(),
            n
        )));
    }
    if let Background::Prior(prior) = background {
        if prior.n() != n || prior.svd.nrows() != n {
            return Err(invalid(format!(
                "low-rank prior has {} rows, Φ has {} columns",
                prior.n(),
                n
            )));
        }
    }
    Ok(())
}

/// Squared norm of the minimal-norm element of `∇f + μλ ∂g` over the sparse
/// coordinates.
pub(crate) fn sparse_subgradient_sq(grad: &DVector<f64>, x: &DVector<f64>, si: &SideInfoSet, scale: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.len() {
        let (lo, hi) = si.subdifferential(x, i);
        let (lo, hi) = (grad[i] + scale * lo, grad[i] + scale * hi);
        let d = if lo > 0.0 {
            lo
        } else if hi < 0.0 {
            hi
        } else {
            0.0
        };
        acc += d * d;
    }
    acc
}

/// Runs the accelerated proximal iteration for a single time instance.
pub fn solve_instance(
    meas: &MeasurementModel,
    si: &SideInfoSet,
    background: Background<'_>,
    cfg: &SolverConfig,
) -> Result<(SeparationResult, SideInfoSet)> {
    let sol = run_instance(meas, si, background, cfg)?;
    Ok((sol.result, sol.weights))
}

pub(crate) fn run_instance(
    meas: &MeasurementModel,
    si: &SideInfoSet,
    background: Background<'_>,
    cfg: &SolverConfig,
) -> Result<InstanceSolution> {
    cfg.validate()?;
    check_dims(meas, si, background)?;
    let n = meas.n();
    let step = cfg.step_size(&meas.phi);
    let mut mu = match cfg.mu_init {
        super::MuInit::Literal => 0.0,
        super::MuInit::Warm { .. } => cfg.initial_mu(meas),
    };

    let mut weights = si.clone();
    let mut x = DVector::zeros(n);
    let mut x_prev = DVector::zeros(n);
    let mut v = DVector::zeros(n);
    let mut v_prev = DVector::zeros(n);
    let mut xi = 1.0f64;
    let mut xi_prev = 1.0f64;
    // gradients at accepted iterates; ∇f is affine so the gradient at the
    // extrapolated point is the same combination of these two
    let mut grad = meas.gradient(&DVector::zeros(n));
    let mut grad_prev = grad.clone();

    let mut last_append = None;
    let mut last_svt = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    let mut mu_last = mu;

    for k in 0..cfg.max_iter {
        mu_last = mu;
        let momentum = (xi_prev - 1.0) / xi;
        let x_ex = &x + (&x - &x_prev) * momentum;
        let v_ex = &v + (&v - &v_prev) * momentum;
        let grad_ex = &grad * (1.0 + momentum) - &grad_prev * momentum;

        let svt_tau = mu * step;
        let v_next = match background {
            Background::Pinned => DVector::zeros(n),
            Background::Prior(prior) => {
                let target = &v_ex - &grad_ex * step;
                let append = ColumnAppend::new(&prior.svd, &target)?;
                let col = append.thresholded_last_column(&prior.svd, svt_tau);
                last_append = Some(append);
                last_svt = svt_tau;
                col
            }
        };
        let x_target = &x_ex - &grad_ex * step;
        let x_next = prox_nl1_unchecked(&x_target, &weights, mu * step * cfg.lambda);
        if cfg.reweight {
            reweight_in_place(&x_next, &mut weights, cfg.epsilon);
        }

        let grad_next = meas.gradient(&(&x_next + &v_next));
        if !grad_next.iter().all(|g| g.is_finite()) || !x_next.iter().all(|g| g.is_finite()) {
            return Err(CorpcaError::Divergence {
                iteration: k,
                detail: "non-finite iterate or gradient".into(),
            });
        }

        iterations = k + 1;
        if mu == cfg.mu_bar {
            let mut sub = sparse_subgradient_sq(&grad_next, &x_next, &weights, mu * cfg.lambda);
            if let Background::Prior(_) = background {
                let r = &grad_next - &grad_ex + (&v_ex - &v_next) / step;
                sub += r.norm_squared();
            }
            let scale = x_next.norm_squared() + v_next.norm_squared();
            let moved = (&x_next - &x).norm_squared() + (&v_next - &v).norm_squared();
            if sub < cfg.tol * scale && moved <= cfg.step_tol * scale {
                converged = true;
            }
        }

        let reset = cfg.restart
            && (&x_ex - &x_next).dot(&(&x_next - &x)) + (&v_ex - &v_next).dot(&(&v_next - &v)) > 0.0;
        x_prev = std::mem::replace(&mut x, x_next);
        v_prev = std::mem::replace(&mut v, v_next);
        grad_prev = std::mem::replace(&mut grad, grad_next);
        if reset {
            xi_prev = 1.0;
            xi = 1.0;
        } else {
            let xi_next = (1.0 + (1.0 + 4.0 * xi * xi).sqrt()) / 2.0;
            xi_prev = xi;
            xi = xi_next;
        }
        if converged {
            break;
        }
        mu = (cfg.epsilon * mu).max(cfg.mu_bar);
    }

    let mut objective = meas.data_fit(&(&x + &v)) + mu_last * cfg.lambda * weights.penalty(&x);
    if let Background::Prior(prior) = background {
        let nuclear: f64 = ColumnAppend::new(&prior.svd, &v)?.core.s.sum();
        objective += mu_last * nuclear;
    }
    if !objective.is_finite() {
        return Err(CorpcaError::Divergence {
            iteration: iterations,
            detail: "objective is not finite".into(),
        });
    }

    Ok(InstanceSolution {
        result: SeparationResult {
            x_hat: x,
            v_hat: v,
            iterations,
            converged,
            objective,
        },
        weights,
        last_append,
        last_svt,
    })
}

/// One online step: separates `y_t` into sparse and low-rank parts, then
/// rolls the sparse priors and refreshes the low-rank prior.
pub fn corpca_step(
    meas: &MeasurementModel,
    si: &SideInfoSet,
    prior: &LowRankPrior,
    cfg: &SolverConfig,
) -> Result<StepOutput> {
    let sol = run_instance(meas, si, Background::Prior(prior), cfg)?;
    let append = sol
        .last_append
        .as_ref()
        .expect("the low-rank branch ran at least once");

    let updated = append
        .assemble(&prior.svd)
        .shrink(sol.last_svt)
        .truncate(prior.d);
    let mut next_prior = LowRankPrior::from_factors(updated.u, updated.s, prior.d);
    if next_prior.svd.orthonormality_error() > REORTHO_TOL {
        let fresh = thin_svd(&next_prior.b)?.compact(1e-13);
        next_prior = LowRankPrior::from_factors(fresh.u, fresh.s, prior.d);
    }

    let side_info = si.rolled(&sol.result.x_hat);
    Ok(StepOutput {
        result: sol.result,
        side_info,
        prior: next_prior,
    })
}
