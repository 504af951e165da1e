//! Proximal operators for the sparse component: plain soft thresholding and
//! the exact proximal map of the multi-prior weighted ℓ1 penalty
//! `g(u) = Σ_j β_j ‖W_j (u − z_j)‖₁`, together with its adaptive weights.

use nalgebra::DVector;

use crate::error::{invalid, Result};

const BETA_SUM_TOL: f64 = 1e-12;
const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Prior vectors for the sparse component together with their weights.
///
/// `z` holds the `J` nonzero priors; the zero prior `z_0 = 0` is implicit
/// and always comes first in `w` and `beta`, which therefore have `J + 1`
/// entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SideInfoSet {
    pub z: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
    pub beta: Vec<f64>,
}

impl SideInfoSet {
    /// `J` zero priors with uniform weights (`w_ji = 1`, `β_j = 1/(J+1)`).
    pub fn zeros(n: usize, j: usize) -> Self {
        Self::uniform(vec![DVector::zeros(n); j], n)
    }

    /// The given priors with uniform weights.
    pub fn uniform(z: Vec<DVector<f64>>, n: usize) -> Self {
        let count = z.len() + 1;
        SideInfoSet {
            z,
            w: vec![DVector::from_element(n, 1.0); count],
            beta: vec![1.0 / count as f64; count],
        }
    }

    /// Number of nonzero priors `J`.
    pub fn j(&self) -> usize {
        self.z.len()
    }

    pub fn dim(&self) -> usize {
        self.w.first().map_or(0, |w| w.len())
    }

    /// Prior `j` for `j = 0..=J`, with `None` standing for `z_0 = 0`.
    pub fn prior(&self, j: usize) -> Option<&DVector<f64>> {
        if j == 0 {
            None
        } else {
            Some(&self.z[j - 1])
        }
    }

    pub fn validate(&self) -> Result<()> {
        let count = self.z.len() + 1;
        if self.w.len() != count || self.beta.len() != count {
            return Err(invalid(format!(
                "side information with J = {} needs {} weight vectors and β entries, got {} and {}",
                self.z.len(),
                count,
                self.w.len(),
                self.beta.len()
            )));
        }
        let n = self.dim();
        if self.z.iter().any(|z| z.len() != n) || self.w.iter().any(|w| w.len() != n) {
            return Err(invalid("side information vectors have inconsistent lengths"));
        }
        let beta_sum: f64 = self.beta.iter().sum();
        if self.beta.iter().any(|&b| !(b >= 0.0)) || (beta_sum - 1.0).abs() > BETA_SUM_TOL {
            return Err(invalid(format!("β must be nonnegative and sum to 1, sum = {beta_sum}")));
        }
        for (j, w) in self.w.iter().enumerate() {
            if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(invalid(format!("weights of prior {j} must be positive")));
            }
            let sum = w.sum();
            if (sum - n as f64).abs() > WEIGHT_SUM_TOL * (n as f64).max(1.0) {
                return Err(invalid(format!("weights of prior {j} sum to {sum}, expected {n}")));
            }
        }
        Ok(())
    }

    /// Drops the oldest prior and appends `latest`, resetting all weights
    /// to uniform.
    pub fn rolled(&self, latest: &DVector<f64>) -> SideInfoSet {
        let n = latest.len();
        let j = self.j();
        if j == 0 {
            return SideInfoSet::zeros(n, 0);
        }
        let mut z: Vec<DVector<f64>> = self.z.iter().skip(1).cloned().collect();
        z.push(latest.clone());
        SideInfoSet::uniform(z, n)
    }

    /// `g(u) = Σ_j β_j ‖W_j (u − z_j)‖₁` with the current weights.
    pub fn penalty(&self, u: &DVector<f64>) -> f64 {
        (0..=self.j())
            .map(|j| self.beta[j] * self.weighted_residual(u, j))
            .sum()
    }

    /// `‖W_j (u − z_j)‖₁`.
    fn weighted_residual(&self, u: &DVector<f64>, j: usize) -> f64 {
        let w = &self.w[j];
        match self.prior(j) {
            None => u.iter().zip(w.iter()).map(|(a, b)| a.abs() * b).sum(),
            Some(z) => u
                .iter()
                .zip(z.iter())
                .zip(w.iter())
                .map(|((a, c), b)| (a - c).abs() * b)
                .sum(),
        }
    }

    /// Breakpoints `z_ji` and slopes `β_j w_ji` of coordinate `i`.
    fn coordinate_terms(&self, i: usize, out: &mut Vec<(f64, f64)>) {
        out.clear();
        for j in 0..=self.j() {
            let at = self.prior(j).map_or(0.0, |z| z[i]);
            out.push((at, self.beta[j] * self.w[j][i]));
        }
    }

    /// Interval `[lo, hi]` of the subdifferential of `g` at coordinate `i`.
    pub fn subdifferential(&self, u: &DVector<f64>, i: usize) -> (f64, f64) {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for j in 0..=self.j() {
            let a = self.beta[j] * self.w[j][i];
            let d = u[i] - self.prior(j).map_or(0.0, |z| z[i]);
            if d > 0.0 {
                lo += a;
                hi += a;
            } else if d < 0.0 {
                lo -= a;
                hi -= a;
            } else {
                lo -= a;
                hi += a;
            }
        }
        (lo, hi)
    }
}

/// `sign(x_i) · max(|x_i| − τ, 0)` coordinatewise.
pub fn soft_threshold(x: &DVector<f64>, tau: f64) -> DVector<f64> {
    x.map(|xi| soft_scalar(xi, tau))
}

#[inline]
pub fn soft_scalar(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Exact minimiser of `τ Σ_k a_k |u − b_k| + ½(u − x)²`.
///
/// `terms` holds `(b_k, a_k)` pairs with `a_k ≥ 0`; it is sorted in place.
pub fn prox_piecewise(x: f64, tau: f64, terms: &mut [(f64, f64)]) -> f64 {
    terms.sort_by(|p, q| p.0.total_cmp(&q.0));
    let total: f64 = terms.iter().map(|t| t.1).sum();
    // slope of the penalty on the current interval: (left mass) − (right mass)
    let mut left = 0.0;
    let mut k = 0;
    while k < terms.len() {
        let slope = 2.0 * left - total;
        let candidate = x - tau * slope;
        let at = terms[k].0;
        if candidate < at {
            return candidate;
        }
        // merge coincident breakpoints
        let mut mass = 0.0;
        while k < terms.len() && terms[k].0 == at {
            mass += terms[k].1;
            k += 1;
        }
        let right_slope = 2.0 * (left + mass) - total;
        // subgradient condition at the breakpoint
        if at - x + tau * right_slope >= 0.0 {
            return at;
        }
        left += mass;
    }
    x - tau * (2.0 * left - total)
}

/// Proximal map of `τ g` with `g(u) = Σ_j β_j ‖W_j (u − z_j)‖₁`.
pub fn prox_nl1(x: &DVector<f64>, si: &SideInfoSet, tau: f64) -> Result<DVector<f64>> {
    si.validate()?;
    if x.len() != si.dim() {
        return Err(invalid(format!(
            "prox input has length {}, side information has {}",
            x.len(),
            si.dim()
        )));
    }
    if !(tau >= 0.0) {
        return Err(invalid(format!("prox threshold must be >= 0, got {tau}")));
    }
    Ok(prox_nl1_unchecked(x, si, tau))
}

/// [`prox_nl1`] without invariant checks, for inner solver loops that
/// maintain the invariants themselves.
pub(crate) fn prox_nl1_unchecked(x: &DVector<f64>, si: &SideInfoSet, tau: f64) -> DVector<f64> {
    if si.j() == 0 {
        let b = si.beta[0];
        let w = &si.w[0];
        return DVector::from_fn(x.len(), |i, _| soft_scalar(x[i], tau * b * w[i]));
    }
    let mut terms = Vec::with_capacity(si.j() + 1);
    DVector::from_fn(x.len(), |i, _| {
        si.coordinate_terms(i, &mut terms);
        prox_piecewise(x[i], tau, &mut terms)
    })
}

/// Recomputes weights and mixture coefficients from the current estimate:
///
/// `w_ji = n (|x_i − z_ji| + ε)⁻¹ / Σ_l (|x_l − z_jl| + ε)⁻¹`,
/// `β_j ∝ (‖W_j (x − z_j)‖₁ + ε)⁻¹`.
pub fn update_weights(x: &DVector<f64>, si: &SideInfoSet, eps: f64) -> Result<SideInfoSet> {
    if !(eps > 0.0) {
        return Err(invalid(format!("weight smoothing ε must be > 0, got {eps}")));
    }
    if x.len() != si.dim() || si.w.len() != si.j() + 1 {
        return Err(invalid("estimate and side information dimensions disagree"));
    }
    let mut out = si.clone();
    reweight_in_place(x, &mut out, eps);
    Ok(out)
}

pub(crate) fn reweight_in_place(x: &DVector<f64>, si: &mut SideInfoSet, eps: f64) {
    let n = x.len() as f64;
    let mut inv_norms = Vec::with_capacity(si.j() + 1);
    for j in 0..=si.j() {
        let prior = if j == 0 { None } else { Some(&si.z[j - 1]) };
        let w = &mut si.w[j];
        let mut total = 0.0;
        for i in 0..x.len() {
            let d = (x[i] - prior.map_or(0.0, |z| z[i])).abs();
            let inv = 1.0 / (d + eps);
            w[i] = inv;
            total += inv;
        }
        let scale = n / total;
        let mut weighted = 0.0;
        for i in 0..x.len() {
            w[i] *= scale;
            let d = (x[i] - prior.map_or(0.0, |z| z[i])).abs();
            weighted += w[i] * d;
        }
        inv_norms.push(1.0 / (weighted + eps));
    }
    let total: f64 = inv_norms.iter().sum();
    for (b, inv) in si.beta.iter_mut().zip(inv_norms) {
        *b = inv / total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_cases() {
        let out = soft_threshold(&DVector::from_column_slice(&[3.0, -0.5, -4.0]), 1.0);
        assert_eq!(out.as_slice(), &[2.0, 0.0, -3.0]);
        let x = DVector::from_fn(50, |i, _| (i as f64 * 0.37).sin());
        assert_eq!(soft_threshold(&x, 0.0), x);
    }

    #[test]
    fn single_prior_is_soft_threshold() {
        let si = SideInfoSet::zeros(5, 0);
        let x = DVector::from_column_slice(&[2.0, -0.3, 0.0, 1.1, -7.0]);
        let got = prox_nl1(&x, &si, 0.5).unwrap();
        assert_eq!(got, soft_threshold(&x, 0.5));
    }

    #[test]
    fn bracketing_with_prior_at_input() {
        // one coordinate, z_1 = x
        let x = DVector::from_column_slice(&[1.7]);
        let si = SideInfoSet::uniform(vec![x.clone()], 1);
        for &tau in &[0.1, 0.5, 1.0, 3.0] {
            let u = prox_nl1(&x, &si, tau).unwrap()[0];
            assert!((0.0..=1.7).contains(&u), "{u}");
            let obj = |v: f64| tau * 0.5 * (v.abs() + (v - 1.7).abs()) + 0.5 * (v - 1.7).powi(2);
            assert!(obj(u) <= obj(0.0) + 1e-15 && obj(u) <= obj(1.7) + 1e-15);
        }
    }

    #[test]
    fn coincident_breakpoints_merge() {
        let mut terms = vec![(1.0, 0.5), (1.0, 0.5), (-2.0, 0.1)];
        // slope mass at 1.0 is 1.0, x slightly above: stays at the breakpoint
        let u = prox_piecewise(1.3, 0.5, &mut terms);
        assert_eq!(u, 1.0);
    }

    #[test]
    fn invalid_side_info_rejected() {
        let mut si = SideInfoSet::zeros(3, 1);
        si.beta = vec![0.7, 0.7];
        assert!(prox_nl1(&DVector::zeros(3), &si, 1.0).is_err());
        let mut si = SideInfoSet::zeros(3, 1);
        si.w[1][0] = 0.0;
        assert!(prox_nl1(&DVector::zeros(3), &si, 1.0).is_err());
    }

    #[test]
    fn weight_formula_example() {
        let si = SideInfoSet::zeros(3, 0);
        let x = DVector::from_column_slice(&[1.0, 0.0, 0.0]);
        let out = update_weights(&x, &si, 1.0).unwrap();
        let w = &out.w[0];
        assert!((w[0] - 0.6).abs() < 1e-15);
        assert!((w[1] - 1.2).abs() < 1e-15 && (w[2] - 1.2).abs() < 1e-15);
        assert!((w.sum() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn identical_residuals_get_equal_beta() {
        let z = DVector::from_column_slice(&[0.5, -1.0, 2.0]);
        let si = SideInfoSet::uniform(vec![z.clone(), z.clone()], 3);
        let x = DVector::from_column_slice(&[1.0, 1.0, 1.0]);
        let out = update_weights(&x, &si, 0.8).unwrap();
        assert!((out.beta[1] - out.beta[2]).abs() < 1e-15);
        out.validate().unwrap();
    }

    #[test]
    fn perfect_prior_gives_uniform_weights() {
        let z = DVector::from_column_slice(&[0.5, -1.0, 2.0, 0.0]);
        let si = SideInfoSet::uniform(vec![z.clone()], 4);
        let out = update_weights(&z, &si, 0.3).unwrap();
        for &w in out.w[1].iter() {
            assert!((w - 1.0).abs() < 1e-15);
        }
        // and the perfect prior dominates β
        assert!(out.beta[1] > out.beta[0]);
    }

    #[test]
    fn roll_drops_oldest() {
        let a = DVector::from_element(2, 1.0);
        let b = DVector::from_element(2, 2.0);
        let si = SideInfoSet::uniform(vec![a, b.clone()], 2);
        let c = DVector::from_element(2, 3.0);
        let rolled = si.rolled(&c);
        assert_eq!(rolled.z, vec![b, c]);
        rolled.validate().unwrap();
    }
}
