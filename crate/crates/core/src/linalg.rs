//! Dense linear-algebra kernels: thin SVD, rank-one incremental SVD and
//! singular value thresholding.
//!
//! The dense SVD itself comes from `nalgebra`; everything layered on top
//! (sign normalisation, the incremental column append, thresholding) lives
//! here.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

/// Relative threshold under which the residual of an appended column is
/// treated as lying in the span of the current left factor.
pub const DEFICIENCY_TOL: f64 = 1e-10;

/// Orthonormality drift that triggers a fresh factorisation of a
/// long-lived incremental SVD.
pub const REORTHO_TOL: f64 = 1e-6;

/// A thin singular value decomposition `A = U diag(s) Vᵀ`.
///
/// `u` is `n × r`, `s` has length `r` and is nonincreasing, `v` is `c × r`.
/// Factorisations built by [`thin_svd`] have `r = min(n, c)`; the ones
/// carried by a low-rank prior are compact and may have fewer columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl ThinSvd {
    /// An empty factorisation of an `n × 0` matrix.
    pub fn empty(n: usize) -> Self {
        ThinSvd {
            u: DMatrix::zeros(n, 0),
            s: DVector::zeros(0),
            v: DMatrix::zeros(0, 0),
        }
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    /// Number of columns of the factored matrix.
    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        if self.rank() == 0 {
            return DMatrix::zeros(self.nrows(), self.ncols());
        }
        let mut us = self.u.clone();
        for (k, mut col) in us.column_iter_mut().enumerate() {
            col *= self.s[k];
        }
        us * self.v.transpose()
    }

    /// `max(‖UᵀU − I‖_max, ‖VᵀV − I‖_max)`.
    pub fn orthonormality_error(&self) -> f64 {
        gram_defect(&self.u).max(gram_defect(&self.v))
    }

    /// Keeps the `k` leading singular triplets.
    pub fn truncate(&self, k: usize) -> ThinSvd {
        let k = k.min(self.rank());
        ThinSvd {
            u: self.u.columns(0, k).into_owned(),
            s: self.s.rows(0, k).into_owned(),
            v: self.v.columns(0, k).into_owned(),
        }
    }

    /// Drops singular triplets with `s_k <= rel_tol * s_0` (and exact zeros).
    pub fn compact(&self, rel_tol: f64) -> ThinSvd {
        let top = self.s.iter().cloned().fold(0.0, f64::max);
        let keep = self
            .s
            .iter()
            .take_while(|&&sk| sk > 0.0 && sk > rel_tol * top)
            .count();
        self.truncate(keep)
    }

    /// Soft-thresholds the singular values in place, dropping those that
    /// reach zero.
    pub fn shrink(&self, tau: f64) -> ThinSvd {
        let mut out = self.clone();
        out.s.apply(|sk| *sk = (*sk - tau).max(0.0));
        out.compact(0.0)
    }

    /// Flips factor signs so that the largest-magnitude entry of every
    /// `U` column is nonnegative.
    fn normalize_signs(&mut self) {
        for k in 0..self.rank() {
            let col = self.u.column(k);
            let (mut best, mut best_abs) = (0.0, -1.0);
            for &x in col.iter() {
                if x.abs() > best_abs {
                    best_abs = x.abs();
                    best = x;
                }
            }
            if best < 0.0 {
                self.u.column_mut(k).neg_mut();
                self.v.column_mut(k).neg_mut();
            }
        }
    }
}

fn gram_defect(q: &DMatrix<f64>) -> f64 {
    if q.ncols() == 0 {
        return 0.0;
    }
    let g = q.transpose() * q;
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

fn check_finite_matrix(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{what} contains non-finite entries")))
    }
}

/// Thin SVD with `r = min(n, c)` triplets, singular values nonincreasing.
pub fn thin_svd(a: &DMatrix<f64>) -> Result<ThinSvd> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(invalid(format!(
            "thin_svd needs a non-empty matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    check_finite_matrix(a, "thin_svd input")?;
    let mut best = accurate_svd(a);
    best.normalize_signs();
    Ok(best)
}

/// Dense SVD checked against its own reconstruction.
fn accurate_svd(a: &DMatrix<f64>) -> ThinSvd {
    let scale = a.norm();
    let accuracy = |f: &ThinSvd| (f.reconstruct() - a).norm() / scale.max(f64::MIN_POSITIVE);
    let mut best = svd_of(a, None);
    let mut err = accuracy(&best);
    // the default convergence test occasionally stops early on
    // rank-deficient inputs; retry with a looser threshold and on Aᵀ
    if err > SVD_ACCEPT {
        for attempt in [svd_of(a, Some(1e-12)), transposed(svd_of(&a.transpose(), None))] {
            let e = accuracy(&attempt);
            if e < err {
                best = attempt;
                err = e;
            }
        }
    }
    best
}

/// Relative reconstruction error accepted from a single factorisation.
const SVD_ACCEPT: f64 = 1e-12;

fn svd_of(a: &DMatrix<f64>, eps: Option<f64>) -> ThinSvd {
    let svd = match eps {
        None => a.clone().svd(true, true),
        Some(e) => a
            .clone()
            .try_svd(true, true, e, 100_000)
            .unwrap_or_else(|| a.clone().svd(true, true)),
    };
    ThinSvd {
        u: svd.u.expect("requested U"),
        s: svd.singular_values,
        v: svd.v_t.expect("requested Vᵀ").transpose(),
    }
}

fn transposed(f: ThinSvd) -> ThinSvd {
    ThinSvd { u: f.v, s: f.s, v: f.u }
}

/// Singular value thresholding: `U diag(max(s − τ, 0)) Vᵀ`, the proximal
/// map of `τ‖·‖_*`.
pub fn svt(a: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    if !(tau >= 0.0) {
        return Err(invalid(format!("svt threshold must be >= 0, got {tau}")));
    }
    Ok(thin_svd(a)?.shrink(tau).reconstruct())
}

/// The small-core part of a one-column SVD update.
///
/// Holds everything needed to either assemble the full updated
/// factorisation or to read off single columns of a thresholded version of
/// it without touching the `n × (r+1)` product.
#[derive(Debug, Clone)]
pub struct ColumnAppend {
    /// Unit residual direction `δ/‖δ‖`, absent when the new column is in
    /// the span of the prior left factor.
    pub direction: Option<DVector<f64>>,
    /// SVD of the core matrix `[Σ e; 0 ‖δ‖]` (or `[Σ e]` when deficient).
    pub core: ThinSvd,
}

impl ColumnAppend {
    /// Computes `e = Uᵀv`, `δ = v − U e` and the SVD of the core matrix.
    pub fn new(prior: &ThinSvd, column: &DVector<f64>) -> Result<Self> {
        let n = prior.nrows();
        if column.len() != n {
            return Err(invalid(format!(
                "appended column has length {}, prior has {} rows",
                column.len(),
                n
            )));
        }
        if !column.iter().all(|x| x.is_finite()) {
            return Err(invalid("appended column contains non-finite entries"));
        }
        let r = prior.rank();
        let mut e = prior.u.tr_mul(column);
        let mut delta = column - &prior.u * &e;
        if r > 0 {
            // one re-orthogonalisation pass against the prior basis
            let fix = prior.u.tr_mul(&delta);
            delta -= &prior.u * &fix;
            e += fix;
        }
        let rho = delta.norm();
        let deficient = rho <= DEFICIENCY_TOL * column.norm().max(1.0);

        let rows = if deficient { r } else { r + 1 };
        if rows == 0 {
            // empty prior and a zero column: nothing to factor
            return Ok(ColumnAppend {
                direction: None,
                core: ThinSvd {
                    u: DMatrix::zeros(0, 0),
                    s: DVector::zeros(0),
                    v: DMatrix::zeros(1, 0),
                },
            });
        }
        let mut k = DMatrix::zeros(rows, r + 1);
        for i in 0..r {
            k[(i, i)] = prior.s[i];
            k[(i, r)] = e[i];
        }
        if !deficient {
            k[(r, r)] = rho;
        }
        let core = accurate_svd(&k);
        Ok(ColumnAppend {
            direction: (!deficient).then(|| delta / rho),
            core,
        })
    }

    /// `[U δ/‖δ‖] · c` for a core-space coefficient vector `c`.
    fn lift(&self, prior: &ThinSvd, c: &DVector<f64>) -> DVector<f64> {
        let r = prior.rank();
        let mut out = if r > 0 {
            &prior.u * c.rows(0, r)
        } else {
            DVector::zeros(prior.nrows())
        };
        if let Some(dir) = &self.direction {
            out.axpy(c[r], dir, 1.0);
        }
        out
    }

    /// Last column of `U_t Γ_τ(Σ_t) V_tᵀ`, i.e. the thresholded version of
    /// the appended column.
    pub fn thresholded_last_column(&self, prior: &ThinSvd, tau: f64) -> DVector<f64> {
        let core = &self.core;
        let last = core.v.nrows() - 1;
        let mut coeff = DVector::zeros(core.u.nrows());
        for k in 0..core.rank() {
            let g = (core.s[k] - tau).max(0.0);
            if g > 0.0 {
                coeff.axpy(g * core.v[(last, k)], &core.u.column(k), 1.0);
            }
        }
        self.lift(prior, &coeff)
    }

    /// Assembles `U_t = [U δ/‖δ‖]Ũ`, `Σ_t = Σ̃`, `V_t = diag(V, 1)Ṽ`.
    pub fn assemble(&self, prior: &ThinSvd) -> ThinSvd {
        let n = prior.nrows();
        let c = prior.ncols();
        let r = prior.rank();
        let core = &self.core;
        let k = core.rank();

        let mut basis = DMatrix::zeros(n, core.u.nrows());
        if r > 0 {
            basis.columns_mut(0, r).copy_from(&prior.u);
        }
        if let Some(dir) = &self.direction {
            basis.column_mut(r).copy_from(dir);
        }
        let u = basis * &core.u;

        let mut v = DMatrix::zeros(c + 1, k);
        if r > 0 {
            let top = &prior.v * core.v.rows(0, r);
            v.rows_mut(0, c).copy_from(&top);
        }
        v.row_mut(c).copy_from(&core.v.row(r));

        let mut out = ThinSvd {
            u,
            s: core.s.clone(),
            v,
        };
        out.normalize_signs();
        out
    }
}

/// SVD of `[B v]` from the SVD of `B` via a `(r+1) × (r+1)` core
/// factorisation.
pub fn inc_svd(prior: &ThinSvd, column: &DVector<f64>) -> Result<ThinSvd> {
    if prior.ncols() > 0 && prior.rank() > 0 && prior.orthonormality_error() > 1e-8 {
        return Err(invalid("prior factors are not orthonormal"));
    }
    let update = ColumnAppend::new(prior, column)?;
    Ok(update.assemble(prior))
}

/// Largest singular value. Exact for small matrices, power iteration on
/// `AᵀA` otherwise.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows().min(a.ncols()) <= 600 {
        return a
            .clone()
            .singular_values()
            .iter()
            .cloned()
            .fold(0.0, f64::max);
    }
    spectral_norm_power(|x| a * x, |y| a.tr_mul(y), a.ncols(), 200)
}

/// Power iteration estimate of `σ_max` for an operator given by its
/// forward and adjoint actions. Starts from a fixed deterministic vector.
pub fn spectral_norm_power(
    forward: impl Fn(&DVector<f64>) -> DVector<f64>,
    adjoint: impl Fn(&DVector<f64>) -> DVector<f64>,
    ncols: usize,
    iterations: usize,
) -> f64 {
    let mut x = DVector::from_fn(ncols, |i, _| 1.0 + 0.5 * ((i as f64) * 0.7548776662).sin());
    x /= x.norm();
    let mut sigma = 0.0;
    for _ in 0..iterations {
        let y = forward(&x);
        let z = adjoint(&y);
        let nz = z.norm();
        if nz == 0.0 {
            return 0.0;
        }
        sigma = nz.sqrt();
        x = z / nz;
    }
    sigma
}
