//! Synthetic low-rank + sparse sequences with correlated sparse columns.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};

/// Distribution of the entries of the low-rank factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorKind {
    StandardNormal,
    /// Every factor entry equals the given constant.
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub r: usize,
    /// Training columns.
    pub d: usize,
    /// Test columns.
    pub q: usize,
    pub s0: usize,
    /// Coordinates redrawn between consecutive sparse columns.
    pub drift: usize,
    /// Support may grow to `s0 + cap` before being reset to `s0`.
    pub cap: usize,
    pub seed: u64,
    pub factors: FactorKind,
}

impl SynthConfig {
    pub fn new(n: usize, s0: usize, seed: u64) -> Self {
        SynthConfig {
            n,
            r: 5,
            d: 100,
            q: 100,
            s0,
            drift: s0 / 2,
            cap: 15,
            seed,
            factors: FactorKind::StandardNormal,
        }
    }

    pub fn columns(&self) -> usize {
        self.d + self.q
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.columns() == 0 {
            return Err(invalid("synthetic sequence needs n >= 1 and at least one column"));
        }
        if self.r > self.n.min(self.columns()) {
            return Err(invalid(format!(
                "rank {} exceeds min(n, d+q) = {}",
                self.r,
                self.n.min(self.columns())
            )));
        }
        if self.s0 + self.cap > self.n {
            return Err(invalid(format!(
                "s0 + cap = {} exceeds n = {}",
                self.s0 + self.cap,
                self.n
            )));
        }
        Ok(())
    }
}

/// Low-rank part `L` and sparse part `S`, both `n × (d+q)`.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub low_rank: DMatrix<f64>,
    pub sparse: DMatrix<f64>,
}

impl Sequence {
    pub fn observed(&self) -> DMatrix<f64> {
        &self.low_rank + &self.sparse
    }
}

pub fn gen_sequence(cfg: &SynthConfig) -> Result<Sequence> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cols = cfg.columns();
    let mut factor = |rows: usize| -> DMatrix<f64> {
        match cfg.factors {
            FactorKind::StandardNormal => {
                DMatrix::from_fn(rows, cfg.r, |_, _| StandardNormal.sample(&mut rng))
            }
            FactorKind::Constant(c) => DMatrix::from_element(rows, cfg.r, c),
        }
    };
    let u = factor(cfg.n);
    let v = factor(cols);
    let low_rank = u * v.transpose();

    let mut sparse = DMatrix::zeros(cfg.n, cols);
    let mut x = DVector::zeros(cfg.n);
    for i in sample(&mut rng, cfg.n, cfg.s0) {
        x[i] = StandardNormal.sample(&mut rng);
    }
    sparse.column_mut(0).copy_from(&x);
    for t in 1..cols {
        for i in sample(&mut rng, cfg.n, cfg.drift) {
            x[i] = nonzero_normal(&mut rng);
        }
        let support: Vec<usize> = (0..cfg.n).filter(|&i| x[i] != 0.0).collect();
        if support.len() > cfg.s0 + cfg.cap {
            let excess = support.len() - cfg.s0;
            for k in sample(&mut rng, support.len(), excess) {
                x[support[k]] = 0.0;
            }
        }
        sparse.column_mut(t).copy_from(&x);
    }
    Ok(Sequence { low_rank, sparse })
}

fn nonzero_normal(rng: &mut impl Rng) -> f64 {
    loop {
        let v: f64 = StandardNormal.sample(rng);
        if v != 0.0 {
            return v;
        }
    }
}

/// `m × n` matrix with i.i.d. `N(0, 1/m)` entries.
pub fn gaussian_sensing(m: usize, n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let scale = 1.0 / (m as f64).sqrt();
    DMatrix::from_fn(m, n, |_, _| {
        let g: f64 = StandardNormal.sample(rng);
        g * scale
    })
}
