//! Monte-Carlo phase-transition grids over sparsity and measurement count.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::synth::{gaussian_sensing, gen_sequence, Sequence, SynthConfig};
use crate::bounds::{bound_l1, bound_l1l1, bound_nl1, noisy_from, BoundInputs, NONZERO_TOL, RHO_L1, RHO_L1L1, RHO_NL1};
use crate::error::{invalid, CorpcaError, Result};
use crate::prox::{update_weights, SideInfoSet};
use crate::solvers::{bootstrap_prior, corpca_step, LowRankPrior, MeasurementModel, PcpConfig, Sensing, SolverConfig};

/// Penalty used for the sparse component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Adaptive weights over `J` rolling priors.
    Nl1,
    /// One prior (the previous estimate), unit weights, `β = (½, ½)` frozen.
    L1l1,
    /// No prior, unit weights.
    L1,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Nl1 => "nl1",
            Method::L1l1 => "l1l1",
            Method::L1 => "l1",
        }
    }

    /// Prior count and whether weights adapt.
    fn setup(self, j: usize) -> (usize, bool) {
        match self {
            Method::Nl1 => (j, true),
            Method::L1l1 => (1, false),
            Method::L1 => (0, false),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = CorpcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nl1" => Ok(Method::Nl1),
            "l1l1" => Ok(Method::L1l1),
            "l1" => Ok(Method::L1),
            other => Err(invalid(format!("unknown method {other:?}, expected nl1, l1l1 or l1"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhaseConfig {
    /// Sequence shape. `s0`, `drift` and `seed` are set per cell and trial.
    pub template: SynthConfig,
    pub s0_list: Vec<usize>,
    pub m_list: Vec<usize>,
    pub trials: usize,
    /// Rolling prior count for [`Method::Nl1`].
    pub j: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Grade every test column instead of only the last one.
    pub grade_all: bool,
    /// `None` selects [`SolverConfig::for_dimension`].
    pub solver: Option<SolverConfig>,
    pub pcp: PcpConfig,
    /// A column counts as recovered when `‖x̂ − x‖₂/‖x‖₂` is at most this.
    pub success_tol: f64,
}

impl PhaseConfig {
    pub fn new(n: usize, s0_list: Vec<usize>, m_list: Vec<usize>, trials: usize, seed: u64) -> Self {
        PhaseConfig {
            template: SynthConfig::new(n, 1, seed),
            s0_list,
            m_list,
            trials,
            j: 3,
            seed,
            methods: vec![Method::Nl1],
            grade_all: false,
            solver: None,
            pcp: PcpConfig::default(),
            success_tol: 1e-2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s0_list.is_empty() || self.m_list.is_empty() || self.methods.is_empty() {
            return Err(invalid("s0, m and method lists must be nonempty"));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be >= 1"));
        }
        let n = self.template.n;
        if let Some(&m) = self.m_list.iter().find(|&&m| m == 0 || m > n) {
            return Err(invalid(format!("m = {m} outside 1..={n}")));
        }
        if self.template.q == 0 {
            return Err(invalid("at least one test column is required"));
        }
        if self.j >= self.template.columns() {
            return Err(invalid("J must be smaller than the sequence length"));
        }
        // the stream tags below pack these into disjoint bit ranges
        if self.s0_list.iter().any(|&s| s >= 1 << 16) || self.m_list.iter().any(|&m| m >= 1 << 20) || self.trials >= 1 << 20 {
            return Err(invalid("s0, m or trial count too large"));
        }
        for &s0 in &self.s0_list {
            self.cell_synth(s0, 0).validate()?;
        }
        Ok(())
    }

    fn solver_config(&self) -> SolverConfig {
        self.solver.clone().unwrap_or_else(|| SolverConfig::for_dimension(self.template.n))
    }

    fn cell_synth(&self, s0: usize, seed: u64) -> SynthConfig {
        SynthConfig {
            s0,
            drift: s0 / 2,
            seed,
            ..self.template.clone()
        }
    }
}

/// Deterministic per-purpose random stream derived from the master seed.
fn stream(seed: u64, kind: u64, s0: usize, m: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((kind << 56) ^ ((s0 as u64) << 40) ^ ((m as u64) << 20) ^ trial as u64);
    rng
}

const KIND_SEQUENCE: u64 = 1;
const KIND_SENSING: u64 = 2;

/// Seed of the synthetic sequence used by trial `trial` at sparsity `s0`.
pub fn trial_sequence_seed(seed: u64, s0: usize, trial: usize) -> u64 {
    stream(seed, KIND_SEQUENCE, s0, 0, trial).random()
}

/// Sensing operator used by trial `trial` at `(s0, m)`; identity when `m = n`.
pub fn trial_sensing(seed: u64, s0: usize, m: usize, n: usize, trial: usize) -> Sensing {
    if m == n {
        return Sensing::Identity(n);
    }
    let mut rng = stream(seed, KIND_SENSING, s0, m, trial);
    Sensing::Dense(gaussian_sensing(m, n, &mut rng))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCell {
    pub method: Method,
    pub s0: usize,
    pub m: usize,
    /// Graded instances: trials, or trials times test columns when every
    /// column is graded.
    pub trials: usize,
    pub successes: usize,
}

impl PhaseCell {
    pub fn rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Bound curves at one sparsity level, in their noisy form with the default
/// `ρ` for each method, averaged over the trials' final test columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub s0: usize,
    pub nl1: f64,
    pub l1l1: f64,
    pub l1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub s0_list: Vec<usize>,
    pub m_list: Vec<usize>,
    pub cells: Vec<PhaseCell>,
    pub bounds: Vec<BoundRow>,
}

impl PhaseGrid {
    pub fn cell(&self, method: Method, s0: usize, m: usize) -> Option<&PhaseCell> {
        self.cells.iter().find(|c| c.method == method && c.s0 == s0 && c.m == m)
    }

    pub fn bound(&self, s0: usize) -> Option<&BoundRow> {
        self.bounds.iter().find(|b| b.s0 == s0)
    }
}

/// Outcome of one (sparsity, trial) job: successes per (method, m) in
/// configuration order, and the three bounds.
struct TrialOutcome {
    successes: Vec<usize>,
    bounds: [f64; 3],
}

/// Runs the grid. Trials are independent jobs and run on the current rayon
/// pool; results do not depend on the number of threads.
pub fn run_phase_grid(cfg: &PhaseConfig) -> Result<PhaseGrid> {
    cfg.validate()?;
    let solver = cfg.solver_config();
    solver.validate()?;
    let jobs: Vec<(usize, usize)> = cfg
        .s0_list
        .iter()
        .flat_map(|&s0| (0..cfg.trials).map(move |t| (s0, t)))
        .collect();
    let outcomes: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|&(s0, trial)| run_trial(cfg, &solver, s0, trial))
        .collect();

    let per_trial = cfg.methods.len() * cfg.m_list.len();
    let graded = if cfg.grade_all { cfg.trials * cfg.template.q } else { cfg.trials };
    let mut cells = Vec::new();
    let mut bounds = Vec::new();
    for (si, &s0) in cfg.s0_list.iter().enumerate() {
        let block = &outcomes[si * cfg.trials..(si + 1) * cfg.trials];
        for (mi, &method) in cfg.methods.iter().enumerate() {
            for (ki, &m) in cfg.m_list.iter().enumerate() {
                let idx = mi * cfg.m_list.len() + ki;
                debug_assert!(idx < per_trial);
                let successes = block.iter().map(|o| o.successes[idx]).sum();
                cells.push(PhaseCell {
                    method,
                    s0,
                    m,
                    trials: graded,
                    successes,
                });
            }
        }
        let mean = |k: usize| block.iter().map(|o| o.bounds[k]).sum::<f64>() / block.len() as f64;
        bounds.push(BoundRow {
            s0,
            nl1: mean(0),
            l1l1: mean(1),
            l1: mean(2),
        });
    }
    Ok(PhaseGrid {
        s0_list: cfg.s0_list.clone(),
        m_list: cfg.m_list.clone(),
        cells,
        bounds,
    })
}

fn run_trial(cfg: &PhaseConfig, solver: &SolverConfig, s0: usize, trial: usize) -> TrialOutcome {
    let per_trial = cfg.methods.len() * cfg.m_list.len();
    let synth = cfg.cell_synth(s0, trial_sequence_seed(cfg.seed, s0, trial));
    let seq = match gen_sequence(&synth) {
        Ok(seq) => seq,
        Err(_) => {
            return TrialOutcome {
                successes: vec![0; per_trial],
                bounds: [f64::NAN; 3],
            }
        }
    };
    let bounds = trial_bounds(&seq, &synth, cfg.j, solver.epsilon);
    let training = seq.observed().columns(0, synth.d).into_owned();
    let prior = match bootstrap_prior(&training, &cfg.pcp, 0) {
        Ok((prior, _)) => Some(prior),
        Err(_) => None,
    };

    let mut successes = Vec::with_capacity(per_trial);
    for &method in &cfg.methods {
        for &m in &cfg.m_list {
            let count = match &prior {
                Some(prior) => {
                    let phi = trial_sensing(cfg.seed, s0, m, synth.n, trial);
                    run_online(&seq, &synth, prior, phi, method, cfg, solver)
                }
                None => 0,
            };
            successes.push(count);
        }
    }
    TrialOutcome { successes, bounds }
}

/// Runs the online recursion over the test columns and counts recovered
/// columns. A solver error fails the column it happened on and every later
/// one.
fn run_online(
    seq: &Sequence,
    synth: &SynthConfig,
    prior: &LowRankPrior,
    phi: Sensing,
    method: Method,
    cfg: &PhaseConfig,
    solver: &SolverConfig,
) -> usize {
    let (j, reweight) = method.setup(cfg.j);
    let solver = SolverConfig {
        reweight,
        ..solver.clone()
    };
    let mut si = SideInfoSet::zeros(synth.n, j);
    let mut prior = prior.clone();
    let last = synth.columns() - 1;
    let mut count = 0;
    for t in synth.d..synth.columns() {
        let x = seq.sparse.column(t).into_owned();
        let v = seq.low_rank.column(t).into_owned();
        let step = MeasurementModel::observe(phi.clone(), &x, &v).and_then(|meas| corpca_step(&meas, &si, &prior, &solver));
        let out = match step {
            Ok(out) => out,
            Err(_) => break,
        };
        if cfg.grade_all || t == last {
            let err = (&out.result.x_hat - &x).norm() / x.norm().max(f64::MIN_POSITIVE);
            if err <= cfg.success_tol {
                count += 1;
            }
        }
        si = out.side_info;
        prior = out.prior;
    }
    count
}

/// Bounds evaluated on the ground truth of the final test column, with the
/// `J` preceding sparse columns as priors.
fn trial_bounds(seq: &Sequence, synth: &SynthConfig, j: usize, eps: f64) -> [f64; 3] {
    let t = synth.columns() - 1;
    let x = seq.sparse.column(t).into_owned();
    let z: Vec<DVector<f64>> = (1..=j).map(|k| seq.sparse.column(t - k).into_owned()).collect();
    let nl1 = update_weights(&x, &SideInfoSet::uniform(z.clone(), synth.n), eps)
        .and_then(|w| BoundInputs::from_signal(&x, &z, &w.beta, eps, RHO_NL1))
        .and_then(|inp| bound_nl1(&inp, true))
        .unwrap_or(f64::NAN);
    let prev = seq.sparse.column(t - 1).into_owned();
    let l1l1 = bound_l1l1(synth.n, &x, &prev)
        .and_then(|b| noisy_from(b, RHO_L1L1))
        .unwrap_or(f64::NAN);
    let s0 = x.iter().filter(|v| v.abs() > NONZERO_TOL).count();
    let l1 = bound_l1(synth.n as f64, s0 as f64)
        .and_then(|b| noisy_from(b, RHO_L1))
        .unwrap_or(f64::NAN);
    [nl1, l1l1, l1]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(m_list: Vec<usize>) -> PhaseConfig {
        let mut cfg = PhaseConfig::new(60, vec![3], m_list, 2, 11);
        cfg.template.r = 2;
        cfg.template.d = 12;
        cfg.template.q = 3;
        cfg.template.cap = 4;
        cfg.j = 2;
        cfg
    }

    #[test]
    fn method_parsing_round_trips() {
        for m in [Method::Nl1, Method::L1l1, Method::L1] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("l2".parse::<Method>().is_err());
    }

    #[test]
    fn single_measurement_never_succeeds() {
        let grid = run_phase_grid(&small(vec![1])).unwrap();
        assert_eq!(grid.cells.len(), 1);
        assert_eq!(grid.cells[0].successes, 0);
    }

    #[test]
    fn grid_is_deterministic() {
        let cfg = small(vec![20, 60]);
        let a = run_phase_grid(&cfg).unwrap();
        let b = run_phase_grid(&cfg).unwrap();
        assert_eq!(a.cells, b.cells);
        assert_eq!(a.bounds.len(), 1);
        assert!(a.cells.iter().all(|c| c.successes <= c.trials));
    }

    #[test]
    fn rejects_bad_lists() {
        assert!(run_phase_grid(&small(vec![])).is_err());
        assert!(run_phase_grid(&small(vec![61])).is_err());
        let mut cfg = small(vec![10]);
        cfg.trials = 0;
        assert!(run_phase_grid(&cfg).is_err());
    }

    #[test]
    fn streams_are_distinct() {
        let a = trial_sequence_seed(5, 10, 0);
        let b = trial_sequence_seed(5, 10, 1);
        let c = trial_sequence_seed(5, 11, 0);
        assert!(a != b && a != c && b != c);
    }
}
