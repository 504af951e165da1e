//! Synthetic data, Monte-Carlo phase-transition grids and ROC evaluation.

mod phase;
mod roc;
mod synth;

pub use phase::{run_phase_grid, trial_sensing, trial_sequence_seed, BoundRow, Method, PhaseCell, PhaseConfig, PhaseGrid};
pub use roc::{candidate_thresholds, oracle_f1, roc_auc, roc_eval, roc_eval_slice, Confusion, RocPoint};
pub use synth::{gaussian_sensing, gen_sequence, FactorKind, Sequence, SynthConfig};
