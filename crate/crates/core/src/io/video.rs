//! Synthetic surveillance-style sequences and frame-by-frame separation.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::pgm::{write_pgm, FrameSequence, PgmImage};
use super::table::{fmt_f64, write_roc_csv, write_table, RunMeta};
use crate::error::{invalid, Result};
use crate::experiments::{candidate_thresholds, gaussian_sensing, oracle_f1, roc_eval_slice, Confusion, RocPoint};
use crate::prox::SideInfoSet;
use crate::solvers::{bootstrap_prior, corpca_step, MeasurementModel, PcpConfig, Sensing, SolverConfig};

/// `(height, width)` with roughly a 3:4 aspect ratio: the divisor of `n`
/// closest to `√(3n/4)` is the height.
pub fn default_shape(n: usize) -> (usize, usize) {
    let target = (0.75 * n as f64).sqrt();
    let h = (1..=n)
        .filter(|h| n % h == 0)
        .min_by(|a, b| {
            let da = (*a as f64 - target).abs();
            let db = (*b as f64 - target).abs();
            da.total_cmp(&db)
        })
        .unwrap_or(1);
    (h, n / h)
}

/// Parses `HxW`.
pub fn parse_shape(text: &str) -> Result<(usize, usize)> {
    let (h, w) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| invalid(format!("shape {text:?} is not of the form HxW")))?;
    let h: usize = h.trim().parse().map_err(|_| invalid(format!("bad height in {text:?}")))?;
    let w: usize = w.trim().parse().map_err(|_| invalid(format!("bad width in {text:?}")))?;
    if h == 0 || w == 0 {
        return Err(invalid("shape dimensions must be positive"));
    }
    Ok((h, w))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoConfig {
    pub height: usize,
    pub width: usize,
    /// Rank of the background.
    pub r: usize,
    pub train: usize,
    pub test: usize,
    /// Pixels in the moving foreground block.
    pub block: usize,
    pub seed: u64,
}

impl VideoConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        let (height, width) = default_shape(n);
        VideoConfig {
            height,
            width,
            r: 3,
            train: 40,
            test: 40,
            block: 30,
            seed,
        }
    }

    pub fn n(&self) -> usize {
        self.height * self.width
    }

    /// Block height and width: the most square factorisation of `block`.
    pub fn block_shape(&self) -> (usize, usize) {
        let b = self.block;
        let bh = (1..=b).filter(|d| b % d == 0 && d * d <= b).max().unwrap_or(1);
        (bh, b / bh)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.train + self.test == 0 || self.block == 0 {
            return Err(invalid("rank, frame count and block size must be positive"));
        }
        let (bh, bw) = self.block_shape();
        if bh > self.height || bw > self.width {
            return Err(invalid(format!(
                "a {bh}x{bw} block does not fit a {}x{} frame",
                self.height, self.width
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct VideoSequence {
    /// Frames with their foreground masks.
    pub seq: FrameSequence,
    pub backgrounds: Vec<DVector<f64>>,
    /// Top-left `(row, col)` of the block per frame.
    pub positions: Vec<(usize, usize)>,
    pub block: (usize, usize),
}

/// Smooth nonnegative rank-`r` background in `[0, 0.5]` plus a bright block
/// of `block` pixels that moves and bounces off the borders.
pub fn gen_video_sequence(cfg: &VideoConfig) -> Result<VideoSequence> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (h, w) = (cfg.height, cfg.width);
    let n = cfg.n();
    let frames = cfg.train + cfg.test;

    // spatial patterns in [0, 1], column-major
    let patterns: Vec<DVector<f64>> = (0..cfg.r)
        .map(|k| {
            let fr = 0.5 + k as f64 * 0.5 + rng.random::<f64>();
            let fc = 0.5 + k as f64 * 0.5 + rng.random::<f64>();
            let (pr, pc) = (rng.random::<f64>() * PI, rng.random::<f64>() * PI);
            DVector::from_fn(n, |idx, _| {
                let (col, row) = (idx / h, idx % h);
                let a = (fr * PI * row as f64 / h as f64 + pr).cos();
                let b = (fc * PI * col as f64 / w as f64 + pc).cos();
                0.5 + 0.5 * a * b
            })
        })
        .collect();
    let phases: Vec<(f64, f64)> = (0..cfg.r)
        .map(|_| (20.0 + 40.0 * rng.random::<f64>(), 2.0 * PI * rng.random::<f64>()))
        .collect();

    let (bh, bw) = cfg.block_shape();
    let mut pos = (rng.random_range(0..=h - bh) as f64, rng.random_range(0..=w - bw) as f64);
    let mut vel = (
        if rng.random::<bool>() { 1.0 } else { -1.0 } * (1.0 + rng.random::<f64>()),
        if rng.random::<bool>() { 1.0 } else { -1.0 } * (1.0 + rng.random::<f64>()),
    );

    let mut out = Vec::with_capacity(frames);
    let mut masks = Vec::with_capacity(frames);
    let mut backgrounds = Vec::with_capacity(frames);
    let mut positions = Vec::with_capacity(frames);
    for t in 0..frames {
        let mut bg = DVector::zeros(n);
        for (p, &(period, phase)) in patterns.iter().zip(&phases) {
            let a = 0.5 / cfg.r as f64 * (0.8 + 0.2 * (2.0 * PI * t as f64 / period + phase).sin());
            bg.axpy(a, p, 1.0);
        }
        let (r0, c0) = (pos.0.round() as usize, pos.1.round() as usize);
        let mut frame = bg.clone();
        let mut mask = vec![false; n];
        for c in c0..c0 + bw {
            for r in r0..r0 + bh {
                frame[c * h + r] = 0.95;
                mask[c * h + r] = true;
            }
        }
        out.push(frame);
        masks.push(mask);
        backgrounds.push(bg);
        positions.push((r0, c0));

        let step = |p: f64, v: f64, hi: f64| -> (f64, f64) {
            let next = p + v;
            if next < 0.0 {
                (-next, -v)
            } else if next > hi {
                (2.0 * hi - next, -v)
            } else {
                (next, v)
            }
        };
        let (pr, vr) = step(pos.0, vel.0, (h - bh) as f64);
        let (pc, vc) = step(pos.1, vel.1, (w - bw) as f64);
        pos = (pr.clamp(0.0, (h - bh) as f64), pc.clamp(0.0, (w - bw) as f64));
        vel = (vr, vc);
    }
    Ok(VideoSequence {
        seq: FrameSequence {
            width: w,
            height: h,
            frames: out,
            masks: Some(masks),
        },
        backgrounds,
        positions,
        block: (bh, bw),
    })
}

/// Writes `frames/frame_NNNN.pgm`, `masks/mask_NNNN.pgm` (16-bit) and
/// `truth.csv` under `dir`.
pub fn write_video_sequence(dir: &Path, video: &VideoSequence, train: usize, meta: &RunMeta) -> Result<()> {
    let seq = &video.seq;
    let frames_dir = dir.join("frames");
    let masks_dir = dir.join("masks");
    fs::create_dir_all(&frames_dir)?;
    fs::create_dir_all(&masks_dir)?;
    for (t, frame) in seq.frames.iter().enumerate() {
        let img = PgmImage::from_vector(frame, seq.width, seq.height, u16::MAX)?;
        write_pgm(&frames_dir.join(format!("frame_{t:04}.pgm")), &img)?;
    }
    let mut rows = Vec::new();
    if let Some(masks) = &seq.masks {
        for (t, mask) in masks.iter().enumerate() {
            let v = DVector::from_iterator(mask.len(), mask.iter().map(|&b| if b { 1.0 } else { 0.0 }));
            let img = PgmImage::from_vector(&v, seq.width, seq.height, 255)?;
            write_pgm(&masks_dir.join(format!("mask_{t:04}.pgm")), &img)?;
        }
    }
    for (t, &(r, c)) in video.positions.iter().enumerate() {
        rows.push(vec![
            t.to_string(),
            if t < train { "train" } else { "test" }.to_string(),
            r.to_string(),
            c.to_string(),
            video.block.0.to_string(),
            video.block.1.to_string(),
        ]);
    }
    write_table(
        &dir.join("truth.csv"),
        meta,
        &["frame", "split", "block_row", "block_col", "block_height", "block_width"],
        &rows,
    )
}

#[derive(Debug, Clone)]
pub struct SeparateConfig {
    /// Measurement rate `m/n` in `(0, 1]`.
    pub rate: f64,
    /// Leading frames used to bootstrap the priors.
    pub train: usize,
    pub j: usize,
    pub seed: u64,
    /// `None` selects [`SolverConfig::for_dimension`] with a continuation
    /// floor scaled to unit-range pixels.
    pub solver: Option<SolverConfig>,
    pub pcp: PcpConfig,
    /// Maximum number of ROC thresholds.
    pub roc_points: usize,
}

impl SeparateConfig {
    pub fn new(rate: f64, train: usize, j: usize, seed: u64) -> Self {
        SeparateConfig {
            rate,
            train,
            j,
            seed,
            solver: None,
            pcp: PcpConfig::default(),
            roc_points: 256,
        }
    }

    pub fn solver_for(&self, n: usize) -> SolverConfig {
        self.solver.clone().unwrap_or_else(|| SolverConfig {
            mu_bar: 1e-2,
            ..SolverConfig::for_dimension(n)
        })
    }

    /// Measurement count for `n` pixels.
    pub fn measurements(&self, n: usize) -> Result<usize> {
        if !(self.rate > 0.0 && self.rate <= 1.0) || self.rate * (n as f64) < 1.0 {
            return Err(invalid(format!(
                "rate {} gives fewer than one measurement for n = {n} or exceeds 1",
                self.rate
            )));
        }
        Ok(((self.rate * n as f64).round() as usize).clamp(1, n))
    }
}

#[derive(Debug, Clone)]
pub struct FrameOutcome {
    /// Index of the frame in the input sequence.
    pub index: usize,
    pub x_hat: DVector<f64>,
    pub v_hat: DVector<f64>,
    /// `‖Φ(x̂ + v̂) − y‖₂ / ‖y‖₂`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Foreground detection scores against the ground-truth masks.
#[derive(Debug, Clone)]
pub struct Detection {
    /// Single threshold on `|x̂|` maximising the mean per-frame F1.
    pub threshold: f64,
    pub f1: Vec<f64>,
    pub mean_f1: f64,
    /// Pooled over all test frames.
    pub roc: Vec<RocPoint>,
}

#[derive(Debug, Clone)]
pub struct SeparationRun {
    pub m: usize,
    pub frames: Vec<FrameOutcome>,
    pub detection: Option<Detection>,
}

/// Bootstraps priors from the leading `train` frames, then separates every
/// later frame from `m = rate·n` measurements taken with one fixed `Φ`.
pub fn separate_sequence(seq: &FrameSequence, cfg: &SeparateConfig) -> Result<SeparationRun> {
    let n = seq.n();
    if cfg.train == 0 || cfg.train >= seq.len() {
        return Err(invalid(format!(
            "need 1 <= train < frames, got train = {} with {} frames",
            cfg.train,
            seq.len()
        )));
    }
    if let Some(masks) = &seq.masks {
        if masks.len() != seq.len() || masks.iter().any(|m| m.len() != n) {
            return Err(invalid("masks do not match the frames"));
        }
    }
    let m = cfg.measurements(n)?;
    let solver = cfg.solver_for(n);
    solver.validate()?;

    let phi = if m == n {
        Sensing::Identity(n)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Sensing::Dense(gaussian_sensing(m, n, &mut rng))
    };
    let training = DMatrix::from_columns(&seq.frames[..cfg.train]);
    let (mut prior, mut si) = bootstrap_prior(&training, &cfg.pcp, cfg.j)?;
    if si.dim() != n {
        si = SideInfoSet::zeros(n, cfg.j);
    }

    let mut frames = Vec::with_capacity(seq.len() - cfg.train);
    for (index, frame) in seq.frames.iter().enumerate().skip(cfg.train) {
        let y = phi.apply(frame);
        let meas = MeasurementModel::new(phi.clone(), y)?;
        let out = corpca_step(&meas, &si, &prior, &solver)?;
        let fit = meas.phi.apply(&(&out.result.x_hat + &out.result.v_hat)) - &meas.y;
        let residual = fit.norm() / meas.y.norm().max(f64::MIN_POSITIVE);
        frames.push(FrameOutcome {
            index,
            x_hat: out.result.x_hat,
            v_hat: out.result.v_hat,
            residual,
            iterations: out.result.iterations,
            converged: out.result.converged,
        });
        si = out.side_info;
        prior = out.prior;
    }

    let detection = match &seq.masks {
        Some(masks) => Some(detect(&frames, &masks[cfg.train..], cfg.roc_points)?),
        None => None,
    };
    Ok(SeparationRun { m, frames, detection })
}

fn detect(frames: &[FrameOutcome], masks: &[Vec<bool>], roc_points: usize) -> Result<Detection> {
    let scores: Vec<DVector<f64>> = frames.iter().map(|f| f.x_hat.map(f64::abs)).collect();
    let (threshold, mean_f1) = oracle_f1(&scores, masks, roc_points.max(2))?;
    let f1 = scores
        .iter()
        .zip(masks)
        .map(|(s, m)| Confusion::at(s.as_slice(), m, threshold).f1())
        .collect();
    let pooled: Vec<f64> = scores.iter().flat_map(|s| s.iter().cloned()).collect();
    let pooled_mask: Vec<bool> = masks.iter().flat_map(|m| m.iter().cloned()).collect();
    let roc = roc_eval_slice(&pooled, &pooled_mask, &candidate_thresholds(&pooled, roc_points.max(2)))?;
    Ok(Detection {
        threshold,
        f1,
        mean_f1,
        roc,
    })
}

/// `|x|` stretched to `[0, 1]`; constant inputs map to zero.
pub fn min_max_normalize(x: &DVector<f64>) -> DVector<f64> {
    let mags = x.map(f64::abs);
    let lo = mags.min();
    let hi = mags.max();
    if hi - lo <= 0.0 {
        return DVector::zeros(x.len());
    }
    mags.map(|v| (v - lo) / (hi - lo))
}

/// Writes `foreground_NNNN.pgm`, `background_NNNN.pgm`, `summary.csv` and,
/// when masks were available, `roc.csv` under `dir`.
pub fn write_separation(dir: &Path, run: &SeparationRun, width: usize, height: usize, meta: &RunMeta) -> Result<()> {
    fs::create_dir_all(dir)?;
    for f in &run.frames {
        let fg = PgmImage::from_vector(&min_max_normalize(&f.x_hat), width, height, 255)?;
        write_pgm(&dir.join(format!("foreground_{:04}.pgm", f.index)), &fg)?;
        let bg = PgmImage::from_vector(&f.v_hat, width, height, 255)?;
        write_pgm(&dir.join(format!("background_{:04}.pgm", f.index)), &bg)?;
    }
    let rows: Vec<Vec<String>> = run
        .frames
        .iter()
        .enumerate()
        .map(|(k, f)| {
            vec![
                f.index.to_string(),
                fmt_f64(f.residual),
                f.iterations.to_string(),
                f.converged.to_string(),
                run.detection.as_ref().map_or(String::new(), |d| fmt_f64(d.f1[k])),
            ]
        })
        .collect();
    write_table(
        &dir.join("summary.csv"),
        meta,
        &["frame", "residual", "iterations", "converged", "f1"],
        &rows,
    )?;
    if let Some(d) = &run.detection {
        write_roc_csv(&dir.join("roc.csv"), &d.roc, meta)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        assert_eq!(default_shape(4800), (60, 80));
        assert_eq!(parse_shape("12x16").unwrap(), (12, 16));
        assert!(parse_shape("12-16").is_err());
        let cfg = VideoConfig::new(4800, 1);
        assert_eq!(cfg.block_shape(), (5, 6));
    }

    #[test]
    fn generated_frames_match_masks() {
        let mut cfg = VideoConfig::new(300, 3);
        cfg.train = 4;
        cfg.test = 3;
        cfg.block = 6;
        let v = gen_video_sequence(&cfg).unwrap();
        let masks = v.seq.masks.as_ref().unwrap();
        for ((f, bg), m) in v.seq.frames.iter().zip(&v.backgrounds).zip(masks) {
            assert_eq!(m.iter().filter(|&&b| b).count(), 6);
            for i in 0..f.len() {
                if m[i] {
                    assert!((f[i] - bg[i]).abs() > 0.4);
                } else {
                    assert_eq!(f[i], bg[i]);
                }
            }
            assert!(bg.iter().all(|&x| (0.0..=0.5 + 1e-12).contains(&x)));
        }
        let bgs = DMatrix::from_columns(&v.backgrounds);
        let sv = bgs.singular_values();
        assert!(sv[cfg.r] < 1e-10 * sv[0]);
    }

    #[test]
    fn rate_and_train_checks() {
        let cfg = SeparateConfig::new(1e-4, 2, 1, 0);
        assert!(cfg.measurements(100).is_err());
        assert_eq!(SeparateConfig::new(0.4, 2, 1, 0).measurements(100).unwrap(), 40);
        let seq = FrameSequence {
            width: 2,
            height: 2,
            frames: vec![DVector::zeros(4); 3],
            masks: None,
        };
        assert!(separate_sequence(&seq, &SeparateConfig::new(1.0, 3, 1, 0)).is_err());
    }
}
