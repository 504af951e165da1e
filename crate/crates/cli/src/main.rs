use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use corpca::bounds::{bound_l1, bound_l1l1, bound_nl1, noisy_from, BoundInputs, NONZERO_TOL};
use corpca::error::{CorpcaError, Result};
use corpca::experiments::{run_phase_grid, Method, PhaseConfig};
use corpca::io::table::fmt_f64;
use corpca::io::video::parse_shape;
use corpca::io::{
    gen_video_sequence, load_masks, load_pgm_sequence, read_data_rows, separate_sequence, write_phase_csv,
    write_separation, write_table, write_video_sequence, RunMeta, SeparateConfig, VideoConfig,
};
use corpca::nalgebra::DVector;

#[derive(Parser, Debug)]
#[command(name = "corpca", version, about = "Compressive online robust PCA toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Nl1,
    L1l1,
    L1,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Nl1 => Method::Nl1,
            MethodArg::L1l1 => Method::L1l1,
            MethodArg::L1 => Method::L1,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte-Carlo success counts over a sparsity × measurement grid.
    Phase {
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        s0_list: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        m_list: Vec<usize>,
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 3)]
        j: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "nl1")]
        method: MethodArg,
        /// Grade every test column, not only the last.
        #[arg(long)]
        grade_all: bool,
    },
    /// Measurement bound for one sparsity level.
    Bound {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s0: usize,
        /// CSV with columns `x,z1,...,zJ`, one row per coordinate.
        #[arg(long)]
        prior_file: Option<PathBuf>,
        /// Noisy bound with this ρ; noiseless when omitted.
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, value_enum, default_value = "nl1")]
        mode: MethodArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Separate a PGM frame sequence into foreground and background.
    Separate {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        train: usize,
        #[arg(long)]
        j: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        masks: Option<PathBuf>,
    },
    /// Generate a synthetic video with a moving block.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: usize,
        /// Training frames.
        #[arg(long)]
        d: usize,
        /// Test frames.
        #[arg(long)]
        q: usize,
        /// Pixels in the moving block.
        #[arg(long)]
        s0: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Frame shape as `HxW`; defaults to a near 3:4 factorisation of n.
        #[arg(long)]
        shape: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        return report(&e);
    }
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn report(e: &CorpcaError) -> ExitCode {
    let msg = e.to_string().replace('\n', " ");
    eprintln!("error: kind={} message={msg}", e.kind());
    ExitCode::from(1)
}

fn init_threads() -> Result<()> {
    let Ok(text) = std::env::var("CORPCA_THREADS") else {
        return Ok(());
    };
    let threads: usize = text
        .trim()
        .parse()
        .map_err(|_| CorpcaError::InvalidInput(format!("CORPCA_THREADS={text:?} is not a count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CorpcaError::InvalidInput(e.to_string()))
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Phase {
            n,
            s0_list,
            m_list,
            trials,
            j,
            seed,
            out,
            method,
            grade_all,
        } => {
            let method = Method::from(method);
            let mut cfg = PhaseConfig::new(n, s0_list, m_list, trials, seed);
            cfg.j = j;
            cfg.methods = vec![method];
            cfg.grade_all = grade_all;
            let grid = run_phase_grid(&cfg)?;
            let solver = cfg.solver.clone().unwrap_or_else(|| corpca::solvers::SolverConfig::for_dimension(n));
            let meta = RunMeta::new(
                seed,
                &[
                    ("cmd", "phase".into()),
                    ("n", n.to_string()),
                    ("s0", join(&cfg.s0_list)),
                    ("m", join(&cfg.m_list)),
                    ("trials", trials.to_string()),
                    ("j", j.to_string()),
                    ("method", method.to_string()),
                    ("grade_all", grade_all.to_string()),
                    ("solver", solver.describe()),
                ],
            );
            write_phase_csv(&out, &grid, method, &meta)
        }
        Command::Bound {
            n,
            s0,
            prior_file,
            rho,
            mode,
            out,
        } => {
            let value = bound_value(n, s0, prior_file.as_deref(), rho, mode.into())?;
            let mode = Method::from(mode);
            let meta = RunMeta::new(
                0,
                &[
                    ("cmd", "bound".into()),
                    ("n", n.to_string()),
                    ("s0", s0.to_string()),
                    ("mode", mode.to_string()),
                    ("rho", rho.map_or("none".into(), |r| r.to_string())),
                    (
                        "prior_file",
                        prior_file.as_ref().map_or("none".into(), |p| p.display().to_string()),
                    ),
                ],
            );
            write_table(
                &out,
                &meta,
                &["mode", "n", "s0", "rho", "bound"],
                &[vec![
                    mode.to_string(),
                    n.to_string(),
                    s0.to_string(),
                    rho.map_or(String::new(), fmt_f64),
                    fmt_f64(value),
                ]],
            )
        }
        Command::Separate {
            frames,
            rate,
            train,
            j,
            seed,
            out,
            masks,
        } => {
            let mut seq = load_pgm_sequence(&frames, "*.pgm")?;
            if let Some(dir) = &masks {
                seq.masks = Some(load_masks(dir, "*.pgm", &seq)?);
            }
            let cfg = SeparateConfig::new(rate, train, j, seed);
            let run = separate_sequence(&seq, &cfg)?;
            let meta = RunMeta::new(
                seed,
                &[
                    ("cmd", "separate".into()),
                    ("n", seq.n().to_string()),
                    ("m", run.m.to_string()),
                    ("shape", format!("{}x{}", seq.height, seq.width)),
                    ("rate", rate.to_string()),
                    ("train", train.to_string()),
                    ("j", j.to_string()),
                    ("solver", cfg.solver_for(seq.n()).describe()),
                ],
            );
            write_separation(&out, &run, seq.width, seq.height, &meta)?;
            if let Some(d) = &run.detection {
                println!("mean_f1={} threshold={}", fmt_f64(d.mean_f1), fmt_f64(d.threshold));
            }
            Ok(())
        }
        Command::Synth {
            n,
            r,
            d,
            q,
            s0,
            seed,
            out,
            shape,
        } => {
            let mut cfg = VideoConfig::new(n, seed);
            if let Some(text) = shape {
                let (h, w) = parse_shape(&text)?;
                if h * w != n {
                    return Err(CorpcaError::InvalidInput(format!("shape {h}x{w} does not have n = {n} pixels")));
                }
                cfg.height = h;
                cfg.width = w;
            }
            cfg.r = r;
            cfg.train = d;
            cfg.test = q;
            cfg.block = s0;
            let video = gen_video_sequence(&cfg)?;
            let meta = RunMeta::new(
                seed,
                &[
                    ("cmd", "synth".into()),
                    ("n", n.to_string()),
                    ("shape", format!("{}x{}", cfg.height, cfg.width)),
                    ("r", r.to_string()),
                    ("d", d.to_string()),
                    ("q", q.to_string()),
                    ("s0", s0.to_string()),
                ],
            );
            write_video_sequence(&out, &video, d, &meta)
        }
    }
}

/// Reads `x` and the priors `z_1..z_J` from the columns of a CSV file.
fn read_prior_file(path: &Path, n: usize) -> Result<(DVector<f64>, Vec<DVector<f64>>)> {
    let rows = read_data_rows(path)?;
    if rows.len() != n {
        return Err(CorpcaError::Format {
            path: path.to_path_buf(),
            detail: format!("{} rows, expected n = {n}", rows.len()),
        });
    }
    let width = rows.first().map_or(0, Vec::len);
    let mut cols = vec![Vec::with_capacity(n); width];
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(CorpcaError::Format {
                path: path.to_path_buf(),
                detail: format!("row {} has {} fields, expected {width}", i + 1, row.len()),
            });
        }
        for (c, field) in row.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| CorpcaError::Format {
                path: path.to_path_buf(),
                detail: format!("row {} field {} is not a number: {field:?}", i + 1, c + 1),
            })?;
            cols[c].push(v);
        }
    }
    let mut cols = cols.into_iter().map(DVector::from_vec);
    let x = cols.next().ok_or_else(|| CorpcaError::Format {
        path: path.to_path_buf(),
        detail: "no columns".into(),
    })?;
    Ok((x, cols.collect()))
}

fn bound_value(n: usize, s0: usize, prior_file: Option<&Path>, rho: Option<f64>, mode: Method) -> Result<f64> {
    let noiseless = match (mode, prior_file) {
        (Method::L1, _) | (Method::Nl1, None) => bound_l1(n as f64, s0 as f64)?,
        (Method::L1l1, None) => {
            return Err(CorpcaError::InvalidInput("mode l1l1 needs --prior-file".into()));
        }
        (_, Some(path)) => {
            let (x, z) = read_prior_file(path, n)?;
            let support = x.iter().filter(|v| v.abs() > NONZERO_TOL).count();
            if support != s0 {
                return Err(CorpcaError::InvalidInput(format!(
                    "x in the prior file has {support} nonzeros, --s0 is {s0}"
                )));
            }
            if mode == Method::L1l1 {
                let z1 = z.first().ok_or_else(|| CorpcaError::InvalidInput("prior file has no prior column".into()))?;
                bound_l1l1(n, &x, z1)?
            } else {
                let beta = vec![1.0 / (z.len() + 1) as f64; z.len() + 1];
                let inp = BoundInputs::from_signal(&x, &z, &beta, 0.8, rho.unwrap_or(0.5))?;
                bound_nl1(&inp, false)?
            }
        }
    };
    match rho {
        Some(r) => noisy_from(noiseless, r),
        None => Ok(noiseless),
    }
}
