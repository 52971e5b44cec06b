use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use lie_events::ekf::{run_filter, DisplacementPrior, FilterConfig, OraclePrior};
use lie_events::events::EventGenConfig;
use lie_events::io::{self, EventRecord};
use lie_events::lie::{Manifold, Rotation3};
use lie_events::metrics::{align_umeyama, AlignedTrajectoryPair, MetricsReport, RteMode};
use lie_events::nalgebra::Vector3;
use lie_events::par::Execution;
use lie_events::perf;
use lie_events::pipeline::{window_events, window_starts};
use lie_events::preint::ImuCalibration;
use lie_events::synth::{run_toy_experiment, toy_windows, walk_dataset, NoiseSpec, ToyConfig, ToyReference};
use lie_events::traj::{Trajectory, TrajectorySample};

mod config;

use config::{CalibFile, Config};

#[derive(Parser)]
#[command(name = "lie-events", version, about = "Lie-event generation, toy experiment, EKF and metrics")]
struct Cli {
    /// TOML file with defaults (theta, bins, window, update_rate, manifold, seed).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run without the thread pool.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum V0Source {
    Gt,
    Zero,
    File,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ManifoldArg {
    R3,
    So3xr3,
    Se3,
}

impl From<ManifoldArg> for Manifold {
    fn from(m: ManifoldArg) -> Self {
        match m {
            ManifoldArg::R3 => Manifold::R3,
            ManifoldArg::So3xr3 => Manifold::SO3xR3,
            ManifoldArg::Se3 => Manifold::SE3,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReferenceArg {
    Preint,
    Gt,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlignArg {
    None,
    Umeyama,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RteModeArg {
    Yaw,
    Identity,
}

#[derive(Subcommand)]
enum Command {
    /// Convert an IMU log into Lie events, one window at a time.
    Convert {
        #[arg(long)]
        imu: PathBuf,
        /// Ground-truth CSV, needed for --v0-source gt.
        #[arg(long)]
        gt: Option<PathBuf>,
        /// TOML calibration (bias_gyro, bias_accel, gravity, gravity_frame).
        #[arg(long)]
        calib: Option<PathBuf>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, value_enum)]
        manifold: Option<ManifoldArg>,
        #[arg(long)]
        window: Option<f64>,
        #[arg(long, value_enum, default_value = "zero")]
        v0_source: V0Source,
        /// CSV `t,vx,vy,vz` for --v0-source file.
        #[arg(long)]
        v0_file: Option<PathBuf>,
        #[arg(long)]
        bins: Option<usize>,
        /// Also write the per-window stacks as CSV.
        #[arg(long)]
        stacks: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Chamfer report of the time-reparametrization experiment.
    Toy {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 2.0])]
        alphas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.005, 0.01, 0.02])]
        thetas: Vec<f64>,
        #[arg(long, value_enum, default_value = "both")]
        reference: ReferenceArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 100)]
        windows: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Clone-state EKF over an IMU log.
    Ekf {
        #[arg(long)]
        imu: PathBuf,
        /// Ground truth: initial state and, for the oracle prior, displacements.
        #[arg(long)]
        gt: PathBuf,
        /// `oracle:<sigma>` or `none`.
        #[arg(long, default_value = "oracle:0.05")]
        prior: String,
        #[arg(long)]
        update_rate: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        theta: Option<f64>,
        /// Skip building events for the oracle prior (it does not read them).
        #[arg(long)]
        no_events: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trajectory metrics of an estimate against ground truth.
    Metrics {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        rte_window: f64,
        #[arg(long, value_enum, default_value = "yaw")]
        rte_mode: RteModeArg,
        #[arg(long, value_enum, default_value = "none")]
        align: AlignArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-event timing of generation and stacking on a synthetic walk.
    Bench {
        #[arg(long, default_value_t = 60)]
        windows: usize,
        #[arg(long, default_value_t = 200.0)]
        rate: f64,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic walk as IMU and ground-truth CSV.
    Synth {
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
        #[arg(long, default_value_t = 200.0)]
        rate: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Add the default sensor noise and a small constant bias.
        #[arg(long)]
        noisy: bool,
        #[arg(long)]
        imu: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
}

fn writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    let exec = if cli.sequential { Execution::Sequential } else { Execution::available() };
    match cli.cmd {
        Command::Convert {
            imu,
            gt,
            calib,
            theta,
            manifold,
            window,
            v0_source,
            v0_file,
            bins,
            stacks,
            out,
        } => {
            let ev_cfg = EventGenConfig::new(cfg.theta(theta), cfg.manifold(manifold.map(Into::into))?);
            ev_cfg.crossing().validate()?;
            let calib = match calib {
                Some(p) => CalibFile::load(&p)?,
                None => ImuCalibration::default(),
            };
            let opts = ConvertOptions {
                window: cfg.window(window),
                bins: cfg.bins(bins),
                v0_source,
                gt: gt.map(|p| io::read_trajectory_csv(&p)).transpose()?,
                v0_file: v0_file.map(|p| io::read_velocity_csv(&p)).transpose()?,
            };
            let raws = io::read_imu_csv(&imu)?;
            convert(&raws, &calib, &ev_cfg, &opts, &out, stacks.as_deref())
        }
        Command::Toy {
            alphas,
            thetas,
            reference,
            seed,
            windows,
            out,
        } => {
            ensure!(windows > 0, "--windows must be positive");
            let seed = cfg.seed(seed);
            let mut noise = NoiseSpec::default().sensor_only();
            noise.seed = seed;
            let toy = ToyConfig {
                alphas,
                thetas,
                references: match reference {
                    ReferenceArg::Preint => vec![ToyReference::Preintegration],
                    ReferenceArg::Gt => vec![ToyReference::GroundTruth],
                    ReferenceArg::Both => vec![ToyReference::Preintegration, ToyReference::GroundTruth],
                },
                noise,
                exec,
                ..ToyConfig::default()
            };
            let wins = toy_windows(seed, windows, 1.0)?;
            let rows = run_toy_experiment(&wins, &toy)?;
            match out {
                Some(p) => {
                    let mut w = writer(&p)?;
                    io::write_toy_csv(&mut w, &rows)?;
                    w.flush()?;
                }
                None => io::write_toy_csv(std::io::stdout().lock(), &rows)?,
            }
            Ok(())
        }
        Command::Ekf {
            imu,
            gt,
            prior,
            update_rate,
            seed,
            theta,
            no_events,
            out,
        } => {
            let raws = io::read_imu_csv(&imu)?;
            let gt = io::read_trajectory_csv(&gt)?;
            let init = gt
                .interpolate(raws[0].t)
                .with_context(|| format!("ground truth does not cover the first IMU time {}", raws[0].t))?;
            let init = TrajectorySample::new(init.t, init.rotation, init.position, init.velocity);
            let fc = FilterConfig {
                update_rate: cfg.update_rate(update_rate),
                window: cfg.window(None),
                bins: cfg.bins(None),
                events: EventGenConfig::new(cfg.theta(theta), cfg.manifold(None)?),
                ..FilterConfig::default()
            };
            let mut oracle = parse_prior(&prior, gt, cfg.seed(seed))?;
            if no_events {
                oracle = oracle.map(OraclePrior::without_events);
            }
            let est = run_filter(&raws, &init, oracle.as_mut().map(|o| o as &mut dyn DisplacementPrior), &fc)?;
            io::save_trajectory_csv(&out, &est)?;
            Ok(())
        }
        Command::Metrics {
            est,
            gt,
            rte_window,
            rte_mode,
            align,
            out,
        } => {
            let est = io::read_trajectory_csv(&est)?;
            let gt = io::read_trajectory_csv(&gt)?;
            let mut pair = AlignedTrajectoryPair::associate(&est, &gt)?;
            if let AlignArg::Umeyama = align {
                align_umeyama(&mut pair, false)?;
            }
            let mode = match rte_mode {
                RteModeArg::Yaw => RteMode::YawCompensated,
                RteModeArg::Identity => RteMode::Identity,
            };
            let report = MetricsReport::compute(&pair, rte_window, mode)?;
            let text = serde_json::to_string_pretty(&report)?;
            match out {
                Some(p) => std::fs::write(&p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
                None => println!("{text}"),
            }
            Ok(())
        }
        Command::Bench {
            windows,
            rate,
            runs,
            seed,
            theta,
            out,
        } => {
            ensure!(windows > 0, "--windows must be positive");
            let fixture = perf::walk_fixture(cfg.seed(seed), windows, rate)?;
            let ev = EventGenConfig::new(cfg.theta(theta), cfg.manifold(None)?);
            let report = perf::run_bench(&fixture, &ev, cfg.bins(None), runs)?;
            println!("{}", report.summary());
            if let Some(p) = out {
                std::fs::write(&p, serde_json::to_string_pretty(&report)? + "\n")
                    .with_context(|| format!("writing {}", p.display()))?;
            }
            Ok(())
        }
        Command::Synth {
            duration,
            rate,
            seed,
            noisy,
            imu,
            gt,
        } => {
            let (raws, truth) = walk_dataset(cfg.seed(seed), duration, rate, noisy)?;
            io::save_imu_csv(&imu, &raws)?;
            io::save_trajectory_csv(&gt, &truth)?;
            Ok(())
        }
    }
}

fn parse_prior(spec: &str, gt: Trajectory, seed: u64) -> Result<Option<OraclePrior>> {
    if spec == "none" {
        return Ok(None);
    }
    let Some(sigma) = spec.strip_prefix("oracle:") else {
        bail!("unknown prior '{spec}' (expected oracle:<sigma> or none)");
    };
    let sigma: f64 = sigma.parse().with_context(|| format!("bad oracle sigma '{sigma}'"))?;
    Ok(Some(OraclePrior::new(gt, sigma, seed)?))
}

struct ConvertOptions {
    window: f64,
    bins: usize,
    v0_source: V0Source,
    gt: Option<Trajectory>,
    v0_file: Option<Trajectory>,
}

fn convert(
    raws: &[lie_events::preint::RawImuSample],
    calib: &ImuCalibration,
    ev: &EventGenConfig,
    opts: &ConvertOptions,
    out: &Path,
    stacks: Option<&Path>,
) -> Result<()> {
    ensure!(opts.window > 0.0, "--window must be positive");
    ensure!(opts.bins > 0, "--bins must be positive");
    let windows = window_starts(raws, opts.window);
    ensure!(!windows.is_empty(), "IMU log is shorter than one {} s window", opts.window);
    let mut w = writer(out)?;
    let mut sw = match stacks {
        Some(p) => {
            let mut f = writer(p)?;
            writeln!(f, "{}", io::STACK_HEADER)?;
            Some(f)
        }
        None => None,
    };
    for (k, &(i, j)) in windows.iter().enumerate() {
        let slice = &raws[i..j];
        let t = slice[0].t;
        let (rot, v0) = match opts.v0_source {
            V0Source::Gt => {
                let gt = opts.gt.as_ref().context("--v0-source gt needs --gt")?;
                let s = gt.interpolate(t).with_context(|| format!("ground truth does not cover t = {t}"))?;
                let rg_t = Rotation3::from_yaw(s.rotation.yaw()).transpose();
                (rg_t.compose(&s.rotation), rg_t.rotate(&s.velocity))
            }
            V0Source::Zero => (calib.gravity_frame, Vector3::zeros()),
            V0Source::File => {
                let f = opts.v0_file.as_ref().context("--v0-source file needs --v0-file")?;
                let s = f.interpolate(t).with_context(|| format!("velocity file does not cover t = {t}"))?;
                (calib.gravity_frame, s.velocity)
            }
        };
        let we = window_events(slice, rot, v0, calib, ev).with_context(|| format!("window {k} starting at t = {t}"))?;
        let recs: Vec<EventRecord> = we.events.iter().map(EventRecord::from).collect();
        io::write_event_log(&mut w, &recs)?;
        if let Some(f) = sw.as_mut() {
            io::write_stack_rows(&mut *f, k, &we.stack(opts.bins))?;
        }
    }
    w.flush()?;
    if let Some(mut f) = sw {
        f.flush()?;
    }
    Ok(())
}
