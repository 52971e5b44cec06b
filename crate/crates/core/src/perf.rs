//! Per-event timing of event generation and stacking.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::events::{generate_events, EventGenConfig, EventError, LieEvent};
use crate::lie::Pose;
use crate::preint::{correct_samples, preintegrate, CorrectedImuSample, ImuCalibration, PreintegrationPath};
use crate::stack::build_stack;
use crate::synth::{random_walk, synthesize_imu, NoiseSpec, SynthError, WalkConfig};

/// A pre-integrated window ready for event generation.
#[derive(Clone, Debug)]
pub struct BenchWindow {
    pub path: PreintegrationPath,
    pub corrected: Vec<CorrectedImuSample>,
}

/// `count` one-second windows of a synthetic walk at `rate` Hz.
pub fn walk_fixture(seed: u64, count: usize, rate: f64) -> Result<Vec<BenchWindow>, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = WalkConfig {
        duration: count as f64 + 1.0,
        ..WalkConfig::default()
    };
    let walk = random_walk(&mut rng, &cfg)?;
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let w = walk.window(walk.start() + k as f64, 1.0)?;
        let raws = synthesize_imu(&w, rate, &NoiseSpec::zero(), &mut rng)?;
        let st = w.state(w.start());
        let calib = ImuCalibration::default();
        let path = preintegrate(&raws, &Pose::se3(st.pose.rotation, st.pose.translation), st.velocity, &calib)
            .map_err(SynthError::Preint)?;
        out.push(BenchWindow {
            path,
            corrected: correct_samples(&raws, &calib),
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRun {
    pub events: usize,
    pub generate_us_per_event: f64,
    pub stack_us_per_event: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub windows: usize,
    pub events: usize,
    /// Median over runs.
    pub generate_us_per_event: f64,
    pub stack_us_per_event: f64,
    /// Standard deviation over mean of the per-run generation timings.
    pub generate_cv: f64,
    pub stack_cv: f64,
    pub runs: Vec<BenchRun>,
}

impl BenchReport {
    pub fn summary(&self) -> String {
        format!(
            "windows={} events={} generate_us_per_event={:.3} stack_us_per_event={:.3} generate_cv={:.3} stack_cv={:.3}",
            self.windows,
            self.events,
            self.generate_us_per_event,
            self.stack_us_per_event,
            self.generate_cv,
            self.stack_cv
        )
    }
}

fn cv(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if mean > 0.0 {
        var.sqrt() / mean
    } else {
        0.0
    }
}

fn median(xs: &[f64]) -> f64 {
    crate::metrics::median(xs).unwrap_or(f64::NAN)
}

/// Times `runs` sequential passes over `windows`; each pass generates all
/// events, then stacks them.
pub fn run_bench(windows: &[BenchWindow], cfg: &EventGenConfig, bins: usize, runs: usize) -> Result<BenchReport, EventError> {
    let runs = runs.max(1);
    // warm-up pass
    let mut events: Vec<Vec<LieEvent>> = windows
        .iter()
        .map(|w| generate_events(&w.path, &w.corrected, cfg))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(runs);
    for _ in 0..runs {
        let t = Instant::now();
        for (w, ev) in windows.iter().zip(events.iter_mut()) {
            *ev = generate_events(&w.path, &w.corrected, cfg)?;
        }
        let gen = t.elapsed().as_secs_f64();
        let total: usize = events.iter().map(Vec::len).sum();
        let t = Instant::now();
        let mut sink = 0.0;
        for ev in &events {
            let s = build_stack(ev, bins);
            sink += s.data[0];
        }
        let stk = t.elapsed().as_secs_f64();
        std::hint::black_box(sink);
        let n = total.max(1) as f64;
        out.push(BenchRun {
            events: total,
            generate_us_per_event: gen * 1e6 / n,
            stack_us_per_event: stk * 1e6 / n,
        });
    }
    let g: Vec<f64> = out.iter().map(|r| r.generate_us_per_event).collect();
    let s: Vec<f64> = out.iter().map(|r| r.stack_us_per_event).collect();
    Ok(BenchReport {
        windows: windows.len(),
        events: out[0].events,
        generate_us_per_event: median(&g),
        stack_us_per_event: median(&s),
        generate_cv: cv(&g),
        stack_cv: cv(&s),
        runs: out,
    })
}
