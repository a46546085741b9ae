//! Monte-Carlo convergence study on coupled Brownian paths.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{ModelSpec, ProblemModel};
use crate::noise::{coarsen, sample_tape, IncrementTape};
use crate::operators::TimeScheme;
use crate::spectral::{power_decay_field, sobolev_norm, ModeSet, SpectralField};
use crate::stepper::{Stepper, StepperConfig, Variant};

use super::report::write_csv;
use super::{aggregate_maxima, estimate_rate, RateEstimate};

/// Errors at or below this level count as exact.
const ROUND_OFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// `K = 2⁸`, 50 samples, `h_ref = 2⁻¹²`.
    Desk,
    /// `K = 2¹⁰`, 100 samples, `h_ref = 2⁻¹⁴`.
    Paper,
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            _ => Err(Error::InvalidArgument(format!(
                "unknown scale '{s}' (expected desk or paper)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub model: ModelSpec,
    pub modes: usize,
    pub horizon: f64,
    /// Step sizes of the compared schemes.
    pub steps: Vec<f64>,
    pub h_ref: f64,
    pub samples: usize,
    /// Moment of the pathwise maximum.
    pub p: f64,
    pub seed: u64,
    /// Decay exponent `q` of the initial datum `ξ_ℓ = (1+|ℓ|^q)^{-1}`.
    pub initial_decay: f64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl StudyConfig {
    pub fn preset(scale: Scale, model: ModelSpec) -> Self {
        let (modes, samples, h_ref) = match scale {
            Scale::Desk => (1 << 8, 50, 2f64.powi(-12)),
            Scale::Paper => (1 << 10, 100, 2f64.powi(-14)),
        };
        StudyConfig {
            model,
            modes,
            horizon: 0.5,
            steps: (5..=9).map(|n| 2f64.powi(-n)).collect(),
            h_ref,
            samples,
            p: 2.0,
            seed: 1,
            initial_decay: 6.0,
            threads: None,
        }
    }

    /// Step sizes sorted from largest to smallest.
    pub fn sorted_steps(&self) -> Vec<f64> {
        let mut hs = self.steps.clone();
        hs.sort_by(|a, b| b.total_cmp(a));
        hs.dedup();
        hs
    }

    pub fn validate(&self) -> Result<()> {
        ModeSet::new(self.modes)?;
        if self.samples == 0 {
            return Err(Error::InvalidArgument("samples must be at least 1".into()));
        }
        if self.steps.is_empty() {
            return Err(Error::InvalidArgument("at least one step size is required".into()));
        }
        if !(self.p >= 2.0) {
            return Err(Error::InvalidArgument(format!("p = {} must be at least 2", self.p)));
        }
        if !(self.horizon > 0.0) || !(self.h_ref > 0.0) {
            return Err(Error::InvalidArgument("horizon and h_ref must be positive".into()));
        }
        ratio(self.horizon, self.h_ref, "h_ref", "T")?;
        let finest = *self.sorted_steps().last().unwrap();
        for &h in &self.steps {
            ratio(h, self.h_ref, "h_ref", &format!("step {h}"))?;
            ratio(self.horizon, h, &format!("step {h}"), "T")?;
            ratio(h, finest, &format!("smallest step {finest}"), &format!("step {h}"))?;
        }
        Ok(())
    }

    /// Fully resolved configuration, one `key = value` per line.
    pub fn describe(&self) -> String {
        let steps: Vec<String> = self.sorted_steps().iter().map(|h| format_step(*h)).collect();
        let mut s = String::new();
        let _ = writeln!(s, "model = {}", self.model.kind);
        let _ = writeln!(s, "bump_width = {}", self.model.bump_width);
        let _ = writeln!(s, "noise_exponent = {}", self.model.noise_exponent);
        let _ = writeln!(s, "noise_scale = {}", self.model.noise_scale);
        let _ = writeln!(s, "grid_factor = {}", self.model.grid_factor);
        let _ = writeln!(s, "custom_profile = {}", self.model.profile.is_some());
        let _ = writeln!(s, "modes = {}", self.modes);
        let _ = writeln!(s, "horizon = {}", self.horizon);
        let _ = writeln!(s, "steps = {}", steps.join(","));
        let _ = writeln!(s, "href = {}", format_step(self.h_ref));
        let _ = writeln!(s, "samples = {}", self.samples);
        let _ = writeln!(s, "p = {}", self.p);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "initial_decay = {}", self.initial_decay);
        s
    }
}

/// `2^-n` for exact powers of two, the decimal value otherwise.
pub(crate) fn format_step(h: f64) -> String {
    let n = -h.log2();
    if n.fract() == 0.0 && 2f64.powf(-n) == h {
        format!("2^-{n}")
    } else {
        format!("{h}")
    }
}

fn ratio(coarse: f64, fine: f64, fine_name: &str, coarse_name: &str) -> Result<usize> {
    let r = coarse / fine;
    let n = r.round();
    if n < 1.0 || (n - r).abs() > 1e-9 * r {
        return Err(Error::InvalidArgument(format!(
            "{fine_name} must divide {coarse_name} ({fine} vs {coarse})"
        )));
    }
    Ok(n as usize)
}

/// Exponential Euler at the tape resolution; returns every state `u_0..u_M`.
pub fn reference_trajectory(
    model: &dyn ProblemModel,
    xi: &SpectralField,
    tape: &IncrementTape,
    horizon: f64,
) -> Result<Vec<SpectralField>> {
    reference_snapshots(model, xi, tape, horizon, 1)
}

/// Exponential Euler at the tape resolution, keeping every `stride`-th state.
fn reference_snapshots(
    model: &dyn ProblemModel,
    xi: &SpectralField,
    tape: &IncrementTape,
    horizon: f64,
    stride: usize,
) -> Result<Vec<SpectralField>> {
    let config = StepperConfig::for_horizon(
        Variant::new(TimeScheme::Exponential, false),
        tape.step_size(),
        horizon,
    )?;
    let mut out = Vec::with_capacity(config.steps / stride + 1);
    Stepper::new(model, config).run_with(xi, tape, |j, u| {
        if j % stride == 0 {
            out.push(u.clone());
        }
    })?;
    Ok(out)
}

/// Per-sample pathwise maxima, indexed `[step][variant]`.
struct SampleResult {
    errors: Vec<[f64; 6]>,
    h2: Vec<[f64; 6]>,
}

fn run_sample(
    cfg: &StudyConfig,
    model: &dyn ProblemModel,
    xi: &SpectralField,
    hs: &[f64],
    index: u64,
) -> Result<SampleResult> {
    let fine_steps = ratio(cfg.horizon, cfg.h_ref, "h_ref", "T")?;
    let tape = sample_tape(model.noise(), cfg.h_ref, fine_steps, cfg.seed, index)?;
    let finest = *hs.last().unwrap();
    let stride = ratio(finest, cfg.h_ref, "h_ref", "smallest step")?;
    let reference = reference_snapshots(model, xi, &tape, cfg.horizon, stride)?;

    let mut errors = Vec::with_capacity(hs.len());
    let mut h2 = Vec::with_capacity(hs.len());
    for &h in hs {
        let coarse = coarsen(&tape, ratio(h, cfg.h_ref, "h_ref", "step")?)?;
        let skip = ratio(h, finest, "smallest step", "step")?;
        let mut err_row = [0.0; 6];
        let mut h2_row = [0.0; 6];
        for (v, variant) in Variant::ALL.iter().enumerate() {
            let config = StepperConfig::for_horizon(*variant, h, cfg.horizon)?;
            let (mut worst, mut peak): (f64, f64) = (0.0, 0.0);
            let mut failure = None;
            Stepper::new(model, config).run_with(xi, &coarse, |j, u| {
                peak = peak.max(sobolev_norm(u, 2.0));
                if j > 0 {
                    match u.minus(&reference[j * skip]) {
                        Ok(d) => worst = worst.max(d.l2_norm()),
                        Err(e) => failure = Some(e),
                    }
                }
            })?;
            if let Some(e) = failure {
                return Err(e);
            }
            err_row[v] = worst;
            h2_row[v] = peak;
        }
        errors.push(err_row);
        h2.push(h2_row);
    }
    Ok(SampleResult { errors, h2 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantRates {
    pub variant: Variant,
    /// `None` when the errors are at round-off level or no slope is defined.
    pub rate: Option<RateEstimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub config: StudyConfig,
    /// Step sizes, largest first.
    pub hs: Vec<f64>,
    /// Aggregated pathwise uniform errors `[step][variant]`.
    pub errors: Vec<[f64; 6]>,
    /// Aggregated `max_j ‖u_j‖_{H²}` `[step][variant]`, same moment as the errors.
    pub stability: Vec<[f64; 6]>,
    pub rates: Vec<VariantRates>,
    pub samples_completed: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutcome {
    pub report: ErrorReport,
    /// Set when a cancellation request stopped the study early.
    pub interrupted: bool,
}

impl ErrorReport {
    pub fn error(&self, h_index: usize, variant: Variant) -> f64 {
        self.errors[h_index][variant_index(variant)]
    }

    pub fn rate(&self, variant: Variant) -> Option<RateEstimate> {
        self.rates[variant_index(variant)].rate
    }

    pub fn to_csv(&self) -> String {
        write_csv(&self.hs, &self.errors)
    }

    /// Plain-text summary. Deterministic: wall time is kept out of it.
    pub fn to_text(&self) -> String {
        let mut s = String::from("hyperspde convergence study\n\n[config]\n");
        s.push_str(&self.config.describe());
        let _ = writeln!(
            s,
            "\nsamples completed: {} of {}",
            self.samples_completed, self.config.samples
        );
        s.push_str("\n[rates]\nvariant  full     restricted (three largest steps)\n");
        for r in &self.rates {
            match r.rate {
                Some(rate) => {
                    let _ = writeln!(s, "{:<8} {:<8.4} {:.4}", r.variant.label(), rate.full, rate.restricted);
                }
                None => {
                    let _ = writeln!(s, "{:<8} {:<8} -", r.variant.label(), "-");
                }
            }
        }
        s.push_str("\n[stability: moment of max_j ||u_j||_H2]\nStepsize");
        for v in Variant::ALL {
            let _ = write!(s, " {:>11}", v.label());
        }
        s.push('\n');
        for (h, row) in self.hs.iter().zip(&self.stability) {
            let _ = write!(s, "{:<8}", format_step(*h));
            for x in row {
                let _ = write!(s, " {x:>11.5e}");
            }
            s.push('\n');
        }
        s
    }

    /// Writes `errors.csv`, `report.txt` and `timing.txt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("errors.csv"), self.to_csv())?;
        std::fs::write(dir.join("report.txt"), self.to_text())?;
        std::fs::write(
            dir.join("timing.txt"),
            format!("wall_time_seconds = {:.3}\n", self.elapsed.as_secs_f64()),
        )?;
        Ok(())
    }
}

fn variant_index(variant: Variant) -> usize {
    Variant::ALL.iter().position(|v| *v == variant).unwrap()
}

/// Runs the full study. Samples are independent and may run in parallel;
/// results do not depend on scheduling. If `cancel` is raised, samples not
/// yet started are skipped and the report covers the completed ones.
pub fn run_study(cfg: &StudyConfig, cancel: Option<&AtomicBool>) -> Result<StudyOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let modes = ModeSet::new(cfg.modes)?;
    let model = cfg.model.build(modes)?;
    let xi = power_decay_field(cfg.initial_decay, modes);
    let hs = cfg.sorted_steps();
    let done = AtomicUsize::new(0);

    let work = || -> Vec<Option<Result<SampleResult>>> {
        (0..cfg.samples as u64)
            .into_par_iter()
            .map(|n| {
                if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
                    return None;
                }
                let out = run_sample(cfg, model.as_ref(), &xi, &hs, n);
                done.fetch_add(1, Ordering::Relaxed);
                Some(out)
            })
            .collect()
    };
    let results = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut completed = Vec::with_capacity(results.len());
    for r in results.into_iter().flatten() {
        completed.push(r?);
    }
    let interrupted = completed.len() < cfg.samples;
    if completed.is_empty() {
        return Err(Error::Interrupted {
            completed: 0,
            requested: cfg.samples,
        });
    }

    let mut errors = vec![[0.0; 6]; hs.len()];
    let mut stability = vec![[0.0; 6]; hs.len()];
    for k in 0..hs.len() {
        for v in 0..6 {
            let e: Vec<f64> = completed.iter().map(|s| s.errors[k][v]).collect();
            let n: Vec<f64> = completed.iter().map(|s| s.h2[k][v]).collect();
            errors[k][v] = aggregate_maxima(&e, cfg.p)?;
            stability[k][v] = aggregate_maxima(&n, cfg.p)?;
        }
    }
    let rates = Variant::ALL
        .iter()
        .enumerate()
        .map(|(v, &variant)| {
            let column: Vec<f64> = errors.iter().map(|row| row[v]).collect();
            VariantRates {
                variant,
                rate: if hs.len() >= 2 && column.iter().any(|&e| e > ROUND_OFF) {
                    estimate_rate(&hs, &column).ok()
                } else {
                    None
                },
            }
        })
        .collect();

    Ok(StudyOutcome {
        report: ErrorReport {
            config: cfg.clone(),
            hs,
            errors,
            stability,
            rates,
            samples_completed: completed.len(),
            elapsed: start.elapsed(),
        },
        interrupted,
    })
}
