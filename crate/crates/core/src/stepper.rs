//! Euler- and Milstein-type steppers built on a rational scheme `R_h`.
//!
//! One step is `u ↦ R_h(u + hF(t,u) + G(u)ΔW [+ (G′G)(u)Δ₂W])`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::models::ProblemModel;
use crate::noise::{coarsen, IncrementTape};
use crate::operators::TimeScheme;
use crate::spectral::SpectralField;

/// A scheme together with the choice of noise expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Variant {
    pub scheme: TimeScheme,
    pub milstein: bool,
}

impl Variant {
    /// CSV column order.
    pub const ALL: [Variant; 6] = [
        Variant::new(TimeScheme::Exponential, false),
        Variant::new(TimeScheme::CrankNicolson, false),
        Variant::new(TimeScheme::ImplicitEuler, false),
        Variant::new(TimeScheme::Exponential, true),
        Variant::new(TimeScheme::CrankNicolson, true),
        Variant::new(TimeScheme::ImplicitEuler, true),
    ];

    pub const fn new(scheme: TimeScheme, milstein: bool) -> Self {
        Variant { scheme, milstein }
    }

    pub fn label(&self) -> &'static str {
        match (self.scheme, self.milstein) {
            (TimeScheme::Exponential, false) => "EXE",
            (TimeScheme::CrankNicolson, false) => "CNE",
            (TimeScheme::ImplicitEuler, false) => "LIE",
            (TimeScheme::Exponential, true) => "EXM",
            (TimeScheme::CrankNicolson, true) => "CNM",
            (TimeScheme::ImplicitEuler, true) => "LIM",
        }
    }

    pub fn from_label(label: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.label() == label)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub variant: Variant,
    pub h: f64,
    pub steps: usize,
}

impl StepperConfig {
    pub fn new(variant: Variant, h: f64, steps: usize) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidArgument(format!("step size {h} must be positive")));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("at least one step is required".into()));
        }
        Ok(StepperConfig { variant, h, steps })
    }

    /// `M = T/h`, rejecting step sizes that do not divide `T`.
    pub fn for_horizon(variant: Variant, h: f64, horizon: f64) -> Result<Self> {
        let steps = (horizon / h).round();
        if !(steps >= 1.0) || (steps * h - horizon).abs() > 1e-12 * horizon.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "step size {h} does not divide the horizon {horizon}"
            )));
        }
        StepperConfig::new(variant, h, steps as usize)
    }

    pub fn horizon(&self) -> f64 {
        self.h * self.steps as f64
    }
}

/// A model paired with precomputed multipliers of `R_h`.
pub struct Stepper<'a> {
    model: &'a dyn ProblemModel,
    config: StepperConfig,
    multipliers: Vec<Complex64>,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a dyn ProblemModel, config: StepperConfig) -> Self {
        let generator = model.generator();
        let multipliers = model
            .modes()
            .wavenumbers()
            .map(|l| config.variant.scheme.multiplier(&generator, config.h, l))
            .collect();
        Stepper {
            model,
            config,
            multipliers,
        }
    }

    pub fn config(&self) -> &StepperConfig {
        &self.config
    }

    /// Advances `u` from `t` by one step with the Q-Wiener increment `dw`.
    pub fn step(&self, u: &SpectralField, t: f64, dw: &SpectralField) -> Result<SpectralField> {
        let h = self.config.h;
        let mut next = self.model.increment(t, u, dw, h, self.config.variant.milstein)?;
        next.add_scaled(Complex64::new(1.0, 0.0), u)?;
        for (c, r) in next.coeffs_mut().iter_mut().zip(&self.multipliers) {
            *c *= r;
        }
        Ok(next)
    }

    /// Runs `M` steps, passing `(j, u_j)` for `j = 0..=M` to `observe`.
    /// `tape` must be at a resolution dividing `h` and cover `[0, T]`.
    pub fn run_with(
        &self,
        xi: &SpectralField,
        tape: &IncrementTape,
        mut observe: impl FnMut(usize, &SpectralField),
    ) -> Result<SpectralField> {
        if xi.modes() != self.model.modes() || tape.modes() != self.model.modes() {
            return Err(Error::ModeMismatch {
                left: self.model.modes().len(),
                right: if xi.modes() != self.model.modes() {
                    xi.modes().len()
                } else {
                    tape.modes().len()
                },
            });
        }
        let coarse = match_tape(tape, self.config.h, self.config.steps)?;
        let noise = self.model.noise();
        let mut u = xi.clone();
        observe(0, &u);
        for j in 0..self.config.steps {
            let dw = noise.increment_field(&coarse.step_coords(j));
            u = self.step(&u, j as f64 * self.config.h, &dw)?;
            observe(j + 1, &u);
        }
        Ok(u)
    }
}

/// Coarsens `tape` to step `h` and checks it holds exactly `steps` steps.
pub fn match_tape(tape: &IncrementTape, h: f64, steps: usize) -> Result<IncrementTape> {
    let ratio = h / tape.step_size();
    let factor = ratio.round();
    if !(factor >= 1.0) || (factor - ratio).abs() > 1e-9 * ratio {
        return Err(Error::TapeMismatch(format!(
            "tape step {} does not divide h = {h}",
            tape.step_size()
        )));
    }
    let factor = factor as usize;
    if tape.steps() != factor * steps {
        return Err(Error::TapeMismatch(format!(
            "tape holds {} steps of {}, expected {} for {steps} steps of {h}",
            tape.steps(),
            tape.step_size(),
            factor * steps
        )));
    }
    coarsen(tape, factor)
}

/// All grid states `u_0..u_M` of one trajectory.
pub fn run_trajectory(
    model: &dyn ProblemModel,
    config: StepperConfig,
    xi: &SpectralField,
    tape: &IncrementTape,
) -> Result<Vec<SpectralField>> {
    let mut states = Vec::with_capacity(config.steps + 1);
    Stepper::new(model, config).run_with(xi, tape, |_, u| states.push(u.clone()))?;
    Ok(states)
}
