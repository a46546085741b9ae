//! Truncated Q-Wiener noise on the Fourier basis.
//!
//! The noise is `W_Q = Σ_k √λ_k β_k f_k` with independent real standard
//! Brownian motions `β_k`. For the Schrödinger models `f_k = e_ℓ`; for real
//! equations the real trigonometric basis is used instead (cosines on
//! `ℓ > 0`, sines on `ℓ < 0`) so that `W_Q` is real valued.
//!
//! Increments are drawn once on the finest grid and coarsened by summation,
//! so every step size sees the same Brownian path. Iterated integrals are
//! never sampled: under commutative noise the Milstein correction is
//! expressed through the increment and the covariance eigenvalues alone.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::models::ProblemModel;
use crate::spectral::{to_physical, to_spectral, ModeSet, PhysicalSamples, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseBasis {
    /// Real coordinates attached to the complex exponentials `e_ℓ`.
    Complex,
    /// Real trigonometric basis; requires `λ_ℓ = λ_{-ℓ}`.
    Real,
}

/// Eigenvalues of the covariance `Q` on the mode set, plus the basis the
/// Brownian coordinates are attached to.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    modes: ModeSet,
    eigenvalues: Vec<f64>,
    basis: NoiseBasis,
}

impl NoiseModel {
    pub fn new(modes: ModeSet, eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.len() != modes.len() {
            return Err(Error::LengthMismatch {
                expected: modes.len(),
                got: eigenvalues.len(),
            });
        }
        if let Some(bad) = eigenvalues.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "covariance eigenvalue {bad} is not a finite nonnegative number"
            )));
        }
        Ok(NoiseModel {
            modes,
            eigenvalues,
            basis: NoiseBasis::Complex,
        })
    }

    /// `λ_ℓ = (1+|ℓ|^p)^{-1}`; the default exponent is `5.1`.
    pub fn power_law(modes: ModeSet, exponent: f64) -> Self {
        let eigenvalues = modes
            .wavenumbers()
            .map(|l| 1.0 / (1.0 + (l.abs() as f64).powf(exponent)))
            .collect();
        NoiseModel {
            modes,
            eigenvalues,
            basis: NoiseBasis::Complex,
        }
    }

    pub fn zero(modes: ModeSet) -> Self {
        NoiseModel {
            modes,
            eigenvalues: vec![0.0; modes.len()],
            basis: NoiseBasis::Complex,
        }
    }

    pub fn with_basis(mut self, basis: NoiseBasis) -> Result<Self> {
        if basis == NoiseBasis::Real {
            for l in 1..self.modes.highest() {
                let plus = self.eigenvalues[self.modes.position(l).unwrap()];
                let minus = self.eigenvalues[self.modes.position(-l).unwrap()];
                if plus != minus {
                    return Err(Error::InvalidArgument(format!(
                        "real noise basis needs λ_ℓ = λ_-ℓ, violated at ℓ = {l}"
                    )));
                }
            }
        }
        self.basis = basis;
        Ok(self)
    }

    pub fn modes(&self) -> ModeSet {
        self.modes
    }

    pub fn basis(&self) -> NoiseBasis {
        self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.eigenvalues.iter().all(|&l| l == 0.0)
    }

    /// `Q^{1/2}w`, diagonal on `e_ℓ` in either basis.
    pub fn apply_sqrt_covariance(&self, w: &SpectralField) -> SpectralField {
        let mut out = w.clone();
        for (c, l) in out.coeffs_mut().iter_mut().zip(&self.eigenvalues) {
            *c *= l.sqrt();
        }
        out
    }

    /// Basis function `f_k` for the coordinate stored at position `k`.
    pub fn basis_function(&self, position: usize) -> SpectralField {
        let mut coords = vec![0.0; self.modes.len()];
        coords[position] = 1.0;
        self.increment_field(&coords)
    }

    /// `Σ_k x_k f_k` for real coordinates `x_k` (one per mode position).
    pub fn increment_field(&self, coords: &[f64]) -> SpectralField {
        assert_eq!(coords.len(), self.modes.len(), "one coordinate per mode");
        let modes = self.modes;
        match self.basis {
            NoiseBasis::Complex => {
                SpectralField::from_fn(modes, |l| {
                    Complex64::new(coords[modes.position(l).unwrap()], 0.0)
                })
            }
            NoiseBasis::Real => SpectralField::from_fn(modes, |l| {
                let m = l.abs();
                if m == 0 || m == modes.highest() {
                    return Complex64::new(coords[modes.position(l).unwrap()], 0.0);
                }
                let cosine = coords[modes.position(m).unwrap()];
                let sine = coords[modes.position(-m).unwrap()];
                if l > 0 {
                    Complex64::new(cosine, -sine) * FRAC_1_SQRT_2
                } else {
                    Complex64::new(cosine, sine) * FRAC_1_SQRT_2
                }
            }),
        }
    }

    /// `Σ_k λ_k f_k(x_n)²` on an `N`-point grid: the pointwise trace entering
    /// the Milstein identity.
    pub fn trace_square(&self, grid: usize) -> Result<PhysicalSamples> {
        let mut acc = vec![Complex64::new(0.0, 0.0); grid];
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            if lambda == 0.0 {
                continue;
            }
            let f = to_physical(&self.basis_function(k), grid)?;
            for (a, v) in acc.iter_mut().zip(f.values()) {
                *a += lambda * v * v;
            }
        }
        Ok(PhysicalSamples::new(acc))
    }
}

/// Box–Muller draw addressed by `(seed, sample, mode, step)`.
///
/// ChaCha is counter based: the key is `(seed, sample)`, the stream is the
/// mode position and each step consumes four 32-bit words, so any single
/// increment can be regenerated without replaying the others.
pub fn standard_normal(seed: u64, sample_index: u64, mode: usize, step: usize) -> f64 {
    let mut rng = stream(seed, sample_index, mode);
    rng.set_word_pos(4 * step as u128);
    box_muller(&mut rng)
}

fn stream(seed: u64, sample_index: u64, mode: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&sample_index.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(mode as u64);
    rng
}

fn box_muller(rng: &mut ChaCha8Rng) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    // u1 in (0, 1] keeps the logarithm finite
    let u1 = 1.0 - (rng.next_u64() >> 11) as f64 * SCALE;
    let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Per-mode Q-Wiener increments `√λ_k Δβ_k` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementTape {
    modes: ModeSet,
    step: f64,
    seed: u64,
    sample_index: u64,
    increments: Vec<Vec<f64>>,
}

impl IncrementTape {
    pub fn modes(&self) -> ModeSet {
        self.modes
    }

    pub fn step_size(&self) -> f64 {
        self.step
    }

    pub fn steps(&self) -> usize {
        self.increments.first().map_or(0, Vec::len)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sample_index(&self) -> u64 {
        self.sample_index
    }

    /// Increments of the coordinate at mode position `mode`.
    pub fn mode(&self, mode: usize) -> &[f64] {
        &self.increments[mode]
    }

    /// All coordinates over step `step`, in mode order.
    pub fn step_coords(&self, step: usize) -> Vec<f64> {
        self.increments.iter().map(|m| m[step]).collect()
    }

    /// Debug dump: `seed`, `sample index`, `K`, `M` as `u64`, the step as
    /// `f64`, then `K·M` increments mode-major, all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 + 8 * self.modes.len() * self.steps());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.sample_index.to_le_bytes());
        out.extend_from_slice(&(self.modes.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.steps() as u64).to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        for mode in &self.increments {
            for x in mode {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }
}

/// Samples `steps` increments of width `step` for every mode.
pub fn sample_tape(
    model: &NoiseModel,
    step: f64,
    steps: usize,
    seed: u64,
    sample_index: u64,
) -> Result<IncrementTape> {
    if !(step > 0.0) || steps == 0 {
        return Err(Error::InvalidArgument(format!(
            "tape needs a positive step and at least one step, got h = {step}, M = {steps}"
        )));
    }
    let increments = model
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(mode, &lambda)| {
            if lambda == 0.0 {
                return vec![0.0; steps];
            }
            let scale = (lambda * step).sqrt();
            let mut rng = stream(seed, sample_index, mode);
            (0..steps).map(|_| scale * box_muller(&mut rng)).collect()
        })
        .collect();
    Ok(IncrementTape {
        modes: model.modes,
        step,
        seed,
        sample_index,
        increments,
    })
}

/// Sums consecutive blocks of `factor` increments. Power-of-two factors are
/// reduced by repeated pairwise summation so that nested dyadic coarsenings
/// agree bit for bit; other factors are summed left to right.
pub fn coarsen(tape: &IncrementTape, factor: usize) -> Result<IncrementTape> {
    let steps = tape.steps();
    if factor == 0 || steps % factor != 0 {
        return Err(Error::TapeMismatch(format!(
            "coarsening factor {factor} does not divide {steps} steps"
        )));
    }
    let increments = if factor.is_power_of_two() {
        tape.increments
            .iter()
            .map(|mode| {
                let mut level = mode.clone();
                let mut width = 1;
                while width < factor {
                    level = level.chunks_exact(2).map(|p| p[0] + p[1]).collect();
                    width *= 2;
                }
                level
            })
            .collect()
    } else {
        tape.increments
            .iter()
            .map(|mode| mode.chunks_exact(factor).map(|c| c.iter().sum()).collect())
            .collect()
    };
    Ok(IncrementTape {
        modes: tape.modes,
        step: tape.step * factor as f64,
        seed: tape.seed,
        sample_index: tape.sample_index,
        increments,
    })
}

fn check_commutative<M: ProblemModel + ?Sized>(model: &M) -> Result<()> {
    if model.commutative_noise() {
        Ok(())
    } else {
        Err(Error::NonCommutativeNoise)
    }
}

/// Milstein correction `(G′G)(u)Δ₂W` through the commutative-noise identity
///
/// `½ G′(u)[G(u)ΔW]ΔW − ½ h Σ_k λ_k G′(u)[G(u)f_k]f_k`,
///
/// where `increment` is the Q-Wiener increment `Σ_k √λ_k Δβ_k f_k` and `G`
/// acts on Q-Wiener increments directly. Pointwise models are evaluated on
/// the physical grid; anything else falls back to the basis sum.
pub fn milstein_term<M: ProblemModel + ?Sized>(
    model: &M,
    u: &SpectralField,
    increment: &SpectralField,
    h: f64,
) -> Result<SpectralField> {
    check_commutative(model)?;
    let grid = model.grid();
    let u_phys = to_physical(u, grid)?;
    match model.milstein_kernel(&u_phys) {
        Some(kernel) => {
            let q = to_physical(increment, grid)?;
            let trace = model.trace_square();
            let values = kernel
                .values()
                .iter()
                .zip(q.values())
                .zip(trace.values())
                .map(|((k, q), t)| 0.5 * k * (q * q - h * t))
                .collect();
            to_spectral(&PhysicalSamples::new(values), u.modes())
        }
        None => milstein_term_by_basis(model, u, increment, h),
    }
}

/// The same identity evaluated literally, one basis function at a time.
/// Costs `K` derivative evaluations per call; used as an independent check.
pub fn milstein_term_by_basis<M: ProblemModel + ?Sized>(
    model: &M,
    u: &SpectralField,
    increment: &SpectralField,
    h: f64,
) -> Result<SpectralField> {
    check_commutative(model)?;
    let noise = model.noise();
    let along = model.noise_multiply(u, increment);
    let mut out = model.noise_derivative_multiply(u, &along, increment).scaled(0.5.into());
    for (k, &lambda) in noise.eigenvalues().iter().enumerate() {
        if lambda == 0.0 {
            continue;
        }
        let f = noise.basis_function(k);
        let gf = model.noise_multiply(u, &f);
        let term = model.noise_derivative_multiply(u, &gf, &f);
        out.add_scaled(Complex64::new(-0.5 * h * lambda, 0.0), &term)?;
    }
    Ok(out)
}
