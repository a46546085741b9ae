//! Scalar SDE oracles: the SPDE steppers restricted to one mode, checked
//! against the closed-form geometric Brownian motion.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::models::{LinearSE, ProblemModel};
use crate::noise::{coarsen, sample_tape, NoiseModel};
use crate::operators::TimeScheme;
use crate::spectral::{ModeSet, SpectralField};

use super::{aggregate_maxima, ols_slope};
use super::study::reference_trajectory;

const EXACT_THRESHOLD: f64 = 1e-12;
const HORIZON: f64 = 1.0;

/// Fitted strong orders of the scalar Euler and Milstein steppers.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarOrders {
    pub hs: Vec<f64>,
    pub euler_errors: Vec<f64>,
    pub milstein_errors: Vec<f64>,
    /// `None` when every error is at round-off level.
    pub euler: Option<f64>,
    pub milstein: Option<f64>,
}

impl ScalarOrders {
    pub fn is_exact(&self) -> bool {
        self.euler.is_none() && self.milstein.is_none()
    }
}

fn fit(hs: &[f64], errors: &[f64]) -> Result<Option<f64>> {
    if errors.iter().all(|&e| e <= EXACT_THRESHOLD) {
        Ok(None)
    } else {
        ols_slope(hs, errors).map(Some)
    }
}

fn one_mode(eigenvalues: Vec<f64>) -> Result<(ModeSet, NoiseModel)> {
    let modes = ModeSet::new(2)?;
    let noise = NoiseModel::new(modes, eigenvalues)?;
    Ok((modes, noise))
}

/// Simulates `dX = aX dt + bX dβ`, `X₀ = 1`, on `[0, 1]` with
/// `X ↦ r(ha)(X + bXΔβ [+ ½b²X(Δβ² − h)])`, the mode-wise form of the
/// SPDE schemes. The error is the root-mean-square over samples of the
/// maximum over grid times, against `X_t = exp((a − b²/2)t + bβ_t)` on the
/// same Brownian path.
pub fn scalar_strong_order(
    scheme: TimeScheme,
    a: Complex64,
    b: Complex64,
    hs: &[f64],
    samples: usize,
    seed: u64,
) -> Result<ScalarOrders> {
    if a.re > 0.0 {
        return Err(Error::InvalidArgument(format!("Re(a) = {} must be nonpositive", a.re)));
    }
    if samples == 0 || hs.is_empty() {
        return Err(Error::InvalidArgument("need at least one sample and one step".into()));
    }
    let finest = hs.iter().cloned().fold(f64::INFINITY, f64::min);
    let fine_steps = (HORIZON / finest).round() as usize;
    let factors = hs
        .iter()
        .map(|&h| {
            let f = (h / finest).round();
            if (f * finest - h).abs() > 1e-12 || fine_steps % f as usize != 0 {
                Err(Error::InvalidArgument(format!("step {h} is not a multiple of {finest}")))
            } else {
                Ok(f as usize)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (modes, noise) = one_mode(vec![1.0, 0.0])?;
    let slot = modes.position(0).unwrap();
    let exponent = a - 0.5 * b * b;

    let mut euler_max = vec![Vec::with_capacity(samples); hs.len()];
    let mut milstein_max = vec![Vec::with_capacity(samples); hs.len()];
    for n in 0..samples as u64 {
        let tape = sample_tape(&noise, finest, fine_steps, seed, n)?;
        for (k, (&h, &factor)) in hs.iter().zip(&factors).enumerate() {
            let coarse = coarsen(&tape, factor)?;
            let r = scheme.symbol(h * a)?;
            let mut beta = 0.0;
            let (mut xe, mut xm) = (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
            let (mut we, mut wm): (f64, f64) = (0.0, 0.0);
            for (j, &db) in coarse.mode(slot).iter().enumerate() {
                xe = r * xe * (1.0 + b * db);
                xm = r * xm * (1.0 + b * db + 0.5 * b * b * (db * db - h));
                beta += db;
                let exact = (exponent * ((j + 1) as f64 * h) + b * beta).exp();
                we = we.max((xe - exact).norm());
                wm = wm.max((xm - exact).norm());
            }
            euler_max[k].push(we);
            milstein_max[k].push(wm);
        }
    }
    let euler_errors = euler_max
        .iter()
        .map(|m| aggregate_maxima(m, 2.0))
        .collect::<Result<Vec<_>>>()?;
    let milstein_errors = milstein_max
        .iter()
        .map(|m| aggregate_maxima(m, 2.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalarOrders {
        hs: hs.to_vec(),
        euler: fit(hs, &euler_errors)?,
        milstein: fit(hs, &milstein_errors)?,
        euler_errors,
        milstein_errors,
    })
}

/// Comparison of the commutative Milstein identity with a fine-grid double
/// Itô sum for two Brownian coordinates with coefficients `b₁, b₂`:
/// `½(b₁Δβ₁+b₂Δβ₂)² − ½h(b₁²+b₂²)` against `Σ_{jk} b_j b_k I_{jk}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IteratedIntegralCheck {
    pub mean_difference: f64,
    pub standard_error: f64,
    pub rms_difference: f64,
    /// Mean of the identity itself, which is zero in expectation.
    pub mean_identity: f64,
}

impl IteratedIntegralCheck {
    pub fn passed(&self, sigmas: f64) -> bool {
        self.mean_difference.abs() <= sigmas * self.standard_error
    }
}

pub fn iterated_integral_check(
    b: [f64; 2],
    h: f64,
    substeps: usize,
    samples: usize,
    seed: u64,
) -> Result<IteratedIntegralCheck> {
    if samples < 2 || substeps == 0 || !(h > 0.0) {
        return Err(Error::InvalidArgument(
            "iterated integral check needs h > 0, substeps ≥ 1 and two samples".into(),
        ));
    }
    let (_, noise) = one_mode(vec![1.0, 1.0])?;
    let dt = h / substeps as f64;
    let mut diffs = Vec::with_capacity(samples);
    let mut identity_sum = 0.0;
    for n in 0..samples as u64 {
        let tape = sample_tape(&noise, dt, substeps, seed, n)?;
        let (d0, d1) = (tape.mode(0), tape.mode(1));
        // left-point double sums I_jk = Σ_n (β_j(t_n) − β_j(0)) δβ_k,n
        let (mut w0, mut w1) = (0.0, 0.0);
        let mut double = 0.0;
        for (&x0, &x1) in d0.iter().zip(d1) {
            let drive = b[0] * w0 + b[1] * w1;
            double += drive * (b[0] * x0 + b[1] * x1);
            w0 += x0;
            w1 += x1;
        }
        let total = b[0] * w0 + b[1] * w1;
        let identity = 0.5 * total * total - 0.5 * h * (b[0] * b[0] + b[1] * b[1]);
        identity_sum += identity;
        diffs.push(identity - double);
    }
    let n = samples as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let rms = (diffs.iter().map(|d| d * d).sum::<f64>() / n).sqrt();
    Ok(IteratedIntegralCheck {
        mean_difference: mean,
        standard_error: (var / n).sqrt(),
        rms_difference: rms,
        mean_identity: identity_sum / n,
    })
}

/// Strong error of the SPDE reference solver reduced to one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceCheck {
    /// Root-mean-square error at `T` against the closed form.
    pub measured: f64,
    /// Leading-order Euler prediction `|b|²·|X_T|·√(hT/2)`: the local errors
    /// `½b²X(Δβ² − h)` are carried to `T` by the linear flow.
    pub predicted: f64,
}

/// Runs the exponential Euler reference at `h_ref` on a linear model whose
/// only active mode is `e_0`, with a constant unit potential and the noise
/// scaled to `|b| = 1`, and compares with `X_t = X₀ exp((a − b²/2)t + bβ_t)`.
pub fn single_mode_reference_error(
    h_ref: f64,
    horizon: f64,
    samples: usize,
    seed: u64,
) -> Result<ReferenceCheck> {
    let modes = ModeSet::new(4)?;
    let zero = modes.position(0).unwrap();
    let potential =
        SpectralField::basis(modes, 0)?.scaled(Complex64::new((2.0 * PI).sqrt(), 0.0));
    let mut eig = vec![0.0; modes.len()];
    eig[zero] = 2.0 * PI;
    let model = LinearSE::new(potential, NoiseModel::new(modes, eig)?, modes.len())?;
    // on e_0: a = -i (potential), b = -i (noise)
    let (a, b) = (Complex64::new(0.0, -1.0), Complex64::new(0.0, -1.0));
    let x0 = Complex64::new(1.0, 0.0);
    let xi = SpectralField::basis(modes, 0)?.scaled(x0);
    let steps = (horizon / h_ref).round() as usize;
    let mut sq = 0.0;
    for n in 0..samples as u64 {
        let tape = sample_tape(model.noise(), h_ref, steps, seed, n)?;
        let states = reference_trajectory(&model, &xi, &tape, horizon)?;
        let beta: f64 = tape.mode(zero).iter().sum::<f64>() / (2.0 * PI).sqrt();
        let exact = x0 * ((a - 0.5 * b * b) * horizon + b * beta).exp();
        sq += (states.last().unwrap().coeff(0) - exact).norm_sqr();
    }
    // |X_T| = e^{T/2} on every path
    let weight = (0.5 * horizon).exp();
    Ok(ReferenceCheck {
        measured: (sq / samples as f64).sqrt(),
        predicted: b.norm_sqr() * weight * (h_ref * horizon / 2.0).sqrt(),
    })
}
