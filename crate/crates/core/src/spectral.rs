//! Complex Fourier fields on the torus `[0, 2π)`.
//!
//! Coefficients are taken with respect to the orthonormal basis
//! `e_ℓ(x) = (2π)^{-1/2} e^{iℓx}` on the symmetric index set
//! `ℓ ∈ {-K/2+1, …, K/2}`. The physical transforms carry the `(2π)^{±1/2}`
//! factors explicitly so that Parseval reads
//! `Σ|c_ℓ|² = (2π/N) Σ|u(x_n)|²` without hidden constants.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn forward_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

fn inverse_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// Symmetric Fourier index set `{-K/2+1, …, K/2}` stored in ascending order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeSet {
    count: usize,
}

impl ModeSet {
    pub fn new(count: usize) -> Result<Self> {
        if count < 2 || count % 2 != 0 {
            return Err(Error::InvalidModeCount(count));
        }
        Ok(ModeSet { count })
    }

    /// Number of modes `K`.
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lowest(&self) -> i64 {
        -(self.count as i64) / 2 + 1
    }

    pub fn highest(&self) -> i64 {
        self.count as i64 / 2
    }

    /// Wavenumber `ℓ` stored at position `index`.
    pub fn wavenumber(&self, index: usize) -> i64 {
        self.lowest() + index as i64
    }

    /// Storage position of wavenumber `ℓ`, if it belongs to the set.
    pub fn position(&self, wavenumber: i64) -> Option<usize> {
        if wavenumber < self.lowest() || wavenumber > self.highest() {
            None
        } else {
            Some((wavenumber - self.lowest()) as usize)
        }
    }

    pub fn wavenumbers(&self) -> impl Iterator<Item = i64> {
        self.lowest()..=self.highest()
    }

    fn check_grid(&self, grid: usize) -> Result<()> {
        if grid < self.count {
            Err(Error::GridTooSmall {
                grid,
                modes: self.count,
            })
        } else {
            Ok(())
        }
    }
}

/// Fourier coefficients of a function on the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    modes: ModeSet,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(modes: ModeSet) -> Self {
        SpectralField {
            modes,
            coeffs: vec![Complex64::new(0.0, 0.0); modes.len()],
        }
    }

    pub fn from_coeffs(modes: ModeSet, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != modes.len() {
            return Err(Error::LengthMismatch {
                expected: modes.len(),
                got: coeffs.len(),
            });
        }
        Ok(SpectralField { modes, coeffs })
    }

    /// Builds a field from a coefficient rule `ℓ ↦ c_ℓ`.
    pub fn from_fn(modes: ModeSet, mut rule: impl FnMut(i64) -> Complex64) -> Self {
        SpectralField {
            modes,
            coeffs: modes.wavenumbers().map(&mut rule).collect(),
        }
    }

    /// The basis function `e_ℓ`.
    pub fn basis(modes: ModeSet, wavenumber: i64) -> Result<Self> {
        let pos = modes.position(wavenumber).ok_or_else(|| {
            Error::InvalidArgument(format!("wavenumber {wavenumber} outside mode set"))
        })?;
        let mut field = SpectralField::zeros(modes);
        field.coeffs[pos] = Complex64::new(1.0, 0.0);
        Ok(field)
    }

    pub fn modes(&self) -> ModeSet {
        self.modes
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient of `e_ℓ`; zero outside the mode set.
    pub fn coeff(&self, wavenumber: i64) -> Complex64 {
        self.modes
            .position(wavenumber)
            .map_or(Complex64::new(0.0, 0.0), |p| self.coeffs[p])
    }

    /// Iterates `(ℓ, c_ℓ)` in ascending `ℓ`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.modes.wavenumbers().zip(self.coeffs.iter().copied())
    }

    fn check_same(&self, other: &SpectralField) -> Result<()> {
        if self.modes != other.modes {
            Err(Error::ModeMismatch {
                left: self.modes.len(),
                right: other.modes.len(),
            })
        } else {
            Ok(())
        }
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, scale: Complex64, other: &SpectralField) -> Result<()> {
        self.check_same(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn plus(&self, other: &SpectralField) -> Result<SpectralField> {
        let mut out = self.clone();
        out.add_scaled(Complex64::new(1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn minus(&self, other: &SpectralField) -> Result<SpectralField> {
        let mut out = self.clone();
        out.add_scaled(Complex64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn scaled(&self, scale: Complex64) -> SpectralField {
        SpectralField {
            modes: self.modes,
            coeffs: self.coeffs.iter().map(|c| c * scale).collect(),
        }
    }

    /// Multiplies coefficient `ℓ` by `multiplier(ℓ)`.
    pub fn map_modes(&self, mut multiplier: impl FnMut(i64) -> Complex64) -> SpectralField {
        SpectralField {
            modes: self.modes,
            coeffs: self
                .iter()
                .map(|(l, c)| c * multiplier(l))
                .collect(),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        sobolev_norm(self, 0.0)
    }

    /// Point evaluation `Σ c_ℓ e_ℓ(x)`.
    pub fn evaluate(&self, x: f64) -> Complex64 {
        let norm = (2.0 * PI).sqrt().recip();
        self.iter()
            .map(|(l, c)| c * Complex64::from_polar(norm, l as f64 * x))
            .sum()
    }

    /// Flat little-endian layout: `K` as `u64`, then `K` interleaved
    /// `(re, im)` pairs of `f64` in ascending `ℓ`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 16 * self.coeffs.len());
        out.extend_from_slice(&(self.coeffs.len() as u64).to_le_bytes());
        for c in &self.coeffs {
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<SpectralField> {
        let header: [u8; 8] = bytes
            .get(..8)
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| Error::Malformed("missing mode-count header".into()))?;
        let count = u64::from_le_bytes(header) as usize;
        let modes = ModeSet::new(count)?;
        let body = &bytes[8..];
        if body.len() != 16 * count {
            return Err(Error::Malformed(format!(
                "expected {} payload bytes for {count} modes, found {}",
                16 * count,
                body.len()
            )));
        }
        let coeffs = body
            .chunks_exact(16)
            .map(|chunk| {
                let re = f64::from_le_bytes(chunk[..8].try_into().unwrap());
                let im = f64::from_le_bytes(chunk[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        Ok(SpectralField { modes, coeffs })
    }
}

/// Samples on the equispaced grid `x_n = 2πn/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalSamples {
    values: Vec<Complex64>,
}

impl PhysicalSamples {
    pub fn new(values: Vec<Complex64>) -> Self {
        PhysicalSamples { values }
    }

    pub fn from_fn(grid: usize, mut f: impl FnMut(f64) -> Complex64) -> Self {
        PhysicalSamples {
            values: (0..grid).map(|n| f(grid_point(n, grid))).collect(),
        }
    }

    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> PhysicalSamples {
        PhysicalSamples {
            values: self.values.iter().map(|&z| f(z)).collect(),
        }
    }
}

pub fn grid_point(n: usize, grid: usize) -> f64 {
    2.0 * PI * n as f64 / grid as f64
}

/// Evaluates the field on an `N`-point grid, `N ≥ K`.
pub fn to_physical(u: &SpectralField, grid: usize) -> Result<PhysicalSamples> {
    u.modes.check_grid(grid)?;
    let mut buf = vec![Complex64::new(0.0, 0.0); grid];
    for (l, c) in u.iter() {
        buf[l.rem_euclid(grid as i64) as usize] = c;
    }
    inverse_plan(grid).process(&mut buf);
    let norm = (2.0 * PI).sqrt().recip();
    for v in &mut buf {
        *v *= norm;
    }
    Ok(PhysicalSamples { values: buf })
}

/// Discrete projection of grid samples onto the mode set (Galerkin
/// truncation when `N > K`).
pub fn to_spectral(samples: &PhysicalSamples, modes: ModeSet) -> Result<SpectralField> {
    let grid = samples.grid_size();
    modes.check_grid(grid)?;
    let mut buf = samples.values.clone();
    forward_plan(grid).process(&mut buf);
    let norm = (2.0 * PI).sqrt() / grid as f64;
    Ok(SpectralField::from_fn(modes, |l| {
        buf[l.rem_euclid(grid as i64) as usize] * norm
    }))
}

/// `(Σ (1+ℓ²)^s |c_ℓ|²)^{1/2}`.
pub fn sobolev_norm(u: &SpectralField, s: f64) -> f64 {
    u.iter()
        .map(|(l, c)| {
            let weight = if s == 0.0 {
                1.0
            } else {
                (1.0 + (l * l) as f64).powf(s)
            };
            weight * c.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// Applies `φ` pointwise on an `N`-point grid and projects back.
pub fn pointwise_map(
    u: &SpectralField,
    map: impl Fn(Complex64) -> Complex64,
    grid: usize,
) -> Result<SpectralField> {
    let physical = to_physical(u, grid)?;
    to_spectral(&physical.map(map), u.modes)
}

/// Galerkin projection of the pointwise product `u·v`.
pub fn multiply(u: &SpectralField, v: &SpectralField, grid: usize) -> Result<SpectralField> {
    u.check_same(v)?;
    let mut pu = to_physical(u, grid)?;
    let pv = to_physical(v, grid)?;
    for (a, b) in pu.values.iter_mut().zip(&pv.values) {
        *a *= b;
    }
    to_spectral(&pu, u.modes)
}

/// Periodic convolution `(η∗u)(x) = ∫ η(y) u(x−y) dy`, coefficientwise
/// `√(2π) η_ℓ u_ℓ`.
pub fn convolve(kernel: &SpectralField, u: &SpectralField) -> Result<SpectralField> {
    kernel.check_same(u)?;
    let factor = (2.0 * PI).sqrt();
    Ok(SpectralField {
        modes: u.modes,
        coeffs: kernel
            .coeffs
            .iter()
            .zip(&u.coeffs)
            .map(|(k, c)| factor * k * c)
            .collect(),
    })
}

/// Compactly supported bump `Ce^{1/(x²−c²)}` on `|x| < c`, `C = e^{1/c²}`,
/// wrapped onto the torus so that its value at `0` is one.
pub fn bump(width: f64, x: f64) -> f64 {
    let x = if x >= PI { x - 2.0 * PI } else { x };
    if x.abs() < width {
        let c2 = width * width;
        (1.0 / c2 + 1.0 / (x * x - c2)).exp()
    } else {
        0.0
    }
}

/// Spectral projection of the wrapped bump of width `c ∈ (0, π)`, computed
/// by a discrete transform on an `N ≥ 4K` grid.
pub fn bump_coefficients(width: f64, modes: ModeSet, grid: usize) -> Result<SpectralField> {
    if !(width > 0.0 && width < PI) {
        return Err(Error::InvalidArgument(format!(
            "bump width {width} outside (0, π)"
        )));
    }
    if grid < 4 * modes.len() {
        return Err(Error::GridTooSmall {
            grid,
            modes: 4 * modes.len(),
        });
    }
    let samples = PhysicalSamples::from_fn(grid, |x| Complex64::new(bump(width, x), 0.0));
    to_spectral(&samples, modes)
}

/// Field with coefficients `(1+|ℓ|^q)^{-1}`.
pub fn power_decay_field(exponent: f64, modes: ModeSet) -> SpectralField {
    SpectralField::from_fn(modes, |l| {
        Complex64::new(1.0 / (1.0 + (l.abs() as f64).powf(exponent)), 0.0)
    })
}
