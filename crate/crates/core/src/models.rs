//! Concrete drift/noise pairs on the torus.
//!
//! Every shipped model has pointwise multiplicative noise
//! `G(u)q = ψ(u)·q`, where `q` is an element of the Q-Wiener space (the
//! `Q^{1/2}` factor is already applied). Such noise is commutative, so the
//! Milstein correction reduces to the kernel `ψ′(u)[ψ(u)]`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::noise::{milstein_term, NoiseBasis, NoiseModel};
use crate::operators::Generator;
use crate::spectral::{
    bump_coefficients, convolve, to_physical, to_spectral, ModeSet, PhysicalSamples,
    SpectralField,
};

/// Lipschitz constants on `L²`, used only by property tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lipschitz {
    pub drift: f64,
}

/// Drift `F`, noise `G` and its derivative `G′` for one equation.
///
/// `noise_multiply` takes Q-Wiener increments; `noise_apply` takes plain
/// `L²` elements and applies `Q^{1/2}` first.
pub trait ProblemModel: Send + Sync {
    fn name(&self) -> &'static str;
    fn generator(&self) -> Generator;
    fn modes(&self) -> ModeSet;
    /// Collocation grid used for pointwise operations.
    fn grid(&self) -> usize;
    fn noise(&self) -> &NoiseModel;

    fn commutative_noise(&self) -> bool {
        true
    }

    fn lipschitz(&self) -> Option<Lipschitz> {
        None
    }

    fn drift(&self, t: f64, u: &SpectralField) -> SpectralField;

    /// `G(u)q` for a Q-Wiener element `q`.
    fn noise_multiply(&self, u: &SpectralField, q: &SpectralField) -> SpectralField;

    /// `G′(u)[v]q`.
    fn noise_derivative_multiply(
        &self,
        u: &SpectralField,
        v: &SpectralField,
        q: &SpectralField,
    ) -> SpectralField;

    /// Pointwise kernel `κ` with `G′(u)[G(u)q₁]q₂ = κ·q₁·q₂`, if the noise
    /// is of that form.
    fn milstein_kernel(&self, _u_phys: &PhysicalSamples) -> Option<PhysicalSamples> {
        None
    }

    /// `Σ_k λ_k f_k²` on the model grid.
    fn trace_square(&self) -> &PhysicalSamples;

    fn noise_apply(&self, u: &SpectralField, w: &SpectralField) -> SpectralField {
        self.noise_multiply(u, &self.noise().apply_sqrt_covariance(w))
    }

    fn noise_derivative_apply(
        &self,
        u: &SpectralField,
        v: &SpectralField,
        w: &SpectralField,
    ) -> SpectralField {
        self.noise_derivative_multiply(u, v, &self.noise().apply_sqrt_covariance(w))
    }

    /// `h·F(t,u) + G(u)ΔW [+ (G′G)(u)Δ₂W]`, the bracket inside one step.
    fn increment(
        &self,
        t: f64,
        u: &SpectralField,
        increment: &SpectralField,
        h: f64,
        milstein: bool,
    ) -> Result<SpectralField> {
        composed_increment(self, t, u, increment, h, milstein)
    }
}

/// Reference evaluation of [`ProblemModel::increment`] from its parts.
pub fn composed_increment<M: ProblemModel + ?Sized>(
    model: &M,
    t: f64,
    u: &SpectralField,
    increment: &SpectralField,
    h: f64,
    milstein: bool,
) -> Result<SpectralField> {
    let mut out = model.drift(t, u).scaled(h.into());
    out.add_scaled(1.0.into(), &model.noise_multiply(u, increment))?;
    if milstein {
        out.add_scaled(1.0.into(), &milstein_term(model, u, increment, h)?)?;
    }
    Ok(out)
}

/// `φ(z) = z(1+|z|²)^{-1}`.
pub fn saturation(z: Complex64) -> Complex64 {
    z / (1.0 + z.norm_sqr())
}

/// Scalar noise coefficient `ψ`, read as a map on `ℝ²` when not holomorphic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseCoefficient {
    /// `ψ(z) = -iz`.
    Schrodinger,
    /// `ψ(z) = z(1+|z|²)^{-1/2}`: bounded, with Lipschitz `ψ′ψ`.
    Bounded,
}

impl NoiseCoefficient {
    pub fn value(&self, z: Complex64) -> Complex64 {
        match self {
            NoiseCoefficient::Schrodinger => Complex64::new(z.im, -z.re),
            NoiseCoefficient::Bounded => z / (1.0 + z.norm_sqr()).sqrt(),
        }
    }

    /// Real Jacobian `Dψ(z)` applied to the direction `v`.
    pub fn derivative(&self, z: Complex64, v: Complex64) -> Complex64 {
        match self {
            NoiseCoefficient::Schrodinger => Complex64::new(v.im, -v.re),
            NoiseCoefficient::Bounded => {
                let s = 1.0 + z.norm_sqr();
                let radial = (z.conj() * v).re;
                v / s.sqrt() - z * radial / (s * s.sqrt())
            }
        }
    }

    /// Supremum of the Jacobian norm of `ψ` over `ℂ`.
    pub fn derivative_bound(&self) -> f64 {
        1.0
    }
}

/// Shared pointwise-noise machinery: `G(u)q = ψ(u)q` on a collocation grid.
#[derive(Debug, Clone)]
struct PointwiseNoise {
    noise: NoiseModel,
    coefficient: NoiseCoefficient,
    grid: usize,
    trace: PhysicalSamples,
}

impl PointwiseNoise {
    fn new(noise: NoiseModel, coefficient: NoiseCoefficient, grid: usize) -> Result<Self> {
        let trace = noise.trace_square(grid)?;
        Ok(PointwiseNoise {
            noise,
            coefficient,
            grid,
            trace,
        })
    }

    fn physical(&self, u: &SpectralField) -> PhysicalSamples {
        to_physical(u, self.grid).expect("model grid resolves its modes")
    }

    fn spectral(&self, values: Vec<Complex64>, modes: ModeSet) -> SpectralField {
        to_spectral(&PhysicalSamples::new(values), modes).expect("model grid resolves its modes")
    }

    fn multiply(&self, u: &SpectralField, q: &SpectralField) -> SpectralField {
        let pu = self.physical(u);
        let pq = self.physical(q);
        let values = pu
            .values()
            .iter()
            .zip(pq.values())
            .map(|(&z, q)| self.coefficient.value(z) * q)
            .collect();
        self.spectral(values, u.modes())
    }

    fn derivative_multiply(
        &self,
        u: &SpectralField,
        v: &SpectralField,
        q: &SpectralField,
    ) -> SpectralField {
        let pu = self.physical(u);
        let pv = self.physical(v);
        let pq = self.physical(q);
        let values = pu
            .values()
            .iter()
            .zip(pv.values())
            .zip(pq.values())
            .map(|((&z, &v), q)| self.coefficient.derivative(z, v) * q)
            .collect();
        self.spectral(values, u.modes())
    }

    fn kernel(&self, u_phys: &PhysicalSamples) -> PhysicalSamples {
        u_phys.map(|z| self.coefficient.derivative(z, self.coefficient.value(z)))
    }

    /// Physical values of `ψ(u)q + [½κ(q² − hτ)]`.
    fn increment_values(
        &self,
        u_phys: &PhysicalSamples,
        increment: &SpectralField,
        h: f64,
        milstein: bool,
    ) -> Vec<Complex64> {
        let q = self.physical(increment);
        u_phys
            .values()
            .iter()
            .zip(q.values())
            .zip(self.trace.values())
            .map(|((&z, &q), &tau)| {
                let psi = self.coefficient.value(z);
                let mut out = psi * q;
                if milstein {
                    let kappa = self.coefficient.derivative(z, psi);
                    out += 0.5 * kappa * (q * q - h * tau);
                }
                out
            })
            .collect()
    }
}

macro_rules! pointwise_noise_methods {
    () => {
        fn grid(&self) -> usize {
            self.noise.grid
        }
        fn noise(&self) -> &NoiseModel {
            &self.noise.noise
        }
        fn noise_multiply(&self, u: &SpectralField, q: &SpectralField) -> SpectralField {
            self.noise.multiply(u, q)
        }
        fn noise_derivative_multiply(
            &self,
            u: &SpectralField,
            v: &SpectralField,
            q: &SpectralField,
        ) -> SpectralField {
            self.noise.derivative_multiply(u, v, q)
        }
        fn milstein_kernel(&self, u_phys: &PhysicalSamples) -> Option<PhysicalSamples> {
            Some(self.noise.kernel(u_phys))
        }
        fn trace_square(&self) -> &PhysicalSamples {
            &self.noise.trace
        }
    };
}

fn check_grid(modes: ModeSet, grid: usize) -> Result<()> {
    if grid < modes.len() {
        Err(Error::GridTooSmall {
            grid,
            modes: modes.len(),
        })
    } else {
        Ok(())
    }
}

fn check_noise(modes: ModeSet, noise: &NoiseModel) -> Result<()> {
    if noise.modes() != modes {
        Err(Error::ModeMismatch {
            left: modes.len(),
            right: noise.modes().len(),
        })
    } else {
        Ok(())
    }
}

/// Default bump width `c = π/2` used for potentials and kernels.
pub const DEFAULT_BUMP_WIDTH: f64 = PI / 2.0;
/// Default covariance decay exponent.
pub const DEFAULT_NOISE_EXPONENT: f64 = 5.1;

fn default_bump(modes: ModeSet) -> Result<SpectralField> {
    bump_coefficients(DEFAULT_BUMP_WIDTH, modes, 4 * modes.len())
}

/// Linear Schrödinger equation `dU = -i(ΔU + VU)dt - iU dW_Q`.
#[derive(Debug, Clone)]
pub struct LinearSE {
    potential: SpectralField,
    potential_phys: PhysicalSamples,
    noise: PointwiseNoise,
}

impl LinearSE {
    pub fn new(potential: SpectralField, noise: NoiseModel, grid: usize) -> Result<Self> {
        let modes = potential.modes();
        check_grid(modes, grid)?;
        check_noise(modes, &noise)?;
        let potential_phys = to_physical(&potential, grid)?;
        Ok(LinearSE {
            potential,
            potential_phys,
            noise: PointwiseNoise::new(noise, NoiseCoefficient::Schrodinger, grid)?,
        })
    }

    /// Bump potential of width `π/2`, `λ_ℓ = (1+|ℓ|^{5.1})^{-1}`, grid `N = K`.
    pub fn standard(modes: ModeSet) -> Result<Self> {
        LinearSE::new(
            default_bump(modes)?,
            NoiseModel::power_law(modes, DEFAULT_NOISE_EXPONENT),
            modes.len(),
        )
    }

    pub fn potential(&self) -> &SpectralField {
        &self.potential
    }
}

impl ProblemModel for LinearSE {
    fn name(&self) -> &'static str {
        "linear"
    }
    fn generator(&self) -> Generator {
        Generator::schrodinger()
    }
    fn modes(&self) -> ModeSet {
        self.potential.modes()
    }
    pointwise_noise_methods!();

    fn lipschitz(&self) -> Option<Lipschitz> {
        let sup = self
            .potential_phys
            .values()
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        Some(Lipschitz { drift: sup })
    }

    fn drift(&self, _t: f64, u: &SpectralField) -> SpectralField {
        let pu = self.noise.physical(u);
        let values = pu
            .values()
            .iter()
            .zip(self.potential_phys.values())
            .map(|(z, v)| Complex64::new(0.0, -1.0) * v * z)
            .collect();
        self.noise.spectral(values, u.modes())
    }

    fn increment(
        &self,
        _t: f64,
        u: &SpectralField,
        increment: &SpectralField,
        h: f64,
        milstein: bool,
    ) -> Result<SpectralField> {
        let pu = self.noise.physical(u);
        let mut values = self.noise.increment_values(&pu, increment, h, milstein);
        for ((out, z), v) in values
            .iter_mut()
            .zip(pu.values())
            .zip(self.potential_phys.values())
        {
            *out += Complex64::new(0.0, -h) * v * z;
        }
        Ok(self.noise.spectral(values, u.modes()))
    }
}

/// Schrödinger equation with nonlocal drift `F(u) = -i η∗φ(u)`.
#[derive(Debug, Clone)]
pub struct ConvNLSE {
    kernel: SpectralField,
    noise: PointwiseNoise,
}

impl ConvNLSE {
    pub fn new(kernel: SpectralField, noise: NoiseModel, grid: usize) -> Result<Self> {
        let modes = kernel.modes();
        check_grid(modes, grid)?;
        check_noise(modes, &noise)?;
        Ok(ConvNLSE {
            kernel,
            noise: PointwiseNoise::new(noise, NoiseCoefficient::Schrodinger, grid)?,
        })
    }

    pub fn standard(modes: ModeSet) -> Result<Self> {
        ConvNLSE::new(
            default_bump(modes)?,
            NoiseModel::power_law(modes, DEFAULT_NOISE_EXPONENT),
            modes.len(),
        )
    }

    pub fn kernel(&self) -> &SpectralField {
        &self.kernel
    }

    fn convolved(&self, phi_u: Vec<Complex64>, modes: ModeSet, scale: Complex64) -> SpectralField {
        let projected = self.noise.spectral(phi_u, modes);
        convolve(&self.kernel, &projected)
            .expect("kernel shares the mode set")
            .scaled(scale)
    }
}

impl ProblemModel for ConvNLSE {
    fn name(&self) -> &'static str {
        "conv"
    }
    fn generator(&self) -> Generator {
        Generator::schrodinger()
    }
    fn modes(&self) -> ModeSet {
        self.kernel.modes()
    }
    pointwise_noise_methods!();

    fn lipschitz(&self) -> Option<Lipschitz> {
        // ‖η∗·‖_{L²→L²} = max_ℓ √(2π)|η_ℓ|, and φ is 1-Lipschitz
        let norm = self
            .kernel
            .coeffs()
            .iter()
            .map(|c| (2.0 * PI).sqrt() * c.norm())
            .fold(0.0, f64::max);
        Some(Lipschitz { drift: norm })
    }

    fn drift(&self, _t: f64, u: &SpectralField) -> SpectralField {
        let pu = self.noise.physical(u);
        let phi = pu.values().iter().map(|&z| saturation(z)).collect();
        self.convolved(phi, u.modes(), Complex64::new(0.0, -1.0))
    }

    fn increment(
        &self,
        _t: f64,
        u: &SpectralField,
        increment: &SpectralField,
        h: f64,
        milstein: bool,
    ) -> Result<SpectralField> {
        let pu = self.noise.physical(u);
        let phi = pu.values().iter().map(|&z| saturation(z)).collect();
        let mut out = self.convolved(phi, u.modes(), Complex64::new(0.0, -h));
        let noise = self.noise.increment_values(&pu, increment, h, milstein);
        out.add_scaled(1.0.into(), &self.noise.spectral(noise, u.modes()))?;
        Ok(out)
    }
}

/// Schrödinger equation with Nemytskii drift `F(u) = -i φ∘u`.
#[derive(Debug, Clone)]
pub struct NemytskiiNLSE {
    modes: ModeSet,
    noise: PointwiseNoise,
}

impl NemytskiiNLSE {
    pub fn new(modes: ModeSet, noise: NoiseModel, grid: usize) -> Result<Self> {
        check_grid(modes, grid)?;
        check_noise(modes, &noise)?;
        Ok(NemytskiiNLSE {
            modes,
            noise: PointwiseNoise::new(noise, NoiseCoefficient::Schrodinger, grid)?,
        })
    }

    pub fn standard(modes: ModeSet) -> Result<Self> {
        NemytskiiNLSE::new(
            modes,
            NoiseModel::power_law(modes, DEFAULT_NOISE_EXPONENT),
            modes.len(),
        )
    }
}

impl ProblemModel for NemytskiiNLSE {
    fn name(&self) -> &'static str {
        "nemytskii"
    }
    fn generator(&self) -> Generator {
        Generator::schrodinger()
    }
    fn modes(&self) -> ModeSet {
        self.modes
    }
    pointwise_noise_methods!();

    fn lipschitz(&self) -> Option<Lipschitz> {
        Some(Lipschitz { drift: 1.0 })
    }

    fn drift(&self, _t: f64, u: &SpectralField) -> SpectralField {
        let pu = self.noise.physical(u);
        let values = pu
            .values()
            .iter()
            .map(|&z| Complex64::new(0.0, -1.0) * saturation(z))
            .collect();
        self.noise.spectral(values, u.modes())
    }

    fn increment(
        &self,
        _t: f64,
        u: &SpectralField,
        increment: &SpectralField,
        h: f64,
        milstein: bool,
    ) -> Result<SpectralField> {
        let pu = self.noise.physical(u);
        let mut values = self.noise.increment_values(&pu, increment, h, milstein);
        for (out, &z) in values.iter_mut().zip(pu.values()) {
            *out += Complex64::new(0.0, -h) * saturation(z);
        }
        Ok(self.noise.spectral(values, u.modes()))
    }
}

/// Transport equation `dU = (U′ + φ(U))dt + ψ(U)dW_Q`, posed on the torus
/// with real-valued noise.
#[derive(Debug, Clone)]
pub struct TransportModel {
    modes: ModeSet,
    noise: PointwiseNoise,
}

impl TransportModel {
    pub fn new(modes: ModeSet, noise: NoiseModel, grid: usize) -> Result<Self> {
        check_grid(modes, grid)?;
        check_noise(modes, &noise)?;
        let noise = noise.with_basis(NoiseBasis::Real)?;
        Ok(TransportModel {
            modes,
            noise: PointwiseNoise::new(noise, NoiseCoefficient::Bounded, grid)?,
        })
    }

    pub fn standard(modes: ModeSet) -> Result<Self> {
        TransportModel::new(
            modes,
            NoiseModel::power_law(modes, DEFAULT_NOISE_EXPONENT),
            modes.len(),
        )
    }
}

impl ProblemModel for TransportModel {
    fn name(&self) -> &'static str {
        "transport"
    }
    fn generator(&self) -> Generator {
        Generator::transport()
    }
    fn modes(&self) -> ModeSet {
        self.modes
    }
    pointwise_noise_methods!();

    fn lipschitz(&self) -> Option<Lipschitz> {
        Some(Lipschitz { drift: 1.0 })
    }

    fn drift(&self, _t: f64, u: &SpectralField) -> SpectralField {
        let pu = self.noise.physical(u);
        let values = pu.values().iter().map(|&z| saturation(z)).collect();
        self.noise.spectral(values, u.modes())
    }

    fn increment(
        &self,
        _t: f64,
        u: &SpectralField,
        increment: &SpectralField,
        h: f64,
        milstein: bool,
    ) -> Result<SpectralField> {
        let pu = self.noise.physical(u);
        let mut values = self.noise.increment_values(&pu, increment, h, milstein);
        for (out, &z) in values.iter_mut().zip(pu.values()) {
            *out += h * saturation(z);
        }
        Ok(self.noise.spectral(values, u.modes()))
    }
}

/// Model selector used by the study configuration and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Linear,
    Conv,
    Nemytskii,
    Transport,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Linear,
        ModelKind::Conv,
        ModelKind::Nemytskii,
        ModelKind::Transport,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Conv => "conv",
            ModelKind::Nemytskii => "nemytskii",
            ModelKind::Transport => "transport",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown model '{s}' (expected linear, conv, nemytskii or transport)"
                ))
            })
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters needed to build any shipped model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub bump_width: f64,
    pub noise_exponent: f64,
    /// Factor applied to every covariance eigenvalue; `0` switches noise off.
    pub noise_scale: f64,
    /// Collocation grid as a multiple of `K` (1 or 2).
    pub grid_factor: usize,
    /// Replaces the bump potential (linear) or kernel (conv).
    pub profile: Option<SpectralField>,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        ModelSpec {
            kind,
            bump_width: DEFAULT_BUMP_WIDTH,
            noise_exponent: DEFAULT_NOISE_EXPONENT,
            noise_scale: 1.0,
            grid_factor: 1,
            profile: None,
        }
    }

    pub fn build(&self, modes: ModeSet) -> Result<Box<dyn ProblemModel>> {
        if self.grid_factor == 0 {
            return Err(Error::InvalidArgument("grid factor must be positive".into()));
        }
        let grid = self.grid_factor * modes.len();
        let base = NoiseModel::power_law(modes, self.noise_exponent);
        let noise = NoiseModel::new(
            modes,
            base.eigenvalues().iter().map(|l| l * self.noise_scale).collect(),
        )?;
        let profile = || -> Result<SpectralField> {
            match &self.profile {
                Some(p) if p.modes() != modes => Err(Error::ModeMismatch {
                    left: modes.len(),
                    right: p.modes().len(),
                }),
                Some(p) => Ok(p.clone()),
                None => bump_coefficients(self.bump_width, modes, 4 * modes.len()),
            }
        };
        Ok(match self.kind {
            ModelKind::Linear => Box::new(LinearSE::new(profile()?, noise, grid)?),
            ModelKind::Conv => Box::new(ConvNLSE::new(profile()?, noise, grid)?),
            ModelKind::Nemytskii => Box::new(NemytskiiNLSE::new(modes, noise, grid)?),
            ModelKind::Transport => Box::new(TransportModel::new(modes, noise, grid)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{milstein_term_by_basis, sample_tape};
    use crate::spectral::{grid_point, power_decay_field};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn field(modes: ModeSet, seed: f64) -> SpectralField {
        SpectralField::from_fn(modes, |l| {
            let d = 1.0 + (l.abs() as f64).powi(3);
            c((seed * (l as f64 + 1.3)).sin() / d, (seed * 0.7 * l as f64).cos() / d)
        })
    }

    fn all_models(modes: ModeSet) -> Vec<Box<dyn ProblemModel>> {
        ModelKind::ALL
            .iter()
            .map(|&k| ModelSpec::new(k).build(modes).unwrap())
            .collect()
    }

    #[test]
    fn drift_examples() {
        let m = ModeSet::new(64).unwrap();
        let zero_v = LinearSE::new(SpectralField::zeros(m), NoiseModel::power_law(m, 5.1), 64).unwrap();
        let u = field(m, 0.4);
        assert_eq!(zero_v.drift(0.0, &u).l2_norm(), 0.0);

        let conv = ConvNLSE::standard(m).unwrap();
        assert_eq!(conv.drift(0.0, &SpectralField::zeros(m)).l2_norm(), 0.0);

        // V = χ, u ≡ 1: F(u) = -iχ
        let linear = LinearSE::new(
            bump_coefficients(PI / 2.0, m, 256).unwrap(),
            NoiseModel::power_law(m, 5.1),
            64,
        )
        .unwrap();
        let one = SpectralField::basis(m, 0).unwrap().scaled(c((2.0 * PI).sqrt(), 0.0));
        let f = linear.drift(0.0, &one);
        let expect = linear.potential().scaled(c(0.0, -1.0));
        assert!(f.minus(&expect).unwrap().l2_norm() < 1e-12);
        // independent projection of -iχ by a direct quadrature sum
        let quad = 256;
        for l in -8..=8i64 {
            let coeff: Complex64 = (0..quad)
                .map(|n| {
                    let x = grid_point(n, quad);
                    crate::spectral::bump(PI / 2.0, x) * Complex64::from_polar(1.0, -(l as f64) * x)
                })
                .sum::<Complex64>()
                * ((2.0 * PI).sqrt() / quad as f64);
            assert!((f.coeff(l) - c(0.0, -1.0) * coeff).norm() < 1e-10, "ℓ={l}");
        }
    }

    #[test]
    fn linear_model_is_linear() {
        let m = ModeSet::new(32).unwrap();
        let model = LinearSE::standard(m).unwrap();
        let u = field(m, 0.3);
        let v = field(m, 1.9);
        let w = field(m, 2.4);
        let lhs = model.drift(0.0, &u.plus(&v).unwrap());
        let rhs = model.drift(0.0, &u).plus(&model.drift(0.0, &v)).unwrap();
        assert!(lhs.minus(&rhs).unwrap().l2_norm() < 1e-12);
        let lhs = model.noise_apply(&u.plus(&v).unwrap(), &w);
        let rhs = model.noise_apply(&u, &w).plus(&model.noise_apply(&v, &w)).unwrap();
        assert!(lhs.minus(&rhs).unwrap().l2_norm() < 1e-12);
    }

    #[test]
    fn noise_apply_examples() {
        let m = ModeSet::new(16).unwrap();
        let model = LinearSE::standard(m).unwrap();
        let w = field(m, 0.8);
        assert_eq!(model.noise_apply(&SpectralField::zeros(m), &w).l2_norm(), 0.0);

        let mut eig = NoiseModel::power_law(m, 5.1).eigenvalues().to_vec();
        eig[m.position(3).unwrap()] = 0.0;
        let sparse = LinearSE::new(
            model.potential().clone(),
            NoiseModel::new(m, eig).unwrap(),
            16,
        )
        .unwrap();
        let e3 = SpectralField::basis(m, 3).unwrap();
        assert_eq!(sparse.noise_apply(&field(m, 0.1), &e3).l2_norm(), 0.0);

        // u ≡ 1, w = e_0: -i√λ₀ e_0 · 1 = -i√λ₀ e_0 since λ₀ = 1
        let one = SpectralField::basis(m, 0).unwrap().scaled(c((2.0 * PI).sqrt(), 0.0));
        let e0 = SpectralField::basis(m, 0).unwrap();
        let g = model.noise_apply(&one, &e0);
        for (l, v) in g.iter() {
            let expect = if l == 0 { c(0.0, -1.0) } else { c(0.0, 0.0) };
            assert!((v - expect).norm() < 1e-14, "ℓ={l}");
        }
    }

    #[test]
    fn noise_derivative_examples() {
        let m = ModeSet::new(32).unwrap();
        let linear = LinearSE::standard(m).unwrap();
        let u1 = field(m, 0.5);
        let u2 = field(m, 2.0);
        let v = field(m, 1.1);
        let w = field(m, 0.9);
        let a = linear.noise_derivative_apply(&u1, &v, &w);
        let b = linear.noise_derivative_apply(&u2, &v, &w);
        assert_eq!(a, b);
        assert_eq!(linear.noise_derivative_apply(&u1, &SpectralField::zeros(m), &w).l2_norm(), 0.0);

        // bounded ψ: |Dψ(u)[v]q| ≤ sup|Dψ|·|v|·|q| pointwise, hence in L²
        // ‖G′(u)[v]w‖ ≤ 1·sup_x|v(x)|·‖Q^{1/2}w‖ on the collocation grid
        let transport = TransportModel::standard(m).unwrap();
        for seed in [0.2, 0.7, 1.3, 3.1] {
            let u = field(m, seed).scaled(c(3.0, 0.0));
            let v = field(m, seed + 0.5);
            let w = field(m, seed + 1.0);
            let out = transport.noise_derivative_apply(&u, &v, &w);
            let sup_v = to_physical(&v, 32)
                .unwrap()
                .values()
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            let qw = transport.noise().apply_sqrt_covariance(&w).l2_norm();
            assert!(out.l2_norm() <= sup_v * qw * (1.0 + 1e-12));
        }
    }

    #[test]
    fn nemytskii_drift_is_one_lipschitz() {
        let m = ModeSet::new(32).unwrap();
        let model = NemytskiiNLSE::standard(m).unwrap();
        let lip = model.lipschitz().unwrap().drift;
        for k in 0..1000 {
            let s = k as f64 * 0.37;
            let scale = c(0.5 + (k % 7) as f64, 0.0);
            let u = field(m, s).scaled(scale);
            let v = field(m, s + 0.011 * k as f64).scaled(scale);
            let du = model.drift(0.0, &u).minus(&model.drift(0.0, &v)).unwrap().l2_norm();
            assert!(du <= lip * u.minus(&v).unwrap().l2_norm() * (1.0 + 1e-10));
        }
    }

    #[test]
    fn commutativity_symmetry() {
        let m = ModeSet::new(16).unwrap();
        let u = field(m, 0.6);
        for model in all_models(m) {
            assert!(model.commutative_noise());
            let noise = model.noise();
            for a in [0usize, 3, 8, 15] {
                for b in [1usize, 7, 9] {
                    let fa = noise.apply_sqrt_covariance(&noise.basis_function(a));
                    let fb = noise.apply_sqrt_covariance(&noise.basis_function(b));
                    let ab = model.noise_derivative_multiply(&u, &model.noise_multiply(&u, &fa), &fb);
                    let ba = model.noise_derivative_multiply(&u, &model.noise_multiply(&u, &fb), &fa);
                    assert!(ab.minus(&ba).unwrap().l2_norm() < 1e-10, "{}", model.name());
                }
            }
        }
    }

    #[test]
    fn milstein_fast_path_matches_basis_sum() {
        let m = ModeSet::new(16).unwrap();
        let u = field(m, 1.7);
        for model in all_models(m) {
            let tape = sample_tape(model.noise(), 0.01, 1, 3, 0).unwrap();
            let q = model.noise().increment_field(&tape.step_coords(0));
            let fast = milstein_term(model.as_ref(), &u, &q, 0.01).unwrap();
            let slow = milstein_term_by_basis(model.as_ref(), &u, &q, 0.01).unwrap();
            let scale = slow.l2_norm().max(1e-300);
            assert!(fast.minus(&slow).unwrap().l2_norm() <= 1e-10 * scale, "{}", model.name());
        }
    }

    #[test]
    fn fused_increment_matches_composition() {
        let m = ModeSet::new(32).unwrap();
        let u = power_decay_field(6.0, m);
        for model in all_models(m) {
            let tape = sample_tape(model.noise(), 1.0 / 64.0, 1, 8, 2).unwrap();
            let q = model.noise().increment_field(&tape.step_coords(0));
            for milstein in [false, true] {
                let fused = model.increment(0.0, &u, &q, 1.0 / 64.0, milstein).unwrap();
                let composed =
                    composed_increment(model.as_ref(), 0.0, &u, &q, 1.0 / 64.0, milstein).unwrap();
                assert!(
                    fused.minus(&composed).unwrap().l2_norm() < 1e-13,
                    "{} milstein={milstein}",
                    model.name()
                );
            }
        }
    }

    #[test]
    fn outputs_are_band_limited_and_stable() {
        let m = ModeSet::new(16).unwrap();
        let u = field(m, 0.9);
        for model in all_models(m) {
            let f = model.drift(0.0, &u);
            assert_eq!(f.modes(), m);
            let again = to_spectral(&to_physical(&f, model.grid()).unwrap(), m).unwrap();
            assert!(f.minus(&again).unwrap().l2_norm() < 1e-13);
        }
    }

    #[test]
    fn model_names_round_trip() {
        for kind in ModelKind::ALL {
            assert_eq!(kind.name().parse::<ModelKind>().unwrap(), kind);
        }
        assert!("maxwell".parse::<ModelKind>().is_err());
    }

    #[test]
    fn bounded_coefficient_jacobian_matches_finite_differences() {
        let psi = NoiseCoefficient::Bounded;
        for &(z, v) in &[(c(0.3, -1.2), c(1.0, 0.5)), (c(-2.0, 0.1), c(-0.3, 2.0))] {
            let eps = 1e-6;
            let fd = (psi.value(z + eps * v) - psi.value(z - eps * v)) / (2.0 * eps);
            assert!((fd - psi.derivative(z, v)).norm() < 1e-8);
        }
    }
}
