//! Diagonal generators, their semigroups, and rational time-stepping schemes.
//!
//! Equations are written as `dU + AU dt = …`, so the semigroup is
//! `S(t) = e^{-tA}` and every scheme is `R_h = r(-hA)` for a rational symbol
//! `r`. Both shipped generators are skew-adjoint and act on `e_ℓ` by a purely
//! imaginary symbol `a_ℓ`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{ModeSet, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeneratorKind {
    /// `A = iΔ`, `a_ℓ = -iℓ²`.
    Schrodinger,
    /// `Au = -u′`, `a_ℓ = -iℓ`; `-A` generates the left shift.
    Transport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Generator {
    kind: GeneratorKind,
}

impl Generator {
    pub fn new(kind: GeneratorKind) -> Self {
        Generator { kind }
    }

    pub fn schrodinger() -> Self {
        Generator::new(GeneratorKind::Schrodinger)
    }

    pub fn transport() -> Self {
        Generator::new(GeneratorKind::Transport)
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    /// Eigenvalue `a_ℓ` of `A` on `e_ℓ`.
    pub fn symbol(&self, wavenumber: i64) -> Complex64 {
        let l = wavenumber as f64;
        match self.kind {
            GeneratorKind::Schrodinger => Complex64::new(0.0, -l * l),
            GeneratorKind::Transport => Complex64::new(0.0, -l),
        }
    }

    /// Weight of `e_ℓ` in the graph norm of `dom(A^β)`, `(1+|a_ℓ|²)^{β/2}`.
    pub fn domain_weight(&self, wavenumber: i64, beta: f64) -> f64 {
        (1.0 + self.symbol(wavenumber).norm_sqr()).powf(beta / 2.0)
    }
}

/// `S(t)u`: multiplies `c_ℓ` by `e^{-t a_ℓ}`.
pub fn semigroup_apply(generator: &Generator, t: f64, u: &SpectralField) -> SpectralField {
    assert!(t >= 0.0, "semigroup evaluated at negative time {t}");
    u.map_modes(|l| (-t * generator.symbol(l)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimeScheme {
    Exponential,
    ImplicitEuler,
    CrankNicolson,
}

impl TimeScheme {
    pub const ALL: [TimeScheme; 3] = [
        TimeScheme::Exponential,
        TimeScheme::CrankNicolson,
        TimeScheme::ImplicitEuler,
    ];

    /// Rational (or exponential) symbol `r(z)`.
    pub fn symbol(&self, z: Complex64) -> Result<Complex64> {
        let one = Complex64::new(1.0, 0.0);
        match self {
            TimeScheme::Exponential => Ok(z.exp()),
            TimeScheme::ImplicitEuler => {
                let denom = one - z;
                if denom.norm() == 0.0 {
                    return Err(Error::Pole(z));
                }
                Ok(one / denom)
            }
            TimeScheme::CrankNicolson => {
                let two = Complex64::new(2.0, 0.0);
                let denom = two - z;
                if denom.norm() == 0.0 {
                    return Err(Error::Pole(z));
                }
                Ok((two + z) / denom)
            }
        }
    }

    /// Multiplier of `e_ℓ` in `R_h`, i.e. `r(-h a_ℓ)`.
    ///
    /// Never a pole: `Re(a_ℓ) = 0` and `h > 0` keep `-h a_ℓ` on the
    /// imaginary axis.
    pub fn multiplier(&self, generator: &Generator, h: f64, wavenumber: i64) -> Complex64 {
        self.symbol(-h * generator.symbol(wavenumber))
            .expect("skew-adjoint symbols never hit a pole")
    }

    /// Predicted approximation order on `dom(A^β)`: `β∧1` (exponential),
    /// `β/2∧1` (implicit Euler), `2β/3∧1` (Crank–Nicolson).
    pub fn predicted_rate(&self, beta: f64) -> f64 {
        match self {
            TimeScheme::Exponential => beta.min(1.0),
            TimeScheme::ImplicitEuler => (beta / 2.0).min(1.0),
            TimeScheme::CrankNicolson => (2.0 * beta / 3.0).min(1.0),
        }
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            TimeScheme::Exponential => "EXE",
            TimeScheme::ImplicitEuler => "IE",
            TimeScheme::CrankNicolson => "CN",
        }
    }
}

impl fmt::Display for TimeScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimeScheme::Exponential => "exponential",
            TimeScheme::ImplicitEuler => "implicit-euler",
            TimeScheme::CrankNicolson => "crank-nicolson",
        })
    }
}

impl std::str::FromStr for TimeScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exe" | "ex" | "exp" | "exponential" => Ok(TimeScheme::Exponential),
            "ie" | "implicit-euler" | "implicit_euler" => Ok(TimeScheme::ImplicitEuler),
            "cn" | "crank-nicolson" | "crank_nicolson" => Ok(TimeScheme::CrankNicolson),
            other => Err(Error::InvalidArgument(format!("unknown scheme '{other}'"))),
        }
    }
}

/// `R_h u`.
pub fn scheme_apply(
    scheme: TimeScheme,
    generator: &Generator,
    h: f64,
    u: &SpectralField,
) -> SpectralField {
    assert!(h > 0.0, "step size must be positive, got {h}");
    match scheme {
        TimeScheme::Exponential => semigroup_apply(generator, h, u),
        _ => u.map_modes(|l| scheme.multiplier(generator, h, l)),
    }
}

/// Outcome of a scheme-order measurement.
#[derive(Debug, Clone, PartialEq)]
pub enum OrderMeasurement {
    /// Every error at or below `1e-12`: the scheme reproduces the semigroup.
    Exact { max_error: f64 },
    Slope { slope: f64, errors: Vec<f64> },
}

impl OrderMeasurement {
    pub fn slope(&self) -> Option<f64> {
        match self {
            OrderMeasurement::Exact { .. } => None,
            OrderMeasurement::Slope { slope, .. } => Some(*slope),
        }
    }
}

const EXACT_THRESHOLD: f64 = 1e-12;

fn steps_for(h: f64, horizon: f64) -> Result<usize> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step size {h} must be positive")));
    }
    let steps = (horizon / h).round();
    if steps < 1.0 || (steps * h - horizon).abs() > 1e-12 * horizon.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "step size {h} does not divide horizon {horizon}"
        )));
    }
    Ok(steps as usize)
}

fn finish(hs: &[f64], errors: Vec<f64>) -> Result<OrderMeasurement> {
    let max_error = errors.iter().cloned().fold(0.0, f64::max);
    if max_error <= EXACT_THRESHOLD {
        return Ok(OrderMeasurement::Exact { max_error });
    }
    let slope = crate::harness::ols_slope(hs, &errors)?;
    Ok(OrderMeasurement::Slope { slope, errors })
}

/// Fits the order of `R_h` on a single vector `u`:
/// `E(h) = max_{jh ≤ T} ‖(S(t_j) − R_h^j)u‖_{L²}`, slope of `log₂E` against
/// `log₂h`. Powers `R_h^j` are built by repeated application.
pub fn measure_approximation_order(
    generator: &Generator,
    scheme: TimeScheme,
    u: &SpectralField,
    hs: &[f64],
    horizon: f64,
) -> Result<OrderMeasurement> {
    if u.l2_norm() == 0.0 {
        return Err(Error::InvalidArgument("test vector must be nonzero".into()));
    }
    let mut errors = Vec::with_capacity(hs.len());
    for &h in hs {
        let steps = steps_for(h, horizon)?;
        let mut approx = u.clone();
        let mut worst: f64 = 0.0;
        for j in 1..=steps {
            approx = scheme_apply(scheme, generator, h, &approx);
            let exact = semigroup_apply(generator, j as f64 * h, u);
            worst = worst.max(exact.minus(&approx)?.l2_norm());
        }
        errors.push(worst);
    }
    finish(hs, errors)
}

/// Fits the order of `R_h` in the operator norm `L(dom(A^β), L²)`, the
/// worst case over the unit ball of `dom(A^β)`. For diagonal operators this
/// is `max_ℓ |e^{-t_j a_ℓ} − r(-h a_ℓ)^j| / (1+|a_ℓ|²)^{β/2}`.
pub fn measure_operator_order(
    generator: &Generator,
    scheme: TimeScheme,
    beta: f64,
    modes: ModeSet,
    hs: &[f64],
    horizon: f64,
) -> Result<OrderMeasurement> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidArgument(format!("β = {beta} must be nonnegative")));
    }
    let mut errors = Vec::with_capacity(hs.len());
    for &h in hs {
        let steps = steps_for(h, horizon)?;
        let mut worst: f64 = 0.0;
        for l in modes.wavenumbers() {
            let r = scheme.multiplier(generator, h, l);
            let a = generator.symbol(l);
            let weight = generator.domain_weight(l, beta);
            let mut power = Complex64::new(1.0, 0.0);
            for j in 1..=steps {
                power *= r;
                let exact = (-(j as f64) * h * a).exp();
                worst = worst.max((exact - power).norm() / weight);
            }
        }
        errors.push(worst);
    }
    finish(hs, errors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{sobolev_norm, to_physical, ModeSet};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample_field(modes: ModeSet) -> SpectralField {
        SpectralField::from_fn(modes, |l| {
            c(1.0 / (1.0 + (l * l) as f64), 0.5 / (1.0 + (l.abs() as f64).powi(3)))
        })
    }

    #[test]
    fn generators_are_skew() {
        for g in [Generator::schrodinger(), Generator::transport()] {
            for l in -20..=20 {
                assert_eq!(g.symbol(l).re, 0.0);
            }
        }
    }

    #[test]
    fn semigroup_examples() {
        let m = ModeSet::new(16).unwrap();
        let u = sample_field(m);
        let g = Generator::schrodinger();
        assert_eq!(semigroup_apply(&g, 0.0, &u), u);
        let t = 0.3;
        let e2 = SpectralField::basis(m, 2).unwrap();
        let moved = semigroup_apply(&g, t, &e2);
        assert!((moved.coeff(2) - Complex64::from_polar(1.0, 4.0 * t)).norm() < 1e-15);
    }

    #[test]
    fn transport_is_left_shift() {
        let m = ModeSet::new(16).unwrap();
        let u = sample_field(m);
        let g = Generator::transport();
        let t = 0.37;
        let shifted = semigroup_apply(&g, t, &u);
        let p = to_physical(&shifted, 16).unwrap();
        for (n, v) in p.values().iter().enumerate() {
            let x = crate::spectral::grid_point(n, 16);
            assert!((v - u.evaluate(x + t)).norm() < 1e-13);
        }
    }

    #[test]
    fn symbol_examples() {
        assert_eq!(TimeScheme::ImplicitEuler.symbol(c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert_eq!(TimeScheme::CrankNicolson.symbol(c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert_eq!(TimeScheme::Exponential.symbol(c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert_eq!(TimeScheme::CrankNicolson.symbol(c(-2.0, 0.0)).unwrap(), c(0.0, 0.0));
        for y in [-100.0, -1.0, 0.25, 7.0, 1e4] {
            let r = TimeScheme::CrankNicolson.symbol(c(0.0, y)).unwrap();
            assert!((r.norm() - 1.0).abs() < 1e-15);
        }
        assert!(matches!(
            TimeScheme::ImplicitEuler.symbol(c(1.0, 0.0)),
            Err(Error::Pole(_))
        ));
        assert!(matches!(
            TimeScheme::CrankNicolson.symbol(c(2.0, 0.0)),
            Err(Error::Pole(_))
        ));
    }

    #[test]
    fn scheme_apply_examples() {
        let m = ModeSet::new(16).unwrap();
        let u = sample_field(m);
        for g in [Generator::schrodinger(), Generator::transport()] {
            let a = scheme_apply(TimeScheme::Exponential, &g, 0.1, &u);
            let b = semigroup_apply(&g, 0.1, &u);
            assert!(a.minus(&b).unwrap().l2_norm() < 1e-15);
            let cn = scheme_apply(TimeScheme::CrankNicolson, &g, 0.1, &u);
            assert!((cn.l2_norm() - u.l2_norm()).abs() < 1e-14);
        }
        // a_1 = -i, r(-h a_1) = 1/(1 + h a_1) = 1/(1 - i) for h = 1
        let e1 = SpectralField::basis(m, 1).unwrap();
        let ie = scheme_apply(TimeScheme::ImplicitEuler, &Generator::schrodinger(), 1.0, &e1);
        assert!((ie.coeff(1) - c(1.0, 0.0) / c(1.0, -1.0)).norm() < 1e-15);
        assert!((ie.coeff(1).norm() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn schemes_do_not_increase_sobolev_norms() {
        let m = ModeSet::new(32).unwrap();
        let u = sample_field(m);
        for g in [Generator::schrodinger(), Generator::transport()] {
            for scheme in TimeScheme::ALL {
                for h in [1e-3, 0.05, 1.0] {
                    let v = scheme_apply(scheme, &g, h, &u);
                    for s in [0.0, 1.0, 2.5] {
                        assert!(sobolev_norm(&v, s) <= sobolev_norm(&u, s) * (1.0 + 1e-12));
                    }
                }
            }
        }
    }

    #[test]
    fn exponential_scheme_is_exact() {
        let m = ModeSet::new(64).unwrap();
        let u = sample_field(m);
        let hs = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
        let out = measure_approximation_order(
            &Generator::schrodinger(),
            TimeScheme::Exponential,
            &u,
            &hs,
            0.5,
        )
        .unwrap();
        assert!(matches!(out, OrderMeasurement::Exact { max_error } if max_error <= 1e-12));
    }

    fn dyadic(lo: i32, hi: i32) -> Vec<f64> {
        (lo..=hi).map(|k| 2f64.powi(-k)).collect()
    }

    #[test]
    fn vector_order_crank_nicolson_and_implicit_euler() {
        let m = ModeSet::new(1 << 10).unwrap();
        let g = Generator::schrodinger();
        let hs = dyadic(4, 10);
        // (1+|ℓ|)^{-(2β+1)} test vectors
        let cn_vec = SpectralField::from_fn(m, |l| c((1.0 + l.abs() as f64).powi(-4), 0.0));
        let cn = measure_approximation_order(&g, TimeScheme::CrankNicolson, &cn_vec, &hs, 1.0)
            .unwrap()
            .slope()
            .unwrap();
        assert!((cn - 1.0).abs() <= 0.1, "CN slope {cn}");
        let ie_vec = SpectralField::from_fn(m, |l| c((1.0 + l.abs() as f64).powi(-3), 0.0));
        let ie = measure_approximation_order(&g, TimeScheme::ImplicitEuler, &ie_vec, &hs, 1.0)
            .unwrap()
            .slope()
            .unwrap();
        assert!((ie - 0.5).abs() <= 0.1, "IE slope {ie}");
    }

    #[test]
    fn order_measurement_rejects_bad_input() {
        let m = ModeSet::new(8).unwrap();
        let g = Generator::schrodinger();
        let zero = SpectralField::zeros(m);
        assert!(measure_approximation_order(&g, TimeScheme::ImplicitEuler, &zero, &[0.1], 1.0).is_err());
        let u = sample_field(m);
        assert!(measure_approximation_order(&g, TimeScheme::ImplicitEuler, &u, &[0.3], 1.0).is_err());
    }

    #[test]
    fn local_order_of_symbols() {
        // |e^z - r(z)| ≤ C|z|^{p+1} on |z| ≤ 1/2: fit the constant and check
        // that halving |z| shrinks the defect by the predicted power.
        for (scheme, power) in [(TimeScheme::ImplicitEuler, 2), (TimeScheme::CrankNicolson, 3)] {
            let mut worst_ratio: f64 = 0.0;
            for k in 0..64 {
                let angle = std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * k as f64 / 63.0;
                for radius in [0.5, 0.25, 0.125, 0.0625] {
                    let z = Complex64::from_polar(radius, angle);
                    let defect = (z.exp() - scheme.symbol(z).unwrap()).norm();
                    worst_ratio = worst_ratio.max(defect / radius.powi(power));
                }
            }
            assert!(worst_ratio < 1.0, "{scheme}: C = {worst_ratio}");
        }
    }
}
