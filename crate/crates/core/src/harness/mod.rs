//! Strong-error estimation, rate regression, reference solutions and the
//! convergence study driver.

mod report;
mod scalar;
mod study;

pub use report::{parse_csv, write_csv, CsvTable, STEP_COLUMN};
pub use scalar::{
    iterated_integral_check, scalar_strong_order, single_mode_reference_error, IteratedIntegralCheck,
    ReferenceCheck, ScalarOrders,
};
pub use study::{
    reference_trajectory, run_study, ErrorReport, Scale, StudyConfig, StudyOutcome, VariantRates,
};

use crate::error::{Error, Result};
use crate::spectral::SpectralField;

/// Ordinary least-squares slope of `log₂ y` against `log₂ x`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::InvalidArgument(
            "rate regression needs at least two points".into(),
        ));
    }
    if let Some(bad) = xs.iter().chain(ys).find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "rate regression needs positive finite data, got {bad}"
        )));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.log2()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.log2()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "rate regression needs at least two distinct step sizes".into(),
        ));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Slopes fitted over all steps and over the three largest steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub full: f64,
    pub restricted: f64,
}

pub const RESTRICTED_WINDOW: usize = 3;

pub fn estimate_rate(hs: &[f64], errors: &[f64]) -> Result<RateEstimate> {
    let full = ols_slope(hs, errors)?;
    let mut pairs: Vec<(f64, f64)> = hs.iter().copied().zip(errors.iter().copied()).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs.truncate(RESTRICTED_WINDOW);
    let restricted = if pairs.len() == hs.len() {
        full
    } else {
        let (h, e): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        ols_slope(&h, &e)?
    };
    Ok(RateEstimate { full, restricted })
}

/// `max_j ‖u_j − U_j‖_{L²}` over the listed times of one sample.
pub fn pathwise_max_error(approx: &[SpectralField], reference: &[SpectralField]) -> Result<f64> {
    if approx.len() != reference.len() {
        return Err(Error::GridMismatch(format!(
            "{} approximate states against {} reference states",
            approx.len(),
            reference.len()
        )));
    }
    let mut worst: f64 = 0.0;
    for (a, r) in approx.iter().zip(reference) {
        worst = worst.max(a.minus(r)?.l2_norm());
    }
    Ok(worst)
}

/// `((1/N) Σ_n m_n^p)^{1/p}` over per-sample maxima `m_n`.
pub fn aggregate_maxima(maxima: &[f64], p: f64) -> Result<f64> {
    if maxima.is_empty() {
        return Err(Error::InvalidArgument("no samples to aggregate".into()));
    }
    if !(p >= 2.0) {
        return Err(Error::InvalidArgument(format!("moment p = {p} must be at least 2")));
    }
    let mean = maxima.iter().map(|m| m.powf(p)).sum::<f64>() / maxima.len() as f64;
    Ok(mean.powf(1.0 / p))
}

/// Pathwise uniform strong error over samples: `samples[n] = (approx, reference)`.
pub fn uniform_error(
    samples: &[(Vec<SpectralField>, Vec<SpectralField>)],
    p: f64,
) -> Result<f64> {
    let maxima = samples
        .iter()
        .map(|(a, r)| pathwise_max_error(a, r))
        .collect::<Result<Vec<_>>>()?;
    aggregate_maxima(&maxima, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::ModeSet;
    use num_complex::Complex64;

    #[test]
    fn slopes_of_exact_power_laws() {
        let hs: Vec<f64> = (5..10).map(|n| 2f64.powi(-n)).collect();
        for (alpha, c) in [(1.0, 3.0), (0.5, 0.2), (0.83, 11.0)] {
            let e: Vec<f64> = hs.iter().map(|h| c * h.powf(alpha)).collect();
            assert!((ols_slope(&hs, &e).unwrap() - alpha).abs() < 1e-12);
            let r = estimate_rate(&hs, &e).unwrap();
            assert!((r.restricted - alpha).abs() < 1e-12);
        }
    }

    #[test]
    fn slope_matches_normal_equations() {
        // independent oracle: solve the 2×2 normal equations directly
        let hs: Vec<f64> = (5..10).map(|n| 2f64.powi(-n)).collect();
        let wiggle = [1.07, 0.93, 1.12, 0.97, 1.01];
        let e: Vec<f64> = hs.iter().zip(wiggle).map(|(h, w)| 0.4 * h.powf(0.7) * w).collect();
        let x: Vec<f64> = hs.iter().map(|h| h.log2()).collect();
        let y: Vec<f64> = e.iter().map(|v| v.log2()).collect();
        let n = x.len() as f64;
        let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let oracle = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!((ols_slope(&hs, &e).unwrap() - oracle).abs() < 1e-10);

        let restricted = estimate_rate(&hs, &e).unwrap().restricted;
        let top = ols_slope(&hs[..3], &e[..3]).unwrap();
        assert_eq!(restricted, top);
    }

    #[test]
    fn regression_rejects_bad_data() {
        assert!(ols_slope(&[0.5], &[1.0]).is_err());
        assert!(ols_slope(&[0.5, 0.25], &[1.0, 0.0]).is_err());
        assert!(ols_slope(&[0.5, 0.25], &[1.0, -1.0]).is_err());
        assert!(ols_slope(&[0.5, 0.5], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn uniform_error_examples() {
        let m = ModeSet::new(4).unwrap();
        let a = SpectralField::basis(m, 1).unwrap();
        assert_eq!(uniform_error(&[(vec![a.clone()], vec![a.clone()])], 2.0).unwrap(), 0.0);

        let zero = SpectralField::zeros(m);
        let three = SpectralField::basis(m, 0).unwrap().scaled(Complex64::new(3.0, 0.0));
        let four = SpectralField::basis(m, 0).unwrap().scaled(Complex64::new(0.0, 4.0));
        assert!((uniform_error(&[(vec![three.clone()], vec![zero.clone()])], 2.0).unwrap() - 3.0).abs() < 1e-15);

        let two = [
            (vec![zero.clone(), three.clone()], vec![zero.clone(), zero.clone()]),
            (vec![four.clone(), zero.clone()], vec![zero.clone(), zero.clone()]),
        ];
        assert!((uniform_error(&two, 2.0).unwrap() - (12.5f64).sqrt()).abs() < 1e-14);
        assert!(uniform_error(&two, 4.0).unwrap() >= uniform_error(&two, 2.0).unwrap());

        assert!(uniform_error(&[(vec![zero.clone()], vec![])], 2.0).is_err());
        assert!(aggregate_maxima(&[1.0], 1.0).is_err());
    }
}
