//! Unit-root and ARCH-effect tests used to vet each mode before fitting.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::GarchError;

/// 5% asymptotic Dickey-Fuller critical value for the constant-only regression.
pub const ADF_CRITICAL_5PCT: f64 = -2.86;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    /// Unit root rejected at 5%, i.e. the series looks stationary.
    pub reject: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchLmResult {
    pub statistic: f64,
    pub critical: f64,
    pub present: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub adf_statistic: f64,
    pub adf_reject_unit_root: bool,
    pub arch_lm_statistic: f64,
    pub arch_effects_present: bool,
    pub lags_used: usize,
}

struct Ols {
    coef: DVector<f64>,
    rss: f64,
    /// `(XᵀX)⁻¹`
    xtx_inv: DMatrix<f64>,
    rows: usize,
}

fn ols(x: DMatrix<f64>, y: &DVector<f64>) -> Result<Ols, GarchError> {
    let rows = x.nrows();
    if rows <= x.ncols() {
        return Err(GarchError::SingularRegression);
    }
    let xt = x.transpose();
    let chol = (&xt * &x)
        .cholesky()
        .ok_or(GarchError::SingularRegression)?;
    let coef = chol.solve(&(&xt * y));
    let resid = y - &x * &coef;
    Ok(Ols {
        rss: resid.norm_squared(),
        xtx_inv: chol.inverse(),
        coef,
        rows,
    })
}

fn check(series: &[f64], lags: usize) -> Result<(), GarchError> {
    let min = lags + 10;
    if series.len() < min {
        return Err(GarchError::TooShort {
            len: series.len(),
            min,
        });
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(GarchError::NonFinite(i));
    }
    Ok(())
}

/// Augmented Dickey-Fuller test with a constant:
/// `Δy_t = c + γ y_{t-1} + Σ_{i=1..lags} φ_i Δy_{t-i} + e_t`, statistic `γ̂ / se(γ̂)`.
pub fn adf_test(series: &[f64], lags: usize) -> Result<AdfResult, GarchError> {
    check(series, lags)?;
    let dy: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    // Row for Δy[t] needs Δy[t - lags]; y_{t-1} of Δy[t] is series[t].
    let rows = dy.len() - lags;
    let cols = 2 + lags;
    let x = DMatrix::from_fn(rows, cols, |r, c| {
        let t = r + lags;
        match c {
            0 => 1.0,
            1 => series[t],
            _ => dy[t - (c - 1)],
        }
    });
    let y = DVector::from_iterator(rows, dy[lags..].iter().copied());
    let fit = ols(x, &y)?;
    let dof = (fit.rows - cols) as f64;
    let s2 = fit.rss / dof;
    let se = (s2 * fit.xtx_inv[(1, 1)]).sqrt();
    if !(se > 0.0 && se.is_finite()) {
        return Err(GarchError::SingularRegression);
    }
    let statistic = fit.coef[1] / se;
    Ok(AdfResult {
        statistic,
        reject: statistic < ADF_CRITICAL_5PCT,
    })
}

/// `χ²(dof)` quantile at `p`.
pub fn chi_squared_quantile(dof: usize, p: f64) -> f64 {
    ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(p)
}

/// Engle's LM test: regress squared demeaned values on `lags` of their own
/// lags; `T·R²` is compared against the 95% `χ²(lags)` quantile.
pub fn arch_lm_test(series: &[f64], lags: usize) -> Result<ArchLmResult, GarchError> {
    if lags == 0 {
        return Err(GarchError::ZeroLags);
    }
    check(series, lags)?;
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let e2: Vec<f64> = series.iter().map(|v| (v - mean).powi(2)).collect();
    let rows = e2.len() - lags;
    let x = DMatrix::from_fn(rows, lags + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            e2[r + lags - c]
        }
    });
    let y = DVector::from_iterator(rows, e2[lags..].iter().copied());
    let y_mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    if !(tss > 0.0) {
        return Err(GarchError::SingularRegression);
    }
    let fit = ols(x, &y)?;
    let r2 = 1.0 - fit.rss / tss;
    let statistic = rows as f64 * r2;
    let critical = chi_squared_quantile(lags, 0.95);
    Ok(ArchLmResult {
        statistic,
        critical,
        present: statistic > critical,
    })
}

pub fn diagnose(series: &[f64], adf_lags: usize, arch_lags: usize) -> Result<DiagnosticsReport, GarchError> {
    let adf = adf_test(series, adf_lags)?;
    let lm = arch_lm_test(series, arch_lags)?;
    Ok(DiagnosticsReport {
        adf_statistic: adf.statistic,
        adf_reject_unit_root: adf.reject,
        arch_lm_statistic: lm.statistic,
        arch_effects_present: lm.present,
        lags_used: adf_lags.max(1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::garch::{simulate, GarchParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn chi_squared_12_quantile() {
        // Tabulated 95% point of χ²(12).
        assert!((chi_squared_quantile(12, 0.95) - 21.026).abs() < 1e-3);
    }

    #[test]
    fn adf_rejects_white_noise() {
        let r = adf_test(&noise(500, 1), 1).unwrap();
        assert!(r.reject);
        assert!(r.statistic < -10.0, "{}", r.statistic);
    }

    #[test]
    fn adf_keeps_random_walk() {
        let walk: Vec<f64> = noise(500, 2)
            .iter()
            .scan(0.0, |s, e| {
                *s += e;
                Some(*s)
            })
            .collect();
        let r = adf_test(&walk, 1).unwrap();
        assert!(!r.reject, "{}", r.statistic);
    }

    #[test]
    fn adf_too_short() {
        assert_eq!(
            adf_test(&noise(10, 3), 1).unwrap_err(),
            GarchError::TooShort { len: 10, min: 11 }
        );
    }

    #[test]
    fn arch_lm_flags_garch() {
        let p = GarchParams::new(0.1, vec![0.3], vec![0.6]).unwrap();
        let r = arch_lm_test(&simulate(&p, 2000, 5).unwrap(), 12).unwrap();
        assert!(r.present, "{}", r.statistic);
    }

    #[test]
    fn arch_lm_quiet_on_noise() {
        let r = arch_lm_test(&noise(2000, 6), 12).unwrap();
        assert!(!r.present, "{}", r.statistic);
    }

    #[test]
    fn arch_lm_zero_lags() {
        assert_eq!(arch_lm_test(&noise(100, 7), 0).unwrap_err(), GarchError::ZeroLags);
    }

    #[test]
    fn constant_series_is_singular() {
        assert_eq!(
            arch_lm_test(&[1.0; 40], 2).unwrap_err(),
            GarchError::SingularRegression
        );
    }
}
