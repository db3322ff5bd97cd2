//! Fits of `y(n) = C exp(-c n) / n^p` by weighted least squares in log space.

use log::warn;
use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest accepted condition number of the column-scaled weighted design matrix.
pub const MAX_CONDITION: f64 = 1e10;

/// A measured point `y(n) +- sigma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub n: f64,
    pub y: f64,
    pub sigma: f64,
}

impl DecayPoint {
    pub fn new(n: f64, y: f64, sigma: f64) -> Self {
        DecayPoint { n, y, sigma }
    }
}

/// Which model was fitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    /// `log C - c n - p log n`.
    PowerCorrected,
    /// `log C - c n`.
    PureExponential,
}

/// A fitted decay law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FitResult {
    #[serde(rename = "C")]
    pub amplitude: f64,
    pub c: f64,
    /// Zero for the pure exponential.
    pub p: f64,
    /// Covariance of `(C, c, p)`; the `p` row and column vanish for the pure exponential.
    pub covariance: [[f64; 3]; 3],
    pub fit_range: [f64; 2],
    /// `sqrt(chi^2)` of the weighted log residuals.
    pub residual_norm: f64,
    pub chi2: f64,
    pub dof: usize,
    pub condition_number: f64,
    /// `chi^2 + 2k`.
    pub aic: f64,
    pub method: String,
    pub model: FitModel,
    pub n_points: usize,
    /// Coupling the data were measured at, when known.
    #[serde(default)]
    pub kappa: Option<f64>,
}

impl FitResult {
    pub fn sigma_c(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }

    pub fn sigma_p(&self) -> f64 {
        self.covariance[2][2].sqrt()
    }

    /// Model value at `n`.
    pub fn eval(&self, n: f64) -> f64 {
        self.amplitude * (-self.c * n).exp() / n.powf(self.p)
    }
}

/// Both fits on the same points, and which one the information criterion picks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FitReport {
    pub power: FitResult,
    pub pure_exponential: FitResult,
    /// `AIC(pure) - AIC(power)`; positive when the power correction is preferred.
    pub delta_aic: f64,
    pub prefers_power: bool,
    /// Points excluded as nonpositive or below `2 sigma`, by `n`.
    pub dropped: Vec<f64>,
}

/// Selects the usable points: inside `range`, `sigma > 0`, and `y > 2 sigma`.
fn select(data: &[DecayPoint], range: Option<(f64, f64)>) -> Result<(Vec<DecayPoint>, Vec<f64>)> {
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    for pt in data {
        if let Some((lo, hi)) = range {
            if pt.n < lo || pt.n > hi {
                continue;
            }
        }
        if !(pt.n > 0.0) || !pt.y.is_finite() || !pt.sigma.is_finite() {
            return Err(Error::Invalid(format!("bad data point {pt:?}")));
        }
        if !(pt.sigma > 0.0) {
            return Err(Error::Precondition(format!("sigma must be positive at n = {}", pt.n)));
        }
        if pt.y <= 0.0 || pt.y <= 2.0 * pt.sigma {
            warn!("dropping n = {}: y = {} is not above 2 sigma = {}", pt.n, pt.y, 2.0 * pt.sigma);
            dropped.push(pt.n);
            continue;
        }
        keep.push(*pt);
    }
    Ok((keep, dropped))
}

fn wls(points: &[DecayPoint], model: FitModel, kappa: Option<f64>) -> Result<FitResult> {
    let k = match model {
        FitModel::PowerCorrected => 3,
        FitModel::PureExponential => 2,
    };
    let rows = points.len();
    if rows < k {
        return Err(Error::Precondition(format!("{rows} points cannot fix {k} parameters")));
    }
    // Rows scaled by 1 / sigma_log with sigma_log = sigma / y.
    let mut a = DMatrix::<f64>::zeros(rows, k);
    let mut b = DVector::<f64>::zeros(rows);
    for (i, pt) in points.iter().enumerate() {
        let w = pt.y / pt.sigma;
        a[(i, 0)] = w;
        a[(i, 1)] = -pt.n * w;
        if k == 3 {
            a[(i, 2)] = -pt.n.ln() * w;
        }
        b[i] = pt.y.ln() * w;
    }
    // Column equilibration before judging the conditioning.
    let scale: Vec<f64> = (0..k).map(|j| a.column(j).norm()).collect();
    if scale.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Numeric("design matrix has a zero column".into()));
    }
    let mut a_s = a.clone();
    for (j, &s) in scale.iter().enumerate() {
        a_s.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = a_s.clone().svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    log::debug!("decay fit: condition number {condition_number:.3e} (threshold {MAX_CONDITION:.0e})");
    if !(condition_number <= MAX_CONDITION) {
        return Err(Error::Numeric(format!(
            "rank-deficient design: condition number {condition_number:.3e} exceeds {MAX_CONDITION:.0e}"
        )));
    }
    let x_s = svd.solve(&b, 0.0).map_err(|e| Error::Numeric(e.to_string()))?;
    let theta: Vec<f64> = (0..k).map(|j| x_s[j] / scale[j]).collect();
    let resid = &b - &a * DVector::from_column_slice(&theta);
    let chi2 = resid.norm_squared();
    let dof = rows - k;

    // (A^T A)^{-1} = S^{-1} V Sigma^{-2} V^T S^{-1}.
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut cov_theta = vec![vec![0.0; k]; k];
    for (i, row) in cov_theta.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            let s: f64 = (0..k).map(|l| v_t[(l, i)] * v_t[(l, j)] / (sv[l] * sv[l])).sum();
            *c = s / (scale[i] * scale[j]);
        }
    }
    // Scatter beyond the quoted errors inflates the covariance.
    let inflate = if dof > 0 { (chi2 / dof as f64).max(1.0) } else { 1.0 };

    let amplitude = theta[0].exp();
    // (C, c, p) = (exp t0, t1, t2): Jacobian diag(C, 1, 1).
    let jac = [amplitude, 1.0, 1.0];
    let mut cov = Matrix3::<f64>::zeros();
    for i in 0..k {
        for j in 0..k {
            cov[(i, j)] = inflate * jac[i] * jac[j] * cov_theta[i][j];
        }
    }
    let cov = (cov + cov.transpose()) * 0.5;
    let covariance = [
        [cov[(0, 0)], cov[(0, 1)], cov[(0, 2)]],
        [cov[(1, 0)], cov[(1, 1)], cov[(1, 2)]],
        [cov[(2, 0)], cov[(2, 1)], cov[(2, 2)]],
    ];
    let n_lo = points.iter().map(|p| p.n).fold(f64::INFINITY, f64::min);
    let n_hi = points.iter().map(|p| p.n).fold(f64::NEG_INFINITY, f64::max);
    Ok(FitResult {
        amplitude,
        c: theta[1],
        p: if k == 3 { theta[2] } else { 0.0 },
        covariance,
        fit_range: [n_lo, n_hi],
        residual_norm: chi2.sqrt(),
        chi2,
        dof,
        condition_number,
        aic: chi2 + 2.0 * k as f64,
        method: "wls-log-svd".into(),
        model,
        n_points: rows,
        kappa,
    })
}

/// Fits `log y = log C - c n - p log n` with weights `(y / sigma)^2`, and the
/// `p = 0` submodel on the same points. Needs at least 4 usable points in `range`.
pub fn fit_decay(data: &[DecayPoint], range: Option<(f64, f64)>) -> Result<FitReport> {
    fit_decay_at(data, range, None)
}

/// [`fit_decay`] with the coupling recorded in the results.
pub fn fit_decay_at(data: &[DecayPoint], range: Option<(f64, f64)>, kappa: Option<f64>) -> Result<FitReport> {
    let (points, dropped) = select(data, range)?;
    if points.len() < 4 {
        return Err(Error::Precondition(format!(
            "decay fit needs at least 4 points with y > 2 sigma, got {}",
            points.len()
        )));
    }
    let power = wls(&points, FitModel::PowerCorrected, kappa)?;
    let pure_exponential = wls(&points, FitModel::PureExponential, kappa)?;
    let delta_aic = pure_exponential.aic - power.aic;
    Ok(FitReport { power, pure_exponential, delta_aic, prefers_power: delta_aic > 0.0, dropped })
}

/// Difference of two fitted decay rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CompareReport {
    pub c_gauge: f64,
    pub c_ising: f64,
    pub delta: f64,
    /// `sqrt(sigma_gauge^2 + sigma_ising^2)`.
    pub sigma: f64,
    /// `max(rel_tol |c_ising|, 2 sigma)`.
    pub tolerance: f64,
    pub pass: bool,
}

/// Compares `c` between a gauge fit and an Ising fit at the same `kappa`.
pub fn compare_c(gauge: &FitResult, ising: &FitResult, rel_tol: f64) -> Result<CompareReport> {
    match (gauge.kappa, ising.kappa) {
        (Some(a), Some(b)) if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) => {
            return Err(Error::Precondition(format!("fits are at different kappa: {a} vs {b}")));
        }
        _ => {}
    }
    let (g, i) = (gauge.fit_range, ising.fit_range);
    if g[0] > i[1] || i[0] > g[1] {
        return Err(Error::Precondition(format!("fit ranges {g:?} and {i:?} do not overlap")));
    }
    let delta = gauge.c - ising.c;
    let sigma = (gauge.covariance[1][1] + ising.covariance[1][1]).sqrt();
    let tolerance = (rel_tol * ising.c.abs()).max(2.0 * sigma);
    Ok(CompareReport { c_gauge: gauge.c, c_ising: ising.c, delta, sigma, tolerance, pass: delta.abs() <= tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(f: impl Fn(f64) -> f64, rel: f64) -> Vec<DecayPoint> {
        (4..=20)
            .map(|n| {
                let n = n as f64;
                let y = f(n);
                DecayPoint::new(n, y, rel * y)
            })
            .collect()
    }

    #[test]
    fn recovers_noiseless_parameters() {
        let d = synth(|n| 2.0 * (-0.3 * n).exp() / n.powf(0.7), 1e-3);
        let r = fit_decay(&d, None).unwrap();
        assert!((r.power.amplitude - 2.0).abs() < 1e-8);
        assert!((r.power.c - 0.3).abs() < 1e-8);
        assert!((r.power.p - 0.7).abs() < 1e-8);
        assert!(r.prefers_power);
        assert_eq!(r.power.fit_range, [4.0, 20.0]);
    }

    #[test]
    fn pure_exponential_prefers_submodel() {
        let d = synth(|n| 0.5 * (-0.2 * n).exp(), 1e-2);
        let r = fit_decay(&d, None).unwrap();
        assert!(r.power.p.abs() <= 2.0 * r.power.sigma_p() + 1e-12);
        assert!(!r.prefers_power);
        assert!((r.pure_exponential.c - 0.2).abs() < 1e-10);
    }

    #[test]
    fn drops_points_below_noise() {
        let mut d = synth(|n| (-0.3 * n).exp(), 0.01);
        d.push(DecayPoint::new(21.0, 1e-4, 1e-3));
        d.push(DecayPoint::new(22.0, -1e-4, 1e-3));
        let r = fit_decay(&d, None).unwrap();
        assert_eq!(r.dropped, vec![21.0, 22.0]);
        assert_eq!(r.power.n_points, 17);
    }

    #[test]
    fn needs_four_points() {
        let d = synth(|n| (-0.3 * n).exp(), 0.01);
        assert!(matches!(fit_decay(&d, Some((4.0, 6.0))), Err(Error::Precondition(_))));
        assert!(fit_decay(&d, Some((4.0, 7.0))).is_ok());
    }

    #[test]
    fn rejects_nonpositive_sigma() {
        let mut d = synth(|n| (-0.3 * n).exp(), 0.01);
        d[3].sigma = 0.0;
        assert!(fit_decay(&d, None).is_err());
    }

    #[test]
    fn covariance_is_symmetric_psd() {
        let d: Vec<DecayPoint> = (4..=20)
            .map(|n| {
                let n = n as f64;
                let wiggle = 1.0 + 0.01 * (n * 1.7).sin();
                DecayPoint::new(n, 2.0 * (-0.3 * n).exp() / n.powf(0.7) * wiggle, 0.01 * (-0.3 * n).exp())
            })
            .collect();
        let r = fit_decay(&d, None).unwrap();
        let c = Matrix3::from_fn(|i, j| r.power.covariance[i][j]);
        assert_eq!(c, c.transpose());
        let eig = c.symmetric_eigenvalues();
        assert!(eig.iter().all(|&l| l >= -1e-12 * eig.amax()));
    }

    #[test]
    fn compare_identical_and_mismatched() {
        let d = synth(|n| 2.0 * (-0.3 * n).exp() / n.powf(0.7), 1e-2);
        let a = fit_decay_at(&d, None, Some(0.2)).unwrap().power;
        let r = compare_c(&a, &a, 0.1).unwrap();
        assert_eq!(r.delta, 0.0);
        assert!(r.pass);
        let b = fit_decay_at(&d, None, Some(0.3)).unwrap().power;
        assert!(compare_c(&a, &b, 0.1).is_err());
        let far = fit_decay_at(&d, Some((12.0, 20.0)), Some(0.2)).unwrap().power;
        let near = fit_decay_at(&d, Some((4.0, 10.0)), Some(0.2)).unwrap().power;
        assert!(compare_c(&near, &far, 0.1).is_err());
    }
}
