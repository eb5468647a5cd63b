//! Resonance parameters from sampled probability densities: Lorentzian
//! least squares (Levenberg-Marquardt) and rational (Padé) fits.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::fit_rational;

/// Which route produced a resonance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    WindowFit,
    Pade,
    PhaseShift,
    Pole,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::WindowFit => "window-fit",
            Method::Pade => "pade",
            Method::PhaseShift => "phase-shift",
            Method::Pole => "pole",
        };
        f.write_str(s)
    }
}

/// Resonance energy (MeV) and width (keV) with 1σ uncertainties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    #[serde(rename = "J")]
    pub j: u32,
    pub method: Method,
    #[serde(rename = "E_R_MeV")]
    pub e_r: f64,
    #[serde(rename = "E_R_err")]
    pub e_r_err: f64,
    #[serde(rename = "Gamma_keV")]
    pub gamma_kev: f64,
    #[serde(rename = "Gamma_err")]
    pub gamma_err_kev: f64,
    #[serde(rename = "R_max_fm")]
    pub r_max: Option<f64>,
    #[serde(rename = "chi2red")]
    pub chi2red: Option<f64>,
}

impl Resonance {
    pub fn gamma_mev(&self) -> f64 {
        self.gamma_kev * 1e-3
    }
}

/// Normalized Lorentzian (1/π)(Γ/2)/((E − E_R)² + (Γ/2)²) in MeV⁻¹.
pub fn lorentzian(e: f64, e_r: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("width must be positive, got {gamma}")));
    }
    Ok(lorentzian_unchecked(e, e_r, gamma))
}

#[inline]
fn lorentzian_unchecked(e: f64, e_r: f64, gamma: f64) -> f64 {
    let hg = 0.5 * gamma;
    hg / (PI * ((e - e_r) * (e - e_r) + hg * hg))
}

/// A function sampled on increasing abscissae.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl SampledFunction {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid("abscissa and ordinate lengths differ"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("abscissae must increase strictly"));
        }
        Ok(Self { x, y })
    }

    fn window(&self, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
        self.x
            .iter()
            .zip(&self.y)
            .filter(|(x, _)| **x >= lo && **x <= hi)
            .map(|(x, y)| (*x, *y))
            .unzip()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Fit an additive constant as well.
    pub background: bool,
    /// Initial (E_R, Γ) in MeV; defaults to the sampled peak and its FWHM.
    pub init: Option<(f64, f64)>,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            background: false,
            init: None,
            max_iter: 200,
        }
    }
}

/// Outcome of a Lorentzian fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub resonance: Resonance,
    /// Fitted multiplier of the normalized Lorentzian.
    pub amplitude: f64,
    pub amplitude_err: f64,
    pub background: Option<f64>,
    pub chi2red: f64,
    pub iterations: usize,
    pub converged: bool,
    /// ‖Jᵀr‖ at the solution relative to ‖J‖‖r‖.
    pub gradient: f64,
    pub window: (f64, f64),
}

/// Half-maximum width of the peak at `imax`, by linear interpolation.
fn sampled_fwhm(x: &[f64], y: &[f64], imax: usize, base: f64) -> Option<f64> {
    let half = base + 0.5 * (y[imax] - base);
    let mut left = None;
    for i in (0..imax).rev() {
        if y[i] <= half {
            let t = (half - y[i]) / (y[i + 1] - y[i]);
            left = Some(x[i] + t * (x[i + 1] - x[i]));
            break;
        }
    }
    let mut right = None;
    for i in imax + 1..x.len() {
        if y[i] <= half {
            let t = (y[i - 1] - half) / (y[i - 1] - y[i]);
            right = Some(x[i - 1] + t * (x[i] - x[i - 1]));
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => Some(r - l),
        (Some(l), None) => Some(2.0 * (x[imax] - l)),
        (None, Some(r)) => Some(2.0 * (r - x[imax])),
        (None, None) => None,
    }
}

/// Error if a second maximum rises within 50% of the main one and is
/// separated from it by a dip of more than 20% of the main height.
fn check_single_peak(y: &[f64], imax: usize) -> Result<()> {
    let ymax = y[imax];
    for i in 1..y.len().saturating_sub(1) {
        if i == imax || !(y[i] >= y[i - 1] && y[i] > y[i + 1]) || y[i] < 0.5 * ymax {
            continue;
        }
        let (a, b) = if i < imax { (i, imax) } else { (imax, i) };
        let dip = y[a..=b].iter().cloned().fold(f64::INFINITY, f64::min);
        if y[i] - dip > 0.2 * ymax {
            return Err(Error::AmbiguousPeak(format!(
                "maxima of comparable height near {} and {} samples apart",
                y[i],
                i.abs_diff(imax)
            )));
        }
    }
    Ok(())
}

fn model_and_jacobian(x: &[f64], theta: &[f64], background: bool) -> (Vec<f64>, DMatrix<f64>) {
    let (a, er, g) = (theta[0], theta[1], theta[2]);
    let np = theta.len();
    let mut f = Vec::with_capacity(x.len());
    let mut jac = DMatrix::zeros(x.len(), np);
    for (i, &e) in x.iter().enumerate() {
        let d = (e - er) * (e - er) + 0.25 * g * g;
        let l = 0.5 * g / (PI * d);
        let dl_der = g * (e - er) / (PI * d * d);
        let dl_dg = (0.5 / d - 0.25 * g * g / (d * d)) / PI;
        let mut v = a * l;
        jac[(i, 0)] = l;
        jac[(i, 1)] = a * dl_der;
        jac[(i, 2)] = a * dl_dg;
        if background {
            v += theta[3];
            jac[(i, 3)] = 1.0;
        }
        f.push(v);
    }
    (f, jac)
}

/// Levenberg-Marquardt fit of amplitude·f(E; E_R, Γ) (+ constant) to the
/// samples in `window`.
pub fn fit_lorentzian(density: &SampledFunction, window: (f64, f64), opts: &FitOptions) -> Result<FitReport> {
    let (x, y) = density.window(window.0, window.1);
    if x.len() < 8 {
        return Err(Error::invalid(format!("{} samples in the fit window; need at least 8", x.len())));
    }
    let imax = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    check_single_peak(&y, imax)?;
    let base = if opts.background {
        y.iter().cloned().fold(f64::INFINITY, f64::min)
    } else {
        0.0
    };
    let (e0, g0) = match opts.init {
        Some(v) => v,
        None => {
            let spacing = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
            let w = sampled_fwhm(&x, &y, imax, base).unwrap_or(spacing * 4.0).max(spacing * 0.5);
            (x[imax], w)
        }
    };
    let mut theta = vec![(y[imax] - base) * PI * g0 / 2.0, e0, g0];
    if opts.background {
        theta.push(base);
    }
    let np = theta.len();
    let yv = DVector::from_column_slice(&y);
    let cost = |th: &[f64]| -> f64 {
        let (f, _) = model_and_jacobian(&x, th, opts.background);
        f.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum()
    };
    let mut lambda = 1e-3;
    let mut current = cost(&theta);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let (f, jac) = model_and_jacobian(&x, &theta, opts.background);
        let r = DVector::from_vec(f) - &yv;
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..np {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
            let c = if trial[2] > 0.0 { cost(&trial) } else { f64::INFINITY };
            if c <= current {
                let rel = theta
                    .iter()
                    .zip(step.iter())
                    .map(|(t, s)| s.abs() / t.abs().max(1e-300))
                    .fold(0.0, f64::max);
                theta = trial;
                current = c;
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                if rel < 1e-10 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step at any damping: stationary to working precision
            converged = true;
        }
        if converged {
            break;
        }
    }
    let (f, jac) = model_and_jacobian(&x, &theta, opts.background);
    let r = DVector::from_vec(f) - &yv;
    let dof = (x.len() - np).max(1) as f64;
    let chi2red = r.norm_squared() / dof;
    let jtj = jac.transpose() * &jac;
    // Heteroscedasticity-consistent (HC3) sandwich covariance: density errors
    // are far from uniform across a peak.
    let cov = match jtj.clone().try_inverse() {
        Some(inv) => {
            let mut meat = DMatrix::zeros(np, np);
            for i in 0..x.len() {
                let row = jac.row(i);
                let lev = (row * &inv * row.transpose())[(0, 0)];
                let w = r[i] * r[i] / (1.0 - lev).max(1e-12).powi(2);
                meat += row.transpose() * row * w;
            }
            &inv * meat * &inv
        }
        None => DMatrix::from_element(np, np, f64::NAN),
    };
    let err = |k: usize| cov[(k, k)].max(0.0).sqrt();
    let gradient = (jac.transpose() * &r).norm() / (jac.norm() * r.norm()).max(f64::MIN_POSITIVE);
    Ok(FitReport {
        resonance: Resonance {
            j: 0,
            method: Method::WindowFit,
            e_r: theta[1],
            e_r_err: err(1),
            gamma_kev: theta[2] * 1e3,
            gamma_err_kev: err(2) * 1e3,
            r_max: None,
            chi2red: Some(chi2red),
        },
        amplitude: theta[0],
        amplitude_err: err(0),
        background: opts.background.then(|| theta[3]),
        chi2red,
        iterations,
        converged,
        gradient,
        window,
    })
}

/// Indices of local maxima exceeding `factor` times the median.
pub fn detect_peaks(y: &[f64], factor: f64) -> Vec<usize> {
    if y.len() < 3 {
        return Vec::new();
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let thresh = factor * median;
    (1..y.len() - 1)
        .filter(|&i| y[i] > thresh && y[i] >= y[i - 1] && y[i] > y[i + 1])
        .collect()
}

/// Fit window of ±`half_widths` sampled FWHM around peak `imax`, widened to
/// hold at least 8 samples.
pub fn peak_window(density: &SampledFunction, imax: usize, half_widths: f64) -> (f64, f64) {
    let x = &density.x;
    let spacing = if x.len() > 1 { (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64 } else { 1.0 };
    let fwhm = sampled_fwhm(x, &density.y, imax, 0.0).unwrap_or(4.0 * spacing);
    let half = (half_widths * fwhm).max(4.0 * spacing);
    (x[imax] - half, x[imax] + half)
}

/// Rational fit of the density and its resonance poles.
pub fn pade_fit(density: &SampledFunction, orders: (usize, usize)) -> Result<Vec<Resonance>> {
    let (l, m) = orders;
    let y: Vec<Complex64> = density.y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let fit = fit_rational(&density.x, &y, l, m)?;
    let lo = density.x[0];
    let hi = density.x[density.x.len() - 1];
    let ymax = density.y.iter().cloned().fold(0.0, f64::max);
    let mut out: Vec<Resonance> = fit
        .poles()
        .into_iter()
        .filter(|p| p.position.im < 0.0)
        .filter(|p| p.position.re >= lo && p.position.re <= hi)
        .filter(|p| -2.0 * p.position.im <= hi - lo)
        .filter(|p| fit.pole_strength(p, ymax) > 1e-3)
        .map(|p| Resonance {
            j: 0,
            method: Method::Pade,
            e_r: p.position.re,
            e_r_err: 0.0,
            gamma_kev: -2e3 * p.position.im,
            gamma_err_kev: 0.0,
            r_max: None,
            chi2red: None,
        })
        .collect();
    out.sort_by(|a, b| a.e_r.partial_cmp(&b.e_r).unwrap());
    Ok(out)
}
