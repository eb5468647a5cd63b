//! S(E) = e^{2iδ} on the real axis and its resonance pole from a rational
//! continuation into the complex energy plane.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{Method, Resonance};
use crate::rational::{fit_rational, RationalFit};

/// S-matrix value at one real energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SMatrixSample {
    pub energy: f64,
    pub s_value: Complex64,
}

pub fn s_matrix(delta: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * delta)
}

/// Samples of S at `energies` from a phase-shift function.
pub fn s_matrix_samples(energies: &[f64], phase: &dyn Fn(f64) -> Result<f64>) -> Result<Vec<SMatrixSample>> {
    energies
        .iter()
        .map(|&e| {
            Ok(SMatrixSample {
                energy: e,
                s_value: s_matrix(phase(e)?),
            })
        })
        .collect()
}

/// Relative pole movement tolerated when both orders grow by one.
pub const POLE_STABILITY: f64 = 0.01;

fn resonance_pole(fit: &RationalFit, lo: f64, hi: f64) -> Option<Complex64> {
    fit.poles()
        .into_iter()
        .filter(|p| p.position.im < 0.0)
        .filter(|p| p.position.re >= lo && p.position.re <= hi)
        .filter(|p| -2.0 * p.position.im <= hi - lo)
        .filter(|p| fit.pole_strength(p, 1.0) > 1e-3)
        .min_by(|a, b| (-a.position.im).partial_cmp(&(-b.position.im)).unwrap())
        .map(|p| p.position)
}

fn pole_at_orders(samples: &[SMatrixSample], l: usize, m: usize) -> Result<Complex64> {
    let x: Vec<f64> = samples.iter().map(|s| s.energy).collect();
    let y: Vec<Complex64> = samples.iter().map(|s| s.s_value).collect();
    let fit = fit_rational(&x, &y, l, m)?;
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    resonance_pole(&fit, lo, hi).ok_or_else(|| {
        Error::NotFound(format!("no resonance pole of S between {lo} and {hi} MeV at orders ({l}, {m})"))
    })
}

/// Pole E_R − iΓ/2 of a rational fit P_L/Q_M to S(E), checked against orders (L+1, M+1).
pub fn find_pole(samples: &[SMatrixSample], (l, m): (usize, usize)) -> Result<Resonance> {
    if samples.len() < l + m + 3 {
        return Err(Error::invalid(format!(
            "{} samples are too few for orders ({l}, {m}) and the stability check",
            samples.len()
        )));
    }
    let z1 = pole_at_orders(samples, l, m)?;
    let z2 = pole_at_orders(samples, l + 1, m + 1)?;
    let gamma = -2.0 * z1.im;
    let moved_e = (z2.re - z1.re).abs();
    let moved_g = (-2.0 * z2.im - gamma).abs();
    if moved_e > POLE_STABILITY * gamma || moved_g > POLE_STABILITY * gamma {
        return Err(Error::PoleUnstable {
            first: (z1.re, -2.0 * z1.im),
            second: (z2.re, -2.0 * z2.im),
        });
    }
    Ok(Resonance {
        j: 0,
        method: Method::Pole,
        e_r: z1.re,
        e_r_err: moved_e,
        gamma_kev: gamma * 1e3,
        gamma_err_kev: moved_g * 1e3,
        r_max: None,
        chi2red: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn special_values() {
        assert!((s_matrix(0.0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((s_matrix(PI / 2.0) + Complex64::new(1.0, 0.0)).norm() < 1e-15);
        for d in [-2.0, 0.3, 7.7] {
            assert!((s_matrix(d).norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn breit_wigner_pole_exact() {
        let (er, g) = (5.07, 0.029);
        let energies: Vec<f64> = (0..41).map(|i| er - 2.0 * g + 4.0 * g * i as f64 / 40.0).collect();
        let samples: Vec<SMatrixSample> = energies
            .iter()
            .map(|&e| SMatrixSample {
                energy: e,
                s_value: Complex64::new(e - er, -g / 2.0) / Complex64::new(e - er, g / 2.0),
            })
            .collect();
        let r = find_pole(&samples, (1, 1)).unwrap();
        assert!((r.e_r - er).abs() / er < 1e-8);
        assert!((r.gamma_mev() - g).abs() / g < 1e-8);
    }
}
