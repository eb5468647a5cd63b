//! Phase-shift curves and resonance parameters from δ(E) = π/2 (mod π).

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{Method, Resonance};
use crate::potential::{PotentialModel, SystemParams};
use crate::stationary::numerov::{phase_shift_unwrapped, reduce_mod_pi, PhaseOptions};

/// δ(E) for one partial wave on a sorted energy mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseShiftCurve {
    pub j: u32,
    pub energies: Vec<f64>,
    /// Phases reduced to (−π/2, π/2].
    pub delta: Vec<f64>,
    /// Continuous branch.
    pub delta_unwrapped: Vec<f64>,
    pub eta: Vec<f64>,
}

/// Continuous branch of phases defined modulo π.
pub fn unwrap_phase(delta: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(delta.len());
    let mut offset = 0.0_f64;
    for (i, &d) in delta.iter().enumerate() {
        if i > 0 {
            let prev: f64 = out[i - 1];
            let cand = d + offset;
            offset += -PI * ((cand - prev) / PI).round();
        }
        out.push(d + offset);
    }
    out
}

impl PhaseShiftCurve {
    /// Assemble a curve from reduced phases.
    pub fn from_samples(j: u32, energies: Vec<f64>, delta: Vec<f64>, params: &SystemParams) -> Result<Self> {
        if energies.len() != delta.len() || energies.len() < 2 {
            return Err(Error::invalid("need at least two matching energy/phase samples"));
        }
        if energies.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("energies must increase strictly"));
        }
        let delta_unwrapped = unwrap_phase(&delta);
        let eta = energies.iter().map(|&e| params.sommerfeld(e)).collect();
        Ok(Self {
            j,
            energies,
            delta,
            delta_unwrapped,
            eta,
        })
    }

    /// Scan [e_lo, e_hi] with `n` equally spaced energies on the absolute
    /// phase branch, bisecting intervals until adjacent phases differ by less
    /// than π/4.
    pub fn scan(
        model: &PotentialModel,
        params: &SystemParams,
        j: u32,
        (e_lo, e_hi): (f64, f64),
        n: usize,
        opts: &PhaseOptions,
    ) -> Result<Self> {
        if !(e_hi > e_lo) || e_lo <= 0.0 || n < 2 {
            return Err(Error::invalid("scan needs 0 < e_lo < e_hi and n ≥ 2"));
        }
        let phase = |e: f64| phase_shift_unwrapped(model, params, j, e, opts);
        let mut energies: Vec<f64> = (0..n)
            .map(|i| e_lo + (e_hi - e_lo) * i as f64 / (n - 1) as f64)
            .collect();
        let mut delta: Vec<f64> = energies.par_iter().map(|&e| phase(e)).collect::<Result<_>>()?;
        let min_step = 1e-9 * e_hi;
        for _ in 0..40 {
            let split: Vec<usize> = (0..energies.len() - 1)
                .filter(|&i| {
                    (delta[i + 1] - delta[i]).abs() > PI / 4.0
                        && energies[i + 1] - energies[i] > min_step
                })
                .collect();
            if split.is_empty() {
                break;
            }
            let mids: Vec<f64> = split.iter().map(|&i| 0.5 * (energies[i] + energies[i + 1])).collect();
            let new: Vec<f64> = mids.par_iter().map(|&e| phase(e)).collect::<Result<_>>()?;
            let mut e2 = Vec::with_capacity(energies.len() + mids.len());
            let mut d2 = Vec::with_capacity(energies.len() + mids.len());
            let mut k = 0;
            for i in 0..energies.len() {
                e2.push(energies[i]);
                d2.push(delta[i]);
                if k < split.len() && split[k] == i {
                    e2.push(mids[k]);
                    d2.push(new[k]);
                    k += 1;
                }
            }
            energies = e2;
            delta = d2;
        }
        let eta = energies.iter().map(|&e| params.sommerfeld(e)).collect();
        Ok(Self {
            j,
            delta: delta.iter().map(|&d| reduce_mod_pi(d)).collect(),
            delta_unwrapped: delta,
            energies,
            eta,
        })
    }
}

/// Derivative by Ridders' extrapolation of central differences; returns the
/// estimate and its error estimate.
fn ridders_derivative(f: &dyn Fn(f64) -> Result<f64>, x: f64, h0: f64) -> Result<(f64, f64)> {
    const CON: f64 = 1.4;
    const CON2: f64 = CON * CON;
    const NTAB: usize = 12;
    let diff = |h: f64| -> Result<f64> { Ok(reduce_mod_pi(f(x + h)? - f(x - h)?) / (2.0 * h)) };
    let mut a = vec![vec![0.0; NTAB]; NTAB];
    let mut h = h0;
    a[0][0] = diff(h)?;
    let mut best = a[0][0];
    let mut err = f64::INFINITY;
    for i in 1..NTAB {
        h /= CON;
        a[0][i] = diff(h)?;
        let mut fac = CON2;
        for jj in 1..=i {
            a[jj][i] = (a[jj - 1][i] * fac - a[jj - 1][i - 1]) / (fac - 1.0);
            fac *= CON2;
            let e = (a[jj][i] - a[jj - 1][i]).abs().max((a[jj][i] - a[jj - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = a[jj][i];
            }
        }
        if (a[i][i] - a[i - 1][i - 1]).abs() >= 2.0 * err {
            break;
        }
    }
    Ok((best, err))
}

/// Relative agreement required of the width derivative.
pub const DERIVATIVE_TOLERANCE: f64 = 1e-3;

/// Resonance from the steepest upward crossing of π/2 (mod π) in `curve`;
/// `phase` re-evaluates δ(E) for root refinement and the width derivative.
pub fn resonance_from_phase(curve: &PhaseShiftCurve, phase: &dyn Fn(f64) -> Result<f64>) -> Result<Resonance> {
    let e = &curve.energies;
    let d = &curve.delta_unwrapped;
    let mut best: Option<(usize, f64, f64)> = None;
    let mut downward: Option<f64> = None;
    for i in 0..e.len() - 1 {
        let x0 = ((d[i] - PI / 2.0) / PI).floor();
        let x1 = ((d[i + 1] - PI / 2.0) / PI).floor();
        if x0 == x1 {
            continue;
        }
        let slope = (d[i + 1] - d[i]) / (e[i + 1] - e[i]);
        if slope > 0.0 {
            let level = PI / 2.0 + PI * x1;
            if best.is_none_or(|b| slope > b.1) {
                best = Some((i, slope, level));
            }
        } else if downward.is_none() {
            downward = Some(0.5 * (e[i] + e[i + 1]));
        }
    }
    let (i, slope, level) = match (best, downward) {
        (Some(b), _) => b,
        (None, Some(energy)) => return Err(Error::AntiResonance { energy }),
        (None, None) => {
            return Err(Error::NotFound(format!(
                "delta never reaches pi/2 (mod pi) in [{}, {}] MeV",
                e[0],
                e[e.len() - 1]
            )))
        }
    };
    let g = |x: f64| -> Result<f64> { Ok(reduce_mod_pi(phase(x)? - level)) };
    let (mut a, mut b) = (e[i], e[i + 1]);
    let (ga, gb) = (g(a)?, g(b)?);
    if !(ga <= 0.0 && gb >= 0.0) {
        // fall back to the curve if re-evaluation disagrees with the bracket
        let t = (level - d[i]) / (d[i + 1] - d[i]);
        a = e[i] + t * (e[i + 1] - e[i]);
        b = a;
    } else {
        while b - a > 1e-13 * b.abs() {
            let m = 0.5 * (a + b);
            if g(m)? <= 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
    }
    let e_r = 0.5 * (a + b);
    let gamma_guess = 2.0 / slope;
    let h0 = (0.25 * gamma_guess).min(0.25 * (e[i + 1] - e[i]).max(gamma_guess * 0.05));
    let (deriv, err) = ridders_derivative(phase, e_r, h0)?;
    if deriv <= 0.0 {
        return Err(Error::AntiResonance { energy: e_r });
    }
    if err > DERIVATIVE_TOLERANCE * deriv {
        log::warn!("phase derivative at {e_r} MeV only converged to {:.1e} relative", err / deriv);
    }
    let gamma = 2.0 / deriv;
    Ok(Resonance {
        j: curve.j,
        method: Method::PhaseShift,
        e_r,
        e_r_err: (b - a).abs(),
        gamma_kev: gamma * 1e3,
        gamma_err_kev: gamma * err / deriv * 1e3,
        r_max: None,
        chi2red: None,
    })
}
