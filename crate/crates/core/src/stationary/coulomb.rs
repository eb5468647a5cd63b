//! Regular and irregular Coulomb wave functions by Steed's method.
//!
//! F'/F comes from downward recurrence in L started with the continued
//! fraction CF1 well inside the classically forbidden region, which also fixes
//! the sign of F. The complex ratio (G' + iF')/(G + iF) = p + iq comes from
//! CF2, and the Wronskian F'G − FG' = 1 closes the system.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// F, F', G, G' at one (L, η, ρ); derivatives are with respect to ρ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoulombValues {
    pub f: f64,
    pub fp: f64,
    pub g: f64,
    pub gp: f64,
}

impl CoulombValues {
    /// F'G − FG'.
    pub fn wronskian(&self) -> f64 {
        self.fp * self.g - self.f * self.gp
    }
}

const CF_EPS: f64 = 1e-16;
const CF_MAX_TERMS: usize = 200_000;
const TINY: f64 = 1e-300;
/// Complex division squares the divisor's modulus, so the complex guard must stay above √TINY.
const TINY_COMPLEX: f64 = 1e-150;

/// F'/F at order `l` from the continued fraction CF1 (modified Lentz).
fn cf1(l: f64, eta: f64, rho: f64) -> Result<f64> {
    let s = |k: f64| k / rho + eta / k;
    let r2 = |k: f64| 1.0 + eta * eta / (k * k);
    let mut f = s(l + 1.0);
    if f == 0.0 {
        f = TINY;
    }
    let mut c = f;
    let mut d = 0.0;
    for k in 1..CF_MAX_TERMS {
        let kk = l + k as f64;
        let a = -r2(kk);
        let b = s(kk) + s(kk + 1.0);
        d = b + a * d;
        if d == 0.0 {
            d = TINY;
        }
        c = b + a / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < CF_EPS {
            return Ok(f);
        }
    }
    Err(Error::Domain(format!("CF1 did not converge at L={l}, eta={eta}, rho={rho}")))
}

/// p + iq from the continued fraction CF2 (modified Lentz).
fn cf2(l: f64, eta: f64, rho: f64) -> Result<Complex64> {
    let i = Complex64::new(0.0, 1.0);
    let a = Complex64::new(1.0 + l, eta);
    let c = Complex64::new(-l, eta);
    let tiny = Complex64::new(TINY_COMPLEX, 0.0);
    let mut f = tiny;
    let mut cc = f;
    let mut d = Complex64::new(0.0, 0.0);
    for k in 1..CF_MAX_TERMS {
        let kf = k as f64;
        let num = (a + (kf - 1.0)) * (c + (kf - 1.0));
        let den = Complex64::new(2.0 * (rho - eta), 2.0 * kf);
        d = den + num * d;
        if d == Complex64::new(0.0, 0.0) {
            d = tiny;
        }
        cc = den + num / cc;
        if cc == Complex64::new(0.0, 0.0) {
            cc = tiny;
        }
        d = Complex64::new(1.0, 0.0) / d;
        let delta = cc * d;
        f *= delta;
        if (delta - 1.0).norm() < CF_EPS {
            return Ok(i * (1.0 - eta / rho) + i / rho * f);
        }
    }
    Err(Error::Domain(format!("CF2 did not converge at L={l}, eta={eta}, rho={rho}")))
}

/// Coulomb functions F_l, F'_l, G_l, G'_l at (η, ρ).
pub fn coulomb_functions(l: u32, eta: f64, rho: f64) -> Result<CoulombValues> {
    if !(rho > 0.0) || !rho.is_finite() || !eta.is_finite() {
        return Err(Error::Domain(format!("need finite rho > 0 and finite eta, got rho={rho}, eta={eta}")));
    }
    let lf = l as f64;
    // Start deep in the forbidden region, where F is positive and F'/F is
    // well conditioned, and recur down to l.
    let l_top = l + rho.ceil() as u32 + 2 * eta.abs().ceil().min(50.0) as u32 + 20;
    let mut fl = 1.0;
    let mut fpl = cf1(l_top as f64, eta, rho)?;
    let mut big = l_top;
    while big > l {
        let k = big as f64;
        let s = k / rho + eta / k;
        let r = (1.0 + eta * eta / (k * k)).sqrt();
        let fm = (s * fl + fpl) / r;
        let fpm = s * fm - r * fl;
        fl = fm;
        fpl = fpm;
        let m = fl.abs().max(fpl.abs());
        if m > 1e200 {
            fl /= m;
            fpl /= m;
        }
        big -= 1;
    }
    if fl == 0.0 {
        return Err(Error::Domain(format!("F vanishes at rho={rho}")));
    }
    let sign = fl.signum();
    let f_ratio = fpl / fl;
    let pq = cf2(lf, eta, rho)?;
    let (p, q) = (pq.re, pq.im);
    if !(q > 0.0) {
        return Err(Error::Domain(format!("degenerate CF2 at rho={rho}")));
    }
    let w = f_ratio - p;
    let f = sign * (q / (w * w + q * q)).sqrt();
    let g = w * f / q;
    let out = CoulombValues {
        f,
        fp: f_ratio * f,
        g,
        gp: p * g - q * f,
    };
    if !(out.f.is_finite() && out.fp.is_finite() && out.g.is_finite() && out.gp.is_finite()) {
        return Err(Error::Domain(format!(
            "Coulomb functions not representable at L={l}, eta={eta}, rho={rho} (deep inside the turning point)"
        )));
    }
    Ok(out)
}
