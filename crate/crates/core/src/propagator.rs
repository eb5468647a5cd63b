//! Gaussian wave packets and Chebyshev time evolution.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, GridEdge, Result};
use crate::grid::{GridFunction, RadialGrid};
use crate::hamiltonian::DiscreteHamiltonian;
use crate::potential::SystemParams;
use crate::special::bessel_j_sequence;
use crate::units::HBAR_MEV_S;

/// Relative edge amplitude above which a packet counts as not contained.
pub const CONTAINMENT_RATIO: f64 = 1e-10;

/// Initial packet: a Gaussian of width σ at R₀ moving inward with K₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub r0: f64,
    pub sigma: f64,
    pub k0: f64,
    pub e0: f64,
}

impl GaussianSpec {
    pub fn from_energy(r0: f64, sigma: f64, e0: f64, params: &SystemParams) -> Result<Self> {
        if !(e0 > 0.0) {
            return Err(Error::invalid(format!("packet energy must be positive, got {e0}")));
        }
        let spec = Self {
            r0,
            sigma,
            k0: params.wavenumber(e0),
            e0,
        };
        spec.validate(params)?;
        Ok(spec)
    }

    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        if !(self.sigma > 0.0) || !(self.r0 > 0.0) || !(self.k0 > 0.0) {
            return Err(Error::invalid("packet needs positive R0, sigma and K0"));
        }
        let k = params.wavenumber(self.e0);
        if ((k - self.k0) / self.k0).abs() > 1e-10 {
            return Err(Error::invalid(format!(
                "K0 = {} fm^-1 inconsistent with E0 = {} MeV (expected {k})",
                self.k0, self.e0
            )));
        }
        Ok(())
    }

    /// Analytic amplitude at R.
    pub fn amplitude(&self, r: f64) -> Complex64 {
        let x = r - self.r0;
        let env = (-x * x / (2.0 * self.sigma * self.sigma)).exp() / (PI.powf(0.25) * self.sigma.sqrt());
        Complex64::from_polar(env, -self.k0 * x)
    }
}

/// Time step and Chebyshev truncation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationSpec {
    /// Time step in seconds.
    pub dt: f64,
    pub tolerance: f64,
    pub max_steps: usize,
}

impl Default for PropagationSpec {
    fn default() -> Self {
        Self {
            dt: 1e-22,
            tolerance: 1e-15,
            max_steps: 100_000,
        }
    }
}

impl PropagationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt != 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid(format!("time step must be non-zero, got {}", self.dt)));
        }
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-8) {
            return Err(Error::invalid(format!(
                "Chebyshev tolerance must lie in (0, 1e-8], got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavePacketState {
    pub psi: GridFunction,
    /// Seconds.
    pub elapsed_time: f64,
    pub step_count: usize,
}

/// Discretized Gaussian renormalized to unit norm on `grid`.
pub fn gaussian_packet(spec: &GaussianSpec, grid: &RadialGrid) -> Result<WavePacketState> {
    if !(spec.sigma > 0.0) || !(spec.r0 > 0.0) || !(spec.k0 > 0.0) {
        return Err(Error::invalid("packet needs positive R0, sigma and K0"));
    }
    let edge_ratio = |r: f64| (-(r - spec.r0).powi(2) / (2.0 * spec.sigma * spec.sigma)).exp();
    let inner = edge_ratio(0.0);
    if inner >= CONTAINMENT_RATIO {
        return Err(Error::Containment {
            edge: GridEdge::Inner,
            ratio: inner,
        });
    }
    let outer = edge_ratio(grid.r_max());
    if outer >= CONTAINMENT_RATIO {
        return Err(Error::Containment {
            edge: GridEdge::Outer,
            ratio: outer,
        });
    }
    let mut psi = GridFunction::from_fn(*grid, |r| spec.amplitude(r));
    let n = psi.norm();
    psi.scale(1.0 / n);
    Ok(WavePacketState {
        psi,
        elapsed_time: 0.0,
        step_count: 0,
    })
}

/// True when R₀ lies outside the classical turning point of the slowest
/// significant component (wavenumber K₀ − 3/σ). A failure is worth a warning.
pub fn start_beyond_turning_point(spec: &GaussianSpec, h: &DiscreteHamiltonian) -> bool {
    let kmin = (spec.k0 - 3.0 / spec.sigma).max(0.0);
    let emin = h.params().energy(kmin);
    let idx = h.grid().count_within(spec.r0).saturating_sub(1);
    let v0 = h.potential()[idx];
    let ok = v0 < emin;
    if !ok {
        log::warn!(
            "packet centre {} fm lies inside the turning point for E = {emin:.3} MeV (V = {v0:.3} MeV)",
            spec.r0
        );
    }
    ok
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// |c₀|² + ½Σ_{k≥1}|c_k|² − 1 in double-double arithmetic. This is the mean of
/// |Σ c_k T_k(cos θ)|² − 1 over θ.
fn unitarity_defect(coeffs: &[Complex64]) -> f64 {
    let (mut hi, mut lo) = (-1.0, 0.0);
    for (k, c) in coeffs.iter().enumerate() {
        let w = if k == 0 { 1.0 } else { 0.5 };
        for x in [c.re, c.im] {
            let p = x * x;
            let e = x.mul_add(x, -p);
            let (s, t) = two_sum(hi, w * p);
            hi = s;
            lo += t + w * e;
        }
    }
    hi + lo
}

/// Rescale the coefficients, then nudge the largest component by whole ulps, so
/// that rounding of the Bessel values does not bias the norm every step.
fn unitarize(coeffs: &mut [Complex64]) {
    let d = unitarity_defect(coeffs);
    let s = 1.0 / (1.0 + d).sqrt();
    for c in coeffs.iter_mut() {
        *c *= s;
    }
    let (idx, use_re) = coeffs
        .iter()
        .enumerate()
        .flat_map(|(k, c)| {
            let w = if k == 0 { 1.0 } else { 0.5 };
            [(k, true, w * c.re.abs()), (k, false, w * c.im.abs())]
        })
        .max_by(|a, b| a.2.total_cmp(&b.2))
        .map(|(k, re, _)| (k, re))
        .unwrap_or((0, true));
    let w = if idx == 0 { 1.0 } else { 0.5 };
    for _ in 0..4 {
        let d = unitarity_defect(coeffs);
        let x = if use_re { coeffs[idx].re } else { coeffs[idx].im };
        let ulp = f64::EPSILON * 2f64.powi(x.abs().log2().floor() as i32);
        let steps = (-d / (2.0 * w * x.abs() * ulp)).round() * x.signum();
        if steps == 0.0 {
            break;
        }
        let nx = x + steps * ulp;
        if use_re {
            coeffs[idx].re = nx;
        } else {
            coeffs[idx].im = nx;
        }
    }
}

/// Precomputed Chebyshev expansion of exp(−iHΔt/ħ).
#[derive(Debug, Clone)]
pub struct ChebyshevPropagator {
    coeffs: Vec<Complex64>,
    scale: f64,
    shift: f64,
    dt: f64,
}

impl ChebyshevPropagator {
    pub fn new(h: &DiscreteHamiltonian, prop: &PropagationSpec) -> Result<Self> {
        prop.validate()?;
        let (emin, emax) = h.spectral_bounds();
        let tau = prop.dt / HBAR_MEV_S;
        let alpha_s = (emax - emin) * tau / 2.0;
        let alpha_c = (emax + emin) * tau / 2.0;
        let max_order = (4.0 * alpha_s.abs()) as usize + 100;
        let j = bessel_j_sequence(alpha_s, max_order + 1);
        let phase = Complex64::from_polar(1.0, -alpha_c);
        let mut coeffs: Vec<Complex64> = Vec::new();
        let mut minus_i_pow = Complex64::new(1.0, 0.0);
        let mut converged = false;
        for (k, jk) in j.iter().enumerate().take(max_order + 1) {
            let w = if k == 0 { 1.0 } else { 2.0 };
            let c = phase * minus_i_pow * (w * jk);
            coeffs.push(c);
            minus_i_pow *= Complex64::new(0.0, -1.0);
            if k as f64 > alpha_s.abs() && c.norm() < prop.tolerance {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::PropagationDivergence {
                max_order,
                last_coefficient: coeffs.last().map(|c| c.norm()).unwrap_or(f64::NAN),
            });
        }
        unitarize(&mut coeffs);
        Ok(Self {
            coeffs,
            scale: 2.0 / (emax - emin),
            shift: (emax + emin) / (emax - emin),
            dt: prop.dt,
        })
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Advance by one time step.
    pub fn step(&self, h: &DiscreteHamiltonian, state: &WavePacketState) -> Result<WavePacketState> {
        if state.psi.grid != *h.grid() {
            return Err(Error::invalid("state and Hamiltonian live on different grids"));
        }
        let n = h.n();
        let zero = Complex64::new(0.0, 0.0);
        let mut ws = h.workspace();
        let mut prev = state.psi.values.clone();
        let mut cur = vec![zero; n];
        let mut next = vec![zero; n];
        let mut acc: Vec<Complex64> = prev.iter().map(|v| v * self.coeffs[0]).collect();

        let apply_norm = |x: &[Complex64], out: &mut [Complex64], ws: &mut _| {
            h.apply_into(x, out, ws);
            for (o, xi) in out.iter_mut().zip(x) {
                *o = *o * self.scale - xi * self.shift;
            }
        };

        if self.coeffs.len() > 1 {
            apply_norm(&prev, &mut cur, &mut ws);
            let c1 = self.coeffs[1];
            for (a, v) in acc.iter_mut().zip(&cur) {
                *a += v * c1;
            }
        }
        for &ck in &self.coeffs[2..] {
            apply_norm(&cur, &mut next, &mut ws);
            for ((nx, p), a) in next.iter_mut().zip(&prev).zip(acc.iter_mut()) {
                *nx = *nx * 2.0 - p;
                *a += *nx * ck;
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(WavePacketState {
            psi: GridFunction {
                grid: state.psi.grid,
                values: acc,
            },
            elapsed_time: state.elapsed_time + self.dt,
            step_count: state.step_count + 1,
        })
    }
}

/// One Chebyshev step.
pub fn step(state: &WavePacketState, h: &DiscreteHamiltonian, prop: &PropagationSpec) -> Result<WavePacketState> {
    ChebyshevPropagator::new(h, prop)?.step(h, state)
}

/// When to stop propagating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StopCondition {
    /// Elapsed time in seconds.
    ElapsedTime(f64),
    /// The body of the packet has come in to `radius` and gone back out past it.
    Outbound { radius: f64, r_exterior: f64 },
}

/// Step until `stop` holds. Returns the final state (its `step_count` is the step index).
pub fn propagate_until(
    state: WavePacketState,
    h: &DiscreteHamiltonian,
    prop: &PropagationSpec,
    stop: StopCondition,
) -> Result<WavePacketState> {
    match stop {
        StopCondition::ElapsedTime(t) => {
            propagate_while(state, h, prop, |s| Ok(s.elapsed_time >= t * (1.0 - 1e-12)))
        }
        StopCondition::Outbound { radius, r_exterior } => {
            let mut arrived = false;
            propagate_while(state, h, prop, move |s| {
                let body = body_position(s, r_exterior)?;
                if body <= radius {
                    arrived = true;
                }
                Ok(arrived && body >= radius)
            })
        }
    }
}

/// Step until `done(state)` returns true, checking the initial state first.
pub fn propagate_while(
    mut state: WavePacketState,
    h: &DiscreteHamiltonian,
    prop: &PropagationSpec,
    mut done: impl FnMut(&WavePacketState) -> Result<bool>,
) -> Result<WavePacketState> {
    let cheb = ChebyshevPropagator::new(h, prop)?;
    let start = state.step_count;
    loop {
        if done(&state)? {
            return Ok(state);
        }
        if state.step_count - start >= prop.max_steps {
            return Err(Error::Timeout {
                steps: state.step_count - start,
                last_state: Box::new(state),
            });
        }
        state = cheb.step(h, &state)?;
    }
}

/// Radius of the maximum of |ψ|² beyond `r_exterior`, refined by a parabola
/// through the neighbouring samples.
pub fn body_position(state: &WavePacketState, r_exterior: f64) -> Result<f64> {
    let grid = &state.psi.grid;
    let first = grid.count_within(r_exterior);
    let dens: Vec<f64> = state.psi.values[first..].iter().map(|v| v.norm_sqr()).collect();
    let (imax, &dmax) = dens
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .ok_or_else(|| Error::DegenerateInput(format!("no grid points beyond {r_exterior} fm")))?;
    if !(dmax > 1e-300) {
        return Err(Error::DegenerateInput(format!("no probability beyond {r_exterior} fm")));
    }
    let r = grid.point(first + imax);
    if imax == 0 || imax + 1 == dens.len() {
        return Ok(r);
    }
    let (a, b, c) = (dens[imax - 1], dens[imax], dens[imax + 1]);
    let denom = a - 2.0 * b + c;
    let off = if denom < 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    Ok(r + off.clamp(-0.5, 0.5) * grid.delta_r())
}
