//! Outward Numerov integration of the radial Schrödinger equation and
//! matching to Coulomb waves.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::potential::{PotentialModel, SystemParams};
use crate::stationary::coulomb::coulomb_functions;

/// Largest k·h accepted by [`integrate_tise`].
pub const MAX_K_STEP: f64 = 0.5;

/// A partial-wave problem: total potential V(R) (centrifugal term included),
/// angular momentum and the 1/R strength of V at the origin.
pub struct RadialProblem<'a> {
    pub potential: &'a (dyn Fn(f64) -> f64 + Sync),
    pub l: u32,
    /// lim_{R→0} R·V(R) for the l = 0 start (point-Coulomb strength, or 0).
    pub origin_strength: f64,
    pub params: SystemParams,
}

/// Regular solution u(R) on the points of a grid; `u[0]` belongs to R = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSolution {
    pub h: f64,
    pub u: Vec<f64>,
    /// (V − E)/(ħ²/2μ) at the same points (zero at the origin).
    f: Vec<f64>,
}

impl RadialSolution {
    pub fn radius(&self, n: usize) -> f64 {
        n as f64 * self.h
    }

    /// du/dR at interior point n, fourth order.
    pub fn derivative(&self, n: usize) -> f64 {
        let h = self.h;
        let c = h * h / 6.0;
        (self.u[n + 1] * (1.0 - c * self.f[n + 1]) - self.u[n - 1] * (1.0 - c * self.f[n - 1])) / (2.0 * h)
    }

    /// Sign changes of u on (0, r_max].
    pub fn count_nodes(&self, r_max: f64) -> usize {
        let last = ((r_max / self.h) as usize).min(self.u.len() - 1);
        self.u[1..=last]
            .windows(2)
            .filter(|w| w[0] != 0.0 && w[0].signum() != w[1].signum())
            .count()
    }
}

/// Numerov integration from u(0) = 0, u(h) = h^{l+1} out to the last grid point.
pub fn integrate_tise(problem: &RadialProblem<'_>, e: f64, grid: &RadialGrid) -> Result<RadialSolution> {
    if !(e > 0.0) {
        return Err(Error::invalid(format!("energy must be positive, got {e}")));
    }
    let h = grid.delta_r();
    let c = problem.params.hbar2_over_2mu();
    let k = (e / c).sqrt();
    if k * h >= MAX_K_STEP {
        return Err(Error::Resolution(format!(
            "k*h = {:.3} at E = {e} MeV exceeds {MAX_K_STEP}",
            k * h
        )));
    }
    let n = grid.n_points();
    let mut f = vec![0.0; n + 1];
    for (i, r) in grid.points().enumerate() {
        f[i + 1] = ((problem.potential)(r) - e) / c;
    }
    let g = h * h / 12.0;
    let mut u = vec![0.0; n + 1];
    u[1] = h.powi(problem.l as i32 + 1);
    // (f·u) at the origin for the regular solution
    let fu0 = match problem.l {
        0 => {
            let c0 = problem.origin_strength / c;
            c0 * u[1] / (h * (1.0 + 0.5 * c0 * h))
        }
        1 => 2.0 * u[1] / (h * h),
        _ => 0.0,
    };
    let mut w_prev = -g * fu0;
    let mut w_cur = (1.0 - g * f[1]) * u[1];
    for i in 1..n {
        let w_next = 2.0 * w_cur - w_prev + h * h * f[i] * u[i];
        u[i + 1] = w_next / (1.0 - g * f[i + 1]);
        w_prev = w_cur;
        w_cur = w_next;
        if u[i + 1].abs() > 1e200 {
            let s = 1e-200;
            for v in &mut u[..=i + 1] {
                *v *= s;
            }
            w_prev *= s;
            w_cur *= s;
        }
    }
    Ok(RadialSolution { h, u, f })
}

/// Reduce an angle modulo π to (−π/2, π/2].
pub fn reduce_mod_pi(x: f64) -> f64 {
    let mut y = x - PI * (x / PI).round();
    if y <= -PI / 2.0 {
        y += PI;
    }
    if y > PI / 2.0 {
        y -= PI;
    }
    y
}

/// Coulomb-relative phase shift of `sol` matched at grid index `n`.
pub fn match_phase(sol: &RadialSolution, n: usize, l: u32, e: f64, params: &SystemParams) -> Result<f64> {
    let k = params.wavenumber(e);
    let eta = params.sommerfeld(e);
    let r = sol.radius(n);
    let cw = coulomb_functions(l, eta, k * r)?;
    let u = sol.u[n];
    let up = sol.derivative(n);
    let y = k * u * cw.fp - up * cw.f;
    let x = up * cw.g - k * u * cw.gp;
    Ok(reduce_mod_pi(y.atan2(x)))
}

/// Numerical settings for phase shifts.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PhaseOptions {
    /// Numerov step (fm).
    pub step: f64,
    /// Matching radius (fm).
    pub r_match: f64,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        Self {
            step: 0.01,
            r_match: 25.0,
        }
    }
}

/// Largest nuclear (non-Coulomb) potential tolerated at the matching radius.
pub const MATCH_NUCLEAR_LIMIT: f64 = 1e-3;

/// Phase shift of a general partial-wave problem, reduced to (−π/2, π/2].
pub fn phase_shift_general(problem: &RadialProblem<'_>, e: f64, opts: &PhaseOptions) -> Result<f64> {
    let n = (opts.r_match / opts.step).round() as usize;
    if n < 4 {
        return Err(Error::invalid("matching radius too small for the step"));
    }
    let grid = RadialGrid::with_spacing(opts.step, n + 1)?;
    let sol = integrate_tise(problem, e, &grid)?;
    match_phase(&sol, n, problem.l, e, &problem.params)
}

/// Prüfer angle θ of u at grid index `n`: u ∝ sin θ, u'/k ∝ cos θ, continuous
/// in R and increasing by π at every node.
pub fn prufer_angle(sol: &RadialSolution, n: usize, k: f64) -> f64 {
    let nodes = sol.count_nodes(sol.radius(n)) as f64;
    let up = sol.derivative(n);
    let mut a = if up == 0.0 { PI / 2.0 } else { (k * sol.u[n] / up).atan() };
    if a < 0.0 {
        a += PI;
    }
    nodes * PI + a
}

/// Phase shift on an absolute branch, continuous in E: the reduced phase of
/// `problem` is lifted by the multiple of π that brings it closest to the
/// difference of Prüfer angles of `problem` and `reference` at the matching
/// radius. `reference` must be the pure Coulomb plus centrifugal problem.
pub fn phase_shift_absolute(
    problem: &RadialProblem<'_>,
    reference: &RadialProblem<'_>,
    e: f64,
    opts: &PhaseOptions,
) -> Result<f64> {
    let n = (opts.r_match / opts.step).round() as usize;
    if n < 4 {
        return Err(Error::invalid("matching radius too small for the step"));
    }
    let grid = RadialGrid::with_spacing(opts.step, n + 1)?;
    let sol = integrate_tise(problem, e, &grid)?;
    let reduced = match_phase(&sol, n, problem.l, e, &problem.params)?;
    let free = integrate_tise(reference, e, &grid)?;
    let r = sol.radius(n);
    let c = problem.params.hbar2_over_2mu();
    let k_local = (((e - (reference.potential)(r)) / c).max(0.0)).sqrt().max(1e-3 * problem.params.wavenumber(e));
    let lift = prufer_angle(&sol, n, k_local) - prufer_angle(&free, n, k_local) - reduced;
    Ok(reduced + PI * (lift / PI).round())
}

fn check_matching_radius(model: &PotentialModel, params: &SystemParams, opts: &PhaseOptions) -> Result<()> {
    let nuclear = model.short_range(opts.r_match, params);
    if nuclear.abs() > MATCH_NUCLEAR_LIMIT {
        return Err(Error::invalid(format!(
            "nuclear potential {nuclear:.2e} MeV at the matching radius {} fm is not negligible",
            opts.r_match
        )));
    }
    Ok(())
}

/// Phase shift for partial wave `j` of `model`, reduced to (−π/2, π/2].
pub fn phase_shift(model: &PotentialModel, params: &SystemParams, j: u32, e: f64, opts: &PhaseOptions) -> Result<f64> {
    check_matching_radius(model, params, opts)?;
    let v = |r: f64| crate::potential::total_potential_unchecked(model, params, j, r);
    let problem = RadialProblem {
        potential: &v,
        l: j,
        origin_strength: if j == 0 { model.origin_strength(params) } else { 0.0 },
        params: *params,
    };
    phase_shift_general(&problem, e, opts)
}

/// Phase shift for partial wave `j` of `model` on the absolute branch of
/// [`phase_shift_absolute`].
pub fn phase_shift_unwrapped(
    model: &PotentialModel,
    params: &SystemParams,
    j: u32,
    e: f64,
    opts: &PhaseOptions,
) -> Result<f64> {
    check_matching_radius(model, params, opts)?;
    let v = |r: f64| crate::potential::total_potential_unchecked(model, params, j, r);
    let problem = RadialProblem {
        potential: &v,
        l: j,
        origin_strength: if j == 0 { model.origin_strength(params) } else { 0.0 },
        params: *params,
    };
    let coulomb = PotentialModel::PointCoulomb;
    let vc = |r: f64| crate::potential::total_potential_unchecked(&coulomb, params, j, r);
    let reference = RadialProblem {
        potential: &vc,
        l: j,
        origin_strength: if j == 0 { coulomb.origin_strength(params) } else { 0.0 },
        params: *params,
    };
    phase_shift_absolute(&problem, &reference, e, opts)
}
