//! Window-operator energy projection.
//!
//! For a bin centred at E_k with half width ε the n = 2 window is
//!   Δ = ε⁴ / ((H − E_k)⁴ + ε⁴),
//! and 𝒫(E_k) = ⟨ψ|Δ|ψ⟩ = ⟨χ|χ⟩ where
//!   (H − E_k + √i ε)(H − E_k − √i ε) χ = ε² ψ.
//! The factored form is solved as two shifted complex systems.
//!
//! Small grids use a tridiagonal reduction H = Q T Qᵀ computed once, after
//! which every shifted solve is O(N). Large grids use GMRES with the FFT
//! Hamiltonian, preconditioned by a banded finite-difference approximation of
//! the same shifted operator.

use std::f64::consts::FRAC_PI_4;

use nalgebra::{DMatrix, DVector, SymmetricTridiagonal};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::SampledFunction;
use crate::grid::GridFunction;
use crate::hamiltonian::{kinetic_prefactor, DiscreteHamiltonian};
use crate::linalg::{gmres, solve_shifted_tridiagonal, tridiagonal_residual, BandedLu};
use crate::potential::SystemParams;

type C = Complex64;

/// Window order; only n = 2 is implemented.
pub const WINDOW_ORDER: u32 = 2;

/// Bins whose initial-packet probability is below this are excluded from
/// effective spectra.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

/// Scalar window ε⁴/((e − e_k)⁴ + ε⁴).
pub fn window_weight(e: f64, e_k: f64, epsilon: f64) -> f64 {
    let x = (e - e_k) / epsilon;
    let x2 = x * x;
    1.0 / (x2 * x2 + 1.0)
}

/// Bins of half width ε tiling [e_lo, e_hi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub epsilon: f64,
    pub e_lo: f64,
    pub e_hi: f64,
}

impl WindowSpec {
    pub fn new(epsilon: f64, e_lo: f64, e_hi: f64) -> Result<Self> {
        let s = Self { epsilon, e_lo, e_hi };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid(format!("window half width must be positive, got {}", self.epsilon)));
        }
        if !(self.e_hi >= self.e_lo + 2.0 * self.epsilon) || !self.e_lo.is_finite() || !self.e_hi.is_finite() {
            return Err(Error::invalid(format!(
                "energy range [{}, {}] MeV holds no bin of width {}",
                self.e_lo,
                self.e_hi,
                2.0 * self.epsilon
            )));
        }
        Ok(())
    }

    pub fn order(&self) -> u32 {
        WINDOW_ORDER
    }

    pub fn n_bins(&self) -> usize {
        ((self.e_hi - self.e_lo) / (2.0 * self.epsilon) + 1e-9).floor() as usize
    }

    /// E_k = E_lo + (2k + 1)ε.
    pub fn centroid(&self, k: usize) -> f64 {
        self.e_lo + (2 * k + 1) as f64 * self.epsilon
    }

    pub fn centroids(&self) -> Vec<f64> {
        (0..self.n_bins()).map(|k| self.centroid(k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    Raw,
    /// Ratio to the initial-packet spectrum, divided by its sum over the
    /// bins that were not excluded.
    EffectiveNormalized,
}

impl std::fmt::Display for Normalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Normalization::Raw => "raw",
            Normalization::EffectiveNormalized => "effective-normalized",
        })
    }
}

/// Window-operator output: one probability per bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySpectrum {
    pub spec: WindowSpec,
    pub values: Vec<f64>,
    /// Bins left out of an effective spectrum; their values are zero.
    pub excluded: Vec<bool>,
    /// Box size of the grid the spectrum was computed on (fm).
    pub r_max: f64,
    pub normalization: Normalization,
}

impl EnergySpectrum {
    pub fn centroids(&self) -> Vec<f64> {
        self.spec.centroids()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Probability density 𝒫(E_k)/2ε (MeV⁻¹) on the bins that were not excluded.
pub fn density_function(spectrum: &EnergySpectrum) -> SampledFunction {
    let two_eps = 2.0 * spectrum.spec.epsilon;
    let (x, y) = spectrum
        .centroids()
        .into_iter()
        .zip(&spectrum.values)
        .zip(&spectrum.excluded)
        .filter(|(_, &ex)| !ex)
        .map(|((e, &p), _)| (e, p / two_eps))
        .unzip();
    SampledFunction { x, y }
}

/// Continuum level spacing (E/K)(2π/R_max) of a free particle in a box, MeV.
pub fn resolution_estimate(e: f64, r_max: f64, params: &SystemParams) -> Result<f64> {
    if !(e > 0.0) || !(r_max > 0.0) {
        return Err(Error::invalid(format!("need E > 0 and R_max > 0, got E={e}, R_max={r_max}")));
    }
    let k = params.wavenumber(e);
    Ok(e / k * (2.0 * std::f64::consts::PI / r_max))
}

/// Solution χ_k of the factored window equation.
#[derive(Debug, Clone, PartialEq)]
pub struct BinState {
    pub chi: GridFunction,
    pub centroid: f64,
    pub epsilon: f64,
}

impl BinState {
    /// ⟨χ|χ⟩ = 𝒫(E_k).
    pub fn probability(&self) -> f64 {
        self.chi.norm_sqr()
    }
}

/// Linear-solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Grids with at most this many points use the tridiagonal reduction.
    pub direct_threshold: usize,
    /// Relative residual required of each shifted solve.
    pub tolerance: f64,
    pub restart: usize,
    pub max_iterations: usize,
    /// Half bandwidth of the finite-difference preconditioner.
    pub preconditioner_order: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            direct_threshold: 2048,
            tolerance: 1e-10,
            restart: 60,
            max_iterations: 600,
            preconditioner_order: 16,
        }
    }
}

enum Backend {
    /// H = Q·T·Qᵀ with T given by its diagonal and off-diagonal.
    Direct { q: DMatrix<f64>, d: Vec<f64>, e: Vec<f64> },
    /// Toeplitz coefficients of the banded preconditioner, prefactor included.
    Iterative { stencil: Vec<f64> },
}

/// Window projection for one Hamiltonian.
pub struct WindowProjector<'a> {
    h: &'a DiscreteHamiltonian,
    backend: Backend,
    opts: SolverOptions,
}

/// √i = e^{iπ/4}.
fn sqrt_i() -> C {
    C::from_polar(1.0, FRAC_PI_4)
}

/// Order-2p central-difference coefficients for −d²/dx² (without 1/ΔR²).
pub fn finite_difference_stencil(p: usize) -> Vec<f64> {
    let mut tau = vec![0.0; p + 1];
    let mut ratio = 1.0;
    for m in 1..=p {
        // (p!)²/((p − m)!(p + m)!) built up as a running product
        ratio *= (p + 1 - m) as f64 / (p + m) as f64;
        let sign = if m % 2 == 0 { 2.0 } else { -2.0 };
        tau[m] = sign / (m * m) as f64 * ratio;
    }
    tau[0] = -2.0 * tau[1..].iter().sum::<f64>();
    tau
}

impl<'a> WindowProjector<'a> {
    pub fn new(h: &'a DiscreteHamiltonian, opts: SolverOptions) -> Result<Self> {
        if !(opts.tolerance > 0.0) || opts.restart == 0 || opts.preconditioner_order == 0 {
            return Err(Error::invalid("solver tolerance, restart and preconditioner order must be positive"));
        }
        let backend = if h.n() <= opts.direct_threshold {
            let (q, d, e) = SymmetricTridiagonal::new(h.dense()).unpack();
            Backend::Direct {
                q,
                d: d.as_slice().to_vec(),
                e: e.as_slice().to_vec(),
            }
        } else {
            let c = kinetic_prefactor(h.grid(), h.params());
            let stencil = finite_difference_stencil(opts.preconditioner_order)
                .into_iter()
                .map(|t| c * t)
                .collect();
            Backend::Iterative { stencil }
        };
        Ok(Self { h, backend, opts })
    }

    pub fn hamiltonian(&self) -> &DiscreteHamiltonian {
        self.h
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.backend, Backend::Direct { .. })
    }

    /// ψ in the basis the solver works in.
    fn prepare(&self, psi: &GridFunction) -> Result<Vec<C>> {
        if psi.grid != *self.h.grid() {
            return Err(Error::invalid("wave function and Hamiltonian live on different grids"));
        }
        Ok(match &self.backend {
            Backend::Direct { q, .. } => {
                let re = DVector::from_iterator(psi.values.len(), psi.values.iter().map(|v| v.re));
                let im = DVector::from_iterator(psi.values.len(), psi.values.iter().map(|v| v.im));
                let a = q.tr_mul(&re);
                let b = q.tr_mul(&im);
                a.iter().zip(b.iter()).map(|(&x, &y)| C::new(x, y)).collect()
            }
            Backend::Iterative { .. } => psi.values.clone(),
        })
    }

    /// Solve (H − z)x = b for every b in `rhs`, in the working basis.
    fn shifted_solve(&self, z: C, rhs: &[Vec<C>], e_k: f64) -> Result<Vec<Vec<C>>> {
        let failed = |residual: f64, iterations: usize| Error::LinearSolve {
            energy: e_k,
            residual,
            iterations,
        };
        match &self.backend {
            Backend::Direct { d, e, .. } => rhs
                .iter()
                .map(|b| {
                    let x = solve_shifted_tridiagonal(d, e, z, b).ok_or(failed(f64::INFINITY, 0))?;
                    let res = tridiagonal_residual(d, e, z, &x, b);
                    if !(res <= self.opts.tolerance) {
                        return Err(failed(res, 1));
                    }
                    Ok(x)
                })
                .collect(),
            Backend::Iterative { stencil } => {
                let n = self.h.n();
                let p = stencil.len() - 1;
                let v = self.h.potential();
                let lu = BandedLu::factor(n, p, |a, bb| {
                    let (i, j) = (a + 1, bb + 1);
                    let mut t = stencil[i.abs_diff(j)];
                    if i + j <= p {
                        t -= stencil[i + j];
                    }
                    if a == bb {
                        C::new(t + v[a], 0.0) - z
                    } else {
                        C::new(t, 0.0)
                    }
                })
                .ok_or(failed(f64::INFINITY, 0))?;
                let mut ws = self.h.workspace();
                rhs.iter()
                    .map(|b| {
                        let apply = |x: &[C], y: &mut [C]| {
                            self.h.apply_into(x, y, &mut ws);
                            for (yi, xi) in y.iter_mut().zip(x) {
                                *yi -= z * xi;
                            }
                        };
                        let (x, info) = gmres(
                            n,
                            apply,
                            |r: &mut [C]| lu.solve_in_place(r),
                            b,
                            self.opts.tolerance,
                            self.opts.restart,
                            self.opts.max_iterations,
                        );
                        if !info.converged {
                            return Err(failed(info.relative_residual, info.iterations));
                        }
                        Ok(x)
                    })
                    .collect()
            }
        }
    }

    /// χ_k in the working basis for each state; 2-norms equal those of the grid vectors.
    fn solve_bin(&self, psi_w: &[Vec<C>], e_k: f64, epsilon: f64) -> Result<Vec<Vec<C>>> {
        if !(epsilon > 0.0) {
            return Err(Error::invalid(format!("window half width must be positive, got {epsilon}")));
        }
        let s = sqrt_i() * epsilon;
        let rhs: Vec<Vec<C>> = psi_w
            .iter()
            .map(|p| p.iter().map(|v| v * (epsilon * epsilon)).collect())
            .collect();
        let phi = self.shifted_solve(C::new(e_k, 0.0) + s, &rhs, e_k)?;
        self.shifted_solve(C::new(e_k, 0.0) - s, &phi, e_k)
    }

    fn to_grid(&self, x: Vec<C>) -> Vec<C> {
        match &self.backend {
            Backend::Direct { q, .. } => {
                let re = DVector::from_iterator(x.len(), x.iter().map(|v| v.re));
                let im = DVector::from_iterator(x.len(), x.iter().map(|v| v.im));
                let a = q * re;
                let b = q * im;
                a.iter().zip(b.iter()).map(|(&x, &y)| C::new(x, y)).collect()
            }
            Backend::Iterative { .. } => x,
        }
    }

    pub fn bin_state(&self, psi: &GridFunction, e_k: f64, epsilon: f64) -> Result<BinState> {
        let w = self.prepare(psi)?;
        let x = self.solve_bin(&[w], e_k, epsilon)?.remove(0);
        Ok(BinState {
            chi: GridFunction::new(*self.h.grid(), self.to_grid(x))?,
            centroid: e_k,
            epsilon,
        })
    }

    /// Spectra of several states over the bins of `spec`; each bin's
    /// factorizations are shared between the states.
    fn raw_spectra(&self, psis: &[&GridFunction], spec: &WindowSpec) -> Result<Vec<EnergySpectrum>> {
        spec.validate()?;
        let w = psis.iter().map(|p| self.prepare(p)).collect::<Result<Vec<_>>>()?;
        let dr = self.h.grid().delta_r();
        let per_bin = spec
            .centroids()
            .par_iter()
            .map(|&e_k| {
                let xs = self.solve_bin(&w, e_k, spec.epsilon)?;
                Ok(xs.iter().map(|x| dr * x.iter().map(|v| v.norm_sqr()).sum::<f64>()).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok((0..psis.len())
            .map(|i| {
                let values: Vec<f64> = per_bin.iter().map(|b| b[i]).collect();
                EnergySpectrum {
                    spec: *spec,
                    excluded: vec![false; values.len()],
                    values,
                    r_max: self.h.grid().r_max(),
                    normalization: Normalization::Raw,
                }
            })
            .collect())
    }

    /// 𝒫(E_k) = ⟨χ_k|χ_k⟩ for every bin of `spec`, computed in parallel.
    pub fn raw_spectrum(&self, psi: &GridFunction, spec: &WindowSpec) -> Result<EnergySpectrum> {
        Ok(self.raw_spectra(&[psi], spec)?.remove(0))
    }

    /// Ratio of the spectra of `psi_interior` and `psi0`, normalized to unit
    /// sum over the bins whose denominator exceeds [`DENOMINATOR_FLOOR`].
    pub fn effective_spectrum(
        &self,
        psi_interior: &GridFunction,
        psi0: &GridFunction,
        spec: &WindowSpec,
    ) -> Result<EnergySpectrum> {
        let mut both = self.raw_spectra(&[psi_interior, psi0], spec)?;
        let den = both.pop().expect("two spectra");
        let num = both.pop().expect("two spectra");
        effective_from_raw(&num, &den)
    }
}

/// Effective spectrum from precomputed numerator and denominator spectra.
pub fn effective_from_raw(num: &EnergySpectrum, den: &EnergySpectrum) -> Result<EnergySpectrum> {
    if num.spec != den.spec {
        return Err(Error::invalid("numerator and denominator spectra use different bins"));
    }
    let mut excluded = vec![false; num.values.len()];
    let mut values = vec![0.0; num.values.len()];
    for k in 0..values.len() {
        if den.values[k] < DENOMINATOR_FLOOR {
            excluded[k] = true;
        } else {
            values[k] = num.values[k] / den.values[k];
        }
    }
    let sum: f64 = values.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::DegenerateInput(
            "effective spectrum vanishes on every bin that was not excluded".into(),
        ));
    }
    let n_excluded = excluded.iter().filter(|&&x| x).count();
    if n_excluded > 0 {
        log::info!("{n_excluded} bins excluded from the effective spectrum (initial probability below {DENOMINATOR_FLOOR:e})");
    }
    for v in &mut values {
        *v /= sum;
    }
    Ok(EnergySpectrum {
        spec: num.spec,
        values,
        excluded,
        r_max: num.r_max,
        normalization: Normalization::EffectiveNormalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_shape() {
        let (ek, eps) = (5.0, 0.01);
        assert!((window_weight(ek, ek, eps) - 1.0).abs() < 1e-12);
        assert!((window_weight(ek + eps, ek, eps) - 0.5).abs() < 1e-12);
        assert!((window_weight(ek - eps, ek, eps) - 0.5).abs() < 1e-12);
        assert!((window_weight(ek + 2.0 * eps, ek, eps) - 1.0 / 17.0).abs() < 1e-12);
        assert!((window_weight(ek - 2.0 * eps, ek, eps) - 1.0 / 17.0).abs() < 1e-12);
    }

    #[test]
    fn centroids_step_by_two_epsilon() {
        let s = WindowSpec::new(0.025, 4.0, 8.0).unwrap();
        assert_eq!(s.n_bins(), 80);
        assert!((s.centroid(0) - 4.025).abs() < 1e-15);
        for w in s.centroids().windows(2) {
            assert!((w[1] - w[0] - 0.05).abs() < 1e-12);
        }
        assert!(WindowSpec::new(0.0, 4.0, 8.0).is_err());
        assert!(WindowSpec::new(0.1, 4.0, 4.1).is_err());
    }

    #[test]
    fn resolution_law() {
        let p = SystemParams::default();
        let a = resolution_estimate(4.0, 3000.0, &p).unwrap();
        assert!((a - 7.8e-3).abs() < 0.1e-3, "{a}");
        let b = resolution_estimate(4.0, 6000.0, &p).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn stencil_tends_to_symbol() {
        // classic fourth-order second difference: −(−1/12, 4/3, −5/2, 4/3, −1/12)
        let t2 = finite_difference_stencil(2);
        for (a, b) in t2.iter().zip([2.5, -4.0 / 3.0, 1.0 / 12.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        let limit = std::f64::consts::PI.powi(2) / 3.0;
        let c: Vec<f64> = [4, 8, 16, 64].iter().map(|&p| finite_difference_stencil(p)[0]).collect();
        assert!(c.windows(2).all(|w| w[1] > w[0] && w[1] < limit));
        assert!((c[3] - limit).abs() < 0.05);
        let t1 = finite_difference_stencil(1);
        assert_eq!(t1, vec![2.0, -1.0]);
    }
}
