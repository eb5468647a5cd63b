//! Discrete radial Hamiltonian H = T + V on a uniform half-line grid.
//!
//! The kinetic operator is the Colbert-Miller matrix
//!   T_ij = c·(−1)^{i−j} [2/(i−j)² − 2/(i+j)²],  T_ii = c·(π²/3 − 1/(2i²)),
//! with c = ħ²/(2μΔR²). It equals c·t(i−j) − c·t(i+j) for the Toeplitz
//! symbol t(0) = π²/3, t(m) = 2(−1)^m/m², so T·x is a linear convolution of
//! the odd extension of x with t and can be applied with FFTs in O(N log N).

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, RadialGrid};
use crate::potential::{total_potential_unchecked, PotentialModel, SystemParams};

/// Safety factor applied to the spectral interval about its center.
pub const SPECTRAL_MARGIN: f64 = 1.05;

/// Toeplitz symbol of the kinetic matrix, without the prefactor.
#[inline]
pub(crate) fn toeplitz_symbol(m: usize) -> f64 {
    if m == 0 {
        PI * PI / 3.0
    } else {
        let s = if m.is_multiple_of(2) { 2.0 } else { -2.0 };
        s / (m as f64 * m as f64)
    }
}

/// Prefactor ħ²/(2μΔR²) in MeV.
pub fn kinetic_prefactor(grid: &RadialGrid, params: &SystemParams) -> f64 {
    params.hbar2_over_2mu() / (grid.delta_r() * grid.delta_r())
}

/// Dense kinetic matrix in MeV.
pub fn kinetic_matrix(grid: &RadialGrid, params: &SystemParams) -> DMatrix<f64> {
    let n = grid.n_points();
    let c = kinetic_prefactor(grid, params);
    DMatrix::from_fn(n, n, |a, b| {
        let (i, j): (usize, usize) = (a + 1, b + 1);
        if i == j {
            c * (PI * PI / 3.0 - 0.5 / (i * i) as f64)
        } else {
            c * (toeplitz_symbol(i.abs_diff(j)) - toeplitz_symbol(i + j))
        }
    })
}

/// FFT realization of the kinetic matrix.
#[derive(Clone)]
pub struct KineticOperator {
    n: usize,
    prefactor: f64,
    kernel_hat: Arc<Vec<Complex64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for KineticOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KineticOperator")
            .field("n", &self.n)
            .field("prefactor", &self.prefactor)
            .finish()
    }
}

/// Scratch space for [`KineticOperator::apply_into`].
pub struct KineticWorkspace {
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl KineticOperator {
    pub fn new(grid: &RadialGrid, params: &SystemParams) -> Self {
        let n = grid.n_points();
        let m = 4 * n;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        // Even circular kernel over differences up to 2N; its transform is real.
        let mut kernel: Vec<Complex64> = (0..m)
            .map(|r| Complex64::new(toeplitz_symbol(r.min(m - r)), 0.0))
            .collect();
        forward.process(&mut kernel);
        let scale = 1.0 / m as f64;
        for k in &mut kernel {
            *k = Complex64::new(k.re * scale, 0.0);
        }
        Self {
            n,
            prefactor: kinetic_prefactor(grid, params),
            kernel_hat: Arc::new(kernel),
            forward,
            inverse,
        }
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    pub fn workspace(&self) -> KineticWorkspace {
        let m = 4 * self.n;
        let scratch_len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        KineticWorkspace {
            buf: vec![Complex64::new(0.0, 0.0); m],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    /// out = T·x.
    pub fn apply_into(&self, x: &[Complex64], out: &mut [Complex64], ws: &mut KineticWorkspace) {
        let n = self.n;
        let m = 4 * n;
        let buf = &mut ws.buf;
        buf.fill(Complex64::new(0.0, 0.0));
        for j in 0..n {
            buf[j + 1] = x[j];
            buf[m - 1 - j] = -x[j];
        }
        self.forward.process_with_scratch(buf, &mut ws.scratch);
        for (b, k) in buf.iter_mut().zip(self.kernel_hat.iter()) {
            *b *= k;
        }
        self.inverse.process_with_scratch(buf, &mut ws.scratch);
        for i in 0..n {
            out[i] = buf[i + 1] * self.prefactor;
        }
    }
}

/// H = T + V for one partial wave.
#[derive(Debug, Clone)]
pub struct DiscreteHamiltonian {
    grid: RadialGrid,
    params: SystemParams,
    potential: Vec<f64>,
    kinetic: KineticOperator,
    bounds: (f64, f64),
}

impl DiscreteHamiltonian {
    /// Hamiltonian of partial wave `j` for `model`.
    pub fn new(grid: RadialGrid, model: &PotentialModel, params: &SystemParams, j: u32) -> Self {
        let potential = grid
            .points()
            .map(|r| total_potential_unchecked(model, params, j, r))
            .collect();
        Self::from_potential(grid, params, potential).expect("potential length matches grid")
    }

    /// Hamiltonian with an explicit diagonal potential (MeV) on the grid.
    pub fn from_potential(grid: RadialGrid, params: &SystemParams, potential: Vec<f64>) -> Result<Self> {
        if potential.len() != grid.n_points() {
            return Err(Error::invalid("potential length differs from the grid"));
        }
        if potential.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("potential has non-finite values"));
        }
        let kinetic = KineticOperator::new(&grid, params);
        let bounds = spectral_enclosure(kinetic.prefactor(), &potential);
        Ok(Self {
            grid,
            params: *params,
            potential,
            kinetic,
            bounds,
        })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn kinetic(&self) -> &KineticOperator {
        &self.kinetic
    }

    pub fn n(&self) -> usize {
        self.grid.n_points()
    }

    /// Dense H (O(N²) memory).
    pub fn dense(&self) -> DMatrix<f64> {
        let mut h = kinetic_matrix(&self.grid, &self.params);
        for (i, v) in self.potential.iter().enumerate() {
            h[(i, i)] += v;
        }
        h
    }

    pub fn workspace(&self) -> KineticWorkspace {
        self.kinetic.workspace()
    }

    /// out = H·x on raw amplitude slices.
    pub fn apply_into(&self, x: &[Complex64], out: &mut [Complex64], ws: &mut KineticWorkspace) {
        self.kinetic.apply_into(x, out, ws);
        for ((o, xi), v) in out.iter_mut().zip(x).zip(&self.potential) {
            *o += xi * v;
        }
    }

    /// H·ψ.
    pub fn apply(&self, psi: &GridFunction) -> Result<GridFunction> {
        if psi.grid != self.grid {
            return Err(Error::invalid("wave function and Hamiltonian live on different grids"));
        }
        let mut out = GridFunction::zeros(self.grid);
        let mut ws = self.workspace();
        self.apply_into(&psi.values, &mut out.values, &mut ws);
        Ok(out)
    }

    /// ⟨ψ|H|ψ⟩ / ⟨ψ|ψ⟩ (real part).
    pub fn expectation(&self, psi: &GridFunction) -> Result<f64> {
        let h = self.apply(psi)?;
        Ok(psi.inner(&h).re / psi.norm_sqr())
    }

    /// Enclosure (E_min, E_max) of the spectrum, widened by [`SPECTRAL_MARGIN`].
    pub fn spectral_bounds(&self) -> (f64, f64) {
        self.bounds
    }
}

/// The symbol c·Σ_m t(m)e^{imk} = c·k² on [−π, π] gives 0 ≤ T ≤ cπ²; the
/// upper end is also the Gershgorin row bound c(π²/3 + Σ_{m≠0} 2/m²).
fn spectral_enclosure(c: f64, potential: &[f64]) -> (f64, f64) {
    let vmin = potential.iter().cloned().fold(f64::INFINITY, f64::min);
    let vmax = potential.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = vmin;
    let hi = vmax + c * PI * PI;
    widen((lo, hi), SPECTRAL_MARGIN)
}

pub(crate) fn widen((lo, hi): (f64, f64), margin: f64) -> (f64, f64) {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo) * margin;
    (mid - half, mid + half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    fn params() -> SystemParams {
        SystemParams::default()
    }

    #[test]
    fn dense_is_symmetric() {
        let g = RadialGrid::new(20.0, 40).unwrap();
        let t = kinetic_matrix(&g, &params());
        assert_eq!(t.clone(), t.transpose());
    }

    #[test]
    fn fft_apply_matches_dense() {
        let g = RadialGrid::new(50.0, 97).unwrap();
        let t = kinetic_matrix(&g, &params());
        let k = KineticOperator::new(&g, &params());
        let x: Vec<Complex64> = (0..97)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let mut y = vec![Complex64::new(0.0, 0.0); 97];
        k.apply_into(&x, &mut y, &mut k.workspace());
        let scale = t.amax();
        for i in 0..97 {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..97 {
                s += x[j] * t[(i, j)];
            }
            assert!((s - y[i]).norm() < 1e-12 * scale * 97.0, "row {i}");
        }
    }

    #[test]
    fn box_spectrum() {
        let n = 400;
        let g = RadialGrid::new(200.0, n).unwrap();
        let p = params();
        let e = SymmetricEigen::new(kinetic_matrix(&g, &p)).eigenvalues;
        let mut ev: Vec<f64> = e.iter().cloned().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let l = (n + 1) as f64 * g.delta_r();
        for (k, &val) in ev.iter().take(10).enumerate() {
            let kk = (k + 1) as f64 * PI / l;
            let exact = p.energy(kk);
            assert!((val - exact).abs() / exact < 1e-3, "level {k}: {val} vs {exact}");
        }
    }

    #[test]
    fn oscillator_ground_state() {
        let p = params();
        let hw = 2.0;
        let r0 = 15.0;
        let g = RadialGrid::new(30.0, 150).unwrap();
        let kspring = p.reduced_mass * (hw / p.hbar_c).powi(2);
        let v: Vec<f64> = g.points().map(|r| 0.5 * kspring * (r - r0).powi(2)).collect();
        let h = DiscreteHamiltonian::from_potential(g, &p, v).unwrap();
        let e = SymmetricEigen::new(h.dense()).eigenvalues.min();
        assert!((e - hw / 2.0).abs() / (hw / 2.0) < 1e-4, "{e}");
    }

    #[test]
    fn bounds_enclose_spectrum() {
        let p = params();
        let g = RadialGrid::new(32.0, 64).unwrap();
        let model = PotentialModel::Surrogate(crate::potential::SurrogateParams::carbon12());
        let h = DiscreteHamiltonian::new(g, &model, &p, 2);
        let e = SymmetricEigen::new(h.dense()).eigenvalues;
        let (lo, hi) = h.spectral_bounds();
        assert!(e.min() >= lo && e.max() <= hi);
        let free = DiscreteHamiltonian::from_potential(g, &p, vec![0.0; 64]).unwrap();
        assert!(free.spectral_bounds().0 <= 0.0);
    }
}
