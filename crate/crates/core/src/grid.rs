//! Uniform radial meshes on (0, R_max] and functions living on them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this interior norm a truncated function is treated as empty.
pub const INTERIOR_NORM_FLOOR: f64 = 1e-14;

/// Uniform mesh R_i = i·ΔR, i = 1..N. The origin is excluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    n_points: usize,
    delta_r: f64,
}

impl RadialGrid {
    pub fn new(r_max: f64, n_points: usize) -> Result<Self> {
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::invalid(format!("r_max must be positive, got {r_max}")));
        }
        if n_points < 2 {
            return Err(Error::invalid(format!("need at least 2 grid points, got {n_points}")));
        }
        Ok(Self {
            n_points,
            delta_r: r_max / n_points as f64,
        })
    }

    /// Grid with a given spacing and point count.
    pub fn with_spacing(delta_r: f64, n_points: usize) -> Result<Self> {
        if !(delta_r > 0.0) || !delta_r.is_finite() {
            return Err(Error::invalid(format!("spacing must be positive, got {delta_r}")));
        }
        if n_points < 2 {
            return Err(Error::invalid(format!("need at least 2 grid points, got {n_points}")));
        }
        Ok(Self { n_points, delta_r })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn delta_r(&self) -> f64 {
        self.delta_r
    }

    pub fn r_max(&self) -> f64 {
        self.delta_r * self.n_points as f64
    }

    /// Radius of the zero-based point `idx` (so `point(0) = ΔR`).
    #[inline]
    pub fn point(&self, idx: usize) -> f64 {
        (idx + 1) as f64 * self.delta_r
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.point(i))
    }

    /// Number of points with R_i ≤ r (with a small tolerance for round-off).
    pub fn count_within(&self, r: f64) -> usize {
        let k = (r / self.delta_r * (1.0 + 1e-12)).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.n_points)
        }
    }
}

/// Construct a grid on (0, r_max] with `n_points` uniformly spaced points.
pub fn make_grid(r_max: f64, n_points: usize) -> Result<RadialGrid> {
    RadialGrid::new(r_max, n_points)
}

/// Complex amplitudes sampled on a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: RadialGrid,
    pub values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: RadialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::invalid(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.n_points()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.n_points()],
        }
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.points().map(f).collect();
        Self { grid, values }
    }

    /// ΔR·Σ|ψ_i|².
    pub fn norm_sqr(&self) -> f64 {
        self.grid.delta_r() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// ΔR·Σ conj(a_i) b_i.
    pub fn inner(&self, other: &GridFunction) -> Complex64 {
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        s * self.grid.delta_r()
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }
}

/// Zero-pad `f` onto a larger grid with the same spacing.
pub fn extend(f: &GridFunction, new_r_max: f64) -> Result<GridFunction> {
    let dr = f.grid.delta_r();
    let old = f.grid.r_max();
    if new_r_max < old * (1.0 - 1e-12) {
        return Err(Error::invalid(format!(
            "cannot extend a {old} fm grid to a smaller R_max {new_r_max} fm"
        )));
    }
    let ratio = new_r_max / dr;
    let n_new = ratio.round();
    if (ratio - n_new).abs() > 1e-8 * ratio.max(1.0) {
        return Err(Error::invalid(format!(
            "R_max {new_r_max} fm is not a multiple of the spacing {dr} fm"
        )));
    }
    let n_new = (n_new as usize).max(f.grid.n_points());
    let grid = RadialGrid::with_spacing(dr, n_new)?;
    let mut values = f.values.clone();
    values.resize(n_new, Complex64::new(0.0, 0.0));
    Ok(GridFunction { grid, values })
}

/// Sharp truncation at `r_cut` followed by renormalization to unit norm.
pub fn interior_part(psi: &GridFunction, r_cut: f64) -> Result<GridFunction> {
    if !(r_cut > 0.0) || r_cut > psi.grid.r_max() * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "cut radius {r_cut} fm outside (0, {}]",
            psi.grid.r_max()
        )));
    }
    let keep = psi.grid.count_within(r_cut);
    let mut out = GridFunction::zeros(psi.grid);
    out.values[..keep].copy_from_slice(&psi.values[..keep]);
    let nrm = out.norm();
    if !(nrm > INTERIOR_NORM_FLOOR) {
        return Err(Error::DegenerateInput(format!(
            "interior norm {nrm:.3e} inside {r_cut} fm is below the floor {INTERIOR_NORM_FLOOR:.0e}"
        )));
    }
    out.scale(1.0 / nrm);
    Ok(out)
}
