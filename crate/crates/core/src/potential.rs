//! Nucleus-nucleus potentials U(R), the J-dependent total potential and
//! barrier location.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

/// Reduced mass, charges and the constants that go with them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// μc² in MeV.
    pub reduced_mass: f64,
    /// Z₁Z₂.
    pub charge_product: f64,
    /// ħc in MeV·fm.
    #[serde(default = "default_hbar_c")]
    pub hbar_c: f64,
    /// e² in MeV·fm.
    #[serde(default = "default_e2")]
    pub e2: f64,
}

fn default_hbar_c() -> f64 {
    units::HBAR_C
}

fn default_e2() -> f64 {
    units::E2
}

impl Default for SystemParams {
    /// ¹²C + ¹²C.
    fn default() -> Self {
        Self {
            reduced_mass: units::MU_C12_C12,
            charge_product: units::ZZ_C12_C12,
            hbar_c: units::HBAR_C,
            e2: units::E2,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.reduced_mass > 0.0) {
            return Err(Error::invalid("reduced mass must be positive"));
        }
        if !(self.charge_product >= 0.0) {
            return Err(Error::invalid("charge product must be non-negative"));
        }
        if !(self.hbar_c > 0.0) || !(self.e2 >= 0.0) {
            return Err(Error::invalid("hbar_c must be positive and e2 non-negative"));
        }
        Ok(())
    }

    /// ħ²/2μ in MeV·fm².
    pub fn hbar2_over_2mu(&self) -> f64 {
        self.hbar_c * self.hbar_c / (2.0 * self.reduced_mass)
    }

    /// Z₁Z₂e² in MeV·fm.
    pub fn coulomb_strength(&self) -> f64 {
        self.charge_product * self.e2
    }

    /// Wavenumber K = √(2μc²E)/ħc in fm⁻¹.
    pub fn wavenumber(&self, e: f64) -> f64 {
        (2.0 * self.reduced_mass * e).sqrt() / self.hbar_c
    }

    /// Energy ħ²K²/2μ in MeV.
    pub fn energy(&self, k: f64) -> f64 {
        self.hbar2_over_2mu() * k * k
    }

    /// Sommerfeld parameter η = Z₁Z₂e²μ/(ħ²K).
    pub fn sommerfeld(&self, e: f64) -> f64 {
        self.coulomb_strength() / (2.0 * self.hbar2_over_2mu() * self.wavenumber(e))
    }

    pub fn centrifugal(&self, j: u32, r: f64) -> f64 {
        let l = j as f64;
        self.hbar2_over_2mu() * l * (l + 1.0) / (r * r)
    }
}

/// Woods-Saxon well plus a repulsive Fermi-shaped term plus the Coulomb field
/// of a uniformly charged sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    /// Well depth V₀ (MeV).
    pub depth: f64,
    /// Well radius (fm).
    pub radius: f64,
    /// Well diffuseness (fm).
    pub diffuseness: f64,
    /// Height of the repulsive term (MeV); zero gives a plain Woods-Saxon well.
    #[serde(default)]
    pub repulsion_height: f64,
    #[serde(default = "default_repulsion_radius")]
    pub repulsion_radius: f64,
    #[serde(default = "default_repulsion_diffuseness")]
    pub repulsion_diffuseness: f64,
    /// Radius of the charged sphere (fm).
    pub coulomb_radius: f64,
}

fn default_repulsion_radius() -> f64 {
    1.0
}

fn default_repulsion_diffuseness() -> f64 {
    0.8
}

impl SurrogateParams {
    /// Parameters tuned for ¹²C + ¹²C barriers of 6.5/6.8/7.6 MeV at about
    /// 8.0/7.9/7.8 fm for J = 0/2/4, each with one quasi-bound level in the
    /// pocket (widths about 1.4, 6.4 and 57 keV).
    pub fn carbon12() -> Self {
        Self {
            depth: 114.37959,
            radius: 4.98263,
            diffuseness: 0.96905,
            repulsion_height: 248.31698,
            repulsion_radius: 3.30428,
            repulsion_diffuseness: 1.20078,
            coulomb_radius: 7.21951,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("radius", self.radius),
            ("diffuseness", self.diffuseness),
            ("repulsion_radius", self.repulsion_radius),
            ("repulsion_diffuseness", self.repulsion_diffuseness),
            ("coulomb_radius", self.coulomb_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("surrogate {name} must be positive, got {v}")));
            }
        }
        if !self.depth.is_finite() || !self.repulsion_height.is_finite() {
            return Err(Error::invalid("surrogate depth and repulsion height must be finite"));
        }
        Ok(())
    }

    fn nuclear(&self, r: f64) -> f64 {
        let well = -self.depth / (1.0 + ((r - self.radius) / self.diffuseness).exp());
        let repulsion = if self.repulsion_height != 0.0 {
            self.repulsion_height / (1.0 + ((r - self.repulsion_radius) / self.repulsion_diffuseness).exp())
        } else {
            0.0
        };
        well + repulsion
    }
}

/// Potential table with a cubic-spline interpolant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedPotential {
    r: Vec<f64>,
    u: Vec<f64>,
    /// Spline second derivatives at the nodes.
    m: Vec<f64>,
}

/// Decay length (fm) of the nuclear remainder beyond the last table node.
const TAIL_DECAY: f64 = 1.0;

impl TabulatedPotential {
    pub fn from_nodes(r: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if r.len() != u.len() {
            return Err(Error::invalid("radius and value columns differ in length"));
        }
        if r.len() < 4 {
            return Err(Error::invalid(format!("need at least 4 nodes, got {}", r.len())));
        }
        if r[0] <= 0.0 {
            return Err(Error::invalid("table radii must be positive"));
        }
        if let Some(k) = (1..r.len()).find(|&k| r[k] <= r[k - 1]) {
            return Err(Error::invalid(format!("radii not strictly increasing at node {k}")));
        }
        let m = clamped_spline_second_derivatives(&r, &u);
        Ok(Self { r, u, m })
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.r, &self.u)
    }

    pub fn first_radius(&self) -> f64 {
        self.r[0]
    }

    pub fn last_radius(&self) -> f64 {
        *self.r.last().unwrap()
    }

    fn eval(&self, x: f64, coulomb: f64) -> f64 {
        let n = self.r.len();
        if x >= self.r[n - 1] {
            let r_last = self.r[n - 1];
            let delta = self.u[n - 1] - coulomb / r_last;
            return coulomb / x + delta * (-(x - r_last) / TAIL_DECAY).exp();
        }
        if x <= self.r[0] {
            let slope = self.slope_at(0, 0.0);
            return self.u[0] + slope * (x - self.r[0]);
        }
        let k = match self.r.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(k) => return self.u[k],
            Err(k) => k - 1,
        };
        self.cubic(k, x - self.r[k])
    }

    fn cubic(&self, k: usize, t: f64) -> f64 {
        let h = self.r[k + 1] - self.r[k];
        let a = self.u[k];
        let b = (self.u[k + 1] - self.u[k]) / h - h * (2.0 * self.m[k] + self.m[k + 1]) / 6.0;
        let c = self.m[k] / 2.0;
        let d = (self.m[k + 1] - self.m[k]) / (6.0 * h);
        a + t * (b + t * (c + t * d))
    }

    fn slope_at(&self, k: usize, t: f64) -> f64 {
        let h = self.r[k + 1] - self.r[k];
        let b = (self.u[k + 1] - self.u[k]) / h - h * (2.0 * self.m[k] + self.m[k + 1]) / 6.0;
        let c = self.m[k] / 2.0;
        let d = (self.m[k + 1] - self.m[k]) / (6.0 * h);
        b + t * (2.0 * c + 3.0 * d * t)
    }
}

/// Derivative at `x[at]` of the cubic through four consecutive nodes starting at `start`.
fn lagrange4_slope(x: &[f64], y: &[f64], start: usize, at: usize) -> f64 {
    let xs = &x[start..start + 4];
    let ys = &y[start..start + 4];
    let x0 = x[at];
    let mut s = 0.0;
    for i in 0..4 {
        // d/dx of the i-th basis polynomial at x0
        let mut denom = 1.0;
        for j in 0..4 {
            if j != i {
                denom *= xs[i] - xs[j];
            }
        }
        let mut num = 0.0;
        for k in 0..4 {
            if k == i {
                continue;
            }
            let mut p = 1.0;
            for j in 0..4 {
                if j != i && j != k {
                    p *= x0 - xs[j];
                }
            }
            num += p;
        }
        s += ys[i] * num / denom;
    }
    s
}

/// Second derivatives of the clamped cubic spline, end slopes taken from the
/// cubic through the four outermost nodes on each side.
fn clamped_spline_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let s0 = lagrange4_slope(x, y, 0, 0);
    let sn = lagrange4_slope(x, y, n - 4, n - 1);
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let h0 = x[1] - x[0];
    b[0] = h0 / 3.0;
    c[0] = h0 / 6.0;
    d[0] = (y[1] - y[0]) / h0 - s0;
    for i in 1..n - 1 {
        let hl = x[i] - x[i - 1];
        let hr = x[i + 1] - x[i];
        a[i] = hl / 6.0;
        b[i] = (hl + hr) / 3.0;
        c[i] = hr / 6.0;
        d[i] = (y[i + 1] - y[i]) / hr - (y[i] - y[i - 1]) / hl;
    }
    let hn = x[n - 1] - x[n - 2];
    a[n - 1] = hn / 6.0;
    b[n - 1] = hn / 3.0;
    d[n - 1] = sn - (y[n - 1] - y[n - 2]) / hn;
    // Thomas algorithm; the system is diagonally dominant.
    for i in 1..n {
        let w = a[i] / b[i - 1];
        b[i] -= w * c[i - 1];
        d[i] -= w * d[i - 1];
    }
    let mut m = vec![0.0; n];
    m[n - 1] = d[n - 1] / b[n - 1];
    for i in (0..n - 1).rev() {
        m[i] = (d[i] - c[i] * m[i + 1]) / b[i];
    }
    m
}

/// Source of U(R).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialModel {
    Surrogate(SurrogateParams),
    Tabulated(TabulatedPotential),
    /// Z₁Z₂e²/R with no nuclear part.
    PointCoulomb,
}

impl PotentialModel {
    /// U(R) in MeV.
    pub fn u(&self, r: f64, params: &SystemParams) -> f64 {
        let zz = params.coulomb_strength();
        match self {
            PotentialModel::Surrogate(s) => {
                let rc = s.coulomb_radius;
                let coul = if r >= rc {
                    zz / r
                } else {
                    zz / (2.0 * rc) * (3.0 - (r / rc) * (r / rc))
                };
                s.nuclear(r) + coul
            }
            PotentialModel::Tabulated(t) => t.eval(r, zz),
            PotentialModel::PointCoulomb => zz / r,
        }
    }

    /// U(R) minus the point-Coulomb potential.
    pub fn short_range(&self, r: f64, params: &SystemParams) -> f64 {
        self.u(r, params) - params.coulomb_strength() / r
    }

    /// lim_{R→0} R·U(R): the 1/R strength of the potential at the origin.
    pub fn origin_strength(&self, params: &SystemParams) -> f64 {
        match self {
            PotentialModel::PointCoulomb => params.coulomb_strength(),
            _ => 0.0,
        }
    }
}

/// V(R) = ħ²J(J+1)/(2μR²) + U(R).
pub fn total_potential(model: &PotentialModel, params: &SystemParams, j: u32, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("radius must be positive, got {r}")));
    }
    Ok(total_potential_unchecked(model, params, j, r))
}

#[inline]
pub(crate) fn total_potential_unchecked(model: &PotentialModel, params: &SystemParams, j: u32, r: f64) -> f64 {
    params.centrifugal(j, r) + model.u(r, params)
}

/// Location of the Coulomb barrier and the pocket inside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierInfo {
    pub height: f64,
    pub radius: f64,
    pub pocket_minimum: f64,
    pub pocket_radius: f64,
}

const SCAN_MIN: f64 = 0.1;
const SCAN_MAX: f64 = 30.0;
const SCAN_STEP: f64 = 0.005;

/// Outermost local maximum of V(R) in the scan range and the local minimum
/// inside it, both refined by golden-section search.
pub fn find_barrier(model: &PotentialModel, params: &SystemParams, j: u32) -> Result<BarrierInfo> {
    let v = |r: f64| total_potential_unchecked(model, params, j, r);
    let n = ((SCAN_MAX - SCAN_MIN) / SCAN_STEP).round() as usize + 1;
    let rs: Vec<f64> = (0..n).map(|i| SCAN_MIN + i as f64 * SCAN_STEP).collect();
    let vs: Vec<f64> = rs.iter().map(|&r| v(r)).collect();

    let imax = (1..n - 1)
        .rev()
        .find(|&i| vs[i] >= vs[i - 1] && vs[i] > vs[i + 1])
        .ok_or(Error::NoBarrier { j })?;
    let mut imin = imax;
    while imin > 0 && vs[imin - 1] < vs[imin] {
        imin -= 1;
    }
    if imin == 0 || imin == imax {
        return Err(Error::NoBarrier { j });
    }

    let radius = golden_section(|r| -v(r), rs[imax - 1], rs[imax + 1], 1e-9);
    let pocket_radius = golden_section(v, rs[imin - 1], rs[imin + 1], 1e-9);
    Ok(BarrierInfo {
        height: v(radius),
        radius,
        pocket_minimum: v(pocket_radius),
        pocket_radius,
    })
}

/// Minimize `f` on [a, b].
pub(crate) fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Read a two-column "R_fm U_MeV" table. Lines starting with '#' and blank
/// lines are ignored.
pub fn load_tabulated(path: &Path) -> Result<PotentialModel> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingArtifact(path.to_path_buf())
        } else {
            Error::Io(e)
        }
    })?;
    parse_table(&text, path)
}

pub fn parse_table(text: &str, path: &Path) -> Result<PotentialModel> {
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut r = Vec::new();
    let mut u = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        last_line = line_no;
        let mut cols = line.split_whitespace();
        let (a, b) = match (cols.next(), cols.next(), cols.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => return Err(perr(line_no, format!("expected two columns, got `{line}`"))),
        };
        let ra: f64 = a
            .parse()
            .map_err(|_| perr(line_no, format!("radius `{a}` is not a number")))?;
        let ub: f64 = b
            .parse()
            .map_err(|_| perr(line_no, format!("potential `{b}` is not a number")))?;
        if !ra.is_finite() || !ub.is_finite() {
            return Err(perr(line_no, "non-finite value".into()));
        }
        if ra <= 0.0 {
            return Err(perr(line_no, format!("radius {ra} must be positive")));
        }
        if let Some(&prev) = r.last() {
            if ra <= prev {
                return Err(perr(line_no, format!("radius {ra} does not increase (previous {prev})")));
            }
        }
        r.push(ra);
        u.push(ub);
    }
    if r.len() < 4 {
        return Err(perr(last_line.max(1), format!("need at least 4 rows, found {}", r.len())));
    }
    Ok(PotentialModel::Tabulated(TabulatedPotential::from_nodes(r, u)?))
}

/// Write U(R) sampled at `radii` in the table format read by [`load_tabulated`].
pub fn write_table(path: &Path, model: &PotentialModel, params: &SystemParams, radii: &[f64]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# R_fm U_MeV")?;
    for &r in radii {
        writeln!(f, "{} {}", r, model.u(r, params))?;
    }
    f.flush()?;
    Ok(())
}
