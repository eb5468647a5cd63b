//! Linearized least-squares rational fits P_L(t)/Q_M(t) with Q(0) = 1 and
//! their poles, shared by the density Padé fit and the S-matrix pole search.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

/// Singular values below this fraction of the largest are dropped.
const RANK_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct RationalFit {
    /// Samples are mapped to t = (E − center)/scale.
    pub center: f64,
    pub scale: f64,
    pub p: Vec<C>,
    /// q[0] = 1.
    pub q: Vec<C>,
    pub rank: usize,
    /// Ratio of extreme singular values of the column-scaled system.
    pub condition: f64,
}

/// A pole in the energy variable together with its residue.
#[derive(Debug, Clone, Copy)]
pub struct Pole {
    pub position: C,
    pub residue: C,
}

fn horner(c: &[C], t: C) -> C {
    c.iter().rev().fold(C::new(0.0, 0.0), |acc, &a| acc * t + a)
}

fn horner_derivative(c: &[C], t: C) -> C {
    let mut acc = C::new(0.0, 0.0);
    for (k, &a) in c.iter().enumerate().skip(1).rev() {
        acc = acc * t + a * k as f64;
    }
    acc
}

/// Roots of Σ c_k t^k via the eigenvalues of the companion matrix.
pub fn polynomial_roots(c: &[C]) -> Vec<C> {
    let maxc = c.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut deg = c.len().saturating_sub(1);
    while deg > 0 && c[deg].norm() <= 1e-14 * maxc {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg];
    let mut m = DMatrix::<C>::zeros(deg, deg);
    for i in 1..deg {
        m[(i, i - 1)] = C::new(1.0, 0.0);
    }
    for i in 0..deg {
        m[(i, deg - 1)] = -c[i] / lead;
    }
    let schur = Schur::new(m);
    let (_, t) = schur.unpack();
    (0..deg).map(|i| t[(i, i)]).collect()
}

/// Fit y ≈ P_L(t)/Q_M(t) through the samples (x_i, y_i).
pub fn fit_rational(x: &[f64], y: &[C], l: usize, m: usize) -> Result<RationalFit> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::invalid("abscissa and ordinate lengths differ"));
    }
    let unknowns = l + 1 + m;
    if n < unknowns {
        return Err(Error::invalid(format!(
            "{n} samples cannot determine orders ({l}, {m}); need at least {unknowns}"
        )));
    }
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::invalid("samples span no interval"));
    }
    let center = 0.5 * (lo + hi);
    let scale = 0.5 * (hi - lo);
    let mut a = DMatrix::<C>::zeros(n, unknowns);
    let mut b = DVector::<C>::zeros(n);
    for i in 0..n {
        let t = (x[i] - center) / scale;
        let mut tp = 1.0;
        for j in 0..=l {
            a[(i, j)] = C::new(tp, 0.0);
            tp *= t;
        }
        let mut tp = t;
        for k in 1..=m {
            a[(i, l + k)] = -y[i] * tp;
            tp *= t;
        }
        b[i] = y[i];
    }
    let col_norms: Vec<f64> = (0..unknowns)
        .map(|j| a.column(j).norm().max(f64::MIN_POSITIVE))
        .collect();
    for (j, s) in col_norms.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) {
        return Err(Error::Conditioning { condition: f64::INFINITY });
    }
    let cutoff = RANK_CUTOFF * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let condition = smax / smin;
    if rank < m.min(unknowns) {
        return Err(Error::Conditioning { condition });
    }
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let mut sol = DVector::<C>::zeros(unknowns);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff {
            continue;
        }
        let coef = u.column(k).dotc(&b) / s;
        for j in 0..unknowns {
            sol[j] += vt[(k, j)].conj() * coef;
        }
    }
    for j in 0..unknowns {
        sol[j] /= col_norms[j];
    }
    let p = (0..=l).map(|j| sol[j]).collect();
    let mut q = vec![C::new(1.0, 0.0)];
    q.extend((1..=m).map(|k| sol[l + k]));
    Ok(RationalFit {
        center,
        scale,
        p,
        q,
        rank,
        condition,
    })
}

impl RationalFit {
    fn to_t(&self, e: C) -> C {
        (e - self.center) / self.scale
    }

    pub fn eval(&self, e: f64) -> C {
        let t = self.to_t(C::new(e, 0.0));
        horner(&self.p, t) / horner(&self.q, t)
    }

    /// Poles of the fit in the energy variable with residues in energy units.
    pub fn poles(&self) -> Vec<Pole> {
        polynomial_roots(&self.q)
            .into_iter()
            .map(|t| {
                let res_t = horner(&self.p, t) / horner_derivative(&self.q, t);
                Pole {
                    position: C::new(self.center, 0.0) + t * self.scale,
                    residue: res_t * self.scale,
                }
            })
            .collect()
    }

    /// Residue relative to the pole's distance from the real axis and the data
    /// magnitude; spurious pole-zero doublets give values near zero.
    pub fn pole_strength(&self, pole: &Pole, data_scale: f64) -> f64 {
        pole.residue.norm() / (pole.position.im.abs().max(f64::MIN_POSITIVE) * data_scale.max(f64::MIN_POSITIVE))
    }
}
