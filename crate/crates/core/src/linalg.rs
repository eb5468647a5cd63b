//! Complex linear solvers used by the window projection: pivoted tridiagonal
//! and banded LU, and restarted GMRES.

use num_complex::Complex64;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

fn norm2(x: &[C]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Solve (T − z)x = b for a real symmetric tridiagonal T given by its
/// diagonal `d` and off-diagonal `e`, with row interchanges. Returns `None`
/// for an exactly singular system.
pub fn solve_shifted_tridiagonal(d: &[f64], e: &[f64], z: C, b: &[C]) -> Option<Vec<C>> {
    let n = d.len();
    assert_eq!(b.len(), n);
    assert_eq!(e.len() + 1, n.max(1));
    if n == 0 {
        return Some(Vec::new());
    }
    // lower / diagonal / upper / second upper, as in LAPACK's gtsv
    let mut dl: Vec<C> = e.iter().map(|&v| C::new(v, 0.0)).collect();
    let mut dd: Vec<C> = d.iter().map(|&v| C::new(v, 0.0) - z).collect();
    let mut du: Vec<C> = e.iter().map(|&v| C::new(v, 0.0)).collect();
    let mut du2 = vec![ZERO; n.saturating_sub(2)];
    let mut x = b.to_vec();
    for i in 0..n - 1 {
        if dd[i].norm_sqr() >= dl[i].norm_sqr() {
            if dd[i] == ZERO {
                return None;
            }
            let f = dl[i] / dd[i];
            dd[i + 1] -= f * du[i];
            x[i + 1] = x[i + 1] - f * x[i];
            if i + 2 < n {
                du2[i] = ZERO;
            }
        } else {
            let f = dd[i] / dl[i];
            dd[i] = dl[i];
            let tmp = dd[i + 1];
            dd[i + 1] = du[i] - f * tmp;
            du[i] = tmp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du2[i];
            }
            let xi = x[i];
            x[i] = x[i + 1];
            x[i + 1] = xi - f * x[i + 1];
        }
        dl[i] = ZERO;
    }
    if dd[n - 1] == ZERO {
        return None;
    }
    x[n - 1] /= dd[n - 1];
    if n > 1 {
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / dd[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / dd[i];
    }
    Some(x)
}

/// ‖(T − z)x − b‖ / ‖b‖.
pub fn tridiagonal_residual(d: &[f64], e: &[f64], z: C, x: &[C], b: &[C]) -> f64 {
    let n = d.len();
    let mut r2 = 0.0;
    for i in 0..n {
        let mut y = (C::new(d[i], 0.0) - z) * x[i];
        if i > 0 {
            y += x[i - 1] * e[i - 1];
        }
        if i + 1 < n {
            y += x[i + 1] * e[i];
        }
        r2 += (y - b[i]).norm_sqr();
    }
    r2.sqrt() / norm2(b).max(f64::MIN_POSITIVE)
}

/// LU factorization with partial pivoting of a complex band matrix with
/// `kl` sub- and super-diagonals (the factor U has `2kl` super-diagonals).
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    width: usize,
    /// Row i holds columns i − kl ..= i + 2kl.
    rows: Vec<C>,
    piv: Vec<usize>,
}

impl BandedLu {
    /// Factor the n×n matrix whose entry (i, j), |i − j| ≤ kl, is `entry(i, j)`.
    pub fn factor(n: usize, kl: usize, entry: impl Fn(usize, usize) -> C) -> Option<Self> {
        let width = 3 * kl + 1;
        let mut rows = vec![ZERO; n * width];
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + kl).min(n - 1);
            for j in lo..=hi {
                rows[i * width + (j + kl - i)] = entry(i, j);
            }
        }
        let mut lu = Self {
            n,
            kl,
            width,
            rows,
            piv: vec![0; n],
        };
        lu.eliminate()?;
        Some(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn eliminate(&mut self) -> Option<()> {
        let (n, kl) = (self.n, self.kl);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.rows[self.idx(k, k)].norm_sqr();
            for i in k + 1..=last_row {
                let v = self.rows[self.idx(i, k)].norm_sqr();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return None;
            }
            self.piv[k] = p;
            let last_col = (k + 2 * kl).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.rows.swap(a, b);
                }
            }
            let pivot = self.rows[self.idx(k, k)];
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let f = self.rows[ik] / pivot;
                self.rows[ik] = f;
                if f == ZERO {
                    continue;
                }
                for j in k + 1..=last_col {
                    let kj = self.rows[self.idx(k, j)];
                    let ij = self.idx(i, j);
                    self.rows[ij] -= f * kj;
                }
            }
        }
        Some(())
    }

    /// Overwrite `b` with the solution.
    pub fn solve_in_place(&self, b: &mut [C]) {
        let (n, kl) = (self.n, self.kl);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk == ZERO {
                continue;
            }
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.rows[self.idx(i, k)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + 2 * kl).min(n - 1) {
                s -= self.rows[self.idx(k, j)] * b[j];
            }
            b[k] = s / self.rows[self.idx(k, k)];
        }
    }
}

/// Outcome of [`gmres`].
#[derive(Debug, Clone, Copy)]
pub struct GmresInfo {
    pub iterations: usize,
    /// Final ‖b − Ax‖/‖b‖ computed explicitly.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Right-preconditioned restarted GMRES for A x = b from x = 0.
/// `apply(x, y)` sets y = A x; `precond(v)` overwrites v with M⁻¹ v.
pub fn gmres(
    n: usize,
    mut apply: impl FnMut(&[C], &mut [C]),
    mut precond: impl FnMut(&mut [C]),
    b: &[C],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> (Vec<C>, GmresInfo) {
    let bnorm = norm2(b);
    let mut x = vec![ZERO; n];
    if bnorm == 0.0 {
        return (
            x,
            GmresInfo {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        );
    }
    let m = restart.max(1);
    let mut total = 0;
    let mut r = b.to_vec();
    let mut tmp = vec![ZERO; n];
    let mut w = vec![ZERO; n];
    loop {
        let beta = norm2(&r);
        if beta <= tol * bnorm || total >= max_iter {
            break;
        }
        let mut v: Vec<Vec<C>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|c| c / beta).collect());
        let mut h = vec![vec![ZERO; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![ZERO; m];
        let mut g = vec![ZERO; m + 1];
        g[0] = C::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            tmp.copy_from_slice(&v[k]);
            precond(&mut tmp);
            apply(&tmp, &mut w);
            for (i, vi) in v.iter().enumerate() {
                let hik: C = vi.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= hik * vj;
                }
            }
            let hn = norm2(&w);
            h[k + 1][k] = C::new(hn, 0.0);
            for i in 0..k {
                let t = h[i][k];
                let u = h[i + 1][k];
                h[i][k] = t * cs[i] + sn[i] * u;
                h[i + 1][k] = -sn[i].conj() * t + u * cs[i];
            }
            let (c, s, rr) = givens(h[k][k], h[k + 1][k]);
            cs[k] = c;
            sn[k] = s;
            h[k][k] = rr;
            h[k + 1][k] = ZERO;
            g[k + 1] = -s.conj() * g[k];
            g[k] *= c;
            total += 1;
            k_used = k + 1;
            let res = g[k + 1].norm();
            if res <= tol * bnorm || hn == 0.0 || total >= max_iter {
                break;
            }
            v.push(w.iter().map(|c| c / hn).collect());
        }
        let mut y = vec![ZERO; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        tmp.fill(ZERO);
        for (j, yj) in y.iter().enumerate() {
            for (t, vj) in tmp.iter_mut().zip(&v[j]) {
                *t += yj * vj;
            }
        }
        precond(&mut tmp);
        for (xi, t) in x.iter_mut().zip(&tmp) {
            *xi += t;
        }
        apply(&x, &mut w);
        for ((ri, bi), wi) in r.iter_mut().zip(b).zip(&w) {
            *ri = bi - wi;
        }
    }
    let rel = norm2(&r) / bnorm;
    (
        x,
        GmresInfo {
            iterations: total,
            relative_residual: rel,
            converged: rel <= tol,
        },
    )
}

/// Complex Givens rotation zeroing `b` against `a`.
fn givens(a: C, b: C) -> (f64, C, C) {
    if b == ZERO {
        return (1.0, ZERO, a);
    }
    if a == ZERO {
        return (0.0, C::new(1.0, 0.0) * (b.conj() / b.norm()), C::new(b.norm(), 0.0));
    }
    let an = a.norm();
    let nrm = (an * an + b.norm_sqr()).sqrt();
    let c = an / nrm;
    let alpha = a / an;
    let s = alpha * b.conj() / nrm;
    (c, s, alpha * nrm)
}
