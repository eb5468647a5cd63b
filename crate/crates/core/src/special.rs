//! Bessel functions of the first kind for integer order.

/// J_0(x), …, J_{kmax}(x) by Miller's backward recurrence normalized with
/// J_0 + 2Σ J_{2k} = 1.
pub fn bessel_j_sequence(x: f64, kmax: usize) -> Vec<f64> {
    if x == 0.0 {
        let mut out = vec![0.0; kmax + 1];
        out[0] = 1.0;
        return out;
    }
    if x < 0.0 {
        let mut out = bessel_j_sequence(-x, kmax);
        for (k, v) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
        return out;
    }
    let start = {
        let base = (kmax as f64).max(x);
        let n = base + 40.0 + (40.0 * base).sqrt();
        let n = n as usize;
        n + (n % 2)
    };
    let mut vals = vec![0.0; start + 2];
    vals[start + 1] = 0.0;
    vals[start] = 1e-300;
    let mut k = start;
    while k > 0 {
        let jm1 = 2.0 * k as f64 / x * vals[k] - vals[k + 1];
        vals[k - 1] = jm1;
        if jm1.abs() > 1e250 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
        k -= 1;
    }
    let mut norm = vals[0];
    let mut m = 2;
    while m <= start {
        norm += 2.0 * vals[m];
        m += 2;
    }
    vals.truncate(kmax + 1);
    if vals.len() < kmax + 1 {
        vals.resize(kmax + 1, 0.0);
    }
    for v in &mut vals {
        *v /= norm;
    }
    vals
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Power series, adequate for small x.
    fn series(k: usize, x: f64) -> f64 {
        let mut term = (x / 2.0).powi(k as i32);
        for i in 1..=k {
            term /= i as f64;
        }
        let mut s = term;
        for m in 1..80 {
            term *= -(x * x / 4.0) / (m as f64 * (m + k) as f64);
            s += term;
        }
        s
    }

    #[test]
    fn matches_series() {
        for &x in &[0.3, 1.0, 2.5, 7.0] {
            let j = bessel_j_sequence(x, 12);
            for k in 0..=12 {
                assert!((j[k] - series(k, x)).abs() < 1e-13, "k={k} x={x}");
            }
        }
    }

    #[test]
    fn known_values() {
        let j = bessel_j_sequence(10.0, 3);
        assert!((j[0] - (-0.245_935_764_451_348_3)).abs() < 1e-14);
        assert!((j[1] - 0.043_472_746_168_861_44).abs() < 1e-14);
        let j = bessel_j_sequence(50.0, 60);
        assert!((j[0] - 0.055_812_327_669_251_86).abs() < 1e-13);
    }

    #[test]
    fn sum_rule_large_argument() {
        let x = 120.0;
        let j = bessel_j_sequence(x, 400);
        let s: f64 = j[0] * j[0] + 2.0 * j[1..].iter().map(|v| v * v).sum::<f64>();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
