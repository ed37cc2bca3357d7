//! Monotone piecewise cubic Hermite interpolation (Fritsch–Butland slopes).

use alloc::vec::Vec;

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) struct Pchip<'a> {
    x: &'a [f64],
    y: &'a [f64],
    d: Vec<f64>,
}

impl<'a> Pchip<'a> {
    pub fn new(x: &'a [f64], y: &'a [f64]) -> Self {
        let n = x.len();
        debug_assert!(n >= 3 && y.len() == n);
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let m: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = alloc::vec![0.0; n];
        for k in 1..n - 1 {
            if m[k - 1] * m[k] > 0.0 {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                d[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
            }
        }
        d[0] = end_slope(h[0], h[1], m[0], m[1]);
        d[n - 1] = end_slope(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
        Pchip { x, y, d }
    }

    fn eval_in(&self, i: usize, t: f64) -> f64 {
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let h = x1 - x0;
        let s = (t - x0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }

    /// Evaluates at nondecreasing query points; queries outside the node range give 0.
    pub fn eval_sorted(&self, q: &[f64], out: &mut [f64]) {
        let n = self.x.len();
        let (lo, hi) = (self.x[0], self.x[n - 1]);
        let mut i = 0usize;
        for (o, &t) in out.iter_mut().zip(q) {
            if !(t >= lo && t <= hi) {
                *o = 0.0;
                continue;
            }
            while i + 2 < n && self.x[i + 1] < t {
                i += 1;
            }
            while i > 0 && self.x[i] > t {
                i -= 1;
            }
            *o = self.eval_in(i, t);
        }
    }
}

fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if sign(d) != sign(m0) {
        0.0
    } else if sign(m0) != sign(m1) && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes_and_cubics_locally() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 / 49.0).powi(2)).collect();
        let y: Vec<f64> = x.iter().map(|&t| (1.0 - t).powi(3)).collect();
        let p = Pchip::new(&x, &y);
        let mut out = alloc::vec![0.0; x.len()];
        p.eval_sorted(&x, &mut out);
        for (a, b) in out.iter().zip(&y) {
            assert!((a - b).abs() < 1e-15);
        }
        let q: Vec<f64> = (0..1000).map(|i| i as f64 / 999.0).collect();
        let mut o = alloc::vec![0.0; q.len()];
        p.eval_sorted(&q, &mut o);
        for (t, v) in q.iter().zip(&o) {
            assert!((v - (1.0 - t).powi(3)).abs() < 2e-4);
        }
    }

    #[test]
    fn preserves_monotonicity_and_zero_extension() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 1.0, 0.2, 0.1, 0.0];
        let p = Pchip::new(&x, &y);
        let q: Vec<f64> = (0..=500).map(|i| i as f64 * 0.01).collect();
        let mut o = alloc::vec![0.0; q.len()];
        p.eval_sorted(&q, &mut o);
        for w in o.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        assert_eq!(o[500], 0.0);
        let mut tail = [1.0];
        p.eval_sorted(&[4.5], &mut tail);
        assert_eq!(tail[0], 0.0);
    }
}
