//! Tridiagonal and banded solvers.

use alloc::vec::Vec;

/// Factored symmetric tridiagonal matrix (no pivoting; the caller guarantees
/// diagonal dominance or definiteness).
#[derive(Debug, Clone)]
pub struct Tridiag {
    off: Vec<f64>,
    inv_piv: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiag {
    /// `diag` has length n, `off` length n−1 (symmetric coupling).
    pub fn factor(diag: &[f64], off: &[f64]) -> Self {
        let n = diag.len();
        let mut inv_piv = alloc::vec![0.0; n];
        let mut upper = alloc::vec![0.0; n.saturating_sub(1)];
        let mut p = diag[0];
        inv_piv[0] = 1.0 / p;
        for i in 1..n {
            upper[i - 1] = off[i - 1] * inv_piv[i - 1];
            p = diag[i] - off[i - 1] * upper[i - 1];
            inv_piv[i] = 1.0 / p;
        }
        Tridiag { off: off.to_vec(), inv_piv, upper }
    }

    pub fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let n = rhs.len();
        out[0] = rhs[0] * self.inv_piv[0];
        for i in 1..n {
            out[i] = (rhs[i] - self.off[i - 1] * out[i - 1]) * self.inv_piv[i];
        }
        for i in (0..n - 1).rev() {
            out[i] -= self.upper[i] * out[i + 1];
        }
    }
}

/// LU factorization with partial pivoting of a band matrix with `kl` sub- and
/// `ku` super-diagonals.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandLu { n, kl, ku, width, a: alloc::vec![0.0; n * width], piv: alloc::vec![0; n] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    /// Adds `x` to entry (i, j); |i − j| must lie inside the declared band.
    pub fn add(&mut self, i: usize, j: usize, x: f64) {
        debug_assert!(j + self.kl >= i && j <= i + self.ku);
        let k = self.idx(i, j);
        self.a[k] += x;
    }

    /// In-place factorization. Returns false on an exactly zero pivot.
    pub fn factor(&mut self) -> bool {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + ku + kl).min(n - 1);
            let mut p = k;
            let mut best = self.a[self.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.a[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            self.piv[k] = p;
            if best == 0.0 {
                return false;
            }
            if p != k {
                for j in k..=last_col {
                    let (x, y) = (self.idx(k, j), self.idx(p, j));
                    self.a.swap(x, y);
                }
            }
            let inv = 1.0 / self.a[self.idx(k, k)];
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let l = self.a[ik] * inv;
                self.a[ik] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let kj = self.a[self.idx(k, j)];
                        let ij = self.idx(i, j);
                        self.a[ij] -= l * kj;
                    }
                }
            }
        }
        true
    }

    pub fn solve(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.a[self.idx(i, k)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + ku + kl).min(n - 1) {
                s -= self.a[self.idx(k, j)] * b[j];
            }
            b[k] = s / self.a[self.idx(k, k)];
        }
    }
}
