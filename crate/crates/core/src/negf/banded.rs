//! Pivoted LU for general complex band matrices.
//!
//! Row `r` stores columns `r - kl ..= r + ku + kl`; the extra `kl` columns on
//! the right absorb the fill produced by row interchanges.

use num_complex::Complex64;

use super::NegfError;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![ZERO; n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        r * self.width + (c + self.kl - r)
    }

    fn in_band(&self, r: usize, c: usize) -> bool {
        r < self.n && c < self.n && c + self.kl >= r && c <= r + self.ku
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        if self.in_band(r, c) {
            self.data[self.slot(r, c)]
        } else {
            ZERO
        }
    }

    /// Panics if `(r, c)` lies outside the declared band.
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        assert!(self.in_band(r, c), "entry ({r}, {c}) outside band");
        let s = self.slot(r, c);
        self.data[s] = v;
    }

    pub fn add(&mut self, r: usize, c: usize, v: Complex64) {
        assert!(self.in_band(r, c), "entry ({r}, {c}) outside band");
        let s = self.slot(r, c);
        self.data[s] += v;
    }

    pub fn factor(mut self) -> Result<BandedLu, NegfError> {
        let (n, kl, ku, width) = (self.n, self.kl, self.ku, self.width);
        let scale = self
            .data
            .iter()
            .map(|v| v.norm())
            .fold(0.0_f64, f64::max);
        let tiny = scale * f64::EPSILON * 1e-3;
        let mut pivots = vec![0usize; n];

        for r in 0..n {
            let last_row = (r + kl).min(n - 1);
            let col_end = (r + ku + kl).min(n - 1);

            let mut p = r;
            let mut best = self.data[self.slot(r, r)].norm();
            for q in r + 1..=last_row {
                let v = self.data[self.slot(q, r)].norm();
                if v > best {
                    best = v;
                    p = q;
                }
            }
            if !(best > tiny) {
                return Err(NegfError::Singular { pivot: r });
            }
            pivots[r] = p;
            if p != r {
                for c in r..=col_end {
                    let (a, b) = (self.slot(r, c), self.slot(p, c));
                    self.data.swap(a, b);
                }
            }

            let inv = self.data[self.slot(r, r)].inv();
            let len = col_end - r;
            for q in r + 1..=last_row {
                let lq = self.slot(q, r);
                let l = self.data[lq] * inv;
                self.data[lq] = l;
                if l == ZERO || len == 0 {
                    continue;
                }
                // row r lives entirely before row q in storage
                let (head, tail) = self.data.split_at_mut(q * width);
                let pivot_row = &head[r * width + kl + 1..r * width + kl + 1 + len];
                let start = r + 1 + kl - q;
                let target = &mut tail[start..start + len];
                for (t, &u) in target.iter_mut().zip(pivot_row) {
                    *t -= l * u;
                }
            }
        }

        Ok(BandedLu {
            n,
            kl,
            ku,
            width,
            data: self.data,
            pivots,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<Complex64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Overwrites `b` with the solution of `A x = b`.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        self.solve_from(b, 0);
    }

    /// As [`solve_in_place`](Self::solve_in_place), but `b[..first_nonzero]`
    /// must be zero; the forward sweep skips the rows it cannot reach.
    pub fn solve_from(&self, b: &mut [Complex64], first_nonzero: usize) {
        let (n, kl, ku, width) = (self.n, self.kl, self.ku, self.width);
        assert_eq!(b.len(), n, "right-hand side length mismatch");
        let start = first_nonzero.saturating_sub(kl);
        for r in start..n {
            let p = self.pivots[r];
            if p != r {
                b.swap(r, p);
            }
            let br = b[r];
            if br == ZERO {
                continue;
            }
            for q in r + 1..=(r + kl).min(n - 1) {
                b[q] -= self.data[q * width + (r + kl - q)] * br;
            }
        }
        for r in (0..n).rev() {
            let col_end = (r + ku + kl).min(n - 1);
            let row = &self.data[r * width + kl..r * width + kl + 1 + (col_end - r)];
            let mut s = b[r];
            for (u, x) in row[1..].iter().zip(&b[r + 1..=col_end]) {
                s -= u * x;
            }
            b[r] = s / row[0];
        }
    }
}
