//! Dense matrices over `Q[x]`.
//!
//! These carry relation matrices of presented modules and the unimodular
//! change-of-basis factors produced by Smith normal form. The determinant
//! uses fraction-free (Bareiss) elimination, which stays inside `Q[x]`
//! because every division it performs is exact.

use std::fmt;

use crate::poly::Poly;
use crate::rat::Rat;

#[derive(Clone, PartialEq, Eq)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Poly>,
}

impl PolyMatrix {
    pub fn zeros(rows: usize, cols: usize) -> PolyMatrix {
        PolyMatrix {
            rows,
            cols,
            data: vec![Poly::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> PolyMatrix {
        let mut m = PolyMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Poly::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Poly>>) -> PolyMatrix {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        PolyMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    /// An `0 x cols` matrix (a presentation with no relations).
    pub fn empty(cols: usize) -> PolyMatrix {
        PolyMatrix {
            rows: 0,
            cols,
            data: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Poly {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Poly) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Poly] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul(&self, rhs: &PolyMatrix) -> PolyMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        let mut out = PolyMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = rhs.get(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let cur = &(out.get(i, j).clone()) + &(a * b);
                    out.set(i, j, cur);
                }
            }
        }
        out
    }

    /// Stacks `other` below `self`; column counts must agree.
    pub fn vstack(&self, other: &PolyMatrix) -> PolyMatrix {
        assert_eq!(self.cols, other.cols, "vstack column mismatch");
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        PolyMatrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row[dst] += q * row[src]
    pub fn add_row_multiple(&mut self, dst: usize, src: usize, q: &Poly) {
        if q.is_zero() {
            return;
        }
        for j in 0..self.cols {
            let v = &(self.get(dst, j).clone()) + &(q * self.get(src, j));
            self.set(dst, j, v);
        }
    }

    /// col[dst] += q * col[src]
    pub fn add_col_multiple(&mut self, dst: usize, src: usize, q: &Poly) {
        if q.is_zero() {
            return;
        }
        for i in 0..self.rows {
            let v = &(self.get(i, dst).clone()) + &(q * self.get(i, src));
            self.set(i, dst, v);
        }
    }

    pub fn scale_row(&mut self, i: usize, c: &Rat) {
        for j in 0..self.cols {
            let v = self.get(i, j).scaled(c);
            self.set(i, j, v);
        }
    }

    pub fn scale_col(&mut self, j: usize, c: &Rat) {
        for i in 0..self.rows {
            let v = self.get(i, j).scaled(c);
            self.set(i, j, v);
        }
    }

    /// Determinant by fraction-free elimination. Square matrices only.
    pub fn det(&self) -> Poly {
        assert_eq!(self.rows, self.cols, "determinant of non-square matrix");
        let n = self.rows;
        if n == 0 {
            return Poly::one();
        }
        let mut m = self.clone();
        let mut sign_negative = false;
        let mut prev = Poly::one();
        for t in 0..n - 1 {
            if m.get(t, t).is_zero() {
                match (t + 1..n).find(|&i| !m.get(i, t).is_zero()) {
                    Some(i) => {
                        m.swap_rows(t, i);
                        sign_negative = !sign_negative;
                    }
                    None => return Poly::zero(),
                }
            }
            for i in t + 1..n {
                for j in t + 1..n {
                    let v = &(m.get(t, t) * m.get(i, j)) - &(m.get(i, t) * m.get(t, j));
                    m.set(i, j, v.exact_div(&prev));
                }
                m.set(i, t, Poly::zero());
            }
            prev = m.get(t, t).clone();
        }
        let d = m.get(n - 1, n - 1).clone();
        if sign_negative {
            -&d
        } else {
            d
        }
    }

    /// Row vector times matrix: `v * m` with `len(v) == m.rows`.
    pub fn row_vec_mul(v: &[Poly], m: &PolyMatrix) -> Vec<Poly> {
        assert_eq!(v.len(), m.rows, "row vector length mismatch");
        (0..m.cols)
            .map(|j| {
                let mut acc = Poly::zero();
                for (i, vi) in v.iter().enumerate() {
                    if !vi.is_zero() && !m.get(i, j).is_zero() {
                        acc = &acc + &(vi * m.get(i, j));
                    }
                }
                acc
            })
            .collect()
    }
}

impl fmt::Debug for PolyMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "PolyMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self.get(i, j).to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}
