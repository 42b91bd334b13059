//! Dense matrices over `Rat`, used for linear maps between
//! finite-dimensional `Q`-vector spaces.
//!
//! Composition convention: matrices act on column vectors, so `a.mul(&b)`
//! is "apply `b`, then `a`". Tensor products use row-major (left factor
//! major) basis ordering, matching the rest of the crate.

use std::fmt;

use num_traits::{One, Zero};

use crate::rat::{render_rat, Rat};

#[derive(Clone, PartialEq, Eq)]
pub struct QMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rat>,
}

impl QMatrix {
    pub fn zeros(rows: usize, cols: usize) -> QMatrix {
        QMatrix {
            rows,
            cols,
            data: vec![Rat::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> QMatrix {
        let mut m = QMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Rat::one());
        }
        m
    }

    /// Builds from row slices; all rows must have equal length.
    pub fn from_rows(rows: Vec<Vec<Rat>>) -> QMatrix {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        QMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_int_rows(rows: &[&[i64]]) -> QMatrix {
        QMatrix::from_rows(
            rows.iter()
                .map(|row| row.iter().map(|&n| crate::rat::rat_int(n)).collect())
                .collect(),
        )
    }

    /// Column vector (n x 1) from a slice.
    pub fn column(v: &[Rat]) -> QMatrix {
        QMatrix {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Rat {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rat) {
        self.data[i * self.cols + j] = v;
    }

    pub fn col(&self, j: usize) -> Vec<Rat> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn mul(&self, rhs: &QMatrix) -> QMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        let mut out = QMatrix::zeros(self.rows, rhs.cols);
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
                    let cur = out.get(i, j) + &(a * b);
                    out.set(i, j, cur);
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &QMatrix) -> QMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        QMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(rhs.data.iter())
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, rhs: &QMatrix) -> QMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        QMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(rhs.data.iter())
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, c: &Rat) -> QMatrix {
        QMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * c).collect(),
        }
    }

    pub fn pow(&self, k: usize) -> QMatrix {
        assert_eq!(self.rows, self.cols, "power of non-square matrix");
        let mut acc = QMatrix::identity(self.rows);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Kronecker product; basis ordering is left factor major, so
    /// `kron(a, b)` represents `a (x) b` on `e_i (x) f_j |-> index i*dim_f + j`.
    pub fn kron(&self, rhs: &QMatrix) -> QMatrix {
        let mut out = QMatrix::zeros(self.rows * rhs.rows, self.cols * rhs.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                if a.is_zero() {
                    continue;
                }
                for k in 0..rhs.rows {
                    for l in 0..rhs.cols {
                        let b = rhs.get(k, l);
                        if b.is_zero() {
                            continue;
                        }
                        out.set(i * rhs.rows + k, j * rhs.cols + l, a * b);
                    }
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[Rat]) -> Vec<Rat> {
        assert_eq!(self.cols, v.len(), "matrix apply shape mismatch");
        (0..self.rows)
            .map(|i| {
                let mut acc = Rat::zero();
                for j in 0..self.cols {
                    let a = self.get(i, j);
                    if !a.is_zero() && !v[j].is_zero() {
                        acc += a * &v[j];
                    }
                }
                acc
            })
            .collect()
    }

    pub fn transpose(&self) -> QMatrix {
        let mut out = QMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).clone());
            }
        }
        out
    }

    pub fn is_identity(&self) -> bool {
        self == &QMatrix::identity(self.rows) && self.rows == self.cols
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Rat::is_zero)
    }

    /// First column index where the two matrices differ, if any.
    /// Columns are compared left to right; shapes must match.
    pub fn first_differing_column(&self, rhs: &QMatrix) -> Option<usize> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        (0..self.cols).find(|&j| (0..self.rows).any(|i| self.get(i, j) != rhs.get(i, j)))
    }
}

impl fmt::Debug for QMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "QMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| render_rat(self.get(i, j))).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_mixed_product_property() {
        let a = QMatrix::from_int_rows(&[&[1, 2], &[3, 4]]);
        let b = QMatrix::from_int_rows(&[&[0, 1], &[1, 0]]);
        let c = QMatrix::from_int_rows(&[&[2, 0], &[0, 2]]);
        let d = QMatrix::from_int_rows(&[&[1, 1], &[0, 1]]);
        // (a (x) b)(c (x) d) = ac (x) bd
        let lhs = a.kron(&b).mul(&c.kron(&d));
        let rhs = a.mul(&c).kron(&b.mul(&d));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn apply_matches_mul() {
        let a = QMatrix::from_int_rows(&[&[1, 2, 0], &[0, 1, -1]]);
        let v = vec![
            crate::rat::rat_int(3),
            crate::rat::rat_int(1),
            crate::rat::rat_int(2),
        ];
        assert_eq!(a.apply(&v), vec![crate::rat::rat_int(5), crate::rat::rat_int(-1)]);
    }
}
