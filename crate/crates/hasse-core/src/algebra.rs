//! Finite-dimensional associative unital `Q`-algebras given by structure
//! constants.
//!
//! `table[(i, j, k)]` is the coefficient of basis vector `e_k` in the
//! product `e_i * e_j`. Associativity and the unit laws are verified
//! exhaustively on basis triples at construction; a failed law is a
//! constructor error, so every live value is a genuine algebra.

use num_traits::{One, Zero};

use crate::error::CoreError;
use crate::poly::Poly;
use crate::qmat::QMatrix;
use crate::rat::{render_rat_vec, Rat};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinAlgebra {
    dim: usize,
    /// Flat `dim^3` table, index `(i * dim + j) * dim + k`.
    table: Vec<Rat>,
    unit: Vec<Rat>,
}

impl FinAlgebra {
    pub fn new(dim: usize, table: Vec<Rat>, unit: Vec<Rat>) -> Result<Self, CoreError> {
        if dim == 0 {
            return Err(CoreError::InvalidArgument("algebra dimension 0".into()));
        }
        if table.len() != dim * dim * dim {
            return Err(CoreError::Dimension(format!(
                "structure table has {} entries, expected {}",
                table.len(),
                dim * dim * dim
            )));
        }
        if unit.len() != dim {
            return Err(CoreError::Dimension(format!(
                "unit vector has {} entries, expected {}",
                unit.len(),
                dim
            )));
        }
        let alg = FinAlgebra { dim, table, unit };
        alg.check_laws()?;
        Ok(alg)
    }

    /// Skips the construction-time law check. Only for negative tests of
    /// downstream validators, which must detect the broken laws themselves.
    pub fn from_flat_unchecked(dim: usize, table: Vec<Rat>, unit: Vec<Rat>) -> FinAlgebra {
        assert_eq!(table.len(), dim * dim * dim);
        assert_eq!(unit.len(), dim);
        FinAlgebra { dim, table, unit }
    }

    /// Builds from a nested table `t[i][j]` = product row of `e_i * e_j`.
    pub fn from_nested(table: Vec<Vec<Vec<Rat>>>, unit: Vec<Rat>) -> Result<Self, CoreError> {
        let dim = table.len();
        let mut flat = Vec::with_capacity(dim * dim * dim);
        for row in &table {
            if row.len() != dim {
                return Err(CoreError::Dimension("ragged structure table".into()));
            }
            for cell in row {
                if cell.len() != dim {
                    return Err(CoreError::Dimension("ragged structure table".into()));
                }
                flat.extend(cell.iter().cloned());
            }
        }
        FinAlgebra::new(dim, flat, unit)
    }

    /// The full matrix algebra `M_n(Q)` with basis `E_{ab}` ordered
    /// row-major (`E_11, E_12, ..., E_nn`).
    pub fn matrix_algebra(n: usize) -> FinAlgebra {
        let dim = n * n;
        let mut table = vec![Rat::zero(); dim * dim * dim];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        // E_ab * E_cd = delta_bc E_ad
                        if b == c {
                            let i = a * n + b;
                            let j = c * n + d;
                            let k = a * n + d;
                            table[(i * dim + j) * dim + k] = Rat::one();
                        }
                    }
                }
            }
        }
        let mut unit = vec![Rat::zero(); dim];
        for a in 0..n {
            unit[a * n + a] = Rat::one();
        }
        FinAlgebra::new(dim, table, unit).expect("matrix algebra laws")
    }

    /// The quotient `Q[x]/(p)` for monic `p` of degree >= 1, with basis
    /// `1, x, ..., x^{deg-1}`.
    pub fn poly_quotient(p: &Poly) -> Result<FinAlgebra, CoreError> {
        let deg = p.degree().ok_or_else(|| {
            CoreError::InvalidArgument("quotient by the zero polynomial".into())
        })?;
        if deg == 0 {
            return Err(CoreError::InvalidArgument(
                "quotient by a unit gives the zero ring".into(),
            ));
        }
        if !p.leading().unwrap().is_one() {
            return Err(CoreError::InvalidArgument(format!(
                "quotient modulus must be monic, got {p}"
            )));
        }
        let dim = deg;
        let mut table = vec![Rat::zero(); dim * dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let prod = Poly::monomial(Rat::one(), i + j).div_rem(p).1;
                for k in 0..dim {
                    table[(i * dim + j) * dim + k] = prod.coeff(k);
                }
            }
        }
        let mut unit = vec![Rat::zero(); dim];
        unit[0] = Rat::one();
        FinAlgebra::new(dim, table, unit)
    }

    fn check_laws(&self) -> Result<(), CoreError> {
        let d = self.dim;
        let basis: Vec<Vec<Rat>> = (0..d).map(|i| self.basis_vec(i)).collect();
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let lhs = self.mul(&self.mul(&basis[i], &basis[j]), &basis[k]);
                    let rhs = self.mul(&basis[i], &self.mul(&basis[j], &basis[k]));
                    if lhs != rhs {
                        return Err(CoreError::AlgebraLaw(format!(
                            "associativity fails on (e{}, e{}, e{}): {} vs {}",
                            i + 1,
                            j + 1,
                            k + 1,
                            render_rat_vec(&lhs),
                            render_rat_vec(&rhs)
                        )));
                    }
                }
            }
        }
        for i in 0..d {
            if self.mul(&self.unit, &basis[i]) != basis[i]
                || self.mul(&basis[i], &self.unit) != basis[i]
            {
                return Err(CoreError::AlgebraLaw(format!("unit law fails on e{}", i + 1)));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn unit(&self) -> &[Rat] {
        &self.unit
    }

    pub fn basis_vec(&self, i: usize) -> Vec<Rat> {
        let mut v = vec![Rat::zero(); self.dim];
        v[i] = Rat::one();
        v
    }

    pub fn zero_vec(&self) -> Vec<Rat> {
        vec![Rat::zero(); self.dim]
    }

    pub fn basis_product(&self, i: usize, j: usize) -> Vec<Rat> {
        (0..self.dim)
            .map(|k| self.table[(i * self.dim + j) * self.dim + k].clone())
            .collect()
    }

    pub fn mul(&self, a: &[Rat], b: &[Rat]) -> Vec<Rat> {
        assert_eq!(a.len(), self.dim);
        assert_eq!(b.len(), self.dim);
        let mut out = vec![Rat::zero(); self.dim];
        for i in 0..self.dim {
            if a[i].is_zero() {
                continue;
            }
            for j in 0..self.dim {
                if b[j].is_zero() {
                    continue;
                }
                let scale = &a[i] * &b[j];
                for k in 0..self.dim {
                    let t = &self.table[(i * self.dim + j) * self.dim + k];
                    if !t.is_zero() {
                        out[k] += &scale * t;
                    }
                }
            }
        }
        out
    }

    pub fn power(&self, a: &[Rat], k: usize) -> Vec<Rat> {
        let mut acc = self.unit.clone();
        for _ in 0..k {
            acc = self.mul(&acc, a);
        }
        acc
    }

    pub fn commutator(&self, a: &[Rat], b: &[Rat]) -> Vec<Rat> {
        let ab = self.mul(a, b);
        let ba = self.mul(b, a);
        ab.iter().zip(&ba).map(|(x, y)| x - y).collect()
    }

    /// Matrix of left multiplication by `a`.
    pub fn left_mul_matrix(&self, a: &[Rat]) -> QMatrix {
        let cols: Vec<Vec<Rat>> = (0..self.dim)
            .map(|j| self.mul(a, &self.basis_vec(j)))
            .collect();
        columns_to_matrix(self.dim, cols)
    }

    /// Matrix of right multiplication by `a`.
    pub fn right_mul_matrix(&self, a: &[Rat]) -> QMatrix {
        let cols: Vec<Vec<Rat>> = (0..self.dim)
            .map(|j| self.mul(&self.basis_vec(j), a))
            .collect();
        columns_to_matrix(self.dim, cols)
    }

    /// Multiplication as a linear map `A (x) A -> A` (`dim x dim^2`),
    /// tensor basis ordered left factor major.
    pub fn mult_matrix(&self) -> QMatrix {
        let d = self.dim;
        let mut m = QMatrix::zeros(d, d * d);
        for i in 0..d {
            for j in 0..d {
                let prod = self.basis_product(i, j);
                for k in 0..d {
                    if !prod[k].is_zero() {
                        m.set(k, i * d + j, prod[k].clone());
                    }
                }
            }
        }
        m
    }

    /// Unit embedding `Q -> A` as a `dim x 1` matrix.
    pub fn unit_matrix(&self) -> QMatrix {
        QMatrix::column(&self.unit)
    }

    /// Standard column module `Q^n` for the matrix algebra `M_n(Q)`:
    /// the action matrix of `A (x) Q^n -> Q^n`. Only valid when this
    /// algebra was built by [`FinAlgebra::matrix_algebra`].
    pub fn column_action(&self, n: usize) -> QMatrix {
        assert_eq!(self.dim, n * n, "column module needs a matrix algebra");
        let mut act = QMatrix::zeros(n, self.dim * n);
        for a in 0..n {
            for b in 0..n {
                let i = a * n + b; // E_ab
                for l in 0..n {
                    if l == b {
                        // E_ab e_l = e_a when l == b
                        act.set(a, i * n + l, Rat::one());
                    }
                }
            }
        }
        act
    }
}

fn columns_to_matrix(dim: usize, cols: Vec<Vec<Rat>>) -> QMatrix {
    let mut m = QMatrix::zeros(dim, cols.len());
    for (j, col) in cols.iter().enumerate() {
        for i in 0..dim {
            m.set(i, j, col[i].clone());
        }
    }
    m
}
