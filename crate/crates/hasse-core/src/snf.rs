//! Smith normal form over the Euclidean domain `Q[x]`.
//!
//! For an `r x c` matrix `a` the decomposition produces unimodular `u`
//! (`r x r`) and `v` (`c x c`) with `u * a * v = diag(d_1, ..., d_min)`,
//! where each nonzero `d_i` is monic and `d_i | d_{i+1}`. Inverses of both
//! factors are tracked alongside, so coordinate changes in either
//! direction cost a single multiplication.
//!
//! Pivot rule (fixed so results are reproducible): the candidate of
//! minimal degree among the remaining block, ties broken by lowest
//! `(row, col)` in row-major order.

use crate::poly::Poly;
use crate::polymat::PolyMatrix;
use crate::rat::Rat;
use num_traits::One;

#[derive(Clone, Debug)]
pub struct Snf {
    /// Diagonal entries, length `min(rows, cols)`; zeros trail nonzeros.
    pub diag: Vec<Poly>,
    pub u: PolyMatrix,
    pub u_inv: PolyMatrix,
    pub v: PolyMatrix,
    pub v_inv: PolyMatrix,
}

impl Snf {
    /// Number of nonzero diagonal entries.
    pub fn rank(&self) -> usize {
        self.diag.iter().filter(|d| !d.is_zero()).count()
    }

    /// `u * a * v` reassembled as a full matrix, for verification.
    pub fn diag_matrix(&self, rows: usize, cols: usize) -> PolyMatrix {
        let mut m = PolyMatrix::zeros(rows, cols);
        for (t, d) in self.diag.iter().enumerate() {
            m.set(t, t, d.clone());
        }
        m
    }
}

struct Work {
    s: PolyMatrix,
    u: PolyMatrix,
    u_inv: PolyMatrix,
    v: PolyMatrix,
    v_inv: PolyMatrix,
}

impl Work {
    fn swap_rows(&mut self, a: usize, b: usize) {
        self.s.swap_rows(a, b);
        self.u.swap_rows(a, b);
        self.u_inv.swap_cols(a, b);
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        self.s.swap_cols(a, b);
        self.v.swap_cols(a, b);
        self.v_inv.swap_rows(a, b);
    }

    /// row[dst] += q * row[src]
    fn add_row(&mut self, dst: usize, src: usize, q: &Poly) {
        self.s.add_row_multiple(dst, src, q);
        self.u.add_row_multiple(dst, src, q);
        self.u_inv.add_col_multiple(src, dst, &-q);
    }

    /// col[dst] += q * col[src]
    fn add_col(&mut self, dst: usize, src: usize, q: &Poly) {
        self.s.add_col_multiple(dst, src, q);
        self.v.add_col_multiple(dst, src, q);
        self.v_inv.add_row_multiple(src, dst, &-q);
    }

    fn scale_row(&mut self, i: usize, c: &Rat) {
        self.s.scale_row(i, c);
        self.u.scale_row(i, c);
        self.u_inv.scale_col(i, &(Rat::one() / c));
    }
}

fn find_pivot(s: &PolyMatrix, t: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, usize)> = None;
    for i in t..s.rows() {
        for j in t..s.cols() {
            if let Some(deg) = s.get(i, j).degree() {
                let better = match best {
                    None => true,
                    Some((bd, _, _)) => deg < bd,
                };
                if better {
                    best = Some((deg, i, j));
                }
            }
        }
    }
    best.map(|(_, i, j)| (i, j))
}

pub fn snf(a: &PolyMatrix) -> Snf {
    let (r, c) = (a.rows(), a.cols());
    let mut w = Work {
        s: a.clone(),
        u: PolyMatrix::identity(r),
        u_inv: PolyMatrix::identity(r),
        v: PolyMatrix::identity(c),
        v_inv: PolyMatrix::identity(c),
    };
    let steps = r.min(c);
    for t in 0..steps {
        'position: loop {
            let Some((pi, pj)) = find_pivot(&w.s, t) else {
                break; // remaining block is zero
            };
            w.swap_rows(t, pi);
            w.swap_cols(t, pj);
            // Clear column t below the pivot.
            for i in t + 1..r {
                if !w.s.get(i, t).is_zero() {
                    let (q, rem) = w.s.get(i, t).div_rem(w.s.get(t, t));
                    w.add_row(i, t, &-&q);
                    if !rem.is_zero() {
                        continue 'position; // smaller-degree entry appeared
                    }
                }
            }
            // Clear row t right of the pivot.
            for j in t + 1..c {
                if !w.s.get(t, j).is_zero() {
                    let (q, rem) = w.s.get(t, j).div_rem(w.s.get(t, t));
                    w.add_col(j, t, &-&q);
                    if !rem.is_zero() {
                        continue 'position;
                    }
                }
            }
            // Divisibility sweep: the pivot must divide the rest of the block.
            for i in t + 1..r {
                for j in t + 1..c {
                    if !w.s.get(t, t).divides(w.s.get(i, j)) {
                        w.add_row(t, i, &Poly::one());
                        continue 'position;
                    }
                }
            }
            break;
        }
        if let Some(lc) = w.s.get(t, t).leading() {
            if !lc.is_one() {
                let inv = Rat::one() / lc.clone();
                w.scale_row(t, &inv);
            }
        }
    }
    let diag = (0..steps).map(|t| w.s.get(t, t).clone()).collect();
    Snf {
        diag,
        u: w.u,
        u_inv: w.u_inv,
        v: w.v,
        v_inv: w.v_inv,
    }
}
