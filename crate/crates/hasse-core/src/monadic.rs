//! Matrix realization of the tensor monad `T = A (x) -` of a
//! finite-dimensional algebra, with Eilenberg-Moore modules and
//! commuting-diagram checks.
//!
//! Conventions, fixed so counterexamples are reproducible:
//!
//! * tensor bases are ordered left factor major, matching
//!   [`QMatrix::kron`]: `e_i (x) v_t` has index `i * m + t`;
//! * diagrams are checked component index ascending, then carrier
//!   ascending in the given list, then column ascending;
//! * the first differing column is decoded back to a tensor basis label.
//!
//! With these conventions the first failure reported by the
//! higher-derivation diagram at carrier dimension 1 names the same basis
//! pair as the convolution check in [`crate::hasse_ring`].

use crate::algebra::FinAlgebra;
use crate::error::CoreError;
use crate::hasse_ring::HigherRingDerivation;
use crate::qmat::QMatrix;
use crate::rat::{render_rat_vec, Rat};

/// One failed diagram equation, pinned to its first differing column.
#[derive(Clone, Debug)]
pub struct DiagramFailure {
    /// Which diagram ("assoc", "unit-left", "unit-right", "component i").
    pub name: String,
    /// Component index for derivation diagrams, 0 for monad laws.
    pub component: usize,
    pub carrier_dim: usize,
    /// First differing column of the two composite matrices.
    pub column: usize,
    /// The column decoded as a tensor basis element.
    pub tensor_label: String,
    pub lhs: Vec<Rat>,
    pub rhs: Vec<Rat>,
}

impl DiagramFailure {
    pub fn render(&self) -> String {
        format!(
            "{} at carrier dim {}: column {} ({}) lhs={} rhs={}",
            self.name,
            self.carrier_dim,
            self.column,
            self.tensor_label,
            render_rat_vec(&self.lhs),
            render_rat_vec(&self.rhs)
        )
    }
}

#[derive(Clone, Debug)]
pub struct DiagramReport {
    pub pass: bool,
    /// Number of (equation, carrier) pairs compared.
    pub checked: usize,
    pub failure: Option<DiagramFailure>,
}

impl DiagramReport {
    fn passing(checked: usize) -> Self {
        DiagramReport {
            pass: true,
            checked,
            failure: None,
        }
    }
}

/// Decodes a flat column index into mixed-radix tensor indices, most
/// significant factor first (matching the Kronecker layout).
fn decode_tensor(column: usize, dims: &[usize]) -> Vec<usize> {
    let mut idx = vec![0usize; dims.len()];
    let mut rest = column;
    for (slot, dim) in idx.iter_mut().zip(dims).rev() {
        *slot = rest % dim;
        rest /= dim;
    }
    idx
}

/// Renders decoded tensor indices; algebra slots print as `a{i}`, the
/// final carrier slot as `v{t}` (1-based).
fn tensor_label(indices: &[usize]) -> String {
    let parts: Vec<String> = indices
        .iter()
        .enumerate()
        .map(|(pos, ix)| {
            if pos + 1 == indices.len() {
                format!("v{}", ix + 1)
            } else {
                format!("a{}", ix + 1)
            }
        })
        .collect();
    parts.join("(x)")
}

/// Compares two equally-shaped composites and builds the failure record
/// for the first differing column, if any.
fn compare(
    name: &str,
    component: usize,
    carrier_dim: usize,
    factor_dims: &[usize],
    lhs: &QMatrix,
    rhs: &QMatrix,
) -> Option<DiagramFailure> {
    let column = lhs.first_differing_column(rhs)?;
    let indices = decode_tensor(column, factor_dims);
    Some(DiagramFailure {
        name: name.to_string(),
        component,
        carrier_dim,
        column,
        tensor_label: tensor_label(&indices),
        lhs: lhs.col(column),
        rhs: rhs.col(column),
    })
}

/// The tensor monad of a finite-dimensional algebra, realized on
/// finite-dimensional carriers: `T` sends a carrier of dimension `m` to
/// one of dimension `d * m`, multiplication and unit act on the algebra
/// factor.
#[derive(Clone, Debug)]
pub struct MonadRealization {
    algebra: FinAlgebra,
}

pub const DEFAULT_CARRIERS: [usize; 3] = [1, 2, 3];

impl MonadRealization {
    pub fn new(algebra: FinAlgebra) -> Self {
        MonadRealization { algebra }
    }

    pub fn algebra(&self) -> &FinAlgebra {
        &self.algebra
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }

    /// Dimension of `T` applied to an `m`-dimensional carrier.
    pub fn t_dim(&self, m: usize) -> usize {
        self.algebra.dim() * m
    }

    /// Monad multiplication at an `m`-dimensional carrier:
    /// `T T -> T`, shape `(d*m) x (d^2*m)`.
    pub fn mu_at(&self, m: usize) -> QMatrix {
        self.algebra.mult_matrix().kron(&QMatrix::identity(m))
    }

    /// Monad unit at an `m`-dimensional carrier: `id -> T`,
    /// shape `(d*m) x m`.
    pub fn eta_at(&self, m: usize) -> QMatrix {
        self.algebra.unit_matrix().kron(&QMatrix::identity(m))
    }

    /// `T` on a linear map.
    pub fn t_of(&self, f: &QMatrix) -> QMatrix {
        QMatrix::identity(self.algebra.dim()).kron(f)
    }

    /// A global element of the algebra as the natural map
    /// `id -> T`, `v -> a (x) v`.
    pub fn element_at(&self, a: &[Rat], m: usize) -> QMatrix {
        QMatrix::column(a).kron(&QMatrix::identity(m))
    }

    /// Checks associativity and both unit laws as matrix equations at
    /// each carrier dimension.
    pub fn check_monad_laws(&self, carriers: &[usize]) -> DiagramReport {
        let d = self.dim();
        let mut checked = 0;
        for &m in carriers {
            let mu = self.mu_at(m);
            // mu o T mu = mu o mu_T on T^3.
            let lhs = mu.mul(&self.t_of(&self.mu_at(m)));
            let rhs = mu.mul(&self.mu_at(d * m));
            checked += 1;
            if let Some(f) = compare("assoc", 0, m, &[d, d, d, m], &lhs, &rhs) {
                return DiagramReport {
                    pass: false,
                    checked,
                    failure: Some(f),
                };
            }
            // mu o eta_T = id and mu o T eta = id on T.
            let id_tm = QMatrix::identity(d * m);
            let left = mu.mul(&self.eta_at(d * m));
            checked += 1;
            if let Some(f) = compare("unit-left", 0, m, &[d, m], &left, &id_tm) {
                return DiagramReport {
                    pass: false,
                    checked,
                    failure: Some(f),
                };
            }
            let right = mu.mul(&self.t_of(&self.eta_at(m)));
            checked += 1;
            if let Some(f) = compare("unit-right", 0, m, &[d, m], &right, &id_tm) {
                return DiagramReport {
                    pass: false,
                    checked,
                    failure: Some(f),
                };
            }
        }
        DiagramReport::passing(checked)
    }

    /// Checks the higher-derivation diagrams for component matrices
    /// `c_1..c_n` (with `c_0 = id` implicit): for every `i` and carrier,
    ///
    /// `mu o (sum_k (c_k)_T o T (c_{i-k})) = c_i o mu`
    ///
    /// as maps `T^2 -> T`. At carrier dimension 1 the first differing
    /// column indexes the same basis pair `(a_i, a_j)` the convolution
    /// check would report.
    pub fn check_higher_derivation_diagram(
        &self,
        components: &[QMatrix],
        carriers: &[usize],
    ) -> Result<DiagramReport, CoreError> {
        let d = self.dim();
        for (k, c) in components.iter().enumerate() {
            if c.rows() != d || c.cols() != d {
                return Err(CoreError::Dimension(format!(
                    "component {} is {}x{}, algebra dimension {}",
                    k + 1,
                    c.rows(),
                    c.cols(),
                    d
                )));
            }
        }
        let comp = |k: usize| -> QMatrix {
            if k == 0 {
                QMatrix::identity(d)
            } else {
                components[k - 1].clone()
            }
        };
        let n = components.len();
        let mut checked = 0;
        for i in 0..=n {
            for &m in carriers {
                let mu = self.mu_at(m);
                let im = QMatrix::identity(m);
                // sum_k kron(c_k, kron(c_{i-k}, I_m)) on T^2.
                let mut spread = QMatrix::zeros(d * d * m, d * d * m);
                for k in 0..=i {
                    spread = spread.add(&comp(k).kron(&comp(i - k).kron(&im)));
                }
                let lhs = mu.mul(&spread);
                let rhs = comp(i).kron(&im).mul(&mu);
                checked += 1;
                if let Some(f) = compare(
                    &format!("component {i}"),
                    i,
                    m,
                    &[d, d, m],
                    &lhs,
                    &rhs,
                ) {
                    return Ok(DiagramReport {
                        pass: false,
                        checked,
                        failure: Some(f),
                    });
                }
            }
        }
        Ok(DiagramReport::passing(checked))
    }

    /// Checks the module-derivation diagrams over a fixed module: for
    /// every `i`,
    ///
    /// `D_i o act = act o (sum_k kron(c_k, D_{i-k}))`
    ///
    /// as maps `T M -> M`, where `act` is the module structure map.
    pub fn check_module_derivation_diagram(
        &self,
        module: &EMModule,
        ring_components: &[QMatrix],
        module_components: &[QMatrix],
    ) -> Result<DiagramReport, CoreError> {
        let d = self.dim();
        let m = module.dim();
        if ring_components.len() != module_components.len() {
            return Err(CoreError::InvalidArgument(format!(
                "ring order {} differs from module order {}",
                ring_components.len(),
                module_components.len()
            )));
        }
        for (k, c) in ring_components.iter().enumerate() {
            if c.rows() != d || c.cols() != d {
                return Err(CoreError::Dimension(format!(
                    "ring component {} is {}x{}, algebra dimension {}",
                    k + 1,
                    c.rows(),
                    c.cols(),
                    d
                )));
            }
        }
        for (k, dm) in module_components.iter().enumerate() {
            if dm.rows() != m || dm.cols() != m {
                return Err(CoreError::Dimension(format!(
                    "module component {} is {}x{}, module dimension {}",
                    k + 1,
                    dm.rows(),
                    dm.cols(),
                    m
                )));
            }
        }
        let ring = |k: usize| -> QMatrix {
            if k == 0 {
                QMatrix::identity(d)
            } else {
                ring_components[k - 1].clone()
            }
        };
        let modc = |k: usize| -> QMatrix {
            if k == 0 {
                QMatrix::identity(m)
            } else {
                module_components[k - 1].clone()
            }
        };
        let n = ring_components.len();
        let act = module.action();
        let mut checked = 0;
        for i in 0..=n {
            let lhs = modc(i).mul(act);
            let mut spread = QMatrix::zeros(d * m, d * m);
            for k in 0..=i {
                spread = spread.add(&ring(k).kron(&modc(i - k)));
            }
            let rhs = act.mul(&spread);
            checked += 1;
            if let Some(f) = compare(&format!("component {i}"), i, m, &[d, m], &lhs, &rhs) {
                return Ok(DiagramReport {
                    pass: false,
                    checked,
                    failure: Some(f),
                });
            }
        }
        Ok(DiagramReport::passing(checked))
    }

    /// Adjunction, linear side: restricts an equivariant map off the free
    /// module `A (x) V` along the unit.
    pub fn to_linear(&self, g: &QMatrix, v_dim: usize) -> Result<QMatrix, CoreError> {
        if g.cols() != self.dim() * v_dim {
            return Err(CoreError::Dimension(format!(
                "equivariant map has {} columns, free module dimension {}",
                g.cols(),
                self.dim() * v_dim
            )));
        }
        Ok(g.mul(&self.eta_at(v_dim)))
    }

    /// Adjunction, equivariant side: extends a linear map `V -> N` to the
    /// module map `A (x) V -> N` through the target action.
    pub fn to_equivariant(
        &self,
        target: &EMModule,
        f: &QMatrix,
        v_dim: usize,
    ) -> Result<QMatrix, CoreError> {
        if f.rows() != target.dim() || f.cols() != v_dim {
            return Err(CoreError::Dimension(format!(
                "linear map is {}x{}, expected {}x{}",
                f.rows(),
                f.cols(),
                target.dim(),
                v_dim
            )));
        }
        Ok(target.action().mul(&self.t_of(f)))
    }
}

/// A module over the tensor monad: a carrier dimension and a structure
/// map `T M -> M` satisfying the unit and associativity laws.
#[derive(Clone, Debug)]
pub struct EMModule {
    algebra: FinAlgebra,
    dim: usize,
    action: QMatrix,
}

impl EMModule {
    pub fn new(algebra: FinAlgebra, dim: usize, action: QMatrix) -> Result<Self, CoreError> {
        if action.rows() != dim || action.cols() != algebra.dim() * dim {
            return Err(CoreError::Dimension(format!(
                "structure map is {}x{}, expected {}x{}",
                action.rows(),
                action.cols(),
                dim,
                algebra.dim() * dim
            )));
        }
        Ok(EMModule {
            algebra,
            dim,
            action,
        })
    }

    /// The free module on an `r`-dimensional carrier, `A (x) Q^r`, with
    /// multiplication as the action.
    pub fn free(algebra: FinAlgebra, r: usize) -> Self {
        let action = algebra.mult_matrix().kron(&QMatrix::identity(r));
        let dim = algebra.dim() * r;
        EMModule {
            algebra,
            dim,
            action,
        }
    }

    /// Column vectors as a module over the full matrix algebra.
    pub fn columns(n: usize) -> Self {
        let algebra = FinAlgebra::matrix_algebra(n);
        let action = algebra.column_action(n);
        EMModule {
            algebra,
            dim: n,
            action,
        }
    }

    pub fn algebra(&self) -> &FinAlgebra {
        &self.algebra
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn action(&self) -> &QMatrix {
        &self.action
    }

    /// Action of a single algebra element as an `m x m` matrix.
    pub fn element_action(&self, a: &[Rat]) -> QMatrix {
        let realization = MonadRealization::new(self.algebra.clone());
        self.action.mul(&realization.element_at(a, self.dim))
    }

    /// The action-power family over the inner ring family of `a`: ring
    /// component `k` is the `k`-th inner component, module component `k`
    /// acts as `a^k` on the carrier. Returned as the two component
    /// stacks (orders `1..=n`) the module diagram check consumes.
    pub fn make_module_power(
        &self,
        a: &[Rat],
        order: usize,
    ) -> Result<(Vec<QMatrix>, Vec<QMatrix>), CoreError> {
        let ring = HigherRingDerivation::make_inner_higher(&self.algebra, a, order)?;
        let ring_comps: Vec<QMatrix> = (1..=order)
            .map(|k| ring.component_matrix(k))
            .collect::<Result<_, _>>()?;
        let mut module_comps = Vec::with_capacity(order);
        let mut pw = a.to_vec();
        for _ in 1..=order {
            module_comps.push(self.element_action(&pw));
            pw = self.algebra.mul(&pw, a);
        }
        Ok((ring_comps, module_comps))
    }

    /// Checks the unit and associativity module laws.
    pub fn validate(&self) -> DiagramReport {
        let realization = MonadRealization::new(self.algebra.clone());
        let d = self.algebra.dim();
        let m = self.dim;
        let mut checked = 0;
        let unit = self.action.mul(&realization.eta_at(m));
        checked += 1;
        if let Some(f) = compare("unit", 0, m, &[m], &unit, &QMatrix::identity(m)) {
            return DiagramReport {
                pass: false,
                checked,
                failure: Some(f),
            };
        }
        let lhs = self.action.mul(&realization.t_of(&self.action));
        let rhs = self.action.mul(&realization.mu_at(m));
        checked += 1;
        if let Some(f) = compare("assoc", 0, m, &[d, d, m], &lhs, &rhs) {
            return DiagramReport {
                pass: false,
                checked,
                failure: Some(f),
            };
        }
        DiagramReport::passing(checked)
    }
}
