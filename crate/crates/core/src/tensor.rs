//! Dense complex operators on composite Hilbert spaces.
//!
//! Every operator carries the ordered subsystem dimensions of its output and
//! input spaces. Indices are row-major over subsystems: the last subsystem
//! varies fastest. Subsystem order is never changed implicitly; use
//! [`permute_subsystems`] to reorder registers.

use std::collections::BTreeSet;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Tolerance for validating inputs (hermiticity, trace, positivity).
pub const VALIDATION_TOL: f64 = 1e-10;
/// Tolerance for checks made after arithmetic (eigenvalues, reconstructions).
pub const ARITHMETIC_TOL: f64 = 1e-9;

pub(crate) const ZERO: C64 = Complex { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = Complex { re: 1.0, im: 0.0 };

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledOperator {
    data: CMatrix,
    dims_out: Vec<usize>,
    dims_in: Vec<usize>,
}

impl LabeledOperator {
    pub fn new(data: CMatrix, dims_out: Vec<usize>, dims_in: Vec<usize>) -> Result<Self> {
        if dims_out.iter().chain(&dims_in).any(|&d| d == 0) {
            return Err(Error::DimensionMismatch("subsystem dimension 0".into()));
        }
        let rows: usize = dims_out.iter().product();
        let cols: usize = dims_in.iter().product();
        if data.nrows() != rows || data.ncols() != cols {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{} but dims {:?} <- {:?} need {}x{}",
                data.nrows(),
                data.ncols(),
                dims_out,
                dims_in,
                rows,
                cols
            )));
        }
        Ok(Self {
            data,
            dims_out,
            dims_in,
        })
    }

    /// Square operator with equal input and output subsystem dims.
    pub fn square(data: CMatrix, dims: Vec<usize>) -> Result<Self> {
        Self::new(data, dims.clone(), dims)
    }

    /// Column vector `|psi>` as a map from the trivial space.
    pub fn ket(amplitudes: Vec<C64>, dims: Vec<usize>) -> Result<Self> {
        let n = amplitudes.len();
        Self::new(DMatrix::from_vec(n, 1, amplitudes), dims, Vec::new())
    }

    pub fn identity(dims: &[usize]) -> Self {
        let d = dims.iter().product();
        Self {
            data: DMatrix::identity(d, d),
            dims_out: dims.to_vec(),
            dims_in: dims.to_vec(),
        }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let d = dims.iter().product();
        Self {
            data: DMatrix::zeros(d, d),
            dims_out: dims.to_vec(),
            dims_in: dims.to_vec(),
        }
    }

    /// Computational basis ket `|i_1 i_2 ...>`.
    pub fn basis_ket(digits: &[usize], dims: &[usize]) -> Result<Self> {
        if digits.len() != dims.len() || digits.iter().zip(dims).any(|(d, n)| d >= n) {
            return Err(Error::InvalidParameter(format!(
                "basis digits {digits:?} do not fit dims {dims:?}"
            )));
        }
        let mut v = vec![ZERO; dims.iter().product()];
        v[compose_index(digits, dims)] = ONE;
        Self::ket(v, dims.to_vec())
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_data(self) -> CMatrix {
        self.data
    }

    pub fn dims_out(&self) -> &[usize] {
        &self.dims_out
    }

    pub fn dims_in(&self) -> &[usize] {
        &self.dims_in
    }

    /// Subsystem dims of a square operator (its output dims).
    pub fn dims(&self) -> &[usize] {
        &self.dims_out
    }

    pub fn dim_out(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim_in(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.dims_out == self.dims_in
    }

    pub fn is_ket(&self) -> bool {
        self.data.ncols() == 1 && self.dims_in.iter().all(|&d| d == 1)
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            data: self.data.adjoint(),
            dims_out: self.dims_in.clone(),
            dims_in: self.dims_out.clone(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            data: self.data.transpose(),
            dims_out: self.dims_in.clone(),
            dims_in: self.dims_out.clone(),
        }
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            data: self.data.map(|z| z.conj()),
            dims_out: self.dims_out.clone(),
            dims_in: self.dims_in.clone(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.scale_complex(Complex::new(factor, 0.0))
    }

    pub fn scale_complex(&self, factor: C64) -> Self {
        Self {
            data: &self.data * factor,
            dims_out: self.dims_out.clone(),
            dims_in: self.dims_in.clone(),
        }
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.dims_out != other.dims_out || self.dims_in != other.dims_in {
            return Err(Error::DimensionMismatch(format!(
                "{:?}<-{:?} vs {:?}<-{:?}",
                self.dims_out, self.dims_in, other.dims_out, other.dims_in
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            data: &self.data + &other.data,
            dims_out: self.dims_out.clone(),
            dims_in: self.dims_in.clone(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            data: &self.data - &other.data,
            dims_out: self.dims_out.clone(),
            dims_in: self.dims_in.clone(),
        })
    }

    /// Operator composition `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.dims_in != other.dims_out {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose {:?}<-{:?} with {:?}<-{:?}",
                self.dims_out, self.dims_in, other.dims_out, other.dims_in
            )));
        }
        Ok(Self {
            data: &self.data * &other.data,
            dims_out: self.dims_out.clone(),
            dims_in: other.dims_in.clone(),
        })
    }

    /// `|psi><psi|` for a ket.
    pub fn projector(&self) -> Result<Self> {
        if !self.is_ket() {
            return Err(Error::DimensionMismatch("projector needs a ket".into()));
        }
        Ok(Self {
            data: &self.data * self.data.adjoint(),
            dims_out: self.dims_out.clone(),
            dims_in: self.dims_out.clone(),
        })
    }

    /// `tr[observable * self]`.
    pub fn expectation(&self, observable: &Self) -> Result<C64> {
        if observable.dims_in != self.dims_out || observable.dims_out != self.dims_in {
            return Err(Error::DimensionMismatch(format!(
                "expectation of {:?} on {:?}",
                observable.dims_out, self.dims_out
            )));
        }
        let mut acc = ZERO;
        for i in 0..observable.data.nrows() {
            for j in 0..observable.data.ncols() {
                acc += observable.data[(i, j)] * self.data[(j, i)];
            }
        }
        Ok(acc)
    }

    pub fn norm_squared(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `max |M - M^dagger|`, infinite for non-square matrices.
    pub fn hermiticity_error(&self) -> f64 {
        if self.data.nrows() != self.data.ncols() {
            return f64::INFINITY;
        }
        let n = self.data.nrows();
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                err = err.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        err
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.hermiticity_error() <= tol
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.data.shape() != other.data.shape() {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Checks hermiticity, unit trace and positivity at `tol`.
    pub fn validate_density(&self, tol: f64) -> Result<()> {
        if !self.is_square() {
            return Err(Error::NotDensity("operator is not square".into()));
        }
        let herm = self.hermiticity_error();
        if herm > tol {
            return Err(Error::NotDensity(format!("hermiticity error {herm:.3e}")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::NotDensity(format!("trace {tr}")));
        }
        let min = min_eigenvalue(self)?;
        if min < -tol {
            return Err(Error::NotDensity(format!("minimum eigenvalue {min:.3e}")));
        }
        Ok(())
    }
}

/// Ordered set of subsystem positions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SubsystemMask(BTreeSet<usize>);

impl SubsystemMask {
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Self {
        Self(indices.into_iter().collect())
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn all(len: usize) -> Self {
        Self((0..len).collect())
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.contains(&index)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn complement(&self, len: usize) -> Self {
        Self((0..len).filter(|i| !self.0.contains(i)).collect())
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        match self.0.iter().find(|&&i| i >= len) {
            Some(&index) => Err(Error::MaskOutOfRange { index, len }),
            None => Ok(()),
        }
    }
}

impl FromIterator<usize> for SubsystemMask {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Self::new(iter)
    }
}

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

pub(crate) fn split_index(mut index: usize, dims: &[usize], digits: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        digits[k] = index % dims[k];
        index /= dims[k];
    }
}

pub(crate) fn compose_index(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d)
}

/// Kronecker product in list order; dims lists concatenate.
pub fn kron(ops: &[&LabeledOperator]) -> Result<LabeledOperator> {
    let (first, rest) = ops
        .split_first()
        .ok_or_else(|| Error::InvalidParameter("kron of an empty list".into()))?;
    let mut acc = (*first).clone();
    for op in rest {
        acc = LabeledOperator {
            data: acc.data.kronecker(&op.data),
            dims_out: [acc.dims_out, op.dims_out.clone()].concat(),
            dims_in: [acc.dims_in, op.dims_in.clone()].concat(),
        };
    }
    Ok(acc)
}

fn require_square(op: &LabeledOperator, what: &str) -> Result<()> {
    if !op.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{what} needs a square operator, got {:?}<-{:?}",
            op.dims_out, op.dims_in
        )));
    }
    Ok(())
}

/// Traces out the subsystems in `discard`; kept subsystems stay in order.
pub fn partial_trace(op: &LabeledOperator, discard: &SubsystemMask) -> Result<LabeledOperator> {
    require_square(op, "partial_trace")?;
    let dims = op.dims();
    discard.validate(dims.len())?;
    let kept_dims: Vec<usize> = (0..dims.len())
        .filter(|i| !discard.contains(*i))
        .map(|i| dims[i])
        .collect();
    let gone_dims: Vec<usize> = discard.iter().map(|i| dims[i]).collect();
    let n_gone: usize = gone_dims.iter().product();
    let n_kept: usize = kept_dims.iter().product();

    // group full indices by their discarded part
    let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::with_capacity(n_kept); n_gone];
    let mut digits = vec![0; dims.len()];
    let mut kept = Vec::with_capacity(kept_dims.len());
    let mut gone = Vec::with_capacity(gone_dims.len());
    for full in 0..op.dim_out() {
        split_index(full, dims, &mut digits);
        kept.clear();
        gone.clear();
        for (i, &d) in digits.iter().enumerate() {
            if discard.contains(i) {
                gone.push(d);
            } else {
                kept.push(d);
            }
        }
        groups[compose_index(&gone, &gone_dims)].push((full, compose_index(&kept, &kept_dims)));
    }

    let mut out = CMatrix::zeros(n_kept, n_kept);
    for group in &groups {
        for &(r, kr) in group {
            for &(c, kc) in group {
                out[(kr, kc)] += op.data[(r, c)];
            }
        }
    }
    LabeledOperator::square(out, kept_dims)
}

/// Transposes the tensor factors listed in `mask` (computational basis).
pub fn partial_transpose(op: &LabeledOperator, mask: &SubsystemMask) -> Result<LabeledOperator> {
    require_square(op, "partial_transpose")?;
    let dims = op.dims();
    mask.validate(dims.len())?;
    let st = strides(dims);
    let n = op.dim_out();
    let mut digits = vec![0; dims.len()];
    let masked: Vec<usize> = (0..n)
        .map(|idx| {
            split_index(idx, dims, &mut digits);
            mask.iter().map(|k| digits[k] * st[k]).sum()
        })
        .collect();
    let mut out = CMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let r2 = r - masked[r] + masked[c];
            let c2 = c - masked[c] + masked[r];
            out[(r2, c2)] = op.data[(r, c)];
        }
    }
    LabeledOperator::square(out, dims.to_vec())
}

/// Reorders subsystems: new subsystem `i` is old subsystem `order[i]`.
///
/// Applies to the output side, and to the input side when it has the same
/// number of subsystems (square operators); kets only permute rows.
pub fn permute_subsystems(op: &LabeledOperator, order: &[usize]) -> Result<LabeledOperator> {
    fn index_map(dims: &[usize], order: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut seen = vec![false; dims.len()];
        if order.len() != dims.len() {
            return Err(Error::InvalidParameter(format!(
                "permutation {order:?} for {} subsystems",
                dims.len()
            )));
        }
        for &o in order {
            if o >= dims.len() || std::mem::replace(&mut seen[o], true) {
                return Err(Error::InvalidParameter(format!(
                    "invalid permutation {order:?}"
                )));
            }
        }
        let new_dims: Vec<usize> = order.iter().map(|&o| dims[o]).collect();
        let n: usize = dims.iter().product();
        let mut digits = vec![0; dims.len()];
        let mut new_digits = vec![0; dims.len()];
        let map = (0..n)
            .map(|idx| {
                split_index(idx, dims, &mut digits);
                for (i, &o) in order.iter().enumerate() {
                    new_digits[i] = digits[o];
                }
                compose_index(&new_digits, &new_dims)
            })
            .collect();
        Ok((map, new_dims))
    }

    let (row_map, new_out) = index_map(&op.dims_out, order)?;
    let (col_map, new_in) = if op.dims_in.len() == op.dims_out.len() {
        index_map(&op.dims_in, order)?
    } else {
        ((0..op.dim_in()).collect(), op.dims_in.clone())
    };
    let mut out = CMatrix::zeros(op.dim_out(), op.dim_in());
    for r in 0..op.dim_out() {
        for c in 0..op.dim_in() {
            out[(row_map[r], col_map[c])] = op.data[(r, c)];
        }
    }
    LabeledOperator::new(out, new_out, new_in)
}

/// Eigenvalues sorted descending with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Spectrum {
    pub fn vector(&self, i: usize) -> DVector<C64> {
        self.vectors.column(i).into_owned()
    }

    pub fn min(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    /// `sum_i lambda_i v_i v_i^dagger`.
    pub fn reconstruct(&self) -> CMatrix {
        let diag = CMatrix::from_diagonal(&DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|&v| Complex::new(v, 0.0)),
        ));
        &self.vectors * diag * self.vectors.adjoint()
    }
}

/// Hermitian eigendecomposition; input is symmetrized before solving.
pub fn hermitian_eigs(op: &LabeledOperator) -> Result<Spectrum> {
    require_square(op, "hermitian_eigs")?;
    let err = op.hermiticity_error();
    if err > VALIDATION_TOL {
        return Err(Error::NotHermitian(err));
    }
    let sym = (&op.data + op.data.adjoint()) * Complex::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(op.dim_out(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    Ok(Spectrum { values, vectors })
}

pub fn min_eigenvalue(op: &LabeledOperator) -> Result<f64> {
    Ok(hermitian_eigs(op)?.min())
}

/// A linear map given either as an isometry or as a list of Kraus operators.
#[derive(Clone, Copy, Debug)]
pub enum Map<'a> {
    Isometry(&'a LabeledOperator),
    Kraus(&'a [LabeledOperator]),
}

impl Map<'_> {
    pub fn dims_in(&self) -> Result<&[usize]> {
        match self {
            Map::Isometry(v) => Ok(v.dims_in()),
            Map::Kraus(ks) => ks
                .first()
                .map(|k| k.dims_in())
                .ok_or_else(|| Error::InvalidKraus("empty Kraus list".into())),
        }
    }

    pub fn operators(&self) -> &[LabeledOperator] {
        match self {
            Map::Isometry(v) => std::slice::from_ref(*v),
            Map::Kraus(ks) => ks,
        }
    }

    /// Checks `V^dagger V = I`, or `sum K^dagger K <= I` for Kraus lists.
    pub fn validate(&self) -> Result<()> {
        match self {
            Map::Isometry(v) => {
                let gram = v.adjoint().matmul(v)?;
                let dev = gram.max_abs_diff(&LabeledOperator::identity(v.dims_in()));
                if dev > VALIDATION_TOL {
                    return Err(Error::NotIsometry(dev));
                }
            }
            Map::Kraus(ks) => {
                let first = ks
                    .first()
                    .ok_or_else(|| Error::InvalidKraus("empty Kraus list".into()))?;
                let mut total = LabeledOperator::zeros(first.dims_in());
                for k in ks.iter() {
                    if k.dims_in() != first.dims_in() || k.dims_out() != first.dims_out() {
                        return Err(Error::InvalidKraus("Kraus operators differ in dims".into()));
                    }
                    total = total.add(&k.adjoint().matmul(k)?)?;
                }
                let slack = LabeledOperator::identity(first.dims_in()).sub(&total)?;
                let min = min_eigenvalue(&slack)?;
                if min < -VALIDATION_TOL {
                    return Err(Error::InvalidKraus(format!(
                        "sum of K^dagger K exceeds identity by {:.3e}",
                        -min
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `sum_k K rho K^dagger`, after validating the map.
pub fn apply(map: Map<'_>, state: &LabeledOperator) -> Result<LabeledOperator> {
    require_square(state, "apply")?;
    if map.dims_in()? != state.dims() {
        return Err(Error::DimensionMismatch(format!(
            "map expects {:?}, state has {:?}",
            map.dims_in()?,
            state.dims()
        )));
    }
    map.validate()?;
    Ok(apply_unchecked(map.operators(), state))
}

pub(crate) fn apply_unchecked(
    kraus: &[LabeledOperator],
    state: &LabeledOperator,
) -> LabeledOperator {
    let out_dims = kraus[0].dims_out().to_vec();
    let n = kraus[0].dim_out();
    let mut acc = CMatrix::zeros(n, n);
    for k in kraus {
        acc += &k.data * &state.data * k.data.adjoint();
    }
    LabeledOperator {
        data: acc,
        dims_out: out_dims.clone(),
        dims_in: out_dims,
    }
}

/// Applies `map` to the contiguous subsystems `first..first + count` of `state`.
pub fn apply_on(
    map: Map<'_>,
    state: &LabeledOperator,
    first: usize,
    count: usize,
) -> Result<LabeledOperator> {
    require_square(state, "apply_on")?;
    let dims = state.dims();
    if first + count > dims.len() || map.dims_in()? != &dims[first..first + count] {
        return Err(Error::DimensionMismatch(format!(
            "map on {:?} does not fit subsystems {}..{} of {:?}",
            map.dims_in()?,
            first,
            first + count,
            dims
        )));
    }
    map.validate()?;
    let before = LabeledOperator::identity(&dims[..first]);
    let after = LabeledOperator::identity(&dims[first + count..]);
    let lifted: Vec<LabeledOperator> = map
        .operators()
        .iter()
        .map(|k| kron(&[&before, k, &after]))
        .collect::<Result<_>>()?;
    Ok(apply_unchecked(&lifted, state))
}
