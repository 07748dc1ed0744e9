//! Dense multiway arrays: storage, unfolding, mode products, Tucker
//! composition, norms, and a higher-order SVD.
//!
//! Storage is a flat `Vec<f64>` with the **first index varying fastest**
//! (column-major generalized to K modes). The mode-`k` unfolding of a
//! `d_1 x ... x d_K` tensor is the `d_k x prod_{i != k} d_i` matrix whose
//! column index runs over the remaining modes with the smallest mode
//! varying fastest; `refold` is its exact inverse.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Order-K real tensor with explicit dimensions and flat storage.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl DenseTensor {
    /// Builds a tensor from dimensions and a flat value array
    /// (first index fastest).
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::invalid("tensor order must be at least 1"));
        }
        if dims.contains(&0) {
            return Err(Error::invalid("every dimension must be positive"));
        }
        let n: usize = dims.iter().product();
        if values.len() != n {
            return Err(Error::shape(format!(
                "value array has length {} but dims {:?} require {}",
                values.len(),
                dims,
                n
            )));
        }
        Ok(Self { dims, values })
    }

    /// All-zero tensor of the given dimensions.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let n: usize = dims.iter().product();
        Self::new(dims.to_vec(), vec![0.0; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Tensor order K.
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Total number of entries.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Consumes the tensor, returning its flat values.
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// sqrt of the sum of squared entries.
    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute entry (0 for an empty sum is impossible: K >= 1,
    /// d_k >= 1 imply at least one entry).
    pub fn infinity_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Mean of all entries.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Entrywise in-place scaling.
    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: self.order(),
            });
        }
        Ok(())
    }
}

/// Row/column strides of the mode-`mode` unfolding: entry `(i_1,..,i_K)`
/// lands at row `i_mode`, column `sum_{m != mode} i_m * stride_m`.
fn unfold_strides(dims: &[usize], mode: usize) -> Vec<usize> {
    let mut strides = vec![0; dims.len()];
    let mut acc = 1;
    for (m, &d) in dims.iter().enumerate() {
        if m == mode {
            continue;
        }
        strides[m] = acc;
        acc *= d;
    }
    strides
}

/// Mode-`mode` unfolding (0-based mode) into a `d_mode x prod_other` matrix.
pub fn unfold(t: &DenseTensor, mode: usize) -> Result<DMatrix<f64>> {
    t.check_mode(mode)?;
    let dims = t.dims();
    let rows = dims[mode];
    let cols = t.len() / rows;
    let col_strides = unfold_strides(dims, mode);
    let mut out = DMatrix::zeros(rows, cols);
    let mut idx = vec![0usize; dims.len()];
    for &v in t.values() {
        let row = idx[mode];
        let col: usize = idx
            .iter()
            .zip(&col_strides)
            .map(|(&i, &s)| i * s)
            .sum();
        out[(row, col)] = v;
        // odometer increment, first index fastest
        for (i, &d) in idx.iter_mut().zip(dims) {
            *i += 1;
            if *i < d {
                break;
            }
            *i = 0;
        }
    }
    Ok(out)
}

/// Exact inverse of [`unfold`] under the same ordering convention.
pub fn refold(m: &DMatrix<f64>, mode: usize, dims: &[usize]) -> Result<DenseTensor> {
    if mode >= dims.len() {
        return Err(Error::ModeOutOfRange {
            mode,
            order: dims.len(),
        });
    }
    let n: usize = dims.iter().product();
    if m.nrows() != dims[mode] || m.nrows() * m.ncols() != n {
        return Err(Error::shape(format!(
            "matrix {}x{} does not refold into dims {:?} at mode {}",
            m.nrows(),
            m.ncols(),
            dims,
            mode
        )));
    }
    let col_strides = unfold_strides(dims, mode);
    let mut values = vec![0.0; n];
    let mut idx = vec![0usize; dims.len()];
    for v in values.iter_mut() {
        let row = idx[mode];
        let col: usize = idx
            .iter()
            .zip(&col_strides)
            .map(|(&i, &s)| i * s)
            .sum();
        *v = m[(row, col)];
        for (i, &d) in idx.iter_mut().zip(dims) {
            *i += 1;
            if *i < d {
                break;
            }
            *i = 0;
        }
    }
    DenseTensor::new(dims.to_vec(), values)
}

/// Tensor-by-matrix product along `mode`: replaces `d_mode` by the row
/// count of `m`. Equals `refold(m * unfold(t, mode), mode, new_dims)`.
pub fn mode_multiply(t: &DenseTensor, m: &DMatrix<f64>, mode: usize) -> Result<DenseTensor> {
    t.check_mode(mode)?;
    if m.ncols() != t.dims()[mode] {
        return Err(Error::shape(format!(
            "matrix has {} columns but mode {} has dimension {}",
            m.ncols(),
            mode,
            t.dims()[mode]
        )));
    }
    let unf = unfold(t, mode)?;
    let prod = m * unf;
    let mut new_dims = t.dims().to_vec();
    new_dims[mode] = m.nrows();
    refold(&prod, mode, &new_dims)
}

/// Tucker representation: a core tensor plus one factor matrix per mode.
///
/// Factor `k` has shape `d_k x r_k`. Every constructor in this crate that
/// estimates or decomposes returns factors with orthonormal columns;
/// `new` itself only checks shapes so callers may stage arbitrary factors.
#[derive(Debug, Clone)]
pub struct TuckerFactors {
    core: DenseTensor,
    factors: Vec<DMatrix<f64>>,
}

impl TuckerFactors {
    pub fn new(core: DenseTensor, factors: Vec<DMatrix<f64>>) -> Result<Self> {
        if factors.len() != core.order() {
            return Err(Error::shape(format!(
                "core has order {} but {} factors were given",
                core.order(),
                factors.len()
            )));
        }
        for (k, f) in factors.iter().enumerate() {
            if f.ncols() != core.dims()[k] {
                return Err(Error::shape(format!(
                    "factor {} has {} columns but core dimension is {}",
                    k,
                    f.ncols(),
                    core.dims()[k]
                )));
            }
            if f.nrows() < f.ncols() || f.ncols() == 0 {
                return Err(Error::RankOutOfRange {
                    mode: k,
                    rank: f.ncols(),
                    dim: f.nrows(),
                });
            }
        }
        Ok(Self { core, factors })
    }

    pub fn core(&self) -> &DenseTensor {
        &self.core
    }

    pub fn factors(&self) -> &[DMatrix<f64>] {
        &self.factors
    }

    pub fn factor(&self, mode: usize) -> &DMatrix<f64> {
        &self.factors[mode]
    }

    /// Dimensions `d_1..d_K` of the composed tensor.
    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    /// Multilinear rank `r_1..r_K`.
    pub fn ranks(&self) -> &[usize] {
        self.core.dims()
    }

    /// Composes the full tensor: core multiplied by each factor in turn.
    pub fn compose(&self) -> DenseTensor {
        let mut t = self.core.clone();
        for (k, f) in self.factors.iter().enumerate() {
            // shapes were validated on construction
            t = mode_multiply(&t, f, k).expect("validated shapes");
        }
        t
    }
}

/// Composition as a free function, mirroring the rest of this module's API.
pub fn tucker_compose(tf: &TuckerFactors) -> DenseTensor {
    tf.compose()
}

/// Left singular vectors of `a` (descending singular values), via the
/// symmetric eigendecomposition of the Gram matrix `a * a^T`. The sizes
/// handled here keep the Gram route cheap and stable enough.
pub(crate) fn top_left_singular_vectors(a: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    let gram = a * a.transpose();
    let n = gram.nrows();
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("eigenvalues are finite")
    });
    let mut q = DMatrix::zeros(n, rank);
    for (c, &src) in order.iter().take(rank).enumerate() {
        let col = eig.eigenvectors.column(src);
        // fix sign: largest-magnitude component positive
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let s = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            q[(i, c)] = s * col[i];
        }
    }
    q
}

/// Higher-order SVD truncated to `ranks`: factor `k` holds the top `r_k`
/// left singular vectors of the mode-`k` unfolding; the core is the
/// projection of `t` onto those subspaces.
pub fn hosvd(t: &DenseTensor, ranks: &[usize]) -> Result<TuckerFactors> {
    if ranks.len() != t.order() {
        return Err(Error::shape(format!(
            "{} ranks given for an order-{} tensor",
            ranks.len(),
            t.order()
        )));
    }
    for (k, (&r, &d)) in ranks.iter().zip(t.dims()).enumerate() {
        if r == 0 || r > d {
            return Err(Error::RankOutOfRange {
                mode: k,
                rank: r,
                dim: d,
            });
        }
    }
    let mut factors = Vec::with_capacity(t.order());
    for (k, &r) in ranks.iter().enumerate() {
        let unf = unfold(t, k)?;
        factors.push(top_left_singular_vectors(&unf, r));
    }
    let mut core = t.clone();
    for (k, f) in factors.iter().enumerate() {
        core = mode_multiply(&core, &f.transpose(), k)?;
    }
    TuckerFactors::new(core, factors)
}

/// Thin QR with the sign convention that `r` has a nonnegative diagonal.
pub(crate) fn qr_thin(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..r.nrows().min(r.ncols()) {
        if r[(j, j)] < 0.0 {
            for c in 0..r.ncols() {
                r[(j, c)] = -r[(j, c)];
            }
            for i in 0..q.nrows() {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    (q, r)
}

/// Max absolute deviation of `m^T m` from the identity.
pub fn orthonormality_defect(m: &DMatrix<f64>) -> f64 {
    let g = m.transpose() * m;
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}
