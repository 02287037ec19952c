//! Dense order-3 tensors, flattenings, the chart maps between tensors and
//! `u × p` matrices, the pencil `M(x, B)`, and the explicit base tensors.
//!
//! Axis convention: a tensor of shape `(d1, d2, d3)` has `d3` slices
//! `T_k ∈ R^{d1×d2}`. `fl1(T) = (T_1, ..., T_{d3})` is `d1 × d2·d3` and
//! `fl2(T)` stacks the slices vertically into a `d1·d3 × d2` matrix.
//! Tensors on the `T` side have shape `(n, p, m)`; tensors on the pencil
//! side have shape `(u, n, m)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg;

/// Condition number above which `sigma` and `nu` refuse to invert.
pub const CHART_CONDITION_LIMIT: f64 = 1e12;

/// The format `(m, n, p)` with `u = mn - p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Format {
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub u: usize,
}

impl Format {
    /// The critical format `p = (m-1)(n-1)+1`, where `u = m+n-2`.
    pub fn critical(m: usize, n: usize) -> Result<Self> {
        if m < 3 || m > n {
            return domain(format!("need 3 <= m <= n, got m={m}, n={n}"));
        }
        let p = (m - 1) * (n - 1) + 1;
        Ok(Self {
            m,
            n,
            p,
            u: m * n - p,
        })
    }

    /// Any `p` in `[(m-1)(n-1)+1, mn]`; only the classifier uses non-critical formats.
    pub fn general(m: usize, n: usize, p: usize) -> Result<Self> {
        let crit = Self::critical(m, n)?;
        if p < crit.p || p > m * n {
            return domain(format!(
                "p={p} outside [{}, {}] for m={m}, n={n}",
                crit.p,
                m * n
            ));
        }
        Ok(Self {
            m,
            n,
            p,
            u: m * n - p,
        })
    }

    pub fn is_critical(&self) -> bool {
        self.p == (self.m - 1) * (self.n - 1) + 1
    }

    /// Shape `(n, p, m)` of the tensors being certified.
    pub fn t_shape(&self) -> [usize; 3] {
        [self.n, self.p, self.m]
    }

    /// Shape `(u, n, m)` of the pencil tensors.
    pub fn y_shape(&self) -> [usize; 3] {
        [self.u, self.n, self.m]
    }

    /// Reads `(m, n)` back from a `(n, p, m)` tensor shape.
    pub fn from_t_shape(shape: [usize; 3]) -> Result<Self> {
        let [n, p, m] = shape;
        let fmt = Self::critical(m, n)?;
        if fmt.p != p {
            return domain(format!(
                "tensor shape {shape:?} is not n x p x m with p = (m-1)(n-1)+1 = {}",
                fmt.p
            ));
        }
        Ok(fmt)
    }

    /// Reads `(m, n)` back from a `(u, n, m)` tensor shape.
    pub fn from_y_shape(shape: [usize; 3]) -> Result<Self> {
        let [u, n, m] = shape;
        let fmt = Self::critical(m, n)?;
        if fmt.u != u {
            return domain(format!(
                "tensor shape {shape:?} is not u x n x m with u = m+n-2 = {}",
                fmt.u
            ));
        }
        Ok(fmt)
    }
}

/// Which flattening to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flattening {
    Fl1,
    Fl2,
}

/// Dense real order-3 tensor stored row-major: `(i, j, k) ↦ (i·d2 + j)·d3 + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    pub shape: [usize; 3],
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(shape: [usize; 3]) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn new(shape: [usize; 3], data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if data.len() != len {
            return domain(format!(
                "shape {shape:?} needs {len} entries, got {}",
                data.len()
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn from_slices(slices: &[DMatrix<f64>]) -> Result<Self> {
        let Some(first) = slices.first() else {
            return domain("at least one slice is required");
        };
        let (d1, d2) = first.shape();
        if slices.iter().any(|s| s.shape() != (d1, d2)) {
            return domain("slices have different shapes");
        }
        let mut t = Self::zeros([d1, d2, slices.len()]);
        for (k, s) in slices.iter().enumerate() {
            for i in 0..d1 {
                for j in 0..d2 {
                    t.set(i, j, k, s[(i, j)]);
                }
            }
        }
        Ok(t)
    }

    /// Rank-one tensor `x ⊗ y ⊗ z`.
    pub fn outer(x: &[f64], y: &[f64], z: &[f64]) -> Self {
        let mut t = Self::zeros([x.len(), y.len(), z.len()]);
        for (i, xi) in x.iter().enumerate() {
            for (j, yj) in y.iter().enumerate() {
                for (k, zk) in z.iter().enumerate() {
                    t.set(i, j, k, xi * yj * zk);
                }
            }
        }
        t
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.shape[1] + j) * self.shape[2] + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    pub fn n_slices(&self) -> usize {
        self.shape[2]
    }

    /// Slice `T_k` (0-based `k`).
    pub fn slice(&self, k: usize) -> DMatrix<f64> {
        let [d1, d2, _] = self.shape;
        DMatrix::from_fn(d1, d2, |i, j| self.get(i, j, k))
    }

    pub fn slices(&self) -> Vec<DMatrix<f64>> {
        (0..self.n_slices()).map(|k| self.slice(k)).collect()
    }

    pub fn flatten(&self, mode: Flattening) -> DMatrix<f64> {
        let [d1, d2, d3] = self.shape;
        match mode {
            Flattening::Fl1 => DMatrix::from_fn(d1, d2 * d3, |i, c| self.get(i, c % d2, c / d2)),
            Flattening::Fl2 => DMatrix::from_fn(d1 * d3, d2, |r, j| self.get(r % d1, j, r / d1)),
        }
    }

    /// Inverse of `fl1` for a `d1 × d2·d3` matrix.
    pub fn unflatten_fl1(mat: &DMatrix<f64>, d2: usize, d3: usize) -> Result<Self> {
        let (d1, cols) = mat.shape();
        if cols != d2 * d3 {
            return domain(format!("fl1 matrix has {cols} columns, expected {}", d2 * d3));
        }
        let mut t = Self::zeros([d1, d2, d3]);
        for i in 0..d1 {
            for c in 0..cols {
                t.set(i, c % d2, c / d2, mat[(i, c)]);
            }
        }
        Ok(t)
    }

    /// Inverse of `fl2` for a `d1·d3 × d2` matrix.
    pub fn unflatten_fl2(mat: &DMatrix<f64>, d1: usize, d3: usize) -> Result<Self> {
        let (rows, d2) = mat.shape();
        if rows != d1 * d3 {
            return domain(format!("fl2 matrix has {rows} rows, expected {}", d1 * d3));
        }
        let mut t = Self::zeros([d1, d2, d3]);
        for r in 0..rows {
            for j in 0..d2 {
                t.set(r % d1, j, r / d1, mat[(r, j)]);
            }
        }
        Ok(t)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Tensor3) -> Result<Self> {
        if self.shape != other.shape {
            return domain(format!("shape mismatch {:?} vs {:?}", self.shape, other.shape));
        }
        Ok(Self {
            shape: self.shape,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Tensor3) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `(P T_1 Q; ...; P T_{d3} Q)`.
    pub fn transform(&self, p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<Self> {
        let [d1, d2, _] = self.shape;
        if p.ncols() != d1 || q.nrows() != d2 {
            return domain("transform matrices do not match the slice shape");
        }
        let slices: Vec<DMatrix<f64>> = self.slices().iter().map(|s| p * s * q).collect();
        Self::from_slices(&slices)
    }

    /// Applies a row permutation to every slice: row `j` of the result is row `perm[j]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        let [d1, d2, d3] = self.shape;
        let mut t = Self::zeros(self.shape);
        for (j, &src) in perm.iter().enumerate().take(d1) {
            for c in 0..d2 {
                for k in 0..d3 {
                    t.set(j, c, k, self.get(src, c, k));
                }
            }
        }
        t
    }
}

/// The base tensor `A = (A_1; ...; A_m)` of shape `(u, n, m)`.
///
/// `A_k` (k < m) carries `E_n` in rows `k..k+n-1`; `A_m` has `-1` at
/// `(1, n)` and `E_{n-1}` in the bottom-left corner.
pub fn make_base_tensor(m: usize, n: usize) -> Result<Tensor3> {
    let fmt = Format::critical(m, n)?;
    let u = fmt.u;
    let mut a = Tensor3::zeros([u, n, m]);
    for k in 0..m - 1 {
        for j in 0..n {
            a.set(k + j, j, k, 1.0);
        }
    }
    a.set(0, n - 1, m - 1, -1.0);
    for j in 0..n - 1 {
        a.set(m - 1 + j, j, m - 1, 1.0);
    }
    Ok(a)
}

/// Signed slice reordering `(B_2; ...; B_{m-2}; B_m; -B_{m-1}; -B_1)` as
/// `(source slice, sign)` per output slice, all 0-based.
///
/// The same map sends a pencil point `a` for `B` to the point
/// `a' = (a_2, ..., a_{m-2}, a_m, -a_{m-1}, -a_1)` for the reordered tensor.
pub fn slice_reorder_map(m: usize) -> Vec<(usize, f64)> {
    let mut map: Vec<(usize, f64)> = (1..m.saturating_sub(2)).map(|k| (k, 1.0)).collect();
    map.push((m - 1, 1.0));
    map.push((m - 2, -1.0));
    map.push((0, -1.0));
    map
}

/// Applies [`slice_reorder_map`] to the slices of `b`.
pub fn reorder_slices(b: &Tensor3) -> Tensor3 {
    let m = b.n_slices();
    let mut out = Tensor3::zeros(b.shape);
    let [d1, d2, _] = b.shape;
    for (k, (src, sign)) in slice_reorder_map(m).into_iter().enumerate() {
        for i in 0..d1 {
            for j in 0..d2 {
                out.set(i, j, k, sign * b.get(i, j, src));
            }
        }
    }
    out
}

/// The full map `ρ(B) = P · reorder(B)`.
pub fn rho(b: &Tensor3, perm: &[usize]) -> Tensor3 {
    reorder_slices(b).permute_rows(perm)
}

/// Applies the coordinate part of ρ to a pencil point.
pub fn remap_point<T: Copy + std::ops::Mul<f64, Output = T>>(a: &[T]) -> Vec<T> {
    slice_reorder_map(a.len())
        .into_iter()
        .map(|(src, sign)| a[src] * sign)
        .collect()
}

/// The reference tensors around which the open set of rank `> p` tensors lives.
#[derive(Debug, Clone)]
pub struct StartFrame {
    pub format: Format,
    /// `A`.
    pub base: Tensor3,
    /// `A''`, the signed slice reordering of `A`.
    pub reordered: Tensor3,
    /// Row permutation: row `j` of `P X` is row `perm[j]` of `X`.
    pub perm: Vec<usize>,
    /// `A' = P A''`.
    pub aprime: Tensor3,
    /// `W_0`, the first `p` columns of `fl1(A')`.
    pub w0: DMatrix<f64>,
}

impl StartFrame {
    pub fn perm_matrix(&self) -> DMatrix<f64> {
        let u = self.perm.len();
        DMatrix::from_fn(u, u, |i, j| if self.perm[i] == j { 1.0 } else { 0.0 })
    }

    /// Last `u` columns of `fl1(A')`.
    pub fn trailing_block(&self) -> DMatrix<f64> {
        trailing_block(&self.aprime, self.format)
    }
}

fn trailing_block(y: &Tensor3, fmt: Format) -> DMatrix<f64> {
    let fl = y.flatten(Flattening::Fl1);
    fl.columns(fmt.p, fmt.u).into_owned()
}

pub fn make_start_frame(m: usize, n: usize) -> Result<StartFrame> {
    let format = Format::critical(m, n)?;
    let u = format.u;
    let base = make_base_tensor(m, n)?;
    let reordered = reorder_slices(&base);
    let block = trailing_block(&reordered, format);

    // match column j of the trailing block with -e_{perm[j]}
    let mut perm = vec![usize::MAX; u];
    for (j, slot) in perm.iter_mut().enumerate() {
        let col = block.column(j);
        let hits: Vec<usize> = (0..u).filter(|&i| col[i] != 0.0).collect();
        match hits.as_slice() {
            [r] if col[*r] == -1.0 => *slot = *r,
            _ => {
                return Err(Error::Internal(format!(
                    "trailing column {j} of fl1(A'') is not a negated unit vector"
                )))
            }
        }
    }
    let mut seen = vec![false; u];
    for &r in &perm {
        if std::mem::replace(&mut seen[r], true) {
            return Err(Error::Internal("trailing block is not a permutation".into()));
        }
    }

    let aprime = reordered.permute_rows(&perm);
    let check = trailing_block(&aprime, format);
    if check != -DMatrix::<f64>::identity(u, u) {
        return Err(Error::Internal("P A'' does not end in -E_u".into()));
    }
    let expected: Vec<usize> = (n..u).chain(0..n).collect();
    if perm != expected {
        return Err(Error::Internal(format!(
            "permutation {perm:?} differs from the block swap {expected:?}"
        )));
    }
    let w0 = aprime
        .flatten(Flattening::Fl1)
        .columns(0, format.p)
        .into_owned();
    Ok(StartFrame {
        format,
        base,
        reordered,
        perm,
        aprime,
        w0,
    })
}

fn check_w(w: &DMatrix<f64>, fmt: Format) -> Result<()> {
    if w.shape() != (fmt.u, fmt.p) {
        return domain(format!(
            "W must be {} x {}, got {:?}",
            fmt.u,
            fmt.p,
            w.shape()
        ));
    }
    Ok(())
}

/// `σ(T) = (rows after p of fl2(T)) · (first p rows of fl2(T))^{-1}`.
pub fn sigma(t: &Tensor3, fmt: Format, cond_limit: f64) -> Result<DMatrix<f64>> {
    if t.shape != fmt.t_shape() {
        return domain(format!("sigma expects shape {:?}, got {:?}", fmt.t_shape(), t.shape));
    }
    let fl = t.flatten(Flattening::Fl2);
    let upper = fl.rows(0, fmt.p).into_owned();
    let lower = fl.rows(fmt.p, fmt.u).into_owned();
    let cond = linalg::condition_number(&upper);
    if !(cond < cond_limit) {
        return Err(Error::ChartViolation {
            block: "leading fl2",
            condition: cond,
            limit: cond_limit,
        });
    }
    // X · upper = lower  ⇔  upperᵀ · Xᵀ = lowerᵀ
    let xt = upper
        .transpose()
        .lu()
        .solve(&lower.transpose())
        .ok_or(Error::ChartViolation {
            block: "leading fl2",
            condition: f64::INFINITY,
            limit: cond_limit,
        })?;
    Ok(xt.transpose())
}

/// `τ(W) = fl2^{-1}(E_p; W)`, an `n × p × m` tensor.
pub fn tau(w: &DMatrix<f64>, fmt: Format) -> Result<Tensor3> {
    check_w(w, fmt)?;
    let mut stacked = DMatrix::<f64>::zeros(fmt.m * fmt.n, fmt.p);
    stacked.view_mut((0, 0), (fmt.p, fmt.p)).fill_with_identity();
    stacked.view_mut((fmt.p, 0), (fmt.u, fmt.p)).copy_from(w);
    Tensor3::unflatten_fl2(&stacked, fmt.n, fmt.m)
}

/// `μ(W) = fl1^{-1}(W, -E_u)`, a `u × n × m` tensor.
pub fn mu(w: &DMatrix<f64>, fmt: Format) -> Result<Tensor3> {
    check_w(w, fmt)?;
    let mut wide = DMatrix::<f64>::zeros(fmt.u, fmt.m * fmt.n);
    wide.view_mut((0, 0), (fmt.u, fmt.p)).copy_from(w);
    wide.view_mut((0, fmt.p), (fmt.u, fmt.u))
        .copy_from(&-DMatrix::<f64>::identity(fmt.u, fmt.u));
    Tensor3::unflatten_fl1(&wide, fmt.n, fmt.m)
}

/// `ν(Y) = -(last u columns of fl1(Y))^{-1} · (first p columns of fl1(Y))`.
pub fn nu(y: &Tensor3, fmt: Format, cond_limit: f64) -> Result<DMatrix<f64>> {
    if y.shape != fmt.y_shape() {
        return domain(format!("nu expects shape {:?}, got {:?}", fmt.y_shape(), y.shape));
    }
    let fl = y.flatten(Flattening::Fl1);
    let first = fl.columns(0, fmt.p).into_owned();
    let last = fl.columns(fmt.p, fmt.u).into_owned();
    let cond = linalg::condition_number(&last);
    if !(cond < cond_limit) {
        return Err(Error::ChartViolation {
            block: "trailing fl1",
            condition: cond,
            limit: cond_limit,
        });
    }
    let x = last.lu().solve(&first).ok_or(Error::ChartViolation {
        block: "trailing fl1",
        condition: f64::INFINITY,
        limit: cond_limit,
    })?;
    Ok(-x)
}

/// `M(a, B) = a_1 B_1 + ... + a_m B_m`.
pub fn pencil_eval(a: &[f64], b: &Tensor3) -> Result<DMatrix<f64>> {
    let [d1, d2, d3] = b.shape;
    if a.len() != d3 {
        return domain(format!("pencil point has length {}, tensor has {d3} slices", a.len()));
    }
    Ok(DMatrix::from_fn(d1, d2, |i, j| {
        (0..d3).map(|k| a[k] * b.get(i, j, k)).sum()
    }))
}

/// Complex version of [`pencil_eval`].
pub fn pencil_eval_complex(a: &[Complex64], b: &Tensor3) -> Result<DMatrix<Complex64>> {
    let [d1, d2, d3] = b.shape;
    if a.len() != d3 {
        return domain(format!("pencil point has length {}, tensor has {d3} slices", a.len()));
    }
    Ok(DMatrix::from_fn(d1, d2, |i, j| {
        (0..d3).map(|k| a[k] * b.get(i, j, k)).sum()
    }))
}

/// `ψ(a, b)`: the first `p` entries of the Kronecker product `a ⊗ b`.
pub fn psi(a: &[f64], b: &[f64], fmt: Format) -> Result<Vec<f64>> {
    if a.len() != fmt.m || b.len() != fmt.n {
        return domain(format!(
            "psi expects |a|={}, |b|={}, got {}, {}",
            fmt.m,
            fmt.n,
            a.len(),
            b.len()
        ));
    }
    Ok(a.iter()
        .flat_map(|&ai| b.iter().map(move |&bj| ai * bj))
        .take(fmt.p)
        .collect())
}

/// Numerical rank of the span of `vectors`: singular values above `tol · σ_1`.
pub fn span_dim(vectors: &[Vec<f64>], tol: f64) -> Result<usize> {
    if tol <= 0.0 {
        return domain("span tolerance must be positive");
    }
    let Some(first) = vectors.first() else {
        return Ok(0);
    };
    let dim = first.len();
    if vectors.iter().any(|v| v.len() != dim) {
        return domain("vectors have different lengths");
    }
    let cols: Vec<DVector<f64>> = vectors.iter().map(|v| DVector::from_column_slice(v)).collect();
    let mat = DMatrix::from_columns(&cols);
    Ok(linalg::numerical_rank(&mat, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        crate::random::gaussian_matrix(rng, r, c)
    }

    #[test]
    fn format_dimensions() {
        let f = Format::critical(3, 5).unwrap();
        assert_eq!((f.p, f.u), (9, 6));
        assert!(Format::critical(2, 5).is_err());
        assert!(Format::critical(5, 4).is_err());
        assert!(Format::general(3, 3, 8).is_ok());
        assert!(Format::general(3, 3, 4).is_err());
        assert!(Format::general(3, 3, 10).is_err());
    }

    #[test]
    fn flatten_small_examples() {
        let t = Tensor3::from_slices(&[DMatrix::identity(2, 2), DMatrix::zeros(2, 2)]).unwrap();
        let fl1 = t.flatten(Flattening::Fl1);
        assert_eq!(
            fl1,
            DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0])
        );
        let fl2 = t.flatten(Flattening::Fl2);
        assert_eq!(fl2.shape(), (4, 2));

        let r1 = Tensor3::outer(&[1.0, 2.0, -1.0], &[0.5, 3.0], &[1.0, -2.0, 4.0, 1.0]);
        assert_eq!(linalg::numerical_rank(&r1.flatten(Flattening::Fl1), 1e-12), 1);
        assert_eq!(linalg::numerical_rank(&r1.flatten(Flattening::Fl2), 1e-12), 1);
    }

    #[test]
    fn base_tensor_three_three() {
        let a = make_base_tensor(3, 3).unwrap();
        assert_eq!(a.shape, [4, 3, 3]);
        let a1 = a.slice(0);
        let a2 = a.slice(1);
        let a3 = a.slice(2);
        for j in 0..3 {
            assert_eq!(a1[(j, j)], 1.0);
            assert_eq!(a2[(j + 1, j)], 1.0);
        }
        assert_eq!(a1.iter().filter(|x| **x != 0.0).count(), 3);
        assert_eq!(a2.iter().filter(|x| **x != 0.0).count(), 3);
        let expect3 = DMatrix::from_row_slice(
            4,
            3,
            &[0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        );
        assert_eq!(a3, expect3);
        let fl1 = a.flatten(Flattening::Fl1);
        assert_eq!(fl1.shape(), (4, 9));
        assert_eq!(fl1.columns(6, 3).into_owned(), expect3);
    }

    #[test]
    fn base_tensor_shapes_and_entries() {
        for n in 3..=8 {
            for m in 3..=n {
                let a = make_base_tensor(m, n).unwrap();
                assert_eq!(a.shape, [m + n - 2, n, m]);
                assert!(a.data.iter().all(|x| [-1.0, 0.0, 1.0].contains(x)));
                for k in 0..m - 1 {
                    assert_eq!(a.slice(k).iter().filter(|x| **x != 0.0).count(), n);
                }
            }
        }
        assert_eq!(make_base_tensor(3, 4).unwrap().slice(0).shape(), (5, 4));
    }

    #[test]
    fn start_frame_small_cases() {
        let f = make_start_frame(3, 3).unwrap();
        let a = &f.base;
        let expect = Tensor3::from_slices(&[a.slice(2), -a.slice(1), -a.slice(0)]).unwrap();
        assert_eq!(f.reordered, expect);
        assert_eq!(f.trailing_block(), -DMatrix::<f64>::identity(4, 4));

        let f = make_start_frame(4, 4).unwrap();
        let a = &f.base;
        let expect =
            Tensor3::from_slices(&[a.slice(1), a.slice(3), -a.slice(2), -a.slice(0)]).unwrap();
        assert_eq!(f.reordered, expect);
        assert_eq!(f.perm, vec![4, 5, 0, 1, 2, 3]);
        assert_eq!(mu(&f.w0, f.format).unwrap(), f.aprime);
    }

    #[test]
    fn start_frame_exact_for_small_formats() {
        for n in 3..=8 {
            for m in 3..=n {
                let f = make_start_frame(m, n).unwrap();
                let pa = f.reordered.transform(&f.perm_matrix(), &DMatrix::identity(n, n)).unwrap();
                assert_eq!(pa, f.aprime);
                assert_eq!(f.trailing_block(), -DMatrix::<f64>::identity(f.format.u, f.format.u));
                assert_eq!(rho(&f.base, &f.perm), f.aprime);
            }
        }
    }

    #[test]
    fn round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (m, n) in [(3, 3), (3, 5), (4, 5)] {
            let fmt = Format::critical(m, n).unwrap();
            for _ in 0..20 {
                let w = gaussian_matrix(&mut rng, fmt.u, fmt.p);
                let back = sigma(&tau(&w, fmt).unwrap(), fmt, CHART_CONDITION_LIMIT).unwrap();
                assert!((back - &w).amax() < 1e-10);
                let back = nu(&mu(&w, fmt).unwrap(), fmt, CHART_CONDITION_LIMIT).unwrap();
                assert!((back - &w).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_chart_images() {
        let fmt = Format::critical(3, 3).unwrap();
        let zero = DMatrix::zeros(fmt.u, fmt.p);
        let t = tau(&zero, fmt).unwrap();
        let mut expect = DMatrix::zeros(fmt.m * fmt.n, fmt.p);
        expect.view_mut((0, 0), (fmt.p, fmt.p)).fill_with_identity();
        assert_eq!(t.flatten(Flattening::Fl2), expect);
        let y = mu(&zero, fmt).unwrap();
        let fl = y.flatten(Flattening::Fl1);
        assert_eq!(fl.columns(0, fmt.p).amax(), 0.0);
        assert_eq!(fl.columns(fmt.p, fmt.u).into_owned(), -DMatrix::<f64>::identity(fmt.u, fmt.u));
    }

    #[test]
    fn sigma_rejects_singular_block() {
        let fmt = Format::critical(3, 3).unwrap();
        let t = Tensor3::zeros(fmt.t_shape());
        assert!(matches!(
            sigma(&t, fmt, CHART_CONDITION_LIMIT),
            Err(Error::ChartViolation { .. })
        ));
        let y = Tensor3::zeros(fmt.y_shape());
        assert!(matches!(
            nu(&y, fmt, CHART_CONDITION_LIMIT),
            Err(Error::ChartViolation { .. })
        ));
    }

    #[test]
    fn pencil_basics() {
        let a = make_base_tensor(3, 4).unwrap();
        for k in 0..3 {
            let mut e = vec![0.0; 3];
            e[k] = 1.0;
            assert_eq!(pencil_eval(&e, &a).unwrap(), a.slice(k));
        }
        assert_eq!(pencil_eval(&[0.0; 3], &a).unwrap().amax(), 0.0);
        assert!(pencil_eval(&[1.0; 2], &a).is_err());
    }

    #[test]
    fn psi_examples() {
        let fmt = Format::critical(3, 3).unwrap();
        assert_eq!(
            psi(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], fmt).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert!(psi(&[0.0, 0.0, 1.0], &[1.0, 2.0, 3.0], fmt)
            .unwrap()
            .iter()
            .all(|x| *x == 0.0));
        assert!(psi(&[0.0; 3], &[1.0, 2.0, 3.0], fmt).unwrap().iter().all(|x| *x == 0.0));
        let v = psi(&[1.0, 2.0, 3.0], &[1.0, -1.0, 5.0], fmt).unwrap();
        assert_eq!(v, vec![1.0, -1.0, 5.0, 2.0, -2.0]);
    }

    #[test]
    fn span_dim_examples() {
        let e1 = vec![1.0, 0.0, 0.0, 0.0, 0.0];
        let e2 = vec![0.0, 1.0, 0.0, 0.0, 0.0];
        assert_eq!(span_dim(&[e1.clone(), e2], 1e-8).unwrap(), 2);
        let v = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let v2: Vec<f64> = v.iter().map(|x| 2.0 * x).collect();
        assert_eq!(span_dim(&[v, v2], 1e-8).unwrap(), 1);
        assert_eq!(span_dim(&[], 1e-8).unwrap(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = gaussian_matrix(&mut rng, 7, 7);
        let vs: Vec<Vec<f64>> = m.column_iter().map(|c| c.iter().copied().collect()).collect();
        assert_eq!(span_dim(&vs, 1e-8).unwrap(), 7);
        assert!(span_dim(&vs, 0.0).is_err());
    }

    #[test]
    fn remap_matches_reorder() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(remap_point(&a), vec![2.0, 3.0, 5.0, -4.0, -1.0]);
        assert_eq!(remap_point(&[1.0, 2.0, 3.0]), vec![3.0, -2.0, -1.0]);
    }
}
