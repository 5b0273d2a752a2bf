//! Dense row-major `f64` tensors.
//!
//! Entries are finite or negative infinity. Negative infinity is the identity
//! of the max-plus "addition" and may appear in max-plus weights; positive
//! infinity and NaN are rejected at construction.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{arg_err, dim_err, Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Integer tensor produced by index-valued reductions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Indices {
    shape: Vec<usize>,
    data: Vec<usize>,
}

impl Indices {
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[usize] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.data
    }
}

#[inline]
pub(crate) fn is_legal(v: f64) -> bool {
    v.is_finite() || v == f64::NEG_INFINITY
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(dim_err!("shape {shape:?} has a zero dimension"));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(dim_err!("shape {shape:?} needs {len} values, got {}", data.len()));
        }
        if let Some(pos) = data.iter().position(|&v| !is_legal(v)) {
            return Err(Error::Domain(alloc::format!(
                "entry {pos} is {} (only finite values and -inf are allowed)",
                data[pos]
            )));
        }
        Ok(Self { shape, data })
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_raw(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        debug_assert!(data.iter().all(|&v| is_legal(v)));
        Self { shape, data }
    }

    /// Output of floating-point arithmetic; overflow to `+inf` or `NaN` is a
    /// numeric fault.
    pub(crate) fn from_arithmetic(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if let Some(pos) = data.iter().position(|&v| !is_legal(v)) {
            return Err(Error::NumericFault(alloc::format!("arithmetic produced {} at entry {pos}", data[pos])));
        }
        Ok(Self::from_raw(shape, data))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::from_raw(shape.to_vec(), vec![0.0; shape.iter().product()])
    }

    pub fn filled(shape: &[usize], value: f64) -> Result<Self> {
        Self::new(shape.to_vec(), vec![value; shape.iter().product()])
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(dim_err!("ragged rows"));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(vec![rows.len(), cols], data)
    }

    pub fn vector(data: Vec<f64>) -> Result<Self> {
        Self::new(vec![data.len()], data)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// `true` when no entry is negative infinity.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(dim_err!("expected a matrix, got shape {:?}", self.shape)),
        }
    }

    fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.shape.len() {
            return Err(dim_err!("index {index:?} does not match shape {:?}", self.shape));
        }
        let mut off = 0;
        for (&i, &d) in index.iter().zip(&self.shape) {
            if i >= d {
                return Err(dim_err!("index {index:?} out of bounds for shape {:?}", self.shape));
            }
            off = off * d + i;
        }
        Ok(off)
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[self.offset(index)?])
    }

    pub fn set(&mut self, index: &[usize], value: f64) -> Result<()> {
        if !is_legal(value) {
            return Err(Error::Domain(alloc::format!("cannot store {value}")));
        }
        let off = self.offset(index)?;
        self.data[off] = value;
        Ok(())
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() || shape.contains(&0) {
            return Err(dim_err!("cannot reshape {:?} into {shape:?}", self.shape));
        }
        Ok(Self::from_raw(shape.to_vec(), self.data.clone()))
    }

    /// Row `i` of a matrix.
    pub fn row(&self, i: usize) -> &[f64] {
        let cols = self.shape[1..].iter().product::<usize>();
        &self.data[i * cols..(i + 1) * cols]
    }

    /// Column `j` of a matrix, copied.
    pub fn column(&self, j: usize) -> Result<Vec<f64>> {
        let (r, c) = self.dims2()?;
        if j >= c {
            return Err(dim_err!("column {j} out of range for {c} columns"));
        }
        Ok((0..r).map(|i| self.data[i * c + j]).collect())
    }

    /// Gathers the listed leading-axis slices into a new tensor.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(dim_err!("empty row selection"));
        }
        let n = self.shape[0];
        let stride = self.data.len() / n;
        let mut data = Vec::with_capacity(rows.len() * stride);
        for &r in rows {
            if r >= n {
                return Err(dim_err!("row {r} out of range for {n} rows"));
            }
            data.extend_from_slice(&self.data[r * stride..(r + 1) * stride]);
        }
        let mut shape = self.shape.clone();
        shape[0] = rows.len();
        Ok(Self::from_raw(shape, data))
    }

    /// Gathers the listed columns of a matrix.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let (r, c) = self.dims2()?;
        if cols.is_empty() {
            return Err(dim_err!("empty column selection"));
        }
        if let Some(&bad) = cols.iter().find(|&&j| j >= c) {
            return Err(dim_err!("column {bad} out of range for {c} columns"));
        }
        let mut data = Vec::with_capacity(r * cols.len());
        for i in 0..r {
            let row = &self.data[i * c..(i + 1) * c];
            data.extend(cols.iter().map(|&j| row[j]));
        }
        Ok(Self::from_raw(vec![r, cols.len()], data))
    }

    pub fn transpose2(&self) -> Result<Self> {
        let (r, c) = self.dims2()?;
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = self.data[i * c + j];
            }
        }
        Ok(Self::from_raw(vec![c, r], data))
    }

    /// Adds `value` to every entry (`-inf` stays `-inf`).
    pub fn add_scalar(&self, value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::Domain(alloc::format!("cannot shift by {value}")));
        }
        Self::from_arithmetic(self.shape.clone(), self.data.iter().map(|v| v + value).collect())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.shape != other.shape {
            return Err(dim_err!("shapes {:?} and {:?} differ", self.shape, other.shape));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| if a == b { 0.0 } else { (a - b).abs() })
            .fold(0.0, f64::max))
    }
}

fn require_finite(t: &Tensor, what: &str) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(alloc::format!("{what} contains -inf")))
    }
}

/// Real matrix product `a · b`.
///
/// Rows of `a` are swept left to right and zero entries of `a` are skipped,
/// so every output entry accumulates its terms in increasing inner index.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, n) = a.dims2()?;
    let (n2, p) = b.dims2()?;
    if n != n2 {
        return Err(dim_err!("matmul inner dimensions differ: {m}x{n} by {n2}x{p}"));
    }
    require_finite(a, "left matmul operand")?;
    require_finite(b, "right matmul operand")?;
    let mut out = vec![0.0; m * p];
    for i in 0..m {
        let arow = &a.data[i * n..(i + 1) * n];
        let orow = &mut out[i * p..(i + 1) * p];
        for (k, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[k * p..(k + 1) * p];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::from_arithmetic(vec![m, p], out)
}

/// `aᵀ · b` without materializing the transpose.
pub fn matmul_tn(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, n) = a.dims2()?;
    let (m2, p) = b.dims2()?;
    if m != m2 {
        return Err(dim_err!("matmul_tn leading dimensions differ: {m}x{n} and {m2}x{p}"));
    }
    require_finite(a, "left matmul operand")?;
    require_finite(b, "right matmul operand")?;
    let mut out = vec![0.0; n * p];
    for r in 0..m {
        let arow = &a.data[r * n..(r + 1) * n];
        let brow = &b.data[r * p..(r + 1) * p];
        if brow.iter().all(|&v| v == 0.0) {
            continue;
        }
        for (i, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[i * p..(i + 1) * p];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::from_arithmetic(vec![n, p], out)
}

/// `a · bᵀ` without materializing the transpose.
pub fn matmul_nt(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, n) = a.dims2()?;
    let (p, n2) = b.dims2()?;
    if n != n2 {
        return Err(dim_err!("matmul_nt inner dimensions differ: {m}x{n} and {p}x{n2}"));
    }
    require_finite(a, "left matmul operand")?;
    require_finite(b, "right matmul operand")?;
    let mut out = vec![0.0; m * p];
    for i in 0..m {
        let arow = &a.data[i * n..(i + 1) * n];
        for j in 0..p {
            let brow = &b.data[j * n..(j + 1) * n];
            out[i * p + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    Tensor::from_arithmetic(vec![m, p], out)
}

/// Index of the maximum along `axis`; ties go to the lowest index.
///
/// The output drops `axis` from the shape. A slice made only of `-inf` has
/// no meaningful maximum and is reported as an error.
pub fn argmax_axis(t: &Tensor, axis: usize) -> Result<Indices> {
    let rank = t.rank();
    if axis >= rank {
        return Err(dim_err!("axis {axis} out of range for rank {rank}"));
    }
    let outer: usize = t.shape[..axis].iter().product();
    let len = t.shape[axis];
    let inner: usize = t.shape[axis + 1..].iter().product();
    let mut out = Vec::with_capacity(outer * inner);
    for o in 0..outer {
        for i in 0..inner {
            let base = o * len * inner + i;
            let mut best = 0;
            let mut best_v = t.data[base];
            for a in 1..len {
                let v = t.data[base + a * inner];
                if v > best_v {
                    best = a;
                    best_v = v;
                }
            }
            if best_v == f64::NEG_INFINITY {
                return Err(Error::DegenerateSlice(alloc::format!(
                    "slice (outer {o}, inner {i}) along axis {axis} is all -inf"
                )));
            }
            out.push(best);
        }
    }
    let mut shape = t.shape.clone();
    shape.remove(axis);
    Ok(Indices { shape, data: out })
}

/// I.i.d. uniform draws in `[lo, hi)`.
pub fn seeded_uniform(rng: &mut SeededRng, shape: &[usize], lo: f64, hi: f64) -> Result<Tensor> {
    if lo.partial_cmp(&hi) != Some(core::cmp::Ordering::Less) {
        return Err(arg_err!("seeded_uniform needs lo < hi, got [{lo}, {hi})"));
    }
    if shape.is_empty() || shape.contains(&0) {
        return Err(dim_err!("invalid shape {shape:?}"));
    }
    let n = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    for _ in 0..n {
        data.push(rng.uniform(lo, hi)?);
    }
    Ok(Tensor::from_raw(shape.to_vec(), data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_matmul(a: &Tensor, b: &Tensor) -> Vec<f64> {
        let (m, n) = a.dims2().unwrap();
        let (_, p) = b.dims2().unwrap();
        let mut out = vec![0.0; m * p];
        for i in 0..m {
            for j in 0..p {
                let mut s = 0.0;
                for k in 0..n {
                    s += a.get(&[i, k]).unwrap() * b.get(&[k, j]).unwrap();
                }
                out[i * p + j] = s;
            }
        }
        out
    }

    fn linear_scan_argmax(xs: &[f64]) -> usize {
        let mut best = 0;
        for (i, &x) in xs.iter().enumerate() {
            if x > xs[best] {
                best = i;
            }
        }
        best
    }

    #[test]
    fn matmul_identity_cases() {
        let a = Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(matmul(&a, &Tensor::identity(2)).unwrap(), a);
        let b = Tensor::from_rows(&[[5.0], [7.0]]).unwrap();
        assert_eq!(matmul(&Tensor::identity(2), &b).unwrap(), b);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = SeededRng::new(3);
        let a = seeded_uniform(&mut rng, &[3, 4], -1.0, 1.0).unwrap();
        let b = seeded_uniform(&mut rng, &[4, 2], -1.0, 1.0).unwrap();
        let got = matmul(&a, &b).unwrap();
        for (g, w) in got.data().iter().zip(naive_matmul(&a, &b)) {
            assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0));
        }
    }

    #[test]
    fn matmul_errors() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 3]);
        assert!(matches!(matmul(&a, &b), Err(Error::Dimension(_))));
        let mut c = Tensor::zeros(&[3, 2]);
        c.set(&[0, 0], f64::NEG_INFINITY).unwrap();
        assert!(matches!(matmul(&a, &c), Err(Error::Domain(_))));
    }

    #[test]
    fn transposed_products_agree_with_explicit_transpose() {
        let mut rng = SeededRng::new(5);
        let a = seeded_uniform(&mut rng, &[5, 3], -1.0, 1.0).unwrap();
        let b = seeded_uniform(&mut rng, &[5, 4], -1.0, 1.0).unwrap();
        let tn = matmul_tn(&a, &b).unwrap();
        let reference = matmul(&a.transpose2().unwrap(), &b).unwrap();
        assert!(tn.max_abs_diff(&reference).unwrap() < 1e-12);
        let c = seeded_uniform(&mut rng, &[4, 3], -1.0, 1.0).unwrap();
        let nt = matmul_nt(&a, &c).unwrap();
        let reference = matmul(&a, &c.transpose2().unwrap()).unwrap();
        assert!(nt.max_abs_diff(&reference).unwrap() < 1e-12);
    }

    #[test]
    fn argmax_examples() {
        let t = Tensor::vector(vec![0.1, 0.9, 0.5]).unwrap();
        assert_eq!(argmax_axis(&t, 0).unwrap().data(), &[1]);
        let t = Tensor::vector(vec![0.7, 0.7]).unwrap();
        assert_eq!(argmax_axis(&t, 0).unwrap().data(), &[0]);
    }

    #[test]
    fn argmax_columns_match_linear_scan() {
        let mut rng = SeededRng::new(11);
        let t = seeded_uniform(&mut rng, &[5, 3], 0.0, 1.0).unwrap();
        let got = argmax_axis(&t, 0).unwrap();
        assert_eq!(got.shape(), &[3]);
        for j in 0..3 {
            assert_eq!(got.data()[j], linear_scan_argmax(&t.column(j).unwrap()));
        }
        let rows = argmax_axis(&t, 1).unwrap();
        for i in 0..5 {
            assert_eq!(rows.data()[i], linear_scan_argmax(t.row(i)));
        }
    }

    #[test]
    fn argmax_degenerate_slice() {
        let t = Tensor::filled(&[2, 2], f64::NEG_INFINITY).unwrap();
        assert!(matches!(argmax_axis(&t, 0), Err(Error::DegenerateSlice(_))));
        let mut t = t;
        t.set(&[1, 0], 3.0).unwrap();
        t.set(&[0, 1], -1.0).unwrap();
        assert_eq!(argmax_axis(&t, 0).unwrap().data(), &[1, 0]);
        assert!(argmax_axis(&t, 2).is_err());
    }

    #[test]
    fn construction_rejects_illegal_values() {
        assert!(Tensor::new(vec![2], vec![1.0, f64::NAN]).is_err());
        assert!(Tensor::new(vec![2], vec![1.0, f64::INFINITY]).is_err());
        assert!(Tensor::new(vec![2], vec![1.0, f64::NEG_INFINITY]).is_ok());
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::new(vec![0, 2], vec![]).is_err());
    }

    #[test]
    fn seeded_uniform_determinism_and_range() {
        let mut r = SeededRng::new(42);
        let a = seeded_uniform(&mut r, &[4, 4], 0.0, 1.0).unwrap();
        let b = seeded_uniform(&mut r, &[4, 4], 0.0, 1.0).unwrap();
        assert_ne!(a, b);
        let mut fresh = SeededRng::new(42);
        assert_eq!(seeded_uniform(&mut fresh, &[4, 4], 0.0, 1.0).unwrap(), a);
        assert!(seeded_uniform(&mut r, &[2], 1.0, 1.0).is_err());
    }

    #[test]
    fn seeded_uniform_mean() {
        let mut r = SeededRng::new(42);
        let t = seeded_uniform(&mut r, &[100_000], 0.0, 1.0).unwrap();
        let mean = t.data().iter().sum::<f64>() / t.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
        assert!(t.data().iter().all(|v| (0.0..1.0).contains(v)));
    }

    proptest! {
        #[test]
        fn matmul_oracle_random_shapes(m in 1usize..64, n in 1usize..64, p in 1usize..64, seed in any::<u64>()) {
            let mut rng = SeededRng::new(seed);
            let a = seeded_uniform(&mut rng, &[m, n], -2.0, 2.0).unwrap();
            let b = seeded_uniform(&mut rng, &[n, p], -2.0, 2.0).unwrap();
            let got = matmul(&a, &b).unwrap();
            for (g, w) in got.data().iter().zip(naive_matmul(&a, &b)) {
                prop_assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0));
            }
        }

        #[test]
        fn argmax_is_first_maximum(values in proptest::collection::vec(-3i32..3, 1..20)) {
            let t = Tensor::vector(values.iter().map(|&v| v as f64).collect()).unwrap();
            let idx = argmax_axis(&t, 0).unwrap().data()[0];
            let best = values[idx];
            prop_assert!(values.iter().all(|&v| v <= best));
            prop_assert!(values[..idx].iter().all(|&v| v < best));
        }
    }
}
