//! Minimal dense-tensor kernel layer.
//!
//! Tensors are row-major, immutable after construction, and carry between
//! one and four dimensions. Every operation returns a fresh tensor; inputs
//! are never mutated. Internal parallelism (row-parallel matmul via rayon)
//! is deterministic for any worker count because each output row is reduced
//! in a fixed sequential order by exactly one worker.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

/// Additive logit sentinel marking disallowed attention positions.
///
/// Finite rather than `-inf` so gradients through masked positions are exact
/// zeros instead of NaN. `exp(x + MASK_SENTINEL - rowmax)` underflows to 0.0
/// for any realistic logit `x`, so masked positions get weight exactly 0.
pub const MASK_SENTINEL: f64 = -1e30;

/// Rows whose maximum logit falls at or below this are treated as fully
/// masked (every entry carries the sentinel).
const FULLY_MASKED_THRESHOLD: f64 = MASK_SENTINEL * 0.5;

/// Below this many scalar multiply-adds a matmul stays on one thread;
/// rayon's spawn overhead beats the win on small operands.
const PAR_MIN_WORK: usize = 1 << 16;

/// Dense row-major tensor of `f32` or `f64` values; `f64` by default.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S: Scalar = f64> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    /// Build a tensor from a flat row-major buffer.
    pub fn from_vec(shape: Vec<usize>, data: Vec<S>) -> Result<Self> {
        validate_shape(&shape)?;
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::InvalidShape {
                op: "from_vec",
                detail: format!("shape implies {expected} elements, buffer has {}", data.len()),
                shape,
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        validate_shape(&shape)?;
        let n: usize = shape.iter().product();
        Ok(Self {
            shape,
            data: vec![S::ZERO; n],
        })
    }

    /// Entries drawn uniformly from `[-s, s]` with `s = 1/sqrt(fan_in)`,
    /// reproducible from the generator state.
    pub fn seeded_uniform(shape: Vec<usize>, rng: &mut SeededRng, fan_in: usize) -> Result<Self> {
        validate_shape(&shape)?;
        if fan_in == 0 {
            return Err(Error::InvalidArgument("fan_in must be >= 1".into()));
        }
        let bound = 1.0 / (fan_in as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| S::from_f64(rng.uniform(-bound, bound)))
            .collect();
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Number of rows of a 2-D tensor.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Number of columns of a 2-D tensor.
    pub fn cols(&self) -> usize {
        self.shape[self.shape.len() - 1]
    }

    /// Row `i` of a 2-D tensor as a contiguous slice.
    pub fn row(&self, i: usize) -> &[S] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    /// Element of a 2-D tensor.
    pub fn get2(&self, i: usize, j: usize) -> S {
        self.data[i * self.cols() + j]
    }

    fn require_2d(&self, op: &'static str) -> Result<(usize, usize)> {
        if self.shape.len() != 2 {
            return Err(Error::InvalidShape {
                op,
                detail: "expected a 2-D tensor".into(),
                shape: self.shape.clone(),
            });
        }
        Ok((self.shape[0], self.shape[1]))
    }

    /// Standard matrix product `self[M,K] x rhs[K,P] -> [M,P]`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        let (m, k) = self.require_2d("matmul")?;
        let (k2, p) = rhs.require_2d("matmul")?;
        if k != k2 {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        let mut out = vec![S::ZERO; m * p];
        let body = |(i, out_row): (usize, &mut [S])| {
            let a_row = &self.data[i * k..(i + 1) * k];
            for (l, &a_il) in a_row.iter().enumerate() {
                let b_row = &rhs.data[l * p..(l + 1) * p];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a_il * b;
                }
            }
        };
        if m * k * p >= PAR_MIN_WORK {
            out.par_chunks_mut(p).enumerate().for_each(body);
        } else {
            out.chunks_mut(p).enumerate().for_each(body);
        }
        Tensor::from_vec(vec![m, p], out)
    }

    /// Product against a transposed right operand:
    /// `self[M,K] x rhs[P,K]^T -> [M,P]`. Realizes `Q K^T` without
    /// materializing the transpose; both operands are read row-wise.
    pub fn matmul_nt(&self, rhs: &Self) -> Result<Self> {
        let (m, k) = self.require_2d("matmul_nt")?;
        let (p, k2) = rhs.require_2d("matmul_nt")?;
        if k != k2 {
            return Err(Error::ShapeMismatch {
                op: "matmul_nt",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        let mut out = vec![S::ZERO; m * p];
        let body = |(i, out_row): (usize, &mut [S])| {
            let a_row = &self.data[i * k..(i + 1) * k];
            for (j, o) in out_row.iter_mut().enumerate() {
                *o = dot(a_row, &rhs.data[j * k..(j + 1) * k]);
            }
        };
        if m * k * p >= PAR_MIN_WORK {
            out.par_chunks_mut(p).enumerate().for_each(body);
        } else {
            out.chunks_mut(p).enumerate().for_each(body);
        }
        Tensor::from_vec(vec![m, p], out)
    }

    /// Product with a transposed left operand:
    /// `self[M,K]^T x rhs[M,P] -> [K,P]`. Used by the backward pass for
    /// weight gradients; stays single-threaded (correctness path only).
    pub fn matmul_tn(&self, rhs: &Self) -> Result<Self> {
        let (m, k) = self.require_2d("matmul_tn")?;
        let (m2, p) = rhs.require_2d("matmul_tn")?;
        if m != m2 {
            return Err(Error::ShapeMismatch {
                op: "matmul_tn",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        let mut out = vec![S::ZERO; k * p];
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            let b_row = &rhs.data[i * p..(i + 1) * p];
            for (l, &a_il) in a_row.iter().enumerate() {
                let out_row = &mut out[l * p..(l + 1) * p];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a_il * b;
                }
            }
        }
        Tensor::from_vec(vec![k, p], out)
    }

    /// Numerically stable row softmax: per-row max subtraction, then
    /// exp/normalize. A row whose every entry carries the mask sentinel is
    /// rejected rather than silently renormalized.
    pub fn softmax_rows(&self) -> Result<Self> {
        let (m, p) = self.require_2d("softmax_rows")?;
        if p == 0 {
            return Err(Error::InvalidShape {
                op: "softmax_rows",
                detail: "rows must be non-empty".into(),
                shape: self.shape.clone(),
            });
        }
        let threshold = S::from_f64(FULLY_MASKED_THRESHOLD);
        let mut out = vec![S::ZERO; m * p];
        for i in 0..m {
            let row = &self.data[i * p..(i + 1) * p];
            let mut max = row[0];
            for &v in &row[1..] {
                max = max.maximum(v);
            }
            // Comparison written so a NaN max also lands in the error arm.
            let has_live_logit = max > threshold;
            if !has_live_logit {
                return Err(Error::FullyMaskedRow { row: i });
            }
            let out_row = &mut out[i * p..(i + 1) * p];
            let mut sum = S::ZERO;
            for (o, &v) in out_row.iter_mut().zip(row) {
                let e = (v - max).exp();
                *o = e;
                sum += e;
            }
            for o in out_row.iter_mut() {
                *o = *o / sum;
            }
        }
        Tensor::from_vec(vec![m, p], out)
    }

    /// Reshape `[N, h*d] -> [N, h, d]`. Pure reindexing: the row-major
    /// layout is unchanged, element `(n, i, j)` is input `(n, i*d + j)`.
    pub fn split_heads(&self, heads: usize, head_dim: usize) -> Result<Self> {
        let (n, c) = self.require_2d("split_heads")?;
        if heads == 0 || head_dim == 0 || c != heads * head_dim {
            return Err(Error::InvalidShape {
                op: "split_heads",
                detail: format!("columns must equal heads*head_dim = {}*{}", heads, head_dim),
                shape: self.shape.clone(),
            });
        }
        Tensor::from_vec(vec![n, heads, head_dim], self.data.clone())
    }

    /// Inverse of [`Tensor::split_heads`]: `[N, h, d] -> [N, h*d]`.
    pub fn merge_heads(&self) -> Result<Self> {
        if self.shape.len() != 3 {
            return Err(Error::InvalidShape {
                op: "merge_heads",
                detail: "expected a 3-D tensor".into(),
                shape: self.shape.clone(),
            });
        }
        let (n, h, d) = (self.shape[0], self.shape[1], self.shape[2]);
        Tensor::from_vec(vec![n, h * d], self.data.clone())
    }

    /// Elementwise sum; shapes must match exactly.
    pub fn add(&self, rhs: &Self) -> Result<Self> {
        if self.shape != rhs.shape {
            return Err(Error::ShapeMismatch {
                op: "add",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| a + b)
            .collect();
        Tensor::from_vec(self.shape.clone(), data)
    }

    /// Every element multiplied by `factor`.
    pub fn scale(&self, factor: S) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| v * factor).collect(),
        }
    }

    /// `self * factor + rhs` in one pass; shapes must match exactly.
    /// Computes `(v * factor) + r` per element, the same expression the
    /// two-step `scale` + `add` pipeline would evaluate.
    pub fn scale_add(&self, factor: S, rhs: &Self) -> Result<Self> {
        if self.shape != rhs.shape {
            return Err(Error::ShapeMismatch {
                op: "scale_add",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(&v, &r)| v * factor + r)
            .collect();
        Tensor::from_vec(self.shape.clone(), data)
    }

    /// Convert elementwise to another scalar type (used to derive `f32`
    /// benchmark inputs from canonical `f64` data).
    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| T::from_f64(v.to_f64())).collect(),
        }
    }
}

fn validate_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.len() > 4 {
        return Err(Error::InvalidShape {
            op: "shape",
            detail: "tensors carry 1 to 4 dimensions".into(),
            shape: shape.to_vec(),
        });
    }
    if shape.contains(&0) {
        return Err(Error::InvalidShape {
            op: "shape",
            detail: "dimension sizes must be positive".into(),
            shape: shape.to_vec(),
        });
    }
    Ok(())
}

/// Dot product with eight independent accumulator lanes combined in a fixed
/// order: deterministic and wide enough for the auto-vectorizer.
#[inline]
fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = [S::ZERO; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (xs, ys) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            acc[l] += xs[l] * ys[l];
        }
    }
    let mut tail = S::ZERO;
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    let even = (acc[0] + acc[4]) + (acc[2] + acc[6]);
    let odd = (acc[1] + acc[5]) + (acc[3] + acc[7]);
    (even + odd) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::from_vec(shape.to_vec(), data.to_vec()).unwrap()
    }

    /// Independent triple-loop matrix product used as the matmul oracle.
    fn matmul_oracle(a: &Tensor, b: &Tensor) -> Tensor {
        let (m, k) = (a.shape()[0], a.shape()[1]);
        let p = b.shape()[1];
        let mut out = vec![0.0; m * p];
        for i in 0..m {
            for j in 0..p {
                let mut s = 0.0;
                for l in 0..k {
                    s += a.data()[i * k + l] * b.data()[l * p + j];
                }
                out[i * p + j] = s;
            }
        }
        Tensor::from_vec(vec![m, p], out).unwrap()
    }

    #[test]
    fn matmul_identity_returns_lhs() {
        let a = t(&[3, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let eye = t(&[3, 3], &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(a.matmul(&eye).unwrap(), a);
    }

    #[test]
    fn matmul_zero_annihilates() {
        let a = t(&[2, 3], &[1.0, -2.0, 3.0, 4.0, 5.0, -6.0]);
        let z: Tensor = Tensor::zeros(vec![3, 2]).unwrap();
        let prod = a.matmul(&z).unwrap();
        assert!(prod.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matmul_two_by_two_known_product() {
        let a = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let b = t(&[2, 2], &[5.0, 6.0, 7.0, 8.0]);
        // Frozen from the triple-loop oracle.
        let expect = t(&[2, 2], &[19.0, 22.0, 43.0, 50.0]);
        let got = a.matmul(&b).unwrap();
        assert_eq!(got, expect);
        assert_eq!(matmul_oracle(&a, &b), expect);
    }

    #[test]
    fn matmul_matches_oracle_on_random_operands() {
        let mut rng = SeededRng::new(11);
        for &(m, k, p) in &[(4, 7, 5), (1, 16, 3), (9, 2, 9)] {
            let a: Tensor = Tensor::seeded_uniform(vec![m, k], &mut rng, 1).unwrap();
            let b: Tensor = Tensor::seeded_uniform(vec![k, p], &mut rng, 1).unwrap();
            let got = a.matmul(&b).unwrap();
            let want = matmul_oracle(&a, &b);
            for (x, y) in got.data().iter().zip(want.data()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matmul_nt_and_tn_agree_with_plain_matmul() {
        let mut rng = SeededRng::new(5);
        let a: Tensor = Tensor::seeded_uniform(vec![5, 6], &mut rng, 1).unwrap();
        let b: Tensor = Tensor::seeded_uniform(vec![4, 6], &mut rng, 1).unwrap();
        // a x b^T via explicit transpose.
        let mut bt = vec![0.0; 6 * 4];
        for i in 0..4 {
            for j in 0..6 {
                bt[j * 4 + i] = b.data()[i * 6 + j];
            }
        }
        let bt: Tensor = Tensor::from_vec(vec![6, 4], bt).unwrap();
        let want = a.matmul(&bt).unwrap();
        let got = a.matmul_nt(&b).unwrap();
        for (x, y) in got.data().iter().zip(want.data()) {
            assert!((x - y).abs() < 1e-12);
        }

        let c: Tensor = Tensor::seeded_uniform(vec![5, 3], &mut rng, 1).unwrap();
        let mut at = vec![0.0; 6 * 5];
        for i in 0..5 {
            for j in 0..6 {
                at[j * 5 + i] = a.data()[i * 6 + j];
            }
        }
        let at: Tensor = Tensor::from_vec(vec![6, 5], at).unwrap();
        let want = at.matmul(&c).unwrap();
        let got = a.matmul_tn(&c).unwrap();
        for (x, y) in got.data().iter().zip(want.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_dimension_mismatch_names_both_shapes() {
        let a: Tensor = Tensor::zeros(vec![2, 3]).unwrap();
        let b: Tensor = Tensor::zeros(vec![4, 2]).unwrap();
        match a.matmul(&b) {
            Err(Error::ShapeMismatch { lhs, rhs, .. }) => {
                assert_eq!(lhs, vec![2, 3]);
                assert_eq!(rhs, vec![4, 2]);
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn softmax_constant_row_is_uniform() {
        let x = t(&[1, 3], &[4.2, 4.2, 4.2]);
        let s = x.softmax_rows().unwrap();
        for &v in s.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_sentinel_entry_gets_zero_weight() {
        let x = t(&[1, 2], &[0.0, -1e9]);
        let s = x.softmax_rows().unwrap();
        assert!((s.data()[0] - 1.0).abs() < 1e-9);
        assert!(s.data()[1] < 1e-9);
    }

    #[test]
    fn softmax_matches_scalar_oracle() {
        let x = t(&[1, 3], &[1.0, 2.0, 3.0]);
        let s = x.softmax_rows().unwrap();
        // Scalar oracle: direct exp/sum evaluation.
        let exps = [1.0f64.exp(), 2.0f64.exp(), 3.0f64.exp()];
        let sum: f64 = exps.iter().sum();
        for (got, want) in s.data().iter().zip(exps.iter().map(|e| e / sum)) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_rejects_fully_masked_row() {
        let x = t(&[2, 2], &[0.0, 1.0, MASK_SENTINEL, MASK_SENTINEL]);
        match x.softmax_rows() {
            Err(Error::FullyMaskedRow { row }) => assert_eq!(row, 1),
            other => panic!("expected fully masked row error, got {other:?}"),
        }
    }

    #[test]
    fn split_heads_is_pure_reindexing() {
        let x = t(&[2, 4], &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let split = x.split_heads(2, 2).unwrap();
        assert_eq!(split.shape(), &[2, 2, 2]);
        // Element (n, i, j) equals input (n, i*d + j); layout unchanged.
        assert_eq!(split.data(), x.data());
    }

    #[test]
    fn split_single_head_preserves_order() {
        let x = t(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let split = x.split_heads(1, 3).unwrap();
        assert_eq!(split.shape(), &[2, 1, 3]);
        assert_eq!(split.data(), x.data());
        assert_eq!(split.merge_heads().unwrap(), x);
    }

    #[test]
    fn split_merge_round_trip_bit_exact() {
        let mut rng = SeededRng::new(99);
        let x: Tensor = Tensor::seeded_uniform(vec![8, 16], &mut rng, 1).unwrap();
        let back = x.split_heads(4, 4).unwrap().merge_heads().unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn merge_heads_index_oracle() {
        let data: Vec<f64> = (0..24).map(f64::from).collect();
        let x: Tensor = Tensor::from_vec(vec![4, 2, 3], data).unwrap();
        let merged = x.merge_heads().unwrap();
        assert_eq!(merged.shape(), &[4, 6]);
        for n in 0..4 {
            for i in 0..2 {
                for j in 0..3 {
                    assert_eq!(merged.get2(n, i * 3 + j), x.data()[n * 6 + i * 3 + j]);
                }
            }
        }
    }

    #[test]
    fn split_heads_rejects_non_divisible() {
        let x: Tensor = Tensor::zeros(vec![2, 5]).unwrap();
        assert!(x.split_heads(2, 2).is_err());
    }

    #[test]
    fn seeded_uniform_is_deterministic_and_bounded() {
        let shape = vec![16, 8];
        let a: Tensor = Tensor::seeded_uniform(shape.clone(), &mut SeededRng::new(7), 64).unwrap();
        let b: Tensor = Tensor::seeded_uniform(shape, &mut SeededRng::new(7), 64).unwrap();
        assert_eq!(a, b);
        let bound = 1.0 / 8.0;
        assert!(a.data().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn seeded_uniform_mean_is_statistically_zero() {
        let n = 100_000usize;
        let x: Tensor = Tensor::seeded_uniform(vec![n], &mut SeededRng::new(20240601), 1).unwrap();
        let mean: f64 = x.data().iter().sum::<f64>() / n as f64;
        // sigma of U[-1,1] is 1/sqrt(3); allow three standard errors.
        let se = (1.0 / 3.0f64).sqrt() / (n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} exceeds 3 SE {}", 3.0 * se);
    }

    #[test]
    fn shape_rank_limits_enforced() {
        assert!(Tensor::<f64>::zeros(vec![]).is_err());
        assert!(Tensor::<f64>::zeros(vec![1, 1, 1, 1, 1]).is_err());
        assert!(Tensor::<f64>::zeros(vec![2, 0]).is_err());
    }

    #[test]
    fn operations_leave_inputs_untouched() {
        let a = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let b = t(&[2, 2], &[5.0, 6.0, 7.0, 8.0]);
        let a_copy = a.clone();
        let b_copy = b.clone();
        let _ = a.matmul(&b).unwrap();
        let _ = a.softmax_rows().unwrap();
        let _ = a.add(&b).unwrap();
        assert_eq!(a, a_copy);
        assert_eq!(b, b_copy);
    }
}
