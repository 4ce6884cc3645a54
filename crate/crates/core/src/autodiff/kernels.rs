//! Forward and backward kernels shared by the recording tape and the eager executor.

use super::scalar::matmul;
use super::{Real, Tensor};
use crate::error::{Error, Result};

fn require_matrix<T: Real>(t: &Tensor<T>, what: &str) -> Result<(usize, usize)> {
    if t.shape().len() != 2 {
        return Err(Error::dim(format!("{what} must be rank 2, got {:?}", t.shape())));
    }
    Ok((t.shape()[0], t.shape()[1]))
}

pub(crate) fn affine<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: Option<&Tensor<T>>) -> Result<Tensor<T>> {
    let (n, cin) = require_matrix(x, "affine input")?;
    let (win, cout) = require_matrix(w, "affine weight")?;
    if win != cin {
        return Err(Error::dim(format!("affine: input width {cin} vs weight rows {win}")));
    }
    let mut out = vec![T::zero(); n * cout];
    matmul(x.data(), n, cin, false, w.data(), cin, cout, false, &mut out, false);
    if let Some(b) = b {
        if b.len() != cout {
            return Err(Error::dim(format!("affine: bias length {} vs width {cout}", b.len())));
        }
        for row in out.chunks_exact_mut(cout) {
            for (o, &bv) in row.iter_mut().zip(b.data()) {
                *o = *o + bv;
            }
        }
    }
    Tensor::matrix(n, cout, out)
}

pub(crate) struct AffineGrads<T> {
    pub dx: Option<Vec<T>>,
    pub dw: Vec<T>,
    pub db: Vec<T>,
}

pub(crate) fn affine_backward<T: Real>(x: &Tensor<T>, w: &Tensor<T>, dy: &[T], need_dx: bool) -> AffineGrads<T> {
    let (n, cin) = (x.rows(), x.cols());
    let cout = w.cols();
    let mut dw = vec![T::zero(); cin * cout];
    matmul(x.data(), n, cin, true, dy, n, cout, false, &mut dw, false);
    let mut db = vec![T::zero(); cout];
    for row in dy.chunks_exact(cout) {
        for (d, &g) in db.iter_mut().zip(row) {
            *d = *d + g;
        }
    }
    let dx = need_dx.then(|| {
        let mut dx = vec![T::zero(); n * cin];
        matmul(dy, n, cout, false, w.data(), cin, cout, true, &mut dx, false);
        dx
    });
    AffineGrads { dx, dw, db }
}

/// Output of a normalization forward pass plus what backward needs.
pub(crate) struct NormForward<T> {
    pub out: Tensor<T>,
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
    /// Batch statistics (train mode only): mean and unbiased variance.
    pub stats: Option<(Vec<T>, Vec<T>)>,
}

pub(crate) fn batch_norm<T: Real>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running: Option<(&[T], &[T])>,
    eps: T,
) -> Result<NormForward<T>> {
    let (n, c) = require_matrix(x, "normalization input")?;
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    if gamma.len() != c || beta.len() != c {
        return Err(Error::dim(format!("normalization: {c} channels vs affine lengths {}/{}", gamma.len(), beta.len())));
    }
    let (mean, var, stats) = match running {
        Some((m, v)) => (m.to_vec(), v.to_vec(), None),
        None => {
            let nf = T::from_usize(n).unwrap();
            let mut mean = vec![T::zero(); c];
            for row in x.data().chunks_exact(c) {
                for (m, &v) in mean.iter_mut().zip(row) {
                    *m = *m + v;
                }
            }
            mean.iter_mut().for_each(|m| *m = *m / nf);
            let mut var = vec![T::zero(); c];
            for row in x.data().chunks_exact(c) {
                for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                    let d = v - m;
                    *s = *s + d * d;
                }
            }
            var.iter_mut().for_each(|s| *s = *s / nf);
            let unbiased = if n > 1 {
                let f = nf / (nf - T::one());
                var.iter().map(|&v| v * f).collect()
            } else {
                var.clone()
            };
            let stats = Some((mean.clone(), unbiased));
            (mean, var, stats)
        }
    };
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut xhat = vec![T::zero(); n * c];
    let mut out = vec![T::zero(); n * c];
    for ((xr, hr), or) in x.data().chunks_exact(c).zip(xhat.chunks_exact_mut(c)).zip(out.chunks_exact_mut(c)) {
        for j in 0..c {
            let h = (xr[j] - mean[j]) * inv_std[j];
            hr[j] = h;
            or[j] = gamma.data()[j] * h + beta.data()[j];
        }
    }
    Ok(NormForward { out: Tensor::matrix(n, c, out)?, xhat, inv_std, stats })
}

pub(crate) struct NormGrads<T> {
    pub dx: Vec<T>,
    pub dgamma: Vec<T>,
    pub dbeta: Vec<T>,
}

pub(crate) fn batch_norm_backward<T: Real>(
    dy: &[T],
    xhat: &[T],
    inv_std: &[T],
    gamma: &[T],
    train: bool,
) -> NormGrads<T> {
    let c = gamma.len();
    let n = dy.len() / c;
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for (dr, hr) in dy.chunks_exact(c).zip(xhat.chunks_exact(c)) {
        for j in 0..c {
            dgamma[j] = dgamma[j] + dr[j] * hr[j];
            dbeta[j] = dbeta[j] + dr[j];
        }
    }
    let mut dx = vec![T::zero(); n * c];
    if train {
        // dxhat = dy·γ; Σdxhat = γ·dβ; Σ(dxhat·xhat) = γ·dγ.
        let nf = T::from_usize(n).unwrap();
        for ((dxr, dr), hr) in dx.chunks_exact_mut(c).zip(dy.chunks_exact(c)).zip(xhat.chunks_exact(c)) {
            for j in 0..c {
                let g = gamma[j];
                dxr[j] = inv_std[j] / nf * (nf * dr[j] * g - g * dbeta[j] - hr[j] * g * dgamma[j]);
            }
        }
    } else {
        for (dxr, dr) in dx.chunks_exact_mut(c).zip(dy.chunks_exact(c)) {
            for j in 0..c {
                dxr[j] = dr[j] * gamma[j] * inv_std[j];
            }
        }
    }
    NormGrads { dx, dgamma, dbeta }
}

pub(crate) fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient gated on the forward input being strictly positive.
pub(crate) fn relu_backward<T: Real>(x: &[T], dy: &[T]) -> Vec<T> {
    x.iter().zip(dy).map(|(&v, &g)| if v > T::zero() { g } else { T::zero() }).collect()
}

/// Max over consecutive groups of `k` rows: `[P·k, C] -> [P, C]`.
///
/// Returns the output and, per output element, the winning row offset within its group.
/// Ties keep the lowest offset.
pub(crate) fn max_reduce<T: Real>(x: &Tensor<T>, k: usize) -> Result<(Tensor<T>, Vec<u32>)> {
    if k == 0 {
        return Err(Error::EmptyNeighborhood);
    }
    let rows = x.rows();
    let c = x.cols();
    if rows % k != 0 {
        return Err(Error::dim(format!("max_reduce: {rows} rows not divisible by k = {k}")));
    }
    let p = rows / k;
    let mut out = vec![T::zero(); p * c];
    let mut arg = vec![0u32; p * c];
    let d = x.data();
    for g in 0..p {
        let base = g * k;
        let o = &mut out[g * c..(g + 1) * c];
        let a = &mut arg[g * c..(g + 1) * c];
        o.copy_from_slice(&d[base * c..(base + 1) * c]);
        for j in 1..k {
            let row = &d[(base + j) * c..(base + j + 1) * c];
            for ch in 0..c {
                if row[ch] > o[ch] {
                    o[ch] = row[ch];
                    a[ch] = j as u32;
                }
            }
        }
    }
    Ok((Tensor::matrix(p, c, out)?, arg))
}

pub(crate) fn max_reduce_backward<T: Real>(dy: &[T], arg: &[u32], k: usize, c: usize) -> Vec<T> {
    let p = dy.len() / c;
    let mut dx = vec![T::zero(); p * k * c];
    for g in 0..p {
        for ch in 0..c {
            let j = arg[g * c + ch] as usize;
            dx[(g * k + j) * c + ch] = dy[g * c + ch];
        }
    }
    dx
}

/// Gathers rows of `x` by `index` and appends constant columns `extra` (row-aligned with the output).
pub(crate) fn gather<T: Real>(x: &Tensor<T>, index: &[u32], extra: Option<&Tensor<T>>) -> Result<Tensor<T>> {
    let rows = x.rows();
    let c = x.cols();
    let e = match extra {
        Some(t) => {
            if t.rows() != index.len() {
                return Err(Error::dim(format!("gather: {} extra rows vs {} indices", t.rows(), index.len())));
            }
            t.cols()
        }
        None => 0,
    };
    let w = c + e;
    let mut out = vec![T::zero(); index.len() * w];
    for (m, &i) in index.iter().enumerate() {
        let i = i as usize;
        if i >= rows {
            return Err(Error::dim(format!("gather: index {i} out of range for {rows} rows")));
        }
        let o = &mut out[m * w..(m + 1) * w];
        o[..c].copy_from_slice(x.row(i));
        if let Some(t) = extra {
            o[c..].copy_from_slice(t.row(m));
        }
    }
    Tensor::matrix(index.len(), w, out)
}

pub(crate) fn gather_backward<T: Real>(dy: &[T], index: &[u32], rows: usize, c: usize, w: usize) -> Vec<T> {
    let mut dx = vec![T::zero(); rows * c];
    for (m, &i) in index.iter().enumerate() {
        let dst = &mut dx[i as usize * c..(i as usize + 1) * c];
        for (d, &g) in dst.iter_mut().zip(&dy[m * w..m * w + c]) {
            *d = *d + g;
        }
    }
    dx
}

/// `out[t] = Σ_j weights[t·fan + j] · x[index[t·fan + j]]`.
pub(crate) fn weighted_gather<T: Real>(x: &Tensor<T>, index: &[u32], weights: &[T], fan: usize) -> Result<Tensor<T>> {
    if fan == 0 || index.len() != weights.len() || index.len() % fan != 0 {
        return Err(Error::dim("weighted_gather: inconsistent index/weight tables"));
    }
    let c = x.cols();
    let t = index.len() / fan;
    let mut out = vec![T::zero(); t * c];
    for r in 0..t {
        let o = &mut out[r * c..(r + 1) * c];
        for j in 0..fan {
            let i = index[r * fan + j] as usize;
            if i >= x.rows() {
                return Err(Error::dim(format!("weighted_gather: index {i} out of range")));
            }
            let w = weights[r * fan + j];
            for (ov, &xv) in o.iter_mut().zip(x.row(i)) {
                *ov = *ov + w * xv;
            }
        }
    }
    Tensor::matrix(t, c, out)
}

pub(crate) fn weighted_gather_backward<T: Real>(dy: &[T], index: &[u32], weights: &[T], fan: usize, rows: usize, c: usize) -> Vec<T> {
    let mut dx = vec![T::zero(); rows * c];
    for (m, (&i, &w)) in index.iter().zip(weights).enumerate() {
        let r = m / fan;
        let dst = &mut dx[i as usize * c..(i as usize + 1) * c];
        for (d, &g) in dst.iter_mut().zip(&dy[r * c..(r + 1) * c]) {
            *d = *d + w * g;
        }
    }
    dx
}

pub(crate) fn concat_cols<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.rows() != b.rows() {
        return Err(Error::dim(format!("concat: {} rows vs {}", a.rows(), b.rows())));
    }
    let (ca, cb) = (a.cols(), b.cols());
    let mut out = Vec::with_capacity(a.rows() * (ca + cb));
    for r in 0..a.rows() {
        out.extend_from_slice(a.row(r));
        out.extend_from_slice(b.row(r));
    }
    Tensor::matrix(a.rows(), ca + cb, out)
}

pub(crate) fn split_cols<T: Real>(dy: &[T], ca: usize, cb: usize) -> (Vec<T>, Vec<T>) {
    let w = ca + cb;
    let n = dy.len() / w;
    let mut da = Vec::with_capacity(n * ca);
    let mut db = Vec::with_capacity(n * cb);
    for row in dy.chunks_exact(w) {
        da.extend_from_slice(&row[..ca]);
        db.extend_from_slice(&row[ca..]);
    }
    (da, db)
}

pub(crate) fn add<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return Err(Error::dim(format!("add: {:?} vs {:?}", a.shape(), b.shape())));
    }
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x + y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub(crate) fn mul_const<T: Real>(x: &Tensor<T>, c: &[T]) -> Result<Tensor<T>> {
    if c.len() != x.len() {
        return Err(Error::dim("mul_const: length mismatch"));
    }
    let data = x.data().iter().zip(c).map(|(&a, &b)| a * b).collect();
    Tensor::new(x.shape().to_vec(), data)
}

/// Scalar reduction whose input gradient is known at forward time.
pub(crate) struct ScalarWithGrad<T> {
    pub value: T,
    pub grad: Vec<T>,
}

pub(crate) fn sum_squares<T: Real>(x: &Tensor<T>) -> ScalarWithGrad<T> {
    let value = x.data().iter().map(|&v| v * v).sum();
    let two = T::of(2.0);
    ScalarWithGrad { value, grad: x.data().iter().map(|&v| two * v).collect() }
}

pub(crate) fn dot_const<T: Real>(x: &Tensor<T>, c: &[T]) -> Result<ScalarWithGrad<T>> {
    if c.len() != x.len() {
        return Err(Error::dim("dot_const: length mismatch"));
    }
    let value = x.data().iter().zip(c).map(|(&a, &b)| a * b).sum();
    Ok(ScalarWithGrad { value, grad: c.to_vec() })
}

fn log_softmax_row<T: Real>(row: &[T], out: &mut [T]) {
    let m = row.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = row.iter().map(|&v| (v - m).exp()).sum::<T>().ln() + m;
    for (o, &v) in out.iter_mut().zip(row) {
        *o = v - lse;
    }
}

fn check_targets<T: Real>(logits: &Tensor<T>, targets: &[usize], weights: Option<&[T]>) -> Result<(usize, usize)> {
    let (n, k) = require_matrix(logits, "logits")?;
    if k < 2 {
        return Err(Error::dim("classification needs at least two classes"));
    }
    if targets.len() != n {
        return Err(Error::dim(format!("{} targets for {n} rows", targets.len())));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::dim("row weight length mismatch"));
        }
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= k) {
        return Err(Error::Label { label: bad, classes: k });
    }
    Ok((n, k))
}

fn weight_total<T: Real>(weights: Option<&[T]>, n: usize) -> Result<T> {
    let total = match weights {
        Some(w) => w.iter().copied().sum(),
        None => T::from_usize(n).unwrap(),
    };
    if total <= T::zero() {
        return Err(Error::Contract("loss over zero weighted rows".into()));
    }
    Ok(total)
}

/// Cross entropy against `(1-ε)·onehot + ε/K`, averaged over rows (optionally weighted).
pub(crate) fn smoothed_cross_entropy<T: Real>(
    logits: &Tensor<T>,
    targets: &[usize],
    eps: T,
    weights: Option<&[T]>,
) -> Result<ScalarWithGrad<T>> {
    let (n, k) = check_targets(logits, targets, weights)?;
    let total = weight_total(weights, n)?;
    let kf = T::from_usize(k).unwrap();
    let off = eps / kf;
    let on = T::one() - eps + off;
    let mut lsm = vec![T::zero(); k];
    let mut grad = vec![T::zero(); n * k];
    let mut loss = T::zero();
    for r in 0..n {
        let w = weights.map_or(T::one(), |w| w[r]);
        if w == T::zero() {
            continue;
        }
        log_softmax_row(logits.row(r), &mut lsm);
        let scale = w / total;
        for j in 0..k {
            let q = if j == targets[r] { on } else { off };
            loss = loss - scale * q * lsm[j];
            grad[r * k + j] = scale * (lsm[j].exp() - q);
        }
    }
    Ok(ScalarWithGrad { value: loss, grad })
}

/// Poly-1 focal loss: `-α(1-p)^γ ln p + ε₁·α·(1-p)^{γ+1}` averaged over rows.
pub(crate) fn poly_focal<T: Real>(
    logits: &Tensor<T>,
    targets: &[usize],
    gamma: T,
    alpha: T,
    eps1: T,
    weights: Option<&[T]>,
) -> Result<ScalarWithGrad<T>> {
    let (n, k) = check_targets(logits, targets, weights)?;
    let total = weight_total(weights, n)?;
    let mut lsm = vec![T::zero(); k];
    let mut grad = vec![T::zero(); n * k];
    let mut loss = T::zero();
    for r in 0..n {
        let w = weights.map_or(T::one(), |w| w[r]);
        if w == T::zero() {
            continue;
        }
        log_softmax_row(logits.row(r), &mut lsm);
        let t = targets[r];
        let logp = lsm[t];
        let p = logp.exp();
        let q = T::one() - p;
        let scale = w / total;
        let focal_w = q.powf(gamma);
        loss = loss + scale * (-alpha * focal_w * logp + eps1 * alpha * q.powf(gamma + T::one()));
        // dL/dp, then chain through p = softmax_t.
        let dq_pow = if gamma == T::zero() {
            T::zero()
        } else if q > T::zero() {
            gamma * q.powf(gamma - T::one())
        } else {
            T::zero()
        };
        let dl_dp = alpha * (dq_pow * logp - focal_w / p) - eps1 * alpha * (gamma + T::one()) * focal_w;
        for j in 0..k {
            let pj = lsm[j].exp();
            let dp_dz = if j == t { p * (T::one() - p) } else { -p * pj };
            grad[r * k + j] = scale * dl_dp * dp_dz;
        }
    }
    Ok(ScalarWithGrad { value: loss, grad })
}
