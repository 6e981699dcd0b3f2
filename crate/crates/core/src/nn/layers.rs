//! Differentiable building blocks. Forward functions return whatever the
//! matching backward function needs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::Tensor;
use crate::error::NnError;
use crate::scalar::{gemm, Scalar};

/// Unfolds NHWC input into `[B·H·W, k·k·C]` rows for a same-padded,
/// stride-1 convolution.
fn im2col<T: Scalar>(x: &[T], b: usize, h: usize, w: usize, c: usize, k: usize) -> Vec<T> {
    let pad = k / 2;
    let kc = k * k * c;
    let mut cols = vec![T::zero(); b * h * w * kc];
    for n in 0..b {
        for y in 0..h {
            for xx in 0..w {
                let row = ((n * h + y) * w + xx) * kc;
                for ky in 0..k {
                    let iy = y as isize + ky as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = xx as isize + kx as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let src = ((n * h + iy as usize) * w + ix as usize) * c;
                        let dst = row + (ky * k + kx) * c;
                        cols[dst..dst + c].copy_from_slice(&x[src..src + c]);
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-adds column gradients back to the input.
fn col2im<T: Scalar>(cols: &[T], b: usize, h: usize, w: usize, c: usize, k: usize) -> Vec<T> {
    let pad = k / 2;
    let kc = k * k * c;
    let mut x = vec![T::zero(); b * h * w * c];
    for n in 0..b {
        for y in 0..h {
            for xx in 0..w {
                let row = ((n * h + y) * w + xx) * kc;
                for ky in 0..k {
                    let iy = y as isize + ky as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = xx as isize + kx as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let dst = ((n * h + iy as usize) * w + ix as usize) * c;
                        let src = row + (ky * k + kx) * c;
                        for (d, s) in x[dst..dst + c].iter_mut().zip(&cols[src..src + c]) {
                            *d += *s;
                        }
                    }
                }
            }
        }
    }
    x
}

/// Saved state of a convolution forward pass.
#[derive(Debug, Clone)]
pub struct ConvCache<T> {
    input_shape: [usize; 4],
    cols: Vec<T>,
}

/// Same-padded, stride-1 cross-correlation. `x` is `[B,H,W,Cin]`, `weights`
/// `[k,k,Cin,Cout]` with odd `k`, `bias` `[Cout]`.
pub fn conv2d_forward<T: Scalar>(x: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<(Tensor<T>, ConvCache<T>), NnError> {
    x.expect_rank("conv2d input", 4)?;
    weights.expect_rank("conv2d weights", 4)?;
    let &[b, h, w, c] = x.shape() else { unreachable!() };
    let &[k, k2, cin, cout] = weights.shape() else { unreachable!() };
    if k != k2 || k % 2 == 0 || cin != c {
        return Err(NnError::shape("conv2d weights", format!("[k,k,{c},_] with odd k"), weights.shape()));
    }
    bias.expect_shape("conv2d bias", &[cout])?;
    let cols = im2col(x.data(), b, h, w, c, k);
    let rows = b * h * w;
    let mut out = Vec::with_capacity(rows * cout);
    for _ in 0..rows {
        out.extend_from_slice(bias.data());
    }
    gemm(false, false, rows, cout, k * k * c, T::one(), &cols, weights.data(), T::one(), &mut out);
    Ok((Tensor::from_vec(&[b, h, w, cout], out)?, ConvCache { input_shape: [b, h, w, c], cols }))
}

/// Gradients `(dx, dw, db)`; `dx` is skipped when `need_input_grad` is false.
pub fn conv2d_backward<T: Scalar>(
    cache: &ConvCache<T>,
    weights: &Tensor<T>,
    dy: &Tensor<T>,
    need_input_grad: bool,
) -> Result<(Option<Tensor<T>>, Tensor<T>, Tensor<T>), NnError> {
    let [b, h, w, c] = cache.input_shape;
    let k = weights.shape()[0];
    let cout = weights.shape()[3];
    dy.expect_shape("conv2d output grad", &[b, h, w, cout])?;
    let rows = b * h * w;
    let kc = k * k * c;
    let mut dw = vec![T::zero(); kc * cout];
    gemm(true, false, kc, cout, rows, T::one(), &cache.cols, dy.data(), T::zero(), &mut dw);
    let mut db = vec![T::zero(); cout];
    for row in dy.data().chunks_exact(cout) {
        for (d, v) in db.iter_mut().zip(row) {
            *d += *v;
        }
    }
    let dx = if need_input_grad {
        let mut dcols = vec![T::zero(); rows * kc];
        gemm(false, true, rows, kc, cout, T::one(), dy.data(), weights.data(), T::zero(), &mut dcols);
        Some(Tensor::from_vec(&[b, h, w, c], col2im(&dcols, b, h, w, c, k))?)
    } else {
        None
    };
    Ok((dx, Tensor::from_vec(weights.shape(), dw)?, Tensor::from_vec(&[cout], db)?))
}

pub fn leaky_relu<T: Scalar>(x: &Tensor<T>, slope: T) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { v * slope })
}

/// Derivative is 1 for positive inputs and `slope` otherwise, including 0.
pub fn leaky_relu_backward<T: Scalar>(x: &Tensor<T>, dy: &Tensor<T>, slope: T) -> Result<Tensor<T>, NnError> {
    dy.expect_shape("leaky_relu grad", x.shape())?;
    let data = x.data().iter().zip(dy.data()).map(|(&v, &g)| if v > T::zero() { g } else { g * slope }).collect();
    Tensor::from_vec(x.shape(), data)
}

/// 2×2, stride-2 max pooling on NHWC input. Returns the flat input index of
/// each window's maximum; ties resolve to the first in row-major order.
pub fn maxpool2<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>), NnError> {
    x.expect_rank("maxpool2", 4)?;
    let &[b, h, w, c] = x.shape() else { unreachable!() };
    if h % 2 != 0 || w % 2 != 0 {
        return Err(NnError::shape("maxpool2", "even height and width", x.shape()));
    }
    let (oh, ow) = (h / 2, w / 2);
    let d = x.data();
    let mut out = Vec::with_capacity(b * oh * ow * c);
    let mut arg = Vec::with_capacity(b * oh * ow * c);
    for n in 0..b {
        for y in 0..oh {
            for xx in 0..ow {
                for ch in 0..c {
                    let mut best = ((n * h + 2 * y) * w + 2 * xx) * c + ch;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let i = ((n * h + 2 * y + dy) * w + 2 * xx + dx) * c + ch;
                        if d[i] > d[best] {
                            best = i;
                        }
                    }
                    out.push(d[best]);
                    arg.push(best);
                }
            }
        }
    }
    Ok((Tensor::from_vec(&[b, oh, ow, c], out)?, arg))
}

pub fn maxpool2_backward<T: Scalar>(input_shape: &[usize], argmax: &[usize], dy: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    if dy.len() != argmax.len() {
        return Err(NnError::shape("maxpool2 grad", argmax.len(), dy.len()));
    }
    let mut dx = Tensor::zeros(input_shape);
    let out = dx.data_mut();
    for (&i, &g) in argmax.iter().zip(dy.data()) {
        out[i] += g;
    }
    Ok(dx)
}

/// Inverted dropout. Returns the multiplicative mask when it was applied.
pub fn dropout<T: Scalar>(x: &Tensor<T>, p: f64, rng: &mut ChaCha8Rng, training: bool) -> (Tensor<T>, Option<Vec<T>>) {
    if !training || p <= 0.0 {
        return (x.clone(), None);
    }
    let keep = T::lit(1.0 / (1.0 - p));
    let mask: Vec<T> = (0..x.len()).map(|_| if rng.random::<f64>() < p { T::zero() } else { keep }).collect();
    let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    (Tensor::from_vec(x.shape(), data).expect("same shape"), Some(mask))
}

pub fn dropout_backward<T: Scalar>(mask: Option<&[T]>, dy: &Tensor<T>) -> Tensor<T> {
    match mask {
        None => dy.clone(),
        Some(m) => {
            let data = dy.data().iter().zip(m).map(|(&g, &k)| g * k).collect();
            Tensor::from_vec(dy.shape(), data).expect("same shape")
        }
    }
}

/// `x [B, In] · w [In, Out] + b`.
pub fn dense_forward<T: Scalar>(x: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    x.expect_rank("dense input", 2)?;
    weights.expect_rank("dense weights", 2)?;
    let (b, input) = (x.shape()[0], x.shape()[1]);
    let out = weights.shape()[1];
    if weights.shape()[0] != input {
        return Err(NnError::shape("dense weights", [input, out], weights.shape()));
    }
    bias.expect_shape("dense bias", &[out])?;
    let mut y = Vec::with_capacity(b * out);
    for _ in 0..b {
        y.extend_from_slice(bias.data());
    }
    gemm(false, false, b, out, input, T::one(), x.data(), weights.data(), T::one(), &mut y);
    Tensor::from_vec(&[b, out], y)
}

/// Gradients `(dx, dw, db)`.
pub fn dense_backward<T: Scalar>(x: &Tensor<T>, weights: &Tensor<T>, dy: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>), NnError> {
    let (b, input) = (x.shape()[0], x.shape()[1]);
    let out = weights.shape()[1];
    dy.expect_shape("dense grad", &[b, out])?;
    let mut dw = vec![T::zero(); input * out];
    gemm(true, false, input, out, b, T::one(), x.data(), dy.data(), T::zero(), &mut dw);
    let mut db = vec![T::zero(); out];
    for row in dy.data().chunks_exact(out) {
        for (d, v) in db.iter_mut().zip(row) {
            *d += *v;
        }
    }
    let mut dx = vec![T::zero(); b * input];
    gemm(false, true, b, input, out, T::one(), dy.data(), weights.data(), T::zero(), &mut dx);
    Ok((Tensor::from_vec(&[b, input], dx)?, Tensor::from_vec(&[input, out], dw)?, Tensor::from_vec(&[out], db)?))
}

/// Row-wise softmax with the maximum subtracted first.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    let c = *logits.shape().last().expect("rank >= 1");
    let mut out = logits.data().to_vec();
    for row in out.chunks_exact_mut(c) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Tensor::from_vec(logits.shape(), out).expect("same shape")
}

/// Softmax probabilities, mean cross-entropy and its gradient with respect to
/// the logits.
pub fn softmax_xent<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(Tensor<T>, f64, Tensor<T>), NnError> {
    logits.expect_rank("softmax_xent", 2)?;
    let (b, c) = (logits.shape()[0], logits.shape()[1]);
    if labels.len() != b {
        return Err(NnError::shape("softmax_xent labels", b, labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(NnError::Dataset(format!("label {bad} outside 0..{c}")));
    }
    let probs = softmax(logits);
    let inv_b = T::lit(1.0 / b as f64);
    let mut loss = 0.0;
    let mut grad = probs.data().to_vec();
    for (i, &l) in labels.iter().enumerate() {
        let row = &logits.data()[i * c..(i + 1) * c];
        let max = row.iter().copied().fold(T::neg_infinity(), T::max).as_f64();
        let lse = max + row.iter().map(|v| (v.as_f64() - max).exp()).sum::<f64>().ln();
        loss += lse - row[l].as_f64();
        grad[i * c + l] -= T::one();
    }
    for g in grad.iter_mut() {
        *g *= inv_b;
    }
    Ok((probs, loss / b as f64, Tensor::from_vec(&[b, c], grad)?))
}
