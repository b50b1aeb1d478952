//! Raw NCHW loops behind the graph ops.

use crate::layout::Rotation;

/// Output positions `o` in `0..out_len` whose input tap `o * stride + k - pad`
/// falls inside `0..in_len`.
fn valid_range(k: usize, pad: usize, stride: usize, in_len: usize, out_len: usize) -> (usize, usize) {
    let k = k as isize;
    let pad = pad as isize;
    let s = stride as isize;
    // o * s + k - pad >= 0
    let lo = if k >= pad { 0 } else { (pad - k + s - 1) / s };
    // o * s + k - pad <= in_len - 1
    let top = in_len as isize - 1 + pad - k;
    let hi = if top < 0 { 0 } else { top / s + 1 };
    (lo as usize, (hi as usize).min(out_len))
}

/// `c[m, n] = beta * c + a[m, k] * b[k, n]` with `c` dense row-major and `a`, `b`
/// addressed through row and column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], rsa: usize, csa: usize, b: &[f64], rsb: usize, csb: usize, beta: f64, c: &mut [f64]) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= m * n, "gemm output too small");
    if k == 0 {
        c[..m * n].iter_mut().for_each(|v| *v *= beta);
        return;
    }
    assert!((m - 1) * rsa + (k - 1) * csa < a.len(), "gemm lhs out of bounds");
    assert!((k - 1) * rsb + (n - 1) * csb < b.len(), "gemm rhs out of bounds");
    // SAFETY: every index the routine touches was bounds-checked above and
    // `c` is an exclusive borrow that aliases neither input.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub(crate) struct ConvDims {
    pub n: usize,
    pub ci: usize,
    pub h: usize,
    pub w: usize,
    pub co: usize,
    pub oh: usize,
    pub ow: usize,
    pub stride: usize,
}

pub(crate) const CONV_K: usize = 3;
pub(crate) const CONV_PAD: usize = 1;

/// Unfolds one sample `[ci, h, w]` into `[ci * 9, oh * ow]` patch columns.
fn im2col(xn: &[f64], d: &ConvDims, col: &mut [f64]) {
    let (ip, op) = (d.h * d.w, d.oh * d.ow);
    for ci in 0..d.ci {
        let xp = &xn[ci * ip..(ci + 1) * ip];
        for ky in 0..CONV_K {
            let (oy0, oy1) = valid_range(ky, CONV_PAD, d.stride, d.h, d.oh);
            for kx in 0..CONV_K {
                let (ox0, ox1) = valid_range(kx, CONV_PAD, d.stride, d.w, d.ow);
                let row = &mut col[((ci * CONV_K + ky) * CONV_K + kx) * op..][..op];
                row[..oy0 * d.ow].fill(0.0);
                row[oy1 * d.ow..].fill(0.0);
                for oy in oy0..oy1 {
                    let iy = oy * d.stride + ky - CONV_PAD;
                    let r = &mut row[oy * d.ow..(oy + 1) * d.ow];
                    r[..ox0].fill(0.0);
                    r[ox1..].fill(0.0);
                    if ox0 >= ox1 {
                        continue;
                    }
                    let ix0 = ox0 * d.stride + kx - CONV_PAD;
                    let src = &xp[iy * d.w + ix0..(iy + 1) * d.w];
                    if d.stride == 1 {
                        r[ox0..ox1].copy_from_slice(&src[..ox1 - ox0]);
                    } else {
                        for (o, v) in r[ox0..ox1].iter_mut().zip(src.iter().step_by(d.stride)) {
                            *o = *v;
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: folds patch columns back, adding into `dxn`.
fn col2im(col: &[f64], d: &ConvDims, dxn: &mut [f64]) {
    let (ip, op) = (d.h * d.w, d.oh * d.ow);
    for ci in 0..d.ci {
        let dp = &mut dxn[ci * ip..(ci + 1) * ip];
        for ky in 0..CONV_K {
            let (oy0, oy1) = valid_range(ky, CONV_PAD, d.stride, d.h, d.oh);
            for kx in 0..CONV_K {
                let (ox0, ox1) = valid_range(kx, CONV_PAD, d.stride, d.w, d.ow);
                let row = &col[((ci * CONV_K + ky) * CONV_K + kx) * op..][..op];
                for oy in oy0..oy1 {
                    let iy = oy * d.stride + ky - CONV_PAD;
                    for ox in ox0..ox1 {
                        dp[iy * d.w + ox * d.stride + kx - CONV_PAD] += row[oy * d.ow + ox];
                    }
                }
            }
        }
    }
}

/// 3x3 convolution with zero padding 1; weight is `[co, ci, 3, 3]`.
pub(crate) fn conv2d_forward(x: &[f64], wt: &[f64], b: &[f64], d: &ConvDims) -> Vec<f64> {
    let (ip, op) = (d.h * d.w, d.oh * d.ow);
    let kk = d.ci * CONV_K * CONV_K;
    let mut out = vec![0.0; d.n * d.co * op];
    let mut col = vec![0.0; kk * op];
    for n in 0..d.n {
        im2col(&x[n * d.ci * ip..(n + 1) * d.ci * ip], d, &mut col);
        let o = &mut out[n * d.co * op..(n + 1) * d.co * op];
        for (co, plane) in o.chunks_exact_mut(op).enumerate() {
            plane.fill(b[co]);
        }
        gemm(d.co, kk, op, wt, kk, 1, &col, op, 1, 1.0, o);
    }
    out
}

/// Accumulates input, weight and bias gradients of [`conv2d_forward`].
pub(crate) fn conv2d_backward(
    x: &[f64],
    wt: &[f64],
    dy: &[f64],
    d: &ConvDims,
    mut dx: Option<&mut [f64]>,
    mut dw: Option<&mut [f64]>,
    db: Option<&mut [f64]>,
) {
    let (ip, op) = (d.h * d.w, d.oh * d.ow);
    let kk = d.ci * CONV_K * CONV_K;
    if let Some(db) = db {
        for n in 0..d.n {
            for co in 0..d.co {
                db[co] += dy[(n * d.co + co) * op..(n * d.co + co + 1) * op].iter().sum::<f64>();
            }
        }
    }
    let mut col = vec![0.0; kk * op];
    for n in 0..d.n {
        let g = &dy[n * d.co * op..(n + 1) * d.co * op];
        if let Some(dw) = dw.as_deref_mut() {
            im2col(&x[n * d.ci * ip..(n + 1) * d.ci * ip], d, &mut col);
            gemm(d.co, op, kk, g, op, 1, &col, 1, op, 1.0, dw);
        }
        if let Some(dx) = dx.as_deref_mut() {
            gemm(kk, d.co, op, wt, 1, kk, g, op, 1, 0.0, &mut col);
            col2im(&col, d, &mut dx[n * d.ci * ip..(n + 1) * d.ci * ip]);
        }
    }
}

pub(crate) const TCONV_K: usize = 4;
pub(crate) const TCONV_STRIDE: usize = 2;
pub(crate) const TCONV_PAD: usize = 1;
const TCONV_TAPS: usize = TCONV_K * TCONV_K;

/// Input positions `i` in `0..in_len` whose output tap `i * 2 + k - 1`
/// falls inside `0..out_len`.
fn tconv_range(k: usize, in_len: usize, out_len: usize) -> (usize, usize) {
    let k = k as isize;
    let lo = if k >= TCONV_PAD as isize { 0 } else { 1 };
    // 2i + k - 1 <= out_len - 1
    let top = out_len as isize - k;
    let hi = if top < 0 { 0 } else { (top / TCONV_STRIDE as isize + 1) as usize };
    (lo, hi.min(in_len))
}

/// Visits every (column row, input pixel, output pixel) link of one sample.
#[inline(always)]
fn tconv_links(d: &ConvDims, mut f: impl FnMut(usize, usize)) {
    let (ip, op) = (d.h * d.w, d.oh * d.ow);
    for co in 0..d.co {
        for ky in 0..TCONV_K {
            let (iy0, iy1) = tconv_range(ky, d.h, d.oh);
            for kx in 0..TCONV_K {
                let (ix0, ix1) = tconv_range(kx, d.w, d.ow);
                let r = co * TCONV_TAPS + ky * TCONV_K + kx;
                for iy in iy0..iy1 {
                    let oy = iy * TCONV_STRIDE + ky - TCONV_PAD;
                    for ix in ix0..ix1 {
                        let ox = ix * TCONV_STRIDE + kx - TCONV_PAD;
                        f(r * ip + iy * d.w + ix, co * op + oy * d.ow + ox);
                    }
                }
            }
        }
    }
}

/// 4x4 stride-2 padding-1 transposed convolution; weight is `[ci, co, 4, 4]`
/// and the output is twice the input size. `d.h, d.w` are input dims.
pub(crate) fn tconv_forward(x: &[f64], wt: &[f64], b: &[f64], d: &ConvDims) -> Vec<f64> {
    let (ip, op) = (d.h * d.w, d.oh * d.ow);
    let rows = d.co * TCONV_TAPS;
    let mut out = vec![0.0; d.n * d.co * op];
    let mut col = vec![0.0; rows * ip];
    for n in 0..d.n {
        gemm(rows, d.ci, ip, wt, 1, rows, &x[n * d.ci * ip..(n + 1) * d.ci * ip], ip, 1, 0.0, &mut col);
        let o = &mut out[n * d.co * op..(n + 1) * d.co * op];
        for (co, plane) in o.chunks_exact_mut(op).enumerate() {
            plane.fill(b[co]);
        }
        tconv_links(d, |c, oi| o[oi] += col[c]);
    }
    out
}

pub(crate) fn tconv_backward(
    x: &[f64],
    wt: &[f64],
    dy: &[f64],
    d: &ConvDims,
    mut dx: Option<&mut [f64]>,
    mut dw: Option<&mut [f64]>,
    db: Option<&mut [f64]>,
) {
    let (ip, op) = (d.h * d.w, d.oh * d.ow);
    let rows = d.co * TCONV_TAPS;
    if let Some(db) = db {
        for n in 0..d.n {
            for co in 0..d.co {
                db[co] += dy[(n * d.co + co) * op..(n * d.co + co + 1) * op].iter().sum::<f64>();
            }
        }
    }
    if dx.is_none() && dw.is_none() {
        return;
    }
    let mut col = vec![0.0; rows * ip];
    for n in 0..d.n {
        let g = &dy[n * d.co * op..(n + 1) * d.co * op];
        col.fill(0.0);
        tconv_links(d, |c, oi| col[c] = g[oi]);
        if let Some(dx) = dx.as_deref_mut() {
            gemm(d.ci, rows, ip, wt, rows, 1, &col, ip, 1, 1.0, &mut dx[n * d.ci * ip..(n + 1) * d.ci * ip]);
        }
        if let Some(dw) = dw.as_deref_mut() {
            gemm(d.ci, ip, rows, &x[n * d.ci * ip..(n + 1) * d.ci * ip], ip, 1, &col, 1, ip, 1.0, dw);
        }
    }
}

/// Turns every `side x side` plane in `data` by `k` quarter turns.
///
/// Pixel (row r, col c) moves to (side-1-c, r) per turn, the grid image of
/// the scene map `(x, y) -> (y, W - x)`. Pure permutation, no interpolation.
pub fn quarter_turn_planes(data: &[f64], side: usize, k: Rotation) -> Vec<f64> {
    let plane = side * side;
    assert!(plane > 0 && data.len().is_multiple_of(plane), "data is not a stack of square planes");
    let s1 = side - 1;
    let mut out = vec![0.0; data.len()];
    for (src, dst) in data.chunks_exact(plane).zip(out.chunks_exact_mut(plane)) {
        match k.quarter_turns() {
            0 => dst.copy_from_slice(src),
            1 => {
                for r in 0..side {
                    for c in 0..side {
                        dst[(s1 - c) * side + r] = src[r * side + c];
                    }
                }
            }
            2 => {
                for r in 0..side {
                    for c in 0..side {
                        dst[(s1 - r) * side + (s1 - c)] = src[r * side + c];
                    }
                }
            }
            _ => {
                for r in 0..side {
                    for c in 0..side {
                        dst[c * side + (s1 - r)] = src[r * side + c];
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(x: &[f64], wt: &[f64], b: &[f64], d: &ConvDims) -> Vec<f64> {
        let mut out = vec![0.0; d.n * d.co * d.oh * d.ow];
        for n in 0..d.n {
            for co in 0..d.co {
                for oy in 0..d.oh {
                    for ox in 0..d.ow {
                        let mut s = b[co];
                        for ci in 0..d.ci {
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    let iy = (oy * d.stride + ky) as isize - 1;
                                    let ix = (ox * d.stride + kx) as isize - 1;
                                    if iy < 0 || ix < 0 || iy >= d.h as isize || ix >= d.w as isize {
                                        continue;
                                    }
                                    s += wt[((co * d.ci + ci) * 3 + ky) * 3 + kx]
                                        * x[((n * d.ci + ci) * d.h + iy as usize) * d.w + ix as usize];
                                }
                            }
                        }
                        out[((n * d.co + co) * d.oh + oy) * d.ow + ox] = s;
                    }
                }
            }
        }
        out
    }

    fn naive_tconv(x: &[f64], wt: &[f64], b: &[f64], d: &ConvDims) -> Vec<f64> {
        let mut out = vec![0.0; d.n * d.co * d.oh * d.ow];
        for n in 0..d.n {
            for co in 0..d.co {
                for oy in 0..d.oh {
                    for ox in 0..d.ow {
                        let mut s = b[co];
                        for ci in 0..d.ci {
                            for iy in 0..d.h {
                                for ix in 0..d.w {
                                    let ky = oy as isize + 1 - 2 * iy as isize;
                                    let kx = ox as isize + 1 - 2 * ix as isize;
                                    if (0..4).contains(&ky) && (0..4).contains(&kx) {
                                        s += x[((n * d.ci + ci) * d.h + iy) * d.w + ix]
                                            * wt[((ci * d.co + co) * 4 + ky as usize) * 4 + kx as usize];
                                    }
                                }
                            }
                        }
                        out[((n * d.co + co) * d.oh + oy) * d.ow + ox] = s;
                    }
                }
            }
        }
        out
    }

    fn seq(len: usize, a: f64) -> Vec<f64> {
        (0..len).map(|i| ((i as f64 * a).sin() * 1.7).fract()).collect()
    }

    #[test]
    fn conv_matches_naive_loops() {
        for stride in [1, 2] {
            let (h, w) = (6, 4);
            let d = ConvDims { n: 2, ci: 3, h, w, co: 2, oh: (h - 1) / stride + 1, ow: (w - 1) / stride + 1, stride };
            let x = seq(2 * 3 * h * w, 0.37);
            let wt = seq(2 * 3 * 9, 1.13);
            let b = vec![0.1, -0.2];
            let fast = conv2d_forward(&x, &wt, &b, &d);
            let slow = naive_conv(&x, &wt, &b, &d);
            for (a, e) in fast.iter().zip(&slow) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tconv_matches_naive_loops() {
        for (n, ci, co, h, w) in [(2, 2, 3, 3, 5), (2, 8, 4, 4, 4), (2, 4, 4, 8, 8), (1, 1, 1, 1, 1)] {
            let d = ConvDims { n, ci, h, w, co, oh: 2 * h, ow: 2 * w, stride: 2 };
            let x = seq(n * ci * h * w, 0.71);
            let wt = seq(ci * co * 16, 0.29);
            let b = seq(co, 1.9);
            let fast = tconv_forward(&x, &wt, &b, &d);
            let slow = naive_tconv(&x, &wt, &b, &d);
            for (a, e) in fast.iter().zip(&slow) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }

    /// `<y, dy> = <x, dx> + <w, dw> + <b, db>` for a map linear in each argument.
    fn check_adjoint(
        fwd: fn(&[f64], &[f64], &[f64], &ConvDims) -> Vec<f64>,
        bwd: fn(&[f64], &[f64], &[f64], &ConvDims, Option<&mut [f64]>, Option<&mut [f64]>, Option<&mut [f64]>),
        d: &ConvDims,
        wlen: usize,
    ) {
        let x = seq(d.n * d.ci * d.h * d.w, 0.53);
        let wt = seq(wlen, 0.91);
        let b = seq(d.co, 2.3);
        let dy = seq(d.n * d.co * d.oh * d.ow, 0.17);
        let (mut dx, mut dw, mut db) = (vec![0.0; x.len()], vec![0.0; wlen], vec![0.0; d.co]);
        bwd(&x, &wt, &dy, d, Some(&mut dx), Some(&mut dw), Some(&mut db));
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        let zx = vec![0.0; x.len()];
        let zw = vec![0.0; wlen];
        let zb = vec![0.0; d.co];
        // bilinear in (x, w): probe each argument with the others fixed
        assert!((dot(&fwd(&x, &wt, &zb, d), &dy) - dot(&x, &dx)).abs() < 1e-9);
        assert!((dot(&fwd(&x, &wt, &zb, d), &dy) - dot(&wt, &dw)).abs() < 1e-9);
        assert!((dot(&fwd(&zx, &zw, &b, d), &dy) - dot(&b, &db)).abs() < 1e-9);
    }

    #[test]
    fn backward_kernels_are_adjoints() {
        for stride in [1, 2] {
            let (h, w) = (5, 7);
            let d = ConvDims { n: 2, ci: 3, h, w, co: 4, oh: (h - 1) / stride + 1, ow: (w - 1) / stride + 1, stride };
            check_adjoint(conv2d_forward, conv2d_backward, &d, 4 * 3 * 9);
        }
        for (n, ci, co, h, w) in [(2, 3, 2, 3, 4), (2, 8, 4, 4, 4), (2, 4, 4, 8, 8)] {
            let d = ConvDims { n, ci, h, w, co, oh: 2 * h, ow: 2 * w, stride: 2 };
            check_adjoint(tconv_forward, tconv_backward, &d, ci * co * 16);
        }
    }

    #[test]
    fn quarter_turn_small_grid() {
        // 2x2 plane [a b; c d] turned once becomes [b d; a c].
        let v = quarter_turn_planes(&[1.0, 2.0, 3.0, 4.0], 2, Rotation::R90);
        assert_eq!(v, vec![2.0, 4.0, 1.0, 3.0]);
        let once = |v: &[f64]| quarter_turn_planes(v, 3, Rotation::R90);
        let x: Vec<f64> = (0..18).map(|i| i as f64).collect();
        assert_eq!(quarter_turn_planes(&x, 3, Rotation::R180), once(&once(&x)));
        assert_eq!(quarter_turn_planes(&x, 3, Rotation::R270), once(&once(&once(&x))));
        assert_eq!(once(&quarter_turn_planes(&x, 3, Rotation::R270)), x);
    }
}
