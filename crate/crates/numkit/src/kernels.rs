//! Flat-slice numeric kernels shared by the tape's forward and backward passes.
//!
//! All routines accumulate into their output slice (`out +=`), which lets the
//! backward pass add contributions from several consumers without temporaries.
//! Loop order keeps the innermost loop contiguous so the compiler can
//! vectorize the f64 arithmetic.

/// out[m×p] += a[m×k] · b[k×p]
pub fn mm_nn_acc(a: &[f64], b: &[f64], m: usize, k: usize, p: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * p);
    debug_assert_eq!(out.len(), m * p);
    for i in 0..m {
        let out_row = &mut out[i * p..(i + 1) * p];
        for l in 0..k {
            let av = a[i * k + l];
            if av == 0.0 {
                continue;
            }
            let b_row = &b[l * p..(l + 1) * p];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
}

/// out[m×k] += a[m×p] · b[k×p]ᵀ  (i.e. a · transpose(b))
pub fn mm_nt_acc(a: &[f64], b: &[f64], m: usize, p: usize, k: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * p);
    debug_assert_eq!(b.len(), k * p);
    debug_assert_eq!(out.len(), m * k);
    for i in 0..m {
        let a_row = &a[i * p..(i + 1) * p];
        for l in 0..k {
            let b_row = &b[l * p..(l + 1) * p];
            let mut acc = 0.0;
            for (&av, &bv) in a_row.iter().zip(b_row) {
                acc += av * bv;
            }
            out[i * k + l] += acc;
        }
    }
}

/// out[k×p] += a[m×k]ᵀ · b[m×p]  (i.e. transpose(a) · b)
pub fn mm_tn_acc(a: &[f64], b: &[f64], m: usize, k: usize, p: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * p);
    debug_assert_eq!(out.len(), k * p);
    for i in 0..m {
        let b_row = &b[i * p..(i + 1) * p];
        for l in 0..k {
            let av = a[i * k + l];
            if av == 0.0 {
                continue;
            }
            let out_row = &mut out[l * p..(l + 1) * p];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
}

/// Temporal length after a 1-D convolution along T.
pub fn conv_out_len(t: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let span = t + 2 * padding;
    if span < kernel {
        return None;
    }
    Some((span - kernel) / stride + 1)
}

/// out[C_out×T'×V] += conv_T(x[C_in×T×V], w[C_out×C_in×k]) with the given
/// stride and zero padding along T; each skeleton node v is convolved
/// independently.
#[allow(clippy::too_many_arguments)]
pub fn tconv_acc(
    x: &[f64],
    w: &[f64],
    c_in: usize,
    t: usize,
    v: usize,
    c_out: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    t_out: usize,
    out: &mut [f64],
) {
    debug_assert_eq!(x.len(), c_in * t * v);
    debug_assert_eq!(w.len(), c_out * c_in * kernel);
    debug_assert_eq!(out.len(), c_out * t_out * v);
    for co in 0..c_out {
        for tp in 0..t_out {
            let out_row = &mut out[(co * t_out + tp) * v..(co * t_out + tp + 1) * v];
            for ci in 0..c_in {
                for j in 0..kernel {
                    let tin = (tp * stride + j) as isize - padding as isize;
                    if tin < 0 || tin as usize >= t {
                        continue;
                    }
                    let wv = w[(co * c_in + ci) * kernel + j];
                    if wv == 0.0 {
                        continue;
                    }
                    let x_row = &x[(ci * t + tin as usize) * v..(ci * t + tin as usize + 1) * v];
                    for (o, &xv) in out_row.iter_mut().zip(x_row) {
                        *o += wv * xv;
                    }
                }
            }
        }
    }
}

/// Backward of [`tconv_acc`]: accumulate gradients for x and w.
#[allow(clippy::too_many_arguments)]
pub fn tconv_backward_acc(
    x: &[f64],
    w: &[f64],
    g: &[f64],
    c_in: usize,
    t: usize,
    v: usize,
    c_out: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    t_out: usize,
    dx: &mut [f64],
    dw: &mut [f64],
) {
    for co in 0..c_out {
        for tp in 0..t_out {
            let g_row = &g[(co * t_out + tp) * v..(co * t_out + tp + 1) * v];
            for ci in 0..c_in {
                for j in 0..kernel {
                    let tin = (tp * stride + j) as isize - padding as isize;
                    if tin < 0 || tin as usize >= t {
                        continue;
                    }
                    let base = (ci * t + tin as usize) * v;
                    let x_row = &x[base..base + v];
                    let wv = w[(co * c_in + ci) * kernel + j];
                    let mut wg = 0.0;
                    let dx_row = &mut dx[base..base + v];
                    for ((dxv, &gv), &xv) in dx_row.iter_mut().zip(g_row).zip(x_row) {
                        *dxv += wv * gv;
                        wg += gv * xv;
                    }
                    dw[(co * c_in + ci) * kernel + j] += wg;
                }
            }
        }
    }
}

/// Iterate the lanes of `shape` along `axis`: calls `f(lane, base, stride, len)`
/// where lane element `i` lives at `base + i * stride`. `lane` counts lanes in
/// row-major order of the reduced shape.
pub fn for_each_lane(shape: &[usize], axis: usize, mut f: impl FnMut(usize, usize, usize, usize)) {
    let len = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut lane = 0;
    for o in 0..outer {
        for i in 0..inner {
            f(lane, o * len * inner + i, inner, len);
            lane += 1;
        }
    }
}

/// Numerically stable softmax along `axis`, written into `out`.
pub fn softmax(x: &[f64], shape: &[usize], axis: usize, out: &mut [f64]) {
    for_each_lane(shape, axis, |_, base, stride, len| {
        let mut max = f64::NEG_INFINITY;
        for i in 0..len {
            max = max.max(x[base + i * stride]);
        }
        let mut sum = 0.0;
        for i in 0..len {
            let e = (x[base + i * stride] - max).exp();
            out[base + i * stride] = e;
            sum += e;
        }
        for i in 0..len {
            out[base + i * stride] /= sum;
        }
    });
}

/// Backward of softmax: dx += y ∘ (g − Σ g∘y) per lane, where y is the
/// forward output.
pub fn softmax_backward_acc(y: &[f64], g: &[f64], shape: &[usize], axis: usize, dx: &mut [f64]) {
    for_each_lane(shape, axis, |_, base, stride, len| {
        let mut dot = 0.0;
        for i in 0..len {
            dot += g[base + i * stride] * y[base + i * stride];
        }
        for i in 0..len {
            let idx = base + i * stride;
            dx[idx] += y[idx] * (g[idx] - dot);
        }
    });
}
