//! Reverse-mode differentiation over batched `[N, C, H, W]` activations.
//!
//! A [`Graph`] records every operation applied during one forward pass;
//! [`Graph::backward`] then walks the record in reverse and accumulates
//! parameter gradients. Per-sample work is independent, so a batch gives
//! the same per-sample values as running each sample alone.

use ndarray::linalg::general_mat_mul;
use ndarray::{concatenate, s, Array2, Array4, ArrayD, ArrayView2, ArrayView4, Axis, Ix2};

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::scalar::Scalar;

/// Handle to an activation recorded in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

enum Op<S> {
    Input,
    Conv { x: NodeId, weight: ParamId, bias: Option<ParamId>, k: usize, stride: usize, pad: usize },
    GroupNorm { x: NodeId, gamma: ParamId, beta: ParamId, groups: usize, mean: Vec<S>, rstd: Vec<S> },
    Relu { x: NodeId },
    MaxPool { x: NodeId, argmax: Vec<u8> },
    Upsample { x: NodeId },
    Add { a: NodeId, b: NodeId },
    Concat { parts: Vec<NodeId> },
}

struct Node<S> {
    value: Array4<S>,
    op: Op<S>,
    needs_grad: bool,
}

/// Gradients of every parameter, indexed like the [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<S> {
    pub params: Vec<ArrayD<S>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn get(&self, id: ParamId) -> &ArrayD<S> {
        &self.params[id.index()]
    }

    /// Euclidean norm of the gradient of one parameter tensor.
    pub fn norm(&self, id: ParamId) -> f64 {
        self.get(id).iter().map(|v| v.to_f64().unwrap_or(f64::NAN).powi(2)).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.iter().all(|v| v.is_finite()))
    }
}

const GN_EPS: f64 = 1e-5;

pub struct Graph<'p, S> {
    params: &'p ParamStore<S>,
    nodes: Vec<Node<S>>,
}

fn shape_err(op: &'static str, expected: impl Into<String>, actual: impl Into<String>) -> Error {
    Error::Shape { op, expected: expected.into(), actual: actual.into() }
}

fn matrix<S: Scalar>(p: &ArrayD<S>, rows: usize) -> ArrayView2<'_, S> {
    let cols = p.len() / rows;
    p.view().into_shape_with_order((rows, cols)).expect("contiguous parameter").into_dimensionality::<Ix2>().expect("2d")
}

fn out_size(input: usize, k: usize, stride: usize, pad: usize) -> usize {
    (input + 2 * pad - k) / stride + 1
}

#[allow(clippy::too_many_arguments)]
fn im2col<S: Scalar>(x: &[S], c_in: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize, cols: &mut [S]) {
    let (ho, wo) = (out_size(h, k, stride, pad), out_size(w, k, stride, pad));
    let plane = ho * wo;
    for c in 0..c_in {
        let src_c = &x[c * h * w..(c + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = ((c * k + ky) * k + kx) * plane;
                for oy in 0..ho {
                    let dst = &mut cols[row + oy * wo..row + (oy + 1) * wo];
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        dst.fill(S::zero());
                        continue;
                    }
                    let src = &src_c[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        *d = if ix >= 0 && ix < w as isize { src[ix as usize] } else { S::zero() };
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn col2im<S: Scalar>(cols: &[S], c_in: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize, dx: &mut [S]) {
    let (ho, wo) = (out_size(h, k, stride, pad), out_size(w, k, stride, pad));
    let plane = ho * wo;
    for c in 0..c_in {
        let dst_c = &mut dx[c * h * w..(c + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = ((c * k + ky) * k + kx) * plane;
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &cols[row + oy * wo..row + (oy + 1) * wo];
                    let dst = &mut dst_c[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, v) in src.iter().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            dst[ix as usize] = dst[ix as usize] + *v;
                        }
                    }
                }
            }
        }
    }
}

fn accumulate<S: Scalar>(slot: &mut Option<Array4<S>>, g: Array4<S>) {
    match slot {
        Some(acc) => acc.zip_mut_with(&g, |a, b| *a = *a + *b),
        None => *slot = Some(g),
    }
}

impl<'p, S: Scalar> Graph<'p, S> {
    pub fn new(params: &'p ParamStore<S>) -> Self {
        Self { params, nodes: Vec::new() }
    }

    pub fn params(&self) -> &'p ParamStore<S> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Array4<S> {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Array4<S>, op: Op<S>, needs_grad: bool) -> NodeId {
        self.nodes.push(Node { value, op, needs_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn needs_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// Records a constant input; no gradient flows into it.
    pub fn input(&mut self, x: Array4<S>) -> NodeId {
        let x = if x.is_standard_layout() { x } else { x.as_standard_layout().into_owned() };
        self.push(x, Op::Input, false)
    }

    /// 2D convolution with a square `k × k` kernel stored as `[C_out, C_in, k, k]`.
    pub fn conv2d(&mut self, x: NodeId, weight: ParamId, bias: Option<ParamId>, stride: usize, pad: usize) -> Result<NodeId> {
        let w = self.params.get(weight);
        let (c_out, c_in, k) = match w.shape() {
            [o, i, k1, k2] if k1 == k2 => (*o, *i, *k1),
            other => return Err(shape_err("conv2d", "[C_out, C_in, k, k] weight", format!("{other:?}"))),
        };
        let xv = self.value(x);
        let (n, c, h, wd) = xv.dim();
        if c != c_in {
            return Err(shape_err("conv2d", format!("{c_in} input channels"), c.to_string()));
        }
        if h + 2 * pad < k || wd + 2 * pad < k {
            return Err(shape_err("conv2d", format!("input of at least {k}"), format!("{h}×{wd}")));
        }
        let (ho, wo) = (out_size(h, k, stride, pad), out_size(wd, k, stride, pad));
        let wm = matrix(w, c_out);
        let xs = xv.as_slice().expect("standard layout");
        let mut out = Array4::<S>::zeros((n, c_out, ho, wo));
        let direct = k == 1 && stride == 1 && pad == 0;
        let mut cols = if direct { Vec::new() } else { vec![S::zero(); c_in * k * k * ho * wo] };
        for b in 0..n {
            let sample = &xs[b * c * h * wd..(b + 1) * c * h * wd];
            let colv = if direct {
                ArrayView2::from_shape((c_in, h * wd), sample).expect("sample matrix")
            } else {
                im2col(sample, c_in, h, wd, k, stride, pad, &mut cols);
                ArrayView2::from_shape((c_in * k * k, ho * wo), &cols).expect("column matrix")
            };
            let mut ob = out.slice_mut(s![b, .., .., ..]);
            let mut om = ob.view_mut().into_shape_with_order((c_out, ho * wo)).expect("output matrix");
            general_mat_mul(S::one(), &wm, &colv, S::zero(), &mut om);
            if let Some(bias) = bias {
                let bv = self.params.get(bias);
                for (mut row, bb) in om.outer_iter_mut().zip(bv.iter()) {
                    row.mapv_inplace(|v| v + *bb);
                }
            }
        }
        Ok(self.push(out, Op::Conv { x, weight, bias, k, stride, pad }, true))
    }

    /// Group normalization with per-channel affine `gamma`, `beta`.
    pub fn group_norm(&mut self, x: NodeId, gamma: ParamId, beta: ParamId, groups: usize) -> Result<NodeId> {
        let xv = self.value(x);
        let (n, c, h, w) = xv.dim();
        if groups == 0 || c % groups != 0 {
            return Err(shape_err("group_norm", format!("channels divisible by {groups}"), c.to_string()));
        }
        let (gv, bv) = (self.params.get(gamma), self.params.get(beta));
        if gv.len() != c || bv.len() != c {
            return Err(shape_err("group_norm", format!("{c} affine parameters"), gv.len().to_string()));
        }
        let gs = gv.as_slice().expect("contiguous");
        let bs = bv.as_slice().expect("contiguous");
        let cpg = c / groups;
        let hw = h * w;
        let m = (cpg * hw) as f64;
        let mut out = Array4::<S>::zeros((n, c, h, w));
        let mut means = Vec::with_capacity(n * groups);
        let mut rstds = Vec::with_capacity(n * groups);
        let xs = xv.as_slice().expect("standard layout");
        let os = out.as_slice_mut().expect("standard layout");
        for b in 0..n {
            for g in 0..groups {
                let start = (b * c + g * cpg) * hw;
                let seg = &xs[start..start + cpg * hw];
                let mean = seg.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).sum::<f64>() / m;
                let var = seg.iter().map(|v| (v.to_f64().unwrap_or(f64::NAN) - mean).powi(2)).sum::<f64>() / m;
                let rstd = 1.0 / (var + GN_EPS).sqrt();
                let (mean_s, rstd_s) = (S::from_f64_lossy(mean), S::from_f64_lossy(rstd));
                for ci in 0..cpg {
                    let ch = g * cpg + ci;
                    let (ga, be) = (gs[ch], bs[ch]);
                    let off = start + ci * hw;
                    for (o, v) in os[off..off + hw].iter_mut().zip(&xs[off..off + hw]) {
                        *o = (*v - mean_s) * rstd_s * ga + be;
                    }
                }
                means.push(mean_s);
                rstds.push(rstd_s);
            }
        }
        Ok(self.push(out, Op::GroupNorm { x, gamma, beta, groups, mean: means, rstd: rstds }, true))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).mapv(|v| if v > S::zero() { v } else { S::zero() });
        let ng = self.needs_grad(x);
        self.push(out, Op::Relu { x }, ng)
    }

    /// 2 × 2 max pooling with stride 2; ties go to the first element in row-major order.
    pub fn max_pool2(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        let (n, c, h, w) = xv.dim();
        if h % 2 != 0 || w % 2 != 0 {
            return Err(shape_err("max_pool2", "even spatial size", format!("{h}×{w}")));
        }
        let (ho, wo) = (h / 2, w / 2);
        let mut out = Array4::<S>::zeros((n, c, ho, wo));
        let mut argmax = Vec::with_capacity(n * c * ho * wo);
        for ((b, ch, i, j), o) in out.indexed_iter_mut() {
            let mut best = (0u8, xv[[b, ch, 2 * i, 2 * j]]);
            for (k, (di, dj)) in [(0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                let v = xv[[b, ch, 2 * i + di, 2 * j + dj]];
                if v > best.1 {
                    best = (k as u8 + 1, v);
                }
            }
            *o = best.1;
            argmax.push(best.0);
        }
        let ng = self.needs_grad(x);
        Ok(self.push(out, Op::MaxPool { x, argmax }, ng))
    }

    /// Nearest-neighbour 2× upsampling.
    pub fn upsample2(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let (n, c, h, w) = xv.dim();
        let out = Array4::from_shape_fn((n, c, 2 * h, 2 * w), |(b, ch, i, j)| xv[[b, ch, i / 2, j / 2]]);
        let ng = self.needs_grad(x);
        self.push(out, Op::Upsample { x }, ng)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.dim() != bv.dim() {
            return Err(shape_err("add", format!("{:?}", av.dim()), format!("{:?}", bv.dim())));
        }
        let out = av + bv;
        let ng = self.needs_grad(a) || self.needs_grad(b);
        Ok(self.push(out, Op::Add { a, b }, ng))
    }

    /// Concatenation along the channel axis.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let views: Vec<ArrayView4<S>> = parts.iter().map(|p| self.value(*p).view()).collect();
        let out = concatenate(Axis(1), &views).map_err(|e| shape_err("concat", "matching N, H, W", e.to_string()))?;
        let out = out.as_standard_layout().into_owned();
        let ng = parts.iter().any(|p| self.needs_grad(*p));
        Ok(self.push(out, Op::Concat { parts: parts.to_vec() }, ng))
    }

    /// Back-propagates `seeds` (gradients of a scalar objective with respect
    /// to some recorded activations) and returns all parameter gradients.
    pub fn backward(&self, seeds: Vec<(NodeId, Array4<S>)>) -> Result<Gradients<S>> {
        let mut grads: Vec<Option<Array4<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        for (id, g) in seeds {
            if g.dim() != self.value(id).dim() {
                return Err(shape_err("backward seed", format!("{:?}", self.value(id).dim()), format!("{:?}", g.dim())));
            }
            accumulate(&mut grads[id.0], g);
        }
        let mut pgrads = self.params.zeros_like();
        for idx in (0..self.nodes.len()).rev() {
            let Some(dy) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Conv { x, weight, bias, k, stride, pad } => {
                    let dx = self.conv_backward(*x, *weight, *bias, *k, *stride, *pad, &dy, &mut pgrads);
                    if let Some(dx) = dx {
                        accumulate(&mut grads[x.0], dx);
                    }
                }
                Op::GroupNorm { x, gamma, beta, groups, mean, rstd } => {
                    let dx = self.group_norm_backward(*x, *gamma, *beta, *groups, mean, rstd, &dy, &mut pgrads);
                    if let Some(dx) = dx {
                        accumulate(&mut grads[x.0], dx);
                    }
                }
                Op::Relu { x } => {
                    if self.needs_grad(*x) {
                        let mut dx = dy;
                        ndarray::Zip::from(&mut dx).and(&node.value).for_each(|d, y| {
                            if *y <= S::zero() {
                                *d = S::zero();
                            }
                        });
                        accumulate(&mut grads[x.0], dx);
                    }
                }
                Op::MaxPool { x, argmax } => {
                    if self.needs_grad(*x) {
                        let mut dx = Array4::<S>::zeros(self.value(*x).dim());
                        for (((b, c, i, j), d), a) in dy.indexed_iter().zip(argmax) {
                            let (di, dj) = [(0, 0), (0, 1), (1, 0), (1, 1)][*a as usize];
                            dx[[b, c, 2 * i + di, 2 * j + dj]] = *d;
                        }
                        accumulate(&mut grads[x.0], dx);
                    }
                }
                Op::Upsample { x } => {
                    if self.needs_grad(*x) {
                        let (n, c, h, w) = self.value(*x).dim();
                        let dx = Array4::from_shape_fn((n, c, h, w), |(b, ch, i, j)| {
                            dy[[b, ch, 2 * i, 2 * j]]
                                + dy[[b, ch, 2 * i, 2 * j + 1]]
                                + dy[[b, ch, 2 * i + 1, 2 * j]]
                                + dy[[b, ch, 2 * i + 1, 2 * j + 1]]
                        });
                        accumulate(&mut grads[x.0], dx);
                    }
                }
                Op::Add { a, b } => {
                    let (ga, gb) = (self.needs_grad(*a), self.needs_grad(*b));
                    match (ga, gb) {
                        (true, true) => {
                            accumulate(&mut grads[a.0], dy.clone());
                            accumulate(&mut grads[b.0], dy);
                        }
                        (true, false) => accumulate(&mut grads[a.0], dy),
                        (false, true) => accumulate(&mut grads[b.0], dy),
                        (false, false) => {}
                    }
                }
                Op::Concat { parts } => {
                    let mut start = 0;
                    for p in parts {
                        let c = self.value(*p).dim().1;
                        if self.needs_grad(*p) {
                            let g = dy.slice(s![.., start..start + c, .., ..]).to_owned();
                            accumulate(&mut grads[p.0], g);
                        }
                        start += c;
                    }
                }
            }
        }
        Ok(Gradients { params: pgrads })
    }

    #[allow(clippy::too_many_arguments)]
    fn conv_backward(
        &self,
        x: NodeId,
        weight: ParamId,
        bias: Option<ParamId>,
        k: usize,
        stride: usize,
        pad: usize,
        dy: &Array4<S>,
        pgrads: &mut [ArrayD<S>],
    ) -> Option<Array4<S>> {
        let xv = self.value(x);
        let (n, c_in, h, w) = xv.dim();
        let (_, c_out, ho, wo) = dy.dim();
        let wm = matrix(self.params.get(weight), c_out);
        let xs = xv.as_slice().expect("standard layout");
        let dys = dy.as_standard_layout();
        let dys = dys.as_slice().expect("standard layout");
        let want_dx = self.needs_grad(x);
        let direct = k == 1 && stride == 1 && pad == 0;
        let mut cols = if direct { Vec::new() } else { vec![S::zero(); c_in * k * k * ho * wo] };
        let mut dcols = Array2::<S>::zeros((c_in * k * k, ho * wo));
        let mut dx = want_dx.then(|| Array4::<S>::zeros((n, c_in, h, w)));
        let mut dw = Array2::<S>::zeros((c_out, c_in * k * k));
        let mut db = vec![S::zero(); c_out];
        for b in 0..n {
            let sample = &xs[b * c_in * h * w..(b + 1) * c_in * h * w];
            let dyb = ArrayView2::from_shape((c_out, ho * wo), &dys[b * c_out * ho * wo..(b + 1) * c_out * ho * wo])
                .expect("gradient matrix");
            let colv = if direct {
                ArrayView2::from_shape((c_in, h * w), sample).expect("sample matrix")
            } else {
                im2col(sample, c_in, h, w, k, stride, pad, &mut cols);
                ArrayView2::from_shape((c_in * k * k, ho * wo), &cols).expect("column matrix")
            };
            general_mat_mul(S::one(), &dyb, &colv.t(), S::one(), &mut dw);
            for (acc, row) in db.iter_mut().zip(dyb.outer_iter()) {
                *acc = row.iter().fold(*acc, |a, v| a + *v);
            }
            if let Some(dx) = dx.as_mut() {
                general_mat_mul(S::one(), &wm.t(), &dyb, S::zero(), &mut dcols);
                let dxs = dx.as_slice_mut().expect("standard layout");
                let dst = &mut dxs[b * c_in * h * w..(b + 1) * c_in * h * w];
                let dc = dcols.as_slice().expect("standard layout");
                if direct {
                    dst.copy_from_slice(dc);
                } else {
                    col2im(dc, c_in, h, w, k, stride, pad, dst);
                }
            }
        }
        let gw = &mut pgrads[weight.index()];
        for (g, v) in gw.iter_mut().zip(dw.iter()) {
            *g = *g + *v;
        }
        if let Some(bias) = bias {
            for (g, v) in pgrads[bias.index()].iter_mut().zip(&db) {
                *g = *g + *v;
            }
        }
        dx
    }

    #[allow(clippy::too_many_arguments)]
    fn group_norm_backward(
        &self,
        x: NodeId,
        gamma: ParamId,
        beta: ParamId,
        groups: usize,
        mean: &[S],
        rstd: &[S],
        dy: &Array4<S>,
        pgrads: &mut [ArrayD<S>],
    ) -> Option<Array4<S>> {
        let xv = self.value(x);
        let (n, c, h, w) = xv.dim();
        let hw = h * w;
        let cpg = c / groups;
        let m = S::from_usize(cpg * hw).expect("group size");
        let gs = self.params.get(gamma).as_slice().expect("contiguous").to_vec();
        let xs = xv.as_slice().expect("standard layout");
        let dys = dy.as_standard_layout();
        let dys = dys.as_slice().expect("standard layout");
        let want_dx = self.needs_grad(x);
        let mut dx = want_dx.then(|| Array4::<S>::zeros((n, c, h, w)));
        let mut dgamma = vec![S::zero(); c];
        let mut dbeta = vec![S::zero(); c];
        for b in 0..n {
            for g in 0..groups {
                let (mu, rs) = (mean[b * groups + g], rstd[b * groups + g]);
                let start = (b * c + g * cpg) * hw;
                let mut sum_d = S::zero();
                let mut sum_dx = S::zero();
                for ci in 0..cpg {
                    let ch = g * cpg + ci;
                    let off = start + ci * hw;
                    let (mut dg, mut dbt) = (S::zero(), S::zero());
                    for (xv, d) in xs[off..off + hw].iter().zip(&dys[off..off + hw]) {
                        let xhat = (*xv - mu) * rs;
                        dg = dg + *d * xhat;
                        dbt = dbt + *d;
                    }
                    dgamma[ch] = dgamma[ch] + dg;
                    dbeta[ch] = dbeta[ch] + dbt;
                    sum_d = sum_d + dbt * gs[ch];
                    sum_dx = sum_dx + dg * gs[ch];
                }
                if let Some(dx) = dx.as_mut() {
                    let dxs = dx.as_slice_mut().expect("standard layout");
                    let (mean_d, mean_dx) = (sum_d / m, sum_dx / m);
                    for ci in 0..cpg {
                        let ch = g * cpg + ci;
                        let off = start + ci * hw;
                        for ((o, xv), d) in dxs[off..off + hw].iter_mut().zip(&xs[off..off + hw]).zip(&dys[off..off + hw]) {
                            let xhat = (*xv - mu) * rs;
                            *o = rs * (*d * gs[ch] - mean_d - xhat * mean_dx);
                        }
                    }
                }
            }
        }
        for (g, v) in pgrads[gamma.index()].iter_mut().zip(&dgamma) {
            *g = *g + *v;
        }
        for (g, v) in pgrads[beta.index()].iter_mut().zip(&dbeta) {
            *g = *g + *v;
        }
        dx
    }
}
