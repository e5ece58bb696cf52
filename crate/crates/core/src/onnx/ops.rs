//! Operator kernels. All spatial operators assume NCHW layout.

use super::{Attr, Node, Tensor, TensorData};

const SUPPORTED: &[&str] = &[
    "Identity",
    "Constant",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Relu",
    "LeakyRelu",
    "Sigmoid",
    "Clip",
    "Conv",
    "ConvTranspose",
    "MaxPool",
    "AveragePool",
    "Resize",
    "Upsample",
    "Concat",
    "BatchNormalization",
];

pub(crate) fn is_supported(op: &str) -> bool {
    SUPPORTED.contains(&op)
}

type OpResult = Result<Vec<Tensor>, String>;

fn arg<'a>(args: &[Option<&'a Tensor>], i: usize, what: &str) -> Result<&'a Tensor, String> {
    args.get(i).copied().flatten().ok_or_else(|| format!("missing {what} input"))
}

pub(crate) fn eval(node: &Node, args: &[Option<&Tensor>]) -> OpResult {
    let out = match node.op_type.as_str() {
        "Identity" => arg(args, 0, "X")?.clone(),
        "Constant" => match node.attrs.get("value") {
            Some(Attr::Tensor(t)) => t.clone(),
            _ => match node.float("value_float") {
                Some(v) => Tensor::from_f32(vec![], vec![v]),
                None => return Err("Constant without a value attribute".into()),
            },
        },
        "Add" => binary(arg(args, 0, "A")?, arg(args, 1, "B")?, |a, b| a + b)?,
        "Sub" => binary(arg(args, 0, "A")?, arg(args, 1, "B")?, |a, b| a - b)?,
        "Mul" => binary(arg(args, 0, "A")?, arg(args, 1, "B")?, |a, b| a * b)?,
        "Div" => binary(arg(args, 0, "A")?, arg(args, 1, "B")?, |a, b| a / b)?,
        "Relu" => unary(arg(args, 0, "X")?, |v| v.max(0.0))?,
        "LeakyRelu" => {
            let alpha = node.float("alpha").unwrap_or(0.01);
            unary(arg(args, 0, "X")?, |v| if v < 0.0 { v * alpha } else { v })?
        }
        "Sigmoid" => unary(arg(args, 0, "X")?, |v| 1.0 / (1.0 + (-v).exp()))?,
        "Clip" => {
            let scalar = |i: usize| -> Result<Option<f32>, String> {
                match args.get(i).copied().flatten() {
                    Some(t) => Ok(t.to_f32().first().copied()),
                    None => Ok(None),
                }
            };
            let lo = scalar(1)?.or(node.float("min")).unwrap_or(f32::NEG_INFINITY);
            let hi = scalar(2)?.or(node.float("max")).unwrap_or(f32::INFINITY);
            unary(arg(args, 0, "X")?, |v| v.clamp(lo, hi))?
        }
        "Conv" => conv(node, arg(args, 0, "X")?, arg(args, 1, "W")?, args.get(2).copied().flatten())?,
        "ConvTranspose" => conv_transpose(node, arg(args, 0, "X")?, arg(args, 1, "W")?, args.get(2).copied().flatten())?,
        "MaxPool" => pool(node, arg(args, 0, "X")?, true)?,
        "AveragePool" => pool(node, arg(args, 0, "X")?, false)?,
        "Resize" | "Upsample" => resize_nearest(node, args)?,
        "Concat" => concat(node, args)?,
        "BatchNormalization" => batch_norm(node, args)?,
        other => return Err(format!("unsupported operator {other}")),
    };
    Ok(vec![out])
}

fn unary(x: &Tensor, f: impl Fn(f32) -> f32) -> Result<Tensor, String> {
    Ok(Tensor::from_f32(x.shape.clone(), x.f32s()?.iter().map(|&v| f(v)).collect()))
}

fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>, String> {
    let rank = a.len().max(b.len());
    let dim = |s: &[usize], i: usize| if i + s.len() < rank { 1 } else { s[i + s.len() - rank] };
    (0..rank)
        .map(|i| match (dim(a, i), dim(b, i)) {
            (x, y) if x == y => Ok(x),
            (1, y) => Ok(y),
            (x, 1) => Ok(x),
            (x, y) => Err(format!("cannot broadcast {a:?} with {b:?} (axis {i}: {x} vs {y})")),
        })
        .collect()
}

/// Row-major strides of `shape` aligned to `rank`, zero along broadcast axes.
fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let rank = out.len();
    let mut strides = vec![0; rank];
    let mut acc = 1;
    for i in (0..shape.len()).rev() {
        let oi = i + rank - shape.len();
        strides[oi] = if shape[i] == 1 { 0 } else { acc };
        acc *= shape[i];
    }
    strides
}

fn binary(a: &Tensor, b: &Tensor, f: impl Fn(f32, f32) -> f32) -> Result<Tensor, String> {
    let (av, bv) = (a.to_f32(), b.to_f32());
    if a.shape == b.shape {
        return Ok(Tensor::from_f32(a.shape.clone(), av.iter().zip(&bv).map(|(&x, &y)| f(x, y)).collect()));
    }
    let shape = broadcast_shape(&a.shape, &b.shape)?;
    let (sa, sb) = (broadcast_strides(&a.shape, &shape), broadcast_strides(&b.shape, &shape));
    let total: usize = shape.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; shape.len()];
    for _ in 0..total {
        let ia: usize = idx.iter().zip(&sa).map(|(i, s)| i * s).sum();
        let ib: usize = idx.iter().zip(&sb).map(|(i, s)| i * s).sum();
        out.push(f(av[ia], bv[ib]));
        for d in (0..shape.len()).rev() {
            idx[d] += 1;
            if idx[d] < shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(Tensor::from_f32(shape, out))
}

fn nchw(t: &Tensor) -> Result<(usize, usize, usize, usize), String> {
    match t.shape[..] {
        [n, c, h, w] => Ok((n, c, h, w)),
        _ => Err(format!("expected a 4-D NCHW tensor, got shape {:?}", t.shape)),
    }
}

struct Spatial {
    stride: [usize; 2],
    dilation: [usize; 2],
    /// top, left, bottom, right
    pads: [usize; 4],
}

fn spatial(node: &Node, kernel: [usize; 2], in_hw: [usize; 2]) -> Result<Spatial, String> {
    let pair = |name: &str, default: usize| -> Result<[usize; 2], String> {
        match node.ints(name) {
            None => Ok([default; 2]),
            Some(v) if v.len() == 2 && v.iter().all(|&x| x >= 1) => Ok([v[0] as usize, v[1] as usize]),
            Some(v) => Err(format!("attribute {name}={v:?} is not a positive pair")),
        }
    };
    let stride = pair("strides", 1)?;
    let dilation = pair("dilations", 1)?;
    let auto_pad = node.string("auto_pad").unwrap_or("NOTSET");
    let pads = match auto_pad {
        "NOTSET" => match node.ints("pads") {
            None => [0; 4],
            Some(p) if p.len() == 4 && p.iter().all(|&x| x >= 0) => [p[0] as usize, p[1] as usize, p[2] as usize, p[3] as usize],
            Some(p) => Err(format!("attribute pads={p:?} is not a nonnegative quadruple"))?,
        },
        "VALID" => [0; 4],
        "SAME_UPPER" | "SAME_LOWER" => {
            let mut p = [0; 4];
            for a in 0..2 {
                let out = in_hw[a].div_ceil(stride[a]);
                let eff = (kernel[a] - 1) * dilation[a] + 1;
                let total = ((out - 1) * stride[a] + eff).saturating_sub(in_hw[a]);
                let (small, large) = (total / 2, total - total / 2);
                if auto_pad == "SAME_UPPER" {
                    p[a] = small;
                    p[a + 2] = large;
                } else {
                    p[a] = large;
                    p[a + 2] = small;
                }
            }
            p
        }
        other => return Err(format!("unsupported auto_pad {other}")),
    };
    Ok(Spatial { stride, dilation, pads })
}

fn out_extent(input: usize, pad_lo: usize, pad_hi: usize, kernel: usize, dilation: usize, stride: usize) -> Result<usize, String> {
    let eff = (kernel - 1) * dilation + 1;
    let padded = input + pad_lo + pad_hi;
    if padded < eff {
        return Err(format!("kernel extent {eff} exceeds padded input {padded}"));
    }
    Ok((padded - eff) / stride + 1)
}

fn conv(node: &Node, x: &Tensor, w: &Tensor, bias: Option<&Tensor>) -> Result<Tensor, String> {
    let (n, c, h, wd) = nchw(x)?;
    let (m, cg, kh, kw) = nchw(w)?;
    let group = node.int("group").unwrap_or(1).max(1) as usize;
    if c != cg * group || m % group != 0 {
        return Err(format!("channel mismatch: input {c}, weight {:?}, group {group}", w.shape));
    }
    let sp = spatial(node, [kh, kw], [h, wd])?;
    let oh = out_extent(h, sp.pads[0], sp.pads[2], kh, sp.dilation[0], sp.stride[0])?;
    let ow = out_extent(wd, sp.pads[1], sp.pads[3], kw, sp.dilation[1], sp.stride[1])?;
    let (xv, wv) = (x.f32s()?, w.f32s()?);
    let bv = bias.map(Tensor::to_f32);
    let m_per_group = m / group;
    let mut out = vec![0f32; n * m * oh * ow];
    for b in 0..n {
        for oc in 0..m {
            let g = oc / m_per_group;
            let base = bv.as_ref().map_or(0.0, |v| v[oc]);
            let plane = &mut out[(b * m + oc) * oh * ow..(b * m + oc + 1) * oh * ow];
            plane.fill(base);
            for ic in 0..cg {
                let xin = &xv[(b * c + g * cg + ic) * h * wd..][..h * wd];
                let kern = &wv[(oc * cg + ic) * kh * kw..][..kh * kw];
                for ky in 0..kh {
                    for kx in 0..kw {
                        let kval = kern[ky * kw + kx];
                        if kval == 0.0 {
                            continue;
                        }
                        for oy in 0..oh {
                            let iy = (oy * sp.stride[0] + ky * sp.dilation[0]) as isize - sp.pads[0] as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let row = &xin[iy as usize * wd..][..wd];
                            let orow = &mut plane[oy * ow..][..ow];
                            for (ox, o) in orow.iter_mut().enumerate() {
                                let ix = (ox * sp.stride[1] + kx * sp.dilation[1]) as isize - sp.pads[1] as isize;
                                if ix >= 0 && ix < wd as isize {
                                    *o += kval * row[ix as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(Tensor::from_f32(vec![n, m, oh, ow], out))
}

fn conv_transpose(node: &Node, x: &Tensor, w: &Tensor, bias: Option<&Tensor>) -> Result<Tensor, String> {
    let (n, c, h, wd) = nchw(x)?;
    let (wc, mg, kh, kw) = nchw(w)?;
    let group = node.int("group").unwrap_or(1).max(1) as usize;
    if wc != c || c % group != 0 {
        return Err(format!("channel mismatch: input {c}, weight {:?}, group {group}", w.shape));
    }
    let m = mg * group;
    let sp = spatial(node, [kh, kw], [h, wd])?;
    let extra = match node.ints("output_padding") {
        Some(v) if v.len() == 2 => [v[0].max(0) as usize, v[1].max(0) as usize],
        _ => [0, 0],
    };
    let full_h = (h - 1) * sp.stride[0] + (kh - 1) * sp.dilation[0] + 1 + extra[0];
    let full_w = (wd - 1) * sp.stride[1] + (kw - 1) * sp.dilation[1] + 1 + extra[1];
    let oh = full_h
        .checked_sub(sp.pads[0] + sp.pads[2])
        .ok_or("padding exceeds transposed output")?;
    let ow = full_w
        .checked_sub(sp.pads[1] + sp.pads[3])
        .ok_or("padding exceeds transposed output")?;
    let (xv, wv) = (x.f32s()?, w.f32s()?);
    let bv = bias.map(Tensor::to_f32);
    let c_per_group = c / group;
    let mut out = vec![0f32; n * m * oh * ow];
    for b in 0..n {
        for oc in 0..m {
            let base = bv.as_ref().map_or(0.0, |v| v[oc]);
            out[(b * m + oc) * oh * ow..(b * m + oc + 1) * oh * ow].fill(base);
        }
        for ic in 0..c {
            let g = ic / c_per_group;
            let xin = &xv[(b * c + ic) * h * wd..][..h * wd];
            for ocg in 0..mg {
                let oc = g * mg + ocg;
                let kern = &wv[(ic * mg + ocg) * kh * kw..][..kh * kw];
                let plane = &mut out[(b * m + oc) * oh * ow..][..oh * ow];
                for iy in 0..h {
                    for ix in 0..wd {
                        let v = xin[iy * wd + ix];
                        if v == 0.0 {
                            continue;
                        }
                        for ky in 0..kh {
                            let oy = (iy * sp.stride[0] + ky * sp.dilation[0]) as isize - sp.pads[0] as isize;
                            if oy < 0 || oy >= oh as isize {
                                continue;
                            }
                            for kx in 0..kw {
                                let ox = (ix * sp.stride[1] + kx * sp.dilation[1]) as isize - sp.pads[1] as isize;
                                if ox >= 0 && ox < ow as isize {
                                    plane[oy as usize * ow + ox as usize] += v * kern[ky * kw + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(Tensor::from_f32(vec![n, m, oh, ow], out))
}

fn pool(node: &Node, x: &Tensor, max: bool) -> Result<Tensor, String> {
    let (n, c, h, w) = nchw(x)?;
    let k = match node.ints("kernel_shape") {
        Some(v) if v.len() == 2 && v.iter().all(|&d| d >= 1) => [v[0] as usize, v[1] as usize],
        other => return Err(format!("pooling needs a 2-D kernel_shape, got {other:?}")),
    };
    let sp = spatial(node, k, [h, w])?;
    let oh = out_extent(h, sp.pads[0], sp.pads[2], k[0], sp.dilation[0], sp.stride[0])?;
    let ow = out_extent(w, sp.pads[1], sp.pads[3], k[1], sp.dilation[1], sp.stride[1])?;
    let count_pad = node.int("count_include_pad").unwrap_or(0) != 0;
    let xv = x.f32s()?;
    let mut out = Vec::with_capacity(n * c * oh * ow);
    for plane in xv.chunks_exact(h * w) {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = if max { f32::NEG_INFINITY } else { 0.0 };
                let mut cnt = 0usize;
                for ky in 0..k[0] {
                    let iy = (oy * sp.stride[0] + ky * sp.dilation[0]) as isize - sp.pads[0] as isize;
                    for kx in 0..k[1] {
                        let ix = (ox * sp.stride[1] + kx * sp.dilation[1]) as isize - sp.pads[1] as isize;
                        if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                            let v = plane[iy as usize * w + ix as usize];
                            if max {
                                acc = acc.max(v);
                            } else {
                                acc += v;
                            }
                            cnt += 1;
                        }
                    }
                }
                out.push(if max {
                    acc
                } else {
                    let d = if count_pad { k[0] * k[1] } else { cnt.max(1) };
                    acc / d as f32
                });
            }
        }
    }
    Ok(Tensor::from_f32(vec![n, c, oh, ow], out))
}

/// Nearest-neighbour Resize/Upsample on the spatial axes with `floor(dst * in / out)`
/// source indexing.
fn resize_nearest(node: &Node, args: &[Option<&Tensor>]) -> Result<Tensor, String> {
    let x = arg(args, 0, "X")?;
    let (n, c, h, w) = nchw(x)?;
    let mode = node.string("mode").unwrap_or("nearest");
    if mode != "nearest" {
        return Err(format!("only nearest resizing is supported, got {mode}"));
    }
    let nonempty = |i: usize| args.get(i).copied().flatten().filter(|t| !t.is_empty());
    let (sizes, scales) = if node.op_type == "Upsample" {
        (None, nonempty(1).map(Tensor::to_f32).or_else(|| match node.attrs.get("scales") {
            Some(Attr::Floats(v)) => Some(v.clone()),
            _ => None,
        }))
    } else {
        (nonempty(3).map(Tensor::i64s), nonempty(2).map(Tensor::to_f32))
    };
    let (oh, ow) = if let Some(s) = sizes {
        if s.len() != 4 || s[0] as usize != n || s[1] as usize != c {
            return Err(format!("resize sizes {s:?} must keep batch and channels"));
        }
        (s[2] as usize, s[3] as usize)
    } else if let Some(s) = scales {
        if s.len() != 4 || s[0] != 1.0 || s[1] != 1.0 {
            return Err(format!("resize scales {s:?} must keep batch and channels"));
        }
        ((h as f32 * s[2]).floor() as usize, (w as f32 * s[3]).floor() as usize)
    } else {
        return Err("resize needs scales or sizes".into());
    };
    if oh == 0 || ow == 0 {
        return Err("resize to an empty extent".into());
    }
    let xv = x.f32s()?;
    let mut out = Vec::with_capacity(n * c * oh * ow);
    for plane in xv.chunks_exact(h * w) {
        for oy in 0..oh {
            let iy = (oy * h / oh).min(h - 1);
            for ox in 0..ow {
                out.push(plane[iy * w + (ox * w / ow).min(w - 1)]);
            }
        }
    }
    Ok(Tensor::from_f32(vec![n, c, oh, ow], out))
}

fn concat(node: &Node, args: &[Option<&Tensor>]) -> Result<Tensor, String> {
    let parts: Vec<&Tensor> = args.iter().flatten().copied().collect();
    let first = parts.first().ok_or("Concat without inputs")?;
    let rank = first.shape.len() as i64;
    let axis = node.int("axis").ok_or("Concat without axis")?;
    let axis = if axis < 0 { axis + rank } else { axis };
    if !(0..rank).contains(&axis) {
        return Err(format!("Concat axis {axis} out of range for rank {rank}"));
    }
    let axis = axis as usize;
    for p in &parts {
        if p.shape.len() != first.shape.len()
            || p.shape.iter().zip(&first.shape).enumerate().any(|(i, (a, b))| i != axis && a != b)
        {
            return Err(format!("Concat shape mismatch {:?} vs {:?}", p.shape, first.shape));
        }
    }
    let outer: usize = first.shape[..axis].iter().product();
    let inner: usize = first.shape[axis + 1..].iter().product();
    let mut shape = first.shape.clone();
    shape[axis] = parts.iter().map(|p| p.shape[axis]).sum();
    let data: Vec<Vec<f32>> = parts.iter().map(|p| p.to_f32()).collect();
    let mut out = Vec::with_capacity(shape.iter().product());
    for o in 0..outer {
        for (p, d) in parts.iter().zip(&data) {
            let chunk = p.shape[axis] * inner;
            out.extend_from_slice(&d[o * chunk..(o + 1) * chunk]);
        }
    }
    if parts.iter().all(|p| matches!(p.data, TensorData::I64(_))) {
        return Ok(Tensor { shape, data: TensorData::I64(out.iter().map(|&v| v as i64).collect()) });
    }
    Ok(Tensor::from_f32(shape, out))
}

fn batch_norm(node: &Node, args: &[Option<&Tensor>]) -> Result<Tensor, String> {
    let x = arg(args, 0, "X")?;
    let (scale, bias, mean, var) = (
        arg(args, 1, "scale")?.to_f32(),
        arg(args, 2, "B")?.to_f32(),
        arg(args, 3, "mean")?.to_f32(),
        arg(args, 4, "var")?.to_f32(),
    );
    let eps = node.float("epsilon").unwrap_or(1e-5);
    if x.shape.len() < 2 {
        return Err("BatchNormalization needs at least N and C axes".into());
    }
    let c = x.shape[1];
    if [&scale, &bias, &mean, &var].iter().any(|v| v.len() != c) {
        return Err(format!("BatchNormalization parameters must have {c} channels"));
    }
    let inner: usize = x.shape[2..].iter().product();
    let xv = x.f32s()?;
    let out = xv
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let ch = (i / inner) % c;
            (v - mean[ch]) / (var[ch] + eps).sqrt() * scale[ch] + bias[ch]
        })
        .collect();
    Ok(Tensor::from_f32(x.shape.clone(), out))
}
