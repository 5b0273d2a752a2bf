use alloc::vec;

use crate::error::{dim_err, Error, Result};
use crate::tensor::Tensor;

/// Bias-free 2-D convolution (cross-correlation, no kernel flip).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    /// `out_channels x in_channels x kh x kw`.
    pub kernels: Tensor,
    pub stride: usize,
    /// Zero padding added on every side.
    pub padding: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Tensor,
    pub kernels: Tensor,
}

struct Geometry {
    batch: usize,
    in_c: usize,
    h: usize,
    w: usize,
    out_c: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    pad: usize,
}

impl Geometry {
    /// Output columns `ox` whose input column `ox * stride + k - pad` lies
    /// inside `[0, extent)`.
    fn valid(&self, k: usize, extent: usize, out: usize) -> core::ops::Range<usize> {
        let (s, p) = (self.stride as isize, self.pad as isize);
        let k = k as isize;
        let lo = (p - k).max(0);
        let lo = (lo + s - 1) / s;
        let hi = (extent as isize - 1 + p - k).div_euclid(s) + 1;
        let hi = hi.clamp(0, out as isize);
        (lo.min(hi) as usize)..(hi as usize)
    }
}

impl ConvParams {
    pub fn new(kernels: Tensor, stride: usize, padding: usize) -> Result<Self> {
        if kernels.rank() != 4 {
            return Err(dim_err!("conv kernels must be rank 4, got {:?}", kernels.shape()));
        }
        if stride == 0 {
            return Err(crate::error::arg_err!("conv stride must be positive"));
        }
        if !kernels.is_finite() {
            return Err(Error::Domain("conv kernels must be finite".into()));
        }
        Ok(Self { kernels, stride, padding })
    }

    /// Output spatial size for an `h x w` input.
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (kh, kw) = (self.kernels.shape()[2], self.kernels.shape()[3]);
        let (ph, pw) = (h + 2 * self.padding, w + 2 * self.padding);
        if ph < kh || pw < kw {
            return Err(dim_err!("{h}x{w} input (pad {}) smaller than {kh}x{kw} kernel", self.padding));
        }
        Ok(((ph - kh) / self.stride + 1, (pw - kw) / self.stride + 1))
    }

    fn geometry(&self, x: &Tensor) -> Result<Geometry> {
        let [batch, in_c, h, w] = match x.shape()[..] {
            [b, c, h, w] => [b, c, h, w],
            _ => return Err(dim_err!("conv input must be B x C x H x W, got {:?}", x.shape())),
        };
        let ks = self.kernels.shape();
        if ks[1] != in_c {
            return Err(dim_err!("conv expects {} input channels, got {in_c}", ks[1]));
        }
        let (oh, ow) = self.output_hw(h, w)?;
        Ok(Geometry {
            batch,
            in_c,
            h,
            w,
            out_c: ks[0],
            kh: ks[2],
            kw: ks[3],
            oh,
            ow,
            stride: self.stride,
            pad: self.padding,
        })
    }
}

pub fn conv2d(x: &Tensor, p: &ConvParams) -> Result<Tensor> {
    let g = p.geometry(x)?;
    if !x.is_finite() {
        return Err(Error::Domain("conv input contains -inf".into()));
    }
    let xd = x.data();
    let kd = p.kernels.data();
    let mut out = vec![0.0; g.batch * g.out_c * g.oh * g.ow];
    for b in 0..g.batch {
        for oc in 0..g.out_c {
            let obase = (b * g.out_c + oc) * g.oh * g.ow;
            for ic in 0..g.in_c {
                let ibase = (b * g.in_c + ic) * g.h * g.w;
                for ky in 0..g.kh {
                    let rows = g.valid(ky, g.h, g.oh);
                    for kx in 0..g.kw {
                        let wv = kd[((oc * g.in_c + ic) * g.kh + ky) * g.kw + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        let cols = g.valid(kx, g.w, g.ow);
                        for oy in rows.clone() {
                            let iy = oy * g.stride + ky - g.pad;
                            let orow = obase + oy * g.ow;
                            let irow = ibase + iy * g.w;
                            for ox in cols.clone() {
                                let ix = ox * g.stride + kx - g.pad;
                                out[orow + ox] += wv * xd[irow + ix];
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::from_arithmetic(vec![g.batch, g.out_c, g.oh, g.ow], out)
}

pub fn conv2d_backward(x: &Tensor, p: &ConvParams, grad_out: &Tensor) -> Result<ConvGrads> {
    let g = p.geometry(x)?;
    if grad_out.shape() != [g.batch, g.out_c, g.oh, g.ow] {
        return Err(dim_err!(
            "conv backward: gradient {:?}, expected {:?}",
            grad_out.shape(),
            [g.batch, g.out_c, g.oh, g.ow]
        ));
    }
    let xd = x.data();
    let kd = p.kernels.data();
    let gd = grad_out.data();
    let mut gx = vec![0.0; xd.len()];
    let mut gk = vec![0.0; kd.len()];
    for b in 0..g.batch {
        for oc in 0..g.out_c {
            let obase = (b * g.out_c + oc) * g.oh * g.ow;
            for ic in 0..g.in_c {
                let ibase = (b * g.in_c + ic) * g.h * g.w;
                for ky in 0..g.kh {
                    let rows = g.valid(ky, g.h, g.oh);
                    for kx in 0..g.kw {
                        let kidx = ((oc * g.in_c + ic) * g.kh + ky) * g.kw + kx;
                        let wv = kd[kidx];
                        let cols = g.valid(kx, g.w, g.ow);
                        let mut acc = 0.0;
                        for oy in rows.clone() {
                            let iy = oy * g.stride + ky - g.pad;
                            let orow = obase + oy * g.ow;
                            let irow = ibase + iy * g.w;
                            for ox in cols.clone() {
                                let ix = ox * g.stride + kx - g.pad;
                                let go = gd[orow + ox];
                                acc += go * xd[irow + ix];
                                gx[irow + ix] += go * wv;
                            }
                        }
                        gk[kidx] += acc;
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        input: Tensor::from_arithmetic(x.shape().to_vec(), gx)?,
        kernels: Tensor::from_arithmetic(p.kernels.shape().to_vec(), gk)?,
    })
}
