//! Sliding-window recurrent encoder: an LSTM cell (or a plain tanh RNN cell)
//! run over the window sequence, followed by a per-window sigmoid output
//! layer producing one detection confidence per class.
//!
//! Gradients are exact reverse-mode derivatives through the full unrolled
//! recurrence, using the stored forward trace.

use crate::error::{Result, SpamsError};
use crate::mil::TemporalProfile;
use crate::numerics::{sigmoid_scalar, Matrix, Rng, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderDims {
    /// Flattened window length, `D·w`.
    pub input_dim: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl EncoderDims {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 || self.classes == 0 {
            return Err(SpamsError::Config(format!(
                "encoder dims must be positive, got input={} hidden={} classes={}",
                self.input_dim, self.hidden, self.classes
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    Lstm,
    Rnn,
}

impl EncoderKind {
    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Lstm => "lstm",
            EncoderKind::Rnn => "rnn",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lstm" => Ok(EncoderKind::Lstm),
            "rnn" => Ok(EncoderKind::Rnn),
            other => Err(SpamsError::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

/// LSTM weights. Biases are `H×1` (and `K×1`) matrices so every parameter
/// is a `Matrix`; the same struct doubles as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub wc_h: Matrix,
    pub wc_x: Matrix,
    pub wf_h: Matrix,
    pub wf_x: Matrix,
    pub wg_h: Matrix,
    pub wg_x: Matrix,
    pub wo_h: Matrix,
    pub wo_x: Matrix,
    pub bc: Matrix,
    pub bf: Matrix,
    pub bg: Matrix,
    pub bo: Matrix,
    pub u: Matrix,
    pub bu: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnParams {
    pub wh: Matrix,
    pub wx: Matrix,
    pub bh: Matrix,
    pub u: Matrix,
    pub bu: Matrix,
}

impl LstmParams {
    pub fn zeros(d: EncoderDims) -> Self {
        let (h, x, k) = (d.hidden, d.input_dim, d.classes);
        LstmParams {
            wc_h: Matrix::zeros(h, h),
            wc_x: Matrix::zeros(h, x),
            wf_h: Matrix::zeros(h, h),
            wf_x: Matrix::zeros(h, x),
            wg_h: Matrix::zeros(h, h),
            wg_x: Matrix::zeros(h, x),
            wo_h: Matrix::zeros(h, h),
            wo_x: Matrix::zeros(h, x),
            bc: Matrix::zeros(h, 1),
            bf: Matrix::zeros(h, 1),
            bg: Matrix::zeros(h, 1),
            bo: Matrix::zeros(h, 1),
            u: Matrix::zeros(k, h),
            bu: Matrix::zeros(k, 1),
        }
    }

    pub fn dims(&self) -> EncoderDims {
        EncoderDims {
            input_dim: self.wc_x.cols(),
            hidden: self.wc_h.rows(),
            classes: self.u.rows(),
        }
    }
}

impl RnnParams {
    pub fn zeros(d: EncoderDims) -> Self {
        let (h, x, k) = (d.hidden, d.input_dim, d.classes);
        RnnParams {
            wh: Matrix::zeros(h, h),
            wx: Matrix::zeros(h, x),
            bh: Matrix::zeros(h, 1),
            u: Matrix::zeros(k, h),
            bu: Matrix::zeros(k, 1),
        }
    }

    pub fn dims(&self) -> EncoderDims {
        EncoderDims {
            input_dim: self.wx.cols(),
            hidden: self.wh.rows(),
            classes: self.u.rows(),
        }
    }
}

/// Encoder parameters; gradients use the same type and variant.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoder {
    Lstm(LstmParams),
    Rnn(RnnParams),
}

pub type ParamGrads = Encoder;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep {
    pub x: Vector,
    pub pre_cand: Vec<f64>,
    pub pre_f: Vec<f64>,
    pub pre_g: Vec<f64>,
    pub pre_o: Vec<f64>,
    pub cand: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    pub pre_p: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnStep {
    pub x: Vector,
    pub pre_h: Vec<f64>,
    pub h: Vec<f64>,
    pub pre_p: Vec<f64>,
    pub p: Vec<f64>,
}

/// Per-window records of one forward pass. `h⁰ = c⁰ = 0` are implicit.
#[derive(Debug, Clone, PartialEq)]
pub enum ForwardTrace {
    Lstm(Vec<LstmStep>),
    Rnn(Vec<RnnStep>),
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        match self {
            ForwardTrace::Lstm(s) => s.len(),
            ForwardTrace::Rnn(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn output(&self, t: usize) -> &[f64] {
        match self {
            ForwardTrace::Lstm(s) => &s[t].p,
            ForwardTrace::Rnn(s) => &s[t].p,
        }
    }

    pub fn profile(&self) -> TemporalProfile {
        let n = self.len();
        let k = if n == 0 { 0 } else { self.output(0).len() };
        let mut values = Vec::with_capacity(n * k);
        for t in 0..n {
            values.extend_from_slice(self.output(t));
        }
        TemporalProfile::new_unchecked(n, k, values)
    }
}

impl Encoder {
    pub fn zeros(kind: EncoderKind, dims: EncoderDims) -> Self {
        match kind {
            EncoderKind::Lstm => Encoder::Lstm(LstmParams::zeros(dims)),
            EncoderKind::Rnn => Encoder::Rnn(RnnParams::zeros(dims)),
        }
    }

    pub fn kind(&self) -> EncoderKind {
        match self {
            Encoder::Lstm(_) => EncoderKind::Lstm,
            Encoder::Rnn(_) => EncoderKind::Rnn,
        }
    }

    pub fn dims(&self) -> EncoderDims {
        match self {
            Encoder::Lstm(p) => p.dims(),
            Encoder::Rnn(p) => p.dims(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Encoder::zeros(self.kind(), self.dims())
    }

    /// Named tensors in a fixed order (serialization and reporting use it).
    pub fn tensors(&self) -> Vec<(&'static str, &Matrix)> {
        match self {
            Encoder::Lstm(p) => vec![
                ("Wc_h", &p.wc_h),
                ("Wc_x", &p.wc_x),
                ("Wf_h", &p.wf_h),
                ("Wf_x", &p.wf_x),
                ("Wg_h", &p.wg_h),
                ("Wg_x", &p.wg_x),
                ("Wo_h", &p.wo_h),
                ("Wo_x", &p.wo_x),
                ("bc", &p.bc),
                ("bf", &p.bf),
                ("bg", &p.bg),
                ("bo", &p.bo),
                ("U", &p.u),
                ("bu", &p.bu),
            ],
            Encoder::Rnn(p) => vec![
                ("Wh", &p.wh),
                ("Wx", &p.wx),
                ("bh", &p.bh),
                ("U", &p.u),
                ("bu", &p.bu),
            ],
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        match self {
            Encoder::Lstm(p) => vec![
                ("Wc_h", &mut p.wc_h),
                ("Wc_x", &mut p.wc_x),
                ("Wf_h", &mut p.wf_h),
                ("Wf_x", &mut p.wf_x),
                ("Wg_h", &mut p.wg_h),
                ("Wg_x", &mut p.wg_x),
                ("Wo_h", &mut p.wo_h),
                ("Wo_x", &mut p.wo_x),
                ("bc", &mut p.bc),
                ("bf", &mut p.bf),
                ("bg", &mut p.bg),
                ("bo", &mut p.bo),
                ("U", &mut p.u),
                ("bu", &mut p.bu),
            ],
            Encoder::Rnn(p) => vec![
                ("Wh", &mut p.wh),
                ("Wx", &mut p.wx),
                ("bh", &mut p.bh),
                ("U", &mut p.u),
                ("bu", &mut p.bu),
            ],
        }
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.as_slice().len()).sum()
    }

    /// `self += alpha · other`; both must share kind and dims.
    pub fn axpy(&mut self, alpha: f64, other: &Encoder) {
        debug_assert_eq!(self.kind(), other.kind());
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.axpy(alpha, b);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for (_, m) in self.tensors_mut() {
            m.scale(alpha);
        }
    }

    pub fn norm(&self) -> f64 {
        self.tensors().iter().map(|(_, m)| m.sum_sq()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, m)| m.is_finite())
    }

    pub fn forward(&self, inputs: &[Vector]) -> Result<ForwardTrace> {
        if inputs.is_empty() {
            return Err(SpamsError::EmptyInput("encoder forward needs at least one window"));
        }
        let d = self.dims();
        for x in inputs {
            if x.len() != d.input_dim {
                return Err(SpamsError::dim("encoder input", d.input_dim, x.len()));
            }
        }
        Ok(match self {
            Encoder::Lstm(p) => ForwardTrace::Lstm(lstm_forward(p, inputs)),
            Encoder::Rnn(p) => ForwardTrace::Rnn(rnn_forward(p, inputs)),
        })
    }

    /// Parameter gradients of a scalar loss whose gradient w.r.t. the
    /// temporal profile is `dl_dp` (`n_w × K`).
    pub fn backward(&self, trace: &ForwardTrace, dl_dp: &Matrix) -> Result<ParamGrads> {
        let k = self.dims().classes;
        if dl_dp.rows() != trace.len() || dl_dp.cols() != k {
            return Err(SpamsError::dim(
                "encoder backward",
                format!("trace of {} windows x {k} classes", trace.len()),
                format!("gradient {}x{}", dl_dp.rows(), dl_dp.cols()),
            ));
        }
        match (self, trace) {
            (Encoder::Lstm(p), ForwardTrace::Lstm(steps)) => Ok(Encoder::Lstm(lstm_backward(p, steps, dl_dp))),
            (Encoder::Rnn(p), ForwardTrace::Rnn(steps)) => Ok(Encoder::Rnn(rnn_backward(p, steps, dl_dp))),
            _ => Err(SpamsError::dim("encoder backward", self.kind().name(), "trace of another kind")),
        }
    }
}

fn affine(wh: &Matrix, h_prev: &[f64], wx: &Matrix, x: &[f64], b: &Matrix) -> Vec<f64> {
    let mut z = b.as_slice().to_vec();
    wh.matvec_acc(h_prev, &mut z);
    wx.matvec_acc(x, &mut z);
    z
}

fn output_layer(u: &Matrix, bu: &Matrix, h: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut pre = bu.as_slice().to_vec();
    u.matvec_acc(h, &mut pre);
    let p = pre.iter().map(|&z| sigmoid_scalar(z)).collect();
    (pre, p)
}

fn lstm_forward(p: &LstmParams, inputs: &[Vector]) -> Vec<LstmStep> {
    let hdim = p.wc_h.rows();
    let mut h_prev = vec![0.0; hdim];
    let mut c_prev = vec![0.0; hdim];
    let mut steps = Vec::with_capacity(inputs.len());
    for x in inputs {
        let pre_cand = affine(&p.wc_h, &h_prev, &p.wc_x, x, &p.bc);
        let pre_f = affine(&p.wf_h, &h_prev, &p.wf_x, x, &p.bf);
        let pre_g = affine(&p.wg_h, &h_prev, &p.wg_x, x, &p.bg);
        let pre_o = affine(&p.wo_h, &h_prev, &p.wo_x, x, &p.bo);
        let cand: Vec<f64> = pre_cand.iter().map(|z| z.tanh()).collect();
        let f: Vec<f64> = pre_f.iter().map(|&z| sigmoid_scalar(z)).collect();
        let g: Vec<f64> = pre_g.iter().map(|&z| sigmoid_scalar(z)).collect();
        let o: Vec<f64> = pre_o.iter().map(|&z| sigmoid_scalar(z)).collect();
        let c: Vec<f64> = (0..hdim).map(|i| f[i] * c_prev[i] + g[i] * cand[i]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<f64> = (0..hdim).map(|i| o[i] * tanh_c[i]).collect();
        let (pre_p, out) = output_layer(&p.u, &p.bu, &h);
        h_prev.clone_from(&h);
        c_prev.clone_from(&c);
        steps.push(LstmStep {
            x: x.clone(),
            pre_cand,
            pre_f,
            pre_g,
            pre_o,
            cand,
            f,
            g,
            o,
            c,
            tanh_c,
            h,
            pre_p,
            p: out,
        });
    }
    steps
}

fn lstm_backward(p: &LstmParams, steps: &[LstmStep], dl_dp: &Matrix) -> LstmParams {
    let hdim = p.wc_h.rows();
    let mut gr = LstmParams::zeros(p.dims());
    let zero = vec![0.0; hdim];
    let mut dh_next = vec![0.0; hdim];
    let mut dc_next = vec![0.0; hdim];
    let mut dz_c = vec![0.0; hdim];
    let mut dz_f = vec![0.0; hdim];
    let mut dz_g = vec![0.0; hdim];
    let mut dz_o = vec![0.0; hdim];

    for t in (0..steps.len()).rev() {
        let s = &steps[t];
        let (h_prev, c_prev) = if t == 0 {
            (&zero, &zero)
        } else {
            (&steps[t - 1].h, &steps[t - 1].c)
        };

        let dz_p: Vec<f64> = dl_dp.row(t).iter().zip(&s.p).map(|(d, q)| d * q * (1.0 - q)).collect();
        gr.u.add_outer(&dz_p, &s.h);
        for (b, d) in gr.bu.as_mut_slice().iter_mut().zip(&dz_p) {
            *b += d;
        }
        let mut dh = std::mem::replace(&mut dh_next, vec![0.0; hdim]);
        p.u.matvec_t_acc(&dz_p, &mut dh);

        for i in 0..hdim {
            let d_o = dh[i] * s.tanh_c[i];
            let dc = dh[i] * s.o[i] * (1.0 - s.tanh_c[i] * s.tanh_c[i]) + dc_next[i];
            let d_f = dc * c_prev[i];
            let d_g = dc * s.cand[i];
            let d_cand = dc * s.g[i];
            dc_next[i] = dc * s.f[i];
            dz_o[i] = d_o * s.o[i] * (1.0 - s.o[i]);
            dz_f[i] = d_f * s.f[i] * (1.0 - s.f[i]);
            dz_g[i] = d_g * s.g[i] * (1.0 - s.g[i]);
            dz_c[i] = d_cand * (1.0 - s.cand[i] * s.cand[i]);
        }

        for (dz, wh, dwh, dwx, db) in [
            (&dz_c, &p.wc_h, &mut gr.wc_h, &mut gr.wc_x, &mut gr.bc),
            (&dz_f, &p.wf_h, &mut gr.wf_h, &mut gr.wf_x, &mut gr.bf),
            (&dz_g, &p.wg_h, &mut gr.wg_h, &mut gr.wg_x, &mut gr.bg),
            (&dz_o, &p.wo_h, &mut gr.wo_h, &mut gr.wo_x, &mut gr.bo),
        ] {
            dwh.add_outer(dz, h_prev);
            dwx.add_outer(dz, &s.x);
            for (b, d) in db.as_mut_slice().iter_mut().zip(dz.iter()) {
                *b += d;
            }
            wh.matvec_t_acc(dz, &mut dh_next);
        }
    }
    gr
}

fn rnn_forward(p: &RnnParams, inputs: &[Vector]) -> Vec<RnnStep> {
    let mut h_prev = vec![0.0; p.wh.rows()];
    let mut steps = Vec::with_capacity(inputs.len());
    for x in inputs {
        let pre_h = affine(&p.wh, &h_prev, &p.wx, x, &p.bh);
        let h: Vec<f64> = pre_h.iter().map(|z| z.tanh()).collect();
        let (pre_p, out) = output_layer(&p.u, &p.bu, &h);
        h_prev.clone_from(&h);
        steps.push(RnnStep {
            x: x.clone(),
            pre_h,
            h,
            pre_p,
            p: out,
        });
    }
    steps
}

fn rnn_backward(p: &RnnParams, steps: &[RnnStep], dl_dp: &Matrix) -> RnnParams {
    let hdim = p.wh.rows();
    let mut gr = RnnParams::zeros(p.dims());
    let zero = vec![0.0; hdim];
    let mut dh_next = vec![0.0; hdim];
    for t in (0..steps.len()).rev() {
        let s = &steps[t];
        let h_prev = if t == 0 { &zero } else { &steps[t - 1].h };
        let dz_p: Vec<f64> = dl_dp.row(t).iter().zip(&s.p).map(|(d, q)| d * q * (1.0 - q)).collect();
        gr.u.add_outer(&dz_p, &s.h);
        for (b, d) in gr.bu.as_mut_slice().iter_mut().zip(&dz_p) {
            *b += d;
        }
        let mut dh = std::mem::replace(&mut dh_next, vec![0.0; hdim]);
        p.u.matvec_t_acc(&dz_p, &mut dh);
        let dz: Vec<f64> = dh.iter().zip(&s.h).map(|(d, h)| d * (1.0 - h * h)).collect();
        gr.wh.add_outer(&dz, h_prev);
        gr.wx.add_outer(&dz, &s.x);
        for (b, d) in gr.bh.as_mut_slice().iter_mut().zip(&dz) {
            *b += d;
        }
        p.wh.matvec_t_acc(&dz, &mut dh_next);
    }
    gr
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    /// Half-width of the uniform weight distribution; `None` means `1/√H`.
    pub scale: Option<f64>,
    pub forget_bias: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            scale: None,
            forget_bias: 1.0,
        }
    }
}

/// Weights uniform in `[−scale, scale]`, biases zero except the LSTM forget
/// gate bias.
pub fn init_params(kind: EncoderKind, dims: EncoderDims, init: InitConfig, seed: u64) -> Result<Encoder> {
    dims.validate()?;
    let scale = init.scale.unwrap_or(1.0 / (dims.hidden as f64).sqrt());
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(SpamsError::Config(format!("init scale must be finite and >= 0, got {scale}")));
    }
    let mut rng = Rng::new(seed);
    let mut enc = Encoder::zeros(kind, dims);
    for (name, m) in enc.tensors_mut() {
        if m.cols() == 1 {
            if name == "bf" {
                m.fill(init.forget_bias);
            }
            continue;
        }
        for v in m.as_mut_slice() {
            *v = rng.uniform_range(-scale, scale);
        }
    }
    Ok(enc)
}
