use ndarray::{Array1, Array2, Array3, ArrayD, Axis, IxDyn};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Layer, Mode, Param, Tensor};

fn uniform_fan_in(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> ArrayD<f32> {
    let bound = 1.0 / (fan_in as f32).sqrt();
    ArrayD::from_shape_fn(IxDyn(shape), |_| rng.gen_range(-bound..bound))
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

pub struct Linear {
    pub weight: Param, // [out, in]
    pub bias: Param,   // [out]
    cache_x: Option<Array2<f32>>,
}

impl Linear {
    pub fn new(in_features: usize, out_features: usize, rng: &mut ChaCha8Rng) -> Self {
        Linear {
            weight: Param::new(uniform_fan_in(&[out_features, in_features], in_features, rng)),
            bias: Param::new(ArrayD::zeros(IxDyn(&[out_features]))),
            cache_x: None,
        }
    }
}

impl Layer for Linear {
    fn forward(&mut self, x: Tensor, _mode: Mode) -> Tensor {
        let x = x.d2();
        let w = self.weight.w.view().into_dimensionality::<ndarray::Ix2>().unwrap();
        let b = self.bias.w.view().into_dimensionality::<ndarray::Ix1>().unwrap();
        let mut y = x.dot(&w.t());
        y += &b;
        self.cache_x = Some(x);
        Tensor::D2(y)
    }

    fn backward(&mut self, grad: Tensor) -> Tensor {
        let dy = grad.d2();
        let x = self.cache_x.take().expect("backward before forward");
        let w = self.weight.w.view().into_dimensionality::<ndarray::Ix2>().unwrap();
        let dw = dy.t().dot(&x);
        let db = dy.sum_axis(Axis(0));
        let dx = dy.dot(&w);
        self.weight.g += &dw.into_dyn();
        self.bias.g += &db.into_dyn();
        Tensor::D2(dx)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

// ---------------------------------------------------------------------------
// Conv1d (valid or symmetric zero padding)
// ---------------------------------------------------------------------------

pub struct Conv1d {
    pub weight: Param, // [out_ch, in_ch, k]
    pub bias: Param,   // [out_ch]
    pub stride: usize,
    pub padding: usize,
    cache_x: Option<Array3<f32>>, // padded input
}

impl Conv1d {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        Conv1d {
            weight: Param::new(uniform_fan_in(&[out_ch, in_ch, kernel], in_ch * kernel, rng)),
            bias: Param::new(ArrayD::zeros(IxDyn(&[out_ch]))),
            stride,
            padding,
            cache_x: None,
        }
    }

    pub fn out_len(&self, l_in: usize) -> usize {
        let k = self.weight.w.shape()[2];
        (l_in + 2 * self.padding - k) / self.stride + 1
    }
}

fn pad_length(x: &Array3<f32>, padding: usize) -> Array3<f32> {
    if padding == 0 {
        return x.as_standard_layout().to_owned();
    }
    let (b, c, l) = x.dim();
    let mut out = Array3::<f32>::zeros((b, c, l + 2 * padding));
    out.slice_mut(ndarray::s![.., .., padding..padding + l])
        .assign(x);
    out
}

impl Layer for Conv1d {
    fn forward(&mut self, x: Tensor, _mode: Mode) -> Tensor {
        let x = pad_length(&x.d3(), self.padding);
        let (batch, in_ch, l_pad) = x.dim();
        let w_shape = self.weight.w.shape().to_vec();
        let (out_ch, k) = (w_shape[0], w_shape[2]);
        let s = self.stride;
        let t_len = (l_pad - k) / s + 1;
        let mut y = Array3::<f32>::zeros((batch, out_ch, t_len));
        {
            let xs = x.as_slice().unwrap();
            let ws = self.weight.w.as_slice().unwrap();
            let bs = self.bias.w.as_slice().unwrap();
            let ys = y.as_slice_mut().unwrap();
            for b in 0..batch {
                for o in 0..out_ch {
                    let y_row = &mut ys[(b * out_ch + o) * t_len..][..t_len];
                    y_row.fill(bs[o]);
                    for i in 0..in_ch {
                        let x_row = &xs[(b * in_ch + i) * l_pad..][..l_pad];
                        for kk in 0..k {
                            let wv = ws[(o * in_ch + i) * k + kk];
                            if wv == 0.0 {
                                continue;
                            }
                            for (t, yv) in y_row.iter_mut().enumerate() {
                                *yv += wv * x_row[t * s + kk];
                            }
                        }
                    }
                }
            }
        }
        self.cache_x = Some(x);
        Tensor::D3(y)
    }

    fn backward(&mut self, grad: Tensor) -> Tensor {
        let dy = grad.d3().as_standard_layout().to_owned();
        let x = self.cache_x.take().expect("backward before forward");
        let (batch, in_ch, l_pad) = x.dim();
        let w_shape = self.weight.w.shape().to_vec();
        let (out_ch, k) = (w_shape[0], w_shape[2]);
        let s = self.stride;
        let t_len = dy.dim().2;
        let mut dx = Array3::<f32>::zeros((batch, in_ch, l_pad));
        {
            let xs = x.as_slice().unwrap();
            let ws = self.weight.w.as_slice().unwrap();
            let dys = dy.as_slice().unwrap();
            let dxs = dx.as_slice_mut().unwrap();
            let dws = self.weight.g.as_slice_mut().unwrap();
            let dbs = self.bias.g.as_slice_mut().unwrap();
            for b in 0..batch {
                for o in 0..out_ch {
                    let dy_row = &dys[(b * out_ch + o) * t_len..][..t_len];
                    dbs[o] += dy_row.iter().sum::<f32>();
                    for i in 0..in_ch {
                        let x_row = &xs[(b * in_ch + i) * l_pad..][..l_pad];
                        let dx_row = &mut dxs[(b * in_ch + i) * l_pad..][..l_pad];
                        for kk in 0..k {
                            let wv = ws[(o * in_ch + i) * k + kk];
                            let mut dw_acc = 0.0f32;
                            for (t, &dv) in dy_row.iter().enumerate() {
                                let p = t * s + kk;
                                dx_row[p] += wv * dv;
                                dw_acc += x_row[p] * dv;
                            }
                            dws[(o * in_ch + i) * k + kk] += dw_acc;
                        }
                    }
                }
            }
        }
        let dx = if self.padding > 0 {
            let l = l_pad - 2 * self.padding;
            dx.slice(ndarray::s![.., .., self.padding..self.padding + l])
                .to_owned()
        } else {
            dx
        };
        Tensor::D3(dx)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

// ---------------------------------------------------------------------------
// ConvTranspose1d
// ---------------------------------------------------------------------------

pub struct ConvTranspose1d {
    pub weight: Param, // [in_ch, out_ch, k]
    pub bias: Param,   // [out_ch]
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
    pub output_padding: usize,
    cache_x: Option<Array3<f32>>,
}

impl ConvTranspose1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        dilation: usize,
        output_padding: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        ConvTranspose1d {
            weight: Param::new(uniform_fan_in(&[in_ch, out_ch, kernel], in_ch * kernel, rng)),
            bias: Param::new(ArrayD::zeros(IxDyn(&[out_ch]))),
            stride,
            padding,
            dilation,
            output_padding,
            cache_x: None,
        }
    }

    pub fn out_len(&self, l_in: usize) -> usize {
        let k = self.weight.w.shape()[2];
        (l_in - 1) * self.stride + self.dilation * (k - 1) + self.output_padding + 1
            - 2 * self.padding
    }
}

impl Layer for ConvTranspose1d {
    fn forward(&mut self, x: Tensor, _mode: Mode) -> Tensor {
        let x = x.d3().as_standard_layout().to_owned();
        let (batch, in_ch, l_in) = x.dim();
        let w_shape = self.weight.w.shape().to_vec();
        let (out_ch, k) = (w_shape[1], w_shape[2]);
        let l_out = self.out_len(l_in);
        let mut y = Array3::<f32>::zeros((batch, out_ch, l_out));
        {
            let xs = x.as_slice().unwrap();
            let ws = self.weight.w.as_slice().unwrap();
            let bs = self.bias.w.as_slice().unwrap();
            let ys = y.as_slice_mut().unwrap();
            for b in 0..batch {
                for o in 0..out_ch {
                    let y_row = &mut ys[(b * out_ch + o) * l_out..][..l_out];
                    y_row.fill(bs[o]);
                    for i in 0..in_ch {
                        let x_row = &xs[(b * in_ch + i) * l_in..][..l_in];
                        for kk in 0..k {
                            let wv = ws[(i * out_ch + o) * k + kk];
                            if wv == 0.0 {
                                continue;
                            }
                            let off = kk * self.dilation;
                            for (t, &xv) in x_row.iter().enumerate() {
                                let pos = t * self.stride + off;
                                if pos >= self.padding {
                                    let p = pos - self.padding;
                                    if p < l_out {
                                        y_row[p] += wv * xv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        self.cache_x = Some(x);
        Tensor::D3(y)
    }

    fn backward(&mut self, grad: Tensor) -> Tensor {
        let dy = grad.d3().as_standard_layout().to_owned();
        let x = self.cache_x.take().expect("backward before forward");
        let (batch, in_ch, l_in) = x.dim();
        let w_shape = self.weight.w.shape().to_vec();
        let (out_ch, k) = (w_shape[1], w_shape[2]);
        let l_out = dy.dim().2;
        let mut dx = Array3::<f32>::zeros((batch, in_ch, l_in));
        {
            let xs = x.as_slice().unwrap();
            let ws = self.weight.w.as_slice().unwrap();
            let dys = dy.as_slice().unwrap();
            let dxs = dx.as_slice_mut().unwrap();
            let dws = self.weight.g.as_slice_mut().unwrap();
            let dbs = self.bias.g.as_slice_mut().unwrap();
            for b in 0..batch {
                for o in 0..out_ch {
                    let dy_row = &dys[(b * out_ch + o) * l_out..][..l_out];
                    dbs[o] += dy_row.iter().sum::<f32>();
                    for i in 0..in_ch {
                        let x_row = &xs[(b * in_ch + i) * l_in..][..l_in];
                        let dx_row = &mut dxs[(b * in_ch + i) * l_in..][..l_in];
                        for kk in 0..k {
                            let wv = ws[(i * out_ch + o) * k + kk];
                            let off = kk * self.dilation;
                            let mut dw_acc = 0.0f32;
                            for t in 0..l_in {
                                let pos = t * self.stride + off;
                                if pos >= self.padding {
                                    let p = pos - self.padding;
                                    if p < l_out {
                                        dx_row[t] += wv * dy_row[p];
                                        dw_acc += x_row[t] * dy_row[p];
                                    }
                                }
                            }
                            dws[(i * out_ch + o) * k + kk] += dw_acc;
                        }
                    }
                }
            }
        }
        Tensor::D3(dx)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

// ---------------------------------------------------------------------------
// BatchNorm1d over channels of [batch, ch, len]
// ---------------------------------------------------------------------------

pub struct BatchNorm1d {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: ArrayD<f32>,
    pub running_var: ArrayD<f32>,
    pub momentum: f32,
    pub eps: f32,
    cache: Option<BnCache>,
}

struct BnCache {
    x_hat: Array3<f32>,
    inv_std: Array1<f32>,
    mode: Mode,
}

impl BatchNorm1d {
    pub fn new(channels: usize) -> Self {
        BatchNorm1d {
            gamma: Param::new(ArrayD::ones(IxDyn(&[channels]))),
            beta: Param::new(ArrayD::zeros(IxDyn(&[channels]))),
            running_mean: ArrayD::zeros(IxDyn(&[channels])),
            running_var: ArrayD::ones(IxDyn(&[channels])),
            momentum: 0.1,
            eps: 1e-5,
            cache: None,
        }
    }
}

impl Layer for BatchNorm1d {
    fn forward(&mut self, x: Tensor, mode: Mode) -> Tensor {
        let x = x.d3();
        let (batch, ch, len) = x.dim();
        let n = (batch * len) as f32;
        let gamma = self.gamma.w.view().into_dimensionality::<ndarray::Ix1>().unwrap();
        let beta = self.beta.w.view().into_dimensionality::<ndarray::Ix1>().unwrap();
        let mut y = Array3::<f32>::zeros((batch, ch, len));
        let mut x_hat = Array3::<f32>::zeros((batch, ch, len));
        let mut inv_std = Array1::<f32>::zeros(ch);
        for c in 0..ch {
            let (mean, var) = match mode {
                Mode::Train => {
                    let mut sum = 0.0f32;
                    let mut sum_sq = 0.0f32;
                    for b in 0..batch {
                        for l in 0..len {
                            let v = x[[b, c, l]];
                            sum += v;
                            sum_sq += v * v;
                        }
                    }
                    let mean = sum / n;
                    let var = (sum_sq / n - mean * mean).max(0.0);
                    self.running_mean[c] =
                        (1.0 - self.momentum) * self.running_mean[c] + self.momentum * mean;
                    self.running_var[c] =
                        (1.0 - self.momentum) * self.running_var[c] + self.momentum * var;
                    (mean, var)
                }
                Mode::Eval => (self.running_mean[c], self.running_var[c]),
            };
            let istd = 1.0 / (var + self.eps).sqrt();
            inv_std[c] = istd;
            for b in 0..batch {
                for l in 0..len {
                    let xh = (x[[b, c, l]] - mean) * istd;
                    x_hat[[b, c, l]] = xh;
                    y[[b, c, l]] = gamma[c] * xh + beta[c];
                }
            }
        }
        self.cache = Some(BnCache {
            x_hat,
            inv_std,
            mode,
        });
        Tensor::D3(y)
    }

    fn backward(&mut self, grad: Tensor) -> Tensor {
        let dy = grad.d3();
        let cache = self.cache.take().expect("backward before forward");
        let (batch, ch, len) = dy.dim();
        let n = (batch * len) as f32;
        let gamma = self.gamma.w.view().into_dimensionality::<ndarray::Ix1>().unwrap();
        let mut dx = Array3::<f32>::zeros((batch, ch, len));
        for c in 0..ch {
            let mut sum_dy = 0.0f32;
            let mut sum_dy_xhat = 0.0f32;
            for b in 0..batch {
                for l in 0..len {
                    let d = dy[[b, c, l]];
                    sum_dy += d;
                    sum_dy_xhat += d * cache.x_hat[[b, c, l]];
                }
            }
            self.beta.g[c] += sum_dy;
            self.gamma.g[c] += sum_dy_xhat;
            let scale = gamma[c] * cache.inv_std[c];
            match cache.mode {
                Mode::Train => {
                    let mean_dy = sum_dy / n;
                    let mean_dy_xhat = sum_dy_xhat / n;
                    for b in 0..batch {
                        for l in 0..len {
                            dx[[b, c, l]] = scale
                                * (dy[[b, c, l]]
                                    - mean_dy
                                    - cache.x_hat[[b, c, l]] * mean_dy_xhat);
                        }
                    }
                }
                // eval mode normalizes with fixed statistics, so the
                // gradient is a plain per-channel scale
                Mode::Eval => {
                    for b in 0..batch {
                        for l in 0..len {
                            dx[[b, c, l]] = scale * dy[[b, c, l]];
                        }
                    }
                }
            }
        }
        Tensor::D3(dx)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.gamma, &self.beta]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn buffers(&self) -> Vec<&ArrayD<f32>> {
        vec![&self.running_mean, &self.running_var]
    }

    fn buffers_mut(&mut self) -> Vec<&mut ArrayD<f32>> {
        vec![&mut self.running_mean, &mut self.running_var]
    }
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

pub struct LeakyRelu {
    pub slope: f32,
    cache: Option<Tensor>,
}

impl LeakyRelu {
    pub fn new(slope: f32) -> Self {
        LeakyRelu { slope, cache: None }
    }

    /// Plain ReLU is the zero-slope special case.
    pub fn relu() -> Self {
        Self::new(0.0)
    }
}

impl Layer for LeakyRelu {
    fn forward(&mut self, x: Tensor, _mode: Mode) -> Tensor {
        let slope = self.slope;
        let y = match &x {
            Tensor::D2(a) => Tensor::D2(a.mapv(|v| if v >= 0.0 { v } else { slope * v })),
            Tensor::D3(a) => Tensor::D3(a.mapv(|v| if v >= 0.0 { v } else { slope * v })),
        };
        self.cache = Some(x);
        y
    }

    fn backward(&mut self, grad: Tensor) -> Tensor {
        let x = self.cache.take().expect("backward before forward");
        let slope = self.slope;
        match (grad, x) {
            (Tensor::D2(mut g), Tensor::D2(x)) => {
                g.zip_mut_with(&x, |gv, &xv| {
                    if xv < 0.0 {
                        *gv *= slope;
                    }
                });
                Tensor::D2(g)
            }
            (Tensor::D3(mut g), Tensor::D3(x)) => {
                g.zip_mut_with(&x, |gv, &xv| {
                    if xv < 0.0 {
                        *gv *= slope;
                    }
                });
                Tensor::D3(g)
            }
            _ => panic!("activation gradient rank mismatch"),
        }
    }
}

pub struct Sigmoid {
    cache_y: Option<Array2<f32>>,
}

impl Sigmoid {
    pub fn new() -> Self {
        Sigmoid { cache_y: None }
    }
}

impl Default for Sigmoid {
    fn default() -> Self {
        Self::new()
    }
}

impl Layer for Sigmoid {
    fn forward(&mut self, x: Tensor, _mode: Mode) -> Tensor {
        let y = x.d2().mapv(|v| 1.0 / (1.0 + (-v).exp()));
        self.cache_y = Some(y.clone());
        Tensor::D2(y)
    }

    fn backward(&mut self, grad: Tensor) -> Tensor {
        let y = self.cache_y.take().expect("backward before forward");
        let mut g = grad.d2();
        g.zip_mut_with(&y, |gv, &yv| *gv *= yv * (1.0 - yv));
        Tensor::D2(g)
    }
}

// ---------------------------------------------------------------------------
// Dropout (inverted scaling; identity in eval mode)
// ---------------------------------------------------------------------------

pub struct Dropout {
    pub rate: f32,
    rng: ChaCha8Rng,
    mask: Option<ArrayD<f32>>,
}

impl Dropout {
    pub fn new(rate: f32, seed: u64) -> Self {
        Dropout {
            rate,
            rng: ChaCha8Rng::seed_from_u64(seed),
            mask: None,
        }
    }
}

impl Layer for Dropout {
    fn forward(&mut self, x: Tensor, mode: Mode) -> Tensor {
        if mode == Mode::Eval || self.rate == 0.0 {
            self.mask = None;
            return x;
        }
        let keep = 1.0 - self.rate;
        let scale = 1.0 / keep;
        let rng = &mut self.rng;
        let apply = |shape: &[usize], rng: &mut ChaCha8Rng| {
            ArrayD::from_shape_fn(IxDyn(shape), |_| {
                if rng.gen::<f32>() < keep {
                    scale
                } else {
                    0.0
                }
            })
        };
        match x {
            Tensor::D2(a) => {
                let mask = apply(a.shape(), rng);
                let m2 = mask.view().into_dimensionality::<ndarray::Ix2>().unwrap();
                let y = &a * &m2;
                self.mask = Some(mask);
                Tensor::D2(y)
            }
            Tensor::D3(a) => {
                let mask = apply(a.shape(), rng);
                let m3 = mask.view().into_dimensionality::<ndarray::Ix3>().unwrap();
                let y = &a * &m3;
                self.mask = Some(mask);
                Tensor::D3(y)
            }
        }
    }

    fn backward(&mut self, grad: Tensor) -> Tensor {
        match self.mask.take() {
            None => grad,
            Some(mask) => match grad {
                Tensor::D2(g) => {
                    let m = mask.view().into_dimensionality::<ndarray::Ix2>().unwrap();
                    Tensor::D2(&g * &m)
                }
                Tensor::D3(g) => {
                    let m = mask.view().into_dimensionality::<ndarray::Ix3>().unwrap();
                    Tensor::D3(&g * &m)
                }
            },
        }
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }
}

// ---------------------------------------------------------------------------
// Shape adapters
// ---------------------------------------------------------------------------

/// [batch, ch, len] -> [batch, ch*len]
pub struct Flatten {
    from: Option<(usize, usize)>,
}

impl Flatten {
    pub fn new() -> Self {
        Flatten { from: None }
    }
}

impl Default for Flatten {
    fn default() -> Self {
        Self::new()
    }
}

impl Layer for Flatten {
    fn forward(&mut self, x: Tensor, _mode: Mode) -> Tensor {
        let a = x.d3();
        let (b, c, l) = a.dim();
        self.from = Some((c, l));
        let y = a
            .as_standard_layout()
            .to_owned()
            .into_shape((b, c * l))
            .unwrap();
        Tensor::D2(y)
    }

    fn backward(&mut self, grad: Tensor) -> Tensor {
        let (c, l) = self.from.take().expect("backward before forward");
        let g = grad.d2();
        let b = g.nrows();
        Tensor::D3(g.into_shape((b, c, l)).unwrap())
    }
}

/// [batch, ch*len] -> [batch, ch, len]
pub struct Unflatten {
    pub channels: usize,
    pub length: usize,
}

impl Unflatten {
    pub fn new(channels: usize, length: usize) -> Self {
        Unflatten { channels, length }
    }
}

impl Layer for Unflatten {
    fn forward(&mut self, x: Tensor, _mode: Mode) -> Tensor {
        let a = x.d2();
        let b = a.nrows();
        Tensor::D3(a.into_shape((b, self.channels, self.length)).unwrap())
    }

    fn backward(&mut self, grad: Tensor) -> Tensor {
        let g = grad.d3();
        let (b, c, l) = g.dim();
        Tensor::D2(
            g.as_standard_layout()
                .to_owned()
                .into_shape((b, c * l))
                .unwrap(),
        )
    }
}

/// Mean over the length axis: [batch, ch, len] -> [batch, ch]
pub struct GlobalAvgPool {
    len: Option<usize>,
}

impl GlobalAvgPool {
    pub fn new() -> Self {
        GlobalAvgPool { len: None }
    }
}

impl Default for GlobalAvgPool {
    fn default() -> Self {
        Self::new()
    }
}

impl Layer for GlobalAvgPool {
    fn forward(&mut self, x: Tensor, _mode: Mode) -> Tensor {
        let a = x.d3();
        let len = a.dim().2;
        self.len = Some(len);
        Tensor::D2(a.mean_axis(Axis(2)).unwrap())
    }

    fn backward(&mut self, grad: Tensor) -> Tensor {
        let len = self.len.take().expect("backward before forward");
        let g = grad.d2();
        let (b, c) = g.dim();
        let mut dx = Array3::<f32>::zeros((b, c, len));
        let scale = 1.0 / len as f32;
        for bi in 0..b {
            for ci in 0..c {
                let v = g[[bi, ci]] * scale;
                for l in 0..len {
                    dx[[bi, ci, l]] = v;
                }
            }
        }
        Tensor::D3(dx)
    }
}
