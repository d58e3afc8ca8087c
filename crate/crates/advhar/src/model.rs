//! The four network blocks: feature extractor F, reconstructor R, activity
//! classifier C, and discriminator D (binary pair task or per-subject
//! ablation head), plus freeze control and checkpointing.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2, Array3, ArrayD, IxDyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::Window;
use crate::nn::layers::{
    BatchNorm1d, Conv1d, ConvTranspose1d, Dropout, Flatten, GlobalAvgPool, LeakyRelu, Linear,
    Unflatten,
};
use crate::nn::{Mode, Sequential, Tensor};

/// Latent dimension, forced by the classifier's 64x256 first layer and the
/// discriminator's 2x64 = 128 concatenated input.
pub const LATENT_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Block {
    F,
    R,
    C,
    D,
}

/// Declarative layer descriptor; blocks are instantiated from these, and
/// parameter counts are derivable without instantiation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Linear {
        in_features: usize,
        out_features: usize,
    },
    Conv {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    ConvTranspose {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        dilation: usize,
        output_padding: usize,
    },
    BatchNorm {
        channels: usize,
    },
    LeakyRelu {
        slope: f32,
    },
    Dropout {
        rate: f32,
    },
    Flatten,
    Unflatten {
        channels: usize,
        length: usize,
    },
    GlobalAvgPool,
}

impl LayerSpec {
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Linear {
                in_features,
                out_features,
            } => in_features * out_features + out_features,
            LayerSpec::Conv {
                in_ch,
                out_ch,
                kernel,
                ..
            }
            | LayerSpec::ConvTranspose {
                in_ch,
                out_ch,
                kernel,
                ..
            } => in_ch * out_ch * kernel + out_ch,
            LayerSpec::BatchNorm { channels } => 2 * channels,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub block: Block,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    /// Instantiate with fan-in uniform weights and zero biases, seeded.
    pub fn build(&self, seed: u64) -> Sequential {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers: Vec<Box<dyn crate::nn::Layer>> = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| -> Box<dyn crate::nn::Layer> {
                match *l {
                    LayerSpec::Linear {
                        in_features,
                        out_features,
                    } => Box::new(Linear::new(in_features, out_features, &mut rng)),
                    LayerSpec::Conv {
                        in_ch,
                        out_ch,
                        kernel,
                        stride,
                        padding,
                    } => Box::new(Conv1d::new(in_ch, out_ch, kernel, stride, padding, &mut rng)),
                    LayerSpec::ConvTranspose {
                        in_ch,
                        out_ch,
                        kernel,
                        stride,
                        padding,
                        dilation,
                        output_padding,
                    } => Box::new(ConvTranspose1d::new(
                        in_ch,
                        out_ch,
                        kernel,
                        stride,
                        padding,
                        dilation,
                        output_padding,
                        &mut rng,
                    )),
                    LayerSpec::BatchNorm { channels } => Box::new(BatchNorm1d::new(channels)),
                    LayerSpec::LeakyRelu { slope } => Box::new(LeakyRelu::new(slope)),
                    LayerSpec::Dropout { rate } => {
                        Box::new(Dropout::new(rate, seed.wrapping_add(1000 + i as u64)))
                    }
                    LayerSpec::Flatten => Box::new(Flatten::new()),
                    LayerSpec::Unflatten { channels, length } => {
                        Box::new(Unflatten::new(channels, length))
                    }
                    LayerSpec::GlobalAvgPool => Box::new(GlobalAvgPool::new()),
                }
            })
            .collect();
        Sequential::new(layers)
    }
}

fn conv_bn_relu(specs: &mut Vec<LayerSpec>, in_ch: usize, out_ch: usize, kernel: usize) {
    specs.push(LayerSpec::Conv {
        in_ch,
        out_ch,
        kernel,
        stride: 2,
        padding: 0,
    });
    specs.push(LayerSpec::BatchNorm { channels: out_ch });
    specs.push(LayerSpec::LeakyRelu { slope: 0.0 });
}

/// Feature extractor: a 1D-convolutional encoder over (w, c) windows,
/// 4 conv blocks with channel widths 32/64/128/256 and stride-2
/// downsampling, global average pooling, and a linear projection to the
/// 64-dimensional latent.
pub fn feature_extractor_spec(channels: usize) -> NetworkSpec {
    let mut layers = Vec::new();
    conv_bn_relu(&mut layers, channels, 32, 9);
    conv_bn_relu(&mut layers, 32, 64, 5);
    conv_bn_relu(&mut layers, 64, 128, 3);
    conv_bn_relu(&mut layers, 128, 256, 3);
    layers.push(LayerSpec::GlobalAvgPool);
    layers.push(LayerSpec::Linear {
        in_features: 256,
        out_features: LATENT_DIM,
    });
    NetworkSpec {
        block: Block::F,
        layers,
    }
}

/// Reconstructor stage plan. The w=512 instantiation is the reference
/// layer table; its output shapes pin the parameters as follows. The
/// initial linear produces 128 features read as 128 channels of length 1
/// (shape row [1, 1, 128]).
/// Each dilation-16 transposed convolution then lands exactly on the listed
/// lengths: (1-1)*1 - 2*1 + 16*2 + 1 + 1 = 32 and
/// (32-1)*1 - 2*1 + 16*2 + 2 + 1 = 64. The final k=5 s=2 p=2 op=1 stages
/// each double the length, 64 -> 128 -> 256 -> 512; shorter windows drop
/// trailing doubling stages. Every convolution is followed by batch
/// normalization and leaky rectification with negative slope 0.01.
pub fn reconstructor_spec(window_size: usize, channels: usize) -> Result<NetworkSpec> {
    if window_size < 128 || window_size % 64 != 0 || !(window_size / 64).is_power_of_two() {
        return Err(Error::Config(format!(
            "reconstructor supports window sizes 64*2^n with n >= 1, got {window_size}"
        )));
    }
    let slope = LayerSpec::LeakyRelu { slope: 0.01 };
    let mut layers = vec![
        LayerSpec::Linear {
            in_features: LATENT_DIM,
            out_features: 128,
        },
        LayerSpec::Unflatten {
            channels: 128,
            length: 1,
        },
        LayerSpec::ConvTranspose {
            in_ch: 128,
            out_ch: 128,
            kernel: 3,
            stride: 1,
            padding: 1,
            dilation: 16,
            output_padding: 1,
        },
        LayerSpec::BatchNorm { channels: 128 },
        slope.clone(),
        LayerSpec::Conv {
            in_ch: 128,
            out_ch: 128,
            kernel: 3,
            stride: 1,
            padding: 1,
        },
        LayerSpec::BatchNorm { channels: 128 },
        slope.clone(),
        LayerSpec::ConvTranspose {
            in_ch: 128,
            out_ch: 64,
            kernel: 3,
            stride: 1,
            padding: 1,
            dilation: 16,
            output_padding: 2,
        },
        LayerSpec::BatchNorm { channels: 64 },
        slope.clone(),
        LayerSpec::Conv {
            in_ch: 64,
            out_ch: 64,
            kernel: 3,
            stride: 1,
            padding: 1,
        },
        LayerSpec::BatchNorm { channels: 64 },
        slope.clone(),
    ];
    let doubling_stages = (window_size / 64).trailing_zeros() as usize;
    let mut in_ch = 64;
    for _ in 0..doubling_stages {
        layers.push(LayerSpec::ConvTranspose {
            in_ch,
            out_ch: channels,
            kernel: 5,
            stride: 2,
            padding: 2,
            dilation: 1,
            output_padding: 1,
        });
        layers.push(LayerSpec::BatchNorm { channels });
        layers.push(slope.clone());
        in_ch = channels;
    }
    Ok(NetworkSpec {
        block: Block::R,
        layers,
    })
}

/// Activity classifier: 3 fully connected layers 64x256, 256x512, 512x|Y|
/// with rectification between them. Softmax is applied by `classify`.
pub fn classifier_spec(num_activities: usize) -> NetworkSpec {
    NetworkSpec {
        block: Block::C,
        layers: vec![
            LayerSpec::Linear {
                in_features: LATENT_DIM,
                out_features: 256,
            },
            LayerSpec::LeakyRelu { slope: 0.0 },
            LayerSpec::Linear {
                in_features: 256,
                out_features: 512,
            },
            LayerSpec::LeakyRelu { slope: 0.0 },
            LayerSpec::Linear {
                in_features: 512,
                out_features: num_activities,
            },
        ],
    }
}

fn discriminator_trunk(input_len: usize) -> (Vec<LayerSpec>, usize) {
    let mut layers = vec![LayerSpec::Unflatten {
        channels: 1,
        length: input_len,
    }];
    // valid convolutions: 128 -> 60 -> 28 -> 13 -> 6
    let mut len = input_len;
    for (in_ch, out_ch, kernel) in [(1usize, 32usize, 9usize), (32, 64, 5), (64, 128, 3), (128, 256, 3)] {
        layers.push(LayerSpec::Conv {
            in_ch,
            out_ch,
            kernel,
            stride: 2,
            padding: 0,
        });
        layers.push(LayerSpec::BatchNorm { channels: out_ch });
        layers.push(LayerSpec::LeakyRelu { slope: 0.0 });
        len = (len - kernel) / 2 + 1;
        if out_ch == 128 || out_ch == 256 {
            layers.push(LayerSpec::Dropout { rate: 0.3 });
        }
    }
    layers.push(LayerSpec::Flatten);
    (layers, 256 * len)
}

/// Binary pair discriminator over the length-128 concatenation of two
/// latents, treated as a 1-channel sequence. The final linear outputs a
/// logit; `discriminate` applies the sigmoid.
pub fn discriminator_spec() -> NetworkSpec {
    let (mut layers, flat) = discriminator_trunk(2 * LATENT_DIM);
    debug_assert_eq!(flat, 1536);
    layers.push(LayerSpec::Linear {
        in_features: flat,
        out_features: 256,
    });
    layers.push(LayerSpec::Dropout { rate: 0.2 });
    layers.push(LayerSpec::Linear {
        in_features: 256,
        out_features: 64,
    });
    layers.push(LayerSpec::Linear {
        in_features: 64,
        out_features: 1,
    });
    NetworkSpec {
        block: Block::D,
        layers,
    }
}

/// Ablation discriminator D_i: same trunk on a single latent, with a
/// per-subject softmax head. Output width scales with |S|.
pub fn identity_discriminator_spec(num_subjects: usize) -> NetworkSpec {
    let (mut layers, flat) = discriminator_trunk(LATENT_DIM);
    layers.push(LayerSpec::Linear {
        in_features: flat,
        out_features: 256,
    });
    layers.push(LayerSpec::Dropout { rate: 0.2 });
    layers.push(LayerSpec::Linear {
        in_features: 256,
        out_features: 64,
    });
    layers.push(LayerSpec::Linear {
        in_features: 64,
        out_features: num_subjects,
    });
    NetworkSpec {
        block: Block::D,
        layers,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleSpec {
    pub f: NetworkSpec,
    pub r: NetworkSpec,
    pub c: NetworkSpec,
    pub d: NetworkSpec,
}

impl BundleSpec {
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serialization");
        hex_digest(json.as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// The four blocks with per-block freeze flags.
pub struct ModelBundle {
    pub f: Sequential,
    pub r: Sequential,
    pub c: Sequential,
    pub d: Sequential,
    pub spec: BundleSpec,
    pub frozen_f: bool,
    pub frozen_r: bool,
    pub frozen_c: bool,
    pub frozen_d: bool,
    pub seed: u64,
    pub step_counter: u64,
}

impl ModelBundle {
    pub fn new(spec: BundleSpec, seed: u64) -> Self {
        ModelBundle {
            f: spec.f.build(seed),
            r: spec.r.build(seed.wrapping_add(1)),
            c: spec.c.build(seed.wrapping_add(2)),
            d: spec.d.build(seed.wrapping_add(3)),
            spec,
            frozen_f: false,
            frozen_r: false,
            frozen_c: false,
            frozen_d: false,
            seed,
            step_counter: 0,
        }
    }

    pub fn block(&self, b: Block) -> &Sequential {
        match b {
            Block::F => &self.f,
            Block::R => &self.r,
            Block::C => &self.c,
            Block::D => &self.d,
        }
    }

    pub fn block_mut(&mut self, b: Block) -> &mut Sequential {
        match b {
            Block::F => &mut self.f,
            Block::R => &mut self.r,
            Block::C => &mut self.c,
            Block::D => &mut self.d,
        }
    }

    pub fn set_frozen(&mut self, b: Block, flag: bool) {
        match b {
            Block::F => self.frozen_f = flag,
            Block::R => self.frozen_r = flag,
            Block::C => self.frozen_c = flag,
            Block::D => self.frozen_d = flag,
        }
    }

    pub fn is_frozen(&self, b: Block) -> bool {
        match b {
            Block::F => self.frozen_f,
            Block::R => self.frozen_r,
            Block::C => self.frozen_c,
            Block::D => self.frozen_d,
        }
    }

    /// SHA-256 over a block's parameters in layer order; used by the
    /// freeze-soundness checks.
    pub fn param_digest(&self, b: Block) -> String {
        let mut h = Sha256::new();
        for p in self.block(b).params() {
            for &v in p.w.iter() {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Deep copy of all parameters and buffers into a freshly built bundle.
    pub fn snapshot(&self) -> ModelBundle {
        let mut copy = ModelBundle::new(self.spec.clone(), self.seed);
        for (dst, src) in [
            (&mut copy.f, &self.f),
            (&mut copy.r, &self.r),
            (&mut copy.c, &self.c),
            (&mut copy.d, &self.d),
        ] {
            for (dp, sp) in dst.params_mut().into_iter().zip(src.params()) {
                dp.w.assign(&sp.w);
            }
            for (db, sb) in dst.buffers_mut().into_iter().zip(src.buffers()) {
                db.assign(sb);
            }
        }
        copy.frozen_f = self.frozen_f;
        copy.frozen_r = self.frozen_r;
        copy.frozen_c = self.frozen_c;
        copy.frozen_d = self.frozen_d;
        copy.step_counter = self.step_counter;
        copy
    }
}

/// Stack windows into a channels-first batch tensor [B, c, w].
pub fn windows_to_tensor(windows: &[&Window]) -> Array3<f32> {
    let (w, c) = windows[0].values.dim();
    let mut out = Array3::<f32>::zeros((windows.len(), c, w));
    for (b, win) in windows.iter().enumerate() {
        for t in 0..w {
            for ch in 0..c {
                out[[b, ch, t]] = win.values[[t, ch]];
            }
        }
    }
    out
}

/// F: window -> 64-dimensional latent (inference mode, deterministic).
pub fn feature_extract(f: &mut Sequential, window: &Window) -> Array1<f32> {
    let x = windows_to_tensor(&[window]);
    let latent = f.forward(Tensor::D3(x), Mode::Eval).d2();
    latent.row(0).to_owned()
}

/// R: latent -> window-shaped (w, c) matrix (inference mode).
pub fn reconstruct(r: &mut Sequential, latent: &Array1<f32>) -> Array2<f32> {
    assert_eq!(latent.len(), LATENT_DIM);
    let x = latent.clone().insert_axis(ndarray::Axis(0));
    let out = r.forward(Tensor::D2(x), Mode::Eval).d3();
    let (_, c, w) = out.dim();
    let mut mat = Array2::<f32>::zeros((w, c));
    for ch in 0..c {
        for t in 0..w {
            mat[[t, ch]] = out[[0, ch, t]];
        }
    }
    mat
}

pub fn softmax_rows(logits: &Array2<f32>) -> Array2<f32> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f32 = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// C: latent -> probability vector over K activities.
pub fn classify(c: &mut Sequential, latent: &Array1<f32>) -> Array1<f32> {
    assert_eq!(latent.len(), LATENT_DIM);
    let x = latent.clone().insert_axis(ndarray::Axis(0));
    let logits = c.forward(Tensor::D2(x), Mode::Eval).d2();
    softmax_rows(&logits).row(0).to_owned()
}

/// D: pair of latents -> probability that both come from one subject.
/// Input is the length-128 concatenation [F_a || F_b].
pub fn discriminate(d: &mut Sequential, latent_a: &Array1<f32>, latent_b: &Array1<f32>) -> f32 {
    assert_eq!(latent_a.len(), LATENT_DIM);
    assert_eq!(latent_b.len(), LATENT_DIM);
    let mut x = Array2::<f32>::zeros((1, 2 * LATENT_DIM));
    x.row_mut(0)
        .iter_mut()
        .zip(latent_a.iter().chain(latent_b.iter()))
        .for_each(|(o, &v)| *o = v);
    let logit = d.forward(Tensor::D2(x), Mode::Eval).d2()[[0, 0]];
    1.0 / (1.0 + (-logit).exp())
}

/// D_i: single latent -> probability vector over training subjects.
pub fn discriminate_identity(d: &mut Sequential, latent: &Array1<f32>) -> Array1<f32> {
    assert_eq!(latent.len(), LATENT_DIM);
    let x = latent.clone().insert_axis(ndarray::Axis(0));
    let logits = d.forward(Tensor::D2(x), Mode::Eval).d2();
    softmax_rows(&logits).row(0).to_owned()
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

const CKPT_MAGIC: &[u8; 4] = b"AHCK";
const CKPT_VERSION: u32 = 1;

fn write_arrays<W: Write>(w: &mut W, arrays: &[&ArrayD<f32>]) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(arrays.len() as u32)?;
    for a in arrays {
        w.write_u32::<LittleEndian>(a.ndim() as u32)?;
        for &d in a.shape() {
            w.write_u32::<LittleEndian>(d as u32)?;
        }
        for &v in a.iter() {
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

fn read_arrays<R: Read>(r: &mut R) -> std::io::Result<Vec<ArrayD<f32>>> {
    let count = r.read_u32::<LittleEndian>()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let ndim = r.read_u32::<LittleEndian>()? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(r.read_u32::<LittleEndian>()? as usize);
        }
        let len: usize = dims.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(r.read_f32::<LittleEndian>()?);
        }
        out.push(ArrayD::from_shape_vec(IxDyn(&dims), data).expect("checkpoint array shape"));
    }
    Ok(out)
}

/// Versioned binary checkpoint: spec digest + spec JSON, rng seed, training
/// step counter, then per-block parameter and buffer blobs in fixed layer
/// order.
pub fn save_checkpoint(path: &Path, bundle: &ModelBundle) -> Result<()> {
    let mut f = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    );
    let io_err = |e| Error::io(path, e);
    f.write_all(CKPT_MAGIC).map_err(io_err)?;
    f.write_u32::<LittleEndian>(CKPT_VERSION).map_err(io_err)?;
    let spec_json = serde_json::to_vec(&bundle.spec)
        .map_err(|e| Error::Checkpoint(format!("spec serialization: {e}")))?;
    let digest = bundle.spec.digest();
    f.write_u32::<LittleEndian>(digest.len() as u32).map_err(io_err)?;
    f.write_all(digest.as_bytes()).map_err(io_err)?;
    f.write_u32::<LittleEndian>(spec_json.len() as u32).map_err(io_err)?;
    f.write_all(&spec_json).map_err(io_err)?;
    f.write_u64::<LittleEndian>(bundle.seed).map_err(io_err)?;
    f.write_u64::<LittleEndian>(bundle.step_counter).map_err(io_err)?;
    for block in [&bundle.f, &bundle.r, &bundle.c, &bundle.d] {
        let params: Vec<&ArrayD<f32>> = block.params().iter().map(|p| &p.w).collect();
        write_arrays(&mut f, &params).map_err(io_err)?;
        write_arrays(&mut f, &block.buffers()).map_err(io_err)?;
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelBundle> {
    let mut f = std::io::BufReader::new(
        std::fs::File::open(path).map_err(|e| Error::io(path, e))?,
    );
    let io_err = |e| Error::io(path, e);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic).map_err(io_err)?;
    if &magic != CKPT_MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = f.read_u32::<LittleEndian>().map_err(io_err)?;
    if version != CKPT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let digest_len = f.read_u32::<LittleEndian>().map_err(io_err)? as usize;
    let mut digest = vec![0u8; digest_len];
    f.read_exact(&mut digest).map_err(io_err)?;
    let spec_len = f.read_u32::<LittleEndian>().map_err(io_err)? as usize;
    let mut spec_json = vec![0u8; spec_len];
    f.read_exact(&mut spec_json).map_err(io_err)?;
    let spec: BundleSpec = serde_json::from_slice(&spec_json)
        .map_err(|e| Error::Checkpoint(format!("spec parse: {e}")))?;
    if spec.digest().as_bytes() != digest.as_slice() {
        return Err(Error::Checkpoint("spec digest mismatch".into()));
    }
    let seed = f.read_u64::<LittleEndian>().map_err(io_err)?;
    let step_counter = f.read_u64::<LittleEndian>().map_err(io_err)?;
    let mut bundle = ModelBundle::new(spec, seed);
    bundle.step_counter = step_counter;
    for block in [&mut bundle.f, &mut bundle.r, &mut bundle.c, &mut bundle.d] {
        let params = read_arrays(&mut f).map_err(io_err)?;
        let mut dst = block.params_mut();
        if params.len() != dst.len() {
            return Err(Error::Checkpoint("parameter count mismatch".into()));
        }
        for (d, s) in dst.iter_mut().zip(params) {
            if d.w.shape() != s.shape() {
                return Err(Error::Checkpoint("parameter shape mismatch".into()));
            }
            d.w.assign(&s);
        }
        let buffers = read_arrays(&mut f).map_err(io_err)?;
        let mut dstb = block.buffers_mut();
        if buffers.len() != dstb.len() {
            return Err(Error::Checkpoint("buffer count mismatch".into()));
        }
        for (d, s) in dstb.iter_mut().zip(buffers) {
            d.assign(&s);
        }
    }
    Ok(bundle)
}

/// Testing loads only the feature extractor and classifier.
pub fn load_fc(path: &Path) -> Result<(Sequential, Sequential)> {
    let bundle = load_checkpoint(path)?;
    Ok((bundle.f, bundle.c))
}
