//! Minimal neural-network stack: 1D convolutions (plain and transposed),
//! batch normalization, dropout, linear layers, and Adam, with explicit
//! forward/backward passes. Feature maps are `[batch, channels, length]`.

pub mod adam;
pub mod layers;

use ndarray::{Array2, Array3, ArrayD};

pub use adam::Adam;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Activations flowing between layers: 2-d `[batch, features]` or 3-d
/// `[batch, channels, length]`.
#[derive(Debug, Clone)]
pub enum Tensor {
    D2(Array2<f32>),
    D3(Array3<f32>),
}

impl Tensor {
    pub fn d2(self) -> Array2<f32> {
        match self {
            Tensor::D2(a) => a,
            Tensor::D3(a) => panic!("expected 2-d tensor, got shape {:?}", a.shape()),
        }
    }

    pub fn d3(self) -> Array3<f32> {
        match self {
            Tensor::D3(a) => a,
            Tensor::D2(a) => panic!("expected 3-d tensor, got shape {:?}", a.shape()),
        }
    }

    pub fn shape(&self) -> Vec<usize> {
        match self {
            Tensor::D2(a) => a.shape().to_vec(),
            Tensor::D3(a) => a.shape().to_vec(),
        }
    }
}

/// A trainable parameter and its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param {
    pub w: ArrayD<f32>,
    pub g: ArrayD<f32>,
}

impl Param {
    pub fn new(w: ArrayD<f32>) -> Self {
        let g = ArrayD::zeros(w.raw_dim());
        Param { w, g }
    }
}

pub trait Layer: Send {
    fn forward(&mut self, x: Tensor, mode: Mode) -> Tensor;
    fn backward(&mut self, grad: Tensor) -> Tensor;
    fn params(&self) -> Vec<&Param> {
        Vec::new()
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }
    /// Non-trained state (batch-norm running statistics).
    fn buffers(&self) -> Vec<&ArrayD<f32>> {
        Vec::new()
    }
    fn buffers_mut(&mut self) -> Vec<&mut ArrayD<f32>> {
        Vec::new()
    }
    /// Reseed internal randomness (dropout masks).
    fn reseed(&mut self, _seed: u64) {}
}

/// An ordered stack of layers trained as one block.
pub struct Sequential {
    pub layers: Vec<Box<dyn Layer>>,
}

impl Sequential {
    pub fn new(layers: Vec<Box<dyn Layer>>) -> Self {
        Sequential { layers }
    }

    pub fn forward(&mut self, x: Tensor, mode: Mode) -> Tensor {
        self.layers
            .iter_mut()
            .fold(x, |acc, layer| layer.forward(acc, mode))
    }

    /// Forward pass recording the output shape after every layer.
    pub fn forward_with_shapes(&mut self, x: Tensor, mode: Mode) -> (Tensor, Vec<Vec<usize>>) {
        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut acc = x;
        for layer in &mut self.layers {
            acc = layer.forward(acc, mode);
            shapes.push(acc.shape());
        }
        (acc, shapes)
    }

    pub fn backward(&mut self, grad: Tensor) -> Tensor {
        self.layers
            .iter_mut()
            .rev()
            .fold(grad, |acc, layer| layer.backward(acc))
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn buffers(&self) -> Vec<&ArrayD<f32>> {
        self.layers.iter().flat_map(|l| l.buffers()).collect()
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut ArrayD<f32>> {
        self.layers.iter_mut().flat_map(|l| l.buffers_mut()).collect()
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.g.fill(0.0);
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.w.len()).sum()
    }

    pub fn reseed(&mut self, seed: u64) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            layer.reseed(seed.wrapping_add(i as u64));
        }
    }
}
