//! Dense multilayer perceptrons with hand-written reverse- and forward-mode
//! differentiation.
//!
//! Rows of a batch are independent samples. A layer computes
//! `act(x · Wᵀ + b)` with `W` stored as `out × in`.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::counter::{self, Kind};
use super::Scalar;
use crate::error::{FpmdError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Tanh,
    Gelu,
    Identity,
}

impl Activation {
    pub fn tag(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Gelu => "gelu",
            Activation::Identity => "identity",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "tanh" => Some(Activation::Tanh),
            "gelu" => Some(Activation::Gelu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }

    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Tanh => tanh(z),
            Activation::Gelu => {
                let (k, c) = gelu_consts::<T>();
                let half = T::from(0.5).unwrap();
                half * z * (T::one() + tanh(k * (z + c * z * z * z)))
            }
            Activation::Identity => z,
        }
    }

    fn apply_inplace<T: Scalar>(self, z: &mut Array2<T>) {
        match self {
            Activation::Tanh => {
                match (z as &mut dyn std::any::Any).downcast_mut::<Array2<f32>>() {
                    Some(z32) => z32.mapv_inplace(tanh_f32),
                    None => z.mapv_inplace(tanh),
                }
            }
            Activation::Gelu => z.mapv_inplace(|v| self.apply(v)),
            Activation::Identity => {}
        }
    }

    /// Derivative given the pre-activation `z` and the activation output `h`.
    fn derivative<T: Scalar>(self, z: T, h: T) -> T {
        match self {
            Activation::Tanh => T::one() - h * h,
            Activation::Gelu => {
                let (k, c) = gelu_consts::<T>();
                let half = T::from(0.5).unwrap();
                let three = T::from(3.0).unwrap();
                let th = tanh(k * (z + c * z * z * z));
                half * (T::one() + th)
                    + half * z * (T::one() - th * th) * k * (T::one() + three * c * z * z)
            }
            Activation::Identity => T::one(),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// `f64` uses the library `tanh`; `f32` uses a rational approximation
/// (absolute error below 4e-7) that the compiler can vectorize.
#[inline]
fn tanh<T: Scalar>(z: T) -> T {
    if std::mem::size_of::<T>() == 4 {
        T::from(tanh_f32(z.to_f32().unwrap())).unwrap()
    } else {
        z.tanh()
    }
}

#[inline(always)]
fn tanh_f32(x: f32) -> f32 {
    let x = x.clamp(-7.905_311, 7.905_311);
    let x2 = x * x;
    let mut p = x2 * -2.760_768_5e-16 + 2.000_188e-13;
    p = x2 * p - 8.604_672e-11;
    p = x2 * p + 5.122_297e-8;
    p = x2 * p + 1.485_722_4e-5;
    p = x2 * p + 6.372_619e-4;
    p = x2 * p + 4.893_524_6e-3;
    let mut q = x2 * 1.198_258_4e-6 + 1.185_347_1e-4;
    q = x2 * q + 2.268_434_7e-3;
    q = x2 * q + 4.893_525e-3;
    x * p / q
}

// tanh approximation of GELU
fn gelu_consts<T: Scalar>() -> (T, T) {
    (
        T::from(0.797_884_560_802_865_4).unwrap(),
        T::from(0.044715).unwrap(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    /// `out × in`
    pub weight: Array2<T>,
    pub bias: Array1<T>,
    pub activation: Activation,
}

impl<T: Scalar> Layer<T> {
    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// Gradient (or any other tensor list) shaped like the parameters of an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads<T> {
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
}

impl<T: Scalar> ParamGrads<T> {
    pub fn zeros_like(net: &Mlp<T>) -> Self {
        ParamGrads {
            weights: net
                .layers
                .iter()
                .map(|l| Array2::zeros(l.weight.raw_dim()))
                .collect(),
            biases: net
                .layers
                .iter()
                .map(|l| Array1::zeros(l.bias.raw_dim()))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }

    /// Flat iterator over every entry, layer by layer, weights before biases.
    pub fn iter(&self) -> impl Iterator<Item = T> + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
    }

    pub fn len(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn norm(&self) -> T {
        self.iter().fold(T::zero(), |acc, x| acc + x * x).sqrt()
    }

    pub fn scale(&mut self, factor: T) {
        for w in &mut self.weights {
            w.mapv_inplace(|x| x * factor);
        }
        for b in &mut self.biases {
            b.mapv_inplace(|x| x * factor);
        }
    }

    /// `self += factor * other`
    pub fn add_scaled(&mut self, other: &ParamGrads<T>, factor: T) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.scaled_add(factor, b);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.scaled_add(factor, b);
        }
    }
}

/// Intermediate values of one forward pass, kept for the backward pass.
struct Trace<T> {
    /// Input of every layer; `inputs[0]` is the network input.
    inputs: Vec<Array2<T>>,
    pre: Vec<Array2<T>>,
    output: Array2<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> Mlp<T> {
    /// Builds a network from explicit layers, checking that dimensions chain
    /// and every entry is finite.
    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(FpmdError::InvalidArgument(
                "network needs at least one layer".into(),
            ));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.out_dim() {
                return Err(FpmdError::shape(
                    "layer bias",
                    layer.out_dim(),
                    layer.bias.len(),
                ));
            }
            if i > 0 && layers[i - 1].out_dim() != layer.in_dim() {
                return Err(FpmdError::shape(
                    "layer chain",
                    layers[i - 1].out_dim(),
                    layer.in_dim(),
                ));
            }
            if !layer.weight.iter().chain(layer.bias.iter()).all(|x| x.is_finite()) {
                return Err(FpmdError::NonFinite(format!("layer {i} parameters")));
            }
        }
        Ok(Mlp { layers })
    }

    /// Fan-in uniform initialization `±√(1/fan_in)` for every layer, with the
    /// last layer additionally multiplied by `final_scale`.
    ///
    /// `sizes` lists `[input, hidden.., output]`.
    pub fn init<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        final_scale: T,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(FpmdError::InvalidArgument(format!(
                "bad layer sizes {sizes:?}"
            )));
        }
        let n_layers = sizes.len() - 1;
        let mut layers = Vec::with_capacity(n_layers);
        for i in 0..n_layers {
            let (fan_in, fan_out) = (sizes[i], sizes[i + 1]);
            let bound = (1.0 / fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            let last = i + 1 == n_layers;
            let scale = if last { final_scale } else { T::one() };
            let mut draw = || T::from(dist.sample(rng)).unwrap() * scale;
            let weight = Array2::from_shape_simple_fn((fan_out, fan_in), &mut draw);
            let bias = Array1::from_shape_simple_fn(fan_out, &mut draw);
            layers.push(Layer {
                weight,
                bias,
                activation: if last { Activation::Identity } else { hidden },
            });
        }
        Mlp::from_layers(layers)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|x| x.is_finite()))
    }

    /// Zeroes the final layer so the network is identically zero.
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.last_mut().expect("non-empty");
        last.weight.fill(T::zero());
        last.bias.fill(T::zero());
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Mlp<U> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: l.weight.mapv(|x| U::from(x).unwrap()),
                    bias: l.bias.mapv(|x| U::from(x).unwrap()),
                    activation: l.activation,
                })
                .collect(),
        }
    }

    fn check_input(&self, x: &ArrayView2<T>, context: &'static str) -> Result<()> {
        if x.ncols() != self.in_dim() {
            return Err(FpmdError::shape(context, self.in_dim(), x.ncols()));
        }
        Ok(())
    }

    fn affine(layer: &Layer<T>, x: &ArrayView2<T>) -> Array2<T> {
        let mut z = x.dot(&layer.weight.t());
        z.rows_mut().into_iter().for_each(|mut row| row.zip_mut_with(&layer.bias, |a, &b| *a = *a + b));
        z
    }

    pub fn forward(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_input(&x, "forward input")?;
        counter::record(Kind::Forward, x.nrows());
        let mut h = x.to_owned();
        for layer in &self.layers {
            let mut z = Self::affine(layer, &h.view());
            layer.activation.apply_inplace(&mut z);
            h = z;
        }
        Ok(h)
    }

    fn forward_trace(&self, x: ArrayView2<T>) -> Trace<T> {
        counter::record(Kind::Grad, x.nrows());
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for layer in &self.layers {
            let z = Self::affine(layer, &h.view());
            let mut next = z.clone();
            layer.activation.apply_inplace(&mut next);
            inputs.push(h);
            pre.push(z);
            h = next;
        }
        Trace {
            inputs,
            pre,
            output: h,
        }
    }

    /// Forward pass followed by the vector-Jacobian product with `upstream`.
    ///
    /// Returns the network output, `∂⟨upstream, f(x)⟩/∂params` and the same
    /// derivative with respect to the input.
    pub fn value_and_grad(
        &self,
        x: ArrayView2<T>,
        upstream: ArrayView2<T>,
    ) -> Result<(Array2<T>, ParamGrads<T>, Array2<T>)> {
        self.grad_with(x, |_| Ok(upstream.to_owned()))
    }

    /// Like [`Mlp::value_and_grad`], but the upstream gradient is computed
    /// from the forward output by `upstream`, so a loss needs only one pass.
    pub fn grad_with<F>(
        &self,
        x: ArrayView2<T>,
        upstream: F,
    ) -> Result<(Array2<T>, ParamGrads<T>, Array2<T>)>
    where
        F: FnOnce(&Array2<T>) -> Result<Array2<T>>,
    {
        self.check_input(&x, "grad input")?;
        let trace = self.forward_trace(x);
        let mut delta = upstream(&trace.output)?;
        if delta.dim() != trace.output.dim() {
            return Err(FpmdError::shape(
                "grad upstream",
                format!("{:?}", trace.output.dim()),
                format!("{:?}", delta.dim()),
            ));
        }
        let n = self.layers.len();
        let mut weights = Vec::with_capacity(n);
        let mut biases = Vec::with_capacity(n);
        for i in (0..n).rev() {
            let layer = &self.layers[i];
            if layer.activation != Activation::Identity {
                // tanh' is cheapest from the layer output
                let out = if i + 1 == n {
                    &trace.output
                } else {
                    &trace.inputs[i + 1]
                };
                Zip::from(&mut delta)
                    .and(&trace.pre[i])
                    .and(out)
                    .for_each(|d, &z, &h| *d = *d * layer.activation.derivative(z, h));
            }
            weights.push(delta.t().dot(&trace.inputs[i]));
            biases.push(delta.sum_axis(Axis(0)));
            delta = delta.dot(&layer.weight);
        }
        weights.reverse();
        biases.reverse();
        Ok((trace.output, ParamGrads { weights, biases }, delta))
    }

    /// `∂⟨upstream, f(x)⟩/∂params`.
    pub fn grad(&self, x: ArrayView2<T>, upstream: ArrayView2<T>) -> Result<ParamGrads<T>> {
        self.value_and_grad(x, upstream).map(|(_, g, _)| g)
    }

    /// Forward-mode directional derivative: returns `(f(x), J(x)·tangent)`
    /// row by row.
    pub fn jvp(
        &self,
        x: ArrayView2<T>,
        tangent: ArrayView2<T>,
    ) -> Result<(Array2<T>, Array2<T>)> {
        self.check_input(&x, "jvp input")?;
        if tangent.dim() != x.dim() {
            return Err(FpmdError::shape(
                "jvp tangent",
                format!("{:?}", x.dim()),
                format!("{:?}", tangent.dim()),
            ));
        }
        counter::record(Kind::Jvp, x.nrows());
        let mut h = x.to_owned();
        let mut dh = tangent.to_owned();
        for layer in &self.layers {
            let mut z = Self::affine(layer, &h.view());
            let mut dz = dh.dot(&layer.weight.t());
            if layer.activation != Activation::Identity {
                Zip::from(&mut z).and(&mut dz).for_each(|z, dz| {
                    let pre = *z;
                    let post = layer.activation.apply(pre);
                    *dz = *dz * layer.activation.derivative(pre, post);
                    *z = post;
                });
            }
            h = z;
            dh = dz;
        }
        Ok((h, dh))
    }

    /// `self ← τ·online + (1−τ)·self`, entrywise.
    pub fn polyak_from(&mut self, online: &Mlp<T>, tau: T) {
        let keep = T::one() - tau;
        for (dst, src) in self.layers.iter_mut().zip(&online.layers) {
            Zip::from(&mut dst.weight)
                .and(&src.weight)
                .for_each(|d, &s| *d = tau * s + keep * *d);
            Zip::from(&mut dst.bias)
                .and(&src.bias)
                .for_each(|d, &s| *d = tau * s + keep * *d);
        }
    }

    /// Flat copy of all parameters in [`ParamGrads::iter`] order.
    pub fn flat_params(&self) -> Vec<T> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    /// Mutable access to the `index`-th parameter in flat order.
    pub fn param_mut(&mut self, mut index: usize) -> &mut T {
        for layer in &mut self.layers {
            let nw = layer.weight.len();
            if index < nw {
                let cols = layer.weight.ncols();
                return &mut layer.weight[[index / cols, index % cols]];
            }
            index -= nw;
            if index < layer.bias.len() {
                return &mut layer.bias[index];
            }
            index -= layer.bias.len();
        }
        panic!("parameter index out of range");
    }
}
