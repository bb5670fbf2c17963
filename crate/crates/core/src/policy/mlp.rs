//! Fixed-architecture multilayer perceptron over a flat parameter slice, with
//! hand-written reverse-mode (gradients) and forward-mode (Jacobian-vector
//! products) differentiation.
//!
//! Hidden layers use `tanh`; the output layer is linear. Each layer stores its
//! weights row-major (`out × in`) followed by its bias.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::env::SimRng;
use crate::error::{contract, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    /// `[input, hidden..., output]`
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Forward-pass record needed by the backward and tangent passes.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    /// `activations[0]` is the input, `activations[l]` the output of layer `l`
    /// (post-tanh for hidden layers, linear for the last).
    pub activations: Vec<Vec<T>>,
}

impl<T> Trace<T> {
    pub fn output(&self) -> &[T] {
        self.activations.last().expect("trace has at least the input").as_slice()
    }
}

impl Architecture {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(contract("architecture needs >= 2 positive layer sizes"));
        }
        Ok(Self { sizes })
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn layer_count(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn offsets(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.sizes.windows(2).map(move |w| {
            let start = offset;
            offset += w[0] * w[1] + w[1];
            (start, w[0], w[1])
        })
    }

    pub fn unflatten<T: Scalar>(&self, theta: &[T]) -> Result<Vec<Layer<T>>> {
        if theta.len() != self.param_count() {
            return Err(contract(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                theta.len()
            )));
        }
        Ok(self
            .offsets()
            .map(|(start, inputs, outputs)| {
                let w_end = start + inputs * outputs;
                Layer {
                    inputs,
                    outputs,
                    weights: theta[start..w_end].to_vec(),
                    bias: theta[w_end..w_end + outputs].to_vec(),
                }
            })
            .collect())
    }

    pub fn flatten<T: Scalar>(layers: &[Layer<T>]) -> Vec<T> {
        let mut out = Vec::new();
        for layer in layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    /// Scaled Gaussian initialization; the last layer is shrunk by `output_gain`.
    pub fn init<T: Scalar>(&self, rng: &mut SimRng, output_gain: f64) -> Vec<T> {
        let mut theta = Vec::with_capacity(self.param_count());
        let last = self.layer_count() - 1;
        for (l, (_, inputs, outputs)) in self.offsets().enumerate() {
            let gain = if l == last { output_gain } else { 1.0 };
            let std = gain / (inputs as f64).sqrt();
            for _ in 0..inputs * outputs {
                let z: f64 = StandardNormal.sample(rng);
                theta.push(T::lit(std * z));
            }
            theta.extend(std::iter::repeat_n(T::zero(), outputs));
        }
        theta
    }

    pub fn forward<T: Scalar>(&self, theta: &[T], input: &[T]) -> Result<Trace<T>> {
        if input.len() != self.input_dim() {
            return Err(contract(format!(
                "expected input of dimension {}, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        debug_assert_eq!(theta.len(), self.param_count());
        let last = self.layer_count() - 1;
        let mut activations = Vec::with_capacity(self.sizes.len());
        activations.push(input.to_vec());
        for (l, (start, inputs, outputs)) in self.offsets().enumerate() {
            let x = &activations[l];
            let w = &theta[start..start + inputs * outputs];
            let b = &theta[start + inputs * outputs..start + inputs * outputs + outputs];
            let mut y = Vec::with_capacity(outputs);
            for o in 0..outputs {
                let row = &w[o * inputs..(o + 1) * inputs];
                let z = row.iter().zip(x).fold(b[o], |acc, (&wi, &xi)| acc + wi * xi);
                y.push(if l == last { z } else { z.tanh() });
            }
            activations.push(y);
        }
        Ok(Trace { activations })
    }

    /// Accumulates `scale * (∂ output / ∂ theta)ᵀ · grad_output` into `grad_theta`.
    pub fn backward<T: Scalar>(
        &self,
        theta: &[T],
        trace: &Trace<T>,
        grad_output: &[T],
        scale: T,
        grad_theta: &mut [T],
    ) {
        let layers: Vec<_> = self.offsets().collect();
        let last = layers.len() - 1;
        let mut delta: Vec<T> = grad_output.iter().map(|&g| g * scale).collect();
        for (l, &(start, inputs, outputs)) in layers.iter().enumerate().rev() {
            if l != last {
                // through tanh: d tanh = 1 - y^2
                for (d, &y) in delta.iter_mut().zip(&trace.activations[l + 1]) {
                    *d *= T::one() - y * y;
                }
            }
            let x = &trace.activations[l];
            let w_len = inputs * outputs;
            {
                let gw = &mut grad_theta[start..start + w_len];
                for o in 0..outputs {
                    let d = delta[o];
                    if d == T::zero() {
                        continue;
                    }
                    for (g, &xi) in gw[o * inputs..(o + 1) * inputs].iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
            }
            for (g, &d) in grad_theta[start + w_len..start + w_len + outputs]
                .iter_mut()
                .zip(&delta)
            {
                *g += d;
            }
            if l > 0 {
                let w = &theta[start..start + w_len];
                let mut prev = vec![T::zero(); inputs];
                for o in 0..outputs {
                    let d = delta[o];
                    if d == T::zero() {
                        continue;
                    }
                    for (p, &wi) in prev.iter_mut().zip(&w[o * inputs..(o + 1) * inputs]) {
                        *p += d * wi;
                    }
                }
                delta = prev;
            }
        }
    }

    /// Directional derivative of the output along parameter direction `v`
    /// (the first `param_count` entries of `v` are used).
    pub fn jvp<T: Scalar>(&self, theta: &[T], trace: &Trace<T>, v: &[T]) -> Vec<T> {
        let last = self.layer_count() - 1;
        let mut tangent: Vec<T> = vec![T::zero(); self.input_dim()];
        for (l, (start, inputs, outputs)) in self.offsets().enumerate() {
            let x = &trace.activations[l];
            let w = &theta[start..start + inputs * outputs];
            let vw = &v[start..start + inputs * outputs];
            let vb = &v[start + inputs * outputs..start + inputs * outputs + outputs];
            let mut next = Vec::with_capacity(outputs);
            for o in 0..outputs {
                let row = o * inputs..(o + 1) * inputs;
                let mut dz = vb[o];
                for ((&wi, &vwi), (&xi, &ti)) in w[row.clone()]
                    .iter()
                    .zip(&vw[row])
                    .zip(x.iter().zip(&tangent))
                {
                    dz += vwi * xi + wi * ti;
                }
                if l != last {
                    let y = trace.activations[l + 1][o];
                    dz *= T::one() - y * y;
                }
                next.push(dz);
            }
            tangent = next;
        }
        tangent
    }
}

/// Uniform draw used by categorical sampling.
pub(crate) fn uniform01(rng: &mut SimRng) -> f64 {
    rng.random::<f64>()
}
