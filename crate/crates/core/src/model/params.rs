use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::tape::{Tape, Var};

/// Flat list of named parameter tensors. Biases and layer-norm vectors are
/// stored as 1×n matrices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    pub names: Vec<String>,
    pub tensors: Vec<Array2<f64>>,
}

impl ParamStore {
    pub fn add(&mut self, name: String, tensor: Array2<f64>) -> usize {
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.tensors.push(tensor);
        self.tensors.len() - 1
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Array2<f64>> {
        self.index(name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Array2<f64>> {
        self.index(name).map(|i| &mut self.tensors[i])
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// One gradient tensor per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Array2<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &ParamStore) -> Self {
        Self { tensors: params.tensors.iter().map(|t| Array2::zeros(t.dim())).collect() }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.tensors.iter_mut().for_each(|t| *t *= s);
    }

    pub fn norm(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Multilayer perceptron: `hidden_layers` softplus layers of width `hidden`,
/// a linear output layer, and an optional layer norm on the output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub name: String,
    /// (weight, bias) parameter indices per layer.
    pub layers: Vec<(usize, usize)>,
    /// (gain, bias) parameter indices.
    pub norm: Option<(usize, usize)>,
}

impl Mlp {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        input: usize,
        hidden: usize,
        hidden_layers: usize,
        output: usize,
        layer_norm: bool,
    ) -> Self {
        let mut widths = vec![input];
        widths.extend(std::iter::repeat(hidden).take(hidden_layers));
        widths.push(output);
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let std = (1.0 / w[0].max(1) as f64).sqrt();
                let weight = Array2::from_shape_simple_fn((w[0], w[1]), || {
                    std * rng.sample::<f64, _>(StandardNormal)
                });
                let wi = store.add(format!("{name}.w{l}"), weight);
                let bi = store.add(format!("{name}.b{l}"), Array2::zeros((1, w[1])));
                (wi, bi)
            })
            .collect();
        let norm = layer_norm.then(|| {
            (
                store.add(format!("{name}.ln_gain"), Array2::ones((1, output))),
                store.add(format!("{name}.ln_bias"), Array2::zeros((1, output))),
            )
        });
        Self { name: name.to_string(), layers, norm }
    }

    pub fn input_dim(&self, store: &ParamStore) -> usize {
        store.tensors[self.layers[0].0].nrows()
    }

    pub fn output_dim(&self, store: &ParamStore) -> usize {
        store.tensors[self.layers.last().expect("non-empty").0].ncols()
    }

    pub fn apply(&self, tape: &mut Tape<'_>, x: Var) -> Var {
        let last = self.layers.len() - 1;
        let mut h = x;
        for (l, &(w, b)) in self.layers.iter().enumerate() {
            h = tape.linear(h, w, b);
            if l < last {
                h = tape.softplus(h);
            }
        }
        if let Some((g, b)) = self.norm {
            h = tape.layer_norm(h, g, b);
        }
        h
    }
}
