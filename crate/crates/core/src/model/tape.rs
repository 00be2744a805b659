//! Minimal reverse-mode automatic differentiation over row-major matrices.
//!
//! Every value is an `Array2<f64>` whose rows are cells. Parameters live in a
//! [`ParamStore`] and are referenced by index; the tape records activations
//! so [`Tape::backward`] can replay the graph in reverse.

use std::sync::Arc;

use ndarray::{s, Array1, Array2, Axis};

use super::params::{Gradients, ParamStore};

/// Handle to a value on the tape.
pub type Var = usize;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Sparse row routing: output row `r` is `scale[r] · Σ_{j ∈ group r} x[j]`.
///
/// Covers gathers (groups of one), fixed fan-in sums and segment means.
#[derive(Debug, Clone, PartialEq)]
pub struct Routing {
    offsets: Vec<usize>,
    indices: Vec<usize>,
    scale: Vec<f64>,
    source_rows: usize,
}

impl Routing {
    pub fn from_groups(groups: &[Vec<usize>], source_rows: usize, mean: bool) -> Self {
        let mut offsets = Vec::with_capacity(groups.len() + 1);
        let mut indices = Vec::new();
        let mut scale = Vec::with_capacity(groups.len());
        offsets.push(0);
        for g in groups {
            debug_assert!(g.iter().all(|&j| j < source_rows));
            indices.extend_from_slice(g);
            offsets.push(indices.len());
            scale.push(if mean && !g.is_empty() { 1.0 / g.len() as f64 } else { 1.0 });
        }
        Self { offsets, indices, scale, source_rows }
    }

    /// One source row per output row.
    pub fn gather(index: &[usize], source_rows: usize) -> Self {
        let groups: Vec<Vec<usize>> = index.iter().map(|&i| vec![i]).collect();
        Self::from_groups(&groups, source_rows, false)
    }

    pub fn rows(&self) -> usize {
        self.scale.len()
    }

    pub fn source_rows(&self) -> usize {
        self.source_rows
    }

    pub fn group(&self, r: usize) -> &[usize] {
        &self.indices[self.offsets[r]..self.offsets[r + 1]]
    }

    fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows(), x.ncols()));
        for (r, mut row) in out.rows_mut().into_iter().enumerate() {
            for &j in self.group(r) {
                row += &x.row(j);
            }
            if self.scale[r] != 1.0 {
                row *= self.scale[r];
            }
        }
        out
    }

    fn transpose_apply(&self, g: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.source_rows, g.ncols()));
        for r in 0..self.rows() {
            let gr = g.row(r);
            for &j in self.group(r) {
                out.row_mut(j).scaled_add(self.scale[r], &gr);
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
enum Op {
    Input,
    Linear { x: Var, w: usize, b: usize },
    Softplus { x: Var },
    LayerNorm { x: Var, gain: usize, bias: usize, xhat: Array2<f64>, inv_std: Array1<f64> },
    Concat { parts: Vec<Var> },
    Route { x: Var, routing: Arc<Routing> },
}

/// Recorded computation over a borrowed parameter store.
pub struct Tape<'p> {
    params: &'p ParamStore,
    values: Vec<Array2<f64>>,
    ops: Vec<Op>,
}

fn softplus(v: f64) -> f64 {
    v.max(0.0) + (-v.abs()).exp().ln_1p()
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self { params, values: Vec::new(), ops: Vec::new() }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.values.push(value);
        self.ops.push(op);
        self.values.len() - 1
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.values[v]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn input(&mut self, x: Array2<f64>) -> Var {
        self.push(x, Op::Input)
    }

    /// `x·W + b` with `W` of shape in×out and `b` of shape 1×out.
    pub fn linear(&mut self, x: Var, w: usize, b: usize) -> Var {
        let (wm, bm) = (&self.params.tensors[w], &self.params.tensors[b]);
        let mut y = self.values[x].dot(wm);
        y += &bm.row(0);
        self.push(y, Op::Linear { x, w, b })
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        let y = self.values[x].mapv(softplus);
        self.push(y, Op::Softplus { x })
    }

    /// Row-wise layer normalization with learnable gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: usize, bias: usize) -> Var {
        let xv = &self.values[x];
        let n = xv.ncols() as f64;
        let mut xhat = xv.clone();
        let mut inv_std = Array1::zeros(xv.nrows());
        for (mut row, is) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
            let mean = row.sum() / n;
            row -= mean;
            let var = row.iter().map(|v| v * v).sum::<f64>() / n;
            *is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            row *= *is;
        }
        let g = self.params.tensors[gain].row(0);
        let b = self.params.tensors[bias].row(0);
        let mut y = xhat.clone();
        for mut row in y.rows_mut() {
            row *= &g;
            row += &b;
        }
        self.push(y, Op::LayerNorm { x, gain, bias, xhat, inv_std })
    }

    /// Column-wise concatenation; all parts must share the row count.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.values[p].view()).collect();
        let y = ndarray::concatenate(Axis(1), &views).expect("concat row counts must agree");
        self.push(y, Op::Concat { parts: parts.to_vec() })
    }

    pub fn route(&mut self, x: Var, routing: &Arc<Routing>) -> Var {
        assert_eq!(
            self.values[x].nrows(),
            routing.source_rows(),
            "routing source size mismatch"
        );
        let y = routing.apply(&self.values[x]);
        self.push(y, Op::Route { x, routing: Arc::clone(routing) })
    }

    /// Reverse pass from `seeds` (dL/d value for chosen outputs).
    pub fn backward(&self, seeds: &[(Var, Array2<f64>)]) -> Gradients {
        let mut grads = Gradients::zeros_like(self.params);
        let mut adj: Vec<Option<Array2<f64>>> = vec![None; self.values.len()];
        for (v, g) in seeds {
            assert_eq!(g.dim(), self.values[*v].dim(), "seed shape mismatch");
            accumulate(&mut adj[*v], g.clone());
        }
        for v in (0..self.values.len()).rev() {
            let Some(g) = adj[v].take() else { continue };
            match &self.ops[v] {
                Op::Input => {}
                Op::Linear { x, w, b } => {
                    let xv = &self.values[*x];
                    grads.tensors[*w] += &xv.t().dot(&g);
                    grads.tensors[*b] += &g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    let dx = g.dot(&self.params.tensors[*w].t());
                    accumulate(&mut adj[*x], dx);
                }
                Op::Softplus { x } => {
                    let mut dx = g;
                    dx.zip_mut_with(&self.values[*x], |d, &xv| *d *= sigmoid(xv));
                    accumulate(&mut adj[*x], dx);
                }
                Op::LayerNorm { x, gain, bias, xhat, inv_std } => {
                    grads.tensors[*gain] += &(&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
                    grads.tensors[*bias] += &g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    let gain_row = self.params.tensors[*gain].row(0);
                    let n = g.ncols() as f64;
                    let mut dx = g;
                    for ((mut row, xh), is) in dx.rows_mut().into_iter().zip(xhat.rows()).zip(inv_std) {
                        row *= &gain_row;
                        let m1 = row.sum() / n;
                        let m2 = row.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / n;
                        row.zip_mut_with(&xh, |d, &h| *d = is * (*d - m1 - h * m2));
                    }
                    accumulate(&mut adj[*x], dx);
                }
                Op::Concat { parts } => {
                    let mut at = 0;
                    for &p in parts {
                        let w = self.values[p].ncols();
                        accumulate(&mut adj[p], g.slice(s![.., at..at + w]).to_owned());
                        at += w;
                    }
                }
                Op::Route { x, routing } => {
                    accumulate(&mut adj[*x], routing.transpose_apply(&g));
                }
            }
        }
        grads
    }
}

fn accumulate(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
    match slot {
        Some(acc) => *acc += &g,
        None => *slot = Some(g),
    }
}
