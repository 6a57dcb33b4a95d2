//! Tape-based reverse-mode differentiation over the small operator set the
//! classifier needs.
//!
//! Every operation appends a node whose parents already exist, so node order
//! is a topological order and `backward` simply walks the tape in reverse.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    Embed {
        table: Var,
        indices: Vec<usize>,
    },
    ConvRelu {
        input: Var,
        weight: Var,
        bias: Var,
        k: usize,
    },
    MaxPool {
        input: Var,
        argmax: Vec<usize>,
    },
    Concat {
        inputs: Vec<Var>,
    },
    Reshape {
        input: Var,
    },
    Gather {
        input: Var,
        rows: Vec<usize>,
    },
    Linear {
        input: Var,
        weight: Var,
        bias: Var,
        relu: bool,
    },
    Relu {
        input: Var,
    },
    Scale {
        input: Var,
        factor: f64,
    },
    Dropout {
        input: Var,
        mask: Vec<f64>,
    },
    Sigmoid {
        input: Var,
    },
    Bce {
        input: Var,
        label: f64,
    },
    Sum {
        inputs: Vec<Var>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    grad: Option<Vec<f64>>,
    op: Op,
}

/// Probability clamp applied inside the cross-entropy.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    bound: HashMap<String, Var>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient accumulated at `v` by the last `backward`, if any reached it.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Constant input; receives a gradient but is not a parameter.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Binds a parameter from `store`; repeated binds return the same node.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        if let Some(&v) = self.bound.get(name) {
            return Ok(v);
        }
        let value = store
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown parameter {name}")))?
            .clone();
        let v = self.push(value, Op::Param);
        self.bound.insert(name.to_string(), v);
        Ok(v)
    }

    /// Row lookup into a `V x d` table. Output shape is `index_shape ++ [d]`.
    pub fn embed(&mut self, table: Var, indices: &[usize], index_shape: &[usize]) -> Result<Var> {
        let t = self.value(table);
        if t.rank() != 2 {
            return Err(Error::Shape(format!("embedding table must be 2-D, got {:?}", t.shape())));
        }
        let (rows, d) = (t.shape()[0], t.shape()[1]);
        if index_shape.iter().product::<usize>() != indices.len() {
            return Err(Error::Shape(format!(
                "{} indices do not fill shape {index_shape:?}",
                indices.len()
            )));
        }
        let mut out = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            if i >= rows {
                return Err(Error::IndexOutOfRange { index: i, rows });
            }
            out.extend_from_slice(&t.data()[i * d..(i + 1) * d]);
        }
        let mut shape = index_shape.to_vec();
        shape.push(d);
        let value = Tensor::new(shape, out)?;
        Ok(self.push(
            value,
            Op::Embed {
                table,
                indices: indices.to_vec(),
            },
        ))
    }

    /// Valid 1-D convolution over axis 1 of a `B x T x d` input with full-width
    /// filters, followed by ReLU. `weight` is `(k*d) x f`, `bias` is `f`.
    /// Output is `B x (T-k+1) x f`.
    pub fn conv_relu(&mut self, input: Var, weight: Var, bias: Var, k: usize) -> Result<Var> {
        let x = self.value(input);
        let w = self.value(weight);
        let b = self.value(bias);
        if x.rank() != 3 {
            return Err(Error::Shape(format!("conv input must be 3-D, got {:?}", x.shape())));
        }
        let (batch, t, d) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        if k == 0 || t < k {
            return Err(Error::Shape(format!("sequence length {t} shorter than filter size {k}")));
        }
        if w.shape() != [k * d, b.len()] {
            return Err(Error::Shape(format!(
                "filter shape {:?} does not match k={k}, d={d}, f={}",
                w.shape(),
                b.len()
            )));
        }
        let f = b.len();
        let kd = k * d;
        let steps = t - k + 1;
        let (xd, wd, bd) = (x.data(), w.data(), b.data());
        let mut out = vec![0.0; batch * steps * f];
        for bi in 0..batch {
            for s in 0..steps {
                let start = (bi * t + s) * d;
                let window = &xd[start..start + kd];
                let o = &mut out[(bi * steps + s) * f..(bi * steps + s + 1) * f];
                o.copy_from_slice(bd);
                for (r, &xv) in window.iter().enumerate() {
                    if xv == 0.0 {
                        continue;
                    }
                    let wrow = &wd[r * f..(r + 1) * f];
                    for (oj, &wv) in o.iter_mut().zip(wrow) {
                        *oj += xv * wv;
                    }
                }
                for oj in o.iter_mut() {
                    if *oj < 0.0 {
                        *oj = 0.0;
                    }
                }
            }
        }
        let value = Tensor::new(vec![batch, steps, f], out)?;
        Ok(self.push(
            value,
            Op::ConvRelu {
                input,
                weight,
                bias,
                k,
            },
        ))
    }

    /// Max over axis 1 of a `B x T x f` input, giving `B x f`. Ties resolve to
    /// the first position.
    pub fn max_pool(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        if x.rank() != 3 || x.shape()[1] == 0 {
            return Err(Error::Shape(format!("max_pool needs B x T x f with T > 0, got {:?}", x.shape())));
        }
        let (batch, t, f) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let xd = x.data();
        let mut out = vec![f64::NEG_INFINITY; batch * f];
        let mut argmax = vec![0usize; batch * f];
        for bi in 0..batch {
            for s in 0..t {
                let row = &xd[(bi * t + s) * f..(bi * t + s + 1) * f];
                for j in 0..f {
                    if row[j] > out[bi * f + j] {
                        out[bi * f + j] = row[j];
                        argmax[bi * f + j] = s;
                    }
                }
            }
        }
        let value = Tensor::new(vec![batch, f], out)?;
        Ok(self.push(value, Op::MaxPool { input, argmax }))
    }

    /// Concatenation along the last axis; leading dimensions must agree.
    pub fn concat(&mut self, inputs: &[Var]) -> Result<Var> {
        if inputs.is_empty() {
            return Err(Error::Shape("concat of nothing".into()));
        }
        let lead: Vec<usize> = {
            let s = self.value(inputs[0]).shape();
            s[..s.len().saturating_sub(1)].to_vec()
        };
        let rows: usize = lead.iter().product();
        let mut widths = Vec::with_capacity(inputs.len());
        for &v in inputs {
            let s = self.value(v).shape();
            if s.is_empty() || s[..s.len() - 1] != lead[..] {
                return Err(Error::Shape(format!("concat leading dims differ: {lead:?} vs {s:?}")));
            }
            widths.push(s[s.len() - 1]);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&v, &w) in inputs.iter().zip(&widths) {
                out.extend_from_slice(&self.value(v).data()[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead;
        shape.push(total);
        let value = Tensor::new(shape, out)?;
        Ok(self.push(
            value,
            Op::Concat {
                inputs: inputs.to_vec(),
            },
        ))
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(input).clone().reshape(shape)?;
        Ok(self.push(value, Op::Reshape { input }))
    }

    /// Selects rows (slices along axis 0) of `input`, possibly repeating them.
    pub fn gather(&mut self, input: Var, rows: &[usize]) -> Result<Var> {
        let x = self.value(input);
        let n = x.shape().first().copied().unwrap_or(0);
        let width = x.len().checked_div(n).unwrap_or(0);
        let mut out = Vec::with_capacity(rows.len() * width);
        for &r in rows {
            if r >= n {
                return Err(Error::IndexOutOfRange { index: r, rows: n });
            }
            out.extend_from_slice(&x.data()[r * width..(r + 1) * width]);
        }
        let mut shape = x.shape().to_vec();
        shape[0] = rows.len();
        let value = Tensor::new(shape, out)?;
        Ok(self.push(
            value,
            Op::Gather {
                input,
                rows: rows.to_vec(),
            },
        ))
    }

    /// `x W + b` over the flattened input, optionally ReLU-activated.
    /// `weight` is `n x h`, `bias` is `h`.
    pub fn linear(&mut self, input: Var, weight: Var, bias: Var, relu: bool) -> Result<Var> {
        let x = self.value(input);
        let w = self.value(weight);
        let b = self.value(bias);
        let h = b.len();
        if w.shape() != [x.len(), h] {
            return Err(Error::Shape(format!(
                "linear weight {:?} incompatible with input of {} and bias of {h}",
                w.shape(),
                x.len()
            )));
        }
        let mut out = b.data().to_vec();
        for (i, &xv) in x.data().iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            for (o, &wv) in out.iter_mut().zip(&w.data()[i * h..(i + 1) * h]) {
                *o += xv * wv;
            }
        }
        if relu {
            out.iter_mut().for_each(|o| *o = o.max(0.0));
        }
        Ok(self.push(
            Tensor::from_vec(out),
            Op::Linear {
                input,
                weight,
                bias,
                relu,
            },
        ))
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let x = self.value(input);
        let data = x.data().iter().map(|v| v.max(0.0)).collect();
        let value = Tensor::new(x.shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Relu { input })
    }

    pub fn scale(&mut self, input: Var, factor: f64) -> Var {
        let x = self.value(input);
        let data = x.data().iter().map(|v| v * factor).collect();
        let value = Tensor::new(x.shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Scale { input, factor })
    }

    /// Inverted dropout: in training each element survives with probability
    /// `keep_prob` and is scaled by `1/keep_prob`; otherwise identity.
    pub fn dropout<R: Rng>(&mut self, input: Var, keep_prob: f64, rng: &mut R, training: bool) -> Var {
        if !training || keep_prob >= 1.0 {
            return input;
        }
        let x = self.value(input);
        let mask: Vec<f64> = (0..x.len())
            .map(|_| {
                if rng.gen::<f64>() < keep_prob {
                    1.0 / keep_prob
                } else {
                    0.0
                }
            })
            .collect();
        let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::new(x.shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Dropout { input, mask })
    }

    pub fn sigmoid(&mut self, input: Var) -> Var {
        let x = self.value(input);
        let data = x.data().iter().map(|&v| sigmoid(v)).collect();
        let value = Tensor::new(x.shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Sigmoid { input })
    }

    /// Binary cross-entropy of a single probability against a 0/1 label, with
    /// the probability clamped to `[PROB_EPS, 1 - PROB_EPS]`.
    pub fn bce(&mut self, prob: Var, label: f64) -> Result<Var> {
        let p = self.value(prob);
        if p.len() != 1 {
            return Err(Error::Shape(format!("bce expects a single probability, got {:?}", p.shape())));
        }
        let value = Tensor::scalar(bce(p.data()[0], label));
        Ok(self.push(value, Op::Bce { input: prob, label }))
    }

    /// Elementwise sum of same-shaped nodes.
    pub fn sum(&mut self, inputs: &[Var]) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::Shape("sum of nothing".into()))?;
        let shape = self.value(*first).shape().to_vec();
        let mut out = vec![0.0; self.value(*first).len()];
        for &v in inputs {
            let x = self.value(v);
            if x.shape() != shape.as_slice() {
                return Err(Error::Shape(format!("sum shapes differ: {shape:?} vs {:?}", x.shape())));
            }
            for (o, xv) in out.iter_mut().zip(x.data()) {
                *o += xv;
            }
        }
        let value = Tensor::new(shape, out)?;
        Ok(self.push(
            value,
            Op::Sum {
                inputs: inputs.to_vec(),
            },
        ))
    }

    /// Reverse-mode sweep from a scalar node. Clears gradients from any
    /// previous sweep first.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.value(root).len() != 1 {
            return Err(Error::Shape("backward root must be a scalar".into()));
        }
        for n in &mut self.nodes {
            n.grad = None;
        }
        self.nodes[root.0].grad = Some(vec![1.0]);
        for idx in (0..=root.0).rev() {
            let Some(gout) = self.nodes[idx].grad.take() else {
                continue;
            };
            self.propagate(idx, &gout);
            self.nodes[idx].grad = Some(gout);
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, f: impl FnOnce(&mut [f64])) {
        let len = self.nodes[v.0].value.len();
        let g = self.nodes[v.0].grad.get_or_insert_with(|| vec![0.0; len]);
        f(g);
    }

    fn propagate(&mut self, idx: usize, gout: &[f64]) {
        // The op is moved out temporarily so parents can be borrowed mutably.
        let op = std::mem::replace(&mut self.nodes[idx].op, Op::Leaf);
        match &op {
            Op::Leaf | Op::Param => {}
            Op::Embed { table, indices } => {
                let d = self.value(*table).shape()[1];
                self.accumulate(*table, |g| {
                    for (pos, &i) in indices.iter().enumerate() {
                        for c in 0..d {
                            g[i * d + c] += gout[pos * d + c];
                        }
                    }
                });
            }
            Op::ConvRelu {
                input,
                weight,
                bias,
                k,
            } => {
                let (batch, t, d) = {
                    let s = self.value(*input).shape();
                    (s[0], s[1], s[2])
                };
                let f = self.value(*bias).len();
                let kd = k * d;
                let steps = t - k + 1;
                let out = self.nodes[idx].value.data();
                // Gradient w.r.t. the pre-activation.
                let gpre: Vec<f64> = gout
                    .iter()
                    .zip(out)
                    .map(|(&g, &o)| if o > 0.0 { g } else { 0.0 })
                    .collect();
                let xd = self.value(*input).data().to_vec();
                let wd = self.value(*weight).data().to_vec();
                let mut gw = vec![0.0; kd * f];
                let mut gb = vec![0.0; f];
                let mut gx = vec![0.0; batch * t * d];
                for bi in 0..batch {
                    for s in 0..steps {
                        let go = &gpre[(bi * steps + s) * f..(bi * steps + s + 1) * f];
                        if go.iter().all(|&v| v == 0.0) {
                            continue;
                        }
                        let start = (bi * t + s) * d;
                        for (gbj, &g) in gb.iter_mut().zip(go) {
                            *gbj += g;
                        }
                        for r in 0..kd {
                            let xv = xd[start + r];
                            let wrow = &wd[r * f..(r + 1) * f];
                            let gwrow = &mut gw[r * f..(r + 1) * f];
                            let mut acc = 0.0;
                            for j in 0..f {
                                gwrow[j] += xv * go[j];
                                acc += wrow[j] * go[j];
                            }
                            gx[start + r] += acc;
                        }
                    }
                }
                self.accumulate(*weight, |g| add_into(g, &gw));
                self.accumulate(*bias, |g| add_into(g, &gb));
                self.accumulate(*input, |g| add_into(g, &gx));
            }
            Op::MaxPool { input, argmax } => {
                let (t, f) = {
                    let s = self.value(*input).shape();
                    (s[1], s[2])
                };
                self.accumulate(*input, |g| {
                    for (pos, &s) in argmax.iter().enumerate() {
                        let (bi, j) = (pos / f, pos % f);
                        g[(bi * t + s) * f + j] += gout[pos];
                    }
                });
            }
            Op::Concat { inputs } => {
                let widths: Vec<usize> = inputs.iter().map(|&v| self.value(v).last_dim()).collect();
                let total: usize = widths.iter().sum();
                let rows = gout.len() / total.max(1);
                let mut offset = 0;
                for (&v, &w) in inputs.iter().zip(&widths) {
                    self.accumulate(v, |g| {
                        for r in 0..rows {
                            for c in 0..w {
                                g[r * w + c] += gout[r * total + offset + c];
                            }
                        }
                    });
                    offset += w;
                }
            }
            Op::Reshape { input } => self.accumulate(*input, |g| add_into(g, gout)),
            Op::Gather { input, rows } => {
                let width = if rows.is_empty() { 0 } else { gout.len() / rows.len() };
                self.accumulate(*input, |g| {
                    for (pos, &r) in rows.iter().enumerate() {
                        for c in 0..width {
                            g[r * width + c] += gout[pos * width + c];
                        }
                    }
                });
            }
            Op::Linear {
                input,
                weight,
                bias,
                relu,
            } => {
                let out = self.nodes[idx].value.data();
                let gpre: Vec<f64> = if *relu {
                    gout.iter()
                        .zip(out)
                        .map(|(&g, &o)| if o > 0.0 { g } else { 0.0 })
                        .collect()
                } else {
                    gout.to_vec()
                };
                let h = gpre.len();
                let xd = self.value(*input).data().to_vec();
                let wd = self.value(*weight).data().to_vec();
                self.accumulate(*bias, |g| add_into(g, &gpre));
                self.accumulate(*weight, |g| {
                    for (i, &xv) in xd.iter().enumerate() {
                        for j in 0..h {
                            g[i * h + j] += xv * gpre[j];
                        }
                    }
                });
                self.accumulate(*input, |g| {
                    for (i, gi) in g.iter_mut().enumerate() {
                        *gi += wd[i * h..(i + 1) * h]
                            .iter()
                            .zip(&gpre)
                            .map(|(w, g)| w * g)
                            .sum::<f64>();
                    }
                });
            }
            Op::Relu { input } => {
                let x = self.value(*input).data().to_vec();
                self.accumulate(*input, |g| {
                    for ((gi, &xv), &go) in g.iter_mut().zip(&x).zip(gout) {
                        if xv > 0.0 {
                            *gi += go;
                        }
                    }
                });
            }
            Op::Scale { input, factor } => {
                self.accumulate(*input, |g| {
                    for (gi, &go) in g.iter_mut().zip(gout) {
                        *gi += factor * go;
                    }
                });
            }
            Op::Dropout { input, mask } => {
                self.accumulate(*input, |g| {
                    for ((gi, &m), &go) in g.iter_mut().zip(mask).zip(gout) {
                        *gi += m * go;
                    }
                });
            }
            Op::Sigmoid { input } => {
                let y = self.nodes[idx].value.data().to_vec();
                self.accumulate(*input, |g| {
                    for ((gi, &yv), &go) in g.iter_mut().zip(&y).zip(gout) {
                        *gi += go * yv * (1.0 - yv);
                    }
                });
            }
            Op::Bce { input, label } => {
                let p = self.value(*input).data()[0];
                let d = if !(PROB_EPS..=1.0 - PROB_EPS).contains(&p) {
                    0.0
                } else {
                    -label / p + (1.0 - label) / (1.0 - p)
                };
                self.accumulate(*input, |g| g[0] += gout[0] * d);
            }
            Op::Sum { inputs } => {
                for &v in inputs {
                    self.accumulate(v, |g| add_into(g, gout));
                }
            }
        }
        self.nodes[idx].op = op;
    }

    /// Gradients of every bound parameter after `backward`. Parameters the
    /// sweep never reached get an all-zero gradient.
    pub fn param_grads(&self) -> BTreeMap<String, Tensor> {
        self.bound
            .iter()
            .map(|(name, &v)| {
                let node = &self.nodes[v.0];
                let data = node
                    .grad
                    .clone()
                    .unwrap_or_else(|| vec![0.0; node.value.len()]);
                let t = Tensor::new(node.value.shape().to_vec(), data).expect("same shape");
                (name.clone(), t)
            })
            .collect()
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Clamped binary cross-entropy for one prediction.
pub fn bce(p: f64, label: f64) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}
