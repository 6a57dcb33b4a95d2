//! The PatchNet classifier.
//!
//! ```text
//! message  -> embed -> conv+pool per filter size -> concat           = e_m
//! polarity -> per line:  embed L words -> conv+pool                  (line vectors)
//!          -> per hunk:  conv+pool over its N line vectors           (hunk vectors)
//!          -> elementwise max over the H hunks                       = e_r / e_a
//! file     -> e_r ++ e_a                                             = e_f
//! patch    -> e_f of each of the F files, in order                   = e_c
//! e = e_m ++ e_c (++ e_i) -> dropout -> FC + ReLU -> FC -> sigmoid
//! ```

mod hyper;
mod store;

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

pub use hyper::{format_filter_sizes, parse_filter_sizes, DataType, Hyperparameters};
pub use store::{load_model, save_model, CONFIG_FILE, DICT_FILE, PARAMS_FILE};

use crate::corpus::{LineKind, Patch};
use crate::encode::{encode_patch, polarity_index, Dictionary, EncodedPatch};
use crate::error::{Error, Result};
use crate::nn::{glorot, uniform, Graph, ParamKind, ParamStore, Tensor, Var};

const EMBEDDING_INIT: f64 = 0.1;

/// Name and shape of every parameter, in a fixed order.
pub fn param_specs(h: &Hyperparameters, msg_vocab: usize, code_vocab: usize) -> Vec<(String, Vec<usize>)> {
    let (d, f, nf) = (h.embedding_dim, h.num_filters, h.pooled_len());
    let mut specs = Vec::new();
    let convs = |prefix: &str, width: usize, specs: &mut Vec<(String, Vec<usize>)>| {
        for &k in &h.filter_sizes {
            specs.push((format!("{prefix}.conv.k{k}.weight"), vec![k * width, f]));
            specs.push((format!("{prefix}.conv.k{k}.bias"), vec![f]));
        }
    };
    if h.data_type.uses_msg() {
        specs.push(("msg.embedding".to_string(), vec![msg_vocab, d]));
        convs("msg", d, &mut specs);
    }
    if h.data_type.uses_code() {
        specs.push(("code.embedding".to_string(), vec![code_vocab, d]));
        for side in ["removed", "added"] {
            convs(&format!("{side}.line"), d, &mut specs);
            convs(&format!("{side}.hunk"), nf, &mut specs);
        }
    }
    specs.push(("fc.weight".to_string(), vec![h.joint_len(), h.hidden_layers]));
    specs.push(("fc.bias".to_string(), vec![h.hidden_layers]));
    specs.push(("out.weight".to_string(), vec![h.hidden_layers, 1]));
    specs.push(("out.bias".to_string(), vec![1]));
    specs
}

fn side_name(kind: LineKind) -> &'static str {
    match kind {
        LineKind::Removed => "removed",
        LineKind::Added => "added",
    }
}

/// Graph nodes of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct Forward {
    pub e_m: Var,
    pub e_c: Var,
    pub e: Var,
    pub prob: Var,
}

#[derive(Debug, Clone)]
pub struct PatchNetModel {
    pub hyper: Hyperparameters,
    pub dict: Dictionary,
    pub params: ParamStore,
}

impl PatchNetModel {
    /// Fresh model: embeddings uniform in ±0.1 with the pad row zeroed,
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng>(hyper: Hyperparameters, dict: Dictionary, rng: &mut R) -> Result<Self> {
        hyper.validate()?;
        let mut params = ParamStore::new();
        for (name, shape) in param_specs(&hyper, dict.msg.len(), dict.code.len()) {
            let value = match ParamKind::from_name(&name) {
                ParamKind::Embedding => {
                    let mut t = uniform(rng, &shape, EMBEDDING_INIT);
                    t.data_mut()[..shape[1]].fill(0.0);
                    t
                }
                ParamKind::Weight => glorot(rng, &shape, shape[0], shape[1]),
                ParamKind::Bias => Tensor::zeros(&shape),
            };
            params.insert(name, value)?;
        }
        Ok(PatchNetModel { hyper, dict, params })
    }

    /// Checks that the stored parameters have exactly the expected names and
    /// shapes.
    pub fn check_params(&self) -> Result<()> {
        let specs = param_specs(&self.hyper, self.dict.msg.len(), self.dict.code.len());
        if specs.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "expected {} parameter tensors, found {}",
                specs.len(),
                self.params.len()
            )));
        }
        for (name, shape) in specs {
            match self.params.get(&name) {
                None => return Err(Error::Shape(format!("missing parameter {name}"))),
                Some(t) if t.shape() != shape.as_slice() => {
                    return Err(Error::Shape(format!(
                        "parameter {name} has shape {:?}, expected {shape:?}",
                        t.shape()
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn encode(&self, patch: &Patch) -> EncodedPatch {
        encode_patch(patch, &self.dict, &self.hyper.shape)
    }

    /// Conv+ReLU and max-pool for each filter size over a `B x T x width`
    /// input, concatenated to `B x (|sizes| * f)`.
    fn conv_block(&self, g: &mut Graph, x: Var, prefix: &str) -> Result<Var> {
        let mut pooled = Vec::with_capacity(self.hyper.filter_sizes.len());
        for &k in &self.hyper.filter_sizes {
            let w = g.param(&self.params, &format!("{prefix}.conv.k{k}.weight"))?;
            let b = g.param(&self.params, &format!("{prefix}.conv.k{k}.bias"))?;
            let c = g.conv_relu(x, w, b, k)?;
            pooled.push(g.max_pool(c)?);
        }
        if pooled.len() == 1 {
            Ok(pooled[0])
        } else {
            g.concat(&pooled)
        }
    }

    /// `e_m` as a `1 x |e_m|` node.
    pub fn message_embedding(&self, g: &mut Graph, msg: &[usize]) -> Result<Var> {
        let table = g.param(&self.params, "msg.embedding")?;
        let x = g.embed(table, msg, &[1, msg.len()])?;
        self.conv_block(g, x, "msg")
    }

    /// `e_r` or `e_a` of one `H x N x L` polarity plane as a `1 x |e_m|` node,
    /// computed hunk by hunk.
    pub fn polarity_embedding(&self, g: &mut Graph, plane: &[usize], kind: LineKind) -> Result<Var> {
        let s = &self.hyper.shape;
        let (nf, side) = (self.hyper.pooled_len(), side_name(kind));
        let table = g.param(&self.params, "code.embedding")?;
        let words = g.embed(table, plane, &[s.hunks * s.lines, s.words])?;
        let lines = self.conv_block(g, words, &format!("{side}.line"))?;
        let lines = g.reshape(lines, &[s.hunks, s.lines, nf])?;
        let hunks = self.conv_block(g, lines, &format!("{side}.hunk"))?;
        let hunks = g.reshape(hunks, &[1, s.hunks, nf])?;
        g.max_pool(hunks)
    }

    /// `e_r` (or `e_a`) of every file at once as an `F x |e_m|` node. Identical
    /// lines and hunks, in particular padding, are computed once and shared.
    pub fn polarity_embeddings(&self, g: &mut Graph, code: &[usize], kind: LineKind) -> Result<Var> {
        let s = self.hyper.shape;
        let (nf, side, p) = (self.hyper.pooled_len(), side_name(kind), polarity_index(kind));
        let mut line_ids: HashMap<&[usize], usize> = HashMap::new();
        let mut unique_words: Vec<usize> = Vec::new();
        let mut hunk_ids: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut hunk_rows: Vec<usize> = Vec::new();
        let mut hunk_of: Vec<usize> = Vec::with_capacity(s.files * s.hunks);
        for f in 0..s.files {
            for h in 0..s.hunks {
                let mut ids = Vec::with_capacity(s.lines);
                for n in 0..s.lines {
                    let start = s.offset(f, p, h, n, 0);
                    let line = &code[start..start + s.words];
                    let next = line_ids.len();
                    let id = *line_ids.entry(line).or_insert_with(|| {
                        unique_words.extend_from_slice(line);
                        next
                    });
                    ids.push(id);
                }
                let next = hunk_ids.len();
                let id = *hunk_ids.entry(ids.clone()).or_insert_with(|| {
                    hunk_rows.extend_from_slice(&ids);
                    next
                });
                hunk_of.push(id);
            }
        }
        let table = g.param(&self.params, "code.embedding")?;
        let words = g.embed(table, &unique_words, &[line_ids.len(), s.words])?;
        let lines = self.conv_block(g, words, &format!("{side}.line"))?;
        let lines = g.gather(lines, &hunk_rows)?;
        let lines = g.reshape(lines, &[hunk_ids.len(), s.lines, nf])?;
        let hunks = self.conv_block(g, lines, &format!("{side}.hunk"))?;
        let hunks = g.gather(hunks, &hunk_of)?;
        let hunks = g.reshape(hunks, &[s.files, s.hunks, nf])?;
        g.max_pool(hunks)
    }

    /// `e_f` of one `2 x H x N x L` file plane as a `1 x 2|e_m|` node.
    pub fn file_embedding(&self, g: &mut Graph, file_plane: &[usize]) -> Result<Var> {
        let half = self.hyper.shape.plane_len();
        let r = self.polarity_embedding(g, &file_plane[..half], LineKind::Removed)?;
        let a = self.polarity_embedding(g, &file_plane[half..2 * half], LineKind::Added)?;
        g.concat(&[r, a])
    }

    /// `e_c` as a `1 x F*2|e_m|` node.
    pub fn code_change_embedding(&self, g: &mut Graph, code: &[usize]) -> Result<Var> {
        let r = self.polarity_embeddings(g, code, LineKind::Removed)?;
        let a = self.polarity_embeddings(g, code, LineKind::Added)?;
        let files = g.concat(&[r, a])?;
        g.reshape(files, &[1, self.hyper.code_len()])
    }

    fn check_input(&self, x: &EncodedPatch, extra: Option<&[f64]>) -> Result<()> {
        if x.shape != self.hyper.shape || x.msg.len() != x.shape.msg_len || x.code.len() != x.shape.code_len() {
            return Err(Error::Shape(format!(
                "patch {} is encoded with {:?}, model expects {:?}",
                x.id, x.shape, self.hyper.shape
            )));
        }
        let got = extra.map_or(0, <[f64]>::len);
        if got != self.hyper.extra_dim {
            return Err(Error::Shape(format!(
                "extra feature vector has length {got}, model expects {}",
                self.hyper.extra_dim
            )));
        }
        Ok(())
    }

    /// Builds the full forward graph for one patch.
    pub fn forward<R: Rng>(
        &self,
        g: &mut Graph,
        x: &EncodedPatch,
        extra: Option<&[f64]>,
        training: bool,
        rng: &mut R,
    ) -> Result<Forward> {
        self.check_input(x, extra)?;
        let h = &self.hyper;
        let e_m = if h.data_type.uses_msg() {
            self.message_embedding(g, &x.msg)?
        } else {
            g.input(Tensor::zeros(&[1, h.pooled_len()]))
        };
        let e_c = if h.data_type.uses_code() {
            self.code_change_embedding(g, &x.code)?
        } else {
            g.input(Tensor::zeros(&[1, h.code_len()]))
        };
        let mut parts = vec![e_m, e_c];
        if let Some(extra) = extra.filter(|e| !e.is_empty()) {
            parts.push(g.input(Tensor::new(vec![1, extra.len()], extra.to_vec())?));
        }
        let e = g.concat(&parts)?;
        let dropped = g.dropout(e, h.dropout_keep_prob, rng, training);
        let (fw, fb) = (g.param(&self.params, "fc.weight")?, g.param(&self.params, "fc.bias")?);
        let hidden = g.linear(dropped, fw, fb, true)?;
        let (ow, ob) = (g.param(&self.params, "out.weight")?, g.param(&self.params, "out.bias")?);
        let logit = g.linear(hidden, ow, ob, false)?;
        let prob = g.sigmoid(logit);
        Ok(Forward { e_m, e_c, e, prob })
    }

    /// Inference score in (0, 1).
    pub fn score(&self, x: &EncodedPatch, extra: Option<&[f64]>) -> Result<f64> {
        let mut g = Graph::new();
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let f = self.forward(&mut g, x, extra, false, &mut rng)?;
        Ok(g.value(f.prob).data()[0])
    }

    /// Cross-entropy of one labeled example and its parameter gradients
    /// (regularization excluded).
    pub fn example_grads<R: Rng>(
        &self,
        x: &EncodedPatch,
        label: bool,
        extra: Option<&[f64]>,
        rng: &mut R,
    ) -> Result<(f64, BTreeMap<String, Tensor>)> {
        let mut g = Graph::new();
        let f = self.forward(&mut g, x, extra, true, rng)?;
        let loss = g.bce(f.prob, if label { 1.0 } else { 0.0 })?;
        g.backward(loss)?;
        Ok((g.value(loss).data()[0], g.param_grads()))
    }
}
