//! Graph-based intention memory.
//!
//! A detector gates updates: the graph only advances when peers are seen.
//! Node features blend a fresh observation encoding with the agent's own
//! history through single-head dot-product attention over a bounded queue;
//! edges carry observed relative positions. Mean-aggregation message
//! passing pools the graph into the context feature that calibrates
//! curiosity. A gated recurrent variant exists for the memory-type
//! ablation.

use crate::nn::{GruCache, GruCell, Mlp};
use crate::numerics::{DenseMatrix, DenseVector};
use crate::{Error, Result};
use rand::Rng;
use std::collections::VecDeque;

/// Per-agent node embeddings plus relative-position edges at one step.
#[derive(Debug, Clone)]
pub struct IntentionGraph {
    /// (agent id, embedding).
    pub nodes: Vec<(usize, Vec<f64>)>,
    /// (from node index, to node index, edge features).
    pub edges: Vec<(usize, usize, Vec<f64>)>,
    pub step: usize,
}

impl IntentionGraph {
    pub fn node_index(&self, agent_id: usize) -> Option<usize> {
        self.nodes.iter().position(|(id, _)| *id == agent_id)
    }
}

/// Edge feature layout: `[Δx, Δy, |Δx|+|Δy|, 1]`. The first two components
/// are the position part and negate under direction reversal.
pub const EDGE_DIM: usize = 4;

fn edge_features(dx: f64, dy: f64) -> Vec<f64> {
    vec![dx, dy, dx.abs() + dy.abs(), 1.0]
}

/// Bounded FIFO of intention graphs.
#[derive(Debug, Clone)]
pub struct MemoryQueue {
    graphs: VecDeque<IntentionGraph>,
    capacity: usize,
    /// False until the first gated update; the context feature stays zero
    /// before any peer has ever been detected.
    advanced: bool,
}

impl MemoryQueue {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        Self { graphs: VecDeque::new(), capacity, advanced: false }
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn newest(&self) -> Option<&IntentionGraph> {
        self.graphs.back()
    }

    pub fn has_advanced(&self) -> bool {
        self.advanced
    }

    pub fn iter(&self) -> impl Iterator<Item = &IntentionGraph> {
        self.graphs.iter()
    }

    fn push(&mut self, g: IntentionGraph) {
        if self.graphs.len() == self.capacity {
            self.graphs.pop_front();
        }
        self.graphs.push_back(g);
        self.advanced = true;
    }
}

/// Detector probabilities with the gating threshold.
#[derive(Debug, Clone)]
pub struct DetectorOutput {
    pub probs: Vec<f64>,
    pub threshold: f64,
}

impl DetectorOutput {
    /// Gate fires when any peer probability clears the threshold.
    pub fn peers_detected(&self, self_id: usize) -> bool {
        self.probs
            .iter()
            .enumerate()
            .any(|(k, p)| k != self_id && *p >= self.threshold)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// The learnable pieces of the intention memory.
#[derive(Debug, Clone)]
pub struct MemoryModule {
    /// obs → per-type presence logits.
    pub detector: Mlp,
    /// obs ⊕ type one-hot → node embedding.
    pub node_encoder: Mlp,
    /// node embedding → true-latent prediction (pretraining head).
    pub node_readout: Mlp,
    /// obs ⊕ type one-hot → (Δx, Δy) (pretraining head).
    pub edge_encoder: Mlp,
    pub n_types: usize,
    pub tau_det: f64,
}

impl MemoryModule {
    pub fn new(
        obs_dim: usize,
        n_types: usize,
        node_dim: usize,
        latent_dim: usize,
        hidden: usize,
        tau_det: f64,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            detector: Mlp::new(&[obs_dim, hidden, n_types], true, 1.0, rng),
            node_encoder: Mlp::new(&[obs_dim + n_types, hidden, node_dim], true, 1.0, rng),
            node_readout: Mlp::new(&[node_dim, latent_dim], true, 1.0, rng),
            edge_encoder: Mlp::new(&[obs_dim + n_types, hidden, 2], true, 1.0, rng),
            n_types,
            tau_det,
        }
    }

    pub fn node_dim(&self) -> usize {
        self.node_encoder.out_dim()
    }

    /// Per-type presence probabilities for one observation.
    pub fn detect_agents(&self, obs: &[f64]) -> Result<DetectorOutput> {
        if obs.len() != self.detector.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.detector.in_dim(),
                got: obs.len(),
                what: "detector observation",
            });
        }
        let (logits, _) = self.detector.forward(obs);
        Ok(DetectorOutput {
            probs: logits.iter().map(|&l| sigmoid(l)).collect(),
            threshold: self.tau_det,
        })
    }

    /// Fresh node embedding for agent `k` from the current observation.
    pub fn fresh_node(&self, obs: &[f64], k: usize) -> Vec<f64> {
        let mut input = obs.to_vec();
        let mut onehot = vec![0.0; self.n_types];
        onehot[k] = 1.0;
        input.extend(onehot);
        self.node_encoder.forward(&input).0
    }

    /// Gated graph update.
    ///
    /// Without a detected peer the newest queued graph is returned with only
    /// the self node refreshed and the step index untouched. With one, a new
    /// graph is assembled: per-agent node features are the attention blend
    /// of that agent's queued history with the fresh encoding, edges come
    /// from the observed relative offsets, and the graph joins the queue.
    pub fn update_graph(
        &self,
        queue: &mut MemoryQueue,
        obs: &[f64],
        detections: &DetectorOutput,
        offsets: &[Option<(f64, f64)>],
        self_id: usize,
    ) -> IntentionGraph {
        if !detections.peers_detected(self_id) {
            let mut g = match queue.newest() {
                Some(g) => g.clone(),
                None => IntentionGraph {
                    nodes: vec![(self_id, self.fresh_node(obs, self_id))],
                    edges: vec![],
                    step: 0,
                },
            };
            if let Some(ix) = g.node_index(self_id) {
                g.nodes[ix].1 = self.fresh_node(obs, self_id);
            }
            return g;
        }

        // Present agents: self plus every detected peer with a known offset.
        let mut present: Vec<(usize, (f64, f64))> = vec![(self_id, (0.0, 0.0))];
        for k in 0..self.n_types {
            if k == self_id {
                continue;
            }
            if detections.probs[k] >= detections.threshold {
                if let Some(off) = offsets[k] {
                    present.push((k, off));
                }
            }
        }

        let nodes: Vec<(usize, Vec<f64>)> = present
            .iter()
            .map(|(k, _)| {
                let fresh = self.fresh_node(obs, *k);
                (*k, attention_blend(queue, *k, &fresh))
            })
            .collect();

        let mut edges = Vec::new();
        for i in 0..present.len() {
            for j in 0..present.len() {
                if i == j {
                    continue;
                }
                let (dx, dy) = (
                    present[j].1 .0 - present[i].1 .0,
                    present[j].1 .1 - present[i].1 .1,
                );
                edges.push((i, j, edge_features(dx, dy)));
            }
        }

        let step = queue.newest().map_or(0, |g| g.step) + 1;
        let g = IntentionGraph { nodes, edges, step };
        queue.push(g.clone());
        g
    }
}

/// Single-head dot-product attention of a fresh node encoding over that
/// agent's history in the queue (the fresh encoding attends over history
/// plus itself, so an empty queue degenerates to the fresh encoding).
fn attention_blend(queue: &MemoryQueue, agent_id: usize, fresh: &[f64]) -> Vec<f64> {
    let mut values: Vec<&[f64]> = Vec::new();
    for g in queue.iter() {
        if let Some(ix) = g.node_index(agent_id) {
            values.push(&g.nodes[ix].1);
        }
    }
    values.push(fresh);
    let scale = 1.0 / (fresh.len() as f64).sqrt();
    let scores: Vec<f64> = values
        .iter()
        .map(|v| scale * v.iter().zip(fresh).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let weights = crate::nn::softmax(&scores);
    let mut out = vec![0.0; fresh.len()];
    for (w, v) in weights.iter().zip(&values) {
        for (o, x) in out.iter_mut().zip(*v) {
            *o += w * x;
        }
    }
    out
}

/// Binary cross-entropy summed over agent types, probabilities clipped to
/// `[1e-7, 1 − 1e-7]`.
pub fn detector_loss(probs: &[f64], labels: &[f64]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: probs.len(),
            what: "detector loss",
        });
    }
    let mut acc = 0.0;
    for (&p, &y) in probs.iter().zip(labels) {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter {
                what: "detector probability",
                detail: format!("{p} outside [0,1]"),
            });
        }
        let pc = p.clamp(1e-7, 1.0 - 1e-7);
        acc -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
    }
    Ok(acc)
}

/// Gated squared-error node loss: `Σ_j gate_j · ‖pred_j − true_j‖²`.
pub fn node_loss(predictions: &[Vec<f64>], truths: &[Vec<f64>], gates: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() || predictions.len() != gates.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            got: predictions.len(),
            what: "node loss pairs",
        });
    }
    let mut acc = 0.0;
    for ((p, t), &g) in predictions.iter().zip(truths).zip(gates) {
        if p.len() != t.len() {
            return Err(Error::DimensionMismatch {
                expected: t.len(),
                got: p.len(),
                what: "node loss latent",
            });
        }
        let sq: f64 = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
        acc += g * sq;
    }
    Ok(acc)
}

/// Mean squared error of the 2-D position components against the true
/// relative position.
pub fn edge_loss(predicted: &[f64], truth: (f64, f64)) -> Result<f64> {
    if predicted.len() < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: predicted.len(),
            what: "edge position components",
        });
    }
    let ex = predicted[0] - truth.0;
    let ey = predicted[1] - truth.1;
    Ok(0.5 * (ex * ex + ey * ey))
}

/// Mean-aggregation message passing over an intention graph.
#[derive(Debug, Clone)]
pub struct MessagePassing {
    pub layers: Vec<MpLayer>,
    /// D_f × D_node readout applied to the mean-pooled node state.
    pub readout: DenseMatrix,
}

#[derive(Debug, Clone)]
pub struct MpLayer {
    pub w_self: DenseMatrix, // D_node × D_node
    pub w_msg: DenseMatrix,  // D_node × (D_node + D_edge)
    pub bias: DenseVector,   // D_node
}

#[derive(Debug, Clone)]
pub struct MpCache {
    /// Per layer: node inputs, per-node averaged neighbor input, outputs.
    layers: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>)>,
    pooled: Vec<f64>,
    n_nodes: usize,
}

fn rand_matrix(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> DenseMatrix {
    let bound = scale / (cols as f64).sqrt();
    let mut m = DenseMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = rng.gen_range(-bound..bound);
        }
    }
    m
}

impl MessagePassing {
    pub fn new(node_dim: usize, feature_dim: usize, n_layers: usize, rng: &mut impl Rng) -> Self {
        let layers = (0..n_layers)
            .map(|_| MpLayer {
                w_self: rand_matrix(node_dim, node_dim, 1.0, rng),
                w_msg: rand_matrix(node_dim, node_dim + EDGE_DIM, 1.0, rng),
                bias: DenseVector::zeros(node_dim),
            })
            .collect();
        Self { layers, readout: rand_matrix(feature_dim, node_dim, 1.0, rng) }
    }

    pub fn node_dim(&self) -> usize {
        self.readout.cols()
    }

    pub fn feature_dim(&self) -> usize {
        self.readout.rows()
    }

    /// Pools the graph into the context feature.
    pub fn context_feature(&self, graph: &IntentionGraph) -> Result<(Vec<f64>, MpCache)> {
        if graph.nodes.is_empty() {
            return Err(Error::InvalidParameter {
                what: "intention graph",
                detail: "no nodes".into(),
            });
        }
        let n = graph.nodes.len();
        let d = self.node_dim();
        let mut state: Vec<Vec<f64>> = graph.nodes.iter().map(|(_, z)| z.clone()).collect();
        let mut cache_layers = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let inputs = state.clone();
            let mut avgs: Vec<Vec<f64>> = vec![vec![0.0; d + EDGE_DIM]; n];
            let mut degree = vec![0usize; n];
            for (from, to, feat) in &graph.edges {
                let mut contrib = inputs[*from].clone();
                contrib.extend_from_slice(feat);
                for (a, c) in avgs[*to].iter_mut().zip(&contrib) {
                    *a += c;
                }
                degree[*to] += 1;
            }
            for i in 0..n {
                if degree[i] > 0 {
                    for a in avgs[i].iter_mut() {
                        *a /= degree[i] as f64;
                    }
                }
            }
            let mut outputs = Vec::with_capacity(n);
            for i in 0..n {
                let mut pre = vec![0.0; d];
                for r in 0..d {
                    let mut acc = layer.bias[r];
                    let wrow = layer.w_self.row(r);
                    for c in 0..d {
                        acc += wrow[c] * inputs[i][c];
                    }
                    let mrow = layer.w_msg.row(r);
                    for c in 0..d + EDGE_DIM {
                        acc += mrow[c] * avgs[i][c];
                    }
                    pre[r] = acc.tanh();
                }
                outputs.push(pre);
            }
            cache_layers.push((inputs, avgs, outputs.clone()));
            state = outputs;
        }
        let mut pooled = vec![0.0; d];
        for node in &state {
            for (p, v) in pooled.iter_mut().zip(node) {
                *p += v / n as f64;
            }
        }
        let f = self.readout.matvec(&DenseVector::from_vec(pooled.clone()));
        Ok((f.into_vec(), MpCache { layers: cache_layers, pooled, n_nodes: n }))
    }

    /// Backward pass; accumulates into `grad`, which must be zeros-shaped
    /// like `self`.
    pub fn backward(&self, graph: &IntentionGraph, cache: &MpCache, d_f: &[f64], grad: &mut MessagePassing) {
        let n = cache.n_nodes;
        let d = self.node_dim();
        // Readout.
        for r in 0..self.readout.rows() {
            for c in 0..d {
                grad.readout[(r, c)] += d_f[r] * cache.pooled[c];
            }
        }
        let mut d_state: Vec<Vec<f64>> = vec![vec![0.0; d]; n];
        for i in 0..n {
            for c in 0..d {
                let mut acc = 0.0;
                for r in 0..self.readout.rows() {
                    acc += self.readout[(r, c)] * d_f[r];
                }
                d_state[i][c] = acc / n as f64;
            }
        }
        // Layers in reverse.
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let (inputs, avgs, outputs) = &cache.layers[l];
            let mut degree = vec![0usize; n];
            for (_, to, _) in &graph.edges {
                degree[*to] += 1;
            }
            let mut d_inputs: Vec<Vec<f64>> = vec![vec![0.0; d]; n];
            let mut d_avgs: Vec<Vec<f64>> = vec![vec![0.0; d + EDGE_DIM]; n];
            for i in 0..n {
                for r in 0..d {
                    let dpre = d_state[i][r] * (1.0 - outputs[i][r] * outputs[i][r]);
                    grad.layers[l].bias[r] += dpre;
                    for c in 0..d {
                        grad.layers[l].w_self[(r, c)] += dpre * inputs[i][c];
                        d_inputs[i][c] += layer.w_self[(r, c)] * dpre;
                    }
                    for c in 0..d + EDGE_DIM {
                        grad.layers[l].w_msg[(r, c)] += dpre * avgs[i][c];
                        d_avgs[i][c] += layer.w_msg[(r, c)] * dpre;
                    }
                }
            }
            for (from, to, _) in &graph.edges {
                let w = 1.0 / degree[*to] as f64;
                for c in 0..d {
                    d_inputs[*from][c] += w * d_avgs[*to][c];
                }
            }
            d_state = d_inputs;
        }
    }

    pub fn zeros_like(&self) -> MessagePassing {
        MessagePassing {
            layers: self
                .layers
                .iter()
                .map(|l| MpLayer {
                    w_self: DenseMatrix::zeros(l.w_self.rows(), l.w_self.cols()),
                    w_msg: DenseMatrix::zeros(l.w_msg.rows(), l.w_msg.cols()),
                    bias: DenseVector::zeros(l.bias.len()),
                })
                .collect(),
            readout: DenseMatrix::zeros(self.readout.rows(), self.readout.cols()),
        }
    }

    pub fn flat_len(&self) -> usize {
        let mut n = self.readout.as_slice().len();
        for l in &self.layers {
            n += l.w_self.as_slice().len() + l.w_msg.as_slice().len() + l.bias.len();
        }
        n
    }

    pub fn write_flat(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend_from_slice(l.w_self.as_slice());
            out.extend_from_slice(l.w_msg.as_slice());
            out.extend_from_slice(l.bias.as_slice());
        }
        out.extend_from_slice(self.readout.as_slice());
    }

    pub fn read_flat(&mut self, src: &[f64]) -> usize {
        let mut k = 0;
        for l in self.layers.iter_mut() {
            let n = l.w_self.as_slice().len();
            l.w_self.as_mut_slice().copy_from_slice(&src[k..k + n]);
            k += n;
            let n = l.w_msg.as_slice().len();
            l.w_msg.as_mut_slice().copy_from_slice(&src[k..k + n]);
            k += n;
            let n = l.bias.len();
            l.bias.as_mut_slice().copy_from_slice(&src[k..k + n]);
            k += n;
        }
        let n = self.readout.as_slice().len();
        self.readout.as_mut_slice().copy_from_slice(&src[k..k + n]);
        k + n
    }

    pub fn sgd_step(&mut self, grad: &MessagePassing, lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grad.layers) {
            for (w, gw) in l.w_self.as_mut_slice().iter_mut().zip(g.w_self.as_slice()) {
                *w -= lr * gw;
            }
            for (w, gw) in l.w_msg.as_mut_slice().iter_mut().zip(g.w_msg.as_slice()) {
                *w -= lr * gw;
            }
            for (b, gb) in l.bias.as_mut_slice().iter_mut().zip(g.bias.as_slice()) {
                *b -= lr * gb;
            }
        }
        for (w, gw) in self.readout.as_mut_slice().iter_mut().zip(grad.readout.as_slice()) {
            *w -= lr * gw;
        }
    }

    pub fn grad_sq_norm(&self) -> f64 {
        let mut v = Vec::new();
        self.write_flat(&mut v);
        v.iter().map(|x| x * x).sum()
    }

    pub fn scale_in_place(&mut self, s: f64) {
        let mut v = Vec::new();
        self.write_flat(&mut v);
        for x in v.iter_mut() {
            *x *= s;
        }
        self.read_flat(&v);
    }
}

/// Recurrent memory variant for the ablation: a gated cell over the fresh
/// self encoding with a linear readout to the context feature.
#[derive(Debug, Clone)]
pub struct RecurrentMemory {
    pub cell: GruCell,
    pub readout: DenseMatrix, // D_f × hidden
    pub hidden: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RecurrentCache {
    gru: GruCache,
    h_new: Vec<f64>,
}

impl RecurrentMemory {
    pub fn new(input_dim: usize, hidden: usize, feature_dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            cell: GruCell::new(input_dim, hidden, 1.0, rng),
            readout: rand_matrix(feature_dim, hidden, 1.0, rng),
            hidden: vec![0.0; hidden],
        }
    }

    /// Context feature for an explicit hidden state, without touching the
    /// stored one. Returns the feature, the advanced hidden state, and the
    /// backward cache.
    pub fn feature(&self, hidden: &[f64], input: &[f64]) -> (Vec<f64>, Vec<f64>, RecurrentCache) {
        let (h_new, gru) = self.cell.forward(hidden, input);
        let f = self.readout.matvec(&DenseVector::from_vec(h_new.clone())).into_vec();
        (f, h_new.clone(), RecurrentCache { gru, h_new })
    }

    /// Advances the stored hidden state and emits the context feature.
    pub fn step(&mut self, input: &[f64]) -> (Vec<f64>, RecurrentCache) {
        let (f, h_new, cache) = self.feature(&self.hidden.clone(), input);
        self.hidden = h_new;
        (f, cache)
    }

    /// Feature for the current hidden state without advancing it.
    pub fn peek(&self) -> Vec<f64> {
        self.readout.matvec(&DenseVector::from_vec(self.hidden.clone())).into_vec()
    }

    /// One-step backward (hidden treated as data); accumulates into `grad`.
    pub fn backward(&self, cache: &RecurrentCache, d_f: &[f64], grad: &mut RecurrentMemory) {
        let hd = self.hidden.len();
        for r in 0..self.readout.rows() {
            for c in 0..hd {
                grad.readout[(r, c)] += d_f[r] * cache.h_new[c];
            }
        }
        let mut d_h = vec![0.0; hd];
        for c in 0..hd {
            for r in 0..self.readout.rows() {
                d_h[c] += self.readout[(r, c)] * d_f[r];
            }
        }
        self.cell.backward(&cache.gru, &d_h, &mut grad.cell);
    }

    pub fn zeros_like(&self) -> RecurrentMemory {
        RecurrentMemory {
            cell: self.cell.zeros_like(),
            readout: DenseMatrix::zeros(self.readout.rows(), self.readout.cols()),
            hidden: vec![0.0; self.hidden.len()],
        }
    }

    pub fn reset(&mut self) {
        self.hidden.iter_mut().for_each(|h| *h = 0.0);
    }

    pub fn flat_len(&self) -> usize {
        self.cell.flat_len() + self.readout.as_slice().len()
    }

    pub fn write_flat(&self, out: &mut Vec<f64>) {
        self.cell.write_flat(out);
        out.extend_from_slice(self.readout.as_slice());
    }

    pub fn read_flat(&mut self, src: &[f64]) -> usize {
        let k = self.cell.read_flat(src);
        let n = self.readout.as_slice().len();
        self.readout.as_mut_slice().copy_from_slice(&src[k..k + n]);
        k + n
    }
}

impl MemoryModule {
    /// Named parameter groups for checkpointing.
    pub fn checkpoint_groups(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = Vec::new();
        for (name, net) in [
            ("detector", &self.detector),
            ("node_encoder", &self.node_encoder),
            ("node_readout", &self.node_readout),
            ("edge_encoder", &self.edge_encoder),
        ] {
            let mut v = Vec::new();
            net.write_flat(&mut v);
            out.push((name.to_string(), v));
        }
        out
    }

    pub fn load_checkpoint_groups(&mut self, groups: &[(String, Vec<f64>)]) -> Result<()> {
        for (name, data) in groups {
            let net = match name.as_str() {
                "detector" => &mut self.detector,
                "node_encoder" => &mut self.node_encoder,
                "node_readout" => &mut self.node_readout,
                "edge_encoder" => &mut self.edge_encoder,
                other => {
                    return Err(Error::InvalidParameter {
                        what: "memory checkpoint",
                        detail: format!("unknown group {other}"),
                    })
                }
            };
            if net.flat_len() != data.len() {
                return Err(Error::DimensionMismatch {
                    expected: net.flat_len(),
                    got: data.len(),
                    what: "memory checkpoint group",
                });
            }
            net.read_flat(data);
        }
        Ok(())
    }
}

/// One labeled observation for pretraining.
#[derive(Debug, Clone)]
pub struct PretrainExample {
    pub obs: Vec<f64>,
    /// Presence label per agent type.
    pub presence: Vec<f64>,
    /// True latent per agent type (relative position + last-action one-hot).
    pub latents: Vec<Vec<f64>>,
    /// Observed relative offset per agent type, when visible.
    pub offsets: Vec<Option<(f64, f64)>>,
}

/// Final held-out losses after pretraining.
#[derive(Debug, Clone, Copy)]
pub struct PretrainReport {
    pub detector_bce: f64,
    pub node_mse: f64,
    pub edge_mse: f64,
    pub epochs: usize,
}

/// Supervised pretraining of detector, node, and edge encoders.
pub fn pretrain_memory(
    module: &mut MemoryModule,
    corpus: &[PretrainExample],
    epochs: usize,
    lr: f64,
    holdout_frac: f64,
    rng: &mut impl Rng,
) -> Result<PretrainReport> {
    if corpus.is_empty() {
        return Err(Error::InvalidParameter { what: "pretrain corpus", detail: "empty".into() });
    }
    let n_hold = ((corpus.len() as f64 * holdout_frac) as usize).min(corpus.len() - 1);
    let (holdout, train) = corpus.split_at(n_hold);

    for _ in 0..epochs {
        for ex in train {
            // Detector: BCE gradient through the sigmoid is (p − y).
            let (logits, cache) = module.detector.forward(&ex.obs);
            let d_logits: Vec<f64> =
                logits.iter().zip(&ex.presence).map(|(&l, &y)| sigmoid(l) - y).collect();
            let mut dgrad = module.detector.zeros_like();
            module.detector.backward(&cache, &d_logits, &mut dgrad);
            module.detector.sgd_step(&dgrad, lr);

            // Node and edge heads train on visible peers only.
            for k in 0..module.n_types {
                let Some(offset) = ex.offsets[k] else { continue };
                if ex.presence[k] < 0.5 {
                    continue;
                }
                let mut input = ex.obs.clone();
                let mut onehot = vec![0.0; module.n_types];
                onehot[k] = 1.0;
                input.extend(onehot);

                let (emb, enc_cache) = module.node_encoder.forward(&input);
                let (pred, read_cache) = module.node_readout.forward(&emb);
                let gate = {
                    let det = module.detect_agents(&ex.obs)?;
                    if det.probs[k] >= module.tau_det {
                        det.probs[k]
                    } else {
                        0.0
                    }
                };
                if gate > 0.0 {
                    let d_pred: Vec<f64> = pred
                        .iter()
                        .zip(&ex.latents[k])
                        .map(|(p, t)| 2.0 * gate * (p - t))
                        .collect();
                    let mut rgrad = module.node_readout.zeros_like();
                    let d_emb = module.node_readout.backward(&read_cache, &d_pred, &mut rgrad);
                    let mut egrad = module.node_encoder.zeros_like();
                    module.node_encoder.backward(&enc_cache, &d_emb, &mut egrad);
                    module.node_readout.sgd_step(&rgrad, lr);
                    module.node_encoder.sgd_step(&egrad, lr);
                }

                let (edge_pred, edge_cache) = module.edge_encoder.forward(&input);
                let d_edge = vec![edge_pred[0] - offset.0, edge_pred[1] - offset.1];
                let mut ggrad = module.edge_encoder.zeros_like();
                module.edge_encoder.backward(&edge_cache, &d_edge, &mut ggrad);
                module.edge_encoder.sgd_step(&ggrad, lr);
            }
        }
        // Light shuffle-free pass; corpus order is already randomized by the
        // generator, and determinism matters more here than epoch variety.
        let _ = rng;
    }

    Ok(evaluate_memory(module, if holdout.is_empty() { train } else { holdout }, epochs))
}

/// Held-out evaluation of the three pretraining losses.
pub fn evaluate_memory(
    module: &MemoryModule,
    examples: &[PretrainExample],
    epochs: usize,
) -> PretrainReport {
    let mut bce = 0.0;
    let mut node_acc = 0.0;
    let mut node_n = 0usize;
    let mut edge_acc = 0.0;
    let mut edge_n = 0usize;
    for ex in examples {
        let det = module.detect_agents(&ex.obs).expect("dims checked");
        bce += detector_loss(&det.probs, &ex.presence).expect("lengths match");
        for k in 0..module.n_types {
            let Some(offset) = ex.offsets[k] else { continue };
            if ex.presence[k] < 0.5 {
                continue;
            }
            let mut input = ex.obs.clone();
            let mut onehot = vec![0.0; module.n_types];
            onehot[k] = 1.0;
            input.extend(onehot);
            let (emb, _) = module.node_encoder.forward(&input);
            let (pred, _) = module.node_readout.forward(&emb);
            let sq: f64 =
                pred.iter().zip(&ex.latents[k]).map(|(a, b)| (a - b) * (a - b)).sum();
            node_acc += sq;
            node_n += 1;
            let (edge_pred, _) = module.edge_encoder.forward(&input);
            edge_acc += edge_loss(&edge_pred, offset).expect("2-d prediction");
            edge_n += 1;
        }
    }
    PretrainReport {
        detector_bce: bce / examples.len() as f64,
        node_mse: if node_n > 0 { node_acc / node_n as f64 } else { 0.0 },
        edge_mse: if edge_n > 0 { edge_acc / edge_n as f64 } else { 0.0 },
        epochs,
    }
}
