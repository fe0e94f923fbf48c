//! The prosody-gated classifier: local fusion, stacked Bi-LSTM encoder,
//! multi-kernel prosody CNN, dual-affinity global fusion and a softmax head.

mod config;
pub mod ops;
mod trace;

use rand::Rng;

pub use config::{ablate, ablate_named, Ablation, GlobalFusion, LocalFusion, ModelConfig};
pub use trace::{
    bin_edges, histogram, BetaSummary, GateAccumulator, GateTrace, GateTraceRecord, LabelGateSummary,
    BETA_RANGE, HISTOGRAM_BINS, SCORE_RANGE,
};

use crate::features::{FeatureSequence, ENERGY_DIM, LFBE_DIM, PITCH_DIM};
use crate::numerics::{
    check_gradients_scaled, softmax_in_place, GradCheckReport, Graph, NodeId, NumericsError, ParamId,
    ParamStore, Tensor,
};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown ablation mode `{0}` (expected one of: full, baseline, local_concat, no_local_gate, no_global_gate, global_encoder_only, no_pitch, no_energy)")]
    UnknownAblation(String),
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("parameter `{name}` has shape {found:?}, expected {expected:?}")]
    ParamShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("invalid model input: {0}")]
    Input(String),
}

type Result<T> = std::result::Result<T, ModelError>;

/// One utterance as the network sees it: LFBE (`t × 40`, normalised) and
/// raw prosody (`t × 6`, energy triple then pitch triple).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelInput {
    pub lfbe: Tensor,
    pub prosody: Tensor,
}

impl ModelInput {
    pub fn new(lfbe: Tensor, prosody: Tensor) -> Result<Self> {
        if lfbe.cols() != LFBE_DIM || prosody.cols() != ENERGY_DIM + PITCH_DIM {
            return Err(ModelError::Input(format!(
                "expected t×40 and t×6, got {:?} and {:?}",
                lfbe.shape(),
                prosody.shape()
            )));
        }
        if lfbe.rows() != prosody.rows() || lfbe.rows() == 0 {
            return Err(ModelError::Input(format!(
                "frame counts differ or are zero: {} vs {}",
                lfbe.rows(),
                prosody.rows()
            )));
        }
        Ok(Self { lfbe, prosody })
    }

    /// Unnormalised input built straight from extracted features.
    pub fn from_features(seq: &FeatureSequence) -> Result<Self> {
        let t = seq.n_frames();
        let mut lfbe = Vec::with_capacity(t * LFBE_DIM);
        let mut prosody = Vec::with_capacity(t * 6);
        for f in &seq.frames {
            lfbe.extend_from_slice(&f.lfbe);
            prosody.extend_from_slice(&f.energy);
            prosody.extend_from_slice(&f.pitch);
        }
        Self::new(
            Tensor::matrix(t, LFBE_DIM, lfbe)?,
            Tensor::matrix(t, ENERGY_DIM + PITCH_DIM, prosody)?,
        )
    }

    pub fn len(&self) -> usize {
        self.lfbe.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn truncated(&self, len: usize) -> Self {
        Self {
            lfbe: self.lfbe.slice_rows(0, len),
            prosody: self.prosody.slice_rows(0, len),
        }
    }

    pub fn reversed(&self) -> Self {
        let rev = |t: &Tensor| {
            let rows: Vec<Vec<f64>> = (0..t.rows()).rev().map(|r| t.row(r).to_vec()).collect();
            Tensor::from_rows(&rows).expect("non-empty input")
        };
        Self {
            lfbe: rev(&self.lfbe),
            prosody: rev(&self.prosody),
        }
    }

    /// Zero-padded copy with `len ≥ self.len()` rows.
    pub fn padded(&self, len: usize) -> Self {
        let pad = |t: &Tensor| {
            let mut data = t.data().to_vec();
            data.resize(len.max(t.rows()) * t.cols(), 0.0);
            Tensor::matrix(len.max(t.rows()), t.cols(), data).expect("consistent shape")
        };
        Self {
            lfbe: pad(&self.lfbe),
            prosody: pad(&self.prosody),
        }
    }
}

/// Variable-length utterances padded to a common length, with the true
/// lengths kept so padding never reaches the network.
#[derive(Clone, Debug)]
pub struct PaddedBatch {
    pub items: Vec<ModelInput>,
    pub lengths: Vec<usize>,
}

impl PaddedBatch {
    pub fn new(inputs: &[&ModelInput]) -> Self {
        let max = inputs.iter().map(|i| i.len()).max().unwrap_or(0);
        Self {
            items: inputs.iter().map(|i| i.padded(max)).collect(),
            lengths: inputs.iter().map(|i| i.len()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.items.first().map_or(0, ModelInput::len)
    }

    /// The unpadded view of item `i`.
    pub fn item(&self, i: usize) -> ModelInput {
        self.items[i].truncated(self.lengths[i])
    }
}

#[derive(Clone, Debug)]
struct LstmIds {
    w_ih: ParamId,
    w_hh: ParamId,
    b: ParamId,
}

#[derive(Clone, Debug)]
struct LayerIds {
    fwd: LstmIds,
    bwd: LstmIds,
    proj_w: ParamId,
    proj_b: ParamId,
}

#[derive(Clone, Debug)]
struct ProjectionIds {
    w_h: ParamId,
    b_h: ParamId,
    w_v: ParamId,
    b_v: ParamId,
}

#[derive(Clone, Debug)]
struct Layout {
    prosody: Option<(ParamId, ParamId)>,
    local: Option<[ParamId; 4]>,
    encoder: Vec<LayerIds>,
    cnn: Vec<(usize, ParamId, ParamId)>,
    similarity: Option<ProjectionIds>,
    dissimilarity: Option<ProjectionIds>,
    classifier: (ParamId, ParamId),
}

/// Expected parameter names and shapes for a configuration, in creation
/// order.
fn param_specs(cfg: &ModelConfig) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    let dp = cfg.prosody_embed_dim;
    let lf = cfg.lfbe_dim;
    let ab = cfg.ablation;
    if ab.uses_prosody() {
        out.push(("prosody.w".into(), cfg.prosody_in_dim, dp));
        out.push(("prosody.b".into(), 1, dp));
    }
    if ab.local_fusion() == LocalFusion::Gated {
        out.push(("local.w_p".into(), dp, dp));
        out.push(("local.w_l".into(), lf, dp));
        out.push(("local.w_lp".into(), lf, dp));
        out.push(("local.b".into(), 1, dp));
    }
    let half = cfg.lstm_hidden / 2;
    for k in 0..cfg.lstm_layers {
        let input = if k == 0 {
            cfg.encoder_input_dim()
        } else {
            cfg.lstm_hidden
        };
        for dir in ["fwd", "bwd"] {
            out.push((format!("encoder.l{k}.{dir}.w_ih"), input, 4 * half));
            out.push((format!("encoder.l{k}.{dir}.w_hh"), half, 4 * half));
            out.push((format!("encoder.l{k}.{dir}.b"), 1, 4 * half));
        }
        out.push((format!("encoder.l{k}.proj.w"), cfg.lstm_hidden, cfg.lstm_hidden));
        out.push((format!("encoder.l{k}.proj.b"), 1, cfg.lstm_hidden));
    }
    if ab.global_fusion() != GlobalFusion::None {
        let f = cfg.cnn_filters_per_kernel;
        for &k in &cfg.cnn_kernel_lengths {
            out.push((format!("cnn.k{k}.w"), k * dp, f));
            out.push((format!("cnn.k{k}.b"), 1, f));
        }
        let mut pair = |prefix: &str| {
            out.push((format!("{prefix}.w_h"), cfg.lstm_hidden, cfg.affinity_dim));
            out.push((format!("{prefix}.b_h"), 1, cfg.affinity_dim));
            out.push((format!("{prefix}.w_v"), f, cfg.affinity_dim));
            out.push((format!("{prefix}.b_v"), 1, cfg.affinity_dim));
        };
        pair("global");
        if cfg.separate_projections && ab.global_fusion() == GlobalFusion::DualGate {
            pair("global.dis");
        }
    }
    out.push(("classifier.w".into(), cfg.pooled_dim(), cfg.n_classes));
    out.push(("classifier.b".into(), 1, cfg.n_classes));
    out
}

impl Layout {
    fn resolve(cfg: &ModelConfig, store: &ParamStore) -> Result<Self> {
        for (name, rows, cols) in param_specs(cfg) {
            let id = store
                .id(&name)
                .ok_or_else(|| ModelError::MissingParam(name.clone()))?;
            let found = store.value(id).shape().to_vec();
            if found != [rows, cols] {
                return Err(ModelError::ParamShape {
                    name,
                    expected: vec![rows, cols],
                    found,
                });
            }
        }
        let id = |name: &str| store.id(name).expect("checked above");
        let ab = cfg.ablation;
        let lstm = |k: usize, dir: &str| LstmIds {
            w_ih: id(&format!("encoder.l{k}.{dir}.w_ih")),
            w_hh: id(&format!("encoder.l{k}.{dir}.w_hh")),
            b: id(&format!("encoder.l{k}.{dir}.b")),
        };
        let projection = |prefix: &str| ProjectionIds {
            w_h: id(&format!("{prefix}.w_h")),
            b_h: id(&format!("{prefix}.b_h")),
            w_v: id(&format!("{prefix}.w_v")),
            b_v: id(&format!("{prefix}.b_v")),
        };
        let global = ab.global_fusion() != GlobalFusion::None;
        let similarity = global.then(|| projection("global"));
        let dissimilarity = match ab.global_fusion() {
            GlobalFusion::DualGate if cfg.separate_projections => Some(projection("global.dis")),
            GlobalFusion::DualGate => similarity.clone(),
            _ => None,
        };
        Ok(Self {
            prosody: ab.uses_prosody().then(|| (id("prosody.w"), id("prosody.b"))),
            local: (ab.local_fusion() == LocalFusion::Gated)
                .then(|| [id("local.w_p"), id("local.w_l"), id("local.w_lp"), id("local.b")]),
            encoder: (0..cfg.lstm_layers)
                .map(|k| LayerIds {
                    fwd: lstm(k, "fwd"),
                    bwd: lstm(k, "bwd"),
                    proj_w: id(&format!("encoder.l{k}.proj.w")),
                    proj_b: id(&format!("encoder.l{k}.proj.b")),
                })
                .collect(),
            cnn: if global {
                cfg.cnn_kernel_lengths
                    .iter()
                    .map(|&k| (k, id(&format!("cnn.k{k}.w")), id(&format!("cnn.k{k}.b"))))
                    .collect()
            } else {
                Vec::new()
            },
            similarity,
            dissimilarity,
            classifier: (id("classifier.w"), id("classifier.b")),
        })
    }
}

/// Handles to the interesting nodes of one forward graph.
#[derive(Clone, Debug)]
pub struct ForwardNodes {
    pub logits: NodeId,
    pub prosody_embedding: Option<NodeId>,
    pub local_beta: Option<NodeId>,
    pub encoded: NodeId,
    pub global_rows: Option<NodeId>,
    pub similarity: Option<NodeId>,
    pub gate: Option<NodeId>,
    pub global_score: Option<NodeId>,
    pub similarity_centered: Option<NodeId>,
    pub dissimilarity_centered: Option<NodeId>,
    pub pooled: NodeId,
}

#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub trace: Option<GateTrace>,
}

impl ForwardOutput {
    /// Index of the highest probability (lowest index on ties).
    pub fn predicted(&self) -> usize {
        argmax(&self.probs)
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Result of one training forward/backward pass.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub loss: f64,
    pub logits: Vec<f64>,
    pub grads: Vec<(ParamId, Tensor)>,
}

/// Network weights plus the configuration that shapes them.
#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    params: ParamStore,
    layout: Layout,
}

impl Model {
    /// Fresh model with uniform Glorot weights, zero biases and forget-gate
    /// biases of 1.
    pub fn new(config: ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let half = config.lstm_hidden / 2;
        for (name, rows, cols) in param_specs(&config) {
            if rows == 1 {
                let id = store.insert_zeros(name.as_str(), 1, cols);
                if name.starts_with("encoder.") && name.ends_with(".b") {
                    for j in half..2 * half {
                        store.value_mut(id).data_mut()[j] = 1.0;
                    }
                }
            } else {
                store.insert_glorot(name, rows, cols, rng);
            }
        }
        Self::from_params(config, store)
    }

    /// Wraps an existing parameter store, checking names and shapes.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let layout = Layout::resolve(&config, &params)?;
        Ok(Self {
            config,
            params,
            layout,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn into_params(self) -> ParamStore {
        self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    /// Copies every parameter of `other` whose name and shape match one of
    /// ours. Returns how many tensors were copied.
    pub fn copy_shared_from(&mut self, other: &Model) -> usize {
        let mut copied = 0;
        for p in other.params.iter() {
            if let Some(id) = self.params.id(&p.name) {
                if self.params.value(id).shape() == p.value.shape() {
                    *self.params.value_mut(id) = p.value.clone();
                    copied += 1;
                }
            }
        }
        copied
    }

    fn masked_prosody(&self, prosody: &Tensor) -> Tensor {
        let mut out = prosody.clone();
        if let Some(range) = self.config.ablation.masked_prosody() {
            for r in 0..out.rows() {
                out.row_mut(r)[range.clone()].fill(0.0);
            }
        }
        out
    }

    /// `ReLU([e; c] · W + b)`.
    pub fn prosody_embed<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        prosody: NodeId,
    ) -> Result<NodeId> {
        let (w, b) = self
            .layout
            .prosody
            .ok_or_else(|| ModelError::InvalidConfig("no prosody path in this ablation".into()))?;
        let (w, b) = (g.param(store, w), g.param(store, b));
        Ok(ops::prosody_embed(g, prosody, w, b)?)
    }

    /// Local gate `β` (`t × d_p`).
    pub fn local_gate<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        p: NodeId,
        l: NodeId,
    ) -> Result<NodeId> {
        let ids = self
            .layout
            .local
            .ok_or_else(|| ModelError::InvalidConfig("no local gate in this ablation".into()))?;
        let w = ids.map(|id| g.param(store, id));
        Ok(ops::local_gate(g, p, l, w)?)
    }

    /// Stacked bidirectional encoder over the fused frames.
    pub fn encode_acoustic<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        fused: NodeId,
    ) -> Result<NodeId> {
        let mut x = fused;
        for layer in &self.layout.encoder {
            let lstm = |g: &mut Graph<'a>, ids: &LstmIds| {
                [
                    g.param(store, ids.w_ih),
                    g.param(store, ids.w_hh),
                    g.param(store, ids.b),
                ]
            };
            let fwd = lstm(g, &layer.fwd);
            let bwd = lstm(g, &layer.bwd);
            let proj = [g.param(store, layer.proj_w), g.param(store, layer.proj_b)];
            x = ops::bilstm_layer(g, x, fwd, bwd, proj)?;
        }
        Ok(x)
    }

    /// Prosody rows `V` (`m × filters`), one per kernel length.
    pub fn global_prosody_cnn<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        p: NodeId,
    ) -> Result<NodeId> {
        let mut rows = Vec::with_capacity(self.layout.cnn.len());
        for &(k, w, b) in &self.layout.cnn {
            let (w, b) = (g.param(store, w), g.param(store, b));
            rows.push(ops::conv_max_pool(g, p, k, w, b)?);
        }
        Ok(g.concat(&rows, crate::numerics::Axis::Rows)?)
    }

    fn project<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        ids: &ProjectionIds,
        h: NodeId,
        v: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        let hp = {
            let (w, b) = (g.param(store, ids.w_h), g.param(store, ids.b_h));
            ops::affine(g, h, w, b)?
        };
        let vp = {
            let (w, b) = (g.param(store, ids.w_v), g.param(store, ids.b_v));
            ops::affine(g, v, w, b)?
        };
        Ok((hp, vp))
    }

    /// `S = tanh(A_s − mean A_s)`; returns `(centred, S)`.
    pub fn global_similarity<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        h: NodeId,
        v: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        let ids = self
            .layout
            .similarity
            .as_ref()
            .ok_or_else(|| ModelError::InvalidConfig("no global branch in this ablation".into()))?;
        let (hp, vp) = self.project(g, store, ids, h, v)?;
        Ok(ops::similarity(g, hp, vp)?)
    }

    /// `G = σ(A_d − mean A_d)`; returns `(centred, G)`.
    pub fn global_gate<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        h: NodeId,
        v: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        let ids = self
            .layout
            .dissimilarity
            .as_ref()
            .ok_or_else(|| ModelError::InvalidConfig("no dissimilarity gate in this ablation".into()))?;
        let (hp, vp) = self.project(g, store, ids, h, v)?;
        Ok(ops::dissimilarity_gate(g, hp, vp)?)
    }

    /// Classifier logits (`1 × D`) from the pooled vector.
    pub fn classify<'a>(&self, g: &mut Graph<'a>, store: &'a ParamStore, pooled: NodeId) -> Result<NodeId> {
        let (w, b) = self.layout.classifier;
        let (w, b) = (g.param(store, w), g.param(store, b));
        Ok(ops::affine(g, pooled, w, b)?)
    }

    /// Appends the whole network for one utterance to `g`, reading weights
    /// from `store` (which must share this model's layout).
    pub fn build<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        input: &ModelInput,
    ) -> Result<ForwardNodes> {
        if input.is_empty() {
            return Err(ModelError::Input("empty utterance".into()));
        }
        let ab = self.config.ablation;
        let l = g.input(input.lfbe.clone());
        let mut nodes = ForwardNodes {
            logits: l,
            prosody_embedding: None,
            local_beta: None,
            encoded: l,
            global_rows: None,
            similarity: None,
            gate: None,
            global_score: None,
            similarity_centered: None,
            dissimilarity_centered: None,
            pooled: l,
        };
        let p = match ab.uses_prosody() {
            true => {
                let raw = g.input(self.masked_prosody(&input.prosody));
                Some(self.prosody_embed(g, store, raw)?)
            }
            false => None,
        };
        nodes.prosody_embedding = p;

        let fused = match (ab.local_fusion(), p) {
            (LocalFusion::Gated, Some(p)) => {
                let beta = self.local_gate(g, store, p, l)?;
                nodes.local_beta = Some(beta);
                ops::local_fuse(g, beta, p, l)?
            }
            (LocalFusion::Concat, Some(p)) => g.concat(&[p, l], crate::numerics::Axis::Cols)?,
            _ => l,
        };
        let h = self.encode_acoustic(g, store, fused)?;
        nodes.encoded = h;

        nodes.pooled = match (ab.global_fusion(), p) {
            (GlobalFusion::None, _) | (_, None) => g.max_pool_time(h)?,
            (GlobalFusion::DualGate, Some(p)) => {
                let v = self.global_prosody_cnn(g, store, p)?;
                let (sc, s) = self.global_similarity(g, store, h, v)?;
                let (dc, gate) = self.global_gate(g, store, h, v)?;
                let score = g.mul(s, gate)?;
                nodes.global_rows = Some(v);
                nodes.similarity = Some(s);
                nodes.gate = Some(gate);
                nodes.global_score = Some(score);
                nodes.similarity_centered = Some(sc);
                nodes.dissimilarity_centered = Some(dc);
                ops::global_fuse(g, h, score, v)?
            }
            (GlobalFusion::SoftmaxAttention, Some(p)) => {
                let v = self.global_prosody_cnn(g, store, p)?;
                let ids = self.layout.similarity.as_ref().expect("global branch present");
                let (hp, vp) = self.project(g, store, ids, h, v)?;
                let affinity = g.matmul_t(hp, vp)?;
                let weights = g.softmax(affinity)?;
                nodes.global_rows = Some(v);
                nodes.global_score = Some(weights);
                ops::global_fuse(g, h, weights, v)?
            }
        };
        nodes.logits = self.classify(g, store, nodes.pooled)?;
        Ok(nodes)
    }

    fn trace_from(&self, g: &Graph<'_>, nodes: &ForwardNodes, t: usize) -> GateTrace {
        let get = |n: Option<NodeId>| n.map(|n| g.value(n).clone());
        let local_beta = match self.config.ablation.local_fusion() {
            LocalFusion::Gated => get(nodes.local_beta),
            LocalFusion::Concat => Some(Tensor::full(t, self.config.prosody_embed_dim, 1.0)),
            LocalFusion::None => None,
        };
        GateTrace {
            local_beta,
            similarity: get(nodes.similarity),
            gate: get(nodes.gate),
            global_score: get(nodes.global_score),
            similarity_centered: get(nodes.similarity_centered),
            dissimilarity_centered: get(nodes.dissimilarity_centered),
        }
    }

    /// Logits and class probabilities, optionally with the gate trace.
    pub fn forward(&self, input: &ModelInput, trace: bool) -> Result<ForwardOutput> {
        let mut g = Graph::new();
        let nodes = self.build(&mut g, &self.params, input)?;
        let logits = g.value(nodes.logits).data().to_vec();
        let mut probs = logits.clone();
        softmax_in_place(&mut probs);
        let trace = trace.then(|| self.trace_from(&g, &nodes, input.len()));
        Ok(ForwardOutput { logits, probs, trace })
    }

    /// Forward over a padded batch; each item is run on its valid prefix.
    pub fn forward_batch(&self, batch: &PaddedBatch, trace: bool) -> Result<Vec<ForwardOutput>> {
        use rayon::prelude::*;
        (0..batch.len())
            .into_par_iter()
            .map(|i| self.forward(&batch.item(i), trace))
            .collect()
    }

    /// Cross-entropy loss against `target`, the logits, and the gradient of
    /// every parameter reached.
    pub fn loss_and_grads(&self, input: &ModelInput, target: usize) -> Result<StepOutput> {
        let mut g = Graph::new();
        let nodes = self.build(&mut g, &self.params, input)?;
        let loss = g.cross_entropy(nodes.logits, target)?;
        Ok(StepOutput {
            loss: g.value(loss).item(),
            logits: g.value(nodes.logits).data().to_vec(),
            grads: g.backward(loss)?.into_params(),
        })
    }

    /// Finite-difference check of every parameter gradient of the
    /// cross-entropy loss on one utterance. `analytic_scale` other than 1
    /// corrupts the analytic side (negative control).
    pub fn gradient_check(
        &self,
        input: &ModelInput,
        target: usize,
        step: f64,
        tolerance: f64,
        analytic_scale: f64,
    ) -> Result<GradCheckReport> {
        let report = check_gradients_scaled(
            &self.params,
            |g, store| {
                let nodes = self.build(g, store, input).map_err(|e| match e {
                    ModelError::Numerics(n) => n,
                    other => NumericsError::InvalidTensor(other.to_string()),
                })?;
                g.cross_entropy(nodes.logits, target)
            },
            step,
            tolerance,
            analytic_scale,
        )?;
        Ok(report)
    }

    /// Cross-entropy loss only.
    pub fn loss(&self, input: &ModelInput, target: usize) -> Result<f64> {
        let mut g = Graph::new();
        let nodes = self.build(&mut g, &self.params, input)?;
        let loss = g.cross_entropy(nodes.logits, target)?;
        Ok(g.value(loss).item())
    }
}
