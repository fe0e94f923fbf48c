//! Graph-level building blocks of the network. Each function takes node
//! handles and appends the corresponding ops to the tape.

use crate::numerics::{Axis, Graph, NodeId, NumericsError};

type Result<T> = std::result::Result<T, NumericsError>;

/// `x · w + b` with `b` broadcast over rows.
pub fn affine(g: &mut Graph<'_>, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
    let xw = g.matmul(x, w)?;
    g.add(xw, b)
}

/// `ReLU([e; c] · W + b)`, one row per frame.
pub fn prosody_embed(g: &mut Graph<'_>, prosody: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
    let z = affine(g, prosody, w, b)?;
    g.relu(z)
}

/// Pre-activation of the local gate:
/// `p·W_p + ℓ·W_l + (ℓ·W_lp) ⊙ p + b`.
pub fn local_gate_preactivation(
    g: &mut Graph<'_>,
    p: NodeId,
    l: NodeId,
    [w_p, w_l, w_lp, b]: [NodeId; 4],
) -> Result<NodeId> {
    let from_p = g.matmul(p, w_p)?;
    let from_l = g.matmul(l, w_l)?;
    let lp = g.matmul(l, w_lp)?;
    let inter = g.mul(lp, p)?;
    let sum = g.add(from_p, from_l)?;
    let sum = g.add(sum, inter)?;
    g.add(sum, b)
}

pub fn local_gate(g: &mut Graph<'_>, p: NodeId, l: NodeId, weights: [NodeId; 4]) -> Result<NodeId> {
    let z = local_gate_preactivation(g, p, l, weights)?;
    g.sigmoid(z)
}

/// `[β ⊙ p ; ℓ]` along the feature axis.
pub fn local_fuse(g: &mut Graph<'_>, beta: NodeId, p: NodeId, l: NodeId) -> Result<NodeId> {
    let gated = g.mul(beta, p)?;
    g.concat(&[gated, l], Axis::Cols)
}

/// One bidirectional layer: forward and backward LSTM passes over the rows
/// of `x`, concatenated per frame and projected.
pub fn bilstm_layer(
    g: &mut Graph<'_>,
    x: NodeId,
    fwd: [NodeId; 3],
    bwd: [NodeId; 3],
    proj: [NodeId; 2],
) -> Result<NodeId> {
    let t = g.value(x).rows();
    let half = g.value(fwd[1]).rows();
    let run = |g: &mut Graph<'_>, order: &mut dyn Iterator<Item = usize>, w: [NodeId; 3]| {
        let mut states = Vec::with_capacity(t);
        let mut prev = None;
        for i in order {
            let s = g.lstm_cell(x, i, prev, w[0], w[1], w[2])?;
            states.push(s);
            prev = Some(s);
        }
        Ok::<_, NumericsError>(states)
    };
    let forward = run(g, &mut (0..t), fwd)?;
    let mut backward = run(g, &mut (0..t).rev(), bwd)?;
    backward.reverse();
    let hf = g.stack_states(&forward, half)?;
    let hb = g.stack_states(&backward, half)?;
    let both = g.concat(&[hf, hb], Axis::Cols)?;
    affine(g, both, proj[0], proj[1])
}

/// Stride-1 convolution over time with `ReLU` and max-pooling: one
/// `1 × filters` row. Inputs shorter than the kernel are zero-padded.
pub fn conv_max_pool(g: &mut Graph<'_>, x: NodeId, kernel: usize, w: NodeId, b: NodeId) -> Result<NodeId> {
    let windows = g.unfold_time(x, kernel)?;
    let z = affine(g, windows, w, b)?;
    let r = g.relu(z)?;
    g.max_pool_time(r)
}

/// Dot-product affinities between projected encoder states and projected
/// prosody rows, centred over the whole matrix. Returns `(centred, tanh)`.
pub fn similarity(g: &mut Graph<'_>, h_proj: NodeId, v_proj: NodeId) -> Result<(NodeId, NodeId)> {
    let a = g.matmul_t(h_proj, v_proj)?;
    let centred = g.center(a)?;
    let s = g.tanh(centred)?;
    Ok((centred, s))
}

/// Negative-L1 affinities, centred, through a sigmoid. Returns
/// `(centred, gate)`.
pub fn dissimilarity_gate(g: &mut Graph<'_>, h_proj: NodeId, v_proj: NodeId) -> Result<(NodeId, NodeId)> {
    let dist = g.l1_pairwise(h_proj, v_proj)?;
    let a = g.scale(dist, -1.0)?;
    let centred = g.center(a)?;
    let gate = g.sigmoid(centred)?;
    Ok((centred, gate))
}

/// `maxpool_time([H ; scores · V])`.
pub fn global_fuse(g: &mut Graph<'_>, h: NodeId, scores: NodeId, v: NodeId) -> Result<NodeId> {
    let attended = g.matmul(scores, v)?;
    let fused = g.concat(&[h, attended], Axis::Cols)?;
    g.max_pool_time(fused)
}
