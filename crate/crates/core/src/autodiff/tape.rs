use serde::{Deserialize, Serialize};

use super::quantize::quantize_unchecked;
use super::AutodiffError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub u32);

impl ParamId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Extremum taken by a weighted window node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WindowKind {
    /// bounded Once: dropped steps are scaled by `-M`
    Max,
    /// bounded Historically: dropped steps are scaled by `+M`
    Min,
}

#[derive(Debug, Clone)]
enum Op {
    Const,
    Param(ParamId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Neg(NodeId),
    Min2(NodeId, NodeId),
    Max2(NodeId, NodeId),
    Tanh(NodeId),
    Affine {
        weights: Box<[ParamId]>,
        bias: ParamId,
        inputs: Box<[f64]>,
    },
    Choice {
        inputs: Box<[NodeId]>,
        weights: Box<[ParamId]>,
    },
    Window {
        kind: WindowKind,
        inputs: Box<[NodeId]>,
        weights: Box<[ParamId]>,
        magnitude: f64,
        shift: ParamId,
    },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: f64,
    /// winning input of choice and window nodes, filled by `forward`
    winner: u32,
    /// `alpha * B_j` for choice nodes, `d value / d winner` for windows
    scale: f64,
    /// window winner is a kept step
    kept: bool,
}

/// Append-only record of scalar operations.
///
/// Building the tape only records structure; [`Tape::forward`] computes
/// values from the current parameter snapshot, so one tape can be re-run
/// after [`Tape::set_params`]. Inputs always refer to earlier nodes.
#[derive(Debug, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<f64>,
    quantized: bool,
    evaluated: bool,
    adjoints: Vec<f64>,
}

/// Which products a window node keeps: `w_i >= 0`, or the largest weight
/// when every weight is negative.
pub fn window_keep(weights: &[f64]) -> Vec<bool> {
    let mut keep: Vec<bool> = weights.iter().map(|w| *w >= 0.0).collect();
    if !keep.iter().any(|k| *k) {
        let mut best = 0;
        for (i, w) in weights.iter().enumerate() {
            if *w > weights[best] {
                best = i;
            }
        }
        if let Some(k) = keep.get_mut(best) {
            *k = true;
        }
    }
    keep
}

/// Value, winning position, and the winner's `d product / d input` of a weighted window.
///
/// Kept steps contribute `r + shift`; dropped steps contribute
/// `-+M * max(r + shift, 1)`, which sits far outside any kept value even
/// when the shifted input is close to zero. The shift is removed again from
/// the result, so a window whose kept steps win returns plain robustness.
pub(crate) fn window_eval(
    kind: WindowKind,
    inputs: impl Iterator<Item = f64>,
    keep: impl Fn(usize) -> bool,
    magnitude: f64,
    shift: f64,
) -> WindowOutput {
    let mut best = match kind {
        WindowKind::Max => f64::NEG_INFINITY,
        WindowKind::Min => f64::INFINITY,
    };
    let (mut at, mut slope, mut kept) = (0, 1.0, true);
    for (i, r) in inputs.enumerate() {
        let shifted = r + shift;
        let k = keep(i);
        let (prod, d) = if k {
            (shifted, 1.0)
        } else {
            let q = match kind {
                WindowKind::Max => -magnitude,
                WindowKind::Min => magnitude,
            };
            if shifted > 1.0 {
                (q * shifted, q)
            } else {
                (q, 0.0)
            }
        };
        let better = match kind {
            WindowKind::Max => prod > best,
            WindowKind::Min => prod < best,
        };
        if better {
            best = prod;
            at = i;
            slope = d;
            kept = k;
        }
    }
    WindowOutput {
        value: best - shift,
        winner: at,
        slope,
        kept,
    }
}

pub(crate) struct WindowOutput {
    pub value: f64,
    pub winner: usize,
    pub slope: f64,
    pub kept: bool,
}

impl Tape {
    pub fn new(params: &[f64]) -> Self {
        Tape {
            nodes: Vec::new(),
            params: params.to_vec(),
            quantized: true,
            evaluated: false,
            adjoints: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Choice nodes use `alpha B` when quantized (the default) and the raw
    /// weights otherwise.
    pub fn set_quantized(&mut self, quantized: bool) {
        self.quantized = quantized;
        self.evaluated = false;
    }

    pub fn set_params(&mut self, params: &[f64]) {
        self.params.clear();
        self.params.extend_from_slice(params);
        self.evaluated = false;
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    fn push(&mut self, op: Op) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node {
            op,
            value: f64::NAN,
            winner: 0,
            scale: 0.0,
            kept: false,
        });
        self.evaluated = false;
        id
    }

    fn check(&self, ids: &[NodeId]) {
        let n = self.nodes.len() as u32;
        assert!(ids.iter().all(|i| i.0 < n), "node input must already be on the tape");
    }

    fn check_param(&self, p: ParamId) {
        assert!(p.index() < self.params.len(), "unknown parameter {p:?}");
    }

    pub fn constant(&mut self, c: f64) -> NodeId {
        let id = self.push(Op::Const);
        self.nodes[id.index()].value = c;
        id
    }

    pub fn param(&mut self, p: ParamId) -> NodeId {
        self.check_param(p);
        self.push(Op::Param(p))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.check(&[a, b]);
        self.push(Op::Add(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.check(&[a, b]);
        self.push(Op::Mul(a, b))
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.check(&[a]);
        self.push(Op::Neg(a))
    }

    pub fn min2(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.check(&[a, b]);
        self.push(Op::Min2(a, b))
    }

    pub fn max2(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.check(&[a, b]);
        self.push(Op::Max2(a, b))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.check(&[a]);
        self.push(Op::Tanh(a))
    }

    /// `weights . inputs + bias` with trainable weights and constant inputs.
    pub fn affine(
        &mut self,
        weights: &[ParamId],
        bias: ParamId,
        inputs: &[f64],
    ) -> Result<NodeId, AutodiffError> {
        if weights.len() != inputs.len() {
            return Err(AutodiffError::LengthMismatch {
                inputs: inputs.len(),
                weights: weights.len(),
            });
        }
        weights.iter().for_each(|p| self.check_param(*p));
        self.check_param(bias);
        Ok(self.push(Op::Affine {
            weights: weights.into(),
            bias,
            inputs: inputs.into(),
        }))
    }

    /// Choice block output `sum_i alpha B_i r_i`.
    ///
    /// Backward is straight-through: each weight receives
    /// `upstream * r_i`, as if the quantizer were the identity.
    pub fn choice(&mut self, inputs: &[NodeId], weights: &[ParamId]) -> Result<NodeId, AutodiffError> {
        if inputs.is_empty() {
            return Err(AutodiffError::EmptyChoice);
        }
        if inputs.len() != weights.len() {
            return Err(AutodiffError::LengthMismatch {
                inputs: inputs.len(),
                weights: weights.len(),
            });
        }
        self.check(inputs);
        weights.iter().for_each(|p| self.check_param(*p));
        Ok(self.push(Op::Choice {
            inputs: inputs.into(),
            weights: weights.into(),
        }))
    }

    /// Weighted window extremum over `inputs[i]` = input robustness at past
    /// offset `i`. `weights` covers the whole window and may be longer than
    /// `inputs` near the start of a trace.
    pub fn window(
        &mut self,
        kind: WindowKind,
        inputs: &[NodeId],
        weights: &[ParamId],
        magnitude: f64,
        shift: ParamId,
    ) -> Result<NodeId, AutodiffError> {
        if inputs.is_empty() {
            return Err(AutodiffError::EmptyChoice);
        }
        if inputs.len() > weights.len() {
            return Err(AutodiffError::LengthMismatch {
                inputs: inputs.len(),
                weights: weights.len(),
            });
        }
        self.check(inputs);
        weights.iter().for_each(|p| self.check_param(*p));
        self.check_param(shift);
        Ok(self.push(Op::Window {
            kind,
            inputs: inputs.into(),
            weights: weights.into(),
            magnitude,
            shift,
        }))
    }

    /// Evaluates every node in order.
    pub fn forward(&mut self) {
        let quantized = self.quantized;
        for i in 0..self.nodes.len() {
            let (value, winner, scale, kept) = {
                let v = |id: NodeId| self.nodes[id.index()].value;
                let p = |id: ParamId| self.params[id.index()];
                match &self.nodes[i].op {
                    Op::Const => (self.nodes[i].value, 0, 0.0, false),
                    Op::Param(q) => (p(*q), 0, 0.0, false),
                    Op::Add(a, b) => (v(*a) + v(*b), 0, 0.0, false),
                    Op::Mul(a, b) => (v(*a) * v(*b), 0, 0.0, false),
                    Op::Neg(a) => (-v(*a), 0, 0.0, false),
                    Op::Min2(a, b) => (v(*a).min(v(*b)), 0, 0.0, false),
                    Op::Max2(a, b) => (v(*a).max(v(*b)), 0, 0.0, false),
                    Op::Tanh(a) => (v(*a).tanh(), 0, 0.0, false),
                    Op::Affine {
                        weights,
                        bias,
                        inputs,
                    } => (
                        weights.iter().zip(inputs.iter()).map(|(w, x)| p(*w) * x).sum::<f64>() + p(*bias),
                        0,
                        0.0,
                        false,
                    ),
                    Op::Choice { inputs, weights } => {
                        if quantized {
                            let q = quantize_unchecked(weights.iter().map(|w| p(*w)));
                            (q.scale() * v(inputs[q.index]), q.index as u32, q.scale(), false)
                        } else {
                            let s = inputs.iter().zip(weights.iter()).map(|(r, w)| p(*w) * v(*r)).sum();
                            (s, 0, 0.0, false)
                        }
                    }
                    Op::Window {
                        kind,
                        inputs,
                        weights,
                        magnitude,
                        shift,
                    } => {
                        let w: Vec<f64> = weights.iter().map(|w| p(*w)).collect();
                        let keep = window_keep(&w);
                        let o = window_eval(
                            *kind,
                            inputs.iter().map(|r| v(*r)),
                            |i| keep[i],
                            *magnitude,
                            p(*shift),
                        );
                        (o.value, o.winner as u32, o.slope, o.kept)
                    }
                }
            };
            let n = &mut self.nodes[i];
            n.value = value;
            n.winner = winner;
            n.scale = scale;
            n.kept = kept;
        }
        self.evaluated = true;
    }

    pub fn value(&self, id: NodeId) -> f64 {
        self.nodes[id.index()].value
    }

    /// Gradient of `out` with respect to every parameter.
    pub fn backward(&mut self, out: NodeId) -> Result<Vec<f64>, AutodiffError> {
        let mut grads = vec![0.0; self.params.len()];
        self.backward_into(out, 1.0, &mut grads)?;
        Ok(grads)
    }

    /// Adds `seed * d out / d param` into `grads`.
    ///
    /// Min/max send the whole adjoint to the winning argument, the first
    /// one on ties. Quantized choice and window nodes use the
    /// straight-through rule for their weights.
    pub fn backward_into(&mut self, out: NodeId, seed: f64, grads: &mut [f64]) -> Result<(), AutodiffError> {
        if !self.evaluated {
            return Err(AutodiffError::NotEvaluated);
        }
        if out.index() >= self.nodes.len() {
            return Err(AutodiffError::UnknownNode);
        }
        if grads.len() != self.params.len() {
            return Err(AutodiffError::LengthMismatch {
                inputs: grads.len(),
                weights: self.params.len(),
            });
        }
        let mut adj = std::mem::take(&mut self.adjoints);
        adj.clear();
        adj.resize(out.index() + 1, 0.0);
        adj[out.index()] = seed;
        let quantized = self.quantized;
        for i in (0..=out.index()).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            let node = &self.nodes[i];
            let v = |id: NodeId| self.nodes[id.index()].value;
            match &node.op {
                Op::Const => {}
                Op::Param(p) => grads[p.index()] += g,
                Op::Add(a, b) => {
                    adj[a.index()] += g;
                    adj[b.index()] += g;
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (v(*a), v(*b));
                    adj[a.index()] += g * vb;
                    adj[b.index()] += g * va;
                }
                Op::Neg(a) => adj[a.index()] -= g,
                Op::Min2(a, b) => {
                    let to = if v(*a) <= v(*b) { a } else { b };
                    adj[to.index()] += g;
                }
                Op::Max2(a, b) => {
                    let to = if v(*a) >= v(*b) { a } else { b };
                    adj[to.index()] += g;
                }
                Op::Tanh(a) => adj[a.index()] += g * (1.0 - node.value * node.value),
                Op::Affine {
                    weights,
                    bias,
                    inputs,
                } => {
                    for (w, x) in weights.iter().zip(inputs.iter()) {
                        grads[w.index()] += g * x;
                    }
                    grads[bias.index()] += g;
                }
                Op::Choice { inputs, weights } => {
                    for (r, w) in inputs.iter().zip(weights.iter()) {
                        grads[w.index()] += g * v(*r);
                    }
                    if quantized {
                        adj[inputs[node.winner as usize].index()] += g * node.scale;
                    } else {
                        for (r, w) in inputs.iter().zip(weights.iter()) {
                            adj[r.index()] += g * self.params[w.index()];
                        }
                    }
                }
                Op::Window {
                    kind,
                    inputs,
                    weights,
                    shift,
                    ..
                } => {
                    let j = node.winner as usize;
                    let r = inputs[j];
                    adj[r.index()] += g * node.scale;
                    // d product / d q at the winner, then the quantizer's
                    // direction: raising w keeps a step, which raises a max
                    // window and lowers a min window
                    let shifted = v(r) + self.params[shift.index()];
                    let dprod = if node.kept { shifted } else { shifted.max(1.0) };
                    let dir = match kind {
                        WindowKind::Max => 1.0,
                        WindowKind::Min => -1.0,
                    };
                    grads[weights[j].index()] += g * dprod * dir;
                }
            }
        }
        self.adjoints = adj;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitive_values() {
        let mut t = Tape::new(&[-1.0, 0.5]);
        let a = t.constant(3.0);
        let b = t.constant(5.0);
        let m = t.min2(a, b);
        let z = t.constant(0.0);
        let th = t.tanh(z);
        let af = t.affine(&[ParamId(0)], ParamId(1), &[0.2]).unwrap();
        t.forward();
        assert_eq!(t.value(m), 3.0);
        assert_eq!(t.value(th), 0.0);
        assert!((t.value(af) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn min_routes_to_winner_and_first_on_tie() {
        let mut t = Tape::new(&[1.0, 2.0]);
        let a = t.param(ParamId(0));
        let b = t.param(ParamId(1));
        let m = t.min2(a, b);
        t.forward();
        assert_eq!(t.backward(m).unwrap(), vec![1.0, 0.0]);
        t.set_params(&[2.0, 2.0]);
        t.forward();
        assert_eq!(t.backward(m).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn backward_requires_forward() {
        let mut t = Tape::new(&[1.0]);
        let a = t.param(ParamId(0));
        assert_eq!(t.backward(a), Err(AutodiffError::NotEvaluated));
        t.forward();
        let b = t.neg(a);
        assert_eq!(t.backward(b), Err(AutodiffError::NotEvaluated));
    }

    #[test]
    fn quantized_choice_forward_and_straight_through() {
        let mut t = Tape::new(&[0.3, -0.9]);
        let r0 = t.constant(2.0);
        let r1 = t.constant(5.0);
        let c = t.choice(&[r0, r1], &[ParamId(0), ParamId(1)]).unwrap();
        let g = 0.7;
        t.forward();
        assert!((t.value(c) - -4.5).abs() < 1e-12);
        let mut grads = vec![0.0; 2];
        t.backward_into(c, g, &mut grads).unwrap();
        assert_eq!(grads, vec![g * 2.0, g * 5.0]);
    }

    #[test]
    fn single_input_choice_is_identity() {
        let mut t = Tape::new(&[1.0]);
        let r = t.constant(7.0);
        let c = t.choice(&[r], &[ParamId(0)]).unwrap();
        t.forward();
        assert_eq!(t.value(c), 7.0);
        assert!(matches!(t.choice(&[r, r], &[ParamId(0)]), Err(AutodiffError::LengthMismatch { .. })));
        assert!(matches!(t.choice(&[], &[]), Err(AutodiffError::EmptyChoice)));
    }

    #[test]
    fn unquantized_choice_is_weighted_sum() {
        let mut t = Tape::new(&[0.3, -0.9]);
        let r0 = t.constant(2.0);
        let r1 = t.constant(5.0);
        let c = t.choice(&[r0, r1], &[ParamId(0), ParamId(1)]).unwrap();
        t.set_quantized(false);
        t.forward();
        assert!((t.value(c) - (0.6 - 4.5)).abs() < 1e-12);
    }

    #[test]
    fn window_drops_and_keeps() {
        // shift 0 and inputs in [0, 1): dropped products clamp to -+M
        let mut t = Tape::new(&[1.0, -1.0, 1.0, 0.0]);
        let r: Vec<NodeId> = [0.2, 0.7, 0.1].iter().map(|v| t.constant(*v)).collect();
        let w = [ParamId(0), ParamId(1), ParamId(2)];
        let once = t.window(WindowKind::Max, &r, &w, 1e6, ParamId(3)).unwrap();
        let hist = t.window(WindowKind::Min, &r, &w, 1e6, ParamId(3)).unwrap();
        t.forward();
        assert_eq!(t.value(once), 0.2);
        assert_eq!(t.value(hist), 0.1);
    }

    #[test]
    fn window_with_every_weight_negative_keeps_the_largest() {
        assert_eq!(window_keep(&[-0.3, -0.1, -0.2]), vec![false, true, false]);
        assert_eq!(window_keep(&[0.0, -0.1]), vec![true, false]);
    }
}
