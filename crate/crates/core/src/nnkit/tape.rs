//! Reverse-mode autodiff over a flat tape of vector-valued nodes. Parameter
//! matrices enter as leaf nodes; everything downstream is a vector.

use crate::error::{Error, Result};

use super::ParamSet;

pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Op {
    /// Constant input; no gradient flows past it.
    Leaf,
    /// Copy of a parameter block; gradients accumulate into the flat grad
    /// vector at the block's offset.
    Param { id: usize },
    /// y = W x, W is (rows x cols), x has len cols.
    MatVec { w: NodeId, x: NodeId },
    /// y = W^T x, W is (rows x cols), x has len rows. Also serves as row
    /// selection / weighted row averaging when x is (one-)hot.
    MatTVec { w: NodeId, x: NodeId },
    Add { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    /// y = alpha * a + beta (elementwise); beta is constant, so only alpha
    /// enters the backward pass.
    Affine {
        a: NodeId,
        alpha: f64,
        #[allow(dead_code)]
        beta: f64,
    },
    Tanh { a: NodeId },
    Sigmoid { a: NodeId },
    Concat { parts: Vec<NodeId> },
    /// Scalar cross-entropy of softmax(logits) against a target index; the
    /// softmax itself is cached for the backward pass.
    SoftmaxCe { logits: NodeId, probs: Vec<f64> },
    /// Scalar sum of squared differences against a constant target.
    SqDiffConst { a: NodeId, target: Vec<f64> },
    /// Scalar weighted sum of scalar terms.
    SumWeighted { terms: Vec<(NodeId, f64)> },
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    rows: usize,
    cols: usize,
    op: Op,
}

/// Forward values plus the operation graph needed for backward.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Vec<f64>, rows: usize, cols: usize, op: Op) -> NodeId {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node {
            value,
            rows,
            cols,
            op,
        });
        self.nodes.len() - 1
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id].value[0]
    }

    fn len_of(&self, id: NodeId) -> usize {
        self.nodes[id].value.len()
    }

    pub fn leaf(&mut self, v: Vec<f64>) -> NodeId {
        let n = v.len();
        self.push(v, n, 1, Op::Leaf)
    }

    pub fn param(&mut self, ps: &ParamSet, id: usize) -> NodeId {
        let (rows, cols) = ps.shape(id);
        self.push(ps.slice(id).to_vec(), rows, cols, Op::Param { id })
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> Result<NodeId> {
        let (rows, cols) = (self.nodes[w].rows, self.nodes[w].cols);
        if self.len_of(x) != cols {
            return Err(Error::ShapeMismatch(format!(
                "matvec: ({rows}x{cols}) * len {}",
                self.len_of(x)
            )));
        }
        let mut y = vec![0.0; rows];
        let wv = &self.nodes[w].value;
        let xv = &self.nodes[x].value;
        for r in 0..rows {
            let row = &wv[r * cols..(r + 1) * cols];
            y[r] = row.iter().zip(xv).map(|(a, b)| a * b).sum();
        }
        Ok(self.push(y, rows, 1, Op::MatVec { w, x }))
    }

    pub fn matvec_t(&mut self, w: NodeId, x: NodeId) -> Result<NodeId> {
        let (rows, cols) = (self.nodes[w].rows, self.nodes[w].cols);
        if self.len_of(x) != rows {
            return Err(Error::ShapeMismatch(format!(
                "matvec_t: ({rows}x{cols})^T * len {}",
                self.len_of(x)
            )));
        }
        let mut y = vec![0.0; cols];
        let wv = &self.nodes[w].value;
        let xv = &self.nodes[x].value;
        for r in 0..rows {
            let xr = xv[r];
            if xr == 0.0 {
                continue;
            }
            for c in 0..cols {
                y[c] += wv[r * cols + c] * xr;
            }
        }
        Ok(self.push(y, cols, 1, Op::MatTVec { w, x }))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.len_of(a) != self.len_of(b) {
            return Err(Error::ShapeMismatch("add: length mismatch".to_string()));
        }
        let v: Vec<f64> = self.nodes[a]
            .value
            .iter()
            .zip(&self.nodes[b].value)
            .map(|(x, y)| x + y)
            .collect();
        let n = v.len();
        Ok(self.push(v, n, 1, Op::Add { a, b }))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.len_of(a) != self.len_of(b) {
            return Err(Error::ShapeMismatch("mul: length mismatch".to_string()));
        }
        let v: Vec<f64> = self.nodes[a]
            .value
            .iter()
            .zip(&self.nodes[b].value)
            .map(|(x, y)| x * y)
            .collect();
        let n = v.len();
        Ok(self.push(v, n, 1, Op::Mul { a, b }))
    }

    pub fn affine(&mut self, a: NodeId, alpha: f64, beta: f64) -> NodeId {
        let v: Vec<f64> = self.nodes[a].value.iter().map(|x| alpha * x + beta).collect();
        let n = v.len();
        self.push(v, n, 1, Op::Affine { a, alpha, beta })
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v: Vec<f64> = self.nodes[a].value.iter().map(|x| x.tanh()).collect();
        let n = v.len();
        self.push(v, n, 1, Op::Tanh { a })
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v: Vec<f64> = self.nodes[a]
            .value
            .iter()
            .map(|x| 1.0 / (1.0 + (-x).exp()))
            .collect();
        let n = v.len();
        self.push(v, n, 1, Op::Sigmoid { a })
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut v = Vec::new();
        for &p in parts {
            v.extend_from_slice(&self.nodes[p].value);
        }
        let n = v.len();
        self.push(v, n, 1, Op::Concat {
            parts: parts.to_vec(),
        })
    }

    /// Cross-entropy of softmax(logits) against `target`.
    pub fn softmax_ce(&mut self, logits: NodeId, target: usize) -> Result<NodeId> {
        let n = self.len_of(logits);
        if target >= n {
            return Err(Error::ShapeMismatch(format!(
                "softmax_ce: target {target} out of range {n}"
            )));
        }
        let probs = softmax(&self.nodes[logits].value);
        let loss = -probs[target].max(1e-300).ln();
        let mut onehot_probs = probs;
        let id = self.push(vec![loss], 1, 1, Op::SoftmaxCe {
            logits,
            probs: std::mem::take(&mut onehot_probs),
        });
        // Record the target by folding it into the cached probs at backward
        // time: d(loss)/d(logits) = probs - onehot(target).
        if let Op::SoftmaxCe { probs, .. } = &mut self.nodes[id].op {
            probs[target] -= 1.0;
        }
        Ok(id)
    }

    /// Softmax probabilities of a logits node, without adding to the tape.
    pub fn softmax_of(&self, logits: NodeId) -> Vec<f64> {
        softmax(&self.nodes[logits].value)
    }

    /// Sum of squared differences against a constant target vector.
    pub fn sq_diff(&mut self, a: NodeId, target: Vec<f64>) -> Result<NodeId> {
        if self.len_of(a) != target.len() {
            return Err(Error::ShapeMismatch("sq_diff: length mismatch".to_string()));
        }
        let s: f64 = self.nodes[a]
            .value
            .iter()
            .zip(&target)
            .map(|(x, t)| (x - t) * (x - t))
            .sum();
        Ok(self.push(vec![s], 1, 1, Op::SqDiffConst { a, target }))
    }

    /// Weighted sum of scalar nodes.
    pub fn sum_weighted(&mut self, terms: &[(NodeId, f64)]) -> Result<NodeId> {
        for &(t, _) in terms {
            if self.len_of(t) != 1 {
                return Err(Error::ShapeMismatch(
                    "sum_weighted: non-scalar term".to_string(),
                ));
            }
        }
        let s: f64 = terms.iter().map(|&(t, w)| self.nodes[t].value[0] * w).sum();
        Ok(self.push(vec![s], 1, 1, Op::SumWeighted {
            terms: terms.to_vec(),
        }))
    }

    /// Reverse-mode gradients of the scalar node `loss` with respect to every
    /// parameter of `ps`, as a flat vector aligned with `ps.data`.
    pub fn backward(&self, loss: NodeId, ps: &ParamSet) -> Result<Vec<f64>> {
        if self.len_of(loss) != 1 {
            return Err(Error::ShapeMismatch(
                "backward: loss must be scalar".to_string(),
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss] = Some(vec![1.0]);
        let mut flat = vec![0.0; ps.len()];

        for id in (0..=loss).rev() {
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf => {}
                Op::Param { id: pid } => {
                    let off = ps.entries[*pid].offset;
                    for (i, gi) in g.iter().enumerate() {
                        flat[off + i] += gi;
                    }
                }
                Op::MatVec { w, x } => {
                    let cols = self.nodes[*w].cols;
                    let xv = &self.nodes[*x].value;
                    let wv = &self.nodes[*w].value;
                    let gw = grads[*w].get_or_insert_with(|| vec![0.0; wv.len()]);
                    for (r, gr) in g.iter().enumerate() {
                        if *gr == 0.0 {
                            continue;
                        }
                        for c in 0..cols {
                            gw[r * cols + c] += gr * xv[c];
                        }
                    }
                    let gx = grads[*x].get_or_insert_with(|| vec![0.0; xv.len()]);
                    for (r, gr) in g.iter().enumerate() {
                        if *gr == 0.0 {
                            continue;
                        }
                        for c in 0..cols {
                            gx[c] += gr * wv[r * cols + c];
                        }
                    }
                }
                Op::MatTVec { w, x } => {
                    let cols = self.nodes[*w].cols;
                    let xv = &self.nodes[*x].value;
                    let wv = &self.nodes[*w].value;
                    let gw = grads[*w].get_or_insert_with(|| vec![0.0; wv.len()]);
                    for (r, xr) in xv.iter().enumerate() {
                        if *xr == 0.0 {
                            continue;
                        }
                        for (c, gc) in g.iter().enumerate() {
                            gw[r * cols + c] += xr * gc;
                        }
                    }
                    let gx = grads[*x].get_or_insert_with(|| vec![0.0; xv.len()]);
                    for (r, gxr) in gx.iter_mut().enumerate() {
                        let row = &wv[r * cols..(r + 1) * cols];
                        *gxr += row.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
                Op::Add { a, b } => {
                    for &p in [a, b] {
                        let gp = grads[p].get_or_insert_with(|| vec![0.0; g.len()]);
                        for (gi, go) in gp.iter_mut().zip(&g) {
                            *gi += go;
                        }
                    }
                }
                Op::Mul { a, b } => {
                    let av = self.nodes[*a].value.clone();
                    let bv = self.nodes[*b].value.clone();
                    let ga = grads[*a].get_or_insert_with(|| vec![0.0; g.len()]);
                    for i in 0..g.len() {
                        ga[i] += g[i] * bv[i];
                    }
                    let gb = grads[*b].get_or_insert_with(|| vec![0.0; g.len()]);
                    for i in 0..g.len() {
                        gb[i] += g[i] * av[i];
                    }
                }
                Op::Affine { a, alpha, .. } => {
                    let ga = grads[*a].get_or_insert_with(|| vec![0.0; g.len()]);
                    for (gi, go) in ga.iter_mut().zip(&g) {
                        *gi += alpha * go;
                    }
                }
                Op::Tanh { a } => {
                    let ga = grads[*a].get_or_insert_with(|| vec![0.0; g.len()]);
                    for i in 0..g.len() {
                        let y = node.value[i];
                        ga[i] += g[i] * (1.0 - y * y);
                    }
                }
                Op::Sigmoid { a } => {
                    let ga = grads[*a].get_or_insert_with(|| vec![0.0; g.len()]);
                    for i in 0..g.len() {
                        let y = node.value[i];
                        ga[i] += g[i] * y * (1.0 - y);
                    }
                }
                Op::Concat { parts } => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.nodes[p].value.len();
                        let gp = grads[p].get_or_insert_with(|| vec![0.0; n]);
                        for i in 0..n {
                            gp[i] += g[off + i];
                        }
                        off += n;
                    }
                }
                Op::SoftmaxCe { logits, probs } => {
                    // probs already holds softmax - onehot(target).
                    let gl = grads[*logits].get_or_insert_with(|| vec![0.0; probs.len()]);
                    for (gi, p) in gl.iter_mut().zip(probs) {
                        *gi += g[0] * p;
                    }
                }
                Op::SqDiffConst { a, target } => {
                    let av = self.nodes[*a].value.clone();
                    let ga = grads[*a].get_or_insert_with(|| vec![0.0; av.len()]);
                    for i in 0..av.len() {
                        ga[i] += g[0] * 2.0 * (av[i] - target[i]);
                    }
                }
                Op::SumWeighted { terms } => {
                    for &(t, w) in terms {
                        let gt = grads[t].get_or_insert_with(|| vec![0.0; 1]);
                        gt[0] += g[0] * w;
                    }
                }
            }
        }
        Ok(flat)
    }
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

/// Max relative error between analytic and central finite-difference
/// gradients of the scalar built by `f` over every coordinate of `ps`.
pub fn gradient_check<F>(ps: &mut ParamSet, f: F, eps: f64) -> Result<f64>
where
    F: Fn(&ParamSet, &mut Tape) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let loss = f(ps, &mut tape)?;
    let analytic = tape.backward(loss, ps)?;

    let mut max_rel = 0.0_f64;
    // Index loop on purpose: each iteration perturbs ps.data[i] in place.
    #[allow(clippy::needless_range_loop)]
    for i in 0..ps.len() {
        let orig = ps.data[i];
        ps.data[i] = orig + eps;
        let mut tp = Tape::new();
        let lp = f(ps, &mut tp)?;
        let fp = tp.scalar(lp);
        ps.data[i] = orig - eps;
        let mut tm = Tape::new();
        let lm = f(ps, &mut tm)?;
        let fm = tm.scalar(lm);
        ps.data[i] = orig;
        let numeric = (fp - fm) / (2.0 * eps);
        let denom = analytic[i].abs().max(numeric.abs()).max(1.0);
        max_rel = max_rel.max((analytic[i] - numeric).abs() / denom);
    }
    Ok(max_rel)
}
