//! Reverse-mode autodiff over a flat tape of 2-D tensors.
//!
//! A `Graph` is built per forward pass. Leaves hold parameter or input
//! values; every op records enough to run its backward rule. `backward`
//! walks the tape in reverse and accumulates gradients; leaf gradients are
//! then read off by the caller.

use super::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    Leaf,
    /// Gather rows of `table` by token id.
    Embed { table: NodeId, ids: Vec<u32> },
    SliceRows { x: NodeId, start: usize },
    SliceCols { x: NodeId, start: usize },
    ConcatRows { a: NodeId, b: NodeId },
    ConcatCols { parts: Vec<NodeId> },
    /// x . w + b (b broadcast over rows; stored 1 x n)
    Linear { x: NodeId, w: NodeId, b: NodeId },
    MatMul { a: NodeId, b: NodeId },
    /// a . b^T
    MatMulNT { a: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    /// x + constant matrix (attention mask); the constant gets no gradient.
    AddConst { x: NodeId },
    Scale { x: NodeId, c: f64 },
    Gelu { x: NodeId },
    LayerNorm { x: NodeId, gain: NodeId, bias: NodeId, eps: f64 },
    /// Row-wise softmax.
    Softmax { x: NodeId },
    /// Element-wise multiply by a fixed mask (inverted dropout).
    Dropout { x: NodeId, mask: Vec<f64> },
    /// Sum of token negative log-likelihoods over non-pad targets.
    TokenNll {
        logits: NodeId,
        targets: Vec<u32>,
        pad: u32,
        probs: Tensor,
    },
}

struct Node {
    value: Tensor,
    grad: Option<Tensor>,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node {
            value,
            grad: None,
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.nodes[id.0].grad.as_ref()
    }

    /// Gradient of a leaf, or zeros if the loss did not depend on it.
    pub fn grad_or_zeros(&self, id: NodeId) -> Tensor {
        let node = &self.nodes[id.0];
        node.grad
            .clone()
            .unwrap_or_else(|| Tensor::zeros(node.value.rows(), node.value.cols()))
    }

    pub fn embed(&mut self, table: NodeId, ids: &[u32]) -> NodeId {
        let t = self.value(table);
        let cols = t.cols();
        let mut out = Tensor::zeros(ids.len(), cols);
        for (r, &id) in ids.iter().enumerate() {
            debug_assert!((id as usize) < t.rows(), "token id out of embedding range");
            out.row_mut(r).copy_from_slice(t.row(id as usize));
        }
        self.push(
            out,
            Op::Embed {
                table,
                ids: ids.to_vec(),
            },
        )
    }

    pub fn slice_rows(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let v = self.value(x);
        assert!(start + len <= v.rows());
        let mut out = Tensor::zeros(len, v.cols());
        for r in 0..len {
            out.row_mut(r).copy_from_slice(v.row(start + r));
        }
        self.push(out, Op::SliceRows { x, start })
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let v = self.value(x);
        assert!(start + len <= v.cols());
        let mut out = Tensor::zeros(v.rows(), len);
        for r in 0..v.rows() {
            out.row_mut(r).copy_from_slice(&v.row(r)[start..start + len]);
        }
        self.push(out, Op::SliceCols { x, start })
    }

    pub fn concat_rows(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.cols(), vb.cols());
        let mut data = Vec::with_capacity(va.len() + vb.len());
        data.extend_from_slice(va.data());
        data.extend_from_slice(vb.data());
        let out = Tensor::from_vec(va.rows() + vb.rows(), va.cols(), data);
        self.push(out, Op::ConcatRows { a, b })
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let rows = self.value(parts[0]).rows();
        let total_cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Tensor::zeros(rows, total_cols);
        let mut col = 0;
        for &p in parts {
            let v = self.value(p);
            assert_eq!(v.rows(), rows);
            for r in 0..rows {
                out.row_mut(r)[col..col + v.cols()].copy_from_slice(v.row(r));
            }
            col += v.cols();
        }
        self.push(
            out,
            Op::ConcatCols {
                parts: parts.to_vec(),
            },
        )
    }

    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let out = {
            let (vx, vw, vb) = (self.value(x), self.value(w), self.value(b));
            assert_eq!(vb.rows(), 1);
            assert_eq!(vb.cols(), vw.cols());
            let mut out = vx.matmul(vw);
            for r in 0..out.rows() {
                let row = out.row_mut(r);
                for (o, &bias) in row.iter_mut().zip(vb.row(0)) {
                    *o += bias;
                }
            }
            out
        };
        self.push(out, Op::Linear { x, w, b })
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.value(a).matmul(self.value(b));
        self.push(out, Op::MatMul { a, b })
    }

    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.value(a).matmul_nt(self.value(b));
        self.push(out, Op::MatMulNT { a, b })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        self.push(out, Op::Add { a, b })
    }

    pub fn add_const(&mut self, x: NodeId, c: &Tensor) -> NodeId {
        let v = self.value(x);
        assert_eq!((v.rows(), v.cols()), (c.rows(), c.cols()));
        let mut out = v.clone();
        for (o, &m) in out.data_mut().iter_mut().zip(c.data()) {
            *o += m;
        }
        self.push(out, Op::AddConst { x })
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let mut out = self.value(x).clone();
        out.scale_assign(c);
        self.push(out, Op::Scale { x, c })
    }

    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            *v = gelu(*v);
        }
        self.push(out, Op::Gelu { x })
    }

    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId, eps: f64) -> NodeId {
        let out = {
            let (vx, vg, vb) = (self.value(x), self.value(gain), self.value(bias));
            assert_eq!(vg.rows(), 1);
            assert_eq!(vg.cols(), vx.cols());
            assert_eq!(vb.cols(), vx.cols());
            let mut out = Tensor::zeros(vx.rows(), vx.cols());
            for r in 0..vx.rows() {
                let row = vx.row(r);
                let (mean, var) = mean_var(row);
                let inv = 1.0 / (var + eps).sqrt();
                let orow = out.row_mut(r);
                for c in 0..row.len() {
                    orow[c] = (row[c] - mean) * inv * vg.at(0, c) + vb.at(0, c);
                }
            }
            out
        };
        self.push(out, Op::LayerNorm { x, gain, bias, eps })
    }

    pub fn softmax(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let mut out = Tensor::zeros(v.rows(), v.cols());
        for r in 0..v.rows() {
            softmax_row(v.row(r), out.row_mut(r));
        }
        self.push(out, Op::Softmax { x })
    }

    pub fn dropout(&mut self, x: NodeId, mask: Vec<f64>) -> NodeId {
        let v = self.value(x);
        assert_eq!(mask.len(), v.len());
        let mut out = v.clone();
        for (o, &m) in out.data_mut().iter_mut().zip(&mask) {
            *o *= m;
        }
        self.push(out, Op::Dropout { x, mask })
    }

    /// Sum of `-log p(target)` over positions whose target is not `pad`.
    /// Returns the scalar node and the number of counted positions.
    pub fn token_nll(&mut self, logits: NodeId, targets: &[u32], pad: u32) -> (NodeId, usize) {
        let v = self.value(logits);
        assert_eq!(v.rows(), targets.len());
        let mut probs = Tensor::zeros(v.rows(), v.cols());
        let mut total = 0.0;
        let mut count = 0usize;
        for (r, &t) in targets.iter().enumerate() {
            if t == pad {
                continue;
            }
            softmax_row(v.row(r), probs.row_mut(r));
            total -= probs.at(r, t as usize).max(f64::MIN_POSITIVE).ln();
            count += 1;
        }
        let id = self.push(
            Tensor::scalar(total),
            Op::TokenNll {
                logits,
                targets: targets.to_vec(),
                pad,
                probs,
            },
        );
        (id, count)
    }

    fn add_grad(&mut self, id: NodeId, delta: Tensor) {
        let node = &mut self.nodes[id.0];
        match &mut node.grad {
            Some(g) => g.add_assign(&delta),
            None => node.grad = Some(delta),
        }
    }

    /// Backpropagate from a scalar node (seeded with d(loss)/d(loss) = 1).
    pub fn backward(&mut self, loss: NodeId) {
        assert_eq!(self.nodes[loss.0].value.len(), 1, "backward needs a scalar");
        self.nodes[loss.0].grad = Some(Tensor::scalar(1.0));
        for i in (0..self.nodes.len()).rev() {
            let grad = match &self.nodes[i].grad {
                Some(g) => g.clone(),
                None => continue,
            };
            // Ops read their cached inputs, compute input gradients, and
            // accumulate them onto the input nodes.
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Embed { table, ids } => {
                    let (table, ids) = (*table, ids.clone());
                    let tv = self.value(table);
                    let mut dt = Tensor::zeros(tv.rows(), tv.cols());
                    for (r, &id) in ids.iter().enumerate() {
                        let src = grad.row(r);
                        let dst = dt.row_mut(id as usize);
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                    self.add_grad(table, dt);
                }
                Op::SliceRows { x, start } => {
                    let (x, start) = (*x, *start);
                    let xv = self.value(x);
                    let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                    for r in 0..grad.rows() {
                        dx.row_mut(start + r).copy_from_slice(grad.row(r));
                    }
                    self.add_grad(x, dx);
                }
                Op::SliceCols { x, start } => {
                    let (x, start) = (*x, *start);
                    let xv = self.value(x);
                    let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                    for r in 0..grad.rows() {
                        dx.row_mut(r)[start..start + grad.cols()].copy_from_slice(grad.row(r));
                    }
                    self.add_grad(x, dx);
                }
                Op::ConcatRows { a, b } => {
                    let (a, b) = (*a, *b);
                    let a_rows = self.value(a).rows();
                    let cols = grad.cols();
                    let mut da = Tensor::zeros(a_rows, cols);
                    for r in 0..a_rows {
                        da.row_mut(r).copy_from_slice(grad.row(r));
                    }
                    let b_rows = grad.rows() - a_rows;
                    let mut db = Tensor::zeros(b_rows, cols);
                    for r in 0..b_rows {
                        db.row_mut(r).copy_from_slice(grad.row(a_rows + r));
                    }
                    self.add_grad(a, da);
                    self.add_grad(b, db);
                }
                Op::ConcatCols { parts } => {
                    let parts = parts.clone();
                    let mut col = 0;
                    for p in parts {
                        let pc = self.value(p).cols();
                        let mut dp = Tensor::zeros(grad.rows(), pc);
                        for r in 0..grad.rows() {
                            dp.row_mut(r).copy_from_slice(&grad.row(r)[col..col + pc]);
                        }
                        col += pc;
                        self.add_grad(p, dp);
                    }
                }
                Op::Linear { x, w, b } => {
                    let (x, w, b) = (*x, *w, *b);
                    let dx = grad.matmul_nt(self.value(w));
                    let dw = self.value(x).matmul_tn(&grad);
                    let mut db = Tensor::zeros(1, grad.cols());
                    for r in 0..grad.rows() {
                        for (d, &g) in db.row_mut(0).iter_mut().zip(grad.row(r)) {
                            *d += g;
                        }
                    }
                    self.add_grad(x, dx);
                    self.add_grad(w, dw);
                    self.add_grad(b, db);
                }
                Op::MatMul { a, b } => {
                    let (a, b) = (*a, *b);
                    let da = grad.matmul_nt(self.value(b));
                    let db = self.value(a).matmul_tn(&grad);
                    self.add_grad(a, da);
                    self.add_grad(b, db);
                }
                Op::MatMulNT { a, b } => {
                    let (a, b) = (*a, *b);
                    let da = grad.matmul(self.value(b));
                    let db = grad.matmul_tn(self.value(a));
                    self.add_grad(a, da);
                    self.add_grad(b, db);
                }
                Op::Add { a, b } => {
                    let (a, b) = (*a, *b);
                    self.add_grad(a, grad.clone());
                    self.add_grad(b, grad);
                }
                Op::AddConst { x } => {
                    let x = *x;
                    self.add_grad(x, grad);
                }
                Op::Scale { x, c } => {
                    let (x, c) = (*x, *c);
                    let mut dx = grad;
                    dx.scale_assign(c);
                    self.add_grad(x, dx);
                }
                Op::Gelu { x } => {
                    let x = *x;
                    let xv = self.value(x);
                    let mut dx = grad;
                    for (d, &v) in dx.data_mut().iter_mut().zip(xv.data()) {
                        *d *= gelu_derivative(v);
                    }
                    self.add_grad(x, dx);
                }
                Op::LayerNorm { x, gain, bias, eps } => {
                    let (x, gain, bias, eps) = (*x, *gain, *bias, *eps);
                    let xv = self.value(x).clone();
                    let gv = self.value(gain).clone();
                    let n = xv.cols();
                    let mut dx = Tensor::zeros(xv.rows(), n);
                    let mut dgain = Tensor::zeros(1, n);
                    let mut dbias = Tensor::zeros(1, n);
                    for r in 0..xv.rows() {
                        let row = xv.row(r);
                        let grow = grad.row(r);
                        let (mean, var) = mean_var(row);
                        let inv = 1.0 / (var + eps).sqrt();
                        // dxhat, plus parameter grads
                        let mut dxhat = vec![0.0; n];
                        let mut mean_dxhat = 0.0;
                        let mut mean_dxhat_xhat = 0.0;
                        for c in 0..n {
                            let xhat = (row[c] - mean) * inv;
                            dgain.row_mut(0)[c] += grow[c] * xhat;
                            dbias.row_mut(0)[c] += grow[c];
                            let d = grow[c] * gv.at(0, c);
                            dxhat[c] = d;
                            mean_dxhat += d;
                            mean_dxhat_xhat += d * xhat;
                        }
                        mean_dxhat /= n as f64;
                        mean_dxhat_xhat /= n as f64;
                        let drow = dx.row_mut(r);
                        for c in 0..n {
                            let xhat = (row[c] - mean) * inv;
                            drow[c] = inv * (dxhat[c] - mean_dxhat - xhat * mean_dxhat_xhat);
                        }
                    }
                    self.add_grad(x, dx);
                    self.add_grad(gain, dgain);
                    self.add_grad(bias, dbias);
                }
                Op::Softmax { x } => {
                    let x = *x;
                    let yv = self.nodes[i].value.clone();
                    let mut dx = Tensor::zeros(yv.rows(), yv.cols());
                    for r in 0..yv.rows() {
                        let y = yv.row(r);
                        let dy = grad.row(r);
                        let dot: f64 = y.iter().zip(dy).map(|(&a, &b)| a * b).sum();
                        let drow = dx.row_mut(r);
                        for c in 0..y.len() {
                            drow[c] = y[c] * (dy[c] - dot);
                        }
                    }
                    self.add_grad(x, dx);
                }
                Op::Dropout { x, mask } => {
                    let (x, mask) = (*x, mask.clone());
                    let mut dx = grad;
                    for (d, &m) in dx.data_mut().iter_mut().zip(&mask) {
                        *d *= m;
                    }
                    self.add_grad(x, dx);
                }
                Op::TokenNll {
                    logits,
                    targets,
                    pad,
                    probs,
                } => {
                    let (logits, targets, pad) = (*logits, targets.clone(), *pad);
                    let probs = probs.clone();
                    let scale = grad.item();
                    let mut dl = Tensor::zeros(probs.rows(), probs.cols());
                    for (r, &t) in targets.iter().enumerate() {
                        if t == pad {
                            continue;
                        }
                        let prow = probs.row(r);
                        let drow = dl.row_mut(r);
                        for c in 0..prow.len() {
                            drow[c] = scale * prow[c];
                        }
                        drow[t as usize] -= scale;
                    }
                    self.add_grad(logits, dl);
                }
            }
        }
    }
}

fn mean_var(row: &[f64]) -> (f64, f64) {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

fn softmax_row(input: &[f64], out: &mut [f64]) {
    let max = input.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(input) {
        let e = (v - max).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

const GELU_C: f64 = 0.7978845608028654; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_derivative(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    let sech2 = 1.0 - t * t;
    0.5 * (1.0 + t) + 0.5 * x * sech2 * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Finite-difference check over a composite graph touching every op.
    fn composite_loss(params: &[Tensor], dropout_mask: &[f64]) -> (Graph, Vec<NodeId>, NodeId) {
        let mut g = Graph::new();
        let leaves: Vec<NodeId> = params.iter().map(|t| g.leaf(t.clone())).collect();
        let [table, w, b, gain, bias, kproj, prefix] = leaves[..] else {
            panic!("expected 7 parameter tensors")
        };

        let ids = [0u32, 2, 1, 3];
        let x = g.embed(table, &ids); // 4 x 4
        let x = g.layer_norm(x, gain, bias, 1e-5);
        let h = g.linear(x, w, b); // 4 x 4
        let h = g.gelu(h);
        let h = g.dropout(h, dropout_mask.to_vec());
        // attention-ish block with a prefix concatenated to keys
        let k = g.matmul(h, kproj); // 4 x 4
        let k = g.concat_rows(prefix, k); // 6 x 4
        let scores = g.matmul_nt(h, k); // 4 x 6
        let scores = g.scale(scores, 0.5);
        let mask = Tensor::zeros(4, 6);
        let scores = g.add_const(scores, &mask);
        let attn = g.softmax(scores);
        let mixed = g.matmul(attn, k); // 4 x 4
        let left = g.slice_cols(mixed, 0, 2);
        let right = g.slice_cols(mixed, 2, 2);
        let folded = g.add(left, right); // 4 x 2
        let joined = g.concat_cols(&[folded, folded]); // 4 x 4
        let top = g.slice_rows(joined, 0, 4);
        let (loss, count) = g.token_nll(top, &[1, 0, 3, 2], 0);
        assert_eq!(count, 3);
        let loss = g.scale(loss, 1.0 / count as f64);
        (g, leaves, loss)
    }

    #[test]
    fn composite_gradients_match_finite_differences() {
        let mut rng = crate::seeding::substream_rng(3, "nn/gradcheck");
        let mut params: Vec<Tensor> = Vec::new();
        for (rows, cols) in [(5, 4), (4, 4), (1, 4), (1, 4), (1, 4), (4, 4), (2, 4)] {
            let data: Vec<f64> = (0..rows * cols)
                .map(|_| rng.random_range(-0.8..0.8))
                .collect();
            params.push(Tensor::from_vec(rows, cols, data));
        }
        let dropout_mask: Vec<f64> = (0..16)
            .map(|_| if rng.random_bool(0.8) { 1.25 } else { 0.0 })
            .collect();

        let (mut g, leaves, loss) = composite_loss(&params, &dropout_mask);
        g.backward(loss);
        let analytic: Vec<Tensor> = leaves.iter().map(|&l| g.grad_or_zeros(l)).collect();

        let h = 1e-6;
        for (pi, tensor) in params.iter().enumerate() {
            for idx in 0..tensor.len() {
                let mut plus = params.clone();
                plus[pi].data_mut()[idx] += h;
                let (gp, _, lp) = composite_loss(&plus, &dropout_mask);
                let mut minus = params.clone();
                minus[pi].data_mut()[idx] -= h;
                let (gm, _, lm) = composite_loss(&minus, &dropout_mask);
                let fd = (gp.value(lp).item() - gm.value(lm).item()) / (2.0 * h);
                let an = analytic[pi].data()[idx];
                let denom = an.abs().max(fd.abs()).max(1e-4);
                assert!(
                    ((an - fd) / denom).abs() < 1e-5,
                    "param {pi} entry {idx}: analytic {an} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_vec(
            2,
            3,
            vec![1.0, -2.0, 0.5, f64::NEG_INFINITY, 0.0, 3.0],
        ));
        let y = g.softmax(x);
        for r in 0..2 {
            let sum: f64 = g.value(y).row(r).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        // masked entry gets exactly zero probability
        assert_eq!(g.value(y).at(1, 0), 0.0);
    }

    #[test]
    fn token_nll_of_uniform_logits_is_ln_vocab() {
        let mut g = Graph::new();
        let logits = g.leaf(Tensor::zeros(4, 10));
        let (nll, count) = g.token_nll(logits, &[3, 7, 0, 2], 0);
        assert_eq!(count, 3, "pad target excluded");
        let mean = g.value(nll).item() / count as f64;
        assert!((mean - (10.0f64).ln()).abs() < 1e-12);
    }
}
