//! Operation tape for reverse-mode differentiation of the classifier losses.
//!
//! Nodes hold whole matrices (a batch of rows), so a forward pass through an
//! `L`-layer network costs `2L` nodes regardless of batch size. Node ids are
//! assigned in creation order, which is a topological order; the reverse
//! sweep walks ids downwards and visits each reachable node once.

use super::net::{Activation, ClassifierNet, Gradients};
use crate::error::{invalid, Error, Result};
use crate::scalar::{sigmoid, softplus, Matrix, Real};

/// `softplus(z) - y z`, written so that each label contributes through a
/// softplus of its own sign and stays accurate for large `|z|`.
pub(crate) fn bce_term<T: Real>(z: T, y: T) -> T {
    (T::one() - y) * softplus(z) + y * softplus(-z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Affine { input: NodeId, layer: usize },
    Activate { input: NodeId, kind: Activation },
    Sigmoid(NodeId),
    /// Elementwise binary cross-entropy of a logit.
    BceWithLogits { input: NodeId, labels: Vec<T> },
    Mean(NodeId),
    Add(NodeId, NodeId),
    AddConst(NodeId),
    Scale(NodeId, T),
    Square(NodeId),
}

#[derive(Debug, Clone)]
struct Node<T> {
    op: Op<T>,
    value: Matrix<T>,
}

/// Record of one forward computation against a borrowed network.
pub struct Tape<'n, T> {
    net: &'n ClassifierNet<T>,
    nodes: Vec<Node<T>>,
}

impl<'n, T: Real> Tape<'n, T> {
    pub fn new(net: &'n ClassifierNet<T>) -> Self {
        Self { net, nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix<T> {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op<T>, value: Matrix<T>) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    /// Constant input (a batch of rows).
    pub fn input(&mut self, m: Matrix<T>) -> NodeId {
        self.push(Op::Leaf, m)
    }

    /// Runs the network on the rows of `input`, returning an `rows x 1` logit node.
    pub fn forward(&mut self, input: NodeId) -> Result<NodeId> {
        let cols = self.value(input).cols;
        if cols != self.net.input_dim() {
            return Err(Error::DimensionMismatch { what: "network input", expected: self.net.input_dim(), got: cols });
        }
        let kind = self.net.activation();
        let mut h = input;
        for k in 0..self.net.layers().len() {
            if k > 0 {
                let v = self.value(h).map(|p| kind.apply(p));
                h = self.push(Op::Activate { input: h, kind }, v);
            }
            let v = self.net.affine(k, self.value(h));
            h = self.push(Op::Affine { input: h, layer: k }, v);
        }
        Ok(h)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), v)
    }

    /// Elementwise cross-entropy of logits `a` against 0/1 `labels`.
    pub fn bce_with_logits(&mut self, a: NodeId, labels: Vec<T>) -> Result<NodeId> {
        let z = self.value(a);
        if labels.len() != z.data.len() {
            return Err(Error::DimensionMismatch { what: "labels", expected: z.data.len(), got: labels.len() });
        }
        let data = z.data.iter().zip(&labels).map(|(&z, &y)| bce_term(z, y)).collect();
        let v = Matrix::from_vec(z.rows, z.cols, data);
        Ok(self.push(Op::BceWithLogits { input: a, labels }, v))
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let z = self.value(a);
        let n = T::from_usize(z.data.len()).unwrap();
        let s = z.data.iter().copied().sum::<T>() / n;
        self.push(Op::Mean(a), Matrix::from_vec(1, 1, vec![s]))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (x, y) = (self.value(a), self.value(b));
        if (x.rows, x.cols) != (y.rows, y.cols) {
            return Err(invalid("add: operand shapes differ"));
        }
        let data = x.data.iter().zip(&y.data).map(|(&p, &q)| p + q).collect();
        let v = Matrix::from_vec(x.rows, x.cols, data);
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn add_const(&mut self, a: NodeId, c: T) -> NodeId {
        let v = self.value(a).map(|p| p + c);
        self.push(Op::AddConst(a), v)
    }

    pub fn scale(&mut self, a: NodeId, c: T) -> NodeId {
        let v = self.value(a).map(|p| p * c);
        self.push(Op::Scale(a, c), v)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|p| p * p);
        self.push(Op::Square(a), v)
    }

    /// Gradient of the scalar `loss` with respect to every network parameter.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<T>> {
        Ok(self.sweep(loss, false)?.grads)
    }

    /// Gradient of the scalar `loss` with respect to the value of `node`.
    pub fn adjoint(&self, loss: NodeId, node: NodeId) -> Result<Matrix<T>> {
        let mut s = self.sweep(loss, true)?;
        let shape = self.value(node);
        Ok(s.adjoints.get_mut(node.0).and_then(Option::take).unwrap_or_else(|| Matrix::zeros(shape.rows, shape.cols)))
    }

    /// Ids in the order the reverse sweep visits them.
    pub fn sweep_order(&self, loss: NodeId) -> Result<Vec<NodeId>> {
        Ok(self.sweep(loss, true)?.order)
    }

    fn sweep(&self, loss: NodeId, keep_adjoints: bool) -> Result<Sweep<T>> {
        let lv = self.value(loss);
        if lv.as_scalar().is_none() {
            return Err(invalid(format!("loss must be a scalar node, got {}x{}", lv.rows, lv.cols)));
        }
        let mut grads = self.net.zero_gradients();
        let mut adj: Vec<Option<Matrix<T>>> = vec![None; loss.0 + 1];
        let mut kept: Vec<Option<Matrix<T>>> = Vec::new();
        if keep_adjoints {
            kept = vec![None; loss.0 + 1];
        }
        let mut order = Vec::new();
        adj[loss.0] = Some(Matrix::from_vec(1, 1, vec![T::one()]));

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            order.push(NodeId(i));
            if keep_adjoints {
                kept[i] = Some(g.clone());
            }
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Affine { input, layer } => {
                    let x = self.value(*input);
                    let lg = &mut grads[*layer];
                    let mut dw = Matrix::from_vec(lg.outputs, lg.inputs, std::mem::take(&mut lg.weights));
                    T::gemm(T::one(), g.view().t(), x.view(), T::one(), &mut dw);
                    lg.weights = dw.data;
                    for r in 0..g.rows {
                        for (b, &v) in lg.bias.iter_mut().zip(g.row(r)) {
                            *b = *b + v;
                        }
                    }
                    // Data leaves need no adjoint unless one was asked for.
                    if keep_adjoints || !matches!(self.nodes[input.0].op, Op::Leaf) {
                        let w = self.net.layers()[*layer].weight_view();
                        let mut dx = Matrix::zeros(x.rows, x.cols);
                        T::gemm(T::one(), g.view(), w, T::zero(), &mut dx);
                        accumulate(&mut adj, *input, dx);
                    }
                }
                Op::Activate { input, kind } => {
                    let pre = self.value(*input);
                    let data = g.data.iter().zip(&pre.data).map(|(&gv, &p)| gv * kind.derivative(p)).collect();
                    accumulate(&mut adj, *input, Matrix::from_vec(g.rows, g.cols, data));
                }
                Op::Sigmoid(a) => {
                    let data = g.data.iter().zip(&node.value.data).map(|(&gv, &s)| gv * s * (T::one() - s)).collect();
                    accumulate(&mut adj, *a, Matrix::from_vec(g.rows, g.cols, data));
                }
                Op::BceWithLogits { input, labels } => {
                    let z = self.value(*input);
                    let data = g
                        .data
                        .iter()
                        .zip(&z.data)
                        .zip(labels)
                        .map(|((&gv, &zv), &y)| gv * (sigmoid(zv) - y))
                        .collect();
                    accumulate(&mut adj, *input, Matrix::from_vec(g.rows, g.cols, data));
                }
                Op::Mean(a) => {
                    let shape = self.value(*a);
                    let n = T::from_usize(shape.data.len()).unwrap();
                    let each = g.data[0] / n;
                    accumulate(&mut adj, *a, Matrix::from_vec(shape.rows, shape.cols, vec![each; shape.data.len()]));
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj, *a, g.clone());
                    accumulate(&mut adj, *b, g);
                }
                Op::AddConst(a) => accumulate(&mut adj, *a, g),
                Op::Scale(a, c) => accumulate(&mut adj, *a, g.map(|v| v * *c)),
                Op::Square(a) => {
                    let x = self.value(*a);
                    let data = g.data.iter().zip(&x.data).map(|(&gv, &xv)| gv * (xv + xv)).collect();
                    accumulate(&mut adj, *a, Matrix::from_vec(g.rows, g.cols, data));
                }
            }
        }
        Ok(Sweep { grads, adjoints: kept, order })
    }
}

struct Sweep<T> {
    grads: Gradients<T>,
    adjoints: Vec<Option<Matrix<T>>>,
    order: Vec<NodeId>,
}

fn accumulate<T: Real>(adj: &mut [Option<Matrix<T>>], id: NodeId, g: Matrix<T>) {
    match &mut adj[id.0] {
        Some(acc) => {
            for (a, v) in acc.data.iter_mut().zip(&g.data) {
                *a = *a + *v;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffnet::net::Layer;

    fn linear(w: f64, b: f64) -> ClassifierNet<f64> {
        ClassifierNet::from_layers(vec![Layer { inputs: 1, outputs: 1, weights: vec![w], bias: vec![b] }], Activation::Relu)
            .unwrap()
    }

    #[test]
    fn linear_logit_gradient() {
        let net = linear(1.7, -0.4);
        let mut tape = Tape::new(&net);
        let x = tape.input(Matrix::from_vec(1, 1, vec![2.5]));
        let z = tape.forward(x).unwrap();
        let g = tape.backward(z).unwrap();
        assert_eq!(g[0].weights, vec![2.5]);
        assert_eq!(g[0].bias, vec![1.0]);
    }

    #[test]
    fn sigmoid_slope_at_zero() {
        let net = linear(0.0, 0.0);
        let mut tape = Tape::new(&net);
        let x = tape.input(Matrix::from_vec(1, 1, vec![1.0]));
        let z = tape.forward(x).unwrap();
        let s = tape.sigmoid(z);
        assert_eq!(tape.adjoint(s, z).unwrap().data, vec![0.25]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let net = linear(1.0, 0.0);
        let mut tape = Tape::new(&net);
        let x = tape.input(Matrix::from_vec(3, 1, vec![1.0, 2.0, 3.0]));
        let z = tape.forward(x).unwrap();
        assert!(matches!(tape.backward(z), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn sweep_visits_each_node_once_in_reverse_order() {
        let net = ClassifierNet::<f64>::zeros(2, &[3, 3], Activation::Relu);
        let mut tape = Tape::new(&net);
        let a = tape.input(Matrix::zeros(4, 2));
        let b = tape.input(Matrix::zeros(4, 2));
        let za = tape.forward(a).unwrap();
        let zb = tape.forward(b).unwrap();
        let ma = tape.mean(za);
        let mb = tape.mean(zb);
        let loss = tape.add(ma, mb).unwrap();
        let order = tape.sweep_order(loss).unwrap();
        assert_eq!(order.len(), tape.len());
        assert!(order.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn shared_layers_accumulate_across_passes() {
        let net = linear(2.0, 0.0);
        let mut tape = Tape::new(&net);
        let a = tape.input(Matrix::from_vec(1, 1, vec![1.0]));
        let b = tape.input(Matrix::from_vec(1, 1, vec![3.0]));
        let za = tape.forward(a).unwrap();
        let zb = tape.forward(b).unwrap();
        let loss = tape.add(za, zb).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g[0].weights, vec![4.0]);
        assert_eq!(g[0].bias, vec![2.0]);
    }
}
