//! Minimal reverse-mode differentiation over vector-valued nodes.
//!
//! Trainable parameters live in one flat `f64` slice; matrix blocks are
//! referenced by offset. Forward values are computed eagerly as the graph is
//! built, and `backward` accumulates gradients with respect to every
//! parameter into a flat gradient buffer of the same length.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    /// Parameter vector at `offset`.
    Param { offset: usize },
    /// `y = W x` with `W` row-major at `offset`, shape `rows x cols`.
    MatVec {
        offset: usize,
        rows: usize,
        cols: usize,
        x: NodeId,
    },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Softplus(NodeId),
    Ln(NodeId),
    Concat(Vec<NodeId>),
    Slice {
        a: NodeId,
        start: usize,
        len: usize,
    },
    Softmax(NodeId),
    Dot(NodeId, NodeId),
    Sum(NodeId),
    /// `sum_i weights[i] * items[i]` with scalar weights node of length
    /// `items.len()`.
    WeightedSum {
        weights: NodeId,
        items: Vec<NodeId>,
    },
}

struct Node {
    op: Op,
    value: Vec<f64>,
}

pub struct Tape<'p> {
    params: &'p [f64],
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softplus(x: f64) -> f64 {
    // numerically stable form
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p [f64]) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.nodes[id.0].value.len(), 1);
        self.nodes[id.0].value[0]
    }

    fn push(&mut self, op: Op, value: Vec<f64>) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, v: Vec<f64>) -> NodeId {
        self.push(Op::Constant, v)
    }

    pub fn param(&mut self, offset: usize, len: usize) -> NodeId {
        let v = self.params[offset..offset + len].to_vec();
        self.push(Op::Param { offset }, v)
    }

    pub fn matvec(&mut self, offset: usize, rows: usize, cols: usize, x: NodeId) -> NodeId {
        debug_assert_eq!(self.nodes[x.0].value.len(), cols);
        let w = &self.params[offset..offset + rows * cols];
        let xv = &self.nodes[x.0].value;
        let y: Vec<f64> = (0..rows)
            .map(|r| {
                w[r * cols..(r + 1) * cols]
                    .iter()
                    .zip(xv)
                    .map(|(wi, xi)| wi * xi)
                    .sum()
            })
            .collect();
        self.push(
            Op::MatVec {
                offset,
                rows,
                cols,
                x,
            },
            y,
        )
    }

    fn zip(&mut self, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64, op: Op) -> NodeId {
        let v: Vec<f64> = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(&x, &y)| f(x, y))
            .collect();
        debug_assert_eq!(self.nodes[a.0].value.len(), self.nodes[b.0].value.len());
        self.push(op, v)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip(a, b, |x, y| x / y, Op::Div(a, b))
    }

    fn map(&mut self, a: NodeId, f: impl Fn(f64) -> f64, op: Op) -> NodeId {
        let v: Vec<f64> = self.nodes[a.0].value.iter().map(|&x| f(x)).collect();
        self.push(op, v)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        self.map(a, |x| x * c, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        self.map(a, |x| x + c, Op::AddScalar(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        self.map(a, softplus, Op::Softplus(a))
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        self.map(a, f64::ln, Op::Ln(a))
    }

    pub fn concat(&mut self, parts: Vec<NodeId>) -> NodeId {
        let v: Vec<f64> = parts
            .iter()
            .flat_map(|p| self.nodes[p.0].value.clone())
            .collect();
        self.push(Op::Concat(parts), v)
    }

    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let v = self.nodes[a.0].value[start..start + len].to_vec();
        self.push(Op::Slice { a, start, len }, v)
    }

    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let xs = &self.nodes[a.0].value;
        let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = xs.iter().map(|&x| (x - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        let v: Vec<f64> = exps.iter().map(|&e| e / z).collect();
        self.push(Op::Softmax(a), v)
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v: f64 = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(&x, &y)| x * y)
            .sum();
        self.push(Op::Dot(a, b), vec![v])
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v: f64 = self.nodes[a.0].value.iter().sum();
        self.push(Op::Sum(a), vec![v])
    }

    pub fn weighted_sum(&mut self, weights: NodeId, items: Vec<NodeId>) -> NodeId {
        debug_assert_eq!(self.nodes[weights.0].value.len(), items.len());
        let dim = self.nodes[items[0].0].value.len();
        let mut v = vec![0.0; dim];
        for (i, item) in items.iter().enumerate() {
            let w = self.nodes[weights.0].value[i];
            for (o, &x) in v.iter_mut().zip(&self.nodes[item.0].value) {
                *o += w * x;
            }
        }
        self.push(Op::WeightedSum { weights, items }, v)
    }

    /// Affine layer: `W x + b` with `b` at `b_offset`.
    pub fn linear(
        &mut self,
        w_offset: usize,
        b_offset: usize,
        rows: usize,
        cols: usize,
        x: NodeId,
    ) -> NodeId {
        let wx = self.matvec(w_offset, rows, cols, x);
        let b = self.param(b_offset, rows);
        self.add(wx, b)
    }

    /// Accumulates d(root)/d(param) into `param_grads` (same length as the
    /// parameter slice). `root` must be scalar.
    pub fn backward(&self, root: NodeId, param_grads: &mut [f64]) {
        assert_eq!(self.nodes[root.0].value.len(), 1, "root must be scalar");
        let mut adj: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|n| vec![0.0; n.value.len()])
            .collect();
        adj[root.0][0] = 1.0;

        for i in (0..self.nodes.len()).rev() {
            if adj[i].iter().all(|&g| g == 0.0) {
                continue;
            }
            let g = adj[i].clone();
            match &self.nodes[i].op {
                Op::Constant => {}
                Op::Param { offset } => {
                    for (j, gi) in g.iter().enumerate() {
                        param_grads[offset + j] += gi;
                    }
                }
                Op::MatVec {
                    offset,
                    rows,
                    cols,
                    x,
                } => {
                    let xv = self.nodes[x.0].value.clone();
                    let w = &self.params[*offset..offset + rows * cols];
                    for r in 0..*rows {
                        let gr = g[r];
                        if gr == 0.0 {
                            continue;
                        }
                        for c in 0..*cols {
                            param_grads[offset + r * cols + c] += gr * xv[c];
                            adj[x.0][c] += gr * w[r * cols + c];
                        }
                    }
                }
                Op::Add(a, b) => {
                    for (j, gi) in g.iter().enumerate() {
                        adj[a.0][j] += gi;
                        adj[b.0][j] += gi;
                    }
                }
                Op::Sub(a, b) => {
                    for (j, gi) in g.iter().enumerate() {
                        adj[a.0][j] += gi;
                        adj[b.0][j] -= gi;
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.nodes[a.0].value.clone(), self.nodes[b.0].value.clone());
                    for (j, gi) in g.iter().enumerate() {
                        adj[a.0][j] += gi * bv[j];
                        adj[b.0][j] += gi * av[j];
                    }
                }
                Op::Div(a, b) => {
                    let (av, bv) = (self.nodes[a.0].value.clone(), self.nodes[b.0].value.clone());
                    for (j, gi) in g.iter().enumerate() {
                        adj[a.0][j] += gi / bv[j];
                        adj[b.0][j] -= gi * av[j] / (bv[j] * bv[j]);
                    }
                }
                Op::Scale(a, c) => {
                    for (j, gi) in g.iter().enumerate() {
                        adj[a.0][j] += gi * c;
                    }
                }
                Op::AddScalar(a) => {
                    for (j, gi) in g.iter().enumerate() {
                        adj[a.0][j] += gi;
                    }
                }
                Op::Tanh(a) => {
                    let yv = self.nodes[i].value.clone();
                    for (j, gi) in g.iter().enumerate() {
                        adj[a.0][j] += gi * (1.0 - yv[j] * yv[j]);
                    }
                }
                Op::Sigmoid(a) => {
                    let yv = self.nodes[i].value.clone();
                    for (j, gi) in g.iter().enumerate() {
                        adj[a.0][j] += gi * yv[j] * (1.0 - yv[j]);
                    }
                }
                Op::Softplus(a) => {
                    let xv = self.nodes[a.0].value.clone();
                    for (j, gi) in g.iter().enumerate() {
                        adj[a.0][j] += gi * sigmoid(xv[j]);
                    }
                }
                Op::Ln(a) => {
                    let xv = self.nodes[a.0].value.clone();
                    for (j, gi) in g.iter().enumerate() {
                        adj[a.0][j] += gi / xv[j];
                    }
                }
                Op::Concat(parts) => {
                    let mut pos = 0;
                    for p in parts.clone() {
                        let len = self.nodes[p.0].value.len();
                        for j in 0..len {
                            adj[p.0][j] += g[pos + j];
                        }
                        pos += len;
                    }
                }
                Op::Slice { a, start, len } => {
                    for j in 0..*len {
                        adj[a.0][start + j] += g[j];
                    }
                }
                Op::Softmax(a) => {
                    let yv = self.nodes[i].value.clone();
                    let gy: f64 = g.iter().zip(&yv).map(|(gi, yi)| gi * yi).sum();
                    for (j, yj) in yv.iter().enumerate() {
                        adj[a.0][j] += yj * (g[j] - gy);
                    }
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (self.nodes[a.0].value.clone(), self.nodes[b.0].value.clone());
                    for j in 0..av.len() {
                        adj[a.0][j] += g[0] * bv[j];
                        adj[b.0][j] += g[0] * av[j];
                    }
                }
                Op::Sum(a) => {
                    for j in 0..self.nodes[a.0].value.len() {
                        adj[a.0][j] += g[0];
                    }
                }
                Op::WeightedSum { weights, items } => {
                    let wv = self.nodes[weights.0].value.clone();
                    for (k, item) in items.clone().into_iter().enumerate() {
                        let iv = self.nodes[item.0].value.clone();
                        for (j, gi) in g.iter().enumerate() {
                            adj[item.0][j] += gi * wv[k];
                            adj[weights.0][k] += gi * iv[j];
                        }
                    }
                }
            }
        }
    }
}
