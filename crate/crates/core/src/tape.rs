//! Scalar reverse-mode differentiation tape used by the loss evaluators.
//!
//! Every non-smooth operation records how far its argument sits from the
//! kink (`|x|` for `abs`/`relu`, `|a − b|` for `max`/`min`, the result for
//! `sqrt`). [`Tape::kink_distance`] returns the minimum over the whole
//! expression, which lets finite-difference checks skip points where the
//! function is not differentiable.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug)]
enum Op {
    Leaf(usize),
    Const,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Abs(usize),
    Relu(usize),
    Sqrt(usize),
    Max(usize, usize),
    Min(usize, usize),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    kink: f64,
    adj: Vec<f64>,
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            kink: f64::INFINITY,
            adj: Vec::new(),
        }
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
        self.kink = f64::INFINITY;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn kink_distance(&self) -> f64 {
        self.kink
    }

    fn push(&mut self, op: Op, value: f64) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    fn note(&mut self, d: f64) {
        if d < self.kink {
            self.kink = d;
        }
    }

    pub fn value(&self, v: Var) -> f64 {
        self.nodes[v.0].value
    }

    /// Leaf bound to parameter `index` with current value `value`.
    pub fn leaf(&mut self, index: usize, value: f64) -> Var {
        self.push(Op::Leaf(index), value)
    }

    pub fn constant(&mut self, value: f64) -> Var {
        self.push(Op::Const, value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(Op::Add(a.0, b.0), v)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(Op::Sub(a.0, b.0), v)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(Op::Mul(a.0, b.0), v)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) * k;
        self.push(Op::Scale(a.0, k), v)
    }

    pub fn add_const(&mut self, a: Var, k: f64) -> Var {
        let c = self.constant(k);
        self.add(a, c)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.note(x.abs());
        self.push(Op::Abs(a.0), x.abs())
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.note(x.abs());
        self.push(Op::Relu(a.0), x.max(0.0))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let x = self.value(a).max(0.0).sqrt();
        self.note(x);
        self.push(Op::Sqrt(a.0), x)
    }

    pub fn max(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.note((x - y).abs());
        self.push(Op::Max(a.0, b.0), x.max(y))
    }

    pub fn min(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.note((x - y).abs());
        self.push(Op::Min(a.0, b.0), x.min(y))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.mul(a, a)
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        match xs.split_first() {
            None => self.constant(0.0),
            Some((&first, rest)) => rest.iter().fold(first, |acc, &x| self.add(acc, x)),
        }
    }

    /// Euclidean norm of a vector of variables.
    pub fn norm(&mut self, xs: &[Var]) -> Var {
        let sq: Vec<Var> = xs.iter().map(|&x| self.square(x)).collect();
        let s = self.sum(&sq);
        self.sqrt(s)
    }

    /// Accumulates `weight · ∂out/∂leaf` into `grad[leaf index]`.
    pub fn backward(&mut self, out: Var, weight: f64, grad: &mut [f64]) {
        self.backward_with(out, weight, |i, g| grad[i] += g);
    }

    /// Like [`Tape::backward`] but hands each leaf contribution to `sink`.
    pub fn backward_with(&mut self, out: Var, weight: f64, mut sink: impl FnMut(usize, f64)) {
        self.adj.clear();
        self.adj.resize(out.0 + 1, 0.0);
        self.adj[out.0] = weight;
        for i in (0..=out.0).rev() {
            let g = self.adj[i];
            if g == 0.0 {
                continue;
            }
            let nodes = &self.nodes;
            let adj = &mut self.adj;
            match nodes[i].op {
                Op::Leaf(p) => sink(p, g),
                Op::Const => {}
                Op::Add(a, b) => {
                    adj[a] += g;
                    adj[b] += g;
                }
                Op::Sub(a, b) => {
                    adj[a] += g;
                    adj[b] -= g;
                }
                Op::Mul(a, b) => {
                    let (x, y) = (nodes[a].value, nodes[b].value);
                    adj[a] += g * y;
                    adj[b] += g * x;
                }
                Op::Scale(a, k) => adj[a] += g * k,
                Op::Abs(a) => {
                    let x = nodes[a].value;
                    adj[a] += g * if x > 0.0 {
                        1.0
                    } else if x < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                }
                Op::Relu(a) => {
                    if nodes[a].value > 0.0 {
                        adj[a] += g;
                    }
                }
                Op::Sqrt(a) => {
                    let y = nodes[i].value;
                    if y > 0.0 {
                        adj[a] += g * 0.5 / y;
                    }
                }
                Op::Max(a, b) => {
                    if nodes[a].value >= nodes[b].value {
                        adj[a] += g;
                    } else {
                        adj[b] += g;
                    }
                }
                Op::Min(a, b) => {
                    if nodes[a].value <= nodes[b].value {
                        adj[a] += g;
                    } else {
                        adj[b] += g;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(0, 3.0);
        let y = t.leaf(1, 4.0);
        let n = t.norm(&[x, y]);
        assert_eq!(t.value(n), 5.0);
        let mut g = [0.0; 2];
        t.backward(n, 1.0, &mut g);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        assert_eq!(t.kink_distance(), 5.0);
    }

    #[test]
    fn repeated_leaf_accumulates() {
        let mut t = Tape::new();
        let a = t.leaf(0, 2.0);
        let b = t.leaf(0, 2.0);
        let p = t.mul(a, b);
        let r = t.relu(p);
        let mut g = [0.0];
        t.backward(r, 2.0, &mut g);
        assert_eq!(g[0], 8.0);
    }

    #[test]
    fn kinks_tracked() {
        let mut t = Tape::new();
        let a = t.leaf(0, 0.25);
        let b = t.leaf(1, 0.5);
        let m = t.max(a, b);
        let s = t.sub(m, b);
        let _ = t.abs(s);
        assert_eq!(t.kink_distance(), 0.0);
    }
}
