//! Wengert list over scalar nodes.
//!
//! Every node records its value together with the local partial derivative
//! with respect to each parent. Nodes are appended in evaluation order, so the
//! list is topologically sorted by construction and a single reverse sweep
//! accumulates adjoints.

use crate::error::{Error, Result};
use crate::real::Real;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: T,
    edge_start: usize,
    edge_end: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Tape<T: Real = f64> {
    nodes: Vec<Node<T>>,
    edges: Vec<(usize, T)>,
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: T, edges: &[(Var, T)]) -> Var {
        let edge_start = self.edges.len();
        self.edges.extend(edges.iter().map(|(v, d)| (v.0, *d)));
        self.nodes.push(Node {
            value,
            edge_start,
            edge_end: self.edges.len(),
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf node (input or constant).
    pub fn var(&mut self, value: T) -> Var {
        self.push(value, &[])
    }

    pub fn value(&self, v: Var) -> T {
        self.nodes[v.0].value
    }

    /// Parent indices of a node, in insertion order.
    pub fn parents(&self, v: Var) -> impl Iterator<Item = usize> + '_ {
        let n = &self.nodes[v.0];
        self.edges[n.edge_start..n.edge_end].iter().map(|e| e.0)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, &[(a, T::one()), (b, T::one())])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, &[(a, T::one()), (b, -T::one())])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.push(x * y, &[(a, y), (b, x)])
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.push(-x, &[(a, -T::one())])
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let x = self.value(a);
        self.push(c * x, &[(a, c)])
    }

    pub fn add_const(&mut self, a: Var, c: T) -> Var {
        let x = self.value(a);
        self.push(x + c, &[(a, T::one())])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let y = self.value(a).exp();
        self.push(y, &[(a, y)])
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.push(x.ln(), &[(a, x.recip())])
    }

    pub fn sin(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.push(x.sin(), &[(a, x.cos())])
    }

    pub fn cos(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.push(x.cos(), &[(a, -x.sin())])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let s = T::one() / (T::one() + (-x).exp());
        self.push(s, &[(a, s * (T::one() - s))])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let x = self.value(a);
        if x > T::zero() {
            self.push(x, &[(a, T::one())])
        } else {
            self.push(T::zero(), &[(a, T::zero())])
        }
    }

    /// Exponential of the input clamped to `[lo, hi]`; zero slope outside.
    pub fn clamped_exp(&mut self, a: Var, lo: T, hi: T) -> Var {
        let x = self.value(a);
        let y = x.max(lo).min(hi).exp();
        let d = if x < lo || x > hi { T::zero() } else { y };
        self.push(y, &[(a, d)])
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        let v = xs.iter().map(|&x| self.value(x)).sum();
        let edges: Vec<(Var, T)> = xs.iter().map(|&x| (x, T::one())).collect();
        self.push(v, &edges)
    }

    pub fn dot(&mut self, a: &[Var], b: &[Var]) -> Var {
        assert_eq!(a.len(), b.len(), "dot: length mismatch");
        let mut v = T::zero();
        let mut edges = Vec::with_capacity(2 * a.len());
        for (&x, &y) in a.iter().zip(b) {
            let (xv, yv) = (self.value(x), self.value(y));
            v += xv * yv;
            edges.push((x, yv));
            edges.push((y, xv));
        }
        self.push(v, &edges)
    }

    /// Fused matrix-vector product `W x + b` with `W` row-major `rows x cols`.
    ///
    /// Each output row is one node whose partials are the matching row of `W`
    /// (for `x`), the entries of `x` (for the weights) and one for the bias.
    pub fn affine(&mut self, weights: &[Var], x: &[Var], bias: &[Var]) -> Vec<Var> {
        let cols = x.len();
        let rows = bias.len();
        assert_eq!(weights.len(), rows * cols, "affine: weight shape mismatch");
        let xv: Vec<T> = x.iter().map(|&v| self.value(v)).collect();
        (0..rows)
            .map(|r| {
                let row = &weights[r * cols..(r + 1) * cols];
                let mut v = self.value(bias[r]);
                let mut edges = Vec::with_capacity(2 * cols + 1);
                for c in 0..cols {
                    let w = self.value(row[c]);
                    v += w * xv[c];
                    edges.push((x[c], w));
                    edges.push((row[c], xv[c]));
                }
                edges.push((bias[r], T::one()));
                self.push(v, &edges)
            })
            .collect()
    }

    /// Adjoints of `root` with respect to every node on the tape.
    ///
    /// Nodes that `root` does not depend on receive zero.
    pub fn backward(&self, root: Var) -> Result<Vec<T>> {
        if root.0 >= self.nodes.len() {
            return Err(Error::invalid(format!(
                "root index {} out of range for tape of {} nodes",
                root.0,
                self.nodes.len()
            )));
        }
        let mut grad = vec![T::zero(); self.nodes.len()];
        grad[root.0] = T::one();
        for i in (0..=root.0).rev() {
            let g = grad[i];
            if g == T::zero() {
                continue;
            }
            let node = &self.nodes[i];
            for &(p, d) in &self.edges[node.edge_start..node.edge_end] {
                grad[p] += g * d;
            }
        }
        Ok(grad)
    }
}
