use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::{AutodiffError, Real};

const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug)]
struct Node {
    parents: [usize; 2],
    partials: [f64; 2],
}

/// Reverse-mode record over a flat parameter vector.
///
/// The first `n_params` nodes are the parameter leaves. Every operation on
/// [`Var`]s appends one node holding its local partials; replaying the
/// record backwards yields the gradient with respect to the leaves.
/// Variables borrow the tape, so it cannot be cleared while any of them is
/// alive.
#[derive(Debug)]
pub struct ParamTape {
    nodes: RefCell<Vec<Node>>,
    values: Vec<f64>,
}

impl ParamTape {
    pub fn new(params: &[f64]) -> Self {
        let leaf = Node { parents: [NONE, NONE], partials: [0.0, 0.0] };
        ParamTape { nodes: RefCell::new(vec![leaf; params.len()]), values: params.to_vec() }
    }

    pub fn n_params(&self) -> usize {
        self.values.len()
    }

    /// Number of recorded nodes, leaves included.
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Leaf variables, one per parameter.
    pub fn params(&self) -> Vec<Var<'_>> {
        self.values
            .iter()
            .enumerate()
            .map(|(index, &value)| Var { tape: Some(self), index, value })
            .collect()
    }

    /// Drops every recorded operation, keeping the parameter leaves.
    pub fn clear(&mut self) {
        let n = self.values.len();
        self.nodes.get_mut().truncate(n);
    }

    fn push(&self, parents: [usize; 2], partials: [f64; 2]) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { parents, partials });
        nodes.len() - 1
    }

    /// Gradient of `root` with respect to every parameter.
    pub fn gradient(&self, root: Var<'_>) -> Vec<f64> {
        let n = self.values.len();
        let Some(tape) = root.tape else {
            return vec![0.0; n];
        };
        assert!(std::ptr::eq(tape, self), "variable recorded on a different tape");
        let nodes = self.nodes.borrow();
        let mut adjoint = vec![0.0; root.index + 1];
        adjoint[root.index] = 1.0;
        for i in (n..=root.index).rev() {
            let a = adjoint[i];
            if a == 0.0 {
                continue;
            }
            let node = nodes[i];
            for k in 0..2 {
                if node.parents[k] != NONE {
                    adjoint[node.parents[k]] += a * node.partials[k];
                }
            }
        }
        adjoint.truncate(n);
        adjoint.resize(n, 0.0);
        adjoint
    }
}

/// Gradient of a scalar loss recorded on `tape`.
///
/// `outputs` is whatever the recorded computation returned; anything other
/// than exactly one value is rejected.
pub fn grad_params(tape: &ParamTape, outputs: &[Var<'_>]) -> Result<Vec<f64>, AutodiffError> {
    match outputs {
        [root] => Ok(tape.gradient(*root)),
        _ => Err(AutodiffError::NonScalarRoot { len: outputs.len() }),
    }
}

/// Scalar variable recorded on a [`ParamTape`], or a free constant.
#[derive(Clone, Copy, Debug)]
pub struct Var<'t> {
    tape: Option<&'t ParamTape>,
    index: usize,
    value: f64,
}

impl<'t> Var<'t> {
    pub fn constant(value: f64) -> Self {
        Var { tape: None, index: NONE, value }
    }

    pub fn is_constant(&self) -> bool {
        self.tape.is_none()
    }

    fn unary(self, value: f64, partial: f64) -> Self {
        match self.tape {
            None => Var::constant(value),
            Some(t) => Var { tape: Some(t), index: t.push([self.index, NONE], [partial, 0.0]), value },
        }
    }

    fn binary(self, o: Self, value: f64, da: f64, db: f64) -> Self {
        match (self.tape, o.tape) {
            (None, None) => Var::constant(value),
            (Some(_), None) => self.unary(value, da),
            (None, Some(_)) => o.unary(value, db),
            (Some(t), Some(u)) => {
                assert!(std::ptr::eq(t, u), "mixing variables from different tapes");
                Var { tape: Some(t), index: t.push([self.index, o.index], [da, db]), value }
            }
        }
    }
}

impl Add for Var<'_> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.binary(o, self.value + o.value, 1.0, 1.0)
    }
}

impl Sub for Var<'_> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.binary(o, self.value - o.value, 1.0, -1.0)
    }
}

impl Mul for Var<'_> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.binary(o, self.value * o.value, o.value, self.value)
    }
}

impl Div for Var<'_> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let r = 1.0 / o.value;
        self.binary(o, self.value * r, r, -self.value * r * r)
    }
}

impl Neg for Var<'_> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(-self.value, -1.0)
    }
}

impl Add<f64> for Var<'_> {
    type Output = Self;
    fn add(self, c: f64) -> Self {
        self.unary(self.value + c, 1.0)
    }
}

impl Sub<f64> for Var<'_> {
    type Output = Self;
    fn sub(self, c: f64) -> Self {
        self.unary(self.value - c, 1.0)
    }
}

impl Mul<f64> for Var<'_> {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        self.unary(self.value * c, c)
    }
}

impl Real for Var<'_> {
    fn cst(c: f64) -> Self {
        Var::constant(c)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.unary(t, 1.0 - t * t)
    }
    fn sin(self) -> Self {
        self.unary(self.value.sin(), self.value.cos())
    }
    fn cos(self) -> Self {
        self.unary(self.value.cos(), -self.value.sin())
    }
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.unary(e, e)
    }
    fn ln(self) -> Self {
        self.unary(self.value.ln(), 1.0 / self.value)
    }
    fn powi(self, n: i32) -> Self {
        let v = self.value;
        self.unary(v.powi(n), f64::from(n) * v.powi(n - 1))
    }
    fn recip(self) -> Self {
        let r = 1.0 / self.value;
        self.unary(r, -r * r)
    }
    fn softplus(self) -> Self {
        self.unary(super::real::softplus_f64(self.value), super::real::sigmoid_f64(self.value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_in_one_parameter() {
        let tape = ParamTape::new(&[1.0, 2.0, -3.0]);
        let p = tape.params();
        let loss = p[1] * p[1];
        assert_eq!(grad_params(&tape, &[loss]).unwrap(), vec![0.0, 4.0, 0.0]);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let tape = ParamTape::new(&[1.0, 2.0]);
        let loss = Var::constant(3.0) * 2.0;
        assert_eq!(grad_params(&tape, &[loss]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let tape = ParamTape::new(&[1.0, 2.0]);
        let p = tape.params();
        assert!(matches!(grad_params(&tape, &p), Err(AutodiffError::NonScalarRoot { len: 2 })));
        assert!(grad_params(&tape, &[]).is_err());
    }

    #[test]
    fn clear_keeps_leaves() {
        let mut tape = ParamTape::new(&[0.5]);
        {
            let p = tape.params();
            let _ = (p[0] * p[0]).tanh();
        }
        assert!(tape.len() > 1);
        tape.clear();
        assert_eq!(tape.len(), 1);
        let p = tape.params();
        let g = tape.gradient(p[0].exp());
        assert!((g[0] - 0.5f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn reused_variable_accumulates() {
        let tape = ParamTape::new(&[0.7, -1.2]);
        let p = tape.params();
        // f = a·b + sin(a) / b
        let f = p[0] * p[1] + p[0].sin() / p[1];
        let g = tape.gradient(f);
        let (a, b) = (0.7f64, -1.2f64);
        assert!((g[0] - (b + a.cos() / b)).abs() < 1e-14);
        assert!((g[1] - (a - a.sin() / (b * b))).abs() < 1e-14);
    }
}
