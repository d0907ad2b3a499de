//! Reverse-mode automatic differentiation over a per-iteration tape of
//! scalar operations: arithmetic, log-sum-exp / hard max, softmax,
//! positive part, and piecewise-bilinear LUT evaluation.

use crate::error::{Error, Result};
use crate::lut::Lut2D;

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(u32);

impl Var {
    fn idx(self) -> usize {
        self.0 as usize
    }
}

/// How multi-input reductions gather their inputs: smooth log-sum-exp
/// with temperature gamma, or the exact maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxMode {
    Lse(f64),
    Hard,
}

enum Op {
    Const,
    Param { tensor: u32, index: u32 },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Square(Var),
    Exp(Var),
    Relu(Var),
    Sum(Box<[Var]>),
    Lse { gamma: f64, xs: Box<[Var]> },
    Max(Box<[Var]>),
    Lut { slew: Var, load: Var, d_slew: f64, d_load: f64, patch: (u32, u32), out_of_grid: bool },
}

pub struct Tape {
    values: Vec<f64>,
    grads: Vec<f64>,
    ops: Vec<Op>,
    backward_done: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            values: Vec::new(),
            grads: Vec::new(),
            ops: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn value(&self, v: Var) -> f64 {
        self.values[v.idx()]
    }

    pub fn grad(&self, v: Var) -> f64 {
        self.grads[v.idx()]
    }

    fn push(&mut self, value: f64, op: Op) -> Var {
        let id = self.values.len() as u32;
        self.values.push(value);
        self.grads.push(0.0);
        self.ops.push(op);
        Var(id)
    }

    pub fn constant(&mut self, v: f64) -> Var {
        self.push(v, Op::Const)
    }

    /// Leaf bound to element `index` of parameter tensor `tensor`.
    pub fn param(&mut self, tensor: usize, index: usize, value: f64) -> Var {
        self.push(value, Op::Param { tensor: tensor as u32, index: index as u32 })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.push(self.values[a.idx()] + self.values[b.idx()], Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.push(self.values[a.idx()] - self.values[b.idx()], Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.push(self.values[a.idx()] * self.values[b.idx()], Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.push(self.values[a.idx()] * c, Op::Scale(a, c))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.values[a.idx()];
        self.push(v * v, Op::Square(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.push(self.values[a.idx()].exp(), Op::Exp(a))
    }

    /// Positive part max(0, x); subgradient 0 at x = 0.
    pub fn relu(&mut self, a: Var) -> Var {
        self.push(self.values[a.idx()].max(0.0), Op::Relu(a))
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        let v = xs.iter().map(|x| self.values[x.idx()]).sum();
        self.push(v, Op::Sum(xs.into()))
    }

    /// gamma * ln(sum exp(x_i / gamma)), max-shifted for stability.
    /// Upper-bounds the maximum by at most gamma * ln(n).
    pub fn lse(&mut self, xs: &[Var], gamma: f64) -> Result<Var> {
        if xs.is_empty() {
            return Err(Error::Argument("lse over an empty set".into()));
        }
        if gamma <= 0.0 {
            return Err(Error::Argument("lse temperature must be positive".into()));
        }
        let m = xs.iter().map(|x| self.values[x.idx()]).fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = xs.iter().map(|x| ((self.values[x.idx()] - m) / gamma).exp()).sum();
        let v = m + gamma * s.ln();
        Ok(self.push(v, Op::Lse { gamma, xs: xs.into() }))
    }

    /// Exact maximum; the (first) argmax receives the gradient.
    pub fn max(&mut self, xs: &[Var]) -> Result<Var> {
        if xs.is_empty() {
            return Err(Error::Argument("max over an empty set".into()));
        }
        let v = xs.iter().map(|x| self.values[x.idx()]).fold(f64::NEG_INFINITY, f64::max);
        Ok(self.push(v, Op::Max(xs.into())))
    }

    /// LSE or exact max depending on mode.
    pub fn reduce_max(&mut self, xs: &[Var], mode: MaxMode) -> Result<Var> {
        match mode {
            MaxMode::Lse(gamma) => self.lse(xs, gamma),
            MaxMode::Hard => self.max(xs),
        }
    }

    /// Bilinear table lookup; gradients are the active patch's partial
    /// derivatives (right-closed patch at breakpoints).
    pub fn lut(&mut self, table: &Lut2D, slew: Var, load: Var) -> Var {
        let s = table.sample(self.values[slew.idx()], self.values[load.idx()]);
        self.push(
            s.value,
            Op::Lut {
                slew,
                load,
                d_slew: s.d_slew,
                d_load: s.d_load,
                patch: (s.patch.0 as u32, s.patch.1 as u32),
                out_of_grid: s.out_of_grid,
            },
        )
    }

    /// Numerically stable softmax: p_i = exp(x_i - lse_1(x)). Outputs
    /// are positive and sum to 1 within a few ulps.
    pub fn softmax(&mut self, xs: &[Var]) -> Result<Vec<Var>> {
        let l = self.lse(xs, 1.0)?;
        xs.iter().map(|&x| {
            let d = self.sub(x, l);
            Ok(self.exp(d))
        }).collect()
    }

    /// Accumulate d(root)/d(node) into every node's gradient slot.
    /// Errors if called twice on the same tape.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::State("backward already ran on this tape".into()));
        }
        self.backward_done = true;
        let Tape { values, grads, ops, .. } = self;
        grads[root.idx()] = 1.0;
        for i in (0..=root.idx()).rev() {
            let g = grads[i];
            if g == 0.0 {
                continue;
            }
            match &ops[i] {
                Op::Const | Op::Param { .. } => {}
                Op::Add(a, b) => {
                    grads[a.idx()] += g;
                    grads[b.idx()] += g;
                }
                Op::Sub(a, b) => {
                    grads[a.idx()] += g;
                    grads[b.idx()] -= g;
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (values[a.idx()], values[b.idx()]);
                    grads[a.idx()] += g * vb;
                    grads[b.idx()] += g * va;
                }
                Op::Scale(a, c) => grads[a.idx()] += g * c,
                Op::Square(a) => grads[a.idx()] += g * 2.0 * values[a.idx()],
                Op::Exp(a) => grads[a.idx()] += g * values[i],
                Op::Relu(a) => {
                    if values[a.idx()] > 0.0 {
                        grads[a.idx()] += g;
                    }
                }
                Op::Sum(xs) => {
                    for x in xs.iter() {
                        grads[x.idx()] += g;
                    }
                }
                Op::Lse { gamma, xs } => {
                    let m = xs.iter().map(|x| values[x.idx()]).fold(f64::NEG_INFINITY, f64::max);
                    let s: f64 =
                        xs.iter().map(|x| ((values[x.idx()] - m) / gamma).exp()).sum();
                    for x in xs.iter() {
                        let w = ((values[x.idx()] - m) / gamma).exp() / s;
                        grads[x.idx()] += g * w;
                    }
                }
                Op::Max(xs) => {
                    let mut best = xs[0];
                    for &x in xs.iter() {
                        if values[x.idx()] > values[best.idx()] {
                            best = x;
                        }
                    }
                    grads[best.idx()] += g;
                }
                Op::Lut { slew, load, d_slew, d_load, .. } => {
                    grads[slew.idx()] += g * d_slew;
                    grads[load.idx()] += g * d_load;
                }
            }
        }
        Ok(())
    }

    /// (tensor, index, gradient) of every parameter leaf, in creation
    /// order.
    pub fn param_grads(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.ops.iter().enumerate().filter_map(|(i, op)| match op {
            Op::Param { tensor, index } => {
                Some((*tensor as usize, *index as usize, self.grads[i]))
            }
            _ => None,
        })
    }

    /// Patch indices chosen by every LUT node, in creation order. Two
    /// evaluations of the same graph at nearby points used the same
    /// bilinear pieces iff these traces are equal.
    pub fn lut_patches(&self) -> Vec<(u32, u32)> {
        self.ops
            .iter()
            .filter_map(|op| match op {
                Op::Lut { patch, .. } => Some(*patch),
                _ => None,
            })
            .collect()
    }

    /// Number of LUT queries that fell outside their table's grid.
    pub fn out_of_grid_count(&self) -> usize {
        self.ops
            .iter()
            .filter(|op| matches!(op, Op::Lut { out_of_grid: true, .. }))
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lut::Lut2D;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let x = t.param(0, 0, 3.0);
        let y = t.square(x);
        t.backward(y).unwrap();
        assert_eq!(t.value(y), 9.0);
        assert_eq!(t.grad(x), 6.0);
    }

    #[test]
    fn backward_twice_is_a_state_error() {
        let mut t = Tape::new();
        let x = t.param(0, 0, 1.0);
        let y = t.square(x);
        t.backward(y).unwrap();
        assert!(matches!(t.backward(y), Err(Error::State(_))));
    }

    #[test]
    fn lse_examples() {
        let mut t = Tape::new();
        // single element: lse([x]) = x for any gamma
        let x = t.constant(0.37);
        let l = t.lse(&[x], 0.01).unwrap();
        assert!((t.value(l) - 0.37).abs() < 1e-15);
        // symmetric pair: 0.01 * ln 2
        let a = t.constant(0.0);
        let b = t.constant(0.0);
        let l = t.lse(&[a, b], 0.01).unwrap();
        assert!((t.value(l) - 0.01 * 2f64.ln()).abs() < 1e-15);
        // bound check
        let xs: Vec<Var> = [1.0, 0.2, -0.3].iter().map(|&v| t.constant(v)).collect();
        let l = t.lse(&xs, 0.01).unwrap();
        assert!(t.value(l) >= 1.0);
        assert!(t.value(l) <= 1.0 + 0.01 * 3f64.ln());
        // empty set rejected
        assert!(t.lse(&[], 0.01).is_err());
    }

    #[test]
    fn lse_bounds_on_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let n = rng.gen_range(1..9);
            let gamma = [0.001, 0.01, 0.1][rng.gen_range(0..3)];
            let mut t = Tape::new();
            let vals: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let xs: Vec<Var> = vals.iter().map(|&v| t.constant(v)).collect();
            let l = t.lse(&xs, gamma).unwrap();
            let mx = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(t.value(l) >= mx - 1e-12);
            assert!(t.value(l) <= mx + gamma * (n as f64).ln() + 1e-12);
        }
    }

    #[test]
    fn lse_gradients_sum_to_one() {
        let mut t = Tape::new();
        let x = t.param(0, 0, 0.4);
        let y = t.param(0, 1, -0.1);
        let l = t.lse(&[x, y], 0.05).unwrap();
        t.backward(l).unwrap();
        assert!((t.grad(x) + t.grad(y) - 1.0).abs() < 1e-12);
        assert!(t.grad(x) > t.grad(y));
    }

    #[test]
    fn softmax_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let n = rng.gen_range(1..7);
            let vals: Vec<f64> = (0..n).map(|_| rng.gen_range(-30.0..30.0)).collect();
            let shift = rng.gen_range(-5.0..5.0);
            let mut t = Tape::new();
            let xs: Vec<Var> = vals.iter().map(|&v| t.constant(v)).collect();
            let p = t.softmax(&xs).unwrap();
            let total: f64 = p.iter().map(|&v| t.value(v)).sum();
            assert!((total - 1.0).abs() < 1e-12, "sum {total}");
            assert!(p.iter().all(|&v| t.value(v) > 0.0));
            // invariance to constant shifts
            let xs2: Vec<Var> = vals.iter().map(|&v| t.constant(v + shift)).collect();
            let p2 = t.softmax(&xs2).unwrap();
            for (a, b) in p.iter().zip(&p2) {
                assert!((t.value(*a) - t.value(*b)).abs() < 1e-12);
            }
        }
        // uniform row
        let mut t = Tape::new();
        let xs: Vec<Var> = (0..4).map(|_| t.constant(0.0)).collect();
        let p = t.softmax(&xs).unwrap();
        for &v in &p {
            assert!((t.value(v) - 0.25).abs() < 1e-15);
        }
        // saturation
        let a = t.constant(200.0);
        let b = t.constant(0.0);
        let p = t.softmax(&[a, b]).unwrap();
        assert!((t.value(p[0]) - 1.0).abs() < 1e-12);
        assert!(t.value(p[1]) < 1e-12);
    }

    #[test]
    fn lut_gradients_match_finite_differences() {
        let table = Lut2D::new(
            vec![0.01, 0.05, 0.2],
            vec![1.0, 4.0, 9.0],
            vec![
                vec![0.02, 0.05, 0.11],
                vec![0.04, 0.09, 0.16],
                vec![0.09, 0.15, 0.27],
            ],
        )
        .unwrap();
        let eval = |s: f64, l: f64| table.eval(s, l);
        for (s, l) in [(0.03, 2.5), (0.12, 6.0), (0.04, 7.0)] {
            let mut t = Tape::new();
            let sv = t.param(0, 0, s);
            let lv = t.param(0, 1, l);
            let out = t.lut(&table, sv, lv);
            t.backward(out).unwrap();
            let h = 1e-6;
            let fd_s = (eval(s + h, l) - eval(s - h, l)) / (2.0 * h);
            let fd_l = (eval(s, l + h) - eval(s, l - h)) / (2.0 * h);
            assert!((t.grad(sv) - fd_s).abs() < 1e-6 * fd_s.abs().max(1.0));
            assert!((t.grad(lv) - fd_l).abs() < 1e-6 * fd_l.abs().max(1.0));
        }
        // constant table: zero gradient everywhere
        let c = Lut2D::constant(0.5);
        let mut t = Tape::new();
        let sv = t.param(0, 0, 0.3);
        let lv = t.param(0, 1, 0.7);
        let out = t.lut(&c, sv, lv);
        t.backward(out).unwrap();
        assert_eq!(t.grad(sv), 0.0);
        assert_eq!(t.grad(lv), 0.0);
        // value agrees with plain eval at a grid node
        let mut t = Tape::new();
        let sv = t.constant(0.05);
        let lv = t.constant(4.0);
        let out = t.lut(&table, sv, lv);
        assert_eq!(t.value(out), 0.09);
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let mut t = Tape::new();
        let x = t.param(0, 0, 0.0);
        let y = t.relu(x);
        t.backward(y).unwrap();
        assert_eq!(t.grad(x), 0.0);
        let mut t = Tape::new();
        let x = t.param(0, 0, -0.5);
        let y = t.relu(x);
        assert_eq!(t.value(y), 0.0);
        t.backward(y).unwrap();
        assert_eq!(t.grad(x), 0.0);
    }

    #[test]
    fn composite_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let f = |xs: &[f64]| -> f64 {
            // lse(x0^2, x0*x1, relu(x1)) + (x0 - x1)^2
            let mut t = Tape::new();
            let a = t.constant(xs[0]);
            let b = t.constant(xs[1]);
            let s = t.square(a);
            let m = t.mul(a, b);
            let r = t.relu(b);
            let l = t.lse(&[s, m, r], 0.05).unwrap();
            let d = t.sub(a, b);
            let d2 = t.square(d);
            let out = t.add(l, d2);
            t.value(out)
        };
        for _ in 0..20 {
            let x0 = rng.gen_range(-1.0..1.0);
            let x1: f64 = rng.gen_range(-1.0..1.0);
            if x1.abs() < 1e-3 {
                continue; // relu kink
            }
            let mut t = Tape::new();
            let a = t.param(0, 0, x0);
            let b = t.param(0, 1, x1);
            let s = t.square(a);
            let m = t.mul(a, b);
            let r = t.relu(b);
            let l = t.lse(&[s, m, r], 0.05).unwrap();
            let d = t.sub(a, b);
            let d2 = t.square(d);
            let out = t.add(l, d2);
            t.backward(out).unwrap();
            let h = 1e-6;
            let fd0 = (f(&[x0 + h, x1]) - f(&[x0 - h, x1])) / (2.0 * h);
            let fd1 = (f(&[x0, x1 + h]) - f(&[x0, x1 - h])) / (2.0 * h);
            assert!((t.grad(a) - fd0).abs() < 1e-5 * fd0.abs().max(1.0), "{} {}", t.grad(a), fd0);
            assert!((t.grad(b) - fd1).abs() < 1e-5 * fd1.abs().max(1.0));
        }
    }

    #[test]
    fn hard_max_routes_gradient_to_first_argmax() {
        let mut t = Tape::new();
        let a = t.param(0, 0, 1.0);
        let b = t.param(0, 1, 1.0);
        let c = t.param(0, 2, 0.5);
        let m = t.max(&[a, b, c]).unwrap();
        t.backward(m).unwrap();
        assert_eq!(t.grad(a), 1.0);
        assert_eq!(t.grad(b), 0.0);
        assert_eq!(t.grad(c), 0.0);
    }
}
