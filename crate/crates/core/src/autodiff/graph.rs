use ndarray::{s, Array2, Axis};

use super::Scalar;
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<F> {
    Leaf,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    MulCol(Var, Var),
    Affine(Var, F),
    Tanh(Var),
    Exp(Var),
    Square(Var),
    Sqrt(Var),
    Clamp(Var, F, F),
    Minimum(Var, Var),
    SumAll(Var),
    MeanAll(Var),
    SumCols(Var),
    ConcatCols(Vec<Var>),
    Column(Var, usize),
    SoftmaxRows(Var),
}

#[derive(Debug, Clone)]
struct Node<F> {
    value: Array2<F>,
    op: Op<F>,
    tracked: bool,
}

/// Eagerly evaluated computation record.
#[derive(Debug, Clone, Default)]
pub struct Graph<F> {
    nodes: Vec<Node<F>>,
    params: Vec<(Var, usize)>,
    poisoned: Option<&'static str>,
}

/// Result of [`Graph::backward`].
#[derive(Debug, Clone)]
pub struct Gradients<F> {
    grads: Vec<Option<Array2<F>>>,
    params: Vec<(Var, usize)>,
}

impl<F: Scalar> Gradients<F> {
    /// Gradient of the loss with respect to `v`, if `v` is tracked and reached.
    pub fn get(&self, v: Var) -> Option<&Array2<F>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// `(parameter index, gradient)` for every bound parameter leaf. A
    /// parameter bound more than once appears once per binding.
    pub fn params(&self) -> impl Iterator<Item = (usize, Option<&Array2<F>>)> + '_ {
        self.params.iter().map(|&(v, p)| (p, self.get(v)))
    }
}

impl<F: Scalar> Graph<F> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: Vec::new(),
            poisoned: None,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<F> {
        &self.nodes[v.0].value
    }

    /// Scalar value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> F {
        self.nodes[v.0].value[[0, 0]]
    }

    /// `Err` naming the first operation that produced a non-finite value.
    pub fn check(&self) -> Result<()> {
        match self.poisoned {
            Some(op) => Err(Error::NonFinite { op }),
            None => Ok(()),
        }
    }

    fn push(&mut self, value: Array2<F>, op: Op<F>, tracked: bool, name: &'static str) -> Var {
        if self.poisoned.is_none() && !value.iter().all(|x| x.is_finite()) {
            self.poisoned = Some(name);
        }
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    /// Untracked input; receives no gradient.
    pub fn constant(&mut self, value: Array2<F>) -> Var {
        self.push(value, Op::Leaf, false, "constant")
    }

    /// Tracked leaf not tied to a parameter store slot.
    pub fn variable(&mut self, value: Array2<F>) -> Var {
        self.push(value, Op::Leaf, true, "variable")
    }

    /// Tracked leaf bound to parameter slot `index`.
    pub fn param(&mut self, value: Array2<F>, index: usize) -> Var {
        let v = self.push(value, Op::Leaf, true, "param");
        self.params.push((v, index));
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        let t = self.tracked(a) || self.tracked(b);
        self.push(value, Op::MatMul(a, b), t, "matmul")
    }

    /// `a · bᵀ`
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(&self.value(b).t());
        let t = self.tracked(a) || self.tracked(b);
        self.push(value, Op::MatMulT(a, b), t, "matmul_t")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        let t = self.tracked(a) || self.tracked(b);
        self.push(value, Op::Add(a, b), t, "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) - self.value(b);
        let t = self.tracked(a) || self.tracked(b);
        self.push(value, Op::Sub(a, b), t, "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) * self.value(b);
        let t = self.tracked(a) || self.tracked(b);
        self.push(value, Op::Mul(a, b), t, "mul")
    }

    /// `a + row`, with `row` of shape `1 × m` broadcast over the rows of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let value = self.value(a) + self.value(row);
        let t = self.tracked(a) || self.tracked(row);
        self.push(value, Op::AddRow(a, row), t, "add_row")
    }

    /// `a ⊙ row`, with `row` of shape `1 × m`.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        let value = self.value(a) * self.value(row);
        let t = self.tracked(a) || self.tracked(row);
        self.push(value, Op::MulRow(a, row), t, "mul_row")
    }

    /// `a ⊙ col`, with `col` of shape `n × 1`.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Var {
        let value = self.value(a) * self.value(col);
        let t = self.tracked(a) || self.tracked(col);
        self.push(value, Op::MulCol(a, col), t, "mul_col")
    }

    /// `scale · a + shift`
    pub fn affine(&mut self, a: Var, scale: F, shift: F) -> Var {
        let value = self.value(a).mapv(|x| x * scale + shift);
        let t = self.tracked(a);
        self.push(value, Op::Affine(a, scale), t, "affine")
    }

    pub fn scale(&mut self, a: Var, scale: F) -> Var {
        self.affine(a, scale, F::zero())
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.affine(a, -F::one(), F::zero())
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(Scalar::tanh_act);
        let t = self.tracked(a);
        self.push(value, Op::Tanh(a), t, "tanh")
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(F::exp);
        let t = self.tracked(a);
        self.push(value, Op::Exp(a), t, "exp")
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x * x);
        let t = self.tracked(a);
        self.push(value, Op::Square(a), t, "square")
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(F::sqrt);
        let t = self.tracked(a);
        self.push(value, Op::Sqrt(a), t, "sqrt")
    }

    /// Elementwise clamp; gradient passes only where `lo ≤ a ≤ hi`.
    pub fn clamp(&mut self, a: Var, lo: F, hi: F) -> Var {
        let value = self.value(a).mapv(|x| x.max(lo).min(hi));
        let t = self.tracked(a);
        self.push(value, Op::Clamp(a, lo, hi), t, "clamp")
    }

    /// Elementwise minimum; ties route the gradient to `a`.
    pub fn minimum(&mut self, a: Var, b: Var) -> Var {
        let mut value = self.value(a).clone();
        value.zip_mut_with(self.value(b), |x, &y| *x = x.min(y));
        let t = self.tracked(a) || self.tracked(b);
        self.push(value, Op::Minimum(a, b), t, "minimum")
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        let t = self.tracked(a);
        self.push(Array2::from_elem((1, 1), s), Op::SumAll(a), t, "sum")
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let m = v.sum() / <F as Scalar>::from_f64(v.len() as f64);
        let t = self.tracked(a);
        self.push(Array2::from_elem((1, 1), m), Op::MeanAll(a), t, "mean")
    }

    /// Per-row sum, `n × m → n × 1`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let value = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        let t = self.tracked(a);
        self.push(value, Op::SumCols(a), t, "sum_cols")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("concat_cols: row counts differ");
        let t = parts.iter().any(|&p| self.tracked(p));
        self.push(value, Op::ConcatCols(parts.to_vec()), t, "concat_cols")
    }

    /// Column `j` as an `n × 1` tensor.
    pub fn column(&mut self, a: Var, j: usize) -> Var {
        let value = self.value(a).slice(s![.., j..j + 1]).to_owned();
        let t = self.tracked(a);
        self.push(value, Op::Column(a, j), t, "column")
    }

    /// Numerically stable softmax over each row.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut value = self.value(a).clone();
        for mut row in value.rows_mut() {
            let max = row.iter().fold(F::neg_infinity(), |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|x| x / sum);
        }
        let t = self.tracked(a);
        self.push(value, Op::SoftmaxRows(a), t, "softmax_rows")
    }

    /// Gradients of the `1 × 1` node `loss` with respect to every tracked node.
    pub fn backward(&self, loss: Var) -> Result<Gradients<F>> {
        self.check()?;
        let shape = self.value(loss).dim();
        if shape != (1, 1) {
            return Err(Error::ShapeMismatch {
                op: "backward",
                expected: "1x1 loss".into(),
                actual: format!("{}x{}", shape.0, shape.1),
            });
        }
        let mut grads: Vec<Option<Array2<F>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Array2::from_elem((1, 1), F::one()));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.tracked {
                continue;
            }
            self.propagate(&node.op, &node.value, &g, &mut grads);
            if !g.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite {
                    op: op_name(&node.op),
                });
            }
            grads[i] = Some(g);
        }
        Ok(Gradients {
            grads,
            params: self.params.clone(),
        })
    }

    fn propagate(&self, op: &Op<F>, out: &Array2<F>, g: &Array2<F>, grads: &mut [Option<Array2<F>>]) {
        let mut acc = |v: Var, contrib: Array2<F>| {
            if !self.nodes[v.0].tracked {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.zip_mut_with(&contrib, |x, &y| *x = *x + y),
                slot @ None => *slot = Some(contrib),
            }
        };
        match *op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.tracked(a) {
                    acc(a, g.dot(&self.value(b).t()));
                }
                if self.tracked(b) {
                    acc(b, self.value(a).t().dot(g));
                }
            }
            Op::MatMulT(a, b) => {
                if self.tracked(a) {
                    acc(a, g.dot(self.value(b)));
                }
                if self.tracked(b) {
                    acc(b, g.t().dot(self.value(a)));
                }
            }
            Op::Add(a, b) => {
                acc(a, g.clone());
                acc(b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(a, g.clone());
                acc(b, g.mapv(|x| -x));
            }
            Op::Mul(a, b) => {
                if self.tracked(a) {
                    acc(a, g * self.value(b));
                }
                if self.tracked(b) {
                    acc(b, g * self.value(a));
                }
            }
            Op::AddRow(a, row) => {
                acc(a, g.clone());
                if self.tracked(row) {
                    acc(row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
            }
            Op::MulRow(a, row) => {
                if self.tracked(a) {
                    acc(a, g * self.value(row));
                }
                if self.tracked(row) {
                    acc(row, (g * self.value(a)).sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
            }
            Op::MulCol(a, col) => {
                if self.tracked(a) {
                    acc(a, g * self.value(col));
                }
                if self.tracked(col) {
                    acc(col, (g * self.value(a)).sum_axis(Axis(1)).insert_axis(Axis(1)));
                }
            }
            Op::Affine(a, scale) => acc(a, g.mapv(|x| x * scale)),
            Op::Tanh(a) => {
                let mut d = g.clone();
                d.zip_mut_with(out, |x, &y| *x = *x * (F::one() - y * y));
                acc(a, d);
            }
            Op::Exp(a) => acc(a, g * out),
            Op::Square(a) => {
                let two = <F as Scalar>::from_f64(2.0);
                let mut d = g.clone();
                d.zip_mut_with(self.value(a), |x, &v| *x = *x * two * v);
                acc(a, d);
            }
            Op::Sqrt(a) => {
                let half = <F as Scalar>::from_f64(0.5);
                let mut d = g.clone();
                d.zip_mut_with(out, |x, &y| *x = *x * half / y);
                acc(a, d);
            }
            Op::Clamp(a, lo, hi) => {
                let mut d = g.clone();
                d.zip_mut_with(self.value(a), |x, &v| {
                    if v < lo || v > hi {
                        *x = F::zero();
                    }
                });
                acc(a, d);
            }
            Op::Minimum(a, b) => {
                let (va, vb) = (self.value(a), self.value(b));
                let mut da = g.clone();
                let mut db = g.clone();
                ndarray::Zip::from(&mut da)
                    .and(&mut db)
                    .and(va)
                    .and(vb)
                    .for_each(|ga, gb, &x, &y| {
                        if x <= y {
                            *gb = F::zero();
                        } else {
                            *ga = F::zero();
                        }
                    });
                acc(a, da);
                acc(b, db);
            }
            Op::SumAll(a) => {
                let g0 = g[[0, 0]];
                acc(a, Array2::from_elem(self.value(a).dim(), g0));
            }
            Op::MeanAll(a) => {
                let n = <F as Scalar>::from_f64(self.value(a).len() as f64);
                acc(a, Array2::from_elem(self.value(a).dim(), g[[0, 0]] / n));
            }
            Op::SumCols(a) => {
                let d = self.value(a).dim();
                acc(a, g.broadcast(d).expect("sum_cols broadcast").to_owned());
            }
            Op::ConcatCols(ref parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).ncols();
                    if self.tracked(p) {
                        acc(p, g.slice(s![.., offset..offset + w]).to_owned());
                    }
                    offset += w;
                }
            }
            Op::Column(a, j) => {
                if self.tracked(a) {
                    let mut d = Array2::zeros(self.value(a).dim());
                    d.slice_mut(s![.., j..j + 1]).assign(g);
                    acc(a, d);
                }
            }
            Op::SoftmaxRows(a) => {
                let dot = (g * out).sum_axis(Axis(1)).insert_axis(Axis(1));
                let d = out * &(g - &dot);
                acc(a, d);
            }
        }
    }
}

fn op_name<F>(op: &Op<F>) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::MatMul(..) => "matmul",
        Op::MatMulT(..) => "matmul_t",
        Op::Add(..) => "add",
        Op::Sub(..) => "sub",
        Op::Mul(..) => "mul",
        Op::AddRow(..) => "add_row",
        Op::MulRow(..) => "mul_row",
        Op::MulCol(..) => "mul_col",
        Op::Affine(..) => "affine",
        Op::Tanh(..) => "tanh",
        Op::Exp(..) => "exp",
        Op::Square(..) => "square",
        Op::Sqrt(..) => "sqrt",
        Op::Clamp(..) => "clamp",
        Op::Minimum(..) => "minimum",
        Op::SumAll(..) => "sum",
        Op::MeanAll(..) => "mean",
        Op::SumCols(..) => "sum_cols",
        Op::ConcatCols(..) => "concat_cols",
        Op::Column(..) => "column",
        Op::SoftmaxRows(..) => "softmax_rows",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Central differences of `f` around `x`, one entry at a time.
    fn numeric_grad(x: &Array2<f64>, f: impl Fn(&Array2<f64>) -> f64) -> Array2<f64> {
        let h = 1e-6;
        let mut out = Array2::zeros(x.dim());
        for idx in 0..x.len() {
            let (r, c) = (idx / x.ncols(), idx % x.ncols());
            let mut p = x.clone();
            p[[r, c]] += h;
            let mut m = x.clone();
            m[[r, c]] -= h;
            out[[r, c]] = (f(&p) - f(&m)) / (2.0 * h);
        }
        out
    }

    fn check(x: Array2<f64>, build: impl Fn(&mut Graph<f64>, Var) -> Var) {
        let mut g = Graph::new();
        let v = g.variable(x.clone());
        let loss = build(&mut g, v);
        let grads = g.backward(loss).unwrap();
        let analytic = grads.get(v).unwrap().clone();
        let numeric = numeric_grad(&x, |p| {
            let mut g = Graph::new();
            let v = g.variable(p.clone());
            let l = build(&mut g, v);
            g.scalar(l)
        });
        for (a, n) in analytic.iter().zip(numeric.iter()) {
            assert!((a - n).abs() <= 1e-6 * (1.0 + n.abs()), "{a} vs {n}");
        }
    }

    #[test]
    fn sum_of_leaf_has_unit_gradient() {
        let mut g = Graph::<f64>::new();
        let p = g.param(array![[1.0, -2.0], [3.0, 4.0]], 0);
        let s = g.sum(p);
        let grads = g.backward(s).unwrap();
        assert!(grads.get(p).unwrap().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn elementwise_ops_match_finite_differences() {
        let x = array![[0.3, -0.7, 1.1], [0.2, 0.5, -0.4]];
        check(x.clone(), |g, v| {
            let t = g.tanh(v);
            let e = g.exp(t);
            let sq = g.square(e);
            let a = g.affine(sq, 0.5, 2.0);
            let r = g.sqrt(a);
            g.mean(r)
        });
        check(x.clone(), |g, v| {
            let c = g.clamp(v, -0.5, 0.6);
            let w = g.constant(array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
            let m = g.mul(c, w);
            g.sum(m)
        });
        check(x, |g, v| {
            let s = g.softmax_rows(v);
            let w = g.constant(array![[1.0, -2.0, 0.5], [0.3, 0.1, 2.0]]);
            let m = g.mul(s, w);
            let sc = g.sum_cols(m);
            let sq = g.square(sc);
            g.sum(sq)
        });
    }

    #[test]
    fn matrix_ops_match_finite_differences() {
        let x = array![[0.3, -0.7], [0.2, 0.5], [1.0, -1.5]];
        let w = array![[0.1, 0.4, -0.3], [0.9, -0.2, 0.6]];
        check(x.clone(), |g, v| {
            let wv = g.constant(w.clone());
            let y = g.matmul(v, wv);
            let b = g.constant(array![[0.1, 0.2, 0.3]]);
            let y = g.add_row(y, b);
            let y = g.tanh(y);
            let yt = g.matmul_t(y, wv);
            let z = g.mul(yt, v);
            g.sum(z)
        });
        // gradient with respect to the weight side
        check(w.clone(), |g, wv| {
            let xv = g.constant(x.clone());
            let y = g.matmul(xv, wv);
            let c0 = g.column(y, 1);
            let m = g.mul_col(y, c0);
            let r = g.variable(array![[1.0, -1.0, 0.5]]);
            let m = g.mul_row(m, r);
            let cat = g.concat_cols(&[m, c0]);
            let q = g.square(cat);
            g.sum(q)
        });
    }

    #[test]
    fn minimum_routes_to_smaller() {
        let mut g = Graph::<f64>::new();
        let a = g.variable(array![[1.0, 5.0]]);
        let b = g.variable(array![[2.0, 3.0]]);
        let m = g.minimum(a, b);
        let s = g.sum(m);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(a).unwrap(), &array![[1.0, 0.0]]);
        assert_eq!(grads.get(b).unwrap(), &array![[0.0, 1.0]]);
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut g = Graph::<f64>::new();
        let a = g.constant(array![[1.0]]);
        let b = g.variable(array![[2.0]]);
        let m = g.mul(a, b);
        let s = g.sum(m);
        let grads = g.backward(s).unwrap();
        assert!(grads.get(a).is_none());
        assert_eq!(grads.get(b).unwrap()[[0, 0]], 1.0);
    }

    #[test]
    fn non_finite_reports_operation() {
        let mut g = Graph::<f64>::new();
        let a = g.variable(array![[-1.0]]);
        let r = g.sqrt(a);
        let s = g.sum(r);
        match g.backward(s) {
            Err(Error::NonFinite { op }) => assert_eq!(op, "sqrt"),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn backward_requires_scalar() {
        let mut g = Graph::<f64>::new();
        let a = g.variable(array![[1.0, 2.0]]);
        assert!(g.backward(a).is_err());
    }
}
