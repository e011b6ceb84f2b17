use std::borrow::Cow;

use super::tensor::gemm;
use super::{shape_err, AutodiffError, Tensor2};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
    Relu {
        x: Var,
    },
    MaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    Concat {
        a: Var,
        b: Var,
        broadcast_a: bool,
        broadcast_b: bool,
    },
    Add {
        a: Var,
        b: Var,
    },
    Scale {
        x: Var,
        k: f64,
    },
    Sum {
        x: Var,
    },
    SumSquares {
        x: Var,
    },
    Chamfer(Box<ChamferSaved>),
}

#[derive(Debug)]
struct ChamferSaved {
    f: Var,
    g: Var,
    /// For each row of `f`, nearest row of `g` and its distance.
    f_to_g: Vec<(usize, f64)>,
    g_to_f: Vec<(usize, f64)>,
    /// Weights of the two directed means in the max (1/0, 0/1 or ½/½ on ties).
    weights: (f64, f64),
}

#[derive(Debug)]
struct Node<'a> {
    value: Cow<'a, Tensor2>,
    op: Op,
    needs_grad: bool,
}

/// Records a forward computation for one reverse sweep.
///
/// Leaves may borrow their tensors, so parameters are not copied per pass.
#[derive(Debug, Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

/// Gradients of a scalar with respect to every node that needed one.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor2>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor2> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor2> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'a, Tensor2>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A differentiable leaf (owned).
    pub fn leaf(&mut self, t: Tensor2) -> Var {
        self.push(Cow::Owned(t), Op::Leaf, true)
    }

    /// A differentiable leaf borrowing its value.
    pub fn leaf_ref(&mut self, t: &'a Tensor2) -> Var {
        self.push(Cow::Borrowed(t), Op::Leaf, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor2) -> Var {
        self.push(Cow::Owned(t), Op::Leaf, false)
    }

    pub fn constant_ref(&mut self, t: &'a Tensor2) -> Var {
        self.push(Cow::Borrowed(t), Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor2 {
        &self.nodes[v.0].value
    }

    /// Row index chosen per column by a [`set_maxpool`](Self::set_maxpool) node.
    pub fn argmax(&self, v: Var) -> Option<&[usize]> {
        match &self.nodes[v.0].op {
            Op::MaxPool { argmax, .. } => Some(argmax),
            _ => None,
        }
    }

    /// `x·W + b`, `b` broadcast over rows.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var, AutodiffError> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if xv.cols() != wv.rows() || bv.shape() != (1, wv.cols()) {
            return Err(shape_err(
                "linear",
                format!("x {:?}, W {:?}, b {:?}", xv.shape(), wv.shape(), bv.shape()),
            ));
        }
        let mut out = Tensor2::zeros(xv.rows(), wv.cols());
        let cols = wv.cols();
        for r in 0..xv.rows() {
            out.data_mut()[r * cols..(r + 1) * cols].copy_from_slice(bv.data());
        }
        gemm(xv.view(), wv.view(), &mut out, 1.0);
        let needs = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(Cow::Owned(out), Op::Linear { x, w, b }, needs))
    }

    /// Elementwise `max(0, x)`.
    pub fn relu(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let needs = self.needs(x);
        self.push(Cow::Owned(out), Op::Relu { x }, needs)
    }

    /// Column-wise maximum over rows; ties go to the lowest row.
    pub fn set_maxpool(&mut self, x: Var) -> Result<Var, AutodiffError> {
        let xv = self.value(x);
        if xv.rows() == 0 {
            return Err(AutodiffError::Empty("set_maxpool"));
        }
        let cols = xv.cols();
        let mut out = xv.row(0).to_vec();
        let mut argmax = vec![0usize; cols];
        for r in 1..xv.rows() {
            for (c, &v) in xv.row(r).iter().enumerate() {
                if v > out[c] {
                    out[c] = v;
                    argmax[c] = r;
                }
            }
        }
        let needs = self.needs(x);
        let out = Tensor2::from_vec(1, cols, out)?;
        Ok(self.push(Cow::Owned(out), Op::MaxPool { x, argmax }, needs))
    }

    /// `[a | b]`. A one-row operand is replicated to the other's row count;
    /// a zero-column operand contributes nothing.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (av, bv) = (self.value(a), self.value(b));
        let rows = if av.cols() == 0 {
            bv.rows()
        } else if bv.cols() == 0 {
            av.rows()
        } else if av.rows() == bv.rows() {
            av.rows()
        } else if av.rows() == 1 {
            bv.rows()
        } else if bv.rows() == 1 {
            av.rows()
        } else {
            return Err(shape_err(
                "concat_cols",
                format!("{:?} and {:?}", av.shape(), bv.shape()),
            ));
        };
        let broadcast_a = av.cols() > 0 && av.rows() != rows;
        let broadcast_b = bv.cols() > 0 && bv.rows() != rows;
        let (ca, cb) = (av.cols(), bv.cols());
        let mut data = Vec::with_capacity(rows * (ca + cb));
        for r in 0..rows {
            if ca > 0 {
                data.extend_from_slice(av.row(if broadcast_a { 0 } else { r }));
            }
            if cb > 0 {
                data.extend_from_slice(bv.row(if broadcast_b { 0 } else { r }));
            }
        }
        let out = Tensor2::from_vec(rows, ca + cb, data)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(
            Cow::Owned(out),
            Op::Concat {
                a,
                b,
                broadcast_a,
                broadcast_b,
            },
            needs,
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("add", format!("{:?} and {:?}", av.shape(), bv.shape())));
        }
        let mut out = av.clone();
        out.add_assign(bv);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Cow::Owned(out), Op::Add { a, b }, needs))
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Var {
        let mut out = self.value(x).clone();
        out.scale_assign(k);
        let needs = self.needs(x);
        self.push(Cow::Owned(out), Op::Scale { x, k }, needs)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let needs = self.needs(x);
        self.push(Cow::Owned(Tensor2::scalar(s)), Op::Sum { x }, needs)
    }

    pub fn sum_squares(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().map(|v| v * v).sum();
        let needs = self.needs(x);
        self.push(Cow::Owned(Tensor2::scalar(s)), Op::SumSquares { x }, needs)
    }

    /// Symmetric set distance between the rows of `f` and `g`:
    /// `max(mean_f min_g ‖f − g‖, mean_g min_f ‖f − g‖)`.
    ///
    /// Nearest-neighbor ties go to the lowest index. When both directed means
    /// are equal the gradient is split evenly between them.
    pub fn chamfer(&mut self, f: Var, g: Var) -> Result<Var, AutodiffError> {
        let (fv, gv) = (self.value(f), self.value(g));
        if fv.rows() == 0 || gv.rows() == 0 {
            return Err(AutodiffError::Empty("chamfer"));
        }
        if fv.cols() != gv.cols() {
            return Err(shape_err("chamfer", format!("{:?} and {:?}", fv.shape(), gv.shape())));
        }
        let (f_to_g, g_to_f) = nearest_both_ways(fv, gv);
        let a = order_free_mean(&f_to_g);
        let b = order_free_mean(&g_to_f);
        let weights = if a > b {
            (1.0, 0.0)
        } else if b > a {
            (0.0, 1.0)
        } else {
            (0.5, 0.5)
        };
        let needs = self.needs(f) || self.needs(g);
        Ok(self.push(
            Cow::Owned(Tensor2::scalar(a.max(b))),
            Op::Chamfer(Box::new(ChamferSaved {
                f,
                g,
                f_to_g,
                g_to_f,
                weights,
            })),
            needs,
        ))
    }

    /// Reverse sweep from a 1×1 node.
    pub fn backward(&self, out: Var) -> Result<Gradients, AutodiffError> {
        let shape = self.value(out).shape();
        if shape != (1, 1) {
            return Err(AutodiffError::NonScalar(shape.0, shape.1));
        }
        let mut grads: Vec<Option<Tensor2>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[out.0] = Some(Tensor2::scalar(1.0));
        for i in (0..=out.0).rev() {
            let Some(dy) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            self.propagate(&node.op, &dy, &mut grads);
            grads[i] = Some(dy);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor2>], v: Var, contribution: Tensor2) {
        if !self.needs(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(g) => g.add_assign(&contribution),
            slot => *slot = Some(contribution),
        }
    }

    fn propagate(&self, op: &Op, dy: &Tensor2, grads: &mut [Option<Tensor2>]) {
        match op {
            Op::Leaf => {}
            Op::Linear { x, w, b } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                if self.needs(*x) {
                    let mut dx = Tensor2::zeros(xv.rows(), xv.cols());
                    gemm(dy.view(), wv.t_view(), &mut dx, 0.0);
                    self.accumulate(grads, *x, dx);
                }
                if self.needs(*w) {
                    let mut dw = Tensor2::zeros(wv.rows(), wv.cols());
                    gemm(xv.t_view(), dy.view(), &mut dw, 0.0);
                    self.accumulate(grads, *w, dw);
                }
                if self.needs(*b) {
                    let mut db = Tensor2::zeros(1, dy.cols());
                    for r in 0..dy.rows() {
                        for (acc, v) in db.data_mut().iter_mut().zip(dy.row(r)) {
                            *acc += v;
                        }
                    }
                    self.accumulate(grads, *b, db);
                }
            }
            Op::Relu { x } => {
                let mut dx = dy.clone();
                for (d, &v) in dx.data_mut().iter_mut().zip(self.value(*x).data()) {
                    if !(v > 0.0) {
                        *d = 0.0;
                    }
                }
                self.accumulate(grads, *x, dx);
            }
            Op::MaxPool { x, argmax } => {
                let xv = self.value(*x);
                let mut dx = Tensor2::zeros(xv.rows(), xv.cols());
                for (c, &r) in argmax.iter().enumerate() {
                    dx.set(r, c, dy.get(0, c));
                }
                self.accumulate(grads, *x, dx);
            }
            Op::Concat {
                a,
                b,
                broadcast_a,
                broadcast_b,
            } => {
                let (ca, cb) = (self.value(*a).cols(), self.value(*b).cols());
                let split = |tape: &Self, v: Var, offset: usize, width: usize, broadcast: bool| {
                    let rows = tape.value(v).rows();
                    let mut g = Tensor2::zeros(rows, width);
                    for r in 0..dy.rows() {
                        let src = &dy.row(r)[offset..offset + width];
                        let dst_row = if broadcast { 0 } else { r };
                        for (acc, v) in g.data_mut()[dst_row * width..(dst_row + 1) * width].iter_mut().zip(src) {
                            *acc += v;
                        }
                    }
                    g
                };
                if ca > 0 && self.needs(*a) {
                    let g = split(self, *a, 0, ca, *broadcast_a);
                    self.accumulate(grads, *a, g);
                }
                if cb > 0 && self.needs(*b) {
                    let g = split(self, *b, ca, cb, *broadcast_b);
                    self.accumulate(grads, *b, g);
                }
            }
            Op::Add { a, b } => {
                self.accumulate(grads, *a, dy.clone());
                self.accumulate(grads, *b, dy.clone());
            }
            Op::Scale { x, k } => {
                let mut dx = dy.clone();
                dx.scale_assign(*k);
                self.accumulate(grads, *x, dx);
            }
            Op::Sum { x } => {
                let xv = self.value(*x);
                self.accumulate(grads, *x, Tensor2::filled(xv.rows(), xv.cols(), dy.get(0, 0)));
            }
            Op::SumSquares { x } => {
                let mut dx = self.value(*x).clone();
                dx.scale_assign(2.0 * dy.get(0, 0));
                self.accumulate(grads, *x, dx);
            }
            Op::Chamfer(saved) => {
                let (fv, gv) = (self.value(saved.f), self.value(saved.g));
                let dim = fv.cols();
                let mut df = Tensor2::zeros(fv.rows(), dim);
                let mut dg = Tensor2::zeros(gv.rows(), dim);
                let scale = dy.get(0, 0);
                let spread = |pairs: &[(usize, f64)],
                              from: &Tensor2,
                              to: &Tensor2,
                              d_from: &mut Tensor2,
                              d_to: &mut Tensor2,
                              w: f64| {
                    if w == 0.0 {
                        return;
                    }
                    let k = scale * w / pairs.len() as f64;
                    for (i, &(j, dist)) in pairs.iter().enumerate() {
                        if dist == 0.0 {
                            continue;
                        }
                        for c in 0..dim {
                            let u = k * (from.get(i, c) - to.get(j, c)) / dist;
                            d_from.data_mut()[i * dim + c] += u;
                            d_to.data_mut()[j * dim + c] -= u;
                        }
                    }
                };
                spread(&saved.f_to_g, fv, gv, &mut df, &mut dg, saved.weights.0);
                spread(&saved.g_to_f, gv, fv, &mut dg, &mut df, saved.weights.1);
                self.accumulate(grads, saved.f, df);
                self.accumulate(grads, saved.g, dg);
            }
        }
    }
}

/// Mean of the distances summed in sorted order, so the result does not
/// depend on row order.
fn order_free_mean(pairs: &[(usize, f64)]) -> f64 {
    let mut d: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    d.sort_by(f64::total_cmp);
    d.iter().sum::<f64>() / d.len() as f64
}

/// Nearest neighbors between row sets in both directions, from one pass over
/// all pairs.
fn nearest_both_ways(f: &Tensor2, g: &Tensor2) -> (Vec<(usize, f64)>, Vec<(usize, f64)>) {
    let mut f_best = vec![(0usize, f64::INFINITY); f.rows()];
    let mut g_best = vec![(0usize, f64::INFINITY); g.rows()];
    for i in 0..f.rows() {
        let fi = f.row(i);
        for j in 0..g.rows() {
            let d2: f64 = fi.iter().zip(g.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < f_best[i].1 {
                f_best[i] = (j, d2);
            }
            if d2 < g_best[j].1 {
                g_best[j] = (i, d2);
            }
        }
    }
    for x in f_best.iter_mut().chain(g_best.iter_mut()) {
        x.1 = x.1.sqrt();
    }
    (f_best, g_best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check, GradCheckOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor2 {
        Tensor2::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn linear_identity_and_scalar_chain_rule() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor2::from_rows(&[[1.0, 2.0], [3.0, 4.0]]));
        let w = tape.leaf(Tensor2::from_rows(&[[1.0, 0.0], [0.0, 1.0]]));
        let b = tape.leaf(Tensor2::zeros(1, 2));
        let y = tape.linear(x, w, b).unwrap();
        assert_eq!(tape.value(y), tape.value(x));

        let mut tape = Tape::new();
        let x = tape.leaf(Tensor2::scalar(2.0));
        let w = tape.leaf(Tensor2::scalar(3.0));
        let b = tape.leaf(Tensor2::scalar(1.0));
        let y = tape.linear(x, w, b).unwrap();
        assert_eq!(tape.value(y).get(0, 0), 7.0);
        let z = tape.scale(y, 5.0);
        let g = tape.backward(z).unwrap();
        assert_eq!(g.get(x).unwrap().get(0, 0), 15.0);
        assert_eq!(g.get(w).unwrap().get(0, 0), 10.0);
        assert_eq!(g.get(b).unwrap().get(0, 0), 5.0);
    }

    #[test]
    fn shape_errors() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor2::zeros(2, 3));
        let w = tape.leaf(Tensor2::zeros(2, 3));
        let b = tape.leaf(Tensor2::zeros(1, 3));
        assert!(tape.linear(x, w, b).is_err());
        let y = tape.leaf(Tensor2::zeros(3, 3));
        assert!(tape.concat_cols(x, y).is_err());
        assert!(tape.backward(x).is_err());
        let e = tape.leaf(Tensor2::zeros(0, 3));
        assert!(tape.set_maxpool(e).is_err());
        assert!(tape.chamfer(e, x).is_err());
    }

    #[test]
    fn linear_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inputs = vec![random(5, 3, &mut rng), random(3, 4, &mut rng), random(1, 4, &mut rng)];
        let report = grad_check(
            |t, v| {
                let y = t.linear(v[0], v[1], v[2])?;
                Ok(t.sum_squares(y))
            },
            &inputs,
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    #[test]
    fn relu_extremes() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor2::from_rows(&[[-1.0, -2.0], [-0.5, -3.0]]));
        let y = tape.relu(x);
        assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
        let s = tape.sum(y);
        let g = tape.backward(s).unwrap();
        assert!(g.get(x).unwrap().data().iter().all(|&v| v == 0.0));

        let mut tape = Tape::new();
        let x = tape.leaf(Tensor2::from_rows(&[[1.0, 2.0]]));
        let y = tape.relu(x);
        assert_eq!(tape.value(y), tape.value(x));
        let s = tape.sum(y);
        assert_eq!(tape.backward(s).unwrap().get(x).unwrap().data(), &[1.0, 1.0]);

        // Subgradient at zero is zero.
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor2::scalar(0.0));
        let y = tape.relu(x);
        let s = tape.sum(y);
        assert_eq!(tape.backward(s).unwrap().get(x).unwrap().get(0, 0), 0.0);
    }

    #[test]
    fn relu_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut x = random(6, 5, &mut rng);
        for v in x.data_mut() {
            if v.abs() < 1e-2 {
                *v += 0.05;
            }
        }
        let report = grad_check(
            |t, v| {
                let y = t.relu(v[0]);
                let z = t.scale(y, 1.5);
                let y2 = t.add(z, v[0])?;
                Ok(t.sum_squares(y2))
            },
            &[x],
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    #[test]
    fn maxpool_basics() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor2::from_rows(&[[1.0, 5.0, 2.0]]));
        let p = tape.set_maxpool(x).unwrap();
        assert_eq!(tape.value(p), tape.value(x));

        let rows = [[1.0, 5.0], [3.0, 5.0], [2.0, -1.0]];
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor2::from_rows(&rows));
        let p = tape.set_maxpool(x).unwrap();
        assert_eq!(tape.value(p).data(), &[3.0, 5.0]);
        assert_eq!(tape.argmax(p).unwrap(), &[1, 0]);

        let mut permuted = rows;
        permuted.reverse();
        let mut tape2 = Tape::new();
        let x2 = tape2.leaf(Tensor2::from_rows(&permuted));
        let p2 = tape2.set_maxpool(x2).unwrap();
        assert_eq!(tape2.value(p2), tape.value(p));
    }

    #[test]
    fn maxpool_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(7, 4, &mut rng);
        let w = random(4, 1, &mut rng);
        let b = Tensor2::zeros(1, 1);
        let report = grad_check(
            |t, v| {
                let p = t.set_maxpool(v[0])?;
                let y = t.linear(p, v[1], v[2])?;
                let q = t.sum_squares(p);
                let s = t.add(y, q)?;
                Ok(s)
            },
            &[x, w, b],
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    #[test]
    fn concat_shapes_and_broadcast_gradient() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor2::filled(3, 2, 1.0));
        let b = tape.leaf(Tensor2::filled(3, 4, 2.0));
        let c = tape.concat_cols(a, b).unwrap();
        assert_eq!(tape.value(c).shape(), (3, 6));
        let empty = tape.leaf(Tensor2::zeros(0, 0));
        let same = tape.concat_cols(a, empty).unwrap();
        assert_eq!(tape.value(same), tape.value(a));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inputs = vec![random(1, 3, &mut rng), random(5, 2, &mut rng)];
        let report = grad_check(
            |t, v| {
                let c = t.concat_cols(v[0], v[1])?;
                let c2 = t.concat_cols(v[1], v[0])?;
                let s1 = t.sum_squares(c);
                let s2 = t.sum_squares(c2);
                let s = t.scale(s2, 0.5);
                t.add(s1, s)
            },
            &inputs,
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");

        // The broadcast operand collects the sum of its replicated row gradients.
        let mut tape = Tape::new();
        let g = tape.leaf(Tensor2::from_rows(&[[1.0, 2.0]]));
        let x = tape.leaf(Tensor2::zeros(4, 1));
        let c = tape.concat_cols(x, g).unwrap();
        let s = tape.sum(c);
        assert_eq!(tape.backward(s).unwrap().get(g).unwrap().data(), &[4.0, 4.0]);
    }

    #[test]
    fn fan_out_accumulates() {
        let x0 = Tensor2::from_rows(&[[0.3, -0.7]]);
        let grad_of = |build: &dyn Fn(&mut Tape, Var) -> Var| {
            let mut t = Tape::new();
            let x = t.leaf(x0.clone());
            let y = build(&mut t, x);
            t.backward(y).unwrap().get(x).unwrap().clone()
        };
        let f = |t: &mut Tape, x: Var| t.sum_squares(x);
        let g = |t: &mut Tape, x: Var| {
            let s = t.scale(x, 3.0);
            t.sum(s)
        };
        let both = grad_of(&|t, x| {
            let a = f(t, x);
            let b = g(t, x);
            t.add(a, b).unwrap()
        });
        let mut sum = grad_of(&f);
        sum.add_assign(&grad_of(&g));
        assert_eq!(both, sum);
    }

    fn brute_chamfer(f: &Tensor2, g: &Tensor2) -> f64 {
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let directed = |p: &Tensor2, q: &Tensor2| {
            let mut mins: Vec<f64> = (0..p.rows())
                .map(|i| {
                    (0..q.rows())
                        .map(|j| dist(p.row(i), q.row(j)))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            mins.sort_by(|a, b| a.partial_cmp(b).unwrap());
            mins.iter().sum::<f64>() / p.rows() as f64
        };
        directed(f, g).max(directed(g, f))
    }

    #[test]
    fn chamfer_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random(6, 4, &mut rng);
        let mut tape = Tape::new();
        let a = tape.leaf(f.clone());
        let b = tape.leaf(f.clone());
        let c = tape.chamfer(a, b).unwrap();
        assert_eq!(tape.value(c).get(0, 0), 0.0);

        let mut tape = Tape::new();
        let a = tape.leaf(Tensor2::from_rows(&[[0.0, 0.0, 0.0, 0.0]]));
        let b = tape.leaf(Tensor2::from_rows(&[[1.0, 2.0, 2.0, 0.0]]));
        let c = tape.chamfer(a, b).unwrap();
        assert_eq!(tape.value(c).get(0, 0), 3.0);

        let f = random(3, 4, &mut rng);
        let g = random(2, 4, &mut rng);
        let mut tape = Tape::new();
        let a = tape.leaf(f.clone());
        let b = tape.leaf(g.clone());
        let c = tape.chamfer(a, b).unwrap();
        assert_eq!(tape.value(c).get(0, 0), brute_chamfer(&f, &g));

        let report = grad_check(|t, v| t.chamfer(v[0], v[1]), &[f, g], &GradCheckOptions::default()).unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    proptest::proptest! {
        #[test]
        fn maxpool_is_permutation_invariant(
            values in proptest::collection::vec(-3i32..3, 24),
            seed in 0u64..1000,
        ) {
            use rand::seq::SliceRandom;
            let x = Tensor2::from_vec(8, 3, values.iter().map(|&v| v as f64 * 0.5).collect()).unwrap();
            let mut order: Vec<usize> = (0..8).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let mut tape = Tape::new();
            let a = tape.constant(x.clone());
            let b = tape.constant(x.select_rows(&order));
            let pa = tape.set_maxpool(a).unwrap();
            let pb = tape.set_maxpool(b).unwrap();
            proptest::prop_assert_eq!(tape.value(pa), tape.value(pb));
        }
    }
}
