use super::{AutodiffError, Tape, Tensor2, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub h: f64,
    /// Lower bound on the relative-error denominator, so coordinates whose
    /// true gradient is ~0 are judged on absolute error.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { h: 1e-5, floor: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// (input, flat coordinate) of the worst relative error.
    pub worst: (usize, usize),
    pub coordinates: usize,
}

/// Compares tape gradients of `f` at `inputs` with central finite differences
/// over every coordinate.
pub fn grad_check<F>(f: F, inputs: &[Tensor2], opts: &GradCheckOptions) -> Result<GradCheckReport, AutodiffError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError>,
{
    let analytic = analytic_gradients(&f, inputs)?;
    let numeric = numeric_gradients(&f, inputs, opts.h)?;
    compare_gradients(&analytic, &numeric, opts.floor)
}

pub fn analytic_gradients<F>(f: &F, inputs: &[Tensor2]) -> Result<Vec<Tensor2>, AutodiffError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf_ref(t)).collect();
    let out = f(&mut tape, &vars)?;
    let mut grads = tape.backward(out)?;
    Ok(vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| grads.take(v).unwrap_or_else(|| Tensor2::zeros(t.rows(), t.cols())))
        .collect())
}

pub fn numeric_gradients<F>(f: &F, inputs: &[Tensor2], h: f64) -> Result<Vec<Tensor2>, AutodiffError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError>,
{
    let eval = |inputs: &[Tensor2]| -> Result<f64, AutodiffError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.constant_ref(t)).collect();
        let out = f(&mut tape, &vars)?;
        let v = tape.value(out);
        if v.shape() != (1, 1) {
            return Err(AutodiffError::NonScalar(v.rows(), v.cols()));
        }
        Ok(v.get(0, 0))
    };
    let mut work = inputs.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let mut g = Tensor2::zeros(inputs[i].rows(), inputs[i].cols());
        for j in 0..inputs[i].len() {
            let x = inputs[i].data()[j];
            work[i].data_mut()[j] = x + h;
            let plus = eval(&work)?;
            work[i].data_mut()[j] = x - h;
            let minus = eval(&work)?;
            work[i].data_mut()[j] = x;
            g.data_mut()[j] = (plus - minus) / (2.0 * h);
        }
        out.push(g);
    }
    Ok(out)
}

/// Max over coordinates of `|a − n| / max(|a|, |n|, floor)`.
pub fn compare_gradients(
    analytic: &[Tensor2],
    numeric: &[Tensor2],
    floor: f64,
) -> Result<GradCheckReport, AutodiffError> {
    if analytic.len() != numeric.len() {
        return Err(super::shape_err(
            "compare_gradients",
            format!("{} vs {} tensors", analytic.len(), numeric.len()),
        ));
    }
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst: (0, 0),
        coordinates: 0,
    };
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        if a.shape() != n.shape() {
            return Err(super::shape_err(
                "compare_gradients",
                format!("{:?} vs {:?}", a.shape(), n.shape()),
            ));
        }
        for (j, (&x, &y)) in a.data().iter().zip(n.data()).enumerate() {
            let abs = (x - y).abs();
            let rel = abs / x.abs().max(y.abs()).max(floor);
            report.max_abs_error = report.max_abs_error.max(abs);
            if rel > report.max_rel_error || rel.is_nan() {
                report.max_rel_error = rel;
                report.worst = (i, j);
            }
            report.coordinates += 1;
        }
    }
    Ok(report)
}

/// Finite-difference checks of every tape operation on seeded random inputs,
/// one report per operation.
pub fn op_gradient_checks(seed: u64) -> Result<Vec<(&'static str, GradCheckReport)>, AutodiffError> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut random = |rows: usize, cols: usize, margin: f64| {
        let data = (0..rows * cols)
            .map(|_| {
                let v: f64 = rng.gen_range(-1.0..1.0);
                if v.abs() < margin {
                    v + margin.copysign(v)
                } else {
                    v
                }
            })
            .collect();
        Tensor2::from_vec(rows, cols, data).expect("sized")
    };
    let opts = GradCheckOptions::default();
    let mut out = Vec::new();

    let inputs = [random(5, 3, 0.0), random(3, 4, 0.0), random(1, 4, 0.0)];
    let linear = |t: &mut Tape, v: &[Var]| {
        let y = t.linear(v[0], v[1], v[2])?;
        Ok(t.sum_squares(y))
    };
    out.push(("linear", grad_check(linear, &inputs, &opts)?));

    let relu = |t: &mut Tape, v: &[Var]| {
        let y = t.relu(v[0]);
        let z = t.scale(y, 1.5);
        let y2 = t.add(z, v[0])?;
        Ok(t.sum_squares(y2))
    };
    out.push(("relu", grad_check(relu, &[random(6, 5, 0.02)], &opts)?));

    let inputs = [random(7, 4, 0.0), random(4, 1, 0.0), random(1, 1, 0.0)];
    let maxpool = |t: &mut Tape, v: &[Var]| {
        let p = t.set_maxpool(v[0])?;
        let y = t.linear(p, v[1], v[2])?;
        let q = t.sum_squares(p);
        t.add(y, q)
    };
    out.push(("set_maxpool", grad_check(maxpool, &inputs, &opts)?));

    let inputs = [random(1, 3, 0.0), random(5, 2, 0.0)];
    let concat = |t: &mut Tape, v: &[Var]| {
        let c = t.concat_cols(v[0], v[1])?;
        let c2 = t.concat_cols(v[1], v[0])?;
        let s1 = t.sum_squares(c);
        let s2 = t.sum_squares(c2);
        let s = t.scale(s2, 0.5);
        t.add(s1, s)
    };
    out.push(("concat_cols", grad_check(concat, &inputs, &opts)?));

    let sum = |t: &mut Tape, v: &[Var]| {
        let a = t.add(v[0], v[1])?;
        let s = t.sum(a);
        let q = t.sum_squares(a);
        let s = t.scale(s, -2.0);
        t.add(s, q)
    };
    out.push((
        "add/scale/sum",
        grad_check(sum, &[random(3, 4, 0.0), random(3, 4, 0.0)], &opts)?,
    ));

    let chamfer = |t: &mut Tape, v: &[Var]| t.chamfer(v[0], v[1]);
    out.push((
        "chamfer",
        grad_check(chamfer, &[random(6, 4, 0.0), random(5, 4, 0.0)], &opts)?,
    ));
    Ok(out)
}
