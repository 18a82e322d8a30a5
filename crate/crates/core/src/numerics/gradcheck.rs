use super::{NumericsError, Scalar, Tape, Tensor, Var};

/// Compares tape gradients with central finite differences.
///
/// `f` builds a scalar loss from parameter leaves bound in the order of
/// `params`. Returns the largest componentwise relative error, using the
/// denominator `max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check<S, F>(params: &[Tensor<S>], h: S, f: F) -> Result<S, NumericsError>
where
    S: Scalar,
    F: Fn(&mut Tape<S>, &[Var]) -> Result<Var, NumericsError>,
{
    let eval = |ps: &[Tensor<S>]| -> Result<(Tape<S>, Vec<Var>, Var), NumericsError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.leaf(p.clone())).collect();
        let loss = f(&mut tape, &vars)?;
        Ok((tape, vars, loss))
    };
    let (tape, vars, loss) = eval(params)?;
    let analytic = tape.backward(loss).collect(&tape, &vars);
    let floor = S::lit(1e-8);
    let two_h = h + h;
    let mut worst = S::zero();
    let mut work: Vec<Tensor<S>> = params.to_vec();
    for (pi, g) in analytic.iter().enumerate() {
        for k in 0..work[pi].len() {
            let orig = work[pi].data()[k];
            work[pi].data_mut()[k] = orig + h;
            let (t, _, l) = eval(&work)?;
            let plus = t.value(l).item();
            work[pi].data_mut()[k] = orig - h;
            let (t, _, l) = eval(&work)?;
            let minus = t.value(l).item();
            work[pi].data_mut()[k] = orig;
            let numeric = (plus - minus) / two_h;
            let a = g.data()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            if rel > worst {
                worst = rel;
            }
        }
    }
    Ok(worst)
}
