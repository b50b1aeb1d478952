use super::{Graph, NodeId, Tensor, TensorError};

/// Default central-difference step.
pub const GRADCHECK_STEP: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|a - n| / (|a| + |n|)` over parameter tensors, with norms
    /// taken over each tensor's coordinates.
    pub max_rel_error: f64,
    /// Tensor index where `max_rel_error` occurred.
    pub worst_tensor: usize,
    /// `max |a_i - n_i| / max(1e-8, |a_i| + |n_i|)` over single coordinates.
    /// Roundoff alone puts this near `eps * |f| / (h * |a_i|)`, so it is a
    /// diagnostic for coordinates with small gradients, not a pass mark.
    pub max_coord_error: f64,
    /// `(tensor index, coordinate)` where `max_coord_error` occurred.
    pub worst: (usize, usize),
    /// Smallest relu input magnitude at the unperturbed point; a value
    /// below the step means the check straddles a kink.
    pub kink_margin: f64,
    pub coordinates: usize,
}

/// Compares reverse-mode gradients of a scalar function against central
/// differences `(f(p + h) - f(p - h)) / 2h`, coordinate by coordinate.
///
/// `f` builds the function on a fresh graph from leaf nodes of `params`
/// and returns the scalar output node.
pub fn gradient_check<F, E>(params: &[Tensor], h: f64, f: F) -> Result<GradCheckReport, E>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId, E>,
    E: From<TensorError>,
{
    Ok(gradient_check_clear_of_kinks(params, h, 0.0, &[], f)?.expect("a zero margin is always met"))
}

/// Like [`gradient_check`], but returns `None` without differencing when the
/// unperturbed point has a relu input closer than `min_margin` to zero.
///
/// `subset[i]`, when present and `Some`, lists the coordinates of tensor `i`
/// to difference; the others are skipped. Missing entries mean all.
pub fn gradient_check_clear_of_kinks<F, E>(
    params: &[Tensor],
    h: f64,
    min_margin: f64,
    subset: &[Option<Vec<usize>>],
    f: F,
) -> Result<Option<GradCheckReport>, E>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId, E>,
    E: From<TensorError>,
{
    let eval = |ps: &[Tensor], backward: bool| -> Result<(f64, Vec<Vec<f64>>, f64), E> {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = ps.iter().map(|t| g.input(t, backward)).collect();
        let out = f(&mut g, &ids)?;
        let v = g.scalar(out);
        if !v.is_finite() {
            return Err(TensorError::NonFinite("gradient check objective".into()).into());
        }
        let mut grads = Vec::new();
        if backward {
            g.backward(out)?;
            for (id, p) in ids.iter().zip(ps) {
                grads.push(g.grad(*id).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; p.len()]));
            }
        }
        Ok((v, grads, g.kink_margin()))
    };

    let (_, analytic, kink_margin) = eval(params, true)?;
    if kink_margin < min_margin {
        return Ok(None);
    }
    for a in analytic.iter().flatten() {
        if !a.is_finite() {
            return Err(TensorError::NonFinite("analytic gradient".into()).into());
        }
    }
    let mut work = params.to_vec();
    let mut report =
        GradCheckReport { max_rel_error: 0.0, worst_tensor: 0, max_coord_error: 0.0, worst: (0, 0), kink_margin, coordinates: 0 };
    for ti in 0..work.len() {
        let coords: Vec<usize> = match subset.get(ti) {
            Some(Some(list)) => list.clone(),
            _ => (0..work[ti].len()).collect(),
        };
        let (mut diff2, mut a2, mut n2) = (0.0, 0.0, 0.0);
        for ci in coords {
            let orig = work[ti].data()[ci];
            work[ti].data_mut()[ci] = orig + h;
            let (fp, _, _) = eval(&work, false)?;
            work[ti].data_mut()[ci] = orig - h;
            let (fm, _, _) = eval(&work, false)?;
            work[ti].data_mut()[ci] = orig;
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic[ti][ci];
            diff2 += (a - numeric) * (a - numeric);
            a2 += a * a;
            n2 += numeric * numeric;
            let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            if err > report.max_coord_error {
                report.max_coord_error = err;
                report.worst = (ti, ci);
            }
            report.coordinates += 1;
        }
        let denom = a2.sqrt() + n2.sqrt();
        let err = if denom > 0.0 { diff2.sqrt() / denom } else { 0.0 };
        if err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_tensor = ti;
        }
    }
    Ok(Some(report))
}
