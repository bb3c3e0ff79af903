/// Outcome of comparing an analytic gradient with central differences.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(coordinate, analytic, numeric, relative error)`, worst first, at most five.
    pub worst: Vec<(usize, f64, f64, f64)>,
    pub passed: bool,
}

/// Compares the gradient returned by `loss_fn` at `x` against central
/// differences with step `h`.
///
/// The relative error of a coordinate is `|a - n| / max(|a|, |n|, floor)`;
/// `floor` keeps near-zero coordinates from amplifying rounding noise.
pub fn finite_diff_check<F>(mut loss_fn: F, x: &[f64], h: f64, tol: f64, floor: f64) -> GradCheckReport
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = loss_fn(x);
    assert_eq!(analytic.len(), x.len(), "gradient length must match parameters");
    let mut probe = x.to_vec();
    let mut errors = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let (up, _) = loss_fn(&probe);
        probe[i] = x[i] - h;
        let (down, _) = loss_fn(&probe);
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        errors.push((i, a, numeric, rel));
    }
    errors.sort_by(|p, q| q.3.total_cmp(&p.3));
    let max_rel_error = errors.first().map_or(0.0, |e| e.3);
    errors.truncate(5);
    GradCheckReport {
        max_rel_error,
        worst: errors,
        passed: max_rel_error < tol,
    }
}
