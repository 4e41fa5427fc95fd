/// Denominator floor: components smaller than this are compared on an
/// absolute scale, since central differences carry roughly
/// `ulp(loss) / epsilon` of rounding noise.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// Largest relative error between `analytic` and central differences of
/// `loss` around `params`: `|a - n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn finite_diff_check<F>(mut loss: F, params: &[f64], analytic: &[f64], epsilon: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len());
    let mut p = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + epsilon;
        let up = loss(&p);
        p[i] = orig - epsilon;
        let down = loss(&p);
        p[i] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let err = (analytic[i] - numeric).abs() / numeric.abs().max(analytic[i].abs()).max(RELATIVE_FLOOR);
        worst = worst.max(err);
    }
    worst
}
