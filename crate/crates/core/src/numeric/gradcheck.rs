/// Default central-difference step for 64-bit values.
pub const DEFAULT_EPSILON: f64 = 1e-4;

/// Central finite differences `(f(p+ε) − f(p−ε)) / 2ε` for every coordinate.
///
/// `f` is evaluated at perturbed copies of `params`; the slice itself is
/// left unchanged.
pub fn finite_difference_grad<F>(mut f: F, params: &[f64], epsilon: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + epsilon;
        let plus = f(&probe);
        probe[i] = orig - epsilon;
        let minus = f(&probe);
        probe[i] = orig;
        grad.push((plus - minus) / (2.0 * epsilon));
    }
    grad
}

/// `|a − b| / max(|a|, |b|, floor)`; the floor keeps near-zero pairs from
/// producing spurious large ratios.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
