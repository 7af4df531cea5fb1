use crate::scalar::{powi, sum, Scalar};

/// Success probability of the sound-only rule planner with `n` objects.
///
/// `p` is the probability the target is classified as the target, `q` the
/// probability a non-target is. With the target at knock position `k < n`
/// the planner needs `k - 1` correct rejections and one hit; at position `n`
/// it wins by elimination after `n - 1` rejections.
pub fn rule_success_rate<T: Scalar>(p: &T, q: &T, n: usize) -> T {
    assert!(n >= 1, "at least one object");
    let keep = T::one() - q.clone();
    let hits = sum((0..n as u32 - 1).map(|k| powi(&keep, k) * p.clone()));
    (hits + powi(&keep, n as u32 - 1)) / T::ratio(n as u64, 1)
}

/// `⅓[p + (1−q)p + (1−q)²]`, three objects.
pub fn baseline_rate<T: Scalar>(p: &T, q: &T) -> T {
    rule_success_rate(p, q, 3)
}

/// Worst-case error model: every misclassified non-target reads as the target.
pub fn worst_case_q<T: Scalar>(p: &T) -> T {
    T::one() - p.clone()
}

/// Uniform error model: errors spread over the four other materials.
pub fn uniform_q<T: Scalar>(p: &T) -> T {
    (T::one() - p.clone()) / T::ratio(4, 1)
}

pub fn chance_rate(n_objects: usize) -> f64 {
    assert!(n_objects >= 1, "at least one object");
    1.0 / n_objects as f64
}

/// 95% Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    const Z: f64 = 1.959_963_984_540_054;
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let centre = (phat + z2 / (2.0 * n)) / denom;
    let half = Z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}
