/// `Phi(lambda) = C* / lambda^alpha - lambda / (alpha + 1)`, strictly
/// decreasing on `(0, inf)` from `+inf` to `-inf`.
pub fn phi(lambda: f64, alpha: f64, cstar: f64) -> f64 {
    assert!(lambda > 0.0, "Phi is defined on (0, inf)");
    cstar / lambda.powf(alpha) - lambda / (alpha + 1.0)
}

/// Inverse of [`phi`] for any real `y`.
pub fn phi_inverse(y: f64, alpha: f64, cstar: f64) -> f64 {
    assert!(y.is_finite());
    let f = |l: f64| phi(l, alpha, cstar);
    let (mut lo, mut hi) = (1.0, 1.0);
    while f(lo) < y {
        lo *= 0.5;
    }
    while f(hi) > y {
        hi *= 2.0;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (f(lo) - y).abs() <= (f(hi) - y).abs() {
        lo
    } else {
        hi
    }
}
