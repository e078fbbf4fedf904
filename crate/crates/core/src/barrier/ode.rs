use crate::error::{Error, Result};
use crate::stable::phi_inverse;

/// `(lower, upper) = (-(C*/theta)^(1/alpha), -Phi^{-1}(theta))`, the limits
/// between which `(1/a_n) log rho(n, theta a_n / n)` is confined.
pub fn theoretical_bracket(theta: f64, alpha: f64, cstar: f64) -> Result<(f64, f64)> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::Domain(format!("theta = {theta} must be positive")));
    }
    let lower = -(cstar / theta).powf(1.0 / alpha);
    let upper = -phi_inverse(theta, alpha, cstar);
    Ok((lower, upper))
}

const TOL: f64 = 1e-6;
const MAX_CELLS: usize = 1 << 24;

/// `g(0)` for `g' = -C* / (g + theta t)^alpha` on `[0, 1]`, `g(1) = -theta`.
///
/// With `h = g + theta t` and `u = h^(alpha+1)` in reversed time `s = 1 - t`,
/// `du/ds = (alpha+1) (C* - theta u^(alpha/(alpha+1)))`, `u(0) = 0`. The
/// first cell uses the two-term expansion of `u` at `s = 0`, where the
/// right-hand side is not differentiable; the rest is classical RK4. The grid
/// starts at `grid_size` cells and doubles until two successive values of
/// `g(0)` agree to `1e-6`.
pub fn solve_g_theta(theta: f64, alpha: f64, cstar: f64, grid_size: usize) -> Result<f64> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::Domain(format!("theta = {theta} must be >= 0")));
    }
    if !(alpha > 0.0 && cstar > 0.0) {
        return Err(Error::ParamOutOfRange(format!("alpha = {alpha}, C* = {cstar} must be positive")));
    }
    let mut cells = grid_size.max(2);
    let mut prev = integrate(theta, alpha, cstar, cells);
    while cells < MAX_CELLS {
        cells *= 2;
        let next = integrate(theta, alpha, cstar, cells);
        if (next - prev).abs() <= TOL {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NonConvergence(format!("g(0) still moving at {cells} cells (theta {theta})")))
}

fn integrate(theta: f64, alpha: f64, cstar: f64, cells: usize) -> f64 {
    let p = alpha / (alpha + 1.0);
    let f = |u: f64| (alpha + 1.0) * (cstar - theta * u.max(0.0).powf(p));
    let ds = 1.0 / cells as f64;
    // u(s) = c s - (alpha+1) theta c^p s^(1+p) / (1+p) + ...
    let c = (alpha + 1.0) * cstar;
    let mut u = c * ds - (alpha + 1.0) * theta * c.powf(p) * ds.powf(1.0 + p) / (1.0 + p);
    for _ in 1..cells {
        let k1 = f(u);
        let k2 = f(u + 0.5 * ds * k1);
        let k3 = f(u + 0.5 * ds * k2);
        let k4 = f(u + ds * k3);
        u += ds / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    u.max(0.0).powf(1.0 / (alpha + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable::phi;
    use std::f64::consts::PI;

    #[test]
    fn bracket_at_alpha_one() {
        let (lo, hi) = theoretical_bracket(1.0, 1.0, 1.0).unwrap();
        assert_eq!(lo, -1.0);
        assert!((hi + 3f64.sqrt() - 1.0).abs() < 1e-12);
        assert!((phi(-hi, 1.0, 1.0) - 1.0).abs() < 1e-10);
        assert!(theoretical_bracket(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn bracket_ordering_and_large_theta() {
        for (alpha, c) in [(1.0, 1.0), (2.0, PI * PI / 2.0), (1.5, 0.7)] {
            for k in -6..=6 {
                let theta = 10f64.powi(k);
                let (lo, hi) = theoretical_bracket(theta, alpha, c).unwrap();
                assert!(lo <= hi, "alpha {alpha} theta {theta}");
            }
            let (lo, hi) = theoretical_bracket(1e6, alpha, c).unwrap();
            assert!((hi / lo - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn theta_zero_is_closed_form() {
        for (alpha, c) in [(1.0, 1.0), (2.0, PI * PI / 2.0)] {
            let g = solve_g_theta(0.0, alpha, c, 16).unwrap();
            assert!((g - ((alpha + 1.0) * c).powf(1.0 / (alpha + 1.0))).abs() < 1e-12);
        }
    }

    #[test]
    fn small_theta_limit() {
        let c = PI * PI / 2.0;
        let g = solve_g_theta(1e-4, 2.0, c, 64).unwrap();
        assert!((g - (3.0 * c).powf(1.0 / 3.0)).abs() < 1e-2);
    }

    #[test]
    fn solution_lies_inside_the_bracket() {
        for (alpha, c) in [(1.0, 1.0), (2.0, PI * PI / 2.0)] {
            for theta in [0.1, 1.0, 10.0] {
                let g = solve_g_theta(theta, alpha, c, 64).unwrap();
                let (lo, hi) = theoretical_bracket(theta, alpha, c).unwrap();
                assert!(lo <= -g && -g <= hi, "alpha {alpha} theta {theta}: {lo} {} {hi}", -g);
            }
        }
    }

    #[test]
    fn refinement_is_self_consistent() {
        let a = solve_g_theta(1.0, 1.0, 1.0, 64).unwrap();
        let b = solve_g_theta(1.0, 1.0, 1.0, 4096).unwrap();
        assert!((a - b).abs() <= 2e-6, "{a} {b}");
    }
}
