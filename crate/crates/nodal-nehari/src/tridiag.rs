//! Tridiagonal linear solves with partial pivoting.
//!
//! The preconditioner matrices are positive definite, but the frozen-potential
//! Newton Jacobians are not: `f′(u)` can exceed `1 + λφ` by orders of
//! magnitude on the core of the solution, so plain Thomas elimination can hit
//! vanishing pivots. This is the standard tridiagonal LU with row
//! interchanges and one extra superdiagonal of fill-in.

/// Solve `A x = rhs` for tridiagonal `A` given by `(sub, diag, sup)`:
/// row `i` reads `sub[i−1]·x[i−1] + diag[i]·x[i] + sup[i]·x[i+1]`.
/// Returns `None` on a numerically singular matrix.
pub(crate) fn solve_tridiag(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &[f64],
) -> Option<Vec<f64>> {
    let n = diag.len();
    debug_assert_eq!(sub.len(), n - 1);
    debug_assert_eq!(sup.len(), n - 1);
    debug_assert_eq!(rhs.len(), n);

    let mut d = diag.to_vec();
    let mut du = sup.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut x = rhs.to_vec();

    for i in 0..n - 1 {
        if d[i].abs() >= sub[i].abs() {
            if d[i] == 0.0 {
                return None;
            }
            let fact = sub[i] / d[i];
            d[i + 1] -= fact * du[i];
            x[i + 1] -= fact * x[i];
        } else {
            // interchange rows i and i+1
            let fact = d[i] / sub[i];
            d[i] = sub[i];
            let tmp = d[i + 1];
            d[i + 1] = du[i] - fact * tmp;
            if i < n - 2 {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du[i + 1];
            }
            du[i] = tmp;
            x.swap(i, i + 1);
            x[i + 1] -= fact * x[i];
        }
        if !d[i + 1].is_finite() {
            return None;
        }
    }
    if d[n - 1] == 0.0 {
        return None;
    }

    x[n - 1] /= d[n - 1];
    if n >= 2 {
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(x)
}
