//! Exact functionals of piecewise-linear radial profiles on arbitrary
//! breakpoint partitions.
//!
//! The seed diagnostics verify dilation identities such as
//! `∫|∇u_T|² = ∫|∇u|²/T` for `u_T(x) = u(Tx)`. Evaluating both sides on one
//! fixed grid buries the identity under O(h²) resampling error; evaluating
//! the pullback as what it is, a piecewise-linear profile on the stretched
//! partition `{r_i/T}`, makes every identity hold to rounding. Cells carry
//! their own local coordinate `ξ = s − r_c`, so the polynomial pieces stay
//! well scaled far from the origin.
//!
//! The profile is `u(r)` linear between consecutive breakpoints and zero
//! beyond the last one. All integrals are over ℝ³, i.e. weighted by `4πr²`.

use crate::grid::FOUR_PI;

/// 3-point Gauss–Legendre rule on [-1, 1] (exact through degree 5).
const G3: [(f64, f64); 3] = [
    (-0.7745966692414834, 0.5555555555555556),
    (0.0, 0.8888888888888888),
    (0.7745966692414834, 0.5555555555555556),
];

/// 5-point Gauss–Legendre rule on [-1, 1] (exact through degree 9).
const G5: [(f64, f64); 5] = [
    (-0.9061798459386640, 0.2369268850561891),
    (-0.5384693101056831, 0.4786286704993665),
    (0.0, 0.5688888888888889),
    (0.5384693101056831, 0.4786286704993665),
    (0.9061798459386640, 0.2369268850561891),
];

fn check(r: &[f64], u: &[f64]) {
    assert_eq!(r.len(), u.len(), "breakpoints and values must align");
    assert!(r.len() >= 2, "need at least one cell");
    for c in 0..r.len() - 1 {
        assert!(r[c + 1] >= r[c], "breakpoints must be non-decreasing");
    }
    assert!(r[0] >= 0.0, "radii must be non-negative");
}

/// `∫|∇u|² dx`: closed form `4π Σ_c slope² (r_{c+1}³ − r_c³)/3`.
pub(crate) fn grad2(r: &[f64], u: &[f64]) -> f64 {
    check(r, u);
    let mut acc = 0.0;
    for c in 0..r.len() - 1 {
        let dr = r[c + 1] - r[c];
        if dr == 0.0 {
            continue;
        }
        let s = (u[c + 1] - u[c]) / dr;
        let r3 = r[c + 1] * r[c + 1] * r[c + 1] - r[c] * r[c] * r[c];
        acc += s * s * r3 / 3.0;
    }
    FOUR_PI * acc
}

/// `∫u² dx`: per cell a degree-4 polynomial, integrated exactly by the
/// 3-point rule.
pub(crate) fn mass(r: &[f64], u: &[f64]) -> f64 {
    check(r, u);
    let mut acc = 0.0;
    for c in 0..r.len() - 1 {
        let dr = r[c + 1] - r[c];
        if dr == 0.0 {
            continue;
        }
        let m = (u[c + 1] - u[c]) / dr;
        let half = 0.5 * dr;
        for (x, w) in G3 {
            let xi = half * (x + 1.0);
            let uu = u[c] + m * xi;
            let rr = r[c] + xi;
            acc += w * half * uu * uu * rr * rr;
        }
    }
    FOUR_PI * acc
}

/// `∫ g(u(r)) dx` for a scalar function of the profile value, 5-point Gauss
/// per cell. Cells where the profile is identically zero contribute `g(0)`
/// times their volume, so `g(0) = 0` is assumed (true for `F` and `f(u)u`).
pub(crate) fn func_vi(r: &[f64], u: &[f64], g: impl Fn(f64) -> f64) -> f64 {
    check(r, u);
    let mut acc = 0.0;
    for c in 0..r.len() - 1 {
        let dr = r[c + 1] - r[c];
        if dr == 0.0 || (u[c] == 0.0 && u[c + 1] == 0.0) {
            continue;
        }
        let m = (u[c + 1] - u[c]) / dr;
        let half = 0.5 * dr;
        for (x, w) in G5 {
            let xi = half * (x + 1.0);
            let uu = u[c] + m * xi;
            let rr = r[c] + xi;
            acc += w * half * g(uu) * rr * rr;
        }
    }
    FOUR_PI * acc
}

/// Degree-4 coefficients of `u(ξ)²(r_c+ξ)²` in the cell-local coordinate,
/// plus the degree-3 coefficients of `u(ξ)²(r_c+ξ)`.
fn cell_polys(rc: f64, uc: f64, m: f64) -> ([f64; 5], [f64; 4]) {
    // u² = uc² + 2 uc m ξ + m² ξ²
    let q = [uc * uc, 2.0 * uc * m, m * m];
    // (rc + ξ)² = rc² + 2 rc ξ + ξ²
    let s2 = [rc * rc, 2.0 * rc, 1.0];
    let mut p2 = [0.0; 5];
    for (i, qi) in q.iter().enumerate() {
        for (j, sj) in s2.iter().enumerate() {
            p2[i + j] += qi * sj;
        }
    }
    let s1 = [rc, 1.0];
    let mut p1 = [0.0; 4];
    for (i, qi) in q.iter().enumerate() {
        for (j, sj) in s1.iter().enumerate() {
            p1[i + j] += qi * sj;
        }
    }
    (p2, p1)
}

fn poly_int(p: &[f64], xi: f64) -> f64 {
    // ∫₀^ξ p
    let mut acc = 0.0;
    let mut pw = xi;
    for (k, c) in p.iter().enumerate() {
        acc += c * pw / (k + 1) as f64;
        pw *= xi;
    }
    acc
}

/// `∫ φ_u u² dx` with `−Δφ = u²`, via the Newton kernel
/// `φ(x) = A(x)/x + B(x)`, `A(x) = ∫₀^x u²s²ds`, `B(x) = ∫_x^∞ u²s ds`.
/// Cell integrals of `A`'s and `B`'s densities are exact polynomial
/// antiderivatives; the outer integral uses the 5-point rule (the only
/// non-polynomial factor is `1/x`, smooth on every cell interior).
pub(crate) fn coupling(r: &[f64], u: &[f64]) -> f64 {
    check(r, u);
    let n = r.len();
    // exact per-cell integrals of u²s² and u²s
    let mut i2 = vec![0.0; n - 1];
    let mut i1 = vec![0.0; n - 1];
    for c in 0..n - 1 {
        let dr = r[c + 1] - r[c];
        if dr == 0.0 {
            continue;
        }
        let m = (u[c + 1] - u[c]) / dr;
        let (p2, p1) = cell_polys(r[c], u[c], m);
        i2[c] = poly_int(&p2, dr);
        i1[c] = poly_int(&p1, dr);
    }
    let mut a_pre = vec![0.0; n];
    for c in 0..n - 1 {
        a_pre[c + 1] = a_pre[c] + i2[c];
    }
    let mut b_suf = vec![0.0; n];
    for c in (0..n - 1).rev() {
        b_suf[c] = b_suf[c + 1] + i1[c];
    }

    let mut acc = 0.0;
    for c in 0..n - 1 {
        let dr = r[c + 1] - r[c];
        if dr == 0.0 {
            continue;
        }
        let m = (u[c + 1] - u[c]) / dr;
        let (p2, p1) = cell_polys(r[c], u[c], m);
        let half = 0.5 * dr;
        for (x, w) in G5 {
            let xi = half * (x + 1.0);
            let rr = r[c] + xi;
            let a_here = a_pre[c] + poly_int(&p2, xi);
            let b_here = b_suf[c + 1] + (i1[c] - poly_int(&p1, xi));
            let phi = if rr > 0.0 { a_here / rr + b_here } else { b_here };
            let uu = u[c] + m * xi;
            acc += w * half * phi * uu * uu * rr * rr;
        }
    }
    FOUR_PI * acc
}
