//! The action functional, its fiber maps, and its exact discrete gradient.
//!
//! The discrete action uses a conservative (finite-volume) Dirichlet form,
//!
//! ```text
//!   ∫|∇u|² ≈ Σ_cells 4π r_{c+1/2}² h ((u_{c+1}−u_c)/h)²,
//! ```
//!
//! rather than squared centered differences. The payoff is exactness: the
//! coefficient gradient assembled from cell fluxes is the *exact* derivative
//! of the discrete action, including the nonlocal term (whose discrete
//! symmetry makes `∂(λD/4)/∂u_i = λ W_i φ_i u_i` hold identically). Directional
//! derivatives, the Miranda fiber maps, and the Newton steps all differentiate
//! the same scalar, so constraint residuals can be driven to rounding level.
//! A centered-difference form does not have this property: its node-wise
//! Euler–Lagrange operator differs from the true gradient of the summed
//! energy by a checkerboard-mode term that puts a hard floor under descent.

use serde::Serialize;

use crate::grid::{vi_with, RadialField, RadialGrid, FOUR_PI};
use crate::model::Nonlinearity;
use crate::poisson::solve_poisson;
use crate::tridiag::solve_tridiag;

// ---------------------------------------------------------------------------
// conservative discrete forms

/// Cell conductances `a_c = 4π r_{c+1/2}²/h` for cells `c = 0..N−2`.
pub(crate) fn cell_conductances(g: &RadialGrid) -> Vec<f64> {
    let h = g.spacing();
    (0..g.len() - 1)
        .map(|c| {
            let rm = g.node(c) + 0.5 * h;
            FOUR_PI * rm * rm / h
        })
        .collect()
}

/// Trapezoid node volume weights `W_i = 4π w_i r_i²`.
pub(crate) fn node_volume_weights(g: &RadialGrid) -> Vec<f64> {
    (0..g.len())
        .map(|i| {
            let r = g.node(i);
            FOUR_PI * g.quad_weights()[i] * r * r
        })
        .collect()
}

/// Exact shell volumes of the dual cells: `m_i = (4π/3)((r_i+h/2)³ − (r_i−h/2)³)`
/// clipped to the domain. Strictly positive at every node, including the
/// origin, so it serves as the metric in which the gradient field lives.
pub(crate) fn lumped_mass(g: &RadialGrid) -> Vec<f64> {
    let h = g.spacing();
    let n = g.len();
    (0..n)
        .map(|i| {
            let lo = (g.node(i) - 0.5 * h).max(0.0);
            let hi = (g.node(i) + 0.5 * h).min(g.r_max());
            FOUR_PI / 3.0 * (hi * hi * hi - lo * lo * lo)
        })
        .collect()
}

/// `Σ_c a_c (u_{c+1} − u_c)²`: the conservative Dirichlet energy.
pub(crate) fn dirichlet_form(u: &RadialField) -> f64 {
    dirichlet_cross(u, u)
}

/// Bilinear version `Σ_c a_c (u_{c+1}−u_c)(v_{c+1}−v_c)`.
pub(crate) fn dirichlet_cross(u: &RadialField, v: &RadialField) -> f64 {
    let g = u.grid();
    let (uu, vv) = (u.values(), v.values());
    let h = g.spacing();
    let mut acc = 0.0;
    for c in 0..g.len() - 1 {
        let rm = g.node(c) + 0.5 * h;
        acc += FOUR_PI * rm * rm / h * (uu[c + 1] - uu[c]) * (vv[c + 1] - vv[c]);
    }
    acc
}

/// `‖u‖² = ∫(|∇u|² + u²)` in the conservative form: the norm the action and
/// every constraint in this crate are built from.
pub(crate) fn energy_norm_sq(u: &RadialField) -> f64 {
    dirichlet_form(u) + vi_with(u.grid(), |i| u.values()[i] * u.values()[i])
}

/// `out = A u` for the stiffness matrix of the conservative Dirichlet form:
/// `(A u)_i = a_{i−1}(u_i − u_{i−1}) − a_i(u_{i+1} − u_i)` with the obvious
/// one-sided rows at the ends. `uᵀA u = dirichlet_form(u)` and `∂/∂u` of
/// `½ uᵀA u` is exactly `A u`.
pub(crate) fn stiffness_apply(a: &[f64], u: &[f64], out: &mut [f64]) {
    let n = u.len();
    out[0] = -a[0] * (u[1] - u[0]);
    for i in 1..n - 1 {
        out[i] = a[i - 1] * (u[i] - u[i - 1]) - a[i] * (u[i + 1] - u[i]);
    }
    out[n - 1] = a[n - 2] * (u[n - 1] - u[n - 2]);
}

/// Exact coefficient gradient `G_i = ∂I/∂u_i` of the discrete action at `u`
/// with the potential `φ = φ_u` already solved. The last entry is zeroed:
/// the discrete space carries the Dirichlet condition `u(R_max) = 0`.
pub(crate) fn gradient_coeffs(
    u: &RadialField,
    phi: &RadialField,
    nl: &Nonlinearity,
    lambda: f64,
) -> Vec<f64> {
    let g = u.grid();
    let n = g.len();
    let a = cell_conductances(g);
    let w = node_volume_weights(g);
    let mut out = vec![0.0; n];
    stiffness_apply(&a, u.values(), &mut out);
    for i in 0..n {
        let ui = u.values()[i];
        out[i] += w[i] * (ui + lambda * phi.values()[i] * ui - nl.eval_f(ui));
    }
    out[n - 1] = 0.0;
    out
}

// ---------------------------------------------------------------------------
// public API

/// All scalar invariants of the action at one field.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    /// `‖u‖² = ∫(|∇u|² + u²)` (conservative form).
    pub norm_sq: f64,
    /// `∫ φ_u u² = D(u,u)`.
    pub nonlocal: f64,
    /// `∫ F(u)`.
    pub potential: f64,
    /// `I(u) = ½‖u‖² + (λ/4)∫φ_u u² − ∫F(u)`.
    #[serde(rename = "I")]
    pub total: f64,
    /// `γ(u) = I′(u)[u]`.
    pub gamma: f64,
    /// `γ₊(u) = I′(u)[u⁺]`.
    pub gamma_plus: f64,
    /// `γ₋(u) = I′(u)[u⁻]`.
    pub gamma_minus: f64,
    pub lambda: f64,
}

/// Evaluate the action and all fiber derivatives at `u`.
///
/// One Poisson solve per sign part: `φ_{u⁺}` and `φ_{u⁻}` are solved
/// separately and summed (additivity of the kernel makes the sum exactly
/// `φ_u`), which gives `γ±` through the decomposition
/// `γ₊(u) = γ(u⁺) + λ∫φ_{u⁻}(u⁺)² + cross` with the Dirichlet cross term of
/// the two parts; the cross term vanishes identically when the parts are
/// separated by a whole mesh cell.
pub fn energy(u: &RadialField, nl: &Nonlinearity, lambda: f64) -> EnergyReport {
    let g = u.grid();
    let (up, um) = crate::grid::split_signs(u);
    let php = solve_poisson(&up).phi;
    let phm = solve_poisson(&um).phi;

    let norm_p = energy_norm_sq(&up);
    let norm_m = energy_norm_sq(&um);
    let cross = dirichlet_cross(&up, &um);
    let norm_sq = dirichlet_form(u) + vi_with(g, |i| u.values()[i] * u.values()[i]);

    let dpp = vi_with(g, |i| php.values()[i] * up.values()[i] * up.values()[i]);
    let dmm = vi_with(g, |i| phm.values()[i] * um.values()[i] * um.values()[i]);
    let dpm = vi_with(g, |i| phm.values()[i] * up.values()[i] * up.values()[i]);
    let dmp = vi_with(g, |i| php.values()[i] * um.values()[i] * um.values()[i]);
    let nonlocal = dpp + dmm + dpm + dmp;

    let potential = vi_with(g, |i| nl.eval_big_f(u.values()[i]));
    let pairing_p = vi_with(g, |i| nl.eval_f(up.values()[i]) * up.values()[i]);
    let pairing_m = vi_with(g, |i| nl.eval_f(um.values()[i]) * um.values()[i]);

    let total = 0.5 * norm_sq + 0.25 * lambda * nonlocal - potential;
    let gamma_plus = norm_p + cross + lambda * (dpp + dpm) - pairing_p;
    let gamma_minus = norm_m + cross + lambda * (dmm + dmp) - pairing_m;
    let gamma = norm_sq + lambda * nonlocal - (pairing_p + pairing_m);

    EnergyReport {
        norm_sq,
        nonlocal,
        potential,
        total,
        gamma,
        gamma_plus,
        gamma_minus,
        lambda,
    }
}

/// `I′(u)[v]` evaluated exactly (one Poisson solve, on `u`).
pub fn directional_derivative(
    u: &RadialField,
    v: &RadialField,
    nl: &Nonlinearity,
    lambda: f64,
) -> f64 {
    let g = u.grid();
    let phi = solve_poisson(u).phi;
    let pair = vi_with(g, |i| {
        let (ui, vi) = (u.values()[i], v.values()[i]);
        ui * vi + lambda * phi.values()[i] * ui * vi - nl.eval_f(ui) * vi
    });
    dirichlet_cross(u, v) + pair
}

/// The gradient as a field: `g_i = G_i / m_i` with `G` the exact coefficient
/// gradient and `m` the lumped cell volumes, so that
/// `I′(u)[v] = Σ_i m_i g_i v_i` for every `v` in the Dirichlet subspace.
/// Node-wise this is the strong-form residual `−Δ_h u + u + λφ_u u − f(u)`.
pub fn gradient_field(u: &RadialField, nl: &Nonlinearity, lambda: f64) -> RadialField {
    let phi = solve_poisson(u).phi;
    let coeffs = gradient_coeffs(u, &phi, nl, lambda);
    let m = lumped_mass(u.grid());
    let vals: Vec<f64> = coeffs.iter().zip(&m).map(|(c, mi)| c / mi).collect();
    RadialField::new(u.grid(), vals).expect("gradient must be finite")
}

/// Residual `‖∇I(u)‖` in the lumped metric: `(Σ_i G_i²/m_i)^{1/2}`.
/// This is the convergence certificate used by the solver; at a minimizer it
/// is driven below `tol·‖u‖`.
pub fn residual_norm(u: &RadialField, nl: &Nonlinearity, lambda: f64) -> f64 {
    let phi = solve_poisson(u).phi;
    residual_norm_with_phi(u, &phi, nl, lambda)
}

pub(crate) fn residual_norm_with_phi(
    u: &RadialField,
    phi: &RadialField,
    nl: &Nonlinearity,
    lambda: f64,
) -> f64 {
    let coeffs = gradient_coeffs(u, phi, nl, lambda);
    let m = lumped_mass(u.grid());
    coeffs
        .iter()
        .zip(&m)
        .map(|(c, mi)| c * c / mi)
        .sum::<f64>()
        .sqrt()
}

/// `‖v‖ = (Σ m_i v_i²)^{1/2}` in the lumped metric; the scale against which
/// residuals are made relative.
pub(crate) fn lumped_norm(g: &RadialGrid, vals: &[f64]) -> f64 {
    lumped_mass(g)
        .iter()
        .zip(vals)
        .map(|(m, v)| m * v * v)
        .sum::<f64>()
        .sqrt()
}

/// Solve `(A + M) d = G` where `A` is the conservative stiffness matrix and
/// `M` the lumped mass: the coefficient gradient re-expressed in the discrete
/// H¹ inner product. Using `d` as the descent direction keeps step sizes
/// mesh-independent (`Σ d·G = G^T(A+M)^{-1}G > 0`, so it is always a descent
/// direction for the same derivative). The last row is the Dirichlet
/// condition, so `d` inherits `G`'s zero there.
pub(crate) fn precondition(g: &RadialGrid, coeffs: &[f64]) -> Option<Vec<f64>> {
    let n = g.len();
    let a = cell_conductances(g);
    let m = lumped_mass(g);
    let mut diag = vec![0.0; n];
    let mut sub = vec![0.0; n - 1];
    let mut sup = vec![0.0; n - 1];
    diag[0] = m[0] + a[0];
    for i in 1..n - 1 {
        diag[i] = m[i] + a[i - 1] + a[i];
    }
    diag[n - 1] = 1.0;
    for i in 0..n - 2 {
        sup[i] = -a[i];
        sub[i] = -a[i];
    }
    // rows n−2 and n−1 decoupled: the boundary node is pinned
    solve_tridiag(&sub, &diag, &sup, coeffs)
}

/// Damped Newton on the full stationarity system `∇I(u) = 0` with a frozen
/// potential: the outer loop refreshes `φ_u` until it stops moving (sup-norm
/// `< 1e−12`), the inner loop solves the frozen-φ system with residual
/// backtracking (`accept if r_new ≤ (1−α/4)·r`). Returns the polished field
/// only when the self-consistent relative residual meets `rel_tol`; `None`
/// when the iteration stalls or the Jacobian degenerates.
///
/// The Jacobian is `A + diag(W_i(1 + λφ_i − f′(u_i)))`, indefinite wherever
/// `f′(u)` is large, hence the pivoting tridiagonal solver.
pub(crate) fn newton_polish(
    u0: &RadialField,
    nl: &Nonlinearity,
    lambda: f64,
    rel_tol: f64,
    max_outer: usize,
) -> Option<RadialField> {
    let g = u0.grid().clone();
    let n = g.len();
    let a = cell_conductances(&g);
    let w = node_volume_weights(&g);
    let mut u = u0.clone();
    let mut phi = solve_poisson(&u).phi;

    for _ in 0..max_outer {
        for _ in 0..50 {
            let coeffs = gradient_coeffs(&u, &phi, nl, lambda);
            let un = lumped_norm(&g, u.values());
            let rn = coeffs
                .iter()
                .zip(&lumped_mass(&g))
                .map(|(c, mi)| c * c / mi)
                .sum::<f64>()
                .sqrt();
            if rn <= rel_tol * un {
                break;
            }
            let mut diag = vec![0.0; n];
            let mut sub = vec![0.0; n - 1];
            let mut sup = vec![0.0; n - 1];
            for i in 0..n - 1 {
                let stiff = if i == 0 { a[0] } else { a[i - 1] + a[i] };
                let ui = u.values()[i];
                diag[i] = stiff + w[i] * (1.0 + lambda * phi.values()[i] - nl.eval_df(ui));
                if i < n - 2 {
                    sup[i] = -a[i];
                    sub[i] = -a[i];
                }
            }
            diag[n - 1] = 1.0;
            let d = solve_tridiag(&sub, &diag, &sup, &coeffs)?;
            let mut alpha = 1.0_f64;
            let mut accepted = false;
            for _ in 0..40 {
                let vals: Vec<f64> = u
                    .values()
                    .iter()
                    .zip(&d)
                    .map(|(ui, di)| ui - alpha * di)
                    .collect();
                let cand = RadialField::from_values_unchecked(&g, vals);
                let rn_new = residual_norm_with_phi(&cand, &phi, nl, lambda);
                if rn_new.is_finite() && rn_new <= (1.0 - 0.25 * alpha) * rn {
                    u = cand;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let fresh = solve_poisson(&u).phi;
        let dphi = fresh
            .values()
            .iter()
            .zip(phi.values())
            .map(|(p, q)| (p - q).abs())
            .fold(0.0_f64, f64::max);
        phi = fresh;
        if dphi < 1.0e-12 {
            break;
        }
    }

    let un = lumped_norm(&g, u.values());
    let rn = residual_norm_with_phi(&u, &phi, nl, lambda);
    if rn <= rel_tol * un {
        Some(u)
    } else {
        None
    }
}

/// One row of a fiber scan along `t ↦ t·u`.
#[derive(Debug, Clone, Serialize)]
pub struct FiberPoint {
    pub t: f64,
    #[serde(rename = "I")]
    pub energy: f64,
    pub gamma: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
}

/// Evaluate the action and fiber derivatives along the ray `t·u`.
pub fn fiber_scan(u: &RadialField, nl: &Nonlinearity, lambda: f64, ts: &[f64]) -> Vec<FiberPoint> {
    ts.iter()
        .map(|&t| {
            let report = energy(&u.scaled(t), nl, lambda);
            FiberPoint {
                t,
                energy: report.total,
                gamma: report.gamma,
                gamma_plus: report.gamma_plus,
                gamma_minus: report.gamma_minus,
            }
        })
        .collect()
}

/// CSV rendering of a fiber scan, columns `t,I,gamma,gamma_plus,gamma_minus`,
/// 17 significant digits.
pub fn fiber_csv(points: &[FiberPoint]) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("t,I,gamma,gamma_plus,gamma_minus\n");
    for p in points {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            p.t, p.energy, p.gamma, p.gamma_plus, p.gamma_minus
        );
    }
    out
}

/// Maximizer of `t ↦ I(t·u)` over `t > 0`: coarse logarithmic scan followed
/// by golden-section refinement to an interval of width `1e−8·(1+t*)`.
pub fn fiber_max(u: &RadialField, nl: &Nonlinearity, lambda: f64) -> (f64, f64) {
    let g = u.grid();
    let norm_sq = energy_norm_sq(u);
    let d = crate::poisson::nonlocal_coupling(u, u);
    let value = |t: f64| -> f64 {
        0.5 * t * t * norm_sq + 0.25 * lambda * t * t * t * t * d
            - vi_with(g, |i| nl.eval_big_f(t * u.values()[i]))
    };

    // coarse scan over two decades around t = 1
    let m = 200;
    let (lo, hi) = (0.05f64, 20.0f64);
    let t_at = |k: usize| lo * (hi / lo).powf(k as f64 / (m - 1) as f64);
    let mut best = (0usize, f64::NEG_INFINITY);
    for k in 0..m {
        let v = value(t_at(k));
        if v > best.1 {
            best = (k, v);
        }
    }
    let mut a = t_at(best.0.saturating_sub(1));
    let mut b = t_at((best.0 + 1).min(m - 1));

    // golden-section: shrink to 1e−8 in t
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut dd = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (value(c), value(dd));
    while b - a > 1e-8 * (1.0 + b) {
        if fc > fd {
            b = dd;
            dd = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = value(c);
        } else {
            a = c;
            c = dd;
            fc = fd;
            dd = a + inv_phi * (b - a);
            fd = value(dd);
        }
    }
    let t_star = 0.5 * (a + b);
    (t_star, value(t_star))
}
