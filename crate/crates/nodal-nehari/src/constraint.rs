//! Constraint sets and projections: the Nehari manifold, the nodal Nehari
//! set, and the two-dimensional Miranda root finder used to project onto it.
//!
//! The nodal set is
//!
//! ```text
//!   𝓜 = { u : u± ≠ 0,  γ₊(u) = γ₋(u) = 0 },   γ±(u) = I′(u)[u±],
//! ```
//!
//! and the projection of a sign-changing field is a pair `(s,t)` with
//! `s u⁺ + t u⁻ ∈ 𝓜`. Both fiber maps are evaluated through moments of the
//! fixed decomposition (two Poisson solves total, O(N) per point after
//! that), which agree with the assembled functional to rounding because the
//! discrete potential is exactly quadratic in the source.

use serde::Serialize;
use thiserror::Error;

use crate::energy::{dirichlet_cross, energy, energy_norm_sq};
use crate::grid::{lp_norm, split_signs, vi_with, RadialField};
use crate::model::Nonlinearity;
use crate::poisson::{nonlocal_coupling, solve_poisson};

/// Map evaluation budget for one Miranda solve.
const EVAL_CAP: usize = 10_000;
/// Samples per box edge when checking the sign conditions.
const EDGE_SAMPLES: usize = 17;

#[derive(Debug, Error)]
pub enum ConstraintError {
    /// The fiber derivative stays positive at infinity: `λ∫φ_u u² ≥ |u|₄⁴`,
    /// so the ray through `u` never meets the Nehari set.
    #[error("no Nehari projection: asymptotic fiber coefficient {a_inf:.6e} is non-negative")]
    NoProjection { a_inf: f64 },
    /// Bracketing ran past its range without a sign change.
    #[error("fiber bracket failed at t = {t_reached:.3e} (last derivative {gamma_last:.6e})")]
    BracketFailure { t_reached: f64, gamma_last: f64 },
    /// A Miranda sign condition failed on a box edge.
    #[error("Miranda condition violated on edge {edge} at parameter {at:.6e}: value {value:.6e}")]
    EdgeConditionViolated {
        edge: &'static str,
        at: f64,
        value: f64,
    },
    /// The solve spent its evaluation budget without meeting the tolerance.
    #[error("projection did not converge within {evals} map evaluations")]
    NoConvergence { evals: usize },
    /// The field does not change sign, so no nodal decomposition exists.
    #[error("field has no sign change: both parts are required to be nonzero")]
    DegenerateSign,
}

// ---------------------------------------------------------------------------
// Nehari ray projection

/// `λ∫φ_u u² − |u|₄⁴`: the coefficient of `t⁴` in the large-`t` expansion of
/// `γ(tu)` for an asymptotically cubic model. Negative means the ray crosses
/// the Nehari set; non-negative means it never does.
pub fn asymptotic_coefficient(u: &RadialField, lambda: f64) -> f64 {
    let l4 = lp_norm(u, 4.0).expect("p = 4 is in range");
    lambda * nonlocal_coupling(u, u) - l4.powi(4)
}

/// Scale `t* > 0` with `γ(t*u) = 0`, i.e. `t*u` on the Nehari manifold.
/// The residual satisfies `|γ(t*u)| ≤ tol·t*²‖u‖²`.
pub fn nehari_project(
    u: &RadialField,
    nl: &Nonlinearity,
    lambda: f64,
    tol: f64,
) -> Result<f64, ConstraintError> {
    let g = u.grid();
    let norm_sq = energy_norm_sq(u);
    if norm_sq == 0.0 {
        return Err(ConstraintError::DegenerateSign);
    }
    let d = nonlocal_coupling(u, u);
    if nl.asymptotically_cubic() {
        let a_inf = asymptotic_coefficient(u, lambda);
        if a_inf >= 0.0 {
            return Err(ConstraintError::NoProjection { a_inf });
        }
    }
    let gamma = |t: f64| -> f64 {
        t * t * norm_sq + lambda * t.powi(4) * d
            - vi_with(g, |i| {
                let s = t * u.values()[i];
                nl.eval_f(s) * s
            })
    };
    let dgamma = |t: f64| -> f64 {
        2.0 * t * norm_sq + 4.0 * lambda * t.powi(3) * d
            - vi_with(g, |i| {
                let x = u.values()[i];
                let s = t * x;
                nl.eval_df(s) * x * s + nl.eval_f(s) * x
            })
    };

    // bracket a sign change of γ around t = 1
    let g1 = gamma(1.0);
    let (mut a, mut b);
    if g1 == 0.0 {
        return Ok(1.0);
    } else if g1 > 0.0 {
        a = 1.0;
        let mut gb;
        loop {
            b = a * 2.0;
            gb = gamma(b);
            if gb <= 0.0 {
                break;
            }
            if b > 1.0e6 {
                return Err(ConstraintError::BracketFailure {
                    t_reached: b,
                    gamma_last: gb,
                });
            }
            a = b;
        }
    } else {
        b = 1.0;
        let mut ga;
        loop {
            a = b * 0.5;
            ga = gamma(a);
            if ga >= 0.0 {
                break;
            }
            if a < 1.0e-6 {
                return Err(ConstraintError::BracketFailure {
                    t_reached: a,
                    gamma_last: ga,
                });
            }
            b = a;
        }
    }

    // bisect, then safeguarded Newton inside the bracket
    let target = |t: f64| tol * t * t * norm_sq;
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        let gm = gamma(m);
        if gm.abs() <= target(m) {
            return Ok(m);
        }
        if gm > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let mut t = 0.5 * (a + b);
    for _ in 0..15 {
        let gt = gamma(t);
        if gt.abs() <= target(t) {
            break;
        }
        if gt > 0.0 {
            a = t;
        } else {
            b = t;
        }
        let dg = dgamma(t);
        let mut next = t - gt / dg;
        if !(next > a && next < b) || !next.is_finite() {
            next = 0.5 * (a + b);
        }
        t = next;
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// fiber moments of a sign decomposition

/// Moments of the fixed decomposition `u = u⁺ + u⁻`. Every fiber quantity at
/// `(s,t)` reduces to scalar combinations of these plus one O(N) pairing
/// integral, so a projection costs two Poisson solves regardless of how many
/// points the Miranda solver visits.
pub(crate) struct Fiber<'a> {
    up: RadialField,
    um: RadialField,
    nl: &'a Nonlinearity,
    lambda: f64,
    /// `‖u⁺‖²`, `‖u⁻‖²` (conservative norms of the parts alone).
    pub ap: f64,
    pub am: f64,
    /// Dirichlet coupling of the parts across shared cells; ≥ 0 at a sign
    /// interface, exactly 0 when a whole cell of zeros separates them.
    pub cross: f64,
    pub dpp: f64,
    pub dpm: f64,
    pub dmp: f64,
    pub dmm: f64,
}

impl<'a> Fiber<'a> {
    pub fn new(
        u: &RadialField,
        nl: &'a Nonlinearity,
        lambda: f64,
    ) -> Result<Fiber<'a>, ConstraintError> {
        let (up, um) = split_signs(u);
        if up.values().iter().all(|v| *v == 0.0) || um.values().iter().all(|v| *v == 0.0) {
            return Err(ConstraintError::DegenerateSign);
        }
        let g = u.grid();
        let php = solve_poisson(&up).phi;
        let phm = solve_poisson(&um).phi;
        let sq = |f: &RadialField, i: usize| f.values()[i] * f.values()[i];
        Ok(Fiber {
            ap: energy_norm_sq(&up),
            am: energy_norm_sq(&um),
            cross: dirichlet_cross(&up, &um),
            dpp: vi_with(g, |i| php.values()[i] * sq(&up, i)),
            dpm: vi_with(g, |i| phm.values()[i] * sq(&up, i)),
            dmp: vi_with(g, |i| php.values()[i] * sq(&um, i)),
            dmm: vi_with(g, |i| phm.values()[i] * sq(&um, i)),
            up,
            um,
            nl,
            lambda,
        })
    }

    fn pairing(&self, part: &RadialField, c: f64) -> f64 {
        vi_with(self.up.grid(), |i| {
            let s = c * part.values()[i];
            self.nl.eval_f(s) * s
        })
    }

    fn pairing_deriv(&self, part: &RadialField, c: f64) -> f64 {
        vi_with(self.up.grid(), |i| {
            let x = part.values()[i];
            let s = c * x;
            self.nl.eval_df(s) * x * s + self.nl.eval_f(s) * x
        })
    }

    /// `γ₊(s u⁺ + t u⁻)`.
    pub fn gplus(&self, s: f64, t: f64) -> f64 {
        s * s * self.ap + s * t * self.cross
            + self.lambda * (s.powi(4) * self.dpp + s * s * t * t * self.dpm)
            - self.pairing(&self.up, s)
    }

    /// `γ₋(s u⁺ + t u⁻)`.
    pub fn gminus(&self, s: f64, t: f64) -> f64 {
        t * t * self.am + s * t * self.cross
            + self.lambda * (t.powi(4) * self.dmm + s * s * t * t * self.dmp)
            - self.pairing(&self.um, t)
    }

    /// Exact Jacobian of `(γ₊, γ₋)` with respect to `(s,t)`.
    pub fn jac(&self, s: f64, t: f64) -> [[f64; 2]; 2] {
        let j11 = 2.0 * s * self.ap + t * self.cross
            + self.lambda * (4.0 * s.powi(3) * self.dpp + 2.0 * s * t * t * self.dpm)
            - self.pairing_deriv(&self.up, s);
        let j12 = s * self.cross + 2.0 * self.lambda * s * s * t * self.dpm;
        let j21 = t * self.cross + 2.0 * self.lambda * s * t * t * self.dmp;
        let j22 = 2.0 * t * self.am + s * self.cross
            + self.lambda * (4.0 * t.powi(3) * self.dmm + 2.0 * s * s * t * self.dmp)
            - self.pairing_deriv(&self.um, t);
        [[j11, j12], [j21, j22]]
    }

    /// `I(s u⁺ + t u⁻)`.
    pub fn energy_at(&self, s: f64, t: f64) -> f64 {
        let norm = s * s * self.ap + 2.0 * s * t * self.cross + t * t * self.am;
        let nonlocal = s.powi(4) * self.dpp
            + t.powi(4) * self.dmm
            + s * s * t * t * (self.dpm + self.dmp);
        let potential = vi_with(self.up.grid(), |i| {
            self.nl.eval_big_f(s * self.up.values()[i]) + self.nl.eval_big_f(t * self.um.values()[i])
        });
        0.5 * norm + 0.25 * self.lambda * nonlocal - potential
    }

    /// Natural residual scale of this decomposition.
    pub fn scale(&self) -> f64 {
        self.ap + self.am
    }

    /// `s u⁺ + t u⁻` as a field.
    pub fn assemble(&self, s: f64, t: f64) -> RadialField {
        let vals: Vec<f64> = self
            .up
            .values()
            .iter()
            .zip(self.um.values())
            .map(|(p, m)| s * p + t * m)
            .collect();
        RadialField::new(self.up.grid(), vals).expect("finite combination")
    }
}

// ---------------------------------------------------------------------------
// Miranda solver

/// Closed parameter box `[s_lo, s_hi] × [t_lo, t_hi]`, all bounds positive.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MirandaBox {
    pub s_lo: f64,
    pub s_hi: f64,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl MirandaBox {
    pub fn new(s_lo: f64, s_hi: f64, t_lo: f64, t_hi: f64) -> Self {
        MirandaBox {
            s_lo,
            s_hi,
            t_lo,
            t_hi,
        }
    }

    fn validate(&self) -> Result<(), ConstraintError> {
        let ok = self.s_lo > 0.0
            && self.t_lo > 0.0
            && self.s_lo < self.s_hi
            && self.t_lo < self.t_hi
            && self.s_hi.is_finite()
            && self.t_hi.is_finite();
        if ok {
            Ok(())
        } else {
            Err(ConstraintError::EdgeConditionViolated {
                edge: "box bounds (need 0 < lo < hi)",
                at: self.s_lo,
                value: self.s_hi,
            })
        }
    }

    fn center(&self) -> (f64, f64) {
        (0.5 * (self.s_lo + self.s_hi), 0.5 * (self.t_lo + self.t_hi))
    }

    fn diameter(&self) -> f64 {
        (self.s_hi - self.s_lo).max(self.t_hi - self.t_lo)
    }
}

/// Worst-case signed margins of the Miranda conditions on the four edges of
/// `bx` in the standard orientation (`Φ₁ > 0` at `s_lo`, `< 0` at `s_hi`;
/// `Φ₂ > 0` at `t_lo`, `< 0` at `t_hi`), sampled at 17 points per edge.
/// All four positive means the sign hypothesis holds on the samples.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EdgeMargins {
    pub s_lo: f64,
    pub s_hi: f64,
    pub t_lo: f64,
    pub t_hi: f64,
}

pub fn edge_margins<F>(mut map: F, bx: &MirandaBox) -> EdgeMargins
where
    F: FnMut(f64, f64) -> (f64, f64),
{
    let mut m = EdgeMargins {
        s_lo: f64::INFINITY,
        s_hi: f64::INFINITY,
        t_lo: f64::INFINITY,
        t_hi: f64::INFINITY,
    };
    for k in 0..EDGE_SAMPLES {
        let frac = k as f64 / (EDGE_SAMPLES - 1) as f64;
        let t = bx.t_lo + frac * (bx.t_hi - bx.t_lo);
        let s = bx.s_lo + frac * (bx.s_hi - bx.s_lo);
        m.s_lo = m.s_lo.min(map(bx.s_lo, t).0);
        m.s_hi = m.s_hi.min(-map(bx.s_hi, t).0);
        m.t_lo = m.t_lo.min(map(s, bx.t_lo).1);
        m.t_hi = m.t_hi.min(-map(s, bx.t_hi).1);
    }
    m
}

/// Search record of one Miranda solve, serializable for `--trace` output.
#[derive(Debug, Clone, Default, Serialize)]
pub struct MirandaTrace {
    /// Nested boxes accepted by the bisection, `[s_lo, s_hi, t_lo, t_hi]`.
    pub boxes: Vec<[f64; 4]>,
    pub evals: usize,
    pub newton_steps: usize,
}

struct EdgeCheck {
    margin: f64,
    worst_edge: &'static str,
    worst_at: f64,
    worst_value: f64,
}

fn check_edges<F>(
    map: &mut F,
    evals: &mut usize,
    bx: &MirandaBox,
    sig1: f64,
    sig2: f64,
) -> EdgeCheck
where
    F: FnMut(f64, f64) -> (f64, f64),
{
    let mut out = EdgeCheck {
        margin: f64::INFINITY,
        worst_edge: "s_lo",
        worst_at: bx.t_lo,
        worst_value: 0.0,
    };
    let note = |margin: f64, edge: &'static str, at: f64, raw: f64, out: &mut EdgeCheck| {
        if margin < out.margin {
            out.margin = margin;
            out.worst_edge = edge;
            out.worst_at = at;
            out.worst_value = raw;
        }
    };
    for k in 0..EDGE_SAMPLES {
        let frac = k as f64 / (EDGE_SAMPLES - 1) as f64;
        let t = bx.t_lo + frac * (bx.t_hi - bx.t_lo);
        let s = bx.s_lo + frac * (bx.s_hi - bx.s_lo);
        let v = map(bx.s_lo, t).0;
        note(sig1 * v, "s_lo", t, v, &mut out);
        let v = map(bx.s_hi, t).0;
        note(-sig1 * v, "s_hi", t, v, &mut out);
        let v = map(s, bx.t_lo).1;
        note(sig2 * v, "t_lo", s, v, &mut out);
        let v = map(s, bx.t_hi).1;
        note(-sig2 * v, "t_hi", s, v, &mut out);
        *evals += 4;
    }
    out
}

/// Solve `Φ(s,t) = 0` on a box whose edges satisfy the Miranda sign
/// conditions: verify the conditions (trying both orientations per
/// component), bisect the box keeping a sub-box that still satisfies them,
/// and finish with a damped finite-difference Newton iteration from the
/// center of the localized box. If no sub-box qualifies during bisection
/// (root on an interior edge), Newton starts from the current center
/// instead. Fails with `NoConvergence` once `EVAL_CAP` map evaluations are
/// spent without pushing the residual below `tol`.
pub fn miranda_solve<F>(
    mut map: F,
    bx: &MirandaBox,
    tol: f64,
    mut trace: Option<&mut MirandaTrace>,
) -> Result<(f64, f64), ConstraintError>
where
    F: FnMut(f64, f64) -> (f64, f64),
{
    bx.validate()?;
    let mut evals = 0usize;

    // orientation of each component from the full box edges
    let std_check = check_edges(&mut map, &mut evals, bx, 1.0, 1.0);
    let (sig1, sig2);
    if std_check.margin > 0.0 {
        sig1 = 1.0;
        sig2 = 1.0;
    } else {
        let mut best: Option<(f64, f64)> = None;
        for (a, b) in [(1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            if check_edges(&mut map, &mut evals, bx, a, b).margin > 0.0 {
                best = Some((a, b));
                break;
            }
        }
        match best {
            Some((a, b)) => {
                sig1 = a;
                sig2 = b;
            }
            None => {
                return Err(ConstraintError::EdgeConditionViolated {
                    edge: std_check.worst_edge,
                    at: std_check.worst_at,
                    value: std_check.worst_value,
                });
            }
        }
    }

    let mut cur = *bx;
    if let Some(tr) = trace.as_deref_mut() {
        tr.boxes
            .push([cur.s_lo, cur.s_hi, cur.t_lo, cur.t_hi]);
    }

    // bisect while the sign conditions keep certifying a sub-box
    let stop_diam = 1.0e-3 * (1.0 + bx.diameter());
    while cur.diameter() > stop_diam && evals < EVAL_CAP * 3 / 4 {
        let (sm, tm) = cur.center();
        let subs = [
            MirandaBox::new(cur.s_lo, sm, cur.t_lo, tm),
            MirandaBox::new(cur.s_lo, sm, tm, cur.t_hi),
            MirandaBox::new(sm, cur.s_hi, cur.t_lo, tm),
            MirandaBox::new(sm, cur.s_hi, tm, cur.t_hi),
        ];
        let mut pick: Option<(usize, f64)> = None;
        for (k, sb) in subs.iter().enumerate() {
            if check_edges(&mut map, &mut evals, sb, sig1, sig2).margin > 0.0 {
                let (cs, ct) = sb.center();
                let (f1, f2) = map(cs, ct);
                evals += 1;
                let res = f1.abs().max(f2.abs());
                // lexicographic preference on ties comes from strict `<`
                if pick.map_or(true, |(_, best)| res < best) {
                    pick = Some((k, res));
                }
            }
        }
        match pick {
            Some((k, _)) => {
                cur = subs[k];
                if let Some(tr) = trace.as_deref_mut() {
                    tr.boxes
                        .push([cur.s_lo, cur.s_hi, cur.t_lo, cur.t_hi]);
                }
            }
            None => break,
        }
    }

    // damped Newton from the center, clamped near the original box
    let clamp = |s: f64, t: f64| -> (f64, f64) {
        (
            s.clamp(0.5 * bx.s_lo, 2.0 * bx.s_hi),
            t.clamp(0.5 * bx.t_lo, 2.0 * bx.t_hi),
        )
    };
    let (mut s, mut t) = cur.center();
    let mut newton_steps = 0usize;
    loop {
        let (f1, f2) = map(s, t);
        evals += 1;
        let res = f1.abs().max(f2.abs());
        if res <= tol {
            if let Some(tr) = trace {
                tr.evals = evals;
                tr.newton_steps = newton_steps;
            }
            return Ok((s, t));
        }
        if evals >= EVAL_CAP {
            return Err(ConstraintError::NoConvergence { evals });
        }
        let hs = 1.0e-6 * (1.0 + s.abs());
        let ht = 1.0e-6 * (1.0 + t.abs());
        let (f1s, f2s) = map(s + hs, t);
        let (f1t, f2t) = map(s, t + ht);
        evals += 2;
        let j11 = (f1s - f1) / hs;
        let j21 = (f2s - f2) / hs;
        let j12 = (f1t - f1) / ht;
        let j22 = (f2t - f2) / ht;
        let det = j11 * j22 - j12 * j21;
        if !det.is_finite() || det.abs() < 1.0e-300 {
            return Err(ConstraintError::NoConvergence { evals });
        }
        let ds = (j22 * f1 - j12 * f2) / det;
        let dt = (j11 * f2 - j21 * f1) / det;
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha >= 1.0e-6 {
            let (cs, ct) = clamp(s - alpha * ds, t - alpha * dt);
            let (g1, g2) = map(cs, ct);
            evals += 1;
            if g1.abs().max(g2.abs()) < res {
                s = cs;
                t = ct;
                accepted = true;
                break;
            }
            alpha *= 0.5;
            if evals >= EVAL_CAP {
                return Err(ConstraintError::NoConvergence { evals });
            }
        }
        if !accepted {
            return Err(ConstraintError::NoConvergence { evals });
        }
        newton_steps += 1;
    }
}

// ---------------------------------------------------------------------------
// projection onto the nodal Nehari set

/// A field on the nodal Nehari set together with its membership certificate.
#[derive(Debug, Clone)]
pub struct NodalDecomposition {
    pub u: RadialField,
    pub u_plus: RadialField,
    pub u_minus: RadialField,
    /// Scales applied to the input parts: `u = scale_plus·u⁺ + scale_minus·u⁻`.
    pub scale_plus: f64,
    pub scale_minus: f64,
    /// `γ₊(u)` and `γ₋(u)` re-evaluated from the assembled field.
    pub residual_gamma_plus: f64,
    pub residual_gamma_minus: f64,
    /// Both residuals within tolerance and both parts nonzero in `L⁴`.
    pub in_m: bool,
}

/// Default residual tolerance for a projection starting from `u`:
/// `1e−9·(‖u⁺‖² + ‖u⁻‖²)`.
pub fn default_projection_tol(u: &RadialField) -> f64 {
    let (up, um) = split_signs(u);
    1.0e-9 * (energy_norm_sq(&up) + energy_norm_sq(&um))
}

/// Exact-Jacobian damped Newton on the fiber maps, clamped to positive
/// scales. Returns the best point reached and the number of iterations.
fn newton_on_fiber(
    fiber: &Fiber,
    mut s: f64,
    mut t: f64,
    lo: (f64, f64),
    hi: (f64, f64),
    target: f64,
    max_iter: usize,
) -> (f64, f64, usize) {
    let mut iters = 0;
    for _ in 0..max_iter {
        let (f1, f2) = (fiber.gplus(s, t), fiber.gminus(s, t));
        let res = f1.abs().max(f2.abs());
        if res <= target {
            break;
        }
        let j = fiber.jac(s, t);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if !det.is_finite() || det.abs() < 1.0e-300 {
            break;
        }
        let ds = (j[1][1] * f1 - j[0][1] * f2) / det;
        let dt = (j[0][0] * f2 - j[1][0] * f1) / det;
        let mut alpha = 1.0;
        let mut moved = false;
        while alpha >= 1.0e-8 {
            let cs = (s - alpha * ds).clamp(lo.0, hi.0);
            let ct = (t - alpha * dt).clamp(lo.1, hi.1);
            let (g1, g2) = (fiber.gplus(cs, ct), fiber.gminus(cs, ct));
            if g1.abs().max(g2.abs()) < res {
                s = cs;
                t = ct;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        iters += 1;
        if !moved {
            break;
        }
    }
    (s, t, iters)
}

fn finish_projection(
    fiber: &Fiber,
    s: f64,
    t: f64,
    tol: f64,
    evals: usize,
) -> Result<NodalDecomposition, ConstraintError> {
    let w = fiber.assemble(s, t);
    let rep = energy(&w, fiber.nl, fiber.lambda);
    let (wp, wm) = split_signs(&w);
    let lp = lp_norm(&wp, 4.0).expect("p = 4 is in range");
    let lm = lp_norm(&wm, 4.0).expect("p = 4 is in range");
    let in_m = rep.gamma_plus.abs() <= tol
        && rep.gamma_minus.abs() <= tol
        && lp > 0.0
        && lm > 0.0;
    if !in_m {
        return Err(ConstraintError::NoConvergence { evals });
    }
    Ok(NodalDecomposition {
        u: w,
        u_plus: wp,
        u_minus: wm,
        scale_plus: s,
        scale_minus: t,
        residual_gamma_plus: rep.gamma_plus,
        residual_gamma_minus: rep.gamma_minus,
        in_m,
    })
}

/// Project a sign-changing field onto the nodal Nehari set by searching the
/// given box with the Miranda solver, then polishing with the exact fiber
/// Jacobian. The returned decomposition carries residuals re-evaluated from
/// the assembled field, not the moment formulas.
pub fn nodal_project(
    u: &RadialField,
    nl: &Nonlinearity,
    lambda: f64,
    bx: &MirandaBox,
    tol: f64,
    mut trace: Option<&mut MirandaTrace>,
) -> Result<NodalDecomposition, ConstraintError> {
    let fiber = Fiber::new(u, nl, lambda)?;
    let (s0, t0) = miranda_solve(
        |s, t| (fiber.gplus(s, t), fiber.gminus(s, t)),
        bx,
        tol,
        trace.as_deref_mut(),
    )?;
    let evals = trace.as_deref().map_or(0, |tr| tr.evals);
    let (s, t, _) = newton_on_fiber(
        &fiber,
        s0,
        t0,
        (0.25 * bx.s_lo, 0.25 * bx.t_lo),
        (4.0 * bx.s_hi, 4.0 * bx.t_hi),
        1.0e-13 * fiber.scale(),
        40,
    );
    finish_projection(&fiber, s, t, tol, evals)
}

/// Projection with a warm starting pair instead of a box search: pure
/// Newton from `warm`, used by the solver where the iterate is already
/// near the set and `(1,1)` is an excellent guess.
pub(crate) fn nodal_project_warm(
    u: &RadialField,
    nl: &Nonlinearity,
    lambda: f64,
    warm: (f64, f64),
    tol: f64,
) -> Result<NodalDecomposition, ConstraintError> {
    let fiber = Fiber::new(u, nl, lambda)?;
    let lo = (warm.0 / 64.0, warm.1 / 64.0);
    let hi = (warm.0 * 64.0, warm.1 * 64.0);
    let (s, t, iters) = newton_on_fiber(
        &fiber,
        warm.0,
        warm.1,
        lo,
        hi,
        1.0e-13 * fiber.scale(),
        60,
    );
    finish_projection(&fiber, s, t, tol, iters)
}
