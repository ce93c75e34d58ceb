//! Uniform radial mesh on `[0, R_max]` with trapezoid quadrature.
//!
//! Every integral in the crate is a volume integral over the ball of radius
//! `R_max` in ℝ³ reduced to one dimension,
//!
//! ```text
//!   ∫ g dx  =  4π ∫₀^{R_max} g(r) r² dr  ≈  4π Σ_i w_i g(r_i) r_i²,
//! ```
//!
//! with the composite trapezoid weights `w = (h/2, h, …, h, h/2)`. All higher
//! modules integrate through this one rule; several exactness properties
//! (symmetry of the nonlocal coupling, additivity of split fields) rely on the
//! weights being shared verbatim, so no module rolls its own quadrature.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

pub(crate) const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Errors from mesh construction and field validation.
#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid needs at least 16 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("outer radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("Lp exponent must lie in [1, 6], got {0}")]
    ExponentOutOfRange(f64),
    #[error("field has {values} values but the grid has {nodes} nodes")]
    LengthMismatch { values: usize, nodes: usize },
    #[error("non-finite value at node {node} (r = {r})")]
    NonFinite { node: usize, r: f64 },
}

/// Uniform radial mesh: nodes `r_i = i·h`, `h = R_max/(N−1)`, plus
/// trapezoid quadrature weights.
///
/// Grids are immutable and shared behind [`Arc`]; every [`RadialField`]
/// holds a handle to the grid it lives on.
#[derive(Debug)]
pub struct RadialGrid {
    r_max: f64,
    h: f64,
    nodes: Vec<f64>,
    quad_weights: Vec<f64>,
}

/// Build the mesh. Rejects `n < 16` and non-positive or non-finite `r_max`.
pub fn make_grid(r_max: f64, n: usize) -> Result<Arc<RadialGrid>, GridError> {
    if n < 16 {
        return Err(GridError::TooFewNodes(n));
    }
    if !(r_max.is_finite() && r_max > 0.0) {
        return Err(GridError::BadRadius(r_max));
    }
    let h = r_max / (n - 1) as f64;
    let nodes: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let mut quad_weights = vec![h; n];
    quad_weights[0] = 0.5 * h;
    quad_weights[n - 1] = 0.5 * h;
    Ok(Arc::new(RadialGrid {
        r_max,
        h,
        nodes,
        quad_weights,
    }))
}

impl RadialGrid {
    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least 16 nodes
    }

    /// Outer radius `R_max`.
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Mesh spacing `h = R_max/(N−1)`.
    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Node radii `r_0 = 0, …, r_{N−1} = R_max`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Trapezoid weights `(h/2, h, …, h, h/2)`.
    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    /// Radius of node `i`.
    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }
}

/// `4π Σ_i w_i f(i) r_i²` without materializing the integrand.
pub(crate) fn vi_with(grid: &RadialGrid, f: impl Fn(usize) -> f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..grid.len() {
        let r = grid.nodes[i];
        acc += grid.quad_weights[i] * f(i) * r * r;
    }
    FOUR_PI * acc
}

/// Node values of a radial function, tied to its grid.
///
/// Values are finite at every node; the constructor enforces this. Fields are
/// immutable: operations return new fields, so sharing across threads is safe.
#[derive(Debug, Clone)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialField {
    /// Wrap node values, checking length and finiteness.
    pub fn new(grid: &Arc<RadialGrid>, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch {
                values: values.len(),
                nodes: grid.len(),
            });
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(GridError::NonFinite {
                    node: i,
                    r: grid.node(i),
                });
            }
        }
        Ok(RadialField {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// The zero field.
    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        RadialField {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.len()],
        }
    }

    /// Sample `f` at the nodes. Panics on non-finite samples.
    pub fn from_fn(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values).expect("sampled function produced a non-finite value")
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// New field with values `c·u`.
    pub fn scaled(&self, c: f64) -> RadialField {
        let values = self.values.iter().map(|v| c * v).collect();
        RadialField {
            grid: Arc::clone(&self.grid),
            values,
        }
    }

    /// New field with values `f(u_i)` node-wise.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> RadialField {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        RadialField::new(&self.grid, values).expect("map produced a non-finite value")
    }

    /// CSV rendering, columns `r,value`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 48 + 16);
        out.push_str("r,value\n");
        for (r, v) in self.grid.nodes().iter().zip(&self.values) {
            let _ = writeln!(out, "{:.16e},{:.16e}", r, v);
        }
        out
    }

    /// Write [`Self::to_csv`] to a file.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }

    pub(crate) fn from_values_unchecked(grid: &Arc<RadialGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        RadialField {
            grid: Arc::clone(grid),
            values,
        }
    }
}

/// `∫ g dx = 4π Σ w_i g_i r_i²` for an already-sampled integrand.
pub fn volume_integral(g: &RadialField) -> f64 {
    vi_with(&g.grid, |i| g.values[i])
}

/// Centered difference quotient, second-order one-sided at both ends.
pub(crate) fn sampled_derivative(u: &RadialField) -> Vec<f64> {
    let n = u.values.len();
    let h = u.grid.spacing();
    let v = &u.values;
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    for i in 1..n - 1 {
        d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
    d
}

/// Squared H¹ norm `∫(|∇u|² + u²) dx` with sampled derivatives.
///
/// The derivative is the centered quotient (one-sided second-order at the two
/// boundary nodes), so the value converges at O(h²) for smooth fields. The
/// energy module keeps its own discrete Dirichlet form, built from cell-midpoint
/// flux differences, whose gradient is exactly the discrete energy gradient;
/// this one is the plain measurement norm.
pub fn h1_norm_sq(u: &RadialField) -> f64 {
    let d = sampled_derivative(u);
    vi_with(&u.grid, |i| d[i] * d[i] + u.values[i] * u.values[i])
}

/// `|u|_p = (∫|u|^p dx)^{1/p}` for `p ∈ [1, 6]`.
pub fn lp_norm(u: &RadialField, p: f64) -> Result<f64, GridError> {
    if !(p.is_finite() && (1.0..=6.0).contains(&p)) {
        return Err(GridError::ExponentOutOfRange(p));
    }
    let s = vi_with(&u.grid, |i| u.values[i].abs().powf(p));
    Ok(s.powf(1.0 / p))
}

/// Node-wise positive and negative parts: `u⁺ = max(u,0)`, `u⁻ = min(u,0)`,
/// so `u = u⁺ + u⁻` holds exactly at every node.
pub fn split_signs(u: &RadialField) -> (RadialField, RadialField) {
    let plus: Vec<f64> = u.values.iter().map(|&v| v.max(0.0)).collect();
    let minus: Vec<f64> = u.values.iter().map(|&v| v.min(0.0)).collect();
    (
        RadialField::from_values_unchecked(&u.grid, plus),
        RadialField::from_values_unchecked(&u.grid, minus),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Closed forms used as oracles below:
    //   ball of radius 1:        ∫ 1 dx = 4π/3
    //   gaussian e^{-r²}:        ∫ e^{-r²} dx = π^{3/2}
    //   e^{-r/2} on [0, R]:      4π (16 − e^{-R/2}(2R² + 8R + 16))
    //   gaussian e^{-r²/2}:      ∫(|∇u|² + u²) dx = (5/2) π^{3/2}

    fn grid(r_max: f64, n: usize) -> Arc<RadialGrid> {
        make_grid(r_max, n).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(make_grid(10.0, 2), Err(GridError::TooFewNodes(2))));
        assert!(matches!(make_grid(10.0, 15), Err(GridError::TooFewNodes(15))));
        assert!(matches!(make_grid(0.0, 64), Err(GridError::BadRadius(_))));
        assert!(matches!(make_grid(-3.0, 64), Err(GridError::BadRadius(_))));
        assert!(matches!(
            make_grid(f64::INFINITY, 64),
            Err(GridError::BadRadius(_))
        ));
        assert!(make_grid(10.0, 16).is_ok());
    }

    #[test]
    fn node_layout_and_weights() {
        let g = grid(30.0, 3001);
        assert_eq!(g.len(), 3001);
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(3000), 30.0);
        assert!((g.spacing() - 0.01).abs() < 1e-15);
        let w = g.quad_weights();
        assert!((w[0] - 0.005).abs() < 1e-18);
        assert!((w[3000] - 0.005).abs() < 1e-18);
        assert!((w[1500] - 0.01).abs() < 1e-18);
        // weights sum to R_max within 1e-12 relative
        let sum: f64 = w.iter().sum();
        assert!((sum - 30.0).abs() <= 1e-12 * 30.0, "sum = {sum}");
    }

    #[test]
    fn ball_volume() {
        // indicator of the unit ball; jump node carries the half value so the
        // trapezoid rule keeps its O(h²) accuracy across the discontinuity
        let g = grid(2.0, 2049); // node exactly at r = 1
        let u = RadialField::from_fn(&g, |r| {
            if r < 1.0 {
                1.0
            } else if r == 1.0 {
                0.5
            } else {
                0.0
            }
        });
        let v = volume_integral(&u);
        let exact = FOUR_PI / 3.0;
        assert!(
            (v - exact).abs() <= 1e-6 * exact,
            "v = {v}, exact = {exact}"
        );
    }

    #[test]
    fn gaussian_volume() {
        let g = grid(30.0, 4096);
        let u = RadialField::from_fn(&g, |r| (-r * r).exp());
        let v = volume_integral(&u);
        let exact = std::f64::consts::PI.powf(1.5);
        assert!(
            (v - exact).abs() <= 1e-8 * exact,
            "v = {v}, exact = {exact}"
        );
    }

    #[test]
    fn refinement_is_second_order() {
        // integrand with a nonzero boundary derivative so the trapezoid error
        // is genuinely O(h²) rather than superconvergent
        let r_max = 10.0;
        let exact = FOUR_PI * (16.0 - (-r_max / 2.0_f64).exp() * (2.0 * r_max * r_max + 8.0 * r_max + 16.0));
        let mut errs = Vec::new();
        for n in [513usize, 1025, 2049] {
            let g = grid(r_max, n);
            let u = RadialField::from_fn(&g, |r| (-r / 2.0).exp());
            errs.push((volume_integral(&u) - exact).abs());
        }
        // halving h divides the error by about 4
        for k in 0..errs.len() - 1 {
            let ratio = errs[k] / errs[k + 1];
            assert!(
                (3.0..5.0).contains(&ratio),
                "errors {errs:?}, ratio {ratio}"
            );
        }
    }

    #[test]
    fn h1_norm_gaussian_oracle() {
        let exact = 2.5 * std::f64::consts::PI.powf(1.5);
        let g1 = grid(30.0, 2048);
        let u1 = RadialField::from_fn(&g1, |r| (-0.5 * r * r).exp());
        let e1 = (h1_norm_sq(&u1) - exact).abs() / exact;
        let g2 = grid(30.0, 4096);
        let u2 = RadialField::from_fn(&g2, |r| (-0.5 * r * r).exp());
        let e2 = (h1_norm_sq(&u2) - exact).abs() / exact;
        let h1 = g1.spacing();
        assert!(e1 <= 10.0 * h1 * h1, "e1 = {e1}, h² = {}", h1 * h1);
        // O(h²): doubling N divides the error by about 4
        let ratio = e1 / e2;
        assert!((3.0..5.0).contains(&ratio), "e1 = {e1}, e2 = {e2}");
    }

    #[test]
    fn h1_norm_scales_exactly_by_four() {
        let g = grid(20.0, 1024);
        let u = RadialField::from_fn(&g, |r| (1.0 + r).recip() * (-0.3 * r).exp() * r);
        let doubled = u.scaled(2.0);
        // scaling by 2 is exact in floating point, so the quotient is exactly 4
        assert_eq!(h1_norm_sq(&doubled), 4.0 * h1_norm_sq(&u));
    }

    #[test]
    fn lp_norm_ball_and_validation() {
        let g = grid(2.0, 2049);
        let u = RadialField::from_fn(&g, |r| {
            if r < 1.0 {
                1.0
            } else if r == 1.0 {
                0.5
            } else {
                0.0
            }
        });
        // |χ_B|_4 = (4π/3)^{1/4}; only first-order accurate because the half
        // value of u is not the half value of u⁴ (the jump midpoint of the
        // integrand is missed), giving error ≈ h·4π·(1/2−1/16)/(4·|B|)
        let exact = (FOUR_PI / 3.0).powf(0.25);
        let lp = lp_norm(&u, 4.0).unwrap();
        assert!((lp - exact).abs() <= 5e-4 * exact, "lp = {lp}");
        assert!(matches!(
            lp_norm(&u, 0.5),
            Err(GridError::ExponentOutOfRange(_))
        ));
        assert!(matches!(
            lp_norm(&u, 6.5),
            Err(GridError::ExponentOutOfRange(_))
        ));
        assert!(lp_norm(&u, 1.0).is_ok());
        assert!(lp_norm(&u, 6.0).is_ok());
    }

    #[test]
    fn split_signs_partition() {
        let g = grid(10.0, 512);
        let u = RadialField::from_fn(&g, |r| (r - 3.0) * (-0.2 * r).exp());
        let (up, um) = split_signs(&u);
        for i in 0..g.len() {
            assert!(up.values()[i] >= 0.0);
            assert!(um.values()[i] <= 0.0);
            assert_eq!(up.values()[i] + um.values()[i], u.values()[i]);
            assert_eq!(up.values()[i] * um.values()[i], 0.0);
        }
        // L² part of the split is exact: u² = (u⁺)² + (u⁻)² node-wise
        let l2 = volume_integral(&u.map(|v| v * v));
        let l2_parts = volume_integral(&up.map(|v| v * v)) + volume_integral(&um.map(|v| v * v));
        assert!((l2 - l2_parts).abs() <= 1e-13 * l2);
    }

    #[test]
    fn h1_split_deviation_is_first_order_at_a_plain_crossing() {
        // sign change at r = 3.7, not a node: the split parts have derivative
        // kinks spread over the 4 cells around the crossing, each contributing
        // an O(h) boundary term to the H¹ split deviation
        let f = |r: f64| (r - 3.7) * (-0.3 * r).exp();
        let mut devs = Vec::new();
        for n in [1024usize, 2048, 4096] {
            let g = grid(12.0, n);
            let u = RadialField::from_fn(&g, f);
            let (up, um) = split_signs(&u);
            let dev = (h1_norm_sq(&u) - h1_norm_sq(&up) - h1_norm_sq(&um)).abs();
            // measured constant: dev/h stays below 25 for this profile
            assert!(dev <= 25.0 * g.spacing(), "dev = {dev}, h = {}", g.spacing());
            devs.push(dev);
        }
        // O(h): halving h roughly halves the deviation
        assert!(devs[2] <= 0.75 * devs[0], "devs = {devs:?}");
    }

    #[test]
    fn h1_split_exact_when_u_vanishes_on_whole_cells() {
        // u ≡ 0 on [4,5]: every node sees at most one nonzero split part in its
        // centered stencil, so the H¹ split has no cross terms at all
        let f = |r: f64| {
            if r < 4.0 {
                -((4.0 - r) * (r / 4.0).powi(2))
            } else if r > 5.0 {
                (r - 5.0) * (-(r - 5.0)).exp()
            } else {
                0.0
            }
        };
        let g = grid(12.0, 1536);
        let u = RadialField::from_fn(&g, f);
        let (up, um) = split_signs(&u);
        let total = h1_norm_sq(&u);
        let dev = (total - h1_norm_sq(&up) - h1_norm_sq(&um)).abs();
        assert!(dev <= 1e-12 * total, "dev = {dev}");
    }

    #[test]
    fn csv_round_trip() {
        let g = grid(5.0, 64);
        let u = RadialField::from_fn(&g, |r| (0.37 * r).sin() / 3.0 + 1e-17 * r);
        let text = u.to_csv();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("r,value"));
        for (i, line) in lines.enumerate() {
            let (rs, vs) = line.split_once(',').unwrap();
            // 17 significant digits round-trip f64 exactly
            assert_eq!(rs.parse::<f64>().unwrap(), g.node(i));
            assert_eq!(vs.parse::<f64>().unwrap(), u.values()[i]);
        }
    }

    #[test]
    fn field_validation() {
        let g = grid(5.0, 64);
        assert!(matches!(
            RadialField::new(&g, vec![0.0; 63]),
            Err(GridError::LengthMismatch { values: 63, nodes: 64 })
        ));
        let mut vals = vec![0.0; 64];
        vals[10] = f64::NAN;
        assert!(matches!(
            RadialField::new(&g, vals),
            Err(GridError::NonFinite { node: 10, .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn volume_integral_is_linear(
            a in -2.0..2.0f64,
            b in -2.0..2.0f64,
            v1 in proptest::collection::vec(-1.0..1.0f64, 128),
            v2 in proptest::collection::vec(-1.0..1.0f64, 128),
        ) {
            let g = grid(10.0, 128);
            let f1 = RadialField::new(&g, v1).unwrap();
            let f2 = RadialField::new(&g, v2).unwrap();
            let combo: Vec<f64> = f1.values().iter().zip(f2.values())
                .map(|(x, y)| a * x + b * y)
                .collect();
            let lhs = volume_integral(&RadialField::new(&g, combo).unwrap());
            let rhs = a * volume_integral(&f1) + b * volume_integral(&f2);
            let scale = volume_integral(&f1.map(f64::abs)).abs().max(volume_integral(&f2.map(f64::abs)).abs());
            let scale = (a.abs() + b.abs()).max(1.0) * scale.max(1e-3);
            prop_assert!((lhs - rhs).abs() <= 1e-13 * scale, "lhs={lhs} rhs={rhs}");
        }

        #[test]
        fn lp_norm_is_absolutely_homogeneous(
            t in -3.0..3.0f64,
            p in 1.0..6.0f64,
            v in proptest::collection::vec(-1.0..1.0f64, 128),
        ) {
            let g = grid(10.0, 128);
            let u = RadialField::new(&g, v).unwrap();
            let lhs = lp_norm(&u.scaled(t), p).unwrap();
            let rhs = t.abs() * lp_norm(&u, p).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-6), "lhs={lhs} rhs={rhs}");
        }

        #[test]
        fn split_reassembles_everywhere(v in proptest::collection::vec(-5.0..5.0f64, 128)) {
            let g = grid(10.0, 128);
            let u = RadialField::new(&g, v).unwrap();
            let (up, um) = split_signs(&u);
            for i in 0..128 {
                prop_assert_eq!(up.values()[i] + um.values()[i], u.values()[i]);
                prop_assert!(up.values()[i] * um.values()[i] == 0.0);
            }
        }
    }
}
