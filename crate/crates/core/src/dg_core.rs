//! Reference element, quadrature, interface operators, interior penalty and
//! the mesh-aligned splittings of velocity and diffusivity.
//!
//! Conventions: the parent triangle has vertices (0,0), (1,0), (0,1) with
//! `phi_h = [1 - xi - eta, xi, eta]`; the parent segment is `zeta in [-1, 1]`
//! with `phi_z = [(1 + zeta)/2, (1 - zeta)/2]` (top, bottom). Prism node `k`
//! has horizontal index `k % 3` and vertical index `k / 3`, so nodes 0..3 sit
//! on the top face and 3..6 on the bottom face.

use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Gauss-Legendre 2-point abscissa on [-1, 1].
pub const GAUSS_PT: f64 = 0.577_350_269_189_625_8;
/// Gauss points on [-1, 1]; both weights are 1.
pub const GAUSS2: [f64; 2] = [-GAUSS_PT, GAUSS_PT];

/// Edge trace weights `(w_a, w_b)` of the two edge endpoints at each Gauss
/// point, for an edge parameterized from vertex `a` (s = -1) to `b` (s = 1).
pub const EDGE_W: [(f64, f64); 2] = [
    (0.5 * (1.0 + GAUSS_PT), 0.5 * (1.0 - GAUSS_PT)),
    (0.5 * (1.0 - GAUSS_PT), 0.5 * (1.0 + GAUSS_PT)),
];

/// Vertical basis values `[top, bottom]` at each Gauss point in `zeta`.
pub const ZETA_PHI: [[f64; 2]; 2] = [
    [0.5 * (1.0 - GAUSS_PT), 0.5 * (1.0 + GAUSS_PT)],
    [0.5 * (1.0 + GAUSS_PT), 0.5 * (1.0 - GAUSS_PT)],
];

/// d(phi_z)/d(zeta) for `[top, bottom]`.
pub const DPHI_Z: [f64; 2] = [0.5, -0.5];

/// Parent-coordinate gradients of `phi_h`.
pub const DPHI_H: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriPoint {
    pub xi: f64,
    pub eta: f64,
    /// Weight on the parent triangle (weights sum to 1/2).
    pub w: f64,
    /// `phi_h` at the point.
    pub phi: [f64; 3],
}

/// Symmetric 6-point rule, exact for degree 4 on the triangle.
pub fn tri_rule() -> &'static [TriPoint; 6] {
    static RULE: OnceLock<[TriPoint; 6]> = OnceLock::new();
    RULE.get_or_init(|| {
        let s10 = 10f64.sqrt();
        let r = (38.0 - 44.0 * (0.4f64).sqrt()).sqrt();
        let a = (8.0 - s10 + r) / 18.0;
        let b = (8.0 - s10 - r) / 18.0;
        let q = (213125.0 - 53320.0 * s10).sqrt();
        let wa = 0.5 * (620.0 + q) / 3720.0;
        let wb = 0.5 * (620.0 - q) / 3720.0;
        let mk = |xi: f64, eta: f64, w: f64| TriPoint { xi, eta, w, phi: phi_h(xi, eta) };
        [
            mk(a, a, wa),
            mk(1.0 - 2.0 * a, a, wa),
            mk(a, 1.0 - 2.0 * a, wa),
            mk(b, b, wb),
            mk(1.0 - 2.0 * b, b, wb),
            mk(b, 1.0 - 2.0 * b, wb),
        ]
    })
}

pub fn phi_h(xi: f64, eta: f64) -> [f64; 3] {
    [1.0 - xi - eta, xi, eta]
}

pub fn phi_z(zeta: f64) -> [f64; 2] {
    [0.5 * (1.0 + zeta), 0.5 * (1.0 - zeta)]
}

/// Prism basis `phi_h[k % 3] * phi_z[k / 3]`.
pub fn phi_prism(xi: f64, eta: f64, zeta: f64) -> [f64; 6] {
    let h = phi_h(xi, eta);
    let z = phi_z(zeta);
    std::array::from_fn(|k| h[k % 3] * z[k / 3])
}

/// Parent nodes of the prism, `(xi, eta, zeta)`.
pub fn prism_nodes() -> [[f64; 3]; 6] {
    let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    std::array::from_fn(|k| [tri[k % 3][0], tri[k % 3][1], if k < 3 { 1.0 } else { -1.0 }])
}

/// 2D P1 mass matrix `J2D/24 [[2,1,1],[1,2,1],[1,1,2]]`.
pub fn mass_h(j2d: f64) -> [[f64; 3]; 3] {
    let a = j2d / 24.0;
    [[2.0 * a, a, a], [a, 2.0 * a, a], [a, a, 2.0 * a]]
}

/// Applies the inverse of [`mass_h`].
pub fn mass_h_inv(j2d: f64, v: [f64; 3]) -> [f64; 3] {
    let c = 6.0 / j2d;
    [
        c * (3.0 * v[0] - v[1] - v[2]),
        c * (3.0 * v[1] - v[0] - v[2]),
        c * (3.0 * v[2] - v[0] - v[1]),
    ]
}

pub fn iface_mean(a_int: f64, a_ext: f64) -> f64 {
    0.5 * (a_int + a_ext)
}

pub fn iface_diff(a_int: f64, a_ext: f64) -> f64 {
    0.5 * (a_int - a_ext)
}

pub fn iface_max(a_int: f64, a_ext: f64) -> f64 {
    a_int.max(a_ext)
}

/// Upwind selection; a zero normal velocity resolves to the interior value.
pub fn iface_upwind(a_int: f64, a_ext: f64, n_dot_u: f64) -> f64 {
    if n_dot_u >= 0.0 {
        a_int
    } else {
        a_ext
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams {
    /// Average number of neighbors.
    pub n0: f64,
    /// Polynomial degree.
    pub order: f64,
    /// Spatial dimension.
    pub dim: f64,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        PenaltyParams { n0: 5.0, order: 1.0, dim: 3.0 }
    }
}

/// Interior penalty coefficient `N0 (o+1)(o+d) / (2 d min(L_int, L_ext))`.
pub fn penalty_sigma(p: &PenaltyParams, l_int: f64, l_ext: f64) -> Result<f64> {
    for l in [l_int, l_ext] {
        if !(l > 0.0) {
            return Err(Error::NonPositiveLength(l));
        }
    }
    Ok(p.n0 * (p.order + 1.0) * (p.order + p.dim) / (2.0 * p.dim * l_int.min(l_ext)))
}

/// The two parts of a physical gradient: the iso-zeta horizontal part
/// `(phi_z grad_h phi_h, 0)` and the `m d/dzeta` part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradParts {
    pub tangential: [f64; 3],
    pub normal: [f64; 3],
}

impl GradParts {
    pub fn total(&self) -> [f64; 3] {
        std::array::from_fn(|i| self.tangential[i] + self.normal[i])
    }
}

/// Gradient of a P1 prism field with nodal values `vals` at parent point
/// `(phi_h, zeta-basis)`, given the physical gradients of `phi_h` and `m`.
pub fn gradient_decompose(
    vals: &[f64; 6],
    phi: &[f64; 3],
    grad_phi_h: &[[f64; 2]; 3],
    phiz: &[f64; 2],
    m: &[f64; 3],
) -> GradParts {
    let mut t = [0.0; 3];
    let mut dzeta = 0.0;
    for k in 0..6 {
        let (h, v) = (k % 3, k / 3);
        t[0] += vals[k] * phiz[v] * grad_phi_h[h][0];
        t[1] += vals[k] * phiz[v] * grad_phi_h[h][1];
        dzeta += vals[k] * phi[h] * DPHI_Z[v];
    }
    GradParts { tangential: t, normal: [m[0] * dzeta, m[1] * dzeta, m[2] * dzeta] }
}

/// Mesh-aligned velocity `u~ = (u, -m_h.u/m_z)` and vertical remainder
/// `w~ = w + m_h.u/m_z`.
pub fn split_velocity(u: [f64; 2], w: f64, m: [f64; 3]) -> Result<([f64; 3], f64)> {
    if m[2] == 0.0 {
        return Err(Error::DegenerateLayer);
    }
    let a = (m[0] * u[0] + m[1] * u[1]) / m[2];
    Ok(([u[0], u[1], -a], w + a))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorDiffusivity {
    pub full: [[f64; 3]; 3],
    /// Coefficient of `e_z (x) e_z` in the implicit part.
    pub implicit: f64,
    pub explicit: [[f64; 3]; 3],
}

pub fn split_diffusivity(d: [[f64; 3]; 3], m: [f64; 3]) -> Result<TensorDiffusivity> {
    if m[2] == 0.0 {
        return Err(Error::DegenerateLayer);
    }
    let mut mdm = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            mdm += m[i] * d[i][j] * m[j];
        }
    }
    let di = mdm / (m[2] * m[2]);
    let mut de = d;
    de[2][2] -= di;
    Ok(TensorDiffusivity { full: d, implicit: di, explicit: de })
}

/// `diag(kh, kh, kv)` split at `m`: returns `(kappa_i, kappa_e)` with
/// `kappa_e = diag(kh, kh, -kh |m_h|^2 / m_z^2)`.
pub fn split_diagonal(kh: f64, kv: f64, m: [f64; 3]) -> (f64, [f64; 3]) {
    let mh2 = m[0] * m[0] + m[1] * m[1];
    let r = kh * mh2 / (m[2] * m[2]);
    (kv + r, [kh, kh, -r])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fact(n: u32) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn triangle_rule_is_exact_to_degree_four() {
        for a in 0..=4u32 {
            for b in 0..=(4 - a) {
                let q: f64 =
                    tri_rule().iter().map(|p| p.w * p.xi.powi(a as i32) * p.eta.powi(b as i32)).sum();
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                assert!((q - exact).abs() < 1e-14, "a={a} b={b}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn gauss_rule_is_exact_to_degree_three() {
        for p in 0..=3 {
            let q: f64 = GAUSS2.iter().map(|x| x.powi(p)).sum();
            let exact = if p % 2 == 0 { 2.0 / (p as f64 + 1.0) } else { 0.0 };
            assert!((q - exact).abs() < 1e-15);
        }
    }

    #[test]
    fn edge_weights_match_parameterization() {
        for (g, &(wa, wb)) in EDGE_W.iter().enumerate() {
            let s = GAUSS2[g];
            assert!((wa - 0.5 * (1.0 - s)).abs() < 1e-16);
            assert!((wb - 0.5 * (1.0 + s)).abs() < 1e-16);
        }
        for (g, z) in ZETA_PHI.iter().enumerate() {
            assert_eq!(*z, phi_z(GAUSS2[g]));
        }
    }

    #[test]
    fn nodal_interpolation() {
        for (j, node) in prism_nodes().iter().enumerate() {
            let p = phi_prism(node[0], node[1], node[2]);
            for (i, v) in p.iter().enumerate() {
                assert_eq!(*v, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn mass_matrix_inverse() {
        let m = mass_h(3.7);
        let v = [0.3, -1.2, 2.5];
        let mv: [f64; 3] = std::array::from_fn(|i| (0..3).map(|j| m[i][j] * v[j]).sum());
        let back = mass_h_inv(3.7, mv);
        for i in 0..3 {
            assert!((back[i] - v[i]).abs() < 1e-14);
        }
        let q: f64 = tri_rule().iter().map(|p| p.w * p.phi[0] * p.phi[1]).sum();
        assert!((q - 1.0 / 24.0).abs() < 1e-16);
    }

    #[test]
    fn interface_operator_examples() {
        assert_eq!(iface_mean(1.0, 3.0), 2.0);
        assert_eq!(iface_diff(1.0, 3.0), -1.0);
        assert_eq!(iface_max(1.0, 3.0), 3.0);
        assert_eq!(iface_upwind(1.0, 3.0, 0.0), 1.0);
        assert_eq!(iface_upwind(1.0, 3.0, -1e-300), 3.0);
        assert_eq!(iface_mean(2.5, 2.5), 2.5);
        assert_eq!(iface_diff(2.5, 2.5), 0.0);
    }

    #[test]
    fn penalty_examples() {
        let p = PenaltyParams::default();
        let s = penalty_sigma(&p, 10.0, 20.0).unwrap();
        assert!((s - 40.0 / 60.0).abs() < 1e-15);
        let s = penalty_sigma(&p, 1.0, 1.0).unwrap();
        assert!((s - 20.0 / 3.0).abs() < 1e-14);
        assert!(penalty_sigma(&p, 1e300, 1e300).unwrap() < 1e-298);
        assert!(matches!(penalty_sigma(&p, 0.0, 1.0), Err(Error::NonPositiveLength(_))));
    }

    #[test]
    fn split_examples() {
        let (ut, wt) = split_velocity([1.0, 0.0], 0.0, [0.5, 0.0, 1.0]).unwrap();
        assert_eq!(ut, [1.0, 0.0, -0.5]);
        assert_eq!(wt, 0.5);
        let (ut, wt) = split_velocity([0.3, 0.7], 0.2, [0.0, 0.0, 2.0]).unwrap();
        assert_eq!(ut, [0.3, 0.7, 0.0]);
        assert_eq!(wt, 0.2);
        assert_eq!(split_velocity([1.0, 0.0], 0.0, [1.0, 0.0, 0.0]), Err(Error::DegenerateLayer));

        let k = 0.7;
        let iso = [[k, 0.0, 0.0], [0.0, k, 0.0], [0.0, 0.0, k]];
        let t = split_diffusivity(iso, [0.0, 0.0, 3.0]).unwrap();
        assert!((t.implicit - k).abs() < 1e-15);
        assert!(t.explicit[2][2].abs() < 1e-15);
        let t = split_diffusivity([[0.0; 3]; 3], [0.1, 0.2, 1.0]).unwrap();
        assert_eq!(t.implicit, 0.0);
        assert_eq!(t.explicit, [[0.0; 3]; 3]);
    }

    #[test]
    fn flat_layers_reduce_to_horizontal_gradient() {
        let vals = [1.0, 2.0, 4.0, 1.0, 2.0, 4.0];
        let g = [[-1.0, -0.5], [1.0, 0.0], [0.0, 0.5]];
        let phi = phi_h(0.2, 0.3);
        let parts = gradient_decompose(&vals, &phi, &g, &phi_z(0.1), &[0.0, 0.0, 0.5]);
        assert!(parts.normal.iter().all(|x| x.abs() < 1e-15));
        let direct: f64 = (0..3).map(|h| vals[h] * g[h][0]).sum();
        assert!((parts.tangential[0] - direct).abs() < 1e-15);
    }

    /// Chain-rule oracle: build a sloped prism, map parent points to physical
    /// space, and compare against the gradient of the field obtained by
    /// inverting the full 3x3 Jacobian.
    #[test]
    fn gradient_parts_match_inverted_jacobian() {
        let xy = [[0.0, 0.0], [2.0, 0.3], [0.4, 1.7]];
        let zt = [-0.2, 0.4, 0.1];
        let zb = [-5.0, -3.5, -4.2];
        let vals = [0.3, -1.1, 2.0, 0.7, 1.4, -0.6];
        let (xi, et, ze) = (0.21, 0.33, -0.4);
        let phi = phi_h(xi, et);
        let pz = phi_z(ze);
        // physical gradients of phi_h
        let dx = [xy[1][0] - xy[0][0], xy[2][0] - xy[0][0]];
        let dy = [xy[1][1] - xy[0][1], xy[2][1] - xy[0][1]];
        let det = dx[0] * dy[1] - dx[1] * dy[0];
        let inv = [[dy[1] / det, -dx[1] / det], [-dy[0] / det, dx[0] / det]];
        let g: [[f64; 2]; 3] = std::array::from_fn(|h| {
            let p = DPHI_H[h];
            [p[0] * inv[0][0] + p[1] * inv[1][0], p[0] * inv[0][1] + p[1] * inv[1][1]]
        });
        let z_at = |w: &[f64; 3]| (0..3).map(|h| w[h] * phi[h]).sum::<f64>();
        let jz = 0.5 * (z_at(&zt) - z_at(&zb));
        let gz: [f64; 2] = std::array::from_fn(|d| {
            (0..3).map(|h| (pz[0] * zt[h] + pz[1] * zb[h]) * g[h][d]).sum::<f64>()
        });
        let m = [-gz[0] / jz, -gz[1] / jz, 1.0 / jz];
        let parts = gradient_decompose(&vals, &phi, &g, &pz, &m);

        // Oracle: Jacobian of (xi, eta, zeta) -> (x, y, z).
        let z_of = |xi: f64, et: f64, ze: f64| {
            let ph = phi_h(xi, et);
            let p = phi_z(ze);
            (0..3).map(|h| ph[h] * (p[0] * zt[h] + p[1] * zb[h])).sum::<f64>()
        };
        let f_of = |xi: f64, et: f64, ze: f64| {
            let p = phi_prism(xi, et, ze);
            (0..6).map(|k| p[k] * vals[k]).sum::<f64>()
        };
        let h = 1e-6;
        let d = |f: &dyn Fn(f64, f64, f64) -> f64, i: usize| {
            let mut a = [xi, et, ze];
            let mut b = a;
            a[i] += h;
            b[i] -= h;
            (f(a[0], a[1], a[2]) - f(b[0], b[1], b[2])) / (2.0 * h)
        };
        let jac = [
            [dx[0], dx[1], 0.0],
            [dy[0], dy[1], 0.0],
            [d(&z_of, 0), d(&z_of, 1), d(&z_of, 2)],
        ];
        let df = [d(&f_of, 0), d(&f_of, 1), d(&f_of, 2)];
        // grad f = J^{-T} df
        let jt = nalgebra::Matrix3::from_fn(|i, j| jac[j][i]);
        let sol = jt.lu().solve(&nalgebra::Vector3::new(df[0], df[1], df[2])).unwrap();
        let total = parts.total();
        for i in 0..3 {
            assert!((total[i] - sol[i]).abs() < 1e-8, "{i}: {} vs {}", total[i], sol[i]);
        }
        // Exact parent derivatives are polynomial, so also check against an
        // analytic evaluation to round-off.
        let dzeta: f64 = (0..6).map(|k| vals[k] * phi[k % 3] * DPHI_Z[k / 3]).sum();
        assert!((parts.normal[2] - dzeta / jz).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn partition_of_unity(xi in 0.0f64..1.0, t in 0.0f64..1.0, ze in -1.0f64..1.0) {
            let eta = (1.0 - xi) * t;
            let s: f64 = phi_prism(xi, eta, ze).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-15);
        }

        #[test]
        fn iface_reconstruction(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            // mean + diff and mean - diff recover the sides up to one rounding.
            let (m, d) = (iface_mean(a, b), iface_diff(a, b));
            prop_assert!((m + d - a).abs() <= 1e-15 * (a.abs() + b.abs()));
            prop_assert!((m - d - b).abs() <= 1e-15 * (a.abs() + b.abs()));
        }

        #[test]
        fn sigma_symmetric_and_monotone(a in 0.01f64..100.0, b in 0.01f64..100.0, s in 1.01f64..3.0) {
            let p = PenaltyParams::default();
            prop_assert_eq!(penalty_sigma(&p, a, b).unwrap(), penalty_sigma(&p, b, a).unwrap());
            prop_assert!(penalty_sigma(&p, a * s, b * s).unwrap() < penalty_sigma(&p, a, b).unwrap());
        }

        #[test]
        fn velocity_split_identity(u in -5.0f64..5.0, v in -5.0f64..5.0, w in -1.0f64..1.0,
                                   mx in -2.0f64..2.0, my in -2.0f64..2.0, mz in 0.1f64..3.0) {
            let m = [mx, my, mz];
            let (ut, wt) = split_velocity([u, v], w, m).unwrap();
            let dot = ut[0] * m[0] + ut[1] * m[1] + ut[2] * m[2];
            prop_assert!(dot.abs() < 1e-15 * (1.0 + (u.abs() + v.abs()) * (mx.abs() + my.abs())) * 4.0);
            prop_assert!((ut[2] + wt - w).abs() < 1e-14);
        }

        #[test]
        fn diffusivity_split_identity(a in prop::array::uniform9(-1.0f64..1.0),
                                      mx in -2.0f64..2.0, my in -2.0f64..2.0, mz in 0.1f64..3.0) {
            // SPD tensor D = A A^T + 0.1 I
            let mut d = [[0.0; 3]; 3];
            for i in 0..3 { for j in 0..3 {
                d[i][j] = (0..3).map(|k| a[3 * i + k] * a[3 * j + k]).sum::<f64>();
            } d[i][i] += 0.1; }
            let m = [mx, my, mz];
            let t = split_diffusivity(d, m).unwrap();
            let mut r = 0.0;
            for i in 0..3 { for j in 0..3 { r += m[i] * t.explicit[i][j] * m[j]; } }
            let norm = d.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
            let scale = m.iter().map(|x| x * x).sum::<f64>();
            prop_assert!(r.abs() <= 1e-14 * norm * scale);
            prop_assert!(t.implicit >= 0.0);
        }
    }
}
