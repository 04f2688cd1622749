//! Reference-element Lagrange bases on `[-1,1]^2`, Gauss-Legendre rules and
//! the bilinear isoparametric map.
//!
//! Local nodes are numbered lexicographically: the reference coordinate `xi`
//! runs fastest. For degree `k` node `i + (k+1)*j` sits at
//! `(t_i, t_j)` with `t = [-1, 1]` (Q1) or `t = [-1, 0, 1]` (Q2). The same
//! numbering is used by the mesh, every assembler and the exporters (which
//! permute into VTK order on output).

use crate::error::{Error, Result};

/// A point on the reference square.
pub type RefPoint = [f64; 2];

/// Polynomial degree of a Lagrangian element, Q1 or Q2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Degree {
    Q1,
    Q2,
}

impl Degree {
    pub fn from_order(k: usize) -> Result<Self> {
        match k {
            1 => Ok(Degree::Q1),
            2 => Ok(Degree::Q2),
            _ => Err(Error::InvalidArgument(format!("unsupported element degree {k}, expected 1 or 2"))),
        }
    }

    pub fn order(self) -> usize {
        match self {
            Degree::Q1 => 1,
            Degree::Q2 => 2,
        }
    }

    /// Nodes per direction on one element.
    pub fn nodes_1d(self) -> usize {
        self.order() + 1
    }

    pub fn nodes_per_element(self) -> usize {
        self.nodes_1d() * self.nodes_1d()
    }
}

impl std::fmt::Display for Degree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.order())
    }
}

fn nodes_1d(degree: Degree) -> &'static [f64] {
    match degree {
        Degree::Q1 => &[-1.0, 1.0],
        Degree::Q2 => &[-1.0, 0.0, 1.0],
    }
}

/// Values, first and second derivatives of the 1D Lagrange polynomials.
fn lagrange_1d(degree: Degree, t: f64) -> ([f64; 3], [f64; 3], [f64; 3]) {
    match degree {
        Degree::Q1 => ([0.5 * (1.0 - t), 0.5 * (1.0 + t), 0.0], [-0.5, 0.5, 0.0], [0.0; 3]),
        Degree::Q2 => (
            [0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)],
            [t - 0.5, -2.0 * t, t + 0.5],
            [1.0, -2.0, 1.0],
        ),
    }
}

/// Reference element: degree plus the reference coordinates of its nodes.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub degree: Degree,
    pub nodes: Vec<RefPoint>,
}

impl ReferenceElement {
    pub fn new(degree: Degree) -> Self {
        let t = nodes_1d(degree);
        let nodes = t.iter().flat_map(|&eta| t.iter().map(move |&xi| [xi, eta])).collect();
        Self { degree, nodes }
    }
}

/// Tensor-product Lagrange basis values at `xi`.
pub fn shape_values(degree: Degree, xi: RefPoint) -> Vec<f64> {
    let n = degree.nodes_1d();
    let (lx, _, _) = lagrange_1d(degree, xi[0]);
    let (ly, _, _) = lagrange_1d(degree, xi[1]);
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push(lx[i] * ly[j]);
        }
    }
    out
}

/// Reference-space gradients `[dN/dxi, dN/deta]` of each basis function.
pub fn shape_gradients(degree: Degree, xi: RefPoint) -> Vec<[f64; 2]> {
    let n = degree.nodes_1d();
    let (lx, dx, _) = lagrange_1d(degree, xi[0]);
    let (ly, dy, _) = lagrange_1d(degree, xi[1]);
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push([dx[i] * ly[j], lx[i] * dy[j]]);
        }
    }
    out
}

/// Reference-space Hessians `[d2/dxi2, d2/dxi deta, d2/deta2]`.
pub fn shape_hessians(degree: Degree, xi: RefPoint) -> Vec<[f64; 3]> {
    let n = degree.nodes_1d();
    let (lx, dx, ddx) = lagrange_1d(degree, xi[0]);
    let (ly, dy, ddy) = lagrange_1d(degree, xi[1]);
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push([ddx[i] * ly[j], dx[i] * dy[j], lx[i] * ddy[j]]);
        }
    }
    out
}

/// A tensor-product quadrature rule on the reference square.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<RefPoint>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (RefPoint, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

fn gauss_1d(n: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let rule = match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (0.6f64).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let s = (6.0f64 / 5.0).sqrt();
            let a = ((3.0 - 2.0 * s) / 7.0).sqrt();
            let b = ((3.0 + 2.0 * s) / 7.0).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        _ => return None,
    };
    Some(rule)
}

/// Tensor-product Gauss-Legendre rule with `n` points per direction,
/// `n` in `1..=4`. Exact for `xi^a eta^b` with `a, b <= 2n-1`.
pub fn gauss_rule(n: usize) -> Result<QuadratureRule> {
    let (t, w) = gauss_1d(n).ok_or_else(|| Error::InvalidArgument(format!("unsupported Gauss rule with {n} points per direction")))?;
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            points.push([t[i], t[j]]);
            weights.push(w[i] * w[j]);
        }
    }
    Ok(QuadratureRule { points, weights })
}

/// Points where the Galerkin gradient superconverges: the `k x k` Gauss points.
pub fn superconvergent_points(degree: Degree) -> QuadratureRule {
    gauss_rule(degree.order()).expect("degree is 1 or 2")
}

/// Rule used for every bilinear form: `(k+1) x (k+1)` Gauss.
pub fn assembly_rule(degree: Degree) -> QuadratureRule {
    gauss_rule(degree.order() + 1).expect("degree is 1 or 2")
}

/// Rule used for error integration: `(k+2) x (k+2)` Gauss.
pub fn error_rule(degree: Degree) -> QuadratureRule {
    gauss_rule(degree.order() + 2).expect("degree is 1 or 2")
}

/// Bilinear map from the reference square onto a quadrilateral given by its
/// four corners in lexicographic order: `(-1,-1), (1,-1), (-1,1), (1,1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub corners: [[f64; 2]; 4],
}

/// Jacobian data of [`ElementGeometry`] at one reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian {
    /// `j[r][c] = d x_r / d xi_c`
    pub j: [[f64; 2]; 2],
    pub det: f64,
    pub inv: [[f64; 2]; 2],
}

impl Jacobian {
    /// Maps a reference gradient to a physical one: `J^{-T} g`.
    pub fn physical_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        [self.inv[0][0] * g[0] + self.inv[1][0] * g[1], self.inv[0][1] * g[0] + self.inv[1][1] * g[1]]
    }

    /// Physical Hessian `[xx, xy, yy]` from a reference one. Only valid for
    /// affine maps (parallelograms), where second derivatives of the map vanish.
    pub fn physical_hessian(&self, h: [f64; 3]) -> [f64; 3] {
        let inv = &self.inv;
        let href = [[h[0], h[1]], [h[1], h[2]]];
        let mut out = [[0.0; 2]; 2];
        for (a, row) in out.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                let mut s = 0.0;
                for p in 0..2 {
                    for q in 0..2 {
                        s += inv[p][a] * href[p][q] * inv[q][b];
                    }
                }
                *v = s;
            }
        }
        [out[0][0], out[0][1], out[1][1]]
    }
}

impl ElementGeometry {
    pub fn new(corners: [[f64; 2]; 4]) -> Self {
        Self { corners }
    }

    pub fn map(&self, xi: RefPoint) -> [f64; 2] {
        let n = shape_values(Degree::Q1, xi);
        let mut x = [0.0; 2];
        for (c, w) in self.corners.iter().zip(&n) {
            x[0] += w * c[0];
            x[1] += w * c[1];
        }
        x
    }

    pub fn jacobian(&self, xi: RefPoint) -> Jacobian {
        let g = shape_gradients(Degree::Q1, xi);
        let mut j = [[0.0; 2]; 2];
        for (c, gr) in self.corners.iter().zip(&g) {
            for r in 0..2 {
                for s in 0..2 {
                    j[r][s] += c[r] * gr[s];
                }
            }
        }
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
        Jacobian { j, det, inv }
    }

    pub fn centroid(&self) -> [f64; 2] {
        self.map([0.0, 0.0])
    }

    /// Longest diagonal.
    pub fn diameter(&self) -> f64 {
        let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        d(self.corners[0], self.corners[3]).max(d(self.corners[1], self.corners[2]))
    }

    pub fn area(&self) -> f64 {
        let rule = gauss_rule(2).expect("static rule");
        rule.iter().map(|(p, w)| w * self.jacobian(p).det).sum()
    }
}

/// Basis values and physical derivatives at one quadrature point of one element.
#[derive(Debug, Clone)]
pub struct PointBasis {
    pub xi: RefPoint,
    pub x: [f64; 2],
    /// Quadrature weight times `det J`.
    pub dx: f64,
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
}

/// Evaluates the basis at every point of `rule` on `geom`.
pub fn tabulate(degree: Degree, geom: &ElementGeometry, rule: &QuadratureRule) -> Vec<PointBasis> {
    rule.iter().map(|(xi, w)| point_basis(degree, geom, xi, w)).collect()
}

pub fn point_basis(degree: Degree, geom: &ElementGeometry, xi: RefPoint, weight: f64) -> PointBasis {
    let jac = geom.jacobian(xi);
    PointBasis {
        xi,
        x: geom.map(xi),
        dx: weight * jac.det,
        values: shape_values(degree, xi),
        grads: shape_gradients(degree, xi).into_iter().map(|g| jac.physical_gradient(g)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn q1_nodal_and_center_values() {
        assert_eq!(shape_values(Degree::Q1, [-1.0, -1.0]), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(shape_values(Degree::Q1, [0.0, 0.0]), vec![0.25; 4]);
    }

    #[test]
    fn kronecker_property_at_reference_nodes() {
        for degree in [Degree::Q1, Degree::Q2] {
            let re = ReferenceElement::new(degree);
            for (j, &node) in re.nodes.iter().enumerate() {
                let v = shape_values(degree, node);
                for (i, vi) in v.iter().enumerate() {
                    assert_abs_diff_eq!(*vi, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-15);
                }
            }
        }
        let v = shape_values(Degree::Q2, [0.0, 0.0]);
        assert_eq!(v[4], 1.0);
        assert!(v.iter().enumerate().all(|(i, x)| i == 4 || *x == 0.0));
    }

    #[test]
    fn q1_gradient_at_center() {
        // N0 = (1-xi)(1-eta)/4, so dN0 = (-(1-eta)/4, -(1-xi)/4) = (-0.25, -0.25) at the origin.
        let g = shape_gradients(Degree::Q1, [0.0, 0.0]);
        assert_eq!(g[0], [-0.25, -0.25]);
    }

    #[test]
    fn q2_gradients_match_finite_differences() {
        let step = 1e-6;
        for xi in [[0.3, -0.7], [-0.45, 0.1], [0.9, 0.95], [0.0, 0.0]] {
            let g = shape_gradients(Degree::Q2, xi);
            let vp = shape_values(Degree::Q2, [xi[0] + step, xi[1]]);
            let vm = shape_values(Degree::Q2, [xi[0] - step, xi[1]]);
            let wp = shape_values(Degree::Q2, [xi[0], xi[1] + step]);
            let wm = shape_values(Degree::Q2, [xi[0], xi[1] - step]);
            for i in 0..9 {
                assert_abs_diff_eq!(g[i][0], (vp[i] - vm[i]) / (2.0 * step), epsilon = 1e-6);
                assert_abs_diff_eq!(g[i][1], (wp[i] - wm[i]) / (2.0 * step), epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn q2_hessians_match_finite_differences() {
        let step = 1e-5;
        let xi = [0.21, -0.37];
        let h = shape_hessians(Degree::Q2, xi);
        let gp = shape_gradients(Degree::Q2, [xi[0] + step, xi[1]]);
        let gm = shape_gradients(Degree::Q2, [xi[0] - step, xi[1]]);
        let hp = shape_gradients(Degree::Q2, [xi[0], xi[1] + step]);
        let hm = shape_gradients(Degree::Q2, [xi[0], xi[1] - step]);
        for i in 0..9 {
            assert_abs_diff_eq!(h[i][0], (gp[i][0] - gm[i][0]) / (2.0 * step), epsilon = 1e-6);
            assert_abs_diff_eq!(h[i][1], (gp[i][1] - gm[i][1]) / (2.0 * step), epsilon = 1e-6);
            assert_abs_diff_eq!(h[i][2], (hp[i][1] - hm[i][1]) / (2.0 * step), epsilon = 1e-6);
        }
    }

    #[test]
    fn low_order_gauss_rules() {
        let r1 = gauss_rule(1).unwrap();
        assert_eq!(r1.points, vec![[0.0, 0.0]]);
        assert_eq!(r1.weights, vec![4.0]);
        let r2 = gauss_rule(2).unwrap();
        let a = 1.0 / 3f64.sqrt();
        for p in &r2.points {
            assert_abs_diff_eq!(p[0].abs(), a, epsilon = 1e-15);
            assert_abs_diff_eq!(p[1].abs(), a, epsilon = 1e-15);
        }
        assert!(r2.weights.iter().all(|&w| w == 1.0));
        let integral: f64 = r2.iter().map(|(p, w)| w * p[0] * p[0] * p[1] * p[1]).sum();
        assert_abs_diff_eq!(integral, 4.0 / 9.0, epsilon = 1e-15);
        assert!(gauss_rule(0).is_err());
        assert!(gauss_rule(5).is_err());
    }

    fn monomial_integral(a: u32) -> f64 {
        if a % 2 == 1 {
            0.0
        } else {
            2.0 / (a as f64 + 1.0)
        }
    }

    #[test]
    fn gauss_rules_integrate_monomials_exactly() {
        for n in 1..=4usize {
            let rule = gauss_rule(n).unwrap();
            assert_abs_diff_eq!(rule.weights.iter().sum::<f64>(), 4.0, epsilon = 1e-13);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for a in 0..=(2 * n as u32 - 1) {
                for b in 0..=(2 * n as u32 - 1) {
                    let exact = monomial_integral(a) * monomial_integral(b);
                    let approx: f64 = rule.iter().map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32)).sum();
                    assert!((approx - exact).abs() <= 1e-13 * exact.abs().max(1.0), "n={n} a={a} b={b}");
                }
            }
        }
    }

    #[test]
    fn superconvergent_point_sets() {
        let q1 = superconvergent_points(Degree::Q1);
        assert_eq!(q1.points, vec![[0.0, 0.0]]);
        let q2 = superconvergent_points(Degree::Q2);
        assert_eq!(q2.len(), 4);
        for r in [q1, q2] {
            assert_abs_diff_eq!(r.weights.iter().sum::<f64>(), 4.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn rectangle_jacobian_is_constant() {
        let g = ElementGeometry::new([[1.0, 2.0], [4.0, 2.0], [1.0, 2.5], [4.0, 2.5]]);
        for xi in [[0.0, 0.0], [-0.3, 0.8], [1.0, -1.0]] {
            let j = g.jacobian(xi);
            assert_eq!(j.det, 3.0 * 0.5 / 4.0);
        }
        assert_abs_diff_eq!(g.area(), 1.5, epsilon = 1e-15);
        assert_eq!(g.centroid(), [2.5, 2.25]);
    }

    proptest! {
        #[test]
        fn partition_of_unity(xi in -1.0f64..1.0, eta in -1.0f64..1.0) {
            for degree in [Degree::Q1, Degree::Q2] {
                let s: f64 = shape_values(degree, [xi, eta]).iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-13);
                let g = shape_gradients(degree, [xi, eta]);
                let gx: f64 = g.iter().map(|v| v[0]).sum();
                let gy: f64 = g.iter().map(|v| v[1]).sum();
                prop_assert!(gx.abs() < 1e-13 && gy.abs() < 1e-13);
            }
        }
    }
}
