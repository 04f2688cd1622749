//! Galerkin approximation of the potential, the direct Darcy velocity
//! `u_G = -K grad p_h`, and error norms against exact solutions.

use nalgebra::DMatrix;

use crate::basis::{assembly_rule, error_rule, superconvergent_points, tabulate, RefPoint};
use crate::error::{Error, Result};
use crate::field::{ConductivityField, ScalarField, VectorField};
use crate::mesh::{Mesh, SubdomainId};
use crate::problem::{BoundaryConditions, ExactSolution};
use crate::sparse::{LinearSystem, Symmetry};

/// Assembles `(K grad p, grad q) = (f, q)` with Dirichlet rows prescribed.
pub fn assemble_potential(
    mesh: &Mesh,
    conductivity: &ConductivityField,
    source: &dyn Fn(SubdomainId, [f64; 2]) -> f64,
    boundary: &BoundaryConditions,
) -> Result<LinearSystem> {
    conductivity.covers(mesh)?;
    let rule = assembly_rule(mesh.degree);
    let npe = mesh.degree.nodes_per_element();
    let mut system = LinearSystem::new(mesh.node_count(), Symmetry::Symmetric);
    for element in &mesh.elements {
        let k = conductivity.get(element.subdomain)?.k;
        let mut ke = DMatrix::zeros(npe, npe);
        let mut fe = vec![0.0; npe];
        for pb in tabulate(mesh.degree, &mesh.geometry(element.id), &rule) {
            let f = source(element.subdomain, pb.x);
            for a in 0..npe {
                let ga = pb.grads[a];
                fe[a] += pb.dx * f * pb.values[a];
                for b in 0..npe {
                    let gb = pb.grads[b];
                    let kgb = [k[(0, 0)] * gb[0] + k[(0, 1)] * gb[1], k[(1, 0)] * gb[0] + k[(1, 1)] * gb[1]];
                    ke[(a, b)] += pb.dx * (ga[0] * kgb[0] + ga[1] * kgb[1]);
                }
            }
        }
        system.accumulate(&ke, &fe, &element.node_ids)?;
    }
    for (node, value) in boundary.dirichlet_nodes(mesh) {
        system.constrain(node, value)?;
    }
    Ok(system)
}

/// Solves for the C0 potential. Sides without Dirichlet data are no-flux.
pub fn solve_potential(
    mesh: &Mesh,
    conductivity: &ConductivityField,
    source: &dyn Fn(SubdomainId, [f64; 2]) -> f64,
    boundary: &BoundaryConditions,
) -> Result<ScalarField> {
    let system = assemble_potential(mesh, conductivity, source, boundary)?;
    ScalarField::new(mesh, system.solve()?)
}

/// `u_G = -K grad p_h`, discontinuous across element edges.
pub struct GalerkinVelocity<'a> {
    pub potential: &'a ScalarField,
    pub conductivity: &'a ConductivityField,
}

pub fn galerkin_velocity<'a>(potential: &'a ScalarField, conductivity: &'a ConductivityField) -> GalerkinVelocity<'a> {
    GalerkinVelocity { potential, conductivity }
}

impl VectorField for GalerkinVelocity<'_> {
    fn value(&self, mesh: &Mesh, element: usize, xi: RefPoint) -> [f64; 2] {
        let k = self.conductivity.get(mesh.elements[element].subdomain).expect("conductivity covers mesh");
        k.darcy(self.potential.gradient(mesh, element, xi))
    }

    fn divergence(&self, mesh: &Mesh, element: usize, xi: RefPoint) -> f64 {
        let k = self.conductivity.get(mesh.elements[element].subdomain).expect("conductivity covers mesh").k;
        let h = self.potential.hessian(mesh, element, xi);
        -(k[(0, 0)] * h[0] + (k[(0, 1)] + k[(1, 0)]) * h[1] + k[(1, 1)] * h[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorNorm {
    /// `||v - v_h||`
    L2,
    /// `||grad p - grad p_h||`
    H1Semi,
    /// `||div u - div u_h||`
    Div,
    /// `(||u - u_h||^2 + ||div u - div u_h||^2)^(1/2)`
    Hdiv,
    /// `|grad p - grad p_h|_h`, the gradient error sampled at the
    /// superconvergent points only.
    DiscreteGradient,
}

/// Field whose error is being measured.
pub enum FieldRef<'a> {
    Scalar(&'a ScalarField),
    Vector(&'a dyn VectorField),
}

/// Error of `field` against `exact`, integrated element by element with the
/// `(k+2) x (k+2)` Gauss rule and the exact branch of each element's subdomain.
pub fn error_norm(mesh: &Mesh, field: FieldRef<'_>, exact: &dyn ExactSolution, norm: ErrorNorm) -> Result<f64> {
    let rule = match norm {
        ErrorNorm::DiscreteGradient => superconvergent_points(mesh.degree),
        _ => error_rule(mesh.degree),
    };
    let mut sum = 0.0;
    for element in &mesh.elements {
        let geom = mesh.geometry(element.id);
        let s = element.subdomain;
        for (xi, w) in rule.iter() {
            let x = geom.map(xi);
            let dx = w * geom.jacobian(xi).det;
            let e2 = match (&field, norm) {
                (FieldRef::Scalar(p), ErrorNorm::L2) => (exact.potential(s, x) - p.value(mesh, element.id, xi)).powi(2),
                (FieldRef::Scalar(p), ErrorNorm::H1Semi | ErrorNorm::DiscreteGradient) => {
                    let g = exact.gradient(s, x);
                    let gh = p.gradient(mesh, element.id, xi);
                    (g[0] - gh[0]).powi(2) + (g[1] - gh[1]).powi(2)
                }
                (FieldRef::Vector(u), ErrorNorm::L2 | ErrorNorm::Hdiv | ErrorNorm::Div) => {
                    let mut e = 0.0;
                    if norm != ErrorNorm::Div {
                        let v = exact.velocity(s, x);
                        let vh = u.value(mesh, element.id, xi);
                        e += (v[0] - vh[0]).powi(2) + (v[1] - vh[1]).powi(2);
                    }
                    if norm != ErrorNorm::L2 {
                        e += (exact.divergence(s, x) - u.divergence(mesh, element.id, xi)).powi(2);
                    }
                    e
                }
                (FieldRef::Scalar(_), _) | (FieldRef::Vector(_), _) => {
                    return Err(Error::InvalidArgument(format!("norm {norm:?} does not apply to this kind of field")));
                }
            };
            sum += dx * e2;
        }
    }
    Ok(sum.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Degree;
    use crate::mesh::{build_structured_mesh, Rect};
    use crate::problem::{self, BoundaryConditions};
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix2;
    use std::sync::Arc;

    fn unit_k() -> ConductivityField {
        ConductivityField::new().with(1, Matrix2::identity()).unwrap()
    }

    #[test]
    fn linear_potential_is_reproduced() {
        for degree in [Degree::Q1, Degree::Q2] {
            let mesh = build_structured_mesh(4, 3, Rect::new(0.0, 0.0, 1.0, 1.0), degree, |_, _| 1).unwrap();
            let bc = BoundaryConditions::all_dirichlet(Arc::new(|x| x[0]));
            let k = unit_k();
            let p = solve_potential(&mesh, &k, &|_, _| 0.0, &bc).unwrap();
            for (n, v) in p.values.iter().enumerate() {
                assert_abs_diff_eq!(*v, mesh.nodes[n].x, epsilon = 1e-12);
            }
            let u = galerkin_velocity(&p, &k);
            for e in 0..mesh.element_count() {
                let v = u.value(&mesh, e, [0.2, -0.7]);
                assert_abs_diff_eq!(v[0], -1.0, epsilon = 1e-10);
                assert_abs_diff_eq!(v[1], 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn plates_potential_and_velocity() {
        let pd = problem::plates().unwrap();
        let mesh = pd.mesh(24, 12, Degree::Q1).unwrap();
        let p = solve_potential(&mesh, &pd.conductivity, pd.source.as_ref(), &pd.boundary).unwrap();
        let u = galerkin_velocity(&p, &pd.conductivity);
        for e in &mesh.elements {
            let g = p.gradient(&mesh, e.id, [0.0, 0.0]);
            assert_abs_diff_eq!(g[0], -0.5, epsilon = 1e-10);
            assert_abs_diff_eq!(g[1], 0.0, epsilon = 1e-10);
            let v = u.value(&mesh, e.id, [0.0, 0.0]);
            let expected = if e.subdomain == 1 { 1.0 } else { 0.5 };
            assert_abs_diff_eq!(v[0], expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn galerkin_orthogonality_on_free_dofs() {
        let pd = problem::crumpton(1.0).unwrap();
        let mesh = pd.mesh(6, 6, Degree::Q2).unwrap();
        let system = assemble_potential(&mesh, &pd.conductivity, pd.source.as_ref(), &pd.boundary).unwrap();
        let x = system.solve().unwrap();
        let a = system.matrix();
        let ax = a.mul_vec(&x);
        let rhs_norm = system.rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        for i in 0..a.dim {
            if !system.constraints().contains_key(&i) {
                assert!((ax[i] - system.rhs[i]).abs() <= 1e-10 * rhs_norm);
            }
        }
    }

    #[test]
    fn error_norm_basics() {
        let mesh = build_structured_mesh(1, 1, Rect::new(0.0, 0.0, 1.0, 1.0), Degree::Q1, |_, _| 1).unwrap();
        struct One;
        impl ExactSolution for One {
            fn potential(&self, _: SubdomainId, _: [f64; 2]) -> f64 {
                1.0
            }
            fn gradient(&self, _: SubdomainId, _: [f64; 2]) -> [f64; 2] {
                [0.0, 0.0]
            }
            fn velocity(&self, _: SubdomainId, _: [f64; 2]) -> [f64; 2] {
                [0.0, 0.0]
            }
            fn divergence(&self, _: SubdomainId, _: [f64; 2]) -> f64 {
                0.0
            }
        }
        let zero = ScalarField::new(&mesh, vec![0.0; 4]).unwrap();
        assert_abs_diff_eq!(error_norm(&mesh, FieldRef::Scalar(&zero), &One, ErrorNorm::L2).unwrap(), 1.0, epsilon = 1e-14);
        let one = ScalarField::new(&mesh, vec![1.0; 4]).unwrap();
        assert!(error_norm(&mesh, FieldRef::Scalar(&one), &One, ErrorNorm::L2).unwrap() <= 1e-12);
        assert!(error_norm(&mesh, FieldRef::Scalar(&one), &One, ErrorNorm::Div).is_err());

        let pd = problem::plates().unwrap();
        let mesh = pd.mesh(4, 2, Degree::Q2).unwrap();
        let exact = pd.exact().unwrap();
        let p = ScalarField::interpolate(&mesh, |s, x| exact.potential(s, x));
        assert!(error_norm(&mesh, FieldRef::Scalar(&p), exact.as_ref(), ErrorNorm::L2).unwrap() <= 1e-12);
        assert!(error_norm(&mesh, FieldRef::Scalar(&p), exact.as_ref(), ErrorNorm::H1Semi).unwrap() <= 1e-12);
    }
}
