//! Stabilized mixed formulations on equal-order C0 velocity/potential spaces.
//!
//! Unknowns are interleaved per node as `[u_x, u_y, p]`. The velocity-potential
//! coupling is written in gradient form, `(v, grad p)` and `(u, grad q)`,
//! which equals `-(div v, p)` and `-(div u, q)` on the constrained spaces and
//! stays consistent when the prescribed potential is not zero.

use nalgebra::{DMatrix, Matrix2, Vector2};

use crate::basis::{assembly_rule, tabulate};
use crate::error::Result;
use crate::field::{ConductivityField, ScalarField, VelocityField};
use crate::mesh::{Mesh, SubdomainId};
use crate::problem::BoundaryConditions;
use crate::sparse::{LinearSystem, Symmetry};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MixedMethod {
    /// Galerkin least-squares with weights on the Darcy-law and mass-balance
    /// residuals. `delta1 = -1/2, delta2 = 0` gives the GLS1 variant.
    Gls { delta1: f64, delta2: f64 },
    /// Non-symmetric adjoint stabilization.
    Hvm,
}

impl MixedMethod {
    /// Weights used for GLS in the benchmarks.
    pub const GLS_DEFAULT: MixedMethod = MixedMethod::Gls { delta1: 0.5, delta2: 0.5 };
    pub const GLS1: MixedMethod = MixedMethod::Gls { delta1: -0.5, delta2: 0.0 };
}

#[derive(Debug, Clone)]
pub struct MixedSolution {
    pub method: MixedMethod,
    pub velocity: VelocityField,
    pub potential: ScalarField,
}

pub const DOFS_PER_NODE: usize = 3;

pub fn mixed_dof(node: usize, component: usize) -> usize {
    DOFS_PER_NODE * node + component
}

/// Trial/test data of one local dof at one quadrature point.
#[derive(Clone, Copy, Default)]
struct DofData {
    vel: Vector2<f64>,
    div: f64,
    p: f64,
    grad_p: Vector2<f64>,
}

fn element_dofs(mesh: &Mesh, element: usize) -> Vec<usize> {
    mesh.elements[element].node_ids.iter().flat_map(|&n| (0..DOFS_PER_NODE).map(move |c| mixed_dof(n, c))).collect()
}

fn assemble(
    mesh: &Mesh,
    conductivity: &ConductivityField,
    source: &dyn Fn(SubdomainId, [f64; 2]) -> f64,
    method: MixedMethod,
) -> Result<LinearSystem> {
    conductivity.covers(mesh)?;
    let rule = assembly_rule(mesh.degree);
    let npe = mesh.degree.nodes_per_element();
    let nd = DOFS_PER_NODE * npe;
    let symmetry = match method {
        MixedMethod::Gls { .. } => Symmetry::Symmetric,
        MixedMethod::Hvm => Symmetry::General,
    };
    let mut system = LinearSystem::new(DOFS_PER_NODE * mesh.node_count(), symmetry);
    let mut data = vec![DofData::default(); nd];
    for element in &mesh.elements {
        let c = conductivity.get(element.subdomain)?;
        let (k, lambda): (Matrix2<f64>, Matrix2<f64>) = (c.k, c.lambda);
        let lambda_bar = c.mean_resistivity();
        let mut ke = DMatrix::zeros(nd, nd);
        let mut fe = vec![0.0; nd];
        for pb in tabulate(mesh.degree, &mesh.geometry(element.id), &rule) {
            for a in 0..npe {
                let (phi, g) = (pb.values[a], Vector2::new(pb.grads[a][0], pb.grads[a][1]));
                data[3 * a] = DofData { vel: Vector2::new(phi, 0.0), div: g[0], ..Default::default() };
                data[3 * a + 1] = DofData { vel: Vector2::new(0.0, phi), div: g[1], ..Default::default() };
                data[3 * a + 2] = DofData { p: phi, grad_p: g, ..Default::default() };
            }
            let f = source(element.subdomain, pb.x);
            for (s, test) in data.iter().enumerate() {
                let test_resid = lambda * test.vel + test.grad_p;
                let adjoint_resid = -lambda * test.vel + test.grad_p;
                fe[s] += pb.dx
                    * match method {
                        MixedMethod::Gls { delta2, .. } => delta2 * lambda_bar * f * test.div - f * test.p,
                        MixedMethod::Hvm => f * test.p,
                    };
                for (t, trial) in data.iter().enumerate() {
                    let k_resid = k * (lambda * trial.vel + trial.grad_p);
                    let mass = test.vel.dot(&(lambda * trial.vel));
                    let v = match method {
                        MixedMethod::Gls { delta1, delta2 } => {
                            mass + test.vel.dot(&trial.grad_p)
                                + trial.vel.dot(&test.grad_p)
                                + delta1 * test_resid.dot(&k_resid)
                                + delta2 * lambda_bar * trial.div * test.div
                        }
                        MixedMethod::Hvm => {
                            mass + test.vel.dot(&trial.grad_p) + trial.div * test.p + 0.5 * adjoint_resid.dot(&k_resid)
                        }
                    };
                    ke[(s, t)] += pb.dx * v;
                }
            }
        }
        system.accumulate(&ke, &fe, &element_dofs(mesh, element.id))?;
    }
    Ok(system)
}

/// GLS system: `(lambda u, v) + (v, grad p) + (u, grad q)
/// + delta1 (K(lambda u + grad p), lambda v + grad q) + delta2 (lambda div u, div v)
/// = delta2 (lambda f, div v) - (f, q)`, with the scalar `tr(lambda)/2` in the
/// `delta2` terms. Symmetric for every `delta1, delta2`.
pub fn assemble_gls(
    mesh: &Mesh,
    conductivity: &ConductivityField,
    source: &dyn Fn(SubdomainId, [f64; 2]) -> f64,
    delta1: f64,
    delta2: f64,
) -> Result<LinearSystem> {
    assemble(mesh, conductivity, source, MixedMethod::Gls { delta1, delta2 })
}

/// HVM system: `(lambda u, v) + (v, grad p) + (div u, q)
/// + 1/2 (K(lambda u + grad p), -lambda v + grad q) = (f, q)`.
pub fn assemble_hvm(mesh: &Mesh, conductivity: &ConductivityField, source: &dyn Fn(SubdomainId, [f64; 2]) -> f64) -> Result<LinearSystem> {
    assemble(mesh, conductivity, source, MixedMethod::Hvm)
}

/// Prescribes the potential on Dirichlet sides and the normal velocity
/// component on no-flux sides.
pub fn apply_mixed_boundary(system: &mut LinearSystem, mesh: &Mesh, boundary: &BoundaryConditions) -> Result<()> {
    for (node, value) in boundary.dirichlet_nodes(mesh) {
        system.constrain(mixed_dof(node, 2), value)?;
    }
    for (node, comp) in boundary.noflux_components(mesh) {
        system.constrain(mixed_dof(node, comp), 0.0)?;
    }
    Ok(())
}

pub fn solve_mixed(mut system: LinearSystem, mesh: &Mesh, boundary: &BoundaryConditions, method: MixedMethod) -> Result<MixedSolution> {
    apply_mixed_boundary(&mut system, mesh, boundary)?;
    let x = system.solve()?;
    split_solution(mesh, &x, method)
}

pub fn split_solution(mesh: &Mesh, x: &[f64], method: MixedMethod) -> Result<MixedSolution> {
    let nodal = (0..mesh.node_count()).map(|n| [x[mixed_dof(n, 0)], x[mixed_dof(n, 1)]]).collect();
    let p = (0..mesh.node_count()).map(|n| x[mixed_dof(n, 2)]).collect();
    Ok(MixedSolution { method, velocity: VelocityField::from_nodal(mesh, nodal)?, potential: ScalarField::new(mesh, p)? })
}

/// Assembles and solves one mixed method.
pub fn run_mixed(
    mesh: &Mesh,
    conductivity: &ConductivityField,
    source: &dyn Fn(SubdomainId, [f64; 2]) -> f64,
    boundary: &BoundaryConditions,
    method: MixedMethod,
) -> Result<MixedSolution> {
    let system = assemble(mesh, conductivity, source, method)?;
    solve_mixed(system, mesh, boundary, method)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{error_rule, Degree};
    use crate::field::VectorField;
    use crate::mesh::{build_structured_mesh, Rect};
    use crate::problem::{self, BoundaryConditions};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn unit_problem(degree: Degree) -> (Mesh, ConductivityField, BoundaryConditions) {
        let mesh = build_structured_mesh(3, 3, Rect::new(0.0, 0.0, 1.0, 1.0), degree, |_, _| 1).unwrap();
        let k = ConductivityField::new().with(1, Matrix2::identity()).unwrap();
        (mesh, k, BoundaryConditions::all_dirichlet(Arc::new(|x| x[0])))
    }

    #[test]
    fn gls_symmetry_and_gls1_identity() {
        let pd = problem::crumpton(1.0).unwrap();
        let mesh = pd.mesh(4, 4, Degree::Q1).unwrap();
        let a = assemble_gls(&mesh, &pd.conductivity, pd.source.as_ref(), 0.5, 0.5).unwrap().matrix();
        assert!(a.max_asymmetry() <= 1e-12 * a.max_abs());
        let a = assemble_gls(&mesh, &pd.conductivity, pd.source.as_ref(), -0.7, 3.0).unwrap().matrix();
        assert!(a.max_asymmetry() <= 1e-12 * a.max_abs());
        let h = assemble_hvm(&mesh, &pd.conductivity, pd.source.as_ref()).unwrap().matrix();
        assert!(h.max_asymmetry() > 0.0);
    }

    #[test]
    fn linear_potential_reproduced_by_both_methods() {
        for degree in [Degree::Q1, Degree::Q2] {
            let (mesh, k, bc) = unit_problem(degree);
            let gls = run_mixed(&mesh, &k, &|_, _| 0.0, &bc, MixedMethod::GLS_DEFAULT).unwrap();
            let hvm = run_mixed(&mesh, &k, &|_, _| 0.0, &bc, MixedMethod::Hvm).unwrap();
            for sol in [&gls, &hvm] {
                for (n, node) in mesh.nodes.iter().enumerate() {
                    assert_abs_diff_eq!(sol.potential.values[n], node.x, epsilon = 1e-10);
                    let u = sol.velocity.nodal.as_ref().unwrap()[n];
                    assert_abs_diff_eq!(u[0], -1.0, epsilon = 1e-10);
                    assert_abs_diff_eq!(u[1], 0.0, epsilon = 1e-10);
                }
            }
            let (ug, uh) = (gls.velocity.nodal.unwrap(), hvm.velocity.nodal.unwrap());
            for (a, b) in ug.iter().zip(&uh) {
                assert!((a[0] - b[0]).abs() <= 1e-8 && (a[1] - b[1]).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn hvm_coercivity_probe() {
        let pd = problem::crumpton(1.0).unwrap();
        for degree in [Degree::Q1, Degree::Q2] {
            let mesh = pd.mesh(4, 4, degree).unwrap();
            let mut system = assemble_hvm(&mesh, &pd.conductivity, pd.source.as_ref()).unwrap();
            apply_mixed_boundary(&mut system, &mesh, &pd.boundary).unwrap();
            let a = system.matrix();
            let alpha = pd.conductivity.iter().map(|(_, c)| c.min_eigen_k().min(c.min_eigen_lambda())).fold(f64::INFINITY, f64::min) / 2.0;
            let mut rng = rand::rngs::StdRng::seed_from_u64(5);
            let rule = error_rule(degree);
            for _ in 0..20 {
                let mut x: Vec<f64> = (0..a.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                for &d in system.constraints().keys() {
                    x[d] = 0.0;
                }
                let form: f64 = x.iter().zip(a.mul_vec(&x)).map(|(p, q)| p * q).sum();
                let sol = split_solution(&mesh, &x, MixedMethod::Hvm).unwrap();
                let mut norm2 = 0.0;
                for e in 0..mesh.element_count() {
                    let geom = mesh.geometry(e);
                    for (xi, w) in rule.iter() {
                        let dx = w * geom.jacobian(xi).det;
                        let v = sol.velocity.value(&mesh, e, xi);
                        let g = sol.potential.gradient(&mesh, e, xi);
                        norm2 += dx * (v[0] * v[0] + v[1] * v[1] + g[0] * g[0] + g[1] * g[1]);
                    }
                }
                assert!(form >= alpha * norm2 * (1.0 - 1e-10), "form {form} < {}", alpha * norm2);
            }
        }
    }
}
