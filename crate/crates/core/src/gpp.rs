//! Global C0 velocity post-processing of a Galerkin potential, with an
//! optional nodal transform that imposes the interface jump conditions.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix2, Vector2};

use crate::basis::{assembly_rule, tabulate};
use crate::error::{Error, Result};
use crate::field::{ConductivityField, InterfaceValues, ScalarField, StorageMode, VelocityField};
use crate::mesh::{interface_frames, InterfaceFrame, Mesh, SubdomainId};
use crate::sparse::{LinearSystem, Symmetry};

/// Weights of the divergence term, `(delta h)^alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GppParams {
    pub delta: f64,
    pub alpha: f64,
}

impl Default for GppParams {
    fn default() -> Self {
        Self { delta: 1.0, alpha: 1.0 }
    }
}

impl GppParams {
    fn weight(&self, h: f64) -> Result<f64> {
        if !(self.delta > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("GPP needs delta > 0 and finite alpha, got {self:?}")));
        }
        Ok((self.delta * h).powf(self.alpha))
    }
}

/// Relation `u1 = T u2` between the two side values at one interface node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceTransform {
    pub node: usize,
    pub sides: (SubdomainId, SubdomainId),
    pub t1: Matrix2<f64>,
    pub t2: Matrix2<f64>,
    pub t: Matrix2<f64>,
}

impl InterfaceTransform {
    pub fn apply(&self, u: [f64; 2]) -> [f64; 2] {
        let v = self.t * Vector2::new(u[0], u[1]);
        [v[0], v[1]]
    }
}

/// Rows of `T_i` are `(lambda_i^T tau)^T` and `n^T`, so `T_i u` collects the
/// tangential flux and the normal component that must match across the interface.
pub fn build_interface_transform(frame: &InterfaceFrame, k1: &Matrix2<f64>, k2: &Matrix2<f64>) -> Result<InterfaceTransform> {
    let side_matrix = |k: &Matrix2<f64>| -> Result<Matrix2<f64>> {
        let l = k.try_inverse().ok_or_else(|| Error::InvalidArgument("conductivity tensor is singular".into()))?;
        let (n, t) = (frame.normal, frame.tangent);
        Ok(Matrix2::new(
            l[(0, 0)] * t[0] + l[(1, 0)] * t[1],
            l[(0, 1)] * t[0] + l[(1, 1)] * t[1],
            n[0],
            n[1],
        ))
    };
    let t1 = side_matrix(k1)?;
    let t2 = side_matrix(k2)?;
    if t1.determinant().abs() < 1e-12 {
        return Err(Error::Interface { node: frame.node, reason: "transform matrix of side 1 is singular".into() });
    }
    let t = t1.try_inverse().expect("determinant checked") * t2;
    Ok(InterfaceTransform { node: frame.node, sides: frame.sides, t1, t2, t })
}

/// Transforms for every frame, keyed by node.
pub fn build_transforms(frames: &[InterfaceFrame], conductivity: &ConductivityField) -> Result<BTreeMap<usize, InterfaceTransform>> {
    frames
        .iter()
        .map(|f| {
            let k1 = conductivity.get(f.sides.0)?.k;
            let k2 = conductivity.get(f.sides.1)?.k;
            Ok((f.node, build_interface_transform(f, &k1, &k2)?))
        })
        .collect()
}

pub(crate) fn velocity_dofs(node_ids: &[usize]) -> Vec<usize> {
    node_ids.iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect()
}

/// Element matrix and load of the GPP form on one element. `weight` is the
/// divergence weight.
pub(crate) fn gpp_element(
    mesh: &Mesh,
    element: usize,
    lambda: &Matrix2<f64>,
    source: &dyn Fn(SubdomainId, [f64; 2]) -> f64,
    potential: &ScalarField,
    weight: f64,
) -> (DMatrix<f64>, Vec<f64>) {
    let npe = mesh.degree.nodes_per_element();
    let sub = mesh.elements[element].subdomain;
    let mut ke = DMatrix::zeros(2 * npe, 2 * npe);
    let mut fe = vec![0.0; 2 * npe];
    for pb in tabulate(mesh.degree, &mesh.geometry(element), &assembly_rule(mesh.degree)) {
        let f = source(sub, pb.x);
        let gp = potential.gradient(mesh, element, pb.xi);
        for a in 0..npe {
            let (pa, ga) = (pb.values[a], pb.grads[a]);
            for i in 0..2 {
                fe[2 * a + i] += pb.dx * (weight * f * ga[i] - gp[i] * pa);
                for b in 0..npe {
                    let (pbv, gb) = (pb.values[b], pb.grads[b]);
                    for j in 0..2 {
                        ke[(2 * a + i, 2 * b + j)] += pb.dx * (lambda[(i, j)] * pa * pbv + weight * ga[i] * gb[j]);
                    }
                }
            }
        }
    }
    (ke, fe)
}

/// `(lambda u, w) + (delta h)^alpha (div u, div w) = (delta h)^alpha (f, div w) - (grad p_h, w)`
/// for a C0 velocity with two unknowns per node.
pub fn assemble_gpp(
    mesh: &Mesh,
    conductivity: &ConductivityField,
    source: &dyn Fn(SubdomainId, [f64; 2]) -> f64,
    potential: &ScalarField,
    params: GppParams,
) -> Result<LinearSystem> {
    assemble(mesh, conductivity, source, potential, params, None)
}

/// GPP with the columns of side-1 elements multiplied by the nodal transforms,
/// so that the unknowns are the side-2 values at interface nodes.
pub fn assemble_gppid(
    mesh: &Mesh,
    conductivity: &ConductivityField,
    source: &dyn Fn(SubdomainId, [f64; 2]) -> f64,
    potential: &ScalarField,
    params: GppParams,
    transforms: &BTreeMap<usize, InterfaceTransform>,
) -> Result<LinearSystem> {
    for ie in &mesh.interface_edges {
        for node in mesh.edge_nodes(ie.elements[0], ie.edges[0]) {
            if !transforms.contains_key(&node) {
                return Err(Error::Interface { node, reason: "no transform for this interface node".into() });
            }
        }
    }
    assemble(mesh, conductivity, source, potential, params, Some(transforms))
}

fn assemble(
    mesh: &Mesh,
    conductivity: &ConductivityField,
    source: &dyn Fn(SubdomainId, [f64; 2]) -> f64,
    potential: &ScalarField,
    params: GppParams,
    transforms: Option<&BTreeMap<usize, InterfaceTransform>>,
) -> Result<LinearSystem> {
    conductivity.covers(mesh)?;
    if potential.degree != mesh.degree || potential.values.len() != mesh.node_count() {
        return Err(Error::InvalidArgument("potential does not live on this mesh".into()));
    }
    let weight = params.weight(mesh.h())?;
    let symmetry = if transforms.is_some() { Symmetry::General } else { Symmetry::Symmetric };
    let mut system = LinearSystem::new(2 * mesh.node_count(), symmetry);
    for element in &mesh.elements {
        let lambda = conductivity.get(element.subdomain)?.lambda;
        let (mut ke, fe) = gpp_element(mesh, element.id, &lambda, source, potential, weight);
        if let Some(tr) = transforms {
            if let Some(t) = element_transform(&element.node_ids, element.subdomain, tr) {
                ke = ke * t;
            }
        }
        system.accumulate(&ke, &fe, &velocity_dofs(&element.node_ids))?;
    }
    Ok(system)
}

/// Block-diagonal transform of an element on the lower-id side of an
/// interface, or `None` when the element has no transformed node.
pub(crate) fn element_transform(
    node_ids: &[usize],
    subdomain: SubdomainId,
    transforms: &BTreeMap<usize, InterfaceTransform>,
) -> Option<DMatrix<f64>> {
    let mut t = DMatrix::identity(2 * node_ids.len(), 2 * node_ids.len());
    let mut any = false;
    for (a, n) in node_ids.iter().enumerate() {
        if let Some(tr) = transforms.get(n).filter(|tr| tr.sides.0 == subdomain) {
            t.view_mut((2 * a, 2 * a), (2, 2)).copy_from(&tr.t);
            any = true;
        }
    }
    any.then_some(t)
}

pub fn solve_gpp(
    mesh: &Mesh,
    conductivity: &ConductivityField,
    source: &dyn Fn(SubdomainId, [f64; 2]) -> f64,
    potential: &ScalarField,
    params: GppParams,
) -> Result<VelocityField> {
    let x = assemble_gpp(mesh, conductivity, source, potential, params)?.solve()?;
    VelocityField::from_nodal(mesh, x.chunks(2).map(|c| [c[0], c[1]]).collect())
}

/// Builds the frames and transforms, solves for the reference values and
/// recovers the two-sided field.
pub fn solve_gppid(
    mesh: &Mesh,
    conductivity: &ConductivityField,
    source: &dyn Fn(SubdomainId, [f64; 2]) -> f64,
    potential: &ScalarField,
    params: GppParams,
) -> Result<VelocityField> {
    let frames = if mesh.interface_edges.is_empty() { Vec::new() } else { interface_frames(mesh)? };
    let transforms = build_transforms(&frames, conductivity)?;
    let x = assemble_gppid(mesh, conductivity, source, potential, params, &transforms)?.solve()?;
    recover_two_sided(mesh, &x, &transforms)
}

/// Side 2 keeps the reference value, side 1 gets `T u_ref`.
pub fn recover_two_sided(mesh: &Mesh, reference: &[f64], transforms: &BTreeMap<usize, InterfaceTransform>) -> Result<VelocityField> {
    if reference.len() != 2 * mesh.node_count() {
        return Err(Error::InvalidArgument(format!("{} reference values for {} nodes", reference.len(), mesh.node_count())));
    }
    let nodal: Vec<[f64; 2]> = reference.chunks(2).map(|c| [c[0], c[1]]).collect();
    let mut values = Vec::with_capacity(mesh.element_count() * mesh.degree.nodes_per_element());
    for e in &mesh.elements {
        for n in &e.node_ids {
            values.push(match transforms.get(n) {
                Some(tr) if tr.sides.0 == e.subdomain => tr.apply(nodal[*n]),
                _ => nodal[*n],
            });
        }
    }
    let mut field = VelocityField::from_element_values(mesh, StorageMode::TwoSidedInterface, values)?;
    field.interface = transforms
        .iter()
        .map(|(&n, tr)| (n, InterfaceValues { sides: tr.sides, side1: tr.apply(nodal[n]), side2: nodal[n] }))
        .collect();
    field.nodal = Some(nodal);
    Ok(field)
}

/// Largest violation of `u1.n = u2.n` and `(lambda1 u1).tau = (lambda2 u2).tau`
/// over the interface nodes of a two-sided field.
pub fn interface_jump_residual(field: &VelocityField, frames: &[InterfaceFrame], conductivity: &ConductivityField) -> Result<(f64, f64)> {
    let (mut normal, mut tangential) = (0.0f64, 0.0f64);
    for f in frames {
        let Some(iv) = field.interface.get(&f.node) else {
            return Err(Error::Interface { node: f.node, reason: "field has no side values here".into() });
        };
        let l1 = conductivity.get(iv.sides.0)?.lambda;
        let l2 = conductivity.get(iv.sides.1)?.lambda;
        let (u1, u2) = (Vector2::from(iv.side1), Vector2::from(iv.side2));
        let (n, t) = (Vector2::from(f.normal), Vector2::from(f.tangent));
        normal = normal.max((u1 - u2).dot(&n).abs());
        tangential = tangential.max((l1 * u1 - l2 * u2).dot(&t).abs());
    }
    Ok((normal, tangential))
}
