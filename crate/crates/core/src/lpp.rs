//! Local velocity post-processing on macroelements.
//!
//! Each macro solves
//! `(lambda u, v)_h + h^2 (div u, div v) + h^2 (curl lambda u, curl lambda v)
//!  = -(grad p_h, v)_h + h^2 (f, div v)`
//! where `(.,.)_h` samples the superconvergent points of every element.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rayon::prelude::*;

use crate::basis::{assembly_rule, superconvergent_points, tabulate};
use crate::error::{Error, Result};
use crate::field::{ConductivityField, InterfaceValues, ScalarField, StorageMode, VelocityField};
use crate::gpp::{build_transforms, element_transform, velocity_dofs, InterfaceTransform};
use crate::mesh::{interface_frames_within, InterfaceFrame, Macroelement, Mesh, SubdomainId};

/// Relative pivot size below which a local system counts as singular.
const SINGULAR_PIVOT: f64 = 1e-12;

/// Post-processed velocity of one macroelement.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroVelocity {
    pub macro_id: usize,
    /// Values at every node of every macro element, element after element,
    /// in the order of the macro's element list.
    pub element_values: Vec<[f64; 2]>,
    /// Single-valued unknowns per macro node (global id), reference side at
    /// interior-interface nodes.
    pub reference: BTreeMap<usize, [f64; 2]>,
    /// Side values at interface nodes interior to the macro.
    pub interface: BTreeMap<usize, InterfaceValues>,
    pub frames: Vec<InterfaceFrame>,
}

fn macro_h(mesh: &Mesh, mac: &Macroelement) -> f64 {
    mac.element_ids.iter().map(|&e| mesh.geometry(e).diameter()).fold(0.0, f64::max)
}

/// Element matrix and load of the local form on one element.
fn lpp_element(
    mesh: &Mesh,
    element: usize,
    lambda: &Matrix2<f64>,
    source: &dyn Fn(SubdomainId, [f64; 2]) -> f64,
    potential: &ScalarField,
    h2: f64,
) -> (DMatrix<f64>, Vec<f64>) {
    let npe = mesh.degree.nodes_per_element();
    let sub = mesh.elements[element].subdomain;
    let geom = mesh.geometry(element);
    let mut ke = DMatrix::zeros(2 * npe, 2 * npe);
    let mut fe = vec![0.0; 2 * npe];
    for pb in tabulate(mesh.degree, &geom, &superconvergent_points(mesh.degree)) {
        let gp = potential.gradient(mesh, element, pb.xi);
        for a in 0..npe {
            for i in 0..2 {
                fe[2 * a + i] -= pb.dx * gp[i] * pb.values[a];
                for b in 0..npe {
                    for j in 0..2 {
                        ke[(2 * a + i, 2 * b + j)] += pb.dx * lambda[(i, j)] * pb.values[a] * pb.values[b];
                    }
                }
            }
        }
    }
    for pb in tabulate(mesh.degree, &geom, &assembly_rule(mesh.degree)) {
        let f = source(sub, pb.x);
        // div and curl(lambda .) of phi_a e_i
        let mut div = vec![0.0; 2 * npe];
        let mut curl = vec![0.0; 2 * npe];
        for a in 0..npe {
            let g = pb.grads[a];
            for i in 0..2 {
                div[2 * a + i] = g[i];
                curl[2 * a + i] = g[0] * lambda[(1, i)] - g[1] * lambda[(0, i)];
            }
        }
        for s in 0..2 * npe {
            fe[s] += pb.dx * h2 * f * div[s];
            for t in 0..2 * npe {
                ke[(s, t)] += pb.dx * h2 * (div[s] * div[t] + curl[s] * curl[t]);
            }
        }
    }
    (ke, fe)
}

/// LPP on one macro with no interface constraint.
pub fn lpp_solve_macro(
    mesh: &Mesh,
    mac: &Macroelement,
    potential: &ScalarField,
    conductivity: &ConductivityField,
    source: &dyn Fn(SubdomainId, [f64; 2]) -> f64,
) -> Result<MacroVelocity> {
    solve_macro(mesh, mac, potential, conductivity, source, &[], &BTreeMap::new())
}

/// LPP on one macro whose interior interface nodes carry two side values
/// related by the nodal transform.
pub fn lpp_solve_macro_with_interface(
    mesh: &Mesh,
    mac: &Macroelement,
    potential: &ScalarField,
    conductivity: &ConductivityField,
    source: &dyn Fn(SubdomainId, [f64; 2]) -> f64,
) -> Result<MacroVelocity> {
    let frames = interface_frames_within(mesh, &mac.element_ids)?;
    let transforms = build_transforms(&frames, conductivity)?;
    solve_macro(mesh, mac, potential, conductivity, source, &frames, &transforms)
}

fn solve_macro(
    mesh: &Mesh,
    mac: &Macroelement,
    potential: &ScalarField,
    conductivity: &ConductivityField,
    source: &dyn Fn(SubdomainId, [f64; 2]) -> f64,
    frames: &[InterfaceFrame],
    transforms: &BTreeMap<usize, InterfaceTransform>,
) -> Result<MacroVelocity> {
    if mac.element_ids.is_empty() {
        return Err(Error::InvalidArgument(format!("macroelement {} is empty", mac.id)));
    }
    let mut local: BTreeMap<usize, usize> = BTreeMap::new();
    for &e in &mac.element_ids {
        for &n in &mesh.elements[e].node_ids {
            let next = local.len();
            local.entry(n).or_insert(next);
        }
    }
    let dim = 2 * local.len();
    let h = macro_h(mesh, mac);
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut b = DVector::<f64>::zeros(dim);
    for &e in &mac.element_ids {
        let el = &mesh.elements[e];
        let lambda = conductivity.get(el.subdomain)?.lambda;
        let (mut ke, fe) = lpp_element(mesh, e, &lambda, source, potential, h * h);
        if let Some(t) = element_transform(&el.node_ids, el.subdomain, transforms) {
            ke = ke * t;
        }
        let local_nodes: Vec<usize> = el.node_ids.iter().map(|n| local[n]).collect();
        let dofs = velocity_dofs(&local_nodes);
        for (r, &gr) in dofs.iter().enumerate() {
            b[gr] += fe[r];
            for (c, &gc) in dofs.iter().enumerate() {
                a[(gr, gc)] += ke[(r, c)];
            }
        }
    }

    // Equilibrate before judging the pivots, so contrasts in lambda do not
    // look like instability.
    let scale: Vec<f64> = (0..dim).map(|i| 1.0 / a[(i, i)].abs().sqrt().max(f64::MIN_POSITIVE)).collect();
    let scaled = DMatrix::from_fn(dim, dim, |i, j| a[(i, j)] * scale[i] * scale[j]);
    let lu = scaled.lu();
    let diag = lu.u().diagonal().map(f64::abs);
    if !(diag.min() > SINGULAR_PIVOT * diag.max()) {
        return Err(Error::SingularMacro { macro_id: mac.id });
    }
    let rhs = DVector::from_fn(dim, |i, _| b[i] * scale[i]);
    let y = lu.solve(&rhs).ok_or(Error::SingularMacro { macro_id: mac.id })?;
    let x: Vec<f64> = (0..dim).map(|i| y[i] * scale[i]).collect();

    let reference: BTreeMap<usize, [f64; 2]> = local.iter().map(|(&n, &l)| (n, [x[2 * l], x[2 * l + 1]])).collect();
    let mut element_values = Vec::with_capacity(mac.element_ids.len() * mesh.degree.nodes_per_element());
    for &e in &mac.element_ids {
        let el = &mesh.elements[e];
        for n in &el.node_ids {
            let u = reference[n];
            element_values.push(match transforms.get(n) {
                Some(tr) if tr.sides.0 == el.subdomain => tr.apply(u),
                _ => u,
            });
        }
    }
    let interface = transforms
        .iter()
        .map(|(&n, tr)| (n, InterfaceValues { sides: tr.sides, side1: tr.apply(reference[&n]), side2: reference[&n] }))
        .collect();
    Ok(MacroVelocity { macro_id: mac.id, element_values, reference, interface, frames: frames.to_vec() })
}

/// Solves every macro in parallel and assembles the macro-discontinuous field.
/// With `with_interface`, macros that contain an interface use the nodal
/// transform inside.
pub fn lpp_solve_all(
    mesh: &Mesh,
    macros: &[Macroelement],
    potential: &ScalarField,
    conductivity: &ConductivityField,
    source: &(dyn Fn(SubdomainId, [f64; 2]) -> f64 + Sync),
    with_interface: bool,
) -> Result<(VelocityField, Vec<MacroVelocity>)> {
    conductivity.covers(mesh)?;
    let mut owner = vec![usize::MAX; mesh.element_count()];
    for (i, m) in macros.iter().enumerate() {
        for &e in &m.element_ids {
            if e >= owner.len() || owner[e] != usize::MAX {
                return Err(Error::InvalidArgument(format!("element {e} is not covered exactly once by the macroelements")));
            }
            owner[e] = i;
        }
    }
    if let Some(e) = owner.iter().position(|&o| o == usize::MAX) {
        return Err(Error::InvalidArgument(format!("element {e} belongs to no macroelement")));
    }
    let results: Vec<Result<MacroVelocity>> = macros
        .par_iter()
        .map(|m| {
            if with_interface && m.has_interior_interface {
                lpp_solve_macro_with_interface(mesh, m, potential, conductivity, source)
            } else {
                lpp_solve_macro(mesh, m, potential, conductivity, source)
            }
        })
        .collect();
    let mut solved = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(v) => solved.push(v),
            Err(e) => failures.push(e),
        }
    }
    let count = failures.len();
    if let Some(first) = failures.into_iter().next() {
        return Err(Error::MacroFailures { count, first: Box::new(first) });
    }

    let npe = mesh.degree.nodes_per_element();
    let mut values = vec![[0.0; 2]; npe * mesh.element_count()];
    for (m, v) in macros.iter().zip(&solved) {
        for (k, &e) in m.element_ids.iter().enumerate() {
            values[e * npe..(e + 1) * npe].copy_from_slice(&v.element_values[k * npe..(k + 1) * npe]);
        }
    }
    let mut field = VelocityField::from_element_values(mesh, StorageMode::MacroDiscontinuous, values)?;
    field.macro_of_element = Some(owner);
    Ok((field, solved))
}

/// Largest violation of the interface conditions at macro-interior
/// interface nodes.
pub fn macro_jump_residual(solved: &[MacroVelocity], conductivity: &ConductivityField) -> Result<(f64, f64)> {
    let (mut normal, mut tangential) = (0.0f64, 0.0f64);
    for m in solved {
        for f in &m.frames {
            let iv = &m.interface[&f.node];
            let l1 = conductivity.get(iv.sides.0)?.lambda;
            let l2 = conductivity.get(iv.sides.1)?.lambda;
            let (u1, u2) = (Vector2::from(iv.side1), Vector2::from(iv.side2));
            normal = normal.max((u1 - u2).dot(&Vector2::from(f.normal)).abs());
            tangential = tangential.max((l1 * u1 - l2 * u2).dot(&Vector2::from(f.tangent)).abs());
        }
    }
    Ok((normal, tangential))
}

/// Smallest generalized eigenvalue of the local form against the local
/// velocity mass matrix, for a macro without interface constraints.
pub fn norm_equivalence_constant(
    mesh: &Mesh,
    mac: &Macroelement,
    conductivity: &ConductivityField,
) -> Result<f64> {
    let zero = ScalarField::new(mesh, vec![0.0; mesh.node_count()])?;
    let mut local: BTreeMap<usize, usize> = BTreeMap::new();
    for &e in &mac.element_ids {
        for &n in &mesh.elements[e].node_ids {
            let next = local.len();
            local.entry(n).or_insert(next);
        }
    }
    let dim = 2 * local.len();
    let h = macro_h(mesh, mac);
    let (mut a, mut m) = (DMatrix::<f64>::zeros(dim, dim), DMatrix::<f64>::zeros(dim, dim));
    for &e in &mac.element_ids {
        let el = &mesh.elements[e];
        let lambda = conductivity.get(el.subdomain)?.lambda;
        let (ke, _) = lpp_element(mesh, e, &lambda, &|_, _| 0.0, &zero, h * h);
        let npe = mesh.degree.nodes_per_element();
        let mut me = DMatrix::<f64>::zeros(2 * npe, 2 * npe);
        for pb in tabulate(mesh.degree, &mesh.geometry(e), &assembly_rule(mesh.degree)) {
            for i in 0..npe {
                for j in 0..npe {
                    let v = pb.dx * pb.values[i] * pb.values[j];
                    me[(2 * i, 2 * j)] += v;
                    me[(2 * i + 1, 2 * j + 1)] += v;
                }
            }
        }
        let dofs = velocity_dofs(&el.node_ids.iter().map(|n| local[n]).collect::<Vec<_>>());
        for (r, &gr) in dofs.iter().enumerate() {
            for (c, &gc) in dofs.iter().enumerate() {
                a[(gr, gc)] += ke[(r, c)];
                m[(gr, gc)] += me[(r, c)];
            }
        }
    }
    // M = L L^T, eigenvalues of L^-1 A L^-T
    let l = m.cholesky().ok_or_else(|| Error::InvalidArgument("macro mass matrix not SPD".into()))?.l();
    let li = l.try_inverse().ok_or(Error::SingularMacro { macro_id: mac.id })?;
    let c = &li * a * li.transpose();
    let c = (&c + c.transpose()) * 0.5;
    Ok(c.symmetric_eigenvalues().min())
}
