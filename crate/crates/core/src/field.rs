//! Finite element fields: nodal potentials and velocity fields in C0,
//! two-sided-interface and macro-discontinuous storage.

use std::collections::BTreeMap;

use nalgebra::{Matrix2, Vector2};

use crate::basis::{shape_gradients, shape_hessians, shape_values, Degree, RefPoint};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, SubdomainId};

/// Hydraulic conductivity of one medium and its inverse, the resistivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conductivity {
    pub k: Matrix2<f64>,
    pub lambda: Matrix2<f64>,
}

impl Conductivity {
    pub fn new(k: Matrix2<f64>) -> Result<Self> {
        let scale = k.abs().max();
        if !k.iter().all(|v| v.is_finite()) || (k[(0, 1)] - k[(1, 0)]).abs() > 1e-12 * scale {
            return Err(Error::InvalidArgument(format!("conductivity {k:?} is not symmetric")));
        }
        if !(k[(0, 0)] > 0.0 && k.determinant() > 0.0) {
            return Err(Error::InvalidArgument(format!("conductivity {k:?} is not positive definite")));
        }
        let lambda = k.try_inverse().expect("positive definite matrices are invertible");
        Ok(Self { k, lambda })
    }

    pub fn isotropic(value: f64) -> Result<Self> {
        Self::new(Matrix2::identity() * value)
    }

    /// Scalar stand-in `tr(lambda)/2` used where a scalar resistivity is needed.
    pub fn mean_resistivity(&self) -> f64 {
        0.5 * self.lambda.trace()
    }

    pub fn min_eigen_k(&self) -> f64 {
        self.k.symmetric_eigenvalues().min()
    }

    pub fn min_eigen_lambda(&self) -> f64 {
        self.lambda.symmetric_eigenvalues().min()
    }

    /// `-K g`
    pub fn darcy(&self, grad: [f64; 2]) -> [f64; 2] {
        let u = -(self.k * Vector2::new(grad[0], grad[1]));
        [u[0], u[1]]
    }
}

/// Piecewise-constant conductivity, one tensor per subdomain.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConductivityField {
    media: BTreeMap<SubdomainId, Conductivity>,
}

impl ConductivityField {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, subdomain: SubdomainId, k: Matrix2<f64>) -> Result<Self> {
        self.media.insert(subdomain, Conductivity::new(k)?);
        Ok(self)
    }

    pub fn get(&self, subdomain: SubdomainId) -> Result<&Conductivity> {
        self.media
            .get(&subdomain)
            .ok_or_else(|| Error::InvalidArgument(format!("no conductivity given for subdomain {subdomain}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (SubdomainId, &Conductivity)> {
        self.media.iter().map(|(&s, c)| (s, c))
    }

    /// Checks every subdomain of the mesh has a tensor.
    pub fn covers(&self, mesh: &Mesh) -> Result<()> {
        for s in mesh.subdomains() {
            self.get(s)?;
        }
        Ok(())
    }
}

/// Nodal coefficients of a C0 Lagrangian scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub degree: Degree,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::InvalidArgument(format!("{} coefficients for {} nodes", values.len(), mesh.node_count())));
        }
        Ok(Self { degree: mesh.degree, values })
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: &Mesh, f: impl Fn(SubdomainId, [f64; 2]) -> f64) -> Self {
        let mut values = vec![0.0; mesh.node_count()];
        for e in &mesh.elements {
            for &n in &e.node_ids {
                values[n] = f(e.subdomain, mesh.nodes[n].coords());
            }
        }
        Self { degree: mesh.degree, values }
    }

    pub fn value(&self, mesh: &Mesh, element: usize, xi: RefPoint) -> f64 {
        let ids = &mesh.elements[element].node_ids;
        shape_values(self.degree, xi).iter().zip(ids).map(|(n, &i)| n * self.values[i]).sum()
    }

    pub fn gradient(&self, mesh: &Mesh, element: usize, xi: RefPoint) -> [f64; 2] {
        let ids = &mesh.elements[element].node_ids;
        let jac = mesh.geometry(element).jacobian(xi);
        let mut g = [0.0; 2];
        for (r, &i) in shape_gradients(self.degree, xi).iter().zip(ids) {
            let p = jac.physical_gradient(*r);
            g[0] += p[0] * self.values[i];
            g[1] += p[1] * self.values[i];
        }
        g
    }

    /// Physical Hessian `[xx, xy, yy]`; meshes are affine so this is exact.
    pub fn hessian(&self, mesh: &Mesh, element: usize, xi: RefPoint) -> [f64; 3] {
        let ids = &mesh.elements[element].node_ids;
        let jac = mesh.geometry(element).jacobian(xi);
        let mut h = [0.0; 3];
        for (r, &i) in shape_hessians(self.degree, xi).iter().zip(ids) {
            let p = jac.physical_hessian(*r);
            for c in 0..3 {
                h[c] += p[c] * self.values[i];
            }
        }
        h
    }
}

/// Anything that can be evaluated as a vector field element by element.
pub trait VectorField {
    fn value(&self, mesh: &Mesh, element: usize, xi: RefPoint) -> [f64; 2];
    fn divergence(&self, mesh: &Mesh, element: usize, xi: RefPoint) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageMode {
    /// One value per node.
    C0Nodal,
    /// One value per node, except interface nodes that carry one value per side.
    TwoSidedInterface,
    /// C0 inside each macroelement, independent across macroelement edges.
    MacroDiscontinuous,
}

/// Side values at one interface node of a two-sided field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceValues {
    /// `(lower id, higher id)`
    pub sides: (SubdomainId, SubdomainId),
    pub side1: [f64; 2],
    pub side2: [f64; 2],
}

/// Vector-valued Lagrangian field stored element by element, so that every
/// storage mode is evaluated the same way.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub degree: Degree,
    pub mode: StorageMode,
    element_values: Vec<[f64; 2]>,
    /// Nodal values for C0 fields; reference values for two-sided fields.
    pub nodal: Option<Vec<[f64; 2]>>,
    pub interface: BTreeMap<usize, InterfaceValues>,
    /// Macroelement owning each element, for macro-discontinuous fields.
    pub macro_of_element: Option<Vec<usize>>,
}

impl VelocityField {
    pub fn from_nodal(mesh: &Mesh, nodal: Vec<[f64; 2]>) -> Result<Self> {
        if nodal.len() != mesh.node_count() {
            return Err(Error::InvalidArgument(format!("{} nodal velocities for {} nodes", nodal.len(), mesh.node_count())));
        }
        let element_values = mesh.elements.iter().flat_map(|e| e.node_ids.iter().map(|&n| nodal[n])).collect();
        Ok(Self {
            degree: mesh.degree,
            mode: StorageMode::C0Nodal,
            element_values,
            nodal: Some(nodal),
            interface: BTreeMap::new(),
            macro_of_element: None,
        })
    }

    /// Field from per-element nodal values, laid out element after element.
    pub fn from_element_values(mesh: &Mesh, mode: StorageMode, element_values: Vec<[f64; 2]>) -> Result<Self> {
        let npe = mesh.degree.nodes_per_element();
        if element_values.len() != npe * mesh.element_count() {
            return Err(Error::InvalidArgument(format!(
                "{} element values for {} elements of {} nodes",
                element_values.len(),
                mesh.element_count(),
                npe
            )));
        }
        Ok(Self { degree: mesh.degree, mode, element_values, nodal: None, interface: BTreeMap::new(), macro_of_element: None })
    }

    pub fn interpolate(mesh: &Mesh, f: impl Fn(SubdomainId, [f64; 2]) -> [f64; 2]) -> Self {
        let element_values =
            mesh.elements.iter().flat_map(|e| e.node_ids.iter().map(|&n| f(e.subdomain, mesh.nodes[n].coords())).collect::<Vec<_>>()).collect();
        Self {
            degree: mesh.degree,
            mode: StorageMode::MacroDiscontinuous,
            element_values,
            nodal: None,
            interface: BTreeMap::new(),
            macro_of_element: None,
        }
    }

    pub fn element_nodal_values(&self, element: usize) -> &[[f64; 2]] {
        let npe = self.degree.nodes_per_element();
        &self.element_values[element * npe..(element + 1) * npe]
    }

    pub fn element_values(&self) -> &[[f64; 2]] {
        &self.element_values
    }

    /// Physical Jacobian `[[dux/dx, dux/dy], [duy/dx, duy/dy]]`.
    pub fn jacobian(&self, mesh: &Mesh, element: usize, xi: RefPoint) -> [[f64; 2]; 2] {
        let jac = mesh.geometry(element).jacobian(xi);
        let mut d = [[0.0; 2]; 2];
        for (r, u) in shape_gradients(self.degree, xi).iter().zip(self.element_nodal_values(element)) {
            let g = jac.physical_gradient(*r);
            for c in 0..2 {
                d[c][0] += u[c] * g[0];
                d[c][1] += u[c] * g[1];
            }
        }
        d
    }

    pub fn curl(&self, mesh: &Mesh, element: usize, xi: RefPoint) -> f64 {
        curl2d(self, mesh, element, xi)
    }

    /// Largest nodal deviation from `exact`, over every stored element value.
    pub fn max_nodal_error(&self, mesh: &Mesh, exact: impl Fn(SubdomainId, [f64; 2]) -> [f64; 2]) -> f64 {
        let mut worst = 0.0f64;
        for e in &mesh.elements {
            for (&n, u) in e.node_ids.iter().zip(self.element_nodal_values(e.id)) {
                let v = exact(e.subdomain, mesh.nodes[n].coords());
                worst = worst.max((u[0] - v[0]).abs()).max((u[1] - v[1]).abs());
            }
        }
        worst
    }
}

impl VectorField for VelocityField {
    fn value(&self, _mesh: &Mesh, element: usize, xi: RefPoint) -> [f64; 2] {
        let mut u = [0.0; 2];
        for (n, v) in shape_values(self.degree, xi).iter().zip(self.element_nodal_values(element)) {
            u[0] += n * v[0];
            u[1] += n * v[1];
        }
        u
    }

    fn divergence(&self, mesh: &Mesh, element: usize, xi: RefPoint) -> f64 {
        let d = self.jacobian(mesh, element, xi);
        d[0][0] + d[1][1]
    }
}

/// `d u_y/dx - d u_x/dy` of a finite element field.
pub fn curl2d(field: &VelocityField, mesh: &Mesh, element: usize, xi: RefPoint) -> f64 {
    let d = field.jacobian(mesh, element, xi);
    d[1][0] - d[0][1]
}
