//! Method dispatch and mesh-refinement studies against exact solutions.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::basis::Degree;
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField, VelocityField};
use crate::gpp::{solve_gpp, solve_gppid, GppParams};
use crate::lpp::{lpp_solve_all, MacroVelocity};
use crate::mesh::{interface_frames_within, partition_macroelements_shifted, Macroelement, Mesh};
use crate::mixed::{run_mixed, MixedMethod};
use crate::potential::{error_norm, galerkin_velocity, solve_potential, ErrorNorm, FieldRef};
use crate::problem::ProblemDefinition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Galerkin,
    Gls,
    Gls1,
    Hvm,
    Gpp,
    Gppid,
    Lpp,
    LppId,
}

impl Method {
    pub const ALL: [Method; 8] =
        [Method::Galerkin, Method::Gls, Method::Gls1, Method::Hvm, Method::Gpp, Method::Gppid, Method::Lpp, Method::LppId];

    pub fn name(self) -> &'static str {
        match self {
            Method::Galerkin => "galerkin",
            Method::Gls => "gls",
            Method::Gls1 => "gls1",
            Method::Hvm => "hvm",
            Method::Gpp => "gpp",
            Method::Gppid => "gppid",
            Method::Lpp => "lpp",
            Method::LppId => "lpp_id",
        }
    }

    pub fn is_mixed(self) -> bool {
        matches!(self, Method::Gls | Method::Gls1 | Method::Hvm)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| Error::Unknown { kind: "method", name: s.to_string() })
    }
}

/// Tunable parameters shared by every method; unused fields are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodOptions {
    pub delta1: f64,
    pub delta2: f64,
    pub gpp: GppParams,
    /// Macroelement block size for the local post-processing.
    pub macros: (usize, usize),
}

impl Default for MethodOptions {
    fn default() -> Self {
        Self { delta1: 0.5, delta2: 0.5, gpp: GppParams::default(), macros: (2, 2) }
    }
}

/// Output of one method on one mesh.
pub struct RunResult {
    pub method: Method,
    pub mesh: Mesh,
    pub potential: ScalarField,
    /// `None` for the Galerkin method, whose velocity is `-K grad p_h`.
    pub velocity: Option<VelocityField>,
    pub macros: Vec<Macroelement>,
    pub macro_solutions: Vec<MacroVelocity>,
    pub problem: ProblemDefinition,
}

impl RunResult {
    pub fn velocity_field(&self) -> Box<dyn VectorField + '_> {
        match &self.velocity {
            Some(v) => Box::new(v),
            None => Box::new(galerkin_velocity(&self.potential, &self.problem.conductivity)),
        }
    }

    /// Nodal velocity of every element, element after element.
    pub fn element_velocities(&self) -> Vec<[f64; 2]> {
        match &self.velocity {
            Some(v) => v.element_values().to_vec(),
            None => {
                let field = self.velocity_field();
                let nodes = crate::basis::ReferenceElement::new(self.mesh.degree).nodes;
                self.mesh.elements.iter().flat_map(|e| nodes.iter().map(|&xi| field.value(&self.mesh, e.id, xi)).collect::<Vec<_>>()).collect()
            }
        }
    }
}

impl<T: VectorField + ?Sized> VectorField for &T {
    fn value(&self, mesh: &Mesh, element: usize, xi: crate::basis::RefPoint) -> [f64; 2] {
        (**self).value(mesh, element, xi)
    }
    fn divergence(&self, mesh: &Mesh, element: usize, xi: crate::basis::RefPoint) -> f64 {
        (**self).divergence(mesh, element, xi)
    }
}

/// Macro layout for the local post-processing. The plain variant uses aligned
/// blocks; the interface variant picks the block shift that leaves the fewest
/// interface edges on block boundaries, skipping layouts with a triple point
/// inside a block. Ties go to the smallest shift.
pub fn choose_macros(mesh: &Mesh, block: (usize, usize), interior_interface: bool) -> Result<Vec<Macroelement>> {
    let (mx, my) = block;
    if !interior_interface {
        return partition_macroelements_shifted(mesh, mx, my, 0, 0);
    }
    let mut best: Option<(usize, Vec<Macroelement>)> = None;
    let mut last_err = None;
    for sx in 0..mx {
        for sy in 0..my {
            match partition_macroelements_shifted(mesh, mx, my, sx, sy) {
                Ok(macros) => {
                    // layouts that put a triple point inside a macro cannot be transformed
                    let valid = macros
                        .iter()
                        .filter(|m| m.has_interior_interface)
                        .all(|m| interface_frames_within(mesh, &m.element_ids).is_ok());
                    if !valid {
                        continue;
                    }
                    let on_edges = boundary_interface_edges(mesh, &macros);
                    if best.as_ref().is_none_or(|(b, _)| on_edges < *b) {
                        best = Some((on_edges, macros));
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
    }
    match (best, last_err) {
        (Some((_, m)), _) => Ok(m),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::InvalidArgument("no macro layout".into())),
    }
}

fn boundary_interface_edges(mesh: &Mesh, macros: &[Macroelement]) -> usize {
    let mut owner = vec![0; mesh.element_count()];
    for m in macros {
        for &e in &m.element_ids {
            owner[e] = m.id;
        }
    }
    mesh.interface_edges.iter().filter(|ie| owner[ie.elements[0]] != owner[ie.elements[1]]).count()
}

/// Solves `problem` with `method` on an `nx x ny` mesh. Post-processing
/// methods start from the Galerkin potential of the same mesh.
pub fn run_method(
    problem: &ProblemDefinition,
    method: Method,
    degree: Degree,
    nx: usize,
    ny: usize,
    options: &MethodOptions,
) -> Result<RunResult> {
    let mesh = problem.mesh(nx, ny, degree)?;
    let k = &problem.conductivity;
    let src = problem.source.as_ref();
    let result = |potential, velocity, macros, macro_solutions| RunResult {
        method,
        mesh: mesh.clone(),
        potential,
        velocity,
        macros,
        macro_solutions,
        problem: problem.clone(),
    };
    if method.is_mixed() {
        let mm = match method {
            Method::Gls => MixedMethod::Gls { delta1: options.delta1, delta2: options.delta2 },
            Method::Gls1 => MixedMethod::GLS1,
            _ => MixedMethod::Hvm,
        };
        let sol = run_mixed(&mesh, k, src, &problem.boundary, mm)?;
        return Ok(result(sol.potential, Some(sol.velocity), Vec::new(), Vec::new()));
    }
    let p = solve_potential(&mesh, k, src, &problem.boundary)?;
    Ok(match method {
        Method::Gpp => {
            let u = solve_gpp(&mesh, k, src, &p, options.gpp)?;
            result(p, Some(u), Vec::new(), Vec::new())
        }
        Method::Gppid => {
            let u = solve_gppid(&mesh, k, src, &p, options.gpp)?;
            result(p, Some(u), Vec::new(), Vec::new())
        }
        Method::Lpp | Method::LppId => {
            let with_interface = method == Method::LppId;
            let macros = choose_macros(&mesh, options.macros, with_interface)?;
            let (u, solved) = lpp_solve_all(&mesh, &macros, &p, k, src, with_interface)?;
            result(p, Some(u), macros, solved)
        }
        _ => result(p, None, Vec::new(), Vec::new()),
    })
}

/// Errors of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub l2_p: f64,
    pub h1_p: f64,
    pub l2_u: f64,
    pub l2_div: f64,
    /// Gradient error sampled at the superconvergent points.
    pub grad_sc: f64,
}

pub const ERROR_COLUMNS: [&str; 5] = ["l2_p", "h1_p", "l2_u", "l2_div", "grad_sc"];

impl ErrorRow {
    pub fn errors(&self) -> [f64; 5] {
        [self.l2_p, self.h1_p, self.l2_u, self.l2_div, self.grad_sc]
    }

    pub fn error(&self, column: &str) -> Option<f64> {
        ERROR_COLUMNS.iter().position(|c| *c == column).map(|i| self.errors()[i])
    }
}

pub fn measure_errors(run: &RunResult) -> Result<ErrorRow> {
    let exact = run.problem.exact()?.as_ref();
    let mesh = &run.mesh;
    let p = FieldRef::Scalar(&run.potential);
    let u = run.velocity_field();
    Ok(ErrorRow {
        nx: mesh.nx,
        ny: mesh.ny,
        h: mesh.h(),
        l2_p: error_norm(mesh, FieldRef::Scalar(&run.potential), exact, ErrorNorm::L2)?,
        h1_p: error_norm(mesh, p, exact, ErrorNorm::H1Semi)?,
        l2_u: error_norm(mesh, FieldRef::Vector(u.as_ref()), exact, ErrorNorm::L2)?,
        l2_div: error_norm(mesh, FieldRef::Vector(u.as_ref()), exact, ErrorNorm::Div)?,
        grad_sc: error_norm(mesh, FieldRef::Scalar(&run.potential), exact, ErrorNorm::DiscreteGradient)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub problem: String,
    pub method: Method,
    pub degree: Degree,
    /// Sorted by decreasing `h`.
    pub rows: Vec<ErrorRow>,
}

impl ConvergenceReport {
    /// `log(e_i / e_{i+1}) / log(h_i / h_{i+1})` for each consecutive pair.
    pub fn pairwise_rates(&self, column: &str) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0].error(column).unwrap_or(f64::NAN), w[1].error(column).unwrap_or(f64::NAN));
                (a / b).ln() / (w[0].h / w[1].h).ln()
            })
            .collect()
    }

    /// Least-squares slope of `log e` against `log h` over the finest three
    /// meshes (all meshes when fewer).
    pub fn ls_rate(&self, column: &str) -> f64 {
        let tail = &self.rows[self.rows.len().saturating_sub(3)..];
        let pts: Vec<(f64, f64)> = tail.iter().map(|r| (r.h.ln(), r.error(column).unwrap_or(f64::NAN).ln())).collect();
        least_squares_slope(&pts)
    }
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Runs `method` on every mesh of `meshes` (in parallel) and collects errors.
pub fn run_convergence(
    problem: &ProblemDefinition,
    method: Method,
    degree: Degree,
    meshes: &[(usize, usize)],
    options: &MethodOptions,
) -> Result<ConvergenceReport> {
    problem.exact()?;
    if meshes.is_empty() {
        return Err(Error::InvalidArgument("empty mesh list".into()));
    }
    let rows: Vec<Result<ErrorRow>> = meshes
        .par_iter()
        .map(|&(nx, ny)| {
            run_method(problem, method, degree, nx, ny, options)
                .and_then(|r| measure_errors(&r))
                .map_err(|e| Error::MeshRun { nx, ny, source: Box::new(e) })
        })
        .collect();
    let mut rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.h.total_cmp(&a.h));
    if rows.windows(2).any(|w| !(w[1].h < w[0].h)) {
        return Err(Error::InvalidArgument("mesh list must have distinct sizes".into()));
    }
    Ok(ConvergenceReport { problem: problem.name.clone(), method, degree, rows })
}
