//! Problem data: geometry, media, boundary conditions, sources and exact
//! solutions, plus the built-in benchmark problems.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix2;

use crate::basis::Degree;
use crate::error::{Error, Result};
use crate::field::ConductivityField;
use crate::mesh::{build_structured_mesh, BoundaryTag, Mesh, Rect, SubdomainId};

pub type ScalarFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
pub type SourceFn = Arc<dyn Fn(SubdomainId, [f64; 2]) -> f64 + Send + Sync>;
pub type Classifier = Arc<dyn Fn(f64, f64) -> SubdomainId + Send + Sync>;

#[derive(Clone)]
pub enum BoundaryCondition {
    /// Prescribed potential.
    Dirichlet(ScalarFn),
    /// `u . n = 0`
    NoFlux,
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCondition::Dirichlet(_) => f.write_str("Dirichlet"),
            BoundaryCondition::NoFlux => f.write_str("NoFlux"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoundaryConditions {
    pub bottom: BoundaryCondition,
    pub right: BoundaryCondition,
    pub top: BoundaryCondition,
    pub left: BoundaryCondition,
}

impl BoundaryConditions {
    pub fn all_dirichlet(g: ScalarFn) -> Self {
        Self {
            bottom: BoundaryCondition::Dirichlet(g.clone()),
            right: BoundaryCondition::Dirichlet(g.clone()),
            top: BoundaryCondition::Dirichlet(g.clone()),
            left: BoundaryCondition::Dirichlet(g),
        }
    }

    pub fn get(&self, tag: BoundaryTag) -> &BoundaryCondition {
        match tag {
            BoundaryTag::Bottom => &self.bottom,
            BoundaryTag::Right => &self.right,
            BoundaryTag::Top => &self.top,
            BoundaryTag::Left => &self.left,
        }
    }

    /// Prescribed potential per node. Corners shared with a no-flux side
    /// stay Dirichlet.
    pub fn dirichlet_nodes(&self, mesh: &Mesh) -> BTreeMap<usize, f64> {
        let mut out = BTreeMap::new();
        for tag in BoundaryTag::ALL {
            if let BoundaryCondition::Dirichlet(g) = self.get(tag) {
                for n in mesh.boundary_nodes(tag) {
                    out.entry(n).or_insert_with(|| g(mesh.nodes[n].coords()));
                }
            }
        }
        out
    }

    /// Velocity components fixed to zero by no-flux sides: `(node, component)`.
    pub fn noflux_components(&self, mesh: &Mesh) -> Vec<(usize, usize)> {
        let mut out = std::collections::BTreeSet::new();
        for tag in BoundaryTag::ALL {
            if let BoundaryCondition::NoFlux = self.get(tag) {
                let comp = match tag {
                    BoundaryTag::Left | BoundaryTag::Right => 0,
                    BoundaryTag::Bottom | BoundaryTag::Top => 1,
                };
                for n in mesh.boundary_nodes(tag) {
                    out.insert((n, comp));
                }
            }
        }
        out.into_iter().collect()
    }
}

/// Closed-form solution, one smooth branch per subdomain.
pub trait ExactSolution: Send + Sync {
    fn potential(&self, subdomain: SubdomainId, x: [f64; 2]) -> f64;
    fn gradient(&self, subdomain: SubdomainId, x: [f64; 2]) -> [f64; 2];
    /// Darcy velocity `-K grad p`.
    fn velocity(&self, subdomain: SubdomainId, x: [f64; 2]) -> [f64; 2];
    /// `div u`, which equals the source term.
    fn divergence(&self, subdomain: SubdomainId, x: [f64; 2]) -> f64;
}

/// Largest jumps of `p` and `u . n` over sample points of every interface edge.
pub fn interface_mismatch(mesh: &Mesh, exact: &dyn ExactSolution) -> (f64, f64) {
    let (mut dp, mut dun) = (0.0f64, 0.0f64);
    for ie in &mesh.interface_edges {
        let n = mesh.edge_outward_normal(ie.elements[0], ie.edges[0]);
        let nodes = mesh.edge_nodes(ie.elements[0], ie.edges[0]);
        let a = mesh.nodes[nodes[0]].coords();
        let b = mesh.nodes[*nodes.last().unwrap()].coords();
        for t in [0.0, 0.13, 0.5, 0.77, 1.0] {
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let [s1, s2] = ie.subdomains;
            dp = dp.max((exact.potential(s1, x) - exact.potential(s2, x)).abs());
            let (u1, u2) = (exact.velocity(s1, x), exact.velocity(s2, x));
            dun = dun.max(((u1[0] - u2[0]) * n[0] + (u1[1] - u2[1]) * n[1]).abs());
        }
    }
    (dp, dun)
}

/// Everything needed to set up and solve one benchmark.
#[derive(Clone)]
pub struct ProblemDefinition {
    pub name: String,
    pub rect: Rect,
    pub classify: Classifier,
    pub conductivity: ConductivityField,
    pub boundary: BoundaryConditions,
    pub source: SourceFn,
    pub exact: Option<Arc<dyn ExactSolution>>,
    /// Mesh used by `darcy run` when none is given.
    pub default_mesh: (usize, usize),
}

impl fmt::Debug for ProblemDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemDefinition")
            .field("name", &self.name)
            .field("rect", &self.rect)
            .field("conductivity", &self.conductivity)
            .field("boundary", &self.boundary)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl ProblemDefinition {
    pub fn mesh(&self, nx: usize, ny: usize, degree: Degree) -> Result<Mesh> {
        let classify = self.classify.clone();
        let mesh = build_structured_mesh(nx, ny, self.rect, degree, move |x, y| classify(x, y))?;
        self.conductivity.covers(&mesh)?;
        Ok(mesh)
    }

    pub fn exact(&self) -> Result<&Arc<dyn ExactSolution>> {
        self.exact.as_ref().ok_or_else(|| Error::NoExactSolution(self.name.clone()))
    }
}

pub const BUILTIN_PROBLEMS: [&str; 6] = ["plates", "barriers", "three_media", "crumpton", "crumpton_right", "sine"];

pub fn builtin_problem(name: &str) -> Result<ProblemDefinition> {
    match name {
        "plates" => plates(),
        "barriers" => barriers(),
        "three_media" => three_media(),
        "crumpton" => crumpton(1.0),
        "crumpton_right" => crumpton_right(1.0),
        "sine" => sine(),
        other => Err(Error::Unknown { kind: "problem", name: other.to_string() }),
    }
}

fn constant(v: f64) -> ScalarFn {
    Arc::new(move |_| v)
}

fn no_source() -> SourceFn {
    Arc::new(|_, _| 0.0)
}

/// Two layers between parallel plates, flow driven by a unit head drop.
pub fn plates() -> Result<ProblemDefinition> {
    // subdomain 1 is the upper, more pervious layer
    let conductivity = ConductivityField::new().with(1, Matrix2::identity() * 2.0)?.with(2, Matrix2::identity())?;
    Ok(ProblemDefinition {
        name: "plates".into(),
        rect: Rect::new(0.0, 0.0, 2.0, 1.0),
        classify: Arc::new(|_, y| if y > 0.5 { 1 } else { 2 }),
        conductivity,
        boundary: BoundaryConditions {
            bottom: BoundaryCondition::NoFlux,
            right: BoundaryCondition::Dirichlet(constant(0.0)),
            top: BoundaryCondition::NoFlux,
            left: BoundaryCondition::Dirichlet(constant(1.0)),
        },
        source: no_source(),
        exact: Some(Arc::new(PlatesExact)),
        default_mesh: (24, 12),
    })
}

struct PlatesExact;

impl ExactSolution for PlatesExact {
    fn potential(&self, _: SubdomainId, x: [f64; 2]) -> f64 {
        1.0 - 0.5 * x[0]
    }
    fn gradient(&self, _: SubdomainId, _: [f64; 2]) -> [f64; 2] {
        [-0.5, 0.0]
    }
    fn velocity(&self, s: SubdomainId, _: [f64; 2]) -> [f64; 2] {
        if s == 1 {
            [1.0, 0.0]
        } else {
            [0.5, 0.0]
        }
    }
    fn divergence(&self, _: SubdomainId, _: [f64; 2]) -> f64 {
        0.0
    }
}

/// Barrier rectangles `[x0, x1] x [y0, y1]` of the low-conductivity problem.
///
/// Approximate: read off a published sketch and snapped to the lines of a
/// 25x25 mesh on the unit square. One barrier hangs from the bottom plate,
/// the other from the top, forcing the flow through a channel between them.
pub const BARRIERS: [[f64; 4]; 2] = [[0.28, 0.36, 0.0, 0.6], [0.64, 0.72, 0.4, 1.0]];

pub fn barriers() -> Result<ProblemDefinition> {
    let conductivity = ConductivityField::new().with(1, Matrix2::identity())?.with(2, Matrix2::identity() * 1.0e-5)?;
    Ok(ProblemDefinition {
        name: "barriers".into(),
        rect: Rect::new(0.0, 0.0, 1.0, 1.0),
        classify: Arc::new(|x, y| {
            if BARRIERS.iter().any(|b| x > b[0] && x < b[1] && y > b[2] && y < b[3]) {
                2
            } else {
                1
            }
        }),
        conductivity,
        boundary: BoundaryConditions {
            bottom: BoundaryCondition::NoFlux,
            right: BoundaryCondition::Dirichlet(constant(0.0)),
            top: BoundaryCondition::NoFlux,
            left: BoundaryCondition::Dirichlet(constant(1.0)),
        },
        source: no_source(),
        exact: None,
        default_mesh: (25, 25),
    })
}

/// Three media meeting at a triple point, flow from top to bottom.
pub fn three_media() -> Result<ProblemDefinition> {
    let conductivity = ConductivityField::new()
        .with(1, Matrix2::identity())?
        .with(2, Matrix2::identity() * 10.0)?
        .with(3, Matrix2::identity() * 5.0)?;
    Ok(ProblemDefinition {
        name: "three_media".into(),
        rect: Rect::new(0.0, 0.0, 1.0, 2.0),
        classify: Arc::new(|x, y| {
            if y > 1.0 {
                3
            } else if x < 0.5 {
                1
            } else {
                2
            }
        }),
        conductivity,
        boundary: BoundaryConditions {
            bottom: BoundaryCondition::Dirichlet(constant(0.0)),
            right: BoundaryCondition::NoFlux,
            top: BoundaryCondition::Dirichlet(constant(1.0)),
            left: BoundaryCondition::NoFlux,
        },
        source: no_source(),
        exact: None,
        default_mesh: (24, 50),
    })
}

/// Anisotropic, discontinuous conductivity across `x = 0` on `[-1,1]^2`,
/// with a closed-form piecewise-smooth potential.
#[derive(Debug, Clone, Copy)]
pub struct CrumptonExact {
    pub gamma: f64,
}

impl CrumptonExact {
    fn k(&self, s: SubdomainId) -> [[f64; 2]; 2] {
        if s == 1 {
            [[1.0, 0.0], [0.0, 1.0]]
        } else {
            [[2.0 * self.gamma, self.gamma], [self.gamma, 2.0 * self.gamma]]
        }
    }

    pub fn subdomain(x: f64) -> SubdomainId {
        if x < 0.0 {
            1
        } else {
            2
        }
    }
}

impl ExactSolution for CrumptonExact {
    fn potential(&self, s: SubdomainId, x: [f64; 2]) -> f64 {
        let (px, py) = (x[0], x[1]);
        if s == 1 {
            self.gamma * (2.0 * py.sin() + py.cos()) * px + py.sin()
        } else {
            px.exp() * py.sin()
        }
    }

    fn gradient(&self, s: SubdomainId, x: [f64; 2]) -> [f64; 2] {
        let (px, py) = (x[0], x[1]);
        if s == 1 {
            [self.gamma * (2.0 * py.sin() + py.cos()), self.gamma * (2.0 * py.cos() - py.sin()) * px + py.cos()]
        } else {
            [px.exp() * py.sin(), px.exp() * py.cos()]
        }
    }

    fn velocity(&self, s: SubdomainId, x: [f64; 2]) -> [f64; 2] {
        let g = self.gradient(s, x);
        let k = self.k(s);
        [-(k[0][0] * g[0] + k[0][1] * g[1]), -(k[1][0] * g[0] + k[1][1] * g[1])]
    }

    fn divergence(&self, s: SubdomainId, x: [f64; 2]) -> f64 {
        let (px, py) = (x[0], x[1]);
        if s == 1 {
            // K = I: -laplacian, and p_xx = 0
            self.gamma * (2.0 * py.sin() + py.cos()) * px + py.sin()
        } else {
            // -gamma (2 p_xx + 2 p_xy + 2 p_yy) with p_xx = -p_yy
            -2.0 * self.gamma * px.exp() * py.cos()
        }
    }
}

pub fn crumpton(gamma: f64) -> Result<ProblemDefinition> {
    let exact = CrumptonExact { gamma };
    let conductivity =
        ConductivityField::new().with(1, Matrix2::identity())?.with(2, Matrix2::new(2.0, 1.0, 1.0, 2.0) * gamma)?;
    let g: ScalarFn = Arc::new(move |x| exact.potential(CrumptonExact::subdomain(x[0]), x));
    Ok(ProblemDefinition {
        name: "crumpton".into(),
        rect: Rect::new(-1.0, -1.0, 1.0, 1.0),
        classify: Arc::new(|x, _| CrumptonExact::subdomain(x)),
        conductivity,
        boundary: BoundaryConditions::all_dirichlet(g),
        source: Arc::new(move |s, x| exact.divergence(s, x)),
        exact: Some(Arc::new(exact)),
        default_mesh: (8, 8),
    })
}

/// The `x > 0` half of [`crumpton`] on its own: homogeneous, anisotropic
/// and smooth, with exact Dirichlet data on all four sides.
pub fn crumpton_right(gamma: f64) -> Result<ProblemDefinition> {
    let exact = CrumptonExact { gamma };
    let conductivity = ConductivityField::new().with(2, Matrix2::new(2.0, 1.0, 1.0, 2.0) * gamma)?;
    let g: ScalarFn = Arc::new(move |x| exact.potential(2, x));
    Ok(ProblemDefinition {
        name: "crumpton_right".into(),
        rect: Rect::new(0.0, -1.0, 1.0, 1.0),
        classify: Arc::new(|_, _| 2),
        conductivity,
        boundary: BoundaryConditions::all_dirichlet(g),
        source: Arc::new(move |s, x| exact.divergence(s, x)),
        exact: Some(Arc::new(exact)),
        default_mesh: (4, 8),
    })
}

/// `p = sin(pi x) sin(pi y)` on the unit square with `K = I`.
pub struct SineExact;

impl ExactSolution for SineExact {
    fn potential(&self, _: SubdomainId, x: [f64; 2]) -> f64 {
        use std::f64::consts::PI;
        (PI * x[0]).sin() * (PI * x[1]).sin()
    }
    fn gradient(&self, _: SubdomainId, x: [f64; 2]) -> [f64; 2] {
        use std::f64::consts::PI;
        [PI * (PI * x[0]).cos() * (PI * x[1]).sin(), PI * (PI * x[0]).sin() * (PI * x[1]).cos()]
    }
    fn velocity(&self, s: SubdomainId, x: [f64; 2]) -> [f64; 2] {
        let g = self.gradient(s, x);
        [-g[0], -g[1]]
    }
    fn divergence(&self, s: SubdomainId, x: [f64; 2]) -> f64 {
        2.0 * std::f64::consts::PI.powi(2) * self.potential(s, x)
    }
}

pub fn sine() -> Result<ProblemDefinition> {
    Ok(ProblemDefinition {
        name: "sine".into(),
        rect: Rect::new(0.0, 0.0, 1.0, 1.0),
        classify: Arc::new(|_, _| 1),
        conductivity: ConductivityField::new().with(1, Matrix2::identity())?,
        boundary: BoundaryConditions::all_dirichlet(constant(0.0)),
        source: Arc::new(|s, x| SineExact.divergence(s, x)),
        exact: Some(Arc::new(SineExact)),
        default_mesh: (8, 8),
    })
}
