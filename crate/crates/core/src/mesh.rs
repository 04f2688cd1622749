//! Structured quadrilateral meshes that conform to subdomain interfaces.

use std::collections::{BTreeMap, BTreeSet};

use crate::basis::{Degree, ElementGeometry};
use crate::error::{Error, Result};

pub type SubdomainId = u32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

impl Node {
    pub fn coords(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub id: usize,
    /// Lexicographic tensor-product order, see [`crate::basis`].
    pub node_ids: Vec<usize>,
    pub subdomain: SubdomainId,
    /// Cell indices `(ex, ey)` in the structured grid.
    pub cell: (usize, usize),
}

/// Sides of the bounding rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Bottom,
    Right,
    Top,
    Left,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [BoundaryTag::Bottom, BoundaryTag::Right, BoundaryTag::Top, BoundaryTag::Left];

    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            BoundaryTag::Bottom => [0.0, -1.0],
            BoundaryTag::Right => [1.0, 0.0],
            BoundaryTag::Top => [0.0, 1.0],
            BoundaryTag::Left => [-1.0, 0.0],
        }
    }
}

/// Edges of the reference square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LocalEdge {
    Bottom,
    Right,
    Top,
    Left,
}

impl LocalEdge {
    /// Local node indices along the edge.
    pub fn local_nodes(self, degree: Degree) -> Vec<usize> {
        let n = degree.nodes_1d();
        match self {
            LocalEdge::Bottom => (0..n).collect(),
            LocalEdge::Right => (0..n).map(|j| n - 1 + n * j).collect(),
            LocalEdge::Top => (0..n).map(|i| i + n * (n - 1)).collect(),
            LocalEdge::Left => (0..n).map(|j| n * j).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub element: usize,
    pub edge: LocalEdge,
    pub tag: BoundaryTag,
}

/// An edge shared by two elements of different subdomains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceEdge {
    pub elements: [usize; 2],
    pub edges: [LocalEdge; 2],
    pub subdomains: [SubdomainId; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub degree: Degree,
    pub nx: usize,
    pub ny: usize,
    pub rect: Rect,
    pub nodes: Vec<Node>,
    pub elements: Vec<Element>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub interface_edges: Vec<InterfaceEdge>,
    node_elements: Vec<Vec<usize>>,
}

/// Builds an `nx x ny` tensor-product mesh on `rect`. Each cell takes the
/// subdomain `classify` reports at its centroid; cells whose interior sample
/// points disagree are rejected, so mesh lines must follow the interfaces.
pub fn build_structured_mesh<F>(nx: usize, ny: usize, rect: Rect, degree: Degree, classify: F) -> Result<Mesh>
where
    F: Fn(f64, f64) -> SubdomainId,
{
    if nx == 0 || ny == 0 {
        return Err(Error::Mesh(format!("mesh needs at least one cell per direction, got {nx}x{ny}")));
    }
    if !(rect.width() > 0.0 && rect.height() > 0.0) || ![rect.x0, rect.x1, rect.y0, rect.y1].iter().all(|v| v.is_finite()) {
        return Err(Error::Mesh(format!("degenerate rectangle {rect:?}")));
    }
    let k = degree.order();
    let (cols, rows) = (k * nx + 1, k * ny + 1);
    let hx = rect.width() / (k * nx) as f64;
    let hy = rect.height() / (k * ny) as f64;
    let mut nodes = Vec::with_capacity(cols * rows);
    for j in 0..rows {
        for i in 0..cols {
            // pin the far edges exactly
            let x = if i + 1 == cols { rect.x1 } else { rect.x0 + i as f64 * hx };
            let y = if j + 1 == rows { rect.y1 } else { rect.y0 + j as f64 * hy };
            nodes.push(Node { id: nodes.len(), x, y });
        }
    }

    let n1 = degree.nodes_1d();
    let mut elements = Vec::with_capacity(nx * ny);
    for ey in 0..ny {
        for ex in 0..nx {
            let mut node_ids = Vec::with_capacity(n1 * n1);
            for b in 0..n1 {
                for a in 0..n1 {
                    node_ids.push((k * ey + b) * cols + k * ex + a);
                }
            }
            let id = elements.len();
            let geom = corner_geometry(&nodes, &node_ids, degree);
            let [cx, cy] = geom.centroid();
            let subdomain = classify(cx, cy);
            for s in [-0.95, 0.0, 0.95] {
                for t in [-0.95, 0.0, 0.95] {
                    let [px, py] = geom.map([s, t]);
                    let other = classify(px, py);
                    if other != subdomain {
                        return Err(Error::Mesh(format!(
                            "cell ({ex},{ey}) straddles subdomains {subdomain} and {other}; mesh lines must follow the interfaces"
                        )));
                    }
                }
            }
            elements.push(Element { id, node_ids, subdomain, cell: (ex, ey) });
        }
    }

    let eid = |ex: usize, ey: usize| ey * nx + ex;
    let mut boundary_edges = Vec::new();
    for ex in 0..nx {
        boundary_edges.push(BoundaryEdge { element: eid(ex, 0), edge: LocalEdge::Bottom, tag: BoundaryTag::Bottom });
    }
    for ey in 0..ny {
        boundary_edges.push(BoundaryEdge { element: eid(nx - 1, ey), edge: LocalEdge::Right, tag: BoundaryTag::Right });
    }
    for ex in 0..nx {
        boundary_edges.push(BoundaryEdge { element: eid(ex, ny - 1), edge: LocalEdge::Top, tag: BoundaryTag::Top });
    }
    for ey in 0..ny {
        boundary_edges.push(BoundaryEdge { element: eid(0, ey), edge: LocalEdge::Left, tag: BoundaryTag::Left });
    }

    let mut interface_edges = Vec::new();
    for ey in 0..ny {
        for ex in 0..nx {
            let a = eid(ex, ey);
            if ex + 1 < nx {
                let b = eid(ex + 1, ey);
                if elements[a].subdomain != elements[b].subdomain {
                    interface_edges.push(InterfaceEdge {
                        elements: [a, b],
                        edges: [LocalEdge::Right, LocalEdge::Left],
                        subdomains: [elements[a].subdomain, elements[b].subdomain],
                    });
                }
            }
            if ey + 1 < ny {
                let b = eid(ex, ey + 1);
                if elements[a].subdomain != elements[b].subdomain {
                    interface_edges.push(InterfaceEdge {
                        elements: [a, b],
                        edges: [LocalEdge::Top, LocalEdge::Bottom],
                        subdomains: [elements[a].subdomain, elements[b].subdomain],
                    });
                }
            }
        }
    }

    let mut node_elements = vec![Vec::new(); nodes.len()];
    for e in &elements {
        for &n in &e.node_ids {
            node_elements[n].push(e.id);
        }
    }

    Ok(Mesh { degree, nx, ny, rect, nodes, elements, boundary_edges, interface_edges, node_elements })
}

fn corner_geometry(nodes: &[Node], node_ids: &[usize], degree: Degree) -> ElementGeometry {
    let n = degree.nodes_1d();
    let corner = |l: usize| nodes[node_ids[l]].coords();
    ElementGeometry::new([corner(0), corner(n - 1), corner(n * (n - 1)), corner(n * n - 1)])
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn geometry(&self, element: usize) -> ElementGeometry {
        corner_geometry(&self.nodes, &self.elements[element].node_ids, self.degree)
    }

    pub fn elements_of_node(&self, node: usize) -> &[usize] {
        &self.node_elements[node]
    }

    pub fn element_at_cell(&self, ex: usize, ey: usize) -> usize {
        ey * self.nx + ex
    }

    /// Largest element diameter.
    pub fn h(&self) -> f64 {
        (0..self.element_count()).map(|e| self.geometry(e).diameter()).fold(0.0, f64::max)
    }

    pub fn subdomains(&self) -> BTreeSet<SubdomainId> {
        self.elements.iter().map(|e| e.subdomain).collect()
    }

    /// Global node ids on one local edge of an element.
    pub fn edge_nodes(&self, element: usize, edge: LocalEdge) -> Vec<usize> {
        let ids = &self.elements[element].node_ids;
        edge.local_nodes(self.degree).into_iter().map(|l| ids[l]).collect()
    }

    /// Nodes on one side of the rectangle, sorted.
    pub fn boundary_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .boundary_edges
            .iter()
            .filter(|b| b.tag == tag)
            .flat_map(|b| self.edge_nodes(b.element, b.edge))
            .collect();
        set.into_iter().collect()
    }

    /// Unit normal of an element edge pointing out of that element.
    pub fn edge_outward_normal(&self, element: usize, edge: LocalEdge) -> [f64; 2] {
        let nodes = self.edge_nodes(element, edge);
        let p0 = self.nodes[nodes[0]].coords();
        let p1 = self.nodes[*nodes.last().expect("edge has nodes")].coords();
        let d = [p1[0] - p0[0], p1[1] - p0[1]];
        let len = d[0].hypot(d[1]);
        let mut n = [d[1] / len, -d[0] / len];
        let c = self.geometry(element).centroid();
        if n[0] * (p0[0] - c[0]) + n[1] * (p0[1] - c[1]) < 0.0 {
            n = [-n[0], -n[1]];
        }
        n
    }
}

/// Unit normal/tangent pair at a node on an interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceFrame {
    pub node: usize,
    /// Points from `sides.0` (lower id) into `sides.1` (higher id).
    pub normal: [f64; 2],
    /// `normal` rotated by +90 degrees.
    pub tangent: [f64; 2],
    pub sides: (SubdomainId, SubdomainId),
}

/// Frames at every interface node of the mesh.
pub fn interface_frames(mesh: &Mesh) -> Result<Vec<InterfaceFrame>> {
    let all: Vec<usize> = (0..mesh.element_count()).collect();
    interface_frames_within(mesh, &all)
}

/// Frames at interface nodes, considering only interface edges whose two
/// elements both belong to `elements`. Nodes where the averaged normal
/// vanishes, or where three or more subdomains meet, are rejected.
pub fn interface_frames_within(mesh: &Mesh, elements: &[usize]) -> Result<Vec<InterfaceFrame>> {
    let mut inside = vec![false; mesh.element_count()];
    for &e in elements {
        inside[e] = true;
    }
    struct Acc {
        sum: [f64; 2],
        count: usize,
        sides: (SubdomainId, SubdomainId),
    }
    let mut acc: BTreeMap<usize, Acc> = BTreeMap::new();
    for ie in &mesh.interface_edges {
        if !(inside[ie.elements[0]] && inside[ie.elements[1]]) {
            continue;
        }
        let [sa, sb] = ie.subdomains;
        let mut n = mesh.edge_outward_normal(ie.elements[0], ie.edges[0]);
        if sa > sb {
            n = [-n[0], -n[1]];
        }
        let sides = (sa.min(sb), sa.max(sb));
        for node in mesh.edge_nodes(ie.elements[0], ie.edges[0]) {
            let entry = acc.entry(node).or_insert(Acc { sum: [0.0; 2], count: 0, sides });
            if entry.sides != sides {
                return Err(Error::Interface {
                    node,
                    reason: format!("node borders interfaces {:?} and {:?} (intersecting interfaces)", entry.sides, sides),
                });
            }
            entry.sum[0] += n[0];
            entry.sum[1] += n[1];
            entry.count += 1;
        }
    }

    let mut frames = Vec::with_capacity(acc.len());
    for (node, a) in acc {
        let subs: BTreeSet<SubdomainId> =
            mesh.elements_of_node(node).iter().filter(|&&e| inside[e]).map(|&e| mesh.elements[e].subdomain).collect();
        if subs.len() > 2 {
            return Err(Error::Interface {
                node,
                reason: format!("{} subdomains meet here (triple point); nodal transform undefined", subs.len()),
            });
        }
        let avg = [a.sum[0] / a.count as f64, a.sum[1] / a.count as f64];
        let norm = avg[0].hypot(avg[1]);
        if norm < 1e-8 {
            return Err(Error::Interface { node, reason: "averaged interface normal vanishes (non-smooth interface)".into() });
        }
        let normal = [avg[0] / norm, avg[1] / norm];
        frames.push(InterfaceFrame { node, normal, tangent: [-normal[1], normal[0]], sides: a.sides });
    }
    Ok(frames)
}

/// A rectangular patch of elements over which post-processed velocities are C0.
#[derive(Debug, Clone, PartialEq)]
pub struct Macroelement {
    pub id: usize,
    pub element_ids: Vec<usize>,
    pub has_interior_interface: bool,
}

/// Regular `mx x my` blocks. `mx` must divide `nx` and `my` divide `ny`.
pub fn partition_macroelements(mesh: &Mesh, mx: usize, my: usize) -> Result<Vec<Macroelement>> {
    if mx == 0 || my == 0 || mesh.nx % mx != 0 || mesh.ny % my != 0 {
        return Err(Error::InvalidArgument(format!(
            "macro blocks {mx}x{my} do not divide the {}x{} mesh",
            mesh.nx, mesh.ny
        )));
    }
    partition_macroelements_shifted(mesh, mx, my, 0, 0)
}

/// `mx x my` blocks whose grid is shifted by `(sx, sy)` cells; the blocks
/// along the rectangle sides are truncated. Used to move interfaces from
/// block edges into block interiors.
pub fn partition_macroelements_shifted(mesh: &Mesh, mx: usize, my: usize, sx: usize, sy: usize) -> Result<Vec<Macroelement>> {
    if mx == 0 || my == 0 || sx >= mx || sy >= my {
        return Err(Error::InvalidArgument(format!("invalid macro layout {mx}x{my} shifted by ({sx},{sy})")));
    }
    let breaks = |n: usize, m: usize, s: usize| {
        let mut b = vec![0];
        let mut next = if s == 0 { m } else { s };
        while next < n {
            b.push(next);
            next += m;
        }
        b.push(n);
        b
    };
    partition_macroelements_by_breaks(mesh, &breaks(mesh.nx, mx, sx), &breaks(mesh.ny, my, sy))
}

/// Blocks delimited by increasing cell-index breakpoints, each list running
/// from 0 to `nx` (resp. `ny`).
pub fn partition_macroelements_by_breaks(mesh: &Mesh, xbreaks: &[usize], ybreaks: &[usize]) -> Result<Vec<Macroelement>> {
    let valid = |b: &[usize], n: usize| b.len() >= 2 && b[0] == 0 && *b.last().unwrap() == n && b.windows(2).all(|w| w[0] < w[1]);
    if !valid(xbreaks, mesh.nx) || !valid(ybreaks, mesh.ny) {
        return Err(Error::InvalidArgument(format!("invalid macro breakpoints {xbreaks:?} / {ybreaks:?}")));
    }
    let mut block_of = vec![0usize; mesh.element_count()];
    let mut macros = Vec::new();
    for yb in ybreaks.windows(2) {
        for xb in xbreaks.windows(2) {
            let id = macros.len();
            let mut element_ids = Vec::new();
            for ey in yb[0]..yb[1] {
                for ex in xb[0]..xb[1] {
                    let e = mesh.element_at_cell(ex, ey);
                    block_of[e] = id;
                    element_ids.push(e);
                }
            }
            if mesh.degree == Degree::Q1 && element_ids.len() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "macroelement {id} has a single bilinear element; Q1 macroelements need at least two elements sharing an edge"
                )));
            }
            macros.push(Macroelement { id, element_ids, has_interior_interface: false });
        }
    }
    for ie in &mesh.interface_edges {
        let [a, b] = ie.elements;
        if block_of[a] == block_of[b] {
            macros[block_of[a]].has_interior_interface = true;
        }
    }
    Ok(macros)
}
