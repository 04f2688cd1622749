//! Qualitative checks for the benchmarks without a closed-form solution.

use std::collections::BTreeSet;

use crate::convergence::{Method, RunResult};
use crate::mesh::SubdomainId;

/// One measured quantity, with a verdict when the expected behaviour of the
/// method on this benchmark is known.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub passed: Option<bool>,
    pub detail: String,
}

/// Velocity of element `e` at its local node `a`.
fn at(values: &[[f64; 2]], npe: usize, e: usize, a: usize) -> [f64; 2] {
    values[e * npe + a]
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Mean tangential speed at the walls between `outside` and any other
/// subdomain, taken from the `outside` elements, over the mean speed in
/// `outside`. Wall nodes on the domain boundary are skipped.
pub fn wall_slip_ratio(run: &RunResult, outside: SubdomainId) -> f64 {
    let mesh = &run.mesh;
    let npe = mesh.degree.nodes_per_element();
    let values = run.element_velocities();
    let on_boundary: BTreeSet<usize> = mesh.boundary_edges.iter().flat_map(|b| mesh.edge_nodes(b.element, b.edge)).collect();
    let mut wall = Vec::new();
    for ie in &mesh.interface_edges {
        let side = if ie.subdomains[0] == outside { 0 } else if ie.subdomains[1] == outside { 1 } else { continue };
        let (e, edge) = (ie.elements[side], ie.edges[side]);
        let nodes = mesh.edge_nodes(e, edge);
        let (a, b) = (mesh.nodes[nodes[0]].coords(), mesh.nodes[*nodes.last().unwrap()].coords());
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let t = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
        for (k, &n) in edge.local_nodes(mesh.degree).iter().zip(&nodes) {
            if !on_boundary.contains(&n) {
                let u = at(&values, npe, e, *k);
                wall.push((u[0] * t[0] + u[1] * t[1]).abs());
            }
        }
    }
    let speed: Vec<f64> = mesh
        .elements
        .iter()
        .filter(|e| e.subdomain == outside)
        .flat_map(|e| (0..npe).map(move |a| (e.id, a)))
        .map(|(e, a)| {
            let u = at(&values, npe, e, a);
            u[0].hypot(u[1])
        })
        .collect();
    mean(&wall) / mean(&speed)
}

/// Tangential (`u_y`) speed at nodes of the vertical interface between
/// subdomains `a` and `b`, over the speed one element away on the same side.
/// Returns the smaller of the two side ratios.
pub fn vertical_interface_ratio(run: &RunResult, a: SubdomainId, b: SubdomainId) -> f64 {
    let mesh = &run.mesh;
    let npe = mesh.degree.nodes_per_element();
    let n1d = mesh.degree.nodes_1d();
    let values = run.element_velocities();
    let on_boundary: BTreeSet<usize> = mesh.boundary_edges.iter().flat_map(|e| mesh.edge_nodes(e.element, e.edge)).collect();
    let pair = if a < b { [a, b] } else { [b, a] };
    let mut ratios = Vec::new();
    for side in [a, b] {
        let (mut at_interface, mut away) = (Vec::new(), Vec::new());
        for ie in &mesh.interface_edges {
            let mut subs = ie.subdomains;
            subs.sort();
            if subs != pair {
                continue;
            }
            let k = if ie.subdomains[0] == side { 0 } else { 1 };
            let e = ie.elements[k];
            let nodes = mesh.edge_nodes(e, ie.edges[k]);
            if (mesh.nodes[nodes[0]].x - mesh.nodes[*nodes.last().unwrap()].x).abs() > 1e-12 {
                continue;
            }
            // the opposite column of local nodes lies one element away
            let local = ie.edges[k].local_nodes(mesh.degree);
            for (&l, &n) in local.iter().zip(&nodes) {
                if on_boundary.contains(&n) || mesh.elements_of_node(n).iter().map(|&x| mesh.elements[x].subdomain).collect::<BTreeSet<_>>().len() > 2 {
                    continue;
                }
                let (i, j) = (l % n1d, l / n1d);
                let opposite = (n1d - 1 - i) + n1d * j;
                at_interface.push(at(&values, npe, e, l)[1].abs());
                away.push(at(&values, npe, e, opposite)[1].abs());
            }
        }
        ratios.push(mean(&at_interface) / mean(&away));
    }
    ratios.into_iter().fold(f64::INFINITY, f64::min)
}

/// Ratio below which the velocity is said to adhere to an interface.
pub const ADHERENCE_RATIO: f64 = 0.5;

/// Whether `run` is expected to show adherence at material interfaces:
/// C0 mixed velocities and macros with an unconstrained interior interface
/// do, macro fields with interfaces on macro edges or with the nodal
/// transform inside do not. `None` for the other methods.
pub fn expects_adherence(run: &RunResult) -> Option<bool> {
    match run.method {
        m if m.is_mixed() => Some(true),
        Method::Lpp => Some(run.macros.iter().any(|m| m.has_interior_interface)),
        Method::LppId => Some(false),
        _ => None,
    }
}

/// Checks for `barriers` and `three_media`; empty for other problems.
pub fn qualitative_checks(run: &RunResult) -> Vec<Check> {
    let (name, value, what) = match run.problem.name.as_str() {
        "barriers" => ("barrier_wall_slip", wall_slip_ratio(run, 1), "tangential speed at the barrier walls over the mean speed"),
        "three_media" => (
            "lower_interface_tangential",
            vertical_interface_ratio(run, 1, 2),
            "tangential speed at the lower interface over the speed one element away",
        ),
        _ => return Vec::new(),
    };
    let expect = expects_adherence(run);
    let passed = expect.map(|adheres| (value < ADHERENCE_RATIO) == adheres);
    let detail = match expect {
        Some(true) => format!("{what} (adherence expected: < {ADHERENCE_RATIO})"),
        Some(false) => format!("{what} (no adherence expected: >= {ADHERENCE_RATIO})"),
        None => what.to_string(),
    };
    vec![Check { name, value, passed, detail }]
}
