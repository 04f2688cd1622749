//! CSV reports, legacy VTK fields and log-log SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::basis::Degree;
use crate::convergence::{ConvergenceReport, ErrorRow, Method, ERROR_COLUMNS};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::mesh::Mesh;

const META_COLUMNS: [&str; 6] = ["problem", "method", "degree", "nx", "ny", "h"];

fn csv_header() -> Vec<String> {
    META_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(ERROR_COLUMNS.iter().map(|s| s.to_string()))
        .chain(ERROR_COLUMNS.iter().map(|s| format!("rate_{s}")))
        .collect()
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Report as CSV. Numbers carry 17 significant digits so they read back
/// bit for bit; each rate column holds the rate from the previous row.
pub fn report_to_csv(report: &ConvergenceReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(csv_header()).map_err(err)?;
    let rates: Vec<Vec<f64>> = ERROR_COLUMNS.iter().map(|c| report.pairwise_rates(c)).collect();
    for (i, row) in report.rows.iter().enumerate() {
        let mut rec = vec![
            report.problem.clone(),
            report.method.name().to_string(),
            report.degree.order().to_string(),
            row.nx.to_string(),
            row.ny.to_string(),
            num(row.h),
        ];
        rec.extend(row.errors().iter().map(|&e| num(e)));
        rec.extend(rates.iter().map(|r| if i == 0 { String::new() } else { num(r[i - 1]) }));
        w.write_record(rec).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_report_csv(report: &ConvergenceReport, path: &Path) -> Result<()> {
    fs::write(path, report_to_csv(report)?).map_err(|e| Error::io(path, e))
}

/// Parses a report written by [`report_to_csv`]. A header-only file has no
/// method or degree to recover and yields `None`.
pub fn report_from_csv(bytes: &[u8]) -> Result<Option<ConvergenceReport>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != csv_header() {
        return Err(Error::Parse("unexpected CSV header".into()));
    }
    let mut meta: Option<(String, Method, Degree)> = None;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let f = |i: usize| rec[i].parse::<f64>().map_err(|e| Error::Parse(format!("column {}: {e}", &header[i])));
        let u = |i: usize| rec[i].parse::<usize>().map_err(|e| Error::Parse(format!("column {}: {e}", &header[i])));
        let this = (rec[0].to_string(), rec[1].parse::<Method>()?, Degree::from_order(u(2)?)?);
        match &meta {
            None => meta = Some(this),
            Some(m) if *m != this => return Err(Error::Parse("rows mix problems, methods or degrees".into())),
            Some(_) => {}
        }
        rows.push(ErrorRow { nx: u(3)?, ny: u(4)?, h: f(5)?, l2_p: f(6)?, h1_p: f(7)?, l2_u: f(8)?, l2_div: f(9)?, grad_sc: f(10)? });
    }
    Ok(meta.map(|(problem, method, degree)| ConvergenceReport { problem, method, degree, rows }))
}

pub fn read_report_csv(path: &Path) -> Result<Option<ConvergenceReport>> {
    report_from_csv(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// VTK point order of the lexicographic element nodes.
fn vtk_cell(degree: Degree) -> (u8, &'static [usize]) {
    match degree {
        Degree::Q1 => (9, &[0, 1, 3, 2]),
        Degree::Q2 => (28, &[0, 2, 8, 6, 1, 5, 7, 3, 4]),
    }
}

/// Fields to write alongside the mesh.
#[derive(Default)]
pub struct VtkFields<'a> {
    pub potential: Option<&'a ScalarField>,
    /// Nodal velocity of every element, element after element.
    pub velocity: Option<&'a [[f64; 2]]>,
    /// Give every element its own copy of its points, so discontinuous
    /// fields keep all their side values.
    pub duplicate_points: bool,
}

/// Legacy ASCII unstructured grid with the subdomain of each cell.
pub fn vtk_string(mesh: &Mesh, title: &str, fields: &VtkFields<'_>) -> Result<String> {
    let npe = mesh.degree.nodes_per_element();
    if let Some(v) = fields.velocity {
        if v.len() != npe * mesh.element_count() {
            return Err(Error::InvalidArgument("velocity does not match the mesh".into()));
        }
    }
    let (cell_type, order) = vtk_cell(mesh.degree);
    let mut s = String::new();
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    let _ = write!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    // point i of the output refers to mesh node point_node[i]
    let point_node: Vec<usize> = if fields.duplicate_points {
        mesh.elements.iter().flat_map(|e| e.node_ids.iter().copied()).collect()
    } else {
        (0..mesh.node_count()).collect()
    };
    let _ = writeln!(s, "POINTS {} double", point_node.len());
    for &n in &point_node {
        let _ = writeln!(s, "{:e} {:e} 0", mesh.nodes[n].x, mesh.nodes[n].y);
    }
    let _ = writeln!(s, "CELLS {} {}", mesh.element_count(), mesh.element_count() * (npe + 1));
    for e in &mesh.elements {
        let ids: Vec<String> = order
            .iter()
            .map(|&a| if fields.duplicate_points { e.id * npe + a } else { e.node_ids[a] }.to_string())
            .collect();
        let _ = writeln!(s, "{npe} {}", ids.join(" "));
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.element_count());
    for _ in &mesh.elements {
        let _ = writeln!(s, "{cell_type}");
    }
    let _ = write!(s, "CELL_DATA {}\nSCALARS subdomain int 1\nLOOKUP_TABLE default\n", mesh.element_count());
    for e in &mesh.elements {
        let _ = writeln!(s, "{}", e.subdomain);
    }
    if fields.potential.is_some() || fields.velocity.is_some() {
        let _ = writeln!(s, "POINT_DATA {}", point_node.len());
    }
    if let Some(p) = fields.potential {
        let _ = write!(s, "SCALARS potential double 1\nLOOKUP_TABLE default\n");
        for &n in &point_node {
            let _ = writeln!(s, "{:e}", p.values[n]);
        }
    }
    if let Some(v) = fields.velocity {
        let _ = writeln!(s, "VECTORS velocity double");
        if fields.duplicate_points {
            for u in v {
                let _ = writeln!(s, "{:e} {:e} 0", u[0], u[1]);
            }
        } else {
            // shared points take the value of the first element seen
            let mut nodal = vec![None; mesh.node_count()];
            for e in &mesh.elements {
                for (a, &n) in e.node_ids.iter().enumerate() {
                    nodal[n].get_or_insert(v[e.id * npe + a]);
                }
            }
            for u in nodal {
                let u = u.unwrap_or([0.0; 2]);
                let _ = writeln!(s, "{:e} {:e} 0", u[0], u[1]);
            }
        }
    }
    Ok(s)
}

pub fn write_vtk(path: &Path, mesh: &Mesh, title: &str, fields: &VtkFields<'_>) -> Result<()> {
    fs::write(path, vtk_string(mesh, title, fields)?).map_err(|e| Error::io(path, e))
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Log-log plot of one error column against `h` for several reports.
pub fn svg_plot(reports: &[ConvergenceReport], column: &str) -> Result<String> {
    if !ERROR_COLUMNS.contains(&column) {
        return Err(Error::Unknown { kind: "error column", name: column.to_string() });
    }
    let pts: Vec<Vec<(f64, f64)>> = reports
        .iter()
        .map(|r| {
            r.rows
                .iter()
                .filter_map(|row| row.error(column).filter(|e| *e > 0.0).map(|e| (row.h.log10(), e.log10())))
                .collect()
        })
        .collect();
    let all: Vec<(f64, f64)> = pts.iter().flatten().copied().collect();
    let (w, h, m) = (640.0, 480.0, 70.0);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    if all.is_empty() {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#, w / 2.0, h / 2.0);
        s.push_str("</svg>\n");
        return Ok(s);
    }
    let lo = |f: fn(&(f64, f64)) -> f64| all.iter().map(f).fold(f64::INFINITY, f64::min).floor();
    let hi = |f: fn(&(f64, f64)) -> f64| all.iter().map(f).fold(f64::NEG_INFINITY, f64::max).ceil();
    let (x0, x1) = (lo(|p| p.0), hi(|p| p.0).max(lo(|p| p.0) + 1.0));
    let (y0, y1) = (lo(|p| p.1), hi(|p| p.1).max(lo(|p| p.1) + 1.0));
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let _ = writeln!(s, r#"<g stroke="black" fill="none"><rect x="{m}" y="{m}" width="{}" height="{}"/></g>"#, w - 2.0 * m, h - 2.0 * m);
    for d in (x0 as i32)..=(x1 as i32) {
        let x = sx(d as f64);
        let _ = writeln!(s, r##"<line x1="{x}" y1="{m}" x2="{x}" y2="{}" stroke="#ddd"/>"##, h - m);
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">1e{d}</text>"#, h - m + 18.0);
    }
    for d in (y0 as i32)..=(y1 as i32) {
        let y = sy(d as f64);
        let _ = writeln!(s, r##"<line x1="{m}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/>"##, w - m);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">1e{d}</text>"#, m - 6.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">h</text>"#, w / 2.0, h - 20.0);
    let _ = writeln!(s, r#"<text x="20" y="{}" transform="rotate(-90 20 {})" text-anchor="middle">{column}</text>"#, h / 2.0, h / 2.0);
    for (i, (r, p)) in reports.iter().zip(&pts).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, path.join(" "));
        for &(x, y) in p {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        }
        let label = format!("{} Q{} (slope {:.2})", r.method, r.degree.order(), r.ls_rate(column));
        let ly = m + 16.0 + 16.0 * i as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ly}" fill="{color}">{label}</text>"#, m + 10.0);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn write_svg_plot(path: &Path, reports: &[ConvergenceReport], column: &str) -> Result<()> {
    fs::write(path, svg_plot(reports, column)?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, Rect};

    fn sample() -> ConvergenceReport {
        let row = |n: usize, e: f64| ErrorRow { nx: n, ny: n, h: 2f64.sqrt() / n as f64, l2_p: e, h1_p: 0.1 / 3.0 * e, l2_u: e.sqrt(), l2_div: 1.0 / 7.0, grad_sc: e * e };
        ConvergenceReport { problem: "crumpton".into(), method: Method::Gppid, degree: Degree::Q2, rows: vec![row(4, 0.3), row(8, 0.071), row(16, 0.0173)] }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let r = sample();
        let back = report_from_csv(&report_to_csv(&r).unwrap()).unwrap().unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn empty_report_is_header_only() {
        let mut r = sample();
        r.rows.clear();
        let bytes = report_to_csv(&r).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("problem,method,degree,nx,ny,h,l2_p"));
        assert!(report_from_csv(&bytes).unwrap().is_none());
    }

    #[test]
    fn vtk_layouts() {
        let mesh = build_structured_mesh(2, 1, Rect::new(0.0, 0.0, 2.0, 1.0), Degree::Q1, |_, _| 1).unwrap();
        let v = vec![[1.0, 0.0]; 8];
        let shared = vtk_string(&mesh, "t", &VtkFields { velocity: Some(&v), ..Default::default() }).unwrap();
        assert!(shared.contains("POINTS 6 double"));
        assert!(shared.contains("\n4 0 1 4 3\n"));
        let dup = vtk_string(&mesh, "t", &VtkFields { velocity: Some(&v), duplicate_points: true, ..Default::default() }).unwrap();
        assert!(dup.contains("POINTS 8 double"));
        assert!(dup.contains("\n4 4 5 7 6\n"));
    }

    #[test]
    fn svg_has_one_polyline_per_report() {
        let s = svg_plot(&[sample(), sample()], "l2_p").unwrap();
        assert_eq!(s.matches("<polyline").count(), 2);
        assert!(svg_plot(&[sample()], "nope").is_err());
    }
}
