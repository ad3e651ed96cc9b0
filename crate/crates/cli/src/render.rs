//! SVG drawings of fields over the tiling formed by the Voronoi cells of all
//! data-points (vertices, edge middles, face barycenters).

use spatial_core::fields::Field;
use spatial_core::geometry::clip_bisector;
use spatial_core::{Class, Locus, SimplexId, SimplicialMedium};
use std::fmt::Write;

const SCALE: f64 = 40.0;
const OUTLINE: &str = "#9e9e9e";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RenderError {
    #[error("invalid color {0:?}")]
    Color(String),
    #[error("field {index} has {got} points but its locus holds {want} on this medium")]
    Length { index: usize, got: usize, want: usize },
}

/// Fields to draw over one medium, each with a fill color. Later fields are
/// painted over earlier ones.
pub struct RenderSpec<'a> {
    pub medium: &'a SimplicialMedium,
    pub fields: Vec<(Field, String)>,
    /// Outline the transfer-point subdivision of every simplicial tile.
    pub transfer: bool,
}

pub fn valid_color(c: &str) -> bool {
    match c.strip_prefix('#') {
        Some(h) => matches!(h.len(), 3 | 6) && h.chars().all(|ch| ch.is_ascii_hexdigit()),
        None => !c.is_empty() && c.chars().all(|ch| ch.is_ascii_lowercase()),
    }
}

fn touches_outer(m: &SimplicialMedium, s: SimplexId) -> bool {
    let Some(o) = m.outer_vertex() else {
        return false;
    };
    match s.class {
        Class::V => s.index == o,
        Class::E => m.edge_ends(s.index).contains(&o),
        Class::F => m.face_vertices(s.index).contains(&o),
    }
}

/// Voronoi cell of a simplicial data-point among the data-points of nearby
/// simplexes; `None` for simplexes on the outer vertex.
pub fn simplex_cell(m: &SimplicialMedium, s: SimplexId) -> Option<Vec<[f64; 2]>> {
    if touches_outer(m, s) {
        return None;
    }
    let p = m.simplex_position(s);
    let others: Vec<[f64; 2]> = m
        .simplicial_ball(s, 3)
        .into_iter()
        .filter(|&(t, d)| d > 0 && !touches_outer(m, t))
        .map(|(t, _)| m.unwrap_near(m.simplex_position(t), p))
        .collect();
    let r = others
        .iter()
        .map(|q| ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt())
        .fold(0.0, f64::max)
        * 0.5;
    let mut poly = vec![[p[0] - r, p[1] - r], [p[0] + r, p[1] - r], [p[0] + r, p[1] + r], [p[0] - r, p[1] + r]];
    for q in others {
        poly = clip_bisector(&poly, p, q);
    }
    Some(poly)
}

/// Cell of any data-point. A transfer point takes the part of its father's
/// cell nearest to it among the father's transfer points.
pub fn point_cell(m: &SimplicialMedium, locus: Locus, index: u32) -> Option<Vec<[f64; 2]>> {
    if locus.is_simplicial() {
        return simplex_cell(m, SimplexId::new(locus.father(), index));
    }
    let father = m.transfer(locus).father[index as usize];
    let mut poly = simplex_cell(m, SimplexId::new(locus.father(), father))?;
    let p = m.point_position(locus, index);
    for sib in [locus, locus.brother().unwrap()] {
        for j in m.transfer(sib).points_of(father) {
            if sib != locus || j as u32 != index {
                poly = clip_bisector(&poly, p, m.unwrap_near(m.point_position(sib, j as u32), p));
            }
        }
    }
    Some(poly)
}

/// Rounds to three decimals in SVG space and drops repeated corners.
fn svg_points(poly: &[[f64; 2]]) -> Vec<(i64, i64)> {
    let mut pts: Vec<(i64, i64)> = poly
        .iter()
        .map(|p| ((p[0] * SCALE * 1000.0).round() as i64, (-p[1] * SCALE * 1000.0).round() as i64))
        .collect();
    pts.dedup();
    while pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    pts
}

fn fmt_milli(v: i64) -> String {
    let sign = if v < 0 { "-" } else { "" };
    let a = v.unsigned_abs();
    match a % 1000 {
        0 => format!("{sign}{}", a / 1000),
        f => format!("{sign}{}.{}", a / 1000, format!("{f:03}").trim_end_matches('0')),
    }
}

fn polygon(out: &mut String, pts: &[(i64, i64)], fill: &str, stroke: Option<&str>) {
    if pts.len() < 3 {
        return;
    }
    let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{},{}", fmt_milli(x), fmt_milli(y))).collect();
    let stroke = match stroke {
        Some(s) => format!(r#" stroke="{s}" stroke-width="1""#),
        None => String::new(),
    };
    writeln!(out, r#"<polygon points="{}" fill="{fill}"{stroke}/>"#, coords.join(" ")).unwrap();
}

pub fn render_svg(spec: &RenderSpec<'_>) -> Result<String, RenderError> {
    let m = spec.medium;
    for (i, (f, color)) in spec.fields.iter().enumerate() {
        if !valid_color(color) {
            return Err(RenderError::Color(color.clone()));
        }
        let want = m.locus_len(f.ty().locus);
        if f.len() != want {
            return Err(RenderError::Length { index: i, got: f.len(), want });
        }
    }
    let mut tiles: Vec<Vec<(i64, i64)>> = Vec::new();
    for class in [Class::V, Class::E, Class::F] {
        for i in 0..m.count(class) as u32 {
            if let Some(c) = simplex_cell(m, SimplexId::new(class, i)) {
                tiles.push(svg_points(&c));
            }
        }
    }
    let mut sub: Vec<Vec<(i64, i64)>> = Vec::new();
    if spec.transfer {
        for locus in Locus::TRANSFER {
            for i in 0..m.locus_len(locus) as u32 {
                if let Some(c) = point_cell(m, locus, i) {
                    sub.push(svg_points(&c));
                }
            }
        }
    }
    let (mut x0, mut y0, mut x1, mut y1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
    for &(x, y) in tiles.iter().flatten() {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if tiles.is_empty() {
        (x0, y0, x1, y1) = (0, 0, 0, 0);
    }
    let pad = (SCALE * 500.0) as i64;
    let (x0, y0, w, h) = (x0 - pad, y0 - pad, x1 - x0 + 2 * pad, y1 - y0 + 2 * pad);
    let mut out = String::new();
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{} {} {} {}" width="{}" height="{}">"#,
        fmt_milli(x0),
        fmt_milli(y0),
        fmt_milli(w),
        fmt_milli(h),
        fmt_milli(w),
        fmt_milli(h)
    )
    .unwrap();
    writeln!(
        out,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="white"/>"#,
        fmt_milli(x0),
        fmt_milli(y0),
        fmt_milli(w),
        fmt_milli(h)
    )
    .unwrap();
    for (f, color) in &spec.fields {
        let locus = f.ty().locus;
        writeln!(out, r#"<g class="field" data-locus="{locus:?}">"#).unwrap();
        for p in f.true_points() {
            if let Some(c) = point_cell(m, locus, p) {
                polygon(&mut out, &svg_points(&c), color, None);
            }
        }
        writeln!(out, "</g>").unwrap();
    }
    writeln!(out, r#"<g class="tiling" fill="none">"#).unwrap();
    for t in &sub {
        polygon(&mut out, t, "none", Some("#dddddd"));
    }
    for t in &tiles {
        polygon(&mut out, t, "none", Some(OUTLINE));
    }
    writeln!(out, "</g>").unwrap();
    writeln!(out, "</svg>").unwrap();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use spatial_core::fields::FieldType;
    use spatial_core::geometry::area;

    fn corners(m: &SimplicialMedium, s: SimplexId) -> usize {
        let c = simplex_cell(m, s).unwrap();
        // merge corners closer than 1e-6 in medium units
        let mut n = 0;
        for i in 0..c.len() {
            let (a, b) = (c[i], c[(i + 1) % c.len()]);
            if (a[0] - b[0]).hypot(a[1] - b[1]) > 1e-6 {
                n += 1;
            }
        }
        n
    }

    #[test]
    fn hex_tiling_is_hexagons_rectangles_triangles() {
        let m = SimplicialMedium::hex_torus(6, 6).unwrap();
        assert_eq!(corners(&m, SimplexId::vertex(7)), 6);
        assert_eq!(corners(&m, SimplexId::edge(7)), 4);
        assert_eq!(corners(&m, SimplexId::face(7)), 3);
    }

    #[test]
    fn hex_cells_cover_the_torus_once() {
        let m = SimplicialMedium::hex_torus(6, 5).unwrap();
        let mut total = 0.0;
        for class in [Class::V, Class::E, Class::F] {
            for i in 0..m.count(class) as u32 {
                total += area(&simplex_cell(&m, SimplexId::new(class, i)).unwrap());
            }
        }
        let torus = 6.0 * 5.0 * 3f64.sqrt() / 2.0;
        assert!((total - torus).abs() < 1e-9, "{total} vs {torus}");
    }

    #[test]
    fn transfer_cells_partition_their_father() {
        let m = SimplicialMedium::isotropic(40, 1, 3).unwrap();
        for f in 0..m.num_faces() as u32 {
            let Some(cell) = simplex_cell(&m, SimplexId::face(f)) else {
                continue;
            };
            let mut parts = 0.0;
            for locus in [Locus::Ef, Locus::Vf] {
                for j in m.transfer(locus).points_of(f) {
                    parts += area(&point_cell(&m, locus, j as u32).unwrap());
                }
            }
            assert!((parts - area(&cell)).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_colors_and_lengths() {
        let m = SimplicialMedium::hex_torus(4, 4).unwrap();
        let f = Field::zeros(&m, FieldType::bool_v());
        let spec = RenderSpec {
            medium: &m,
            fields: vec![(f, "#12345".into())],
            transfer: false,
        };
        assert_eq!(render_svg(&spec), Err(RenderError::Color("#12345".into())));
        let m8 = SimplicialMedium::hex_torus(8, 8).unwrap();
        let spec = RenderSpec {
            medium: &m8,
            fields: vec![(Field::zeros(&m, FieldType::bool_v()), "red".into())],
            transfer: false,
        };
        assert!(matches!(render_svg(&spec), Err(RenderError::Length { .. })));
    }

    #[test]
    fn milli_formatting() {
        assert_eq!(fmt_milli(1500), "1.5");
        assert_eq!(fmt_milli(-20), "-0.02");
        assert_eq!(fmt_milli(3000), "3");
    }
}
