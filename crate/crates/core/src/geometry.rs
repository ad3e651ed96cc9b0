//! Convex polygon helpers for Voronoi cells.

/// Keeps the part of convex `poly` closer to `site` than to `other`.
pub fn clip_bisector(poly: &[[f64; 2]], site: [f64; 2], other: [f64; 2]) -> Vec<[f64; 2]> {
    // half-plane n·p <= c with n = other - site, c = n·midpoint
    let n = [other[0] - site[0], other[1] - site[1]];
    let mid = [(site[0] + other[0]) * 0.5, (site[1] + other[1]) * 0.5];
    let c = n[0] * mid[0] + n[1] * mid[1];
    clip_halfplane(poly, n, c)
}

/// Sutherland–Hodgman clip of a convex polygon by `n·p <= c`.
pub fn clip_halfplane(poly: &[[f64; 2]], n: [f64; 2], c: f64) -> Vec<[f64; 2]> {
    let side = |p: [f64; 2]| n[0] * p[0] + n[1] * p[1] - c;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let (sa, sb) = (side(a), side(b));
        if sa <= 0.0 {
            out.push(a);
        }
        if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
            let t = sa / (sa - sb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

pub fn area(poly: &[[f64; 2]]) -> f64 {
    let mut s = 0.0;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        s += a[0] * b[1] - b[0] * a[1];
    }
    s * 0.5
}

pub fn centroid(poly: &[[f64; 2]]) -> Option<[f64; 2]> {
    let a = area(poly);
    if a.abs() < 1e-12 {
        return None;
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let cross = p[0] * q[1] - q[0] * p[1];
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    Some([cx / (6.0 * a), cy / (6.0 * a)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisector_halves_unit_square() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let half = clip_bisector(&sq, [0.25, 0.5], [0.75, 0.5]);
        assert!((area(&half) - 0.5).abs() < 1e-12);
        let c = centroid(&half).unwrap();
        assert!((c[0] - 0.25).abs() < 1e-12 && (c[1] - 0.5).abs() < 1e-12);
    }
}
