//! Standard library over a boolV layer: blob features, the rhombus
//! reduction, nbcc and meet-points.

use crate::lang::*;
use crate::locus::Class;

pub fn frontier_e(x: &Expr) -> Expr {
    delta(Class::E, x.clone())
}

pub fn inside_e(x: &Expr) -> Expr {
    forall(Class::E, x.clone())
}

pub fn outside_e(x: &Expr) -> Expr {
    forall(Class::E, not(x.clone()))
}

pub fn inside_f(x: &Expr) -> Expr {
    forall(Class::F, x.clone())
}

pub fn inside_v(x: &Expr) -> Expr {
    forall(Class::V, inside_e(x))
}

pub fn outside_v(x: &Expr) -> Expr {
    forall(Class::V, outside_e(x))
}

pub fn neighborhood(x: &Expr) -> Expr {
    exists(Class::V, exists(Class::E, x.clone()))
}

/// `neighborhood` applied `k` times.
pub fn neighborhood_k(x: &Expr, k: usize) -> Expr {
    (0..k).fold(x.clone(), |acc, _| neighborhood(&acc))
}

pub fn frontier_v(x: &Expr) -> Expr {
    exists(Class::V, frontier_e(x))
}

pub fn frontier_v_in(x: &Expr) -> Expr {
    and(x.clone(), frontier_v(x))
}

pub fn frontier_v_out(x: &Expr) -> Expr {
    and(not(x.clone()), frontier_v(x))
}

pub fn closure_v(xv: &Expr, ye: &Expr) -> Expr {
    or(xv.clone(), exists(Class::V, ye.clone()))
}

/// `∀^⋄`: true on an edge when its two endpoints and two apex vertices all hold.
/// Also accepts a boolE argument.
pub fn rhombus_all(x: &Expr) -> Expr {
    forall(Class::E, forall(Class::F, x.clone()))
}

/// Filled components in each vertex's neighbour ring: half the number of
/// frontier apex-edges.
pub fn nbcc(x: &Expr) -> Expr {
    unary(UnaryOp::Shr(1), reduce(ReduceOp::Plus, apex(frontier_e(x))))
}

pub fn meet_v(x: &Expr) -> Expr {
    unary(UnaryOp::GeConst(2), nbcc(x))
}

pub fn div_v(x: &Expr) -> Expr {
    and(meet_v(x), x.clone())
}

pub fn merge_v(x: &Expr) -> Expr {
    and(meet_v(x), not(x.clone()))
}

pub fn meet_e(x: &Expr) -> Expr {
    and(rhombus_all(&not(frontier_e(x))), forall(Class::E, frontier_v(x)))
}

/// Uses `frontier^V(¬x) = frontier^V(x)`.
pub fn div_e(x: &Expr) -> Expr {
    and(rhombus_all(x), forall(Class::E, frontier_v(x)))
}

pub fn merge_e(x: &Expr) -> Expr {
    and(rhombus_all(&not(x.clone())), forall(Class::E, frontier_v(x)))
}

/// Both meet components with their div and merge parts.
#[derive(Debug, Clone)]
pub struct MeetExprs {
    pub meet_v: Expr,
    pub meet_e: Expr,
    pub div_v: Expr,
    pub div_e: Expr,
    pub merge_v: Expr,
    pub merge_e: Expr,
}

pub fn meet(x: &Expr) -> MeetExprs {
    MeetExprs {
        meet_v: meet_v(x),
        meet_e: meet_e(x),
        div_v: div_v(x),
        div_e: div_e(x),
        merge_v: merge_v(x),
        merge_e: merge_e(x),
    }
}

/// The Voronoi update: grow everywhere except on the vertex closure of merge-points.
pub fn vd_update(x: &Expr) -> Expr {
    and(neighborhood(x), not(closure_v(&merge_v(x), &merge_e(x))))
}

/// Library functions by their expression-language name.
pub fn library(name: &str, args: &[Expr]) -> Option<Result<Expr, String>> {
    let unary_fn: fn(&Expr) -> Expr = match name {
        "frontierE" => frontier_e,
        "insideE" => inside_e,
        "outsideE" => outside_e,
        "insideF" => inside_f,
        "insideV" => inside_v,
        "outsideV" => outside_v,
        "neighborhood" | "neighborhoodV" => neighborhood,
        "frontierV" => frontier_v,
        "frontierVin" => frontier_v_in,
        "frontierVout" => frontier_v_out,
        "rhombus" | "rhombusAll" => rhombus_all,
        "nbcc" => nbcc,
        "meetV" => meet_v,
        "divV" => div_v,
        "mergeV" => merge_v,
        "meetE" => meet_e,
        "divE" => div_e,
        "mergeE" => merge_e,
        "vdUpdate" | "voronoi" => vd_update,
        "closureV" => {
            return Some(match args {
                [a, b] => Ok(closure_v(a, b)),
                _ => Err(format!("`closureV` takes 2 arguments, got {}", args.len())),
            })
        }
        _ => return None,
    };
    Some(match args {
        [a] => Ok(unary_fn(a)),
        _ => Err(format!("`{name}` takes 1 argument, got {}", args.len())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Field, FieldType};
    use crate::locus::Locus;
    use crate::medium::SimplicialMedium;
    use crate::runtime::{interpret, Configuration};
    use crate::voronoi::components;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn hex(n: usize) -> SimplicialMedium {
        SimplicialMedium::hex_torus(n, n).unwrap()
    }

    fn eval(e: &Expr, x: &Field, m: &SimplicialMedium) -> Field {
        interpret(e, &Configuration::single("x", x.clone()), m)
    }

    fn points(m: &SimplicialMedium, vs: &[u32]) -> Field {
        Field::from_points(m, FieldType::bool_v(), vs).unwrap()
    }

    /// Filled runs in the cyclic neighbour ring; 0 when the ring is uniform.
    fn ring_components(m: &SimplicialMedium, x: &Field, v: u32) -> usize {
        let ring: Vec<bool> = m.neighbors(v).iter().map(|&w| x.is_set(w)).collect();
        let n = ring.len();
        (0..n).filter(|&i| ring[i] && !ring[(i + n - 1) % n]).count()
    }

    fn apexes(m: &SimplicialMedium, e: u32) -> [u32; 2] {
        let [a, b] = m.edge_ends(e);
        m.edge_faces(e).map(|f| {
            let vs = m.face_vertices(f);
            *vs.iter().find(|&&v| v != a && v != b).unwrap()
        })
    }

    #[test]
    fn isolated_vertex_features() {
        let m = hex(8);
        let x = points(&m, &[27]);
        let mut expect: Vec<u32> = m.neighbors(27).to_vec();
        expect.push(27);
        expect.sort();
        assert_eq!(eval(&frontier_v(&var("x")), &x, &m).true_points(), expect);
        assert_eq!(eval(&inside_v(&var("x")), &x, &m).popcount(), 0);
        assert_eq!(eval(&outside_v(&var("x")), &x, &m).popcount(), 64 - 7);
        assert_eq!(eval(&neighborhood(&var("x")), &x, &m).true_points(), expect);
        let all = Field::constant(&m, FieldType::bool_v(), 1).unwrap();
        assert_eq!(eval(&inside_f(&var("x")), &all, &m).popcount(), m.num_faces());
    }

    #[test]
    fn closure_of_one_edge_is_its_endpoints() {
        let m = hex(6);
        let y = Field::from_points(&m, FieldType::bool(Locus::E), &[5]).unwrap();
        let c = Configuration::new(vec![
            ("x".into(), Field::zeros(&m, FieldType::bool_v())),
            ("y".into(), y),
        ]);
        let e = closure_v(&var("x"), &layer("y", FieldType::bool(Locus::E)));
        let mut ends = m.edge_ends(5).to_vec();
        ends.sort();
        assert_eq!(interpret(&e, &c, &m).true_points(), ends);
    }

    #[test]
    fn rhombus_with_one_hole() {
        let m = hex(8);
        let mut x = Field::constant(&m, FieldType::bool_v(), 1).unwrap();
        x.set(20, 0);
        let r = eval(&rhombus_all(&var("x")), &x, &m);
        let mut expect: BTreeSet<u32> = m.vertex_edges(20).iter().copied().collect();
        for &f in m.vertex_faces(20) {
            for e in m.face_edges(f) {
                let [a, b] = m.edge_ends(e);
                if a != 20 && b != 20 {
                    expect.insert(e);
                }
            }
        }
        assert_eq!(expect.len(), 12);
        let falses: BTreeSet<u32> = (0..m.num_edges() as u32).filter(|&e| !r.is_set(e)).collect();
        assert_eq!(falses, expect);
    }

    #[test]
    fn merge_fixtures() {
        let m = hex(10);
        // two single-vertex blobs with one empty vertex between them
        let x = points(&m, &[0, 2]);
        assert_eq!(eval(&merge_v(&var("x")), &x, &m).true_points(), vec![1]);
        // with two empty vertices between them the middle edge is a merge-edge
        let x = points(&m, &[0, 3]);
        let me = eval(&merge_e(&var("x")), &x, &m);
        let mid = (0..m.num_edges() as u32)
            .find(|&e| {
                let mut ends = m.edge_ends(e);
                ends.sort();
                ends == [1, 2]
            })
            .unwrap();
        assert_eq!(me.true_points(), vec![mid]);
        assert_eq!(eval(&merge_v(&var("x")), &x, &m).popcount(), 0);
        let none = Field::zeros(&m, FieldType::bool_v());
        assert_eq!(eval(&meet_e(&var("x")), &none, &m).popcount(), 0);
        let all = none.not();
        assert_eq!(eval(&meet_v(&var("x")), &all, &m).popcount(), 0);
    }

    fn check_random(m: &SimplicialMedium, seed: u64, density: f64) {
        let x = Field::random(m, FieldType::bool_v(), seed, density);
        let v = var("x");
        let fe = eval(&frontier_e(&v), &x, m);
        let rh = eval(&rhombus_all(&v), &x, m);
        let nb = eval(&nbcc(&v), &x, m);
        let mv = eval(&merge_v(&v), &x, m);
        let me = eval(&merge_e(&v), &x, m);
        for e in 0..m.num_edges() as u32 {
            let [a, b] = m.edge_ends(e);
            assert_eq!(fe.is_set(e), x.is_set(a) != x.is_set(b));
            let [c, d] = apexes(m, e);
            assert_eq!(rh.is_set(e), [a, b, c, d].iter().all(|&u| x.is_set(u)));
            // an empty rhombus with filled vertices beyond both endpoints
            let side = |p: u32| m.neighbors(p).iter().any(|&w| ![a, b, c, d].contains(&w) && x.is_set(w));
            let empty = [a, b, c, d].iter().all(|&u| !x.is_set(u));
            assert_eq!(me.is_set(e), empty && side(a) && side(b), "edge {e}");
        }
        for p in 0..m.num_vertices() as u32 {
            let k = ring_components(m, &x, p);
            assert_eq!(nb.get(p) as usize, k, "vertex {p}");
            assert_eq!(mv.is_set(p), !x.is_set(p) && k >= 2);
        }
    }

    #[test]
    fn features_match_direct_oracles_on_hex() {
        let m = hex(8);
        for seed in 0..20 {
            check_random(&m, seed, 0.2 + 0.03 * seed as f64);
        }
    }

    #[test]
    fn features_match_direct_oracles_on_isotropic() {
        let m = SimplicialMedium::isotropic(120, 3, 10).unwrap();
        for seed in 0..20 {
            check_random(&m, seed, 0.2 + 0.03 * seed as f64);
        }
    }

    #[test]
    fn global_merges_are_local_merges() {
        let m = hex(10);
        for seed in 0..30 {
            let x = Field::random(&m, FieldType::bool_v(), seed, 0.35);
            let comps = components(&m, &x);
            let blob_of = |v: u32| comps.iter().position(|c| c.binary_search(&v).is_ok());
            let mv = eval(&merge_v(&var("x")), &x, &m);
            for p in 0..m.num_vertices() as u32 {
                let touching: BTreeSet<usize> = m.neighbors(p).iter().filter_map(|&w| blob_of(w)).collect();
                if !x.is_set(p) && touching.len() >= 2 {
                    assert!(mv.is_set(p), "seed {seed} vertex {p}");
                }
            }
        }
    }

    #[test]
    fn filling_a_non_merge_vertex_never_joins_local_blobs() {
        let m = hex(10);
        for seed in 0..30 {
            let x = Field::random(&m, FieldType::bool_v(), seed, 0.4);
            let mv = eval(&merge_v(&var("x")), &x, &m);
            for p in 0..m.num_vertices() as u32 {
                if x.is_set(p) || mv.is_set(p) {
                    continue;
                }
                let ball: BTreeSet<u32> = m
                    .vertex_bfs(&[p], false)
                    .iter()
                    .enumerate()
                    .filter(|(_, &d)| d <= 2)
                    .map(|(v, _)| v as u32)
                    .collect();
                let local = |f: &Field| {
                    let mut g = Field::zeros(&m, FieldType::bool_v());
                    for &v in &ball {
                        g.set(v, f.get(v));
                    }
                    components(&m, &g).len()
                };
                let mut y = x.clone();
                y.set(p, 1);
                assert!(local(&y) >= local(&x), "seed {seed} vertex {p}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn div_is_merge_of_complement(seed in any::<u64>(), density in 0.1f64..0.9) {
            let m = hex(8);
            let x = Field::random(&m, FieldType::bool_v(), seed, density);
            let nx = x.not();
            let v = var("x");
            prop_assert_eq!(eval(&div_v(&v), &x, &m), eval(&merge_v(&v), &nx, &m));
            prop_assert_eq!(eval(&div_e(&v), &x, &m), eval(&merge_e(&v), &nx, &m));
            prop_assert_eq!(eval(&frontier_v(&v), &x, &m), eval(&frontier_v(&v), &nx, &m));
        }
    }
}
