//! Maximal planar media: the hexagonal torus and isotropic (Delaunay) media,
//! their simplicial graph, and the six transfer locus.
//!
//! Every medium is a closed triangulated surface. Isotropic media are
//! triangulated disks closed by one extra "outer" vertex joined to the hull;
//! the hull vertices together with the outer vertex form the border, which is
//! pinned empty and excluded from computation.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::locus::{Class, Locus};

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// Lattice directions of the hexagonal torus in counter-clockwise order.
const HEX_DIRS: [(i64, i64); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

#[derive(Debug, thiserror::Error)]
pub enum MediumError {
    #[error("medium too small: {0}")]
    TooSmall(String),
    #[error("triangulation failed after {attempts} attempts: {reason}")]
    Triangulation { attempts: usize, reason: String },
    #[error("invalid medium: {0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Topology {
    Torus { cols: usize, rows: usize },
    Bordered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediumKind {
    Hexagonal,
    Isotropic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SimplexId {
    pub class: Class,
    pub index: u32,
}

impl SimplexId {
    pub fn new(class: Class, index: u32) -> Self {
        SimplexId { class, index }
    }
    pub fn vertex(index: u32) -> Self {
        SimplexId::new(Class::V, index)
    }
    pub fn edge(index: u32) -> Self {
        SimplexId::new(Class::E, index)
    }
    pub fn face(index: u32) -> Self {
        SimplexId::new(Class::F, index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransferPointId {
    pub locus: Locus,
    pub father: SimplexId,
    pub slot: u32,
}

/// Index tables for one transfer locus. Points are ordered by father, then slot.
#[derive(Debug, Clone, Default)]
pub struct TransferLocus {
    /// `offsets[s]..offsets[s + 1]` are the points of father `s`.
    pub offsets: Vec<u32>,
    pub father: Vec<u32>,
    pub slot: Vec<u32>,
    /// The adjacent simplex (of the facing class) each point sits toward.
    pub other: Vec<u32>,
    /// Index of the paired point in the partner locus.
    pub partner: Vec<u32>,
    /// `(ccw x)[j] = x[ccw_from[j]]` where `x` lives on the brother locus.
    pub ccw_from: Vec<u32>,
    pub cw_from: Vec<u32>,
    /// Source of central symmetry: same locus for V and E fathers, brother for F.
    /// Absent for V fathers on isotropic media.
    pub sym_from: Option<Vec<u32>>,
}

impl TransferLocus {
    pub fn len(&self) -> usize {
        self.father.len()
    }
    pub fn is_empty(&self) -> bool {
        self.father.is_empty()
    }
    pub fn points_of(&self, father: u32) -> std::ops::Range<usize> {
        self.offsets[father as usize] as usize..self.offsets[father as usize + 1] as usize
    }
}

/// Partition of all simplexes into per-vertex circuit tiles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileMap {
    /// Owning vertex, per class.
    pub owner: [Vec<u32>; 3],
    /// Rank of the simplex inside its tile. Translation invariant on the hex torus.
    pub local_rank: [Vec<u32>; 3],
}

impl TileMap {
    pub fn owner_of(&self, s: SimplexId) -> u32 {
        self.owner[s.class.index()][s.index as usize]
    }

    /// Number of simplexes of each class owned by every tile.
    pub fn loads(&self, tiles: usize) -> Vec<[usize; 3]> {
        let mut out = vec![[0usize; 3]; tiles];
        for c in Class::ALL {
            for &o in &self.owner[c.index()] {
                out[o as usize][c.index()] += 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SimplicialMedium {
    topology: Topology,
    positions: Vec<[f64; 2]>,
    edges: Vec<[u32; 2]>,
    faces: Vec<[u32; 3]>,
    edge_ends: Vec<[u32; 2]>,
    edge_faces: Vec<[u32; 2]>,
    face_ccw: Vec<[u32; 3]>,
    face_edges: Vec<[u32; 3]>,
    vert_edges: Vec<Vec<u32>>,
    vert_faces: Vec<Vec<u32>>,
    vert_nbrs: Vec<Vec<u32>>,
    border: Vec<bool>,
    border_ring: Vec<u32>,
    outer: Option<u32>,
    transfer: [TransferLocus; 6],
    tiles: TileMap,
    tile_seed: u64,
}

struct Assembly {
    topology: Topology,
    positions: Vec<[f64; 2]>,
    /// Counter-clockwise faces, first vertex is slot 0.
    ccw_faces: Vec<[u32; 3]>,
    border_ring: Vec<u32>,
    outer: Option<u32>,
    tile_seed: u64,
}

impl SimplicialMedium {
    /// Hexagonal lattice wrapped on a torus, `cols × rows` vertices of degree 6.
    pub fn hex_torus(cols: usize, rows: usize) -> Result<Self, MediumError> {
        if cols < 3 {
            return Err(MediumError::TooSmall(format!("cols = {cols}, need cols >= 3")));
        }
        if rows < 3 {
            return Err(MediumError::TooSmall(format!("rows = {rows}, need rows >= 3")));
        }
        let id = |i: i64, j: i64| -> u32 {
            let i = i.rem_euclid(cols as i64) as usize;
            let j = j.rem_euclid(rows as i64) as usize;
            (j * cols + i) as u32
        };
        let mut positions = Vec::with_capacity(cols * rows);
        for j in 0..rows {
            for i in 0..cols {
                positions.push([i as f64 + 0.5 * j as f64, j as f64 * SQRT3_2]);
            }
        }
        let mut ccw_faces = Vec::with_capacity(2 * cols * rows);
        for j in 0..rows as i64 {
            for i in 0..cols as i64 {
                ccw_faces.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                ccw_faces.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let coord = |v: u32| ((v as usize % cols) as i64, (v as usize / cols) as i64);
        let dir_of = |a: u32, b: u32| -> Option<usize> {
            let (ai, aj) = coord(a);
            HEX_DIRS.iter().position(|&(di, dj)| id(ai + di, aj + dj) == b)
        };
        let asm = Assembly {
            topology: Topology::Torus { cols, rows },
            positions,
            ccw_faces,
            border_ring: Vec::new(),
            outer: None,
            tile_seed: 0,
        };
        let edge_first = |a: u32, b: u32| {
            if matches!(dir_of(a, b), Some(0..=2)) {
                a
            } else {
                b
            }
        };
        let start = |v: u32, _nbrs: &[u32]| {
            let (i, j) = coord(v);
            id(i + 1, j)
        };
        let mut m = assemble(asm, edge_first, start)?;
        m.tiles = m.hex_tiles(&id, &dir_of);
        Ok(m)
    }

    /// Isotropic medium: Poisson-disk sample relaxed by Lloyd iterations,
    /// Delaunay-triangulated and closed by an outer vertex.
    pub fn isotropic(n: usize, rng_seed: u64, relax_iters: usize) -> Result<Self, MediumError> {
        if n < 10 {
            return Err(MediumError::TooSmall(format!("n = {n}, need n >= 10")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        // unit density in a disk of diameter `side`
        let side = 2.0 * (n as f64 / std::f64::consts::PI).sqrt();
        let mut pts = poisson_disk(n, side, &mut rng);
        for _ in 0..relax_iters {
            pts = lloyd_step(&pts, side)?;
        }
        const ATTEMPTS: usize = 5;
        let mut last_err = String::new();
        for attempt in 0..ATTEMPTS {
            if attempt > 0 {
                for p in &mut pts {
                    p[0] = (p[0] + rng.gen_range(-1e-6..1e-6)).clamp(0.0, side);
                    p[1] = (p[1] + rng.gen_range(-1e-6..1e-6)).clamp(0.0, side);
                }
            }
            let quantized: Vec<[f64; 2]> = pts.iter().map(|p| [quantize(p[0]), quantize(p[1])]).collect();
            match triangulate_closed(&quantized, side, rng_seed) {
                Ok(m) => return Ok(m),
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(MediumError::Triangulation {
            attempts: ATTEMPTS,
            reason: last_err,
        })
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn kind(&self) -> MediumKind {
        match self.topology {
            Topology::Torus { .. } => MediumKind::Hexagonal,
            Topology::Bordered => MediumKind::Isotropic,
        }
    }

    pub fn hex_dims(&self) -> Option<(usize, usize)> {
        match self.topology {
            Topology::Torus { cols, rows } => Some((cols, rows)),
            Topology::Bordered => None,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }
    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }
    pub fn count(&self, class: Class) -> usize {
        match class {
            Class::V => self.num_vertices(),
            Class::E => self.num_edges(),
            Class::F => self.num_faces(),
        }
    }

    /// Number of data-points of a locus.
    pub fn locus_len(&self, locus: Locus) -> usize {
        if locus.is_simplicial() {
            self.count(locus.father())
        } else {
            self.transfer(locus).len()
        }
    }

    pub fn transfer(&self, locus: Locus) -> &TransferLocus {
        assert!(locus.is_transfer(), "{locus} is not a transfer locus");
        &self.transfer[locus.index() - 3]
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }
    /// Canonical (sorted) vertex pairs.
    pub fn edges(&self) -> &[[u32; 2]] {
        &self.edges
    }
    /// Canonical (sorted) vertex triples.
    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }
    /// Endpoints in slot order.
    pub fn edge_ends(&self, e: u32) -> [u32; 2] {
        self.edge_ends[e as usize]
    }
    /// Adjacent faces in slot order: right then left of `edge_ends[0] → edge_ends[1]`.
    pub fn edge_faces(&self, e: u32) -> [u32; 2] {
        self.edge_faces[e as usize]
    }
    /// Counter-clockwise vertices, slot order.
    pub fn face_vertices(&self, f: u32) -> [u32; 3] {
        self.face_ccw[f as usize]
    }
    /// `face_edges(f)[i]` joins vertex slots `i` and `i + 1`.
    pub fn face_edges(&self, f: u32) -> [u32; 3] {
        self.face_edges[f as usize]
    }
    /// Incident edges, counter-clockwise.
    pub fn vertex_edges(&self, v: u32) -> &[u32] {
        &self.vert_edges[v as usize]
    }
    /// Incident faces; slot `k` lies between edge slots `k` and `k + 1`.
    pub fn vertex_faces(&self, v: u32) -> &[u32] {
        &self.vert_faces[v as usize]
    }
    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.vert_nbrs[v as usize]
    }
    pub fn degree(&self, v: u32) -> usize {
        self.vert_nbrs[v as usize].len()
    }
    pub fn is_border(&self, v: u32) -> bool {
        self.border[v as usize]
    }
    pub fn border_mask(&self) -> &[bool] {
        &self.border
    }
    /// Hull vertices in counter-clockwise order (bordered media only).
    pub fn border_ring(&self) -> &[u32] {
        &self.border_ring
    }
    pub fn outer_vertex(&self) -> Option<u32> {
        self.outer
    }
    pub fn tiles(&self) -> &TileMap {
        &self.tiles
    }

    /// Vertices that take part in computation (all but the border).
    pub fn interior_vertices(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.num_vertices() as u32).filter(move |&v| !self.border[v as usize])
    }

    /// Largest number of neighbours of another class a simplex of `father` has.
    pub fn max_coarity(&self, father: Class) -> usize {
        match father {
            Class::V => self.vert_nbrs.iter().map(Vec::len).max().unwrap_or(0),
            Class::E => 2,
            Class::F => 3,
        }
    }

    pub fn transfer_point(&self, locus: Locus, index: u32) -> TransferPointId {
        let t = self.transfer(locus);
        TransferPointId {
            locus,
            father: SimplexId::new(locus.father(), t.father[index as usize]),
            slot: t.slot[index as usize],
        }
    }

    /// The simplexes adjacent to `s` in the simplicial graph.
    pub fn simplicial_neighbors(&self, s: SimplexId) -> Vec<SimplexId> {
        let i = s.index as usize;
        match s.class {
            Class::V => self.vert_edges[i]
                .iter()
                .map(|&e| SimplexId::edge(e))
                .chain(self.vert_faces[i].iter().map(|&f| SimplexId::face(f)))
                .collect(),
            Class::E => self.edge_ends[i]
                .iter()
                .map(|&v| SimplexId::vertex(v))
                .chain(self.edge_faces[i].iter().map(|&f| SimplexId::face(f)))
                .collect(),
            Class::F => self.face_ccw[i]
                .iter()
                .map(|&v| SimplexId::vertex(v))
                .chain(self.face_edges[i].iter().map(|&e| SimplexId::edge(e)))
                .collect(),
        }
    }

    /// Flat index of a simplex in the simplicial graph (V, then E, then F).
    pub fn flat_index(&self, s: SimplexId) -> usize {
        match s.class {
            Class::V => s.index as usize,
            Class::E => self.num_vertices() + s.index as usize,
            Class::F => self.num_vertices() + self.num_edges() + s.index as usize,
        }
    }

    pub fn num_simplexes(&self) -> usize {
        self.num_vertices() + self.num_edges() + self.num_faces()
    }

    fn simplex_at_flat(&self, i: usize) -> SimplexId {
        let (nv, ne) = (self.num_vertices(), self.num_edges());
        if i < nv {
            SimplexId::vertex(i as u32)
        } else if i < nv + ne {
            SimplexId::edge((i - nv) as u32)
        } else {
            SimplexId::face((i - nv - ne) as u32)
        }
    }

    /// Hop counts in the simplicial graph from `from` to every simplex, in flat order.
    pub fn simplicial_bfs(&self, from: SimplexId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.num_simplexes()];
        let mut queue = VecDeque::new();
        dist[self.flat_index(from)] = 0;
        queue.push_back(from);
        while let Some(s) = queue.pop_front() {
            let d = dist[self.flat_index(s)];
            for t in self.simplicial_neighbors(s) {
                let ti = self.flat_index(t);
                if dist[ti] == u32::MAX {
                    dist[ti] = d + 1;
                    queue.push_back(t);
                }
            }
        }
        dist
    }

    pub fn simplicial_distance(&self, a: SimplexId, b: SimplexId) -> u32 {
        self.simplicial_bfs(a)[self.flat_index(b)]
    }

    /// Simplexes within `radius` hops of `center`, with their distance.
    pub fn simplicial_ball(&self, center: SimplexId, radius: u32) -> Vec<(SimplexId, u32)> {
        self.simplicial_bfs(center)
            .into_iter()
            .enumerate()
            .filter(|&(_, d)| d <= radius)
            .map(|(i, d)| (self.simplex_at_flat(i), d))
            .collect()
    }

    /// Vertex hop counts from a set of sources. With `interior_only`, border
    /// vertices are neither sources nor traversed.
    pub fn vertex_bfs(&self, sources: &[u32], interior_only: bool) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.num_vertices()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if interior_only && self.border[s as usize] {
                continue;
            }
            if dist[s as usize] != 0 {
                dist[s as usize] = 0;
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            let d = dist[v as usize];
            for &w in &self.vert_nbrs[v as usize] {
                if interior_only && self.border[w as usize] {
                    continue;
                }
                if dist[w as usize] == u32::MAX {
                    dist[w as usize] = d + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Vertex-hop diameter of the computing part of the medium.
    pub fn vertex_diameter(&self) -> u32 {
        match self.topology {
            // vertex transitive: one eccentricity suffices
            Topology::Torus { .. } => self.vertex_bfs(&[0], false).into_iter().max().unwrap_or(0),
            Topology::Bordered => self
                .interior_vertices()
                .map(|v| {
                    self.vertex_bfs(&[v], true)
                        .into_iter()
                        .filter(|&d| d != u32::MAX)
                        .max()
                        .unwrap_or(0)
                })
                .max()
                .unwrap_or(0),
        }
    }

    pub fn degree_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for v in 0..self.num_vertices() as u32 {
            *h.entry(self.degree(v)).or_insert(0) += 1;
        }
        h
    }

    pub fn interior_degree_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for v in self.interior_vertices() {
            *h.entry(self.degree(v)).or_insert(0) += 1;
        }
        h
    }

    /// Nearest periodic image of `p` to `reference` (identity on bordered media).
    pub fn unwrap_near(&self, p: [f64; 2], reference: [f64; 2]) -> [f64; 2] {
        let Topology::Torus { cols, rows } = self.topology else {
            return p;
        };
        let p1 = [cols as f64, 0.0];
        let p2 = [rows as f64 * 0.5, rows as f64 * SQRT3_2];
        let mut best = p;
        let mut best_d = f64::INFINITY;
        for a in -1..=1 {
            for b in -1..=1 {
                let q = [
                    p[0] + a as f64 * p1[0] + b as f64 * p2[0],
                    p[1] + a as f64 * p1[1] + b as f64 * p2[1],
                ];
                let d = (q[0] - reference[0]).powi(2) + (q[1] - reference[1]).powi(2);
                if d < best_d - 1e-12 {
                    best_d = d;
                    best = q;
                }
            }
        }
        best
    }

    /// 2D location of a simplicial data-point (vertex, edge middle, face barycenter).
    pub fn simplex_position(&self, s: SimplexId) -> [f64; 2] {
        let mean = |vs: &[u32]| {
            let r = self.positions[vs[0] as usize];
            let mut acc = [0.0, 0.0];
            for &v in vs {
                let p = self.unwrap_near(self.positions[v as usize], r);
                acc[0] += p[0];
                acc[1] += p[1];
            }
            [acc[0] / vs.len() as f64, acc[1] / vs.len() as f64]
        };
        match s.class {
            Class::V => self.positions[s.index as usize],
            Class::E => mean(&self.edge_ends[s.index as usize]),
            Class::F => mean(&self.face_ccw[s.index as usize]),
        }
    }

    /// Location of any data-point; transfer points split the father–other
    /// segment in three, nearer the father.
    pub fn point_position(&self, locus: Locus, index: u32) -> [f64; 2] {
        if locus.is_simplicial() {
            return self.simplex_position(SimplexId::new(locus.father(), index));
        }
        let t = self.transfer(locus);
        let father = self.simplex_position(SimplexId::new(locus.father(), t.father[index as usize]));
        let other = self.simplex_position(SimplexId::new(locus.toward().unwrap(), t.other[index as usize]));
        let other = self.unwrap_near(other, father);
        [
            father[0] + (other[0] - father[0]) / 3.0,
            father[1] + (other[1] - father[1]) / 3.0,
        ]
    }

    /// Owning vertex of any data-point.
    pub fn point_owner(&self, locus: Locus, index: u32) -> u32 {
        let father = if locus.is_simplicial() {
            index
        } else {
            self.transfer(locus).father[index as usize]
        };
        self.tiles.owner[locus.father().index()][father as usize]
    }

    pub fn medium_hash(&self) -> [u8; 32] {
        let doc = serde_json::to_vec(&self.to_doc()).expect("medium serializes");
        Sha256::digest(&doc).into()
    }

    fn hex_tiles(&self, id: &dyn Fn(i64, i64) -> u32, dir_of: &dyn Fn(u32, u32) -> Option<usize>) -> TileMap {
        let Topology::Torus { cols, .. } = self.topology else {
            unreachable!()
        };
        let nv = self.num_vertices();
        let mut owner = [vec![0u32; nv], vec![0; self.num_edges()], vec![0; self.num_faces()]];
        let mut rank = owner.clone();
        for v in 0..nv {
            owner[0][v] = v as u32;
        }
        for (e, ends) in self.edge_ends.iter().enumerate() {
            owner[1][e] = ends[0];
            rank[1][e] = dir_of(ends[0], ends[1]).expect("edge along a lattice direction") as u32;
        }
        for (f, tri) in self.face_ccw.iter().enumerate() {
            let p = tri[0];
            let (i, j) = ((p as usize % cols) as i64, (p as usize / cols) as i64);
            if tri[1] == id(i + 1, j) {
                owner[2][f] = p;
                rank[2][f] = 0;
            } else {
                owner[2][f] = id(i - 1, j);
                rank[2][f] = 1;
            }
        }
        TileMap {
            owner,
            local_rank: rank,
        }
    }

    /// Serializable document in canonical order.
    pub fn to_doc(&self) -> MediumDoc {
        let (cols, rows, points, outer) = match self.topology {
            Topology::Torus { cols, rows } => (Some(cols), Some(rows), None, None),
            Topology::Bordered => {
                let outer = self.outer.expect("bordered media have an outer vertex");
                let pts = self.positions[..outer as usize].to_vec();
                (None, None, Some(pts), Some(outer))
            }
        };
        MediumDoc {
            version: MediumDoc::VERSION,
            topology: match self.topology {
                Topology::Torus { .. } => "torus".into(),
                Topology::Bordered => "bordered".into(),
            },
            cols,
            rows,
            points,
            outer,
            edges: self.edges.clone(),
            faces: self.faces.iter().map(|f| f.to_vec()).collect(),
            border: self.border_ring.clone(),
            tile_seed: self.tile_seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("medium serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, MediumError> {
        let doc: MediumDoc = serde_json::from_str(s)?;
        Self::from_doc(&doc)
    }

    /// Rebuilds a medium from its document and re-validates it.
    pub fn from_doc(doc: &MediumDoc) -> Result<Self, MediumError> {
        if doc.version != MediumDoc::VERSION {
            return Err(MediumError::Invalid(format!("unsupported version {}", doc.version)));
        }
        let report = validate_doc(doc);
        if !report.passed {
            return Err(MediumError::Invalid(report.failures.join("; ")));
        }
        let m = match doc.topology.as_str() {
            "torus" => {
                let (Some(cols), Some(rows)) = (doc.cols, doc.rows) else {
                    return Err(MediumError::Invalid("torus needs cols and rows".into()));
                };
                let m = Self::hex_torus(cols, rows)?;
                if m.edges != doc.edges || m.faces.iter().map(|f| f.to_vec()).ne(doc.faces.iter().cloned()) {
                    return Err(MediumError::Invalid("edges/faces differ from the hexagonal lattice".into()));
                }
                m
            }
            "bordered" => rebuild_bordered(doc)?,
            other => return Err(MediumError::Invalid(format!("unknown topology `{other}`"))),
        };
        let report = validate(&m);
        if !report.passed {
            return Err(MediumError::Invalid(report.failures.join("; ")));
        }
        Ok(m)
    }
}

fn quantize(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Builds adjacency, rotation systems and transfer tables from oriented faces.
fn assemble(
    asm: Assembly,
    edge_first: impl Fn(u32, u32) -> u32,
    start_nbr: impl Fn(u32, &[u32]) -> u32,
) -> Result<SimplicialMedium, MediumError> {
    let nv = asm.positions.len();
    // (v, a) -> (b, face slot in ccw list): around v, neighbour b follows a
    let mut next: HashMap<(u32, u32), (u32, usize)> = HashMap::with_capacity(asm.ccw_faces.len() * 3);
    for (fi, tri) in asm.ccw_faces.iter().enumerate() {
        if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
            return Err(MediumError::Invalid(format!("degenerate face {tri:?}")));
        }
        for k in 0..3 {
            let (v, a, b) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            if (v as usize) >= nv || (a as usize) >= nv {
                return Err(MediumError::Invalid(format!("face {tri:?} out of range")));
            }
            if next.insert((v, a), (b, fi)).is_some() {
                return Err(MediumError::Invalid(format!(
                    "non-manifold or inconsistently oriented faces at vertex {v}"
                )));
            }
        }
    }

    let mut pairs: Vec<[u32; 2]> = next.keys().map(|&(v, a)| sorted2(v, a)).collect();
    pairs.sort_unstable();
    pairs.dedup();
    let edges = pairs;
    let edge_index: HashMap<[u32; 2], u32> = edges.iter().enumerate().map(|(i, &e)| (e, i as u32)).collect();

    let mut order: Vec<usize> = (0..asm.ccw_faces.len()).collect();
    order.sort_by_key(|&i| sorted3(asm.ccw_faces[i]));
    let mut canon_of_input = vec![0u32; asm.ccw_faces.len()];
    for (c, &i) in order.iter().enumerate() {
        canon_of_input[i] = c as u32;
    }
    let faces: Vec<[u32; 3]> = order.iter().map(|&i| sorted3(asm.ccw_faces[i])).collect();
    if faces.windows(2).any(|w| w[0] == w[1]) {
        return Err(MediumError::Invalid("duplicate face".into()));
    }
    let face_ccw: Vec<[u32; 3]> = order.iter().map(|&i| asm.ccw_faces[i]).collect();

    let mut nbr_lists: Vec<Vec<u32>> = vec![Vec::new(); nv];
    for &(v, a) in next.keys() {
        nbr_lists[v as usize].push(a);
    }
    let mut vert_nbrs = Vec::with_capacity(nv);
    let mut vert_edges = Vec::with_capacity(nv);
    let mut vert_faces = Vec::with_capacity(nv);
    for v in 0..nv as u32 {
        let all = &mut nbr_lists[v as usize];
        all.sort_unstable();
        if all.is_empty() {
            return Err(MediumError::Invalid(format!("isolated vertex {v}")));
        }
        let start = start_nbr(v, all);
        let mut ring = vec![start];
        let mut fs = Vec::new();
        let mut cur = start;
        loop {
            let &(nx, fi) = next
                .get(&(v, cur))
                .ok_or_else(|| MediumError::Invalid(format!("open link at vertex {v}")))?;
            fs.push(canon_of_input[fi]);
            if nx == start {
                break;
            }
            ring.push(nx);
            cur = nx;
            if ring.len() > all.len() {
                return Err(MediumError::Invalid(format!("link of vertex {v} is not a cycle")));
            }
        }
        if ring.len() != all.len() {
            return Err(MediumError::Invalid(format!(
                "link of vertex {v} is not a single cycle"
            )));
        }
        vert_edges.push(ring.iter().map(|&w| edge_index[&sorted2(v, w)]).collect::<Vec<_>>());
        vert_faces.push(fs);
        vert_nbrs.push(ring);
    }

    let edge_ends: Vec<[u32; 2]> = edges
        .iter()
        .map(|&[a, b]| if edge_first(a, b) == a { [a, b] } else { [b, a] })
        .collect();
    let edge_faces: Vec<[u32; 2]> = edge_ends
        .iter()
        .map(|&[a, b]| {
            let ring = &vert_nbrs[a as usize];
            let k = ring.iter().position(|&w| w == b).unwrap();
            let d = ring.len();
            let fs = &vert_faces[a as usize];
            [fs[(k + d - 1) % d], fs[k]]
        })
        .collect();
    let face_edges: Vec<[u32; 3]> = face_ccw
        .iter()
        .map(|t| {
            [
                edge_index[&sorted2(t[0], t[1])],
                edge_index[&sorted2(t[1], t[2])],
                edge_index[&sorted2(t[2], t[0])],
            ]
        })
        .collect();

    let mut border = vec![false; nv];
    for &v in &asm.border_ring {
        border[v as usize] = true;
    }
    if let Some(o) = asm.outer {
        border[o as usize] = true;
    }
    let hex = matches!(asm.topology, Topology::Torus { .. });

    let mut m = SimplicialMedium {
        topology: asm.topology,
        positions: asm.positions,
        edges,
        faces,
        edge_ends,
        edge_faces,
        face_ccw,
        face_edges,
        vert_edges,
        vert_faces,
        vert_nbrs,
        border,
        border_ring: asm.border_ring,
        outer: asm.outer,
        transfer: Default::default(),
        tiles: TileMap {
            owner: [Vec::new(), Vec::new(), Vec::new()],
            local_rank: [Vec::new(), Vec::new(), Vec::new()],
        },
        tile_seed: asm.tile_seed,
    };
    m.build_transfer(hex);
    Ok(m)
}

impl SimplicialMedium {
    fn slots_of(&self, locus: Locus, father: usize) -> Vec<u32> {
        match locus {
            Locus::Ev => self.vert_edges[father].clone(),
            Locus::Fv => self.vert_faces[father].clone(),
            Locus::Ve => self.edge_ends[father].to_vec(),
            Locus::Fe => self.edge_faces[father].to_vec(),
            Locus::Vf => self.face_ccw[father].to_vec(),
            Locus::Ef => self.face_edges[father].to_vec(),
            _ => unreachable!(),
        }
    }

    fn build_transfer(&mut self, hex: bool) {
        let mut tables: [TransferLocus; 6] = Default::default();
        for locus in Locus::TRANSFER {
            let t = &mut tables[locus.index() - 3];
            let n = self.count(locus.father());
            t.offsets.push(0);
            for s in 0..n {
                for (k, o) in self.slots_of(locus, s).into_iter().enumerate() {
                    t.father.push(s as u32);
                    t.slot.push(k as u32);
                    t.other.push(o);
                }
                t.offsets.push(t.father.len() as u32);
            }
        }
        // pairing: xY(father s, other o) <-> yX(father o, other s)
        for locus in Locus::TRANSFER {
            let partner = locus.partner().unwrap();
            let (src, dst) = (&tables[locus.index() - 3], &tables[partner.index() - 3]);
            let p: Vec<u32> = (0..src.len())
                .map(|i| {
                    let (s, o) = (src.father[i], src.other[i]);
                    dst.points_of(o)
                        .find(|&j| dst.other[j] == s)
                        .expect("paired transfer point exists") as u32
                })
                .collect();
            tables[locus.index() - 3].partner = p;
        }
        // rotations and symmetry over each father's interleaved cycle
        for class in Class::ALL {
            let (lead, follow) = match class {
                Class::V => (Locus::Ev, Locus::Fv),
                Class::E => (Locus::Ve, Locus::Fe),
                Class::F => (Locus::Vf, Locus::Ef),
            };
            debug_assert!(lead.is_leading());
            let mut ccw = [vec![0u32; tables[lead.index() - 3].len()], vec![0u32; tables[follow.index() - 3].len()]];
            let mut cw = ccw.clone();
            let mut sym = ccw.clone();
            for s in 0..self.count(class) as u32 {
                let a = tables[lead.index() - 3].points_of(s);
                let b = tables[follow.index() - 3].points_of(s);
                debug_assert_eq!(a.len(), b.len());
                let k = a.len();
                let n = 2 * k;
                // position p: even -> lead slot p/2, odd -> follow slot p/2
                let at = |p: usize| -> u32 {
                    let p = p % n;
                    if p.is_multiple_of(2) {
                        (a.start + p / 2) as u32
                    } else {
                        (b.start + p / 2) as u32
                    }
                };
                for p in 0..n {
                    let (side, idx) = if p % 2 == 0 { (0, a.start + p / 2) } else { (1, b.start + p / 2) };
                    ccw[side][idx] = at(p + n - 1);
                    cw[side][idx] = at(p + 1);
                    sym[side][idx] = at(p + k);
                }
            }
            let sym_ok = class != Class::V || hex;
            let [ccw_a, ccw_b] = ccw;
            let [cw_a, cw_b] = cw;
            let [sym_a, sym_b] = sym;
            let ta = &mut tables[lead.index() - 3];
            ta.ccw_from = ccw_a;
            ta.cw_from = cw_a;
            ta.sym_from = sym_ok.then_some(sym_a);
            let tb = &mut tables[follow.index() - 3];
            tb.ccw_from = ccw_b;
            tb.cw_from = cw_b;
            tb.sym_from = sym_ok.then_some(sym_b);
        }
        self.transfer = tables;
    }
}

fn sorted2(a: u32, b: u32) -> [u32; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn sorted3(t: [u32; 3]) -> [u32; 3] {
    let mut s = t;
    s.sort_unstable();
    s
}

fn rotate_to_min(t: [u32; 3]) -> [u32; 3] {
    let k = (0..3).min_by_key(|&i| t[i]).unwrap();
    [t[k], t[(k + 1) % 3], t[(k + 2) % 3]]
}

fn orient2d(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

const REGION_SIDES: usize = 64;

/// The sampling region: a regular polygon inscribed in the disk of diameter
/// `side` centered at `(side / 2, side / 2)`.
fn region(side: f64) -> Vec<[f64; 2]> {
    let r = side / 2.0;
    (0..REGION_SIDES)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / REGION_SIDES as f64;
            [r + r * a.cos(), r + r * a.sin()]
        })
        .collect()
}

fn in_region(p: [f64; 2], side: f64) -> bool {
    let r = side / 2.0;
    // inscribed polygon's apothem keeps samples inside the clip polygon
    let apothem = r * (std::f64::consts::PI / REGION_SIDES as f64).cos();
    (p[0] - r).powi(2) + (p[1] - r).powi(2) <= apothem * apothem
}

/// Dart throwing in the region with a grid accelerator; the exclusion radius
/// shrinks until `n` points fit.
fn poisson_disk(n: usize, side: f64, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let mut radius = 0.75;
    loop {
        let cell = radius / std::f64::consts::SQRT_2;
        let gw = (side / cell).ceil() as usize + 1;
        let mut grid: Vec<Option<u32>> = vec![None; gw * gw];
        let mut pts: Vec<[f64; 2]> = Vec::with_capacity(n);
        let mut attempts = 0;
        while pts.len() < n && attempts < 60 * n {
            attempts += 1;
            let p = [rng.gen_range(0.0..side), rng.gen_range(0.0..side)];
            if !in_region(p, side) {
                continue;
            }
            let (gx, gy) = ((p[0] / cell) as usize, (p[1] / cell) as usize);
            let mut ok = true;
            'scan: for y in gy.saturating_sub(2)..(gy + 3).min(gw) {
                for x in gx.saturating_sub(2)..(gx + 3).min(gw) {
                    if let Some(q) = grid[y * gw + x] {
                        let q = pts[q as usize];
                        if (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2) < radius * radius {
                            ok = false;
                            break 'scan;
                        }
                    }
                }
            }
            if ok {
                grid[gy * gw + gx] = Some(pts.len() as u32);
                pts.push(p);
            }
        }
        if pts.len() == n {
            return pts;
        }
        radius *= 0.95;
    }
}

fn delaunay_faces(pts: &[[f64; 2]]) -> Result<Vec<[u32; 3]>, MediumError> {
    use spade::{DelaunayTriangulation, Point2, Triangulation};
    let mut t: DelaunayTriangulation<Point2<f64>> = DelaunayTriangulation::new();
    for (i, p) in pts.iter().enumerate() {
        let h = t
            .insert(Point2::new(p[0], p[1]))
            .map_err(|e| MediumError::Triangulation {
                attempts: 1,
                reason: format!("{e:?}"),
            })?;
        if h.index() != i {
            return Err(MediumError::Triangulation {
                attempts: 1,
                reason: format!("duplicate point {i}"),
            });
        }
    }
    let mut faces: Vec<[u32; 3]> = t
        .inner_faces()
        .map(|f| {
            let vs = f.vertices();
            let mut tri = [
                vs[0].fix().index() as u32,
                vs[1].fix().index() as u32,
                vs[2].fix().index() as u32,
            ];
            if orient2d(pts[tri[0] as usize], pts[tri[1] as usize], pts[tri[2] as usize]) < 0.0 {
                tri.swap(1, 2);
            }
            tri
        })
        .collect();
    faces.sort_by_key(|&t| sorted3(t));
    Ok(faces)
}

/// One Lloyd step: move each site to the centroid of its Voronoi cell clipped
/// to the region.
fn lloyd_step(pts: &[[f64; 2]], side: f64) -> Result<Vec<[f64; 2]>, MediumError> {
    let faces = delaunay_faces(pts)?;
    let mut nbrs: Vec<HashSet<u32>> = vec![HashSet::new(); pts.len()];
    for t in &faces {
        for k in 0..3 {
            nbrs[t[k] as usize].insert(t[(k + 1) % 3]);
            nbrs[t[(k + 1) % 3] as usize].insert(t[k]);
        }
    }
    Ok(pts
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let mut poly = region(side);
            let mut ns: Vec<u32> = nbrs[i].iter().copied().collect();
            ns.sort_unstable();
            for j in ns {
                poly = crate::geometry::clip_bisector(&poly, s, pts[j as usize]);
            }
            crate::geometry::centroid(&poly).unwrap_or(s)
        })
        .collect())
}

fn triangulate_closed(pts: &[[f64; 2]], side: f64, tile_seed: u64) -> Result<SimplicialMedium, MediumError> {
    let n = pts.len();
    let inner = delaunay_faces(pts)?;
    if inner.is_empty() {
        return Err(MediumError::Invalid("all points collinear".into()));
    }
    let (ring, outer_faces) = hull_closure(&inner, n as u32)?;
    let mut positions = pts.to_vec();
    positions.push([side * 0.5, -side * 0.5]);
    let ccw_faces: Vec<[u32; 3]> = inner.iter().chain(outer_faces.iter()).map(|&t| rotate_to_min(t)).collect();
    let asm = Assembly {
        topology: Topology::Bordered,
        positions,
        ccw_faces,
        border_ring: ring,
        outer: Some(n as u32),
        tile_seed,
    };
    let mut m = assemble(asm, |a, b| a.min(b), |_, nbrs| nbrs[0])?;
    m.tiles = assign_tiles(&m, tile_seed);
    Ok(m)
}

/// Hull ring (counter-clockwise) and the faces closing it onto `outer`.
fn hull_closure(inner: &[[u32; 3]], outer: u32) -> Result<(Vec<u32>, Vec<[u32; 3]>), MediumError> {
    let mut directed: HashSet<(u32, u32)> = HashSet::new();
    for t in inner {
        for k in 0..3 {
            directed.insert((t[k], t[(k + 1) % 3]));
        }
    }
    let mut hull_next: BTreeMap<u32, u32> = BTreeMap::new();
    for &(a, b) in &directed {
        if !directed.contains(&(b, a)) && hull_next.insert(a, b).is_some() {
            return Err(MediumError::Invalid(format!("hull pinches at vertex {a}")));
        }
    }
    let (&start, _) = hull_next
        .iter()
        .next()
        .ok_or_else(|| MediumError::Invalid("empty hull".into()))?;
    let mut ring = vec![start];
    let mut cur = hull_next[&start];
    while cur != start {
        ring.push(cur);
        cur = *hull_next
            .get(&cur)
            .ok_or_else(|| MediumError::Invalid("hull is not a cycle".into()))?;
        if ring.len() > hull_next.len() {
            return Err(MediumError::Invalid("hull is not a cycle".into()));
        }
    }
    if ring.len() != hull_next.len() {
        return Err(MediumError::Invalid("hull has several cycles".into()));
    }
    let m = ring.len();
    let faces = (0..m).map(|i| [ring[(i + 1) % m], ring[i], outer]).collect();
    Ok((ring, faces))
}

fn rebuild_bordered(doc: &MediumDoc) -> Result<SimplicialMedium, MediumError> {
    let pts = doc
        .points
        .as_ref()
        .ok_or_else(|| MediumError::Invalid("bordered medium needs points".into()))?;
    let outer = doc
        .outer
        .ok_or_else(|| MediumError::Invalid("bordered medium needs an outer vertex".into()))?;
    if outer as usize != pts.len() {
        return Err(MediumError::Invalid("outer vertex must follow the points".into()));
    }
    let inner: Vec<[u32; 3]> = doc
        .faces
        .iter()
        .filter(|f| !f.contains(&outer))
        .map(|f| {
            let mut t = [f[0], f[1], f[2]];
            if orient2d(pts[t[0] as usize], pts[t[1] as usize], pts[t[2] as usize]) < 0.0 {
                t.swap(1, 2);
            }
            t
        })
        .collect();
    let (ring, outer_faces) = hull_closure(&inner, outer)?;
    if ring.iter().copied().collect::<HashSet<_>>() != doc.border.iter().copied().collect::<HashSet<_>>() {
        return Err(MediumError::Invalid("border ring differs from the hull".into()));
    }
    let side = pts
        .iter()
        .fold(0.0f64, |acc, p| acc.max(p[0]).max(p[1]));
    let mut positions = pts.clone();
    positions.push([side * 0.5, -side * 0.5]);
    let ccw_faces = inner.iter().chain(outer_faces.iter()).map(|&t| rotate_to_min(t)).collect();
    let asm = Assembly {
        topology: Topology::Bordered,
        positions,
        ccw_faces,
        border_ring: ring,
        outer: Some(outer),
        tile_seed: doc.tile_seed,
    };
    let mut m = assemble(asm, |a, b| a.min(b), |_, nbrs| nbrs[0])?;
    m.tiles = assign_tiles(&m, doc.tile_seed);
    Ok(m)
}

/// Chooses the vertex responsible for each edge and face.
///
/// Hexagonal tori use the lattice directions (every tile owns 1 vertex,
/// 3 edges, 2 faces). Other media run a random tournament: simplexes are
/// visited in random order and go to the least loaded adjacent vertex.
pub fn assign_tiles(m: &SimplicialMedium, rng_seed: u64) -> TileMap {
    if m.kind() == MediumKind::Hexagonal && !m.tiles.owner[0].is_empty() {
        return m.tiles.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let nv = m.num_vertices();
    let mut load = vec![1usize; nv];
    let mut owner = [(0..nv as u32).collect::<Vec<_>>(), vec![0; m.num_edges()], vec![0; m.num_faces()]];
    let mut rank = [vec![0u32; nv], vec![0; m.num_edges()], vec![0; m.num_faces()]];
    let mut items: Vec<(Class, u32)> = (0..m.num_edges() as u32)
        .map(|e| (Class::E, e))
        .chain((0..m.num_faces() as u32).map(|f| (Class::F, f)))
        .collect();
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
    for (class, s) in items {
        let cands: Vec<u32> = match class {
            Class::E => m.edge_ends(s).to_vec(),
            Class::F => m.face_vertices(s).to_vec(),
            Class::V => unreachable!(),
        };
        let pool: Vec<u32> = {
            let real: Vec<u32> = cands.iter().copied().filter(|&v| Some(v) != m.outer).collect();
            if real.is_empty() {
                cands
            } else {
                real
            }
        };
        let best = pool.iter().map(|&v| load[v as usize]).min().unwrap();
        let ties: Vec<u32> = pool.into_iter().filter(|&v| load[v as usize] == best).collect();
        let v = ties[rng.gen_range(0..ties.len())];
        owner[class.index()][s as usize] = v;
        rank[class.index()][s as usize] = load[v as usize] as u32;
        load[v as usize] += 1;
    }
    TileMap {
        owner,
        local_rank: rank,
    }
}

/// JSON form of a medium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediumDoc {
    pub version: u32,
    pub topology: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer: Option<u32>,
    pub edges: Vec<[u32; 2]>,
    pub faces: Vec<Vec<u32>>,
    #[serde(default)]
    pub border: Vec<u32>,
    #[serde(default)]
    pub tile_seed: u64,
}

impl MediumDoc {
    pub const VERSION: u32 = 1;

    fn vertex_count(&self) -> usize {
        match self.topology.as_str() {
            "torus" => self.cols.unwrap_or(0) * self.rows.unwrap_or(0),
            _ => self.points.as_ref().map_or(0, |p| p.len()) + usize::from(self.outer.is_some()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub euler: bool,
    pub triangles: bool,
    pub pairing: bool,
    pub degree_histogram: BTreeMap<usize, usize>,
    pub failures: Vec<String>,
}

/// Structural checks on a medium document (no rotation system needed).
pub fn validate_doc(doc: &MediumDoc) -> ValidationReport {
    let mut failures = Vec::new();
    let nv = doc.vertex_count();
    let mut triangles = true;
    for f in &doc.faces {
        let distinct: HashSet<u32> = f.iter().copied().collect();
        if f.len() != 3 || distinct.len() != 3 {
            triangles = false;
            failures.push(format!("non-triangle face {f:?}"));
        } else if f.iter().any(|&v| v as usize >= nv) {
            triangles = false;
            failures.push(format!("face {f:?} references a missing vertex"));
        }
    }
    let edge_set: HashSet<[u32; 2]> = doc.edges.iter().map(|e| sorted2(e[0], e[1])).collect();
    if edge_set.len() != doc.edges.len() {
        failures.push("duplicate edges".into());
    }
    let mut degree = vec![0usize; nv];
    for e in &doc.edges {
        if e[0] as usize >= nv || e[1] as usize >= nv || e[0] == e[1] {
            failures.push(format!("bad edge {e:?}"));
            continue;
        }
        degree[e[0] as usize] += 1;
        degree[e[1] as usize] += 1;
    }
    if triangles {
        let mut uses: HashMap<[u32; 2], usize> = HashMap::new();
        for f in &doc.faces {
            for k in 0..3 {
                *uses.entry(sorted2(f[k], f[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        for (e, c) in &uses {
            if !edge_set.contains(e) {
                failures.push(format!("face edge {e:?} missing from the edge list"));
            } else if *c != 2 {
                failures.push(format!("edge {e:?} borders {c} faces, expected 2"));
            }
        }
        for e in &edge_set {
            if !uses.contains_key(e) {
                failures.push(format!("edge {e:?} borders no face"));
            }
        }
    }
    let (v, e, f) = (nv as i64, doc.edges.len() as i64, doc.faces.len() as i64);
    let euler = match doc.topology.as_str() {
        "torus" => v - e + f == 0 && e == 3 * v && f == 2 * v,
        _ => v - e + f == 2 && e == 3 * v - 6 && f == 2 * v - 4,
    };
    if !euler {
        failures.push(format!("Euler check failed: V={v} E={e} F={f}"));
    }
    let mut degree_histogram = BTreeMap::new();
    for d in degree {
        *degree_histogram.entry(d).or_insert(0) += 1;
    }
    ValidationReport {
        passed: failures.is_empty(),
        euler,
        triangles,
        pairing: true,
        degree_histogram,
        failures,
    }
}

/// Full validation of a built medium: document checks plus transfer pairing,
/// rotation inverses and border ring.
pub fn validate(m: &SimplicialMedium) -> ValidationReport {
    let mut r = validate_doc(&m.to_doc());
    let mut pairing = true;
    for locus in Locus::TRANSFER {
        let t = m.transfer(locus);
        let p = m.transfer(locus.partner().unwrap());
        let b = m.transfer(locus.brother().unwrap());
        for i in 0..t.len() {
            if p.partner[t.partner[i] as usize] as usize != i {
                pairing = false;
                r.failures.push(format!("{locus} point {i}: partner is not an involution"));
                break;
            }
            // ccw then cw (and cw then ccw) is the identity
            if b.cw_from[t.ccw_from[i] as usize] as usize != i || b.ccw_from[t.cw_from[i] as usize] as usize != i {
                pairing = false;
                r.failures.push(format!("{locus} point {i}: rotations are not inverse"));
                break;
            }
        }
    }
    if m.topology == Topology::Bordered {
        let ring: HashSet<u32> = m.border_ring.iter().copied().collect();
        let outer = m.outer.unwrap();
        let nbrs: HashSet<u32> = m.neighbors(outer).iter().copied().collect();
        if ring != nbrs || ring.len() != m.border_ring.len() {
            r.failures.push("border ring is not the link of the outer vertex".into());
        }
    }
    r.pairing = pairing;
    r.passed = r.failures.is_empty();
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_counts_and_degrees() {
        let m = SimplicialMedium::hex_torus(4, 4).unwrap();
        assert_eq!((m.num_vertices(), m.num_edges(), m.num_faces()), (16, 48, 32));
        let m = SimplicialMedium::hex_torus(3, 3).unwrap();
        assert!((0..9).all(|v| m.degree(v) == 6));
        assert!(validate(&m).passed, "{:?}", validate(&m).failures);
    }

    #[test]
    fn too_small_names_constraint() {
        let err = SimplicialMedium::hex_torus(2, 5).unwrap_err().to_string();
        assert!(err.contains("cols"), "{err}");
        let err = SimplicialMedium::hex_torus(5, 2).unwrap_err().to_string();
        assert!(err.contains("rows"), "{err}");
        assert!(SimplicialMedium::isotropic(9, 0, 0).is_err());
    }

    #[test]
    fn hex_tiles_are_uniform() {
        let m = SimplicialMedium::hex_torus(5, 4).unwrap();
        for load in m.tiles().loads(m.num_vertices()) {
            assert_eq!(load, [1, 3, 2]);
        }
    }

    #[test]
    fn hex_rotation_follows_lattice_directions() {
        let m = SimplicialMedium::hex_torus(6, 6).unwrap();
        let v = 2 * 6 + 3;
        let expect: Vec<u32> = HEX_DIRS
            .iter()
            .map(|&(di, dj)| ((2 + dj).rem_euclid(6) * 6 + (3 + di).rem_euclid(6)) as u32)
            .collect();
        assert_eq!(m.neighbors(v), &expect[..]);
        // embedding angles increase counter-clockwise
        let p = m.positions()[v as usize];
        let angles: Vec<f64> = m
            .neighbors(v)
            .iter()
            .map(|&w| {
                let q = m.unwrap_near(m.positions()[w as usize], p);
                (q[1] - p[1]).atan2(q[0] - p[0]).rem_euclid(std::f64::consts::TAU)
            })
            .collect();
        assert!(angles.windows(2).all(|w| w[0] < w[1]), "{angles:?}");
    }

    #[test]
    fn distances_between_simplex_classes() {
        let m = SimplicialMedium::hex_torus(6, 6).unwrap();
        let v = SimplexId::vertex(0);
        let e = SimplexId::edge(m.vertex_edges(0)[0]);
        let f = SimplexId::face(m.vertex_faces(0)[0]);
        let w = SimplexId::vertex(m.neighbors(0)[0]);
        assert_eq!(m.simplicial_distance(v, e), 1);
        assert_eq!(m.simplicial_distance(v, f), 1);
        assert_eq!(m.simplicial_distance(v, w), 2);
    }

    #[test]
    fn simplicial_distance_is_a_metric_on_small_media() {
        let m = SimplicialMedium::hex_torus(3, 4).unwrap();
        let n = m.num_simplexes();
        let all: Vec<Vec<u32>> = (0..n).map(|i| m.simplicial_bfs(m.simplex_at_flat(i))).collect();
        for a in 0..n {
            assert_eq!(all[a][a], 0);
            for b in 0..n {
                assert_eq!(all[a][b], all[b][a]);
                for c in (0..n).step_by(7) {
                    assert!(all[a][c] <= all[a][b] + all[b][c]);
                }
            }
        }
    }

    #[test]
    fn isotropic_small_is_valid() {
        let m = SimplicialMedium::isotropic(10, 1, 0).unwrap();
        let r = validate(&m);
        assert!(r.passed, "{:?}", r.failures);
        let (v, e, f) = (m.num_vertices() as i64, m.num_edges() as i64, m.num_faces() as i64);
        assert_eq!(v - e + f, 2);
    }

    #[test]
    fn quad_face_is_rejected() {
        let doc = MediumDoc {
            version: 1,
            topology: "bordered".into(),
            cols: None,
            rows: None,
            points: Some(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
            outer: None,
            edges: vec![[0, 1], [1, 2], [2, 3], [0, 3]],
            faces: vec![vec![0, 1, 2, 3]],
            border: vec![],
            tile_seed: 0,
        };
        let r = validate_doc(&doc);
        assert!(!r.passed);
        assert!(r.failures.iter().any(|f| f.contains("non-triangle face")));
    }

    #[test]
    fn json_round_trip() {
        let m = SimplicialMedium::hex_torus(4, 5).unwrap();
        let back = SimplicialMedium::from_json(&m.to_json()).unwrap();
        assert_eq!(back.to_json(), m.to_json());
        let m = SimplicialMedium::isotropic(40, 3, 2).unwrap();
        let back = SimplicialMedium::from_json(&m.to_json()).unwrap();
        assert_eq!(back.to_json(), m.to_json());
        assert_eq!(back.tiles(), m.tiles());
        for l in Locus::TRANSFER {
            assert_eq!(back.transfer(l).partner, m.transfer(l).partner);
        }
    }

    #[test]
    fn border_ring_is_the_hull_cycle() {
        let m = SimplicialMedium::isotropic(60, 5, 3).unwrap();
        let ring = m.border_ring();
        for i in 0..ring.len() {
            let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
            assert!(m.neighbors(a).contains(&b));
        }
        let o = m.outer_vertex().unwrap();
        assert_eq!(m.degree(o), ring.len());
    }
}
