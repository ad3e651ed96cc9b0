//! Lowering of operation-expressions to per-tile gate netlists.
//!
//! Expressions are hash-consed into a DAG (common subexpressions compiled
//! once), then lowered point by point into AND/OR/XOR/NOT gates. Broadcast,
//! transfer, rotation and symmetry are pure wiring. A negation of a gate
//! output is absorbed as an inverted wire; a negation of a register needs a
//! NOT gate. The "raw" model prices every negation as a gate.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::fields::{Elem, FieldType};
use crate::lang::{BinaryOp, Expr, ReduceOp, TypeContext, TypeError, UnaryOp};
use crate::locus::{Class, Locus};
use crate::medium::{MediumKind, SimplexId, SimplicialMedium};
use crate::runtime::CircuitDef;

pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Layer(String, FieldType),
    Const(u8, FieldType),
    Unary(UnaryOp),
    Binary(BinaryOp),
    Broadcast(Class),
    Transfer,
    Reduce(ReduceOp),
    RotateCw,
    RotateCcw,
    Symmetry,
}

/// Radius automaton state: vertex, perimeter/radial edge, perimeter/radial face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sub {
    Vertex,
    Ep,
    Fp,
    Er,
    Fr,
}

impl Sub {
    fn is_radial(self) -> bool {
        matches!(self, Sub::Er | Sub::Fr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RadiusState {
    pub radius: u32,
    pub sub: Sub,
}

impl RadiusState {
    fn start(class: Class) -> Self {
        let sub = match class {
            Class::V => Sub::Vertex,
            Class::E => Sub::Ep,
            Class::F => Sub::Fp,
        };
        RadiusState { radius: 0, sub }
    }

    /// State after a transfer into father class `to`.
    fn transfer(self, to: Class) -> Self {
        let r = self.radius;
        let (radius, sub) = match (self.sub, to) {
            (_, Class::V) => (r + 1, Sub::Vertex),
            (Sub::Vertex, Class::E) => (r + 1, Sub::Ep),
            (Sub::Vertex, Class::F) => (r + 1, Sub::Fp),
            (Sub::Ep, Class::F) => (r, Sub::Fr),
            (Sub::Fr, Class::E) => (r + 1, Sub::Ep),
            (Sub::Fp, Class::E) => (r + 1, Sub::Er),
            (Sub::Er, Class::F) => (r, Sub::Fp),
            (s, c) => unreachable!("transfer from {s:?} into its own class {c}"),
        };
        RadiusState { radius, sub }
    }

    fn join(a: Option<Self>, b: Option<Self>) -> Option<Self> {
        match (a, b) {
            (None, x) | (x, None) => x,
            (Some(a), Some(b)) => Some(if a.radius != b.radius {
                if a.radius > b.radius {
                    a
                } else {
                    b
                }
            } else if b.sub.is_radial() {
                b
            } else {
                a
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub kind: NodeKind,
    pub children: Vec<NodeId>,
    pub ty: FieldType,
    /// `None` for constant subexpressions.
    pub radius: Option<RadiusState>,
}

/// Hash-consed expression DAG.
#[derive(Debug, Clone)]
pub struct Dag {
    nodes: Vec<Node>,
    index: HashMap<(NodeKind, Vec<NodeId>), NodeId>,
    ctx: TypeContext,
}

impl Dag {
    pub fn new(ctx: TypeContext) -> Self {
        Dag {
            nodes: Vec::new(),
            index: HashMap::new(),
            ctx,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id as usize]
    }

    pub fn add(&mut self, e: &Expr) -> Result<NodeId, TypeError> {
        let (kind, kids): (NodeKind, Vec<&Arc<Expr>>) = match e {
            Expr::Layer(n, t) => (NodeKind::Layer(n.clone(), *t), vec![]),
            Expr::Const(v, t) => (NodeKind::Const(*v, *t), vec![]),
            Expr::Unary(op, a) => (NodeKind::Unary(*op), vec![a]),
            Expr::Binary(op, a, b) => (NodeKind::Binary(*op), vec![a, b]),
            Expr::Broadcast(c, a) => (NodeKind::Broadcast(*c), vec![a]),
            Expr::Transfer(a) => (NodeKind::Transfer, vec![a]),
            Expr::Reduce(op, a) => (NodeKind::Reduce(*op), vec![a]),
            Expr::RotateCw(a) => (NodeKind::RotateCw, vec![a]),
            Expr::RotateCcw(a) => (NodeKind::RotateCcw, vec![a]),
            Expr::Symmetry(a) => (NodeKind::Symmetry, vec![a]),
        };
        let mut children = kids.into_iter().map(|k| self.add(k)).collect::<Result<Vec<_>, _>>()?;
        if let NodeKind::Binary(op) = kind {
            if op.is_commutative() {
                children.sort_unstable();
            }
        }
        let key = (kind, children);
        if let Some(&id) = self.index.get(&key) {
            return Ok(id);
        }
        let (kind, children) = key;
        let ty = self.type_of(&kind, &children)?;
        let radius = self.radius_of_new(&kind, &children);
        let id = self.nodes.len() as NodeId;
        self.nodes.push(Node {
            kind: kind.clone(),
            children: children.clone(),
            ty,
            radius,
        });
        self.index.insert((kind, children), id);
        Ok(id)
    }

    /// Types a node by re-running the checker on placeholder children.
    fn type_of(&self, kind: &NodeKind, children: &[NodeId]) -> Result<FieldType, TypeError> {
        let ph = |i: usize| Arc::new(Expr::Layer(String::new(), self.nodes[children[i] as usize].ty));
        let e = match kind {
            NodeKind::Layer(n, t) => Expr::Layer(n.clone(), *t),
            NodeKind::Const(v, t) => Expr::Const(*v, *t),
            NodeKind::Unary(op) => Expr::Unary(*op, ph(0)),
            NodeKind::Binary(op) => Expr::Binary(*op, ph(0), ph(1)),
            NodeKind::Broadcast(c) => Expr::Broadcast(*c, ph(0)),
            NodeKind::Transfer => Expr::Transfer(ph(0)),
            NodeKind::Reduce(op) => Expr::Reduce(*op, ph(0)),
            NodeKind::RotateCw => Expr::RotateCw(ph(0)),
            NodeKind::RotateCcw => Expr::RotateCcw(ph(0)),
            NodeKind::Symmetry => Expr::Symmetry(ph(0)),
        };
        e.typecheck(&self.ctx)
    }

    fn radius_of_new(&self, kind: &NodeKind, children: &[NodeId]) -> Option<RadiusState> {
        let child = |i: usize| self.nodes[children[i] as usize].radius;
        match kind {
            NodeKind::Layer(_, t) => Some(RadiusState::start(t.locus.father())),
            NodeKind::Const(..) => None,
            NodeKind::Binary(_) => RadiusState::join(child(0), child(1)),
            NodeKind::Transfer => {
                let to = self.nodes[children[0] as usize].ty.locus.toward().unwrap();
                child(0).map(|s| s.transfer(to))
            }
            _ => child(0),
        }
    }
}

/// Radius of an expression: hop distance from its output to the layer
/// points it may depend on.
pub fn radius_of(e: &Expr) -> Result<u32, TypeError> {
    let mut dag = Dag::new(TypeContext::hex());
    let id = dag.add(e)?;
    Ok(dag.node(id).radius.map_or(0, |s| s.radius))
}

pub fn radius_state(e: &Expr) -> Result<Option<RadiusState>, TypeError> {
    let mut dag = Dag::new(TypeContext::hex());
    let id = dag.add(e)?;
    Ok(dag.node(id).radius)
}

// ---- netlist ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signal {
    Const(bool),
    Net { id: u32, inv: bool },
}

impl Signal {
    fn net(id: u32) -> Self {
        Signal::Net { id, inv: false }
    }

    #[inline]
    pub fn eval(self, nets: &[bool]) -> bool {
        match self {
            Signal::Const(c) => c,
            Signal::Net { id, inv } => nets[id as usize] ^ inv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateOp {
    And,
    Or,
    Xor,
    Not,
}

/// Position of a gate inside its tile, identical for corresponding gates of
/// every tile of a hexagonal torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GateKey {
    pub group: u32,
    pub rank: u32,
    pub seq: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gate {
    pub op: GateOp,
    pub a: Signal,
    /// Unused by NOT.
    pub b: Signal,
    pub tile: u32,
    pub key: GateKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    Register { layer: u16, point: u32, bit: u8 },
    Gate(u32),
}

#[derive(Debug, Clone, Default)]
pub struct Netlist {
    pub drivers: Vec<Driver>,
    /// Topologically ordered.
    pub gates: Vec<Gate>,
    /// Output net of each gate.
    pub gate_net: Vec<u32>,
    /// `registers[layer][point * width + bit]` net id.
    pub registers: Vec<Vec<u32>>,
}

impl Netlist {
    /// Evaluates every net given register values (`regs[layer][point * width + bit]`).
    pub fn eval_nets(&self, regs: &[Vec<bool>]) -> Vec<bool> {
        let mut nets = vec![false; self.drivers.len()];
        for (l, ids) in self.registers.iter().enumerate() {
            for (k, &id) in ids.iter().enumerate() {
                nets[id as usize] = regs[l][k];
            }
        }
        for (g, &out) in self.gates.iter().zip(&self.gate_net) {
            let a = g.a.eval(&nets);
            nets[out as usize] = match g.op {
                GateOp::And => a & g.b.eval(&nets),
                GateOp::Or => a | g.b.eval(&nets),
                GateOp::Xor => a ^ g.b.eval(&nets),
                GateOp::Not => !a,
            };
        }
        nets
    }

    fn driver_tile(&self, net: u32, reg_owner: &dyn Fn(u16, u32) -> u32) -> u32 {
        match self.drivers[net as usize] {
            Driver::Register { layer, point, .. } => reg_owner(layer, point),
            Driver::Gate(g) => self.gates[g as usize].tile,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CompileError {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("circuit: {0}")]
    Circuit(String),
}

/// Builds gates point by point.
struct Lowering<'m> {
    m: &'m SimplicialMedium,
    fuse: bool,
    net: Netlist,
    layer_types: Vec<(String, FieldType)>,
    values: HashMap<NodeId, Vec<Signal>>,
    not_cache: HashMap<u32, Signal>,
    tile: u32,
    key: GateKey,
    not_group: u32,
}

impl<'m> Lowering<'m> {
    fn new(m: &'m SimplicialMedium, fuse: bool) -> Self {
        Lowering {
            m,
            fuse,
            net: Netlist::default(),
            layer_types: Vec::new(),
            values: HashMap::new(),
            not_cache: HashMap::new(),
            tile: 0,
            key: GateKey {
                group: 0,
                rank: 0,
                seq: 0,
            },
            not_group: 0,
        }
    }

    fn layer_index(&mut self, name: &str, ty: FieldType) -> Result<usize, CompileError> {
        if let Some(i) = self.layer_types.iter().position(|(n, _)| n == name) {
            if self.layer_types[i].1 != ty {
                return Err(CompileError::Circuit(format!(
                    "layer `{name}` read as {ty} but declared {}",
                    self.layer_types[i].1
                )));
            }
            return Ok(i);
        }
        let w = ty.width() as usize;
        let n = self.m.locus_len(ty.locus);
        let l = self.layer_types.len() as u16;
        let mut ids = Vec::with_capacity(n * w);
        for p in 0..n {
            for b in 0..w {
                ids.push(self.net.drivers.len() as u32);
                self.net.drivers.push(Driver::Register {
                    layer: l,
                    point: p as u32,
                    bit: b as u8,
                });
            }
        }
        self.net.registers.push(ids);
        self.layer_types.push((name.to_string(), ty));
        Ok(self.layer_types.len() - 1)
    }

    fn reg_owner(&self, layer: u16, point: u32) -> u32 {
        self.m.point_owner(self.layer_types[layer as usize].1.locus, point)
    }

    fn emit(&mut self, op: GateOp, a: Signal, b: Signal, tile: u32, key: GateKey) -> Signal {
        let id = self.net.drivers.len() as u32;
        self.net.drivers.push(Driver::Gate(self.net.gates.len() as u32));
        self.net.gates.push(Gate { op, a, b, tile, key });
        self.net.gate_net.push(id);
        Signal::net(id)
    }

    fn gate(&mut self, op: GateOp, a: Signal, b: Signal) -> Signal {
        use Signal::Const;
        let folded = match (op, a, b) {
            (GateOp::And, Const(false), _) | (GateOp::And, _, Const(false)) => Some(Const(false)),
            (GateOp::And, Const(true), x) | (GateOp::And, x, Const(true)) => Some(x),
            (GateOp::Or, Const(true), _) | (GateOp::Or, _, Const(true)) => Some(Const(true)),
            (GateOp::Or, Const(false), x) | (GateOp::Or, x, Const(false)) => Some(x),
            (GateOp::Xor, Const(false), x) | (GateOp::Xor, x, Const(false)) => Some(x),
            (GateOp::Xor, Const(true), x) | (GateOp::Xor, x, Const(true)) => Some(self.invert(x)),
            _ => None,
        };
        if let Some(s) = folded {
            return s;
        }
        let key = self.key;
        self.key.seq += 1;
        self.emit(op, a, b, self.tile, key)
    }

    fn invert(&mut self, s: Signal) -> Signal {
        let Signal::Net { id, inv } = s else {
            let Signal::Const(c) = s else { unreachable!() };
            return Signal::Const(!c);
        };
        let driver = self.net.drivers[id as usize];
        if self.fuse && matches!(driver, Driver::Gate(_)) {
            return Signal::Net { id, inv: !inv };
        }
        if let Some(&n) = self.not_cache.get(&id) {
            return if inv { Signal::net(id) } else { n };
        }
        if inv {
            return Signal::net(id);
        }
        let (tile, key) = match driver {
            Driver::Register { layer, point, bit } => {
                let ty = self.layer_types[layer as usize].1;
                let father = if ty.locus.is_simplicial() {
                    point
                } else {
                    self.m.transfer(ty.locus).father[point as usize]
                };
                let rank = self.m.tiles().local_rank[ty.locus.father().index()][father as usize];
                (
                    self.reg_owner(layer, point),
                    GateKey {
                        group: self.not_group,
                        rank: rank * 64 + (point - self.first_point(ty.locus, father)),
                        seq: layer as u32 * 8 + bit as u32,
                    },
                )
            }
            Driver::Gate(_) => {
                let key = self.key;
                self.key.seq += 1;
                (self.tile, key)
            }
        };
        let n = self.emit(GateOp::Not, Signal::net(id), Signal::Const(false), tile, key);
        self.not_cache.insert(id, n);
        n
    }

    fn first_point(&self, locus: Locus, father: u32) -> u32 {
        if locus.is_simplicial() {
            father
        } else {
            self.m.transfer(locus).offsets[father as usize]
        }
    }

    fn and(&mut self, a: Signal, b: Signal) -> Signal {
        self.gate(GateOp::And, a, b)
    }
    fn or(&mut self, a: Signal, b: Signal) -> Signal {
        self.gate(GateOp::Or, a, b)
    }
    fn xor(&mut self, a: Signal, b: Signal) -> Signal {
        self.gate(GateOp::Xor, a, b)
    }

    fn full_adder(&mut self, a: Signal, b: Signal, c: Signal) -> (Signal, Signal) {
        let ab = self.xor(a, b);
        let s = self.xor(ab, c);
        let g = self.and(a, b);
        let p = self.and(ab, c);
        let carry = self.or(g, p);
        (s, carry)
    }

    fn half_adder(&mut self, a: Signal, b: Signal) -> (Signal, Signal) {
        (self.xor(a, b), self.and(a, b))
    }

    /// Column compression of a multi-operand sum; returns `width` bits.
    fn sum(&mut self, operands: &[Vec<Signal>], width: usize) -> Vec<Signal> {
        let mut cols: Vec<std::collections::VecDeque<Signal>> = vec![Default::default(); width + 8];
        for op in operands {
            for (b, &s) in op.iter().enumerate() {
                cols[b].push_back(s);
            }
        }
        let mut out = Vec::with_capacity(width);
        for k in 0..width {
            while cols[k].len() >= 3 {
                let (a, b, c) = (
                    cols[k].pop_front().unwrap(),
                    cols[k].pop_front().unwrap(),
                    cols[k].pop_front().unwrap(),
                );
                let (s, carry) = self.full_adder(a, b, c);
                cols[k].push_back(s);
                cols[k + 1].push_back(carry);
            }
            if cols[k].len() == 2 {
                let (a, b) = (cols[k].pop_front().unwrap(), cols[k].pop_front().unwrap());
                let (s, carry) = self.half_adder(a, b);
                cols[k].push_back(s);
                cols[k + 1].push_back(carry);
            }
            out.push(cols[k].pop_front().unwrap_or(Signal::Const(false)));
        }
        out
    }

    /// `a >= b` over unsigned bit vectors (LSB first).
    fn ge(&mut self, a: &[Signal], b: &[Signal]) -> Signal {
        let mut ge = Signal::Const(true);
        for (&ai, &bi) in a.iter().zip(b) {
            let nb = self.invert(bi);
            let gt = self.and(ai, nb);
            let d = self.xor(ai, bi);
            let eq = self.invert(d);
            let keep = self.and(eq, ge);
            ge = self.or(gt, keep);
        }
        ge
    }

    fn ge_const(&mut self, bits: &[Signal], k: u32) -> Signal {
        let n = bits.len();
        if k == 0 {
            return Signal::Const(true);
        }
        if n == 0 || k >= 1 << n {
            return Signal::Const(false);
        }
        let top = bits[n - 1];
        let half = 1u32 << (n - 1);
        if k >= half {
            let rest = self.ge_const(&bits[..n - 1], k - half);
            self.and(top, rest)
        } else {
            let rest = self.ge_const(&bits[..n - 1], k);
            self.or(top, rest)
        }
    }

    fn mux(&mut self, sel: Signal, a: &[Signal], b: &[Signal]) -> Vec<Signal> {
        let nsel = self.invert(sel);
        a.iter()
            .zip(b)
            .map(|(&x, &y)| {
                let l = self.and(sel, x);
                let r = self.and(nsel, y);
                self.or(l, r)
            })
            .collect()
    }

    fn binop(&mut self, op: BinaryOp, a: &[Signal], b: &[Signal]) -> Vec<Signal> {
        match op {
            BinaryOp::And => a.iter().zip(b).map(|(&x, &y)| self.and(x, y)).collect(),
            BinaryOp::Or => a.iter().zip(b).map(|(&x, &y)| self.or(x, y)).collect(),
            BinaryOp::Xor => a.iter().zip(b).map(|(&x, &y)| self.xor(x, y)).collect(),
            BinaryOp::Add => {
                let mut carry = Signal::Const(false);
                let mut out = Vec::with_capacity(a.len());
                for (&x, &y) in a.iter().zip(b) {
                    let (s, c) = self.full_adder(x, y, carry);
                    out.push(s);
                    carry = c;
                }
                out
            }
            BinaryOp::Min => {
                let ge = self.ge(a, b);
                self.mux(ge, b, a)
            }
            BinaryOp::Max => {
                let ge = self.ge(a, b);
                self.mux(ge, a, b)
            }
            BinaryOp::Ge => vec![self.ge(a, b)],
        }
    }

    fn point_rank(&self, locus: Locus, p: u32) -> (u32, u32) {
        let father_class = locus.father();
        let (father, slot) = if locus.is_simplicial() {
            (p, 0)
        } else {
            let t = self.m.transfer(locus);
            (t.father[p as usize], t.slot[p as usize])
        };
        let tiles = self.m.tiles();
        (
            tiles.owner[father_class.index()][father as usize],
            tiles.local_rank[father_class.index()][father as usize] * 64 + slot,
        )
    }

    fn lower(&mut self, dag: &Dag, id: NodeId) -> Result<(), CompileError> {
        if self.values.contains_key(&id) {
            return Ok(());
        }
        let node = dag.node(id).clone();
        for &c in &node.children {
            self.lower(dag, c)?;
        }
        let ty = node.ty;
        let w = ty.width() as usize;
        let n = self.m.locus_len(ty.locus);
        let child = |k: usize| node.children[k];
        let cw = |k: usize| dag.node(node.children[k]).ty.width() as usize;
        self.not_group = 2 * id;
        let mut out: Vec<Signal> = Vec::with_capacity(n * w);
        match &node.kind {
            NodeKind::Layer(name, lty) => {
                let l = self.layer_index(name, *lty)?;
                out = self.net.registers[l].iter().map(|&id| Signal::net(id)).collect();
            }
            NodeKind::Const(v, _) => {
                for _ in 0..n {
                    out.extend((0..w).map(|b| Signal::Const((v >> b) & 1 == 1)));
                }
            }
            NodeKind::Broadcast(_) => {
                let src = &self.values[&child(0)];
                let t = self.m.transfer(ty.locus);
                for p in 0..n {
                    let f = t.father[p] as usize;
                    out.extend_from_slice(&src[f * w..(f + 1) * w]);
                }
            }
            NodeKind::Transfer | NodeKind::RotateCw | NodeKind::RotateCcw | NodeKind::Symmetry => {
                let src = &self.values[&child(0)];
                let src_locus = dag.node(child(0)).ty.locus;
                let t = self.m.transfer(src_locus);
                let table: &[u32] = match node.kind {
                    NodeKind::Transfer => &t.partner,
                    // tables live on the destination locus
                    NodeKind::RotateCw => &self.m.transfer(ty.locus).cw_from,
                    NodeKind::RotateCcw => &self.m.transfer(ty.locus).ccw_from,
                    _ => self.m.transfer(ty.locus).sym_from.as_deref().ok_or_else(|| {
                        CompileError::Type(TypeError::SymmetryUndefined(ty))
                    })?,
                };
                if matches!(node.kind, NodeKind::Transfer) {
                    // partner table maps source points to destination points
                    out = vec![Signal::Const(false); n * w];
                    for (sp, &dp) in table.iter().enumerate() {
                        let dp = dp as usize;
                        out[dp * w..(dp + 1) * w].copy_from_slice(&src[sp * w..(sp + 1) * w]);
                    }
                } else {
                    for &sp in table.iter().take(n) {
                        let sp = sp as usize;
                        out.extend_from_slice(&src[sp * w..(sp + 1) * w]);
                    }
                }
            }
            NodeKind::Unary(op) => {
                let cwid = cw(0);
                let src = self.values[&child(0)].clone();
                for p in 0..n {
                    let (tile, rank) = self.point_rank(ty.locus, p as u32);
                    self.begin_point(id, tile, rank);
                    let bits = &src[p * cwid..(p + 1) * cwid];
                    match op {
                        UnaryOp::Not => out.push(self.invert(bits[0])),
                        UnaryOp::GeConst(k) => out.push(self.ge_const(bits, *k as u32)),
                        UnaryOp::EqConst(k) => {
                            let mut acc = Signal::Const(true);
                            if (*k as u32) >= 1 << cwid {
                                acc = Signal::Const(false);
                            } else {
                                for (b, &s) in bits.iter().enumerate() {
                                    let lit = if (k >> b) & 1 == 1 { s } else { self.invert(s) };
                                    acc = self.and(acc, lit);
                                }
                            }
                            out.push(acc);
                        }
                        UnaryOp::Shr(k) => {
                            let k = *k as usize;
                            out.extend((0..w).map(|b| bits.get(b + k).copied().unwrap_or(Signal::Const(false))));
                        }
                    }
                }
            }
            NodeKind::Binary(op) => {
                let cwid = cw(0);
                let a = self.values[&child(0)].clone();
                let b = self.values[&child(1)].clone();
                for p in 0..n {
                    let (tile, rank) = self.point_rank(ty.locus, p as u32);
                    self.begin_point(id, tile, rank);
                    let r = self.binop(*op, &a[p * cwid..(p + 1) * cwid], &b[p * cwid..(p + 1) * cwid]);
                    out.extend(r);
                }
            }
            NodeKind::Reduce(op) => {
                let cwid = cw(0);
                let src = self.values[&child(0)].clone();
                let t = self.m.transfer(dag.node(child(0)).ty.locus);
                let bool_in = dag.node(child(0)).ty.elem == Elem::Bool;
                for p in 0..n {
                    let (tile, rank) = self.point_rank(ty.locus, p as u32);
                    self.begin_point(id, tile, rank);
                    let slots: Vec<&[Signal]> = t
                        .points_of(p as u32)
                        .map(|q| &src[q * cwid..(q + 1) * cwid])
                        .collect();
                    let r: Vec<Signal> = match op {
                        ReduceOp::Plus => {
                            let ops: Vec<Vec<Signal>> = slots.iter().map(|s| s.to_vec()).collect();
                            self.sum(&ops, w)
                        }
                        _ => {
                            let bop = match (op, bool_in) {
                                (ReduceOp::And, _) | (ReduceOp::Min, true) => BinaryOp::And,
                                (ReduceOp::Or, _) | (ReduceOp::Max, true) => BinaryOp::Or,
                                (ReduceOp::Xor, _) => BinaryOp::Xor,
                                (ReduceOp::Min, false) => BinaryOp::Min,
                                (ReduceOp::Max, false) => BinaryOp::Max,
                                (ReduceOp::Plus, _) => unreachable!(),
                            };
                            let mut acc = slots[0].to_vec();
                            for s in &slots[1..] {
                                acc = self.binop(bop, &acc, s);
                            }
                            acc
                        }
                    };
                    out.extend(r);
                }
            }
        }
        debug_assert_eq!(out.len(), n * w, "{:?}", node.kind);
        self.values.insert(id, out);
        Ok(())
    }

    fn begin_point(&mut self, node: NodeId, tile: u32, rank: u32) {
        self.tile = tile;
        self.key = GateKey {
            group: 2 * node + 1,
            rank,
            seq: 0,
        };
    }
}

/// A circuit lowered onto one medium.
#[derive(Debug, Clone)]
pub struct CompiledCircuit {
    pub dag: Dag,
    pub netlist: Netlist,
    pub layers: Vec<(String, FieldType)>,
    /// Root DAG node of each update (or expression).
    pub roots: Vec<NodeId>,
    /// `outputs[i][point * width + bit]`: signal computing root `i`.
    pub outputs: Vec<Vec<Signal>>,
    pub output_types: Vec<FieldType>,
    pub fused: bool,
    num_tiles: usize,
}

fn lower_all<'m>(
    m: &'m SimplicialMedium,
    exprs: &[Expr],
    declared: &[(String, FieldType)],
    fuse: bool,
) -> Result<(CompiledCircuit, Lowering<'m>), CompileError> {
    let mut dag = Dag::new(TypeContext::of(m));
    let roots = exprs.iter().map(|e| dag.add(e)).collect::<Result<Vec<_>, _>>()?;
    let mut low = Lowering::new(m, fuse);
    for (n, t) in declared {
        low.layer_index(n, *t)?;
    }
    for &r in &roots {
        low.lower(&dag, r)?;
    }
    let outputs = roots.iter().map(|r| low.values[r].clone()).collect();
    let output_types = roots.iter().map(|&r| dag.node(r).ty).collect();
    let cc = CompiledCircuit {
        dag,
        netlist: low.net.clone(),
        layers: low.layer_types.clone(),
        roots,
        outputs,
        output_types,
        fused: fuse,
        num_tiles: m.num_vertices(),
    };
    Ok((cc, low))
}

/// Compiles a circuit definition (one output per layer update).
pub fn compile(def: &CircuitDef, m: &SimplicialMedium) -> Result<CompiledCircuit, CompileError> {
    def.validate(&TypeContext::of(m)).map_err(CompileError::Circuit)?;
    let declared: Vec<(String, FieldType)> = def.layers.iter().map(|l| (l.name.clone(), l.ty)).collect();
    Ok(lower_all(m, &def.updates, &declared, true)?.0)
}

/// Compiles standalone expressions; their layers are their free variables.
pub fn compile_exprs(exprs: &[Expr], m: &SimplicialMedium, fuse: bool) -> Result<CompiledCircuit, CompileError> {
    Ok(lower_all(m, exprs, &[], fuse)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateCount {
    pub per_tile: f64,
    pub total: usize,
}

impl GateCount {
    fn new(total: usize, tiles: usize) -> Self {
        GateCount {
            per_tile: total as f64 / tiles as f64,
            total,
        }
    }
}

/// Fused gate count of an expression.
pub fn gate_count(e: &Expr, m: &SimplicialMedium) -> Result<GateCount, CompileError> {
    let c = compile_exprs(std::slice::from_ref(e), m, true)?;
    Ok(GateCount::new(c.netlist.gates.len(), m.num_vertices()))
}

/// Gate count with every negation priced as gates.
pub fn gate_count_raw(e: &Expr, m: &SimplicialMedium) -> Result<GateCount, CompileError> {
    let c = compile_exprs(std::slice::from_ref(e), m, false)?;
    Ok(GateCount::new(c.netlist.gates.len(), m.num_vertices()))
}

/// Extra gates needed for `e` when the `available` fields are already computed.
pub fn gate_count_given(e: &Expr, available: &[Expr], m: &SimplicialMedium) -> Result<GateCount, CompileError> {
    let base = compile_exprs(available, m, true)?.netlist.gates.len();
    let mut all = available.to_vec();
    all.push(e.clone());
    let with = compile_exprs(&all, m, true)?.netlist.gates.len();
    Ok(GateCount::new(with - base, m.num_vertices()))
}

/// Gate evaluations one tile performs per step, as a cellular circuit and as
/// a cellular automaton that must rebuild every intermediate field over the
/// ball it depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorkEstimate {
    pub radius: u32,
    pub circuit: f64,
    pub reexpansion: f64,
}

/// Work estimate for the tile of vertex 0. The medium should be large enough
/// that balls of the expression's radius do not wrap.
pub fn work_estimate(e: &Expr, m: &SimplicialMedium) -> Result<WorkEstimate, CompileError> {
    let c = compile_exprs(std::slice::from_ref(e), m, true)?;
    let nodes = c.dag.nodes();
    let mut gates_of = vec![0usize; nodes.len()];
    for g in &c.netlist.gates {
        gates_of[(g.key.group / 2) as usize] += 1;
    }
    let total_radius = nodes[c.roots[0] as usize].radius.map_or(0, |s| s.radius);
    let dist = m.simplicial_bfs(SimplexId::vertex(0));
    let mut reexpansion = 0.0;
    for (id, node) in nodes.iter().enumerate() {
        if gates_of[id] == 0 {
            continue;
        }
        let locus = node.ty.locus;
        let per_point = gates_of[id] as f64 / m.locus_len(locus) as f64;
        let reach = total_radius - node.radius.map_or(0, |s| s.radius);
        let t = (!locus.is_simplicial()).then(|| m.transfer(locus));
        let within = (0..m.locus_len(locus) as u32)
            .filter(|&p| {
                let s = match t {
                    Some(t) => SimplexId::new(locus.father(), t.father[p as usize]),
                    None => SimplexId::new(locus.father(), p),
                };
                dist[m.flat_index(s)] <= reach
            })
            .count();
        reexpansion += per_point * within as f64;
    }
    Ok(WorkEstimate {
        radius: total_radius,
        circuit: c.gates_per_tile(),
        reexpansion,
    })
}

impl CompiledCircuit {
    pub fn num_tiles(&self) -> usize {
        self.num_tiles
    }

    pub fn gates_per_tile(&self) -> f64 {
        self.netlist.gates.len() as f64 / self.num_tiles as f64
    }

    pub fn tile_gate_counts(&self) -> Vec<usize> {
        let mut c = vec![0usize; self.num_tiles];
        for g in &self.netlist.gates {
            c[g.tile as usize] += 1;
        }
        c
    }

    pub fn radius(&self) -> u32 {
        self.roots
            .iter()
            .filter_map(|&r| self.dag.node(r).radius)
            .map(|s| s.radius)
            .max()
            .unwrap_or(0)
    }

    /// Wires crossing tiles: distinct (driver net, consumer tile) pairs with a
    /// different driver tile, divided by the number of tiles.
    pub fn transwires_per_tile(&self, m: &SimplicialMedium) -> f64 {
        let reg_owner = |layer: u16, point: u32| m.point_owner(self.layers[layer as usize].1.locus, point);
        let mut pairs: HashSet<(u32, u32)> = HashSet::new();
        let consume = |s: Signal, tile: u32, pairs: &mut HashSet<(u32, u32)>| {
            if let Signal::Net { id, .. } = s {
                if self.netlist.driver_tile(id, &reg_owner) != tile {
                    pairs.insert((id, tile));
                }
            }
        };
        for g in &self.netlist.gates {
            consume(g.a, g.tile, &mut pairs);
            if g.op != GateOp::Not {
                consume(g.b, g.tile, &mut pairs);
            }
        }
        for (out, ty) in self.outputs.iter().zip(&self.output_types) {
            let w = ty.width() as usize;
            for (k, &s) in out.iter().enumerate() {
                consume(s, m.point_owner(ty.locus, (k / w) as u32), &mut pairs);
            }
        }
        pairs.len() as f64 / self.num_tiles as f64
    }

    pub fn report(&self, m: &SimplicialMedium) -> CompileReport {
        let counts = self.tile_gate_counts();
        CompileReport {
            gates_per_tile: self.gates_per_tile(),
            gates_total: self.netlist.gates.len(),
            uniform_tiles: counts.windows(2).all(|w| w[0] == w[1]),
            radius: self.radius(),
            transwires_per_tile: self.transwires_per_tile(m),
            layers: self
                .roots
                .iter()
                .enumerate()
                .map(|(i, &r)| LayerReport {
                    name: self.layers.get(i).map(|l| l.0.clone()).unwrap_or_else(|| format!("out{i}")),
                    ty: self.output_types[i].to_string(),
                    radius: self.dag.node(r).radius.map_or(0, |s| s.radius),
                })
                .collect(),
            medium: match m.kind() {
                MediumKind::Hexagonal => "hexagonal".into(),
                MediumKind::Isotropic => "isotropic".into(),
            },
            tiles: self.num_tiles,
        }
    }

    /// Topologically sorted gate list of one tile.
    pub fn netlist_dump(&self, tile: u32) -> Vec<NetlistEntry> {
        let show = |s: Signal| match s {
            Signal::Const(c) => format!("{}", c as u8),
            Signal::Net { id, inv } => format!("{}n{id}", if inv { "!" } else { "" }),
        };
        self.netlist
            .gates
            .iter()
            .zip(&self.netlist.gate_net)
            .filter(|(g, _)| g.tile == tile)
            .map(|(g, &out)| NetlistEntry {
                out: format!("n{out}"),
                op: g.op,
                inputs: if g.op == GateOp::Not {
                    vec![show(g.a)]
                } else {
                    vec![show(g.a), show(g.b)]
                },
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub radius: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileReport {
    pub gates_per_tile: f64,
    pub gates_total: usize,
    pub uniform_tiles: bool,
    pub radius: u32,
    pub transwires_per_tile: f64,
    pub layers: Vec<LayerReport>,
    pub medium: String,
    pub tiles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetlistEntry {
    pub out: String,
    pub op: GateOp,
    pub inputs: Vec<String>,
}

/// The fixed network deciding `Σ inputs ≥ 4` by column compression.
#[derive(Debug, Clone)]
pub struct ThresholdNetwork {
    netlist: Netlist,
    output: Signal,
    inputs: usize,
}

impl ThresholdNetwork {
    pub fn new(inputs: usize) -> Self {
        let m = SimplicialMedium::hex_torus(3, 3).expect("3x3 torus");
        let mut low = Lowering::new(&m, true);
        let regs: Vec<u32> = (0..inputs)
            .map(|p| {
                let id = low.net.drivers.len() as u32;
                low.net.drivers.push(Driver::Register {
                    layer: 0,
                    point: p as u32,
                    bit: 0,
                });
                id
            })
            .collect();
        low.net.registers.push(regs.clone());
        let operands: Vec<Vec<Signal>> = regs.iter().map(|&r| vec![Signal::net(r)]).collect();
        let width = crate::lang::plus_width(1, inputs) as usize;
        let sum = low.sum(&operands, width);
        let output = low.ge_const(&sum, 4);
        ThresholdNetwork {
            netlist: low.net,
            output,
            inputs,
        }
    }

    pub fn gate_count(&self) -> usize {
        self.netlist.gates.len()
    }

    pub fn eval(&self, inputs: &[bool]) -> bool {
        assert_eq!(inputs.len(), self.inputs);
        let nets = self.netlist.eval_nets(&[inputs.to_vec()]);
        self.output.eval(&nets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blobs::*;
    use crate::lang::*;

    fn hex() -> SimplicialMedium {
        SimplicialMedium::hex_torus(6, 6).unwrap()
    }

    fn per_tile(e: &Expr) -> f64 {
        gate_count(e, &hex()).unwrap().per_tile
    }

    #[test]
    fn reduction_densities() {
        let x = var("x");
        assert_eq!(per_tile(&exists(Class::V, layer("e", FieldType::bool(Locus::E)))), 5.0);
        assert_eq!(per_tile(&exists(Class::E, x.clone())), 3.0);
        assert_eq!(per_tile(&exists(Class::F, x)), 4.0);
    }

    #[test]
    fn cse_shares_subterms() {
        let x = var("x");
        let e = and(frontier_e(&x), frontier_e(&x));
        assert_eq!(per_tile(&e), 6.0);
        let mut dag = Dag::new(TypeContext::hex());
        let a = dag.add(&and(var("x"), var("y"))).unwrap();
        let b = dag.add(&and(var("y"), var("x"))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn raw_model_prices_every_negation() {
        let x = var("x");
        let e = not(frontier_e(&x));
        let m = hex();
        assert_eq!(gate_count(&e, &m).unwrap().per_tile, 3.0);
        assert_eq!(gate_count_raw(&e, &m).unwrap().per_tile, 6.0);
    }

    #[test]
    fn threshold_network_is_exact() {
        let t = ThresholdNetwork::new(6);
        assert_eq!(t.gate_count(), 17);
        for v in 0u32..64 {
            let bits: Vec<bool> = (0..6).map(|i| (v >> i) & 1 == 1).collect();
            assert_eq!(t.eval(&bits), v.count_ones() >= 4, "{v:06b}");
        }
        let t7 = ThresholdNetwork::new(7);
        for v in 0u32..128 {
            let bits: Vec<bool> = (0..7).map(|i| (v >> i) & 1 == 1).collect();
            assert_eq!(t7.eval(&bits), v.count_ones() >= 4);
        }
    }

    #[test]
    fn radius_automaton() {
        let x = var("x");
        assert_eq!(radius_of(&frontier_e(&x)).unwrap(), 1);
        assert_eq!(radius_of(&neighborhood(&x)).unwrap(), 2);
        assert_eq!(radius_of(&rhombus_all(&x)).unwrap(), 2);
        assert_eq!(radius_of(&meet_e(&x)).unwrap(), 3);
        assert_eq!(radius_of(&Expr::Const(1, FieldType::bool_v())).unwrap(), 0);
    }

    #[test]
    fn hex_tiles_identical() {
        let m = hex();
        let c = compile_exprs(&[vd_update(&var("x"))], &m, true).unwrap();
        let counts = c.tile_gate_counts();
        assert!(counts.iter().all(|&k| k == counts[0]));
        assert_eq!(counts[0] * m.num_vertices(), c.netlist.gates.len());
    }
}
