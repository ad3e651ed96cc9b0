//! Execution of cellular circuits: a reference interpreter, a gate-level
//! simulator and a row-pipelined bit-parallel engine for 64-column tori.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::compiler::{compile, CompileError, CompiledCircuit, Driver, GateKey, GateOp, Signal};
use crate::fields::{Field, FieldType};
use crate::lang::{BinaryOp, Expr, ReduceOp, TypeContext, UnaryOp};
use crate::locus::Locus;
use crate::medium::{SimplicialMedium, Topology};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerDef {
    pub name: String,
    pub ty: FieldType,
}

/// Layers and one update per layer, all evaluated on the previous configuration.
#[derive(Debug, Clone)]
pub struct CircuitDef {
    pub layers: Vec<LayerDef>,
    pub updates: Vec<Expr>,
}

impl CircuitDef {
    pub fn new(layers: Vec<LayerDef>, updates: Vec<Expr>) -> Self {
        CircuitDef { layers, updates }
    }

    /// One boolV layer `name` updated by `update`.
    pub fn single(name: &str, update: Expr) -> Self {
        CircuitDef {
            layers: vec![LayerDef {
                name: name.to_string(),
                ty: FieldType::bool_v(),
            }],
            updates: vec![update],
        }
    }

    /// `x ↦ neighborhood^k(x)`.
    pub fn growth(k: usize) -> Self {
        Self::single("x", crate::blobs::neighborhood_k(&crate::lang::var("x"), k))
    }

    pub fn voronoi() -> Self {
        Self::single("x", crate::blobs::vd_update(&crate::lang::var("x")))
    }

    pub fn meet_v() -> Self {
        Self::single("x", crate::blobs::meet_v(&crate::lang::var("x")))
    }

    pub fn validate(&self, ctx: &TypeContext) -> Result<(), String> {
        if self.layers.len() != self.updates.len() {
            return Err(format!(
                "{} layers but {} updates",
                self.layers.len(),
                self.updates.len()
            ));
        }
        for (l, u) in self.layers.iter().zip(&self.updates) {
            let t = u.typecheck(ctx).map_err(|e| format!("update of `{}`: {e}", l.name))?;
            if t != l.ty {
                return Err(format!("update of `{}` has type {t}, layer is {}", l.name, l.ty));
            }
            for (v, vt) in u.layers() {
                match self.layers.iter().find(|d| d.name == v) {
                    None => return Err(format!("update of `{}` reads undeclared layer `{v}`", l.name)),
                    Some(d) if d.ty != vt => {
                        return Err(format!("layer `{v}` is {} but read as {vt}", d.ty));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

/// Layer values at one time step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub layers: Vec<(String, Field)>,
    pub t: u64,
}

impl Configuration {
    pub fn new(layers: Vec<(String, Field)>) -> Self {
        Configuration { layers, t: 0 }
    }

    pub fn single(name: &str, f: Field) -> Self {
        Self::new(vec![(name.to_string(), f)])
    }

    pub fn get(&self, name: &str) -> Option<&Field> {
        self.layers.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }

    /// The first layer.
    pub fn main(&self) -> &Field {
        &self.layers[0].1
    }
}

// ---- reference interpreter ----

fn mask(w: u8) -> u8 {
    ((1u16 << w) - 1) as u8
}

/// Evaluates `e` on explicit per-point arrays. Every engine must agree with this.
pub fn interpret(e: &Expr, c: &Configuration, m: &SimplicialMedium) -> Field {
    let ctx = TypeContext::of(m);
    eval_node(e, c, m, &ctx)
}

fn eval_node(e: &Expr, c: &Configuration, m: &SimplicialMedium, ctx: &TypeContext) -> Field {
    let kids: Vec<Field> = e.children().iter().map(|k| eval_node(k, c, m, ctx)).collect();
    let ty = shallow_type(e, &kids, ctx);
    let n = m.locus_len(ty.locus);
    let vals: Vec<u8> = match e {
        Expr::Layer(name, _) => {
            return c
                .get(name)
                .unwrap_or_else(|| panic!("layer `{name}` missing from configuration"))
                .clone()
        }
        Expr::Const(v, _) => vec![*v; n],
        Expr::Unary(op, _) => {
            let a = kids[0].values();
            match op {
                UnaryOp::Not => a.iter().map(|&v| v ^ 1).collect(),
                UnaryOp::GeConst(k) => a.iter().map(|&v| u8::from(v >= *k)).collect(),
                UnaryOp::EqConst(k) => a.iter().map(|&v| u8::from(v == *k)).collect(),
                UnaryOp::Shr(k) => a.iter().map(|&v| v.checked_shr(*k as u32).unwrap_or(0)).collect(),
            }
        }
        Expr::Binary(op, _, _) => {
            let (a, b) = (kids[0].values(), kids[1].values());
            let w = kids[0].ty().width();
            a.iter()
                .zip(b)
                .map(|(&x, &y)| match op {
                    BinaryOp::And => x & y,
                    BinaryOp::Or => x | y,
                    BinaryOp::Xor => x ^ y,
                    BinaryOp::Add => ((x as u16 + y as u16) as u8) & mask(w),
                    BinaryOp::Min => x.min(y),
                    BinaryOp::Max => x.max(y),
                    BinaryOp::Ge => u8::from(x >= y),
                })
                .collect()
        }
        Expr::Broadcast(_, _) => {
            let t = m.transfer(ty.locus);
            let a = kids[0].values();
            t.father.iter().map(|&f| a[f as usize]).collect()
        }
        Expr::Transfer(_) => {
            let t = m.transfer(ty.locus);
            let a = kids[0].values();
            t.partner.iter().map(|&p| a[p as usize]).collect()
        }
        Expr::RotateCw(_) | Expr::RotateCcw(_) | Expr::Symmetry(_) => {
            let t = m.transfer(ty.locus);
            let table = match e {
                Expr::RotateCw(_) => &t.cw_from,
                Expr::RotateCcw(_) => &t.ccw_from,
                _ => t.sym_from.as_ref().expect("symmetry checked by typecheck"),
            };
            let a = kids[0].values();
            table.iter().map(|&p| a[p as usize]).collect()
        }
        Expr::Reduce(op, _) => {
            let t = m.transfer(kids[0].ty().locus);
            let a = kids[0].values();
            (0..n as u32)
                .map(|s| {
                    let it = t.points_of(s).map(|q| a[q]);
                    match op {
                        ReduceOp::And | ReduceOp::Min => it.min().unwrap(),
                        ReduceOp::Or | ReduceOp::Max => it.max().unwrap(),
                        ReduceOp::Xor => it.fold(0, |x, y| x ^ y),
                        ReduceOp::Plus => (it.map(u32::from).sum::<u32>() as u8) & mask(ty.width()),
                    }
                })
                .collect()
        }
    };
    Field::from_values(ty, vals).expect("interpreter values fit their type")
}

fn shallow_type(e: &Expr, kids: &[Field], ctx: &TypeContext) -> FieldType {
    let ph = |i: usize| Arc::new(Expr::Layer(String::new(), kids[i].ty()));
    let s = match e {
        Expr::Layer(..) | Expr::Const(..) => e.clone(),
        Expr::Unary(op, _) => Expr::Unary(*op, ph(0)),
        Expr::Binary(op, _, _) => Expr::Binary(*op, ph(0), ph(1)),
        Expr::Broadcast(c, _) => Expr::Broadcast(*c, ph(0)),
        Expr::Transfer(_) => Expr::Transfer(ph(0)),
        Expr::Reduce(op, _) => Expr::Reduce(*op, ph(0)),
        Expr::RotateCw(_) => Expr::RotateCw(ph(0)),
        Expr::RotateCcw(_) => Expr::RotateCcw(ph(0)),
        Expr::Symmetry(_) => Expr::Symmetry(ph(0)),
    };
    s.typecheck(ctx).unwrap_or_else(|err| panic!("ill-typed expression: {err}"))
}

// ---- engines ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    Interpreter,
    Gates,
    BitParallel,
}

#[derive(Debug, thiserror::Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("bit-parallel engine: {0}")]
    BitParallel(String),
    #[error("configuration: {0}")]
    Config(String),
}

/// A circuit bound to a medium and an evaluation strategy.
pub struct Engine<'m> {
    m: &'m SimplicialMedium,
    def: CircuitDef,
    kind: EngineKind,
    compiled: Option<CompiledCircuit>,
    bitpar: Option<BitParallel>,
}

/// Outcome of [`Engine::run_until_fixpoint`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: Configuration,
    /// First `t` with `f(x^t) = x^t`; `None` on timeout.
    pub t_c: Option<u64>,
    pub steps: u64,
}

impl RunOutcome {
    pub fn timed_out(&self) -> bool {
        self.t_c.is_none()
    }
}

impl<'m> Engine<'m> {
    pub fn new(m: &'m SimplicialMedium, def: CircuitDef, kind: EngineKind) -> Result<Self, RuntimeError> {
        def.validate(&TypeContext::of(m)).map_err(RuntimeError::Config)?;
        let (compiled, bitpar) = match kind {
            EngineKind::Interpreter => (None, None),
            EngineKind::Gates => (Some(compile(&def, m)?), None),
            EngineKind::BitParallel => {
                let c = compile(&def, m)?;
                let bp = BitParallel::new(&c, m)?;
                (Some(c), Some(bp))
            }
        };
        Ok(Engine {
            m,
            def,
            kind,
            compiled,
            bitpar,
        })
    }

    pub fn kind(&self) -> EngineKind {
        self.kind
    }

    pub fn def(&self) -> &CircuitDef {
        &self.def
    }

    pub fn compiled(&self) -> Option<&CompiledCircuit> {
        self.compiled.as_ref()
    }

    pub fn bit_parallel(&self) -> Option<&BitParallel> {
        self.bitpar.as_ref()
    }

    fn check(&self, c: &Configuration) -> Result<(), RuntimeError> {
        if c.layers.len() != self.def.layers.len() {
            return Err(RuntimeError::Config("layer count differs from the circuit".into()));
        }
        for ((n, f), d) in c.layers.iter().zip(&self.def.layers) {
            if *n != d.name || f.ty() != d.ty || f.len() != self.m.locus_len(d.ty.locus) {
                return Err(RuntimeError::Config(format!("layer `{n}` does not match its declaration")));
            }
        }
        Ok(())
    }

    /// Synchronous update of every layer, border pinned.
    pub fn eval(&self, c: &Configuration) -> Vec<Field> {
        let mut next = match self.kind {
            EngineKind::Interpreter => self.def.updates.iter().map(|u| interpret(u, c, self.m)).collect(),
            EngineKind::Gates => eval_gates(self.compiled.as_ref().unwrap(), c),
            EngineKind::BitParallel => self.bitpar.as_ref().unwrap().eval(c, self.m),
        };
        for f in &mut next {
            pin_border(f, self.m);
        }
        next
    }

    /// One step: synchronous evaluation, then each tile independently keeps
    /// its old register values with probability `skip_prob`.
    pub fn step(&self, c: &Configuration, skip_prob: f64, rng: &mut impl Rng) -> Configuration {
        let next = self.eval(c);
        self.commit(c, next, skip_prob, rng)
    }

    fn commit(&self, c: &Configuration, mut next: Vec<Field>, skip_prob: f64, rng: &mut impl Rng) -> Configuration {
        assert!((0.0..1.0).contains(&skip_prob), "skip_prob must lie in [0, 1)");
        if skip_prob > 0.0 {
            let skipped: Vec<bool> = (0..self.m.num_vertices()).map(|_| rng.gen_bool(skip_prob)).collect();
            for (f, (_, old)) in next.iter_mut().zip(&c.layers) {
                let locus = f.ty().locus;
                for p in 0..f.len() as u32 {
                    if skipped[self.m.point_owner(locus, p) as usize] {
                        f.set(p, old.get(p));
                    }
                }
            }
        }
        Configuration {
            layers: c.layers.iter().map(|(n, _)| n.clone()).zip(next).collect(),
            t: c.t + 1,
        }
    }

    pub fn run_until_fixpoint(
        &self,
        c0: &Configuration,
        max_steps: u64,
        skip_prob: f64,
        rng: &mut impl Rng,
    ) -> Result<RunOutcome, RuntimeError> {
        self.run_traced(c0, max_steps, skip_prob, rng, |_| {})
    }

    /// Like [`Self::run_until_fixpoint`], calling `on_step` with `x^0` and every
    /// later configuration.
    pub fn run_traced(
        &self,
        c0: &Configuration,
        max_steps: u64,
        skip_prob: f64,
        rng: &mut impl Rng,
        mut on_step: impl FnMut(&Configuration),
    ) -> Result<RunOutcome, RuntimeError> {
        self.check(c0)?;
        let mut x = c0.clone();
        for (_, f) in &mut x.layers {
            pin_border(f, self.m);
        }
        on_step(&x);
        let mut steps = 0;
        loop {
            let sync = self.eval(&x);
            if x.layers.iter().zip(&sync).all(|((_, a), b)| a == b) {
                return Ok(RunOutcome {
                    t_c: Some(steps),
                    config: x,
                    steps,
                });
            }
            if steps >= max_steps {
                return Ok(RunOutcome {
                    t_c: None,
                    config: x,
                    steps,
                });
            }
            x = self.commit(&x, sync, skip_prob, rng);
            steps += 1;
            on_step(&x);
        }
    }
}

/// Border vertices of bordered media are held empty.
pub fn pin_border(f: &mut Field, m: &SimplicialMedium) {
    if m.topology() != Topology::Bordered {
        return;
    }
    let locus = f.ty().locus;
    if locus != Locus::V {
        return;
    }
    for v in 0..f.len() as u32 {
        if m.is_border(v) {
            f.set(v, 0);
        }
    }
}

fn eval_gates(cc: &CompiledCircuit, c: &Configuration) -> Vec<Field> {
    let regs: Vec<Vec<bool>> = cc
        .layers
        .iter()
        .map(|(name, ty)| {
            let f = c.get(name).expect("layer present");
            let w = ty.width() as usize;
            let mut bits = Vec::with_capacity(f.len() * w);
            for &v in f.values() {
                bits.extend((0..w).map(|b| (v >> b) & 1 == 1));
            }
            bits
        })
        .collect();
    let nets = cc.netlist.eval_nets(&regs);
    cc.outputs
        .iter()
        .zip(&cc.output_types)
        .map(|(sigs, ty)| {
            let w = ty.width() as usize;
            let vals = sigs
                .chunks(w)
                .map(|bits| bits.iter().enumerate().fold(0u8, |acc, (b, s)| acc | (u8::from(s.eval(&nets)) << b)))
                .collect();
            Field::from_values(*ty, vals).unwrap()
        })
        .collect()
}

/// Evaluates the compiled circuit through the gate-level simulator.
pub fn eval_compiled(cc: &CompiledCircuit, c: &Configuration) -> Vec<Field> {
    eval_gates(cc, c)
}

// ---- bit-parallel engine ----

/// Word width of the bit-parallel engine: the torus must have this many columns.
pub const WORD_COLS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TInput {
    Const(bool),
    Gate { k: u32, di: i32, dj: i32, inv: bool },
    Reg { layer: u16, bit: u8, di: i32, dj: i32, inv: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TOp {
    Gate(GateOp),
    Buf,
}

#[derive(Debug, Clone)]
struct TGate {
    op: TOp,
    a: TInput,
    b: TInput,
}

/// Row-pipelined evaluation of one tile's gate template over packed rows:
/// bit `i` of a row word is column `i`, lateral neighbours are word rotations.
#[derive(Debug, Clone)]
pub struct BitParallel {
    rows: usize,
    gates: Vec<TGate>,
    /// Index of the output buffer gate per (layer, bit).
    outputs: Vec<Vec<u32>>,
    widths: Vec<u8>,
    lag: Vec<i64>,
    buf_len: Vec<usize>,
    sweep: (i64, i64),
}

fn wrap_offset(d: usize, n: usize) -> i32 {
    if d > n / 2 {
        d as i32 - n as i32
    } else {
        d as i32
    }
}

impl BitParallel {
    pub fn new(cc: &CompiledCircuit, m: &SimplicialMedium) -> Result<Self, RuntimeError> {
        let err = |s: &str| RuntimeError::BitParallel(s.to_string());
        let Some((cols, rows)) = m.hex_dims() else {
            return Err(err("requires a hexagonal torus"));
        };
        if cols != WORD_COLS {
            return Err(RuntimeError::BitParallel(format!(
                "requires {WORD_COLS} columns, medium has {cols}"
            )));
        }
        if cc.layers.iter().any(|(_, t)| t.locus != Locus::V) {
            return Err(err("layers must live on V"));
        }
        let nl = &cc.netlist;
        let offset = |tile: u32| -> (i32, i32) {
            let t = tile as usize;
            (wrap_offset(t % cols, cols), wrap_offset(t / cols, rows))
        };
        // template: tile 0 gates in key order
        let mut tile0: Vec<(GateKey, u32)> = nl
            .gates
            .iter()
            .enumerate()
            .filter(|(_, g)| g.tile == 0)
            .map(|(i, g)| (g.key, i as u32))
            .collect();
        tile0.sort();
        let index: HashMap<GateKey, u32> = tile0.iter().enumerate().map(|(k, &(key, _))| (key, k as u32)).collect();
        let convert = |s: Signal, rel: u32| -> Result<TInput, RuntimeError> {
            let (ri, rj) = offset(rel);
            Ok(match s {
                Signal::Const(c) => TInput::Const(c),
                Signal::Net { id, inv } => match nl.drivers[id as usize] {
                    Driver::Register { layer, point, bit } => {
                        let (di, dj) = offset(point);
                        TInput::Reg {
                            layer,
                            bit,
                            di: di - ri,
                            dj: dj - rj,
                            inv,
                        }
                    }
                    Driver::Gate(g) => {
                        let gate = &nl.gates[g as usize];
                        let k = *index
                            .get(&gate.key)
                            .ok_or_else(|| err("gates differ between tiles"))?;
                        let (di, dj) = offset(gate.tile);
                        TInput::Gate {
                            k,
                            di: di - ri,
                            dj: dj - rj,
                            inv,
                        }
                    }
                },
            })
        };
        let mut gates = Vec::with_capacity(tile0.len());
        for &(_, g) in &tile0 {
            let gate = &nl.gates[g as usize];
            gates.push(TGate {
                op: TOp::Gate(gate.op),
                a: convert(gate.a, 0)?,
                b: convert(gate.b, 0)?,
            });
        }
        let mut outputs = Vec::new();
        let mut widths = Vec::new();
        for (sigs, ty) in cc.outputs.iter().zip(&cc.output_types) {
            let w = ty.width() as usize;
            widths.push(w as u8);
            let mut per_bit = Vec::new();
            for b in 0..w {
                let input = convert(sigs[b], 0)?;
                per_bit.push(gates.len() as u32);
                gates.push(TGate {
                    op: TOp::Buf,
                    a: input,
                    b: TInput::Const(false),
                });
            }
            outputs.push(per_bit);
        }
        for (k, g) in gates.iter().enumerate() {
            for inp in [g.a, g.b] {
                if let TInput::Gate { k: src, .. } = inp {
                    if src as usize >= k {
                        return Err(err("template is not topologically ordered"));
                    }
                }
            }
        }
        // lags, first valid rows and buffer lengths
        let n = gates.len();
        let mut lag = vec![0i64; n];
        let mut first = vec![0i64; n];
        for k in 0..n {
            let mut l = 0i64;
            let mut f = -lag[k];
            for inp in [gates[k].a, gates[k].b] {
                if let TInput::Gate { k: src, dj, .. } = inp {
                    l = l.max(lag[src as usize] + dj as i64);
                }
            }
            lag[k] = l;
            f = f.min(-l);
            for inp in [gates[k].a, gates[k].b] {
                if let TInput::Gate { k: src, dj, .. } = inp {
                    f = f.max(first[src as usize] - dj as i64);
                }
            }
            first[k] = f.max(-l);
        }
        let mut buf_len = vec![1usize; n];
        for k in 0..n {
            for inp in [gates[k].a, gates[k].b] {
                if let TInput::Gate { k: src, dj, .. } = inp {
                    let need = lag[k] - dj as i64 - lag[src as usize] + 1;
                    buf_len[src as usize] = buf_len[src as usize].max(need as usize);
                }
            }
        }
        let out_ids: Vec<u32> = outputs.iter().flatten().copied().collect();
        let s0 = -out_ids.iter().map(|&k| first[k as usize]).max().unwrap_or(0);
        let s1 = rows as i64 - 1 + out_ids.iter().map(|&k| lag[k as usize]).max().unwrap_or(0);
        Ok(BitParallel {
            rows,
            gates,
            outputs,
            widths,
            lag,
            buf_len,
            sweep: (s0, s1),
        })
    }

    pub fn template_len(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g.op, TOp::Gate(_))).count()
    }

    /// Rows held by the largest per-gate ring buffer.
    pub fn max_buffered_rows(&self) -> usize {
        self.buf_len.iter().copied().max().unwrap_or(0)
    }

    pub fn eval(&self, c: &Configuration, m: &SimplicialMedium) -> Vec<Field> {
        let (cols, rows) = m.hex_dims().unwrap();
        debug_assert_eq!(rows, self.rows);
        // registers[layer][bit][row]
        let regs: Vec<Vec<Vec<u64>>> = c
            .layers
            .iter()
            .map(|(_, f)| {
                let w = f.ty().width() as usize;
                (0..w)
                    .map(|b| {
                        (0..rows)
                            .map(|j| {
                                (0..cols).fold(0u64, |acc, i| acc | (u64::from((f.get((j * cols + i) as u32) >> b) & 1) << i))
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let rot = |w: u64, di: i32| w.rotate_right(di.rem_euclid(64) as u32);
        let mut bufs: Vec<Vec<u64>> = self.buf_len.iter().map(|&l| vec![0u64; l]).collect();
        let mut out: Vec<Vec<Vec<u64>>> = self
            .widths
            .iter()
            .map(|&w| vec![vec![0u64; rows]; w as usize])
            .collect();
        let out_pos: HashMap<u32, (usize, usize)> = self
            .outputs
            .iter()
            .enumerate()
            .flat_map(|(l, bits)| bits.iter().enumerate().map(move |(b, &k)| (k, (l, b))))
            .collect();
        for s in self.sweep.0..=self.sweep.1 {
            for (k, g) in self.gates.iter().enumerate() {
                let j = s - self.lag[k];
                let read = |inp: TInput, bufs: &Vec<Vec<u64>>| -> u64 {
                    match inp {
                        TInput::Const(c) => {
                            if c {
                                !0
                            } else {
                                0
                            }
                        }
                        TInput::Gate { k, di, dj, inv } => {
                            let b = &bufs[k as usize];
                            let w = b[(j + dj as i64).rem_euclid(b.len() as i64) as usize];
                            rot(w, di) ^ if inv { !0 } else { 0 }
                        }
                        TInput::Reg { layer, bit, di, dj, inv } => {
                            let r = (j + dj as i64).rem_euclid(rows as i64) as usize;
                            rot(regs[layer as usize][bit as usize][r], di) ^ if inv { !0 } else { 0 }
                        }
                    }
                };
                let a = read(g.a, &bufs);
                let v = match g.op {
                    TOp::Buf => a,
                    TOp::Gate(GateOp::Not) => !a,
                    TOp::Gate(GateOp::And) => a & read(g.b, &bufs),
                    TOp::Gate(GateOp::Or) => a | read(g.b, &bufs),
                    TOp::Gate(GateOp::Xor) => a ^ read(g.b, &bufs),
                };
                let len = bufs[k].len() as i64;
                bufs[k][j.rem_euclid(len) as usize] = v;
                if let Some(&(l, b)) = out_pos.get(&(k as u32)) {
                    if (0..rows as i64).contains(&j) {
                        out[l][b][j as usize] = v;
                    }
                }
            }
        }
        out.iter()
            .zip(&c.layers)
            .map(|(bits, (_, f))| {
                let vals = (0..rows * cols)
                    .map(|p| {
                        let (i, j) = (p % cols, p / cols);
                        bits.iter()
                            .enumerate()
                            .fold(0u8, |acc, (b, words)| acc | ((((words[j] >> i) & 1) as u8) << b))
                    })
                    .collect();
                Field::from_values(f.ty(), vals).unwrap()
            })
            .collect()
    }
}

/// JSON manifest written alongside traced runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub skip_prob: f64,
    pub t_c: Option<u64>,
    pub steps: u64,
    pub engine: EngineKind,
    pub medium_hash: String,
    pub layers: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blobs::*;
    use crate::locus::Class;
    use crate::lang::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hex(n: usize) -> SimplicialMedium {
        SimplicialMedium::hex_torus(n, n).unwrap()
    }

    #[test]
    fn exists_e_of_single_vertex() {
        let m = hex(6);
        let x = Field::from_points(&m, FieldType::bool_v(), &[7]).unwrap();
        let c = Configuration::single("x", x);
        let f = interpret(&exists(Class::E, var("x")), &c, &m);
        let mut expect: Vec<u32> = m.vertex_edges(7).to_vec();
        expect.sort();
        assert_eq!(f.true_points(), expect);
        let all = Configuration::single("x", Field::constant(&m, FieldType::bool_v(), 1).unwrap());
        assert_eq!(interpret(&forall(Class::E, var("x")), &all, &m).popcount(), m.num_edges());
    }

    #[test]
    fn frontier_is_endpoint_xor() {
        let m = hex(8);
        let x = Field::random(&m, FieldType::bool_v(), 3, 0.5);
        let f = interpret(&frontier_e(&var("x")), &Configuration::single("x", x.clone()), &m);
        for (e, [a, b]) in m.edges().iter().enumerate() {
            assert_eq!(f.get(e as u32), x.get(*a) ^ x.get(*b));
        }
    }

    #[test]
    fn growth_fills_torus_within_diameter() {
        let m = hex(8);
        let eng = Engine::new(&m, CircuitDef::growth(1), EngineKind::Interpreter).unwrap();
        let x = Field::from_points(&m, FieldType::bool_v(), &[0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = eng
            .run_until_fixpoint(&Configuration::single("x", x), 100, 0.0, &mut rng)
            .unwrap();
        assert_eq!(out.config.main().popcount(), 64);
        let diam = m.vertex_bfs(&[0], false).into_iter().max().unwrap() as u64;
        assert_eq!(out.t_c, Some(diam));
    }

    #[test]
    fn fixed_configuration_converges_immediately() {
        let m = hex(4);
        let eng = Engine::new(&m, CircuitDef::growth(1), EngineKind::Gates).unwrap();
        let x = Field::constant(&m, FieldType::bool_v(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = eng.run_until_fixpoint(&Configuration::single("x", x), 5, 0.0, &mut rng).unwrap();
        assert_eq!(out.t_c, Some(0));
    }

    #[test]
    fn same_seed_same_trajectory() {
        let m = hex(8);
        let eng = Engine::new(&m, CircuitDef::growth(1), EngineKind::Gates).unwrap();
        let x = Configuration::single("x", Field::from_points(&m, FieldType::bool_v(), &[3]).unwrap());
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut frames = Vec::new();
            eng.run_traced(&x, 100, 0.5, &mut rng, |c| frames.push(c.main().clone())).unwrap();
            frames
        };
        assert_eq!(run(11), run(11));
    }

    #[test]
    fn near_total_skip_still_fills() {
        let m = hex(6);
        let eng = Engine::new(&m, CircuitDef::growth(1), EngineKind::Gates).unwrap();
        let x = Configuration::single("x", Field::from_points(&m, FieldType::bool_v(), &[0]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let out = eng.run_until_fixpoint(&x, 20_000, 0.95, &mut rng).unwrap();
        assert_eq!(out.config.main().popcount(), 36);
    }

    #[test]
    fn gates_match_interpreter_on_library() {
        let m = hex(6);
        let x = var("x");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for e in [nbcc(&x), meet_e(&x), vd_update(&x), outside_v(&x), rhombus_all(&x)] {
            let cc = crate::compiler::compile_exprs(std::slice::from_ref(&e), &m, true).unwrap();
            for _ in 0..5 {
                let c = Configuration::single("x", Field::random_with(&m, FieldType::bool_v(), &mut rng, 0.4));
                assert_eq!(eval_compiled(&cc, &c)[0], interpret(&e, &c, &m), "{e}");
            }
        }
    }

    #[test]
    fn bit_parallel_rejects_wrong_width() {
        let m = hex(8);
        assert!(Engine::new(&m, CircuitDef::growth(1), EngineKind::BitParallel).is_err());
    }

    #[test]
    fn bit_parallel_matches_on_64_columns() {
        let m = SimplicialMedium::hex_torus(64, 8).unwrap();
        let eng = Engine::new(&m, CircuitDef::voronoi(), EngineKind::BitParallel).unwrap();
        let gates = Engine::new(&m, CircuitDef::voronoi(), EngineKind::Gates).unwrap();
        assert_eq!(eng.bit_parallel().unwrap().template_len(), 55);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..4 {
            let c = Configuration::single("x", Field::random_with(&m, FieldType::bool_v(), &mut rng, 0.3));
            assert_eq!(eng.eval(&c), gates.eval(&c));
        }
        let z = Configuration::single("x", Field::zeros(&m, FieldType::bool_v()));
        let g = Engine::new(&m, CircuitDef::growth(1), EngineKind::BitParallel).unwrap();
        assert_eq!(g.eval(&z)[0].popcount(), 0);
    }

    #[test]
    fn border_stays_empty() {
        let m = SimplicialMedium::isotropic(60, 2, 3).unwrap();
        let eng = Engine::new(&m, CircuitDef::growth(1), EngineKind::Interpreter).unwrap();
        let v = m.interior_vertices().next().unwrap();
        let x = Configuration::single("x", Field::from_points(&m, FieldType::bool_v(), &[v]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = eng.run_until_fixpoint(&x, 200, 0.0, &mut rng).unwrap();
        assert_eq!(out.config.main().popcount(), m.interior_vertices().count());
        assert_eq!(m.medium_hash(), m.medium_hash());
    }
}
