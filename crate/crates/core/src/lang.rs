//! Operation-expressions over fields: AST, type checking, macros and a
//! prefix text syntax.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::fields::{Elem, FieldType, MAX_WIDTH};
use crate::locus::{Class, Locus};
use crate::medium::{MediumKind, SimplicialMedium};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReduceOp {
    And,
    Or,
    Xor,
    Min,
    Max,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnaryOp {
    Not,
    /// `x >= k`, producing a boolean.
    GeConst(u8),
    /// `x == k`, producing a boolean.
    EqConst(u8),
    /// Right shift by a constant.
    Shr(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinaryOp {
    And,
    Or,
    Xor,
    /// Modular addition at the operand width.
    Add,
    Min,
    Max,
    /// `a >= b`, producing a boolean.
    Ge,
}

impl BinaryOp {
    pub fn is_commutative(self) -> bool {
        self != BinaryOp::Ge
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Layer(String, FieldType),
    Const(u8, FieldType),
    Unary(UnaryOp, Arc<Expr>),
    Binary(BinaryOp, Arc<Expr>, Arc<Expr>),
    /// `*^y`: replicate a simplicial field onto the transfer points facing `y`.
    Broadcast(Class, Arc<Expr>),
    /// `↑`: exchange values with the paired transfer point.
    Transfer(Arc<Expr>),
    /// `/^op`: fold the transfer points of each father.
    Reduce(ReduceOp, Arc<Expr>),
    RotateCw(Arc<Expr>),
    RotateCcw(Arc<Expr>),
    /// `↔`: central symmetry around the father.
    Symmetry(Arc<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TypeError {
    #[error("{op} expects {expected}, got {got}")]
    Signature {
        op: &'static str,
        expected: &'static str,
        got: FieldType,
    },
    #[error("{op}: operands have different types {a} and {b}")]
    Mismatch { op: &'static str, a: FieldType, b: FieldType },
    #[error("central symmetry of {0} is undefined on isotropic media")]
    SymmetryUndefined(FieldType),
    #[error("cannot broadcast {got} toward its own class")]
    SelfBroadcast { got: FieldType },
    #[error("constant {value} does not fit {ty}")]
    ConstOverflow { value: u8, ty: FieldType },
    #[error("substituting `{name}`: expected {expected}, got {got}")]
    Substitution {
        name: String,
        expected: FieldType,
        got: FieldType,
    },
}

/// What type checking needs to know about the medium.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TypeContext {
    pub kind: MediumKind,
    /// Largest reduction fan-in per father class.
    pub max_coarity: [usize; 3],
}

impl TypeContext {
    pub fn hex() -> Self {
        TypeContext {
            kind: MediumKind::Hexagonal,
            max_coarity: [6, 2, 3],
        }
    }

    pub fn of(m: &SimplicialMedium) -> Self {
        TypeContext {
            kind: m.kind(),
            max_coarity: [m.max_coarity(Class::V), m.max_coarity(Class::E), m.max_coarity(Class::F)],
        }
    }
}

/// Width of a sum of `fan_in` values of width `w`.
pub fn plus_width(w: u8, fan_in: usize) -> u8 {
    let max = fan_in as u64 * ((1u64 << w) - 1);
    let bits = (64 - max.leading_zeros()) as u8;
    bits.clamp(1, MAX_WIDTH)
}

fn int_of(ty: FieldType) -> Option<u8> {
    match ty.elem {
        Elem::Int(w) => Some(w),
        Elem::Bool => None,
    }
}

impl Expr {
    pub fn typecheck(&self, ctx: &TypeContext) -> Result<FieldType, TypeError> {
        use Expr::*;
        Ok(match self {
            Layer(_, ty) => *ty,
            Const(v, ty) => {
                if *v > ty.elem.max_value() {
                    return Err(TypeError::ConstOverflow { value: *v, ty: *ty });
                }
                *ty
            }
            Unary(op, e) => {
                let t = e.typecheck(ctx)?;
                match op {
                    UnaryOp::Not => {
                        if !t.is_bool() {
                            return Err(TypeError::Signature {
                                op: "not",
                                expected: "a boolean field",
                                got: t,
                            });
                        }
                        t
                    }
                    UnaryOp::GeConst(_) | UnaryOp::EqConst(_) => {
                        if int_of(t).is_none() {
                            return Err(TypeError::Signature {
                                op: "comparison",
                                expected: "an integer field",
                                got: t,
                            });
                        }
                        FieldType::bool(t.locus)
                    }
                    UnaryOp::Shr(_) => {
                        if int_of(t).is_none() {
                            return Err(TypeError::Signature {
                                op: "shr",
                                expected: "an integer field",
                                got: t,
                            });
                        }
                        t
                    }
                }
            }
            Binary(op, a, b) => {
                let (ta, tb) = (a.typecheck(ctx)?, b.typecheck(ctx)?);
                let name = binary_name(*op);
                if ta != tb {
                    return Err(TypeError::Mismatch { op: name, a: ta, b: tb });
                }
                match op {
                    BinaryOp::And | BinaryOp::Or | BinaryOp::Xor => {
                        if !ta.is_bool() {
                            return Err(TypeError::Signature {
                                op: name,
                                expected: "boolean fields",
                                got: ta,
                            });
                        }
                        ta
                    }
                    BinaryOp::Add | BinaryOp::Min | BinaryOp::Max => {
                        if int_of(ta).is_none() {
                            return Err(TypeError::Signature {
                                op: name,
                                expected: "integer fields",
                                got: ta,
                            });
                        }
                        ta
                    }
                    BinaryOp::Ge => {
                        if int_of(ta).is_none() {
                            return Err(TypeError::Signature {
                                op: name,
                                expected: "integer fields",
                                got: ta,
                            });
                        }
                        FieldType::bool(ta.locus)
                    }
                }
            }
            Broadcast(toward, e) => {
                let t = e.typecheck(ctx)?;
                if !t.locus.is_simplicial() {
                    return Err(TypeError::Signature {
                        op: "broadcast",
                        expected: "a simplicial field",
                        got: t,
                    });
                }
                let locus = Locus::transfer(*toward, t.locus.father()).ok_or(TypeError::SelfBroadcast { got: t })?;
                FieldType { locus, ..t }
            }
            Transfer(e) => {
                let t = e.typecheck(ctx)?;
                let locus = t.locus.partner().ok_or(TypeError::Signature {
                    op: "transfer",
                    expected: "a transfer field",
                    got: t,
                })?;
                FieldType { locus, ..t }
            }
            Reduce(op, e) => {
                let t = e.typecheck(ctx)?;
                if !t.locus.is_transfer() {
                    return Err(TypeError::Signature {
                        op: "reduce",
                        expected: "a transfer field",
                        got: t,
                    });
                }
                let father = t.locus.father();
                let locus = Locus::simplicial(father);
                match op {
                    ReduceOp::And | ReduceOp::Or | ReduceOp::Xor => {
                        if !t.is_bool() {
                            return Err(TypeError::Signature {
                                op: "boolean reduction",
                                expected: "a boolean field",
                                got: t,
                            });
                        }
                        FieldType::bool(locus)
                    }
                    ReduceOp::Min | ReduceOp::Max => FieldType { locus, ..t },
                    ReduceOp::Plus => {
                        let w = plus_width(t.width(), ctx.max_coarity[father.index()]);
                        FieldType::int(locus, w)
                    }
                }
            }
            RotateCw(e) | RotateCcw(e) => {
                let t = e.typecheck(ctx)?;
                let locus = t.locus.brother().ok_or(TypeError::Signature {
                    op: "rotation",
                    expected: "a transfer field",
                    got: t,
                })?;
                FieldType { locus, ..t }
            }
            Symmetry(e) => {
                let t = e.typecheck(ctx)?;
                if !t.locus.is_transfer() {
                    return Err(TypeError::Signature {
                        op: "symmetry",
                        expected: "a transfer field",
                        got: t,
                    });
                }
                match t.locus.father() {
                    Class::V if ctx.kind == MediumKind::Isotropic => return Err(TypeError::SymmetryUndefined(t)),
                    Class::V | Class::E => t,
                    Class::F => FieldType {
                        locus: t.locus.brother().unwrap(),
                        ..t
                    },
                }
            }
        })
    }

    /// Locus the expression would have on a hexagonal medium.
    pub fn locus_hint(&self) -> Option<Locus> {
        self.typecheck(&TypeContext::hex()).ok().map(|t| t.locus)
    }

    pub fn free_variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Layer(n, _) => {
                out.insert(n.clone());
            }
            Expr::Const(..) => {}
            _ => self.children().into_iter().for_each(|c| c.collect_vars(out)),
        }
    }

    /// Layer reads with their declared types.
    pub fn layers(&self) -> Vec<(String, FieldType)> {
        let mut out: Vec<(String, FieldType)> = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Layer(n, t) = e {
                if !out.iter().any(|(m, _)| m == n) {
                    out.push((n.clone(), *t));
                }
            }
        });
        out
    }

    pub fn children(&self) -> Vec<&Arc<Expr>> {
        match self {
            Expr::Layer(..) | Expr::Const(..) => vec![],
            Expr::Binary(_, a, b) => vec![a, b],
            Expr::Unary(_, e)
            | Expr::Broadcast(_, e)
            | Expr::Transfer(e)
            | Expr::Reduce(_, e)
            | Expr::RotateCw(e)
            | Expr::RotateCcw(e)
            | Expr::Symmetry(e) => vec![e],
        }
    }

    pub fn walk(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    /// Replaces every read of layer `name` by `with`, which must have the
    /// layer's type.
    pub fn substitute(&self, name: &str, with: &Expr, ctx: &TypeContext) -> Result<Expr, TypeError> {
        let got = with.typecheck(ctx)?;
        if let Some((_, expected)) = self.layers().into_iter().find(|(n, _)| n == name) {
            if expected != got {
                return Err(TypeError::Substitution {
                    name: name.to_string(),
                    expected,
                    got,
                });
            }
        }
        Ok(self.replace(name, with))
    }

    fn replace(&self, name: &str, with: &Expr) -> Expr {
        let r = |e: &Arc<Expr>| Arc::new(e.replace(name, with));
        match self {
            Expr::Layer(n, _) if n == name => with.clone(),
            Expr::Layer(..) | Expr::Const(..) => self.clone(),
            Expr::Unary(op, e) => Expr::Unary(*op, r(e)),
            Expr::Binary(op, a, b) => Expr::Binary(*op, r(a), r(b)),
            Expr::Broadcast(c, e) => Expr::Broadcast(*c, r(e)),
            Expr::Transfer(e) => Expr::Transfer(r(e)),
            Expr::Reduce(op, e) => Expr::Reduce(*op, r(e)),
            Expr::RotateCw(e) => Expr::RotateCw(r(e)),
            Expr::RotateCcw(e) => Expr::RotateCcw(r(e)),
            Expr::Symmetry(e) => Expr::Symmetry(r(e)),
        }
    }

    /// Number of tree nodes (shared subtrees counted each time).
    pub fn tree_size(&self) -> usize {
        1 + self.children().iter().map(|c| c.tree_size()).sum::<usize>()
    }
}

fn binary_name(op: BinaryOp) -> &'static str {
    match op {
        BinaryOp::And => "and",
        BinaryOp::Or => "or",
        BinaryOp::Xor => "xor",
        BinaryOp::Add => "add",
        BinaryOp::Min => "min",
        BinaryOp::Max => "max",
        BinaryOp::Ge => "ge",
    }
}

fn reduce_name(op: ReduceOp) -> &'static str {
    match op {
        ReduceOp::And => "reduceAnd",
        ReduceOp::Or => "reduceOr",
        ReduceOp::Xor => "reduceXor",
        ReduceOp::Min => "reduceMin",
        ReduceOp::Max => "reduceMax",
        ReduceOp::Plus => "reducePlus",
    }
}

impl fmt::Display for Expr {
    /// Core-operator prefix form, accepted back by [`parse`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Layer(n, t) if *t == FieldType::bool_v() => write!(f, "{n}"),
            Expr::Layer(n, t) => write!(f, "{n}:{t}"),
            Expr::Const(v, t) => write!(f, "const({v}, {t})"),
            Expr::Unary(UnaryOp::Not, e) => write!(f, "not({e})"),
            Expr::Unary(UnaryOp::GeConst(k), e) => write!(f, "ge({e}, {k})"),
            Expr::Unary(UnaryOp::EqConst(k), e) => write!(f, "eq({e}, {k})"),
            Expr::Unary(UnaryOp::Shr(k), e) => write!(f, "shr({e}, {k})"),
            Expr::Binary(op, a, b) => write!(f, "{}({a}, {b})", binary_name(*op)),
            Expr::Broadcast(c, e) => write!(f, "broadcast{c}({e})"),
            Expr::Transfer(e) => write!(f, "transfer({e})"),
            Expr::Reduce(op, e) => write!(f, "{}({e})", reduce_name(*op)),
            Expr::RotateCw(e) => write!(f, "rotcw({e})"),
            Expr::RotateCcw(e) => write!(f, "rotccw({e})"),
            Expr::Symmetry(e) => write!(f, "sym({e})"),
        }
    }
}

// ---- constructors and macros ----

pub fn layer(name: &str, ty: FieldType) -> Expr {
    Expr::Layer(name.to_string(), ty)
}

pub fn var(name: &str) -> Expr {
    layer(name, FieldType::bool_v())
}

pub fn not(e: Expr) -> Expr {
    Expr::Unary(UnaryOp::Not, Arc::new(e))
}

pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
    Expr::Binary(op, Arc::new(a), Arc::new(b))
}

pub fn and(a: Expr, b: Expr) -> Expr {
    binary(BinaryOp::And, a, b)
}

pub fn or(a: Expr, b: Expr) -> Expr {
    binary(BinaryOp::Or, a, b)
}

pub fn xor(a: Expr, b: Expr) -> Expr {
    binary(BinaryOp::Xor, a, b)
}

pub fn unary(op: UnaryOp, e: Expr) -> Expr {
    Expr::Unary(op, Arc::new(e))
}

pub fn broadcast(toward: Class, e: Expr) -> Expr {
    Expr::Broadcast(toward, Arc::new(e))
}

pub fn transfer(e: Expr) -> Expr {
    Expr::Transfer(Arc::new(e))
}

pub fn reduce(op: ReduceOp, e: Expr) -> Expr {
    Expr::Reduce(op, Arc::new(e))
}

pub fn rot_cw(e: Expr) -> Expr {
    Expr::RotateCw(Arc::new(e))
}

pub fn rot_ccw(e: Expr) -> Expr {
    Expr::RotateCcw(Arc::new(e))
}

pub fn sym(e: Expr) -> Expr {
    Expr::Symmetry(Arc::new(e))
}

/// `/^op ∘ ↑ ∘ *^y`: reduce the neighbours of class `target`.
pub fn simplicial_reduce(op: ReduceOp, target: Class, e: Expr) -> Expr {
    reduce(op, transfer(broadcast(target, e)))
}

pub fn forall(target: Class, e: Expr) -> Expr {
    simplicial_reduce(ReduceOp::And, target, e)
}

pub fn exists(target: Class, e: Expr) -> Expr {
    simplicial_reduce(ReduceOp::Or, target, e)
}

pub fn delta(target: Class, e: Expr) -> Expr {
    simplicial_reduce(ReduceOp::Xor, target, e)
}

/// `op(↻x, ↺x)`: combine the two rotational neighbours.
pub fn reduce2(op: BinaryOp, e: Expr) -> Expr {
    binary(op, rot_cw(e.clone()), rot_ccw(e))
}

/// `↑ ∘ ↔ ∘ ↑`: between a vertex's fV points and the fE points of its apex
/// edges. A simplicial V or E argument is first broadcast toward faces.
pub fn apex(e: Expr) -> Expr {
    let e = match e.locus_hint() {
        Some(Locus::V) | Some(Locus::E) => broadcast(Class::F, e),
        _ => e,
    };
    transfer(sym(transfer(e)))
}

// ---- parser ----

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

#[derive(Debug, Clone)]
enum Arg {
    Expr(Expr),
    Num(u8),
    Type(FieldType),
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, pos: usize, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { pos, msg: msg.into() })
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += self.src[self.pos..].chars().next().unwrap().len_utf8();
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn word(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let n = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        if n == 0 {
            return None;
        }
        self.pos += n;
        Some(&rest[..n])
    }

    fn arg(&mut self) -> Result<Arg, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let Some(w) = self.word() else {
            return self.err(start, "expected an expression");
        };
        if w.chars().all(|c| c.is_ascii_digit()) {
            return w
                .parse::<u8>()
                .map(Arg::Num)
                .or_else(|_| self.err(start, format!("number `{w}` out of range")));
        }
        if self.eat('(') {
            let mut args = Vec::new();
            if !self.eat(')') {
                loop {
                    args.push(self.arg()?);
                    if self.eat(')') {
                        break;
                    }
                    if !self.eat(',') {
                        return self.err(self.pos, "expected `,` or `)`");
                    }
                }
            }
            return call(w, args).map(Arg::Expr).map_err(|msg| ParseError { pos: start, msg });
        }
        if let Ok(t) = w.parse::<FieldType>() {
            return Ok(Arg::Type(t));
        }
        if self.eat(':') {
            let tpos = self.pos;
            let t = self.word().unwrap_or("");
            let ty = t.parse::<FieldType>().or_else(|e| self.err(tpos, e))?;
            return Ok(Arg::Expr(layer(w, ty)));
        }
        Ok(Arg::Expr(var(w)))
    }
}

/// Parses the prefix syntax, e.g. `and(rhombus(not(frontierE(x))), forallE(frontierV(x)))`.
///
/// Bare identifiers are boolV layers; `name:type` declares another type.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { src, pos: 0 };
    let a = p.arg()?;
    p.skip_ws();
    if p.pos != src.len() {
        return p.err(p.pos, "trailing input");
    }
    match a {
        Arg::Expr(e) => Ok(e),
        _ => p.err(0, "expected an expression"),
    }
}

fn class_suffix(name: &str, prefix: &str) -> Option<Class> {
    match name.strip_prefix(prefix)? {
        "V" => Some(Class::V),
        "E" => Some(Class::E),
        "F" => Some(Class::F),
        _ => None,
    }
}

fn call(name: &str, args: Vec<Arg>) -> Result<Expr, String> {
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(format!("`{name}` takes {n} argument(s), got {}", args.len()))
        }
    };
    let expr = |i: usize| match &args[i] {
        Arg::Expr(e) => Ok(e.clone()),
        _ => Err(format!("argument {} of `{name}` must be an expression", i + 1)),
    };
    let num = |i: usize| match &args[i] {
        Arg::Num(k) => Ok(*k),
        _ => Err(format!("argument {} of `{name}` must be a number", i + 1)),
    };
    let fold = |op: BinaryOp| -> Result<Expr, String> {
        if args.len() < 2 {
            return Err(format!("`{name}` takes at least 2 arguments"));
        }
        let mut acc = expr(0)?;
        for i in 1..args.len() {
            acc = binary(op, acc, expr(i)?);
        }
        Ok(acc)
    };
    for (prefix, op) in [
        ("forall", ReduceOp::And),
        ("exists", ReduceOp::Or),
        ("delta", ReduceOp::Xor),
        ("sum", ReduceOp::Plus),
        ("min", ReduceOp::Min),
        ("max", ReduceOp::Max),
    ] {
        if let Some(c) = class_suffix(name, prefix) {
            arity(1)?;
            return Ok(simplicial_reduce(op, c, expr(0)?));
        }
    }
    if let Some(c) = class_suffix(name, "broadcast") {
        arity(1)?;
        return Ok(broadcast(c, expr(0)?));
    }
    let one = |f: fn(Expr) -> Expr| -> Result<Expr, String> {
        arity(1)?;
        Ok(f(expr(0)?))
    };
    match name {
        "not" => one(not),
        "and" => fold(BinaryOp::And),
        "or" => fold(BinaryOp::Or),
        "xor" => fold(BinaryOp::Xor),
        "add" => fold(BinaryOp::Add),
        "min" => fold(BinaryOp::Min),
        "max" => fold(BinaryOp::Max),
        "ge" => {
            arity(2)?;
            match args[1] {
                Arg::Num(k) => Ok(unary(UnaryOp::GeConst(k), expr(0)?)),
                _ => Ok(binary(BinaryOp::Ge, expr(0)?, expr(1)?)),
            }
        }
        "eq" => {
            arity(2)?;
            Ok(unary(UnaryOp::EqConst(num(1)?), expr(0)?))
        }
        "shr" => {
            arity(2)?;
            Ok(unary(UnaryOp::Shr(num(1)?), expr(0)?))
        }
        "const" => {
            arity(2)?;
            match args[1] {
                Arg::Type(t) => Ok(Expr::Const(num(0)?, t)),
                _ => Err("argument 2 of `const` must be a field type".into()),
            }
        }
        "transfer" => one(transfer),
        "rotcw" => one(rot_cw),
        "rotccw" => one(rot_ccw),
        "sym" => one(sym),
        "apex" => one(apex),
        "reduceAnd" => one(|e| reduce(ReduceOp::And, e)),
        "reduceOr" => one(|e| reduce(ReduceOp::Or, e)),
        "reduceXor" => one(|e| reduce(ReduceOp::Xor, e)),
        "reduceMin" => one(|e| reduce(ReduceOp::Min, e)),
        "reduceMax" => one(|e| reduce(ReduceOp::Max, e)),
        "reducePlus" => one(|e| reduce(ReduceOp::Plus, e)),
        "reduce2and" => one(|e| reduce2(BinaryOp::And, e)),
        "reduce2or" => one(|e| reduce2(BinaryOp::Or, e)),
        "reduce2xor" => one(|e| reduce2(BinaryOp::Xor, e)),
        _ => {
            let exprs = args
                .iter()
                .enumerate()
                .map(|(i, _)| expr(i))
                .collect::<Result<Vec<_>, _>>()?;
            crate::blobs::library(name, &exprs).unwrap_or_else(|| Err(format!("unknown function `{name}`")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forall_e_over_bool_v() {
        let ctx = TypeContext::hex();
        let t = forall(Class::E, var("x")).typecheck(&ctx).unwrap();
        assert_eq!(t, FieldType::bool(Locus::E));
        let t = forall(Class::E, layer("y", FieldType::bool(Locus::F))).typecheck(&ctx).unwrap();
        assert_eq!(t, FieldType::bool(Locus::E));
        assert!(matches!(
            exists(Class::V, var("x")).typecheck(&ctx),
            Err(TypeError::SelfBroadcast { .. })
        ));
    }

    #[test]
    fn symmetry_signatures() {
        let hex = TypeContext::hex();
        let iso = TypeContext {
            kind: MediumKind::Isotropic,
            max_coarity: [8, 2, 3],
        };
        let ev = layer("a", FieldType::bool(Locus::Ev));
        assert_eq!(sym(ev.clone()).typecheck(&hex).unwrap().locus, Locus::Ev);
        assert!(matches!(sym(ev).typecheck(&iso), Err(TypeError::SymmetryUndefined(_))));
        let ve = layer("a", FieldType::bool(Locus::Ve));
        assert_eq!(sym(ve).typecheck(&iso).unwrap().locus, Locus::Ve);
        let ef = layer("a", FieldType::bool(Locus::Ef));
        assert_eq!(sym(ef).typecheck(&iso).unwrap().locus, Locus::Vf);
    }

    #[test]
    fn apex_maps_fv_to_fe() {
        let ctx = TypeContext::hex();
        let fv = layer("a", FieldType::bool(Locus::Fv));
        assert_eq!(apex(fv).typecheck(&ctx).unwrap().locus, Locus::Fe);
        assert_eq!(apex(var("x")).typecheck(&ctx).unwrap().locus, Locus::Fe);
        let e = layer("a", FieldType::bool(Locus::E));
        assert_eq!(apex(e).typecheck(&ctx).unwrap().locus, Locus::Fv);
    }

    #[test]
    fn plus_widening() {
        assert_eq!(plus_width(1, 6), 3);
        assert_eq!(plus_width(1, 7), 3);
        assert_eq!(plus_width(1, 8), 4);
        assert_eq!(plus_width(2, 6), 5);
        assert_eq!(plus_width(1, 2), 2);
        let ctx = TypeContext::hex();
        let s = reduce(ReduceOp::Plus, broadcast(Class::E, var("x")));
        assert_eq!(s.typecheck(&ctx).unwrap(), FieldType::int(Locus::V, 3));
    }

    #[test]
    fn width_and_locus_mismatch() {
        let ctx = TypeContext::hex();
        let e = and(var("x"), layer("y", FieldType::bool(Locus::E)));
        assert!(matches!(e.typecheck(&ctx), Err(TypeError::Mismatch { .. })));
        let e = binary(BinaryOp::Add, layer("a", FieldType::int(Locus::V, 2)), layer("b", FieldType::int(Locus::V, 3)));
        assert!(e.typecheck(&ctx).is_err());
        assert!(not(layer("a", FieldType::int(Locus::V, 2))).typecheck(&ctx).is_err());
    }

    #[test]
    fn parse_and_print() {
        let e = parse("and(not(x), forallE(y:boolF))").unwrap();
        assert_eq!(e, and(not(var("x")), forall(Class::E, layer("y", FieldType::bool(Locus::F)))));
        let printed = e.to_string();
        assert_eq!(parse(&printed).unwrap(), e);
        let e = parse("ge(reducePlus(apex(x)), 4)").unwrap();
        assert!(matches!(e, Expr::Unary(UnaryOp::GeConst(4), _)));
        let err = parse("and(x, ").unwrap_err();
        assert_eq!(err.pos, 7);
        let err = parse("frobnicate(x)").unwrap_err();
        assert_eq!(err.pos, 0);
        assert!(err.msg.contains("frobnicate"));
    }

    #[test]
    fn free_variables_and_substitution() {
        let ctx = TypeContext::hex();
        let e = and(var("x"), exists(Class::V, exists(Class::E, var("y"))));
        assert_eq!(e.free_variables(), ["x", "y"].iter().map(|s| s.to_string()).collect());
        let s = e.substitute("y", &not(var("z")), &ctx).unwrap();
        assert_eq!(s.typecheck(&ctx).unwrap(), e.typecheck(&ctx).unwrap());
        assert!(!s.free_variables().contains("y"));
        let bad = layer("w", FieldType::bool(Locus::E));
        assert!(matches!(e.substitute("y", &bad, &ctx), Err(TypeError::Substitution { .. })));
    }
}
