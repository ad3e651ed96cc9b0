//! Fields: one boolean or small unsigned value per data-point of a locus.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::locus::Locus;
use crate::medium::{SimplexId, SimplicialMedium};

pub const MAX_WIDTH: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Elem {
    Bool,
    /// Unsigned integer of the given bit width (1..=8).
    Int(u8),
}

impl Elem {
    pub fn width(self) -> u8 {
        match self {
            Elem::Bool => 1,
            Elem::Int(w) => w,
        }
    }

    pub fn max_value(self) -> u8 {
        ((1u16 << self.width()) - 1) as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FieldType {
    pub locus: Locus,
    pub elem: Elem,
}

impl FieldType {
    pub fn bool(locus: Locus) -> Self {
        FieldType {
            locus,
            elem: Elem::Bool,
        }
    }

    pub fn int(locus: Locus, width: u8) -> Self {
        assert!((1..=MAX_WIDTH).contains(&width), "width {width} out of range");
        FieldType {
            locus,
            elem: Elem::Int(width),
        }
    }

    pub fn bool_v() -> Self {
        Self::bool(Locus::V)
    }

    pub fn width(self) -> u8 {
        self.elem.width()
    }

    pub fn is_bool(self) -> bool {
        self.elem == Elem::Bool
    }

    /// Bits per vertex: width times the arity of the father class.
    pub fn bit_density(self) -> usize {
        let per_father = if self.locus.is_simplicial() {
            1
        } else {
            // two transfer points per adjacency, one per side
            match self.locus.father() {
                crate::locus::Class::V => 6,
                crate::locus::Class::E => 2,
                crate::locus::Class::F => 3,
            }
        };
        self.width() as usize * self.locus.father().arity() * per_father
    }
}

impl fmt::Display for FieldType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.elem {
            Elem::Bool => write!(f, "bool{}", self.locus),
            Elem::Int(w) => write!(f, "int{w}{}", self.locus),
        }
    }
}

impl std::str::FromStr for FieldType {
    type Err = String;

    /// Parses `boolV`, `int2E`, `boolvE`, ...
    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(rest) = s.strip_prefix("bool") {
            return Ok(FieldType::bool(rest.parse()?));
        }
        if let Some(rest) = s.strip_prefix("int") {
            let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
            let w: u8 = digits.parse().map_err(|_| format!("missing width in `{s}`"))?;
            if !(1..=MAX_WIDTH).contains(&w) {
                return Err(format!("width {w} out of range in `{s}`"));
            }
            return Ok(FieldType::int(rest[digits.len()..].parse()?, w));
        }
        Err(format!("unknown field type `{s}`"))
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum FieldError {
    #[error("value {value} does not fit in {width} bits")]
    Overflow { value: u8, width: u8 },
    #[error("point {point} out of range for locus {locus} ({len} points)")]
    OutOfRange { point: u32, locus: Locus, len: usize },
    #[error("point of class {got} given for a field on locus {locus}")]
    WrongLocus { got: crate::locus::Class, locus: Locus },
    #[error("malformed field dump: {0}")]
    Format(String),
}

/// A field over one medium. Values are stored one per data-point in
/// canonical locus order (father index, then slot).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Field {
    ty: FieldType,
    values: Vec<u8>,
}

impl Field {
    pub fn constant(m: &SimplicialMedium, ty: FieldType, v: u8) -> Result<Self, FieldError> {
        if v > ty.elem.max_value() {
            return Err(FieldError::Overflow {
                value: v,
                width: ty.width(),
            });
        }
        Ok(Field {
            ty,
            values: vec![v; m.locus_len(ty.locus)],
        })
    }

    pub fn zeros(m: &SimplicialMedium, ty: FieldType) -> Self {
        Field {
            ty,
            values: vec![0; m.locus_len(ty.locus)],
        }
    }

    /// Wraps raw values; every value must fit the element width.
    pub fn from_values(ty: FieldType, values: Vec<u8>) -> Result<Self, FieldError> {
        if let Some(&v) = values.iter().find(|&&v| v > ty.elem.max_value()) {
            return Err(FieldError::Overflow {
                value: v,
                width: ty.width(),
            });
        }
        Ok(Field { ty, values })
    }

    /// Indicator field: 1 at the listed points, 0 elsewhere.
    pub fn from_points(m: &SimplicialMedium, ty: FieldType, points: &[u32]) -> Result<Self, FieldError> {
        let mut f = Self::zeros(m, ty);
        for &p in points {
            if p as usize >= f.values.len() {
                return Err(FieldError::OutOfRange {
                    point: p,
                    locus: ty.locus,
                    len: f.values.len(),
                });
            }
            f.values[p as usize] = 1;
        }
        Ok(f)
    }

    /// Indicator field over a simplicial locus given simplex ids.
    pub fn from_simplexes(m: &SimplicialMedium, ty: FieldType, points: &[SimplexId]) -> Result<Self, FieldError> {
        let idx = points
            .iter()
            .map(|s| {
                if !ty.locus.is_simplicial() || s.class != ty.locus.father() {
                    Err(FieldError::WrongLocus {
                        got: s.class,
                        locus: ty.locus,
                    })
                } else {
                    Ok(s.index)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_points(m, ty, &idx)
    }

    /// I.i.d. Bernoulli(density) values, reproducible per seed.
    pub fn random(m: &SimplicialMedium, ty: FieldType, rng_seed: u64, density: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        Self::random_with(m, ty, &mut rng, density)
    }

    pub fn random_with(m: &SimplicialMedium, ty: FieldType, rng: &mut impl Rng, density: f64) -> Self {
        assert!((0.0..=1.0).contains(&density), "density {density} outside [0, 1]");
        let values = (0..m.locus_len(ty.locus))
            .map(|_| u8::from(rng.gen_bool(density)))
            .collect();
        Field { ty, values }
    }

    pub fn ty(&self) -> FieldType {
        self.ty
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, p: u32) -> u8 {
        self.values[p as usize]
    }

    pub fn is_set(&self, p: u32) -> bool {
        self.values[p as usize] != 0
    }

    pub fn set(&mut self, p: u32, v: u8) {
        debug_assert!(v <= self.ty.elem.max_value());
        self.values[p as usize] = v;
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    /// Number of non-zero points.
    pub fn popcount(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }

    pub fn true_points(&self) -> Vec<u32> {
        (0..self.values.len() as u32).filter(|&p| self.is_set(p)).collect()
    }

    /// Storage in bits.
    pub fn memory_bits(&self) -> usize {
        self.values.len() * self.ty.width() as usize
    }

    /// Pointwise negation of a boolean field.
    pub fn not(&self) -> Field {
        assert!(self.ty.is_bool());
        Field {
            ty: self.ty,
            values: self.values.iter().map(|&v| v ^ 1).collect(),
        }
    }

    /// Pointwise `self ≤ other` on booleans.
    pub fn is_subset_of(&self, other: &Field) -> bool {
        self.values.iter().zip(&other.values).all(|(&a, &b)| a <= b)
    }

    pub fn dump(&self, medium_hash: &[u8; 32]) -> Vec<u8> {
        let w = self.ty.width() as usize;
        let mut out = Vec::with_capacity(48 + (self.values.len() * w).div_ceil(8));
        out.extend_from_slice(DUMP_MAGIC);
        out.push(DUMP_VERSION);
        out.extend_from_slice(medium_hash);
        out.push(self.ty.locus.index() as u8);
        out.push(match self.ty.elem {
            Elem::Bool => 0,
            Elem::Int(w) => w,
        });
        out.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        let mut bits = vec![0u8; (self.values.len() * w).div_ceil(8)];
        for (i, &v) in self.values.iter().enumerate() {
            for b in 0..w {
                if (v >> b) & 1 == 1 {
                    let k = i * w + b;
                    bits[k / 8] |= 1 << (k % 8);
                }
            }
        }
        out.extend_from_slice(&bits);
        out
    }

    /// Parses a dump, returning the medium hash it was taken on.
    pub fn load(bytes: &[u8]) -> Result<([u8; 32], Field), FieldError> {
        let bad = |s: &str| FieldError::Format(s.to_string());
        if bytes.len() < HEADER_LEN || &bytes[..4] != DUMP_MAGIC {
            return Err(bad("missing magic"));
        }
        if bytes[4] != DUMP_VERSION {
            return Err(bad("unsupported version"));
        }
        let hash: [u8; 32] = bytes[5..37].try_into().unwrap();
        let locus = *Locus::ALL.get(bytes[37] as usize).ok_or_else(|| bad("unknown locus tag"))?;
        let elem = match bytes[38] {
            0 => Elem::Bool,
            w @ 1..=MAX_WIDTH => Elem::Int(w),
            _ => return Err(bad("bad width")),
        };
        let n = u64::from_le_bytes(bytes[39..47].try_into().unwrap()) as usize;
        let w = elem.width() as usize;
        let body = &bytes[HEADER_LEN..];
        if body.len() != (n * w).div_ceil(8) {
            return Err(bad("payload length does not match count"));
        }
        let values = (0..n)
            .map(|i| {
                (0..w).fold(0u8, |acc, b| {
                    let k = i * w + b;
                    acc | (((body[k / 8] >> (k % 8)) & 1) << b)
                })
            })
            .collect();
        Ok((hash, Field { ty: FieldType { locus, elem }, values }))
    }

    /// Human-readable form: boolean fields list their true points.
    pub fn to_debug_json(&self) -> serde_json::Value {
        match self.ty.elem {
            Elem::Bool => serde_json::json!({
                "type": self.ty.to_string(),
                "len": self.values.len(),
                "true_points": self.true_points(),
            }),
            Elem::Int(_) => serde_json::json!({
                "type": self.ty.to_string(),
                "len": self.values.len(),
                "values": self.values,
            }),
        }
    }
}

const DUMP_MAGIC: &[u8; 4] = b"SPFD";
const DUMP_VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 32 + 1 + 1 + 8;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use proptest::prelude::*;

    fn hex4() -> SimplicialMedium {
        SimplicialMedium::hex_torus(4, 4).unwrap()
    }

    #[test]
    fn constants() {
        let m = hex4();
        assert_eq!(Field::constant(&m, FieldType::bool_v(), 0).unwrap().popcount(), 0);
        let f = Field::constant(&m, FieldType::int(Locus::E, 2), 3).unwrap();
        assert!(f.values().iter().all(|&v| v == 3));
        assert_eq!(f.len(), 48);
        assert_eq!(Field::constant(&m, FieldType::bool(Locus::F), 1).unwrap().popcount(), 32);
        assert!(matches!(
            Field::constant(&m, FieldType::int(Locus::E, 2), 4),
            Err(FieldError::Overflow { .. })
        ));
    }

    #[test]
    fn points_and_errors() {
        let m = hex4();
        let f = Field::from_points(&m, FieldType::bool_v(), &[1, 5, 7]).unwrap();
        assert_eq!(f.popcount(), 3);
        assert!(f.is_set(5) && !f.is_set(6));
        assert!(Field::from_points(&m, FieldType::bool_v(), &[16]).is_err());
        let err = Field::from_simplexes(&m, FieldType::bool_v(), &[SimplexId::edge(0)]).unwrap_err();
        assert!(matches!(err, FieldError::WrongLocus { .. }));
    }

    #[test]
    fn random_extremes_and_balance() {
        let m = SimplicialMedium::hex_torus(50, 50).unwrap();
        let ty = FieldType::bool(Locus::F);
        assert_eq!(Field::random(&m, ty, 1, 0.0).popcount(), 0);
        assert_eq!(Field::random(&m, ty, 1, 1.0).popcount(), 5000);
        // binomial(5000, 1/2): sigma ~ 35.4
        let k = Field::random(&m, FieldType::bool(Locus::Fv), 9, 0.5);
        let n = k.len() as f64;
        assert!((k.popcount() as f64 - n / 2.0).abs() < 4.0 * (n / 4.0).sqrt());
    }

    #[test]
    fn bit_density_matches_memory_on_hex() {
        let m = SimplicialMedium::hex_torus(5, 3).unwrap();
        for locus in Locus::ALL {
            let ty = FieldType::int(locus, 2);
            let f = Field::zeros(&m, ty);
            assert_eq!(f.memory_bits(), ty.bit_density() * m.num_vertices(), "{locus}");
        }
    }

    #[test]
    fn type_names_round_trip() {
        for s in ["boolV", "int2E", "boolvE", "int3fV"] {
            assert_eq!(s.parse::<FieldType>().unwrap().to_string(), s);
        }
        assert!("int9V".parse::<FieldType>().is_err());
    }

    proptest! {
        #[test]
        fn dump_round_trip(seed in any::<u64>(), w in 1u8..=8, li in 0usize..9) {
            let m = SimplicialMedium::hex_torus(3, 3).unwrap();
            let ty = FieldType::int(Locus::ALL[li], w);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals = (0..m.locus_len(ty.locus)).map(|_| rng.gen_range(0..=ty.elem.max_value())).collect();
            let f = Field::from_values(ty, vals).unwrap();
            let h = m.medium_hash();
            let (h2, g) = Field::load(&f.dump(&h)).unwrap();
            prop_assert_eq!(h2, h);
            prop_assert_eq!(g, f);
        }
    }
}
