//! Simplex classes and the nine locus (three simplicial, six transfer).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Class of a simplex of the planar graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Class {
    V,
    E,
    F,
}

impl Class {
    pub const ALL: [Class; 3] = [Class::V, Class::E, Class::F];

    /// Proportion of simplexes of this class per vertex on a maximal planar graph.
    pub fn arity(self) -> usize {
        match self {
            Class::V => 1,
            Class::E => 3,
            Class::F => 2,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// The class that is neither `self` nor `other`.
    pub fn third(self, other: Class) -> Class {
        debug_assert_ne!(self, other);
        Class::ALL
            .into_iter()
            .find(|&c| c != self && c != other)
            .unwrap()
    }

    pub fn lower(self) -> char {
        match self {
            Class::V => 'v',
            Class::E => 'e',
            Class::F => 'f',
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Class::V => "V",
            Class::E => "E",
            Class::F => "F",
        };
        f.write_str(s)
    }
}

/// A locus: a set of data-points hosting field values.
///
/// Transfer locus are written `xY`: `Y` is the father (the nearest simplicial
/// locus) and `x` the adjacent class the point faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Locus {
    V,
    E,
    F,
    #[serde(rename = "eV")]
    Ev,
    #[serde(rename = "vE")]
    Ve,
    #[serde(rename = "eF")]
    Ef,
    #[serde(rename = "fE")]
    Fe,
    #[serde(rename = "vF")]
    Vf,
    #[serde(rename = "fV")]
    Fv,
}

impl Locus {
    pub const ALL: [Locus; 9] = [
        Locus::V,
        Locus::E,
        Locus::F,
        Locus::Ev,
        Locus::Ve,
        Locus::Ef,
        Locus::Fe,
        Locus::Vf,
        Locus::Fv,
    ];
    pub const TRANSFER: [Locus; 6] = [
        Locus::Ev,
        Locus::Ve,
        Locus::Ef,
        Locus::Fe,
        Locus::Vf,
        Locus::Fv,
    ];

    pub fn simplicial(class: Class) -> Locus {
        match class {
            Class::V => Locus::V,
            Class::E => Locus::E,
            Class::F => Locus::F,
        }
    }

    /// Transfer locus with father `father` facing class `toward`.
    pub fn transfer(toward: Class, father: Class) -> Option<Locus> {
        use Class::*;
        Some(match (toward, father) {
            (E, V) => Locus::Ev,
            (V, E) => Locus::Ve,
            (E, F) => Locus::Ef,
            (F, E) => Locus::Fe,
            (V, F) => Locus::Vf,
            (F, V) => Locus::Fv,
            _ => return None,
        })
    }

    pub fn is_simplicial(self) -> bool {
        matches!(self, Locus::V | Locus::E | Locus::F)
    }

    pub fn is_transfer(self) -> bool {
        !self.is_simplicial()
    }

    /// Father class: the class itself for simplicial locus.
    pub fn father(self) -> Class {
        match self {
            Locus::V | Locus::Ev | Locus::Fv => Class::V,
            Locus::E | Locus::Ve | Locus::Fe => Class::E,
            Locus::F | Locus::Ef | Locus::Vf => Class::F,
        }
    }

    /// Class the transfer point faces (lower-case letter).
    pub fn toward(self) -> Option<Class> {
        match self {
            Locus::Ve | Locus::Vf => Some(Class::V),
            Locus::Ev | Locus::Ef => Some(Class::E),
            Locus::Fe | Locus::Fv => Some(Class::F),
            _ => None,
        }
    }

    /// Paired locus across the segment: `xY` ↔ `yX`.
    pub fn partner(self) -> Option<Locus> {
        let toward = self.toward()?;
        Locus::transfer(self.father(), toward)
    }

    /// Brother locus: same father, facing the third class.
    pub fn brother(self) -> Option<Locus> {
        let toward = self.toward()?;
        let father = self.father();
        Locus::transfer(father.third(toward), father)
    }

    /// Whether this transfer locus sits on even positions of the father's
    /// interleaved cycle (eV, vE, vF); its brother holds the odd positions.
    pub(crate) fn is_leading(self) -> bool {
        matches!(self, Locus::Ev | Locus::Ve | Locus::Vf)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Locus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Locus::V => "V",
            Locus::E => "E",
            Locus::F => "F",
            Locus::Ev => "eV",
            Locus::Ve => "vE",
            Locus::Ef => "eF",
            Locus::Fe => "fE",
            Locus::Vf => "vF",
            Locus::Fv => "fV",
        };
        f.write_str(s)
    }
}

impl FromStr for Locus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Locus::ALL
            .into_iter()
            .find(|l| l.to_string() == s)
            .ok_or_else(|| format!("unknown locus `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partner_and_brother_tables() {
        assert_eq!(Locus::Ev.partner(), Some(Locus::Ve));
        assert_eq!(Locus::Ve.partner(), Some(Locus::Ev));
        assert_eq!(Locus::Fv.partner(), Some(Locus::Vf));
        assert_eq!(Locus::Ef.partner(), Some(Locus::Fe));
        assert_eq!(Locus::Ev.brother(), Some(Locus::Fv));
        assert_eq!(Locus::Ve.brother(), Some(Locus::Fe));
        assert_eq!(Locus::Vf.brother(), Some(Locus::Ef));
        assert_eq!(Locus::V.partner(), None);
        for l in Locus::TRANSFER {
            assert_eq!(l.partner().unwrap().partner(), Some(l));
            assert_eq!(l.brother().unwrap().brother(), Some(l));
            assert_eq!(l.brother().unwrap().father(), l.father());
            assert_ne!(l.is_leading(), l.brother().unwrap().is_leading());
        }
    }

    #[test]
    fn arity_times_coarity_on_hex() {
        // co-arity on the hexagonal lattice: V has 6 neighbours of each other class,
        // E has 2, F has 3.
        let coarity = [6, 2, 3];
        for c in Class::ALL {
            assert_eq!(c.arity() * coarity[c.index()], 6);
        }
    }

    #[test]
    fn locus_names_round_trip() {
        for l in Locus::ALL {
            assert_eq!(l.to_string().parse::<Locus>().unwrap(), l);
        }
    }
}
