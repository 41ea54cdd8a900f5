//! JSON documents for functions, atoms, decompositions and CZ outputs.

use std::fmt;

use num_complex::Complex64;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::czmax::CzOutput;
use crate::dyadic::DyadicSet;
use crate::error::{Error, Result};
use crate::function::TailConstantFunction;
use crate::hardy_bmo::{Atom, AtomicDecomposition};
use crate::measure::MeasureParams;
use crate::region::Region;
use crate::tree::{TreeParams, VertexId, DEFAULT_MAX_DEPTH};

/// `{"q", "alpha", "boundary_depth", "values": [[k, re, im], …]}`, listing
/// every label of the ball of radius `boundary_depth` exactly once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionDoc {
    pub q: u32,
    pub alpha: f64,
    pub boundary_depth: u32,
    pub values: Vec<(VertexId, f64, f64)>,
}

impl FunctionDoc {
    pub fn from_function(mp: &MeasureParams, f: &TailConstantFunction) -> Self {
        FunctionDoc {
            q: mp.q(),
            alpha: mp.alpha(),
            boundary_depth: f.boundary_depth(),
            values: f.values().iter().enumerate().map(|(k, c)| (VertexId(k as u128), c.re, c.im)).collect(),
        }
    }

    pub fn measure(&self, max_depth: u32) -> Result<MeasureParams> {
        MeasureParams::from_tree(TreeParams::with_max_depth(self.q, max_depth)?, self.alpha)
    }

    /// Checks completeness and builds the function on the given measure.
    pub fn to_function(&self, mp: &MeasureParams) -> Result<TailConstantFunction> {
        if self.q != mp.q() || self.alpha != mp.alpha() {
            return Err(Error::MalformedFunction(format!(
                "document is for q = {}, alpha = {} but the run uses q = {}, alpha = {}",
                self.q,
                self.alpha,
                mp.q(),
                mp.alpha()
            )));
        }
        let len = mp.tree().ball_len(self.boundary_depth)?;
        let mut slots: Vec<Option<Complex64>> = vec![None; len];
        for &(k, re, im) in &self.values {
            if !(re.is_finite() && im.is_finite()) {
                return Err(Error::MalformedFunction(format!("value at {k} is not finite")));
            }
            if k.0 >= len as u128 {
                return Err(Error::MalformedFunction(format!("{k} lies beyond depth {}", self.boundary_depth)));
            }
            let slot = &mut slots[k.index()];
            if slot.replace(Complex64::new(re, im)).is_some() {
                return Err(Error::MalformedFunction(format!("{k} is listed twice")));
            }
        }
        if let Some(missing) = slots.iter().position(Option::is_none) {
            return Err(Error::MalformedFunction(format!("missing value for v{missing}")));
        }
        TailConstantFunction::new(*mp.tree(), self.boundary_depth, slots.into_iter().flatten().collect())
    }

    /// Parses a document and the measure it names.
    pub fn parse(json: &str) -> Result<(MeasureParams, TailConstantFunction)> {
        let doc: FunctionDoc = serde_json::from_str(json).map_err(|e| Error::MalformedFunction(e.to_string()))?;
        let mp = doc.measure(DEFAULT_MAX_DEPTH)?;
        let f = doc.to_function(&mp)?;
        Ok((mp, f))
    }
}

/// An exponent in `(1, ∞]`, written as a number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent(pub f64);

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Exponent;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Exponent, E> {
                Ok(Exponent(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Exponent, E> {
                Ok(Exponent(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Exponent, E> {
                Ok(Exponent(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Exponent, E> {
                match v {
                    "inf" | "infinity" => Ok(Exponent(f64::INFINITY)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "AtomRepr", try_from = "AtomRepr")]
pub enum AtomDoc {
    Constant,
    Standard { set: DyadicSet, values: FunctionDoc, p: Exponent },
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AtomKind {
    Constant,
    Standard,
}

// A flat record rather than a tagged enum: tagged enums buffer their input
// and the buffer cannot hold 128-bit labels.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomRepr {
    kind: AtomKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    set: Option<DyadicSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<FunctionDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<Exponent>,
}

impl From<AtomDoc> for AtomRepr {
    fn from(a: AtomDoc) -> Self {
        match a {
            AtomDoc::Constant => AtomRepr { kind: AtomKind::Constant, set: None, values: None, p: None },
            AtomDoc::Standard { set, values, p } => {
                AtomRepr { kind: AtomKind::Standard, set: Some(set), values: Some(values), p: Some(p) }
            }
        }
    }
}

impl TryFrom<AtomRepr> for AtomDoc {
    type Error = String;

    fn try_from(r: AtomRepr) -> std::result::Result<Self, String> {
        match (r.kind, r.set, r.values, r.p) {
            (AtomKind::Constant, None, None, None) => Ok(AtomDoc::Constant),
            (AtomKind::Constant, ..) => Err("a constant atom takes no set, values or p".into()),
            (AtomKind::Standard, Some(set), Some(values), Some(p)) => Ok(AtomDoc::Standard { set, values, p }),
            (AtomKind::Standard, ..) => Err("a standard atom needs set, values and p".into()),
        }
    }
}

impl AtomDoc {
    pub fn from_atom(mp: &MeasureParams, a: &Atom) -> Self {
        match a {
            Atom::Constant => AtomDoc::Constant,
            Atom::Standard { set, values, p } => {
                AtomDoc::Standard { set: *set, values: FunctionDoc::from_function(mp, values), p: Exponent(*p) }
            }
        }
    }

    pub fn to_atom(&self, mp: &MeasureParams) -> Result<Atom> {
        Ok(match self {
            AtomDoc::Constant => Atom::Constant,
            AtomDoc::Standard { set, values, p } => Atom::Standard { set: *set, values: values.to_function(mp)?, p: p.0 },
        })
    }
}

/// `[[[re, im], atom], …]`.
pub type DecompositionDoc = Vec<((f64, f64), AtomDoc)>;

pub fn decomposition_doc(mp: &MeasureParams, d: &AtomicDecomposition) -> DecompositionDoc {
    d.terms.iter().map(|(c, a)| ((c.re, c.im), AtomDoc::from_atom(mp, a))).collect()
}

pub fn decomposition_from_doc(mp: &MeasureParams, doc: &DecompositionDoc) -> Result<AtomicDecomposition> {
    let terms = doc.iter().map(|((re, im), a)| Ok((Complex64::new(*re, *im), a.to_atom(mp)?))).collect::<Result<_>>()?;
    Ok(AtomicDecomposition { terms })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CzOutputDoc {
    pub lambda: f64,
    #[serde(rename = "Q")]
    pub q_sets: Vec<DyadicSet>,
    #[serde(rename = "F")]
    pub f_region: Region,
    pub f_family: Vec<DyadicSet>,
    pub g: FunctionDoc,
    pub b_parts: Vec<(DyadicSet, FunctionDoc)>,
}

impl CzOutputDoc {
    pub fn from_output(mp: &MeasureParams, out: &CzOutput) -> Self {
        CzOutputDoc {
            lambda: out.lambda,
            q_sets: out.q_sets.clone(),
            f_region: out.f_region.clone(),
            f_family: out.f_sets.clone(),
            g: FunctionDoc::from_function(mp, &out.g),
            b_parts: out.b_parts.iter().map(|(d, b)| (*d, FunctionDoc::from_function(mp, b))).collect(),
        }
    }

    pub fn to_output(&self, mp: &MeasureParams) -> Result<CzOutput> {
        Ok(CzOutput {
            lambda: self.lambda,
            q_sets: self.q_sets.clone(),
            f_sets: self.f_family.clone(),
            f_region: self.f_region.clone(),
            g: self.g.to_function(mp)?,
            b_parts: self.b_parts.iter().map(|(d, b)| Ok((*d, b.to_function(mp)?))).collect::<Result<_>>()?,
        })
    }
}
