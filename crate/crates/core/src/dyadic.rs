//! The dyadic family `𝒟 = ⋃_m 𝒟_m` of nested partitions of the tree into
//! singletons and sectors.
//!
//! `𝒟_0 = {X}`; for `m >= 1`, `𝒟_m` holds `{v}` for every `|v| <= m - 1`
//! and `T_v` for every `|v| = m`. A singleton first appears at scale
//! `|v| + 1` and persists at every later scale.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::MeasureParams;
use crate::region::Region;
use crate::tree::{TreeParams, VertexId};

/// A member of the dyadic family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "DyadicSetRepr", into = "DyadicSetRepr")]
pub enum DyadicSet {
    Whole,
    Sector(VertexId),
    Singleton(VertexId),
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum DyadicKind {
    Whole,
    Sector,
    Singleton,
}

#[derive(Serialize, Deserialize)]
struct DyadicSetRepr {
    kind: DyadicKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vertex: Option<VertexId>,
}

impl TryFrom<DyadicSetRepr> for DyadicSet {
    type Error = String;

    fn try_from(r: DyadicSetRepr) -> std::result::Result<Self, String> {
        match (r.kind, r.vertex) {
            (DyadicKind::Whole, None) => Ok(DyadicSet::Whole),
            (DyadicKind::Whole, Some(_)) => Err("a whole set takes no vertex".into()),
            (DyadicKind::Sector, Some(v)) if v.is_origin() => {
                Err("the sector of the origin is spelled {\"kind\":\"whole\"}".into())
            }
            (DyadicKind::Sector, Some(v)) => Ok(DyadicSet::Sector(v)),
            (DyadicKind::Singleton, Some(v)) => Ok(DyadicSet::Singleton(v)),
            (_, None) => Err("sector and singleton sets need a vertex".into()),
        }
    }
}

impl From<DyadicSet> for DyadicSetRepr {
    fn from(d: DyadicSet) -> Self {
        match d {
            DyadicSet::Whole => DyadicSetRepr { kind: DyadicKind::Whole, vertex: None },
            DyadicSet::Sector(v) => DyadicSetRepr { kind: DyadicKind::Sector, vertex: Some(v) },
            DyadicSet::Singleton(v) => DyadicSetRepr { kind: DyadicKind::Singleton, vertex: Some(v) },
        }
    }
}

impl fmt::Display for DyadicSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DyadicSet::Whole => write!(f, "X"),
            DyadicSet::Sector(v) => write!(f, "T_{v}"),
            DyadicSet::Singleton(v) => write!(f, "{{{v}}}"),
        }
    }
}

impl DyadicSet {
    /// The sector rooted at `v`, spelled `Whole` at the origin.
    pub fn sector(v: VertexId) -> Self {
        if v.is_origin() {
            DyadicSet::Whole
        } else {
            DyadicSet::Sector(v)
        }
    }

    /// Root of the set: the origin for `Whole`.
    pub fn root(&self) -> VertexId {
        match *self {
            DyadicSet::Whole => VertexId::ORIGIN,
            DyadicSet::Sector(v) | DyadicSet::Singleton(v) => v,
        }
    }

    /// First scale at which the set belongs to `𝒟`.
    pub fn first_scale(&self, tree: &TreeParams) -> u32 {
        match *self {
            DyadicSet::Whole => 0,
            DyadicSet::Sector(v) => tree.depth(v),
            DyadicSet::Singleton(v) => tree.depth(v) + 1,
        }
    }

    pub fn is_member_at_scale(&self, tree: &TreeParams, m: u32) -> bool {
        match *self {
            DyadicSet::Whole => m == 0,
            DyadicSet::Sector(v) => !v.is_origin() && tree.depth(v) == m,
            DyadicSet::Singleton(v) => m > tree.depth(v),
        }
    }

    /// Deterministic order: by first scale, then by vertex label.
    pub fn order_key(&self, tree: &TreeParams) -> (u32, u128) {
        (self.first_scale(tree), self.root().0)
    }

    pub fn contains(&self, tree: &TreeParams, x: VertexId) -> bool {
        match *self {
            DyadicSet::Whole => true,
            DyadicSet::Sector(v) => tree.in_sector(x, v),
            DyadicSet::Singleton(v) => x == v,
        }
    }

    pub fn is_singleton(&self) -> bool {
        matches!(self, DyadicSet::Singleton(_))
    }

    pub fn to_region(&self) -> Region {
        match *self {
            DyadicSet::Whole => Region::whole(),
            DyadicSet::Sector(v) => Region::sector(v),
            DyadicSet::Singleton(v) => Region::singleton(v),
        }
    }

    pub fn mass(&self, mp: &MeasureParams) -> f64 {
        match *self {
            DyadicSet::Whole => mp.total_mass(),
            DyadicSet::Sector(v) => mp.sector_or_total_mass(v),
            DyadicSet::Singleton(v) => mp.point_mass(v),
        }
    }
}

/// Lazy enumeration of `𝒟_m`: singletons of depth `< m`, then sectors of
/// depth `m`, both in label order.
#[derive(Debug, Clone)]
pub struct ScalePartition {
    scale: u32,
    next: u128,
    singleton_end: u128,
    last: u128,
    done: bool,
}

impl Iterator for ScalePartition {
    type Item = DyadicSet;

    fn next(&mut self) -> Option<DyadicSet> {
        if self.done {
            return None;
        }
        if self.scale == 0 {
            self.done = true;
            return Some(DyadicSet::Whole);
        }
        let k = self.next;
        if k == self.last {
            self.done = true;
        } else {
            self.next += 1;
        }
        Some(if k <= self.singleton_end {
            DyadicSet::Singleton(VertexId(k))
        } else {
            DyadicSet::Sector(VertexId(k))
        })
    }
}

/// `𝒟_m`, with `I_m + 1` members.
pub fn partition_at_scale(tree: &TreeParams, m: u32) -> Result<ScalePartition> {
    let last = tree.cumulative_count(m)?;
    let singleton_end = if m == 0 { 0 } else { tree.cumulative_count(m - 1)? };
    Ok(ScalePartition { scale: m, next: 0, singleton_end, last, done: false })
}

/// Members of the next scale contained in `d`.
pub fn refine(tree: &TreeParams, d: DyadicSet) -> Result<Vec<DyadicSet>> {
    match d {
        DyadicSet::Singleton(_) => Ok(vec![d]),
        DyadicSet::Whole | DyadicSet::Sector(_) => {
            let v = d.root();
            let mut out = vec![DyadicSet::Singleton(v)];
            out.extend(tree.children(v)?.into_iter().map(DyadicSet::Sector));
            Ok(out)
        }
    }
}

/// The member of `𝒟_{m-1}` containing `d ∈ 𝒟_m`.
pub fn dyadic_parent(tree: &TreeParams, d: DyadicSet, m: u32) -> Result<DyadicSet> {
    if m == 0 || !d.is_member_at_scale(tree, m) {
        return Err(Error::ScaleMismatch { set: d.to_string(), scale: m });
    }
    match d {
        DyadicSet::Whole => unreachable!("Whole is only a member at scale 0"),
        DyadicSet::Sector(v) => Ok(DyadicSet::sector(tree.parent(v)?)),
        DyadicSet::Singleton(v) => {
            if m == tree.depth(v) + 1 {
                Ok(DyadicSet::sector(v))
            } else {
                Ok(d)
            }
        }
    }
}

/// The `|x| + 2` dyadic sets containing `x`: `{x}`, the sectors of `x` and
/// of its ancestors below the origin, and `X`.
pub fn containing_sets(tree: &TreeParams, x: VertexId) -> Vec<DyadicSet> {
    let mut sets = Vec::with_capacity(tree.depth(x) as usize + 2);
    sets.push(DyadicSet::Singleton(x));
    let mut cur = x;
    while !cur.is_origin() {
        sets.push(DyadicSet::Sector(cur));
        cur = tree.parent(cur).expect("non-origin vertex");
    }
    sets.push(DyadicSet::Whole);
    sets
}

/// Outcome of checking `μ(D) <= μ(D') <= C_α μ(D)` over parent/child pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureRatioReport {
    pub max_scale: u32,
    pub pairs_checked: u64,
    pub violations: u64,
    pub max_ratio: f64,
    pub max_ratio_child: Option<DyadicSet>,
    pub max_ratio_parent: Option<DyadicSet>,
    pub doubling_constant: f64,
}

impl MeasureRatioReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks both measure inequalities for every `D ∈ 𝒟_m` with `1 <= m <= max_scale`
/// against its dyadic parent.
pub fn measure_ratio_check(mp: &MeasureParams, max_scale: u32) -> Result<MeasureRatioReport> {
    let tree = mp.tree();
    let c = mp.doubling_constant();
    let mut report = MeasureRatioReport {
        max_scale,
        pairs_checked: 0,
        violations: 0,
        max_ratio: 0.0,
        max_ratio_child: None,
        max_ratio_parent: None,
        doubling_constant: c,
    };
    for m in 1..=max_scale {
        for d in partition_at_scale(tree, m)? {
            let parent = dyadic_parent(tree, d, m)?;
            let (mc, mpar) = (d.mass(mp), parent.mass(mp));
            let ratio = mpar / mc;
            report.pairs_checked += 1;
            if !(mc <= mpar && mpar <= c * mc * (1.0 + 1e-12)) {
                report.violations += 1;
            }
            if ratio > report.max_ratio {
                report.max_ratio = ratio;
                report.max_ratio_child = Some(d);
                report.max_ratio_parent = Some(parent);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t2() -> TreeParams {
        TreeParams::new(2).unwrap()
    }

    fn v(k: u128) -> VertexId {
        VertexId(k)
    }

    #[test]
    fn partitions_at_small_scales() {
        let t = t2();
        assert_eq!(partition_at_scale(&t, 0).unwrap().collect::<Vec<_>>(), vec![DyadicSet::Whole]);
        assert_eq!(
            partition_at_scale(&t, 1).unwrap().collect::<Vec<_>>(),
            vec![
                DyadicSet::Singleton(v(0)),
                DyadicSet::Sector(v(1)),
                DyadicSet::Sector(v(2)),
                DyadicSet::Sector(v(3))
            ]
        );
        let p2: Vec<_> = partition_at_scale(&t, 2).unwrap().collect();
        assert_eq!(p2.len(), 10);
        assert_eq!(p2.iter().filter(|d| d.is_singleton()).count(), 4);
    }

    #[test]
    fn refine_examples() {
        let t = t2();
        assert_eq!(refine(&t, DyadicSet::Singleton(v(7))).unwrap(), vec![DyadicSet::Singleton(v(7))]);
        assert_eq!(refine(&t, DyadicSet::Whole).unwrap(), partition_at_scale(&t, 1).unwrap().collect::<Vec<_>>());
        assert_eq!(
            refine(&t, DyadicSet::Sector(v(1))).unwrap(),
            vec![DyadicSet::Singleton(v(1)), DyadicSet::Sector(v(4)), DyadicSet::Sector(v(5))]
        );
    }

    #[test]
    fn dyadic_parent_cases() {
        let t = t2();
        assert_eq!(dyadic_parent(&t, DyadicSet::Singleton(v(4)), 3).unwrap(), DyadicSet::Sector(v(4)));
        assert_eq!(dyadic_parent(&t, DyadicSet::Singleton(v(0)), 1).unwrap(), DyadicSet::Whole);
        assert_eq!(dyadic_parent(&t, DyadicSet::Sector(v(2)), 1).unwrap(), DyadicSet::Whole);
        assert_eq!(dyadic_parent(&t, DyadicSet::Sector(v(5)), 2).unwrap(), DyadicSet::Sector(v(1)));
        assert_eq!(dyadic_parent(&t, DyadicSet::Singleton(v(4)), 5).unwrap(), DyadicSet::Singleton(v(4)));
        assert!(matches!(
            dyadic_parent(&t, DyadicSet::Sector(v(5)), 3),
            Err(Error::ScaleMismatch { .. })
        ));
        assert!(dyadic_parent(&t, DyadicSet::Singleton(v(4)), 2).is_err());
        assert!(dyadic_parent(&t, DyadicSet::Whole, 0).is_err());
    }

    #[test]
    fn containing_sets_examples() {
        let t = t2();
        assert_eq!(containing_sets(&t, v(0)), vec![DyadicSet::Singleton(v(0)), DyadicSet::Whole]);
        assert_eq!(
            containing_sets(&t, v(4)),
            vec![DyadicSet::Singleton(v(4)), DyadicSet::Sector(v(4)), DyadicSet::Sector(v(1)), DyadicSet::Whole]
        );
    }

    #[test]
    fn json_shape() {
        let s = serde_json::to_string(&DyadicSet::Sector(v(4))).unwrap();
        assert_eq!(s, r#"{"kind":"sector","vertex":4}"#);
        assert_eq!(serde_json::to_string(&DyadicSet::Whole).unwrap(), r#"{"kind":"whole"}"#);
        let back: DyadicSet = serde_json::from_str(r#"{"kind":"singleton","vertex":0}"#).unwrap();
        assert_eq!(back, DyadicSet::Singleton(v(0)));
        assert!(serde_json::from_str::<DyadicSet>(r#"{"kind":"sector"}"#).is_err());
        assert!(serde_json::from_str::<DyadicSet>(r#"{"kind":"sector","vertex":0}"#).is_err());
    }

    #[test]
    fn ratio_check_reaches_doubling_constant() {
        let mp = MeasureParams::new(2, 2.0).unwrap();
        let r = measure_ratio_check(&mp, 6).unwrap();
        assert!(r.passed());
        assert!((r.max_ratio - 5.0).abs() < 1e-12);
        assert_eq!(r.max_ratio_parent, Some(DyadicSet::Whole));
    }
}
