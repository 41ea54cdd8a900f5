//! Finite unions of sectors and singletons, with exact measure.
//!
//! A region is canonical when no singleton lies inside one of its sectors
//! and no sector lies inside another. Canonical form does not merge `{v}`
//! together with all the sectors of its children into `T_v`; that is what
//! [`Region::normalize`] is for.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::MeasureParams;
use crate::tree::{TreeParams, VertexId};

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    /// Roots of the included sectors; the origin stands for `X`.
    pub sectors: BTreeSet<VertexId>,
    pub singletons: BTreeSet<VertexId>,
}

impl Region {
    pub fn empty() -> Self {
        Region::default()
    }

    pub fn whole() -> Self {
        Region::sector(VertexId::ORIGIN)
    }

    pub fn sector(v: VertexId) -> Self {
        Region { sectors: BTreeSet::from([v]), singletons: BTreeSet::new() }
    }

    pub fn singleton(v: VertexId) -> Self {
        Region { sectors: BTreeSet::new(), singletons: BTreeSet::from([v]) }
    }

    /// Builds a region and checks that it is canonical.
    pub fn from_parts(
        tree: &TreeParams,
        sectors: impl IntoIterator<Item = VertexId>,
        singletons: impl IntoIterator<Item = VertexId>,
    ) -> Result<Self> {
        let r = Region { sectors: sectors.into_iter().collect(), singletons: singletons.into_iter().collect() };
        r.check_canonical(tree)?;
        Ok(r)
    }

    pub fn is_empty(&self) -> bool {
        self.sectors.is_empty() && self.singletons.is_empty()
    }

    /// Whether some ancestor of `x` (itself included when `inclusive`) is a
    /// sector root.
    fn covered(&self, tree: &TreeParams, x: VertexId, inclusive: bool) -> bool {
        if self.sectors.is_empty() {
            return false;
        }
        let mut cur = x;
        if inclusive && self.sectors.contains(&cur) {
            return true;
        }
        while let Ok(p) = tree.parent(cur) {
            if self.sectors.contains(&p) {
                return true;
            }
            cur = p;
        }
        false
    }

    pub fn check_canonical(&self, tree: &TreeParams) -> Result<()> {
        if let Some(s) = self.singletons.iter().find(|s| self.covered(tree, **s, true)) {
            return Err(Error::RegionNotCanonical(format!("singleton {s} lies in an included sector")));
        }
        if let Some(s) = self.sectors.iter().find(|s| self.covered(tree, **s, false)) {
            return Err(Error::RegionNotCanonical(format!("sector {s} lies in another included sector")));
        }
        Ok(())
    }

    pub fn contains(&self, tree: &TreeParams, x: VertexId) -> bool {
        self.singletons.contains(&x) || self.covered(tree, x, true)
    }

    /// Exact measure; rejects non-canonical input.
    pub fn mass(&self, mp: &MeasureParams) -> Result<f64> {
        self.check_canonical(mp.tree())?;
        let sectors: f64 = self.sectors.iter().map(|v| mp.sector_or_total_mass(*v)).sum();
        let points: f64 = self.singletons.iter().map(|v| mp.point_mass(*v)).sum();
        Ok(sectors + points)
    }

    fn canonicalized(tree: &TreeParams, sectors: BTreeSet<VertexId>, singletons: BTreeSet<VertexId>) -> Self {
        let staged = Region { sectors, singletons: BTreeSet::new() };
        let sectors: BTreeSet<VertexId> =
            staged.sectors.iter().copied().filter(|s| !staged.covered(tree, *s, false)).collect();
        let staged = Region { sectors, singletons: BTreeSet::new() };
        let singletons = singletons.into_iter().filter(|s| !staged.covered(tree, *s, true)).collect();
        Region { sectors: staged.sectors, singletons }
    }

    pub fn union(&self, tree: &TreeParams, other: &Region) -> Region {
        let sectors = self.sectors.union(&other.sectors).copied().collect();
        let singletons = self.singletons.union(&other.singletons).copied().collect();
        Region::canonicalized(tree, sectors, singletons)
    }

    pub fn intersect(&self, tree: &TreeParams, other: &Region) -> Region {
        let mut sectors = BTreeSet::new();
        sectors.extend(self.sectors.iter().copied().filter(|s| other.covered(tree, *s, true)));
        sectors.extend(other.sectors.iter().copied().filter(|s| self.covered(tree, *s, true)));
        let mut singletons = BTreeSet::new();
        singletons.extend(self.singletons.iter().copied().filter(|s| other.contains(tree, *s)));
        singletons.extend(other.singletons.iter().copied().filter(|s| self.contains(tree, *s)));
        Region::canonicalized(tree, sectors, singletons)
    }

    /// `X \ self`: along the paths leading to the region's pieces, every
    /// uncovered vertex becomes a singleton and every off-path child
    /// becomes a sector.
    pub fn complement(&self, tree: &TreeParams) -> Region {
        if self.is_empty() {
            return Region::whole();
        }
        let mut on_path = BTreeSet::new();
        for &v in self.sectors.iter().chain(self.singletons.iter()) {
            let mut cur = v;
            loop {
                if !on_path.insert(cur) {
                    break;
                }
                match tree.parent(cur) {
                    Ok(p) => cur = p,
                    Err(_) => break,
                }
            }
        }
        let mut out = Region::empty();
        let mut stack = vec![VertexId::ORIGIN];
        while let Some(v) = stack.pop() {
            if self.sectors.contains(&v) {
                continue;
            }
            if !self.singletons.contains(&v) {
                out.singletons.insert(v);
            }
            for c in tree.children(v).expect("labels on a path to a finite vertex") {
                if on_path.contains(&c) {
                    stack.push(c);
                } else {
                    out.sectors.insert(c);
                }
            }
        }
        out
    }

    pub fn difference(&self, tree: &TreeParams, other: &Region) -> Region {
        self.intersect(tree, &other.complement(tree))
    }

    /// Merges `{v}` together with the sectors of all children of `v` into
    /// `T_v`, repeatedly, giving the coarsest representation of the set.
    pub fn normalize(&self, tree: &TreeParams) -> Region {
        let mut out = self.clone();
        let mut candidates: Vec<VertexId> = out.singletons.iter().copied().collect();
        candidates.sort_by_key(|v| std::cmp::Reverse((tree.depth(*v), v.0)));
        for v in candidates {
            let children = tree.children(v).expect("finite label");
            if children.iter().all(|c| out.sectors.contains(c)) {
                for c in &children {
                    out.sectors.remove(c);
                }
                out.singletons.remove(&v);
                out.sectors.insert(v);
            }
        }
        out
    }

    /// Equality as sets of vertices.
    pub fn set_eq(&self, tree: &TreeParams, other: &Region) -> bool {
        self.normalize(tree) == other.normalize(tree)
    }

    pub fn is_disjoint(&self, tree: &TreeParams, other: &Region) -> bool {
        self.intersect(tree, other).is_empty()
    }

    pub fn is_subset(&self, tree: &TreeParams, other: &Region) -> bool {
        self.difference(tree, other).is_empty()
    }
}
