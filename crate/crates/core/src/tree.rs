//! Breadth-first vertex labels and Gromov geometry of the rooted
//! q-homogeneous tree.
//!
//! Vertex `0` is the origin `o`; its `q + 1` neighbours are `1..=q+1`, and
//! every other vertex `k` has the `q` successors `q*k + 2 ..= q*k + q + 1`.
//! With this labeling each sphere `S(o, m)` is the consecutive block
//! `I_{m-1} + 1 ..= I_m`, where `I_m = #B(o, m) - 1`, and the descendants of a
//! vertex at any fixed depth form a consecutive block as well.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicSet;
use crate::error::{Error, Result};

/// Default cap on the depths the library will index.
pub const DEFAULT_MAX_DEPTH: u32 = 32;

/// Distance from an integer below which `ln r` is treated as that integer.
pub const LOG_EXACTNESS_GUARD: f64 = 1e-12;

/// Breadth-first label of a tree vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub u128);

impl VertexId {
    pub const ORIGIN: VertexId = VertexId(0);

    pub fn is_origin(self) -> bool {
        self.0 == 0
    }

    /// Position of the vertex in a dense breadth-first array.
    pub fn index(self) -> usize {
        usize::try_from(self.0).expect("vertex label exceeds the address space")
    }
}

impl From<u128> for VertexId {
    fn from(k: u128) -> Self {
        VertexId(k)
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Shape of the tree: every vertex has `q + 1` neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    q: u32,
    max_depth: u32,
}

impl TreeParams {
    pub fn new(q: u32) -> Result<Self> {
        Self::with_max_depth(q, DEFAULT_MAX_DEPTH)
    }

    pub fn with_max_depth(q: u32, max_depth: u32) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidParams(format!("q must be at least 2, got {q}")));
        }
        Ok(TreeParams { q, max_depth })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    fn check_depth(&self, m: u32) -> Result<()> {
        if m > self.max_depth {
            return Err(Error::DepthLimit { depth: m, limit: self.max_depth });
        }
        Ok(())
    }

    /// `I_m = #B(o, m) - 1`, the largest label at depth `m`.
    pub fn cumulative_count(&self, m: u32) -> Result<u128> {
        self.check_depth(m)?;
        let q = self.q as u128;
        let mut total: u128 = 0;
        // sphere sizes: (q + 1) q^{d-1}
        let mut sphere: u128 = q + 1;
        for d in 1..=m {
            total = total.checked_add(sphere).ok_or(Error::Overflow("cumulative_count"))?;
            if d < m {
                sphere = sphere.checked_mul(q).ok_or(Error::Overflow("cumulative_count"))?;
            }
        }
        Ok(total)
    }

    /// Labels of the sphere `S(o, m)` as an inclusive range.
    pub fn level_range(&self, m: u32) -> Result<(u128, u128)> {
        if m == 0 {
            return Ok((0, 0));
        }
        Ok((self.cumulative_count(m - 1)? + 1, self.cumulative_count(m)?))
    }

    /// Number of vertices with depth at most `m`, as a dense array length.
    pub fn ball_len(&self, m: u32) -> Result<usize> {
        let last = self.cumulative_count(m)?;
        usize::try_from(last + 1).map_err(|_| Error::Overflow("ball_len"))
    }

    /// `|v|`, the graph distance from the origin.
    pub fn depth(&self, v: VertexId) -> u32 {
        let q = self.q as u128;
        let k = v.0;
        let mut last: u128 = 0;
        let mut sphere: u128 = q + 1;
        let mut m = 0u32;
        while k > last {
            m += 1;
            match last.checked_add(sphere) {
                Some(next) => last = next,
                // the level ends beyond u128::MAX, so it contains k
                None => return m,
            }
            sphere = sphere.saturating_mul(q);
        }
        m
    }

    pub fn parent(&self, v: VertexId) -> Result<VertexId> {
        let k = v.0;
        let q = self.q as u128;
        if k == 0 {
            Err(Error::OriginHasNoParent)
        } else if k <= q + 1 {
            Ok(VertexId::ORIGIN)
        } else {
            Ok(VertexId((k - 2) / q))
        }
    }

    /// First and last label of the successors of `v`.
    pub fn child_range(&self, v: VertexId) -> Result<(u128, u128)> {
        let q = self.q as u128;
        if v.is_origin() {
            return Ok((1, q + 1));
        }
        let base = v.0.checked_mul(q).ok_or(Error::Overflow("children"))?;
        let hi = base.checked_add(q + 1).ok_or(Error::Overflow("children"))?;
        Ok((base + 2, hi))
    }

    pub fn children(&self, v: VertexId) -> Result<Vec<VertexId>> {
        let (lo, hi) = self.child_range(v)?;
        Ok((lo..=hi).map(VertexId).collect())
    }

    /// `p^l(v)`.
    pub fn iterated_parent(&self, v: VertexId, l: u32) -> Result<VertexId> {
        let depth = self.depth(v);
        if l > depth {
            return Err(Error::PowerExceedsDepth { power: l, depth });
        }
        let mut cur = v;
        for _ in 0..l {
            cur = self.parent(cur)?;
        }
        Ok(cur)
    }

    /// The ancestor of `v` lying at depth `d <= |v|`.
    pub fn ancestor_at_depth(&self, v: VertexId, d: u32) -> Result<VertexId> {
        let depth = self.depth(v);
        if d > depth {
            return Err(Error::PowerExceedsDepth { power: d, depth });
        }
        self.iterated_parent(v, depth - d)
    }

    /// Whether `x` lies in the sector `T_v`.
    pub fn in_sector(&self, x: VertexId, v: VertexId) -> bool {
        let dv = self.depth(v);
        let dx = self.depth(x);
        dx >= dv && self.iterated_parent(x, dx - dv).map(|a| a == v).unwrap_or(false)
    }

    /// `x ∧ y`: the deepest vertex whose sector contains both.
    pub fn confluent(&self, x: VertexId, y: VertexId) -> VertexId {
        let (mut a, mut b) = (x, y);
        let (mut da, mut db) = (self.depth(a), self.depth(b));
        while da > db {
            a = self.parent(a).expect("depth > 0");
            da -= 1;
        }
        while db > da {
            b = self.parent(b).expect("depth > 0");
            db -= 1;
        }
        while a != b {
            a = self.parent(a).expect("distinct vertices at depth 0 cannot occur");
            b = self.parent(b).expect("distinct vertices at depth 0 cannot occur");
        }
        a
    }

    /// `ρ(x, y) = e^{-|x ∧ y|}` for `x ≠ y`, and `0` on the diagonal.
    pub fn gromov_distance(&self, x: VertexId, y: VertexId) -> f64 {
        if x == y {
            0.0
        } else {
            (-(self.depth(self.confluent(x, y)) as f64)).exp()
        }
    }

    /// The open ball `{y : ρ(x, y) < r}`.
    ///
    /// For `r <= 1` the ball is the sector of the ancestor of `x` at depth
    /// `⌊-ln r⌋ + 1`, or `{x}` when that depth exceeds `|x|`. Values of
    /// `-ln r` within [`LOG_EXACTNESS_GUARD`] of an integer `n` are read as
    /// `r = e^{-n}` exactly.
    pub fn gromov_ball(&self, x: VertexId, r: f64) -> Result<GromovBall> {
        if r.is_nan() || r <= 0.0 {
            return Err(Error::NonPositiveRadius(r));
        }
        let resolved = if r > 1.0 {
            DyadicSet::Whole
        } else {
            let s = -r.ln();
            let nearest = s.round();
            let floor = if (s - nearest).abs() <= LOG_EXACTNESS_GUARD { nearest } else { s.floor() };
            let root_depth = floor + 1.0;
            let dx = self.depth(x);
            if root_depth > dx as f64 {
                DyadicSet::Singleton(x)
            } else {
                DyadicSet::Sector(self.ancestor_at_depth(x, root_depth as u32)?)
            }
        };
        Ok(GromovBall { center: x, radius: r, resolved })
    }

    /// The `|x| + 2` distinct balls centred at `x`, from the singleton up to
    /// the whole tree, each with a representative radius.
    pub fn distinct_balls(&self, x: VertexId) -> Vec<GromovBall> {
        let dx = self.depth(x);
        let mut balls = Vec::with_capacity(dx as usize + 2);
        balls.push(GromovBall {
            center: x,
            radius: (-(dx as f64)).exp(),
            resolved: DyadicSet::Singleton(x),
        });
        let mut anc = x;
        for d in (1..=dx).rev() {
            balls.push(GromovBall {
                center: x,
                radius: (-((d - 1) as f64)).exp(),
                resolved: DyadicSet::Sector(anc),
            });
            if d > 1 {
                anc = self.parent(anc).expect("depth > 1");
            }
        }
        balls.push(GromovBall { center: x, radius: std::f64::consts::E, resolved: DyadicSet::Whole });
        balls
    }

    /// Labels of `T_v` at depth `d >= |v|`, as an inclusive range.
    pub fn sector_level_range(&self, v: VertexId, d: u32) -> Result<(u128, u128)> {
        let dv = self.depth(v);
        if d < dv {
            return Err(Error::PowerExceedsDepth { power: dv - d, depth: d });
        }
        if v.is_origin() {
            return self.level_range(d);
        }
        let q = self.q as u128;
        let (mut lo, mut hi) = (v.0, v.0);
        for _ in dv..d {
            lo = lo.checked_mul(q).and_then(|x| x.checked_add(2)).ok_or(Error::Overflow("sector_level_range"))?;
            hi = hi
                .checked_mul(q)
                .and_then(|x| x.checked_add(q + 1))
                .ok_or(Error::Overflow("sector_level_range"))?;
        }
        Ok((lo, hi))
    }
}

/// A Gromov ball together with the set it resolves to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GromovBall {
    pub center: VertexId,
    pub radius: f64,
    pub resolved: DyadicSet,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t2() -> TreeParams {
        TreeParams::new(2).unwrap()
    }

    #[test]
    fn cumulative_counts() {
        let t = t2();
        assert_eq!(t.cumulative_count(0).unwrap(), 0);
        assert_eq!(t.cumulative_count(1).unwrap(), 3);
        assert_eq!(t.cumulative_count(2).unwrap(), 9);
        // closed form (q^{m+1} + q^m - q - 1) / (q - 1)
        let t3 = TreeParams::new(3).unwrap();
        for m in 1..10u32 {
            let q = 3u128;
            let closed = (q.pow(m + 1) + q.pow(m) - q - 1) / (q - 1);
            assert_eq!(t3.cumulative_count(m).unwrap(), closed);
        }
    }

    #[test]
    fn cumulative_count_overflow_is_reported() {
        let t = TreeParams::with_max_depth(16, 40).unwrap();
        assert_eq!(t.cumulative_count(40), Err(Error::Overflow("cumulative_count")));
        assert!(matches!(t.cumulative_count(41), Err(Error::DepthLimit { .. })));
    }

    #[test]
    fn q_below_two_rejected() {
        assert!(TreeParams::new(1).is_err());
    }

    #[test]
    fn depth_examples() {
        let t = t2();
        assert_eq!(t.depth(VertexId(0)), 0);
        assert_eq!(t.depth(VertexId(3)), 1);
        assert_eq!(t.depth(VertexId(4)), 2);
        assert_eq!(t.depth(VertexId(u128::MAX)), t.depth(VertexId(u128::MAX - 1)));
    }

    #[test]
    fn parent_and_children_examples() {
        let t = t2();
        assert_eq!(t.parent(VertexId(1)).unwrap(), VertexId(0));
        assert_eq!(t.parent(VertexId(5)).unwrap(), VertexId(1));
        assert_eq!(t.parent(VertexId(9)).unwrap(), VertexId(3));
        assert_eq!(t.parent(VertexId(0)), Err(Error::OriginHasNoParent));
        assert_eq!(t.children(VertexId(0)).unwrap(), vec![VertexId(1), VertexId(2), VertexId(3)]);
        assert_eq!(t.children(VertexId(1)).unwrap(), vec![VertexId(4), VertexId(5)]);
        let t3 = TreeParams::new(3).unwrap();
        assert_eq!(t3.children(VertexId(2)).unwrap(), vec![VertexId(8), VertexId(9), VertexId(10)]);
    }

    #[test]
    fn iterated_parent_examples() {
        let t = t2();
        assert_eq!(t.iterated_parent(VertexId(7), 0).unwrap(), VertexId(7));
        assert_eq!(t.iterated_parent(VertexId(4), 2).unwrap(), VertexId(0));
        assert_eq!(t.iterated_parent(VertexId(9), 1).unwrap(), VertexId(3));
        assert_eq!(
            t.iterated_parent(VertexId(4), 3),
            Err(Error::PowerExceedsDepth { power: 3, depth: 2 })
        );
    }

    #[test]
    fn confluent_examples() {
        let t = t2();
        for k in 0..30u128 {
            assert_eq!(t.confluent(VertexId(k), VertexId(k)), VertexId(k));
            assert_eq!(t.confluent(VertexId(k), VertexId(0)), VertexId(0));
        }
        assert_eq!(t.confluent(VertexId(4), VertexId(5)), VertexId(1));
    }

    #[test]
    fn gromov_distance_examples() {
        let t = t2();
        assert_eq!(t.gromov_distance(VertexId(6), VertexId(6)), 0.0);
        assert_eq!(t.gromov_distance(VertexId(0), VertexId(7)), 1.0);
        assert!((t.gromov_distance(VertexId(4), VertexId(5)) - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn gromov_ball_examples() {
        let t = t2();
        // a depth-3 vertex: 10 is the first label at depth 3
        let x = VertexId(10);
        assert_eq!(t.depth(x), 3);
        let r = (-3f64).exp();
        assert_eq!(t.gromov_ball(x, r).unwrap().resolved, DyadicSet::Singleton(x));
        let p = t.parent(x).unwrap();
        assert_eq!(t.gromov_ball(x, 0.2).unwrap().resolved, DyadicSet::Sector(p));
        assert_eq!(t.gromov_ball(x, 1.5).unwrap().resolved, DyadicSet::Whole);
        assert_eq!(t.gromov_ball(x, 0.0), Err(Error::NonPositiveRadius(0.0)));
        assert!(t.gromov_ball(x, -1.0).is_err());
        // the origin only has {o} and X
        assert_eq!(t.gromov_ball(VertexId(0), 1.0).unwrap().resolved, DyadicSet::Singleton(VertexId(0)));
        assert_eq!(t.gromov_ball(VertexId(0), 1.0001).unwrap().resolved, DyadicSet::Whole);
    }

    #[test]
    fn ball_at_exact_boundary_radius_is_open() {
        // ρ(x, y) < e^{-1} forces |x ∧ y| >= 2
        let t = t2();
        let x = VertexId(10);
        let b = t.gromov_ball(x, (-1f64).exp()).unwrap().resolved;
        assert_eq!(b, DyadicSet::Sector(t.ancestor_at_depth(x, 2).unwrap()));
        let b = t.gromov_ball(x, (-1f64).exp() * (1.0 + 1e-9)).unwrap().resolved;
        assert_eq!(b, DyadicSet::Sector(t.ancestor_at_depth(x, 1).unwrap()));
    }

    #[test]
    fn distinct_ball_counts() {
        let t = t2();
        assert_eq!(t.distinct_balls(VertexId(0)).len(), 2);
        assert_eq!(t.distinct_balls(VertexId(2)).len(), 3);
        assert_eq!(t.distinct_balls(VertexId(10)).len(), 5);
        for b in t.distinct_balls(VertexId(10)) {
            assert_eq!(t.gromov_ball(b.center, b.radius).unwrap().resolved, b.resolved);
        }
    }

    #[test]
    fn sector_level_blocks() {
        let t = t2();
        assert_eq!(t.sector_level_range(VertexId(1), 1).unwrap(), (1, 1));
        assert_eq!(t.sector_level_range(VertexId(1), 2).unwrap(), (4, 5));
        assert_eq!(t.sector_level_range(VertexId(1), 3).unwrap(), (10, 13));
        assert_eq!(t.sector_level_range(VertexId(0), 2).unwrap(), (4, 9));
    }
}
