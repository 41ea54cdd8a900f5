//! Tail-constant functions: values given on the ball `B(o, N)` and constant
//! on every sector hanging from the sphere `S(o, N)`.
//!
//! Every operator in this crate maps the class into itself, so integrals,
//! norms, averages and level sets are exact finite sums with the tails
//! summed in closed form.

use std::ops::{Add, Mul};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicSet;
use crate::error::{Error, Result};
use crate::measure::MeasureParams;
use crate::region::Region;
use crate::tree::{TreeParams, VertexId};

/// Imaginary parts below this are treated as zero by real-valued operations.
pub const REAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TailConstantFunction {
    tree: TreeParams,
    boundary_depth: u32,
    /// Indexed by vertex label, `0 ..= I_N`.
    values: Vec<Complex64>,
}

impl TailConstantFunction {
    pub fn new(tree: TreeParams, boundary_depth: u32, values: Vec<Complex64>) -> Result<Self> {
        let len = tree.ball_len(boundary_depth)?;
        if values.len() != len {
            return Err(Error::MalformedFunction(format!(
                "boundary depth {boundary_depth} needs {len} values, got {}",
                values.len()
            )));
        }
        Ok(TailConstantFunction { tree, boundary_depth, values })
    }

    pub fn from_fn(tree: TreeParams, boundary_depth: u32, mut f: impl FnMut(VertexId) -> Complex64) -> Result<Self> {
        let len = tree.ball_len(boundary_depth)?;
        let values = (0..len).map(|k| f(VertexId(k as u128))).collect();
        Ok(TailConstantFunction { tree, boundary_depth, values })
    }

    pub fn zero(tree: TreeParams) -> Self {
        Self::constant(tree, Complex64::new(0.0, 0.0))
    }

    pub fn constant(tree: TreeParams, c: Complex64) -> Self {
        TailConstantFunction { tree, boundary_depth: 0, values: vec![c] }
    }

    /// A finitely supported function, stored with boundary depth one past
    /// its deepest support vertex.
    pub fn from_sparse(tree: TreeParams, entries: impl IntoIterator<Item = (VertexId, Complex64)>) -> Result<Self> {
        let entries: Vec<_> = entries.into_iter().collect();
        let Some(deepest) = entries.iter().map(|(v, _)| tree.depth(*v)).max() else {
            return Ok(Self::zero(tree));
        };
        let mut f = Self::from_fn(tree, deepest + 1, |_| Complex64::new(0.0, 0.0))?;
        for (v, c) in entries {
            f.values[v.index()] += c;
        }
        Ok(f)
    }

    /// `δ_v`.
    pub fn delta(tree: TreeParams, v: VertexId) -> Result<Self> {
        Self::from_sparse(tree, [(v, Complex64::new(1.0, 0.0))])
    }

    pub fn indicator(tree: TreeParams, d: DyadicSet) -> Result<Self> {
        match d {
            DyadicSet::Whole => Ok(Self::constant(tree, Complex64::new(1.0, 0.0))),
            DyadicSet::Singleton(v) => Self::delta(tree, v),
            DyadicSet::Sector(v) => {
                let n = tree.depth(v);
                Self::from_fn(tree, n, |x| if x == v { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
            }
        }
    }

    pub fn tree(&self) -> &TreeParams {
        &self.tree
    }

    pub fn boundary_depth(&self) -> u32 {
        self.boundary_depth
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn evaluate(&self, x: VertexId) -> Complex64 {
        let d = self.tree.depth(x);
        if d <= self.boundary_depth {
            self.values[x.index()]
        } else {
            let b = self.tree.ancestor_at_depth(x, self.boundary_depth).expect("depth checked");
            self.values[b.index()]
        }
    }

    /// The same function stored with a deeper boundary.
    pub fn extend_to(&self, depth: u32) -> Result<Self> {
        if depth <= self.boundary_depth {
            return Ok(self.clone());
        }
        let mut values = self.values.clone();
        values.reserve(self.tree.ball_len(depth)? - values.len());
        for d in self.boundary_depth + 1..=depth {
            let (lo, hi) = self.tree.level_range(d)?;
            for k in lo..=hi {
                let p = self.tree.parent(VertexId(k))?;
                values.push(values[p.index()]);
            }
        }
        Ok(TailConstantFunction { tree: self.tree, boundary_depth: depth, values })
    }

    pub fn map(&self, mut g: impl FnMut(Complex64) -> Complex64) -> Self {
        TailConstantFunction {
            tree: self.tree,
            boundary_depth: self.boundary_depth,
            values: self.values.iter().map(|c| g(*c)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, mut g: impl FnMut(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.tree != other.tree {
            return Err(Error::InvalidParams("functions live on different trees".into()));
        }
        let n = self.boundary_depth.max(other.boundary_depth);
        let (a, b) = (self.extend_to(n)?, other.extend_to(n)?);
        let values = a.values.iter().zip(&b.values).map(|(x, y)| g(*x, *y)).collect();
        Ok(TailConstantFunction { tree: self.tree, boundary_depth: n, values })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|v| v * c)
    }

    /// Pointwise modulus.
    pub fn abs(&self) -> Self {
        self.map(|v| Complex64::new(v.norm(), 0.0))
    }

    /// First vertex whose value has a non-negligible imaginary part.
    pub fn first_complex_vertex(&self) -> Option<VertexId> {
        self.values.iter().position(|c| c.im.abs() > REAL_TOLERANCE).map(|k| VertexId(k as u128))
    }

    pub fn is_real(&self) -> bool {
        self.first_complex_vertex().is_none()
    }

    /// Largest pointwise difference over the whole tree.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        let d = self.sub(other)?;
        Ok(d.values.iter().map(|c| c.norm()).fold(0.0, f64::max))
    }

    fn check_tree(&self, mp: &MeasureParams) -> Result<()> {
        if *mp.tree() != self.tree {
            return Err(Error::InvalidParams(format!(
                "function lives on q = {} but the measure uses q = {}",
                self.tree.q(),
                mp.q()
            )));
        }
        Ok(())
    }

    /// Weight carried by the value stored at depth `d`: a point mass inside
    /// the ball, a whole sector on the boundary sphere.
    fn weight_at_depth(&self, mp: &MeasureParams, d: u32) -> f64 {
        if d < self.boundary_depth {
            mp.point_mass_at_depth(d)
        } else {
            mp.sector_or_total_mass_at_depth(d)
        }
    }

    /// `Σ_{x ∈ D} g(f(x)) μ(x)`, exact.
    pub fn sum_over<T>(&self, mp: &MeasureParams, d: DyadicSet, g: impl Fn(Complex64) -> T) -> T
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
    {
        let n = self.boundary_depth;
        match d {
            DyadicSet::Singleton(v) => g(self.evaluate(v)) * mp.point_mass(v),
            DyadicSet::Whole | DyadicSet::Sector(_) => {
                let v = d.root();
                let dv = self.tree.depth(v);
                if dv >= n {
                    return g(self.evaluate(v)) * d.mass(mp);
                }
                let mut total = T::default();
                for depth in dv..=n {
                    let (lo, hi) = self.tree.sector_level_range(v, depth).expect("depth within the stored ball");
                    let w = self.weight_at_depth(mp, depth);
                    let mut level = T::default();
                    for k in lo..=hi {
                        level = level + g(self.values[k as usize]);
                    }
                    total = total + level * w;
                }
                total
            }
        }
    }

    /// `Σ_{x ∈ T_k} g(f(x)) μ(x)` for every stored label `k`, computed
    /// bottom-up in one pass; entry `0` is the integral over `X`.
    pub fn sector_sums<T>(&self, mp: &MeasureParams, g: impl Fn(Complex64) -> T) -> Vec<T>
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
    {
        let n = self.boundary_depth;
        let mut sums = vec![T::default(); self.values.len()];
        for depth in (0..=n).rev() {
            let (lo, hi) = self.tree.level_range(depth).expect("stored depth");
            let w = self.weight_at_depth(mp, depth);
            for k in lo..=hi {
                let mut s = g(self.values[k as usize]) * w;
                if depth < n {
                    let (clo, chi) = self.tree.child_range(VertexId(k)).expect("stored depth");
                    for c in clo..=chi {
                        s = s + sums[c as usize];
                    }
                }
                sums[k as usize] = s;
            }
        }
        sums
    }

    /// `Σ_x f(x) μ(x)`.
    pub fn integral(&self, mp: &MeasureParams) -> Complex64 {
        self.sum_over(mp, DyadicSet::Whole, |c| c)
    }

    /// `‖f‖_{p,α}` for `p` in `[1, ∞]`.
    pub fn lp_norm(&self, mp: &MeasureParams, p: f64) -> Result<f64> {
        self.check_tree(mp)?;
        if !(p >= 1.0) {
            return Err(Error::InvalidParams(format!("p must be at least 1, got {p}")));
        }
        if p.is_infinite() {
            return Ok(self.values.iter().map(|c| c.norm()).fold(0.0, f64::max));
        }
        let s = self.sum_over(mp, DyadicSet::Whole, |c| c.norm().powf(p));
        Ok(s.powf(1.0 / p))
    }

    /// `f_D`, the `μ_α`-average of `f` over `D`.
    pub fn average_on(&self, mp: &MeasureParams, d: DyadicSet) -> Complex64 {
        self.sum_over(mp, d, |c| c) / d.mass(mp)
    }

    /// The average of `|f|` over `D`.
    pub fn abs_average_on(&self, mp: &MeasureParams, d: DyadicSet) -> f64 {
        self.sum_over(mp, d, |c| c.norm()) / d.mass(mp)
    }

    /// `((1/μ(D)) Σ_{x ∈ D} |f(x) - f_D|^r μ(x))^{1/r}`.
    pub fn oscillation(&self, mp: &MeasureParams, d: DyadicSet, r: f64) -> f64 {
        if d.is_singleton() || self.tree.depth(d.root()) >= self.boundary_depth {
            return 0.0;
        }
        let mean = self.average_on(mp, d);
        let s = self.sum_over(mp, d, |c| (c - mean).norm().powf(r)) / d.mass(mp);
        s.powf(1.0 / r)
    }

    /// `sup_{x ∈ D} |f(x)|`.
    pub fn sup_abs_on(&self, d: DyadicSet) -> f64 {
        match d {
            DyadicSet::Singleton(v) => self.evaluate(v).norm(),
            DyadicSet::Whole | DyadicSet::Sector(_) => {
                let v = d.root();
                let dv = self.tree.depth(v);
                if dv >= self.boundary_depth {
                    return self.evaluate(v).norm();
                }
                let mut best: f64 = 0.0;
                for depth in dv..=self.boundary_depth {
                    let (lo, hi) = self.tree.sector_level_range(v, depth).expect("stored depth");
                    for k in lo..=hi {
                        best = best.max(self.values[k as usize].norm());
                    }
                }
                best
            }
        }
    }

    /// `{x : g(x) ⋈ λ}` for a real-valued `g`.
    pub fn level_region(&self, mp: &MeasureParams, lambda: f64, cmp: Comparator) -> Result<LevelReport> {
        self.check_tree(mp)?;
        if let Some(v) = self.first_complex_vertex() {
            return Err(Error::ComplexLevelSet(v));
        }
        let region = region_where(&self.tree, self.boundary_depth, |k| cmp.holds(self.values[k].re, lambda))?;
        let mass = region.mass(mp)?;
        Ok(LevelReport { region, mass })
    }
}

/// The region of a tail-constant predicate: labels of depth `< n` are
/// tested one by one, labels on the sphere of radius `n` stand for their
/// whole sectors.
pub fn region_where(tree: &TreeParams, n: u32, mut pred: impl FnMut(usize) -> bool) -> Result<Region> {
    let mut region = Region::empty();
    for depth in 0..=n {
        let (lo, hi) = tree.level_range(depth)?;
        for k in lo..=hi {
            if pred(k as usize) {
                if depth < n {
                    region.singletons.insert(VertexId(k));
                } else {
                    region.sectors.insert(VertexId(k));
                }
            }
        }
    }
    Ok(region)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
}

impl Comparator {
    pub fn holds(self, value: f64, lambda: f64) -> bool {
        match self {
            Comparator::Gt => value > lambda,
            Comparator::Ge => value >= lambda,
            Comparator::Lt => value < lambda,
            Comparator::Le => value <= lambda,
        }
    }
}

impl FromStr for Comparator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            ">" | "gt" => Ok(Comparator::Gt),
            ">=" | "ge" => Ok(Comparator::Ge),
            "<" | "lt" => Ok(Comparator::Lt),
            "<=" | "le" => Ok(Comparator::Le),
            _ => Err(Error::InvalidParams(format!("unknown comparator {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub region: Region,
    pub mass: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn setup() -> (MeasureParams, TreeParams) {
        let mp = MeasureParams::new(2, 2.0).unwrap();
        (mp, *mp.tree())
    }

    #[test]
    fn evaluate_follows_tail_semantics() {
        let (_, t) = setup();
        let zero = TailConstantFunction::zero(t);
        assert_eq!(zero.evaluate(VertexId(123)), c(0.0));
        let d = TailConstantFunction::delta(t, VertexId(0)).unwrap();
        assert_eq!(d.boundary_depth(), 1);
        assert_eq!(d.evaluate(VertexId(0)), c(1.0));
        assert_eq!(d.evaluate(VertexId(2)), c(0.0));
        assert_eq!(d.evaluate(VertexId(40)), c(0.0));
        let f = TailConstantFunction::from_fn(t, 1, |v| c(v.0 as f64)).unwrap();
        // 10..=13 hang below 4 and 5, both in T_1
        assert_eq!(f.evaluate(VertexId(12)), c(1.0));
        assert_eq!(f.evaluate(VertexId(9)), c(3.0));
    }

    #[test]
    fn wrong_length_rejected() {
        let (_, t) = setup();
        assert!(matches!(TailConstantFunction::new(t, 1, vec![c(0.0); 3]), Err(Error::MalformedFunction(_))));
    }

    #[test]
    fn norms() {
        let (mp, t) = setup();
        assert_eq!(TailConstantFunction::zero(t).lp_norm(&mp, 1.0).unwrap(), 0.0);
        let d = TailConstantFunction::delta(t, VertexId(0)).unwrap();
        assert_relative_eq!(d.lp_norm(&mp, 1.0).unwrap(), 1.0);
        let one = TailConstantFunction::from_fn(t, 1, |_| c(1.0)).unwrap();
        assert_relative_eq!(one.lp_norm(&mp, 1.0).unwrap(), 2.5, max_relative = 1e-14);
        assert_eq!(one.lp_norm(&mp, f64::INFINITY).unwrap(), 1.0);
        assert!(one.lp_norm(&mp, 0.5).is_err());
    }

    #[test]
    fn averages() {
        let (mp, t) = setup();
        let d = TailConstantFunction::delta(t, VertexId(0)).unwrap();
        assert_relative_eq!(d.average_on(&mp, DyadicSet::Whole).re, 0.4, max_relative = 1e-14);
        let f = TailConstantFunction::from_fn(t, 2, |v| c(v.0 as f64 * 0.5)).unwrap();
        assert_eq!(f.average_on(&mp, DyadicSet::Singleton(VertexId(7))), c(3.5));
        let k = TailConstantFunction::constant(t, Complex64::new(2.0, -1.0));
        let avg = k.average_on(&mp, DyadicSet::Sector(VertexId(5)));
        assert!((avg - Complex64::new(2.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn sector_sums_match_direct_sums() {
        let (mp, t) = setup();
        let f = TailConstantFunction::from_fn(t, 3, |v| Complex64::new((v.0 % 5) as f64, (v.0 % 3) as f64)).unwrap();
        let sums = f.sector_sums(&mp, |z| z);
        for k in 0..sums.len() as u128 {
            let d = DyadicSet::sector(VertexId(k));
            assert!((sums[k as usize] - f.sum_over(&mp, d, |z| z)).norm() < 1e-13);
        }
    }

    #[test]
    fn level_sets() {
        let (mp, t) = setup();
        let zero = TailConstantFunction::zero(t);
        assert!(zero.level_region(&mp, 1.0, Comparator::Gt).unwrap().region.is_empty());
        let g = TailConstantFunction::from_fn(t, 1, |v| c(if v.is_origin() { 1.0 } else { 0.4 })).unwrap();
        let l = g.level_region(&mp, 0.5, Comparator::Gt).unwrap();
        assert_eq!(l.region, Region::singleton(VertexId(0)));
        assert_relative_eq!(l.mass, 1.0);
        let le = g.level_region(&mp, 0.5, Comparator::Le).unwrap();
        assert_relative_eq!(l.mass + le.mass, mp.total_mass(), max_relative = 1e-14);
        let z = TailConstantFunction::constant(t, Complex64::new(0.0, 1.0));
        assert!(matches!(z.level_region(&mp, 0.0, Comparator::Gt), Err(Error::ComplexLevelSet(_))));
    }

    #[test]
    fn extension_keeps_values() {
        let (mp, t) = setup();
        let f = TailConstantFunction::from_fn(t, 2, |v| Complex64::new(v.0 as f64, 1.0)).unwrap();
        let g = f.extend_to(4).unwrap();
        for k in 0..200u128 {
            assert_eq!(f.evaluate(VertexId(k)), g.evaluate(VertexId(k)));
        }
        assert_relative_eq!(f.lp_norm(&mp, 2.0).unwrap(), g.lp_norm(&mp, 2.0).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn comparator_parsing() {
        assert_eq!(">=".parse::<Comparator>().unwrap(), Comparator::Ge);
        assert!("=".parse::<Comparator>().is_err());
    }
}
