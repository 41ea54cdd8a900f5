use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dyadic::{containing_sets, DyadicSet};
use crate::error::{Error, Result};
use crate::function::TailConstantFunction;
use crate::measure::MeasureParams;
use crate::tree::{TreeParams, VertexId};

const UNIT_TOLERANCE: f64 = 1e-12;

/// A choice of dyadic set `φ(x) ∋ x` for finitely many points and a phase
/// `η(y, x)` for finitely many pairs.
///
/// A pair that is not stored takes the phase of the nearest stored
/// `(a, x)` with `a` an ancestor of `y`, and `1` when there is none.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "SelectorRepr", try_from = "SelectorRepr")]
pub struct SelectorPair {
    phi: BTreeMap<VertexId, DyadicSet>,
    /// Keyed by `(x, y)` so that all phases of one point are contiguous.
    eta: BTreeMap<(VertexId, VertexId), Complex64>,
}

#[derive(Serialize, Deserialize)]
struct SelectorRepr {
    phi: Vec<(VertexId, DyadicSet)>,
    /// `[y, x, re, im]`.
    eta: Vec<(VertexId, VertexId, f64, f64)>,
}

impl From<SelectorPair> for SelectorRepr {
    fn from(s: SelectorPair) -> Self {
        SelectorRepr {
            phi: s.phi.into_iter().collect(),
            eta: s.eta.into_iter().map(|((x, y), c)| (y, x, c.re, c.im)).collect(),
        }
    }
}

impl TryFrom<SelectorRepr> for SelectorPair {
    type Error = String;

    fn try_from(r: SelectorRepr) -> std::result::Result<Self, String> {
        let mut s = SelectorPair::default();
        for (x, d) in r.phi {
            s.phi.insert(x, d);
        }
        for (y, x, re, im) in r.eta {
            s.set_eta(y, x, Complex64::new(re, im)).map_err(|e| e.to_string())?;
        }
        Ok(s)
    }
}

impl SelectorPair {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_phi(&mut self, tree: &TreeParams, x: VertexId, d: DyadicSet) -> Result<()> {
        if !d.contains(tree, x) {
            return Err(Error::InvalidSelector(format!("{d} does not contain {x}")));
        }
        self.phi.insert(x, d);
        Ok(())
    }

    pub fn set_eta(&mut self, y: VertexId, x: VertexId, value: Complex64) -> Result<()> {
        if (value.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::InvalidSelector(format!("eta({y}, {x}) = {value} is not unimodular")));
        }
        self.eta.insert((x, y), value);
        Ok(())
    }

    pub fn phi(&self, x: VertexId) -> Option<DyadicSet> {
        self.phi.get(&x).copied()
    }

    pub fn domain(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.phi.keys().copied()
    }

    pub fn eta_len(&self) -> usize {
        self.eta.len()
    }

    pub fn validate(&self, tree: &TreeParams) -> Result<()> {
        for (x, d) in &self.phi {
            if !d.contains(tree, *x) {
                return Err(Error::InvalidSelector(format!("{d} does not contain {x}")));
            }
        }
        for ((x, y), c) in &self.eta {
            if (c.norm() - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::InvalidSelector(format!("eta({y}, {x}) = {c} is not unimodular")));
            }
        }
        Ok(())
    }

    fn phases_for(&self, x: VertexId) -> HashMap<VertexId, Complex64> {
        self.eta.range((x, VertexId(0))..=(x, VertexId(u128::MAX))).map(|((_, y), c)| (*y, *c)).collect()
    }
}

fn inherited_phase(tree: &TreeParams, phases: &HashMap<VertexId, Complex64>, y: VertexId) -> Complex64 {
    let mut cur = y;
    loop {
        if let Some(c) = phases.get(&cur) {
            return *c;
        }
        match tree.parent(cur) {
            Ok(p) => cur = p,
            Err(_) => return Complex64::new(1.0, 0.0),
        }
    }
}

/// `S^{φ,η}f(x) = (1/μ(φ(x))) Σ_{y ∈ φ(x)} (f(y) - f_{φ(x)}) η(y, x) μ(y)`.
pub fn s_phi_eta_at(mp: &MeasureParams, f: &TailConstantFunction, sel: &SelectorPair, x: VertexId) -> Result<Complex64> {
    let tree = mp.tree();
    let d = sel.phi(x).ok_or(Error::SelectorUndefined(x))?;
    let n = f.boundary_depth();
    let root = d.root();
    let dv = tree.depth(root);
    if d.is_singleton() || dv >= n {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let phases = sel.phases_for(x);
    let deepest = phases.keys().filter(|y| d.contains(tree, **y)).map(|y| tree.depth(*y)).max().unwrap_or(0);
    let last = n.max(deepest);
    let mean = f.average_on(mp, d);
    let mut total = Complex64::new(0.0, 0.0);
    for depth in dv..=last {
        let w = if depth < last { mp.point_mass_at_depth(depth) } else { mp.sector_or_total_mass_at_depth(depth) };
        let (lo, hi) = tree.sector_level_range(root, depth)?;
        let mut level = Complex64::new(0.0, 0.0);
        for k in lo..=hi {
            let y = VertexId(k);
            level += (f.evaluate(y) - mean) * inherited_phase(tree, &phases, y);
        }
        total += level * w;
    }
    Ok(total / d.mass(mp))
}

/// `S^{φ,η}f` on the domain of `φ`.
pub fn s_phi_eta(mp: &MeasureParams, f: &TailConstantFunction, sel: &SelectorPair) -> Result<BTreeMap<VertexId, Complex64>> {
    sel.validate(mp.tree())?;
    sel.domain().map(|x| Ok((x, s_phi_eta_at(mp, f, sel, x)?))).collect()
}

/// The selector attaining `M♯f` at each given point: `φ(x)` is the smallest
/// containing set of maximal oscillation and `η(y, x)` is the phase of
/// `conj(f(y) - f_{φ(x)})`.
pub fn optimizing_selector(mp: &MeasureParams, f: &TailConstantFunction, points: &[VertexId]) -> SelectorPair {
    let tree = mp.tree();
    let n = f.boundary_depth();
    let mut sel = SelectorPair::new();
    for &x in points {
        // Smallest first, so the first maximiser wins ties.
        let sets = containing_sets(tree, x);
        let oscs: Vec<f64> = sets.iter().map(|d| f.oscillation(mp, *d, 1.0)).collect();
        let best = oscs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pick = oscs.iter().position(|o| *o == best).expect("at least the singleton");
        let d = sets[pick];
        sel.phi.insert(x, d);
        let root = d.root();
        let dv = tree.depth(root);
        if d.is_singleton() || dv >= n {
            continue;
        }
        let mean = f.average_on(mp, d);
        for depth in dv..=n {
            let (lo, hi) = tree.sector_level_range(root, depth).expect("stored depth");
            for k in lo..=hi {
                let dev = f.values()[k as usize] - mean;
                if dev.norm() > 0.0 {
                    sel.eta.insert((x, VertexId(k)), dev.conj() / dev.norm());
                }
            }
        }
    }
    sel
}
