//! Finitely supported kernels on `X × X` and the integral operators
//! `𝒦f(z) = Σ_x K(z, x) f(x) μ(x)`.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::TailConstantFunction;
use crate::hardy_bmo::Atom;
use crate::measure::MeasureParams;
use crate::tree::{TreeParams, VertexId};

pub const DEFAULT_POWER_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_POWER_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "KernelRepr", try_from = "KernelRepr")]
pub struct FiniteKernel {
    /// `(z, x) ↦ K(z, x)`; absent pairs are zero.
    entries: BTreeMap<(VertexId, VertexId), Complex64>,
}

#[derive(Serialize, Deserialize)]
struct KernelRepr {
    /// `[z, x, re, im]`.
    entries: Vec<(VertexId, VertexId, f64, f64)>,
}

impl From<FiniteKernel> for KernelRepr {
    fn from(k: FiniteKernel) -> Self {
        KernelRepr { entries: k.entries.into_iter().map(|((z, x), c)| (z, x, c.re, c.im)).collect() }
    }
}

impl TryFrom<KernelRepr> for FiniteKernel {
    type Error = String;

    fn try_from(r: KernelRepr) -> std::result::Result<Self, String> {
        let mut k = FiniteKernel::default();
        for (z, x, re, im) in r.entries {
            if !(re.is_finite() && im.is_finite()) {
                return Err(format!("entry ({z}, {x}) is not finite"));
            }
            if k.entries.insert((z, x), Complex64::new(re, im)).is_some() {
                return Err(format!("entry ({z}, {x}) appears twice"));
            }
        }
        Ok(k)
    }
}

impl FiniteKernel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = ((VertexId, VertexId), Complex64)>) -> Self {
        let mut k = FiniteKernel::new();
        for ((z, x), c) in entries {
            k.set(z, x, c);
        }
        k
    }

    /// Sets `K(z, x)`; zero removes the entry.
    pub fn set(&mut self, z: VertexId, x: VertexId, c: Complex64) {
        if c == Complex64::new(0.0, 0.0) {
            self.entries.remove(&(z, x));
        } else {
            self.entries.insert((z, x), c);
        }
    }

    pub fn get(&self, z: VertexId, x: VertexId) -> Complex64 {
        self.entries.get(&(z, x)).copied().unwrap_or_default()
    }

    pub fn entries(&self) -> impl Iterator<Item = (VertexId, VertexId, Complex64)> + '_ {
        self.entries.iter().map(|((z, x), c)| (*z, *x, *c))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest depth of any coordinate of a stored entry.
    pub fn depth_bound(&self, tree: &TreeParams) -> u32 {
        self.entries.keys().map(|(z, x)| tree.depth(*z).max(tree.depth(*x))).max().unwrap_or(0)
    }

    /// `x ↦ {z : K(z, x) ≠ 0}` with the values.
    fn columns(&self) -> BTreeMap<VertexId, Vec<(VertexId, Complex64)>> {
        let mut cols: BTreeMap<VertexId, Vec<(VertexId, Complex64)>> = BTreeMap::new();
        for ((z, x), c) in &self.entries {
            cols.entry(*x).or_default().push((*z, *c));
        }
        cols
    }

    /// `K_δ(z, x) = δ_{z,x} q^{α|x|}` for `|x| <= depth`, whose operator
    /// is the identity on that ball.
    pub fn weighted_identity(mp: &MeasureParams, depth: u32) -> Result<Self> {
        let len = mp.tree().ball_len(depth)?;
        Ok(FiniteKernel::from_entries((0..len as u128).map(|k| {
            let v = VertexId(k);
            ((v, v), Complex64::new(1.0 / mp.point_mass(v), 0.0))
        })))
    }

    /// `K(z, x) = u(z) conj(w(x))` over the given finitely supported vectors.
    pub fn rank_one(u: &[(VertexId, Complex64)], w: &[(VertexId, Complex64)]) -> Self {
        FiniteKernel::from_entries(u.iter().flat_map(|(z, a)| w.iter().map(move |(x, b)| ((*z, *x), a * b.conj()))))
    }
}

/// `K*(x, y) = conj(K(y, x))`.
pub fn adjoint(k: &FiniteKernel) -> FiniteKernel {
    FiniteKernel { entries: k.entries.iter().map(|((z, x), c)| ((*x, *z), c.conj())).collect() }
}

/// `𝒦f`, stored with boundary depth `depth_bound + 1` and a zero tail.
pub fn apply_operator(mp: &MeasureParams, k: &FiniteKernel, f: &TailConstantFunction) -> Result<TailConstantFunction> {
    let tree = *mp.tree();
    let depth = k.depth_bound(&tree) + 1;
    let mut values = vec![Complex64::new(0.0, 0.0); tree.ball_len(depth)?];
    for ((z, x), c) in &k.entries {
        values[z.index()] += c * f.evaluate(*x) * mp.point_mass(*x);
    }
    TailConstantFunction::new(tree, depth, values)
}

/// `⟨f, g⟩ = Σ f conj(g) μ`.
pub fn l2_inner(mp: &MeasureParams, f: &TailConstantFunction, g: &TailConstantFunction) -> Result<Complex64> {
    Ok(f.zip_with(g, |a, b| a * b.conj())?.integral(mp))
}

/// `Σ_{z ∉ T_v} |K(z, x) - K(z, y)| μ(z)` for two columns.
fn column_gap(mp: &MeasureParams, v: VertexId, a: &[(VertexId, Complex64)], b: &[(VertexId, Complex64)]) -> f64 {
    let tree = mp.tree();
    let mut diff: BTreeMap<VertexId, Complex64> = BTreeMap::new();
    for (z, c) in a {
        *diff.entry(*z).or_default() += c;
    }
    for (z, c) in b {
        *diff.entry(*z).or_default() -= c;
    }
    diff.iter().filter(|(z, _)| !tree.in_sector(**z, v)).map(|(z, c)| c.norm() * mp.point_mass(*z)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HormanderWitness {
    pub value: f64,
    pub sector: VertexId,
    /// `None` stands for a column of `T_v` on which the kernel vanishes.
    pub x: Option<VertexId>,
    pub y: Option<VertexId>,
}

/// `sup_{v ≠ o} sup_{x, y ∈ T_v} Σ_{z ∉ T_v} |K(z, x) - K(z, y)| μ(z)`.
///
/// Only sectors containing a nonzero column can give a nonzero value, and
/// inside `T_v` every vanishing column behaves alike, so the sup runs over
/// the support columns of `T_v` plus one vanishing representative.
pub fn hormander_constant(mp: &MeasureParams, k: &FiniteKernel) -> HormanderWitness {
    let tree = mp.tree();
    let cols = k.columns();
    let mut sectors = BTreeSet::new();
    for x in cols.keys() {
        let mut cur = *x;
        while !cur.is_origin() {
            if !sectors.insert(cur) {
                break;
            }
            cur = tree.parent(cur).expect("non-origin");
        }
    }
    let mut best = HormanderWitness { value: 0.0, sector: VertexId(1), x: None, y: None };
    let empty: Vec<(VertexId, Complex64)> = Vec::new();
    for v in sectors {
        let inside: Vec<(VertexId, &Vec<(VertexId, Complex64)>)> =
            cols.iter().filter(|(x, _)| tree.in_sector(**x, v)).map(|(x, c)| (*x, c)).collect();
        for (i, (x, cx)) in inside.iter().enumerate() {
            let g = column_gap(mp, v, cx, &empty);
            if g > best.value {
                best = HormanderWitness { value: g, sector: v, x: Some(*x), y: None };
            }
            for (y, cy) in &inside[i + 1..] {
                let g = column_gap(mp, v, cx, cy);
                if g > best.value {
                    best = HormanderWitness { value: g, sector: v, x: Some(*x), y: Some(*y) };
                }
            }
        }
    }
    best
}

/// The weighted matrix `A(z, x) = μ(z)^{1/2} K(z, x) μ(x)^{1/2}` over the
/// support columns.
struct WeightedMatrix {
    cols: Vec<VertexId>,
    /// Per column index: `(row slot, value)`.
    by_col: Vec<Vec<(usize, Complex64)>>,
    rows: usize,
}

impl WeightedMatrix {
    fn new(mp: &MeasureParams, k: &FiniteKernel) -> Self {
        let cols: Vec<VertexId> = k.columns().keys().copied().collect();
        let col_index: BTreeMap<VertexId, usize> = cols.iter().enumerate().map(|(i, x)| (*x, i)).collect();
        let rows: BTreeSet<VertexId> = k.entries.keys().map(|(z, _)| *z).collect();
        let row_index: BTreeMap<VertexId, usize> = rows.iter().enumerate().map(|(i, z)| (*z, i)).collect();
        let mut by_col = vec![Vec::new(); cols.len()];
        for ((z, x), c) in &k.entries {
            let w = (mp.point_mass(*z) * mp.point_mass(*x)).sqrt();
            by_col[col_index[x]].push((row_index[z], c * w));
        }
        WeightedMatrix { cols, by_col, rows: rows.len() }
    }

    fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for (j, col) in self.by_col.iter().enumerate() {
            for (i, a) in col {
                out[*i] += a * v[j];
            }
        }
        out
    }

    fn apply_adjoint(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.by_col.iter().map(|col| col.iter().map(|(i, a)| a.conj() * u[*i]).sum()).collect()
    }
}

fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorNorm {
    pub norm: f64,
    pub iterations: usize,
}

/// `‖𝒦‖_{L^2 → L^2}` by power iteration on `A*A`, started from the
/// normalised all-ones vector.
pub fn l2_operator_norm(mp: &MeasureParams, k: &FiniteKernel, tol: f64) -> Result<OperatorNorm> {
    l2_operator_norm_with(mp, k, tol, DEFAULT_POWER_ITERATIONS)
}

pub fn l2_operator_norm_with(mp: &MeasureParams, k: &FiniteKernel, tol: f64, max_iterations: usize) -> Result<OperatorNorm> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParams(format!("tolerance must be positive, got {tol}")));
    }
    let a = WeightedMatrix::new(mp, k);
    let n = a.cols.len();
    if n == 0 {
        return Ok(OperatorNorm { norm: 0.0, iterations: 0 });
    }
    let mut v = vec![Complex64::new(1.0 / (n as f64).sqrt(), 0.0); n];
    let mut estimate = 0.0;
    for iteration in 1..=max_iterations {
        let mut w = a.apply_adjoint(&a.apply(&v));
        let mut len = vec_norm(&w);
        if len == 0.0 && iteration == 1 {
            // The all-ones start is orthogonal to the row space; restart
            // from a fixed non-symmetric vector.
            v = (0..n).map(|j| Complex64::new(1.0 + j as f64, 0.5 * j as f64)).collect();
            let l = vec_norm(&v);
            v.iter_mut().for_each(|c| *c /= l);
            w = a.apply_adjoint(&a.apply(&v));
            len = vec_norm(&w);
        }
        if len == 0.0 {
            return Ok(OperatorNorm { norm: 0.0, iterations: iteration });
        }
        // ‖A v‖² is the Rayleigh quotient of A*A at the unit vector v.
        let rayleigh = vec_norm(&a.apply(&v)).powi(2);
        w.iter_mut().for_each(|c| *c /= len);
        v = w;
        if (rayleigh - estimate).abs() <= tol * rayleigh {
            return Ok(OperatorNorm { norm: rayleigh.sqrt(), iterations: iteration });
        }
        estimate = rayleigh;
    }
    Err(Error::NoConvergence { estimate: estimate.sqrt(), iterations: max_iterations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub kind: String,
    pub samples: usize,
    /// `sup ‖𝒦a‖_1` over the sampled atoms.
    pub sup_l1: f64,
    pub witness: Option<usize>,
    pub l2_norm: f64,
    pub hormander: f64,
    pub reference_constant: f64,
    /// `c (‖𝒦‖_2 + H)`: for orientation only, not a proven bound.
    pub reference_bound: f64,
    pub invalid_atoms: usize,
}

/// Empirical `H^1 → L^1` behaviour of `𝒦` on the given atoms.
pub fn h1_l1_probe(mp: &MeasureParams, k: &FiniteKernel, atoms: &[Atom], reference_constant: f64) -> Result<ProbeReport> {
    let l2_norm = l2_operator_norm(mp, k, DEFAULT_POWER_TOLERANCE)?.norm;
    let hormander = hormander_constant(mp, k).value;
    let mut sup_l1: f64 = 0.0;
    let mut witness = None;
    let mut invalid_atoms = 0;
    for (i, a) in atoms.iter().enumerate() {
        if !crate::hardy_bmo::validate_atom(mp, a)?.valid {
            invalid_atoms += 1;
            continue;
        }
        let out = apply_operator(mp, k, &a.to_function(mp))?.lp_norm(mp, 1.0)?;
        if out > sup_l1 || witness.is_none() {
            sup_l1 = sup_l1.max(out);
            witness = Some(i);
        }
    }
    Ok(ProbeReport {
        kind: "probe".into(),
        samples: atoms.len(),
        sup_l1,
        witness,
        l2_norm,
        hormander,
        reference_constant,
        reference_bound: reference_constant * (l2_norm + hormander),
        invalid_atoms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpRatioRow {
    pub p: f64,
    pub sup_ratio: f64,
    pub witness: Option<usize>,
    pub above_reference: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSweepReport {
    pub kind: String,
    pub l2_norm: f64,
    /// `max(‖𝒦‖_2, h1 probe sup)`.
    pub reference: f64,
    pub threshold: f64,
    pub rows: Vec<LpRatioRow>,
}

/// `sup_f ‖𝒦f‖_p / ‖f‖_p` over the given samples, for each `p`.
pub fn lp_ratio_sweep(
    mp: &MeasureParams,
    k: &FiniteKernel,
    ps: &[f64],
    samples: &[TailConstantFunction],
    h1_probe_sup: f64,
    threshold: f64,
) -> Result<LpSweepReport> {
    if let Some(p) = ps.iter().find(|p| !(**p > 1.0)) {
        return Err(Error::InvalidParams(format!("p must exceed 1, got {p}")));
    }
    let l2_norm = l2_operator_norm(mp, k, DEFAULT_POWER_TOLERANCE)?.norm;
    let reference = l2_norm.max(h1_probe_sup);
    let images = samples.iter().map(|f| apply_operator(mp, k, f)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(ps.len());
    for &p in ps {
        let mut sup_ratio: f64 = 0.0;
        let mut witness = None;
        for (i, (f, kf)) in samples.iter().zip(&images).enumerate() {
            let denom = f.lp_norm(mp, p)?;
            if denom == 0.0 {
                continue;
            }
            let r = kf.lp_norm(mp, p)? / denom;
            if r > sup_ratio || witness.is_none() {
                sup_ratio = sup_ratio.max(r);
                witness = Some(i);
            }
        }
        rows.push(LpRatioRow { p, sup_ratio, witness, above_reference: sup_ratio > reference * (1.0 + threshold) });
    }
    Ok(LpSweepReport { kind: "probe".into(), l2_norm, reference, threshold, rows })
}
