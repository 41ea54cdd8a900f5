//! Atoms, atomic decompositions and BMO norms.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicSet;
use crate::error::{Error, Result};
use crate::function::TailConstantFunction;
use crate::measure::MeasureParams;
use crate::tree::VertexId;

/// Tolerance for the three atom conditions.
pub const ATOM_TOLERANCE: f64 = 1e-10;

/// Martingale differences below this fraction of the local values are
/// rounding noise and are dropped.
const NEGLIGIBLE_DIFFERENCE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    /// The constant `μ(X)^{-1}`.
    Constant,
    /// Supported on `set`, mean zero, `‖a‖_p <= μ(set)^{1/p - 1}`.
    Standard { set: DyadicSet, values: TailConstantFunction, p: f64 },
}

impl Atom {
    pub fn p(&self) -> f64 {
        match self {
            Atom::Constant => f64::INFINITY,
            Atom::Standard { p, .. } => *p,
        }
    }

    pub fn to_function(&self, mp: &MeasureParams) -> TailConstantFunction {
        match self {
            Atom::Constant => TailConstantFunction::constant(*mp.tree(), Complex64::new(1.0 / mp.total_mass(), 0.0)),
            Atom::Standard { values, .. } => values.clone(),
        }
    }
}

/// `p' = p / (p - 1)`, with `∞' = 1`.
pub fn conjugate_exponent(p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomCheck {
    pub valid: bool,
    pub support_ok: bool,
    pub size_ok: bool,
    pub mean_ok: bool,
    /// `‖a‖_p`.
    pub size: f64,
    pub size_bound: f64,
    /// `|Σ a μ|`.
    pub mean: f64,
    pub diagnostics: Vec<String>,
}

pub fn validate_atom(mp: &MeasureParams, a: &Atom) -> Result<AtomCheck> {
    let (set, values, p) = match a {
        Atom::Constant => {
            let v = 1.0 / mp.total_mass();
            return Ok(AtomCheck {
                valid: true,
                support_ok: true,
                size_ok: true,
                mean_ok: true,
                size: v,
                size_bound: v,
                mean: 1.0,
                diagnostics: Vec::new(),
            });
        }
        Atom::Standard { set, values, p } => (*set, values, *p),
    };
    let mut diagnostics = Vec::new();
    if !(p > 1.0) {
        return Err(Error::InvalidParams(format!("atoms need p in (1, inf], got {p}")));
    }
    let tree = mp.tree();
    // Store deep enough that the set is resolved by individual labels.
    let depth = values.boundary_depth().max(tree.depth(set.root()) + 1);
    let ext = values.extend_to(depth)?;
    let mut outside: f64 = 0.0;
    for (k, c) in ext.values().iter().enumerate() {
        if !set.contains(tree, VertexId(k as u128)) {
            outside = outside.max(c.norm());
        }
    }
    let support_ok = outside <= ATOM_TOLERANCE;
    if !support_ok {
        diagnostics.push(format!("|a| reaches {outside:e} outside {set}"));
    }
    let mass = set.mass(mp);
    let size = values.lp_norm(mp, p)?;
    let size_bound = if p.is_infinite() { 1.0 / mass } else { mass.powf(1.0 / p - 1.0) };
    let size_ok = size <= size_bound * (1.0 + ATOM_TOLERANCE);
    if !size_ok {
        diagnostics.push(format!("||a||_p = {size} exceeds {size_bound}"));
    }
    let mean = values.integral(mp).norm();
    let mean_ok = mean <= ATOM_TOLERANCE;
    if !mean_ok {
        diagnostics.push(format!("mean {mean:e} is not zero"));
    }
    Ok(AtomCheck { valid: support_ok && size_ok && mean_ok, support_ok, size_ok, mean_ok, size, size_bound, mean, diagnostics })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AtomicDecomposition {
    pub terms: Vec<(Complex64, Atom)>,
}

impl AtomicDecomposition {
    pub fn coefficient_sum(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.norm()).sum()
    }

    /// `Σ c_j a_j`.
    pub fn reconstruct(&self, mp: &MeasureParams) -> Result<TailConstantFunction> {
        let tree = *mp.tree();
        let depth = self
            .terms
            .iter()
            .map(|(_, a)| match a {
                Atom::Constant => 0,
                Atom::Standard { values, .. } => values.boundary_depth(),
            })
            .max()
            .unwrap_or(0);
        let mut acc = vec![Complex64::new(0.0, 0.0); tree.ball_len(depth)?];
        for (c, a) in &self.terms {
            let f = a.to_function(mp).extend_to(depth)?;
            for (slot, v) in acc.iter_mut().zip(f.values()) {
                *slot += c * v;
            }
        }
        TailConstantFunction::new(tree, depth, acc)
    }
}

/// `f = f_X 𝟙 + Σ_m (E_m f - E_{m-1} f)` with `E_m` the conditional
/// expectation on `𝒟_m`. Each difference, restricted to a set of
/// `𝒟_{m-1}` it splits, is rescaled to a `(1, ∞)`-atom.
pub fn atomic_decompose(mp: &MeasureParams, f: &TailConstantFunction) -> Result<AtomicDecomposition> {
    let tree = *mp.tree();
    let n = f.boundary_depth();
    let sums = f.sector_sums(mp, |c| c);
    let avg = |k: usize| sums[k] / mp.sector_or_total_mass_at_depth(tree.depth(VertexId(k as u128)));
    let mut terms = Vec::new();
    let mean = avg(0);
    if mean.norm() > 0.0 {
        terms.push((mean * mp.total_mass(), Atom::Constant));
    }
    for depth in 0..n {
        let (lo, hi) = tree.level_range(depth)?;
        for k in lo..=hi {
            let v = VertexId(k);
            let set = DyadicSet::sector(v);
            let f_d = avg(k as usize);
            let (clo, chi) = tree.child_range(v)?;
            let point = f.values()[k as usize] - f_d;
            let mut sup = point.norm();
            let mut scale = f.values()[k as usize].norm().max(f_d.norm());
            for c in clo..=chi {
                let f_c = avg(c as usize);
                sup = sup.max((f_c - f_d).norm());
                scale = scale.max(f_c.norm());
            }
            if sup <= NEGLIGIBLE_DIFFERENCE * scale || sup == 0.0 {
                continue;
            }
            let coefficient = sup * set.mass(mp);
            let values = TailConstantFunction::from_fn(tree, depth + 1, |y| {
                let diff = if y == v {
                    point
                } else if tree.depth(y) == depth + 1 && tree.parent(y).ok() == Some(v) {
                    avg(y.index()) - f_d
                } else {
                    Complex64::new(0.0, 0.0)
                };
                diff / coefficient
            })?;
            terms.push((Complex64::new(coefficient, 0.0), Atom::Standard { set, values, p: f64::INFINITY }));
        }
    }
    Ok(AtomicDecomposition { terms })
}

/// `Σ |c_j|` of [`atomic_decompose`]: an upper bound for the `H^1` norm.
pub fn h1_norm_upper(mp: &MeasureParams, f: &TailConstantFunction) -> Result<f64> {
    Ok(atomic_decompose(mp, f)?.coefficient_sum())
}

/// `sup_{D ∈ 𝒟} ((1/μ(D)) Σ_D |f - f_D|^r μ)^{1/r} + |Σ f μ|`.
pub fn bmo_norm(mp: &MeasureParams, f: &TailConstantFunction, r: f64) -> Result<f64> {
    Ok(bmo_oscillation(mp, f, r)? + f.integral(mp).norm())
}

/// The oscillation part of [`bmo_norm`]; only `X` and sectors rooted
/// strictly inside the stored ball can contribute.
pub fn bmo_oscillation(mp: &MeasureParams, f: &TailConstantFunction, r: f64) -> Result<f64> {
    if !(r >= 1.0) || r.is_infinite() {
        return Err(Error::InvalidParams(format!("r must be finite and at least 1, got {r}")));
    }
    let tree = mp.tree();
    let mut best: f64 = 0.0;
    for depth in 0..f.boundary_depth() {
        let (lo, hi) = tree.level_range(depth)?;
        for k in lo..=hi {
            best = best.max(f.oscillation(mp, DyadicSet::sector(VertexId(k)), r));
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InboxingReport {
    pub r: f64,
    pub bmo_1: f64,
    pub bmo_r: f64,
    pub holds: bool,
}

/// `‖f‖_{BMO_1} <= ‖f‖_{BMO_r}`.
pub fn inboxing_check(mp: &MeasureParams, f: &TailConstantFunction, r: f64) -> Result<InboxingReport> {
    if !(r > 1.0) {
        return Err(Error::InvalidParams(format!("r must exceed 1, got {r}")));
    }
    let bmo_1 = bmo_norm(mp, f, 1.0)?;
    let bmo_r = bmo_norm(mp, f, r)?;
    Ok(InboxingReport { r, bmo_1, bmo_r, holds: bmo_1 <= bmo_r * (1.0 + 1e-12) })
}

/// `Φ_f(a) = Σ_x f(x) a(x) μ(x)` for a valid atom `a`.
pub fn duality_pairing(mp: &MeasureParams, f: &TailConstantFunction, a: &Atom) -> Result<Complex64> {
    let check = validate_atom(mp, a)?;
    if !check.valid {
        return Err(Error::NotAnAtom(check.diagnostics.join("; ")));
    }
    Ok(f.zip_with(&a.to_function(mp), |x, y| x * y)?.integral(mp))
}
