use num_complex::Complex64;

use crate::dyadic::DyadicSet;
use crate::function::TailConstantFunction;
use crate::measure::MeasureParams;
use crate::tree::VertexId;

/// Propagates per-sector values down the stored ball, taking at every label
/// the maximum over its ancestors (itself included) and the point value.
fn top_down_max(f: &TailConstantFunction, sector: &[f64], point: impl Fn(usize) -> f64) -> TailConstantFunction {
    let tree = f.tree();
    let mut best = vec![0.0f64; sector.len()];
    let mut out = Vec::with_capacity(sector.len());
    for k in 0..sector.len() {
        let inherited = if k == 0 { 0.0 } else { best[tree.parent(VertexId(k as u128)).expect("non-origin").index()] };
        best[k] = inherited.max(sector[k]);
        out.push(Complex64::new(best[k].max(point(k)), 0.0));
    }
    TailConstantFunction::new(*tree, f.boundary_depth(), out).expect("same ball as the input")
}

/// `Mf(x) = sup_{x ∈ D ∈ 𝒟} |f|_D`.
pub fn hl_maximal(mp: &MeasureParams, f: &TailConstantFunction) -> TailConstantFunction {
    let sums = f.sector_sums(mp, |c| c.norm());
    let tree = f.tree();
    let avgs: Vec<f64> = sums
        .iter()
        .enumerate()
        .map(|(k, s)| s / mp.sector_or_total_mass_at_depth(tree.depth(VertexId(k as u128))))
        .collect();
    let values = f.values();
    top_down_max(f, &avgs, |k| values[k].norm())
}

/// `M♯f(x) = sup_{x ∈ D ∈ 𝒟} (1/μ(D)) Σ_{y ∈ D} |f(y) - f_D| μ(y)`.
///
/// Singletons and sectors rooted on the boundary sphere have zero
/// oscillation, so only `X` and the sectors strictly inside the ball count.
pub fn sharp_maximal(mp: &MeasureParams, f: &TailConstantFunction) -> TailConstantFunction {
    let n = f.boundary_depth();
    let tree = f.tree();
    let osc: Vec<f64> = (0..f.values().len())
        .map(|k| {
            let v = VertexId(k as u128);
            if tree.depth(v) < n {
                f.oscillation(mp, DyadicSet::sector(v), 1.0)
            } else {
                0.0
            }
        })
        .collect();
    top_down_max(f, &osc, |_| 0.0)
}
