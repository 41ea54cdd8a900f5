use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dyadic::{refine, DyadicSet};
use crate::error::{Error, Result};
use crate::function::TailConstantFunction;
use crate::measure::MeasureParams;
use crate::region::Region;
use crate::tree::VertexId;

/// Relative slack on the constant bounds, absorbing rounding only.
const BOUND_SLACK: f64 = 1e-9;
const RECONSTRUCTION_TOLERANCE: f64 = 1e-10;
const MEAN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CzOutput {
    pub lambda: f64,
    /// Stopping sets, ordered by first scale then label.
    pub q_sets: Vec<DyadicSet>,
    /// Sets of the descent on which `|f| <= λ`, in the same order.
    pub f_sets: Vec<DyadicSet>,
    /// `F = X \ Ω`.
    pub f_region: Region,
    pub g: TailConstantFunction,
    pub b_parts: Vec<(DyadicSet, TailConstantFunction)>,
}

impl CzOutput {
    /// `Ω = ⋃ 𝒬`.
    pub fn omega(&self) -> Region {
        let mut r = Region::empty();
        for d in &self.q_sets {
            match *d {
                DyadicSet::Singleton(v) => {
                    r.singletons.insert(v);
                }
                DyadicSet::Whole | DyadicSet::Sector(_) => {
                    r.sectors.insert(d.root());
                }
            }
        }
        r
    }

    /// `b = Σ_Q b_Q`.
    pub fn b(&self) -> Result<TailConstantFunction> {
        let mut b = TailConstantFunction::zero(*self.g.tree());
        for (_, part) in &self.b_parts {
            b = b.add(part)?;
        }
        Ok(b)
    }
}

/// `‖f‖_1 / μ(X)`: the decomposition needs `λ` strictly above it.
pub fn cz_threshold(mp: &MeasureParams, f: &TailConstantFunction) -> Result<f64> {
    Ok(f.lp_norm(mp, 1.0)? / mp.total_mass())
}

/// Stopping-time descent from `X`: a set whose `|f|`-average exceeds `λ`
/// stops in `𝒬`; otherwise a singleton, or a sector on which `f` is
/// constant, goes to `ℱ`, and anything else is refined.
pub fn cz_decompose(mp: &MeasureParams, f: &TailConstantFunction, lambda: f64) -> Result<CzOutput> {
    let threshold = cz_threshold(mp, f)?;
    if !(lambda > threshold) {
        return Err(Error::LevelTooSmall { lambda, threshold });
    }
    let tree = mp.tree();
    let n = f.boundary_depth();
    let abs_sums = f.sector_sums(mp, |c| c.norm());
    let mut q_sets = Vec::new();
    let mut f_sets = Vec::new();
    let mut stack = vec![DyadicSet::Whole];
    while let Some(d) = stack.pop() {
        let avg = match d {
            DyadicSet::Singleton(v) => f.evaluate(v).norm(),
            DyadicSet::Whole | DyadicSet::Sector(_) => abs_sums[d.root().index()] / d.mass(mp),
        };
        if avg > lambda {
            q_sets.push(d);
        } else if d.is_singleton() || tree.depth(d.root()) >= n {
            f_sets.push(d);
        } else {
            stack.extend(refine(tree, d)?.into_iter().rev());
        }
    }
    q_sets.sort_by_key(|d| d.order_key(tree));
    f_sets.sort_by_key(|d| d.order_key(tree));

    let mut g_values = f.values().to_vec();
    let mut b_parts = Vec::with_capacity(q_sets.len());
    for &q in &q_sets {
        let root = q.root();
        let dv = tree.depth(root);
        if q.is_singleton() || dv >= n {
            // f is constant on Q, so g = f there and b_Q vanishes.
            b_parts.push((q, TailConstantFunction::zero(*tree)));
            continue;
        }
        let mean = f.average_on(mp, q);
        for depth in dv..=n {
            let (lo, hi) = tree.sector_level_range(root, depth)?;
            for k in lo..=hi {
                g_values[k as usize] = mean;
            }
        }
        let b = TailConstantFunction::from_fn(*tree, n, |y| {
            if q.contains(tree, y) {
                f.evaluate(y) - mean
            } else {
                Complex64::new(0.0, 0.0)
            }
        })?;
        b_parts.push((q, b));
    }
    let g = TailConstantFunction::new(*tree, n, g_values)?;
    let mut out = CzOutput { lambda, q_sets, f_sets, f_region: Region::empty(), g, b_parts };
    out.f_region = out.omega().complement(tree);
    Ok(out)
}

/// Every property the decomposition promises, measured on one output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CzReport {
    pub lambda: f64,
    pub doubling_constant: f64,
    pub q_count: usize,
    pub partition_ok: bool,
    /// `sup_F |f|`.
    pub sup_on_f: f64,
    /// Smallest and largest `|f|_Q / λ`.
    pub min_stop_ratio: f64,
    pub max_stop_ratio: f64,
    pub worst_stop_set: Option<DyadicSet>,
    pub f_l1: f64,
    pub omega_mass: f64,
    pub g_l2_squared: f64,
    pub g_bound: f64,
    pub b_l1_sum: f64,
    pub b_bound: f64,
    pub reconstruction_error: f64,
    pub b_outside_omega: f64,
    pub max_b_mean: f64,
    pub violations: Vec<String>,
}

impl CzReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn sets_overlap(tree: &crate::tree::TreeParams, a: DyadicSet, b: DyadicSet) -> bool {
    a.contains(tree, b.root()) || b.contains(tree, a.root())
}

pub fn verify_cz(mp: &MeasureParams, f: &TailConstantFunction, out: &CzOutput) -> Result<CzReport> {
    let tree = mp.tree();
    let lambda = out.lambda;
    let c = mp.doubling_constant();
    let mut violations = Vec::new();

    let disjoint = out
        .q_sets
        .iter()
        .enumerate()
        .all(|(i, a)| out.q_sets[i + 1..].iter().all(|b| !sets_overlap(tree, *a, *b)));
    let omega = out.omega();
    let covers = omega.union(tree, &out.f_region).set_eq(tree, &Region::whole())
        && omega.is_disjoint(tree, &out.f_region);
    let mut family = Region::empty();
    for d in &out.f_sets {
        family = family.union(tree, &d.to_region());
    }
    let partition_ok = disjoint && covers && family.set_eq(tree, &out.f_region);
    if !partition_ok {
        violations.push("partition".to_string());
    }

    let sup_on_f = out.f_sets.iter().map(|d| f.sup_abs_on(*d)).fold(0.0, f64::max);
    if sup_on_f > lambda {
        violations.push("|f| <= lambda on F".to_string());
    }

    let mut min_stop_ratio = f64::INFINITY;
    let mut max_stop_ratio: f64 = 0.0;
    let mut worst_stop_set = None;
    for q in &out.q_sets {
        let r = f.abs_average_on(mp, *q) / lambda;
        min_stop_ratio = min_stop_ratio.min(r);
        if r > max_stop_ratio {
            max_stop_ratio = r;
            worst_stop_set = Some(*q);
        }
    }
    if out.q_sets.is_empty() {
        min_stop_ratio = 0.0;
    } else {
        if !(min_stop_ratio > 1.0) {
            violations.push("lambda < average on Q".to_string());
        }
        if max_stop_ratio > c * (1.0 + BOUND_SLACK) {
            violations.push("average on Q <= C_alpha lambda".to_string());
        }
    }

    let f_l1 = f.lp_norm(mp, 1.0)?;
    let omega_mass = omega.mass(mp)?;
    if omega_mass > f_l1 / lambda * (1.0 + BOUND_SLACK) {
        violations.push("mu(Omega) <= ||f||_1 / lambda".to_string());
    }
    let g_l2_squared = out.g.lp_norm(mp, 2.0)?.powi(2);
    let g_bound = (1.0 + c * c) * lambda * f_l1;
    if g_l2_squared > g_bound * (1.0 + BOUND_SLACK) {
        violations.push("||g||_2^2 <= (1 + C^2) lambda ||f||_1".to_string());
    }
    let mut b_l1_sum = 0.0;
    let mut max_b_mean: f64 = 0.0;
    for (q, b) in &out.b_parts {
        b_l1_sum += b.lp_norm(mp, 1.0)?;
        max_b_mean = max_b_mean.max(b.integral(mp).norm() / q.mass(mp));
    }
    let b_bound = (1.0 + c) * f_l1;
    if b_l1_sum > b_bound * (1.0 + BOUND_SLACK) {
        violations.push("sum ||b_Q||_1 <= (1 + C) ||f||_1".to_string());
    }
    if max_b_mean >= MEAN_TOLERANCE {
        violations.push("b_Q has vanishing mean".to_string());
    }

    let b = out.b()?;
    let depth = f.boundary_depth().max(out.g.boundary_depth()).max(b.boundary_depth()) + 1;
    let mut reconstruction_error: f64 = 0.0;
    let mut b_outside_omega: f64 = 0.0;
    for k in 0..tree.ball_len(depth)? as u128 {
        let x = VertexId(k);
        let bx = b.evaluate(x);
        reconstruction_error = reconstruction_error.max((f.evaluate(x) - out.g.evaluate(x) - bx).norm());
        if !omega.contains(tree, x) {
            b_outside_omega = b_outside_omega.max(bx.norm());
        }
    }
    if reconstruction_error >= RECONSTRUCTION_TOLERANCE {
        violations.push("f = g + b".to_string());
    }
    if b_outside_omega > 0.0 {
        violations.push("supp b within Omega".to_string());
    }

    Ok(CzReport {
        lambda,
        doubling_constant: c,
        q_count: out.q_sets.len(),
        partition_ok,
        sup_on_f,
        min_stop_ratio,
        max_stop_ratio,
        worst_stop_set,
        f_l1,
        omega_mass,
        g_l2_squared,
        g_bound,
        b_l1_sum,
        b_bound,
        reconstruction_error,
        b_outside_omega,
        max_b_mean,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mp() -> MeasureParams {
        MeasureParams::new(2, 2.0).unwrap()
    }

    #[test]
    fn zero_function() {
        let mp = mp();
        let z = TailConstantFunction::zero(*mp.tree());
        let out = cz_decompose(&mp, &z, 1.0).unwrap();
        assert!(out.q_sets.is_empty());
        assert_eq!(out.f_region, Region::whole());
        assert!(verify_cz(&mp, &z, &out).unwrap().passed());
    }

    #[test]
    fn delta_at_origin_trace() {
        let mp = mp();
        let t = *mp.tree();
        let d = TailConstantFunction::delta(t, VertexId(0)).unwrap();
        let out = cz_decompose(&mp, &d, 0.5).unwrap();
        assert_eq!(out.q_sets, vec![DyadicSet::Singleton(VertexId(0))]);
        assert_eq!(out.f_region, Region::from_parts(&t, [VertexId(1), VertexId(2), VertexId(3)], []).unwrap());
        assert_eq!(out.g.evaluate(VertexId(0)).re, 1.0);
        assert_eq!(out.g.evaluate(VertexId(7)).re, 0.0);
        assert_eq!(out.b().unwrap().lp_norm(&mp, f64::INFINITY).unwrap(), 0.0);
        assert!(verify_cz(&mp, &d, &out).unwrap().passed());
    }

    #[test]
    fn level_at_or_below_threshold_rejected() {
        let mp = mp();
        let d = TailConstantFunction::delta(*mp.tree(), VertexId(0)).unwrap();
        assert!(matches!(cz_decompose(&mp, &d, 0.3), Err(Error::LevelTooSmall { .. })));
        assert!(matches!(cz_decompose(&mp, &d, 0.4), Err(Error::LevelTooSmall { .. })));
    }

    #[test]
    fn sector_stopping_sets_carry_mean_zero_parts() {
        let mp = MeasureParams::new(3, 1.5).unwrap();
        let t = *mp.tree();
        let f = TailConstantFunction::from_fn(t, 3, |v| {
            if t.in_sector(v, VertexId(2)) {
                Complex64::new(3.0 + (v.0 % 4) as f64, (v.0 % 3) as f64)
            } else {
                Complex64::new(0.1, 0.0)
            }
        })
        .unwrap();
        let lambda = cz_threshold(&mp, &f).unwrap() * 1.5;
        let out = cz_decompose(&mp, &f, lambda).unwrap();
        assert!(out.q_sets.iter().any(|q| matches!(q, DyadicSet::Sector(_))));
        let report = verify_cz(&mp, &f, &out).unwrap();
        assert!(report.passed(), "{:?}", report.violations);
    }

    /// With `μ(X) > C_α` a spike at the origin stops at `{o}` with an average
    /// above `C_α λ` for every `λ` just over the threshold.
    #[test]
    fn origin_spike_exceeds_stopping_bound_when_total_mass_is_large() {
        let mp = MeasureParams::new(2, 1.2).unwrap();
        assert!(mp.total_mass() > mp.doubling_constant());
        let d = TailConstantFunction::delta(*mp.tree(), VertexId(0)).unwrap();
        let lambda = cz_threshold(&mp, &d).unwrap() * 1.01;
        let out = cz_decompose(&mp, &d, lambda).unwrap();
        assert_eq!(out.q_sets, vec![DyadicSet::Singleton(VertexId(0))]);
        let report = verify_cz(&mp, &d, &out).unwrap();
        assert_eq!(report.violations, vec!["average on Q <= C_alpha lambda".to_string()]);
        assert!(report.max_stop_ratio <= mp.sharp_doubling_constant());
    }
}
