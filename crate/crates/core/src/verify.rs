//! Randomised and exhaustive verification suites with witness reports.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::czmax::{
    cz_decompose, cz_threshold, fefferman_stein_check, good_lambda_check, hl_maximal, optimizing_selector, s_phi_eta,
    sharp_maximal, verify_cz, weak_11_check,
};
use crate::dyadic::{dyadic_parent, measure_ratio_check, partition_at_scale, refine, DyadicSet};
use crate::error::{Error, Result};
use crate::function::TailConstantFunction;
use crate::hardy_bmo::{atomic_decompose, bmo_norm, conjugate_exponent, duality_pairing, inboxing_check, validate_atom};
use crate::measure::{boundary_radius_grid, FinitenessBounds, MeasureParams, ReferenceMeasure};
use crate::operators::{adjoint, apply_operator, hormander_constant, l2_inner, l2_operator_norm, FiniteKernel};
use crate::sampling::{log_uniform_grid, random_atom, random_function, random_kernel, random_selector, sample_rng};
use crate::tree::{TreeParams, VertexId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Geometry,
    Doubling,
    Dyadic,
    Weak11,
    Czd,
    #[serde(rename = "goodlambda")]
    GoodLambda,
    #[serde(rename = "feffermanstein")]
    FeffermanStein,
    Inboxing,
    Duality,
    #[serde(rename = "supS")]
    SupS,
    Atoms,
    Operators,
    Reference,
}

impl Suite {
    pub const ALL: [Suite; 13] = [
        Suite::Geometry,
        Suite::Doubling,
        Suite::Dyadic,
        Suite::Weak11,
        Suite::Czd,
        Suite::GoodLambda,
        Suite::FeffermanStein,
        Suite::Inboxing,
        Suite::Duality,
        Suite::SupS,
        Suite::Atoms,
        Suite::Operators,
        Suite::Reference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Geometry => "geometry",
            Suite::Doubling => "doubling",
            Suite::Dyadic => "dyadic",
            Suite::Weak11 => "weak11",
            Suite::Czd => "czd",
            Suite::GoodLambda => "goodlambda",
            Suite::FeffermanStein => "feffermanstein",
            Suite::Inboxing => "inboxing",
            Suite::Duality => "duality",
            Suite::SupS => "supS",
            Suite::Atoms => "atoms",
            Suite::Operators => "operators",
            Suite::Reference => "reference",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParams(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub q: u32,
    pub alpha: f64,
    pub seed: u64,
    pub samples: usize,
    /// Largest boundary depth of sampled functions.
    pub function_depth: u32,
    /// Depth for exhaustive geometric checks (triples, doubling centres).
    pub geometry_depth: u32,
    /// Depth for per-vertex checks and the largest dyadic scale.
    pub scale_depth: u32,
    /// Depth of the nesting-law check on pairs of dyadic sets.
    pub nesting_depth: u32,
    pub radius_levels: u32,
    pub radius_count: usize,
    pub lambdas_per_sample: usize,
    pub cz_levels: usize,
    /// Good-lambda levels as multiples of `‖f‖_1 / μ(X)`.
    pub lambda_factors: Vec<f64>,
    pub gammas: Vec<f64>,
    pub ps: Vec<f64>,
    pub rs: Vec<f64>,
    pub pairs: usize,
    pub kernels: usize,
    pub kernel_depth: u32,
}

impl SuiteConfig {
    pub fn new(q: u32, alpha: f64, seed: u64) -> Self {
        SuiteConfig {
            q,
            alpha,
            seed,
            samples: 200,
            function_depth: if q <= 2 { 6 } else { 4 },
            geometry_depth: 6,
            scale_depth: 8,
            nesting_depth: 5,
            radius_levels: 8,
            radius_count: 50,
            lambdas_per_sample: 20,
            cz_levels: 5,
            lambda_factors: vec![1.0, 1.25, 2.0, 3.0, 5.0, 10.0],
            gammas: vec![0.01, 0.05, 0.1, 0.2, 0.5],
            ps: vec![1.5, 2.0, 4.0],
            rs: vec![2.0, 3.0],
            pairs: 500,
            kernels: 50,
            kernel_depth: 3,
        }
    }

    pub fn measure(&self) -> Result<MeasureParams> {
        MeasureParams::new(self.q, self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub sample: Option<u64>,
    pub description: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub q: u32,
    pub alpha: f64,
    pub seed: u64,
    pub cases: u64,
    pub violations: u64,
    /// The first violation, or else the tightest case.
    pub witness: Option<Witness>,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Running totals for one suite.
#[derive(Debug, Default)]
struct Tally {
    cases: u64,
    violations: u64,
    first_violation: Option<Witness>,
    tightest: Option<Witness>,
    metrics: BTreeMap<String, f64>,
    notes: Vec<String>,
}

impl Tally {
    /// Records one check; `tightness` is larger for cases closer to failing.
    fn check(&mut self, ok: bool, sample: Option<u64>, tightness: f64, description: impl FnOnce() -> String) {
        self.cases += 1;
        let replace_tight = self.tightest.as_ref().is_none_or(|w| tightness > w.value);
        if !ok {
            self.violations += 1;
        }
        if (!ok && self.first_violation.is_none()) || replace_tight {
            let w = Witness { sample, description: description(), value: tightness };
            if !ok && self.first_violation.is_none() {
                self.first_violation = Some(w.clone());
            }
            if replace_tight {
                self.tightest = Some(w);
            }
        }
    }

    fn max_metric(&mut self, key: &str, value: f64) {
        let e = self.metrics.entry(key.to_string()).or_insert(f64::NEG_INFINITY);
        *e = e.max(value);
    }

    fn add_metric(&mut self, key: &str, value: f64) {
        *self.metrics.entry(key.to_string()).or_insert(0.0) += value;
    }

    fn merge(&mut self, other: Tally) {
        self.cases += other.cases;
        self.violations += other.violations;
        if self.first_violation.is_none() {
            self.first_violation = other.first_violation;
        }
        if let Some(w) = other.tightest {
            if self.tightest.as_ref().is_none_or(|t| w.value > t.value) {
                self.tightest = Some(w);
            }
        }
        for (k, v) in other.metrics {
            match self.metrics.get_mut(&k) {
                Some(cur) if k.starts_with("max_") || k.starts_with("worst_") => *cur = cur.max(v),
                Some(cur) => *cur += v,
                None => {
                    self.metrics.insert(k, v);
                }
            }
        }
        self.notes.extend(other.notes);
    }

    fn into_report(self, suite: Suite, cfg: &SuiteConfig) -> SuiteReport {
        SuiteReport {
            suite,
            q: cfg.q,
            alpha: cfg.alpha,
            seed: cfg.seed,
            cases: self.cases,
            violations: self.violations,
            witness: self.first_violation.or(self.tightest),
            metrics: self.metrics,
            notes: self.notes,
        }
    }
}

/// Runs `body` once per sample, each with its own stream, and merges the
/// tallies in sample order.
fn per_sample(cfg: &SuiteConfig, count: usize, body: impl Fn(u64, &mut ChaCha8Rng, &mut Tally) -> Result<()> + Sync) -> Result<Tally> {
    let tallies: Vec<Tally> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(cfg.seed, i);
            let mut t = Tally::default();
            body(i, &mut rng, &mut t)?;
            Ok(t)
        })
        .collect::<Result<_>>()?;
    let mut total = Tally::default();
    for t in tallies {
        total.merge(t);
    }
    Ok(total)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn ball_labels(tree: &TreeParams, depth: u32) -> Result<Vec<VertexId>> {
    Ok((0..tree.ball_len(depth)? as u128).map(VertexId).collect())
}

pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mp = cfg.measure()?;
    let tally = match suite {
        Suite::Geometry => geometry(&mp, cfg)?,
        Suite::Doubling => doubling(&mp, cfg)?,
        Suite::Dyadic => dyadic(&mp, cfg)?,
        Suite::Weak11 => weak11(&mp, cfg)?,
        Suite::Czd => czd(&mp, cfg)?,
        Suite::GoodLambda => goodlambda(&mp, cfg)?,
        Suite::FeffermanStein => feffermanstein(&mp, cfg)?,
        Suite::Inboxing => inboxing(&mp, cfg)?,
        Suite::Duality => duality(&mp, cfg)?,
        Suite::SupS => sup_s(&mp, cfg)?,
        Suite::Atoms => atoms(&mp, cfg)?,
        Suite::Operators => operators(&mp, cfg)?,
        Suite::Reference => reference(&mp, cfg)?,
    };
    Ok(tally.into_report(suite, cfg))
}

fn geometry(mp: &MeasureParams, cfg: &SuiteConfig) -> Result<Tally> {
    let tree = mp.tree();
    let mut t = Tally::default();
    for v in ball_labels(tree, cfg.scale_depth)? {
        let children = tree.children(v)?;
        let ok = children.len() as u32 == if v.is_origin() { tree.q() + 1 } else { tree.q() }
            && children.iter().all(|c| tree.parent(*c).ok() == Some(v) && tree.depth(*c) == tree.depth(v) + 1)
            && (v.is_origin() || tree.children(tree.parent(v)?)?.contains(&v));
        t.check(ok, None, 0.0, || format!("parent/children round trip at {v}"));
    }

    // ρ(x, z) <= max(ρ(x, y), ρ(y, z)) over a dense distance table.
    let labels = ball_labels(tree, cfg.geometry_depth)?;
    let n = labels.len();
    let dist: Vec<f64> = labels.iter().flat_map(|x| labels.iter().map(move |y| tree.gromov_distance(*x, *y))).collect();
    let bad: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|x| {
            let row_x = &dist[x * n..(x + 1) * n];
            let dist = &dist;
            (0..n).filter_map(move |y| {
                let dxy = row_x[y];
                let row_y = &dist[y * n..(y + 1) * n];
                let ok = row_x.iter().zip(row_y).all(|(dxz, dyz)| *dxz <= dxy.max(*dyz));
                (!ok).then_some((x, y))
            })
        })
        .collect();
    t.cases += (n * n) as u64;
    t.violations += bad.len() as u64;
    if let Some((x, y)) = bad.first() {
        t.first_violation.get_or_insert(Witness {
            sample: None,
            description: format!("ultrametric inequality fails for x = v{x}, y = v{y}"),
            value: 1.0,
        });
    }
    t.metrics.insert("triples".into(), (n * n * n) as f64);

    // |x| + 2 distinct balls, found by scanning radii across every jump.
    let mut radii = boundary_radius_grid(cfg.scale_depth + 2, 4 * (cfg.scale_depth as usize + 2) + 20);
    radii.extend([1.5, 3.0, 10.0]);
    for x in ball_labels(tree, cfg.scale_depth)? {
        let mut seen = HashSet::new();
        for &r in &radii {
            seen.insert(tree.gromov_ball(x, r)?.resolved);
        }
        let expected = tree.depth(x) as usize + 2;
        let ok = seen.len() == expected && tree.distinct_balls(x).len() == expected;
        t.check(ok, None, 0.0, || format!("{x} has {} distinct balls, expected {expected}", seen.len()));
    }
    Ok(t)
}

/// `Σ_{l >= 0} q^l q^{-α(n + l)}` summed term by term.
fn sector_mass_series(mp: &MeasureParams, n: u32) -> f64 {
    let q = mp.q() as f64;
    let mut sum = 0.0;
    for l in 0..100_000 {
        let term = q.powi(l) * q.powf(-mp.alpha() * (n + l as u32) as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

fn doubling(mp: &MeasureParams, cfg: &SuiteConfig) -> Result<Tally> {
    let mut t = Tally::default();
    let q = mp.q() as f64;
    let a = mp.alpha();
    let tol = 1e-12;
    for n in 1..=cfg.scale_depth {
        let closed = mp.sector_mass_at_depth(n);
        let recursive = mp.point_mass_at_depth(n) + q * mp.sector_mass_at_depth(n + 1);
        let series = sector_mass_series(mp, n);
        t.check(rel_close(closed, recursive, tol) && rel_close(closed, series, 1e-11), None, 0.0, || {
            format!("sector mass at depth {n}: closed {closed}, recursive {recursive}, series {series}")
        });
        let r1 = mp.sector_mass_at_depth(n) / mp.point_mass_at_depth(n);
        t.check(rel_close(r1, 1.0 / (1.0 - q.powf(1.0 - a)), tol), None, 0.0, || format!("mu(T_x)/mu(x) = {r1} at depth {n}"));
        if n >= 2 {
            let r2 = mp.sector_mass_at_depth(n - 1) / mp.sector_mass_at_depth(n);
            t.check(rel_close(r2, q.powf(a), tol), None, 0.0, || format!("mu(T_p(x))/mu(T_x) = {r2} at depth {n}"));
        }
    }
    let total = mp.point_mass_at_depth(0) + (q + 1.0) * mp.sector_mass_at_depth(1);
    t.check(rel_close(total, mp.total_mass(), tol), None, 0.0, || format!("total mass {} vs {total}", mp.total_mass()));
    let r3 = mp.total_mass() / mp.sector_mass_at_depth(1);
    t.check(rel_close(r3, q.powf(a) + 1.0, tol), None, 0.0, || format!("mu(X)/mu(T_x) = {r3} at depth 1"));

    let grid = boundary_radius_grid(cfg.radius_levels, cfg.radius_count);
    let report = mp.verify_doubling(cfg.geometry_depth, &grid)?;
    t.cases += report.cases;
    t.violations += report.violations;
    if report.violations > 0 {
        t.first_violation.get_or_insert(Witness {
            sample: None,
            description: format!(
                "mu(B(x, 2r)) / mu(B(x, r)) = {} > C_alpha = {} at x = {}, r = {}",
                report.worst_ratio,
                report.doubling_constant,
                report.worst_center.map_or("-".into(), |c| c.to_string()),
                report.worst_radius.unwrap_or(f64::NAN)
            ),
            value: report.worst_ratio,
        });
    }
    t.metrics.insert("worst_doubling_ratio".into(), report.worst_ratio);
    t.metrics.insert("doubling_constant".into(), report.doubling_constant);
    t.metrics.insert("sharp_doubling_constant".into(), mp.sharp_doubling_constant());
    Ok(t)
}

/// Bitset of `D ∩ B(o, depth)`.
fn bitset(tree: &TreeParams, d: DyadicSet, labels: &[VertexId]) -> Vec<u64> {
    let mut bits = vec![0u64; labels.len().div_ceil(64)];
    for (i, x) in labels.iter().enumerate() {
        if d.contains(tree, *x) {
            bits[i / 64] |= 1 << (i % 64);
        }
    }
    bits
}

fn dyadic(mp: &MeasureParams, cfg: &SuiteConfig) -> Result<Tally> {
    let tree = mp.tree();
    let mut t = Tally::default();
    for m in 0..=cfg.scale_depth {
        let members: Vec<DyadicSet> = partition_at_scale(tree, m)?.collect();
        let set: HashSet<DyadicSet> = members.iter().copied().collect();
        let expected = tree.cumulative_count(m)? + 1;
        t.check(members.len() as u128 == expected && set.len() == members.len(), None, 0.0, || {
            format!("scale {m} has {} members, expected {expected}", members.len())
        });
        let mass: f64 = members.iter().map(|d| d.mass(mp)).sum();
        t.check(rel_close(mass, mp.total_mass(), 1e-12), None, 0.0, || format!("scale {m} masses sum to {mass}"));
        // every vertex lies in exactly one member
        for x in ball_labels(tree, m + 1)? {
            let hits = crate::dyadic::containing_sets(tree, x).into_iter().filter(|d| set.contains(d)).count();
            t.check(hits == 1, None, 0.0, || format!("{x} lies in {hits} members of scale {m}"));
        }
        if m >= 1 {
            for d in &members {
                let p = dyadic_parent(tree, *d, m)?;
                let ok = p.is_member_at_scale(tree, m - 1)
                    && p.contains(tree, d.root())
                    && refine(tree, p)?.contains(d)
                    && d.mass(mp) <= p.mass(mp);
                t.check(ok, None, 0.0, || format!("{d} at scale {m} does not refine {p}"));
            }
        }
    }
    let ratio = measure_ratio_check(mp, cfg.scale_depth)?;
    t.cases += ratio.pairs_checked;
    t.violations += ratio.violations;
    if ratio.violations > 0 {
        t.first_violation.get_or_insert(Witness {
            sample: None,
            description: format!(
                "mu({}) / mu({}) = {} > C_alpha = {}",
                ratio.max_ratio_parent.map_or("-".into(), |d| d.to_string()),
                ratio.max_ratio_child.map_or("-".into(), |d| d.to_string()),
                ratio.max_ratio,
                ratio.doubling_constant
            ),
            value: ratio.max_ratio,
        });
    }
    t.metrics.insert("worst_measure_ratio".into(), ratio.max_ratio);
    t.metrics.insert("doubling_constant".into(), ratio.doubling_constant);

    // nesting law: any two sets are disjoint or nested
    let mut sets = Vec::new();
    for v in ball_labels(tree, cfg.nesting_depth)? {
        sets.push(DyadicSet::sector(v));
        sets.push(DyadicSet::Singleton(v));
    }
    let labels = ball_labels(tree, cfg.nesting_depth + 1)?;
    let bits: Vec<Vec<u64>> = sets.iter().map(|d| bitset(tree, *d, &labels)).collect();
    let bad: Vec<(usize, usize)> = (0..sets.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let bits = &bits;
            (i + 1..bits.len()).filter_map(move |j| {
                let (a, b) = (&bits[i], &bits[j]);
                let meet = a.iter().zip(b).any(|(x, y)| x & y != 0);
                let a_in_b = a.iter().zip(b).all(|(x, y)| x & !y == 0);
                let b_in_a = a.iter().zip(b).all(|(x, y)| y & !x == 0);
                (meet && !a_in_b && !b_in_a).then_some((i, j))
            })
        })
        .collect();
    let n = sets.len() as u64;
    t.cases += n * (n - 1) / 2;
    t.violations += bad.len() as u64;
    if let Some((i, j)) = bad.first() {
        t.first_violation.get_or_insert(Witness {
            sample: None,
            description: format!("{} and {} overlap without nesting", sets[*i], sets[*j]),
            value: 1.0,
        });
    }
    Ok(t)
}

fn weak11(mp: &MeasureParams, cfg: &SuiteConfig) -> Result<Tally> {
    per_sample(cfg, cfg.samples, |i, rng, t| {
        let f = random_function(rng, mp.tree(), cfg.function_depth)?;
        let top = f.lp_norm(mp, f64::INFINITY)?.max(1e-3);
        let lambdas = log_uniform_grid(rng, top * 1e-2, top * 2.0, cfg.lambdas_per_sample);
        let r = weak_11_check(mp, &f, &lambdas)?;
        for c in &r.cases {
            t.check(c.holds, Some(i), c.quotient, || {
                format!("lambda = {}: mu(Mf > lambda) = {} vs ||f||_1 / lambda = {}", c.lambda, c.level_mass, c.bound)
            });
        }
        t.max_metric("max_quotient", r.worst_quotient);
        Ok(())
    })
}

fn czd(mp: &MeasureParams, cfg: &SuiteConfig) -> Result<Tally> {
    per_sample(cfg, cfg.samples, |i, rng, t| {
        let f = random_function(rng, mp.tree(), cfg.function_depth)?;
        let threshold = cz_threshold(mp, &f)?;
        let lambdas: Vec<f64> = if threshold > 0.0 {
            log_uniform_grid(rng, 1.001, 20.0, cfg.cz_levels).into_iter().map(|s| s * threshold).collect()
        } else {
            log_uniform_grid(rng, 0.01, 1.0, cfg.cz_levels)
        };
        for lambda in lambdas {
            let out = cz_decompose(mp, &f, lambda)?;
            let r = verify_cz(mp, &f, &out)?;
            t.check(r.passed(), Some(i), r.max_stop_ratio / r.doubling_constant, || {
                format!("lambda = {lambda}: {:?}; max avg_Q / lambda = {}", r.violations, r.max_stop_ratio)
            });
            for v in &r.violations {
                t.add_metric(&format!("violations: {v}"), 1.0);
            }
            t.max_metric("max_stop_ratio", r.max_stop_ratio);
            t.max_metric("max_reconstruction_error", r.reconstruction_error);
            t.max_metric("max_b_mean", r.max_b_mean);
            t.max_metric("max_g_ratio", if r.g_bound > 0.0 { r.g_l2_squared / r.g_bound } else { 0.0 });
            t.max_metric("max_b_ratio", if r.b_bound > 0.0 { r.b_l1_sum / r.b_bound } else { 0.0 });
        }
        Ok(())
    })
}

fn goodlambda(mp: &MeasureParams, cfg: &SuiteConfig) -> Result<Tally> {
    per_sample(cfg, cfg.samples, |i, rng, t| {
        let f = random_function(rng, mp.tree(), cfg.function_depth)?;
        let threshold = cz_threshold(mp, &f)?;
        let base = if threshold > 0.0 { threshold } else { 1.0 };
        for &s in &cfg.lambda_factors {
            for &gamma in &cfg.gammas {
                let lambda = s * base;
                let r = good_lambda_check(mp, &f, lambda, gamma)?;
                let tight = if r.rhs > 0.0 { r.left_mass / r.rhs } else if r.left_mass > 0.0 { f64::INFINITY } else { 0.0 };
                t.check(r.holds, Some(i), tight, || {
                    format!("lambda = {lambda}, gamma = {gamma}: left {} > C' gamma right = {}", r.left_mass, r.rhs)
                });
                if !r.holds_non_strict {
                    t.add_metric("non_strict_variant_violations", 1.0);
                }
                t.max_metric("max_left_over_rhs", tight);
            }
        }
        Ok(())
    })
}

fn feffermanstein(mp: &MeasureParams, cfg: &SuiteConfig) -> Result<Tally> {
    per_sample(cfg, cfg.samples, |i, rng, t| {
        let f = random_function(rng, mp.tree(), cfg.function_depth)?;
        for &p in &cfg.ps {
            let r = fefferman_stein_check(mp, &f, p)?;
            if !r.applicable() {
                t.add_metric("not_applicable", 1.0);
                continue;
            }
            let qf = r.quotient_f.unwrap_or(0.0);
            t.check(r.holds_f == Some(true), Some(i), qf / r.n_p, || {
                format!("p = {p}: ||f||_p / ||M#f||_p = {qf} vs N_p = {}", r.n_p)
            });
            t.check(r.holds_maximal == Some(true), Some(i), r.quotient_maximal.unwrap_or(0.0) / r.n_p, || {
                format!("p = {p}: ||Mf||_p / ||M#f||_p = {:?} vs N_p = {}", r.quotient_maximal, r.n_p)
            });
            t.max_metric(&format!("worst_quotient_f_p{p}"), qf);
            t.max_metric(&format!("worst_quotient_maximal_p{p}"), r.quotient_maximal.unwrap_or(0.0));
            t.max_metric(&format!("n_p{p}"), r.n_p);
        }
        Ok(())
    })
}

fn inboxing(mp: &MeasureParams, cfg: &SuiteConfig) -> Result<Tally> {
    per_sample(cfg, cfg.samples, |i, rng, t| {
        let f = random_function(rng, mp.tree(), cfg.function_depth)?;
        for &r in &cfg.rs {
            let rep = inboxing_check(mp, &f, r)?;
            let tight = if rep.bmo_r > 0.0 { rep.bmo_1 / rep.bmo_r } else { 0.0 };
            t.check(rep.holds, Some(i), tight, || format!("r = {r}: BMO_1 = {} > BMO_r = {}", rep.bmo_1, rep.bmo_r));
        }
        Ok(())
    })
}

const ATOM_EXPONENTS: [f64; 4] = [1.5, 2.0, 4.0, f64::INFINITY];

fn duality(mp: &MeasureParams, cfg: &SuiteConfig) -> Result<Tally> {
    per_sample(cfg, cfg.pairs, |i, rng, t| {
        let f = random_function(rng, mp.tree(), cfg.function_depth)?;
        let p = *ATOM_EXPONENTS.choose(rng).expect("nonempty");
        let a = random_atom(rng, mp, cfg.function_depth.max(1), p)?;
        let pairing = duality_pairing(mp, &f, &a)?.norm();
        let bound = bmo_norm(mp, &f, conjugate_exponent(p))?;
        let tight = if bound > 0.0 { pairing / bound } else { 0.0 };
        t.check(pairing <= bound + 1e-9, Some(i), tight, || format!("p = {p}: |<f, a>| = {pairing} > BMO_p' = {bound}"));
        Ok(())
    })
}

fn sup_s(mp: &MeasureParams, cfg: &SuiteConfig) -> Result<Tally> {
    let tree = *mp.tree();
    per_sample(cfg, cfg.samples, |i, rng, t| {
        let f = random_function(rng, &tree, cfg.function_depth)?;
        let sharp = sharp_maximal(mp, &f);
        let points = ball_labels(&tree, f.boundary_depth() + 1)?;
        let random = random_selector(rng, &tree, &points, f.boundary_depth())?;
        for (x, s) in s_phi_eta(mp, &f, &random)? {
            let m = sharp.evaluate(x).re;
            t.check(s.norm() <= m + 1e-12 * (1.0 + m), Some(i), s.norm() - m, || {
                format!("random selector: |S f({x})| = {} > M#f = {m}", s.norm())
            });
        }
        let best = optimizing_selector(mp, &f, &points);
        for (x, s) in s_phi_eta(mp, &f, &best)? {
            let gap = (s - Complex64::new(sharp.evaluate(x).re, 0.0)).norm();
            t.check(gap <= 1e-10, Some(i), gap, || format!("optimiser misses M#f at {x} by {gap}"));
            t.max_metric("max_optimizer_gap", gap);
        }
        Ok(())
    })
}

fn atoms(mp: &MeasureParams, cfg: &SuiteConfig) -> Result<Tally> {
    let tree = *mp.tree();
    per_sample(cfg, cfg.samples, |i, rng, t| {
        let f = random_function(rng, &tree, cfg.function_depth)?;
        let d = atomic_decompose(mp, &f)?;
        let back = d.reconstruct(mp)?;
        let mut err: f64 = 0.0;
        for x in ball_labels(&tree, f.boundary_depth() + 1)? {
            err = err.max((back.evaluate(x) - f.evaluate(x)).norm());
        }
        t.check(err < 1e-10, Some(i), err, || format!("decomposition misses f by {err}"));
        t.max_metric("max_reconstruction_error", err);
        for (_, a) in &d.terms {
            let c = validate_atom(mp, a)?;
            t.check(c.valid, Some(i), 0.0, || format!("decomposition atom invalid: {:?}", c.diagnostics));
        }
        let l1 = f.lp_norm(mp, 1.0)?;
        let h1 = d.coefficient_sum();
        t.check(l1 <= h1 * (1.0 + 1e-12) + 1e-15, Some(i), 0.0, || format!("||f||_1 = {l1} exceeds the H1 bound {h1}"));
        for &p in &ATOM_EXPONENTS {
            let a = random_atom(rng, mp, cfg.function_depth.max(1), p)?;
            let c = validate_atom(mp, &a)?;
            let l1 = a.to_function(mp).lp_norm(mp, 1.0)?;
            t.check(c.valid && l1 <= 1.0 + 1e-10, Some(i), l1, || format!("sampled atom: {:?}, ||a||_1 = {l1}", c.diagnostics));
        }
        Ok(())
    })
}

/// The Hörmander supremum by plain enumeration of `v`, `x`, `y` and `z`
/// over the ball one level deeper than the kernel.
pub fn hormander_brute_force(mp: &MeasureParams, k: &FiniteKernel) -> Result<f64> {
    let tree = mp.tree();
    let depth = k.depth_bound(tree) + 1;
    let labels = ball_labels(tree, depth)?;
    let mut best: f64 = 0.0;
    for &v in labels.iter().skip(1) {
        let inside: Vec<VertexId> = labels.iter().copied().filter(|x| tree.in_sector(*x, v)).collect();
        for &x in &inside {
            for &y in &inside {
                let mut s = 0.0;
                for &z in &labels {
                    if !tree.in_sector(z, v) {
                        s += (k.get(z, x) - k.get(z, y)).norm() * mp.point_mass(z);
                    }
                }
                best = best.max(s);
            }
        }
    }
    Ok(best)
}

fn operators(mp: &MeasureParams, cfg: &SuiteConfig) -> Result<Tally> {
    let tree = *mp.tree();
    let mut t = per_sample(cfg, cfg.kernels, |i, rng, t| {
        let entries = rng.gen_range(1..=12);
        let k = random_kernel(rng, &tree, cfg.kernel_depth, entries);
        let pruned = hormander_constant(mp, &k).value;
        let brute = hormander_brute_force(mp, &k)?;
        let gap = (pruned - brute).abs();
        t.check(gap <= 1e-12, Some(i), gap, || format!("Hormander: pruned {pruned} vs brute force {brute}"));
        let f = random_function(rng, &tree, cfg.kernel_depth + 1)?;
        let g = random_function(rng, &tree, cfg.kernel_depth + 1)?;
        let lhs = l2_inner(mp, &apply_operator(mp, &k, &f)?, &g)?;
        let rhs = l2_inner(mp, &f, &apply_operator(mp, &adjoint(&k), &g)?)?;
        let gap = (lhs - rhs).norm();
        t.check(gap <= 1e-10, Some(i), gap, || format!("adjoint pairing differs by {gap}"));
        let n = l2_operator_norm(mp, &k, 1e-10)?.norm;
        let na = l2_operator_norm(mp, &adjoint(&k), 1e-10)?.norm;
        t.check(rel_close(n, na, 1e-8) || n == na, Some(i), 0.0, || format!("||K|| = {n} but ||K*|| = {na}"));
        Ok(())
    })?;

    let id = FiniteKernel::weighted_identity(mp, cfg.kernel_depth)?;
    let mut rng = sample_rng(cfg.seed, u64::MAX);
    let f = random_function(&mut rng, &tree, cfg.kernel_depth + 1)?;
    let out = apply_operator(mp, &id, &f)?;
    let err = ball_labels(&tree, cfg.kernel_depth)?
        .into_iter()
        .map(|x| (out.evaluate(x) - f.evaluate(x)).norm())
        .fold(0.0, f64::max);
    t.check(err <= 1e-12, None, err, || format!("weighted identity moves f by {err}"));
    let pruned = hormander_constant(mp, &id).value;
    let brute = hormander_brute_force(mp, &id)?;
    t.check((pruned - brute).abs() <= 1e-12, None, 0.0, || format!("identity Hormander: pruned {pruned} vs brute force {brute}"));
    let n = l2_operator_norm(mp, &id, 1e-12)?.norm;
    t.check((n - 1.0).abs() <= 1e-9, None, 0.0, || format!("identity L2 norm {n}"));
    t.metrics.insert("identity_hormander".into(), pruned);
    Ok(t)
}

fn reference(mp: &MeasureParams, _cfg: &SuiteConfig) -> Result<Tally> {
    let mut t = Tally::default();
    let q = mp.q();
    let qf = q as f64;
    let s = ReferenceMeasure::from_measure(mp);
    let c = s.classify(q, FinitenessBounds::default())?;
    let expected_opt = 1.0 / (1.0 - qf.powf(1.0 - mp.alpha()));
    let expected_par = qf.powf(mp.alpha());
    t.check(c.optimal && rel_close(c.optimality_ratio.value, expected_opt, 1e-12), None, 0.0, || {
        format!("mu_alpha optimality ratio {} vs {expected_opt}", c.optimality_ratio.value)
    });
    t.check(c.parent_bounded && rel_close(c.parent_ratio.value, expected_par, 1e-12), None, 0.0, || {
        format!("mu_alpha parent ratio {} vs {expected_par}", c.parent_ratio.value)
    });
    let near = ReferenceMeasure::new(vec![1.0], 1.0 / qf - 1e-9);
    let cn = near.classify(q, FinitenessBounds::default())?;
    t.check(!cn.optimal, None, 0.0, || format!("near-critical tail not flagged (ratio {})", cn.optimality_ratio.value));
    t.metrics.insert("near_critical_ratio".into(), cn.optimality_ratio.value);
    Ok(t)
}

/// Convenience for checks on one function outside the suites.
pub fn maximal_pair(mp: &MeasureParams, f: &TailConstantFunction) -> (TailConstantFunction, TailConstantFunction) {
    (hl_maximal(mp, f), sharp_maximal(mp, f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(q: u32, alpha: f64) -> SuiteConfig {
        let mut c = SuiteConfig::new(q, alpha, 11);
        c.samples = 12;
        c.pairs = 20;
        c.kernels = 6;
        c.function_depth = 3;
        c.geometry_depth = 3;
        c.scale_depth = 4;
        c.nesting_depth = 3;
        c
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn small_suites_pass_at_q2_alpha2() {
        let cfg = small(2, 2.0);
        for s in Suite::ALL {
            let r = run_suite(s, &cfg).unwrap();
            assert!(r.passed(), "{s}: {:?}", r.witness);
            assert!(r.cases > 0, "{s}");
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let cfg = small(3, 1.5);
        let a = serde_json::to_string(&run_suite(Suite::Czd, &cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&run_suite(Suite::Czd, &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn origin_doubling_defect_is_reported() {
        let r = run_suite(Suite::Doubling, &small(2, 1.2)).unwrap();
        assert!(!r.passed());
        assert!(r.witness.unwrap().description.contains("C_alpha"));
    }
}
