//! The radial measures `μ_α(x) = q^{-α|x|}`, their doubling behaviour with
//! respect to the Gromov distance, and general radial reference measures.

use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicSet;
use crate::error::{Error, Result};
use crate::tree::{GromovBall, TreeParams, VertexId};

/// Tree shape plus the decay exponent `α > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureParams {
    tree: TreeParams,
    alpha: f64,
}

impl MeasureParams {
    pub fn new(q: u32, alpha: f64) -> Result<Self> {
        Self::from_tree(TreeParams::new(q)?, alpha)
    }

    pub fn from_tree(tree: TreeParams, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 1.0) {
            return Err(Error::InvalidParams(format!("alpha must exceed 1, got {alpha}")));
        }
        Ok(MeasureParams { tree, alpha })
    }

    pub fn tree(&self) -> &TreeParams {
        &self.tree
    }

    pub fn q(&self) -> u32 {
        self.tree.q()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn qf(&self) -> f64 {
        self.tree.q() as f64
    }

    /// `1 - q^{1-α}`, the denominator of every sector mass.
    fn sector_denominator(&self) -> f64 {
        1.0 - self.qf().powf(1.0 - self.alpha)
    }

    pub fn point_mass_at_depth(&self, n: u32) -> f64 {
        self.qf().powf(-self.alpha * n as f64)
    }

    pub fn point_mass(&self, x: VertexId) -> f64 {
        self.point_mass_at_depth(self.tree.depth(x))
    }

    /// `μ(T_v)` for `|v| = n >= 1`.
    pub fn sector_mass_at_depth(&self, n: u32) -> f64 {
        debug_assert!(n >= 1);
        self.point_mass_at_depth(n) / self.sector_denominator()
    }

    /// `μ(T_v) = q^{-α|v|} / (1 - q^{1-α})`; the origin's sector is `X`.
    pub fn sector_mass(&self, v: VertexId) -> Result<f64> {
        if v.is_origin() {
            return Err(Error::SectorOfOrigin);
        }
        Ok(self.sector_mass_at_depth(self.tree.depth(v)))
    }

    /// `μ(T_v)`, reading `T_o` as `X`.
    pub fn sector_or_total_mass(&self, v: VertexId) -> f64 {
        if v.is_origin() {
            self.total_mass()
        } else {
            self.sector_mass_at_depth(self.tree.depth(v))
        }
    }

    /// Mass of `T_v` where `|v| = n`, with `n = 0` meaning `X`.
    pub fn sector_or_total_mass_at_depth(&self, n: u32) -> f64 {
        if n == 0 {
            self.total_mass()
        } else {
            self.sector_mass_at_depth(n)
        }
    }

    /// `μ(X) = (1 + q^{-α}) / (1 - q^{1-α})`.
    pub fn total_mass(&self) -> f64 {
        (1.0 + self.qf().powf(-self.alpha)) / self.sector_denominator()
    }

    /// `C_α = max{q^α + 1, (1 - q^{1-α})^{-1}}`.
    pub fn doubling_constant(&self) -> f64 {
        (self.qf().powf(self.alpha) + 1.0).max(1.0 / self.sector_denominator())
    }

    /// The exact supremum of `μ(B(x, 2r)) / μ(B(x, r))` over all centres and
    /// radii. Besides the three sector ratios it includes the jump
    /// `{o} → X` at the origin, whose ratio is `μ(X)`.
    pub fn sharp_doubling_constant(&self) -> f64 {
        let ratios = [
            self.qf().powf(self.alpha) + 1.0,
            1.0 / self.sector_denominator(),
            self.total_mass() / self.point_mass_at_depth(0),
        ];
        ratios.into_iter().fold(0.0, f64::max)
    }

    pub fn set_mass(&self, d: &DyadicSet) -> f64 {
        d.mass(self)
    }

    pub fn ball_mass(&self, ball: &GromovBall) -> f64 {
        ball.resolved.mass(self)
    }

    /// Checks `μ(B(x, 2r)) <= C_α μ(B(x, r))` for every vertex of depth at
    /// most `max_depth` and every radius in `radii`.
    pub fn verify_doubling(&self, max_depth: u32, radii: &[f64]) -> Result<DoublingReport> {
        let c = self.doubling_constant();
        let last = self.tree.cumulative_count(max_depth)?;
        let mut report = DoublingReport {
            q: self.q(),
            alpha: self.alpha,
            max_depth,
            radii: radii.len(),
            cases: 0,
            violations: 0,
            doubling_constant: c,
            worst_ratio: 0.0,
            worst_center: None,
            worst_radius: None,
        };
        for k in 0..=last {
            let x = VertexId(k);
            for &r in radii {
                let small = self.tree.gromov_ball(x, r)?;
                let big = self.tree.gromov_ball(x, 2.0 * r)?;
                let ratio = self.ball_mass(&big) / self.ball_mass(&small);
                report.cases += 1;
                if ratio > c * (1.0 + 1e-12) {
                    report.violations += 1;
                }
                if ratio > report.worst_ratio {
                    report.worst_ratio = ratio;
                    report.worst_center = Some(x);
                    report.worst_radius = Some(r);
                }
            }
        }
        Ok(report)
    }
}

/// A radius grid with the boundary radii `e^{-n}`, `e^{-n}(1 ± ε)` and
/// `e^{-n}/2` for `n < levels`, topped up with log-spaced radii to `len`.
pub fn boundary_radius_grid(levels: u32, len: usize) -> Vec<f64> {
    let eps = 1e-6;
    let mut grid = Vec::with_capacity(len.max(4 * levels as usize));
    for n in 0..levels {
        let b = (-(n as f64)).exp();
        grid.extend([b, b * (1.0 - eps), b * (1.0 + eps), b / 2.0]);
    }
    let fill = len.saturating_sub(grid.len());
    let (lo, hi) = (-(levels as f64) - 1.0, 0.5f64);
    for i in 0..fill {
        let t = if fill == 1 { 0.5 } else { i as f64 / (fill - 1) as f64 };
        grid.push((lo + t * (hi - lo)).exp());
    }
    grid
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DoublingReport {
    pub q: u32,
    pub alpha: f64,
    pub max_depth: u32,
    pub radii: usize,
    pub cases: u64,
    pub violations: u64,
    pub doubling_constant: f64,
    pub worst_ratio: f64,
    pub worst_center: Option<VertexId>,
    pub worst_radius: Option<f64>,
}

impl DoublingReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// A finite radial measure, nonincreasing in the distance from `o`: the
/// listed values `σ_0 >= … >= σ_N`, then `σ_{n+1} = t σ_n` for `n >= N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMeasure {
    pub radial_values: Vec<f64>,
    pub tail_ratio: f64,
}

/// A supremum together with the depth realising it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialSup {
    pub value: f64,
    pub depth: u32,
}

/// Thresholds above which a supremum is treated as unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinitenessBounds {
    pub optimality: f64,
    pub parent: f64,
}

impl Default for FinitenessBounds {
    fn default() -> Self {
        FinitenessBounds { optimality: 1e6, parent: 1e12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub optimal: bool,
    pub parent_bounded: bool,
    pub optimality_ratio: RadialSup,
    pub parent_ratio: RadialSup,
    pub bounds: FinitenessBounds,
}

impl ReferenceMeasure {
    pub fn new(radial_values: Vec<f64>, tail_ratio: f64) -> Self {
        ReferenceMeasure { radial_values, tail_ratio }
    }

    /// `μ_α` in this representation: `σ_0 = 1`, `t = q^{-α}`.
    pub fn from_measure(mp: &MeasureParams) -> Self {
        ReferenceMeasure { radial_values: vec![1.0], tail_ratio: (mp.q() as f64).powf(-mp.alpha()) }
    }

    pub fn validate(&self, q: u32) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidReferenceMeasure(m));
        if q < 2 {
            return bad(format!("q must be at least 2, got {q}"));
        }
        if self.radial_values.is_empty() {
            return bad("no radial values".into());
        }
        if let Some(v) = self.radial_values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return bad(format!("radial value {v} is not positive"));
        }
        if let Some(w) = self.radial_values.windows(2).position(|w| w[1] > w[0]) {
            return bad(format!("radial values increase at depth {}", w + 1));
        }
        let t = self.tail_ratio;
        if !(t > 0.0 && t * (q as f64) < 1.0) {
            return bad(format!("tail ratio must lie in (0, 1/q), got {t}"));
        }
        Ok(())
    }

    fn head_len(&self) -> u32 {
        self.radial_values.len() as u32
    }

    /// `σ_n` at any depth.
    pub fn value_at(&self, n: u32) -> f64 {
        let last = self.head_len() - 1;
        if n <= last {
            self.radial_values[n as usize]
        } else {
            self.radial_values[last as usize] * self.tail_ratio.powi((n - last) as i32)
        }
    }

    /// `σ(T_v)` for `|v| = n >= 1`: `Σ_{l>=0} q^l σ_{n+l}`, with the
    /// geometric tail summed in closed form.
    pub fn sector_mass_at_depth(&self, n: u32, q: u32) -> f64 {
        let qf = q as f64;
        let last = self.head_len() - 1;
        let tail = 1.0 / (1.0 - qf * self.tail_ratio);
        if n >= last {
            return self.value_at(n) * tail;
        }
        let mut sum = 0.0;
        let mut weight = 1.0;
        for j in n..last {
            sum += weight * self.radial_values[j as usize];
            weight *= qf;
        }
        sum + weight * self.radial_values[last as usize] * tail
    }

    /// `sup_{v ≠ o} σ(T_v) / σ({v})`. The ratio is constant from the last
    /// listed depth on, so the scan stops there.
    pub fn optimality_ratio(&self, q: u32) -> Result<RadialSup> {
        self.validate(q)?;
        let last = (self.head_len() - 1).max(1);
        let mut best = RadialSup { value: 0.0, depth: 1 };
        for n in 1..=last {
            let r = self.sector_mass_at_depth(n, q) / self.value_at(n);
            if r > best.value {
                best = RadialSup { value: r, depth: n };
            }
        }
        Ok(best)
    }

    /// `sup_n σ_n / σ_{n+1}`, the radial form of `sup_v σ(p(v)) / σ(v)`.
    /// The depth reported is `n`.
    pub fn parent_ratio(&self, q: u32) -> Result<RadialSup> {
        self.validate(q)?;
        let last = self.head_len() - 1;
        let mut best = RadialSup { value: 1.0 / self.tail_ratio, depth: last };
        for n in 0..last {
            let r = self.radial_values[n as usize] / self.radial_values[n as usize + 1];
            if r > best.value {
                best = RadialSup { value: r, depth: n };
            }
        }
        Ok(best)
    }

    pub fn classify(&self, q: u32, bounds: FinitenessBounds) -> Result<Classification> {
        let optimality_ratio = self.optimality_ratio(q)?;
        let parent_ratio = self.parent_ratio(q)?;
        Ok(Classification {
            optimal: optimality_ratio.value.is_finite() && optimality_ratio.value <= bounds.optimality,
            parent_bounded: parent_ratio.value.is_finite() && parent_ratio.value <= bounds.parent,
            optimality_ratio,
            parent_ratio,
            bounds,
        })
    }
}
