//! Seeded random functions, atoms, selectors and kernels.
//!
//! Every sample draws from its own ChaCha stream, so results do not depend
//! on how samples are scheduled across threads.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::czmax::SelectorPair;
use crate::dyadic::{containing_sets, DyadicSet};
use crate::error::Result;
use crate::function::TailConstantFunction;
use crate::hardy_bmo::Atom;
use crate::measure::MeasureParams;
use crate::operators::FiniteKernel;
use crate::tree::{TreeParams, VertexId};

/// The generator for sample `stream` of a run seeded with `seed`.
pub fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn unit_complex<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))
}

fn random_vertex<R: Rng>(rng: &mut R, tree: &TreeParams, depth: u32) -> VertexId {
    let (lo, hi) = tree.level_range(depth).expect("sampled depth");
    VertexId(rng.gen_range(lo..=hi))
}

/// Labels at depth `<= max_depth` drawn uniformly from a uniform depth.
fn random_vertex_upto<R: Rng>(rng: &mut R, tree: &TreeParams, max_depth: u32) -> VertexId {
    let d = rng.gen_range(0..=max_depth);
    random_vertex(rng, tree, d)
}

/// A random tail-constant function with boundary depth at most `max_depth`.
///
/// Families: dense complex values, dense real values, a few point masses,
/// and a two-valued step across a random sector.
pub fn random_function<R: Rng>(rng: &mut R, tree: &TreeParams, max_depth: u32) -> Result<TailConstantFunction> {
    let n = rng.gen_range(0..=max_depth);
    match rng.gen_range(0..4) {
        0 => TailConstantFunction::from_fn(*tree, n, |_| unit_complex(rng)),
        1 => TailConstantFunction::from_fn(*tree, n, |_| Complex64::new(rng.gen_range(-1.0..=1.0), 0.0)),
        2 => {
            let depth = max_depth.saturating_sub(1);
            let count = rng.gen_range(1..=4);
            let points: Vec<_> = (0..count).map(|_| (random_vertex_upto(rng, tree, depth), unit_complex(rng))).collect();
            TailConstantFunction::from_sparse(*tree, points)
        }
        _ => {
            let n = n.max(1);
            let v = random_vertex_upto(rng, tree, n);
            let (inside, outside) = (unit_complex(rng), unit_complex(rng));
            TailConstantFunction::from_fn(*tree, n, |y| if tree.in_sector(y, v) { inside } else { outside })
        }
    }
}

/// `count` levels, log-uniform in `[lo, hi]`, sorted.
pub fn log_uniform_grid<R: Rng>(rng: &mut R, lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let mut out: Vec<f64> = (0..count).map(|_| rng.gen_range(a..=b).exp()).collect();
    out.sort_by(f64::total_cmp);
    out
}

/// A random selector on `points`: `φ(x)` uniform among the sets containing
/// `x`, and a few random phases for pairs inside `φ(x)`.
pub fn random_selector<R: Rng>(rng: &mut R, tree: &TreeParams, points: &[VertexId], depth: u32) -> Result<SelectorPair> {
    let mut sel = SelectorPair::new();
    for &x in points {
        let sets = containing_sets(tree, x);
        let d = *sets.choose(rng).expect("nonempty");
        sel.set_phi(tree, x, d)?;
        let root_depth = tree.depth(d.root());
        if d.is_singleton() {
            continue;
        }
        for _ in 0..rng.gen_range(0..=6) {
            let yd = rng.gen_range(root_depth..=depth.max(root_depth) + 1);
            let (lo, hi) = tree.sector_level_range(d.root(), yd)?;
            let y = VertexId(rng.gen_range(lo..=hi));
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            sel.set_eta(y, x, Complex64::from_polar(1.0, theta))?;
        }
    }
    Ok(sel)
}

/// A random `(1, p)`-atom supported on `X` or on a sector rooted above
/// `max_depth`.
pub fn random_atom<R: Rng>(rng: &mut R, mp: &MeasureParams, max_depth: u32, p: f64) -> Result<Atom> {
    let tree = *mp.tree();
    let max_depth = max_depth.max(1);
    let root = random_vertex_upto(rng, &tree, max_depth - 1);
    let set = DyadicSet::sector(root);
    let n = rng.gen_range(tree.depth(root) + 1..=max_depth);
    let raw = TailConstantFunction::from_fn(tree, n, |y| {
        if set.contains(&tree, y) {
            unit_complex(rng)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })?;
    let mean = raw.average_on(mp, set);
    let centred = raw.zip_with(&TailConstantFunction::indicator(tree, set)?, |a, b| a - mean * b)?;
    let size = centred.lp_norm(mp, p)?;
    if size == 0.0 {
        return Ok(Atom::Standard { set, values: centred, p });
    }
    let mass = set.mass(mp);
    let bound = if p.is_infinite() { 1.0 / mass } else { mass.powf(1.0 / p - 1.0) };
    let target = bound * rng.gen_range(0.1..=1.0);
    Ok(Atom::Standard { set, values: centred.scale(Complex64::new(target / size, 0.0)), p })
}

/// A kernel with `entries` random pairs of depth at most `depth_bound`.
pub fn random_kernel<R: Rng>(rng: &mut R, tree: &TreeParams, depth_bound: u32, entries: usize) -> FiniteKernel {
    let mut k = FiniteKernel::new();
    for _ in 0..entries {
        let z = random_vertex_upto(rng, tree, depth_bound);
        let x = random_vertex_upto(rng, tree, depth_bound);
        k.set(z, x, unit_complex(rng));
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardy_bmo::validate_atom;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: f64 = sample_rng(7, 3).gen();
        let b: f64 = sample_rng(7, 3).gen();
        let c: f64 = sample_rng(7, 4).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sampled_atoms_validate() {
        let mp = MeasureParams::new(3, 1.5).unwrap();
        let mut rng = sample_rng(1, 0);
        for p in [1.5, 2.0, 4.0, f64::INFINITY] {
            for _ in 0..20 {
                let a = random_atom(&mut rng, &mp, 4, p).unwrap();
                let check = validate_atom(&mp, &a).unwrap();
                assert!(check.valid, "{:?}", check.diagnostics);
            }
        }
    }

    #[test]
    fn sampled_functions_respect_depth() {
        let t = TreeParams::new(2).unwrap();
        let mut rng = sample_rng(2, 0);
        for _ in 0..50 {
            assert!(random_function(&mut rng, &t, 5).unwrap().boundary_depth() <= 5);
        }
        let k = random_kernel(&mut rng, &t, 3, 10);
        assert!(k.depth_bound(&t) <= 3);
    }
}
