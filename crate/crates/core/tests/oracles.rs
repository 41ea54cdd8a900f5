//! Library results against independent brute-force computations.

use std::collections::VecDeque;

use approx::assert_relative_eq;
use homtree::dyadic::DyadicSet;
use homtree::function::TailConstantFunction;
use homtree::hardy_bmo::bmo_norm;
use homtree::measure::MeasureParams;
use homtree::operators::{hormander_constant, FiniteKernel};
use homtree::sampling::{random_kernel, sample_rng};
use homtree::tree::{TreeParams, VertexId};
use num_complex::Complex64;

/// A tree built by breadth-first search, labelling vertices in discovery order.
struct BfsTree {
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<u32>,
}

impl BfsTree {
    fn build(q: usize, max_depth: u32) -> Self {
        let mut t = BfsTree { parent: vec![None], children: vec![Vec::new()], depth: vec![0] };
        let mut queue = VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            if t.depth[v] == max_depth {
                continue;
            }
            let degree = if v == 0 { q + 1 } else { q };
            for _ in 0..degree {
                let c = t.parent.len();
                t.parent.push(Some(v));
                t.children.push(Vec::new());
                t.depth.push(t.depth[v] + 1);
                t.children[v].push(c);
                queue.push_back(c);
            }
        }
        t
    }

    fn ancestors(&self, mut v: usize) -> Vec<usize> {
        let mut out = vec![v];
        while let Some(p) = self.parent[v] {
            out.push(p);
            v = p;
        }
        out
    }

    fn confluent_depth(&self, x: usize, y: usize) -> u32 {
        let ax = self.ancestors(x);
        self.ancestors(y).into_iter().filter(|a| ax.contains(a)).map(|a| self.depth[a]).max().unwrap()
    }
}

#[test]
fn labels_match_breadth_first_search() {
    for (q, depth) in [(2u32, 6u32), (3, 4), (5, 3)] {
        let bfs = BfsTree::build(q as usize, depth);
        let tree = TreeParams::new(q).unwrap();
        assert_eq!(bfs.parent.len(), tree.ball_len(depth).unwrap());
        for v in 0..bfs.parent.len() {
            let id = VertexId(v as u128);
            assert_eq!(tree.depth(id), bfs.depth[v], "depth of {v}");
            match bfs.parent[v] {
                Some(p) => assert_eq!(tree.parent(id).unwrap(), VertexId(p as u128)),
                None => assert!(tree.parent(id).is_err()),
            }
            if bfs.depth[v] < depth {
                let kids: Vec<_> = bfs.children[v].iter().map(|c| VertexId(*c as u128)).collect();
                assert_eq!(tree.children(id).unwrap(), kids);
            }
        }
    }
}

#[test]
fn gromov_distance_and_balls_match_oracle() {
    let (q, depth) = (2u32, 4u32);
    let bfs = BfsTree::build(q as usize, depth + 2);
    let tree = TreeParams::new(q).unwrap();
    let n = tree.ball_len(depth).unwrap();
    let all = bfs.parent.len();
    let dist = |x: usize, y: usize| if x == y { 0.0 } else { (-(bfs.confluent_depth(x, y) as f64)).exp() };
    for x in 0..n {
        for y in 0..n {
            assert_eq!(tree.gromov_distance(VertexId(x as u128), VertexId(y as u128)), dist(x, y));
        }
    }
    // open balls: membership of every vertex up to depth + 2
    let radii = [0.05, 0.2, (-2.0f64).exp(), 0.3, (-1.0f64).exp(), 0.5, 1.0, 1.5];
    for x in 0..n {
        for &r in &radii {
            let ball = tree.gromov_ball(VertexId(x as u128), r).unwrap().resolved;
            for y in 0..all {
                let inside = dist(x, y) < r;
                assert_eq!(ball.contains(&tree, VertexId(y as u128)), inside, "x = {x}, r = {r}, y = {y}");
            }
        }
    }
}

#[test]
fn masses_match_partial_sums() {
    for q in [2u32, 3] {
        for alpha in [1.2, 1.5, 2.0, 3.0] {
            let mp = MeasureParams::new(q, alpha).unwrap();
            let bfs = BfsTree::build(q as usize, 10);
            let qf = q as f64;
            // sector masses: explicit vertices to depth 10, then sphere sums to depth 3000
            for v in [1usize, 4, 7] {
                let root_depth = bfs.depth[v];
                let mut explicit = 0.0;
                let mut frontier = vec![v];
                while let Some(u) = frontier.pop() {
                    explicit += qf.powf(-alpha * bfs.depth[u] as f64);
                    frontier.extend(bfs.children[u].iter().copied());
                }
                let mut tail = 0.0;
                for d in 11..3000u32 {
                    tail += qf.powf((d - root_depth) as f64 - alpha * d as f64);
                }
                let sum = explicit + tail;
                let got = mp.sector_mass(VertexId(v as u128)).unwrap();
                assert_relative_eq!(got, sum, max_relative = 1e-6);
            }
            let mut total = 1.0;
            for d in 1..3000u32 {
                total += (qf + 1.0) * qf.powf(d as f64 - 1.0 - alpha * d as f64);
            }
            assert_relative_eq!(mp.total_mass(), total, max_relative = 1e-6);
        }
    }
}

/// The Hörmander supremum by direct enumeration over `(v, x, y, z)`.
fn hormander_oracle(mp: &MeasureParams, k: &FiniteKernel, depth: u32) -> f64 {
    let bfs = BfsTree::build(mp.q() as usize, depth);
    let n = bfs.parent.len();
    let in_sector = |x: usize, v: usize| bfs.ancestors(x).contains(&v);
    let mu = |z: usize| (mp.q() as f64).powf(-mp.alpha() * bfs.depth[z] as f64);
    let kern = |z: usize, x: usize| k.get(VertexId(z as u128), VertexId(x as u128));
    let mut best: f64 = 0.0;
    for v in 1..n {
        for x in (0..n).filter(|x| in_sector(*x, v)) {
            for y in (0..n).filter(|y| in_sector(*y, v)) {
                let s: f64 = (0..n).filter(|z| !in_sector(*z, v)).map(|z| (kern(z, x) - kern(z, y)).norm() * mu(z)).sum();
                best = best.max(s);
            }
        }
    }
    best
}

#[test]
fn hormander_matches_enumeration() {
    let mp = MeasureParams::new(2, 2.0).unwrap();
    let id = FiniteKernel::weighted_identity(&mp, 3).unwrap();
    let value = hormander_constant(&mp, &id).value;
    assert!((value - hormander_oracle(&mp, &id, 4)).abs() <= 1e-12, "{value}");
    for seed in 0..12 {
        let mut rng = sample_rng(99, seed);
        let k = random_kernel(&mut rng, mp.tree(), 3, 1 + seed as usize);
        let pruned = hormander_constant(&mp, &k).value;
        let brute = hormander_oracle(&mp, &k, 4);
        assert!((pruned - brute).abs() <= 1e-12, "seed {seed}: {pruned} vs {brute}");
    }
}

#[test]
fn x_independent_kernel_on_truncated_columns() {
    // K(z, x) = h(z) on every column of the ball of radius 2: inside each
    // sector all columns are equal except for the vanishing columns below
    // depth 2, so the constant is the largest mass of h outside a sector.
    let mp = MeasureParams::new(2, 2.0).unwrap();
    let tree = *mp.tree();
    let h = |z: u128| Complex64::new(1.0 + z as f64, 0.5);
    let mut k = FiniteKernel::new();
    for z in 0..tree.ball_len(1).unwrap() as u128 {
        for x in 0..tree.ball_len(2).unwrap() as u128 {
            k.set(VertexId(z), VertexId(x), h(z));
        }
    }
    let value = hormander_constant(&mp, &k).value;
    assert!((value - hormander_oracle(&mp, &k, 3)).abs() <= 1e-12);
}

#[test]
fn bmo_of_sector_indicator_matches_deep_sum() {
    // q = 2, alpha = 2, f = 1 on T_{v1}
    let mp = MeasureParams::new(2, 2.0).unwrap();
    let set = DyadicSet::sector(VertexId(1));
    let f = TailConstantFunction::indicator(*mp.tree(), set).unwrap();
    let (q, alpha) = (2.0f64, 2.0f64);
    // depth-by-depth masses to depth 40; T_{v1} holds q^{d-1} of the
    // (q + 1) q^{d-1} vertices at depth d
    let mut inside = 0.0;
    let mut outside = 1.0;
    for d in 1..=40 {
        let m = q.powf(-alpha * d as f64);
        let sphere = (q + 1.0) * q.powi(d - 1);
        let ins = q.powi(d - 1);
        inside += ins * m;
        outside += (sphere - ins) * m;
    }
    let total = inside + outside;
    let mean = inside / total;
    let osc_whole = (inside * (1.0 - mean) + outside * mean) / total;
    // every proper sector is inside or outside T_{v1}, where f is constant
    let expected = osc_whole + inside;
    let got = bmo_norm(&mp, &f, 1.0).unwrap();
    assert_relative_eq!(got, expected, max_relative = 1e-12);
    let osc2 = ((inside * (1.0 - mean).powi(2) + outside * mean * mean) / total).sqrt();
    assert_relative_eq!(bmo_norm(&mp, &f, 2.0).unwrap(), osc2 + inside, max_relative = 1e-12);
}
