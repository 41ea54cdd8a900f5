use homtree::czmax::{hl_maximal, sharp_maximal};
use homtree::function::TailConstantFunction;
use homtree::hardy_bmo::{atomic_decompose, bmo_oscillation};
use homtree::io::FunctionDoc;
use homtree::measure::MeasureParams;
use homtree::operators::{apply_operator, FiniteKernel};
use homtree::region::Region;
use homtree::sampling::{random_function, random_kernel, random_selector, sample_rng};
use homtree::tree::{TreeParams, VertexId};
use num_complex::Complex64;
use proptest::prelude::*;

fn measure() -> impl Strategy<Value = MeasureParams> {
    (2u32..=4, prop::sample::select(vec![1.2, 1.5, 2.0, 3.0])).prop_map(|(q, a)| MeasureParams::new(q, a).unwrap())
}

fn function(mp: &MeasureParams, seed: u64, depth: u32) -> TailConstantFunction {
    random_function(&mut sample_rng(seed, 0), mp.tree(), depth).unwrap()
}

/// Evaluations on the ball one level below the boundary.
fn values(f: &TailConstantFunction, depth: u32) -> Vec<Complex64> {
    let len = f.tree().ball_len(depth).unwrap() as u128;
    (0..len).map(|k| f.evaluate(VertexId(k))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ultrametric_on_deep_labels(q in 2u32..=5, a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let t = TreeParams::new(q).unwrap();
        let last = t.cumulative_count(20).unwrap();
        let [x, y, z] = [a, b, c].map(|s| VertexId(s as u128 % (last + 1)));
        let (dxy, dyz, dxz) = (t.gromov_distance(x, y), t.gromov_distance(y, z), t.gromov_distance(x, z));
        prop_assert!(dxz <= dxy.max(dyz));
        prop_assert_eq!(dxy, t.gromov_distance(y, x));
        if !x.is_origin() {
            let p = t.parent(x).unwrap();
            prop_assert!(t.children(p).unwrap().contains(&x));
            prop_assert_eq!(t.depth(p) + 1, t.depth(x));
        }
    }

    #[test]
    fn maximal_functions_are_sublinear(mp in measure(), s1 in any::<u64>(), s2 in any::<u64>(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let f = function(&mp, s1, 3);
        let g = function(&mp, s2, 3);
        let c = Complex64::new(re, im);
        let sum = hl_maximal(&mp, &f.add(&g).unwrap());
        let (mf, mg) = (hl_maximal(&mp, &f), hl_maximal(&mp, &g));
        let scaled = hl_maximal(&mp, &f.scale(c));
        for x in 0..mp.tree().ball_len(4).unwrap() as u128 {
            let x = VertexId(x);
            let bound = mf.evaluate(x).re + mg.evaluate(x).re;
            prop_assert!(sum.evaluate(x).re <= bound * (1.0 + 1e-12) + 1e-15);
            let want = c.norm() * mf.evaluate(x).re;
            prop_assert!((scaled.evaluate(x).re - want).abs() <= 1e-12 * (1.0 + want));
        }
    }

    #[test]
    fn maximal_functions_keep_the_boundary(mp in measure(), seed in any::<u64>()) {
        let f = function(&mp, seed, 3);
        let n = f.boundary_depth();
        let deeper = f.extend_to(n + 1).unwrap();
        for op in [hl_maximal, sharp_maximal] {
            let a = values(&op(&mp, &f), n + 2);
            let b = values(&op(&mp, &deeper), n + 2);
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - v).norm() <= 1e-12 * (1.0 + u.norm()));
            }
        }
    }

    #[test]
    fn decomposition_reconstructs(mp in measure(), seed in any::<u64>()) {
        let f = function(&mp, seed, 3);
        let back = atomic_decompose(&mp, &f).unwrap().reconstruct(&mp).unwrap();
        let n = f.boundary_depth() + 1;
        for (u, v) in values(&f, n).iter().zip(values(&back, n)) {
            prop_assert!((u - v).norm() < 1e-10);
        }
    }

    #[test]
    fn oscillation_ignores_constants(mp in measure(), seed in any::<u64>(), re in -5.0f64..5.0, r in 1.0f64..4.0) {
        let f = function(&mp, seed, 3);
        let shifted = f.add(&TailConstantFunction::constant(*mp.tree(), Complex64::new(re, 1.0))).unwrap();
        let a = bmo_oscillation(&mp, &f, r).unwrap();
        let b = bmo_oscillation(&mp, &shifted, r).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
    }

    #[test]
    fn operators_are_linear(mp in measure(), seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut rng = sample_rng(seed, 1);
        let k = random_kernel(&mut rng, mp.tree(), 2, 8);
        let f = random_function(&mut rng, mp.tree(), 3).unwrap();
        let g = random_function(&mut rng, mp.tree(), 3).unwrap();
        let (ca, cb) = (Complex64::new(a, 0.5), Complex64::new(b, -1.0));
        let lhs = apply_operator(&mp, &k, &f.scale(ca).add(&g.scale(cb)).unwrap()).unwrap();
        let rhs = apply_operator(&mp, &k, &f).unwrap().scale(ca).add(&apply_operator(&mp, &k, &g).unwrap().scale(cb)).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-12 * (1.0 + rhs.values().iter().map(|c| c.norm()).fold(0.0, f64::max)));
    }

    #[test]
    fn region_algebra(mp in measure(), picks in prop::collection::vec((0u128..40, any::<bool>()), 1..6), others in prop::collection::vec((0u128..40, any::<bool>()), 1..6)) {
        let t = *mp.tree();
        let build = |ps: &[(u128, bool)]| {
            ps.iter().fold(Region::empty(), |acc, (k, sector)| {
                let v = VertexId(*k);
                let piece = if *sector && !v.is_origin() { Region::sector(v) } else { Region::singleton(v) };
                acc.union(&t, &piece)
            })
        };
        let (a, b) = (build(&picks), build(&others));
        let mass = |r: &Region| r.mass(&mp).unwrap();
        let union = a.union(&t, &b);
        let meet = a.intersect(&t, &b);
        prop_assert!((mass(&union) + mass(&meet) - mass(&a) - mass(&b)).abs() <= 1e-12);
        prop_assert!((mass(&a) + mass(&a.complement(&t)) - mp.total_mass()).abs() <= 1e-12);
        prop_assert!(a.difference(&t, &b).is_disjoint(&t, &b));
        prop_assert!(meet.is_subset(&t, &a) && a.is_subset(&t, &union));
        let back: Region = serde_json::from_str(&serde_json::to_string(&union).unwrap()).unwrap();
        prop_assert!(back == union);
    }

    #[test]
    fn documents_round_trip(mp in measure(), seed in any::<u64>()) {
        let mut rng = sample_rng(seed, 2);
        let f = random_function(&mut rng, mp.tree(), 3).unwrap();
        let doc = FunctionDoc::from_function(&mp, &f);
        let text = serde_json::to_string(&doc).unwrap();
        let back: FunctionDoc = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back.to_function(&mp).unwrap(), f);
        let k = random_kernel(&mut rng, mp.tree(), 3, 10);
        let kb: FiniteKernel = serde_json::from_str(&serde_json::to_string(&k).unwrap()).unwrap();
        prop_assert_eq!(kb, k);
        let points: Vec<VertexId> = (0..8).map(VertexId).collect();
        let sel = random_selector(&mut rng, mp.tree(), &points, 3).unwrap();
        let sb = serde_json::from_str(&serde_json::to_string(&sel).unwrap()).unwrap();
        prop_assert_eq!(sel, sb);
    }
}
