use std::collections::BTreeSet;

use hofnet::composition::{compose_interpolate, power_eval, CompositionPlan, KMapping, Parent};
use hofnet::funcnets::{
    complexity_lvc, count_params, lvc_forward, lvc_to_hof, mapping_forward, Activation, FlatParams, LvcSpec, MlpSpec,
};
use hofnet::geometry::{brute_force_nn, chamfer_asym, chamfer_asym_with, voxelize, Backend, NnIndex, PointCloud};
use hofnet::tensor::Array;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cloud(dim: usize, max: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, dim), 1..max)
        .prop_map(move |pts| PointCloud::new(dim, pts.concat()).unwrap())
}

fn reversed(c: &PointCloud) -> PointCloud {
    let pts: Vec<f64> = (0..c.len()).rev().flat_map(|i| c.point(i).to_vec()).collect();
    PointCloud::new(c.dim(), pts).unwrap()
}

fn spec_strategy() -> impl Strategy<Value = MlpSpec> {
    (prop::collection::vec(1usize..6, 1..4), prop::bool::ANY).prop_map(|(hidden, relu)| {
        let mut sizes = vec![3];
        sizes.extend(hidden);
        sizes.push(3);
        MlpSpec::new(sizes, if relu { Activation::Relu } else { Activation::Tanh }).unwrap()
    })
}

fn params_for(spec: &MlpSpec, seed: u64) -> FlatParams {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = (0..count_params(spec)).map(|_| rng.random_range(-1.0..1.0)).collect();
    FlatParams::new(spec.clone(), theta).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chamfer_scales_quadratically(x in cloud(3, 40), y in cloud(3, 40), s in prop::sample::select(vec![0.5, 2.0, 10.0])) {
        let base = chamfer_asym(&x, &y).unwrap();
        let scaled = chamfer_asym(&x.scaled(s), &y.scaled(s)).unwrap();
        prop_assert!((scaled - s * s * base).abs() <= 1e-9 * (1.0 + scaled.abs()));
    }

    #[test]
    fn chamfer_ignores_order(x in cloud(3, 40), y in cloud(3, 40)) {
        let a = chamfer_asym(&x, &y).unwrap();
        let b = chamfer_asym(&reversed(&x), &reversed(&y)).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!(a >= 0.0);
        prop_assert_eq!(chamfer_asym(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn kdtree_agrees_with_brute_force(c in cloud(3, 200), q in cloud(3, 30)) {
        let idx = NnIndex::build(&c);
        for p in q.iter() {
            prop_assert_eq!(idx.nearest(p), brute_force_nn(&c, p));
        }
        prop_assert_eq!(
            chamfer_asym_with(&q, &c, Backend::KdTree).unwrap(),
            chamfer_asym_with(&q, &c, Backend::Brute).unwrap()
        );
    }

    #[test]
    fn kdtree_handles_duplicates(c in cloud(2, 30), reps in 1usize..4) {
        let pts: Vec<f64> = (0..reps).flat_map(|_| c.coords().to_vec()).collect();
        let dup = PointCloud::new(2, pts).unwrap();
        let idx = NnIndex::build(&dup);
        for p in c.iter() {
            prop_assert_eq!(idx.nearest(p), brute_force_nn(&dup, p));
        }
    }

    #[test]
    fn pack_unpack_round_trip(spec in spec_strategy(), seed in any::<u64>()) {
        let p = params_for(&spec, seed);
        let again = FlatParams::pack(spec.clone(), &p.unpack()).unwrap();
        prop_assert_eq!(again.theta(), p.theta());
    }

    #[test]
    fn batch_rows_are_independent(spec in spec_strategy(), seed in any::<u64>(), x in cloud(3, 20)) {
        let p = params_for(&spec, seed);
        let xa = x.to_array().unwrap();
        let xr = reversed(&x).to_array().unwrap();
        let ya = mapping_forward(&p, &xa).unwrap();
        let yr = mapping_forward(&p, &xr).unwrap();
        let n = x.len();
        for i in 0..n {
            prop_assert_eq!(ya.row(i), yr.row(n - 1 - i));
        }
    }

    #[test]
    fn composition_is_associative(spec in spec_strategy(), s1 in any::<u64>(), s2 in any::<u64>(), x in cloud(3, 10), plan in "[AB]{1,6}", cut in 0usize..6) {
        let (a, b) = (params_for(&spec, s1), params_for(&spec, s2));
        let plan: CompositionPlan = plan.parse().unwrap();
        let cut = cut.min(plan.k());
        let head = CompositionPlan::new(plan.stages()[..cut].to_vec());
        let tail = CompositionPlan::new(plan.stages()[cut..].to_vec());
        let xa = x.to_array().unwrap();
        let whole = compose_interpolate(&a, &b, &plan, &xa).unwrap();
        let split = compose_interpolate(&a, &b, &tail, &compose_interpolate(&a, &b, &head, &xa).unwrap()).unwrap();
        prop_assert_eq!(whole.data(), split.data());
        let all_a = compose_interpolate(&a, &b, &CompositionPlan::uniform(Parent::A, plan.k()), &xa).unwrap();
        let pow = power_eval(&KMapping::new(a.clone(), plan.k()).unwrap(), &xa).unwrap();
        prop_assert_eq!(all_a.data(), pow.data());
    }

    #[test]
    fn lvc_conversion_is_exact(
        hidden in prop::collection::vec(1usize..8, 0..3),
        m in 0usize..5,
        inj_bits in any::<u8>(),
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut sizes = vec![3];
        sizes.extend(hidden);
        sizes.push(3);
        let layers = sizes.len() - 1;
        let inj: BTreeSet<usize> = (0..layers).filter(|l| inj_bits >> l & 1 == 1).chain([0]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = LvcSpec::random(sizes, m, inj, Activation::Relu, &mut rng).unwrap();
        let z: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Array::matrix(16, 3, (0..48).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let hof = lvc_to_hof(&spec, &z).unwrap();
        let d = lvc_forward(&spec, &z, &x).unwrap().max_abs_diff(&mapping_forward(&hof, &x).unwrap());
        prop_assert!(d < 1e-10);
        prop_assert!(count_params(hof.spec()) + m <= complexity_lvc(&spec));
    }

    #[test]
    fn voxel_indices_stay_in_range(c in cloud(3, 50), n in 1usize..40) {
        let g = voxelize(&c, n).unwrap();
        prop_assert!(g.occupied_count() >= 1 && g.occupied_count() <= c.len());
        for v in g.occupied_voxels() {
            prop_assert!(v.iter().all(|&i| i < n));
        }
    }
}
