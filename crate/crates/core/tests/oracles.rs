mod support;

use hofnet::composition::{power_eval, KMapping};
use hofnet::funcnets::{count_params, mapping_forward, Activation, FlatParams, MlpSpec};
use hofnet::geometry::{chamfer_sym, f1_score, PointCloud};
use hofnet::tensor::Array;
use hofnet::training::{gen_dataset, Primitive, SynthShape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::oracles::naive_forward;

#[test]
fn published_decoder_sizes() {
    assert_eq!(count_params(&MlpSpec::hof1(3)), 7171);
    assert_eq!(count_params(&MlpSpec::hof3(3)), 33923);
}

#[test]
fn power_three_equals_triple_nesting() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for act in [Activation::Relu, Activation::Tanh] {
        let spec = MlpSpec::new(vec![3, 16, 16, 3], act).unwrap();
        let theta: Vec<f64> = (0..count_params(&spec)).map(|_| rng.random_range(-0.5..0.5)).collect();
        let params = FlatParams::new(spec.clone(), theta.clone()).unwrap();
        let pts: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Array::matrix(10, 3, pts.clone()).unwrap();
        let got = power_eval(&KMapping::new(params.clone(), 3).unwrap(), &x).unwrap();
        for i in 0..10 {
            let p = &pts[i * 3..i * 3 + 3];
            let want = naive_forward(&spec, &theta, &naive_forward(&spec, &theta, &naive_forward(&spec, &theta, p)));
            for (g, w) in got.row(i).iter().zip(&want) {
                assert!((g - w).abs() < 1e-12);
            }
        }
        let once = mapping_forward(&params, &x).unwrap();
        assert!((once.row(0)[0] - naive_forward(&spec, &theta, &pts[..3])[0]).abs() < 1e-12);
    }
}

#[test]
fn sphere_dataset_points_have_fixed_norm() {
    let s = SynthShape::unposed(Primitive::Ellipsoid { axes: [0.5, 0.5, 0.5] });
    let c = s.sample_surface(&mut ChaCha8Rng::seed_from_u64(1), 5000);
    for p in c.iter() {
        let n = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 0.5).abs() < 1e-9);
    }
}

#[test]
fn dataset_is_reproducible() {
    let a = gen_dataset(4, 21, 300).unwrap();
    let b = gen_dataset(4, 21, 300).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.gt.coords(), y.gt.coords());
        assert_eq!(x.raster, y.raster);
    }
}

#[test]
fn metric_examples() {
    let x = PointCloud::from_points(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
    let y = PointCloud::from_points(&[[0.0, 0.0, 0.0]]).unwrap();
    assert_eq!(chamfer_sym(&x, &y).unwrap(), 0.5);
    let f = f1_score(&x, &y, 0.1).unwrap();
    assert_eq!((f.precision, f.recall), (0.5, 1.0));
    assert!((f.f1 - 2.0 / 3.0).abs() < 1e-15);
}
