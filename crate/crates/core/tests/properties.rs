use bslab_core::arrayio::{decode, encode, load_array, save_array};
use bslab_core::field::Volume;
use bslab_core::geometry::{dot, normalize, DirectionSet, Grid3, UniformGrid1, Vec3};
use bslab_core::mollifier::Mollifier;
use bslab_core::norms::{cknorm_estimate, linf_l2_slices};
use bslab_core::potential::{make_bump_potential, TimeProfile};
use bslab_core::radon::radon_forward;
use bslab_core::reduce::{pairwise_sum, pairwise_sum_by, par_pairwise_sum_by};
use bslab_core::scattering::delta_pair_weight;
use bslab_core::Error;
use proptest::prelude::*;

fn unit() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-1.0f64..1.0).prop_filter("nonzero", |v| dot(*v, *v) > 1e-3).prop_map(normalize)
}

fn array() -> impl Strategy<Value = (Vec<usize>, Vec<f64>)> {
    prop::collection::vec(0usize..5, 0..=4).prop_flat_map(|dims| {
        let n: usize = dims.iter().product();
        (Just(dims), prop::collection::vec(any::<u64>().prop_map(f64::from_bits), n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn array_encoding_round_trips_bit_for_bit((dims, values) in array()) {
        let (d, v) = decode(&encode(&dims, &values).unwrap()).unwrap();
        prop_assert_eq!(d, dims);
        prop_assert_eq!(v.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), values.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn truncated_payload_reports_missing_bytes((dims, values) in array(), cut in 1usize..64) {
        prop_assume!(!values.is_empty());
        let bytes = encode(&dims, &values).unwrap();
        let cut = cut.min(8 * values.len());
        match decode(&bytes[..bytes.len() - cut]) {
            Err(Error::PayloadShort(k)) => prop_assert_eq!(k as usize, cut),
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn parallel_pairwise_sum_matches_sequential_bitwise(values in prop::collection::vec(-1e6f64..1e6, 0..40_000)) {
        let f = |i: usize| values[i];
        let seq = pairwise_sum_by(values.len(), &f);
        prop_assert_eq!(seq.to_bits(), par_pairwise_sum_by(values.len(), &f).to_bits());
        prop_assert_eq!(seq.to_bits(), pairwise_sum(&values).to_bits());
    }

    #[test]
    fn pair_weight_is_symmetric_and_at_least_one(a in unit(), b in unit()) {
        prop_assume!(dot(a, b) < 0.99);
        let w = delta_pair_weight(a, b).unwrap();
        prop_assert!(w >= 1.0 - 1e-15);
        prop_assert_eq!(w, delta_pair_weight(b, a).unwrap());
    }

    #[test]
    fn mollifier_delta_has_unit_mass_and_step_is_monotone(eta in 0.02f64..0.5) {
        let m = Mollifier::new(eta).unwrap();
        let r = m.support_radius();
        let n = 4000;
        let dx = 2.0 * r / n as f64;
        let mass: f64 = (0..=n).map(|i| {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            w * m.delta(-r + i as f64 * dx)
        }).sum::<f64>() * dx;
        prop_assert!((mass - 1.0).abs() < 1e-6, "{}", mass);
        let mut prev = m.step(-r);
        for i in 1..=50 {
            let v = m.step(-r + 2.0 * r * i as f64 / 50.0);
            prop_assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn slice_norm_is_homogeneous(scale in -5.0f64..5.0, seed in 0u64..1000) {
        let grid = Grid3::centered(0.5, 0.1).unwrap();
        let base: Vec<f64> = (0..grid.len()).map(|i| ((i as u64 * 2654435761 + seed) % 1000) as f64 / 1000.0 - 0.5).collect();
        let scaled: Vec<f64> = base.iter().map(|v| v * scale).collect();
        let a = linf_l2_slices(&grid, [base.as_slice()]).unwrap();
        let b = linf_l2_slices(&grid, [scaled.as_slice()]).unwrap();
        prop_assert!((b - scale.abs() * a).abs() <= 1e-12 * a.max(1e-300));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn radon_transform_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, c in unit()) {
        let grid = Grid3::centered(1.0, 0.1).unwrap();
        let dirs = DirectionSet::design(26).unwrap();
        let p = UniformGrid1::symmetric(1.2, 0.1).unwrap();
        let f = Volume::from_fn(grid, |x| bslab_core::potential::cutoff(bslab_core::geometry::norm(bslab_core::geometry::sub(x, bslab_core::geometry::scale(c, 0.3))) / 0.5));
        let g = Volume::from_fn(grid, |x| (-4.0 * dot(x, x)).exp() * bslab_core::potential::cutoff(bslab_core::geometry::norm(x)));
        let combo = Volume { grid, values: f.values.iter().zip(&g.values).map(|(x, y)| a * x + b * y).collect() };
        let (rf, rg, rc) = (radon_forward(&f, &dirs, &p, 1.0).unwrap(), radon_forward(&g, &dirs, &p, 1.0).unwrap(), radon_forward(&combo, &dirs, &p, 1.0).unwrap());
        let scale = rc.values.iter().chain(&rf.values).fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..rc.values.len() {
            prop_assert!((rc.values[i] - a * rf.values[i] - b * rg.values[i]).abs() <= 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn ck_estimate_scales_with_amplitude(amp in 0.1f64..10.0) {
        let q = make_bump_potential(&[[0.1, 0.0, -0.1]], &[0.4], TimeProfile::Bump { center: 0.0, half_width: 0.3 }, 1.0, 1.0).unwrap();
        let a = cknorm_estimate(&q, 2, 0.1).unwrap();
        let b = cknorm_estimate(&q.scaled(amp), 2, 0.1).unwrap();
        prop_assert!((b - amp * a).abs() <= 1e-12 * amp * a);
    }
}

#[test]
fn packaged_designs_are_antipodal_with_full_sphere_weight() {
    for n in bslab_core::geometry::PACKAGED_DESIGNS {
        let d = DirectionSet::design(n).unwrap();
        let total: f64 = d.weights.iter().sum();
        assert!((total - 4.0 * std::f64::consts::PI).abs() < 1e-12, "{n}: {total}");
        assert!((0..d.len()).all(|i| d.antipode(i).is_some()), "{n} not antipodal");
        assert!(d.weights.iter().all(|&w| w > 0.0));
    }
}

#[test]
fn array_file_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.bslb");
    let values: Vec<f64> = (0..60).map(|i| (i as f64).sin() * 1e-3).collect();
    save_array(&path, &[3, 4, 5], &values).unwrap();
    let (dims, back) = load_array(&path).unwrap();
    assert_eq!(dims, vec![3, 4, 5]);
    assert_eq!(back, values);
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 11]).unwrap();
    assert_eq!(load_array(&path).unwrap_err().to_string(), "array file: payload short by 11 bytes");
}
