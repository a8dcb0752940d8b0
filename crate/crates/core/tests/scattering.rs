use bslab_core::field::Volume;
use bslab_core::geometry::{dot, neg, normalize, DirectionSet, Grid3, UniformGrid1, Vec3};
use bslab_core::mollifier::Mollifier;
use bslab_core::potential::{make_bump_potential, Combination, Potential, SpaceTimePotential, TimeProfile};
use bslab_core::radon::radon_forward;
use bslab_core::scattering::pairing::fdtd_plane_pairing_side;
use bslab_core::scattering::*;
use bslab_core::solver::plane_wave::ScatterSide;
use bslab_core::Error;

fn bench(eps: f64) -> Potential {
    make_bump_potential(
        &[[0.25, -0.1, 0.1], [-0.2, 0.2, -0.15]],
        &[0.35, 0.3],
        TimeProfile::Bump { center: 0.0, half_width: 0.25 },
        eps,
        1.0,
    )
    .unwrap()
}

/// Bumps reaching close to the boundary of `B(0, 0.6)`.
fn tight(eps: f64) -> Potential {
    make_bump_potential(
        &[[0.28, 0.0, 0.1], [-0.2, -0.25, 0.0]],
        &[0.3, 0.27],
        TimeProfile::Bump { center: 0.1, half_width: 0.3 },
        eps,
        0.6,
    )
    .unwrap()
}

/// `q(t, -x) = q(t, x)`.
fn even(eps: f64) -> Potential {
    make_bump_potential(
        &[[0.3, 0.1, -0.1], [-0.3, -0.1, 0.1], [0.0, 0.0, 0.0]],
        &[0.25, 0.25, 0.2],
        TimeProfile::Bump { center: 0.05, half_width: 0.25 },
        eps,
        1.0,
    )
    .unwrap()
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let n: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let d: f64 = b.iter().map(|y| y * y).sum();
    (n / d).sqrt()
}

fn layout(dirs: DirectionSet, sigma_prime: UniformGrid1, rho: f64, h: f64, step: f64) -> CubeLayout {
    CubeLayout { sigma_prime, sigma: UniformGrid1::symmetric(rho + 30.0 * h + 0.1, step).unwrap(), dirs }
}

fn two_dirs(omega: Vec3) -> DirectionSet {
    DirectionSet::new(vec![omega, neg(omega)], vec![2.0 * std::f64::consts::PI; 2]).unwrap()
}

#[test]
fn zero_potential_gives_zero_data() {
    let q = Potential::zero(1.0);
    let omega = [0.0, 0.0, 1.0];
    for backend in [Backend::Born, Backend::Fdtd] {
        let synth = Synthesis::new(backend, 0.05);
        let a = scattering_amplitude(&q, 0.1, omega, -0.2, neg(omega), &synth).unwrap();
        assert_eq!(a.value, 0.0);
        let lay = layout(two_dirs(omega), UniformGrid1::new(-0.1, 0.1, 2).unwrap(), 1.0, 0.05, 0.1);
        let cube = backscatter_cube(&q, &lay, &synth, &NoCache).unwrap();
        assert_eq!(cube.max_abs(), 0.0);
    }
}

#[test]
fn pair_weight_is_one_for_backscattering_and_follows_the_formula() {
    for omega in [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, -1.0, 0.0]] {
        assert_eq!(delta_pair_weight(omega, neg(omega)).unwrap(), 1.0);
    }
    let omega = [0.0, 0.0, 1.0];
    for c in [-0.9, -0.5, 0.0, 0.7] {
        let other = [(1.0f64 - c * c).sqrt(), 0.0, c];
        let w = delta_pair_weight(omega, other).unwrap();
        assert!((w - 2.0 / ((1.0 - c) * (3.0 + c)).sqrt()).abs() < 1e-12);
    }
    assert!(matches!(delta_pair_weight(omega, omega), Err(Error::ForwardScattering(_))));
}

/// Twice the space-time quadrature of `q delta_eta delta_eta`: a grid sum in
/// x and a trapezoid rule in t.
fn brute_force_principal(q: &Potential, s: f64, omega: Vec3, sp: f64, omega_p: Vec3, m: &Mollifier) -> f64 {
    let h = 0.02;
    let grid = Grid3::centered(q.rho, h).unwrap();
    let (t0, t1) = q.time_support();
    let nt = 400;
    let dt = (t1 - t0) / nt as f64;
    let mut acc = 0.0;
    for i in 0..grid.len() {
        let x = grid.point_of(i);
        if q.value(0.0, x) == 0.0 && q.value(t0 + 0.5 * (t1 - t0), x) == 0.0 {
            continue;
        }
        for k in 0..=nt {
            let t = t0 + k as f64 * dt;
            acc += q.value(t, x) * m.delta(t + s - dot(x, omega)) * m.delta(t + sp - dot(x, omega_p));
        }
    }
    2.0 * acc * grid.cell_volume() * dt
}

#[test]
fn principal_term_matches_space_time_quadrature() {
    let q = bench(1.0);
    let m = Mollifier::new(0.1).unwrap();
    let omega = [0.0, 0.0, 1.0];
    for (omega_p, s, sp) in [(neg(omega), 0.05, -0.1), (normalize([0.6, 0.0, -0.8]), 0.1, 0.0), (normalize([0.0, 0.9, 0.3]), 0.0, 0.15)] {
        let fast = principal_term(&q, s, omega, sp, omega_p, Some(&m)).unwrap();
        let slow = brute_force_principal(&q, s, omega, sp, omega_p, &m);
        assert!((fast - slow).abs() <= 1e-2 * slow.abs(), "{fast} vs {slow}");
    }
}

#[test]
fn principal_cube_agrees_with_single_samples() {
    let q = bench(1.0);
    let h = 0.05;
    let synth = Synthesis::new(Backend::Born, h);
    let m = synth.mollifier().unwrap();
    let omega = normalize([0.3, -0.2, 0.9]);
    let dirs = DirectionSet::new(vec![omega], vec![4.0 * std::f64::consts::PI]).unwrap();
    let lay = layout(dirs, UniformGrid1::new(-0.1, 0.1, 3).unwrap(), 1.0, h, h);
    let cube = principal_cube(&q, &lay, &m).unwrap();
    let scale = cube.max_abs();
    for (i, j) in [(0, 20), (1, 30), (2, 34), (1, 45)] {
        let (s, sp) = lay.delays(i, j);
        let single = principal_term(&q, s, omega, sp, neg(omega), Some(&m)).unwrap();
        assert!((single - cube.get(i, 0, j)).abs() <= 2e-3 * scale, "{single} vs {}", cube.get(i, 0, j));
    }
}

#[test]
fn amplitude_vanishes_beyond_the_support_edge() {
    let q = tight(0.05);
    let h = 0.05;
    let omega = [0.0, 0.0, 1.0];
    let s = 0.0;
    for backend in [Backend::Born, Backend::Fdtd] {
        let synth = Synthesis::new(backend, h);
        let m = synth.mollifier().unwrap();
        for omega_p in [neg(omega), normalize([0.8, 0.0, -0.6])] {
            let probe = AmplitudeSample { s, s_prime: 0.0, omega, omega_prime: omega_p, value: 0.0 };
            let edge = probe.support_edge(q.rho, synth.eta);
            let scale = (0..40)
                .map(|k| {
                    let sp = edge - 10.0 * synth.eta - 1.5 + k as f64 * 0.05;
                    principal_term(&q, s, omega, sp, omega_p, Some(&m)).unwrap().abs()
                })
                .fold(0.0, f64::max);
            assert!(scale > 0.0);
            for extra in [0.0, 0.1] {
                let a = scattering_amplitude(&q, s, omega, edge + extra, omega_p, &synth).unwrap();
                assert!(a.value.abs() <= 1e-6 * scale, "{backend:?}: {} vs scale {scale}", a.value);
            }
        }
    }
}

#[test]
fn cube_slices_follow_the_radon_transform_of_time_slices() {
    let q = bench(0.01);
    let h = 0.05;
    let synth = Synthesis::new(Backend::Born, h);
    let dirs = DirectionSet::design(26).unwrap();
    let sp = UniformGrid1::new(-0.1, 0.1, 3).unwrap();
    let lay = layout(dirs.clone(), sp, 1.0, h, h);
    let cube = backscatter_cube(&q, &lay, &synth, &NoCache).unwrap();
    let grid = Grid3::centered(1.0, h).unwrap();
    for i in 0..sp.n {
        let t = -sp.value(i);
        let slice = Volume::from_fn(grid, |x| q.value(t, x));
        let oracle = radon_forward(&slice, &dirs, &lay.sigma, 1.0).unwrap();
        let err = rel(cube.slice_values(i), &oracle.values);
        assert!(err <= 0.15, "slice {i}: {err}");
    }
}

#[test]
fn cube_vanishes_outside_the_sigma_window() {
    let q = tight(0.05);
    let h = 0.05;
    let dirs = DirectionSet::fibonacci(4).unwrap();
    let sp = UniformGrid1::new(-0.2, 0.2, 3).unwrap();
    for backend in [Backend::Born, Backend::Fdtd] {
        let synth = Synthesis::new(backend, h);
        let lay = layout(dirs.clone(), sp, q.rho, h, 2.0 * h);
        let cube = backscatter_cube(&q, &lay, &synth, &NoCache).unwrap();
        let edge = q.rho + 10.0 * synth.eta;
        let (below, above) = cube.tails(-edge, edge);
        let max = cube.max_abs();
        assert!(below <= 1e-6 * max && above <= 1e-6 * max, "{backend:?}: {below:e} {above:e} of {max:e}");
        let principal = principal_cube(&q, &lay, &synth.mollifier().unwrap()).unwrap();
        let (below, above) = principal.tails(-edge, edge);
        assert!(below <= 1e-6 * max && above <= 1e-6 * max);
    }
}

#[test]
fn sigma_grid_must_cover_the_window() {
    let q = bench(0.01);
    let synth = Synthesis::new(Backend::Born, 0.05);
    let lay = CubeLayout {
        sigma_prime: UniformGrid1::new(0.0, 0.1, 1).unwrap(),
        sigma: UniformGrid1::symmetric(1.0, 0.05).unwrap(),
        dirs: DirectionSet::fibonacci(4).unwrap(),
    };
    assert!(matches!(backscatter_cube(&q, &lay, &synth, &NoCache), Err(Error::OffsetCoverage { .. })));
}

#[test]
fn even_potential_gives_direction_parity() {
    let q = even(0.05);
    let h = 0.05;
    let dirs = DirectionSet::design(26).unwrap();
    let sp = UniformGrid1::new(-0.1, 0.1, 3).unwrap();
    let synth = Synthesis::new(Backend::Born, h);
    let lay = layout(dirs.clone(), sp, 1.0, h, h);
    let cube = backscatter_cube(&q, &lay, &synth, &NoCache).unwrap();
    let max = cube.max_abs();
    let ns = lay.sigma.n;
    let mut worst: f64 = 0.0;
    for d in 0..dirs.len() {
        let a = dirs.antipode(d).expect("design is antipodal");
        for i in 0..sp.n {
            for j in 0..ns {
                worst = worst.max((cube.get(i, d, j) - cube.get(i, a, ns - 1 - j)).abs());
            }
        }
    }
    assert!(worst <= 1e-2 * max, "{worst:e} of {max:e}");

    // The scattered part alone is even under omega -> -omega at fixed sigma;
    // the FDTD grid is symmetric under x -> -x, so this holds to rounding.
    let mut fdtd = synth;
    fdtd.backend = Backend::Fdtd;
    let lay2 = layout(two_dirs(normalize([0.3, 0.5, 0.8])), UniformGrid1::new(0.0, 0.1, 1).unwrap(), 1.0, h, 2.0 * h);
    let sc = scattered_pairing_cube(&q, None, &lay2, &fdtd, &NoCache).unwrap();
    let scale = sc.max_abs();
    assert!(scale > 0.0);
    for j in 0..lay2.sigma.n {
        assert!((sc.get(0, 0, j) - sc.get(0, 1, j)).abs() <= 1e-8 * scale);
    }
}

#[test]
fn born_and_fdtd_cubes_converge_as_the_potential_shrinks() {
    let h = 0.05;
    let dirs = DirectionSet::fibonacci(4).unwrap();
    let sp = UniformGrid1::new(-0.1, 0.2, 2).unwrap();
    let lay = layout(dirs, sp, 1.0, h, 2.0 * h);
    let mut diffs = Vec::new();
    for eps in [0.02, 0.01] {
        let q = bench(eps);
        let born = backscatter_cube(&q, &lay, &Synthesis::new(Backend::Born, h), &NoCache).unwrap();
        let fdtd = backscatter_cube(&q, &lay, &Synthesis::new(Backend::Fdtd, h), &NoCache).unwrap();
        diffs.push(rel(&born.values, &fdtd.values));
    }
    assert!(diffs[0] <= 0.2, "{diffs:?}");
    assert!(diffs[1] < diffs[0], "{diffs:?}");
}

#[test]
fn pairings_are_linear_in_the_weight() {
    let h = 0.05;
    let q = bench(0.05);
    let w1 = tight(1.0);
    let w2 = even(1.0);
    let combo = Combination::new(vec![(1.0, &w1), (-2.5, &w2)]);
    let lay = layout(DirectionSet::fibonacci(4).unwrap(), UniformGrid1::new(0.0, 0.1, 2).unwrap(), 1.0, h, h);
    for backend in [Backend::Born, Backend::Fdtd] {
        let synth = Synthesis::new(backend, h);
        if backend == Backend::Fdtd {
            // One direction keeps the FDTD variant short.
            let lay1 = layout(two_dirs([0.0, 0.0, 1.0]), UniformGrid1::new(0.0, 0.1, 1).unwrap(), 1.0, h, 2.0 * h);
            let a = scattered_pairing_cube(&q, Some(&w1), &lay1, &synth, &NoCache).unwrap();
            let b = scattered_pairing_cube(&q, Some(&w2), &lay1, &synth, &NoCache).unwrap();
            let c = scattered_pairing_cube(&q, Some(&combo), &lay1, &synth, &NoCache).unwrap();
            let expect = a.combine(1.0, &b, -2.5).unwrap();
            assert!(rel(&c.values, &expect.values) < 1e-10);
            continue;
        }
        let a = scattered_pairing_cube(&q, Some(&w1), &lay, &synth, &NoCache).unwrap();
        let b = scattered_pairing_cube(&q, Some(&w2), &lay, &synth, &NoCache).unwrap();
        let c = scattered_pairing_cube(&q, Some(&combo), &lay, &synth, &NoCache).unwrap();
        let expect = a.combine(1.0, &b, -2.5).unwrap();
        assert!(rel(&c.values, &expect.values) < 1e-10);
        let m = synth.mollifier().unwrap();
        let pa = principal_cube(&w1, &lay, &m).unwrap();
        let pb = principal_cube(&w2, &lay, &m).unwrap();
        let pc = principal_cube(&combo, &lay, &m).unwrap();
        assert!(rel(&pc.values, &pa.combine(1.0, &pb, -2.5).unwrap().values) < 1e-12);
    }
}

#[test]
fn fdtd_results_are_reused_through_the_cache() {
    let h = 0.05;
    let q = tight(0.05);
    let synth = Synthesis::new(Backend::Fdtd, h);
    let lay = layout(two_dirs([1.0, 0.0, 0.0]), UniformGrid1::new(0.0, 0.1, 1).unwrap(), q.rho, h, 2.0 * h);
    let cache = MemoryCache::default();
    let first = backscatter_cube(&q, &lay, &synth, &cache).unwrap();
    let stored = cache.len();
    assert!(stored > 0);
    let second = backscatter_cube(&q, &lay, &synth, &cache).unwrap();
    assert_eq!(first.values, second.values);
    assert_eq!(cache.len(), stored);
}

#[test]
fn m_components_vanish_with_the_difference_and_without_scattering() {
    let h = 0.05;
    let q1 = bench(0.05);
    let zero = Potential::zero(1.0);
    let lay = layout(two_dirs([0.0, 0.6, 0.8]), UniformGrid1::new(0.0, 0.1, 1).unwrap(), 1.0, h, 2.0 * h);
    let synth = Synthesis::new(Backend::Fdtd, h);
    for which in [MComponent::M00, MComponent::M10, MComponent::M01, MComponent::M11, MComponent::Total] {
        let c = m_component(&q1, &q1, &zero, which, &lay, &synth, &NoCache).unwrap();
        assert_eq!(c.max_abs(), 0.0, "{which:?}");
    }
    let dq = tight(1.0);
    let total = m_component(&zero, &zero, &dq, MComponent::Total, &lay, &synth, &NoCache).unwrap();
    let m00 = m_component(&zero, &zero, &dq, MComponent::M00, &lay, &synth, &NoCache).unwrap();
    assert_eq!(total.values, m00.values);
}

#[test]
fn m01_by_time_reversal_matches_a_direct_outgoing_run() {
    let h = 0.05;
    let q2 = bench(0.05);
    let dq = tight(1.0);
    let omega = normalize([0.2, -0.4, 0.9]);
    let lay = CubeLayout {
        sigma_prime: UniformGrid1::new(-0.1, 0.2, 2).unwrap(),
        sigma: UniformGrid1::symmetric(1.6, 0.1).unwrap(),
        dirs: DirectionSet::new(vec![omega], vec![4.0 * std::f64::consts::PI]).unwrap(),
    };
    let synth = Synthesis::new(Backend::Fdtd, h);
    let m01 = m_component(&q2, &q2, &dq, MComponent::M01, &lay, &synth, &NoCache).unwrap();
    let scale = m01.max_abs();
    assert!(scale > 0.0);
    for (i, j) in [(0, 14), (1, 16), (1, 20)] {
        let (s, sp) = lay.delays(i, j);
        let direct = fdtd_plane_pairing_side(&q2, &dq, sp, neg(omega), ScatterSide::Plus, omega, &[s], &synth).unwrap()[0];
        assert!((direct - m01.get(i, 0, j)).abs() <= 1e-6 * scale, "{direct:e} vs {:e}", m01.get(i, 0, j));
    }
}

#[test]
fn m10_scales_with_the_first_potential() {
    let h = 0.05;
    let dq = tight(1.0);
    let lay = layout(DirectionSet::fibonacci(4).unwrap(), UniformGrid1::new(0.0, 0.1, 2).unwrap(), 1.0, h, h);
    let synth = Synthesis::new(Backend::Born, h);
    let norms: Vec<f64> = [0.05, 0.025]
        .iter()
        .map(|&eps| {
            let q1 = bench(eps);
            m_component(&q1, &q1, &dq, MComponent::M10, &lay, &synth, &NoCache).unwrap().window_norm(-1.0, 1.0)
        })
        .collect();
    let ratio = norms[1] / norms[0];
    assert!((ratio - 0.5).abs() <= 0.125, "{norms:?}");
}

#[test]
fn pseudolinearization_sides_agree() {
    let h = 0.05;
    let q1 = bench(0.05);
    let q2 = make_bump_potential(
        &[[0.0, 0.25, 0.2], [0.1, -0.3, -0.1]],
        &[0.3, 0.35],
        TimeProfile::Bump { center: 0.05, half_width: 0.3 },
        0.05,
        1.0,
    )
    .unwrap();
    let omega = normalize([0.4, 0.1, -0.9]);
    let groups: Vec<PseudolinGroup> = [-0.2, 0.2]
        .iter()
        .map(|&s| PseudolinGroup { s, omega, measurements: vec![(-0.3, neg(omega)), (0.2, neg(omega))] })
        .collect();
    let res = pseudolinearization_check(&q1, &q2, &groups, &Synthesis::new(Backend::Fdtd, h)).unwrap();
    let num: f64 = res.iter().map(|r| (r.lhs - r.rhs).powi(2)).sum();
    let den: f64 = res.iter().map(|r| r.lhs * r.lhs).sum();
    assert!(den > 0.0);
    assert!((num / den).sqrt() <= 0.05, "{res:?}");
    assert!(pseudolinearization_check(&q1, &q2, &groups, &Synthesis::new(Backend::Born, h)).is_err());
}

#[test]
fn wedge_window_contains_the_integrand_support() {
    let q = bench(0.05);
    let w = WedgeWindow::for_potential(&q, 0.15);
    assert!((w.t_half - (0.25 + 2.0 + 1.5)).abs() < 1e-12);
    assert!(w.contains_sigma(1.0) && !w.contains_sigma(1.01));
    // Every time where q is active is inside the window for sigma' in
    // the range where the measurement plane meets the support.
    for sp in [-1.2, 0.0, 1.2] {
        for t in [-0.25, 0.0, 0.25] {
            assert!(w.contains_time(sp, t));
        }
    }
}
