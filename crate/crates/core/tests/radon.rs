use std::f64::consts::PI;

use bslab_core::field::Volume;
use bslab_core::geometry::{dot, norm, normalize, sub, DirectionSet, Grid3, UniformGrid1, Vec3};
use bslab_core::potential::cutoff;
use bslab_core::radon::{
    backproject, radon_forward, radon_inverse, radon_stability_ratio, radon_weighted, sobolev_data_norm,
    translation_rep, translation_rep_inverse, Sinogram,
};
use bslab_core::solver::{run, Boundary, Init, Observer, SolveSpec, Source, StepView};
use rand::{Rng, SeedableRng};

fn gaussian_volume(h: f64, radius: f64) -> Volume {
    Volume::from_fn(Grid3::centered(radius, h).unwrap(), |x| (-dot(x, x)).exp())
}

fn bump_volume(grid: Grid3, center: Vec3, width: f64) -> Volume {
    Volume::from_fn(grid, |x| cutoff(norm(sub(x, center)) / width))
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

#[test]
fn zero_function_has_zero_sinogram() {
    let f = Volume::zeros(Grid3::centered(1.0, 0.1).unwrap());
    let dirs = DirectionSet::design(26).unwrap();
    let p = UniformGrid1::symmetric(1.0, 0.1).unwrap();
    let s = radon_forward(&f, &dirs, &p, 1.0).unwrap();
    assert!(s.values.iter().all(|&v| v == 0.0));
    let back = radon_inverse(&s, &f.grid);
    assert!(back.values.iter().all(|&v| v == 0.0));
}

#[test]
fn gaussian_matches_closed_form_and_monte_carlo() {
    let f = gaussian_volume(0.1, 4.0);
    let dirs = DirectionSet::design(26).unwrap();
    let p = UniformGrid1::symmetric(4.0, 0.25).unwrap();
    let s = radon_forward(&f, &dirs, &p, 4.0).unwrap();
    let exact = Sinogram::from_fn(p, dirs.clone(), |p, _| PI * (-p * p).exp());
    let err = rel_l2(&s.values, &exact.values);
    assert!(err < 5e-3, "closed form: {err}");

    // Independent Monte-Carlo plane quadrature of the exact Gaussian.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let omega = dirs.dirs[3];
    let (e1, e2) = bslab_core::geometry::orthonormal_frame(omega);
    for i in [8, 16, 22] {
        let pv = p.value(i);
        let n = 200_000;
        let half = 4.0;
        let (mut acc, mut acc2) = (0.0, 0.0);
        for _ in 0..n {
            let a = rng.gen_range(-half..half);
            let b = rng.gen_range(-half..half);
            let x = [
                pv * omega[0] + a * e1[0] + b * e2[0],
                pv * omega[1] + a * e1[1] + b * e2[1],
                pv * omega[2] + a * e1[2] + b * e2[2],
            ];
            let g = (-dot(x, x)).exp();
            acc += g;
            acc2 += g * g;
        }
        let area = (2.0 * half).powi(2);
        let mean = acc / n as f64;
        let std_err = ((acc2 / n as f64 - mean * mean) / n as f64).sqrt() * area;
        let mc = mean * area;
        let v = s.row(3)[i];
        assert!((mc - v).abs() < 4.0 * std_err + 1e-3 * v, "p={pv}: mc {mc} +- {std_err} vs {v}");
    }
}

fn rotation(axis: Vec3, angle: f64) -> [[f64; 3]; 3] {
    let [x, y, z] = normalize(axis);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

#[test]
fn rotating_function_and_directions_together() {
    let grid = Grid3::centered(1.0, 0.025).unwrap();
    let c = [0.3, -0.1, 0.2];
    let f = bump_volume(grid, c, 0.5);
    let rot = rotation([1.0, 2.0, -0.5], 0.7);
    let rc = [dot(rot[0], c), dot(rot[1], c), dot(rot[2], c)];
    let g = bump_volume(grid, rc, 0.5);
    let dirs = DirectionSet::design(26).unwrap();
    let p = UniformGrid1::symmetric(1.0, 0.05).unwrap();
    let a = radon_forward(&f, &dirs, &p, 1.0).unwrap();
    let b = radon_forward(&g, &dirs.rotated(&rot), &p, 1.0).unwrap();
    let err = rel_l2(&b.values, &a.values);
    assert!(err < 1e-3, "{err}");
}

#[test]
fn weighted_transform_reduces_to_plain_transform() {
    let grid = Grid3::centered(1.0, 0.05).unwrap();
    let f = bump_volume(grid, [0.1, 0.2, 0.0], 0.6);
    let dirs = DirectionSet::design(38).unwrap();
    let p = UniformGrid1::symmetric(1.0, 0.05).unwrap();
    let plain = radon_forward(&f, &dirs, &p, 1.0).unwrap();
    let one = radon_weighted(&f, &|_, _| 1.0, &dirs, &p, 1.0).unwrap();
    assert_eq!(plain.values, one.values);
    let zero = radon_weighted(&f, &|_, _| 0.0, &dirs, &p, 1.0).unwrap();
    assert!(zero.values.iter().all(|&v| v == 0.0));
}

#[test]
fn evenness_and_support() {
    let grid = Grid3::centered(1.2, 0.05).unwrap();
    let f = bump_volume(grid, [0.2, -0.3, 0.1], 0.5);
    let dirs = DirectionSet::design(50).unwrap();
    let p = UniformGrid1::symmetric(1.2, 0.05).unwrap();
    let s = radon_forward(&f, &dirs, &p, 1.0).unwrap();
    let max = s.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for d in 0..dirs.len() {
        let a = dirs.antipode(d).unwrap();
        for i in 0..p.n {
            let j = p.n - 1 - i;
            assert!((s.row(d)[i] - s.row(a)[j]).abs() <= 1e-13 * max);
            if p.value(i).abs() > 1.0 {
                assert!(s.row(d)[i].abs() <= 1e-8 * max);
            }
        }
    }
}

#[test]
fn adjoint_consistency() {
    let grid = Grid3::centered(1.0, 0.025).unwrap();
    let f = bump_volume(grid, [0.1, 0.1, -0.2], 0.6);
    let dirs = DirectionSet::design(38).unwrap();
    let p = UniformGrid1::symmetric(1.0, 0.025).unwrap();
    let rf = radon_forward(&f, &dirs, &p, 1.0).unwrap();
    let g = Sinogram::from_fn(p, dirs.clone(), |s, w| (1.0 + 0.5 * w[0]) * (-(s - 0.1).powi(2) * 6.0).exp());
    let lhs: f64 = (0..dirs.len())
        .map(|d| dirs.weights[d] * rf.row(d).iter().zip(g.row(d)).map(|(a, b)| a * b).sum::<f64>() * p.step)
        .sum();
    let bp = backproject(&g, &grid);
    let rhs: f64 = f.values.iter().zip(&bp.values).map(|(a, b)| a * b).sum::<f64>() * grid.cell_volume();
    assert!((lhs - rhs).abs() <= 5e-3 * lhs.abs(), "{lhs} vs {rhs}");
}

fn gaussian_round_trip(n_dirs: usize, n_offsets: usize) -> f64 {
    let grid = Grid3::centered(1.0, 0.025).unwrap();
    let dirs = DirectionSet::design(n_dirs).unwrap();
    let p = UniformGrid1::linspace(-4.0, 4.0, n_offsets).unwrap();
    let sino = Sinogram::from_fn(p, dirs, |p, _| PI * (-p * p).exp());
    let rec = radon_inverse(&sino, &grid);
    let exact = Volume::from_fn(grid, |x| (-dot(x, x)).exp());
    rec.relative_error(&exact, Some(1.0)).unwrap()
}

#[test]
fn gaussian_round_trip_at_reference_resolution() {
    let start = std::time::Instant::now();
    let err = gaussian_round_trip(74, 121);
    assert!(err <= 0.05, "relative error {err}");
    assert!(start.elapsed().as_secs_f64() < 60.0);
}

#[test]
fn round_trip_improves_under_refinement() {
    let coarse = gaussian_round_trip(26, 41);
    let mid = gaussian_round_trip(50, 81);
    let fine = gaussian_round_trip(74, 121);
    assert!(coarse > mid && mid > fine, "{coarse} {mid} {fine}");
}

#[test]
fn inverse_is_linear() {
    let grid = Grid3::centered(1.0, 0.05).unwrap();
    let dirs = DirectionSet::design(26).unwrap();
    let p = UniformGrid1::symmetric(1.5, 0.05).unwrap();
    let s1 = Sinogram::from_fn(p, dirs.clone(), |p, w| (-(p - 0.2 * w[1]).powi(2) * 8.0).exp());
    let s2 = Sinogram::from_fn(p, dirs.clone(), |p, w| (1.0 + w[2]) * (-p * p * 5.0).exp());
    let (a, b) = (0.7, -1.3);
    let combo = Sinogram::new(p, dirs, s1.values.iter().zip(&s2.values).map(|(x, y)| a * x + b * y).collect()).unwrap();
    let r1 = radon_inverse(&s1, &grid);
    let r2 = radon_inverse(&s2, &grid);
    let rc = radon_inverse(&combo, &grid);
    let scale = rc.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..rc.values.len() {
        assert!((rc.values[i] - (a * r1.values[i] + b * r2.values[i])).abs() <= 1e-10 * scale);
    }
}

#[test]
fn gaussian_stability_ratio_matches_closed_form() {
    let f = gaussian_volume(0.1, 4.0);
    let dirs = DirectionSet::design(26).unwrap();
    let p = UniformGrid1::symmetric(5.0, 0.1).unwrap();
    let (lo, hi) = radon_stability_ratio(&f, &dirs, &p, 4.0).unwrap();
    assert_eq!(lo, hi);
    let closed = Sinogram::from_fn(p, dirs, |p, _| PI * (-p * p).exp());
    let exact_norm = (PI / 2.0).powf(0.75);
    let oracle = sobolev_data_norm(&closed, 1) / exact_norm;
    assert!((oracle - 4.0 * PI).abs() < 1e-6 * 4.0 * PI, "closed-form ratio {oracle}");
    assert!((lo - oracle).abs() < 5e-3 * oracle, "{lo} vs {oracle}");
}

#[test]
fn stability_ratio_is_scale_invariant_and_rejects_zero() {
    let grid = Grid3::centered(1.0, 0.05).unwrap();
    let f = bump_volume(grid, [0.1, 0.0, 0.2], 0.5);
    let dirs = DirectionSet::design(26).unwrap();
    let p = UniformGrid1::symmetric(1.2, 0.05).unwrap();
    let (a, _) = radon_stability_ratio(&f, &dirs, &p, 1.0).unwrap();
    let g = Volume { grid, values: f.values.iter().map(|v| v * 37.5).collect() };
    let (b, _) = radon_stability_ratio(&g, &dirs, &p, 1.0).unwrap();
    assert!((a - b).abs() <= 1e-10 * a);
    let z = Volume::zeros(grid);
    assert!(radon_stability_ratio(&z, &dirs, &p, 1.0).is_err());
}

#[test]
fn translation_representation_round_trip() {
    let grid = Grid3::centered(1.0, 0.025).unwrap();
    let dirs = DirectionSet::design(74).unwrap();
    let p = UniformGrid1::linspace(-1.5, 1.5, 121).unwrap();
    let f1 = bump_volume(grid, [0.05, -0.05, 0.0], 0.9);
    let f2 = Volume::from_fn(grid, |x| (-4.0 * dot(x, x)).exp() * cutoff(norm(x)));
    let zero = Volume::zeros(grid);
    let k0 = translation_rep(&zero, &zero, &dirs, &p, 1.0).unwrap();
    assert!(k0.k.values.iter().all(|&v| v == 0.0));
    let k = translation_rep(&f1, &f2, &dirs, &p, 1.0).unwrap();
    let (g1, g2) = translation_rep_inverse(&k, &grid);
    let e1 = g1.relative_error(&f1, Some(1.0)).unwrap();
    let e2 = g2.relative_error(&f2, Some(1.0)).unwrap();
    assert!(e1 <= 0.05 && e2 <= 0.05, "{e1} {e2}");
}

/// Captures `u` and a centred `u_t` at one lattice level.
struct Snapshot {
    n: i64,
    u: Vec<f64>,
    ut: Vec<f64>,
}

impl Observer for Snapshot {
    fn observe(&mut self, v: &StepView<'_>) -> bslab_core::Result<()> {
        if v.n == self.n {
            self.u = v.cur.to_vec();
            self.ut = (0..v.cur.len()).map(|i| v.ut(i)).collect();
        }
        Ok(())
    }
}

#[test]
fn free_evolution_translates_the_representation() {
    let h = 0.0125;
    let grid = Grid3::centered(1.3, h).unwrap();
    let dt = 0.5 * h / 3f64.sqrt();
    let steps = (0.3 / dt).round() as i64;
    let t = steps as f64 * dt;
    let f1 = bump_volume(grid, [0.05, 0.0, -0.05], 0.7);
    let f2 = Volume::zeros(grid);
    let mut snap = Snapshot { n: steps, u: Vec::new(), ut: Vec::new() };
    run(
        SolveSpec {
            grid,
            dt,
            cfl: 0.5,
            n_start: 0,
            n_end: steps + 1,
            q: None,
            source: Source::None,
            init: Init::Cauchy { u: f1.values.clone(), ut: f2.values.clone() },
            boundary: Boundary::Zero,
        },
        &mut [&mut snap],
    )
    .unwrap();
    // Offsets spaced so that the elapsed time is a whole number of steps.
    let shift = (t / 0.0125).ceil() as usize;
    let step = t / shift as f64;
    let half = (1.5 / step).ceil() as usize;
    let p = UniformGrid1::new(-(half as f64) * step, step, 2 * half + 1).unwrap();
    let dirs = DirectionSet::design(26).unwrap();
    let rho = 1.25;
    let k0 = translation_rep(&f1, &f2, &dirs, &p, rho).unwrap();
    let u = Volume::new(grid, snap.u).unwrap();
    let ut = Volume::new(grid, snap.ut).unwrap();
    let kt = translation_rep(&u, &ut, &dirs, &p, rho).unwrap();
    let mut shifted = Sinogram::zeros(p, dirs.clone());
    for d in 0..dirs.len() {
        for i in shift..p.n {
            shifted.row_mut(d)[i] = k0.k.row(d)[i - shift];
        }
    }
    let err = rel_l2(&kt.k.values, &shifted.values);
    assert!(err <= 0.05, "shift property error {err} at t = {t}");
}

fn random_bump_sum(rng: &mut impl Rng, grid: Grid3) -> Volume {
    let count = rng.gen_range(1..=3);
    let bumps: Vec<(Vec3, f64, f64)> = (0..count)
        .map(|_| {
            let width = rng.gen_range(0.3..0.5);
            let reach = 0.9 - width;
            let c = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let c = bslab_core::geometry::scale(normalize(c), reach * rng.gen::<f64>());
            (c, width, rng.gen_range(0.5..1.5))
        })
        .collect();
    Volume::from_fn(grid, |x| bumps.iter().map(|&(c, w, a)| a * cutoff(norm(sub(x, c)) / w)).sum())
}

#[test]
fn stability_ratio_spread_over_random_ensemble() {
    let grid = Grid3::centered(1.0, 0.025).unwrap();
    let dirs = DirectionSet::design(74).unwrap();
    let p = UniformGrid1::linspace(-1.5, 1.5, 121).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let ratios: Vec<f64> = (0..20)
        .map(|_| radon_stability_ratio(&random_bump_sum(&mut rng, grid), &dirs, &p, 1.0).unwrap().0)
        .collect();
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    assert!(lo > 0.0 && hi / lo <= 10.0, "spread {lo}..{hi}");
}

#[test]
fn weighted_transform_stays_bounded_for_smooth_weights() {
    let grid = Grid3::centered(1.0, 0.05).unwrap();
    let dirs = DirectionSet::design(26).unwrap();
    let p = UniformGrid1::linspace(-1.5, 1.5, 61).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let f = random_bump_sum(&mut rng, grid);
        let a: Vec3 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let mu = move |x: Vec3, w: Vec3| 1.0 + 0.3 * (dot(a, x) + w[2]).sin();
        let rf = radon_weighted(&f, &mu, &dirs, &p, 1.0).unwrap();
        let ratio = sobolev_data_norm(&rf, 1) / f.l2_norm();
        assert!(ratio.is_finite() && ratio > 0.0 && ratio < 1e3, "{ratio}");
    }
}
