//! Norm estimates for sampled space-time functions.

use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::geometry::{Grid3, UniformGrid1};
use crate::potential::SpaceTimePotential;
use crate::reduce;

/// `max_t ||f(t, .)||_{L2}` with the spatial norm computed as
/// `sqrt(h^3 * sum f^2)`.
pub fn linf_l2_norm(f: &SpaceTimeField) -> Result<f64> {
    if f.nt == 0 {
        return Err(Error::EmptyTimeAxis);
    }
    linf_l2_slices(&f.grid, (0..f.nt).map(|n| f.slice(n)))
}

/// As [`linf_l2_norm`] for any sequence of slices on `grid`.
pub fn linf_l2_slices<'a, I: IntoIterator<Item = &'a [f64]>>(grid: &Grid3, slices: I) -> Result<f64> {
    let mut best: Option<f64> = None;
    for s in slices {
        if s.len() != grid.len() {
            return Err(Error::GridMismatch(format!("slice of {} values on {} nodes", s.len(), grid.len())));
        }
        let v = (reduce::sum_sq(s) * grid.cell_volume()).sqrt();
        best = Some(best.map_or(v, |b: f64| b.max(v)));
    }
    best.ok_or(Error::EmptyTimeAxis)
}

/// `sup` over a product grid of every forward-difference mixed derivative
/// `D^alpha f` with `|alpha| <= k`.
///
/// `axes` describes the sampling grid; `sample` receives one coordinate per
/// axis. Returns an error naming the first non-finite sample.
pub fn fd_sup_norm<F>(axes: &[UniformGrid1], k: usize, sample: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    use rayon::prelude::*;
    let dims: Vec<usize> = axes.iter().map(|a| a.n).collect();
    let total: usize = dims.iter().product();
    let strides = strides_of(&dims);
    let values: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let coords: Vec<f64> = (0..dims.len()).map(|a| axes[a].value((idx / strides[a]) % dims[a])).collect();
            sample(&coords)
        })
        .collect();
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        let coords: Vec<f64> = (0..dims.len()).map(|a| axes[a].value((bad / strides[a]) % dims[a])).collect();
        return Err(non_finite(&coords));
    }
    let steps: Vec<f64> = axes.iter().map(|a| a.step).collect();
    let mut best = reduce::max_abs(&values);
    descend(&values, &dims, &steps, 0, k, &mut best);
    Ok(best)
}

fn non_finite(coords: &[f64]) -> Error {
    // Space-time probes are (t, x, y, z); pure space probes are (x, y, z).
    match coords.len() {
        4 => Error::NonFiniteSample { t: coords[0], x: [coords[1], coords[2], coords[3]] },
        3 => Error::NonFiniteSample { t: f64::NAN, x: [coords[0], coords[1], coords[2]] },
        _ => Error::InvalidParameter(format!("non-finite sample at {coords:?}")),
    }
}

fn strides_of(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; dims.len()];
    for a in (0..dims.len().saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * dims[a + 1];
    }
    strides
}

// Multi-indices are enumerated as non-decreasing axis sequences so each mixed
// derivative is visited once.
fn descend(values: &[f64], dims: &[usize], steps: &[f64], first_axis: usize, remaining: usize, best: &mut f64) {
    if remaining == 0 {
        return;
    }
    for axis in first_axis..dims.len() {
        if dims[axis] < 2 {
            continue;
        }
        let (diff, ddims) = difference(values, dims, axis, steps[axis]);
        *best = best.max(reduce::max_abs(&diff));
        descend(&diff, &ddims, steps, axis, remaining - 1, best);
    }
}

fn difference(values: &[f64], dims: &[usize], axis: usize, step: f64) -> (Vec<f64>, Vec<usize>) {
    use rayon::prelude::*;
    let mut out_dims = dims.to_vec();
    out_dims[axis] -= 1;
    let in_strides = strides_of(dims);
    let out_strides = strides_of(&out_dims);
    let total: usize = out_dims.iter().product();
    let s = in_strides[axis];
    let out = (0..total)
        .into_par_iter()
        .map(|o| {
            let mut idx = 0;
            for a in 0..dims.len() {
                idx += ((o / out_strides[a]) % out_dims[a]) * in_strides[a];
            }
            (values[idx + s] - values[idx]) / step
        })
        .collect();
    (out, out_dims)
}

/// Finite-difference estimate of `||q||_{C^k}` over the support box of `q`
/// padded by `k h` in every direction, probed at spacing `h` in t and x.
pub fn cknorm_estimate<P: SpaceTimePotential + ?Sized>(q: &P, k: usize, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("probe spacing must be positive, got {h}")));
    }
    if q.n_terms() == 0 {
        return Ok(0.0);
    }
    let pad = k as f64 * h + h;
    let (t0, t1) = q.time_support();
    let r = q.rho() + pad;
    let t_axis = UniformGrid1::new(t0 - pad, h, ((t1 - t0 + 2.0 * pad) / h).ceil() as usize + 1)?;
    let x_axis = UniformGrid1::symmetric(r, h)?;
    fd_sup_norm(&[t_axis, x_axis, x_axis, x_axis], k, |c| q.value(c[0], [c[1], c[2], c[3]]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{make_bump_potential, TimeProfile};

    fn sample_q() -> crate::potential::Potential {
        make_bump_potential(
            &[[0.1, 0.2, -0.1], [-0.4, 0.0, 0.2]],
            &[0.4, 0.3],
            TimeProfile::Bump { center: 0.0, half_width: 0.4 },
            0.8,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn fd_sup_of_quadratic() {
        // f = x^2 y on [0,1]^2: max|f| = 1, max|f_x| ~ 2, max|f_xx| = 2, |f_xy| ~ 2.
        let ax = UniformGrid1::linspace(0.0, 1.0, 101).unwrap();
        let n0 = fd_sup_norm(&[ax, ax], 0, |c| c[0] * c[0] * c[1]).unwrap();
        let n2 = fd_sup_norm(&[ax, ax], 2, |c| c[0] * c[0] * c[1]).unwrap();
        assert!((n0 - 1.0).abs() < 1e-12);
        assert!((n2 - 2.0).abs() < 1e-9, "{n2}");
    }

    #[test]
    fn cknorm_is_monotone_in_order() {
        let q = sample_q();
        let mut prev = 0.0;
        for k in 0..3 {
            let v = cknorm_estimate(&q, k, 0.05).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn cknorm_scales_exactly_by_powers_of_two() {
        let q = sample_q();
        let a = cknorm_estimate(&q, 2, 0.06).unwrap();
        let b = cknorm_estimate(&q.scaled(-4.0), 2, 0.06).unwrap();
        assert_eq!(b, 4.0 * a);
    }

    #[test]
    fn nonfinite_sample_is_reported() {
        let ax = UniformGrid1::linspace(-1.0, 1.0, 5).unwrap();
        let err = fd_sup_norm(&[ax, ax, ax], 1, |c| if c[0] == 0.0 && c[1] == 0.5 { f64::NAN } else { 1.0 }).unwrap_err();
        match err {
            Error::NonFiniteSample { x, .. } => assert_eq!(x[0], 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_time_axis_is_an_error() {
        let g = Grid3::centered(1.0, 0.5).unwrap();
        let f = SpaceTimeField::zeros(g, 0.0, 0.1, 0);
        assert!(matches!(linf_l2_norm(&f), Err(Error::EmptyTimeAxis)));
    }
}
