//! Translation representation `k = c_3 (-d_s^2 R f_1 + d_s R f_2)` of Cauchy
//! data `(f_1, f_2)`; free evolution for time `t` maps `k(s, omega)` to
//! `k(s - t, omega)`.

use crate::error::{Error, Result};
use crate::field::Volume;
use crate::geometry::{DirectionSet, Grid3, UniformGrid1};
use crate::{C3, C3_MINUS};

use super::spectral::SpectralDerivative;
use super::{backproject, radon_forward, Sinogram, FBP_TAPER_START};

#[derive(Clone, Debug, PartialEq)]
pub struct TranslationRep {
    pub k: Sinogram,
}

pub fn translation_rep(f1: &Volume, f2: &Volume, dirs: &DirectionSet, offsets: &UniformGrid1, rho: f64) -> Result<TranslationRep> {
    if f1.grid != f2.grid {
        return Err(Error::GridMismatch("Cauchy components on different grids".into()));
    }
    let r1 = radon_forward(f1, dirs, offsets, rho)?;
    let r2 = radon_forward(f2, dirs, offsets, rho)?;
    let d2 = r1.differentiate(&SpectralDerivative::new(2, Some(FBP_TAPER_START)));
    let d1 = r2.differentiate(&SpectralDerivative::new(1, Some(FBP_TAPER_START)));
    let values = d2.values.iter().zip(&d1.values).map(|(a, b)| C3 * (-a + b)).collect();
    Ok(TranslationRep { k: Sinogram::new(*offsets, dirs.clone(), values)? })
}

/// `f_1 = -2 c_3^- int k(x . omega, omega) d omega`,
/// `f_2 = 2 c_3^- int d_s k(x . omega, omega) d omega`.
pub fn translation_rep_inverse(rep: &TranslationRep, grid: &Grid3) -> (Volume, Volume) {
    let mut f1 = backproject(&rep.k, grid);
    f1.values.iter_mut().for_each(|v| *v *= -2.0 * C3_MINUS);
    let dk = rep.k.differentiate(&SpectralDerivative::new(1, Some(FBP_TAPER_START)));
    let mut f2 = backproject(&dk, grid);
    f2.values.iter_mut().for_each(|v| *v *= 2.0 * C3_MINUS);
    (f1, f2)
}
