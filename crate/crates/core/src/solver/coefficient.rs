//! Sparse samples of a potential on the nodes of a grid.

use crate::error::{Error, Result};
use crate::geometry::{norm, sub, Grid3, Vec3};
use crate::potential::SpaceTimePotential;

/// Above this many terms the samples are recomputed on every call instead of
/// being cached per term.
const MAX_CACHED_TERMS: usize = 16;

struct TermSamples {
    k: usize,
    entries: Vec<(u32, f64)>,
}

/// The nodes where some term of a potential may be nonzero, with cached
/// per-term spatial factors.
pub struct GridCoefficient {
    pub nodes: Vec<usize>,
    pub points: Vec<Vec3>,
    terms: Option<Vec<TermSamples>>,
}

impl GridCoefficient {
    /// Collects the support nodes; every support ball must stay at least one
    /// node away from the grid boundary.
    pub fn new<P: SpaceTimePotential + ?Sized>(q: &P, grid: &Grid3) -> Result<Self> {
        let mut map = vec![u32::MAX; grid.len()];
        let mut nodes = Vec::new();
        let mut points = Vec::new();
        let cache = q.n_terms() <= MAX_CACHED_TERMS;
        let mut terms = Vec::new();
        for k in 0..q.n_terms() {
            let sup = q.term_support(k);
            let mut lo = [0usize; 3];
            let mut hi = [0usize; 3];
            for a in 0..3 {
                let l = ((sup.center[a] - sup.radius - grid.origin[a]) / grid.h).floor();
                let u = ((sup.center[a] + sup.radius - grid.origin[a]) / grid.h).ceil();
                if l < 1.0 || u > (grid.dims[a] - 2) as f64 {
                    let required = norm(sup.center) + sup.radius + grid.h;
                    return Err(Error::BoxTooSmall { radius: grid.inner_radius(), required });
                }
                lo[a] = l as usize;
                hi[a] = u as usize;
            }
            let mut entries = Vec::new();
            for i in lo[0]..=hi[0] {
                for j in lo[1]..=hi[1] {
                    for kk in lo[2]..=hi[2] {
                        let x = grid.point(i, j, kk);
                        if norm(sub(x, sup.center)) >= sup.radius {
                            continue;
                        }
                        let phi = if cache { q.space_factor(k, x) } else { 1.0 };
                        if phi == 0.0 {
                            continue;
                        }
                        let idx = grid.index(i, j, kk);
                        if map[idx] == u32::MAX {
                            map[idx] = nodes.len() as u32;
                            nodes.push(idx);
                            points.push(x);
                        }
                        if cache {
                            entries.push((map[idx], phi));
                        }
                    }
                }
            }
            if cache {
                terms.push(TermSamples { k, entries });
            }
        }
        Ok(Self { nodes, points, terms: cache.then_some(terms) })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Writes `q(t, x)` at every support node into `out`.
    pub fn eval<P: SpaceTimePotential + ?Sized>(&self, q: &P, t: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        match &self.terms {
            Some(terms) => {
                for term in terms {
                    let g = q.time_factor(term.k, t);
                    if g == 0.0 {
                        continue;
                    }
                    for &(pos, phi) in &term.entries {
                        out[pos as usize] += g * phi;
                    }
                }
            }
            None => {
                for (o, x) in out.iter_mut().zip(&self.points) {
                    *o = q.value(t, *x);
                }
            }
        }
    }
}
