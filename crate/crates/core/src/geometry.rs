//! Points, uniform grids and direction sets on the unit sphere.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{invalid, Error, Result};

pub type Vec3 = [f64; 3];

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn neg(a: Vec3) -> Vec3 {
    [-a[0], -a[1], -a[2]]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn normalize(a: Vec3) -> Vec3 {
    scale(a, 1.0 / norm(a))
}

/// Two unit vectors completing `omega` to a right-handed orthonormal frame.
pub fn orthonormal_frame(omega: Vec3) -> (Vec3, Vec3) {
    // Cross with the coordinate axis least aligned with omega.
    let ax = omega.map(f64::abs);
    let pick = if ax[0] <= ax[1] && ax[0] <= ax[2] {
        [1.0, 0.0, 0.0]
    } else if ax[1] <= ax[2] {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let e1 = normalize(cross(omega, pick));
    let e2 = cross(omega, e1);
    (e1, e2)
}

/// Uniform 1-D grid `start + i * step`, `i < n`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct UniformGrid1 {
    pub start: f64,
    pub step: f64,
    pub n: usize,
}

impl UniformGrid1 {
    pub fn new(start: f64, step: f64, n: usize) -> Result<Self> {
        if !(step > 0.0) || n == 0 || !start.is_finite() {
            return Err(invalid(format!("bad uniform grid start={start} step={step} n={n}")));
        }
        Ok(Self { start, step, n })
    }

    /// `n` points spread evenly over `[lo, hi]` inclusive.
    pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(hi > lo) {
            return Err(invalid(format!("bad linspace [{lo}, {hi}] with {n} points")));
        }
        Self::new(lo, (hi - lo) / (n - 1) as f64, n)
    }

    /// Symmetric grid `-m*step ..= m*step` with `m = ceil(half_width / step)`.
    pub fn symmetric(half_width: f64, step: f64) -> Result<Self> {
        let m = (half_width / step - 1e-9).ceil().max(0.0) as usize;
        Self::new(-(m as f64) * step, step, 2 * m + 1)
    }

    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.value(self.n - 1)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i)).collect()
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        let tol = 1e-9 * self.step;
        self.start <= lo + tol && self.end() >= hi - tol
    }

    /// Linear interpolation of `samples` on this grid; zero outside.
    pub fn interpolate(&self, samples: &[f64], x: f64) -> f64 {
        let u = (x - self.start) / self.step;
        if !(u >= 0.0) || u > (self.n - 1) as f64 {
            return 0.0;
        }
        let i = (u.floor() as usize).min(self.n.saturating_sub(2));
        if self.n == 1 {
            return samples[0];
        }
        let f = u - i as f64;
        samples[i] * (1.0 - f) + samples[i + 1] * f
    }
}

/// Uniform Cartesian grid; samples are stored with the z index fastest.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid3 {
    pub origin: Vec3,
    pub h: f64,
    pub dims: [usize; 3],
}

impl Grid3 {
    pub fn new(origin: Vec3, h: f64, dims: [usize; 3]) -> Result<Self> {
        if !(h > 0.0) || dims.iter().any(|&d| d < 2) {
            return Err(invalid(format!("grid needs h > 0 and dims >= 2, got h={h} dims={dims:?}")));
        }
        Ok(Self { origin, h, dims })
    }

    /// Cube centred at the origin with a node at 0, covering `[-r, r]^3`.
    pub fn centered(radius: f64, h: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(invalid(format!("grid radius must be positive, got {radius}")));
        }
        let m = (radius / h - 1e-9).ceil() as usize;
        let o = -(m as f64) * h;
        Self::new([o, o, o], h, [2 * m + 1; 3])
    }

    /// Largest `r` with `B(0, r)` inside the covered box.
    pub fn inner_radius(&self) -> f64 {
        (0..3)
            .map(|a| {
                let lo = self.origin[a];
                let hi = lo + (self.dims[a] - 1) as f64 * self.h;
                (-lo).min(hi)
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.dims[2];
        let r = idx / self.dims[2];
        [r / self.dims[1], r % self.dims[1], k]
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize, k: usize) -> Vec3 {
        [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + j as f64 * self.h,
            self.origin[2] + k as f64 * self.h,
        ]
    }

    #[inline]
    pub fn point_of(&self, idx: usize) -> Vec3 {
        let [i, j, k] = self.ijk(idx);
        self.point(i, j, k)
    }

    pub fn cell_volume(&self) -> f64 {
        self.h * self.h * self.h
    }

    /// Samples `f` at every node.
    pub fn sample<F: Fn(Vec3) -> f64 + Sync>(&self, f: F) -> Vec<f64> {
        use rayon::prelude::*;
        (0..self.len()).into_par_iter().map(|idx| f(self.point_of(idx))).collect()
    }

    /// Trilinear interpolation of node values; zero outside the box.
    #[inline]
    pub fn trilinear(&self, values: &[f64], x: Vec3) -> f64 {
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let u = (x[a] - self.origin[a]) / self.h;
            let top = (self.dims[a] - 1) as f64;
            if !(u >= 0.0 && u <= top) {
                return 0.0;
            }
            let i = (u.floor() as usize).min(self.dims[a] - 2);
            base[a] = i;
            frac[a] = u - i as f64;
        }
        let [i, j, k] = base;
        let [fx, fy, fz] = frac;
        let sz = 1;
        let sy = self.dims[2];
        let sx = self.dims[1] * self.dims[2];
        let o = self.index(i, j, k);
        let c00 = values[o] * (1.0 - fz) + values[o + sz] * fz;
        let c01 = values[o + sy] * (1.0 - fz) + values[o + sy + sz] * fz;
        let c10 = values[o + sx] * (1.0 - fz) + values[o + sx + sz] * fz;
        let c11 = values[o + sx + sy] * (1.0 - fz) + values[o + sx + sy + sz] * fz;
        let c0 = c00 * (1.0 - fy) + c01 * fy;
        let c1 = c10 * (1.0 - fy) + c11 * fy;
        c0 * (1.0 - fx) + c1 * fx
    }
}

/// Nodes on the unit sphere with positive quadrature weights.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DirectionSet {
    pub dirs: Vec<Vec3>,
    pub weights: Vec<f64>,
}

/// Sizes of the packaged antipodal spherical designs.
pub const PACKAGED_DESIGNS: [usize; 5] = [26, 38, 50, 74, 122];

impl DirectionSet {
    pub fn new(dirs: Vec<Vec3>, weights: Vec<f64>) -> Result<Self> {
        if dirs.len() != weights.len() || dirs.is_empty() {
            return Err(invalid("direction and weight counts differ or are zero"));
        }
        for (i, (d, &w)) in dirs.iter().zip(&weights).enumerate() {
            if (norm(*d) - 1.0).abs() > 1e-12 {
                return Err(invalid(format!("direction {i} has norm {}", norm(*d))));
            }
            if !(w > 0.0) {
                return Err(invalid(format!("direction {i} has non-positive weight {w}")));
            }
        }
        let total: f64 = weights.iter().sum();
        if ((total - 4.0 * PI) / (4.0 * PI)).abs() > 1e-3 {
            return Err(invalid(format!("weights sum to {total}, expected 4 pi")));
        }
        Ok(Self { dirs, weights })
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    /// Parses the "wx wy wz weight" table format; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut dirs = Vec::new();
        let mut weights = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let nums: std::result::Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
            let nums = nums.map_err(|e| Error::DirectionTable { line: lineno + 1, msg: e.to_string() })?;
            if nums.len() != 4 {
                return Err(Error::DirectionTable {
                    line: lineno + 1,
                    msg: format!("expected 4 numbers, found {}", nums.len()),
                });
            }
            dirs.push([nums[0], nums[1], nums[2]]);
            weights.push(nums[3]);
        }
        Self::new(dirs, weights)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("# wx wy wz weight\n");
        for (d, w) in self.dirs.iter().zip(&self.weights) {
            out.push_str(&format!("{:+.17e} {:+.17e} {:+.17e} {:.17e}\n", d[0], d[1], d[2], w));
        }
        out
    }

    /// One of the packaged equal-weight antipodal spherical designs.
    pub fn design(n: usize) -> Result<Self> {
        let text = match n {
            26 => include_str!("../data/design_26.txt"),
            38 => include_str!("../data/design_38.txt"),
            50 => include_str!("../data/design_50.txt"),
            74 => include_str!("../data/design_74.txt"),
            122 => include_str!("../data/design_122.txt"),
            _ => {
                return Err(invalid(format!(
                    "no packaged design with {n} nodes (available: {PACKAGED_DESIGNS:?})"
                )))
            }
        };
        Self::parse(text)
    }

    /// Packaged design when one exists with `n` nodes, else the Fibonacci set.
    pub fn with_count(n: usize) -> Result<Self> {
        if PACKAGED_DESIGNS.contains(&n) {
            Self::design(n)
        } else {
            Self::fibonacci(n)
        }
    }

    /// Antipodally symmetric Fibonacci lattice with equal weights; `n` must be even.
    pub fn fibonacci(n: usize) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(invalid(format!("Fibonacci set needs an even count >= 2, got {n}")));
        }
        let half = n / 2;
        let golden = PI * (3.0 - 5f64.sqrt());
        let mut dirs = Vec::with_capacity(n);
        for i in 0..half {
            // Upper hemisphere only; the antipodes fill the lower half.
            let z = 1.0 - (i as f64 + 0.5) / half as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            dirs.push(normalize([r * phi.cos(), r * phi.sin(), z]));
        }
        let upper = dirs.clone();
        dirs.extend(upper.iter().map(|&d| neg(d)));
        let w = 4.0 * PI / n as f64;
        Self::new(dirs, vec![w; n])
    }

    /// Index of the antipode of direction `i`, when present.
    pub fn antipode(&self, i: usize) -> Option<usize> {
        let target = neg(self.dirs[i]);
        self.dirs.iter().position(|&d| norm(sub(d, target)) < 1e-9)
    }

    /// Quadrature of `f` over the sphere.
    pub fn integrate<F: Fn(Vec3) -> f64>(&self, f: F) -> f64 {
        let mut acc = 0.0;
        for (d, w) in self.dirs.iter().zip(&self.weights) {
            acc += w * f(*d);
        }
        acc
    }

    /// The same set with every node mapped through the rotation `rot` (rows).
    pub fn rotated(&self, rot: &[[f64; 3]; 3]) -> Self {
        let dirs = self
            .dirs
            .iter()
            .map(|&d| normalize([dot(rot[0], d), dot(rot[1], d), dot(rot[2], d)]))
            .collect();
        Self { dirs, weights: self.weights.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_is_orthonormal() {
        for omega in [[0.0, 0.0, 1.0], normalize([1.0, 2.0, -0.5]), [-1.0, 0.0, 0.0]] {
            let (e1, e2) = orthonormal_frame(omega);
            assert!(dot(e1, omega).abs() < 1e-15);
            assert!(dot(e2, omega).abs() < 1e-15);
            assert!(dot(e1, e2).abs() < 1e-15);
            assert!((norm(e1) - 1.0).abs() < 1e-15 && (norm(e2) - 1.0).abs() < 1e-15);
            assert!(norm(sub(cross(e1, e2), omega)) < 1e-14);
        }
    }

    #[test]
    fn packaged_designs_validate_and_are_antipodal() {
        for n in PACKAGED_DESIGNS {
            let set = DirectionSet::design(n).unwrap();
            assert_eq!(set.len(), n);
            for i in 0..n {
                assert!(set.antipode(i).is_some(), "design {n} node {i} lacks an antipode");
            }
        }
    }

    #[test]
    fn designs_integrate_low_degree_polynomials() {
        // integral of z^2 over the sphere is 4 pi / 3, of x^2 y^2 is 4 pi / 15
        for n in PACKAGED_DESIGNS {
            let set = DirectionSet::design(n).unwrap();
            let z2 = set.integrate(|w| w[2] * w[2]);
            assert!((z2 - 4.0 * PI / 3.0).abs() < 1e-10, "design {n}: {z2}");
            let x2y2 = set.integrate(|w| w[0] * w[0] * w[1] * w[1]);
            assert!((x2y2 - 4.0 * PI / 15.0).abs() < 1e-10, "design {n}: {x2y2}");
        }
    }

    #[test]
    fn parse_rejects_bad_lines() {
        let err = DirectionSet::parse("0 0 1 6.283\n0 0 -1\n").unwrap_err();
        assert!(matches!(err, Error::DirectionTable { line: 2, .. }));
        let err = DirectionSet::parse("0 0 1.1 12.566370614359172\n").unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn table_round_trip() {
        let set = DirectionSet::fibonacci(40).unwrap();
        let back = DirectionSet::parse(&set.to_table()).unwrap();
        assert_eq!(set, back);
    }

    #[test]
    fn trilinear_reproduces_affine_functions() {
        let g = Grid3::centered(1.0, 0.1).unwrap();
        let v = g.sample(|x| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2]);
        let x = [0.123, -0.456, 0.789];
        let exact = 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2];
        assert!((g.trilinear(&v, x) - exact).abs() < 1e-12);
        assert_eq!(g.trilinear(&v, [1.5, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn centered_grid_covers_radius() {
        let g = Grid3::centered(1.0, 0.025).unwrap();
        assert_eq!(g.dims, [81, 81, 81]);
        assert!((g.inner_radius() - 1.0).abs() < 1e-12);
        assert_eq!(g.point(40, 40, 40), [0.0, 0.0, 0.0]);
    }
}
