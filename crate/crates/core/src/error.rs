use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bump {index} escapes B(0, {rho}): |center| + width = {extent}")]
    BumpOutsideSupport { index: usize, rho: f64, extent: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite sample at t = {t}, x = ({}, {}, {})", x[0], x[1], x[2])]
    NonFiniteSample { t: f64, x: [f64; 3] },

    #[error("time axis is empty")]
    EmptyTimeAxis,

    #[error("CFL violated: dt = {dt} exceeds bound {bound} (cfl * h / sqrt 3)")]
    CflViolation { dt: f64, bound: f64 },

    #[error("solution became non-finite at step {step}")]
    NonFiniteStep { step: usize },

    #[error("solve window starts too late: need t_start < -s - rho - 5 eta = {bound}, got {t_start}")]
    WindowTooLate { t_start: f64, bound: f64 },

    #[error("computational box too small: radius {radius} < required {required}")]
    BoxTooSmall { radius: f64, required: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("offset grid [{lo}, {hi}] does not cover [{need_lo}, {need_hi}]")]
    OffsetCoverage { lo: f64, hi: f64, need_lo: f64, need_hi: f64 },

    #[error("insufficient stencil margin: a halo of {needed} node(s) along {axis} is required")]
    StencilMargin { axis: &'static str, needed: usize },

    #[error("expansion order {0} is not supported (N <= 1)")]
    UnsupportedOrder(usize),

    #[error("h_j is only defined for j >= -1 (got {0}); j = -1 goes through the mollifier")]
    InvalidHOrder(i32),

    #[error("directions too close to forward scattering: |omega - omega'| = {0}")]
    ForwardScattering(f64),

    #[error("undefined ratio: denominator {0:e} is below threshold")]
    UndefinedRatio(f64),

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("direction table line {line}: {msg}")]
    DirectionTable { line: usize, msg: String },

    #[error("array file: {msg} (byte offset {offset})")]
    ArrayFormat { msg: String, offset: u64 },

    #[error("array file: payload short by {0} bytes")]
    PayloadShort(u64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
