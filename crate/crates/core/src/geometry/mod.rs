//! Lorentzian metric fields, null geodesics and causal-structure queries.

mod causal;
mod geodesic;
mod metric;
mod shooting;

use serde::{Deserialize, Serialize};

pub use causal::{
    earliest_obs_time, null_cut_time, time_separation, CutTimeOptions, Direction, ObservationSet, WorldLine,
    CHRONOLOGY_TOL, DEFAULT_TOL_CUT,
};
pub use geodesic::{
    geodesic_endpoint, integrate_geodesic, integrate_geodesic_to, GeodesicSample, GeodesicSegment,
    TOL_NULL,
};
pub use metric::{wrap_angle, ChartBox, DerivativeMode, MetricEval, MetricField, MetricKind, DEFAULT_FD_STEP};
pub use shooting::{connect_null, shoot_null, NullConnection, NullConnectionSearch, ShootingOptions};

/// Chart coordinates `(x⁰ = t, x¹, …, xⁿ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpacetimePoint {
    coords: Vec<f64>,
}

impl SpacetimePoint {
    /// Unchecked constructor; prefer [`MetricField::point`], which validates and wraps.
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn time(&self) -> f64 {
        self.coords[0]
    }

    pub fn spatial(&self) -> &[f64] {
        &self.coords[1..]
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// A tangent vector attached to a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    base: SpacetimePoint,
    components: Vec<f64>,
}

/// A covector attached to a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covector {
    base: SpacetimePoint,
    components: Vec<f64>,
}

impl TangentVector {
    pub fn new(base: SpacetimePoint, components: Vec<f64>) -> Self {
        Self { base, components }
    }

    pub fn base(&self) -> &SpacetimePoint {
        &self.base
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.base.clone(), self.components.iter().map(|v| v * c).collect())
    }

    /// Future-pointing iff the time component is positive.
    pub fn is_future_pointing(&self) -> bool {
        self.components[0] > 0.0
    }

    /// `|g(v, v)| / ‖v‖²`.
    pub fn null_residual(&self, metric: &MetricField) -> crate::Result<f64> {
        null_residual(metric, self.base.coords(), &self.components)
    }

    pub fn is_lightlike(&self, metric: &MetricField, tol: f64) -> crate::Result<bool> {
        Ok(self.null_residual(metric)? <= tol)
    }
}

impl Covector {
    pub fn new(base: SpacetimePoint, components: Vec<f64>) -> Self {
        Self { base, components }
    }

    pub fn base(&self) -> &SpacetimePoint {
        &self.base
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.base.clone(), self.components.iter().map(|v| v * c).collect())
    }
}

/// `|g(v, v)| / ‖v‖²` with the Euclidean coordinate norm.
pub fn null_residual(metric: &MetricField, x: &[f64], v: &[f64]) -> crate::Result<f64> {
    let norm2: f64 = v.iter().map(|c| c * c).sum();
    if norm2 == 0.0 {
        return Err(crate::Error::Invalid("zero vector".into()));
    }
    Ok(metric.inner(x, v, v)?.abs() / norm2)
}
