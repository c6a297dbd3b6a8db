use std::f64::consts::TAU;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;

use super::{Covector, SpacetimePoint, TangentVector};

/// Default central-difference step for metric derivatives.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Model spacetimes with the product structure `g = −β dt² + g₀`.
///
/// Every built-in kind is diagonal in its chart, which the integrators
/// exploit; [`MetricField::metric_eval`] still returns full matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricKind {
    /// `−dt² + |dx|²` on `ℝ^{1+n}`.
    Minkowski { spatial_dim: usize },
    /// `−dt² + dθ²` on `ℝ × S¹` (circumference 2π), θ stored in `[0, 2π)`.
    Cylinder,
    /// `−β(x) dt² + a(x) |dx|²` with `β, a > 0`.
    WarpedProduct { spatial_dim: usize, lapse: ScalarField, spatial_scale: ScalarField },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DerivativeMode {
    #[default]
    Analytic,
    CentralDifference { h: f64 },
}

/// Axis-aligned coordinate box bounding the chart; leaving it is treated as
/// reaching the end of the maximal existence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// A chart-based Lorentzian metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricField {
    #[serde(flatten)]
    pub kind: MetricKind,
    #[serde(default)]
    pub derivative_mode: DerivativeMode,
    #[serde(default)]
    pub domain: Option<ChartBox>,
}

/// Metric and inverse metric at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricEval {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
}

impl MetricField {
    pub fn minkowski(spatial_dim: usize) -> Self {
        Self::from_kind(MetricKind::Minkowski { spatial_dim })
    }

    pub fn cylinder() -> Self {
        Self::from_kind(MetricKind::Cylinder)
    }

    pub fn warped(spatial_dim: usize, lapse: ScalarField, spatial_scale: ScalarField) -> Self {
        Self::from_kind(MetricKind::WarpedProduct { spatial_dim, lapse, spatial_scale })
    }

    pub fn from_kind(kind: MetricKind) -> Self {
        Self { kind, derivative_mode: DerivativeMode::Analytic, domain: None }
    }

    pub fn with_domain(mut self, domain: ChartBox) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn with_derivative_mode(mut self, mode: DerivativeMode) -> Self {
        self.derivative_mode = mode;
        self
    }

    /// Spacetime dimension `1 + n`.
    pub fn dim(&self) -> usize {
        match &self.kind {
            MetricKind::Minkowski { spatial_dim } | MetricKind::WarpedProduct { spatial_dim, .. } => {
                1 + spatial_dim
            }
            MetricKind::Cylinder => 2,
        }
    }

    pub fn is_cylinder(&self) -> bool {
        matches!(self.kind, MetricKind::Cylinder)
    }

    /// True when all metric derivatives vanish identically.
    pub fn is_flat_chart(&self) -> bool {
        match &self.kind {
            MetricKind::Minkowski { .. } | MetricKind::Cylinder => true,
            MetricKind::WarpedProduct { lapse, spatial_scale, .. } => {
                lapse.is_constant() && spatial_scale.is_constant()
            }
        }
    }

    /// Checks the metric description itself.
    pub fn validate(&self) -> Result<()> {
        if let MetricKind::Minkowski { spatial_dim } | MetricKind::WarpedProduct { spatial_dim, .. } = &self.kind {
            if *spatial_dim == 0 {
                return Err(Error::Invalid("spatial dimension must be at least 1".into()));
            }
        }
        if let MetricKind::WarpedProduct { lapse, spatial_scale, .. } = &self.kind {
            if !lapse.all_finite() || !spatial_scale.all_finite() {
                return Err(Error::Invalid("warped-product coefficients must be finite".into()));
            }
        }
        if let DerivativeMode::CentralDifference { h } = self.derivative_mode {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Invalid("finite-difference step must be positive".into()));
            }
        }
        if let Some(b) = &self.domain {
            if b.lower.len() != self.dim() || b.upper.len() != self.dim() {
                return Err(Error::Shape { expected: self.dim(), found: b.lower.len() });
            }
        }
        Ok(())
    }

    /// Canonical representative of a coordinate tuple (wraps the cylinder angle).
    pub fn wrap(&self, x: &mut [f64]) {
        if self.is_cylinder() {
            x[1] = x[1].rem_euclid(TAU);
            if x[1] >= TAU {
                x[1] = 0.0;
            }
        }
    }

    /// Coordinate difference `a − b`, using the shortest angular difference on the cylinder.
    pub fn coord_diff(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut d: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
        if self.is_cylinder() {
            d[1] = wrap_angle(d[1]);
        }
        d
    }

    /// Euclidean coordinate distance, chart-aware.
    pub fn coord_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.coord_diff(a, b).iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    pub fn point(&self, coords: Vec<f64>) -> Result<SpacetimePoint> {
        let mut coords = coords;
        self.check_coords(&coords)?;
        self.wrap(&mut coords);
        Ok(SpacetimePoint::new(coords))
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        self.check_coords(x).is_ok() && self.diagonal(x).is_ok()
    }

    fn check_coords(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Shape { expected: self.dim(), found: x.len() });
        }
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite coordinate".into()));
        }
        if let Some(b) = &self.domain {
            let skip_angle = self.is_cylinder();
            for (k, (&c, (lo, hi))) in x.iter().zip(b.lower.iter().zip(&b.upper)).enumerate() {
                if skip_angle && k == 1 {
                    continue;
                }
                if c < *lo || c > *hi {
                    return Err(Error::Domain(format!("coordinate {k} = {c} outside chart box")));
                }
            }
        }
        Ok(())
    }

    /// Diagonal entries `g_ii(x)`.
    pub fn diagonal(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_coords(x)?;
        let n = self.dim();
        match &self.kind {
            MetricKind::Minkowski { .. } | MetricKind::Cylinder => {
                let mut d = vec![1.0; n];
                d[0] = -1.0;
                Ok(d)
            }
            MetricKind::WarpedProduct { lapse, spatial_scale, .. } => {
                let beta = lapse.value(x);
                let a = spatial_scale.value(x);
                if !(beta > 0.0) {
                    return Err(Error::Domain(format!("lapse β = {beta} is not positive")));
                }
                if !(a > 0.0) {
                    return Err(Error::Domain(format!("spatial scale {a} is not positive")));
                }
                let mut d = vec![a; n];
                d[0] = -beta;
                Ok(d)
            }
        }
    }

    /// `∂_k g_ii(x)` as `out[k][i]`.
    pub fn diagonal_derivatives(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.dim();
        match &self.kind {
            MetricKind::Minkowski { .. } | MetricKind::Cylinder => {
                self.check_coords(x)?;
                Ok(vec![vec![0.0; n]; n])
            }
            MetricKind::WarpedProduct { lapse, spatial_scale, .. } => match self.derivative_mode {
                DerivativeMode::Analytic => {
                    self.diagonal(x)?;
                    let gb = lapse.gradient(x);
                    let ga = spatial_scale.gradient(x);
                    Ok((0..n)
                        .map(|k| {
                            let mut row = vec![ga[k]; n];
                            row[0] = -gb[k];
                            row
                        })
                        .collect())
                }
                DerivativeMode::CentralDifference { h } => {
                    let mut out = Vec::with_capacity(n);
                    for k in 0..n {
                        let mut xp = x.to_vec();
                        let mut xm = x.to_vec();
                        xp[k] += h;
                        xm[k] -= h;
                        if xp[k] == x[k] || xm[k] == x[k] {
                            return Err(Error::Numeric(format!(
                                "finite-difference step {h} underflows at coordinate {k} = {}",
                                x[k]
                            )));
                        }
                        let dp = self.diagonal(&xp)?;
                        let dm = self.diagonal(&xm)?;
                        out.push(dp.iter().zip(&dm).map(|(p, m)| (p - m) / (xp[k] - xm[k])).collect());
                    }
                    Ok(out)
                }
            },
        }
    }

    /// Metric matrix and its inverse at `x`.
    pub fn metric_eval(&self, x: &SpacetimePoint) -> Result<MetricEval> {
        let d = self.diagonal(x.coords())?;
        let g = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.clone()));
        let g_inv = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(d.len(), d.iter().map(|v| 1.0 / v)));
        Ok(MetricEval { g, g_inv })
    }

    /// `g(u, v)` at `x`.
    pub fn inner(&self, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        let d = self.diagonal(x)?;
        Ok(d.iter().zip(u).zip(v).map(|((g, a), b)| g * a * b).sum())
    }

    /// `g^{-1}(ξ, ζ)` at `x`.
    pub fn inner_dual(&self, x: &[f64], xi: &[f64], zeta: &[f64]) -> Result<f64> {
        let d = self.diagonal(x)?;
        Ok(d.iter().zip(xi).zip(zeta).map(|((g, a), b)| a * b / g).sum())
    }

    pub fn lower(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let d = self.diagonal(x)?;
        Ok(d.iter().zip(v).map(|(g, c)| g * c).collect())
    }

    pub fn raise(&self, x: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
        let d = self.diagonal(x)?;
        Ok(d.iter().zip(xi).map(|(g, c)| c / g).collect())
    }

    /// `η♭ᵢ = g_{ij} ηʲ`.
    pub fn flat(&self, v: &TangentVector) -> Result<Covector> {
        let c = self.lower(v.base().coords(), v.components())?;
        Ok(Covector::new(v.base().clone(), c))
    }

    /// `(ξ♯)ʲ = gⁱʲ ξᵢ`.
    pub fn sharp(&self, xi: &Covector) -> Result<TangentVector> {
        let c = self.raise(xi.base().coords(), xi.components())?;
        Ok(TangentVector::new(xi.base().clone(), c))
    }

    /// Christoffel symbols `Γⁱ_{jk}` stored at `[(i * dim + j) * dim + k]`.
    pub fn christoffel(&self, x: &SpacetimePoint) -> Result<Vec<f64>> {
        let n = self.dim();
        let d = self.diagonal(x.coords())?;
        let dd = self.diagonal_derivatives(x.coords())?;
        let mut gamma = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut s = 0.0;
                    if i == k {
                        s += dd[j][i];
                    }
                    if i == j {
                        s += dd[k][i];
                    }
                    if j == k {
                        s -= dd[i][j];
                    }
                    gamma[(i * n + j) * n + k] = 0.5 * s / d[i];
                }
            }
        }
        Ok(gamma)
    }

    /// Geodesic acceleration `−Γⁱ_{jk} vʲ vᵏ`.
    pub fn geodesic_acceleration(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let d = self.diagonal(x)?;
        if self.is_flat_chart() {
            return Ok(vec![0.0; d.len()]);
        }
        let dd = self.diagonal_derivatives(x)?;
        let n = d.len();
        let mut acc = vec![0.0; n];
        for i in 0..n {
            let mut dir = 0.0;
            for j in 0..n {
                dir += dd[j][i] * v[j];
            }
            let mut quad = 0.0;
            for j in 0..n {
                quad += dd[i][j] * v[j] * v[j];
            }
            acc[i] = -(2.0 * v[i] * dir - quad) / (2.0 * d[i]);
        }
        Ok(acc)
    }

    /// Hamiltonian vector field of `½ gⁱʲ ξᵢ ξⱼ`: returns `(ẋ, ξ̇)`.
    pub fn hamiltonian_field(&self, x: &[f64], xi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.diagonal(x)?;
        let xdot: Vec<f64> = d.iter().zip(xi).map(|(g, c)| c / g).collect();
        if self.is_flat_chart() {
            return Ok((xdot, vec![0.0; d.len()]));
        }
        let dd = self.diagonal_derivatives(x)?;
        // ∂ₖ gⁱⁱ = −∂ₖ gᵢᵢ / gᵢᵢ²
        let xidot = dd
            .iter()
            .map(|row| {
                -0.5 * row
                    .iter()
                    .zip(&d)
                    .zip(xi)
                    .map(|((dg, g), c)| -dg / (g * g) * c * c)
                    .sum::<f64>()
            })
            .collect();
        Ok((xdot, xidot))
    }

    /// Orthonormal frame `e₀, …, e_n` at `x` (components in the chart basis), `e₀` future timelike.
    ///
    /// Gram–Schmidt of the coordinate frame in the Lorentzian inner product.
    pub fn orthonormal_frame(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.dim();
        let mut frame: Vec<Vec<f64>> = Vec::with_capacity(n);
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            for f in &frame {
                let sign = self.inner(x, f, f)?;
                let proj = self.inner(x, &e, f)? / sign;
                for (ei, fi) in e.iter_mut().zip(f) {
                    *ei -= proj * fi;
                }
            }
            let norm2 = self.inner(x, &e, &e)?;
            let scale = 1.0 / norm2.abs().sqrt();
            e.iter_mut().for_each(|c| *c *= scale);
            frame.push(e);
        }
        if frame[0][0] < 0.0 {
            frame[0].iter_mut().for_each(|c| *c = -*c);
        }
        Ok(frame)
    }

    /// Sorted eigenvalues of `g(x)`; used to check the (−,+,…,+) signature.
    pub fn signature_ok(&self, x: &[f64]) -> Result<bool> {
        let d = self.diagonal(x)?;
        let eig = nalgebra::SymmetricEigen::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))).eigenvalues;
        let negative = eig.iter().filter(|e| **e < 0.0).count();
        let positive = eig.iter().filter(|e| **e > 0.0).count();
        Ok(negative == 1 && positive == self.dim() - 1)
    }
}

/// Wraps an angle difference into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(TAU);
    if r > std::f64::consts::PI {
        r -= TAU;
    }
    r
}
