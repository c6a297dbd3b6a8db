use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::MetricField;

/// Default bound on `|g(γ̇, γ̇)| / ‖γ̇‖²` for lightlike data.
pub const TOL_NULL: f64 = 1e-9;

/// One stored integration node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSample {
    pub s: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// Geodesic acceleration at the node, kept for quintic interpolation.
    pub a: Vec<f64>,
}

/// A geodesic integrated with classical RK4 at fixed step.
///
/// Samples are stored with ascending `s` regardless of the direction of
/// integration. Cylinder angles are stored unwrapped so that the
/// interpolant stays continuous; [`GeodesicSegment::point_at`] wraps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSegment {
    samples: Vec<GeodesicSample>,
    h: f64,
    initial: (Vec<f64>, Vec<f64>),
    truncated: bool,
    wrap_angle: bool,
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| yi + a * xi).collect()
}

fn rk4_step(metric: &MetricField, x: &[f64], v: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let a1 = metric.geodesic_acceleration(x, v)?;
    let k1x = v.to_vec();
    let x2 = axpy(0.5 * h, &k1x, x);
    let v2 = axpy(0.5 * h, &a1, v);
    let a2 = metric.geodesic_acceleration(&x2, &v2)?;
    let x3 = axpy(0.5 * h, &v2, x);
    let v3 = axpy(0.5 * h, &a2, v);
    let a3 = metric.geodesic_acceleration(&x3, &v3)?;
    let x4 = axpy(h, &v3, x);
    let v4 = axpy(h, &a3, v);
    let a4 = metric.geodesic_acceleration(&x4, &v4)?;
    let n = x.len();
    let mut xn = vec![0.0; n];
    let mut vn = vec![0.0; n];
    for i in 0..n {
        xn[i] = x[i] + h / 6.0 * (k1x[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]);
        vn[i] = v[i] + h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
    }
    Ok((xn, vn))
}

/// Integrates `γ_{x₀,v₀}` on `[0, s_max]`.
pub fn integrate_geodesic(metric: &MetricField, x0: &[f64], v0: &[f64], s_max: f64, h: f64) -> Result<GeodesicSegment> {
    if !(s_max > 0.0) {
        return Err(Error::Invalid(format!("s_max must be positive, got {s_max}")));
    }
    integrate_geodesic_to(metric, x0, v0, s_max, h)
}

/// Integrates `γ_{x₀,v₀}` from `0` to `s_end`, which may be negative.
///
/// The step is shrunk so that an integer number of steps lands exactly on
/// `s_end`. Leaving the chart ends the segment with the truncation flag set.
pub fn integrate_geodesic_to(metric: &MetricField, x0: &[f64], v0: &[f64], s_end: f64, h: f64) -> Result<GeodesicSegment> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Invalid(format!("step must be positive, got {h}")));
    }
    if !s_end.is_finite() {
        return Err(Error::Invalid("geodesic end parameter must be finite".into()));
    }
    if v0.len() != metric.dim() {
        return Err(Error::Shape { expected: metric.dim(), found: v0.len() });
    }
    if v0.iter().all(|c| *c == 0.0) {
        return Err(Error::Invalid("initial velocity must be nonzero".into()));
    }
    metric.diagonal(x0)?;

    let steps = ((s_end.abs() / h).ceil() as usize).max(1);
    let step = s_end / steps as f64;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    let a = metric.geodesic_acceleration(&x, &v)?;
    samples.push(GeodesicSample { s: 0.0, x: x.clone(), v: v.clone(), a });
    let mut truncated = false;
    for k in 1..=steps {
        let next = rk4_step(metric, &x, &v, step).and_then(|(xn, vn)| {
            let an = metric.geodesic_acceleration(&xn, &vn)?;
            Ok((xn, vn, an))
        });
        match next {
            Ok((xn, vn, an)) if xn.iter().chain(&vn).all(|c| c.is_finite()) => {
                x = xn;
                v = vn;
                let s = if k == steps { s_end } else { k as f64 * step };
                samples.push(GeodesicSample { s, x: x.clone(), v: v.clone(), a: an });
            }
            Ok(_) | Err(Error::Domain(_)) => {
                truncated = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if step < 0.0 {
        samples.reverse();
    }
    Ok(GeodesicSegment {
        samples,
        h: step.abs(),
        initial: (x0.to_vec(), v0.to_vec()),
        truncated,
        wrap_angle: metric.is_cylinder(),
    })
}

/// Position and velocity of `γ_{x,v}(s)`; straight lines on flat charts, RK4 otherwise.
///
/// Returns a domain error if the geodesic leaves the chart before `s`.
pub fn geodesic_endpoint(metric: &MetricField, x: &[f64], v: &[f64], s: f64, h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if metric.is_flat_chart() && metric.domain.is_none() {
        let mut end = axpy(s, v, x);
        metric.wrap(&mut end);
        return Ok((end, v.to_vec()));
    }
    let seg = integrate_geodesic_to(metric, x, v, s, h)?;
    if seg.truncated {
        return Err(Error::Domain(format!("geodesic leaves the chart before s = {s}")));
    }
    let (mut p, w) = seg.state_at(s)?;
    metric.wrap(&mut p);
    Ok((p, w))
}

impl GeodesicSegment {
    pub fn samples(&self) -> &[GeodesicSample] {
        &self.samples
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn initial(&self) -> (&[f64], &[f64]) {
        (&self.initial.0, &self.initial.1)
    }

    /// True when the chart was left before the requested end parameter.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    /// Parameter range `[s_lo, s_hi]` covered by the samples.
    pub fn s_range(&self) -> (f64, f64) {
        (self.samples[0].s, self.samples[self.samples.len() - 1].s)
    }

    pub fn contains(&self, s: f64) -> bool {
        let (lo, hi) = self.s_range();
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        s >= lo - slack && s <= hi + slack
    }

    /// Interpolated `(x, v)` at `s` (quintic Hermite from positions, velocities and accelerations).
    ///
    /// Coordinates are unwrapped.
    pub fn state_at(&self, s: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if !self.contains(s) {
            let (lo, hi) = self.s_range();
            return Err(Error::Domain(format!("parameter {s} outside segment range [{lo}, {hi}]")));
        }
        if self.samples.len() == 1 {
            let p = &self.samples[0];
            return Ok((p.x.clone(), p.v.clone()));
        }
        let idx = match self.samples.binary_search_by(|p| p.s.partial_cmp(&s).unwrap()) {
            Ok(i) => return Ok((self.samples[i].x.clone(), self.samples[i].v.clone())),
            Err(i) => i.clamp(1, self.samples.len() - 1),
        };
        let p0 = &self.samples[idx - 1];
        let p1 = &self.samples[idx];
        let dt = p1.s - p0.s;
        let t = ((s - p0.s) / dt).clamp(0.0, 1.0);
        let (t2, t3, t4, t5) = (t * t, t * t * t, t.powi(4), t.powi(5));
        // Quintic Hermite basis and derivatives.
        let h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h10 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h20 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
        let h01 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let h11 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h21 = 0.5 * t3 - t4 + 0.5 * t5;
        let d00 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
        let d10 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
        let d20 = t - 4.5 * t2 + 6.0 * t3 - 2.5 * t4;
        let d01 = -d00;
        let d11 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
        let d21 = 1.5 * t2 - 4.0 * t3 + 2.5 * t4;
        let n = p0.x.len();
        let mut x = vec![0.0; n];
        let mut v = vec![0.0; n];
        for i in 0..n {
            x[i] = h00 * p0.x[i]
                + h10 * dt * p0.v[i]
                + h20 * dt * dt * p0.a[i]
                + h01 * p1.x[i]
                + h11 * dt * p1.v[i]
                + h21 * dt * dt * p1.a[i];
            v[i] = (d00 * p0.x[i] + d01 * p1.x[i]) / dt
                + d10 * p0.v[i]
                + d11 * p1.v[i]
                + d20 * dt * p0.a[i]
                + d21 * dt * p1.a[i];
        }
        Ok((x, v))
    }

    /// Interpolated point with the cylinder angle wrapped into `[0, 2π)`.
    pub fn point_at(&self, s: f64) -> Result<Vec<f64>> {
        let (mut x, _) = self.state_at(s)?;
        if self.wrap_angle {
            x[1] = x[1].rem_euclid(std::f64::consts::TAU);
        }
        Ok(x)
    }

    /// Last sample, `(s, x, v)`.
    pub fn end(&self) -> &GeodesicSample {
        &self.samples[self.samples.len() - 1]
    }

    /// `max_s |g(γ̇, γ̇)| / ‖γ̇‖²` over the stored samples.
    pub fn max_null_residual(&self, metric: &MetricField) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for p in &self.samples {
            worst = worst.max(super::null_residual(metric, &p.x, &p.v)?);
        }
        Ok(worst)
    }
}
