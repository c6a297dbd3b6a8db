use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MetricField;

/// Hamiltonian drift allowed on unit-scale runs.
pub const TOL_HAM: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicharSample {
    pub s: f64,
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub xdot: Vec<f64>,
    pub xidot: Vec<f64>,
}

/// Integral curve `β(s) = (x(s), ξ(s))` of the Hamiltonian field of `½ gⁱʲ ξᵢ ξⱼ`.
///
/// Samples are stored by increasing `s`; positions are unwrapped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bicharacteristic {
    samples: Vec<BicharSample>,
    h: f64,
    truncated: bool,
}

/// `½ gⁱʲ ξᵢ ξⱼ`.
pub fn hamiltonian(metric: &MetricField, x: &[f64], xi: &[f64]) -> Result<f64> {
    Ok(0.5 * metric.inner_dual(x, xi, xi)?)
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(yi, xi)| yi + a * xi).collect()
}

fn field(metric: &MetricField, x: &[f64], xi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut xw = x.to_vec();
    metric.wrap(&mut xw);
    metric.hamiltonian_field(&xw, xi)
}

/// RK4 on `ẋⁱ = gⁱʲξⱼ`, `ξ̇ᵢ = −½ ∂ᵢgʲᵏ ξⱼξₖ` from `(x₀, ξ₀)` to the signed parameter `s_end`.
///
/// The step is shortened so the last sample lands on `s_end`. Leaving the chart
/// stops the integration and sets the truncation flag.
pub fn integrate_bicharacteristic(metric: &MetricField, x0: &[f64], xi0: &[f64], s_end: f64, h: f64) -> Result<Bicharacteristic> {
    let d = metric.dim();
    if x0.len() != d || xi0.len() != d {
        return Err(Error::Shape { expected: d, found: if x0.len() != d { x0.len() } else { xi0.len() } });
    }
    if !(h > 0.0 && h.is_finite()) || !s_end.is_finite() {
        return Err(Error::Invalid(format!("bicharacteristic needs a positive step and finite length, got h = {h}, s = {s_end}")));
    }
    let steps = (s_end.abs() / h).ceil().max(1.0) as usize;
    let k = s_end / steps as f64;
    let (xd, xid) = field(metric, x0, xi0)?;
    let mut samples = vec![BicharSample { s: 0.0, x: x0.to_vec(), xi: xi0.to_vec(), xdot: xd, xidot: xid }];
    let mut truncated = false;
    for j in 0..steps {
        let cur = samples.last().expect("nonempty");
        let (x, xi) = (&cur.x, &cur.xi);
        let (k1x, k1p) = (cur.xdot.clone(), cur.xidot.clone());
        let (k2x, k2p) = field(metric, &axpy(0.5 * k, &k1x, x), &axpy(0.5 * k, &k1p, xi))?;
        let (k3x, k3p) = field(metric, &axpy(0.5 * k, &k2x, x), &axpy(0.5 * k, &k2p, xi))?;
        let (k4x, k4p) = field(metric, &axpy(k, &k3x, x), &axpy(k, &k3p, xi))?;
        let comb = |a: &[f64], b: &[f64], c: &[f64], e: &[f64], base: &[f64]| -> Vec<f64> {
            (0..d).map(|i| base[i] + k / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + e[i])).collect()
        };
        let nx = comb(&k1x, &k2x, &k3x, &k4x, x);
        let np = comb(&k1p, &k2p, &k3p, &k4p, xi);
        let mut wrapped = nx.clone();
        metric.wrap(&mut wrapped);
        if !metric.in_domain(&wrapped) || nx.iter().chain(&np).any(|c| !c.is_finite()) {
            truncated = true;
            break;
        }
        let (xd, xid) = field(metric, &nx, &np)?;
        let s = if j + 1 == steps { s_end } else { (j + 1) as f64 * k };
        samples.push(BicharSample { s, x: nx, xi: np, xdot: xd, xidot: xid });
    }
    if s_end < 0.0 {
        samples.reverse();
    }
    Ok(Bicharacteristic { samples, h, truncated })
}

fn hermite(s0: f64, s1: f64, p0: &[f64], d0: &[f64], p1: &[f64], d1: &[f64], s: f64) -> Vec<f64> {
    let dt = s1 - s0;
    let u = (s - s0) / dt;
    let (u2, u3) = (u * u, u * u * u);
    let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    let h10 = u3 - 2.0 * u2 + u;
    let h01 = -2.0 * u3 + 3.0 * u2;
    let h11 = u3 - u2;
    (0..p0.len()).map(|i| h00 * p0[i] + h10 * dt * d0[i] + h01 * p1[i] + h11 * dt * d1[i]).collect()
}

impl Bicharacteristic {
    pub fn samples(&self) -> &[BicharSample] {
        &self.samples
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn s_range(&self) -> (f64, f64) {
        (self.samples[0].s, self.samples[self.samples.len() - 1].s)
    }

    pub fn contains(&self, s: f64) -> bool {
        let (lo, hi) = self.s_range();
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        s >= lo - slack && s <= hi + slack
    }

    /// `(x(s), ξ(s))` by cubic Hermite interpolation; `x` unwrapped.
    pub fn state_at(&self, s: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if !self.contains(s) {
            let (lo, hi) = self.s_range();
            return Err(Error::Domain(format!("parameter {s} outside bicharacteristic range [{lo}, {hi}]")));
        }
        let i = self.samples.partition_point(|p| p.s <= s).clamp(1, self.samples.len() - 1);
        let (a, b) = (&self.samples[i - 1], &self.samples[i]);
        if a.s == s {
            return Ok((a.x.clone(), a.xi.clone()));
        }
        Ok((
            hermite(a.s, b.s, &a.x, &a.xdot, &b.x, &b.xdot, s),
            hermite(a.s, b.s, &a.xi, &a.xidot, &b.xi, &b.xidot, s),
        ))
    }

    /// Sample at the far end of the integration (`s_end`).
    pub fn end(&self) -> &BicharSample {
        if self.samples[0].s < 0.0 {
            &self.samples[0]
        } else {
            &self.samples[self.samples.len() - 1]
        }
    }

    /// `max_s |H(β(s)) − H(β(0))|` over the samples.
    pub fn hamiltonian_drift(&self, metric: &MetricField) -> Result<f64> {
        let start = self.samples.iter().find(|p| p.s == 0.0).unwrap_or(&self.samples[0]);
        let mut x0 = start.x.clone();
        metric.wrap(&mut x0);
        let h0 = hamiltonian(metric, &x0, &start.xi)?;
        let mut worst: f64 = 0.0;
        for p in &self.samples {
            let mut x = p.x.clone();
            metric.wrap(&mut x);
            worst = worst.max((hamiltonian(metric, &x, &p.xi)? - h0).abs());
        }
        Ok(worst)
    }
}
