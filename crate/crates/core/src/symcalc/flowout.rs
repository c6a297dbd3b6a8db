use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::interaction::InteractionGeometry;
use crate::error::{Error, Result};
use crate::geometry::{integrate_geodesic, MetricField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowoutOptions {
    /// Radius of the ball around `y` excluded from the distance.
    pub exclusion: f64,
    /// Spacing of the polylines compared.
    pub spacing: f64,
    pub h: f64,
}

impl Default for FlowoutOptions {
    fn default() -> Self {
        Self { exclusion: 0.05, spacing: 1e-2, h: 1e-3 }
    }
}

type Point = Vec<f64>;

fn sub(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(p, q)| p - q).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Euclidean distance between the chart segments `[p0, p1]` and `[q0, q1]`.
pub fn segment_distance(p0: &[f64], p1: &[f64], q0: &[f64], q1: &[f64]) -> f64 {
    let d1 = sub(p1, p0);
    let d2 = sub(q1, q0);
    let r = sub(p0, q0);
    let a = dot(&d1, &d1);
    let e = dot(&d2, &d2);
    let f = dot(&d2, &r);
    let (s, t);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        return dot(&r, &r).sqrt();
    }
    if a <= f64::EPSILON {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(&d1, &r);
        if e <= f64::EPSILON {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(&d1, &d2);
            let denom = a * e - b * b;
            let s0 = if denom > 0.0 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            } else {
                t = t0;
                s = s0;
            }
        }
    }
    let gap: Point = (0..p0.len()).map(|i| p0[i] + s * d1[i] - q0[i] - t * d2[i]).collect();
    dot(&gap, &gap).sqrt()
}

/// The parts of `[p0, p1]` at distance at least `radius` from `c`.
fn outside_ball(p0: &[f64], p1: &[f64], c: &[f64], radius: f64) -> Vec<(Point, Point)> {
    let d = sub(p1, p0);
    let f = sub(p0, c);
    let a = dot(&d, &d);
    let b = dot(&f, &d);
    let disc = b * b - a * (dot(&f, &f) - radius * radius);
    if radius <= 0.0 || a == 0.0 || disc <= 0.0 {
        return vec![(p0.to_vec(), p1.to_vec())];
    }
    let root = disc.sqrt();
    let (t0, t1) = ((-b - root) / a, (-b + root) / a);
    let at = |t: f64| -> Point { p0.iter().zip(&d).map(|(p, q)| p + t * q).collect() };
    let mut parts = Vec::new();
    if t0 > 0.0 {
        parts.push((p0.to_vec(), at(t0.min(1.0))));
    }
    if t1 < 1.0 {
        parts.push((at(t1.max(0.0)), p1.to_vec()));
    }
    parts
}

fn polyline(metric: &MetricField, x: &[f64], v: &[f64], length: f64, opts: &FlowoutOptions) -> Result<Vec<Point>> {
    let seg = integrate_geodesic(metric, x, v, length, opts.h)?;
    let (_, end) = seg.s_range();
    let n = (end / opts.spacing).ceil().max(1.0) as usize;
    (0..=n).map(|i| Ok(seg.state_at(end * i as f64 / n as f64)?.0)).collect()
}

/// Null directions at `x` making angle `α` with `ξ` in the spatial part of an orthonormal frame.
fn cone_direction(metric: &MetricField, x: &[f64], xi: &[f64], alpha: f64, azimuth: usize) -> Result<Vec<f64>> {
    let e = metric.orthonormal_frame(x)?;
    let d = metric.dim();
    let comps: Vec<f64> = (0..d).map(|k| metric.inner(x, xi, &e[k]).map(|c| c * if k == 0 { -1.0 } else { 1.0 })).collect::<Result<_>>()?;
    let t = comps[0];
    let mut a: Vec<f64> = comps[1..].to_vec();
    let len = dot(&a, &a).sqrt();
    a.iter_mut().for_each(|c| *c /= len);
    // Perpendicular directions to `a`, cycled by `azimuth`.
    let n = d - 1;
    let mut perps: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        let mut p = vec![0.0; n];
        p[k] = 1.0;
        for q in perps.iter().chain(std::iter::once(&a)) {
            let c = dot(&p, q);
            p.iter_mut().zip(q).for_each(|(pi, qi)| *pi -= c * qi);
        }
        let l = dot(&p, &p).sqrt();
        if l > 1e-8 {
            p.iter_mut().for_each(|c| *c /= l);
            perps.push(p);
        }
    }
    let perp = &perps[(azimuth / 2) % perps.len()];
    let sign = if azimuth.is_multiple_of(2) { 1.0 } else { -1.0 };
    let (s, c) = alpha.sin_cos();
    let mut out = vec![t];
    out.extend(a.iter().zip(perp).map(|(ai, pi)| len * (c * ai + sign * s * pi)));
    let mut v = vec![0.0; d];
    for (k, ek) in e.iter().enumerate() {
        v.iter_mut().zip(ek).for_each(|(vi, ei)| *vi += out[k] * ei);
    }
    Ok(v)
}

/// Smallest chart distance between null geodesics leaving the sources inside the cone
/// of opening `s₀` and the outgoing segment `γ_{y,w}([0, s″])`, away from a ball around `y`.
///
/// Directions make angles `s₀·i/(m−1)` with `ξⱼ`, `i = 0, …, m−1`, with alternating
/// perpendicular offsets; `n_samples` counts directions per source.
pub fn flowout_disjointness(
    metric: &MetricField,
    geom: &InteractionGeometry,
    s0: f64,
    n_samples: usize,
    opts: &FlowoutOptions,
) -> Result<f64> {
    if !(s0 >= 0.0) || n_samples < 2 {
        return Err(Error::Invalid(format!("flowout needs s₀ ≥ 0 and at least two samples, got {s0}, {n_samples}")));
    }
    let out = polyline(metric, &geom.y, &geom.w, geom.s_out, opts)?;
    let length = geom.s_in + geom.s_out;
    let y = &geom.y;
    let tasks: Vec<(usize, usize)> = (0..3).flat_map(|j| (0..n_samples).map(move |i| (j, i))).collect();
    let dists: Vec<f64> = tasks
        .par_iter()
        .map(|&(j, i)| -> Result<f64> {
            let alpha = s0 * i as f64 / (n_samples - 1) as f64;
            let v = cone_direction(metric, &geom.x[j], &geom.xi[j], alpha, i)?;
            let traj = polyline(metric, &geom.x[j], &v, length, opts)?;
            let mut best = f64::INFINITY;
            for p in traj.windows(2) {
                for (a, b) in outside_ball(&p[0], &p[1], y, opts.exclusion) {
                    for q in out.windows(2) {
                        best = best.min(segment_distance(&a, &b, &q[0], &q[1]));
                    }
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    Ok(dists.into_iter().fold(f64::INFINITY, f64::min))
}
