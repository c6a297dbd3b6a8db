use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::geodesic::{integrate_geodesic_to, GeodesicSegment};
use super::{wrap_angle, MetricField, MetricKind};

/// Pairs with `Δη − |Δx| ≤ CHRONOLOGY_TOL` count as not chronologically related.
pub const CHRONOLOGY_TOL: f64 = 1e-9;

/// Default bisection tolerance for cut times and observation times.
pub const DEFAULT_TOL_CUT: f64 = 1e-7;

const SIMPSON_INTERVALS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Future,
    Past,
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + k as f64 * h);
    }
    sum * h / 3.0
}

/// Lorentzian time separation `τ(x, y)`.
///
/// Closed form on Minkowski space and the cylinder (shortest angular
/// distance on the covering space). Warped products are supported when
/// `β` and the spatial scale depend on `t` only; the maximizing curve is
/// found from its conserved spatial momentum.
pub fn time_separation(metric: &MetricField, x: &[f64], y: &[f64]) -> Result<f64> {
    metric.diagonal(x)?;
    metric.diagonal(y)?;
    match &metric.kind {
        MetricKind::Minkowski { .. } | MetricKind::Cylinder => {
            let d = metric.coord_diff(y, x);
            let dt = d[0];
            let dist = d[1..].iter().map(|c| c * c).sum::<f64>().sqrt();
            if dt - dist <= CHRONOLOGY_TOL {
                Ok(0.0)
            } else {
                Ok(((dt - dist) * (dt + dist)).sqrt())
            }
        }
        MetricKind::WarpedProduct { lapse, spatial_scale, .. } => {
            let dim = metric.dim();
            if !lapse.depends_only_on_time(dim) || !spatial_scale.depends_only_on_time(dim) {
                return Err(Error::Capability(
                    "time separation needs a warped product whose coefficients depend on t only".into(),
                ));
            }
            let (t0, t1) = (x[0], y[0]);
            if t1 <= t0 {
                return Ok(0.0);
            }
            let dist = x[1..].iter().zip(&y[1..]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let at = |t: f64| {
                let mut p = x.to_vec();
                p[0] = t;
                (lapse.value(&p), spatial_scale.value(&p))
            };
            let eta = simpson(|t| { let (b, a) = at(t); (b / a).sqrt() }, t0, t1, SIMPSON_INTERVALS);
            if eta - dist <= CHRONOLOGY_TOL {
                return Ok(0.0);
            }
            let travel = |p: f64| {
                simpson(|t| { let (b, a) = at(t); p * b.sqrt() / (a * (a + p * p)).sqrt() }, t0, t1, SIMPSON_INTERVALS)
            };
            let length = |p: f64| simpson(|t| { let (b, a) = at(t); (b * a / (a + p * p)).sqrt() }, t0, t1, SIMPSON_INTERVALS);
            if dist == 0.0 {
                return Ok(length(0.0));
            }
            let mut hi = 1.0;
            while travel(hi) < dist {
                hi *= 2.0;
                if hi > 1e12 {
                    return Err(Error::Numeric("momentum search for the maximizing curve diverged".into()));
                }
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if travel(mid) < dist {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi.max(1.0) {
                    break;
                }
            }
            Ok(length(0.5 * (lo + hi)))
        }
    }
}

fn chronological(metric: &MetricField, from: &[f64], to: &[f64]) -> Result<bool> {
    Ok(time_separation(metric, from, to)? > 0.0)
}

/// The observation set `(0, T) × B(a₀, ρ)` (coordinate ball around the spatial origin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub t_max: f64,
    pub radius: f64,
}

impl ObservationSet {
    pub fn new(t_max: f64, radius: f64) -> Result<Self> {
        if !(t_max > 0.0 && radius > 0.0) {
            return Err(Error::Invalid("observation set needs T > 0 and ρ > 0".into()));
        }
        Ok(Self { t_max, radius })
    }

    /// Coordinate distance of the spatial part of `x` from the centre.
    pub fn spatial_distance(&self, metric: &MetricField, x: &[f64]) -> f64 {
        if metric.is_cylinder() {
            wrap_angle(x[1]).abs()
        } else {
            x[1..].iter().map(|c| c * c).sum::<f64>().sqrt()
        }
    }

    pub fn contains(&self, metric: &MetricField, x: &[f64]) -> bool {
        x[0] > 0.0 && x[0] < self.t_max && self.spatial_distance(metric, x) < self.radius
    }

    /// World lines at the centre, at `±0.99ρ` along each axis, and at `0.99ρ` towards `y`.
    pub fn sample_world_lines(&self, metric: &MetricField, y: &[f64]) -> Vec<WorldLine> {
        let n = metric.dim() - 1;
        let r = 0.99 * self.radius;
        let mut out = vec![WorldLine { a: vec![0.0; n] }];
        for k in 0..n {
            for sign in [1.0, -1.0] {
                let mut a = vec![0.0; n];
                a[k] = sign * r;
                out.push(WorldLine { a });
            }
        }
        let dist = self.spatial_distance(metric, y);
        if dist > 0.0 {
            let a = if metric.is_cylinder() {
                vec![wrap_angle(y[1]).signum() * r.min(dist)]
            } else {
                y[1..].iter().map(|c| c * r.min(dist) / dist).collect()
            };
            out.push(WorldLine { a });
        }
        out
    }

    /// Sampled membership test for the causal diamond `I⁺(𝛒) ∩ I⁻(𝛒)`.
    pub fn in_diamond(&self, metric: &MetricField, y: &[f64], tol: f64) -> Result<bool> {
        for line in self.sample_world_lines(metric, y) {
            let lo = earliest_obs_time(metric, &line, y, Direction::Past, self.t_max, tol)?;
            let hi = earliest_obs_time(metric, &line, y, Direction::Future, self.t_max, tol)?;
            if lo > 0.0 && hi < self.t_max {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// The world line `μ_a(s) = (s, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldLine {
    pub a: Vec<f64>,
}

impl WorldLine {
    pub fn at(&self, s: f64) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.a.len() + 1);
        p.push(s);
        p.extend_from_slice(&self.a);
        p
    }
}

/// Earliest (`Future`, `f_a⁺`) or latest (`Past`, `f_a⁻`) observation time of `y` on `μ_a`.
///
/// `f⁺ = inf{s : τ(y, μ_a(s)) > 0} ∪ {T}` and
/// `f⁻ = sup{s : τ(μ_a(s), y) > 0} ∪ {0}`, by bisection on `[0, T]`.
pub fn earliest_obs_time(
    metric: &MetricField,
    line: &WorldLine,
    y: &[f64],
    direction: Direction,
    t_max: f64,
    tol: f64,
) -> Result<f64> {
    let related = |s: f64| -> Result<bool> {
        let mu = line.at(s);
        match direction {
            Direction::Future => chronological(metric, y, &mu),
            Direction::Past => chronological(metric, &mu, y),
        }
    };
    match direction {
        Direction::Future => {
            if !related(t_max)? {
                return Ok(t_max);
            }
            if related(0.0)? {
                return Ok(0.0);
            }
            let (mut lo, mut hi) = (0.0, t_max);
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if related(mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(hi)
        }
        Direction::Past => {
            if !related(0.0)? {
                return Ok(0.0);
            }
            if related(t_max)? {
                return Ok(t_max);
            }
            let (mut lo, mut hi) = (0.0, t_max);
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if related(mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(lo)
        }
    }
}

/// Search parameters for [`null_cut_time`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutTimeOptions {
    /// Largest parameter searched; no sign change before it yields `∞`.
    pub s_max: f64,
    /// Scan step used to bracket the first sign change.
    pub scan_step: f64,
    pub tol_cut: f64,
    /// Geodesic step for curved charts.
    pub h: f64,
}

impl Default for CutTimeOptions {
    fn default() -> Self {
        Self { s_max: 12.0, scan_step: 0.05, tol_cut: DEFAULT_TOL_CUT, h: 1e-3 }
    }
}

/// Null cut time `sup{s : τ(x, γ_{x,v}(s)) = 0}`, or `∞` when none is found before `s_max`.
///
/// For past-pointing `v` the order of the arguments of `τ` is swapped.
pub fn null_cut_time(metric: &MetricField, x: &[f64], v: &[f64], opts: &CutTimeOptions) -> Result<f64> {
    let future = v[0] > 0.0;
    if v[0] == 0.0 {
        return Err(Error::Invalid("cut time needs a time-oriented direction".into()));
    }
    let closed_form = metric.is_flat_chart() && metric.domain.is_none();
    let segment: Option<GeodesicSegment> = if closed_form {
        None
    } else {
        Some(integrate_geodesic_to(metric, x, v, opts.s_max, opts.h)?)
    };
    let s_end = segment.as_ref().map_or(opts.s_max, |seg| seg.s_range().1);
    let point = |s: f64| -> Result<Vec<f64>> {
        match &segment {
            None => Ok(x.iter().zip(v).map(|(a, b)| a + s * b).collect()),
            Some(seg) => seg.state_at(s).map(|(p, _)| p),
        }
    };
    let related = |s: f64| -> Result<bool> {
        let p = point(s)?;
        if future {
            chronological(metric, x, &p)
        } else {
            chronological(metric, &p, x)
        }
    };
    let mut lo = 0.0;
    let mut hi = None;
    let mut s = opts.scan_step;
    while s <= s_end {
        if related(s)? {
            hi = Some(s);
            break;
        }
        lo = s;
        s += opts.scan_step;
    }
    let Some(mut hi) = hi else {
        return Ok(f64::INFINITY);
    };
    while hi - lo > opts.tol_cut {
        let mid = 0.5 * (lo + hi);
        if related(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
