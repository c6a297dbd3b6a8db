use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    connect_null, integrate_geodesic, null_cut_time, time_separation, CutTimeOptions, GeodesicSegment, MetricField,
    ObservationSet, ShootingOptions, CHRONOLOGY_TOL,
};
use crate::linalg::CVector;
use crate::transport::BrokenRayQuery;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionOptions {
    /// Fixed common parameter `s′`. When absent, the sources are placed just
    /// inside the observation set: `s′` is the first admissible scan point plus
    /// `source_margin`, capped at the middle of the admissible run.
    pub s_in: Option<f64>,
    pub source_margin: f64,
    /// Fixed outgoing parameter `s″`; searched when absent.
    pub s_out: Option<f64>,
    /// Largest parameter scanned for `s′` and `s″`.
    pub search_max: f64,
    pub scan_step: f64,
    pub h: f64,
    pub cut: CutTimeOptions,
}

impl Default for InteractionOptions {
    fn default() -> Self {
        Self { s_in: None, source_margin: 0.05, s_out: None, search_max: 6.0, scan_step: 5e-3, h: 1e-3, cut: CutTimeOptions::default() }
    }
}

/// The three-source configuration at `y`.
///
/// `w_legs[0] = v` is the unperturbed past direction, `w_legs[1..]` its
/// `±r` perturbations. The sources are `x_j = γ_{y,w_j}(s′)` and
/// `ξ_j = −γ̇_{y,w_j}(s′)`. Covectors at `y` are `η = w♭`, `η₁ = w₁♭` and
/// `η_k = −w_k♭` (`k = 2, 3`), which is the value at `y` of the
/// bicharacteristics through `(x₁, −ξ₁♭)` and `(x_k, ξ_k♭)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionGeometry {
    pub y: Vec<f64>,
    pub theta: f64,
    pub r: f64,
    pub s_in: f64,
    pub s_out: f64,
    /// Orthonormal frame `(e₀, f₁, f₂, …)` at `y` in which `v` and `w` take their normal form.
    pub frame: Vec<Vec<f64>>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub w_legs: [Vec<f64>; 3],
    pub x: [Vec<f64>; 3],
    pub xi: [Vec<f64>; 3],
    pub eta: Vec<f64>,
    pub eta_legs: [Vec<f64>; 3],
    pub kappa: [f64; 3],
    pub kappa_residual: f64,
    pub z: Vec<f64>,
    pub zeta: Vec<f64>,
}

fn combine(frame: &[Vec<f64>], comps: &[f64]) -> Vec<f64> {
    let d = frame[0].len();
    (0..d).map(|i| frame.iter().zip(comps).map(|(e, c)| c * e[i]).sum()).collect()
}

fn unit(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|c| *c /= n);
    }
    n
}

/// Whether `b ∈ J⁺(a)`.
pub fn causally_precedes(metric: &MetricField, a: &[f64], b: &[f64]) -> Result<bool> {
    if metric.is_flat_chart() {
        let d = metric.coord_diff(b, a);
        let dist = d[1..].iter().map(|c| c * c).sum::<f64>().sqrt();
        return Ok(d[0] >= dist - CHRONOLOGY_TOL);
    }
    if b[0] <= a[0] {
        return Ok(false);
    }
    if time_separation(metric, a, b)? > CHRONOLOGY_TOL {
        return Ok(true);
    }
    Ok(!connect_null(metric, a, b, &ShootingOptions::default())?.solutions.is_empty())
}

/// First and last scan points of the first run where `ok` holds.
fn first_run(step: f64, max: f64, mut ok: impl FnMut(f64) -> Result<bool>) -> Result<Option<(f64, f64)>> {
    let n = (max / step).floor() as usize;
    let mut start = None;
    let mut end = None;
    for i in 1..=n {
        let s = i as f64 * step;
        if ok(s)? {
            start.get_or_insert(s);
            end = Some(s);
        } else if start.is_some() {
            break;
        }
    }
    Ok(start.zip(end))
}

struct Leg {
    seg: GeodesicSegment,
    cut: f64,
}

impl Leg {
    fn new(metric: &MetricField, y: &[f64], v: &[f64], opts: &InteractionOptions) -> Result<Self> {
        let seg = integrate_geodesic(metric, y, v, opts.search_max, opts.h)?;
        let cut = null_cut_time(metric, y, v, &opts.cut)?;
        Ok(Self { seg, cut })
    }

    fn admissible(&self, metric: &MetricField, obs: &ObservationSet, s: f64, tol_cut: f64) -> Result<bool> {
        if !(s < self.cut - tol_cut) || !self.seg.contains(s) {
            return Ok(false);
        }
        Ok(obs.contains(metric, &self.seg.point_at(s)?))
    }
}

/// Builds the three-source geometry at `y` for opening angle `θ` and perturbation `r`.
///
/// The normal form is taken in an orthonormal frame at `y`, rotated so that
/// the bisector of the spatial parts of `−v` and `w` points from `y` towards the
/// centre of the observation ball.
pub fn build_interaction_geometry(
    metric: &MetricField,
    y: &[f64],
    theta: f64,
    r: f64,
    obs: &ObservationSet,
    opts: &InteractionOptions,
) -> Result<InteractionGeometry> {
    let d = metric.dim();
    if y.len() != d {
        return Err(Error::Shape { expected: d, found: y.len() });
    }
    let n = d - 1;
    if n < 2 {
        return Err(Error::Invalid("the interaction geometry needs at least two spatial dimensions".into()));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Invalid(format!("perturbation r must lie in (0, 1), got {r}")));
    }
    let half = 0.5 * theta;
    if !theta.is_finite() || half.sin().abs() < 1e-6 || theta.sin().abs() < 1e-6 {
        return Err(Error::DegenerateAngle(format!("θ = {theta}")));
    }
    if obs.contains(metric, y) {
        return Err(Error::Geometry("interaction point lies inside the observation set".into()));
    }

    let e = metric.orthonormal_frame(y)?;
    // Direction to the ball centre, in frame components.
    let mut centre = y.to_vec();
    centre[1..].iter_mut().for_each(|c| *c = 0.0);
    let to_centre = metric.coord_diff(&centre, y);
    let mut u: Vec<f64> = (1..d).map(|k| metric.inner(y, &to_centre, &e[k]).unwrap_or(0.0)).collect();
    if unit(&mut u) == 0.0 {
        return Err(Error::Geometry("no direction towards the observation set".into()));
    }
    let mut p = Vec::new();
    for k in 0..n {
        let mut cand = vec![0.0; n];
        cand[k] = 1.0;
        let dot: f64 = cand.iter().zip(&u).map(|(a, b)| a * b).sum();
        cand.iter_mut().zip(&u).for_each(|(c, uk)| *c -= dot * uk);
        if unit(&mut cand) > 0.5 {
            p = cand;
            break;
        }
    }
    let (sh, ch) = half.sin_cos();
    let f1: Vec<f64> = u.iter().zip(&p).map(|(a, b)| -sh * a + ch * b).collect();
    let f2: Vec<f64> = u.iter().zip(&p).map(|(a, b)| ch * a + sh * b).collect();

    let spatial = |c0: f64, a: f64, b: f64| -> Vec<f64> {
        let mut comps = vec![c0];
        comps.extend(f1.iter().zip(&f2).map(|(x1, x2)| a * x1 + b * x2));
        combine(&e, &comps)
    };
    let root = (1.0 - r * r).sqrt();
    let v = spatial(-1.0, -1.0, 0.0);
    let w = spatial(1.0, theta.cos(), theta.sin());
    let w_legs = [v.clone(), spatial(-1.0, -root, r), spatial(-1.0, -root, -r)];

    let legs: Vec<Leg> = w_legs.iter().map(|wj| Leg::new(metric, y, wj, opts)).collect::<Result<_>>()?;
    let tol_cut = opts.cut.tol_cut;
    let all_in = |s: f64| -> Result<bool> {
        for l in &legs {
            if !l.admissible(metric, obs, s, tol_cut)? {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let s_in = match opts.s_in {
        Some(s) if all_in(s)? => s,
        Some(s) => return Err(Error::Geometry(format!("configured s′ = {s} is not admissible for all three sources"))),
        None => first_run(opts.scan_step, opts.search_max, all_in)?
            .map(|(a, b)| (a + opts.source_margin).min(0.5 * (a + b)))
            .ok_or_else(|| Error::Geometry("no common s′ places all three sources in the observation set".into()))?,
    };
    let out = Leg::new(metric, y, &w, opts)?;
    let s_out = match opts.s_out {
        Some(s) if out.admissible(metric, obs, s, tol_cut)? => s,
        Some(s) => return Err(Error::Geometry(format!("configured s″ = {s} is not admissible"))),
        None => first_run(opts.scan_step, opts.search_max, |s| out.admissible(metric, obs, s, tol_cut))?
            .map(|(a, b)| 0.5 * (a + b))
            .ok_or_else(|| Error::Geometry("the outgoing geodesic never enters the observation set".into()))?,
    };

    let mut x: [Vec<f64>; 3] = Default::default();
    let mut xi: [Vec<f64>; 3] = Default::default();
    for (j, l) in legs.iter().enumerate() {
        let (_, vel) = l.seg.state_at(s_in)?;
        x[j] = l.seg.point_at(s_in)?;
        xi[j] = vel.iter().map(|c| -c).collect();
    }
    let (_, zdot) = out.seg.state_at(s_out)?;
    let z = out.seg.point_at(s_out)?;
    let zeta = metric.lower(&z, &zdot)?;

    let eta = metric.lower(y, &w)?;
    let flat = |v: &[f64], sign: f64| -> Result<Vec<f64>> { Ok(metric.lower(y, v)?.into_iter().map(|c| sign * c).collect()) };
    let eta_legs = [flat(&w_legs[0], 1.0)?, flat(&w_legs[1], -1.0)?, flat(&w_legs[2], -1.0)?];

    // Solve η = Σ kⱼ ηⱼ on the span (e₀, f₁, f₂).
    let basis = [e[0].clone(), spatial(0.0, 1.0, 0.0), spatial(0.0, 0.0, 1.0)];
    let pair = |cov: &[f64], vec: &[f64]| cov.iter().zip(vec).map(|(a, b)| a * b).sum::<f64>();
    let mat = nalgebra::Matrix3::from_fn(|a, j| pair(&eta_legs[j], &basis[a]));
    let rhs = nalgebra::Vector3::from_fn(|a, _| pair(&eta, &basis[a]));
    let k = mat.lu().solve(&rhs).ok_or_else(|| Error::DegenerateAngle(format!("singular covector system at θ = {theta}")))?;
    let kappa = [k[0] * r * r, k[1] * r * r, k[2] * r * r];
    let kappa_residual = (0..d)
        .map(|i| (eta[i] - (0..3).map(|j| k[j] * eta_legs[j][i]).sum::<f64>()).abs())
        .fold(0.0, f64::max);
    if kappa.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::DegenerateAngle(format!("non-positive κ {kappa:?} at θ = {theta}")));
    }

    for j in 0..3 {
        for l in 0..3 {
            if j != l && causally_precedes(metric, &x[l], &x[j])? {
                return Err(Error::Geometry(format!("sources {} and {} are causally related", l + 1, j + 1)));
            }
        }
    }

    let mut frame = vec![e[0].clone()];
    frame.push(spatial(0.0, 1.0, 0.0));
    frame.push(spatial(0.0, 0.0, 1.0));
    Ok(InteractionGeometry {
        y: y.to_vec(),
        theta,
        r,
        s_in,
        s_out,
        frame,
        v,
        w,
        w_legs,
        x,
        xi,
        eta,
        eta_legs,
        kappa,
        kappa_residual,
        z,
        zeta,
    })
}

impl InteractionGeometry {
    /// The broken ray `(y, v, w, s′, s″)` whose transform the measurement determines.
    pub fn query(&self) -> BrokenRayQuery {
        BrokenRayQuery { y: self.y.clone(), v: self.v.clone(), w: self.w.clone(), s_in: self.s_in, s_out: self.s_out }
    }

    /// `‖x_k − x₁‖` for `k = 2, 3`.
    pub fn source_spread(&self) -> [f64; 2] {
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        [dist(&self.x[1], &self.x[0]), dist(&self.x[2], &self.x[0])]
    }
}

/// The six ordered triples of `{0, 1, 2}` in lexicographic order.
pub const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// `scale · Σ_{τ ∈ S(3)} Re⟨σ_{τ(1)}, σ_{τ(2)}⟩ σ_{τ(3)}`.
pub fn interaction_symbol(sigma: [&CVector; 3], scale: f64) -> Result<CVector> {
    let n = sigma[0].len();
    if let Some(bad) = sigma.iter().find(|s| s.len() != n) {
        return Err(Error::Shape { expected: n, found: bad.len() });
    }
    let mut acc = CVector::zeros(n);
    for t in PERMUTATIONS {
        let re = sigma[t[1]].dotc(sigma[t[0]]).re;
        acc += sigma[t[2]] * Complex64::new(re, 0.0);
    }
    Ok(acc * Complex64::new(scale, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::null_residual;

    fn setup() -> (MetricField, ObservationSet) {
        (MetricField::minkowski(2), ObservationSet::new(3.0, 1.0).unwrap())
    }

    #[test]
    fn kappa_matches_closed_form() {
        let (m, obs) = setup();
        let theta = std::f64::consts::FRAC_PI_2;
        let r = 0.1;
        let g = build_interaction_geometry(&m, &[1.5, 1.1, 0.0], theta, r, &obs, &InteractionOptions::default()).unwrap();
        // In the frame: η = (−1, cosθ, sinθ), η₁ = (1, −1, 0), η₂,₃ = (−1, √(1−r²), ∓r).
        let c = (1.0 - r * r).sqrt();
        let sum = (1.0 - theta.cos()) / (1.0 - c);
        let k = [sum - 1.0, 0.5 * (sum - theta.sin() / r), 0.5 * (sum + theta.sin() / r)];
        for (j, (got, want)) in g.kappa.iter().zip(k).enumerate() {
            assert!((got - r * r * want).abs() < 1e-12 * want.max(1.0), "{j}: {got} vs {}", r * r * want);
        }
        assert!(g.kappa_residual <= 1e-12);
    }

    #[test]
    fn vectors_are_lightlike_and_sources_observed() {
        let (m, obs) = setup();
        let g = build_interaction_geometry(&m, &[1.8, -0.3, 1.2], 2.0, 0.05, &obs, &InteractionOptions::default()).unwrap();
        for v in g.w_legs.iter().chain([&g.w, &g.v]) {
            assert!(null_residual(&m, &g.y, v).unwrap() < 1e-12);
        }
        for x in &g.x {
            assert!(obs.contains(&m, x));
        }
        assert!(obs.contains(&m, &g.z));
        assert!(g.v[0] < 0.0 && g.w[0] > 0.0);
    }

    #[test]
    fn sources_converge_as_r_shrinks() {
        let (m, obs) = setup();
        let opts = InteractionOptions { s_in: Some(1.0), ..Default::default() };
        let spread: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&r| {
                let g = build_interaction_geometry(&m, &[1.5, 1.1, 0.0], 2.0, r, &obs, &opts).unwrap();
                let s = g.source_spread();
                s[0].max(s[1])
            })
            .collect();
        assert!(spread[0] > spread[1] && spread[1] > spread[2] && spread[2] > 0.0);
    }

    #[test]
    fn degenerate_angles_rejected() {
        let (m, obs) = setup();
        for theta in [0.0, std::f64::consts::PI, 2.0 * std::f64::consts::PI] {
            let e = build_interaction_geometry(&m, &[1.5, 1.1, 0.0], theta, 0.1, &obs, &InteractionOptions::default());
            assert!(matches!(e, Err(Error::DegenerateAngle(_))), "{theta}");
        }
    }

    #[test]
    fn interaction_symbol_identities() {
        let c = CVector::from_vec(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]);
        let out = interaction_symbol([&c, &c, &c], 1.0).unwrap();
        assert!((out - &c * Complex64::new(6.0, 0.0)).norm() < 1e-15);
        let zero = CVector::zeros(2);
        assert_eq!(interaction_symbol([&zero, &zero, &zero], 1.0).unwrap(), zero);
        // Every term contains σ₃, either in the pairing or as the vector.
        let a = CVector::from_vec(vec![Complex64::new(1.0, 0.5), Complex64::new(0.0, 0.3)]);
        let out = interaction_symbol([&a, &c, &zero], 2.0).unwrap();
        assert_eq!(out, zero);
    }
}
