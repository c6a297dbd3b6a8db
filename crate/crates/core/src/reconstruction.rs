//! Recovering the gauge `φ` relating two connections with equal broken light-ray transforms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Admissibility, Error, Result};
use crate::gauge::{gauge_act, Connection, GaugeMap, SampledGauge};
use crate::geometry::{
    earliest_obs_time, null_residual, shoot_null, Direction, GeodesicSegment, MetricKind, ShootingOptions, WorldLine,
};
use crate::linalg::{distance, identity, unitarity_residual, CMatrix, UnitaryMatrix};
use crate::transport::{parallel_transport, BrokenRayContext, BrokenRayQuery};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Synthetic,
    SymbolPipeline,
    ExternalFile,
}

/// Source of broken light-ray transforms.
pub trait TransformOracle: Send + Sync {
    fn provenance(&self) -> Provenance;

    fn broken(&self, q: &BrokenRayQuery) -> Result<UnitaryMatrix>;

    /// `P_{γ_{y,w}([0,s″])}` along an integrated outgoing leg, when the oracle can split legs.
    fn outgoing(&self, _leg: &GeodesicSegment, _s_out: f64) -> Option<Result<UnitaryMatrix>> {
        None
    }

    /// `(P_in, P_out)` of a query, when the oracle can split legs.
    fn legs(&self, _q: &BrokenRayQuery) -> Option<Result<(UnitaryMatrix, UnitaryMatrix)>> {
        None
    }

    /// The underlying connection, when known (used only for verification).
    fn connection(&self) -> Option<&dyn Connection> {
        None
    }
}

/// Oracle computing transforms directly from a known connection.
pub struct SyntheticOracle<'a, C> {
    pub ctx: &'a BrokenRayContext,
    pub connection: C,
}

impl<'a, C: Connection> SyntheticOracle<'a, C> {
    pub fn new(ctx: &'a BrokenRayContext, connection: C) -> Self {
        Self { ctx, connection }
    }
}

impl<C: Connection> TransformOracle for SyntheticOracle<'_, C> {
    fn provenance(&self) -> Provenance {
        Provenance::Synthetic
    }

    fn broken(&self, q: &BrokenRayQuery) -> Result<UnitaryMatrix> {
        self.ctx.broken_transform(&self.connection, q)
    }

    fn outgoing(&self, leg: &GeodesicSegment, s_out: f64) -> Option<Result<UnitaryMatrix>> {
        Some(parallel_transport(&self.ctx.metric, &self.connection, leg, 0.0, s_out))
    }

    fn legs(&self, q: &BrokenRayQuery) -> Option<Result<(UnitaryMatrix, UnitaryMatrix)>> {
        Some(self.ctx.leg_transports(&self.connection, q))
    }

    fn connection(&self) -> Option<&dyn Connection> {
        Some(&self.connection)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMode {
    /// Per-leg transports `(P^B_out)⁻¹ P^A_out`.
    Synthetic,
    /// From `S^B(q)⁻¹ S^A(q)` with the incoming leg inside the observation set.
    Honest,
}

/// An outgoing leg `(w, s″)` from `y` ending on the world line `μ_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutgoingLeg {
    pub b: Vec<f64>,
    pub w: Vec<f64>,
    pub s_out: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionOptions {
    /// Admissible directions tried per grid point.
    pub directions: usize,
    /// Central-difference step for `dφ̂`.
    pub h_fd: f64,
    /// Endpoints must satisfy `t < T − margin` and `|x′| < ρ − margin`.
    pub margin: f64,
    pub bisection_tol: f64,
    pub shooting: ShootingOptions,
    #[serde(default)]
    pub thresholds: Thresholds,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        Self {
            directions: 8,
            h_fd: 1e-3,
            margin: 1e-3,
            bisection_tol: 1e-12,
            shooting: ShootingOptions::default(),
            thresholds: Thresholds::default(),
        }
    }
}

/// Pass thresholds for the residuals recorded in a [`GaugeReconstruction`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub spread: f64,
    pub ode: f64,
    pub theorem: f64,
    pub boundary: f64,
    pub unitarity: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { spread: 1e-6, ode: 1e-5, theorem: 1e-5, boundary: 1e-9, unitarity: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<")]
    Below,
    #[serde(rename = ">")]
    Above,
}

/// One named value against its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, relation: Relation, threshold: f64) -> Self {
        let pass = match relation {
            Relation::AtMost => value <= threshold,
            Relation::AtLeast => value >= threshold,
            Relation::Below => value < threshold,
            Relation::Above => value > threshold,
        };
        Self { name: name.to_string(), value, relation, threshold, pass }
    }

    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value, Relation::AtMost, threshold)
    }
}

/// Candidate world-line offsets `b`, in a fixed order (the tie-breaking order).
fn candidate_offsets(ctx: &BrokenRayContext, y: &[f64]) -> Vec<Vec<f64>> {
    let n = ctx.metric.dim() - 1;
    let rho = ctx.observation.radius;
    let dist = ctx.observation.spatial_distance(&ctx.metric, y);
    let mut axis = vec![0.0; n];
    if dist > 0.0 && !ctx.metric.is_cylinder() {
        axis.iter_mut().zip(&y[1..]).for_each(|(a, c)| *a = c / dist);
    } else if ctx.metric.is_cylinder() {
        axis[0] = if crate::geometry::wrap_angle(y[1]) >= 0.0 { 1.0 } else { -1.0 };
    } else {
        axis[0] = 1.0;
    }
    let coarse = [0.99, 0.9, 0.6, 0.3].map(|r| (r, vec![0.0f64, 0.4, -0.4, 0.8, -0.8, 1.2, -1.2, 1.6, -1.6]));
    // Near the rim of the diamond only a thin sliver of the ball is reachable.
    let fine: Vec<f64> = std::iter::once(0.0).chain((1..=40).flat_map(|k| [0.02 * k as f64, -0.02 * k as f64])).collect();
    let rim = [0.997, 0.993, 0.985, 0.97, 0.95].map(|r| (r, fine.clone()));
    let mut out = Vec::new();
    for (radius, angles) in coarse.into_iter().chain(rim) {
        for angle in angles {
            if n == 1 {
                if angle == 0.0 {
                    out.push(vec![axis[0] * radius * rho]);
                }
                continue;
            }
            // Rotate `axis` by `angle` in the plane of the first two spatial directions.
            let perp = {
                let mut p = vec![0.0; n];
                p[0] = -axis[1];
                p[1] = axis[0];
                p
            };
            let b: Vec<f64> = axis
                .iter()
                .zip(&perp)
                .map(|(a, p)| radius * rho * (angle.cos() * a + angle.sin() * p))
                .collect();
            out.push(b);
        }
    }
    out.push(vec![0.0; n]);
    out
}

impl BrokenRayContext {
    /// Integrates `γ_{y,w}` on `[0, s″]` after the outgoing admissibility checks.
    pub fn outgoing_leg(&self, y: &[f64], w: &[f64], s_out: f64) -> Result<GeodesicSegment> {
        let m = &self.metric;
        let r = null_residual(m, y, w)?;
        if r > self.tol_null {
            return Err(Error::Admissibility(Admissibility::NotLightlike { leg: "outgoing", residual: r }));
        }
        if !(w[0] > 0.0) {
            return Err(Error::Admissibility(Admissibility::WrongOrientation { leg: "outgoing" }));
        }
        if !(s_out > 0.0) {
            return Err(Error::Admissibility(Admissibility::NonPositiveParameter { leg: "outgoing" }));
        }
        let cut = self.cache.cut_time(m, y, w, &self.cut)?;
        if !(s_out < cut - self.cut.tol_cut) {
            return Err(Error::Admissibility(Admissibility::PastCutTime { leg: "outgoing", parameter: s_out, cut_time: cut }));
        }
        let seg = crate::geometry::integrate_geodesic_to(m, y, w, s_out, self.h)?;
        if seg.truncated() {
            return Err(Error::Admissibility(Admissibility::Truncated { leg: "outgoing" }));
        }
        if !self.observation.contains(m, &seg.point_at(s_out)?) {
            return Err(Error::Admissibility(Admissibility::EndpointOutsideObservationSet { leg: "outgoing" }));
        }
        Ok(seg)
    }

    /// The null leg from `y` to `μ_b(f_b⁺(y))`, if that point lies well inside the observation set.
    pub fn leg_to_world_line(&self, y: &[f64], b: &[f64], opts: &ReconstructionOptions) -> Result<Option<OutgoingLeg>> {
        let m = &self.metric;
        let obs = &self.observation;
        let line = WorldLine { a: b.to_vec() };
        if obs.spatial_distance(m, &line.at(0.0)) >= obs.radius - opts.margin {
            return Ok(None);
        }
        if let MetricKind::Minkowski { .. } = m.kind {
            if m.domain.is_none() {
                let d: Vec<f64> = b.iter().zip(&y[1..]).map(|(p, q)| p - q).collect();
                let len = d.iter().map(|c| c * c).sum::<f64>().sqrt();
                if len == 0.0 || y[0] + len >= obs.t_max - opts.margin || y[0] + len <= opts.margin {
                    return Ok(None);
                }
                let mut w = vec![len];
                w.extend(d);
                return Ok(Some(OutgoingLeg { b: b.to_vec(), w, s_out: 1.0 }));
            }
        }
        let t = earliest_obs_time(m, &line, y, Direction::Future, obs.t_max, opts.bisection_tol)?;
        if t >= obs.t_max - opts.margin || t <= y[0] {
            return Ok(None);
        }
        let z = line.at(t);
        let guess = m.coord_diff(&z, y);
        let spatial: Vec<f64> = guess[1..].to_vec();
        if spatial.iter().all(|c| *c == 0.0) {
            return Ok(None);
        }
        let frame = m.orthonormal_frame(y)?;
        // Express the coordinate guess in the orthonormal frame.
        let d = m.diagonal(y)?;
        let frame_guess: Vec<f64> = (1..m.dim()).map(|k| m.inner(y, &guess, &frame[k]).unwrap_or(0.0) / d[k].signum()).collect();
        let Some(sol) = shoot_null(m, y, &z, &frame_guess, guess[0], &opts.shooting)? else {
            return Ok(None);
        };
        Ok(Some(OutgoingLeg { b: b.to_vec(), w: sol.v, s_out: sol.s }))
    }

    /// Admissible outgoing legs from `y` in tie-breaking order, at most `k`.
    pub fn outgoing_legs(&self, y: &[f64], k: usize, opts: &ReconstructionOptions) -> Result<Vec<OutgoingLeg>> {
        let mut out = Vec::new();
        for b in candidate_offsets(self, y) {
            if out.len() >= k {
                break;
            }
            if let Some(leg) = self.leg_to_world_line(y, &b, opts)? {
                if self.outgoing_leg(y, &leg.w, leg.s_out).is_ok() {
                    out.push(leg);
                }
            }
        }
        Ok(out)
    }
}

/// `φ(y; w, s″) = (P^B_{γ_{y,w}([0,s″])})⁻¹ P^A_{γ_{y,w}([0,s″])}`.
pub fn gauge_candidate(
    ctx: &BrokenRayContext,
    a: &dyn TransformOracle,
    b: &dyn TransformOracle,
    y: &[f64],
    w: &[f64],
    s_out: f64,
) -> Result<UnitaryMatrix> {
    let leg = ctx.outgoing_leg(y, w, s_out)?;
    let no_legs = || Error::Capability("oracle cannot split broken transforms into legs".into());
    let pa = a.outgoing(&leg, s_out).ok_or_else(no_legs)??;
    let pb = b.outgoing(&leg, s_out).ok_or_else(no_legs)??;
    Ok(pb.inverse().compose(&pa))
}

/// `φ(y) = P_in S^B(q)⁻¹ S^A(q) P_in⁻¹`, valid when the incoming leg of `q`
/// lies where the two connections are known to agree.
pub fn honest_candidate(
    ctx: &BrokenRayContext,
    a: &dyn TransformOracle,
    b: &dyn TransformOracle,
    q: &BrokenRayQuery,
) -> Result<UnitaryMatrix> {
    let legs = ctx.legs(q)?;
    let inside = legs
        .incoming
        .samples()
        .iter()
        .all(|p| {
            let mut x = p.x.clone();
            ctx.metric.wrap(&mut x);
            ctx.observation.contains(&ctx.metric, &x)
        });
    if !inside {
        return Err(Error::Capability("incoming leg leaves the observation set".into()));
    }
    let p_in = b
        .legs(q)
        .ok_or_else(|| Error::Capability("incoming transport on the observation set is unavailable".into()))??
        .0;
    let sa = a.broken(q)?;
    let sb = b.broken(q)?;
    Ok(p_in.compose(&sb.inverse()).compose(&sa).compose(&p_in.inverse()))
}

/// A query at `y ∈ 𝛒` whose incoming leg stays inside the observation set.
fn honest_query(ctx: &BrokenRayContext, y: &[f64], leg: &OutgoingLeg) -> Option<BrokenRayQuery> {
    let m = &ctx.metric;
    if !m.is_flat_chart() || !ctx.observation.contains(m, y) {
        return None;
    }
    let n = m.dim() - 1;
    let room = ctx.observation.radius - ctx.observation.spatial_distance(m, y);
    let s_in = 0.5 * y[0].min(room);
    for k in 0..n {
        for sign in [1.0, -1.0] {
            let mut v = vec![0.0; n + 1];
            v[0] = -1.0;
            v[k + 1] = sign;
            let q = BrokenRayQuery { y: y.to_vec(), v, w: leg.w.clone(), s_in, s_out: leg.s_out };
            if ctx.legs(&q).is_ok() {
                return Some(q);
            }
        }
    }
    None
}

/// Per-point outcome of [`reconstruct_gauge`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugePoint {
    pub y: Vec<f64>,
    pub resolved: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ExtractionMode>,
    /// Row-major `[re, im]` entries of `φ̂(y)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<Vec<[f64; 2]>>,
    pub unitarity: f64,
    /// `max_j ‖φ(y; w_j, s_j″) − φ(y; w_0, s_0″)‖`.
    pub spread: f64,
    pub directions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ode_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_error: Option<f64>,
    #[serde(skip)]
    pub legs: Vec<OutgoingLeg>,
}

impl GaugePoint {
    pub fn matrix(&self) -> Option<CMatrix> {
        let n = (self.value.as_ref()?.len() as f64).sqrt() as usize;
        crate::linalg::unflatten(n, self.value.as_ref()?).ok()
    }
}

/// Reconstruction over a grid, with all residuals kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeReconstruction {
    pub rank: usize,
    pub points: Vec<GaugePoint>,
    pub unresolved: usize,
    /// Points skipped by the derivative checks (a neighbour was inadmissible).
    pub skipped: usize,
    pub max_spread: f64,
    pub max_unitarity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_ode_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_theorem_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_reference_error: Option<f64>,
    /// Largest `‖φ̂ − I‖` over grid points inside the observation set.
    pub max_boundary_error: f64,
    /// `spread`, `unitarity`, `boundary`, `verify_gauge_ode`, `verify_theorem`; the last two only when both connections are known.
    pub checks: Vec<Check>,
}

fn max_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    values.flatten().fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
}

/// `y ↦ φ(y; w(y), s″(y))` with the outgoing leg aimed at a fixed world line `μ_b`.
pub fn gauge_field_towards<'a>(
    ctx: &'a BrokenRayContext,
    a: &'a dyn TransformOracle,
    b: &'a dyn TransformOracle,
    target: Vec<f64>,
    opts: ReconstructionOptions,
) -> SampledGauge<impl Fn(&[f64]) -> Result<CMatrix> + Send + Sync + 'a> {
    let rank = a.connection().map_or(0, |c| c.rank());
    let eval = move |y: &[f64]| -> Result<CMatrix> {
        let leg = ctx
            .leg_to_world_line(y, &target, &opts)?
            .ok_or_else(|| Error::Domain("no admissible outgoing leg towards the target world line".into()))?;
        Ok(gauge_candidate(ctx, a, b, y, &leg.w, leg.s_out)?.into_matrix())
    };
    SampledGauge::new(rank, opts.h_fd, eval)
}

/// `‖dφ̂·e_k − (φ̂ A_k − B_k φ̂)‖` maximized over coordinate directions at `y`.
pub fn verify_gauge_ode(a: &dyn Connection, b: &dyn Connection, phi: &dyn GaugeMap, y: &[f64]) -> Result<f64> {
    let value = phi.value(y)?;
    let mut worst: f64 = 0.0;
    for k in 0..y.len() {
        let lhs = phi.derivative(y, k)?;
        let rhs = &value * a.component(y, k)? - b.component(y, k)? * &value;
        worst = worst.max(distance(&lhs, &rhs));
    }
    Ok(worst)
}

/// `max_i ‖A_i − (B ◁ φ̂)_i‖` at `y`.
pub fn verify_theorem(a: &dyn Connection, b: &dyn Connection, phi: &dyn GaugeMap, y: &[f64]) -> Result<f64> {
    let acted = gauge_act(b, phi)?;
    let mut worst: f64 = 0.0;
    for i in 0..y.len() {
        worst = worst.max(distance(&a.component(y, i)?, &acted.component(y, i)?));
    }
    Ok(worst)
}

fn reconstruct_point(
    ctx: &BrokenRayContext,
    a: &dyn TransformOracle,
    b: &dyn TransformOracle,
    y: &[f64],
    opts: &ReconstructionOptions,
) -> Result<GaugePoint> {
    let legs = ctx.outgoing_legs(y, opts.directions, opts)?;
    let mut point = GaugePoint {
        y: y.to_vec(),
        resolved: false,
        mode: None,
        value: None,
        unitarity: 0.0,
        spread: 0.0,
        directions: legs.len(),
        ode_residual: None,
        theorem_residual: None,
        reference_error: None,
        legs: Vec::new(),
    };
    let Some(first) = legs.first() else {
        return Ok(point);
    };
    let values: Vec<UnitaryMatrix> = legs
        .iter()
        .map(|l| gauge_candidate(ctx, a, b, y, &l.w, l.s_out))
        .collect::<Result<_>>()?;
    point.spread = values.iter().map(|v| v.distance(&values[0])).fold(0.0, f64::max);

    let (value, mode) = match honest_query(ctx, y, first).map(|q| honest_candidate(ctx, a, b, &q)) {
        Some(Ok(v)) => (v, ExtractionMode::Honest),
        _ => (values[0].clone(), ExtractionMode::Synthetic),
    };
    point.unitarity = unitarity_residual(value.matrix());
    point.value = Some(value.flatten());
    point.mode = Some(mode);
    point.resolved = true;
    point.legs = legs;
    Ok(point)
}

/// Reconstructs `φ̂` on `grid`, keeping every residual.
///
/// When both oracles expose their connections, the ODE `dφ = φA − Bφ` and
/// the identity `A = B ◁ φ̂` are checked at each resolved point with
/// central differences of `φ̂` along its first admissible world line.
pub fn reconstruct_gauge(
    ctx: &BrokenRayContext,
    a: &dyn TransformOracle,
    b: &dyn TransformOracle,
    grid: &[Vec<f64>],
    opts: &ReconstructionOptions,
) -> Result<GaugeReconstruction> {
    let rank = a
        .connection()
        .or(b.connection())
        .map(|c| c.rank())
        .ok_or_else(|| Error::Capability("reconstruction needs the bundle rank from an oracle".into()))?;
    let results: Vec<Result<(GaugePoint, bool)>> = grid
        .par_iter()
        .map(|y| {
            let mut p = reconstruct_point(ctx, a, b, y, opts)?;
            let mut skipped = false;
            if let (true, Some(ca), Some(cb)) = (p.resolved, a.connection(), b.connection()) {
                let field = gauge_field_towards(ctx, a, b, p.legs[0].b.clone(), *opts);
                match (verify_gauge_ode(ca, cb, &field, y), verify_theorem(ca, cb, &field, y)) {
                    (Ok(o), Ok(t)) => {
                        p.ode_residual = Some(o);
                        p.theorem_residual = Some(t);
                    }
                    (Err(Error::Domain(_) | Error::Admissibility(_)), _) | (_, Err(Error::Domain(_) | Error::Admissibility(_))) => {
                        skipped = true;
                    }
                    (Err(e), _) | (_, Err(e)) => return Err(e),
                }
            }
            Ok((p, skipped))
        })
        .collect();
    let mut points = Vec::with_capacity(grid.len());
    let mut skipped = 0;
    for r in results {
        let (p, s) = r?;
        skipped += usize::from(s);
        points.push(p);
    }
    let eye = identity(rank);
    let max_boundary_error = points
        .iter()
        .filter(|p| ctx.observation.contains(&ctx.metric, &p.y))
        .filter_map(|p| p.matrix())
        .map(|m| distance(&m, &eye))
        .fold(0.0, f64::max);
    let max_spread = points.iter().map(|p| p.spread).fold(0.0, f64::max);
    let max_unitarity = points.iter().map(|p| p.unitarity).fold(0.0, f64::max);
    let max_ode_residual = max_of(points.iter().map(|p| p.ode_residual));
    let max_theorem_residual = max_of(points.iter().map(|p| p.theorem_residual));
    let t = &opts.thresholds;
    let mut checks = vec![
        Check::at_most("spread", max_spread, t.spread),
        Check::at_most("unitarity", max_unitarity, t.unitarity),
        Check::at_most("boundary", max_boundary_error, t.boundary),
    ];
    if let Some(o) = max_ode_residual {
        checks.push(Check::at_most("verify_gauge_ode", o, t.ode));
    }
    if let Some(r) = max_theorem_residual {
        checks.push(Check::at_most("verify_theorem", r, t.theorem));
    }
    Ok(GaugeReconstruction {
        rank,
        unresolved: points.iter().filter(|p| !p.resolved).count(),
        skipped,
        max_spread,
        max_unitarity,
        max_ode_residual,
        max_theorem_residual,
        max_reference_error: None,
        max_boundary_error,
        checks,
        points,
    })
}

impl GaugeReconstruction {
    /// Fills `reference_error` against a known gauge.
    pub fn compare_with(&mut self, reference: &dyn GaugeMap) -> Result<()> {
        for p in &mut self.points {
            if let Some(m) = p.matrix() {
                p.reference_error = Some(distance(&m, &reference.value(&p.y)?));
            }
        }
        self.max_reference_error = max_of(self.points.iter().map(|p| p.reference_error));
        Ok(())
    }

    /// Names of the failed checks.
    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }
}

/// Interior lattice of the causal diamond: `res` nodes per axis of its bounding box, filtered by membership.
pub fn diamond_grid(ctx: &BrokenRayContext, res: usize, tol: f64) -> Result<Vec<Vec<f64>>> {
    let m = &ctx.metric;
    let obs = &ctx.observation;
    let n = m.dim() - 1;
    let half = obs.radius + 0.5 * obs.t_max;
    let node = |i: usize, lo: f64, hi: f64| lo + (hi - lo) * (i + 1) as f64 / (res + 1) as f64;
    let mut grid = Vec::new();
    let total = res.pow(m.dim() as u32);
    for flat in 0..total {
        let mut idx = flat;
        let mut y = vec![0.0; n + 1];
        for (k, c) in y.iter_mut().enumerate() {
            let i = idx % res;
            idx /= res;
            *c = if k == 0 { node(i, 0.0, obs.t_max) } else { node(i, -half, half) };
        }
        if m.is_cylinder() {
            m.wrap(&mut y);
        }
        if obs.in_diamond(m, &y, tol)? {
            grid.push(y);
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::{random_connection, random_gauge, GaugeActed, InverseGauge, RandomFieldOptions};
    use crate::geometry::{MetricField, ObservationSet};

    fn ctx() -> BrokenRayContext {
        BrokenRayContext::new(MetricField::minkowski(2), ObservationSet::new(3.0, 0.5).unwrap()).with_step(1e-2)
    }

    #[test]
    fn equal_connections_give_identity() {
        let ctx = ctx();
        let a = random_connection(2, 3, &RandomFieldOptions::default(), 3);
        let oa = SyntheticOracle::new(&ctx, &a);
        let ob = SyntheticOracle::new(&ctx, &a);
        let u = gauge_candidate(&ctx, &oa, &ob, &[1.5, 1.0, 0.0], &[1.0, -1.0, 0.0], 0.8).unwrap();
        assert!(u.distance(&UnitaryMatrix::identity(2)) < 1e-9);
    }

    #[test]
    fn planted_gauge_is_recovered_at_a_point() {
        let ctx = ctx();
        let opts = RandomFieldOptions::default();
        let a = random_connection(2, 3, &opts, 3);
        let phi = random_gauge(2, 3, 4, &ctx.observation, 0.3, &opts);
        let b = GaugeActed { connection: &a, gauge: InverseGauge(&phi) };
        let oa = SyntheticOracle::new(&ctx, &a);
        let ob = SyntheticOracle::new(&ctx, &b);
        let y = [1.5, 1.0, 0.2];
        let legs = ctx.outgoing_legs(&y, 8, &ReconstructionOptions::default()).unwrap();
        assert!(legs.len() >= 2);
        for l in &legs {
            let u = gauge_candidate(&ctx, &oa, &ob, &y, &l.w, l.s_out).unwrap();
            assert!(distance(u.matrix(), &phi.value(&y).unwrap()) < 1e-6);
        }
    }

    #[test]
    fn inadmissible_outgoing_leg() {
        let ctx = ctx();
        let a = random_connection(1, 3, &RandomFieldOptions::default(), 3);
        let oa = SyntheticOracle::new(&ctx, &a);
        let r = gauge_candidate(&ctx, &oa, &oa, &[1.5, 1.0, 0.0], &[1.0, 1.0, 0.0], 0.8);
        assert!(matches!(r, Err(Error::Admissibility(Admissibility::EndpointOutsideObservationSet { .. }))));
    }

    #[test]
    fn honest_mode_inside_observation_set() {
        let ctx = ctx();
        let opts = RandomFieldOptions::default();
        let a = random_connection(2, 3, &opts, 5);
        let phi = random_gauge(2, 3, 6, &ctx.observation, 0.3, &opts);
        let b = GaugeActed { connection: &a, gauge: InverseGauge(&phi) };
        let oa = SyntheticOracle::new(&ctx, &a);
        let ob = SyntheticOracle::new(&ctx, &b);
        let p = reconstruct_point(&ctx, &oa, &ob, &[1.0, 0.1, 0.1], &ReconstructionOptions::default()).unwrap();
        assert_eq!(p.mode, Some(ExtractionMode::Honest));
        assert!(distance(&p.matrix().unwrap(), &identity(2)) < 1e-9);
    }

    #[test]
    fn identity_gauge_with_different_connections_fails_theorem() {
        let opts = RandomFieldOptions::default();
        let a = random_connection(2, 3, &opts, 1);
        let b = random_connection(2, 3, &opts, 2);
        let eye = crate::gauge::GaugeField::identity(2, 3);
        let y = [1.0, 0.3, -0.2];
        let r = verify_theorem(&a, &b, &eye, &y).unwrap();
        let direct = (0..3)
            .map(|i| distance(&a.component(&y, i).unwrap(), &b.component(&y, i).unwrap()))
            .fold(0.0, f64::max);
        assert!((r - direct).abs() < 1e-14 && r > 0.0);
        assert_eq!(verify_theorem(&a, &a, &eye, &y).unwrap(), 0.0);
    }

    #[test]
    fn grid_lies_in_the_diamond() {
        let ctx = ctx();
        let grid = diamond_grid(&ctx, 5, 1e-9).unwrap();
        assert!(!grid.is_empty() && grid.len() < 125);
        for y in &grid {
            let d = (y[1].hypot(y[2]) - 0.5).max(0.0);
            assert!(d < y[0] && y[0] < 3.0 - d);
        }
    }
}
