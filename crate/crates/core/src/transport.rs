//! U(n) parallel transport along integrated geodesics and the broken light-ray transform.

use std::collections::HashMap;
use std::sync::RwLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Admissibility, Error, Result};
use crate::gauge::Connection;
use crate::geometry::{
    integrate_geodesic_to, null_cut_time, null_residual, CutTimeOptions, GeodesicSegment, MetricField,
    ObservationSet, TOL_NULL,
};
use crate::linalg::{expm, identity, polar_project, CMatrix, UnitaryMatrix};

/// Default step for geodesic legs and transport.
pub const DEFAULT_STEP: f64 = 1e-3;

const SQRT3: f64 = 1.732_050_807_568_877_2;
const C1: f64 = 0.5 - SQRT3 / 6.0;
const C2: f64 = 0.5 + SQRT3 / 6.0;
const ALPHA1: f64 = 0.25 - SQRT3 / 6.0;
const ALPHA2: f64 = 0.25 + SQRT3 / 6.0;

fn pairing_at(metric: &MetricField, conn: &dyn Connection, seg: &GeodesicSegment, s: f64) -> Result<CMatrix> {
    let (mut x, v) = seg.state_at(s)?;
    metric.wrap(&mut x);
    conn.pairing(&x, &v)
}

fn check_range(seg: &GeodesicSegment, a: f64, b: f64) -> Result<()> {
    for p in [a, b] {
        if !seg.contains(p) {
            let (lo, hi) = seg.s_range();
            return Err(Error::Domain(format!("transport parameter {p} outside segment range [{lo}, {hi}]")));
        }
    }
    Ok(())
}

/// The two exponents of one commutator-free step for `U′ = G U`, `G = −⟨A, γ̇⟩`.
fn step_exponents(metric: &MetricField, conn: &dyn Connection, seg: &GeodesicSegment, s: f64, k: f64) -> Result<(CMatrix, CMatrix)> {
    let g1 = -pairing_at(metric, conn, seg, s + C1 * k)?;
    let g2 = -pairing_at(metric, conn, seg, s + C2 * k)?;
    let kc = Complex64::new(k, 0.0);
    let left = (&g1 * Complex64::new(ALPHA1, 0.0) + &g2 * Complex64::new(ALPHA2, 0.0)) * kc;
    let right = (&g1 * Complex64::new(ALPHA2, 0.0) + &g2 * Complex64::new(ALPHA1, 0.0)) * kc;
    Ok((left, right))
}

fn step_count(a: f64, b: f64, h: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Invalid(format!("transport step must be positive, got {h}")));
    }
    Ok(((b - a).abs() / h).ceil() as usize)
}

/// `P^A_{γ([a,b])}`: solves `∂ₛU + ⟨A(γ), γ̇⟩U = 0`, `U(a) = I`, and returns `U(b)`.
///
/// Uses the segment's own step. `a > b` integrates backwards.
pub fn parallel_transport(metric: &MetricField, conn: &dyn Connection, seg: &GeodesicSegment, a: f64, b: f64) -> Result<UnitaryMatrix> {
    parallel_transport_with_step(metric, conn, seg, a, b, seg.h())
}

/// [`parallel_transport`] with an explicit step.
///
/// Fourth-order commutator-free scheme at the Gauss nodes, two exponentials
/// per step, followed by a projection back onto U(n).
pub fn parallel_transport_with_step(
    metric: &MetricField,
    conn: &dyn Connection,
    seg: &GeodesicSegment,
    a: f64,
    b: f64,
    h: f64,
) -> Result<UnitaryMatrix> {
    check_range(seg, a, b)?;
    let n = conn.rank();
    let steps = step_count(a, b, h)?;
    if steps == 0 {
        return Ok(UnitaryMatrix::identity(n));
    }
    let k = (b - a) / steps as f64;
    let mut u = identity(n);
    for j in 0..steps {
        let s = a + j as f64 * k;
        let (left, right) = step_exponents(metric, conn, seg, s, k)?;
        u = expm(&left) * expm(&right) * u;
        u = polar_project(&u);
    }
    Ok(UnitaryMatrix::project(u))
}

/// `U(b)⁻¹` obtained by solving `∂ₛW − W⟨A, γ̇⟩ = 0`, `W(a) = I`.
pub fn inverse_transport(metric: &MetricField, conn: &dyn Connection, seg: &GeodesicSegment, a: f64, b: f64) -> Result<UnitaryMatrix> {
    check_range(seg, a, b)?;
    let n = conn.rank();
    let steps = step_count(a, b, seg.h())?;
    if steps == 0 {
        return Ok(UnitaryMatrix::identity(n));
    }
    let k = (b - a) / steps as f64;
    let mut w = identity(n);
    for j in 0..steps {
        let s = a + j as f64 * k;
        let (left, right) = step_exponents(metric, conn, seg, s, k)?;
        w = w * expm(&(-right)) * expm(&(-left));
        w = polar_project(&w);
    }
    Ok(UnitaryMatrix::project(w))
}

/// `‖P_{[b,c]} P_{[a,b]} − P_{[a,c]}‖`.
pub fn check_group_property(metric: &MetricField, conn: &dyn Connection, seg: &GeodesicSegment, a: f64, b: f64, c: f64) -> Result<f64> {
    let ab = parallel_transport(metric, conn, seg, a, b)?;
    let bc = parallel_transport(metric, conn, seg, b, c)?;
    let ac = parallel_transport(metric, conn, seg, a, c)?;
    Ok(bc.compose(&ab).distance(&ac))
}

/// Integrates `γ_{x,v}` on `[0, s]` (or `[s, 0]`) and fails if the chart is left first.
pub fn leg(metric: &MetricField, x: &[f64], v: &[f64], s: f64, h: f64) -> Result<GeodesicSegment> {
    let seg = integrate_geodesic_to(metric, x, v, s, h)?;
    if seg.truncated() {
        return Err(Error::Domain(format!("geodesic leaves the chart before s = {s}")));
    }
    Ok(seg)
}

/// Reversal identity: `P_{γ_{y,−v}([−s₀,0])}` against the same transport along
/// `γ_{x,ξ}([0,s₀])`, with `x = γ_{y,v}(s₀)`, `ξ = −γ̇_{y,v}(s₀)`, and against
/// `P_{γ_{y,v}([0,s₀])}⁻¹`. Returns the larger residual.
pub fn check_reversal(metric: &MetricField, conn: &dyn Connection, y: &[f64], v: &[f64], s0: f64, h: f64) -> Result<f64> {
    let forward = leg(metric, y, v, s0, h)?;
    let p_forward = parallel_transport(metric, conn, &forward, 0.0, s0)?;

    let minus_v: Vec<f64> = v.iter().map(|c| -c).collect();
    let reversed = leg(metric, y, &minus_v, -s0, h)?;
    let p_reversed = parallel_transport(metric, conn, &reversed, -s0, 0.0)?;

    let (mut x, xdot) = forward.state_at(s0)?;
    metric.wrap(&mut x);
    let xi: Vec<f64> = xdot.iter().map(|c| -c).collect();
    let incoming = leg(metric, &x, &xi, s0, h)?;
    let p_incoming = parallel_transport(metric, conn, &incoming, 0.0, s0)?;

    let shifted = p_reversed.distance(&p_incoming);
    let inverse = (p_reversed.matrix() * p_forward.matrix() - identity(conn.rank())).norm();
    Ok(shifted.max(inverse))
}

/// `(y, v, w, s′, s″)` with `v` past-pointing and `w` future-pointing lightlike at `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrokenRayQuery {
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    #[serde(rename = "s_in")]
    pub s_in: f64,
    #[serde(rename = "s_out")]
    pub s_out: f64,
}

fn quantize(v: &[f64], q: f64) -> Vec<i64> {
    v.iter().map(|c| (c / q).round() as i64).collect()
}

/// Thread-safe memo of null cut times keyed by quantized base point and direction.
type CutKey = (Vec<i64>, Vec<i64>);

#[derive(Debug, Default)]
pub struct CutTimeCache {
    map: RwLock<HashMap<CutKey, f64>>,
}

impl CutTimeCache {
    const QUANTUM: f64 = 1e-10;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.read().map(|m| m.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cut time of `γ_{x,v}`; stored for the direction rescaled to `|v⁰| = 1`.
    pub fn cut_time(&self, metric: &MetricField, x: &[f64], v: &[f64], opts: &CutTimeOptions) -> Result<f64> {
        let scale = v[0].abs();
        if scale == 0.0 {
            return Err(Error::Invalid("cut time needs a time-oriented direction".into()));
        }
        let unit: Vec<f64> = v.iter().map(|c| c / scale).collect();
        let key = (quantize(x, Self::QUANTUM), quantize(&unit, Self::QUANTUM));
        if let Some(t) = self.map.read().ok().and_then(|m| m.get(&key).copied()) {
            return Ok(t / scale);
        }
        let t = null_cut_time(metric, x, &unit, opts)?;
        if let Ok(mut m) = self.map.write() {
            m.entry(key).or_insert(t);
        }
        Ok(t / scale)
    }
}

/// Everything a broken-ray evaluation needs besides the connection.
#[derive(Debug)]
pub struct BrokenRayContext {
    pub metric: MetricField,
    pub observation: ObservationSet,
    pub h: f64,
    pub cut: CutTimeOptions,
    pub tol_null: f64,
    pub cache: CutTimeCache,
}

/// The two legs of an admissible query.
#[derive(Debug, Clone)]
pub struct BrokenLegs {
    /// `x = γ_{y,v}(s′)`.
    pub x: Vec<f64>,
    /// `ξ = −γ̇_{y,v}(s′)`.
    pub xi: Vec<f64>,
    /// `γ_{y,w}(s″)`.
    pub z: Vec<f64>,
    pub incoming: GeodesicSegment,
    pub outgoing: GeodesicSegment,
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    v.iter().map(|c| c / n).collect()
}

impl BrokenRayContext {
    pub fn new(metric: MetricField, observation: ObservationSet) -> Self {
        Self {
            metric,
            observation,
            h: DEFAULT_STEP,
            cut: CutTimeOptions::default(),
            tol_null: TOL_NULL,
            cache: CutTimeCache::new(),
        }
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.h = h;
        self.cut.h = h;
        self
    }

    pub fn with_cut_options(mut self, cut: CutTimeOptions) -> Self {
        self.cut = cut;
        self
    }

    fn inadmissible(a: Admissibility) -> Error {
        Error::Admissibility(a)
    }

    /// Checks every admissibility condition and integrates both legs.
    pub fn legs(&self, q: &BrokenRayQuery) -> Result<BrokenLegs> {
        let m = &self.metric;
        let dim = m.dim();
        for (name, len) in [("y", q.y.len()), ("v", q.v.len()), ("w", q.w.len())] {
            if len != dim {
                return Err(Error::Invalid(format!("{name} has length {len}, expected {dim}")));
            }
        }
        let rv = null_residual(m, &q.y, &q.v)?;
        if rv > self.tol_null {
            return Err(Self::inadmissible(Admissibility::NotLightlike { leg: "incoming", residual: rv }));
        }
        let rw = null_residual(m, &q.y, &q.w)?;
        if rw > self.tol_null {
            return Err(Self::inadmissible(Admissibility::NotLightlike { leg: "outgoing", residual: rw }));
        }
        if !(q.v[0] < 0.0) {
            return Err(Self::inadmissible(Admissibility::WrongOrientation { leg: "incoming" }));
        }
        if !(q.w[0] > 0.0) {
            return Err(Self::inadmissible(Admissibility::WrongOrientation { leg: "outgoing" }));
        }
        let gap: f64 = unit(&q.v).iter().zip(unit(&q.w)).map(|(a, b)| (a + b).powi(2)).sum::<f64>().sqrt();
        if gap < 1e-8 {
            return Err(Self::inadmissible(Admissibility::Colinear));
        }
        if !(q.s_in > 0.0) {
            return Err(Self::inadmissible(Admissibility::NonPositiveParameter { leg: "incoming" }));
        }
        if !(q.s_out > 0.0) {
            return Err(Self::inadmissible(Admissibility::NonPositiveParameter { leg: "outgoing" }));
        }
        let cut_in = self.cache.cut_time(m, &q.y, &q.v, &self.cut)?;
        if !(q.s_in < cut_in - self.cut.tol_cut) {
            return Err(Self::inadmissible(Admissibility::PastCutTime { leg: "incoming", parameter: q.s_in, cut_time: cut_in }));
        }
        let cut_out = self.cache.cut_time(m, &q.y, &q.w, &self.cut)?;
        if !(q.s_out < cut_out - self.cut.tol_cut) {
            return Err(Self::inadmissible(Admissibility::PastCutTime { leg: "outgoing", parameter: q.s_out, cut_time: cut_out }));
        }

        let back = integrate_geodesic_to(m, &q.y, &q.v, q.s_in, self.h)?;
        if back.truncated() {
            return Err(Self::inadmissible(Admissibility::Truncated { leg: "incoming" }));
        }
        let (mut x, xdot) = back.state_at(q.s_in)?;
        m.wrap(&mut x);
        if !self.observation.contains(m, &x) {
            return Err(Self::inadmissible(Admissibility::EndpointOutsideObservationSet { leg: "incoming" }));
        }
        let xi: Vec<f64> = xdot.iter().map(|c| -c).collect();
        let incoming = integrate_geodesic_to(m, &x, &xi, q.s_in, self.h)?;
        if incoming.truncated() {
            return Err(Self::inadmissible(Admissibility::Truncated { leg: "incoming" }));
        }
        let outgoing = integrate_geodesic_to(m, &q.y, &q.w, q.s_out, self.h)?;
        if outgoing.truncated() {
            return Err(Self::inadmissible(Admissibility::Truncated { leg: "outgoing" }));
        }
        let z = outgoing.point_at(q.s_out)?;
        if !self.observation.contains(m, &z) {
            return Err(Self::inadmissible(Admissibility::EndpointOutsideObservationSet { leg: "outgoing" }));
        }
        Ok(BrokenLegs { x, xi, z, incoming, outgoing })
    }

    /// `(P_in, P_out)` for an admissible query.
    pub fn leg_transports(&self, conn: &dyn Connection, q: &BrokenRayQuery) -> Result<(UnitaryMatrix, UnitaryMatrix)> {
        let legs = self.legs(q)?;
        self.leg_transports_on(conn, q, &legs)
    }

    /// `(P_in, P_out)` along already integrated legs.
    pub fn leg_transports_on(&self, conn: &dyn Connection, q: &BrokenRayQuery, legs: &BrokenLegs) -> Result<(UnitaryMatrix, UnitaryMatrix)> {
        let p_in = parallel_transport(&self.metric, conn, &legs.incoming, 0.0, q.s_in)?;
        let p_out = parallel_transport(&self.metric, conn, &legs.outgoing, 0.0, q.s_out)?;
        Ok((p_in, p_out))
    }

    /// `S^A = P^A_{γ_{y,w}([0,s″])} ∘ P^A_{γ_{x,ξ}([0,s′])}`.
    pub fn broken_transform(&self, conn: &dyn Connection, q: &BrokenRayQuery) -> Result<UnitaryMatrix> {
        let (p_in, p_out) = self.leg_transports(conn, q)?;
        Ok(p_out.compose(&p_in))
    }

    /// Data-parallel evaluation of many queries; order is preserved.
    pub fn evaluate_batch(&self, conn: &dyn Connection, queries: &[BrokenRayQuery]) -> Vec<BatchResult> {
        queries
            .par_iter()
            .enumerate()
            .map(|(index, q)| match self.broken_transform(conn, q) {
                Ok(u) => BatchResult { index, matrix: Some(u.flatten()), residual: Some(u.residual()), error: None },
                Err(e) => BatchResult { index, matrix: None, residual: None, error: Some(e.to_string()) },
            })
            .collect()
    }
}

/// One line of a batch result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub index: usize,
    /// Row-major `[re, im]` entries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::{random_connection, ConnectionField, RandomFieldOptions};
    use crate::linalg::unitarity_residual;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_connection_is_identity() {
        let m = MetricField::minkowski(3);
        let seg = leg(&m, &[0.0; 4], &[1.0, 1.0, 0.0, 0.0], 1.0, 1e-2).unwrap();
        let a = ConnectionField::zero(2, 4);
        let u = parallel_transport(&m, &a, &seg, 0.0, 1.0).unwrap();
        assert_eq!(u.matrix(), &identity(2));
        assert_eq!(check_group_property(&m, &a, &seg, 0.0, 0.3, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn abelian_closed_form() {
        let m = MetricField::minkowski(3);
        let lam = 0.8;
        let a = ConnectionField::constant(4, 0, CMatrix::from_element(1, 1, c(0.0, lam))).unwrap();
        let seg = leg(&m, &[0.0; 4], &[1.0, 1.0, 0.0, 0.0], 1.5, 1e-3).unwrap();
        let u = parallel_transport(&m, &a, &seg, 0.0, 1.5).unwrap();
        assert!((u.matrix()[(0, 0)] - c(0.0, -lam * 1.5).exp()).norm() < 1e-12);
        let w = inverse_transport(&m, &a, &seg, 0.0, 1.5).unwrap();
        assert!((w.matrix()[(0, 0)] - u.matrix()[(0, 0)].conj()).norm() < 1e-12);
    }

    #[test]
    fn inverse_and_reverse_direction() {
        let m = MetricField::minkowski(2);
        let a = random_connection(3, 3, &RandomFieldOptions::default(), 4);
        let seg = leg(&m, &[0.2, 0.1, -0.3], &[1.0, 0.6, 0.8], 1.2, 1e-3).unwrap();
        let u = parallel_transport(&m, &a, &seg, 0.1, 1.1).unwrap();
        let w = inverse_transport(&m, &a, &seg, 0.1, 1.1).unwrap();
        assert!((w.matrix() * u.matrix() - identity(3)).norm() < 1e-9);
        let back = parallel_transport(&m, &a, &seg, 1.1, 0.1).unwrap();
        assert!((back.matrix() * u.matrix() - identity(3)).norm() < 1e-9);
        assert!(unitarity_residual(u.matrix()) < 1e-10);
    }

    #[test]
    fn out_of_range_is_domain_error() {
        let m = MetricField::minkowski(1);
        let a = ConnectionField::zero(1, 2);
        let seg = leg(&m, &[0.0, 0.0], &[1.0, 1.0], 1.0, 1e-2).unwrap();
        assert!(matches!(parallel_transport(&m, &a, &seg, 0.0, 2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn reversal_identity() {
        let m = MetricField::minkowski(2);
        let a = random_connection(2, 3, &RandomFieldOptions::default(), 8);
        let r = check_reversal(&m, &a, &[2.0, 0.3, 0.1], &[-1.0, 0.6, -0.8], 1.0, 1e-3).unwrap();
        assert!(r < 1e-8, "{r}");
    }

    #[test]
    fn cut_cache_rescales() {
        let c = MetricField::cylinder();
        let cache = CutTimeCache::new();
        let opts = CutTimeOptions::default();
        let t1 = cache.cut_time(&c, &[0.0, 0.0], &[1.0, 1.0], &opts).unwrap();
        let t2 = cache.cut_time(&c, &[0.0, 0.0], &[2.0, 2.0], &opts).unwrap();
        assert_eq!(cache.len(), 1);
        assert!((t1 - 2.0 * t2).abs() < 1e-15);
    }

    #[test]
    fn broken_transform_admissibility() {
        let m = MetricField::minkowski(2);
        let ctx = BrokenRayContext::new(m, ObservationSet::new(4.0, 0.5).unwrap());
        let a = ConnectionField::zero(2, 3);
        let good = BrokenRayQuery { y: vec![1.5, 0.8, 0.0], v: vec![-1.0, -1.0, 0.0], w: vec![1.0, -1.0, 0.0], s_in: 1.0, s_out: 1.0 };
        assert_eq!(ctx.broken_transform(&a, &good).unwrap().matrix(), &identity(2));
        let far = BrokenRayQuery { s_in: 0.2, ..good.clone() };
        assert!(matches!(
            ctx.broken_transform(&a, &far),
            Err(Error::Admissibility(Admissibility::EndpointOutsideObservationSet { leg: "incoming" }))
        ));
        let colinear = BrokenRayQuery { w: vec![1.0, 1.0, 0.0], ..good.clone() };
        assert!(matches!(ctx.broken_transform(&a, &colinear), Err(Error::Admissibility(Admissibility::Colinear))));
        let spacelike = BrokenRayQuery { v: vec![-1.0, -2.0, 0.0], ..good.clone() };
        assert!(matches!(ctx.broken_transform(&a, &spacelike), Err(Error::Admissibility(Admissibility::NotLightlike { .. }))));
        let flipped = BrokenRayQuery { v: vec![1.0, 1.0, 0.0], ..good };
        assert!(matches!(ctx.broken_transform(&a, &flipped), Err(Error::Admissibility(Admissibility::WrongOrientation { .. }))));
    }

    #[test]
    fn past_cut_time_rejected_on_cylinder() {
        let c = MetricField::cylinder();
        let ctx = BrokenRayContext::new(c, ObservationSet::new(20.0, 0.5).unwrap());
        let a = ConnectionField::zero(1, 2);
        let q = BrokenRayQuery { y: vec![10.0, 0.0], v: vec![-1.0, 1.0], w: vec![1.0, 1.0], s_in: 4.0, s_out: 1.0 };
        assert!(matches!(
            ctx.broken_transform(&a, &q),
            Err(Error::Admissibility(Admissibility::PastCutTime { leg: "incoming", .. }))
        ));
    }
}
