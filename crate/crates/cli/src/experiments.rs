//! One runner per experiment kind. Each returns named checks and a JSON result.

use std::time::Instant;

use lorentz_gauge::gauge::{Connection, ConnectionField, GaugeActed, GaugeField, GaugeMap, InverseGauge};
use lorentz_gauge::geometry::{integrate_geodesic, null_residual, MetricField, ObservationSet};
use lorentz_gauge::linalg::{identity, normalize_phase_scale, normalized_distance, CVector};
use lorentz_gauge::reconstruction::{
    diamond_grid, reconstruct_gauge, Check, Relation, ReconstructionOptions, SyntheticOracle, Thresholds,
};
use lorentz_gauge::symcalc::{
    build_interaction_geometry, flowout_disjointness, measurement_operator, random_polarizations, FlowoutOptions,
    HalfDensity, InteractionOptions, MeasurementOptions,
};
use lorentz_gauge::transport::{
    check_group_property, check_reversal, leg, parallel_transport, BatchResult, BrokenRayContext, BrokenRayQuery,
};
use lorentz_gauge::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::scenario::{
    BrokenSpec, Experiment, GeodesicSpec, InteractionSpec, Kind, Numerics, Partner, QuerySet, ReconstructSpec, Scenario,
    TransportSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PartnerRelation {
    Equal,
    Planted,
    Independent,
}

/// Everything built from the scenario before the experiments run.
pub struct Fixtures {
    pub metric: MetricField,
    pub observation: ObservationSet,
    pub numerics: Numerics,
    pub seed: u64,
    pub a: ConnectionField,
    pub b: Box<dyn Connection>,
    pub gauge: Option<GaugeField>,
    pub relation: PartnerRelation,
    pub strict: bool,
}

impl Fixtures {
    pub fn build(s: &Scenario, strict: bool) -> Self {
        let dim = s.metric.dim();
        let a = s.connection.build(dim, s.seed);
        let (b, gauge, relation): (Box<dyn Connection>, _, _) = match &s.partner {
            None => (Box::new(a.clone()), None, PartnerRelation::Equal),
            Some(Partner::Planted { gauge }) => {
                let phi = gauge.build(a.rank(), dim, s.seed, &s.observation);
                let b = GaugeActed { connection: a.clone(), gauge: InverseGauge(phi.clone()) };
                (Box::new(b), Some(phi), PartnerRelation::Planted)
            }
            Some(Partner::Independent { connection }) => {
                (Box::new(connection.build(dim, s.seed)), None, PartnerRelation::Independent)
            }
        };
        Self {
            metric: s.metric.clone(),
            observation: s.observation.clone(),
            numerics: s.numerics,
            seed: s.seed.unwrap_or(0),
            a,
            b,
            gauge,
            relation,
            strict,
        }
    }

    fn context(&self) -> BrokenRayContext {
        let mut ctx = BrokenRayContext::new(self.metric.clone(), self.observation.clone()).with_step(self.numerics.h);
        ctx.tol_null = self.numerics.tol_null;
        ctx
    }
}

/// Result of one experiment.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub index: usize,
    pub kind: Kind,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub result: Value,
    #[serde(skip)]
    pub queries: Vec<BrokenRayQuery>,
    #[serde(skip)]
    pub results: Vec<Value>,
    #[serde(skip)]
    pub seconds: f64,
}

impl Outcome {
    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
        if self.error.is_some() {
            out.push(format!("{}.error", self.kind.name()));
        }
        out
    }
}

#[derive(Default)]
struct Body {
    checks: Vec<Check>,
    result: Value,
    queries: Vec<BrokenRayQuery>,
    results: Vec<Value>,
}

pub fn run(fx: &Fixtures, index: usize, e: &Experiment) -> Outcome {
    let start = Instant::now();
    log::info!("experiment {index}: {}", e.kind().name());
    let body = match e {
        Experiment::Geodesic(GeodesicSpec { x, v, s_max, convergence }) => geodesic(fx, x, v, *s_max, *convergence),
        Experiment::Transport(TransportSpec { x, v, s, splits }) => transport(fx, x, v, *s, splits.unwrap_or([0.0, 0.4 * s, *s])),
        Experiment::Broken(BrokenSpec { queries }) => broken(fx, queries, index),
        Experiment::Reconstruct(ReconstructSpec { resolution, directions }) => reconstruct(fx, *resolution, *directions),
        Experiment::Interaction(InteractionSpec { y, theta, r_sweep, polarizations, cones, cone_samples, density }) => {
            interaction(fx, y, *theta, r_sweep, *polarizations, cones, *cone_samples, density, index)
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    match body {
        Ok(b) => Outcome {
            index,
            kind: e.kind(),
            checks: b.checks,
            error: None,
            result: b.result,
            queries: b.queries,
            results: b.results,
            seconds,
        },
        Err(err) => {
            log::error!("experiment {index} ({}) failed: {err}", e.kind().name());
            Outcome {
                index,
                kind: e.kind(),
                checks: Vec::new(),
                error: Some(err.to_string()),
                result: Value::Null,
                queries: Vec::new(),
                results: Vec::new(),
                seconds,
            }
        }
    }
}

fn distance_between(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
}

fn geodesic(fx: &Fixtures, x: &[f64], v: &[f64], s_max: f64, convergence: bool) -> Result<Body> {
    let m = &fx.metric;
    let h = fx.numerics.h;
    let seg = integrate_geodesic(m, x, v, s_max, h)?;
    let end = seg.end();
    let lightlike = null_residual(m, x, v)? <= fx.numerics.tol_null;
    let drift = seg.max_null_residual(m)?;
    let mut checks = Vec::new();
    if lightlike {
        checks.push(Check::at_most("geodesic.null_drift", drift, fx.numerics.tol_null));
    }
    let mut ratios = Vec::new();
    // Straight lines are integrated exactly, so there is no order to measure.
    if convergence && !(m.is_flat_chart() || m.is_cylinder()) {
        let s_end = seg.s_range().1;
        let coarse = (s_end / 16.0).min(0.2);
        let reference = integrate_geodesic(m, x, v, s_end, coarse / 128.0)?.end().x.clone();
        let errors: Vec<f64> = (0..4)
            .map(|k| Ok(distance_between(&integrate_geodesic(m, x, v, s_end, coarse / f64::from(1 << k))?.end().x, &reference)))
            .collect::<Result<_>>()?;
        ratios = errors.windows(2).map(|e| e[0] / e[1]).collect();
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        checks.push(Check::new("geodesic.order_min_ratio", lo, Relation::AtLeast, 8.0));
        checks.push(Check::new("geodesic.order_max_ratio", hi, Relation::AtMost, 32.0));
    }
    Ok(Body {
        checks,
        result: json!({
            "s_end": end.s,
            "x_end": end.x,
            "v_end": end.v,
            "truncated": seg.truncated(),
            "samples": seg.samples().len(),
            "lightlike": lightlike,
            "null_drift": drift,
            "convergence_ratios": ratios,
        }),
        ..Default::default()
    })
}

fn transport(fx: &Fixtures, x: &[f64], v: &[f64], s: f64, [a, b, c]: [f64; 3]) -> Result<Body> {
    let m = &fx.metric;
    let t = &fx.numerics.tolerances;
    let seg = leg(m, x, v, s, fx.numerics.h)?;
    let p = parallel_transport(m, &fx.a, &seg, 0.0, s)?;
    let group = check_group_property(m, &fx.a, &seg, a, b, c)?;
    let reversal = check_reversal(m, &fx.a, x, v, s, fx.numerics.h)?;
    let mut checks = vec![
        Check::at_most("transport.unitarity", p.residual(), t.unitarity),
        Check::at_most("transport.group_law", group, t.group_law),
        Check::at_most("transport.reversal", reversal, t.reversal),
    ];
    if fx.a.is_zero() {
        let dev = (p.matrix() - identity(fx.a.rank())).norm();
        checks.push(Check::at_most("transport.identity", dev, t.identity));
    }
    Ok(Body {
        checks,
        result: json!({
            "matrix": p.flatten(),
            "unitarity": p.residual(),
            "group_law": group,
            "reversal": reversal,
            "splits": [a, b, c],
        }),
        ..Default::default()
    })
}

/// Admissible queries on a Minkowski chart: both legs run from `y` to points of the observation ball.
fn random_queries(ctx: &BrokenRayContext, count: usize, seed: u64) -> Vec<BrokenRayQuery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ctx.metric.dim() - 1;
    let rho = ctx.observation.radius;
    let t_max = ctx.observation.t_max;
    let reach = rho + 0.5 * t_max;
    let ball = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        loop {
            let p: Vec<f64> = (0..n).map(|_| rng.random_range(-0.95..0.95) * rho).collect();
            if p.iter().map(|c| c * c).sum::<f64>() < (0.95 * rho) * (0.95 * rho) {
                return p;
            }
        }
    };
    let mut out = Vec::new();
    let mut attempts = 0usize;
    while out.len() < count && attempts < 10_000 * count {
        attempts += 1;
        let mut y = vec![rng.random_range(0.0..t_max)];
        y.extend((0..n).map(|_| rng.random_range(-reach..reach)));
        let (b1, b2) = (ball(&mut rng), ball(&mut rng));
        let d1: Vec<f64> = y[1..].iter().zip(&b1).map(|(p, q)| p - q).collect();
        let d2: Vec<f64> = b2.iter().zip(&y[1..]).map(|(p, q)| p - q).collect();
        let (s_in, s_out) = (d1.iter().map(|c| c * c).sum::<f64>().sqrt(), d2.iter().map(|c| c * c).sum::<f64>().sqrt());
        if s_in < 1e-3 || s_out < 1e-3 || y[0] - s_in <= 0.0 || y[0] + s_out >= t_max {
            continue;
        }
        let mut v = vec![-1.0];
        v.extend(d1.iter().map(|c| -c / s_in));
        let mut w = vec![1.0];
        w.extend(d2.iter().map(|c| c / s_out));
        let q = BrokenRayQuery { y, v, w, s_in, s_out };
        if ctx.legs(&q).is_ok() {
            out.push(q);
        }
    }
    out
}

fn broken(fx: &Fixtures, queries: &QuerySet, index: usize) -> Result<Body> {
    let ctx = fx.context();
    let t = &fx.numerics.tolerances;
    let list = match queries {
        QuerySet::Explicit { list } => list.clone(),
        QuerySet::Random { count } => random_queries(&ctx, *count, fx.seed.wrapping_add(1000 + index as u64)),
    };
    let sa = ctx.evaluate_batch(&fx.a, &list);
    let sb: Option<Vec<BatchResult>> = match fx.relation {
        PartnerRelation::Equal => None,
        _ => Some(ctx.evaluate_batch(fx.b.as_ref(), &list)),
    };
    let failed = sa.iter().filter(|r| r.error.is_some()).count();
    let unitarity = sa.iter().filter_map(|r| r.residual).fold(0.0, f64::max);
    let mut differences = Vec::new();
    let mut results = Vec::with_capacity(list.len());
    for (i, ra) in sa.iter().enumerate() {
        let mut line = serde_json::to_value(ra).expect("batch results serialize");
        if let Some(rb) = sb.as_ref().map(|v| &v[i]) {
            if let (Some(ma), Some(mb)) = (&ra.matrix, &rb.matrix) {
                let d = ma
                    .iter()
                    .zip(mb)
                    .map(|(p, q)| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                differences.push(d);
                line["partner_difference"] = json!(d);
            }
            line["partner"] = serde_json::to_value(rb).expect("batch results serialize");
        }
        results.push(line);
    }
    let max_difference = differences.iter().copied().fold(0.0, f64::max);
    let mut checks = vec![
        Check::at_most("broken.inadmissible_queries", failed as f64, 0.0),
        Check::at_most("broken.unitarity", unitarity, t.unitarity),
    ];
    if fx.a.is_zero() {
        let eye = identity(fx.a.rank());
        let dev = sa
            .iter()
            .filter_map(|r| r.matrix.as_ref())
            .map(|m| {
                m.iter()
                    .enumerate()
                    .map(|(k, z)| {
                        let e = eye[(k / fx.a.rank(), k % fx.a.rank())];
                        (z[0] - e.re).powi(2) + (z[1] - e.im).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        checks.push(Check::at_most("broken.identity", dev, t.identity));
    }
    if let QuerySet::Random { count } = queries {
        checks.push(Check::new("broken.generated_queries", list.len() as f64, Relation::AtLeast, *count as f64));
    }
    match fx.relation {
        PartnerRelation::Planted => checks.push(Check::at_most("broken.gauge_invariance", max_difference, t.gauge_invariance)),
        PartnerRelation::Independent => {
            checks.push(Check::new("broken.distinguishes", max_difference, Relation::Above, t.distinguish))
        }
        PartnerRelation::Equal => {}
    }
    Ok(Body {
        checks,
        result: json!({
            "queries": list.len(),
            "inadmissible": failed,
            "max_unitarity": unitarity,
            "max_partner_difference": if differences.is_empty() { Value::Null } else { json!(max_difference) },
        }),
        queries: list,
        results,
    })
}

fn reconstruct(fx: &Fixtures, resolution: usize, directions: usize) -> Result<Body> {
    let ctx = fx.context();
    let t = &fx.numerics.tolerances;
    let grid = diamond_grid(&ctx, resolution, 1e-9)?;
    let opts = ReconstructionOptions {
        directions,
        thresholds: Thresholds { spread: t.spread, ode: t.ode, theorem: t.theorem, boundary: t.boundary, unitarity: t.unitarity },
        ..Default::default()
    };
    let oa = SyntheticOracle::new(&ctx, &fx.a);
    let ob = SyntheticOracle::new(&ctx, fx.b.as_ref());
    let mut rec = reconstruct_gauge(&ctx, &oa, &ob, &grid, &opts)?;
    // Unrelated connections have no common gauge, so their spread is reported only.
    let mut checks: Vec<Check> = rec
        .checks
        .iter()
        .filter(|c| !(fx.relation == PartnerRelation::Independent && c.name == "spread"))
        .map(|c| Check { name: format!("reconstruct.{}", c.name), ..c.clone() })
        .collect();
    if let Some(phi) = &fx.gauge {
        rec.compare_with(phi as &dyn GaugeMap)?;
        checks.push(Check::at_most("reconstruct.round_trip", rec.max_reference_error.unwrap_or(f64::INFINITY), t.round_trip));
    } else if fx.relation == PartnerRelation::Equal {
        rec.compare_with(&GaugeField::identity(fx.a.rank(), fx.metric.dim()))?;
        checks.push(Check::at_most("reconstruct.round_trip", rec.max_reference_error.unwrap_or(f64::INFINITY), t.round_trip));
    }
    if fx.strict {
        checks.push(Check::at_most("reconstruct.unresolved", rec.unresolved as f64, 0.0));
    }
    Ok(Body { checks, result: serde_json::to_value(&rec).expect("reconstruction serializes"), ..Default::default() })
}

#[allow(clippy::too_many_arguments)]
fn interaction(
    fx: &Fixtures,
    y: &[f64],
    theta: f64,
    r_sweep: &[f64],
    polarizations: usize,
    cones: &[f64],
    cone_samples: usize,
    density: &HalfDensity,
    index: usize,
) -> Result<Body> {
    let m = &fx.metric;
    let obs = &fx.observation;
    let t = &fx.numerics.tolerances;
    let h = fx.numerics.h;
    let base = InteractionOptions { h, ..Default::default() };
    let first = build_interaction_geometry(m, y, theta, r_sweep[0], obs, &base)?;
    let fixed = InteractionOptions { s_in: Some(first.s_in), s_out: Some(first.s_out), ..base };
    let mut geoms = vec![first];
    for &r in &r_sweep[1..] {
        geoms.push(build_interaction_geometry(m, y, theta, r, obs, &fixed)?);
    }
    let kappa_residual = geoms.iter().map(|g| g.kappa_residual).fold(0.0, f64::max);
    let kappa_min = geoms.iter().flat_map(|g| g.kappa).fold(f64::INFINITY, f64::min);

    let ctx = fx.context();
    let s = ctx.broken_transform(&fx.a, &geoms[0].query())?;
    let mopts = MeasurementOptions { h, density: density.clone(), ..Default::default() };
    let ops = geoms.iter().map(|g| measurement_operator(m, &fx.a, g, &mopts)).collect::<Result<Vec<_>>>()?;
    let mut worst: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for c in random_polarizations(fx.a.rank(), polarizations, fx.seed.wrapping_add(2000 + index as u64)) {
        let outs = ops.iter().map(|op| op.apply(&c)).collect::<Result<Vec<CVector>>>()?;
        worst = worst.max(normalized_distance(outs.last().expect("nonempty sweep"), &s.apply(&c)));
        let n: Vec<CVector> = outs.iter().map(normalize_phase_scale).collect();
        let diffs: Vec<f64> = n.windows(2).map(|p| (&p[0] - &p[1]).norm()).collect();
        for d in diffs.windows(2) {
            worst_ratio = worst_ratio.max(d[1] / d[0]);
        }
    }

    let fopts = FlowoutOptions { h, ..Default::default() };
    let mut flowout = Vec::new();
    let mut min_distance = f64::INFINITY;
    let mut violations = 0usize;
    for g in &geoms {
        let d = cones
            .iter()
            .map(|&s0| flowout_disjointness(m, g, s0, cone_samples, &fopts))
            .collect::<Result<Vec<f64>>>()?;
        min_distance = min_distance.min(d.iter().copied().fold(f64::INFINITY, f64::min));
        violations += d.windows(2).filter(|p| p[1] < p[0]).count();
        flowout.push(d);
    }

    let mut checks = vec![
        Check::at_most("interaction.kappa_residual", kappa_residual, t.kappa),
        Check::new("interaction.kappa_positive", kappa_min, Relation::Above, 0.0),
        Check::at_most("interaction.equivalence", worst, t.measurement),
        Check::new("interaction.flowout_positive", min_distance, Relation::Above, 0.0),
        Check::at_most("interaction.flowout_monotone_violations", violations as f64, 0.0),
    ];
    if r_sweep.len() >= 3 {
        checks.push(Check::new("interaction.cauchy_ratio", worst_ratio, Relation::Below, 1.0));
    }
    let lambda = ops.iter().map(|op| [op.lambda.value.re, op.lambda.value.im]).collect::<Vec<_>>();
    Ok(Body {
        checks,
        result: json!({
            "s_in": geoms[0].s_in,
            "s_out": geoms[0].s_out,
            "r_sweep": r_sweep,
            "kappa": geoms.iter().map(|g| g.kappa).collect::<Vec<_>>(),
            "kappa_residual": kappa_residual,
            "equivalence_error": worst,
            "cauchy_ratio": worst_ratio,
            "lambda": lambda,
            "lambda_known": false,
            "cones": cones,
            "flowout_distance": flowout,
        }),
        ..Default::default()
    })
}
