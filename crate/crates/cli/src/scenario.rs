//! Scenario files: the JSON input of every run.

use lorentz_gauge::gauge::{
    random_connection, random_gauge, ConnectionField, GaugeField, RandomFieldOptions,
};
use lorentz_gauge::geometry::{MetricField, ObservationSet, TOL_NULL};
use lorentz_gauge::symcalc::HalfDensity;
use lorentz_gauge::transport::BrokenRayQuery;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Mandatory whenever a fixture is random.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub metric: MetricField,
    pub observation: ObservationSet,
    pub connection: ConnectionSource,
    /// How the second connection `B` relates to `A`; absent means `B = A`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<Partner>,
    #[serde(default)]
    pub numerics: Numerics,
    pub experiments: Vec<Experiment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConnectionSource {
    Zero { rank: usize },
    Random {
        rank: usize,
        #[serde(default)]
        options: RandomFieldOptions,
        /// Added to the scenario seed.
        #[serde(default)]
        seed_offset: u64,
    },
    Explicit { field: ConnectionField },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum GaugeSource {
    Identity,
    /// Random gauge equal to the identity on the observation set.
    Random {
        #[serde(default = "default_width")]
        width: f64,
        #[serde(default)]
        options: RandomFieldOptions,
        #[serde(default = "default_gauge_offset")]
        seed_offset: u64,
    },
    Explicit { field: GaugeField },
}

fn default_width() -> f64 {
    0.3
}

fn default_gauge_offset() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "relation", rename_all = "snake_case", deny_unknown_fields)]
pub enum Partner {
    /// `B = A ◁ φ⁻¹`, so that `A = B ◁ φ`.
    Planted { gauge: GaugeSource },
    /// An unrelated connection; every gauge-invariance check is expected to fail.
    Independent { connection: ConnectionSource },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// Geodesic and transport step.
    pub h: f64,
    pub tol_null: f64,
    pub tolerances: Tolerances,
}

impl Default for Numerics {
    fn default() -> Self {
        Self { h: 1e-3, tol_null: TOL_NULL, tolerances: Tolerances::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub unitarity: f64,
    pub group_law: f64,
    pub reversal: f64,
    pub identity: f64,
    pub gauge_invariance: f64,
    /// Smallest `‖S^A − S^B‖` that counts as distinguishing.
    pub distinguish: f64,
    pub round_trip: f64,
    pub spread: f64,
    pub ode: f64,
    pub theorem: f64,
    pub boundary: f64,
    pub measurement: f64,
    pub kappa: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            unitarity: 1e-10,
            group_law: 1e-8,
            reversal: 1e-8,
            identity: 1e-12,
            gauge_invariance: 1e-6,
            distinguish: 1e-2,
            round_trip: 1e-5,
            spread: 1e-6,
            ode: 1e-5,
            theorem: 1e-5,
            boundary: 1e-9,
            measurement: 1e-5,
            kappa: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Geodesic,
    Transport,
    Broken,
    Reconstruct,
    Interaction,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Geodesic => "geodesic",
            Kind::Transport => "transport",
            Kind::Broken => "broken",
            Kind::Reconstruct => "reconstruct",
            Kind::Interaction => "interaction",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Geodesic(GeodesicSpec),
    Transport(TransportSpec),
    Broken(BrokenSpec),
    Reconstruct(ReconstructSpec),
    Interaction(InteractionSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSpec {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub s_max: f64,
    /// Also measure the error-reduction factors under three step halvings.
    #[serde(default)]
    pub convergence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportSpec {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub s: f64,
    /// `a < b < c` for the group law; defaults to `(0, 0.4 s, s)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splits: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrokenSpec {
    pub queries: QuerySet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructSpec {
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_directions")]
    pub directions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionSpec {
    pub y: Vec<f64>,
    pub theta: f64,
    #[serde(default = "default_r_sweep")]
    pub r_sweep: Vec<f64>,
    #[serde(default = "default_polarizations")]
    pub polarizations: usize,
    #[serde(default = "default_cones")]
    pub cones: Vec<f64>,
    #[serde(default = "default_cone_samples")]
    pub cone_samples: usize,
    /// Required on curved charts.
    #[serde(default)]
    pub density: HalfDensity,
}

fn default_resolution() -> usize {
    5
}

fn default_directions() -> usize {
    8
}

fn default_r_sweep() -> Vec<f64> {
    vec![0.1, 0.05, 0.025]
}

fn default_polarizations() -> usize {
    20
}

fn default_cones() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025]
}

fn default_cone_samples() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum QuerySet {
    Explicit { list: Vec<BrokenRayQuery> },
    /// Random admissible queries on a flat chart.
    Random { count: usize },
}

impl Experiment {
    pub fn kind(&self) -> Kind {
        match self {
            Experiment::Geodesic(_) => Kind::Geodesic,
            Experiment::Transport(_) => Kind::Transport,
            Experiment::Broken(_) => Kind::Broken,
            Experiment::Reconstruct(_) => Kind::Reconstruct,
            Experiment::Interaction(_) => Kind::Interaction,
        }
    }
}

/// Parses a scenario; the error names the JSON path that failed.
pub fn parse(text: &str) -> Result<Scenario, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        refine(text, e.path()).unwrap_or_else(|| CliError::Schema { path, message: e.inner().to_string() })
    })?;
    scenario.validate()?;
    Ok(scenario)
}

/// Tagged enums hide the field that failed; re-reads a failing experiment as its own kind.
fn refine(text: &str, path: &serde_path_to_error::Path) -> Option<CliError> {
    use serde_path_to_error::Segment;
    let segments: Vec<&Segment> = path.iter().collect();
    let [Segment::Map { key }, Segment::Seq { index }] = segments.as_slice() else {
        return None;
    };
    if key != "experiments" {
        return None;
    }
    let root: serde_json::Value = serde_json::from_str(text).ok()?;
    let mut item = root.get("experiments")?.get(*index)?.as_object()?.clone();
    let kind = item.remove("kind")?;
    let value = serde_json::Value::Object(item);
    fn inner<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Option<(String, String)> {
        serde_path_to_error::deserialize::<_, T>(value).err().map(|e| (e.path().to_string(), e.inner().to_string()))
    }
    let (sub, message) = match kind.as_str()? {
        "geodesic" => inner::<GeodesicSpec>(value),
        "transport" => inner::<TransportSpec>(value),
        "broken" => inner::<BrokenSpec>(value),
        "reconstruct" => inner::<ReconstructSpec>(value),
        "interaction" => inner::<InteractionSpec>(value),
        _ => None,
    }?;
    let path = if sub == "." { format!("experiments[{index}]") } else { format!("experiments[{index}].{sub}") };
    Some(CliError::Schema { path, message })
}

fn schema(path: &str, message: impl Into<String>) -> CliError {
    CliError::Schema { path: path.to_string(), message: message.into() }
}

impl ConnectionSource {
    fn is_random(&self) -> bool {
        matches!(self, ConnectionSource::Random { .. })
    }

    fn rank(&self) -> usize {
        match self {
            ConnectionSource::Zero { rank } | ConnectionSource::Random { rank, .. } => *rank,
            ConnectionSource::Explicit { field } => lorentz_gauge::gauge::Connection::rank(field),
        }
    }

    pub fn build(&self, dim: usize, seed: Option<u64>) -> ConnectionField {
        match self {
            ConnectionSource::Zero { rank } => ConnectionField::zero(*rank, dim),
            ConnectionSource::Random { rank, options, seed_offset } => {
                random_connection(*rank, dim, options, seed.unwrap_or(0).wrapping_add(*seed_offset))
            }
            ConnectionSource::Explicit { field } => field.clone(),
        }
    }

    fn validate(&self, path: &str, dim: usize) -> Result<(), CliError> {
        match self {
            ConnectionSource::Zero { rank } | ConnectionSource::Random { rank, .. } if *rank == 0 => {
                Err(schema(&format!("{path}.rank"), "rank must be at least 1"))
            }
            ConnectionSource::Random { options, .. } if !(options.amplitude >= 0.0 && options.max_wave >= 0.0) => {
                Err(schema(&format!("{path}.options"), "amplitude and max_wave must be nonnegative"))
            }
            ConnectionSource::Explicit { field } if field.dim() != dim => Err(schema(
                &format!("{path}.field.dim"),
                format!("connection dimension {} does not match the metric dimension {dim}", field.dim()),
            )),
            _ => Ok(()),
        }
    }
}

impl GaugeSource {
    pub fn build(&self, rank: usize, dim: usize, seed: Option<u64>, obs: &ObservationSet) -> GaugeField {
        match self {
            GaugeSource::Identity => GaugeField::identity(rank, dim),
            GaugeSource::Random { width, options, seed_offset } => {
                random_gauge(rank, dim, seed.unwrap_or(0).wrapping_add(*seed_offset), obs, *width, options)
            }
            GaugeSource::Explicit { field } => field.clone(),
        }
    }
}

impl Scenario {
    pub fn needs_seed(&self) -> bool {
        self.connection.is_random()
            || match &self.partner {
                Some(Partner::Planted { gauge }) => matches!(gauge, GaugeSource::Random { .. }),
                Some(Partner::Independent { connection }) => connection.is_random(),
                None => false,
            }
            || self.experiments.iter().any(|e| {
                matches!(e, Experiment::Broken(BrokenSpec { queries: QuerySet::Random { .. } }) | Experiment::Interaction(_))
            })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.metric.validate().map_err(|e| schema("metric", e.to_string()))?;
        ObservationSet::new(self.observation.t_max, self.observation.radius)
            .map_err(|e| schema("observation", e.to_string()))?;
        let dim = self.metric.dim();
        self.connection.validate("connection", dim)?;
        let rank = self.connection.rank();
        match &self.partner {
            Some(Partner::Independent { connection }) => {
                connection.validate("partner.connection", dim)?;
                if connection.rank() != rank {
                    return Err(schema("partner.connection.rank", "both connections must have the same rank"));
                }
            }
            Some(Partner::Planted { gauge: GaugeSource::Explicit { field } }) => {
                if lorentz_gauge::gauge::GaugeMap::rank(field) != rank {
                    return Err(schema("partner.gauge.field.rank", "gauge rank must match the connection rank"));
                }
            }
            Some(Partner::Planted { gauge: GaugeSource::Random { width, .. } }) if !(*width > 0.0) => {
                return Err(schema("partner.gauge.width", "cutoff width must be positive"));
            }
            _ => {}
        }
        let n = &self.numerics;
        if !(n.h > 0.0 && n.h.is_finite()) {
            return Err(schema("numerics.h", "step must be positive"));
        }
        if !(n.tol_null > 0.0) {
            return Err(schema("numerics.tol_null", "tolerance must be positive"));
        }
        let t = serde_json::to_value(n.tolerances).expect("tolerances serialize");
        for (key, value) in t.as_object().expect("tolerances are an object") {
            if !(value.as_f64().unwrap_or(-1.0) > 0.0) {
                return Err(schema(&format!("numerics.tolerances.{key}"), "tolerance must be positive"));
            }
        }
        if self.experiments.is_empty() {
            return Err(schema("experiments", "at least one experiment is required"));
        }
        for (i, e) in self.experiments.iter().enumerate() {
            self.validate_experiment(&format!("experiments[{i}]"), e)?;
        }
        if self.needs_seed() && self.seed.is_none() {
            return Err(schema("seed", "a seed is required for randomized fixtures"));
        }
        Ok(())
    }

    fn validate_experiment(&self, path: &str, e: &Experiment) -> Result<(), CliError> {
        let dim = self.metric.dim();
        let point = |name: &str, p: &[f64]| {
            if p.len() != dim {
                Err(schema(&format!("{path}.{name}"), format!("expected {dim} coordinates, found {}", p.len())))
            } else {
                Ok(())
            }
        };
        match e {
            Experiment::Geodesic(GeodesicSpec { x, v, s_max, .. }) => {
                point("x", x)?;
                point("v", v)?;
                if !(*s_max > 0.0) {
                    return Err(schema(&format!("{path}.s_max"), "s_max must be positive"));
                }
            }
            Experiment::Transport(TransportSpec { x, v, s, splits }) => {
                point("x", x)?;
                point("v", v)?;
                if !(*s > 0.0) {
                    return Err(schema(&format!("{path}.s"), "s must be positive"));
                }
                if let Some([a, b, c]) = splits {
                    if !(0.0 <= *a && a < b && b < c && *c <= *s) {
                        return Err(schema(&format!("{path}.splits"), "splits must satisfy 0 ≤ a < b < c ≤ s"));
                    }
                }
            }
            Experiment::Broken(BrokenSpec { queries }) => match queries {
                QuerySet::Explicit { list } => {
                    for (i, q) in list.iter().enumerate() {
                        point(&format!("queries.list[{i}].y"), &q.y)?;
                        point(&format!("queries.list[{i}].v"), &q.v)?;
                        point(&format!("queries.list[{i}].w"), &q.w)?;
                    }
                }
                QuerySet::Random { count } => {
                    if !self.metric.is_flat_chart() || self.metric.is_cylinder() {
                        return Err(schema(&format!("{path}.queries"), "random queries need a Minkowski chart"));
                    }
                    if *count == 0 {
                        return Err(schema(&format!("{path}.queries.count"), "count must be positive"));
                    }
                }
            },
            Experiment::Reconstruct(ReconstructSpec { resolution, directions }) => {
                if *resolution == 0 || *directions == 0 {
                    return Err(schema(path, "resolution and directions must be positive"));
                }
            }
            Experiment::Interaction(InteractionSpec { y, theta, r_sweep, polarizations, cones, cone_samples, density }) => {
                point("y", y)?;
                if !(*theta > 0.0 && *theta < std::f64::consts::PI) {
                    return Err(schema(&format!("{path}.theta"), "theta must lie in (0, π)"));
                }
                if *density == HalfDensity::TranslationInvariant && !self.metric.is_flat_chart() {
                    return Err(schema(&format!("{path}.density"), "a translation-invariant density needs a flat chart"));
                }
                if dim < 3 {
                    return Err(schema(path, "the interaction experiment needs at least two spatial dimensions"));
                }
                if r_sweep.len() < 2 || r_sweep.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
                    return Err(schema(&format!("{path}.r_sweep"), "need at least two values in (0, 1)"));
                }
                if r_sweep.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(schema(&format!("{path}.r_sweep"), "r_sweep must be decreasing"));
                }
                if *polarizations == 0 {
                    return Err(schema(&format!("{path}.polarizations"), "at least one polarization is required"));
                }
                if cones.is_empty() || cones.iter().any(|c| !(*c >= 0.0)) || cones.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(schema(&format!("{path}.cones"), "cones must be nonnegative and decreasing"));
                }
                if *cone_samples < 2 {
                    return Err(schema(&format!("{path}.cone_samples"), "at least two samples per cone"));
                }
            }
        }
        Ok(())
    }
}
