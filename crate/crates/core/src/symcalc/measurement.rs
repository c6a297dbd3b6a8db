use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bicharacteristic::integrate_bicharacteristic;
use super::interaction::{interaction_symbol, InteractionGeometry};
use super::symbols::{symbol_propagator, volume_factor, HalfDensity};
use crate::error::{Error, Result};
use crate::gauge::Connection;
use crate::geometry::{integrate_geodesic, MetricField};
use crate::linalg::{CMatrix, CVector};
use crate::transport::{leg, parallel_transport};

/// Nonzero scalar multiplying the measured vector; collects every factor that does not depend on the connection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementScalar {
    pub value: Complex64,
    /// Always false: the scalar contains unknown universal constants.
    pub known: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementMode {
    /// Symbol transports along the three incoming legs, interaction, outgoing transport.
    #[default]
    Pipeline,
    /// The `r → 0` limit `λ · P_out · P_in · c̃`.
    Limit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementOptions {
    /// Order `μ` of the sources; symbols at `y` have degree `μ + 1/2`.
    pub mu: f64,
    pub density: HalfDensity,
    /// Positive source amplitudes `α̃ⱼ`.
    pub alpha: [f64; 3],
    /// Outgoing factor `α_out`.
    pub alpha_out: Complex64,
    pub h: f64,
    pub mode: MeasurementMode,
}

impl Default for MeasurementOptions {
    fn default() -> Self {
        Self {
            mu: -7.0,
            density: HalfDensity::TranslationInvariant,
            alpha: [1.0, 0.8, 1.3],
            alpha_out: Complex64::from_polar(0.7, 1.1),
            h: 1e-3,
            mode: MeasurementMode::Pipeline,
        }
    }
}

/// Transport operators and scalar factors of one measurement geometry, independent of `c̃`.
#[derive(Debug, Clone)]
pub struct MeasurementOperator {
    /// Symbol propagators from each source to `y`, damping included.
    pub incoming: [CMatrix; 3],
    pub outgoing: CMatrix,
    /// Positive factor of each incoming symbol at `(y, r⁻²κⱼηⱼ)`.
    pub leg_scales: [f64; 3],
    pub interaction_scale: f64,
    pub alpha_out: Complex64,
    pub lambda: MeasurementScalar,
    pub mode: MeasurementMode,
}

/// Builds the measurement operator for `geom`.
///
/// Leg 1 runs the bicharacteristic through `(x₁, −ξ₁♭)` backwards to `s = −s′`;
/// legs 2 and 3 run through `(xₖ, ξₖ♭)` forwards to `s′`. All reach `(y, ηⱼ)`.
pub fn measurement_operator(
    metric: &MetricField,
    conn: &dyn Connection,
    geom: &InteractionGeometry,
    opts: &MeasurementOptions,
) -> Result<MeasurementOperator> {
    if opts.alpha.iter().any(|a| !(*a > 0.0)) || opts.alpha_out.norm() == 0.0 {
        return Err(Error::Invalid("measurement amplitudes must be positive and α_out nonzero".into()));
    }
    let degree = opts.mu + 0.5;
    let r2 = geom.r * geom.r;
    let s_in = geom.s_in;

    let incoming: Vec<(CMatrix, f64)> = (0..3)
        .into_par_iter()
        .map(|j| -> Result<(CMatrix, f64)> {
            let flat = metric.lower(&geom.x[j], &geom.xi[j])?;
            let (nu, s_end) = if j == 0 { (flat.iter().map(|c| -c).collect::<Vec<_>>(), -s_in) } else { (flat, s_in) };
            let b = integrate_bicharacteristic(metric, &geom.x[j], &nu, s_end, opts.h)?;
            if b.truncated() {
                return Err(Error::Geometry(format!("incoming bicharacteristic {} left the chart", j + 1)));
            }
            let prop = match opts.mode {
                MeasurementMode::Pipeline => symbol_propagator(metric, conn, &b, &opts.density, 0.0, s_end)?,
                MeasurementMode::Limit => CMatrix::identity(conn.rank(), conn.rank()),
            };
            let rho = volume_factor(metric, &b, &opts.density, s_end)?;
            Ok((prop, rho))
        })
        .collect::<Result<_>>()?;

    let out_b = integrate_bicharacteristic(metric, &geom.y, &geom.eta, geom.s_out, opts.h)?;
    if out_b.truncated() {
        return Err(Error::Geometry("outgoing bicharacteristic left the chart".into()));
    }
    let rho_out = volume_factor(metric, &out_b, &opts.density, geom.s_out)?;

    let leg_scales = [0, 1, 2].map(|j| (geom.kappa[j] / r2).powf(degree) * opts.alpha[j]);
    let det = metric.diagonal(&geom.y)?.iter().product::<f64>().abs();
    let half_density: f64 = geom.kappa.iter().map(|k| (k / r2).sqrt()).product();
    let interaction_scale = 0.5 * det.powf(-0.5) * half_density;

    let damping = incoming.iter().map(|(_, rho)| (-rho).exp()).product::<f64>() * (-rho_out).exp();
    let lambda = opts.alpha_out * (6.0 * interaction_scale * leg_scales.iter().product::<f64>() * damping);
    let (incoming, outgoing) = match opts.mode {
        MeasurementMode::Pipeline => {
            let outgoing = symbol_propagator(metric, conn, &out_b, &opts.density, 0.0, geom.s_out)?;
            let [a, b, c]: [(CMatrix, f64); 3] = incoming.try_into().expect("three legs");
            ([a.0, b.0, c.0], outgoing)
        }
        MeasurementMode::Limit => {
            let q = geom.query();
            let seg_in = integrate_geodesic(metric, &geom.x[0], &geom.xi[0], q.s_in, opts.h)?;
            let p_in = parallel_transport(metric, conn, &seg_in, 0.0, q.s_in)?.into_matrix();
            let seg_out = leg(metric, &q.y, &q.w, q.s_out, opts.h)?;
            let p_out = parallel_transport(metric, conn, &seg_out, 0.0, q.s_out)?.into_matrix();
            ([p_in.clone(), p_in.clone(), p_in], p_out)
        }
    };
    Ok(MeasurementOperator {
        incoming,
        outgoing,
        leg_scales,
        interaction_scale,
        alpha_out: opts.alpha_out,
        lambda: MeasurementScalar { value: lambda, known: false },
        mode: opts.mode,
    })
}

impl MeasurementOperator {
    /// The measured symbol at `(z, ζ)` for the unit source polarization `c̃`.
    pub fn apply(&self, c: &CVector) -> Result<CVector> {
        let n = self.outgoing.nrows();
        if c.len() != n {
            return Err(Error::Shape { expected: n, found: c.len() });
        }
        if (c.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!("source polarization must be a unit vector, |c̃| = {}", c.norm())));
        }
        match self.mode {
            MeasurementMode::Pipeline => {
                let sigma: Vec<CVector> =
                    (0..3).map(|j| &self.incoming[j] * c * Complex64::new(self.leg_scales[j], 0.0)).collect();
                let at_y = interaction_symbol([&sigma[0], &sigma[1], &sigma[2]], self.interaction_scale)? * self.alpha_out;
                Ok(&self.outgoing * at_y)
            }
            MeasurementMode::Limit => Ok(&self.outgoing * (&self.incoming[0] * c) * self.lambda.value),
        }
    }
}

/// Runs the symbol pipeline for one polarization; returns the vector at `(z, ζ)` and `λ`.
pub fn simulated_measurement(
    metric: &MetricField,
    conn: &dyn Connection,
    geom: &InteractionGeometry,
    c: &CVector,
    opts: &MeasurementOptions,
) -> Result<(CVector, MeasurementScalar)> {
    let op = measurement_operator(metric, conn, geom, opts)?;
    Ok((op.apply(c)?, op.lambda))
}

/// `count` deterministic unit vectors in `ℂⁿ`, uniform on the sphere.
pub fn random_polarizations(n: usize, count: usize, seed: u64) -> Vec<CVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let v = CVector::from_fn(n, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
            let norm = v.norm();
            v / Complex64::new(norm, 0.0)
        })
        .collect()
}
