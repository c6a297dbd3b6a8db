use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::bicharacteristic::{hamiltonian, Bicharacteristic};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::gauge::Connection;
use crate::geometry::MetricField;
use crate::linalg::{expm, identity, CMatrix, CVector};

const SQRT3: f64 = 1.732_050_807_568_877_2;
const C1: f64 = 0.5 - SQRT3 / 6.0;
const C2: f64 = 0.5 + SQRT3 / 6.0;
const ALPHA1: f64 = 0.25 - SQRT3 / 6.0;
const ALPHA2: f64 = 0.25 + SQRT3 / 6.0;

/// `(σ[P], σ_sub[P]) = (½ gⁱʲξᵢξⱼ, i⁻¹ gⁱʲ Aᵢ ξⱼ)`.
pub fn wave_symbols(metric: &MetricField, conn: &dyn Connection, x: &[f64], xi: &[f64]) -> Result<(f64, CMatrix)> {
    let principal = hamiltonian(metric, x, xi)?;
    let sharp = metric.raise(x, xi)?;
    let sub = conn.pairing(x, &sharp)? * Complex64::new(0.0, -1.0);
    Ok((principal, sub))
}

/// Positive half-density used to trivialize symbols along bicharacteristics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HalfDensity {
    /// Divergence-free on flat charts.
    #[default]
    TranslationInvariant,
    /// `div_ω H_P (x, ξ) = f(x)·|gⁱ⁰ξᵢ|`, homogeneous of degree one in `ξ`.
    LogDerivative { field: ScalarField },
}

impl HalfDensity {
    pub fn divergence(&self, metric: &MetricField, x: &[f64], xi: &[f64]) -> Result<f64> {
        match self {
            HalfDensity::TranslationInvariant => Ok(0.0),
            HalfDensity::LogDerivative { field } => {
                let g = metric.diagonal(x)?;
                Ok(field.value(x) * (xi[0] / g[0]).abs())
            }
        }
    }
}

fn wrapped_state(metric: &MetricField, bichar: &Bicharacteristic, s: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mut x, xi) = bichar.state_at(s)?;
    metric.wrap(&mut x);
    Ok((x, xi))
}

/// `ρ_vol(s) = ∫₀ˢ div_ω H_P(β) ds` by composite Simpson with about one interval per step of the bicharacteristic.
pub fn volume_factor(metric: &MetricField, bichar: &Bicharacteristic, density: &HalfDensity, s: f64) -> Result<f64> {
    volume_factor_between(metric, bichar, density, 0.0, s)
}

/// `∫_a^b div_ω H_P(β) ds`.
pub fn volume_factor_between(metric: &MetricField, bichar: &Bicharacteristic, density: &HalfDensity, a: f64, b: f64) -> Result<f64> {
    if matches!(density, HalfDensity::TranslationInvariant) {
        if !metric.is_flat_chart() {
            return Err(Error::Capability("translation-invariant half-density requires a flat chart".into()));
        }
        bichar.state_at(a)?;
        bichar.state_at(b)?;
        return Ok(0.0);
    }
    let mut n = ((b - a).abs() / bichar.h()).ceil() as usize;
    n = (n + n % 2).max(2);
    let k = (b - a) / n as f64;
    let mut sum = 0.0;
    for i in 0..=n {
        let s = a + i as f64 * k;
        let (x, xi) = wrapped_state(metric, bichar, s)?;
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * density.divergence(metric, &x, &xi)?;
    }
    Ok(sum * k / 3.0)
}

/// `ω⁻¹σ[u]` restricted to a bicharacteristic: a vector in `ℂⁿ` and its homogeneity degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolState {
    pub value: CVector,
    pub degree: f64,
}

impl SymbolState {
    pub fn new(value: CVector, degree: f64) -> Self {
        Self { value, degree }
    }

    /// Symbol attached at `(x, λξ)` when `self` is attached at `(x, ξ)`.
    pub fn rescaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Invalid(format!("rescaling needs λ > 0, got {lambda}")));
        }
        Ok(Self { value: &self.value * Complex64::new(lambda.powf(self.degree), 0.0), degree: self.degree })
    }

    pub fn is_finite(&self) -> bool {
        self.value.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

fn generator(metric: &MetricField, conn: &dyn Connection, bichar: &Bicharacteristic, density: &HalfDensity, s: f64) -> Result<CMatrix> {
    let (x, xi) = wrapped_state(metric, bichar, s)?;
    let (_, sub) = wave_symbols(metric, conn, &x, &xi)?;
    let div = density.divergence(metric, &x, &xi)?;
    let n = conn.rank();
    Ok(-(sub * Complex64::new(0.0, 1.0) + identity(n) * Complex64::new(div, 0.0)))
}

/// Solution operator of `∂ₛσ = −(i σ_sub[P] + div_ω H_P) σ` along `β` from `a` to `b`.
///
/// Fourth-order commutator-free steps at the Gauss nodes; no unitary projection,
/// since the divergence term is a real scalar damping.
pub fn symbol_propagator(
    metric: &MetricField,
    conn: &dyn Connection,
    bichar: &Bicharacteristic,
    density: &HalfDensity,
    a: f64,
    b: f64,
) -> Result<CMatrix> {
    for p in [a, b] {
        bichar.state_at(p)?;
    }
    let n = conn.rank();
    let steps = ((b - a).abs() / bichar.h()).ceil() as usize;
    let mut u = identity(n);
    if steps == 0 {
        return Ok(u);
    }
    let k = (b - a) / steps as f64;
    let kc = Complex64::new(k, 0.0);
    for j in 0..steps {
        let s = a + j as f64 * k;
        let g1 = generator(metric, conn, bichar, density, s + C1 * k)?;
        let g2 = generator(metric, conn, bichar, density, s + C2 * k)?;
        let left = (&g1 * Complex64::new(ALPHA1, 0.0) + &g2 * Complex64::new(ALPHA2, 0.0)) * kc;
        let right = (&g1 * Complex64::new(ALPHA2, 0.0) + &g2 * Complex64::new(ALPHA1, 0.0)) * kc;
        u = expm(&left) * expm(&right) * u;
    }
    Ok(u)
}

/// `σ(β(s))` from `σ₀` at `β(0)`; equals `e^{−ρ_vol(s)} P^A_{γ([0,s])} σ₀`.
pub fn transport_symbol(
    metric: &MetricField,
    conn: &dyn Connection,
    bichar: &Bicharacteristic,
    density: &HalfDensity,
    sigma0: &SymbolState,
    s: f64,
) -> Result<SymbolState> {
    if sigma0.value.len() != conn.rank() {
        return Err(Error::Shape { expected: conn.rank(), found: sigma0.value.len() });
    }
    let p = symbol_propagator(metric, conn, bichar, density, 0.0, s)?;
    Ok(SymbolState { value: p * &sigma0.value, degree: sigma0.degree })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Term;
    use crate::gauge::{random_connection, ConnectionField, RandomFieldOptions};
    use crate::geometry::integrate_geodesic;
    use crate::symcalc::integrate_bicharacteristic;
    use crate::transport::parallel_transport;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn principal_and_subprincipal() {
        let m = MetricField::minkowski(3);
        let zero = ConnectionField::zero(2, 4);
        let (p, sub) = wave_symbols(&m, &zero, &[0.0; 4], &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(p, -0.5);
        assert_eq!(sub, CMatrix::zeros(2, 2));
        let (p, _) = wave_symbols(&m, &zero, &[0.0; 4], &[-1.0, 0.6, 0.8, 0.0]).unwrap();
        assert!(p.abs() < 1e-15);

        let a = random_connection(2, 4, &RandomFieldOptions::default(), 9);
        let x = [0.3, -0.2, 0.1, 0.5];
        let (_, sub) = wave_symbols(&m, &a, &x, &[-1.0, 0.6, 0.8, 0.0]).unwrap();
        assert!((&sub - sub.adjoint()).norm() < 1e-14);
    }

    #[test]
    fn volume_factor_closed_form_and_additivity() {
        let m = MetricField::minkowski(2);
        let b = integrate_bicharacteristic(&m, &[0.0; 3], &[-1.0, 1.0, 0.0], 2.0, 1e-2).unwrap();
        assert_eq!(volume_factor(&m, &b, &HalfDensity::TranslationInvariant, 1.7).unwrap(), 0.0);
        // f = t + cos(x): along x = (s, s, 0), ∫₀ˢ (u + cos u) du = s²/2 + sin s.
        let f = ScalarField::from_terms(vec![
            Term::Monomial { coeff: 1.0, powers: vec![1] },
            Term::Cosine { coeff: 1.0, wave: vec![0.0, 1.0], phase: 0.0 },
        ]);
        let dens = HalfDensity::LogDerivative { field: f };
        let s = 1.7;
        let rho = volume_factor(&m, &b, &dens, s).unwrap();
        assert!((rho - (s * s / 2.0 + s.sin())).abs() < 1e-10);
        let split = volume_factor(&m, &b, &dens, 0.6).unwrap() + volume_factor_between(&m, &b, &dens, 0.6, s).unwrap();
        assert!((rho - split).abs() < 1e-10);
    }

    #[test]
    fn transport_equals_damped_parallel_transport() {
        let beta = ScalarField::from_terms(vec![
            Term::Monomial { coeff: 1.0, powers: vec![] },
            Term::Monomial { coeff: 0.1, powers: vec![1] },
        ]);
        let m = MetricField::warped(2, beta, ScalarField::constant(1.0));
        let a = random_connection(2, 3, &RandomFieldOptions::default(), 4);
        let x0 = [0.5, 0.1, 0.2];
        let d = m.diagonal(&x0).unwrap();
        let v = [1.0, (-d[0]).sqrt() * 0.8, (-d[0]).sqrt() * 0.6];
        let xi = m.lower(&x0, &v).unwrap();
        let b = integrate_bicharacteristic(&m, &x0, &xi, 1.2, 1e-3).unwrap();
        let g = integrate_geodesic(&m, &x0, &v, 1.2, 1e-3).unwrap();
        let dens = HalfDensity::LogDerivative { field: ScalarField::from_terms(vec![Term::Monomial { coeff: 0.3, powers: vec![0, 1] }]) };
        let sigma0 = SymbolState::new(CVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]), -6.5);
        for s in [0.4, 1.2] {
            let got = transport_symbol(&m, &a, &b, &dens, &sigma0, s).unwrap();
            let p = parallel_transport(&m, &a, &g, 0.0, s).unwrap();
            let rho = volume_factor(&m, &b, &dens, s).unwrap();
            let want = p.apply(&sigma0.value) * c((-rho).exp(), 0.0);
            assert!((got.value - want).norm() < 1e-9);
        }
    }

    #[test]
    fn zero_connection_keeps_symbol_constant() {
        let m = MetricField::minkowski(2);
        let zero = ConnectionField::zero(2, 3);
        let b = integrate_bicharacteristic(&m, &[0.0; 3], &[-1.0, 0.0, 1.0], 1.0, 1e-2).unwrap();
        let sigma0 = SymbolState::new(CVector::from_vec(vec![c(1.0, 0.0), c(0.0, -1.0)]), -6.5);
        let out = transport_symbol(&m, &zero, &b, &HalfDensity::TranslationInvariant, &sigma0, 1.0).unwrap();
        assert!((out.value - sigma0.value).norm() < 1e-15);
    }

    #[test]
    fn homogeneity_under_rescaling() {
        let m = MetricField::minkowski(2);
        let a = random_connection(2, 3, &RandomFieldOptions::default(), 6);
        let dens = HalfDensity::LogDerivative { field: ScalarField::from_terms(vec![Term::Cosine { coeff: 0.4, wave: vec![1.0, 0.5, 0.0], phase: 0.2 }]) };
        let x0 = [0.0, 0.2, -0.1];
        let xi = [-1.0, 0.6, 0.8];
        let mu = -7.0;
        let sigma0 = SymbolState::new(CVector::from_vec(vec![c(0.3, 0.4), c(-0.5, 0.7)]), mu + 0.5);
        let lambda = 1.8;
        let scaled: Vec<f64> = xi.iter().map(|c| lambda * c).collect();
        let s = 0.5;
        let base = integrate_bicharacteristic(&m, &x0, &xi, lambda * s, 1e-3).unwrap();
        let fast = integrate_bicharacteristic(&m, &x0, &scaled, s, 1e-3 / lambda).unwrap();
        let one = transport_symbol(&m, &a, &base, &dens, &sigma0, lambda * s).unwrap();
        let two = transport_symbol(&m, &a, &fast, &dens, &sigma0.rescaled(lambda).unwrap(), s).unwrap();
        let want = &one.value * c(lambda.powf(mu + 0.5), 0.0);
        assert!((two.value - &want).norm() <= 1e-6 * want.norm());
    }
}
