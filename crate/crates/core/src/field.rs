//! Smooth scalar fields on a chart, stored as finite expansions with analytic gradients.

use serde::{Deserialize, Serialize};

/// One term of a [`ScalarField`] expansion.
///
/// Coefficient vectors (`powers`, `wave`, `rate`, `center`) may be shorter
/// than the chart dimension; missing entries are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Term {
    /// `coeff · Π xᵏ^pₖ`
    Monomial { coeff: f64, #[serde(default)] powers: Vec<u32> },
    /// `coeff · cos(k·x + phase)`
    Cosine { coeff: f64, wave: Vec<f64>, #[serde(default)] phase: f64 },
    /// `coeff · exp(k·x)`
    Exponential { coeff: f64, rate: Vec<f64> },
    /// `coeff · exp(−|x − c|² / (2 width²))`
    Gaussian { coeff: f64, center: Vec<f64>, width: f64 },
}

fn entry<T: Copy + Default>(v: &[T], k: usize) -> T {
    v.get(k).copied().unwrap_or_default()
}

fn dot(k: &[f64], x: &[f64]) -> f64 {
    k.iter().zip(x).map(|(a, b)| a * b).sum()
}

impl Term {
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Term::Monomial { coeff, powers } => {
                coeff * x.iter().enumerate().map(|(k, xk)| xk.powi(entry(powers, k) as i32)).product::<f64>()
            }
            Term::Cosine { coeff, wave, phase } => coeff * (dot(wave, x) + phase).cos(),
            Term::Exponential { coeff, rate } => coeff * dot(rate, x).exp(),
            Term::Gaussian { coeff, center, width } => {
                let r2: f64 = x.iter().enumerate().map(|(k, xk)| (xk - entry(center, k)).powi(2)).sum();
                coeff * (-r2 / (2.0 * width * width)).exp()
            }
        }
    }

    fn add_gradient(&self, x: &[f64], grad: &mut [f64]) {
        match self {
            Term::Monomial { coeff, powers } => {
                for (k, g) in grad.iter_mut().enumerate() {
                    let p = entry(powers, k);
                    if p == 0 {
                        continue;
                    }
                    let mut prod = coeff * f64::from(p) * x[k].powi(p as i32 - 1);
                    for (l, xl) in x.iter().enumerate() {
                        if l != k {
                            prod *= xl.powi(entry(powers, l) as i32);
                        }
                    }
                    *g += prod;
                }
            }
            Term::Cosine { coeff, wave, phase } => {
                let s = -coeff * (dot(wave, x) + phase).sin();
                for (k, g) in grad.iter_mut().enumerate() {
                    *g += s * entry(wave, k);
                }
            }
            Term::Exponential { coeff, rate } => {
                let e = coeff * dot(rate, x).exp();
                for (k, g) in grad.iter_mut().enumerate() {
                    *g += e * entry(rate, k);
                }
            }
            Term::Gaussian { center, width, .. } => {
                let v = self.value(x);
                for (k, g) in grad.iter_mut().enumerate() {
                    *g -= v * (x[k] - entry(center, k)) / (width * width);
                }
            }
        }
    }

    /// Whether the term varies with coordinate `k`.
    fn depends_on(&self, k: usize) -> bool {
        match self {
            Term::Monomial { powers, .. } => entry(powers, k) != 0,
            Term::Cosine { wave, .. } => entry(wave, k) != 0.0,
            Term::Exponential { rate, .. } => entry(rate, k) != 0.0,
            Term::Gaussian { .. } => true,
        }
    }
}

/// A scalar field given as a finite sum of [`Term`]s.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalarField {
    pub terms: Vec<Term>,
}

impl ScalarField {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: vec![Term::Monomial { coeff: c, powers: Vec::new() }] }
    }

    pub fn from_terms(terms: Vec<Term>) -> Self {
        Self { terms }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.value(x)).sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        for t in &self.terms {
            t.add_gradient(x, &mut g);
        }
        g
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| matches!(t, Term::Monomial { powers, .. } if powers.iter().all(|p| *p == 0)))
    }

    /// True when no term varies with any coordinate other than `x⁰`.
    pub fn depends_only_on_time(&self, dim: usize) -> bool {
        self.terms.iter().all(|t| (1..dim).all(|k| !t.depends_on(k)))
    }

    pub fn all_finite(&self) -> bool {
        self.terms.iter().all(|t| match t {
            Term::Monomial { coeff, .. } => coeff.is_finite(),
            Term::Cosine { coeff, wave, phase } => {
                coeff.is_finite() && phase.is_finite() && wave.iter().all(|w| w.is_finite())
            }
            Term::Exponential { coeff, rate } => coeff.is_finite() && rate.iter().all(|r| r.is_finite()),
            Term::Gaussian { coeff, center, width } => {
                coeff.is_finite() && *width > 0.0 && center.iter().all(|c| c.is_finite())
            }
        })
    }
}
