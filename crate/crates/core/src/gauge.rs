//! Connection 1-forms `A = Aᵢ dxⁱ` with values in 𝔲(n), gauge maps `φ` into U(n),
//! and the gauge action `A ◁ φ = φ⁻¹dφ + φ⁻¹Aφ`.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, Term};
use crate::geometry::{wrap_angle, ObservationSet};
use crate::linalg::{expm, identity, skew_hermitian_from_parts, unitarity_residual, CMatrix};

/// Unitarity drift of a gauge sample rejected by [`GaugeActed`].
pub const GAUGE_UNITARITY_TOL: f64 = 1e-9;

/// A 𝔲(n)-valued 1-form evaluable at chart points.
pub trait Connection: Send + Sync {
    fn rank(&self) -> usize;

    /// `Aᵢ(x)`.
    fn component(&self, x: &[f64], i: usize) -> Result<CMatrix>;

    /// `⟨A(x), v⟩ = Aᵢ(x) vⁱ`.
    fn pairing(&self, x: &[f64], v: &[f64]) -> Result<CMatrix> {
        let n = self.rank();
        let mut out = CMatrix::zeros(n, n);
        for (i, vi) in v.iter().enumerate() {
            if *vi != 0.0 {
                out += self.component(x, i)? * Complex64::new(*vi, 0.0);
            }
        }
        Ok(out)
    }
}

/// A smooth map into U(n) with first derivatives.
pub trait GaugeMap: Send + Sync {
    fn rank(&self) -> usize;

    /// `φ(x)`.
    fn value(&self, x: &[f64]) -> Result<CMatrix>;

    /// `∂ₖφ(x)`.
    fn derivative(&self, x: &[f64], k: usize) -> Result<CMatrix>;

    /// `dφ(x)·v`.
    fn directional_derivative(&self, x: &[f64], v: &[f64]) -> Result<CMatrix> {
        let n = self.rank();
        let mut out = CMatrix::zeros(n, n);
        for (k, vk) in v.iter().enumerate() {
            if *vk != 0.0 {
                out += self.derivative(x, k)? * Complex64::new(*vk, 0.0);
            }
        }
        Ok(out)
    }
}

macro_rules! forward_impls {
    ($tr:ident { $($m:ident($($arg:ident: $ty:ty),*) -> $ret:ty;)* }) => {
        impl<T: $tr + ?Sized> $tr for &T {
            $(fn $m(&self, $($arg: $ty),*) -> $ret { (**self).$m($($arg),*) })*
        }
        impl<T: $tr + ?Sized> $tr for Box<T> {
            $(fn $m(&self, $($arg: $ty),*) -> $ret { (**self).$m($($arg),*) })*
        }
        impl<T: $tr + ?Sized> $tr for Arc<T> {
            $(fn $m(&self, $($arg: $ty),*) -> $ret { (**self).$m($($arg),*) })*
        }
    };
}

forward_impls!(Connection {
    rank() -> usize;
    component(x: &[f64], i: usize) -> Result<CMatrix>;
    pairing(x: &[f64], v: &[f64]) -> Result<CMatrix>;
});

forward_impls!(GaugeMap {
    rank() -> usize;
    value(x: &[f64]) -> Result<CMatrix>;
    derivative(x: &[f64], k: usize) -> Result<CMatrix>;
    directional_derivative(x: &[f64], v: &[f64]) -> Result<CMatrix>;
});

/// Serialized form of a constant skew-Hermitian matrix: row-major real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixSpec {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let mut re = Vec::with_capacity(m.len());
        let mut im = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        Self { re, im }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionTermSpec {
    pub coeff: ScalarField,
    pub direction: usize,
    pub matrix: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionFieldSpec {
    pub rank: usize,
    pub dim: usize,
    #[serde(default)]
    pub terms: Vec<ConnectionTermSpec>,
}

/// `A = Σ c_k(x) X_k dx^{i_k}` with constant skew-Hermitian `X_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConnectionFieldSpec", into = "ConnectionFieldSpec")]
pub struct ConnectionField {
    rank: usize,
    dim: usize,
    terms: Vec<(ScalarField, usize, CMatrix)>,
}

impl TryFrom<ConnectionFieldSpec> for ConnectionField {
    type Error = Error;

    fn try_from(spec: ConnectionFieldSpec) -> Result<Self> {
        let mut field = ConnectionField::zero(spec.rank, spec.dim);
        for t in spec.terms {
            let m = skew_hermitian_from_parts(spec.rank, &t.matrix.re, &t.matrix.im)?;
            field.push(t.coeff, t.direction, m)?;
        }
        Ok(field)
    }
}

impl From<ConnectionField> for ConnectionFieldSpec {
    fn from(f: ConnectionField) -> Self {
        Self {
            rank: f.rank,
            dim: f.dim,
            terms: f
                .terms
                .iter()
                .map(|(c, d, m)| ConnectionTermSpec { coeff: c.clone(), direction: *d, matrix: MatrixSpec::from_matrix(m) })
                .collect(),
        }
    }
}

impl ConnectionField {
    pub fn zero(rank: usize, dim: usize) -> Self {
        Self { rank, dim, terms: Vec::new() }
    }

    /// Adds `coeff · X dx^direction`.
    pub fn push(&mut self, coeff: ScalarField, direction: usize, matrix: CMatrix) -> Result<()> {
        if matrix.nrows() != self.rank || matrix.ncols() != self.rank {
            return Err(Error::Shape { expected: self.rank, found: matrix.nrows() });
        }
        if direction >= self.dim {
            return Err(Error::Invalid(format!("direction index {direction} out of range for dimension {}", self.dim)));
        }
        let r = crate::linalg::skew_hermitian_residual(&matrix);
        if r > 1e-12 {
            return Err(Error::Integrity(format!("connection matrix is not skew-Hermitian (residual {r:.3e})")));
        }
        if !coeff.all_finite() {
            return Err(Error::Invalid("connection coefficients must be finite".into()));
        }
        self.terms.push((coeff, direction, matrix));
        Ok(())
    }

    pub fn with_term(mut self, coeff: ScalarField, direction: usize, matrix: CMatrix) -> Result<Self> {
        self.push(coeff, direction, matrix)?;
        Ok(self)
    }

    /// `A = X dx^direction` with constant `X`.
    pub fn constant(dim: usize, direction: usize, matrix: CMatrix) -> Result<Self> {
        Self::zero(matrix.nrows(), dim).with_term(ScalarField::constant(1.0), direction, matrix)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `∂ₖAᵢ(x)`.
    pub fn component_derivative(&self, x: &[f64], i: usize, k: usize) -> Result<CMatrix> {
        self.check(x)?;
        let mut out = CMatrix::zeros(self.rank, self.rank);
        for (c, d, m) in &self.terms {
            if *d == i {
                out += m * Complex64::new(c.gradient(x)[k], 0.0);
            }
        }
        Ok(out)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Shape { expected: self.dim, found: x.len() });
        }
        Ok(())
    }
}

impl Connection for ConnectionField {
    fn rank(&self) -> usize {
        self.rank
    }

    fn component(&self, x: &[f64], i: usize) -> Result<CMatrix> {
        self.check(x)?;
        let mut out = CMatrix::zeros(self.rank, self.rank);
        for (c, d, m) in &self.terms {
            if *d == i {
                out += m * Complex64::new(c.value(x), 0.0);
            }
        }
        Ok(out)
    }

    fn pairing(&self, x: &[f64], v: &[f64]) -> Result<CMatrix> {
        self.check(x)?;
        if v.len() != self.dim {
            return Err(Error::Shape { expected: self.dim, found: v.len() });
        }
        let mut out = CMatrix::zeros(self.rank, self.rank);
        for (c, d, m) in &self.terms {
            if v[*d] != 0.0 {
                out += m * Complex64::new(c.value(x) * v[*d], 0.0);
            }
        }
        Ok(out)
    }
}

/// Smooth radial step in the spatial coordinates: `0` for `|x′| ≤ radius`,
/// `1` for `|x′| ≥ radius + width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub radius: f64,
    pub width: f64,
    /// Measure the angle on the circle (cylinder chart).
    #[serde(default)]
    pub periodic: bool,
}

fn bump_f(u: f64) -> f64 {
    if u <= 0.0 { 0.0 } else { (-1.0 / u).exp() }
}

fn bump_df(u: f64) -> f64 {
    if u <= 0.0 { 0.0 } else { (-1.0 / u).exp() / (u * u) }
}

impl Cutoff {
    fn radial(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let n = x.len();
        let mut grad = vec![0.0; n];
        if self.periodic {
            let a = wrap_angle(x[1]);
            grad[1] = a.signum();
            return (a.abs(), grad);
        }
        let r = x[1..].iter().map(|c| c * c).sum::<f64>().sqrt();
        if r > 0.0 {
            for k in 1..n {
                grad[k] = x[k] / r;
            }
        }
        (r, grad)
    }

    /// `(χ(x), ∇χ(x))`.
    pub fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (r, dr) = self.radial(x);
        let u = (r - self.radius) / self.width;
        let (a, b) = (bump_f(u), bump_f(1.0 - u));
        let value = a / (a + b);
        let slope = (bump_df(u) * b + a * bump_df(1.0 - u)) / ((a + b) * (a + b)) / self.width;
        (value, dr.iter().map(|d| d * slope).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTermSpec {
    pub coeff: ScalarField,
    pub matrix: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeFieldSpec {
    pub rank: usize,
    pub dim: usize,
    #[serde(default)]
    pub generator: Vec<GeneratorTermSpec>,
    #[serde(default)]
    pub cutoff: Option<Cutoff>,
}

/// `φ(x) = exp(χ(x) ψ(x))` with `ψ = Σ c_k(x) X_k` skew-Hermitian and `χ` an optional [`Cutoff`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaugeFieldSpec", into = "GaugeFieldSpec")]
pub struct GaugeField {
    rank: usize,
    dim: usize,
    generator: Vec<(ScalarField, CMatrix)>,
    cutoff: Option<Cutoff>,
}

impl TryFrom<GaugeFieldSpec> for GaugeField {
    type Error = Error;

    fn try_from(spec: GaugeFieldSpec) -> Result<Self> {
        let mut g = GaugeField::identity(spec.rank, spec.dim);
        g.cutoff = spec.cutoff;
        for t in spec.generator {
            let m = skew_hermitian_from_parts(spec.rank, &t.matrix.re, &t.matrix.im)?;
            g.generator.push((t.coeff, m));
        }
        Ok(g)
    }
}

impl From<GaugeField> for GaugeFieldSpec {
    fn from(g: GaugeField) -> Self {
        Self {
            rank: g.rank,
            dim: g.dim,
            generator: g
                .generator
                .iter()
                .map(|(c, m)| GeneratorTermSpec { coeff: c.clone(), matrix: MatrixSpec::from_matrix(m) })
                .collect(),
            cutoff: g.cutoff,
        }
    }
}

impl GaugeField {
    pub fn identity(rank: usize, dim: usize) -> Self {
        Self { rank, dim, generator: Vec::new(), cutoff: None }
    }

    pub fn with_generator_term(mut self, coeff: ScalarField, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != self.rank {
            return Err(Error::Shape { expected: self.rank, found: matrix.nrows() });
        }
        let r = crate::linalg::skew_hermitian_residual(&matrix);
        if r > 1e-12 {
            return Err(Error::Integrity(format!("generator is not skew-Hermitian (residual {r:.3e})")));
        }
        self.generator.push((coeff, matrix));
        Ok(self)
    }

    pub fn with_cutoff(mut self, cutoff: Cutoff) -> Self {
        self.cutoff = Some(cutoff);
        self
    }

    pub fn cutoff(&self) -> Option<&Cutoff> {
        self.cutoff.as_ref()
    }

    /// `χψ(x)` and its partial derivatives.
    fn generator_jet(&self, x: &[f64]) -> Result<(CMatrix, Vec<CMatrix>)> {
        if x.len() != self.dim {
            return Err(Error::Shape { expected: self.dim, found: x.len() });
        }
        let n = self.rank;
        let mut psi = CMatrix::zeros(n, n);
        let mut dpsi = vec![CMatrix::zeros(n, n); self.dim];
        for (c, m) in &self.generator {
            psi += m * Complex64::new(c.value(x), 0.0);
            for (k, g) in c.gradient(x).into_iter().enumerate() {
                if g != 0.0 {
                    dpsi[k] += m * Complex64::new(g, 0.0);
                }
            }
        }
        if let Some(cut) = &self.cutoff {
            let (chi, dchi) = cut.eval(x);
            for (k, d) in dpsi.iter_mut().enumerate() {
                *d = &*d * Complex64::new(chi, 0.0) + &psi * Complex64::new(dchi[k], 0.0);
            }
            psi *= Complex64::new(chi, 0.0);
        }
        Ok((psi, dpsi))
    }
}

/// Directional derivative of `exp` at `psi` along `dpsi`: upper-right block of
/// `exp([[ψ, δψ], [0, ψ]])`.
pub fn dexp(psi: &CMatrix, dpsi: &CMatrix) -> CMatrix {
    let n = psi.nrows();
    let mut block = CMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(psi);
    block.view_mut((n, n), (n, n)).copy_from(psi);
    block.view_mut((0, n), (n, n)).copy_from(dpsi);
    expm(&block).view((0, n), (n, n)).into_owned()
}

impl GaugeMap for GaugeField {
    fn rank(&self) -> usize {
        self.rank
    }

    fn value(&self, x: &[f64]) -> Result<CMatrix> {
        let (psi, _) = self.generator_jet(x)?;
        if psi.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            return Ok(identity(self.rank));
        }
        Ok(expm(&psi))
    }

    fn derivative(&self, x: &[f64], k: usize) -> Result<CMatrix> {
        let (psi, dpsi) = self.generator_jet(x)?;
        let d = dpsi.get(k).ok_or_else(|| Error::Invalid(format!("derivative index {k} out of range")))?;
        if d.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            return Ok(CMatrix::zeros(self.rank, self.rank));
        }
        Ok(dexp(&psi, d))
    }

    fn directional_derivative(&self, x: &[f64], v: &[f64]) -> Result<CMatrix> {
        let (psi, dpsi) = self.generator_jet(x)?;
        let mut d = CMatrix::zeros(self.rank, self.rank);
        for (dk, vk) in dpsi.iter().zip(v) {
            if *vk != 0.0 {
                d += dk * Complex64::new(*vk, 0.0);
            }
        }
        if d.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            return Ok(d);
        }
        Ok(dexp(&psi, &d))
    }
}

/// `x ↦ φ(x)⁻¹ = φ(x)*`.
#[derive(Debug, Clone)]
pub struct InverseGauge<G>(pub G);

impl<G: GaugeMap> GaugeMap for InverseGauge<G> {
    fn rank(&self) -> usize {
        self.0.rank()
    }

    fn value(&self, x: &[f64]) -> Result<CMatrix> {
        Ok(self.0.value(x)?.adjoint())
    }

    fn derivative(&self, x: &[f64], k: usize) -> Result<CMatrix> {
        // d(φ*) = (dφ)* for a matrix-valued map; unitarity is not needed here.
        Ok(self.0.derivative(x, k)?.adjoint())
    }

    fn directional_derivative(&self, x: &[f64], v: &[f64]) -> Result<CMatrix> {
        Ok(self.0.directional_derivative(x, v)?.adjoint())
    }
}

/// Pointwise product `x ↦ φ(x)χ(x)`.
#[derive(Debug, Clone)]
pub struct ProductGauge<G, H>(pub G, pub H);

impl<G: GaugeMap, H: GaugeMap> GaugeMap for ProductGauge<G, H> {
    fn rank(&self) -> usize {
        self.0.rank()
    }

    fn value(&self, x: &[f64]) -> Result<CMatrix> {
        Ok(self.0.value(x)? * self.1.value(x)?)
    }

    fn derivative(&self, x: &[f64], k: usize) -> Result<CMatrix> {
        Ok(self.0.derivative(x, k)? * self.1.value(x)? + self.0.value(x)? * self.1.derivative(x, k)?)
    }
}

/// A gauge given only by values; derivatives by central differences.
pub struct SampledGauge<F> {
    rank: usize,
    h: f64,
    f: F,
}

impl<F: Fn(&[f64]) -> Result<CMatrix> + Send + Sync> SampledGauge<F> {
    pub fn new(rank: usize, h: f64, f: F) -> Self {
        Self { rank, h, f }
    }
}

impl<F: Fn(&[f64]) -> Result<CMatrix> + Send + Sync> GaugeMap for SampledGauge<F> {
    fn rank(&self) -> usize {
        self.rank
    }

    fn value(&self, x: &[f64]) -> Result<CMatrix> {
        (self.f)(x)
    }

    /// Fourth-order central difference.
    fn derivative(&self, x: &[f64], k: usize) -> Result<CMatrix> {
        let at = |offset: f64| {
            let mut y = x.to_vec();
            y[k] += offset;
            (self.f)(&y)
        };
        if x[k] + self.h == x[k] {
            return Err(Error::Numeric(format!("difference step {} underflows at coordinate {k}", self.h)));
        }
        let num = (at(-2.0 * self.h)? - at(2.0 * self.h)?) + (at(self.h)? - at(-self.h)?) * Complex64::new(8.0, 0.0);
        Ok(num / Complex64::new(12.0 * self.h, 0.0))
    }
}

/// The connection `A ◁ φ = φ⁻¹dφ + φ⁻¹Aφ`.
#[derive(Debug, Clone)]
pub struct GaugeActed<C, G> {
    pub connection: C,
    pub gauge: G,
}

/// Builds `A ◁ φ`.
pub fn gauge_act<C: Connection, G: GaugeMap>(connection: C, gauge: G) -> Result<GaugeActed<C, G>> {
    if connection.rank() != gauge.rank() {
        return Err(Error::Shape { expected: connection.rank(), found: gauge.rank() });
    }
    Ok(GaugeActed { connection, gauge })
}

impl<C: Connection, G: GaugeMap> GaugeActed<C, G> {
    fn unitary_value(&self, x: &[f64]) -> Result<CMatrix> {
        let phi = self.gauge.value(x)?;
        let r = unitarity_residual(&phi);
        if !(r <= GAUGE_UNITARITY_TOL) {
            return Err(Error::Integrity(format!("gauge sample is not unitary (residual {r:.3e})")));
        }
        Ok(phi)
    }
}

impl<C: Connection, G: GaugeMap> Connection for GaugeActed<C, G> {
    fn rank(&self) -> usize {
        self.connection.rank()
    }

    fn component(&self, x: &[f64], i: usize) -> Result<CMatrix> {
        let phi = self.unitary_value(x)?;
        let inv = phi.adjoint();
        Ok(&inv * self.gauge.derivative(x, i)? + &inv * self.connection.component(x, i)? * &phi)
    }

    fn pairing(&self, x: &[f64], v: &[f64]) -> Result<CMatrix> {
        let phi = self.unitary_value(x)?;
        let inv = phi.adjoint();
        let dphi = self.gauge.directional_derivative(x, v)?;
        Ok(&inv * dphi + &inv * self.connection.pairing(x, v)? * &phi)
    }
}

/// Shape of randomly generated fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomFieldOptions {
    /// Cosine terms per direction (connections) or in the generator (gauges).
    pub terms: usize,
    /// Wave vectors are drawn uniformly from `[−max_wave, max_wave]^dim`.
    pub max_wave: f64,
    /// Frobenius norm of each constant matrix times its coefficient bound.
    pub amplitude: f64,
}

impl Default for RandomFieldOptions {
    fn default() -> Self {
        Self { terms: 2, max_wave: 1.0, amplitude: 0.5 }
    }
}

/// Random skew-Hermitian matrix with unit Frobenius norm.
pub fn random_skew_hermitian(n: usize, rng: &mut impl Rng) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let x = (&g - g.adjoint()) * Complex64::new(0.5, 0.0);
    let norm = x.norm();
    x / Complex64::new(norm, 0.0)
}

fn random_cosine(dim: usize, opts: &RandomFieldOptions, rng: &mut impl Rng) -> Term {
    Term::Cosine {
        coeff: opts.amplitude * rng.random_range(0.3..1.0),
        wave: (0..dim).map(|_| rng.random_range(-opts.max_wave..=opts.max_wave)).collect(),
        phase: rng.random_range(0.0..TAU),
    }
}

/// Deterministic random connection: per direction, `terms` cosine modes times random 𝔲(n) matrices.
pub fn random_connection(n: usize, dim: usize, opts: &RandomFieldOptions, seed: u64) -> ConnectionField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = ConnectionField::zero(n, dim);
    for i in 0..dim {
        for _ in 0..opts.terms {
            let coeff = ScalarField::from_terms(vec![random_cosine(dim, opts, &mut rng)]);
            let m = random_skew_hermitian(n, &mut rng);
            field.terms.push((coeff, i, m));
        }
    }
    field
}

/// Deterministic random gauge equal to the identity on `ℝ × B(0, ρ)` ⊃ 𝛒.
pub fn random_gauge(
    n: usize,
    dim: usize,
    seed: u64,
    observation: &ObservationSet,
    width: f64,
    opts: &RandomFieldOptions,
) -> GaugeField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut g = GaugeField::identity(n, dim).with_cutoff(Cutoff { radius: observation.radius, width, periodic: false });
    for _ in 0..opts.terms.max(1) {
        let coeff = ScalarField::from_terms(vec![random_cosine(dim, opts, &mut rng)]);
        let m = random_skew_hermitian(n, &mut rng);
        g.generator.push((coeff, m));
    }
    g
}
