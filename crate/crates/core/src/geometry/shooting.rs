use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::geodesic::geodesic_endpoint;
use super::MetricField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingOptions {
    /// Number of initial directions; `None` means 64 (2 in 1+1 dimensions).
    pub starts: Option<usize>,
    pub max_iter: usize,
    /// Accepted endpoint error (Euclidean, chart-aware).
    pub tol_shoot: f64,
    /// Geodesic step on curved charts.
    pub h: f64,
    /// Directions closer than this (unit-normalized Euclidean) are merged.
    pub dedup: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self { starts: None, max_iter: 60, tol_shoot: 1e-9, h: 1e-3, dedup: 1e-4 }
    }
}

/// A lightlike `v` and parameter `s` with `γ_{x,v}(s) = y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullConnection {
    pub v: Vec<f64>,
    pub s: f64,
    pub residual: f64,
}

/// Result of a multi-start search, with enough diagnostics to tell
/// "not null-connected" apart from a search that never converged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullConnectionSearch {
    pub solutions: Vec<NullConnection>,
    pub starts: usize,
    pub converged_starts: usize,
    /// Smallest endpoint error reached by any start.
    pub best_residual: f64,
}

/// Unknown `q ∈ ℝⁿ`: `s = |q|`, `v = σ e₀ + (q/|q|)·e` in the orthonormal frame at `x`.
struct Shooter<'a> {
    metric: &'a MetricField,
    x: &'a [f64],
    y: &'a [f64],
    frame: Vec<Vec<f64>>,
    time_sign: f64,
    h: f64,
}

impl Shooter<'_> {
    fn velocity(&self, q: &[f64]) -> Option<(Vec<f64>, f64)> {
        let s = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(s > 1e-12) {
            return None;
        }
        let mut v: Vec<f64> = self.frame[0].iter().map(|c| self.time_sign * c).collect();
        for (k, qk) in q.iter().enumerate() {
            for (vi, ei) in v.iter_mut().zip(&self.frame[k + 1]) {
                *vi += qk / s * ei;
            }
        }
        Some((v, s))
    }

    fn residual(&self, q: &[f64]) -> Option<Vec<f64>> {
        let (v, s) = self.velocity(q)?;
        let (end, _) = geodesic_endpoint(self.metric, self.x, &v, s, self.h).ok()?;
        Some(self.metric.coord_diff(&end, self.y))
    }

    fn solve(&self, q0: Vec<f64>, max_iter: usize, tol: f64) -> (Vec<f64>, f64) {
        let n = q0.len();
        let mut q = q0;
        let Some(mut r) = self.residual(&q) else {
            return (q, f64::INFINITY);
        };
        let mut norm = DVector::from_vec(r.clone()).norm();
        let mut lambda = 1e-6;
        for _ in 0..max_iter {
            if norm <= tol {
                break;
            }
            let scale = q.iter().map(|c| c * c).sum::<f64>().sqrt().max(1.0);
            let mut jac = DMatrix::<f64>::zeros(r.len(), n);
            let mut ok = true;
            for k in 0..n {
                let step = 1e-7 * scale;
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[k] += step;
                qm[k] -= step;
                match (self.residual(&qp), self.residual(&qm)) {
                    (Some(rp), Some(rm)) => {
                        for i in 0..r.len() {
                            jac[(i, k)] = (rp[i] - rm[i]) / (2.0 * step);
                        }
                    }
                    _ => ok = false,
                }
            }
            if !ok {
                break;
            }
            let rv = DVector::from_vec(r.clone());
            let jtj = jac.transpose() * &jac;
            let jtr = jac.transpose() * &rv;
            let mut improved = false;
            for _ in 0..12 {
                let damped = &jtj + DMatrix::<f64>::identity(n, n) * (lambda * (1.0 + jtj.diagonal().amax()));
                let Some(delta) = damped.lu().solve(&(-&jtr)) else { break };
                let trial: Vec<f64> = q.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
                if let Some(rt) = self.residual(&trial) {
                    let nt = DVector::from_vec(rt.clone()).norm();
                    if nt < norm {
                        q = trial;
                        r = rt;
                        norm = nt;
                        lambda = (lambda * 0.1).max(1e-15);
                        improved = true;
                        break;
                    }
                }
                lambda *= 10.0;
            }
            if !improved {
                break;
            }
        }
        (q, norm)
    }
}

fn initial_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        1 => (0..count).map(|k| vec![if k % 2 == 0 { 1.0 } else { -1.0 }]).collect(),
        2 => (0..count)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            // Fibonacci lattice on S², padded with zeros in higher dimensions.
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    let mut d = vec![0.0; n];
                    d[0] = r * a.cos();
                    d[1] = r * a.sin();
                    d[2] = z;
                    d
                })
                .collect()
        }
    }
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    v.iter().map(|c| c / n).collect()
}

fn shooter<'a>(metric: &'a MetricField, x: &'a [f64], y: &'a [f64], h: f64) -> Result<Shooter<'a>> {
    if x.len() != metric.dim() || y.len() != metric.dim() {
        return Err(Error::Shape { expected: metric.dim(), found: x.len().min(y.len()) });
    }
    metric.diagonal(y)?;
    if metric.coord_distance(x, y) == 0.0 {
        return Err(Error::Invalid("connect_null needs x ≠ y".into()));
    }
    let dt = metric.coord_diff(y, x)[0];
    Ok(Shooter {
        metric,
        x,
        y,
        frame: metric.orthonormal_frame(x)?,
        time_sign: if dt >= 0.0 { 1.0 } else { -1.0 },
        h,
    })
}

/// Multi-start search for all null geodesics from `x` to `y`.
pub fn connect_null(metric: &MetricField, x: &[f64], y: &[f64], opts: &ShootingOptions) -> Result<NullConnectionSearch> {
    let sh = shooter(metric, x, y, opts.h)?;
    let n = metric.dim() - 1;
    let count = opts.starts.unwrap_or(if n == 1 { 2 } else { 64 });
    let diff = metric.coord_diff(y, x);
    let d = metric.diagonal(x)?;
    let s_guess = (diff[0].abs() * (-d[0]).sqrt()).max(1e-3);

    let mut solutions: Vec<NullConnection> = Vec::new();
    let mut converged = 0;
    let mut best = f64::INFINITY;
    for dir in initial_directions(n, count) {
        let q0: Vec<f64> = dir.iter().map(|c| c * s_guess).collect();
        let (q, res) = sh.solve(q0, opts.max_iter, opts.tol_shoot);
        best = best.min(res);
        if res > opts.tol_shoot {
            continue;
        }
        converged += 1;
        let Some((v, s)) = sh.velocity(&q) else { continue };
        let vu = unit(&v);
        let duplicate = solutions.iter().any(|sol| {
            unit(&sol.v).iter().zip(&vu).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() < opts.dedup
        });
        if !duplicate {
            solutions.push(NullConnection { v, s, residual: res });
        }
    }
    Ok(NullConnectionSearch { solutions, starts: count, converged_starts: converged, best_residual: best })
}

/// Single-start shooting from a guessed direction (any nonzero spatial frame direction) and parameter.
pub fn shoot_null(
    metric: &MetricField,
    x: &[f64],
    y: &[f64],
    spatial_guess: &[f64],
    s_guess: f64,
    opts: &ShootingOptions,
) -> Result<Option<NullConnection>> {
    let sh = shooter(metric, x, y, opts.h)?;
    let n = metric.dim() - 1;
    if spatial_guess.len() != n {
        return Err(Error::Shape { expected: n, found: spatial_guess.len() });
    }
    let q0: Vec<f64> = unit(spatial_guess).iter().map(|c| c * s_guess.abs().max(1e-3)).collect();
    let (q, res) = sh.solve(q0, opts.max_iter, opts.tol_shoot);
    if res > opts.tol_shoot {
        return Ok(None);
    }
    Ok(sh.velocity(&q).map(|(v, s)| NullConnection { v, s, residual: res }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ScalarField, Term};
    use std::f64::consts::PI;

    #[test]
    fn minkowski_single_connection() {
        let m = MetricField::minkowski(3);
        let r = connect_null(&m, &[0.0; 4], &[1.0, 1.0, 0.0, 0.0], &ShootingOptions::default()).unwrap();
        assert_eq!(r.solutions.len(), 1);
        let sol = &r.solutions[0];
        assert!((sol.s - 1.0).abs() < 1e-8);
        assert!((sol.v[0] - 1.0).abs() < 1e-8 && (sol.v[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn minkowski_timelike_has_no_connection() {
        let m = MetricField::minkowski(3);
        let r = connect_null(&m, &[0.0; 4], &[2.0, 1.0, 0.0, 0.0], &ShootingOptions::default()).unwrap();
        assert!(r.solutions.is_empty());
        assert!(r.best_residual > 0.1);
    }

    #[test]
    fn cylinder_cut_point_has_two_connections() {
        let c = MetricField::cylinder();
        let r = connect_null(&c, &[0.0, 0.0], &[PI, PI], &ShootingOptions::default()).unwrap();
        assert_eq!(r.solutions.len(), 2);
        let before = connect_null(&c, &[0.0, 0.0], &[2.0, 2.0], &ShootingOptions::default()).unwrap();
        assert_eq!(before.solutions.len(), 1);
    }

    #[test]
    fn past_directed_connection() {
        let m = MetricField::minkowski(2);
        let r = connect_null(&m, &[1.0, 0.0, 0.0], &[0.0, 0.6, 0.8], &ShootingOptions::default()).unwrap();
        assert_eq!(r.solutions.len(), 1);
        assert!(r.solutions[0].v[0] < 0.0);
    }

    #[test]
    fn curved_connection_reproduces_endpoint() {
        let m = MetricField::warped(
            2,
            ScalarField::from_terms(vec![Term::Monomial { coeff: 1.0, powers: vec![] }, Term::Monomial { coeff: 0.2, powers: vec![1] }]),
            ScalarField::constant(1.0),
        );
        let x = [0.1, 0.0, 0.0];
        let v = [1.0 / 1.02f64.sqrt(), 0.6, 0.8];
        let (y, _) = geodesic_endpoint(&m, &x, &v, 0.8, 1e-3).unwrap();
        let opts = ShootingOptions { starts: Some(8), ..Default::default() };
        let sol = shoot_null(&m, &x, &y, &[0.6, 0.8], 0.8, &opts).unwrap().unwrap();
        let (end, _) = geodesic_endpoint(&m, &x, &sol.v, sol.s, 1e-3).unwrap();
        assert!(m.coord_distance(&end, &y) < 1e-8);
        assert!(super::super::null_residual(&m, &x, &sol.v).unwrap() < 1e-12);
        let all = connect_null(&m, &x, &y, &opts).unwrap();
        assert_eq!(all.solutions.len(), 1);
    }
}
