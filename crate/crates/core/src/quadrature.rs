//! Quadrature on the reference triangle `{(xi, eta) : xi, eta >= 0, xi + eta <= 1}`
//! and Gauss-Legendre rules on `[0, 1]`.

use crate::error::{Error, Result};

/// Highest degree served by [`QuadratureRule::new`].
pub const MAX_DEGREE: usize = 30;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    /// Reference coordinates `(xi, eta)`; barycentric `(1 - xi - eta, xi, eta)`.
    pub points: Vec<[f64; 2]>,
    /// Weights summing to the reference area `1/2`.
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// A positive-weight rule exact for polynomials of total degree `degree`.
    pub fn new(degree: usize) -> Result<Self> {
        match degree {
            0 | 1 => Ok(Self::from_area_weights(1, &[([1.0 / 3.0, 1.0 / 3.0], 1.0)])),
            2 => Ok(Self::from_area_weights(
                2,
                &[
                    ([1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
                    ([2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
                    ([1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
                ],
            )),
            3 | 4 => Ok(dunavant4()),
            5 => Ok(dunavant5()),
            6 => Ok(dunavant6()),
            d if d <= MAX_DEGREE => Ok(collapsed(d)),
            d => Err(Error::Quadrature(d)),
        }
    }

    fn from_area_weights(degree: usize, pts: &[([f64; 2], f64)]) -> Self {
        let total: f64 = pts.iter().map(|p| p.1).sum();
        Self {
            points: pts.iter().map(|p| p.0).collect(),
            weights: pts.iter().map(|p| 0.5 * p.1 / total).collect(),
            degree,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrates `f(xi, eta)` over the reference triangle.
    pub fn integrate(&self, mut f: impl FnMut([f64; 2]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

fn orbit3(a: f64, w: f64, out: &mut Vec<([f64; 2], f64)>) {
    let b = 1.0 - 2.0 * a;
    out.push(([a, a], w));
    out.push(([b, a], w));
    out.push(([a, b], w));
}

fn orbit6(a: f64, b: f64, w: f64, out: &mut Vec<([f64; 2], f64)>) {
    let c = 1.0 - a - b;
    for p in [[a, b], [b, a], [b, c], [c, b], [a, c], [c, a]] {
        out.push((p, w));
    }
}

fn dunavant4() -> QuadratureRule {
    let mut pts = Vec::with_capacity(6);
    orbit3(0.445948490915965, 0.223381589678011, &mut pts);
    orbit3(0.091576213509771, 0.109951743655322, &mut pts);
    QuadratureRule::from_area_weights(4, &pts)
}

fn dunavant5() -> QuadratureRule {
    let s15 = 15f64.sqrt();
    let mut pts = vec![([1.0 / 3.0, 1.0 / 3.0], 9.0 / 40.0)];
    orbit3((6.0 + s15) / 21.0, (155.0 + s15) / 1200.0, &mut pts);
    orbit3((6.0 - s15) / 21.0, (155.0 - s15) / 1200.0, &mut pts);
    QuadratureRule::from_area_weights(5, &pts)
}

fn dunavant6() -> QuadratureRule {
    let mut pts = Vec::with_capacity(12);
    orbit3(0.249286745170910, 0.116786275726379, &mut pts);
    orbit3(0.063089014491502, 0.050844906370207, &mut pts);
    orbit6(0.053145049844817, 0.310352451033784, 0.082851075618374, &mut pts);
    QuadratureRule::from_area_weights(6, &pts)
}

/// Tensor Gauss rule pulled back through the Duffy map `xi = a, eta = (1 - a) b`.
fn collapsed(degree: usize) -> QuadratureRule {
    let n = degree.div_ceil(2) + 1;
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let a = x[i];
            points.push([a, (1.0 - a) * x[j]]);
            weights.push(w[i] * w[j] * (1.0 - a));
        }
    }
    QuadratureRule { points, weights, degree }
}

/// `n`-point Gauss-Legendre nodes and weights on `[0, 1]` (weights sum to 1).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            if n == 1 {
                dp = 1.0;
            }
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        // map [-1, 1] -> [0, 1]
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}
