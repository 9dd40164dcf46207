use super::csr::CsrMatrix;
use crate::error::{Error, Result};

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
/// Stops when `||b - A x|| <= tol ||b||`.
pub fn cg_solve(a: &CsrMatrix, b: &[f64], tol: f64, maxit: usize) -> Result<Vec<f64>> {
    cg_solve_from(a, b, vec![0.0; b.len()], tol, maxit)
}

pub fn cg_solve_from(a: &CsrMatrix, b: &[f64], mut x: Vec<f64>, tol: f64, maxit: usize) -> Result<Vec<f64>> {
    let n = a.n_rows();
    if b.len() != n || x.len() != n {
        return Err(Error::Dimension { expected: n, got: b.len() });
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut r = a.matvec(&x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = norm(&r) / bnorm;
    for _ in 0..maxit {
        if res <= tol {
            return Ok(x);
        }
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NotSpd);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm(&r) / bnorm;
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if res <= tol {
        Ok(x)
    } else {
        Err(Error::MaxIter { iterations: maxit, residual: res })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
