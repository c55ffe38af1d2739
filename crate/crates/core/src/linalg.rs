//! Matrix-free conjugate gradients for the lattice first-passage systems.
//!
//! Reductions are computed over fixed-size chunks and summed in chunk
//! order, so results do not depend on the number of rayon workers.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::Lattice;

const CHUNK: usize = 4096;

/// `A = I − P + κ·e_T e_Tᵀ` on a lattice, where `P` is the jump-chain
/// transition matrix. With `kappa = None` the target row and column are
/// removed (x_T ≡ 0), which is the hitting-time system.
pub(crate) struct PairOperator<'a> {
    lattice: &'a Lattice,
    kappa: Option<f64>,
}

impl<'a> PairOperator<'a> {
    pub(crate) fn hitting(lattice: &'a Lattice) -> Self {
        Self { lattice, kappa: None }
    }

    pub(crate) fn absorbing(lattice: &'a Lattice, kappa: f64) -> Self {
        Self { lattice, kappa: Some(kappa) }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let lat = self.lattice;
        let inv_deg = 1.0 / lat.degree() as f64;
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let base = c * CHUNK;
            for (k, o) in chunk.iter_mut().enumerate() {
                let i = base + k;
                let xi = x[i];
                let s: f64 = lat.slots(i).iter().map(|&j| xi - x[j as usize]).sum();
                *o = inv_deg * s;
            }
        });
        let t = lat.target();
        match self.kappa {
            None => out[t] = 0.0,
            Some(kappa) => out[t] += kappa * x[t],
        }
    }

    /// Max-norm residual attainable in f64 for an iterate of size `x`.
    fn rounding_floor(&self, x: &[f64]) -> f64 {
        let t = self.lattice.target();
        let scale = 2.0 * max_abs(x) + self.kappa.map_or(0.0, |k| k * x[t].abs());
        32.0 * f64::EPSILON * scale
    }

    fn rhs(&self) -> Vec<f64> {
        let mut b = vec![1.0; self.lattice.len()];
        if self.kappa.is_none() {
            b[self.lattice.target()] = 0.0;
        }
        b
    }
}

pub(crate) struct Solution {
    pub x: Vec<f64>,
    pub residual: f64,
    /// Tolerance actually enforced.
    pub tolerance: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Solves `A x = 1` (with `x_T = 0` in hitting mode) to a relative max-norm
/// residual of `tol`, or to the rounding floor of the residual evaluation
/// when that is larger. Since `A` is an M-matrix with `A⁻¹·1 = x`, the
/// max-norm error is at most `residual · max(x)`.
pub(crate) fn solve(op: &PairOperator<'_>, tol: f64, max_iter: usize) -> Result<Solution> {
    let n = op.lattice.len();
    let b = op.rhs();
    let b_norm = max_abs(&b);
    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut residual = max_abs(&r) / b_norm;
    let mut iterations = 0;

    while iterations < max_iter {
        let tolerance = tol.max(op.rounding_floor(&x) / b_norm);
        if residual <= tolerance {
            // Confirm against the true residual; the recursive one drifts.
            op.apply(&x, &mut ap);
            r.par_iter_mut().zip(b.par_iter()).zip(ap.par_iter()).for_each(|((ri, bi), ai)| *ri = bi - ai);
            residual = max_abs(&r) / b_norm;
            if residual <= tolerance {
                return Ok(Solution { x, residual, tolerance, iterations });
            }
            p.copy_from_slice(&r);
            rr = dot(&r, &r);
        }
        op.apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        x.par_iter_mut().zip(p.par_iter()).for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut().zip(ap.par_iter()).for_each(|(ri, ai)| *ri -= alpha * ai);
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        rr = rr_next;
        p.par_iter_mut().zip(r.par_iter()).for_each(|(pi, ri)| *pi = ri + beta * *pi);
        residual = max_abs(&r) / b_norm;
        iterations += 1;
    }
    op.apply(&x, &mut ap);
    let residual = b.iter().zip(&ap).fold(0.0_f64, |m, (bi, ai)| m.max((bi - ai).abs())) / b_norm;
    let tolerance = tol.max(op.rounding_floor(&x) / b_norm);
    if residual <= tolerance {
        return Ok(Solution { x, residual, tolerance, iterations });
    }
    Err(Error::NotConverged { iterations, residual })
}
