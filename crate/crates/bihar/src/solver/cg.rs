//! Conjugate gradient backend for masked lattices: solves -Delta_h u = -f
//! on the inside node set, which is symmetric positive definite; ghost
//! legs carry Dirichlet data folded into the right-hand side.

use crate::error::{Error, Result};
use crate::grid::{Domain, MaskedDomain, ScalarField};

use super::{BoundaryData, CG_TOLERANCE};

pub(super) fn solve(f: &ScalarField, g: &BoundaryData) -> Result<(ScalarField, usize)> {
    let domain = f.domain().clone();
    let Domain::Masked(m) = &*domain else { unreachable!() };
    let dim = m.parent().dim();
    let h = m.parent().spacing();
    let inv_h2 = 1.0 / (h * h);
    let nn = m.node_count();

    let mut b: Vec<f64> = f.values().iter().map(|&v| -v).collect();
    if !g.is_zero() {
        for i in 0..nn {
            for leg in m.stencil(i) {
                if let Err(gh) = leg {
                    b[i] += g.eval(m.ghost_point(gh)) * inv_h2;
                }
            }
        }
    }

    let bnorm = l2(&b);
    if bnorm == 0.0 {
        return Ok((ScalarField::new(domain, vec![0.0; nn])?, 0));
    }

    let cap = 50 * m.parent().nodes_per_axis() * dim;
    let mut x = vec![0.0; nn];
    let mut r = b;
    let mut p = r.clone();
    let mut ap = vec![0.0; nn];
    let mut rs = dot(&r, &r);
    for it in 1..=cap {
        apply_neg_laplacian(m, dim, inv_h2, &p, &mut ap);
        let alpha = rs / dot(&p, &ap);
        for i in 0..nn {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r);
        if rs_new.sqrt() <= CG_TOLERANCE * bnorm {
            return Ok((ScalarField::new(domain, x)?, it));
        }
        let beta = rs_new / rs;
        for i in 0..nn {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
    }
    Err(Error::SolverDiverged { iterations: cap, residual: rs.sqrt() / bnorm })
}

fn apply_neg_laplacian(m: &MaskedDomain, dim: usize, inv_h2: f64, x: &[f64], out: &mut [f64]) {
    let diag = 2.0 * dim as f64;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = diag * x[i];
        for leg in m.stencil(i) {
            if let Ok(j) = leg {
                acc -= x[j];
            }
        }
        *o = acc * inv_h2;
    }
}

/// Delta_h with ghost data g at the first-order boundary projections.
pub(super) fn apply(u: &ScalarField, g: &BoundaryData) -> ScalarField {
    let domain = u.domain().clone();
    let Domain::Masked(m) = &*domain else { unreachable!() };
    let dim = m.parent().dim();
    let h = m.parent().spacing();
    let inv_h2 = 1.0 / (h * h);
    let vals = u.values();
    let mut out = vec![0.0; vals.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = -2.0 * dim as f64 * vals[i];
        for leg in m.stencil(i) {
            match leg {
                Ok(j) => acc += vals[j],
                Err(gh) => acc += g.eval(m.ghost_point(gh)),
            }
        }
        *o = acc * inv_h2;
    }
    ScalarField::new(domain, out).expect("shape preserved")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
