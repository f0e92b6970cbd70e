//! Tridiagonal backend for radially reduced problems.
//!
//! The operator u'' + (n-1)/r u' is discretized in flux form,
//!
//!   (Delta_h u)_j = [F_{j+1/2} (u_{j+1}-u_j) - F_{j-1/2} (u_j-u_{j-1})] / V_j,
//!
//! with face coefficient F = r_face^{n-1} / dr and cell volume
//! V_j = (r_{j+1/2}^n - r_{j-1/2}^n)/n. The stencil is exact on
//! quadratics (including at the origin, where the inner flux vanishes)
//! and keeps positive off-diagonal weights, so the discrete maximum
//! principle holds all the way to r = 0.

use crate::grid::{Domain, RadialGrid, ScalarField};

use super::BoundaryData;

struct Coeffs {
    /// flux between nodes j and j+1
    flux: Vec<f64>,
    /// cell volume of node j (meaningful at unknown nodes)
    vol: Vec<f64>,
}

fn coefficients(r: &RadialGrid) -> Coeffs {
    let radii = r.radii();
    let m = radii.len();
    let n = r.dim() as i32;
    let flux: Vec<f64> = (0..m - 1)
        .map(|j| {
            let face = 0.5 * (radii[j] + radii[j + 1]);
            face.powi(n - 1) / (radii[j + 1] - radii[j])
        })
        .collect();
    let vol: Vec<f64> = (0..m)
        .map(|j| {
            let outer = if j + 1 < m { 0.5 * (radii[j] + radii[j + 1]) } else { radii[j] };
            let inner = if j == 0 { radii[0] } else { 0.5 * (radii[j - 1] + radii[j]) };
            (outer.powi(n) - inner.powi(n)) / n as f64
        })
        .collect();
    Coeffs { flux, vol }
}

fn boundary_value(g: &BoundaryData, dim: usize, radius: f64) -> f64 {
    if g.is_zero() {
        return 0.0;
    }
    let mut p = vec![0.0; dim];
    p[0] = radius;
    g.eval(&p)
}

pub(super) fn solve(f: &ScalarField, g: &BoundaryData) -> ScalarField {
    let domain = f.domain().clone();
    let Domain::Radial(r) = &*domain else { unreachable!() };
    let radii = r.radii().to_vec();
    let m = radii.len();
    let rng = r.unknown_range();
    let (lo, hi) = (rng.start, rng.end);
    let k = hi - lo;
    let c = coefficients(r);

    let g_out = boundary_value(g, r.dim(), radii[m - 1]);
    let g_in = if lo > 0 { boundary_value(g, r.dim(), radii[0]) } else { 0.0 };

    // assemble Delta_h u = f over the unknown block
    let mut sub = vec![0.0; k];
    let mut diag = vec![0.0; k];
    let mut sup = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for t in 0..k {
        let j = lo + t;
        let f_up = c.flux[j];
        let f_dn = if j == 0 { 0.0 } else { c.flux[j - 1] };
        let v = c.vol[j];
        diag[t] = -(f_up + f_dn) / v;
        sup[t] = f_up / v;
        sub[t] = f_dn / v;
        rhs[t] = f.values()[j];
        if j == lo && lo > 0 {
            rhs[t] -= sub[t] * g_in;
        }
        if j + 1 == m - 1 {
            rhs[t] -= sup[t] * g_out;
        }
    }

    let sol = thomas(&sub, &diag, &sup, &rhs);
    let mut values = vec![0.0; m];
    if lo > 0 {
        values[0] = g_in;
    }
    values[m - 1] = g_out;
    values[lo..hi].copy_from_slice(&sol);
    ScalarField::new(domain, values).expect("shape preserved")
}

/// Delta_h at the unknown nodes using the stored endpoint values as
/// Dirichlet data; Dirichlet rows report zero.
pub(super) fn apply(u: &ScalarField) -> ScalarField {
    let domain = u.domain().clone();
    let Domain::Radial(r) = &*domain else { unreachable!() };
    let m = r.node_count();
    let rng = r.unknown_range();
    let c = coefficients(r);
    let vals = u.values();
    let mut out = vec![0.0; m];
    for j in rng {
        let f_up = c.flux[j];
        let f_dn = if j == 0 { 0.0 } else { c.flux[j - 1] };
        let up = f_up * (vals[j + 1] - vals[j]);
        let dn = if j == 0 { 0.0 } else { f_dn * (vals[j] - vals[j - 1]) };
        out[j] = (up - dn) / c.vol[j];
    }
    ScalarField::new(domain, out).expect("shape preserved")
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let k = rhs.len();
    let mut c = vec![0.0; k];
    let mut d = vec![0.0; k];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..k {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / denom;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; k];
    x[k - 1] = d[k - 1];
    for i in (0..k - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_solves_small_system() {
        // A = [[2,1,0],[1,3,1],[0,1,2]], x = [1,2,3]
        let sub = [0.0, 1.0, 1.0];
        let diag = [2.0, 3.0, 2.0];
        let sup = [1.0, 1.0, 0.0];
        let rhs = [4.0, 10.0, 8.0];
        let x = thomas(&sub, &diag, &sup, &rhs);
        for (got, want) in x.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }
}
