//! Green's function of the bilaplacian under Navier conditions, through
//! its regular part H: for a source x in the domain, H(x, .) solves
//! Delta^2 H = 0 with H = c_n |x-y|^{4-n} and
//! Delta_y H = -2(n-4) c_n |x-y|^{2-n} on the boundary, and
//! G(x, y) = c_n |x-y|^{4-n} - H(x, y).
//!
//! H is computed directly from smooth boundary data; the Dirac source is
//! never discretized. The defect expansion
//! phi_{a,lambda} = lambda^{-(n-4)/2} H(a, .) + O(lambda^{-n/2}) doubles
//! as a cross-validation of the boundary data exponents.

use std::sync::Arc;

use crate::bubble::{bubble_constant_cn, phi, BubbleParams};
use crate::error::{Error, Result};
use crate::grid::{dist, Domain, Point, ScalarField};
use crate::solver::{navier_bilaplacian, BoundaryData};
use crate::special::loglog_slope;

/// Regular part of the Green function for one source point.
#[derive(Debug, Clone)]
pub struct GreenSample {
    source: Point,
    h_field: ScalarField,
    h_diag: f64,
    c_n: f64,
}

impl GreenSample {
    pub fn source(&self) -> &Point {
        &self.source
    }

    /// H(x, .) over the domain nodes.
    pub fn h_field(&self) -> &ScalarField {
        &self.h_field
    }

    /// H(x, x): finite (regular part), positive inside.
    pub fn h_diag(&self) -> f64 {
        self.h_diag
    }

    pub fn h_at(&self, y: &Point) -> Result<f64> {
        self.h_field.interpolate(y)
    }

    /// G(x, y) = c_n |x-y|^{4-n} - H(x, y); y must differ from the source.
    pub fn g_at(&self, y: &Point) -> Result<f64> {
        let r = self.source.dist(y);
        if r == 0.0 {
            return Err(Error::InvalidParameter("G(x, x) is singular".into()));
        }
        let n = self.source.dim() as i32;
        Ok(self.c_n * r.powi(4 - n) - self.h_at(y)?)
    }

    /// G(x, .) at a domain node (singular part evaluated analytically).
    pub fn g_at_node(&self, i: usize) -> f64 {
        let mut pos = vec![0.0; self.source.dim()];
        self.h_field.domain().node_position(i, &mut pos);
        let r = dist(self.source.coords(), &pos);
        let n = self.source.dim() as i32;
        if r == 0.0 {
            f64::INFINITY
        } else {
            self.c_n * r.powi(4 - n) - self.h_field.values()[i]
        }
    }
}

/// Computes H(x, .) by one Navier solve with the analytic boundary data
/// of the singular part. The Delta H datum carries exponent 2-n, the
/// radial Laplacian of |x-y|^{4-n}.
pub fn regular_part(domain: &Arc<Domain>, x: &Point) -> Result<GreenSample> {
    if !domain.contains(x) {
        return Err(Error::OutsideDomain);
    }
    if let Domain::Radial(r) = &**domain {
        let off = x.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
        if off > 1e-12 * r.r_max() {
            return Err(Error::InvalidParameter(
                "radial reduction computes H only for the centered source".into(),
            ));
        }
    }
    let n = domain.dim();
    let c_n = bubble_constant_cn(n)?;
    let xc = x.coords().to_vec();
    let g1 = move |y: &[f64]| c_n * dist(&xc, y).powi(4 - n as i32);
    let xc2 = x.coords().to_vec();
    let g2 = move |y: &[f64]| -2.0 * (n as f64 - 4.0) * c_n * dist(&xc2, y).powi(2 - n as i32);

    let zero = ScalarField::zeros(domain);
    let (h_field, _) =
        navier_bilaplacian(&zero, &BoundaryData::Func(&g1), &BoundaryData::Func(&g2))?;
    let h_diag = h_field.interpolate(x)?;
    Ok(GreenSample { source: x.clone(), h_field, h_diag, c_n })
}

/// One entry of the defect-decay sweep.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DecayEntry {
    pub lambda: f64,
    /// || lambda^{(n-4)/2} phi_{a,lambda} - H(a,.) ||_inf over nodes
    /// with |y - a| >= h
    pub sup_error: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct DecayReport {
    pub entries: Vec<DecayEntry>,
    /// least-squares log-log slope of sup_error against lambda
    pub slope: f64,
    /// lambda^{(n-4)/2} * lambda^{-n/2} = lambda^{-2} for every n
    pub expected_slope: f64,
}

/// Sweeps lambda and measures how fast the rescaled defect converges to
/// the regular part; the expected decay order is -2 in any dimension.
pub fn validate_lemma_a1(domain: &Arc<Domain>, a: &Point, lambdas: &[f64]) -> Result<DecayReport> {
    if lambdas.len() < 3 {
        return Err(Error::InvalidParameter(
            "decay fit needs at least 3 lambda values".into(),
        ));
    }
    let n = domain.dim();
    let h = domain.spacing();
    let green = regular_part(domain, a)?;
    let h_vals = green.h_field().values();

    let mut pos = vec![0.0; n];
    let keep: Vec<usize> = (0..domain.node_count())
        .filter(|&i| {
            domain.node_position(i, &mut pos);
            dist(&pos, a.coords()) >= h
        })
        .collect();

    let mut entries = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let b = BubbleParams::new(a.clone(), lambda)?;
        let defect = phi(domain, &b)?;
        let scale = lambda.powf((n as f64 - 4.0) / 2.0);
        let sup = keep
            .iter()
            .map(|&i| (scale * defect.values()[i] - h_vals[i]).abs())
            .fold(0.0f64, f64::max);
        entries.push(DecayEntry { lambda, sup_error: sup });
    }
    let slope = loglog_slope(
        &entries.iter().map(|e| e.lambda).collect::<Vec<_>>(),
        &entries.iter().map(|e| e.sup_error).collect::<Vec<_>>(),
    );
    Ok(DecayReport { entries, slope, expected_slope: -2.0 })
}
