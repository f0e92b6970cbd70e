//! The explicit entire solutions ("bubbles") of Delta^2 v = v^{(n+4)/(n-4)}
//! on R^n, their Navier projections onto a bounded domain, the pairwise
//! interaction quantity, and the universal constants of the expansion.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{dist, sample, Domain, Point, ScalarField};
use crate::solver::{e_inner, navier_bilaplacian, BoundaryData};
use crate::special::radial_integral_rn;

/// One bubble: center a and concentration lambda (units 1/length).
#[derive(Debug, Clone)]
pub struct BubbleParams {
    pub center: Point,
    pub lambda: f64,
}

impl BubbleParams {
    pub fn new(center: Point, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda {lambda} must be positive")));
        }
        Ok(BubbleParams { center, lambda })
    }
}

/// Weighted multi-bubble ansatz on the simplex: weights alpha_i >= 0
/// with sum 1, centers a_i, scales lambda_i.
#[derive(Debug, Clone)]
pub struct Configuration {
    weights: Vec<f64>,
    centers: Vec<Point>,
    scales: Vec<f64>,
}

impl Configuration {
    pub fn new(weights: Vec<f64>, centers: Vec<Point>, scales: Vec<f64>) -> Result<Self> {
        let p = weights.len();
        if p == 0 || centers.len() != p || scales.len() != p {
            return Err(Error::InvalidParameter(
                "configuration arrays must share a positive length".into(),
            ));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidParameter("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, not 1")));
        }
        if scales.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidParameter("scales must be positive".into()));
        }
        let cfg = Configuration { weights, centers, scales };
        if cfg.p() >= 2 && !(cfg.min_separation() > 0.0) {
            return Err(Error::InvalidParameter("bubble centers must be distinct".into()));
        }
        Ok(cfg)
    }

    /// Equal weights 1/p at a common scale.
    pub fn equal_weights(centers: Vec<Point>, lambda: f64) -> Result<Self> {
        let p = centers.len();
        let scales = vec![lambda; p];
        Configuration::new(vec![1.0 / p as f64; p], centers, scales)
    }

    pub fn p(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn bubble(&self, i: usize) -> BubbleParams {
        BubbleParams { center: self.centers[i].clone(), lambda: self.scales[i] }
    }

    /// d(a) := min_{i != j} |a_i - a_j| (infinite for p = 1).
    pub fn min_separation(&self) -> f64 {
        let p = self.p();
        let mut d = f64::INFINITY;
        for i in 0..p {
            for j in i + 1..p {
                d = d.min(self.centers[i].dist(&self.centers[j]));
            }
        }
        d
    }

    /// The common scale, if all scales agree.
    pub fn common_scale(&self) -> Option<f64> {
        let l0 = self.scales[0];
        self.scales.iter().all(|&l| l == l0).then_some(l0)
    }
}

/// How a stored constant was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    Quadrature,
    DerivedIdentity,
}

/// Universal constants for dimension n.
#[derive(Debug, Clone, Serialize)]
pub struct Constants {
    pub n: usize,
    /// bubble normalization making Delta^2 delta = delta^{(n+4)/(n-4)} exact
    pub c_n: f64,
    /// interaction integral int (1+|y|^2)^{-(n+4)/2}
    pub c_2: f64,
    /// Sobolev-type constant: S^{(n-4)/4} = int delta^{2n/(n-4)}
    pub sobolev: f64,
    /// expansion constant n c_2 c_n^{(n+4)/(n-4)} / ((n-4) S^{(n-4)/4})
    pub c_1: f64,
    pub provenance: ConstantsProvenance,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantsProvenance {
    pub c_n: Provenance,
    pub c_2: Provenance,
    pub sobolev: Provenance,
    pub c_1: Provenance,
}

impl Constants {
    /// Nonlinearity exponent (n+4)/(n-4).
    pub fn crit_power(&self) -> f64 {
        (self.n + 4) as f64 / (self.n - 4) as f64
    }

    /// Critical integrability exponent 2n/(n-4).
    pub fn crit_integrability(&self) -> f64 {
        2.0 * self.n as f64 / (self.n - 4) as f64
    }

    /// Energy threshold b_p = p^{4/(n-4)} S.
    pub fn level(&self, p: usize) -> f64 {
        (p as f64).powf(4.0 / (self.n - 4) as f64) * self.sobolev
    }

    /// S^{(n-4)/4}, the common value of both free-space integrals.
    pub fn sobolev_quarter(&self) -> f64 {
        self.sobolev.powf((self.n - 4) as f64 / 4.0)
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n < 5 {
        Err(Error::InvalidParameter(format!("dimension {n} < 5")))
    } else {
        Ok(())
    }
}

/// The normalization c_n = [n(n-4)(n^2-4)]^{(n-4)/8}; with it the bubble
/// solves the equation exactly (checked by the analytic-Laplacian oracle).
pub fn bubble_constant_cn(n: usize) -> Result<f64> {
    check_dim(n)?;
    let nf = n as f64;
    Ok((nf * (nf - 4.0) * (nf * nf - 4.0)).powf((nf - 4.0) / 8.0))
}

/// Quadrature panel count for the free-space radial integrals; the
/// tan-mapped integrands are smooth, so Simpson reaches ~1e-12 here.
const FREE_SPACE_PANELS: usize = 40_000;

/// c_2 = int_{R^n} (1+|y|^2)^{-(n+4)/2} dy by mapped radial quadrature.
pub fn constant_c2(n: usize) -> Result<f64> {
    check_dim(n)?;
    let pow = -((n + 4) as f64) / 2.0;
    Ok(radial_integral_rn(n, |r| (1.0 + r * r).powf(pow), FREE_SPACE_PANELS))
}

/// S = (int_{R^n} delta_{0,lambda}^{2n/(n-4)})^{4/(n-4)}; scale-invariant
/// in lambda, which the tests exercise.
pub fn constant_sobolev_with_scale(n: usize, lambda: f64) -> Result<f64> {
    check_dim(n)?;
    let c_n = bubble_constant_cn(n)?;
    let nf = n as f64;
    let q = 2.0 * nf / (nf - 4.0);
    let integral = radial_integral_rn(
        n,
        |r| (c_n * (lambda / (1.0 + lambda * lambda * r * r)).powf((nf - 4.0) / 2.0)).powf(q),
        FREE_SPACE_PANELS,
    );
    Ok(integral.powf(4.0 / (nf - 4.0)))
}

pub fn constant_sobolev(n: usize) -> Result<f64> {
    constant_sobolev_with_scale(n, 1.0)
}

/// int_{R^n} (Delta delta_{0,1})^2, the other route to S^{(n-4)/4}.
pub fn quad_energy_free_space(n: usize) -> Result<f64> {
    check_dim(n)?;
    let b = BubbleParams::new(Point::origin(n), 1.0)?;
    let profile = RadialTerms::bubble_profile(&b, n).laplacian(n);
    Ok(radial_integral_rn(
        n,
        |r| {
            let d = profile.eval(r);
            d * d
        },
        FREE_SPACE_PANELS,
    ))
}

static CONSTANTS_CACHE: OnceLock<Mutex<HashMap<usize, Arc<Constants>>>> = OnceLock::new();

/// All constants for dimension n, computed once and cached.
pub fn constants(n: usize) -> Result<Arc<Constants>> {
    check_dim(n)?;
    let cache = CONSTANTS_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(c) = cache.lock().unwrap().get(&n) {
        return Ok(c.clone());
    }
    let c_n = bubble_constant_cn(n)?;
    let c_2 = constant_c2(n)?;
    let sobolev = constant_sobolev(n)?;
    let nf = n as f64;
    let c_1 = nf * c_2 * c_n.powf((nf + 4.0) / (nf - 4.0))
        / ((nf - 4.0) * sobolev.powf((nf - 4.0) / 4.0));
    let consts = Arc::new(Constants {
        n,
        c_n,
        c_2,
        sobolev,
        c_1,
        provenance: ConstantsProvenance {
            c_n: Provenance::ClosedForm,
            c_2: Provenance::Quadrature,
            sobolev: Provenance::Quadrature,
            c_1: Provenance::DerivedIdentity,
        },
    });
    cache.lock().unwrap().insert(n, consts.clone());
    Ok(consts)
}

/// delta_{a,lambda}(x) = c_n (lambda / (1 + lambda^2 |x-a|^2))^{(n-4)/2}.
pub fn delta(b: &BubbleParams, x: &[f64], n: usize) -> f64 {
    let c_n = bubble_constant_cn(n).expect("dimension checked by caller");
    let r2 = dist(x, b.center.coords()).powi(2);
    c_n * (b.lambda / (1.0 + b.lambda * b.lambda * r2)).powf((n as f64 - 4.0) / 2.0)
}

/// delta^{(n+4)/(n-4)} evaluated directly from the profile.
pub fn delta_pow_crit(b: &BubbleParams, x: &[f64], n: usize) -> f64 {
    let c_n = bubble_constant_cn(n).expect("dimension checked by caller");
    let r2 = dist(x, b.center.coords()).powi(2);
    let nf = n as f64;
    c_n.powf((nf + 4.0) / (nf - 4.0))
        * (b.lambda / (1.0 + b.lambda * b.lambda * r2)).powf((nf + 4.0) / 2.0)
}

/// Sum of terms coef * (1 + lambda^2 r^2)^{-gamma/2}; closed under the
/// radial Laplacian, which is how the analytic Delta and Delta^2 of the
/// bubble profile are produced.
#[derive(Debug, Clone)]
pub(crate) struct RadialTerms {
    lambda: f64,
    terms: Vec<(f64, f64)>, // (coef, gamma)
}

impl RadialTerms {
    pub(crate) fn bubble_profile(b: &BubbleParams, n: usize) -> Self {
        let c_n = bubble_constant_cn(n).expect("dimension checked by caller");
        let nf = n as f64;
        RadialTerms {
            lambda: b.lambda,
            terms: vec![(c_n * b.lambda.powf((nf - 4.0) / 2.0), nf - 4.0)],
        }
    }

    /// Delta (1+l^2 r^2)^{-g/2} = l^2 g (g+2-n) (..)^{-(g+2)/2}
    ///                           - l^2 g (g+2)   (..)^{-(g+4)/2}.
    pub(crate) fn laplacian(&self, n: usize) -> Self {
        let l2 = self.lambda * self.lambda;
        let nf = n as f64;
        let mut terms = Vec::with_capacity(self.terms.len() * 2);
        for &(c, g) in &self.terms {
            terms.push((c * l2 * g * (g + 2.0 - nf), g + 2.0));
            terms.push((-c * l2 * g * (g + 2.0), g + 4.0));
        }
        RadialTerms { lambda: self.lambda, terms }
    }

    pub(crate) fn eval(&self, r: f64) -> f64 {
        let base = 1.0 + self.lambda * self.lambda * r * r;
        self.terms.iter().map(|&(c, g)| c * base.powf(-g / 2.0)).sum()
    }
}

/// Closed-form Delta delta_{a,lambda} at x, from the radial power rule.
pub fn delta_laplacian_analytic(b: &BubbleParams, x: &[f64], n: usize) -> f64 {
    let r = dist(x, b.center.coords());
    RadialTerms::bubble_profile(b, n).laplacian(n).eval(r)
}

/// Closed-form Delta^2 delta_{a,lambda} at x (two analytic Laplacians).
pub fn delta_bilaplacian_analytic(b: &BubbleParams, x: &[f64], n: usize) -> f64 {
    let r = dist(x, b.center.coords());
    RadialTerms::bubble_profile(b, n).laplacian(n).laplacian(n).eval(r)
}

fn validate_center(domain: &Domain, b: &BubbleParams) -> Result<()> {
    if b.center.dim() != domain.dim() {
        return Err(Error::InvalidParameter("bubble center has wrong dimension".into()));
    }
    if let Domain::Radial(r) = domain {
        let off = b.center.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
        if off > 1e-12 * r.r_max() {
            return Err(Error::InvalidParameter(
                "radial reduction requires the bubble centered at the origin".into(),
            ));
        }
        return Ok(());
    }
    if !domain.contains(&b.center) {
        return Err(Error::OutsideDomain);
    }
    Ok(())
}

/// The projected bubble: the Navier solution of
/// Delta^2 P delta = delta^{(n+4)/(n-4)} with P delta = Delta P delta = 0.
pub fn project_bubble(domain: &Arc<Domain>, b: &BubbleParams) -> Result<ScalarField> {
    validate_center(domain, b)?;
    let n = domain.dim();
    let f = sample(domain, |x| delta_pow_crit(b, x, n));
    let (u, _) = navier_bilaplacian(&f, &BoundaryData::Zero, &BoundaryData::Zero)?;
    Ok(u)
}

/// The defect phi_{a,lambda} = delta - P delta, sampled on the domain.
pub fn phi(domain: &Arc<Domain>, b: &BubbleParams) -> Result<ScalarField> {
    let n = domain.dim();
    let p = project_bubble(domain, b)?;
    let d = sample(domain, |x| delta(b, x, n));
    d.add_scaled(&p, -1.0)
}

/// Interaction quantity eps_ij of two bubbles.
pub fn eps_ij(bi: &BubbleParams, bj: &BubbleParams) -> f64 {
    let ratio = bi.lambda / bj.lambda + bj.lambda / bi.lambda;
    let sep = bi.center.dist(&bj.center);
    1.0 / (ratio + bi.lambda * bj.lambda * sep * sep)
}

/// Outcome of the neighborhood-of-infinity membership checks.
#[derive(Debug, Clone, Serialize)]
pub struct VNeighborhoodReport {
    pub eps: f64,
    /// lambda_i * dist(a_i, boundary) per bubble
    pub lambda_dist: Vec<f64>,
    pub lambda_dist_ok: bool,
    /// largest pairwise eps_ij (zero when p = 1)
    pub max_eps_ij: f64,
    pub eps_ij_ok: bool,
    /// E-distance || u - sum P delta / || sum P delta || || when u given
    pub e_distance: Option<f64>,
    pub satisfied: bool,
}

/// Checks the V(p, eps) conditions for a configuration, optionally
/// measuring the E-distance of a supplied unit-norm field to the
/// normalized unweighted bubble sum.
pub fn check_v_p_eps(
    domain: &Arc<Domain>,
    cfg: &Configuration,
    eps: f64,
    u: Option<&ScalarField>,
) -> Result<VNeighborhoodReport> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(
            "eps must be positive (1/eps enters the scale condition)".into(),
        ));
    }
    let p = cfg.p();
    let mut lambda_dist = Vec::with_capacity(p);
    for i in 0..p {
        let d = domain.dist_to_boundary(&cfg.centers()[i])?;
        lambda_dist.push(cfg.scales()[i] * d);
    }
    let lambda_dist_ok = lambda_dist.iter().all(|&v| v >= 1.0 / eps);

    let mut max_eps_ij = 0.0f64;
    for i in 0..p {
        for j in i + 1..p {
            max_eps_ij = max_eps_ij.max(eps_ij(&cfg.bubble(i), &cfg.bubble(j)));
        }
    }
    let eps_ij_ok = max_eps_ij < eps;

    let e_distance = match u {
        None => None,
        Some(u) => {
            let mut sum = ScalarField::zeros(domain);
            for i in 0..p {
                let pd = project_bubble(domain, &cfg.bubble(i))?;
                sum = sum.add_scaled(&pd, 1.0)?;
            }
            let norm = e_inner(&sum, &sum)?.max(0.0).sqrt();
            let diff = u.add_scaled(&sum, -1.0 / norm)?;
            Some(e_inner(&diff, &diff)?.max(0.0).sqrt())
        }
    };

    let satisfied = lambda_dist_ok && eps_ij_ok && e_distance.map(|d| d < eps).unwrap_or(true);
    Ok(VNeighborhoodReport {
        eps,
        lambda_dist,
        lambda_dist_ok,
        max_eps_ij,
        eps_ij_ok,
        e_distance,
        satisfied,
    })
}
