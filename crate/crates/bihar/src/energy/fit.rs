//! Optimal bubble representation: minimize || u - sum a_i P delta_{b_i, mu_i} ||_E
//! over amplitudes, centers and scales. Amplitudes are re-solved
//! linearly each round; centers and log-scales take damped Gauss-Newton
//! steps with forward-difference Jacobians (one Navier solve per
//! parameter and round).

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::Serialize;

use crate::bubble::{bubble_constant_cn, project_bubble, BubbleParams};
use crate::error::{Error, Result};
use crate::grid::{Domain, Point, ScalarField};
use crate::solver::{apply_laplacian, BoundaryData};
use crate::special::solve_dense;

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub max_rounds: usize,
    /// minimal separation of the initial maxima, in lattice spacings
    pub separation_cells: f64,
    /// forward-difference step for centers, in lattice spacings
    pub center_step_cells: f64,
    /// forward-difference step for ln(scale)
    pub log_scale_step: f64,
    /// stop when the residual improves by less than this relative amount
    pub tol: f64,
    /// shuffles the initialization order (the fitted set must not care)
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_rounds: 40,
            separation_cells: 3.0,
            center_step_cells: 0.02,
            log_scale_step: 1e-3,
            tol: 1e-12,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub centers: Vec<Vec<f64>>,
    pub scales: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// || u - sum a_i P delta_i ||_E
    pub residual_e: f64,
    /// residual relative to || u ||_E
    pub relative_residual: f64,
    pub converged: bool,
    pub rounds: usize,
}

impl FitResult {
    pub fn center_points(&self) -> Vec<Point> {
        self.centers.iter().map(|c| Point::new(c.clone())).collect()
    }
}

struct FitWorkspace {
    domain: Arc<Domain>,
    u_lap: Vec<f64>,
    u_norm: f64,
}

impl FitWorkspace {
    fn e_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        ScalarField::quadrature_dot(&self.domain, a, b)
    }

    /// P delta for trial parameters, with its stencil Laplacian.
    fn basis(&self, center: &[f64], log_scale: f64) -> Result<(ScalarField, Vec<f64>)> {
        let b = BubbleParams::new(Point::new(center.to_vec()), log_scale.exp())?;
        let field = project_bubble(&self.domain, &b)?;
        let lap = apply_laplacian(&field, &BoundaryData::Zero).values().to_vec();
        Ok((field, lap))
    }

    /// Best amplitudes for fixed bubbles: Gram solve in E.
    fn solve_amplitudes(&self, laps: &[Vec<f64>]) -> Result<Vec<f64>> {
        let p = laps.len();
        let mut gram = vec![0.0; p * p];
        let mut rhs = vec![0.0; p];
        for i in 0..p {
            for j in i..p {
                let v = self.e_dot(&laps[i], &laps[j]);
                gram[i * p + j] = v;
                gram[j * p + i] = v;
            }
            rhs[i] = self.e_dot(&laps[i], &self.u_lap);
        }
        solve_dense(gram, rhs, p)
            .ok_or_else(|| Error::InvalidParameter("degenerate bubble basis in the fit".into()))
    }

    /// || u - sum a_i basis_i ||_E from the stored Laplacians.
    fn residual_norm(&self, laps: &[Vec<f64>], amps: &[f64]) -> f64 {
        let mut r = self.u_lap.clone();
        for (lap, &a) in laps.iter().zip(amps) {
            for (rv, lv) in r.iter_mut().zip(lap) {
                *rv -= a * lv;
            }
        }
        self.e_dot(&r, &r).max(0.0).sqrt()
    }
}

/// Strict local maxima of the field (every stencil neighbor smaller;
/// legs leaving the node set compare against zero), sorted by value.
fn local_maxima(u: &ScalarField) -> Vec<(usize, f64)> {
    let domain = u.domain();
    let vals = u.values();
    let mut peaks = Vec::new();
    match &**domain {
        Domain::Box(g) => {
            let dim = g.dim();
            let nax = g.nodes_per_axis();
            let mut strides = vec![1usize; dim];
            for k in (0..dim.saturating_sub(1)).rev() {
                strides[k] = strides[k + 1] * nax;
            }
            let mut idx = vec![0usize; dim];
            'outer: for flat in 0..vals.len() {
                let v = vals[flat];
                if v <= 0.0 {
                    continue;
                }
                g.decode(flat, &mut idx);
                for k in 0..dim {
                    let lo = if idx[k] > 0 { vals[flat - strides[k]] } else { 0.0 };
                    let hi = if idx[k] < nax - 1 { vals[flat + strides[k]] } else { 0.0 };
                    if lo >= v || hi >= v {
                        continue 'outer;
                    }
                }
                peaks.push((flat, v));
            }
        }
        Domain::Masked(m) => {
            'outer: for i in 0..vals.len() {
                let v = vals[i];
                if v <= 0.0 {
                    continue;
                }
                for leg in m.stencil(i) {
                    let nb = match leg {
                        Ok(j) => vals[j],
                        Err(_) => 0.0,
                    };
                    if nb >= v {
                        continue 'outer;
                    }
                }
                peaks.push((i, v));
            }
        }
        Domain::Radial(_) => {
            let mlen = vals.len();
            for j in 0..mlen {
                let v = vals[j];
                if v <= 0.0 {
                    continue;
                }
                let lo = if j > 0 { vals[j - 1] } else { f64::NEG_INFINITY };
                let hi = if j + 1 < mlen { vals[j + 1] } else { 0.0 };
                if lo < v && hi < v {
                    peaks.push((j, v));
                }
            }
        }
    }
    peaks.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    peaks
}

/// Fits p bubbles to u. Returns the best parameters found; `converged`
/// is false when the round cap was exhausted while still improving.
pub fn fit_representation(u: &ScalarField, p: usize, opts: &FitOptions) -> Result<FitResult> {
    if p == 0 {
        return Err(Error::InvalidParameter("fit needs p >= 1".into()));
    }
    let domain = u.domain().clone();
    let n = domain.dim();
    let radial = matches!(&*domain, Domain::Radial(_));
    if radial && p > 1 {
        return Err(Error::InvalidParameter(
            "radial reduction carries a single centered bubble".into(),
        ));
    }
    let h = domain.spacing();
    let c_n = bubble_constant_cn(n)?;
    let mut ws = FitWorkspace {
        domain: domain.clone(),
        u_lap: apply_laplacian(u, &BoundaryData::Zero).values().to_vec(),
        u_norm: 0.0,
    };
    ws.u_norm = ws.e_dot(&ws.u_lap, &ws.u_lap).max(0.0).sqrt();

    // initialization: largest well-separated maxima, order shuffled by seed
    let peaks = local_maxima(u);
    let min_sep = opts.separation_cells * h;
    let mut chosen: Vec<usize> = Vec::new();
    let mut pos = vec![0.0; n];
    let mut chosen_pos: Vec<Vec<f64>> = Vec::new();
    for &(idx, _) in &peaks {
        domain.node_position(idx, &mut pos);
        if chosen_pos.iter().all(|q| crate::grid::dist(q, &pos) >= min_sep) {
            chosen.push(idx);
            chosen_pos.push(pos.clone());
            if chosen.len() == p {
                break;
            }
        }
    }
    if chosen.len() < p {
        return Err(Error::InvalidParameter(format!(
            "found {} separated maxima, need {p}",
            chosen.len()
        )));
    }
    let mut order: Vec<usize> = (0..p).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
    order.shuffle(&mut rng);

    let mut centers: Vec<Vec<f64>> = order.iter().map(|&k| chosen_pos[k].clone()).collect();
    let mut log_scales: Vec<f64> = order
        .iter()
        .map(|&k| {
            let peak = u.values()[chosen[k]];
            ((peak / c_n).powf(2.0 / (n as f64 - 4.0))).max(1.0 / (10.0 * h)).ln()
        })
        .collect();
    if order.iter().any(|&k| u.values()[chosen[k]] <= 0.0) {
        return Err(Error::InvalidParameter("peak values must be positive".into()));
    }

    let rebuild = |ws: &FitWorkspace, centers: &[Vec<f64>], log_scales: &[f64]| -> Result<(Vec<ScalarField>, Vec<Vec<f64>>)> {
        let mut fields = Vec::with_capacity(p);
        let mut laps = Vec::with_capacity(p);
        for i in 0..p {
            let (f, l) = ws.basis(&centers[i], log_scales[i])?;
            fields.push(f);
            laps.push(l);
        }
        Ok((fields, laps))
    };

    let (_, mut laps) = rebuild(&ws, &centers, &log_scales)?;
    let mut amps = ws.solve_amplitudes(&laps)?;
    let mut res = ws.residual_norm(&laps, &amps);

    // the peak-based scale guess underestimates mu when the planted
    // amplitudes sit below 1 or the boundary defect is large; scan a
    // few common multipliers and keep the least-squares-best one before
    // handing over to Gauss-Newton
    for factor in [2.0f64, 4.0, 8.0, 16.0] {
        let trial: Vec<f64> = log_scales.iter().map(|l| l + factor.ln()).collect();
        let Ok((_, laps_t)) = rebuild(&ws, &centers, &trial) else { continue };
        let Ok(amps_t) = ws.solve_amplitudes(&laps_t) else { continue };
        let res_t = ws.residual_norm(&laps_t, &amps_t);
        if res_t < res {
            log_scales = trial;
            laps = laps_t;
            amps = amps_t;
            res = res_t;
        }
    }

    // parameters per bubble: dim center coordinates (frozen on radial
    // meshes) plus one log-scale
    let per_bubble = if radial { 1 } else { n + 1 };
    let n_params = p * per_bubble;
    let mut converged = false;
    let mut rounds = 0;

    for _round in 0..opts.max_rounds {
        rounds += 1;
        // forward-difference Jacobian of the residual wrt (b, ln mu)
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n_params);
        let mut ok = true;
        'jac: for i in 0..p {
            let steps: Vec<(usize, f64)> = if radial {
                vec![(n, opts.log_scale_step)]
            } else {
                (0..n)
                    .map(|k| (k, opts.center_step_cells * h))
                    .chain(std::iter::once((n, opts.log_scale_step)))
                    .collect()
            };
            for (coord, step) in steps {
                let mut c2 = centers[i].clone();
                let mut ls2 = log_scales[i];
                if coord < n {
                    c2[coord] += step;
                } else {
                    ls2 += step;
                }
                let per = match ws.basis(&c2, ls2) {
                    Ok((_, lap)) => lap,
                    Err(_) => {
                        ok = false;
                        break 'jac;
                    }
                };
                // d residual / d theta = -alpha_i d(P delta_i)/d theta
                let col: Vec<f64> = per
                    .iter()
                    .zip(&laps[i])
                    .map(|(a, b)| -amps[i] * (a - b) / step)
                    .collect();
                cols.push(col);
            }
        }
        if !ok {
            break;
        }

        // residual Laplacian
        let mut r_lap = ws.u_lap.clone();
        for (lap, &a) in laps.iter().zip(&amps) {
            for (rv, lv) in r_lap.iter_mut().zip(lap) {
                *rv -= a * lv;
            }
        }

        let mut m = vec![0.0; n_params * n_params];
        let mut rhs = vec![0.0; n_params];
        for a in 0..n_params {
            for b in a..n_params {
                let v = ws.e_dot(&cols[a], &cols[b]);
                m[a * n_params + b] = v;
                m[b * n_params + a] = v;
            }
            rhs[a] = -ws.e_dot(&cols[a], &r_lap);
        }
        let Some(step) = solve_dense(m, rhs, n_params) else {
            break;
        };

        // damped update
        let mut accepted = false;
        let mut damp = 1.0;
        for _ in 0..10 {
            let mut c_try = centers.clone();
            let mut ls_try = log_scales.clone();
            for i in 0..p {
                if radial {
                    ls_try[i] += damp * step[i];
                } else {
                    for k in 0..n {
                        c_try[i][k] += damp * step[i * per_bubble + k];
                    }
                    ls_try[i] += damp * step[i * per_bubble + n];
                }
            }
            let inside = c_try
                .iter()
                .all(|c| radial || domain.contains(&Point::new(c.clone())));
            if inside {
                if let Ok((_, laps_try)) = rebuild(&ws, &c_try, &ls_try) {
                    if let Ok(amps_try) = ws.solve_amplitudes(&laps_try) {
                        let res_try = ws.residual_norm(&laps_try, &amps_try);
                        if res_try < res {
                            let improvement = (res - res_try) / ws.u_norm.max(f64::MIN_POSITIVE);
                            centers = c_try;
                            log_scales = ls_try;
                            laps = laps_try;
                            amps = amps_try;
                            res = res_try;
                            accepted = true;
                            if improvement < opts.tol {
                                converged = true;
                            }
                            break;
                        }
                    }
                }
            }
            damp *= 0.5;
        }
        if !accepted {
            // no descent direction left at this resolution
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    Ok(FitResult {
        centers,
        scales: log_scales.iter().map(|l| l.exp()).collect(),
        amplitudes: amps,
        residual_e: res,
        relative_residual: res / ws.u_norm.max(f64::MIN_POSITIVE),
        converged,
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_domain, sample, ShapeSpec};

    #[test]
    fn radial_self_fit_recovers_scale() {
        let d = make_domain(&ShapeSpec::RadialBall { dim: 5, radius: 1.0, nodes: 8001 }).unwrap();
        let b = BubbleParams::new(Point::origin(5), 37.0).unwrap();
        let u = project_bubble(&d, &b).unwrap();
        let fit = fit_representation(&u, 1, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(
            (fit.scales[0] / 37.0 - 1.0).abs() <= 1e-3,
            "lambda recovered as {}",
            fit.scales[0]
        );
        assert!(fit.relative_residual < 1e-6);
        assert!((fit.amplitudes[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_radial_multibubble_and_flat_negatives() {
        let d = make_domain(&ShapeSpec::RadialBall { dim: 5, radius: 1.0, nodes: 801 }).unwrap();
        let b = BubbleParams::new(Point::origin(5), 10.0).unwrap();
        let u = project_bubble(&d, &b).unwrap();
        assert!(fit_representation(&u, 2, &FitOptions::default()).is_err());
        let neg = sample(&d, |_| -1.0);
        assert!(fit_representation(&neg, 1, &FitOptions::default()).is_err());
    }
}
