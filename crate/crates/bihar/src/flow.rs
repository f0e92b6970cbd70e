//! Normalized descent flow of J on the unit E-sphere: explicit Euler
//! steps u <- u - dt grad J(u) with re-projection onto ||u||_E = 1 and
//! backtracking until J decreases.
//!
//! The natural time scale of the flow is ~1/J (the gradient magnitude
//! tracks J), so trajectories report tiny flow times; step counts are
//! the practical horizon. Concentration is detected through the
//! representation fit: once the fitted scale outruns the mesh
//! (lambda * h > 1) the run stops and reports the energy level it
//! escaped at.

use serde::Serialize;

use crate::bubble::{check_v_p_eps, Configuration, Constants, VNeighborhoodReport};
use crate::energy::{
    evaluate_j, fit_representation, grad_j, reaction_coefficient, FitOptions, FitResult,
};
use crate::error::{Error, Result};
use crate::grid::{Domain, Point, ScalarField};
use crate::solver::{e_inner, e_norm};

#[derive(Debug, Clone)]
pub struct FlowParams {
    /// largest trial step; backtracking halves from here
    pub dt0: f64,
    /// flow-time horizon (rarely binding; see module docs)
    pub t_max: f64,
    /// near-critical threshold on the tangential gradient, relative to
    /// J; zero disables the check
    pub grad_tol: f64,
    pub max_steps: usize,
    /// clamp to the positive part before re-projection (off by default;
    /// violations are monitored, not hidden)
    pub clamp_positive: bool,
    /// run the representation fit every k accepted steps
    pub fit_every: Option<usize>,
    pub fit_p: usize,
    /// stop once fitted lambda * spacing exceeds this (under-resolved)
    pub blowup_lambda_h: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            dt0: 1.0,
            t_max: f64::INFINITY,
            grad_tol: 0.0,
            max_steps: 400,
            clamp_positive: false,
            fit_every: None,
            fit_p: 1,
            blowup_lambda_h: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowRecord {
    pub step: usize,
    pub t: f64,
    pub j: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub dt: f64,
    pub lambda_fit: Option<f64>,
    pub dist_fit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FlowOutcome {
    ReachedTMax,
    ReachedMaxSteps,
    NearCritical,
    /// fitted scale outran the grid; the flow left toward infinity at
    /// roughly this energy level
    ConcentrationEscape { level: f64 },
}

#[derive(Debug, Clone)]
pub struct FlowResult {
    pub records: Vec<FlowRecord>,
    pub final_state: ScalarField,
    pub outcome: FlowOutcome,
}

fn fit_scale_and_dist(
    u: &ScalarField,
    p: usize,
    domain: &std::sync::Arc<Domain>,
) -> (Option<f64>, Option<f64>) {
    match fit_representation(u, p, &FitOptions::default()) {
        Ok(fit) => {
            let lambda = fit.scales.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let dist = fit
                .centers
                .iter()
                .filter_map(|c| domain.dist_to_boundary(&Point::new(c.clone())).ok())
                .fold(f64::INFINITY, f64::min);
            (Some(lambda), dist.is_finite().then_some(dist))
        }
        Err(_) => (None, None),
    }
}

/// Runs the normalized descent flow from u0 (any nonzero admissible
/// field; it is projected onto the sphere first).
pub fn flow_run(u0: &ScalarField, consts: &Constants, params: &FlowParams) -> Result<FlowResult> {
    let domain = u0.domain().clone();
    let norm0 = e_norm(u0);
    if !(norm0 > 0.0) {
        return Err(Error::InvalidParameter("initial state has zero energy norm".into()));
    }
    let mut u = u0.scaled(1.0 / norm0);
    let mut eb = evaluate_j(&u, consts)?;
    let h = domain.spacing();

    let mut records = Vec::new();
    let fit_now = |u: &ScalarField, step: usize| -> (Option<f64>, Option<f64>) {
        match params.fit_every {
            Some(k) if k > 0 && step % k == 0 => fit_scale_and_dist(u, params.fit_p, &domain),
            _ => (None, None),
        }
    };
    let (l0, d0) = fit_now(&u, 0);
    records.push(FlowRecord {
        step: 0,
        t: 0.0,
        j: eb.j,
        min_u: u.min_value(),
        max_u: u.max_value(),
        dt: 0.0,
        lambda_fit: l0,
        dist_fit: d0,
    });

    let mut t = 0.0;
    let mut dt = params.dt0;
    let mut outcome = FlowOutcome::ReachedMaxSteps;

    for step in 1..=params.max_steps {
        if t >= params.t_max {
            outcome = FlowOutcome::ReachedTMax;
            break;
        }
        let g = grad_j(&u, consts)?;
        if params.grad_tol > 0.0 {
            let gu = e_inner(&g, &u)?;
            let tangential = g.add_scaled(&u, -gu)?;
            if e_norm(&tangential) < params.grad_tol * eb.j.max(1.0) {
                outcome = FlowOutcome::NearCritical;
                break;
            }
        }

        // backtracking line search: halve dt until J decreases; the
        // positivity cap keeps (1 - dt c_u) u nonnegative, so the update
        // stays in the positive cone by the discrete maximum principle
        let dt_cap = 0.9 / reaction_coefficient(&eb, consts);
        dt = (dt * 2.0).min(params.dt0).min(dt_cap);
        let mut accepted = None;
        while dt > params.dt0 * 1e-300 {
            let mut trial = u.add_scaled(&g, -dt)?;
            if params.clamp_positive {
                trial = trial.map(|v| v.max(0.0));
            }
            let norm = e_norm(&trial);
            if norm > 0.0 {
                let candidate = trial.scaled(1.0 / norm);
                if let Ok(trial_eb) = evaluate_j(&candidate, consts) {
                    if trial_eb.j < eb.j {
                        accepted = Some((candidate, trial_eb));
                        break;
                    }
                }
            }
            dt *= 0.5;
        }
        let Some((next, next_eb)) = accepted else {
            return Err(Error::StepUnderflow { t, j: eb.j });
        };
        u = next;
        eb = next_eb;
        t += dt;

        let (lambda_fit, dist_fit) = fit_now(&u, step);
        records.push(FlowRecord {
            step,
            t,
            j: eb.j,
            min_u: u.min_value(),
            max_u: u.max_value(),
            dt,
            lambda_fit,
            dist_fit,
        });

        if let Some(lambda) = lambda_fit {
            if lambda * h > params.blowup_lambda_h {
                outcome = FlowOutcome::ConcentrationEscape { level: eb.j };
                break;
            }
        }
        if step == params.max_steps {
            outcome = FlowOutcome::ReachedMaxSteps;
        }
    }

    Ok(FlowResult { records, final_state: u, outcome })
}

/// Representation fit plus the neighborhood-of-infinity checks for a
/// flow state (or any unit-norm field).
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub fit: FitResult,
    pub v_checks: VNeighborhoodReport,
}

pub fn concentration_diagnostics(
    u: &ScalarField,
    p: usize,
    eps: f64,
) -> Result<DiagnosticsReport> {
    let norm = e_norm(u);
    if !(norm > 0.0) {
        return Err(Error::InvalidParameter("state has zero energy norm".into()));
    }
    let unit = u.scaled(1.0 / norm);
    let fit = fit_representation(&unit, p, &FitOptions::default())?;
    let cfg = Configuration::new(
        vec![1.0 / p as f64; p],
        fit.center_points(),
        fit.scales.clone(),
    )?;
    let v_checks = check_v_p_eps(u.domain(), &cfg, eps, Some(&unit))?;
    Ok(DiagnosticsReport { fit, v_checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::{constants, project_bubble, BubbleParams};
    use crate::grid::{make_domain, sample, ShapeSpec};
    use rand::{Rng, SeedableRng};

    #[test]
    fn gradient_is_tangent_to_rays() {
        // degree-0 homogeneity makes <grad, u>_E vanish; exact discrete
        // adjointness on the box keeps it at rounding level
        let d = make_domain(&ShapeSpec::Box { dim: 5, side: 1.0, nodes_per_axis: 7 }).unwrap();
        let consts = constants(5).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let u = sample(&d, |_| rng.gen_range(0.05..1.0));
        let g = grad_j(&u, &consts).unwrap();
        let gu = e_inner(&g, &u).unwrap();
        let rel = gu.abs() / (e_norm(&g) * e_norm(&u));
        assert!(rel < 1e-8, "tangency defect {rel:.3e}");
    }

    #[test]
    fn ball_bubble_flow_concentrates() {
        let d = make_domain(&ShapeSpec::RadialBall { dim: 5, radius: 1.0, nodes: 2001 }).unwrap();
        let consts = constants(5).unwrap();
        let b = BubbleParams::new(Point::origin(5), 5.0).unwrap();
        let u0 = project_bubble(&d, &b).unwrap();
        // the spike develops grid-scale sign oscillations past
        // lambda * h ~ 1/3, so the canned run stops a little earlier
        let params = FlowParams {
            max_steps: 400,
            fit_every: Some(1),
            blowup_lambda_h: 0.25,
            ..FlowParams::default()
        };
        let run = flow_run(&u0, &consts, &params).unwrap();
        assert!(matches!(run.outcome, FlowOutcome::ConcentrationEscape { .. }));

        // J never increases along accepted steps
        for w in run.records.windows(2) {
            assert!(w[1].j <= w[0].j, "J increased at step {}", w[1].step);
        }
        // normalization drift after projection
        assert!((e_norm(&run.final_state) - 1.0).abs() <= 1e-12);
        // discrete shadow of positivity invariance
        for r in &run.records {
            assert!(r.min_u >= -1e-6 * r.max_u, "positivity violated at step {}", r.step);
        }
        // concentration: fitted scale grows well past 10x the initial one
        let lambdas: Vec<f64> = run.records.iter().filter_map(|r| r.lambda_fit).collect();
        let max_l = lambdas.iter().copied().fold(0.0f64, f64::max);
        assert!(max_l >= 50.0, "lambda only reached {max_l}; outcome {:?}", run.outcome);
        // growth beyond the first phase: monotone over the later fits
        let tail: Vec<f64> = lambdas.iter().copied().skip(2).collect();
        for w in tail.windows(2) {
            assert!(w[1] >= w[0] * 0.98, "lambda fit regressed: {w:?}");
        }
    }

    #[test]
    fn halving_dt_changes_j_consistently() {
        // fixed-step comparison at matched flow horizon: first-order
        // consistency means |J_dt - J_{dt/2}| shrinks ~2x per halving
        let d = make_domain(&ShapeSpec::RadialBall { dim: 5, radius: 1.0, nodes: 801 }).unwrap();
        let consts = constants(5).unwrap();
        let b = BubbleParams::new(Point::origin(5), 5.0).unwrap();
        let u0 = project_bubble(&d, &b).unwrap();

        // probe the natural accepted step
        let probe = flow_run(&u0, &consts, &FlowParams { max_steps: 3, ..Default::default() }).unwrap();
        let dt_star = probe.records.last().unwrap().dt;

        let j_at = |dt: f64, steps: usize| -> f64 {
            let params = FlowParams { dt0: dt, max_steps: steps, ..Default::default() };
            flow_run(&u0, &consts, &params).unwrap().records.last().unwrap().j
        };
        let base_steps = 8;
        let j1 = j_at(dt_star / 2.0, base_steps);
        let j2 = j_at(dt_star / 4.0, 2 * base_steps);
        let j3 = j_at(dt_star / 8.0, 4 * base_steps);
        let d12 = (j1 - j2).abs();
        let d23 = (j2 - j3).abs();
        assert!(d23 < d12, "no first-order shrinkage: {d12:.3e} vs {d23:.3e}");
    }

    #[test]
    fn diagnostics_on_exact_bubble_and_bump() {
        let d = make_domain(&ShapeSpec::RadialBall { dim: 5, radius: 1.0, nodes: 20_001 }).unwrap();
        let b = BubbleParams::new(Point::origin(5), 100.0).unwrap();
        let u = project_bubble(&d, &b).unwrap();
        let rep = concentration_diagnostics(&u, 1, 0.05).unwrap();
        assert!(rep.fit.relative_residual <= 1e-3, "remainder {}", rep.fit.relative_residual);
        assert!(rep.v_checks.satisfied, "V(1, 0.05) failed: {:?}", rep.v_checks);

        // flat positive bump: large remainder, small-eps membership fails
        let bump = sample(&d, |x| (std::f64::consts::PI * x[0] / 2.0).cos());
        let rep = concentration_diagnostics(&bump, 1, 0.05).unwrap();
        assert!(rep.fit.relative_residual > 0.05);
        assert!(!rep.v_checks.satisfied);
    }
}
