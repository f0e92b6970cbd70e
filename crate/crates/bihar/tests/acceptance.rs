//! Acceptance suite: one test per verification criterion, each printing
//! a pass/fail line with the measured quantities (run with
//! `cargo test --test acceptance -- --nocapture` to see them).
//!
//! Criterion 5 carries a deliberate red assertion: the residual-order
//! half encodes the theoretical decay -(n-2) = -3, while the measured,
//! mesh-converged decay on the n = 5 ball is -2 (the quadratic defect
//! term enters at lambda^{-2(n-4)}). See the test body for the numbers
//! it prints; the coefficient half passes.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use bihar::bubble::{
    constant_c2, constant_sobolev, constants, delta_bilaplacian_analytic, delta_pow_crit,
    quad_energy_free_space, BubbleParams, Configuration,
};
use bihar::energy::{
    check_upper_bounds, evaluate_j, fit_representation, grad_j, verify_expansion, FitOptions,
};
use bihar::flow::{flow_run, FlowParams};
use bihar::green::validate_lemma_a1;
use bihar::grid::{make_domain, sample, Domain, Point, ScalarField, ShapeSpec};
use bihar::inequalities::{scan_gamma_star, scan_jensen, scan_m_star};
use bihar::solver::{apply_laplacian, e_inner, e_norm, poisson_dirichlet, BoundaryData};

use rand::{Rng, SeedableRng};

fn verdict(name: &str, pass: bool, detail: &str) {
    println!("criterion {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
}

#[test]
fn criterion_01_bubble_exactness() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for n in [5usize, 6] {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000 + n as u64);
        for _ in 0..100 {
            let center = Point::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let lambda = rng.gen_range(0.5..50.0);
            let b = BubbleParams::new(center, lambda).unwrap();
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let lhs = delta_bilaplacian_analytic(&b, &x, n);
            let rhs = delta_pow_crit(&b, &x, n);
            worst = worst.max((lhs - rhs).abs() / rhs.abs());
        }
    }
    let pass = worst <= 1e-9;
    verdict(
        "01 bubble exactness",
        pass,
        &format!("worst relative residual {worst:.3e} over 100 points, n in {{5,6}}, {:?}", t0.elapsed()),
    );
    assert!(pass);
}

#[test]
fn criterion_02_constants() {
    let t0 = Instant::now();
    let c2 = constant_c2(5).unwrap();
    let closed = 16.0 * PI * PI / 105.0;
    let c2_err = (c2 - closed).abs();

    let s_quarter = constant_sobolev(5).unwrap().powf(0.25);
    let via_energy = quad_energy_free_space(5).unwrap();
    let dual_rel = (s_quarter - via_energy).abs() / s_quarter;

    let pass = c2_err <= 1e-8 && dual_rel <= 1e-7;
    verdict(
        "02 constants",
        pass,
        &format!(
            "c2 error {c2_err:.3e} vs 16 pi^2/105; dual-S relative gap {dual_rel:.3e}; {:?}",
            t0.elapsed()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_solver_correctness() {
    let t0 = Instant::now();
    // exact spectral inverse on the box path
    let d = make_domain(&ShapeSpec::Box { dim: 5, side: 1.0, nodes_per_axis: 9 }).unwrap();
    let u_star = sample(&d, |x| x.iter().map(|&c| (PI * c).sin()).product::<f64>());
    let f = apply_laplacian(&u_star, &BoundaryData::Zero);
    let (u, _) = poisson_dirichlet(&f, &BoundaryData::Zero).unwrap();
    let round_trip = u.add_scaled(&u_star, -1.0).unwrap().inf_norm();

    // radial manufactured solution, fitted order over M in {500, 1000, 2000}
    let exact = |r: f64| (PI * r / 2.0).cos();
    let source = |r: f64| {
        let k = PI / 2.0;
        if r == 0.0 {
            -5.0 * k * k
        } else {
            -k * k * (k * r).cos() - 4.0 * k * (k * r).sin() / r
        }
    };
    let ms = [500usize, 1000, 2000];
    let errs: Vec<f64> = ms
        .iter()
        .map(|&m| {
            let d = make_domain(&ShapeSpec::RadialBall { dim: 5, radius: 1.0, nodes: m }).unwrap();
            let f = sample(&d, |x| source(x[0]));
            let (u, _) = poisson_dirichlet(&f, &BoundaryData::Zero).unwrap();
            let ex = sample(&d, |x| exact(x[0]));
            u.add_scaled(&ex, -1.0).unwrap().inf_norm()
        })
        .collect();
    let hs: Vec<f64> = ms.iter().map(|&m| 1.0 / (m - 1) as f64).collect();
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mx = hs.iter().map(|h| h.ln()).sum::<f64>() / 3.0;
    let my = errs.iter().map(|e| e.ln()).sum::<f64>() / 3.0;
    for (h, e) in hs.iter().zip(&errs) {
        sxx += (h.ln() - mx) * (h.ln() - mx);
        sxy += (h.ln() - mx) * (e.ln() - my);
    }
    let order = sxy / sxx;

    let pass = round_trip <= 1e-11 && (order - 2.0).abs() <= 0.1;
    verdict(
        "03 solver correctness",
        pass,
        &format!("spectral round trip {round_trip:.3e}; radial order {order:.3}; {:?}", t0.elapsed()),
    );
    assert!(pass);
}

#[test]
fn criterion_04_defect_decay() {
    let t0 = Instant::now();
    let d = make_domain(&ShapeSpec::RadialBall { dim: 5, radius: 1.0, nodes: 2_000_001 }).unwrap();
    let report = validate_lemma_a1(&d, &Point::origin(5), &[20.0, 40.0, 80.0, 160.0]).unwrap();
    let pass = (report.slope - (-2.0)).abs() <= 0.3;
    verdict(
        "04 defect decay",
        pass,
        &format!(
            "fitted order {:.3} (target -2 +- 0.3), sup errors {:?}; {:?}",
            report.slope,
            report.entries.iter().map(|e| e.sup_error).collect::<Vec<_>>(),
            t0.elapsed()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_single_bubble_expansion() {
    let t0 = Instant::now();
    let d = make_domain(&ShapeSpec::RadialBall { dim: 5, radius: 1.0, nodes: 2_000_001 }).unwrap();
    let consts = constants(5).unwrap();
    let report = verify_expansion(
        &d,
        &[1.0],
        &[Point::origin(5)],
        &[20.0, 40.0, 80.0, 160.0, 320.0],
        &consts,
    )
    .unwrap();
    let coef_rel = (report.fitted_coefficient - report.predicted_coefficient).abs()
        / report.predicted_coefficient.abs();
    let coef_pass = coef_rel <= 0.05;
    let order_pass = report.fitted_residual_order <= -2.5;
    verdict(
        "05 single-bubble expansion (coefficient)",
        coef_pass,
        &format!(
            "fitted {:.6e} vs S c1 H = {:.6e}, relative {coef_rel:.4}; {:?}",
            report.fitted_coefficient,
            report.predicted_coefficient,
            t0.elapsed()
        ),
    );
    verdict(
        "05 single-bubble expansion (residual order)",
        order_pass,
        &format!(
            "measured order {:.3}, threshold -2.5 (stated theory -3); the measured decay is the \
             genuine mesh-converged one — the quadratic defect term enters at lambda^-2 for n=5, \
             residuals {:?}",
            report.fitted_residual_order,
            report.samples.iter().map(|s| s.residual / s.j_num).collect::<Vec<_>>()
        ),
    );
    assert!(coef_pass, "coefficient relative error {coef_rel}");
    assert!(
        order_pass,
        "residual order {} vs stated threshold -2.5; see the decisions record: the n=5 decay \
         is genuinely -2",
        report.fitted_residual_order
    );
}

fn two_bubble_setup() -> (Arc<Domain>, Vec<Point>, f64) {
    let d = make_domain(&ShapeSpec::Box { dim: 5, side: 1.0, nodes_per_axis: 23 }).unwrap();
    let h = d.spacing();
    let s = 2.375 * h;
    let mut c1 = vec![0.5; 5];
    let mut c2 = vec![0.5; 5];
    c1[0] = 0.5 - s;
    c2[0] = 0.5 + s;
    (d, vec![Point::new(c1), Point::new(c2)], h)
}

#[test]
fn criterion_06_two_bubble_interaction() {
    let t0 = Instant::now();
    let consts = constants(5).unwrap();
    let (d, centers, _) = two_bubble_setup();
    let report =
        verify_expansion(&d, &[0.5, 0.5], &centers, &[10.0, 15.0, 20.0], &consts).unwrap();
    let b2 = consts.level(2);
    let mut pass = true;
    let mut detail = format!(
        "H11 {:.4}, G12 {:.4}; ",
        report.h_diag[0], report.g_mat[1]
    );
    for s in &report.samples {
        let measured = s.j_num - b2;
        let predicted = s.psi - b2;
        let same_sign = measured.signum() == predicted.signum();
        let ratio = (measured / predicted).abs();
        let ok = same_sign && (0.5..=2.0).contains(&ratio);
        pass &= ok;
        detail.push_str(&format!("l={}: ratio {:.3}{}; ", s.lambda, ratio, if ok { "" } else { " !" }));
    }
    detail.push_str(&format!("{:?}", t0.elapsed()));
    verdict("06 two-bubble interaction sign", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_07_level_bounds() {
    let t0 = Instant::now();
    let consts = constants(5).unwrap();
    let (d, centers, _) = two_bubble_setup();
    let lambda = 20.0;

    let equal = Configuration::equal_weights(centers.clone(), lambda).unwrap();
    let rep_equal = check_upper_bounds(&d, &equal, &consts, 0.1, 0.01).unwrap();

    let skew = Configuration::new(
        vec![0.99, 0.01],
        centers,
        vec![lambda; 2],
    )
    .unwrap();
    let rep_skew = check_upper_bounds(&d, &skew, &consts, 0.1, 0.01).unwrap();

    let pass = rep_equal.relaxed_ok && rep_skew.strict_ok == Some(true);
    verdict(
        "07 level bounds",
        pass,
        &format!(
            "equal weights J/S = {:.3} <= (2+0.1)^4 = {:.3}: {}; skew weights J/S = {:.3} <= 16: {:?}; {:?}",
            rep_equal.j / consts.sobolev,
            rep_equal.relaxed_bound / consts.sobolev,
            rep_equal.relaxed_ok,
            rep_skew.j / consts.sobolev,
            rep_skew.strict_ok,
            t0.elapsed()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_gradient_consistency() {
    let t0 = Instant::now();
    let d = make_domain(&ShapeSpec::Box { dim: 5, side: 1.0, nodes_per_axis: 15 }).unwrap();
    let consts = constants(5).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let u = sample(&d, |_| rng.gen_range(-0.3..1.0));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000 + seed);
        let hdir = sample(&d, |_| rng.gen_range(-0.05..0.05));
        let g = grad_j(&u, &consts).unwrap();
        let lhs = e_inner(&g, &hdir).unwrap();
        let eps = 1e-5;
        let jp = evaluate_j(&u.add_scaled(&hdir, eps).unwrap(), &consts).unwrap().j;
        let jm = evaluate_j(&u.add_scaled(&hdir, -eps).unwrap(), &consts).unwrap().j;
        let fd = (jp - jm) / (2.0 * eps);
        worst = worst.max((lhs - fd).abs() / fd.abs());
    }
    let pass = worst <= 1e-4;
    verdict(
        "08 gradient consistency",
        pass,
        &format!("worst relative error {worst:.3e} over 5 pairs, box N=15; {:?}", t0.elapsed()),
    );
    assert!(pass);
}

struct FlowCheck {
    name: &'static str,
    monotone: bool,
    norm_drift: f64,
    positivity: f64,
}

fn check_flow(name: &'static str, u0: &ScalarField, params: &FlowParams) -> FlowCheck {
    let consts = constants(5).unwrap();
    let run = flow_run(u0, &consts, params).unwrap();
    let monotone = run.records.windows(2).all(|w| w[1].j <= w[0].j);
    let norm_drift = (e_norm(&run.final_state) - 1.0).abs();
    let positivity = run
        .records
        .iter()
        .map(|r| r.min_u + 1e-6 * r.max_u)
        .fold(f64::INFINITY, f64::min);
    FlowCheck { name, monotone, norm_drift, positivity }
}

#[test]
fn criterion_09_flow_invariants() {
    let t0 = Instant::now();
    let mut checks = Vec::new();

    // run 1: single bubble on the ball, concentrating
    let ball = make_domain(&ShapeSpec::RadialBall { dim: 5, radius: 1.0, nodes: 2001 }).unwrap();
    let b = BubbleParams::new(Point::origin(5), 5.0).unwrap();
    let u0 = bihar::bubble::project_bubble(&ball, &b).unwrap();
    checks.push(check_flow(
        "ball single-bubble",
        &u0,
        &FlowParams {
            max_steps: 400,
            fit_every: Some(1),
            blowup_lambda_h: 0.25,
            ..FlowParams::default()
        },
    ));

    // run 2: smooth positive bump on the ball
    let bump = sample(&ball, |x| (PI * x[0] / 2.0).cos());
    checks.push(check_flow(
        "ball bump",
        &bump,
        &FlowParams {
            max_steps: 250,
            fit_every: Some(5),
            blowup_lambda_h: 0.25,
            ..FlowParams::default()
        },
    ));

    // run 3: two bubbles on the masked annulus
    let ann = make_domain(&ShapeSpec::MaskedAnnulus {
        dim: 5,
        side: 2.2,
        nodes_per_axis: 13,
        r_in: 0.5,
        r_out: 1.0,
    })
    .unwrap();
    let mut c1 = vec![1.1; 5];
    let mut c2 = vec![1.1; 5];
    c1[0] = 1.1 - 0.75;
    c2[0] = 1.1 + 0.75;
    let b1 = BubbleParams::new(Point::new(c1), 4.0).unwrap();
    let b2 = BubbleParams::new(Point::new(c2), 4.0).unwrap();
    let two = bihar::bubble::project_bubble(&ann, &b1)
        .unwrap()
        .add_scaled(&bihar::bubble::project_bubble(&ann, &b2).unwrap(), 1.0)
        .unwrap();
    // this run pauses on a near-critical plateau just above the first
    // energy level; the tolerance stops it there, before the coarse
    // lattice lets the descent dive into single-cell artifacts
    checks.push(check_flow(
        "annulus two-bubble",
        &two,
        &FlowParams { max_steps: 60, grad_tol: 1e-3, ..FlowParams::default() },
    ));

    let mut pass = true;
    let mut detail = String::new();
    for c in &checks {
        let ok = c.monotone && c.norm_drift <= 1e-12 && c.positivity >= 0.0;
        pass &= ok;
        detail.push_str(&format!(
            "{}: monotone {}, drift {:.2e}, min(u + 1e-6 max) {:.2e}; ",
            c.name, c.monotone, c.norm_drift, c.positivity
        ));
    }
    detail.push_str(&format!("{:?}", t0.elapsed()));
    verdict("09 flow invariants", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_10_representation_fit() {
    let t0 = Instant::now();
    let d = make_domain(&ShapeSpec::Box { dim: 5, side: 1.0, nodes_per_axis: 15 }).unwrap();
    let h = d.spacing();
    let a = Point::new(vec![0.52, 0.47, 0.5, 0.55, 0.49]);
    let lambda = 6.0;
    let b = BubbleParams::new(a.clone(), lambda).unwrap();
    let u = bihar::bubble::project_bubble(&d, &b).unwrap();
    let fit = fit_representation(&u, 1, &FitOptions::default()).unwrap();
    let center_err = bihar::grid::Point::new(fit.centers[0].clone()).dist(&a);
    let scale_err = (fit.scales[0] / lambda - 1.0).abs();
    let pass = center_err <= h && scale_err <= 1e-3;
    verdict(
        "10 representation fit",
        pass,
        &format!(
            "|a_fit - a| = {center_err:.3e} (h = {h:.3e}), |lambda_fit/lambda - 1| = {scale_err:.3e}, \
             residual {:.3e}, rounds {}; {:?}",
            fit.relative_residual,
            fit.rounds,
            t0.elapsed()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_11_inequality_oracles() {
    let t0 = Instant::now();
    let jensen = scan_jensen(10.0, 100_000, 3).unwrap();
    let gamma = scan_gamma_star(10.0, 100_000, 7).unwrap();
    let m = scan_m_star(10.0, 1_000_000, 10.0, 11).unwrap();
    // frozen regression bounds for q = 10
    let pass = jensen.extreme >= -1e-12
        && gamma.extreme > 1.0
        && m.extreme.is_finite()
        && m.extreme > 45.0
        && m.extreme < 600.0;
    verdict(
        "11 inequality oracles",
        pass,
        &format!(
            "jensen min gap {:.2e}; gamma* {:.4}; M* {:.2}; {:?}",
            jensen.extreme, gamma.extreme, m.extreme, t0.elapsed()
        ),
    );
    assert!(pass);
}
