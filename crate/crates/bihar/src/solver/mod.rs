//! Dirichlet Poisson solves and the Navier bilaplacian solve
//! Delta^2 u = f, u = Delta u = g1/g2 on the boundary, realized as two
//! cascaded Poisson solves.
//!
//! Sign convention: solvers take Delta u = f. Three backends share one
//! entry point and one stencil:
//!
//! * box lattices — n-dimensional fast sine transform with the discrete
//!   eigenvalues, hence the exact inverse of the stencil;
//! * masked lattices — conjugate gradient on -Delta_h (symmetric
//!   positive definite), boundary data at first-order ghost projections;
//! * radial meshes — tridiagonal solve of the flux form of
//!   u'' + (n-1)/r u', regularity (not Dirichlet) closure at r = 0.

mod cg;
mod dst;
mod radial;

use crate::error::Result;
use crate::grid::{Domain, ScalarField};

pub(crate) use dst::{dirichlet_eigenvalues, SineTransform};

/// Boundary values for a Dirichlet stage, evaluated analytically at
/// true boundary points. Radial backends evaluate the closure at the
/// representative point r * e_1.
#[derive(Clone, Copy)]
pub enum BoundaryData<'a> {
    Zero,
    Func(&'a dyn Fn(&[f64]) -> f64),
}

impl BoundaryData<'_> {
    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        match self {
            BoundaryData::Zero => 0.0,
            BoundaryData::Func(f) => f(x),
        }
    }

    pub(crate) fn is_zero(&self) -> bool {
        matches!(self, BoundaryData::Zero)
    }
}

/// Which backend produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    SineSpectral,
    CgMasked,
    RadialTridiagonal,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::SineSpectral => "sine-spectral",
            Backend::CgMasked => "cg-masked",
            Backend::RadialTridiagonal => "radial-tridiagonal",
        }
    }
}

/// Outcome report of one solve; `residual_norm` is
/// ||L u - f||_inf / max(1, ||f||_inf) measured with the same discrete
/// operator that was solved.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_norm: f64,
    pub backend: Backend,
}

/// Relative l2 tolerance of the masked conjugate-gradient backend.
pub const CG_TOLERANCE: f64 = 1e-10;

/// Solves Delta_h u = f with Dirichlet data g.
pub fn poisson_dirichlet(f: &ScalarField, g: &BoundaryData) -> Result<(ScalarField, SolveReport)> {
    let domain = f.domain().clone();
    let (u, iterations) = match &*domain {
        Domain::Box(_) => (spectral_solve(f, g), 0),
        Domain::Masked(_) => cg::solve(f, g)?,
        Domain::Radial(_) => (radial::solve(f, g), 0),
    };
    let residual_norm = residual(&u, f, g);
    let backend = backend_of(&domain);
    Ok((u, SolveReport { iterations, residual_norm, backend }))
}

/// Solves Delta^2 u = f under Navier data (u = g1, Delta u = g2 on the
/// boundary) as v := solve(f, g2); u := solve(v, g1).
pub fn navier_bilaplacian(
    f: &ScalarField,
    g1: &BoundaryData,
    g2: &BoundaryData,
) -> Result<(ScalarField, SolveReport)> {
    let (v, r1) = poisson_dirichlet(f, g2)?;
    let (u, r2) = poisson_dirichlet(&v, g1)?;
    Ok((
        u,
        SolveReport {
            iterations: r1.iterations + r2.iterations,
            residual_norm: r1.residual_norm.max(r2.residual_norm),
            backend: r1.backend,
        },
    ))
}

/// Applies the discrete Laplacian with boundary data g, using exactly
/// the solver stencil. On radial meshes the output at Dirichlet nodes
/// is zero (they carry data, not equations).
pub fn apply_laplacian(u: &ScalarField, g: &BoundaryData) -> ScalarField {
    match &*u.domain().clone() {
        Domain::Box(_) => box_apply(u, g),
        Domain::Masked(_) => cg::apply(u, g),
        Domain::Radial(_) => radial::apply(u),
    }
}

fn backend_of(domain: &Domain) -> Backend {
    match domain {
        Domain::Box(_) => Backend::SineSpectral,
        Domain::Masked(_) => Backend::CgMasked,
        Domain::Radial(_) => Backend::RadialTridiagonal,
    }
}

fn residual(u: &ScalarField, f: &ScalarField, g: &BoundaryData) -> f64 {
    let lu = apply_laplacian(u, g);
    let scale = f.inf_norm().max(1.0);
    let skip_dirichlet = matches!(&**u.domain(), Domain::Radial(_));
    let mut worst = 0.0f64;
    if skip_dirichlet {
        let Domain::Radial(r) = &**u.domain() else { unreachable!() };
        for j in r.unknown_range() {
            worst = worst.max((lu.values()[j] - f.values()[j]).abs());
        }
    } else {
        for (a, b) in lu.values().iter().zip(f.values()) {
            worst = worst.max((a - b).abs());
        }
    }
    worst / scale
}

/// Exact spectral inverse of the box stencil (zero boundary after
/// folding any nonzero data into the right-hand side).
fn spectral_solve(f: &ScalarField, g: &BoundaryData) -> ScalarField {
    let domain = f.domain().clone();
    let Domain::Box(grid) = &*domain else { unreachable!() };
    let n = grid.nodes_per_axis();
    let dim = grid.dim();
    let h = grid.spacing();

    let mut rhs = f.values().to_vec();
    if !g.is_zero() {
        fold_box_boundary(grid, &mut rhs, g);
    }

    let t = SineTransform::new(n);
    let mut scratch = vec![0.0; rhs.len()];
    t.sweep(&mut rhs, &mut scratch, dim);

    let ev = dirichlet_eigenvalues(n, h);
    let mut idx = vec![0usize; dim];
    let mut esum: f64 = idx.iter().map(|&i| ev[i]).sum();
    for value in rhs.iter_mut() {
        *value /= -esum;
        // odometer increment with incremental eigenvalue sum
        for k in (0..dim).rev() {
            esum -= ev[idx[k]];
            idx[k] += 1;
            if idx[k] < n {
                esum += ev[idx[k]];
                break;
            }
            idx[k] = 0;
            esum += ev[0];
        }
    }

    t.sweep(&mut rhs, &mut scratch, dim);
    let s = t.inverse_scale(dim);
    for v in rhs.iter_mut() {
        *v *= s;
    }
    ScalarField::new(domain, rhs).expect("shape preserved")
}

/// Moves boundary contributions of the stencil to the right-hand side:
/// rhs_i -= g(boundary point) / h^2 for every face-adjacent leg.
fn fold_box_boundary(grid: &crate::grid::BoxGrid, rhs: &mut [f64], g: &BoundaryData) {
    let n = grid.nodes_per_axis();
    let dim = grid.dim();
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let mut idx = vec![0usize; dim];
    let mut pos = vec![0.0; dim];
    for flat in 0..rhs.len() {
        grid.decode(flat, &mut idx);
        if idx.iter().all(|&i| i > 0 && i < n - 1) {
            continue;
        }
        grid.position(flat, &mut pos);
        for k in 0..dim {
            if idx[k] == 0 {
                let saved = pos[k];
                pos[k] = 0.0;
                rhs[flat] -= g.eval(&pos) * inv_h2;
                pos[k] = saved;
            }
            if idx[k] == n - 1 {
                let saved = pos[k];
                pos[k] = grid.side();
                rhs[flat] -= g.eval(&pos) * inv_h2;
                pos[k] = saved;
            }
        }
    }
}

fn box_apply(u: &ScalarField, g: &BoundaryData) -> ScalarField {
    let domain = u.domain().clone();
    let Domain::Box(grid) = &*domain else { unreachable!() };
    let n = grid.nodes_per_axis();
    let dim = grid.dim();
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let vals = u.values();
    let mut out = vec![0.0; vals.len()];

    let mut strides = vec![1usize; dim];
    for k in (0..dim.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * n;
    }

    let mut idx = vec![0usize; dim];
    let mut pos = vec![0.0; dim];
    for flat in 0..vals.len() {
        grid.decode(flat, &mut idx);
        let mut acc = -2.0 * dim as f64 * vals[flat];
        let mut needs_pos = true;
        for k in 0..dim {
            if idx[k] > 0 {
                acc += vals[flat - strides[k]];
            } else if !g.is_zero() {
                if needs_pos {
                    grid.position(flat, &mut pos);
                    needs_pos = false;
                }
                let saved = pos[k];
                pos[k] = 0.0;
                acc += g.eval(&pos);
                pos[k] = saved;
            }
            if idx[k] < n - 1 {
                acc += vals[flat + strides[k]];
            } else if !g.is_zero() {
                if needs_pos {
                    grid.position(flat, &mut pos);
                    needs_pos = false;
                }
                let saved = pos[k];
                pos[k] = grid.side();
                acc += g.eval(&pos);
                pos[k] = saved;
            }
        }
        out[flat] = acc * inv_h2;
    }
    ScalarField::new(domain, out).expect("shape preserved")
}

/// Discrete E-inner product int Delta_h u Delta_h w under the
/// homogeneous Navier extension (zero boundary data).
pub fn e_inner(u: &ScalarField, w: &ScalarField) -> Result<f64> {
    u.check_same_domain(w)?;
    let lu = apply_laplacian(u, &BoundaryData::Zero);
    let lw = apply_laplacian(w, &BoundaryData::Zero);
    let prod = ScalarField::new(
        u.domain().clone(),
        lu.values().iter().zip(lw.values()).map(|(a, b)| a * b).collect(),
    )?;
    Ok(prod.integrate())
}

/// E-norm ||Delta_h u||_{L^2}.
pub fn e_norm(u: &ScalarField) -> f64 {
    e_inner(u, u).expect("same field").max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_domain, sample, ShapeSpec};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn unit_box(dim: usize, n_axis: usize) -> Arc<Domain> {
        make_domain(&ShapeSpec::Box { dim, side: 1.0, nodes_per_axis: n_axis }).unwrap()
    }

    #[test]
    fn box_spectral_round_trip_is_exact() {
        let d = unit_box(5, 9);
        let u_star = sample(&d, |x| x.iter().map(|&c| (PI * c).sin()).product::<f64>());
        let f = apply_laplacian(&u_star, &BoundaryData::Zero);
        let (u, rep) = poisson_dirichlet(&f, &BoundaryData::Zero).unwrap();
        assert_eq!(rep.backend, Backend::SineSpectral);
        assert_eq!(rep.iterations, 0);
        let err = u.add_scaled(&u_star, -1.0).unwrap().inf_norm();
        assert!(err < 1e-12, "round trip error {err}");
        assert!(rep.residual_norm < 1e-11);
    }

    #[test]
    fn zero_source_zero_data_gives_zero() {
        let d = unit_box(5, 5);
        let f = ScalarField::zeros(&d);
        let (u, _) = poisson_dirichlet(&f, &BoundaryData::Zero).unwrap();
        assert_eq!(u.inf_norm(), 0.0);
        let (u, _) = navier_bilaplacian(&f, &BoundaryData::Zero, &BoundaryData::Zero).unwrap();
        assert_eq!(u.inf_norm(), 0.0);
    }

    #[test]
    fn radial_poisson_matches_closed_form() {
        // n = 5 ball, f = 1, u(R) = 0  =>  u(r) = (r^2 - 1) / 10, which the
        // flux stencil reproduces exactly up to rounding
        let d = make_domain(&ShapeSpec::RadialBall { dim: 5, radius: 1.0, nodes: 2000 }).unwrap();
        let f = sample(&d, |_| 1.0);
        let (u, rep) = poisson_dirichlet(&f, &BoundaryData::Zero).unwrap();
        assert_eq!(rep.backend, Backend::RadialTridiagonal);
        let exact = sample(&d, |x| (x[0] * x[0] - 1.0) / 10.0);
        let err = u.add_scaled(&exact, -1.0).unwrap().inf_norm();
        assert!(err < 1e-8, "radial closed-form error {err}");
    }

    #[test]
    fn navier_double_round_trip() {
        let d = unit_box(5, 9);
        let s = sample(&d, |x| x.iter().map(|&c| (PI * c).sin()).product::<f64>());
        let v = apply_laplacian(&s, &BoundaryData::Zero);
        let f = apply_laplacian(&v, &BoundaryData::Zero);
        let (u, _) = navier_bilaplacian(&f, &BoundaryData::Zero, &BoundaryData::Zero).unwrap();
        let err = u.add_scaled(&s, -1.0).unwrap().inf_norm();
        assert!(err < 1e-11, "double round trip error {err}");
    }

    #[test]
    fn apply_laplacian_exact_on_quadratics() {
        // |x|^2 with exact boundary data -> 2n everywhere
        let d = unit_box(5, 7);
        let sq = |x: &[f64]| x.iter().map(|c| c * c).sum::<f64>();
        let u = sample(&d, sq);
        let g = BoundaryData::Func(&sq);
        let lu = apply_laplacian(&u, &g);
        for &v in lu.values() {
            assert_relative_eq!(v, 10.0, epsilon = 1e-10);
        }

        // radial grid: constant field with matching data -> zero
        let d = make_domain(&ShapeSpec::RadialBall { dim: 5, radius: 1.0, nodes: 500 }).unwrap();
        let c = sample(&d, |_| 3.25);
        let lc = radial::apply(&c);
        assert!(lc.inf_norm() < 1e-12);
    }

    #[test]
    fn masked_backend_agrees_with_spectral_on_full_mask() {
        // a masked domain whose inside is the whole interior lattice is
        // the box problem; CG must match the exact spectral inverse to
        // its tolerance
        let dim = 3;
        let parent = crate::grid::BoxGrid::new(dim, 1.0, 13).unwrap();
        let masked = crate::grid::MaskedDomain::from_predicate(
            parent,
            crate::grid::MaskShape::Custom,
            |_| true,
        )
        .unwrap();
        let md: Arc<Domain> = Arc::new(Domain::Masked(masked));
        let bx = unit_box(dim, 13);

        let profile = |x: &[f64]| {
            x.iter().map(|&c| (PI * c).sin()).product::<f64>()
                + 0.3 * x.iter().map(|&c| (2.0 * PI * c).sin()).product::<f64>()
        };
        let fm = sample(&md, profile);
        let fb = sample(&bx, profile);
        let (um, repm) = poisson_dirichlet(&fm, &BoundaryData::Zero).unwrap();
        let (ub, _) = poisson_dirichlet(&fb, &BoundaryData::Zero).unwrap();
        assert_eq!(repm.backend, Backend::CgMasked);
        assert!(repm.iterations > 0);
        let diff: f64 = um
            .values()
            .iter()
            .zip(ub.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 1e-8, "masked vs spectral diff {diff}");
    }

    #[test]
    fn masked_nonzero_boundary_data() {
        // harmonic polynomial x0^2 - x1^2 on a masked ball: solve
        // Delta u = 0 with its own boundary data, compare inside
        let d = make_domain(&ShapeSpec::MaskedBall {
            dim: 3,
            side: 1.0,
            nodes_per_axis: 19,
            radius: 0.4,
        })
        .unwrap();
        let harm = |x: &[f64]| (x[0] - 0.5) * (x[0] - 0.5) - (x[1] - 0.5) * (x[1] - 0.5);
        let f = ScalarField::zeros(&d);
        let (u, _) = poisson_dirichlet(&f, &BoundaryData::Func(&harm)).unwrap();
        let exact = sample(&d, harm);
        let err = u.add_scaled(&exact, -1.0).unwrap().inf_norm();
        // first-order ghost projection
        assert!(err < 0.02, "masked harmonic error {err}");
    }

    #[test]
    fn self_adjointness_box_and_masked() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for spec in [
            ShapeSpec::Box { dim: 4, side: 1.0, nodes_per_axis: 6 },
            ShapeSpec::MaskedBall { dim: 4, side: 1.0, nodes_per_axis: 9, radius: 0.42 },
        ] {
            let d = make_domain(&spec).unwrap();
            let u = sample(&d, |_| rng.gen_range(-1.0..1.0));
            let w = sample(&d, |_| rng.gen_range(-1.0..1.0));
            let lu = apply_laplacian(&u, &BoundaryData::Zero);
            let lw = apply_laplacian(&w, &BoundaryData::Zero);
            let a = ScalarField::new(d.clone(), u.values().iter().zip(lw.values()).map(|(x, y)| x * y).collect()).unwrap().integrate();
            let b = ScalarField::new(d.clone(), w.values().iter().zip(lu.values()).map(|(x, y)| x * y).collect()).unwrap().integrate();
            assert!(
                (a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1e-30),
                "green identity violated: {a} vs {b}"
            );
        }
    }

    #[test]
    fn navier_energy_identity_box() {
        use rand::{Rng, SeedableRng};
        let d = unit_box(3, 15);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let f = sample(&d, |_| rng.gen_range(-1.0..1.0));
        let (u, _) = navier_bilaplacian(&f, &BoundaryData::Zero, &BoundaryData::Zero).unwrap();
        let lhs = e_inner(&u, &u).unwrap();
        let fu = ScalarField::new(
            d.clone(),
            f.values().iter().zip(u.values()).map(|(a, b)| a * b).collect(),
        )
        .unwrap()
        .integrate();
        assert_relative_eq!(lhs, fu, max_relative = 1e-8);
    }

    #[test]
    fn radial_manufactured_convergence_order_two() {
        // u = cos(pi r / 2) on the unit 5-ball
        let exact = |r: f64| (PI * r / 2.0).cos();
        let source = |r: f64| {
            let k = PI / 2.0;
            if r == 0.0 {
                -5.0 * k * k
            } else {
                -k * k * (k * r).cos() - 4.0 * k * (k * r).sin() / r
            }
        };
        let mut errs = Vec::new();
        let ms = [500usize, 1000, 2000];
        for &m in &ms {
            let d = make_domain(&ShapeSpec::RadialBall { dim: 5, radius: 1.0, nodes: m }).unwrap();
            let f = sample(&d, |x| source(x[0]));
            let (u, _) = poisson_dirichlet(&f, &BoundaryData::Zero).unwrap();
            let ex = sample(&d, |x| exact(x[0]));
            errs.push(u.add_scaled(&ex, -1.0).unwrap().inf_norm());
        }
        let hs: Vec<f64> = ms.iter().map(|&m| 1.0 / (m - 1) as f64).collect();
        let slope = crate::special::loglog_slope(&hs, &errs);
        assert!((slope - 2.0).abs() < 0.1, "radial order {slope}");
    }

    #[test]
    fn radial_annulus_dirichlet_ends() {
        // Delta u = 0 in the annulus with u(r_in) = 1, u(r_out) = 0 has
        // the exact radial harmonic solution a + b r^{2-n}
        let (r_in, r_out) = (0.5, 1.0);
        let d = make_domain(&ShapeSpec::RadialAnnulus { dim: 5, r_in, r_out, nodes: 3000 }).unwrap();
        let f = ScalarField::zeros(&d);
        let g = |x: &[f64]| {
            let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
            if (r - r_in).abs() < 1e-9 {
                1.0
            } else {
                0.0
            }
        };
        let (u, _) = poisson_dirichlet(&f, &BoundaryData::Func(&g)).unwrap();
        let b = 1.0 / (r_in.powi(-3) - r_out.powi(-3));
        let a = -b * r_out.powi(-3);
        let exact = sample(&d, |x| a + b * x[0].powi(-3));
        let err = u.add_scaled(&exact, -1.0).unwrap().inf_norm();
        assert!(err < 2e-6, "annulus harmonic error {err}");
    }
}
