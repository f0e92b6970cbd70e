//! Exact half-integer gamma values, unit-sphere areas and 1-d quadrature
//! helpers shared by the constants and the oracles.

use std::f64::consts::PI;

/// Gamma(k/2) for integer k >= 1, computed exactly from the recursion
/// Gamma(x+1) = x Gamma(x) starting at Gamma(1/2) = sqrt(pi), Gamma(1) = 1.
pub fn gamma_half(k: usize) -> f64 {
    assert!(k >= 1, "gamma_half wants k >= 1");
    let mut x = if k % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut two_a = if k % 2 == 0 { 2 } else { 1 }; // current argument, doubled
    while two_a < k {
        x *= two_a as f64 / 2.0;
        two_a += 2;
    }
    x
}

/// Surface area of the unit sphere S^{n-1} in R^n.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n)
}

/// Volume of the unit ball in R^n.
#[cfg(test)]
pub fn ball_volume(n: usize) -> f64 {
    sphere_area(n) / n as f64
}

/// Beta function at half-integer arguments: B(j/2, k/2).
#[cfg(test)]
pub fn beta_half(j: usize, k: usize) -> f64 {
    gamma_half(j) * gamma_half(k) / gamma_half(j + k)
}

/// Composite Simpson rule on [a, b]; `panels` is the number of
/// double-intervals, so the rule uses 2*panels + 1 evaluations.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    assert!(panels >= 1);
    let m = 2 * panels;
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Integral over R^n of a radial profile g(r), i.e.
/// omega_{n-1} * int_0^inf r^{n-1} g(r) dr, via the substitution
/// r = tan(theta) which maps [0, inf) onto [0, pi/2).
pub fn radial_integral_rn<G: Fn(f64) -> f64>(n: usize, g: G, panels: usize) -> f64 {
    let theta_integrand = |t: f64| {
        // r^{n-1} g(r) dr = tan^{n-1} t * g(tan t) * sec^2 t dt; the
        // endpoint is clamped just below pi/2 because integrands like
        // (Delta delta)^2 have a finite nonzero limit there
        let t = t.min(PI / 2.0 - 1e-9);
        let (s, c) = t.sin_cos();
        let r = s / c;
        r.powi(n as i32 - 1) * g(r) / (c * c)
    };
    sphere_area(n) * simpson(theta_integrand, 0.0, PI / 2.0, panels)
}

/// Ordinary least squares fit y = intercept + slope * x.
pub fn ols_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// Log-log slope of err vs scale: fits log|err| = c + p log(scale).
pub fn loglog_slope(scales: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.abs().max(f64::MIN_POSITIVE).ln()).collect();
    ols_line(&xs, &ys).1
}

/// Dense linear solve by Gaussian elimination with partial pivoting;
/// `a` is n x n row-major. Returns None on a (numerically) singular
/// system. Sized for the small Gram and normal-equation systems here.
pub fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())?;
        if pivot == 0.0 || !pivot.is_finite() {
            return None;
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
            b.swap(col, pivot_row);
        }
        for r in col + 1..n {
            let factor = a[r * n + col] / a[col * n + col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[r * n + k] -= factor * a[col * n + k];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
        if !x[row].is_finite() {
            return None;
        }
    }
    Some(x)
}
