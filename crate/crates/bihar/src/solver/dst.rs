//! Type-I discrete sine transform applied along every axis of a flat
//! n-dimensional lattice array, plus the matching discrete eigenvalues.
//!
//! The transform matrix S[k][m] = sin((k+1)(m+1) pi / (N+1)) is symmetric
//! and satisfies S^2 = (N+1)/2 * I, so the same pass serves as forward
//! and inverse up to the scalar (2/(N+1))^dim.

pub struct SineTransform {
    n: usize,
    mat: Vec<f64>,
}

const TILE: usize = 512;

impl SineTransform {
    pub fn new(n: usize) -> Self {
        let denom = (n + 1) as f64;
        let mut mat = vec![0.0; n * n];
        for k in 0..n {
            for m in 0..n {
                mat[k * n + m] =
                    (std::f64::consts::PI * (k + 1) as f64 * (m + 1) as f64 / denom).sin();
            }
        }
        SineTransform { n, mat }
    }

    /// Inverse-pass scale factor per full dim-axis sweep.
    pub fn inverse_scale(&self, dim: usize) -> f64 {
        (2.0 / (self.n + 1) as f64).powi(dim as i32)
    }

    /// One unnormalized sweep over all axes; `scratch` must match
    /// `data` in length.
    pub fn sweep(&self, data: &mut Vec<f64>, scratch: &mut Vec<f64>, dim: usize) {
        let n = self.n;
        debug_assert_eq!(data.len(), n.pow(dim as u32));
        debug_assert_eq!(scratch.len(), data.len());
        let len = data.len();
        for ax in (0..dim).rev() {
            // stride between consecutive entries along axis `ax`
            let stride = n.pow((dim - 1 - ax) as u32);
            let block = stride * n;
            if stride == 1 {
                // contiguous lines: plain matrix-vector per line
                for base in (0..len).step_by(n) {
                    let line = &data[base..base + n];
                    let out = &mut scratch[base..base + n];
                    for k in 0..n {
                        let row = &self.mat[k * n..(k + 1) * n];
                        out[k] = row.iter().zip(line).map(|(a, b)| a * b).sum();
                    }
                }
            } else {
                let mut acc = [0.0f64; TILE];
                for base in (0..len).step_by(block) {
                    let mut t0 = 0;
                    while t0 < stride {
                        let tl = TILE.min(stride - t0);
                        for k in 0..n {
                            acc[..tl].fill(0.0);
                            for m in 0..n {
                                let c = self.mat[k * n + m];
                                let src = &data[base + m * stride + t0..][..tl];
                                for (a, &s) in acc[..tl].iter_mut().zip(src) {
                                    *a += c * s;
                                }
                            }
                            scratch[base + k * stride + t0..][..tl].copy_from_slice(&acc[..tl]);
                        }
                        t0 += tl;
                    }
                }
            }
            std::mem::swap(data, scratch);
        }
    }
}

/// Eigenvalues of the 1-d Dirichlet second-difference stencil on N
/// interior nodes with spacing h: ev[m] = (2/h^2)(1 - cos((m+1) pi/(N+1))).
pub fn dirichlet_eigenvalues(n: usize, h: f64) -> Vec<f64> {
    let denom = (n + 1) as f64;
    (0..n)
        .map(|m| 2.0 / (h * h) * (1.0 - (std::f64::consts::PI * (m + 1) as f64 / denom).cos()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn double_sweep_is_identity() {
        let n = 7;
        let dim = 3;
        let t = SineTransform::new(n);
        let len = n.pow(dim as u32);
        let orig: Vec<f64> = (0..len).map(|i| ((i * 2654435761) % 1000) as f64 / 1000.0).collect();
        let mut data = orig.clone();
        let mut scratch = vec![0.0; len];
        t.sweep(&mut data, &mut scratch, dim);
        t.sweep(&mut data, &mut scratch, dim);
        let s = t.inverse_scale(dim);
        for (d, o) in data.iter().zip(&orig) {
            assert_relative_eq!(d * s, *o, epsilon = 1e-12);
        }
    }

    #[test]
    fn sweep_diagonalizes_eigenmode() {
        // sin(2 pi i / (N+1)) per axis is an exact lattice eigenmode
        let n = 9;
        let dim = 2;
        let t = SineTransform::new(n);
        let len = n * n;
        let mode = |i: usize, j: usize| {
            let d = (n + 1) as f64;
            (2.0 * std::f64::consts::PI * (i + 1) as f64 / d).sin()
                * (std::f64::consts::PI * (j + 1) as f64 / d).sin()
        };
        let mut data: Vec<f64> = (0..len).map(|f| mode(f / n, f % n)).collect();
        let mut scratch = vec![0.0; len];
        t.sweep(&mut data, &mut scratch, dim);
        // all coefficients vanish except (k0, k1) = (1, 0)
        for k0 in 0..n {
            for k1 in 0..n {
                let v = data[k0 * n + k1];
                if (k0, k1) == (1, 0) {
                    assert!(v.abs() > 1.0);
                } else {
                    assert!(v.abs() < 1e-10, "leak at ({k0},{k1}): {v}");
                }
            }
        }
    }
}
