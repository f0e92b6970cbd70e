//! Typed run configurations: every subcommand's inputs serialize to the
//! manifest, and a run re-executed from that echo reproduces its
//! outputs byte for byte (fixed reduction orders throughout the
//! numerics). Unknown keys are rejected.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use bihar::grid::{make_domain, Domain, Point, ShapeSpec};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DomainConfig {
    /// box | ball | annulus
    pub shape: String,
    /// radial | masked (ball and annulus only)
    #[serde(default)]
    pub backend: Option<String>,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// box side (box and masked backends)
    #[serde(default)]
    pub side: Option<f64>,
    /// nodes per axis (box lattices) or radial node count
    pub nodes: usize,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub r_in: Option<f64>,
    #[serde(default)]
    pub r_out: Option<f64>,
}

fn default_dim() -> usize {
    5
}

impl DomainConfig {
    pub fn build(&self) -> Result<Arc<Domain>, CliError> {
        let backend = self.backend.as_deref().unwrap_or("radial");
        let spec = match (self.shape.as_str(), backend) {
            ("box", _) => ShapeSpec::Box {
                dim: self.dim,
                side: self.side.unwrap_or(1.0),
                nodes_per_axis: self.nodes,
            },
            ("ball", "radial") => ShapeSpec::RadialBall {
                dim: self.dim,
                radius: self.radius.unwrap_or(1.0),
                nodes: self.nodes,
            },
            ("ball", "masked") => ShapeSpec::MaskedBall {
                dim: self.dim,
                side: self.side.unwrap_or(2.2),
                nodes_per_axis: self.nodes,
                radius: self.radius.unwrap_or(1.0),
            },
            ("annulus", "radial") => ShapeSpec::RadialAnnulus {
                dim: self.dim,
                r_in: self.r_in.unwrap_or(0.5),
                r_out: self.r_out.unwrap_or(1.0),
                nodes: self.nodes,
            },
            ("annulus", "masked") => ShapeSpec::MaskedAnnulus {
                dim: self.dim,
                side: self.side.unwrap_or(2.2),
                nodes_per_axis: self.nodes,
                r_in: self.r_in.unwrap_or(0.5),
                r_out: self.r_out.unwrap_or(1.0),
            },
            (shape, backend) => {
                return Err(CliError::config(format!(
                    "unsupported domain: shape {shape}, backend {backend}"
                )))
            }
        };
        make_domain(&spec).map_err(CliError::from)
    }

    /// Geometric center of the domain (radial meshes sit at the origin).
    pub fn center(&self) -> Vec<f64> {
        match (self.shape.as_str(), self.backend.as_deref().unwrap_or("radial")) {
            ("box", _) => vec![self.side.unwrap_or(1.0) / 2.0; self.dim],
            (_, "masked") => vec![self.side.unwrap_or(2.2) / 2.0; self.dim],
            _ => vec![0.0; self.dim],
        }
    }
}

/// Parses "20:320:x2" (geometric sweep) or "20,40,80" (explicit list).
pub fn parse_lambdas(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::config(format!("cannot parse lambda sweep '{text}'"));
    if let Some((head, factor)) = text.split_once(":x") {
        let (lo, hi) = head.split_once(':').ok_or_else(bad)?;
        let lo: f64 = lo.parse().map_err(|_| bad())?;
        let hi: f64 = hi.parse().map_err(|_| bad())?;
        let factor: f64 = factor.parse().map_err(|_| bad())?;
        if !(lo > 0.0 && hi >= lo && factor > 1.0) {
            return Err(bad());
        }
        let mut out = Vec::new();
        let mut l = lo;
        while l <= hi * (1.0 + 1e-12) {
            out.push(l);
            l *= factor;
        }
        Ok(out)
    } else {
        text.split(',')
            .map(|tok| tok.trim().parse::<f64>().map_err(|_| bad()))
            .collect()
    }
}

/// Parses "0.4,0.5;0.6,0.5" into points.
pub fn parse_points(text: &str, dim: usize) -> Result<Vec<Point>, CliError> {
    text.split(';')
        .map(|chunk| {
            let coords: Result<Vec<f64>, _> = chunk
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::config(format!("bad coordinate '{tok}'")))
                })
                .collect();
            let coords = coords?;
            if coords.len() != dim {
                return Err(CliError::config(format!(
                    "point '{chunk}' has {} coordinates, domain has {dim}",
                    coords.len()
                )));
            }
            Ok(Point::new(coords))
        })
        .collect()
}

pub fn parse_weights(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| CliError::config(format!("bad weight '{tok}'")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_sweeps() {
        assert_eq!(parse_lambdas("20:320:x2").unwrap(), vec![20.0, 40.0, 80.0, 160.0, 320.0]);
        assert_eq!(parse_lambdas("1,2, 3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(parse_lambdas("garbage").is_err());
        assert!(parse_lambdas("10:5:x2").is_err());
    }

    #[test]
    fn point_lists() {
        let pts = parse_points("0.4,0.5;0.6,0.5", 2).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(parse_points("0.4,0.5", 3).is_err());
    }
}
