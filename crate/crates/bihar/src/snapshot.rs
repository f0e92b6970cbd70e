//! Field snapshots: a raw array of 64-bit little-endian floats in
//! lattice order (last axis fastest; radial in increasing r) plus a
//! sidecar JSON header `<path>.json` describing the domain.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoxGrid, Domain, MaskShape, MaskedDomain, RadialGrid, ScalarField};

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
enum ShapeTag {
    Box,
    Ball { center: Vec<f64>, radius: f64 },
    Annulus { center: Vec<f64>, r_in: f64, r_out: f64 },
    RadialBall { radius: f64 },
    RadialAnnulus { r_in: f64, r_out: f64 },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    kind: String,
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    dims: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    side: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    radii: Option<Vec<f64>>,
    shape_tag: ShapeTag,
    values: usize,
}

fn header_for(domain: &Domain, count: usize) -> Result<Header> {
    Ok(match domain {
        Domain::Box(g) => Header {
            kind: "box".into(),
            n: g.dim(),
            dims: Some(vec![g.nodes_per_axis(); g.dim()]),
            spacing: Some(g.spacing()),
            side: Some(g.side()),
            radii: None,
            shape_tag: ShapeTag::Box,
            values: count,
        },
        Domain::Masked(m) => {
            let g = m.parent();
            let shape_tag = match m.shape() {
                MaskShape::Ball { center, radius } => {
                    ShapeTag::Ball { center: center.clone(), radius: *radius }
                }
                MaskShape::Annulus { center, r_in, r_out } => ShapeTag::Annulus {
                    center: center.clone(),
                    r_in: *r_in,
                    r_out: *r_out,
                },
                MaskShape::Custom => {
                    return Err(Error::Snapshot(
                        "custom masks carry no reconstructible shape".into(),
                    ))
                }
            };
            Header {
                kind: "masked".into(),
                n: g.dim(),
                dims: Some(vec![g.nodes_per_axis(); g.dim()]),
                spacing: Some(g.spacing()),
                side: Some(g.side()),
                radii: None,
                shape_tag,
                values: count,
            }
        }
        Domain::Radial(r) => {
            let shape_tag = if r.has_origin() {
                ShapeTag::RadialBall { radius: r.r_max() }
            } else {
                ShapeTag::RadialAnnulus { r_in: r.r_min(), r_out: r.r_max() }
            };
            Header {
                kind: "radial".into(),
                n: r.dim(),
                dims: None,
                spacing: None,
                side: None,
                radii: Some(r.radii().to_vec()),
                shape_tag,
                values: count,
            }
        }
    })
}

fn domain_from_header(h: &Header) -> Result<Arc<Domain>> {
    let bad = |msg: &str| Error::Snapshot(msg.to_string());
    match h.kind.as_str() {
        "box" => {
            let side = h.side.ok_or_else(|| bad("box header lacks side"))?;
            let dims = h.dims.as_ref().ok_or_else(|| bad("box header lacks dims"))?;
            let n_axis = *dims.first().ok_or_else(|| bad("empty dims"))?;
            if dims.len() != h.n || dims.iter().any(|&d| d != n_axis) {
                return Err(bad("box lattices are isotropic"));
            }
            Ok(Arc::new(Domain::Box(BoxGrid::new(h.n, side, n_axis)?)))
        }
        "masked" => {
            let side = h.side.ok_or_else(|| bad("masked header lacks side"))?;
            let dims = h.dims.as_ref().ok_or_else(|| bad("masked header lacks dims"))?;
            let n_axis = *dims.first().ok_or_else(|| bad("empty dims"))?;
            let parent = BoxGrid::new(h.n, side, n_axis)?;
            let masked = match &h.shape_tag {
                ShapeTag::Ball { center, radius } => {
                    let (c, r) = (center.clone(), *radius);
                    MaskedDomain::from_predicate(
                        parent,
                        MaskShape::Ball { center: c.clone(), radius: r },
                        |x| crate::grid::dist(x, &c) < r,
                    )?
                }
                ShapeTag::Annulus { center, r_in, r_out } => {
                    let (c, ri, ro) = (center.clone(), *r_in, *r_out);
                    MaskedDomain::from_predicate(
                        parent,
                        MaskShape::Annulus { center: c.clone(), r_in: ri, r_out: ro },
                        |x| {
                            let d = crate::grid::dist(x, &c);
                            d > ri && d < ro
                        },
                    )?
                }
                _ => return Err(bad("masked header carries a non-mask shape tag")),
            };
            Ok(Arc::new(Domain::Masked(masked)))
        }
        "radial" => {
            let radii = h.radii.clone().ok_or_else(|| bad("radial header lacks radii"))?;
            Ok(Arc::new(Domain::Radial(RadialGrid::new(h.n, radii)?)))
        }
        other => Err(bad(&format!("unknown snapshot kind {other}"))),
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

/// Writes `path` (raw little-endian f64 values) and `path.json`.
pub fn write_snapshot(field: &ScalarField, path: &Path) -> Result<()> {
    let header = header_for(field.domain(), field.len())?;
    let json = serde_json::to_string_pretty(&header)
        .map_err(|e| Error::Snapshot(format!("header encode: {e}")))?;
    fs::write(sidecar_path(path), json)?;

    let mut raw = Vec::with_capacity(field.len() * 8);
    for v in field.values() {
        raw.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&raw)?;
    Ok(())
}

/// Reads a snapshot written by [`write_snapshot`].
pub fn read_snapshot(path: &Path) -> Result<ScalarField> {
    let text = fs::read_to_string(sidecar_path(path))?;
    let header: Header =
        serde_json::from_str(&text).map_err(|e| Error::Snapshot(format!("header decode: {e}")))?;
    let domain = domain_from_header(&header)?;

    let mut raw = Vec::new();
    fs::File::open(path)?.read_to_end(&mut raw)?;
    if raw.len() != header.values * 8 {
        return Err(Error::Snapshot(format!(
            "raw payload holds {} bytes, header promises {} values",
            raw.len(),
            header.values
        )));
    }
    let values: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ScalarField::new(domain, values)
}
