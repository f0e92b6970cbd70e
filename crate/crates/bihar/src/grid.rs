//! Discrete domains in R^n and fields over them.
//!
//! Three grid kinds cover every computation in this crate:
//!
//! * [`BoxGrid`] — interior lattice of the cube (0, L)^n, spacing
//!   h = L/(N+1); boundary values live on the lattice faces and are
//!   supplied as data, never stored.
//! * [`MaskedDomain`] — a box lattice with an inside indicator (ball,
//!   annulus or custom mask); stencils see the true boundary through
//!   first-order ghost projections.
//! * [`RadialGrid`] — a 1-d mesh in r for radially reduced problems on
//!   the ball (regularity condition at r = 0) or annulus; the mesh
//!   includes the Dirichlet endpoint nodes so quadrature covers the
//!   whole interval.
//!
//! Fields are immutable after construction; every operation returns a
//! new field.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::special::sphere_area;

/// A point of the ambient R^n.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point { coords }
    }

    /// Origin of R^n.
    pub fn origin(dim: usize) -> Self {
        Point { coords: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dist(&self, other: &Point) -> f64 {
        dist(&self.coords, &other.coords)
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Interior lattice of the box (0, L)^n.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxGrid {
    dim: usize,
    side: f64,
    nodes_per_axis: usize,
}

impl BoxGrid {
    pub fn new(dim: usize, side: f64, nodes_per_axis: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDomain("dimension must be positive".into()));
        }
        if !(side > 0.0) {
            return Err(Error::InvalidDomain(format!("box side {side} must be positive")));
        }
        if nodes_per_axis < 3 {
            return Err(Error::InvalidDomain(format!(
                "nodes per axis {nodes_per_axis} < 3"
            )));
        }
        let count = (nodes_per_axis as u128).pow(dim as u32);
        if count > (1 << 31) {
            return Err(Error::InvalidDomain(format!(
                "lattice of {count} nodes exceeds the memory guard"
            )));
        }
        Ok(BoxGrid { dim, side, nodes_per_axis })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn spacing(&self) -> f64 {
        self.side / (self.nodes_per_axis + 1) as f64
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis.pow(self.dim as u32)
    }

    /// Decodes a flat index (last axis fastest) into lattice indices.
    pub fn decode(&self, flat: usize, idx: &mut [usize]) {
        let n = self.nodes_per_axis;
        let mut rest = flat;
        for k in (0..self.dim).rev() {
            idx[k] = rest % n;
            rest /= n;
        }
    }

    pub fn encode(&self, idx: &[usize]) -> usize {
        let n = self.nodes_per_axis;
        idx.iter().fold(0, |acc, &i| acc * n + i)
    }

    /// Coordinates of lattice node `flat` (interior: indices 0..N map to
    /// coordinates h..Nh).
    pub fn position(&self, flat: usize, out: &mut [f64]) {
        let h = self.spacing();
        let n = self.nodes_per_axis;
        let mut rest = flat;
        for k in (0..self.dim).rev() {
            out[k] = ((rest % n) + 1) as f64 * h;
            rest /= n;
        }
    }

    fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().all(|&c| c > 0.0 && c < self.side)
    }

    fn dist_to_boundary(&self, x: &[f64]) -> f64 {
        x.iter()
            .map(|&c| c.min(self.side - c))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Shape carried by a masked domain.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskShape {
    Ball { center: Vec<f64>, radius: f64 },
    Annulus { center: Vec<f64>, r_in: f64, r_out: f64 },
    Custom,
}

const GHOST_BIT: u32 = 1 << 31;

/// Box lattice restricted to an inside indicator.
#[derive(Debug, Clone)]
pub struct MaskedDomain {
    parent: BoxGrid,
    shape: MaskShape,
    /// Flat lattice indices of the inside nodes, ascending; this is the
    /// storage order of fields on the domain.
    nodes: Vec<u32>,
    /// Lattice index -> dense rank (u32::MAX for outside nodes).
    rank: Vec<u32>,
    /// 2*dim entries per dense node: dense neighbor rank, or
    /// GHOST_BIT | ghost index for stencil legs that leave the domain.
    neighbors: Vec<u32>,
    /// Ghost projection points, dim coordinates each.
    ghost_points: Vec<f64>,
    /// Dense ranks of inside nodes with at least one outside neighbor.
    boundary_nodes: Vec<u32>,
}

impl PartialEq for MaskedDomain {
    fn eq(&self, other: &Self) -> bool {
        self.parent == other.parent && self.shape == other.shape && self.nodes == other.nodes
    }
}

impl MaskedDomain {
    pub fn from_predicate<F: Fn(&[f64]) -> bool>(
        parent: BoxGrid,
        shape: MaskShape,
        inside: F,
    ) -> Result<Self> {
        let total = parent.node_count();
        let dim = parent.dim();
        let mut nodes = Vec::new();
        let mut rank = vec![u32::MAX; total];
        let mut pos = vec![0.0; dim];
        for flat in 0..total {
            parent.position(flat, &mut pos);
            if inside(&pos) {
                rank[flat] = nodes.len() as u32;
                nodes.push(flat as u32);
            }
        }
        if nodes.is_empty() {
            return Err(Error::InvalidDomain("mask selects no interior node".into()));
        }

        let n = parent.nodes_per_axis();
        let mut neighbors = Vec::with_capacity(nodes.len() * 2 * dim);
        let mut ghost_points = Vec::new();
        let mut boundary_nodes = Vec::new();
        let mut idx = vec![0usize; dim];
        let mut nb_pos = vec![0.0; dim];
        let h = parent.spacing();
        for (dense, &flat) in nodes.iter().enumerate() {
            parent.decode(flat as usize, &mut idx);
            parent.position(flat as usize, &mut pos);
            let mut has_ghost = false;
            for k in 0..dim {
                for dir in [-1isize, 1] {
                    let neighbor_rank = {
                        let i = idx[k] as isize + dir;
                        if i < 0 || i >= n as isize {
                            u32::MAX
                        } else {
                            let mut jdx = idx.clone();
                            jdx[k] = i as usize;
                            rank[parent.encode(&jdx)]
                        }
                    };
                    if neighbor_rank != u32::MAX {
                        neighbors.push(neighbor_rank);
                    } else {
                        nb_pos.copy_from_slice(&pos);
                        nb_pos[k] += dir as f64 * h;
                        let proj = shape_projection(&shape, &pos, &nb_pos);
                        has_ghost = true;
                        let ghost_idx = (ghost_points.len() / dim) as u32;
                        ghost_points.extend_from_slice(&proj);
                        neighbors.push(GHOST_BIT | ghost_idx);
                    }
                }
            }
            if has_ghost {
                boundary_nodes.push(dense as u32);
            }
        }

        Ok(MaskedDomain {
            parent,
            shape,
            nodes,
            rank,
            neighbors,
            ghost_points,
            boundary_nodes,
        })
    }

    pub fn parent(&self) -> &BoxGrid {
        &self.parent
    }

    pub fn shape(&self) -> &MaskShape {
        &self.shape
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn boundary_node_count(&self) -> usize {
        self.boundary_nodes.len()
    }

    pub fn lattice_index(&self, dense: usize) -> usize {
        self.nodes[dense] as usize
    }

    pub fn position(&self, dense: usize, out: &mut [f64]) {
        self.parent.position(self.nodes[dense] as usize, out);
    }

    pub(crate) fn rank_of_lattice(&self, flat: usize) -> Option<usize> {
        let r = self.rank[flat];
        (r != u32::MAX).then_some(r as usize)
    }

    /// Stencil legs of a dense node: `Ok(rank)` for an inside neighbor,
    /// `Err(ghost)` with the boundary projection point index otherwise.
    pub(crate) fn stencil(&self, dense: usize) -> impl Iterator<Item = std::result::Result<usize, usize>> + '_ {
        let dim2 = 2 * self.parent.dim();
        self.neighbors[dense * dim2..(dense + 1) * dim2]
            .iter()
            .map(|&code| {
                if code & GHOST_BIT == 0 {
                    Ok(code as usize)
                } else {
                    Err((code & !GHOST_BIT) as usize)
                }
            })
    }

    pub(crate) fn ghost_point(&self, ghost: usize) -> &[f64] {
        let d = self.parent.dim();
        &self.ghost_points[ghost * d..(ghost + 1) * d]
    }

    fn contains(&self, x: &[f64]) -> bool {
        if !self.parent.contains(x) {
            return false;
        }
        match &self.shape {
            MaskShape::Ball { center, radius } => dist(x, center) < *radius,
            MaskShape::Annulus { center, r_in, r_out } => {
                let r = dist(x, center);
                r > *r_in && r < *r_out
            }
            MaskShape::Custom => {
                // nearest lattice node decides
                let h = self.parent.spacing();
                let n = self.parent.nodes_per_axis();
                let mut idx = vec![0usize; x.len()];
                for (k, &c) in x.iter().enumerate() {
                    let i = (c / h).round() as isize - 1;
                    if i < 0 || i >= n as isize {
                        return false;
                    }
                    idx[k] = i as usize;
                }
                self.rank[self.parent.encode(&idx)] != u32::MAX
            }
        }
    }

    fn dist_to_boundary(&self, x: &[f64]) -> f64 {
        match &self.shape {
            MaskShape::Ball { center, radius } => radius - dist(x, center),
            MaskShape::Annulus { center, r_in, r_out } => {
                let r = dist(x, center);
                (r - r_in).min(r_out - r)
            }
            MaskShape::Custom => {
                let mut best = f64::INFINITY;
                let mut pos = vec![0.0; self.parent.dim()];
                for &b in &self.boundary_nodes {
                    self.position(b as usize, &mut pos);
                    best = best.min(dist(x, &pos));
                }
                best
            }
        }
    }
}

/// Projects the outside neighbor position onto the true boundary
/// (radially for ball/annulus, edge midpoint for custom masks).
fn shape_projection(shape: &MaskShape, inside_pos: &[f64], outside_pos: &[f64]) -> Vec<f64> {
    match shape {
        MaskShape::Ball { center, radius } => radial_projection(center, outside_pos, *radius),
        MaskShape::Annulus { center, r_in, r_out } => {
            let r = dist(outside_pos, center);
            let target = if r <= *r_in { *r_in } else { *r_out };
            radial_projection(center, outside_pos, target)
        }
        MaskShape::Custom => inside_pos
            .iter()
            .zip(outside_pos)
            .map(|(a, b)| 0.5 * (a + b))
            .collect(),
    }
}

fn radial_projection(center: &[f64], x: &[f64], target: f64) -> Vec<f64> {
    let r = dist(x, center);
    if r == 0.0 {
        let mut p = center.to_vec();
        p[0] += target;
        return p;
    }
    center
        .iter()
        .zip(x)
        .map(|(c, xi)| c + (xi - c) * target / r)
        .collect()
}

/// 1-d mesh for radially symmetric problems centered at the origin.
///
/// The mesh includes its endpoints. With `r_min = 0` the first node is
/// the origin, a genuine unknown closed by the regularity condition
/// u'(0) = 0; otherwise the first node is a Dirichlet node, and the
/// last node always is.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    dim: usize,
    radii: Vec<f64>,
}

impl RadialGrid {
    pub fn new(dim: usize, radii: Vec<f64>) -> Result<Self> {
        if radii.len() < 3 {
            return Err(Error::InvalidDomain("radial mesh needs at least 3 nodes".into()));
        }
        if radii[0] < 0.0 {
            return Err(Error::InvalidDomain("radii must be nonnegative".into()));
        }
        if !radii.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidDomain("radii must be strictly increasing".into()));
        }
        Ok(RadialGrid { dim, radii })
    }

    pub fn uniform(dim: usize, r_min: f64, r_max: f64, nodes: usize) -> Result<Self> {
        if !(r_max > r_min) {
            return Err(Error::InvalidDomain(format!(
                "radial interval [{r_min}, {r_max}] is degenerate"
            )));
        }
        let m = nodes.max(3);
        let mut radii: Vec<f64> = (0..m)
            .map(|j| r_min + (r_max - r_min) * (j as f64 / (m - 1) as f64))
            .collect();
        radii[0] = r_min;
        radii[m - 1] = r_max;
        RadialGrid::new(dim, radii)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn r_min(&self) -> f64 {
        self.radii[0]
    }

    pub fn r_max(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    pub fn node_count(&self) -> usize {
        self.radii.len()
    }

    /// True when the origin node is present (ball reduction).
    pub fn has_origin(&self) -> bool {
        self.radii[0] == 0.0
    }

    /// Index range of the unknown (non-Dirichlet) nodes.
    pub(crate) fn unknown_range(&self) -> std::ops::Range<usize> {
        let start = if self.has_origin() { 0 } else { 1 };
        start..self.radii.len() - 1
    }

    fn contains(&self, x: &[f64]) -> bool {
        let r = norm(x);
        if self.has_origin() {
            r < self.r_max()
        } else {
            r > self.r_min() && r < self.r_max()
        }
    }

    fn dist_to_boundary(&self, x: &[f64]) -> f64 {
        let r = norm(x);
        if self.has_origin() {
            self.r_max() - r
        } else {
            (r - self.r_min()).min(self.r_max() - r)
        }
    }
}

/// A discretized domain of R^n.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Box(BoxGrid),
    Masked(MaskedDomain),
    Radial(RadialGrid),
}

/// Shape descriptor accepted by [`make_domain`].
#[derive(Debug, Clone)]
pub enum ShapeSpec {
    Box { dim: usize, side: f64, nodes_per_axis: usize },
    RadialBall { dim: usize, radius: f64, nodes: usize },
    RadialAnnulus { dim: usize, r_in: f64, r_out: f64, nodes: usize },
    MaskedBall { dim: usize, side: f64, nodes_per_axis: usize, radius: f64 },
    MaskedAnnulus { dim: usize, side: f64, nodes_per_axis: usize, r_in: f64, r_out: f64 },
}

/// Builds a domain from a shape descriptor, rejecting degenerate shapes.
pub fn make_domain(spec: &ShapeSpec) -> Result<Arc<Domain>> {
    let domain = match *spec {
        ShapeSpec::Box { dim, side, nodes_per_axis } => {
            Domain::Box(BoxGrid::new(dim, side, nodes_per_axis)?)
        }
        ShapeSpec::RadialBall { dim, radius, nodes } => {
            if !(radius > 0.0) {
                return Err(Error::InvalidDomain(format!("ball radius {radius} must be positive")));
            }
            Domain::Radial(RadialGrid::uniform(dim, 0.0, radius, nodes)?)
        }
        ShapeSpec::RadialAnnulus { dim, r_in, r_out, nodes } => {
            if !(r_in > 0.0 && r_out > r_in) {
                return Err(Error::InvalidDomain(format!(
                    "annulus radii ({r_in}, {r_out}) are degenerate"
                )));
            }
            Domain::Radial(RadialGrid::uniform(dim, r_in, r_out, nodes)?)
        }
        ShapeSpec::MaskedBall { dim, side, nodes_per_axis, radius } => {
            if !(radius > 0.0) {
                return Err(Error::InvalidDomain(format!("ball radius {radius} must be positive")));
            }
            if 2.0 * radius >= side {
                return Err(Error::InvalidDomain("ball does not fit in the box".into()));
            }
            let parent = BoxGrid::new(dim, side, nodes_per_axis)?;
            let center = vec![side / 2.0; dim];
            let shape = MaskShape::Ball { center: center.clone(), radius };
            Domain::Masked(MaskedDomain::from_predicate(parent, shape, |x| {
                dist(x, &center) < radius
            })?)
        }
        ShapeSpec::MaskedAnnulus { dim, side, nodes_per_axis, r_in, r_out } => {
            if !(r_in > 0.0 && r_out > r_in) {
                return Err(Error::InvalidDomain(format!(
                    "annulus radii ({r_in}, {r_out}) are degenerate"
                )));
            }
            if 2.0 * r_out >= side {
                return Err(Error::InvalidDomain("annulus does not fit in the box".into()));
            }
            let parent = BoxGrid::new(dim, side, nodes_per_axis)?;
            let center = vec![side / 2.0; dim];
            let shape = MaskShape::Annulus { center: center.clone(), r_in, r_out };
            Domain::Masked(MaskedDomain::from_predicate(parent, shape, |x| {
                let r = dist(x, &center);
                r > r_in && r < r_out
            })?)
        }
    };
    Ok(Arc::new(domain))
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Box(g) => g.dim(),
            Domain::Masked(m) => m.parent().dim(),
            Domain::Radial(r) => r.dim(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Domain::Box(g) => g.node_count(),
            Domain::Masked(m) => m.node_count(),
            Domain::Radial(r) => r.node_count(),
        }
    }

    /// Representative coordinates of node `i`. Radial nodes report the
    /// point r_i * e_1; radially symmetric data sees no difference.
    pub fn node_position(&self, i: usize, out: &mut [f64]) {
        match self {
            Domain::Box(g) => g.position(i, out),
            Domain::Masked(m) => m.position(i, out),
            Domain::Radial(r) => {
                out.fill(0.0);
                out[0] = r.radii()[i];
            }
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        if x.dim() != self.dim() {
            return false;
        }
        match self {
            Domain::Box(g) => g.contains(x.coords()),
            Domain::Masked(m) => m.contains(x.coords()),
            Domain::Radial(r) => r.contains(x.coords()),
        }
    }

    /// Euclidean distance from an inside point to the boundary.
    pub fn dist_to_boundary(&self, x: &Point) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::OutsideDomain);
        }
        Ok(match self {
            Domain::Box(g) => g.dist_to_boundary(x.coords()),
            Domain::Masked(m) => m.dist_to_boundary(x.coords()),
            Domain::Radial(r) => r.dist_to_boundary(x.coords()),
        })
    }

    /// Lattice spacing of the underlying mesh (minimal spacing for a
    /// nonuniform radial mesh).
    pub fn spacing(&self) -> f64 {
        match self {
            Domain::Box(g) => g.spacing(),
            Domain::Masked(m) => m.parent().spacing(),
            Domain::Radial(r) => r
                .radii()
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub(crate) fn compatible(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other) || **self == **other
    }
}

/// Samples a function at every node of the domain.
pub fn sample<F: FnMut(&[f64]) -> f64>(domain: &Arc<Domain>, mut f: F) -> ScalarField {
    let mut pos = vec![0.0; domain.dim()];
    let values = (0..domain.node_count())
        .map(|i| {
            domain.node_position(i, &mut pos);
            f(&pos)
        })
        .collect();
    ScalarField { domain: domain.clone(), values }
}

/// Values of a function on a discrete domain; immutable once built.
#[derive(Debug, Clone)]
pub struct ScalarField {
    domain: Arc<Domain>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(domain: Arc<Domain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.node_count() {
            return Err(Error::DomainMismatch(format!(
                "field carries {} values, domain has {} nodes",
                values.len(),
                domain.node_count()
            )));
        }
        Ok(ScalarField { domain, values })
    }

    pub fn zeros(domain: &Arc<Domain>) -> Self {
        ScalarField {
            domain: domain.clone(),
            values: vec![0.0; domain.node_count()],
        }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn check_same_domain(&self, other: &ScalarField) -> Result<()> {
        if self.domain.compatible(&other.domain) {
            Ok(())
        } else {
            Err(Error::DomainMismatch("fields live on different domains".into()))
        }
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> ScalarField {
        ScalarField {
            domain: self.domain.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> ScalarField {
        self.map(|v| v * s)
    }

    /// self + s * other.
    pub fn add_scaled(&self, other: &ScalarField, s: f64) -> Result<ScalarField> {
        self.check_same_domain(other)?;
        Ok(ScalarField {
            domain: self.domain.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * b)
                .collect(),
        })
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Quadrature over the domain: midpoint rule h^n * sum on box and
    /// masked lattices, omega_{n-1} * sum w_j r_j^{n-1} f_j with
    /// trapezoid weights w_j on radial meshes. Sums are compensated so
    /// directional-derivative checks of the energy see rounding near
    /// machine level rather than sqrt(node count) above it.
    pub fn integrate(&self) -> f64 {
        Self::quadrature_reduce(&self.domain, &self.values, |v| v)
    }

    /// Quadrature inner product of two raw value slices on this field's
    /// domain (same weights as [`ScalarField::integrate`]).
    pub(crate) fn quadrature_dot(domain: &Domain, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        let mut it = b.iter();
        Self::quadrature_reduce(domain, a, move |x| x * it.next().unwrap())
    }

    fn quadrature_reduce<F: FnMut(f64) -> f64>(domain: &Domain, a: &[f64], mut term: F) -> f64 {
        let mut sum = KahanSum::default();
        match domain {
            Domain::Box(g) => {
                let hn = g.spacing().powi(g.dim() as i32);
                for &x in a {
                    sum.add(term(x));
                }
                hn * sum.value()
            }
            Domain::Masked(m) => {
                let g = m.parent();
                let hn = g.spacing().powi(g.dim() as i32);
                for &x in a {
                    sum.add(term(x));
                }
                hn * sum.value()
            }
            Domain::Radial(r) => {
                let radii = r.radii();
                let m = radii.len();
                for (j, &x) in a.iter().enumerate() {
                    let w = if j == 0 {
                        (radii[1] - radii[0]) / 2.0
                    } else if j == m - 1 {
                        (radii[m - 1] - radii[m - 2]) / 2.0
                    } else {
                        (radii[j + 1] - radii[j - 1]) / 2.0
                    };
                    sum.add(w * radii[j].powi(r.dim() as i32 - 1) * term(x));
                }
                sphere_area(r.dim()) * sum.value()
            }
        }
    }

    /// Multilinear interpolation at an interior point (linear in r on
    /// radial meshes). Lattice legs that leave the stored node set
    /// contribute zero.
    pub fn interpolate(&self, x: &Point) -> Result<f64> {
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain);
        }
        match &*self.domain {
            Domain::Radial(r) => {
                let rad = norm(x.coords());
                let radii = r.radii();
                let j = match radii.binary_search_by(|p| p.partial_cmp(&rad).unwrap()) {
                    Ok(j) => return Ok(self.values[j]),
                    Err(j) => j,
                };
                if j == 0 || j >= radii.len() {
                    return Err(Error::OutsideDomain);
                }
                let t = (rad - radii[j - 1]) / (radii[j] - radii[j - 1]);
                Ok((1.0 - t) * self.values[j - 1] + t * self.values[j])
            }
            Domain::Box(g) => Ok(lattice_interpolate(g, x.coords(), |flat| {
                Some(self.values[flat])
            })),
            Domain::Masked(m) => Ok(lattice_interpolate(m.parent(), x.coords(), |flat| {
                m.rank_of_lattice(flat).map(|r| self.values[r])
            })),
        }
    }
}

/// Kahan-Neumaier compensated accumulator.
#[derive(Default)]
struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn lattice_interpolate<F: Fn(usize) -> Option<f64>>(g: &BoxGrid, x: &[f64], value: F) -> f64 {
    let dim = g.dim();
    let h = g.spacing();
    let n = g.nodes_per_axis();
    let mut base = vec![0isize; dim];
    let mut frac = vec![0.0; dim];
    for k in 0..dim {
        let t = x[k] / h - 1.0;
        let f = t.floor();
        base[k] = f as isize;
        frac[k] = t - f;
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << dim) {
        let mut w = 1.0;
        let mut flat = 0usize;
        let mut valid = true;
        for k in 0..dim {
            let up = (corner >> k) & 1 == 1;
            let i = base[k] + if up { 1 } else { 0 };
            w *= if up { frac[k] } else { 1.0 - frac[k] };
            if i < 0 || i >= n as isize {
                valid = false;
                break;
            }
            flat = flat * n + i as usize;
        }
        if !valid || w == 0.0 {
            continue;
        }
        if let Some(v) = value(flat) {
            acc += w * v;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::ball_volume;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_box(n_axis: usize) -> Arc<Domain> {
        make_domain(&ShapeSpec::Box { dim: 5, side: 1.0, nodes_per_axis: n_axis }).unwrap()
    }

    #[test]
    fn box_lattice_dimensions() {
        let d = unit_box(15);
        assert_eq!(d.node_count(), 15usize.pow(5));
        assert_relative_eq!(d.spacing(), 1.0 / 16.0, max_relative = 1e-15);
    }

    #[test]
    fn radial_ball_spans_interval() {
        let d = make_domain(&ShapeSpec::RadialBall { dim: 5, radius: 1.0, nodes: 2000 }).unwrap();
        let Domain::Radial(r) = &*d else { panic!() };
        assert_eq!(r.node_count(), 2000);
        assert_eq!(r.r_min(), 0.0);
        assert_eq!(r.r_max(), 1.0);
        assert!(r.has_origin());
    }

    #[test]
    fn masked_annulus_nodes_lie_in_shell() {
        let d = make_domain(&ShapeSpec::MaskedAnnulus {
            dim: 5,
            side: 2.2,
            nodes_per_axis: 9,
            r_in: 0.5,
            r_out: 1.0,
        })
        .unwrap();
        let Domain::Masked(m) = &*d else { panic!() };
        let center = vec![1.1; 5];
        let mut pos = vec![0.0; 5];
        for i in 0..m.node_count() {
            m.position(i, &mut pos);
            let r = dist(&pos, &center);
            assert!(r > 0.5 && r < 1.0, "node at radius {r}");
        }
        assert!(m.boundary_node_count() > 0);
    }

    #[test]
    fn degenerate_shapes_rejected() {
        assert!(make_domain(&ShapeSpec::RadialAnnulus { dim: 5, r_in: 1.0, r_out: 0.5, nodes: 100 }).is_err());
        assert!(make_domain(&ShapeSpec::RadialBall { dim: 5, radius: -1.0, nodes: 100 }).is_err());
        assert!(make_domain(&ShapeSpec::Box { dim: 5, side: 1.0, nodes_per_axis: 2 }).is_err());
        assert!(make_domain(&ShapeSpec::MaskedBall { dim: 5, side: 1.0, nodes_per_axis: 9, radius: 0.7 }).is_err());
    }

    #[test]
    fn integrate_constant_box() {
        let d = unit_box(15);
        let one = sample(&d, |_| 1.0);
        // midpoint over interior nodes misses the boundary slivers: O(h)
        let v = one.integrate();
        assert!((v - 1.0).abs() < 5.0 * d.spacing(), "got {v}");
    }

    #[test]
    fn integrate_constant_radial_ball() {
        let d = make_domain(&ShapeSpec::RadialBall { dim: 5, radius: 1.0, nodes: 40_001 }).unwrap();
        let one = sample(&d, |_| 1.0);
        assert_relative_eq!(one.integrate(), ball_volume(5), epsilon = 1e-8);
    }

    #[test]
    fn dist_to_boundary_examples() {
        let b = unit_box(15);
        let x = Point::new(vec![0.5; 5]);
        assert_relative_eq!(b.dist_to_boundary(&x).unwrap(), 0.5, max_relative = 1e-15);

        let ball = make_domain(&ShapeSpec::RadialBall { dim: 5, radius: 1.0, nodes: 100 }).unwrap();
        let mut c = vec![0.0; 5];
        c[0] = 0.3;
        assert_relative_eq!(
            ball.dist_to_boundary(&Point::new(c)).unwrap(),
            0.7,
            max_relative = 1e-12
        );

        let ann = make_domain(&ShapeSpec::RadialAnnulus { dim: 5, r_in: 0.5, r_out: 1.0, nodes: 100 }).unwrap();
        let mut c = vec![0.0; 5];
        c[1] = 0.8;
        assert_relative_eq!(
            ann.dist_to_boundary(&Point::new(c)).unwrap(),
            0.2,
            max_relative = 1e-12
        );

        let mut outside = vec![0.0; 5];
        outside[0] = 1.4;
        assert!(ann.dist_to_boundary(&Point::new(outside)).is_err());
    }

    #[test]
    fn integrate_nonnegative() {
        let d = unit_box(5);
        let f = sample(&d, |x| x.iter().map(|c| (c - 0.5).abs()).sum::<f64>());
        assert!(f.integrate() >= 0.0);
    }

    #[test]
    fn richardson_orders() {
        // box midpoint on a smooth non-vanishing integrand: O(h)
        let f = |x: &[f64]| x.iter().map(|&c| c.cos()).product::<f64>();
        let exact = 1f64.sin().powi(5);
        let errs: Vec<f64> = [7usize, 15, 31]
            .iter()
            .map(|&n| {
                let d = unit_box(n);
                (sample(&d, f).integrate() - exact).abs()
            })
            .collect();
        let hs = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0];
        let slope = crate::special::loglog_slope(&hs, &errs);
        assert!((slope - 1.0).abs() < 0.35, "box midpoint order {slope}");

        // radial trapezoid: O(h^2)
        let errs: Vec<f64> = [101usize, 201, 401]
            .iter()
            .map(|&m| {
                let d = make_domain(&ShapeSpec::RadialBall { dim: 5, radius: 1.0, nodes: m }).unwrap();
                let v = sample(&d, |x| x[0].cos()).integrate();
                let exact = sample(
                    &make_domain(&ShapeSpec::RadialBall { dim: 5, radius: 1.0, nodes: 100_001 }).unwrap(),
                    |x| x[0].cos(),
                )
                .integrate();
                (v - exact).abs()
            })
            .collect();
        let hs = [1.0 / 100.0, 1.0 / 200.0, 1.0 / 400.0];
        let slope = crate::special::loglog_slope(&hs, &errs);
        assert!((slope - 2.0).abs() < 0.25, "radial trapezoid order {slope}");
    }

    #[test]
    fn interpolate_linear_field_box() {
        let d = unit_box(9);
        let f = sample(&d, |x| 2.0 * x[0] + 3.0 * x[2]);
        // multilinear interpolation is exact on affine functions away
        // from the boundary layer
        let p = Point::new(vec![0.47, 0.52, 0.33, 0.61, 0.5]);
        assert_relative_eq!(f.interpolate(&p).unwrap(), 2.0 * 0.47 + 3.0 * 0.33, epsilon = 1e-12);
    }

    #[test]
    fn field_construction_checks_length() {
        let d = unit_box(5);
        assert!(ScalarField::new(d.clone(), vec![0.0; 3]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn integrate_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let d = make_domain(&ShapeSpec::Box { dim: 3, side: 1.0, nodes_per_axis: 7 }).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let f = sample(&d, |_| rng.gen_range(-1.0..1.0));
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
            let g = sample(&d, |_| rng.gen_range(-1.0..1.0));
            let lhs = f.scaled(a).add_scaled(&g.scaled(b), 1.0).unwrap().integrate();
            let rhs = a * f.integrate() + b * g.integrate();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())));
        }
    }
}
