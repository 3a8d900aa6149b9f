//! Domains, meshes, discrete scalar fields and the integral functionals built
//! on them.
//!
//! Three analytic shapes are supported. Intervals and rectangles carry a
//! uniform tensor mesh. Balls are represented by their radial reduction: a
//! uniform mesh on `[0, R]` whose cells and nodes carry the weight `r^{N-1}`
//! (times the area of the unit sphere), so every integral over a ball is an
//! honest `N`-dimensional integral of a radial function.
//!
//! All quadrature goes through two primitives:
//!
//! * node volumes (dual cells): trapezoid weights on intervals and rectangles,
//!   exact shell volumes `ω_N (r_{i+1/2}^N - r_{i-1/2}^N)` on balls;
//! * elements: one gradient per cell (1D/radial, evaluated at the cell
//!   midpoint) or per triangle (rectangles, two triangles per grid square).
//!
//! The p-Laplacian solver minimizes the discrete energy assembled from these
//! same primitives, so the functionals evaluated here are exactly the ones the
//! solver sees.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kv::{self, KvMap};

pub const DEFAULT_RESOLUTION: usize = 1025;
/// Rectangles are solved with a banded direct factorization whose cost grows
/// like `resolution^4`, so they get a coarser default.
pub const DEFAULT_RECTANGLE_RESOLUTION: usize = 65;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Interval {
        x_lo: f64,
        x_hi: f64,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
        dim: usize,
    },
    Rectangle {
        x_lo: f64,
        x_hi: f64,
        y_lo: f64,
        y_hi: f64,
    },
}

impl Shape {
    pub fn name(&self) -> &'static str {
        match self {
            Shape::Interval { .. } => "interval",
            Shape::Ball { .. } => "ball",
            Shape::Rectangle { .. } => "rectangle",
        }
    }

    /// Dimension of the ambient space.
    pub fn ambient_dim(&self) -> usize {
        match self {
            Shape::Interval { .. } => 1,
            Shape::Ball { dim, .. } => *dim,
            Shape::Rectangle { .. } => 2,
        }
    }

    pub fn default_resolution(&self) -> usize {
        match self {
            Shape::Rectangle { .. } => DEFAULT_RECTANGLE_RESOLUTION,
            _ => DEFAULT_RESOLUTION,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self {
            Shape::Interval { x_lo, x_hi } => {
                if !finite(&[*x_lo, *x_hi]) || x_hi <= x_lo {
                    return invalid(format!("interval needs x_hi > x_lo, got [{x_lo}, {x_hi}]"));
                }
            }
            Shape::Ball {
                center,
                radius,
                dim,
            } => {
                if *dim == 0 {
                    return invalid("ball dimension N must be >= 1");
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return invalid(format!("ball radius must be > 0, got {radius}"));
                }
                if center.len() != *dim || !finite(center) {
                    return invalid(format!(
                        "ball center must have {dim} finite coordinates, got {center:?}"
                    ));
                }
            }
            Shape::Rectangle {
                x_lo,
                x_hi,
                y_lo,
                y_hi,
            } => {
                if !finite(&[*x_lo, *x_hi, *y_lo, *y_hi]) || x_hi <= x_lo || y_hi <= y_lo {
                    return invalid("rectangle needs x_hi > x_lo and y_hi > y_lo");
                }
            }
        }
        Ok(())
    }
}

/// Volume `ω_N` of the unit ball in `R^N`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        2 => PI,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// A mesh element: its gradient is a fixed linear map of up to three nodal
/// values.
#[derive(Clone, Debug)]
pub(crate) struct Element {
    pub nodes: [usize; 3],
    pub len: usize,
    pub dim: usize,
    /// `coef[c][k]`: contribution of node `nodes[k]` to gradient component `c`.
    pub coef: [[f64; 3]; 2],
    /// Measure of the element, radial weight included.
    pub weight: f64,
}

impl Element {
    #[inline]
    pub fn gradient(&self, v: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (c, gc) in g.iter_mut().enumerate().take(self.dim) {
            for k in 0..self.len {
                *gc += self.coef[c][k] * v[self.nodes[k]];
            }
        }
        g
    }
}

#[derive(Debug)]
pub struct Domain {
    shape: Shape,
    resolution: usize,
    volume: f64,
    unit_ball_volume: f64,
    /// Node coordinates; the radius for balls, `(x, 0)` for intervals.
    coords: Vec<[f64; 2]>,
    node_volumes: Vec<f64>,
    boundary: Vec<bool>,
    elements: Vec<Element>,
    nx: usize,
    ny: usize,
    spacing: [f64; 2],
}

impl Domain {
    pub fn new(shape: Shape, resolution: usize) -> Result<Arc<Domain>> {
        shape.validate()?;
        if resolution < 3 {
            return invalid(format!("resolution must be >= 3, got {resolution}"));
        }
        let dom = match &shape {
            Shape::Interval { x_lo, x_hi } => Self::line(shape.clone(), *x_lo, *x_hi, resolution),
            Shape::Ball { radius, dim, .. } => {
                Self::radial(shape.clone(), *radius, *dim, resolution)
            }
            Shape::Rectangle {
                x_lo,
                x_hi,
                y_lo,
                y_hi,
            } => Self::grid(shape.clone(), [*x_lo, *x_hi, *y_lo, *y_hi], resolution),
        };
        Ok(Arc::new(dom))
    }

    pub fn interval(x_lo: f64, x_hi: f64, resolution: usize) -> Result<Arc<Domain>> {
        Self::new(Shape::Interval { x_lo, x_hi }, resolution)
    }

    /// Ball centered at the origin.
    pub fn ball(radius: f64, dim: usize, resolution: usize) -> Result<Arc<Domain>> {
        Self::new(
            Shape::Ball {
                center: vec![0.0; dim],
                radius,
                dim,
            },
            resolution,
        )
    }

    pub fn rectangle(
        x_lo: f64,
        x_hi: f64,
        y_lo: f64,
        y_hi: f64,
        resolution: usize,
    ) -> Result<Arc<Domain>> {
        Self::new(
            Shape::Rectangle {
                x_lo,
                x_hi,
                y_lo,
                y_hi,
            },
            resolution,
        )
    }

    fn line(shape: Shape, lo: f64, hi: f64, n: usize) -> Domain {
        let h = (hi - lo) / (n - 1) as f64;
        let coords = (0..n).map(|i| [lo + i as f64 * h, 0.0]).collect();
        let mut node_volumes = vec![h; n];
        node_volumes[0] = 0.5 * h;
        node_volumes[n - 1] = 0.5 * h;
        let mut boundary = vec![false; n];
        boundary[0] = true;
        boundary[n - 1] = true;
        let elements = (0..n - 1)
            .map(|i| Element {
                nodes: [i, i + 1, i + 1],
                len: 2,
                dim: 1,
                coef: [[-1.0 / h, 1.0 / h, 0.0], [0.0; 3]],
                weight: h,
            })
            .collect();
        Domain {
            shape,
            resolution: n,
            volume: hi - lo,
            unit_ball_volume: unit_ball_volume(1),
            coords,
            node_volumes,
            boundary,
            elements,
            nx: n,
            ny: 1,
            spacing: [h, 0.0],
        }
    }

    fn radial(shape: Shape, radius: f64, dim: usize, n: usize) -> Domain {
        let h = radius / (n - 1) as f64;
        let omega = unit_ball_volume(dim);
        let sphere = dim as f64 * omega;
        let nd = dim as i32;
        let r = |i: usize| i as f64 * h;
        let coords = (0..n).map(|i| [r(i), 0.0]).collect();
        let node_volumes = (0..n)
            .map(|i| {
                let inner = if i == 0 { 0.0 } else { r(i) - 0.5 * h };
                let outer = if i == n - 1 { radius } else { r(i) + 0.5 * h };
                omega * (outer.powi(nd) - inner.powi(nd))
            })
            .collect();
        let mut boundary = vec![false; n];
        boundary[n - 1] = true;
        let elements = (0..n - 1)
            .map(|i| {
                let mid = r(i) + 0.5 * h;
                Element {
                    nodes: [i, i + 1, i + 1],
                    len: 2,
                    dim: 1,
                    coef: [[-1.0 / h, 1.0 / h, 0.0], [0.0; 3]],
                    weight: sphere * mid.powi(nd - 1) * h,
                }
            })
            .collect();
        Domain {
            shape,
            resolution: n,
            volume: omega * radius.powi(nd),
            unit_ball_volume: omega,
            coords,
            node_volumes,
            boundary,
            elements,
            nx: n,
            ny: 1,
            spacing: [h, 0.0],
        }
    }

    fn grid(shape: Shape, b: [f64; 4], n: usize) -> Domain {
        let [x_lo, x_hi, y_lo, y_hi] = b;
        let (nx, ny) = (n, n);
        let hx = (x_hi - x_lo) / (nx - 1) as f64;
        let hy = (y_hi - y_lo) / (ny - 1) as f64;
        let idx = |i: usize, j: usize| j * nx + i;
        let mut coords = Vec::with_capacity(nx * ny);
        let mut node_volumes = Vec::with_capacity(nx * ny);
        let mut boundary = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                coords.push([x_lo + i as f64 * hx, y_lo + j as f64 * hy]);
                let wx = if i == 0 || i == nx - 1 { 0.5 } else { 1.0 };
                let wy = if j == 0 || j == ny - 1 { 0.5 } else { 1.0 };
                node_volumes.push(wx * wy * hx * hy);
                boundary.push(i == 0 || i == nx - 1 || j == 0 || j == ny - 1);
            }
        }
        let area = 0.5 * hx * hy;
        let mut elements = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                elements.push(Element {
                    nodes: [idx(i, j), idx(i + 1, j), idx(i, j + 1)],
                    len: 3,
                    dim: 2,
                    coef: [[-1.0 / hx, 1.0 / hx, 0.0], [-1.0 / hy, 0.0, 1.0 / hy]],
                    weight: area,
                });
                elements.push(Element {
                    nodes: [idx(i + 1, j + 1), idx(i, j + 1), idx(i + 1, j)],
                    len: 3,
                    dim: 2,
                    coef: [[1.0 / hx, -1.0 / hx, 0.0], [1.0 / hy, 0.0, -1.0 / hy]],
                    weight: area,
                });
            }
        }
        Domain {
            shape,
            resolution: n,
            volume: (x_hi - x_lo) * (y_hi - y_lo),
            unit_ball_volume: unit_ball_volume(2),
            coords,
            node_volumes,
            boundary,
            elements,
            nx,
            ny,
            spacing: [hx, hy],
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// `|Ω|`
    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// `ω_N` for the ambient dimension.
    pub fn unit_ball_volume(&self) -> f64 {
        self.unit_ball_volume
    }

    pub fn ambient_dim(&self) -> usize {
        self.shape.ambient_dim()
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn node_volumes(&self) -> &[f64] {
        &self.node_volumes
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub(crate) fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub(crate) fn elements(&self) -> &[Element] {
        &self.elements
    }

    /// Largest mesh spacing.
    pub fn mesh_size(&self) -> f64 {
        self.spacing[0].max(self.spacing[1])
    }

    fn is_radial(&self) -> bool {
        matches!(self.shape, Shape::Ball { .. })
    }

    /// Element edges as `(i, j, |x_i - x_j|)`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for e in &self.elements {
            for a in 0..e.len {
                for b in a + 1..e.len {
                    let (i, j) = (e.nodes[a], e.nodes[b]);
                    let (ci, cj) = (self.coords[i], self.coords[j]);
                    let dist = ((ci[0] - cj[0]).powi(2) + (ci[1] - cj[1]).powi(2)).sqrt();
                    out.push((i, j, dist));
                }
            }
        }
        out
    }

    /// Per-node discrete gradient: average of the adjacent cell gradients in
    /// the interior (central differences), one-sided at the boundary, zero at
    /// the center of a ball.
    pub(crate) fn node_gradients(&self, v: &[f64]) -> Vec<f64> {
        match self.shape {
            Shape::Rectangle { .. } => {
                let (nx, ny) = (self.nx, self.ny);
                let [hx, hy] = self.spacing;
                let mut out = vec![0.0; nx * ny];
                for j in 0..ny {
                    for i in 0..nx {
                        let at = |i: usize, j: usize| v[j * nx + i];
                        let gx = if i == 0 {
                            (at(1, j) - at(0, j)) / hx
                        } else if i == nx - 1 {
                            (at(nx - 1, j) - at(nx - 2, j)) / hx
                        } else {
                            (at(i + 1, j) - at(i - 1, j)) / (2.0 * hx)
                        };
                        let gy = if j == 0 {
                            (at(i, 1) - at(i, 0)) / hy
                        } else if j == ny - 1 {
                            (at(i, ny - 1) - at(i, ny - 2)) / hy
                        } else {
                            (at(i, j + 1) - at(i, j - 1)) / (2.0 * hy)
                        };
                        out[j * nx + i] = gx.hypot(gy);
                    }
                }
                out
            }
            _ => {
                let n = self.nx;
                let h = self.spacing[0];
                let cell = |i: usize| (v[i + 1] - v[i]) / h;
                (0..n)
                    .map(|i| {
                        if i == 0 {
                            if self.is_radial() {
                                0.0
                            } else {
                                cell(0).abs()
                            }
                        } else if i == n - 1 {
                            cell(n - 2).abs()
                        } else {
                            (0.5 * (cell(i - 1) + cell(i))).abs()
                        }
                    })
                    .collect()
            }
        }
    }
}

/// A discretized scalar function on a [`Domain`].
#[derive(Clone, Debug)]
pub struct Field {
    domain: Arc<Domain>,
    values: Vec<f64>,
    label: String,
}

impl Field {
    pub fn new(domain: &Arc<Domain>, values: Vec<f64>, label: impl Into<String>) -> Result<Field> {
        if values.len() != domain.num_nodes() {
            return invalid(format!(
                "field has {} values, mesh has {} nodes",
                values.len(),
                domain.num_nodes()
            ));
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node });
        }
        Ok(Field {
            domain: Arc::clone(domain),
            values,
            label: label.into(),
        })
    }

    /// Caller guarantees length and finiteness.
    pub(crate) fn from_raw(domain: &Arc<Domain>, values: Vec<f64>, label: impl Into<String>) -> Field {
        debug_assert_eq!(values.len(), domain.num_nodes());
        Field {
            domain: Arc::clone(domain),
            values,
            label: label.into(),
        }
    }

    pub fn zeros(domain: &Arc<Domain>) -> Field {
        Self::from_raw(domain, vec![0.0; domain.num_nodes()], "zero")
    }

    pub fn constant(domain: &Arc<Domain>, c: f64) -> Result<Field> {
        Self::new(domain, vec![c; domain.num_nodes()], format!("const {c}"))
    }

    /// Samples `f` at the node coordinates (the radius on balls).
    pub fn from_fn(domain: &Arc<Domain>, label: &str, f: impl Fn([f64; 2]) -> f64) -> Result<Field> {
        let values = domain.coords().iter().map(|&c| f(c)).collect();
        Self::new(domain, values, label)
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Field {
        self.label = label.into();
        self
    }

    pub fn same_domain(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.domain, &other.domain)
    }

    pub fn is_dirichlet_zero(&self) -> bool {
        self.domain
            .boundary_mask()
            .iter()
            .zip(&self.values)
            .all(|(&b, &v)| !b || v == 0.0)
    }

    /// Node-wise map; fails if the result is not finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(
            &self.domain,
            self.values.iter().map(|&v| f(v)).collect(),
            self.label.clone(),
        )
    }

    pub fn scaled(&self, c: f64) -> Result<Field> {
        self.map(|v| c * v)
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        if !self.same_domain(other) {
            return Err(Error::DomainMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field::new(&self.domain, values, self.label.clone())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |self - other|`
    pub fn sup_diff(&self, other: &Field) -> Result<f64> {
        if !self.same_domain(other) {
            return Err(Error::DomainMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .zip(self.domain.node_volumes())
            .map(|(v, w)| v * w)
            .sum()
    }

    /// `(∫ |f|^t)^{1/t}`. Evaluated relative to the sup norm so that large `t`
    /// does not overflow.
    pub fn lp_norm(&self, t: f64) -> Result<f64> {
        if !(t >= 1.0) || !t.is_finite() {
            return invalid(format!("lp_norm needs finite t >= 1, got {t}"));
        }
        let sup = self.sup_norm();
        if sup == 0.0 {
            return Ok(0.0);
        }
        let s: f64 = self
            .values
            .iter()
            .zip(self.domain.node_volumes())
            .map(|(v, w)| w * (v.abs() / sup).powf(t))
            .sum();
        Ok(sup * s.powf(1.0 / t))
    }

    pub fn gradient_magnitudes(&self) -> Vec<f64> {
        self.domain.node_gradients(&self.values)
    }

    /// Largest discrete gradient magnitude over the mesh nodes.
    pub fn grad_sup(&self) -> f64 {
        self.gradient_magnitudes().into_iter().fold(0.0, f64::max)
    }

    /// `∫ |∇f|^p` with one gradient per element.
    pub fn gradient_p_integral(&self, p: f64) -> f64 {
        self.domain
            .elements()
            .iter()
            .map(|e| {
                let g = e.gradient(&self.values);
                e.weight * (g[0] * g[0] + g[1] * g[1]).powf(0.5 * p)
            })
            .sum()
    }

    /// CSV with one row per node: `x,value`, `x,y,value` or `r,value` (balls).
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let two_d = matches!(self.domain.shape(), Shape::Rectangle { .. });
        let head = match self.domain.shape() {
            Shape::Interval { .. } => "x,value",
            Shape::Ball { .. } => "r,value",
            Shape::Rectangle { .. } => "x,y,value",
        };
        s.push_str(head);
        s.push('\n');
        for (c, v) in self.domain.coords().iter().zip(&self.values) {
            if two_d {
                let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", c[0], c[1], v);
            } else {
                let _ = writeln!(s, "{:.16e},{:.16e}", c[0], v);
            }
        }
        s
    }
}

/// Exact distance to the boundary sampled at the mesh nodes.
pub fn distance_function(domain: &Arc<Domain>) -> Field {
    let values = domain
        .coords()
        .iter()
        .map(|&[x, y]| match domain.shape() {
            Shape::Interval { x_lo, x_hi } => (x - x_lo).min(x_hi - x),
            Shape::Ball { radius, .. } => radius - x,
            Shape::Rectangle {
                x_lo,
                x_hi,
                y_lo,
                y_hi,
            } => (x - x_lo).min(x_hi - x).min(y - y_lo).min(y_hi - y),
        })
        .map(|d| d.max(0.0))
        .collect::<Vec<_>>();
    let mut values = values;
    for (v, &b) in values.iter_mut().zip(domain.boundary_mask()) {
        if b {
            *v = 0.0;
        }
    }
    Field::from_raw(domain, values, "distance")
}

/// Data of the functional
/// `I(v) = (1/p)∫|∇v|^p - (λ/q)∫|v|^q - ∫ h v`.
#[derive(Clone, Debug)]
pub struct EnergySpec {
    pub p: f64,
    pub q: f64,
    pub lambda: f64,
    pub forcing: Field,
}

impl EnergySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) || !(self.q >= 1.0) || !(self.p > self.q) {
            return invalid(format!(
                "energy needs p > q >= 1 and p > 1, got p={}, q={}",
                self.p, self.q
            ));
        }
        if !(self.lambda >= 0.0) {
            return invalid("energy needs lambda >= 0");
        }
        Ok(())
    }
}

pub fn energy_ip(spec: &EnergySpec, v: &Field) -> Result<f64> {
    spec.validate()?;
    if !v.same_domain(&spec.forcing) {
        return Err(Error::DomainMismatch);
    }
    if !v.is_dirichlet_zero() {
        return invalid("energy_ip expects a Dirichlet-zero field");
    }
    let grad = v.gradient_p_integral(spec.p) / spec.p;
    let mut mass = 0.0;
    let mut work = 0.0;
    for ((&x, &h), &w) in v
        .values()
        .iter()
        .zip(spec.forcing.values())
        .zip(v.domain().node_volumes())
    {
        mass += w * x.abs().powf(spec.q);
        work += w * h * x;
    }
    let total = grad - spec.lambda / spec.q * mass - work;
    if !total.is_finite() {
        return Err(Error::Invariant("energy is not finite".into()));
    }
    Ok(total)
}

/// Plain-text description of a domain: `shape`, bounds, `N`, `resolution`.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    pub shape: Shape,
    pub resolution: usize,
}

impl Default for DomainSpec {
    fn default() -> Self {
        let shape = Shape::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
            dim: 2,
        };
        DomainSpec {
            resolution: shape.default_resolution(),
            shape,
        }
    }
}

impl DomainSpec {
    pub fn build(&self) -> Result<Arc<Domain>> {
        Domain::new(self.shape.clone(), self.resolution)
    }

    /// Reads keys `{prefix}shape`, `{prefix}x_lo`, ..., `{prefix}R`,
    /// `{prefix}N`, `{prefix}center`, `{prefix}resolution`. Missing bounds take
    /// the unit defaults.
    pub fn from_kv(map: &KvMap, prefix: &str) -> Result<DomainSpec> {
        let key = |k: &str| format!("{prefix}{k}");
        let f = |k: &str, default: f64| -> Result<f64> {
            Ok(kv::get_f64(map, &key(k))?.unwrap_or(default))
        };
        let shape_name = map.get(&key("shape")).map(String::as_str).unwrap_or("ball");
        let shape = match shape_name {
            "interval" => Shape::Interval {
                x_lo: f("x_lo", 0.0)?,
                x_hi: f("x_hi", 1.0)?,
            },
            "ball" => {
                let dim = kv::get_usize(map, &key("N"))?.unwrap_or(2);
                let radius = f("R", 1.0)?;
                let center =
                    kv::get_f64_list(map, &key("center"))?.unwrap_or_else(|| vec![0.0; dim]);
                Shape::Ball {
                    center,
                    radius,
                    dim,
                }
            }
            "rectangle" => Shape::Rectangle {
                x_lo: f("x_lo", 0.0)?,
                x_hi: f("x_hi", 1.0)?,
                y_lo: f("y_lo", 0.0)?,
                y_hi: f("y_hi", 1.0)?,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown shape {other:?} (expected interval, ball or rectangle)"
                )))
            }
        };
        let resolution =
            kv::get_usize(map, &key("resolution"))?.unwrap_or_else(|| shape.default_resolution());
        let spec = DomainSpec { shape, resolution };
        spec.shape.validate().map_err(|e| Error::Config(e.to_string()))?;
        if resolution < 3 {
            return Err(Error::Config(format!("resolution must be >= 3, got {resolution}")));
        }
        Ok(spec)
    }

    pub fn to_kv(&self, prefix: &str) -> KvMap {
        let mut m = KvMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(format!("{prefix}{k}"), v);
        };
        put("shape", self.shape.name().to_string());
        match &self.shape {
            Shape::Interval { x_lo, x_hi } => {
                put("x_lo", kv::fmt_f64(*x_lo));
                put("x_hi", kv::fmt_f64(*x_hi));
            }
            Shape::Ball {
                center,
                radius,
                dim,
            } => {
                put("R", kv::fmt_f64(*radius));
                put("N", dim.to_string());
                put("center", kv::fmt_f64_list(center));
            }
            Shape::Rectangle {
                x_lo,
                x_hi,
                y_lo,
                y_hi,
            } => {
                put("x_lo", kv::fmt_f64(*x_lo));
                put("x_hi", kv::fmt_f64(*x_hi));
                put("y_lo", kv::fmt_f64(*y_lo));
                put("y_hi", kv::fmt_f64(*y_hi));
            }
        }
        put("resolution", self.resolution.to_string());
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn distance_examples() {
        let d = distance_function(&Domain::interval(0.0, 1.0, 1025).unwrap());
        assert_eq!(d.values()[512], 0.5);
        let d = distance_function(&Domain::ball(1.0, 2, 1025).unwrap());
        assert_eq!(d.values()[0], 1.0);
        let dom = Domain::rectangle(0.0, 2.0, 0.0, 1.0, 65).unwrap();
        let d = distance_function(&dom);
        // node (x=1, y=0.5) is i=32, j=32
        assert_eq!(d.values()[32 * 65 + 32], 0.5);
        assert!(d.is_dirichlet_zero());
    }

    #[test]
    fn volumes_match_shapes() {
        let cases = [
            (Domain::interval(-1.0, 2.0, 17).unwrap(), 3.0),
            (Domain::ball(1.5, 2, 33).unwrap(), PI * 2.25),
            (Domain::ball(0.7, 3, 33).unwrap(), 4.0 / 3.0 * PI * 0.343),
            (Domain::rectangle(0.0, 2.0, 0.0, 1.0, 9).unwrap(), 2.0),
        ];
        for (dom, vol) in cases {
            assert!(((dom.volume() - vol) / vol).abs() < 1e-12);
            let quad: f64 = dom.node_volumes().iter().sum();
            assert!(((quad - vol) / vol).abs() < 1e-12, "{quad} vs {vol}");
        }
    }

    #[test]
    fn unit_ball_volumes() {
        assert!(close(unit_ball_volume(3), 4.0 * PI / 3.0, 1e-14));
        assert!(close(unit_ball_volume(4), PI * PI / 2.0, 1e-14));
    }

    #[test]
    fn norm_examples() {
        let ball = Domain::ball(1.0, 2, 1025).unwrap();
        assert_eq!(distance_function(&ball).sup_norm(), 1.0);
        let line = Domain::interval(0.0, 1.0, 1025).unwrap();
        assert!(close(distance_function(&line).grad_sup(), 1.0, 1e-12));
        let one = Field::constant(&line, 1.0).unwrap();
        assert!(close(one.lp_norm(2.0).unwrap(), 1.0, 1e-14));
        assert!(one.lp_norm(0.5).is_err());
    }

    #[test]
    fn invalid_domains_rejected() {
        assert!(Domain::interval(1.0, 1.0, 10).is_err());
        assert!(Domain::ball(-1.0, 2, 10).is_err());
        assert!(Domain::ball(1.0, 2, 2).is_err());
        assert!(Domain::rectangle(0.0, 1.0, 1.0, 0.0, 10).is_err());
    }

    #[test]
    fn non_finite_field_rejected() {
        let line = Domain::interval(0.0, 1.0, 5).unwrap();
        let err = Field::new(&line, vec![0.0, 1.0, f64::NAN, 0.0, 0.0], "x").unwrap_err();
        assert_eq!(err, Error::NonFinite { node: 2 });
    }

    #[test]
    fn energy_of_zero_and_classical_torsion() {
        let line = Domain::interval(0.0, 1.0, 1025).unwrap();
        let zero = Field::zeros(&line);
        let spec = EnergySpec {
            p: 2.0,
            q: 1.0,
            lambda: 1.0,
            forcing: Field::zeros(&line),
        };
        assert_eq!(energy_ip(&spec, &zero).unwrap(), 0.0);
        // I(x(1-x)/2) = 1/24 - 1/12
        let phi = Field::from_fn(&line, "phi", |[x, _]| 0.5 * x * (1.0 - x)).unwrap();
        let e = energy_ip(&spec, &phi).unwrap();
        assert!(close(e, -1.0 / 24.0, 1e-6), "{e}");
    }

    #[test]
    fn energy_rejects_nonzero_boundary() {
        let line = Domain::interval(0.0, 1.0, 9).unwrap();
        let spec = EnergySpec {
            p: 3.0,
            q: 1.0,
            lambda: 0.0,
            forcing: Field::zeros(&line),
        };
        let one = Field::constant(&line, 1.0).unwrap();
        assert!(energy_ip(&spec, &one).is_err());
        let bad = EnergySpec { q: 3.0, ..spec };
        assert!(energy_ip(&bad, &Field::zeros(&line)).is_err());
    }

    #[test]
    fn domain_spec_round_trip() {
        let text = "domain.shape = rectangle\ndomain.x_hi = 2\ndomain.resolution = 33\n";
        let spec = DomainSpec::from_kv(&kv::parse(text).unwrap(), "domain.").unwrap();
        assert_eq!(spec.resolution, 33);
        let again = DomainSpec::from_kv(&spec.to_kv("domain."), "domain.").unwrap();
        assert_eq!(spec, again);
        let bad = kv::parse("shape = torus").unwrap();
        assert!(DomainSpec::from_kv(&bad, "").is_err());
    }
}
