//! Disc and annulus lattices, electrode rectangles and stimulation sites.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::SimState;
use crate::error::{invalid, Error, Result};

/// Neighbour indices of one in-domain node. A neighbour outside the lattice or
/// the domain points back at the node itself, which gives a no-flux boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct NodeStencil {
    pub center: u32,
    pub west: u32,
    pub east: u32,
    pub north: u32,
    pub south: u32,
    pub excitable: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "shape")]
pub enum Shape {
    Disc { radius: usize },
    Annulus { outer_radius: usize, inner_radius: usize },
}

impl Shape {
    pub fn build(&self) -> Result<Mask> {
        match *self {
            Shape::Disc { radius } => make_disc_mask(radius),
            Shape::Annulus {
                outer_radius,
                inner_radius,
            } => make_annulus_mask(outer_radius, inner_radius),
        }
    }

    pub fn outer_radius(&self) -> usize {
        match *self {
            Shape::Disc { radius } => radius,
            Shape::Annulus { outer_radius, .. } => outer_radius,
        }
    }
}

/// Which nodes are simulated and which of those carry reaction kinetics.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    width: usize,
    height: usize,
    in_domain: Vec<bool>,
    excitable: Vec<bool>,
    shape: Option<Shape>,
    stencil: Vec<NodeStencil>,
}

impl Mask {
    /// Builds a mask from explicit node sets. `excitable` must be a subset of
    /// `in_domain` and at least one node must be in the domain.
    pub fn new(
        width: usize,
        height: usize,
        in_domain: Vec<bool>,
        excitable: Vec<bool>,
    ) -> Result<Self> {
        Self::with_shape(width, height, in_domain, excitable, None)
    }

    fn with_shape(
        width: usize,
        height: usize,
        in_domain: Vec<bool>,
        excitable: Vec<bool>,
        shape: Option<Shape>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("mask", "width and height must be positive"));
        }
        let n = width * height;
        if in_domain.len() != n || excitable.len() != n {
            return Err(invalid("mask", "node sets do not match lattice size"));
        }
        if in_domain.iter().zip(&excitable).any(|(&d, &e)| e && !d) {
            return Err(invalid("mask", "excitable nodes must lie inside the domain"));
        }
        if !in_domain.iter().any(|&d| d) {
            return Err(invalid("mask", "no node inside the domain"));
        }
        let stencil = build_stencil(width, height, &in_domain, &excitable);
        Ok(Self {
            width,
            height,
            in_domain,
            excitable,
            shape,
            stencil,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn shape(&self) -> Option<Shape> {
        self.shape
    }

    #[inline]
    pub fn in_domain(&self, x: usize, y: usize) -> bool {
        self.in_domain[y * self.width + x]
    }

    #[inline]
    pub fn excitable(&self, x: usize, y: usize) -> bool {
        self.excitable[y * self.width + x]
    }

    pub fn in_domain_flags(&self) -> &[bool] {
        &self.in_domain
    }

    pub fn excitable_flags(&self) -> &[bool] {
        &self.excitable
    }

    pub fn domain_count(&self) -> usize {
        self.in_domain.iter().filter(|&&d| d).count()
    }

    pub fn excitable_count(&self) -> usize {
        self.excitable.iter().filter(|&&e| e).count()
    }

    pub(crate) fn stencil(&self) -> &[NodeStencil] {
        &self.stencil
    }

    /// Lattice centre of a disc or annulus mask.
    pub fn center(&self) -> (usize, usize) {
        (self.width / 2, self.height / 2)
    }

    /// Reflection across the vertical axis.
    pub fn mirrored_x(&self) -> Self {
        let flip = |flags: &[bool]| -> Vec<bool> {
            flags
                .chunks_exact(self.width)
                .flat_map(|row| row.iter().rev().copied())
                .collect()
        };
        Self::with_shape(
            self.width,
            self.height,
            flip(&self.in_domain),
            flip(&self.excitable),
            self.shape,
        )
        .expect("mirror of a valid mask is valid")
    }
}

fn build_stencil(
    width: usize,
    height: usize,
    in_domain: &[bool],
    excitable: &[bool],
) -> Vec<NodeStencil> {
    let mut out = Vec::with_capacity(in_domain.iter().filter(|&&d| d).count());
    let inside = |x: isize, y: isize| -> Option<usize> {
        if x < 0 || y < 0 || x >= width as isize || y >= height as isize {
            return None;
        }
        let i = y as usize * width + x as usize;
        in_domain[i].then_some(i)
    };
    for y in 0..height {
        for x in 0..width {
            let c = y * width + x;
            if !in_domain[c] {
                continue;
            }
            let (xi, yi) = (x as isize, y as isize);
            let pick = |nx: isize, ny: isize| inside(nx, ny).unwrap_or(c) as u32;
            out.push(NodeStencil {
                center: c as u32,
                west: pick(xi - 1, yi),
                east: pick(xi + 1, yi),
                north: pick(xi, yi - 1),
                south: pick(xi, yi + 1),
                excitable: excitable[c],
            });
        }
    }
    out
}

#[inline]
fn squared_offset(x: usize, y: usize, cx: usize, cy: usize) -> usize {
    let dx = x.abs_diff(cx);
    let dy = y.abs_diff(cy);
    dx * dx + dy * dy
}

/// Disc of the given radius on a `(2r+1) x (2r+1)` lattice, excitable everywhere.
pub fn make_disc_mask(radius: usize) -> Result<Mask> {
    if radius < 1 {
        return Err(invalid("radius", "must be at least 1"));
    }
    let side = 2 * radius + 1;
    let r2 = radius * radius;
    let in_domain: Vec<bool> = (0..side * side)
        .map(|i| squared_offset(i % side, i / side, radius, radius) <= r2)
        .collect();
    let excitable = in_domain.clone();
    Mask::with_shape(
        side,
        side,
        in_domain,
        excitable,
        Some(Shape::Disc { radius }),
    )
}

/// Full disc of `outer_radius` whose kinetics are active only where the node
/// radius exceeds `inner_radius`. The core still diffuses.
pub fn make_annulus_mask(outer_radius: usize, inner_radius: usize) -> Result<Mask> {
    if inner_radius == 0 || inner_radius >= outer_radius {
        return Err(invalid(
            "inner_radius",
            format!("need 0 < inner ({inner_radius}) < outer ({outer_radius})"),
        ));
    }
    let side = 2 * outer_radius + 1;
    let (ro2, ri2) = (outer_radius * outer_radius, inner_radius * inner_radius);
    let mut in_domain = Vec::with_capacity(side * side);
    let mut excitable = Vec::with_capacity(side * side);
    for i in 0..side * side {
        let d2 = squared_offset(i % side, i / side, outer_radius, outer_radius);
        in_domain.push(d2 <= ro2);
        excitable.push(d2 <= ro2 && d2 > ri2);
    }
    Mask::with_shape(
        side,
        side,
        in_domain,
        excitable,
        Some(Shape::Annulus {
            outer_radius,
            inner_radius,
        }),
    )
}

/// Inclusive node rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectDomain {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl RectDomain {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Result<Self> {
        let r = Self { x0, y0, x1, y1 };
        r.check_order()?;
        Ok(r)
    }

    pub(crate) fn check_order(&self) -> Result<()> {
        if self.x0 > self.x1 || self.y0 > self.y1 {
            return Err(invalid("rect", format!("corners out of order: {self}")));
        }
        Ok(())
    }

    pub fn within(&self, width: usize, height: usize) -> bool {
        self.x1 < width && self.y1 < height
    }

    pub fn intersects(&self, other: &RectDomain) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }

    /// In-domain node indices in row-major order.
    pub fn domain_nodes(&self, mask: &Mask) -> Vec<usize> {
        let mut out = Vec::new();
        for y in self.y0..=self.y1.min(mask.height().saturating_sub(1)) {
            for x in self.x0..=self.x1.min(mask.width().saturating_sub(1)) {
                if mask.in_domain(x, y) {
                    out.push(y * mask.width() + x);
                }
            }
        }
        out
    }

    pub fn mirrored_x(&self, width: usize) -> Self {
        Self {
            x0: width - 1 - self.x1,
            x1: width - 1 - self.x0,
            y0: self.y0,
            y1: self.y1,
        }
    }
}

impl fmt::Display for RectDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}..={}]x[{}..={}]", self.x0, self.x1, self.y0, self.y1)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StimulusMode {
    #[default]
    OneShot,
    HeldSource,
}

/// Disc of nodes whose activator is raised to 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusSite {
    /// `(column, row)`; rows grow southward.
    pub center: (usize, usize),
    pub radius: usize,
    #[serde(default)]
    pub mode: StimulusMode,
}

pub const DEFAULT_SITE_RADIUS: usize = 3;

impl StimulusSite {
    /// In-domain nodes covered by the site, row-major.
    pub fn domain_nodes(&self, mask: &Mask) -> Vec<usize> {
        let (cx, cy) = self.center;
        let r = self.radius;
        let r2 = r * r;
        let mut out = Vec::new();
        for y in cy.saturating_sub(r)..=(cy + r).min(mask.height() - 1) {
            for x in cx.saturating_sub(r)..=(cx + r).min(mask.width() - 1) {
                if squared_offset(x, y, cx, cy) <= r2 && mask.in_domain(x, y) {
                    out.push(y * mask.width() + x);
                }
            }
        }
        out
    }

    pub fn mirrored_x(&self, width: usize) -> Self {
        Self {
            center: (width - 1 - self.center.0, self.center.1),
            ..*self
        }
    }
}

/// Compass bearings on the lattice; north is row 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Compass {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl Compass {
    pub const ALL: [Compass; 8] = [
        Compass::N,
        Compass::NE,
        Compass::E,
        Compass::SE,
        Compass::S,
        Compass::SW,
        Compass::W,
        Compass::NW,
    ];

    /// Clockwise bearing from north, in degrees.
    pub fn bearing_degrees(self) -> f64 {
        45.0 * Self::ALL.iter().position(|&c| c == self).unwrap() as f64
    }

    pub fn mirrored_x(self) -> Self {
        match self {
            Compass::NE => Compass::NW,
            Compass::E => Compass::W,
            Compass::SE => Compass::SW,
            Compass::SW => Compass::SE,
            Compass::W => Compass::E,
            Compass::NW => Compass::NE,
            c => c,
        }
    }
}

impl fmt::Display for Compass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Compass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid("compass", format!("unknown direction `{s}`")))
    }
}

/// One-shot site of default radius on the in-domain node nearest the named
/// point of the outer boundary. Western bearings are computed as the mirror
/// image of their eastern counterpart so mirrored configs stay exact.
pub fn edge_site(mask: &Mask, compass: Compass) -> Result<StimulusSite> {
    if matches!(compass, Compass::SW | Compass::W | Compass::NW) {
        let mut site = edge_site(&mask.mirrored_x(), compass.mirrored_x())?;
        site.center.0 = mask.width() - 1 - site.center.0;
        return Ok(site);
    }
    let shape = mask
        .shape()
        .ok_or_else(|| invalid("mask", "edge sites need a disc or annulus mask"))?;
    let r = shape.outer_radius() as f64;
    let (cx, cy) = mask.center();
    let theta = compass.bearing_degrees().to_radians();
    let (tx, ty) = (cx as f64 + r * theta.sin(), cy as f64 - r * theta.cos());

    let mut best: Option<(f64, usize, usize)> = None;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if !mask.in_domain(x, y) {
                continue;
            }
            let d = (x as f64 - tx).powi(2) + (y as f64 - ty).powi(2);
            if best.is_none_or(|(bd, _, _)| d < bd) {
                best = Some((d, x, y));
            }
        }
    }
    let (_, x, y) = best.expect("mask has at least one in-domain node");
    Ok(StimulusSite {
        center: (x, y),
        radius: DEFAULT_SITE_RADIUS,
        mode: StimulusMode::OneShot,
    })
}

/// Raises `u` to 1 on the site. A held source is also registered on the state
/// so the integrator re-imposes it every iteration. `v` is never touched.
pub fn stimulate(mut state: SimState, site: &StimulusSite, mask: &Mask) -> Result<SimState> {
    if state.u.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected: mask.dims(),
            got: state.u.dims(),
        });
    }
    let nodes = site.domain_nodes(mask);
    if nodes.is_empty() {
        return Err(Error::OutsideDomain {
            what: format!("stimulus site at {:?}", site.center),
        });
    }
    let u = state.u.values_mut();
    for &i in &nodes {
        u[i] = 1.0;
    }
    if site.mode == StimulusMode::HeldSource {
        state.held.extend(nodes);
        state.held.sort_unstable();
        state.held.dedup();
    }
    Ok(state)
}
