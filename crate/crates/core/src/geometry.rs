//! Rough spatial domains `E ⊂ R^N` (N = 1, 2), cubes `K_ρ(x)`, and
//! node-centred lattices with odd node counts.
//!
//! Every domain kind has an exact membership predicate. Lower-dimensional
//! obstacles (slits, Cantor dust, degenerate boxes) are thickened to one grid
//! layer when rasterized: a node belongs to the obstacle if it lies in `E^c`
//! or within `h/2` of it.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: &[f64]) -> Self {
        Point(coords.to_vec())
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dim()) {
            return Err(Error::invalid(format!("points must have 1 or 2 coordinates, got {}", self.dim())));
        }
        if self.0.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("point has non-finite coordinates"));
        }
        Ok(())
    }
}

/// Closed axis-parallel cube of edge `2 * half_edge`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub center: Point,
    pub half_edge: f64,
}

impl Cube {
    pub fn new(center: Point, half_edge: f64) -> Result<Self> {
        center.validate()?;
        if !(half_edge > 0.0) || !half_edge.is_finite() {
            return Err(Error::invalid(format!("cube half edge must be positive, got {half_edge}")));
        }
        Ok(Cube { center, half_edge })
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.center.0.iter().zip(x).all(|(c, v)| (v - c).abs() <= self.half_edge)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DomainKind {
    /// `E = R^N`; only meaningful for interior tests.
    FullSpace,
    /// `E = {x₁ < a₁}` where `a` is the anchor.
    HalfSpace,
    /// `E = R^N` minus the closed cube `K_r(c)`.
    ExteriorCube { center: Vec<f64>, half_edge: f64 },
    /// `E = R^N` minus a closed segment (N = 2) or a point (N = 1).
    Slit { start: Vec<f64>, end: Vec<f64> },
    /// `E^c = {y₁ ≥ 0, |y₂| ≤ y₁^q}` with `y = x - a` (N = 2); `{y₁ ≥ 0}` for N = 1.
    PowerCusp { exponent: f64 },
    /// `E^c = a + s·C_L^N`, `C_L` the level-`L` Cantor set of ratio `r` in `[0, 1]`.
    CantorObstacle { level: u32, ratio: f64, scale: f64 },
    /// `E^c` is the union of closed boxes `[lo, hi]`.
    CustomMask { boxes: Vec<(Vec<f64>, Vec<f64>)> },
}

impl DomainKind {
    pub fn name(&self) -> &'static str {
        match self {
            DomainKind::FullSpace => "full_space",
            DomainKind::HalfSpace => "half_space",
            DomainKind::ExteriorCube { .. } => "exterior_cube",
            DomainKind::Slit { .. } => "slit",
            DomainKind::PowerCusp { .. } => "power_cusp",
            DomainKind::CantorObstacle { .. } => "cantor_obstacle",
            DomainKind::CustomMask { .. } => "custom_mask",
        }
    }
}

/// Serialized form: kind name plus a flat numeric parameter list.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainRecord {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
    pub anchor: Vec<f64>,
}

/// A domain `E` near the boundary point `anchor = x_o`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainRecord", into = "DomainRecord")]
pub struct DomainSpec {
    kind: DomainKind,
    anchor: Point,
}

impl DomainSpec {
    /// Builds the domain and checks that the anchor lies on `∂E`
    /// (`x_o ∉ E`, `x_o ∈ closure(E)`) for every kind except `full_space`.
    pub fn new(kind: DomainKind, anchor: Point) -> Result<Self> {
        anchor.validate()?;
        let dim = anchor.dim();
        let want = |v: &[f64], what: &str| -> Result<()> {
            if v.len() != dim {
                return Err(Error::invalid(format!("{what} must have {dim} coordinates")));
            }
            Ok(())
        };
        match &kind {
            DomainKind::FullSpace | DomainKind::HalfSpace => {}
            DomainKind::ExteriorCube { center, half_edge } => {
                want(center, "cube center")?;
                if !(*half_edge > 0.0) {
                    return Err(Error::invalid("exterior cube half edge must be positive"));
                }
            }
            DomainKind::Slit { start, end } => {
                want(start, "slit start")?;
                want(end, "slit end")?;
            }
            DomainKind::PowerCusp { exponent } => {
                if !(*exponent >= 1.0) {
                    return Err(Error::invalid("cusp exponent must be at least 1"));
                }
            }
            DomainKind::CantorObstacle { ratio, scale, .. } => {
                if !(*ratio > 0.0 && *ratio < 0.5) || !(*scale > 0.0) {
                    return Err(Error::invalid("cantor ratio must lie in (0, 1/2) and scale be positive"));
                }
            }
            DomainKind::CustomMask { boxes } => {
                if boxes.is_empty() {
                    return Err(Error::invalid("custom mask needs at least one box"));
                }
                for (lo, hi) in boxes {
                    want(lo, "box corner")?;
                    want(hi, "box corner")?;
                    if lo.iter().zip(hi).any(|(a, b)| a > b) {
                        return Err(Error::invalid("box corners must satisfy lo <= hi"));
                    }
                }
            }
        }
        let domain = DomainSpec { kind, anchor };
        if !matches!(domain.kind, DomainKind::FullSpace) {
            let a = domain.anchor.coords();
            if domain.contains(a) {
                return Err(Error::invalid(format!("anchor {:?} lies inside E; it must be a boundary point", a)));
            }
            if !domain.anchor_touches_domain() {
                return Err(Error::invalid(format!("anchor {:?} is not in the closure of E", a)));
            }
        }
        Ok(domain)
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn anchor(&self) -> &Point {
        &self.anchor
    }

    pub fn dim(&self) -> usize {
        self.anchor.dim()
    }

    pub fn is_full_space(&self) -> bool {
        matches!(self.kind, DomainKind::FullSpace)
    }

    /// Exact membership `x ∈ E`.
    pub fn contains(&self, x: &[f64]) -> bool {
        let a = self.anchor.coords();
        match &self.kind {
            DomainKind::FullSpace => true,
            DomainKind::HalfSpace => x[0] < a[0],
            DomainKind::ExteriorCube { center, half_edge } => {
                !center.iter().zip(x).all(|(c, v)| (v - c).abs() <= *half_edge)
            }
            DomainKind::Slit { start, end } => !on_segment(x, start, end),
            DomainKind::PowerCusp { exponent } => {
                let y0 = x[0] - a[0];
                if x.len() == 1 {
                    return y0 < 0.0;
                }
                let y1 = x[1] - a[1];
                !(y0 >= 0.0 && y1.abs() <= y0.powf(*exponent))
            }
            DomainKind::CantorObstacle { level, ratio, scale } => {
                !x.iter().zip(a).all(|(v, o)| cantor_contains((v - o) / scale, *level, *ratio))
            }
            DomainKind::CustomMask { boxes } => !boxes.iter().any(|(lo, hi)| in_box(x, lo, hi)),
        }
    }

    /// Euclidean distance from `x` to `E^c`; zero for `x ∉ E`, infinite for
    /// the full space.
    pub fn distance_to_complement(&self, x: &[f64]) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        let a = self.anchor.coords();
        match &self.kind {
            DomainKind::FullSpace => f64::INFINITY,
            DomainKind::HalfSpace => a[0] - x[0],
            DomainKind::ExteriorCube { center, half_edge } => {
                let lo: Vec<f64> = center.iter().map(|c| c - half_edge).collect();
                let hi: Vec<f64> = center.iter().map(|c| c + half_edge).collect();
                box_distance(x, &lo, &hi)
            }
            DomainKind::Slit { start, end } => segment_distance(x, start, end),
            DomainKind::PowerCusp { exponent } => {
                let y0 = x[0] - a[0];
                if x.len() == 1 {
                    return -y0;
                }
                cusp_distance(y0, (x[1] - a[1]).abs(), *exponent)
            }
            DomainKind::CantorObstacle { level, ratio, scale } => x
                .iter()
                .zip(a)
                .map(|(v, o)| {
                    let d = scale * cantor_distance((v - o) / scale, *level, *ratio);
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            DomainKind::CustomMask { boxes } => {
                boxes.iter().map(|(lo, hi)| box_distance(x, lo, hi)).fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Kinds whose complement may have empty interior at grid scale; these are
    /// thickened by one layer when rasterized.
    pub fn is_thin(&self) -> bool {
        matches!(self.kind, DomainKind::Slit { .. } | DomainKind::CantorObstacle { .. } | DomainKind::CustomMask { .. })
    }

    /// Rasterization rule for a node at `x` on a lattice of spacing `h`.
    pub fn is_obstacle_node(&self, x: &[f64], h: f64) -> bool {
        if !self.contains(x) {
            return true;
        }
        self.is_thin() && self.distance_to_complement(x) < 0.5 * h
    }

    fn anchor_touches_domain(&self) -> bool {
        let a = self.anchor.coords();
        let dim = a.len();
        let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        if dim == 1 {
            dirs.push(vec![1.0]);
            dirs.push(vec![-1.0]);
        } else {
            for dx in [-1.0, 0.0, 1.0] {
                for dy in [-1.0, 0.0, 1.0] {
                    if dx != 0.0 || dy != 0.0 {
                        dirs.push(vec![dx, dy]);
                    }
                }
            }
        }
        [1e-6, 1e-9].iter().any(|eta| {
            dirs.iter().any(|d| {
                let x: Vec<f64> = a.iter().zip(d).map(|(ai, di)| ai + eta * scale * di).collect();
                self.contains(&x)
            })
        })
    }
}

impl TryFrom<DomainRecord> for DomainSpec {
    type Error = Error;

    fn try_from(rec: DomainRecord) -> Result<Self> {
        let dim = rec.anchor.len();
        let p = &rec.params;
        let need = |n: usize| -> Result<()> {
            if p.len() != n {
                return Err(Error::invalid(format!(
                    "domain kind '{}' expects {n} parameters, got {}",
                    rec.kind,
                    p.len()
                )));
            }
            Ok(())
        };
        let kind = match rec.kind.as_str() {
            "full_space" => {
                need(0)?;
                DomainKind::FullSpace
            }
            "half_space" => {
                need(0)?;
                DomainKind::HalfSpace
            }
            "exterior_cube" => {
                need(dim + 1)?;
                DomainKind::ExteriorCube { center: p[..dim].to_vec(), half_edge: p[dim] }
            }
            "slit" => {
                need(2 * dim)?;
                DomainKind::Slit { start: p[..dim].to_vec(), end: p[dim..].to_vec() }
            }
            "power_cusp" => {
                need(1)?;
                DomainKind::PowerCusp { exponent: p[0] }
            }
            "cantor_obstacle" => {
                if p.len() != 2 && p.len() != 3 {
                    return Err(Error::invalid("cantor_obstacle expects [level, ratio] or [level, ratio, scale]"));
                }
                if p[0] < 0.0 || p[0].fract() != 0.0 || p[0] > 30.0 {
                    return Err(Error::invalid("cantor level must be an integer in [0, 30]"));
                }
                DomainKind::CantorObstacle { level: p[0] as u32, ratio: p[1], scale: p.get(2).copied().unwrap_or(1.0) }
            }
            "custom_mask" => {
                if p.is_empty() || !p.len().is_multiple_of(2 * dim) {
                    return Err(Error::invalid(format!(
                        "custom_mask expects a multiple of {} parameters (lo, hi per box)",
                        2 * dim
                    )));
                }
                let boxes = p.chunks(2 * dim).map(|c| (c[..dim].to_vec(), c[dim..].to_vec())).collect();
                DomainKind::CustomMask { boxes }
            }
            other => return Err(Error::invalid(format!("unknown domain kind '{other}'"))),
        };
        DomainSpec::new(kind, Point(rec.anchor))
    }
}

impl From<DomainSpec> for DomainRecord {
    fn from(domain: DomainSpec) -> Self {
        let params = match &domain.kind {
            DomainKind::FullSpace | DomainKind::HalfSpace => vec![],
            DomainKind::ExteriorCube { center, half_edge } => {
                let mut v = center.clone();
                v.push(*half_edge);
                v
            }
            DomainKind::Slit { start, end } => start.iter().chain(end).copied().collect(),
            DomainKind::PowerCusp { exponent } => vec![*exponent],
            DomainKind::CantorObstacle { level, ratio, scale } => vec![*level as f64, *ratio, *scale],
            DomainKind::CustomMask { boxes } => {
                boxes.iter().flat_map(|(lo, hi)| lo.iter().chain(hi).copied()).collect()
            }
        };
        DomainRecord { kind: domain.kind.name().to_string(), params, anchor: domain.anchor.0 }
    }
}

fn in_box(x: &[f64], lo: &[f64], hi: &[f64]) -> bool {
    x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| *l <= *v && *v <= *h)
}

fn box_distance(x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(v, (l, h))| {
            let d = (l - v).max(v - h).max(0.0);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn segment_param(x: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let len2: f64 = a.iter().zip(b).map(|(p, q)| (q - p) * (q - p)).sum();
    if len2 == 0.0 {
        return 0.0;
    }
    let t: f64 = x.iter().zip(a.iter().zip(b)).map(|(v, (p, q))| (v - p) * (q - p)).sum::<f64>() / len2;
    t.clamp(0.0, 1.0)
}

fn segment_distance(x: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let t = segment_param(x, a, b);
    x.iter()
        .zip(a.iter().zip(b))
        .map(|(v, (p, q))| {
            let d = v - (p + t * (q - p));
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn on_segment(x: &[f64], a: &[f64], b: &[f64]) -> bool {
    match x.len() {
        1 => {
            let (lo, hi) = if a[0] <= b[0] { (a[0], b[0]) } else { (b[0], a[0]) };
            lo <= x[0] && x[0] <= hi
        }
        _ => {
            let cross = (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]);
            if cross != 0.0 {
                return false;
            }
            let within = |k: usize| a[k].min(b[k]) <= x[k] && x[k] <= a[k].max(b[k]);
            within(0) && within(1)
        }
    }
}

fn cantor_contains(y: f64, level: u32, ratio: f64) -> bool {
    let (mut lo, mut len) = (0.0, 1.0);
    if !(lo..=lo + len).contains(&y) {
        return false;
    }
    for _ in 0..level {
        let piece = ratio * len;
        if y <= lo + piece {
            len = piece;
        } else if y >= lo + len - piece {
            lo += len - piece;
            len = piece;
        } else {
            return false;
        }
    }
    true
}

/// Distance from `y` to the level-`L` Cantor set in `[0, 1]`. At every
/// level the child on the same side of the midpoint is at least as close.
fn cantor_distance(y: f64, level: u32, ratio: f64) -> f64 {
    let (mut lo, mut len) = (0.0, 1.0);
    for _ in 0..level {
        let piece = ratio * len;
        if y <= lo + 0.5 * len {
            len = piece;
        } else {
            lo += len - piece;
            len = piece;
        }
    }
    (lo - y).max(y - (lo + len)).max(0.0)
}

/// Distance from `(y0, y1)` with `y1 >= 0` to `{s >= 0, t <= s^q}`.
fn cusp_distance(y0: f64, y1: f64, q: f64) -> f64 {
    let f = |s: f64| {
        let dx = y0 - s;
        let dy = y1 - s.powf(q);
        (dx * dx + dy * dy).sqrt()
    };
    let reach = y0.max(0.0) + (y0 * y0 + y1 * y1).sqrt();
    let samples = 400;
    let mut best = (0.0, f(0.0));
    for k in 1..=samples {
        let s = reach * k as f64 / samples as f64;
        let v = f(s);
        if v < best.1 {
            best = (s, v);
        }
    }
    let step = reach / samples as f64;
    let (mut a, mut b) = ((best.0 - step).max(0.0), best.0 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.1.min(f(0.5 * (a + b)))
}

/// Node-centred uniform lattice over a cube, `2m + 1` nodes per axis.
///
/// Flat node index is row-major with axis 0 slowest:
/// `flat = i_0 * n^{N-1} + ... + i_{N-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub center: Point,
    pub h: f64,
    /// Cells from the centre node to a face.
    pub half_cells: usize,
}

impl Lattice {
    /// Lattice over `cube` with spacing `h`; `h` must divide the half edge.
    pub fn over(cube: &Cube, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::DegenerateGrid(format!("grid spacing must be positive, got {h}")));
        }
        let ratio = cube.half_edge / h;
        let m = ratio.round();
        if (ratio - m).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::DegenerateGrid(format!("spacing {h} does not divide half edge {}", cube.half_edge)));
        }
        if m < 1.0 {
            return Err(Error::DegenerateGrid("fewer than 3 nodes per axis".into()));
        }
        Ok(Lattice { center: cube.center.clone(), h, half_cells: m as usize })
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// Nodes per axis.
    pub fn n(&self) -> usize {
        2 * self.half_cells + 1
    }

    pub fn len(&self) -> usize {
        self.n().pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cube(&self) -> Cube {
        Cube { center: self.center.clone(), half_edge: self.half_cells as f64 * self.h }
    }

    pub fn multi(&self, flat: usize) -> [usize; 2] {
        let n = self.n();
        if self.dim() == 1 {
            [flat, 0]
        } else {
            [flat / n, flat % n]
        }
    }

    pub fn flat(&self, idx: [usize; 2]) -> usize {
        if self.dim() == 1 {
            idx[0]
        } else {
            idx[0] * self.n() + idx[1]
        }
    }

    /// Signed offset (in cells) of node `flat` from the centre node.
    pub fn offset(&self, flat: usize) -> [i64; 2] {
        let m = self.half_cells as i64;
        let idx = self.multi(flat);
        if self.dim() == 1 {
            [idx[0] as i64 - m, 0]
        } else {
            [idx[0] as i64 - m, idx[1] as i64 - m]
        }
    }

    pub fn coord(&self, flat: usize) -> [f64; 2] {
        let off = self.offset(flat);
        let c = self.center.coords();
        let mut x = [0.0; 2];
        for k in 0..self.dim() {
            x[k] = c[k] + off[k] as f64 * self.h;
        }
        x
    }

    pub fn is_face(&self, flat: usize) -> bool {
        let idx = self.multi(flat);
        let last = self.n() - 1;
        (0..self.dim()).any(|k| idx[k] == 0 || idx[k] == last)
    }

    /// Node whose coordinates match `x` to within `1e-9 h`, if any.
    pub fn node_at(&self, x: &[f64]) -> Option<usize> {
        let c = self.center.coords();
        let mut idx = [0usize; 2];
        for k in 0..self.dim() {
            let r = (x[k] - c[k]) / self.h;
            let m = r.round();
            if (r - m).abs() > 1e-9 || m.abs() > self.half_cells as f64 {
                return None;
            }
            idx[k] = (m as i64 + self.half_cells as i64) as usize;
        }
        Some(self.flat(idx))
    }

    /// Flat indices of lattice nodes inside the closed cube `K_r(y)`.
    pub fn nodes_in_cube(&self, y: &[f64], r: f64) -> Vec<usize> {
        let tol = 1e-9 * self.h;
        (0..self.len())
            .filter(|&i| {
                let x = self.coord(i);
                (0..self.dim()).all(|k| (x[k] - y[k]).abs() <= r + tol)
            })
            .collect()
    }
}

/// Boolean field on a lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorField {
    pub lattice: Lattice,
    pub values: Vec<bool>,
}

impl IndicatorField {
    pub fn count(&self) -> usize {
        self.values.iter().filter(|v| **v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.values.iter().any(|v| *v)
    }
}

/// Marks nodes of the lattice over `inner` that belong to `K \ E`.
pub fn rasterize_obstacle(domain: &DomainSpec, inner: &Cube, grid_h: f64) -> Result<IndicatorField> {
    if inner.dim() != domain.dim() {
        return Err(Error::invalid("cube and domain dimensions differ"));
    }
    let lattice = Lattice::over(inner, grid_h)?;
    let values = crate::exec::map_range(lattice.len(), |i| {
        let x = lattice.coord(i);
        domain.is_obstacle_node(&x[..lattice.dim()], grid_h)
    });
    Ok(IndicatorField { lattice, values })
}

/// Marks nodes of the lattice over `bbox` that belong to `E`; the complement
/// of [`rasterize_obstacle`] on the same lattice.
pub fn rasterize_domain(domain: &DomainSpec, bbox: &Cube, grid_h: f64) -> Result<IndicatorField> {
    let mut field = rasterize_obstacle(domain, bbox, grid_h)?;
    for v in field.values.iter_mut() {
        *v = !*v;
    }
    Ok(field)
}
