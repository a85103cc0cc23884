//! Backward-Euler solver for `u_t = div(|Du|^{p-2} Du)` on a masked lattice.
//!
//! A step from `u_prev` over `τ` minimizes
//!
//! ```text
//! Φ(u) = (h^N / 2τ) Σ_free (u - u_prev)^2 + (1/p) E(u)
//! ```
//!
//! with Dirichlet values imposed on every node outside `E` and on the faces
//! of the bounding box. The stationarity condition of `Φ` is the implicit
//! step of the gradient flow of `E/p`.

pub mod barenblatt;
pub mod snapshot;

use serde::{Deserialize, Serialize};

use crate::capacity::SolverConfig;
use crate::energy::{self, GridEnergy, MinimizeConfig, Objective};
use crate::geometry::{rasterize_domain, Cube, DomainSpec, Lattice, Point};
use crate::{Error, Result, StructureParams};

pub use snapshot::Snapshot;

/// Time levels `0 = t_0 < … < t_M = T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeAxis {
    Uniform {
        t_end: f64,
        steps: usize,
    },
    /// `τ = factor · ω^{2-p} h^p` with `ω` the oscillation of the initial
    /// data over the lattice.
    Intrinsic {
        t_end: f64,
        factor: f64,
        max_steps: usize,
    },
    Explicit {
        times: Vec<f64>,
    },
}

#[derive(Clone, Debug)]
pub struct SpaceTimeGrid {
    pub lattice: Lattice,
    /// Node lies in `E`.
    pub in_domain: Vec<bool>,
    /// Node carries boundary data: outside `E` or on the box faces.
    pub dirichlet: Vec<bool>,
    pub times: Vec<f64>,
}

impl SpaceTimeGrid {
    /// Lattice over `bbox` with the mask of `domain`.
    pub fn new(domain: &DomainSpec, bbox: &Cube, h: f64, times: Vec<f64>) -> Result<Self> {
        let field = rasterize_domain(domain, bbox, h)?;
        Self::from_mask(field.lattice, field.values, times)
    }

    pub fn from_mask(lattice: Lattice, in_domain: Vec<bool>, times: Vec<f64>) -> Result<Self> {
        if in_domain.len() != lattice.len() {
            return Err(Error::invalid("mask length does not match the lattice"));
        }
        if times.len() < 2 || times[0] != 0.0 {
            return Err(Error::invalid("time levels must start at 0 and contain at least one step"));
        }
        if let Some(k) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(format!("time levels must strictly increase (at level {})", k + 1)));
        }
        let dirichlet: Vec<bool> = (0..lattice.len()).map(|i| !in_domain[i] || lattice.is_face(i)).collect();
        let grid = SpaceTimeGrid { lattice, in_domain, dirichlet, times };
        if let Some(node) = (0..grid.lattice.len())
            .find(|&i| !grid.dirichlet[i] && grid.neighbours(i).iter().all(|&j| grid.dirichlet[j]))
        {
            return Err(Error::IsolatedNode(node));
        }
        Ok(grid)
    }

    /// Nearest neighbours of `node` along the lattice axes.
    pub fn neighbours(&self, node: usize) -> Vec<usize> {
        let l = &self.lattice;
        let idx = l.multi(node);
        let last = l.n() - 1;
        let mut out = Vec::with_capacity(4);
        for k in 0..l.dim() {
            if idx[k] > 0 {
                let mut m = idx;
                m[k] -= 1;
                out.push(l.flat(m));
            }
            if idx[k] < last {
                let mut m = idx;
                m[k] += 1;
                out.push(l.flat(m));
            }
        }
        out
    }

    pub fn point(&self, node: usize) -> Vec<f64> {
        self.lattice.coord(node)[..self.lattice.dim()].to_vec()
    }
}

/// Time levels for `axis`; the intrinsic rule uses the initial data.
pub fn time_levels(axis: &TimeAxis, lattice: &Lattice, datum: &BoundaryDatum, p: f64) -> Result<Vec<f64>> {
    let uniform = |t_end: f64, steps: usize| -> Result<Vec<f64>> {
        if !(t_end > 0.0) || steps == 0 {
            return Err(Error::invalid("time axis needs t_end > 0 and at least one step"));
        }
        Ok((0..=steps).map(|k| t_end * k as f64 / steps as f64).collect())
    };
    match axis {
        TimeAxis::Uniform { t_end, steps } => uniform(*t_end, *steps),
        TimeAxis::Explicit { times } => Ok(times.clone()),
        TimeAxis::Intrinsic { t_end, factor, max_steps } => {
            if !(*factor > 0.0) {
                return Err(Error::invalid("intrinsic time factor must be positive"));
            }
            let (lo, hi) = (0..lattice.len())
                .map(|i| datum.eval(&lattice.coord(i)[..lattice.dim()], 0.0))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            let omega = (hi - lo).max(f64::MIN_POSITIVE);
            let tau = factor * omega.powf(2.0 - p) * lattice.h.powf(p);
            let steps = (t_end / tau).ceil().max(1.0);
            if steps > *max_steps as f64 {
                return Err(Error::invalid(format!(
                    "intrinsic step {tau:e} needs {steps} steps, above max_steps = {max_steps}"
                )));
            }
            uniform(*t_end, steps as usize)
        }
    }
}

/// Continuous data `g(x, t)` on the parabolic boundary.
#[derive(Clone, Debug)]
pub enum BoundaryDatum {
    Constant(f64),
    /// `offset + coeffs · x + rate · t`.
    Linear {
        coeffs: Vec<f64>,
        rate: f64,
        offset: f64,
    },
    /// `scale · |x - center|^exponent`.
    RadialPower {
        center: Point,
        exponent: f64,
        scale: f64,
    },
    /// `min(cap, dist(x, E^c) / scale)`.
    DistanceRamp {
        domain: DomainSpec,
        scale: f64,
        cap: f64,
    },
    /// Source-type solution evaluated at time `t + t_shift`.
    Barenblatt {
        p: f64,
        t_shift: f64,
    },
    Sum(Vec<BoundaryDatum>),
}

impl BoundaryDatum {
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match self {
            BoundaryDatum::Constant(c) => *c,
            BoundaryDatum::Linear { coeffs, rate, offset } => {
                offset + coeffs.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + rate * t
            }
            BoundaryDatum::RadialPower { center, exponent, scale } => {
                let r2: f64 = center.coords().iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
                scale * r2.sqrt().powf(*exponent)
            }
            BoundaryDatum::DistanceRamp { domain, scale, cap } => {
                if domain.contains(x) {
                    (domain.distance_to_complement(x) / scale).min(*cap)
                } else {
                    0.0
                }
            }
            BoundaryDatum::Barenblatt { p, t_shift } => barenblatt::barenblatt(x, t + t_shift, *p),
            BoundaryDatum::Sum(parts) => parts.iter().map(|d| d.eval(x, t)).sum(),
        }
    }

    /// Short description of the modulus of continuity, for reports.
    pub fn modulus(&self) -> String {
        match self {
            BoundaryDatum::Constant(_) => "constant".into(),
            BoundaryDatum::Linear { coeffs, rate, .. } => {
                let l = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
                format!("Lipschitz: |Dg| = {l}, |g_t| = {}", rate.abs())
            }
            BoundaryDatum::RadialPower { exponent, scale, .. } if *exponent <= 1.0 => {
                format!("Holder {exponent} with constant {scale}")
            }
            BoundaryDatum::RadialPower { .. } => "locally Lipschitz".into(),
            BoundaryDatum::DistanceRamp { scale, .. } => format!("Lipschitz 1/{scale}"),
            BoundaryDatum::Barenblatt { .. } => "smooth away from the free boundary".into(),
            BoundaryDatum::Sum(parts) => {
                let each: Vec<String> = parts.iter().map(|d| d.modulus()).collect();
                format!("sum of [{}]", each.join("; "))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeConfig {
    #[serde(flatten)]
    pub solver: SolverConfig,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig { solver: SolverConfig { tol_rel_energy: 1e-10, ..SolverConfig::default() } }
    }
}

/// `u[time index][node]` on every lattice node.
#[derive(Clone, Debug)]
pub struct SpaceTimeField {
    pub lattice: Lattice,
    pub in_domain: Vec<bool>,
    pub dirichlet: Vec<bool>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub iterations: Vec<usize>,
}

impl SpaceTimeField {
    pub fn at(&self, node: usize, k: usize) -> f64 {
        self.values[k][node]
    }

    pub fn snapshot(&self, k: usize) -> Snapshot {
        Snapshot {
            lattice: self.lattice.clone(),
            time_index: k as u64,
            t: self.times[k],
            values: self.values[k].clone(),
        }
    }

    /// Index of the time level equal to `t` within `1e-9` relative, if any.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * self.times.last().copied().unwrap_or(1.0).abs().max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    pub fn point(&self, node: usize) -> Vec<f64> {
        self.lattice.coord(node)[..self.lattice.dim()].to_vec()
    }
}

pub fn solve(grid: &SpaceTimeGrid, datum: &BoundaryDatum, p: f64, cfg: &SchemeConfig) -> Result<SpaceTimeField> {
    if !(p > 2.0) {
        return Err(Error::invalid(format!("p must exceed 2, got {p}")));
    }
    cfg.solver.validate()?;
    let lattice = &grid.lattice;
    let len = lattice.len();
    let points: Vec<Vec<f64>> = (0..len).map(|i| grid.point(i)).collect();
    let energy = GridEnergy::new(lattice, p);
    let h_n = lattice.h.powi(lattice.dim() as i32);
    let mcfg = MinimizeConfig { linear_rtol: 1e-10, ..cfg.solver.minimize_config() };

    let mut u: Vec<f64> = points.iter().map(|x| datum.eval(x, 0.0)).collect();
    let mut values = vec![u.clone()];
    let mut iterations = vec![0];
    for step in 1..grid.times.len() {
        let t = grid.times[step];
        let tau = t - grid.times[step - 1];
        let prev = u.clone();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..len {
            let v = if grid.dirichlet[i] {
                u[i] = datum.eval(&points[i], t);
                u[i]
            } else {
                prev[i]
            };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let obj = Objective {
            energy,
            fixed: &grid.dirichlet,
            energy_scale: 1.0 / p,
            mass: h_n / tau,
            anchor: Some(&prev),
            bounds: (lo, hi),
        };
        let out = energy::minimize(&obj, u, &mcfg);
        if !out.converged {
            let last_energy = *out.history.last().unwrap_or(&f64::NAN);
            return Err(Error::TimeStep {
                step,
                time: t,
                source: Box::new(Error::NoConvergence { iterations: out.iterations, last_energy }),
            });
        }
        u = out.u;
        values.push(u.clone());
        iterations.push(out.iterations);
    }
    Ok(SpaceTimeField {
        lattice: lattice.clone(),
        in_domain: grid.in_domain.clone(),
        dirichlet: grid.dirichlet.clone(),
        times: grid.times.clone(),
        values,
        iterations,
    })
}

/// Time levels of `field` inside `[t_lo, t_hi]` up to a relative tolerance.
fn levels_in(times: &[f64], t_lo: f64, t_hi: f64) -> Vec<usize> {
    let tol = 1e-12 * t_hi.abs().max(1.0);
    (0..times.len()).filter(|&k| times[k] >= t_lo - tol && times[k] <= t_hi + tol).collect()
}

/// `max - min` of `u` over nodes of `E` in
/// `K_{2ρ}(x_o) × [t_o - ω_o^{2-p} ρ^p, t_o]`, the window clipped at 0.
pub fn oscillation(field: &SpaceTimeField, x_o: &Point, t_o: f64, rho: f64, omega_o: f64, p: f64) -> Result<f64> {
    if !(rho > 0.0) || !(omega_o > 0.0) {
        return Err(Error::invalid("oscillation needs rho > 0 and omega_o > 0"));
    }
    let t_lo = (t_o - omega_o.powf(2.0 - p) * rho.powf(p)).max(0.0);
    let levels = levels_in(&field.times, t_lo, t_o);
    let nodes: Vec<usize> =
        field.lattice.nodes_in_cube(x_o.coords(), 2.0 * rho).into_iter().filter(|&i| field.in_domain[i]).collect();
    if levels.is_empty() || nodes.is_empty() {
        return Err(Error::EmptyRegion(format!(
            "no grid nodes of E in the cylinder at x_o = {:?}, rho = {rho}, t in [{t_lo}, {t_o}]",
            x_o.coords()
        )));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &k in &levels {
        for &i in &nodes {
            let v = field.values[k][i];
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    Ok(hi - lo)
}

/// Time depth `3 γ_* δ(R_o)^{(2-p)/(p-1)} R_o^{p-ε}` of `Q_{R_o}`.
pub fn q_ro_time_depth(delta_ro: f64, r_o: f64, epsilon: f64, params: &StructureParams) -> f64 {
    let p = params.p;
    3.0 * params.constants.gamma_star * delta_ro.powf((2.0 - p) / (p - 1.0)) * r_o.powf(p - epsilon)
}

/// Lattice nodes outside `E` with a neighbour in `E`: the discrete lateral
/// boundary.
pub fn lateral_nodes(grid: &SpaceTimeGrid) -> Vec<usize> {
    (0..grid.lattice.len())
        .filter(|&i| !grid.in_domain[i] && grid.neighbours(i).iter().any(|&j| grid.in_domain[j]))
        .collect()
}

/// `max - min` of `g` over lateral-boundary nodes in `K_{2R_o}(x_o)` and
/// `time_samples` uniformly spaced times spanning the closed window
/// `[t_o - time_depth, t_o]` clipped at 0. Zero when no such node exists.
pub fn osc_g_on_lateral(
    datum: &BoundaryDatum,
    grid: &SpaceTimeGrid,
    x_o: &Point,
    t_o: f64,
    r_o: f64,
    time_depth: f64,
    time_samples: usize,
) -> f64 {
    let nodes: Vec<usize> = lateral_nodes(grid)
        .into_iter()
        .filter(|&i| {
            let x = grid.lattice.coord(i);
            (0..grid.lattice.dim()).all(|k| (x[k] - x_o.coords()[k]).abs() <= 2.0 * r_o + 1e-9 * grid.lattice.h)
        })
        .collect();
    if nodes.is_empty() {
        return 0.0;
    }
    let t_lo = (t_o - time_depth).max(0.0);
    let samples = time_samples.max(2);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in 0..samples {
        let t = t_lo + (t_o - t_lo) * s as f64 / (samples - 1) as f64;
        for &i in &nodes {
            let v = datum.eval(&grid.point(i), t);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    hi - lo
}
