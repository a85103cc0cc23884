//! Discrete p-Dirichlet energy on a node-centred lattice and its minimizer.
//!
//! Each lattice cell contributes a composite-trapezoid sum over its `2^N`
//! corners. At a corner the gradient is assembled from the one-sided
//! differences along the cell edges meeting there:
//!
//! ```text
//! E(u) = Σ_cells Σ_corners (h^N / 2^N) · |∇u|_corner^p
//! ```
//!
//! In 1D this is `Σ h |Δu/h|^p`. Each corner term is a convex function of two
//! edge differences, so `E` is convex, and freezing the factors
//! `max(|∇u|, ξ_min)^{p-2}` gives a weighted graph Laplacian with positive
//! edge conductances (an M-matrix once Dirichlet rows are removed).
//!
//! [`minimize`] runs the reweighted iteration: solve the frozen-weight linear
//! system, line-search the true objective along the update, then truncate to
//! the admissible range. Truncation never raises the objective, so the energy
//! history is nonincreasing.

use crate::exec;
use crate::geometry::Lattice;
use crate::WEIGHT_FLOOR;

/// Edge differences (or edge conductances) of a lattice function.
///
/// `axis0[i*n + j]` joins nodes `(i, j)` and `(i+1, j)`;
/// `axis1[i*(n-1) + j]` joins `(i, j)` and `(i, j+1)`. In 1D only `axis0`
/// is used.
#[derive(Clone, Debug, Default)]
pub struct EdgeField {
    pub axis0: Vec<f64>,
    pub axis1: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct GridEnergy {
    dim: usize,
    n: usize,
    h: f64,
    p: f64,
}

impl GridEnergy {
    pub fn new(lattice: &Lattice, p: f64) -> Self {
        GridEnergy { dim: lattice.dim(), n: lattice.n(), h: lattice.h, p }
    }

    pub fn nodes(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn edge_diffs(&self, u: &[f64]) -> EdgeField {
        let n = self.n;
        if self.dim == 1 {
            let mut a0 = vec![0.0; n - 1];
            exec::fill(&mut a0, |i| u[i + 1] - u[i]);
            return EdgeField { axis0: a0, axis1: Vec::new() };
        }
        let mut a0 = vec![0.0; (n - 1) * n];
        exec::fill(&mut a0, |e| u[e + n] - u[e]);
        let mut a1 = vec![0.0; n * (n - 1)];
        exec::fill(&mut a1, |e| {
            let (i, j) = (e / (n - 1), e % (n - 1));
            u[i * n + j + 1] - u[i * n + j]
        });
        EdgeField { axis0: a0, axis1: a1 }
    }

    fn cells(&self) -> usize {
        (self.n - 1).pow(self.dim as u32)
    }

    /// Corner weight `h^N / 2^N` divided by `h^p`, so terms take raw differences.
    fn corner_factor(&self) -> f64 {
        let c = self.h.powi(self.dim as i32) / (1u32 << self.dim) as f64;
        c / self.h.powf(self.p)
    }

    /// Raw edge differences at the four corners of cell `q` (2D).
    #[inline]
    fn corners(&self, f: &EdgeField, q: usize) -> [(f64, f64); 4] {
        let n = self.n;
        let (i, j) = (q / (n - 1), q % (n - 1));
        let x0 = f.axis0[i * n + j];
        let x1 = f.axis0[i * n + j + 1];
        let y0 = f.axis1[i * (n - 1) + j];
        let y1 = f.axis1[(i + 1) * (n - 1) + j];
        // (a, b) = (0,0), (1,0), (0,1), (1,1)
        [(x0, y0), (x0, y1), (x1, y0), (x1, y1)]
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        self.energy_of(&self.edge_diffs(u))
    }

    pub fn energy_of(&self, d: &EdgeField) -> f64 {
        let k = self.corner_factor();
        let half_p = 0.5 * self.p;
        if self.dim == 1 {
            let p = self.p;
            return 2.0 * k * exec::sum(d.axis0.len(), |i| d.axis0[i].abs().powf(p));
        }
        k * exec::sum(self.cells(), |q| {
            self.corners(d, q).iter().map(|(a, b)| (a * a + b * b).powf(half_p)).sum::<f64>()
        })
    }

    /// `d/dα E(x + α d)` from the edge differences of `x` and `d`.
    pub fn slope_along(&self, x: &EdgeField, d: &EdgeField, alpha: f64) -> f64 {
        let k = self.corner_factor() * self.p;
        let e = 0.5 * self.p - 1.0;
        if self.dim == 1 {
            return 2.0
                * k
                * exec::sum(x.axis0.len(), |i| {
                    let a = x.axis0[i] + alpha * d.axis0[i];
                    (a * a).powf(e) * a * d.axis0[i]
                });
        }
        k * exec::sum(self.cells(), |q| {
            let cx = self.corners(x, q);
            let cd = self.corners(d, q);
            let mut s = 0.0;
            for c in 0..4 {
                let a = cx[c].0 + alpha * cd[c].0;
                let b = cx[c].1 + alpha * cd[c].1;
                let r2 = a * a + b * b;
                if r2 > 0.0 {
                    s += r2.powf(e) * (a * cd[c].0 + b * cd[c].1);
                }
            }
            s
        })
    }

    /// Frozen-weight conductances such that the graph Laplacian `L_K u`
    /// equals `∇E(u)` when `floor = 0`.
    pub fn conductances(&self, d: &EdgeField, floor: f64) -> EdgeField {
        let n = self.n;
        let h = self.h;
        let pm2 = self.p - 2.0;
        let w = |a: f64, b: f64| ((a * a + b * b).sqrt() / h).max(floor).powf(pm2);
        // p * (h^N / 2^N) / h^2
        let c = self.p * h.powi(self.dim as i32) / (1u32 << self.dim) as f64 / (h * h);
        if self.dim == 1 {
            let mut k0 = vec![0.0; n - 1];
            exec::fill(&mut k0, |i| 2.0 * c * w(d.axis0[i], 0.0));
            return EdgeField { axis0: k0, axis1: Vec::new() };
        }
        let mut k0 = vec![0.0; (n - 1) * n];
        exec::fill(&mut k0, |e| {
            let (i, j) = (e / n, e % n);
            let a = d.axis0[e];
            let mut s = 0.0;
            for aa in 0..2 {
                let col = (i + aa) * (n - 1);
                if j < n - 1 {
                    s += w(a, d.axis1[col + j]);
                }
                if j >= 1 {
                    s += w(a, d.axis1[col + j - 1]);
                }
            }
            c * s
        });
        let mut k1 = vec![0.0; n * (n - 1)];
        exec::fill(&mut k1, |e| {
            let (i, j) = (e / (n - 1), e % (n - 1));
            let b = d.axis1[e];
            let mut s = 0.0;
            for bb in 0..2 {
                if i < n - 1 {
                    s += w(d.axis0[i * n + j + bb], b);
                }
                if i >= 1 {
                    s += w(d.axis0[(i - 1) * n + j + bb], b);
                }
            }
            c * s
        });
        EdgeField { axis0: k0, axis1: k1 }
    }

    /// Uniform unit conductances (the `p = 2` Laplacian up to scale).
    pub fn unit_conductances(&self) -> EdgeField {
        let zero = self.edge_diffs(&vec![0.0; self.nodes()]);
        GridEnergy { p: 2.0, ..*self }.conductances(&zero, 1.0)
    }

    /// `y = mass * v + L_K v`, evaluated at every node.
    fn apply(&self, k: &EdgeField, mass: f64, v: &[f64], y: &mut [f64]) {
        let n = self.n;
        if self.dim == 1 {
            exec::fill(y, |i| {
                let mut s = mass * v[i];
                if i + 1 < n {
                    s += k.axis0[i] * (v[i] - v[i + 1]);
                }
                if i >= 1 {
                    s += k.axis0[i - 1] * (v[i] - v[i - 1]);
                }
                s
            });
            return;
        }
        exec::fill(y, |node| {
            let (i, j) = (node / n, node % n);
            let vi = v[node];
            let mut s = mass * vi;
            if i + 1 < n {
                s += k.axis0[node] * (vi - v[node + n]);
            }
            if i >= 1 {
                s += k.axis0[node - n] * (vi - v[node - n]);
            }
            if j + 1 < n {
                s += k.axis1[i * (n - 1) + j] * (vi - v[node + 1]);
            }
            if j >= 1 {
                s += k.axis1[i * (n - 1) + j - 1] * (vi - v[node - 1]);
            }
            s
        });
    }

    fn diagonal(&self, k: &EdgeField, mass: f64) -> Vec<f64> {
        let n = self.n;
        let mut d = vec![0.0; self.nodes()];
        if self.dim == 1 {
            exec::fill(&mut d, |i| {
                let mut s = mass;
                if i + 1 < n {
                    s += k.axis0[i];
                }
                if i >= 1 {
                    s += k.axis0[i - 1];
                }
                s
            });
            return d;
        }
        exec::fill(&mut d, |node| {
            let (i, j) = (node / n, node % n);
            let mut s = mass;
            if i + 1 < n {
                s += k.axis0[node];
            }
            if i >= 1 {
                s += k.axis0[node - n];
            }
            if j + 1 < n {
                s += k.axis1[i * (n - 1) + j];
            }
            if j >= 1 {
                s += k.axis1[i * (n - 1) + j - 1];
            }
            s
        });
        d
    }
}

/// Jacobi-preconditioned conjugate gradients for
/// `(mass I + L_K) δ = r` on the free nodes, with `δ = 0` on fixed nodes.
/// Returns the number of iterations taken.
fn pcg(
    energy: &GridEnergy,
    k: &EdgeField,
    mass: f64,
    fixed: &[bool],
    rhs: &[f64],
    x: &mut [f64],
    rtol: f64,
    max_iter: usize,
) -> usize {
    let len = rhs.len();
    let diag = energy.diagonal(k, mass);
    let mask = |v: &mut [f64]| {
        for (vi, f) in v.iter_mut().zip(fixed) {
            if *f {
                *vi = 0.0;
            }
        }
    };
    x.iter_mut().for_each(|v| *v = 0.0);
    let mut r = rhs.to_vec();
    mask(&mut r);
    let r0 = exec::sum(len, |i| r[i] * r[i]).sqrt();
    if r0 == 0.0 {
        return 0;
    }
    let mut z = vec![0.0; len];
    exec::fill(&mut z, |i| if fixed[i] { 0.0 } else { r[i] / diag[i] });
    let mut dir = z.clone();
    let mut q = vec![0.0; len];
    let mut rz = exec::sum(len, |i| r[i] * z[i]);
    for it in 1..=max_iter {
        energy.apply(k, mass, &dir, &mut q);
        mask(&mut q);
        let dq = exec::sum(len, |i| dir[i] * q[i]);
        if dq <= 0.0 {
            return it;
        }
        let alpha = rz / dq;
        for i in 0..len {
            x[i] += alpha * dir[i];
            r[i] -= alpha * q[i];
        }
        let rn = exec::sum(len, |i| r[i] * r[i]).sqrt();
        if rn <= rtol * r0 {
            return it;
        }
        exec::fill(&mut z, |i| if fixed[i] { 0.0 } else { r[i] / diag[i] });
        let rz_new = exec::sum(len, |i| r[i] * z[i]);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..len {
            dir[i] = z[i] + beta * dir[i];
        }
    }
    max_iter
}

#[derive(Clone, Copy, Debug)]
pub struct MinimizeConfig {
    pub max_iter: usize,
    pub tol_rel_energy: f64,
    pub weight_floor: f64,
    pub linear_rtol: f64,
    pub linear_max_iter: usize,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        MinimizeConfig {
            max_iter: 500,
            tol_rel_energy: 1e-8,
            weight_floor: WEIGHT_FLOOR,
            linear_rtol: 1e-8,
            linear_max_iter: 20_000,
        }
    }
}

/// `Φ(u) = energy_scale · E(u) + (mass / 2) Σ_free (u - anchor)^2`,
/// minimized over `u` with fixed nodes held at their given values and free
/// nodes truncated to `bounds`.
pub struct Objective<'a> {
    pub energy: GridEnergy,
    pub fixed: &'a [bool],
    pub energy_scale: f64,
    pub mass: f64,
    pub anchor: Option<&'a [f64]>,
    pub bounds: (f64, f64),
}

#[derive(Clone, Debug)]
pub struct MinimizeOutcome {
    pub u: Vec<f64>,
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl Objective<'_> {
    pub fn value(&self, u: &[f64]) -> f64 {
        self.value_with(u, &self.energy.edge_diffs(u))
    }

    fn value_with(&self, u: &[f64], diffs: &EdgeField) -> f64 {
        let mut v = self.energy_scale * self.energy.energy_of(diffs);
        if let (Some(a), true) = (self.anchor, self.mass > 0.0) {
            let fixed = self.fixed;
            v += 0.5 * self.mass * exec::sum(u.len(), |i| if fixed[i] { 0.0 } else { (u[i] - a[i]).powi(2) });
        }
        v
    }

    fn slope(&self, x: &[f64], dx: &EdgeField, d: &[f64], dd: &EdgeField, alpha: f64) -> f64 {
        let mut s = self.energy_scale * self.energy.slope_along(dx, dd, alpha);
        if let (Some(a), true) = (self.anchor, self.mass > 0.0) {
            let fixed = self.fixed;
            s += self.mass * exec::sum(x.len(), |i| if fixed[i] { 0.0 } else { (x[i] + alpha * d[i] - a[i]) * d[i] });
        }
        s
    }

    /// Residual `-∇Φ` of the frozen-weight model at `u`, zero on fixed nodes.
    fn residual(&self, k: &EdgeField, u: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; u.len()];
        self.energy.apply(k, 0.0, u, &mut r);
        let fixed = self.fixed;
        let anchor = self.anchor;
        let mass = self.mass;
        let lap = r.clone();
        exec::fill(&mut r, |i| {
            if fixed[i] {
                return 0.0;
            }
            let m = match anchor {
                Some(a) if mass > 0.0 => mass * (u[i] - a[i]),
                _ => 0.0,
            };
            -(lap[i] + m)
        });
        r
    }

    fn scaled(&self, mut k: EdgeField) -> EdgeField {
        let s = self.energy_scale;
        k.axis0.iter_mut().chain(k.axis1.iter_mut()).for_each(|v| *v *= s);
        k
    }

    fn project(&self, u: &mut [f64]) {
        let (lo, hi) = self.bounds;
        for (v, f) in u.iter_mut().zip(self.fixed) {
            if !f {
                *v = v.clamp(lo, hi);
            }
        }
    }

    /// One solve of the `p = 2` problem with the same constraints; a good
    /// starting point when no better guess exists.
    pub fn harmonic_start(&self, u0: &[f64], cfg: &MinimizeConfig) -> Vec<f64> {
        let k = self.energy.unit_conductances();
        let r = self.residual(&k, u0);
        let mut delta = vec![0.0; u0.len()];
        pcg(&self.energy, &k, self.mass, self.fixed, &r, &mut delta, cfg.linear_rtol, cfg.linear_max_iter);
        let mut u: Vec<f64> = u0.iter().zip(&delta).map(|(a, b)| a + b).collect();
        self.project(&mut u);
        u
    }
}

/// Reweighted minimization with safeguarded line search and truncation.
pub fn minimize(obj: &Objective<'_>, u0: Vec<f64>, cfg: &MinimizeConfig) -> MinimizeOutcome {
    let mut u = u0;
    obj.project(&mut u);
    let mut diffs = obj.energy.edge_diffs(&u);
    let mut value = obj.value_with(&u, &diffs);
    let mut history = vec![value];
    let mut delta = vec![0.0; u.len()];

    for it in 1..=cfg.max_iter {
        let k = obj.scaled(obj.energy.conductances(&diffs, cfg.weight_floor));
        let r = obj.residual(&k, &u);
        pcg(&obj.energy, &k, obj.mass, obj.fixed, &r, &mut delta, cfg.linear_rtol, cfg.linear_max_iter);
        let dd = obj.energy.edge_diffs(&delta);

        let s0 = obj.slope(&u, &diffs, &delta, &dd, 0.0);
        if !(s0 < 0.0) {
            return MinimizeOutcome { u, history, iterations: it - 1, converged: true };
        }
        let alpha = if obj.slope(&u, &diffs, &delta, &dd, 1.0) <= 0.0 {
            1.0
        } else {
            line_search(|a| obj.slope(&u, &diffs, &delta, &dd, a), s0)
        };

        let mut next: Vec<f64> = u.iter().zip(&delta).map(|(a, b)| a + alpha * b).collect();
        obj.project(&mut next);
        let next_diffs = obj.energy.edge_diffs(&next);
        let next_value = obj.value_with(&next, &next_diffs);
        if !(next_value < value) {
            // no representable decrease left
            return MinimizeOutcome { u, history, iterations: it, converged: true };
        }
        let rel = (value - next_value) / value.abs().max(f64::MIN_POSITIVE);
        u = next;
        diffs = next_diffs;
        value = next_value;
        history.push(value);
        if rel < cfg.tol_rel_energy {
            return MinimizeOutcome { u, history, iterations: it, converged: true };
        }
    }
    MinimizeOutcome { u, history, iterations: cfg.max_iter, converged: false }
}

/// Root of the increasing function `slope` on `(0, 1)` given
/// `slope(0) = s0 < 0 < slope(1)`, by the Illinois variant of regula falsi.
fn line_search(slope: impl Fn(f64) -> f64, s0: f64) -> f64 {
    let (mut a, mut fa) = (0.0, s0);
    let (mut b, mut fb) = (1.0, slope(1.0));
    let mut side = 0i8;
    let mut c = 0.5;
    for _ in 0..60 {
        c = (a * fb - b * fa) / (fb - fa);
        let fc = slope(c);
        if fc == 0.0 || (b - a) < 1e-12 {
            break;
        }
        if fc < 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if fc.abs() <= 1e-14 * s0.abs() {
            break;
        }
    }
    c
}
