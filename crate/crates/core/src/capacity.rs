//! Condenser p-capacities, the relative capacity `δ(ρ)`, and parabolic
//! capacity by time slicing.
//!
//! `cap_p(F, Ω)` is computed as the minimum of the discrete energy of
//! [`crate::energy`] over lattice functions equal to 1 on the obstacle nodes
//! and 0 on the faces of the outer cube. The reported value is the final
//! discrete energy, without extrapolation.

use serde::{Deserialize, Serialize};

use crate::energy::{self, GridEnergy, MinimizeConfig, Objective};
use crate::exec;
use crate::geometry::{rasterize_obstacle, Cube, DomainSpec, IndicatorField, Lattice, Point};
use crate::{Error, Result, WEIGHT_FLOOR};

pub use crate::params::{StructureConstants, StructureParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iter: usize,
    pub tol_rel_energy: f64,
    pub weight_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { max_iter: 500, tol_rel_energy: 1e-8, weight_floor: WEIGHT_FLOOR }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_rel_energy > 0.0 && self.tol_rel_energy < 1.0) {
            return Err(Error::invalid("tol_rel_energy must lie in (0, 1)"));
        }
        if self.max_iter == 0 || !(self.weight_floor > 0.0) {
            return Err(Error::invalid("max_iter and weight_floor must be positive"));
        }
        Ok(())
    }

    pub(crate) fn minimize_config(&self) -> MinimizeConfig {
        MinimizeConfig {
            max_iter: self.max_iter,
            tol_rel_energy: self.tol_rel_energy,
            weight_floor: self.weight_floor,
            ..MinimizeConfig::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct CondenserProblem {
    pub obstacle: IndicatorField,
    pub outer: Cube,
    pub p: f64,
    pub solver: SolverConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityValue {
    pub value: f64,
    pub energy_history: Vec<f64>,
    pub grid_h: f64,
    pub iterations: usize,
}

/// Capacity together with its minimizing potential on the outer lattice.
#[derive(Clone, Debug)]
pub struct CondenserSolution {
    pub capacity: CapacityValue,
    pub lattice: Lattice,
    pub potential: Vec<f64>,
}

pub fn solve_condenser(problem: &CondenserProblem) -> Result<CapacityValue> {
    solve_condenser_full(problem).map(|s| s.capacity)
}

pub fn solve_condenser_full(problem: &CondenserProblem) -> Result<CondenserSolution> {
    if !(problem.p > 2.0) {
        return Err(Error::invalid(format!("p must exceed 2, got {}", problem.p)));
    }
    problem.solver.validate()?;
    let inner = &problem.obstacle.lattice;
    let h = inner.h;
    let outer = Lattice::over(&problem.outer, h)?;
    if outer.dim() != inner.dim() {
        return Err(Error::invalid("obstacle and outer cube dimensions differ"));
    }

    // integer offset of the obstacle lattice centre inside the outer lattice
    let mut shift = [0i64; 2];
    for (k, s) in shift.iter_mut().enumerate().take(outer.dim()) {
        let r = (inner.center.0[k] - outer.center.0[k]) / h;
        let m = r.round();
        if (r - m).abs() > 1e-9 {
            return Err(Error::DegenerateGrid("obstacle lattice is not aligned with the outer lattice".into()));
        }
        if m.abs() as usize + inner.half_cells > outer.half_cells {
            return Err(Error::invalid("obstacle lattice extends beyond the outer cube"));
        }
        *s = m as i64;
    }

    let mut fixed: Vec<bool> = (0..outer.len()).map(|i| outer.is_face(i)).collect();
    let mut u0 = vec![0.0; outer.len()];
    let oc = outer.half_cells as i64;
    for (i, &on) in problem.obstacle.values.iter().enumerate() {
        if !on {
            continue;
        }
        let off = inner.offset(i);
        let mut idx = [0usize; 2];
        for k in 0..outer.dim() {
            idx[k] = (off[k] + shift[k] + oc) as usize;
        }
        let node = outer.flat(idx);
        if outer.is_face(node) {
            return Err(Error::PlatesTouch { node });
        }
        fixed[node] = true;
        u0[node] = 1.0;
    }

    if problem.obstacle.is_empty() {
        return Ok(CondenserSolution {
            capacity: CapacityValue { value: 0.0, energy_history: vec![0.0], grid_h: h, iterations: 0 },
            lattice: outer,
            potential: u0,
        });
    }

    let obj = Objective {
        energy: GridEnergy::new(&outer, problem.p),
        fixed: &fixed,
        energy_scale: 1.0,
        mass: 0.0,
        anchor: None,
        bounds: (0.0, 1.0),
    };
    let cfg = problem.solver.minimize_config();
    let start = obj.harmonic_start(&u0, &cfg);
    let out = energy::minimize(&obj, start, &cfg);
    let last = *out.history.last().unwrap_or(&f64::NAN);
    if !out.converged {
        return Err(Error::NoConvergence { iterations: out.iterations, last_energy: last });
    }
    Ok(CondenserSolution {
        capacity: CapacityValue { value: last, energy_history: out.history, grid_h: h, iterations: out.iterations },
        lattice: outer,
        potential: out.u,
    })
}

/// Resolution and solver settings for `δ(ρ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacityConfig {
    /// Cells from `x_o` to a face of `K_ρ(x_o)`; `h = ρ / cells_per_rho`.
    /// Must be even and at least 8 (17 nodes across `K_ρ`).
    pub cells_per_rho: usize,
    #[serde(flatten)]
    pub solver: SolverConfig,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        CapacityConfig { cells_per_rho: 16, solver: SolverConfig::default() }
    }
}

impl CapacityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cells_per_rho < 8 || !self.cells_per_rho.is_multiple_of(2) {
            return Err(Error::invalid(format!("cells_per_rho must be even and >= 8, got {}", self.cells_per_rho)));
        }
        self.solver.validate()
    }
}

/// Both capacities behind one value of `δ(ρ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaValue {
    pub rho: f64,
    pub delta: f64,
    pub cap_obstacle: f64,
    pub cap_full: f64,
    pub iterations: usize,
}

/// Relative capacity `cap_p(K_ρ \ E, K_{3ρ/2}) / cap_p(K_ρ, K_{3ρ/2})` at `x_o`.
pub fn delta(
    domain: &DomainSpec,
    x_o: &Point,
    rho: f64,
    params: &StructureParams,
    cfg: &CapacityConfig,
) -> Result<f64> {
    delta_detailed(domain, x_o, rho, params, cfg).map(|d| d.delta)
}

pub fn delta_detailed(
    domain: &DomainSpec,
    x_o: &Point,
    rho: f64,
    params: &StructureParams,
    cfg: &CapacityConfig,
) -> Result<DeltaValue> {
    cfg.validate()?;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::invalid(format!("rho must be positive, got {rho}")));
    }
    if x_o.dim() != domain.dim() {
        return Err(Error::invalid("x_o and domain dimensions differ"));
    }
    let h = rho / cfg.cells_per_rho as f64;
    let inner = Cube::new(x_o.clone(), rho)?;
    let outer = Cube::new(x_o.clone(), 1.5 * rho)?;

    let obstacle = rasterize_obstacle(domain, &inner, h)?;
    let mut full = obstacle.clone();
    full.values.iter_mut().for_each(|v| *v = true);

    let solve = |field: IndicatorField| {
        solve_condenser(&CondenserProblem { obstacle: field, outer: outer.clone(), p: params.p, solver: cfg.solver })
    };
    let full_cap = solve(full)?;
    if !(full_cap.value > 1e-300) {
        return Err(Error::VanishingDenominator(full_cap.value));
    }
    let obst_cap = if obstacle.is_empty() {
        CapacityValue { value: 0.0, energy_history: vec![0.0], grid_h: h, iterations: 0 }
    } else if obstacle.count() == obstacle.values.len() {
        full_cap.clone()
    } else {
        solve(obstacle)?
    };

    let mut ratio = obst_cap.value / full_cap.value;
    if ratio > 1.0 {
        if ratio - 1.0 < 1e-8 {
            ratio = 1.0;
        } else {
            return Err(Error::invalid(format!("relative capacity {ratio} exceeds 1")));
        }
    }
    Ok(DeltaValue {
        rho,
        delta: ratio.max(0.0),
        cap_obstacle: obst_cap.value,
        cap_full: full_cap.value,
        iterations: obst_cap.iterations + full_cap.iterations,
    })
}

/// `γ_p(K, Q) = ∫ cap_p(K_τ, Ω) dτ` by the composite trapezoid rule over
/// uniformly spaced slices.
pub fn parabolic_capacity(slices: &[(f64, IndicatorField)], outer: &Cube, p: f64, cfg: &SolverConfig) -> Result<f64> {
    let Some(first) = slices.first() else {
        return Err(Error::invalid("parabolic capacity needs at least one time slice"));
    };
    if slices.len() == 1 {
        return Ok(0.0);
    }
    let last = slices[slices.len() - 1].0;
    let dt = (last - first.0) / (slices.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::invalid("time slices must be strictly increasing"));
    }
    for (k, w) in slices.windows(2).enumerate() {
        if ((w[1].0 - w[0].0) - dt).abs() > 1e-9 * dt {
            return Err(Error::invalid(format!("time slices are not uniformly spaced at slice {}", k + 1)));
        }
    }
    let caps = exec::map(slices, |(_, field)| {
        solve_condenser(&CondenserProblem { obstacle: field.clone(), outer: outer.clone(), p, solver: *cfg })
            .map(|c| c.value)
    });
    let caps = caps.into_iter().collect::<Result<Vec<f64>>>()?;
    let last_idx = caps.len() - 1;
    let interior: f64 = caps[1..last_idx].iter().sum();
    Ok(dt * (0.5 * caps[0] + interior + 0.5 * caps[last_idx]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainKind, DomainRecord};

    fn interval_problem(rho: f64, m: usize, p: f64) -> CondenserProblem {
        let h = rho / m as f64;
        let inner = Cube::new(Point::origin(1), rho).unwrap();
        let lattice = Lattice::over(&inner, h).unwrap();
        let values = vec![true; lattice.len()];
        CondenserProblem {
            obstacle: IndicatorField { lattice, values },
            outer: Cube::new(Point::origin(1), 2.0 * rho).unwrap(),
            p,
            solver: SolverConfig::default(),
        }
    }

    #[test]
    fn one_dimensional_condenser_oracle() {
        // linear ramps of slope 1/ρ on both gaps: energy 2 ρ |1/ρ|^p
        for &p in &[2.5, 3.0, 4.0] {
            for &rho in &[1.0, 0.25] {
                let cap = solve_condenser(&interval_problem(rho, 16, p)).unwrap();
                let exact = 2.0 * rho.powf(1.0 - p);
                assert!((cap.value - exact).abs() < 1e-8 * exact, "p={p} rho={rho}: {}", cap.value);
            }
        }
    }

    #[test]
    fn empty_obstacle_has_zero_capacity() {
        let mut pb = interval_problem(1.0, 8, 3.0);
        pb.obstacle.values.iter_mut().for_each(|v| *v = false);
        assert_eq!(solve_condenser(&pb).unwrap().value, 0.0);
    }

    #[test]
    fn plates_must_be_disjoint() {
        let mut pb = interval_problem(1.0, 8, 3.0);
        pb.outer = Cube::new(Point::origin(1), 1.0).unwrap();
        assert!(matches!(solve_condenser(&pb), Err(Error::PlatesTouch { .. })));
    }

    #[test]
    fn potential_stays_in_unit_range_and_energy_decreases() {
        let inner = Cube::new(Point::origin(2), 0.5).unwrap();
        let lattice = Lattice::over(&inner, 1.0 / 16.0).unwrap();
        // a plus-shaped obstacle
        let values = (0..lattice.len())
            .map(|i| {
                let o = lattice.offset(i);
                o[0] == 0 || o[1] == 0
            })
            .collect();
        let pb = CondenserProblem {
            obstacle: IndicatorField { lattice, values },
            outer: Cube::new(Point::origin(2), 1.0).unwrap(),
            p: 3.0,
            solver: SolverConfig::default(),
        };
        let sol = solve_condenser_full(&pb).unwrap();
        let max = sol.potential.iter().cloned().fold(f64::MIN, f64::max);
        let min = sol.potential.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max <= 1.0 + 1e-10 && min >= -1e-10);
        let hist = &sol.capacity.energy_history;
        assert!(hist.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn delta_extremes() {
        let params = StructureParams::new(3.0, 2).unwrap();
        let cfg = CapacityConfig { cells_per_rho: 8, ..Default::default() };
        let full = DomainSpec::new(DomainKind::FullSpace, Point::origin(2)).unwrap();
        assert_eq!(delta(&full, &Point::origin(2), 0.5, &params, &cfg).unwrap(), 0.0);

        let covered = DomainSpec::try_from(DomainRecord {
            kind: "exterior_cube".into(),
            params: vec![0.0, 0.0, 4.0],
            anchor: vec![4.0, 0.0],
        })
        .unwrap();
        let d = delta(&covered, &Point::new(&[1.0, 0.0]), 0.5, &params, &cfg).unwrap();
        assert!((d - 1.0).abs() < 1e-10);
    }

    #[test]
    fn delta_rejects_bad_resolution() {
        let params = StructureParams::new(3.0, 1).unwrap();
        let half = DomainSpec::new(DomainKind::HalfSpace, Point::origin(1)).unwrap();
        let cfg = CapacityConfig { cells_per_rho: 6, ..Default::default() };
        assert!(delta(&half, &Point::origin(1), 1.0, &params, &cfg).is_err());
    }

    #[test]
    fn half_line_delta_in_1d() {
        // K_ρ \ E = [0, ρ] in K_{3ρ/2}: ramps over ρ/2 on each side
        // numerator: 2 ramps of length ρ/2 -> 2 (ρ/2)^{1-p}; same as the full cube.
        // full: [−ρ, ρ] with gaps ρ/2 -> 2 (ρ/2)^{1-p}
        // obstacle [0, ρ]: left gap 3ρ/2, right gap ρ/2
        let params = StructureParams::new(3.0, 1).unwrap();
        let cfg = CapacityConfig { cells_per_rho: 8, ..Default::default() };
        let half = DomainSpec::new(DomainKind::HalfSpace, Point::origin(1)).unwrap();
        let d = delta(&half, &Point::origin(1), 1.0, &params, &cfg).unwrap();
        let p = 3.0;
        let num = 1.5f64.powf(1.0 - p) + 0.5f64.powf(1.0 - p);
        let den = 2.0 * 0.5f64.powf(1.0 - p);
        assert!((d - num / den).abs() < 1e-8);
    }

    #[test]
    fn parabolic_capacity_of_constant_slices() {
        let pb = interval_problem(0.5, 8, 3.0);
        let elliptic = solve_condenser(&pb).unwrap().value;
        let slices: Vec<(f64, IndicatorField)> =
            (0..=10).map(|k| (0.2 + 0.03 * k as f64, pb.obstacle.clone())).collect();
        let g = parabolic_capacity(&slices, &pb.outer, 3.0, &pb.solver).unwrap();
        assert!((g - 0.3 * elliptic).abs() < 1e-12 * elliptic);
        assert!((g - 0.3 * 2.0 * 0.5f64.powi(-2)).abs() < 1e-7);

        let empty: Vec<(f64, IndicatorField)> = slices
            .iter()
            .map(|(t, f)| {
                let mut f = f.clone();
                f.values.iter_mut().for_each(|v| *v = false);
                (*t, f)
            })
            .collect();
        assert_eq!(parabolic_capacity(&empty, &pb.outer, 3.0, &pb.solver).unwrap(), 0.0);
        assert!(parabolic_capacity(&[], &pb.outer, 3.0, &pb.solver).is_err());
    }
}
