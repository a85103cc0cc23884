//! Capacity profiles on the geometric radii `ρ_i = c̄^i R_o`, the discrete
//! Wiener sum, the choice of `(R_o, ε)` and of `c̄`, and the oscillation
//! cascade with its decay envelope.

mod cascade;
pub mod synthetic;

use serde::{Deserialize, Serialize};

use crate::capacity::{self, CapacityConfig};
use crate::geometry::{DomainSpec, Point};
use crate::{exec, Error, Result, StructureParams};

pub use cascade::{
    build_subsequence, decay_envelope, envelope_table, holder_exponent, oscillation_cascade, CascadeBranch,
    CascadeReport, CascadeStep, Cylinder, EnvelopeParams, EnvelopeRow, Subsequence,
};

/// Tolerance on `A_i = δ_i^{1/(p-1)}` consistency.
const AMPLITUDE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub i: usize,
    pub rho: f64,
    pub delta: f64,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityProfile {
    pub r_o: f64,
    pub c_bar: f64,
    pub p: f64,
    pub entries: Vec<ProfileEntry>,
}

impl CapacityProfile {
    pub fn from_deltas(r_o: f64, c_bar: f64, p: f64, deltas: &[f64]) -> Result<Self> {
        check_grid(r_o, c_bar, p)?;
        if deltas.is_empty() {
            return Err(Error::invalid("a profile needs at least one radius"));
        }
        let entries = deltas
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                if !(0.0..=1.0).contains(&d) {
                    return Err(Error::invalid(format!("delta_{i} = {d} lies outside [0, 1]")));
                }
                Ok(ProfileEntry { i, rho: r_o * c_bar.powi(i as i32), delta: d, amplitude: d.powf(1.0 / (p - 1.0)) })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CapacityProfile { r_o, c_bar, p, entries })
    }

    pub fn from_amplitudes(r_o: f64, c_bar: f64, p: f64, amplitudes: &[f64]) -> Result<Self> {
        let deltas: Vec<f64> = amplitudes.iter().map(|a| a.powf(p - 1.0)).collect();
        let mut prof = Self::from_deltas(r_o, c_bar, p, &deltas)?;
        for (e, &a) in prof.entries.iter_mut().zip(amplitudes) {
            e.amplitude = a;
        }
        prof.validate()?;
        Ok(prof)
    }

    pub fn depth(&self) -> usize {
        self.entries.len()
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.amplitude).collect()
    }

    pub fn rho(&self, i: usize) -> f64 {
        self.r_o * self.c_bar.powi(i as i32)
    }

    pub fn validate(&self) -> Result<()> {
        check_grid(self.r_o, self.c_bar, self.p)?;
        for (k, e) in self.entries.iter().enumerate() {
            if e.i != k {
                return Err(Error::invalid(format!("profile entries must be contiguous from 0; found {} at {k}", e.i)));
            }
            if k > 0 && !(e.rho < self.entries[k - 1].rho) {
                return Err(Error::invalid("profile radii must strictly decrease"));
            }
            if !(0.0..=1.0).contains(&e.delta) {
                return Err(Error::invalid(format!("delta_{k} = {} lies outside [0, 1]", e.delta)));
            }
            let a = e.delta.powf(1.0 / (self.p - 1.0));
            if (a - e.amplitude).abs() > AMPLITUDE_TOL * a.max(1.0) {
                return Err(Error::invalid(format!(
                    "A_{k} = {} disagrees with delta_{k}^(1/(p-1)) = {a}",
                    e.amplitude
                )));
            }
        }
        Ok(())
    }
}

fn check_grid(r_o: f64, c_bar: f64, p: f64) -> Result<()> {
    if !(r_o > 0.0 && r_o.is_finite()) {
        return Err(Error::invalid(format!("R_o must be positive, got {r_o}")));
    }
    if !(c_bar > 0.0 && c_bar < 1.0) {
        return Err(Error::invalid(format!("c_bar must lie in (0, 1), got {c_bar}")));
    }
    if !(p > 2.0) {
        return Err(Error::invalid(format!("p must exceed 2, got {p}")));
    }
    Ok(())
}

/// `δ(ρ_i)` at `ρ_i = c̄^i R_o`, `i = 0..depth`, with the radii solved
/// concurrently.
pub fn build_profile(
    domain: &DomainSpec,
    x_o: &Point,
    r_o: f64,
    c_bar: f64,
    depth: usize,
    params: &StructureParams,
    cfg: &CapacityConfig,
) -> Result<CapacityProfile> {
    if depth == 0 {
        return Err(Error::invalid("profile depth must be at least 1"));
    }
    if domain.is_full_space() {
        return Err(Error::invalid("full_space has no boundary point; a profile needs x_o on the boundary"));
    }
    check_grid(r_o, c_bar, params.p)?;
    let deltas = exec::map_range(depth, |i| capacity::delta(domain, x_o, r_o * c_bar.powi(i as i32), params, cfg));
    let deltas = deltas.into_iter().collect::<Result<Vec<_>>>()?;
    CapacityProfile::from_deltas(r_o, c_bar, params.p, &deltas)
}

/// `ln(1/c̄) Σ_{i=i_lo}^{i_hi} A_i`; zero for an empty range.
pub fn wiener_sum(profile: &CapacityProfile, i_lo: usize, i_hi: usize) -> f64 {
    if i_lo > i_hi || profile.entries.is_empty() {
        return 0.0;
    }
    let hi = i_hi.min(profile.depth() - 1);
    let s: f64 = profile.entries[i_lo.min(hi + 1)..=hi].iter().map(|e| e.amplitude).sum();
    (1.0 / profile.c_bar).ln() * s
}

/// `∫_ρ^{R_o} A(s) ds/s` with `A` constant equal to `A_i` on
/// `(ρ_{i+1}, ρ_i]`. Agrees with [`wiener_sum`]`(0, k-1)` at `ρ = ρ_k`.
pub fn wiener_integral(profile: &CapacityProfile, rho: f64) -> Result<f64> {
    let r_o = profile.r_o;
    if !(rho > 0.0 && rho <= r_o) {
        return Err(Error::invalid(format!("rho must lie in (0, R_o], got {rho}")));
    }
    let step = (1.0 / profile.c_bar).ln();
    let x = (r_o / rho).ln() / step;
    let depth = profile.depth();
    if x > depth as f64 * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "rho = {rho} lies below the deepest profile radius {}",
            profile.rho(depth)
        )));
    }
    let snapped = if (x - x.round()).abs() < 1e-12 { x.round() } else { x };
    let full = (snapped.floor() as usize).min(depth);
    let frac = (snapped - full as f64).max(0.0);
    let mut w = if full == 0 { 0.0 } else { wiener_sum(profile, 0, full - 1) };
    if full < depth && frac > 0.0 {
        w += profile.entries[full].amplitude * frac * step;
    }
    Ok(w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WienerVerdict {
    Diverging,
    Converging,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WienerDiagnostic {
    pub verdict: WienerVerdict,
    /// Least-squares slope of `ln A_i` against `i` over the window.
    pub tail_slope: f64,
    pub max_ratio: f64,
    pub window: (usize, usize),
    /// Always `"heuristic"`: divergence is not decidable from finitely many
    /// samples.
    pub kind: String,
}

/// Finite-sample classification of the tail of `Σ A_i`.
///
/// Over the last `window` entries (all of them if `window` exceeds the depth),
/// a tail slope of `ln A_i` no steeper than `-slope_tol` reads as diverging;
/// otherwise a ratio `A_{i+1}/A_i < 1` throughout reads as converging.
pub fn is_wiener_point(profile: &CapacityProfile, window: usize, slope_tol: f64) -> Result<WienerDiagnostic> {
    let depth = profile.depth();
    if depth < 4 {
        return Err(Error::invalid(format!("is_wiener_point needs depth >= 4, got {depth}")));
    }
    let w = window.clamp(4, depth);
    let lo = depth - w;
    let tail = &profile.entries[lo..];
    if tail.iter().any(|e| e.amplitude <= 0.0) {
        let max_ratio = 0.0;
        return Ok(WienerDiagnostic {
            verdict: WienerVerdict::Converging,
            tail_slope: f64::NEG_INFINITY,
            max_ratio,
            window: (lo, depth - 1),
            kind: "heuristic".into(),
        });
    }
    let n = tail.len() as f64;
    let mean_i = tail.iter().map(|e| e.i as f64).sum::<f64>() / n;
    let logs: Vec<f64> = tail.iter().map(|e| e.amplitude.ln()).collect();
    let mean_l = logs.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (e, l) in tail.iter().zip(&logs) {
        let dx = e.i as f64 - mean_i;
        sxy += dx * (l - mean_l);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    let max_ratio = tail.windows(2).map(|p| p[1].amplitude / p[0].amplitude).fold(0.0, f64::max);
    let verdict = if slope >= -slope_tol {
        WienerVerdict::Diverging
    } else if max_ratio < 1.0 {
        WienerVerdict::Converging
    } else {
        WienerVerdict::Inconclusive
    };
    Ok(WienerDiagnostic { verdict, tail_slope: slope, max_ratio, window: (lo, depth - 1), kind: "heuristic".into() })
}

/// Dyadic candidates `r_max · 2^{-k}`, `k = 0..levels`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusSearch {
    pub r_max: f64,
    pub levels: usize,
}

impl Default for RadiusSearch {
    fn default() -> Self {
        RadiusSearch { r_max: 1.0, levels: 12 }
    }
}

/// `3 γ_* δ^{(2-p)/(p-1)} R_o^{p-ε} ≤ t_o`. A vanishing `δ` makes the left
/// side infinite.
pub fn is_admissible(t_o: f64, delta: f64, r_o: f64, epsilon: f64, params: &StructureParams) -> bool {
    if !(delta > 0.0) {
        return false;
    }
    let p = params.p;
    let lhs = 3.0 * params.constants.gamma_star * delta.powf((2.0 - p) / (p - 1.0)) * r_o.powf(p - epsilon);
    lhs <= t_o
}

/// Largest admissible `R_o` on the dyadic search grid, with `δ` supplied by
/// the caller.
pub fn realize_with<F>(
    t_o: f64,
    params: &StructureParams,
    epsilon: f64,
    search: &RadiusSearch,
    mut delta_at: F,
) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(t_o > 0.0) {
        return Err(Error::invalid(format!("t_o must be positive, got {t_o}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(search.r_max > 0.0) || search.levels == 0 {
        return Err(Error::invalid("radius search needs r_max > 0 and at least one level"));
    }
    for k in 0..search.levels {
        let r = search.r_max * 0.5f64.powi(k as i32);
        let d = delta_at(r)?;
        if is_admissible(t_o, d, r, epsilon, params) {
            return Ok((r, epsilon));
        }
    }
    Err(Error::NoAdmissibleRadius { lo: search.r_max * 0.5f64.powi(search.levels as i32 - 1), hi: search.r_max, t_o })
}

#[allow(non_snake_case)]
pub fn realize_R_o_epsilon(
    t_o: f64,
    domain: &DomainSpec,
    x_o: &Point,
    params: &StructureParams,
    epsilon: f64,
    search: &RadiusSearch,
    cfg: &CapacityConfig,
) -> Result<(f64, f64)> {
    realize_with(t_o, params, epsilon, search, |r| capacity::delta(domain, x_o, r, params, cfg))
}

/// Smallest integer `λ ≥ 1` with
/// `2^{λp/(p-2) - 1} ≥ 3^{1/(p-2)} (1 - 1/γ₂)^{-1}`, and `c̄ = 2^{-λ}`.
pub fn choose_c_bar(params: &StructureParams) -> (u32, f64) {
    choose_c_bar_raw(params.p, params.constants.gamma_2)
}

/// Requires `p > 2` and `γ₂ > 1`.
pub fn choose_c_bar_raw(p: f64, gamma_2: f64) -> (u32, f64) {
    assert!(p > 2.0 && gamma_2 > 1.0, "choose_c_bar needs p > 2 and gamma_2 > 1");
    // in base-2 logs: λ p/(p-2) - 1 ≥ log2(3)/(p-2) - log2(1 - 1/γ₂)
    let rhs = 3f64.log2() / (p - 2.0) - (1.0 - 1.0 / gamma_2).log2();
    let guess = ((rhs + 1.0) * (p - 2.0) / p).ceil().max(1.0) as u32;
    let mut lambda = guess.saturating_sub(1).max(1);
    while !c_bar_condition(p, gamma_2, lambda) {
        lambda += 1;
    }
    (lambda, 0.5f64.powi(lambda as i32))
}

/// Whether `λ` satisfies the inequality defining `c̄`, compared in base-2
/// logarithms.
pub fn c_bar_condition(p: f64, gamma_2: f64, lambda: u32) -> bool {
    let lhs = lambda as f64 * p / (p - 2.0) - 1.0;
    let rhs = 3f64.log2() / (p - 2.0) - (1.0 - 1.0 / gamma_2).log2();
    lhs >= rhs - 1e-12 * rhs.abs().max(1.0)
}
