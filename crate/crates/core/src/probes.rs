//! Measurement probes on computed fields: weak Harnack ratios, spreading
//! lower bounds, and a regression of measured oscillations against the
//! Wiener sum.
//!
//! Averages and infima are taken over lattice nodes of `E`, without
//! interpolation.

use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::pde::SpaceTimeField;
use crate::wiener::{decay_envelope, wiener_integral, CapacityProfile, EnvelopeParams};
use crate::{Error, Result};

fn level_of(field: &SpaceTimeField, t: f64, what: &str) -> Result<usize> {
    field.time_index(t).ok_or_else(|| Error::invalid(format!("{what} = {t} is not a time level of the field")))
}

fn domain_nodes(field: &SpaceTimeField, y: &Point, r: f64) -> Vec<usize> {
    field.lattice.nodes_in_cube(y.coords(), r).into_iter().filter(|&i| field.in_domain[i]).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnackProbeResult {
    pub y: Vec<f64>,
    pub s: f64,
    pub rho: f64,
    pub c: f64,
    pub t_final: f64,
    pub avg: f64,
    pub inf_later: f64,
    pub theta: f64,
    pub window: (f64, f64),
    pub window_levels: usize,
    /// `avg / inf_later`; absent when the infimum vanishes.
    pub ratio: Option<f64>,
    /// `θ = avg^{2-p}` was the smaller term.
    pub intrinsic_branch: bool,
}

/// Average of `u(·, s)` over `K_ρ(y)` against the infimum over `K_{4ρ}(y)`
/// on `[s + θρ^p/2, s + θρ^p]`, `θ = min{c^{2-p}(T-s)/ρ^p, avg^{2-p}}`.
pub fn weak_harnack_probe(
    field: &SpaceTimeField,
    y: &Point,
    s: f64,
    rho: f64,
    c: f64,
    p: f64,
) -> Result<HarnackProbeResult> {
    if !(rho > 0.0) || !(c > 0.0) || !(p > 2.0) {
        return Err(Error::invalid("Harnack probe needs rho > 0, c > 0 and p > 2"));
    }
    let ks = level_of(field, s, "s")?;
    let s = field.times[ks];
    let t_final = *field.times.last().unwrap();
    let cube = field.lattice.cube();
    let tol = 1e-9 * field.lattice.h;
    for (k, &yk) in y.coords().iter().enumerate() {
        let ck = cube.center.coords()[k];
        if (yk - ck).abs() + 4.0 * rho > cube.half_edge + tol {
            return Err(Error::invalid("K_{4 rho}(y) must lie within the grid"));
        }
    }
    let inner = domain_nodes(field, y, rho);
    let outer = domain_nodes(field, y, 4.0 * rho);
    if inner.is_empty() {
        return Err(Error::EmptyRegion("no nodes of E in K_rho(y)".into()));
    }

    let avg = inner.iter().map(|&i| field.values[ks][i]).sum::<f64>() / inner.len() as f64;
    let time_term = c.powf(2.0 - p) * (t_final - s) / rho.powf(p);
    let intrinsic = if avg > 0.0 { avg.powf(2.0 - p) } else { f64::INFINITY };
    let theta = time_term.min(intrinsic);
    let window = (s + 0.5 * theta * rho.powf(p), s + theta * rho.powf(p));
    let tol_t = 1e-12 * t_final.abs().max(1.0);
    let levels: Vec<usize> = (0..field.times.len())
        .filter(|&k| field.times[k] >= window.0 - tol_t && field.times[k] <= window.1 + tol_t)
        .collect();
    if levels.is_empty() {
        return Err(Error::EmptyRegion(format!("no time level in the probe window [{}, {}]", window.0, window.1)));
    }

    for &k in std::iter::once(&ks).chain(&levels) {
        for &i in &outer {
            let v = field.values[k][i];
            if v < 0.0 {
                return Err(Error::NegativeValue { node: i, time_index: k, value: v });
            }
        }
    }
    let inf_later =
        levels.iter().flat_map(|&k| outer.iter().map(move |&i| field.values[k][i])).fold(f64::INFINITY, f64::min);
    Ok(HarnackProbeResult {
        y: y.coords().to_vec(),
        s,
        rho,
        c,
        t_final,
        avg,
        inf_later,
        theta,
        window,
        window_levels: levels.len(),
        ratio: (inf_later > 0.0).then(|| avg / inf_later),
        intrinsic_branch: intrinsic <= time_term,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpreadingSample {
    pub t: f64,
    pub inf: f64,
    /// Largest `ν` for which the bound holds at this time; infinite when any
    /// `ν` works.
    pub nu_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpreadingResult {
    pub y: Vec<f64>,
    pub rho: f64,
    pub t_bar: f64,
    pub k: f64,
    pub holds: bool,
    /// Largest `ν ≤ 1` making the bound hold at every sample.
    pub fitted_nu: f64,
    /// Every sample allows any `ν`; `fitted_nu` is then the cap 1.
    pub saturated: bool,
    pub samples: Vec<SpreadingSample>,
}

/// Tests `inf_{K_ρ(y)} u(·,t) ≥ (k/2)(1 + (t - t̄)/(ν k^{2-p} (2ρ)^p))^{1/(2-p)}`
/// at the time levels after `t̄` (up to `t̄ + horizon` when given), given
/// `inf_{K_{2ρ}(y)} u(·, t̄) ≥ k`.
pub fn spreading_probe(
    field: &SpaceTimeField,
    y: &Point,
    rho: f64,
    t_bar: f64,
    k: f64,
    p: f64,
    horizon: Option<f64>,
) -> Result<SpreadingResult> {
    if !(rho > 0.0) || !(k > 0.0) || !(p > 2.0) {
        return Err(Error::invalid("spreading probe needs rho > 0, k > 0 and p > 2"));
    }
    let kb = level_of(field, t_bar, "t_bar")?;
    let t_bar = field.times[kb];
    let base = domain_nodes(field, y, 2.0 * rho);
    if base.is_empty() {
        return Err(Error::EmptyRegion("no nodes of E in K_{2 rho}(y)".into()));
    }
    if let Some(&node) = base.iter().find(|&&i| field.values[kb][i] < k) {
        return Err(Error::SpreadingHypothesis { node, value: field.values[kb][node], k });
    }
    let inner = domain_nodes(field, y, rho);
    let t_end = horizon.map_or(f64::INFINITY, |h| t_bar + h);
    let scale = k.powf(2.0 - p) * (2.0 * rho).powf(p);
    let samples: Vec<SpreadingSample> = (kb + 1..field.times.len())
        .filter(|&m| field.times[m] <= t_end)
        .map(|m| {
            let t = field.times[m];
            let inf = inner.iter().map(|&i| field.values[m][i]).fold(f64::INFINITY, f64::min);
            let q = 2.0 * inf / k;
            let nu_max = if q >= 1.0 {
                f64::INFINITY
            } else if q <= 0.0 {
                0.0
            } else {
                (t - t_bar) / (scale * (q.powf(2.0 - p) - 1.0))
            };
            SpreadingSample { t, inf, nu_max }
        })
        .collect();
    let bound = samples.iter().map(|s| s.nu_max).fold(f64::INFINITY, f64::min);
    let fitted_nu = bound.min(1.0);
    Ok(SpreadingResult {
        y: y.coords().to_vec(),
        rho,
        t_bar,
        k,
        holds: fitted_nu > 0.0,
        fitted_nu,
        saturated: bound.is_infinite(),
        samples,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub rho: f64,
    pub osc: f64,
    pub wiener_sum: f64,
    /// `ln(osc - floor)`; absent when the difference is not positive.
    pub log_osc: Option<f64>,
    pub envelope: f64,
    pub within_envelope: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub floor: f64,
    pub points: Vec<FitPoint>,
    pub dropped: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Pearson correlation; absent when either coordinate has no spread.
    pub correlation: Option<f64>,
    pub all_within_envelope: bool,
}

/// Least-squares fit of `ln(osc - osc_g)` against `W(ρ) = ∫_ρ^{R_o} A ds/s`.
pub fn envelope_regression(
    measurements: &[(f64, f64)],
    profile: &CapacityProfile,
    env: &EnvelopeParams,
) -> Result<FitReport> {
    if measurements.len() < 3 {
        return Err(Error::TooFewPoints(measurements.len()));
    }
    let floor = env.osc_g;
    let mut points = Vec::with_capacity(measurements.len());
    let mut dropped = Vec::new();
    for &(rho, osc) in measurements {
        let w = wiener_integral(profile, rho)?;
        let envelope = decay_envelope(env, profile, rho)?;
        let diff = osc - floor;
        let log_osc = (diff > 0.0).then(|| diff.ln());
        if log_osc.is_none() {
            dropped.push(rho);
        }
        points.push(FitPoint { rho, osc, wiener_sum: w, log_osc, envelope, within_envelope: osc <= envelope });
    }
    let used: Vec<(f64, f64)> = points.iter().filter_map(|q| q.log_osc.map(|l| (q.wiener_sum, l))).collect();
    if used.len() < 3 {
        return Err(Error::TooFewPoints(used.len()));
    }
    let n = used.len() as f64;
    let mx = used.iter().map(|q| q.0).sum::<f64>() / n;
    let my = used.iter().map(|q| q.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in &used {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if !(sxx > 0.0) {
        return Err(Error::invalid("all radii share one Wiener sum; the fit is undetermined"));
    }
    let flat = used.iter().all(|q| q.1 == used[0].1);
    let slope = if flat { 0.0 } else { sxy / sxx };
    let correlation = (!flat && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0));
    let all_within_envelope = points.iter().all(|q| q.within_envelope);
    Ok(FitReport { floor, points, dropped, slope, intercept: my - slope * mx, correlation, all_within_envelope })
}
