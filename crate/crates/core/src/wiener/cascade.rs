//! Subsequence selection, the oscillation cascade and the decay envelope.

use serde::{Deserialize, Serialize};

use super::{choose_c_bar, wiener_integral, wiener_sum, CapacityProfile};
use crate::{Error, Result, StructureParams};

/// Relative slack allowed when checking inequalities that hold exactly in
/// real arithmetic.
const CHECK_TOL: f64 = 1e-12;

fn le(a: f64, b: f64) -> bool {
    a <= b + CHECK_TOL * a.abs().max(b.abs())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subsequence {
    pub indices: Vec<usize>,
    /// Set to the last selected index when no successor exists within the
    /// profile although deeper radii remain.
    pub truncated_after: Option<usize>,
}

/// `i_0 = 0`; `i_{j+1}` is the smallest `i > i_j` with
/// `A_i / A_{i_j} > 2^{-(i - i_j)}`.
pub fn build_subsequence(profile: &CapacityProfile) -> Result<Subsequence> {
    let amps = profile.amplitudes();
    if amps.is_empty() {
        return Err(Error::invalid("empty profile"));
    }
    if let Some(index) = amps.iter().position(|&a| !(a > 0.0)) {
        return Err(Error::ZeroAmplitude { index });
    }
    let mut indices = vec![0];
    let mut cur = 0;
    loop {
        if cur + 1 >= amps.len() {
            return Ok(Subsequence { indices, truncated_after: None });
        }
        let next = (cur + 1..amps.len()).find(|&i| amps[i] / amps[cur] > 0.5f64.powi((i - cur) as i32));
        match next {
            Some(i) => {
                indices.push(i);
                cur = i;
            }
            None => return Ok(Subsequence { indices, truncated_after: Some(cur) }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CascadeBranch {
    /// `μ_o^{2-p} R_o^p ≤ R_o^{p-ε}`: the induction runs.
    Induction,
    /// The opposite case: `μ_o < R_o^{ε/(p-2)}` and the tail term is the bound.
    PowerLaw,
}

/// `K_{half_edge}(x_o) × (t_o - time_depth, t_o]`, built from level `source`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub source: usize,
    pub half_edge: f64,
    pub time_depth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeStep {
    pub j: usize,
    pub i: usize,
    pub rho: f64,
    pub amplitude: f64,
    pub mu: f64,
    pub theta_bar: f64,
    /// Nesting inequality between this level and the next; `None` on the last.
    pub nesting_ok: Option<bool>,
    /// Prefix bound `Σ_{i<i_{j+1}} A_i ≤ 2 Σ_{l≤j} A_{i_l}`; `None` on the last.
    pub sub_bound_ok: Option<bool>,
    /// `μ_{i_{j+1}} ≤ μ_o e^{-Σ_{l≤j} A_{i_l}/γ₂} ≤ μ_o e^{-Σ_{i<i_{j+1}} A_i/(2γ₂)}`.
    pub chain_ok: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub rho: f64,
    pub wiener_sum: f64,
    pub envelope: f64,
    /// The power-law tail is at least the exponential term.
    pub tail_dominates: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeReport {
    pub branch: CascadeBranch,
    pub lambda: u32,
    /// `c̄` from the selection rule; the profile's own ratio may be smaller.
    pub c_bar: f64,
    pub profile_c_bar: f64,
    pub mu_o: f64,
    pub epsilon: f64,
    pub subsequence: Vec<usize>,
    pub truncated_after: Option<usize>,
    pub mu_seq: Vec<f64>,
    /// `μ` after the last selected level.
    pub mu_next: f64,
    pub steps: Vec<CascadeStep>,
    pub cylinders: Vec<Cylinder>,
    pub power_law_bound: f64,
    pub all_nesting_ok: bool,
    pub all_sub_bound_ok: bool,
    pub all_chain_ok: bool,
    /// Decay envelope at each profile radius below `R_o`, with
    /// `ω_o = μ_o` and no boundary-datum term.
    pub envelope: Vec<EnvelopeRow>,
}

pub fn oscillation_cascade(
    mu_o: f64,
    epsilon: f64,
    profile: &CapacityProfile,
    params: &StructureParams,
) -> Result<CascadeReport> {
    if !(mu_o > 0.0 && mu_o.is_finite()) {
        return Err(Error::invalid(format!("mu_o must be positive, got {mu_o}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    profile.validate()?;
    if (profile.p - params.p).abs() > 0.0 {
        return Err(Error::invalid("profile and structure parameters disagree on p"));
    }
    let p = params.p;
    let gamma_2 = params.constants.gamma_2;
    let gamma_star = params.constants.gamma_star;
    let r_o = profile.r_o;
    if let Some(e) = profile.entries.iter().find(|e| e.amplitude >= gamma_2) {
        return Err(Error::AmplitudeTooLarge { index: e.i, value: e.amplitude, gamma_2 });
    }
    if !(gamma_2 > 1.0) {
        return Err(Error::invalid(format!("gamma_2 must exceed 1, got {gamma_2}")));
    }
    let (lambda, c_bar) = choose_c_bar(params);
    let power_law_bound = r_o.powf(epsilon / (p - 2.0));

    let env = EnvelopeParams::new(mu_o, 0.0, epsilon, r_o, params)?;
    let envelope = envelope_table(&env, profile)?;

    let in_req = mu_o.powf(2.0 - p) * r_o.powf(p) <= r_o.powf(p - epsilon);
    if !in_req {
        return Ok(CascadeReport {
            branch: CascadeBranch::PowerLaw,
            lambda,
            c_bar,
            profile_c_bar: profile.c_bar,
            mu_o,
            epsilon,
            subsequence: vec![],
            truncated_after: None,
            mu_seq: vec![mu_o],
            mu_next: mu_o,
            steps: vec![],
            cylinders: vec![],
            power_law_bound,
            all_nesting_ok: true,
            all_sub_bound_ok: true,
            all_chain_ok: true,
            envelope,
        });
    }

    let sub = build_subsequence(profile)?;
    let amps = profile.amplitudes();

    let mut mu_seq = Vec::with_capacity(sub.indices.len());
    let mut mu = mu_o;
    for &i in &sub.indices {
        mu_seq.push(mu);
        mu *= 1.0 - amps[i] / gamma_2;
    }
    let mu_next = mu;

    let intrinsic = |mu: f64, i: usize| (mu * amps[i]).powf(2.0 - p) * profile.rho(i).powf(p);
    let mut steps = Vec::with_capacity(sub.indices.len());
    let mut cylinders = Vec::with_capacity(sub.indices.len());
    let mut selected_sum = 0.0;
    for (j, &i) in sub.indices.iter().enumerate() {
        let mu_j = mu_seq[j];
        let rho = profile.rho(i);
        let theta_bar = (mu_j * amps[i]).powf(2.0 - p);
        cylinders.push(Cylinder { source: i, half_edge: 2.0 * rho, time_depth: gamma_star * theta_bar * rho.powf(p) });
        selected_sum += amps[i];

        let (nesting_ok, sub_bound_ok, chain_ok) = match sub.indices.get(j + 1) {
            Some(&next) => {
                let nest = le(3.0 * intrinsic(mu_seq[j + 1], next), intrinsic(mu_j, i));
                let prefix: f64 = amps[..next].iter().sum();
                let sub_ok = le(prefix, 2.0 * selected_sum);
                let mid = mu_o * (-selected_sum / gamma_2).exp();
                let outer = mu_o * (-prefix / (2.0 * gamma_2)).exp();
                let chain = le(mu_seq[j + 1], mid) && le(mid, outer);
                (Some(nest), Some(sub_ok), Some(chain))
            }
            None => (None, None, None),
        };
        steps.push(CascadeStep {
            j,
            i,
            rho,
            amplitude: amps[i],
            mu: mu_j,
            theta_bar,
            nesting_ok,
            sub_bound_ok,
            chain_ok,
        });
    }
    let all = |f: fn(&CascadeStep) -> Option<bool>| steps.iter().all(|s| f(s).unwrap_or(true));
    let all_nesting_ok = all(|s| s.nesting_ok);
    let all_sub_bound_ok = all(|s| s.sub_bound_ok);
    let all_chain_ok = all(|s| s.chain_ok);

    Ok(CascadeReport {
        branch: CascadeBranch::Induction,
        lambda,
        c_bar,
        profile_c_bar: profile.c_bar,
        mu_o,
        epsilon,
        subsequence: sub.indices,
        truncated_after: sub.truncated_after,
        mu_seq,
        mu_next,
        steps,
        cylinders,
        power_law_bound,
        all_nesting_ok,
        all_sub_bound_ok,
        all_chain_ok,
        envelope,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeParams {
    pub omega_o: f64,
    pub osc_g: f64,
    pub epsilon: f64,
    pub r_o: f64,
    pub gamma: f64,
    pub bar_gamma: f64,
}

impl EnvelopeParams {
    pub fn new(omega_o: f64, osc_g: f64, epsilon: f64, r_o: f64, params: &StructureParams) -> Result<Self> {
        let env = EnvelopeParams {
            omega_o,
            osc_g,
            epsilon,
            r_o,
            gamma: params.constants.gamma,
            bar_gamma: params.constants.bar_gamma,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_o > 0.0) || !(self.osc_g >= 0.0) || !(self.r_o > 0.0) {
            return Err(Error::invalid("envelope needs omega_o > 0, osc_g >= 0 and R_o > 0"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(self.gamma > 0.0) || !(self.bar_gamma >= 0.0) {
            return Err(Error::invalid("envelope needs gamma > 0 and bar_gamma >= 0"));
        }
        Ok(())
    }

    fn tail(&self, p: f64) -> f64 {
        self.bar_gamma * self.r_o.powf(self.epsilon / (p - 2.0))
    }
}

/// `ω_o exp(-γ W(ρ)) + osc_g + γ̄ R_o^{ε/(p-2)}`, `W(ρ) = ∫_ρ^{R_o} A(s) ds/s`.
pub fn decay_envelope(env: &EnvelopeParams, profile: &CapacityProfile, rho: f64) -> Result<f64> {
    env.validate()?;
    if (env.r_o - profile.r_o).abs() > 1e-12 * profile.r_o {
        return Err(Error::invalid("envelope and profile disagree on R_o"));
    }
    if !(rho > 0.0 && rho < env.r_o) {
        return Err(Error::invalid(format!("rho must lie in (0, R_o), got {rho}")));
    }
    let w = wiener_integral(profile, rho)?;
    Ok(env.omega_o * (-env.gamma * w).exp() + env.osc_g + env.tail(profile.p))
}

/// Envelope at `ρ_1, …, ρ_depth`.
pub fn envelope_table(env: &EnvelopeParams, profile: &CapacityProfile) -> Result<Vec<EnvelopeRow>> {
    let tail = env.tail(profile.p);
    (1..=profile.depth())
        .map(|k| {
            let rho = profile.rho(k);
            let envelope = decay_envelope(env, profile, rho)?;
            let w = wiener_sum(profile, 0, k - 1);
            Ok(EnvelopeRow {
                rho,
                wiener_sum: w,
                envelope,
                tail_dominates: tail >= env.omega_o * (-env.gamma * w).exp(),
            })
        })
        .collect()
}

/// `α = γ γ_o^{1/(p-1)}`, the exponent of the envelope for a constant
/// density `δ ≡ γ_o`.
pub fn holder_exponent(gamma_o: f64, params: &StructureParams) -> Result<f64> {
    if !(gamma_o > 0.0 && gamma_o <= 1.0) {
        return Err(Error::invalid(format!("gamma_o must lie in (0, 1], got {gamma_o}")));
    }
    Ok(params.constants.gamma * gamma_o.powf(1.0 / (params.p - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params3() -> StructureParams {
        StructureParams::new(3.0, 2).unwrap()
    }

    #[test]
    fn subsequence_hand_walks() {
        let cst = CapacityProfile::from_amplitudes(1.0, 0.25, 3.0, &[0.7; 5]).unwrap();
        let s = build_subsequence(&cst).unwrap();
        assert_eq!(s.indices, vec![0, 1, 2, 3, 4]);
        assert_eq!(s.truncated_after, None);

        let amps: Vec<f64> = (0..6).map(|i| 0.5f64.powi(i)).collect();
        let geo = CapacityProfile::from_amplitudes(1.0, 0.25, 3.0, &amps).unwrap();
        let s = build_subsequence(&geo).unwrap();
        assert_eq!(s.indices, vec![0]);
        assert_eq!(s.truncated_after, Some(0));

        let dip = CapacityProfile::from_amplitudes(1.0, 0.25, 3.0, &[1.0, 0.1, 1.0, 1.0]).unwrap();
        assert_eq!(build_subsequence(&dip).unwrap().indices, vec![0, 2, 3]);

        let zero = CapacityProfile::from_amplitudes(1.0, 0.25, 3.0, &[1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(build_subsequence(&zero), Err(Error::ZeroAmplitude { index: 1 })));
    }

    #[test]
    fn halving_cascade_for_full_density() {
        let prof = CapacityProfile::from_deltas(1.0, 0.25, 3.0, &[1.0; 6]).unwrap();
        let rep = oscillation_cascade(1.0, 0.5, &prof, &params3()).unwrap();
        assert_eq!(rep.branch, CascadeBranch::Induction);
        for (j, mu) in rep.mu_seq.iter().enumerate() {
            assert_eq!(*mu, 0.5f64.powi(j as i32));
        }
        // θ̄_o = 1, γ_* = 2
        assert_eq!(rep.cylinders[0].time_depth, 2.0);
        assert_eq!(rep.cylinders[0].half_edge, 2.0);
        assert!(rep.all_nesting_ok && rep.all_sub_bound_ok && rep.all_chain_ok);
    }

    #[test]
    fn power_law_branch() {
        // μ_o^{-1} R_o^3 > R_o^{2.5} when μ_o < R_o^{1/2}
        let prof = CapacityProfile::from_deltas(0.25, 0.25, 3.0, &[1.0; 3]).unwrap();
        let rep = oscillation_cascade(0.1, 0.5, &prof, &params3()).unwrap();
        assert_eq!(rep.branch, CascadeBranch::PowerLaw);
        assert!(rep.mu_o < rep.power_law_bound);
    }

    #[test]
    fn amplitude_bound_is_enforced() {
        let mut params = params3();
        params.constants.gamma_2 = 0.9;
        params.derived = false;
        let prof = CapacityProfile::from_deltas(1.0, 0.25, 3.0, &[1.0; 3]).unwrap();
        assert!(matches!(oscillation_cascade(1.0, 0.5, &prof, &params), Err(Error::AmplitudeTooLarge { .. })));
    }

    #[test]
    fn envelope_limits_and_monotonicity() {
        let params = params3();
        let prof = CapacityProfile::from_deltas(1.0, 0.25, 3.0, &[0.3, 0.6, 0.1, 0.9]).unwrap();
        let env = EnvelopeParams::new(2.0, 0.1, 0.5, 1.0, &params).unwrap();
        let near = decay_envelope(&env, &prof, 1.0 - 1e-13).unwrap();
        assert!((near - (2.0 + 0.1 + 1.0)).abs() < 1e-9);
        let mut last = f64::INFINITY;
        for k in 1..200 {
            let rho = (1.0 - k as f64 / 200.0) * (1.0 - 0.25f64.powi(4)) + 0.25f64.powi(4);
            let v = decay_envelope(&env, &prof, rho.min(1.0 - 1e-9)).unwrap();
            assert!(v <= last);
            last = v;
        }
        assert!(decay_envelope(&env, &prof, 1.0).is_err());
    }

    #[test]
    fn holder_consistency() {
        let mut params = params3();
        params.constants.gamma = 0.5;
        assert_eq!(holder_exponent(1.0, &params).unwrap(), 0.5);
        assert!(holder_exponent(0.2, &params).unwrap() < holder_exponent(0.3, &params).unwrap());

        let g: f64 = 0.4;
        let prof = CapacityProfile::from_deltas(1.0, 0.25, 3.0, &[g; 5]).unwrap();
        let env = EnvelopeParams::new(1.5, 0.2, 0.5, 1.0, &params).unwrap();
        let alpha = holder_exponent(g, &params).unwrap();
        let v = decay_envelope(&env, &prof, 0.5).unwrap();
        let expect = 1.5 * 2f64.powf(-alpha) + 0.2 + 1.0;
        assert!((v - expect).abs() < 1e-12);
    }
}
