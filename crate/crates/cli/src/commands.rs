use pwiener::capacity::{self, DeltaValue};
use pwiener::geometry::{Cube, Lattice, Point};
use pwiener::pde::{self, BoundaryDatum, SpaceTimeField, SpaceTimeGrid};
use pwiener::probes::{self, FitReport, HarnackProbeResult, SpreadingResult};
use pwiener::wiener::{
    self, synthetic, CapacityProfile, CascadeBranch, CascadeReport, EnvelopeParams, EnvelopeRow, WienerDiagnostic,
};
use pwiener::{exec, StructureParams};
use serde::Serialize;

use crate::config::{ExperimentConfig, GeneratorConfig, LoadedConfig};
use crate::error::{at, CliError};
use crate::output::{comment_block, num, OutDir, Report, Timings};

pub struct Context<'a> {
    pub loaded: &'a LoadedConfig,
    pub seed: u64,
    pub out: OutDir,
}

impl Context<'_> {
    fn cfg(&self) -> &ExperimentConfig {
        &self.loaded.cfg
    }
}

pub fn capacity(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = ctx.cfg();
    let params = cfg.structure_params()?;
    let domain = cfg.domain()?;
    let x_o = cfg.x_o()?;
    let cap = cfg.capacity_config()?;
    if cfg.capacity.radii.is_empty() {
        return Err(CliError::Config("capacity.radii must list at least one radius".into()));
    }
    let mut timings = Timings::default();
    let values = timings.time("delta", || {
        exec::map(&cfg.capacity.radii, |&rho| capacity::delta_detailed(domain, &x_o, rho, &params, &cap))
    });
    let values: Vec<DeltaValue> = values.into_iter().collect::<Result<_, _>>().map_err(at("delta"))?;
    let rows: Vec<Vec<String>> = values
        .iter()
        .map(|v| vec![num(v.rho), num(v.cap_obstacle), num(v.cap_full), num(v.delta), v.iterations.to_string()])
        .collect();
    ctx.out.write_csv("capacity.csv", ctx.loaded, &["rho", "cap_obstacle", "cap_full", "delta", "iters"], &rows)?;
    ctx.out.write_json("capacity.json", &Report::new("capacity", ctx.loaded, ctx.seed, &values, timings))?;
    for v in &values {
        println!("rho = {:.6e}  delta = {:.6}", v.rho, v.delta);
    }
    Ok(())
}

#[derive(Serialize)]
struct ProfileResult {
    r_o: f64,
    epsilon: f64,
    r_o_source: &'static str,
    lambda: Option<u32>,
    c_bar: f64,
    profile: CapacityProfile,
    wiener_sums: Vec<f64>,
    diagnostic: Option<WienerDiagnostic>,
}

/// `R_o` (given or realized), `c̄` (given or chosen) and the profile.
fn profile_stage(
    cfg: &ExperimentConfig,
    params: &StructureParams,
    timings: &mut Timings,
) -> Result<ProfileResult, CliError> {
    let domain = cfg.domain()?;
    let x_o = cfg.x_o()?;
    let cap = cfg.capacity_config()?;
    let pc = &cfg.profile;
    let (r_o, epsilon, r_o_source) = match pc.r_o.value() {
        Some(r) => (r, pc.epsilon, "config"),
        None => {
            let t_o = cfg.t_o()?;
            let (r, e) = timings
                .time("realize", || {
                    wiener::realize_R_o_epsilon(t_o, domain, &x_o, params, pc.epsilon, &pc.search, &cap)
                })
                .map_err(at("realize_R_o_epsilon"))?;
            (r, e, "realized")
        }
    };
    let (lambda, c_bar) = match pc.c_bar.value() {
        Some(c) => (None, c),
        None => {
            let (l, c) = wiener::choose_c_bar(params);
            (Some(l), c)
        }
    };
    let profile = timings
        .time("build_profile", || wiener::build_profile(domain, &x_o, r_o, c_bar, pc.depth, params, &cap))
        .map_err(at("build_profile"))?;
    let wiener_sums = (0..profile.depth()).map(|k| wiener::wiener_sum(&profile, 0, k)).collect();
    let diagnostic = if profile.depth() >= 4 {
        Some(wiener::is_wiener_point(&profile, pc.window, pc.slope_tol).map_err(at("is_wiener_point"))?)
    } else {
        None
    };
    Ok(ProfileResult { r_o, epsilon, r_o_source, lambda, c_bar, profile, wiener_sums, diagnostic })
}

fn profile_rows(res: &ProfileResult) -> Vec<Vec<String>> {
    res.profile
        .entries
        .iter()
        .zip(&res.wiener_sums)
        .map(|(e, w)| vec![e.i.to_string(), num(e.rho), num(e.delta), num(e.amplitude), num(*w)])
        .collect()
}

const PROFILE_HEADER: [&str; 5] = ["i", "rho", "delta", "amplitude", "wiener_sum"];

pub fn delta_profile(ctx: &mut Context) -> Result<(), CliError> {
    let params = ctx.cfg().structure_params()?;
    let mut timings = Timings::default();
    let res = profile_stage(ctx.cfg(), &params, &mut timings)?;
    ctx.out.write_csv("profile.csv", ctx.loaded, &PROFILE_HEADER, &profile_rows(&res))?;
    if let Some(d) = &res.diagnostic {
        println!(
            "R_o = {}  c_bar = {}  verdict: {:?} (heuristic, tail slope {:.4})",
            res.r_o, res.c_bar, d.verdict, d.tail_slope
        );
    }
    ctx.out.write_json("profile.json", &Report::new("delta-profile", ctx.loaded, ctx.seed, &res, timings))?;
    Ok(())
}

pub fn cascade(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = ctx.cfg();
    let params = cfg.structure_params()?;
    let cs = cfg.cascade.as_ref().ok_or_else(|| CliError::Config("missing `cascade` in the configuration".into()))?;
    let c_bar = cs.c_bar.value().unwrap_or_else(|| wiener::choose_c_bar(&params).1);
    let p = params.p;
    let profile = match (&cs.deltas, &cs.generator) {
        (Some(d), _) => CapacityProfile::from_deltas(cs.r_o, c_bar, p, d),
        (None, Some(GeneratorConfig::Diverging { depth, delta_min })) => {
            synthetic::diverging_profile(ctx.seed, *depth, p, c_bar, *delta_min)
                .and_then(|q| CapacityProfile::from_deltas(cs.r_o, c_bar, p, &deltas_of(&q)))
        }
        (None, Some(GeneratorConfig::NoisyConstant { depth, level, noise })) => {
            synthetic::noisy_constant_profile(ctx.seed, *depth, p, c_bar, *level, *noise)
                .and_then(|q| CapacityProfile::from_amplitudes(cs.r_o, c_bar, p, &q.amplitudes()))
        }
        (None, None) => return Err(CliError::Config("cascade needs `deltas` or a `generator`".into())),
    }
    .map_err(at("profile"))?;
    let epsilon = cs.epsilon.unwrap_or(cfg.profile.epsilon);
    let mut timings = Timings::default();
    let report = timings
        .time("cascade", || wiener::oscillation_cascade(cs.mu_o, epsilon, &profile, &params))
        .map_err(at("cascade"))?;
    println!(
        "branch {:?}, subsequence {:?}, truncated_after {:?}, nesting {}, sub-bound {}, chain {}",
        report.branch,
        report.subsequence,
        report.truncated_after,
        report.all_nesting_ok,
        report.all_sub_bound_ok,
        report.all_chain_ok
    );
    #[derive(Serialize)]
    struct CascadeResult<'a> {
        profile: &'a CapacityProfile,
        report: &'a CascadeReport,
    }
    ctx.out.write_csv("envelope.csv", ctx.loaded, &ENVELOPE_HEADER, &envelope_rows(&report.envelope, report.branch))?;
    let result = CascadeResult { profile: &profile, report: &report };
    ctx.out.write_json("cascade.json", &Report::new("cascade", ctx.loaded, ctx.seed, result, timings))?;
    Ok(())
}

const ENVELOPE_HEADER: [&str; 5] = ["rho", "wiener_sum", "envelope", "tail_dominates", "power_law_branch"];

fn envelope_rows(rows: &[EnvelopeRow], branch: CascadeBranch) -> Vec<Vec<String>> {
    let power_law = u8::from(branch == CascadeBranch::PowerLaw).to_string();
    rows.iter()
        .map(|r| {
            vec![
                num(r.rho),
                num(r.wiener_sum),
                num(r.envelope),
                u8::from(r.tail_dominates).to_string(),
                power_law.clone(),
            ]
        })
        .collect()
}

fn deltas_of(p: &CapacityProfile) -> Vec<f64> {
    p.entries.iter().map(|e| e.delta).collect()
}

struct Solved {
    datum: BoundaryDatum,
    grid: SpaceTimeGrid,
    field: SpaceTimeField,
}

fn solve_stage(cfg: &ExperimentConfig, params: &StructureParams, timings: &mut Timings) -> Result<Solved, CliError> {
    let pde_cfg = cfg.pde()?;
    let domain = cfg.domain()?;
    let x_o = cfg.x_o()?;
    let datum = cfg.datum(&pde_cfg.datum)?;
    let scheme = cfg.scheme_config()?;
    let bbox = Cube::new(x_o, pde_cfg.half_edge).map_err(at("grid"))?;
    let lattice = Lattice::over(&bbox, pde_cfg.h).map_err(at("grid"))?;
    let times = pde::time_levels(&pde_cfg.time, &lattice, &datum, params.p).map_err(at("grid"))?;
    let grid = SpaceTimeGrid::new(domain, &bbox, pde_cfg.h, times).map_err(at("grid"))?;
    let field = timings.time("solve", || pde::solve(&grid, &datum, params.p, &scheme)).map_err(at("solve"))?;
    Ok(Solved { datum, grid, field })
}

#[derive(Serialize)]
struct FieldSummary {
    nodes_per_axis: usize,
    h: f64,
    times: Vec<f64>,
    iterations: Vec<usize>,
    min: f64,
    max: f64,
    snapshots: Vec<(usize, String)>,
}

fn write_snapshots(
    ctx: &mut Context,
    field: &SpaceTimeField,
    wanted: &[usize],
) -> Result<Vec<(usize, String)>, CliError> {
    let last = field.times.len() - 1;
    let indices: Vec<usize> = if wanted.is_empty() { vec![last] } else { wanted.to_vec() };
    let mut names = Vec::new();
    for k in indices {
        if k > last {
            return Err(CliError::Config(format!("snapshot index {k} exceeds the last time index {last}")));
        }
        let snap = field.snapshot(k);
        let stem = format!("snapshot_{k:05}");
        let mut bin = Vec::new();
        snap.write_binary(&mut bin).map_err(at("snapshot"))?;
        ctx.out.write(&format!("{stem}.bin"), &bin)?;
        let mut csv = comment_block(ctx.loaded, "#");
        snap.write_csv(&mut csv).map_err(at("snapshot"))?;
        ctx.out.write(&format!("{stem}.csv"), &csv)?;
        names.push((k, stem));
    }
    Ok(names)
}

fn summarize(field: &SpaceTimeField, snapshots: Vec<(usize, String)>) -> FieldSummary {
    let (min, max) =
        field.values.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    FieldSummary {
        nodes_per_axis: field.lattice.n(),
        h: field.lattice.h,
        times: field.times.clone(),
        iterations: field.iterations.clone(),
        min,
        max,
        snapshots,
    }
}

#[derive(Serialize)]
struct ProbeResults {
    harnack: Vec<HarnackProbeResult>,
    spreading: Vec<SpreadingResult>,
}

fn run_probes(cfg: &ExperimentConfig, field: &SpaceTimeField, p: f64) -> Result<ProbeResults, CliError> {
    let harnack = cfg
        .probes
        .harnack
        .iter()
        .map(|r| probes::weak_harnack_probe(field, &Point::new(&r.y), r.s, r.rho, r.c, p))
        .collect::<Result<_, _>>()
        .map_err(at("harnack_probe"))?;
    let spreading = cfg
        .probes
        .spreading
        .iter()
        .map(|r| probes::spreading_probe(field, &Point::new(&r.y), r.rho, r.t_bar, r.k, p, r.horizon))
        .collect::<Result<_, _>>()
        .map_err(at("spreading_probe"))?;
    Ok(ProbeResults { harnack, spreading })
}

pub fn solve(ctx: &mut Context) -> Result<(), CliError> {
    let params = ctx.cfg().structure_params()?;
    let mut timings = Timings::default();
    let solved = solve_stage(ctx.cfg(), &params, &mut timings)?;
    let wanted = ctx.cfg().pde()?.snapshots.clone();
    let snaps = write_snapshots(ctx, &solved.field, &wanted)?;
    let probes = run_probes(ctx.cfg(), &solved.field, params.p)?;
    #[derive(Serialize)]
    struct SolveResult {
        datum_modulus: String,
        field: FieldSummary,
        probes: ProbeResults,
    }
    let result = SolveResult { datum_modulus: solved.datum.modulus(), field: summarize(&solved.field, snaps), probes };
    println!(
        "solved {} time steps on {} nodes per axis; u in [{:.6}, {:.6}]",
        result.field.times.len() - 1,
        result.field.nodes_per_axis,
        result.field.min,
        result.field.max
    );
    ctx.out.write_json("solve.json", &Report::new("solve", ctx.loaded, ctx.seed, result, timings))?;
    Ok(())
}

/// `max - min` of `u` over nodes of `E` in `K_{half}(x_o) × [t_lo, t_hi]`.
fn region_osc(f: &SpaceTimeField, x_o: &Point, half: f64, t_lo: f64, t_hi: f64) -> Option<f64> {
    let nodes: Vec<usize> =
        f.lattice.nodes_in_cube(x_o.coords(), half).into_iter().filter(|&i| f.in_domain[i]).collect();
    let tol = 1e-12 * t_hi.abs().max(1.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (k, &t) in f.times.iter().enumerate() {
        if t >= t_lo.max(0.0) - tol && t <= t_hi + tol {
            for &i in &nodes {
                lo = lo.min(f.at(i, k));
                hi = hi.max(f.at(i, k));
            }
        }
    }
    (hi >= lo).then_some(hi - lo)
}

#[derive(Serialize)]
struct VerifyResult {
    profile: ProfileResult,
    cascade: CascadeReport,
    field: FieldSummary,
    q_ro_time_depth: f64,
    osc_g: f64,
    omega_o: f64,
    measurements: Vec<(f64, f64)>,
    envelope: Vec<EnvelopeRow>,
    regression: FitReport,
    probes: ProbeResults,
}

pub fn verify(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = ctx.cfg().clone();
    let params = cfg.structure_params()?;
    let t_o = cfg.t_o()?;
    let x_o = cfg.x_o()?;
    let mut timings = Timings::default();

    let profile = profile_stage(&cfg, &params, &mut timings)?;
    ctx.out.write_csv("profile.csv", ctx.loaded, &PROFILE_HEADER, &profile_rows(&profile))?;
    let r_o = profile.r_o;
    let eps = profile.epsilon;

    let mu_o = cfg.cascade.as_ref().map_or(1.0, |c| c.mu_o);
    let cascade = timings
        .time("cascade", || wiener::oscillation_cascade(mu_o, eps, &profile.profile, &params))
        .map_err(at("cascade"))?;
    ctx.out.write_json("cascade.json", &cascade)?;

    let solved = solve_stage(&cfg, &params, &mut timings)?;
    let t_end = *solved.field.times.last().unwrap();
    if t_o > t_end * (1.0 + 1e-12) {
        return Err(CliError::Config(format!("t_o = {t_o} lies beyond the last time level {t_end}")));
    }
    let snaps = write_snapshots(ctx, &solved.field, &cfg.pde()?.snapshots)?;

    let depth = pde::q_ro_time_depth(profile.profile.entries[0].delta, r_o, eps, &params);
    let osc_g = pde::osc_g_on_lateral(&solved.datum, &solved.grid, &x_o, t_o, r_o, depth, cfg.probes.time_samples);
    let omega_o = match cfg.probes.omega_o {
        Some(w) => w,
        None => region_osc(&solved.field, &x_o, 2.0 * r_o, t_o - depth, t_o).filter(|w| *w > 0.0).ok_or_else(|| {
            CliError::Numeric {
                stage: "oscillation",
                source: pwiener::Error::EmptyRegion(
                    "the solution does not oscillate on Q_{R_o}; set probes.omega_o".into(),
                ),
            }
        })?,
    };
    if cfg.probes.radii < 3 {
        return Err(CliError::Config("probes.radii must be at least 3 for the regression".into()));
    }
    let radii: Vec<f64> = (1..=cfg.probes.radii).map(|k| r_o * 0.5f64.powi(k as i32)).collect();
    let measurements = radii
        .iter()
        .map(|&rho| pde::oscillation(&solved.field, &x_o, t_o, rho, omega_o, params.p).map(|o| (rho, o)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(at("oscillation"))?;

    let env = EnvelopeParams::new(omega_o, osc_g, eps, r_o, &params).map_err(at("regression"))?;
    let regression = probes::envelope_regression(&measurements, &profile.profile, &env).map_err(at("regression"))?;
    let envelope = wiener::envelope_table(&env, &profile.profile).map_err(at("regression"))?;
    ctx.out.write_csv("envelope.csv", ctx.loaded, &ENVELOPE_HEADER, &envelope_rows(&envelope, cascade.branch))?;
    let plot_rows: Vec<Vec<String>> = regression
        .points
        .iter()
        .map(|q| {
            let log = q.log_osc.map_or("NaN".to_string(), num);
            vec![num(q.rho), num(q.osc), num(q.envelope), num(q.wiener_sum), log]
        })
        .collect();
    ctx.out.write_plot(
        "oscillation.dat",
        ctx.loaded,
        &["rho", "osc", "envelope", "wiener_sum", "log_osc"],
        &plot_rows,
    )?;

    let probes = run_probes(&cfg, &solved.field, params.p)?;
    println!(
        "R_o = {r_o}, omega_o = {omega_o:.6}, osc_g = {osc_g:.6}; regression slope {:.6}, correlation {}",
        regression.slope,
        regression.correlation.map_or("n/a".to_string(), |c| format!("{c:.6}"))
    );
    let result = VerifyResult {
        profile,
        cascade,
        field: summarize(&solved.field, snaps),
        q_ro_time_depth: depth,
        osc_g,
        omega_o,
        measurements,
        envelope,
        regression,
        probes,
    };
    ctx.out.write_json("report.json", &Report::new("verify", ctx.loaded, ctx.seed, result, timings))?;
    Ok(())
}
