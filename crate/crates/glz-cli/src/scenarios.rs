//! Registered experiment scenarios. Each one emits tidy CSV panels plus a
//! per-scenario JSON manifest; grids are desk-scale and deterministic in
//! the seed.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use glz::ensemble::{
    average_area, average_probability, characteristic_b0, optimize_bstar, GapDistribution,
};
use glz::models::{ErrorModel, GlzParams, ImperfectionKind, PulseKind};
use glz::propagate::{propagate, transition_probability};
use glz::quad;
use glz::specfun::{avg_plz, p_infinity};

use crate::config::{self, validate, Config, RunContext};
use crate::output::{Emitter, ScenarioReport};

pub const REGISTRY: [&str; 11] = [
    "surface",
    "cc",
    "timedep",
    "dirac",
    "pstar-vs-sigma",
    "pstar-vs-mu",
    "area",
    "heatmap",
    "pulses",
    "sweeps",
    "identities",
];

pub fn run_scenario(
    name: &str,
    config_file: Option<&Path>,
    ctx: &RunContext,
) -> Result<ScenarioReport> {
    if !REGISTRY.contains(&name) {
        bail!(
            "unknown scenario `{name}`; registered: {}",
            REGISTRY.join(", ")
        );
    }
    let mut cfg = ctx.as_config();
    if let Some(path) = config_file {
        cfg = cfg.over(config::parse_file(path)?);
    }
    let cfg = cfg.over(defaults_for(name));
    ctx.ensure_writable()?;

    let mut em = Emitter::new(&ctx.out_root, name);
    let outcome = dispatch(name, &cfg, ctx, &mut em);
    match outcome {
        Ok(()) => em.finish(),
        Err(e) => {
            em.abort();
            Err(e).with_context(|| format!("scenario `{name}` failed (partial outputs removed)"))
        }
    }
}

fn dispatch(name: &str, cfg: &Config, ctx: &RunContext, em: &mut Emitter) -> Result<()> {
    match name {
        "surface" => surface(cfg, ctx, em),
        "cc" => cc(cfg, ctx, em),
        "timedep" => timedep(cfg, ctx, em),
        "dirac" => dirac(cfg, ctx, em),
        "pstar-vs-sigma" => pstar_vs_sigma(cfg, ctx, em),
        "pstar-vs-mu" => pstar_vs_mu(cfg, ctx, em),
        "area" => area(cfg, ctx, em),
        "heatmap" => heatmap(cfg, ctx, em),
        "pulses" => pulses(cfg, ctx, em),
        "sweeps" => sweeps(cfg, ctx, em),
        "identities" => identities(cfg, ctx, em),
        _ => unreachable!(),
    }
}

fn defaults_for(name: &str) -> Config {
    let mut c = Config::default();
    c.set("scenario", name);
    c.set("seed", "7");
    c.set("samples", "1000");
    match name {
        "surface" => {
            for (k, v) in [
                ("a_min", "0"),
                ("a_max", "3"),
                ("a_count", "31"),
                ("b_min", "0"),
                ("b_max", "8"),
                ("b_count", "41"),
            ] {
                c.set(k, v);
            }
            c.push("phi", "0");
            c.push("phi", "pi/2");
        }
        "cc" => {
            for (k, v) in [("a_min", "0.1"), ("a_max", "1.9"), ("a_count", "37")] {
                c.set(k, v);
            }
            c.push("phi", "0");
            c.push("phi", "pi/2");
        }
        "timedep" => {
            c.set("a", "0.5");
        }
        "dirac" => {
            for (k, v) in [
                ("a_min", "-3"),
                ("a_max", "3"),
                ("a_count", "121"),
                ("sigma_min", "0.05"),
                ("sigma_max", "3"),
                ("sigma_count", "50"),
            ] {
                c.set(k, v);
            }
            c.push("phi", "0");
            c.push("phi", "pi/4");
            c.push("phi", "pi/2");
        }
        "pstar-vs-sigma" => {
            c.push("mu", "0.5");
            c.push("mu", "1.0");
            c.set("sigma_count", "8");
            c.push("phi", "0");
            c.push("phi", "pi/2");
        }
        "pstar-vs-mu" => {
            for (k, v) in [("mu_min", "0.1"), ("mu_max", "1.9"), ("mu_count", "10")] {
                c.set(k, v);
            }
            c.push("phi", "0");
            c.push("phi", "pi/2");
        }
        "area" => {
            for (k, v) in [("mu_min", "0.2"), ("mu_max", "1.8"), ("mu_count", "8")] {
                c.set(k, v);
            }
            c.push("phi", "0");
            c.push("phi", "pi/2");
        }
        "heatmap" => {
            c.set("mu", "0.5");
            for (k, v) in [
                ("sigma_min", "0.02"),
                ("sigma_max", "0.1"),
                ("sigma_count", "6"),
                ("epsilon_min", "-0.2"),
                ("epsilon_max", "0.2"),
                ("epsilon_count", "9"),
            ] {
                c.set(k, v);
            }
            for k in ["1", "2", "3"] {
                c.push("error_kind", k);
            }
            c.push("phi", "0");
            c.push("phi", "pi/2");
        }
        "pulses" => {
            for p in ["L", "g", "s", "r", "t"] {
                c.push("pulse", p);
            }
            for (k, v) in [("mu_min", "0.2"), ("mu_max", "1.4"), ("mu_count", "6")] {
                c.set(k, v);
            }
            c.push("phi", "0");
            c.push("phi", "pi/2");
        }
        "sweeps" => {
            c.set("mu", "0.5");
            c.set("sigma", "0.1");
            for (k, v) in [("T_min", "4"), ("T_max", "40"), ("T_count", "8")] {
                c.set(k, v);
            }
            c.push("sweep", "Lin");
            c.push("sweep", "Tan");
            c.push("phi", "0");
            c.push("phi", "pi/2");
            c.set("b0_policy", "perT");
        }
        "identities" => {}
        _ => {}
    }
    c
}

/// Parallel map over grid cells in index order; `--serial` forces the
/// sequential path. Either way results come back in index order, so the
/// emitted files are identical.
fn map_cells<T, F>(n: usize, serial: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if serial {
        (0..n).map(f).collect()
    } else {
        (0..n).into_par_iter().map(f).collect()
    }
}

/// Echo of the complete effective config plus runtime settings; keys in
/// `overrides` replace the config-level values (per-panel slices).
fn echo_all(cfg: &Config, ctx: &RunContext, overrides: &[(&str, String)]) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = vec![
        ("version".into(), crate::output::version().to_string()),
        ("rtol".into(), crate::output::fmt_f64(ctx.integrator().rtol)),
        ("serial".into(), ctx.serial.to_string()),
    ];
    for (k, vals) in cfg.iter() {
        if overrides.iter().any(|(ok, _)| *ok == k) {
            continue;
        }
        for v in vals {
            out.push((k.to_string(), v.clone()));
        }
    }
    for (k, v) in overrides {
        out.push((k.to_string(), v.clone()));
    }
    out
}

fn fmt_row(vals: &[f64]) -> String {
    vals.iter()
        .map(|v| crate::output::fmt_f64(*v))
        .collect::<Vec<_>>()
        .join(",")
}

// ---------------------------------------------------------------- surface

fn surface(cfg: &Config, ctx: &RunContext, em: &mut Emitter) -> Result<()> {
    validate(
        cfg,
        &[
            "a_min", "a_max", "a_count", "b_min", "b_max", "b_count", "phi",
        ],
        &[
            "a_min", "a_max", "a_count", "b_min", "b_max", "b_count", "phi",
        ],
    )?;
    let a_axis = cfg.axis("a")?;
    let b_axis = cfg.axis("b")?;
    let phis = cfg.f64_list("phi")?;
    let tpl = ctx.template();

    for (pi_idx, &phi) in phis.iter().enumerate() {
        let cells: Vec<(f64, f64)> = a_axis
            .iter()
            .flat_map(|&a| b_axis.iter().map(move |&b| (a, b)))
            .collect();
        let probs = map_cells(cells.len(), ctx.serial, |k| {
            let (a, b) = cells[k];
            let p = tpl.params(a, b, phi).map_err(anyhow::Error::from)?;
            transition_probability(&p, &tpl.integrator).map_err(anyhow::Error::from)
        })?;
        let rows: Vec<String> = cells
            .iter()
            .zip(&probs)
            .map(|(&(a, b), &p)| fmt_row(&[a, b, p]))
            .collect();
        let echo = echo_all(cfg, ctx, &[("phi", crate::output::fmt_f64(phi))]);
        em.csv(&format!("surface_{pi_idx}.csv"), &echo, "a,b,P", &rows)?;
    }
    Ok(())
}

// --------------------------------------------------------------------- cc

fn cc(cfg: &Config, ctx: &RunContext, em: &mut Emitter) -> Result<()> {
    validate(
        cfg,
        &["a_min", "a_max", "a_count", "phi"],
        &["a_min", "a_max", "a_count", "phi"],
    )?;
    let a_axis = cfg.axis("a")?;
    let phis = cfg.f64_list("phi")?;
    let tpl = ctx.template();

    let cells: Vec<(f64, f64)> = phis
        .iter()
        .flat_map(|&phi| a_axis.iter().map(move |&a| (phi, a)))
        .collect();
    let points = map_cells(cells.len(), ctx.serial, |k| {
        let (phi, a) = cells[k];
        characteristic_b0(a, phi, &tpl).map_err(anyhow::Error::from)
    })?;
    let rows: Vec<String> = points
        .iter()
        .map(|cp| fmt_row(&[cp.angle, cp.gap, cp.b0, cp.residual]))
        .collect();
    em.csv(
        "cc.csv",
        &echo_all(cfg, ctx, &[]),
        "phi,a,b0,residual",
        &rows,
    )?;
    Ok(())
}

// ---------------------------------------------------------------- timedep

fn trajectory_rows(params: &GlzParams, ctx: &RunContext) -> Result<Vec<String>> {
    let rec = propagate(params, &ctx.integrator(), true)?;
    let samples = rec.samples.expect("recorded");
    // crossing-frame time coordinate: sqrt(T / lambda0) * lambda(u)
    let scale = (params.time / params.sweep.lambda0()).sqrt();
    Ok(samples
        .grid
        .iter()
        .zip(&samples.prob)
        .zip(&samples.norm_err)
        .map(|((&u, &p), &ne)| {
            let t = scale * params.sweep.eval(u).0;
            fmt_row(&[u, t, p, ne])
        })
        .collect())
}

fn params_echo(p: &GlzParams) -> Vec<(&'static str, String)> {
    vec![
        ("a", crate::output::fmt_f64(p.gap)),
        ("b", crate::output::fmt_f64(p.control)),
        ("phi", crate::output::fmt_f64(p.angle)),
        ("pulse", p.pulse.code().to_string()),
        ("T", crate::output::fmt_f64(p.time)),
        ("lambda0", crate::output::fmt_f64(p.sweep.lambda0())),
    ]
}

fn timedep(cfg: &Config, ctx: &RunContext, em: &mut Emitter) -> Result<()> {
    validate(cfg, &["a"], &["a"])?;
    let a = cfg.f64_scalar("a")?;
    let tpl = ctx.template();

    let b0_flat = characteristic_b0(a, 0.0, &tpl)?.b0;
    let curves = [
        ("timedep_flat.csv", a, b0_flat, 0.0),
        ("timedep_cd.csv", a, 1.0 / a, FRAC_PI_2),
        ("timedep_generic.csv", 0.7, 2.0, FRAC_PI_2),
    ];
    for (file, gap, b, phi) in curves {
        let params = tpl.params(gap, b, phi)?;
        let rows = trajectory_rows(&params, ctx)?;
        let echo = echo_all(cfg, ctx, &params_echo(&params));
        em.csv(file, &echo, "u,t,P,norm_error", &rows)?;
    }
    Ok(())
}

// ------------------------------------------------------------------ dirac

/// Quadrature average of the closed-form kick probability over a zero-mean
/// Gaussian gap distribution.
pub fn kick_ensemble_mean(phi: f64, sigma: f64) -> f64 {
    let norm = 1.0 / (2.0 * PI * sigma * sigma).sqrt();
    quad::integrate(
        |a| norm * (-a * a / (2.0 * sigma * sigma)).exp() * p_infinity(a, phi),
        -10.0 * sigma,
        10.0 * sigma,
        1e-10,
    )
}

/// Width at which the standard-CD kick average meets the uncontrolled
/// crossing average, by bisection.
pub fn kick_crossover_sigma() -> Result<f64> {
    let g = |s: f64| kick_ensemble_mean(FRAC_PI_2, s) - avg_plz(0.0, s).unwrap();
    let (mut lo, mut hi) = (0.4, 1.5);
    if !(g(lo) < 0.0 && g(hi) > 0.0) {
        bail!("crossover not bracketed in [0.4, 1.5]");
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn dirac(cfg: &Config, ctx: &RunContext, em: &mut Emitter) -> Result<()> {
    let keys = [
        "a_min",
        "a_max",
        "a_count",
        "sigma_min",
        "sigma_max",
        "sigma_count",
        "phi",
    ];
    validate(cfg, &keys, &keys)?;
    let a_axis = cfg.axis("a")?;
    let sigma_axis = cfg.axis("sigma")?;
    let phis = cfg.f64_list("phi")?;

    let mut rows = Vec::new();
    for &phi in &phis {
        for &a in &a_axis {
            rows.push(fmt_row(&[phi, a, p_infinity(a, phi)]));
        }
    }
    em.csv(
        "dirac_curves.csv",
        &echo_all(cfg, ctx, &[]),
        "phi,a,P_inf",
        &rows,
    )?;

    let mut rows = Vec::new();
    for &phi in &phis {
        for &sigma in &sigma_axis {
            let avg = kick_ensemble_mean(phi, sigma);
            let reference = avg_plz(0.0, sigma)?;
            rows.push(fmt_row(&[phi, sigma, avg, reference]));
        }
    }
    em.csv(
        "dirac_averages.csv",
        &echo_all(cfg, ctx, &[]),
        "phi,sigma,avg_P_inf,avg_P_uncontrolled",
        &rows,
    )?;

    let sigma_star = kick_crossover_sigma()?;
    em.csv(
        "dirac_summary.csv",
        &echo_all(cfg, ctx, &[]),
        "quantity,value",
        &[format!("sigma_star_cd,{sigma_star}")],
    )?;
    Ok(())
}

// -------------------------------------------------------- pstar scenarios

fn pstar_vs_sigma(cfg: &Config, ctx: &RunContext, em: &mut Emitter) -> Result<()> {
    validate(
        cfg,
        &["mu", "sigma_count", "phi"],
        &["mu", "sigma_count", "phi"],
    )?;
    let mus = cfg.f64_list("mu")?;
    let count = cfg.usize_scalar("sigma_count")?;
    let phis = cfg.f64_list("phi")?;
    let n = cfg.usize_scalar("samples")?;
    let seed = cfg.u64_scalar("seed")?;
    let tpl = ctx.template();

    let mut cells = Vec::new();
    for &mu in &mus {
        let sigma_max = mu / 5.0;
        for &phi in &phis {
            for k in 1..=count {
                cells.push((mu, sigma_max * k as f64 / count as f64, phi));
            }
        }
    }
    let results = map_cells(cells.len(), ctx.serial, |k| {
        let (mu, sigma, phi) = cells[k];
        let dist = GapDistribution::new(mu, sigma, seed)?;
        optimize_bstar(&dist, phi, &tpl, n).map_err(anyhow::Error::from)
    })?;
    let rows: Vec<String> = cells
        .iter()
        .zip(&results)
        .map(|(&(mu, sigma, phi), r)| {
            fmt_row(&[mu, sigma, phi, r.b_star, r.p_star.mean, r.p_star.std_error])
        })
        .collect();
    em.csv(
        "pstar_vs_sigma.csv",
        &echo_all(cfg, ctx, &[]),
        "mu,sigma,phi,b_star,p_star,std_error",
        &rows,
    )?;
    Ok(())
}

fn pstar_vs_mu(cfg: &Config, ctx: &RunContext, em: &mut Emitter) -> Result<()> {
    let keys = ["mu_min", "mu_max", "mu_count", "phi"];
    validate(cfg, &keys, &keys)?;
    let mus = cfg.axis("mu")?;
    let phis = cfg.f64_list("phi")?;
    let n = cfg.usize_scalar("samples")?;
    let seed = cfg.u64_scalar("seed")?;
    let tpl = ctx.template();

    let mut cells: Vec<(f64, f64)> = Vec::new();
    for &phi in &phis {
        for &mu in &mus {
            cells.push((mu, phi));
        }
    }
    let results = map_cells(cells.len(), ctx.serial, |k| {
        let (mu, phi) = cells[k];
        let dist = GapDistribution::new(mu, mu / 5.0, seed)?;
        optimize_bstar(&dist, phi, &tpl, n).map_err(anyhow::Error::from)
    })?;
    let rows: Vec<String> = cells
        .iter()
        .zip(&results)
        .map(|(&(mu, phi), r)| {
            let reference = avg_plz(mu, mu / 5.0).unwrap();
            fmt_row(&[
                mu,
                phi,
                r.b_star,
                r.p_star.mean,
                r.p_star.std_error,
                reference,
            ])
        })
        .collect();
    em.csv(
        "pstar_vs_mu.csv",
        &echo_all(cfg, ctx, &[]),
        "mu,phi,b_star,p_star,std_error,avg_P_uncontrolled",
        &rows,
    )?;
    Ok(())
}

fn area(cfg: &Config, ctx: &RunContext, em: &mut Emitter) -> Result<()> {
    let keys = ["mu_min", "mu_max", "mu_count", "phi"];
    validate(cfg, &keys, &keys)?;
    let mus = cfg.axis("mu")?;
    let phis = cfg.f64_list("phi")?;
    let n = cfg.usize_scalar("samples")?;
    let seed = cfg.u64_scalar("seed")?;
    let tpl = ctx.template();

    let mut rows = Vec::new();
    for &phi in &phis {
        for &mu in &mus {
            let dist = GapDistribution::new(mu, mu / 5.0, seed)?;
            let avg = average_area(&dist, phi, &tpl, n)?;
            // single-gap dashed reference
            let b0 = characteristic_b0(mu, phi, &tpl)?.b0;
            let single =
                glz::propagate::adiabaticity_area(&tpl.params(mu, b0, phi)?, &tpl.integrator)?;
            rows.push(fmt_row(&[mu, phi, avg.mean, avg.std_error, single]));
        }
    }
    em.csv(
        "area_vs_mu.csv",
        &echo_all(cfg, ctx, &[]),
        "mu,phi,area_mean,std_error,single_gap_area",
        &rows,
    )?;
    Ok(())
}

// ---------------------------------------------------------------- heatmap

fn heatmap(cfg: &Config, ctx: &RunContext, em: &mut Emitter) -> Result<()> {
    let keys = [
        "mu",
        "sigma_min",
        "sigma_max",
        "sigma_count",
        "epsilon_min",
        "epsilon_max",
        "epsilon_count",
        "error_kind",
        "phi",
    ];
    validate(cfg, &keys, &keys)?;
    let mu = cfg.f64_scalar("mu")?;
    let sigmas = cfg.axis("sigma")?;
    let epsilons = cfg.axis("epsilon")?;
    let kinds: Vec<u8> = cfg
        .f64_list("error_kind")?
        .into_iter()
        .map(|k| k as u8)
        .collect();
    let phis = cfg.f64_list("phi")?;
    let n = cfg.usize_scalar("samples")?;
    let seed = cfg.u64_scalar("seed")?;
    let tpl = ctx.template();

    for (kind_idx, &kind_code) in kinds.iter().enumerate() {
        let kind = ImperfectionKind::from_code(kind_code)
            .ok_or_else(|| anyhow!("error_kind must be 1, 2 or 3, got {kind_code}"))?;
        for (phi_idx, &phi) in phis.iter().enumerate() {
            // the planned control: zero-transition coupling of the mean gap
            // for the ideal pulse; the imperfection hits the applied pulse
            let b0 = characteristic_b0(mu, phi, &tpl)?.b0;
            let cells: Vec<(f64, f64)> = epsilons
                .iter()
                .flat_map(|&eps| sigmas.iter().map(move |&s| (eps, s)))
                .collect();
            let means = map_cells(cells.len(), ctx.serial, |k| {
                let (eps, sigma) = cells[k];
                let mut tpl_err = tpl.clone();
                if eps != 0.0 {
                    tpl_err.error = Some(ErrorModel::new(kind, eps)?);
                }
                let dist = GapDistribution::new(mu, sigma, seed)?;
                let r = average_probability(&dist, b0, phi, &tpl_err, n)?;
                Ok((r.mean, r.std_error))
            })?;
            let rows: Vec<String> = cells
                .iter()
                .zip(&means)
                .map(|(&(eps, sigma), &(mean, se))| {
                    fmt_row(&[kind_code as f64, phi, sigma, eps, mean, se])
                })
                .collect();
            let echo = echo_all(
                cfg,
                ctx,
                &[
                    ("error_kind", kind_code.to_string()),
                    ("phi", crate::output::fmt_f64(phi)),
                    ("b0", crate::output::fmt_f64(b0)),
                ],
            );
            em.csv(
                &format!("heatmap_k{}_phi{}.csv", kind_idx + 1, phi_idx),
                &echo,
                "error_kind,phi,sigma,epsilon,p_mean,std_error",
                &rows,
            )?;
        }
    }
    Ok(())
}

// ----------------------------------------------------------------- pulses

fn pulses(cfg: &Config, ctx: &RunContext, em: &mut Emitter) -> Result<()> {
    let keys = ["pulse", "mu_min", "mu_max", "mu_count", "phi"];
    validate(cfg, &keys, &keys)?;
    let shapes = cfg.pulse_list("pulse")?;
    let mus = cfg.axis("mu")?;
    let phis = cfg.f64_list("phi")?;
    let n = cfg.usize_scalar("samples")?;
    let seed = cfg.u64_scalar("seed")?;

    let mut cells: Vec<(PulseKind, f64, f64)> = Vec::new();
    for &p in &shapes {
        for &phi in &phis {
            for &mu in &mus {
                cells.push((p, phi, mu));
            }
        }
    }
    let results = map_cells(cells.len(), ctx.serial, |k| {
        let (pulse, phi, mu) = cells[k];
        let mut tpl = ctx.template();
        tpl.pulse = pulse;
        let dist = GapDistribution::new(mu, mu / 5.0, seed)?;
        // irregular characteristic curves can lose their root at larger
        // gaps; report such cells as missing instead of failing the panel
        match optimize_bstar(&dist, phi, &tpl, n) {
            Ok(r) => Ok(Some(r)),
            Err(glz::GlzError::NoRoot { .. }) => Ok(None),
            Err(e) => Err(anyhow::Error::from(e)),
        }
    })?;
    let rows: Vec<String> = cells
        .iter()
        .zip(&results)
        .map(|(&(pulse, phi, mu), r)| match r {
            Some(r) => format!(
                "{},{}",
                pulse.code(),
                fmt_row(&[phi, mu, r.b_star, r.p_star.mean, r.p_star.std_error])
            ),
            None => format!(
                "{},{}",
                pulse.code(),
                fmt_row(&[phi, mu, f64::NAN, f64::NAN, f64::NAN])
            ),
        })
        .collect();
    em.csv(
        "pstar_vs_pulse.csv",
        &echo_all(cfg, ctx, &[]),
        "pulse,phi,mu,b_star,p_star,std_error",
        &rows,
    )?;
    Ok(())
}

// ----------------------------------------------------------------- sweeps

fn sweeps(cfg: &Config, ctx: &RunContext, em: &mut Emitter) -> Result<()> {
    let keys = [
        "mu",
        "sigma",
        "T_min",
        "T_max",
        "T_count",
        "sweep",
        "phi",
        "b0_policy",
    ];
    validate(cfg, &keys, &keys)?;
    let mu = cfg.f64_scalar("mu")?;
    let sigma = cfg.f64_scalar("sigma")?;
    let times = cfg.axis("T")?;
    let sweeps = cfg.string_list("sweep")?;
    for s in &sweeps {
        if s != "Lin" && s != "Tan" {
            bail!("sweep must be Lin or Tan, got `{s}`");
        }
    }
    let phis = cfg.f64_list("phi")?;
    let n = cfg.usize_scalar("samples")?;
    let seed = cfg.u64_scalar("seed")?;
    let t_averaged = cfg.string_scalar("b0_policy")? == "Tavg";

    let mut cells: Vec<(String, f64, f64)> = Vec::new();
    for s in &sweeps {
        for &phi in &phis {
            for &t in &times {
                cells.push((s.clone(), phi, t));
            }
        }
    }
    let points = map_cells(cells.len(), ctx.serial, |k| {
        let (ref sweep, phi, time) = cells[k];
        let mut tpl = ctx.template();
        tpl.time = time;
        if sweep == "Tan" {
            tpl.tangent_shape = Some(mu);
        }
        let b0 = characteristic_b0(mu, phi, &tpl)?.b0;
        Ok((b0, tpl))
    })?;

    // optional Fig-11-style policy: replace each b0(T) by its T-average
    // within the (sweep, phi) family
    let mut b0_used: Vec<f64> = points.iter().map(|(b0, _)| *b0).collect();
    if t_averaged {
        for sweep in &sweeps {
            for &phi in &phis {
                let idx: Vec<usize> = cells
                    .iter()
                    .enumerate()
                    .filter(|(_, (s, p, _))| s == sweep && *p == phi)
                    .map(|(i, _)| i)
                    .collect();
                let mean = idx.iter().map(|&i| points[i].0).sum::<f64>() / idx.len() as f64;
                for &i in &idx {
                    b0_used[i] = mean;
                }
            }
        }
    }

    let averages = map_cells(cells.len(), ctx.serial, |k| {
        let (_, phi, _) = cells[k];
        let dist = GapDistribution::new(mu, sigma, seed)?;
        average_probability(&dist, b0_used[k], phi, &points[k].1, n).map_err(anyhow::Error::from)
    })?;

    let rows: Vec<String> = cells
        .iter()
        .zip(points.iter().zip(&averages))
        .zip(&b0_used)
        .map(|(((sweep, phi, time), ((b0, _), avg)), used)| {
            format!(
                "{sweep},{}",
                fmt_row(&[*phi, *time, *b0, *used, avg.mean, avg.std_error])
            )
        })
        .collect();
    let echo = echo_all(cfg, ctx, &[]);
    em.csv(
        "pstar_vs_time.csv",
        &echo,
        "sweep,phi,T,b0,b0_used,p_mean,std_error",
        &rows,
    )?;
    Ok(())
}

// ------------------------------------------------------------- identities

fn identities(cfg: &Config, ctx: &RunContext, em: &mut Emitter) -> Result<()> {
    validate(cfg, &[], &[])?;
    let integ = ctx.integrator();
    let mut rows = Vec::new();

    // half-window relations and the real symmetric-window diagonal
    let windows = [
        (0.3, 1.5),
        (0.3, 4.0),
        (0.6, 2.0),
        (0.8, 3.0),
        (1.0, 2.5),
        (1.2, 1.8),
        (1.4, 3.5),
        (0.5, 5.0),
        (0.9, 4.5),
        (1.7, 2.2),
    ];
    for (a, t) in windows {
        let minus = glz::propagate::bare_lz_propagator(a, -t, 0.0, &integ)?;
        let plus = glz::propagate::bare_lz_propagator(a, 0.0, t, &integ)?;
        rows.push(format!(
            "half_window_A,{a},{t},{}",
            crate::output::fmt_f64((minus.a - plus.a.conj()).norm())
        ));
        rows.push(format!(
            "half_window_B,{a},{t},{}",
            crate::output::fmt_f64((minus.b - plus.b).norm())
        ));
        let full = plus.compose(&minus);
        rows.push(format!(
            "symmetric_diag_imag,{a},{t},{}",
            crate::output::fmt_f64(full.a.im.abs())
        ));
    }

    // mirror symmetry of the controlled crossing
    let tpl = ctx.template();
    for (a, b) in [(0.4, 1.0), (0.8, 1.6), (1.2, 0.6), (0.6, 2.4), (1.5, 0.9)] {
        let p1 = transition_probability(&tpl.params(a, b, 0.4)?, &integ)?;
        let p2 = transition_probability(&tpl.params(-a, -b, 0.4)?, &integ)?;
        rows.push(format!(
            "mirror,{a},{b},{}",
            crate::output::fmt_f64((p1 - p2).abs())
        ));
    }

    // angle independence at zero gap
    for b in [0.5, 2.0, 8.0] {
        let reference = transition_probability(&tpl.params(0.0, b, 0.0)?, &integ)?;
        for phi in [FRAC_PI_4, FRAC_PI_2] {
            let p = transition_probability(&tpl.params(0.0, b, phi)?, &integ)?;
            rows.push(format!(
                "zero_gap_angle,{b},{phi},{}",
                crate::output::fmt_f64((p - reference).abs())
            ));
        }
    }

    // Gamma layer spot checks
    use num_complex::Complex64;
    for b in [0.25, 1.0, 3.0] {
        let g = glz::specfun::gamma(Complex64::new(0.5, b))?;
        let expected = PI / (PI * b).cosh();
        rows.push(format!(
            "gamma_half_line,{b},0,{}",
            crate::output::fmt_f64((g.norm_sqr() - expected).abs() / expected)
        ));
        let g = glz::specfun::gamma(Complex64::new(1.0, b))?;
        let expected = PI * b / (PI * b).sinh();
        rows.push(format!(
            "gamma_one_line,{b},0,{}",
            crate::output::fmt_f64((g.norm_sqr() - expected).abs() / expected)
        ));
    }

    em.csv(
        "identities.csv",
        &echo_all(cfg, ctx, &[]),
        "check,param1,param2,residual",
        &rows,
    )?;
    Ok(())
}
