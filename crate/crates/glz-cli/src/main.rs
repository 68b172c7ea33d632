//! Batch front-end for the crossing laboratory: single runs, grids,
//! characteristic curves, control optimization, closed-form tabulation and
//! the registered figure scenarios. Everything lands as CSV or JSON under
//! the output directory; nothing is interactive.

mod config;
mod output;
mod scenarios;

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use config::{parse_number, RunContext};
use glz::ensemble::{
    average_area, average_probability, characteristic_b0, optimize_bstar, GapDistribution,
};
use glz::models::PulseKind;
use glz::propagate::{propagate, transition_probability};
use output::{Manifest, ScenarioReport};

#[derive(Parser)]
#[command(
    name = "glz",
    version,
    about = "Two-level avoided-crossing control laboratory"
)]
struct Cli {
    /// Base seed for all random-gap sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Ensemble size for Monte Carlo averages.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Relative tolerance of the propagator.
    #[arg(long, global = true)]
    rtol: Option<f64>,
    /// Force sequential execution (bit-identical to the parallel default).
    #[arg(long, global = true)]
    serial: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate a single parameter set and dump the trajectory.
    Simulate {
        #[arg(long)]
        gap: f64,
        #[arg(long)]
        control: f64,
        /// Angle of the control axis; accepts `pi/2` style values.
        #[arg(long, default_value = "0", value_parser = parse_number)]
        angle: f64,
        /// Pulse shape code: L, g, s, r or t.
        #[arg(long, default_value = "L")]
        pulse: char,
        #[arg(long, default_value_t = 10.0)]
        time: f64,
        /// Imperfection kind 1-3 (with --epsilon).
        #[arg(long)]
        error_kind: Option<u8>,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
    },
    /// Transition probability over a gap x control grid.
    Sweep {
        #[arg(long, default_value = "0", value_parser = parse_number)]
        angle: f64,
        #[arg(long, default_value_t = 0.0)]
        gap_min: f64,
        #[arg(long, default_value_t = 3.0)]
        gap_max: f64,
        #[arg(long, default_value_t = 31)]
        gap_count: usize,
        #[arg(long, default_value_t = 0.0)]
        control_min: f64,
        #[arg(long, default_value_t = 8.0)]
        control_max: f64,
        #[arg(long, default_value_t = 41)]
        control_count: usize,
    },
    /// Zero-transition couplings over a gap axis.
    Cc {
        #[arg(long, default_value = "0", value_parser = parse_number)]
        angle: f64,
        #[arg(long, default_value_t = 0.1)]
        gap_min: f64,
        #[arg(long, default_value_t = 1.9)]
        gap_max: f64,
        #[arg(long, default_value_t = 19)]
        gap_count: usize,
    },
    /// Optimize the control coupling for a gap distribution.
    Optimize {
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value = "0", value_parser = parse_number)]
        angle: f64,
    },
    /// Closed-form kick-limit tabulation (runs the dirac scenario).
    Dirac,
    /// Ensemble average at a fixed control coupling.
    Average {
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        sigma: f64,
        /// Control coupling; defaults to the zero-transition coupling of
        /// the mean gap.
        #[arg(long)]
        control: Option<f64>,
        #[arg(long, default_value = "0", value_parser = parse_number)]
        angle: f64,
        /// Average the adiabaticity-deviation area instead of the final
        /// probability.
        #[arg(long)]
        area: bool,
    },
    /// Run one registered scenario.
    Scenario {
        name: String,
        /// Flat key-value config file; repeated keys form grid axes.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run every registered scenario and write an aggregate manifest.
    All,
}

fn main() {
    env_logger::init();
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn ctx_from(cli: &Cli) -> RunContext {
    RunContext {
        seed: cli.seed.unwrap_or(7),
        samples: cli.samples.unwrap_or(1000),
        out_root: cli.out.clone(),
        rtol: cli.rtol,
        serial: cli.serial,
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let ctx = ctx_from(&cli);

    match &cli.command {
        Command::Simulate {
            gap,
            control,
            angle,
            pulse,
            time,
            error_kind,
            epsilon,
        } => {
            ctx.ensure_writable()?;
            let kind = PulseKind::from_code(*pulse)
                .ok_or_else(|| anyhow::anyhow!("unknown pulse code `{pulse}`"))?;
            let mut params = glz::models::GlzParams::new(*gap, *control, *angle)?
                .with_pulse(kind)
                .with_time(*time)?;
            if let Some(code) = error_kind {
                let k = glz::models::ImperfectionKind::from_code(*code)
                    .ok_or_else(|| anyhow::anyhow!("error kind must be 1, 2 or 3"))?;
                params = params.with_error(glz::models::ErrorModel::new(k, *epsilon)?)?;
            }
            let rec = propagate(&params, &ctx.integrator(), true)?;
            let samples = rec.samples.as_ref().expect("recorded");
            let scale = (params.time / params.sweep.lambda0()).sqrt();
            let rows: Vec<String> = samples
                .grid
                .iter()
                .zip(&samples.prob)
                .zip(&samples.norm_err)
                .map(|((&u, &p), &ne)| {
                    let t = scale * params.sweep.eval(u).0;
                    [u, t, p, ne].map(output::fmt_f64).join(",")
                })
                .collect();
            let mut echo: Vec<(String, String)> = vec![
                ("command".into(), "simulate".to_string()),
                ("version".into(), output::version().to_string()),
                ("a".into(), output::fmt_f64(*gap)),
                ("b".into(), output::fmt_f64(*control)),
                ("phi".into(), output::fmt_f64(*angle)),
                ("pulse".into(), pulse.to_string()),
                ("T".into(), output::fmt_f64(*time)),
                ("lambda0".into(), output::fmt_f64(params.sweep.lambda0())),
                ("rtol".into(), output::fmt_f64(ctx.integrator().rtol)),
            ];
            if let Some(code) = error_kind {
                echo.push(("error_kind".into(), code.to_string()));
                echo.push(("epsilon".into(), output::fmt_f64(*epsilon)));
            }
            let path = ctx.out_root.join("trajectory.csv");
            output::write_csv(&path, &echo, "u,t,P,norm_error", &rows)?;
            println!(
                "final transition probability {:.6e}; trajectory area {:.6e}; wrote {}",
                rec.final_prob,
                samples.area,
                path.display()
            );
        }

        Command::Sweep {
            angle,
            gap_min,
            gap_max,
            gap_count,
            control_min,
            control_max,
            control_count,
        } => {
            ctx.ensure_writable()?;
            let tpl = ctx.template();
            let axis = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
                (0..n)
                    .map(|k| lo + (hi - lo) * k as f64 / (n.max(2) - 1) as f64)
                    .collect()
            };
            let gaps = axis(*gap_min, *gap_max, *gap_count);
            let controls = axis(*control_min, *control_max, *control_count);
            let cells: Vec<(f64, f64)> = gaps
                .iter()
                .flat_map(|&a| controls.iter().map(move |&b| (a, b)))
                .collect();
            let rows: Result<Vec<String>> = cells
                .iter()
                .map(|&(a, b)| {
                    let p = transition_probability(&tpl.params(a, b, *angle)?, &tpl.integrator)?;
                    Ok([a, b, p].map(output::fmt_f64).join(","))
                })
                .collect();
            let echo: Vec<(String, String)> = vec![
                ("command".into(), "sweep".to_string()),
                ("version".into(), output::version().to_string()),
                ("phi".into(), output::fmt_f64(*angle)),
                ("rtol".into(), output::fmt_f64(ctx.integrator().rtol)),
            ];
            let path = ctx.out_root.join("sweep.csv");
            output::write_csv(&path, &echo, "a,b,P", &rows?)?;
            println!("wrote {}", path.display());
        }

        Command::Cc {
            angle,
            gap_min,
            gap_max,
            gap_count,
        } => {
            ctx.ensure_writable()?;
            let tpl = ctx.template();
            let mut rows = Vec::new();
            for k in 0..*gap_count {
                let a = gap_min + (gap_max - gap_min) * k as f64 / (gap_count.max(&2) - 1) as f64;
                let cp = characteristic_b0(a, *angle, &tpl)?;
                rows.push(
                    [cp.angle, cp.gap, cp.b0, cp.residual]
                        .map(output::fmt_f64)
                        .join(","),
                );
            }
            let echo: Vec<(String, String)> = vec![
                ("command".into(), "cc".to_string()),
                ("version".into(), output::version().to_string()),
                ("phi".into(), output::fmt_f64(*angle)),
            ];
            let path = ctx.out_root.join("cc.csv");
            output::write_csv(&path, &echo, "phi,a,b0,residual", &rows)?;
            println!("wrote {}", path.display());
        }

        Command::Optimize { mu, sigma, angle } => {
            ctx.ensure_writable()?;
            let dist = GapDistribution::new(*mu, *sigma, ctx.seed)?;
            if !dist.within_envelope() {
                log::warn!("sigma exceeds the mu/5 operating envelope");
            }
            let out = optimize_bstar(&dist, *angle, &ctx.template(), ctx.samples)?;
            let path = ctx.out_root.join("optimize.json");
            let payload = serde_json::json!({
                "command": "optimize",
                "version": output::version(),
                "mu": mu,
                "sigma": sigma,
                "phi": angle,
                "samples": ctx.samples,
                "seed": ctx.seed,
                "result": out,
            });
            output::write_json(&path, &payload)?;
            println!(
                "b* = {:.6}, P* = {:.6e} (se {:.1e}); wrote {}",
                out.b_star,
                out.p_star.mean,
                out.p_star.std_error,
                path.display()
            );
        }

        Command::Dirac => {
            let report = scenarios::run_scenario("dirac", None, &ctx)?;
            println!(
                "dirac scenario: {} files in {} ms",
                report.files.len(),
                report.wall_ms
            );
        }

        Command::Average {
            mu,
            sigma,
            control,
            angle,
            area,
        } => {
            ctx.ensure_writable()?;
            let tpl = ctx.template();
            let dist = GapDistribution::new(*mu, *sigma, ctx.seed)?;
            let result = if *area {
                average_area(&dist, *angle, &tpl, ctx.samples)?
            } else {
                let b = match control {
                    Some(b) => *b,
                    None => characteristic_b0(*mu, *angle, &tpl)?.b0,
                };
                average_probability(&dist, b, *angle, &tpl, ctx.samples)?
            };
            let path = ctx.out_root.join("average.json");
            let payload = serde_json::json!({
                "command": "average",
                "version": output::version(),
                "mu": mu,
                "sigma": sigma,
                "phi": angle,
                "control": control,
                "area": area,
                "samples": ctx.samples,
                "seed": ctx.seed,
                "result": result,
            });
            output::write_json(&path, &payload)?;
            println!(
                "mean = {:.6e} (se {:.1e}, n = {}); wrote {}",
                result.mean,
                result.std_error,
                result.n_samples,
                path.display()
            );
        }

        Command::Scenario { name, config } => {
            let report = scenarios::run_scenario(name, config.as_deref(), &ctx)?;
            println!(
                "scenario {name}: {} files in {} ms",
                report.files.len(),
                report.wall_ms
            );
        }

        Command::All => {
            ctx.ensure_writable()?;
            let mut reports: Vec<ScenarioReport> = Vec::new();
            let mut failed = false;
            for name in scenarios::REGISTRY {
                match scenarios::run_scenario(name, None, &ctx) {
                    Ok(r) => {
                        println!("scenario {name}: ok ({} ms)", r.wall_ms);
                        reports.push(r);
                    }
                    Err(e) => {
                        eprintln!("scenario {name}: FAILED: {e:#}");
                        failed = true;
                        reports.push(ScenarioReport {
                            name: name.to_string(),
                            status: "failed".into(),
                            wall_ms: 0,
                            files: Vec::new(),
                            error: Some(format!("{e:#}")),
                        });
                    }
                }
            }
            let manifest = Manifest {
                seed: ctx.seed,
                samples: ctx.samples,
                version: output::version(),
                unix_time: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
                scenarios: reports,
            };
            let path = ctx.out_root.join("manifest.json");
            output::write_json(&path, &manifest)?;
            println!("wrote {}", path.display());
            if failed {
                bail!("one or more scenarios failed; see the manifest");
            }
        }
    }
    Ok(())
}
