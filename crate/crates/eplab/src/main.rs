//! Command-line front end: trajectories, steady-state curves, spectral
//! sweeps, exceptional-point location, and the density-matrix rate audit.
//!
//! Exit codes: 0 success, 2 usage/configuration, 3 numeric failure,
//! 4 no exceptional point found (or coalescence unverified), 5 rate
//! audit mismatch.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use eplab::ep::{ep_locus, splitting_curve, LocusRow};
use eplab::error::Error;
use eplab::integrate::{default_horizon, default_initial_state, dst_curve, integrate};
use eplab::lindblad::{audit_dissipators, AUDIT_GATE};
use eplab::ode::StepControl;
use eplab::params::ModelParams;
use eplab::report;
use eplab::spectrum::{linspace, sweep_table, PumpMode};
use eplab::svg::{line_plot, Series};
use eplab::Result;

#[derive(Parser)]
#[command(name = "eplab", version, about = "Laser mean-field and exceptional-point laboratory")]
struct Cli {
    /// Flat `key = value` configuration file applied over the built-in
    /// defaults (flags override both).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true, help = "Cavity relaxation rate")]
    gamma_a: Option<f64>,
    #[arg(long, global = true, help = "Dephasing rate")]
    gamma_ph: Option<f64>,
    #[arg(long, global = true, help = "Longitudinal decay rate")]
    gamma_d: Option<f64>,
    #[arg(long, global = true, help = "Incoherent pump rate")]
    gamma_p: Option<f64>,
    #[arg(long, global = true, help = "Correlation decay rate")]
    gamma_cor: Option<f64>,
    #[arg(long, global = true, help = "Single-molecule coupling")]
    omega_r: Option<f64>,
    #[arg(long, global = true, help = "Number of molecules")]
    n_mol: Option<u64>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Re-derive the pump rate from each swept inversion.
    Coupled,
    /// Keep all rates fixed while sweeping the inversion couplings.
    Frozen,
}

impl From<ModeArg> for PumpMode {
    fn from(m: ModeArg) -> PumpMode {
        match m {
            ModeArg::Coupled => PumpMode::Coupled,
            ModeArg::Frozen => PumpMode::Frozen,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the equations of motion and write the sampled trajectory.
    Traj {
        /// Integration horizon (default: 100 slowest relaxation times).
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long, default_value_t = 1001)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
        /// Optional plot of n and D against time.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Stationary inversion against pump ratio gamma_p / gamma_d.
    Dst {
        /// Pump-ratio grid as lo:hi:count.
        #[arg(long, default_value = "0:1:41")]
        ratios: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Branch-tracked eigenvalue sweep of the stability matrix.
    Spectrum {
        /// Inversion grid as lo:hi:count.
        #[arg(long, default_value = "-0.999999:-0.000001:1201", allow_hyphen_values = true)]
        grid: String,
        #[arg(long, value_enum, default_value_t = ModeArg::Coupled)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Real/imaginary splitting of the oscillatory eigenvalue pair.
    Split {
        #[arg(long, default_value = "-0.02:-0.000001:1001", allow_hyphen_values = true)]
        grid: String,
        #[arg(long, value_enum, default_value_t = ModeArg::Coupled)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Locate the exceptional point; optionally sweep gamma_cor.
    Ep {
        /// gamma_cor grid as lo:hi:count; omitted = the configured value only.
        #[arg(long)]
        locus: Option<String>,
        #[arg(long, value_enum, default_value_t = ModeArg::Coupled)]
        mode: ModeArg,
        /// Write the locus table here (omitted = print to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Fit each dissipator's decay rate in the exact two-molecule model
    /// and compare against the closed-form value.
    Oracle {
        /// Fock cutoff of the cavity mode.
        #[arg(long, default_value_t = 1)]
        n_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("range `{spec}` must be lo:hi:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    if count == 0 || !lo.is_finite() || !hi.is_finite() || (count > 1 && lo >= hi) {
        return Err(bad());
    }
    Ok(linspace(lo, hi, count))
}

fn effective_params(cli: &Cli) -> Result<ModelParams> {
    let mut p = ModelParams::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
        p.apply_config(&text)?;
    }
    if let Some(v) = cli.gamma_a {
        p.gamma_a = v;
    }
    if let Some(v) = cli.gamma_ph {
        p.gamma_ph = v;
    }
    if let Some(v) = cli.gamma_d {
        p.gamma_d = v;
    }
    if let Some(v) = cli.gamma_p {
        p.gamma_p = v;
    }
    if let Some(v) = cli.gamma_cor {
        p.gamma_cor = v;
    }
    if let Some(v) = cli.omega_r {
        p.omega_r = v;
    }
    if let Some(v) = cli.n_mol {
        p.n_mol = v;
    }
    p.validate()?;
    Ok(p)
}

fn invocation() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn write_svg(path: &Path, content: &str) -> Result<()> {
    report::write_atomic(path, content)
}

fn run(cli: &Cli) -> Result<()> {
    let p = effective_params(cli)?;
    let inv = invocation();

    match &cli.cmd {
        Cmd::Traj { t_end, samples, out, svg } => {
            let t_end = t_end.unwrap_or_else(|| default_horizon(&p));
            if !(t_end > 0.0) {
                return Err(Error::Config(format!("t_end = {t_end} must be positive")));
            }
            let x0 = default_initial_state(&p)?;
            let traj = integrate(&p, &x0, t_end, StepControl::default(), *samples)?;
            report::write_with_manifest(
                out,
                &report::render_trajectory(&traj),
                &inv,
                &p,
                &[("t_end", format!("{t_end}")), ("samples", format!("{samples}"))],
            )?;
            if let Some(svg_path) = svg {
                let n_pts: Vec<(f64, f64)> =
                    traj.times.iter().zip(&traj.states).map(|(&t, x)| (t, x.n)).collect();
                let d_pts: Vec<(f64, f64)> =
                    traj.times.iter().zip(&traj.states).map(|(&t, x)| (t, x.d)).collect();
                let doc = line_plot(
                    "Mean-field relaxation",
                    "t",
                    "n, D",
                    &[Series { label: "n", points: &n_pts }, Series { label: "D", points: &d_pts }],
                );
                write_svg(svg_path, &doc)?;
            }
        }
        Cmd::Dst { ratios, out, svg } => {
            let grid = parse_range(ratios)?;
            let rows = dst_curve(&p, &grid)?;
            report::write_with_manifest(
                out,
                &report::render_dst(&rows),
                &inv,
                &p,
                &[("ratios", ratios.clone())],
            )?;
            if let Some(svg_path) = svg {
                let st: Vec<(f64, f64)> = rows.iter().map(|r| (r.pump_ratio, r.d_st)).collect();
                let d0: Vec<(f64, f64)> = rows.iter().map(|r| (r.pump_ratio, r.d0)).collect();
                let doc = line_plot(
                    "Stationary inversion vs pump",
                    "gamma_p / gamma_d",
                    "inversion",
                    &[Series { label: "D_st", points: &st }, Series { label: "D_0", points: &d0 }],
                );
                write_svg(svg_path, &doc)?;
            }
        }
        Cmd::Spectrum { grid, mode, out, svg } => {
            let d0_grid = parse_range(grid)?;
            let (rows, ambiguous) = sweep_table(&p, &d0_grid, (*mode).into())?;
            let n_ambiguous = ambiguous.iter().filter(|&&a| a).count();
            report::write_with_manifest(
                out,
                &report::render_spectrum(&rows),
                &inv,
                &p,
                &[("grid", grid.clone()), ("ambiguous_intervals", format!("{n_ambiguous}"))],
            )?;
            if let Some(svg_path) = svg {
                let mut series_data: Vec<Vec<(f64, f64)>> = Vec::new();
                for b in 0..3 {
                    series_data.push(rows.iter().map(|r| (r.d0, r.lambdas[b].re)).collect());
                }
                series_data.push(rows.iter().map(|r| (r.d0, r.lambdas[1].im)).collect());
                series_data.push(rows.iter().map(|r| (r.d0, r.lambdas[2].im)).collect());
                let labels = ["Re l1", "Re l2", "Re l3", "Im l2", "Im l3"];
                let series: Vec<Series> = labels
                    .iter()
                    .zip(&series_data)
                    .map(|(l, pts)| Series { label: l, points: pts })
                    .collect();
                write_svg(svg_path, &line_plot("Stability spectrum", "d0", "eigenvalue", &series))?;
            }
        }
        Cmd::Split { grid, mode, out, svg } => {
            let d0_grid = parse_range(grid)?;
            let rows = splitting_curve(&p, &d0_grid, (*mode).into())?;
            report::write_with_manifest(
                out,
                &report::render_splitting(&rows),
                &inv,
                &p,
                &[("grid", grid.clone())],
            )?;
            if let Some(svg_path) = svg {
                let dim: Vec<(f64, f64)> = rows.iter().map(|r| (r.d0, r.dim)).collect();
                let dre: Vec<(f64, f64)> = rows.iter().map(|r| (r.d0, r.dre)).collect();
                let doc = line_plot(
                    "Eigenvalue pair splitting",
                    "d0",
                    "splitting",
                    &[Series { label: "|dIm|", points: &dim }, Series { label: "|dRe|", points: &dre }],
                );
                write_svg(svg_path, &doc)?;
            }
        }
        Cmd::Ep { locus, mode, out, svg } => {
            let rows: Vec<LocusRow> = match locus {
                Some(spec) => ep_locus(&p, &parse_range(spec)?, (*mode).into())?,
                None => ep_locus(&p, &[p.gamma_cor], (*mode).into())?,
            };
            if let Some(out) = out {
                report::write_with_manifest(
                    out,
                    &report::render_locus(&rows),
                    &inv,
                    &p,
                    &[("locus", locus.clone().unwrap_or_else(|| "single".into()))],
                )?;
            } else {
                for r in &rows {
                    println!(
                        "gamma_cor = {}: d0_ep = {:.12e}, gamma_p_ep = {:.12e}, overlap = {:.6}, bracket = {:.1e}",
                        r.gamma_cor, r.d0_ep, r.gamma_p_ep, r.overlap_ep, r.bracket_width
                    );
                }
            }
            if let Some(svg_path) = svg {
                let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.gamma_cor, r.d0_ep)).collect();
                let doc = line_plot(
                    "Exceptional-point locus",
                    "gamma_cor",
                    "d0_ep",
                    &[Series { label: "d0_ep", points: &pts }],
                );
                write_svg(svg_path, &doc)?;
            }
        }
        Cmd::Oracle { n_max, out } => {
            let rows = audit_dissipators(&p, *n_max)?;
            let table = report::render_oracle(&rows);
            match out {
                Some(path) => report::write_with_manifest(
                    path,
                    &table,
                    &inv,
                    &p,
                    &[("n_max", format!("{n_max}"))],
                )?,
                None => print!("{table}"),
            }
            let worst = rows.iter().map(|r| r.rel_err).fold(0.0f64, f64::max);
            if worst > AUDIT_GATE {
                return Err(Error::OracleMismatch(worst));
            }
            eprintln!(
                "audit: {} rates within {:.1}% (worst relative error {:.2e})",
                rows.len(),
                AUDIT_GATE * 100.0,
                worst
            );
        }
    }
    Ok(())
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidParams(_) => 2,
        Error::NoSignChange { .. } | Error::DiabolicSuspect { .. } => 4,
        Error::OracleMismatch(_) => 5,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
