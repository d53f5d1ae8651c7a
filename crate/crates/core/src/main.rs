use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nss_core::io::CsvWriter;
use nss_core::verify::{
    residual_ladder, run_init_check, run_mms, run_probe, run_simulation, run_twin, MmsReport, OutputDir, ProbeSummary,
    TwinReport,
};
use nss_core::init::InitReport;
use nss_core::{Error, Result, SimConfig};

#[derive(Parser)]
#[command(name = "nss", version, about = "Navier-Stokes-Smoluchowski simulator with vacuum")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Configuration file (`key = value` lines).
    config: PathBuf,
    /// Output directory; overrides `run.output_dir`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the initial data and integrate to `run.t_end`.
    Run(Common),
    /// Manufactured-solution convergence study.
    #[command(alias = "convergence")]
    Mms(Common),
    /// Initial-data approximation errors over `init_check.r_ladder`.
    InitCheck(Common),
    /// Perturbed twin runs for stability.
    Twin(Common),
    /// Identity residuals of one step under grid refinement.
    Residuals(Common),
    /// Weighted inequality probe over a fixed family of fields.
    Probe(Common),
}

fn open(c: &Common, name: &str) -> Result<(SimConfig, OutputDir)> {
    let cfg = SimConfig::from_file(&c.config)?;
    let root = c.output_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let out = OutputDir::create(&root, name)?;
    Ok((cfg, out))
}

fn write_csv(out: &mut OutputDir, name: &str, header: &str, rows: &[String]) -> Result<()> {
    let mut w = CsvWriter::create(&out.file(name)?, header)?;
    for r in rows {
        w.row(r)?;
    }
    w.finish()
}

fn cmd_run(cfg: &SimConfig, out: &mut OutputDir) -> Result<()> {
    let o = run_simulation(cfg, Some(out))?;
    let last = o.records.last().expect("initial record");
    println!(
        "steps {} t {:e} mass_rho {:e} energy {:e} min_rho {:e} clips {}",
        o.steps, last.t, last.mass_rho, last.energy, last.min_rho, o.positivity_clips
    );
    Ok(())
}

fn cmd_mms(cfg: &SimConfig, out: &mut OutputDir) -> Result<()> {
    let r = run_mms(cfg)?;
    write_csv(out, "mms.csv", MmsReport::CSV_HEADER, &r.csv_rows())?;
    for row in r.csv_rows() {
        println!("{row}");
    }
    match r.judged_order() {
        Some(p) if p >= cfg.mms.min_order => Ok(()),
        p => Err(Error::CheckFailed(format!("observed order {p:?} below {}", cfg.mms.min_order))),
    }
}

fn cmd_init_check(cfg: &SimConfig, out: &mut OutputDir) -> Result<()> {
    let r = run_init_check(cfg)?;
    let rows: Vec<String> = r.reports.iter().map(InitReport::csv_row).collect();
    write_csv(out, "init_check.csv", InitReport::CSV_HEADER, &rows)?;
    for row in &rows {
        println!("{row}");
    }
    if !r.norms_decrease {
        return Err(Error::CheckFailed("approximation errors do not decrease in R".into()));
    }
    if !r.mass_threshold_holds {
        return Err(Error::CheckFailed("cut-off density mass below threshold".into()));
    }
    Ok(())
}

fn cmd_twin(cfg: &SimConfig, out: &mut OutputDir) -> Result<()> {
    let eps = cfg.twin.epsilon;
    let full = run_twin(cfg, eps)?;
    let half = run_twin(cfg, eps / 2.0)?;
    let zero = run_twin(cfg, 0.0)?;
    write_csv(out, "twin.csv", TwinReport::CSV_HEADER, &full.csv_rows())?;
    write_csv(out, "twin_half.csv", TwinReport::CSV_HEADER, &half.csv_rows())?;
    let ratio = half.final_total() / full.final_total();
    println!("growth {:e} halving_ratio {:e} zero_identical {}", full.growth, ratio, zero.identical);
    if !zero.identical {
        return Err(Error::CheckFailed("unperturbed twin diverged".into()));
    }
    if full.growth > cfg.twin.growth_cap {
        return Err(Error::CheckFailed(format!("growth {} above cap {}", full.growth, cfg.twin.growth_cap)));
    }
    Ok(())
}

fn cmd_residuals(cfg: &SimConfig, out: &mut OutputDir) -> Result<()> {
    let levels = residual_ladder(cfg, &cfg.mms.levels)?;
    let rows: Vec<String> = levels
        .iter()
        .map(|l| format!("{},{:e},{:e},{:e}", l.n, l.dt, l.pressure_transport, l.flux_identity))
        .collect();
    write_csv(out, "residuals.csv", "n,dt,pressure_transport,flux_identity", &rows)?;
    for row in &rows {
        println!("{row}");
    }
    Ok(())
}

fn cmd_probe(cfg: &SimConfig, out: &mut OutputDir) -> Result<()> {
    let s = run_probe(cfg)?;
    write_csv(out, "probe.csv", ProbeSummary::CSV_HEADER, &s.csv_rows())?;
    println!("min_ratio {:e} max_ratio {:e}", s.min_ratio, s.max_ratio);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    type Handler = fn(&SimConfig, &mut OutputDir) -> Result<()>;
    let (common, name, f): (&Common, &str, Handler) = match &cli.command {
        Command::Run(c) => (c, "run", cmd_run),
        Command::Mms(c) => (c, "mms", cmd_mms),
        Command::InitCheck(c) => (c, "init-check", cmd_init_check),
        Command::Twin(c) => (c, "twin", cmd_twin),
        Command::Residuals(c) => (c, "residuals", cmd_residuals),
        Command::Probe(c) => (c, "probe", cmd_probe),
    };
    let (cfg, mut out) = open(common, name)?;
    let result = f(&cfg, &mut out);
    let status = match &result {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("error: {e}"),
    };
    out.finish(&cfg, &status)?;
    result
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nss: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

