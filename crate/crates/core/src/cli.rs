//! Batch front-end: argument parsing, optional key=value config file
//! (flags win), run orchestration and deterministic artifact emission.
//!
//! Exit codes: 0 success (for `admissibility`: only when the verdict is
//! admissible), 1 verdict not reached, 2 precondition violations, 3 numerical
//! failures. Failures also emit one machine-readable JSON line on stderr.

use crate::admissibility::{
    admissibility_pipeline, assemble_constants, find_n0, AssemblyOptions, Verdict,
};
use crate::analysis::extract_qn;
use crate::io::{
    write_constants_json, write_grad_csv, write_history_csv, write_margin_csv, write_qn_csv,
    write_rate_csv, Manifest,
};
use crate::rate::{a_sweep, solve_a};
use crate::sim::{ode_oracle, simulate, Params, DEFAULT_ROOT_TOL};
use clap::{Args, Parser, Subcommand};
use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Precondition(String),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Precondition(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Precondition(_) => "precondition",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }
}

impl From<crate::sim::SimError> for CliError {
    fn from(e: crate::sim::SimError) -> Self {
        use crate::sim::SimError::*;
        match &e {
            Precondition { .. } | NegativeH2(_) | MissingRecord(_) => {
                CliError::Precondition(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<crate::rate::RateError> for CliError {
    fn from(e: crate::rate::RateError) -> Self {
        match &e {
            crate::rate::RateError::Precondition { .. } => CliError::Precondition(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<crate::admissibility::AdmissibilityError> for CliError {
    fn from(e: crate::admissibility::AdmissibilityError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<crate::analysis::AnalysisError> for CliError {
    fn from(e: crate::analysis::AnalysisError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "rattling", version, about = "Hysteretic lattice switching laboratory")]
pub struct Cli {
    /// plain-text key=value config file, merged under explicit flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// output directory for artifacts and manifests
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// worker threads for sweep parallelism
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub h1: Option<f64>,
    #[arg(long)]
    pub h2: Option<f64>,
    #[arg(long)]
    pub tau0: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the rate equation and certify the three-equation equivalence
    SolveA {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Event-driven simulation: locate every switching moment up to n-max
    Simulate {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        n_max: Option<u32>,
        #[arg(long)]
        root_tol: Option<f64>,
    },
    /// Simulate and emit the q_n = t_n - a n^2 table
    QnTable {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        n_max: Option<u32>,
        #[arg(long)]
        root_tol: Option<f64>,
    },
    /// Simulate and emit the gradient-asymptotics table
    GradTable {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        n_max: Option<u32>,
        #[arg(long)]
        root_tol: Option<f64>,
    },
    /// Assemble the full constants table
    Constants {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        e: Option<f64>,
        #[arg(long)]
        n_floor: Option<u32>,
        #[arg(long)]
        n_scan_max: Option<u32>,
    },
    /// Evaluate the 12 requirements and locate n0(E)
    Requirements {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        e: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        n_search_max: Option<u32>,
        #[arg(long)]
        n_scan_max: Option<u32>,
    },
    /// Full admissibility certificate: constants, E sweep, n0, simulation,
    /// verdict (exit code 0 only when admissible)
    Admissibility {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        e_steps: Option<u32>,
        #[arg(long)]
        n_search_max: Option<u32>,
        #[arg(long)]
        n_sim_cap: Option<u32>,
        #[arg(long)]
        root_tol: Option<f64>,
    },
    /// Rate/E/n0 curve over an h1 range "lo:hi:step"
    Sweep {
        #[command(flatten)]
        problem: ProblemArgs,
        /// h1 range as lo:hi:step (overrides --h1)
        #[arg(long)]
        h1_range: Option<String>,
        /// only solve the rate equation (skip E and n0)
        #[arg(long, default_value_t = false)]
        quick: bool,
        #[arg(long)]
        n_search_max: Option<u32>,
    },
    /// Cross-validate the event-driven solver against the direct integrator
    OracleCheck {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        events: Option<u32>,
        #[arg(long)]
        radius: Option<u32>,
        #[arg(long)]
        dt: Option<f64>,
    },
}

/// key=value lines, '#' comments; later entries win within the file.
pub fn load_config(path: &Path) -> Result<HashMap<String, String>, CliError> {
    let text = fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Precondition(format!(
                "config line without '=': {line:?}"
            )));
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn merged<T: std::str::FromStr>(
    explicit: Option<T>,
    cfg: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, CliError> {
    if explicit.is_some() {
        return Ok(explicit);
    }
    match cfg.get(key) {
        None => Ok(None),
        Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
            CliError::Precondition(format!("config value for {key} does not parse: {raw:?}"))
        }),
    }
}

fn build_params(problem: &ProblemArgs, cfg: &HashMap<String, String>) -> Result<Params, CliError> {
    let c = merged(problem.c, cfg, "c")?
        .ok_or_else(|| CliError::Precondition("missing required parameter c".into()))?;
    let h1 = merged(problem.h1, cfg, "h1")?
        .ok_or_else(|| CliError::Precondition("missing required parameter h1".into()))?;
    let h2 = merged(problem.h2, cfg, "h2")?.unwrap_or(0.0);
    let tau0 = merged(problem.tau0, cfg, "tau0")?.unwrap_or(1.0);
    Params::new(c, h1, h2, tau0).map_err(|e| CliError::Precondition(e.to_string()))
}

fn parse_h1_range(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Precondition(format!(
            "h1 range must be lo:hi:step, got {spec:?}"
        )));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::Precondition("bad range lo".into()))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::Precondition("bad range hi".into()))?;
    let step: f64 = parts[2]
        .parse()
        .map_err(|_| CliError::Precondition("bad range step".into()))?;
    if step <= 0.0 || hi < lo {
        return Err(CliError::Precondition("empty h1 range".into()));
    }
    let count = ((hi - lo) / step + 0.5).floor() as usize + 1;
    Ok((0..count).map(|i| lo + step * i as f64).collect())
}

pub fn run(cli: &Cli) -> Result<i32, CliError> {
    let cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => HashMap::new(),
    };
    fs::create_dir_all(&cli.out)?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::SolveA { problem, tol } => {
            let params = build_params(problem, &cfg)?;
            let tol = merged(*tol, &cfg, "tol")?.unwrap_or(1e-12);
            let sol = solve_a(&params, tol)?;
            let csv = out.join("rate.csv");
            write_rate_csv(&csv, &[(params.h1, sol)])?;
            let mut man = Manifest::new(
                "solve-a",
                params,
                Some(sol.a),
                serde_json::json!({ "tol": tol }),
            );
            man.add_output(&csv)?;
            man.write(out, "solve-a.manifest.json")?;
            println!(
                "a = {:.15}  residuals: f {:.3e}, g {:.3e}, h {:.3e}",
                sol.a, sol.residual_f, sol.residual_g, sol.residual_h
            );
            Ok(0)
        }
        Command::Simulate {
            problem,
            n_max,
            root_tol,
        }
        | Command::QnTable {
            problem,
            n_max,
            root_tol,
        }
        | Command::GradTable {
            problem,
            n_max,
            root_tol,
        } => {
            let which = match &cli.command {
                Command::Simulate { .. } => "simulate",
                Command::QnTable { .. } => "qn-table",
                _ => "grad-table",
            };
            let params = build_params(problem, &cfg)?;
            let n_max = merged(*n_max, &cfg, "n_max")?.unwrap_or(100);
            let root_tol = merged(*root_tol, &cfg, "root_tol")?.unwrap_or(DEFAULT_ROOT_TOL);
            let hist = simulate(&params, n_max, root_tol)?;
            let mut man = Manifest::new(
                which,
                params,
                Some(hist.a),
                serde_json::json!({ "root_tol": root_tol, "n_max": n_max }),
            );
            let csv = out.join("history.csv");
            write_history_csv(&csv, &hist)?;
            man.add_output(&csv)?;
            match which {
                "qn-table" => {
                    let q = out.join("qn.csv");
                    write_qn_csv(&q, &extract_qn(&hist, hist.a)?)?;
                    man.add_output(&q)?;
                }
                "grad-table" => {
                    let g = out.join("grad.csv");
                    write_grad_csv(&g, &hist)?;
                    man.add_output(&g)?;
                }
                _ => {}
            }
            man.write(out, &format!("{which}.manifest.json"))?;
            for w in &hist.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{} events, last t_n = {:.6}, a = {:.12}",
                hist.records.len(),
                hist.records.last().map(|r| r.t).unwrap_or(0.0),
                hist.a
            );
            Ok(0)
        }
        Command::Constants {
            problem,
            eta,
            e,
            n_floor,
            n_scan_max,
        } => {
            let params = build_params(problem, &cfg)?;
            let mut opts = AssemblyOptions::default();
            opts.eta = merged(*eta, &cfg, "eta")?;
            if let Some(nf) = merged(*n_floor, &cfg, "n_floor")? {
                opts.n_floor = nf;
            }
            if let Some(ns) = merged(*n_scan_max, &cfg, "n_scan_max")? {
                opts.grids.n_scan_max = ns;
            }
            let e = merged(*e, &cfg, "e")?;
            let table = assemble_constants(&params, e, &opts)?;
            let path = out.join("constants.json");
            write_constants_json(&path, &table)?;
            let mut man = Manifest::new(
                "constants",
                params,
                Some(table.a),
                serde_json::json!({ "n_scan_max": opts.grids.n_scan_max }),
            );
            man.add_output(&path)?;
            man.write(out, "constants.manifest.json")?;
            println!(
                "E0 = {:.6}, N = {}, kappa = {:.6}, plateau_ok = {}",
                table.e0, table.n_cap, table.kappa, table.group_a_plateau_ok
            );
            Ok(0)
        }
        Command::Requirements {
            problem,
            e,
            eta,
            n_search_max,
            n_scan_max,
        } => {
            let params = build_params(problem, &cfg)?;
            let mut opts = AssemblyOptions::default();
            opts.eta = merged(*eta, &cfg, "eta")?;
            if let Some(ns) = merged(*n_scan_max, &cfg, "n_scan_max")? {
                opts.grids.n_scan_max = ns;
            }
            let e = merged(*e, &cfg, "e")?;
            let table = assemble_constants(&params, e, &opts)?;
            let n_search = merged(*n_search_max, &cfg, "n_search_max")?.unwrap_or(4000);
            let report = find_n0(&table, n_search);
            let csv = out.join("margins.csv");
            write_margin_csv(&csv, &report)?;
            let summary = out.join("requirements.json");
            fs::write(
                &summary,
                serde_json::to_string_pretty(&serde_json::json!({
                    "e": report.e,
                    "n0": report.n0,
                    "scan": [report.n_scan_lo, report.n_scan_hi],
                    "tail_monotone": report.tail_monotone,
                    "tail_certified": report.tail_certified,
                }))
                .unwrap()
                    + "\n",
            )?;
            let mut man = Manifest::new(
                "requirements",
                params,
                Some(table.a),
                serde_json::json!({ "e": table.e, "n_search_max": n_search }),
            );
            man.add_output(&csv)?;
            man.add_output(&summary)?;
            man.write(out, "requirements.manifest.json")?;
            match report.n0 {
                Some(n0) => {
                    println!("n0({}) = {n0}", table.e);
                    Ok(0)
                }
                None => {
                    println!("n0 not found up to {}", report.n_scan_hi);
                    Ok(1)
                }
            }
        }
        Command::Admissibility {
            problem,
            eta,
            e_steps,
            n_search_max,
            n_sim_cap,
            root_tol,
        } => {
            let params = build_params(problem, &cfg)?;
            let mut opts = AssemblyOptions::default();
            opts.eta = merged(*eta, &cfg, "eta")?;
            let table = assemble_constants(&params, None, &opts)?;
            let n_search = merged(*n_search_max, &cfg, "n_search_max")?.unwrap_or(4000);
            let n_cap = merged(*n_sim_cap, &cfg, "n_sim_cap")?.unwrap_or(4000);
            let e_steps = merged(*e_steps, &cfg, "e_steps")?.unwrap_or(6);
            let root_tol = merged(*root_tol, &cfg, "root_tol")?.unwrap_or(DEFAULT_ROOT_TOL);
            let (outcome, hist, report) =
                admissibility_pipeline(&params, &table, n_search, n_cap, e_steps, root_tol)?;
            let cpath = out.join("constants.json");
            write_constants_json(&cpath, &table.with_e(outcome.e))?;
            let mpath = out.join("margins.csv");
            write_margin_csv(&mpath, &report)?;
            let vpath = out.join("verdict.json");
            fs::write(
                &vpath,
                serde_json::to_string_pretty(&outcome).unwrap() + "\n",
            )?;
            let mut man = Manifest::new(
                "admissibility",
                params,
                Some(table.a),
                serde_json::json!({ "e_steps": e_steps, "n_search_max": n_search }),
            );
            man.add_output(&cpath)?;
            man.add_output(&mpath)?;
            man.add_output(&vpath)?;
            if let Some(h) = &hist {
                let hpath = out.join("history.csv");
                write_history_csv(&hpath, h)?;
                man.add_output(&hpath)?;
            }
            man.write(out, "admissibility.manifest.json")?;
            println!(
                "E = {:.6}, n0 = {}, verdict = {:?} (tail certified: {}, plateau: {})",
                outcome.e, outcome.n0, outcome.verdict, outcome.tail_certified, outcome.plateau_ok
            );
            for v in &outcome.violations {
                println!("  {v}");
            }
            Ok(if outcome.verdict == Verdict::Admissible {
                0
            } else {
                1
            })
        }
        Command::Sweep {
            problem,
            h1_range,
            quick,
            n_search_max,
        } => {
            let cfg_range = cfg.get("h1_range").cloned();
            let range_spec = h1_range.clone().or(cfg_range);
            let c = merged(problem.c, &cfg, "c")?
                .ok_or_else(|| CliError::Precondition("missing required parameter c".into()))?;
            let tau0 = merged(problem.tau0, &cfg, "tau0")?.unwrap_or(1.0);
            let grid = match range_spec {
                Some(spec) => parse_h1_range(&spec)?,
                None => vec![merged(problem.h1, &cfg, "h1")?.ok_or_else(|| {
                    CliError::Precondition("sweep needs --h1-range or --h1".into())
                })?],
            };
            let n_search = merged(*n_search_max, &cfg, "n_search_max")?.unwrap_or(4000);
            if *quick {
                let rows = a_sweep(c, &grid, 1e-12)?;
                let csv = out.join("sweep.csv");
                write_rate_csv(&csv, &rows)?;
                let mut man = Manifest::new(
                    "sweep",
                    Params::new(c, grid[0], 0.0, tau0).map_err(|e| {
                        CliError::Precondition(e.to_string())
                    })?,
                    None,
                    serde_json::json!({ "quick": true }),
                );
                man.add_output(&csv)?;
                man.write(out, "sweep.manifest.json")?;
                return Ok(0);
            }
            use rayon::prelude::*;
            let rows: Vec<Result<String, CliError>> = grid
                .par_iter()
                .map(|&h1| {
                    let params = Params::new(c, h1, 0.0, tau0)
                        .map_err(|e| CliError::Precondition(e.to_string()))?;
                    let table = assemble_constants(&params, None, &AssemblyOptions::default())?;
                    let report = find_n0(&table.with_e(1.05 * table.e0), n_search);
                    Ok(format!(
                        "{},{},{},{}",
                        crate::io::fmt17(h1),
                        crate::io::fmt17(table.a),
                        crate::io::fmt17(1.05 * table.e0),
                        report.n0.map(|n| n.to_string()).unwrap_or_else(|| "".into())
                    ))
                })
                .collect();
            let mut body = String::from("h1,a,E,n0\r\n");
            for r in rows {
                body.push_str(&r?);
                body.push_str("\r\n");
            }
            let csv = out.join("sweep.csv");
            fs::write(&csv, body)?;
            let mut man = Manifest::new(
                "sweep",
                Params::new(c, grid[0], 0.0, tau0)
                    .map_err(|e| CliError::Precondition(e.to_string()))?,
                None,
                serde_json::json!({ "quick": false, "n_search_max": n_search }),
            );
            man.add_output(&csv)?;
            man.write(out, "sweep.manifest.json")?;
            Ok(0)
        }
        Command::OracleCheck {
            problem,
            events,
            radius,
            dt,
        } => {
            let params = build_params(problem, &cfg)?;
            let events = merged(*events, &cfg, "events")?.unwrap_or(8);
            let radius = merged(*radius, &cfg, "radius")?.unwrap_or(40);
            let dt = merged(*dt, &cfg, "dt")?.unwrap_or(1e-3);
            let exact = simulate(&params, events, DEFAULT_ROOT_TOL)?;
            let t_end = exact.record_for(events).unwrap().t * 1.02;
            let approx = ode_oracle(&params, radius, t_end, dt)?;
            let mut worst = 0.0f64;
            let mut body = String::from("n,t_event,t_ode,rel_diff\r\n");
            for n in 1..=events {
                let te = exact.record_for(n).unwrap().t;
                let to = approx
                    .record_for(n)
                    .ok_or_else(|| {
                        CliError::Numerical(format!("integrator missed the switching of node {n}"))
                    })?
                    .t;
                let rel = (te - to).abs() / te;
                worst = worst.max(rel);
                body.push_str(&format!(
                    "{},{},{},{}\r\n",
                    n,
                    crate::io::fmt17(te),
                    crate::io::fmt17(to),
                    crate::io::fmt17(rel)
                ));
            }
            let csv = out.join("oracle.csv");
            fs::write(&csv, body)?;
            let mut man = Manifest::new(
                "oracle-check",
                params,
                Some(exact.a),
                serde_json::json!({ "radius": radius, "dt": dt, "events": events }),
            );
            man.add_output(&csv)?;
            man.write(out, "oracle-check.manifest.json")?;
            println!("worst relative difference over t_1..t_{events}: {worst:.3e}");
            Ok(if worst <= 1e-4 { 0 } else { 1 })
        }
    }
}
