//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::branches::SortKey;
use crate::config::RunConfig;
use crate::dynamics::evolve_loop;
use crate::error::{Error, Result};
use crate::family::MatrixFamily;
use crate::homotopy::{freely_conjugate, loop_class, verdict, BASEPOINT_TOL};
use crate::output::{write_atomic, write_json};
use crate::perm::exchange_relation;
use crate::repro::{eps_json, paper_repro};
use crate::singular::{map_cuts_with, search_eps, Atlas};
use crate::svg::{emit_plot, Plot};
use crate::tracker::{trace_path, TrackOptions};

/// Exit status for a paper-repro mismatch.
pub const EXIT_MISMATCH: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "epwind", version, about = "Exceptional points, branch cuts and loop braiding of non-Hermitian matrix families")]
pub struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Grid resolution for EP and cut scans.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Eigenvalue sort key.
    #[arg(long, global = true, value_parser = parse_key)]
    pub key: Option<SortKey>,
    /// Angular speed for `evolve`; overrides the configuration.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub omega: Option<f64>,
    /// One-based start state for `evolve`.
    #[arg(long, global = true, default_value_t = 1)]
    pub start: usize,
    /// What to print on standard output.
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Locate and classify exceptional points.
    FindEps,
    /// Build the branch-cut atlas and plot it.
    MapCuts,
    /// Follow the eigenvalues along a named loop.
    TraceLoop { name: String },
    /// Compare two loops: based and free homotopy.
    Classify { first: String, second: String },
    /// Integrate the state equation along a named loop.
    Evolve { name: String },
    /// Recompute the reference results and print a pass/fail table.
    PaperRepro,
}

fn parse_key(s: &str) -> std::result::Result<SortKey, String> {
    serde_json::from_value(json!(s)).map_err(|_| format!("unknown key `{s}` (re_asc, re_desc, im_asc, im_desc)"))
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

/// Parses `argv` (including the program name), runs the command and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(g) = cli.grid {
        cfg.grid_n = g;
    }
    if let Some(k) = cli.key {
        cfg.key = k;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    print(&serde_json::to_string_pretty(v)?)
}

fn build_atlas(f: &MatrixFamily, cfg: &RunConfig) -> Result<Atlas> {
    let search = search_eps(f, &cfg.region, cfg.grid_n, cfg.key)?;
    for d in &search.dropped {
        eprintln!("warning: dropped EP seed at {}: {}", d.seed, d.reason);
    }
    map_cuts_with(f, &cfg.region, cfg.grid_n, cfg.key, search.eps)
}

fn execute(cli: &Cli) -> Result<i32> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::FindEps => find_eps_cmd(cli, &cfg),
        Command::MapCuts => map_cuts_cmd(cli, &cfg),
        Command::TraceLoop { name } => trace_cmd(cli, &cfg, name),
        Command::Classify { first, second } => classify_cmd(cli, &cfg, first, second),
        Command::Evolve { name } => evolve_cmd(cli, &cfg, name, cli.start, cli.omega),
        Command::PaperRepro => repro_cmd(cli, &cfg.out),
    }
}

fn find_eps_cmd(cli: &Cli, cfg: &RunConfig) -> Result<i32> {
    let f = cfg.family()?;
    let search = search_eps(&f, &cfg.region, cfg.grid_n, cfg.key)?;
    for d in &search.dropped {
        eprintln!("warning: dropped EP seed at {}: {}", d.seed, d.reason);
    }
    let atlas = Atlas { eps: search.eps, ..empty_atlas(cfg) };
    let v = eps_json(&atlas);
    write_json(&cfg.out.join("eps.json"), &v)?;
    match cli.format {
        Format::Json => print_json(&v)?,
        Format::Csv => {
            let mut s = String::from("re,im,order,cycle,residual\n");
            for e in &atlas.eps {
                s.push_str(&format!("{:.12e},{:.12e},{},\"{}\",{:.3e}\n", e.location.re, e.location.im, e.order, e.cycle, e.residual));
            }
            print(&s)?;
        }
    }
    Ok(0)
}

fn empty_atlas(cfg: &RunConfig) -> Atlas {
    Atlas {
        region: cfg.region,
        grid_n: cfg.grid_n,
        key: cfg.key,
        eps: Vec::new(),
        cuts: Vec::new(),
        junctions: Vec::new(),
        skipped_edges: 0,
    }
}

fn map_cuts_cmd(cli: &Cli, cfg: &RunConfig) -> Result<i32> {
    let f = cfg.family()?;
    let atlas = build_atlas(&f, cfg)?;
    let v = atlas.to_json();
    write_json(&cfg.out.join("atlas.json"), &v)?;
    emit_plot(&Plot::Atlas { atlas: &atlas, loops: &[] }, &cfg.out.join("atlas.svg"))?;
    for check in atlas.commutation_checks().iter().filter(|c| !c.commutes) {
        eprintln!("warning: cuts {} and {} meet at {} but do not commute", check.cuts.0, check.cuts.1, check.at);
    }
    match cli.format {
        Format::Json => print_json(&v)?,
        Format::Csv => {
            let mut s = String::from("id,perm,points,length\n");
            for c in &atlas.cuts {
                s.push_str(&format!("{},\"{}\",{},{:.6}\n", c.id, c.perm, c.points.len(), c.length()));
            }
            print(&s)?;
        }
    }
    Ok(0)
}

fn trace_cmd(cli: &Cli, cfg: &RunConfig, name: &str) -> Result<i32> {
    let f = cfg.family()?;
    let path = cfg.find_loop(name)?;
    let mut traj = trace_path(&f, &path, cfg.key, &TrackOptions::default())?;
    let atlas = build_atlas(&f, cfg)?;
    atlas.label(&mut traj)?;
    let word = traj.crossing_word()?;
    let mut csv = Vec::new();
    traj.write_csv(&mut csv)?;
    write_atomic(&cfg.out.join(format!("{name}.csv")), &csv)?;
    write_json(&cfg.out.join(format!("{name}.events.json")), &traj.events_json())?;
    emit_plot(&Plot::Trajectory(&traj), &cfg.out.join(format!("{name}.svg")))?;
    let loops = vec![(name.to_string(), path.polyline(400).into_iter().map(|(_, z)| z).collect())];
    emit_plot(&Plot::Atlas { atlas: &atlas, loops: &loops }, &cfg.out.join(format!("{name}.atlas.svg")))?;
    match cli.format {
        Format::Json => print_json(&json!({
            "loop": name,
            "word": word.to_string(),
            "net_matrix": traj.net_matrix().to_dense(),
            "exchange": exchange_relation(&traj.net_matrix()).to_string(),
            "events": traj.events_json(),
        }))?,
        Format::Csv => print(&String::from_utf8_lossy(&csv))?,
    }
    Ok(0)
}

fn classify_cmd(cli: &Cli, cfg: &RunConfig, first: &str, second: &str) -> Result<i32> {
    let f = cfg.family()?;
    let (p1, p2) = (cfg.find_loop(first)?, cfg.find_loop(second)?);
    let atlas = build_atlas(&f, cfg)?;
    let (a, b) = (loop_class(&f, &p1, &atlas)?, loop_class(&f, &p2, &atlas)?);
    let same_base = (p1.basepoint() - p2.basepoint()).norm() <= BASEPOINT_TOL;
    let based = if same_base { verdict(&a, &b)?.to_string() } else { "not_comparable".to_string() };
    let free = freely_conjugate(&p1, &p2, &atlas)?;
    let v = json!({
        "loops": [first, second],
        "words": [a.word.to_string(), b.word.to_string()],
        "exchanges": [exchange_relation(&a.net).to_string(), exchange_relation(&b.net).to_string()],
        "based": based,
        "free": free,
    });
    write_json(&cfg.out.join(format!("classify_{first}_{second}.json")), &v)?;
    match cli.format {
        Format::Json => print_json(&v)?,
        Format::Csv => print(&format!(
            "first,second,word_first,word_second,based,free\n{first},{second},{},{},{based},{free}\n",
            a.word, b.word
        ))?,
    }
    Ok(0)
}

fn evolve_cmd(cli: &Cli, cfg: &RunConfig, name: &str, start: usize, omega: Option<f64>) -> Result<i32> {
    let f = cfg.family()?;
    let path = cfg.find_loop(name)?;
    let mut ev = cfg.evolution_config();
    if let Some(w) = omega {
        ev.omega = w;
    }
    if start == 0 || start > f.dim() {
        return Err(Error::Config(format!("start state must be in 1..={}", f.dim())));
    }
    let r = evolve_loop(&f, &path, start, &ev)?;
    let mut csv = Vec::new();
    r.write_csv(&mut csv)?;
    let stem = format!("{name}_s{start}");
    write_atomic(&cfg.out.join(format!("{stem}.csv")), &csv)?;
    let mut summary = r.summary_json(name)?;
    summary["margin"] = json!(r.margin());
    write_json(&cfg.out.join(format!("{stem}.summary.json")), &summary)?;
    if r.near_defective {
        eprintln!("warning: eigenbasis at the end point is close to defective; projection may be ill-conditioned");
    }
    match cli.format {
        Format::Json => print_json(&summary)?,
        Format::Csv => print(&String::from_utf8_lossy(&csv))?,
    }
    Ok(0)
}

fn repro_cmd(cli: &Cli, out: &FsPath) -> Result<i32> {
    let report = paper_repro(Some(out))?;
    match cli.format {
        Format::Json => print(&report.table())?,
        Format::Csv => {
            let mut s = String::from("id,status,claim,expected,computed\n");
            for c in &report.checks {
                let status = if c.pass { "PASS" } else { "MISMATCH" };
                s.push_str(&format!("{},{status},\"{}\",\"{}\",\"{}\"\n", c.id, c.claim, c.expected, c.computed));
            }
            print(&s)?;
        }
    }
    if report.all_pass() {
        Ok(0)
    } else {
        for c in report.failures() {
            eprintln!("MISMATCH {}: {} (expected {}, computed {})", c.id, c.claim, c.expected, c.computed);
        }
        Ok(EXIT_MISMATCH)
    }
}
