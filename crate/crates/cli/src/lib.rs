//! The `spatial` command-line tool.

pub mod render;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use render::{render_svg, RenderSpec};
use serde_json::json;
use spatial_core::compiler::{compile, compile_exprs};
use spatial_core::fields::{Field, FieldType};
use spatial_core::lang::{parse, TypeContext};
use spatial_core::medium::{validate_doc, MediumDoc};
use spatial_core::runtime::{CircuitDef, Configuration, Engine, EngineKind, RunManifest};
use spatial_core::voronoi::{compare, oracle_vd, random_seeds, run_vd_with, DiffReport};
use spatial_core::SimplicialMedium;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
    #[error("{0}")]
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) | CliError::Mismatch(_) => 1,
        }
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "spatial", version, about = "Spatial computing on planar media")]
pub struct Cli {
    /// Seed for every random choice (isotropic media, random fields, seeds, skips).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate or validate media.
    #[command(subcommand)]
    Medium(MediumCmd),
    /// Compile an expression or a named circuit and report its cost.
    Compile(CompileArgs),
    /// Iterate a circuit to its fixpoint.
    Run(RunArgs),
    /// Grow seeds into a discrete Voronoi diagram.
    Voronoi(VoronoiArgs),
    /// Draw fields as SVG.
    Render(RenderArgs),
}

#[derive(Subcommand, Debug)]
enum MediumCmd {
    Gen {
        #[arg(long)]
        medium: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Validate { path: PathBuf },
}

#[derive(Args, Debug)]
struct CircuitArg {
    /// Update expression for layer `x`, e.g. `vd(x)`.
    #[arg(long, conflicts_with = "circuit", required_unless_present = "circuit")]
    expr: Option<String>,
    /// Named circuit: voronoi, growth, meet.
    #[arg(long)]
    circuit: Option<String>,
}

#[derive(Args, Debug)]
struct CompileArgs {
    #[command(flatten)]
    what: CircuitArg,
    #[arg(long, default_value = "hex:16x16")]
    medium: String,
    /// Emit the JSON cost report.
    #[arg(long)]
    report: bool,
    /// Add the gate list of this tile to the report.
    #[arg(long)]
    netlist: Option<u32>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    what: CircuitArg,
    #[arg(long, default_value = "hex:16x16")]
    medium: String,
    #[arg(long, value_enum, default_value = "gates")]
    engine: EngineArg,
    /// Initial `x` as a field dump; random otherwise.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Density of the random initial `x`.
    #[arg(long, default_value_t = 0.05)]
    density: f64,
    #[arg(long, default_value_t = 0.0)]
    skip_prob: f64,
    #[arg(long, default_value_t = 1000)]
    max_steps: u64,
    /// Directory receiving one dump per layer per step and `manifest.json`.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum EngineArg {
    Interpreter,
    Gates,
    BitParallel,
}

impl From<EngineArg> for EngineKind {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Interpreter => EngineKind::Interpreter,
            EngineArg::Gates => EngineKind::Gates,
            EngineArg::BitParallel => EngineKind::BitParallel,
        }
    }
}

#[derive(Args, Debug)]
struct VoronoiArgs {
    #[arg(long, default_value = "hex:16x16")]
    medium: String,
    /// JSON list of seed blobs, each a list of vertices.
    #[arg(long)]
    seeds: Option<PathBuf>,
    /// Number of random single-vertex seeds when no seed file is given.
    #[arg(long, default_value_t = 4)]
    num_seeds: usize,
    #[arg(long, default_value_t = 0.0)]
    skip_prob: f64,
    #[arg(long, default_value_t = 1000)]
    max_steps: u64,
    #[arg(long, value_enum, default_value = "gates")]
    engine: EngineArg,
    /// Directory receiving one dump per step and `manifest.json`.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Directory receiving one SVG frame per step.
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Check the fixpoint against the BFS oracle; exit 1 on any mismatch.
    #[arg(long)]
    compare_oracle: bool,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long)]
    medium: String,
    /// Field dump to paint, as `PATH` or `PATH=COLOR`; repeatable.
    #[arg(long = "field")]
    fields: Vec<String>,
    /// Outline the transfer-point subdivision.
    #[arg(long)]
    transfer: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Builds a medium from `hex:COLSxROWS`, `iso:N[:RELAX]` or a JSON file path.
pub fn parse_medium(spec: &str, seed: u64) -> Result<SimplicialMedium, CliError> {
    if let Some(dims) = spec.strip_prefix("hex:") {
        let (c, r) = dims.split_once('x').ok_or_else(|| usage(format!("bad hex medium {spec:?}")))?;
        let c: usize = c.parse().map_err(|_| usage(format!("bad column count in {spec:?}")))?;
        let r: usize = r.parse().map_err(|_| usage(format!("bad row count in {spec:?}")))?;
        return SimplicialMedium::hex_torus(c, r).map_err(usage);
    }
    if let Some(rest) = spec.strip_prefix("iso:").or_else(|| spec.strip_prefix("isotropic:")) {
        let mut parts = rest.split(':');
        let n: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| usage(format!("bad point count in {spec:?}")))?;
        let relax: usize = match parts.next() {
            Some(s) => s.parse().map_err(|_| usage(format!("bad relaxation count in {spec:?}")))?,
            None => 10,
        };
        return SimplicialMedium::isotropic(n, seed, relax).map_err(usage);
    }
    let text = std::fs::read_to_string(spec).map_err(|e| usage(format!("medium {spec:?}: {e}")))?;
    SimplicialMedium::from_json(&text).map_err(failed)
}

fn circuit_def(a: &CircuitArg) -> Result<CircuitDef, CliError> {
    if let Some(src) = &a.expr {
        let e = parse(src).map_err(|e| usage(format!("expression: {e}")))?;
        return Ok(CircuitDef::single("x", e));
    }
    match a.circuit.as_deref() {
        Some("voronoi") => Ok(CircuitDef::voronoi()),
        Some("growth") => Ok(CircuitDef::growth(1)),
        Some("meet") => Ok(CircuitDef::meet_v()),
        Some(other) => Err(usage(format!("unknown circuit {other:?} (voronoi, growth, meet)"))),
        None => Err(usage("one of --expr or --circuit is required")),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| failed(format!("{}: {e}", path.display())))
}

fn make_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| failed(format!("{}: {e}", path.display())))
}

fn load_field(path: &Path, m: &SimplicialMedium) -> Result<Field, CliError> {
    let bytes = std::fs::read(path).map_err(|e| failed(format!("{}: {e}", path.display())))?;
    let (hash, f) = Field::load(&bytes).map_err(|e| failed(format!("{}: {e}", path.display())))?;
    if hash != m.medium_hash() {
        return Err(failed(format!("{} was dumped on a different medium", path.display())));
    }
    Ok(f)
}

fn emit(json: bool, value: &serde_json::Value, text: String) -> String {
    if json {
        format!("{}\n", serde_json::to_string_pretty(value).expect("JSON value serializes"))
    } else {
        text
    }
}

fn cmd_medium(cli: &Cli, cmd: &MediumCmd) -> Result<String, CliError> {
    match cmd {
        MediumCmd::Gen { medium, out } => {
            let m = parse_medium(medium, cli.seed)?;
            let doc = m.to_json();
            match out {
                Some(p) => {
                    write_file(p, doc.as_bytes())?;
                    let v = json!({
                        "path": p.display().to_string(),
                        "vertices": m.num_vertices(),
                        "medium_hash": hex::encode(m.medium_hash()),
                    });
                    Ok(emit(cli.json, &v, format!("wrote {} ({} vertices)\n", p.display(), m.num_vertices())))
                }
                None => Ok(format!("{doc}\n")),
            }
        }
        MediumCmd::Validate { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| failed(format!("{}: {e}", path.display())))?;
            let doc: MediumDoc = serde_json::from_str(&text).map_err(|e| failed(format!("{}: {e}", path.display())))?;
            let mut report = validate_doc(&doc);
            if report.passed {
                if let Err(e) = SimplicialMedium::from_doc(&doc) {
                    report.passed = false;
                    report.failures.push(e.to_string());
                }
            }
            let v = serde_json::to_value(&report).expect("report serializes");
            let text = if report.passed {
                "valid\n".to_string()
            } else {
                format!("invalid:\n  {}\n", report.failures.join("\n  "))
            };
            let out = emit(cli.json, &v, text);
            if report.passed {
                Ok(out)
            } else {
                Err(CliError::Mismatch(out))
            }
        }
    }
}

fn cmd_compile(cli: &Cli, a: &CompileArgs) -> Result<String, CliError> {
    let m = parse_medium(&a.medium, cli.seed)?;
    let cc = match &a.what.expr {
        Some(src) => {
            let e = parse(src).map_err(|e| usage(format!("expression: {e}")))?;
            compile_exprs(&[e], &m, true).map_err(usage)?
        }
        None => {
            let def = circuit_def(&a.what)?;
            compile(&def, &m).map_err(usage)?
        }
    };
    let report = cc.report(&m);
    let mut v = serde_json::to_value(&report).expect("report serializes");
    if let Some(tile) = a.netlist {
        if tile as usize >= cc.num_tiles() {
            return Err(usage(format!("tile {tile} out of range")));
        }
        v["netlist"] = serde_json::to_value(cc.netlist_dump(tile)).expect("netlist serializes");
    }
    let text = format!(
        "{} gates per tile ({} total), radius {}, {} trans-wires per tile\n",
        report.gates_per_tile, report.gates_total, report.radius, report.transwires_per_tile
    );
    Ok(emit(cli.json || a.report, &v, text))
}

fn manifest(m: &SimplicialMedium, seed: u64, skip: f64, kind: EngineKind, t_c: Option<u64>, steps: u64, def: &CircuitDef) -> RunManifest {
    RunManifest {
        seed,
        skip_prob: skip,
        t_c,
        steps,
        engine: kind,
        medium_hash: hex::encode(m.medium_hash()),
        layers: def.layers.iter().map(|l| l.name.clone()).collect(),
    }
}

fn check_prob(p: f64) -> Result<(), CliError> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(usage(format!("probability {p} outside [0, 1)")))
    }
}

fn cmd_run(cli: &Cli, a: &RunArgs) -> Result<String, CliError> {
    check_prob(a.skip_prob)?;
    check_prob(a.density)?;
    let m = parse_medium(&a.medium, cli.seed)?;
    let def = circuit_def(&a.what)?;
    def.validate(&TypeContext::of(&m)).map_err(usage)?;
    let kind = EngineKind::from(a.engine);
    let engine = Engine::new(&m, def.clone(), kind).map_err(usage)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let mut layers = Vec::new();
    for (i, l) in def.layers.iter().enumerate() {
        let f = match &a.init {
            Some(p) if i == 0 => load_field(p, &m)?,
            _ if i == 0 && l.ty == FieldType::bool_v() => Field::random_with(&m, l.ty, &mut rng, a.density),
            _ => Field::zeros(&m, l.ty),
        };
        layers.push((l.name.clone(), f));
    }
    let hash = m.medium_hash();
    if let Some(dir) = &a.trace {
        make_dir(dir)?;
    }
    let mut io_err = None;
    let out = engine
        .run_traced(&Configuration::new(layers), a.max_steps, a.skip_prob, &mut rng, |c| {
            if let Some(dir) = &a.trace {
                for (name, f) in &c.layers {
                    let p = dir.join(format!("t{:05}_{name}.field", c.t));
                    if let Err(e) = write_file(&p, &f.dump(&hash)) {
                        io_err.get_or_insert(e);
                    }
                }
            }
        })
        .map_err(usage)?;
    if let Some(e) = io_err {
        return Err(e);
    }
    let man = manifest(&m, cli.seed, a.skip_prob, kind, out.t_c, out.steps, &def);
    let v = serde_json::to_value(&man).expect("manifest serializes");
    if let Some(dir) = &a.trace {
        write_file(&dir.join("manifest.json"), serde_json::to_string_pretty(&v).unwrap().as_bytes())?;
    }
    let text = match out.t_c {
        Some(t) => format!("fixpoint at t_c = {t}, {} filled\n", out.config.main().popcount()),
        None => format!("no fixpoint within {} steps\n", a.max_steps),
    };
    let s = emit(cli.json, &v, text);
    if out.timed_out() {
        Err(CliError::Mismatch(s))
    } else {
        Ok(s)
    }
}

fn diff_json(d: &DiffReport) -> serde_json::Value {
    json!({
        "exact": d.is_exact(),
        "missing": d.missing,
        "extra": d.extra,
        "misassigned": d.misassigned,
        "multi_in_cells": d.multi_in_cells,
    })
}

/// Paints one frame: grown vertices in blue, the seeds in red.
fn frame(m: &SimplicialMedium, x: &Field, seeds: &Field) -> Result<String, CliError> {
    render_svg(&RenderSpec {
        medium: m,
        fields: vec![(x.clone(), "#4f81bd".into()), (seeds.clone(), "#c0504d".into())],
        transfer: false,
    })
    .map_err(failed)
}

fn cmd_voronoi(cli: &Cli, a: &VoronoiArgs) -> Result<String, CliError> {
    check_prob(a.skip_prob)?;
    let m = parse_medium(&a.medium, cli.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let seeds: Vec<Vec<u32>> = match &a.seeds {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| failed(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("seed file {}: {e}", p.display())))?
        }
        None => random_seeds(&m, a.num_seeds, 4, &mut rng),
    };
    let kind = EngineKind::from(a.engine);
    let def = CircuitDef::voronoi();
    let engine = Engine::new(&m, def.clone(), kind).map_err(usage)?;
    for dir in [&a.trace, &a.frames].into_iter().flatten() {
        make_dir(dir)?;
    }
    let hash = m.medium_hash();
    let seed_field = Field::from_points(&m, FieldType::bool_v(), &seeds.concat()).map_err(usage)?;
    let mut io_err = None;
    let run = run_vd_with(&engine, &m, &seeds, a.skip_prob, &mut rng, a.max_steps, |c| {
        let x = c.main();
        let step = || -> Result<(), CliError> {
            if let Some(dir) = &a.trace {
                write_file(&dir.join(format!("t{:05}_x.field", c.t)), &x.dump(&hash))?;
            }
            if let Some(dir) = &a.frames {
                write_file(&dir.join(format!("t{:05}.svg", c.t)), frame(&m, x, &seed_field)?.as_bytes())?;
            }
            Ok(())
        };
        if let Err(e) = step() {
            io_err.get_or_insert(e);
        }
    })
    .map_err(|e| usage(format!("voronoi: {e}")))?;
    if let Some(e) = io_err {
        return Err(e);
    }
    if let Some(dir) = &a.trace {
        let man = manifest(&m, cli.seed, a.skip_prob, kind, Some(run.t_c), run.t_c, &def);
        write_file(&dir.join("manifest.json"), serde_json::to_string_pretty(&man).unwrap().as_bytes())?;
    }
    let mut v = json!({
        "seeds": run.seeds,
        "t_c": run.t_c,
        "filled": run.final_field.popcount(),
        "blobs_conserved": run.blobs_conserved(),
        "monotone": run.monotone,
        "vertex_vd": run.vertex_vd.popcount(),
        "multi_vertices": run.multi_vertices.true_points(),
    });
    let mut text = format!(
        "t_c = {}, {} filled, blobs {}\n",
        run.t_c,
        run.final_field.popcount(),
        if run.blobs_conserved() { "conserved" } else { "MERGED" }
    );
    let mut ok = run.blobs_conserved();
    if a.compare_oracle {
        let oracle = oracle_vd(&m, &seeds).map_err(usage)?;
        let d = compare(&run, &oracle);
        text += &format!(
            "oracle: {} ({} missing, {} extra, {} misassigned)\n",
            if d.is_exact() { "exact" } else { "MISMATCH" },
            d.missing.len(),
            d.extra.len(),
            d.misassigned.len()
        );
        ok &= d.is_exact();
        v["oracle"] = diff_json(&d);
    }
    let s = emit(cli.json, &v, text);
    if ok {
        Ok(s)
    } else {
        Err(CliError::Mismatch(s))
    }
}

fn cmd_render(cli: &Cli, a: &RenderArgs) -> Result<String, CliError> {
    let m = parse_medium(&a.medium, cli.seed)?;
    let mut fields = Vec::new();
    for spec in &a.fields {
        let (path, color) = spec.split_once('=').unwrap_or((spec, "#4f81bd"));
        if !render::valid_color(color) {
            return Err(usage(format!("invalid color {color:?}")));
        }
        fields.push((load_field(Path::new(path), &m)?, color.to_string()));
    }
    let svg = render_svg(&RenderSpec {
        medium: &m,
        fields,
        transfer: a.transfer,
    })
    .map_err(usage)?;
    match &a.out {
        Some(p) => {
            write_file(p, svg.as_bytes())?;
            let v = json!({ "path": p.display().to_string(), "bytes": svg.len() });
            Ok(emit(cli.json, &v, format!("wrote {}\n", p.display())))
        }
        None => Ok(svg),
    }
}

pub fn execute(cli: &Cli) -> Result<String, CliError> {
    match &cli.cmd {
        Command::Medium(c) => cmd_medium(cli, c),
        Command::Compile(a) => cmd_compile(cli, a),
        Command::Run(a) => cmd_run(cli, a),
        Command::Voronoi(a) => cmd_voronoi(cli, a),
        Command::Render(a) => cmd_render(cli, a),
    }
}

/// Runs the tool on `argv` (program name first) and returns the exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(CliError::Mismatch(out)) => {
            print!("{out}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
