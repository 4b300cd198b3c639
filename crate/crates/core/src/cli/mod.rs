//! Command-line front end: reads fields, tessellates, derives `w`, extracts,
//! verifies and exports curves.
//!
//! Exit codes: 0 on success, 1 on usage, I/O or format errors, 2 when the
//! fraction of degenerate cells exceeds `--max-degenerate-fraction` or the
//! oracle can only report a degenerate verdict, 3 when verification disagrees.

pub mod io;

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::extraction::{extract, DiagnosticKind, Extraction, ExtractionError, Tolerances};
use crate::mesh::{tessellate_grid_with, MeshError, TetMesh, VertexField};
use crate::oracle::{verify_segments, OracleReport, Verdict, DEFAULT_RESIDUAL_THRESHOLD};
use crate::registry;
use io::FormatError;

#[derive(Debug, Parser)]
#[command(name = "pvcurve", version, about = "Exact parallel-vector curves on tetrahedral meshes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract curves and write them as polylines.
    Extract(ExtractArgs),
    /// Extract curves and check them against the brute-force oracle.
    Verify(VerifyArgs),
    /// Print mesh statistics and the available strategies.
    TessellateInfo(InputArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// ASCII tetrahedral mesh with inline fields.
    #[arg(long, conflicts_with_all = ["grid", "v", "w"])]
    pub mesh: Option<PathBuf>,
    /// 60-byte grid header (dims, spacing, origin).
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Raw little-endian field file for `v` on the grid.
    #[arg(long)]
    pub v: Option<PathBuf>,
    /// Raw little-endian field file for `w` on the grid.
    #[arg(long, conflicts_with = "derive")]
    pub w: Option<PathBuf>,
    /// Derive `w` from `v` instead of reading it.
    #[arg(long)]
    pub derive: Option<String>,
    /// Cube subdivision used for grid input.
    #[arg(long, default_value = "freudenthal")]
    pub tessellation: String,
}

#[derive(Debug, Clone, Args)]
pub struct ToleranceArgs {
    #[arg(long, default_value_t = Tolerances::default().eps_root)]
    pub eps_root: f64,
    #[arg(long, default_value_t = Tolerances::default().eps_match)]
    pub eps_match: f64,
    #[arg(long, default_value_t = Tolerances::default().eps_pos_rel)]
    pub eps_pos_rel: f64,
    #[arg(long, default_value_t = Tolerances::default().max_chord_error)]
    pub max_chord_error: f64,
    /// Oracle flag threshold on the normalized residual.
    #[arg(long, default_value_t = DEFAULT_RESIDUAL_THRESHOLD)]
    pub residual_threshold: f64,
    /// Largest tolerated fraction of degenerate cells.
    #[arg(long, default_value_t = 0.5)]
    pub max_degenerate_fraction: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub tol: ToleranceArgs,
    /// Polyline output; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Diagnostics output.
    #[arg(long)]
    pub diag: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub tol: ToleranceArgs,
    /// Report output (JSON); standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub diag: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Lattice subdivisions per tet edge.
    #[arg(long, default_value_t = 100)]
    pub grid_n: usize,
    /// Number of evenly spaced cells to check; all cells when absent.
    #[arg(long)]
    pub subsample: Option<usize>,
    #[arg(long, default_value = "verify")]
    pub case_id: String,
    /// Drops the segments of the first cell that has any before verifying.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

/// Where `w` comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum WSource {
    File(PathBuf),
    Inline,
    Derived(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    Grid { header: PathBuf, v: Option<PathBuf> },
    Mesh(PathBuf),
}

/// Resolved, validated job description.
#[derive(Debug, Clone)]
pub struct JobConfig {
    pub input: InputSource,
    pub w: Option<WSource>,
    pub tessellation: String,
    pub tolerances: Tolerances,
    pub residual_threshold: f64,
    pub max_degenerate_fraction: f64,
    pub workers: usize,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("invalid mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("extraction failed: {0}")]
    Extraction(#[from] ExtractionError),
    #[error("{count} of {total} cells are degenerate, above the limit of {limit}; first cells: {first}")]
    TooDegenerate {
        count: usize,
        total: usize,
        limit: f64,
        first: String,
    },
    #[error("oracle disagrees: {0}")]
    Disagree(String),
    #[error("oracle verdict is degenerate: {0}")]
    DegenerateVerdict(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Format(_) | CliError::Mesh(_) | CliError::Extraction(_) => 1,
            CliError::TooDegenerate { .. } | CliError::DegenerateVerdict(_) => 2,
            CliError::Disagree(_) => 3,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl JobConfig {
    pub fn from_args(input: &InputArgs, tol: &ToleranceArgs, workers: usize, need_w: bool) -> Result<Self, CliError> {
        let source = match (&input.mesh, &input.grid) {
            (Some(m), None) => InputSource::Mesh(m.clone()),
            (None, Some(g)) => InputSource::Grid {
                header: g.clone(),
                v: input.v.clone(),
            },
            _ => return Err(usage("exactly one of --mesh or --grid is required")),
        };
        let w = match (&source, &input.w, &input.derive) {
            (_, Some(_), Some(_)) => return Err(usage("--w and --derive are mutually exclusive")),
            (_, _, Some(d)) => {
                if registry::derived_field(d).is_none() {
                    let names: Vec<_> = registry::derived_fields().iter().map(|d| d.name()).collect();
                    return Err(usage(format!("unknown derived field {d:?}; available: {}", names.join(", "))));
                }
                Some(WSource::Derived(d.clone()))
            }
            (InputSource::Grid { .. }, Some(w), None) => Some(WSource::File(w.clone())),
            (InputSource::Mesh(_), _, None) => Some(WSource::Inline),
            (InputSource::Grid { .. }, None, None) => None,
        };
        if need_w {
            if let InputSource::Grid { v: None, .. } = source {
                return Err(usage("--v is required with --grid"));
            }
            if w.is_none() {
                return Err(usage("a w source is required: --w or --derive"));
            }
        }
        if registry::tessellation(&input.tessellation).is_none() {
            let names: Vec<_> = registry::tessellations().iter().map(|t| t.name()).collect();
            return Err(usage(format!(
                "unknown tessellation {:?}; available: {}",
                input.tessellation,
                names.join(", ")
            )));
        }
        let tolerances = Tolerances {
            eps_root: tol.eps_root,
            eps_match: tol.eps_match,
            eps_pos_rel: tol.eps_pos_rel,
            max_chord_error: tol.max_chord_error,
        };
        for (name, x) in [
            ("--eps-root", tol.eps_root),
            ("--eps-match", tol.eps_match),
            ("--eps-pos-rel", tol.eps_pos_rel),
            ("--max-chord-error", tol.max_chord_error),
            ("--residual-threshold", tol.residual_threshold),
        ] {
            if !(x.is_finite() && x > 0.0) {
                return Err(usage(format!("{name} must be positive, got {x}")));
            }
        }
        if !(0.0..=1.0).contains(&tol.max_degenerate_fraction) {
            return Err(usage("--max-degenerate-fraction must lie in [0, 1]"));
        }
        Ok(JobConfig {
            input: source,
            w,
            tessellation: input.tessellation.clone(),
            tolerances,
            residual_threshold: tol.residual_threshold,
            max_degenerate_fraction: tol.max_degenerate_fraction,
            workers,
        })
    }
}

/// A mesh with its fields; `v` and `w` are absent when not requested.
pub struct Job {
    pub mesh: TetMesh,
    pub v: Option<VertexField>,
    pub w: Option<VertexField>,
    pub tessellation: Option<String>,
}

pub fn load(cfg: &JobConfig) -> Result<Job, CliError> {
    let (mesh, v, w, tessellation) = match &cfg.input {
        InputSource::Grid { header, v } => {
            let grid = io::parse_grid_header(header, &io::read_file(header)?)?;
            let n = grid.vertex_count();
            let mut fields = Vec::new();
            if let Some(v) = v {
                fields.push(io::parse_raw_field(v, &io::read_file(v)?, n)?);
            }
            if let Some(WSource::File(w)) = &cfg.w {
                fields.push(io::parse_raw_field(w, &io::read_file(w)?, n)?);
            }
            let scheme = registry::tessellation(&cfg.tessellation).expect("validated");
            let (mesh, mut fields) = tessellate_grid_with(scheme.as_ref(), &grid, fields)?;
            let w = matches!(cfg.w, Some(WSource::File(_))).then(|| fields.pop().unwrap());
            let v = fields.pop();
            (mesh, v, w, Some(cfg.tessellation.clone()))
        }
        InputSource::Mesh(path) => {
            let m = io::parse_ascii_mesh(path, &io::read_file(path)?)?;
            let mesh = TetMesh::new(m.vertices, m.tets)?;
            m.v.validate(&mesh)?;
            let w = match (&cfg.w, m.w) {
                (Some(WSource::Inline), Some(w)) => {
                    w.validate(&mesh)?;
                    Some(w)
                }
                (Some(WSource::Inline), None) => {
                    return Err(usage(format!("{}: no w block and no --derive", path.display())))
                }
                (Some(WSource::Derived(_)), Some(_)) => {
                    return Err(usage(format!("{}: has a w block, so --derive is ambiguous", path.display())))
                }
                _ => None,
            };
            (mesh, Some(m.v), w, None)
        }
    };
    let w = match (&cfg.w, w, &v) {
        (Some(WSource::Derived(name)), _, Some(v)) => {
            let d = registry::derived_field(name).expect("validated");
            Some(d.derive(&mesh, v)?)
        }
        (_, w, _) => w,
    };
    Ok(Job { mesh, v, w, tessellation })
}

fn thread_pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool")
}

fn check_degeneracy(cfg: &JobConfig, mesh: &TetMesh, ex: &Extraction) -> Result<(), CliError> {
    let total = mesh.tet_count();
    if ex.degenerate_cells as f64 > cfg.max_degenerate_fraction * total as f64 {
        let ids: Vec<String> = ex
            .diagnostics
            .iter()
            .filter(|d| d.kind == DiagnosticKind::DegenerateCell)
            .take(8)
            .map(|d| d.id.to_string())
            .collect();
        return Err(CliError::TooDegenerate {
            count: ex.degenerate_cells,
            total,
            limit: cfg.max_degenerate_fraction,
            first: ids.join(", "),
        });
    }
    Ok(())
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => io::write_file(p, text.as_bytes())?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| FormatError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })?;
        }
    }
    Ok(())
}

fn run_extraction(cfg: &JobConfig, job: &Job, diag: Option<&Path>) -> Result<Extraction, CliError> {
    let (v, w) = (job.v.as_ref().unwrap(), job.w.as_ref().unwrap());
    let ex = thread_pool(cfg.workers).install(|| extract(&job.mesh, v, w, &cfg.tolerances))?;
    if let Some(d) = diag {
        io::write_file(d, io::format_diagnostics(&ex, job.mesh.tet_count()).as_bytes())?;
    }
    eprintln!(
        "{} curves from {} segments; {} degenerate cells of {}",
        ex.curves.len(),
        ex.segments.len(),
        ex.degenerate_cells,
        job.mesh.tet_count()
    );
    Ok(ex)
}

pub fn run_extract(args: &ExtractArgs) -> Result<(), CliError> {
    let cfg = JobConfig::from_args(&args.input, &args.tol, args.workers, true)?;
    let job = load(&cfg)?;
    let ex = run_extraction(&cfg, &job, args.diag.as_deref())?;
    emit(args.out.as_deref(), &io::format_polylines(&ex.curves))?;
    check_degeneracy(&cfg, &job.mesh, &ex)
}

/// Evenly spaced cell ids, all cells when `count` covers the mesh.
pub fn subsample(total: usize, count: Option<usize>) -> Vec<usize> {
    match count {
        Some(n) if n < total => (0..n).map(|i| i * total / n).collect(),
        _ => (0..total).collect(),
    }
}

pub fn run_verify(args: &VerifyArgs) -> Result<OracleReport, CliError> {
    let cfg = JobConfig::from_args(&args.input, &args.tol, args.workers, true)?;
    if args.grid_n < 10 {
        return Err(usage("--grid-n must be at least 10"));
    }
    let job = load(&cfg)?;
    let mut ex = run_extraction(&cfg, &job, args.diag.as_deref())?;
    check_degeneracy(&cfg, &job.mesh, &ex)?;
    if args.inject_fault {
        if let Some(t) = ex.segments.first().map(|s| s.tet_id) {
            ex.segments.retain(|s| s.tet_id != t);
        }
    }
    let cells = subsample(job.mesh.tet_count(), args.subsample);
    let (v, w) = (job.v.as_ref().unwrap(), job.w.as_ref().unwrap());
    let report = thread_pool(cfg.workers).install(|| {
        verify_segments(
            &args.case_id,
            &job.mesh,
            v,
            w,
            &ex.segments,
            args.grid_n,
            cfg.residual_threshold,
            Some(&cells),
        )
    });
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    emit(args.out.as_deref(), &(json + "\n"))?;
    let summary = format!(
        "{} cells, {} unmatched clusters, {} unmatched segments",
        cells.len(),
        report.unmatched_clusters,
        report.unmatched_segments
    );
    match report.verdict {
        Verdict::Agree => Ok(report),
        Verdict::Disagree => Err(CliError::Disagree(summary)),
        Verdict::Degenerate => Err(CliError::DegenerateVerdict(summary)),
    }
}

pub fn tessellate_info(input: &InputArgs) -> Result<String, CliError> {
    let cfg = JobConfig::from_args(input, &ToleranceArgs::default(), 1, false)?;
    let job = load(&cfg)?;
    let mesh = &job.mesh;
    let volumes: Vec<f64> = (0..mesh.tet_count()).map(|t| mesh.tet_volume(t)).collect();
    let boundary = mesh.faces().iter().filter(|f| f.is_boundary()).count();
    let mut out = String::new();
    use std::fmt::Write as _;
    writeln!(out, "tessellation {}", job.tessellation.as_deref().unwrap_or("none")).unwrap();
    writeln!(out, "vertices {}", mesh.vertex_count()).unwrap();
    writeln!(out, "tets {}", mesh.tet_count()).unwrap();
    writeln!(out, "faces {}", mesh.faces().len()).unwrap();
    writeln!(out, "boundary-faces {boundary}").unwrap();
    writeln!(out, "diameter {}", mesh.diameter()).unwrap();
    writeln!(out, "min-volume {}", volumes.iter().copied().fold(f64::INFINITY, f64::min)).unwrap();
    writeln!(out, "max-volume {}", volumes.iter().copied().fold(0.0, f64::max)).unwrap();
    let t: Vec<_> = registry::tessellations().iter().map(|t| t.name()).collect();
    let d: Vec<_> = registry::derived_fields().iter().map(|d| d.name()).collect();
    writeln!(out, "available-tessellations {}", t.join(" ")).unwrap();
    writeln!(out, "available-derived-fields {}", d.join(" ")).unwrap();
    Ok(out)
}

impl Default for ToleranceArgs {
    fn default() -> Self {
        let t = Tolerances::default();
        ToleranceArgs {
            eps_root: t.eps_root,
            eps_match: t.eps_match,
            eps_pos_rel: t.eps_pos_rel,
            max_chord_error: t.max_chord_error,
            residual_threshold: DEFAULT_RESIDUAL_THRESHOLD,
            max_degenerate_fraction: 0.5,
        }
    }
}

/// Parses arguments, runs the subcommand and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Extract(a) => run_extract(a),
        Command::Verify(a) => run_verify(a).map(|_| ()),
        Command::TessellateInfo(a) => tessellate_info(a).and_then(|s| emit(None, &s)),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
