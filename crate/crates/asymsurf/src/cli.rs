//! Command-line front end: file formats, subcommands, and report emission.
//!
//! The `asymsurf` binary ties the library into reproducible batch runs:
//!
//! * `analyze <file.surf>` — fundamental forms, curvatures, and the patch
//!   classification report; optional `(K, H)` CSV, mesh, and frame exports.
//! * `invariants <file.surf>` — the invariant grid as CSV plus the
//!   max-norms of all compatibility residuals.
//! * `canonical <file.surf>` — the gauge-function canonicity report;
//!   `--apply` reparametrizes to canonical parameters.
//! * `reconstruct --invariants data.csv | --kh data.csv` — Bonnet-type
//!   reconstruction to an OBJ mesh with a diagnostics report.
//! * `solve-cosh-gordon` — Goursat marching for `ω_uv + cosh ω = 0`.
//! * `compare a.obj b.obj --frames fa.json,fb.json` — congruence test up
//!   to a rigid motion.
//!
//! ## Formats
//!
//! Surface files are TOML with sections `[surface]` (`x`, `y`, `z`
//! expression strings; the third coordinate is the time-like one),
//! `[domain]` (`u = [a, b]`, `v = [c, d]`, `grid = [Nu, Nv]`), and `[base]`
//! (`u0`, `v0`); the grid defaults to 101×101 and the base point to the
//! domain center. CSV grids are written `v` outer ascending, `u` inner
//! ascending, with a header row and floats at 17 significant digits. OBJ
//! meshes carry a `# grid Nu Nv` comment, vertices in CSV row order, and
//! two triangles per cell wound consistently with the computed normal.
//!
//! ## Exit codes
//!
//! `0` success · `2` invalid input · `3` method not applicable (`K ≤ 0`,
//! `K − H² ≤ 0`, isotropic or non-asymptotic parameters) · `4` numerical
//! failure (divergence, drift, closure). Failures also emit a one-line
//! JSON error object on stderr.
//!
//! Runs are deterministic: identical inputs produce byte-identical
//! artifacts. Wall-clock timings therefore stay out of reports unless
//! `--timings` asks for them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::canonical::{canonicalize, is_canonical, CanonicalError, CANONICAL_TOL};
use crate::expr::Expr;
use crate::grid::{GridError, GridSpec, ScalarField};
use crate::invariants::{
    codazzi_residual, gauss_residual, invariant_field, system_residual, Branch, InvariantError,
    InvariantField, InvariantPoint,
};
use crate::minkowski::{Frame, MVec3};
use crate::pde::{constant_k_residual, solve_cosh_gordon, GoursatProblem, PdeError};
use crate::reconstruct::{
    bonnet_condition_residuals, compare_up_to_motion, connection_field, initial_frame,
    integrate_frames, integrate_position, reconstruct_from_kh, Provenance, ReconstructError,
    SurfacePatch,
};
use crate::surface::{classify_patch, SurfaceDef, SurfaceError};

/// Successful run.
pub const EXIT_OK: i32 = 0;
/// Invalid usage, unreadable input, or malformed file.
pub const EXIT_USAGE: i32 = 2;
/// The asymptotic-invariant machinery does not apply to the input.
pub const EXIT_NOT_APPLICABLE: i32 = 3;
/// A numerical budget was exceeded (divergence, drift, closure).
pub const EXIT_NUMERIC: i32 = 4;

/// Number of grid nodes per axis when a surface file omits `[domain]`.
const DEFAULT_GRID: usize = 101;
/// Parameter range per axis when a surface file omits `[domain]`.
const DEFAULT_RANGE: [f64; 2] = [-0.5, 0.5];

#[derive(Parser)]
#[command(
    name = "asymsurf",
    version,
    about = "Analyze and reconstruct time-like surfaces in Minkowski 3-space \
             parametrized along real asymptotic lines"
)]
struct Cli {
    /// Record wall-clock stage timings in the report (breaks byte-for-byte
    /// reproducibility of the JSON output).
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Classify a surface patch: forms, curvatures, method applicability.
    Analyze(AnalyzeArgs),
    /// Compute the asymptotic invariants and their compatibility residuals.
    Invariants(InvariantsArgs),
    /// Test for canonical parameters; optionally reparametrize to them.
    Canonical(CanonicalArgs),
    /// Rebuild a surface from invariant data or from its curvature pair.
    Reconstruct(ReconstructArgs),
    /// March the Goursat problem for the cosh-Gordon equation.
    SolveCoshGordon(SolveArgs),
    /// Compare two reconstructed meshes up to a rigid motion.
    Compare(CompareArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Surface definition file (TOML).
    surface: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Export the curvature grid as CSV (columns u,v,K,H).
    #[arg(long)]
    kh_csv: Option<PathBuf>,
    /// Export the sampled positions as an OBJ mesh.
    #[arg(long)]
    obj: Option<PathBuf>,
    /// Export the adapted frame at the base point as JSON (for `compare`).
    #[arg(long)]
    frames_out: Option<PathBuf>,
}

#[derive(Args)]
struct InvariantsArgs {
    /// Surface definition file (TOML).
    surface: PathBuf,
    /// Write the invariant grid as CSV
    /// (columns u,v,a,alpha,f,gamma1,gamma2,sqrtE,sqrtMinusG).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CanonicalArgs {
    /// Surface definition file (TOML).
    surface: PathBuf,
    /// Base point "u0,v0" (defaults to the file's base point).
    #[arg(long)]
    base: Option<String>,
    /// Reparametrize to canonical parameters and report the new domain.
    #[arg(long)]
    apply: bool,
    /// With --apply: write the reparametrized invariant grid as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Canonicity threshold on max(|φ−1|, |ψ−1|).
    #[arg(long, default_value_t = CANONICAL_TOL)]
    tol: f64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Invariant grid CSV (u,v,a,alpha,f,gamma1,gamma2,sqrtE,sqrtMinusG).
    #[arg(long)]
    invariants: Option<PathBuf>,
    /// Curvature grid CSV (u,v,K,H).
    #[arg(long)]
    kh: Option<PathBuf>,
    /// Base point "u0,v0" for the marching schemes.
    #[arg(long)]
    base: String,
    /// Sign branch of the curvature inversion: + or -.
    #[arg(long, default_value = "+", allow_hyphen_values = true)]
    branch: String,
    /// Export the reconstructed mesh as OBJ.
    #[arg(long)]
    obj: Option<PathBuf>,
    /// Closed-form surface file; adds the RMS distance (after motion
    /// alignment) between reconstruction and truth to the report.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Export the reconstructed base frame as JSON (for `compare`).
    #[arg(long)]
    frames_out: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Domain "u_min,u_max,v_min,v_max".
    #[arg(long, allow_hyphen_values = true)]
    domain: String,
    /// Grid "Nu,Nv".
    #[arg(long)]
    grid: String,
    /// Boundary expression ω(u, v_min) in the variable u.
    #[arg(long)]
    bu: String,
    /// Boundary expression ω(u_min, v) in the variable v.
    #[arg(long)]
    bv: String,
    /// Write the solution grid as CSV (columns u,v,omega).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// First mesh (OBJ with a `# grid Nu Nv` header).
    a: PathBuf,
    /// Second mesh.
    b: PathBuf,
    /// Frame files "fa.json,fb.json" matching the two meshes.
    #[arg(long)]
    frames: String,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

/// A run failure: exit code plus a human-readable message.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::usage(format!("io error: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Failure {
        Failure::usage(format!("csv error: {e}"))
    }
}

impl From<GridError> for Failure {
    fn from(e: GridError) -> Failure {
        Failure::usage(e.to_string())
    }
}

impl From<SurfaceError> for Failure {
    fn from(e: SurfaceError) -> Failure {
        Failure::usage(e.to_string())
    }
}

impl From<InvariantError> for Failure {
    fn from(e: InvariantError) -> Failure {
        let code = match e {
            InvariantError::MethodNotApplicable { .. }
            | InvariantError::NotAsymptotic { .. }
            | InvariantError::WrongSignature { .. } => EXIT_NOT_APPLICABLE,
            InvariantError::Surface(_) => EXIT_USAGE,
            InvariantError::InconsistentGammas { .. }
            | InvariantError::DegenerateDenominator { .. }
            | InvariantError::NonPositiveResult { .. } => EXIT_NUMERIC,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<CanonicalError> for Failure {
    fn from(e: CanonicalError) -> Failure {
        let code = match e {
            CanonicalError::Grid(_) => EXIT_USAGE,
            CanonicalError::CrossVariationTooLarge { .. }
            | CanonicalError::NonPositiveGauge { .. }
            | CanonicalError::InterpolationOutOfRange { .. } => EXIT_NUMERIC,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<PdeError> for Failure {
    fn from(e: PdeError) -> Failure {
        let code = match e {
            PdeError::Grid(_)
            | PdeError::Eval(_)
            | PdeError::CornerMismatch { .. }
            | PdeError::BoundaryLength { .. } => EXIT_USAGE,
            PdeError::NonPositiveK { .. } => EXIT_NOT_APPLICABLE,
            PdeError::Divergence { .. } => EXIT_NUMERIC,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<ReconstructError> for Failure {
    fn from(e: ReconstructError) -> Failure {
        let code = reconstruct_exit_code(&e);
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn reconstruct_exit_code(e: &ReconstructError) -> i32 {
    match e {
        ReconstructError::Staged { source, .. } => reconstruct_exit_code(source),
        ReconstructError::Invariant(ie) => Failure::from(ie.clone()).code,
        ReconstructError::Grid(_) | ReconstructError::ShapeMismatch { .. } => EXIT_USAGE,
        ReconstructError::Frame(_) => EXIT_USAGE,
        ReconstructError::AlphaSignChange { .. } => EXIT_NOT_APPLICABLE,
        ReconstructError::NonPositiveResult { .. }
        | ReconstructError::StepTooCoarse { .. }
        | ReconstructError::AllNodesMasked
        | ReconstructError::DataIncompatible { .. }
        | ReconstructError::GramDriftExceeded { .. }
        | ReconstructError::ClosureExceeded { .. } => EXIT_NUMERIC,
    }
}

/// Entry point used by the `asymsurf` binary. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let mut timer = Timer::new(cli.timings);
    let result = match &cli.cmd {
        Cmd::Analyze(a) => cmd_analyze(a, &mut timer),
        Cmd::Invariants(a) => cmd_invariants(a, &mut timer),
        Cmd::Canonical(a) => cmd_canonical(a, &mut timer),
        Cmd::Reconstruct(a) => cmd_reconstruct(a, &mut timer),
        Cmd::SolveCoshGordon(a) => cmd_solve(a, &mut timer),
        Cmd::Compare(a) => cmd_compare(a, &mut timer),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("{}", json!({ "error": f.message, "exit": f.code }));
            f.code
        }
    }
}

// ---------------------------------------------------------------------------
// Stage timing
// ---------------------------------------------------------------------------

/// Wall-clock stage timer; a disabled timer reports an empty object so that
/// default runs stay byte-deterministic.
struct Timer {
    enabled: bool,
    last: Instant,
    entries: serde_json::Map<String, Value>,
}

impl Timer {
    fn new(enabled: bool) -> Timer {
        Timer {
            enabled,
            last: Instant::now(),
            entries: serde_json::Map::new(),
        }
    }

    /// Record the time since the previous lap under `stage`.
    fn lap(&mut self, stage: &str) {
        if self.enabled {
            let now = Instant::now();
            let ms = now.duration_since(self.last).as_secs_f64() * 1e3;
            self.entries.insert(stage.to_string(), json!(ms));
            self.last = now;
        }
    }

    fn report(&self) -> Value {
        Value::Object(self.entries.clone())
    }
}

// ---------------------------------------------------------------------------
// Surface files
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct SurfFile {
    surface: Option<SurfSection>,
    domain: Option<DomainSection>,
    base: Option<BaseSection>,
}

#[derive(Deserialize)]
struct SurfSection {
    x: Option<String>,
    y: Option<String>,
    z: Option<String>,
}

#[derive(Deserialize)]
struct DomainSection {
    u: Option<[f64; 2]>,
    v: Option<[f64; 2]>,
    grid: Option<[usize; 2]>,
}

#[derive(Deserialize)]
struct BaseSection {
    u0: Option<f64>,
    v0: Option<f64>,
}

/// Parse a `.surf` file into a [`SurfaceDef`], applying the documented
/// defaults (101×101 grid, base at the domain center) and warning on
/// stderr when the `[domain]` section is absent.
pub fn parse_surface_file(path: &Path) -> Result<SurfaceDef, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let file: SurfFile =
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;

    let surface = file
        .surface
        .ok_or_else(|| format!("{}: missing [surface] section", path.display()))?;
    let coord = |name: &str, value: Option<String>| {
        value.ok_or_else(|| format!("{}: missing coordinate {name} in [surface]", path.display()))
    };
    let x = coord("x", surface.x)?;
    let y = coord("y", surface.y)?;
    let z = coord("z", surface.z)?;

    if file.domain.is_none() {
        eprintln!(
            "warning: {}: no [domain] section; using u,v in [{}, {}] on a {}x{} grid",
            path.display(),
            DEFAULT_RANGE[0],
            DEFAULT_RANGE[1],
            DEFAULT_GRID,
            DEFAULT_GRID
        );
    }
    let domain = file.domain.unwrap_or(DomainSection {
        u: None,
        v: None,
        grid: None,
    });
    let u = domain.u.unwrap_or(DEFAULT_RANGE);
    let v = domain.v.unwrap_or(DEFAULT_RANGE);
    let [nu, nv] = domain.grid.unwrap_or([DEFAULT_GRID, DEFAULT_GRID]);
    let grid = GridSpec {
        u_min: u[0],
        u_max: u[1],
        v_min: v[0],
        v_max: v[1],
        nu,
        nv,
    };
    grid.validate().map_err(|e| format!("{}: {e}", path.display()))?;

    let center = (
        0.5 * (grid.u_min + grid.u_max),
        0.5 * (grid.v_min + grid.v_max),
    );
    let base = match file.base {
        Some(b) => (b.u0.unwrap_or(center.0), b.v0.unwrap_or(center.1)),
        None => center,
    };

    SurfaceDef::from_strs(&x, &y, &z, grid, base).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_surface(path: &Path) -> Result<SurfaceDef, Failure> {
    parse_surface_file(path).map_err(Failure::usage)
}

/// The resolved per-run configuration embedded in every report.
fn surface_config(subcommand: &str, path: &Path, def: &SurfaceDef) -> Value {
    json!({
        "subcommand": subcommand,
        "surface": path.display().to_string(),
        "domain": {
            "u": [def.grid.u_min, def.grid.u_max],
            "v": [def.grid.v_min, def.grid.v_max],
            "grid": [def.grid.nu, def.grid.nv],
        },
        "base": [def.base.0, def.base.1],
    })
}

// ---------------------------------------------------------------------------
// CSV grids
// ---------------------------------------------------------------------------

/// 17-significant-digit float formatting used in all CSV artifacts.
fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write named columns over a grid: `u,v` first, then one column per field,
/// `v` outer ascending and `u` inner ascending.
fn write_grid_csv(
    path: &Path,
    names: &[&str],
    spec: GridSpec,
    cols: &[&ScalarField],
) -> Result<(), Failure> {
    debug_assert_eq!(names.len(), cols.len());
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["u", "v"];
    header.extend_from_slice(names);
    w.write_record(&header)
        .map_err(|e| Failure::usage(e.to_string()))?;
    for j in 0..spec.nv {
        for i in 0..spec.nu {
            let mut record = vec![fmt_float(spec.u_at(i)), fmt_float(spec.v_at(j))];
            record.extend(cols.iter().map(|c| fmt_float(c.at(i, j))));
            w.write_record(&record)
                .map_err(|e| Failure::usage(e.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a grid CSV written by [`write_grid_csv`]: checks the header,
/// re-infers the [`GridSpec`] from the `u,v` columns, and returns one
/// [`ScalarField`] per data column.
fn read_grid_csv(path: &Path, names: &[&str]) -> Result<(GridSpec, Vec<ScalarField>), Failure> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r
        .headers()
        .map_err(|e| Failure::usage(e.to_string()))?
        .clone();
    let mut expected = vec!["u", "v"];
    expected.extend_from_slice(names);
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Failure::usage(format!(
            "{}: expected columns {expected:?}, found {got:?}",
            path.display()
        )));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| Failure::usage(e.to_string()))?;
        let row: Result<Vec<f64>, _> = record.iter().map(|s| s.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| {
            Failure::usage(format!("{}: bad float in row {}: {e}", path.display(), rows.len() + 2))
        })?);
    }
    if rows.is_empty() {
        return Err(Failure::usage(format!("{}: no data rows", path.display())));
    }

    // Row order is v outer / u inner: the first block of constant v fixes nu.
    let v0 = rows[0][1];
    let nu = rows
        .iter()
        .position(|row| row[1] != v0)
        .unwrap_or(rows.len());
    if nu < 2 || rows.len() % nu != 0 {
        return Err(Failure::usage(format!(
            "{}: rows do not tile a grid (leading row block {nu}, total {})",
            path.display(),
            rows.len()
        )));
    }
    let nv = rows.len() / nu;
    if nv < 2 {
        return Err(Failure::usage(format!(
            "{}: a grid needs at least 2 rows per axis, found {nv}",
            path.display()
        )));
    }
    let spec = GridSpec {
        u_min: rows[0][0],
        u_max: rows[nu - 1][0],
        v_min: rows[0][1],
        v_max: rows[(nv - 1) * nu][1],
        nu,
        nv,
    };
    spec.validate()?;

    // The u pattern must repeat per block and v must be constant per block.
    let tol = 1e-9 * (spec.du().abs() + spec.dv().abs());
    for (k, row) in rows.iter().enumerate() {
        let (i, j) = (k % nu, k / nu);
        if (row[0] - spec.u_at(i)).abs() > tol || (row[1] - spec.v_at(j)).abs() > tol {
            return Err(Failure::usage(format!(
                "{}: row {} is off-grid: (u, v) = ({}, {}), expected ({}, {})",
                path.display(),
                k + 2,
                row[0],
                row[1],
                spec.u_at(i),
                spec.v_at(j)
            )));
        }
    }

    let fields = (0..names.len())
        .map(|c| ScalarField {
            spec,
            data: rows.iter().map(|row| row[2 + c]).collect(),
        })
        .collect();
    Ok((spec, fields))
}

// ---------------------------------------------------------------------------
// OBJ meshes and frame files
// ---------------------------------------------------------------------------

/// Write a grid of positions as an OBJ mesh: a `# grid Nu Nv` comment,
/// vertices in CSV row order, and two triangles per cell. The winding
/// (counter-clockwise in the `(u, v)` parameter square) keeps mesh normals
/// aligned with the computed surface normal.
fn write_obj(path: &Path, spec: GridSpec, positions: &[MVec3]) -> Result<(), Failure> {
    let mut out = String::new();
    let _ = writeln!(out, "# grid {} {}", spec.nu, spec.nv);
    for z in positions {
        let _ = writeln!(
            out,
            "v {} {} {}",
            fmt_float(z.x1),
            fmt_float(z.x2),
            fmt_float(z.x3)
        );
    }
    for j in 0..spec.nv - 1 {
        for i in 0..spec.nu - 1 {
            let sw = j * spec.nu + i + 1;
            let se = sw + 1;
            let nw = sw + spec.nu;
            let ne = nw + 1;
            let _ = writeln!(out, "f {sw} {se} {ne}");
            let _ = writeln!(out, "f {sw} {ne} {nw}");
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read an OBJ written by [`write_obj`]: the grid shape and the vertices.
fn read_obj(path: &Path) -> Result<((usize, usize), Vec<MVec3>), Failure> {
    let text = fs::read_to_string(path)?;
    let mut shape = None;
    let mut positions = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("#") => {
                let rest: Vec<&str> = parts.collect();
                if rest.first() == Some(&"grid") && rest.len() == 3 {
                    let nu = rest[1].parse::<usize>();
                    let nv = rest[2].parse::<usize>();
                    if let (Ok(nu), Ok(nv)) = (nu, nv) {
                        shape = Some((nu, nv));
                    }
                }
            }
            Some("v") => {
                let coords: Result<Vec<f64>, _> = parts.map(|s| s.parse::<f64>()).collect();
                let coords = coords.map_err(|e| {
                    Failure::usage(format!("{}:{}: bad vertex: {e}", path.display(), lineno + 1))
                })?;
                if coords.len() != 3 {
                    return Err(Failure::usage(format!(
                        "{}:{}: vertex needs 3 coordinates",
                        path.display(),
                        lineno + 1
                    )));
                }
                positions.push(MVec3::new(coords[0], coords[1], coords[2]));
            }
            _ => {}
        }
    }
    let shape = shape.ok_or_else(|| {
        Failure::usage(format!("{}: missing '# grid Nu Nv' comment", path.display()))
    })?;
    if shape.0 * shape.1 != positions.len() {
        return Err(Failure::usage(format!(
            "{}: grid {}x{} needs {} vertices, found {}",
            path.display(),
            shape.0,
            shape.1,
            shape.0 * shape.1,
            positions.len()
        )));
    }
    Ok((shape, positions))
}

/// Base-frame sidecar for `compare`: the adapted frame and position at the
/// base node, plus where that node sits in the mesh's vertex order.
#[derive(Serialize, Deserialize)]
struct FrameDoc {
    u0: f64,
    v0: f64,
    base_index: usize,
    x: [f64; 3],
    y: [f64; 3],
    n: [f64; 3],
    z: [f64; 3],
}

fn vec_triplet(z: MVec3) -> [f64; 3] {
    [z.x1, z.x2, z.x3]
}

fn triplet_vec(t: [f64; 3]) -> MVec3 {
    MVec3::new(t[0], t[1], t[2])
}

fn write_frame_doc(path: &Path, patch: &SurfacePatch) -> Result<(), Failure> {
    let doc = FrameDoc {
        u0: patch.base.0,
        v0: patch.base.1,
        base_index: patch.spec.idx(patch.base_idx.0, patch.base_idx.1),
        x: vec_triplet(patch.base_frame.x),
        y: vec_triplet(patch.base_frame.y),
        n: vec_triplet(patch.base_frame.n),
        z: vec_triplet(patch.base_position()),
    };
    fs::write(path, serde_json::to_string_pretty(&doc).expect("frame doc serializes"))?;
    Ok(())
}

fn read_frame_doc(path: &Path) -> Result<FrameDoc, Failure> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Emit a JSON report to `path`, or pretty-print it on stdout.
fn emit_report(path: Option<&PathBuf>, report: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    match path {
        Some(p) => fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Small argument parsers
// ---------------------------------------------------------------------------

fn parse_floats(text: &str, n: usize, what: &str) -> Result<Vec<f64>, Failure> {
    let parts: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match parts {
        Ok(v) if v.len() == n => Ok(v),
        _ => Err(Failure::usage(format!(
            "{what} must be {n} comma-separated numbers, got {text:?}"
        ))),
    }
}

fn parse_base(text: &str) -> Result<(f64, f64), Failure> {
    let v = parse_floats(text, 2, "--base")?;
    Ok((v[0], v[1]))
}

fn parse_branch(text: &str) -> Result<Branch, Failure> {
    match text {
        "+" | "plus" => Ok(Branch::Plus),
        "-" | "minus" => Ok(Branch::Minus),
        other => Err(Failure::usage(format!(
            "--branch must be + or -, got {other:?}"
        ))),
    }
}

fn parse_grid_arg(domain: &str, grid: &str) -> Result<GridSpec, Failure> {
    let d = parse_floats(domain, 4, "--domain")?;
    let parts: Result<Vec<usize>, _> = grid.split(',').map(|s| s.trim().parse()).collect();
    let g = match parts {
        Ok(g) if g.len() == 2 => g,
        _ => {
            return Err(Failure::usage(format!(
                "--grid must be Nu,Nv positive integers, got {grid:?}"
            )))
        }
    };
    let spec = GridSpec {
        u_min: d[0],
        u_max: d[1],
        v_min: d[2],
        v_max: d[3],
        nu: g[0],
        nv: g[1],
    };
    spec.validate()?;
    Ok(spec)
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_analyze(args: &AnalyzeArgs, timer: &mut Timer) -> Result<i32, Failure> {
    let def = load_surface(&args.surface)?;
    let mut config = surface_config("analyze", &args.surface, &def);
    config["outputs"] = json!({
        "report": args.report.as_ref().map(|p| p.display().to_string()),
        "kh_csv": args.kh_csv.as_ref().map(|p| p.display().to_string()),
        "obj": args.obj.as_ref().map(|p| p.display().to_string()),
        "frames_out": args.frames_out.as_ref().map(|p| p.display().to_string()),
    });
    timer.lap("parse");

    let class = classify_patch(&def)?;
    timer.lap("classify");

    if let Some(path) = &args.kh_csv {
        let spec = def.grid;
        let mut k = ScalarField::constant(spec, f64::NAN);
        let mut h = ScalarField::constant(spec, f64::NAN);
        for j in 0..spec.nv {
            for i in 0..spec.nu {
                let curv = crate::surface::forms_at(&def, spec.u_at(i), spec.v_at(j))
                    .and_then(|fc| crate::surface::curvatures(&fc));
                if let Ok(c) = curv {
                    k.set(i, j, c.k);
                    h.set(i, j, c.h);
                }
            }
        }
        write_grid_csv(path, &["K", "H"], spec, &[&k, &h])?;
        timer.lap("kh-csv");
    }
    if args.obj.is_some() || args.frames_out.is_some() {
        let patch = SurfacePatch::from_definition(&def)?;
        if let Some(path) = &args.obj {
            write_obj(path, patch.spec, &patch.positions)?;
        }
        if let Some(path) = &args.frames_out {
            write_frame_doc(path, &patch)?;
        }
        timer.lap("export");
    }

    let applicable = class.method_applicable;
    let reason = class.reason.clone();
    let report = json!({
        "config": config,
        "class": class,
        "timings": timer.report(),
    });
    emit_report(args.report.as_ref(), &report)?;
    if applicable {
        Ok(EXIT_OK)
    } else {
        let reason = reason.unwrap_or_else(|| "not applicable".into());
        eprintln!("{}", json!({ "error": reason, "exit": EXIT_NOT_APPLICABLE }));
        Ok(EXIT_NOT_APPLICABLE)
    }
}

/// The nine invariant CSV columns, in schema order.
const INVARIANT_COLUMNS: [&str; 7] = ["a", "alpha", "f", "gamma1", "gamma2", "sqrtE", "sqrtMinusG"];

fn invariant_columns(fld: &InvariantField) -> Vec<ScalarField> {
    let getters: [fn(&InvariantPoint) -> f64; 7] = [
        |p| p.a,
        |p| p.alpha,
        |p| p.f,
        |p| p.gamma1,
        |p| p.gamma2,
        |p| p.sqrt_e,
        |p| p.sqrt_minus_g,
    ];
    getters.iter().map(|g| fld.component(g)).collect()
}

fn cmd_invariants(args: &InvariantsArgs, timer: &mut Timer) -> Result<i32, Failure> {
    let def = load_surface(&args.surface)?;
    let mut config = surface_config("invariants", &args.surface, &def);
    config["outputs"] = json!({
        "csv": args.csv.as_ref().map(|p| p.display().to_string()),
        "report": args.report.as_ref().map(|p| p.display().to_string()),
    });
    timer.lap("parse");

    let fld = invariant_field(&def)?;
    timer.lap("invariants");

    if let Some(path) = &args.csv {
        let cols = invariant_columns(&fld);
        let refs: Vec<&ScalarField> = cols.iter().collect();
        write_grid_csv(path, &INVARIANT_COLUMNS, fld.spec, &refs)?;
        timer.lap("csv");
    }

    let gauss = gauss_residual(&fld);
    let (cod1, cod2) = codazzi_residual(&fld);
    let (sys1, sys2) = system_residual(&fld);
    timer.lap("residuals");

    let report = json!({
        "config": config,
        "residuals": {
            "gauss": gauss.max_abs_finite(),
            "codazzi": [cod1.max_abs_finite(), cod2.max_abs_finite()],
            "system": [sys1.max_abs_finite(), sys2.max_abs_finite()],
        },
        "timings": timer.report(),
    });
    emit_report(args.report.as_ref(), &report)?;
    Ok(EXIT_OK)
}

fn cmd_canonical(args: &CanonicalArgs, timer: &mut Timer) -> Result<i32, Failure> {
    if !(args.tol > 0.0) {
        return Err(Failure::usage(format!(
            "--tol must be positive, got {}",
            args.tol
        )));
    }
    let def = load_surface(&args.surface)?;
    let base = match &args.base {
        Some(text) => parse_base(text)?,
        None => def.base,
    };
    let mut config = surface_config("canonical", &args.surface, &def);
    config["base"] = json!([base.0, base.1]);
    config["tol"] = json!(args.tol);
    config["apply"] = json!(args.apply);
    config["outputs"] = json!({
        "csv": args.csv.as_ref().map(|p| p.display().to_string()),
        "report": args.report.as_ref().map(|p| p.display().to_string()),
    });
    timer.lap("parse");

    let fld = invariant_field(&def)?;
    let verdict = is_canonical(&fld, base, args.tol)?;
    timer.lap("gauge");

    let mut report = json!({
        "config": config,
        "canonical": verdict,
        "timings": Value::Null,
    });
    if args.apply {
        let (map, new_fld) = canonicalize(&fld, base)?;
        timer.lap("canonicalize");
        if let Some(path) = &args.csv {
            let cols = invariant_columns(&new_fld);
            let refs: Vec<&ScalarField> = cols.iter().collect();
            write_grid_csv(path, &INVARIANT_COLUMNS, new_fld.spec, &refs)?;
        }
        report["reparametrized"] = json!({
            "u": [map.u_bar.first(), map.u_bar.last()],
            "v": [map.v_bar.first(), map.v_bar.last()],
            "grid": [new_fld.spec.nu, new_fld.spec.nv],
        });
    }
    report["timings"] = timer.report();
    emit_report(args.report.as_ref(), &report)?;
    Ok(EXIT_OK)
}

fn cmd_reconstruct(args: &ReconstructArgs, timer: &mut Timer) -> Result<i32, Failure> {
    let base = parse_base(&args.base)?;
    let branch = parse_branch(&args.branch)?;
    let source = match (&args.invariants, &args.kh) {
        (Some(p), None) => ("invariants", p),
        (None, Some(p)) => ("kh", p),
        _ => {
            return Err(Failure::usage(
                "exactly one input source is required: --invariants or --kh",
            ))
        }
    };
    let mut source_doc = serde_json::Map::new();
    source_doc.insert(source.0.to_string(), json!(source.1.display().to_string()));
    let config = json!({
        "subcommand": "reconstruct",
        "source": source_doc,
        "base": [base.0, base.1],
        "branch": if matches!(branch, Branch::Plus) { "+" } else { "-" },
        "outputs": {
            "obj": args.obj.as_ref().map(|p| p.display().to_string()),
            "frames_out": args.frames_out.as_ref().map(|p| p.display().to_string()),
            "report": args.report.as_ref().map(|p| p.display().to_string()),
        },
        "truth": args.truth.as_ref().map(|p| p.display().to_string()),
    });
    timer.lap("parse");

    let (patch, residuals, drift, closure) = if source.0 == "kh" {
        let (_, fields) = read_grid_csv(source.1, &["K", "H"])?;
        timer.lap("read");
        let run = reconstruct_from_kh(&fields[0], &fields[1], branch, base, MVec3::zero())?;
        timer.lap("reconstruct");
        let d = run.diagnostics;
        (
            run.patch,
            json!({
                "phi_psi": d.phi_psi_residual,
                "integrability": d.integrability,
                "gauss": d.gauss_residual,
                "codazzi": [d.codazzi_phi_residual, d.codazzi_psi_residual],
                "masked_nodes": d.masked_nodes,
            }),
            d.gram_drift,
            d.closure,
        )
    } else {
        let (_, fields) = read_grid_csv(source.1, &INVARIANT_COLUMNS)?;
        timer.lap("read");
        let [a, alpha, _f, gamma1, gamma2, sqrt_e, sqrt_minus_g]: &[ScalarField; 7] =
            fields.as_slice().try_into().expect("seven columns");
        let conn = connection_field(a, alpha, gamma1, gamma2, sqrt_e, sqrt_minus_g)?;
        let (i0, j0) = a.spec.nearest_node(base.0, base.1)?;
        let frames = integrate_frames(&conn, a, initial_frame(a.at(i0, j0)), base, None)?;
        let conditions = bonnet_condition_residuals(gamma1, gamma2, a, alpha, sqrt_e, sqrt_minus_g)?;
        let patch = integrate_position(sqrt_e, sqrt_minus_g, &frames, MVec3::zero(), base)?;
        timer.lap("reconstruct");
        let closure = patch.closure;
        (
            patch,
            json!({
                "phi_psi": Value::Null,
                "integrability": frames.integrability_max,
                "gauss": conditions.gauss.max_abs_finite(),
                "codazzi": [
                    conditions.codazzi_phi.max_abs_finite(),
                    conditions.codazzi_psi.max_abs_finite(),
                ],
                "masked_nodes": conditions.masked,
            }),
            frames.max_gram_drift(),
            closure,
        )
    };

    let rms = match &args.truth {
        Some(path) => {
            let truth = SurfacePatch::from_definition(&load_surface(path)?)?;
            let cmp = compare_up_to_motion(&patch, &truth)?;
            timer.lap("compare");
            json!(cmp.rms)
        }
        None => Value::Null,
    };

    if let Some(path) = &args.obj {
        write_obj(path, patch.spec, &patch.positions)?;
    }
    if let Some(path) = &args.frames_out {
        write_frame_doc(path, &patch)?;
    }
    timer.lap("export");

    let report = json!({
        "config": config,
        "residuals": residuals,
        "drift": drift,
        "closure": closure,
        "rms": rms,
        "timings": timer.report(),
    });
    emit_report(args.report.as_ref(), &report)?;
    Ok(EXIT_OK)
}

fn cmd_solve(args: &SolveArgs, timer: &mut Timer) -> Result<i32, Failure> {
    let spec = parse_grid_arg(&args.domain, &args.grid)?;
    let bu = Expr::parse(&args.bu).map_err(|e| Failure::usage(format!("--bu: {e}")))?;
    let bv = Expr::parse(&args.bv).map_err(|e| Failure::usage(format!("--bv: {e}")))?;
    let config = json!({
        "subcommand": "solve-cosh-gordon",
        "domain": {
            "u": [spec.u_min, spec.u_max],
            "v": [spec.v_min, spec.v_max],
            "grid": [spec.nu, spec.nv],
        },
        "bu": args.bu,
        "bv": args.bv,
        "outputs": {
            "csv": args.csv.as_ref().map(|p| p.display().to_string()),
            "report": args.report.as_ref().map(|p| p.display().to_string()),
        },
    });
    timer.lap("parse");

    let problem = GoursatProblem::from_exprs(spec, &bu, &bv)?;
    let sol = solve_cosh_gordon(&problem)?;
    timer.lap("march");

    if let Some(path) = &args.csv {
        write_grid_csv(path, &["omega"], spec, &[&sol.omega])?;
        timer.lap("csv");
    }
    let report = json!({
        "config": config,
        "residuals": {
            "scheme": sol.scheme_residual,
            "constant_k": constant_k_residual(&sol.omega.map(f64::sinh)).max_abs_finite(),
        },
        "timings": timer.report(),
    });
    emit_report(args.report.as_ref(), &report)?;
    Ok(EXIT_OK)
}

fn cmd_compare(args: &CompareArgs, timer: &mut Timer) -> Result<i32, Failure> {
    let frame_paths: Vec<&str> = args.frames.split(',').collect();
    if frame_paths.len() != 2 {
        return Err(Failure::usage(
            "--frames needs two comma-separated paths: fa.json,fb.json",
        ));
    }
    let config = json!({
        "subcommand": "compare",
        "a": args.a.display().to_string(),
        "b": args.b.display().to_string(),
        "frames": [frame_paths[0], frame_paths[1]],
        "outputs": { "report": args.report.as_ref().map(|p| p.display().to_string()) },
    });

    let load = |mesh: &Path, frames: &str| -> Result<SurfacePatch, Failure> {
        let ((nu, nv), positions) = read_obj(mesh)?;
        let doc = read_frame_doc(Path::new(frames))?;
        if doc.base_index >= positions.len() {
            return Err(Failure::usage(format!(
                "{frames}: base index {} outside mesh with {} vertices",
                doc.base_index,
                positions.len()
            )));
        }
        // OBJ files carry no parameter values; a unit square stands in (the
        // comparison only uses the grid shape and the vertex order).
        let spec = GridSpec {
            u_min: 0.0,
            u_max: 1.0,
            v_min: 0.0,
            v_max: 1.0,
            nu,
            nv,
        };
        Ok(SurfacePatch {
            spec,
            positions,
            provenance: Provenance::Reconstructed,
            base: (doc.u0, doc.v0),
            base_idx: (doc.base_index % nu, doc.base_index / nu),
            base_frame: Frame {
                x: triplet_vec(doc.x),
                y: triplet_vec(doc.y),
                n: triplet_vec(doc.n),
            },
            closure: 0.0,
        })
    };
    let pa = load(&args.a, frame_paths[0])?;
    let pb = load(&args.b, frame_paths[1])?;
    timer.lap("read");

    let cmp = compare_up_to_motion(&pa, &pb)?;
    timer.lap("compare");

    let report = json!({
        "config": config,
        "motion": {
            "linear": cmp.motion.a.0,
            "translation": vec_triplet(cmp.motion.b),
        },
        "rms": cmp.rms,
        "timings": timer.report(),
    });
    emit_report(args.report.as_ref(), &report)?;
    Ok(EXIT_OK)
}
