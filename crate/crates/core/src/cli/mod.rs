//! Command-line front end. Single computations print a JSON [`Report`];
//! sweeps print CSV by default.

mod report;
mod sweep;

pub use report::{index_label, Report, SCHEMA_VERSION};
pub use sweep::{parameter_grid, ParamRange, SweepRow};

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::classify::{classify_walker_kv, variable_kv_check, Region, VariableMode, DEFAULT_TOL};
use crate::curvature::evaluate;
use crate::error::{Error, Result};
use crate::expr::Params;
use crate::families::{family, Family};
use crate::maps::{catalog_map, compare_pullback, homothety_factor, mu, MapExpectation};
use crate::models::{
    extract_model, kv_equivalent, stabilizer_filtration, walker_canonical_frame, EquivalenceConfig, Mode,
};
use report::{labelled, matrix};
use sweep::{write_rows, RowSettings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

const DEFAULT_SEED: u64 = 0x5eed;
const CURVATURE_CUTOFF: f64 = 1e-12;
const MAP_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "curvhom", version, about = "Curvature models and homothety curvature homogeneity")]
pub struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Override the command's default tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Comma-separated coordinates.
#[derive(Debug, Clone, PartialEq)]
struct Point(Vec<f64>);

impl FromStr for Point {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| format!("`{t}` is not a finite number"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Point)
    }
}

fn parse_binding(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    if !v.is_finite() || k.trim().is_empty() {
        return Err(format!("bad binding `{s}`"));
    }
    Ok((k.trim().to_string(), v))
}

fn parse_interval(s: &str) -> std::result::Result<[f64; 2], String> {
    match Point::from_str(s)?.0[..] {
        [lo, hi] if lo <= hi => Ok([lo, hi]),
        _ => Err(format!("expected lo,hi with lo <= hi, got `{s}`")),
    }
}

#[derive(Debug, Clone, Args)]
struct MetricArgs {
    /// Catalog family, or `walker` together with --f.
    #[arg(long, default_value = "walker")]
    family: String,
    /// Walker function f(x, y).
    #[arg(long = "f", allow_hyphen_values = true)]
    f: Option<String>,
    /// Parameter binding name=value; repeatable.
    #[arg(long = "param", short = 'p', value_parser = parse_binding, allow_hyphen_values = true)]
    params: Vec<(String, f64)>,
    /// Shorthand for -p t=...
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    /// Shorthand for -p m=...
    #[arg(long)]
    m: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    point: Option<Point>,
}

impl MetricArgs {
    fn overrides(&self) -> Params {
        let mut p: Params = self.params.iter().cloned().collect();
        if let Some(t) = self.t {
            p.insert("t".into(), t);
        }
        if let Some(m) = self.m {
            p.insert("m".into(), m);
        }
        p
    }

    fn family_with(&self, extra: &Params) -> Result<Family> {
        let mut overrides = self.overrides();
        overrides.extend(extra.iter().map(|(k, v)| (k.clone(), *v)));
        resolve_family(&self.family, self.f.as_deref(), &overrides)
    }

    fn family(&self) -> Result<Family> {
        self.family_with(&Params::new())
    }

    fn point(&self, fam: &Family) -> Result<Vec<f64>> {
        let p = self.point.clone().map_or_else(|| fam.default_point(), |p| p.0);
        check_point(fam, &p)?;
        Ok(p)
    }
}

fn check_point(fam: &Family, p: &[f64]) -> Result<()> {
    if p.len() != fam.dim() {
        return Err(Error::DimensionMismatch(format!(
            "point has {} coordinates, family `{}` has {}",
            p.len(),
            fam.name,
            fam.dim()
        )));
    }
    Ok(())
}

fn resolve_family(name: &str, f: Option<&str>, overrides: &Params) -> Result<Family> {
    if name != "walker" {
        if f.is_some() {
            return Err(Error::InvalidArgument("--f only applies to --family walker".into()));
        }
        return family(name, overrides);
    }
    let text = f.ok_or_else(|| Error::InvalidArgument("--family walker needs --f".into()))?;
    Family::custom_walker(text, overrides)
}

#[derive(Debug, Clone, Args)]
struct RegionArgs {
    /// x interval lo,hi.
    #[arg(long, value_parser = parse_interval, allow_hyphen_values = true)]
    x: Option<[f64; 2]>,
    /// y interval lo,hi.
    #[arg(long, value_parser = parse_interval, allow_hyphen_values = true)]
    y: Option<[f64; 2]>,
    /// Grid nodes per axis.
    #[arg(long)]
    grid: Option<usize>,
}

impl RegionArgs {
    fn region(&self, fam: &Family) -> Result<Region> {
        let d = Region::for_family(fam);
        let n = self.grid.unwrap_or(d.nx);
        Region::new(self.x.unwrap_or(d.x), self.y.unwrap_or(d.y), n, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Isometry,
    Kv,
}

#[derive(Debug, Clone, Args)]
struct VarchArgs {
    /// Highest level for the variable curvature check.
    #[arg(long = "varch-k", default_value_t = 2)]
    varch_k: usize,
    #[arg(long = "varch-mode", value_enum, default_value_t = VarchMode::Plain)]
    varch_mode: VarchMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VarchMode {
    Plain,
    Kv,
}

impl From<VarchMode> for VariableMode {
    fn from(m: VarchMode) -> Self {
        match m {
            VarchMode::Plain => VariableMode::Plain,
            VarchMode::Kv => VariableMode::Kv,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Metric, Christoffel symbols, covariant derivatives of R and scalar invariants at a point.
    Curvature {
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// The k-curvature model at a point, with the Walker normal frame when available.
    Model {
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long, default_value_t = 2)]
        k: usize,
    },
    /// Compare the k-models at two points.
    Equiv {
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long, allow_hyphen_values = true)]
        point2: Point,
        /// Family of the second point; defaults to the first.
        #[arg(long)]
        family2: Option<String>,
        #[arg(long = "f2", allow_hyphen_values = true)]
        f2: Option<String>,
        #[arg(long = "param2", value_parser = parse_binding, allow_hyphen_values = true)]
        params2: Vec<(String, f64)>,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Kv)]
        mode: ModeArg,
    },
    /// Stabilizer filtration of the k-model.
    Stabilizer {
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Include kernel bases in the output.
        #[arg(long)]
        bases: bool,
    },
    /// Check a catalog map against its expected homothety factor.
    VerifyMap {
        #[arg(long)]
        map: String,
        #[arg(long = "param", short = 'p', value_parser = parse_binding, allow_hyphen_values = true)]
        params: Vec<(String, f64)>,
        #[arg(long, default_value_t = 16)]
        samples: usize,
    },
    /// mu = |R|^2(base) / |R|^2(point) and its differential.
    Mu {
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long, allow_hyphen_values = true)]
        base: Option<Point>,
    },
    /// Classify a Walker function on a region.
    Classify {
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        region: RegionArgs,
        #[command(flatten)]
        varch: VarchArgs,
    },
    /// Classify over a parameter grid; one row per parameter tuple.
    Sweep {
        #[command(flatten)]
        metric: MetricArgs,
        /// name=v1,v2,... or name=lo:hi:count; repeatable.
        #[arg(long = "range", required = true, allow_hyphen_values = true)]
        ranges: Vec<ParamRange>,
        #[command(flatten)]
        region: RegionArgs,
        #[command(flatten)]
        varch: VarchArgs,
    },
    /// Per-level variable curvature homogeneity on a region.
    Varch {
        #[command(flatten)]
        metric: MetricArgs,
        /// Highest level; defaults to k+1 for walker:varch_k and 2 otherwise.
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        region: RegionArgs,
        #[arg(long, value_enum, default_value_t = VarchMode::Plain)]
        mode: VarchMode,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Curvature { .. } => "curvature",
            Command::Model { .. } => "model",
            Command::Equiv { .. } => "equiv",
            Command::Stabilizer { .. } => "stabilizer",
            Command::VerifyMap { .. } => "verify-map",
            Command::Mu { .. } => "mu",
            Command::Classify { .. } => "classify",
            Command::Sweep { .. } => "sweep",
            Command::Varch { .. } => "varch",
        }
    }
}

#[derive(Debug)]
enum Failure {
    Engine(Error),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Engine(e) if e.is_numeric() => EXIT_NUMERIC,
            _ => EXIT_INPUT,
        }
    }
}

struct Context {
    args: Vec<String>,
    tol: Option<f64>,
    seed: u64,
    format: Option<Format>,
}

impl Context {
    fn report(&self, command: &str) -> Report {
        Report::new(command, &self.args, self.seed)
    }

    fn equivalence(&self) -> EquivalenceConfig {
        let mut cfg = EquivalenceConfig {
            seed: self.seed,
            ..Default::default()
        };
        if let Some(t) = self.tol {
            cfg.tol = t;
        }
        cfg
    }

    fn json_only(&self, command: &str) -> Result<()> {
        if self.format == Some(Format::Csv) {
            return Err(Error::InvalidArgument(format!("`{command}` only writes JSON")));
        }
        Ok(())
    }
}

/// Parse `args` (program name first), run the command and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let ctx = Context {
        args: argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect(),
        tol: cli.global.tol,
        seed: cli.global.seed,
        format: cli.global.format,
    };
    let outcome = (|| -> std::result::Result<(), Failure> {
        if let Some(t) = ctx.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!("--tol must be positive, got {t}")).into());
            }
        }
        let mut sink: Box<dyn Write> = match &cli.global.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        let result = dispatch(&ctx, &cli.command, &mut sink);
        sink.flush()?;
        result
    })();
    match outcome {
        Ok(()) => EXIT_OK,
        Err(f) => {
            match &f {
                Failure::Engine(e) => eprintln!("error: {e}"),
                Failure::Io(e) => eprintln!("error: {e}"),
            }
            f.exit_code()
        }
    }
}

fn emit(out: &mut dyn Write, report: &Report) -> io::Result<()> {
    out.write_all(report.to_json().as_bytes())
}

fn dispatch(ctx: &Context, command: &Command, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let name = command.name();
    match command {
        Command::Sweep {
            metric,
            ranges,
            region,
            varch,
        } => return cmd_sweep(ctx, metric, ranges, region, varch, out),
        Command::Classify { metric, region, varch } => return cmd_classify(ctx, metric, region, varch, out),
        _ => ctx.json_only(name)?,
    }
    let report = match command {
        Command::Curvature { metric, k } => cmd_curvature(ctx, metric, *k)?,
        Command::Model { metric, k } => cmd_model(ctx, metric, *k)?,
        Command::Equiv {
            metric,
            point2,
            family2,
            f2,
            params2,
            k,
            mode,
        } => {
            let fam1 = metric.family()?;
            let fam2 = match (family2, f2, params2.is_empty()) {
                (None, None, true) => fam1.clone(),
                _ => resolve_family(
                    family2.as_deref().unwrap_or(&metric.family),
                    f2.as_deref().or(metric.f.as_deref()),
                    &params2.iter().cloned().collect(),
                )?,
            };
            cmd_equiv(ctx, &fam1, &metric.point(&fam1)?, &fam2, &point2.0, *k, *mode)?
        }
        Command::Stabilizer { metric, k, bases } => cmd_stabilizer(ctx, metric, *k, *bases)?,
        Command::VerifyMap { map, params, samples } => cmd_verify_map(ctx, map, params, *samples)?,
        Command::Mu { metric, base } => cmd_mu(ctx, metric, base.as_ref())?,
        Command::Varch { metric, k, region, mode } => cmd_varch(ctx, metric, *k, region, *mode)?,
        Command::Sweep { .. } | Command::Classify { .. } => unreachable!(),
    };
    emit(out, &report)?;
    Ok(())
}

fn with_family(mut report: Report, fam: &Family) -> Report {
    report.params = fam.params.clone();
    report
}

fn cmd_curvature(ctx: &Context, metric: &MetricArgs, k: usize) -> Result<Report> {
    let fam = metric.family()?;
    let point = metric.point(&fam)?;
    let cutoff = ctx.tol.unwrap_or(CURVATURE_CUTOFF);
    let data = evaluate(&fam.metric, &point, &Params::new(), k)?;
    let coords = fam.metric.coords();
    let rel = |t: &crate::tensor::Tensor| cutoff * t.max_abs().max(1.0);
    let levels: Vec<Value> = data
        .chain
        .iter()
        .enumerate()
        .map(|(ell, t)| json!({"ell": ell, "components": labelled("R", coords, t, 4, rel(t))}))
        .collect();
    let inv = data.invariants();
    let mut report = with_family(ctx.report("curvature"), &fam).tolerance("zero_cutoff", cutoff);
    report.result = json!({
        "family": fam.name,
        "coords": coords,
        "point": point,
        "k": k,
        "metric": matrix(&data.metric),
        "inverse": matrix(&data.inverse),
        "christoffel": {
            "convention": "Gamma[u,v,w] = Gamma_uv^w",
            "components": labelled("Gamma", coords, &data.christoffel, 3, rel(&data.christoffel)),
        },
        "curvature": levels,
        "invariants": {
            "tau": inv.tau,
            "ricci_norm_sq": inv.ricci_norm_sq,
            "riemann_norm_sq": inv.riemann_norm_sq,
        },
    });
    Ok(report)
}

fn cmd_model(ctx: &Context, metric: &MetricArgs, k: usize) -> Result<Report> {
    let fam = metric.family()?;
    let point = metric.point(&fam)?;
    let model = extract_model(&fam.metric, &point, &Params::new(), k)?;
    let coords = fam.metric.coords();
    let cutoff = ctx.tol.unwrap_or(CURVATURE_CUTOFF);
    let frame = match fam.walker_f() {
        Some(f) => match walker_canonical_frame(&model, f, &point, &Params::new()) {
            Ok(c) => serde_json::to_value(c).expect("frame serializes"),
            Err(e) => json!({"unavailable": e.to_string()}),
        },
        None => Value::Null,
    };
    let mut report = with_family(ctx.report("model"), &fam).tolerance("zero_cutoff", cutoff);
    report.result = json!({
        "family": fam.name,
        "coords": coords,
        "point": point,
        "epsilon": matrix(&model.epsilon),
        "signature": model.signature,
        "orders": model.orders(),
        "natural_scale": model.natural_scale(),
        "levels": model.levels.iter().enumerate().map(|(ell, t)| json!({
            "ell": ell,
            "components": labelled("A", coords, t, 4, cutoff * t.max_abs().max(1.0)),
        })).collect::<Vec<_>>(),
        "walker_frame": frame,
    });
    Ok(report)
}

fn cmd_equiv(
    ctx: &Context,
    fam1: &Family,
    p1: &[f64],
    fam2: &Family,
    p2: &[f64],
    k: usize,
    mode: ModeArg,
) -> Result<Report> {
    check_point(fam2, p2)?;
    let cfg = ctx.equivalence();
    let m1 = extract_model(&fam1.metric, p1, &Params::new(), k)?;
    let m2 = extract_model(&fam2.metric, p2, &Params::new(), k)?;
    let mode = match mode {
        ModeArg::Isometry => Mode::Isometry,
        ModeArg::Kv => Mode::Homothety,
    };
    let verdict = kv_equivalent(&m1, &m2, mode, &cfg)?;
    let mut report = with_family(ctx.report("equiv"), fam1)
        .tolerance("tol", cfg.tol)
        .tolerance("invariant_tol", cfg.invariant_tol)
        .tolerance("zero_tol", cfg.zero_tol);
    report.result = json!({
        "first": {"family": fam1.name, "params": fam1.params, "point": p1},
        "second": {"family": fam2.name, "params": fam2.params, "point": p2},
        "k": k,
        "mode": mode,
        "verdict": verdict,
    });
    Ok(report)
}

fn cmd_stabilizer(ctx: &Context, metric: &MetricArgs, k: usize, bases: bool) -> Result<Report> {
    let fam = metric.family()?;
    let point = metric.point(&fam)?;
    let model = extract_model(&fam.metric, &point, &Params::new(), k)?;
    let filtration = stabilizer_filtration(&model);
    let mut report = with_family(ctx.report("stabilizer"), &fam);
    report.result = json!({
        "family": fam.name,
        "point": point,
        "k": k,
        "ambient": filtration.ambient,
        "dims": filtration.dims,
        "singer": filtration.singer,
        "bases": if bases { json!(filtration.bases) } else { Value::Null },
    });
    Ok(report)
}

fn cmd_verify_map(ctx: &Context, name: &str, params: &[(String, f64)], samples: usize) -> Result<Report> {
    let name = if name.starts_with("map:") { name.to_string() } else { format!("map:{name}") };
    let cm = catalog_map(&name, &params.iter().cloned().collect())?;
    let tol = ctx.tol.unwrap_or(MAP_TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let points: Vec<Vec<f64>> = (0..samples).map(|_| cm.family.sample_point(&mut rng)).collect();
    let (check, expected) = match &cm.expectation {
        MapExpectation::Homothety { lambda_sq } => (
            homothety_factor(&cm.map, &cm.family.metric, &points, &Params::new(), tol)?,
            *lambda_sq,
        ),
        MapExpectation::Pullback { target, source } => {
            (compare_pullback(&cm.map, target, source, &points, &Params::new(), tol)?, 1.0)
        }
    };
    let agrees = check.lambda_sq().is_some_and(|l| (l - expected).abs() <= tol * expected.abs().max(1.0));
    let mut report = with_family(ctx.report("verify-map"), &cm.family).tolerance("tol", tol);
    report.result = json!({
        "map": cm.map.name,
        "map_params": cm.map.params,
        "family": cm.family.name,
        "components": cm.map.components.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        "expectation": match cm.expectation {
            MapExpectation::Homothety { .. } => "homothety",
            MapExpectation::Pullback { .. } => "pullback",
        },
        "expected_lambda_sq": expected,
        "check": check,
        "agrees": agrees,
    });
    Ok(report)
}

fn cmd_mu(ctx: &Context, metric: &MetricArgs, base: Option<&Point>) -> Result<Report> {
    let fam = metric.family()?;
    let point = metric.point(&fam)?;
    let base = base.map_or_else(|| fam.default_point(), |b| b.0.clone());
    check_point(&fam, &base)?;
    let m = mu(&fam.metric, &base, &point, &Params::new())?;
    let mut report = with_family(ctx.report("mu"), &fam);
    report.result = json!({"family": fam.name, "mu": m});
    Ok(report)
}

fn row_settings(ctx: &Context, varch: &VarchArgs) -> RowSettings {
    RowSettings {
        tol: ctx.tol.unwrap_or(DEFAULT_TOL),
        varch_k: varch.varch_k,
        varch_mode: varch.varch_mode.into(),
        equivalence: ctx.equivalence(),
    }
}

fn cmd_classify(
    ctx: &Context,
    metric: &MetricArgs,
    region: &RegionArgs,
    varch: &VarchArgs,
    out: &mut dyn Write,
) -> std::result::Result<(), Failure> {
    let fam = metric.family()?;
    let f = fam
        .walker_f()
        .ok_or_else(|| Error::InvalidArgument(format!("family `{}` is not a Walker family", fam.name)))?;
    let region = region.region(&fam)?;
    let settings = row_settings(ctx, varch);
    if ctx.format == Some(Format::Csv) {
        let rows = write_rows(&[(fam, region)], &settings, out, true)?;
        return match rows.into_iter().next().and_then(|r| r.error) {
            Some(e) => Err(e.into()),
            None => Ok(()),
        };
    }
    let class = classify_walker_kv(f, &Params::new(), &region, settings.tol)?;
    let v = variable_kv_check(
        &fam.metric,
        Some(f),
        &Params::new(),
        settings.varch_k,
        &region.with_grid(8, 4),
        settings.varch_mode,
        &settings.equivalence,
    )?;
    let mut report = with_family(ctx.report("classify"), &fam).tolerance("constancy", settings.tol);
    report.result = json!({
        "family": fam.name,
        "f": f.to_string(),
        "region": region,
        "label": class.label(),
        "classification": class,
        "varch": v,
    });
    emit(out, &report)?;
    Ok(())
}

fn cmd_sweep(
    ctx: &Context,
    metric: &MetricArgs,
    ranges: &[ParamRange],
    region: &RegionArgs,
    varch: &VarchArgs,
    out: &mut dyn Write,
) -> std::result::Result<(), Failure> {
    let families: Vec<(Family, Region)> = parameter_grid(ranges)
        .iter()
        .map(|p| {
            let fam = metric.family_with(p)?;
            let r = region.region(&fam)?;
            Ok((fam, r))
        })
        .collect::<Result<_>>()?;
    let settings = row_settings(ctx, varch);
    let csv_output = ctx.format != Some(Format::Json);
    let rows = if csv_output {
        write_rows(&families, &settings, &mut *out, true)?
    } else {
        let rows = write_rows(&families, &settings, io::sink(), false)?;
        let mut report = ctx.report("sweep").tolerance("constancy", settings.tol);
        report.params = metric.overrides();
        report.result = json!({
            "family": metric.family,
            "ranges": ranges.iter().map(|r| json!({"name": r.name, "values": r.values})).collect::<Vec<_>>(),
            "rows": rows,
        });
        emit(out, &report)?;
        rows
    };
    let worst = rows.into_iter().filter_map(|r| r.error).max_by_key(|e| e.is_numeric());
    match worst {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn cmd_varch(
    ctx: &Context,
    metric: &MetricArgs,
    k: Option<usize>,
    region: &RegionArgs,
    mode: VarchMode,
) -> Result<Report> {
    let fam = metric.family()?;
    let k = k.unwrap_or_else(|| fam.profile.as_ref().map_or(2, |p| p.k + 1));
    let region = region.region(&fam)?;
    let cfg = ctx.equivalence();
    let v = variable_kv_check(&fam.metric, fam.walker_f(), &Params::new(), k, &region, mode.into(), &cfg)?;
    let profile = match (&fam.profile, fam.walker_f()) {
        (Some(p), Some(f)) => {
            let jet = f.lift(&[0.0, 1.0, 0.0], &Params::new(), p.k + 2)?;
            let alpha: Vec<f64> = (0..=p.k).map(|ell| jet.derivative(&[ell as u8, 2, 0])).collect();
            json!({"k": p.k, "alpha_at_zero": alpha, "error_estimate": p.error_estimate, "grid": p.grid})
        }
        _ => Value::Null,
    };
    let mut report = with_family(ctx.report("varch"), &fam).tolerance("tol", cfg.tol);
    report.result = json!({
        "family": fam.name,
        "region": region,
        "report": v,
        "profile": profile,
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_and_binding_parsers() {
        assert_eq!("0,1,-2.5".parse::<Point>().unwrap(), Point(vec![0.0, 1.0, -2.5]));
        assert!("0,,1".parse::<Point>().is_err());
        assert!("nan".parse::<Point>().is_err());
        assert_eq!(parse_binding("a=2").unwrap(), ("a".to_string(), 2.0));
        assert!(parse_binding("a").is_err());
        assert_eq!(parse_interval("-1,1").unwrap(), [-1.0, 1.0]);
        assert!(parse_interval("1,-1").is_err());
    }

    #[test]
    fn custom_walker_family() {
        let p: Params = [("a".to_string(), 2.0)].into();
        let fam = resolve_family("walker", Some("a*y^3"), &p).unwrap();
        assert_eq!(fam.walker_f().unwrap().to_string(), "2*y^3");
        assert!(matches!(resolve_family("walker", Some("b*y"), &p), Err(Error::UndeclaredSymbol { .. })));
        assert!(resolve_family("walker", None, &p).is_err());
        assert!(resolve_family("warped:flat", Some("y"), &Params::new()).is_err());
    }
}
