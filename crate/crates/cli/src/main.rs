//! `maier-lab`: command-line access to the library.
//!
//! Every subcommand prints JSON by default (CSV for `buchstab`), carrying a
//! manifest that is a pure function of the arguments and inputs, so equal
//! invocations give byte-identical output. Wall time goes to stderr.

mod cache;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use maier_lab::admissible::{self, AdmissibleProfile};
use maier_lab::buchstab::{e_gamma, BuchstabTable, EULER_GAMMA};
use maier_lab::local_densities::{self, SingularSeries};
use maier_lab::maier::{self, MaierConfig, MaierResult};
use maier_lab::patterns::{self, LatticeBox, PatternCounter};
use maier_lab::sieve::SieveMode;
use maier_lab::{Complexity, Error, LinearSystem};

#[derive(Parser)]
#[command(name = "maier-lab", version, about = "Prime patterns of linear systems: densities, sieves and Maier matrices")]
struct Cli {
    /// Worker threads (default: available parallelism). Does not change results.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// Output format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Prime,
    Rough,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Count,
    Bits,
    List,
}

#[derive(Subcommand)]
enum Command {
    /// Dimension, size and complexity of a system.
    Analyze {
        #[arg(long)]
        system: PathBuf,
        /// Largest number of other forms the partition search handles.
        #[arg(long, default_value_t = maier_lab::linear_forms::DEFAULT_COMPLEXITY_BOUND)]
        bound: usize,
    },
    /// Local densities beta_p for p <= zmax and their product.
    Densities {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        zmax: u64,
    },
    /// Tabulate the Buchstab function.
    Buchstab {
        #[arg(long, default_value_t = 10.0)]
        umax: f64,
        #[arg(long, default_value_t = 1e-4)]
        step: f64,
        /// Report sign changes of e^gamma omega(u) - 1 instead of the table (CSV)
        /// or alongside it (JSON).
        #[arg(long)]
        crossings: bool,
        /// Also pick points u+ and u- at or beyond this value.
        #[arg(long)]
        u_min: Option<f64>,
    },
    /// Sieve the half-open range [lo, hi).
    Sieve {
        #[arg(long, allow_hyphen_values = true)]
        lo: i64,
        #[arg(long, allow_hyphen_values = true)]
        hi: i64,
        #[arg(long, value_enum, default_value_t = Kind::Prime)]
        mode: Kind,
        #[arg(long, required_if_eq("mode", "rough"))]
        z: Option<u64>,
        #[arg(long, value_enum, default_value_t = Emit::Count)]
        emit: Emit,
    },
    /// Admissible residue counts mod P(z), with optional samples.
    Admissible {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        z: u64,
        #[arg(long)]
        sample: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Count prime or rough patterns over a box.
    Count {
        #[arg(long)]
        system: PathBuf,
        /// Box as "x1:H1,...,xd:Hd", coordinate j ranging over [xj, xj + Hj).
        #[arg(long = "box", allow_hyphen_values = true)]
        region: String,
        #[arg(long, value_enum, default_value_t = Kind::Prime)]
        kind: Kind,
        #[arg(long, required_if_eq("kind", "rough"))]
        z: Option<u64>,
        /// Emit the asymptotic prediction and the ratio.
        #[arg(long)]
        predict: bool,
        /// Scale X used in log X (default: smallest |form value| on the box).
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        series_cutoff: u64,
    },
    /// Run a Maier matrix experiment from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Row CSV sidecar (default: next to --out, with extension .rows.csv).
        #[arg(long)]
        rows_csv: Option<PathBuf>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override Q by the product of these primes, e.g. "2,3,7".
        #[arg(long, value_delimiter = ',')]
        prime_subset: Option<Vec<u64>>,
    },
}

enum Failure {
    Domain(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

impl Failure {
    fn code(&self) -> &'static str {
        match self {
            Failure::Domain(e) => e.code(),
            Failure::Io(_) => "IO_ERROR",
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Domain(e) => e.to_string(),
            Failure::Io(m) => m.clone(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

#[derive(Serialize)]
struct Manifest {
    command: Vec<String>,
    config_digest: Option<String>,
    seed: Option<u64>,
    version: &'static str,
    outputs: Vec<String>,
}

struct Report {
    json: Value,
    csv: String,
    default_format: Format,
}

impl Report {
    fn json(json: Value, csv: String) -> Self {
        Report { json, csv, default_format: Format::Json }
    }
}

struct Context {
    command: Vec<String>,
    digest: Option<String>,
    seed: Option<u64>,
    outputs: Vec<String>,
}

impl Context {
    fn manifest(&self) -> Manifest {
        Manifest {
            command: self.command.clone(),
            config_digest: self.digest.clone(),
            seed: self.seed,
            version: maier_lab::VERSION,
            outputs: self.outputs.clone(),
        }
    }
}

/// The argument list without `--threads`, which never affects results.
fn canonical_command() -> Vec<String> {
    let mut out = vec!["maier-lab".to_string()];
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        if a == "--threads" {
            args.next();
        } else if !a.starts_with("--threads=") {
            out.push(a);
        }
    }
    out
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn read_system(path: &Path, ctx: &mut Context) -> CliResult<LinearSystem> {
    let system = LinearSystem::parse(&read_text(path)?)?;
    ctx.digest = Some(sha256_hex(serde_json::to_string(&system).expect("rows serialize").as_bytes()));
    Ok(system)
}

fn big(n: impl ToString) -> Value {
    Value::String(n.to_string())
}

fn analyze(path: &Path, bound: usize, ctx: &mut Context) -> CliResult<Report> {
    let system = read_system(path, ctx)?;
    let complexity = system.complexity_with_bound(bound)?;
    let value = match complexity {
        Complexity::Finite(s) => json!(s),
        Complexity::Infinite => Value::Null,
    };
    let finite = complexity != Complexity::Infinite;
    let json = json!({
        "d": system.dimension(),
        "t": system.size(),
        "finite": finite,
        "complexity": value,
        "forms": system.to_text().lines().collect::<Vec<_>>(),
    });
    let csv = format!("d,t,finite,complexity\n{},{},{},{}\n", system.dimension(), system.size(), finite, complexity);
    Ok(Report::json(json, csv))
}

fn densities(path: &Path, zmax: u64, ctx: &mut Context) -> CliResult<Report> {
    let system = read_system(path, ctx)?;
    let finite = system.is_finite_complexity();
    let mut warnings = Vec::new();
    let series: SingularSeries = if finite {
        match local_densities::singular_series(&system, zmax) {
            Ok(s) => s,
            Err(e @ Error::CutoffTooSmall { .. }) => {
                warnings.push(format!("no tail bound: {e}"));
                local_densities::truncated_product(&system, zmax)?
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        warnings.push("infinite complexity: the product need not converge, no tail bound".to_string());
        local_densities::truncated_product(&system, zmax)?
    };
    let mut csv = String::from("p,numerator,denominator,value\n");
    let rows: Vec<Value> = series
        .factors
        .iter()
        .map(|f| {
            let _ = writeln!(csv, "{},{},{},{}", f.prime, f.numerator(), f.denominator(), f.to_f64());
            json!({
                "p": f.prime,
                "numerator": big(f.numerator()),
                "denominator": big(f.denominator()),
                "value": f.to_f64(),
            })
        })
        .collect();
    let json = json!({
        "d": system.dimension(),
        "t": system.size(),
        "zmax": zmax,
        "finite_complexity": finite,
        "densities": rows,
        "truncated_product": series.truncated_value,
        "tail_bound": series.tail_bound,
        "interval": series.interval().map(|(lo, hi)| vec![lo, hi]),
        "warnings": warnings,
    });
    Ok(Report::json(json, csv))
}

fn buchstab(umax: f64, step: f64, crossings: bool, u_min: Option<f64>) -> CliResult<Report> {
    let table = BuchstabTable::build(step, umax)?;
    let eg = e_gamma();
    let mut values = Vec::new();
    let mut table_csv = String::from("u,omega,excess\n");
    for (u, w) in table.points() {
        let excess = eg * w - 1.0;
        let _ = writeln!(table_csv, "{u},{w},{excess}");
        values.push(json!([u, w, excess]));
    }
    let found = if crossings { Some(table.find_crossings(1.0, table.u_max())?) } else { None };
    let picked = u_min.map(|m| table.pick_u_pm(m)).transpose()?;
    let csv = match &found {
        Some(list) => {
            let mut s = String::from("u,sign_after\n");
            for c in list {
                let _ = writeln!(s, "{},{}", c.u, c.sign_after);
            }
            s
        }
        None => table_csv,
    };
    let json = json!({
        "step": table.step(),
        "u_max": table.u_max(),
        "gamma": EULER_GAMMA,
        "crossings": found,
        "u_plus": picked.map(|p| p.0),
        "u_minus": picked.map(|p| p.1),
        "table": values,
    });
    Ok(Report { json, csv, default_format: Format::Csv })
}

fn sieve_mode(kind: Kind, z: Option<u64>) -> SieveMode {
    match kind {
        Kind::Prime => SieveMode::Prime,
        Kind::Rough => SieveMode::Rough(z.expect("clap requires z in rough mode")),
    }
}

fn sieve(lo: i64, hi: i64, kind: Kind, z: Option<u64>, emit: Emit) -> CliResult<Report> {
    let mode = sieve_mode(kind, z);
    if hi < lo {
        return Err(Error::InvalidArgument(format!("empty range [{lo}, {hi})")).into());
    }
    let magnitude = lo.unsigned_abs().max(hi.unsigned_abs());
    let table = cache::covering_table(magnitude, z.unwrap_or(2));
    let s = table.sieve_range(lo, hi, mode)?;
    let mut json = json!({ "lo": lo, "hi": hi, "mode": mode, "count": s.count() });
    let csv = match emit {
        Emit::Count => format!("lo,hi,count\n{lo},{hi},{}\n", s.count()),
        Emit::Bits => {
            let bits: String = (lo..hi).map(|n| if s.get(n) { '1' } else { '0' }).collect();
            let mut csv = String::from("n,bit\n");
            for (n, b) in (lo..hi).zip(bits.chars()) {
                let _ = writeln!(csv, "{n},{b}");
            }
            json["bits"] = Value::String(bits);
            csv
        }
        Emit::List => {
            let list: Vec<i64> = s.iter().collect();
            let mut csv = String::from("n\n");
            for n in &list {
                let _ = writeln!(csv, "{n}");
            }
            json["values"] = json!(list);
            csv
        }
    };
    Ok(Report::json(json, csv))
}

fn admissible_cmd(path: &Path, z: u64, sample: Option<u64>, seed: u64, ctx: &mut Context) -> CliResult<Report> {
    let system = read_system(path, ctx)?;
    let profile = AdmissibleProfile::build(&system, z)?;
    let mut csv = String::from("p,count\n");
    let counts: Vec<Value> = profile
        .per_prime()
        .map(|(p, c)| {
            let _ = writeln!(csv, "{p},{c}");
            json!({ "p": p, "count": big(c) })
        })
        .collect();
    let mut samples = Vec::new();
    if let Some(n) = sample {
        ctx.seed = Some(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..n {
            let tuple = admissible::sample_admissible(&profile, &mut rng)?;
            let residues: Vec<Value> = tuple.residues.iter().map(|(p, a)| json!({ "p": p, "a": a })).collect();
            let combined = tuple.combine().map(|v| v.iter().map(big).collect::<Vec<_>>());
            samples.push(json!({ "residues": residues, "combined": combined }));
        }
    }
    let json = json!({
        "z": z,
        "modulus": big(profile.modulus()),
        "total": big(profile.total()),
        "degenerate": profile.is_degenerate(),
        "identity_check": admissible::admissible_count_identity_check(&profile),
        "counts": counts,
        "samples": samples,
    });
    Ok(Report::json(json, csv))
}

#[allow(clippy::too_many_arguments)]
fn count(
    path: &Path,
    region: &str,
    kind: Kind,
    z: Option<u64>,
    predict: bool,
    scale: Option<f64>,
    series_cutoff: u64,
    ctx: &mut Context,
) -> CliResult<Report> {
    let system = read_system(path, ctx)?;
    let target: LatticeBox = region.parse()?;
    let mode = sieve_mode(kind, z);
    let table = cache::covering_table(patterns::max_magnitude(&system, &target), z.unwrap_or(2));
    let observed = PatternCounter::with_table(&system, &target, mode, &table)?.count(&target)?;
    let mut json = json!({
        "box": target.to_string(),
        "kind": mode,
        "z": z,
        "volume": target.volume(),
        "observed": observed,
    });
    let mut csv_head = String::from("box,observed");
    let mut csv_row = format!("\"{target}\",{observed}");
    if predict {
        let (predicted, extra) = match mode {
            SieveMode::Prime => {
                let x = scale.unwrap_or(patterns::default_scale(&system, &target) as f64);
                let series = local_densities::truncated_product(&system, series_cutoff)?;
                let p = patterns::predicted_prime_count(&system, &target, x, &series)?;
                (p, json!({ "scale": x, "series": series.truncated_value }))
            }
            SieveMode::Rough(z) => {
                let u = patterns::rough_exponent(&target, z);
                let table = BuchstabTable::build(1e-4, (u + 1.0).max(10.0))?;
                let p = patterns::predicted_rough_count(&system, &target, z, &table)?;
                (p, json!({ "u": u }))
            }
        };
        json["predicted"] = json!(predicted);
        json["ratio"] = json!(observed as f64 / predicted);
        for (k, v) in extra.as_object().unwrap() {
            json[k] = v.clone();
        }
        csv_head.push_str(",predicted,ratio");
        let _ = write!(csv_row, ",{predicted},{}", observed as f64 / predicted);
    }
    Ok(Report::json(json, format!("{csv_head}\n{csv_row}\n")))
}

fn rows_csv(result: &MaierResult, d: usize) -> String {
    let mut s = String::new();
    for j in 1..=d {
        let _ = write!(s, "r{j},");
    }
    s.push_str("count,full,ratio,plain_ratio\n");
    for row in &result.rows {
        for rj in &row.r {
            let _ = write!(s, "{rj},");
        }
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let _ = writeln!(s, "{},{},{},{}", row.count, row.full, opt(row.ratio), opt(row.plain_ratio));
    }
    s
}

fn experiment(
    path: &Path,
    out: Option<&Path>,
    rows_path: Option<&Path>,
    seed: Option<u64>,
    prime_subset: Option<Vec<u64>>,
    ctx: &mut Context,
) -> CliResult<(Report, Option<(PathBuf, String)>)> {
    let text = read_text(path)?;
    let mut config: MaierConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::Domain(Error::ConfigInfeasible(format!("{}: {e}", path.display()))))?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if prime_subset.is_some() {
        config.prime_subset = prime_subset;
    }
    ctx.digest = Some(sha256_hex(serde_json::to_string(&config).expect("config serializes").as_bytes()));
    ctx.seed = Some(config.seed);

    let result = maier::run_experiment(&config)?;
    let (short_boxes, short_error) = match maier::extremal_short_boxes(&config, &result, config.lambda) {
        Ok(b) => (Some(b), None),
        Err(e) => (None, Some(json!({ "code": e.code(), "message": e.to_string() }))),
    };
    let csv = rows_csv(&result, config.system.dimension());
    let sidecar = rows_path.map(Path::to_path_buf).or_else(|| out.map(|o| o.with_extension("rows.csv")));
    if let Some(o) = out {
        ctx.outputs.push(o.display().to_string());
    }
    if let Some(p) = &sidecar {
        ctx.outputs.push(p.display().to_string());
    }
    let json = json!({
        "config": config,
        "result": result,
        "short_boxes": short_boxes,
        "short_boxes_error": short_error,
    });
    Ok((Report::json(json, csv.clone()), sidecar.map(|p| (p, csv))))
}

fn run(cli: Cli) -> CliResult<()> {
    let mut ctx = Context { command: canonical_command(), digest: None, seed: None, outputs: Vec::new() };
    let mut json_target: Option<PathBuf> = None;
    let report = match cli.command {
        Command::Analyze { system, bound } => analyze(&system, bound, &mut ctx)?,
        Command::Densities { system, zmax } => densities(&system, zmax, &mut ctx)?,
        Command::Buchstab { umax, step, crossings, u_min } => buchstab(umax, step, crossings, u_min)?,
        Command::Sieve { lo, hi, mode, z, emit } => sieve(lo, hi, mode, z, emit)?,
        Command::Admissible { system, z, sample, seed } => admissible_cmd(&system, z, sample, seed, &mut ctx)?,
        Command::Count { system, region, kind, z, predict, scale, series_cutoff } => {
            count(&system, &region, kind, z, predict, scale, series_cutoff, &mut ctx)?
        }
        Command::Experiment { config, out, rows_csv, seed, prime_subset } => {
            let (report, sidecar) =
                experiment(&config, out.as_deref(), rows_csv.as_deref(), seed, prime_subset, &mut ctx)?;
            if let Some((path, csv)) = sidecar {
                write_text(&path, &csv)?;
            }
            json_target = out;
            report
        }
    };
    let text = match cli.format.unwrap_or(report.default_format) {
        Format::Csv => report.csv,
        Format::Json => {
            let mut json = report.json;
            json["manifest"] = serde_json::to_value(ctx.manifest()).expect("manifest serializes");
            let mut s = serde_json::to_string_pretty(&json).expect("output serializes");
            s.push('\n');
            s
        }
    };
    match json_target {
        Some(path) => write_text(&path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    let start = Instant::now();
    let outcome = run(cli);
    eprintln!("wall time: {:.3} s", start.elapsed().as_secs_f64());
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let err = json!({ "error": { "code": f.code(), "message": f.message() } });
            eprintln!("{err}");
            ExitCode::from(1)
        }
    }
}
