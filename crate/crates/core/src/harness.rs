//! Strong-error experiments.
//!
//! For every Monte Carlo path `p` one [`MasterPath`] is drawn at the
//! reference resolution `(M_ref, K_ref)` from seed `seed + p`. The reference
//! (Milstein at `(N_ref, M_ref, K_ref)`) and every ladder configuration run on
//! that same path, and the error of a coarse run is the `H`-norm of the
//! difference taken in the reference's mode set, the coarse coefficients
//! zero-padded. The RMS error is `sqrt(mean_p e_p^2)`.
//!
//! # Config file
//!
//! Flat `key = value` lines; `#` starts a comment.
//!
//! ```text
//! problem = reacdiff1d
//! schemes = milstein, implicit_euler
//! ladder  = 2, 4, 8, 16, 32
//! ref_n   = 64
//! ref_m   = 32768
//! ref_k   = 64
//! paths   = 100
//! seed    = 1
//! out     = results/reacdiff1d.csv
//! ```
//!
//! Optional keys: `metric` (`rms` or `pathwise`), `threads`,
//! `m_power.<scheme>` (ladder uses `M = N^power`, default from the problem),
//! `noise_family` and `noise_rule` (override the problem's covariance, e.g.
//! `noise_rule = inverse_power:2`).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::noise::{count_random_variables, EigenFamily, EigenvalueRule, MasterPath, RNG_NAME};
use crate::problems::{preset, ProblemSpec};
use crate::schemes::{run_scheme, SchemeConfig, SchemeKind};
use crate::spectral::Field;

/// Columns of the CSV written by [`emit_csv`].
pub const CSV_HEADER: [&str; 9] = [
    "scheme",
    "N",
    "M",
    "K",
    "random_variables",
    "rms_error",
    "stderr",
    "failed_paths",
    "wall_seconds",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorMetric {
    /// Root mean square over paths.
    Rms,
    /// Single-path error; requires `paths = 1`.
    Pathwise,
}

impl ErrorMetric {
    pub fn name(self) -> &'static str {
        match self {
            ErrorMetric::Rms => "rms",
            ErrorMetric::Pathwise => "pathwise",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub problem: String,
    pub schemes: Vec<SchemeKind>,
    pub ladder: Vec<usize>,
    pub ref_n: usize,
    pub ref_m: usize,
    pub ref_k: usize,
    pub paths: usize,
    pub seed: u64,
    pub metric: ErrorMetric,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Per-scheme `M = N^power` overrides.
    pub m_power: BTreeMap<SchemeKind, u32>,
    pub noise_family: Option<EigenFamily>,
    pub noise_rule: Option<EigenvalueRule>,
}

impl ExperimentConfig {
    /// Config with defaults for everything but the problem and the reference.
    pub fn new(
        problem: &str,
        schemes: Vec<SchemeKind>,
        ladder: Vec<usize>,
        reference: (usize, usize, usize),
    ) -> Self {
        Self {
            problem: problem.to_string(),
            schemes,
            ladder,
            ref_n: reference.0,
            ref_m: reference.1,
            ref_k: reference.2,
            paths: 100,
            seed: 0,
            metric: ErrorMetric::Rms,
            out: None,
            threads: None,
            m_power: BTreeMap::new(),
            noise_family: None,
            noise_rule: None,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                message: format!("expected key = value, got '{line}'"),
            })?;
            let key = key.trim().to_string();
            if values
                .insert(key.clone(), (i + 1, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::Config {
                    line: i + 1,
                    message: format!("duplicate key '{key}'"),
                });
            }
        }

        let bad = |line: usize, message: String| Error::Config { line, message };
        let mut take = |key: &str| values.remove(key);
        let required = |entry: Option<(usize, String)>, key: &str| {
            entry.ok_or_else(|| bad(0, format!("missing required key '{key}'")))
        };
        fn number<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config {
                line,
                message: format!("'{key}' expects a non-negative integer, got '{v}'"),
            })
        }

        let (_, problem) = required(take("problem"), "problem")?;
        let (line, schemes) = required(take("schemes"), "schemes")?;
        let schemes = schemes
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<SchemeKind>()
                    .map_err(|e| bad(line, e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let (line, ladder) = required(take("ladder"), "ladder")?;
        let ladder = ladder
            .split(',')
            .map(|s| number(line, "ladder", s.trim()))
            .collect::<Result<Vec<usize>>>()?;
        let (line, v) = required(take("ref_n"), "ref_n")?;
        let ref_n = number(line, "ref_n", &v)?;
        let (line, v) = required(take("ref_m"), "ref_m")?;
        let ref_m = number(line, "ref_m", &v)?;
        let (line, v) = required(take("ref_k"), "ref_k")?;
        let ref_k = number(line, "ref_k", &v)?;

        let mut config = Self::new(&problem, schemes, ladder, (ref_n, ref_m, ref_k));
        if let Some((line, v)) = take("paths") {
            config.paths = number(line, "paths", &v)?;
        }
        if let Some((line, v)) = take("seed") {
            config.seed = number(line, "seed", &v)?;
        }
        if let Some((_, v)) = take("out") {
            config.out = Some(PathBuf::from(v));
        }
        if let Some((line, v)) = take("threads") {
            config.threads = Some(number(line, "threads", &v)?);
        }
        if let Some((line, v)) = take("metric") {
            config.metric = match v.as_str() {
                "rms" => ErrorMetric::Rms,
                "pathwise" => ErrorMetric::Pathwise,
                other => {
                    return Err(bad(
                        line,
                        format!("unknown metric '{other}', expected rms or pathwise"),
                    ))
                }
            };
        }
        if let Some((line, v)) = take("noise_family") {
            config.noise_family =
                Some(EigenFamily::from_tag(&v).map_err(|e| bad(line, e.to_string()))?);
        }
        if let Some((line, v)) = take("noise_rule") {
            config.noise_rule =
                Some(EigenvalueRule::parse(&v).map_err(|e| bad(line, e.to_string()))?);
        }
        for (key, (line, v)) in values {
            match key.strip_prefix("m_power.") {
                Some(scheme) => {
                    let kind = scheme
                        .parse::<SchemeKind>()
                        .map_err(|e| bad(line, e.to_string()))?;
                    config.m_power.insert(kind, number(line, &key, &v)?);
                }
                None => return Err(bad(line, format!("unknown key '{key}'"))),
            }
        }
        Ok(config)
    }

    /// The config as `key = value` text that [`Self::parse`] reads back.
    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(", ");
        let mut s = String::new();
        let _ = writeln!(s, "problem = {}", self.problem);
        let _ = writeln!(
            s,
            "schemes = {}",
            join(self.schemes.iter().map(|k| k.name().to_string()).collect())
        );
        let _ = writeln!(
            s,
            "ladder = {}",
            join(self.ladder.iter().map(|n| n.to_string()).collect())
        );
        let _ = writeln!(s, "ref_n = {}", self.ref_n);
        let _ = writeln!(s, "ref_m = {}", self.ref_m);
        let _ = writeln!(s, "ref_k = {}", self.ref_k);
        let _ = writeln!(s, "paths = {}", self.paths);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "metric = {}", self.metric.name());
        if let Some(out) = &self.out {
            let _ = writeln!(s, "out = {}", out.display());
        }
        if let Some(t) = self.threads {
            let _ = writeln!(s, "threads = {t}");
        }
        for (kind, p) in &self.m_power {
            let _ = writeln!(s, "m_power.{} = {p}", kind.name());
        }
        if let Some(f) = self.noise_family {
            let _ = writeln!(s, "noise_family = {}", f.tag());
        }
        if let Some(r) = &self.noise_rule {
            let _ = writeln!(s, "noise_rule = {}", r.name());
        }
        s
    }

    /// The named preset with any noise overrides applied.
    pub fn resolve_problem(&self) -> Result<ProblemSpec> {
        let mut problem = preset(&self.problem)?;
        if let Some(family) = self.noise_family {
            problem.noise.family = family;
        }
        if let Some(rule) = &self.noise_rule {
            problem.noise.rule = rule.clone();
        }
        problem.noise.validate()?;
        if problem.noise.dim() != problem.dim {
            return Err(Error::InvalidParameter(format!(
                "noise family '{}' does not match the {}-dimensional problem",
                problem.noise.family.tag(),
                problem.dim
            )));
        }
        Ok(problem)
    }

    /// `(M, K)` of a ladder point.
    pub fn coupling(&self, problem: &ProblemSpec, kind: SchemeKind, n: usize) -> (usize, usize) {
        let (m, k) = problem.recommended(kind, n);
        match self.m_power.get(&kind) {
            Some(&p) => (n.pow(p), k),
            None => (m, k),
        }
    }

    pub fn scheme_config(&self, problem: &ProblemSpec, kind: SchemeKind, n: usize) -> SchemeConfig {
        let (steps, k) = self.coupling(problem, kind, n);
        SchemeConfig {
            kind,
            n,
            steps,
            k,
            horizon: problem.horizon,
        }
    }

    pub fn reference_config(&self, problem: &ProblemSpec) -> SchemeConfig {
        SchemeConfig {
            kind: SchemeKind::Milstein,
            n: self.ref_n,
            steps: self.ref_m,
            k: self.ref_k,
            horizon: problem.horizon,
        }
    }

    /// Checks `M | M_ref`, `K <= K_ref` and `N <= N_ref` for every ladder point.
    pub fn validate(&self, problem: &ProblemSpec) -> Result<()> {
        if self.ref_n == 0 || self.ref_m == 0 || self.ref_k == 0 {
            return Err(Error::InvalidParameter(
                "reference resolution must be positive".into(),
            ));
        }
        if self.paths == 0 {
            return Err(Error::InvalidParameter("paths must be at least 1".into()));
        }
        if self.metric == ErrorMetric::Pathwise && self.paths != 1 {
            return Err(Error::InvalidParameter(format!(
                "pathwise metric uses a single path, got paths = {}",
                self.paths
            )));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParameter("threads must be at least 1".into()));
        }
        for &kind in &self.schemes {
            for &n in &self.ladder {
                let (m, k) = self.coupling(problem, kind, n);
                if n == 0 || m == 0 || k == 0 {
                    return Err(Error::InvalidParameter(format!(
                        "{kind} at N = {n} has a zero resolution"
                    )));
                }
                if n > self.ref_n {
                    return Err(Error::InvalidParameter(format!(
                        "ladder N = {n} exceeds reference N = {}",
                        self.ref_n
                    )));
                }
                if !self.ref_m.is_multiple_of(m) {
                    return Err(Error::StepsDoNotDivide {
                        steps: m,
                        master_steps: self.ref_m,
                    });
                }
                if k > self.ref_k {
                    return Err(Error::ModeBudgetExceeded {
                        k,
                        k_ref: self.ref_k,
                    });
                }
            }
        }
        Ok(())
    }
}

/// One `(scheme, N)` point of a study.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub scheme: SchemeKind,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    /// `count_random_variables(M, J_K)`.
    pub random_variables: u64,
    /// Normals actually consumed by one run, as instrumented.
    pub draws: u64,
    pub rms_error: f64,
    /// Standard error of `rms_error` (delta method on the mean of `e_p^2`);
    /// NaN with fewer than two successful paths.
    pub stderr: f64,
    pub failed_paths: usize,
    pub wall_seconds: f64,
    /// Per-path squared errors in path order; `None` marks a failed path.
    pub squared_errors: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeSlopes {
    pub scheme: SchemeKind,
    pub vs_n: Option<f64>,
    pub vs_random_variables: Option<f64>,
    /// Ladder points that entered the fit.
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub problem: String,
    pub reference: (usize, usize, usize),
    pub paths: usize,
    pub seed: u64,
    pub metric: ErrorMetric,
    /// Reference self-distance: zero, the reference is deterministic per path.
    pub floor: f64,
    /// Paths on which the reference itself went non-finite.
    pub reference_failures: usize,
    pub rows: Vec<ConvergenceRow>,
    pub slopes: Vec<SchemeSlopes>,
}

impl ConvergenceReport {
    pub fn row(&self, scheme: SchemeKind, n: usize) -> Option<&ConvergenceRow> {
        self.rows.iter().find(|r| r.scheme == scheme && r.n == n)
    }

    pub fn slopes_for(&self, scheme: SchemeKind) -> Option<&SchemeSlopes> {
        self.slopes.iter().find(|s| s.scheme == scheme)
    }
}

/// `||a - b||_H` with both spectral fields zero-padded to the larger `N`.
pub fn padded_distance(a: &Field, b: &Field) -> Result<f64> {
    let n = a.n().max(b.n());
    a.resize_spectral(n)?
        .sub(&b.resize_spectral(n)?)?
        .spectral_norm()
}

struct PathOutcome {
    squared: Vec<Option<f64>>,
    seconds: Vec<f64>,
    draws: Vec<Option<u64>>,
    reference_failed: bool,
}

fn run_path(problem: &ProblemSpec, config: &ExperimentConfig, p: usize) -> Result<PathOutcome> {
    let spec = problem.noise_with_k(config.ref_k);
    let seed = config.seed.wrapping_add(p as u64);
    let path = MasterPath::generate(seed, &spec, config.ref_m, config.ref_k, problem.horizon)?;
    let reference = match run_scheme(problem, &config.reference_config(problem), &path) {
        Ok(out) => Some(out.state),
        Err(Error::NonFinite { .. }) => None,
        Err(e) => return Err(e),
    };
    let rows = config.schemes.len() * config.ladder.len();
    let mut outcome = PathOutcome {
        squared: Vec::with_capacity(rows),
        seconds: Vec::with_capacity(rows),
        draws: Vec::with_capacity(rows),
        reference_failed: reference.is_none(),
    };
    for &kind in &config.schemes {
        for &n in &config.ladder {
            let start = Instant::now();
            let run = run_scheme(problem, &config.scheme_config(problem, kind, n), &path);
            outcome.seconds.push(start.elapsed().as_secs_f64());
            match (run, &reference) {
                (Ok(out), Some(r)) => {
                    let d = padded_distance(r, &out.state)?;
                    outcome.squared.push(Some(d * d));
                    outcome.draws.push(Some(out.draws));
                }
                (Ok(out), None) => {
                    outcome.squared.push(None);
                    outcome.draws.push(Some(out.draws));
                }
                (Err(Error::NonFinite { .. }), _) => {
                    outcome.squared.push(None);
                    outcome.draws.push(None);
                }
                (Err(e), _) => return Err(e),
            }
        }
    }
    Ok(outcome)
}

/// Runs the study; see the module docs for the protocol.
pub fn estimate_rms_error(
    problem: &ProblemSpec,
    config: &ExperimentConfig,
) -> Result<ConvergenceReport> {
    config.validate(problem)?;
    let compute = || -> Result<Vec<PathOutcome>> {
        (0..config.paths)
            .into_par_iter()
            .map(|p| run_path(problem, config, p))
            .collect()
    };
    let outcomes = match config.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(compute)?,
        None => compute()?,
    };

    let mut rows = Vec::new();
    let mut index = 0;
    for &kind in &config.schemes {
        for &n in &config.ladder {
            let (m, k) = config.coupling(problem, kind, n);
            let squared: Vec<Option<f64>> = outcomes.iter().map(|o| o.squared[index]).collect();
            let wall_seconds = outcomes.iter().map(|o| o.seconds[index]).sum();
            let draws = outcomes.iter().find_map(|o| o.draws[index]).unwrap_or(0);
            let (rms_error, stderr) = rms_with_stderr(&squared);
            rows.push(ConvergenceRow {
                scheme: kind,
                n,
                m,
                k,
                random_variables: count_random_variables(m as u64, &problem.noise_with_k(k)),
                draws,
                rms_error,
                stderr,
                failed_paths: squared.iter().filter(|s| s.is_none()).count(),
                wall_seconds,
                squared_errors: squared,
            });
            index += 1;
        }
    }
    let mut report = ConvergenceReport {
        problem: problem.name.clone(),
        reference: (config.ref_n, config.ref_m, config.ref_k),
        paths: config.paths,
        seed: config.seed,
        metric: config.metric,
        floor: 0.0,
        reference_failures: outcomes.iter().filter(|o| o.reference_failed).count(),
        rows,
        slopes: Vec::new(),
    };
    report.slopes = fit_slopes(&report);
    Ok(report)
}

/// `sqrt(mean e^2)` and its standard error over the successful paths,
/// accumulated in path order.
pub fn rms_with_stderr(squared: &[Option<f64>]) -> (f64, f64) {
    let ok: Vec<f64> = squared.iter().flatten().copied().collect();
    if ok.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let p = ok.len() as f64;
    let mean = ok.iter().sum::<f64>() / p;
    let rms = mean.sqrt();
    if ok.len() < 2 {
        return (rms, f64::NAN);
    }
    let var = ok.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (p - 1.0);
    let se_mean = (var / p).sqrt();
    let se = if rms > 0.0 {
        se_mean / (2.0 * rms)
    } else {
        0.0
    };
    (rms, se)
}

/// Ordinary least-squares slope of `log y` on `log x`, skipping points with
/// `y < 10 floor`, `y <= 0` or non-finite values. `None` with fewer than two
/// usable points.
pub fn log_log_slope(points: &[(f64, f64)], floor: f64) -> Option<(f64, usize)> {
    let used: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| {
            x.is_finite() && *x > 0.0 && y.is_finite() && *y > 0.0 && *y >= 10.0 * floor
        })
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if used.len() < 2 {
        return None;
    }
    let n = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
    let my = used.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = used.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some((sxy / sxx, used.len()))
}

/// Log-log slopes of the RMS error against `N` and against the random
/// variable count, one entry per scheme in report order.
pub fn fit_slopes(report: &ConvergenceReport) -> Vec<SchemeSlopes> {
    let mut schemes: Vec<SchemeKind> = Vec::new();
    for row in &report.rows {
        if !schemes.contains(&row.scheme) {
            schemes.push(row.scheme);
        }
    }
    schemes
        .into_iter()
        .map(|scheme| {
            let rows: Vec<&ConvergenceRow> =
                report.rows.iter().filter(|r| r.scheme == scheme).collect();
            let vs_n: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.rms_error)).collect();
            let vs_rv: Vec<(f64, f64)> = rows
                .iter()
                .map(|r| (r.random_variables as f64, r.rms_error))
                .collect();
            let a = log_log_slope(&vs_n, report.floor);
            let b = log_log_slope(&vs_rv, report.floor);
            SchemeSlopes {
                scheme,
                vs_n: a.map(|s| s.0),
                vs_random_variables: b.map(|s| s.0),
                points: a.map_or(0, |s| s.1),
            }
        })
        .collect()
}

/// Writes the report rows as CSV (header always present).
pub fn emit_csv(report: &ConvergenceReport, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(CSV_HEADER)?;
    for r in &report.rows {
        w.write_record([
            r.scheme.name().to_string(),
            r.n.to_string(),
            r.m.to_string(),
            r.k.to_string(),
            r.random_variables.to_string(),
            format!("{:e}", r.rms_error),
            format!("{:e}", r.stderr),
            r.failed_paths.to_string(),
            format!("{:.6}", r.wall_seconds),
        ])?;
    }
    w.flush().map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

/// Path of the metadata file that accompanies a CSV: `<csv>.meta`.
pub fn metadata_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Writes the config, RNG name and fitted slopes next to the CSV.
pub fn write_metadata(
    report: &ConvergenceReport,
    config: &ExperimentConfig,
    path: &Path,
) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "# rng = {RNG_NAME}");
    let _ = writeln!(
        s,
        "# reference = milstein N={} M={} K={}",
        report.reference.0, report.reference.1, report.reference.2
    );
    let _ = writeln!(s, "# reference_failures = {}", report.reference_failures);
    for sl in &report.slopes {
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(
            s,
            "# slope {}: vs_N = {}, vs_random_variables = {}, points = {}",
            sl.scheme,
            fmt(sl.vs_n),
            fmt(sl.vs_random_variables),
            sl.points
        );
    }
    s.push_str(&config.to_text());
    fs::write(path, s).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// One line of the random-variable accounting table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountRow {
    pub scheme: SchemeKind,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub random_variables: u64,
}

/// Closed-form random-variable counts for every ladder point.
pub fn count_table(problem: &ProblemSpec, config: &ExperimentConfig) -> Vec<CountRow> {
    let mut rows = Vec::new();
    for &scheme in &config.schemes {
        for &n in &config.ladder {
            let (m, k) = config.coupling(problem, scheme, n);
            rows.push(CountRow {
                scheme,
                n,
                m,
                k,
                random_variables: count_random_variables(m as u64, &problem.noise_with_k(k)),
            });
        }
    }
    rows
}
