//! Command-line front end. Every subcommand writes its files to the output
//! directory and prints one summary line; each CSV starts with the job
//! configuration as a `#` JSON line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{rao_blackwell_table, split_estimator_stats, taylor_maker, taylor_uniform_failure, C0Rule, Gamma};
use crate::aqp::{geometric_budgets, AqpOptions, AqpSolver, ParetoPoint};
use crate::binom::{bias_profile, variance};
use crate::error::{Error, Result};
use crate::estimators::{plugin_log_table, taylor_bt_table, u_statistic_table, PolynomialReward, Sign};
use crate::game::{run_game_grpo, run_mirror_descent, GameSpec, GameTrace, StepRule};
use crate::grid::{build_grid, Scheme, DEFAULT_M};
use crate::minimax::{scaling_study, solve_minimax, MinimaxOptions};
use crate::output::{num, opt, out_dir, write_csv, write_json};
use crate::table::{load_table, save_table, EstimatorTable};

#[derive(Debug, Parser, Serialize)]
#[command(name = "polyreward", version, about = "Reward estimator tables for small-group alignment")]
pub struct Cli {
    /// Print the files written.
    #[arg(long, global = true)]
    pub verbose: bool,
    /// Output directory (overridden by POLYREWARD_OUT_DIR).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Build an estimator table.
    #[command(subcommand)]
    Synth(Synth),
    /// Exact bias and second-moment profile of a table.
    Profile(ProfileArgs),
    /// Bias/variance frontier.
    Pareto(ParetoArgs),
    #[command(subcommand)]
    Study(Study),
    /// Run the alignment game.
    Simulate(SimulateArgs),
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Synth {
    Minimax(MinimaxArgs),
    Aqp(AqpArgs),
    Ustat(UstatArgs),
    ClosedForm(ClosedFormArgs),
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    /// `ε*(K)` and its doubling ratios.
    Scaling(ScalingArgs),
    /// Sample splitting with a control variate.
    Split(SplitArgs),
    /// Sup bias of the Taylor-corrected log.
    Taylor(TaylorArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct MinimaxArgs {
    #[arg(long = "K")]
    pub k: usize,
    #[arg(long = "M", default_value_t = DEFAULT_M)]
    pub m: usize,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct AqpArgs {
    #[arg(long = "K")]
    pub k: usize,
    /// `auto[:n]` for `ε*·2^j, j < n`; `x:m1,m2,..` for multiples of `ε*`; or absolute budgets.
    #[arg(long)]
    pub epsilon: String,
    /// Drops budgets above this value.
    #[arg(long)]
    pub eps_max: Option<f64>,
    #[arg(long = "M", default_value_t = DEFAULT_M)]
    pub m: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct UstatArgs {
    #[arg(long = "K")]
    pub k: usize,
    #[arg(long)]
    pub degree: usize,
    /// `c_1,..,c_d`
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub coeffs: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sign: String,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedFormMethod {
    #[value(name = "plugin_log")]
    PluginLog,
    #[value(name = "taylor_bt")]
    TaylorBt,
}

#[derive(Debug, Args, Serialize)]
pub struct ClosedFormArgs {
    #[arg(long, value_enum)]
    pub method: ClosedFormMethod,
    #[arg(long = "K")]
    pub k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Laplace smoothing for plugin_log.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Answer-space size for plugin_log.
    #[arg(long, default_value_t = 2)]
    pub z_size: usize,
    /// With alpha = 0, set c_0 := c_1.
    #[arg(long)]
    pub clamp: bool,
    /// taylor_bt boundary value: minimax, fallback or a number.
    #[arg(long, default_value = "minimax", allow_hyphen_values = true)]
    pub c0: String,
}

#[derive(Debug, Args, Serialize)]
pub struct ProfileArgs {
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long = "grid", default_value_t = DEFAULT_M)]
    pub m: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ParetoArgs {
    #[arg(long = "K")]
    pub k: usize,
    /// Same forms as `synth aqp --epsilon`.
    #[arg(long)]
    pub eps_grid: String,
    #[arg(long)]
    pub eps_max: Option<f64>,
    #[arg(long = "M", default_value_t = DEFAULT_M)]
    pub m: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ScalingArgs {
    #[arg(long = "Ks", value_delimiter = ',', default_value = "8,16,32,64")]
    pub ks: Vec<usize>,
    #[arg(long = "M", default_value_t = DEFAULT_M)]
    pub m: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long = "K")]
    pub k: usize,
    #[arg(long = "K1")]
    pub k1: usize,
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<f64>,
    #[arg(long, default_value = "minimax", allow_hyphen_values = true)]
    pub c0: String,
}

#[derive(Debug, Args, Serialize)]
pub struct TaylorArgs {
    #[arg(long = "Ks", value_delimiter = ',', default_value = "16,32,64,128")]
    pub ks: Vec<usize>,
    #[arg(long, default_value = "minimax", allow_hyphen_values = true)]
    pub c0: String,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    Grpo,
    Mirror,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long = "T")]
    pub t: usize,
    /// Defaults to the seed in the game file.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = SimMode::Grpo)]
    pub mode: SimMode,
    /// GRPO learning rate (default 0.05), or `η0` of the mirror step `η0/√T` (default 2).
    #[arg(long)]
    pub lr: Option<f64>,
}

/// Result of a successful job.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
    /// All post-solve certifications passed.
    pub certified: bool,
}

/// Parses `argv` (including the program name), runs the job and returns the
/// process exit code: 0 on success, 1 if a certification failed, 2 on error.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return 2;
        }
    };
    match run(&cli) {
        Ok(o) => {
            println!("{}", o.summary);
            if cli.verbose {
                for f in &o.files {
                    println!("wrote {}", f.display());
                }
            }
            if o.certified {
                0
            } else {
                eprintln!("certification failed: see the report above");
                1
            }
        }
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            2
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let dir = out_dir(cli.out.as_deref());
    let config = serde_json::to_value(&cli.command).expect("config serializes");
    match &cli.command {
        Command::Synth(Synth::Minimax(a)) => synth_minimax(a, &dir, config),
        Command::Synth(Synth::Aqp(a)) => synth_aqp(a, &dir, config),
        Command::Synth(Synth::Ustat(a)) => synth_ustat(a, &dir, config),
        Command::Synth(Synth::ClosedForm(a)) => synth_closed_form(a, &dir, config),
        Command::Profile(a) => profile(a, &dir, config),
        Command::Pareto(a) => pareto(a, &dir, config),
        Command::Study(Study::Scaling(a)) => study_scaling(a, &dir, config),
        Command::Study(Study::Split(a)) => study_split(a, &dir, config),
        Command::Study(Study::Taylor(a)) => study_taylor(a, &dir, config),
        Command::Simulate(a) => simulate(a, &dir, config),
    }
}

fn scale_table(mut t: EstimatorTable, beta: f64) -> Result<EstimatorTable> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Input(format!("beta must be positive, got {beta}")));
    }
    t.coeffs.iter_mut().for_each(|c| *c *= beta);
    t.beta = beta;
    for key in ["epsilon", "grid_epsilon", "lp_epsilon", "certified_epsilon"] {
        if let Some(e) = t.meta_f64(key) {
            t.meta.insert(key.into(), json!(e * beta));
        }
    }
    t.validate()?;
    Ok(t)
}

fn save(t: EstimatorTable, config: &Value, path: PathBuf) -> Result<PathBuf> {
    let t = t.with_meta("job", config.clone());
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d)?;
    }
    save_table(&t, &path)?;
    Ok(path)
}

fn synth_minimax(a: &MinimaxArgs, dir: &Path, config: Value) -> Result<Outcome> {
    let grid = build_grid(a.k, a.m, Scheme::BoundaryRefined)?;
    let sol = solve_minimax(a.k, &grid, &MinimaxOptions::default())?;
    let certified = sol.certified();
    let table = scale_table(sol.table.clone(), a.beta)?;
    let path = save(table, &config, dir.join(format!("minimax_K{}.json", a.k)))?;
    Ok(Outcome {
        summary: format!(
            "minimax K={} epsilon={:.6e} certified_epsilon={} alternation={} {}",
            a.k,
            sol.epsilon,
            sol.certified_epsilon.map(|c| format!("{c:.6e}")).unwrap_or_default(),
            sol.alternation,
            if certified { "ok" } else { "NOT CERTIFIED" }
        ),
        files: vec![path],
        certified,
    })
}

/// Budgets from `auto[:n]`, `x:m1,m2,..` or a list of absolute values.
pub fn parse_budgets(spec: &str, eps_star: f64, eps_max: Option<f64>) -> Result<Vec<f64>> {
    let list = |s: &str| -> Result<Vec<f64>> {
        s.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Input(format!("bad budget `{x}`"))))
            .collect()
    };
    let mut out = if let Some(rest) = spec.strip_prefix("auto") {
        let n = match rest.strip_prefix(':') {
            Some(n) => n.parse::<usize>().map_err(|_| Error::Input(format!("bad budget count `{n}`")))?,
            None if rest.is_empty() => 7,
            None => return Err(Error::Input(format!("bad budget spec `{spec}`"))),
        };
        geometric_budgets(eps_star, n)
    } else if let Some(rest) = spec.strip_prefix("x:") {
        list(rest)?.into_iter().map(|m| m * eps_star).collect()
    } else {
        list(spec)?
    };
    if let Some(m) = eps_max {
        out.retain(|&e| e <= m);
    }
    if out.is_empty() {
        return Err(Error::Input("no bias budgets left to solve".into()));
    }
    Ok(out)
}

fn frontier(k: usize, m: usize, spec: &str, eps_max: Option<f64>) -> Result<(AqpSolver, Vec<ParetoPoint>)> {
    let grid = build_grid(k, m, Scheme::BoundaryRefined)?;
    let solver = AqpSolver::new(k, grid, AqpOptions::default())?;
    let budgets = parse_budgets(spec, solver.epsilon_star(), eps_max)?;
    let pts = solver.pareto_trace(&budgets)?;
    Ok((solver, pts))
}

fn frontier_csv(path: &Path, config: &Value, eps_star: f64, pts: &[ParetoPoint]) -> Result<()> {
    let rows: Vec<Vec<String>> = pts
        .iter()
        .map(|p| {
            vec![
                num(p.epsilon),
                num(p.v),
                num(p.epsilon / eps_star),
                opt(p.certified_epsilon),
                opt(p.certified_v),
                p.certified().to_string(),
            ]
        })
        .collect();
    write_csv(path, config, &["epsilon", "v", "epsilon_over_star", "certified_epsilon", "certified_v", "certified"], &rows)
}

fn frontier_summary(k: usize, eps_star: f64, pts: &[ParetoPoint]) -> String {
    let v: Vec<String> = pts.iter().map(|p| format!("{:.4e}", p.v)).collect();
    format!("aqp K={k} epsilon_star={eps_star:.6e} points={} v=[{}]", pts.len(), v.join(","))
}

fn synth_aqp(a: &AqpArgs, dir: &Path, config: Value) -> Result<Outcome> {
    let (solver, pts) = frontier(a.k, a.m, &a.epsilon, a.eps_max)?;
    let mut files = Vec::new();
    for (j, p) in pts.iter().enumerate() {
        files.push(save(p.table.clone(), &config, dir.join(format!("aqp_K{}_{j}.json", a.k)))?);
    }
    let csv = dir.join(format!("pareto_K{}.csv", a.k));
    frontier_csv(&csv, &config, solver.epsilon_star(), &pts)?;
    files.push(csv);
    Ok(Outcome {
        summary: frontier_summary(a.k, solver.epsilon_star(), &pts),
        files,
        certified: pts.iter().all(ParetoPoint::certified),
    })
}

fn pareto(a: &ParetoArgs, dir: &Path, config: Value) -> Result<Outcome> {
    let (solver, pts) = frontier(a.k, a.m, &a.eps_grid, a.eps_max)?;
    let csv = dir.join(format!("pareto_K{}.csv", a.k));
    frontier_csv(&csv, &config, solver.epsilon_star(), &pts)?;
    Ok(Outcome {
        summary: frontier_summary(a.k, solver.epsilon_star(), &pts),
        files: vec![csv],
        certified: pts.iter().all(ParetoPoint::certified),
    })
}

fn synth_ustat(a: &UstatArgs, dir: &Path, config: Value) -> Result<Outcome> {
    if a.coeffs.len() != a.degree {
        return Err(Error::Input(format!("--degree {} needs {} coefficients, got {}", a.degree, a.degree, a.coeffs.len())));
    }
    let reward = PolynomialReward::new(a.coeffs.clone(), Sign::parse(&a.sign)?, a.beta)?;
    let t = u_statistic_table(&reward, a.k)?;
    let summary = format!("u_statistic K={} degree={} coeffs=[{}]", a.k, a.degree, join(&t.coeffs));
    let path = save(t, &config, dir.join(format!("ustat_K{}_d{}.json", a.k, a.degree)))?;
    Ok(Outcome { summary, files: vec![path], certified: true })
}

fn synth_closed_form(a: &ClosedFormArgs, dir: &Path, config: Value) -> Result<Outcome> {
    let t = match a.method {
        ClosedFormMethod::PluginLog => plugin_log_table(a.k, a.beta, a.alpha, a.z_size, a.clamp)?,
        ClosedFormMethod::TaylorBt => taylor_bt_table(a.k, a.beta, C0Rule::parse(&a.c0)?.c0(a.k)?)?,
    };
    let name = t.method.as_str();
    let summary = format!("{name} K={} c_0={:.6} c_K={:.6}", a.k, t.coeffs[0], t.coeffs[a.k]);
    let path = save(t, &config, dir.join(format!("{name}_K{}.json", a.k)))?;
    Ok(Outcome { summary, files: vec![path], certified: true })
}

fn profile(a: &ProfileArgs, dir: &Path, config: Value) -> Result<Outcome> {
    let t = load_table(&a.table)?;
    let grid = build_grid(t.k, a.m, Scheme::BoundaryRefined)?;
    let prof = bias_profile(&t, &grid);
    let rows: Vec<Vec<String>> = grid
        .points
        .iter()
        .zip(&prof.weighted_bias)
        .zip(&prof.second_moment)
        .map(|((p, b), s)| vec![num(*p), num(*b), num(*s)])
        .collect();
    let stem = a.table.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "table".into());
    let path = dir.join(format!("profile_{stem}.csv"));
    write_csv(&path, &config, &["p", "weighted_bias", "second_moment"], &rows)?;
    Ok(Outcome {
        summary: format!(
            "profile {} K={} sup_bias={:.6e} at p={:.6e} sup_second_moment={:.6e}",
            t.method.as_str(),
            t.k,
            prof.sup_bias,
            prof.argmax_bias(),
            prof.sup_second_moment
        ),
        files: vec![path],
        certified: true,
    })
}

fn study_scaling(a: &ScalingArgs, dir: &Path, config: Value) -> Result<Outcome> {
    let rows = scaling_study(&a.ks, a.m, &MinimaxOptions::default())?;
    let csv: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                num(r.epsilon),
                opt(r.ratio_to_prev),
                opt(r.solution.certified_epsilon),
                opt(r.continuum_epsilon),
                r.solution.alternation.to_string(),
            ]
        })
        .collect();
    let path = dir.join("scaling.csv");
    write_csv(&path, &config, &["K", "epsilon", "ratio_to_prev", "certified_epsilon", "continuum_epsilon", "alternation"], &csv)?;
    let ratios: Vec<String> = rows.iter().filter_map(|r| r.ratio_to_prev).map(|x| format!("{x:.3}")).collect();
    Ok(Outcome {
        summary: format!("scaling Ks={:?} ratios=[{}]", a.ks, ratios.join(",")),
        files: vec![path],
        certified: rows.iter().all(|r| r.solution.certified()),
    })
}

fn study_split(a: &SplitArgs, dir: &Path, config: Value) -> Result<Outcome> {
    if a.p.is_empty() {
        return Err(Error::Input("--p needs at least one value".into()));
    }
    let rule = C0Rule::parse(&a.c0)?;
    let make = taylor_maker(rule, 1.0);
    let base = make(a.k1)?;
    let mut rows = Vec::new();
    for &p in &a.p {
        let r = split_estimator_stats(a.k, a.k1, p, &make, Gamma::Optimal)?;
        let rb = rao_blackwell_table(a.k1, r.k2, &base, r.gamma)?;
        rows.push(vec![
            num(p),
            num(r.gamma),
            num(r.var_split),
            num(r.var_full),
            num(r.var_split / r.var_full),
            num(r.bias_split),
            num(r.bias_full),
            num(r.bias_split / r.bias_full),
            num(variance(&rb, p)),
        ]);
    }
    let path = dir.join(format!("split_K{}_K1_{}.csv", a.k, a.k1));
    write_csv(
        &path,
        &config,
        &["p", "gamma", "var_split", "var_full", "var_ratio", "bias_split", "bias_full", "bias_ratio", "var_rao_blackwell"],
        &rows,
    )?;
    Ok(Outcome { summary: format!("split K={} K1={} rows={}", a.k, a.k1, rows.len()), files: vec![path], certified: true })
}

fn study_taylor(a: &TaylorArgs, dir: &Path, config: Value) -> Result<Outcome> {
    let rows = taylor_uniform_failure(&a.ks, C0Rule::parse(&a.c0)?)?;
    let csv: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                num(r.c0),
                num(r.sup_bias),
                num(r.argmax_p),
                num(r.pointwise_k2),
                num(r.sup_bias_times_k),
                num(r.epsilon_star),
                num(r.sup_bias / r.epsilon_star),
                opt(r.ratio_to_prev),
            ]
        })
        .collect();
    let path = dir.join("taylor.csv");
    write_csv(
        &path,
        &config,
        &["K", "c0", "sup_bias", "argmax_p", "pointwise_bias_K2", "sup_bias_K", "epsilon_star", "sup_over_epsilon_star", "ratio_to_prev"],
        &csv,
    )?;
    let ratios: Vec<String> = rows.iter().filter_map(|r| r.ratio_to_prev).map(|x| format!("{x:.3}")).collect();
    Ok(Outcome { summary: format!("taylor Ks={:?} ratios=[{}]", a.ks, ratios.join(",")), files: vec![path], certified: true })
}

fn simulate(a: &SimulateArgs, dir: &Path, config: Value) -> Result<Outcome> {
    let spec = GameSpec::load(&a.spec)?;
    let table = load_table(&a.table)?;
    let seed = a
        .seed
        .or(spec.seed)
        .ok_or_else(|| Error::Input("no seed: pass --seed or set `seed` in the game spec".into()))?;
    let trace: GameTrace = match a.mode {
        SimMode::Grpo => run_game_grpo(&spec, &table, a.t, a.lr.unwrap_or(0.05), seed)?,
        SimMode::Mirror => {
            let reward = reward_from_table(&table)?;
            run_mirror_descent(&spec, &reward, a.t, StepRule::Horizon(a.lr.unwrap_or(2.0)), seed)?
        }
    };
    let mode = serde_json::to_value(a.mode).expect("mode serializes");
    let stem = format!("trace_{}_seed{seed}", mode.as_str().unwrap_or("run"));
    let csv = dir.join(format!("{stem}.csv"));
    write_csv(&csv, &config, &GameTrace::csv_header(), &trace.csv_rows())?;
    let side = dir.join(format!("{stem}.json"));
    let mut sidecar = trace.sidecar();
    sidecar["job"] = config;
    write_json(&side, &sidecar)?;
    Ok(Outcome {
        summary: format!(
            "simulate {} T={} seed={seed} final_gap={:.6e} l1_error={:.6e}",
            mode.as_str().unwrap_or(""),
            a.t,
            trace.final_gap(),
            trace.final_l1_error()
        ),
        files: vec![csv, side],
        certified: true,
    })
}

/// Recovers the polynomial reward of a U-statistic table from its metadata.
fn reward_from_table(t: &EstimatorTable) -> Result<PolynomialReward> {
    let coeffs: Vec<f64> = t
        .meta
        .get("poly_coeffs")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_f64).collect())
        .ok_or_else(|| Error::Input("mirror mode needs a u_statistic table with `poly_coeffs` in meta".into()))?;
    let sign = match t.meta_f64("sign") {
        Some(s) if s > 0.0 => Sign::Diversity,
        Some(_) => Sign::Coherence,
        None => return Err(Error::Input("table meta lacks `sign`".into())),
    };
    PolynomialReward::new(coeffs, sign, t.beta)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(",")
}
