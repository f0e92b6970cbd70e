//! Batch front end: every verification of the toolkit as a reproducible
//! command with machine-readable CSV/JSON artifacts and a manifest.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure,
//! 4 threshold failure under `--check`.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use bihar::bubble::{constants, project_bubble, BubbleParams, Configuration};
use bihar::energy::{check_upper_bounds, fit_representation, verify_expansion, FitOptions};
use bihar::flow::{flow_run, FlowParams};
use bihar::green::{regular_part, validate_lemma_a1};
use bihar::grid::{sample, Point, ScalarField};
use bihar::snapshot::{read_snapshot, write_snapshot};
use bihar::solver::{poisson_dirichlet, BoundaryData};

use config::{parse_lambdas, parse_points, parse_weights, DomainConfig};

#[derive(Debug)]
pub struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError { message: message.into(), code: 2 }
    }

    fn check(message: impl Into<String>) -> Self {
        CliError { message: message.into(), code: 4 }
    }
}

impl From<bihar::Error> for CliError {
    fn from(e: bihar::Error) -> Self {
        let code = match &e {
            bihar::Error::SolverDiverged { .. } | bihar::Error::StepUnderflow { .. } => 3,
            _ => 2,
        };
        CliError { message: e.to_string(), code }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError { message: format!("i/o: {e}"), code: 2 }
    }
}

#[derive(Parser)]
#[command(
    name = "bihar",
    version,
    about = "Bubble analysis toolkit for the critical biharmonic problem"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// output directory for CSV/JSON artifacts and the manifest
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// load the full run configuration from a JSON file (flags ignored)
    #[arg(long)]
    config: Option<PathBuf>,
    /// enforce acceptance thresholds; failures exit with code 4
    #[arg(long, default_value_t = false)]
    check: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Print and store the universal constants with provenance
    Constants {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        n: usize,
    },
    /// Solve the Poisson problem with zero boundary data
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        dom: DomainArgs,
        /// source field: one | zero
        #[arg(long, default_value = "one")]
        source: String,
    },
    /// Project a bubble onto the domain (Navier conditions)
    ProjectBubble {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        dom: DomainArgs,
        #[arg(long, default_value_t = 20.0)]
        lambda: f64,
        /// bubble center "x1,x2,..." (defaults to the domain center)
        #[arg(long)]
        center: Option<String>,
    },
    /// Regular part H(x,x) and pairwise Green values for source points
    Green {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        dom: DomainArgs,
        /// source points "x1,..;y1,.." (defaults to the domain center)
        #[arg(long)]
        sources: Option<String>,
    },
    /// Defect-decay validation of the regular part
    VerifyLemmaA1 {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        dom: DomainArgs,
        #[arg(long, default_value = "20,40,80,160")]
        lambdas: String,
    },
    /// Energy expansion of a bubble configuration across a scale sweep
    VerifyExpansion {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        dom: DomainArgs,
        #[arg(long, default_value_t = 1)]
        p: usize,
        /// sweep "20:320:x2" or "20,40,80"
        #[arg(long, default_value = "20:320:x2")]
        lambdas: String,
        /// centers "x1,..;y1,.." (defaults: domain center for p = 1)
        #[arg(long)]
        centers: Option<String>,
        /// weights "0.5,0.5" (defaults to equal)
        #[arg(long)]
        weights: Option<String>,
    },
    /// Level bounds J <= (p+eps)^{4/(n-4)} S and the small-weight bound
    Bounds {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        dom: DomainArgs,
        #[arg(long, default_value_t = 20.0)]
        lambda: f64,
        #[arg(long)]
        centers: Option<String>,
        #[arg(long)]
        weights: Option<String>,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 0.01)]
        eps1: f64,
    },
    /// Normalized descent flow with concentration diagnostics
    Flow {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        dom: DomainArgs,
        /// initial state: single-bubble | bump | two-bubble
        #[arg(long, default_value = "single-bubble")]
        init: String,
        #[arg(long, default_value_t = 5.0)]
        lambda0: f64,
        #[arg(long, default_value_t = f64::INFINITY)]
        tmax: f64,
        #[arg(long, default_value_t = 200)]
        max_steps: usize,
        /// fit the bubble representation every k steps (0 disables)
        #[arg(long, default_value_t = 0)]
        fit_every: usize,
        #[arg(long, default_value_t = 1)]
        fit_p: usize,
        #[arg(long, default_value_t = 0.0)]
        grad_tol: f64,
    },
    /// Fit a bubble representation to a stored field snapshot
    Fit {
        #[command(flatten)]
        common: Common,
        /// snapshot path (raw values; sidecar header alongside)
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        p: usize,
    },
    /// Randomized scans of the scalar inequality oracles
    Inequalities {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10.0)]
        q: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args, Clone)]
struct DomainArgs {
    /// box | ball | annulus
    #[arg(long, default_value = "ball")]
    domain: String,
    /// radial | masked (box is always spectral)
    #[arg(long, default_value = "radial")]
    backend: String,
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// nodes per axis (lattices) or radial node count
    #[arg(long, default_value_t = 2001)]
    nodes: usize,
    #[arg(long)]
    side: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    r_in: Option<f64>,
    #[arg(long)]
    r_out: Option<f64>,
}

impl DomainArgs {
    fn to_config(&self) -> DomainConfig {
        DomainConfig {
            shape: self.domain.clone(),
            backend: Some(self.backend.clone()),
            dim: self.n,
            side: self.side,
            nodes: self.nodes,
            radius: self.radius,
            r_in: self.r_in,
            r_out: self.r_out,
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    wall_time_s: f64,
    config: &'a C,
    #[serde(skip_serializing_if = "Option::is_none")]
    constants: Option<&'a bihar::bubble::Constants>,
    outputs: Vec<String>,
}

struct Runner {
    out: PathBuf,
    started: Instant,
    outputs: Vec<String>,
}

impl Runner {
    fn new(out: &Path, started: Instant) -> Result<Self, CliError> {
        fs::create_dir_all(out)?;
        Ok(Runner { out: out.to_path_buf(), started, outputs: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.out.join(name)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::config(format!("encode {name}: {e}")))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }

    fn write_csv(&mut self, name: &str, header: &str, rows: &[String]) -> Result<(), CliError> {
        let path = self.path(name);
        let mut text = String::with_capacity(rows.len() * 32 + header.len() + 1);
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        fs::write(path, text)?;
        Ok(())
    }

    fn write_field(&mut self, name: &str, field: &ScalarField) -> Result<(), CliError> {
        self.outputs.push(format!("{name}.json"));
        let path = self.path(name);
        write_snapshot(field, &path)?;
        Ok(())
    }

    fn finish<C: Serialize>(
        mut self,
        command: &str,
        cfg: &C,
        consts: Option<&bihar::bubble::Constants>,
    ) -> Result<(), CliError> {
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            wall_time_s: self.started.elapsed().as_secs_f64(),
            config: cfg,
            constants: consts,
            outputs: std::mem::take(&mut self.outputs),
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::config(format!("encode manifest: {e}")))?;
        fs::write(self.out.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

/// Loads the typed config from --config when given, else uses the one
/// assembled from flags.
fn resolve_config<C: DeserializeOwned>(common: &Common, from_flags: C) -> Result<C, CliError> {
    match &common.config {
        None => Ok(from_flags),
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))
        }
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct ConstantsConfig {
    n: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct SolveConfig {
    domain: DomainConfig,
    source: String,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct ProjectConfig {
    domain: DomainConfig,
    lambda: f64,
    center: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct GreenConfig {
    domain: DomainConfig,
    sources: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct LemmaA1Config {
    domain: DomainConfig,
    lambdas: Vec<f64>,
    slope_tol: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct ExpansionConfig {
    domain: DomainConfig,
    weights: Vec<f64>,
    centers: Vec<Vec<f64>>,
    lambdas: Vec<f64>,
    coefficient_tol: f64,
    order_threshold: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct BoundsConfig {
    domain: DomainConfig,
    weights: Vec<f64>,
    centers: Vec<Vec<f64>>,
    lambda: f64,
    eps: f64,
    eps1: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct FlowConfig {
    domain: DomainConfig,
    init: String,
    lambda0: f64,
    t_max: f64,
    max_steps: usize,
    fit_every: usize,
    fit_p: usize,
    grad_tol: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct FitConfig {
    input: PathBuf,
    p: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct InequalitiesConfig {
    q: f64,
    samples: usize,
    seed: u64,
}

fn run(command: Command) -> Result<(), CliError> {
    let started = Instant::now();
    match command {
        Command::Constants { common, n } => {
            let cfg = resolve_config(&common, ConstantsConfig { n })?;
            let consts = constants(cfg.n)?;
            let mut runner = Runner::new(&common.out, started)?;
            runner.write_json("constants.json", &*consts)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&*consts)
                    .map_err(|e| CliError::config(e.to_string()))?
            );
            runner.finish("constants", &cfg, Some(&consts))
        }

        Command::Solve { common, dom, source } => {
            let cfg = resolve_config(&common, SolveConfig { domain: dom.to_config(), source })?;
            let domain = cfg.domain.build()?;
            let f = match cfg.source.as_str() {
                "one" => sample(&domain, |_| 1.0),
                "zero" => ScalarField::zeros(&domain),
                other => return Err(CliError::config(format!("unknown source '{other}'"))),
            };
            let (u, report) = poisson_dirichlet(&f, &BoundaryData::Zero)?;
            let mut runner = Runner::new(&common.out, started)?;
            runner.write_field("solution.f64", &u)?;
            runner.write_json(
                "report.json",
                &serde_json::json!({
                    "backend": report.backend.name(),
                    "iterations": report.iterations,
                    "residual_norm": report.residual_norm,
                    "min": u.min_value(),
                    "max": u.max_value(),
                }),
            )?;
            runner.finish("solve", &cfg, None)
        }

        Command::ProjectBubble { common, dom, lambda, center } => {
            let dc = dom.to_config();
            let center_coords = match &center {
                Some(text) => parse_points(text, dc.dim)?[0].coords().to_vec(),
                None => dc.center(),
            };
            let cfg = resolve_config(
                &common,
                ProjectConfig { domain: dc, lambda, center: center_coords },
            )?;
            let domain = cfg.domain.build()?;
            let n = domain.dim();
            let b = BubbleParams::new(Point::new(cfg.center.clone()), cfg.lambda)?;
            let pd = project_bubble(&domain, &b)?;
            let del = sample(&domain, |x| bihar::bubble::delta(&b, x, n));
            let defect_sup = del.add_scaled(&pd, -1.0)?.inf_norm();
            let mut runner = Runner::new(&common.out, started)?;
            runner.write_field("pdelta.f64", &pd)?;
            runner.write_json(
                "report.json",
                &serde_json::json!({
                    "lambda": cfg.lambda,
                    "min": pd.min_value(),
                    "max": pd.max_value(),
                    "sup_defect": defect_sup,
                }),
            )?;
            runner.finish("project-bubble", &cfg, None)
        }

        Command::Green { common, dom, sources } => {
            let dc = dom.to_config();
            let source_list = match &sources {
                Some(text) => {
                    parse_points(text, dc.dim)?.iter().map(|p| p.coords().to_vec()).collect()
                }
                None => vec![dc.center()],
            };
            let cfg = resolve_config(&common, GreenConfig { domain: dc, sources: source_list })?;
            let domain = cfg.domain.build()?;
            let samples: Vec<_> = cfg
                .sources
                .iter()
                .map(|c| regular_part(&domain, &Point::new(c.clone())))
                .collect::<Result<_, _>>()?;
            let mut rows = Vec::new();
            for (i, g) in samples.iter().enumerate() {
                let coords =
                    g.source().coords().iter().map(|c| fmt(*c)).collect::<Vec<_>>().join(",");
                rows.push(format!("{i},\"{coords}\",{}", fmt(g.h_diag())));
            }
            let mut runner = Runner::new(&common.out, started)?;
            runner.write_csv("h_diag.csv", "index,point,h_diag", &rows)?;
            let mut g_rows = Vec::new();
            for (i, gi) in samples.iter().enumerate() {
                for (j, gj) in samples.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let val = gi.g_at(gj.source())?;
                    g_rows.push(format!("{i},{j},{}", fmt(val)));
                }
            }
            runner.write_csv("g_matrix.csv", "i,j,g", &g_rows)?;
            runner.finish("green", &cfg, None)
        }

        Command::VerifyLemmaA1 { common, dom, lambdas } => {
            let cfg = resolve_config(
                &common,
                LemmaA1Config {
                    domain: dom.to_config(),
                    lambdas: parse_lambdas(&lambdas)?,
                    slope_tol: 0.3,
                },
            )?;
            let domain = cfg.domain.build()?;
            let a = Point::new(cfg.domain.center());
            let report = validate_lemma_a1(&domain, &a, &cfg.lambdas)?;
            let rows: Vec<String> = report
                .entries
                .iter()
                .map(|e| format!("{},{}", fmt(e.lambda), fmt(e.sup_error)))
                .collect();
            let mut runner = Runner::new(&common.out, started)?;
            runner.write_csv("decay.csv", "lambda,sup_error", &rows)?;
            runner.write_json("summary.json", &report)?;
            runner.finish("verify-lemma-a1", &cfg, None)?;
            if common.check && (report.slope - report.expected_slope).abs() > cfg.slope_tol {
                return Err(CliError::check(format!(
                    "decay slope {:.3} outside {} +- {}",
                    report.slope, report.expected_slope, cfg.slope_tol
                )));
            }
            Ok(())
        }

        Command::VerifyExpansion { common, dom, p, lambdas, centers, weights } => {
            let dc = dom.to_config();
            let center_list: Vec<Vec<f64>> = match &centers {
                Some(text) => {
                    parse_points(text, dc.dim)?.iter().map(|q| q.coords().to_vec()).collect()
                }
                None if p == 1 => vec![dc.center()],
                None => {
                    return Err(CliError::config(
                        "multi-bubble sweeps need explicit --centers",
                    ))
                }
            };
            let weight_list = match &weights {
                Some(text) => parse_weights(text)?,
                None => vec![1.0 / p as f64; p],
            };
            let cfg = resolve_config(
                &common,
                ExpansionConfig {
                    domain: dc,
                    weights: weight_list,
                    centers: center_list,
                    lambdas: parse_lambdas(&lambdas)?,
                    coefficient_tol: 0.05,
                    order_threshold: -2.5,
                },
            )?;
            let domain = cfg.domain.build()?;
            let consts = constants(cfg.domain.dim)?;
            let centers: Vec<Point> = cfg.centers.iter().map(|c| Point::new(c.clone())).collect();
            let report =
                verify_expansion(&domain, &cfg.weights, &centers, &cfg.lambdas, &consts)?;
            let rows: Vec<String> = report
                .samples
                .iter()
                .map(|s| {
                    format!("{},{},{},{}", fmt(s.lambda), fmt(s.j_num), fmt(s.psi), fmt(s.residual))
                })
                .collect();
            let mut runner = Runner::new(&common.out, started)?;
            runner.write_csv("expansion.csv", "lambda,j_num,psi,residual", &rows)?;
            runner.write_json(
                "summary.json",
                &serde_json::json!({
                    "fitted_order": report.fitted_residual_order,
                    "fitted_coefficient": report.fitted_coefficient,
                    "predicted_coefficient": report.predicted_coefficient,
                    "theory_order": report.theory_residual_order,
                    "psi_infinity": report.psi_infinity,
                    "min_separation": report.min_separation,
                    "d_prime": report.d_prime,
                    "h_diag": report.h_diag,
                    "g_mat": report.g_mat,
                }),
            )?;
            runner.finish("verify-expansion", &cfg, Some(&consts))?;
            if common.check {
                let rel = (report.fitted_coefficient - report.predicted_coefficient).abs()
                    / report.predicted_coefficient.abs();
                if rel > cfg.coefficient_tol {
                    return Err(CliError::check(format!(
                        "fitted coefficient off by {rel:.4} (tolerance {})",
                        cfg.coefficient_tol
                    )));
                }
                if report.fitted_residual_order > cfg.order_threshold {
                    return Err(CliError::check(format!(
                        "residual order {:.3} above threshold {}",
                        report.fitted_residual_order, cfg.order_threshold
                    )));
                }
            }
            Ok(())
        }

        Command::Bounds { common, dom, lambda, centers, weights, eps, eps1 } => {
            let dc = dom.to_config();
            let center_list: Vec<Vec<f64>> = match &centers {
                Some(text) => {
                    parse_points(text, dc.dim)?.iter().map(|q| q.coords().to_vec()).collect()
                }
                None => vec![dc.center()],
            };
            let weight_list = match &weights {
                Some(text) => parse_weights(text)?,
                None => vec![1.0 / center_list.len() as f64; center_list.len()],
            };
            let cfg = resolve_config(
                &common,
                BoundsConfig {
                    domain: dc,
                    weights: weight_list,
                    centers: center_list,
                    lambda,
                    eps,
                    eps1,
                },
            )?;
            let domain = cfg.domain.build()?;
            let consts = constants(cfg.domain.dim)?;
            let configuration = Configuration::new(
                cfg.weights.clone(),
                cfg.centers.iter().map(|c| Point::new(c.clone())).collect(),
                vec![cfg.lambda; cfg.weights.len()],
            )?;
            let report = check_upper_bounds(&domain, &configuration, &consts, cfg.eps, cfg.eps1)?;
            let mut runner = Runner::new(&common.out, started)?;
            runner.write_json("bounds.json", &report)?;
            runner.finish("bounds", &cfg, Some(&consts))?;
            if common.check {
                if !report.relaxed_ok {
                    return Err(CliError::check(format!(
                        "J = {} above the relaxed bound {}",
                        report.j, report.relaxed_bound
                    )));
                }
                if report.strict_ok == Some(false) {
                    return Err(CliError::check(format!(
                        "J = {} above the strict bound {:?}",
                        report.j, report.strict_bound
                    )));
                }
            }
            Ok(())
        }

        Command::Flow { common, dom, init, lambda0, tmax, max_steps, fit_every, fit_p, grad_tol } => {
            let cfg = resolve_config(
                &common,
                FlowConfig {
                    domain: dom.to_config(),
                    init,
                    lambda0,
                    t_max: tmax,
                    max_steps,
                    fit_every,
                    fit_p,
                    grad_tol,
                },
            )?;
            let domain = cfg.domain.build()?;
            let center = cfg.domain.center();
            let u0 = match cfg.init.as_str() {
                "single-bubble" => {
                    let b = BubbleParams::new(Point::new(center.clone()), cfg.lambda0)?;
                    project_bubble(&domain, &b)?
                }
                "bump" => {
                    let d = domain.clone();
                    sample(&domain, |x| {
                        d.dist_to_boundary(&Point::new(x.to_vec())).map(|v| v * v).unwrap_or(0.0)
                    })
                }
                "two-bubble" => {
                    let offset = match cfg.domain.shape.as_str() {
                        "annulus" => {
                            (cfg.domain.r_in.unwrap_or(0.5) + cfg.domain.r_out.unwrap_or(1.0))
                                / 2.0
                        }
                        _ => cfg.domain.side.unwrap_or(1.0) / 4.0,
                    };
                    let mut c1 = center.clone();
                    let mut c2 = center.clone();
                    c1[0] -= offset;
                    c2[0] += offset;
                    let b1 = BubbleParams::new(Point::new(c1), cfg.lambda0)?;
                    let b2 = BubbleParams::new(Point::new(c2), cfg.lambda0)?;
                    project_bubble(&domain, &b1)?
                        .add_scaled(&project_bubble(&domain, &b2)?, 1.0)?
                }
                other => return Err(CliError::config(format!("unknown init '{other}'"))),
            };
            let params = FlowParams {
                t_max: cfg.t_max,
                max_steps: cfg.max_steps,
                grad_tol: cfg.grad_tol,
                fit_every: (cfg.fit_every > 0).then_some(cfg.fit_every),
                fit_p: cfg.fit_p,
                ..FlowParams::default()
            };
            let consts = constants(cfg.domain.dim)?;
            let result = flow_run(&u0, &consts, &params)?;
            let rows: Vec<String> = result
                .records
                .iter()
                .map(|r| {
                    format!(
                        "{},{},{},{},{}",
                        fmt(r.t),
                        fmt(r.j),
                        fmt(r.min_u),
                        r.lambda_fit.map(fmt).unwrap_or_default(),
                        r.dist_fit.map(fmt).unwrap_or_default()
                    )
                })
                .collect();
            let mut runner = Runner::new(&common.out, started)?;
            runner.write_csv("trajectory.csv", "t,j,min_u,lambda_fit,dist_fit", &rows)?;
            runner.write_field("final.f64", &result.final_state)?;
            runner.write_json(
                "flow.json",
                &serde_json::json!({
                    "outcome": result.outcome,
                    "steps": result.records.len() - 1,
                    "final_j": result.records.last().map(|r| r.j),
                }),
            )?;
            runner.finish("flow", &cfg, Some(&consts))
        }

        Command::Fit { common, input, p } => {
            let cfg = resolve_config(&common, FitConfig { input, p })?;
            let field = read_snapshot(&cfg.input)?;
            let fit = fit_representation(&field, cfg.p, &FitOptions::default())?;
            let mut runner = Runner::new(&common.out, started)?;
            runner.write_json("fit.json", &fit)?;
            runner.finish("fit", &cfg, None)
        }

        Command::Inequalities { common, q, samples, seed } => {
            let cfg = resolve_config(&common, InequalitiesConfig { q, samples, seed })?;
            let gamma = bihar::inequalities::scan_gamma_star(cfg.q, cfg.samples, cfg.seed)?;
            let m = bihar::inequalities::scan_m_star(cfg.q, cfg.samples, 10.0, cfg.seed)?;
            let jensen = bihar::inequalities::scan_jensen(cfg.q, cfg.samples, cfg.seed)?;
            let mut runner = Runner::new(&common.out, started)?;
            runner.write_json(
                "inequalities.json",
                &serde_json::json!({
                    "q": cfg.q,
                    "samples": cfg.samples,
                    "seed": cfg.seed,
                    "gamma_star": gamma,
                    "m_star": m,
                    "jensen_min": jensen,
                }),
            )?;
            runner.finish("inequalities", &cfg, None)
        }
    }
}
