//! Command-line entry points. Each `cmd_*` function writes its artifacts into
//! the output directory and returns the text report printed to stdout.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::assimilation::{run_da_experiment, DAExperimentResult, DaConfig, Variant, VariantRun};
use crate::covariance::{decompose_corr_std, CovarianceMatrix};
use crate::error::{Error, Result};
use crate::generators::{
    load_matrix_csv, matrix_to_csv, soar_matrix, DistanceConvention, SoarSpec,
};
use crate::kyfan::{me_kyfan_condition, me_trace_distance, minimal_satisfying_kappa};
use crate::recondition::{min_eigenvalue, mvi, ridge_regression, Method, ReconditionReport};
use crate::specmat::PSD_TOL;

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "COVRECON_OUT_DIR";

/// Row of the SOAR correlation matrix written for the correlation plots (0-based).
pub const FIGURE_ROW: usize = 99;

/// Highest frequency in the DFT correction table.
pub const CORRECTION_MAX_FREQUENCY: usize = 20;

#[derive(Parser, Debug)]
#[command(
    name = "covrecon",
    version,
    about = "Covariance reconditioning experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Spectrum, condition number and standard deviations of a matrix.
    Info { matrix: PathBuf },
    /// Apply RR, ME or MVI to a matrix.
    Recondition(ReconditionArgs),
    /// Reproduce the SOAR standard-deviation table and correlation curves.
    SoarExperiment(SoarArgs),
    /// Run the twin data assimilation experiment.
    DaExperiment(DaArgs),
    /// Check the Ky Fan optimality condition for the minimum eigenvalue method.
    KyfanCheck(KyfanArgs),
}

#[derive(Args, Debug, Clone)]
pub struct OutDir {
    /// Output directory.
    #[arg(long = "out", env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct SoarShape {
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 0.2)]
    pub lengthscale: f64,
    #[arg(long, default_value_t = 5.0)]
    pub variance: f64,
    /// Grid distance: chord or arc.
    #[arg(long, default_value_t = DistanceConvention::Chord)]
    pub convention: DistanceConvention,
}

impl Default for SoarShape {
    fn default() -> Self {
        let spec = SoarSpec::default();
        Self {
            n: spec.n,
            lengthscale: spec.lengthscale,
            variance: spec.variance,
            convention: spec.distance_convention,
        }
    }
}

impl SoarShape {
    fn build(&self) -> Result<CovarianceMatrix> {
        soar_matrix(
            &SoarSpec::new(self.n, self.lengthscale, self.variance)?
                .with_convention(self.convention),
        )
    }
}

#[derive(Args, Debug, Clone)]
pub struct ReconditionArgs {
    pub matrix: PathBuf,
    #[arg(long)]
    pub method: Method,
    #[arg(long = "kappa-max")]
    pub kappa_max: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Args, Debug, Clone)]
pub struct SoarArgs {
    #[arg(
        long = "kappa-max",
        value_delimiter = ',',
        default_value = "1000,500,100"
    )]
    pub kappa_max: Vec<f64>,
    #[command(flatten)]
    pub shape: SoarShape,
    /// Also write the SOAR matrix itself as soar.csv.
    #[arg(long)]
    pub dump: bool,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Args, Debug, Clone)]
pub struct DaArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(
        long = "kappa-max",
        value_delimiter = ',',
        default_value = "10000,1000,100,50,10"
    )]
    pub kappa_max: Vec<f64>,
    #[arg(long, default_value_t = 250)]
    pub samples: usize,
    /// Fixed inflation factor for the RR-matched inflation runs.
    #[arg(long = "alpha-rr")]
    pub alpha_rr: Option<f64>,
    /// Fixed inflation factor for the ME-matched inflation runs.
    #[arg(long = "alpha-me")]
    pub alpha_me: Option<f64>,
    #[arg(long, default_value_t = DistanceConvention::Chord)]
    pub convention: DistanceConvention,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Args, Debug, Clone)]
pub struct KyfanArgs {
    /// Matrix CSV; the default SOAR matrix when omitted.
    pub matrix: Option<PathBuf>,
    #[arg(long = "kappa-max")]
    pub kappa_max: Option<f64>,
    /// Report the smallest integer target that satisfies the condition.
    #[arg(long)]
    pub scan: bool,
    #[command(flatten)]
    pub shape: SoarShape,
}

pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Info { matrix } => cmd_info(matrix),
        Command::Recondition(args) => cmd_recondition(args),
        Command::SoarExperiment(args) => cmd_soar_experiment(args),
        Command::DaExperiment(args) => cmd_da_experiment(args),
        Command::KyfanCheck(args) => cmd_kyfan_check(args),
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn describe(r: &CovarianceMatrix) -> String {
    let mut s = String::new();
    let sd = r.std_devs();
    let _ = writeln!(s, "dimension: {}", r.dim());
    let _ = writeln!(s, "lambda_max: {}", r.max_eigenvalue());
    let _ = writeln!(s, "lambda_min: {}", r.min_eigenvalue());
    let _ = writeln!(s, "condition_number: {}", r.condition_number());
    let _ = writeln!(s, "std_dev_min: {}", sd.min());
    let _ = writeln!(s, "std_dev_max: {}", sd.max());
    let _ = writeln!(s, "symmetric: yes");
    let psd = if r.was_clamped() {
        format!("yes (eigenvalues within {PSD_TOL:e} of zero clamped)")
    } else {
        "yes".to_string()
    };
    let _ = writeln!(s, "positive_semidefinite: {psd}");
    s
}

pub fn cmd_info(matrix: &Path) -> Result<String> {
    Ok(describe(&load_matrix_csv(matrix)?))
}

fn apply_method(
    r: &CovarianceMatrix,
    method: Method,
    kappa_max: Option<f64>,
    alpha: Option<f64>,
) -> Result<ReconditionReport> {
    let missing = |name| Error::InvalidParameter {
        name,
        value: f64::NAN,
        reason: "required by the chosen method",
    };
    let extra = |name, value| Error::InvalidParameter {
        name,
        value,
        reason: "not used by the chosen method",
    };
    match method {
        Method::RidgeRegression | Method::MinimumEigenvalue => {
            if let Some(a) = alpha {
                return Err(extra("alpha", a));
            }
            let k = kappa_max.ok_or_else(|| missing("kappa-max"))?;
            if method == Method::RidgeRegression {
                ridge_regression(r, k)
            } else {
                min_eigenvalue(r, k)
            }
        }
        Method::VarianceInflation => {
            if let Some(k) = kappa_max {
                return Err(extra("kappa-max", k));
            }
            mvi(r, alpha.ok_or_else(|| missing("alpha"))?)
        }
    }
}

fn sigma_change_csv(report: &ReconditionReport) -> String {
    let mut s = String::from("index,sigma_before,sigma_after,ratio\n");
    for (i, (b, a)) in report
        .sigma_before
        .iter()
        .zip(report.sigma_after.iter())
        .enumerate()
    {
        let _ = writeln!(s, "{i},{b},{a},{}", a / b);
    }
    s
}

pub fn cmd_recondition(args: &ReconditionArgs) -> Result<String> {
    let r = load_matrix_csv(&args.matrix)?;
    let report = apply_method(&r, args.method, args.kappa_max, args.alpha)?;
    let dir = &args.out.out;
    write_file(
        dir,
        "reconditioned.csv",
        &matrix_to_csv(report.result.as_matrix()),
    )?;
    write_file(dir, "sigma_change.csv", &sigma_change_csv(&report))?;
    write_file(
        dir,
        "correlation_delta.csv",
        &matrix_to_csv(&report.correlation_delta),
    )?;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "method={} kappa_before={} kappa_after={} {}={}",
        report.method,
        report.kappa_before,
        report.kappa_after,
        report.method.parameter_name(),
        report.parameter
    );
    let _ = writeln!(
        s,
        "sigma_before: min={} max={}",
        report.sigma_before.min(),
        report.sigma_before.max()
    );
    let _ = writeln!(
        s,
        "sigma_after: min={:.5} max={:.5} (exact min={} max={})",
        report.sigma_after.min(),
        report.sigma_after.max(),
        report.sigma_after.min(),
        report.sigma_after.max()
    );
    if report.method == Method::MinimumEigenvalue {
        let k = args.kappa_max.expect("checked by apply_method");
        let c = me_kyfan_condition(&r, k)?;
        let status = if c.satisfied {
            "satisfied"
        } else {
            "NOT satisfied"
        };
        let _ = write!(
            s,
            "kyfan_condition: {status} (T={} l={} bound={}",
            c.threshold, c.l, c.bound
        );
        match minimal_satisfying_kappa(&r, false)? {
            Some(min) => {
                let _ = writeln!(s, "; needs kappa_max >= {min})");
            }
            None => {
                let _ = writeln!(s, ")");
            }
        }
    }
    write_file(dir, "summary.txt", &s)?;
    Ok(s)
}

/// Percentage reduction `100 (c - c_mod) / c`; zero where `c` is zero.
fn percentage_change(c: f64, modified: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        100.0 * (c - modified) / c
    }
}

pub fn cmd_soar_experiment(args: &SoarArgs) -> Result<String> {
    let r = args.shape.build()?;
    let dir = &args.out.out;
    if args.dump {
        write_file(dir, "soar.csv", &matrix_to_csv(r.as_matrix()))?;
    }
    let original = decompose_corr_std(&r)?;
    let row = FIGURE_ROW.min(r.dim() - 1);
    let sigma = original.std_devs()[0];

    let mut table = String::from("kappa_max,sigma,sigma_rr,alpha_rr,sigma_me,alpha_me\n");
    let mut report = format!("condition_number: {}\n", r.condition_number());
    for &k in &args.kappa_max {
        let rr = ridge_regression(&r, k)?;
        let me = min_eigenvalue(&r, k)?;
        let (sigma_rr, sigma_me) = (rr.sigma_after[0], me.sigma_after[0]);
        let _ = writeln!(
            table,
            "{k},{sigma},{sigma_rr},{},{sigma_me},{}",
            sigma_rr / sigma,
            sigma_me / sigma
        );
        let _ = writeln!(
            report,
            "kappa_max={k}: sigma_rr={sigma_rr:.5} alpha_rr={:.3} sigma_me={sigma_me:.5} alpha_me={:.3}",
            sigma_rr / sigma,
            sigma_me / sigma
        );

        let c_rr = decompose_corr_std(&rr.result)?;
        let c_me = decompose_corr_std(&me.result)?;
        let mut fig = String::from("column,c,c_rr,c_me,pct_rr,pct_me\n");
        for j in 0..r.dim() {
            let c = original.correlations().get(row, j);
            let a = c_rr.correlations().get(row, j);
            let b = c_me.correlations().get(row, j);
            let _ = writeln!(
                fig,
                "{j},{c},{a},{b},{},{}",
                percentage_change(c, a),
                percentage_change(c, b)
            );
        }
        write_file(dir, &format!("figure1_kappa{k}.csv"), &fig)?;
    }
    write_file(dir, "table1.csv", &table)?;
    Ok(report)
}

fn run_column(run: &VariantRun) -> String {
    match run.kappa_max {
        Some(k) => format!("{}_k{k}", run.variant),
        None => run.variant.to_string(),
    }
}

fn all_runs(result: &DAExperimentResult) -> Vec<&VariantRun> {
    let mut runs = vec![&result.true_run, &result.estimated_run];
    for variant in &Variant::ALL[2..] {
        for sweep in &result.sweeps {
            runs.extend(sweep.run(*variant));
        }
    }
    runs
}

fn table2_csv(result: &DAExperimentResult) -> String {
    let mut s = String::from("variant");
    for sweep in &result.sweeps {
        let _ = write!(s, ",{}", sweep.kappa_max);
    }
    s.push('\n');
    for variant in Variant::ALL {
        s.push_str(variant.label());
        for sweep in &result.sweeps {
            let iterations = result
                .iterations(variant, Some(sweep.kappa_max))
                .expect("every variant is run for every target");
            let _ = write!(s, ",{iterations}");
        }
        s.push('\n');
    }
    s
}

fn runs_csv(result: &DAExperimentResult) -> String {
    let mut s = String::from(
        "variant,kappa_max,alpha,condition_number,iterations,converged,final_relative_residual\n",
    );
    for run in all_runs(result) {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            run.variant,
            opt(run.kappa_max),
            opt(run.alpha),
            run.condition_number,
            run.cg.iterations,
            run.cg.converged,
            run.cg.final_relative_residual
        );
    }
    s
}

fn alphas_csv(result: &DAExperimentResult) -> String {
    let mut s = String::from("kappa_max,alpha_rr,alpha_me,alpha_me_mean\n");
    for sweep in &result.sweeps {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            sweep.kappa_max, sweep.alpha_rr, sweep.alpha_me, sweep.alpha_me_mean
        );
    }
    s
}

fn dft_csv(result: &DAExperimentResult) -> String {
    let runs = all_runs(result);
    let mut s = String::from("frequency,a_true");
    for run in &runs {
        let _ = write!(s, ",{}", run_column(run));
    }
    s.push('\n');
    for f in 0..result.a_true.len() {
        let _ = write!(s, "{f},{}", result.a_true[f]);
        for run in &runs {
            let _ = write!(s, ",{}", run.dft[f]);
        }
        s.push('\n');
    }
    s
}

fn corrections_csv(result: &DAExperimentResult) -> String {
    let runs: Vec<&VariantRun> = all_runs(result)
        .into_iter()
        .filter(|r| r.variant.is_swept())
        .collect();
    let corrections: Vec<_> = runs.iter().map(|r| result.correction(r)).collect();
    let mut s = String::from("frequency");
    for run in &runs {
        let _ = write!(s, ",{}", run_column(run));
    }
    s.push('\n');
    for f in 0..=CORRECTION_MAX_FREQUENCY.min(result.a_true.len().saturating_sub(1)) {
        let _ = write!(s, "{f}");
        for c in &corrections {
            let _ = write!(s, ",{}", c[f]);
        }
        s.push('\n');
    }
    s
}

/// Files written by [`cmd_da_experiment`], in order.
pub const DA_OUTPUTS: [&str; 5] = [
    "table2.csv",
    "runs.csv",
    "alphas.csv",
    "dft_coefficients.csv",
    "dft_corrections.csv",
];

pub fn cmd_da_experiment(args: &DaArgs) -> Result<String> {
    let config = DaConfig {
        seed: args.seed,
        kappa_max: args.kappa_max.clone(),
        m_samples: args.samples,
        alpha_rr: args.alpha_rr,
        alpha_me: args.alpha_me,
        distance_convention: args.convention,
        ..DaConfig::default()
    };
    let result = run_da_experiment(&config)?;
    let dir = &args.out.out;
    let table = table2_csv(&result);
    let contents = [
        table.clone(),
        runs_csv(&result),
        alphas_csv(&result),
        dft_csv(&result),
        corrections_csv(&result),
    ];
    for (name, body) in DA_OUTPUTS.iter().zip(contents.iter()) {
        write_file(dir, name, body)?;
    }
    let mut report = format!(
        "seed={} condition_number_true={} condition_number_est={}\n",
        args.seed, result.true_run.condition_number, result.estimated_run.condition_number
    );
    report.push_str(&table);
    Ok(report)
}

pub fn cmd_kyfan_check(args: &KyfanArgs) -> Result<String> {
    let r = match &args.matrix {
        Some(path) => load_matrix_csv(path)?,
        None => args.shape.build()?,
    };
    let mut s = String::new();
    if let Some(k) = args.kappa_max {
        let c = me_kyfan_condition(&r, k)?;
        let _ = writeln!(s, "kappa_max: {k}");
        let _ = writeln!(s, "threshold: {}", c.threshold);
        let _ = writeln!(s, "l: {}", c.l);
        let _ = writeln!(s, "bound: {}", c.bound);
        let _ = writeln!(s, "satisfied: {}", c.satisfied);
        let _ = writeln!(s, "satisfied_strict: {}", c.satisfied_strict);
        let _ = writeln!(s, "trace_norm_distance: {}", me_trace_distance(&r, k)?);
    }
    if args.scan || args.kappa_max.is_none() {
        let show = |v: Option<u64>| v.map_or("none".to_string(), |k| k.to_string());
        let _ = writeln!(
            s,
            "minimal_kappa_max: {}",
            show(minimal_satisfying_kappa(&r, false)?)
        );
        let _ = writeln!(
            s,
            "minimal_kappa_max_strict: {}",
            show(minimal_satisfying_kappa(&r, true)?)
        );
    }
    Ok(s)
}
