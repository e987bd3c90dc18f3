//! Acceptance criteria, one pass/fail line each. Exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{oracle_kappa, random_spd, random_vector};
use covrecon::assimilation::{
    dft_imag, evaluate_objective, objective_correction, run_da_experiment, DAExperimentResult,
    DAProblem, DaConfig, Variant,
};
use covrecon::cli::{cmd_da_experiment, DaArgs, OutDir, DA_OUTPUTS};
use covrecon::covariance::decompose_corr_std;
use covrecon::generators::{soar_matrix, truth_signal, DistanceConvention, NormalStream, SoarSpec};
use covrecon::kyfan::{kyfan_minimizer_oracle, me_kyfan_condition, minimal_satisfying_kappa};
use covrecon::recondition::{inverse_correction_spectrum, min_eigenvalue, mvi, ridge_regression};
use covrecon::CovarianceMatrix;
use nalgebra::DMatrix;

struct Outcome {
    failures: usize,
}

impl Outcome {
    fn record(&mut self, label: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("[{}] {label}: {detail}", if pass { "PASS" } else { "FAIL" });
    }

    fn timed(&mut self, label: &str, limit: Duration, started: Instant) {
        let elapsed = started.elapsed();
        self.record(
            label,
            elapsed < limit,
            format!(
                "{:.2} s (limit {} s)",
                elapsed.as_secs_f64(),
                limit.as_secs()
            ),
        );
    }
}

const SOAR_KAPPA: f64 = 81121.71;

/// (κ_max, σ_RR, α_RR, σ_ME, α_ME).
const TABLE1: [(f64, f64, f64, f64, f64); 3] = [
    (1000.0, 2.26471, 1.013, 2.25439, 1.008),
    (500.0, 2.29340, 1.026, 2.27599, 1.018),
    (100.0, 2.51306, 1.124, 2.45737, 1.099),
];

fn criterion_1(out: &mut Outcome) {
    let started = Instant::now();
    let kappa_of = |convention| {
        soar_matrix(&SoarSpec::default().with_convention(convention))
            .unwrap()
            .condition_number()
            .value()
            .unwrap()
    };
    let chord = kappa_of(DistanceConvention::Chord);
    let arc = kappa_of(DistanceConvention::Arc);
    out.record(
        "1 SOAR calibration",
        (chord / SOAR_KAPPA - 1.0).abs() < 0.005,
        format!("chord kappa {chord:.4}, arc kappa {arc:.4}, target {SOAR_KAPPA} +/- 0.5%"),
    );

    let r = soar_matrix(&SoarSpec::default()).unwrap();
    let sigma = r.std_devs()[0];
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for (k, s_rr, a_rr, s_me, a_me) in TABLE1 {
        let rr = ridge_regression(&r, k).unwrap();
        let me = min_eigenvalue(&r, k).unwrap();
        let got = [
            rr.sigma_after[0],
            rr.sigma_after[0] / sigma,
            me.sigma_after[0],
            me.sigma_after[0] / sigma,
        ];
        for (g, e) in got.iter().zip([s_rr, a_rr, s_me, a_me]) {
            worst = worst.max((g - e).abs());
        }
        rows.push(format!(
            "k={k}: {:.5}/{:.4}/{:.5}/{:.4}",
            got[0], got[1], got[2], got[3]
        ));
    }
    out.record(
        "1 reference standard deviations and inflation factors",
        worst <= 1e-3,
        format!("max abs error {worst:.2e} (tol 1e-3); {}", rows.join(", ")),
    );
    out.timed("1 runtime", Duration::from_secs(10), started);
}

/// Random PSD test matrix; every tenth one is rank deficient.
fn identity_suite_matrix(i: usize, stream: &mut NormalStream) -> CovarianceMatrix {
    let d = 2 + (stream.next_uniform() * 49.0) as usize;
    let d = d.min(50);
    if i % 10 == 9 {
        let g = DMatrix::from_fn(d, d - 1, |_, _| stream.next_normal());
        CovarianceMatrix::from_matrix(&g * g.transpose()).unwrap()
    } else {
        let decades = 1.0 + 7.0 * stream.next_uniform();
        random_spd(d, decades, 1000 + i as u64)
    }
}

const MAX_TARGET: f64 = 1e6;

fn criterion_2(out: &mut Outcome) {
    let mut stream = NormalStream::new(2);
    let mut failures: Vec<String> = Vec::new();
    let mut worst_kappa: f64 = 0.0;
    let mut worst_delta: f64 = 0.0;
    for i in 0..200 {
        let r = identity_suite_matrix(i, &mut stream);
        let decomp = r.decomposition();
        // An independent eigensolver resolves κ to about ε·κ·d, so targets
        // above 10^6 could not be checked at 1e-8.
        let current = oracle_kappa(r.as_matrix());
        let upper = if current > 1.0 && current < MAX_TARGET {
            current.log10()
        } else {
            MAX_TARGET.log10()
        };
        let kappa = 10f64
            .powf(upper * (0.1 + 0.8 * stream.next_uniform()))
            .max(1.05);
        let rr = ridge_regression(&r, kappa).unwrap();
        let me = min_eigenvalue(&r, kappa).unwrap();
        for report in [&rr, &me] {
            let k = oracle_kappa(report.result.as_matrix());
            worst_kappa = worst_kappa.max((k - kappa).abs() / kappa);
        }
        let threshold = decomp.largest() / kappa;
        let lambda_d = decomp.smallest().max(0.0);
        let before = decompose_corr_std(&r).unwrap();
        let after = decompose_corr_std(&rr.result).unwrap();
        for j in 0..r.dim() {
            let s = rr.sigma_before[j];
            let (s_rr, s_me) = (rr.sigma_after[j], me.sigma_after[j]);
            worst_delta = worst_delta.max((s_rr * s_rr - s * s - rr.parameter).abs());
            if !(s <= s_me * (1.0 + 1e-14)
                && s_me <= (s * s + threshold - lambda_d).sqrt() * (1.0 + 1e-14))
            {
                failures.push(format!("matrix {i}: ME bound at {j}"));
            }
            if s_me.is_nan() || s_me >= s_rr {
                failures.push(format!("matrix {i}: sigma_ME >= sigma_RR at {j}"));
            }
            for l in 0..r.dim() {
                let c = before.correlations().get(j, l);
                if j != l && c != 0.0 && after.correlations().get(j, l).abs() >= c.abs() {
                    failures.push(format!(
                        "matrix {i}: RR correlation ({j},{l}) did not shrink"
                    ));
                }
            }
        }
        if decomp.smallest() > 1e-12 * decomp.largest() {
            let alpha = 0.2 + 3.0 * stream.next_uniform();
            let inflated = mvi(&r, alpha).unwrap();
            let k0 = oracle_kappa(r.as_matrix());
            let k1 = oracle_kappa(inflated.result.as_matrix());
            let c1 = decompose_corr_std(&inflated.result).unwrap();
            let corr_gap =
                (c1.correlations().as_matrix() - before.correlations().as_matrix()).amax();
            if (k1 - k0).abs() > 1e-8 * k0 || corr_gap > 1e-12 {
                failures.push(format!("matrix {i}: MVI changed kappa or correlations"));
            }
        }
    }
    if worst_kappa > 1e-8 {
        failures.push(format!("kappa error {worst_kappa:.2e}"));
    }
    if worst_delta > 1e-10 {
        failures.push(format!("RR variance shift error {worst_delta:.2e}"));
    }
    let detail = format!(
        "200 matrices, max kappa rel error {worst_kappa:.2e}, max variance shift error {worst_delta:.2e}, {} violations{}",
        failures.len(),
        failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
    );
    out.record("2 analytic identities", failures.is_empty(), detail);
}

fn criterion_3(out: &mut Outcome) {
    let started = Instant::now();
    let mut stream = NormalStream::new(3);
    let mut worst: f64 = 0.0;
    let mut negative = 0usize;
    for problem in 0..50 {
        let n = 2 + (stream.next_uniform() * 29.0) as usize;
        let b = random_spd(n, 1.0 + 2.0 * stream.next_uniform(), 5000 + problem);
        let r = random_spd(n, 2.0 + 4.0 * stream.next_uniform(), 9000 + problem);
        let h = DMatrix::from_fn(n, n, |_, _| stream.next_normal());
        let p = DAProblem::new(
            b,
            r.clone(),
            h,
            random_vector(n, &mut stream),
            random_vector(n, &mut stream),
        )
        .unwrap();
        let kappa = 10f64.powf(
            r.condition_number().value().unwrap().log10() * (0.1 + 0.8 * stream.next_uniform()),
        );
        let alpha = 0.3 + 3.0 * stream.next_uniform();
        let reports = [
            ridge_regression(&r, kappa).unwrap(),
            min_eigenvalue(&r, kappa).unwrap(),
        ];
        let spectra: Vec<_> = reports
            .iter()
            .map(|rep| inverse_correction_spectrum(rep, r.decomposition()).unwrap())
            .collect();
        let modified: Vec<_> = reports
            .iter()
            .map(|rep| p.with_observation_cov(rep.result.clone()).unwrap())
            .collect();
        let inflated = p
            .with_observation_cov(mvi(&r, alpha).unwrap().result)
            .unwrap();

        let x = random_vector(n, &mut stream);
        let j = evaluate_objective(&p, &x).unwrap();
        for (spectrum, q) in spectra.iter().zip(&modified) {
            let correction = objective_correction(&p, spectrum, r.decomposition(), &x).unwrap();
            let direct = evaluate_objective(q, &x).unwrap().total;
            worst = worst.max((direct - (j.total - correction)).abs() / j.total.abs());
        }
        let direct = evaluate_objective(&inflated, &x).unwrap().total;
        let expected = j.background + j.observation / (alpha * alpha);
        worst = worst.max((direct - expected).abs() / j.total.abs());

        for _ in 0..100 {
            let x = random_vector(n, &mut stream);
            for spectrum in &spectra {
                if objective_correction(&p, spectrum, r.decomposition(), &x).unwrap() < 0.0 {
                    negative += 1;
                }
            }
        }
    }
    out.record(
        "3 objective correction identities",
        worst <= 1e-8,
        format!("50 problems, max relative gap {worst:.2e} (tol 1e-8)"),
    );
    out.record(
        "3 correction terms nonnegative",
        negative == 0,
        format!("{negative} negative values over 50 x 100 x 2 evaluations"),
    );
    out.timed("3 runtime", Duration::from_secs(5), started);
}

fn criterion_4(out: &mut Outcome) {
    let started = Instant::now();
    let r = soar_matrix(&SoarSpec::default()).unwrap();
    let minimal = minimal_satisfying_kappa(&r, false).unwrap();
    let strict = minimal_satisfying_kappa(&r, true).unwrap();
    let at_168 = me_kyfan_condition(&r, 168.0).unwrap();
    out.record(
        "4 minimal kappa_max satisfying the Ky Fan condition on SOAR",
        minimal == Some(168),
        format!(
            "computed {minimal:?} (strict {strict:?}), expected 168; at 168: l={} bound={}",
            at_168.l, at_168.bound
        ),
    );

    let mut stream = NormalStream::new(4);
    let mut tested = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut beaten_when_violated = 0;
    let mut violated = 0;
    for case in 0..40u64 {
        let d = 2 + (stream.next_uniform() * 3.0) as usize;
        let decades = 0.5 + 3.0 * stream.next_uniform();
        let r = random_spd(d, decades, 40_000 + case);
        let kappa = 10f64
            .powf(decades * (0.05 + 0.9 * stream.next_uniform()))
            .max(1.05);
        let condition = me_kyfan_condition(&r, kappa).unwrap();
        let oracle = kyfan_minimizer_oracle(&r, kappa, 10_000, case).unwrap();
        if condition.satisfied {
            tested += 1;
            worst = worst.max(oracle.improvement_over_me());
        } else {
            violated += 1;
            if oracle.improvement_over_me() > 1e-6 {
                beaten_when_violated += 1;
            }
        }
    }
    out.record(
        "4 randomized oracle never beats ME when the condition holds",
        tested > 0 && worst <= 1e-6,
        format!(
            "{tested} matrices x 10^4 trials, largest improvement over ME {worst:.2e} (tol 1e-6); \
             oracle beat ME on {beaten_when_violated}/{violated} matrices violating the condition"
        ),
    );
    out.timed("4 runtime", Duration::from_secs(30), started);
}

const REFERENCE_RR: [usize; 5] = [245, 244, 170, 141, 73];
const REFERENCE_ME: [usize; 5] = [240, 239, 193, 145, 76];
const REFERENCE_INFL_RR: [usize; 5] = [244, 244, 238, 233, 199];
const REFERENCE_TRUE: usize = 17;
const REFERENCE_EST: usize = 244;

fn row(result: &DAExperimentResult, variant: Variant) -> Vec<usize> {
    result
        .sweeps
        .iter()
        .map(|s| s.run(variant).unwrap().cg.iterations)
        .collect()
}

fn non_increasing(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

fn criterion_5(out: &mut Outcome, results: &[DAExperimentResult]) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut c = Vec::new();
    let (mut pass_a, mut pass_b, mut pass_c) = (true, true, true);
    for result in results {
        let seed = result.config.seed;
        let t = result.true_run.cg.iterations;
        let e = result.estimated_run.cg.iterations;
        pass_a &= t <= 25 && e >= 150;
        a.push(format!("seed {seed}: TRUE {t}, EST {e}"));

        for variant in [Variant::RidgeRegression, Variant::MinimumEigenvalue] {
            let r = row(result, variant);
            let ok = non_increasing(&r) && (r[4] as f64) <= 0.6 * r[0] as f64;
            pass_b &= ok;
            b.push(format!("seed {seed} {variant} {r:?}"));
        }
        for variant in [Variant::InflatedRr, Variant::InflatedMe] {
            let r = row(result, variant);
            let (lo, hi) = (*r.iter().min().unwrap(), *r.iter().max().unwrap());
            let ok = ((hi - lo) as f64) < 0.25 * hi as f64;
            pass_c &= ok;
            c.push(format!("seed {seed} {variant} {r:?}"));
        }
    }
    out.record(
        "5a TRUE <= 25 and EST >= 150 iterations",
        pass_a,
        a.join("; "),
    );
    out.record(
        "5b RR and ME non-increasing, kappa_max=10 count <= 60% of kappa_max=10000 count",
        pass_b,
        b.join("; "),
    );
    out.record("5c inflation rows change by < 25%", pass_c, c.join("; "));

    let reference = results
        .iter()
        .find(|r| r.config.seed == 42)
        .expect("seed 42 is run");
    let mut worst: f64 = 0.0;
    let mut check = |got: usize, want: usize| {
        worst = worst.max((got as f64 - want as f64).abs() / want as f64);
    };
    check(reference.true_run.cg.iterations, REFERENCE_TRUE);
    check(reference.estimated_run.cg.iterations, REFERENCE_EST);
    for (variant, reference_row) in [
        (Variant::RidgeRegression, REFERENCE_RR),
        (Variant::MinimumEigenvalue, REFERENCE_ME),
        (Variant::InflatedRr, REFERENCE_INFL_RR),
    ] {
        for (got, want) in row(reference, variant).into_iter().zip(reference_row) {
            check(got, want);
        }
    }
    out.record(
        "5d reference iteration counts within 15% (seed 42)",
        worst <= 0.15,
        format!(
            "largest relative deviation {:.1}%; TRUE {} EST {} RR {:?} ME {:?} INFL_RR {:?}",
            100.0 * worst,
            reference.true_run.cg.iterations,
            reference.estimated_run.cg.iterations,
            row(reference, Variant::RidgeRegression),
            row(reference, Variant::MinimumEigenvalue),
            row(reference, Variant::InflatedRr),
        ),
    );
}

fn criterion_6(out: &mut Outcome, results: &[DAExperimentResult]) {
    let n = 200;
    let a = dft_imag(&truth_signal(n));
    let expected: Vec<usize> = [1, 7, 12, 15, 45]
        .iter()
        .flat_map(|&f| [f, n - f])
        .collect();
    let structure = (0..n).all(|f| {
        if expected.contains(&f) {
            a[f].abs() > 10.0
        } else {
            a[f].abs() < 1e-9
        }
    });
    out.record(
        "6 truth signal spectrum",
        structure,
        format!(
            "nonzero at {{1,7,12,15,45}} and mirrors; |a_true| there: {:?}",
            [1, 7, 12, 15, 45].map(|f| (a[f].abs() * 100.0).round() / 100.0)
        ),
    );

    let mut passes = 0;
    let mut details = Vec::new();
    for result in results {
        let sweep = result
            .sweeps
            .iter()
            .find(|s| s.kappa_max == 100.0)
            .expect("kappa_max = 100 is swept");
        let est = &result.estimated_run.dft;
        let correction = |v| result.correction(sweep.run(v).unwrap());
        let change = |v: Variant, f: usize| (sweep.run(v).unwrap().dft[f] - est[f]).abs();
        let (c_rr, c_me) = (
            correction(Variant::RidgeRegression),
            correction(Variant::MinimumEigenvalue),
        );
        let ok = [7, 12, 15].iter().all(|&f| {
            let away = c_rr[f] < 0.0 && c_me[f] < 0.0;
            let smaller = [Variant::InflatedRr, Variant::InflatedMe].iter().all(|&v| {
                change(v, f) < change(Variant::RidgeRegression, f)
                    && change(v, f) < change(Variant::MinimumEigenvalue, f)
            });
            away && smaller
        });
        passes += usize::from(ok);
        details.push(format!(
            "seed {} {}",
            result.config.seed,
            if ok { "ok" } else { "no" }
        ));
    }
    out.record(
        "6 RR/ME move a_mod away from a_true at k=7,12,15 and MVI changes less",
        2 * passes > results.len(),
        format!("{passes}/{} seeds ({})", results.len(), details.join(", ")),
    );
}

fn criterion_7(out: &mut Outcome) {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let args = DaArgs {
            seed: 42,
            kappa_max: DaConfig::default().kappa_max,
            samples: 250,
            alpha_rr: None,
            alpha_me: None,
            convention: DistanceConvention::Chord,
            out: OutDir {
                out: dir.path().to_path_buf(),
            },
        };
        cmd_da_experiment(&args).unwrap();
    }
    let identical = DA_OUTPUTS.iter().all(|name| {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        a == b
    });
    out.record(
        "7 deterministic DA outputs",
        identical,
        format!(
            "{} files compared byte for byte across two runs with seed 42",
            DA_OUTPUTS.len()
        ),
    );
}

fn main() -> ExitCode {
    let mut out = Outcome { failures: 0 };
    criterion_1(&mut out);
    criterion_2(&mut out);
    criterion_3(&mut out);
    criterion_4(&mut out);

    let started = Instant::now();
    let seeds = [42u64, 1, 2, 3, 4];
    let results: Vec<DAExperimentResult> = seeds
        .iter()
        .map(|&seed| {
            run_da_experiment(&DaConfig {
                seed,
                ..DaConfig::default()
            })
            .unwrap()
        })
        .collect();
    criterion_5(&mut out, &results);
    out.timed("5 runtime", Duration::from_secs(120), started);
    criterion_6(&mut out, &results);
    criterion_7(&mut out);

    println!("acceptance: {} failing checks", out.failures);
    if out.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
