//! Acceptance gate: one test per criterion, each printing a PASS line with
//! the measured values once its assertions hold.

use std::time::Instant;

use orthoboot::dgp::{plm_e0, plm_g0, plm_ky0, simulate_plm, PlmConfig};
use orthoboot::diagnostics::{
    f_monte_carlo, orthogonality_check, perturbed, AipwGateaux, GateauxPath, PlmGateaux,
};
use orthoboot::harness::{
    emit_report, run_dimension_sweep, run_experiment, DgpSpec, ExperimentConfig, LearnerSpec,
    ReportFormat, ScoreSpec, THETA0,
};
use orthoboot::nuisance::{predictor_from_fn, ForestConfig};
use orthoboot::posterior::sample_posterior;
use orthoboot::scores::{
    solve_newton, solve_weighted, AipwScore, NuisanceFit, PartialledOutScore, Score,
};
use orthoboot::stream::substream;
use orthoboot::weights::{draw_dirichlet, equal_weights, WeightScheme, WeightVector};

const SEED: u64 = 17;

fn desk_config(dgp: DgpSpec, score: ScoreSpec, learner: LearnerSpec, n: usize) -> ExperimentConfig {
    ExperimentConfig {
        dgp,
        score,
        learner,
        n,
        replicates: 200,
        bootstrap: 500,
        level: 0.95,
        master_seed: SEED,
        output_path: None,
    }
}

fn forest() -> LearnerSpec {
    LearnerSpec::Forest {
        config: ForestConfig::default(),
    }
}

fn assert_in(label: &str, value: f64, lo: f64, hi: f64) {
    assert!(
        value >= lo && value <= hi,
        "{label} = {value} outside [{lo}, {hi}]"
    );
}

#[test]
fn criterion_1_plm_table_replication() {
    let start = Instant::now();
    let cfg = desk_config(DgpSpec::Plm { q: 5 }, ScoreSpec::PartialledOut, forest(), 500);
    let report = run_experiment(&cfg).unwrap();
    assert_in("avg posterior mean", report.avg_post_mean, 2.97, 3.07);
    assert_in(
        "n x avg posterior variance",
        report.avg_post_var_times_n,
        4.3,
        5.9,
    );
    assert_in("coverage", report.coverage_pct, 91.0, 98.0);
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs() < 900,
        "runtime {elapsed:?} exceeds 15 minutes"
    );
    println!(
        "criterion 1 PASS: mean {:.4}, n*var {:.4}, coverage {:.2}%, {elapsed:?}",
        report.avg_post_mean, report.avg_post_var_times_n, report.coverage_pct
    );
}

#[test]
fn criterion_2_kernel_table_replication() {
    let cfg = desk_config(
        DgpSpec::KernelModel,
        ScoreSpec::PartialledOut,
        LearnerSpec::Kernel { bandwidth: None },
        500,
    );
    let report = run_experiment(&cfg).unwrap();
    assert_in("avg posterior mean", report.avg_post_mean, 2.97, 3.03);
    assert_in(
        "n x avg posterior variance",
        report.avg_post_var_times_n,
        0.85,
        1.15,
    );
    assert_in("coverage", report.coverage_pct, 90.0, 97.0);
    println!(
        "criterion 2 PASS: mean {:.4}, n*var {:.4}, coverage {:.2}%",
        report.avg_post_mean, report.avg_post_var_times_n, report.coverage_pct
    );
}

#[test]
fn criterion_3_aipw_table_replication() {
    let cfg = desk_config(DgpSpec::Plm { q: 5 }, ScoreSpec::Aipw, forest(), 500);
    let report = run_experiment(&cfg).unwrap();
    assert_in("avg posterior mean", report.avg_post_mean, 2.94, 3.06);
    assert_in("coverage", report.coverage_pct, 91.0, 98.0);
    println!(
        "criterion 3 PASS: mean {:.4}, coverage {:.2}%",
        report.avg_post_mean, report.coverage_pct
    );
}

#[test]
fn criterion_4_dimension_effect() {
    let base = desk_config(DgpSpec::Plm { q: 5 }, ScoreSpec::PartialledOut, forest(), 250);
    let cells = run_dimension_sweep(&base, &[5, 20], &[250]).unwrap();
    let low_q = &cells[0].report;
    let high_q = &cells[1].report;
    let coverage_drop = low_q.coverage_pct - high_q.coverage_pct;
    let bias_rise =
        (high_q.avg_post_mean - THETA0).abs() - (low_q.avg_post_mean - THETA0).abs();
    assert!(
        coverage_drop >= 2.0,
        "coverage drop {coverage_drop} below 2 percentage points"
    );
    assert!(bias_rise >= 0.05, "bias rise {bias_rise} below 0.05");
    println!(
        "criterion 4 PASS: coverage {:.2}% -> {:.2}%, |bias| {:.4} -> {:.4}",
        low_q.coverage_pct,
        high_q.coverage_pct,
        (low_q.avg_post_mean - THETA0).abs(),
        (high_q.avg_post_mean - THETA0).abs()
    );
}

/// Per-observation paired difference m(+s) - m(-s): a low-variance
/// finite-difference estimate of 2s f'(0) with its own standard error.
fn paired_fd(
    score: &dyn Score<f64>,
    theta0: f64,
    data: &orthoboot::Dataset,
    h_at: impl Fn(f64) -> NuisanceFit<f64>,
    step: f64,
) -> (f64, f64) {
    let h_up = h_at(step);
    let h_down = h_at(-step);
    let n = data.len();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for i in 0..n {
        let obs = data.obs(i);
        let d = score.evaluate(&obs, theta0, &h_up).unwrap()
            - score.evaluate(&obs, theta0, &h_down).unwrap();
        sum += d;
        sum_sq += d * d;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    (
        mean / (2.0 * step),
        (var / n as f64).sqrt() / (2.0 * step),
    )
}

const DK: f64 = 0.5;
const DE: f64 = 0.05;

fn plm_fit_at(t: f64) -> NuisanceFit<f64> {
    NuisanceFit::PartialledOut {
        k_y: perturbed(
            predictor_from_fn(|x: &[f64]| plm_ky0(x, THETA0)),
            predictor_from_fn(|x: &[f64]| plm_ky0(x, THETA0) + DK),
            t,
        ),
        e: perturbed(
            predictor_from_fn(plm_e0::<f64>),
            predictor_from_fn(|x: &[f64]| plm_e0::<f64>(x) + DE),
            t,
        ),
    }
}

fn aipw_fit_at(t: f64) -> NuisanceFit<f64> {
    NuisanceFit::Aipw {
        mu1: perturbed(
            predictor_from_fn(|x: &[f64]| THETA0 + plm_g0(x)),
            predictor_from_fn(|x: &[f64]| THETA0 + plm_g0(x) + DK),
            t,
        ),
        mu0: perturbed(
            predictor_from_fn(plm_g0::<f64>),
            predictor_from_fn(|x: &[f64]| plm_g0(x) - DK),
            t,
        ),
        e: perturbed(
            predictor_from_fn(plm_e0::<f64>),
            predictor_from_fn(|x: &[f64]| plm_e0::<f64>(x) + DE),
            t,
        ),
    }
}

#[test]
fn criterion_5_orthogonality_suite() {
    let mut rng = substream(SEED, 5);
    let data = simulate_plm(&PlmConfig::new(200_000, 5, THETA0).unwrap(), &mut rng).unwrap();
    let truth = data.truth.as_ref().unwrap();

    // f(0) = 0 within 4 Monte Carlo standard errors, both scores
    for (label, score, h) in [
        (
            "plm",
            &PartialledOutScore as &dyn Score<f64>,
            plm_fit_at(0.0),
        ),
        ("aipw", &AipwScore as &dyn Score<f64>, aipw_fit_at(0.0)),
    ] {
        let v = f_monte_carlo(score, THETA0, &h, &data).unwrap();
        let se = v.stderr.unwrap();
        assert!(
            v.f.abs() <= 4.0 * se,
            "{label}: f(0) = {} with se {se}",
            v.f
        );
    }

    // finite-difference f'(0) = 0 within 4 standard errors, both scores
    let (fp_plm, se_plm) = paired_fd(&PartialledOutScore, THETA0, &data, plm_fit_at, 0.05);
    assert!(
        fp_plm.abs() <= 4.0 * se_plm,
        "plm f'(0) = {fp_plm} with se {se_plm}"
    );
    let (fp_aipw, se_aipw) = paired_fd(&AipwScore, THETA0, &data, aipw_fit_at, 0.05);
    assert!(
        fp_aipw.abs() <= 4.0 * se_aipw,
        "aipw f'(0) = {fp_aipw} with se {se_aipw}"
    );

    // PLM analytic curve exactly quadratic, with X-dependent perturbations
    let n = data.len();
    let dk: Vec<f64> = (0..n).map(|i| 0.3 * data.x.row(i)[0]).collect();
    let de: Vec<f64> = (0..n).map(|i| 0.05 * data.x.row(i)[1].cos()).collect();
    let plm_path = PlmGateaux::from_samples(&dk, &de, THETA0).unwrap();
    let plm_report = orthogonality_check(&plm_path, 1e-8).unwrap();
    assert!(
        plm_report.quadratic_fit_residual < 1e-10,
        "quadratic residual {}",
        plm_report.quadratic_fit_residual
    );

    // analytic vs Monte Carlo at 5 grid points, both scores
    let plm_const = PlmGateaux::from_samples(&vec![DK; n], &vec![DE; n], THETA0).unwrap();
    let aipw_const = AipwGateaux::from_samples(
        &truth.e0,
        &vec![DK; n],
        &vec![-DK; n],
        &vec![DE; n],
    )
    .unwrap();
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let an = plm_const.value(t).unwrap().f;
        let mc = f_monte_carlo(&PartialledOutScore, THETA0, &plm_fit_at(t), &data).unwrap();
        let se = mc.stderr.unwrap();
        assert!(
            (an - mc.f).abs() <= 4.0 * se,
            "plm t={t}: analytic {an} vs mc {} (se {se})",
            mc.f
        );

        let an = aipw_const.value(t).unwrap().f;
        let mc = f_monte_carlo(&AipwScore, THETA0, &aipw_fit_at(t), &data).unwrap();
        let se = mc.stderr.unwrap();
        assert!(
            (an - mc.f).abs() <= 4.0 * se,
            "aipw t={t}: analytic {an} vs mc {} (se {se})",
            mc.f
        );
    }

    println!(
        "criterion 5 PASS: f'(0) plm {fp_plm:.2e} (se {se_plm:.2e}), aipw {fp_aipw:.2e} \
         (se {se_aipw:.2e}), quad residual {:.2e}",
        plm_report.quadratic_fit_residual
    );
}

#[test]
fn criterion_6_duality_suite() {
    // (a) equal weights reproduce the frequentist solution exactly
    let mut rng = substream(SEED, 6);
    let data = simulate_plm(&PlmConfig::new(500, 5, THETA0).unwrap(), &mut rng).unwrap();
    let h = plm_fit_at(0.0);
    let sample = sample_posterior(&data, &PartialledOutScore, &h, 25, WeightScheme::Equal, 3)
        .unwrap();
    assert!(sample.draws.iter().all(|&d| d == sample.theta_hat_n));

    // (b) AIPW posterior mean debiases to theta_hat_n over 1e5 draws
    let h_aipw = aipw_fit_at(0.0);
    let big = sample_posterior(
        &data,
        &AipwScore,
        &h_aipw,
        100_000,
        WeightScheme::Dirichlet,
        4,
    )
    .unwrap();
    let b = big.draws.len() as f64;
    let mean = big.draws.iter().sum::<f64>() / b;
    let sd = (big
        .draws
        .iter()
        .map(|d| (d - mean).powi(2))
        .sum::<f64>()
        / (b - 1.0))
        .sqrt();
    let tol = 4.0 * sd / b.sqrt();
    assert!(
        (mean - big.theta_hat_n).abs() <= tol,
        "posterior mean {mean} vs theta_hat {} (tol {tol})",
        big.theta_hat_n
    );

    // (c) posterior normality at n = 2000: standardized tail quantiles
    let mut rng = substream(SEED, 66);
    let data2 = simulate_plm(&PlmConfig::new(2000, 5, THETA0).unwrap(), &mut rng).unwrap();
    let norm = sample_posterior(
        &data2,
        &PartialledOutScore,
        &plm_fit_at(0.0),
        4000,
        WeightScheme::Dirichlet,
        5,
    )
    .unwrap();
    let m = norm.draws.iter().sum::<f64>() / 4000.0;
    let s = (norm.draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / 3999.0).sqrt();
    let mut std: Vec<f64> = norm.draws.iter().map(|d| (d - m) / s).collect();
    std.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q_lo = orthoboot::stats::quantile(&std, 0.025);
    let q_hi = orthoboot::stats::quantile(&std, 0.975);
    assert!(
        (q_lo + 1.96).abs() <= 0.15,
        "2.5% quantile {q_lo} vs -1.96"
    );
    assert!(
        (q_hi - 1.96).abs() <= 0.15,
        "97.5% quantile {q_hi} vs +1.96"
    );

    println!(
        "criterion 6 PASS: debias gap {:.2e}, standardized quantiles ({q_lo:.3}, {q_hi:.3})",
        (mean - big.theta_hat_n).abs()
    );
}

#[test]
fn criterion_7_oracle_equivalences() {
    use orthoboot::data::{Dataset, Matrix};
    use rand::Rng;

    // Newton vs closed form on 100 random small instances
    let mut rng = substream(SEED, 7);
    let mut max_gap: f64 = 0.0;
    for _ in 0..100 {
        let n = 50;
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let z: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect();
        let x = Matrix::from_rows(vec![vec![0.0]; n]).unwrap();
        let data = Dataset::new(y, z, x, None).unwrap();
        let c1 = rng.gen_range(-1.0..1.0);
        let c2 = rng.gen_range(0.2..0.8);
        let h = NuisanceFit::PartialledOut {
            k_y: predictor_from_fn(move |_x: &[f64]| c1),
            e: predictor_from_fn(move |_x: &[f64]| c2),
        };
        let w = draw_dirichlet::<f64, _>(n, &mut rng).unwrap();
        let exact = solve_weighted(&PartialledOutScore, &data, &w, &h).unwrap();
        let newton = solve_newton(
            &PartialledOutScore,
            &data,
            &w,
            &h,
            0.0,
            1e-13,
            100,
        )
        .unwrap();
        max_gap = max_gap.max((exact.theta_hat - newton.theta_hat).abs());
    }
    assert!(max_gap <= 1e-10, "max solver gap {max_gap}");

    // weight moments: E[w_i] = 1/n
    let n = 1000;
    let draws = 2000;
    let mut rng = substream(SEED, 77);
    let mut w_sum = 0.0;
    let mut cond3_sum = 0.0;
    for _ in 0..draws {
        let w: WeightVector<f64> = draw_dirichlet(n, &mut rng).unwrap();
        w_sum += w.as_slice()[0];
        let stat = w
            .as_slice()
            .iter()
            .map(|&wi| (n as f64 * wi - 1.0).powi(2))
            .sum::<f64>()
            / n as f64;
        cond3_sum += stat;
    }
    let w_mean = w_sum / draws as f64;
    assert!(
        (w_mean - 1.0 / n as f64).abs() < 1e-4,
        "E[w_1] = {w_mean}"
    );
    let cond3 = cond3_sum / draws as f64;
    assert!((cond3 - 1.0).abs() <= 0.1, "condition-3 statistic {cond3}");

    // equal weights trivially satisfy the mean property
    let eq = equal_weights::<f64>(n).unwrap();
    assert!((eq.as_slice()[0] - 1.0 / n as f64).abs() < 1e-15);

    println!("criterion 7 PASS: solver gap {max_gap:.2e}, condition-3 {cond3:.4}");
}

#[test]
fn criterion_8_determinism_across_thread_counts() {
    let cfg = ExperimentConfig {
        dgp: DgpSpec::Plm { q: 5 },
        score: ScoreSpec::PartialledOut,
        learner: forest(),
        n: 200,
        replicates: 20,
        bootstrap: 100,
        level: 0.95,
        master_seed: SEED,
        output_path: None,
    };
    let default_pool = run_experiment(&cfg).unwrap();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run_experiment(&cfg))
        .unwrap();
    let dual = rayon::ThreadPoolBuilder::new()
        .num_threads(2)
        .build()
        .unwrap()
        .install(|| run_experiment(&cfg))
        .unwrap();
    assert_eq!(default_pool, single);
    assert_eq!(default_pool, dual);

    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.tsv");
    let b = dir.path().join("b.tsv");
    emit_report(&default_pool, ReportFormat::Delimited, &a).unwrap();
    emit_report(&single, ReportFormat::Delimited, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    println!("criterion 8 PASS: byte-identical reports across 1, 2, and default threads");
}
