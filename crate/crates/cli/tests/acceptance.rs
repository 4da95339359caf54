//! Acceptance suite: one test per acceptance criterion. Each test prints a
//! single `criterion N ... PASS` line with the measured numbers (visible
//! with `--nocapture`, or on failure); the per-test result line doubles as
//! the machine-readable pass/fail record.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use wnsf::poly::characteristic_coeffs;
use wnsf::{
    alpha_band_toeplitz, build_hankel, build_predictor_regressor, estimate_alpha_ols,
    estimate_alpha_wls, estimate_k_gain, run_experiment, sensitivities, simulate,
    ExperimentConfig, MarkovEstimate, Method, StateSpaceModel, Summary,
};

/// Per-sample variance bound of the characteristic coefficient for the
/// benchmark ARMA(1,1) model (a = -0.8, c = 0.9, unit variance), frozen from
/// a closed-form Fisher-information calculation done independently of this
/// implementation (exactly 35131/180625).
const ORACLE_ALPHA_VAR_PER_SAMPLE: f64 = 0.194496885813;

fn benchmark_model() -> StateSpaceModel {
    StateSpaceModel::observer_canonical(&[0.9], &[1.7], 1.0).unwrap()
}

fn cell(summary: &Summary, method: Method, n: usize) -> &wnsf::CellSummary {
    &summary
        .cells
        .iter()
        .find(|c| c.method == method && c.n_samples == n)
        .unwrap_or_else(|| panic!("missing cell ({method}, {n})"))
        .summary
}

#[test]
fn criterion_1_mse_decreases_and_meets_the_variance_bound() {
    let start = Instant::now();
    // The benchmark defaults: grid (300,30) (600,40) (1000,50) (3000,60),
    // 1000 trials, with the numeric variance bound evaluated alongside.
    let cfg = ExperimentConfig {
        methods: vec![Method::Wnsf],
        ..ExperimentConfig::default()
    };
    let result = run_experiment(&cfg).unwrap();
    let summary = result.summary;

    let mut mse = Vec::new();
    for &n in &cfg.n_samples {
        let c = cell(&summary, Method::Wnsf, n);
        assert_eq!(c.failed, 0, "estimation failed in cell N = {n}");
        mse.push((n, c.sq_err_alpha.as_ref().unwrap().mean));
    }
    for pair in mse.windows(2) {
        assert!(
            pair[1].1 < pair[0].1,
            "MSE must decrease with N: {mse:?}"
        );
    }

    let crlb = summary.crlb.as_ref().unwrap();
    assert!(!crlb.near_singular);
    let per_sample = crlb.per_sample_alpha.as_ref().unwrap()[0];
    let oracle_gap = (per_sample - ORACLE_ALPHA_VAR_PER_SAMPLE).abs() / ORACLE_ALPHA_VAR_PER_SAMPLE;
    assert!(
        oracle_gap <= 0.05,
        "numeric bound {per_sample} vs frozen oracle {ORACLE_ALPHA_VAR_PER_SAMPLE} (gap {oracle_gap:.3})"
    );

    let bound_3000 = crlb
        .per_n
        .iter()
        .find(|c| c.n_samples == 3000)
        .unwrap()
        .alpha_variances
        .as_ref()
        .unwrap()[0];
    // "Within a factor 1.5" is two-sided: the ratio tends to 1 from above
    // for an efficient estimator, but the 1000-trial MSE point estimate
    // carries ~4.5% standard error and may land marginally below 1.
    let ratio = mse.last().unwrap().1 / bound_3000;
    assert!(
        (1.0 / 1.5..=1.5).contains(&ratio),
        "MSE at N=3000 must be within a factor 1.5 of the bound, got ratio {ratio:.4}"
    );

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 600, "runtime budget exceeded: {elapsed:?}");
    println!(
        "criterion 1 (grid MSE vs variance bound): PASS — MSE {:?}, MSE/bound at N=3000 = {ratio:.3}, oracle gap {:.2}%, runtime {elapsed:?}",
        mse.iter().map(|(n, m)| format!("N={n}: {m:.3e}")).collect::<Vec<_>>(),
        100.0 * oracle_gap
    );
}

#[test]
fn criterion_2_wnsf_beats_the_subspace_baseline_on_fit() {
    let cfg = ExperimentConfig {
        n_samples: vec![1000],
        orders: Some(vec![50]),
        methods: vec![Method::Wnsf, Method::Sim],
        with_crlb: false,
        ..ExperimentConfig::default()
    };
    let result = run_experiment(&cfg).unwrap();
    let summary = result.summary;

    let wnsf = cell(&summary, Method::Wnsf, 1000);
    let sim = cell(&summary, Method::Sim, 1000);
    let wnsf_fit = wnsf.fit.as_ref().unwrap();
    let sim_fit = sim.fit.as_ref().unwrap();
    assert!(wnsf_fit.count >= 990 && sim_fit.count >= 990);
    assert!(
        wnsf_fit.median > sim_fit.median,
        "median FIT: wnsf {} vs sim {}",
        wnsf_fit.median,
        sim_fit.median
    );

    // Same run, reweighting invariant: the weighted estimate is at least as
    // accurate as the unweighted projection in median square error.
    let wls = wnsf.sq_err_alpha.as_ref().unwrap();
    let ols = wnsf.sq_err_alpha_ols.as_ref().unwrap();
    assert!(wls.count >= 500);
    assert!(
        wls.median <= ols.median,
        "weighted {} must not lose to unweighted {}",
        wls.median,
        ols.median
    );

    // The null-space accuracy gap behind the FIT ordering: the baseline's
    // coefficient error should be several times the weighted estimate's.
    let sim_sq = sim.sq_err_alpha.as_ref().unwrap();
    assert!(
        sim_sq.mean > 3.0 * wls.mean,
        "expected a clear coefficient-MSE gap, got sim {:.3e} vs wnsf {:.3e}",
        sim_sq.mean,
        wls.mean
    );

    println!(
        "criterion 2 (method comparison at N=1000): median FIT wnsf {:.2} > sim {:.2}; coefficient MSE sim/wnsf = {:.1}; median sq-err weighted {:.3e} <= unweighted {:.3e}; wnsf IQR [{:.2}, {:.2}]",
        wnsf_fit.median,
        sim_fit.median,
        sim_sq.mean / wls.mean,
        wls.median,
        ols.median,
        wnsf_fit.q25,
        wnsf_fit.q75
    );

    // Interquartile separation. This clause is not attainable against this
    // baseline: an ideal estimator whose parameter errors are drawn from the
    // exact covariance lower bound already has a FIT lower quartile of 91.4
    // at N=1000 on this model, below the baseline's median (about 92.7), so
    // no consistent method can clear it. The subspace baseline here gives up
    // its accuracy in the predictor pole (coefficient MSE several times the
    // bound), which the impulse-response FIT barely penalizes. Left failing
    // deliberately; see README "Benchmark notes".
    assert!(
        sim_fit.median < wnsf_fit.q25 || sim_fit.median > wnsf_fit.q75,
        "criterion 2 (interquartile separation): FAIL — wnsf IQR [{:.2}, {:.2}] contains the sim median {:.2}; \
         unattainable for any consistent estimator against this baseline (ideal-covariance FIT q25 is 91.4)",
        wnsf_fit.q25,
        wnsf_fit.q75,
        sim_fit.median
    );
}

/// Monic polynomial product, coefficient form (leading 1 included).
fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Random stable characteristic coefficients: roots drawn in the disk of
/// radius 0.9 as reals or conjugate pairs, then expanded.
fn random_stable_alpha(rng: &mut ChaCha12Rng, n_x: usize) -> Vec<f64> {
    let mut coeffs = vec![1.0];
    let mut remaining = n_x;
    while remaining > 0 {
        if remaining >= 2 && rng.random::<bool>() {
            let m = 0.1 + 0.8 * rng.random::<f64>();
            let th = 0.2 + (std::f64::consts::PI - 0.4) * rng.random::<f64>();
            coeffs = poly_mul(&coeffs, &[1.0, -2.0 * m * th.cos(), m * m]);
            remaining -= 2;
        } else {
            let r = 1.8 * rng.random::<f64>() - 0.9;
            coeffs = poly_mul(&coeffs, &[1.0, -r]);
            remaining -= 1;
        }
    }
    coeffs[1..].to_vec()
}

/// Random identifiable model: a stable alpha plus a gain kept away from
/// pole-zero cancellation (the null space is only defined at full Hankel
/// rank, so near-cancelling draws are re-drawn on the same stream).
fn random_identifiable_model(rng: &mut ChaCha12Rng, n_x: usize) -> (Vec<f64>, Vec<f64>) {
    let alpha = random_stable_alpha(rng, n_x);
    loop {
        let k: Vec<f64> = (0..n_x).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
        let model = StateSpaceModel::observer_canonical(&alpha, &k, 1.0).unwrap();
        let g = model.markov_parameters(2 * n_x + 1).unwrap();
        let hank = DMatrix::from_fn(n_x + 1, n_x, |i, j| g[i + j]);
        let sv = hank.svd(false, false).singular_values;
        if sv[n_x - 1] > 1e-3 * sv[0] {
            return (alpha, k);
        }
    }
}

#[test]
fn criterion_3_exact_recovery_on_random_stable_models() {
    let mut rng = ChaCha12Rng::seed_from_u64(2024);
    let mut checked = 0usize;
    let mut worst_alpha = 0.0f64;
    let mut worst_k = 0.0f64;
    for round in 0..30 {
        for n_x in 1..=4 {
            let (alpha, k) = random_identifiable_model(&mut rng, n_x);
            let model = StateSpaceModel::observer_canonical(&alpha, &k, 1.0).unwrap();
            let g = model.markov_parameters(2 * n_x + 5).unwrap();

            // Null-space steps on the exact Markov parameters.
            let h = build_hankel(&g, n_x).unwrap();
            let ols = estimate_alpha_ols(&h).unwrap();
            let me = MarkovEstimate::from_parts(
                g.clone(),
                DMatrix::identity(g.len(), g.len()),
                1000,
                1.0,
            )
            .unwrap();
            let wls = estimate_alpha_wls(&h, &ols.alpha, &me, 1).unwrap();
            let alpha_err = wls
                .alpha
                .iter()
                .zip(&alpha)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(
                alpha_err <= 1e-8,
                "round {round}, n_x {n_x}: alpha error {alpha_err:.3e} for {alpha:?}"
            );

            // Gain regression on noise-free predictor data: the target is the
            // exact regressor response to the true gain.
            let y: Vec<f64> = (0..400).map(|_| rng.random::<f64>() - 0.5).collect();
            let truth_reg = build_predictor_regressor(&alpha, &y).unwrap();
            let target = &truth_reg.xi * DVector::from_column_slice(&k);
            let reg = build_predictor_regressor(&wls.alpha, &y).unwrap();
            let (k_hat, _) = estimate_k_gain(&reg, target.as_slice()).unwrap();
            let k_err = k_hat
                .iter()
                .zip(&k)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(
                k_err <= 1e-8,
                "round {round}, n_x {n_x}: gain error {k_err:.3e} for {k:?}"
            );

            checked += 1;
            worst_alpha = worst_alpha.max(alpha_err);
            worst_k = worst_k.max(k_err);
        }
    }
    assert!(checked >= 100);
    println!(
        "criterion 3 (exact recovery, {checked} random models): PASS — worst alpha error {worst_alpha:.2e}, worst gain error {worst_k:.2e} (tolerance 1e-8)"
    );
}

#[test]
fn criterion_4_algebraic_identity_suite() {
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let mut worst_null = 0.0f64;
    let mut worst_toeplitz = 0.0f64;
    let mut worst_rank = 0.0f64;
    let mut worst_roundtrip = 0.0f64;
    for _ in 0..25 {
        for n_x in 1..=4 {
            let (alpha, k) = random_identifiable_model(&mut rng, n_x);
            let model = StateSpaceModel::observer_canonical(&alpha, &k, 1.0).unwrap();
            let len = 2 * n_x + 7;
            let g = model.markov_parameters(len).unwrap();

            // Null-space identity: the true coefficients annihilate the
            // shifted Markov sequence.
            for t in n_x..len {
                let mut r = g[t];
                for (j, a) in alpha.iter().enumerate() {
                    r += a * g[t - 1 - j];
                }
                worst_null = worst_null.max(r.abs());
            }

            // Banded-Toeplitz rewrite of the same residuals: T(alpha)' g
            // equals the Hankel product with the extended coefficient vector.
            let t = alpha_band_toeplitz(&alpha, len).unwrap();
            let lhs = t.transpose() * DVector::from_column_slice(&g);
            let mut ext = alpha.clone();
            ext.reverse();
            ext.push(1.0);
            let hank = DMatrix::from_fn(len - n_x, n_x + 1, |i, j| g[i + j]);
            let rhs = hank * DVector::from_column_slice(&ext);
            worst_toeplitz = worst_toeplitz.max((lhs - rhs).amax());

            // Exact data gives a Hankel of rank exactly n_x.
            let p = n_x + 3;
            let g_long = model.markov_parameters(2 * p - 1).unwrap();
            let wide = DMatrix::from_fn(p, p, |i, j| g_long[i + j]);
            let sv = wide.svd(false, false).singular_values;
            worst_rank = worst_rank.max(sv[n_x] / sv[0]);

            // Companion-form characteristic polynomial round trip.
            let back = characteristic_coeffs(&model.a_k()).unwrap();
            for (a, b) in back.iter().zip(&alpha) {
                worst_roundtrip = worst_roundtrip.max((a - b).abs());
            }
        }
    }
    assert!(worst_null <= 1e-10, "null-space identity residual {worst_null:.3e}");
    assert!(worst_toeplitz <= 1e-13, "rewrite mismatch {worst_toeplitz:.3e}");
    assert!(worst_rank <= 1e-10, "rank-(n_x+1) leakage {worst_rank:.3e}");
    assert!(worst_roundtrip <= 1e-8, "round-trip error {worst_roundtrip:.3e}");
    println!(
        "criterion 4 (algebraic identities, 100 random models): PASS — null-space {worst_null:.2e} (tol 1e-10), rewrite {worst_toeplitz:.2e} (tol 1e-13), rank leakage {worst_rank:.2e} (tol 1e-10), round trip {worst_roundtrip:.2e} (tol 1e-8)"
    );
}

#[test]
fn criterion_5_mse_shrinks_at_the_parametric_rate() {
    let cfg = ExperimentConfig {
        n_samples: vec![750, 3000],
        orders: Some(vec![45, 60]),
        methods: vec![Method::Wnsf],
        with_crlb: false,
        ..ExperimentConfig::default()
    };
    let result = run_experiment(&cfg).unwrap();
    let m750 = cell(&result.summary, Method::Wnsf, 750)
        .sq_err_alpha
        .as_ref()
        .unwrap()
        .mean;
    let m3000 = cell(&result.summary, Method::Wnsf, 3000)
        .sq_err_alpha
        .as_ref()
        .unwrap()
        .mean;
    let ratio = m750 / m3000;
    assert!(
        (2.5..=6.0).contains(&ratio),
        "quadrupling N must shrink MSE by [2.5, 6] (theory: 4), got {ratio:.3}"
    );
    println!(
        "criterion 5 (consistency rate): PASS — MSE(750)/MSE(3000) = {ratio:.3} in [2.5, 6] over 1000 trials per point"
    );
}

#[test]
fn criterion_6_finite_differences_match_analytic_derivative_filters() {
    let model = benchmark_model();
    let t = simulate(&model, 10_000, 99, 1000).unwrap();
    let z = sensitivities(&model, &t.y, 1e-6).unwrap();

    // Analytic prediction-error derivatives for the ARMA(1,1) form
    // (1 + a q^-1) y = (1 + c q^-1) e with a = -0.8, c = 0.9, mapped to the
    // canonical parameters by c = alpha, a = alpha - k.
    let (a, c) = (-0.8, 0.9);
    let n = t.y.len();
    let mut d_da = vec![0.0; n]; // q^-1 / (1 + c q^-1) y
    let mut d_dc = vec![0.0; n]; // -q^-1 (1 + a q^-1) / (1 + c q^-1)^2 y
    let mut stage = vec![0.0; n];
    for k in 0..n {
        let y1 = if k >= 1 { t.y[k - 1] } else { 0.0 };
        let y2 = if k >= 2 { t.y[k - 2] } else { 0.0 };
        let prev = if k >= 1 { d_da[k - 1] } else { 0.0 };
        d_da[k] = y1 - c * prev;
        let s_prev = if k >= 1 { stage[k - 1] } else { 0.0 };
        stage[k] = y1 + a * y2 - c * s_prev;
        let d_prev = if k >= 1 { d_dc[k - 1] } else { 0.0 };
        // Second pass of the 1/(1 + c q^-1) filter, output sign folded in.
        d_dc[k] = -stage[k] - c * d_prev;
    }

    let mut err_alpha = 0.0f64;
    let mut ref_alpha = 0.0f64;
    let mut err_k = 0.0f64;
    let mut ref_k = 0.0f64;
    for i in 0..n {
        let zeta_alpha = d_dc[i] + d_da[i];
        let zeta_k = -d_da[i];
        err_alpha += (z[(i, 0)] - zeta_alpha).powi(2);
        ref_alpha += zeta_alpha * zeta_alpha;
        err_k += (z[(i, 1)] - zeta_k).powi(2);
        ref_k += zeta_k * zeta_k;
    }
    let rel_alpha = (err_alpha / ref_alpha).sqrt();
    let rel_k = (err_k / ref_k).sqrt();
    assert!(rel_alpha <= 1e-4, "alpha-sensitivity mismatch {rel_alpha:.3e}");
    assert!(rel_k <= 1e-4, "gain-sensitivity mismatch {rel_k:.3e}");
    println!(
        "criterion 6 (derivative filters on 1e4 samples): PASS — relative error alpha {rel_alpha:.2e}, gain {rel_k:.2e} (tolerance 1e-4)"
    );
}

#[test]
fn criterion_7_results_are_bit_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("study.conf");
    std::fs::write(
        &manifest,
        "arma-a = -0.8\narma-c = 0.9\nn-samples = [300, 600]\norders = [30, 40]\n\
         trials = 50\nmethods = [wnsf, sim]\nwith-crlb = false\n",
    )
    .unwrap();

    let mut outputs = Vec::new();
    for run in 0..2 {
        let csv = dir.path().join(format!("run{run}.csv"));
        let summary = dir.path().join(format!("run{run}.summary.json"));
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_wnsf"))
            .args([
                "montecarlo",
                "--config",
                manifest.to_str().unwrap(),
                "-o",
                csv.to_str().unwrap(),
                "--summary",
                summary.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push((
            std::fs::read(&csv).unwrap(),
            std::fs::read(&summary).unwrap(),
        ));
    }
    assert_eq!(outputs[0].0, outputs[1].0, "results CSV must be bit-identical");
    assert_eq!(outputs[0].1, outputs[1].1, "summary JSON must be bit-identical");
    println!(
        "criterion 7 (artifact determinism): PASS — {} CSV bytes and {} JSON bytes identical across two runs",
        outputs[0].0.len(),
        outputs[0].1.len()
    );
}
