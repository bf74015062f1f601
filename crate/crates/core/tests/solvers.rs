mod common;

use std::sync::Arc;

use molgrad::denoiser::{Denoiser, FirmShrinkage, SoftShrinkage};
use molgrad::experiments::{generate_problem, ProblemSpec};
use molgrad::linalg::{difference_operator, QuadraticFidelity};
use molgrad::regularizers::FirmParams;
use molgrad::solvers::{
    derive_pd_params, run_condat_vu_form2, run_fbs, run_pd_heuristic, run_pd_molgrad,
    validate_fbs_window, CondatVu, FbsConfig, HeuristicConfig, PdConfig, PrimalDualMolGrad,
    RunOptions, StopReason,
};
use molgrad::{DenseVector, Error, LinearMap, Matrix, StepCondition};
use proptest::prelude::*;

fn firm(l1: f64, l2: f64) -> Arc<dyn Denoiser> {
    Arc::new(FirmShrinkage::new(FirmParams::new(l1, l2).unwrap()))
}

fn small_fidelity(seed: u64) -> Arc<QuadraticFidelity> {
    let rows = common::gaussian_rows(24, 6, seed);
    let y = common::random_vector(24, 2.0, &mut common::rng(seed + 100));
    Arc::new(QuadraticFidelity::new(Matrix::from_rows(&rows).unwrap(), y).unwrap())
}

#[test]
fn l1_prox_case_is_exact_in_one_step() {
    let fid = Arc::new(
        QuadraticFidelity::new(
            Matrix::identity(2),
            DenseVector::new(vec![2.0, 0.5]).unwrap(),
        )
        .unwrap(),
    );
    let t = Arc::new(SoftShrinkage::with_beta(1.0, 0.5).unwrap());
    let cfg = FbsConfig::new(1.0, t, fid, RunOptions::default()).unwrap();
    assert_eq!(cfg.step(&DenseVector::zeros(2)).as_slice(), &[1.0, 0.0]);
}

/// Independent restatement of the window: `β > (κ-ρ)/(κ+ρ)`, `β < 1`,
/// `(1-β)/ρ <= μ < (1+β)/κ`.
fn window_accepts(mu: f64, beta: f64, rho: f64, kappa: f64) -> bool {
    beta * (kappa + rho) > kappa - rho
        && beta < 1.0
        && mu * rho >= 1.0 - beta
        && mu * kappa < 1.0 + beta
}

#[test]
fn window_boundary_grid_and_accepted_runs_converge() {
    let fid = small_fidelity(1);
    let (rho, kappa) = (fid.rho, fid.smoothness);
    let stop_tol = 1e-10;
    let mut accepted = 0;
    for beta in [0.6, 0.75, 0.9, 0.99] {
        let (lo, hi) = ((1.0 - beta) / rho, (1.0 + beta) / kappa);
        for mu in [
            lo * (1.0 - 1e-6),
            lo,
            lo * (1.0 + 1e-6),
            0.5 * (lo + hi),
            hi * (1.0 - 1e-6),
            hi,
            hi * (1.0 + 1e-6),
        ] {
            let expected = window_accepts(mu, beta, rho, kappa);
            let got = validate_fbs_window(mu, beta, rho, kappa);
            assert_eq!(got.is_ok(), expected, "beta={beta} mu={mu} lo={lo} hi={hi}");
            if let Err(e) = got {
                assert!(matches!(e, Error::StepSize { .. }));
                continue;
            }
            let t = Arc::new(SoftShrinkage::with_beta(0.3, beta).unwrap());
            let opts = RunOptions {
                max_iter: 200_000,
                stop_tol,
                ..RunOptions::default()
            };
            let cfg = FbsConfig::new(mu, t, fid.clone(), opts).unwrap();
            let (x, trace) = run_fbs(&cfg, &DenseVector::zeros(fid.dim())).unwrap();
            assert_eq!(trace.stop_reason, StopReason::Converged);
            let resid = cfg.step(&x).distance_sq(&x).sqrt();
            assert!(
                resid <= 2.0 * stop_tol * (1.0 + x.norm()),
                "mu={mu}: {resid}"
            );
            accepted += 1;
        }
    }
    assert!(accepted >= 12);
}

proptest! {
    #[test]
    fn window_validation_agrees_with_restatement(
        rho in 0.05f64..5.0,
        ratio in 1.0f64..20.0,
        beta in 0.01f64..0.999,
        t in -0.2f64..1.2,
    ) {
        let kappa = rho * ratio;
        let (lo, hi) = ((1.0 - beta) / rho, (1.0 + beta) / kappa);
        let mu = lo + t * (hi - lo).abs().max(1e-3);
        prop_assert_eq!(validate_fbs_window(mu, beta, rho, kappa).is_ok(), window_accepts(mu, beta, rho, kappa));
    }

    #[test]
    fn pd_config_enforces_step_conditions(scale_sigma in 0.1f64..3.0, scale_tau in 0.1f64..3.0) {
        let fid = small_fidelity(2);
        let l = difference_operator(6).unwrap();
        let fid = Arc::new(QuadraticFidelity::with_companion(
            fid.matrix().clone(), fid.observation().clone(), &l).unwrap());
        let t = firm(1.0, 4.0);
        let (sigma0, tau0) = derive_pd_params(fid.rho, fid.kappa_fhat.unwrap(), 4.0, t.beta(), 1.0, 0.9).unwrap();
        let l_norm_sq = l.cached_norm().unwrap().powi(2);
        let sigma = sigma0 * scale_sigma;
        let tau = tau0 * scale_tau;
        let sigma_ok = sigma <= fid.rho * t.beta() / (l_norm_sq * (1.0 - t.beta())) * (1.0 + 1e-12);
        let tau_ok = tau * (sigma * l_norm_sq + fid.kappa_fhat.unwrap() / 2.0) < 1.0;
        let r = PdConfig::new(sigma, tau, l, fid, t, RunOptions::default());
        match r {
            Ok(_) => prop_assert!(sigma_ok && tau_ok),
            Err(Error::StepSize { condition: StepCondition::PrimalDualSigma, .. }) => prop_assert!(!sigma_ok),
            Err(Error::StepSize { condition: StepCondition::PrimalDualTau, .. }) => prop_assert!(sigma_ok && !tau_ok),
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }
}

fn desk_pd(seed: u64, iters: usize) -> (PdConfig, usize, usize) {
    let p = generate_problem(&ProblemSpec::desk(seed)).unwrap();
    let d = p.difference().clone();
    let (n, m) = (d.input_dim(), d.output_dim());
    let cfg = PdConfig::derived(
        1.0,
        0.9,
        d,
        p.fidelity(),
        firm(2.5, 5.0),
        RunOptions::fixed(iters),
    )
    .unwrap();
    (cfg, n, m)
}

#[test]
fn modified_scheme_is_condat_vu_with_shifted_smooth_part() {
    // x⁺ = x - τ(∇f(x) - c LᵀLx) - τLᵀ(2u⁺ - u),  u⁺ = v - σT(v/(σ+c)),  v = u + σLx
    let (cfg, n, m) = desk_pd(3, 300);
    let (sigma, c) = (cfg.sigma(), cfg.c());
    let l = cfg.l().clone();
    let grad = |x: &DenseVector| {
        let g = cfg.fidelity().gradient(x).unwrap();
        g.add_scaled(-c, &l.normal_apply(x).unwrap())
    };
    let prox =
        |v: &DenseVector| v.add_scaled(-sigma, &cfg.denoiser().apply(&v.scaled(1.0 / (sigma + c))));
    let mut generic = CondatVu::new(
        &l,
        sigma,
        cfg.tau(),
        grad,
        prox,
        DenseVector::zeros(n),
        DenseVector::zeros(m),
    )
    .unwrap();
    let mut alg =
        PrimalDualMolGrad::new(&cfg, DenseVector::zeros(n), DenseVector::zeros(m)).unwrap();
    for _ in 0..300 {
        generic.step();
        alg.step();
    }
    let scale = 1.0 + alg.x().norm() + alg.u().norm();
    assert!(alg.x().distance_sq(generic.x()).sqrt() <= 1e-10 * scale);
    assert!(alg.u().distance_sq(generic.u()).sqrt() <= 1e-10 * scale);
}

#[test]
fn heuristic_is_condat_vu_with_firm_dual_step() {
    let p = generate_problem(&ProblemSpec::desk(5)).unwrap();
    let fid = p.fidelity();
    let d = p.difference().clone();
    let (n, m) = (d.input_dim(), d.output_dim());
    let (sigma, mu) = (0.2, 3.0);
    let tau = 0.9 / (sigma * 4.0 + fid.smoothness / 2.0);
    let h = HeuristicConfig::new(
        sigma,
        tau,
        mu,
        5.0,
        d.clone(),
        fid.clone(),
        RunOptions::fixed(400),
    )
    .unwrap();
    let (xh, uh, _) = run_pd_heuristic(&h, &DenseVector::zeros(n), &DenseVector::zeros(m)).unwrap();

    let params = FirmParams::new(1.0 / (mu * sigma), 5.0).unwrap();
    let t = FirmShrinkage::new(params);
    let (xg, ug, _) = run_condat_vu_form2(
        &d,
        sigma,
        tau,
        |x| fid.gradient(x).unwrap(),
        |v| v.add_scaled(-sigma, &t.apply(&v.scaled(1.0 / sigma))),
        &DenseVector::zeros(n),
        &DenseVector::zeros(m),
        RunOptions::fixed(400),
        None,
    )
    .unwrap();
    assert!(xh.distance_sq(&xg).sqrt() <= 1e-12 * (1.0 + xg.norm()));
    assert!(uh.distance_sq(&ug).sqrt() <= 1e-12 * (1.0 + ug.norm()));
}

#[test]
fn huge_soft_threshold_forces_zero() {
    // φ = λ|·| with huge λ pins x̂ = 0; the dual then balances the data term: û = Aᵀy.
    let fid = small_fidelity(7);
    let l = LinearMap::identity(6).unwrap();
    let fid = Arc::new(
        QuadraticFidelity::with_companion(fid.matrix().clone(), fid.observation().clone(), &l)
            .unwrap(),
    );
    let t: Arc<dyn Denoiser> = Arc::new(SoftShrinkage::with_beta(1e9, 0.5).unwrap());
    let opts = RunOptions {
        max_iter: 200_000,
        stop_tol: 1e-13,
        ..RunOptions::default()
    };
    let cfg = PdConfig::derived(1.0, 0.9, l, fid.clone(), t, opts).unwrap();
    let (x, u, trace) =
        run_pd_molgrad(&cfg, &DenseVector::zeros(6), &DenseVector::zeros(6)).unwrap();
    assert_eq!(trace.stop_reason, StopReason::Converged);
    assert!(x.norm() <= 1e-8, "{x:?}");
    let aty = fid.matrix().tr_mul_vec(fid.observation()).unwrap();
    assert!(u.distance_sq(&aty).sqrt() <= 1e-8 * aty.norm());
}

#[test]
fn runs_are_deterministic() {
    let (cfg, n, m) = desk_pd(0, 2000);
    let a = run_pd_molgrad(&cfg, &DenseVector::zeros(n), &DenseVector::zeros(m)).unwrap();
    let b = run_pd_molgrad(&cfg, &DenseVector::zeros(n), &DenseVector::zeros(m)).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    assert!(a.2.same_path(&b.2));
}

#[test]
fn terminal_point_does_not_depend_on_lambda1() {
    let p = generate_problem(&ProblemSpec::desk(0)).unwrap();
    let d = p.difference().clone();
    let opts = RunOptions {
        max_iter: 100_000,
        stop_tol: 1e-13,
        ..RunOptions::default()
    };
    let solve = |l1: f64| {
        let cfg =
            PdConfig::derived(1.0, 0.9, d.clone(), p.fidelity(), firm(l1, 5.0), opts).unwrap();
        let (x, _, trace) = run_pd_molgrad(
            &cfg,
            &DenseVector::zeros(d.input_dim()),
            &DenseVector::zeros(d.output_dim()),
        )
        .unwrap();
        assert_eq!(trace.stop_reason, StopReason::Converged);
        x
    };
    let (a, b) = (solve(1.5), solve(2.5));
    assert!(common::relative_error(&a, &b) <= 1e-6);
}

#[test]
fn divergent_pd_run_is_reported() {
    // Declaring β ≥ 1 skips the dual bound; an expansive T then blows up.
    let fid = small_fidelity(8);
    let l = LinearMap::identity(6).unwrap();
    let fid = Arc::new(
        QuadraticFidelity::with_companion(fid.matrix().clone(), fid.observation().clone(), &l)
            .unwrap(),
    );
    let t: Arc<dyn Denoiser> = Arc::new(molgrad::denoiser::FnDenoiser::new("neg", 1.0, |x| {
        x.scaled(-50.0)
    }));
    let cfg = PdConfig::new(
        5.0,
        0.9 / (5.0 + fid.kappa_fhat.unwrap() / 2.0),
        l,
        fid,
        t,
        RunOptions::default(),
    )
    .unwrap();
    let r = run_pd_molgrad(
        &cfg,
        &DenseVector::new(vec![1.0; 6]).unwrap(),
        &DenseVector::zeros(6),
    );
    assert!(matches!(r, Err(Error::Divergence { .. })));
}
