use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use molgrad::csvio::{format_f64, read_matrix, read_vector, vector_to_csv};
use molgrad::denoiser::{
    catalog_denoiser, certify, CertifyOptions, Denoiser, DomainBox, TiedReluNetwork, Verdict,
    CATALOG,
};
use molgrad::experiments::{
    curve_file_name, generate_piecewise_signal, generate_problem, run_agreement_experiment,
    run_disagreement_experiment, run_sweep, AgreementConfig, DisagreementConfig, SweepConfig,
};
use molgrad::linalg::{
    difference_operator, norm_sq_upper_bound, DenseVector, LinearMap, QuadraticFidelity,
};
use molgrad::solvers::{
    derive_pd_params, run_fbs, run_pd_molgrad, FbsConfig, PdConfig, RunOptions,
};

use crate::config::{CliError, CliResult, ProblemConfig};
use crate::output::{gnuplot_script, Artifacts};

/// Output location and plotting choice; never recorded in the manifest.
pub struct Sink {
    pub dir: PathBuf,
    pub gnuplot: bool,
}

fn curve_csv(key: &str, value: &str, values: &[f64], keys: impl Iterator<Item = String>) -> String {
    let mut out = format!("{key},{value}\n");
    for (k, v) in keys.zip(values) {
        let _ = writeln!(out, "{k},{}", format_f64(*v));
    }
    out
}

fn iter_curve(values: &[f64]) -> String {
    curve_csv(
        "iter",
        "discrepancy",
        values,
        (0..values.len()).map(|k| k.to_string()),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiserConfig {
    pub name: String,
    pub lambda: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub beta: Option<f64>,
    pub dim: Option<usize>,
    pub group_size: Option<usize>,
    /// CSV weight matrix for `tied-relu`.
    pub weights: Option<PathBuf>,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self {
            name: "firm".into(),
            lambda: None,
            lambda1: Some(1.0),
            lambda2: Some(2.0),
            beta: None,
            dim: None,
            group_size: None,
            weights: None,
        }
    }
}

impl DenoiserConfig {
    fn soft(lambda: f64) -> Self {
        Self {
            name: "soft".into(),
            lambda: Some(lambda),
            lambda1: None,
            lambda2: None,
            ..Self::default()
        }
    }

    pub fn build(&self) -> CliResult<Arc<dyn Denoiser>> {
        if self.name == "tied-relu" {
            let path = self
                .weights
                .as_ref()
                .ok_or_else(|| CliError::Usage("tied-relu needs --weights <csv>".into()))?;
            return Ok(Arc::new(TiedReluNetwork::new(read_matrix(path)?)?));
        }
        if !CATALOG.contains(&self.name.as_str()) {
            return Err(CliError::Usage(format!(
                "unknown denoiser '{}', expected one of {CATALOG:?} or tied-relu",
                self.name
            )));
        }
        let mut params = BTreeMap::new();
        let entries = [
            ("lambda", self.lambda),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("beta", self.beta),
            ("dim", self.dim.map(|d| d as f64)),
            ("group_size", self.group_size.map(|g| g as f64)),
        ];
        for (k, v) in entries {
            if let Some(v) = v {
                params.insert(k.to_string(), v);
            }
        }
        Ok(Arc::from(catalog_denoiser(&self.name, &params)?))
    }
}

// ---------------------------------------------------------------- certify

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyConfig {
    pub seed: u64,
    pub denoiser: DenoiserConfig,
    pub n_pairs: usize,
    pub domain_lo: f64,
    pub domain_hi: f64,
    /// Sampling dimension; inferred from the denoiser when unset.
    pub domain_dim: Option<usize>,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            denoiser: DenoiserConfig::default(),
            n_pairs: 10_000,
            domain_lo: -10.0,
            domain_hi: 10.0,
            domain_dim: None,
        }
    }
}

pub fn certify_cmd(mut cfg: CertifyConfig, sink: &Sink) -> CliResult<()> {
    let t = cfg.denoiser.build()?;
    let dim = *cfg
        .domain_dim
        .get_or_insert(match (t.dim(), cfg.denoiser.name.as_str()) {
            (Some(d), _) => d,
            (None, "vector-firm") => 3,
            (None, _) => 1,
        });
    let mut opts = CertifyOptions::new(DomainBox::new(cfg.domain_lo, cfg.domain_hi, dim)?);
    opts.n_pairs = cfg.n_pairs;
    opts.seed = cfg.seed;
    let report = certify(t.as_ref(), &opts)?;
    let mut art = Artifacts::default();
    art.add_json(
        format!("certify-{}-{}.json", cfg.denoiser.name, cfg.seed),
        &report,
    );
    art.commit(&sink.dir, "certify", &cfg)?;
    println!(
        "{}",
        serde_json::to_string(&report).expect("report serializes")
    );
    match report.verdict {
        Verdict::Pass => Ok(()),
        Verdict::Fail => Err(CliError::Rejected),
    }
}

// ---------------------------------------------------------------- solvers

/// Data for the solve commands: CSV files, or a generated instance.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub a: Option<PathBuf>,
    pub y: Option<PathBuf>,
    pub problem: ProblemConfig,
}

impl DataConfig {
    fn settle(&mut self, paper_scale: bool) {
        if self.a.is_none() {
            self.problem.settle(paper_scale);
        }
    }

    fn load(
        &self,
        seed: u64,
        l: Option<&dyn Fn(usize) -> CliResult<LinearMap>>,
    ) -> CliResult<(QuadraticFidelity, Option<LinearMap>)> {
        let (a, y) = match (&self.a, &self.y) {
            (Some(a), Some(y)) => (read_matrix(a)?, read_vector(y)?),
            (None, None) => {
                let p = generate_problem(&self.problem.spec(seed))?;
                (p.a, p.y)
            }
            _ => return Err(CliError::Usage("give both --a and --y, or neither".into())),
        };
        match l {
            Some(make) => {
                let l = make(a.cols())?;
                Ok((QuadraticFidelity::with_companion(a, y, &l)?, Some(l)))
            }
            None => Ok((QuadraticFidelity::new(a, y)?, None)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveFbsConfig {
    pub seed: u64,
    pub paper_scale: bool,
    pub data: DataConfig,
    pub denoiser: DenoiserConfig,
    pub mu: f64,
    pub max_iter: usize,
    pub stop_tol: f64,
}

impl Default for SolveFbsConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            paper_scale: false,
            data: DataConfig::default(),
            denoiser: DenoiserConfig::soft(0.05),
            mu: 0.5,
            max_iter: 10_000,
            stop_tol: 1e-10,
        }
    }
}

fn solver_options(max_iter: usize, stop_tol: f64) -> RunOptions {
    RunOptions {
        max_iter,
        stop_tol,
        ..RunOptions::default()
    }
}

pub fn solve_fbs_cmd(mut cfg: SolveFbsConfig, sink: &Sink) -> CliResult<()> {
    cfg.data.settle(cfg.paper_scale);
    let (fid, _) = cfg.data.load(cfg.seed, None)?;
    let n = fid.dim();
    let t = cfg.denoiser.build()?;
    let fbs = FbsConfig::new(
        cfg.mu,
        t,
        Arc::new(fid),
        solver_options(cfg.max_iter, cfg.stop_tol),
    )?;
    let (x, trace) = run_fbs(&fbs, &DenseVector::zeros(n))?;
    let mut art = Artifacts::default();
    let trace_name = curve_file_name("solve-fbs", "trace", cfg.seed);
    art.add(trace_name.clone(), trace.to_csv());
    art.add(
        curve_file_name("solve-fbs", "x", cfg.seed),
        vector_to_csv(&x),
    );
    if sink.gnuplot {
        art.add(
            "solve-fbs.gp",
            gnuplot_script(
                "FBS residual",
                "iteration",
                "residual",
                true,
                &[(trace_name, "residual")],
            ),
        );
    }
    art.commit(&sink.dir, "solve-fbs", &cfg)?;
    println!(
        "{}",
        json!({"iterations": trace.iterations(), "stop_reason": trace.stop_reason, "final_residual": trace.final_residual()})
    );
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    Difference,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolvePdConfig {
    pub seed: u64,
    pub paper_scale: bool,
    pub data: DataConfig,
    pub operator: OperatorKind,
    pub denoiser: DenoiserConfig,
    pub sigma: Option<f64>,
    pub tau: Option<f64>,
    pub delta: f64,
    pub gamma: f64,
    pub max_iter: usize,
    pub stop_tol: f64,
}

impl Default for SolvePdConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            paper_scale: false,
            data: DataConfig::default(),
            operator: OperatorKind::Difference,
            denoiser: DenoiserConfig {
                lambda1: Some(2.5),
                lambda2: Some(5.0),
                ..DenoiserConfig::default()
            },
            sigma: None,
            tau: None,
            delta: 1.0,
            gamma: 0.9,
            max_iter: 10_000,
            stop_tol: 1e-10,
        }
    }
}

/// Builds the primal-dual configuration, filling in unset step sizes.
fn settle_pd(cfg: &mut SolvePdConfig) -> CliResult<PdConfig> {
    cfg.data.settle(cfg.paper_scale);
    let op = cfg.operator;
    let make = move |n: usize| -> CliResult<LinearMap> {
        Ok(match op {
            OperatorKind::Difference => difference_operator(n)?,
            OperatorKind::Identity => LinearMap::identity(n)?,
        })
    };
    let (fid, l) = cfg.data.load(cfg.seed, Some(&make))?;
    let l = l.expect("companion map requested");
    let t = cfg.denoiser.build()?;
    let l_norm_sq = norm_sq_upper_bound(&l);
    let kappa = fid.kappa_fhat.expect("computed with companion");
    let beta = t.beta();
    let sigma = match cfg.sigma {
        Some(s) => s,
        None => derive_pd_params(fid.rho, kappa, l_norm_sq, beta, cfg.delta, cfg.gamma)?.0,
    };
    let tau = *cfg
        .tau
        .get_or_insert(cfg.gamma / (sigma * l_norm_sq + kappa / 2.0));
    cfg.sigma = Some(sigma);
    Ok(PdConfig::new(
        sigma,
        tau,
        l,
        Arc::new(fid),
        t,
        solver_options(cfg.max_iter, cfg.stop_tol),
    )?)
}

pub fn solve_pd_cmd(mut cfg: SolvePdConfig, derive_only: bool, sink: &Sink) -> CliResult<()> {
    let pd = settle_pd(&mut cfg)?;
    if derive_only {
        println!("{}", json!({"sigma": pd.sigma(), "tau": pd.tau()}));
        return Ok(());
    }
    let x0 = DenseVector::zeros(pd.l().input_dim());
    let u0 = DenseVector::zeros(pd.l().output_dim());
    let (x, _, trace) = run_pd_molgrad(&pd, &x0, &u0)?;
    let mut art = Artifacts::default();
    let trace_name = curve_file_name("solve-pd", "trace", cfg.seed);
    art.add(trace_name.clone(), trace.to_csv());
    art.add(
        curve_file_name("solve-pd", "x", cfg.seed),
        vector_to_csv(&x),
    );
    if sink.gnuplot {
        art.add(
            "solve-pd.gp",
            gnuplot_script(
                "primal-dual residual",
                "iteration",
                "residual",
                true,
                &[(trace_name, "residual")],
            ),
        );
    }
    art.commit(&sink.dir, "solve-pd", &cfg)?;
    println!(
        "{}",
        json!({"iterations": trace.iterations(), "stop_reason": trace.stop_reason, "final_residual": trace.final_residual(), "sigma": pd.sigma(), "tau": pd.tau()})
    );
    Ok(())
}

// ------------------------------------------------------------ experiments

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: u64,
    pub paper_scale: bool,
    pub problem: ProblemConfig,
    pub agreement: AgreementConfig,
}

fn three_curves(
    art: &mut Artifacts,
    experiment: &str,
    seed: u64,
    curves: &molgrad::experiments::DiscrepancyCurves,
    gnuplot: bool,
    title: &str,
) {
    let mut series = Vec::new();
    for (branch, values, label) in [
        ("joint", &curves.joint, "x, u"),
        ("x", &curves.x, "x"),
        ("u", &curves.u, "u"),
    ] {
        let name = curve_file_name(experiment, branch, seed);
        art.add(name.clone(), iter_curve(values));
        series.push((name, label));
    }
    if gnuplot {
        art.add(
            format!("{experiment}.gp"),
            gnuplot_script(title, "iteration", "discrepancy", true, &series),
        );
    }
}

fn last(v: &[f64]) -> f64 {
    *v.last().expect("curves include the initial point")
}

pub fn verify_cmd(mut cfg: VerifyConfig, sink: &Sink) -> CliResult<()> {
    cfg.problem.settle(cfg.paper_scale);
    let p = generate_problem(&cfg.problem.spec(cfg.seed))?;
    let r = run_agreement_experiment(&p, &cfg.agreement)?;
    let fid = p.fidelity();
    let summary = json!({
        "final_joint_discrepancy": last(&r.curves.joint),
        "final_x_discrepancy": last(&r.curves.x),
        "final_u_discrepancy": last(&r.curves.u),
        "iterations": cfg.agreement.iters,
        "sigma": r.sigma,
        "tau": r.tau,
        "baseline_sigma": cfg.agreement.baseline_sigma,
        "baseline_tau": r.baseline_tau,
        "mc_weight": r.mc_weight,
        "rho": fid.rho,
        "kappa_fhat": fid.kappa_fhat,
        "noise_std": p.noise_std,
    });
    let mut art = Artifacts::default();
    three_curves(
        &mut art,
        "agreement",
        cfg.seed,
        &r.curves,
        sink.gnuplot,
        "agreement",
    );
    art.add_json(format!("agreement-summary-{}.json", cfg.seed), &summary);
    art.commit(&sink.dir, "verify-theorem3", &cfg)?;
    println!("{summary}");
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisagreeConfig {
    pub seed: u64,
    pub paper_scale: bool,
    pub problem: ProblemConfig,
    pub disagreement: DisagreementConfig,
}

pub fn disagree_cmd(mut cfg: DisagreeConfig, sink: &Sink) -> CliResult<()> {
    cfg.problem.settle(cfg.paper_scale);
    let p = generate_problem(&cfg.problem.spec(cfg.seed))?;
    let r = run_disagreement_experiment(&p, &cfg.disagreement)?;
    let summary = json!({
        "final_joint_discrepancy": last(&r.curves.joint),
        "final_x_discrepancy": last(&r.curves.x),
        "final_u_discrepancy": last(&r.curves.u),
        "iterations": cfg.disagreement.iters,
        "mu": r.mu,
        "tau": r.tau,
        "baseline_tau": r.baseline_tau,
        "noise_std": p.noise_std,
    });
    let mut art = Artifacts::default();
    three_curves(
        &mut art,
        "disagreement",
        cfg.seed,
        &r.curves,
        sink.gnuplot,
        "disagreement",
    );
    art.add_json(format!("disagreement-summary-{}.json", cfg.seed), &summary);
    art.commit(&sink.dir, "disagree", &cfg)?;
    println!("{summary}");
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepCmdConfig {
    pub seed: u64,
    pub paper_scale: bool,
    pub problem: ProblemConfig,
    pub trials: usize,
    pub lambda2_grid: Vec<f64>,
    pub firm_ratio: f64,
    pub mu_grid: Vec<f64>,
    pub gamma: f64,
    pub l1_sigma: f64,
    pub max_iter: usize,
    pub stop_tol: f64,
}

impl Default for SweepCmdConfig {
    fn default() -> Self {
        let d = SweepConfig::desk(0);
        Self {
            seed: 0,
            paper_scale: false,
            problem: ProblemConfig::default(),
            trials: d.n_trials,
            lambda2_grid: d.lambda2_grid,
            firm_ratio: d.firm_ratio,
            mu_grid: d.mu_grid,
            gamma: d.gamma,
            l1_sigma: d.l1_sigma,
            max_iter: d.max_iter,
            stop_tol: d.stop_tol,
        }
    }
}

fn param_curve(grid: &[f64], mean: &[f64]) -> String {
    curve_csv(
        "param",
        "mismatch",
        mean,
        grid.iter().map(|g| format_f64(*g)),
    )
}

pub fn sweep_cmd(mut cfg: SweepCmdConfig, sink: &Sink) -> CliResult<()> {
    cfg.problem.settle(cfg.paper_scale);
    let sweep = SweepConfig {
        problem: cfg.problem.spec(cfg.seed),
        n_trials: cfg.trials,
        lambda2_grid: cfg.lambda2_grid.clone(),
        firm_ratio: cfg.firm_ratio,
        mu_grid: cfg.mu_grid.clone(),
        gamma: cfg.gamma,
        l1_sigma: cfg.l1_sigma,
        max_iter: cfg.max_iter,
        stop_tol: cfg.stop_tol,
    };
    let out = run_sweep(&sweep)?;
    let (firm_at, best_firm) = out.firm.best();
    let (l1_at, best_l1) = out.l1.best();
    let summary = json!({
        "best_firm": best_firm,
        "best_firm_lambda2": firm_at,
        "best_l1": best_l1,
        "best_l1_mu": l1_at,
        "trials": cfg.trials,
        "firm_mean": out.firm.mean,
        "l1_mean": out.l1.mean,
    });
    let mut art = Artifacts::default();
    let firm_name = curve_file_name("sweep", "firm", cfg.seed);
    let l1_name = curve_file_name("sweep", "l1", cfg.seed);
    art.add(
        firm_name.clone(),
        param_curve(&out.firm.grid, &out.firm.mean),
    );
    art.add(l1_name.clone(), param_curve(&out.l1.grid, &out.l1.mean));
    art.add_json(format!("sweep-trials-{}.json", cfg.seed), &out);
    if sink.gnuplot {
        let mut s = gnuplot_script(
            "system mismatch",
            "lambda2 (firm) / mu (l1)",
            "mean system mismatch",
            true,
            &[(firm_name, "firm"), (l1_name, "l1")],
        );
        s.insert_str(0, "set logscale x\n");
        art.add("sweep.gp", s);
    }
    art.add_json(format!("sweep-summary-{}.json", cfg.seed), &summary);
    art.commit(&sink.dir, "sweep", &cfg)?;
    println!("{}", json!({"best_firm": best_firm, "best_l1": best_l1}));
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSignalConfig {
    pub seed: u64,
    pub paper_scale: bool,
    pub n: Option<usize>,
    pub pieces: usize,
    pub level_lo: f64,
    pub level_hi: f64,
}

impl Default for GenSignalConfig {
    fn default() -> Self {
        let p = ProblemConfig::default();
        Self {
            seed: 0,
            paper_scale: false,
            n: None,
            pieces: p.pieces,
            level_lo: p.level_lo,
            level_hi: p.level_hi,
        }
    }
}

pub fn gen_signal_cmd(mut cfg: GenSignalConfig, sink: &Sink) -> CliResult<()> {
    let n = *cfg.n.get_or_insert(if cfg.paper_scale { 256 } else { 64 });
    let x = generate_piecewise_signal(n, cfg.pieces, (cfg.level_lo, cfg.level_hi), cfg.seed)?;
    let mut art = Artifacts::default();
    let name = curve_file_name("gen-signal", "x_true", cfg.seed);
    art.add(name, vector_to_csv(&x));
    art.commit(&sink.dir, "gen-signal", &cfg)?;
    Ok(())
}
