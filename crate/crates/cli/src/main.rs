//! `molgrad`: certify denoisers, run the solvers and reproduce the studies.
//!
//! Exit codes: 0 success, 1 I/O failure or failed certification, 2 invalid
//! input or parameters, 3 step-size condition violated, 4 divergence.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Sink;
use config::{output_dir, resolve, CliResult, Overrides};

#[derive(Parser)]
#[command(
    name = "molgrad",
    version,
    about = "Monotone Lipschitz-gradient denoisers and primal-dual solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file; a manifest from an earlier run also works.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; falls back to $MOLGRAD_OUT, then ".".
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Also write gnuplot scripts next to the CSV files.
    #[arg(long, global = true)]
    gnuplot: bool,
}

#[derive(Args, Default)]
struct DenoiserArgs {
    /// soft, firm, garrote, vector-firm, group-firm or tied-relu.
    #[arg(long)]
    denoiser: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    group_size: Option<usize>,
    #[arg(long)]
    weights: Option<PathBuf>,
}

impl DenoiserArgs {
    fn apply(self, o: &mut Overrides) {
        o.set("denoiser.name", self.denoiser)
            .set("denoiser.lambda", self.lambda)
            .set("denoiser.lambda1", self.lambda1)
            .set("denoiser.lambda2", self.lambda2)
            .set("denoiser.beta", self.beta)
            .set("denoiser.dim", self.dim)
            .set("denoiser.group_size", self.group_size)
            .set("denoiser.weights", self.weights);
    }
}

#[derive(Args)]
struct ProblemArgs {
    /// Use the larger problem size (n = 256, m = 1024).
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    noise_std: Option<f64>,
}

impl ProblemArgs {
    fn apply(self, o: &mut Overrides, prefix: &str) {
        o.flag("paper_scale", self.paper_scale)
            .set(&format!("{prefix}problem.n"), self.n)
            .set(&format!("{prefix}problem.m"), self.m)
            .set(&format!("{prefix}problem.noise_std"), self.noise_std);
    }
}

#[derive(Args)]
struct DataArgs {
    /// Forward matrix as CSV; requires --y.
    #[arg(long)]
    a: Option<PathBuf>,
    /// Observation vector as CSV; requires --a.
    #[arg(long)]
    y: Option<PathBuf>,
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    stop_tol: Option<f64>,
}

impl DataArgs {
    fn apply(self, o: &mut Overrides) {
        o.set("data.a", self.a)
            .set("data.y", self.y)
            .set("max_iter", self.max_iter)
            .set("stop_tol", self.stop_tol);
        self.problem.apply(o, "data.");
    }
}

#[derive(Subcommand)]
enum Command {
    /// Empirically certify that a denoiser is a MoL-Grad operator.
    Certify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        denoiser: DenoiserArgs,
        #[arg(long)]
        n_pairs: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        domain_lo: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        domain_hi: Option<f64>,
        #[arg(long)]
        domain_dim: Option<usize>,
    },
    /// Forward-backward splitting with a MoL-Grad denoiser.
    SolveFbs {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        denoiser: DenoiserArgs,
        #[arg(long)]
        mu: Option<f64>,
    },
    /// Primal-dual MoL-Grad solver.
    SolvePd {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        denoiser: DenoiserArgs,
        /// difference or identity.
        #[arg(long)]
        operator: Option<String>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        /// Print the derived (sigma, tau) and exit without solving.
        #[arg(long)]
        derive_params: bool,
    },
    /// Compare the primal-dual solver with Condat-Vu on the rewritten objective.
    #[command(name = "verify-theorem3")]
    VerifyTheorem3 {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        lambda1: Option<f64>,
        #[arg(long)]
        lambda2: Option<f64>,
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Compare the firm-substituted heuristic with Condat-Vu.
    Disagree {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        lambda2: Option<f64>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        /// recompute or keep-modified.
        #[arg(long)]
        tau_mode: Option<String>,
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Parameter sweep: firm MoL-Grad against the l1 baseline.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Write a piecewise-constant test signal.
    GenSignal {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        paper_scale: bool,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        pieces: Option<usize>,
    },
}

fn sink(common: &Common) -> Sink {
    Sink {
        dir: output_dir(common.output_dir.clone()),
        gnuplot: common.gnuplot,
    }
}

fn base(common: &Common) -> Overrides {
    let mut o = Overrides::default();
    o.set("seed", common.seed);
    o
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Certify {
            common,
            denoiser,
            n_pairs,
            domain_lo,
            domain_hi,
            domain_dim,
        } => {
            let mut o = base(&common);
            denoiser.apply(&mut o);
            o.set("n_pairs", n_pairs)
                .set("domain_lo", domain_lo)
                .set("domain_hi", domain_hi)
                .set("domain_dim", domain_dim);
            let cfg = resolve("certify", common.config.as_deref(), o)?;
            commands::certify_cmd(cfg, &sink(&common))
        }
        Command::SolveFbs {
            common,
            data,
            denoiser,
            mu,
        } => {
            let mut o = base(&common);
            data.apply(&mut o);
            denoiser.apply(&mut o);
            o.set("mu", mu);
            let cfg = resolve("solve-fbs", common.config.as_deref(), o)?;
            commands::solve_fbs_cmd(cfg, &sink(&common))
        }
        Command::SolvePd {
            common,
            data,
            denoiser,
            operator,
            sigma,
            tau,
            delta,
            gamma,
            derive_params,
        } => {
            let mut o = base(&common);
            data.apply(&mut o);
            denoiser.apply(&mut o);
            o.set("operator", operator)
                .set("sigma", sigma)
                .set("tau", tau)
                .set("delta", delta)
                .set("gamma", gamma);
            let cfg = resolve("solve-pd", common.config.as_deref(), o)?;
            commands::solve_pd_cmd(cfg, derive_params, &sink(&common))
        }
        Command::VerifyTheorem3 {
            common,
            problem,
            lambda1,
            lambda2,
            iters,
        } => {
            let mut o = base(&common);
            problem.apply(&mut o, "");
            o.set("agreement.lambda1", lambda1)
                .set("agreement.lambda2", lambda2)
                .set("agreement.iters", iters);
            let cfg = resolve("verify-theorem3", common.config.as_deref(), o)?;
            commands::verify_cmd(cfg, &sink(&common))
        }
        Command::Disagree {
            common,
            problem,
            lambda2,
            mu,
            sigma,
            tau_mode,
            iters,
        } => {
            let mut o = base(&common);
            problem.apply(&mut o, "");
            o.set("disagreement.lambda2", lambda2)
                .set("disagreement.mu", mu)
                .set("disagreement.sigma", sigma)
                .set("disagreement.tau_mode", tau_mode)
                .set("disagreement.iters", iters);
            let cfg = resolve("disagree", common.config.as_deref(), o)?;
            commands::disagree_cmd(cfg, &sink(&common))
        }
        Command::Sweep {
            common,
            problem,
            trials,
            max_iter,
        } => {
            let mut o = base(&common);
            problem.apply(&mut o, "");
            o.set("trials", trials).set("max_iter", max_iter);
            let cfg = resolve("sweep", common.config.as_deref(), o)?;
            commands::sweep_cmd(cfg, &sink(&common))
        }
        Command::GenSignal {
            common,
            paper_scale,
            n,
            pieces,
        } => {
            let mut o = base(&common);
            o.flag("paper_scale", paper_scale)
                .set("n", n)
                .set("pieces", pieces);
            let cfg = resolve("gen-signal", common.config.as_deref(), o)?;
            commands::gen_signal_cmd(cfg, &sink(&common))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("molgrad: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
