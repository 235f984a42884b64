//! Command-line driver: build and verify adversarial pairs, run scaling
//! sweeps, audit the separation inequalities, certify bumps, and re-fit
//! exponents from existing CSV output.
//!
//! Exit codes: 0 pass, 1 acceptance failure, 2 configuration error,
//! 3 internal assertion.

use clap::{Args, Parser, Subcommand};
use ivplab::bump::{h_integral, h_max, CertifyOptions, ParallelepipedBump, PrefactorTable};
use ivplab::error::Error;
use ivplab::fooling::{resolve_problem, Adversary};
use ivplab::harness::{
    audit_inequalities, build_info_operator, build_pair, measure_separation, refit_csv,
    residual_report, run_sweep, ExperimentConfig, Variant,
};
use ivplab::info::uniform_grid;
use rand::rngs::StdRng;
use rand::SeedableRng;
use std::fs;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ivplab", about = "Worst-case laboratory for initial-value problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML sweep configuration; overrides the per-variant defaults
    #[arg(long)]
    config: Option<String>,
    /// Experiment variant (thm1 | thm2i | thm2ii | d1 | solver-adaptive | solver-nonadaptive)
    #[arg(long)]
    variant: Option<String>,
    /// State-space dimension
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Class smoothness r
    #[arg(long, default_value_t = 1)]
    smoothness: usize,
    /// Seed for randomized atom placement
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress everything but the verdict
    #[arg(long)]
    quiet: bool,
}

impl ConfigArgs {
    fn build(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_toml_str(&fs::read_to_string(path)?)?,
            None => {
                let variant = Variant::parse(self.variant.as_deref().ok_or_else(|| {
                    Error::Config("pass --config or --variant".into())
                })?)?;
                let dim = if variant == Variant::D1 { 1 } else { self.dim };
                ExperimentConfig::default_for(variant, dim, self.smoothness)
            }
        };
        if let Some(v) = &self.variant {
            cfg.variant = Variant::parse(v)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build one fooling pair against its information operator and verify the
    /// information match; optionally write the serialized pair.
    Adversary {
        #[command(flatten)]
        common: ConfigArgs,
        /// Information budget
        #[arg(short, long, default_value_t = 64)]
        n: usize,
        /// Write the serialized pair here
        #[arg(long)]
        out: Option<String>,
        /// Write the serialized information operator here
        #[arg(long)]
        info_out: Option<String>,
    },
    /// Run a separation or solver sweep and emit the CSV record.
    Sweep {
        #[command(flatten)]
        common: ConfigArgs,
        /// CSV output path (stdout when absent)
        #[arg(long)]
        out: Option<String>,
        /// Record wall-clock seconds (breaks byte-for-byte reproducibility)
        #[arg(long)]
        timing: bool,
    },
    /// Audit the separation inequalities on one standard-information pair.
    Audit {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(short, long, default_value_t = 64)]
        n: usize,
    },
    /// Certify a cell bump and re-check it on the finer grid; print the
    /// mollifier constants.
    VerifyBump {
        #[command(flatten)]
        common: ConfigArgs,
        /// Derivative bound D to certify against
        #[arg(long, default_value_t = 1.0)]
        bound: f64,
    },
    /// Re-fit the scaling exponent from an existing sweep CSV.
    Report {
        /// CSV produced by `ivplab sweep`
        #[arg(long)]
        input: String,
        /// Trailing fraction of the rows used in the fit
        #[arg(long, default_value_t = 0.5)]
        fit_fraction: f64,
        /// Slope tolerance for the verdict
        #[arg(long, default_value_t = 0.3)]
        tol: f64,
        /// Theoretical slope; defaults to the value recorded in the CSV trailer
        #[arg(long)]
        theory: Option<f64>,
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Adversary {
            common,
            n,
            out,
            info_out,
        } => {
            let cfg = common.build()?;
            if cfg.variant.is_solver() {
                return Err(Error::Config(
                    "adversary takes thm1 | thm2i | thm2ii | d1".into(),
                ));
            }
            let (spec, profile) = resolve_problem(&cfg.problem_params())?;
            let mut rng = StdRng::seed_from_u64(cfg.seed);
            let op = build_info_operator(&cfg, &spec, n, &mut rng)?;
            let (pair, counts) = build_pair(&cfg, &spec, &profile, &op, n)?;
            let report = residual_report(&pair, &op)?;
            let pass = report.max_standard == 0.0 && report.max_linear_rel <= 1e-10;
            if !common.quiet {
                println!(
                    "variant={} n={} atoms={} functionals={}",
                    cfg.variant.name(),
                    n,
                    op.split().0,
                    op.split().1
                );
                println!(
                    "standard residual max = {:e}; linear residual max = {:e} of scale",
                    report.max_standard, report.max_linear_rel
                );
                if let Some(c) = counts {
                    println!(
                        "eliminated cells = {}, excluded parallelepipeds = {}, survivors = {}",
                        c.eliminated_cells, c.excluded_parallelepipeds, c.survivors
                    );
                }
                println!(
                    "chosen index = {}, unit-coefficient cells = {}, amplitude = {}",
                    pair.k_star,
                    pair.ones.len(),
                    pair.amplitude_star
                );
            }
            if let Some(path) = out {
                fs::write(&path, pair.to_json())?;
                if !common.quiet {
                    println!("pair written to {path}");
                }
            }
            if let Some(path) = info_out {
                fs::write(&path, op.to_json())?;
                if !common.quiet {
                    println!("information operator written to {path}");
                }
            }
            println!("verdict: {}", if pass { "PASS" } else { "FAIL" });
            Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }

        Command::Sweep {
            common,
            out,
            timing,
        } => {
            let mut cfg = common.build()?;
            cfg.timing |= timing;
            let run = run_sweep(&cfg)?;
            let csv = run.to_csv();
            match out {
                Some(path) => {
                    fs::write(&path, &csv)?;
                    if !common.quiet {
                        println!("csv written to {path}");
                    }
                }
                None => print!("{csv}"),
            }
            if !common.quiet {
                println!(
                    "slope = {:.4} (theory {:.4}, tolerance {:.2}), stderr = {:.4}",
                    run.fit.slope, run.theory, run.slope_tol, run.fit.stderr
                );
            }
            println!("verdict: {}", if run.passed() { "PASS" } else { "FAIL" });
            Ok(if run.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }

        Command::Audit { common, n } => {
            let mut cfg = common.build()?;
            cfg.variant = Variant::Thm1;
            let (spec, profile) = resolve_problem(&cfg.problem_params())?;
            let mut rng = StdRng::seed_from_u64(cfg.seed);
            let op = build_info_operator(&cfg, &spec, n, &mut rng)?;
            let (pair, _) = build_pair(&cfg, &spec, &profile, &op, n)?;
            let (measured, tol) = measure_separation(&pair, cfg.ref_tol, cfg.sup_samples)?;
            let audit = audit_inequalities(&pair, measured, cfg.quad_rel_tol)?;
            if !common.quiet {
                println!("measured sup distance   = {:e} (reference tol {:e})", measured, tol);
                println!("witness (measured / 2)  = {:e}", measured / 2.0);
                println!("line integral (quad)    = {:e}", audit.quadrature);
                println!("line integral (closed)  = {:e}", audit.closed_form);
                println!(
                    "closed-form rel err     = {:e} (tol {:e}) -> {}",
                    audit.closed_form_rel_err,
                    cfg.quad_rel_tol,
                    if audit.closed_form_ok { "ok" } else { "VIOLATED" }
                );
                println!(
                    "bound 1/(1+L(b-a))      = {:e} -> {}",
                    audit.lower_bound_full,
                    if audit.integral_bound_ok { "ok" } else { "VIOLATED" }
                );
                println!(
                    "bound 1/(2+L(t2-t1))    = {:e} -> {}",
                    audit.lower_bound_window,
                    if audit.window_bound_ok { "ok" } else { "VIOLATED" }
                );
            }
            println!("verdict: {}", if audit.passed() { "PASS" } else { "FAIL" });
            Ok(if audit.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }

        Command::VerifyBump { common, bound } => {
            let mut cfg = common.build()?;
            cfg.variant = Variant::Thm1;
            cfg.bound = bound;
            let (spec, profile) = resolve_problem(&cfg.problem_params())?;
            let op = uniform_grid(&spec, 64, ivplab::info::GridComponents::First);
            let (pair, _) = build_pair(&cfg, &spec, &profile, &op, 64)?;
            let bump = match &pair.adversary {
                Adversary::Grid(h) => h.bumps[h.grid.flat_index(pair.k_star, 0)].clone(),
                Adversary::Train(t) => t.bumps[0].clone(),
            };
            let opts = CertifyOptions::default();
            let recert =
                ParallelepipedBump::certify(bump.support().clone(), cfg.smoothness, bound, &opts)?;
            let idempotent = recert.amplitude() == bump.amplitude();
            let (sup_value, sup_deriv) = bump.sampled_sups(65, 1e-3)?;
            let recheck = sup_value <= bound / 2.0 * (1.0 + 1e-9) && sup_deriv <= bound;
            if !common.quiet {
                let table = PrefactorTable::new(cfg.smoothness + 2);
                println!("mollifier max h(1/2)    = {:e}", h_max());
                println!("mollifier integral      = {:e}", h_integral());
                for k in 1..=cfg.smoothness + 2 {
                    println!(
                        "sup |h^({k})|            = {:e}",
                        table.sup_abs_derivative(k)?
                    );
                }
                println!("certified amplitude     = {:e}", bump.amplitude());
                println!("re-certification        = {}", if idempotent { "identical" } else { "DRIFTED" });
                println!(
                    "finer-grid recheck      = sup {:e} (cap {:e}), derivatives {:e} (cap {:e})",
                    sup_value,
                    bound / 2.0,
                    sup_deriv,
                    bound
                );
            }
            let pass = idempotent && recheck;
            println!("verdict: {}", if pass { "PASS" } else { "FAIL" });
            Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }

        Command::Report {
            input,
            fit_fraction,
            tol,
            theory,
            quiet,
        } => {
            let text = fs::read_to_string(&input)?;
            let fit = refit_csv(&text, fit_fraction)?;
            let theory = theory.or_else(|| parse_trailer_theory(&text));
            if !quiet {
                println!(
                    "refit: slope = {:.6}, stderr = {:.6}, intercept = {:.6}",
                    fit.slope, fit.stderr, fit.intercept
                );
            }
            match theory {
                Some(t) => {
                    let pass = (fit.slope - t).abs() <= tol;
                    if !quiet {
                        println!("theory = {t}, tolerance = {tol}");
                    }
                    println!("verdict: {}", if pass { "PASS" } else { "FAIL" });
                    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
                }
                None => {
                    println!("verdict: PASS");
                    Ok(ExitCode::SUCCESS)
                }
            }
        }
    }
}

fn parse_trailer_theory(text: &str) -> Option<f64> {
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# slope=") {
            for token in rest.split_whitespace() {
                if let Some(v) = token.strip_prefix("theory=") {
                    return v.parse().ok();
                }
            }
        }
    }
    None
}
