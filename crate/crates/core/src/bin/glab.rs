use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use glab::bm::{bm_lower_certified, bm_upper_search, CertifyOptions, PolytopeModel};
use glab::estimators::{volume_exact_lowdim, volume_mc, Body};
use glab::experiments::{run_experiment, verify_suite, ExperimentConfig, VerifyLevel, VerifyOptions};
use glab::io::{load_operator, load_vpolytope, sample_set_to_csv, save_vpolytope};
use glab::operators::{op_norm_polytopes, operator_ball_volume_check, LinearMap};
use glab::oracles::opnorm_sphere_oracle;
use glab::polytope::{minkowski_norm, support_function};
use glab::sampling::{sample, DistributionSpec, Family};
use glab::{GlabError, Result, RngSeed, VPolytope};

#[derive(Parser)]
#[command(name = "glab", version, about = "Random polytope norms, operator norms, volumes and Banach-Mazur bounds")]
struct Cli {
    /// Root seed; falls back to GLAB_SEED, then 0.
    #[arg(long, global = true, env = "GLAB_SEED")]
    seed: Option<u64>,
    /// Directory for report.json and CSV tables.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Upper bound on worker threads; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Pure,
    BasisEnriched,
}

impl From<Model> for PolytopeModel {
    fn from(m: Model) -> Self {
        match m {
            Model::Pure => PolytopeModel::Pure,
            Model::BasisEnriched => PolytopeModel::BasisEnriched,
        }
    }
}

#[derive(Args)]
struct SampleArgs {
    /// gaussian, cube_uniform, product_exponential or ball_uniform.
    #[arg(long, default_value = "gaussian")]
    family: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Draw an isotropic sample.
    Sample(SampleArgs),
    /// Build a random polytope and save its generators.
    Build {
        #[arg(long, value_enum, default_value = "pure")]
        model: Model,
        #[command(flatten)]
        sample: SampleArgs,
    },
    /// Minkowski norm and support value of a point.
    Norm {
        /// `cross:N`, `cube:N`, `polygon:K` or a saved generator CSV.
        #[arg(long)]
        body: String,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
    /// Exact operator norm between two polytope norms.
    Opnorm {
        /// Matrix CSV file, or rows as `a,b;c,d`.
        #[arg(long, allow_hyphen_values = true)]
        map: String,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        /// Also run the sampled lower-bound oracle with this many directions.
        #[arg(long)]
        oracle_directions: Option<usize>,
    },
    /// Monte Carlo volume of a body, or of its operator ball.
    Volume {
        #[arg(long)]
        body: String,
        #[arg(long, default_value_t = 200_000)]
        trials: usize,
        /// Estimate vol(V_B) = vol{T : T e_i ∈ B} instead.
        #[arg(long)]
        operator_ball: bool,
    },
    /// Banach-Mazur distance bounds between two bodies.
    Bm {
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long, default_value_t = 6)]
        restarts: usize,
        #[arg(long, default_value_t = 400)]
        steps: usize,
        /// Add the certified lower bound (planar bodies only).
        #[arg(long)]
        certify: bool,
    },
    /// Configuration-driven experiments.
    Experiment {
        #[command(subcommand)]
        action: ExperimentAction,
    },
    /// Run the invariant battery.
    Verify {
        #[arg(long, conflicts_with = "full")]
        quick: bool,
        #[arg(long)]
        full: bool,
        /// Overrides the LP optimality tolerance; for fault-injection runs.
        #[arg(long, hide = true)]
        lp_optimality_tol: Option<f64>,
    },
}

#[derive(Subcommand)]
enum ExperimentAction {
    /// Run an experiment described by a JSON config.
    Run { config: PathBuf },
}

fn parse_vector(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| GlabError::Usage(format!("bad number `{t}`: {e}"))))
        .collect()
}

fn parse_body(s: &str) -> Result<VPolytope> {
    let named = |prefix: &str| s.strip_prefix(prefix).map(|k| k.parse::<usize>());
    let bad = |e: std::num::ParseIntError| GlabError::Usage(format!("bad body `{s}`: {e}"));
    if let Some(k) = named("cross:") {
        return Ok(VPolytope::cross_polytope(k.map_err(bad)?));
    }
    if let Some(k) = named("cube:") {
        return Ok(VPolytope::cube(k.map_err(bad)?));
    }
    if let Some(k) = named("polygon:") {
        return VPolytope::regular_polygon(k.map_err(bad)?);
    }
    load_vpolytope(Path::new(s))
}

fn parse_map(s: &str) -> Result<LinearMap> {
    if Path::new(s).exists() {
        return load_operator(Path::new(s));
    }
    let rows = s.split(';').map(parse_vector).collect::<Result<Vec<_>>>()?;
    LinearMap::from_rows(&rows)
}

fn parse_family(name: &str) -> Result<Family> {
    Family::builtin(name).ok_or_else(|| GlabError::Usage(format!("unknown family `{name}`")))
}

fn emit(out: &Path, report: &Value) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let text = serde_json::to_string_pretty(report).map_err(|e| GlabError::Io(e.to_string()))?;
    std::fs::write(out.join("report.json"), text.clone() + "\n")?;
    println!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    if let Some(w) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global()
            .map_err(|e| GlabError::Usage(e.to_string()))?;
    }
    let seed = RngSeed::new(cli.seed.unwrap_or(0));
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("glab-out"));
    match cli.command {
        Command::Sample(a) => {
            let s = sample(&DistributionSpec::new(parse_family(&a.family)?, a.n), a.m, seed)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("samples.csv"), sample_set_to_csv(&s))?;
            emit(&out, &json!({"command": "sample", "seed": seed, "n": s.n, "m": s.m, "family": s.family, "artifacts": ["samples.csv"]}))?;
        }
        Command::Build { model, sample: a } => {
            let spec = DistributionSpec::new(parse_family(&a.family)?, a.n);
            let model: PolytopeModel = model.into();
            let p = model.build(&spec, a.m, seed)?;
            std::fs::create_dir_all(&out)?;
            save_vpolytope(&p, &out.join("polytope.csv"))?;
            emit(
                &out,
                &json!({
                    "command": "build", "seed": seed, "model": model, "n": p.n,
                    "generators": p.num_generators(), "full_dimensional": p.full_dimensional,
                    "circumradius": p.circumradius(), "artifacts": ["polytope.csv", "polytope.json"],
                }),
            )?;
        }
        Command::Norm { body, point } => {
            let p = parse_body(&body)?;
            let z = parse_vector(&point)?;
            if z.len() != p.n {
                return Err(GlabError::Usage(format!("point has {} coordinates, body has dimension {}", z.len(), p.n)));
            }
            let norm = minkowski_norm(&p, &z)?;
            emit(&out, &json!({"command": "norm", "body": p.label, "point": z, "norm": norm, "support": support_function(&p, &z)}))?;
        }
        Command::Opnorm { map, from, to, oracle_directions } => {
            let (t, a, b) = (parse_map(&map)?, parse_body(&from)?, parse_body(&to)?);
            let exact = op_norm_polytopes(&t, &a, &b)?;
            let oracle = match oracle_directions {
                Some(d) => Some(opnorm_sphere_oracle(&t, &a, &b, d, seed)?.value),
                None => None,
            };
            emit(&out, &json!({"command": "opnorm", "seed": seed, "norm": exact, "oracle_lower": oracle}))?;
        }
        Command::Volume { body, trials, operator_ball } => {
            let p = parse_body(&body)?;
            let report = if operator_ball {
                let r = operator_ball_volume_check(&p, trials, seed)?;
                json!({"command": "volume", "operator_ball": true, "report": r})
            } else {
                let est = volume_mc(Body::V(&p), p.circumradius(), trials, seed)?;
                let exact = if p.n <= 3 { Some(volume_exact_lowdim(&p)?) } else { None };
                json!({"command": "volume", "operator_ball": false, "estimate": est, "exact": exact})
            };
            emit(&out, &report)?;
        }
        Command::Bm { x, y, restarts, steps, certify } => {
            let (x, y) = (parse_body(&x)?, parse_body(&y)?);
            let mut est = bm_upper_search(&x, &y, restarts, steps, seed)?;
            if certify {
                let opts = CertifyOptions { upper_hint: Some(est.upper), ..CertifyOptions::default() };
                est = est.with_lower(&bm_lower_certified(&x, &y, &opts, seed.derive(1))?);
            }
            emit(&out, &json!({"command": "bm", "seed": seed, "estimate": est}))?;
        }
        Command::Experiment { action: ExperimentAction::Run { config } } => {
            let mut c = ExperimentConfig::load(&config)?;
            if cli.out.is_some() || c.output_dir.is_none() {
                c.output_dir = Some(out.clone());
            }
            if let Some(s) = cli.seed {
                c.seed = RngSeed::new(s);
            }
            let report = run_experiment(&c)?;
            for b in &report.bands {
                println!("[{}] {} = {}", if b.pass { "PASS" } else { "FAIL" }, b.metric, b.value);
            }
            println!("artifacts in {}: {}", c.output_dir.as_ref().map_or(String::new(), |p| p.display().to_string()), report.artifacts.join(", "));
            return Ok(report.exit_code());
        }
        Command::Verify { quick: _, full, lp_optimality_tol } => {
            let level = if full { VerifyLevel::Full } else { VerifyLevel::Quick };
            let mut opts = VerifyOptions::new(level, seed);
            if let Some(tol) = lp_optimality_tol {
                opts.lp.optimality_tol = tol;
            }
            let summary = verify_suite(&opts);
            summary.write(&out)?;
            print!("{}", summary.checklist());
            return Ok(summary.exit_code());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
