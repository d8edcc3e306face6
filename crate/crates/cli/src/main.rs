mod input;
mod report;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ortho_core::borsuk::{find_orthogonal_unit, BorsukConfig};
use ortho_core::counterexample::{
    build_e_from_g, certify_no_orthogonal_subspace, counterexample_exponent, q1_demo, rank_lemma_check,
    CertifyConfig, Counterexample, Q1Config,
};
use ortho_core::normal_span::{badness_sweep, classify, NormalSpanConfig};
use ortho_core::projection::{
    metric_project, orthogonality_residual, subspace_ortho_defect, DefectConfig, DEFECT_SLACK,
};
use ortho_core::{Error, GammaParam, Space, Subspace};
use serde_json::{json, Value};

use report::{Body, Failure};

#[derive(Parser)]
#[command(name = "ortho-lab", version, about = "Orthogonality experiments in finite-dimensional l^p spaces")]
#[command(after_help = "Exit codes: 0 success, 2 solver did not converge, 3 invalid input.\n\
Matrices are read from a file path or given inline, as whitespace/comma separated rows or a JSON array of rows.\n\
Subspaces are given by a matrix whose rows span them, or by a JSON object {\"N\", \"k\", \"basis\"}.\n\
CSV columns: badness --sweep: trial,seed,rank,is_bad; certify: start_id,seed,value,iterations; \
bookkeeping: m,k,p.")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Exponent of the space (default 3; certify --random-g uses the construction's exponent)
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Ambient dimension
    #[arg(long = "N", global = true)]
    n: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Tolerance: residual for borsuk and ortho-test, relative rank cutoff for badness, q1 and rank-lemma
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Sample count (badness: points on L ∩ S; q1 and rank-lemma: sampled polynomials)
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Starts (certify: random starts; borsuk: restarts)
    #[arg(long, global = true)]
    starts: Option<usize>,
    /// Worker threads; results do not depend on it
    #[arg(long, global = true, env = "ORTHO_LAB_THREADS")]
    threads: Option<usize>,
    /// Write the report here instead of standard output
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Metric projection of a vector onto a subspace
    Project(ProjectArgs),
    /// Distance from a vector to a subspace
    Distance(ProjectArgs),
    /// Orthogonality of a vector or subspace to E, and its defect
    OrthoTest(OrthoTestArgs),
    /// Dimension of the span of sphere normals along a section, and the good/bad verdict
    Badness(BadnessArgs),
    /// Search for a k-dimensional subspace orthogonal to E = ker g
    Certify(CertifyArgs),
    /// Unit vector of F orthogonal to E
    Borsuk(BorsukArgs),
    /// Discretized L^3(0,1) pair with no orthogonal subspace
    Q1(Q1Args),
    /// Rank of the norming functionals of sampled polynomials against n + n/2 - 1/2
    RankLemma(Q1Args),
    /// Exponent of the counterexample space for (m, k)
    Bookkeeping(BookkeepingArgs),
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long)]
    v: String,
    #[arg(long = "L")]
    l: String,
}

#[derive(Args)]
struct OrthoTestArgs {
    #[arg(long, conflicts_with = "k", required_unless_present = "k")]
    v: Option<String>,
    #[arg(long = "K")]
    k: Option<String>,
    #[arg(long = "E")]
    e: String,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
}

#[derive(Args)]
struct BadnessArgs {
    /// (N-2) x 2 matrix of coefficients for x_k = g_k1 x_1 + g_k2 x_2
    #[arg(long, conflicts_with_all = ["random", "coordinate"])]
    gamma: Option<String>,
    /// Random 2-plane (or k-plane) of R^N
    #[arg(long, num_args = 2, value_names = ["N", "K"], conflicts_with = "coordinate")]
    random: Option<Vec<usize>>,
    /// Coordinate plane span{e_i, e_j}, 1-based
    #[arg(long, num_args = 2, value_names = ["I", "J"])]
    coordinate: Option<Vec<usize>>,
    #[arg(long)]
    threshold: Option<usize>,
    /// Classify this many random planes (needs --random) and emit a table
    #[arg(long, requires = "random")]
    sweep: Option<usize>,
}

#[derive(Args)]
struct CertifyArgs {
    /// Subspace g of functionals; E = ker g
    #[arg(long, conflicts_with = "random_g", required_unless_present = "random_g")]
    g: Option<String>,
    /// Draw g in G(m, N) away from coordinate planes (N defaults to 2m)
    #[arg(long = "random-g")]
    random_g: Option<usize>,
    #[arg(long)]
    k: usize,
    /// Random starts (same as --starts)
    #[arg(long)]
    budget: Option<usize>,
    /// Also write the per-start table to this file
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BorsukArgs {
    #[arg(long = "E")]
    e: String,
    #[arg(long = "F")]
    f: String,
}

#[derive(Args)]
struct Q1Args {
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Grid size M (a multiple of 16, at least 1024)
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args)]
struct BookkeepingArgs {
    #[arg(long, requires = "k")]
    m: Option<usize>,
    #[arg(long, requires = "m")]
    k: Option<usize>,
    /// Table of all 1 < k <= m <= m_max when (m, k) is not given
    #[arg(long, default_value_t = 8)]
    m_max: usize,
}

struct Outcome {
    config: Value,
    result: Value,
    csv: Option<String>,
}

type Run = Result<Outcome, Failure>;

fn to_value<T: serde::Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("report values serialize")
}

fn p_or(g: &Global, default: f64) -> f64 {
    g.p.unwrap_or(default)
}

fn project(g: &Global, a: &ProjectArgs, distance_only: bool) -> Run {
    let v = input::vector(&a.v)?;
    let l = input::subspace(&a.l)?;
    let n = g.n.unwrap_or(v.len());
    input::require_dim("v", v.len(), n)?;
    input::require_dim("L", l.ambient_dim(), n)?;
    let p = p_or(g, 3.0);
    let space = Space::finite(n, p)?;
    let res = metric_project(&space, &v, &l)?;
    let result = if distance_only {
        json!({ "distance": res.distance, "optimality_residual": res.optimality_residual })
    } else {
        to_value(&res)
    };
    Ok(Outcome {
        config: json!({ "p": p, "N": n, "v": v.as_slice(), "L": l }),
        result,
        csv: None,
    })
}

fn ortho_test(g: &Global, a: &OrthoTestArgs) -> Run {
    let e = input::subspace(&a.e)?;
    let n = g.n.unwrap_or(e.ambient_dim());
    input::require_dim("E", e.ambient_dim(), n)?;
    let p = p_or(g, 3.0);
    let space = Space::finite(n, p)?;
    if !(0.0..1.0).contains(&a.eps) {
        return Err(Error::Precondition(format!("eps = {} must lie in [0, 1)", a.eps)).into());
    }
    let k = match (&a.v, &a.k) {
        (Some(v), _) => {
            let v = input::vector(v)?;
            input::require_dim("v", v.len(), n)?;
            Subspace::span_of(&[v])?
        }
        (None, Some(k)) => input::subspace(k)?,
        (None, None) => return Err(Failure::input("give --v or --K")),
    };
    input::require_dim("K", k.ambient_dim(), n)?;
    let cfg = DefectConfig { seed: g.seed, ..DefectConfig::default() };
    let d = subspace_ortho_defect(&space, &k, &e, &cfg)?;
    let mut result = json!({
        "defect": d.delta,
        "eps_orthogonal": d.delta >= 1.0 - a.eps - DEFECT_SLACK,
        "witness": d.witness.as_slice(),
    });
    if k.dim() == 1 {
        let tol = g.tol.unwrap_or(1e-8);
        let v = &d.witness;
        let residual = orthogonality_residual(&space, v, &e)?;
        result["residual"] = json!(residual);
        result["orthogonal"] = json!(residual <= tol);
    }
    Ok(Outcome {
        config: json!({ "p": p, "N": n, "eps": a.eps, "tol": g.tol.unwrap_or(1e-8), "K": k, "E": e, "defect": cfg }),
        result,
        csv: None,
    })
}

fn badness(g: &Global, a: &BadnessArgs) -> Run {
    let p = p_or(g, 3.0);
    let ns_cfg = NormalSpanConfig {
        n_samples: g.samples,
        rank_tol: g.tol.unwrap_or(1e-8),
        seed: g.seed,
        ..NormalSpanConfig::default()
    };
    if let Some(trials) = a.sweep {
        let dims = a.random.as_ref().expect("clap enforces --random");
        let (n, k) = (dims[0], dims[1]);
        let space = Space::finite(n, p)?;
        let rows = badness_sweep(&space, k, a.threshold, trials, g.seed, &ns_cfg)?;
        let mut csv = String::from("trial,seed,rank,is_bad\n");
        for r in &rows {
            csv.push_str(&format!("{},{},{},{}\n", r.trial, r.seed, r.rank, r.is_bad));
        }
        let bad = rows.iter().filter(|r| r.is_bad).count();
        return Ok(Outcome {
            config: json!({ "p": p, "N": n, "k": k, "trials": trials, "threshold": a.threshold, "normal_span": ns_cfg }),
            result: json!({ "trials": trials, "bad": bad, "bad_fraction": bad as f64 / trials as f64, "rows": rows }),
            csv: Some(csv),
        });
    }
    let (l, source) = if let Some(text) = &a.gamma {
        let m = input::matrix(text)?;
        if m.ncols() != 2 {
            return Err(Failure::input("gamma must have two columns"));
        }
        let gamma = GammaParam::new(m)?;
        (gamma.to_subspace(), json!({ "gamma": text }))
    } else if let Some(dims) = &a.random {
        let (n, k) = (dims[0], dims[1]);
        (Subspace::random_grassmann(n, k, g.seed)?, json!({ "random": [n, k] }))
    } else if let Some(ij) = &a.coordinate {
        let n = g.n.unwrap_or(3);
        if ij.contains(&0) {
            return Err(Failure::input("coordinate indices are 1-based"));
        }
        (Subspace::coordinate(n, &[ij[0] - 1, ij[1] - 1])?, json!({ "coordinate": ij }))
    } else {
        return Err(Failure::input("give one of --gamma, --random, --coordinate"));
    };
    let n = l.ambient_dim();
    if let Some(given) = g.n {
        input::require_dim("section", n, given)?;
    }
    let space = Space::finite(n, p)?;
    let verdict = classify(&space, &l, a.threshold, &ns_cfg)?;
    Ok(Outcome {
        config: json!({ "p": p, "N": n, "section": source, "L": l, "threshold": a.threshold, "normal_span": ns_cfg }),
        result: to_value(&verdict),
        csv: None,
    })
}

fn certify(g: &Global, a: &CertifyArgs) -> Run {
    let starts = a.budget.or(g.starts);
    let mut cfg = CertifyConfig { seed: g.seed, ..CertifyConfig::default() };
    if let Some(s) = starts {
        cfg.random_starts = s;
    }
    let (space, e, source) = if let Some(m) = a.random_g {
        let c = Counterexample::construct(m, a.k, g.n, g.seed)?;
        let p = g.p.unwrap_or(c.p as f64);
        let space = Space::finite(c.n, p)?;
        let source = json!({ "random_g": m, "g": c.g, "coordinate_gap": c.coordinate_gap, "rule_p": c.p });
        (space, c.e, source)
    } else {
        let gsub = input::subspace(a.g.as_deref().expect("clap enforces --g"))?;
        let n = g.n.unwrap_or(gsub.ambient_dim());
        input::require_dim("g", gsub.ambient_dim(), n)?;
        let space = Space::finite(n, p_or(g, 3.0))?;
        let e = build_e_from_g(&gsub)?;
        (space, e, json!({ "g": gsub }))
    };
    let config = json!({ "p": space.p(), "N": space.dim(), "k": a.k, "source": source, "E": e, "certify": cfg });
    let report = certify_no_orthogonal_subspace(&space, &e, a.k, &cfg);
    let report = match report {
        Ok(r) => r,
        Err(Error::BudgetExhausted(r)) => {
            if let Some(path) = &a.trace {
                std::fs::write(path, r.trace_csv())?;
            }
            return Err(Error::BudgetExhausted(r).into());
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(path) = &a.trace {
        std::fs::write(path, report.trace_csv())?;
    }
    Ok(Outcome { config, result: to_value(&report), csv: Some(report.trace_csv()) })
}

fn borsuk(g: &Global, a: &BorsukArgs) -> Run {
    let e = input::subspace(&a.e)?;
    let f = input::subspace(&a.f)?;
    let n = g.n.unwrap_or(f.ambient_dim());
    input::require_dim("E", e.ambient_dim(), n)?;
    input::require_dim("F", f.ambient_dim(), n)?;
    let p = p_or(g, 3.0);
    let space = Space::finite(n, p)?;
    let mut cfg = BorsukConfig::default();
    if let Some(s) = g.starts {
        cfg.restarts = s;
    }
    if let Some(t) = g.tol {
        cfg.tol = t;
    }
    let sol = find_orthogonal_unit(&space, &e, &f, g.seed, &cfg)?;
    Ok(Outcome {
        config: json!({ "p": p, "N": n, "E": e, "F": f, "borsuk": cfg }),
        result: to_value(&sol),
        csv: None,
    })
}

fn q1_config(g: &Global, a: &Q1Args, default_grid: usize) -> Result<Q1Config, Failure> {
    if let Some(p) = g.p {
        if p != 3.0 {
            return Err(Error::Precondition(format!("this construction lives in L^3, got p = {p}")).into());
        }
    }
    let mut cfg = Q1Config::new(a.n, a.grid.unwrap_or(default_grid), g.samples.unwrap_or(2000), g.seed);
    if let Some(t) = g.tol {
        cfg.rank_tol = t;
    }
    Ok(cfg)
}

fn q1(g: &Global, a: &Q1Args) -> Run {
    let cfg = q1_config(g, a, 2048)?;
    let r = q1_demo(&cfg)?;
    Ok(Outcome { config: to_value(&cfg), result: to_value(&r), csv: None })
}

fn rank_lemma(g: &Global, a: &Q1Args) -> Run {
    let cfg = q1_config(g, a, 4096)?;
    let r = rank_lemma_check(&cfg)?;
    Ok(Outcome { config: to_value(&cfg), result: to_value(&r), csv: None })
}

fn bookkeeping(a: &BookkeepingArgs) -> Run {
    let pairs: Vec<(usize, usize)> = match (a.m, a.k) {
        (Some(m), Some(k)) => vec![(m, k)],
        _ => (2..=a.m_max).flat_map(|m| (2..=m).map(move |k| (m, k))).collect(),
    };
    let mut rows = Vec::with_capacity(pairs.len());
    let mut csv = String::from("m,k,p\n");
    for (m, k) in pairs {
        let p = counterexample_exponent(m, k)?;
        csv.push_str(&format!("{m},{k},{p}\n"));
        rows.push(json!({ "m": m, "k": k, "p": p }));
    }
    Ok(Outcome {
        config: json!({ "m": a.m, "k": a.k, "m_max": a.m_max }),
        result: json!({ "rule": "smallest odd p > m - k + 2", "rows": rows }),
        csv: Some(csv),
    })
}

fn dispatch(cli: &Cli) -> Run {
    let g = &cli.global;
    match &cli.command {
        Command::Project(a) => project(g, a, false),
        Command::Distance(a) => project(g, a, true),
        Command::OrthoTest(a) => ortho_test(g, a),
        Command::Badness(a) => badness(g, a),
        Command::Certify(a) => certify(g, a),
        Command::Borsuk(a) => borsuk(g, a),
        Command::Q1(a) => q1(g, a),
        Command::RankLemma(a) => rank_lemma(g, a),
        Command::Bookkeeping(a) => bookkeeping(a),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Project(_) => "project",
        Command::Distance(_) => "distance",
        Command::OrthoTest(_) => "ortho-test",
        Command::Badness(_) => "badness",
        Command::Certify(_) => "certify",
        Command::Borsuk(_) => "borsuk",
        Command::Q1(_) => "q1",
        Command::RankLemma(_) => "rank-lemma",
        Command::Bookkeeping(_) => "bookkeeping",
    }
}

fn fail(f: &Failure) -> ! {
    let _ = report::write_out(None, &f.to_json());
    std::process::exit(f.exit)
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.render().to_string();
            fail(&Failure::input(msg.trim_end()))
        }
    };
    let g = &cli.global;
    let threads = g.threads.unwrap_or_else(|| {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    });
    if threads == 0 {
        fail(&Failure::input("--threads must be at least 1"));
    }
    if g.tol.is_some_and(|t| t.is_nan() || t <= 0.0) {
        fail(&Failure::input("--tol must be positive"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap_or_else(|e| fail(&Failure::input(e.to_string())));

    let start = Instant::now();
    let outcome = pool.install(|| dispatch(&cli)).unwrap_or_else(|f| fail(&f));
    let wall = start.elapsed().as_millis();
    let name = command_name(&cli.command);

    let text = match g.format {
        Format::Json => {
            let body = Body {
                command: name,
                version: report::VERSION,
                seed: g.seed,
                config: outcome.config,
                result: outcome.result,
            };
            report::envelope(&body, wall, threads)
        }
        Format::Csv => match outcome.csv {
            Some(csv) => {
                eprintln!("{name}: wall_time_ms={wall} threads={threads}");
                csv
            }
            None => fail(&Failure::input(format!("{name} has no CSV output; use --format json"))),
        },
    };
    if let Err(e) = report::write_out(g.out.as_deref(), &text) {
        fail(&Failure::input(e.to_string()));
    }
}
