//! `amnm`: command-line harness for the laboratory.
//!
//! Exit status 0 means every assertion held, 1 a falsification, a refused
//! precondition or non-convergence, and 2 a configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use amnm::harness::{generate_instance, Command, RunConfig};
use amnm::multilinear::{defect, linear_map_norm};
use amnm::rng::StreamRng;
use amnm::stabilizer::stabilize;
use amnm::suite::run_suite;
use amnm::tsirelson::{
    clone_family, clone_system_verify, intersection_size, parse_word, random_vector, tsirelson_norm, TsirelsonVector,
};
use amnm::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "amnm", version, about = "Approximately multiplicative maps: stabilizer, defects and suites")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON run configuration (`schema: 1`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for report files; the report goes to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum TsirelsonAction {
    Norm,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Iterate the improving operator on a generated instance.
    Stabilize(Common),
    /// Defect estimates of a generated instance.
    Defect(Common),
    /// The full acceptance suite.
    Suite(Common),
    /// Tsirelson norm of a finitely supported vector.
    Tsirelson {
        action: Option<TsirelsonAction>,
        /// Dense coefficients of t_1, t_2, … as a JSON array.
        #[arg(long)]
        vector: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Clone families `M(f)` and their pairwise intersections.
    Clones {
        /// Binary word; repeat for several families.
        #[arg(long = "word")]
        words: Vec<String>,
        /// Truncation for the projection ranks.
        #[arg(long)]
        n: Option<usize>,
        /// Number of family terms.
        #[arg(long)]
        horizon: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

/// Outcome of a command: the report and whether everything held.
struct Outcome {
    name: &'static str,
    report: Value,
    csv: Option<String>,
    passed: bool,
    diagnostic: Option<String>,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Configuration(m) => Failure::Config(m),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

/// Loads the config (or defaults when only a seed is given) and applies flag
/// overrides. `needs_seed` is false for commands fully determined by flags.
fn load(common: &Common, command: Command, needs_seed: bool) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None => match common.seed {
            Some(seed) => RunConfig::with_seed(seed),
            None if !needs_seed => RunConfig::with_seed(0),
            None => return Err(Failure::Config("a seed is required: pass --config or --seed".into())),
        },
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output.dir = Some(out.clone());
    }
    if let Some(c) = cfg.command {
        if c != command {
            return Err(Failure::Config(format!("config is for {c:?}, not {command:?}")));
        }
    }
    cfg.command = Some(command);
    cfg.validate()?;
    Ok(cfg)
}

fn run_stabilize(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let inst = generate_instance::<f64>(cfg, cfg.instance)?;
    let sc = cfg.stabilize_config(cfg.instance);
    let report = stabilize(&inst.phi, &inst.d, &inst.cert, &sc)?;
    let passed = report.passed();
    let diagnostic = (!passed).then(|| {
        format!(
            "instance {}: converged = {}, self-modular = {}, claims hold = {}, distance bound holds = {}",
            cfg.instance,
            report.converged,
            report.self_modular,
            report.claims_ok(),
            report.distance_ok
        )
    });
    Ok(Outcome {
        name: "stabilize",
        report: json!({
            "seed": cfg.seed,
            "instance": cfg.instance,
            "gamma_norm": inst.gamma_norm,
            "report": to_value(&report),
        }),
        csv: Some(report.to_csv()),
        passed,
        diagnostic,
    })
}

fn run_defect(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let inst = generate_instance::<f64>(cfg, cfg.instance)?;
    let b = |label: u64| cfg.budget().with_seed(amnm::rng::derive_seed(cfg.seed, label));
    let d = &inst.d;
    let report = json!({
        "schema": 1,
        "seed": cfg.seed,
        "instance": cfg.instance,
        "dims": cfg.dims,
        "norm_mode": cfg.norm_mode,
        "gamma_norm": inst.gamma_norm,
        "norm_phi": linear_map_norm(&inst.phi, b(1))?.interval(),
        "def": defect(&inst.phi, None, None, b(2))?.interval(),
        "def_da": defect(&inst.phi, Some(d), None, b(3))?.interval(),
        "def_ad": defect(&inst.phi, None, Some(d), b(4))?.interval(),
        "def_dd": defect(&inst.phi, Some(d), Some(d), b(5))?.interval(),
        "k_bound": inst.cert.k_bound,
    });
    Ok(Outcome { name: "defect", report, csv: None, passed: true, diagnostic: None })
}

fn run_suite_cmd(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let report = run_suite(cfg)?;
    let diagnostic = (!report.passed).then(|| {
        let failing: Vec<String> = report
            .criteria
            .iter()
            .filter(|c| !c.passed)
            .map(|c| match c.first_failure {
                Some((lemma, i)) => format!("criterion {} ({lemma}, instance {i})", c.id),
                None => format!("criterion {}", c.id),
            })
            .collect();
        format!("failed: {}", failing.join("; "))
    });
    Ok(Outcome { name: "suite", passed: report.passed, report: to_value(&report), csv: None, diagnostic })
}

fn run_tsirelson(cfg: &RunConfig, vector: Option<&str>) -> Result<Outcome, Failure> {
    let dense: Option<Vec<f64>> = match vector {
        Some(text) => {
            let v: Vec<f64> =
                serde_json::from_str(text).map_err(|e| Failure::Config(format!("--vector is not a JSON array of numbers: {e}")))?;
            let mut probe = cfg.clone();
            probe.tsirelson.vector = Some(v.clone());
            probe.validate()?;
            Some(v)
        }
        None => cfg.tsirelson.vector.clone(),
    };
    let x = match dense {
        Some(v) => TsirelsonVector::from_dense(&v),
        None => random_vector(&mut StreamRng::new(cfg.seed, 0), 16, 8),
    };
    let norm = tsirelson_norm(&x)?;
    let report = json!({
        "schema": 1,
        "vector": x.entries().iter().map(|(i, v)| json!([i, v])).collect::<Vec<_>>(),
        "norm": norm.value,
        "stabilization_step": norm.stabilization_step,
        "levels": norm.levels,
        "sup_norm": x.sup_norm(),
    });
    Ok(Outcome { name: "tsirelson", report, csv: None, passed: true, diagnostic: None })
}

fn run_clones(cfg: &RunConfig, words: &[String], n: Option<usize>, horizon: Option<usize>) -> Result<Outcome, Failure> {
    let mut cfg = cfg.clone();
    if !words.is_empty() {
        cfg.clones.words = words.to_vec();
    }
    if let Some(n) = n {
        cfg.clones.n = n;
    }
    if let Some(h) = horizon {
        cfg.clones.horizon = h;
    }
    cfg.validate()?;
    let words: Vec<Vec<bool>> = if cfg.clones.words.is_empty() {
        let mut rng = StreamRng::new(cfg.seed, 0);
        (0..8).map(|_| (0..10).map(|_| rng.bit()).collect()).collect()
    } else {
        cfg.clones.words.iter().map(|w| parse_word(w)).collect::<Result<_, _>>()?
    };
    let h = cfg.clones.horizon;
    let families = words.iter().map(|w| clone_family(w, h)).collect::<Result<Vec<_>, _>>()?;
    let mut passed = true;
    let fams: Vec<Value> = families
        .iter()
        .map(|f| {
            let violation = f.interval_schreier_violation();
            let ok = f.satisfies_growth() && f.matches_closed_form() && violation.is_none();
            passed &= ok;
            json!({
                "word": f.word.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>(),
                "terms": f.terms,
                "growth": f.satisfies_growth(),
                "closed_form": f.matches_closed_form(),
                "interval_schreier_violation": violation,
            })
        })
        .collect();
    let mut pairs = Vec::new();
    for i in 0..words.len() {
        for j in i + 1..words.len() {
            let r = intersection_size(&words[i], &words[j], h)?;
            passed &= r.holds;
            pairs.push(json!({"left": i, "right": j, "intersection": to_value(&r)}));
        }
    }
    let system = clone_system_verify(&families, cfg.clones.n, cfg.clones.samples, cfg.seed)?;
    passed &= system.passed;
    let report = json!({
        "schema": 1,
        "seed": cfg.seed,
        "horizon": h,
        "families": fams,
        "intersections": pairs,
        "projections": to_value(&system),
        "passed": passed,
    });
    let diagnostic = (!passed).then(|| "a clone-family property failed; see the report".to_string());
    Ok(Outcome { name: "clones", report, csv: None, passed, diagnostic })
}

fn write_outputs(out: &Outcome, dir: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(&out.report).expect("reports serialize") + "\n";
    match dir {
        Some(dir) => {
            let io = |e: std::io::Error| Failure::Config(format!("cannot write to {}: {e}", dir.display()));
            fs::create_dir_all(dir).map_err(io)?;
            fs::write(dir.join(format!("{}.json", out.name)), &text).map_err(io)?;
            if let Some(csv) = &out.csv {
                fs::write(dir.join(format!("{}.csv", out.name)), csv).map_err(io)?;
            }
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn threads_from_env() -> Result<(), Failure> {
    let Ok(v) = std::env::var("AMNM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Failure::Config(format!("AMNM_THREADS = {v:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<bool, Failure> {
    threads_from_env()?;
    let (cfg, outcome) = match &cli.command {
        Cmd::Stabilize(c) => {
            let cfg = load(c, Command::Stabilize, true)?;
            let o = run_stabilize(&cfg)?;
            (cfg, o)
        }
        Cmd::Defect(c) => {
            let cfg = load(c, Command::Defect, true)?;
            let o = run_defect(&cfg)?;
            (cfg, o)
        }
        Cmd::Suite(c) => {
            let cfg = load(c, Command::Suite, true)?;
            let o = run_suite_cmd(&cfg)?;
            (cfg, o)
        }
        Cmd::Tsirelson { vector, common, .. } => {
            let cfg = load(common, Command::Tsirelson, vector.is_none())?;
            let o = run_tsirelson(&cfg, vector.as_deref())?;
            (cfg, o)
        }
        Cmd::Clones { words, n, horizon, common } => {
            let cfg = load(common, Command::Clones, words.is_empty())?;
            let o = run_clones(&cfg, words, *n, *horizon)?;
            (cfg, o)
        }
    };
    write_outputs(&outcome, cfg.output.dir.as_deref())?;
    if let Some(d) = &outcome.diagnostic {
        eprintln!("amnm {}: {d}", outcome.name);
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Run(m)) => {
            eprintln!("amnm: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            eprintln!("amnm: configuration error: {m}");
            ExitCode::from(2)
        }
    }
}
