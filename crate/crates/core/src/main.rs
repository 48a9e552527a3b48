use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use rpz_core::ingest::validate_corpus;
use rpz_core::report::{self, load_corpus, run_pipeline, summary_json, PipelineError, RunConfig};
use rpz_core::synthgen::{self, evaluate_detector, generate_world, read_ground_truth, SpecError, WorldSpec};

#[derive(Parser)]
#[command(name = "rpzscan", version, about = "Flag short-term rental listings in Rent Pressure Zones")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and cross-check the inputs without running the pipeline.
    Validate(RunArgs),
    /// Run the full pipeline and write findings, summary and diagnostics.
    Run(RunArgs),
    /// Recompute the summary from a findings file.
    Summarize {
        #[arg(long)]
        findings: PathBuf,
        /// Fail unless the recomputed summary equals this summary.json.
        #[arg(long)]
        check: Option<PathBuf>,
    },
    /// Synthetic worlds with ground truth.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Generate a world and write its input files and ground truth.
    Generate {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score findings against ground truth.
    Eval {
        #[arg(long)]
        findings: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Where to write metrics.json; defaults to the findings directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    listings: Option<PathBuf>,
    #[arg(long)]
    owners: Option<PathBuf>,
    #[arg(long)]
    reviews: Option<PathBuf>,
    #[arg(long)]
    zones: Option<PathBuf>,
    #[arg(long)]
    permits: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    as_of: Option<NaiveDate>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    radius_m: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    global_dedup: bool,
    #[arg(long)]
    invert_bias: bool,
    #[arg(long)]
    principal_strategy: Option<String>,
    #[arg(long)]
    occupancy_model: Option<String>,
    #[arg(long)]
    translator: Option<String>,
    #[arg(long)]
    translation_cache: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let i = &mut cfg.inputs;
        for (slot, flag) in [
            (&mut i.listings, self.listings),
            (&mut i.owners, self.owners),
            (&mut i.reviews, self.reviews),
            (&mut i.zones, self.zones),
            (&mut i.permits, self.permits),
            (&mut i.embeddings, self.embeddings),
            (&mut i.lexicon, self.lexicon),
            (&mut cfg.out, self.out),
            (&mut cfg.translation_cache, self.translation_cache),
        ] {
            if flag.is_some() {
                *slot = flag;
            }
        }
        if self.as_of.is_some() {
            cfg.as_of = self.as_of;
        }
        if let Some(r) = self.radius_m {
            cfg.radius_m = r;
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        cfg.global_dedup |= self.global_dedup;
        cfg.occupancy.invert_bias |= self.invert_bias;
        for (slot, flag) in [
            (&mut cfg.principal_strategy, self.principal_strategy),
            (&mut cfg.occupancy_model, self.occupancy_model),
            (&mut cfg.translator, self.translator),
        ] {
            if let Some(v) = flag {
                *slot = v;
            }
        }
        Ok(cfg)
    }
}

fn fail(kind: &str, code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!(
        "{}",
        json!({ "error": kind, "exit_code": code, "message": message.to_string() })
    );
    ExitCode::from(code)
}

fn pipeline_failure(e: PipelineError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn open(path: &Path) -> Result<BufReader<File>, ExitCode> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => fail("missing_input", 2, format!("missing input file {}", path.display())),
            _ => fail("io", 1, format!("{}: {e}", path.display())),
        })
}

fn validate(args: RunArgs) -> ExitCode {
    let cfg = match args.into_config() {
        Ok(c) => c,
        Err(e) => return pipeline_failure(e),
    };
    if let Err(e) = cfg.check_inputs_exist() {
        return pipeline_failure(e);
    }
    let loaded = match load_corpus(&cfg) {
        Ok(l) => l,
        Err(e) => return pipeline_failure(e),
    };
    let report = validate_corpus(&loaded.corpus, cfg.as_of);
    let rejects: usize = loaded.rejects.values().map(Vec::len).sum();
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "accepted": report.is_accepted(),
            "hard_violations": report.hard_count(),
            "rejects": rejects,
            "violations": report.violations,
        }))
        .expect("report serializes")
    );
    if report.is_accepted() {
        return ExitCode::SUCCESS;
    }
    let violations_file = match &cfg.out {
        Some(dir) => match report::write_violations(dir, &report) {
            Ok(p) => Some(p),
            Err(e) => return pipeline_failure(e),
        },
        None => None,
    };
    pipeline_failure(PipelineError::Validation {
        report,
        violations_file,
    })
}

fn run(args: RunArgs) -> ExitCode {
    let cfg = match args.into_config() {
        Ok(c) => c,
        Err(e) => return pipeline_failure(e),
    };
    match run_pipeline(&cfg) {
        Ok(artifacts) => {
            print!("{}", artifacts.summary_json());
            ExitCode::SUCCESS
        }
        Err(e) => pipeline_failure(e),
    }
}

fn summarize(findings: &Path, check: Option<&Path>) -> ExitCode {
    let reader = match open(findings) {
        Ok(r) => r,
        Err(code) => return code,
    };
    let summary = match report::summarize(reader) {
        Ok(s) => s,
        Err(e) => return fail("invalid_input", 3, e),
    };
    let text = summary_json(&summary);
    print!("{text}");
    if let Some(path) = check {
        let expected = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(_) => return fail("missing_input", 2, format!("missing input file {}", path.display())),
        };
        let parse = |s: &str| serde_json::from_str::<serde_json::Value>(s).ok();
        if parse(&expected).is_none() || parse(&expected) != parse(&text) {
            return fail(
                "summary_mismatch",
                1,
                format!("summary recomputed from {} differs from {}", findings.display(), path.display()),
            );
        }
    }
    ExitCode::SUCCESS
}

fn synth_generate(spec: Option<&Path>, seed: Option<u64>, out: &Path) -> ExitCode {
    let mut world_spec = match spec {
        Some(path) if !path.exists() => {
            return fail("missing_input", 2, format!("missing input file {}", path.display()))
        }
        Some(path) => match WorldSpec::from_file(path) {
            Ok(s) => s,
            Err(e) => return fail("config", 4, e),
        },
        None => WorldSpec::default(),
    };
    if let Some(s) = seed {
        world_spec.seed = s;
    }
    let world = match generate_world(&world_spec) {
        Ok(w) => w,
        Err(e @ (SpecError::Invalid(_) | SpecError::Unsatisfiable(_))) => return fail("config", 4, e),
        Err(e) => return fail("io", 1, e),
    };
    if let Err(e) = world.write_to(out) {
        return fail("io", 1, format!("{}: {e}", out.display()));
    }
    println!(
        "{}",
        json!({
            "out": out,
            "seed": world_spec.seed,
            "listings": world.listings.len(),
            "owners": world.owners.len(),
            "photos": world.photos.len(),
            "reviews": world.reviews.len(),
            "permits": world.permits.len(),
        })
    );
    ExitCode::SUCCESS
}

fn synth_eval(findings: &Path, truth: &Path, out: Option<&Path>) -> ExitCode {
    let (f, t) = match (open(findings), open(truth)) {
        (Ok(f), Ok(t)) => (f, t),
        (Err(code), _) | (_, Err(code)) => return code,
    };
    let findings_list = match report::read_findings(f) {
        Ok(x) => x,
        Err(e) => return fail("invalid_input", 3, e),
    };
    let truth_list = match read_ground_truth(t) {
        Ok(x) => x,
        Err(e) => return fail("invalid_input", 3, e),
    };
    let metrics = match evaluate_detector(&findings_list, &truth_list) {
        Ok(m) => m,
        Err(e) => return fail("invalid_input", 3, e),
    };
    let text = metrics.to_json();
    print!("{text}");
    let path = match out {
        Some(p) => p.to_owned(),
        None => findings
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(synthgen::METRICS_FILE),
    };
    if let Err(e) = std::fs::write(&path, text) {
        return fail("io", 1, format!("{}: {e}", path.display()));
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Validate(args) => validate(args),
        Command::Run(args) => run(args),
        Command::Summarize { findings, check } => summarize(&findings, check.as_deref()),
        Command::Synth(SynthCommand::Generate { spec, seed, out }) => synth_generate(spec.as_deref(), seed, &out),
        Command::Synth(SynthCommand::Eval { findings, truth, out }) => {
            synth_eval(&findings, &truth, out.as_deref())
        }
    }
}
