//! `adaudit`: command-line front end for the sensitivity audit toolkit.
//!
//! Exit codes: 0 on success, 2 on validation errors (bad inputs or
//! parameters), 1 on runtime errors (I/O, network).

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};

use adaudit_core::audit::{build_blacklist, AuditStore, Blacklist, SnapshotPreference};
use adaudit_core::classifier::{run_realizations, LabeledScore};
use adaudit_core::corpus::{load_catalog, load_dictionary, load_population};
use adaudit_core::embeddings::load_vectors;
use adaudit_core::exposure::{
    exposure, generate_population, load_population_spec, rank_sensitive, AudienceOracle,
    ExposureQuery, FixtureOracle, Gender,
};
use adaudit_core::labeling::{
    fleiss_kappa, load_votes, majority_label, save_decisions, Label, KappaMode, VoteSheet,
};
use adaudit_core::report::{
    cost_per_identified_user, country_table, emit_cdf, emit_country_table,
};
use adaudit_core::scoring::{load_scored, prefilter, score_cdf, Scorer};
use adaudit_core::Error as CoreError;

#[derive(Parser)]
#[command(name = "adaudit", version, about = "Sensitive ad-preference audit toolkit")]
struct Cli {
    /// Base seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for parallel steps (defaults to the machine's cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a preference catalog against the keyword dictionary.
    Score(ScoreArgs),
    /// Aggregate panel votes into labels and agreement statistics.
    Label(LabelArgs),
    /// Train the threshold classifier over randomized splits.
    Train(TrainArgs),
    /// Compute FFB/FC exposure tables from reach queries.
    Exposure(ExposureArgs),
    /// Blacklist maintenance and snapshot ingestion.
    #[command(subcommand)]
    Audit(AuditCommand),
    /// Run the audit HTTP service.
    Serve(ServeArgs),
    /// Emit report data files.
    #[command(subcommand)]
    Report(ReportCommand),
    /// Estimate the cost of identifying one user via an ad campaign.
    Cost(CostArgs),
}

#[derive(Args)]
struct ScoreArgs {
    /// Word vectors in text format (token v1 .. vD per line).
    #[arg(long)]
    vectors: PathBuf,
    /// Keyword dictionary (category<TAB>keyword per line).
    #[arg(long)]
    dictionary: PathBuf,
    /// Preference catalog CSV.
    #[arg(long)]
    catalog: PathBuf,
    /// Output CSV of scored preferences.
    #[arg(long)]
    out: PathBuf,
    /// Keep only scores at or above this threshold.
    #[arg(long)]
    prefilter: Option<f64>,
    /// Also write the score CDF to this path.
    #[arg(long)]
    cdf: Option<PathBuf>,
}

#[derive(Args)]
struct LabelArgs {
    /// Votes CSV (pref_id,panelist_id,category).
    #[arg(long)]
    votes: PathBuf,
    /// Panel size per item.
    #[arg(long, default_value_t = 5)]
    raters: usize,
    /// Output CSV of majority decisions.
    #[arg(long)]
    out: PathBuf,
    /// Agreement statistic mode.
    #[arg(long, default_value = "restricted")]
    kappa_mode: String,
}

#[derive(Args)]
struct TrainArgs {
    /// Scored preferences CSV.
    #[arg(long)]
    scores: PathBuf,
    /// Majority decisions CSV.
    #[arg(long)]
    decisions: PathBuf,
    /// Number of randomized realizations.
    #[arg(long, default_value_t = 100)]
    realizations: usize,
    /// Training fraction of each split.
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Write the full summary JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExposureArgs {
    /// Recorded reach fixtures JSON.
    #[arg(long, conflicts_with = "popspec")]
    fixtures: Option<PathBuf>,
    /// Synthetic population spec JSON.
    #[arg(long)]
    popspec: Option<PathBuf>,
    /// Country population CSV (country,population).
    #[arg(long)]
    population: PathBuf,
    /// Comma-separated country codes.
    #[arg(long, value_delimiter = ',')]
    countries: Vec<String>,
    /// File with one sensitive preference id per line.
    #[arg(long)]
    sensitive: PathBuf,
    /// Number of top-ranked preferences in the union audience.
    #[arg(long, default_value_t = 10)]
    top_n: usize,
    /// Output CSV table.
    #[arg(long)]
    out_csv: PathBuf,
    /// Output aligned-text table.
    #[arg(long)]
    out_text: PathBuf,
}

#[derive(Subcommand)]
enum AuditCommand {
    /// Build a blacklist from scored preferences.
    Build(AuditBuildArgs),
    /// Ingest one user snapshot into the audit log.
    Ingest(AuditIngestArgs),
    /// Print a user's audit record as JSON.
    Report(AuditReportArgs),
}

#[derive(Args)]
struct AuditBuildArgs {
    /// Scored preferences CSV.
    #[arg(long)]
    scores: PathBuf,
    /// Blacklist threshold.
    #[arg(long, default_value_t = adaudit_core::audit::DEPLOYED_THRESHOLD)]
    threshold: f64,
    /// Output blacklist JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AuditIngestArgs {
    /// User identifier.
    #[arg(long)]
    user: String,
    /// Snapshot JSON: array of {id, name, disambiguation?, reason_text?}.
    #[arg(long)]
    snapshot: PathBuf,
    /// Base URL of a running audit service; mutually exclusive with the
    /// local --blacklist/--log pair.
    #[arg(long, conflicts_with_all = ["blacklist", "log"])]
    url: Option<String>,
    /// Blacklist JSON (local mode).
    #[arg(long, required_unless_present = "url")]
    blacklist: Option<PathBuf>,
    /// Append-only event log (local mode).
    #[arg(long, required_unless_present = "url")]
    log: Option<PathBuf>,
    /// Snapshot timestamp (RFC 3339); defaults to now.
    #[arg(long)]
    timestamp: Option<DateTime<Utc>>,
    /// Word vectors for on-the-fly scoring of unknown preferences.
    #[arg(long, requires = "dictionary")]
    vectors: Option<PathBuf>,
    /// Keyword dictionary for on-the-fly scoring.
    #[arg(long, requires = "vectors")]
    dictionary: Option<PathBuf>,
}

#[derive(Args)]
struct AuditReportArgs {
    #[arg(long)]
    user: String,
    /// Base URL of a running audit service; mutually exclusive with the
    /// local --blacklist/--log pair.
    #[arg(long, conflicts_with_all = ["blacklist", "log"])]
    url: Option<String>,
    #[arg(long, required_unless_present = "url")]
    blacklist: Option<PathBuf>,
    #[arg(long, required_unless_present = "url")]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    /// Blacklist JSON.
    #[arg(long)]
    blacklist: PathBuf,
    /// Append-only event log.
    #[arg(long)]
    log: PathBuf,
    /// Listen address, e.g. 127.0.0.1:8080.
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: String,
    /// Word vectors for on-the-fly scoring.
    #[arg(long, requires = "dictionary")]
    vectors: Option<PathBuf>,
    /// Keyword dictionary for on-the-fly scoring.
    #[arg(long, requires = "vectors")]
    dictionary: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ReportCommand {
    /// Emit the score CDF of a scored-preferences CSV.
    Cdf(ReportCdfArgs),
}

#[derive(Args)]
struct ReportCdfArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CostArgs {
    /// Campaign budget in euro.
    #[arg(long)]
    budget: f64,
    /// Users reached by the campaign.
    #[arg(long)]
    reached: u64,
    /// Fraction of reached users identified, in (0, 1].
    #[arg(long)]
    rate: f64,
}

enum CliError {
    Core(CoreError),
    Other(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_validation() => 2,
            _ => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Other(m) => m.clone(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("adaudit: failed to size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("adaudit: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Score(args) => cmd_score(args),
        Command::Label(args) => cmd_label(args),
        Command::Train(args) => cmd_train(args, cli.seed),
        Command::Exposure(args) => cmd_exposure(args, cli.seed),
        Command::Audit(cmd) => match cmd {
            AuditCommand::Build(args) => cmd_audit_build(args),
            AuditCommand::Ingest(args) => cmd_audit_ingest(args),
            AuditCommand::Report(args) => cmd_audit_report(args),
        },
        Command::Serve(args) => cmd_serve(args),
        Command::Report(cmd) => match cmd {
            ReportCommand::Cdf(args) => cmd_report_cdf(args),
        },
        Command::Cost(args) => cmd_cost(args),
    }
}

fn cmd_score(args: ScoreArgs) -> Result<(), CliError> {
    let store = load_vectors(&args.vectors)?;
    let dictionary = load_dictionary(&args.dictionary)?;
    let catalog = load_catalog(&args.catalog)?;
    let scorer = Scorer::new(&store, &dictionary)?;
    let mut scored = scorer.score_catalog(&catalog);
    if let Some(threshold) = args.prefilter {
        scored = prefilter(&scored, threshold)?;
    }
    adaudit_core::scoring::save_scored(&scored, &args.out)?;
    if let Some(cdf_path) = &args.cdf {
        emit_cdf(&score_cdf(&scored), cdf_path)?;
    }
    println!(
        "scored {} preferences ({} below prefilter dropped)",
        scored.len(),
        catalog.len() - scored.len()
    );
    Ok(())
}

fn cmd_label(args: LabelArgs) -> Result<(), CliError> {
    let votes = load_votes(&args.votes)?;
    let sheet = VoteSheet::from_votes(&votes, args.raters)?;
    let outcome = majority_label(&sheet);
    save_decisions(&outcome.decisions, &args.out)?;
    let sensitive = outcome
        .decisions
        .iter()
        .filter(|d| d.label == Label::Sensitive)
        .count();
    println!(
        "{} of {} items labeled Sensitive ({} excluded)",
        sensitive,
        outcome.decisions.len(),
        outcome.excluded.len()
    );
    let mode = match args.kappa_mode.as_str() {
        "restricted" => KappaMode::Restricted,
        "all" => KappaMode::All,
        other => {
            return Err(CliError::Core(CoreError::InvalidParameter(format!(
                "unknown kappa mode {other:?} (expected restricted or all)"
            ))))
        }
    };
    match fleiss_kappa(&sheet, mode) {
        Ok(report) => println!(
            "fleiss kappa ({}): {:.4} over {} items",
            args.kappa_mode, report.kappa, report.item_count
        ),
        Err(e) => println!("fleiss kappa ({}): unavailable ({e})", args.kappa_mode),
    }
    Ok(())
}

fn cmd_train(args: TrainArgs, seed: u64) -> Result<(), CliError> {
    let scored = load_scored(&args.scores)?;
    let decisions = adaudit_core::labeling::load_decisions(&args.decisions)?;
    let labels: std::collections::HashMap<&str, Label> = decisions
        .iter()
        .map(|d| (d.pref_id.as_str(), d.label))
        .collect();
    let data: Vec<LabeledScore> = scored
        .iter()
        .filter_map(|s| {
            labels.get(s.pref_id.as_str()).map(|&label| LabeledScore {
                pref_id: s.pref_id.clone(),
                score: s.score,
                label,
            })
        })
        .collect();
    if data.is_empty() {
        return Err(CliError::Core(CoreError::EmptyInput(
            "no scored preference has a label".into(),
        )));
    }
    let summary = run_realizations(&data, args.realizations, seed, args.train_fraction)?;
    println!(
        "threshold median {:.4} [{:.4}, {:.4}]",
        summary.threshold.median, summary.threshold.min, summary.threshold.max
    );
    println!(
        "F median {:.4}  precision median {:.4}  recall median {:.4}  AUC median {:.4}",
        summary.f_score.median,
        summary.precision.median,
        summary.recall.median,
        summary.auc.median
    );
    println!(
        "{} realizations, {} abandoned",
        summary.realizations, summary.abandoned
    );
    if let Some(out) = &args.out {
        let text = serde_json::to_string_pretty(&summary)
            .map_err(|e| CliError::Other(e.to_string()))?;
        std::fs::write(out, text).map_err(|e| CoreError::io(out.display().to_string(), e))?;
    }
    Ok(())
}

fn cmd_exposure(args: ExposureArgs, seed: u64) -> Result<(), CliError> {
    if args.countries.is_empty() {
        return Err(CliError::Core(CoreError::EmptyInput(
            "no countries given".into(),
        )));
    }
    let population_table = load_population(&args.population)?;
    let sensitive_text = std::fs::read_to_string(&args.sensitive)
        .map_err(|e| CoreError::io(args.sensitive.display().to_string(), e))?;
    let sensitive: Vec<String> = sensitive_text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();

    let oracle: Box<dyn AudienceOracle> = match (&args.fixtures, &args.popspec) {
        (Some(path), _) => Box::new(FixtureOracle::load(path)?),
        (None, Some(path)) => {
            let spec = load_population_spec(path)?;
            Box::new(generate_population(&spec, seed)?)
        }
        (None, None) => {
            return Err(CliError::Core(CoreError::InvalidParameter(
                "either --fixtures or --popspec is required".into(),
            )))
        }
    };

    let ranked_pairs = rank_sensitive(oracle.as_ref(), &args.countries, &sensitive)?;
    let ranked: Vec<String> = ranked_pairs.into_iter().map(|(id, _)| id).collect();
    let mut rows = Vec::with_capacity(args.countries.len());
    for country in &args.countries {
        let query = ExposureQuery {
            countries: vec![country.clone()],
            top_n: args.top_n,
            gender: Gender::All,
            age_range: None,
            ranked: ranked.clone(),
        };
        rows.push((
            country.clone(),
            exposure(oracle.as_ref(), &query, &population_table)?,
        ));
    }
    let aggregate_query = ExposureQuery {
        countries: args.countries.clone(),
        top_n: args.top_n,
        gender: Gender::All,
        age_range: None,
        ranked,
    };
    let aggregate = exposure(oracle.as_ref(), &aggregate_query, &population_table)?;
    let table = country_table(rows, aggregate)?;
    emit_country_table(&table, &args.out_csv, &args.out_text)?;
    println!(
        "{}: FFB {:.2}  FC {:.2}",
        table.aggregate_label, table.aggregate.ffb, table.aggregate.fc
    );
    Ok(())
}

fn cmd_audit_build(args: AuditBuildArgs) -> Result<(), CliError> {
    let scored = load_scored(&args.scores)?;
    let blacklist = build_blacklist(&scored, args.threshold, Utc::now())?;
    blacklist.save(&args.out)?;
    println!(
        "blacklisted {} of {} preferences at threshold {}",
        blacklist.len(),
        scored.len(),
        args.threshold
    );
    Ok(())
}

fn load_snapshot(path: &PathBuf) -> Result<Vec<SnapshotPreference>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CoreError::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Core(CoreError::Json {
            path: path.display().to_string(),
            source: e,
        })
    })
}

fn block_on<T>(
    future: impl std::future::Future<Output = Result<T, adaudit_client::ClientError>>,
) -> Result<T, CliError> {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Other(e.to_string()))?;
    runtime
        .block_on(future)
        .map_err(|e| CliError::Other(e.to_string()))
}

fn cmd_audit_ingest(args: AuditIngestArgs) -> Result<(), CliError> {
    let snapshot = load_snapshot(&args.snapshot)?;
    let timestamp = args.timestamp.unwrap_or_else(Utc::now);
    let diff = if let Some(url) = &args.url {
        let client = adaudit_client::AuditClient::new(url.clone());
        block_on(client.ingest(&args.user, timestamp, snapshot))?
    } else {
        let blacklist_path = args.blacklist.as_ref().expect("enforced by clap");
        let log_path = args.log.as_ref().expect("enforced by clap");
        let blacklist = Blacklist::load(blacklist_path)?;
        let mut store = AuditStore::open(blacklist, log_path)?;
        let scoring = match (&args.vectors, &args.dictionary) {
            (Some(v), Some(d)) => Some((load_vectors(v)?, load_dictionary(d)?)),
            _ => None,
        };
        let scorer = scoring
            .as_ref()
            .map(|(store, dict)| Scorer::new(store, dict))
            .transpose()?;
        let diff = store.ingest_snapshot(&args.user, &snapshot, timestamp, scorer.as_ref())?;
        // persist any preferences blacklisted on the fly
        store.blacklist().save(blacklist_path)?;
        diff
    };
    println!(
        "{} added, {} deleted",
        diff.added.len(),
        diff.deleted.len()
    );
    Ok(())
}

fn cmd_audit_report(args: AuditReportArgs) -> Result<(), CliError> {
    let report = if let Some(url) = &args.url {
        let client = adaudit_client::AuditClient::new(url.clone());
        block_on(client.user_report(&args.user))?
    } else {
        let blacklist = Blacklist::load(args.blacklist.as_ref().expect("enforced by clap"))?;
        let store = AuditStore::open(blacklist, args.log.as_ref().expect("enforced by clap"))?;
        store.user_report(&args.user)
    };
    let text =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Other(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> Result<(), CliError> {
    let blacklist = Blacklist::load(&args.blacklist)?;
    let store = AuditStore::open(blacklist, &args.log)?;
    let scoring = match (&args.vectors, &args.dictionary) {
        (Some(v), Some(d)) => Some(adaudit_service::ScoringContext {
            store: load_vectors(v)?,
            dictionary: load_dictionary(d)?,
        }),
        _ => None,
    };
    let state = adaudit_service::AppState::new(store, scoring);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Other(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.listen)
            .await
            .map_err(|e| CliError::Other(format!("bind {}: {e}", args.listen)))?;
        println!("listening on {}", args.listen);
        adaudit_service::serve(state, listener)
            .await
            .map_err(|e| CliError::Other(e.to_string()))
    })
}

fn cmd_report_cdf(args: ReportCdfArgs) -> Result<(), CliError> {
    let scored = load_scored(&args.scores)?;
    emit_cdf(&score_cdf(&scored), &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_cost(args: CostArgs) -> Result<(), CliError> {
    let estimate = cost_per_identified_user(args.budget, args.reached, args.rate)?;
    println!(
        "cost per identified user: {} (raw {:.6})",
        estimate.display(),
        estimate.cost_per_identified_user
    );
    Ok(())
}
