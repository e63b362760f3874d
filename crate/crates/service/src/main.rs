use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use finrep_core::metrics::{build_report, AccScope, GoldLabelSet, MetricsReport};
use finrep_core::ontology::{Jurisdiction, LoadOptions, OntologyCatalog};
use finrep_core::pipeline::{atomic_write, load_bundles, run_pipeline, PipelineConfig};
use finrep_service::{archive_name, company_archive, router, AppState};
use rust_decimal::Decimal;

#[derive(Parser)]
#[command(
    name = "finrep",
    version,
    about = "Canonical financial statements from US, JP and CN filings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Process every fixture company and write a run directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        ontology: Option<PathBuf>,
        /// Require exactly 18 concepts split 5/7/6.
        #[arg(long)]
        strict18: bool,
        /// `scripted:<path>` or `http:<url>`.
        #[arg(long)]
        verifier: Option<String>,
        #[arg(long)]
        context_cap: Option<usize>,
        #[arg(long)]
        retries: Option<u32>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Serve the HTTP API over a run directory.
    Serve {
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        ontology: Option<PathBuf>,
    },
    /// Score stored bundles against gold labels.
    Metrics {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        bundles: PathBuf,
        /// Relative tolerance for accuracy.
        #[arg(long, default_value = "1e-6", value_parser = parse_tolerance)]
        tol: Decimal,
        #[arg(long, default_value = "all")]
        acc_scope: AccScope,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one company's workbook archive.
    Export {
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long)]
        market: Jurisdiction,
        #[arg(long)]
        company: String,
        /// Archive path, or a directory to place `<market>_<company>_workbook.zip` in.
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_tolerance(raw: &str) -> Result<Decimal, String> {
    let tol = Decimal::from_scientific(raw)
        .or_else(|_| raw.parse::<Decimal>())
        .map_err(|e| format!("invalid tolerance {raw:?}: {e}"))?;
    if tol.is_sign_negative() {
        return Err("tolerance must not be negative".into());
    }
    Ok(tol)
}

fn load_catalog(path: Option<&Path>, strict18: bool) -> Result<OntologyCatalog, String> {
    match path {
        Some(p) => OntologyCatalog::from_path(p, LoadOptions { strict18 }).map_err(|e| e.to_string()),
        None => Ok(OntologyCatalog::default_catalog()),
    }
}

fn print_rates(report: &MetricsReport) {
    let row = |label: &str, r: &finrep_core::metrics::RateRow| {
        let acc = r.acc.map_or("-".to_string(), |a| format!("{a:.2}"));
        println!(
            "{label:<6} N={:<5} FR={:>6.2} CR={:>6.2} Acc={:>6}",
            r.counts.n, r.fr, r.cr, acc
        );
    };
    for (market, r) in &report.markets {
        row(market.as_str(), r);
    }
    row("ALL", &report.global);
}

fn run(command: Command) -> Result<(), String> {
    match command {
        Command::Run {
            config,
            ontology,
            strict18,
            verifier,
            context_cap,
            retries,
            output,
        } => {
            let mut cfg = PipelineConfig::load(&config).map_err(|e| e.to_string())?;
            if ontology.is_some() {
                cfg.ontology = ontology;
            }
            cfg.strict18 |= strict18;
            if verifier.is_some() {
                cfg.verifier.spec = verifier;
            }
            if let Some(cap) = context_cap {
                cfg.verifier.context_cap = cap;
            }
            if let Some(r) = retries {
                cfg.verifier.retries = r;
            }
            if let Some(out) = output {
                cfg.output_dir = out;
            }
            let outcome = run_pipeline(&cfg).map_err(|e| e.to_string())?;
            for c in &outcome.companies {
                match &c.error {
                    None => println!("{}/{}: ok", c.market, c.company_id),
                    Some(e) => println!("{}/{}: failed: {e}", c.market, c.company_id),
                }
            }
            if let Some(report) = &outcome.report {
                print_rates(report);
            }
            println!("review items open: {}", outcome.queue.open_count());
            println!("run directory: {}", outcome.output_dir.display());
            Ok(())
        }
        Command::Serve {
            run_dir,
            port,
            host,
            ontology,
        } => {
            let catalog = load_catalog(ontology.as_deref(), false)?;
            let state = AppState::open(run_dir, catalog).map_err(|e| e.to_string())?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port))
                    .await
                    .map_err(|e| format!("bind {host}:{port}: {e}"))?;
                println!(
                    "serving {} on http://{}",
                    state.run_dir().display(),
                    listener.local_addr().map_err(|e| e.to_string())?
                );
                axum::serve(listener, router(state)).await.map_err(|e| e.to_string())
            })
        }
        Command::Metrics {
            gold,
            bundles,
            tol,
            acc_scope,
            out,
        } => {
            let gold = GoldLabelSet::from_path(&gold).map_err(|e| e.to_string())?;
            let stored = load_bundles(&bundles).map_err(|e| e.to_string())?;
            if stored.is_empty() {
                return Err(format!("no bundles under {}", bundles.display()));
            }
            let report = build_report(&stored, Some(&gold), tol, acc_scope).map_err(|e| e.to_string())?;
            let mut json = serde_json::to_vec_pretty(&report).map_err(|e| e.to_string())?;
            json.push(b'\n');
            match out {
                Some(path) => {
                    atomic_write(&path, &json).map_err(|e| e.to_string())?;
                    print_rates(&report);
                }
                None => print!("{}", String::from_utf8_lossy(&json)),
            }
            Ok(())
        }
        Command::Export {
            run_dir,
            market,
            company,
            out,
        } => {
            let bytes = company_archive(&run_dir, market, &company).map_err(|e| e.to_string())?;
            let path = if out.is_dir() {
                out.join(archive_name(market, &company))
            } else {
                out
            };
            atomic_write(&path, &bytes).map_err(|e| e.to_string())?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("finrep: {e}");
            ExitCode::FAILURE
        }
    }
}
