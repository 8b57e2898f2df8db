//! `erpstream`: synthesize sessions, train task-specific detectors, run
//! fan-out inference, and evaluate with leave-one-session-out
//! cross-validation.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use erpstream::bundle::{bundle_dir, load_bundle, save_bundle};
use erpstream::dataset::{load_paradigm, synth_dataset};
use erpstream::error::{CliError, ExitClass};
use erpstream::ers1;
use erpstream::orchestrator::{run_session, ExecMode};
use erpstream::protocol::{evaluate_methods, EvalSettings, ExecPlan};
use erpstream::report::{render_json, render_text};
use erpstream::runconfig::RunConfig;

use erpstream_core::decision::{DetectorSet, SessionMeta};
use erpstream_core::detector::{train_detector, DetectorError, DetectorRole};
use erpstream_core::gradcheck::{
    check_spec, finite_difference_check, DEFAULT_EPS, DEFAULT_PROBE_SEED, REL_ERR_LIMIT,
};
use erpstream_core::metrics::{loso_folds, Method};
use erpstream_core::rng::Rng;
use erpstream_core::train::TrainConfig;
use erpstream_core::Paradigm;

#[derive(Parser)]
#[command(
    name = "erpstream",
    about = "Task-wise single-trial ERP detection in image-stream EEG sessions",
    version
)]
struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the master seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Force serial execution (determinism audits).
    #[arg(long, global = true)]
    serial: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic dataset to the configured dataset directory.
    Synth,
    /// Train the detectors for one subject, paradigm, and fold.
    Train {
        #[arg(long)]
        subject: String,
        #[arg(long)]
        paradigm: String,
        #[arg(long)]
        fold: usize,
    },
    /// Run inference on a session file using trained bundles.
    Infer {
        #[arg(long)]
        subject: String,
        #[arg(long)]
        paradigm: String,
        #[arg(long)]
        fold: usize,
        /// Path to an ERS1 session file.
        session: PathBuf,
    },
    /// Leave-one-session-out evaluation of a method on a paradigm.
    Eval {
        #[arg(long)]
        method: String,
        #[arg(long)]
        paradigm: String,
    },
    /// Finite-difference check of the network gradients.
    Gradcheck,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitClass::Success.code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_class().code()
        }
    }
}

fn parse_paradigm(s: &str) -> Result<Paradigm, CliError> {
    Paradigm::parse(s)
        .ok_or_else(|| CliError::Usage(format!("unknown paradigm {s:?}, expected normal|ai")))
}

fn parse_method(s: &str) -> Result<Method, CliError> {
    Method::parse(s)
        .ok_or_else(|| CliError::Usage(format!("unknown method {s:?}, expected proposed|baseline")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = RunConfig::resolve(cli.config.as_deref(), cli.seed)?;
    println!("config hash {}", config.hash());
    match cli.command {
        Command::Synth => cmd_synth(&config),
        Command::Train {
            subject,
            paradigm,
            fold,
        } => cmd_train(&config, &subject, parse_paradigm(&paradigm)?, fold),
        Command::Infer {
            subject,
            paradigm,
            fold,
            session,
        } => cmd_infer(
            &config,
            &subject,
            parse_paradigm(&paradigm)?,
            fold,
            &session,
            cli.serial,
        ),
        Command::Eval { method, paradigm } => cmd_eval(
            &config,
            parse_method(&method)?,
            parse_paradigm(&paradigm)?,
            cli.serial,
        ),
        Command::Gradcheck => cmd_gradcheck(),
    }
}

fn cmd_synth(config: &RunConfig) -> Result<(), CliError> {
    let summary = synth_dataset(&config.synth, &config.paths.dataset_dir)?;
    println!(
        "{} session files written, {} unchanged, under {}",
        summary.n_written,
        summary.n_unchanged,
        config.paths.dataset_dir.display()
    );
    Ok(())
}

/// Training seed shared with the evaluation protocol: a pure function of
/// (master seed, subject, fold, role), so `train` then `infer` reproduces
/// exactly what `eval` computes internally.
fn detector_seed(master: u64, subject: &str, fold: usize, role: DetectorRole) -> u64 {
    Rng::new(master)
        .derive("train")
        .derive(subject)
        .derive_u64(fold as u64)
        .derive(role.tag())
        .seed()
}

fn cmd_train(
    config: &RunConfig,
    subject: &str,
    paradigm: Paradigm,
    fold: usize,
) -> Result<(), CliError> {
    let dataset = load_paradigm(&config.paths.dataset_dir, paradigm)?;
    let sessions = dataset
        .get(subject)
        .ok_or_else(|| CliError::Config(format!("subject {subject} not in the dataset")))?;
    let folds = loso_folds(sessions.len())?;
    let fold_spec = folds.get(fold).ok_or_else(|| {
        CliError::Usage(format!("fold {fold} out of range, have {}", folds.len()))
    })?;
    let train_sessions: Vec<_> = fold_spec
        .train
        .iter()
        .map(|&i| sessions[i].clone())
        .collect();

    let mut n_bundles = 0;
    for role in [DetectorRole::Trial01, DetectorRole::Trial05, DetectorRole::Onset] {
        let train_config = TrainConfig {
            seed: detector_seed(config.master_seed, subject, fold, role),
            ..config.train.clone()
        };
        match train_detector(role, &train_sessions, &config.network, &train_config) {
            Ok(model) => {
                let dir = bundle_dir(&config.paths.models_dir, subject, paradigm.tag(), fold, role);
                save_bundle(&dir, &model)?;
                println!("wrote {}", dir.display());
                n_bundles += 1;
            }
            Err(DetectorError::EmptyTrainingSet { role }) if paradigm == Paradigm::Ai => {
                println!("skipped {role}: no matching trials under the ai paradigm");
            }
            Err(e) => return Err(e.into()),
        }
    }
    println!("{n_bundles} bundles for {subject}/{paradigm}/fold{fold}");
    Ok(())
}

fn cmd_infer(
    config: &RunConfig,
    subject: &str,
    paradigm: Paradigm,
    fold: usize,
    session: &std::path::Path,
    serial: bool,
) -> Result<(), CliError> {
    let (rec, manifest) =
        ers1::read_recording(session).map_err(|source| CliError::SessionFile {
            path: session.to_path_buf(),
            source,
        })?;
    let meta = SessionMeta::from_manifest(&manifest);

    let load_role = |role: DetectorRole| {
        load_bundle(&bundle_dir(
            &config.paths.models_dir,
            subject,
            paradigm.tag(),
            fold,
            role,
        ))
    };
    let trial01 = match load_role(DetectorRole::Trial01) {
        Ok(m) => Some(m),
        Err(_) if paradigm == Paradigm::Ai => None,
        Err(e) => return Err(e),
    };
    let trial05 = Some(load_role(DetectorRole::Trial05)?);
    let onset = load_role(DetectorRole::Onset).map_err(|e| match e {
        CliError::Io { path, .. } => CliError::Config(format!(
            "onset bundle missing at {}; run `erpstream train` first",
            path.display()
        )),
        other => other,
    })?;
    let models = DetectorSet {
        trial01,
        trial05,
        onset,
    };
    let mode = if serial {
        ExecMode::Serial
    } else {
        ExecMode::Concurrent {
            schedule_seed: config.master_seed,
        }
    };
    let inference = run_session(&rec, &models, &meta, mode)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&inference).expect("inference serializes")
    );
    Ok(())
}

fn cmd_eval(
    config: &RunConfig,
    method: Method,
    paradigm: Paradigm,
    serial: bool,
) -> Result<(), CliError> {
    let dataset = load_paradigm(&config.paths.dataset_dir, paradigm)?;
    let settings = EvalSettings {
        train: config.train.clone(),
        hyper: config.network.clone(),
        master_seed: config.master_seed,
        exec: ExecPlan::auto(serial),
    };
    let reports = evaluate_methods(&dataset, paradigm, &[method], &settings)?;

    fs::create_dir_all(&config.paths.reports_dir)
        .map_err(|e| CliError::io(&config.paths.reports_dir, e))?;
    let stem = format!("report_{}_{}", method.tag(), paradigm.tag());
    let json_path = config.paths.reports_dir.join(format!("{stem}.json"));
    let json = serde_json::to_vec_pretty(&render_json(&reports)).expect("reports serialize");
    fs::write(&json_path, json).map_err(|e| CliError::io(&json_path, e))?;
    let text = render_text(&reports);
    let text_path = config.paths.reports_dir.join(format!("{stem}.txt"));
    fs::write(&text_path, &text).map_err(|e| CliError::io(&text_path, e))?;

    print!("{text}");
    let report = &reports[0];
    println!(
        "grand F_beta {:.4} (std {:.4}) -> {}",
        report.grand_f_beta,
        report.subject_std,
        json_path.display()
    );
    Ok(())
}

fn cmd_gradcheck() -> Result<(), CliError> {
    let mut all_ok = true;
    for batch_norm in [true, false] {
        let report = finite_difference_check(
            &check_spec(batch_norm),
            DEFAULT_PROBE_SEED,
            DEFAULT_EPS,
            None,
        );
        let verdict = if report.passed() { "PASS" } else { "FAIL" };
        println!(
            "batch_norm {}: max rel err {:.3e} over {} scalars (limit {:.0e}): {verdict}",
            if batch_norm { "on " } else { "off" },
            report.max_rel_err,
            report.n_scalars_checked,
            REL_ERR_LIMIT,
        );
        all_ok &= report.passed();
    }
    if !all_ok {
        return Err(CliError::Numerical(
            "analytic gradients disagree with finite differences".into(),
        ));
    }
    Ok(())
}
