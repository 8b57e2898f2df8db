//! Dataset synthesis to disk and loading for evaluation.
//!
//! Layout: `<dataset_dir>/<subject>/<paradigm>/session<k>.ers1`, subjects
//! named `s01..`, one file per session. Regeneration with the same config
//! is byte-identical; existing identical files are left untouched and
//! counted as unchanged.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use erpstream_core::synth::{synth_session, SynthConfig};
use erpstream_core::{EegRecording, Paradigm, SessionManifest};

use crate::error::CliError;
use crate::ers1;

pub fn subject_id(index: usize) -> String {
    format!("s{:02}", index + 1)
}

pub struct SynthSummary {
    pub files: Vec<PathBuf>,
    pub n_written: usize,
    pub n_unchanged: usize,
}

/// Generates every session of the configured dataset under `out_dir`.
pub fn synth_dataset(config: &SynthConfig, out_dir: &Path) -> Result<SynthSummary, CliError> {
    let mut summary = SynthSummary {
        files: Vec::new(),
        n_written: 0,
        n_unchanged: 0,
    };
    for subject in 0..config.n_subjects {
        let subject = subject_id(subject);
        for paradigm in [Paradigm::Normal, Paradigm::Ai] {
            let dir = out_dir.join(&subject).join(paradigm.tag());
            fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            for session in 0..config.sessions_per_paradigm {
                let (rec, manifest) = synth_session(config, &subject, session, paradigm);
                let bytes = ers1::encode(&rec, &manifest);
                let path = dir.join(format!("session{session}.ers1"));
                match fs::read(&path) {
                    Ok(existing) if existing == bytes => summary.n_unchanged += 1,
                    _ => {
                        fs::write(&path, &bytes).map_err(|e| CliError::io(&path, e))?;
                        summary.n_written += 1;
                    }
                }
                summary.files.push(path);
            }
        }
    }
    Ok(summary)
}

pub type SubjectSessions = BTreeMap<String, Vec<(EegRecording, SessionManifest)>>;

/// Loads one paradigm's sessions for every subject present in the dataset
/// directory, ordered by subject id and session index.
pub fn load_paradigm(dataset_dir: &Path, paradigm: Paradigm) -> Result<SubjectSessions, CliError> {
    let mut out = SubjectSessions::new();
    let entries = fs::read_dir(dataset_dir).map_err(|e| CliError::io(dataset_dir, e))?;
    let mut subjects: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subjects.sort();
    for subject_dir in subjects {
        let subject = subject_dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        let paradigm_dir = subject_dir.join(paradigm.tag());
        if !paradigm_dir.is_dir() {
            continue;
        }
        let mut sessions: Vec<(usize, PathBuf)> = fs::read_dir(&paradigm_dir)
            .map_err(|e| CliError::io(&paradigm_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter_map(|p| {
                let stem = p.file_name()?.to_str()?.strip_suffix(".ers1")?.to_string();
                let index: usize = stem.strip_prefix("session")?.parse().ok()?;
                Some((index, p))
            })
            .collect();
        sessions.sort();
        let mut loaded = Vec::with_capacity(sessions.len());
        for (index, path) in sessions {
            let (rec, manifest) =
                ers1::read_recording(&path).map_err(|source| CliError::SessionFile {
                    path: path.clone(),
                    source,
                })?;
            if manifest.subject_id != subject
                || manifest.session_index != index
                || manifest.paradigm != paradigm
            {
                return Err(CliError::Config(format!(
                    "{}: manifest says {}/{}/{}, path says {subject}/{}/{index}",
                    path.display(),
                    manifest.subject_id,
                    manifest.paradigm,
                    manifest.session_index,
                    paradigm.tag(),
                )));
            }
            loaded.push((rec, manifest));
        }
        if !loaded.is_empty() {
            out.insert(subject, loaded);
        }
    }
    if out.is_empty() {
        return Err(CliError::Config(format!(
            "no {} sessions found under {}",
            paradigm.tag(),
            dataset_dir.display()
        )));
    }
    Ok(out)
}
