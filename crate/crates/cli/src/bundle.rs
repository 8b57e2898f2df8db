//! Detector bundle directories: `detector.json` (role, network spec,
//! training fingerprint) plus `weights.erpw`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use erpstream_core::detector::{DetectorModel, DetectorRole, Fingerprint};
use erpstream_core::net::NetworkSpec;

use crate::error::CliError;
use crate::weights;

pub const MANIFEST_FILE: &str = "detector.json";
pub const WEIGHTS_FILE: &str = "weights.erpw";

#[derive(Serialize, Deserialize)]
struct BundleManifest {
    role: DetectorRole,
    network: NetworkSpec,
    fingerprint: Fingerprint,
}

pub fn save_bundle(dir: &Path, model: &DetectorModel) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let manifest = BundleManifest {
        role: model.role,
        network: model.spec.clone(),
        fingerprint: model.fingerprint.clone(),
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("bundle manifest serializes");
    let manifest_path = dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, json).map_err(|e| CliError::io(&manifest_path, e))?;
    let weights_path = dir.join(WEIGHTS_FILE);
    weights::save_weights(&weights_path, &model.params).map_err(|source| {
        CliError::WeightsFile {
            path: weights_path.clone(),
            source,
        }
    })?;
    Ok(())
}

pub fn load_bundle(dir: &Path) -> Result<DetectorModel, CliError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let json = fs::read(&manifest_path).map_err(|e| CliError::io(&manifest_path, e))?;
    let manifest: BundleManifest = serde_json::from_slice(&json)
        .map_err(|e| CliError::Config(format!("{}: {e}", manifest_path.display())))?;
    let weights_path = dir.join(WEIGHTS_FILE);
    let params =
        weights::load_weights_checked(&weights_path, &manifest.network).map_err(|source| {
            CliError::WeightsFile {
                path: weights_path.clone(),
                source,
            }
        })?;
    Ok(DetectorModel {
        role: manifest.role,
        spec: manifest.network,
        params,
        fingerprint: manifest.fingerprint,
    })
}

/// Bundle directory for one trained detector, under the models root.
pub fn bundle_dir(
    models_dir: &Path,
    subject: &str,
    paradigm: &str,
    fold: usize,
    role: DetectorRole,
) -> std::path::PathBuf {
    models_dir
        .join(subject)
        .join(paradigm)
        .join(format!("fold{fold}"))
        .join(role.tag())
}

#[cfg(test)]
mod tests {
    use super::*;
    use erpstream_core::detector::train_detector;
    use erpstream_core::net::NetworkHyper;
    use erpstream_core::synth::{synth_session, SynthConfig};
    use erpstream_core::train::TrainConfig;
    use erpstream_core::Paradigm;

    #[test]
    fn bundle_roundtrip() {
        let config = SynthConfig {
            n_channels: 4,
            ..SynthConfig::default()
        };
        let sessions = vec![synth_session(&config, "s01", 0, Paradigm::Normal)];
        let hyper = NetworkHyper {
            block_filters: vec![2, 2],
            ..NetworkHyper::default()
        };
        let train = TrainConfig {
            epochs: 1,
            seed: 3,
            ..TrainConfig::default()
        };
        let model =
            train_detector(DetectorRole::Trial01, &sessions, &hyper, &train).unwrap();
        let dir = std::env::temp_dir().join(format!("bundle-test-{}", std::process::id()));
        save_bundle(&dir, &model).unwrap();
        let back = load_bundle(&dir).unwrap();
        assert_eq!(model.role, back.role);
        assert_eq!(model.spec, back.spec);
        assert_eq!(model.params, back.params);
        assert_eq!(model.fingerprint, back.fingerprint);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn missing_bundle_is_a_data_error() {
        let err = load_bundle(Path::new("/nonexistent/bundle-dir")).unwrap_err();
        assert_eq!(err.exit_class(), crate::ExitClass::Data);
    }
}
