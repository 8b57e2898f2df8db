//! Error taxonomy for the binary: every failure maps to one of four exit
//! classes so scripts can tell usage mistakes, bad data, protocol
//! violations, and numerical breakdowns apart.

use std::path::PathBuf;
use std::process::ExitCode;

use erpstream_core::decision::DecisionError;
use erpstream_core::detector::DetectorError;
use erpstream_core::metrics::ProtocolError;
use erpstream_core::net::NetError;
use erpstream_core::optim::OptimError;
use erpstream_core::segment::SegmentError;
use erpstream_core::train::TrainError;

use crate::ers1::Ers1Error;
use crate::weights::WeightsError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitClass {
    Success = 0,
    Usage = 2,
    Data = 3,
    Protocol = 4,
    Numerical = 5,
}

impl ExitClass {
    pub fn code(self) -> ExitCode {
        ExitCode::from(self as u8)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    SessionFile {
        path: PathBuf,
        #[source]
        source: Ers1Error,
    },

    #[error("{path}: {source}")]
    WeightsFile {
        path: PathBuf,
        #[source]
        source: WeightsError,
    },

    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Numerical(String),

    #[error("{0}")]
    Segment(#[from] SegmentError),

    #[error("{0}")]
    Detector(#[from] DetectorError),

    #[error("{0}")]
    Decision(#[from] DecisionError),

    #[error("{0}")]
    Protocol(#[from] ProtocolError),

    #[error("{0}")]
    Train(#[from] TrainError),

    #[error("{0}")]
    Net(#[from] NetError),

    #[error("{0}")]
    Optim(#[from] OptimError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_class(&self) -> ExitClass {
        match self {
            CliError::Usage(_) => ExitClass::Usage,
            CliError::Io { .. } | CliError::SessionFile { .. } | CliError::WeightsFile { .. } => {
                ExitClass::Data
            }
            CliError::Config(_) => ExitClass::Protocol,
            CliError::Numerical(_) => ExitClass::Numerical,
            CliError::Segment(_) | CliError::Detector(_) | CliError::Protocol(_) => {
                ExitClass::Protocol
            }
            CliError::Decision(e) => match e {
                DecisionError::Detector(DetectorError::Net(NetError::NonFiniteLoss { .. })) => {
                    ExitClass::Numerical
                }
                _ => ExitClass::Protocol,
            },
            CliError::Train(e) => match e {
                TrainError::BadConfig(_) => ExitClass::Usage,
                TrainError::Net(NetError::NonFiniteLoss { .. }) => ExitClass::Numerical,
                TrainError::Optim(_) => ExitClass::Numerical,
                _ => ExitClass::Protocol,
            },
            CliError::Net(e) => match e {
                NetError::NonFiniteLoss { .. } => ExitClass::Numerical,
                _ => ExitClass::Data,
            },
            CliError::Optim(_) => ExitClass::Numerical,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes_are_distinct_codes() {
        let classes = [
            ExitClass::Usage,
            ExitClass::Data,
            ExitClass::Protocol,
            ExitClass::Numerical,
        ];
        for (i, a) in classes.iter().enumerate() {
            for b in classes.iter().skip(i + 1) {
                assert_ne!(*a as u8, *b as u8);
            }
        }
    }

    #[test]
    fn representative_mappings() {
        assert_eq!(
            CliError::Usage("bad flag".into()).exit_class(),
            ExitClass::Usage
        );
        assert_eq!(
            CliError::Train(TrainError::EmptyTrainingSet).exit_class(),
            ExitClass::Protocol
        );
        assert_eq!(
            CliError::Optim(OptimError::NonFiniteUpdate {
                name: "dense.weight".into()
            })
            .exit_class(),
            ExitClass::Numerical
        );
    }
}
