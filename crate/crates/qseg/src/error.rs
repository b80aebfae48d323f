use std::path::PathBuf;

use qseg_core::clustering::ClusterError;
use qseg_core::features::FeatureError;
use qseg_core::imaging::ImageError;
use qseg_core::optim::OptimError;
use qseg_core::pipeline::PipelineError;
use qseg_core::protocols::ProtocolError;
use qseg_core::qsim::SimError;
use qseg_core::vqc::VqcError;
use thiserror::Error;

use crate::config::ConfigError;
use crate::model_file::ModelFileError;
use crate::raster::RasterError;
use crate::tabular::TabularError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing mask for {}", .0.display())]
    MissingMask(PathBuf),
    #[error("corpus directory {} has no images", .0.display())]
    EmptyCorpus(PathBuf),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Tabular(#[from] TabularError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Model(#[from] ModelFileError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("cannot write JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    CsvWrite(#[from] csv::Error),
}

/// Process exit status for each class of failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 1,
    Data = 2,
    Numerical = 3,
}

fn sim(e: &SimError) -> ExitKind {
    match e {
        SimError::NonFiniteAngle => ExitKind::Numerical,
        _ => ExitKind::Data,
    }
}

fn protocol(e: &ProtocolError) -> ExitKind {
    match e {
        ProtocolError::Sim(s) => sim(s),
        ProtocolError::EmptyGrid => ExitKind::Usage,
        _ => ExitKind::Data,
    }
}

fn cluster(e: &ClusterError) -> ExitKind {
    match e {
        ClusterError::BadK(_) | ClusterError::BadBatch => ExitKind::Usage,
        ClusterError::Protocol(p) => protocol(p),
        ClusterError::Sim(s) => sim(s),
        _ => ExitKind::Data,
    }
}

fn features(e: &FeatureError) -> ExitKind {
    match e {
        FeatureError::BadFractions | FeatureError::TooManyComponents { .. } => ExitKind::Usage,
        _ => ExitKind::Data,
    }
}

fn image(e: &ImageError) -> ExitKind {
    match e {
        ImageError::BadSigma(_) | ImageError::BadTarget { .. } => ExitKind::Usage,
        _ => ExitKind::Data,
    }
}

fn optim(e: &OptimError) -> ExitKind {
    match e {
        OptimError::BadStart => ExitKind::Numerical,
        _ => ExitKind::Usage,
    }
}

fn vqc(e: &VqcError) -> ExitKind {
    match e {
        VqcError::IncompatibleEncoding(_) | VqcError::EmptyAnsatz => ExitKind::Usage,
        VqcError::Encoding(p) => protocol(p),
        VqcError::Sim(s) => sim(s),
        VqcError::Features(f) => features(f),
        VqcError::Optim(o) => optim(o),
        _ => ExitKind::Data,
    }
}

impl Error {
    pub fn kind(&self) -> ExitKind {
        match self {
            Error::Usage(_) | Error::Config(_) => ExitKind::Usage,
            Error::Numerical(_) => ExitKind::Numerical,
            Error::Protocol(e) => protocol(e),
            Error::Cluster(e) => cluster(e),
            Error::Features(e) => features(e),
            Error::Image(e) => image(e),
            Error::Pipeline(e) => match e {
                PipelineError::Image(e) => image(e),
                PipelineError::Cluster(e) => cluster(e),
                PipelineError::Features(e) => features(e),
                PipelineError::Vqc(e) => vqc(e),
                _ => ExitKind::Data,
            },
            _ => ExitKind::Data,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind() as i32
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
