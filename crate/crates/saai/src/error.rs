use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] saai_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}:{line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("unsupported dataset version `{found}`, expected `{expected}`")]
    Version { found: String, expected: &'static str },
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("geodetic records span {span_m:.0} m, more than the {limit_m:.0} m the flat-earth import supports")]
    GeodeticSpan { span_m: f64, limit_m: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("pipeline stage `{0}` stopped unexpectedly")]
    StageFailed(&'static str),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    pub(crate) fn image(path: impl Into<PathBuf>) -> impl FnOnce(image::ImageError) -> Error {
        let path = path.into();
        move |source| Error::Image { path, source }
    }
}
