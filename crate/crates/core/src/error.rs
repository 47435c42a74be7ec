use std::path::PathBuf;

/// Errors raised by the extraction pipeline and its stages.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("rectangle {rect:?} lies outside a {width}x{height} image")]
    Bounds {
        rect: crate::raster::Rect,
        width: usize,
        height: usize,
    },
    #[error("image too small: {0}")]
    Size(String),
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("character {0:?} is not in the glyph set")]
    Charset(char),
    #[error("caption layout: {0}")]
    Layout(String),
    #[error("filter training: {0}")]
    Training(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid parameter: {0}")]
    Config(String),
    #[error("OCR engine failed: {0}")]
    Engine(String),
    #[error("malformed {kind} file: {msg}")]
    Format { kind: &'static str, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(kind: &'static str, msg: impl Into<String>) -> Self {
        Error::Format {
            kind,
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
