use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed MIDI at byte {offset}: {reason}")]
    MidiParse { offset: usize, reason: String },

    #[error("unknown token `{text}` on line {line}")]
    TokenParse { line: usize, text: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no ON token found for chord at {onset_ms} ms ({instrument}, pitches {pitches:?})")]
    ChordLabel {
        onset_ms: u64,
        instrument: String,
        pitches: Vec<u8>,
    },

    #[error("scene log: {0}")]
    SceneLog(String),

    #[error("generation failed: {0}")]
    Generation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
