//! Symbolic music generation synced to video boundaries.
//!
//! Multi-instrument scores are serialized as event tokens (note on/off per
//! instrument, time shifts on an 8 ms grid). Long guitar and piano chords are
//! marked with a `CHORD` token, and each token carries the time remaining to
//! the next boundary, so a generator can learn to land chords on scene cuts.
//! Video emotion probabilities become valence/arousal conditioning values.
//!
//! Modules follow the pipeline:
//!
//! * [`smf`] and [`codec`]: Standard MIDI Files to scores to tokens and back.
//! * [`chord`]: chord detection, `CHORD` insertion, dropout, velocity boost.
//! * [`boundary`]: boundary offsets, step by step or for a whole sequence.
//! * [`emotion`]: emotion probabilities to valence/arousal.
//! * [`scene`]: scene cuts from ffmpeg logs and the minimum-gap filter.
//! * [`generate`]: the sampling loop, grammar mask and built-in models.

pub mod boundary;
pub mod chord;
pub mod codec;
pub mod emotion;
pub mod error;
pub mod generate;
pub mod scene;
pub mod score;
pub mod smf;
pub mod token;

pub use boundary::{offsets_for_sequence, BoundaryList, BoundaryState, GeneratorState, SchedulerParams};
pub use chord::{boost_chord_velocity, detect_chords, dropout_chords, insert_chord_tokens, ChordSpan};
pub use codec::{decode_events, encode_events, Decoded};
pub use emotion::{build_mixture, inverse_map, mixture_mean, sample_va, Emotion, EmotionDistribution, VaPoint, VaTable};
pub use error::{Error, Result};
pub use generate::{generate, grammar_mask, Generation, NextTokenModel, ReferenceModel, SamplingParams, ScriptedChordModel};
pub use scene::{filter_boundaries, parse_scene_log, SceneCuts};
pub use score::{NoteEvent, ScoreTimeline};
pub use smf::{parse_midi, write_midi};
pub use token::{Instrument, Token};
