//! Synthetic inputs shared by the benchmarks.

use cuechord_core::score::{bars_from_tempo, NoteEvent, ScoreTimeline};
use cuechord_core::token::Instrument;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A grid-aligned score of `seconds` length with a few overlapping voices.
pub fn synthetic_score(seconds: u64, seed: u64) -> ScoreTimeline {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let end = seconds * 1000;
    let mut notes = Vec::new();
    for instrument in Instrument::ALL {
        let mut t = 0;
        while t < end {
            let len = 8 * rng.random_range(10..120u64);
            let pitch = rng.random_range(36..84u8);
            notes.push(NoteEvent {
                instrument,
                pitch,
                onset_ms: t,
                offset_ms: t + len,
                velocity: 80,
            });
            t += 8 * rng.random_range(8..90u64);
        }
    }
    ScoreTimeline::new(notes, 120.0, bars_from_tempo(120.0, end)).expect("synthetic score is valid")
}

/// Evenly spaced cut times every `every_s` seconds within `seconds`.
pub fn cut_times(seconds: u64, every_s: f64) -> Vec<f64> {
    (1..)
        .map(|i| i as f64 * every_s)
        .take_while(|&t| t < seconds as f64)
        .collect()
}
