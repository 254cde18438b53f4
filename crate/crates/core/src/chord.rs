//! Long-chord detection, CHORD token insertion, chord dropout and chord
//! velocity boosting.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::score::{quantize_ms, NoteEvent, ScoreTimeline};
use crate::token::{Instrument, Token};

pub const DEFAULT_SIMULTANEITY_EPS_MS: u64 = 8;
pub const DEFAULT_DROPOUT_RATE: f64 = 0.2;
pub const DEFAULT_BOOST_GAIN: u8 = 20;
pub const MIN_CHORD_NOTES: usize = 3;
pub const MIN_CHORD_BEATS: u64 = 2;

/// A sustained guitar or piano chord: at least three distinct pitches
/// starting together and each lasting at least two beats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChordSpan {
    pub instrument: Instrument,
    pub onset_ms: u64,
    pub pitches: BTreeSet<u8>,
    /// Shortest member note duration.
    pub duration_ms: u64,
}

fn chord_instrument(i: Instrument) -> bool {
    matches!(i, Instrument::Guitar | Instrument::Piano)
}

/// Find every qualifying chord.
///
/// Notes of one instrument are grouped left to right: a group holds every
/// note starting within `eps_ms` of the group's first onset. Group members
/// shorter than two beats are discarded; the rest form a chord if they cover
/// at least three distinct pitches.
pub fn detect_chords(score: &ScoreTimeline, beat_ms: u64, eps_ms: u64) -> Vec<ChordSpan> {
    let min_duration = MIN_CHORD_BEATS * beat_ms;
    let mut spans = Vec::new();
    for instrument in [Instrument::Guitar, Instrument::Piano] {
        let notes: Vec<&NoteEvent> = score.notes().iter().filter(|n| n.instrument == instrument).collect();
        let mut i = 0;
        while i < notes.len() {
            let start = notes[i].onset_ms;
            let end = i + notes[i..].partition_point(|n| n.onset_ms <= start + eps_ms);
            let members: Vec<&&NoteEvent> = notes[i..end].iter().filter(|n| n.duration_ms() >= min_duration).collect();
            let pitches: BTreeSet<u8> = members.iter().map(|n| n.pitch).collect();
            if pitches.len() >= MIN_CHORD_NOTES {
                spans.push(ChordSpan {
                    instrument,
                    onset_ms: members.iter().map(|n| n.onset_ms).min().unwrap(),
                    pitches,
                    duration_ms: members.iter().map(|n| n.duration_ms()).min().unwrap(),
                });
            }
            i = end;
        }
    }
    debug_assert!(spans.iter().all(|s| chord_instrument(s.instrument)));
    spans.sort_by_key(|s| (s.onset_ms, s.instrument));
    spans
}

/// Place one CHORD token immediately before the first ON token of each span.
///
/// Span onsets are matched on the 8 ms grid, as `encode_events` emits them.
pub fn insert_chord_tokens(tokens: &[Token], spans: &[ChordSpan]) -> Result<Vec<Token>> {
    let mut cursors = Vec::with_capacity(tokens.len());
    let mut cursor = 0u64;
    for t in tokens {
        if let Some(ms) = t.shift_ms() {
            cursor += ms as u64;
        }
        cursors.push(cursor);
    }
    let mut claimed = HashSet::with_capacity(spans.len());
    for span in spans {
        let target = quantize_ms(span.onset_ms);
        let start = cursors.partition_point(|&c| c < target);
        let found = (start..tokens.len())
            .take_while(|&i| cursors[i] == target)
            .find(|&i| {
                !claimed.contains(&i)
                    && matches!(tokens[i], Token::On { instrument, pitch }
                        if instrument == span.instrument && span.pitches.contains(&pitch))
            });
        match found {
            Some(i) => {
                claimed.insert(i);
            }
            None => {
                return Err(Error::ChordLabel {
                    onset_ms: span.onset_ms,
                    instrument: span.instrument.to_string(),
                    pitches: span.pitches.iter().copied().collect(),
                })
            }
        }
    }
    let mut out = Vec::with_capacity(tokens.len() + spans.len());
    for (i, t) in tokens.iter().enumerate() {
        if claimed.contains(&i) {
            out.push(Token::Chord);
        }
        out.push(*t);
    }
    Ok(out)
}

/// Remove each CHORD token independently with probability `rate`.
pub fn dropout_chords(tokens: &[Token], rate: f64, seed: u64) -> Result<Vec<Token>> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("dropout rate {rate} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(tokens
        .iter()
        .copied()
        .filter(|t| *t != Token::Chord || !rng.random_bool(rate))
        .collect())
}

/// Raise the velocity of every note starting within `eps_ms` of a chord
/// onset by `gain`, saturating at 127.
pub fn boost_chord_velocity(score: &ScoreTimeline, chord_onsets_ms: &[u64], gain: u8, eps_ms: u64) -> ScoreTimeline {
    let mut onsets = chord_onsets_ms.to_vec();
    onsets.sort_unstable();
    let at_chord = |t: u64| {
        let i = onsets.partition_point(|&c| c + eps_ms < t);
        onsets.get(i).is_some_and(|&c| c <= t + eps_ms)
    };
    score.map_notes(|n| {
        if at_chord(n.onset_ms) {
            NoteEvent {
                velocity: n.velocity.saturating_add(gain).min(127),
                ..*n
            }
        } else {
            *n
        }
    })
}

/// One line per span: onset, instrument, comma-separated pitches, duration.
pub fn chord_report(spans: &[ChordSpan]) -> String {
    let mut out = String::from("# onset_ms\tinstrument\tpitches\tduration_ms\n");
    for s in spans {
        let pitches: Vec<String> = s.pitches.iter().map(u8::to_string).collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            s.onset_ms,
            s.instrument,
            pitches.join(","),
            s.duration_ms
        );
    }
    out
}
