//! Conversion between scores and event token sequences.

use std::collections::{HashMap, VecDeque};

use crate::score::{instrument_count_tag, NoteEvent, ScoreTimeline, DEFAULT_TEMPO_BPM, DEFAULT_VELOCITY};
use crate::token::{Instrument, Token, MAX_SHIFT_MS};

/// Append the TIMESHIFT tokens covering `gap_ms` (a multiple of 8).
pub fn push_shifts(out: &mut Vec<Token>, mut gap_ms: u64) {
    while gap_ms > 0 {
        let step = gap_ms.min(MAX_SHIFT_MS as u64);
        out.push(Token::shift(step as u32));
        gap_ms -= step;
    }
}

/// Encode a score as `START`, the instrument-count tag, then time-ordered
/// events.
///
/// Times are snapped to the 8 ms grid first. Events sharing a grid step are
/// ordered `BAR`, then `OFF`, then `ON`, each by instrument then pitch.
pub fn encode_events(score: &ScoreTimeline) -> Vec<Token> {
    let q = score.quantized();
    // (time, class, instrument, pitch, token)
    let mut events: Vec<(u64, u8, Option<Instrument>, u8, Token)> = Vec::with_capacity(q.notes().len() * 2);
    for &bar in q.bar_marks_ms() {
        events.push((bar, 0, None, 0, Token::Bar));
    }
    for n in q.notes() {
        events.push((n.offset_ms, 1, Some(n.instrument), n.pitch, Token::off(n.instrument, n.pitch)));
        events.push((n.onset_ms, 2, Some(n.instrument), n.pitch, Token::on(n.instrument, n.pitch)));
    }
    events.sort_by_key(|e| (e.0, e.1, e.2, e.3));

    let mut out = Vec::with_capacity(events.len() * 2 + 2);
    out.push(Token::Start);
    out.push(instrument_count_tag(score));
    let mut cursor = 0u64;
    for (t, .., token) in events {
        push_shifts(&mut out, t - cursor);
        cursor = t;
        out.push(token);
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodeDiagnostics {
    /// OFF tokens with no matching open note.
    pub unmatched_offs: usize,
    /// Notes still open at the end of the sequence, closed there.
    pub closed_at_end: usize,
    /// Notes dropped because they would have zero length.
    pub zero_length: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub score: ScoreTimeline,
    /// Cursor time of every CHORD token, in order.
    pub chord_onsets_ms: Vec<u64>,
    /// Total time covered by TIMESHIFT tokens.
    pub end_ms: u64,
    pub diagnostics: DecodeDiagnostics,
}

/// Replay a token sequence into a score. Any sequence is accepted; anomalies
/// are counted in the diagnostics. Decoded notes get the default velocity
/// and the default tempo.
pub fn decode_events(tokens: &[Token]) -> Decoded {
    let mut cursor = 0u64;
    let mut open: HashMap<(Instrument, u8), VecDeque<u64>> = HashMap::new();
    let mut notes = Vec::new();
    let mut bars: Vec<u64> = Vec::new();
    let mut chords = Vec::new();
    let mut diag = DecodeDiagnostics::default();

    let mut close = |instrument, pitch, onset_ms, offset_ms, diag: &mut DecodeDiagnostics| {
        if offset_ms > onset_ms {
            notes.push(NoteEvent {
                instrument,
                pitch,
                onset_ms,
                offset_ms,
                velocity: DEFAULT_VELOCITY,
            });
        } else {
            diag.zero_length += 1;
        }
    };

    for token in tokens {
        match *token {
            Token::TimeShift(s) => cursor += s.ms() as u64,
            Token::On { instrument, pitch } => open.entry((instrument, pitch)).or_default().push_back(cursor),
            Token::Off { instrument, pitch } => {
                match open.get_mut(&(instrument, pitch)).and_then(VecDeque::pop_front) {
                    Some(onset) => close(instrument, pitch, onset, cursor, &mut diag),
                    None => diag.unmatched_offs += 1,
                }
            }
            Token::Chord => chords.push(cursor),
            Token::Bar => {
                if bars.last() != Some(&cursor) {
                    bars.push(cursor);
                }
            }
            Token::Pad | Token::Start | Token::FewerInstruments | Token::MoreInstruments => {}
        }
    }
    let mut remaining: Vec<_> = open
        .into_iter()
        .flat_map(|(key, q)| q.into_iter().map(move |onset| (onset, key)))
        .collect();
    remaining.sort();
    for (onset, (instrument, pitch)) in remaining {
        diag.closed_at_end += 1;
        close(instrument, pitch, onset, cursor, &mut diag);
    }

    Decoded {
        score: ScoreTimeline::from_parts_unchecked(notes, DEFAULT_TEMPO_BPM, bars),
        chord_onsets_ms: chords,
        end_ms: cursor,
        diagnostics: diag,
    }
}
