//! Absolute-time score representation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::token::{Instrument, Token, RESOLUTION_MS};

pub const DEFAULT_TEMPO_BPM: f64 = 120.0;
/// Velocity given to notes decoded from tokens, which carry none.
pub const DEFAULT_VELOCITY: u8 = 80;
pub const MAX_TRANSPOSE: i8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoteEvent {
    pub instrument: Instrument,
    pub pitch: u8,
    pub onset_ms: u64,
    pub offset_ms: u64,
    pub velocity: u8,
}

impl NoteEvent {
    pub fn duration_ms(&self) -> u64 {
        self.offset_ms - self.onset_ms
    }

    fn sort_key(&self) -> (u64, Instrument, u8, u64) {
        (self.onset_ms, self.instrument, self.pitch, self.offset_ms)
    }

    fn validate(&self) -> Result<()> {
        if self.pitch > 127 {
            return Err(Error::InvalidArgument(format!("pitch {} out of range", self.pitch)));
        }
        if self.offset_ms <= self.onset_ms {
            return Err(Error::InvalidArgument(format!(
                "note offset {} ms not after onset {} ms",
                self.offset_ms, self.onset_ms
            )));
        }
        if !(1..=127).contains(&self.velocity) {
            return Err(Error::InvalidArgument(format!(
                "velocity {} out of range",
                self.velocity
            )));
        }
        Ok(())
    }
}

/// Notes on an absolute millisecond timeline plus tempo and bar positions.
///
/// Notes are kept sorted by (onset, instrument, pitch, offset); bar marks are
/// strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTimeline {
    notes: Vec<NoteEvent>,
    tempo_bpm: f64,
    bar_marks_ms: Vec<u64>,
}

impl Default for ScoreTimeline {
    fn default() -> Self {
        ScoreTimeline {
            notes: Vec::new(),
            tempo_bpm: DEFAULT_TEMPO_BPM,
            bar_marks_ms: Vec::new(),
        }
    }
}

impl ScoreTimeline {
    /// Sorts notes and bar marks; rejects invalid notes or a non-positive tempo.
    pub fn new(mut notes: Vec<NoteEvent>, tempo_bpm: f64, mut bar_marks_ms: Vec<u64>) -> Result<Self> {
        if !(tempo_bpm.is_finite() && tempo_bpm > 0.0) {
            return Err(Error::InvalidArgument(format!("tempo {tempo_bpm} must be positive")));
        }
        for n in &notes {
            n.validate()?;
        }
        notes.sort_by_key(NoteEvent::sort_key);
        bar_marks_ms.sort_unstable();
        bar_marks_ms.dedup();
        Ok(ScoreTimeline {
            notes,
            tempo_bpm,
            bar_marks_ms,
        })
    }

    pub(crate) fn from_parts_unchecked(
        mut notes: Vec<NoteEvent>,
        tempo_bpm: f64,
        bar_marks_ms: Vec<u64>,
    ) -> Self {
        notes.sort_by_key(NoteEvent::sort_key);
        ScoreTimeline {
            notes,
            tempo_bpm,
            bar_marks_ms,
        }
    }

    pub fn notes(&self) -> &[NoteEvent] {
        &self.notes
    }

    pub fn tempo_bpm(&self) -> f64 {
        self.tempo_bpm
    }

    pub fn bar_marks_ms(&self) -> &[u64] {
        &self.bar_marks_ms
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    /// Length of one beat, rounded to whole milliseconds.
    pub fn beat_ms(&self) -> u64 {
        (60_000.0 / self.tempo_bpm).round() as u64
    }

    /// Latest note offset or bar mark.
    pub fn end_ms(&self) -> u64 {
        let last_note = self.notes.iter().map(|n| n.offset_ms).max().unwrap_or(0);
        last_note.max(self.bar_marks_ms.last().copied().unwrap_or(0))
    }

    pub fn with_tempo(mut self, tempo_bpm: f64) -> Result<Self> {
        if !(tempo_bpm.is_finite() && tempo_bpm > 0.0) {
            return Err(Error::InvalidArgument(format!("tempo {tempo_bpm} must be positive")));
        }
        self.tempo_bpm = tempo_bpm;
        Ok(self)
    }

    pub fn without_bars(mut self) -> Self {
        self.bar_marks_ms.clear();
        self
    }

    pub fn instruments(&self) -> BTreeSet<Instrument> {
        self.notes.iter().map(|n| n.instrument).collect()
    }

    pub(crate) fn map_notes(&self, f: impl FnMut(&NoteEvent) -> NoteEvent) -> Self {
        Self::from_parts_unchecked(
            self.notes.iter().map(f).collect(),
            self.tempo_bpm,
            self.bar_marks_ms.clone(),
        )
    }

    /// Snap every time to the 8 ms grid. Notes that would collapse to zero
    /// length are extended to one grid step.
    pub fn quantized(&self) -> Self {
        let notes = self
            .notes
            .iter()
            .map(|n| {
                let onset_ms = quantize_ms(n.onset_ms);
                let offset_ms = quantize_ms(n.offset_ms).max(onset_ms + RESOLUTION_MS as u64);
                NoteEvent {
                    onset_ms,
                    offset_ms,
                    ..*n
                }
            })
            .collect();
        let mut bars: Vec<u64> = self.bar_marks_ms.iter().map(|&b| quantize_ms(b)).collect();
        bars.dedup();
        Self::from_parts_unchecked(notes, self.tempo_bpm, bars)
    }

    /// Drop notes starting at or after `end_ms` and cut the rest off there.
    pub fn trimmed(&self, end_ms: u64) -> Self {
        let notes = self
            .notes
            .iter()
            .filter(|n| n.onset_ms < end_ms)
            .map(|n| NoteEvent {
                offset_ms: n.offset_ms.min(end_ms),
                ..*n
            })
            .collect();
        let bars = self.bar_marks_ms.iter().copied().filter(|&b| b < end_ms).collect();
        Self::from_parts_unchecked(notes, self.tempo_bpm, bars)
    }
}

/// Round to the nearest multiple of the 8 ms grid, halves rounding up.
pub fn quantize_ms(t: u64) -> u64 {
    let r = RESOLUTION_MS as u64;
    (t + r / 2) / r * r
}

/// Bar starts every four beats from 0 up to and including `end_ms`.
pub fn bars_from_tempo(tempo_bpm: f64, end_ms: u64) -> Vec<u64> {
    let bar = 4.0 * 60_000.0 / tempo_bpm;
    (0..)
        .map(|i| (i as f64 * bar).round() as u64)
        .take_while(|&t| t <= end_ms)
        .collect()
}

/// Shift every pitched note by `semitones` in [-3, 3]; drums are untouched.
/// Results leaving 0..=127 are clipped.
pub fn transpose(score: &ScoreTimeline, semitones: i8) -> Result<ScoreTimeline> {
    if semitones.abs() > MAX_TRANSPOSE {
        return Err(Error::InvalidArgument(format!(
            "transposition of {semitones} semitones outside [-3, 3]"
        )));
    }
    Ok(score.map_notes(|n| {
        if n.instrument.is_percussion() {
            *n
        } else {
            NoteEvent {
                pitch: (n.pitch as i16 + semitones as i16).clamp(0, 127) as u8,
                ..*n
            }
        }
    }))
}

/// `FEWER_INSTRUMENTS` when at most two categories sound, else `MORE_INSTRUMENTS`.
pub fn instrument_count_tag(score: &ScoreTimeline) -> Token {
    if score.instruments().len() <= 2 {
        Token::FewerInstruments
    } else {
        Token::MoreInstruments
    }
}
