//! Built-in next-token models.
//!
//! [`ReferenceModel`] is a rule-based stand-in for a trained network. Its
//! distribution at each step is fully determined by the history, the last
//! boundary offset and the valence/arousal pair:
//!
//! * Pulse: `600 - 250 * arousal` ms snapped to the 8 ms grid (arousal 0 if
//!   unspecified), so higher arousal means shorter steps.
//! * Scale: major when valence > 0, natural minor otherwise (including
//!   unspecified), rooted at the configured key (default MIDI 60).
//! * Chords are piano triads on scale degrees I, IV, V, vi in rotation, one
//!   octave below the root; melody notes are strings, one octave above.
//!
//! Each step takes the first rule that applies:
//!
//! 1. Empty history: `START`. Right after `START`: `FEWER_INSTRUMENTS`.
//! 2. After a `CHORD`: release any piano note still sounding, then the three
//!    triad ONs, lowest first.
//! 3. Release the lowest due note: melody notes after one pulse, chord notes
//!    after four pulses.
//! 4. If anything started since the last TIMESHIFT: TIMESHIFT by one pulse,
//!    or by the offset floored to the grid when that is shorter (and at
//!    least 8 ms), so the cursor lands on the next boundary.
//! 5. Otherwise choose: `CHORD` with [`chord_probability`] (zero while a
//!    CHORD is not permitted); the rest splits 3:1 between a melody ON and a
//!    TIMESHIFT as in rule 4. Melody pitches are scale tones over one octave
//!    not already sounding, weighted `1 / (1 + |p - last|)` against the last
//!    melody pitch (or the octave-above root).
//!
//! [`ScriptedChordModel`] emits one-hot choices that place a piano triad on
//! every boundary it is offered, for exercising the scheduler.

use std::collections::BTreeMap;

use crate::emotion::VaPoint;
use crate::error::Result;
use crate::token::{Instrument, Token, MAX_SHIFT_MS, RESOLUTION_MS, VOCAB_SIZE};

use super::{ModelContext, NextTokenModel};

const MAJOR: [u8; 7] = [0, 2, 4, 5, 7, 9, 11];
const MINOR: [u8; 7] = [0, 2, 3, 5, 7, 8, 10];
const CHORD_DEGREES: [usize; 4] = [0, 3, 4, 5];
const CHORD_INSTRUMENT: Instrument = Instrument::Piano;
const MELODY_INSTRUMENT: Instrument = Instrument::Strings;
const CHORD_HOLD_PULSES: u64 = 4;
const BASE_CHORD_PROBABILITY: f64 = 0.02;
/// Offset below which the CHORD probability starts rising.
const CHORD_WINDOW_MS: f64 = 750.0;
const REST_SHARE: f64 = 0.25;

fn snap(ms: f64) -> u64 {
    let r = RESOLUTION_MS as f64;
    ((ms / r).round() * r) as u64
}

fn floor_grid(ms: u64) -> u64 {
    ms / RESOLUTION_MS as u64 * RESOLUTION_MS as u64
}

/// Step length for the reference model at a given arousal.
pub fn pulse_ms(arousal: Option<f64>) -> u64 {
    snap(600.0 - 250.0 * arousal.unwrap_or(0.0).clamp(-1.0, 1.0))
}

/// CHORD probability at a decision point; non-increasing in the offset and
/// 1 at offset 0.
pub fn chord_probability(offset_ms: u64) -> f64 {
    let closeness = (1.0 - offset_ms as f64 / CHORD_WINDOW_MS).clamp(0.0, 1.0);
    BASE_CHORD_PROBABILITY + (1.0 - BASE_CHORD_PROBABILITY) * closeness
}

fn one_hot(t: Token) -> Vec<f64> {
    let mut p = vec![0.0; VOCAB_SIZE];
    p[t.id() as usize] = 1.0;
    p
}

fn step_ms(offset_ms: u64, pulse: u64) -> u64 {
    let o = floor_grid(offset_ms);
    if o >= RESOLUTION_MS as u64 && o < pulse {
        o
    } else {
        pulse.min(MAX_SHIFT_MS as u64)
    }
}

/// What the reference model reads back from the history.
#[derive(Debug, Clone, Default)]
struct Replay {
    processed: usize,
    cursor_ms: u64,
    open: BTreeMap<(Instrument, u8), u64>,
    started_since_shift: bool,
    chord_permitted: bool,
    chords: usize,
    /// Triad ONs already emitted for the latest CHORD, while incomplete.
    triad_progress: Option<usize>,
    last_melody: Option<u8>,
}

impl Replay {
    fn push(&mut self, t: Token) {
        match t {
            Token::TimeShift(s) => {
                self.cursor_ms += s.ms() as u64;
                self.started_since_shift = false;
            }
            Token::Chord => {
                self.chords += 1;
                self.chord_permitted = false;
                self.triad_progress = Some(0);
            }
            Token::On { instrument, pitch } => {
                self.open.insert((instrument, pitch), self.cursor_ms);
                self.started_since_shift = true;
                self.chord_permitted = true;
                if instrument == CHORD_INSTRUMENT {
                    if let Some(n) = self.triad_progress {
                        self.triad_progress = (n + 1 < 3).then_some(n + 1);
                    }
                }
                if instrument == MELODY_INSTRUMENT {
                    self.last_melody = Some(pitch);
                }
            }
            Token::Off { instrument, pitch } => {
                self.open.remove(&(instrument, pitch));
            }
            _ => {}
        }
        self.processed += 1;
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceModel {
    key_root: u8,
    replay: Replay,
}

impl Default for ReferenceModel {
    fn default() -> Self {
        Self::new(60)
    }
}

impl ReferenceModel {
    /// `key_root` is clamped to 12..=103 so every chord and melody pitch
    /// stays in MIDI range.
    pub fn new(key_root: u8) -> Self {
        ReferenceModel {
            key_root: key_root.clamp(12, 103),
            replay: Replay {
                chord_permitted: true,
                ..Default::default()
            },
        }
    }

    fn scale(va: &VaPoint) -> &'static [u8; 7] {
        if va.valence.is_some_and(|v| v > 0.0) {
            &MAJOR
        } else {
            &MINOR
        }
    }

    fn scale_pitch(&self, scale: &[u8; 7], base: u8, index: usize) -> u8 {
        base + 12 * (index / 7) as u8 + scale[index % 7]
    }

    /// Triad for the `n`-th chord (0-based).
    pub fn triad(&self, va: &VaPoint, n: usize) -> [u8; 3] {
        let scale = Self::scale(va);
        let d = CHORD_DEGREES[n % CHORD_DEGREES.len()];
        let base = self.key_root - 12;
        [0, 2, 4].map(|k| self.scale_pitch(scale, base, d + k))
    }

    /// The pitches a melody ON may use.
    pub fn melody_pitches(&self, va: &VaPoint) -> Vec<u8> {
        let scale = Self::scale(va);
        (0..=7).map(|i| self.scale_pitch(scale, self.key_root + 12, i)).collect()
    }

    fn sync(&mut self, history: &[Token]) {
        if history.len() < self.replay.processed {
            *self = Self::new(self.key_root);
        }
        for &t in &history[self.replay.processed..] {
            self.replay.push(t);
        }
    }

    fn distribution(&self, ctx: &ModelContext<'_>) -> Vec<f64> {
        let r = &self.replay;
        match ctx.tokens.last() {
            None => return one_hot(Token::Start),
            Some(Token::Start) => return one_hot(Token::FewerInstruments),
            _ => {}
        }
        let pulse = pulse_ms(ctx.va.arousal);
        let offset = ctx.current_offset_ms().unwrap_or(u64::MAX);

        if let Some(n) = r.triad_progress {
            if n == 0 {
                if let Some((&(i, p), _)) = r.open.iter().find(|((i, _), _)| *i == CHORD_INSTRUMENT) {
                    return one_hot(Token::off(i, p));
                }
            }
            let triad = self.triad(&ctx.va, r.chords - 1);
            return one_hot(Token::on(CHORD_INSTRUMENT, triad[n]));
        }

        let due = r.open.iter().find(|(&(i, _), &onset)| {
            let hold = if i == CHORD_INSTRUMENT { CHORD_HOLD_PULSES * pulse } else { pulse };
            r.cursor_ms - onset >= hold
        });
        if let Some((&(i, p), _)) = due {
            return one_hot(Token::off(i, p));
        }

        let shift = Token::shift(step_ms(offset, pulse) as u32);
        if r.started_since_shift {
            return one_hot(shift);
        }

        let mut probs = vec![0.0; VOCAB_SIZE];
        let p_chord = if r.chord_permitted { chord_probability(offset) } else { 0.0 };
        probs[Token::Chord.id() as usize] = p_chord;
        let rest = 1.0 - p_chord;

        let last = r.last_melody.unwrap_or(self.key_root + 12);
        let melody: Vec<(u8, f64)> = self
            .melody_pitches(&ctx.va)
            .into_iter()
            .filter(|&p| !r.open.contains_key(&(MELODY_INSTRUMENT, p)))
            .map(|p| (p, 1.0 / (1.0 + (p as f64 - last as f64).abs())))
            .collect();
        let total: f64 = melody.iter().map(|m| m.1).sum();
        let melody_share = if melody.is_empty() { 0.0 } else { rest * (1.0 - REST_SHARE) };
        for (p, w) in melody {
            probs[Token::on(MELODY_INSTRUMENT, p).id() as usize] = melody_share * w / total;
        }
        probs[shift.id() as usize] += rest - melody_share;
        probs
    }
}

impl NextTokenModel for ReferenceModel {
    fn next_distribution(&mut self, ctx: &ModelContext<'_>) -> Result<Vec<f64>> {
        self.sync(ctx.tokens);
        Ok(self.distribution(ctx))
    }
}

/// Deterministic model that answers every boundary with a CHORD.
///
/// With notes sounding from an earlier grid step it releases them (lowest
/// first). Right after a CHORD it plays piano C4, E4, G4. When the offset is
/// zero, no CHORD has been emitted since the last TIMESHIFT and a CHORD is
/// permitted, it emits one. Otherwise it advances by the offset floored to the grid, between
/// 8 ms and one maximum shift.
#[derive(Debug, Clone, Default)]
pub struct ScriptedChordModel;

const SCRIPTED_TRIAD: [u8; 3] = [60, 64, 67];

impl NextTokenModel for ScriptedChordModel {
    fn next_distribution(&mut self, ctx: &ModelContext<'_>) -> Result<Vec<f64>> {
        let tokens = ctx.tokens;
        let Some(last) = tokens.last() else {
            return Ok(one_hot(Token::Start));
        };
        if *last == Token::Start {
            return Ok(one_hot(Token::FewerInstruments));
        }
        // everything since the last TIMESHIFT
        let tail_start = tokens.iter().rposition(|t| t.shift_ms().is_some()).map_or(0, |i| i + 1);
        let tail = &tokens[tail_start..];
        if let Some(pos) = tail.iter().rposition(|t| *t == Token::Chord) {
            let played = tail[pos + 1..].iter().filter(|t| t.is_on()).count();
            if played < SCRIPTED_TRIAD.len() {
                return Ok(one_hot(Token::on(CHORD_INSTRUMENT, SCRIPTED_TRIAD[played])));
            }
        }
        let mut open: BTreeMap<(Instrument, u8), usize> = BTreeMap::new();
        for t in tokens {
            match *t {
                Token::On { instrument, pitch } => *open.entry((instrument, pitch)).or_default() += 1,
                Token::Off { instrument, pitch } => {
                    if let Some(n) = open.get_mut(&(instrument, pitch)) {
                        *n -= 1;
                        if *n == 0 {
                            open.remove(&(instrument, pitch));
                        }
                    }
                }
                _ => {}
            }
        }
        // notes started in this grid step wait for the next one
        if let Some(&(i, p)) = open.keys().find(|&&(i, p)| !tail.contains(&Token::on(i, p))) {
            return Ok(one_hot(Token::off(i, p)));
        }
        let chord_here = tail.contains(&Token::Chord);
        let offset = ctx.current_offset_ms().unwrap_or(u64::MAX);
        let chord_permitted = tokens
            .iter()
            .rev()
            .find(|t| t.is_on() || **t == Token::Chord)
            .is_none_or(|t| t.is_on());
        if offset == 0 && !chord_here && chord_permitted {
            return Ok(one_hot(Token::Chord));
        }
        let step = floor_grid(offset).clamp(RESOLUTION_MS as u64, MAX_SHIFT_MS as u64);
        Ok(one_hot(Token::shift(step as u32)))
    }
}
