//! Boundary offsets: the remaining time from the current position to the
//! next pending boundary, capped at a maximum.
//!
//! Two routes compute the same values. [`GeneratorState`] advances one token
//! at a time as an autoregressive sampler does. [`offsets_for_sequence`]
//! handles a whole known sequence at once from its cumulative time grid, as
//! needed for training data.
//!
//! All arithmetic is on integer milliseconds. Boundaries given in seconds
//! are rounded to the nearest millisecond.
//!
//! Per token, in order: a TIMESHIFT advances the cursor; a CHORD consumes
//! every pending boundary `b` with `|c - b| < sensitivity`; every pending
//! boundary with `c - b > sensitivity` expires; then the offset
//! `clamp(min(b - c), 0, max_offset)` over still-pending boundaries is
//! recorded (`max_offset` when none remain).

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::token::Token;

pub const DEFAULT_SENSITIVITY_S: f64 = 1.0;
pub const DEFAULT_MAX_OFFSET_S: f64 = 4.0;

fn seconds_to_ms(s: f64) -> i64 {
    (s * 1000.0).round() as i64
}

fn ms_to_seconds(ms: i64) -> f64 {
    ms as f64 / 1000.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerParams {
    sensitivity_ms: i64,
    max_offset_ms: i64,
}

impl Default for SchedulerParams {
    fn default() -> Self {
        SchedulerParams::new(DEFAULT_SENSITIVITY_S, DEFAULT_MAX_OFFSET_S).unwrap()
    }
}

impl SchedulerParams {
    pub fn new(sensitivity_s: f64, max_offset_s: f64) -> Result<Self> {
        let sensitivity_ms = seconds_to_ms(sensitivity_s);
        let max_offset_ms = seconds_to_ms(max_offset_s);
        if !(sensitivity_s.is_finite() && sensitivity_ms > 0) {
            return Err(Error::InvalidArgument(format!("sensitivity {sensitivity_s} s must be positive")));
        }
        if !(max_offset_s.is_finite() && max_offset_ms > 0) {
            return Err(Error::InvalidArgument(format!("max offset {max_offset_s} s must be positive")));
        }
        Ok(SchedulerParams {
            sensitivity_ms,
            max_offset_ms,
        })
    }

    pub fn sensitivity_s(&self) -> f64 {
        ms_to_seconds(self.sensitivity_ms)
    }

    pub fn max_offset_s(&self) -> f64 {
        ms_to_seconds(self.max_offset_ms)
    }

    pub fn max_offset_ms(&self) -> u64 {
        self.max_offset_ms as u64
    }

    fn offset_ms(&self, nearest: Option<i64>, cursor: i64) -> u64 {
        match nearest {
            Some(b) => (b - cursor).clamp(0, self.max_offset_ms) as u64,
            None => self.max_offset_ms as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryState {
    Pending,
    Consumed,
    Expired,
}

/// Strictly increasing boundary times with a per-boundary state.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BoundaryList {
    times_ms: Vec<i64>,
    states: Vec<BoundaryState>,
}

impl BoundaryList {
    /// All boundaries start pending. Times must be finite, non-negative and
    /// strictly increasing after rounding to milliseconds.
    pub fn from_seconds(times_s: &[f64]) -> Result<Self> {
        let mut times_ms = Vec::with_capacity(times_s.len());
        for &t in times_s {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::InvalidArgument(format!("boundary {t} s must be finite and non-negative")));
            }
            let ms = seconds_to_ms(t);
            if times_ms.last().is_some_and(|&prev| ms <= prev) {
                return Err(Error::InvalidArgument(format!("boundary {t} s breaks strictly increasing order")));
            }
            times_ms.push(ms);
        }
        Ok(Self::from_sorted_ms(times_ms))
    }

    fn from_sorted_ms(times_ms: Vec<i64>) -> Self {
        let states = vec![BoundaryState::Pending; times_ms.len()];
        BoundaryList { times_ms, states }
    }

    /// Boundaries at the cursor positions of the CHORD tokens in a sequence.
    pub fn from_chord_positions(tokens: &[Token]) -> Self {
        let mut cursor = 0i64;
        let mut times = Vec::new();
        for t in tokens {
            match t {
                Token::TimeShift(s) => cursor += s.ms() as i64,
                Token::Chord if times.last() != Some(&cursor) => times.push(cursor),
                _ => {}
            }
        }
        Self::from_sorted_ms(times)
    }

    pub fn len(&self) -> usize {
        self.times_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_ms.is_empty()
    }

    pub fn times_s(&self) -> Vec<f64> {
        self.times_ms.iter().map(|&t| ms_to_seconds(t)).collect()
    }

    pub fn times_ms(&self) -> &[i64] {
        &self.times_ms
    }

    pub fn states(&self) -> &[BoundaryState] {
        &self.states
    }

    pub fn count(&self, state: BoundaryState) -> usize {
        self.states.iter().filter(|&&s| s == state).count()
    }

    fn nearest_pending(&self) -> Option<i64> {
        self.times_ms
            .iter()
            .zip(&self.states)
            .find(|(_, &s)| s == BoundaryState::Pending)
            .map(|(&t, _)| t)
    }

    /// One boundary per line, in seconds.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for &t in &self.times_ms {
            let _ = writeln!(out, "{:.3}", ms_to_seconds(t));
        }
        out
    }

    /// Parse one boundary (seconds) per line; blank lines and `#` comments
    /// are ignored.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut times = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let t: f64 = line
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("line {}: `{line}` is not a time in seconds", i + 1)))?;
            times.push(t);
        }
        Self::from_seconds(&times)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryEvent {
    pub boundary_s: f64,
    pub state: BoundaryState,
    pub cursor_s: f64,
    /// Index of the token being processed when the state changed.
    pub token_index: usize,
}

/// Mutable scheduling state for one generation session.
#[derive(Debug, Clone)]
pub struct GeneratorState {
    cursor_ms: u64,
    tokens: Vec<Token>,
    offsets_ms: Vec<u64>,
    boundaries: BoundaryList,
    events: Vec<BoundaryEvent>,
}

impl GeneratorState {
    pub fn new(boundaries: BoundaryList) -> Self {
        GeneratorState {
            cursor_ms: 0,
            tokens: Vec::new(),
            offsets_ms: Vec::new(),
            boundaries,
            events: Vec::new(),
        }
    }

    pub fn cursor_ms(&self) -> u64 {
        self.cursor_ms
    }

    pub fn cursor_s(&self) -> f64 {
        ms_to_seconds(self.cursor_ms as i64)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn offsets_ms(&self) -> &[u64] {
        &self.offsets_ms
    }

    pub fn offsets_s(&self) -> Vec<f64> {
        self.offsets_ms.iter().map(|&o| ms_to_seconds(o as i64)).collect()
    }

    pub fn boundaries(&self) -> &BoundaryList {
        &self.boundaries
    }

    /// Consumption and expiry events in the order they happened.
    pub fn events(&self) -> &[BoundaryEvent] {
        &self.events
    }

    pub fn into_parts(self) -> (Vec<Token>, Vec<u64>, BoundaryList) {
        (self.tokens, self.offsets_ms, self.boundaries)
    }

    /// Offset for the current cursor, in seconds.
    pub fn next_offset(&self, params: &SchedulerParams) -> f64 {
        ms_to_seconds(self.next_offset_ms(params) as i64)
    }

    pub fn next_offset_ms(&self, params: &SchedulerParams) -> u64 {
        params.offset_ms(self.boundaries.nearest_pending(), self.cursor_ms as i64)
    }

    fn mark(&mut self, state: BoundaryState, pred: impl Fn(i64) -> bool) {
        let c = self.cursor_ms as i64;
        let token_index = self.tokens.len();
        let b = &mut self.boundaries;
        for (i, &t) in b.times_ms.iter().enumerate() {
            if b.states[i] == BoundaryState::Pending && pred(t - c) {
                b.states[i] = state;
                self.events.push(BoundaryEvent {
                    boundary_s: ms_to_seconds(t),
                    state,
                    cursor_s: ms_to_seconds(c),
                    token_index,
                });
            }
        }
    }

    /// Expire every pending boundary the cursor has passed by more than the
    /// sensitivity.
    pub fn expire_missed(&mut self, params: &SchedulerParams) {
        let s = params.sensitivity_ms;
        self.mark(BoundaryState::Expired, |d| -d > s);
    }

    /// Feed one emitted token and record its offset.
    pub fn on_token(&mut self, token: Token, params: &SchedulerParams) {
        match token {
            Token::TimeShift(s) => self.cursor_ms += s.ms() as u64,
            Token::Chord => {
                let s = params.sensitivity_ms;
                self.mark(BoundaryState::Consumed, |d| d.abs() < s);
            }
            _ => {}
        }
        self.expire_missed(params);
        let offset = self.next_offset_ms(params);
        self.tokens.push(token);
        self.offsets_ms.push(offset);
    }
}

/// Offsets for a complete sequence, in milliseconds, computed from the
/// cumulative time grid instead of a running cursor.
///
/// Each boundary is independent: it stops counting at the first token where
/// a CHORD lands within the sensitivity window of it, or where the grid has
/// moved past it by more than the sensitivity. The offset at each token is
/// then the distance to the earliest boundary still counting.
pub fn offsets_for_sequence_ms(tokens: &[Token], boundaries: &BoundaryList, params: &SchedulerParams) -> Vec<u64> {
    let grid: Vec<i64> = tokens
        .iter()
        .scan(0i64, |c, t| {
            *c += t.shift_ms().unwrap_or(0) as i64;
            Some(*c)
        })
        .collect();
    let chords: Vec<(usize, i64)> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| **t == Token::Chord)
        .map(|(i, _)| (i, grid[i]))
        .collect();
    let s = params.sensitivity_ms;

    // first token index at which each pending boundary stops counting
    let mut retire: Vec<(usize, usize)> = Vec::with_capacity(boundaries.len());
    let mut active = BTreeSet::new();
    for (bi, (&b, &state)) in boundaries.times_ms.iter().zip(&boundaries.states).enumerate() {
        if state != BoundaryState::Pending {
            continue;
        }
        let expire_at = grid.partition_point(|&c| c - b <= s);
        let j = chords.partition_point(|&(_, c)| c <= b - s);
        let consume_at = chords.get(j).filter(|&&(_, c)| c < b + s).map_or(usize::MAX, |&(i, _)| i);
        retire.push((expire_at.min(consume_at), bi));
        active.insert((b, bi));
    }
    retire.sort_unstable();

    let mut next = 0;
    grid.iter()
        .enumerate()
        .map(|(i, &c)| {
            while next < retire.len() && retire[next].0 <= i {
                let bi = retire[next].1;
                active.remove(&(boundaries.times_ms[bi], bi));
                next += 1;
            }
            params.offset_ms(active.first().map(|&(b, _)| b), c)
        })
        .collect()
}

/// [`offsets_for_sequence_ms`] in seconds.
pub fn offsets_for_sequence(tokens: &[Token], boundaries: &BoundaryList, params: &SchedulerParams) -> Vec<f64> {
    offsets_for_sequence_ms(tokens, boundaries, params)
        .into_iter()
        .map(|o| ms_to_seconds(o as i64))
        .collect()
}
