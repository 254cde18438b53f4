//! Event token vocabulary.
//!
//! Tokens are the unit of the event-based encoding: note-on / note-off per
//! instrument and pitch, time shifts on an 8 ms grid up to one second, and a
//! handful of structural markers.
//!
//! Integer ids are assigned in a fixed order so they are stable across runs:
//!
//! | ids         | tokens                                              |
//! |-------------|-----------------------------------------------------|
//! | 0..=5       | `PAD`, `START`, `BAR`, `CHORD`, `FEWER_INSTRUMENTS`, `MORE_INSTRUMENTS` |
//! | 6..=645     | `<INST>_ON_<pitch>`, instrument-major, pitch 0..=127 |
//! | 646..=1285  | `<INST>_OFF_<pitch>`, same layout                   |
//! | 1286..=1410 | `TIMESHIFT_8` .. `TIMESHIFT_1000`                   |
//!
//! Instruments are ordered bass, drums, guitar, piano, strings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time grid resolution in milliseconds.
pub const RESOLUTION_MS: u32 = 8;
/// Longest single time shift in milliseconds.
pub const MAX_SHIFT_MS: u32 = 1000;
pub const SHIFT_STEPS: u32 = MAX_SHIFT_MS / RESOLUTION_MS;

const SPECIAL_COUNT: u32 = 6;
const NOTE_TOKENS: u32 = Instrument::COUNT as u32 * 128;
const ON_BASE: u32 = SPECIAL_COUNT;
const OFF_BASE: u32 = ON_BASE + NOTE_TOKENS;
const SHIFT_BASE: u32 = OFF_BASE + NOTE_TOKENS;

/// Total number of token ids.
pub const VOCAB_SIZE: usize = (SHIFT_BASE + SHIFT_STEPS) as usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Instrument {
    Bass,
    Drums,
    Guitar,
    Piano,
    Strings,
}

impl Instrument {
    pub const COUNT: usize = 5;
    pub const ALL: [Instrument; 5] = [
        Instrument::Bass,
        Instrument::Drums,
        Instrument::Guitar,
        Instrument::Piano,
        Instrument::Strings,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Unpitched percussion; excluded from transposition.
    pub fn is_percussion(self) -> bool {
        self == Instrument::Drums
    }

    pub fn name(self) -> &'static str {
        match self {
            Instrument::Bass => "BASS",
            Instrument::Drums => "DRUMS",
            Instrument::Guitar => "GUITAR",
            Instrument::Piano => "PIANO",
            Instrument::Strings => "STRINGS",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|i| i.name() == name)
    }

    /// Bucket a General MIDI program number (0-based) into a category.
    ///
    /// Pianos, chromatic percussion and organs (0..=23) go to piano, guitars
    /// (24..=31) to guitar, basses (32..=39) to bass, and every other pitched
    /// program to strings. Channel 10 is handled by the caller.
    pub fn from_gm_program(program: u8) -> Self {
        match program {
            0..=23 => Instrument::Piano,
            24..=31 => Instrument::Guitar,
            32..=39 => Instrument::Bass,
            _ => Instrument::Strings,
        }
    }
}

impl fmt::Display for Instrument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A time shift length: a positive multiple of 8 ms, at most 1000 ms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Shift(u16);

impl Shift {
    pub const MAX: Shift = Shift(MAX_SHIFT_MS as u16);

    pub fn new(ms: u32) -> Option<Self> {
        (ms > 0 && ms <= MAX_SHIFT_MS && ms.is_multiple_of(RESOLUTION_MS)).then_some(Shift(ms as u16))
    }

    pub fn ms(self) -> u32 {
        self.0 as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Pad,
    Start,
    Bar,
    Chord,
    FewerInstruments,
    MoreInstruments,
    On { instrument: Instrument, pitch: u8 },
    Off { instrument: Instrument, pitch: u8 },
    TimeShift(Shift),
}

impl Token {
    /// Panics if `ms` is not a valid shift length.
    pub fn shift(ms: u32) -> Token {
        Token::TimeShift(Shift::new(ms).unwrap_or_else(|| panic!("invalid time shift {ms} ms")))
    }

    pub fn on(instrument: Instrument, pitch: u8) -> Token {
        Token::On { instrument, pitch }
    }

    pub fn off(instrument: Instrument, pitch: u8) -> Token {
        Token::Off { instrument, pitch }
    }

    pub fn is_on(&self) -> bool {
        matches!(self, Token::On { .. })
    }

    pub fn is_off(&self) -> bool {
        matches!(self, Token::Off { .. })
    }

    pub fn shift_ms(&self) -> Option<u32> {
        match self {
            Token::TimeShift(s) => Some(s.ms()),
            _ => None,
        }
    }

    /// Stable integer id. Panics on a pitch above 127.
    pub fn id(&self) -> u32 {
        let note = |base: u32, instrument: Instrument, pitch: u8| {
            assert!(pitch < 128, "pitch {pitch} out of MIDI range");
            base + instrument.index() as u32 * 128 + pitch as u32
        };
        match *self {
            Token::Pad => 0,
            Token::Start => 1,
            Token::Bar => 2,
            Token::Chord => 3,
            Token::FewerInstruments => 4,
            Token::MoreInstruments => 5,
            Token::On { instrument, pitch } => note(ON_BASE, instrument, pitch),
            Token::Off { instrument, pitch } => note(OFF_BASE, instrument, pitch),
            Token::TimeShift(s) => SHIFT_BASE + s.ms() / RESOLUTION_MS - 1,
        }
    }

    pub fn from_id(id: u32) -> Option<Token> {
        let note = |offset: u32| (Instrument::ALL[(offset / 128) as usize], (offset % 128) as u8);
        Some(match id {
            0 => Token::Pad,
            1 => Token::Start,
            2 => Token::Bar,
            3 => Token::Chord,
            4 => Token::FewerInstruments,
            5 => Token::MoreInstruments,
            id if id < OFF_BASE => {
                let (instrument, pitch) = note(id - ON_BASE);
                Token::On { instrument, pitch }
            }
            id if id < SHIFT_BASE => {
                let (instrument, pitch) = note(id - OFF_BASE);
                Token::Off { instrument, pitch }
            }
            id if (id as usize) < VOCAB_SIZE => {
                Token::TimeShift(Shift(((id - SHIFT_BASE + 1) * RESOLUTION_MS) as u16))
            }
            _ => return None,
        })
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Pad => f.write_str("PAD"),
            Token::Start => f.write_str("START"),
            Token::Bar => f.write_str("BAR"),
            Token::Chord => f.write_str("CHORD"),
            Token::FewerInstruments => f.write_str("FEWER_INSTRUMENTS"),
            Token::MoreInstruments => f.write_str("MORE_INSTRUMENTS"),
            Token::On { instrument, pitch } => write!(f, "{instrument}_ON_{pitch}"),
            Token::Off { instrument, pitch } => write!(f, "{instrument}_OFF_{pitch}"),
            Token::TimeShift(s) => write!(f, "TIMESHIFT_{}", s.ms()),
        }
    }
}

impl FromStr for Token {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "PAD" => return Ok(Token::Pad),
            "START" => return Ok(Token::Start),
            "BAR" => return Ok(Token::Bar),
            "CHORD" => return Ok(Token::Chord),
            "FEWER_INSTRUMENTS" => return Ok(Token::FewerInstruments),
            "MORE_INSTRUMENTS" => return Ok(Token::MoreInstruments),
            _ => {}
        }
        if let Some(ms) = s.strip_prefix("TIMESHIFT_") {
            let ms: u32 = ms.parse().map_err(|_| ())?;
            return Shift::new(ms).map(Token::TimeShift).ok_or(());
        }
        let mut parts = s.splitn(3, '_');
        let (Some(inst), Some(kind), Some(pitch)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(());
        };
        let instrument = Instrument::from_name(inst).ok_or(())?;
        let pitch: u8 = pitch.parse().map_err(|_| ())?;
        if pitch > 127 {
            return Err(());
        }
        match kind {
            "ON" => Ok(Token::On { instrument, pitch }),
            "OFF" => Ok(Token::Off { instrument, pitch }),
            _ => Err(()),
        }
    }
}

/// Render tokens in the one-token-per-line text format.
pub fn to_text(tokens: &[Token]) -> String {
    let mut out = String::with_capacity(tokens.len() * 12);
    for t in tokens {
        out.push_str(&t.to_string());
        out.push('\n');
    }
    out
}

/// Parse the line-based token format. Blank lines and `#` comments are skipped.
pub fn parse_text(text: &str) -> Result<Vec<Token>> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(line, l)| {
            l.parse().map_err(|_| Error::TokenParse {
                line,
                text: l.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub id: u32,
    pub name: String,
}

/// Every (id, name) pair in id order.
pub fn vocabulary_manifest() -> Vec<VocabEntry> {
    (0..VOCAB_SIZE as u32)
        .map(|id| VocabEntry {
            id,
            name: Token::from_id(id).expect("id in range").to_string(),
        })
        .collect()
}
