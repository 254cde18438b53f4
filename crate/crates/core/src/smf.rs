//! Standard MIDI File reading and writing (formats 0 and 1).
//!
//! Reading merges all tracks onto one absolute millisecond timeline using the
//! global tempo map. Program numbers are bucketed with
//! [`Instrument::from_gm_program`]; channel 10 is always drums. Note-ons are
//! paired with note-offs first-in first-out per (channel, key).

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::score::{bars_from_tempo, NoteEvent, ScoreTimeline, DEFAULT_TEMPO_BPM};
use crate::token::Instrument;

const DRUM_CHANNEL: u8 = 9;
const DEFAULT_US_PER_QN: u32 = 500_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    /// A note-on never released; it was closed at the end of its track.
    DanglingNote { channel: u8, pitch: u8, onset_ms: u64 },
    /// A note-off with no sounding note on that key.
    UnmatchedNoteOff { channel: u8, pitch: u8, tick: u64 },
    /// A chunk with an unrecognised id was skipped.
    UnknownChunk { offset: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedMidi {
    pub score: ScoreTimeline,
    pub warnings: Vec<ParseWarning>,
}

#[derive(Debug, Clone, Copy)]
enum Timing {
    Metrical { ppq: u16 },
    Timecode { ticks_per_second: f64 },
}

#[derive(Debug, Clone, Copy)]
enum ChannelEvent {
    NoteOn { key: u8, velocity: u8 },
    NoteOff { key: u8 },
    Program(u8),
}

#[derive(Debug, Clone, Copy)]
struct TimedChannelEvent {
    tick: u64,
    channel: u8,
    track: usize,
    event: ChannelEvent,
}

#[derive(Default)]
struct TrackData {
    events: Vec<TimedChannelEvent>,
    end_tick: u64,
}

#[derive(Default)]
struct Globals {
    /// (tick, microseconds per quarter note)
    tempos: Vec<(u64, u32)>,
    /// (tick, numerator, denominator power of two)
    time_sigs: Vec<(u64, u8, u8)>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::MidiParse {
            offset: self.pos,
            reason: reason.into(),
        }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(self.err(format!("need {n} bytes, {} left", self.remaining())));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn peek(&self) -> Result<u8> {
        self.bytes
            .get(self.pos)
            .copied()
            .ok_or_else(|| self.err("unexpected end of data"))
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn vlq(&mut self) -> Result<u32> {
        let start = self.pos;
        let mut value = 0u32;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | (b & 0x7F) as u32;
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(Error::MidiParse {
            offset: start,
            reason: "variable-length quantity longer than 4 bytes".into(),
        })
    }

    fn data_byte(&mut self) -> Result<u8> {
        let b = self.u8()?;
        if b & 0x80 != 0 {
            self.pos -= 1;
            return Err(self.err(format!("expected data byte, found status {b:#04x}")));
        }
        Ok(b)
    }
}

/// Parse a format 0 or 1 Standard MIDI File.
pub fn parse_midi(bytes: &[u8]) -> Result<ParsedMidi> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).map_err(|_| r.err("missing MThd header"))? != b"MThd" {
        return Err(Error::MidiParse {
            offset: 0,
            reason: "missing MThd header".into(),
        });
    }
    let header_len = r.u32()? as usize;
    if header_len < 6 {
        return Err(r.err(format!("header length {header_len} shorter than 6")));
    }
    let format_pos = r.pos;
    let format = r.u16()?;
    let declared_tracks = r.u16()?;
    let division = r.u16()?;
    r.take(header_len - 6)?;
    if format > 1 {
        return Err(Error::MidiParse {
            offset: format_pos,
            reason: format!("unsupported SMF format {format}"),
        });
    }
    let timing = if division & 0x8000 != 0 {
        let fps = -((division >> 8) as u8 as i8) as i32;
        let fps = match fps {
            24 | 25 | 30 => fps as f64,
            29 => 29.97,
            _ => return Err(Error::MidiParse {
                offset: format_pos + 4,
                reason: format!("invalid SMPTE frame rate {fps}"),
            }),
        };
        let tpf = (division & 0xFF) as f64;
        Timing::Timecode {
            ticks_per_second: fps * tpf,
        }
    } else {
        if division == 0 {
            return Err(Error::MidiParse {
                offset: format_pos + 4,
                reason: "zero ticks per quarter note".into(),
            });
        }
        Timing::Metrical { ppq: division }
    };

    let mut warnings = Vec::new();
    let mut globals = Globals::default();
    let mut tracks = Vec::new();
    while r.remaining() > 0 {
        if r.remaining() < 8 {
            return Err(r.err("truncated chunk header"));
        }
        let chunk_pos = r.pos;
        let id = r.take(4)?;
        let len = r.u32()? as usize;
        if r.remaining() < len {
            return Err(Error::MidiParse {
                offset: chunk_pos,
                reason: format!("chunk length {len} exceeds remaining {} bytes", r.remaining()),
            });
        }
        let body_start = r.pos;
        let body = r.take(len)?;
        if id == b"MTrk" {
            let track = parse_track(body, body_start, tracks.len(), &mut globals)?;
            tracks.push(track);
        } else {
            warnings.push(ParseWarning::UnknownChunk { offset: chunk_pos });
        }
    }
    if tracks.len() < declared_tracks as usize {
        return Err(r.err(format!(
            "header declares {declared_tracks} tracks, found {}",
            tracks.len()
        )));
    }

    let tempo_map = TempoMap::new(timing, &globals.tempos);
    let first_tempo = globals
        .tempos
        .iter()
        .min_by_key(|(tick, _)| *tick)
        .map(|&(_, us)| 60_000_000.0 / us as f64)
        .unwrap_or(DEFAULT_TEMPO_BPM);

    let (notes, end_tick) = pair_notes(&tracks, &tempo_map, &mut warnings);
    let bars = if notes.is_empty() {
        Vec::new()
    } else {
        match timing {
            Timing::Metrical { ppq } => bar_ticks(ppq, &globals.time_sigs, end_tick)
                .into_iter()
                .map(|t| tempo_map.ms(t))
                .collect(),
            Timing::Timecode { .. } => {
                let end_ms = tempo_map.ms(end_tick);
                let mut b = bars_from_tempo(first_tempo, end_ms);
                b.retain(|&t| t < end_ms);
                b
            }
        }
    };
    let score = ScoreTimeline::new(notes, first_tempo, bars)?;
    Ok(ParsedMidi { score, warnings })
}

fn parse_track(body: &[u8], base: usize, index: usize, globals: &mut Globals) -> Result<TrackData> {
    let mut r = Reader { bytes: body, pos: 0 };
    let wrap = |e: Error| match e {
        Error::MidiParse { offset, reason } => Error::MidiParse {
            offset: offset + base,
            reason,
        },
        e => e,
    };
    let mut track = TrackData::default();
    let mut tick = 0u64;
    let mut running: Option<u8> = None;
    while r.remaining() > 0 {
        tick += r.vlq().map_err(wrap)? as u64;
        let first = r.peek().map_err(wrap)?;
        let status = if first & 0x80 != 0 {
            r.pos += 1;
            first
        } else {
            running.ok_or_else(|| wrap(r.err("data byte without running status")))?
        };
        match status {
            0x80..=0xEF => {
                running = Some(status);
                let channel = status & 0x0F;
                let a = r.data_byte().map_err(wrap)?;
                let b = if matches!(status & 0xF0, 0xC0 | 0xD0) {
                    0
                } else {
                    r.data_byte().map_err(wrap)?
                };
                let event = match status & 0xF0 {
                    0x80 => Some(ChannelEvent::NoteOff { key: a }),
                    0x90 if b == 0 => Some(ChannelEvent::NoteOff { key: a }),
                    0x90 => Some(ChannelEvent::NoteOn { key: a, velocity: b }),
                    0xC0 => Some(ChannelEvent::Program(a)),
                    _ => None,
                };
                if let Some(event) = event {
                    track.events.push(TimedChannelEvent {
                        tick,
                        channel,
                        track: index,
                        event,
                    });
                }
            }
            0xF0 | 0xF7 => {
                running = None;
                let len = r.vlq().map_err(wrap)? as usize;
                r.take(len).map_err(wrap)?;
            }
            0xFF => {
                running = None;
                let kind = r.u8().map_err(wrap)?;
                let len = r.vlq().map_err(wrap)? as usize;
                let data = r.take(len).map_err(wrap)?;
                match kind {
                    0x51 if len == 3 => {
                        let us = u32::from_be_bytes([0, data[0], data[1], data[2]]);
                        if us > 0 {
                            globals.tempos.push((tick, us));
                        }
                    }
                    0x58 if len >= 2 => globals.time_sigs.push((tick, data[0], data[1])),
                    0x2F => break,
                    _ => {}
                }
            }
            _ => return Err(wrap(r.err(format!("invalid status byte {status:#04x}")))),
        }
    }
    track.end_tick = tick;
    Ok(track)
}

/// Onset tick, velocity, instrument and track of a sounding note.
type OpenNote = (u64, u8, Instrument, usize);

fn pair_notes(
    tracks: &[TrackData],
    tempo_map: &TempoMap,
    warnings: &mut Vec<ParseWarning>,
) -> (Vec<NoteEvent>, u64) {
    let mut events: Vec<TimedChannelEvent> = tracks.iter().flat_map(|t| t.events.iter().copied()).collect();
    // stable: same-tick events keep track order, then file order
    events.sort_by_key(|e| (e.tick, e.track));

    let mut programs = [0u8; 16];
    let mut open: HashMap<(u8, u8), VecDeque<OpenNote>> = HashMap::new();
    let mut notes = Vec::new();
    let mut end_tick = 0;
    let push = |instrument, key, velocity, on: u64, off: u64, notes: &mut Vec<NoteEvent>| {
        let (onset_ms, offset_ms) = (tempo_map.ms(on), tempo_map.ms(off));
        if offset_ms > onset_ms {
            notes.push(NoteEvent {
                instrument,
                pitch: key,
                onset_ms,
                offset_ms,
                velocity,
            });
        }
    };
    for e in &events {
        match e.event {
            ChannelEvent::Program(p) => programs[e.channel as usize] = p,
            ChannelEvent::NoteOn { key, velocity } => {
                let instrument = if e.channel == DRUM_CHANNEL {
                    Instrument::Drums
                } else {
                    Instrument::from_gm_program(programs[e.channel as usize])
                };
                open.entry((e.channel, key))
                    .or_default()
                    .push_back((e.tick, velocity, instrument, e.track));
            }
            ChannelEvent::NoteOff { key } => {
                match open.get_mut(&(e.channel, key)).and_then(VecDeque::pop_front) {
                    Some((on, velocity, instrument, _)) => {
                        end_tick = end_tick.max(e.tick);
                        push(instrument, key, velocity, on, e.tick, &mut notes);
                    }
                    None => warnings.push(ParseWarning::UnmatchedNoteOff {
                        channel: e.channel,
                        pitch: key,
                        tick: e.tick,
                    }),
                }
            }
        }
    }
    let mut dangling: Vec<_> = open
        .into_iter()
        .flat_map(|((channel, key), q)| q.into_iter().map(move |n| (channel, key, n)))
        .collect();
    dangling.sort_by_key(|&(channel, key, (tick, ..))| (tick, channel, key));
    for (channel, key, (on, velocity, instrument, track)) in dangling {
        let off = tracks[track].end_tick.max(on);
        warnings.push(ParseWarning::DanglingNote {
            channel,
            pitch: key,
            onset_ms: tempo_map.ms(on),
        });
        end_tick = end_tick.max(off);
        push(instrument, key, velocity, on, off, &mut notes);
    }
    (notes, end_tick)
}

/// Bar start ticks before `end_tick`, honouring time-signature changes and
/// defaulting to 4/4.
fn bar_ticks(ppq: u16, time_sigs: &[(u64, u8, u8)], end_tick: u64) -> Vec<u64> {
    let mut sigs: Vec<(u64, u8, u8)> = time_sigs.to_vec();
    sigs.sort_by_key(|s| s.0);
    let bar_len = |num: u8, den_pow: u8| -> u64 {
        let len = (num as u64 * ppq as u64 * 4) >> den_pow.min(6);
        len.max(1)
    };
    let mut out = Vec::new();
    let mut current = bar_len(4, 2);
    let mut next_sig = 0;
    while next_sig < sigs.len() && sigs[next_sig].0 == 0 {
        current = bar_len(sigs[next_sig].1, sigs[next_sig].2);
        next_sig += 1;
    }
    let mut tick = 0u64;
    while tick < end_tick {
        out.push(tick);
        let mut next = tick + current;
        // a time signature change starts a new bar where it occurs
        while next_sig < sigs.len() && sigs[next_sig].0 <= next {
            let (at, num, den) = sigs[next_sig];
            if at > tick {
                next = at;
            }
            current = bar_len(num, den);
            next_sig += 1;
        }
        tick = next;
    }
    out
}

struct TempoMap {
    timing: Timing,
    /// (start tick, start time in us*ppq units, us per quarter note)
    segments: Vec<(u64, u128, u32)>,
}

impl TempoMap {
    fn new(timing: Timing, tempos: &[(u64, u32)]) -> Self {
        let mut changes = tempos.to_vec();
        changes.sort_by_key(|t| t.0);
        let mut segments = vec![(0u64, 0u128, DEFAULT_US_PER_QN)];
        for (tick, us) in changes {
            let &(t0, acc, us0) = segments.last().unwrap();
            let acc = acc + (tick - t0) as u128 * us0 as u128;
            if tick == t0 {
                segments.last_mut().unwrap().2 = us;
            } else {
                segments.push((tick, acc, us));
            }
        }
        TempoMap { timing, segments }
    }

    fn ms(&self, tick: u64) -> u64 {
        match self.timing {
            Timing::Metrical { ppq } => {
                let i = self.segments.partition_point(|s| s.0 <= tick) - 1;
                let (t0, acc, us) = self.segments[i];
                let scaled = acc + (tick - t0) as u128 * us as u128;
                let denom = ppq as u128 * 1000;
                ((scaled + denom / 2) / denom) as u64
            }
            Timing::Timecode { ticks_per_second } => {
                (tick as f64 * 1000.0 / ticks_per_second).round() as u64
            }
        }
    }
}

fn instrument_channel(instrument: Instrument) -> (u8, Option<u8>) {
    match instrument {
        Instrument::Bass => (0, Some(33)),
        Instrument::Guitar => (1, Some(25)),
        Instrument::Piano => (2, Some(0)),
        Instrument::Strings => (3, Some(48)),
        Instrument::Drums => (DRUM_CHANNEL, None),
    }
}

fn write_vlq(out: &mut Vec<u8>, mut value: u32) {
    let mut buf = [0u8; 4];
    let mut n = 0;
    loop {
        buf[n] = (value & 0x7F) as u8;
        n += 1;
        value >>= 7;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(buf[i] | if i > 0 { 0x80 } else { 0 });
    }
}

fn write_chunk(out: &mut Vec<u8>, id: &[u8; 4], body: &[u8]) {
    out.extend_from_slice(id);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(body);
}

/// Serialize a score as a format 1 file: a conductor track followed by one
/// track per instrument present.
///
/// When the tempo allows it the division is chosen so that one tick is
/// exactly one millisecond; otherwise 480 ticks per quarter note is used.
pub fn write_midi(score: &ScoreTimeline) -> Vec<u8> {
    let us_per_qn = (60_000_000.0 / score.tempo_bpm()).round().clamp(1.0, 0xFF_FFFF as f64) as u32;
    let ppq: u16 = if us_per_qn.is_multiple_of(1000) && us_per_qn / 1000 <= 0x7FFF {
        (us_per_qn / 1000) as u16
    } else {
        480
    };
    let to_tick = |ms: u64| -> u64 {
        let num = ms as u128 * 1000 * ppq as u128;
        let den = us_per_qn as u128;
        ((num + den / 2) / den) as u64
    };

    let instruments = score.instruments();
    let mut out = Vec::new();
    let mut header = Vec::new();
    header.extend_from_slice(&1u16.to_be_bytes());
    header.extend_from_slice(&(instruments.len() as u16 + 1).to_be_bytes());
    header.extend_from_slice(&ppq.to_be_bytes());
    write_chunk(&mut out, b"MThd", &header);

    let mut conductor = Vec::new();
    conductor.extend_from_slice(&[0x00, 0xFF, 0x58, 0x04, 4, 2, 24, 8]);
    conductor.extend_from_slice(&[0x00, 0xFF, 0x51, 0x03]);
    conductor.extend_from_slice(&us_per_qn.to_be_bytes()[1..]);
    conductor.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
    write_chunk(&mut out, b"MTrk", &conductor);

    for instrument in instruments {
        let (channel, program) = instrument_channel(instrument);
        // (tick, is_on, pitch, velocity); offs sort before ons at equal ticks
        let mut events: Vec<(u64, bool, u8, u8)> = score
            .notes()
            .iter()
            .filter(|n| n.instrument == instrument)
            .flat_map(|n| {
                [
                    (to_tick(n.onset_ms), true, n.pitch, n.velocity),
                    (to_tick(n.offset_ms), false, n.pitch, 0),
                ]
            })
            .collect();
        events.sort();
        let mut body = Vec::new();
        if let Some(p) = program {
            body.extend_from_slice(&[0x00, 0xC0 | channel, p]);
        }
        let mut last = 0u64;
        for (tick, is_on, pitch, velocity) in events {
            write_vlq(&mut body, (tick - last) as u32);
            last = tick;
            if is_on {
                body.extend_from_slice(&[0x90 | channel, pitch, velocity]);
            } else {
                body.extend_from_slice(&[0x80 | channel, pitch, 64]);
            }
        }
        body.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
        write_chunk(&mut out, b"MTrk", &body);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smf(format: u16, ppq: u16, tracks: &[Vec<u8>]) -> Vec<u8> {
        let mut out = Vec::new();
        let mut h = Vec::new();
        h.extend_from_slice(&format.to_be_bytes());
        h.extend_from_slice(&(tracks.len() as u16).to_be_bytes());
        h.extend_from_slice(&ppq.to_be_bytes());
        write_chunk(&mut out, b"MThd", &h);
        for t in tracks {
            write_chunk(&mut out, b"MTrk", t);
        }
        out
    }

    #[test]
    fn vlq_encoding() {
        for (v, bytes) in [
            (0u32, vec![0x00]),
            (0x7F, vec![0x7F]),
            (0x80, vec![0x81, 0x00]),
            (0x3FFF, vec![0xFF, 0x7F]),
            (0x0FFF_FFFF, vec![0xFF, 0xFF, 0xFF, 0x7F]),
        ] {
            let mut out = Vec::new();
            write_vlq(&mut out, v);
            assert_eq!(out, bytes);
            let mut r = Reader { bytes: &out, pos: 0 };
            assert_eq!(r.vlq().unwrap(), v);
        }
    }

    #[test]
    fn one_beat_c4_at_120_bpm() {
        // 480 ppq, tempo 500000 us/qn, note on at 0, off after 480 ticks
        let track = vec![
            0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20, //
            0x00, 0xC0, 0x00, //
            0x00, 0x90, 60, 100, //
            0x83, 0x60, 0x80, 60, 0, //
            0x00, 0xFF, 0x2F, 0x00,
        ];
        let parsed = parse_midi(&smf(0, 480, &[track])).unwrap();
        let notes = parsed.score.notes();
        assert_eq!(notes.len(), 1);
        assert_eq!(notes[0].instrument, Instrument::Piano);
        assert_eq!((notes[0].pitch, notes[0].onset_ms, notes[0].offset_ms), (60, 0, 500));
        assert_eq!(parsed.score.tempo_bpm(), 120.0);
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn running_status_and_velocity_zero_off() {
        let track = vec![
            0x00, 0x90, 60, 100, //
            0x60, 60, 0, // running status, vel 0 => off after 96 ticks
            0x00, 64, 90, //
            0x60, 64, 0, //
            0x00, 0xFF, 0x2F, 0x00,
        ];
        let parsed = parse_midi(&smf(0, 96, &[track])).unwrap();
        let n = parsed.score.notes();
        assert_eq!(n.len(), 2);
        assert_eq!((n[0].onset_ms, n[0].offset_ms), (0, 500));
        assert_eq!((n[1].onset_ms, n[1].offset_ms, n[1].velocity), (500, 1000, 90));
    }

    #[test]
    fn empty_file_has_no_notes() {
        let parsed = parse_midi(&smf(1, 480, &[vec![0x00, 0xFF, 0x2F, 0x00]])).unwrap();
        assert!(parsed.score.notes().is_empty());
        assert!(parsed.score.bar_marks_ms().is_empty());
        assert_eq!(parsed.score.tempo_bpm(), 120.0);
    }

    #[test]
    fn channel_ten_is_drums() {
        let track = vec![0x00, 0xC9, 0x00, 0x00, 0x99, 42, 100, 0x60, 0x89, 42, 0, 0x00, 0xFF, 0x2F, 0x00];
        let parsed = parse_midi(&smf(0, 96, &[track])).unwrap();
        assert_eq!(parsed.score.notes()[0].instrument, Instrument::Drums);
    }

    #[test]
    fn programs_bucket_across_tracks() {
        let conductor = vec![0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20, 0x00, 0xFF, 0x2F, 0x00];
        let bass = vec![0x00, 0xC0, 33, 0x00, 0x90, 40, 80, 0x60, 0x80, 40, 0, 0x00, 0xFF, 0x2F, 0x00];
        let guitar = vec![0x00, 0xC1, 26, 0x00, 0x91, 52, 80, 0x60, 0x81, 52, 0, 0x00, 0xFF, 0x2F, 0x00];
        let parsed = parse_midi(&smf(1, 96, &[conductor, bass, guitar])).unwrap();
        let inst: Vec<_> = parsed.score.notes().iter().map(|n| n.instrument).collect();
        assert_eq!(inst, vec![Instrument::Bass, Instrument::Guitar]);
    }

    #[test]
    fn dangling_note_closed_at_track_end() {
        let track = vec![0x00, 0x90, 60, 100, 0x81, 0x40, 0xFF, 0x2F, 0x00];
        let parsed = parse_midi(&smf(0, 96, &[track])).unwrap();
        assert_eq!(parsed.score.notes()[0].offset_ms, 1000);
        assert!(matches!(parsed.warnings[0], ParseWarning::DanglingNote { pitch: 60, .. }));
    }

    #[test]
    fn tempo_change_mid_file() {
        // 96 ppq; 120 bpm for first beat, then 60 bpm
        let track = vec![
            0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20, //
            0x00, 0x90, 60, 100, //
            0x60, 0xFF, 0x51, 0x03, 0x0F, 0x42, 0x40, //
            0x60, 0x80, 60, 0, //
            0x00, 0xFF, 0x2F, 0x00,
        ];
        let parsed = parse_midi(&smf(0, 96, &[track])).unwrap();
        assert_eq!(parsed.score.notes()[0].offset_ms, 1500);
        assert_eq!(parsed.score.tempo_bpm(), 120.0);
    }

    #[test]
    fn error_offsets() {
        let err = parse_midi(b"RIFF\0\0\0\x06").unwrap_err();
        assert!(matches!(err, Error::MidiParse { offset: 0, .. }));

        let mut bytes = smf(2, 96, &[vec![0x00, 0xFF, 0x2F, 0x00]]);
        assert!(matches!(parse_midi(&bytes).unwrap_err(), Error::MidiParse { offset: 8, .. }));

        // track chunk claims more bytes than exist
        bytes = smf(0, 96, &[vec![0x00, 0xFF, 0x2F, 0x00]]);
        let len_pos = 14 + 4;
        bytes[len_pos + 3] = 50;
        assert!(matches!(parse_midi(&bytes).unwrap_err(), Error::MidiParse { offset: 14, .. }));

        // data byte with no running status, at byte 14 + 8 + 1
        bytes = smf(0, 96, &[vec![0x00, 0x40, 0x40]]);
        assert!(matches!(parse_midi(&bytes).unwrap_err(), Error::MidiParse { offset: 23, .. }));
    }

    #[test]
    fn time_signature_bars() {
        // 3/4 at 96 ppq: bars every 288 ticks
        assert_eq!(bar_ticks(96, &[(0, 3, 2)], 700), vec![0, 288, 576]);
        assert_eq!(bar_ticks(96, &[], 800), vec![0, 384, 768]);
        // switch to 2/4 at tick 384
        assert_eq!(bar_ticks(96, &[(384, 2, 2)], 800), vec![0, 384, 576, 768]);
    }

    #[test]
    fn write_then_parse_is_exact_at_integer_tick_tempo() {
        let notes = vec![
            NoteEvent { instrument: Instrument::Piano, pitch: 60, onset_ms: 0, offset_ms: 808, velocity: 90 },
            NoteEvent { instrument: Instrument::Drums, pitch: 36, onset_ms: 16, offset_ms: 24, velocity: 100 },
            NoteEvent { instrument: Instrument::Strings, pitch: 72, onset_ms: 1000, offset_ms: 3000, velocity: 70 },
        ];
        let score = ScoreTimeline::new(notes, 120.0, vec![]).unwrap();
        let parsed = parse_midi(&write_midi(&score)).unwrap();
        assert_eq!(parsed.score.notes(), score.notes());
        assert_eq!(parsed.score.bar_marks_ms(), &[0, 2000]);
    }
}
