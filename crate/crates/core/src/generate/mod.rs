//! Autoregressive generation against a pluggable next-token model.
//!
//! The loop starts from `START`, asks the model for a distribution over the
//! vocabulary, masks tokens that would break the event grammar, applies
//! temperature and top-k, samples with a seeded ChaCha8 generator and feeds
//! the token to the boundary scheduler. It stops once the time cursor
//! reaches the requested duration, so the last TIMESHIFT may overshoot by
//! less than one maximum shift.

mod assembly;
mod models;

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boundary::{BoundaryEvent, BoundaryList, BoundaryState, GeneratorState, SchedulerParams};
use crate::emotion::VaPoint;
use crate::error::{Error, Result};
use crate::token::{Instrument, Token, VOCAB_SIZE};

pub use assembly::{assemble_input, ConditioningInputs, InputAssembly, VaSlot};
pub use models::{chord_probability, pulse_ms, ReferenceModel, ScriptedChordModel};

/// Loss multiplier for CHORD targets during training. Recorded for training
/// configurations; nothing here trains.
pub const CHORD_LOSS_WEIGHT: f64 = 10.0;
pub const DEFAULT_TEMPERATURE: f64 = 1.0;
pub const DEFAULT_TOP_K: usize = 32;
pub const DEFAULT_MAX_TOKENS: usize = 200_000;
const SUM_TOLERANCE: f64 = 1e-6;

/// What a model sees at each step. `offsets_ms[i]` is the boundary offset
/// recorded after `tokens[i]`, so the last entry is the offset at the
/// current cursor.
#[derive(Debug, Clone, Copy)]
pub struct ModelContext<'a> {
    pub tokens: &'a [Token],
    pub offsets_ms: &'a [u64],
    pub va: VaPoint,
}

impl ModelContext<'_> {
    pub fn current_offset_ms(&self) -> Option<u64> {
        self.offsets_ms.last().copied()
    }
}

/// A next-token model. Implementations own per-session state, so one value
/// must not be shared between concurrent sessions.
pub trait NextTokenModel {
    /// Probabilities over the vocabulary, indexed by [`Token::id`]. They must
    /// be non-negative and sum to 1 within 1e-6.
    fn next_distribution(&mut self, ctx: &ModelContext<'_>) -> Result<Vec<f64>>;
}

impl<M: NextTokenModel + ?Sized> NextTokenModel for Box<M> {
    fn next_distribution(&mut self, ctx: &ModelContext<'_>) -> Result<Vec<f64>> {
        (**self).next_distribution(ctx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    /// `None` keeps every token.
    pub top_k: Option<usize>,
    pub seed: u64,
    /// Generation fails instead of looping forever past this many tokens.
    pub max_tokens: usize,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            temperature: DEFAULT_TEMPERATURE,
            top_k: Some(DEFAULT_TOP_K),
            seed: 0,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::InvalidArgument(format!("temperature {} must be positive", self.temperature)));
        }
        if self.top_k == Some(0) {
            return Err(Error::InvalidArgument("top-k must be positive".into()));
        }
        if self.max_tokens < 2 {
            return Err(Error::InvalidArgument("max_tokens must allow at least two tokens".into()));
        }
        Ok(())
    }
}

/// Incremental grammar tracking: which notes are open, whether a CHORD may
/// follow, and how many tokens have been seen.
#[derive(Debug, Clone, Default)]
pub struct GrammarState {
    open: BTreeMap<(Instrument, u8), usize>,
    len: usize,
    on_since_chord: bool,
}

impl GrammarState {
    pub fn new() -> Self {
        GrammarState {
            on_since_chord: true,
            ..Default::default()
        }
    }

    pub fn from_history(history: &[Token]) -> Self {
        let mut g = Self::new();
        for t in history {
            g.push(*t);
        }
        g
    }

    pub fn push(&mut self, token: Token) {
        match token {
            Token::On { instrument, pitch } => {
                *self.open.entry((instrument, pitch)).or_default() += 1;
                self.on_since_chord = true;
            }
            Token::Off { instrument, pitch } => {
                if let Some(n) = self.open.get_mut(&(instrument, pitch)) {
                    *n -= 1;
                    if *n == 0 {
                        self.open.remove(&(instrument, pitch));
                    }
                }
            }
            Token::Chord => self.on_since_chord = false,
            _ => {}
        }
        self.len += 1;
    }

    pub fn is_open(&self, instrument: Instrument, pitch: u8) -> bool {
        self.open.contains_key(&(instrument, pitch))
    }

    pub fn permits(&self, token: Token) -> bool {
        match token {
            Token::Pad | Token::Start => self.len == 0,
            Token::Off { instrument, pitch } => self.is_open(instrument, pitch),
            Token::Chord => self.on_since_chord,
            _ => true,
        }
    }

    /// One flag per vocabulary id.
    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![true; VOCAB_SIZE];
        m[Token::Pad.id() as usize] = self.len == 0;
        m[Token::Start.id() as usize] = self.len == 0;
        m[Token::Chord.id() as usize] = self.on_since_chord;
        for instrument in Instrument::ALL {
            for pitch in 0..128u8 {
                m[Token::off(instrument, pitch).id() as usize] = false;
            }
        }
        for &(instrument, pitch) in self.open.keys() {
            m[Token::off(instrument, pitch).id() as usize] = true;
        }
        m
    }
}

/// Tokens permitted after `history`: OFF only for open notes, PAD and START
/// only at position 0, and no second CHORD before an ON.
pub fn grammar_mask(history: &[Token]) -> Vec<bool> {
    GrammarState::from_history(history).mask()
}

fn validate_distribution(probs: &[f64]) -> Result<()> {
    if probs.len() != VOCAB_SIZE {
        return Err(Error::Generation(format!(
            "model returned {} probabilities, expected {VOCAB_SIZE}",
            probs.len()
        )));
    }
    if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::Generation(format!("model returned probability {p} for token id {i}")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::Generation(format!("model probabilities sum to {sum}")));
    }
    Ok(())
}

/// Masked, tempered, top-k filtered weights as `(id, weight)` pairs in
/// descending weight order (ties by id).
fn candidate_weights(probs: &[f64], mask: &[bool], params: &SamplingParams) -> Vec<(usize, f64)> {
    let pmax = probs
        .iter()
        .zip(mask)
        .filter(|(_, &ok)| ok)
        .map(|(&p, _)| p)
        .fold(0.0, f64::max);
    if pmax <= 0.0 {
        return Vec::new();
    }
    let inv_t = 1.0 / params.temperature;
    let mut cands: Vec<(usize, f64)> = probs
        .iter()
        .zip(mask)
        .enumerate()
        .filter(|(_, (&p, &ok))| ok && p > 0.0)
        // relative to the maximum so low temperatures do not underflow
        .map(|(i, (&p, _))| (i, (p / pmax).powf(inv_t)))
        .filter(|&(_, w)| w > 0.0)
        .collect();
    cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    if let Some(k) = params.top_k {
        cands.truncate(k);
    }
    cands
}

fn sample_token(
    probs: &[f64],
    grammar: &GrammarState,
    params: &SamplingParams,
    rng: &mut ChaCha8Rng,
    state: &GeneratorState,
) -> Result<Token> {
    validate_distribution(probs)?;
    let cands = candidate_weights(probs, &grammar.mask(), params);
    if cands.is_empty() {
        let last = state.tokens().last().map_or_else(|| "none".to_string(), Token::to_string);
        return Err(Error::Generation(format!(
            "no permitted token has positive probability at position {}, cursor {} ms, after {last}",
            state.tokens().len(),
            state.cursor_ms()
        )));
    }
    let dist = WeightedIndex::new(cands.iter().map(|c| c.1))
        .map_err(|e| Error::Generation(format!("sampling weights rejected: {e}")))?;
    let id = cands[dist.sample(rng)].0;
    Ok(Token::from_id(id as u32).expect("candidate ids come from the vocabulary"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationDiagnostics {
    pub tokens: usize,
    pub duration_s: f64,
    pub final_cursor_s: f64,
    pub boundaries: usize,
    pub consumed: usize,
    pub expired: usize,
    /// Still pending when generation stopped.
    pub unmet: usize,
    pub chord_tokens: usize,
    pub events: Vec<BoundaryEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub tokens: Vec<Token>,
    /// Offset recorded after each token, in milliseconds.
    pub offsets_ms: Vec<u64>,
    pub boundaries: BoundaryList,
    pub diagnostics: GenerationDiagnostics,
}

impl Generation {
    pub fn offsets_s(&self) -> Vec<f64> {
        self.offsets_ms.iter().map(|&o| o as f64 / 1000.0).collect()
    }
}

/// Generate until the cursor reaches `duration_s`.
pub fn generate<M: NextTokenModel + ?Sized>(
    model: &mut M,
    va: VaPoint,
    boundaries: BoundaryList,
    duration_s: f64,
    sampling: &SamplingParams,
    scheduler: &SchedulerParams,
) -> Result<Generation> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::InvalidArgument(format!("duration {duration_s} s must be positive")));
    }
    sampling.validate()?;
    let duration_ms = (duration_s * 1000.0).round() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let mut state = GeneratorState::new(boundaries);
    let mut grammar = GrammarState::new();
    state.on_token(Token::Start, scheduler);
    grammar.push(Token::Start);

    while state.cursor_ms() < duration_ms {
        if state.tokens().len() >= sampling.max_tokens {
            return Err(Error::Generation(format!(
                "token limit {} reached at cursor {} ms",
                sampling.max_tokens,
                state.cursor_ms()
            )));
        }
        let probs = model.next_distribution(&ModelContext {
            tokens: state.tokens(),
            offsets_ms: state.offsets_ms(),
            va,
        })?;
        let token = sample_token(&probs, &grammar, sampling, &mut rng, &state)?;
        state.expire_missed(scheduler);
        state.on_token(token, scheduler);
        grammar.push(token);
        debug_assert_eq!(state.tokens().len(), state.offsets_ms().len());
    }

    let diagnostics = GenerationDiagnostics {
        tokens: state.tokens().len(),
        duration_s,
        final_cursor_s: state.cursor_s(),
        boundaries: state.boundaries().len(),
        consumed: state.boundaries().count(BoundaryState::Consumed),
        expired: state.boundaries().count(BoundaryState::Expired),
        unmet: state.boundaries().count(BoundaryState::Pending),
        chord_tokens: state.tokens().iter().filter(|t| **t == Token::Chord).count(),
        events: state.events().to_vec(),
    };
    let (tokens, offsets_ms, boundaries) = state.into_parts();
    Ok(Generation {
        tokens,
        offsets_ms,
        boundaries,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(Vec<f64>);

    impl NextTokenModel for Fixed {
        fn next_distribution(&mut self, _: &ModelContext<'_>) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
    }

    fn one_hot(t: Token) -> Vec<f64> {
        let mut p = vec![0.0; VOCAB_SIZE];
        p[t.id() as usize] = 1.0;
        p
    }

    #[test]
    fn mask_examples() {
        let piano60 = Token::on(Instrument::Piano, 60);
        let m = grammar_mask(&[Token::Start, piano60]);
        assert!(m[Token::off(Instrument::Piano, 60).id() as usize]);
        assert!(!m[Token::off(Instrument::Piano, 61).id() as usize]);
        assert!(!m[Token::Start.id() as usize]);
        assert!(!m[Token::Pad.id() as usize]);

        let m = grammar_mask(&[Token::Start]);
        assert!(Instrument::ALL
            .iter()
            .all(|&i| (0..128).all(|p| !m[Token::off(i, p).id() as usize])));

        let m = grammar_mask(&[Token::Start, piano60, Token::Chord]);
        assert!(!m[Token::Chord.id() as usize]);
        assert!(m[Token::on(Instrument::Guitar, 50).id() as usize]);
        assert!(grammar_mask(&[])[Token::Start.id() as usize]);
    }

    #[test]
    fn mask_matches_permits() {
        let h = [Token::Start, Token::on(Instrument::Bass, 40), Token::Chord, Token::off(Instrument::Bass, 40)];
        let g = GrammarState::from_history(&h);
        let m = g.mask();
        for id in 0..VOCAB_SIZE as u32 {
            assert_eq!(m[id as usize], g.permits(Token::from_id(id).unwrap()), "id {id}");
        }
    }

    #[test]
    fn shifts_only_runs_to_duration() {
        let mut m = Fixed(one_hot(Token::shift(1000)));
        let g = generate(&mut m, VaPoint::default(), BoundaryList::default(), 3.5, &SamplingParams::default(), &SchedulerParams::default()).unwrap();
        assert_eq!(g.tokens.len(), 5);
        assert_eq!(g.diagnostics.final_cursor_s, 4.0);
        assert_eq!(g.offsets_ms.len(), g.tokens.len());
    }

    #[test]
    fn invalid_distributions_fail() {
        let sched = SchedulerParams::default();
        let params = SamplingParams::default();
        let mut short = Fixed(vec![1.0]);
        assert!(matches!(
            generate(&mut short, VaPoint::default(), BoundaryList::default(), 1.0, &params, &sched),
            Err(Error::Generation(_))
        ));
        let mut unnormalized = Fixed(vec![0.01; VOCAB_SIZE]);
        assert!(generate(&mut unnormalized, VaPoint::default(), BoundaryList::default(), 1.0, &params, &sched).is_err());
        // only an unopened OFF has mass: everything is masked
        let mut masked = Fixed(one_hot(Token::off(Instrument::Piano, 60)));
        let err = generate(&mut masked, VaPoint::default(), BoundaryList::default(), 1.0, &params, &sched).unwrap_err();
        assert!(err.to_string().contains("position 1"), "{err}");
    }

    #[test]
    fn token_limit() {
        let mut m = Fixed(one_hot(Token::Bar));
        let params = SamplingParams {
            max_tokens: 50,
            ..Default::default()
        };
        assert!(generate(&mut m, VaPoint::default(), BoundaryList::default(), 1.0, &params, &SchedulerParams::default()).is_err());
    }

    #[test]
    fn top_k_and_temperature() {
        let mut p = vec![0.0; VOCAB_SIZE];
        p[10] = 0.5;
        p[11] = 0.3;
        p[12] = 0.2;
        let mask = vec![true; VOCAB_SIZE];
        let k1 = SamplingParams {
            top_k: Some(1),
            ..Default::default()
        };
        assert_eq!(candidate_weights(&p, &mask, &k1), vec![(10, 1.0)]);
        let cold = SamplingParams {
            temperature: 0.5,
            top_k: None,
            ..Default::default()
        };
        let w = candidate_weights(&p, &mask, &cold);
        assert!((w[1].1 - 0.36).abs() < 1e-12);
        assert!((w[2].1 - 0.16).abs() < 1e-12);
        let tiny = SamplingParams {
            temperature: 1e-3,
            ..Default::default()
        };
        assert_eq!(candidate_weights(&p, &mask, &tiny)[0], (10, 1.0));
        assert!(SamplingParams { temperature: 0.0, ..Default::default() }.validate().is_err());
        assert!(SamplingParams { top_k: Some(0), ..Default::default() }.validate().is_err());
    }
}
