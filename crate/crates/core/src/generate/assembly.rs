//! Shape contract for a transformer's conditioned input.
//!
//! The input sequence is a valence slot, an arousal slot, then one
//! embedding per token. Each position also gets an additive vector of width
//! `d`: the first half encodes that position's boundary offset, the second
//! half its learned position. The two conditioning slots take the offset at
//! time 0. An unspecified valence or arousal uses a learned substitute
//! vector in place of its projection.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::token::Token;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VaSlot {
    /// Projection of the given value.
    Projected(f64),
    LearnedSubstitute,
}

impl VaSlot {
    fn from_value(v: Option<f64>) -> Self {
        v.map_or(VaSlot::LearnedSubstitute, VaSlot::Projected)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningInputs {
    pub valence: Option<f64>,
    pub arousal: Option<f64>,
    /// One offset per token, in seconds.
    pub offsets_s: Vec<f64>,
    /// Offset at time 0, given to the two conditioning slots.
    pub initial_offset_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputAssembly {
    pub sequence_length: usize,
    pub feature_dim: usize,
    pub offset_half: usize,
    pub positional_half: usize,
    pub valence_slot: VaSlot,
    pub arousal_slot: VaSlot,
    /// Offset feeding each position's offset encoding, slots included.
    pub position_offsets_s: Vec<f64>,
}

pub fn assemble_input(tokens: &[Token], cond: &ConditioningInputs, d: usize) -> Result<InputAssembly> {
    if d == 0 || !d.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("feature dimension {d} must be positive and even")));
    }
    if cond.offsets_s.len() != tokens.len() {
        return Err(Error::InvalidArgument(format!(
            "{} offsets for {} tokens",
            cond.offsets_s.len(),
            tokens.len()
        )));
    }
    let all_offsets = std::iter::once(&cond.initial_offset_s).chain(&cond.offsets_s);
    if let Some(bad) = all_offsets.clone().find(|o| !(o.is_finite() && **o >= 0.0)) {
        return Err(Error::InvalidArgument(format!("offset {bad} must be finite and non-negative")));
    }
    let mut position_offsets_s = vec![cond.initial_offset_s; 2];
    position_offsets_s.extend_from_slice(&cond.offsets_s);
    Ok(InputAssembly {
        sequence_length: tokens.len() + 2,
        feature_dim: d,
        offset_half: d / 2,
        positional_half: d / 2,
        valence_slot: VaSlot::from_value(cond.valence),
        arousal_slot: VaSlot::from_value(cond.arousal),
        position_offsets_s,
    })
}
