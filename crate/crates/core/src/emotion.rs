//! Mapping between categorical emotion probabilities and valence-arousal
//! conditioning values.
//!
//! Each of the six basic emotions has a valence and an arousal distribution
//! (mean and standard deviation, see [`VaTable::standard`]). A classifier's
//! probability vector weights these into a Gaussian mixture. Conditioning
//! values come either from the mixture mean or from a draw: pick a category
//! by weight, then draw valence and arousal independently from its Gaussians.
//!
//! A single coefficient rescales every component so that the largest
//! absolute mean in the table equals a chosen target, widening or narrowing
//! the range of emotions the generator is asked for. Standard deviations are
//! scaled along with the means unless [`SdScaling::Unscaled`] is chosen.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TARGET_MAX: f64 = 0.8;
const SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Anger,
    Disgust,
    Fear,
    Joy,
    Sadness,
    Surprise,
}

impl Emotion {
    pub const ALL: [Emotion; 6] = [
        Emotion::Anger,
        Emotion::Disgust,
        Emotion::Fear,
        Emotion::Joy,
        Emotion::Sadness,
        Emotion::Surprise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Anger => "anger",
            Emotion::Disgust => "disgust",
            Emotion::Fear => "fear",
            Emotion::Joy => "joy",
            Emotion::Sadness => "sadness",
            Emotion::Surprise => "surprise",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Emotion::ALL
            .into_iter()
            .find(|e| e.name() == lower)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown emotion `{s}`")))
    }
}

/// Probabilities over the six emotions, in [`Emotion::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmotionDistribution([f64; 6]);

impl EmotionDistribution {
    pub fn new(probabilities: [f64; 6]) -> Result<Self> {
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "emotion probabilities must be finite and non-negative: {probabilities:?}"
            )));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!("emotion probabilities sum to {sum}, not 1")));
        }
        Ok(EmotionDistribution(probabilities))
    }

    pub fn one_hot(e: Emotion) -> Self {
        let mut p = [0.0; 6];
        p[e as usize] = 1.0;
        EmotionDistribution(p)
    }

    pub fn uniform() -> Self {
        EmotionDistribution([1.0 / 6.0; 6])
    }

    pub fn get(&self, e: Emotion) -> f64 {
        self.0[e as usize]
    }

    pub fn weights(&self) -> &[f64; 6] {
        &self.0
    }

    /// Parse six named probabilities, one per line, as `name value`,
    /// `name: value` or `name = value`. `#` starts a comment. A JSON object
    /// with the six names as keys is accepted too.
    pub fn parse_text(text: &str) -> Result<Self> {
        let body = text.trim();
        let body = body
            .strip_prefix('{')
            .and_then(|b| b.strip_suffix('}'))
            .map(|b| b.replace(',', "\n"))
            .unwrap_or_else(|| body.to_string());
        let mut probs = [None; 6];
        for (i, raw) in body.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::InvalidArgument(format!("emotion file line {}: cannot parse `{}`", i + 1, raw.trim()));
            let mut parts = line.splitn(2, |c: char| c == ':' || c == '=' || c.is_whitespace());
            let name = parts.next().ok_or_else(bad)?.trim().trim_matches('"');
            let value: f64 = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            let e: Emotion = name.parse()?;
            if probs[e as usize].replace(value).is_some() {
                return Err(Error::InvalidArgument(format!("emotion `{e}` given twice")));
            }
        }
        let mut out = [0.0; 6];
        for e in Emotion::ALL {
            out[e as usize] = probs[e as usize]
                .ok_or_else(|| Error::InvalidArgument(format!("emotion `{e}` missing")))?;
        }
        Self::new(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaStats {
    pub valence_mean: f64,
    pub valence_sd: f64,
    pub arousal_mean: f64,
    pub arousal_sd: f64,
}

impl VaStats {
    const fn new(valence_mean: f64, valence_sd: f64, arousal_mean: f64, arousal_sd: f64) -> Self {
        VaStats {
            valence_mean,
            valence_sd,
            arousal_mean,
            arousal_sd,
        }
    }

    fn scaled(&self, mean_scale: f64, sd_scale: f64) -> Self {
        VaStats {
            valence_mean: self.valence_mean * mean_scale,
            valence_sd: self.valence_sd * sd_scale,
            arousal_mean: self.arousal_mean * mean_scale,
            arousal_sd: self.arousal_sd * sd_scale,
        }
    }
}

/// Per-emotion valence/arousal statistics, in [`Emotion::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaTable {
    rows: [VaStats; 6],
}

impl Default for VaTable {
    fn default() -> Self {
        Self::standard()
    }
}

impl VaTable {
    /// Published valence/arousal ratings for six basic emotions.
    pub const fn standard() -> Self {
        VaTable {
            rows: [
                VaStats::new(-0.51, 0.20, 0.59, 0.29),
                VaStats::new(-0.60, 0.20, 0.35, 0.41),
                VaStats::new(-0.64, 0.20, 0.60, 0.32),
                VaStats::new(0.76, 0.22, 0.48, 0.26),
                VaStats::new(-0.63, 0.23, -0.27, 0.34),
                VaStats::new(0.40, 0.30, 0.67, 0.27),
            ],
        }
    }

    pub fn new(rows: [VaStats; 6]) -> Result<Self> {
        for r in &rows {
            let finite = [r.valence_mean, r.valence_sd, r.arousal_mean, r.arousal_sd]
                .iter()
                .all(|v| v.is_finite());
            if !finite || r.valence_sd <= 0.0 || r.arousal_sd <= 0.0 {
                return Err(Error::InvalidArgument(format!("invalid table row {r:?}")));
            }
        }
        Ok(VaTable { rows })
    }

    pub fn row(&self, e: Emotion) -> &VaStats {
        &self.rows[e as usize]
    }

    pub fn rows(&self) -> &[VaStats; 6] {
        &self.rows
    }

    pub fn max_abs_mean(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| [r.valence_mean.abs(), r.arousal_mean.abs()])
            .fold(0.0, f64::max)
    }

    /// Means and SDs multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        VaTable {
            rows: self.rows.map(|r| r.scaled(k, k)),
        }
    }

    /// Means rescaled so the largest absolute mean is exactly `target_max`;
    /// SDs follow the same coefficient unless `sd` is unscaled. Returns the
    /// coefficient too.
    pub fn scaled_to_max(&self, target_max: f64, sd: SdScaling) -> Result<(Self, f64)> {
        let k = scaling_coefficient(self, target_max)?;
        let max = self.max_abs_mean();
        // m * k can miss the target by an ulp, so the largest means are set
        let mean = |m: f64| if m.abs() == max { target_max.copysign(m) } else { m * k };
        let sd_scale = match sd {
            SdScaling::Scaled => k,
            SdScaling::Unscaled => 1.0,
        };
        let rows = self.rows.map(|r| VaStats {
            valence_mean: mean(r.valence_mean),
            valence_sd: r.valence_sd * sd_scale,
            arousal_mean: mean(r.arousal_mean),
            arousal_sd: r.arousal_sd * sd_scale,
        });
        Ok((VaTable { rows }, k))
    }
}

/// Coefficient that maps the table's largest absolute mean onto `target_max`.
pub fn scaling_coefficient(table: &VaTable, target_max: f64) -> Result<f64> {
    if !(target_max > 0.0 && target_max <= 1.0) {
        return Err(Error::InvalidArgument(format!("target max {target_max} outside (0, 1]")));
    }
    Ok(target_max / table.max_abs_mean())
}

/// A valence/arousal pair. `None` marks an unspecified component, which the
/// generator replaces with a learned substitute rather than a number.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VaPoint {
    pub valence: Option<f64>,
    pub arousal: Option<f64>,
}

impl VaPoint {
    /// Out-of-range components are clamped to [-1, 1]; NaN becomes unspecified.
    pub fn new(valence: Option<f64>, arousal: Option<f64>) -> Self {
        let fix = |v: Option<f64>| v.filter(|x| !x.is_nan()).map(|x| x.clamp(-1.0, 1.0));
        VaPoint {
            valence: fix(valence),
            arousal: fix(arousal),
        }
    }

    pub fn specified(valence: f64, arousal: f64) -> Self {
        Self::new(Some(valence), Some(arousal))
    }
}

/// Parse one component: a number, or `unspecified` / `none` / `nan`.
pub fn parse_va_component(s: &str) -> Result<Option<f64>> {
    match s.trim().to_ascii_lowercase().as_str() {
        "unspecified" | "none" | "nan" => Ok(None),
        other => {
            let v: f64 = other
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("`{s}` is not a valence/arousal value")))?;
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{v} outside [-1, 1]")));
            }
            Ok(Some(v))
        }
    }
}

impl fmt::Display for VaPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = |v: Option<f64>| v.map_or_else(|| "unspecified".to_string(), |x| format!("{x:.6}"));
        write!(f, "{} {}", c(self.valence), c(self.arousal))
    }
}

impl FromStr for VaPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        match parts[..] {
            [v, a] => Ok(VaPoint::new(parse_va_component(v)?, parse_va_component(a)?)),
            _ => Err(Error::InvalidArgument(format!("expected `valence arousal`, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SdScaling {
    #[default]
    Scaled,
    Unscaled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureVa {
    pub weights: [f64; 6],
    /// Component statistics after scaling.
    pub components: [VaStats; 6],
    pub scale: f64,
}

pub fn build_mixture(dist: &EmotionDistribution, table: &VaTable, target_max: f64) -> Result<GaussianMixtureVa> {
    build_mixture_with(dist, table, target_max, SdScaling::Scaled)
}

pub fn build_mixture_with(
    dist: &EmotionDistribution,
    table: &VaTable,
    target_max: f64,
    sd: SdScaling,
) -> Result<GaussianMixtureVa> {
    // re-validate: the array may have been built by hand
    let dist = EmotionDistribution::new(dist.0)?;
    let (scaled, scale) = table.scaled_to_max(target_max, sd)?;
    Ok(GaussianMixtureVa {
        weights: dist.0,
        components: scaled.rows,
        scale,
    })
}

impl GaussianMixtureVa {
    /// Weighted average of component means, before clamping.
    pub fn mean_raw(&self) -> (f64, f64) {
        self.weights
            .iter()
            .zip(&self.components)
            .fold((0.0, 0.0), |(v, a), (w, c)| (v + w * c.valence_mean, a + w * c.arousal_mean))
    }
}

pub fn mixture_mean(mix: &GaussianMixtureVa) -> VaPoint {
    let (v, a) = mix.mean_raw();
    VaPoint::specified(v, a)
}

/// Seeded source of mixture draws.
pub struct VaSampler {
    rng: ChaCha8Rng,
}

impl VaSampler {
    pub fn new(seed: u64) -> Self {
        VaSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// One draw before clamping.
    pub fn draw_raw(&mut self, mix: &GaussianMixtureVa) -> (f64, f64) {
        let category = WeightedIndex::new(mix.weights)
            .expect("mixture weights are a validated distribution")
            .sample(&mut self.rng);
        let c = &mix.components[category];
        let zv: f64 = StandardNormal.sample(&mut self.rng);
        let za: f64 = StandardNormal.sample(&mut self.rng);
        (c.valence_mean + c.valence_sd * zv, c.arousal_mean + c.arousal_sd * za)
    }

    pub fn draw(&mut self, mix: &GaussianMixtureVa) -> VaPoint {
        let (v, a) = self.draw_raw(mix);
        VaPoint::specified(v, a)
    }
}

pub fn sample_va(mix: &GaussianMixtureVa, seed: u64) -> VaPoint {
    VaSampler::new(seed).draw(mix)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Mahalanobis,
    Likelihood,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "mahalanobis" => Ok(Metric::Mahalanobis),
            "likelihood" => Ok(Metric::Likelihood),
            _ => Err(Error::InvalidArgument(format!("unknown metric `{s}`"))),
        }
    }
}

/// Map a point back to the closest emotion (or the most likely one under
/// independent Gaussians). Ties go to the earlier emotion.
pub fn inverse_map(point: &VaPoint, table: &VaTable, metric: Metric) -> Result<Emotion> {
    let (Some(v), Some(a)) = (point.valence, point.arousal) else {
        return Err(Error::InvalidArgument("inverse mapping needs both valence and arousal".into()));
    };
    // lower is better
    let cost = |r: &VaStats| -> f64 {
        let dv = v - r.valence_mean;
        let da = a - r.arousal_mean;
        match metric {
            Metric::Euclidean => (dv * dv + da * da).sqrt(),
            Metric::Mahalanobis => ((dv / r.valence_sd).powi(2) + (da / r.arousal_sd).powi(2)).sqrt(),
            Metric::Likelihood => {
                // negative log density up to the shared constant
                0.5 * ((dv / r.valence_sd).powi(2) + (da / r.arousal_sd).powi(2))
                    + r.valence_sd.ln()
                    + r.arousal_sd.ln()
            }
        }
    };
    let mut best = (Emotion::ALL[0], f64::INFINITY);
    for e in Emotion::ALL {
        let c = cost(table.row(e));
        if c < best.1 {
            best = (e, c);
        }
    }
    Ok(best.0)
}
