use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cuechord", version, about = "Symbolic music generation synced to video scene cuts")]
pub struct Cli {
    /// TOML pipeline configuration; defaults apply to anything it omits.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Seed for every random choice (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(flatten)]
    pub overrides: Overrides,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// Maximum boundary offset in seconds.
    #[arg(long, global = true)]
    pub delta_max: Option<f64>,

    /// Window in seconds within which a CHORD consumes a boundary.
    #[arg(long, global = true)]
    pub sensitivity: Option<f64>,

    /// Minimum gap in seconds between kept scene cuts.
    #[arg(long, global = true)]
    pub min_gap: Option<f64>,

    #[arg(long, global = true)]
    pub temperature: Option<f64>,

    /// Keep only the k most likely tokens; 0 keeps all.
    #[arg(long, global = true)]
    pub top_k: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VaMode {
    /// Probability-weighted average of the category means.
    Mean,
    /// One seeded draw from the mixture.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Reference,
    Scripted,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Euclidean,
    Mahalanobis,
    Likelihood,
}

#[derive(Debug, Args)]
pub struct VaArgs {
    #[arg(long, value_enum, default_value = "mean")]
    pub va_mode: VaMode,

    /// Replace the mapped valence: a number in [-1, 1] or `none`.
    #[arg(long, allow_hyphen_values = true)]
    pub valence: Option<String>,

    /// Replace the mapped arousal: a number in [-1, 1] or `none`.
    #[arg(long, allow_hyphen_values = true)]
    pub arousal: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode a MIDI file as a token text file.
    Encode {
        input: PathBuf,
        /// Defaults to `<input stem>.tokens.txt` beside the input.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        drop_bars: bool,
    },
    /// Decode a token text file to MIDI.
    Decode {
        input: PathBuf,
        /// Defaults to `<input stem>.mid` beside the input.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Report the long chords of a MIDI file.
    Label {
        input: PathBuf,
        /// Report destination; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the token sequence with CHORD tokens inserted.
        #[arg(long)]
        tokens_out: Option<PathBuf>,
    },
    /// Boundary offsets for each token of a token file.
    Offsets {
        tokens: PathBuf,
        /// Boundary list (seconds per line); the file's CHORD positions when omitted.
        #[arg(long)]
        boundaries: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Map emotion probabilities to valence and arousal.
    Emotion {
        input: PathBuf,
        #[command(flatten)]
        va: VaArgs,
        /// Also print the category the point maps back to.
        #[arg(long, value_enum)]
        inverse: Option<MetricArg>,
    },
    /// Turn a scene log or cut list into filtered boundaries.
    Scenes {
        input: PathBuf,
        /// Video length in seconds; required for a plain cut list.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Build training sequences from a directory of MIDI files.
    Prepare {
        input_dir: PathBuf,
        #[arg(short, long)]
        output_dir: PathBuf,
        /// Transpose each file by a seeded random amount in [-3, 3].
        #[arg(long)]
        augment: bool,
        #[arg(long)]
        drop_bars: bool,
    },
    /// Generate music for a video's scene cuts and emotion.
    Generate {
        /// Six emotion probabilities.
        #[arg(long)]
        emotion: PathBuf,
        /// ffmpeg scene log, or a plain list of cut times.
        #[arg(long, conflicts_with = "video")]
        scenes: Option<PathBuf>,
        /// Video to run scene detection on with ffmpeg.
        #[arg(long)]
        video: Option<PathBuf>,
        /// Seconds of music; defaults to the video duration from the log.
        #[arg(long)]
        duration: Option<f64>,
        /// MIDI output; sidecar files share its stem.
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        va: VaArgs,
        #[arg(long, value_enum, default_value = "reference")]
        model: ModelKind,
        /// Shell command serving the external model.
        #[arg(long, required_if_eq("model", "external"))]
        model_cmd: Option<String>,
    },
    /// Print the token vocabulary as JSON.
    Vocab {
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the effective configuration as TOML.
    Config {
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}
