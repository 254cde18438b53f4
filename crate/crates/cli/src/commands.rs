use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use anyhow::{bail, Context, Result};
use cuechord_core::boundary::{offsets_for_sequence, BoundaryList};
use cuechord_core::chord::{boost_chord_velocity, chord_report, detect_chords, dropout_chords, insert_chord_tokens};
use cuechord_core::codec::{decode_events, encode_events};
use cuechord_core::emotion::{
    build_mixture_with, inverse_map, mixture_mean, parse_va_component, sample_va, Emotion, EmotionDistribution, Metric,
    VaPoint, VaTable,
};
use cuechord_core::generate::{generate, NextTokenModel, ReferenceModel, ScriptedChordModel};
use cuechord_core::scene::{
    ffmpeg_scene_args, filter_boundaries, parse_cut_list, parse_scene_log, SceneCuts, FFMPEG_ENV,
};
use cuechord_core::score::transpose;
use cuechord_core::smf::{parse_midi, write_midi};
use cuechord_core::token::{parse_text, to_text, vocabulary_manifest, Token};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use tracing::{info, warn};

use crate::args::{Cli, Command, MetricArg, ModelKind, Overrides, VaArgs, VaMode};
use crate::config::PipelineConfig;
use crate::external::ExternalModel;

pub fn effective_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let Overrides {
        delta_max,
        sensitivity,
        min_gap,
        temperature,
        top_k,
    } = cli.overrides;
    if let Some(v) = delta_max {
        cfg.max_offset_s = v;
    }
    if let Some(v) = sensitivity {
        cfg.sensitivity_s = v;
    }
    if let Some(v) = min_gap {
        cfg.min_gap_s = v;
    }
    if let Some(v) = temperature {
        cfg.sampling.temperature = v;
    }
    if let Some(v) = top_k {
        cfg.sampling.top_k = v;
    }
    if let Some(v) = cli.seed {
        cfg.sampling.seed = v;
    }
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = effective_config(&cli)?;
    match cli.command {
        Command::Encode {
            input,
            output,
            drop_bars,
        } => cmd_encode(&input, output.as_deref(), drop_bars),
        Command::Decode { input, output } => cmd_decode(&input, output.as_deref()),
        Command::Label {
            input,
            output,
            tokens_out,
        } => cmd_label(&cfg, &input, output.as_deref(), tokens_out.as_deref()),
        Command::Offsets {
            tokens,
            boundaries,
            output,
        } => cmd_offsets(&cfg, &tokens, boundaries.as_deref(), output.as_deref()),
        Command::Emotion { input, va, inverse } => cmd_emotion(&cfg, &input, &va, inverse),
        Command::Scenes {
            input,
            duration,
            output,
        } => cmd_scenes(&cfg, &input, duration, output.as_deref()),
        Command::Prepare {
            input_dir,
            output_dir,
            augment,
            drop_bars,
        } => cmd_prepare(&cfg, &input_dir, &output_dir, augment, drop_bars).map(|_| ()),
        Command::Generate {
            emotion,
            scenes,
            video,
            duration,
            output,
            va,
            model,
            model_cmd,
        } => cmd_generate(
            &cfg,
            &GenerateRequest {
                emotion,
                scenes,
                video,
                duration_s: duration,
                output,
                va_mode: va.va_mode,
                valence: va.valence,
                arousal: va.arousal,
                model,
                model_cmd,
            },
        ),
        Command::Vocab { output } => {
            let text = serde_json::to_string_pretty(&vocabulary_manifest())? + "\n";
            emit(output.as_deref(), &text)
        }
        Command::Config { output } => emit(output.as_deref(), &cfg.to_toml()),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Write to `path`, or stdout when absent.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sibling(input: &Path, suffix: &str) -> PathBuf {
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    // `song.tokens.txt` decodes to `song.mid`, not `song.tokens.mid`
    let stem = stem.strip_suffix(".tokens").unwrap_or(stem);
    input.with_file_name(format!("{stem}{suffix}"))
}

fn load_midi(path: &Path) -> Result<cuechord_core::ScoreTimeline> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = parse_midi(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    for w in &parsed.warnings {
        warn!(file = %path.display(), "{w:?}");
    }
    Ok(parsed.score)
}

fn load_tokens(path: &Path) -> Result<Vec<Token>> {
    parse_text(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

pub fn cmd_encode(input: &Path, output: Option<&Path>, drop_bars: bool) -> Result<()> {
    let mut score = load_midi(input)?;
    if drop_bars {
        score = score.without_bars();
    }
    let out = output.map_or_else(|| sibling(input, ".tokens.txt"), Path::to_path_buf);
    write_file(&out, to_text(&encode_events(&score)))?;
    info!("wrote {}", out.display());
    Ok(())
}

pub fn cmd_decode(input: &Path, output: Option<&Path>) -> Result<()> {
    let decoded = decode_events(&load_tokens(input)?);
    let d = &decoded.diagnostics;
    if d.unmatched_offs + d.closed_at_end + d.zero_length > 0 {
        warn!(?d, "token anomalies");
    }
    let out = output.map_or_else(|| sibling(input, ".mid"), Path::to_path_buf);
    write_file(&out, write_midi(&decoded.score))?;
    info!("wrote {}", out.display());
    Ok(())
}

pub fn cmd_label(cfg: &PipelineConfig, input: &Path, output: Option<&Path>, tokens_out: Option<&Path>) -> Result<()> {
    let score = load_midi(input)?.quantized();
    let spans = detect_chords(&score, score.beat_ms(), cfg.simultaneity_eps_ms);
    if let Some(path) = tokens_out {
        let labeled = insert_chord_tokens(&encode_events(&score), &spans)?;
        write_file(path, to_text(&labeled))?;
    }
    emit(output, &chord_report(&spans))
}

pub fn cmd_offsets(cfg: &PipelineConfig, tokens: &Path, boundaries: Option<&Path>, output: Option<&Path>) -> Result<()> {
    let toks = load_tokens(tokens)?;
    let list = match boundaries {
        Some(p) => BoundaryList::parse_text(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => BoundaryList::from_chord_positions(&toks),
    };
    let offsets = offsets_for_sequence(&toks, &list, &cfg.scheduler()?);
    emit(output, &format_offsets(&offsets))
}

fn format_offsets(offsets: &[f64]) -> String {
    offsets.iter().map(|o| format!("{o:.3}\n")).collect()
}

fn metric(m: MetricArg) -> Metric {
    match m {
        MetricArg::Euclidean => Metric::Euclidean,
        MetricArg::Mahalanobis => Metric::Mahalanobis,
        MetricArg::Likelihood => Metric::Likelihood,
    }
}

fn map_emotion(cfg: &PipelineConfig, path: &Path, mode: VaMode, valence: Option<&str>, arousal: Option<&str>) -> Result<(EmotionDistribution, VaPoint)> {
    let text = read_text(path).context("emotion")?;
    let dist = EmotionDistribution::parse_text(&text).with_context(|| format!("emotion: {}", path.display()))?;
    let mix = build_mixture_with(&dist, &VaTable::standard(), cfg.target_max, cfg.sd_scaling).context("emotion")?;
    let mut va = match mode {
        VaMode::Mean => mixture_mean(&mix),
        VaMode::Sample => sample_va(&mix, cfg.sampling.seed),
    };
    if let Some(v) = valence {
        va.valence = parse_va_component(v).context("--valence")?;
    }
    if let Some(a) = arousal {
        va.arousal = parse_va_component(a).context("--arousal")?;
    }
    Ok((dist, va))
}

pub fn cmd_emotion(cfg: &PipelineConfig, input: &Path, va: &VaArgs, inverse: Option<MetricArg>) -> Result<()> {
    let (_, point) = map_emotion(cfg, input, va.va_mode, va.valence.as_deref(), va.arousal.as_deref())?;
    println!("{point}");
    if let Some(m) = inverse {
        println!("{}", inverse_map(&point, &VaTable::standard(), metric(m))?);
    }
    Ok(())
}

/// An ffmpeg log (recognized by its `Duration:` record) or a plain list of
/// cut times, which needs `duration_s`.
fn load_cuts(path: &Path, duration_s: Option<f64>) -> Result<SceneCuts> {
    let text = read_text(path)?;
    if text.contains("Duration:") {
        let parsed = parse_scene_log(&text).with_context(|| format!("scenes: {}", path.display()))?;
        if parsed.skipped_lines > 0 {
            warn!(skipped = parsed.skipped_lines, "unreadable scene records in {}", path.display());
        }
        Ok(parsed.cuts)
    } else {
        let Some(d) = duration_s else {
            bail!("scenes: {} is a plain cut list, so --duration is required", path.display());
        };
        Ok(parse_cut_list(&text, d).with_context(|| format!("scenes: {}", path.display()))?)
    }
}

fn detect_scenes(cfg: &PipelineConfig, video: &Path) -> Result<SceneCuts> {
    let bin = cfg
        .paths
        .ffmpeg
        .clone()
        .or_else(|| std::env::var_os(FFMPEG_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("ffmpeg"));
    let out = Process::new(&bin)
        .args(ffmpeg_scene_args(video, cfg.scene_threshold))
        .output()
        .with_context(|| format!("scene detection: running {}", bin.display()))?;
    if !out.status.success() {
        bail!("scene detection: {} exited with {}", bin.display(), out.status);
    }
    let parsed = parse_scene_log(&String::from_utf8_lossy(&out.stderr)).context("scene detection")?;
    Ok(parsed.cuts)
}

pub fn cmd_scenes(cfg: &PipelineConfig, input: &Path, duration: Option<f64>, output: Option<&Path>) -> Result<()> {
    let cuts = load_cuts(input, duration)?;
    let boundaries = filter_boundaries(&cuts, cfg.min_gap_s)?;
    info!(
        cuts = cuts.cut_times_s().len(),
        kept = boundaries.len(),
        duration_s = cuts.video_duration_s(),
        "filtered scene cuts"
    );
    emit(output, &boundaries.to_text())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrepareSummary {
    pub written: usize,
    pub failed: usize,
}

fn midi_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Per file: parse, optional transposition, encode, CHORD labeling,
/// dropout, then offsets against the surviving CHORD positions. Files are
/// processed in parallel; each gets its own seed from its sorted position.
pub fn cmd_prepare(cfg: &PipelineConfig, input_dir: &Path, output_dir: &Path, augment: bool, drop_bars: bool) -> Result<PrepareSummary> {
    let files = midi_files(input_dir)?;
    fs::create_dir_all(output_dir).with_context(|| format!("creating {}", output_dir.display()))?;
    let sched = cfg.scheduler()?;
    let results: Vec<Result<()>> = files
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.sampling.seed.wrapping_add(i as u64));
            let semitones: i8 = rng.random_range(-3..=3);
            let dropout_seed: u64 = rng.random();

            let mut score = load_midi(path)?;
            if drop_bars {
                score = score.without_bars();
            }
            if augment {
                score = transpose(&score, semitones)?;
            }
            let score = score.quantized();
            let spans = detect_chords(&score, score.beat_ms(), cfg.simultaneity_eps_ms);
            let labeled = insert_chord_tokens(&encode_events(&score), &spans)?;
            let tokens = dropout_chords(&labeled, cfg.dropout_rate, dropout_seed)?;
            let boundaries = BoundaryList::from_chord_positions(&tokens);
            let offsets = offsets_for_sequence(&tokens, &boundaries, &sched);

            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("song");
            write_file(&output_dir.join(format!("{stem}.tokens.txt")), to_text(&tokens))?;
            write_file(&output_dir.join(format!("{stem}.offsets.txt")), format_offsets(&offsets))?;
            info!(file = %path.display(), tokens = tokens.len(), chords = spans.len(), "prepared");
            Ok(())
        })
        .collect();
    let mut summary = PrepareSummary { written: 0, failed: 0 };
    for (path, r) in files.iter().zip(results) {
        match r {
            Ok(()) => summary.written += 1,
            Err(e) => {
                summary.failed += 1;
                warn!(file = %path.display(), "skipped: {e:#}");
            }
        }
    }
    eprintln!("prepared {} files, {} failed", summary.written, summary.failed);
    if summary.written == 0 && summary.failed > 0 {
        bail!("every file failed");
    }
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct GenerateRequest {
    pub emotion: PathBuf,
    pub scenes: Option<PathBuf>,
    pub video: Option<PathBuf>,
    pub duration_s: Option<f64>,
    pub output: PathBuf,
    pub va_mode: VaMode,
    pub valence: Option<String>,
    pub arousal: Option<String>,
    pub model: ModelKind,
    pub model_cmd: Option<String>,
}

/// Sidecar paths next to the MIDI output: tokens, diagnostics, manifest.
pub fn generate_outputs(midi: &Path) -> [PathBuf; 3] {
    ["tokens.txt", "diagnostics.json", "manifest.json"].map(|ext| midi.with_extension(ext))
}

pub fn cmd_generate(cfg: &PipelineConfig, req: &GenerateRequest) -> Result<()> {
    let (dist, va) = map_emotion(cfg, &req.emotion, req.va_mode, req.valence.as_deref(), req.arousal.as_deref())?;
    let (cuts, source) = match (&req.scenes, &req.video) {
        (Some(p), _) => (Some(load_cuts(p, req.duration_s)?), p.display().to_string()),
        (None, Some(v)) => (Some(detect_scenes(cfg, v)?), v.display().to_string()),
        (None, None) => (None, String::new()),
    };
    let duration_s = req
        .duration_s
        .or(cuts.as_ref().map(SceneCuts::video_duration_s))
        .context("generation: --duration is required without a scene log or video")?;
    let boundaries = match &cuts {
        Some(c) => filter_boundaries(c, cfg.min_gap_s).context("scenes")?,
        None => BoundaryList::default(),
    };

    let mut model: Box<dyn NextTokenModel> = match req.model {
        ModelKind::Reference => Box::new(ReferenceModel::new(cfg.key_root)),
        ModelKind::Scripted => Box::new(ScriptedChordModel),
        ModelKind::External => {
            let cmd = req.model_cmd.as_deref().context("generation: --model-cmd is required")?;
            Box::new(ExternalModel::spawn(cmd)?)
        }
    };
    let sampling = cfg.sampling.params();
    let sched = cfg.scheduler()?;
    let generation = generate(&mut model, va, boundaries.clone(), duration_s, &sampling, &sched).context("generation")?;

    let decoded = decode_events(&generation.tokens);
    // the chord's notes are the ONs sharing its grid step
    let boosted = boost_chord_velocity(&decoded.score, &decoded.chord_onsets_ms, cfg.boost_gain, 0);
    let duration_ms = (duration_s * 1000.0).round() as u64;
    let score = boosted.trimmed(duration_ms);

    let [tokens_path, diag_path, manifest_path] = generate_outputs(&req.output);
    write_file(&req.output, write_midi(&score)).context("output")?;
    write_file(&tokens_path, to_text(&generation.tokens)).context("output")?;

    let boundary_report: Vec<_> = generation
        .boundaries
        .times_s()
        .into_iter()
        .zip(generation.boundaries.states())
        .map(|(t, s)| json!({ "time_s": t, "state": s }))
        .collect();
    let diagnostics = json!({
        "generation": generation.diagnostics,
        "boundaries": boundary_report,
        "notes": score.notes().len(),
        "chord_onsets_ms": decoded.chord_onsets_ms,
        "decode": {
            "unmatched_offs": decoded.diagnostics.unmatched_offs,
            "closed_at_end": decoded.diagnostics.closed_at_end,
            "zero_length": decoded.diagnostics.zero_length,
        },
    });
    write_file(&diag_path, serde_json::to_string_pretty(&diagnostics)? + "\n").context("output")?;

    let emotions: serde_json::Map<String, serde_json::Value> =
        Emotion::ALL.iter().map(|e| (e.name().to_string(), json!(dist.get(*e)))).collect();
    let manifest = json!({
        "inputs": {
            "emotion_file": req.emotion.display().to_string(),
            "emotion": emotions,
            "va_mode": format!("{:?}", req.va_mode).to_lowercase(),
            "valence": va.valence,
            "arousal": va.arousal,
            "boundary_source": source,
            "boundaries_s": boundaries.times_s(),
            "duration_s": duration_s,
            "model": format!("{:?}", req.model).to_lowercase(),
            "seed": sampling.seed,
            "temperature": sampling.temperature,
            "top_k": sampling.top_k,
            "sensitivity_s": sched.sensitivity_s(),
            "max_offset_s": sched.max_offset_s(),
            "min_gap_s": cfg.min_gap_s,
            "target_max": cfg.target_max,
        },
        "outputs": {
            "midi": req.output.display().to_string(),
            "tokens": tokens_path.display().to_string(),
            "diagnostics": diag_path.display().to_string(),
        },
    });
    write_file(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n").context("output")?;
    info!(
        tokens = generation.tokens.len(),
        consumed = generation.diagnostics.consumed,
        boundaries = generation.diagnostics.boundaries,
        "wrote {}",
        req.output.display()
    );
    Ok(())
}
