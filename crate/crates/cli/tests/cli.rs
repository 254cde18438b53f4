use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cuechord_core::codec::decode_events;
use cuechord_core::score::{NoteEvent, ScoreTimeline};
use cuechord_core::smf::{parse_midi, write_midi};
use cuechord_core::token::{parse_text, Instrument, Token, VOCAB_SIZE};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cuechord"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn note(instrument: Instrument, pitch: u8, onset_ms: u64, offset_ms: u64) -> NoteEvent {
    NoteEvent {
        instrument,
        pitch,
        onset_ms,
        offset_ms,
        velocity: 90,
    }
}

/// A short piece with a held piano triad every two seconds and a melody.
fn song(variant: u64) -> ScoreTimeline {
    let mut notes = Vec::new();
    for bar in 0..4u64 {
        let t = bar * 2000;
        for p in [48, 52, 55] {
            notes.push(note(Instrument::Piano, p + (bar + variant) as u8 % 5, t, t + 1600));
        }
        for k in 0..4u64 {
            let on = t + k * 496;
            notes.push(note(Instrument::Strings, 72 + ((k + variant) % 7) as u8, on, on + 400));
        }
    }
    ScoreTimeline::new(notes, 120.0, vec![0, 2000, 4000, 6000]).unwrap()
}

fn write_song(dir: &Path, name: &str, score: &ScoreTimeline) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, write_midi(score)).unwrap();
    p
}

fn emotion_file(dir: &Path) -> PathBuf {
    let p = dir.join("emotion.txt");
    fs::write(&p, "anger 0\ndisgust 0\nfear 0\njoy 0.8\nsadness 0\nsurprise 0.2\n").unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn encode_then_decode_restores_the_score() {
    let dir = TempDir::new().unwrap();
    let score = song(0);
    let midi = write_song(dir.path(), "song.mid", &score);
    ok(&["encode", s(&midi)]);
    let tokens = dir.path().join("song.tokens.txt");
    let out = dir.path().join("back.mid");
    ok(&["decode", s(&tokens), "-o", s(&out)]);
    let back = parse_midi(&fs::read(&out).unwrap()).unwrap().score;
    assert_eq!(back.notes().len(), score.notes().len());
    let key = |n: &NoteEvent| (n.instrument, n.pitch, n.onset_ms, n.offset_ms);
    let a: Vec<_> = score.notes().iter().map(key).collect();
    let b: Vec<_> = back.notes().iter().map(key).collect();
    assert_eq!(a, b);
}

#[test]
fn missing_input_fails_with_nonzero_exit() {
    let out = run(&["encode", "/nonexistent/in.mid"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("reading"));
    let out = run(&["generate", "--emotion", "/nonexistent/e.txt", "--duration", "5", "-o", "/tmp/x.mid"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("emotion"));
}

#[test]
fn empty_midi_encodes_to_header_only() {
    let dir = TempDir::new().unwrap();
    let empty = ScoreTimeline::new(vec![], 120.0, vec![]).unwrap();
    let midi = write_song(dir.path(), "empty.mid", &empty);
    let out = dir.path().join("empty.txt");
    ok(&["encode", s(&midi), "-o", s(&out), "--drop-bars"]);
    let tokens = parse_text(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(tokens, vec![Token::Start, Token::FewerInstruments]);
}

#[test]
fn label_reports_held_triads() {
    let dir = TempDir::new().unwrap();
    let midi = write_song(dir.path(), "song.mid", &song(0));
    let labeled = dir.path().join("labeled.txt");
    let report = ok(&["label", s(&midi), "--tokens-out", s(&labeled)]);
    let rows: Vec<&str> = report.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("0\tPIANO\t48,52,55"));
    let tokens = parse_text(&fs::read_to_string(&labeled).unwrap()).unwrap();
    assert_eq!(tokens.iter().filter(|t| **t == Token::Chord).count(), 4);
    assert_eq!(decode_events(&tokens).chord_onsets_ms, vec![0, 2000, 4000, 6000]);
}

#[test]
fn offsets_follow_a_boundary_file() {
    let dir = TempDir::new().unwrap();
    let tokens = dir.path().join("t.txt");
    fs::write(&tokens, "START\nTIMESHIFT_1000\nTIMESHIFT_800\nTIMESHIFT_208\nCHORD\n").unwrap();
    let cuts = dir.path().join("b.txt");
    fs::write(&cuts, "3.0\n").unwrap();
    let out = ok(&["offsets", s(&tokens), "--boundaries", s(&cuts)]);
    assert_eq!(out, "3.000\n2.000\n1.200\n0.992\n4.000\n");
    let out = ok(&["--delta-max", "2.5", "offsets", s(&tokens), "--boundaries", s(&cuts)]);
    assert_eq!(out.lines().next(), Some("2.500"));
}

#[test]
fn prepare_writes_aligned_deterministic_sequences() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in");
    fs::create_dir(&input).unwrap();
    for i in 0..10 {
        write_song(&input, &format!("song{i:02}.mid"), &song(i));
    }
    fs::write(input.join("notes.txt"), "not midi").unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&["--seed", "5", "prepare", s(&input), "-o", s(out), "--augment"]);
    }
    for i in 0..10 {
        let name = format!("song{i:02}");
        let tokens = fs::read_to_string(a.join(format!("{name}.tokens.txt"))).unwrap();
        let offsets = fs::read_to_string(a.join(format!("{name}.offsets.txt"))).unwrap();
        assert_eq!(tokens.lines().count(), offsets.lines().count());
        let parsed = parse_text(&tokens).unwrap();
        assert_eq!(parsed[0], Token::Start);
        assert!(offsets.lines().all(|o| (0.0..=4.0).contains(&o.parse::<f64>().unwrap())));
        assert_eq!(tokens, fs::read_to_string(b.join(format!("{name}.tokens.txt"))).unwrap());
        assert_eq!(offsets, fs::read_to_string(b.join(format!("{name}.offsets.txt"))).unwrap());
    }
}

#[test]
fn prepare_fails_when_every_file_is_broken() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.mid"), b"MThd garbage").unwrap();
    let out = run(&["prepare", s(dir.path()), "-o", s(&dir.path().join("out"))]);
    assert!(!out.status.success());
}

#[test]
fn scripted_generation_lands_chords_on_cuts() {
    let dir = TempDir::new().unwrap();
    let emotion = emotion_file(dir.path());
    let cuts = dir.path().join("cuts.txt");
    fs::write(&cuts, "5.0\n12.0\n").unwrap();
    let out = dir.path().join("music.mid");
    ok(&[
        "generate", "--emotion", s(&emotion), "--scenes", s(&cuts), "--duration", "20", "-o", s(&out), "--model",
        "scripted",
    ]);
    let diag = json(&dir.path().join("music.diagnostics.json"));
    assert_eq!(diag["generation"]["consumed"], 2);
    assert_eq!(diag["chord_onsets_ms"], serde_json::json!([5000, 12000]));
    let score = parse_midi(&fs::read(&out).unwrap()).unwrap().score;
    let boosted: Vec<u64> = score.notes().iter().filter(|n| n.velocity > 80).map(|n| n.onset_ms).collect();
    assert_eq!(boosted, vec![5000, 5000, 5000, 12000, 12000, 12000]);
    assert!(score.end_ms() <= 20_000);
    let manifest = json(&dir.path().join("music.manifest.json"));
    assert_eq!(manifest["inputs"]["boundaries_s"], serde_json::json!([5.0, 12.0]));
    assert_eq!(manifest["inputs"]["model"], "scripted");
}

#[test]
fn generation_without_cuts_and_without_valence() {
    let dir = TempDir::new().unwrap();
    let emotion = emotion_file(dir.path());
    let out = dir.path().join("quiet.mid");
    ok(&["generate", "--emotion", s(&emotion), "--duration", "10", "-o", s(&out), "--valence", "none"]);
    let tokens = parse_text(&fs::read_to_string(dir.path().join("quiet.tokens.txt")).unwrap()).unwrap();
    assert_eq!(tokens[0], Token::Start);
    let manifest = json(&dir.path().join("quiet.manifest.json"));
    assert!(manifest["inputs"]["valence"].is_null());
    assert!(manifest["inputs"]["arousal"].is_number());
    assert_eq!(manifest["inputs"]["boundaries_s"], serde_json::json!([]));
    let diag = json(&dir.path().join("quiet.diagnostics.json"));
    assert_eq!(diag["generation"]["boundaries"], 0);
}

#[test]
fn scene_log_supplies_cuts_and_duration() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("scenes.log");
    fs::write(
        &log,
        "  Duration: 00:00:30.00, start: 0.000000, bitrate: 800 kb/s\n\
         [Parsed_showinfo_1 @ 0x1] n:   0 pts:  1 pts_time:2.0     pos: 1\n\
         [Parsed_showinfo_1 @ 0x1] n:   1 pts:  2 pts_time:4.5     pos: 2\n\
         [Parsed_showinfo_1 @ 0x1] n:   2 pts:  3 pts_time:10.0    pos: 3\n",
    )
    .unwrap();
    assert_eq!(ok(&["scenes", s(&log)]), "2.000\n10.000\n");
    let emotion = emotion_file(dir.path());
    let out = dir.path().join("m.mid");
    ok(&["generate", "--emotion", s(&emotion), "--scenes", s(&log), "-o", s(&out), "--model", "scripted"]);
    let diag = json(&dir.path().join("m.diagnostics.json"));
    assert_eq!(diag["generation"]["duration_s"], 30.0);
    assert_eq!(diag["chord_onsets_ms"], serde_json::json!([2000, 10000]));
}

#[test]
fn plain_cut_list_needs_a_duration() {
    let dir = TempDir::new().unwrap();
    let cuts = dir.path().join("cuts.txt");
    fs::write(&cuts, "1.0\n").unwrap();
    assert!(!run(&["scenes", s(&cuts)]).status.success());
    assert_eq!(ok(&["scenes", s(&cuts), "--duration", "3"]), "1.000\n");
}

#[test]
fn video_input_runs_the_configured_ffmpeg() {
    let dir = TempDir::new().unwrap();
    let fake = dir.path().join("fake-ffmpeg");
    fs::write(
        &fake,
        "#!/bin/sh\necho '  Duration: 00:00:12.00, start: 0.0' >&2\n\
         echo '[Parsed_showinfo_1 @ 0x1] n: 0 pts: 1 pts_time:6.0 pos: 1' >&2\n",
    )
    .unwrap();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(&fake, fs::Permissions::from_mode(0o755)).unwrap();
    }
    let emotion = emotion_file(dir.path());
    let out = dir.path().join("v.mid");
    let status = bin()
        .env("CUECHORD_FFMPEG", &fake)
        .args(["generate", "--emotion", s(&emotion), "--video", "clip.mp4", "-o", s(&out), "--model", "scripted"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let diag = json(&dir.path().join("v.diagnostics.json"));
    assert_eq!(diag["chord_onsets_ms"], serde_json::json!([6000]));
}

#[test]
fn external_model_speaks_json_lines() {
    let dir = TempDir::new().unwrap();
    let p = format!("{:.12}", 1.0 / VOCAB_SIZE as f64);
    let uniform = format!("[{}]", vec![p.as_str(); VOCAB_SIZE].join(","));
    let script = dir.path().join("model.sh");
    fs::write(&script, format!("while read line; do echo '{uniform}'; done\n")).unwrap();
    let emotion = emotion_file(dir.path());
    let out = dir.path().join("x.mid");
    let cmd = format!("sh {}", s(&script));
    // ties go to low ids, so a top-k cut would never reach a TIMESHIFT
    ok(&["--top-k", "0", "generate", "--emotion", s(&emotion), "--duration", "3", "-o", s(&out), "--model", "external", "--model-cmd", &cmd]);
    let tokens = parse_text(&fs::read_to_string(dir.path().join("x.tokens.txt")).unwrap()).unwrap();
    assert_eq!(tokens[0], Token::Start);
    assert!(decode_events(&tokens).end_ms >= 3000);

    let bad = "echo nonsense; cat > /dev/null";
    let r = run(&["generate", "--emotion", s(&emotion), "--duration", "3", "-o", s(&out), "--model", "external", "--model-cmd", bad]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("generation"));
}

#[test]
fn config_round_trips_and_overrides_apply() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("c.toml");
    ok(&["--min-gap", "2.5", "--top-k", "0", "config", "-o", s(&path)]);
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.contains("min_gap_s = 2.5"));
    assert_eq!(ok(&["--config", s(&path), "config"]), text);
    fs::write(&path, "resolution_ms = 10\n").unwrap();
    assert!(!run(&["--config", s(&path), "config"]).status.success());
}

#[test]
fn emotion_command_prints_point_and_category() {
    let dir = TempDir::new().unwrap();
    let e = dir.path().join("e.json");
    fs::write(&e, r#"{"anger":0,"disgust":0,"fear":0,"joy":0,"sadness":1,"surprise":0}"#).unwrap();
    let out = ok(&["emotion", s(&e), "--inverse", "mahalanobis"]);
    let lines: Vec<&str> = out.lines().collect();
    let k = 0.8 / 0.76;
    let v: Vec<f64> = lines[0].split_whitespace().map(|x| x.parse().unwrap()).collect();
    assert!((v[0] + 0.63 * k).abs() < 1e-6 && (v[1] + 0.27 * k).abs() < 1e-6);
    assert_eq!(lines[1], "sadness");
    assert_eq!(ok(&["emotion", s(&e), "--arousal", "none"]).trim(), format!("{:.6} unspecified", -0.63 * k));
}

#[test]
fn vocab_lists_every_token() {
    let v: Value = serde_json::from_str(&ok(&["vocab"])).unwrap();
    let text = v.to_string();
    assert!(text.contains("TIMESHIFT_1000") && text.contains("STRINGS_OFF_127"));
}
