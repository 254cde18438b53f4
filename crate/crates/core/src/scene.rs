//! Scene-cut ingestion from FFmpeg logs and the minimum-gap filter that
//! turns cuts into generation boundaries.
//!
//! Accepted log records (anything else is ignored):
//!
//! ```text
//!   Duration: 00:00:30.00, start: 0.000000, bitrate: 1205 kb/s
//! [Parsed_showinfo_1 @ 0x55d0] n:   3 pts:  96 pts_time:3.2   ...
//! [scdet @ 0x55d0] lavfi.scd.score: 31.2, lavfi.scd.time: 9.7
//! ```
//!
//! The first form gives the duration, the other two give cut times. A
//! showinfo line comes from `select='gt(scene,T)',showinfo`; see
//! [`ffmpeg_scene_args`].

use std::path::Path;

use crate::boundary::BoundaryList;
use crate::error::{Error, Result};

pub const DEFAULT_MIN_GAP_S: f64 = 4.0;
pub const DEFAULT_SCENE_THRESHOLD: f64 = 0.4;
/// Environment variable naming the ffmpeg binary to run.
pub const FFMPEG_ENV: &str = "CUECHORD_FFMPEG";

#[derive(Debug, Clone, PartialEq)]
pub struct SceneCuts {
    cut_times_s: Vec<f64>,
    video_duration_s: f64,
}

impl SceneCuts {
    /// Cuts are sorted and deduplicated. Every cut must lie in
    /// `[0, duration)`.
    pub fn new(mut cut_times_s: Vec<f64>, video_duration_s: f64) -> Result<Self> {
        if !(video_duration_s.is_finite() && video_duration_s > 0.0) {
            return Err(Error::SceneLog(format!("duration {video_duration_s} must be positive")));
        }
        if let Some(bad) = cut_times_s
            .iter()
            .find(|t| !(t.is_finite() && **t >= 0.0 && **t < video_duration_s))
        {
            return Err(Error::SceneLog(format!(
                "cut {bad} s outside [0, {video_duration_s}) s"
            )));
        }
        cut_times_s.sort_by(f64::total_cmp);
        cut_times_s.dedup();
        Ok(SceneCuts {
            cut_times_s,
            video_duration_s,
        })
    }

    pub fn cut_times_s(&self) -> &[f64] {
        &self.cut_times_s
    }

    pub fn video_duration_s(&self) -> f64 {
        self.video_duration_s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSceneLog {
    pub cuts: SceneCuts,
    /// Scene records whose timestamp could not be read.
    pub skipped_lines: usize,
}

fn number_after<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let rest = &line[line.find(key)? + key.len()..];
    let rest = rest.trim_start();
    let end = rest
        .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-' || c == 'e' || c == 'E' || c == '+'))
        .unwrap_or(rest.len());
    Some(&rest[..end])
}

fn parse_clock(s: &str) -> Option<f64> {
    let mut parts = s.trim().splitn(3, ':');
    let h: f64 = parts.next()?.parse().ok()?;
    let m: f64 = parts.next()?.parse().ok()?;
    let sec: f64 = parts.next()?.parse().ok()?;
    Some(h * 3600.0 + m * 60.0 + sec)
}

/// Extract cut times and the duration from an ffmpeg log.
pub fn parse_scene_log(text: &str) -> Result<ParsedSceneLog> {
    let mut cuts = Vec::new();
    let mut duration = None;
    let mut skipped = 0;
    for line in text.lines() {
        if let Some(rest) = line.trim_start().strip_prefix("Duration:") {
            let clock = rest.split(',').next().unwrap_or("");
            // "Duration: N/A" on streams without a container duration
            if let Some(d) = parse_clock(clock) {
                duration.get_or_insert(d);
            }
            continue;
        }
        let field = if line.contains("lavfi.scd.time") {
            number_after(line, "lavfi.scd.time:")
        } else if line.contains("showinfo") && line.contains("pts_time") {
            number_after(line, "pts_time:")
        } else {
            continue;
        };
        match field.and_then(|f| f.parse::<f64>().ok()) {
            Some(t) if t.is_finite() && t >= 0.0 => cuts.push(t),
            _ => skipped += 1,
        }
    }
    let duration = duration.ok_or_else(|| Error::SceneLog("no `Duration:` record in log".into()))?;
    // cuts at or past the reported end carry no usable boundary
    let before = cuts.len();
    cuts.retain(|&t| t < duration);
    skipped += before - cuts.len();
    Ok(ParsedSceneLog {
        cuts: SceneCuts::new(cuts, duration)?,
        skipped_lines: skipped,
    })
}

/// Parse one cut time (seconds) per line, with a `duration` given by the
/// caller. Blank lines and `#` comments are ignored.
pub fn parse_cut_list(text: &str, video_duration_s: f64) -> Result<SceneCuts> {
    let mut cuts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let t = line
            .parse()
            .map_err(|_| Error::SceneLog(format!("line {}: `{line}` is not a time in seconds", i + 1)))?;
        cuts.push(t);
    }
    SceneCuts::new(cuts, video_duration_s)
}

fn to_ms(s: f64) -> i64 {
    (s * 1000.0).round() as i64
}

/// Greedy scan: keep the first cut, then each cut at least `min_gap_s` after
/// the last kept one. Gaps are compared in whole milliseconds, the
/// resolution of [`BoundaryList`], so 2.1 and 6.1 are exactly 4 s apart.
pub fn filter_cut_times(cuts: &[f64], min_gap_s: f64) -> Vec<f64> {
    let gap = to_ms(min_gap_s);
    let mut kept: Vec<f64> = Vec::new();
    for &t in cuts {
        if kept.last().is_none_or(|&last| to_ms(t) - to_ms(last) >= gap) {
            kept.push(t);
        }
    }
    kept
}

/// Filtered cuts as pending generation boundaries.
pub fn filter_boundaries(cuts: &SceneCuts, min_gap_s: f64) -> Result<BoundaryList> {
    if !(min_gap_s.is_finite() && to_ms(min_gap_s) > 0) {
        return Err(Error::InvalidArgument(format!("minimum gap {min_gap_s} s must be at least 1 ms")));
    }
    BoundaryList::from_seconds(&filter_cut_times(&cuts.cut_times_s, min_gap_s))
}

/// Arguments for an ffmpeg run whose stderr [`parse_scene_log`] accepts.
pub fn ffmpeg_scene_args(video: &Path, threshold: f64) -> Vec<String> {
    vec![
        "-hide_banner".into(),
        "-nostats".into(),
        "-i".into(),
        video.display().to_string(),
        "-vf".into(),
        format!("select='gt(scene,{threshold})',showinfo"),
        "-an".into(),
        "-f".into(),
        "null".into(),
        "-".into(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOG: &str = "\
Input #0, mov,mp4,m4a,3gp,3g2,mj2, from 'clip.mp4':
  Duration: 00:00:30.00, start: 0.000000, bitrate: 1205 kb/s
[Parsed_showinfo_1 @ 0x55d0c8a3b2c0] n:   0 pts:  98304 pts_time:3.2     duration:512 fmt:yuv420p
[Parsed_showinfo_1 @ 0x55d0c8a3b2c0] n:   1 pts: 297984 pts_time:9.7     duration:512 fmt:yuv420p
[Parsed_showinfo_1 @ 0x55d0c8a3b2c0] n:   2 pts: 297984 pts_time:9.7     duration:512 fmt:yuv420p
[Parsed_showinfo_1 @ 0x55d0c8a3b2c0] n:   3 pts: 297984 pts_time:garbage
frame=  750 fps=0.0 q=-0.0 Lsize=N/A time=00:00:30.00 bitrate=N/A speed= 142x
";

    #[test]
    fn showinfo_log() {
        let p = parse_scene_log(LOG).unwrap();
        assert_eq!(p.cuts.cut_times_s(), &[3.2, 9.7]);
        assert_eq!(p.cuts.video_duration_s(), 30.0);
        assert_eq!(p.skipped_lines, 1);
    }

    #[test]
    fn scdet_log() {
        let log = "  Duration: 00:01:02.50, start: 0.0\n\
                   [scdet @ 0x5581] lavfi.scd.score: 12.345, lavfi.scd.time: 5.678\n";
        let p = parse_scene_log(log).unwrap();
        assert_eq!(p.cuts.cut_times_s(), &[5.678]);
        assert_eq!(p.cuts.video_duration_s(), 62.5);
    }

    #[test]
    fn no_records_and_missing_duration() {
        let p = parse_scene_log("  Duration: 00:00:10.00, start: 0\n").unwrap();
        assert!(p.cuts.cut_times_s().is_empty());
        assert!(matches!(parse_scene_log("pts_time:1.0 showinfo"), Err(Error::SceneLog(_))));
    }

    #[test]
    fn greedy_filter_examples() {
        assert_eq!(filter_cut_times(&[2.0, 4.5, 5.0, 10.0], 4.0), vec![2.0, 10.0]);
        assert!(filter_cut_times(&[], 4.0).is_empty());
        assert_eq!(filter_cut_times(&[0.0, 4.0], 4.0), vec![0.0, 4.0]);
        // compared with the last kept cut, not the previous raw one
        assert_eq!(filter_cut_times(&[0.0, 3.0, 6.0], 4.0), vec![0.0, 6.0]);
        assert_eq!(filter_cut_times(&[2.1, 6.1], 4.0), vec![2.1, 6.1]);
    }

    #[test]
    fn boundaries_from_cuts() {
        let cuts = SceneCuts::new(vec![10.0, 2.0, 4.5, 5.0], 20.0).unwrap();
        let b = filter_boundaries(&cuts, 4.0).unwrap();
        assert_eq!(b.times_s(), vec![2.0, 10.0]);
        assert!(filter_boundaries(&cuts, 0.0).is_err());
    }

    #[test]
    fn cut_list() {
        let c = parse_cut_list("5.0\n# note\n\n12.0\n", 20.0).unwrap();
        assert_eq!(c.cut_times_s(), &[5.0, 12.0]);
        assert!(parse_cut_list("25.0\n", 20.0).is_err());
        assert!(parse_cut_list("x\n", 20.0).is_err());
    }
}
