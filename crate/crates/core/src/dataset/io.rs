use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    Attribute, Detection, DetectionKind, DetectionSet, FrameAnnotation, Interaction, Sequence,
};
use crate::error::{Error, Result};
use crate::geometry::{parse_number, BoundingBox};

pub const DATASET_METADATA_FILE: &str = "sequence.json";
const GROUNDTRUTH_FILE: &str = "groundtruth.txt";
const HANDS_FILE: &str = "hands.txt";
const INTERACTION_FILE: &str = "interaction.txt";
pub const DETECTIONS_FILE: &str = "detections.txt";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceMetadata {
    name: String,
    fps: f64,
    frame_count: usize,
    frame_width: u32,
    frame_height: u32,
    attributes: Vec<String>,
    verb: String,
    noun: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frame_paths: Option<Vec<String>>,
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Splits an LF-terminated file into lines; the terminator of the final
/// line is optional.
pub(crate) fn lines(text: &str) -> Vec<&str> {
    if text.is_empty() {
        return Vec::new();
    }
    let mut lines: Vec<&str> = text.split('\n').collect();
    if text.ends_with('\n') {
        lines.pop();
    }
    lines
}

fn expect_count(path: &Path, found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(Error::Invalid(format!(
            "{}: {found} lines for {expected} frames",
            path.display()
        )));
    }
    Ok(())
}

pub(crate) fn parse_box(path: &Path, line: usize, raw: &str) -> Result<BoundingBox> {
    raw.parse::<BoundingBox>()
        .map_err(|e| Error::parse(path, line, e.to_string()))
}

fn parse_optional_box(path: &Path, line: usize, raw: &str, absent: &str) -> Result<Option<BoundingBox>> {
    if raw == absent {
        Ok(None)
    } else {
        parse_box(path, line, raw).map(Some)
    }
}

/// Loads and validates one sequence directory.
pub fn load_sequence(dir: &Path) -> Result<Sequence> {
    let meta_path = dir.join(DATASET_METADATA_FILE);
    let meta: SequenceMetadata = serde_json::from_str(&read_text(&meta_path)?)
        .map_err(|source| Error::Json {
            path: meta_path.clone(),
            source,
        })?;
    let invalid = |message: String| Error::InvalidSequence {
        sequence: meta.name.clone(),
        message,
    };

    let attributes = meta
        .attributes
        .iter()
        .map(|code| code.parse::<Attribute>().map_err(&invalid))
        .collect::<Result<BTreeSet<_>>>()?;

    let gt_path = dir.join(GROUNDTRUTH_FILE);
    let gt_text = read_text(&gt_path)?;
    let gt_lines = lines(&gt_text);
    expect_count(&gt_path, gt_lines.len(), meta.frame_count)?;
    let mut frames = gt_lines
        .iter()
        .enumerate()
        .map(|(i, raw)| {
            parse_optional_box(&gt_path, i + 1, raw, "absent").map(FrameAnnotation::with_target)
        })
        .collect::<Result<Vec<_>>>()?;

    let hands_path = dir.join(HANDS_FILE);
    if hands_path.exists() {
        let text = read_text(&hands_path)?;
        let hand_lines = lines(&text);
        expect_count(&hands_path, hand_lines.len(), meta.frame_count)?;
        for (i, raw) in hand_lines.iter().enumerate() {
            let (left, right) = raw.split_once(';').ok_or_else(|| {
                Error::parse(&hands_path, i + 1, "expected LEFT;RIGHT")
            })?;
            frames[i].left_hand = parse_optional_box(&hands_path, i + 1, left, "none")?;
            frames[i].right_hand = parse_optional_box(&hands_path, i + 1, right, "none")?;
        }
    }

    let inter_path = dir.join(INTERACTION_FILE);
    if inter_path.exists() {
        let text = read_text(&inter_path)?;
        let inter_lines = lines(&text);
        expect_count(&inter_path, inter_lines.len(), meta.frame_count)?;
        for (i, raw) in inter_lines.iter().enumerate() {
            frames[i].interaction = raw
                .parse::<Interaction>()
                .map_err(|e| Error::parse(&inter_path, i + 1, e))?;
        }
    }

    let seq = Sequence {
        name: meta.name.clone(),
        fps: meta.fps,
        frame_width: meta.frame_width,
        frame_height: meta.frame_height,
        frames,
        frame_paths: meta.frame_paths.clone(),
        attributes,
        verb: meta.verb.clone(),
        noun: meta.noun.clone(),
    };
    seq.validate()?;
    Ok(seq)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn box_or(b: &Option<BoundingBox>, absent: &str) -> String {
    b.map_or_else(|| absent.to_string(), |b| b.to_string())
}

/// Writes a sequence in the directory layout read by [`load_sequence`].
pub fn write_sequence(seq: &Sequence, dir: &Path) -> Result<()> {
    seq.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = SequenceMetadata {
        name: seq.name.clone(),
        fps: seq.fps,
        frame_count: seq.frames.len(),
        frame_width: seq.frame_width,
        frame_height: seq.frame_height,
        attributes: seq.attributes.iter().map(|a| a.code().to_string()).collect(),
        verb: seq.verb.clone(),
        noun: seq.noun.clone(),
        frame_paths: seq.frame_paths.clone(),
    };
    let mut json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    json.push('\n');
    write_file(&dir.join(DATASET_METADATA_FILE), &json)?;

    let mut gt = String::new();
    let mut hands = String::new();
    let mut inter = String::new();
    for frame in &seq.frames {
        gt.push_str(&box_or(&frame.target, "absent"));
        gt.push('\n');
        hands.push_str(&box_or(&frame.left_hand, "none"));
        hands.push(';');
        hands.push_str(&box_or(&frame.right_hand, "none"));
        hands.push('\n');
        inter.push_str(frame.interaction.token());
        inter.push('\n');
    }
    write_file(&dir.join(GROUNDTRUTH_FILE), &gt)?;
    write_file(&dir.join(HANDS_FILE), &hands)?;
    write_file(&dir.join(INTERACTION_FILE), &inter)
}

/// Loads every sequence directory (one holding `sequence.json`) below
/// `dir`, ordered by directory name.
pub fn load_dataset(dir: &Path) -> Result<Vec<Sequence>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.join(DATASET_METADATA_FILE).is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Invalid(format!(
            "{}: no sequence directories found",
            dir.display()
        )));
    }
    let sequences = dirs
        .iter()
        .map(|d| load_sequence(d))
        .collect::<Result<Vec<_>>>()?;
    let mut names = BTreeSet::new();
    for seq in &sequences {
        if !names.insert(seq.name.as_str()) {
            return Err(Error::Invalid(format!("duplicate sequence name {}", seq.name)));
        }
    }
    Ok(sequences)
}

fn parse_detection(path: &Path, line: usize, raw: &str) -> Result<Detection> {
    let fields: Vec<&str> = raw.split(',').collect();
    if !(5..=7).contains(&fields.len()) {
        return Err(Error::parse(
            path,
            line,
            format!("expected 5 to 7 detection fields, found {}", fields.len()),
        ));
    }
    let bbox = BoundingBox::parse_fields(&fields[..4])
        .map_err(|e| Error::parse(path, line, e.to_string()))?;
    let score = parse_number(fields[4]).map_err(|e| Error::parse(path, line, e.to_string()))?;
    if !(0.0..=1.0).contains(&score) {
        return Err(Error::parse(path, line, format!("score {score} outside [0,1]")));
    }
    let kind = match fields.get(5).copied() {
        None | Some("obj") => DetectionKind::Object,
        Some("lh") => DetectionKind::LeftHand,
        Some("rh") => DetectionKind::RightHand,
        Some(other) => {
            return Err(Error::parse(path, line, format!("unknown detection kind {other:?}")))
        }
    };
    let contact = match fields.get(6).copied() {
        None => None,
        Some("contact") => Some(true),
        Some("no_contact") => Some(false),
        Some(other) => {
            return Err(Error::parse(path, line, format!("unknown contact state {other:?}")))
        }
    };
    Ok(Detection {
        bbox,
        score,
        kind,
        contact,
    })
}

/// Parses detection text; `path` is used for error messages only.
pub fn parse_detections(text: &str, path: &Path, frame_count: usize) -> Result<DetectionSet> {
    let raw_lines = lines(text);
    expect_count(path, raw_lines.len(), frame_count)?;
    let frames = raw_lines
        .iter()
        .enumerate()
        .map(|(i, raw)| {
            if raw.is_empty() {
                return Ok(Vec::new());
            }
            raw.split(';')
                .map(|entry| parse_detection(path, i + 1, entry))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DetectionSet { frames })
}

pub fn load_detections(path: &Path, frame_count: usize) -> Result<DetectionSet> {
    parse_detections(&read_text(path)?, path, frame_count)
}

/// The detection file text: one line per frame, entries joined by `;`.
pub fn format_detections(dets: &DetectionSet) -> String {
    let mut out = String::new();
    for frame in &dets.frames {
        let entries: Vec<String> = frame
            .iter()
            .map(|d| {
                let mut s = format!("{},{}", d.bbox, d.score);
                if d.kind != DetectionKind::Object || d.contact.is_some() {
                    s.push(',');
                    s.push_str(d.kind.token());
                }
                if let Some(c) = d.contact {
                    s.push_str(if c { ",contact" } else { ",no_contact" });
                }
                s
            })
            .collect();
        out.push_str(&entries.join(";"));
        out.push('\n');
    }
    out
}

pub fn write_detections(dets: &DetectionSet, path: &Path) -> Result<()> {
    write_file(path, &format_detections(dets))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) {
        fs::write(dir.join(name), text).unwrap();
    }

    fn meta(frames: usize) -> String {
        format!(
            r#"{{"name":"s1","fps":60,"frame_count":{frames},"frame_width":1920,"frame_height":1080,"attributes":["FM","1H"],"verb":"take","noun":"cup"}}"#
        )
    }

    #[test]
    fn absent_frames_parse() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "sequence.json", &meta(3));
        write(tmp.path(), "groundtruth.txt", "0,0,10,10\nabsent\n1,1,10,10\n");
        let seq = load_sequence(tmp.path()).unwrap();
        assert_eq!(seq.frames[1].target, None);
        assert_eq!(seq.target(2), Some(BoundingBox::new(1.0, 1.0, 10.0, 10.0).unwrap()));
        assert!(seq.attributes.contains(&Attribute::OneHand));
        assert_eq!(seq.frames[2].interaction, Interaction::None);
    }

    #[test]
    fn negative_extent_reports_line() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "sequence.json", &meta(1));
        write(tmp.path(), "groundtruth.txt", "0,0,-5,10\n");
        let err = load_sequence(tmp.path()).unwrap_err().to_string();
        assert!(err.contains("non-positive extent at line 1"), "{err}");
    }

    #[test]
    fn interaction_with_hands() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "sequence.json", &meta(3));
        write(tmp.path(), "groundtruth.txt", "0,0,10,10\n0,0,10,10\n0,0,10,10\n");
        write(tmp.path(), "hands.txt", "none;none\n5,5,4,4;none\n6,5,4,4;none\n");
        write(tmp.path(), "interaction.txt", "NONE\nLHI\nLHI\n");
        let seq = load_sequence(tmp.path()).unwrap();
        assert_eq!(seq.frames[1].interaction, Interaction::Left);
        assert!(seq.frames[2].left_hand.is_some());

        write(tmp.path(), "interaction.txt", "NONE\nBHI\nLHI\n");
        let err = load_sequence(tmp.path()).unwrap_err().to_string();
        assert!(err.contains("right-hand"), "{err}");
    }

    #[test]
    fn structural_errors() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "sequence.json", &meta(2));
        write(tmp.path(), "groundtruth.txt", "absent\n0,0,1,1\n");
        assert!(load_sequence(tmp.path())
            .unwrap_err()
            .to_string()
            .contains("first frame"));

        write(tmp.path(), "groundtruth.txt", "0,0,1,1\n");
        assert!(load_sequence(tmp.path()).unwrap_err().to_string().contains("1 lines for 2 frames"));

        write(tmp.path(), "groundtruth.txt", "0,0,1,1\n0,0,1,x\n");
        assert!(load_sequence(tmp.path()).unwrap_err().to_string().contains("line 2"));

        fs::remove_file(tmp.path().join("groundtruth.txt")).unwrap();
        assert!(matches!(load_sequence(tmp.path()), Err(Error::Io { .. })));
    }

    #[test]
    fn detection_lines() {
        let p = Path::new("detections.txt");
        let dets = parse_detections(
            "1,1,10,10,0.9;20,20,5,5,0.99\n\n1,1,10,10,0.9,lh,contact\n",
            p,
            3,
        )
        .unwrap();
        assert_eq!(dets.frame(0).len(), 2);
        assert_eq!(dets.frame(0)[1].score, 0.99);
        assert!(dets.frame(1).is_empty());
        let hand = dets.frame(2)[0];
        assert_eq!(hand.kind, DetectionKind::LeftHand);
        assert_eq!(hand.contact, Some(true));

        assert!(parse_detections("1,1,10,10\n", p, 1).is_err());
        assert!(parse_detections("1,1,10,10,1.5\n", p, 1).is_err());
        assert!(parse_detections("1,1,10,10,0.5,xx\n", p, 1).is_err());
        assert!(parse_detections("\n", p, 2).is_err());
        assert_eq!(parse_detections("\n\n", p, 2).unwrap().len(), 2);
    }
}
