//! MOTChallenge-layout sequence I/O: comma-separated rows
//! `frame,id,x,y,w,h,conf,...` (top-left box corner, 1-based frames, id -1
//! for raw detections), plus the `seqinfo.ini` sidecar.

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::tracker::TrackOutput;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// One row of a gt / det / result file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceRecord {
    /// 1-based frame number.
    pub frame: u32,
    /// Identity; -1 for detections.
    pub id: i64,
    /// Top-left x.
    pub x: f64,
    /// Top-left y.
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub conf: f64,
}

impl SequenceRecord {
    pub fn bbox(&self) -> BBox {
        BBox {
            cx: self.x + self.w / 2.0,
            cy: self.y + self.h / 2.0,
            w: self.w,
            h: self.h,
        }
    }

    pub fn from_parts(frame: u32, id: i64, bbox: &BBox, conf: f64) -> Self {
        let (x, y, w, h) = bbox.tlwh();
        SequenceRecord {
            frame,
            id,
            x,
            y,
            w,
            h,
            conf,
        }
    }
}

/// A frame-sorted set of records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sequence {
    pub records: Vec<SequenceRecord>,
}

impl Sequence {
    pub fn new(mut records: Vec<SequenceRecord>) -> Self {
        records.sort_by_key(|r| r.frame);
        Sequence { records }
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn max_frame(&self) -> u32 {
        self.records.iter().map(|r| r.frame).max().unwrap_or(0)
    }

    /// Records grouped by frame, ordered.
    pub fn by_frame(&self) -> BTreeMap<u32, Vec<&SequenceRecord>> {
        let mut map: BTreeMap<u32, Vec<&SequenceRecord>> = BTreeMap::new();
        for r in &self.records {
            map.entry(r.frame).or_default().push(r);
        }
        map
    }

    /// Distinct identities in appearance order.
    pub fn ids(&self) -> Vec<i64> {
        let mut seen = Vec::new();
        for r in &self.records {
            if !seen.contains(&r.id) {
                seen.push(r.id);
            }
        }
        seen
    }
}

/// Parse a gt / det / result file. Rows need at least 7 comma-separated
/// numeric fields; trailing fields are ignored. Sizes must be positive.
pub fn load_sequence(path: impl AsRef<Path>) -> Result<Sequence> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_sequence(&text, &path.display().to_string())
}

pub fn parse_sequence(text: &str, origin: &str) -> Result<Sequence> {
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 7 {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: lineno + 1,
                msg: format!("expected at least 7 fields, found {}", fields.len()),
            });
        }
        let num = |i: usize| -> Result<f64> {
            fields[i].parse::<f64>().map_err(|e| Error::Parse {
                path: origin.to_string(),
                line: lineno + 1,
                msg: format!("field {}: {e}", i + 1),
            })
        };
        let frame = num(0)?;
        let id = num(1)?;
        let rec = SequenceRecord {
            frame: frame as u32,
            id: id as i64,
            x: num(2)?,
            y: num(3)?,
            w: num(4)?,
            h: num(5)?,
            conf: num(6)?,
        };
        if frame < 1.0 || frame.fract() != 0.0 {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: lineno + 1,
                msg: format!("frame must be a positive integer, got {frame}"),
            });
        }
        if rec.w <= 0.0 || rec.h <= 0.0 {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: lineno + 1,
                msg: format!("non-positive box size w={} h={}", rec.w, rec.h),
            });
        }
        records.push(rec);
    }
    Ok(Sequence::new(records))
}

/// Render a sequence in the 10-field result layout
/// `frame,id,x,y,w,h,conf,-1,-1,-1`. Float fields use shortest round-trip
/// formatting, so write-then-load is the identity.
pub fn format_sequence(seq: &Sequence) -> String {
    let mut out = String::new();
    for r in &seq.records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},-1,-1,-1",
            r.frame, r.id, r.x, r.y, r.w, r.h, r.conf
        )
        .expect("string write cannot fail");
    }
    out
}

/// Write tracker emissions as a MOTChallenge result file.
pub fn write_results(path: impl AsRef<Path>, frames: &[(u32, Vec<TrackOutput>)]) -> Result<()> {
    let mut records = Vec::new();
    for (frame, outs) in frames {
        for o in outs {
            records.push(SequenceRecord::from_parts(
                *frame,
                o.track_id as i64,
                &o.bbox,
                o.conf,
            ));
        }
    }
    write_sequence(path, &Sequence::new(records))
}

pub fn write_sequence(path: impl AsRef<Path>, seq: &Sequence) -> Result<()> {
    std::fs::write(path, format_sequence(seq))?;
    Ok(())
}

/// The `[Sequence]` block of a MOTChallenge seqinfo.ini.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeqInfo {
    pub name: String,
    pub im_width: u32,
    pub im_height: u32,
    pub seq_length: u32,
}

impl SeqInfo {
    pub fn to_ini(&self) -> String {
        format!(
            "[Sequence]\nname={}\nimWidth={}\nimHeight={}\nseqLength={}\n",
            self.name, self.im_width, self.im_height, self.seq_length
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_ini())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SeqInfo> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut name = None;
        let mut im_width = None;
        let mut im_height = None;
        let mut seq_length = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('[') || line.starts_with(';') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                continue;
            };
            let v = v.trim();
            match k.trim() {
                "name" => name = Some(v.to_string()),
                "imWidth" => im_width = v.parse().ok(),
                "imHeight" => im_height = v.parse().ok(),
                "seqLength" => seq_length = v.parse().ok(),
                _ => {}
            }
        }
        match (name, im_width, im_height, seq_length) {
            (Some(name), Some(w), Some(h), Some(l)) => Ok(SeqInfo {
                name,
                im_width: w,
                im_height: h,
                seq_length: l,
            }),
            _ => Err(Error::Validation(format!(
                "{}: missing seqinfo keys (need name, imWidth, imHeight, seqLength)",
                path.display()
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parse_basic_row() {
        let seq = parse_sequence("1,1,10,20,30,40,1,-1,-1,-1\n", "test").unwrap();
        assert_eq!(seq.len(), 1);
        let r = seq.records[0];
        assert_eq!(r.frame, 1);
        assert_eq!(r.id, 1);
        assert_eq!((r.x, r.y, r.w, r.h, r.conf), (10.0, 20.0, 30.0, 40.0, 1.0));
        assert_eq!(r.bbox().cx, 25.0);
    }

    #[test]
    fn empty_file_is_empty_sequence() {
        assert!(parse_sequence("", "test").unwrap().is_empty());
    }

    #[test]
    fn nonpositive_size_rejected_with_line() {
        let err = parse_sequence("1,1,0,0,5,5,1\n2,1,0,0,-3,5,1\n", "gt.txt").unwrap_err();
        match err {
            Error::Parse { line, path, .. } => {
                assert_eq!(line, 2);
                assert_eq!(path, "gt.txt");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn short_row_rejected() {
        assert!(parse_sequence("1,1,0,0,5,5\n", "test").is_err());
    }

    #[test]
    fn rows_sorted_by_frame() {
        let seq = parse_sequence("3,1,0,0,5,5,1\n1,1,0,0,5,5,1\n", "test").unwrap();
        assert_eq!(seq.records[0].frame, 1);
        assert_eq!(seq.records[1].frame, 3);
    }

    #[test]
    fn write_read_roundtrip_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let records: Vec<SequenceRecord> = (0..200)
            .map(|i| SequenceRecord {
                frame: (i / 7) + 1,
                id: (i % 7) as i64 + 1,
                x: rng.random_range(-10.0..300.0),
                y: rng.random_range(-10.0..300.0),
                w: rng.random_range(0.5..80.0),
                h: rng.random_range(0.5..80.0),
                conf: rng.random_range(0.0..1.0),
            })
            .collect();
        let seq = Sequence::new(records);
        let text = format_sequence(&seq);
        let back = parse_sequence(&text, "roundtrip").unwrap();
        assert_eq!(seq, back);
    }

    #[test]
    fn result_ids_never_negative() {
        use crate::tracker::TrackOutput;
        let frames = vec![(
            1u32,
            vec![TrackOutput {
                track_id: 3,
                bbox: BBox::new(5.0, 5.0, 4.0, 4.0).unwrap(),
                conf: 0.9,
            }],
        )];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("res.txt");
        write_results(&path, &frames).unwrap();
        let seq = load_sequence(&path).unwrap();
        assert!(seq.records.iter().all(|r| r.id >= 1));
    }

    #[test]
    fn seqinfo_roundtrip() {
        let info = SeqInfo {
            name: "toy-01".into(),
            im_width: 320,
            im_height: 256,
            seq_length: 60,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seqinfo.ini");
        info.save(&path).unwrap();
        assert_eq!(SeqInfo::load(&path).unwrap(), info);
    }
}
