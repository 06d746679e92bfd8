//! Canonical sequence document.
//!
//! Documents are JSON with a fixed layout: keys in the order `name`,
//! `version`, `tracks`; tracks in structure order; block keys in the order
//! `f_deg`, `r_deg`, `speed`, `delay_ms`, `start_ms`, `duration_ms`; angles
//! with exactly one decimal place. Export is byte-deterministic. Angles on the
//! 0.1° grid survive a round trip unchanged; finer values are rounded.

use std::fmt::Write as _;

use serde::Deserialize;
use thiserror::Error;

use super::{validate_sequence, MotionBlock, Sequence, Track, ValidationReport};
use crate::kinematics::StructureId;

pub const DOCUMENT_VERSION: u32 = 1;

/// Malformed document: bad JSON, unknown keys or tokens, wrong version.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct ParseError {
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImportError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("invalid sequence: {0}")]
    Invalid(ValidationReport),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("cannot export an invalid sequence: {0}")]
pub struct ExportError(pub ValidationReport);

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    name: String,
    version: u32,
    tracks: Vec<RawTrack>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrack {
    structure: StructureId,
    blocks: Vec<RawBlock>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlock {
    f_deg: f64,
    r_deg: f64,
    speed: u8,
    delay_ms: u64,
    start_ms: u64,
    duration_ms: u64,
}

pub fn export_sequence(seq: &Sequence) -> Result<String, ExportError> {
    let report = validate_sequence(seq);
    if !report.is_ok() {
        return Err(ExportError(report));
    }
    Ok(render(seq))
}

fn render(seq: &Sequence) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    let name = serde_json::to_string(seq.name()).expect("string serialization is infallible");
    let _ = writeln!(out, "  \"name\": {name},");
    let _ = writeln!(out, "  \"version\": {DOCUMENT_VERSION},");
    if seq.tracks().is_empty() {
        out.push_str("  \"tracks\": []\n");
    } else {
        out.push_str("  \"tracks\": [\n");
        for (i, track) in seq.tracks().iter().enumerate() {
            out.push_str("    {\n");
            let _ = writeln!(out, "      \"structure\": \"{}\",", track.structure);
            if track.blocks.is_empty() {
                out.push_str("      \"blocks\": []\n");
            } else {
                out.push_str("      \"blocks\": [\n");
                for (b, block) in track.blocks.iter().enumerate() {
                    let _ = write!(
                        out,
                        "        {{ \"f_deg\": {:.1}, \"r_deg\": {:.1}, \"speed\": {}, \"delay_ms\": {}, \"start_ms\": {}, \"duration_ms\": {} }}",
                        block.f_deg,
                        block.r_deg,
                        block.speed,
                        block.delay_ms,
                        block.start_ms,
                        block.duration_ms
                    );
                    out.push_str(if b + 1 < track.blocks.len() {
                        ",\n"
                    } else {
                        "\n"
                    });
                }
                out.push_str("      ]\n");
            }
            out.push_str(if i + 1 < seq.tracks().len() {
                "    },\n"
            } else {
                "    }\n"
            });
        }
        out.push_str("  ]\n");
    }
    out.push_str("}\n");
    out
}

/// Parses a document without judging playability.
pub fn parse_sequence(doc: &str) -> Result<Sequence, ParseError> {
    let raw: RawDocument = serde_json::from_str(doc).map_err(|e| ParseError {
        message: e.to_string(),
    })?;
    if raw.version != DOCUMENT_VERSION {
        return Err(ParseError {
            message: format!(
                "unsupported document version {} (expected {DOCUMENT_VERSION})",
                raw.version
            ),
        });
    }
    let tracks = raw
        .tracks
        .into_iter()
        .map(|t| {
            let structure = t.structure;
            let blocks = t
                .blocks
                .into_iter()
                .map(|b| MotionBlock {
                    structure,
                    f_deg: b.f_deg,
                    r_deg: b.r_deg,
                    speed: b.speed,
                    delay_ms: b.delay_ms,
                    start_ms: b.start_ms,
                    duration_ms: b.duration_ms,
                })
                .collect();
            Track::with_blocks(structure, blocks)
        })
        .collect();
    Ok(Sequence::from_tracks(raw.name, tracks))
}

/// Parses and validates a document.
pub fn import_sequence(doc: &str) -> Result<Sequence, ImportError> {
    let seq = parse_sequence(doc)?;
    let report = validate_sequence(&seq);
    if report.is_ok() {
        Ok(seq)
    } else {
        Err(ImportError::Invalid(report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::insert_block;

    const EMPTY_DOC: &str = "{\n  \"name\": \"empty\",\n  \"version\": 1,\n  \"tracks\": []\n}\n";

    #[test]
    fn empty_export_is_canonical() {
        let doc = export_sequence(&Sequence::new("empty")).unwrap();
        assert_eq!(doc, EMPTY_DOC);
        assert_eq!(import_sequence(&doc).unwrap(), Sequence::new("empty"));
    }

    #[test]
    fn golden_single_block_document() {
        let block = MotionBlock {
            structure: StructureId::Head,
            f_deg: 40.0,
            r_deg: -10.0,
            speed: 3,
            delay_ms: 100,
            start_ms: 0,
            duration_ms: 1000,
        };
        let seq = insert_block(&Sequence::new("one \"quoted\""), block).unwrap();
        let doc = export_sequence(&seq).unwrap();
        let expected = concat!(
            "{\n",
            "  \"name\": \"one \\\"quoted\\\"\",\n",
            "  \"version\": 1,\n",
            "  \"tracks\": [\n",
            "    {\n",
            "      \"structure\": \"head\",\n",
            "      \"blocks\": [\n",
            "        { \"f_deg\": 40.0, \"r_deg\": -10.0, \"speed\": 3, \"delay_ms\": 100, \"start_ms\": 0, \"duration_ms\": 1000 }\n",
            "      ]\n",
            "    }\n",
            "  ]\n",
            "}\n"
        );
        assert_eq!(doc, expected);
        assert_eq!(import_sequence(&doc).unwrap(), seq);
    }

    #[test]
    fn unknown_structure_names_the_token() {
        let doc = r#"{"name":"w","version":1,"tracks":[{"structure":"wing","blocks":[]}]}"#;
        let err = parse_sequence(doc).unwrap_err();
        assert!(err.message.contains("wing"), "{}", err.message);
        assert!(matches!(import_sequence(doc), Err(ImportError::Parse(_))));
    }

    #[test]
    fn parse_and_validation_errors_are_distinct() {
        let overlapping = r#"{"name":"o","version":1,"tracks":[{"structure":"head","blocks":[
            {"f_deg":0,"r_deg":0,"speed":3,"delay_ms":0,"start_ms":0,"duration_ms":1000},
            {"f_deg":0,"r_deg":0,"speed":3,"delay_ms":0,"start_ms":500,"duration_ms":1000}]}]}"#;
        assert!(parse_sequence(overlapping).is_ok());
        assert!(matches!(
            import_sequence(overlapping),
            Err(ImportError::Invalid(_))
        ));

        for bad in [
            "",
            "{",
            r#"{"name":"x","version":2,"tracks":[]}"#,
            r#"{"name":"x","version":1}"#,
            r#"{"name":"x","version":1,"tracks":[],"extra":0}"#,
            r#"{"name":"x","version":1,"tracks":[{"structure":"head","blocks":[{"f_deg":0}]}]}"#,
            r#"{"name":"x","version":1,"tracks":[{"structure":"head","blocks":[
                {"f_deg":0,"r_deg":0,"speed":-1,"delay_ms":0,"start_ms":0,"duration_ms":1}]}]}"#,
        ] {
            assert!(
                matches!(import_sequence(bad), Err(ImportError::Parse(_))),
                "expected parse error for {bad}"
            );
        }
    }

    #[test]
    fn export_refuses_invalid_sequences() {
        let seq = Sequence::from_tracks(
            "bad",
            vec![Track::with_blocks(
                StructureId::Head,
                vec![MotionBlock {
                    structure: StructureId::Head,
                    f_deg: 60.0,
                    r_deg: 0.0,
                    speed: 3,
                    delay_ms: 0,
                    start_ms: 0,
                    duration_ms: 100,
                }],
            )],
        );
        assert!(export_sequence(&seq).is_err());
    }

    #[test]
    fn tracks_are_reordered_on_import() {
        let doc = r#"{"name":"r","version":1,"tracks":[
            {"structure":"tail","blocks":[]},{"structure":"ear_left","blocks":[]}]}"#;
        let seq = import_sequence(doc).unwrap();
        let order: Vec<_> = seq.tracks().iter().map(|t| t.structure).collect();
        assert_eq!(order, vec![StructureId::EarLeft, StructureId::Tail]);
    }
}
