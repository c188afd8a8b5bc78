//! Model file: a text header followed by little-endian arrays.
//!
//! ```text
//! PCC1
//! format_version=1
//! config.<key>=<value>        one per config key
//! class=<name>                one per class, in id order
//! region=<spec>               one per region, in feature order
//! array=<name> <f64|u32> <shape>
//! checksum=sha256:<hex>
//! end
//! <payload>
//! ```
//!
//! Arrays appear in the payload in declaration order: `saab` (24×24,
//! row-major), `saab_energy`, `mean`, `std`, `selected` (u32),
//! `class_labels` (u32), `weights` ((D+1)×C, row-major). The checksum
//! covers every byte of the file except the checksum line itself.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{PipelineConfig, PipelineModel};
use crate::descriptor::{SaabTransform, DIM};
use crate::error::{Error, ModelFormatError, Result};
use crate::llsr::LlsrModel;
use crate::regions::{RegionSet, RegionSpec};

pub const MAGIC: &str = "PCC1";
pub const FORMAT_VERSION: u32 = 1;

const ARRAYS: [(&str, Kind); 7] = [
    ("saab", Kind::F64),
    ("saab_energy", Kind::F64),
    ("mean", Kind::F64),
    ("std", Kind::F64),
    ("selected", Kind::U32),
    ("class_labels", Kind::U32),
    ("weights", Kind::F64),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    F64,
    U32,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::F64 => "f64",
            Kind::U32 => "u32",
        }
    }

    fn width(self) -> usize {
        match self {
            Kind::F64 => 8,
            Kind::U32 => 4,
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    hex(&h.finalize())
}

fn shape_text(shape: &[usize]) -> String {
    shape.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

pub fn encode_model(model: &PipelineModel) -> Result<Vec<u8>> {
    model.validate()?;
    if let Some(bad) = model.class_names.iter().find(|n| n.contains(['\n', '\r'])) {
        return Err(Error::InvalidInput(format!("class name {bad:?} contains a line break")));
    }
    let c = model.classifier.classes();
    let d = model.classifier.dims();

    let mut head = format!("{MAGIC}\nformat_version={FORMAT_VERSION}\n");
    for (k, v) in model.config.to_pairs() {
        head.push_str(&format!("config.{k}={v}\n"));
    }
    for name in &model.class_names {
        head.push_str(&format!("class={name}\n"));
    }
    for r in model.regions.iter() {
        head.push_str(&format!("region={r}\n"));
    }
    let shapes: [Vec<usize>; 7] = [
        vec![DIM, DIM],
        vec![DIM],
        vec![model.mean.len()],
        vec![model.std.len()],
        vec![model.selected.len()],
        vec![c],
        vec![d + 1, c],
    ];
    for ((name, kind), shape) in ARRAYS.iter().zip(&shapes) {
        head.push_str(&format!("array={name} {} {}\n", kind.name(), shape_text(shape)));
    }

    let mut payload = Vec::new();
    let f64s = |vals: &mut dyn Iterator<Item = f64>, out: &mut Vec<u8>| {
        for v in vals {
            out.extend_from_slice(&v.to_le_bytes());
        }
    };
    f64s(&mut model.saab.matrix().iter().flatten().copied(), &mut payload);
    f64s(&mut model.saab.energies().iter().copied(), &mut payload);
    f64s(&mut model.mean.iter().copied(), &mut payload);
    f64s(&mut model.std.iter().copied(), &mut payload);
    for s in &model.selected {
        payload.extend_from_slice(&s.to_le_bytes());
    }
    for l in model.classifier.class_labels() {
        payload.extend_from_slice(&l.to_le_bytes());
    }
    f64s(&mut model.classifier.weights().iter().copied(), &mut payload);

    let tail = "end\n";
    let sum = digest(&[head.as_bytes(), tail.as_bytes(), &payload]);
    let mut out = head.into_bytes();
    out.extend_from_slice(format!("checksum=sha256:{sum}\n").as_bytes());
    out.extend_from_slice(tail.as_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

fn malformed(msg: impl Into<String>) -> ModelFormatError {
    ModelFormatError::Malformed(msg.into())
}

struct ArrayDecl {
    kind: Kind,
    shape: Vec<usize>,
    len: usize,
}

fn parse_array_decl(value: &str, expect_name: &str, expect_kind: Kind) -> std::result::Result<ArrayDecl, ModelFormatError> {
    let parts: Vec<&str> = value.split(' ').collect();
    let [name, kind, shape] = parts.as_slice() else {
        return Err(malformed(format!("array declaration '{value}'")));
    };
    if *name != expect_name || *kind != expect_kind.name() {
        return Err(malformed(format!("expected array {expect_name} {}, found '{value}'", expect_kind.name())));
    }
    let shape = shape
        .split('x')
        .map(|s| s.parse::<usize>().map_err(|_| malformed(format!("bad shape in '{value}'"))))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let len = shape
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s))
        .ok_or(ModelFormatError::Truncated)?;
    Ok(ArrayDecl {
        kind: expect_kind,
        shape,
        len,
    })
}

/// Decodes a model file image. Every failure is a typed error.
pub fn decode_model(bytes: &[u8]) -> std::result::Result<PipelineModel, ModelFormatError> {
    let magic_line = format!("{MAGIC}\n");
    if !bytes.starts_with(magic_line.as_bytes()) {
        return Err(if magic_line.as_bytes().starts_with(bytes) {
            ModelFormatError::Truncated
        } else {
            ModelFormatError::BadMagic
        });
    }
    let end_marker = b"\nend\n";
    let header_end = bytes
        .windows(end_marker.len())
        .position(|w| w == end_marker)
        .ok_or(ModelFormatError::Truncated)?
        + end_marker.len();
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| malformed("header is not UTF-8"))?;
    let payload = &bytes[header_end..];
    let lines: Vec<&str> = header.split_terminator('\n').collect();

    let version_line = lines.get(1).copied().unwrap_or_default();
    let version: u32 = version_line
        .strip_prefix("format_version=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| malformed("missing format_version"))?;
    if version != FORMAT_VERSION {
        return Err(ModelFormatError::UnsupportedVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }

    let mut config_lines = Vec::new();
    let mut class_names = Vec::new();
    let mut region_lines = Vec::new();
    let mut decls = Vec::new();
    let mut checksum = None;
    let mut checksum_span = None;
    let mut offset = 0usize;
    for (i, line) in lines.iter().enumerate() {
        let start = offset;
        offset += line.len() + 1;
        if i < 2 || *line == "end" {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| malformed(format!("header line '{line}'")))?;
        match key {
            "class" => class_names.push(value.to_string()),
            "region" => region_lines.push(value),
            "array" => {
                let (name, kind) = *ARRAYS
                    .get(decls.len())
                    .ok_or_else(|| malformed("too many arrays"))?;
                decls.push(parse_array_decl(value, name, kind)?);
            }
            "checksum" => {
                checksum = Some(value.to_string());
                checksum_span = Some(start..offset);
            }
            k if k.starts_with("config.") => config_lines.push((&k[7..], value)),
            _ => return Err(malformed(format!("unknown header key '{key}'"))),
        }
    }
    if decls.len() != ARRAYS.len() {
        return Err(malformed(format!("expected {} arrays, found {}", ARRAYS.len(), decls.len())));
    }
    let expected_len = decls
        .iter()
        .try_fold(0usize, |acc, d| d.len.checked_mul(d.kind.width()).and_then(|b| acc.checked_add(b)))
        .ok_or(ModelFormatError::Truncated)?;
    if payload.len() < expected_len {
        return Err(ModelFormatError::Truncated);
    }
    if payload.len() > expected_len {
        return Err(malformed("trailing bytes after payload"));
    }

    let checksum = checksum.ok_or_else(|| malformed("missing checksum"))?;
    let span = checksum_span.unwrap();
    let actual = digest(&[&bytes[..span.start], &bytes[span.end..]]);
    if checksum.strip_prefix("sha256:") != Some(actual.as_str()) {
        return Err(ModelFormatError::ChecksumMismatch);
    }

    // from here on the bytes are exactly what the encoder wrote
    let mut config = PipelineConfig::default();
    for (k, v) in config_lines {
        config.set(k, v).map_err(|e| malformed(e.to_string()))?;
    }
    let regions = RegionSet(
        region_lines
            .iter()
            .map(|r| r.parse::<RegionSpec>())
            .collect::<Result<Vec<_>>>()
            .map_err(|e| malformed(e.to_string()))?,
    );

    let mut cursor = payload;
    let take_f64 = |n: usize, cur: &mut &[u8]| -> Vec<f64> {
        let (head, rest) = cur.split_at(n * 8);
        *cur = rest;
        head.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
    };
    let take_u32 = |n: usize, cur: &mut &[u8]| -> Vec<u32> {
        let (head, rest) = cur.split_at(n * 4);
        *cur = rest;
        head.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect()
    };
    if decls[0].shape != [DIM, DIM] || decls[1].shape != [DIM] {
        return Err(malformed("Saab arrays must be 24x24 and 24"));
    }
    let flat = take_f64(decls[0].len, &mut cursor);
    let energy = take_f64(decls[1].len, &mut cursor);
    let mut matrix = [[0.0; DIM]; DIM];
    for (i, row) in matrix.iter_mut().enumerate() {
        row.copy_from_slice(&flat[i * DIM..(i + 1) * DIM]);
    }
    let saab = SaabTransform::from_parts(matrix, energy.try_into().unwrap());
    let mean = take_f64(decls[2].len, &mut cursor);
    let std = take_f64(decls[3].len, &mut cursor);
    let selected = take_u32(decls[4].len, &mut cursor);
    let class_labels = take_u32(decls[5].len, &mut cursor);
    let weights = take_f64(decls[6].len, &mut cursor);
    if decls[6].shape.len() != 2 || decls[6].shape[1] != class_labels.len() || decls[6].shape[0] == 0 {
        return Err(malformed("weights shape disagrees with class labels"));
    }
    let classifier = LlsrModel::from_parts(decls[6].shape[0] - 1, weights, class_labels)
        .map_err(|e| malformed(e.to_string()))?;

    let model = PipelineModel {
        config,
        class_names,
        saab,
        regions,
        mean,
        std,
        selected,
        classifier,
    };
    model.validate().map_err(|e| malformed(e.to_string()))?;
    Ok(model)
}

pub fn save_model(model: &PipelineModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_model(model)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PipelineModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_model(&bytes)?)
}
