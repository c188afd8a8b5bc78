//! On-disk datasets: manifests, point files and a converter for
//! class-folder dumps.
//!
//! Manifest: UTF-8, one `path<TAB>class_name` per line, paths relative to the
//! manifest's directory. Optional headers `#classes: a,b,c` (fixes class ids)
//! and `#split: train|test`; other `#` lines are comments.
//!
//! Point files are either text (`x y z` per line) or binary: `XYZB`, a
//! little-endian `u32` count, then `3·count` little-endian `f32`s.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::cloud::{Point, PointCloud};
use crate::error::{Error, Result};
use crate::exec::Execution;

pub const BINARY_MAGIC: &[u8; 4] = b"XYZB";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Path as written in the manifest.
    pub path: PathBuf,
    pub class_id: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
    pub class_names: Vec<String>,
    pub split: Option<Split>,
}

impl DatasetManifest {
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Renders the manifest text with a `#classes` header.
    pub fn to_text(&self) -> String {
        let mut out = format!("#classes: {}\n", self.class_names.join(","));
        match self.split {
            Some(Split::Train) => out.push_str("#split: train\n"),
            Some(Split::Test) => out.push_str("#split: test\n"),
            None => {}
        }
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\n",
                e.path.to_string_lossy().replace('\\', "/"),
                self.class_names[e.class_id]
            ));
        }
        out
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path, true)
}

/// Parses manifest text. Paths resolve against the directory of `path`;
/// with `check_files` every entry must name an existing file.
pub fn parse_manifest(text: &str, path: &Path, check_files: bool) -> Result<DatasetManifest> {
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut class_names: Vec<String> = Vec::new();
    let mut fixed_classes = false;
    let mut split = None;
    let mut entries = Vec::new();
    let mut seen = HashSet::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(list) = rest.strip_prefix("classes:") {
                if !entries.is_empty() || fixed_classes {
                    return Err(Error::parse(path, line_no, "#classes header must come first and only once"));
                }
                for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    if class_names.iter().any(|c| c == name) {
                        return Err(Error::parse(path, line_no, format!("class '{name}' listed twice")));
                    }
                    class_names.push(name.to_string());
                }
                fixed_classes = true;
            } else if let Some(s) = rest.strip_prefix("split:") {
                split = Some(match s.trim() {
                    "train" => Split::Train,
                    "test" => Split::Test,
                    other => return Err(Error::parse(path, line_no, format!("unknown split '{other}'"))),
                });
            }
            continue;
        }
        let (file, class) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, line_no, "expected 'path<TAB>class_name'"))?;
        let (file, class) = (file.trim(), class.trim());
        if file.is_empty() || class.is_empty() {
            return Err(Error::parse(path, line_no, "empty path or class name"));
        }
        if !seen.insert(file.to_string()) {
            return Err(Error::parse(path, line_no, format!("duplicate path '{file}'")));
        }
        let class_id = match class_names.iter().position(|c| c == class) {
            Some(id) => id,
            None if fixed_classes => {
                return Err(Error::parse(path, line_no, format!("class '{class}' not in #classes header")))
            }
            None => {
                class_names.push(class.to_string());
                class_names.len() - 1
            }
        };
        let entry = ManifestEntry {
            path: PathBuf::from(file),
            class_id,
        };
        if check_files && !root.join(&entry.path).is_file() {
            return Err(Error::parse(path, line_no, format!("cannot resolve point file '{file}'")));
        }
        entries.push(entry);
    }
    Ok(DatasetManifest {
        root,
        entries,
        class_names,
        split,
    })
}

/// Reads a point file, detecting the binary format by its magic bytes.
pub fn load_points(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(BINARY_MAGIC) {
        return parse_binary(&bytes, path);
    }
    let text = std::str::from_utf8(&bytes).map_err(|_| Error::parse(path, 0, "not UTF-8 text or XYZB binary"))?;
    parse_text(text, path)
}

fn parse_text(text: &str, path: &Path) -> Result<PointCloud> {
    let mut points: Vec<Point> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        points.push(parse_row(line.split_whitespace(), 3, path, i + 1)?);
    }
    if points.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no points", path.display())));
    }
    PointCloud::new(points)
}

/// Reads `expect` numeric fields (or at least 3 when `expect` is larger,
/// for rows carrying extra columns such as normals) and keeps x, y, z.
fn parse_row<'a>(tokens: impl Iterator<Item = &'a str>, expect: usize, path: &Path, line: usize) -> Result<Point> {
    let fields: Vec<&str> = tokens.collect();
    if fields.len() != expect {
        return Err(Error::parse(
            path,
            line,
            format!("expected {expect} fields, found {}", fields.len()),
        ));
    }
    let mut p = [0.0; 3];
    for (a, tok) in fields.iter().take(3).enumerate() {
        let v: f64 = tok
            .parse()
            .map_err(|_| Error::parse(path, line, format!("malformed number '{tok}'")))?;
        if !v.is_finite() {
            return Err(Error::parse(path, line, format!("non-finite value '{tok}'")));
        }
        p[a] = v;
    }
    Ok(p)
}

fn parse_binary(bytes: &[u8], path: &Path) -> Result<PointCloud> {
    if bytes.len() < 8 {
        return Err(Error::parse(path, 0, "binary header truncated"));
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    if Some(body.len()) != count.checked_mul(12) {
        return Err(Error::parse(
            path,
            0,
            format!("header declares {count} points but body holds {} bytes", body.len()),
        ));
    }
    if count == 0 {
        return Err(Error::InvalidInput(format!("{}: no points", path.display())));
    }
    let points = body
        .chunks_exact(12)
        .map(|c| {
            let f = |o: usize| f32::from_le_bytes(c[o..o + 4].try_into().unwrap()) as f64;
            [f(0), f(4), f(8)]
        })
        .collect();
    PointCloud::new(points).map_err(|e| Error::parse(path, 0, e.to_string()))
}

pub fn points_to_text(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 40);
    for p in cloud.points() {
        out.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
    }
    out
}

pub fn write_points_text(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, points_to_text(cloud)).map_err(|e| Error::io(path, e))
}

pub fn write_points_binary(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(8 + cloud.len() * 12);
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(cloud.len() as u32).to_le_bytes());
    for p in cloud.points() {
        for v in p {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// One labeled cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub name: String,
    pub cloud: PointCloud,
    pub label: usize,
}

/// Labeled clouds plus the class-name table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub class_names: Vec<String>,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn clouds(&self) -> Vec<&PointCloud> {
        self.samples.iter().map(|s| &s.cloud).collect()
    }
}

/// Loads every file a manifest lists, in manifest order.
pub fn load_dataset(manifest: &DatasetManifest, exec: Execution) -> Result<Dataset> {
    let samples = exec.try_map(&manifest.entries, |e| -> Result<Sample> {
        Ok(Sample {
            name: e.path.to_string_lossy().into_owned(),
            cloud: load_points(manifest.resolve(e))?,
            label: e.class_id,
        })
    })?;
    Ok(Dataset {
        class_names: manifest.class_names.clone(),
        samples,
    })
}

/// Source layouts understood by [`convert`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFormat {
    /// Class folders of files readable by [`load_points`].
    Xyz,
    /// Class folders of comma-separated rows `x,y,z[,nx,ny,nz]`.
    ModelNetCsv,
}

impl std::str::FromStr for SourceFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xyz" => Ok(SourceFormat::Xyz),
            "modelnet-csv" => Ok(SourceFormat::ModelNetCsv),
            _ => Err(Error::Config(format!("unknown source format '{s}' (xyz, modelnet-csv)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvertSummary {
    pub manifests: Vec<PathBuf>,
    pub files: usize,
}

fn sorted_children(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    out.sort();
    Ok(out)
}

fn load_source(format: SourceFormat, path: &Path) -> Result<PointCloud> {
    match format {
        SourceFormat::Xyz => load_points(path),
        SourceFormat::ModelNetCsv => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let mut points = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                let n = line.split(',').count();
                let expect = if n >= 6 { 6 } else { 3 };
                points.push(parse_row(line.split(',').map(str::trim), expect, path, i + 1)?);
            }
            PointCloud::new(points).map_err(|e| Error::parse(path, 0, e.to_string()))
        }
    }
}

/// Converts `src/<class>/<file>` (or `src/<class>/{train,test}/<file>`) into
/// canonical text point files under `dst` plus `manifest.tsv` (or
/// `train.tsv` and `test.tsv`). Classes are sorted by folder name; output is
/// byte-identical across reruns.
pub fn convert(format: SourceFormat, src: &Path, dst: &Path) -> Result<ConvertSummary> {
    let class_dirs: Vec<PathBuf> = sorted_children(src)?.into_iter().filter(|p| p.is_dir()).collect();
    if class_dirs.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{}: expected one sub-folder per class",
            src.display()
        )));
    }
    let class_names: Vec<String> = class_dirs
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    let has_splits = class_dirs
        .iter()
        .any(|d| d.join("train").is_dir() || d.join("test").is_dir());

    let groups: Vec<(Option<Split>, &str)> = if has_splits {
        vec![(Some(Split::Train), "train"), (Some(Split::Test), "test")]
    } else {
        vec![(None, "")]
    };

    let mut summary = ConvertSummary {
        manifests: Vec::new(),
        files: 0,
    };
    for (split, sub) in groups {
        let mut entries = Vec::new();
        for (class_id, dir) in class_dirs.iter().enumerate() {
            let src_dir = if sub.is_empty() { dir.clone() } else { dir.join(sub) };
            if !src_dir.is_dir() {
                continue;
            }
            let rel_dir = if sub.is_empty() {
                PathBuf::from(&class_names[class_id])
            } else {
                PathBuf::from(sub).join(&class_names[class_id])
            };
            let out_dir = dst.join(&rel_dir);
            fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            let mut stems = HashSet::new();
            for file in sorted_children(&src_dir)?.into_iter().filter(|p| p.is_file()) {
                let stem = file.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                if !stems.insert(stem.clone()) {
                    return Err(Error::InvalidInput(format!(
                        "{}: two files share the stem '{stem}'",
                        src_dir.display()
                    )));
                }
                let cloud = load_source(format, &file)?;
                let rel = rel_dir.join(format!("{stem}.xyz"));
                write_points_text(&cloud, dst.join(&rel))?;
                entries.push(ManifestEntry { path: rel, class_id });
                summary.files += 1;
            }
        }
        let manifest = DatasetManifest {
            root: dst.to_path_buf(),
            entries,
            class_names: class_names.clone(),
            split,
        };
        let name = if sub.is_empty() { "manifest.tsv".to_string() } else { format!("{sub}.tsv") };
        let out = dst.join(name);
        fs::write(&out, manifest.to_text()).map_err(|e| Error::io(&out, e))?;
        summary.manifests.push(out);
    }
    Ok(summary)
}
