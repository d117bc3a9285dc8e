//! On-disk formats: IDX datasets, the JSON model file and the campaign CSVs.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ByteOrder};
use lazyattack::models::{Activation, Classifier, Dense, LabeledDataset, Model};
use lazyattack::ImageSpec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: byte {offset}: {msg}", path.display())]
    Malformed { path: PathBuf, offset: u64, msg: String },
    #[error("{}: {msg}", path.display())]
    Schema { path: PathBuf, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_owned(),
        source,
    }
}

// Unsigned-byte IDX magics; the low byte is the dimension count.
const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_IMAGES_HWC: u32 = 0x0000_0804;
const IDX_LABELS: u32 = 0x0000_0801;

/// A parsed IDX file of unsigned bytes.
#[derive(Debug)]
struct Idx {
    dims: Vec<usize>,
    data: Vec<u8>,
}

fn read_idx(path: &Path, magics: &[u32]) -> Result<Idx, FormatError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let bad = |offset: usize, msg: String| FormatError::Malformed {
        path: path.to_owned(),
        offset: offset as u64,
        msg,
    };
    if bytes.len() < 4 {
        return Err(bad(bytes.len(), "truncated header".into()));
    }
    let magic = BigEndian::read_u32(&bytes[..4]);
    if !magics.contains(&magic) {
        return Err(bad(0, format!("magic {magic:#010x}, expected {:#010x}", magics[0])));
    }
    let ndims = (magic & 0xff) as usize;
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(bad(bytes.len(), "truncated dimension list".into()));
    }
    let dims: Vec<usize> = (0..ndims)
        .map(|i| BigEndian::read_u32(&bytes[4 + 4 * i..8 + 4 * i]) as usize)
        .collect();
    let len: usize = dims.iter().product();
    if bytes.len() - header != len {
        return Err(bad(
            header,
            format!(
                "expected {len} data bytes after the header, found {}",
                bytes.len() - header
            ),
        ));
    }
    Ok(Idx {
        dims,
        data: bytes[header..].to_vec(),
    })
}

fn write_idx(path: &Path, magic: u32, dims: &[usize], data: &[u8]) -> Result<(), FormatError> {
    let mut buf = Vec::with_capacity(4 + 4 * dims.len() + data.len());
    let mut word = [0u8; 4];
    BigEndian::write_u32(&mut word, magic);
    buf.extend_from_slice(&word);
    for &d in dims {
        BigEndian::write_u32(&mut word, d as u32);
        buf.extend_from_slice(&word);
    }
    buf.extend_from_slice(data);
    fs::write(path, buf).map_err(io_err(path))
}

/// Reads an image file (`n×h×w`, or `n×h×w×c` interleaved) and a label
/// file. Pixels are scaled by 1/255 and stored channel-major.
pub fn read_dataset(images: &Path, labels: &Path, classes: Option<usize>) -> Result<LabeledDataset, FormatError> {
    let img = read_idx_images(images)?;
    let lab = read_idx(labels, &[IDX_LABELS])?;
    let labels_v: Vec<usize> = lab.data.iter().map(|&b| b as usize).collect();
    if labels_v.len() != img.1.len() {
        return Err(FormatError::Schema {
            path: labels.to_owned(),
            msg: format!("{} labels for {} images", labels_v.len(), img.1.len()),
        });
    }
    let classes = classes.unwrap_or_else(|| labels_v.iter().max().map_or(0, |m| m + 1));
    LabeledDataset::new(img.0, classes, img.1, labels_v).map_err(|e| FormatError::Schema {
        path: labels.to_owned(),
        msg: e.to_string(),
    })
}

fn read_idx_images(path: &Path) -> Result<(ImageSpec, Vec<Vec<f64>>), FormatError> {
    let idx = read_idx(path, &[IDX_IMAGES, IDX_IMAGES_HWC])?;
    let (n, h, w, c) = match idx.dims[..] {
        [n, h, w] => (n, h, w, 1),
        [n, h, w, c] => (n, h, w, c),
        _ => unreachable!("read_idx checked the dimension count"),
    };
    let spec = ImageSpec::new(h, w, c).map_err(|e| FormatError::Schema {
        path: path.to_owned(),
        msg: e.to_string(),
    })?;
    let per = h * w * c;
    let images = (0..n)
        .map(|i| {
            let src = &idx.data[i * per..(i + 1) * per];
            let mut out = vec![0.0; per];
            for y in 0..h {
                for x in 0..w {
                    for ch in 0..c {
                        out[(ch * h + y) * w + x] = f64::from(src[(y * w + x) * c + ch]) / 255.0;
                    }
                }
            }
            out
        })
        .collect();
    Ok((spec, images))
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes images (quantised to bytes, interleaved channels when `c > 1`)
/// and labels.
pub fn write_dataset(data: &LabeledDataset, images: &Path, labels: &Path) -> Result<(), FormatError> {
    let ImageSpec {
        height: h,
        width: w,
        channels: c,
        ..
    } = data.spec;
    let mut bytes = Vec::with_capacity(data.len() * h * w * c);
    for img in &data.images {
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    bytes.push(to_byte(img[(ch * h + y) * w + x]));
                }
            }
        }
    }
    if c == 1 {
        write_idx(images, IDX_IMAGES, &[data.len(), h, w], &bytes)?;
    } else {
        write_idx(images, IDX_IMAGES_HWC, &[data.len(), h, w, c], &bytes)?;
    }
    let lab = data
        .labels
        .iter()
        .map(|&l| u8::try_from(l))
        .collect::<Result<Vec<u8>, _>>()
        .map_err(|_| FormatError::Schema {
            path: labels.to_owned(),
            msg: "IDX labels are single bytes; class index above 255".into(),
        })?;
    write_idx(labels, IDX_LABELS, &[lab.len()], &lab)
}

pub const MODEL_SCHEMA: &str = "lazyattack.model/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema: String,
    pub kind: String,
    pub layers: Vec<LayerFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerFile {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: String,
    /// Row-major, `outputs × inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ModelFile {
    pub fn from_model(model: &Model) -> Self {
        Self {
            schema: MODEL_SCHEMA.into(),
            kind: model.kind().into(),
            layers: model
                .layers()
                .iter()
                .map(|l| LayerFile {
                    inputs: l.inputs,
                    outputs: l.outputs,
                    activation: l.activation.name().into(),
                    weights: l.weights.clone(),
                    bias: l.bias.clone(),
                })
                .collect(),
        }
    }
}

pub fn save_model(model: &Model, path: &Path) -> Result<(), FormatError> {
    let text = serde_json::to_string_pretty(&ModelFile::from_model(model)).expect("models serialise");
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn load_model(path: &Path) -> Result<Model, FormatError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_model(&text, path)
}

fn parse_model(text: &str, path: &Path) -> Result<Model, FormatError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| {
        // serde_json reports 1-based line/column; turn that into a byte offset.
        let offset = text
            .split_inclusive('\n')
            .take(e.line().saturating_sub(1))
            .map(str::len)
            .sum::<usize>()
            + e.column().saturating_sub(1);
        FormatError::Malformed {
            path: path.to_owned(),
            offset: offset as u64,
            msg: e.to_string(),
        }
    })?;
    let schema = |msg: String| FormatError::Schema {
        path: path.to_owned(),
        msg,
    };
    if file.schema != MODEL_SCHEMA {
        return Err(schema(format!("schema {:?}, expected {MODEL_SCHEMA:?}", file.schema)));
    }
    let layers = file
        .layers
        .into_iter()
        .map(|l| {
            let act = Activation::parse(&l.activation)
                .ok_or_else(|| schema(format!("unknown activation {:?}", l.activation)))?;
            Dense::new(l.inputs, l.outputs, l.weights, l.bias, act).map_err(|e| schema(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Model::from_layers(&file.kind, layers).map_err(|e| schema(e.to_string()))
}

/// How a campaign's `queries` column is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryKind {
    /// Loss-oracle queries, comparable across black-box methods.
    Oracle,
    /// Gradient steps of a white-box baseline; not comparable.
    Gradient,
}

/// One row of a per-image campaign CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: usize,
    pub label: usize,
    pub target: Option<usize>,
    pub success: bool,
    pub queries: u64,
    pub query_kind: QueryKind,
    pub final_f: Option<f64>,
}

pub fn write_records(path: &Path, records: &[ImageRecord]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_records(path: &Path) -> Result<Vec<ImageRecord>, FormatError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

fn csv_err(path: &Path, e: csv::Error) -> FormatError {
    let offset = e.position().map(|p| p.byte());
    let msg = e.to_string();
    match (e.into_kind(), offset) {
        (csv::ErrorKind::Io(source), _) => FormatError::Io {
            path: path.to_owned(),
            source,
        },
        (_, Some(offset)) => FormatError::Malformed {
            path: path.to_owned(),
            offset,
            msg,
        },
        (_, None) => FormatError::Schema {
            path: path.to_owned(),
            msg,
        },
    }
}

/// `(queries, success_rate)` rows, one per distinct success count.
pub fn write_curve(path: &Path, curve: &[(u64, f64)]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["queries", "success_rate"])
        .map_err(|e| csv_err(path, e))?;
    for (q, r) in curve {
        w.write_record([q.to_string(), r.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

/// Per-image perturbations `x_adv − x`, space-separated, for the noise
/// histogram.
pub fn write_noise(path: &Path, epsilon: f64, rows: &[(usize, Vec<f64>)]) -> Result<(), FormatError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut out = io::BufWriter::new(file);
    let mut put = || -> io::Result<()> {
        writeln!(out, "image_id,epsilon,delta")?;
        for (id, delta) in rows {
            let d: Vec<String> = delta.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{id},{epsilon},{}", d.join(" "))?;
        }
        out.flush()
    };
    put().map_err(io_err(path))
}

pub struct NoiseFile {
    pub epsilon: f64,
    pub rows: Vec<(usize, Vec<f64>)>,
}

pub fn read_noise(path: &Path) -> Result<NoiseFile, FormatError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut epsilon = None;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let offset = rec.position().map_or(0, |p| p.byte());
        let bad = |msg: String| FormatError::Malformed {
            path: path.to_owned(),
            offset,
            msg,
        };
        if rec.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", rec.len())));
        }
        let id: usize = rec[0].parse().map_err(|_| bad(format!("bad image id {:?}", &rec[0])))?;
        let eps: f64 = rec[1].parse().map_err(|_| bad(format!("bad epsilon {:?}", &rec[1])))?;
        let delta = rec[2]
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad value {t:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        match epsilon {
            None => epsilon = Some(eps),
            Some(e) if e != eps => return Err(bad("epsilon differs between rows".into())),
            Some(_) => {}
        }
        rows.push((id, delta));
    }
    Ok(NoiseFile {
        epsilon: epsilon.unwrap_or(0.0),
        rows,
    })
}
