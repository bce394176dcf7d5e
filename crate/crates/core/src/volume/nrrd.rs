//! Reader and writer for a small, strict subset of NRRD.
//!
//! Supported: `NRRD000x` magic, `dimension: 3`, `type` one of `float`,
//! `uint8`, `uint32` (plus their standard aliases), `encoding: raw`,
//! `endian: little`. Comment lines (`#`) and key/value lines (`key:=value`)
//! are skipped; `space directions` and other informational fields are
//! accepted and ignored.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{BinaryVolume, Dims, LabelVolume, ScalarVolume};

/// A volume of whichever element type the file header declared.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyVolume {
    Scalar(ScalarVolume),
    Binary(BinaryVolume),
    Label(LabelVolume),
}

impl AnyVolume {
    pub fn dims(&self) -> Dims {
        match self {
            AnyVolume::Scalar(v) => v.dims(),
            AnyVolume::Binary(v) => v.dims(),
            AnyVolume::Label(v) => v.dims(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AnyVolume::Scalar(_) => "float",
            AnyVolume::Binary(_) => "uint8",
            AnyVolume::Label(_) => "uint32",
        }
    }

    pub fn into_scalar(self) -> Result<ScalarVolume> {
        match self {
            AnyVolume::Scalar(v) => Ok(v),
            other => Err(Error::WrongKind {
                expected: "float",
                found: other.kind(),
            }),
        }
    }

    pub fn into_binary(self) -> Result<BinaryVolume> {
        match self {
            AnyVolume::Binary(v) => Ok(v),
            other => Err(Error::WrongKind {
                expected: "uint8",
                found: other.kind(),
            }),
        }
    }

    pub fn into_labels(self) -> Result<LabelVolume> {
        match self {
            AnyVolume::Label(v) => Ok(v),
            other => Err(Error::WrongKind {
                expected: "uint32",
                found: other.kind(),
            }),
        }
    }
}

impl From<ScalarVolume> for AnyVolume {
    fn from(v: ScalarVolume) -> Self {
        AnyVolume::Scalar(v)
    }
}

impl From<BinaryVolume> for AnyVolume {
    fn from(v: BinaryVolume) -> Self {
        AnyVolume::Binary(v)
    }
}

impl From<LabelVolume> for AnyVolume {
    fn from(v: LabelVolume) -> Self {
        AnyVolume::Label(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ElementType {
    Float,
    UInt8,
    UInt32,
}

impl ElementType {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "float" => Ok(ElementType::Float),
            "uint8" | "uchar" | "unsigned char" | "uint8_t" => Ok(ElementType::UInt8),
            "uint32" | "uint" | "unsigned int" | "uint32_t" => Ok(ElementType::UInt32),
            other => Err(Error::Unsupported {
                field: "type",
                value: other.to_string(),
            }),
        }
    }

    fn name(self) -> &'static str {
        match self {
            ElementType::Float => "float",
            ElementType::UInt8 => "uint8",
            ElementType::UInt32 => "uint32",
        }
    }

    fn size(self) -> usize {
        match self {
            ElementType::UInt8 => 1,
            ElementType::Float | ElementType::UInt32 => 4,
        }
    }
}

struct Header {
    ty: ElementType,
    dims: Dims,
}

fn parse_header(text: &str) -> Result<Header> {
    let mut lines = text.split('\n');
    let magic = lines.next().unwrap_or_default();
    if !(magic.len() == 8 && magic.starts_with("NRRD000")) {
        return Err(Error::MalformedHeader(format!("bad magic {magic:?}")));
    }

    let mut ty = None;
    let mut dimension = None;
    let mut sizes: Option<Vec<usize>> = None;
    let mut encoding = None;
    let mut endian = None;

    for line in lines {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if line.contains(":=") {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| Error::MalformedHeader(format!("unparseable line {line:?}")))?;
        let value = value.trim();
        match key.trim() {
            "type" => ty = Some(ElementType::parse(value)?),
            "dimension" => {
                dimension = Some(value.parse::<usize>().map_err(|_| {
                    Error::MalformedHeader(format!("bad dimension {value:?}"))
                })?)
            }
            "sizes" => {
                sizes = Some(
                    value
                        .split_whitespace()
                        .map(|s| s.parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::MalformedHeader(format!("bad sizes {value:?}")))?,
                )
            }
            "encoding" => encoding = Some(value.to_string()),
            "endian" => endian = Some(value.to_string()),
            _ => {}
        }
    }

    let ty = ty.ok_or_else(|| Error::MalformedHeader("missing type".into()))?;
    let dimension = dimension.ok_or_else(|| Error::MalformedHeader("missing dimension".into()))?;
    if dimension != 3 {
        return Err(Error::UnsupportedDimension(dimension));
    }
    let sizes = sizes.ok_or_else(|| Error::MalformedHeader("missing sizes".into()))?;
    if sizes.len() != 3 {
        return Err(Error::MalformedHeader(format!(
            "sizes has {} entries, dimension is 3",
            sizes.len()
        )));
    }
    match encoding.as_deref() {
        Some("raw") => {}
        Some(other) => {
            return Err(Error::Unsupported {
                field: "encoding",
                value: other.to_string(),
            })
        }
        None => return Err(Error::MalformedHeader("missing encoding".into())),
    }
    match endian.as_deref() {
        Some("little") => {}
        None if ty.size() == 1 => {}
        Some(other) => {
            return Err(Error::Unsupported {
                field: "endian",
                value: other.to_string(),
            })
        }
        None => return Err(Error::MalformedHeader("missing endian".into())),
    }

    Ok(Header {
        ty,
        dims: Dims::new(sizes[0], sizes[1], sizes[2])?,
    })
}

/// Splits a file into header text and payload at the first blank line.
fn split_header(bytes: &[u8]) -> Result<(&str, &[u8])> {
    let pos = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| Error::MalformedHeader("no blank line after header".into()))?;
    let header = std::str::from_utf8(&bytes[..pos])
        .map_err(|_| Error::MalformedHeader("header is not ASCII".into()))?;
    Ok((header, &bytes[pos + 2..]))
}

fn decode(bytes: &[u8]) -> Result<AnyVolume> {
    let (text, payload) = split_header(bytes)?;
    let Header { ty, dims } = parse_header(text)?;
    let expected = dims.len() * ty.size();
    if payload.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: payload.len(),
        });
    }
    Ok(match ty {
        ElementType::Float => {
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let v = ScalarVolume::from_vec(dims, data)?;
            v.check_finite()?;
            AnyVolume::Scalar(v)
        }
        ElementType::UInt8 => {
            AnyVolume::Binary(BinaryVolume::from_vec(dims, payload.iter().map(|&b| b != 0).collect())?)
        }
        ElementType::UInt32 => {
            let data = payload
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            AnyVolume::Label(LabelVolume::from_vec(dims, data)?)
        }
    })
}

fn encode(vol: &AnyVolume) -> Vec<u8> {
    let dims = vol.dims();
    let ty = match vol {
        AnyVolume::Scalar(_) => ElementType::Float,
        AnyVolume::Binary(_) => ElementType::UInt8,
        AnyVolume::Label(_) => ElementType::UInt32,
    };
    let header = format!(
        "NRRD0004\ntype: {}\ndimension: 3\nsizes: {} {} {}\nencoding: raw\nendian: little\n\n",
        ty.name(),
        dims.nx,
        dims.ny,
        dims.nz
    );
    let mut out = Vec::with_capacity(header.len() + dims.len() * ty.size());
    out.extend_from_slice(header.as_bytes());
    match vol {
        AnyVolume::Scalar(v) => v.data().iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        AnyVolume::Binary(v) => out.extend(v.data().iter().map(|&b| b as u8)),
        AnyVolume::Label(v) => v.data().iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    out
}

/// Loads a volume from an NRRD file.
pub fn read_volume(path: impl AsRef<Path>) -> Result<AnyVolume> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Stores a volume as an NRRD file with a raw little-endian payload.
pub fn write_volume(vol: impl Into<AnyVolume>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(&vol.into())).map_err(|e| Error::io(path, e))
}
