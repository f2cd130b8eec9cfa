//! Strict NRRD subset for 3D label masks.
//!
//! Accepted: magic `NRRD0004`, `type` uint8|uint16, `dimension: 3`, `sizes`,
//! `space: left-posterior-superior`, `space directions`, `space origin`,
//! `encoding` raw|gzip, little-endian, attached data, x fastest.
//!
//! NRRD stores spacing folded into the direction vectors. To make the
//! write/read round trip exact for rotated grids the writer also records the
//! unit directions and spacing as `segqc_direction:=` / `segqc_spacing:=`
//! key-value pairs; the reader prefers them whenever they agree with
//! `space directions`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::geometry::VolumeGeometry;
use crate::volume::Label;

pub const MAGIC: &str = "NRRD0004";
const MAX_HEADER_BYTES: usize = 1 << 16;
const KV_SPACING: &str = "segqc_spacing";
const KV_DIRECTION: &str = "segqc_direction";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Raw,
    Gzip,
}

impl Encoding {
    pub fn as_str(self) -> &'static str {
        match self {
            Encoding::Raw => "raw",
            Encoding::Gzip => "gzip",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoxelType {
    U8,
    U16,
}

impl VoxelType {
    pub fn bytes(self) -> usize {
        match self {
            VoxelType::U8 => 1,
            VoxelType::U16 => 2,
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "uint8" | "uchar" | "unsigned char" | "uint8_t" => Ok(VoxelType::U8),
            "uint16" | "ushort" | "unsigned short" | "unsigned short int" | "uint16_t" => {
                Ok(VoxelType::U16)
            }
            other => Err(Error::parse("type", format!("unsupported type {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NrrdHeader {
    pub voxel_type: VoxelType,
    pub geometry: VolumeGeometry,
    pub encoding: Encoding,
    pub key_values: BTreeMap<String, String>,
}

/// Parses a complete NRRD file held in memory.
pub fn decode(bytes: &[u8]) -> Result<(NrrdHeader, Vec<Label>)> {
    let (header_text, data) = split_header(bytes)?;
    let header = parse_header(header_text)?;
    let voxels = decode_data(&header, data)?;
    Ok((header, voxels))
}

fn split_header(bytes: &[u8]) -> Result<(&str, &[u8])> {
    let limit = bytes.len().min(MAX_HEADER_BYTES);
    let end = bytes[..limit]
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| Error::parse("header", "no blank line terminating the header"))?;
    let text = std::str::from_utf8(&bytes[..end])
        .map_err(|_| Error::parse("header", "header is not valid UTF-8"))?;
    Ok((text, &bytes[end + 2..]))
}

fn parse_header(text: &str) -> Result<NrrdHeader> {
    let mut lines = text.split('\n');
    let magic = lines.next().unwrap_or("").trim_end_matches('\r');
    if magic != MAGIC {
        return Err(Error::parse("magic", format!("expected {MAGIC}, got {magic:?}")));
    }

    let mut fields: BTreeMap<String, String> = BTreeMap::new();
    let mut key_values = BTreeMap::new();
    for line in lines {
        let line = line.trim_end_matches('\r');
        if line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once(":=") {
            key_values.insert(k.to_string(), v.to_string());
            continue;
        }
        let (k, v) = line
            .split_once(": ")
            .ok_or_else(|| Error::parse(line, "expected `field: value`"))?;
        if fields.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::parse(k, "field given twice"));
        }
    }

    let required = |name: &str| -> Result<&str> {
        fields
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| Error::parse(name, "required field missing"))
    };

    let voxel_type = VoxelType::parse(required("type")?)?;

    let dimension = required("dimension")?;
    if dimension != "3" {
        return Err(Error::parse("dimension", format!("expected 3, got {dimension:?}")));
    }

    let space = required("space")?;
    if !matches!(space, "left-posterior-superior" | "LPS") {
        return Err(Error::parse("space", format!("expected left-posterior-superior, got {space:?}")));
    }

    let sizes: Vec<usize> = required("sizes")?
        .split_whitespace()
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse("sizes", e.to_string()))?;
    let dims: [usize; 3] = sizes
        .try_into()
        .map_err(|_| Error::parse("sizes", "expected 3 sizes"))?;

    let vectors = parse_vectors(required("space directions")?, "space directions")?;
    let vectors: [[f64; 3]; 3] = vectors
        .try_into()
        .map_err(|_| Error::parse("space directions", "expected 3 vectors"))?;
    let origin = parse_vectors(required("space origin")?, "space origin")?;
    let origin: [f64; 3] = match origin.as_slice() {
        [o] => *o,
        _ => return Err(Error::parse("space origin", "expected a single vector")),
    };

    let encoding = match required("encoding")? {
        "raw" => Encoding::Raw,
        "gzip" | "gz" => Encoding::Gzip,
        other => return Err(Error::parse("encoding", format!("unsupported encoding {other:?}"))),
    };

    match fields.get("endian").map(String::as_str) {
        Some("little") => {}
        None if voxel_type == VoxelType::U8 => {}
        None => return Err(Error::parse("endian", "required for multi-byte types")),
        Some(other) => {
            return Err(Error::parse("endian", format!("only little-endian supported, got {other:?}")))
        }
    }
    if fields.contains_key("data file") || fields.contains_key("datafile") {
        return Err(Error::parse("data file", "detached data is not supported"));
    }
    for skip in ["line skip", "byte skip"] {
        if let Some(v) = fields.get(skip) {
            if v != "0" {
                return Err(Error::parse(skip, "must be 0"));
            }
        }
    }

    let (spacing, direction) = resolve_axes(&vectors, &key_values)?;
    let geometry = VolumeGeometry::new(dims, spacing, origin, direction)
        .map_err(|e| Error::parse("space directions", e.to_string()))?;

    Ok(NrrdHeader {
        voxel_type,
        geometry,
        encoding,
        key_values,
    })
}

/// Parses `(a,b,c) (d,e,f) ...`.
fn parse_vectors(s: &str, field: &str) -> Result<Vec<[f64; 3]>> {
    let mut out = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        let inner = rest
            .strip_prefix('(')
            .and_then(|r| r.split_once(')'))
            .ok_or_else(|| Error::parse(field, format!("malformed vector list {s:?}")))?;
        let comps: Vec<f64> = inner
            .0
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(field, e.to_string()))?;
        let v: [f64; 3] = comps
            .try_into()
            .map_err(|_| Error::parse(field, "vectors must have 3 components"))?;
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::parse(field, "non-finite component"));
        }
        out.push(v);
        rest = inner.1.trim_start();
    }
    Ok(out)
}

/// Splits NRRD axis vectors into spacing and unit direction columns.
fn resolve_axes(
    vectors: &[[f64; 3]; 3],
    key_values: &BTreeMap<String, String>,
) -> Result<([f64; 3], [[f64; 3]; 3])> {
    let mut spacing = [0.0; 3];
    let mut direction = [[0.0; 3]; 3];
    for (c, v) in vectors.iter().enumerate() {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::parse("space directions", format!("axis {c} has zero length")));
        }
        spacing[c] = norm;
        for r in 0..3 {
            direction[r][c] = v[r] / norm;
        }
    }

    if let (Some(sp), Some(dir)) = (key_values.get(KV_SPACING), key_values.get(KV_DIRECTION)) {
        if let (Some(sp), Some(dir)) = (parse_floats::<3>(sp), parse_floats::<9>(dir)) {
            let exact_dir = [
                [dir[0], dir[1], dir[2]],
                [dir[3], dir[4], dir[5]],
                [dir[6], dir[7], dir[8]],
            ];
            let agrees = (0..3).all(|c| {
                (0..3).all(|r| {
                    let v = exact_dir[r][c] * sp[c];
                    (v - vectors[c][r]).abs() <= 1e-9 * (1.0 + vectors[c][r].abs())
                })
            });
            if agrees {
                return Ok((sp, exact_dir));
            }
        }
    }
    Ok((spacing, direction))
}

fn parse_floats<const N: usize>(s: &str) -> Option<[f64; N]> {
    let v: Vec<f64> = s
        .split_whitespace()
        .map(|t| t.parse().ok())
        .collect::<Option<_>>()?;
    v.try_into().ok()
}

fn decode_data(header: &NrrdHeader, data: &[u8]) -> Result<Vec<Label>> {
    let count = header.geometry.voxel_count();
    let expected = count
        .checked_mul(header.voxel_type.bytes())
        .ok_or_else(|| Error::parse("sizes", "voxel buffer size overflows"))?;

    let raw: std::borrow::Cow<[u8]> = match header.encoding {
        Encoding::Raw => std::borrow::Cow::Borrowed(data),
        Encoding::Gzip => {
            // Read at most one byte past the expected size so a corrupt
            // header cannot trigger an unbounded allocation.
            let mut buf = Vec::with_capacity(expected.min(1 << 28));
            MultiGzDecoder::new(data)
                .take(expected as u64 + 1)
                .read_to_end(&mut buf)
                .map_err(|e| Error::parse("encoding", format!("gzip stream corrupt: {e}")))?;
            std::borrow::Cow::Owned(buf)
        }
    };

    if raw.len() < expected {
        return Err(Error::Truncation {
            expected,
            found: raw.len(),
        });
    }
    if raw.len() > expected {
        return Err(Error::parse(
            "sizes",
            format!("{} bytes of voxel data exceed the declared {expected}", raw.len()),
        ));
    }

    Ok(match header.voxel_type {
        VoxelType::U8 => raw.iter().map(|&b| b as Label).collect(),
        VoxelType::U16 => raw
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect(),
    })
}

/// Serializes a mask. uint8 is used whenever every label fits.
pub fn encode(geometry: &VolumeGeometry, voxels: &[Label], encoding: Encoding) -> Result<Vec<u8>> {
    if voxels.len() != geometry.voxel_count() {
        return Err(Error::Truncation {
            expected: geometry.voxel_count(),
            found: voxels.len(),
        });
    }
    let voxel_type = if voxels.iter().all(|&v| v <= u8::MAX as Label) {
        VoxelType::U8
    } else {
        VoxelType::U16
    };

    let dims = geometry.dims();
    let sp = geometry.spacing();
    let dir = geometry.direction();
    let origin = geometry.origin();
    let axis = |c: usize| {
        format!(
            "({},{},{})",
            dir[0][c] * sp[c],
            dir[1][c] * sp[c],
            dir[2][c] * sp[c]
        )
    };

    let mut out = Vec::with_capacity(voxels.len() / 4 + 512);
    let type_name = match voxel_type {
        VoxelType::U8 => "uint8",
        VoxelType::U16 => "uint16",
    };
    let header = format!(
        "{MAGIC}\n\
         type: {type_name}\n\
         dimension: 3\n\
         space: left-posterior-superior\n\
         sizes: {} {} {}\n\
         space directions: {} {} {}\n\
         kinds: domain domain domain\n\
         endian: little\n\
         encoding: {}\n\
         space origin: ({},{},{})\n\
         {KV_SPACING}:={} {} {}\n\
         {KV_DIRECTION}:={} {} {} {} {} {} {} {} {}\n\n",
        dims[0],
        dims[1],
        dims[2],
        axis(0),
        axis(1),
        axis(2),
        encoding.as_str(),
        origin[0],
        origin[1],
        origin[2],
        sp[0],
        sp[1],
        sp[2],
        dir[0][0],
        dir[0][1],
        dir[0][2],
        dir[1][0],
        dir[1][1],
        dir[1][2],
        dir[2][0],
        dir[2][1],
        dir[2][2],
    );
    out.extend_from_slice(header.as_bytes());

    let payload: Vec<u8> = match voxel_type {
        VoxelType::U8 => voxels.iter().map(|&v| v as u8).collect(),
        VoxelType::U16 => voxels.iter().flat_map(|v| v.to_le_bytes()).collect(),
    };
    match encoding {
        Encoding::Raw => out.extend_from_slice(&payload),
        Encoding::Gzip => {
            let mut enc = GzEncoder::new(out, Compression::fast());
            enc.write_all(&payload)
                .map_err(|e| Error::io("<gzip buffer>", e))?;
            out = enc.finish().map_err(|e| Error::io("<gzip buffer>", e))?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(extra: &str, sizes: &str) -> String {
        format!(
            "NRRD0004\n# comment\ntype: uint8\ndimension: 3\nspace: left-posterior-superior\n\
             sizes: {sizes}\nspace directions: (1,0,0) (0,1,0) (0,0,1)\nencoding: raw\n\
             space origin: (0,0,0)\n{extra}\n"
        )
    }

    #[test]
    fn parses_minimal_header() {
        let mut bytes = header("", "4 4 4").into_bytes();
        bytes.extend(std::iter::repeat_n(0u8, 64));
        let (h, v) = decode(&bytes).unwrap();
        assert_eq!(h.geometry.dims(), [4, 4, 4]);
        assert_eq!(h.voxel_type, VoxelType::U8);
        assert_eq!(v.len(), 64);
        assert!(v.iter().all(|&x| x == 0));
    }

    #[test]
    fn short_buffer_is_truncation() {
        let mut bytes = header("", "10 10 10").into_bytes();
        bytes.extend(std::iter::repeat(0u8).take(999));
        assert!(matches!(
            decode(&bytes),
            Err(Error::Truncation { expected: 1000, found: 999 })
        ));
    }

    #[test]
    fn errors_name_the_field() {
        let bad = |text: String| match decode(text.as_bytes()) {
            Err(Error::Parse { field, .. }) => field,
            other => panic!("expected parse error, got {other:?}"),
        };
        assert_eq!(bad(header("", "4 4").replace("NRRD0004", "NRRD0009")), "magic");
        assert_eq!(bad(header("", "4 4")), "sizes");
        assert_eq!(bad(header("", "4 4 4").replace("uint8", "float")), "type");
        assert_eq!(bad(header("", "4 4 4").replace("dimension: 3", "dimension: 2")), "dimension");
        assert_eq!(bad(header("", "4 4 4").replace("left-posterior-superior", "RAS")), "space");
        assert_eq!(bad(header("", "4 4 4").replace("raw", "bzip2")), "encoding");
        assert_eq!(bad(header("", "4 4 4").replace("space origin: (0,0,0)\n", "")), "space origin");
        assert_eq!(
            bad(header("endian: big\n", "4 4 4")),
            "endian"
        );
        assert_eq!(
            bad(header("", "4 4 4").replace("(0,1,0) (0,0,1)", "(0,1,0)")),
            "space directions"
        );
    }

    #[test]
    fn uint16_requires_endian() {
        let text = header("", "1 1 1").replace("uint8", "uint16");
        let mut bytes = text.into_bytes();
        bytes.extend([1, 0]);
        assert!(matches!(decode(&bytes), Err(Error::Parse { field, .. }) if field == "endian"));
    }

    #[test]
    fn uint16_little_endian_decoding() {
        let text = header("endian: little\n", "2 1 1").replace("uint8", "uint16");
        let mut bytes = text.into_bytes();
        bytes.extend([0x01, 0x02, 0xff, 0x00]);
        let (_, v) = decode(&bytes).unwrap();
        assert_eq!(v, vec![0x0201, 0x00ff]);
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = header("", "1 1 1").into_bytes();
        bytes.extend([0, 0]);
        assert!(decode(&bytes).is_err());
    }

    #[test]
    fn spacing_recovered_from_direction_vectors() {
        let text = header("", "1 1 1").replace(
            "(1,0,0) (0,1,0) (0,0,1)",
            "(0.7,0,0) (0,0.7,0) (0,0,2.5)",
        );
        let mut bytes = text.into_bytes();
        bytes.push(0);
        let (h, _) = decode(&bytes).unwrap();
        assert_eq!(h.geometry.spacing(), [0.7, 0.7, 2.5]);
    }

    #[test]
    fn gzip_round_trip() {
        let g = VolumeGeometry::axis_aligned([3, 2, 2], [1.0, 2.0, 3.0], [1.0, -2.0, 0.5]).unwrap();
        let voxels: Vec<Label> = (0..12).map(|i| (i * 37 % 300) as Label).collect();
        let bytes = encode(&g, &voxels, Encoding::Gzip).unwrap();
        let (h, back) = decode(&bytes).unwrap();
        assert_eq!(h.voxel_type, VoxelType::U16);
        assert_eq!(h.geometry, g);
        assert_eq!(back, voxels);
    }
}
