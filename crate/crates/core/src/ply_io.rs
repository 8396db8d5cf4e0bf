//! Binary PLY reader/writer for the standard 3DGS point layout.
//!
//! Only `binary_little_endian 1.0` with exactly the 62 float properties below
//! is accepted; normals are written as zeros and dropped on read.
//!
//! ```text
//! x y z  nx ny nz  f_dc_0..f_dc_2  f_rest_0..f_rest_44  opacity  scale_0..scale_2  rot_0..rot_3
//! ```

use std::io::{self, BufRead, BufReader, Read, Write};

use crate::model::{CloudError, GaussianCloud, SH_REST_DIM};

/// Float properties per vertex.
pub const PROPERTIES_PER_VERTEX: usize = 62;
/// Payload bytes per vertex.
pub const BYTES_PER_VERTEX: usize = PROPERTIES_PER_VERTEX * 4;

const MAX_HEADER_BYTES: usize = 1 << 16;

#[derive(Debug, thiserror::Error)]
pub enum PlyError {
    #[error("malformed PLY header: {0}")]
    MalformedHeader(String),
    #[error("unexpected PLY property set: {0}")]
    UnexpectedProperties(String),
    #[error("truncated PLY payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("PLY contains invalid values: {}", .0.first().map(|e| e.to_string()).unwrap_or_default())]
    InvalidCloud(Vec<CloudError>),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Parsed header of a 3DGS PLY file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlyHeaderInfo {
    pub vertex_count: usize,
    pub property_names: Vec<String>,
}

/// Property names in file order.
pub fn property_names() -> Vec<String> {
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((0..3).map(|i| format!("f_dc_{i}")));
    names.extend((0..SH_REST_DIM).map(|i| format!("f_rest_{i}")));
    names.push("opacity".into());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    names
}

pub fn header_bytes(vertex_count: usize) -> Vec<u8> {
    let mut h = String::new();
    h.push_str("ply\nformat binary_little_endian 1.0\n");
    h.push_str(&format!("element vertex {vertex_count}\n"));
    for name in property_names() {
        h.push_str("property float ");
        h.push_str(&name);
        h.push('\n');
    }
    h.push_str("end_header\n");
    h.into_bytes()
}

/// Writes `cloud` as a 3DGS PLY. The cloud must be valid.
pub fn write_ply<W: Write>(cloud: &GaussianCloud, writer: W) -> io::Result<()> {
    let mut w = io::BufWriter::new(writer);
    w.write_all(&header_bytes(cloud.count))?;
    let mut row = Vec::with_capacity(BYTES_PER_VERTEX);
    for i in 0..cloud.count {
        row.clear();
        let mut put = |v: &[f32]| {
            for x in v {
                row.extend_from_slice(&x.to_le_bytes());
            }
        };
        put(&cloud.position[i * 3..i * 3 + 3]);
        put(&[0.0; 3]);
        put(&cloud.color_dc[i * 3..i * 3 + 3]);
        put(&cloud.color_sh[i * SH_REST_DIM..(i + 1) * SH_REST_DIM]);
        put(&cloud.logit_opacity[i..i + 1]);
        put(&cloud.log_scale[i * 3..i * 3 + 3]);
        put(&cloud.rotation[i * 4..i * 4 + 4]);
        w.write_all(&row)?;
    }
    w.flush()
}

pub fn write_ply_bytes(cloud: &GaussianCloud) -> Vec<u8> {
    let mut out =
        Vec::with_capacity(header_bytes(cloud.count).len() + cloud.count * BYTES_PER_VERTEX);
    write_ply(cloud, &mut out).expect("writing to a Vec cannot fail");
    out
}

fn read_header<R: BufRead>(reader: &mut R) -> Result<PlyHeaderInfo, PlyError> {
    let mut consumed = 0usize;
    let mut next_line = |reader: &mut R| -> Result<String, PlyError> {
        let mut buf = Vec::new();
        let n = reader.read_until(b'\n', &mut buf)?;
        consumed += n;
        if n == 0 {
            return Err(PlyError::MalformedHeader("unexpected end of header".into()));
        }
        if consumed > MAX_HEADER_BYTES {
            return Err(PlyError::MalformedHeader("header too long".into()));
        }
        let line = String::from_utf8(buf)
            .map_err(|_| PlyError::MalformedHeader("header is not valid UTF-8".into()))?;
        Ok(line.trim_end_matches(['\n', '\r']).to_string())
    };

    if next_line(reader)? != "ply" {
        return Err(PlyError::MalformedHeader("missing 'ply' magic".into()));
    }
    let mut format_seen = false;
    let mut vertex_count = None;
    let mut names = Vec::new();
    loop {
        let line = next_line(reader)?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["end_header"] => break,
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["format", fmt, version] => {
                if *fmt != "binary_little_endian" {
                    return Err(PlyError::MalformedHeader(format!(
                        "unsupported format '{fmt}'"
                    )));
                }
                if *version != "1.0" {
                    return Err(PlyError::MalformedHeader(format!(
                        "unsupported version '{version}'"
                    )));
                }
                format_seen = true;
            }
            ["element", "vertex", n] => {
                if vertex_count.is_some() {
                    return Err(PlyError::MalformedHeader("duplicate vertex element".into()));
                }
                let n = n
                    .parse::<usize>()
                    .map_err(|_| PlyError::MalformedHeader(format!("bad vertex count '{n}'")))?;
                vertex_count = Some(n);
            }
            ["element", other, ..] => {
                return Err(PlyError::UnexpectedProperties(format!(
                    "unexpected element '{other}'"
                )));
            }
            ["property", ty, name] => {
                if vertex_count.is_none() {
                    return Err(PlyError::MalformedHeader("property before element".into()));
                }
                if *ty != "float" && *ty != "float32" {
                    return Err(PlyError::UnexpectedProperties(format!(
                        "property '{name}' has type '{ty}', expected float"
                    )));
                }
                names.push(name.to_string());
            }
            ["property", ..] => {
                return Err(PlyError::UnexpectedProperties(format!(
                    "unsupported property line '{line}'"
                )));
            }
            _ => {
                return Err(PlyError::MalformedHeader(format!(
                    "unrecognized header line '{line}'"
                )))
            }
        }
    }
    if !format_seen {
        return Err(PlyError::MalformedHeader("missing format line".into()));
    }
    let vertex_count =
        vertex_count.ok_or_else(|| PlyError::MalformedHeader("missing vertex element".into()))?;
    let expected = property_names();
    if names != expected {
        let detail = match names.iter().zip(&expected).position(|(a, b)| a != b) {
            Some(i) => format!("property {i} is '{}', expected '{}'", names[i], expected[i]),
            None => format!("{} properties, expected {}", names.len(), expected.len()),
        };
        return Err(PlyError::UnexpectedProperties(detail));
    }
    Ok(PlyHeaderInfo {
        vertex_count,
        property_names: names,
    })
}

/// Reads a 3DGS PLY and validates the resulting cloud.
pub fn read_ply<R: Read>(reader: R) -> Result<GaussianCloud, PlyError> {
    let mut reader = BufReader::new(reader);
    let header = read_header(&mut reader)?;
    let n = header.vertex_count;
    let expected = n
        .checked_mul(BYTES_PER_VERTEX)
        .ok_or_else(|| PlyError::MalformedHeader("vertex count overflows".into()))?;

    let mut cloud = GaussianCloud {
        count: n,
        ..GaussianCloud::default()
    };
    // Reserve lazily: the header count is untrusted.
    let mut payload = Vec::new();
    let found = reader
        .by_ref()
        .take(expected as u64)
        .read_to_end(&mut payload)?;
    if found < expected {
        return Err(PlyError::Truncated { expected, found });
    }

    let floats = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
    cloud.position.reserve_exact(n * 3);
    cloud.log_scale.reserve_exact(n * 3);
    cloud.rotation.reserve_exact(n * 4);
    cloud.logit_opacity.reserve_exact(n);
    cloud.color_dc.reserve_exact(n * 3);
    cloud.color_sh.reserve_exact(n * SH_REST_DIM);
    let mut row = [0f32; PROPERTIES_PER_VERTEX];
    let mut floats = floats.peekable();
    while floats.peek().is_some() {
        for slot in row.iter_mut() {
            *slot = floats
                .next()
                .expect("payload length is a multiple of the row size");
        }
        cloud.position.extend_from_slice(&row[0..3]);
        cloud.color_dc.extend_from_slice(&row[6..9]);
        cloud.color_sh.extend_from_slice(&row[9..54]);
        cloud.logit_opacity.push(row[54]);
        cloud.log_scale.extend_from_slice(&row[55..58]);
        cloud.rotation.extend_from_slice(&row[58..62]);
    }
    cloud.validate().map_err(PlyError::InvalidCloud)?;
    Ok(cloud)
}
