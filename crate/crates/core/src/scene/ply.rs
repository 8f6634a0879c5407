//! Binary little-endian PLY reader/writer for trained splat scenes.
//!
//! The canonical vertex layout is
//! `x y z nx ny nz f_dc_0..2 f_rest_0..44 opacity scale_0..2 rot_0..3`,
//! all `float`. Normals are parsed and discarded; the writer emits zeros.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::gaussians::{Gaussian, GaussianSet, SH_REST_LEN};
use super::SceneError;

/// Property names in canonical file order.
pub fn canonical_properties() -> Vec<String> {
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((0..3).map(|i| format!("f_dc_{i}")));
    names.extend((0..SH_REST_LEN).map(|i| format!("f_rest_{i}")));
    names.push("opacity".into());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    names
}

const FLOATS_PER_VERTEX: usize = 62;

pub fn load_splat_ply(path: impl AsRef<Path>) -> Result<GaussianSet, SceneError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| SceneError::io(path, e))?;
    parse_splat_ply(&bytes)
}

pub fn save_splat_ply(set: &GaussianSet, path: impl AsRef<Path>) -> Result<(), SceneError> {
    let path = path.as_ref();
    let bytes = encode_splat_ply(set);
    let mut f = fs::File::create(path).map_err(|e| SceneError::io(path, e))?;
    f.write_all(&bytes).map_err(|e| SceneError::io(path, e))
}

struct Header {
    vertex_count: usize,
    properties: Vec<String>,
    payload_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, SceneError> {
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| SceneError::Format("missing end_header".into()))?;
    let text = std::str::from_utf8(&bytes[..end])
        .map_err(|_| SceneError::Format("header is not valid text".into()))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(SceneError::Format("missing ply magic".into()));
    }

    let mut format_seen = false;
    let mut vertex_count = None;
    let mut properties = Vec::new();
    let mut in_vertex = false;
    for line in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, _version] => {
                if *fmt != "binary_little_endian" {
                    return Err(SceneError::Format(format!("unsupported format {fmt}")));
                }
                format_seen = true;
            }
            ["element", name, count] => {
                if *name != "vertex" {
                    return Err(SceneError::Format(format!("unsupported element {name}")));
                }
                if vertex_count.is_some() {
                    return Err(SceneError::Format("duplicate vertex element".into()));
                }
                let n = count
                    .parse::<usize>()
                    .map_err(|_| SceneError::Format(format!("bad vertex count {count}")))?;
                vertex_count = Some(n);
                in_vertex = true;
            }
            ["property", ty, name] => {
                if !in_vertex {
                    return Err(SceneError::Format(format!(
                        "property {name} outside vertex element"
                    )));
                }
                if *ty != "float" && *ty != "float32" {
                    return Err(SceneError::Format(format!(
                        "property {name} has type {ty}, expected float"
                    )));
                }
                properties.push(name.to_string());
            }
            ["property", "list", ..] => {
                return Err(SceneError::Format("list properties are not supported".into()));
            }
            _ => return Err(SceneError::Format(format!("unrecognized header line: {line}"))),
        }
    }
    if !format_seen {
        return Err(SceneError::Format("missing format line".into()));
    }
    let vertex_count =
        vertex_count.ok_or_else(|| SceneError::Format("missing vertex element".into()))?;
    Ok(Header {
        vertex_count,
        properties,
        payload_offset: end + END.len(),
    })
}

/// Parses splat PLY bytes. Accepts any property order and ignores unknown
/// float properties.
pub fn parse_splat_ply(bytes: &[u8]) -> Result<GaussianSet, SceneError> {
    let header = parse_header(bytes)?;
    let stride = header.properties.len();
    let column = |name: &str| -> Result<usize, SceneError> {
        header
            .properties
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| SceneError::Format(format!("missing property {name}")))
    };
    // canonical order except normals, which are dropped
    let required: Vec<usize> = canonical_properties()
        .iter()
        .filter(|n| !matches!(n.as_str(), "nx" | "ny" | "nz"))
        .map(|n| column(n))
        .collect::<Result<_, _>>()?;

    let payload = &bytes[header.payload_offset..];
    let needed = header.vertex_count * stride * 4;
    if payload.len() < needed {
        return Err(SceneError::Format(format!(
            "payload truncated: expected {needed} bytes, found {}",
            payload.len()
        )));
    }
    if payload.len() > needed {
        return Err(SceneError::Format("trailing bytes after vertex payload".into()));
    }

    let mut set = GaussianSet::with_capacity(header.vertex_count);
    let mut row = vec![0f32; stride];
    for (i, chunk) in payload.chunks_exact(stride * 4).enumerate() {
        for (v, b) in row.iter_mut().zip(chunk.chunks_exact(4)) {
            *v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        }
        if let Some(bad) = row.iter().position(|v| !v.is_finite()) {
            return Err(SceneError::Data {
                index: i,
                what: format!("non-finite property {}", header.properties[bad]),
            });
        }
        let mut vals = required.iter().map(|&c| row[c]);
        let mut next = || vals.next().expect("required column");
        let mut g = Gaussian::default();
        g.position = [next(), next(), next()];
        g.sh_dc = [next(), next(), next()];
        for k in 0..SH_REST_LEN {
            g.sh_rest[k] = next();
        }
        g.logit_opacity = next();
        g.log_scale = [next(), next(), next()];
        g.rotation = [next(), next(), next(), next()];
        set.push(g);
    }
    set.normalize_rotations()?;
    Ok(set)
}

pub fn encode_splat_ply(set: &GaussianSet) -> Vec<u8> {
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {}\n", set.len()));
    for name in canonical_properties() {
        header.push_str(&format!("property float {name}\n"));
    }
    header.push_str("end_header\n");

    let mut out = Vec::with_capacity(header.len() + set.len() * FLOATS_PER_VERTEX * 4);
    out.extend_from_slice(header.as_bytes());
    let mut put = |v: f32| out.extend_from_slice(&v.to_le_bytes());
    for g in set.iter() {
        g.position.iter().for_each(|&v| put(v));
        (0..3).for_each(|_| put(0.0));
        g.sh_dc.iter().for_each(|&v| put(v));
        g.sh_rest.iter().for_each(|&v| put(v));
        put(g.logit_opacity);
        g.log_scale.iter().for_each(|&v| put(v));
        g.rotation.iter().for_each(|&v| put(v));
    }
    out
}
