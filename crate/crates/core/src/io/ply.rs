//! ASCII PLY point clouds.
//!
//! Reading accepts any element layout as long as a `vertex` element carries
//! scalar `x`, `y` and `z` properties; other properties and elements are
//! skipped. Writing always emits `double` coordinates printed with Rust's
//! shortest round-trip formatting, so `parse_ply(write_ply(c)) == c` exactly.

use std::fmt::Write as _;

use nalgebra::Vector3;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

const SCALAR_TYPES: &[&str] = &[
    "char", "uchar", "short", "ushort", "int", "uint", "float", "double", "int8", "uint8", "int16", "uint16", "int32",
    "uint32", "float32", "float64",
];

#[derive(Debug)]
enum Property {
    Scalar(String),
    List,
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

/// Parses an ASCII PLY file; errors carry the 1-based line number.
pub fn parse_ply(bytes: &[u8]) -> Result<PointCloud> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::parse(1, format!("file is not UTF-8 text: {e}")))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    match lines.next() {
        Some((_, "ply")) => {}
        Some((n, _)) => return Err(Error::parse(n, "missing 'ply' magic line")),
        None => return Err(Error::parse(1, "empty file")),
    }

    let mut elements: Vec<Element> = Vec::new();
    let mut format_seen = false;
    let mut last_line = 1;
    loop {
        let Some((n, line)) = lines.next() else {
            return Err(Error::parse(last_line + 1, "header ended without 'end_header'"));
        };
        last_line = n;
        let mut words = line.split_whitespace();
        match words.next() {
            Some("format") => match (words.next(), words.next()) {
                (Some("ascii"), Some(_)) => format_seen = true,
                (Some(kind @ ("binary_little_endian" | "binary_big_endian")), _) => {
                    return Err(Error::parse(n, format!("{kind} PLY is not supported; use ASCII")));
                }
                _ => return Err(Error::parse(n, format!("unrecognized format line '{line}'"))),
            },
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let (Some(name), Some(count), None) = (words.next(), words.next(), words.next()) else {
                    return Err(Error::parse(n, format!("malformed element line '{line}'")));
                };
                let count = count
                    .parse()
                    .map_err(|_| Error::parse(n, format!("element count '{count}' is not a non-negative integer")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let Some(element) = elements.last_mut() else {
                    return Err(Error::parse(n, "property declared before any element"));
                };
                let rest: Vec<&str> = words.collect();
                let property = match rest.as_slice() {
                    ["list", count_ty, item_ty, _name]
                        if SCALAR_TYPES.contains(count_ty) && SCALAR_TYPES.contains(item_ty) =>
                    {
                        Property::List
                    }
                    [ty, name] if SCALAR_TYPES.contains(ty) => Property::Scalar(name.to_string()),
                    _ => return Err(Error::parse(n, format!("malformed property line '{line}'"))),
                };
                element.properties.push(property);
            }
            Some("end_header") => break,
            Some(other) => return Err(Error::parse(n, format!("unexpected header keyword '{other}'"))),
        }
    }
    if !format_seen {
        return Err(Error::parse(last_line, "header has no 'format ascii 1.0' line"));
    }

    let Some(vertex_pos) = elements.iter().position(|e| e.name == "vertex") else {
        return Err(Error::parse(last_line, "header declares no vertex element"));
    };
    let columns = {
        let find = |axis: &str| {
            elements[vertex_pos]
                .properties
                .iter()
                .position(|p| matches!(p, Property::Scalar(name) if name == axis))
                .ok_or_else(|| Error::parse(last_line, format!("vertex element has no '{axis}' property")))
        };
        [find("x")?, find("y")?, find("z")?]
    };
    if elements[vertex_pos].properties.iter().any(|p| matches!(p, Property::List)) {
        return Err(Error::parse(last_line, "list properties on the vertex element are not supported"));
    }

    let mut body = lines.filter(|(_, l)| !l.is_empty());
    let mut points = Vec::with_capacity(elements[vertex_pos].count);
    for (index, element) in elements.iter().enumerate() {
        for row in 0..element.count {
            let Some((n, line)) = body.next() else {
                return Err(Error::parse(
                    last_line + 1,
                    format!("element '{}' declares {} rows but the body ends after {row}", element.name, element.count),
                ));
            };
            last_line = n;
            if index != vertex_pos {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != element.properties.len() {
                return Err(Error::parse(
                    n,
                    format!("expected {} values per vertex, found {}", element.properties.len(), fields.len()),
                ));
            }
            let mut xyz = [0.0; 3];
            for (slot, &col) in xyz.iter_mut().zip(&columns) {
                let value: f64 = fields[col]
                    .parse()
                    .map_err(|_| Error::parse(n, format!("'{}' is not a number", fields[col])))?;
                if !value.is_finite() {
                    return Err(Error::parse(n, format!("non-finite coordinate '{}'", fields[col])));
                }
                *slot = value;
            }
            points.push(Vector3::from(xyz));
        }
    }
    if let Some((n, _)) = body.next() {
        return Err(Error::parse(n, "more data rows than the header declares"));
    }
    Ok(PointCloud::from_vec_unchecked(points))
}

/// Serializes `cloud` as ASCII PLY with `double` x, y, z in meters.
pub fn write_ply(cloud: &PointCloud) -> Result<Vec<u8>> {
    if cloud.is_empty() {
        return Err(Error::invalid("cannot write an empty point cloud"));
    }
    let mut out = String::with_capacity(64 + cloud.len() * 48);
    out.push_str("ply\nformat ascii 1.0\ncomment units: meters\n");
    let _ = writeln!(out, "element vertex {}", cloud.len());
    out.push_str("property double x\nproperty double y\nproperty double z\nend_header\n");
    for p in cloud {
        let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
    }
    Ok(out.into_bytes())
}
