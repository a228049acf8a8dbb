//! PCD v0.7 subset: `ascii` and `binary` payloads, scalar fields of type F/U/I.
//! `x`, `y`, `z` are required; `intensity` (or `i`) is optional, other fields
//! are skipped.

use std::path::Path;

use super::{normalize_intensity, IntensityScale, LidarPoint, LoadError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcdEncoding {
    Ascii,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FieldType {
    F,
    U,
    I,
}

#[derive(Debug, Clone)]
struct Field {
    name: String,
    size: usize,
    ty: FieldType,
    count: usize,
}

#[derive(Debug)]
struct Header {
    fields: Vec<Field>,
    points: usize,
    encoding: PcdEncoding,
    data_offset: usize,
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Header, LoadError> {
    let mut offset = 0usize;
    let mut names: Vec<String> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    let mut types: Vec<FieldType> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut width = None;
    let mut height = None;
    let mut points = None;

    loop {
        if offset >= bytes.len() {
            return Err(LoadError::parse(path, offset as u64, "header ended before DATA line"));
        }
        let end = bytes[offset..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |p| offset + p);
        let line_start = offset as u64;
        let line = std::str::from_utf8(&bytes[offset..end])
            .map_err(|_| LoadError::parse(path, line_start, "header is not valid UTF-8"))?
            .trim();
        offset = (end + 1).min(bytes.len());
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let key = tokens.next().unwrap_or_default().to_ascii_uppercase();
        let values: Vec<&str> = tokens.collect();
        let bad = |what: &str| LoadError::parse(path, line_start, format!("malformed {what} line: '{line}'"));
        let numbers = |what: &str| -> Result<Vec<usize>, LoadError> {
            values.iter().map(|v| v.parse::<usize>().map_err(|_| bad(what))).collect()
        };
        match key.as_str() {
            "VERSION" | "VIEWPOINT" => {}
            "FIELDS" | "COLUMNS" => names = values.iter().map(|s| s.to_string()).collect(),
            "SIZE" => sizes = numbers("SIZE")?,
            "COUNT" => counts = numbers("COUNT")?,
            "TYPE" => {
                types = values
                    .iter()
                    .map(|v| match *v {
                        "F" => Ok(FieldType::F),
                        "U" => Ok(FieldType::U),
                        "I" => Ok(FieldType::I),
                        _ => Err(bad("TYPE")),
                    })
                    .collect::<Result<_, _>>()?
            }
            "WIDTH" => width = Some(single(&values).ok_or_else(|| bad("WIDTH"))?),
            "HEIGHT" => height = Some(single(&values).ok_or_else(|| bad("HEIGHT"))?),
            "POINTS" => points = Some(single(&values).ok_or_else(|| bad("POINTS"))?),
            "DATA" => {
                let encoding = match values.first().copied() {
                    Some("ascii") => PcdEncoding::Ascii,
                    Some("binary") => PcdEncoding::Binary,
                    Some(other) => {
                        return Err(LoadError::parse(path, line_start, format!("unsupported DATA encoding '{other}'")))
                    }
                    None => return Err(bad("DATA")),
                };
                if counts.is_empty() {
                    counts = vec![1; names.len()];
                }
                if names.is_empty() || sizes.len() != names.len() || types.len() != names.len() || counts.len() != names.len() {
                    return Err(LoadError::parse(path, line_start, "FIELDS/SIZE/TYPE/COUNT arity mismatch"));
                }
                let fields: Vec<Field> = names
                    .into_iter()
                    .zip(sizes)
                    .zip(types)
                    .zip(counts)
                    .map(|(((name, size), ty), count)| Field { name, size, ty, count })
                    .collect();
                for f in &fields {
                    let ok = match f.ty {
                        FieldType::F => matches!(f.size, 4 | 8),
                        FieldType::U | FieldType::I => matches!(f.size, 1 | 2 | 4 | 8),
                    };
                    if !ok {
                        return Err(LoadError::parse(path, line_start, format!("field '{}' has unsupported size {}", f.name, f.size)));
                    }
                }
                let points = match (points, width, height) {
                    (Some(p), _, _) => p,
                    (None, Some(w), Some(h)) => w * h,
                    (None, Some(w), None) => w,
                    _ => return Err(LoadError::parse(path, line_start, "missing POINTS (or WIDTH/HEIGHT)")),
                };
                return Ok(Header { fields, points, encoding, data_offset: offset });
            }
            _ => return Err(LoadError::parse(path, line_start, format!("unknown header key '{key}'"))),
        }
    }
}

fn single(values: &[&str]) -> Option<usize> {
    match values {
        [v] => v.parse().ok(),
        _ => None,
    }
}

fn decode_binary(raw: &[u8], ty: FieldType) -> f64 {
    match (ty, raw.len()) {
        (FieldType::F, 4) => f32::from_le_bytes(raw.try_into().unwrap()) as f64,
        (FieldType::F, 8) => f64::from_le_bytes(raw.try_into().unwrap()),
        (FieldType::U, 1) => raw[0] as f64,
        (FieldType::U, 2) => u16::from_le_bytes(raw.try_into().unwrap()) as f64,
        (FieldType::U, 4) => u32::from_le_bytes(raw.try_into().unwrap()) as f64,
        (FieldType::U, 8) => u64::from_le_bytes(raw.try_into().unwrap()) as f64,
        (FieldType::I, 1) => raw[0] as i8 as f64,
        (FieldType::I, 2) => i16::from_le_bytes(raw.try_into().unwrap()) as f64,
        (FieldType::I, 4) => i32::from_le_bytes(raw.try_into().unwrap()) as f64,
        (FieldType::I, 8) => i64::from_le_bytes(raw.try_into().unwrap()) as f64,
        _ => unreachable!("field sizes validated in header"),
    }
}

/// Ascii values of 4-byte float fields are parsed directly as `f32` so that
/// coordinates are bit-equal to the text.
fn decode_ascii(token: &str, field: &Field) -> Option<f32> {
    match (field.ty, field.size) {
        (FieldType::F, 4) => token.parse::<f32>().ok(),
        _ => token.parse::<f64>().ok().map(|v| v as f32),
    }
}

#[derive(Default)]
struct Slots {
    x: Option<usize>,
    y: Option<usize>,
    z: Option<usize>,
    intensity: Option<usize>,
}

fn slots(fields: &[Field]) -> Slots {
    let mut s = Slots::default();
    let mut scalar = 0;
    for f in fields {
        match f.name.as_str() {
            "x" => s.x = Some(scalar),
            "y" => s.y = Some(scalar),
            "z" => s.z = Some(scalar),
            "intensity" | "i" => s.intensity = Some(scalar),
            _ => {}
        }
        scalar += f.count;
    }
    s
}

pub fn read_pcd(bytes: &[u8], path: &Path, scale: IntensityScale) -> Result<Vec<LidarPoint>, LoadError> {
    let header = parse_header(bytes, path)?;
    let slots = slots(&header.fields);
    let (Some(xs), Some(ys), Some(zs)) = (slots.x, slots.y, slots.z) else {
        return Err(LoadError::parse(path, 0, "PCD must declare fields x, y and z"));
    };
    // one entry per scalar column, so that COUNT > 1 fields expand in place
    let columns: Vec<&Field> = header.fields.iter().flat_map(|f| std::iter::repeat_n(f, f.count)).collect();
    let byte_typed = slots.intensity.is_some_and(|i| columns[i].ty == FieldType::U && columns[i].size == 1);

    let mut points = Vec::with_capacity(header.points);
    let mut intensity = Vec::with_capacity(header.points);
    let mut values = vec![0f32; columns.len()];
    let mut offset = header.data_offset;

    match header.encoding {
        PcdEncoding::Binary => {
            let record: usize = columns.iter().map(|f| f.size).sum();
            for _ in 0..header.points {
                if offset + record > bytes.len() {
                    return Err(LoadError::parse(
                        path,
                        bytes.len() as u64,
                        format!("truncated binary payload: record at byte {offset} needs {record} bytes"),
                    ));
                }
                let mut at = offset;
                for (v, f) in values.iter_mut().zip(&columns) {
                    *v = decode_binary(&bytes[at..at + f.size], f.ty) as f32;
                    at += f.size;
                }
                push_point(&values, &slots, xs, ys, zs, &mut points, &mut intensity)
                    .map_err(|m| LoadError::parse(path, offset as u64, m))?;
                offset += record;
            }
        }
        PcdEncoding::Ascii => {
            for _ in 0..header.points {
                // skip blank lines
                while offset < bytes.len() && bytes[offset].is_ascii_whitespace() {
                    offset += 1;
                }
                if offset >= bytes.len() {
                    return Err(LoadError::parse(path, offset as u64, "truncated ascii payload: fewer records than POINTS"));
                }
                let end = bytes[offset..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |p| offset + p);
                let line = std::str::from_utf8(&bytes[offset..end])
                    .map_err(|_| LoadError::parse(path, offset as u64, "payload is not valid UTF-8"))?;
                let tokens: Vec<&str> = line.split_whitespace().collect();
                if tokens.len() != columns.len() {
                    return Err(LoadError::parse(
                        path,
                        offset as u64,
                        format!("expected {} values, found {}", columns.len(), tokens.len()),
                    ));
                }
                for ((v, f), tok) in values.iter_mut().zip(&columns).zip(&tokens) {
                    *v = decode_ascii(tok, f)
                        .ok_or_else(|| LoadError::parse(path, offset as u64, format!("bad number '{tok}'")))?;
                }
                push_point(&values, &slots, xs, ys, zs, &mut points, &mut intensity)
                    .map_err(|m| LoadError::parse(path, offset as u64, m))?;
                offset = end + 1;
            }
        }
    }
    normalize_intensity(&mut intensity, scale, byte_typed);
    for (p, v) in points.iter_mut().zip(intensity) {
        p.intensity = v;
    }
    Ok(points)
}

fn push_point(
    values: &[f32],
    slots: &Slots,
    xs: usize,
    ys: usize,
    zs: usize,
    points: &mut Vec<LidarPoint>,
    intensity: &mut Vec<f32>,
) -> Result<(), &'static str> {
    let p = LidarPoint::new(values[xs], values[ys], values[zs], 0.0);
    if !p.is_finite() {
        return Err("non-finite coordinate");
    }
    points.push(p);
    intensity.push(slots.intensity.map_or(0.0, |i| values[i]));
    Ok(())
}

pub fn write_pcd(points: &[LidarPoint], encoding: PcdEncoding) -> Vec<u8> {
    let data = match encoding {
        PcdEncoding::Ascii => "ascii",
        PcdEncoding::Binary => "binary",
    };
    let mut out = format!(
        "# .PCD v0.7 - Point Cloud Data file format\nVERSION 0.7\nFIELDS x y z intensity\nSIZE 4 4 4 4\nTYPE F F F F\nCOUNT 1 1 1 1\nWIDTH {n}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS {n}\nDATA {data}\n",
        n = points.len()
    )
    .into_bytes();
    match encoding {
        PcdEncoding::Ascii => {
            for p in points {
                out.extend_from_slice(format!("{} {} {} {}\n", p.x, p.y, p.z, p.intensity).as_bytes());
            }
        }
        PcdEncoding::Binary => {
            for p in points {
                for v in [p.x, p.y, p.z, p.intensity] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    out
}
