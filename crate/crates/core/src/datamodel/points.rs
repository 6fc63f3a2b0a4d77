use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Point3, RadarCloud};
use crate::error::{Error, Result};

const HEADER: &str = "x,y,z";

pub fn write_points(path: &Path, cloud: &RadarCloud) -> Result<()> {
    fs::write(path, encode(cloud)).map_err(|e| Error::io(path, e))
}

pub fn read_points(path: &Path) -> Result<RadarCloud> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode(&text).map_err(|reason| Error::format(path, reason))
}

pub(crate) fn encode(cloud: &RadarCloud) -> String {
    let mut out = String::with_capacity(16 + cloud.len() * 72);
    out.push_str(HEADER);
    out.push('\n');
    for p in cloud.points() {
        // 17 significant digits: exact f64 round trip.
        writeln!(out, "{:.16e},{:.16e},{:.16e}", p.x, p.y, p.z).expect("string write");
    }
    out
}

pub(crate) fn decode(text: &str) -> std::result::Result<RadarCloud, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == HEADER => {}
        other => return Err(format!("expected header `{HEADER}`, found {other:?}")),
    }
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(format!("line {}: expected 3 columns, got {}", i + 2, fields.len()));
        }
        let mut xyz = [0.0; 3];
        for (slot, field) in xyz.iter_mut().zip(&fields) {
            *slot = field
                .trim()
                .parse()
                .map_err(|_| format!("line {}: non-numeric field `{field}`", i + 2))?;
        }
        if !(xyz[2] > 0.0) {
            return Err(format!("line {}: non-positive depth {}", i + 2, xyz[2]));
        }
        points.push(Point3 {
            x: xyz[0],
            y: xyz[1],
            z: xyz[2],
        });
    }
    RadarCloud::new(points).map_err(|e| e.to_string())
}
