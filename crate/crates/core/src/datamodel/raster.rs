use std::fs;
use std::path::Path;

use super::{DepthKind, DepthMap};
use crate::error::{Error, Result};

const MAGIC: &str = "PRAD1";

pub fn write_raster(path: &Path, map: &DepthMap) -> Result<()> {
    fs::write(path, encode(map)).map_err(|e| Error::io(path, e))
}

pub fn read_raster(path: &Path) -> Result<DepthMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|reason| Error::format(path, reason))
}

pub(crate) fn encode(map: &DepthMap) -> Vec<u8> {
    let header = format!("{MAGIC} {} {} {}\n", map.height(), map.width(), map.kind());
    let mut out = Vec::with_capacity(header.len() + 8 * map.len());
    out.extend_from_slice(header.as_bytes());
    for v in map.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub(crate) fn decode(bytes: &[u8]) -> std::result::Result<DepthMap, String> {
    let newline = bytes
        .iter()
        .position(|b| *b == b'\n')
        .ok_or("missing header line")?;
    let header = std::str::from_utf8(&bytes[..newline]).map_err(|_| "header is not ASCII")?;
    let fields: Vec<&str> = header.split(' ').collect();
    let [magic, h, w, kind] = fields[..] else {
        return Err(format!("malformed header `{header}`"));
    };
    if magic != MAGIC {
        return Err(format!("bad magic `{magic}`"));
    }
    let height: usize = h.parse().map_err(|_| format!("bad height `{h}`"))?;
    let width: usize = w.parse().map_err(|_| format!("bad width `{w}`"))?;
    let kind: DepthKind = kind.parse()?;

    let payload = &bytes[newline + 1..];
    let expected = height
        .checked_mul(width)
        .and_then(|n| n.checked_mul(8))
        .ok_or("raster dimensions overflow")?;
    if payload.len() != expected {
        return Err(format!(
            "payload has {} bytes, expected {expected}",
            payload.len()
        ));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(format!("invalid depth value {bad}"));
    }
    DepthMap::new(height, width, values, kind).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_payload_size() {
        let m = DepthMap::new(2, 3, vec![1.0; 6], DepthKind::Metric).unwrap();
        let bytes = encode(&m);
        let header = b"PRAD1 2 3 metric\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len() - header.len(), 48);
    }

    #[test]
    fn single_pixel_round_trip() {
        let m = DepthMap::new(1, 1, vec![5.0], DepthKind::GroundTruth).unwrap();
        assert_eq!(decode(&encode(&m)).unwrap(), m);
    }

    #[test]
    fn rejects_bad_magic_truncation_and_negatives() {
        let m = DepthMap::new(1, 2, vec![1.0, 2.0], DepthKind::Scaleless).unwrap();
        let good = encode(&m);

        let mut bad_magic = good.clone();
        bad_magic[4] = b'2';
        assert!(decode(&bad_magic).unwrap_err().contains("magic"));

        assert!(decode(&good[..good.len() - 1]).unwrap_err().contains("payload"));

        let mut negative = good.clone();
        let start = negative.len() - 8;
        negative[start..].copy_from_slice(&(-1.0f64).to_le_bytes());
        assert!(decode(&negative).unwrap_err().contains("invalid"));
    }
}
