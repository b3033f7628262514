//! Versioned file formats for evaluation tables, maps and fits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::eval::{CellStats, EvalTable};
use super::map::RecMap;
use crate::error::{Error, Result};

pub const SUPPORTED_MAJOR: u32 = 1;
pub const EVALTABLE_FORMAT_VERSION: &str = "1.0";
pub const EVALTABLE_MAGIC: &str = "# recmap-evaltable";
pub const CSV_HEADER: &str =
    "alpha,beta,n_images,psnr_mean,ssim_mean,psnr_worst_digit,ssim_worst_digit,ocr_digit,ocr_plate,failed";

/// Accepts `MAJOR` or `MAJOR.MINOR` strings whose major version is supported.
pub fn check_version(v: &str) -> Result<()> {
    let major = v.split('.').next().unwrap_or("");
    match major.parse::<u32>() {
        Ok(m) if m == SUPPORTED_MAJOR => Ok(()),
        _ => Err(Error::FormatVersion {
            found: v.to_string(),
            expected: SUPPORTED_MAJOR,
        }),
    }
}

fn num(out: &mut String, v: f64) {
    if v.is_finite() {
        let _ = write!(out, "{v:.6}");
    }
}

fn sanitize(reason: &str) -> String {
    reason
        .chars()
        .map(|c| match c {
            ',' => ';',
            '\n' | '\r' | '"' => ' ',
            c => c,
        })
        .collect()
}

pub fn evaltable_to_csv(table: &EvalTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{EVALTABLE_MAGIC} format_version={EVALTABLE_FORMAT_VERSION}");
    out.push_str(CSV_HEADER);
    out.push('\n');
    for c in &table.cells {
        let _ = write!(out, "{},{},{},", c.alpha, c.beta, c.n_images);
        for v in [
            c.psnr_mean,
            c.ssim_mean,
            c.psnr_worst_digit,
            c.ssim_worst_digit,
            c.ocr_digit,
            c.ocr_plate,
        ] {
            num(&mut out, v);
            out.push(',');
        }
        if let Some(r) = &c.failed {
            out.push_str(&sanitize(r));
        }
        out.push('\n');
    }
    out
}

pub fn evaltable_from_csv(text: &str) -> Result<EvalTable> {
    let mut lines = text.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Format("empty evaluation table".into()))?;
    let version = first
        .strip_prefix(EVALTABLE_MAGIC)
        .and_then(|rest| rest.trim().strip_prefix("format_version="))
        .ok_or_else(|| Error::Format(format!("missing `{EVALTABLE_MAGIC} format_version=` line")))?;
    check_version(version.trim())?;
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Format(format!("expected header `{CSV_HEADER}`")));
    }
    let mut cells = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row = i + 3;
        let f: Vec<&str> = line.splitn(10, ',').collect();
        if f.len() != 10 {
            return Err(Error::Format(format!("line {row}: expected 10 fields, got {}", f.len())));
        }
        let int = |s: &str| {
            s.parse::<u32>()
                .map_err(|e| Error::Format(format!("line {row}: bad integer {s:?}: {e}")))
        };
        let float = |s: &str| {
            if s.is_empty() {
                Ok(f64::NAN)
            } else {
                s.parse::<f64>()
                    .map_err(|e| Error::Format(format!("line {row}: bad number {s:?}: {e}")))
            }
        };
        cells.push(CellStats {
            alpha: int(f[0])?,
            beta: int(f[1])?,
            n_images: int(f[2])? as usize,
            psnr_mean: float(f[3])?,
            ssim_mean: float(f[4])?,
            psnr_worst_digit: float(f[5])?,
            ssim_worst_digit: float(f[6])?,
            ocr_digit: float(f[7])?,
            ocr_plate: float(f[8])?,
            failed: (!f[9].is_empty()).then(|| f[9].to_string()),
        });
    }
    Ok(EvalTable { cells })
}

pub fn load_evaltable(path: impl AsRef<Path>) -> Result<EvalTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    evaltable_from_csv(&text)
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn load_recmap(path: impl AsRef<Path>) -> Result<RecMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_slice(&bytes)?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Format(format!("{} has no format_version", path.display())))?;
    check_version(version)?;
    let map: RecMap = serde_json::from_value(value)?;
    map.bool_grid()?;
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EvalTable {
        EvalTable {
            cells: vec![
                CellStats {
                    alpha: 0,
                    beta: 0,
                    n_images: 2,
                    psnr_mean: 31.25,
                    ssim_mean: 0.875,
                    psnr_worst_digit: 29.0,
                    ssim_worst_digit: 0.5,
                    ocr_digit: 1.0,
                    ocr_plate: 1.0,
                    failed: None,
                },
                CellStats::failed(0, 1, 10, "cell (0, 1) image 3: timeout, retry\nlater".into()),
            ],
        }
    }

    #[test]
    fn versions() {
        assert!(check_version("1").is_ok());
        assert!(check_version("1.7").is_ok());
        assert!(matches!(check_version("2.0"), Err(Error::FormatVersion { .. })));
        assert!(check_version("x").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let csv = evaltable_to_csv(&table());
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("# recmap-evaltable format_version=1.0"));
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(
            lines.next(),
            Some("0,0,2,31.250000,0.875000,29.000000,0.500000,1.000000,1.000000,")
        );
        assert_eq!(
            lines.next(),
            Some("0,1,10,,,,,,,cell (0; 1) image 3: timeout; retry later")
        );
        let back = evaltable_from_csv(&csv).unwrap();
        assert_eq!(back.cells[0], table().cells[0]);
        assert!(back.cells[1].is_failed() && back.cells[1].ocr_plate.is_nan());
        assert_eq!(evaltable_to_csv(&back), csv);
    }

    #[test]
    fn csv_rejects_other_versions() {
        let csv = evaltable_to_csv(&table()).replace("format_version=1.0", "format_version=2.0");
        assert!(matches!(evaltable_from_csv(&csv), Err(Error::FormatVersion { .. })));
        assert!(evaltable_from_csv("alpha,beta\n").is_err());
    }
}
