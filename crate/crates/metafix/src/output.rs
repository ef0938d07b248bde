use std::fs;
use std::path::Path;

use crate::manifest::RunManifest;
use crate::{CliResult, Failure};

/// Shortest round-trip form, so reruns are byte-identical; scientific
/// notation outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn csv_bytes(headers: &[String], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let enc = |e: csv::Error| Failure::Usage(format!("csv encoding failed: {e}"));
    w.write_record(headers).map_err(enc)?;
    for r in rows {
        w.write_record(r).map_err(enc)?;
    }
    w.into_inner().map_err(|e| Failure::Usage(format!("csv encoding failed: {e}")))
}

/// Writes `body` to `path` behind the manifest header.
pub fn write_with_header(path: &Path, manifest: &RunManifest, body: &[u8]) -> CliResult<()> {
    let mut bytes = manifest.header().into_bytes();
    bytes.extend_from_slice(body);
    fs::write(path, bytes).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Headerless CSV of kernel rows; `#` lines are skipped.
pub fn read_kernel_csv(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let bad = |msg: String| Failure::Usage(format!("malformed kernel file {}: {msg}", path.display()));
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| bad(format!("row {}: `{f}` is not a number", i + 1))))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(bad("no rows".into()));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.csv");
        fs::write(&p, "# two states\n0.9, 0.1\n0.2,0.8\n").unwrap();
        assert_eq!(read_kernel_csv(&p).unwrap(), vec![vec![0.9, 0.1], vec![0.2, 0.8]]);
        fs::write(&p, "0.9,x\n").unwrap();
        assert!(read_kernel_csv(&p).is_err());
        fs::write(&p, "0.5,0.5\n1.0\n").unwrap();
        assert!(read_kernel_csv(&p).is_err());
    }

    #[test]
    fn number_forms() {
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(0.0), "0");
        assert_eq!(num(1.5e-60), "1.5e-60");
        assert_eq!(num(-2e20), "-2e20");
        for x in [1.234e-17, 0.3, 7e300] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_layout() {
        let b = csv_bytes(&["a".into(), "b".into()], &[vec!["1".into(), num(0.1)]]).unwrap();
        assert_eq!(String::from_utf8(b).unwrap(), "a,b\n1,0.1\n");
    }
}
