//! File plumbing: atomic writes and the two CSV formats
//! (`t,h` traces and `s,hhat` transform samples), 17 significant digits.

use fracwave::TimeTrace;
use std::io::Write;
use std::path::Path;

/// Writes via a temporary file in the destination directory followed by a
/// rename, so a crash never leaves a half-written artifact behind.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), String> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    if let Some(d) = dir {
        std::fs::create_dir_all(d)
            .map_err(|e| format!("cannot create {}: {e}", d.display()))?;
    }
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .map_err(|e| format!("cannot create temp file near {}: {e}", path.display()))?;
    tmp.write_all(bytes)
        .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    tmp.persist(path)
        .map_err(|e| format!("cannot rename into {}: {e}", path.display()))?;
    Ok(())
}

fn two_column_csv(header: &str, x: &[f64], y: &[f64]) -> String {
    let mut out = String::with_capacity(64 * x.len());
    out.push_str(header);
    out.push('\n');
    for (a, b) in x.iter().zip(y) {
        out.push_str(&format!("{a:.16e},{b:.16e}\n"));
    }
    out
}

pub fn write_trace_csv(path: &Path, trace: &TimeTrace) -> Result<(), String> {
    atomic_write(path, two_column_csv("t,h", &trace.t, &trace.h).as_bytes())
}

pub fn write_samples_csv(path: &Path, s: &[f64], hhat: &[f64]) -> Result<(), String> {
    atomic_write(path, two_column_csv("s,hhat", s, hhat).as_bytes())
}

pub fn read_trace_csv(path: &Path) -> Result<TimeTrace, String> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read trace {}: {e}", path.display()))?;
    let mut t = Vec::new();
    let mut h = Vec::new();
    for (lineno, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("t,")) {
            continue;
        }
        let mut parts = line.split(',');
        let bad = || format!("{}:{}: expected `t,h`", path.display(), lineno + 1);
        let a: f64 = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let b: f64 = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        t.push(a);
        h.push(b);
    }
    if t.len() < 2 {
        return Err(format!("{}: fewer than 2 samples", path.display()));
    }
    Ok(TimeTrace::from_samples(t, h))
}
