//! On-disk artifacts.
//!
//! Columnar data goes to CSV, summaries to pretty-printed JSON. Every CSV
//! starts with a `# schema: <name> v1` line followed by the column-name
//! header, and floats are written in exponent form with enough digits to
//! round-trip exactly — re-reading an emitted file reproduces the values
//! bit for bit, and re-running a deterministic pipeline reproduces the
//! bytes. Each writer here has a matching reader, and the readers validate
//! the schema line, the column header, and (for profiles) grid uniformity,
//! naming the offending line on failure.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::WaveError;
use crate::pdesim::{FrontSample, SimState};
use crate::solver::TraceEntry;
use crate::waveop::{WaveGrid, WaveProfile};

const PROFILE_SCHEMA: &str = "# schema: wave_profile v1";
const TRACE_SCHEMA: &str = "# schema: convergence_trace v1";
const FRONT_SCHEMA: &str = "# schema: front_track v1";
const SNAPSHOT_SCHEMA: &str = "# schema: sim_snapshot v1";

fn format_err(path: &Path, message: String) -> WaveError {
    WaveError::Format {
        path: path.display().to_string(),
        message,
    }
}

/// Creates the parent directory (if any) and writes the bytes.
fn write_file(path: &Path, contents: &str) -> Result<(), WaveError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn read_file(path: &Path) -> Result<String, WaveError> {
    // A file that cannot be read at all is an i/o problem, not a malformed
    // artifact; keep the path in the message since `io::Error` alone has none.
    std::fs::read_to_string(path).map_err(|e| {
        WaveError::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

/// Non-comment, non-empty lines with their 1-based line numbers; the first
/// line must match the expected schema marker.
fn data_lines<'a>(
    text: &'a str,
    schema: &str,
    path: &Path,
) -> Result<Vec<(usize, &'a str)>, WaveError> {
    let mut first_line_checked = false;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if !first_line_checked {
            if line != schema {
                return Err(format_err(
                    path,
                    format!("line 1: expected '{schema}', found '{line}'"),
                ));
            }
            first_line_checked = true;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            // Metadata comments (e.g. the snapshot time) are collected by
            // the specific readers; keep them in the stream.
            out.push((idx + 1, rest.trim()));
            continue;
        }
        out.push((idx + 1, line));
    }
    if !first_line_checked {
        return Err(format_err(path, "empty file".into()));
    }
    Ok(out)
}

fn parse_f64(tok: &str, path: &Path, line_no: usize) -> Result<f64, WaveError> {
    tok.trim()
        .parse::<f64>()
        .map_err(|_| format_err(path, format!("line {line_no}: '{tok}' is not a number")))
}

fn parse_usize(tok: &str, path: &Path, line_no: usize) -> Result<usize, WaveError> {
    tok.trim()
        .parse::<usize>()
        .map_err(|_| format_err(path, format!("line {line_no}: '{tok}' is not an integer")))
}

fn expect_header(
    lines: &[(usize, &str)],
    header: &str,
    path: &Path,
) -> Result<(), WaveError> {
    match lines.first() {
        Some((_, line)) if *line == header => Ok(()),
        Some((no, line)) => Err(format_err(
            path,
            format!("line {no}: expected column header '{header}', found '{line}'"),
        )),
        None => Err(format_err(path, format!("missing column header '{header}'"))),
    }
}

fn split_columns<'a>(
    line: &'a str,
    want: usize,
    path: &Path,
    line_no: usize,
) -> Result<Vec<&'a str>, WaveError> {
    let cols: Vec<&str> = line.split(',').collect();
    if cols.len() != want {
        return Err(format_err(
            path,
            format!(
                "line {line_no}: expected {want} comma-separated columns, found {}",
                cols.len()
            ),
        ));
    }
    Ok(cols)
}

/// Writes a wave profile as `xi,s,i` rows.
pub fn write_profile_csv(path: &Path, profile: &WaveProfile) -> Result<(), WaveError> {
    let mut buf = String::new();
    let _ = writeln!(buf, "{PROFILE_SCHEMA}");
    let _ = writeln!(buf, "xi,s,i");
    for j in 0..profile.grid.n {
        let _ = writeln!(
            buf,
            "{:e},{:e},{:e}",
            profile.grid.node(j),
            profile.s[j],
            profile.i[j]
        );
    }
    write_file(path, &buf)
}

/// Reads a wave profile, validating that the abscissas form a uniform grid.
pub fn read_profile_csv(path: &Path) -> Result<WaveProfile, WaveError> {
    let text = read_file(path)?;
    let lines = data_lines(&text, PROFILE_SCHEMA, path)?;
    expect_header(&lines, "xi,s,i", path)?;
    let mut xi = Vec::new();
    let mut s = Vec::new();
    let mut i = Vec::new();
    for &(no, line) in &lines[1..] {
        let cols = split_columns(line, 3, path, no)?;
        xi.push(parse_f64(cols[0], path, no)?);
        s.push(parse_f64(cols[1], path, no)?);
        i.push(parse_f64(cols[2], path, no)?);
    }
    if xi.len() < 2 {
        return Err(format_err(path, "a profile needs at least two rows".into()));
    }
    let h = xi[1] - xi[0];
    if !(h > 0.0) {
        return Err(format_err(path, "abscissas must be strictly increasing".into()));
    }
    for (k, w) in xi.windows(2).enumerate() {
        let d = w[1] - w[0];
        if (d - h).abs() > 1e-9 * h.abs().max(1.0) {
            return Err(format_err(
                path,
                format!(
                    "non-uniform grid: spacing {d} between rows {} and {} differs from the leading spacing {h}",
                    k + 1,
                    k + 2
                ),
            ));
        }
    }
    let grid = WaveGrid::new(xi[0], *xi.last().unwrap(), h)
        .map_err(|e| format_err(path, e.to_string()))?;
    if grid.n != xi.len() {
        return Err(format_err(
            path,
            format!("grid implies {} nodes but the file has {} rows", grid.n, xi.len()),
        ));
    }
    WaveProfile::from_arrays(grid, s, i)
}

/// Writes a convergence trace as `iter,residual,residual_sup,theta` rows.
pub fn write_trace_csv(path: &Path, trace: &[TraceEntry]) -> Result<(), WaveError> {
    let mut buf = String::new();
    let _ = writeln!(buf, "{TRACE_SCHEMA}");
    let _ = writeln!(buf, "iter,residual,residual_sup,theta");
    for e in trace {
        let _ = writeln!(
            buf,
            "{},{:e},{:e},{:e}",
            e.iter, e.residual, e.residual_sup, e.theta
        );
    }
    write_file(path, &buf)
}

/// Reads a convergence trace.
pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceEntry>, WaveError> {
    let text = read_file(path)?;
    let lines = data_lines(&text, TRACE_SCHEMA, path)?;
    expect_header(&lines, "iter,residual,residual_sup,theta", path)?;
    let mut out = Vec::new();
    for &(no, line) in &lines[1..] {
        let cols = split_columns(line, 4, path, no)?;
        out.push(TraceEntry {
            iter: parse_usize(cols[0], path, no)?,
            residual: parse_f64(cols[1], path, no)?,
            residual_sup: parse_f64(cols[2], path, no)?,
            theta: parse_f64(cols[3], path, no)?,
        });
    }
    Ok(out)
}

/// Writes a front trajectory as `t,x` rows.
pub fn write_front_csv(path: &Path, front: &[FrontSample]) -> Result<(), WaveError> {
    let mut buf = String::new();
    let _ = writeln!(buf, "{FRONT_SCHEMA}");
    let _ = writeln!(buf, "t,x");
    for s in front {
        let _ = writeln!(buf, "{:e},{:e}", s.t, s.x);
    }
    write_file(path, &buf)
}

/// Reads a front trajectory.
pub fn read_front_csv(path: &Path) -> Result<Vec<FrontSample>, WaveError> {
    let text = read_file(path)?;
    let lines = data_lines(&text, FRONT_SCHEMA, path)?;
    expect_header(&lines, "t,x", path)?;
    let mut out = Vec::new();
    for &(no, line) in &lines[1..] {
        let cols = split_columns(line, 2, path, no)?;
        out.push(FrontSample {
            t: parse_f64(cols[0], path, no)?,
            x: parse_f64(cols[1], path, no)?,
        });
    }
    Ok(out)
}

/// Writes a field snapshot: a `t: <time>` metadata comment, then `x,s,i`
/// rows (`x,s,i,r` when the recovered field is present).
pub fn write_snapshot_csv(path: &Path, x: &[f64], state: &SimState) -> Result<(), WaveError> {
    let mut buf = String::new();
    let _ = writeln!(buf, "{SNAPSHOT_SCHEMA}");
    let _ = writeln!(buf, "# t: {:e}", state.t);
    match &state.r {
        Some(r) => {
            let _ = writeln!(buf, "x,s,i,r");
            for j in 0..x.len() {
                let _ = writeln!(
                    buf,
                    "{:e},{:e},{:e},{:e}",
                    x[j], state.s[j], state.i[j], r[j]
                );
            }
        }
        None => {
            let _ = writeln!(buf, "x,s,i");
            for j in 0..x.len() {
                let _ = writeln!(buf, "{:e},{:e},{:e}", x[j], state.s[j], state.i[j]);
            }
        }
    }
    write_file(path, &buf)
}

/// Reads a field snapshot back into abscissas and a state.
pub fn read_snapshot_csv(path: &Path) -> Result<(Vec<f64>, SimState), WaveError> {
    let text = read_file(path)?;
    let lines = data_lines(&text, SNAPSHOT_SCHEMA, path)?;
    let mut t = None;
    let mut rows = Vec::new();
    let mut header: Option<(usize, &str)> = None;
    for &(no, line) in &lines {
        if let Some(rest) = line.strip_prefix("t:") {
            t = Some(parse_f64(rest, path, no)?);
        } else if header.is_none() {
            header = Some((no, line));
        } else {
            rows.push((no, line));
        }
    }
    let t = t.ok_or_else(|| format_err(path, "missing 't:' metadata line".into()))?;
    let (hno, header) = header.ok_or_else(|| format_err(path, "missing column header".into()))?;
    let with_r = match header {
        "x,s,i" => false,
        "x,s,i,r" => true,
        other => {
            return Err(format_err(
                path,
                format!("line {hno}: expected 'x,s,i' or 'x,s,i,r', found '{other}'"),
            ))
        }
    };
    let want = if with_r { 4 } else { 3 };
    let mut x = Vec::new();
    let mut s = Vec::new();
    let mut i = Vec::new();
    let mut r = Vec::new();
    for (no, line) in rows {
        let cols = split_columns(line, want, path, no)?;
        x.push(parse_f64(cols[0], path, no)?);
        s.push(parse_f64(cols[1], path, no)?);
        i.push(parse_f64(cols[2], path, no)?);
        if with_r {
            r.push(parse_f64(cols[3], path, no)?);
        }
    }
    Ok((
        x,
        SimState {
            t,
            s,
            i,
            r: with_r.then_some(r),
        },
    ))
}

/// Writes any serializable summary as pretty-printed JSON (plus a final
/// newline).
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), WaveError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| {
        format_err(path, format!("cannot serialize: {e}"))
    })?;
    text.push('\n');
    write_file(path, &text)
}

/// Reads a JSON artifact into a generic value (for merging into summary
/// reports).
pub fn read_json_value(path: &Path) -> Result<serde_json::Value, WaveError> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        (dir, path)
    }

    #[test]
    fn profile_round_trips_exactly() {
        let grid = WaveGrid::new(-2.0, 3.0, 0.5).unwrap();
        let s: Vec<f64> = (0..grid.n).map(|j| 1.0 / (1.0 + j as f64)).collect();
        let i: Vec<f64> = (0..grid.n).map(|j| (j as f64 * 0.137).sin().abs() * 1e-3).collect();
        let prof = WaveProfile::from_arrays(grid, s, i).unwrap();
        let (_d, path) = tmp("profile.csv");
        write_profile_csv(&path, &prof).unwrap();
        let back = read_profile_csv(&path).unwrap();
        assert_eq!(back.grid.n, prof.grid.n);
        assert_eq!(back.s, prof.s);
        assert_eq!(back.i, prof.i);
        assert_eq!(back.s_right_limit, prof.s_right_limit);
    }

    #[test]
    fn profile_writes_are_deterministic() {
        let grid = WaveGrid::new(0.0, 1.0, 0.25).unwrap();
        let prof = WaveProfile::from_arrays(
            grid,
            vec![0.1, 0.2, 0.3, 0.4, 0.5],
            vec![1e-8, 2e-8, 3e-8, 2e-8, 1e-8],
        )
        .unwrap();
        let (_d, p1) = tmp("a.csv");
        let (_d2, p2) = tmp("b.csv");
        write_profile_csv(&p1, &prof).unwrap();
        write_profile_csv(&p2, &prof).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn non_uniform_abscissas_are_rejected() {
        let (_d, path) = tmp("bad.csv");
        std::fs::write(
            &path,
            "# schema: wave_profile v1\nxi,s,i\n0e0,1e0,0e0\n1e0,1e0,0e0\n2.5e0,1e0,0e0\n",
        )
        .unwrap();
        let err = read_profile_csv(&path).unwrap_err();
        assert_eq!(err.kind(), "format");
        assert!(err.to_string().contains("non-uniform"), "{err}");
    }

    #[test]
    fn wrong_schema_and_bad_numbers_name_the_line() {
        let (_d, path) = tmp("bad.csv");
        std::fs::write(&path, "# schema: lattice v9\nxi,s,i\n").unwrap();
        let err = read_profile_csv(&path).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");

        std::fs::write(
            &path,
            "# schema: wave_profile v1\nxi,s,i\n0e0,1e0,0e0\n1e0,oops,0e0\n",
        )
        .unwrap();
        let err = read_profile_csv(&path).unwrap_err();
        assert!(err.to_string().contains("line 4") && err.to_string().contains("oops"), "{err}");
    }

    #[test]
    fn trace_round_trips() {
        let trace = vec![
            TraceEntry { iter: 0, residual: 1.5e-2, residual_sup: 2.0e-2, theta: 1.0 },
            TraceEntry { iter: 1, residual: 7.3e-4, residual_sup: 9.9e-4, theta: 0.5 },
        ];
        let (_d, path) = tmp("trace.csv");
        write_trace_csv(&path, &trace).unwrap();
        let back = read_trace_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].iter, 1);
        assert_eq!(back[1].residual, 7.3e-4);
        assert_eq!(back[1].residual_sup, 9.9e-4);
        assert_eq!(back[0].theta, 1.0);
    }

    #[test]
    fn front_round_trips() {
        let front = vec![
            FrontSample { t: 0.5, x: 5.25 },
            FrontSample { t: 1.0, x: 6.125 },
        ];
        let (_d, path) = tmp("front.csv");
        write_front_csv(&path, &front).unwrap();
        let back = read_front_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].t, 0.5);
        assert_eq!(back[1].x, 6.125);
    }

    #[test]
    fn snapshot_round_trips_with_and_without_r() {
        let x = vec![0.0, 0.1, 0.2];
        let with_r = SimState {
            t: 2.5,
            s: vec![1.0, 0.9, 0.8],
            i: vec![0.0, 0.05, 0.1],
            r: Some(vec![0.0, 0.05, 0.1]),
        };
        let (_d, path) = tmp("snap.csv");
        write_snapshot_csv(&path, &x, &with_r).unwrap();
        let (bx, bs) = read_snapshot_csv(&path).unwrap();
        assert_eq!(bx, x);
        assert_eq!(bs.t, 2.5);
        assert_eq!(bs.s, with_r.s);
        assert_eq!(bs.r, with_r.r);

        let without = SimState { r: None, ..with_r };
        write_snapshot_csv(&path, &x, &without).unwrap();
        let (_, bs) = read_snapshot_csv(&path).unwrap();
        assert!(bs.r.is_none());
        assert_eq!(bs.i, without.i);
    }

    #[test]
    fn json_round_trips_and_creates_parent_dirs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/dir/report.json");
        let value = serde_json::json!({"passed": true, "metric": 1.25e-3});
        write_json(&path, &value).unwrap();
        let back = read_json_value(&path).unwrap();
        assert_eq!(back, value);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.ends_with('\n'));
    }
}
