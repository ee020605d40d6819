//! File formats for solver artifacts: CSV dumps of grids, fronts, and
//! sections, JSON reports, and the plumbing that keeps them trustworthy.
//!
//! Every floating-point number is printed with 17 significant digits, so a
//! written file parses back to bitwise-identical values and identical inputs
//! produce byte-identical artifacts.  Files are written atomically (temp
//! file in the target directory, then rename) and each one gets a
//! `<name>.sha256` sidecar in the usual `<hex>  <filename>` checksum format,
//! so a half-written or silently corrupted artifact is detectable.
//!
//! The CSV dialect is deliberately plain: `#`-prefixed header lines carry
//! metadata (time, axes, provenance, shock list), one comma-separated record
//! per line follows, no quoting, no escaping.  None of the emitted fields
//! contain commas.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{HjError, Result};
use crate::grid::{Axis, Provenance, SolutionGrid};
use crate::wavefront::{BranchSource, Front, FrontPoint, Section, ShockPoint};

/// Formats one f64 with 17 significant digits, enough for an exact
/// parse-back of any finite double.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| HjError::InvalidInput(format!("{what}: cannot parse float from {s:?}")))
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| HjError::InvalidInput(format!("{what}: cannot parse index from {s:?}")))
}

/// Hex SHA-256 digest of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Sidecar path for an artifact: `dir/name.ext` ↦ `dir/name.ext.sha256`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".sha256");
    path.with_file_name(name)
}

/// Writes `contents` to `path` atomically and drops a checksum sidecar.
///
/// The data first goes to a temporary file in the same directory, is synced,
/// and is then renamed over the target, so readers never observe a partial
/// file.  The sidecar holds `sha256_hex(contents)` plus the file name.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| HjError::InvalidInput(format!("not a writable file path: {path:?}")))?;
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    let sidecar = format!("{}  {}\n", sha256_hex(contents.as_bytes()), file_name);
    let tmp = path.with_file_name(format!(".{file_name}.sha256.tmp{}", std::process::id()));
    std::fs::write(&tmp, sidecar)?;
    std::fs::rename(&tmp, sidecar_path(path))?;
    Ok(())
}

/// Recomputes an artifact's digest and compares it with its sidecar.
/// Returns an error when either file is missing or the digests differ.
pub fn verify_sidecar(path: &Path) -> Result<()> {
    let contents = std::fs::read(path)?;
    let sidecar = std::fs::read_to_string(sidecar_path(path))?;
    let recorded = sidecar.split_whitespace().next().unwrap_or("");
    let actual = sha256_hex(&contents);
    if recorded != actual {
        return Err(HjError::InvalidInput(format!(
            "checksum mismatch for {path:?}: sidecar {recorded}, file {actual}"
        )));
    }
    Ok(())
}

/// Serializes `value` as pretty JSON and writes it atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, &text)
}

/// Reads a JSON artifact back.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn provenance_from_label(s: &str) -> Result<Provenance> {
    for p in [
        Provenance::Variational,
        Provenance::Viscosity,
        Provenance::LaxOleinik,
        Provenance::Envelope,
        Provenance::ClosedForm,
    ] {
        if p.label() == s {
            return Ok(p);
        }
    }
    Err(HjError::InvalidInput(format!("unknown provenance label {s:?}")))
}

/// Renders a solution grid as CSV: one `# axis` header per axis, then one
/// record per node in storage order with its coordinates and value.
pub fn grid_to_csv(grid: &SolutionGrid) -> String {
    let mut out = String::new();
    out.push_str("# hjlab solution_grid v1\n");
    let _ = writeln!(out, "# t = {}", fmt_f64(grid.t));
    let _ = writeln!(out, "# provenance = {}", grid.provenance.label());
    for axis in &grid.axes {
        let _ = writeln!(out, "# axis = {} {} {}", fmt_f64(axis.lo), fmt_f64(axis.step), axis.n);
    }
    match grid.axes.len() {
        1 => {
            out.push_str("q1,u\n");
            let axis = &grid.axes[0];
            for (i, v) in grid.values.iter().enumerate() {
                let _ = writeln!(out, "{},{}", fmt_f64(axis.coord(i)), fmt_f64(*v));
            }
        }
        _ => {
            out.push_str("q1,q2,u\n");
            let (a1, a2) = (&grid.axes[0], &grid.axes[1]);
            for i in 0..a1.n {
                for j in 0..a2.n {
                    let v = grid.values[i * a2.n + j];
                    let _ = writeln!(
                        out,
                        "{},{},{}",
                        fmt_f64(a1.coord(i)),
                        fmt_f64(a2.coord(j)),
                        fmt_f64(v)
                    );
                }
            }
        }
    }
    out
}

/// Parses a grid CSV produced by [`grid_to_csv`] back into a
/// [`SolutionGrid`], bit for bit.
pub fn grid_from_csv(text: &str) -> Result<SolutionGrid> {
    let mut lines = text.lines();
    match lines.next() {
        Some("# hjlab solution_grid v1") => {}
        other => {
            return Err(HjError::InvalidInput(format!(
                "not a v1 solution grid file (first line {other:?})"
            )))
        }
    }
    let mut t = None;
    let mut provenance = None;
    let mut axes = Vec::new();
    let mut values = Vec::new();
    for line in lines {
        if let Some(rest) = line.strip_prefix("# ") {
            if let Some(v) = rest.strip_prefix("t = ") {
                t = Some(parse_f64(v, "grid time")?);
            } else if let Some(v) = rest.strip_prefix("provenance = ") {
                provenance = Some(provenance_from_label(v.trim())?);
            } else if let Some(v) = rest.strip_prefix("axis = ") {
                let parts: Vec<&str> = v.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(HjError::InvalidInput(format!("malformed axis header {line:?}")));
                }
                axes.push(Axis {
                    lo: parse_f64(parts[0], "axis lo")?,
                    step: parse_f64(parts[1], "axis step")?,
                    n: parse_usize(parts[2], "axis node count")?,
                });
            }
        } else if line.starts_with('q') || line.is_empty() {
            continue;
        } else {
            let value = line
                .rsplit(',')
                .next()
                .ok_or_else(|| HjError::InvalidInput(format!("malformed record {line:?}")))?;
            values.push(parse_f64(value, "grid value")?);
        }
    }
    let t = t.ok_or_else(|| HjError::InvalidInput("grid file lacks a time header".into()))?;
    let provenance = provenance
        .ok_or_else(|| HjError::InvalidInput("grid file lacks a provenance header".into()))?;
    SolutionGrid::new(t, axes, values, provenance)
}

/// Writes a grid CSV artifact (atomic, checksummed).
pub fn write_grid_csv(path: &Path, grid: &SolutionGrid) -> Result<()> {
    write_atomic(path, &grid_to_csv(grid))
}

/// Reads a grid CSV artifact.
pub fn read_grid_csv(path: &Path) -> Result<SolutionGrid> {
    grid_from_csv(&std::fs::read_to_string(path)?)
}

/// A front dump read back from CSV: the sampled points plus the branch
/// parameters they were sampled at (empty for d = 2 clouds, whose points
/// carry no scalar parameter).
#[derive(Debug, Clone, PartialEq)]
pub struct FrontDump {
    pub t: f64,
    pub dim: usize,
    pub points: Vec<FrontPoint>,
    pub params: Vec<f64>,
}

/// Renders a front as CSV.
///
/// For d = 1 each closed-form branch is sampled at `samples_per_branch`
/// evenly spaced parameters (endpoints included); for d = 2 the stored
/// cloud is dumped as is and `samples_per_branch` is ignored.
pub fn front_to_csv(front: &Front, samples_per_branch: usize) -> Result<String> {
    let mut out = String::new();
    out.push_str("# hjlab front v1\n");
    let _ = writeln!(out, "# t = {}", fmt_f64(front.t()));
    let _ = writeln!(out, "# dim = {}", front.dim());
    if front.dim() == 1 {
        if samples_per_branch < 2 {
            return Err(HjError::InvalidInput(
                "front sampling needs at least 2 samples per branch".into(),
            ));
        }
        out.push_str("q1,s,p1,q0_1,source,param\n");
        for branch in front.branches() {
            let (a, b) = branch.range();
            let label = branch.source().label();
            for k in 0..samples_per_branch {
                let w = k as f64 / (samples_per_branch - 1) as f64;
                let param = a + w * (b - a);
                let pt = branch.point(param);
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    fmt_f64(pt.q),
                    fmt_f64(pt.s),
                    fmt_f64(pt.p),
                    fmt_f64(pt.q0),
                    label,
                    fmt_f64(param)
                );
            }
        }
    } else {
        out.push_str("q1,q2,s,p1,p2,q0_1,q0_2,source\n");
        for pt in front.cloud() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                fmt_f64(pt.q[0]),
                fmt_f64(pt.q[1]),
                fmt_f64(pt.s),
                fmt_f64(pt.p[0]),
                fmt_f64(pt.p[1]),
                fmt_f64(pt.q0[0]),
                fmt_f64(pt.q0[1]),
                pt.source.label()
            );
        }
    }
    Ok(out)
}

/// Parses a front CSV back into its sampled points.
pub fn front_dump_from_csv(text: &str) -> Result<FrontDump> {
    let mut lines = text.lines();
    match lines.next() {
        Some("# hjlab front v1") => {}
        other => {
            return Err(HjError::InvalidInput(format!(
                "not a v1 front file (first line {other:?})"
            )))
        }
    }
    let mut t = None;
    let mut dim = None;
    let mut points = Vec::new();
    let mut params = Vec::new();
    for line in lines {
        if let Some(rest) = line.strip_prefix("# ") {
            if let Some(v) = rest.strip_prefix("t = ") {
                t = Some(parse_f64(v, "front time")?);
            } else if let Some(v) = rest.strip_prefix("dim = ") {
                dim = Some(parse_usize(v, "front dimension")?);
            }
            continue;
        }
        if line.starts_with('q') || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        match dim {
            Some(1) => {
                if fields.len() != 6 {
                    return Err(HjError::InvalidInput(format!("malformed front record {line:?}")));
                }
                points.push(FrontPoint {
                    q: vec![parse_f64(fields[0], "front q")?],
                    s: parse_f64(fields[1], "front s")?,
                    p: vec![parse_f64(fields[2], "front p")?],
                    q0: vec![parse_f64(fields[3], "front q0")?],
                    source: BranchSource::parse_label(fields[4])?,
                });
                params.push(parse_f64(fields[5], "front param")?);
            }
            Some(2) => {
                if fields.len() != 8 {
                    return Err(HjError::InvalidInput(format!("malformed front record {line:?}")));
                }
                points.push(FrontPoint {
                    q: vec![parse_f64(fields[0], "front q1")?, parse_f64(fields[1], "front q2")?],
                    s: parse_f64(fields[2], "front s")?,
                    p: vec![parse_f64(fields[3], "front p1")?, parse_f64(fields[4], "front p2")?],
                    q0: vec![
                        parse_f64(fields[5], "front q0_1")?,
                        parse_f64(fields[6], "front q0_2")?,
                    ],
                    source: BranchSource::parse_label(fields[7])?,
                });
            }
            _ => {
                return Err(HjError::InvalidInput(
                    "front file lacks a dim header before its records".into(),
                ))
            }
        }
    }
    let t = t.ok_or_else(|| HjError::InvalidInput("front file lacks a time header".into()))?;
    let dim = dim.ok_or_else(|| HjError::InvalidInput("front file lacks a dim header".into()))?;
    Ok(FrontDump { t, dim, points, params })
}

/// Writes a front CSV artifact (atomic, checksummed).
pub fn write_front_csv(path: &Path, front: &Front, samples_per_branch: usize) -> Result<()> {
    write_atomic(path, &front_to_csv(front, samples_per_branch)?)
}

/// Reads a front CSV artifact.
pub fn read_front_csv(path: &Path) -> Result<FrontDump> {
    front_dump_from_csv(&std::fs::read_to_string(path)?)
}

/// Renders a 1D section as CSV.  Shocks ride along as header lines so the
/// parse restores the full [`Section`] value.
pub fn section_to_csv(section: &Section) -> String {
    let mut out = String::new();
    out.push_str("# hjlab section v1\n");
    for shock in &section.shocks {
        let _ = writeln!(
            out,
            "# shock = {} {} {} {} {} {}",
            fmt_f64(shock.t),
            fmt_f64(shock.q),
            fmt_f64(shock.p_left),
            fmt_f64(shock.p_right),
            shock.left_source.label(),
            shock.right_source.label()
        );
    }
    out.push_str("q1,s,strand,source,param\n");
    for i in 0..section.q.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(section.q[i]),
            fmt_f64(section.values[i]),
            section.strand[i],
            section.source[i].label(),
            fmt_f64(section.param[i])
        );
    }
    out
}

/// Parses a section CSV produced by [`section_to_csv`].
pub fn section_from_csv(text: &str) -> Result<Section> {
    let mut lines = text.lines();
    match lines.next() {
        Some("# hjlab section v1") => {}
        other => {
            return Err(HjError::InvalidInput(format!(
                "not a v1 section file (first line {other:?})"
            )))
        }
    }
    let mut section = Section {
        q: Vec::new(),
        values: Vec::new(),
        strand: Vec::new(),
        source: Vec::new(),
        param: Vec::new(),
        shocks: Vec::new(),
    };
    for line in lines {
        if let Some(rest) = line.strip_prefix("# ") {
            if let Some(v) = rest.strip_prefix("shock = ") {
                let parts: Vec<&str> = v.split_whitespace().collect();
                if parts.len() != 6 {
                    return Err(HjError::InvalidInput(format!("malformed shock header {line:?}")));
                }
                section.shocks.push(ShockPoint {
                    t: parse_f64(parts[0], "shock t")?,
                    q: parse_f64(parts[1], "shock q")?,
                    p_left: parse_f64(parts[2], "shock p_left")?,
                    p_right: parse_f64(parts[3], "shock p_right")?,
                    left_source: BranchSource::parse_label(parts[4])?,
                    right_source: BranchSource::parse_label(parts[5])?,
                });
            }
            continue;
        }
        if line.starts_with('q') || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(HjError::InvalidInput(format!("malformed section record {line:?}")));
        }
        section.q.push(parse_f64(fields[0], "section q")?);
        section.values.push(parse_f64(fields[1], "section value")?);
        section.strand.push(parse_usize(fields[2], "section strand")?);
        section.source.push(BranchSource::parse_label(fields[3])?);
        section.param.push(parse_f64(fields[4], "section param")?);
    }
    Ok(section)
}

/// Writes a section CSV artifact (atomic, checksummed).
pub fn write_section_csv(path: &Path, section: &Section) -> Result<()> {
    write_atomic(path, &section_to_csv(section))
}

/// Reads a section CSV artifact.
pub fn read_section_csv(path: &Path) -> Result<Section> {
    section_from_csv(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;
    use crate::hamiltonian::{cubic_wave, saddle};
    use crate::initial_data;
    use crate::wavefront::{build_front_1d, build_front_cloud, minimal_continuous_section};
    use crate::grid::Rect;

    fn scratch_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("hjlab-io-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn grid_csv_round_trips_bit_exactly() {
        let axes = vec![Axis::span(-1.0, 1.0, 7).unwrap(), Axis::span(0.25, 0.75, 5).unwrap()];
        let values: Vec<f64> = (0..35)
            .map(|k| ((k as f64) * 0.773_213).sin() / 3.0 + 1e-7 * k as f64)
            .collect();
        let grid = SolutionGrid::new(0.37, axes, values, Provenance::Viscosity).unwrap();
        let text = grid_to_csv(&grid);
        let back = grid_from_csv(&text).unwrap();
        assert_eq!(back, grid);
        assert_eq!(grid_to_csv(&back), text);

        let axes = vec![Axis::span(-2.0, 2.0, 33).unwrap()];
        let values: Vec<f64> = (0..33).map(|k| (k as f64).sqrt() - 2.5).collect();
        let grid = SolutionGrid::new(0.05, axes, values, Provenance::LaxOleinik).unwrap();
        assert_eq!(grid_from_csv(&grid_to_csv(&grid)).unwrap(), grid);
    }

    #[test]
    fn grid_csv_is_deterministic() {
        let axes = vec![Axis::span(0.0, 1.0, 11).unwrap()];
        let values: Vec<f64> = (0..11).map(|k| (k as f64) / 3.0).collect();
        let grid = SolutionGrid::new(0.1, axes, values, Provenance::Variational).unwrap();
        assert_eq!(grid_to_csv(&grid), grid_to_csv(&grid.clone()));
    }

    #[test]
    fn front_csv_round_trips_and_matches_branches() {
        let h = cubic_wave();
        let u0 = initial_data::localized_kink(0.25).unwrap();
        let front = build_front_1d(&h, &u0, 0.02, (-0.4, 0.4)).unwrap();
        let text = front_to_csv(&front, 9).unwrap();
        let dump = front_dump_from_csv(&text).unwrap();
        assert_eq!(dump.t, 0.02);
        assert_eq!(dump.dim, 1);
        assert_eq!(dump.points.len(), front.branches().len() * 9);
        assert_eq!(dump.params.len(), dump.points.len());
        for (pt, &param) in dump.points.iter().zip(&dump.params) {
            let branch = front
                .branches()
                .iter()
                .find(|b| b.source() == pt.source && {
                    let (a, b) = b.range();
                    (a..=b).contains(&param)
                })
                .expect("dumped point names a live branch");
            let exact = branch.point(param);
            assert_eq!(pt.q[0], exact.q);
            assert_eq!(pt.s, exact.s);
            assert_eq!(pt.p[0], exact.p);
        }
    }

    #[test]
    fn cloud_csv_round_trips() {
        let h = saddle();
        let u0 = initial_data::min_of_quadratics(0.75, 1.0, 0.25).unwrap();
        let window = Rect::new(vec![(-0.8, -0.2), (-0.3, 0.3)]).unwrap();
        let front = build_front_cloud(&h, &u0, 0.1, &window, 21, 9).unwrap();
        let text = front_to_csv(&front, 2).unwrap();
        let dump = front_dump_from_csv(&text).unwrap();
        assert_eq!(dump.dim, 2);
        assert_eq!(dump.points.len(), front.cloud().len());
        assert!(dump.params.is_empty());
        for (got, want) in dump.points.iter().zip(front.cloud()) {
            assert_eq!(got, want);
        }
    }

    #[test]
    fn section_csv_round_trips_with_shocks() {
        let h = cubic_wave();
        let u0 = initial_data::localized_kink(0.25).unwrap();
        let front = build_front_1d(&h, &u0, 0.02, (-0.4, 0.4)).unwrap();
        let grid = Axis::span(-0.1, 0.05, 151).unwrap();
        let section = minimal_continuous_section(&front, &grid).unwrap();
        assert!(!section.shocks.is_empty());
        let back = section_from_csv(&section_to_csv(&section)).unwrap();
        assert_eq!(back, section);
    }

    #[test]
    fn atomic_write_leaves_file_sidecar_and_no_temp() {
        let dir = scratch_dir("atomic");
        let path = dir.join("grid.csv");
        let axes = vec![Axis::span(0.0, 1.0, 3).unwrap()];
        let grid =
            SolutionGrid::new(0.2, axes, vec![1.0, 2.0, 3.0], Provenance::ClosedForm).unwrap();
        write_grid_csv(&path, &grid).unwrap();
        assert_eq!(read_grid_csv(&path).unwrap(), grid);
        verify_sidecar(&path).unwrap();
        let leftovers: Vec<_> = std::fs::read_dir(&dir)
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().contains("tmp"))
            .collect();
        assert!(leftovers.is_empty(), "temporary files left behind: {leftovers:?}");

        std::fs::write(&path, "tampered").unwrap();
        assert!(verify_sidecar(&path).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn json_round_trip_and_missing_file_errors() {
        let dir = scratch_dir("json");
        let path = dir.join("meta.json");
        let value = vec![("alpha".to_string(), 1.5), ("beta".to_string(), -2.25)];
        write_json(&path, &value).unwrap();
        let back: Vec<(String, f64)> = read_json(&path).unwrap();
        assert_eq!(back, value);
        verify_sidecar(&path).unwrap();

        let missing = dir.join("absent.json");
        assert!(matches!(read_json::<Vec<f64>>(&missing), Err(HjError::Io(_))));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(grid_from_csv("not a grid").is_err());
        assert!(grid_from_csv("# hjlab solution_grid v1\n# t = 0.1\nq1,u\n0,1\n").is_err());
        assert!(front_dump_from_csv("# hjlab front v1\n# t = 1\n0,1\n").is_err());
        assert!(section_from_csv("# hjlab section v1\nq1,s\n1,2\n").is_err());
        let bad_axis = "# hjlab solution_grid v1\n# t = 0.1\n# provenance = viscosity\n# axis = 0 nope 3\nq1,u\n";
        assert!(grid_from_csv(bad_axis).is_err());
    }
}
