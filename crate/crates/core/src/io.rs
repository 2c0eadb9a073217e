//! Point-set file formats.
//!
//! Text: a header line `n d`, then `n` lines of `d` whitespace-separated
//! reals. Binary: the magic `UFLP`, `u32 n`, `u32 d`, then `n * d`
//! little-endian `f64` values. Ids follow line (record) order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{PointSet, UflSolution};

pub const POINTS_MAGIC: &[u8; 4] = b"UFLP";

pub fn parse_text(src: &str) -> Result<PointSet> {
    let mut lines = src.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty input".into()))?;
    let mut it = header.split_whitespace();
    let n: usize = parse_field(it.next(), "n")?;
    let d: usize = parse_field(it.next(), "d")?;
    let mut coords = Vec::with_capacity(n * d);
    for row in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("expected {n} rows, found {row}")))?;
        let before = coords.len();
        for tok in line.split_whitespace() {
            coords.push(
                tok.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {row}: {e}")))?,
            );
        }
        if coords.len() - before != d {
            return Err(Error::Parse(format!(
                "row {row}: expected {d} values, found {}",
                coords.len() - before
            )));
        }
    }
    if lines.next().is_some() {
        return Err(Error::Parse("trailing rows after the declared count".into()));
    }
    PointSet::new(d, coords)
}

fn parse_field(tok: Option<&str>, name: &str) -> Result<usize> {
    tok.ok_or_else(|| Error::Parse(format!("missing {name} in header")))?
        .parse()
        .map_err(|e| Error::Parse(format!("bad {name}: {e}")))
}

pub fn to_text(points: &PointSet) -> String {
    let mut out = format!("{} {}\n", points.len(), points.dim());
    for p in points.iter() {
        let row: Vec<String> = p.iter().map(|c| format!("{c}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn to_binary(points: &PointSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + points.coords().len() * 8);
    out.extend_from_slice(POINTS_MAGIC);
    out.extend_from_slice(&(points.len() as u32).to_le_bytes());
    out.extend_from_slice(&(points.dim() as u32).to_le_bytes());
    for c in points.coords() {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out
}

pub fn parse_binary(bytes: &[u8]) -> Result<PointSet> {
    if bytes.len() < 12 || &bytes[..4] != POINTS_MAGIC {
        return Err(Error::Parse("missing UFLP header".into()));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != n * d * 8 {
        return Err(Error::Parse(format!(
            "expected {} payload bytes, found {}",
            n * d * 8,
            body.len()
        )));
    }
    let coords = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    PointSet::new(d, coords)
}

/// Read a point file, detecting the binary format by its magic.
pub fn read_points(path: impl AsRef<Path>) -> Result<PointSet> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(POINTS_MAGIC) {
        parse_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))?;
        parse_text(&text)
    }
}

pub fn write_points(path: impl AsRef<Path>, points: &PointSet, binary: bool) -> Result<()> {
    if binary {
        fs::write(path, to_binary(points))?;
    } else {
        fs::write(path, to_text(points))?;
    }
    Ok(())
}

/// Facilities as `facility_index,x0,x1,...`, a blank line, then
/// `point_id,facility_index,distance` per point.
pub fn solution_csv(points: &PointSet, sol: &UflSolution) -> String {
    let dim = sol.facilities.first().map_or(points.dim(), Vec::len);
    let mut out = String::from("facility_index");
    for j in 0..dim {
        let _ = write!(out, ",x{j}");
    }
    out.push('\n');
    for (k, f) in sol.facilities.iter().enumerate() {
        let _ = write!(out, "{k}");
        for v in f {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out.push_str("\npoint_id,facility_index,distance\n");
    for x in 0..points.len() {
        let _ = writeln!(out, "{},{},{}", x, sol.assignment[x], sol.distance_of(points, x));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn text_example() {
        let p = parse_text("2 3\n1 2 3\n-0.5 0 1e3\n").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.point(1), &[-0.5, 0.0, 1000.0]);
    }

    #[test]
    fn text_errors() {
        assert!(parse_text("").is_err());
        assert!(parse_text("2 2\n1 2\n").is_err());
        assert!(parse_text("1 2\n1 2 3\n").is_err());
        assert!(parse_text("1 2\n1 x\n").is_err());
    }

    #[test]
    fn binary_rejects_bad_magic() {
        assert!(parse_binary(b"NOPE\0\0\0\0\0\0\0\0").is_err());
        let mut b = to_binary(&PointSet::from_line(&[1.0, 2.0]));
        b.pop();
        assert!(parse_binary(&b).is_err());
    }

    proptest! {
        #[test]
        fn formats_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..20)) {
            let p = PointSet::from_rows(&rows).unwrap();
            prop_assert_eq!(&parse_text(&to_text(&p)).unwrap(), &p);
            prop_assert_eq!(&parse_binary(&to_binary(&p)).unwrap(), &p);
        }
    }

    #[test]
    fn solution_block_layout() {
        let x = PointSet::from_line(&[0.0, 2.0]);
        let sol = crate::geometry::ufl_cost(&x, &[vec![0.5]]).unwrap();
        assert_eq!(
            solution_csv(&x, &sol),
            "facility_index,x0\n0,0.5\n\npoint_id,facility_index,distance\n0,0,0.5\n1,0,1.5\n"
        );
    }
}
