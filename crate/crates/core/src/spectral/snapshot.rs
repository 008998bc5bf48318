//! Plain-text coefficient snapshots.
//!
//! ```text
//! spectral3 P=<P> t=<t>
//! l m n re im
//! ...
//! # optional comment lines
//! ```
//!
//! Floats are written with 17 significant digits so a parse/serialize
//! cycle reproduces every coefficient bit for bit.

use super::{Complex, SpectralField, SpectralField2, SpectralField3};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub enum Snapshot {
    Profile(SpectralField3),
    Slice(SpectralField2),
}

impl Snapshot {
    pub fn t(&self) -> f64 {
        match self {
            Snapshot::Profile(f) => f.t(),
            Snapshot::Slice(f) => f.t(),
        }
    }
}

/// A parsed snapshot together with its `#` comment lines (without the marker).
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotFile {
    pub snapshot: Snapshot,
    pub comments: Vec<String>,
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn to_snapshot_string<const D: usize>(field: &SpectralField<D>) -> String {
    let kind = match D {
        3 => "spectral3",
        2 => "spectral2",
        _ => unreachable!("only 2D and 3D fields have a snapshot format"),
    };
    let mut out = String::with_capacity(field.len() * 56 + 40);
    let _ = writeln!(
        out,
        "{kind} P={} t={}",
        field.order(),
        format_float(field.t())
    );
    for (k, c) in field.modes() {
        for m in k {
            let _ = write!(out, "{m} ");
        }
        let _ = writeln!(out, "{} {}", format_float(c.re), format_float(c.im));
    }
    out
}

/// Serializes with trailing `# key=value` comment lines.
pub fn to_snapshot_string_with_comments<const D: usize>(
    field: &SpectralField<D>,
    comments: &[String],
) -> String {
    let mut out = to_snapshot_string(field);
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    out
}

pub fn write_snapshot<const D: usize>(
    path: impl AsRef<Path>,
    field: &SpectralField<D>,
    comments: &[String],
) -> Result<()> {
    std::fs::write(path, to_snapshot_string_with_comments(field, comments))?;
    Ok(())
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<SnapshotFile> {
    parse_snapshot(&std::fs::read_to_string(path)?)
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_header(line: &str) -> Result<(usize, usize, f64)> {
    let mut parts = line.split_whitespace();
    let dims = match parts.next() {
        Some("spectral3") => 3,
        Some("spectral2") => 2,
        other => return Err(parse_err(1, format!("unknown snapshot kind {other:?}"))),
    };
    let order = parts
        .next()
        .and_then(|s| s.strip_prefix("P="))
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| parse_err(1, "expected P=<order>"))?;
    let t = parts
        .next()
        .and_then(|s| s.strip_prefix("t="))
        .and_then(|s| s.parse::<f64>().ok())
        .ok_or_else(|| parse_err(1, "expected t=<time>"))?;
    if parts.next().is_some() {
        return Err(parse_err(1, "trailing tokens in header"));
    }
    Ok((dims, order, t))
}

fn parse_body<const D: usize>(
    order: usize,
    t: f64,
    lines: &[(usize, &str)],
) -> Result<SpectralField<D>> {
    let mut field = SpectralField::<D>::zeros(order, t);
    if lines.len() != field.len() {
        return Err(parse_err(
            lines.last().map_or(1, |l| l.0),
            format!("expected {} mode lines, found {}", field.len(), lines.len()),
        ));
    }
    let mut coeffs = vec![Complex::new(0.0, 0.0); field.len()];
    for (i, &(lineno, text)) in lines.iter().enumerate() {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() != D + 2 {
            return Err(parse_err(lineno, format!("expected {} columns", D + 2)));
        }
        let mut mode = [0i32; D];
        for d in 0..D {
            mode[d] = tokens[d]
                .parse()
                .map_err(|_| parse_err(lineno, "bad mode index"))?;
        }
        if mode != field.mode_of(i) {
            return Err(parse_err(lineno, "modes out of lexicographic order"));
        }
        let re: f64 = tokens[D]
            .parse()
            .map_err(|_| parse_err(lineno, "bad real part"))?;
        let im: f64 = tokens[D + 1]
            .parse()
            .map_err(|_| parse_err(lineno, "bad imaginary part"))?;
        coeffs[i] = Complex::new(re, im);
    }
    field = SpectralField::from_coeffs(order, t, coeffs)?;
    Ok(field)
}

pub fn parse_snapshot(text: &str) -> Result<SnapshotFile> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty snapshot"))?;
    let (dims, order, t) = parse_header(header)?;
    let mut body = Vec::new();
    let mut comments = Vec::new();
    for (lineno, line) in lines {
        let trimmed = line.trim();
        if let Some(c) = trimmed.strip_prefix('#') {
            comments.push(c.trim().to_string());
        } else if !trimmed.is_empty() {
            body.push((lineno, trimmed));
        }
    }
    let snapshot = if dims == 3 {
        Snapshot::Profile(parse_body::<3>(order, t, &body)?)
    } else {
        Snapshot::Slice(parse_body::<2>(order, t, &body)?)
    };
    Ok(SnapshotFile { snapshot, comments })
}

/// Extracts `key=value` pairs from comment lines such as `# residual=1e-15 cond=3.2`.
pub fn comment_values(comments: &[String]) -> Vec<(String, String)> {
    comments
        .iter()
        .flat_map(|c| c.split_whitespace())
        .filter_map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn field3_strategy() -> impl Strategy<Value = SpectralField3> {
        (0usize..3, any::<f64>()).prop_flat_map(|(order, t)| {
            let len = (2 * order + 1).pow(3);
            let finite = any::<f64>().prop_filter("finite", |v| v.is_finite());
            prop::collection::vec((finite.clone(), finite), len).prop_map(move |v| {
                let coeffs = v.into_iter().map(|(a, b)| Complex::new(a, b)).collect();
                SpectralField3::from_coeffs(order, if t.is_finite() { t } else { 0.0 }, coeffs)
                    .unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn bit_exact_roundtrip(field in field3_strategy()) {
            let text = to_snapshot_string(&field);
            let parsed = parse_snapshot(&text).unwrap();
            let Snapshot::Profile(back) = parsed.snapshot else { panic!("wrong kind") };
            prop_assert_eq!(back.t().to_bits(), field.t().to_bits());
            for (a, b) in back.coeffs().iter().zip(field.coeffs()) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
            prop_assert_eq!(to_snapshot_string(&back), text);
        }
    }

    #[test]
    fn slice_with_comments() {
        let mut f = SpectralField2::zeros(1, 0.25);
        f.set([1, -1], Complex::new(0.1, -0.3)).unwrap();
        let text = to_snapshot_string_with_comments(&f, &["residual=1e-15 cond=4".into()]);
        assert!(text.starts_with("spectral2 P=1 t=2.5000000000000000e-1\n"));
        assert!(text.contains("1 -1 1.0000000000000001e-1 -2.9999999999999999e-1"));
        let parsed = parse_snapshot(&text).unwrap();
        assert_eq!(parsed.snapshot, Snapshot::Slice(f));
        let kv = comment_values(&parsed.comments);
        assert_eq!(kv[0], ("residual".to_string(), "1e-15".to_string()));
    }

    #[test]
    fn malformed_inputs() {
        assert!(parse_snapshot("").is_err());
        assert!(parse_snapshot("spectral4 P=1 t=0").is_err());
        assert!(parse_snapshot("spectral2 P=0 t=0\n").is_err());
        assert!(parse_snapshot("spectral2 P=0 t=0\n1 0 1.0 0.0\n").is_err());
        assert!(parse_snapshot("spectral2 P=0 t=0\n0 0 1.0 0.0\n").is_ok());
    }
}
