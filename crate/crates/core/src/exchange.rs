//! FCIDUMP-compatible exchange file format.
//!
//! Layout: an optional header line `&FCI NORB=n,NELEC=m,MS2=s`, then one
//! record per line, `value p q r s`, with 1-based indices:
//!   p = q = r = s = 0   scalar term
//!   r = s = 0           one-body entry (p, q), stored symmetrically
//!   otherwise           two-body entry in Mulliken order (pq|rs)
//!
//! The file format carries no geometry, tensor kind, or symmetry class, so
//! reading takes that metadata from the caller. Two-body records may name any
//! orbit representative; the value is replicated over the declared class, and
//! conflicting duplicates are rejected. The writer emits canonical keys only,
//! with 17 significant digits (lossless for 64-bit floats).

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, Array4};

use crate::error::{Error, Result};
use crate::symmetry::{canonical_key, symmetry_orbit, Symmetry};
use crate::tensor::{InteractionTensor2B, OneBodyTensor, ScalarTerm, TensorKind};

/// Caller-supplied context the file format does not carry.
#[derive(Debug, Clone, Copy)]
pub struct ExchangeMeta {
    pub kind: TensorKind,
    pub symmetry: Symmetry,
    pub geometry: f64,
    /// Overrides the active-space size when the file has no header; must not
    /// be smaller than the largest index present.
    pub n_act: Option<usize>,
}

impl ExchangeMeta {
    pub fn new(kind: TensorKind, symmetry: Symmetry, geometry: f64) -> Self {
        ExchangeMeta {
            kind,
            symmetry,
            geometry,
            n_act: None,
        }
    }
}

/// Everything read back from one exchange file.
#[derive(Debug, Clone)]
pub struct ExchangeData {
    pub scalar: ScalarTerm,
    pub one_body: Option<OneBodyTensor>,
    pub two_body: Option<InteractionTensor2B>,
    pub n_act: usize,
    pub n_elec: Option<usize>,
    pub ms2: Option<i64>,
}

/// Borrowed view of what to write.
#[derive(Debug, Clone, Copy)]
pub struct ExchangeContent<'a> {
    pub scalar: ScalarTerm,
    pub one_body: Option<&'a OneBodyTensor>,
    pub two_body: Option<&'a InteractionTensor2B>,
    pub n_act: usize,
    pub n_elec: usize,
    pub ms2: i64,
}

pub(crate) fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_exchange_string(content: &ExchangeContent) -> Result<String> {
    let n = content.n_act;
    if let Some(tb) = content.two_body {
        if tb.n_act() != n {
            return Err(Error::ShapeMismatch("two-body n_act vs header".into()));
        }
    }
    if let Some(ob) = content.one_body {
        if ob.n_act() != n {
            return Err(Error::ShapeMismatch("one-body n_act vs header".into()));
        }
    }
    let mut out = String::new();
    writeln!(
        out,
        "&FCI NORB={},NELEC={},MS2={}",
        n, content.n_elec, content.ms2
    )
    .expect("string write");
    if let Some(tb) = content.two_body {
        for key in crate::symmetry::canonical_unit(n, tb.symmetry()) {
            let v = tb.value(key);
            if v != 0.0 {
                writeln!(
                    out,
                    "{} {} {} {} {}",
                    fmt17(v),
                    key[0] + 1,
                    key[1] + 1,
                    key[2] + 1,
                    key[3] + 1
                )
                .expect("string write");
            }
        }
    }
    if let Some(ob) = content.one_body {
        for p in 0..n {
            for q in 0..=p {
                let v = ob.value(p, q);
                if v != 0.0 {
                    writeln!(out, "{} {} {} 0 0", fmt17(v), p + 1, q + 1).expect("string write");
                }
            }
        }
    }
    writeln!(out, "{} 0 0 0 0", fmt17(content.scalar.0)).expect("string write");
    Ok(out)
}

pub fn write_exchange_file(path: &Path, content: &ExchangeContent) -> Result<()> {
    let text = write_exchange_string(content)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

struct RawRecord {
    value: f64,
    idx: [usize; 4],
    line: usize,
}

fn parse_header(
    line: &str,
    path: &str,
    line_no: usize,
) -> Result<(usize, Option<usize>, Option<i64>)> {
    let body = line.trim_start_matches("&FCI").trim();
    let mut norb = None;
    let mut nelec = None;
    let mut ms2 = None;
    for field in body.split(|c: char| c == ',' || c.is_whitespace()) {
        let field = field.trim();
        if field.is_empty() {
            continue;
        }
        let (key, val) = field.split_once('=').ok_or_else(|| Error::FileFormat {
            path: path.into(),
            line: line_no,
            what: format!("malformed header field {field:?}"),
        })?;
        let bad = |what: String| Error::FileFormat {
            path: path.into(),
            line: line_no,
            what,
        };
        match key.trim().to_ascii_uppercase().as_str() {
            "NORB" => {
                norb =
                    Some(val.trim().parse::<usize>().map_err(|_| {
                        bad(format!("NORB must be a positive integer, got {val:?}"))
                    })?)
            }
            "NELEC" => {
                nelec = Some(val.trim().parse::<usize>().map_err(|_| {
                    bad(format!("NELEC must be a non-negative integer, got {val:?}"))
                })?)
            }
            "MS2" => {
                ms2 = Some(
                    val.trim()
                        .parse::<i64>()
                        .map_err(|_| bad(format!("MS2 must be an integer, got {val:?}")))?,
                )
            }
            _ => {} // unknown header keys tolerated
        }
    }
    let norb = norb.ok_or_else(|| Error::FileFormat {
        path: path.into(),
        line: line_no,
        what: "header is missing NORB".into(),
    })?;
    Ok((norb, nelec, ms2))
}

pub fn read_exchange_file(path: &Path, meta: &ExchangeMeta) -> Result<ExchangeData> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_exchange_string(&text, &path.display().to_string(), meta)
}

pub fn read_exchange_string(text: &str, path: &str, meta: &ExchangeMeta) -> Result<ExchangeData> {
    let mut header: Option<(usize, Option<usize>, Option<i64>)> = None;
    let mut records: Vec<RawRecord> = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim();
        if line.is_empty() || line == "/" || line.eq_ignore_ascii_case("&END") {
            continue;
        }
        if line.starts_with('&') {
            if line.to_ascii_uppercase().starts_with("&FCI") {
                if header.is_some() || !records.is_empty() {
                    return Err(Error::FileFormat {
                        path: path.into(),
                        line: line_no,
                        what: "unexpected header after data".into(),
                    });
                }
                header = Some(parse_header(line, path, line_no)?);
                continue;
            }
            return Err(Error::FileFormat {
                path: path.into(),
                line: line_no,
                what: format!("unrecognized directive {line:?}"),
            });
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 5 {
            return Err(Error::FileFormat {
                path: path.into(),
                line: line_no,
                what: format!("expected `value p q r s`, found {} tokens", tokens.len()),
            });
        }
        // Fortran-style D exponents are accepted for compatibility.
        let value: f64 =
            tokens[0]
                .replace(['D', 'd'], "e")
                .parse()
                .map_err(|_| Error::FileFormat {
                    path: path.into(),
                    line: line_no,
                    what: format!("value {:?} is not a decimal float", tokens[0]),
                })?;
        if !value.is_finite() {
            return Err(Error::FileFormat {
                path: path.into(),
                line: line_no,
                what: format!("value {:?} is not finite", tokens[0]),
            });
        }
        let mut idx = [0usize; 4];
        for (slot, tok) in idx.iter_mut().zip(&tokens[1..]) {
            *slot = tok.parse::<usize>().map_err(|_| Error::FileFormat {
                path: path.into(),
                line: line_no,
                what: format!("index {tok:?} is not a non-negative integer"),
            })?;
        }
        records.push(RawRecord {
            value,
            idx,
            line: line_no,
        });
    }

    let max_idx = records.iter().flat_map(|r| r.idx).max().unwrap_or(0);
    let n_act = match (header, meta.n_act) {
        (Some((norb, _, _)), _) => norb,
        (None, Some(n)) => n,
        (None, None) => max_idx, // 1-based, so the max index is the orbital count
    };
    if max_idx > n_act {
        let bad = records.iter().find(|r| r.idx.iter().any(|&i| i > n_act));
        return Err(Error::FileFormat {
            path: path.into(),
            line: bad.map(|r| r.line).unwrap_or(0),
            what: format!("orbital index {max_idx} exceeds NORB = {n_act}"),
        });
    }

    let mut scalar = 0.0;
    let mut scalar_seen = false;
    let mut one_body: Option<Array2<f64>> = None;
    let mut two_body: Option<Array4<f64>> = None;
    let mut seen_two: std::collections::HashMap<[usize; 4], (f64, usize)> =
        std::collections::HashMap::new();
    let mut seen_one: std::collections::HashMap<(usize, usize), (f64, usize)> =
        std::collections::HashMap::new();

    for r in records {
        let [p, q, rr, s] = r.idx;
        if r.idx == [0, 0, 0, 0] {
            if scalar_seen && scalar != r.value {
                return Err(Error::FileFormat {
                    path: path.into(),
                    line: r.line,
                    what: "conflicting scalar records".into(),
                });
            }
            scalar = r.value;
            scalar_seen = true;
        } else if rr == 0 && s == 0 {
            if p == 0 || q == 0 {
                return Err(Error::FileFormat {
                    path: path.into(),
                    line: r.line,
                    what: "one-body record with a zero orbital index".into(),
                });
            }
            let (a, b) = (p - 1, q - 1);
            let pair = (a.min(b), a.max(b));
            if let Some(&(prev, prev_line)) = seen_one.get(&pair) {
                if prev != r.value {
                    return Err(Error::FileFormat {
                        path: path.into(),
                        line: r.line,
                        what: format!(
                            "one-body entry conflicts with line {prev_line} ({prev} vs {})",
                            r.value
                        ),
                    });
                }
            }
            seen_one.insert(pair, (r.value, r.line));
            let h = one_body.get_or_insert_with(|| Array2::zeros((n_act, n_act)));
            h[[a, b]] = r.value;
            h[[b, a]] = r.value;
        } else {
            if p == 0 || q == 0 || rr == 0 || s == 0 {
                return Err(Error::FileFormat {
                    path: path.into(),
                    line: r.line,
                    what: "two-body record with a zero orbital index".into(),
                });
            }
            let key = [p - 1, q - 1, rr - 1, s - 1];
            let canon = canonical_key(key, meta.symmetry);
            if let Some(&(prev, prev_line)) = seen_two.get(&canon) {
                if prev != r.value {
                    return Err(Error::FileFormat {
                        path: path.into(),
                        line: r.line,
                        what: format!(
                            "two-body entry conflicts with line {prev_line} under {} symmetry",
                            meta.symmetry.name()
                        ),
                    });
                }
            }
            seen_two.insert(canon, (r.value, r.line));
            let t = two_body.get_or_insert_with(|| Array4::zeros((n_act, n_act, n_act, n_act)));
            for [a, b, c, d] in symmetry_orbit(key, meta.symmetry) {
                t[[a, b, c, d]] = r.value;
            }
        }
    }

    let one_body = match one_body {
        Some(h) => Some(OneBodyTensor::new(h, meta.geometry)?),
        None => None,
    };
    let two_body = match two_body {
        Some(t) => Some(InteractionTensor2B::new(
            t,
            meta.symmetry,
            meta.kind,
            meta.geometry,
        )?),
        None => None,
    };
    Ok(ExchangeData {
        scalar: ScalarTerm::new(scalar)?,
        one_body,
        two_body,
        n_act,
        n_elec: header.and_then(|(_, ne, _)| ne),
        ms2: header.and_then(|(_, _, m)| m),
    })
}
