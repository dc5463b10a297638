//! Text and JSON formats: spectra, matrices and distribution specs.
//!
//! * Spectrum: one eigenvalue per line, or an inline JSON array.
//! * Matrix: one row per line, entries separated by commas and/or
//!   whitespace. Blank lines and lines starting with `#` are skipped.
//! * Distribution: a JSON document, one of
//!   `{"marginals":[{"kind":"gaussian","sigma":1.0},...], "basis":"identity", "label":{"kind":"linear","w_star":[...]}}`,
//!   `{"twin":"D","d":20}` or `{"gaussian_mixture":{"d":100,"v":4.0}}`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::error::{invalid, Error, Result};
use crate::linalg::SampleMatrix;
use crate::spectra::CovarianceSpectrum;
use crate::subgauss::{Distribution, LabelRule, Marginal, MixtureSpec, ProductDistributionSpec, Twin, TwinDistributionSpec};

fn parse_err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line, msg: msg.into() })
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_number(line: usize, tok: &str) -> Result<f64> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => parse_err(line, format!("not a finite number: {tok:?}")),
    }
}

pub fn parse_spectrum(text: &str) -> Result<CovarianceSpectrum> {
    let trimmed = text.trim_start();
    let values = if trimmed.starts_with('[') {
        let v: Vec<f64> = serde_json::from_str(trimmed).or_else(|e| parse_err(e.line(), e.to_string()))?;
        v
    } else {
        let mut v = Vec::new();
        for (line, l) in content_lines(text) {
            v.push(parse_number(line, l)?);
        }
        v
    };
    CovarianceSpectrum::new(values)
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (line, l) in content_lines(text) {
        let row = l
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| parse_number(line, t))
            .collect::<Result<Vec<_>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => return parse_err(line, format!("expected {w} entries, found {}", row.len())),
            _ => {}
        }
        rows.push(row);
    }
    let Some(d) = width else {
        return parse_err(0, "matrix file has no rows");
    };
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

pub fn parse_sample_matrix(text: &str) -> Result<SampleMatrix> {
    SampleMatrix::new(parse_matrix(text)?)
}

pub fn read_spectrum(path: &Path) -> Result<CovarianceSpectrum> {
    parse_spectrum(&fs::read_to_string(path)?)
}

pub fn read_sample_matrix(path: &Path) -> Result<SampleMatrix> {
    parse_sample_matrix(&fs::read_to_string(path)?)
}

/// Parse a distribution document. Relative basis paths resolve against
/// `base_dir`.
pub fn parse_distribution(value: &Value, base_dir: Option<&Path>) -> Result<Distribution> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::InvalidArgument("distribution spec must be a JSON object".into()))?;
    if let Some(twin) = obj.get("twin") {
        let twin: Twin = serde_json::from_value(twin.clone())?;
        let d = obj
            .get("d")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::InvalidArgument("twin spec needs integer \"d\"".into()))?;
        return Ok(Distribution::Twin(TwinDistributionSpec::new(twin, d as usize)?));
    }
    if let Some(mix) = obj.get("gaussian_mixture") {
        let m: MixtureSpec = serde_json::from_value(mix.clone())?;
        return Ok(Distribution::Mixture(MixtureSpec::new(m.d, m.v)?));
    }
    let Some(marginals) = obj.get("marginals") else {
        return invalid("distribution spec needs one of \"marginals\", \"twin\", \"gaussian_mixture\"");
    };
    let marginals: Vec<Marginal> = serde_json::from_value(marginals.clone())?;
    let basis = match obj.get("basis") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) if s == "identity" => None,
        Some(Value::String(path)) => {
            let p = Path::new(path);
            let full = match base_dir {
                Some(dir) if p.is_relative() => dir.join(p),
                _ => p.to_path_buf(),
            };
            Some(parse_matrix(&fs::read_to_string(full)?)?)
        }
        Some(Value::Array(rows)) => {
            let rows: Vec<Vec<f64>> = serde_json::from_value(Value::Array(rows.clone()))?;
            Some(SampleMatrix::from_rows(&rows)?.into_matrix())
        }
        Some(other) => return invalid(format!("unsupported basis {other}")),
    };
    let label: LabelRule = match obj.get("label") {
        None | Some(Value::Null) => LabelRule::default(),
        Some(v) => serde_json::from_value(v.clone())?,
    };
    let mut spec = ProductDistributionSpec::new(marginals, basis, label)?;
    if let Some(l) = obj.get("l_star").and_then(Value::as_f64) {
        spec = spec.with_l_star(l);
        spec.validate()?;
    }
    Ok(Distribution::Product(spec))
}

pub fn read_distribution(path: &Path) -> Result<Distribution> {
    let value: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    parse_distribution(&value, path.parent())
}

pub fn distribution_to_json(dist: &Distribution) -> Value {
    match dist {
        Distribution::Product(p) => {
            let basis = match &p.basis {
                None => json!("identity"),
                Some(a) => Value::from(
                    (0..a.nrows())
                        .map(|i| a.row(i).iter().copied().collect::<Vec<f64>>())
                        .collect::<Vec<_>>(),
                ),
            };
            let mut v = json!({ "marginals": p.marginals, "basis": basis, "label": p.label });
            if let Some(l) = p.l_star {
                v["l_star"] = json!(l);
            }
            v
        }
        Distribution::Twin(t) => json!({ "twin": t.twin, "d": t.d }),
        Distribution::Mixture(g) => json!({ "gaussian_mixture": { "d": g.d, "v": g.v } }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_formats() {
        let a = parse_spectrum("# header\n3\n2.5\n\n1e-3\n").unwrap();
        assert_eq!(a.eigenvalues(), &[3.0, 2.5, 1e-3]);
        let b = parse_spectrum("[3, 2.5, 0.001]").unwrap();
        assert_eq!(a, b);
        assert!(matches!(parse_spectrum("1\nfoo\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_spectrum("1\n2\n"), Err(Error::InvalidSpectrum(_))));
    }

    #[test]
    fn matrix_formats() {
        let m = parse_matrix("1, 2 ,3\n4 5\t6\n").unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        assert!(matches!(parse_matrix("1 2\n3\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_matrix("1 x\n"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_matrix("").is_err());
    }

    #[test]
    fn distribution_documents_round_trip() {
        let docs = [
            json!({"marginals":[{"kind":"gaussian","sigma":1.0},{"kind":"rademacher","b":2.0}],"basis":"identity","label":{"kind":"linear","w_star":[0.0,1.0]}}),
            json!({"marginals":[{"kind":"uniform_interval","b":1.0},{"kind":"fixed","c":0.5}],"basis":[[0.0,1.0],[1.0,0.0]]}),
            json!({"twin":"P","d":20}),
            json!({"gaussian_mixture":{"d":10,"v":4.0}}),
        ];
        for doc in docs {
            let d = parse_distribution(&doc, None).unwrap();
            let again = parse_distribution(&distribution_to_json(&d), None).unwrap();
            assert_eq!(d, again);
        }
        assert!(parse_distribution(&json!({"twin":"Q","d":3}), None).is_err());
        assert!(parse_distribution(&json!({"twin":"D","d":1}), None).is_err());
        assert!(parse_distribution(&json!({"foo":1}), None).is_err());
    }

    #[test]
    fn basis_from_file() {
        let dir = std::env::temp_dir().join(format!("kgamma-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join("basis.txt"), "0 1\n1 0\n").unwrap();
        let doc = json!({"marginals":[{"kind":"gaussian","sigma":1.0},{"kind":"gaussian","sigma":2.0}],"basis":"basis.txt"});
        let Distribution::Product(p) = parse_distribution(&doc, Some(&dir)).unwrap() else {
            panic!()
        };
        assert_eq!(p.basis.unwrap(), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        fs::remove_dir_all(dir).ok();
    }
}
