//! Benchmark tables and paired error sets.
//!
//! Input is a comma-separated table with a mandatory header:
//!
//! ```text
//! System,Ref[,uRef],<Method1>[,u:<Method1>],<Method2>,...
//! ```
//!
//! `uRef` holds the reference-value uncertainty and `u:<Method>` the
//! uncertainty of that method's predictions; absent columns mean zero.
//! Lines starting with `#` are comments. Rows with an empty or `NA` cell are
//! dropped (and listed in [`BenchmarkTable::rejected_rows`]); any other
//! unparsable cell is an error.

use std::collections::HashSet;
use std::io::Read;

use serde::Serialize;

use crate::error::{Error, Result};

/// Ratio max/median of the error uncertainties above which
/// [`screen_uncertainty`] warns.
pub const EXTREME_UNCERTAINTY_RATIO: f64 = 10.0;

/// Parsing options for [`load_table`].
#[derive(Debug, Clone, Copy)]
pub struct TableFormat {
    pub delimiter: u8,
    pub comment: Option<u8>,
}

impl Default for TableFormat {
    fn default() -> Self {
        TableFormat {
            delimiter: b',',
            comment: Some(b'#'),
        }
    }
}

/// Predictions of one method, with optional per-system uncertainties.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodColumn {
    pub name: String,
    pub predictions: Vec<f64>,
    pub uncertainty: Option<Vec<f64>>,
}

/// A row dropped during loading because it had a missing cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedRow {
    /// 1-based line number in the source.
    pub line: u64,
    pub column: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkTable {
    pub system_ids: Vec<String>,
    pub reference: Vec<f64>,
    pub ref_uncertainty: Option<Vec<f64>>,
    pub methods: Vec<MethodColumn>,
    pub rejected_rows: Vec<RejectedRow>,
}

impl BenchmarkTable {
    /// Builds a table and checks all of its invariants.
    pub fn new(
        system_ids: Vec<String>,
        reference: Vec<f64>,
        ref_uncertainty: Option<Vec<f64>>,
        methods: Vec<MethodColumn>,
    ) -> Result<Self> {
        let table = BenchmarkTable {
            system_ids,
            reference,
            ref_uncertainty,
            methods,
            rejected_rows: Vec::new(),
        };
        table.validate()?;
        Ok(table)
    }

    pub fn n_systems(&self) -> usize {
        self.system_ids.len()
    }

    pub fn n_methods(&self) -> usize {
        self.methods.len()
    }

    pub fn method_names(&self) -> Vec<String> {
        self.methods.iter().map(|m| m.name.clone()).collect()
    }

    fn validate(&self) -> Result<()> {
        let n = self.system_ids.len();
        if n < 2 {
            return Err(Error::TooFewSystems {
                found: n,
                required: 2,
            });
        }
        if self.methods.is_empty() {
            return Err(Error::MalformedHeader("no method column".into()));
        }
        let mut seen = HashSet::new();
        for id in &self.system_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateSystemId(id.clone()));
            }
        }
        check_column("Ref", &self.reference, n, false)?;
        if let Some(u) = &self.ref_uncertainty {
            check_column("uRef", u, n, true)?;
        }
        let mut names = HashSet::new();
        for m in &self.methods {
            if !names.insert(m.name.as_str()) {
                return Err(Error::MalformedHeader(format!(
                    "duplicate method `{}`",
                    m.name
                )));
            }
            check_column(&m.name, &m.predictions, n, false)?;
            if let Some(u) = &m.uncertainty {
                check_column(&format!("u:{}", m.name), u, n, true)?;
            }
        }
        Ok(())
    }
}

fn check_column(name: &str, values: &[f64], n: usize, uncertainty: bool) -> Result<()> {
    if values.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: values.len(),
        });
    }
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonNumericCell {
                row: i + 1,
                column: name.to_string(),
                value: v.to_string(),
            });
        }
        if uncertainty && v < 0.0 {
            return Err(Error::NegativeUncertainty {
                row: i + 1,
                column: name.to_string(),
                value: v,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ColumnRole {
    Reference,
    RefUncertainty,
    Method(usize),
    MethodUncertainty(usize),
}

fn parse_header(header: &csv::StringRecord) -> Result<(Vec<ColumnRole>, Vec<String>)> {
    let fields: Vec<&str> = header.iter().collect();
    if fields.len() < 3 {
        return Err(Error::MalformedHeader(
            "expected at least `System,Ref,<Method>`".into(),
        ));
    }
    if !fields[0].eq_ignore_ascii_case("system") {
        return Err(Error::MalformedHeader(format!(
            "first column must be `System`, found `{}`",
            fields[0]
        )));
    }
    if !fields[1].eq_ignore_ascii_case("ref") {
        return Err(Error::MalformedHeader(format!(
            "second column must be `Ref`, found `{}`",
            fields[1]
        )));
    }

    let mut methods: Vec<String> = Vec::new();
    for f in &fields[2..] {
        if f.is_empty() {
            return Err(Error::MalformedHeader("empty column name".into()));
        }
        if !f.eq_ignore_ascii_case("uref") && !f.starts_with("u:") {
            if methods.iter().any(|m| m == f) {
                return Err(Error::MalformedHeader(format!("duplicate method `{f}`")));
            }
            methods.push(f.to_string());
        }
    }
    if methods.is_empty() {
        return Err(Error::MalformedHeader("no method column".into()));
    }

    let mut roles = vec![ColumnRole::Reference];
    let mut have_uref = false;
    let mut have_umethod = vec![false; methods.len()];
    for f in &fields[2..] {
        if f.eq_ignore_ascii_case("uref") {
            if have_uref {
                return Err(Error::MalformedHeader("duplicate `uRef` column".into()));
            }
            have_uref = true;
            roles.push(ColumnRole::RefUncertainty);
        } else if let Some(target) = f.strip_prefix("u:") {
            let j = methods
                .iter()
                .position(|m| m == target)
                .ok_or_else(|| {
                    Error::MalformedHeader(format!("`{f}` refers to unknown method `{target}`"))
                })?;
            if have_umethod[j] {
                return Err(Error::MalformedHeader(format!("duplicate `{f}` column")));
            }
            have_umethod[j] = true;
            roles.push(ColumnRole::MethodUncertainty(j));
        } else {
            let j = methods.iter().position(|m| m == f).unwrap();
            roles.push(ColumnRole::Method(j));
        }
    }
    Ok((roles, methods))
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

/// Reads and validates a benchmark table.
pub fn load_table<R: Read>(source: R, format: &TableFormat) -> Result<BenchmarkTable> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .comment(format.comment)
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(source);

    let header = reader.headers()?.clone();
    let (roles, method_names) = parse_header(&header)?;
    let k = method_names.len();
    let has_uref = roles.contains(&ColumnRole::RefUncertainty);
    let has_umethod: Vec<bool> = (0..k)
        .map(|j| roles.contains(&ColumnRole::MethodUncertainty(j)))
        .collect();

    let mut ids = Vec::new();
    let mut reference = Vec::new();
    let mut uref = Vec::new();
    let mut predictions = vec![Vec::new(); k];
    let mut umethod = vec![Vec::new(); k];
    let mut rejected = Vec::new();
    let mut seen = HashSet::new();

    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());

        if let Some(col) = record
            .iter()
            .enumerate()
            .find(|(_, c)| is_missing(c))
            .map(|(c, _)| header[c].to_string())
        {
            rejected.push(RejectedRow { line, column: col });
            continue;
        }

        let id = record[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateSystemId(id));
        }

        let mut parsed = Vec::with_capacity(roles.len());
        for (c, role) in roles.iter().enumerate() {
            let cell = &record[c + 1];
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::NonNumericCell {
                    row: line as usize,
                    column: header[c + 1].to_string(),
                    value: cell.to_string(),
                })?;
            if matches!(role, ColumnRole::RefUncertainty | ColumnRole::MethodUncertainty(_))
                && v < 0.0
            {
                return Err(Error::NegativeUncertainty {
                    row: line as usize,
                    column: header[c + 1].to_string(),
                    value: v,
                });
            }
            parsed.push(v);
        }

        ids.push(id);
        for (role, v) in roles.iter().zip(parsed) {
            match *role {
                ColumnRole::Reference => reference.push(v),
                ColumnRole::RefUncertainty => uref.push(v),
                ColumnRole::Method(j) => predictions[j].push(v),
                ColumnRole::MethodUncertainty(j) => umethod[j].push(v),
            }
        }
    }

    let methods = method_names
        .into_iter()
        .zip(predictions)
        .zip(umethod)
        .zip(has_umethod)
        .map(|(((name, predictions), u), has_u)| MethodColumn {
            name,
            predictions,
            uncertainty: has_u.then_some(u),
        })
        .collect();

    let mut table = BenchmarkTable::new(ids, reference, has_uref.then_some(uref), methods)?;
    table.rejected_rows = rejected;
    Ok(table)
}

/// Standard uncertainty of an error from those of the reference value and
/// of the prediction, combined in quadrature.
pub fn combine_uncertainty(u_ref: f64, u_calc: f64) -> Result<f64> {
    if !(u_ref >= 0.0 && u_calc >= 0.0) || !u_ref.is_finite() || !u_calc.is_finite() {
        return Err(Error::invalid(format!(
            "uncertainties must be finite and nonnegative, got ({u_ref}, {u_calc})"
        )));
    }
    Ok(u_ref.hypot(u_calc))
}

/// Paired signed errors: column `j`, row `i` is the error of method `j` on
/// system `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorMatrix {
    method_names: Vec<String>,
    errors: Vec<Vec<f64>>,
    uncertainty: Option<Vec<Vec<f64>>>,
    n_systems: usize,
}

impl ErrorMatrix {
    /// Builds a matrix from named error columns of equal length.
    pub fn new(method_names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if method_names.len() != columns.len() {
            return Err(Error::LengthMismatch {
                expected: method_names.len(),
                found: columns.len(),
            });
        }
        if columns.is_empty() {
            return Err(Error::invalid("error matrix needs at least one column"));
        }
        let n = columns[0].len();
        if n == 0 {
            return Err(Error::TooFewSystems {
                found: 0,
                required: 1,
            });
        }
        for c in &columns {
            if c.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("error values must be finite"));
            }
        }
        Ok(ErrorMatrix {
            method_names,
            errors: columns,
            uncertainty: None,
            n_systems: n,
        })
    }

    /// Attaches per-cell error uncertainties (same shape as the errors).
    pub fn with_uncertainty(mut self, uncertainty: Vec<Vec<f64>>) -> Result<Self> {
        if uncertainty.len() != self.errors.len() {
            return Err(Error::LengthMismatch {
                expected: self.errors.len(),
                found: uncertainty.len(),
            });
        }
        for (j, u) in uncertainty.iter().enumerate() {
            check_column(&format!("u:{}", self.method_names[j]), u, self.n_systems, true)?;
        }
        self.uncertainty = Some(uncertainty);
        Ok(self)
    }

    pub fn n_systems(&self) -> usize {
        self.n_systems
    }

    pub fn n_methods(&self) -> usize {
        self.errors.len()
    }

    pub fn method_names(&self) -> &[String] {
        &self.method_names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.errors
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.errors[j]
    }

    /// Per-cell uncertainties u(e_i), one column per method.
    pub fn uncertainty(&self) -> Option<&[Vec<f64>]> {
        self.uncertainty.as_deref()
    }

    pub fn method_index(&self, name: &str) -> Result<usize> {
        self.method_names
            .iter()
            .position(|m| m == name)
            .ok_or_else(|| Error::UnknownMethod(name.to_string()))
    }

    /// New matrix made of the rows at `indices` (repeats allowed), keeping
    /// all columns aligned.
    pub fn select_rows(&self, indices: &[usize]) -> ErrorMatrix {
        let pick = |col: &Vec<f64>| indices.iter().map(|&i| col[i]).collect::<Vec<_>>();
        ErrorMatrix {
            method_names: self.method_names.clone(),
            errors: self.errors.iter().map(pick).collect(),
            uncertainty: self
                .uncertainty
                .as_ref()
                .map(|u| u.iter().map(pick).collect()),
            n_systems: indices.len(),
        }
    }
}

/// Computes e_i(M) = r_i - c_i(M) for every method, combining uncertainties
/// when the table carries any.
pub fn errors_from_table(table: &BenchmarkTable) -> ErrorMatrix {
    let columns = table
        .methods
        .iter()
        .map(|m| {
            table
                .reference
                .iter()
                .zip(&m.predictions)
                .map(|(r, c)| r - c)
                .collect()
        })
        .collect();
    let matrix = ErrorMatrix {
        method_names: table.method_names(),
        errors: columns,
        uncertainty: None,
        n_systems: table.n_systems(),
    };

    let any_u = table.ref_uncertainty.is_some() || table.methods.iter().any(|m| m.uncertainty.is_some());
    if !any_u {
        return matrix;
    }
    let n = table.n_systems();
    let zeros = vec![0.0; n];
    let uref = table.ref_uncertainty.as_deref().unwrap_or(&zeros);
    let unc = table
        .methods
        .iter()
        .map(|m| {
            let uc = m.uncertainty.as_deref().unwrap_or(&zeros);
            uref.iter()
                .zip(uc)
                .map(|(&a, &b)| a.hypot(b))
                .collect()
        })
        .collect();
    ErrorMatrix {
        uncertainty: Some(unc),
        ..matrix
    }
}

/// Warns when some error uncertainty is more than
/// [`EXTREME_UNCERTAINTY_RATIO`] times the median one.
pub fn screen_uncertainty(matrix: &ErrorMatrix) -> Option<String> {
    let u = matrix.uncertainty()?;
    let mut all: Vec<f64> = u.iter().flatten().copied().collect();
    all.sort_by(f64::total_cmp);
    let max = *all.last()?;
    let n = all.len();
    let median = if n % 2 == 1 {
        all[n / 2]
    } else {
        0.5 * (all[n / 2 - 1] + all[n / 2])
    };
    if max > 0.0 && (median == 0.0 || max / median > EXTREME_UNCERTAINTY_RATIO) {
        Some(format!(
            "extreme uncertainty: max u(e) = {max} is more than {EXTREME_UNCERTAINTY_RATIO} times the median {median}"
        ))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<BenchmarkTable> {
        load_table(text.as_bytes(), &TableFormat::default())
    }

    #[test]
    fn loads_simple_table() {
        let t = load("System,Ref,M1\na,1.0,0.9\nb,2.0,2.1\nc,3.0,3.0\n").unwrap();
        assert_eq!(t.n_systems(), 3);
        assert_eq!(t.n_methods(), 1);
        assert_eq!(t.methods[0].predictions, vec![0.9, 2.1, 3.0]);
        assert!(t.ref_uncertainty.is_none());
    }

    #[test]
    fn rejects_duplicate_ids() {
        let err = load("System,Ref,M1\na,1.0,0.9\na,2.0,2.1\nc,3.0,3.0\n").unwrap_err();
        assert!(err.to_string().contains("duplicate system id"), "{err}");
    }

    #[test]
    fn rejects_negative_uncertainty() {
        let err = load("System,Ref,uRef,M1\na,1.0,0.1,0.9\nb,2.0,-0.1,2.1\n").unwrap_err();
        assert!(err.to_string().contains("negative uncertainty"), "{err}");
    }

    #[test]
    fn rejects_non_numeric_with_line() {
        let err = load("System,Ref,M1\na,1.0,0.9\nb,two,2.1\nc,3,3\n").unwrap_err();
        match err {
            Error::NonNumericCell { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "Ref");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn rejects_bad_headers() {
        for text in [
            "Sys,Ref,M1\na,1,1\nb,2,2\n",
            "System,Reference,M1\na,1,1\nb,2,2\n",
            "System,Ref\na,1\nb,2\n",
            "System,Ref,M1,u:M2\na,1,1,1\nb,2,2,1\n",
            "System,Ref,M1,M1\na,1,1,1\nb,2,2,1\n",
        ] {
            assert!(matches!(load(text), Err(Error::MalformedHeader(_))), "{text}");
        }
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(
            load("System,Ref,M1\na,1,1\n"),
            Err(Error::TooFewSystems { found: 1, .. })
        ));
    }

    #[test]
    fn comments_and_missing_cells() {
        let t = load("# a comment\nSystem,Ref,M1,M2\na,1,1,2\n# another\nb,2,,2\nc,3,3,NA\nd,4,4,4\ne,5,5,5\n")
            .unwrap();
        assert_eq!(t.system_ids, vec!["a", "d", "e"]);
        assert_eq!(t.rejected_rows.len(), 2);
        assert_eq!(t.rejected_rows[0].column, "M1");
        assert_eq!(t.rejected_rows[1].column, "M2");
    }

    #[test]
    fn uncertainty_columns() {
        let t = load("System,Ref,uRef,M1,u:M1,M2\na,1,3,1,4,0\nb,2,0,1,0,0\n").unwrap();
        let m = errors_from_table(&t);
        let u = m.uncertainty().unwrap();
        assert_eq!(u[0], vec![5.0, 0.0]);
        assert_eq!(u[1], vec![3.0, 0.0]);
    }

    #[test]
    fn errors_are_reference_minus_prediction() {
        let t = BenchmarkTable::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![1.0, 2.0, 3.0],
            None,
            vec![
                MethodColumn {
                    name: "c1".into(),
                    predictions: vec![1.0, 1.0, 1.0],
                    uncertainty: None,
                },
                MethodColumn {
                    name: "c2".into(),
                    predictions: vec![0.0, 0.0, 0.0],
                    uncertainty: None,
                },
            ],
        )
        .unwrap();
        let m = errors_from_table(&t);
        assert_eq!(m.column(0), &[0.0, 1.0, 2.0]);
        assert_eq!(m.column(1), &[1.0, 2.0, 3.0]);
        assert!(m.uncertainty().is_none());
    }

    #[test]
    fn simple_subtractions() {
        let t = BenchmarkTable::new(
            vec!["a".into(), "b".into()],
            vec![1.0, 2.0],
            None,
            vec![MethodColumn {
                name: "M1".into(),
                predictions: vec![0.5, 2.5],
                uncertainty: None,
            }],
        )
        .unwrap();
        assert_eq!(errors_from_table(&t).column(0), &[0.5, -0.5]);

        let same = BenchmarkTable::new(
            vec!["a".into(), "b".into()],
            vec![1.0, 2.0],
            None,
            vec![MethodColumn {
                name: "M1".into(),
                predictions: vec![1.0, 2.0],
                uncertainty: None,
            }],
        )
        .unwrap();
        assert_eq!(errors_from_table(&same).column(0), &[0.0, 0.0]);
    }

    #[test]
    fn combine_uncertainty_cases() {
        assert_eq!(combine_uncertainty(3.0, 4.0).unwrap(), 5.0);
        assert_eq!(combine_uncertainty(0.7, 0.0).unwrap(), 0.7);
        assert_eq!(combine_uncertainty(0.0, 0.0).unwrap(), 0.0);
        assert!(combine_uncertainty(-1.0, 0.0).is_err());
        assert!(combine_uncertainty(0.0, f64::NAN).is_err());
    }

    #[test]
    fn extreme_uncertainty_warning() {
        let m = ErrorMatrix::new(vec!["a".into()], vec![vec![0.0; 5]]).unwrap();
        assert!(screen_uncertainty(&m).is_none());
        let calm = m.clone().with_uncertainty(vec![vec![1.0, 1.0, 2.0, 1.0, 5.0]]).unwrap();
        assert!(screen_uncertainty(&calm).is_none());
        let wild = m.with_uncertainty(vec![vec![1.0, 1.0, 1.0, 1.0, 50.0]]).unwrap();
        assert!(screen_uncertainty(&wild).is_some());
    }

    #[test]
    fn select_rows_keeps_pairing() {
        let m = ErrorMatrix::new(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 2.0, 3.0], vec![10.0, 20.0, 30.0]],
        )
        .unwrap();
        let r = m.select_rows(&[2, 2, 0]);
        assert_eq!(r.column(0), &[3.0, 3.0, 1.0]);
        assert_eq!(r.column(1), &[30.0, 30.0, 10.0]);
    }
}
