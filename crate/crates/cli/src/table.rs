//! CSV output. Floats use 17 significant digits in scientific notation.

use sparse_lqr_core::SolveTrace;

pub fn float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

/// A CSV table with a mandatory header row.
#[derive(Debug, Clone)]
pub struct Table {
    text: String,
    width: usize,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self {
            text,
            width: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.width, "row width must match the header");
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

pub fn trace_table(trace: &SolveTrace) -> Table {
    let mut t = Table::new(&["iter", "F", "J", "G", "rho", "nnz", "abscissa", "backtracks"]);
    for r in &trace.records {
        let mut cells = vec![r.iter.to_string()];
        for v in [r.f, r.j, r.g, r.rho] {
            cells.push(float(v));
        }
        cells.push(r.nnz.to_string());
        cells.push(float(r.abscissa));
        cells.push(r.backtracks.to_string());
        t.row(&cells);
    }
    t
}

/// Parse a numeric CSV column by header name; for tests and tooling.
pub fn column(csv: &str, name: &str) -> Option<Vec<f64>> {
    let mut lines = csv.lines();
    let idx = lines.next()?.split(',').position(|h| h == name)?;
    lines.map(|l| l.split(',').nth(idx)?.parse().ok()).collect()
}
