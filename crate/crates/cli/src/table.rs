//! Result tables and their CSV form.

use std::io::Write;

use autoqec_core::C64;

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Real(f64),
    Complex(C64),
    Bool(bool),
    Int(i64),
    Text(String),
}

impl Value {
    /// Shortest round-trip text, so rows are reproducible byte for byte.
    pub fn render(&self) -> String {
        match self {
            Value::Real(x) => format!("{x:e}"),
            Value::Complex(z) => format!("{:e}{:+e}i", z.re, z.im),
            Value::Bool(b) => b.to_string(),
            Value::Int(n) => n.to_string(),
            Value::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<usize> for Value {
    fn from(n: usize) -> Self {
        Value::Int(n as i64)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    /// Lines of the `#` header, without the prefix.
    pub metadata: Vec<String>,
    /// Set when a verification experiment found a failing check.
    pub failure: Option<String>,
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        ResultTable {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for line in &self.metadata {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Value::render))?;
        }
        w.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_block() {
        let mut t = ResultTable::new(&["x", "ok"]);
        t.metadata.push("autoqec".into());
        t.push(vec![0.1.into(), true.into()]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# autoqec\nx,ok\n1e-1,true\n");
    }

    #[test]
    fn reals_round_trip() {
        for x in [0.1 + 0.2, 1.0 / 3.0, 6.02e23, -4.2e-17] {
            assert_eq!(Value::Real(x).render().parse::<f64>().unwrap(), x);
        }
        assert_eq!(Value::Complex(C64::new(1.0, -0.5)).render(), "1e0-5e-1i");
    }
}
