use std::io::{BufRead, Write};
use std::path::Path;

use super::Phase;
use crate::error::{Error, Result};

/// Mean sum-rate, connection deficit and total entropy over some samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitStats {
    pub f: f64,
    pub conn: f64,
    pub disc: f64,
}

/// One training iteration: the multipliers it used, the training-batch
/// means it saw, and test-set means after its update (when evaluated).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Record {
    pub iteration: u64,
    pub phase: Phase,
    pub lambda1: f64,
    pub lambda2: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub train: SplitStats,
    pub test: Option<SplitStats>,
}

pub const CSV_HEADER: &str =
    "iteration,phase,lambda1,lambda2,nu1,nu2,train_f,test_f,conn_pen,disc_pen,test_conn_pen,test_disc_pen";

impl Record {
    pub fn csv_row(&self) -> String {
        let t = |f: fn(&SplitStats) -> f64| self.test.as_ref().map_or(String::new(), |s| format!("{:?}", f(s)));
        format!(
            "{},{},{:?},{:?},{:?},{:?},{:?},{},{:?},{:?},{},{}",
            self.iteration,
            self.phase,
            self.lambda1,
            self.lambda2,
            self.nu1,
            self.nu2,
            self.train.f,
            t(|s| s.f),
            self.train.conn,
            self.train.disc,
            t(|s| s.conn),
            t(|s| s.disc),
        )
    }

    fn parse(line: &str) -> std::result::Result<Record, String> {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 12 {
            return Err(format!("expected 12 columns, got {}", cols.len()));
        }
        let num = |i: usize| cols[i].parse::<f64>().map_err(|_| format!("column {}: {:?}", i + 1, cols[i]));
        let test = if cols[7].is_empty() {
            None
        } else {
            Some(SplitStats { f: num(7)?, conn: num(10)?, disc: num(11)? })
        };
        Ok(Record {
            iteration: cols[0].parse().map_err(|_| format!("bad iteration {:?}", cols[0]))?,
            phase: cols[1].parse()?,
            lambda1: num(2)?,
            lambda2: num(3)?,
            nu1: num(4)?,
            nu2: num(5)?,
            train: SplitStats { f: num(6)?, conn: num(8)?, disc: num(9)? },
            test,
        })
    }
}

/// Append-only iteration log.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metrics {
    records: Vec<Record>,
}

impl Metrics {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `r`; iteration indices must strictly increase.
    pub fn push(&mut self, r: Record) {
        assert!(
            self.records.last().is_none_or(|last| last.iteration < r.iteration),
            "metrics iterations must strictly increase"
        );
        self.records.push(r);
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(w, "{}", r.csv_row())?;
        }
        Ok(())
    }

    pub fn read_csv(reader: impl BufRead, path: &Path) -> Result<Metrics> {
        let schema = |line: usize, msg: String| Error::Schema { path: path.to_path_buf(), line, msg };
        let mut lines = reader.lines().enumerate();
        match lines.next() {
            Some((_, Ok(h))) if h.trim_end() == CSV_HEADER => {}
            Some((_, Err(e))) => return Err(Error::io(path, e)),
            _ => return Err(schema(1, "missing or unexpected metrics header".into())),
        }
        let mut m = Metrics::new();
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let r = Record::parse(line.trim_end()).map_err(|msg| schema(i + 1, msg))?;
            if m.records.last().is_some_and(|last| last.iteration >= r.iteration) {
                return Err(schema(i + 1, "iterations must strictly increase".into()));
            }
            m.records.push(r);
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(i: u64, test: bool) -> Record {
        Record {
            iteration: i,
            phase: Phase::Connection,
            lambda1: 0.1 * i as f64,
            lambda2: 0.0,
            nu1: 0.3,
            nu2: 0.0,
            train: SplitStats { f: 1.25, conn: 0.5, disc: 2.0 / 3.0 },
            test: test.then_some(SplitStats { f: 1.5, conn: 0.0, disc: 1e-9 }),
        }
    }

    #[test]
    fn csv_round_trip() {
        let mut m = Metrics::new();
        m.push(rec(0, true));
        m.push(rec(1, false));
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = Metrics::read_csv(&buf[..], Path::new("m.csv")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn malformed_rows_are_schema_errors() {
        let text = format!("{CSV_HEADER}\n0,connection,1,2\n");
        assert!(matches!(
            Metrics::read_csv(text.as_bytes(), Path::new("m.csv")),
            Err(Error::Schema { line: 2, .. })
        ));
        assert!(Metrics::read_csv("a,b\n".as_bytes(), Path::new("m.csv")).is_err());
    }

    #[test]
    #[should_panic(expected = "strictly increase")]
    fn iterations_must_increase() {
        let mut m = Metrics::new();
        m.push(rec(3, false));
        m.push(rec(3, false));
    }
}
