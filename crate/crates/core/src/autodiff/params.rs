use std::io::{BufRead, Write};

use rand::Rng;

use super::{Gradients, Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::textio::LineReader;

/// Named trainable matrices, kept sorted by name so iteration order (and
/// therefore every reduction over parameters) is stable across runs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<(String, Matrix)>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces `name`.
    pub fn insert(&mut self, name: impl Into<String>, value: Matrix) {
        let name = name.into();
        match self.position(&name) {
            Ok(i) => self.entries[i].1 = value,
            Err(i) => self.entries.insert(i, (name, value)),
        }
    }

    fn position(&self, name: &str) -> std::result::Result<usize, usize> {
        self.entries.binary_search_by(|(n, _)| n.as_str().cmp(name))
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.position(name).ok().map(|i| &self.entries[i].1)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.position(name).ok()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.entries[i].0
    }

    pub fn matrix(&self, i: usize) -> &Matrix {
        &self.entries[i].1
    }

    pub fn matrix_mut(&mut self, i: usize) -> &mut Matrix {
        &mut self.entries[i].1
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.entries.iter().map(|(n, m)| (n.as_str(), m))
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, m)| m.len()).sum()
    }

    pub fn zeros_like(&self) -> ParamStore {
        ParamStore {
            entries: self
                .entries
                .iter()
                .map(|(n, m)| (n.clone(), Matrix::zeros(m.rows(), m.cols())))
                .collect(),
        }
    }

    pub fn same_layout(&self, other: &ParamStore) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((a, x), (b, y))| a == b && x.shape() == y.shape())
    }

    /// `self += scale * other`; layouts must match.
    pub fn add_scaled(&mut self, other: &ParamStore, scale: f64) {
        debug_assert!(self.same_layout(other));
        for ((_, a), (_, b)) in self.entries.iter_mut().zip(&other.entries) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += scale * y;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, (_, x)| m.max(x.max_abs()))
    }

    /// Pushes every parameter onto `tape` as a differentiable leaf.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        BoundParams {
            vars: self.entries.iter().map(|(_, m)| tape.var(m.clone())).collect(),
        }
    }

    /// Collects the gradient of each bound parameter; parameters the root
    /// does not reach get zeros.
    pub fn gradients(&self, bound: &BoundParams, grads: &Gradients) -> ParamStore {
        ParamStore {
            entries: self
                .entries
                .iter()
                .zip(&bound.vars)
                .map(|((n, m), &v)| (n.clone(), grads.get_or_zeros(v, m.shape())))
                .collect(),
        }
    }

    /// Writes `tensor <name> <rows> <cols>` blocks, one line per row. Values
    /// use the shortest representation that round-trips exactly.
    pub fn write_tensors(&self, w: &mut impl Write) -> std::io::Result<()> {
        for (name, m) in &self.entries {
            writeln!(w, "tensor {name} {} {}", m.rows(), m.cols())?;
            for r in 0..m.rows() {
                let line: Vec<String> = m.row(r).iter().map(|v| format!("{v:?}")).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
        }
        Ok(())
    }

    /// Reads `count` tensor blocks written by [`ParamStore::write_tensors`].
    pub fn read_tensors<R: BufRead>(lines: &mut LineReader<R>, count: usize) -> Result<ParamStore> {
        let mut store = ParamStore::new();
        for _ in 0..count {
            let header = lines.expect_line()?;
            let parts: Vec<&str> = header.split_whitespace().collect();
            let [tag, name, rows, cols] = parts[..] else {
                return Err(lines.schema(format!("expected tensor header, got {header:?}")));
            };
            if tag != "tensor" {
                return Err(lines.schema(format!("expected tensor header, got {header:?}")));
            }
            let rows: usize = lines.parse(rows)?;
            let cols: usize = lines.parse(cols)?;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let row = lines.expect_line()?;
                let before = data.len();
                for tok in row.split_whitespace() {
                    data.push(lines.parse::<f64>(tok)?);
                }
                if data.len() - before != cols {
                    return Err(lines.schema(format!("tensor {name}: expected {cols} values per row")));
                }
            }
            store.insert(name, Matrix::from_vec(rows, cols, data)?);
        }
        Ok(store)
    }
}

/// Tape handles of a bound [`ParamStore`], in store order.
#[derive(Clone, Debug)]
pub struct BoundParams {
    vars: Vec<Var>,
}

impl BoundParams {
    pub fn var(&self, i: usize) -> Var {
        self.vars[i]
    }
}

/// Glorot-uniform weights: U[-a, a] with `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-a..=a))
}

pub(crate) fn check_finite(store: &ParamStore, what: &str) -> Result<()> {
    for (name, m) in store.iter() {
        if !m.is_finite() {
            return Err(Error::NonFinite { context: format!("{what} {name}") });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn iteration_is_sorted_by_name() {
        let mut p = ParamStore::new();
        p.insert("zeta", Matrix::zeros(1, 1));
        p.insert("alpha", Matrix::zeros(2, 1));
        p.insert("mid", Matrix::zeros(1, 3));
        let names: Vec<&str> = p.iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["alpha", "mid", "zeta"]);
        assert_eq!(p.scalar_count(), 6);
    }

    #[test]
    fn glorot_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = glorot_uniform(16, 8, &mut rng);
        let a = (6.0f64 / 24.0).sqrt();
        assert!(m.data().iter().all(|v| v.abs() <= a));
        assert!(m.max_abs() > 0.5 * a);
    }

    #[test]
    fn tensors_round_trip_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = ParamStore::new();
        p.insert("w", glorot_uniform(3, 4, &mut rng));
        p.insert("b", Matrix::from_rows(&[&[1e-300], &[-0.1], &[f64::MIN_POSITIVE]]));
        let mut buf = Vec::new();
        p.write_tensors(&mut buf).unwrap();
        let mut lines = LineReader::new(&buf[..], "mem");
        let q = ParamStore::read_tensors(&mut lines, 2).unwrap();
        assert_eq!(p, q);
    }
}
