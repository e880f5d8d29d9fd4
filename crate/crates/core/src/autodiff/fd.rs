//! Central finite differences, used as an independent gradient oracle.

use super::{Matrix, ParamStore};

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate of `at`.
pub fn central_difference(f: impl Fn(&Matrix) -> f64, at: &Matrix, h: f64) -> Matrix {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut probe = at.clone();
    let mut out = Matrix::zeros(at.rows(), at.cols());
    for i in 0..at.len() {
        let x = at.data()[i];
        probe.data_mut()[i] = x + h;
        let up = f(&probe);
        probe.data_mut()[i] = x - h;
        let down = f(&probe);
        probe.data_mut()[i] = x;
        out.data_mut()[i] = (up - down) / (2.0 * h);
    }
    out
}

/// Central-difference gradient of `f` with respect to every parameter.
pub fn finite_difference_gradient(
    f: impl Fn(&ParamStore) -> f64,
    params: &ParamStore,
    h: f64,
) -> ParamStore {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut probe = params.clone();
    let mut out = params.zeros_like();
    for p in 0..params.len() {
        for i in 0..params.matrix(p).len() {
            let x = params.matrix(p).data()[i];
            probe.matrix_mut(p).data_mut()[i] = x + h;
            let up = f(&probe);
            probe.matrix_mut(p).data_mut()[i] = x - h;
            let down = f(&probe);
            probe.matrix_mut(p).data_mut()[i] = x;
            out.matrix_mut(p).data_mut()[i] = (up - down) / (2.0 * h);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let d = central_difference(|m| m.data()[0].powi(2), &Matrix::scalar(3.0), 1e-5);
        assert!((d.data()[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn relu_at_one() {
        let d = central_difference(|m| m.data()[0].max(0.0), &Matrix::scalar(1.0), 1e-5);
        assert!((d.data()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn param_store_gradient() {
        let mut p = ParamStore::new();
        p.insert("a", Matrix::from_rows(&[&[1.0, 2.0]]));
        p.insert("b", Matrix::scalar(-0.5));
        let g = finite_difference_gradient(
            |s| {
                let a = s.get("a").unwrap().data();
                let b = s.get("b").unwrap().data()[0];
                a[0] * a[1] + b * b * a[0]
            },
            &p,
            1e-5,
        );
        let ga = g.get("a").unwrap().data();
        assert!((ga[0] - (2.0 + 0.25)).abs() < 1e-8);
        assert!((ga[1] - 1.0).abs() < 1e-8);
        assert!((g.get("b").unwrap().data()[0] - (-1.0)).abs() < 1e-8);
    }
}
