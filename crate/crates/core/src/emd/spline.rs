//! Natural cubic spline through scattered knots, evaluated on the integer grid.

/// Evaluates the natural cubic spline through `(xs[k], ys[k])` at `0, 1, .., len - 1`.
///
/// `xs` must be strictly increasing with at least two knots. Two knots give the
/// straight line through them. Points outside the knot span use the nearest
/// end polynomial.
pub(crate) fn natural_cubic_on_grid(xs: &[f64], ys: &[f64], len: usize) -> Vec<f64> {
    assert!(xs.len() >= 2 && xs.len() == ys.len());
    debug_assert!(xs.windows(2).all(|w| w[0] < w[1]));

    let m = second_derivatives(xs, ys);
    let last = xs.len() - 2;
    let mut seg = 0;
    (0..len)
        .map(|i| {
            let t = i as f64;
            while seg < last && t > xs[seg + 1] {
                seg += 1;
            }
            let h = xs[seg + 1] - xs[seg];
            let a = (xs[seg + 1] - t) / h;
            let b = (t - xs[seg]) / h;
            a * ys[seg]
                + b * ys[seg + 1]
                + ((a * a * a - a) * m[seg] + (b * b * b - b) * m[seg + 1]) * h * h / 6.0
        })
        .collect()
}

/// Second derivatives at the knots, zero at both ends (tridiagonal Thomas solve).
fn second_derivatives(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let inner = n - 2;
    let mut diag = vec![0.0; inner];
    let mut upper = vec![0.0; inner];
    let mut rhs = vec![0.0; inner];
    for k in 0..inner {
        let h0 = xs[k + 1] - xs[k];
        let h1 = xs[k + 2] - xs[k + 1];
        diag[k] = 2.0 * (h0 + h1);
        upper[k] = h1;
        rhs[k] = 6.0 * ((ys[k + 2] - ys[k + 1]) / h1 - (ys[k + 1] - ys[k]) / h0);
    }
    // forward sweep; the sub-diagonal entry of row k is h0 of that row
    for k in 1..inner {
        let sub = xs[k + 1] - xs[k];
        let w = sub / diag[k - 1];
        diag[k] -= w * upper[k - 1];
        rhs[k] -= w * rhs[k - 1];
    }
    m[inner] = rhs[inner - 1] / diag[inner - 1];
    for k in (0..inner - 1).rev() {
        m[k + 1] = (rhs[k] - upper[k] * m[k + 2]) / diag[k];
    }
    m
}
