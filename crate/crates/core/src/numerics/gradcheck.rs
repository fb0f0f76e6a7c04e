use super::{ParamId, ParamStore, Tensor};

/// Central-difference estimate of `∂f/∂param`, one coordinate at a time.
/// The store is restored to its original values before returning.
pub fn finite_diff_gradient<F>(store: &mut ParamStore, id: ParamId, h: f64, mut f: F) -> Tensor
where
    F: FnMut(&ParamStore) -> f64,
{
    let shape = store.value(id).shape().to_vec();
    let mut out = Tensor::zeros(&shape);
    for k in 0..out.len() {
        let orig = store.value(id).data()[k];
        store.get_mut(id).value.data_mut()[k] = orig + h;
        let up = f(store);
        store.get_mut(id).value.data_mut()[k] = orig - h;
        let down = f(store);
        store.get_mut(id).value.data_mut()[k] = orig;
        out.data_mut()[k] = (up - down) / (2.0 * h);
    }
    out
}

/// `|a − b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Derivative of a scalar function at `x` by Ridders' polynomial
/// extrapolation of central differences with shrinking steps, starting at
/// step `h`. Returns the estimate and its error estimate.
pub fn ridders_derivative<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> (f64, f64) {
    const SHRINK: f64 = 1.4;
    const SHRINK2: f64 = SHRINK * SHRINK;
    const N: usize = 10;
    let mut table = [[0.0f64; N]; N];
    let mut hh = h;
    table[0][0] = (f(x + hh) - f(x - hh)) / (2.0 * hh);
    let mut best = table[0][0];
    let mut err = f64::INFINITY;
    for i in 1..N {
        hh /= SHRINK;
        table[0][i] = (f(x + hh) - f(x - hh)) / (2.0 * hh);
        let mut fac = SHRINK2;
        for j in 1..=i {
            table[j][i] = (table[j - 1][i] * fac - table[j - 1][i - 1]) / (fac - 1.0);
            fac *= SHRINK2;
            let e = (table[j][i] - table[j - 1][i])
                .abs()
                .max((table[j][i] - table[j - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = table[j][i];
            }
        }
        if (table[i][i] - table[i - 1][i - 1]).abs() >= 2.0 * err {
            break;
        }
    }
    (best, err)
}
