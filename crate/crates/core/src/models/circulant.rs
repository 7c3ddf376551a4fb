//! Circular convolution with zero-based shifts; `e_1` is the identity of `⊛`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
// Inherent on f64 whenever std is linked into the build graph.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{check_dim, Error, Result};

/// `(a ⊛ x)_i = sum_k a_k x_{(i - k) mod n}`, by direct summation.
pub fn circ_conv(a: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(a.len(), x.len())?;
    let n = a.len();
    Ok(DVector::from_fn(n, |i, _| {
        let mut acc = 0.0;
        for k in 0..n {
            acc += a[k] * x[(i + n - k) % n];
        }
        acc
    }))
}

/// `C_v` with column j equal to `v` shifted down by j, so `C_v x = v ⊛ x`.
pub fn circulant_matrix(v: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = v.len();
    if n == 0 {
        return Err(Error::invalid("circulant generator must be non-empty"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| v[(i + n - j) % n]))
}

/// Magnitudes of the DFT of `v`, computed directly (O(n^2)).
pub fn dft_magnitudes(v: &DVector<f64>) -> Vec<f64> {
    let n = v.len();
    let step = 2.0 * core::f64::consts::PI / n as f64;
    (0..n)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &x) in v.iter().enumerate() {
                let angle = step * ((k * t) % n) as f64;
                re += x * angle.cos();
                im -= x * angle.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}
