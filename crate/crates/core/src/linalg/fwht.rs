//! Fast Walsh–Hadamard transform (Sylvester ordering).

use crate::error::{Error, Result};

/// Unnormalized in-place butterfly: on return `buf = H_raw buf`, where
/// `H_raw` has ±1 entries.
pub fn fwht_in_place(buf: &mut [f64]) -> Result<()> {
    let n = buf.len();
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let mut h = 1;
    while h < n {
        for block in buf.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    Ok(())
}

/// Orthonormal transform `Hv` with entries ±1/√n. Involutive.
pub fn fwht_normalized(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    fwht_in_place(&mut out)?;
    let scale = 1.0 / (v.len() as f64).sqrt();
    out.iter_mut().for_each(|x| *x *= scale);
    Ok(out)
}

/// Unnormalized transform applied down the columns of a row-major block of
/// `data.len() / width` rows. Butterflies operate on whole rows, so each pass
/// streams contiguous memory.
pub(crate) fn fwht_rows_in_place(data: &mut [f64], width: usize) -> Result<()> {
    if width == 0 {
        return Ok(());
    }
    let n = data.len() / width;
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let mut h = 1;
    while h < n {
        for block in data.chunks_exact_mut(2 * h * width) {
            let (lo, hi) = block.split_at_mut(h * width);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_hadamard(v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let s = 1.0 / (n as f64).sqrt();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let sign = if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                        sign * s * v[j]
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn small_cases() {
        assert_eq!(fwht_normalized(&[3.0]).unwrap(), vec![3.0]);
        let h2 = fwht_normalized(&[1.0, 0.0]).unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert!((h2[0] - r).abs() < 1e-15 && (h2[1] - r).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_dyadic() {
        assert_eq!(fwht_normalized(&[1.0; 6]), Err(Error::NotPowerOfTwo(6)));
    }

    #[test]
    fn row_transform_matches_per_column() {
        let width = 3;
        let n = 8;
        let data: Vec<f64> = (0..n * width).map(|k| (k as f64 * 0.37).sin()).collect();
        let mut rows = data.clone();
        fwht_rows_in_place(&mut rows, width).unwrap();
        for j in 0..width {
            let mut col: Vec<f64> = (0..n).map(|i| data[i * width + j]).collect();
            fwht_in_place(&mut col).unwrap();
            for i in 0..n {
                assert!((col[i] - rows[i * width + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matches_naive_oracle_at_256() {
        let v: Vec<f64> = (0..256).map(|k| ((k * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let fast = fwht_normalized(&v).unwrap();
        let slow = naive_hadamard(&v);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    proptest::proptest! {
        #[test]
        fn normalized_transform_is_an_involution(v in proptest::collection::vec(-10.0f64..10.0, 1..=64usize)) {
            let n = v.len().next_power_of_two();
            let mut padded = v.clone();
            padded.resize(n, 0.0);
            let twice = fwht_normalized(&fwht_normalized(&padded).unwrap()).unwrap();
            let once = fwht_normalized(&padded).unwrap();
            let en: f64 = padded.iter().map(|x| x * x).sum();
            let eo: f64 = once.iter().map(|x| x * x).sum();
            proptest::prop_assert!((en - eo).abs() <= 1e-10 * en.max(1.0));
            for (a, b) in twice.iter().zip(&padded) {
                proptest::prop_assert!((a - b).abs() <= 1e-10);
            }
        }
    }
}
