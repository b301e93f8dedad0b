//! Low-discrepancy sequences on the unit square.

const BITS: u32 = 32;

/// Sobol direction numbers `m_k` for the second dimension (primitive
/// polynomial `x + 1`): `m_k = 2 m_{k−1} ⊕ m_{k−1}`, `m_1 = 1`.
fn direction_numbers() -> [[u32; BITS as usize]; 2] {
    let mut v = [[0u32; BITS as usize]; 2];
    let mut m: u32 = 1;
    for k in 0..BITS as usize {
        // First dimension: m_k = 1 for all k (van der Corput).
        v[0][k] = 1 << (BITS as usize - 1 - k);
        if k > 0 {
            m = (m << 1) ^ m;
        }
        v[1][k] = m << (BITS as usize - 1 - k);
    }
    v
}

/// Sobol point `i` in Gray-code order: `x_i = ⊕_{j : bit j of gray(i)} v_j`.
/// Point 0 is the origin.
pub fn sobol_point(i: u64) -> [f64; 2] {
    assert!(i < 1 << BITS, "Sobol index {i} exceeds 2^{BITS}");
    let v = direction_numbers();
    let gray = i ^ (i >> 1);
    let mut x = [0u32; 2];
    for j in 0..BITS as usize {
        if gray >> j & 1 == 1 {
            x[0] ^= v[0][j];
            x[1] ^= v[1][j];
        }
    }
    let scale = (1u64 << BITS) as f64;
    [x[0] as f64 / scale, x[1] as f64 / scale]
}

/// Radical inverse of `i` in `base`, computed from the reversed digits as
/// an integer ratio so the first few million points are exact.
pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut numer = 0u64;
    let mut denom = 1u64;
    while i > 0 {
        numer = numer * base + i % base;
        denom *= base;
        i /= base;
    }
    numer as f64 / denom as f64
}

/// Halton point `i` with bases (2, 3). Point 0 is the origin.
pub fn halton_point(i: u64) -> [f64; 2] {
    [radical_inverse(i, 2), radical_inverse(i, 3)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_points() {
        let xs: Vec<f64> = (1..4).map(|i| sobol_point(i)[0]).collect();
        assert_eq!(xs, vec![0.5, 0.75, 0.25]);
        let ys: Vec<f64> = (1..5).map(|i| sobol_point(i)[1]).collect();
        assert_eq!(ys, vec![0.5, 0.25, 0.75, 0.375]);
        let hx: Vec<f64> = (1..5).map(|i| halton_point(i)[0]).collect();
        assert_eq!(hx, vec![0.5, 0.25, 0.75, 0.125]);
        let hy: Vec<f64> = (1..4).map(|i| halton_point(i)[1]).collect();
        assert_eq!(hy, vec![1.0 / 3.0, 2.0 / 3.0, 1.0 / 9.0]);
    }

    #[test]
    fn sobol_blocks_are_stratified() {
        // Every dyadic block of 2^m consecutive points puts one point in each
        // 1/2^m interval of each coordinate.
        for m in 1..8u32 {
            let n = 1u64 << m;
            for d in 0..2 {
                let mut seen = vec![false; n as usize];
                for i in 0..n {
                    seen[(sobol_point(i)[d] * n as f64) as usize] = true;
                }
                assert!(seen.iter().all(|s| *s), "m={m} d={d}");
            }
        }
    }

    #[test]
    fn points_stay_in_open_square() {
        for i in 1..5000 {
            for p in [sobol_point(i), halton_point(i)] {
                assert!(p.iter().all(|c| *c > 0.0 && *c < 1.0), "{i}: {p:?}");
            }
        }
    }
}
