//! Sobol low-discrepancy sequences.
//!
//! Gray-code construction with the classic Joe–Kuo direction numbers for the
//! first [`sobol_max_dimension`] dimensions. The sequence itself is
//! deterministic; the seed is recorded in the design for provenance only.

use crate::error::CoreError;
use crate::space::{ParameterSpace, Point};
use crate::Result;

use super::{Design, GeneratorKind};

const BITS: u32 = 32;

/// (s, a, m) rows for dimensions 2.. of the sequence; dimension 1 is the
/// van der Corput sequence in base 2.
const JOE_KUO: &[(u32, u32, &[u32])] = &[
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 3, 25, 1]),
    (6, 25, &[1, 1, 7, 9, 7, 49]),
    (7, 1, &[1, 3, 3, 9, 9, 33, 19]),
    (7, 4, &[1, 1, 3, 13, 11, 27, 15]),
];

/// Largest supported dimension.
pub fn sobol_max_dimension() -> usize {
    JOE_KUO.len() + 1
}

fn direction_numbers(dim: usize) -> Vec<u32> {
    let mut v = vec![0u32; BITS as usize];
    if dim == 0 {
        for (b, slot) in v.iter_mut().enumerate() {
            *slot = 1 << (BITS - 1 - b as u32);
        }
        return v;
    }
    let (s, a, m) = JOE_KUO[dim - 1];
    let s = s as usize;
    for b in 0..BITS as usize {
        if b < s {
            v[b] = m[b] << (BITS - 1 - b as u32);
        } else {
            let mut val = v[b - s] ^ (v[b - s] >> s);
            for t in 1..s {
                if (a >> (s - 1 - t)) & 1 == 1 {
                    val ^= v[b - t];
                }
            }
            v[b] = val;
        }
    }
    v
}

/// First `n` Sobol points mapped onto the box (the sequence starts at the
/// origin point). Errors when the space has more than
/// [`sobol_max_dimension`] dimensions.
pub fn sobol_design(space: &ParameterSpace, n: usize, seed: u64) -> Result<Design> {
    if n == 0 {
        return Err(CoreError::InvalidArgument("sobol needs n >= 1".into()));
    }
    let k = space.dimension();
    if k > sobol_max_dimension() {
        return Err(CoreError::InvalidArgument(format!(
            "sobol supports up to {} dimensions, space has {k}",
            sobol_max_dimension()
        )));
    }
    let dirs: Vec<Vec<u32>> = (0..k).map(direction_numbers).collect();
    let mut state = vec![0u32; k];
    let scale = 1.0 / (1u64 << BITS) as f64;
    let mut points = Vec::with_capacity(n);
    for i in 0..n as u64 {
        points.push(Point::new(
            space
                .params()
                .iter()
                .zip(&state)
                .map(|(p, &x)| p.lower + x as f64 * scale * (p.upper - p.lower))
                .collect(),
        ));
        let bit = (i + 1).trailing_zeros() as usize;
        for (x, dir) in state.iter_mut().zip(&dirs) {
            *x ^= dir[bit];
        }
    }
    Ok(Design {
        points,
        generator: GeneratorKind::Sobol,
        seed,
        acceptance_rate: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(k: usize) -> ParameterSpace {
        let bounds: Vec<(String, f64, f64)> =
            (0..k).map(|i| (format!("x{i}"), 0.0, 1.0)).collect();
        let refs: Vec<(&str, f64, f64)> = bounds
            .iter()
            .map(|(n, a, b)| (n.as_str(), *a, *b))
            .collect();
        ParameterSpace::from_bounds(&refs).unwrap()
    }

    #[test]
    fn first_points_match_classic_sequence() {
        let d = sobol_design(&cube(2), 4, 0).unwrap();
        let got: Vec<Vec<f64>> = d.points.iter().map(|p| p.coords().to_vec()).collect();
        assert_eq!(got[0], vec![0.0, 0.0]);
        assert_eq!(got[1], vec![0.5, 0.5]);
        assert_eq!(got[2], vec![0.75, 0.25]);
        assert_eq!(got[3], vec![0.25, 0.75]);
    }

    #[test]
    fn every_projection_balances_dyadic_strata() {
        // The first 2^m points put exactly one point in each of the 2^m
        // equal strata of every 1-D projection.
        let k = sobol_max_dimension();
        let n = 128usize;
        let d = sobol_design(&cube(k), n, 0).unwrap();
        for j in 0..k {
            let mut seen = vec![false; n];
            for p in &d.points {
                let s = ((p.coords()[j] * n as f64).floor() as usize).min(n - 1);
                assert!(!seen[s], "dim {j}: stratum {s} hit twice");
                seen[s] = true;
            }
        }
    }

    #[test]
    fn adjacent_pairs_spread_over_boxes() {
        // 4x4 box counts for n = 256 should be near-uniform (16 per box).
        let k = 10usize.min(sobol_max_dimension());
        let n = 256usize;
        let d = sobol_design(&cube(k), n, 0).unwrap();
        for j in 0..k - 1 {
            let mut counts = [[0usize; 4]; 4];
            for p in &d.points {
                let a = ((p.coords()[j] * 4.0).floor() as usize).min(3);
                let b = ((p.coords()[j + 1] * 4.0).floor() as usize).min(3);
                counts[a][b] += 1;
            }
            for (a, row) in counts.iter().enumerate() {
                for (b, &c) in row.iter().enumerate() {
                    assert!(
                        (8..=24).contains(&c),
                        "dims ({j},{}): box ({a},{b}) holds {c} of {n}",
                        j + 1
                    );
                }
            }
        }
    }

    #[test]
    fn dimension_cap_is_enforced() {
        let err = sobol_design(&cube(sobol_max_dimension() + 1), 8, 0);
        assert!(err.is_err());
    }
}
