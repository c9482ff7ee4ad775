//! Latin hypercube designs with maximin improvement.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::CoreError;
use crate::space::{ParameterSpace, Point};
use crate::Result;

use super::{Design, GeneratorKind};

/// A plain (unoptimized) Latin hypercube: each 1-D projection places exactly
/// one point in each of the `n` equal-width strata.
pub fn plain_lhs(space: &ParameterSpace, n: usize, seed: u64) -> Result<Design> {
    if n < 2 {
        return Err(CoreError::InvalidArgument("LHS needs n >= 2".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let unit = draw_lhs_unit(space.dimension(), n, &mut rng);
    Ok(Design {
        points: to_points(space, &unit),
        generator: GeneratorKind::MaximinLhs,
        seed,
        acceptance_rate: None,
    })
}

/// Best Latin hypercube among `restarts` random draws, each improved by
/// pairwise row-swap hill climbing on the minimum pairwise Euclidean
/// distance in `[-1, 1]`-mapped coordinates. Swapping one coordinate column
/// between two rows preserves the stratification exactly, so the invariant
/// survives optimization.
///
/// The first restart starts from the same hypercube that [`plain_lhs`] with
/// this seed produces, so the returned design never has a smaller minimum
/// distance than the plain one.
pub fn maximin_lhs(space: &ParameterSpace, n: usize, seed: u64, restarts: usize) -> Result<Design> {
    if n < 2 {
        return Err(CoreError::InvalidArgument("LHS needs n >= 2".into()));
    }
    if restarts == 0 {
        return Err(CoreError::InvalidArgument("restarts must be >= 1".into()));
    }
    let k = space.dimension();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    let proposals = 40 * n.max(25);
    for _ in 0..restarts {
        let mut unit = draw_lhs_unit(k, n, &mut rng);
        let score = hill_climb(&mut unit, proposals, &mut rng);
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, unit));
        }
    }
    let (_, unit) = best.expect("restarts >= 1");
    Ok(Design {
        points: to_points(space, &unit),
        generator: GeneratorKind::MaximinLhs,
        seed,
        acceptance_rate: None,
    })
}

/// `n x k` matrix of stratified uniforms in `[0, 1)`.
fn draw_lhs_unit<R: Rng>(k: usize, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut unit = vec![vec![0.0; k]; n];
    for j in 0..k {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (i, row) in unit.iter_mut().enumerate() {
            row[j] = (strata[i] as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    unit
}

fn to_points(space: &ParameterSpace, unit: &[Vec<f64>]) -> Vec<Point> {
    unit.iter()
        .map(|row| {
            Point::new(
                space
                    .params()
                    .iter()
                    .zip(row)
                    .map(|(p, &u)| p.lower + u * (p.upper - p.lower))
                    .collect(),
            )
        })
        .collect()
}

/// Squared distance in `[-1, 1]` coordinates; `[0,1)` maps there by `2u - 1`,
/// so distances just pick up a factor of 2 per axis.
fn d2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = 2.0 * (x - y);
            d * d
        })
        .sum()
}

/// Random pairwise column swaps, accepted when they strictly increase the
/// minimum pairwise distance. Returns the final minimum squared distance.
fn hill_climb<R: Rng>(unit: &mut [Vec<f64>], proposals: usize, rng: &mut R) -> f64 {
    let n = unit.len();
    let k = unit[0].len();
    let mut dist = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = d2(&unit[i], &unit[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let (mut min_d, mut min_pair) = matrix_min(&dist);

    for _ in 0..proposals {
        let i1 = rng.random_range(0..n);
        let i2 = rng.random_range(0..n);
        if i1 == i2 {
            continue;
        }
        let j = rng.random_range(0..k);
        // A swap can only raise the global minimum if the current minimal
        // pair is touched by it.
        if min_pair.0 != i1 && min_pair.0 != i2 && min_pair.1 != i1 && min_pair.1 != i2 {
            continue;
        }
        let a = unit[i1][j];
        let b = unit[i2][j];
        if a == b {
            continue;
        }
        // New distances for the two touched rows.
        let mut row1 = vec![0.0; n];
        let mut row2 = vec![0.0; n];
        let mut touched_min = f64::INFINITY;
        for m in 0..n {
            if m == i1 || m == i2 {
                continue;
            }
            let c = unit[m][j];
            let new1 = dist[i1][m] - sq(2.0 * (a - c)) + sq(2.0 * (b - c));
            let new2 = dist[i2][m] - sq(2.0 * (b - c)) + sq(2.0 * (a - c));
            row1[m] = new1;
            row2[m] = new2;
            touched_min = touched_min.min(new1).min(new2);
        }
        let d12 = dist[i1][i2]; // unchanged by swapping the same column
        touched_min = touched_min.min(d12);

        // Minimum over pairs not involving the touched rows.
        let mut rest_min = f64::INFINITY;
        let mut rest_pair = (0, 0);
        for i in 0..n {
            if i == i1 || i == i2 {
                continue;
            }
            for j2 in (i + 1)..n {
                if j2 == i1 || j2 == i2 {
                    continue;
                }
                if dist[i][j2] < rest_min {
                    rest_min = dist[i][j2];
                    rest_pair = (i, j2);
                }
            }
        }
        let new_min = touched_min.min(rest_min);
        if new_min > min_d {
            unit[i1][j] = b;
            unit[i2][j] = a;
            for m in 0..n {
                if m == i1 || m == i2 {
                    continue;
                }
                dist[i1][m] = row1[m];
                dist[m][i1] = row1[m];
                dist[i2][m] = row2[m];
                dist[m][i2] = row2[m];
            }
            min_d = new_min;
            min_pair = if touched_min <= rest_min {
                argmin_touched(&dist, i1, i2, d12, touched_min)
            } else {
                rest_pair
            };
        }
    }
    min_d
}

fn sq(x: f64) -> f64 {
    x * x
}

fn matrix_min(dist: &[Vec<f64>]) -> (f64, (usize, usize)) {
    let n = dist.len();
    let mut best = (f64::INFINITY, (0, 1));
    for i in 0..n {
        for j in (i + 1)..n {
            if dist[i][j] < best.0 {
                best = (dist[i][j], (i, j));
            }
        }
    }
    best
}

fn argmin_touched(
    dist: &[Vec<f64>],
    i1: usize,
    i2: usize,
    d12: f64,
    target: f64,
) -> (usize, usize) {
    if d12 == target {
        return (i1.min(i2), i1.max(i2));
    }
    let n = dist.len();
    for m in 0..n {
        if m != i1 && dist[i1][m] == target {
            return (i1.min(m), i1.max(m));
        }
        if m != i2 && dist[i2][m] == target {
            return (i2.min(m), i2.max(m));
        }
    }
    (i1.min(i2), i1.max(i2))
}

/// Checks the LHS stratification invariant: in every 1-D projection, each of
/// the `n` equal-width strata contains exactly one point.
pub fn is_latin(space: &ParameterSpace, points: &[Point]) -> bool {
    let n = points.len();
    for (j, p) in space.params().iter().enumerate() {
        let mut seen = vec![false; n];
        for pt in points {
            let u = (pt.coords()[j] - p.lower) / (p.upper - p.lower);
            let s = ((u * n as f64).floor() as usize).min(n - 1);
            if seen[s] {
                return false;
            }
            seen[s] = true;
        }
        if seen.iter().any(|s| !s) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn min_dist(space: &ParameterSpace, points: &[Point]) -> f64 {
        let unit: Vec<Vec<f64>> = points
            .iter()
            .map(|p| space.map_to_unit(p).unwrap())
            .collect();
        let mut best = f64::INFINITY;
        for i in 0..unit.len() {
            for j in (i + 1)..unit.len() {
                let d: f64 = unit[i]
                    .iter()
                    .zip(&unit[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                best = best.min(d.sqrt());
            }
        }
        best
    }

    #[test]
    fn n2_in_1d_forces_stratification() {
        let s = ParameterSpace::from_bounds(&[("x", 0.0, 1.0)]).unwrap();
        for seed in 0..20 {
            let d = maximin_lhs(&s, 2, seed, 2).unwrap();
            let mut xs: Vec<f64> = d.points.iter().map(|p| p.coords()[0]).collect();
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert!(xs[0] < 0.5 && xs[1] >= 0.5, "{xs:?}");
        }
    }

    #[test]
    fn maximin_beats_plain_over_20_seeds() {
        let s = ParameterSpace::from_bounds(&[("x", 0.0, 1.0), ("y", 0.0, 1.0)]).unwrap();
        for seed in 0..20 {
            let plain = plain_lhs(&s, 10, seed).unwrap();
            let opt = maximin_lhs(&s, 10, seed, 5).unwrap();
            assert!(is_latin(&s, &opt.points), "seed {seed}: not latin");
            assert!(
                min_dist(&s, &opt.points) >= min_dist(&s, &plain.points) - 1e-12,
                "seed {seed}"
            );
        }
    }

    #[test]
    fn large_design_keeps_all_projections_stratified() {
        // 500 points, 24 dimensions
        let bounds: Vec<(String, f64, f64)> = (0..24)
            .map(|i| (format!("p{i}"), -1.0 + i as f64, 1.0 + i as f64))
            .collect();
        let refs: Vec<(&str, f64, f64)> = bounds
            .iter()
            .map(|(n, a, b)| (n.as_str(), *a, *b))
            .collect();
        let s = ParameterSpace::from_bounds(&refs).unwrap();
        let d = maximin_lhs(&s, 500, 11, 1).unwrap();
        assert_eq!(d.points.len(), 500);
        assert!(is_latin(&s, &d.points));
    }

    #[test]
    fn rejects_tiny_n() {
        let s = ParameterSpace::from_bounds(&[("x", 0.0, 1.0)]).unwrap();
        assert!(maximin_lhs(&s, 1, 0, 3).is_err());
    }
}
