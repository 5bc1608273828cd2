use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::spatial::KdTree;

/// d(X, Y): mean squared distance from each X keypoint to its nearest Y
/// keypoint, meters².
pub fn matching_rate(x: &[Point], y: &[Point]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(matching_rate_tree(x, &KdTree::new(y)))
}

/// [`matching_rate`] against a prebuilt tree over Y. X must be non-empty.
pub fn matching_rate_tree(x: &[Point], y: &KdTree) -> f64 {
    x.iter().map(|p| y.nearest(*p).map_or(0.0, |n| n.1)).sum::<f64>() / x.len() as f64
}

/// O = exp(-sqrt(d(c,m) + d(m,c)) / Diag(c)).
pub fn objectness_from_rates(d_cm: f64, d_mc: f64, diag_c: f64) -> Result<f64> {
    if !(diag_c > 0.0) {
        return Err(Error::DegenerateComponent);
    }
    Ok((-(d_cm + d_mc).sqrt() / diag_c).exp())
}

/// Objectness of query keypoints `c` (cloud diagonal `diag_c`) against
/// model keypoints `m` already placed in the query frame.
pub fn objectness(c: &[Point], diag_c: f64, m: &[Point]) -> Result<f64> {
    let d_cm = matching_rate(c, m)?;
    let d_mc = matching_rate(m, c)?;
    objectness_from_rates(d_cm, d_mc, diag_c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matching_rate_examples() {
        let o = Point::ZERO;
        assert_eq!(matching_rate(&[o], &[o]).unwrap(), 0.0);
        assert_eq!(matching_rate(&[o], &[Point::X]).unwrap(), 1.0);
        assert_eq!(matching_rate(&[o, Point::new(2.0, 0.0, 0.0)], &[o]).unwrap(), 2.0);
        assert!(matching_rate(&[], &[o]).is_err());
    }

    #[test]
    fn objectness_arithmetic() {
        let v = objectness_from_rates(0.25, 0.75, 2.0).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-12);
        assert!(matches!(objectness_from_rates(0.0, 0.0, 0.0), Err(Error::DegenerateComponent)));
        let pts = [Point::ZERO, Point::X, Point::Y];
        assert_eq!(objectness(&pts, 1.0, &pts).unwrap(), 1.0);
    }

    #[test]
    fn shifted_cube_matches_brute_force() {
        let mut cube = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                for k in 0..6 {
                    if i == 0 || j == 0 || k == 0 || i == 5 || j == 5 || k == 5 {
                        cube.push(Point::new(i as f64 * 0.2, j as f64 * 0.2, k as f64 * 0.2));
                    }
                }
            }
        }
        let diag = 3f64.sqrt();
        let shift = Point::new(0.1 * diag, 0.0, 0.0);
        let moved: Vec<Point> = cube.iter().map(|p| *p + shift).collect();
        let brute = |x: &[Point], y: &[Point]| {
            x.iter().map(|p| y.iter().map(|q| p.dist_sq(*q)).fold(f64::INFINITY, f64::min)).sum::<f64>() / x.len() as f64
        };
        let expect = (-(brute(&cube, &moved) + brute(&moved, &cube)).sqrt() / diag).exp();
        assert!((objectness(&cube, diag, &moved).unwrap() - expect).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn objectness_decreases_with_rates(a in 0.0..10.0f64, b in 0.0..10.0f64, extra in 1e-6..5.0f64, diag in 0.1..5.0f64) {
            let base = objectness_from_rates(a, b, diag).unwrap();
            let worse = objectness_from_rates(a + extra, b, diag).unwrap();
            prop_assert!(worse < base);
            prop_assert!(base > 0.0 && base <= 1.0);
        }
    }
}
