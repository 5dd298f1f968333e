//! Rescaling an intrinsic `N`-Lipschitz map `R -> W` to an intrinsic 1-Lipschitz one.

use crate::error::{IlgError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

fn is_quadratic_slot(n: usize, c: usize) -> bool {
    c == n - 1 || c == 2 * n - 1
}

/// Forward divides `phi_2..phi_n, phi_{n+2}..phi_{2n}` by `N` and `phi_{n+1}, phi_{2n+1}` by
/// `N^2`; backward multiplies. Exact round trip when `N` is a power of two.
pub fn rescale_n<T: Scalar>(values: &[Vec<T>], n: usize, big_n: T, direction: Direction) -> Result<Vec<Vec<T>>> {
    if n == 0 {
        return Err(IlgError::InvalidParameter("n must be positive".into()));
    }
    if !(big_n >= T::one()) || !big_n.is_finite() {
        return Err(IlgError::InvalidParameter(format!("N must be at least 1, got {big_n}")));
    }
    if let Some(v) = values.iter().find(|v| v.len() != 2 * n) {
        return Err(IlgError::DimensionMismatch { expected: 2 * n, found: v.len() });
    }
    Ok(values
        .iter()
        .map(|v| {
            v.iter()
                .enumerate()
                .map(|(c, &x)| {
                    let twice = is_quadratic_slot(n, c);
                    match direction {
                        Direction::Forward if twice => x / big_n / big_n,
                        Direction::Forward => x / big_n,
                        Direction::Backward if twice => x * big_n * big_n,
                        Direction::Backward => x * big_n,
                    }
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heisenberg::{intrinsic_lip_constant, SampledMap, SubgroupSplit};

    #[test]
    fn identity_for_n_one() {
        let v = vec![vec![0.1, 0.2, 0.3, 0.4]];
        assert_eq!(rescale_n(&v, 2, 1.0, Direction::Forward).unwrap(), v);
    }

    #[test]
    fn componentwise_division() {
        let v = vec![vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]];
        let f = rescale_n(&v, 3, 2.0, Direction::Forward).unwrap();
        assert_eq!(f, vec![vec![0.5, 1.0, 0.75, 2.0, 2.5, 1.5]]);
        assert_eq!(rescale_n(&f, 3, 2.0, Direction::Backward).unwrap(), v);
    }

    #[test]
    fn rejects_small_n() {
        assert!(rescale_n(&[vec![0.0, 0.0]], 1, 0.5, Direction::Forward).is_err());
        assert!(rescale_n(&[vec![0.0]], 1, 2.0, Direction::Forward).is_err());
    }

    #[test]
    fn constant_scales_down() {
        let split = SubgroupSplit::new(2, 1).unwrap();
        let dom: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 * 0.05]).collect();
        let vals: Vec<Vec<f64>> =
            dom.iter().map(|x| vec![(3.0 * x[0]).sin(), 0.5 * x[0], x[0] * x[0], (x[0] - 0.4).abs()]).collect();
        let l = intrinsic_lip_constant(&SampledMap::new(split, dom.clone(), vals.clone()).unwrap()).unwrap();
        let scaled = rescale_n(&vals, 2, l, Direction::Forward).unwrap();
        let l1 = intrinsic_lip_constant(&SampledMap::new(split, dom, scaled).unwrap()).unwrap();
        assert!(l1 <= 1.0 + 1e-9, "{l} -> {l1}");
    }
}
