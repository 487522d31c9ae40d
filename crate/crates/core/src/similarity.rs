//! Cosine similarity over dense embedding vectors.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimilarityError {
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cosine similarity is undefined for an all-zero vector")]
    ZeroVector,
}

/// Standard cosine similarity, clamped to `[-1, 1]`.
///
/// Computed as `u·v / sqrt(|u|²·|v|²)` so that `cosine(u, u)` is exactly 1.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, SimilarityError> {
    if u.len() != v.len() {
        return Err(SimilarityError::DimensionMismatch(u.len(), v.len()));
    }
    let (mut dot, mut uu, mut vv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(SimilarityError::ZeroVector);
    }
    Ok((dot / (uu * vv).sqrt()).clamp(-1.0, 1.0))
}

/// Scales `v` to unit length in place. Returns false for the zero vector.
pub fn normalize(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_orthogonal_opposite() {
        let u = [0.3, -1.2, 4.0];
        assert_eq!(cosine(&u, &u).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine(&[1.0, 2.0], &[-1.0, -2.0]).unwrap(), -1.0);
    }

    #[test]
    fn threshold_boundary_is_exact() {
        // used by the strict-threshold fixtures: cosine must land on 0.6 exactly
        assert_eq!(cosine(&[1.0, 0.0], &[0.6, 0.8]).unwrap(), 0.6);
    }

    #[test]
    fn errors() {
        assert_eq!(
            cosine(&[1.0], &[1.0, 2.0]),
            Err(SimilarityError::DimensionMismatch(1, 2))
        );
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 2.0]), Err(SimilarityError::ZeroVector));
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(u in prop::collection::vec(-10.0f64..10.0, 4), v in prop::collection::vec(-10.0f64..10.0, 4)) {
            prop_assume!(u.iter().any(|x| *x != 0.0) && v.iter().any(|x| *x != 0.0));
            let a = cosine(&u, &v).unwrap();
            prop_assert_eq!(a, cosine(&v, &u).unwrap());
            prop_assert!((-1.0..=1.0).contains(&a));
            prop_assert_eq!(cosine(&u, &u).unwrap(), 1.0);
        }
    }
}
