//! Conditional information gain of a viewpoint over candidate shape priors.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::camera::Viewpoint;
use crate::error::{Error, Result};
use crate::voxel::ScalarField;

/// Threshold below which a blurred field value counts as empty.
pub const TAU_F: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewCandidate {
    pub index: usize,
    pub viewpoint: Viewpoint,
    pub valid: bool,
    /// G^j = Σ p(m_i)·G^j(m_i).
    pub gain: f64,
    /// G^j(m_i) per candidate model.
    pub per_model: Vec<f64>,
}

/// Shannon entropy in nats with 0·ln 0 = 0.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// p(m_i) = O_i / Σ O_k.
pub fn priors(objectness: &[f64]) -> Result<Vec<f64>> {
    let sum: f64 = objectness.iter().sum();
    if objectness.is_empty() {
        return Err(Error::NoCandidates);
    }
    if !(sum > 0.0) {
        return Err(Error::InvalidParameter("candidate objectness sums to zero".into()));
    }
    Ok(objectness.iter().map(|o| o / sum).collect())
}

/// Posterior over candidates after observing `delta` at a voxel whose
/// per-candidate occupancy probabilities are `f`. Falls back to the prior
/// when no candidate predicts `delta`.
pub fn posterior(prior: &[f64], f: &[f64], delta: bool) -> Vec<f64> {
    let like = |k: usize| if delta { f[k] } else { 1.0 - f[k] };
    if (1..prior.len()).all(|k| like(k) == like(0)) && like(0) > 0.0 {
        return prior.to_vec();
    }
    let joint: Vec<f64> = (0..prior.len()).map(|k| prior[k] * like(k)).collect();
    let z: f64 = joint.iter().sum();
    if z > 0.0 {
        joint.into_iter().map(|j| j / z).collect()
    } else {
        prior.to_vec()
    }
}

/// Returns `(G, [G(m_i)])` for one viewpoint. `visible(x)` is g(x, V) for
/// voxel index `x` of the shared grid.
pub fn conditional_info_gain(
    prior: &[f64],
    fields: &[&ScalarField],
    gamma: &ScalarField,
    mut visible: impl FnMut(usize) -> bool,
) -> Result<(f64, Vec<f64>)> {
    if fields.is_empty() || prior.len() != fields.len() {
        return Err(Error::NoCandidates);
    }
    let h_prior = entropy(prior);
    let mut support = BTreeSet::new();
    for f in fields {
        support.extend(f.nonzero().into_iter().filter(|(_, v)| *v > TAU_F).map(|(i, _)| i));
    }
    let mut per_model = vec![0.0; fields.len()];
    let mut f = vec![0.0; fields.len()];
    for x in support {
        if gamma.get(x) > TAU_F || !visible(x) {
            continue;
        }
        for (k, field) in fields.iter().enumerate() {
            f[k] = field.get(x);
        }
        let h0 = entropy(&posterior(prior, &f, false));
        let h1 = entropy(&posterior(prior, &f, true));
        for (i, g) in per_model.iter_mut().enumerate() {
            if f[i] > TAU_F {
                *g += h_prior - (h0 + f[i] * (h1 - h0));
            }
        }
    }
    let gain = prior.iter().zip(&per_model).map(|(p, g)| p * g).sum();
    Ok((gain, per_model))
}

/// Index of the largest gain, ties to the smallest index.
pub fn select_nbv(candidates: &[ViewCandidate]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if best.is_none_or(|b| c.gain > candidates[b].gain) {
            best = Some(i);
        }
    }
    best.ok_or(Error::NoCandidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::voxel::VoxelGrid;
    use proptest::prelude::*;

    fn grid() -> VoxelGrid {
        VoxelGrid::new(Point::ZERO, 0.1, [3, 1, 1]).unwrap()
    }

    fn field(values: &[f64]) -> ScalarField {
        let mut f = ScalarField::zeros(grid());
        for (i, v) in values.iter().enumerate() {
            f.set(i, *v);
        }
        f
    }

    #[test]
    fn two_candidate_single_voxel() {
        let (m1, m2, g) = (field(&[1.0, 0.0, 0.0]), field(&[0.0, 0.0, 0.0]), field(&[0.0; 3]));
        let (gain, per) = conditional_info_gain(&[0.5, 0.5], &[&m1, &m2], &g, |_| true).unwrap();
        // Voxel 0: prior entropy ln 2, certain under m1 after observing it.
        assert!((per[0] - 2f64.ln()).abs() < 1e-12);
        assert_eq!(per[1], 0.0);
        assert!((gain - 0.5 * 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn single_hypothesis_has_no_gain() {
        let m = field(&[1.0, 0.7, 0.2]);
        let (gain, _) = conditional_info_gain(&[1.0], &[&m], &field(&[0.0; 3]), |_| true).unwrap();
        assert_eq!(gain, 0.0);
    }

    #[test]
    fn hidden_or_observed_voxels_contribute_nothing() {
        let (m1, m2) = (field(&[1.0, 0.0, 0.0]), field(&[0.0; 3]));
        let observed = field(&[1.0, 0.0, 0.0]);
        let p = [0.5, 0.5];
        assert_eq!(conditional_info_gain(&p, &[&m1, &m2], &observed, |_| true).unwrap().0, 0.0);
        assert_eq!(conditional_info_gain(&p, &[&m1, &m2], &field(&[0.0; 3]), |_| false).unwrap().0, 0.0);
    }

    #[test]
    fn empty_candidates_error() {
        assert!(conditional_info_gain(&[], &[], &field(&[0.0; 3]), |_| true).is_err());
        assert!(priors(&[]).is_err());
        assert!(priors(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn nbv_selection() {
        let v = Viewpoint::look_at(Point::ZERO, Point::X).unwrap();
        let mk = |gains: &[f64]| -> Vec<ViewCandidate> {
            gains
                .iter()
                .enumerate()
                .map(|(index, &gain)| ViewCandidate {
                    index,
                    viewpoint: v,
                    valid: true,
                    gain,
                    per_model: vec![],
                })
                .collect()
        };
        assert_eq!(select_nbv(&mk(&[0.1, 0.7, 0.3])).unwrap(), 1);
        assert_eq!(select_nbv(&mk(&[0.2, 0.2, 0.2])).unwrap(), 0);
        assert!(select_nbv(&[]).is_err());
    }

    fn probs(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01..1.0f64, n)
    }

    proptest! {
        #[test]
        fn entropy_and_posterior_bounds(
            (o, f) in (1usize..6).prop_flat_map(|n| (probs(n), prop::collection::vec(0.0..=1.0f64, n)))
        ) {
            let p = priors(&o).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let h = entropy(&p);
            prop_assert!(h >= 0.0 && h <= (p.len() as f64).ln() + 1e-12);
            for delta in [false, true] {
                let post = posterior(&p, &f, delta);
                prop_assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn identical_fields_give_zero_gain(
            (o, vals) in (2usize..5).prop_flat_map(|n| (probs(n), prop::collection::vec(0.0..=1.0f64, 3)))
        ) {
            let m = field(&vals);
            let fields: Vec<&ScalarField> = o.iter().map(|_| &m).collect();
            let (gain, _) = conditional_info_gain(&priors(&o).unwrap(), &fields, &field(&[0.0; 3]), |_| true).unwrap();
            prop_assert_eq!(gain, 0.0);
        }
    }
}
