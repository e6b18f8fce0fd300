//! Exact rational random-walk computations.
//!
//! For a walk `S_l = X_1 + ... + X_l` with i.i.d. steps drawn from a finite
//! rational distribution, the expected running maximum satisfies
//!
//! `E max_{0 <= l <= k} S_l  =  sum_{l=1}^{k} E(S_l)_+ / l`.
//!
//! Both sides are computed here independently in exact `BigRational`
//! arithmetic, the left by dynamic programming over the joint law of
//! `(S_l, max)`, the right by convolving the step distribution, so equality
//! can be checked literally rather than within a floating-point tolerance.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::collections::BTreeMap;
use thiserror::Error;

/// Error type for walk construction and evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WalkError {
    /// The step distribution has no atoms.
    #[error("step distribution must have at least one atom")]
    EmptySupport,
    /// An atom has a nonpositive probability, or the probabilities do not
    /// sum to exactly one.
    #[error("step probabilities must be positive and sum to exactly 1")]
    BadProbabilities,
    /// The same step value appears twice.
    #[error("step values must be distinct")]
    DuplicateValue,
    /// `|support|^k` exceeds the enumeration budget of 1e8.
    #[error("support size {support} with horizon {k} exceeds the enumeration budget")]
    BudgetExceeded { support: usize, k: u32 },
}

/// A finite rational step distribution for an i.i.d. random walk.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkDistribution {
    atoms: Vec<(BigRational, BigRational)>,
}

impl WalkDistribution {
    /// Builds a distribution from `(value, probability)` atoms, checking that
    /// probabilities are positive and sum to exactly one and that values are
    /// distinct.
    pub fn new(atoms: Vec<(BigRational, BigRational)>) -> Result<Self, WalkError> {
        if atoms.is_empty() {
            return Err(WalkError::EmptySupport);
        }
        let mut total = BigRational::zero();
        for (_, p) in &atoms {
            if *p <= BigRational::zero() {
                return Err(WalkError::BadProbabilities);
            }
            total += p;
        }
        if !total.is_one() {
            return Err(WalkError::BadProbabilities);
        }
        let mut values: Vec<&BigRational> = atoms.iter().map(|(v, _)| v).collect();
        values.sort();
        if values.windows(2).any(|w| w[0] == w[1]) {
            return Err(WalkError::DuplicateValue);
        }
        Ok(Self { atoms })
    }

    /// Fair Rademacher steps: +1 and -1 with probability 1/2 each.
    pub fn fair() -> Self {
        let half = BigRational::new(BigInt::from(1), BigInt::from(2));
        Self::new(vec![
            (BigRational::from(BigInt::from(1)), half.clone()),
            (BigRational::from(BigInt::from(-1)), half),
        ])
        .expect("fair coin atoms are valid")
    }

    /// Centered lopsided steps: +2 with probability 1/3, -1 with
    /// probability 2/3.
    pub fn lopsided() -> Self {
        let third = BigRational::new(BigInt::from(1), BigInt::from(3));
        let two_thirds = BigRational::new(BigInt::from(2), BigInt::from(3));
        Self::new(vec![
            (BigRational::from(BigInt::from(2)), third),
            (BigRational::from(BigInt::from(-1)), two_thirds),
        ])
        .expect("lopsided atoms are valid")
    }

    /// The `(value, probability)` atoms.
    pub fn atoms(&self) -> &[(BigRational, BigRational)] {
        &self.atoms
    }
}

fn budget_ok(support: usize, k: u32) -> bool {
    let mut total = 1f64;
    for _ in 0..k {
        total *= support as f64;
        if total > 1e8 {
            return false;
        }
    }
    true
}

/// Evaluates both sides of the prefix-maximum identity exactly for horizon
/// `k >= 1`, returning `(E max_{0 <= l <= k} S_l, sum_l E(S_l)_+ / l)` as
/// rationals without asserting that they agree.
pub fn kac_both_sides_exact(
    dist: &WalkDistribution,
    k: u32,
) -> Result<(BigRational, BigRational), WalkError> {
    if k == 0 {
        return Ok((BigRational::zero(), BigRational::zero()));
    }
    if !budget_ok(dist.atoms.len(), k) {
        return Err(WalkError::BudgetExceeded { support: dist.atoms.len(), k });
    }

    let zero = BigRational::zero();

    // Left side: joint law of (S_l, max_{0<=j<=l} S_j), advanced one step at
    // a time. The state space stays polynomial for lattice-valued steps.
    let mut joint: BTreeMap<(BigRational, BigRational), BigRational> = BTreeMap::new();
    joint.insert((zero.clone(), zero.clone()), BigRational::one());
    for _ in 0..k {
        let mut next: BTreeMap<(BigRational, BigRational), BigRational> = BTreeMap::new();
        for ((sum, max), prob) in &joint {
            for (step, p) in &dist.atoms {
                let new_sum = sum + step;
                let new_max = if new_sum > *max { new_sum.clone() } else { max.clone() };
                let mass = prob * p;
                next.entry((new_sum, new_max))
                    .and_modify(|q| *q += &mass)
                    .or_insert(mass);
            }
        }
        joint = next;
    }
    let lhs = joint
        .iter()
        .fold(BigRational::zero(), |acc, ((_, max), prob)| acc + max * prob);

    // Right side: marginal law of S_l by convolution, accumulating
    // E(S_l)_+ / l.
    let mut marginal: BTreeMap<BigRational, BigRational> = BTreeMap::new();
    marginal.insert(zero.clone(), BigRational::one());
    let mut rhs = BigRational::zero();
    for l in 1..=k {
        let mut next: BTreeMap<BigRational, BigRational> = BTreeMap::new();
        for (sum, prob) in &marginal {
            for (step, p) in &dist.atoms {
                let new_sum = sum + step;
                let mass = prob * p;
                next.entry(new_sum).and_modify(|q| *q += &mass).or_insert(mass);
            }
        }
        marginal = next;
        let positive_part = marginal
            .iter()
            .filter(|(v, _)| **v > zero)
            .fold(BigRational::zero(), |acc, (v, p)| acc + v * p);
        rhs += positive_part / BigRational::from(BigInt::from(l));
    }

    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(num: i64, den: i64) -> BigRational {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    #[test]
    fn fair_walk_matches_hand_computed_values() {
        let dist = WalkDistribution::fair();
        let (lhs1, rhs1) = kac_both_sides_exact(&dist, 1).unwrap();
        assert_eq!(lhs1, r(1, 2));
        assert_eq!(rhs1, r(1, 2));
        let (lhs2, rhs2) = kac_both_sides_exact(&dist, 2).unwrap();
        assert_eq!(lhs2, r(3, 4));
        assert_eq!(rhs2, r(3, 4));
        let (lhs3, rhs3) = kac_both_sides_exact(&dist, 3).unwrap();
        assert_eq!(lhs3, r(1, 1));
        assert_eq!(rhs3, r(1, 1));
    }

    #[test]
    fn identity_holds_exactly_for_fair_and_lopsided_walks() {
        for dist in [WalkDistribution::fair(), WalkDistribution::lopsided()] {
            for k in 1..=10 {
                let (lhs, rhs) = kac_both_sides_exact(&dist, k).unwrap();
                assert_eq!(lhs, rhs, "identity failed at k={k} for {dist:?}");
            }
        }
    }

    #[test]
    fn degenerate_single_atom_walk_has_zero_maximum() {
        let dist = WalkDistribution::new(vec![(r(0, 1), r(1, 1))]).unwrap();
        let (lhs, rhs) = kac_both_sides_exact(&dist, 5).unwrap();
        assert_eq!(lhs, BigRational::zero());
        assert_eq!(rhs, BigRational::zero());
    }

    #[test]
    fn negative_drift_walk_still_satisfies_identity() {
        let dist = WalkDistribution::new(vec![(r(1, 1), r(1, 4)), (r(-1, 2), r(3, 4))]).unwrap();
        for k in 1..=8 {
            let (lhs, rhs) = kac_both_sides_exact(&dist, k).unwrap();
            assert_eq!(lhs, rhs, "identity failed at k={k}");
        }
    }

    #[test]
    fn horizon_zero_gives_zero_on_both_sides() {
        let (lhs, rhs) = kac_both_sides_exact(&WalkDistribution::fair(), 0).unwrap();
        assert_eq!(lhs, BigRational::zero());
        assert_eq!(rhs, BigRational::zero());
    }

    #[test]
    fn validation_rejects_malformed_distributions() {
        assert_eq!(WalkDistribution::new(vec![]).unwrap_err(), WalkError::EmptySupport);
        assert_eq!(
            WalkDistribution::new(vec![(r(1, 1), r(1, 2))]).unwrap_err(),
            WalkError::BadProbabilities
        );
        assert_eq!(
            WalkDistribution::new(vec![(r(1, 1), r(3, 2)), (r(-1, 1), r(-1, 2))]).unwrap_err(),
            WalkError::BadProbabilities
        );
        assert_eq!(
            WalkDistribution::new(vec![(r(1, 1), r(1, 2)), (r(1, 1), r(1, 2))]).unwrap_err(),
            WalkError::DuplicateValue
        );
    }

    #[test]
    fn enumeration_budget_is_enforced() {
        let err = kac_both_sides_exact(&WalkDistribution::fair(), 40).unwrap_err();
        assert!(matches!(err, WalkError::BudgetExceeded { support: 2, k: 40 }));
    }
}
