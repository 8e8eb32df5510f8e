//! Pareto front over (complexity, loss).
//!
//! The front is the working memory of the search: every scored candidate is
//! offered to it, and only candidates that buy accuracy with their extra
//! bits survive.

use crate::expr::Expr;

/// Which loss column drives dominance. Description length is the default;
/// mean squared error is kept alongside for the appendix-style tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKey {
    Dl,
    Mse,
}

impl Default for LossKey {
    fn default() -> Self {
        LossKey::Dl
    }
}

/// A candidate with everything the front needs to judge it.
#[derive(Debug, Clone)]
pub struct ScoredExpr {
    pub expr: Expr,
    pub constants: Vec<f64>,
    /// Description-length complexity in bits.
    pub complexity: f64,
    pub mse: f64,
    /// Mean description-length loss in bits per sample.
    pub dl: f64,
}

impl ScoredExpr {
    pub fn loss(&self, key: LossKey) -> f64 {
        match key {
            LossKey::Dl => self.dl,
            LossKey::Mse => self.mse,
        }
    }
}

/// Members sorted by ascending complexity with strictly descending loss;
/// no member is dominated by any other.
#[derive(Debug, Clone, Default)]
pub struct ParetoFront {
    members: Vec<ScoredExpr>,
    loss_key: LossKey,
}

impl ParetoFront {
    pub fn new(loss_key: LossKey) -> ParetoFront {
        ParetoFront {
            members: Vec::new(),
            loss_key,
        }
    }

    pub fn loss_key(&self) -> LossKey {
        self.loss_key
    }

    pub fn members(&self) -> &[ScoredExpr] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// The lowest-loss member: the last one, by the front invariant.
    pub fn best(&self) -> Option<&ScoredExpr> {
        self.members.last()
    }

    /// Offers a candidate. Returns true if it joined the front. Ties on
    /// both coordinates keep the earlier arrival, so insertion order is
    /// the tie-break and replay stays deterministic.
    pub fn insert(&mut self, candidate: ScoredExpr) -> bool {
        let c = candidate.complexity;
        let l = candidate.loss(self.loss_key);
        if l.is_nan() || c.is_nan() {
            return false;
        }
        let covered = self
            .members
            .iter()
            .any(|m| m.complexity <= c && m.loss(self.loss_key) <= l);
        if covered {
            return false;
        }
        self.members
            .retain(|m| !(m.complexity >= c && m.loss(self.loss_key) >= l));
        let at = self
            .members
            .partition_point(|m| m.complexity < c);
        self.members.insert(at, candidate);
        debug_assert!(self.invariants_hold());
        true
    }

    /// Checks the sortedness/dominance invariants. Cheap: the front stays
    /// small, so tests can call this after every insertion.
    pub fn invariants_hold(&self) -> bool {
        self.members.windows(2).all(|w| {
            w[0].complexity < w[1].complexity
                && w[0].loss(self.loss_key) > w[1].loss(self.loss_key)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn point(complexity: f64, dl: f64, mse: f64) -> ScoredExpr {
        ScoredExpr {
            expr: Expr::Feature(0),
            constants: Vec::new(),
            complexity,
            mse,
            dl,
        }
    }

    #[test]
    fn first_insert_is_kept() {
        let mut front = ParetoFront::new(LossKey::Dl);
        assert!(front.insert(point(10.0, 5.0, 1.0)));
        assert_eq!(front.len(), 1);
        assert_eq!(front.best().unwrap().complexity, 10.0);
    }

    #[test]
    fn dominated_point_leaves_front_unchanged() {
        let mut front = ParetoFront::new(LossKey::Dl);
        assert!(front.insert(point(10.0, 5.0, 1.0)));
        assert!(!front.insert(point(12.0, 6.0, 2.0)));
        assert!(!front.insert(point(10.0, 5.5, 0.5)));
        assert_eq!(front.len(), 1);
    }

    #[test]
    fn dominating_point_sweeps_the_front() {
        let mut front = ParetoFront::new(LossKey::Dl);
        front.insert(point(10.0, 5.0, 1.0));
        front.insert(point(20.0, 3.0, 0.5));
        front.insert(point(30.0, 2.0, 0.1));
        assert!(front.insert(point(5.0, 1.0, 0.01)));
        assert_eq!(front.len(), 1);
        assert_eq!(front.members()[0].complexity, 5.0);
    }

    #[test]
    fn partial_sweep_keeps_the_survivors() {
        let mut front = ParetoFront::new(LossKey::Dl);
        front.insert(point(10.0, 5.0, 1.0));
        front.insert(point(20.0, 3.0, 0.5));
        front.insert(point(30.0, 2.0, 0.1));
        // Beats the 20- and 30-bit members but not the 10-bit one.
        assert!(front.insert(point(15.0, 1.5, 0.2)));
        let complexities: Vec<f64> = front.members().iter().map(|m| m.complexity).collect();
        assert_eq!(complexities, vec![10.0, 15.0]);
    }

    #[test]
    fn exact_tie_keeps_the_earlier_arrival() {
        let mut front = ParetoFront::new(LossKey::Dl);
        let mut first = point(10.0, 5.0, 1.0);
        first.constants = vec![1.0];
        assert!(front.insert(first));
        let mut second = point(10.0, 5.0, 1.0);
        second.constants = vec![2.0];
        assert!(!front.insert(second));
        assert_eq!(front.members()[0].constants, vec![1.0]);
    }

    #[test]
    fn equal_complexity_better_loss_replaces() {
        let mut front = ParetoFront::new(LossKey::Dl);
        front.insert(point(10.0, 5.0, 1.0));
        assert!(front.insert(point(10.0, 4.0, 1.0)));
        assert_eq!(front.len(), 1);
        assert_eq!(front.members()[0].dl, 4.0);
    }

    #[test]
    fn loss_key_changes_the_verdict() {
        // Worse dl but better mse than the incumbent: rejected under Dl,
        // accepted under Mse.
        let incumbent = point(10.0, 5.0, 1.0);
        let challenger = point(12.0, 6.0, 0.5);

        let mut by_dl = ParetoFront::new(LossKey::Dl);
        by_dl.insert(incumbent.clone());
        assert!(!by_dl.insert(challenger.clone()));

        let mut by_mse = ParetoFront::new(LossKey::Mse);
        by_mse.insert(incumbent);
        assert!(by_mse.insert(challenger));
        assert_eq!(by_mse.len(), 2);
    }

    #[test]
    fn infinite_loss_member_survives_until_beaten() {
        let mut front = ParetoFront::new(LossKey::Dl);
        assert!(front.insert(point(1.0, f64::INFINITY, f64::INFINITY)));
        assert!(front.insert(point(1.0, 3.0, 0.5)));
        assert_eq!(front.len(), 1);
        assert!(front.members()[0].dl.is_finite());
    }

    #[test]
    fn nan_loss_is_rejected() {
        let mut front = ParetoFront::new(LossKey::Dl);
        assert!(!front.insert(point(1.0, f64::NAN, 1.0)));
        assert!(front.is_empty());
    }

    /// 100_000 random insertions; the invariants must hold after every one
    /// and the final front must equal the brute-force nondominated set.
    #[test]
    fn random_insertions_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(20_260_814);
        let mut front = ParetoFront::new(LossKey::Dl);
        let mut seen: Vec<(f64, f64)> = Vec::new();
        for _ in 0..100_000 {
            // Coarse grids so exact ties and dominations both happen often.
            let c = rng.gen_range(0..40) as f64 * 1.5;
            let l = rng.gen_range(0..40) as f64 * 0.25;
            front.insert(point(c, l, l));
            seen.push((c, l));
            assert!(front.invariants_hold());
        }
        let mut expected: Vec<(f64, f64)> = seen
            .iter()
            .copied()
            .filter(|&(c, l)| {
                !seen
                    .iter()
                    .any(|&(oc, ol)| oc <= c && ol <= l && (oc < c || ol < l))
            })
            .collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        expected.dedup();
        let got: Vec<(f64, f64)> = front
            .members()
            .iter()
            .map(|m| (m.complexity, m.dl))
            .collect();
        assert_eq!(got, expected);
    }
}
