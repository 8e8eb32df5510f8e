//! Symbolic regression engine that rediscovers the Mars orbit equation
//! r = a / (1 + e*cos(theta)) from tabular astronomical data, comparing
//! observational bias (precomputed cos/sin features) and inductive bias
//! (a physically restricted grammar) against an unbiased baseline.

pub mod dataset;
pub mod decompose;
pub mod enumerate;
pub mod expr;
pub mod fit;
pub mod loss;
pub mod pareto;
pub mod search;

use expr::GrammarSet;

/// Which physics biases are active. The four combinations are the four
/// experiments: 1 = neither, 2 = observational only, 3 = inductive only,
/// 4 = both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BiasConfig {
    /// Feed cos(theta), sin(theta) instead of the raw angle.
    pub observational: bool,
    /// Restrict the grammar to operators meaningful on physical quantities.
    pub inductive: bool,
}

impl BiasConfig {
    pub fn for_experiment(id: u8) -> Option<BiasConfig> {
        match id {
            1 => Some(BiasConfig {
                observational: false,
                inductive: false,
            }),
            2 => Some(BiasConfig {
                observational: true,
                inductive: false,
            }),
            3 => Some(BiasConfig {
                observational: false,
                inductive: true,
            }),
            4 => Some(BiasConfig {
                observational: true,
                inductive: true,
            }),
            _ => None,
        }
    }

    pub fn grammar(&self) -> GrammarSet {
        if self.inductive {
            GrammarSet::restricted()
        } else {
            GrammarSet::full()
        }
    }

    pub fn feature_arity(&self) -> usize {
        if self.observational {
            2
        } else {
            1
        }
    }
}
