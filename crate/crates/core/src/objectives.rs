//! Binary test problems with known optima.

use serde::{Deserialize, Serialize};

use crate::error::{CemError, Result};
use crate::model::{KnownOptimum, Objective};

/// Largest dimension accepted by [`enumerate_optimum`].
pub const ENUMERATION_LIMIT: usize = 24;

/// MaxCut instances up to this size get their optimum by enumeration.
const MAXCUT_ENUMERATION_LIMIT: usize = 20;

/// Declarative description of a test problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Number of ones.
    Onemax { n: usize },
    /// Length of the all-ones prefix.
    LeadingOnes { n: usize },
    /// `sum_i w_i x_i`.
    WeightedLinear { weights: Vec<f64> },
    /// Concatenated deceptive traps: a block of `k` bits with `u` ones scores
    /// `k` when `u = k` and `k - 1 - u` otherwise.
    TrapK { n: usize, k: usize },
    /// Total weight of the edges `(u, v, w)` whose endpoints differ.
    Maxcut {
        n: usize,
        edges: Vec<(usize, usize, f64)>,
    },
}

impl ProblemSpec {
    pub fn onemax(n: usize) -> Self {
        ProblemSpec::Onemax { n }
    }

    pub fn leading_ones(n: usize) -> Self {
        ProblemSpec::LeadingOnes { n }
    }

    pub fn weighted_linear(weights: Vec<f64>) -> Self {
        ProblemSpec::WeightedLinear { weights }
    }

    pub fn trap(n: usize, k: usize) -> Self {
        ProblemSpec::TrapK { n, k }
    }

    pub fn maxcut(n: usize, edges: Vec<(usize, usize, f64)>) -> Self {
        ProblemSpec::Maxcut { n, edges }
    }

    pub fn dim(&self) -> usize {
        match self {
            ProblemSpec::Onemax { n }
            | ProblemSpec::LeadingOnes { n }
            | ProblemSpec::TrapK { n, .. }
            | ProblemSpec::Maxcut { n, .. } => *n,
            ProblemSpec::WeightedLinear { weights } => weights.len(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ProblemSpec::Onemax { .. } => "onemax",
            ProblemSpec::LeadingOnes { .. } => "leading_ones",
            ProblemSpec::WeightedLinear { .. } => "weighted_linear",
            ProblemSpec::TrapK { .. } => "trap_k",
            ProblemSpec::Maxcut { .. } => "maxcut",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            let field = match self {
                ProblemSpec::WeightedLinear { .. } => "weights",
                _ => "n",
            };
            return Err(CemError::config(field, "must describe at least one bit"));
        }
        match self {
            ProblemSpec::Onemax { .. } | ProblemSpec::LeadingOnes { .. } => Ok(()),
            ProblemSpec::WeightedLinear { weights } => {
                if weights.iter().all(|w| w.is_finite()) {
                    Ok(())
                } else {
                    Err(CemError::config("weights", "must all be finite"))
                }
            }
            ProblemSpec::TrapK { n, k } => {
                if *k == 0 || n % k != 0 {
                    Err(CemError::config(
                        "k",
                        format!("must be positive and divide n = {n} (got {k})"),
                    ))
                } else {
                    Ok(())
                }
            }
            ProblemSpec::Maxcut { n, edges } => {
                for &(u, v, w) in edges {
                    if u >= *n || v >= *n || u == v {
                        return Err(CemError::config(
                            "edges",
                            format!(
                                "edge ({u}, {v}) must join two distinct vertices below n = {n}"
                            ),
                        ));
                    }
                    if !w.is_finite() {
                        return Err(CemError::config("edges", "weights must be finite"));
                    }
                }
                Ok(())
            }
        }
    }
}

/// A validated, immutable test problem.
#[derive(Debug, Clone)]
pub struct Problem {
    spec: ProblemSpec,
    optimum: Option<KnownOptimum>,
}

impl Problem {
    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }
}

pub fn make_objective(spec: &ProblemSpec) -> Result<Problem> {
    spec.validate()?;
    let n = spec.dim();
    let mut problem = Problem {
        spec: spec.clone(),
        optimum: None,
    };
    problem.optimum = match spec {
        ProblemSpec::Onemax { .. }
        | ProblemSpec::LeadingOnes { .. }
        | ProblemSpec::TrapK { .. } => Some(KnownOptimum {
            bits: vec![true; n],
            value: n as f64,
        }),
        ProblemSpec::WeightedLinear { weights } => {
            // Zero weights take 0, the lexicographically smaller choice.
            let bits: Vec<bool> = weights.iter().map(|&w| w > 0.0).collect();
            let value = weights.iter().filter(|&&w| w > 0.0).sum();
            Some(KnownOptimum { bits, value })
        }
        ProblemSpec::Maxcut { .. } if n <= MAXCUT_ENUMERATION_LIMIT => {
            let (bits, value) = enumerate_optimum(&problem)?;
            Some(KnownOptimum { bits, value })
        }
        ProblemSpec::Maxcut { .. } => None,
    };
    Ok(problem)
}

impl Objective for Problem {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn value(&self, bits: &[bool]) -> f64 {
        match &self.spec {
            ProblemSpec::Onemax { .. } => bits.iter().filter(|&&b| b).count() as f64,
            ProblemSpec::LeadingOnes { .. } => bits.iter().take_while(|&&b| b).count() as f64,
            ProblemSpec::WeightedLinear { weights } => weights
                .iter()
                .zip(bits)
                .filter(|(_, &b)| b)
                .map(|(w, _)| w)
                .sum(),
            ProblemSpec::TrapK { k, .. } => bits
                .chunks(*k)
                .map(|block| {
                    let ones = block.iter().filter(|&&b| b).count();
                    if ones == *k {
                        *k as f64
                    } else {
                        (*k - 1 - ones) as f64
                    }
                })
                .sum(),
            ProblemSpec::Maxcut { edges, .. } => edges
                .iter()
                .filter(|&&(u, v, _)| bits[u] != bits[v])
                .map(|&(_, _, w)| w)
                .sum(),
        }
    }

    fn optimum(&self) -> Option<&KnownOptimum> {
        self.optimum.as_ref()
    }
}

/// Exhaustive search for a global maximizer.
///
/// Among equal maxima the lexicographically smallest bit vector wins
/// (`false < true`, bit 0 most significant).
pub fn enumerate_optimum<O: Objective + ?Sized>(obj: &O) -> Result<(Vec<bool>, f64)> {
    let n = obj.dim();
    if n > ENUMERATION_LIMIT {
        return Err(CemError::Capacity {
            n,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut bits = vec![false; n];
    let mut best_bits = bits.clone();
    let mut best_value = f64::NEG_INFINITY;
    for code in 0u64..(1u64 << n) {
        for (i, b) in bits.iter_mut().enumerate() {
            *b = (code >> (n - 1 - i)) & 1 == 1;
        }
        let value = obj.value(&bits);
        if value > best_value {
            best_value = value;
            best_bits.copy_from_slice(&bits);
        }
    }
    Ok((best_bits, best_value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::bits_from_str;

    fn bits(s: &str) -> Vec<bool> {
        bits_from_str(s).unwrap()
    }

    #[test]
    fn onemax_optimum() {
        let p = make_objective(&ProblemSpec::onemax(8)).unwrap();
        let opt = p.optimum().unwrap();
        assert_eq!(opt.value, 8.0);
        assert_eq!(opt.bits, vec![true; 8]);
    }

    #[test]
    fn trap_block_rule() {
        let p = make_objective(&ProblemSpec::trap(8, 4)).unwrap();
        assert_eq!(p.optimum().unwrap().value, 8.0);
        assert_eq!(p.value(&[true; 8]), 8.0);
        assert_eq!(p.value(&[false; 8]), 6.0);
        // one block complete, the other with three ones: 4 + 0
        assert_eq!(p.value(&bits("11110111")), 4.0);
    }

    #[test]
    fn trap_zero_is_second_best() {
        let p = make_objective(&ProblemSpec::trap(10, 5)).unwrap();
        let mut values: Vec<f64> = (0u32..1 << 10)
            .map(|c| {
                let b: Vec<bool> = (0..10).map(|i| c >> i & 1 == 1).collect();
                p.value(&b)
            })
            .collect();
        values.sort_by(|a, b| b.total_cmp(a));
        values.dedup();
        assert_eq!(values[0], 10.0);
        assert_eq!(values[1], 9.0); // one full block plus the zero block
        assert_eq!(p.value(&[false; 10]), 8.0);
    }

    #[test]
    fn maxcut_triangle() {
        let p = make_objective(&ProblemSpec::maxcut(
            3,
            vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)],
        ))
        .unwrap();
        let opt = p.optimum().unwrap();
        assert_eq!(opt.value, 2.0);
        assert_eq!(opt.bits, bits("001"));
    }

    #[test]
    fn leading_ones_counts_prefix() {
        let p = make_objective(&ProblemSpec::leading_ones(5)).unwrap();
        assert_eq!(p.value(&bits("11010")), 2.0);
        assert_eq!(p.value(&bits("01111")), 0.0);
        assert_eq!(p.optimum().unwrap().value, 5.0);
    }

    #[test]
    fn enumeration_examples() {
        let onemax = make_objective(&ProblemSpec::onemax(3)).unwrap();
        assert_eq!(enumerate_optimum(&onemax).unwrap(), (vec![true; 3], 3.0));

        let neg = make_objective(&ProblemSpec::weighted_linear(vec![-1.0, -2.0])).unwrap();
        assert_eq!(enumerate_optimum(&neg).unwrap(), (vec![false, false], 0.0));

        let trap = make_objective(&ProblemSpec::trap(3, 3)).unwrap();
        assert_eq!(enumerate_optimum(&trap).unwrap(), (vec![true; 3], 3.0));
    }

    #[test]
    fn enumeration_breaks_ties_lexicographically() {
        let flat = make_objective(&ProblemSpec::weighted_linear(vec![0.0, 0.0, 0.0])).unwrap();
        assert_eq!(enumerate_optimum(&flat).unwrap().0, vec![false; 3]);
        let p = make_objective(&ProblemSpec::weighted_linear(vec![1.0, 0.0, 1.0])).unwrap();
        assert_eq!(enumerate_optimum(&p).unwrap().0, bits("101"));
        assert_eq!(p.optimum().unwrap().bits, bits("101"));
    }

    #[test]
    fn enumeration_refuses_large_n() {
        let p = make_objective(&ProblemSpec::onemax(25)).unwrap();
        assert!(matches!(
            enumerate_optimum(&p),
            Err(CemError::Capacity { n: 25, .. })
        ));
    }

    #[test]
    fn stored_optima_match_enumeration() {
        let specs = vec![
            ProblemSpec::onemax(12),
            ProblemSpec::leading_ones(10),
            ProblemSpec::weighted_linear(vec![1.5, -2.0, 0.25, -0.5, 3.0, 0.0, -1.0]),
            ProblemSpec::trap(12, 4),
            ProblemSpec::trap(10, 5),
            ProblemSpec::maxcut(
                6,
                vec![
                    (0, 1, 1.0),
                    (1, 2, 2.0),
                    (2, 3, 1.0),
                    (3, 4, 0.5),
                    (4, 5, 1.0),
                    (5, 0, 3.0),
                    (0, 3, 1.0),
                ],
            ),
        ];
        for spec in specs {
            let p = make_objective(&spec).unwrap();
            let (bits, value) = enumerate_optimum(&p).unwrap();
            let opt = p.optimum().unwrap();
            assert_eq!(opt.value, value, "{spec:?}");
            assert_eq!(opt.bits, bits, "{spec:?}");
        }
    }

    #[test]
    fn invalid_specs_name_the_field() {
        let err = make_objective(&ProblemSpec::trap(10, 4)).unwrap_err();
        assert!(matches!(err, CemError::Config { field: "k", .. }));
        let err = make_objective(&ProblemSpec::onemax(0)).unwrap_err();
        assert!(matches!(err, CemError::Config { field: "n", .. }));
        let err = make_objective(&ProblemSpec::maxcut(3, vec![(0, 3, 1.0)])).unwrap_err();
        assert!(matches!(err, CemError::Config { field: "edges", .. }));
        let err = make_objective(&ProblemSpec::weighted_linear(vec![1.0, f64::NAN])).unwrap_err();
        assert!(matches!(
            err,
            CemError::Config {
                field: "weights",
                ..
            }
        ));
    }

    #[test]
    fn large_maxcut_has_no_metadata() {
        let edges = (0..29).map(|i| (i, i + 1, 1.0)).collect();
        let p = make_objective(&ProblemSpec::maxcut(30, edges)).unwrap();
        assert!(p.optimum().is_none());
    }
}
