//! Shared fixtures for the benchmarks.

use abrf::data::{gen_friedman, gen_tictactoe, FriedmanVariant};
use abrf::{fit_forest, Dataset, Ensemble, Forest, ForestConfig, GrowthCondition, PanelSet};

pub fn friedman2(n: usize) -> Dataset {
    gen_friedman(FriedmanVariant::Two, n, FriedmanVariant::Two.default_noise_sd(), 0).expect("valid generator arguments")
}

pub fn tictactoe() -> Dataset {
    gen_tictactoe()
}

/// A forest on `ds` and the panels of `ds` under it.
pub fn fitted(ds: &Dataset, n_trees: usize, condition: GrowthCondition) -> (Forest, PanelSet) {
    let forest = fit_forest(ds, &ForestConfig::new(n_trees, Ensemble::Rf, condition, 1)).expect("fixture forest");
    let set = PanelSet::new(&forest, ds).expect("fixture panels");
    (forest, set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        let (forest, set) = fitted(&friedman2(40), 5, GrowthCondition::CONDITION_1);
        assert_eq!(forest.n_trees(), 5);
        assert_eq!(set.len(), 40);
        assert_eq!(tictactoe().n_samples(), 958);
    }
}
