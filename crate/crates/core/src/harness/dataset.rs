//! Labelled corpora: mutation-based dataset generation with GA labeling,
//! the train/test split, JSONL persistence, and conversion into training
//! samples for the network.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::bdd::validate_order;
use crate::cnf::{parse_dimacs, Cnf, CnfError, VarId};
use crate::hmpnn::{target_depths, TrainSample};
use crate::hypergraph::{cnf_to_hypergraph, feature_rank};
use crate::reorder::{genetic, GaConfig};

/// One labelled instance: a formula, the frequency order it starts from,
/// and the GA-found order serving as the training label. Sizes are the OBDD
/// sizes under the two orders and can be re-checked by rebuilding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub id: String,
    /// The formula as inline DIMACS text.
    pub dimacs: String,
    pub initial_order: Vec<u32>,
    pub label_order: Vec<u32>,
    pub initial_size: u64,
    pub label_size: u64,
}

impl LabeledSample {
    pub fn cnf(&self) -> Result<Cnf, CnfError> {
        parse_dimacs(&self.dimacs)
    }

    pub fn initial_order_vars(&self) -> Vec<VarId> {
        self.initial_order.iter().map(|&v| VarId(v)).collect()
    }

    pub fn label_order_vars(&self) -> Vec<VarId> {
        self.label_order.iter().map(|&v| VarId(v)).collect()
    }

    /// The adopted compression ratio of the label against the start order.
    pub fn label_eta(&self) -> f64 {
        crate::reorder::compression_ratio(self.initial_size, self.label_size).0
    }
}

/// Clause-set identity modulo clause and literal order, used for mutant
/// distinctness.
fn canonical_key(cnf: &Cnf) -> Vec<Vec<i64>> {
    let mut clauses: Vec<Vec<i64>> = cnf
        .normalize()
        .clauses()
        .iter()
        .map(|c| {
            let mut lits: Vec<i64> = c.iter().map(|l| l.to_dimacs()).collect();
            lits.sort_unstable();
            lits
        })
        .collect();
    clauses.sort();
    clauses
}

fn label(
    cnf: &Cnf,
    id: &str,
    cfg: &GaConfig,
    ga_seed: u64,
) -> Result<LabeledSample, HarnessError> {
    let initial = cnf.frequency_order();
    let result = genetic(cnf, &initial, cfg, ga_seed)?;
    Ok(LabeledSample {
        id: id.to_string(),
        dimacs: cnf.emit_dimacs(),
        initial_order: initial.iter().map(|v| v.0).collect(),
        label_order: result.order.iter().map(|v| v.0).collect(),
        initial_size: result.initial_size,
        label_size: result.final_size,
    })
}

/// Labels every seed formula and `mutations_per_seed` distinct mutants of
/// each. Mutants flip 1–3 literal polarities; distinctness is judged on the
/// normalized clause set, colliding draws are retried, and a seed whose
/// mutation space is exhausted (50·m draws) is an error. The initial order
/// is the formula's frequency order; the label is the GA's result.
pub fn gen_dataset(
    seeds: &[Cnf],
    mutations_per_seed: usize,
    labeler_cfg: &GaConfig,
    seed: u64,
) -> Result<Vec<LabeledSample>, HarnessError> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(seeds.len() * (1 + mutations_per_seed));
    for (i, base) in seeds.iter().enumerate() {
        let seed_id = format!("s{i:02}");
        out.push(label(base, &seed_id, labeler_cfg, rng.gen())?);

        let mut seen: HashSet<Vec<Vec<i64>>> = HashSet::new();
        seen.insert(canonical_key(base));
        let k_max = base.num_literal_occurrences().min(3);
        let budget = 50usize.saturating_mul(mutations_per_seed);
        let mut draws = 0usize;
        for j in 0..mutations_per_seed {
            let mutant = loop {
                if draws >= budget {
                    return Err(HarnessError::MutantExhaustion {
                        seed_id,
                        wanted: mutations_per_seed,
                        got: j,
                    });
                }
                draws += 1;
                let k = rng.gen_range(1..=k_max);
                let candidate = base.mutate(k, rng.gen())?;
                if seen.insert(canonical_key(&candidate)) {
                    break candidate;
                }
            };
            out.push(label(&mutant, &format!("{seed_id}m{j:03}"), labeler_cfg, rng.gen())?);
        }
    }
    Ok(out)
}

/// Seeded shuffle, then cut: the first `round(len · fraction)` samples
/// train, the rest test. Both sides must be non-empty.
pub fn split(
    dataset: &[LabeledSample],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>), HarnessError> {
    assert!(
        train_fraction > 0.0 && train_fraction < 1.0,
        "train fraction must lie strictly between 0 and 1"
    );
    let n_train = (dataset.len() as f64 * train_fraction).round() as usize;
    if n_train == 0 || n_train >= dataset.len() {
        return Err(HarnessError::DegenerateSplit {
            len: dataset.len(),
            fraction: train_fraction,
        });
    }
    let mut shuffled = dataset.to_vec();
    shuffled.shuffle(&mut ChaCha12Rng::seed_from_u64(seed));
    let test = shuffled.split_off(n_train);
    Ok((shuffled, test))
}

/// One JSON record per line.
pub fn write_dataset(samples: &[LabeledSample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(s).expect("samples serialize"));
        out.push('\n');
    }
    out
}

/// Parses [`write_dataset`] output, validating per record that the DIMACS
/// text parses and both orders are permutations of its variables.
pub fn read_dataset(text: &str) -> Result<Vec<LabeledSample>, HarnessError> {
    let mut samples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |reason: String| HarnessError::BadRecord { line: i + 1, reason };
        let sample: LabeledSample =
            serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let cnf = parse_dimacs(&sample.dimacs).map_err(|e| bad(e.to_string()))?;
        for order in [&sample.initial_order, &sample.label_order] {
            let vars: Vec<VarId> = order.iter().map(|&v| VarId(v)).collect();
            validate_order(cnf.num_vars(), &vars).map_err(|e| bad(e.to_string()))?;
        }
        samples.push(sample);
    }
    Ok(samples)
}

/// Encodes samples for training: hypergraph, features at width `d_feat`,
/// and target depths from the label order.
pub fn to_train_samples(
    samples: &[LabeledSample],
    d_feat: usize,
) -> Result<Vec<TrainSample>, HarnessError> {
    samples
        .iter()
        .map(|s| {
            let cnf = s.cnf()?;
            let hg = cnf_to_hypergraph(&cnf);
            let feats = feature_rank(&cnf, d_feat);
            let y_star = target_depths(&s.label_order_vars());
            Ok((hg, feats, y_star))
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::super::{chain_family_seeds, random_cnf, synth_chain};
    use super::*;
    use crate::hmpnn::depth_to_order;
    use crate::reorder::obdd_size_under;

    /// Small GA settings so labeling stays fast in tests.
    pub(crate) fn light_ga() -> GaConfig {
        GaConfig { population: 6, max_generations: 8, stagnation: 4, ..GaConfig::default() }
    }

    /// Two chains plus three random formulas; every seed has enough literal
    /// occurrences to supply several distinct mutants.
    pub(crate) fn small_dataset(mutants: usize, seed: u64) -> Vec<LabeledSample> {
        let seeds = vec![
            synth_chain(4).unwrap(),
            synth_chain(6).unwrap(),
            random_cnf(5, 9, 101),
            random_cnf(6, 11, 102),
            random_cnf(7, 13, 103),
        ];
        gen_dataset(&seeds, mutants, &light_ga(), seed).unwrap()
    }

    #[test]
    fn zero_mutations_labels_only_the_seeds() {
        let seeds = chain_family_seeds();
        let ds = gen_dataset(&seeds, 0, &light_ga(), 1).unwrap();
        assert_eq!(ds.len(), seeds.len());
        assert_eq!(ds[0].id, "s00");
        assert_eq!(ds[2].id, "s02");
    }

    #[test]
    fn sizes_are_rebuildable_and_labels_never_worse() {
        let ds = small_dataset(2, 2);
        assert_eq!(ds.len(), 5 * 3);
        for s in &ds {
            let cnf = s.cnf().unwrap();
            assert!(s.label_size <= s.initial_size, "{}: adoption rule", s.id);
            assert_eq!(
                s.initial_size,
                obdd_size_under(&cnf, &s.initial_order_vars()).unwrap(),
                "{}: initial size re-checks",
                s.id
            );
            assert_eq!(
                s.label_size,
                obdd_size_under(&cnf, &s.label_order_vars()).unwrap(),
                "{}: label size re-checks",
                s.id
            );
            assert!(s.label_eta() <= 0.0);
        }
    }

    #[test]
    fn mutants_are_distinct_per_seed() {
        let ds = small_dataset(4, 3);
        for group in ds.chunks(5) {
            let keys: HashSet<Vec<Vec<i64>>> =
                group.iter().map(|s| canonical_key(&s.cnf().unwrap())).collect();
            assert_eq!(keys.len(), group.len(), "collision within a seed group");
        }
    }

    #[test]
    fn generation_is_deterministic_for_fixed_seed() {
        assert_eq!(small_dataset(3, 7), small_dataset(3, 7));
        assert_ne!(small_dataset(3, 7), small_dataset(3, 8));
    }

    #[test]
    fn exhausted_mutation_space_is_an_error() {
        // chain(2) = (x1)(x2) has only 3 distinct polarity mutants.
        let seeds = vec![synth_chain(2).unwrap()];
        match gen_dataset(&seeds, 10, &light_ga(), 4) {
            Err(HarnessError::MutantExhaustion { seed_id, wanted: 10, got }) => {
                assert_eq!(seed_id, "s00");
                assert!(got <= 3, "only three mutants exist, got {got}");
            }
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn split_cuts_eight_two_and_is_seeded() {
        let ds = small_dataset(1, 5);
        assert_eq!(ds.len(), 10);
        let (train, test) = split(&ds, 0.8, 11).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        // Disjoint and covering by id.
        let mut ids: Vec<&str> =
            train.iter().chain(&test).map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        let mut expect: Vec<&str> = ds.iter().map(|s| s.id.as_str()).collect();
        expect.sort_unstable();
        assert_eq!(ids, expect);
        let again = split(&ds, 0.8, 11).unwrap();
        assert_eq!((train, test), again);
    }

    #[test]
    fn degenerate_splits_are_errors() {
        let ds = small_dataset(0, 6);
        assert_eq!(ds.len(), 5);
        assert!(matches!(
            split(&ds[..2], 0.1, 0),
            Err(HarnessError::DegenerateSplit { len: 2, .. })
        ));
        assert!(matches!(
            split(&ds[..2], 0.99, 0),
            Err(HarnessError::DegenerateSplit { len: 2, .. })
        ));
        assert!(matches!(split(&[], 0.5, 0), Err(HarnessError::DegenerateSplit { .. })));
    }

    #[test]
    fn dataset_io_round_trips_and_validates() {
        let ds = small_dataset(1, 9);
        let text = write_dataset(&ds);
        assert_eq!(text.lines().count(), ds.len());
        let back = read_dataset(&text).unwrap();
        assert_eq!(back, ds);

        assert!(matches!(
            read_dataset("{ not json"),
            Err(HarnessError::BadRecord { line: 1, .. })
        ));
        // A record whose label order is not a permutation is rejected.
        let mut broken = ds[0].clone();
        broken.label_order = vec![1; broken.label_order.len()];
        let text = write_dataset(&[broken]);
        assert!(matches!(read_dataset(&text), Err(HarnessError::BadRecord { line: 1, .. })));
    }

    #[test]
    fn train_samples_carry_the_label_depths() {
        let ds = small_dataset(0, 10);
        let train = to_train_samples(&ds, 8).unwrap();
        assert_eq!(train.len(), ds.len());
        for ((hg, feats, y_star), s) in train.iter().zip(&ds) {
            assert_eq!(hg.num_vars(), s.cnf().unwrap().num_vars());
            assert_eq!(feats.d_feat(), 8);
            assert_eq!(
                depth_to_order(y_star)
                    .iter()
                    .map(|v| v.0)
                    .collect::<Vec<_>>(),
                s.label_order
            );
        }
    }
}
