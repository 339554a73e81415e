mod common;

use common::{labels_agree, random_render, stratified_within_one};
use ponwatch::dataset::io::encode_dataset;
use ponwatch::dataset::{build_generic_dataset, build_network_dataset, GenericRecipe, NetworkRecipe, SplitFractions};
use ponwatch::otdr::{PonTopology, SimConfig};
use proptest::prelude::*;

fn small_network(seed: u64) -> NetworkRecipe {
    NetworkRecipe { per_class_count: 23, seed, ..Default::default() }
}

fn small_generic(seed: u64) -> GenericRecipe {
    GenericRecipe { target_count: 700, seed, ..Default::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn labeler_matches_brute_force(seed in any::<u64>(), offset in 0usize..250, len in 5usize..=30) {
        let render = random_render(seed, 280);
        let start = render.trace.start_index + offset;
        prop_assume!(offset + len <= 280);
        prop_assert!(labels_agree(&render, start, len));
    }
}

#[test]
fn network_splits_are_stratified() {
    let ds = build_network_dataset(&PonTopology::default(), &SimConfig::default(), &small_network(3)).unwrap();
    assert_eq!(ds.len(), 9 * 23);
    assert!(stratified_within_one(&ds, &SplitFractions::default()));
    let odd = NetworkRecipe { fractions: SplitFractions { train: 0.5, val: 0.3, test: 0.2 }, ..small_network(4) };
    let ds = build_network_dataset(&PonTopology::default(), &SimConfig::default(), &odd).unwrap();
    assert!(stratified_within_one(&ds, &odd.fractions));
}

#[test]
fn generic_masks_match_event_classes() {
    let ds = build_generic_dataset(&PonTopology::default(), &SimConfig::default(), &small_generic(5)).unwrap();
    assert_eq!(ds.class_counts(), vec![100; 7]);
    assert!(stratified_within_one(&ds, &SplitFractions::default()));
    for r in &ds.records {
        let n = r.event_class.reflection_count();
        assert_eq!(r.mask.iter().filter(|&&m| m).count(), n);
        for k in 0..2 {
            if r.mask[k] {
                assert!((0.0..1.0).contains(&r.positions[k]));
            } else {
                assert_eq!((r.positions[k], r.levels[k]), (0.0, 0.0));
            }
        }
        assert_eq!(r.values.len(), 30);
    }
}

#[test]
fn datasets_are_byte_deterministic() {
    let topo = PonTopology::default();
    let sim = SimConfig::default();
    let a = encode_dataset(&build_network_dataset(&topo, &sim, &small_network(9)).unwrap()).unwrap();
    let b = encode_dataset(&build_network_dataset(&topo, &sim, &small_network(9)).unwrap()).unwrap();
    let c = encode_dataset(&build_network_dataset(&topo, &sim, &small_network(10)).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    let a = encode_dataset(&build_generic_dataset(&topo, &sim, &small_generic(9)).unwrap()).unwrap();
    let b = encode_dataset(&build_generic_dataset(&topo, &sim, &small_generic(9)).unwrap()).unwrap();
    assert_eq!(a, b);
}
