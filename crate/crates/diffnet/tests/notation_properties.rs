//! Round-trip property tests for the architecture notation, plus the
//! designs used throughout the result tables.

use diffnet::parse_notation;
use proptest::prelude::*;

/// Generate valid (M, spec-string) pairs covering the whole grammar.
fn valid_notation() -> impl Strategy<Value = (usize, String)> {
    // groups divides M; layers, neurons arbitrary positive
    (1usize..=6, 1usize..=4, 1usize..=8, 1usize..=64, any::<bool>(), any::<bool>())
        .prop_map(|(groups, per_group, layers, p_base, differential, split)| {
            let classes = groups * per_group;
            let kilo_neurons = p_base * p_base; // k-suffix exercised
            let spec = if split {
                format!(
                    "D([{per_group}][{per_group}],[{},{layers},{kilo_neurons}k])",
                    2 * groups
                )
            } else if differential {
                format!("D([{per_group},{per_group}],[{groups},{layers},{kilo_neurons}k])")
            } else {
                format!("D([{per_group},0],[{groups},{layers},{kilo_neurons}k])")
            };
            (classes, spec)
        })
}

proptest! {
    #[test]
    fn parse_render_round_trip((classes, text) in valid_notation()) {
        let spec = parse_notation(&text, classes).unwrap();
        let rendered = spec.render();
        let again = parse_notation(&rendered, classes).unwrap();
        prop_assert_eq!(again, spec);
    }

    #[test]
    fn junk_never_panics(text in "\\PC*") {
        let _ = parse_notation(&text, 10);
    }

    #[test]
    fn junk_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        if let Ok(text) = std::str::from_utf8(&bytes) {
            let _ = parse_notation(text, 10);
        }
    }
}

/// Every architecture string printed in the comparison tables parses, and
/// the canonical rendering reproduces it.
#[test]
fn table_architectures_round_trip() {
    let designs = [
        "D([10,0],[1,5,40k])",
        "D([10,10],[1,5,40k])",
        "D([10][10],[2,5,40k])",
        "D([5,0],[2,5,40k])",
        "D([2,0],[5,5,40k])",
        "D([1,0],[10,5,40k])",
        "D([5,5],[2,5,40k])",
        "D([2,2],[5,5,40k])",
        "D([1,1],[10,5,40k])",
        "D([5][5],[4,5,40k])",
        "D([2][2],[10,5,40k])",
        "D([1][1],[20,5,40k])",
    ];
    for text in designs {
        let spec = parse_notation(text, 10)
            .unwrap_or_else(|e| panic!("`{text}` must parse: {e}"));
        assert_eq!(spec.render(), text);
        assert_eq!(spec.grid_size().unwrap(), 200);
        // every class routes to a valid network per sign
        for class in 0..10 {
            assert!(spec.positive_network_of(class) < spec.n_networks);
            if spec.is_differential() {
                let neg = spec.negative_network_of(class).unwrap();
                assert!(neg < spec.n_networks);
            } else {
                assert!(spec.negative_network_of(class).is_none());
            }
        }
    }
}
