mod common;

use common::{random_block, random_sequence};
use mojikit::kinematics::StructureId;
use mojikit::sequence::{
    export_sequence, import_sequence, insert_block, parse_sequence, validate_sequence, InsertError,
    Sequence,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_sequences_are_valid(seed in any::<u64>()) {
        let seq = random_sequence(seed);
        prop_assert!(validate_sequence(&seq).is_ok(), "{}", validate_sequence(&seq));
    }

    #[test]
    fn export_import_round_trip(seed in any::<u64>()) {
        let seq = random_sequence(seed);
        let doc = export_sequence(&seq).unwrap();
        let back = import_sequence(&doc).unwrap();
        prop_assert_eq!(&back, &seq);
        prop_assert_eq!(export_sequence(&back).unwrap(), doc);
    }

    #[test]
    fn insert_keeps_sequences_valid(seed in any::<u64>(), start in 0u64..5000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seq = random_sequence(seed);
        let structure = StructureId::ALL[(seed % 8) as usize];
        let block = random_block(&mut rng, structure, start);
        match insert_block(&seq, block) {
            Ok(next) => {
                prop_assert!(validate_sequence(&next).is_ok());
                prop_assert_eq!(next.block_count(), seq.block_count() + 1);
            }
            Err(InsertError::Overlap { .. }) => {
                prop_assert!(seq.blocks().any(|b| b.structure == structure && b.overlaps(&block)));
            }
            Err(e) => prop_assert!(false, "unexpected {e:?}"),
        }
    }

    #[test]
    fn parse_never_panics(doc in ".{0,200}") {
        let _ = parse_sequence(&doc);
        let _ = import_sequence(&doc);
    }
}

#[test]
fn tracks_are_canonically_ordered_on_import() {
    let doc = r#"{"name":"x","version":1,"tracks":[
        {"structure":"tail","blocks":[]},
        {"structure":"ear_left","blocks":[]}]}"#;
    let seq = import_sequence(doc).unwrap();
    let order: Vec<_> = seq.tracks().iter().map(|t| t.structure).collect();
    assert_eq!(order, vec![StructureId::EarLeft, StructureId::Tail]);
    let again = import_sequence(&export_sequence(&seq).unwrap()).unwrap();
    assert_eq!(again, seq);
    assert_eq!(Sequence::new("x").name(), "x");
}
