use mojikit::kinematics::{clamp_angle, joint_table, Joint, JointState, StructureId, JOINT_COUNT};
use proptest::prelude::*;

#[test]
fn table_matches_morphology() {
    let table = joint_table();
    assert_eq!(table.len(), 16);
    let expected: [(f64, f64, f64, f64); 8] = [
        (-40.0, 40.0, -40.0, 40.0),
        (-40.0, 40.0, -40.0, 40.0),
        (-40.0, 40.0, -40.0, 40.0),
        (-90.0, 90.0, 0.0, 90.0),
        (-90.0, 90.0, 0.0, 90.0),
        (-90.0, 90.0, 0.0, 90.0),
        (-90.0, 90.0, 0.0, 90.0),
        (-90.0, 90.0, 0.0, 90.0),
    ];
    for (s, want) in StructureId::ALL.iter().zip(expected) {
        let f = table[s.index() * 2];
        let r = table[s.index() * 2 + 1];
        assert_eq!((f.min_deg, f.max_deg, r.min_deg, r.max_deg), want, "{s}");
    }
}

proptest! {
    #[test]
    fn clamp_saturates_and_is_idempotent(idx in 0..JOINT_COUNT, angle in -1000.0f64..1000.0) {
        let joint = Joint::from_index(idx).unwrap();
        let spec = joint.spec();
        let c = clamp_angle(joint.structure, joint.axis, angle).unwrap();
        prop_assert!(c >= spec.min_deg && c <= spec.max_deg);
        prop_assert_eq!(clamp_angle(joint.structure, joint.axis, c).unwrap(), c);
        if angle <= spec.min_deg {
            prop_assert_eq!(c, spec.min_deg);
        } else if angle >= spec.max_deg {
            prop_assert_eq!(c, spec.max_deg);
        } else {
            prop_assert_eq!(c, angle);
        }
    }

    #[test]
    fn clamped_states_are_valid(angles in proptest::array::uniform16(-500.0f64..500.0)) {
        let mut state = JointState::from_angles(angles);
        for j in Joint::all() {
            state.set(j, j.clamp(state.get(j)));
        }
        prop_assert!(state.is_valid());
        prop_assert!(state.violations().is_empty());
    }
}

#[test]
fn clamp_hits_every_bound_exactly() {
    for j in Joint::all() {
        let spec = j.spec();
        for (probe, want) in [
            (spec.min_deg - 1e-9, spec.min_deg),
            (spec.min_deg, spec.min_deg),
            (spec.max_deg, spec.max_deg),
            (spec.max_deg + 1e-9, spec.max_deg),
            (f64::INFINITY, spec.max_deg),
            (f64::NEG_INFINITY, spec.min_deg),
        ] {
            assert_eq!(j.clamp(probe), want, "{j:?} {probe}");
        }
    }
}
