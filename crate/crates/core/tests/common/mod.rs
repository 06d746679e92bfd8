#![allow(dead_code)]

use mojikit::kinematics::{AxisFamily, StructureId};
use mojikit::sequence::{MotionBlock, Sequence, Track};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Angle on the 0.1° grid inside the axis range.
pub fn grid_angle(rng: &mut impl Rng, structure: StructureId, family: AxisFamily) -> f64 {
    let spec = structure.joint(family).spec();
    let (lo, hi) = (spec.min_deg, spec.max_deg);
    let k = rng.random_range((lo * 10.0).round() as i64..=(hi * 10.0).round() as i64);
    k as f64 / 10.0
}

pub fn random_block(rng: &mut impl Rng, structure: StructureId, start_ms: u64) -> MotionBlock {
    let duration_ms = rng.random_range(1..=300u64) * 10 + rng.random_range(0..10u64);
    let delay_ms = if rng.random_bool(0.3) {
        0
    } else {
        rng.random_range(0..duration_ms)
    };
    MotionBlock {
        structure,
        f_deg: grid_angle(rng, structure, AxisFamily::Lift),
        r_deg: grid_angle(rng, structure, AxisFamily::Rotate),
        speed: rng.random_range(1..=5),
        delay_ms,
        start_ms,
        duration_ms,
    }
}

/// A valid sequence: up to 4 non-overlapping blocks on a random subset of
/// structures, with gaps and back-to-back blocks both likely.
pub fn random_sequence(seed: u64) -> Sequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tracks = Vec::new();
    for s in StructureId::ALL {
        if !rng.random_bool(0.6) {
            continue;
        }
        let mut t = rng.random_range(0..50u64) * 10;
        let mut blocks = Vec::new();
        for _ in 0..rng.random_range(1..=4) {
            let b = random_block(&mut rng, s, t);
            t = b.end_ms()
                + if rng.random_bool(0.4) {
                    0
                } else {
                    rng.random_range(1..500)
                };
            blocks.push(b);
        }
        tracks.push(Track::with_blocks(s, blocks));
    }
    Sequence::from_tracks(format!("random-{seed}"), tracks)
}
