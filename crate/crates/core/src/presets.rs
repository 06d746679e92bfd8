//! Bundled preset action library.

use std::sync::OnceLock;

use crate::sequence::{import_sequence, Sequence};

macro_rules! preset_files {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../data/presets/", $name, ".json")))),*]
    };
}

/// Preset documents in palette order.
pub const PRESET_DOCUMENTS: &[(&str, &str)] = preset_files![
    "paw_lift",
    "nod",
    "tail_wag",
    "head_turn_left",
    "head_turn_right",
    "head_shake",
    "ear_perk",
    "ear_fold",
    "paw_tap",
    "both_paws_up",
    "curl_up",
    "roll",
    "stretch",
    "tail_curl",
    "greet_combo",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PresetLibrary {
    presets: Vec<Sequence>,
}

impl PresetLibrary {
    pub fn len(&self) -> usize {
        self.presets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.presets.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Sequence> {
        self.presets.iter().find(|p| p.name() == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.presets.iter().map(Sequence::name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Sequence> {
        self.presets.iter()
    }
}

/// The bundled library. Panics if a bundled document is corrupt, which the
/// crate's tests rule out.
pub fn load_presets() -> &'static PresetLibrary {
    static LIBRARY: OnceLock<PresetLibrary> = OnceLock::new();
    LIBRARY.get_or_init(|| {
        let presets = PRESET_DOCUMENTS
            .iter()
            .map(|(name, doc)| {
                let seq = import_sequence(doc)
                    .unwrap_or_else(|e| panic!("bundled preset `{name}` is corrupt: {e}"));
                assert_eq!(
                    seq.name(),
                    *name,
                    "preset file name and document name differ"
                );
                seq
            })
            .collect();
        PresetLibrary { presets }
    })
}
