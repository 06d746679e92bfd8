//! Closed category enumerations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

macro_rules! category {
    ($(#[$m:meta])* $ty:ident { $($v:ident => $name:literal, $label:literal;)+ }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $ty {
            $($v,)+
        }

        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$v,)+];

            pub fn name(self) -> &'static str {
                match self {
                    $($ty::$v => $name,)+
                }
            }

            pub fn label(self) -> &'static str {
                match self {
                    $($ty::$v => $label,)+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.pad(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                $ty::ALL
                    .iter()
                    .copied()
                    .find(|c| c.name() == s)
                    .ok_or_else(|| format!("unknown {} {s:?}", stringify!($ty)))
            }
        }
    };
}

category!(IntentCategory {
    GreetingReunion => "greeting_reunion", "Greeting / Reunion";
    AffectionComfort => "affection_comfort", "Affection / Comfort";
    PlayTeasing => "play_teasing", "Play / Teasing";
    AttentionSeeking => "attention_seeking", "Attention-seeking";
    TrainingInstruction => "training_instruction", "Training / Instruction";
    BoundaryDiscipline => "boundary_discipline", "Boundary / Discipline";
    AvoidRefuse => "avoid_refuse", "Avoid / Refuse";
    Other => "other", "Other / Unclear";
});

category!(TriggerType {
    HumanAction => "human_action", "Human Action";
    EnvironmentalCue => "environmental_cue", "Environmental Cue";
    TemporalRoutine => "temporal_routine", "Temporal Routine";
    ProactiveRobot => "proactive_robot", "Proactive Robot";
});

category!(BehaviorPrimitive {
    HeadTurnNod => "head_turn_nod", "Head-turn / Nodding";
    Approach => "approach", "Approach / Move closer";
    TailWag => "tail_wag", "Tail-wagging";
    PawTapContact => "paw_tap_contact", "Paw-tapping / Contact";
    Vocalization => "vocalization", "Vocalization";
    LieCurlRoll => "lie_curl_roll", "Lie-down / Curl / Roll";
    RetreatAvoid => "retreat_avoid", "Retreat / Avoidance";
    OtherComplex => "other_complex", "Other complex sequences";
});

category!(AffectCategory {
    PositiveSeeking => "positive_seeking", "Positive-Seeking";
    PositiveComforting => "positive_comforting", "Positive-Comforting";
    NegativeAvoiding => "negative_avoiding", "Negative-Avoiding";
    DisciplinaryCorrective => "disciplinary_corrective", "Disciplinary / Corrective";
    AmbiguousMixed => "ambiguous_mixed", "Ambiguous / Mixed";
});

category!(CardModule {
    HumanCentric => "human_centric", "Human-centric";
    Environmental => "environmental", "Environmental";
    AnimalCentric => "animal_centric", "Animal-centric";
});

category!(Species {
    Cat => "cat", "Cat";
    Dog => "dog", "Dog";
});

impl AffectCategory {
    pub fn is_positive(self) -> bool {
        matches!(
            self,
            AffectCategory::PositiveSeeking | AffectCategory::PositiveComforting
        )
    }
}

impl BehaviorPrimitive {
    /// Bundled preset that best stands in for this primitive on the robot.
    pub fn suggested_preset(self) -> &'static str {
        match self {
            BehaviorPrimitive::HeadTurnNod => "nod",
            BehaviorPrimitive::Approach => "greet_combo",
            BehaviorPrimitive::TailWag => "tail_wag",
            BehaviorPrimitive::PawTapContact => "paw_tap",
            BehaviorPrimitive::Vocalization => "ear_perk",
            BehaviorPrimitive::LieCurlRoll => "curl_up",
            BehaviorPrimitive::RetreatAvoid => "head_shake",
            BehaviorPrimitive::OtherComplex => "roll",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::load_presets;

    #[test]
    fn enumeration_sizes() {
        assert_eq!(
            [
                IntentCategory::ALL.len(),
                TriggerType::ALL.len(),
                BehaviorPrimitive::ALL.len(),
                AffectCategory::ALL.len()
            ],
            [8, 4, 8, 5]
        );
    }

    #[test]
    fn names_round_trip_through_serde() {
        for b in BehaviorPrimitive::ALL {
            let json = serde_json::to_string(b).unwrap();
            assert_eq!(json, format!("\"{}\"", b.name()));
            assert_eq!(b.name().parse::<BehaviorPrimitive>().unwrap(), *b);
        }
        assert!("nope".parse::<TriggerType>().is_err());
    }

    #[test]
    fn suggested_presets_exist() {
        for b in BehaviorPrimitive::ALL {
            assert!(load_presets().get(b.suggested_preset()).is_some(), "{b}");
        }
    }
}
