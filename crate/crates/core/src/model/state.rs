//! State and action spaces of the contingency management model.
//!
//! A live (non-absorbing) state is the tuple `{FS, MH, MM, BH, RM}`; there
//! are 3·3·2·3·2 = 108 of them, indexed row-major in that field order. Four
//! absorbing states follow: `C` (complete), `T` (terminated), `FL`
//! (failure) and `E` (end), for 112 states in total.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::CmaError;

/// Number of factored (live) states.
pub const NUM_FACTORED: usize = 108;
/// Total number of states including the four absorbing ones.
pub const NUM_STATES: usize = 112;
/// Number of actions.
pub const NUM_ACTIONS: usize = 4;

macro_rules! feature_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident = $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(
                #[serde(rename = $label)]
                $variant,
            )+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];
            pub const LABELS: &'static [&'static str] = &[$($label),+];

            #[inline]
            pub fn index(self) -> usize {
                self as usize
            }

            #[inline]
            pub fn from_index(i: usize) -> Option<Self> {
                Self::ALL.get(i).copied()
            }

            pub fn label(self) -> &'static str {
                Self::LABELS[self.index()]
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }

        impl FromStr for $name {
            type Err = CmaError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::LABELS
                    .iter()
                    .position(|l| l.eq_ignore_ascii_case(s))
                    .map(|i| Self::ALL[i])
                    .ok_or_else(|| CmaError::Parse(format!(
                        "unknown {} value '{}'", stringify!($name), s
                    )))
            }
        }
    };
}

feature_enum!(
    /// Flight status.
    FlightStatus { Nominal = "N", EmergencyAsap = "ELASAP", EmergencyPract = "ELPract" }
);
feature_enum!(
    /// Motor health: no fault, spalling fault, jam fault.
    MotorHealth { NoFault = "NF", Spalling = "SF", Jam = "JF" }
);
feature_enum!(
    /// Sign-discretized motor margin.
    MotorMargin { Negative = "MM0", NonNegative = "MM1" }
);
feature_enum!(
    /// Battery health class, constant within a flight.
    BatteryHealth { Good = "G", Medium = "M", Poor = "P" }
);
feature_enum!(
    /// Sign-discretized reachability margin.
    ReachMargin { Negative = "RM0", NonNegative = "RM1" }
);
feature_enum!(
    /// Absorbing states.
    Absorbing { Complete = "C", Terminated = "T", Failure = "FL", End = "E" }
);
feature_enum!(
    /// Contingency actions. The declaration order is the tie-break order.
    Action { NoOp = "NoOp", Terminate = "Terminate", LandAsap = "LandASAP", LandPract = "LandPract" }
);

impl Action {
    /// True for the actions that deviate from the nominal flight plan.
    pub fn is_contingency(self) -> bool {
        !matches!(self, Action::NoOp)
    }
}

/// A live state of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FactoredState {
    pub fs: FlightStatus,
    pub mh: MotorHealth,
    pub mm: MotorMargin,
    pub bh: BatteryHealth,
    pub rm: ReachMargin,
}

impl FactoredState {
    pub fn new(
        fs: FlightStatus,
        mh: MotorHealth,
        mm: MotorMargin,
        bh: BatteryHealth,
        rm: ReachMargin,
    ) -> Self {
        Self { fs, mh, mm, bh, rm }
    }

    /// Nominal mission start for a given battery health.
    pub fn nominal(bh: BatteryHealth) -> Self {
        Self::new(
            FlightStatus::Nominal,
            MotorHealth::NoFault,
            MotorMargin::NonNegative,
            bh,
            ReachMargin::NonNegative,
        )
    }

    pub fn index(&self) -> usize {
        (((self.fs.index() * 3 + self.mh.index()) * 2 + self.mm.index()) * 3 + self.bh.index()) * 2
            + self.rm.index()
    }

    pub fn from_index(i: usize) -> Option<Self> {
        if i >= NUM_FACTORED {
            return None;
        }
        let rm = i % 2;
        let bh = (i / 2) % 3;
        let mm = (i / 6) % 2;
        let mh = (i / 12) % 3;
        let fs = i / 36;
        Some(Self::new(
            FlightStatus::ALL[fs],
            MotorHealth::ALL[mh],
            MotorMargin::ALL[mm],
            BatteryHealth::ALL[bh],
            ReachMargin::ALL[rm],
        ))
    }

    pub fn all() -> impl Iterator<Item = FactoredState> {
        (0..NUM_FACTORED).map(|i| Self::from_index(i).unwrap())
    }
}

impl fmt::Display for FactoredState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{},{},{},{},{}}}", self.fs, self.mh, self.mm, self.bh, self.rm)
    }
}

/// Index into the full 112-element state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(u8);

/// Decoded form of a [`StateId`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum State {
    Live(FactoredState),
    Absorbing(Absorbing),
}

impl StateId {
    pub const COMPLETE: StateId = StateId(108);
    pub const TERMINATED: StateId = StateId(109);
    pub const FAILURE: StateId = StateId(110);
    pub const END: StateId = StateId(111);

    pub fn new(index: usize) -> Result<Self, CmaError> {
        if index < NUM_STATES {
            Ok(StateId(index as u8))
        } else {
            Err(CmaError::Domain(format!("state index {index} out of range 0..{NUM_STATES}")))
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = StateId> {
        (0..NUM_STATES as u8).map(StateId)
    }

    pub fn encode(state: State) -> StateId {
        match state {
            State::Live(f) => StateId(f.index() as u8),
            State::Absorbing(a) => StateId((NUM_FACTORED + a.index()) as u8),
        }
    }

    pub fn decode(self) -> State {
        let i = self.index();
        if i < NUM_FACTORED {
            State::Live(FactoredState::from_index(i).unwrap())
        } else {
            State::Absorbing(Absorbing::ALL[i - NUM_FACTORED])
        }
    }

    #[inline]
    pub fn is_absorbing(self) -> bool {
        self.index() >= NUM_FACTORED
    }

    pub fn factored(self) -> Option<FactoredState> {
        FactoredState::from_index(self.index())
    }

    pub fn absorbing(self) -> Option<Absorbing> {
        self.index().checked_sub(NUM_FACTORED).map(|i| Absorbing::ALL[i])
    }
}

impl From<FactoredState> for StateId {
    fn from(f: FactoredState) -> Self {
        StateId(f.index() as u8)
    }
}

impl From<Absorbing> for StateId {
    fn from(a: Absorbing) -> Self {
        StateId((NUM_FACTORED + a.index()) as u8)
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.decode() {
            State::Live(s) => s.fmt(f),
            State::Absorbing(a) => a.fmt(f),
        }
    }
}

/// Actions available in a state. Emergency flight statuses remove the
/// landing options that are already committed to.
pub fn legal_actions(s: StateId) -> &'static [Action] {
    match s.factored() {
        None => &[Action::NoOp],
        Some(f) => legal_actions_for_status(f.fs),
    }
}

/// Legal actions for a live state with the given flight status.
pub fn legal_actions_for_status(fs: FlightStatus) -> &'static [Action] {
    match fs {
        FlightStatus::Nominal => Action::ALL,
        FlightStatus::EmergencyPract => &[Action::NoOp, Action::Terminate, Action::LandAsap],
        FlightStatus::EmergencyAsap => &[Action::NoOp, Action::Terminate],
    }
}

pub fn is_legal(s: StateId, a: Action) -> bool {
    legal_actions(s).contains(&a)
}
