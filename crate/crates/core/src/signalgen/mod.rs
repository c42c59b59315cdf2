//! Synthetic labeled I/Q frames for eight digital modulations under AWGN,
//! plus the binary dataset file format.

pub mod channel;
pub mod dataset;
pub mod format;
pub mod frame;
pub mod modulate;

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

pub use channel::add_awgn;
pub use dataset::{generate_dataset, Dataset, GenConfig};
pub use format::{load_dataset, read_dataset, save_dataset, write_dataset};
pub use frame::{to_iq_frame, IqFrame};
pub use modulate::modulate;

/// Digital modulation schemes; the discriminant is the class id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum ModulationScheme {
    Psk8 = 0,
    Bpsk = 1,
    Cpfsk = 2,
    Gfsk = 3,
    Pam4 = 4,
    Qam16 = 5,
    Qam64 = 6,
    Qpsk = 7,
}

pub const NUM_CLASSES: usize = 8;

impl ModulationScheme {
    pub const ALL: [ModulationScheme; NUM_CLASSES] = [
        Self::Psk8,
        Self::Bpsk,
        Self::Cpfsk,
        Self::Gfsk,
        Self::Pam4,
        Self::Qam16,
        Self::Qam64,
        Self::Qpsk,
    ];

    pub fn class_id(self) -> u8 {
        self as u8
    }

    pub fn from_class_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Psk8 => "8PSK",
            Self::Bpsk => "BPSK",
            Self::Cpfsk => "CPFSK",
            Self::Gfsk => "GFSK",
            Self::Pam4 => "PAM4",
            Self::Qam16 => "QAM16",
            Self::Qam64 => "QAM64",
            Self::Qpsk => "QPSK",
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Self::Bpsk | Self::Cpfsk | Self::Gfsk => 1,
            Self::Qpsk | Self::Pam4 => 2,
            Self::Psk8 => 3,
            Self::Qam16 => 4,
            Self::Qam64 => 6,
        }
    }

    /// Class names in id order, as stored in dataset headers.
    pub fn class_names() -> Vec<String> {
        Self::ALL.iter().map(|s| s.name().to_string()).collect()
    }
}

impl fmt::Display for ModulationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModulationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown modulation {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_follow_listing_order() {
        let names: Vec<_> = ModulationScheme::ALL.iter().map(|m| m.name()).collect();
        assert_eq!(names, ["8PSK", "BPSK", "CPFSK", "GFSK", "PAM4", "QAM16", "QAM64", "QPSK"]);
        for (i, m) in ModulationScheme::ALL.iter().enumerate() {
            assert_eq!(m.class_id() as usize, i);
            assert_eq!(ModulationScheme::from_class_id(i as u8), Some(*m));
        }
        assert_eq!(ModulationScheme::from_class_id(8), None);
    }

    #[test]
    fn parse_names() {
        assert_eq!("qam16".parse::<ModulationScheme>().unwrap(), ModulationScheme::Qam16);
        assert_eq!("8PSK".parse::<ModulationScheme>().unwrap(), ModulationScheme::Psk8);
        assert!("WBFM".parse::<ModulationScheme>().is_err());
    }
}
