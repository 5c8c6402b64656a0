// SPDX-License-Identifier: Apache-2.0
//! Physical constants and unit conversions. Everything inside the crate is in
//! atomic units (hartree, bohr, electron masses, ħ = 1); the conversions below
//! are only applied at I/O boundaries.

/// Hartree in kcal/mol.
pub const HARTREE_KCAL_MOL: f64 = 627.509_474_063_1;
/// Hartree expressed as a frequency E/h in THz.
pub const HARTREE_THZ: f64 = 6_579.683_920_502;
/// Atomic unit of time in femtoseconds.
pub const AU_TIME_FS: f64 = 0.024_188_843_265_857_47;
/// Bohr radius in ångström.
pub const BOHR_ANGSTROM: f64 = 0.529_177_210_903;
/// Dalton in electron masses.
pub const AMU_ME: f64 = 1_822.888_486_209;
/// Proton mass in electron masses.
pub const PROTON_MASS_ME: f64 = 1_836.152_673_43;

pub fn fs_to_au(t_fs: f64) -> f64 {
    t_fs / AU_TIME_FS
}

pub fn au_to_fs(t_au: f64) -> f64 {
    t_au * AU_TIME_FS
}

pub fn angstrom_to_bohr(x: f64) -> f64 {
    x / BOHR_ANGSTROM
}

pub fn hartree_to_kcal(e: f64) -> f64 {
    e * HARTREE_KCAL_MOL
}

pub fn kcal_to_hartree(e: f64) -> f64 {
    e / HARTREE_KCAL_MOL
}

pub fn hartree_to_thz(e: f64) -> f64 {
    e * HARTREE_THZ
}

pub fn thz_to_hartree(f: f64) -> f64 {
    f / HARTREE_THZ
}

pub fn thz_to_kcal(f: f64) -> f64 {
    hartree_to_kcal(thz_to_hartree(f))
}

/// Length or angle unit attached to a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordUnit {
    Bohr,
    Angstrom,
    Radian,
    Degree,
}

impl CoordUnit {
    /// Factor converting a value in this unit to the internal unit (bohr or radian).
    pub fn to_internal(self) -> f64 {
        match self {
            CoordUnit::Bohr | CoordUnit::Radian => 1.0,
            CoordUnit::Angstrom => 1.0 / BOHR_ANGSTROM,
            CoordUnit::Degree => std::f64::consts::PI / 180.0,
        }
    }
}

/// Energy unit tag for potential surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyUnit {
    Hartree,
    KcalMol,
    Thz,
}

impl EnergyUnit {
    pub fn to_hartree(self) -> f64 {
        match self {
            EnergyUnit::Hartree => 1.0,
            EnergyUnit::KcalMol => 1.0 / HARTREE_KCAL_MOL,
            EnergyUnit::Thz => 1.0 / HARTREE_THZ,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hartree" | "ha" | "au" => Some(EnergyUnit::Hartree),
            "kcal/mol" | "kcalmol" | "kcal" => Some(EnergyUnit::KcalMol),
            "thz" => Some(EnergyUnit::Thz),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EnergyUnit::Hartree => "hartree",
            EnergyUnit::KcalMol => "kcal/mol",
            EnergyUnit::Thz => "thz",
        }
    }
}
