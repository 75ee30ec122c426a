//! Optional physical-unit annotations. Computation stays in units of Γ₂.

use std::str::FromStr;

/// ħ in meV·fs.
const HBAR_MEV_FS: f64 = 658.211_956_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Units {
    pub name: &'static str,
    /// Γ₂ in meV.
    pub gamma2_mev: f64,
    /// Peak intensity at `Ω⁽⁰⁾ = Γ₂`, W/cm².
    pub intensity_at_unit_rabi: f64,
}

/// Kr 3d → 5p Auger resonance: Γ₂ = 83 meV; Rabi frequencies 0.1–2 Γ₂
/// correspond to roughly 1e14–1e17 W/cm².
pub const KR_3D5P: Units = Units {
    name: "kr-3d5p",
    gamma2_mev: 83.0,
    intensity_at_unit_rabi: 1e16,
};

impl Units {
    /// Length of one time unit `1/Γ₂` in fs.
    pub fn time_fs(&self) -> f64 {
        HBAR_MEV_FS / self.gamma2_mev
    }

    pub fn energy_mev(&self, x: f64) -> f64 {
        x * self.gamma2_mev
    }

    /// Approximate peak intensity for a peak Rabi frequency.
    pub fn intensity(&self, omega: f64) -> f64 {
        self.intensity_at_unit_rabi * omega * omega
    }

    pub fn header(&self) -> Vec<String> {
        vec![
            format!(
                "units: {}: Gamma2 = {} meV, 1/Gamma2 = {:.4} fs",
                self.name,
                self.gamma2_mev,
                self.time_fs()
            ),
            format!(
                "units: {}: I0 ~ {:e} W/cm^2 x (Omega0/Gamma2)^2 (order of magnitude)",
                self.name, self.intensity_at_unit_rabi
            ),
        ]
    }
}

impl FromStr for Units {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "kr-3d5p" => Ok(KR_3D5P),
            other => Err(format!(
                "unknown unit system '{other}' (available: kr-3d5p)"
            )),
        }
    }
}
