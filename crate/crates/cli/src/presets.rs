//! Bundled configurations reproducing the standard runs.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preset {
    pub name: &'static str,
    /// Subcommand the preset is written for.
    pub command: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig2-moments",
        command: "pulse-stats",
        summary: "intensity moment ratios, Gaussian noise, 1/sigma_omega = 2, tau_s = 10",
        text: include_str!("../presets/fig2-moments.toml"),
    },
    Preset {
        name: "chi10-pulse-stats",
        command: "pulse-stats",
        summary: "full pulse statistics at chi = 10, tau_s = 3",
        text: include_str!("../presets/chi10-pulse-stats.toml"),
    },
    Preset {
        name: "fig3a",
        command: "single-scan",
        summary: "Fourier-limited single resonance, tau_s = 3, Omega_s0 in {0.5, 1, 2, 4}",
        text: include_str!("../presets/fig3a.toml"),
    },
    Preset {
        name: "fig4",
        command: "single-scan",
        summary: "chaotic single resonance, tau_s = 3, chi in {1.67, 2.5, 5, 10}, Omega_s0 in {0.1, 0.5, 1, 2}",
        text: include_str!("../presets/fig4.toml"),
    },
    Preset {
        name: "fig5b",
        command: "single-scan",
        summary: "noise types and phase diffusion at chi = 10, Omega_s0 = 2",
        text: include_str!("../presets/fig5b.toml"),
    },
    Preset {
        name: "fig7a",
        command: "dr-scan",
        summary: "arrangement I, chaotic probe, resonant pump, chi from 1.67 to 20",
        text: include_str!("../presets/fig7a.toml"),
    },
    Preset {
        name: "fig8a",
        command: "dr-scan",
        summary: "arrangement I doublet widths for Gaussian, exponential and sech noise",
        text: include_str!("../presets/fig8a.toml"),
    },
    Preset {
        name: "fig11a",
        command: "dr-scan",
        summary: "arrangement II, chaotic pump, resonant pump detuning",
        text: include_str!("../presets/fig11a.toml"),
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
