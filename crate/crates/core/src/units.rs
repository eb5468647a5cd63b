//! Physical constants. Internal units are MeV and fm throughout; time enters
//! only through `HBAR_MEV_S`.

/// ħc in MeV·fm.
pub const HBAR_C: f64 = 197.327;

/// e²/(4πε₀) in MeV·fm.
pub const E2: f64 = 1.43997;

/// Atomic mass unit in MeV.
pub const AMU: f64 = 931.494;

/// ħ in MeV·s.
pub const HBAR_MEV_S: f64 = 6.582119569e-22;

/// Reduced mass of ¹²C + ¹²C, μc² = 6 u.
pub const MU_C12_C12: f64 = 6.0 * AMU;

/// Z₁Z₂ for ¹²C + ¹²C.
pub const ZZ_C12_C12: f64 = 36.0;

/// Convert a time step in seconds to MeV⁻¹ (i.e. t/ħ).
pub fn seconds_to_inverse_mev(t: f64) -> f64 {
    t / HBAR_MEV_S
}
