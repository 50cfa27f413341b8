//! Two-band attenuation model and effective-Z recovery.
//!
//! Mass attenuation in band `E` is `a_E * Z^p / E^q + b_E` (cm^2/g), a
//! photoelectric term plus a flat Compton term. For a single material the
//! ratio `ln(I_low) / ln(I_high)` equals `mu_low / mu_high`, which depends
//! on `Z` only, so a table of that ratio over `Z` inverts it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_CONFIG: &str = include_str!("../../config/physics.json");

pub const Z_MIN: f64 = 1.0;
pub const Z_MAX: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBand {
    pub energy_kev: f64,
    pub photoelectric: f64,
    pub compton: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    pub low: EnergyBand,
    pub high: EnergyBand,
    pub z_exponent: f64,
    pub energy_exponent: f64,
    /// Z spacing of the ratio calibration table.
    pub calibration_step: f64,
    /// Effective Z below this is colored orange.
    pub organic_below: f64,
    /// Effective Z from this up is colored blue; in between is green.
    pub metal_from: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_CONFIG).expect("bundled physics config parses")
    }
}

impl PhysicsConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Low,
    High,
}

/// Homogeneous material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// Effective atomic number.
    pub z: f64,
    /// g/cm^3.
    pub density: f64,
}

impl Material {
    pub const WATER: Material = Material { z: 7.42, density: 1.0 };
    pub const STEEL: Material = Material { z: 26.0, density: 7.87 };
    pub const ALUMINIUM: Material = Material { z: 13.0, density: 2.70 };

    pub fn new(z: f64, density: f64) -> Result<Self> {
        if !(Z_MIN..=Z_MAX).contains(&z) || !(density > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "material needs Z in [1, 100] and positive density, got Z={z} rho={density}"
            )));
        }
        Ok(Material { z, density })
    }
}

/// Coarse material class shown by the false-color palette.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HueClass {
    /// Organic, low Z.
    Orange,
    /// Intermediate Z.
    Green,
    /// Metallic.
    Blue,
}

#[derive(Debug, Clone)]
pub struct Physics {
    config: PhysicsConfig,
    /// `(z, ratio)` with ratio strictly increasing.
    calibration: Vec<(f64, f64)>,
}

impl Default for Physics {
    fn default() -> Self {
        Physics::new(PhysicsConfig::default()).expect("bundled physics config is valid")
    }
}

impl Physics {
    pub fn new(config: PhysicsConfig) -> Result<Self> {
        let bands_ok = [config.low, config.high].iter().all(|b| {
            b.energy_kev > 0.0 && b.photoelectric >= 0.0 && b.compton > 0.0
        });
        if !bands_ok || !(config.calibration_step > 0.0) {
            return Err(Error::InvalidConfig("physics bands must be positive".into()));
        }
        if !(config.organic_below < config.metal_from) {
            return Err(Error::InvalidConfig(
                "organic band edge must lie below the metal band edge".into(),
            ));
        }
        let mut physics = Physics {
            config,
            calibration: Vec::new(),
        };
        let steps = ((Z_MAX - Z_MIN) / physics.config.calibration_step).round() as usize;
        let mut table = Vec::with_capacity(steps + 1);
        for i in 0..=steps {
            let z = (Z_MIN + i as f64 * physics.config.calibration_step).min(Z_MAX);
            table.push((z, physics.ratio_for_z(z)));
        }
        if table.windows(2).any(|w| !(w[1].1 > w[0].1)) {
            return Err(Error::InvalidConfig(
                "attenuation ratio must increase with Z to be invertible".into(),
            ));
        }
        physics.calibration = table;
        Ok(physics)
    }

    pub fn config(&self) -> &PhysicsConfig {
        &self.config
    }

    fn band(&self, band: Band) -> &EnergyBand {
        match band {
            Band::Low => &self.config.low,
            Band::High => &self.config.high,
        }
    }

    /// cm^2/g.
    pub fn mass_attenuation(&self, z: f64, band: Band) -> f64 {
        let b = self.band(band);
        b.photoelectric * z.powf(self.config.z_exponent)
            / b.energy_kev.powf(self.config.energy_exponent)
            + b.compton
    }

    /// Per millimetre.
    pub fn linear_attenuation(&self, material: &Material, band: Band) -> f64 {
        material.density * self.mass_attenuation(material.z, band) / 10.0
    }

    pub fn ratio_for_z(&self, z: f64) -> f64 {
        self.mass_attenuation(z, Band::Low) / self.mass_attenuation(z, Band::High)
    }

    /// Inverts the calibration table by linear interpolation, clamping to
    /// `[Z_MIN, Z_MAX]`.
    pub fn z_eff(&self, ratio: f64) -> f64 {
        let table = &self.calibration;
        if ratio <= table[0].1 {
            return table[0].0;
        }
        let last = table[table.len() - 1];
        if ratio >= last.1 {
            return last.0;
        }
        let hi = table.partition_point(|&(_, r)| r < ratio);
        let (z0, r0) = table[hi - 1];
        let (z1, r1) = table[hi];
        z0 + (z1 - z0) * (ratio - r0) / (r1 - r0)
    }

    /// `None` for a pixel with no material in either band.
    pub fn z_eff_from_transmission(&self, low: f64, high: f64) -> Option<f64> {
        if low >= 1.0 || high >= 1.0 {
            return None;
        }
        Some(self.z_eff(low.ln() / high.ln()))
    }

    pub fn hue_class(&self, z_eff: f64) -> HueClass {
        if z_eff < self.config.organic_below {
            HueClass::Orange
        } else if z_eff < self.config.metal_from {
            HueClass::Green
        } else {
            HueClass::Blue
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_is_invertible() {
        let p = Physics::default();
        for z in [1.5, 7.42, 13.0, 26.0, 50.0, 82.0] {
            let back = p.z_eff(p.ratio_for_z(z));
            assert!((back - z).abs() < 0.05, "z {z} -> {back}");
        }
    }

    #[test]
    fn hue_bands() {
        let p = Physics::default();
        assert_eq!(p.hue_class(7.4), HueClass::Orange);
        assert_eq!(p.hue_class(10.0), HueClass::Green);
        assert_eq!(p.hue_class(17.9), HueClass::Green);
        assert_eq!(p.hue_class(18.0), HueClass::Blue);
    }

    #[test]
    fn single_chord_ratio_is_thickness_free() {
        let p = Physics::default();
        let mu_l = p.linear_attenuation(&Material::STEEL, Band::Low);
        let mu_h = p.linear_attenuation(&Material::STEEL, Band::High);
        for t in [1.0, 5.0, 20.0] {
            let z = p
                .z_eff_from_transmission((-mu_l * t).exp(), (-mu_h * t).exp())
                .unwrap();
            assert!((z - 26.0).abs() < 0.5);
        }
    }

    #[test]
    fn non_monotone_config_is_rejected() {
        let mut cfg = PhysicsConfig::default();
        cfg.high.photoelectric = 1e6;
        assert!(Physics::new(cfg).is_err());
    }

    #[test]
    fn material_bounds() {
        assert!(Material::new(0.5, 1.0).is_err());
        assert!(Material::new(8.0, 0.0).is_err());
        assert!(Material::new(8.0, 1.0).is_ok());
    }
}
