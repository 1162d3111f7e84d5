use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DynamicsError;

const SEDAN_JSON: &str = include_str!("../../presets/sedan.json");
const SPORTS_COUPE_JSON: &str = include_str!("../../presets/sports_coupe.json");

/// Physical parameters of the bicycle model, SI units throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// kg·m²
    pub yaw_inertia: f64,
    /// CG to front axle, m
    pub dist_front_axle: f64,
    /// CG to rear axle, m
    pub dist_rear_axle: f64,
    /// N/rad
    pub cornering_stiff_front: f64,
    /// N/rad
    pub cornering_stiff_rear: f64,
    /// N, at throttle = 1
    pub max_drive_force: f64,
    /// N, at brake = 1
    pub max_brake_force: f64,
    /// Road-wheel angle at steering = ±1, rad
    pub max_steer_angle: f64,
    /// N·s²/m²
    pub drag_coeff: f64,
    /// N·s/m
    pub rolling_coeff: f64,
    pub friction_coeff: f64,
    pub body_length: f64,
    pub body_width: f64,
}

impl VehicleParams {
    pub fn sedan() -> Self {
        VehiclePreset::Sedan.params()
    }

    pub fn sports_coupe() -> Self {
        VehiclePreset::SportsCoupe.params()
    }

    pub fn wheelbase(&self) -> f64 {
        self.dist_front_axle + self.dist_rear_axle
    }

    /// Peak longitudinal acceleration from the drivetrain alone, m/s².
    pub fn drive_accel(&self) -> f64 {
        self.max_drive_force / self.mass
    }

    pub fn from_json_str(text: &str) -> Result<Self, DynamicsError> {
        let params: Self = serde_json::from_str(text).map_err(|e| DynamicsError::InvalidParams(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn from_json_file(path: &Path) -> Result<Self, DynamicsError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DynamicsError::InvalidParams(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Resolves a preset name (`sedan`, `sports_coupe`) or a path to a JSON file.
    pub fn resolve(name_or_path: &str) -> Result<Self, DynamicsError> {
        match name_or_path.parse::<VehiclePreset>() {
            Ok(preset) => Ok(preset.params()),
            Err(_) if name_or_path.ends_with(".json") => Self::from_json_file(Path::new(name_or_path)),
            Err(e) => Err(e),
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let positive = [
            ("mass", self.mass),
            ("yaw_inertia", self.yaw_inertia),
            ("dist_front_axle", self.dist_front_axle),
            ("dist_rear_axle", self.dist_rear_axle),
            ("cornering_stiff_front", self.cornering_stiff_front),
            ("cornering_stiff_rear", self.cornering_stiff_rear),
            ("max_drive_force", self.max_drive_force),
            ("max_brake_force", self.max_brake_force),
            ("max_steer_angle", self.max_steer_angle),
            ("friction_coeff", self.friction_coeff),
            ("body_length", self.body_length),
            ("body_width", self.body_width),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(DynamicsError::InvalidParams(format!("{name} must be strictly positive, got {value}")));
            }
        }
        for (name, value) in [("drag_coeff", self.drag_coeff), ("rolling_coeff", self.rolling_coeff)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(DynamicsError::InvalidParams(format!("{name} must be non-negative, got {value}")));
            }
        }
        if self.friction_coeff > 2.0 {
            return Err(DynamicsError::InvalidParams(format!(
                "friction_coeff must lie in (0, 2], got {}",
                self.friction_coeff
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehiclePreset {
    Sedan,
    SportsCoupe,
}

impl VehiclePreset {
    pub const ALL: [VehiclePreset; 2] = [VehiclePreset::Sedan, VehiclePreset::SportsCoupe];

    pub fn name(&self) -> &'static str {
        match self {
            VehiclePreset::Sedan => "sedan",
            VehiclePreset::SportsCoupe => "sports_coupe",
        }
    }

    pub fn json(&self) -> &'static str {
        match self {
            VehiclePreset::Sedan => SEDAN_JSON,
            VehiclePreset::SportsCoupe => SPORTS_COUPE_JSON,
        }
    }

    pub fn params(&self) -> VehicleParams {
        // Embedded presets are checked by the unit tests below.
        VehicleParams::from_json_str(self.json()).expect("embedded preset is valid")
    }
}

impl fmt::Display for VehiclePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VehiclePreset {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sedan" => Ok(VehiclePreset::Sedan),
            "sports_coupe" | "coupe" => Ok(VehiclePreset::SportsCoupe),
            other => Err(DynamicsError::InvalidParams(format!("unknown vehicle preset '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        for preset in VehiclePreset::ALL {
            preset.params().validate().unwrap();
        }
    }

    #[test]
    fn preset_geometry() {
        let sedan = VehicleParams::sedan();
        let coupe = VehicleParams::sports_coupe();
        assert!((sedan.wheelbase() - 2.8).abs() < 1e-12);
        assert!((coupe.wheelbase() - 2.4).abs() < 1e-12);
        // rear-biased split: CG sits closer to the rear axle
        assert!(coupe.dist_rear_axle < coupe.dist_front_axle);
        assert!(coupe.drive_accel() > sedan.drive_accel());
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = VehicleParams::sedan();
        p.mass = 0.0;
        assert!(p.validate().is_err());
        let mut p = VehicleParams::sedan();
        p.friction_coeff = 2.5;
        assert!(p.validate().is_err());
        let mut p = VehicleParams::sedan();
        p.drag_coeff = 0.0;
        p.rolling_coeff = 0.0;
        assert!(p.validate().is_ok());
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = SEDAN_JSON.replace("\"mass\"", "\"masss\"");
        assert!(VehicleParams::from_json_str(&text).is_err());
    }

    #[test]
    fn resolve_names() {
        assert_eq!(VehicleParams::resolve("sedan").unwrap(), VehicleParams::sedan());
        assert_eq!(VehicleParams::resolve("sports_coupe").unwrap(), VehicleParams::sports_coupe());
        assert!(VehicleParams::resolve("truck").is_err());
    }
}
