use serde::{Deserialize, Serialize};

use super::HarnessError;

pub const DEFAULT_CORRIDOR_OFFSET: f64 = 6.0;
const WALL_THICKNESS: f64 = 1.0;
const WALL_HALF_LENGTH: f64 = 500.0;

/// Axis-aligned rectangular obstacle, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self, HarnessError> {
        let rect = Self { x_min, x_max, y_min, y_max };
        rect.check()?;
        Ok(rect)
    }

    fn check(&self) -> Result<(), HarnessError> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite());
        if !finite || self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(HarnessError::DegenerateObstacle(*self));
        }
        Ok(())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WorldModel {
    pub obstacles: Vec<Rect>,
}

impl WorldModel {
    pub fn open() -> Self {
        Self::default()
    }

    /// Two long wall strips whose inner faces sit at `y = ±offset`.
    pub fn corridor(offset: f64) -> Result<Self, HarnessError> {
        if !(offset.is_finite() && offset > 0.0) {
            return Err(HarnessError::UnknownWorld(format!("corridor offset {offset}")));
        }
        Self::with_obstacles(vec![
            Rect::new(-WALL_HALF_LENGTH, WALL_HALF_LENGTH, offset, offset + WALL_THICKNESS)?,
            Rect::new(-WALL_HALF_LENGTH, WALL_HALF_LENGTH, -offset - WALL_THICKNESS, -offset)?,
        ])
    }

    pub fn with_obstacles(obstacles: Vec<Rect>) -> Result<Self, HarnessError> {
        for o in &obstacles {
            o.check()?;
        }
        Ok(Self { obstacles })
    }

    /// `open`, `corridor`, or `corridor:<offset>`.
    pub fn resolve(name: &str) -> Result<Self, HarnessError> {
        match name {
            "open" => Ok(Self::open()),
            "corridor" => Self::corridor(DEFAULT_CORRIDOR_OFFSET),
            other => match other.strip_prefix("corridor:").map(str::parse::<f64>) {
                Some(Ok(offset)) => Self::corridor(offset),
                _ => Err(HarnessError::UnknownWorld(other.to_string())),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_rect_rejected() {
        assert!(Rect::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(Rect::new(0.0, 1.0, 2.0, 1.0).is_err());
        assert!(Rect::new(0.0, f64::NAN, 0.0, 1.0).is_err());
    }

    #[test]
    fn resolve_presets() {
        assert!(WorldModel::resolve("open").unwrap().obstacles.is_empty());
        let c = WorldModel::resolve("corridor").unwrap();
        assert_eq!(c.obstacles.len(), 2);
        assert_eq!(c.obstacles[0].y_min, 6.0);
        assert_eq!(c.obstacles[1].y_max, -6.0);
        assert_eq!(WorldModel::resolve("corridor:8").unwrap().obstacles[0].y_min, 8.0);
        assert!(WorldModel::resolve("moon").is_err());
        assert!(WorldModel::resolve("corridor:-1").is_err());
    }
}
