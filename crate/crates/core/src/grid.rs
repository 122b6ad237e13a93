//! Tensor grids on the moduli cube [δ, 1]^m.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Lower end of every axis. Must be positive for log spacing; may be 0
    /// for linear spacing.
    pub delta: f64,
    pub points_per_axis: usize,
    pub log_spacing: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            delta: 1e-3,
            points_per_axis: 41,
            log_spacing: true,
        }
    }
}

impl GridSpec {
    pub fn log(delta: f64, points_per_axis: usize) -> Self {
        GridSpec {
            delta,
            points_per_axis,
            log_spacing: true,
        }
    }

    pub fn linear(delta: f64, points_per_axis: usize) -> Self {
        GridSpec {
            delta,
            points_per_axis,
            log_spacing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points_per_axis < 2 {
            return Err(Error::InvalidArgument(
                "grid needs at least 2 points per axis".into(),
            ));
        }
        let ok = if self.log_spacing {
            self.delta > 0.0 && self.delta < 1.0
        } else {
            self.delta >= 0.0 && self.delta < 1.0
        };
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "grid floor delta = {} out of range",
                self.delta
            )));
        }
        Ok(())
    }

    /// Axis nodes in increasing order; the last node is exactly 1.
    pub fn axis(&self) -> Vec<f64> {
        let p = self.points_per_axis;
        let last = (p - 1) as f64;
        (0..p)
            .map(|i| {
                if i == p - 1 {
                    1.0
                } else if self.log_spacing {
                    self.delta.powf((last - i as f64) / last)
                } else {
                    self.delta + (1.0 - self.delta) * i as f64 / last
                }
            })
            .collect()
    }

    pub fn len(&self, dim: usize) -> usize {
        self.points_per_axis.pow(dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.points_per_axis == 0
    }

    /// The `index`-th grid point in lexicographic order (last axis fastest).
    pub fn point(&self, axis: &[f64], dim: usize, mut index: usize) -> Vec<f64> {
        let p = self.points_per_axis;
        let mut x = vec![0.0; dim];
        for slot in x.iter_mut().rev() {
            *slot = axis[index % p];
            index /= p;
        }
        x
    }
}
