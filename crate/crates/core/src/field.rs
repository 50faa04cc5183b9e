//! Row-major scalar lattice used for both Oregonator species.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// One `f64` per lattice node, stored row-major (`index = y * width + x`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarField2D {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ScalarField2D {
    pub fn new(width: usize, height: usize, fill: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("field", "width and height must be positive"));
        }
        if !fill.is_finite() {
            return Err(Error::NonFinite("field fill value"));
        }
        Ok(Self {
            width,
            height,
            values: vec![fill; width * height],
        })
    }

    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("field", "width and height must be positive"));
        }
        if values.len() != width * height {
            return Err(invalid(
                "field",
                format!("{} values for a {width}x{height} lattice", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[self.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        let i = self.index(x, y);
        self.values[i] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub(crate) fn values_mut_vec(&mut self) -> &mut Vec<f64> {
        &mut self.values
    }

    /// Reflect across the vertical axis (`x -> width - 1 - x`).
    pub fn mirrored_x(&self) -> Self {
        let mut out = self.clone();
        for (src, dst) in self
            .values
            .chunks_exact(self.width)
            .zip(out.values.chunks_exact_mut(self.width))
        {
            for (d, s) in dst.iter_mut().zip(src.iter().rev()) {
                *d = *s;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_mismatched() {
        assert!(ScalarField2D::new(0, 3, 0.0).is_err());
        assert!(ScalarField2D::from_values(2, 2, vec![0.0; 3]).is_err());
        assert!(ScalarField2D::from_values(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn mirror_is_involution() {
        let f = ScalarField2D::from_values(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let m = f.mirrored_x();
        assert_eq!(m.values(), &[3.0, 2.0, 1.0, 6.0, 5.0, 4.0]);
        assert_eq!(m.mirrored_x(), f);
    }
}
