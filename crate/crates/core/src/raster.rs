//! Dense per-pixel rasters: scalar maps (depth, plane distance, confidence),
//! 3-vector maps (normals, color) and boolean masks.
//!
//! Invalid samples are encoded as NaN; every consumer masks NaN.

use nalgebra::Vector3;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ScalarMap {
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// All-invalid map.
    pub fn invalid(width: usize, height: usize) -> Self {
        Self::filled(width, height, f64::NAN)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
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
    pub fn in_bounds(&self, u: usize, v: usize) -> bool {
        u < self.width && v < self.height
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        debug_assert!(self.in_bounds(u, v));
        self.data[v * self.width + u]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: f64) {
        debug_assert!(self.in_bounds(u, v));
        self.data[v * self.width + u] = value;
    }

    /// Valid means finite (not NaN, not infinite).
    #[inline]
    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        self.get(u, v).is_finite()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|x| x.is_finite()).count()
    }

    /// Bilinear sample at fractional pixel coordinates; NaN out of bounds or
    /// when any contributing sample is invalid.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> f64 {
        if !u.is_finite() || !v.is_finite() || u < 0.0 || v < 0.0 {
            return f64::NAN;
        }
        let u0 = u.floor() as usize;
        let v0 = v.floor() as usize;
        if u0 + 1 >= self.width + 1 || v0 + 1 >= self.height + 1 {
            return f64::NAN;
        }
        let u1 = (u0 + 1).min(self.width - 1);
        let v1 = (v0 + 1).min(self.height - 1);
        if u0 >= self.width || v0 >= self.height {
            return f64::NAN;
        }
        let fu = u - u0 as f64;
        let fv = v - v0 as f64;
        let a = self.get(u0, v0);
        let b = self.get(u1, v0);
        let c = self.get(u0, v1);
        let d = self.get(u1, v1);
        a * (1.0 - fu) * (1.0 - fv) + b * fu * (1.0 - fv) + c * (1.0 - fu) * fv + d * fu * fv
    }

    /// Resize with bilinear interpolation (used for dense depth priors).
    pub fn resize_bilinear(&self, width: usize, height: usize) -> ScalarMap {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        ScalarMap::from_fn(width, height, |u, v| {
            let su = ((u as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
            let sv = ((v as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            self.sample_bilinear(su, sv)
        })
    }

    /// Resize with nearest-neighbor sampling (used for confidence maps).
    pub fn resize_nearest(&self, width: usize, height: usize) -> ScalarMap {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        ScalarMap::from_fn(width, height, |u, v| {
            let su = (((u as f64 + 0.5) * sx) as usize).min(self.width - 1);
            let sv = (((v as f64 + 0.5) * sy) as usize).min(self.height - 1);
            self.get(su, sv)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorMap {
    width: usize,
    height: usize,
    data: Vec<Vector3<f64>>,
}

impl VectorMap {
    pub fn filled(width: usize, height: usize, value: Vector3<f64>) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn invalid(width: usize, height: usize) -> Self {
        Self::filled(width, height, Vector3::repeat(f64::NAN))
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> Vector3<f64>,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self {
            width,
            height,
            data,
        }
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
    pub fn in_bounds(&self, u: usize, v: usize) -> bool {
        u < self.width && v < self.height
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Vector3<f64> {
        debug_assert!(self.in_bounds(u, v));
        self.data[v * self.width + u]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: Vector3<f64>) {
        debug_assert!(self.in_bounds(u, v));
        self.data[v * self.width + u] = value;
    }

    #[inline]
    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        let x = self.get(u, v);
        x.x.is_finite() && x.y.is_finite() && x.z.is_finite()
    }

    pub fn data(&self) -> &[Vector3<f64>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Vector3<f64>] {
        &mut self.data
    }

    pub fn valid_count(&self) -> usize {
        (0..self.height)
            .flat_map(|v| (0..self.width).map(move |u| (u, v)))
            .filter(|&(u, v)| self.is_valid(u, v))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoolMap {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BoolMap {
    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self {
            width,
            height,
            data,
        }
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
    pub fn in_bounds(&self, u: usize, v: usize) -> bool {
        u < self.width && v < self.height
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> bool {
        debug_assert!(self.in_bounds(u, v));
        self.data[v * self.width + u]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: bool) {
        debug_assert!(self.in_bounds(u, v));
        self.data[v * self.width + u] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    /// Dilation with a square structuring element of Chebyshev radius `r`.
    pub fn dilate(&self, r: usize) -> BoolMap {
        if r == 0 {
            return self.clone();
        }
        let ri = r as isize;
        BoolMap::from_fn(self.width, self.height, |u, v| {
            let (u, v) = (u as isize, v as isize);
            for dv in -ri..=ri {
                for du in -ri..=ri {
                    let (uu, vv) = (u + du, v + dv);
                    if uu >= 0
                        && vv >= 0
                        && (uu as usize) < self.width
                        && (vv as usize) < self.height
                        && self.get(uu as usize, vv as usize)
                    {
                        return true;
                    }
                }
            }
            false
        })
    }

    /// Erosion with a square structuring element of Chebyshev radius `r`.
    pub fn erode(&self, r: usize) -> BoolMap {
        if r == 0 {
            return self.clone();
        }
        let ri = r as isize;
        BoolMap::from_fn(self.width, self.height, |u, v| {
            let (u, v) = (u as isize, v as isize);
            for dv in -ri..=ri {
                for du in -ri..=ri {
                    let (uu, vv) = (u + du, v + dv);
                    if uu < 0
                        || vv < 0
                        || (uu as usize) >= self.width
                        || (vv as usize) >= self.height
                        || !self.get(uu as usize, vv as usize)
                    {
                        return false;
                    }
                }
            }
            true
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_sampling_interpolates() {
        let m = ScalarMap::from_fn(4, 4, |u, v| (u + v) as f64);
        assert_eq!(m.sample_bilinear(1.0, 1.0), 2.0);
        assert!((m.sample_bilinear(1.5, 1.0) - 2.5).abs() < 1e-12);
        assert!(m.sample_bilinear(-0.5, 0.0).is_nan());
    }

    #[test]
    fn dilate_then_erode_recovers_large_blocks() {
        let mut m = BoolMap::filled(16, 16, false);
        for v in 4..12 {
            for u in 4..12 {
                m.set(u, v, true);
            }
        }
        let closed = m.dilate(1).erode(1);
        assert_eq!(closed, m);
    }

    #[test]
    fn nan_is_invalid() {
        let mut m = ScalarMap::filled(2, 2, 1.0);
        m.set(0, 1, f64::NAN);
        assert!(!m.is_valid(0, 1));
        assert_eq!(m.valid_count(), 3);
    }
}
