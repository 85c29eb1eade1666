//! Sparse mmWave downlink channels seen from the surface's uniform planar array.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cis, czero, is_finite_c, Cplx, Real};

/// Speed of light used to turn the carrier into a wavelength. The rounded
/// value keeps `k_f = 200π rad/m` exact at 30 GHz.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Per-user gain scaling used in the reference scenario, strongest user first.
pub const DEFAULT_SCALE_FACTORS: [f64; 6] = [1.2, 1.0, 0.8, 0.6, 0.4, 0.2];

/// Prefactor applied to the Kronecker steering vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayNormalization {
    /// `1/M`, every entry of the array response has modulus `1/M`.
    #[default]
    Literal,
    /// `1/√M`, the norm-preserving convention (unit-norm array response).
    Unitary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Square UPA layout of the surface as seen by the far-field channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry<T: Real> {
    pub side: usize,
    pub dx: T,
    pub dy: T,
    pub free_space_wavenumber: T,
    pub normalization: ArrayNormalization,
}

impl<T: Real> ArrayGeometry<T> {
    /// Geometry for `elements` (a perfect square) at `carrier_hz`, with
    /// element spacing `spacing_wavelengths · λ` on both axes.
    pub fn new(elements: usize, carrier_hz: f64, spacing_wavelengths: f64) -> Result<Self> {
        let side = perfect_square_side(elements)?;
        if !(carrier_hz > 0.0) || !(spacing_wavelengths > 0.0) {
            return Err(Error::InvalidConfig(
                "carrier and element spacing must be positive".into(),
            ));
        }
        let lambda = SPEED_OF_LIGHT / carrier_hz;
        let spacing = T::lit(spacing_wavelengths * lambda);
        Ok(Self {
            side,
            dx: spacing,
            dy: spacing,
            free_space_wavenumber: T::lit(2.0 * std::f64::consts::PI / lambda),
            normalization: ArrayNormalization::Literal,
        })
    }

    pub fn with_normalization(mut self, normalization: ArrayNormalization) -> Self {
        self.normalization = normalization;
        self
    }

    /// Total element count `M = side²`.
    pub fn elements(&self) -> usize {
        self.side * self.side
    }

    pub fn wavelength(&self) -> T {
        T::two() * T::PI() / self.free_space_wavenumber
    }
}

pub(crate) fn perfect_square_side(elements: usize) -> Result<usize> {
    let side = (elements as f64).sqrt().round() as usize;
    if elements == 0 || side * side != elements {
        return Err(Error::InvalidConfig(format!(
            "element count {elements} is not a non-zero perfect square"
        )));
    }
    Ok(side)
}

/// One propagation path of a user's channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRealization<T: Real> {
    pub gain: Cplx<T>,
    /// Elevation angle of departure in `[0, π/2]`.
    pub elevation: T,
    /// Azimuth angle of departure in `[0, 2π)`.
    pub azimuth: T,
}

/// Single-axis steering vector of length `√M`; entry `n` is
/// `exp(j·n·k_f·d·u)` with `u = sinθ cosφ` (x) or `sinθ sinφ` (y).
pub fn steering_vector_axis<T: Real>(
    axis: Axis,
    elevation: T,
    azimuth: T,
    geometry: &ArrayGeometry<T>,
) -> Array1<Cplx<T>> {
    let (spacing, direction) = match axis {
        Axis::X => (geometry.dx, elevation.sin() * azimuth.cos()),
        Axis::Y => (geometry.dy, elevation.sin() * azimuth.sin()),
    };
    let step = geometry.free_space_wavenumber * spacing * direction;
    Array1::from_shape_fn(geometry.side, |n| cis(T::from_count(n) * step))
}

/// Array response `norm · (a_x ⊗ a_y)`; element `m = ix·√M + iy`.
pub fn array_response<T: Real>(
    elevation: T,
    azimuth: T,
    geometry: &ArrayGeometry<T>,
) -> Array1<Cplx<T>> {
    let ax = steering_vector_axis(Axis::X, elevation, azimuth, geometry);
    let ay = steering_vector_axis(Axis::Y, elevation, azimuth, geometry);
    let m = T::from_count(geometry.elements());
    let prefactor = match geometry.normalization {
        ArrayNormalization::Literal => T::one() / m,
        ArrayNormalization::Unitary => T::one() / m.sqrt(),
    };
    let side = geometry.side;
    Array1::from_shape_fn(side * side, |idx| ax[idx / side] * ay[idx % side] * prefactor)
}

/// `scale · √(M/I) · Σ_i α_i a_t(θ_i, φ_i)`.
pub fn generate_channel<T: Real>(
    paths: &[PathRealization<T>],
    geometry: &ArrayGeometry<T>,
    scale: T,
) -> Result<Array1<Cplx<T>>> {
    if paths.is_empty() {
        return Err(Error::DegenerateChannel);
    }
    let m = geometry.elements();
    let amplitude = scale * (T::from_count(m) / T::from_count(paths.len())).sqrt();
    let mut h = Array1::from_elem(m, czero::<T>());
    for path in paths {
        let a = array_response(path.elevation, path.azimuth, geometry);
        h.zip_mut_with(&a, |acc, &ai| *acc += path.gain * ai);
    }
    Ok(h.mapv(|z| z * amplitude))
}

/// Draws `count` paths: CN(0,1) gains, elevation uniform on `[0, π/2]`,
/// azimuth uniform on `[0, 2π)`.
///
/// Samples are drawn in `f64` and converted, so every scalar type sees the
/// same realization for a given generator state.
pub fn sample_paths<T: Real, R: Rng + ?Sized>(rng: &mut R, count: usize) -> Vec<PathRealization<T>> {
    let half = std::f64::consts::FRAC_1_SQRT_2;
    (0..count)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let elevation = rng.random::<f64>() * std::f64::consts::FRAC_PI_2;
            let azimuth = rng.random::<f64>() * std::f64::consts::TAU;
            PathRealization {
                gain: Cplx::new(T::lit(re * half), T::lit(im * half)),
                elevation: T::lit(elevation),
                azimuth: T::lit(azimuth),
            }
        })
        .collect()
}

/// Channels of all `D` users, one row `h_d` of length `M` per user.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet<T: Real> {
    channels: Array2<Cplx<T>>,
    scale_factors: Vec<T>,
}

impl<T: Real> ChannelSet<T> {
    pub fn new(channels: Array2<Cplx<T>>, scale_factors: Vec<T>) -> Result<Self> {
        if scale_factors.len() != channels.nrows() {
            return Err(Error::DimensionMismatch {
                context: "scale factors per user",
                expected: channels.nrows(),
                actual: scale_factors.len(),
            });
        }
        if scale_factors.iter().any(|f| !(*f > T::zero()) || !f.is_finite()) {
            return Err(Error::InvalidConfig("scale factors must be positive".into()));
        }
        if !channels.iter().all(|z| is_finite_c(*z)) {
            return Err(Error::InvalidConfig("channel entries must be finite".into()));
        }
        Ok(Self {
            channels,
            scale_factors,
        })
    }

    /// Unit scale factors for every row.
    pub fn from_rows(channels: Array2<Cplx<T>>) -> Result<Self> {
        let d = channels.nrows();
        Self::new(channels, vec![T::one(); d])
    }

    /// Samples `paths_per_user` paths for each user in order and builds the
    /// scaled channels.
    pub fn sample<R: Rng + ?Sized>(
        rng: &mut R,
        geometry: &ArrayGeometry<T>,
        scale_factors: &[T],
        paths_per_user: usize,
    ) -> Result<Self> {
        let paths: Vec<Vec<PathRealization<T>>> = scale_factors
            .iter()
            .map(|_| sample_paths(rng, paths_per_user))
            .collect();
        Self::from_paths(&paths, geometry, scale_factors)
    }

    pub fn from_paths(
        paths: &[Vec<PathRealization<T>>],
        geometry: &ArrayGeometry<T>,
        scale_factors: &[T],
    ) -> Result<Self> {
        let m = geometry.elements();
        let mut channels = Array2::from_elem((scale_factors.len(), m), czero::<T>());
        for (d, (user_paths, &scale)) in paths.iter().zip(scale_factors).enumerate() {
            let h = generate_channel(user_paths, geometry, scale)?;
            channels.row_mut(d).assign(&h);
        }
        Self::new(channels, scale_factors.to_vec())
    }

    pub fn users(&self) -> usize {
        self.channels.nrows()
    }

    pub fn elements(&self) -> usize {
        self.channels.ncols()
    }

    pub fn channel(&self, user: usize) -> ArrayView1<'_, Cplx<T>> {
        self.channels.row(user)
    }

    /// `D × M` matrix whose rows are the channel vectors.
    pub fn matrix(&self) -> &Array2<Cplx<T>> {
        &self.channels
    }

    pub fn scale_factors(&self) -> &[T] {
        &self.scale_factors
    }
}
