//! The reconfigurable holographic surface: element and feed layout, the fixed
//! reference-wave phase matrix `Φ`, and the real amplitude weights `w`.
//!
//! The holographic beamformer is `W = diag(w)·Φ` (`M × K`). Elements are
//! indexed to match the Kronecker ordering of the array response:
//! element `m` sits at `(⌊m/√M⌋·d_x, (m mod √M)·d_y)`. The `K` feeds lie
//! along the lower edge at `y = −d_y`, evenly spread across the aperture.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use ndarray::{Array1, Array2};

use crate::channel::ArrayGeometry;
use crate::error::{Error, Result};
use crate::scalar::{cis, czero, Cplx, Real};
use crate::scheduler::ScheduleVector;

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGeometry<T: Real> {
    pub side: usize,
    pub dx: T,
    pub dy: T,
    /// In-plane `(x, y)` feed positions in meters.
    pub feed_positions: Vec<[T; 2]>,
    /// `|k_s| = √ε_r · |k_f|`.
    pub surface_wavenumber: T,
}

impl<T: Real> SurfaceGeometry<T> {
    /// Default layout: `feeds` evenly spaced below the lower edge.
    pub fn new(array: &ArrayGeometry<T>, feeds: usize, permittivity: f64) -> Result<Self> {
        if feeds == 0 {
            return Err(Error::InvalidConfig("at least one feed is required".into()));
        }
        if !(permittivity > 0.0) {
            return Err(Error::InvalidConfig("relative permittivity must be positive".into()));
        }
        let width = T::from_count(array.side) * array.dx;
        let feed_positions = (0..feeds)
            .map(|k| {
                let x = (T::from_count(k) + T::lit(0.5)) * width / T::from_count(feeds);
                [x, -array.dy]
            })
            .collect();
        Ok(Self {
            side: array.side,
            dx: array.dx,
            dy: array.dy,
            feed_positions,
            surface_wavenumber: T::lit(permittivity).sqrt() * array.free_space_wavenumber,
        })
    }

    /// Explicit feed placement. Positions must be distinct.
    pub fn with_feeds(
        side: usize,
        dx: T,
        dy: T,
        feed_positions: Vec<[T; 2]>,
        surface_wavenumber: T,
    ) -> Result<Self> {
        if feed_positions.is_empty() {
            return Err(Error::InvalidConfig("at least one feed is required".into()));
        }
        for (i, a) in feed_positions.iter().enumerate() {
            if feed_positions[i + 1..].iter().any(|b| a == b) {
                return Err(Error::InvalidConfig("feed positions must be distinct".into()));
            }
        }
        Ok(Self {
            side,
            dx,
            dy,
            feed_positions,
            surface_wavenumber,
        })
    }

    pub fn elements(&self) -> usize {
        self.side * self.side
    }

    pub fn feeds(&self) -> usize {
        self.feed_positions.len()
    }

    pub fn element_position(&self, m: usize) -> [T; 2] {
        [
            T::from_count(m / self.side) * self.dx,
            T::from_count(m % self.side) * self.dy,
        ]
    }
}

/// Fixed `M × K` reference-wave phases `φ_{m,k} = exp(−j·|k_s|·r_m^k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatrix<T: Real> {
    entries: Array2<Cplx<T>>,
}

impl<T: Real> PhaseMatrix<T> {
    /// Wraps explicit entries; each must have unit modulus.
    pub fn from_entries(entries: Array2<Cplx<T>>) -> Result<Self> {
        let tol = T::lit(1e3) * T::epsilon();
        if entries.iter().any(|z| (z.norm() - T::one()).abs() > tol) {
            return Err(Error::InvalidConfig("phase matrix entries must have unit modulus".into()));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &Array2<Cplx<T>> {
        &self.entries
    }

    pub fn elements(&self) -> usize {
        self.entries.nrows()
    }

    pub fn feeds(&self) -> usize {
        self.entries.ncols()
    }

    /// Bit-level digest of the entries.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        self.entries.dim().hash(&mut hasher);
        for z in &self.entries {
            z.re.as_f64().to_bits().hash(&mut hasher);
            z.im.as_f64().to_bits().hash(&mut hasher);
        }
        hasher.finish()
    }
}

pub fn build_phase_matrix<T: Real>(geometry: &SurfaceGeometry<T>) -> PhaseMatrix<T> {
    let entries = Array2::from_shape_fn((geometry.elements(), geometry.feeds()), |(m, k)| {
        let [ex, ey] = geometry.element_position(m);
        let [fx, fy] = geometry.feed_positions[k];
        let r = ((ex - fx).powi(2) + (ey - fy).powi(2)).sqrt();
        cis(-geometry.surface_wavenumber * r)
    });
    PhaseMatrix { entries }
}

/// Real amplitude weights, each confined to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HolographicWeights<T: Real> {
    w: Array1<T>,
}

impl<T: Real> HolographicWeights<T> {
    pub fn new(w: Array1<T>) -> Result<Self> {
        if let Some(bad) = w.iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
            return Err(Error::InvalidConfig(format!(
                "holographic weight {bad} outside [0, 1]"
            )));
        }
        Ok(Self { w })
    }

    /// Every weight set to `value`, clamped into the box.
    pub fn uniform(elements: usize, value: T) -> Self {
        Self {
            w: Array1::from_elem(elements, clamp_unit(value)),
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn get(&self, m: usize) -> T {
        self.w[m]
    }

    pub fn as_array(&self) -> &Array1<T> {
        &self.w
    }

    pub fn set(&mut self, m: usize, value: T) -> Result<()> {
        if !(value >= T::zero() && value <= T::one()) {
            return Err(Error::InvalidConfig(format!(
                "holographic weight {value} outside [0, 1]"
            )));
        }
        self.w[m] = value;
        Ok(())
    }

    /// `min(1, max(0, w + step·g))` element-wise.
    pub fn projected_step(&self, gradient: &[T], step: T) -> Self {
        debug_assert_eq!(gradient.len(), self.w.len());
        let w = self
            .w
            .iter()
            .zip(gradient)
            .map(|(&w, &g)| clamp_unit(w + step * g))
            .collect();
        Self { w }
    }
}

fn clamp_unit<T: Real>(v: T) -> T {
    // NaN maps to 0 so the box invariant survives a poisoned gradient;
    // optimizers check gradients for finiteness before stepping.
    if v.is_nan() {
        T::zero()
    } else {
        v.max(T::zero()).min(T::one())
    }
}

/// `W = diag(w)·Φ`.
pub fn effective_surface<T: Real>(
    weights: &HolographicWeights<T>,
    phases: &PhaseMatrix<T>,
) -> Result<Array2<Cplx<T>>> {
    if weights.len() != phases.elements() {
        return Err(Error::DimensionMismatch {
            context: "weights vs phase matrix rows",
            expected: phases.elements(),
            actual: weights.len(),
        });
    }
    let mut w = phases.entries.clone();
    for (mut row, &wm) in w.rows_mut().into_iter().zip(weights.w.iter()) {
        row.mapv_inplace(|z| z * wm);
    }
    Ok(w)
}

/// Stacks `h_d^H·W` for every scheduled user in ascending user order (`D' × K`).
pub fn effective_channel<T: Real>(
    channels: &crate::channel::ChannelSet<T>,
    surface: &Array2<Cplx<T>>,
    schedule: &ScheduleVector,
) -> Result<Array2<Cplx<T>>> {
    if surface.nrows() != channels.elements() {
        return Err(Error::DimensionMismatch {
            context: "surface rows vs channel length",
            expected: channels.elements(),
            actual: surface.nrows(),
        });
    }
    if schedule.len() != channels.users() {
        return Err(Error::DimensionMismatch {
            context: "schedule length vs users",
            expected: channels.users(),
            actual: schedule.len(),
        });
    }
    let scheduled = schedule.scheduled();
    if scheduled.is_empty() {
        return Err(Error::NoScheduledUsers);
    }
    let k = surface.ncols();
    let mut out = Array2::from_elem((scheduled.len(), k), czero::<T>());
    for (row, &d) in scheduled.iter().enumerate() {
        let h = channels.channel(d);
        for m in 0..h.len() {
            let hc = h[m].conj();
            for col in 0..k {
                out[[row, col]] += hc * surface[[m, col]];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelSet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn reference_surface(elements: usize, feeds: usize) -> SurfaceGeometry<f64> {
        let array = ArrayGeometry::new(elements, 30e9, 1.0 / 3.0).unwrap();
        SurfaceGeometry::new(&array, feeds, 3.0).unwrap()
    }

    fn random_phases(rng: &mut ChaCha8Rng, m: usize, k: usize) -> PhaseMatrix<f64> {
        PhaseMatrix::from_entries(Array2::from_shape_fn((m, k), |_| {
            cis(rng.random::<f64>() * 2.0 * PI)
        }))
        .unwrap()
    }

    #[test]
    fn surface_wavenumber_uses_permittivity() {
        let s = reference_surface(36, 8);
        assert!((s.surface_wavenumber - 200.0 * 3f64.sqrt() * PI).abs() < 1e-9);
        assert_eq!(s.feeds(), 8);
        assert_eq!(s.element_position(7), [s.dx, s.dy]);
    }

    #[test]
    fn coincident_feed_and_full_wavelength_give_unit_phase() {
        let ks = 200.0 * 3f64.sqrt() * PI;
        let g = SurfaceGeometry::with_feeds(2, 2.0 * PI / ks, 1.0, vec![[0.0, 0.0]], ks).unwrap();
        let phi = build_phase_matrix(&g);
        // element 0 on the feed, element 2 one surface wavelength away along x
        assert!((phi.entries()[[0, 0]] - Cplx::new(1.0, 0.0)).norm() < 1e-12);
        assert!((phi.entries()[[2, 0]] - Cplx::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn quarter_wavelength_grid_phases() {
        let ks = 200.0 * 3f64.sqrt() * PI;
        let q = 0.25 * 2.0 * PI / ks;
        let g = SurfaceGeometry::with_feeds(2, q, q, vec![[0.0, 0.0]], ks).unwrap();
        let phi = build_phase_matrix(&g);
        // positions (0,0), (0,q), (q,0), (q,q) → phases 0, −π/2, −π/2, −π/√2
        let expected = [0.0, -PI / 2.0, -PI / 2.0, -PI / 2.0 * 2f64.sqrt()];
        for (m, &phase) in expected.iter().enumerate() {
            assert!((phi.entries()[[m, 0]] - cis(phase)).norm() < 1e-12, "element {m}");
        }
    }

    #[test]
    fn duplicate_feeds_rejected() {
        assert!(SurfaceGeometry::with_feeds(2, 1.0, 1.0, vec![[0.0, 0.0], [0.0, 0.0]], 1.0).is_err());
    }

    #[test]
    fn reference_phases_are_unit_modulus() {
        let phi = build_phase_matrix(&reference_surface(64, 8));
        assert_eq!(phi.entries().dim(), (64, 8));
        assert!(phi.entries().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn effective_surface_row_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi = random_phases(&mut rng, 9, 3);
        let ones = HolographicWeights::uniform(9, 1.0);
        assert_eq!(&effective_surface(&ones, &phi).unwrap(), phi.entries());
        let zeros = HolographicWeights::uniform(9, 0.0);
        assert!(effective_surface(&zeros, &phi).unwrap().iter().all(|z| z.norm() == 0.0));
        let mut half = ones.clone();
        half.set(4, 0.5).unwrap();
        let w = effective_surface(&half, &phi).unwrap();
        for m in 0..9 {
            let f = if m == 4 { 0.5 } else { 1.0 };
            for k in 0..3 {
                assert_eq!(w[[m, k]], phi.entries()[[m, k]] * f);
            }
        }
        let short = HolographicWeights::uniform(8, 1.0);
        assert!(effective_surface(&short, &phi).is_err());
    }

    #[test]
    fn row_norm_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let phi = random_phases(&mut rng, 16, 4);
        let w = HolographicWeights::new(Array1::from_shape_fn(16, |_| rng.random::<f64>())).unwrap();
        let ws = effective_surface(&w, &phi).unwrap();
        for m in 0..16 {
            let row = ws.row(m).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let base = phi.entries().row(m).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((row - w.get(m) * base).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_reject_out_of_box_values() {
        assert!(HolographicWeights::new(Array1::from(vec![0.0, 1.2])).is_err());
        assert!(HolographicWeights::new(Array1::from(vec![f64::NAN])).is_err());
        let mut w = HolographicWeights::uniform(2, 0.5);
        assert!(w.set(0, -0.1).is_err());
        assert_eq!(w.get(0), 0.5);
        let stepped = w.projected_step(&[10.0, -10.0], 1.0);
        assert_eq!(stepped.as_array().to_vec(), vec![1.0, 0.0]);
    }

    #[test]
    fn effective_channel_matches_scalar_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (d, m, k) = (3, 4, 2);
        let h = Array2::from_shape_fn((d, m), |_| {
            Cplx::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let channels = ChannelSet::from_rows(h.clone()).unwrap();
        let phi = random_phases(&mut rng, m, k);
        let w = HolographicWeights::new(Array1::from_shape_fn(m, |_| rng.random::<f64>())).unwrap();
        let ws = effective_surface(&w, &phi).unwrap();
        let x = ScheduleVector::from_bits(&[true, false, true]);
        let eff = effective_channel(&channels, &ws, &x).unwrap();
        assert_eq!(eff.dim(), (2, k));
        for (row, &user) in [0usize, 2].iter().enumerate() {
            for col in 0..k {
                let mut acc = czero::<f64>();
                for e in 0..m {
                    acc += h[[user, e]].conj() * w.get(e) * phi.entries()[[e, col]];
                }
                assert!((eff[[row, col]] - acc).norm() < 1e-14);
            }
        }
        let none = ScheduleVector::none(3);
        assert!(matches!(
            effective_channel(&channels, &ws, &none),
            Err(Error::NoScheduledUsers)
        ));
        let zero = Array2::from_elem((m, k), czero::<f64>());
        assert!(effective_channel(&channels, &zero, &x).unwrap().iter().all(|z| z.norm() == 0.0));
    }
}
