//! Zero-forcing digital precoding and the per-user rate evaluation.

use ndarray::Array2;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{hermitian, jacobi_svd};
use crate::scalar::{czero, Cplx, Real};
use crate::scheduler::ScheduleVector;
use crate::surface::effective_channel;

/// Relative singular-value cutoff below which the effective channel is
/// treated as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// `K × D` digital precoder; columns of unscheduled users are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalBeamformer<T: Real> {
    v: Array2<Cplx<T>>,
}

impl<T: Real> DigitalBeamformer<T> {
    pub fn zeros(feeds: usize, users: usize) -> Self {
        Self {
            v: Array2::from_elem((feeds, users), czero()),
        }
    }

    pub fn from_matrix(v: Array2<Cplx<T>>) -> Self {
        Self { v }
    }

    /// Places the columns of `scheduled_columns` (`K × D'`) at the scheduled
    /// users' positions of a `K × D` matrix.
    pub fn embed(scheduled_columns: &Array2<Cplx<T>>, schedule: &ScheduleVector) -> Result<Self> {
        let scheduled = schedule.scheduled();
        if scheduled.len() != scheduled_columns.ncols() {
            return Err(Error::DimensionMismatch {
                context: "precoder columns vs scheduled users",
                expected: scheduled.len(),
                actual: scheduled_columns.ncols(),
            });
        }
        let mut v = Array2::from_elem((scheduled_columns.nrows(), schedule.len()), czero());
        for (col, &d) in scheduled.iter().enumerate() {
            v.column_mut(d).assign(&scheduled_columns.column(col));
        }
        Ok(Self { v })
    }

    pub fn matrix(&self) -> &Array2<Cplx<T>> {
        &self.v
    }

    /// `trace(V·V^H)`.
    pub fn power(&self) -> T {
        self.v.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// `V = √(P_max/‖V_ZF‖_F²)·V_ZF` with `V_ZF = H^H(H H^H)^{-1}`, returned as
/// the `K × D'` block for the rows of `h_eff`.
///
/// The pseudo-inverse is formed from an SVD of `H^H`, so the product
/// identity `H·V = c·I` holds without ever inverting the Gram matrix.
pub fn zero_forcing<T: Real>(h_eff: &Array2<Cplx<T>>, p_max: T) -> Result<Array2<Cplx<T>>> {
    let (rows, feeds) = h_eff.dim();
    if rows == 0 {
        return Err(Error::NoScheduledUsers);
    }
    if rows > feeds {
        return Err(Error::ZfInfeasible { ratio: 0.0 });
    }
    let svd = jacobi_svd(hermitian(h_eff.view()).view());
    let (smax, smin) = (svd.max_singular(), svd.min_singular());
    let ratio = if smax > T::zero() { smin / smax } else { T::zero() };
    if !(ratio > T::lit(RANK_TOLERANCE)) {
        return Err(Error::ZfInfeasible {
            ratio: ratio.as_f64(),
        });
    }

    // pinv(H) = U Σ^{-1} Y^H where H^H = U Σ Y^H.
    let mut v = Array2::from_elem((feeds, rows), czero::<T>());
    let mut frob = T::zero();
    for (l, &sigma) in svd.singular.iter().enumerate() {
        let inv = T::one() / sigma;
        frob += inv * inv;
        for k in 0..feeds {
            let uk = svd.u[[k, l]] * inv;
            for i in 0..rows {
                v[[k, i]] += uk * svd.v[[i, l]].conj();
            }
        }
    }
    let scale = (p_max / frob).sqrt();
    v.mapv_inplace(|z| z * scale);
    Ok(v)
}

/// ZF over the scheduled users of `schedule`, embedded into a `K × D` precoder.
pub fn zero_forcing_for_schedule<T: Real>(
    channels: &ChannelSet<T>,
    surface: &Array2<Cplx<T>>,
    schedule: &ScheduleVector,
    p_max: T,
) -> Result<DigitalBeamformer<T>> {
    let h_eff = effective_channel(channels, surface, schedule)?;
    let block = zero_forcing(&h_eff, p_max)?;
    DigitalBeamformer::embed(&block, schedule)
}

/// `G[d][j] = h_d^H·W·v_j` for every user pair.
pub fn gain_matrix<T: Real>(
    channels: &ChannelSet<T>,
    surface: &Array2<Cplx<T>>,
    precoder: &DigitalBeamformer<T>,
) -> Array2<Cplx<T>> {
    let (d, m) = (channels.users(), channels.elements());
    let k = surface.ncols();
    let v = precoder.matrix();
    let mut out = Array2::from_elem((d, v.ncols()), czero::<T>());
    let mut row = vec![czero::<T>(); k];
    for user in 0..d {
        row.iter_mut().for_each(|z| *z = czero());
        let h = channels.channel(user);
        for e in 0..m {
            let hc = h[e].conj();
            for (col, acc) in row.iter_mut().enumerate() {
                *acc += hc * surface[[e, col]];
            }
        }
        for j in 0..v.ncols() {
            out[[user, j]] = row
                .iter()
                .enumerate()
                .fold(czero(), |acc, (col, g)| acc + *g * v[[col, j]]);
        }
    }
    out
}

/// SINR of every user; unscheduled users report zero.
pub fn per_user_sinr<T: Real>(
    channels: &ChannelSet<T>,
    surface: &Array2<Cplx<T>>,
    precoder: &DigitalBeamformer<T>,
    schedule: &ScheduleVector,
    noise_variance: T,
) -> Vec<T> {
    let g = gain_matrix(channels, surface, precoder);
    (0..channels.users())
        .map(|d| {
            if !schedule.is_scheduled(d) {
                return T::zero();
            }
            let interference: T = schedule
                .scheduled()
                .into_iter()
                .filter(|&j| j != d)
                .map(|j| g[[d, j]].norm_sqr())
                .sum();
            g[[d, d]].norm_sqr() / (noise_variance + interference)
        })
        .collect()
}

/// `log₂(1 + SINR_d)` for every user, bps/Hz.
pub fn per_user_rates<T: Real>(
    channels: &ChannelSet<T>,
    surface: &Array2<Cplx<T>>,
    precoder: &DigitalBeamformer<T>,
    schedule: &ScheduleVector,
    noise_variance: T,
) -> Vec<T> {
    per_user_sinr(channels, surface, precoder, schedule, noise_variance)
        .into_iter()
        .map(|s| (T::one() + s).log2())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matmul;
    use crate::surface::{effective_surface, HolographicWeights, PhaseMatrix};
    use crate::scalar::cis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn crandn(rng: &mut ChaCha8Rng) -> Cplx<f64> {
        Cplx::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<Cplx<f64>> {
        Array2::from_shape_fn((r, c), |_| crandn(rng))
    }

    #[test]
    fn single_unit_row() {
        let mut h = Array2::from_elem((1, 4), czero::<f64>());
        h[[0, 0]] = Cplx::new(1.0, 0.0);
        let v = zero_forcing(&h, 1.0).unwrap();
        assert!((v[[0, 0]] - Cplx::new(1.0, 0.0)).norm() < 1e-15);
        assert!(v.iter().skip(1).all(|z| z.norm() < 1e-15));
        assert!((v.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orthonormal_rows() {
        // rows of a scaled DFT matrix are orthonormal
        let n = 4;
        let dft = Array2::from_shape_fn((n, n), |(r, c)| {
            cis(2.0 * std::f64::consts::PI * (r * c) as f64 / n as f64) * 0.5
        });
        let h = dft.slice(ndarray::s![0..2, ..]).to_owned();
        let v = zero_forcing(&h, 1.0).unwrap();
        let expected = hermitian(h.view()).mapv(|z| z / 2f64.sqrt());
        assert!((&v - &expected).iter().all(|z| z.norm() < 1e-12));
        let hv = matmul(h.view(), v.view());
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 / 2f64.sqrt() } else { 0.0 };
                assert!((hv[[i, j]] - Cplx::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn power_homothety() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random_matrix(&mut rng, 3, 5);
        let v1 = zero_forcing(&h, 1.0).unwrap();
        let v4 = zero_forcing(&h, 4.0).unwrap();
        assert!((&v4 - &v1.mapv(|z| z * 2.0)).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn rank_deficient_is_infeasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut h = random_matrix(&mut rng, 2, 4);
        let r0 = h.row(0).to_owned();
        h.row_mut(1).assign(&r0.mapv(|z| z * Cplx::new(0.0, 3.0)));
        assert!(matches!(zero_forcing(&h, 1.0), Err(Error::ZfInfeasible { .. })));
        let zero = Array2::from_elem((1, 3), czero::<f64>());
        assert!(matches!(zero_forcing(&zero, 1.0), Err(Error::ZfInfeasible { .. })));
        let wide = random_matrix(&mut rng, 4, 3);
        assert!(matches!(zero_forcing(&wide, 1.0), Err(Error::ZfInfeasible { .. })));
    }

    #[test]
    fn zf_contract_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..200 {
            let k = 2 + trial % 7;
            let d = 1 + rng.random_range(0..k);
            let h = random_matrix(&mut rng, d, k);
            let p_max = 0.5 + rng.random::<f64>() * 3.0;
            let v = zero_forcing(&h, p_max).unwrap();
            let hv = matmul(h.view(), v.view());
            let diag0 = hv[[0, 0]];
            for i in 0..d {
                assert!(diag0.re > 0.0 && diag0.im.abs() < 1e-9 * diag0.re);
                assert!((hv[[i, i]] - diag0).norm() < 1e-9 * diag0.norm());
                for j in 0..d {
                    if i != j {
                        assert!(hv[[i, j]].norm() / hv[[i, i]].norm() < 1e-8);
                    }
                }
            }
            let power = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
            assert!((power - p_max).abs() < 1e-9 * p_max);
        }
    }

    #[test]
    fn embed_keeps_unscheduled_columns_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let block = random_matrix(&mut rng, 3, 2);
        let x = ScheduleVector::from_bits(&[false, true, false, true]);
        let v = DigitalBeamformer::embed(&block, &x).unwrap();
        assert_eq!(v.matrix().dim(), (3, 4));
        assert!(v.matrix().column(0).iter().all(|z| z.norm() == 0.0));
        assert_eq!(v.matrix().column(3), block.column(1));
    }

    fn random_instance(
        rng: &mut ChaCha8Rng,
        d: usize,
        m: usize,
        k: usize,
    ) -> (ChannelSet<f64>, Array2<Cplx<f64>>, DigitalBeamformer<f64>) {
        let channels = ChannelSet::from_rows(random_matrix(rng, d, m)).unwrap();
        let phi = PhaseMatrix::from_entries(Array2::from_shape_fn((m, k), |_| {
            cis(rng.random::<f64>() * 6.3)
        }))
        .unwrap();
        let w = HolographicWeights::new(ndarray::Array1::from_shape_fn(m, |_| rng.random::<f64>()))
            .unwrap();
        let surface = effective_surface(&w, &phi).unwrap();
        let v = DigitalBeamformer::from_matrix(random_matrix(rng, k, d));
        (channels, surface, v)
    }

    #[test]
    fn rates_match_scalar_triple_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (d, m, k) = (3, 4, 3);
        let (channels, surface, v) = random_instance(&mut rng, d, m, k);
        let x = ScheduleVector::from_bits(&[true, true, false]);
        let sigma2 = 0.05;
        let rates = per_user_rates(&channels, &surface, &v, &x, sigma2);
        let amp = |user: usize, stream: usize| {
            let mut acc = czero::<f64>();
            for e in 0..m {
                for f in 0..k {
                    acc += channels.channel(user)[e].conj() * surface[[e, f]] * v.matrix()[[f, stream]];
                }
            }
            acc
        };
        for user in 0..d {
            let xd = if x.is_scheduled(user) { 1.0 } else { 0.0 };
            let num = (amp(user, user) * xd).norm_sqr();
            let mut den = sigma2;
            for j in 0..d {
                if j != user && x.is_scheduled(j) {
                    den += amp(user, j).norm_sqr();
                }
            }
            let want = (1.0 + num / den).log2();
            assert!((rates[user] - want).abs() < 1e-12, "user {user}");
        }
        assert_eq!(rates[2], 0.0);
    }

    #[test]
    fn no_transmission_and_unit_snr() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (channels, surface, v) = random_instance(&mut rng, 2, 4, 2);
        let rates = per_user_rates(&channels, &surface, &v, &ScheduleVector::none(2), 0.1);
        assert!(rates.iter().all(|r| *r == 0.0));

        let one = ScheduleVector::from_bits(&[true]);
        let single = ChannelSet::from_rows(channels.matrix().slice(ndarray::s![0..1, ..]).to_owned()).unwrap();
        let vs = DigitalBeamformer::from_matrix(v.matrix().slice(ndarray::s![.., 0..1]).to_owned());
        let g = gain_matrix(&single, &surface, &vs)[[0, 0]].norm_sqr();
        let r = per_user_rates(&single, &surface, &vs, &one, g);
        assert!((r[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zf_nulls_interference_end_to_end() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let (channels, surface, _) = random_instance(&mut rng, 4, 9, 5);
        let x = ScheduleVector::from_bits(&[true, false, true, true]);
        let v = zero_forcing_for_schedule(&channels, &surface, &x, 1.0).unwrap();
        assert!((v.power() - 1.0).abs() < 1e-12);
        let g = gain_matrix(&channels, &surface, &v);
        for d in x.scheduled() {
            let desired = g[[d, d]].norm_sqr();
            let interference: f64 = x.scheduled().into_iter().filter(|&j| j != d).map(|j| g[[d, j]].norm_sqr()).sum();
            assert!(interference < 1e-12 * desired);
        }
    }
}
