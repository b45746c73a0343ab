//! Two-phase amplify-and-forward relay channel.
//!
//! Broadcast: relay `j` hears `r_j = f_j √(π₁P) z + v_j`. Cooperation: it sends
//! `t_j = √(π₂P/(π₁P+1)) B̄_j r̄_j`, and antenna `l` of the destination receives
//! `y_l = Σ_j g_{j,l} t_j + w_l`. Equivalently `Y = √ρ X H + U` with
//! `ρ = π₁π₂P²/(π₁P+1)` and `H = diag(f̄) 𝒢`. All noises are unit-variance
//! circular complex Gaussian.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::construct::{rate_cspcu, DstbcCode};
use crate::design::realify_vector;
use crate::error::{Error, Result};
use crate::scalar::{cx, Cx, Real};

/// Eigenvalue floor applied before the inverse square root.
pub const EIGEN_CLAMP: f64 = 1e-12;

/// Draws one `CN(0, 1)` sample: independent real and imaginary parts of variance 1/2.
pub fn complex_gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Cx<T> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    cx(T::lit(re * s), T::lit(im * s))
}

fn gaussian_vector<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<Cx<T>> {
    DVector::from_fn(n, |_, _| complex_gaussian(rng))
}

/// Source→relay gains `f` and relay→destination gains `𝒢` (`N × N_D`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization<T: Real> {
    pub f: DVector<Cx<T>>,
    pub g: DMatrix<Cx<T>>,
}

impl<T: Real> ChannelRealization<T> {
    pub fn new(f: DVector<Cx<T>>, g: DMatrix<Cx<T>>) -> Result<Self> {
        if g.nrows() != f.len() {
            return Err(Error::Dimension {
                expected: f.len(),
                actual: g.nrows(),
            });
        }
        Ok(Self { f, g })
    }

    /// I.i.d. Rayleigh draw.
    pub fn draw<R: Rng + ?Sized>(relays: usize, rx_antennas: usize, rng: &mut R) -> Self {
        let f = gaussian_vector(relays, rng);
        let g = DMatrix::from_fn(relays, rx_antennas, |_, _| complex_gaussian(rng));
        Self { f, g }
    }

    pub fn relays(&self) -> usize {
        self.f.len()
    }

    /// `N_D`.
    pub fn rx_antennas(&self) -> usize {
        self.g.ncols()
    }
}

/// Total power `P` and the phase fractions `π₁`, `π₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerConfig<T: Real> {
    pub total: T,
    pub pi1: T,
    pub pi2: T,
}

impl<T: Real> PowerConfig<T> {
    pub fn new(total: T, pi1: T, pi2: T) -> Result<Self> {
        if !(total >= T::zero() && pi1 > T::zero() && pi2 > T::zero()) {
            return Err(Error::Parameter(
                "power and phase fractions must be positive".into(),
            ));
        }
        Ok(Self { total, pi1, pi2 })
    }

    /// `π₁ = 1`, `π₂ = 1/R`.
    pub fn for_code(code: &DstbcCode<T>, total: T) -> Result<Self> {
        let r = rate_cspcu(code)?;
        let pi2 = T::lit(*r.denom() as f64) / T::lit(*r.numer() as f64);
        Self::new(total, T::one(), pi2)
    }

    /// `ρ = π₁π₂P² / (π₁P + 1)`.
    pub fn rho(&self) -> T {
        self.pi1 * self.pi2 * self.total * self.total / (self.pi1 * self.total + T::one())
    }

    /// `π₂P / (π₁P + 1)`, the relay amplification power.
    pub fn relay_gain(&self) -> T {
        self.pi2 * self.total / (self.pi1 * self.total + T::one())
    }

    /// `π₁T1 + π₂RT2 = T1 + T2` within 1e-9.
    pub fn satisfies_constraint(&self, t1: usize, t2: usize, rate: f64) -> bool {
        let (t1, t2) = (t1 as f64, t2 as f64);
        let lhs = self.pi1.as_f64() * t1 + self.pi2.as_f64() * rate * t2;
        (lhs - (t1 + t2)).abs() <= 1e-9 * (t1 + t2).max(1.0)
    }
}

/// Noise statistics of one channel realisation.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel<T: Real> {
    /// Covariance of `vec(U)`: `T2·N_D` square, Hermitian.
    pub gamma_complex: DMatrix<Cx<T>>,
    /// Covariance of `ṽec(U)`: `2T2N_D` square, symmetric.
    pub gamma: DMatrix<T>,
    /// `Γ^{-1/2}`, symmetric.
    pub whitening: DMatrix<T>,
    /// Eigenvalues of `Γ`.
    pub eigenvalues: DVector<T>,
}

/// `diag(f̄) 𝒢` with `f̄_j = f_j*` for conjugating relays.
pub fn effective_channel<T: Real>(
    code: &DstbcCode<T>,
    realization: &ChannelRealization<T>,
) -> Result<DMatrix<Cx<T>>> {
    let form = code.require_relay_form()?;
    if realization.relays() != code.relays() {
        return Err(Error::Dimension {
            expected: code.relays(),
            actual: realization.relays(),
        });
    }
    let mut h = realization.g.clone();
    for j in 0..code.relays() {
        let fj = if form.is_conjugated(j) {
            realization.f[j].conj()
        } else {
            realization.f[j]
        };
        for e in h.row_mut(j).iter_mut() {
            *e *= fj;
        }
    }
    Ok(h)
}

/// Real symmetric form `½[[Re, −Im], [Im, Re]]` of a complex covariance.
pub fn realify_covariance<T: Real>(c: &DMatrix<Cx<T>>) -> DMatrix<T> {
    let n = c.nrows();
    let half = T::lit(0.5);
    DMatrix::from_fn(2 * n, 2 * n, |r, col| {
        let e = c[(r % n, col % n)];
        let v = match (r < n, col < n) {
            (true, true) | (false, false) => e.re,
            (true, false) => -e.im,
            (false, true) => e.im,
        };
        half * v
    })
}

/// Analytic covariance: block `(l₁, l₂)` is
/// `(π₂P/(π₁P+1)) Σ_j g_{j,l₁} g*_{j,l₂} B̄_j B̄_jᴴ + 1{l₁=l₂} I`.
pub fn noise_covariance<T: Real>(
    code: &DstbcCode<T>,
    realization: &ChannelRealization<T>,
    power: &PowerConfig<T>,
) -> Result<NoiseModel<T>> {
    let form = code.require_relay_form()?;
    if realization.relays() != code.relays() {
        return Err(Error::Dimension {
            expected: code.relays(),
            actual: realization.relays(),
        });
    }
    let t2 = code.t2();
    let nd = realization.rx_antennas();
    let gain = cx(power.relay_gain(), T::zero());
    let bbh: Vec<DMatrix<Cx<T>>> = (0..code.relays())
        .map(|j| {
            let b = form.bar_b(j);
            &b * b.adjoint()
        })
        .collect();
    let mut gc = DMatrix::zeros(t2 * nd, t2 * nd);
    for l1 in 0..nd {
        for l2 in 0..nd {
            let mut block = DMatrix::<Cx<T>>::zeros(t2, t2);
            for (j, m) in bbh.iter().enumerate() {
                let w = realization.g[(j, l1)] * realization.g[(j, l2)].conj() * gain;
                block += m * w;
            }
            if l1 == l2 {
                for d in 0..t2 {
                    block[(d, d)] += cx(T::one(), T::zero());
                }
            }
            gc.view_mut((l1 * t2, l2 * t2), (t2, t2)).copy_from(&block);
        }
    }
    let gamma = realify_covariance(&gc);
    let (whitening, eigenvalues) = inverse_sqrt(&gamma)?;
    Ok(NoiseModel {
        gamma_complex: gc,
        gamma,
        whitening,
        eigenvalues,
    })
}

/// Symmetric `Γ^{-1/2}` via eigendecomposition with eigenvalue clamping.
pub fn inverse_sqrt<T: Real>(gamma: &DMatrix<T>) -> Result<(DMatrix<T>, DVector<T>)> {
    let sym = (gamma + gamma.transpose()) * T::lit(0.5);
    let eig = SymmetricEigen::new(sym);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min < -T::lit(1e-10) * max.abs().max(T::one()) {
        return Err(Error::NonPsdCovariance {
            min_eigenvalue: min.as_f64(),
            max_eigenvalue: max.as_f64(),
        });
    }
    let clamp = T::lit(EIGEN_CLAMP);
    let inv_sqrt = eig.eigenvalues.map(|v| T::one() / v.max(clamp).sqrt());
    let u = &eig.eigenvectors;
    let a = u * DMatrix::from_diagonal(&inv_sqrt) * u.transpose();
    Ok(((&a + a.transpose()) * T::lit(0.5), eig.eigenvalues))
}

/// Which noise sources [`simulate_transmission_with`] injects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseInjection {
    pub relay: bool,
    pub destination: bool,
}

impl NoiseInjection {
    pub const ALL: Self = Self {
        relay: true,
        destination: true,
    };
    pub const NONE: Self = Self {
        relay: false,
        destination: false,
    };
}

/// Runs the physical two-phase pipeline for symbol vector `x`; returns `Y`
/// (`T2 × N_D`).
pub fn simulate_transmission<T: Real, R: Rng + ?Sized>(
    code: &DstbcCode<T>,
    x: &[T],
    realization: &ChannelRealization<T>,
    power: &PowerConfig<T>,
    rng: &mut R,
) -> Result<DMatrix<Cx<T>>> {
    simulate_transmission_with(code, x, realization, power, NoiseInjection::ALL, rng)
}

pub fn simulate_transmission_with<T: Real, R: Rng + ?Sized>(
    code: &DstbcCode<T>,
    x: &[T],
    realization: &ChannelRealization<T>,
    power: &PowerConfig<T>,
    noise: NoiseInjection,
    rng: &mut R,
) -> Result<DMatrix<Cx<T>>> {
    let form = code.require_relay_form()?;
    if x.len() != code.num_symbols() {
        return Err(Error::Dimension {
            expected: code.num_symbols(),
            actual: x.len(),
        });
    }
    if realization.relays() != code.relays() {
        return Err(Error::Dimension {
            expected: code.relays(),
            actual: realization.relays(),
        });
    }
    let (t1, t2, nd) = (form.t1(), code.t2(), realization.rx_antennas());
    let z = form.source_vector(x);
    let tx_amp = cx((power.pi1 * power.total).sqrt(), T::zero());
    let relay_amp = cx(power.relay_gain().sqrt(), T::zero());
    let mut y = DMatrix::<Cx<T>>::zeros(t2, nd);
    for j in 0..code.relays() {
        let mut r = &z * (realization.f[j] * tx_amp);
        if noise.relay {
            r += gaussian_vector::<T, R>(t1, rng);
        }
        let t = if form.is_conjugated(j) {
            form.bar_b(j) * r.map(|e| e.conj())
        } else {
            &form.relay_matrices()[j] * r
        } * relay_amp;
        for l in 0..nd {
            let mut col = y.column_mut(l);
            col += &t * realization.g[(j, l)];
        }
    }
    if noise.destination {
        for e in y.iter_mut() {
            *e += complex_gaussian::<T, R>(rng);
        }
    }
    Ok(y)
}

/// `ṽec(A) = [vec(Re A); vec(Im A)]`, column-major `vec`.
pub fn vec_tilde<T: Real>(a: &DMatrix<Cx<T>>) -> DVector<T> {
    realify_vector(&DVector::from_column_slice(a.as_slice()))
}

/// `G′ = √ρ [ṽec(A₁H) ⋯ ṽec(A_K H)]`.
#[allow(non_snake_case)]
pub fn build_G<T: Real>(code: &DstbcCode<T>, h: &DMatrix<Cx<T>>, rho: T) -> Result<DMatrix<T>> {
    if h.nrows() != code.relays() {
        return Err(Error::Dimension {
            expected: code.relays(),
            actual: h.nrows(),
        });
    }
    let d = 2 * code.t2() * h.ncols();
    let s = rho.sqrt();
    let mut g = DMatrix::zeros(d, code.num_symbols());
    for (i, a) in code.design().weights().iter().enumerate() {
        let col = vec_tilde(&(a * h)) * s;
        g.set_column(i, &col);
    }
    Ok(g)
}

/// `(Γ^{-1/2} G′, Γ^{-1/2} y′)`.
pub fn whiten<T: Real>(
    noise: &NoiseModel<T>,
    g: &DMatrix<T>,
    y: &DVector<T>,
) -> (DMatrix<T>, DVector<T>) {
    (&noise.whitening * g, &noise.whitening * y)
}

/// Trace / spectral bound on `Γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceBound {
    pub trace: f64,
    pub lambda_max: f64,
    /// `T2N_D + (βπ₂P/(π₁P+1)) Σ|g_{j,l}|²` with `β = max_j ‖B̄_j‖²_F`.
    pub alpha: f64,
}

impl CovarianceBound {
    pub fn holds(&self) -> bool {
        let slack = 1e-9 * self.alpha.max(1.0);
        self.trace <= self.alpha + slack && self.lambda_max <= self.alpha + slack
    }
}

pub fn covariance_bound<T: Real>(
    code: &DstbcCode<T>,
    realization: &ChannelRealization<T>,
    power: &PowerConfig<T>,
) -> Result<CovarianceBound> {
    let form = code.require_relay_form()?;
    let noise = noise_covariance(code, realization, power)?;
    let beta = (0..code.relays())
        .map(|j| form.bar_b(j).norm_squared().as_f64())
        .fold(0.0, f64::max);
    let gsum: f64 = realization.g.iter().map(|e| e.norm_sqr().as_f64()).sum();
    let alpha =
        (code.t2() * realization.rx_antennas()) as f64 + beta * power.relay_gain().as_f64() * gsum;
    Ok(CovarianceBound {
        trace: noise.gamma.trace().as_f64(),
        lambda_max: noise.eigenvalues.max().as_f64(),
        alpha,
    })
}

/// Sample covariance of `ṽec(U)` over `draws` transmissions of `x = 0`,
/// which leaves only the forwarded relay noise and the destination noise.
pub fn empirical_noise_covariance<T: Real, R: Rng + ?Sized>(
    code: &DstbcCode<T>,
    realization: &ChannelRealization<T>,
    power: &PowerConfig<T>,
    draws: usize,
    rng: &mut R,
) -> Result<DMatrix<T>> {
    let zero = vec![T::zero(); code.num_symbols()];
    let d = 2 * code.t2() * realization.rx_antennas();
    let mut acc = DMatrix::<T>::zeros(d, d);
    for _ in 0..draws {
        let u = vec_tilde(&simulate_transmission(
            code,
            &zero,
            realization,
            power,
            rng,
        )?);
        acc.ger(T::one(), &u, &u, T::one());
    }
    Ok(acc / T::lit(draws.max(1) as f64))
}

/// `‖A − B‖_F / ‖B‖_F`.
pub fn relative_frobenius_error<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    ((a - b).norm() / b.norm()).as_f64()
}
