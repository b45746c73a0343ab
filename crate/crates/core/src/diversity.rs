//! Full-diversity rank criteria and the checks built on them.
//!
//! For a group `k` with interference index set `J`, a code is full diversity
//! under a decoder when `X_{I_k}(a_k) + X_J(u)` has full column rank for
//! every nonzero difference `a_k` of the group's signal set and every real
//! `u` on `J`:
//!
//! * PIC: `J = I_kᶜ`, all other groups;
//! * PIC-SIC: `J = Ĩ_k`, the groups after `k`;
//! * ZF: `Σ u_i A_i` has full column rank for every nonzero `u ∈ R^K`.
//!
//! "Every `u`" is not exhaustively checkable, so the randomized checks draw
//! Gaussian `u` (generic-rank evidence, necessary only). Codes from the
//! layered construction can additionally be certified analytically.

use nalgebra::{DMatrix, DVector, SVD};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::channel::{covariance_bound, CovarianceBound};
use crate::channel::{ChannelRealization, PowerConfig};
use crate::constellation::{difference_set, verify_rotation, RotationMatrix};
use crate::construct::{drop_relays, DstbcCode};
use crate::decode::projector_complement;
use crate::design::{verify_cod_weights, LinearDesign, COD_TOL};
use crate::error::{Error, Result};
use crate::scalar::{modulus, Real};
use crate::streams::substream;

/// Relative threshold: rank is deficient when `σ_min ≤ RANK_THRESHOLD · σ_max`.
pub const RANK_THRESHOLD: f64 = 1e-8;

/// Default number of random `u` draws per `(k, a_k)` pair.
pub const DEFAULT_TRIALS: usize = 1000;

/// Differences per group tested exhaustively; larger sets are sampled.
pub const DIFFERENCE_CAP: usize = 256;

/// Drop sets per size tested exhaustively; larger families are sampled.
pub const DROP_SET_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    #[serde(rename = "PIC")]
    Pic,
    #[serde(rename = "PIC-SIC")]
    PicSic,
    #[serde(rename = "ZF")]
    Zf,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Pic, Criterion::PicSic, Criterion::Zf];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Pic => "PIC",
            Criterion::PicSic => "PIC-SIC",
            Criterion::Zf => "ZF",
        }
    }
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A rank-deficient configuration `X_{I_k}(a_k) + X_J(u)`.
///
/// `u` is a full `K`-vector that is zero on `I_k` and outside `J`. For ZF,
/// `k` is the first nonzero coordinate of the failing vector and `a_k` its
/// value there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub k: usize,
    pub a_k: Vec<f64>,
    pub u: Vec<f64>,
}

impl Witness {
    /// Group indices `k` refers to under `criterion`.
    fn group_indices(&self, code_groups: &[Vec<usize>], criterion: Criterion) -> Vec<usize> {
        match criterion {
            Criterion::Zf => vec![self.k],
            _ => code_groups[self.k].clone(),
        }
    }

    /// The combined symbol vector `a_k` (placed on its group) plus `u`.
    pub fn symbol_vector<T: Real>(&self, code: &DstbcCode<T>, criterion: Criterion) -> Vec<f64> {
        let mut v = self.u.clone();
        for (&s, &a) in self
            .group_indices(code.grouping().groups(), criterion)
            .iter()
            .zip(&self.a_k)
        {
            v[s] = a;
        }
        v
    }

    /// The same failing vector expressed as a ZF witness.
    pub fn to_zf<T: Real>(&self, code: &DstbcCode<T>, criterion: Criterion) -> Witness {
        zf_witness(&self.symbol_vector(code, criterion))
    }
}

fn zf_witness(v: &[f64]) -> Witness {
    let k = v.iter().position(|&e| e != 0.0).unwrap_or(0);
    let mut u = v.to_vec();
    u[k] = 0.0;
    Witness {
        k,
        a_k: vec![v[k]],
        u,
    }
}

/// Outcome of one criterion check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: Criterion,
    pub passed: bool,
    pub samples_tested: u64,
    /// Smallest `σ_min / σ_max` observed.
    pub min_singular_value: f64,
    pub witness: Option<Witness>,
    /// `Some(true)`: certified analytically; `Some(false)`: a certificate
    /// applies to this criterion but was refused; `None`: not applicable.
    pub analytic_certificate: Option<bool>,
    /// Per group `(differences tested, differences in Δ𝒜 \ {0})`.
    #[serde(skip)]
    pub coverage: Vec<(usize, usize)>,
}

/// `σ_min / σ_max` of `Σ v_i A_i`; zero when the matrix cannot have full
/// column rank.
pub fn relative_min_singular_value<T: Real>(design: &LinearDesign<T>, v: &[T]) -> f64 {
    if design.rows() < design.cols() {
        return 0.0;
    }
    let x = design
        .evaluate(v)
        .expect("vector length matches the design");
    let sv = SVD::new(x, false, false).singular_values;
    let max = sv.max();
    if max <= T::zero() {
        return 0.0;
    }
    (sv.min() / max).as_f64()
}

fn full_rank(rel: f64) -> bool {
    rel > RANK_THRESHOLD
}

/// True iff `witness` is admissible for `criterion` on `code` (a nonzero
/// difference on its group, `u` supported on the interference set) and the
/// resulting matrix is rank deficient.
pub fn is_witness<T: Real>(code: &DstbcCode<T>, criterion: Criterion, witness: &Witness) -> bool {
    let k_total = code.num_symbols();
    if witness.u.len() != k_total || witness.a_k.iter().all(|&a| a == 0.0) {
        return false;
    }
    let allowed: Vec<usize> = match criterion {
        Criterion::Zf => (0..k_total).filter(|&i| i != witness.k).collect(),
        Criterion::Pic | Criterion::PicSic => {
            if witness.k >= code.grouping().len()
                || witness.a_k.len() != code.grouping().group(witness.k).len()
            {
                return false;
            }
            interference(code, criterion, witness.k)
        }
    };
    if criterion == Criterion::Zf && (witness.k >= k_total || witness.a_k.len() != 1) {
        return false;
    }
    if witness
        .u
        .iter()
        .enumerate()
        .any(|(i, &e)| e != 0.0 && allowed.binary_search(&i).is_err())
    {
        return false;
    }
    let v: Vec<T> = witness
        .symbol_vector(code, criterion)
        .into_iter()
        .map(T::lit)
        .collect();
    !full_rank(relative_min_singular_value(code.design(), &v))
}

fn interference<T: Real>(code: &DstbcCode<T>, criterion: Criterion, k: usize) -> Vec<usize> {
    match criterion {
        Criterion::Pic => code.grouping().complement(k),
        Criterion::PicSic => code.grouping().tail(k),
        Criterion::Zf => unreachable!("ZF has no group structure"),
    }
}

struct TaskOutcome {
    tested: u64,
    min_rel: f64,
    /// Group of the task and the first failing symbol vector.
    failure: Option<(usize, Vec<f64>)>,
}

fn merge(outcomes: Vec<TaskOutcome>) -> (u64, f64, Option<(usize, Vec<f64>)>) {
    outcomes
        .into_iter()
        .fold((0, f64::INFINITY, None), |(n, m, w), o| {
            (n + o.tested, m.min(o.min_rel), w.or(o.failure))
        })
}

fn gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

fn check_grouped<T: Real, R: Rng + ?Sized>(
    code: &DstbcCode<T>,
    criterion: Criterion,
    trials: usize,
    rng: &mut R,
) -> CriterionReport {
    let grouping = code.grouping();
    let base: u64 = rng.random();
    let mut tasks: Vec<(usize, DVector<T>)> = Vec::new();
    let mut coverage = Vec::with_capacity(grouping.len());
    for k in 0..grouping.len() {
        let nonzero: Vec<DVector<T>> = difference_set(&code.group_sets()[k])
            .into_iter()
            .skip(1)
            .collect();
        let total = nonzero.len();
        let chosen: Vec<DVector<T>> = if total <= DIFFERENCE_CAP {
            nonzero
        } else {
            let mut idx = sample(rng, total, DIFFERENCE_CAP).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| nonzero[i].clone()).collect()
        };
        coverage.push((chosen.len(), total));
        tasks.extend(chosen.into_iter().map(|a| (k, a)));
    }
    let k_total = code.num_symbols();
    let outcomes: Vec<TaskOutcome> = tasks
        .par_iter()
        .enumerate()
        .map(|(idx, (k, a))| {
            let group = grouping.group(*k);
            let others = interference(code, criterion, *k);
            let mut task_rng = substream(base, idx as u64);
            let draws = if others.is_empty() { 1 } else { trials.max(1) };
            let mut outcome = TaskOutcome {
                tested: 0,
                min_rel: f64::INFINITY,
                failure: None,
            };
            let mut v = vec![T::zero(); k_total];
            for (&s, &ai) in group.iter().zip(a.iter()) {
                v[s] = ai;
            }
            for _ in 0..draws {
                for &j in &others {
                    v[j] = gaussian(&mut task_rng);
                }
                let rel = relative_min_singular_value(code.design(), &v);
                outcome.tested += 1;
                outcome.min_rel = outcome.min_rel.min(rel);
                if !full_rank(rel) && outcome.failure.is_none() {
                    outcome.failure = Some((*k, v.iter().map(|e| e.as_f64()).collect()));
                }
            }
            outcome
        })
        .collect();
    let (tested, min_rel, failure) = merge(outcomes);
    let witness = failure.map(|(k, v)| grouped_witness(code, k, v));
    finish(code, criterion, tested, min_rel, witness, coverage)
}

/// Splits a failing vector into `(k, a_k, u)` for group `k`.
fn grouped_witness<T: Real>(code: &DstbcCode<T>, k: usize, mut v: Vec<f64>) -> Witness {
    let a_k = code
        .grouping()
        .group(k)
        .iter()
        .map(|&s| std::mem::take(&mut v[s]))
        .collect();
    Witness { k, a_k, u: v }
}

fn finish<T: Real>(
    code: &DstbcCode<T>,
    criterion: Criterion,
    tested: u64,
    min_rel: f64,
    witness: Option<Witness>,
    coverage: Vec<(usize, usize)>,
) -> CriterionReport {
    let passed = witness.is_none();
    let analytic_certificate =
        certificate_applies(code, criterion).then(|| passed && cod_certificate(code).is_ok());
    CriterionReport {
        criterion,
        passed,
        samples_tested: tested,
        min_singular_value: if min_rel.is_finite() { min_rel } else { 0.0 },
        witness,
        analytic_certificate,
        coverage,
    }
}

/// Full-rank check for PIC decoding.
pub fn check_pic<T: Real, R: Rng + ?Sized>(
    code: &DstbcCode<T>,
    trials: usize,
    rng: &mut R,
) -> CriterionReport {
    check_grouped(code, Criterion::Pic, trials, rng)
}

/// Full-rank check for PIC-SIC decoding in group order.
pub fn check_pic_sic<T: Real, R: Rng + ?Sized>(
    code: &DstbcCode<T>,
    trials: usize,
    rng: &mut R,
) -> CriterionReport {
    check_grouped(code, Criterion::PicSic, trials, rng)
}

/// Full-rank check for ZF decoding: every `±e_i`, then `trials` Gaussian `u`.
pub fn check_zf<T: Real, R: Rng + ?Sized>(
    code: &DstbcCode<T>,
    trials: usize,
    rng: &mut R,
) -> CriterionReport {
    let k = code.num_symbols();
    let base: u64 = rng.random();
    let units = 2 * k;
    let outcomes: Vec<TaskOutcome> = (0..units + trials)
        .into_par_iter()
        .map(|idx| {
            let v: Vec<T> = if idx < units {
                let sign = if idx % 2 == 0 { T::one() } else { -T::one() };
                (0..k)
                    .map(|i| if i == idx / 2 { sign } else { T::zero() })
                    .collect()
            } else {
                let mut r = substream(base, idx as u64);
                (0..k).map(|_| gaussian(&mut r)).collect()
            };
            let rel = relative_min_singular_value(code.design(), &v);
            TaskOutcome {
                tested: 1,
                min_rel: rel,
                failure: (!full_rank(rel)).then(|| (0, v.iter().map(|e| e.as_f64()).collect())),
            }
        })
        .collect();
    let (tested, min_rel, failure) = merge(outcomes);
    let witness = failure.map(|(_, v)| zf_witness(&v));
    finish(code, Criterion::Zf, tested, min_rel, witness, Vec::new())
}

pub fn check<T: Real, R: Rng + ?Sized>(
    code: &DstbcCode<T>,
    criterion: Criterion,
    trials: usize,
    rng: &mut R,
) -> CriterionReport {
    match criterion {
        Criterion::Pic => check_pic(code, trials, rng),
        Criterion::PicSic => check_pic_sic(code, trials, rng),
        Criterion::Zf => check_zf(code, trials, rng),
    }
}

/// Whether the layered-construction certificate covers `criterion`: PIC-SIC
/// always, PIC for at most two layers, ZF for single-symbol groups.
pub fn certificate_applies<T: Real>(code: &DstbcCode<T>, criterion: Criterion) -> bool {
    match (code.params(), criterion) {
        (None, _) => false,
        (Some(_), Criterion::PicSic) => true,
        (Some(p), Criterion::Pic) => p.layers <= 2,
        (Some(p), Criterion::Zf) => p.lambda == 1,
    }
}

/// Analytic full-diversity certificate for a code from the layered
/// construction. It verifies the hypotheses of the determinant argument:
///
/// 1. the building block is a complex orthogonal design;
/// 2. every group's signal set is a lattice rotated by a matrix under which
///    no coordinate of a nonzero difference vanishes;
/// 3. each symbol occupies only blocks of its own diagonal layer, and each
///    block of layer `m` holds one symbol from every group of that layer,
///    with block weights forming a complex orthogonal design.
pub fn cod_certificate<T: Real>(code: &DstbcCode<T>) -> Result<()> {
    let refuse = |why: String| Err(Error::CertificateRefused(why));
    let Some(params) = code.params() else {
        return refuse("code does not come from the layered construction".into());
    };
    if !params.cod.verify() {
        return refuse("building block is not a complex orthogonal design".into());
    }
    for (k, set) in code.group_sets().iter().enumerate() {
        let identity;
        let rotation = match set.rotation() {
            Some(r) => r,
            None if set.dim() == 1 => {
                identity = RotationMatrix::identity(1);
                &identity
            }
            None => return refuse(format!("group {k} signal set has no rotation metadata")),
        };
        if rotation.dim() != set.dim() || !verify_rotation(rotation, set.components()) {
            return refuse(format!("group {k} rotation is not full diversity"));
        }
    }
    let (tp, np, kp) = (
        params.cod.rows(),
        params.cod.cols(),
        params.cod.num_symbols(),
    );
    let (l, n, lambda) = (params.block_columns(), params.layers, params.lambda);
    let design = code.design();
    let grouping = code.grouping();
    let group_of = {
        let mut g = vec![0usize; code.num_symbols()];
        for (k, members) in grouping.groups().iter().enumerate() {
            for &s in members {
                g[s] = k;
            }
        }
        g
    };
    let layer_of = |s: usize| s / (lambda * kp);
    let groups_per_layer = grouping.len() / n;
    let tol = T::lit(COD_TOL);
    for r in 0..n + l - 1 {
        for c in 0..l {
            let block = |s: usize| {
                design
                    .weight(s)
                    .view((r * tp, c * np), (tp, np))
                    .into_owned()
            };
            let present: Vec<usize> = (0..code.num_symbols())
                .filter(|&s| block(s).iter().any(|e| modulus(*e) > tol))
                .collect();
            let m = r.checked_sub(c).filter(|&m| m < n);
            let Some(m) = m else {
                if !present.is_empty() {
                    return refuse(format!("block ({r}, {c}) lies off the layers but is used"));
                }
                continue;
            };
            if present.iter().any(|&s| layer_of(s) != m) {
                return refuse(format!("block ({r}, {c}) mixes symbols of another layer"));
            }
            let mut groups: Vec<usize> = present.iter().map(|&s| group_of[s]).collect();
            groups.sort_unstable();
            groups.dedup();
            if present.len() != kp
                || groups.len() != kp
                || groups.len() != groups_per_layer
                || groups.iter().any(|&k| params.layer_of_group(k) != m)
            {
                return refuse(format!(
                    "block ({r}, {c}) does not hold one symbol per group of layer {m}"
                ));
            }
            let weights: Vec<DMatrix<_>> = present.iter().map(|&s| block(s)).collect();
            if !verify_cod_weights(&weights, tol) {
                return refuse(format!(
                    "block ({r}, {c}) is not a complex orthogonal design"
                ));
            }
        }
    }
    Ok(())
}

/// PIC-SIC check of a code with some relays removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelayDropReport {
    pub dropped: Vec<usize>,
    pub report: CriterionReport,
}

/// Runs the PIC-SIC check on every code obtained by dropping `a ≤ max_drop`
/// relays. Sizes with more than [`DROP_SET_CAP`] subsets are sampled.
pub fn relay_failure_sweep<T: Real, R: Rng + ?Sized>(
    code: &DstbcCode<T>,
    max_drop: usize,
    trials: usize,
    rng: &mut R,
) -> Result<Vec<RelayDropReport>> {
    let n = code.relays();
    if max_drop >= n {
        return Err(Error::Parameter(format!(
            "cannot drop {max_drop} of {n} relays"
        )));
    }
    let mut out = Vec::new();
    for a in 0..=max_drop {
        for dropped in drop_sets(n, a, rng) {
            let reduced = drop_relays(code, &dropped)?;
            let report = check_pic_sic(&reduced, trials, rng);
            out.push(RelayDropReport { dropped, report });
        }
    }
    Ok(out)
}

fn drop_sets<R: Rng + ?Sized>(n: usize, a: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let all = combinations(n, a, DROP_SET_CAP + 1);
    if all.len() <= DROP_SET_CAP {
        return all;
    }
    let mut seen = std::collections::BTreeSet::new();
    while seen.len() < DROP_SET_CAP {
        let mut s = sample(rng, n, a).into_vec();
        s.sort_unstable();
        seen.insert(s);
    }
    seen.into_iter().collect()
}

/// Lexicographic `a`-subsets of `0..n`, stopping after `limit`.
fn combinations(n: usize, a: usize, limit: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..a).collect();
    if a > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        if out.len() >= limit {
            return out;
        }
        let Some(i) = (0..a).rev().find(|&i| cur[i] < n - a + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..a {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// For symmetric invertible `A` and a subspace `V′`, checks that the
/// orthogonal complement of `A V′` equals `A⁻¹ V′^⊥`, by comparing orthogonal
/// projectors within 1e-8 on random instances.
pub fn subspace_duality_selftest<R: Rng + ?Sized>(dim: usize, trials: usize, rng: &mut R) -> bool {
    if dim < 2 {
        return false;
    }
    (0..trials).all(|_| {
        let q = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.sample(StandardNormal))
            .qr()
            .q();
        let eig = DVector::from_fn(dim, |_, _| {
            let mag = rng.random_range(0.5..2.0);
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        });
        let a = &q * DMatrix::from_diagonal(&eig) * q.transpose();
        let d = rng.random_range(1..dim);
        let basis = DMatrix::<f64>::from_fn(dim, d, |_, _| rng.sample(StandardNormal));
        duality_holds(&a, &basis)
    })
}

/// Compares `proj((A·V′)^⊥)` with `proj(col(A⁻¹·basis(V′^⊥)))`.
pub fn duality_holds(a: &DMatrix<f64>, v_basis: &DMatrix<f64>) -> bool {
    let Some(a_inv) = a.clone().try_inverse() else {
        return false;
    };
    let lhs = projector_complement(&(a * v_basis), 1e-10);
    let perp = orthonormal_complement(v_basis);
    let rhs =
        DMatrix::identity(a.nrows(), a.nrows()) - projector_complement(&(a_inv * perp), 1e-10);
    (lhs - rhs).amax() <= 1e-8
}

fn orthonormal_complement(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let p = projector_complement(m, 1e-10);
    let eig = p.symmetric_eigen();
    let cols: Vec<_> = (0..n)
        .filter(|&i| eig.eigenvalues[i] > 0.5)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Checks the trace and spectral covariance bound on `realizations` random
/// channels with `rx_antennas` receive antennas.
pub fn covariance_bound_selftest<T: Real, R: Rng + ?Sized>(
    code: &DstbcCode<T>,
    power: &PowerConfig<T>,
    rx_antennas: usize,
    realizations: usize,
    rng: &mut R,
) -> Result<bool> {
    for _ in 0..realizations {
        let ch = ChannelRealization::draw(code.relays(), rx_antennas, rng);
        if !covariance_bound(code, &ch, power)?.holds() {
            return Ok(false);
        }
    }
    Ok(true)
}
