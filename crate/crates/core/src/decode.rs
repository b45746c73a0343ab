//! Group decoders for the whitened model `y = G x + n`: exhaustive ML, partial
//! interference cancellation (PIC), PIC with successive interference
//! cancellation (PIC-SIC), and their singleton-group forms ZF / ZF-SIC.
//!
//! Every search is exhaustive over a group's signal set and keeps the lowest
//! point index on ties, so decisions are deterministic.

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::constellation::SignalSet;
use crate::construct::GroupingScheme;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative singular-value threshold for the numerical rank of interference.
pub const RANK_TOL: f64 = 1e-10;

/// Default bound on the ML product search space.
pub const ML_CAP: u128 = 1 << 20;

#[derive(Debug, Clone, Copy)]
pub struct DecodeProblem<'a, T: Real> {
    pub g: &'a DMatrix<T>,
    pub y: &'a DVector<T>,
    pub grouping: &'a GroupingScheme,
    pub group_sets: &'a [SignalSet<T>],
}

impl<'a, T: Real> DecodeProblem<'a, T> {
    pub fn new(
        g: &'a DMatrix<T>,
        y: &'a DVector<T>,
        grouping: &'a GroupingScheme,
        group_sets: &'a [SignalSet<T>],
    ) -> Result<Self> {
        if g.ncols() != grouping.num_symbols() {
            return Err(Error::Dimension {
                expected: grouping.num_symbols(),
                actual: g.ncols(),
            });
        }
        if g.nrows() != y.len() {
            return Err(Error::Dimension {
                expected: g.nrows(),
                actual: y.len(),
            });
        }
        if group_sets.len() != grouping.len() {
            return Err(Error::Dimension {
                expected: grouping.len(),
                actual: group_sets.len(),
            });
        }
        for (k, s) in group_sets.iter().enumerate() {
            if s.dim() != grouping.group(k).len() {
                return Err(Error::Dimension {
                    expected: grouping.group(k).len(),
                    actual: s.dim(),
                });
            }
        }
        Ok(Self {
            g,
            y,
            grouping,
            group_sets,
        })
    }

    fn columns(&self, indices: &[usize]) -> DMatrix<T> {
        self.g.select_columns(indices)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult<T: Real> {
    /// Concatenated group decisions in symbol order.
    pub x_hat: DVector<T>,
    /// Chosen point index within each group's signal set.
    pub indices: Vec<usize>,
    /// Minimised metric of each group stage (ML: a single global metric).
    pub per_group_residuals: Vec<T>,
}

/// `I − QQᵀ` where `Q` spans the numerical column space of `m`.
///
/// The rank counts singular values above `tol · σmax`; the orthonormal basis
/// comes from a column-pivoted QR, whose leading `Q` columns stay accurate
/// when `m` has several exactly-zero singular values (the SVD's left vectors
/// can then be off by ~1e-7).
pub fn projector_complement<T: Real>(m: &DMatrix<T>, tol: T) -> DMatrix<T> {
    let n = m.nrows();
    let mut p = DMatrix::identity(n, n);
    if m.ncols() == 0 || n == 0 {
        return p;
    }
    let sv = SVD::new(m.clone(), false, false).singular_values;
    let smax = sv.max();
    if smax <= T::zero() {
        return p;
    }
    let rank = sv.iter().filter(|&&s| s > tol * smax).count();
    if rank == 0 {
        return p;
    }
    let q = m.clone().col_piv_qr().q();
    let basis = q.columns(0, rank);
    p -= basis * basis.transpose();
    p
}

/// `cols · point`, summed over columns in order. Every metric in this module
/// subtracts these exact values, so equal problems give bit-identical metrics.
fn contribution<T: Real>(cols: &DMatrix<T>, point: &DVector<T>) -> Vec<T> {
    (0..cols.nrows())
        .map(|d| {
            let mut s = T::zero();
            for c in 0..cols.ncols() {
                s += cols[(d, c)] * point[c];
            }
            s
        })
        .collect()
}

/// Point of `set` minimising `‖target − cols·a‖²`; lowest index wins ties.
fn search_group<T: Real>(target: &DVector<T>, cols: &DMatrix<T>, set: &SignalSet<T>) -> (usize, T) {
    let mut best = (0usize, T::zero());
    for (i, p) in set.points().iter().enumerate() {
        let s = contribution(cols, p);
        let mut metric = T::zero();
        for (&t, &sd) in target.iter().zip(&s) {
            let r = t - sd;
            metric += r * r;
        }
        if i == 0 || metric < best.1 {
            best = (i, metric);
        }
    }
    best
}

fn assemble<T: Real>(
    p: &DecodeProblem<'_, T>,
    indices: Vec<usize>,
    residuals: Vec<T>,
) -> DecodeResult<T> {
    let mut x_hat = DVector::zeros(p.grouping.num_symbols());
    for (k, &idx) in indices.iter().enumerate() {
        let point = p.group_sets[k].point(idx);
        for (j, &s) in p.grouping.group(k).iter().enumerate() {
            x_hat[s] = point[j];
        }
    }
    DecodeResult {
        x_hat,
        indices,
        per_group_residuals: residuals,
    }
}

/// Decodes group `k` against interference columns `interference`.
fn project_and_search<T: Real>(
    p: &DecodeProblem<'_, T>,
    k: usize,
    target: &DVector<T>,
    interference: &[usize],
) -> (usize, T) {
    let cols = p.columns(p.grouping.group(k));
    if interference.is_empty() {
        return search_group(target, &cols, &p.group_sets[k]);
    }
    let proj = projector_complement(&p.columns(interference), T::lit(RANK_TOL));
    search_group(&(&proj * target), &(&proj * cols), &p.group_sets[k])
}

/// Each group decoded independently after projecting out all other groups.
pub fn pic_decode<T: Real>(p: &DecodeProblem<'_, T>) -> DecodeResult<T> {
    let (indices, residuals) = (0..p.grouping.len())
        .map(|k| project_and_search(p, k, p.y, &p.grouping.complement(k)))
        .unzip();
    assemble(p, indices, residuals)
}

/// Groups decoded in index order; each decision is subtracted before the next
/// group, which only projects out the groups not yet decoded.
pub fn pic_sic_decode<T: Real>(p: &DecodeProblem<'_, T>) -> DecodeResult<T> {
    let g = p.grouping.len();
    let mut y_k = p.y.clone();
    let mut indices = Vec::with_capacity(g);
    let mut residuals = Vec::with_capacity(g);
    for k in 0..g {
        let (idx, metric) = project_and_search(p, k, &y_k, &p.grouping.tail(k));
        let cols = p.columns(p.grouping.group(k));
        y_k -= cols * p.group_sets[k].point(idx);
        indices.push(idx);
        residuals.push(metric);
    }
    assemble(p, indices, residuals)
}

/// Splits every group into single symbols with their coordinate alphabets.
fn singleton_refinement<T: Real>(
    p: &DecodeProblem<'_, T>,
) -> Result<(GroupingScheme, Vec<SignalSet<T>>)> {
    let mut groups = Vec::new();
    let mut sets = Vec::new();
    for (k, set) in p.group_sets.iter().enumerate() {
        let comps = set
            .separable_components()
            .ok_or(Error::NotSeparable { group: k })?;
        for (&s, alphabet) in p.grouping.group(k).iter().zip(comps) {
            groups.push(vec![s]);
            let pts = alphabet
                .into_iter()
                .map(|v| DVector::from_element(1, v))
                .collect();
            sets.push(SignalSet::from_points(1, pts)?);
        }
    }
    Ok((GroupingScheme::new(groups)?, sets))
}

fn via_singletons<T: Real>(
    p: &DecodeProblem<'_, T>,
    decoder: fn(&DecodeProblem<'_, T>) -> DecodeResult<T>,
) -> Result<DecodeResult<T>> {
    if p.grouping.lambda_max() <= 1 {
        return Ok(decoder(p));
    }
    let (grouping, sets) = singleton_refinement(p)?;
    let refined = DecodeProblem::new(p.g, p.y, &grouping, &sets)?;
    let r = decoder(&refined);
    let indices = (0..p.grouping.len())
        .map(|k| {
            let v: Vec<T> = p.grouping.group(k).iter().map(|&s| r.x_hat[s]).collect();
            p.group_sets[k].nearest(&v)
        })
        .collect();
    Ok(DecodeResult {
        x_hat: r.x_hat,
        indices,
        per_group_residuals: r.per_group_residuals,
    })
}

/// PIC with one group per real symbol. Refuses non-separable group sets.
pub fn zf_decode<T: Real>(p: &DecodeProblem<'_, T>) -> Result<DecodeResult<T>> {
    via_singletons(p, pic_decode)
}

/// PIC-SIC with one group per real symbol, in symbol order.
pub fn zf_sic_decode<T: Real>(p: &DecodeProblem<'_, T>) -> Result<DecodeResult<T>> {
    via_singletons(p, pic_sic_decode)
}

pub fn ml_decode<T: Real>(p: &DecodeProblem<'_, T>) -> Result<DecodeResult<T>> {
    ml_decode_capped(p, ML_CAP)
}

/// Exhaustive minimisation of `‖y − Gx‖²` over the product of group sets.
///
/// Candidates are visited in lexicographic order of group point indices.
pub fn ml_decode_capped<T: Real>(p: &DecodeProblem<'_, T>, cap: u128) -> Result<DecodeResult<T>> {
    let size = p
        .group_sets
        .iter()
        .try_fold(1u128, |acc, s| acc.checked_mul(s.len() as u128))
        .unwrap_or(u128::MAX);
    if size > cap {
        return Err(Error::SearchSpaceTooLarge { size, cap });
    }
    let g = p.grouping.len();
    let contributions: Vec<Vec<Vec<T>>> = (0..g)
        .map(|k| {
            let cols = p.columns(p.grouping.group(k));
            p.group_sets[k]
                .points()
                .iter()
                .map(|pt| contribution(&cols, pt))
                .collect()
        })
        .collect();
    let mut residuals: Vec<Vec<T>> = vec![p.y.iter().copied().collect(); g];
    let mut search = MlSearch {
        contributions: &contributions,
        current: vec![0; g],
        best: None,
    };
    search.descend(0, &mut residuals);
    let (indices, metric) = search.best.expect("non-empty search space");
    Ok(assemble(p, indices, vec![metric]))
}

struct MlSearch<'c, T: Real> {
    /// `[group][point][row]` contributions `G_{I_k} a`.
    contributions: &'c [Vec<Vec<T>>],
    current: Vec<usize>,
    best: Option<(Vec<usize>, T)>,
}

impl<T: Real> MlSearch<'_, T> {
    /// `residuals[0]` holds `y` minus the contributions of groups `< level`;
    /// the remaining entries are scratch space for deeper levels.
    fn descend(&mut self, level: usize, residuals: &mut [Vec<T>]) {
        let last = level + 1 == self.contributions.len();
        let (head, tail) = residuals.split_at_mut(1);
        let src = &head[0];
        for (i, contrib) in self.contributions[level].iter().enumerate() {
            self.current[level] = i;
            if last {
                let mut metric = T::zero();
                for (&y, &c) in src.iter().zip(contrib) {
                    let r = y - c;
                    metric += r * r;
                }
                if self.best.as_ref().is_none_or(|(_, m)| metric < *m) {
                    self.best = Some((self.current.clone(), metric));
                }
            } else {
                for ((dst, &y), &c) in tail[0].iter_mut().zip(src).zip(contrib) {
                    *dst = y - c;
                }
                self.descend(level + 1, tail);
            }
        }
    }
}

/// Decoder selector shared by the harness and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderKind {
    Ml,
    Pic,
    PicSic,
    Zf,
    ZfSic,
}

impl DecoderKind {
    pub const ALL: [DecoderKind; 5] = [
        DecoderKind::Ml,
        DecoderKind::Pic,
        DecoderKind::PicSic,
        DecoderKind::Zf,
        DecoderKind::ZfSic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DecoderKind::Ml => "ml",
            DecoderKind::Pic => "pic",
            DecoderKind::PicSic => "pic-sic",
            DecoderKind::Zf => "zf",
            DecoderKind::ZfSic => "zf-sic",
        }
    }

    pub fn decode<T: Real>(self, p: &DecodeProblem<'_, T>) -> Result<DecodeResult<T>> {
        match self {
            DecoderKind::Ml => ml_decode(p),
            DecoderKind::Pic => Ok(pic_decode(p)),
            DecoderKind::PicSic => Ok(pic_sic_decode(p)),
            DecoderKind::Zf => zf_decode(p),
            DecoderKind::ZfSic => zf_sic_decode(p),
        }
    }

    /// Rejects decoders that cannot run on these group sets.
    pub fn check_compatible<T: Real>(self, group_sets: &[SignalSet<T>]) -> Result<()> {
        match self {
            DecoderKind::Ml => {
                let size = group_sets
                    .iter()
                    .try_fold(1u128, |acc, s| acc.checked_mul(s.len() as u128))
                    .unwrap_or(u128::MAX);
                if size > ML_CAP {
                    return Err(Error::SearchSpaceTooLarge { size, cap: ML_CAP });
                }
            }
            DecoderKind::Zf | DecoderKind::ZfSic => {
                if let Some(k) = group_sets
                    .iter()
                    .position(|s| s.dim() > 1 && s.separable_components().is_none())
                {
                    return Err(Error::NotSeparable { group: k });
                }
            }
            DecoderKind::Pic | DecoderKind::PicSic => {}
        }
        Ok(())
    }
}

impl std::fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DecoderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DecoderKind::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown decoder '{s}'")))
    }
}

/// `‖y − G x‖²`.
pub fn residual<T: Real>(g: &DMatrix<T>, y: &DVector<T>, x: &DVector<T>) -> T {
    (y - g * x).norm_squared()
}
