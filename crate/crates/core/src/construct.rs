//! The layered COD-based code family, its grouping scheme, rate accounting,
//! named presets and relay-failure derivatives.
//!
//! A code for `N = L·N′` relays is a grid of `(n+L−1) × L` blocks of size
//! `T′ × N′`. Block `(r, c)` holds `W(r−c+1, c)` when `1 ≤ r−c+1 ≤ n` and is
//! zero otherwise, so the code consists of `n` diagonal layers. `W(m, ℓ)` is
//! the COD in the symbols `x_{λK′(m−1)+ℓ+λ(i−1)}`, `i = 1..K′`, for `ℓ ≤ λ`
//! and repeats with period `λ` across block columns.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::constellation::{default_signal_set, SignalSet};
use crate::design::{CodProfile, DesignDoc, LinearDesign};
use crate::error::{Error, Result};
use crate::relay::{extract_relay_form, ConjugateLinearForm};
use crate::scalar::Real;

/// Exact rational used for rates.
pub type Rational = Ratio<u64>;

/// A partition of the symbol indices `0..K` into decoding groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct GroupingScheme {
    groups: Vec<Vec<usize>>,
    num_symbols: usize,
}

impl GroupingScheme {
    /// Validates that `groups` partition `0..K`; each group is sorted.
    pub fn new(mut groups: Vec<Vec<usize>>) -> Result<Self> {
        let k: usize = groups.iter().map(Vec::len).sum();
        let mut seen = vec![false; k];
        for g in &mut groups {
            if g.is_empty() {
                return Err(Error::Parameter("empty group".into()));
            }
            g.sort_unstable();
            for &i in g.iter() {
                if i >= k || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Parameter(format!(
                        "groups do not partition 0..{k} (index {i})"
                    )));
                }
            }
        }
        Ok(Self {
            groups,
            num_symbols: k,
        })
    }

    /// Consecutive groups of `lambda` symbols: `{kλ, …, kλ+λ−1}` for
    /// `k = 0..nK′`.
    pub fn consecutive(lambda: usize, k_prime: usize, layers: usize) -> Self {
        let g = layers * k_prime;
        let groups = (0..g)
            .map(|k| (k * lambda..(k + 1) * lambda).collect())
            .collect();
        Self {
            groups,
            num_symbols: g * lambda,
        }
    }

    pub fn singletons(k: usize) -> Self {
        Self {
            groups: (0..k).map(|i| vec![i]).collect(),
            num_symbols: k,
        }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group(&self, k: usize) -> &[usize] {
        &self.groups[k]
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    /// Largest group size `λ`.
    pub fn lambda_max(&self) -> usize {
        self.groups.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `I_kᶜ`, sorted.
    pub fn complement(&self, k: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .groups
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .flat_map(|(_, g)| g.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    /// `Ĩ_k`: the union of the groups after `k`, sorted.
    pub fn tail(&self, k: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.groups[k + 1..].iter().flatten().copied().collect();
        out.sort_unstable();
        out
    }
}

impl TryFrom<Vec<Vec<usize>>> for GroupingScheme {
    type Error = Error;
    fn try_from(groups: Vec<Vec<usize>>) -> Result<Self> {
        Self::new(groups)
    }
}

impl From<GroupingScheme> for Vec<Vec<usize>> {
    fn from(g: GroupingScheme) -> Self {
        g.groups
    }
}

/// Parameters of a code built by [`build`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionParams<T: Real> {
    pub cod: CodProfile<T>,
    /// `N`.
    pub relays: usize,
    /// `λ`.
    pub lambda: usize,
    /// `n`, the number of diagonal layers.
    pub layers: usize,
}

impl<T: Real> ConstructionParams<T> {
    /// `L = N / N′`.
    pub fn block_columns(&self) -> usize {
        self.relays / self.cod.cols()
    }

    /// Layer (0-based) that encodes group `k`.
    pub fn layer_of_group(&self, k: usize) -> usize {
        k / self.cod.num_symbols()
    }
}

/// A distributed space-time block code with its grouping, per-group signal
/// sets and (when it exists) conjugate-linear relay form.
#[derive(Debug, Clone, PartialEq)]
pub struct DstbcCode<T: Real> {
    design: LinearDesign<T>,
    grouping: GroupingScheme,
    group_sets: Vec<SignalSet<T>>,
    relay_form: Option<ConjugateLinearForm<T>>,
    params: Option<ConstructionParams<T>>,
}

impl<T: Real> DstbcCode<T> {
    /// Wraps an arbitrary design. Default signal sets are attached per group;
    /// the relay form is extracted if the design is conjugate linear.
    pub fn from_design(design: LinearDesign<T>, grouping: GroupingScheme) -> Result<Self> {
        if grouping.num_symbols() != design.num_symbols() {
            return Err(Error::Dimension {
                expected: design.num_symbols(),
                actual: grouping.num_symbols(),
            });
        }
        let group_sets = default_sets(&grouping)?;
        let relay_form = extract_relay_form(&design).ok();
        Ok(Self {
            design,
            grouping,
            group_sets,
            relay_form,
            params: None,
        })
    }

    pub fn design(&self) -> &LinearDesign<T> {
        &self.design
    }

    pub fn grouping(&self) -> &GroupingScheme {
        &self.grouping
    }

    pub fn group_sets(&self) -> &[SignalSet<T>] {
        &self.group_sets
    }

    pub fn relay_form(&self) -> Option<&ConjugateLinearForm<T>> {
        self.relay_form.as_ref()
    }

    pub fn require_relay_form(&self) -> Result<&ConjugateLinearForm<T>> {
        self.relay_form.as_ref().ok_or(Error::MissingRelayForm)
    }

    pub fn params(&self) -> Option<&ConstructionParams<T>> {
        self.params.as_ref()
    }

    /// `N`.
    pub fn relays(&self) -> usize {
        self.design.cols()
    }

    /// `K`.
    pub fn num_symbols(&self) -> usize {
        self.design.num_symbols()
    }

    /// `T2`.
    pub fn t2(&self) -> usize {
        self.design.rows()
    }

    /// `T1`, when a relay form exists.
    pub fn t1(&self) -> Option<usize> {
        self.relay_form.as_ref().map(ConjugateLinearForm::t1)
    }

    /// Replaces every group's signal set with `set`.
    pub fn with_signal_set(self, set: SignalSet<T>) -> Result<Self> {
        let sets = vec![set; self.grouping.len()];
        self.with_group_sets(sets)
    }

    pub fn with_group_sets(mut self, sets: Vec<SignalSet<T>>) -> Result<Self> {
        if sets.len() != self.grouping.len() {
            return Err(Error::Dimension {
                expected: self.grouping.len(),
                actual: sets.len(),
            });
        }
        for (k, s) in sets.iter().enumerate() {
            if s.dim() != self.grouping.group(k).len() {
                return Err(Error::Dimension {
                    expected: self.grouping.group(k).len(),
                    actual: s.dim(),
                });
            }
        }
        self.group_sets = sets;
        Ok(self)
    }

    /// Total bits carried by one codeword.
    pub fn bits_per_codeword(&self) -> u32 {
        self.group_sets.iter().map(SignalSet::bits_per_point).sum()
    }

    /// Serialised form: the design document plus grouping, `S` and `T1`.
    pub fn to_doc(&self) -> CodeDoc {
        CodeDoc {
            design: self.design.to_doc(),
            grouping: Some(self.grouping.groups().to_vec()),
            conjugated: self.relay_form.as_ref().map(|f| f.conjugated().to_vec()),
            t1: self.t1(),
        }
    }

    /// Loads a code document. Missing grouping means one group per symbol.
    pub fn from_doc(doc: &CodeDoc) -> Result<Self> {
        let design = LinearDesign::from_doc(&doc.design)?;
        if !design.weights_independent() {
            return Err(Error::Parameter(
                "weight matrices are linearly dependent over R".into(),
            ));
        }
        let grouping = match &doc.grouping {
            Some(g) => GroupingScheme::new(g.clone())?,
            None => GroupingScheme::singletons(design.num_symbols()),
        };
        Self::from_design(design, grouping)
    }
}

/// Serialised code: the flat design fields plus optional `grouping`, `S`, `T1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeDoc {
    #[serde(flatten)]
    pub design: DesignDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grouping: Option<Vec<Vec<usize>>>,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub conjugated: Option<Vec<usize>>,
    #[serde(rename = "T1", default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<usize>,
}

fn default_sets<T: Real>(grouping: &GroupingScheme) -> Result<Vec<SignalSet<T>>> {
    grouping
        .groups()
        .iter()
        .map(|g| default_signal_set(g.len()))
        .collect()
}

/// Builds the layered code for `(N, W, λ, n)`.
pub fn build<T: Real>(
    relays: usize,
    cod: &CodProfile<T>,
    lambda: usize,
    layers: usize,
) -> Result<DstbcCode<T>> {
    let (tp, np, kp) = (cod.rows(), cod.cols(), cod.num_symbols());
    if np == 0 || kp == 0 || relays == 0 || !relays.is_multiple_of(np) {
        return Err(Error::Parameter(format!(
            "N = {relays} is not a multiple of N′ = {np}"
        )));
    }
    let l = relays / np;
    if lambda == 0 || lambda > l {
        return Err(Error::Parameter(format!(
            "λ = {lambda} must lie in 1..={l}"
        )));
    }
    if layers == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    let k = lambda * layers * kp;
    let t2 = (layers + l - 1) * tp;
    let mut weights = vec![DMatrix::zeros(t2, relays); k];
    for c in 0..l {
        let ell = c % lambda;
        for m in 0..layers {
            let r = m + c;
            for i in 0..kp {
                let symbol = lambda * kp * m + ell + lambda * i;
                weights[symbol]
                    .view_mut((r * tp, c * np), (tp, np))
                    .copy_from(cod.design().weight(i));
            }
        }
    }
    let design = LinearDesign::new(t2, relays, weights)?;
    let grouping = GroupingScheme::consecutive(lambda, kp, layers);
    let group_sets = default_sets(&grouping)?;
    let relay_form = extract_relay_form(&design)?;
    Ok(DstbcCode {
        design,
        grouping,
        group_sets,
        relay_form: Some(relay_form),
        params: Some(ConstructionParams {
            cod: cod.clone(),
            relays,
            lambda,
            layers,
        }),
    })
}

/// Removes the listed relays (0-based) from every codeword.
pub fn drop_relays<T: Real>(code: &DstbcCode<T>, relays: &[usize]) -> Result<DstbcCode<T>> {
    let mut dropped = relays.to_vec();
    dropped.sort_unstable();
    dropped.dedup();
    if dropped.len() != relays.len() {
        return Err(Error::Parameter("duplicate relay index".into()));
    }
    if let Some(&j) = dropped.iter().find(|&&j| j >= code.relays()) {
        return Err(Error::Parameter(format!("relay {j} out of range")));
    }
    if dropped.len() >= code.relays() {
        return Err(Error::Parameter("cannot drop every relay".into()));
    }
    if dropped.is_empty() {
        return Ok(code.clone());
    }
    let keep: Vec<usize> = (0..code.relays())
        .filter(|j| dropped.binary_search(j).is_err())
        .collect();
    Ok(DstbcCode {
        design: code.design.select_columns(&keep)?,
        grouping: code.grouping.clone(),
        group_sets: code.group_sets.clone(),
        relay_form: code.relay_form.as_ref().map(|f| f.drop_relays(&dropped)),
        params: None,
    })
}

/// `R = K / (2(T1 + T2))` complex symbols per channel use.
pub fn rate_cspcu<T: Real>(code: &DstbcCode<T>) -> Result<Rational> {
    let t1 = code.require_relay_form()?.t1();
    Ok(Rational::new(
        code.num_symbols() as u64,
        2 * (t1 + code.t2()) as u64,
    ))
}

/// `log₂|𝒜| / (T1 + T2)` bits per channel use.
pub fn bits_per_channel_use<T: Real>(code: &DstbcCode<T>) -> Result<Rational> {
    let t1 = code.require_relay_form()?.t1();
    Ok(Rational::new(
        code.bits_per_codeword() as u64,
        (t1 + code.t2()) as u64,
    ))
}

/// Named members of the family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    /// Alamouti building block, free `(N, λ, n)`.
    Example1,
    /// Trivial 1×1 building block, free `(N, λ, n)`.
    Example2,
    /// Trivial building block with `λ = 1`.
    Toeplitz,
    /// Trivial building block with `λ = N`.
    Example2Full,
    /// Single-complex-symbol codes: `N = 2` (trivial) or `N = 4` (Alamouti), `λ = 2`.
    ShiZhang,
    /// Alamouti building block with `λ = N/2`.
    AlamoutiHalf,
}

impl PresetName {
    pub const ALL: [PresetName; 6] = [
        PresetName::Example1,
        PresetName::Example2,
        PresetName::Toeplitz,
        PresetName::Example2Full,
        PresetName::ShiZhang,
        PresetName::AlamoutiHalf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Example1 => "example1",
            PresetName::Example2 => "example2",
            PresetName::Toeplitz => "toeplitz",
            PresetName::Example2Full => "example2_full",
            PresetName::ShiZhang => "shi_zhang",
            PresetName::AlamoutiHalf => "alamouti_half",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown preset '{s}'")))
    }
}

/// Free parameters of a preset; unused ones are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PresetParams {
    pub relays: usize,
    pub lambda: Option<usize>,
    pub layers: usize,
}

pub fn preset<T: Real>(name: PresetName, p: PresetParams) -> Result<DstbcCode<T>> {
    let need_lambda = || {
        p.lambda
            .ok_or_else(|| Error::Parameter(format!("preset {name} needs λ")))
    };
    match name {
        PresetName::Example1 => build(p.relays, &CodProfile::alamouti(), need_lambda()?, p.layers),
        PresetName::Example2 => build(p.relays, &CodProfile::trivial(), need_lambda()?, p.layers),
        PresetName::Toeplitz => build(p.relays, &CodProfile::trivial(), 1, p.layers),
        PresetName::Example2Full => build(p.relays, &CodProfile::trivial(), p.relays, p.layers),
        PresetName::ShiZhang => match p.relays {
            2 => build(2, &CodProfile::trivial(), 2, p.layers),
            4 => build(4, &CodProfile::alamouti(), 2, p.layers),
            n => Err(Error::Parameter(format!(
                "shi_zhang is defined for N = 2 or 4, not {n}"
            ))),
        },
        PresetName::AlamoutiHalf => {
            if !p.relays.is_multiple_of(2) {
                return Err(Error::Parameter("alamouti_half needs an even N".into()));
            }
            build(p.relays, &CodProfile::alamouti(), p.relays / 2, p.layers)
        }
    }
}
