//! Conjugate-linear relay form of a design: the source vector `z = V x`, the
//! relay matrices `B_j` and the set `S` of relays that process `r_j*`.
//!
//! Extraction pairs real symbols into complex super-symbols
//! `z_t = x_p ± i x_q` and requires every column to be complex linear either
//! in `z` or in `z*`, uniformly.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::design::LinearDesign;
use crate::error::{Error, Result};
use crate::scalar::{cx, modulus, Cx, Real};

const COEFF_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateLinearForm<T: Real> {
    /// `T1 × K`; `z = V x`.
    v: DMatrix<Cx<T>>,
    /// One `T2 × T1` matrix per relay.
    b: Vec<DMatrix<Cx<T>>>,
    /// Sorted 0-based indices of relays that conjugate their input.
    conjugated: Vec<usize>,
}

impl<T: Real> ConjugateLinearForm<T> {
    /// Broadcast length `T1`.
    pub fn t1(&self) -> usize {
        self.v.nrows()
    }

    pub fn source_matrix(&self) -> &DMatrix<Cx<T>> {
        &self.v
    }

    pub fn relay_matrices(&self) -> &[DMatrix<Cx<T>>] {
        &self.b
    }

    /// `S`, 0-based.
    pub fn conjugated(&self) -> &[usize] {
        &self.conjugated
    }

    pub fn is_conjugated(&self, relay: usize) -> bool {
        self.conjugated.binary_search(&relay).is_ok()
    }

    /// `B̄_j`: `B_j*` for conjugating relays, `B_j` otherwise.
    pub fn bar_b(&self, relay: usize) -> DMatrix<Cx<T>> {
        if self.is_conjugated(relay) {
            self.b[relay].map(|e| e.conj())
        } else {
            self.b[relay].clone()
        }
    }

    pub fn source_vector(&self, x: &[T]) -> DVector<Cx<T>> {
        let xc = DVector::from_iterator(x.len(), x.iter().map(|&v| cx(v, T::zero())));
        &self.v * xc
    }

    /// Codeword built the way the relays build it: column `j` is `B_j z` or
    /// `B_j* z*`.
    pub fn reconstruct(&self, x: &[T]) -> DMatrix<Cx<T>> {
        let z = self.source_vector(x);
        let zc = z.map(|e| e.conj());
        let rows = self.b.first().map_or(0, |b| b.nrows());
        let mut out = DMatrix::zeros(rows, self.b.len());
        for j in 0..self.b.len() {
            let col = if self.is_conjugated(j) {
                self.bar_b(j) * &zc
            } else {
                &self.b[j] * &z
            };
            out.set_column(j, &col);
        }
        out
    }

    /// The form after removing the listed relays (sorted, distinct).
    pub(crate) fn drop_relays(&self, dropped: &[usize]) -> Self {
        let keep: Vec<usize> = (0..self.b.len())
            .filter(|j| dropped.binary_search(j).is_err())
            .collect();
        let b = keep.iter().map(|&j| self.b[j].clone()).collect();
        let conjugated = keep
            .iter()
            .enumerate()
            .filter(|(_, &j)| self.is_conjugated(j))
            .map(|(new, _)| new)
            .collect();
        Self {
            v: self.v.clone(),
            b,
            conjugated,
        }
    }
}

/// Extracts `(V, {B_j}, S)` from a design.
///
/// Columns with no symbol are treated as unconjugated. Among the two valid
/// assignments of each connected component of columns, the one leaving the
/// lowest-indexed column unconjugated is chosen.
pub fn extract_relay_form<T: Real>(design: &LinearDesign<T>) -> Result<ConjugateLinearForm<T>> {
    let k = design.num_symbols();
    let (rows, cols) = (design.rows(), design.cols());
    let tol = T::lit(COEFF_TOL);
    let i_unit = cx(T::zero(), T::one());
    let coeff = |r: usize, c: usize, s: usize| design.weight(s)[(r, c)];
    let nz = |z: Cx<T>| modulus(z) > tol;
    let close = |a: Cx<T>, b: Cx<T>| modulus(a - b) <= tol;

    // Candidate partners: q with c_q = ±i c_p in every entry where p appears.
    let mut candidates: Vec<Option<Vec<usize>>> = vec![None; k];
    for c in 0..cols {
        for r in 0..rows {
            for p in 0..k {
                let cp = coeff(r, c, p);
                if !nz(cp) {
                    continue;
                }
                let here: Vec<usize> = (0..k)
                    .filter(|&q| {
                        q != p && {
                            let cq = coeff(r, c, q);
                            close(cq, cp * i_unit) || close(cq, -(cp * i_unit))
                        }
                    })
                    .collect();
                let slot = &mut candidates[p];
                *slot = Some(match slot.take() {
                    None => here,
                    Some(prev) => prev.into_iter().filter(|q| here.contains(q)).collect(),
                });
            }
        }
    }

    let mut partner = vec![usize::MAX; k];
    for p in 0..k {
        if partner[p] != usize::MAX {
            continue;
        }
        let cands = candidates[p]
            .as_ref()
            .ok_or_else(|| Error::NotConjugateLinear(format!("symbol {p} does not appear")))?;
        let q = cands
            .iter()
            .copied()
            .find(|&q| {
                q > p
                    && partner[q] == usize::MAX
                    && candidates[q].as_ref().is_some_and(|cq| cq.contains(&p))
            })
            .ok_or_else(|| {
                Error::NotConjugateLinear(format!("symbol {p} has no imaginary-part partner"))
            })?;
        partner[p] = q;
        partner[q] = p;
    }
    let pairs: Vec<(usize, usize)> = (0..k)
        .filter(|&p| partner[p] > p)
        .map(|p| (p, partner[p]))
        .collect();

    // Relation of each column to each pair: +1 linear in x_p + i x_q, -1 conjugated.
    let mut relation: Vec<Vec<i8>> = vec![vec![0; pairs.len()]; cols];
    for c in 0..cols {
        for r in 0..rows {
            for (t, &(p, q)) in pairs.iter().enumerate() {
                let (cp, cq) = (coeff(r, c, p), coeff(r, c, q));
                if !nz(cp) && !nz(cq) {
                    continue;
                }
                let rel = if close(cq, cp * i_unit) && nz(cp) {
                    1
                } else if close(cq, -(cp * i_unit)) && nz(cp) {
                    -1
                } else {
                    return Err(Error::NotConjugateLinear(format!(
                        "entry ({r}, {c}) is not a multiple of x{p} ± i x{q}"
                    )));
                };
                match relation[c][t] {
                    0 => relation[c][t] = rel,
                    prev if prev != rel => {
                        return Err(Error::NotConjugateLinear(format!(
                            "column {c} mixes x{p} + i x{q} and its conjugate"
                        )))
                    }
                    _ => {}
                }
            }
        }
    }

    // Solve rel(c, t) * orientation(t) = sign(c) over the column/pair graph.
    let mut sign: Vec<i8> = vec![0; cols];
    let mut orient: Vec<i8> = vec![0; pairs.len()];
    for start in 0..cols {
        if sign[start] != 0 {
            continue;
        }
        sign[start] = 1;
        let mut queue = VecDeque::from([(true, start)]);
        while let Some((is_col, idx)) = queue.pop_front() {
            if is_col {
                for t in 0..pairs.len() {
                    let rel = relation[idx][t];
                    if rel == 0 {
                        continue;
                    }
                    let want = rel * sign[idx];
                    if orient[t] == 0 {
                        orient[t] = want;
                        queue.push_back((false, t));
                    } else if orient[t] != want {
                        return Err(Error::NotConjugateLinear(format!(
                            "column {idx} cannot be uniformly conjugated"
                        )));
                    }
                }
            } else {
                for c in 0..cols {
                    let rel = relation[c][idx];
                    if rel == 0 {
                        continue;
                    }
                    let want = rel * orient[idx];
                    if sign[c] == 0 {
                        sign[c] = want;
                        queue.push_back((true, c));
                    } else if sign[c] != want {
                        return Err(Error::NotConjugateLinear(format!(
                            "column {c} cannot be uniformly conjugated"
                        )));
                    }
                }
            }
        }
    }

    let t1 = pairs.len();
    let mut v = DMatrix::zeros(t1, k);
    for (t, &(p, q)) in pairs.iter().enumerate() {
        v[(t, p)] = cx(T::one(), T::zero());
        v[(t, q)] = cx(T::zero(), if orient[t] > 0 { T::one() } else { -T::one() });
    }
    let mut b = Vec::with_capacity(cols);
    let mut conjugated = Vec::new();
    for c in 0..cols {
        let conj = sign[c] < 0;
        if conj {
            conjugated.push(c);
        }
        b.push(DMatrix::from_fn(rows, t1, |r, t| {
            let cp = coeff(r, c, pairs[t].0);
            if conj {
                cp.conj()
            } else {
                cp
            }
        }));
    }
    Ok(ConjugateLinearForm { v, b, conjugated })
}
