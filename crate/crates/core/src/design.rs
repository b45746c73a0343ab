//! Real-linear designs `X = Σ x_i A_i` over complex weight matrices, and the
//! complex orthogonal designs (CODs) used as building blocks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cx, modulus, Cx, Real};

/// Tolerance for the COD identity `AᵢᴴAⱼ + AⱼᴴAᵢ = 2δᵢⱼI`.
pub const COD_TOL: f64 = 1e-12;

/// Relative singular-value threshold for the weight independence check.
const RANK_TOL: f64 = 1e-10;

/// A `rows × cols` design in `K` real symbols, stored as its weight matrices.
///
/// Conjugated entries such as `-w₂*` are resolved into complex coefficients of
/// the underlying real symbols, so the weights fully describe the design.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDesign<T: Real> {
    rows: usize,
    cols: usize,
    weights: Vec<DMatrix<Cx<T>>>,
}

impl<T: Real> LinearDesign<T> {
    /// Builds a design, checking only that all weights share one shape.
    ///
    /// Zero or dependent weights are allowed here (re-indexed CODs have them);
    /// use [`LinearDesign::checked`] to also require independence.
    pub fn new(rows: usize, cols: usize, weights: Vec<DMatrix<Cx<T>>>) -> Result<Self> {
        for w in &weights {
            if w.shape() != (rows, cols) {
                return Err(Error::Parameter(format!(
                    "weight of shape {:?} in a {rows}x{cols} design",
                    w.shape()
                )));
            }
        }
        Ok(Self {
            rows,
            cols,
            weights,
        })
    }

    /// Like [`LinearDesign::new`] but rejects weights that are linearly
    /// dependent over the reals.
    pub fn checked(rows: usize, cols: usize, weights: Vec<DMatrix<Cx<T>>>) -> Result<Self> {
        let d = Self::new(rows, cols, weights)?;
        if !d.weights_independent() {
            return Err(Error::Parameter(
                "weight matrices are linearly dependent over R".into(),
            ));
        }
        Ok(d)
    }

    /// Number of rows (channel uses).
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns (relays).
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of real symbols.
    pub fn num_symbols(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[DMatrix<Cx<T>>] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> &DMatrix<Cx<T>> {
        &self.weights[i]
    }

    /// Realified stack `[ṽec(A₁) … ṽec(A_K)]` has full column rank.
    pub fn weights_independent(&self) -> bool {
        let k = self.weights.len();
        if k == 0 {
            return true;
        }
        let n = self.rows * self.cols;
        if 2 * n < k {
            return false;
        }
        let stack = DMatrix::from_fn(2 * n, k, |r, c| {
            let e = self.weights[c].as_slice()[r % n];
            if r < n {
                e.re
            } else {
                e.im
            }
        });
        let sv = stack.singular_values();
        let max = sv.max();
        if max <= T::zero() {
            return false;
        }
        sv.iter().filter(|&&s| s > max * T::lit(RANK_TOL)).count() == k
    }

    /// `Σ x_i A_i`.
    pub fn evaluate(&self, x: &[T]) -> Result<DMatrix<Cx<T>>> {
        if x.len() != self.weights.len() {
            return Err(Error::Dimension {
                expected: self.weights.len(),
                actual: x.len(),
            });
        }
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for (w, &xi) in self.weights.iter().zip(x) {
            if xi != T::zero() {
                out += w * cx(xi, T::zero());
            }
        }
        Ok(out)
    }

    /// `X_I(u) = Σ_j u_j A_{i_j}` for the symbol subset `indices`.
    pub fn evaluate_subset(&self, indices: &[usize], u: &[T]) -> Result<DMatrix<Cx<T>>> {
        if indices.len() != u.len() {
            return Err(Error::Dimension {
                expected: indices.len(),
                actual: u.len(),
            });
        }
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for (&i, &ui) in indices.iter().zip(u) {
            let w = self
                .weights
                .get(i)
                .ok_or_else(|| Error::Parameter(format!("symbol index {i} out of range")))?;
            out += w * cx(ui, T::zero());
        }
        Ok(out)
    }

    /// The design restricted to the listed columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&c) = columns.iter().find(|&&c| c >= self.cols) {
            return Err(Error::Parameter(format!("column {c} out of range")));
        }
        let weights = self
            .weights
            .iter()
            .map(|w| w.select_columns(columns))
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: columns.len(),
            weights,
        })
    }

    pub fn to_doc(&self) -> DesignDoc {
        DesignDoc {
            rows: self.rows,
            cols: self.cols,
            num_symbols: self.weights.len(),
            weights: self
                .weights
                .iter()
                .map(|w| {
                    (0..self.rows)
                        .map(|r| {
                            (0..self.cols)
                                .map(|c| [w[(r, c)].re.as_f64(), w[(r, c)].im.as_f64()])
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        }
    }

    /// Builds an unchecked design from its document form.
    pub fn from_doc(doc: &DesignDoc) -> Result<Self> {
        if doc.weights.len() != doc.num_symbols {
            return Err(Error::Format(format!(
                "K = {} but {} weight matrices given",
                doc.num_symbols,
                doc.weights.len()
            )));
        }
        let mut weights = Vec::with_capacity(doc.num_symbols);
        for (i, w) in doc.weights.iter().enumerate() {
            if w.len() != doc.rows || w.iter().any(|row| row.len() != doc.cols) {
                return Err(Error::Format(format!(
                    "weight {i} is not {}x{}",
                    doc.rows, doc.cols
                )));
            }
            weights.push(DMatrix::from_fn(doc.rows, doc.cols, |r, c| {
                cx(T::lit(w[r][c][0]), T::lit(w[r][c][1]))
            }));
        }
        Self::new(doc.rows, doc.cols, weights)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("design serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DesignDoc =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        Self::from_doc(&doc)
    }
}

/// Serialised design: every weight matrix is a list of rows of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignDoc {
    #[serde(rename = "T")]
    pub rows: usize,
    #[serde(rename = "N")]
    pub cols: usize,
    #[serde(rename = "K")]
    pub num_symbols: usize,
    pub weights: Vec<Vec<Vec<[f64; 2]>>>,
}

/// A design intended to be a complex orthogonal design.
///
/// The COD identity is not enforced on construction; [`CodProfile::verify`]
/// checks it.
#[derive(Debug, Clone, PartialEq)]
pub struct CodProfile<T: Real> {
    design: LinearDesign<T>,
}

impl<T: Real> CodProfile<T> {
    pub fn from_design(design: LinearDesign<T>) -> Self {
        Self { design }
    }

    /// The 1×1 design `[s₁ + i s₂]`.
    pub fn trivial() -> Self {
        let one = DMatrix::from_element(1, 1, cx(T::one(), T::zero()));
        let i = DMatrix::from_element(1, 1, cx(T::zero(), T::one()));
        Self {
            design: LinearDesign::new(1, 1, vec![one, i]).expect("1x1 weights"),
        }
    }

    /// The Alamouti design `[[w₁, w₂], [-w₂*, w₁*]]` with `w₁ = x₁ + i x₂`,
    /// `w₂ = x₃ + i x₄`.
    pub fn alamouti() -> Self {
        let (o, l, i) = (T::zero(), T::one(), T::one());
        let m = |e: [(T, T); 4]| {
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    cx(e[0].0, e[0].1),
                    cx(e[1].0, e[1].1),
                    cx(e[2].0, e[2].1),
                    cx(e[3].0, e[3].1),
                ],
            )
        };
        let weights = vec![
            m([(l, o), (o, o), (o, o), (l, o)]),
            m([(o, i), (o, o), (o, o), (o, -i)]),
            m([(o, o), (l, o), (-l, o), (o, o)]),
            m([(o, o), (o, i), (o, i), (o, o)]),
        ];
        Self {
            design: LinearDesign::new(2, 2, weights).expect("2x2 weights"),
        }
    }

    pub fn design(&self) -> &LinearDesign<T> {
        &self.design
    }

    /// `T′`.
    pub fn rows(&self) -> usize {
        self.design.rows()
    }

    /// `N′`.
    pub fn cols(&self) -> usize {
        self.design.cols()
    }

    /// `K′`.
    pub fn num_symbols(&self) -> usize {
        self.design.num_symbols()
    }

    /// Checks `AᵢᴴAⱼ + AⱼᴴAᵢ = 2δᵢⱼ I` for all pairs within [`COD_TOL`].
    pub fn verify(&self) -> bool {
        verify_cod_weights(self.design.weights(), T::lit(COD_TOL))
    }

    /// The COD in the global symbols `symbol_indices` (0-based) of a
    /// `k_total`-symbol design; every other symbol gets a zero weight.
    pub fn reindex(&self, symbol_indices: &[usize], k_total: usize) -> Result<LinearDesign<T>> {
        let kp = self.num_symbols();
        if symbol_indices.len() != kp {
            return Err(Error::Dimension {
                expected: kp,
                actual: symbol_indices.len(),
            });
        }
        let mut weights = vec![DMatrix::zeros(self.rows(), self.cols()); k_total];
        let mut seen = vec![false; k_total];
        for (local, &global) in symbol_indices.iter().enumerate() {
            if global >= k_total {
                return Err(Error::Parameter(format!(
                    "symbol index {global} out of range for {k_total} symbols"
                )));
            }
            if std::mem::replace(&mut seen[global], true) {
                return Err(Error::Parameter(format!("duplicate symbol index {global}")));
            }
            weights[global] = self.design.weight(local).clone();
        }
        LinearDesign::new(self.rows(), self.cols(), weights)
    }
}

pub(crate) fn verify_cod_weights<T: Real>(weights: &[DMatrix<Cx<T>>], tol: T) -> bool {
    let Some(first) = weights.first() else {
        return false;
    };
    let n = first.ncols();
    for (i, a) in weights.iter().enumerate() {
        for (j, b) in weights.iter().enumerate().skip(i) {
            let mut s = a.adjoint() * b + b.adjoint() * a;
            if i == j {
                for d in 0..n {
                    s[(d, d)] -= cx(T::lit(2.0), T::zero());
                }
            }
            if s.iter().any(|e| modulus(*e) > tol) {
                return false;
            }
        }
    }
    true
}

/// Realified view of a complex vector: `[Re; Im]`.
pub fn realify_vector<T: Real>(v: &DVector<Cx<T>>) -> DVector<T> {
    let n = v.len();
    DVector::from_fn(2 * n, |r, _| if r < n { v[r].re } else { v[r - n].im })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Cx<f64> {
        cx(re, im)
    }

    #[test]
    fn evaluate_zero_and_unit_vectors() {
        let d = CodProfile::<f64>::alamouti();
        let x0 = d.design().evaluate(&[0.0; 4]).unwrap();
        assert!(x0.iter().all(|e| e.norm() == 0.0));
        for i in 0..4 {
            let mut x = [0.0; 4];
            x[i] = 1.0;
            assert_eq!(&d.design().evaluate(&x).unwrap(), d.design().weight(i));
        }
        assert!(d.design().evaluate(&[1.0; 3]).is_err());
    }

    #[test]
    fn alamouti_substitution() {
        let d = CodProfile::<f64>::alamouti();
        let x = d.design().evaluate(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let expect = DMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 2.0), c(3.0, 4.0), c(-3.0, 4.0), c(1.0, -2.0)],
        );
        assert_eq!(x, expect);
    }

    #[test]
    fn trivial_cod() {
        let t = CodProfile::<f64>::trivial();
        assert!(t.verify());
        assert_eq!(t.num_symbols(), 2);
        assert_eq!(
            t.design().evaluate(&[3.0, 4.0]).unwrap()[(0, 0)],
            c(3.0, 4.0)
        );
    }

    #[test]
    fn alamouti_cod() {
        let a = CodProfile::<f64>::alamouti();
        assert!(a.verify());
        assert_eq!(
            a.design().evaluate(&[1.0, 0.0, 0.0, 0.0]).unwrap(),
            DMatrix::identity(2, 2)
        );
        let x = a.design().evaluate(&[1.0; 4]).unwrap();
        let det = (x.adjoint() * x).determinant();
        assert!((det - c(16.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn cod_check_rejects_repeated_weight() {
        let i2: DMatrix<Cx<f64>> = DMatrix::identity(2, 2);
        let bad = CodProfile::from_design(LinearDesign::new(2, 2, vec![i2.clone(), i2]).unwrap());
        assert!(!bad.verify());
    }

    #[test]
    fn single_precision_cod() {
        assert!(CodProfile::<f32>::alamouti().verify());
        assert!(CodProfile::<f32>::trivial().verify());
    }

    #[test]
    fn reindex_examples() {
        let t = CodProfile::<f64>::trivial();
        let d = t.reindex(&[2, 4], 6).unwrap();
        assert_eq!(d.num_symbols(), 6);
        assert_eq!(d.weight(2)[(0, 0)], c(1.0, 0.0));
        assert_eq!(d.weight(4)[(0, 0)], c(0.0, 1.0));
        for i in [0, 1, 3, 5] {
            assert_eq!(d.weight(i)[(0, 0)], c(0.0, 0.0));
        }
        let a = CodProfile::<f64>::alamouti();
        assert_eq!(&a.reindex(&[0, 1, 2, 3], 4).unwrap(), a.design());
        assert!(t.reindex(&[0, 0], 2).is_err());
        assert!(t.reindex(&[0, 7], 2).is_err());
    }

    #[test]
    fn independence_check() {
        assert!(CodProfile::<f64>::alamouti().design().weights_independent());
        let i2: DMatrix<Cx<f64>> = DMatrix::identity(2, 2);
        let twice = i2.clone() * c(2.0, 0.0);
        assert!(LinearDesign::checked(2, 2, vec![i2, twice]).is_err());
        let t = CodProfile::<f64>::trivial();
        assert!(!t.reindex(&[0, 1], 3).unwrap().weights_independent());
    }

    #[test]
    fn json_round_trip() {
        let a = CodProfile::<f64>::alamouti();
        let text = a.design().to_json();
        assert!(text.contains("\"T\"") && text.contains("\"K\""));
        assert_eq!(&LinearDesign::<f64>::from_json(&text).unwrap(), a.design());
        assert!(
            LinearDesign::<f64>::from_json(r#"{"T":1,"N":1,"K":2,"weights":[[[[1,0]]]]}"#).is_err()
        );
    }
}
