//! Finite per-group signal sets: PAM components, rotated lattices, Gray labels
//! and difference sets.
//!
//! Every set is normalised so that the mean energy per real dimension is 1/2;
//! two real symbols paired into one complex symbol then carry unit energy.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Absolute threshold below which a rotated difference coordinate counts as zero.
pub const ZERO_COORDINATE_TOL: f64 = 1e-9;

const ORTHOGONALITY_TOL: f64 = 1e-10;

#[inline]
fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

/// A real orthogonal matrix used to rotate integer lattices.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationMatrix<T: Real> {
    matrix: DMatrix<T>,
}

impl<T: Real> RotationMatrix<T> {
    /// Wraps `matrix` after checking it is square and orthogonal.
    pub fn new(matrix: DMatrix<T>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::Parameter(format!(
                "rotation must be a non-empty square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let gram = matrix.transpose() * &matrix;
        let dev = (gram - DMatrix::<T>::identity(matrix.nrows(), matrix.nrows())).amax();
        if dev > T::lit(ORTHOGONALITY_TOL) {
            return Err(Error::Parameter(format!(
                "rotation is not orthogonal (max |QᵀQ - I| = {:e})",
                dev.as_f64()
            )));
        }
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
        }
    }

    /// Planar rotation by `theta`.
    pub fn planar(theta: T) -> Self {
        let (s, c) = (theta.sin(), theta.cos());
        Self {
            matrix: DMatrix::from_row_slice(2, 2, &[c, -s, s, c]),
        }
    }

    /// The built-in rotation for `dim` real symbols.
    ///
    /// `dim = 2` is the planar rotation by `atan(2)/2`. Larger dimensions chain
    /// Givens rotations over every coordinate plane with angles `atan(k+1)/2`;
    /// callers validate them against their component set with
    /// [`verify_rotation`].
    pub fn standard(dim: usize) -> Self {
        match dim {
            0 | 1 => Self::identity(dim.max(1)),
            2 => Self::planar(T::lit(0.5 * 2f64.atan())),
            _ => {
                let mut q = DMatrix::<T>::identity(dim, dim);
                let mut k = 1usize;
                for a in 0..dim {
                    for b in (a + 1)..dim {
                        let theta = 0.5 * ((k + 1) as f64).atan();
                        let (s, c) = (T::lit(theta.sin()), T::lit(theta.cos()));
                        let mut giv = DMatrix::<T>::identity(dim, dim);
                        giv[(a, a)] = c;
                        giv[(a, b)] = -s;
                        giv[(b, a)] = s;
                        giv[(b, b)] = c;
                        q = giv * q;
                        k += 1;
                    }
                }
                Self { matrix: q }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }
}

/// A finite subset of `R^dim` with a Gray bit labelling.
///
/// `labels[i]` is the bit string (as an integer, most significant bit first)
/// carried by point `i`; `by_label` is its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSet<T: Real> {
    dim: usize,
    points: Vec<DVector<T>>,
    bits_per_point: u32,
    labels: Vec<u32>,
    by_label: Vec<usize>,
    rotation: Option<RotationMatrix<T>>,
    components: Vec<T>,
}

impl<T: Real> SignalSet<T> {
    fn assemble(
        dim: usize,
        points: Vec<DVector<T>>,
        labels: Vec<u32>,
        rotation: Option<RotationMatrix<T>>,
        components: Vec<T>,
    ) -> Result<Self> {
        let count = points.len();
        if count == 0 || !count.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "signal set size {count} is not a power of two"
            )));
        }
        if labels.len() != count {
            return Err(Error::Dimension {
                expected: count,
                actual: labels.len(),
            });
        }
        let mut by_label = vec![usize::MAX; count];
        for (i, &l) in labels.iter().enumerate() {
            let slot = by_label.get_mut(l as usize).ok_or_else(|| {
                Error::Parameter(format!("label {l} out of range for {count} points"))
            })?;
            if *slot != usize::MAX {
                return Err(Error::Parameter(format!("label {l} assigned twice")));
            }
            *slot = i;
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::Parameter("point dimension mismatch".into()));
        }
        Ok(Self {
            dim,
            points,
            bits_per_point: count.trailing_zeros(),
            labels,
            by_label,
            rotation,
            components,
        })
    }

    /// An arbitrary set; labels are the natural binary index of each point.
    pub fn from_points(dim: usize, points: Vec<DVector<T>>) -> Result<Self> {
        let labels = (0..points.len() as u32).collect();
        Self::assemble(dim, points, labels, None, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[DVector<T>] {
        &self.points
    }

    pub fn point(&self, index: usize) -> &DVector<T> {
        &self.points[index]
    }

    pub fn bits_per_point(&self) -> u32 {
        self.bits_per_point
    }

    pub fn label(&self, index: usize) -> u32 {
        self.labels[index]
    }

    pub fn index_of_label(&self, label: u32) -> usize {
        self.by_label[label as usize]
    }

    /// Rotation applied to the integer lattice, when the set was built as one.
    pub fn rotation(&self) -> Option<&RotationMatrix<T>> {
        self.rotation.as_ref()
    }

    /// The 1-D component alphabet the lattice was built from (empty otherwise).
    pub fn components(&self) -> &[T] {
        &self.components
    }

    pub fn mean_energy(&self) -> T {
        let total = self
            .points
            .iter()
            .fold(T::zero(), |acc, p| acc + p.norm_squared());
        total / T::lit(self.points.len() as f64)
    }

    /// Index of the point closest to `v` (lowest index on ties).
    pub fn nearest(&self, v: &[T]) -> usize {
        let mut best = (0, T::max_value().unwrap_or_else(T::one));
        for (i, p) in self.points.iter().enumerate() {
            let d = p
                .iter()
                .zip(v)
                .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Per-coordinate alphabets if the set is their Cartesian product.
    ///
    /// Each returned alphabet keeps the order in which values first occur.
    pub fn separable_components(&self) -> Option<Vec<Vec<T>>> {
        let tol = T::lit(ZERO_COORDINATE_TOL);
        let mut coords: Vec<Vec<T>> = vec![Vec::new(); self.dim];
        for p in &self.points {
            for (c, vals) in coords.iter_mut().enumerate() {
                if !vals.iter().any(|&v| (v - p[c]).abs() <= tol) {
                    vals.push(p[c]);
                }
            }
        }
        let product: usize = coords.iter().map(Vec::len).product();
        (product == self.points.len()).then_some(coords)
    }
}

/// `M`-ary PAM with Gray labels and mean energy 1/2.
pub fn make_pam<T: Real>(m: usize) -> Result<SignalSet<T>> {
    if m < 2 || !m.is_power_of_two() {
        return Err(Error::Parameter(format!(
            "PAM order {m} is not a power of two >= 2"
        )));
    }
    let unnormalised = ((m * m - 1) as f64) / 3.0;
    let scale = 1.0 / (2.0 * unnormalised).sqrt();
    let levels: Vec<T> = (0..m)
        .map(|i| T::lit((2.0 * i as f64 - (m as f64 - 1.0)) * scale))
        .collect();
    let points = levels
        .iter()
        .map(|&v| DVector::from_element(1, v))
        .collect();
    let labels = (0..m).map(|i| gray(i) as u32).collect();
    SignalSet::assemble(1, points, labels, Some(RotationMatrix::identity(1)), levels)
}

/// Rotated product lattice `{Q a : a in pam^dim}` with per-component Gray labels.
///
/// The first coordinate carries the most significant label bits.
pub fn make_rotated_lattice<T: Real>(
    pam: &SignalSet<T>,
    rotation: &RotationMatrix<T>,
) -> Result<SignalSet<T>> {
    if pam.dim() != 1 || pam.components().is_empty() {
        return Err(Error::Parameter(
            "component set must be a 1-D PAM set".into(),
        ));
    }
    let dim = rotation.dim();
    let levels = pam.components();
    let m = levels.len();
    let bits = pam.bits_per_point();
    let count = m
        .checked_pow(dim as u32)
        .filter(|&c| c <= 1 << 24)
        .ok_or_else(|| Error::Parameter(format!("lattice {m}^{dim} is too large")))?;
    let mut points = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    let mut digits = vec![0usize; dim];
    for _ in 0..count {
        let raw = DVector::from_iterator(dim, digits.iter().map(|&d| levels[d]));
        points.push(rotation.matrix() * raw);
        labels.push(
            digits
                .iter()
                .fold(0u32, |acc, &d| (acc << bits) | pam.label(d)),
        );
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < m {
                break;
            }
            *d = 0;
        }
    }
    SignalSet::assemble(dim, points, labels, Some(rotation.clone()), levels.to_vec())
}

/// `M`-QAM as a rotated two-dimensional lattice of `sqrt(M)`-PAM components.
pub fn make_rotated_qam<T: Real>(m: usize, rotation: &RotationMatrix<T>) -> Result<SignalSet<T>> {
    if rotation.dim() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            actual: rotation.dim(),
        });
    }
    if !m.is_power_of_two() || !m.trailing_zeros().is_multiple_of(2) || m < 4 {
        return Err(Error::Parameter(format!(
            "QAM order {m} is not an even power of two"
        )));
    }
    let side = 1usize << (m.trailing_zeros() / 2);
    make_rotated_lattice(&make_pam(side)?, rotation)
}

/// Default group alphabet for `dim` jointly encoded real symbols: 2-PAM for a
/// single symbol, otherwise the standard rotation applied to 2-PAM components.
pub fn default_signal_set<T: Real>(dim: usize) -> Result<SignalSet<T>> {
    match dim {
        0 => Err(Error::Parameter("group dimension must be positive".into())),
        1 => make_pam(2),
        _ => make_rotated_lattice(&make_pam(2)?, &RotationMatrix::standard(dim)),
    }
}

/// Group alphabet with `points` points for `dim` symbols: `points`-PAM when
/// `dim = 1`, rotated `points`-QAM when `dim = 2`, and a rotated lattice with
/// `points^(1/dim)`-PAM components otherwise.
pub fn signal_set_with_order<T: Real>(dim: usize, points: usize) -> Result<SignalSet<T>> {
    match dim {
        0 => Err(Error::Parameter("group dimension must be positive".into())),
        1 => make_pam(points),
        2 => make_rotated_qam(points, &RotationMatrix::standard(2)),
        _ => {
            if !points.is_power_of_two() || !(points.trailing_zeros() as usize).is_multiple_of(dim) {
                return Err(Error::Parameter(format!(
                    "{points} points do not form a {dim}-dimensional square lattice"
                )));
            }
            let side = 1usize << (points.trailing_zeros() as usize / dim);
            make_rotated_lattice(&make_pam(side)?, &RotationMatrix::standard(dim))
        }
    }
}

/// True iff every coordinate of `Q d` is nonzero for every nonzero difference
/// `d` of two points of the lattice `component_set^dim`.
pub fn verify_rotation<T: Real>(rotation: &RotationMatrix<T>, component_set: &[T]) -> bool {
    if component_set.is_empty() {
        return false;
    }
    let tol = T::lit(ZERO_COORDINATE_TOL);
    let mut deltas: Vec<T> = Vec::new();
    for &a in component_set {
        for &b in component_set {
            let d = a - b;
            if !deltas.iter().any(|&e| (e - d).abs() <= tol) {
                deltas.push(d);
            }
        }
    }
    let dim = rotation.dim();
    let radix = deltas.len();
    let Some(total) = radix.checked_pow(dim as u32) else {
        return false;
    };
    let mut digits = vec![0usize; dim];
    for _ in 0..total {
        let d = DVector::from_iterator(dim, digits.iter().map(|&i| deltas[i]));
        if d.iter().any(|v| v.abs() > tol) {
            let rotated = rotation.matrix() * d;
            if rotated.iter().any(|v| v.abs() <= tol) {
                return false;
            }
        }
        for dg in digits.iter_mut().rev() {
            *dg += 1;
            if *dg < radix {
                break;
            }
            *dg = 0;
        }
    }
    true
}

/// All pairwise differences of the set's points, duplicates removed; the zero
/// vector comes first.
pub fn difference_set<T: Real>(set: &SignalSet<T>) -> Vec<DVector<T>> {
    let tol = T::lit(ZERO_COORDINATE_TOL);
    let mut out: Vec<DVector<T>> = Vec::new();
    for a in set.points() {
        for b in set.points() {
            let d = a - b;
            if !out.iter().any(|e| (e - &d).amax() <= tol) {
                out.push(d);
            }
        }
    }
    out
}
