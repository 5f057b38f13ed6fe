//! 4D hypercomplex arithmetic over the three supported algebras.
//!
//! A [`Hyper4Vector`] holds `d` hypercomplex numbers `s + x i + y j + z k`
//! stored channel-major: `[s_0..s_d, x_0..x_d, y_0..y_d, z_0..z_d]`. Every
//! operation acts element-wise over the `d` numbers.
//!
//! The slice kernels (`mul_acc`, `mul_vjp_acc`, ...) take raw channel-major
//! buffers of length `4 * d`; the scoring and training code works on those
//! directly to avoid per-call allocation.

use std::fmt::{self, Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive};

use crate::error::{Error, Result};

/// Floating-point scalar used by embeddings and kernels.
pub trait Real: Float + FromPrimitive + Default + Debug + Display + Send + Sync + 'static {
    /// Width in bytes, used as the precision tag in checkpoints.
    const BYTES: u8;

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable")
    }

    fn write_le(self, out: &mut Vec<u8>);

    fn read_le(bytes: &[u8]) -> Self;
}

impl Real for f64 {
    const BYTES: u8 = 8;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}

impl Real for f32 {
    const BYTES: u8 = 4;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }
}

/// Default threshold below which `normalize` falls back to the identity.
pub const NORMALIZE_EPS: f64 = 1e-12;

/// Basis units, indexed as channels: 0 = 1, 1 = i, 2 = j, 3 = k.
pub const UNIT_NAMES: [&str; 4] = ["1", "i", "j", "k"];

type SignTable = [[(i8, usize); 4]; 4];

// Rows are the left factor, columns the right factor.
const QUATERNION: SignTable = [
    [(1, 0), (1, 1), (1, 2), (1, 3)],
    [(1, 1), (-1, 0), (1, 3), (-1, 2)],
    [(1, 2), (-1, 3), (-1, 0), (1, 1)],
    [(1, 3), (1, 2), (-1, 1), (-1, 0)],
];

const HYPERBOLIC: SignTable = [
    [(1, 0), (1, 1), (1, 2), (1, 3)],
    [(1, 1), (1, 0), (1, 3), (-1, 2)],
    [(1, 2), (-1, 3), (1, 0), (1, 1)],
    [(1, 3), (1, 2), (-1, 1), (1, 0)],
];

const SPLIT: SignTable = [
    [(1, 0), (1, 1), (1, 2), (1, 3)],
    [(1, 1), (-1, 0), (1, 3), (-1, 2)],
    [(1, 2), (-1, 3), (1, 0), (-1, 1)],
    [(1, 3), (1, 2), (1, 1), (1, 0)],
];

/// Multiplication rule for the imaginary units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algebra {
    /// Spherical quaternions: `i² = j² = k² = -1`.
    Quaternion,
    /// Hyperbolic quaternions: `i² = j² = k² = +1`, anti-commuting. Not associative.
    Hyperbolic,
    /// Split quaternions: `i² = -1`, `j² = k² = +1`.
    Split,
}

impl Algebra {
    pub const ALL: [Algebra; 3] = [Algebra::Quaternion, Algebra::Hyperbolic, Algebra::Split];

    /// `(sign, unit)` of the product of basis units `a * b`.
    pub fn basis_product(self, a: usize, b: usize) -> (i8, usize) {
        self.table()[a][b]
    }

    fn table(self) -> &'static SignTable {
        match self {
            Algebra::Quaternion => &QUATERNION,
            Algebra::Hyperbolic => &HYPERBOLIC,
            Algebra::Split => &SPLIT,
        }
    }

    /// One-letter code used in files and on the command line.
    pub fn code(self) -> char {
        match self {
            Algebra::Quaternion => 'Q',
            Algebra::Hyperbolic => 'H',
            Algebra::Split => 'S',
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Algebra::Quaternion => 0,
            Algebra::Hyperbolic => 1,
            Algebra::Split => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.get(tag as usize).copied()
    }

    /// Signature of the quadratic form associated with the algebra's geometry.
    pub fn quadratic_form_signs(self) -> [f64; 4] {
        match self {
            Algebra::Quaternion => [1.0, 1.0, 1.0, 1.0],
            Algebra::Hyperbolic => [1.0, -1.0, -1.0, -1.0],
            Algebra::Split => [1.0, 1.0, -1.0, -1.0],
        }
    }
}

impl Display for Algebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

impl FromStr for Algebra {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "q" | "quaternion" => Ok(Algebra::Quaternion),
            "h" | "hyperbolic" => Ok(Algebra::Hyperbolic),
            "s" | "split" => Ok(Algebra::Split),
            other => Err(Error::Config(format!("unknown algebra `{other}` (expected Q, H or S)"))),
        }
    }
}

/// `d` hypercomplex numbers stored channel-major.
#[derive(Clone, PartialEq)]
pub struct Hyper4Vector<T = f64> {
    data: Vec<T>,
}

impl<T: Real> Hyper4Vector<T> {
    pub fn zeros(d: usize) -> Self {
        assert!(d >= 1, "hypercomplex vectors need d >= 1");
        Self { data: vec![T::zero(); 4 * d] }
    }

    /// `d` copies of the multiplicative identity `1 + 0i + 0j + 0k`.
    pub fn identity(d: usize) -> Self {
        let mut v = Self::zeros(d);
        v.data[..d].fill(T::one());
        v
    }

    /// Every element set to the same number `(s, x, y, z)`.
    pub fn splat(d: usize, value: [T; 4]) -> Self {
        let mut v = Self::zeros(d);
        for (c, &val) in value.iter().enumerate() {
            v.data[c * d..(c + 1) * d].fill(val);
        }
        v
    }

    pub fn from_channels(s: Vec<T>, x: Vec<T>, y: Vec<T>, z: Vec<T>) -> Result<Self> {
        let d = s.len();
        if d == 0 || x.len() != d || y.len() != d || z.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: [x.len(), y.len(), z.len()].into_iter().find(|&l| l != d).unwrap_or(0),
            });
        }
        let mut data = s;
        data.extend(x);
        data.extend(y);
        data.extend(z);
        Ok(Self { data })
    }

    /// Wraps a channel-major buffer of length `4 * d`.
    pub fn from_flat(data: Vec<T>) -> Result<Self> {
        if data.is_empty() || data.len() % 4 != 0 {
            return Err(Error::Contract(format!(
                "channel-major buffer length {} is not a positive multiple of 4",
                data.len()
            )));
        }
        Ok(Self { data })
    }

    pub fn dim(&self) -> usize {
        self.data.len() / 4
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let d = self.dim();
        &self.data[c * d..(c + 1) * d]
    }

    pub fn s(&self) -> &[T] {
        self.channel(0)
    }

    pub fn x(&self) -> &[T] {
        self.channel(1)
    }

    pub fn y(&self) -> &[T] {
        self.channel(2)
    }

    pub fn z(&self) -> &[T] {
        self.channel(3)
    }

    /// The `k`-th hypercomplex number as `[s, x, y, z]`.
    pub fn element(&self, k: usize) -> [T; 4] {
        let d = self.dim();
        [self.data[k], self.data[d + k], self.data[2 * d + k], self.data[3 * d + k]]
    }

    pub fn set_element(&mut self, k: usize, value: [T; 4]) {
        let d = self.dim();
        for (c, v) in value.into_iter().enumerate() {
            self.data[c * d + k] = v;
        }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_flat(self) -> Vec<T> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }

    /// Largest absolute channel difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.check_dim(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs())))
    }
}

impl<T: Debug> Debug for Hyper4Vector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.data.len() / 4;
        let ch = |c: usize| &self.data[c * d..(c + 1) * d];
        f.debug_struct("Hyper4Vector")
            .field("s", &ch(0))
            .field("x", &ch(1))
            .field("y", &ch(2))
            .field("z", &ch(3))
            .finish()
    }
}

/// Element-wise Hamilton product `a ⊗ b` under `alg`.
pub fn hamilton_product<T: Real>(a: &Hyper4Vector<T>, b: &Hyper4Vector<T>, alg: Algebra) -> Result<Hyper4Vector<T>> {
    a.check_dim(b)?;
    let mut out = Hyper4Vector::zeros(a.dim());
    mul_acc(alg, &a.data, &b.data, &mut out.data);
    Ok(out)
}

/// Channel-wise sum.
pub fn add<T: Real>(a: &Hyper4Vector<T>, b: &Hyper4Vector<T>) -> Result<Hyper4Vector<T>> {
    a.check_dim(b)?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| *x + *y).collect();
    Ok(Hyper4Vector { data })
}

/// Scales every element to unit Euclidean 4-norm; elements with norm below
/// `eps` become the identity `(1, 0, 0, 0)`.
pub fn normalize<T: Real>(a: &Hyper4Vector<T>, eps: T) -> Hyper4Vector<T> {
    let mut out = Hyper4Vector::zeros(a.dim());
    normalize_into(&a.data, &mut out.data, eps);
    out
}

/// Sum of the four channel-wise dot products.
pub fn inner<T: Real>(a: &Hyper4Vector<T>, b: &Hyper4Vector<T>) -> Result<T> {
    a.check_dim(b)?;
    Ok(dot(&a.data, &b.data))
}

/// Solves `a ⊗ x = b` for `x`, element by element.
///
/// Each element is a 4×4 linear system in the coefficients of `x`; elements
/// whose system is singular (relative pivot below `1e-12`) make the whole
/// solve fail. This covers the non-associative hyperbolic algebra, where no
/// two-sided inverse formula exists.
pub fn left_solve<T: Real>(a: &Hyper4Vector<T>, b: &Hyper4Vector<T>, alg: Algebra) -> Option<Hyper4Vector<T>> {
    if a.dim() != b.dim() {
        return None;
    }
    let d = a.dim();
    let mut out = Hyper4Vector::zeros(d);
    for k in 0..d {
        let ak = a.element(k).map(|v| v.to_f64().unwrap_or(f64::NAN));
        let bk = b.element(k).map(|v| v.to_f64().unwrap_or(f64::NAN));
        let m = left_matrix(alg, ak);
        let x = solve4(m, bk)?;
        out.set_element(k, x.map(T::lit));
    }
    Some(out)
}

/// Matrix `L` with `L · coeffs(x) = coeffs(a ⊗ x)`.
pub fn left_matrix(alg: Algebra, a: [f64; 4]) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for (p, &ap) in a.iter().enumerate() {
        for q in 0..4 {
            let (s, c) = alg.basis_product(p, q);
            m[c][q] += f64::from(s) * ap;
        }
    }
    m
}

fn solve4(mut m: [[f64; 4]; 4], mut rhs: [f64; 4]) -> Option<[f64; 4]> {
    let scale = m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..4 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let tail: f64 = (row + 1..4).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - tail) / m[row][row];
    }
    Some(x)
}

// ---------------------------------------------------------------------------
// Slice kernels over channel-major buffers of length 4 * d.

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

/// `out += scale * a`.
#[inline]
pub fn axpy<T: Real>(scale: T, a: &[T], out: &mut [T]) {
    debug_assert_eq!(a.len(), out.len());
    for (o, v) in out.iter_mut().zip(a) {
        *o = *o + scale * *v;
    }
}

/// `out += a ⊗ b`.
pub fn mul_acc<T: Real>(alg: Algebra, a: &[T], b: &[T], out: &mut [T]) {
    let d = a.len() / 4;
    debug_assert!(b.len() == 4 * d && out.len() == 4 * d);
    let table = alg.table();
    for (p, row) in table.iter().enumerate() {
        let ap = &a[p * d..(p + 1) * d];
        for (q, &(sign, c)) in row.iter().enumerate() {
            let bq = &b[q * d..(q + 1) * d];
            let oc = &mut out[c * d..(c + 1) * d];
            if sign > 0 {
                for k in 0..d {
                    oc[k] = oc[k] + ap[k] * bq[k];
                }
            } else {
                for k in 0..d {
                    oc[k] = oc[k] - ap[k] * bq[k];
                }
            }
        }
    }
}

/// Vector-Jacobian product of `p = a ⊗ b` for upstream gradient `g`:
/// `ga += ∂⟨p, g⟩/∂a` and `gb += ∂⟨p, g⟩/∂b`.
pub fn mul_vjp_acc<T: Real>(alg: Algebra, a: &[T], b: &[T], g: &[T], ga: Option<&mut [T]>, gb: Option<&mut [T]>) {
    if let Some(ga) = ga {
        mul_vjp_left_acc(alg, b, g, ga);
    }
    if let Some(gb) = gb {
        mul_vjp_right_acc(alg, a, g, gb);
    }
}

/// `ga += ∂⟨a ⊗ b, g⟩/∂a`, which does not depend on `a`.
///
/// Equivalently the pullback of `g` through right multiplication by `b`:
/// `⟨a ⊗ b, g⟩ = ⟨a, ga⟩` for every `a`.
pub fn mul_vjp_left_acc<T: Real>(alg: Algebra, b: &[T], g: &[T], ga: &mut [T]) {
    let d = b.len() / 4;
    debug_assert!(g.len() == 4 * d && ga.len() == 4 * d);
    for (p, row) in alg.table().iter().enumerate() {
        let out = &mut ga[p * d..(p + 1) * d];
        for (q, &(sign, c)) in row.iter().enumerate() {
            let bq = &b[q * d..(q + 1) * d];
            let gc = &g[c * d..(c + 1) * d];
            if sign > 0 {
                for k in 0..d {
                    out[k] = out[k] + bq[k] * gc[k];
                }
            } else {
                for k in 0..d {
                    out[k] = out[k] - bq[k] * gc[k];
                }
            }
        }
    }
}

/// `gb += ∂⟨a ⊗ b, g⟩/∂b`, which does not depend on `b`.
pub fn mul_vjp_right_acc<T: Real>(alg: Algebra, a: &[T], g: &[T], gb: &mut [T]) {
    let d = a.len() / 4;
    debug_assert!(g.len() == 4 * d && gb.len() == 4 * d);
    for (p, row) in alg.table().iter().enumerate() {
        let ap = &a[p * d..(p + 1) * d];
        for (q, &(sign, c)) in row.iter().enumerate() {
            let gc = &g[c * d..(c + 1) * d];
            let out = &mut gb[q * d..(q + 1) * d];
            if sign > 0 {
                for k in 0..d {
                    out[k] = out[k] + ap[k] * gc[k];
                }
            } else {
                for k in 0..d {
                    out[k] = out[k] - ap[k] * gc[k];
                }
            }
        }
    }
}

/// Writes the element-wise unit normalization of `a` into `out`.
pub fn normalize_into<T: Real>(a: &[T], out: &mut [T], eps: T) {
    let d = a.len() / 4;
    for k in 0..d {
        let norm = element_norm(a, d, k);
        if norm < eps {
            out[k] = T::one();
            out[d + k] = T::zero();
            out[2 * d + k] = T::zero();
            out[3 * d + k] = T::zero();
        } else {
            for c in 0..4 {
                out[c * d + k] = a[c * d + k] / norm;
            }
        }
    }
}

/// Backpropagates `g = ∂L/∂normalize(a)` to `ga += ∂L/∂a`.
///
/// Uses `(g - n ⟨n, g⟩) / |a|` per element; degenerate elements (the
/// identity fallback) are locally constant and receive no gradient.
pub fn normalize_vjp_acc<T: Real>(a: &[T], g: &[T], ga: &mut [T], eps: T) {
    let d = a.len() / 4;
    for k in 0..d {
        let norm = element_norm(a, d, k);
        if norm < eps {
            continue;
        }
        let mut proj = T::zero();
        for c in 0..4 {
            proj = proj + a[c * d + k] * g[c * d + k];
        }
        proj = proj / norm;
        for c in 0..4 {
            let n = a[c * d + k] / norm;
            ga[c * d + k] = ga[c * d + k] + (g[c * d + k] - n * proj) / norm;
        }
    }
}

#[inline]
fn element_norm<T: Real>(a: &[T], d: usize, k: usize) -> T {
    let mut sq = T::zero();
    for c in 0..4 {
        let v = a[c * d + k];
        sq = sq + v * v;
    }
    sq.sqrt()
}
