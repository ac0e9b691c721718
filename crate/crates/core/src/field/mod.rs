//! Scalar fields on boxes in R^d with exact-to-rounding second-order jets.
//!
//! A [`ScalarField`] produces, at any point of its domain, a [`Jet2`]: the
//! value, gradient and (symmetric) Hessian of `f`. Built-in fields use
//! hand-differentiated closed forms; parsed expression fields propagate
//! truncated second-order Taylor arithmetic through the expression tree, so
//! both kinds are exact up to rounding; no finite-difference noise reaches
//! the curvature formulas.

mod builtins;
mod expr;
mod finite_diff;
mod parser;
mod taylor;

pub use builtins::builtin_field;
pub use finite_diff::finite_diff_jet;
pub use parser::ParseError;
pub(crate) use parser::parse_expression;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) use builtins::BuiltinKind;
pub(crate) use expr::Expr;

/// A point of R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: DVector<f64>,
}

impl Point {
    /// Builds a point, requiring every coordinate to be finite.
    pub fn new(coords: Vec<f64>) -> Result<Self, FieldError> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(FieldError::NonFiniteCoordinate);
        }
        Ok(Self {
            coords: DVector::from_vec(coords),
        })
    }

    /// Builds a point from coordinates known to be finite.
    pub(crate) fn from_vector(coords: DVector<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| c.is_finite()));
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn as_slice(&self) -> &[f64] {
        self.coords.as_slice()
    }
}

impl From<[f64; 3]> for Point {
    fn from(c: [f64; 3]) -> Self {
        Self::from_vector(DVector::from_row_slice(&c))
    }
}

/// Value, gradient and Hessian of a field at one point.
///
/// The Hessian is symmetrized as `(A + A^T)/2` on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

impl Jet2 {
    pub fn new(value: f64, gradient: DVector<f64>, hessian: DMatrix<f64>) -> Self {
        let sym = (&hessian + hessian.transpose()) * 0.5;
        Self {
            value,
            gradient,
            hessian: sym,
        }
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    /// Euclidean norm of the gradient.
    pub fn grad_norm(&self) -> f64 {
        self.gradient.norm()
    }

    /// The quadratic form `v^T H v` of the Hessian.
    pub fn hessian_form(&self, v: &DVector<f64>) -> f64 {
        (v.transpose() * &self.hessian * v)[(0, 0)]
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.gradient.iter().all(|x| x.is_finite())
            && self.hessian.iter().all(|x| x.is_finite())
    }
}

/// A closed interval `[a, b]` of level values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    a: f64,
    b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self, FieldError> {
        if !(a.is_finite() && b.is_finite() && a <= b) {
            return Err(FieldError::BadInterval { a, b });
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, t: f64) -> bool {
        self.a <= t && t <= self.b
    }
}

/// Axis-aligned box, `lo < hi` componentwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, FieldError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(FieldError::BadBox(
                "lo and hi must have the same nonzero length".into(),
            ));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(FieldError::BadBox(format!(
                    "need lo < hi componentwise, got [{l}, {h}]"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// Cube `[-half, half]^d`.
    pub fn centered_cube(dim: usize, half: f64) -> Self {
        Self {
            lo: vec![-half; dim],
            hi: vec![half; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }

    pub fn volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l)
            .product()
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.dim() == self.dim()
            && p.as_slice()
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (l, h))| *l <= *x && *x <= *h)
    }

    /// True when `other` lies inside this box.
    pub fn encloses(&self, other: &BoundingBox) -> bool {
        self.dim() == other.dim()
            && self
                .lo
                .iter()
                .zip(&other.lo)
                .all(|(outer, inner)| outer <= inner)
            && self
                .hi
                .iter()
                .zip(&other.hi)
                .all(|(outer, inner)| outer >= inner)
    }

    /// Distance from `p` to the nearest face, as a fraction of the smallest
    /// box width. Zero on the boundary.
    pub fn boundary_distance_fraction(&self, p: &Point) -> f64 {
        let mut best = f64::INFINITY;
        let min_width = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l)
            .fold(f64::INFINITY, f64::min);
        for (x, (l, h)) in p.as_slice().iter().zip(self.lo.iter().zip(&self.hi)) {
            best = best.min((x - l).min(h - x));
        }
        best / min_width
    }
}

/// Errors from field construction and evaluation.
#[derive(Debug, Clone, Error)]
pub enum FieldError {
    #[error("point has a non-finite coordinate")]
    NonFiniteCoordinate,
    #[error("interval endpoints must be finite with a <= b, got [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },
    #[error("invalid bounding box: {0}")]
    BadBox(String),
    #[error("point {point:?} is outside the field's domain box")]
    OutsideDomain { point: Vec<f64> },
    #[error("point lies on the field's excluded singular set ({what})")]
    ExcludedSet { what: String },
    #[error("evaluation failed at {point:?}: {reason}")]
    Eval { point: Vec<f64>, reason: String },
    #[error("unknown builtin field `{name}`")]
    UnknownBuiltin { name: String },
    #[error("bad field parameters: {0}")]
    BadParams(String),
    #[error("dimension {dim} unsupported here (need {expected})")]
    Dimension { dim: usize, expected: String },
    #[error("expression error: {0}")]
    Parse(#[from] ParseError),
}

/// A C^2 scalar field on a declared axis-aligned domain box.
///
/// Fields are immutable after construction; evaluation is a pure function
/// and safe to call concurrently. The torus field additionally excludes a
/// hair-thin cylinder around the z-axis where its defining expression stops
/// being differentiable; see [`builtin_field`].
#[derive(Debug, Clone)]
pub struct ScalarField {
    kind: FieldKind,
    dim: usize,
    domain: BoundingBox,
    description: String,
}

#[derive(Debug, Clone)]
pub(crate) enum FieldKind {
    Builtin(BuiltinKind),
    Parsed(Expr),
}

/// Default half-width of the domain box for fields defined on all of R^d.
const DEFAULT_DOMAIN_HALF_WIDTH: f64 = 1e6;

impl ScalarField {
    pub(crate) fn builtin(kind: BuiltinKind, dim: usize, description: String) -> Self {
        Self {
            kind: FieldKind::Builtin(kind),
            dim,
            domain: BoundingBox::centered_cube(dim, DEFAULT_DOMAIN_HALF_WIDTH),
            description,
        }
    }

    pub(crate) fn parsed(expr: Expr, dim: usize, source: &str) -> Self {
        Self {
            kind: FieldKind::Parsed(expr),
            dim,
            domain: BoundingBox::centered_cube(dim, DEFAULT_DOMAIN_HALF_WIDTH),
            description: source.to_string(),
        }
    }

    /// Replaces the declared domain box.
    pub fn with_domain(mut self, domain: BoundingBox) -> Result<Self, FieldError> {
        if domain.dim() != self.dim {
            return Err(FieldError::Dimension {
                dim: domain.dim(),
                expected: format!("{}", self.dim),
            });
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// n = d - 1, the dimension of the level hypersurfaces.
    pub fn surface_dim(&self) -> usize {
        self.dim - 1
    }

    pub fn domain(&self) -> &BoundingBox {
        &self.domain
    }

    /// Human-readable field spec, echoed into output artifacts.
    pub fn description(&self) -> &str {
        &self.description
    }

    fn check_domain(&self, p: &Point) -> Result<(), FieldError> {
        if p.dim() != self.dim {
            return Err(FieldError::Dimension {
                dim: p.dim(),
                expected: format!("{}", self.dim),
            });
        }
        if !self.domain.contains(p) {
            return Err(FieldError::OutsideDomain {
                point: p.as_slice().to_vec(),
            });
        }
        Ok(())
    }

    /// Value, gradient and symmetrized Hessian at `p`.
    pub fn jet(&self, p: &Point) -> Result<Jet2, FieldError> {
        self.check_domain(p)?;
        match &self.kind {
            FieldKind::Builtin(b) => b.jet(p),
            FieldKind::Parsed(e) => e.eval_jet(p),
        }
    }

    /// Value only; cheaper than [`ScalarField::jet`] for grid sampling.
    pub fn value(&self, p: &Point) -> Result<f64, FieldError> {
        self.check_domain(p)?;
        match &self.kind {
            FieldKind::Builtin(b) => b.value(p),
            FieldKind::Parsed(e) => e.eval_value(p),
        }
    }
}

/// Parses an expression in the field DSL into a scalar field of dimension
/// `d` (3, 4 or 5; variables `x`, `y`, `z`, `w`, `v` in that order).
///
/// Grammar: `+ - * / ^`, parentheses, unary minus, and the functions
/// `sin cos exp ln sqrt`. `^` binds tightest and associates right.
pub fn parse_field(expr: &str, d: usize) -> Result<ScalarField, FieldError> {
    if !(3..=5).contains(&d) {
        return Err(FieldError::Dimension {
            dim: d,
            expected: "3, 4 or 5".into(),
        });
    }
    let ast = parse_expression(expr, d)?;
    Ok(ScalarField::parsed(ast, d, expr))
}

/// Builds a field from a spec string: a builtin name (possibly with
/// parameters, e.g. `torus(2)` or `quadric(1,2,3)`) or, failing that, a DSL
/// expression.
pub fn field_from_spec(spec: &str, d: usize) -> Result<ScalarField, FieldError> {
    match builtin_field(spec, d) {
        Ok(f) => Ok(f),
        Err(FieldError::UnknownBuiltin { .. }) => parse_field(spec, d),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_rejects_nan() {
        assert!(Point::new(vec![0.0, f64::NAN, 1.0]).is_err());
        assert!(Point::new(vec![0.0, 1.0, 2.0]).is_ok());
    }

    #[test]
    fn interval_rejects_reversed() {
        assert!(Interval::new(2.0, 1.0).is_err());
        let iv = Interval::new(1.0, 4.0).unwrap();
        assert_eq!(iv.width(), 3.0);
        assert!(iv.contains(1.0) && iv.contains(4.0) && !iv.contains(4.1));
    }

    #[test]
    fn bounding_box_validation_and_volume() {
        assert!(BoundingBox::new(vec![0.0, 0.0], vec![1.0, 0.0]).is_err());
        let b = BoundingBox::new(vec![-1.0, -2.0, 0.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(b.volume(), 2.0 * 4.0 * 3.0);
        assert!(b.contains(&Point::new(vec![0.0, 0.0, 1.0]).unwrap()));
        assert!(!b.contains(&Point::new(vec![0.0, 0.0, 3.5]).unwrap()));
    }

    #[test]
    fn jet_symmetrizes_hessian() {
        let h = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let jet = Jet2::new(0.0, DVector::zeros(3), h);
        assert_eq!(jet.hessian[(0, 1)], 1.0);
        assert_eq!(jet.hessian[(1, 0)], 1.0);
    }

    #[test]
    fn domain_check_enforced() {
        let f = builtin_field("sphere", 3)
            .unwrap()
            .with_domain(BoundingBox::centered_cube(3, 1.0))
            .unwrap();
        let inside = Point::new(vec![0.5, 0.0, 0.0]).unwrap();
        let outside = Point::new(vec![1.5, 0.0, 0.0]).unwrap();
        assert!(f.jet(&inside).is_ok());
        assert!(matches!(
            f.jet(&outside),
            Err(FieldError::OutsideDomain { .. })
        ));
    }

    #[test]
    fn spec_dispatch_builtin_then_expression() {
        assert!(field_from_spec("sphere", 3).is_ok());
        assert!(field_from_spec("x^2+y^2+z^2", 3).is_ok());
        assert!(field_from_spec("bad(((", 3).is_err());
    }
}
