//! Rational polytopes in dimension one or two, their lattice points and
//! support functions.
//!
//! A polytope is stored in both vertex and halfspace form. Vertices are exact
//! rationals so that dilates `dP` and their lattice points are computed without
//! rounding; everything metric (support function, quadrature) is done in `f64`.

use num_rational::Rational64;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;

pub type Rational = Rational64;

/// `{p : <normal, p> <= offset}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Halfspace {
    pub normal: Vec<Rational>,
    pub offset: Rational,
}

impl Halfspace {
    pub fn contains_scaled(&self, p: &[i64], d: i64) -> bool {
        let lhs = self
            .normal
            .iter()
            .zip(p)
            .fold(Rational::zero(), |acc, (a, &b)| acc + *a * Rational::from_integer(b));
        lhs <= self.offset * Rational::from_integer(d)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticePolytope {
    dim: usize,
    vertices: Vec<Vec<Rational>>,
    halfspaces: Vec<Halfspace>,
}

/// The integer points of `⌊kλ⌋P`, lexicographically ordered.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeBasis {
    pub level: u32,
    pub scale: Rational,
    pub dilation: i64,
    pub points: Vec<Vec<i64>>,
}

impl LatticeBasis {
    pub fn new(polytope: &LatticePolytope, level: u32, scale: Rational) -> Result<Self> {
        if level == 0 {
            return Err(Error::InvalidArgument("level k must be positive".into()));
        }
        if scale <= Rational::zero() {
            return Err(Error::InvalidArgument("scale must be positive".into()));
        }
        let dilation = (scale * Rational::from_integer(level as i64))
            .floor()
            .to_integer();
        Ok(Self {
            level,
            scale,
            dilation,
            points: polytope.lattice_points(dilation),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// Points divided by the level `k`, as used in `δ^N(p/k)`.
    pub fn scaled_points(&self) -> Vec<Vec<f64>> {
        let k = self.level as f64;
        self.points
            .iter()
            .map(|p| p.iter().map(|&c| c as f64 / k).collect())
            .collect()
    }
}

impl LatticePolytope {
    /// The interval `[a, b]`.
    pub fn interval(a: Rational, b: Rational) -> Result<Self> {
        if a >= b {
            return Err(Error::InvalidPolytope(format!(
                "interval [{a}, {b}] has empty interior"
            )));
        }
        Ok(Self {
            dim: 1,
            vertices: vec![vec![a], vec![b]],
            halfspaces: vec![
                Halfspace {
                    normal: vec![-Rational::from_integer(1)],
                    offset: -a,
                },
                Halfspace {
                    normal: vec![Rational::from_integer(1)],
                    offset: b,
                },
            ],
        })
    }

    pub fn integer_interval(a: i64, b: i64) -> Result<Self> {
        Self::interval(Rational::from_integer(a), Rational::from_integer(b))
    }

    pub fn unit_interval() -> Self {
        Self::integer_interval(0, 1).expect("unit interval is valid")
    }

    pub fn unit_square() -> Self {
        Self::from_integer_vertices(2, &[vec![0, 0], vec![1, 0], vec![1, 1], vec![0, 1]])
            .expect("unit square is valid")
    }

    pub fn standard_triangle() -> Self {
        Self::from_integer_vertices(2, &[vec![0, 0], vec![1, 0], vec![0, 1]])
            .expect("standard triangle is valid")
    }

    pub fn from_integer_vertices(dim: usize, points: &[Vec<i64>]) -> Result<Self> {
        let pts: Vec<Vec<Rational>> = points
            .iter()
            .map(|p| p.iter().map(|&c| Rational::from_integer(c)).collect())
            .collect();
        Self::from_vertices(dim, &pts)
    }

    /// Builds the convex hull of `points`. Redundant points are dropped.
    pub fn from_vertices(dim: usize, points: &[Vec<Rational>]) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        match dim {
            1 => {
                let lo = points.iter().map(|p| p[0]).min();
                let hi = points.iter().map(|p| p[0]).max();
                match (lo, hi) {
                    (Some(a), Some(b)) => Self::interval(a, b),
                    _ => Err(Error::InvalidPolytope("no vertices".into())),
                }
            }
            2 => {
                let hull = convex_hull_2d(points);
                if hull.len() < 3 {
                    return Err(Error::InvalidPolytope(
                        "polygon has empty interior (fewer than three non-collinear vertices)"
                            .into(),
                    ));
                }
                let n = hull.len();
                let halfspaces = (0..n)
                    .map(|i| {
                        let a = &hull[i];
                        let b = &hull[(i + 1) % n];
                        // counter-clockwise order: outward normal is (dy, -dx)
                        let normal = vec![b[1] - a[1], a[0] - b[0]];
                        let offset = normal[0] * a[0] + normal[1] * a[1];
                        Halfspace { normal, offset }
                    })
                    .collect();
                Ok(Self {
                    dim: 2,
                    vertices: hull,
                    halfspaces,
                })
            }
            _ => Err(Error::Unsupported(format!(
                "polytopes of dimension {dim} (only 1 and 2 are supported)"
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<Rational>] {
        &self.vertices
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn vertices_f64(&self) -> Vec<Vec<f64>> {
        self.vertices
            .iter()
            .map(|v| v.iter().map(rat_to_f64).collect())
            .collect()
    }

    /// Exact Lebesgue measure.
    pub fn volume(&self) -> Rational {
        match self.dim {
            1 => self.vertices[1][0] - self.vertices[0][0],
            _ => {
                let n = self.vertices.len();
                let twice = (0..n).fold(Rational::zero(), |acc, i| {
                    let a = &self.vertices[i];
                    let b = &self.vertices[(i + 1) % n];
                    acc + a[0] * b[1] - a[1] * b[0]
                });
                twice.abs() / Rational::from_integer(2)
            }
        }
    }

    /// Per-axis `(min, max)` of the vertices.
    pub fn bounding_box(&self) -> Vec<(Rational, Rational)> {
        (0..self.dim)
            .map(|a| {
                let lo = self.vertices.iter().map(|v| v[a]).min().unwrap();
                let hi = self.vertices.iter().map(|v| v[a]).max().unwrap();
                (lo, hi)
            })
            .collect()
    }

    pub fn bounding_box_f64(&self) -> (Vec<f64>, Vec<f64>) {
        self.bounding_box()
            .into_iter()
            .map(|(l, h)| (rat_to_f64(&l), rat_to_f64(&h)))
            .unzip()
    }

    /// Integer points of the dilate `dP`, in lexicographic order.
    pub fn lattice_points(&self, d: i64) -> Vec<Vec<i64>> {
        if d < 0 {
            return Vec::new();
        }
        let dr = Rational::from_integer(d);
        let ranges: Vec<(i64, i64)> = self
            .bounding_box()
            .into_iter()
            .map(|(lo, hi)| ((lo * dr).ceil().to_integer(), (hi * dr).floor().to_integer()))
            .collect();
        let mut out = Vec::new();
        match self.dim {
            1 => {
                for a in ranges[0].0..=ranges[0].1 {
                    out.push(vec![a]);
                }
            }
            _ => {
                for a in ranges[0].0..=ranges[0].1 {
                    for b in ranges[1].0..=ranges[1].1 {
                        let p = [a, b];
                        if self.halfspaces.iter().all(|h| h.contains_scaled(&p, d)) {
                            out.push(p.to_vec());
                        }
                    }
                }
            }
        }
        out
    }

    /// `h_P(x) = max_v <x, v>` over the vertices.
    pub fn support_function(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.vertices
            .iter()
            .map(|v| v.iter().zip(x).map(|(a, b)| rat_to_f64(a) * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the vertex attaining `h_P(x)`; the lexicographically first
    /// vertex among ties. Used as the subgradient of `h_P` at kinks.
    pub fn support_vertex(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        let mut order: Vec<usize> = (0..self.vertices.len()).collect();
        order.sort_by(|&i, &j| self.vertices[i].cmp(&self.vertices[j]));
        for i in order {
            let val: f64 = self.vertices[i]
                .iter()
                .zip(x)
                .map(|(a, b)| rat_to_f64(a) * b)
                .sum();
            if val > best_val {
                best_val = val;
                best = i;
            }
        }
        best
    }

    /// Membership test in floating point with absolute slack `tol`.
    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        self.halfspaces.iter().all(|h| {
            let lhs: f64 = h.normal.iter().zip(p).map(|(a, b)| rat_to_f64(a) * b).sum();
            let scale: f64 = h.normal.iter().map(|a| rat_to_f64(a).abs()).sum();
            lhs <= rat_to_f64(&h.offset) + tol * scale.max(1.0)
        })
    }

    /// `t P` for a positive rational `t`.
    pub fn scaled(&self, t: Rational) -> Result<Self> {
        if t <= Rational::zero() {
            return Err(Error::InvalidArgument("scale factor must be positive".into()));
        }
        let verts: Vec<Vec<Rational>> = self
            .vertices
            .iter()
            .map(|v| v.iter().map(|c| *c * t).collect())
            .collect();
        Self::from_vertices(self.dim, &verts)
    }

    /// Minkowski sum `P + Q`.
    pub fn minkowski_sum(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut pts = Vec::with_capacity(self.vertices.len() * other.vertices.len());
        for a in &self.vertices {
            for b in &other.vertices {
                pts.push(a.iter().zip(b).map(|(x, y)| *x + *y).collect());
            }
        }
        Self::from_vertices(self.dim, &pts)
    }

    /// Rescales to unit Lebesgue measure. Returns `(P / c, c)` with
    /// `c = Leb(P)^{1/n}`.
    ///
    /// In dimension two `c` is irrational unless the area is the square of a
    /// rational; the scaled vertices then use the closest `Rational64` to
    /// `1/c`, so the area is one up to about `1e-12`.
    pub fn normalize_volume(&self) -> Result<(Self, f64)> {
        let vol = self.volume();
        if vol <= Rational::zero() {
            return Err(Error::InvalidPolytope(
                "zero volume: the bundle is not ample".into(),
            ));
        }
        match self.dim {
            1 => Ok((self.scaled(vol.recip())?, rat_to_f64(&vol))),
            _ => {
                let c = rat_to_f64(&vol).sqrt();
                let inv = match rational_sqrt(vol) {
                    Some(r) => r.recip(),
                    None => Rational::approximate_float(1.0 / c).ok_or_else(|| {
                        Error::InvalidPolytope("volume scale not representable".into())
                    })?,
                };
                Ok((self.scaled(inv)?, c))
            }
        }
    }

    /// Equal-weight midpoint quadrature of normalized Lebesgue measure on `P`.
    ///
    /// In one dimension the `m` cell midpoints of `P`. In two dimensions the
    /// midpoints of a `g × g` grid on the bounding box that fall inside `P`,
    /// with `g` chosen so that roughly `m` nodes survive; for boxes and square
    /// `m` this is exactly the `√m × √m` product grid.
    pub fn uniform_measure(&self, m: usize) -> Result<DiscreteMeasure> {
        let (axes, mask) = self.midpoint_axes(m)?;
        let pts = match self.dim {
            1 => axes[0].clone(),
            _ => {
                let mut pts = Vec::new();
                for (i, a) in axes[0].iter().enumerate() {
                    for (j, b) in axes[1].iter().enumerate() {
                        if mask[i * axes[1].len() + j] {
                            pts.extend_from_slice(&[*a, *b]);
                        }
                    }
                }
                pts
            }
        };
        DiscreteMeasure::uniform(self.dim, pts)
    }

    /// Axes of the midpoint grid behind [`uniform_measure`](Self::uniform_measure)
    /// and, row-major over their product, which nodes lie in `P`.
    pub fn midpoint_axes(&self, m: usize) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
        if m == 0 {
            return Err(Error::Empty("quadrature size"));
        }
        let (lo, hi) = self.bounding_box_f64();
        let g = match self.dim {
            1 => m,
            _ => {
                let box_area = (hi[0] - lo[0]) * (hi[1] - lo[1]);
                let frac = rat_to_f64(&self.volume()) / box_area;
                ((m as f64 / frac).sqrt() - 1e-9).ceil().max(1.0) as usize
            }
        };
        let axes: Vec<Vec<f64>> = (0..self.dim)
            .map(|a| {
                let h = (hi[a] - lo[a]) / g as f64;
                (0..g).map(|i| lo[a] + (i as f64 + 0.5) * h).collect()
            })
            .collect();
        let mask = match self.dim {
            1 => vec![true; g],
            _ => {
                let mut mask = Vec::with_capacity(g * g);
                for a in &axes[0] {
                    for b in &axes[1] {
                        mask.push(self.contains(&[*a, *b], 1e-12));
                    }
                }
                mask
            }
        };
        Ok((axes, mask))
    }

    /// Strict interior test with relative margin `tol`.
    pub fn interior_contains(&self, p: &[f64], tol: f64) -> bool {
        self.contains(p, -tol)
    }
}

pub fn rat_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn int_sqrt(n: i64) -> Option<i64> {
    if n < 0 {
        return None;
    }
    let r = (n as f64).sqrt().round() as i64;
    (r.saturating_sub(1)..=r + 1).find(|&c| c >= 0 && c * c == n)
}

fn rational_sqrt(r: Rational) -> Option<Rational> {
    Some(Rational::new(int_sqrt(*r.numer())?, int_sqrt(*r.denom())?))
}

fn cross(o: &[Rational], a: &[Rational], b: &[Rational]) -> Rational {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; counter-clockwise, collinear points removed.
fn convex_hull_2d(points: &[Vec<Rational>]) -> Vec<Vec<Rational>> {
    let mut pts: Vec<Vec<Rational>> = points.to_vec();
    pts.sort();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Vec<Rational>> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= Rational::zero() {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<Vec<Rational>> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= Rational::zero() {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// JSON literal for a rational: an integer or a `[p, q]` pair.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(untagged)]
pub enum RationalLit {
    Int(i64),
    Pair([i64; 2]),
}

impl RationalLit {
    pub fn to_rational(self) -> Result<Rational> {
        match self {
            RationalLit::Int(a) => Ok(Rational::from_integer(a)),
            RationalLit::Pair([_, 0]) => Err(Error::InvalidPolytope("zero denominator".into())),
            RationalLit::Pair([p, q]) => Ok(Rational::new(p, q)),
        }
    }

    pub fn from_rational(r: Rational) -> Self {
        if *r.denom() == 1 {
            RationalLit::Int(*r.numer())
        } else {
            RationalLit::Pair([*r.numer(), *r.denom()])
        }
    }
}

/// `{"vertices": [[num, ...], ...]}` with rationals as integers or `[p, q]`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct PolytopeSpec {
    pub vertices: Vec<Vec<RationalLit>>,
}

impl PolytopeSpec {
    pub fn build(&self) -> Result<LatticePolytope> {
        let dim = self
            .vertices
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidPolytope("no vertices".into()))?;
        let verts = self
            .vertices
            .iter()
            .map(|v| v.iter().map(|r| r.to_rational()).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        LatticePolytope::from_vertices(dim, &verts)
    }
}

impl From<&LatticePolytope> for PolytopeSpec {
    fn from(p: &LatticePolytope) -> Self {
        Self {
            vertices: p
                .vertices
                .iter()
                .map(|v| v.iter().map(|r| RationalLit::from_rational(*r)).collect())
                .collect(),
        }
    }
}
