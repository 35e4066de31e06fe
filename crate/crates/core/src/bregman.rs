//! Mirror maps, Bregman divergences and the constrained mirror step.
//!
//! The Euclidean map is normalised as `φ(θ) = ‖θ‖²`, so `D(ξ, ζ) = ‖ξ − ζ‖²`
//! and the mirror step is a projection of `x − αg/2`. The entropy map gives
//! the generalised KL divergence and a multiplicative update on the simplex.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinates of entropy iterates are floored here before taking logs.
pub const ENTROPY_FLOOR: f64 = 1e-12;
const MEMBERSHIP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MirrorKind {
    SquaredNorm,
    NegativeEntropy,
}

impl MirrorKind {
    fn name(self) -> &'static str {
        match self {
            MirrorKind::SquaredNorm => "squared-norm",
            MirrorKind::NegativeEntropy => "negative-entropy",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MirrorMap {
    kind: MirrorKind,
    dim: usize,
    mu: f64,
    lipschitz_k: f64,
}

impl MirrorMap {
    /// `φ(θ) = ‖θ‖²` with `μ = 2` and `K = 2·diam(set)`.
    pub fn squared_norm(set: &FeasibleSet) -> Self {
        Self {
            kind: MirrorKind::SquaredNorm,
            dim: set.dim(),
            mu: 2.0,
            lipschitz_k: 2.0 * set.diameter(),
        }
    }

    /// Negative entropy on the simplex, `μ = 1` w.r.t. `‖·‖₁`. The entropy
    /// divergence is not Lipschitz up to the boundary, so `K` is supplied
    /// by the caller for the region the iterates are known to stay in.
    pub fn negative_entropy(dim: usize, lipschitz_k: f64) -> Result<Self> {
        if !(lipschitz_k.is_finite() && lipschitz_k > 0.0) {
            return Err(Error::DomainViolation(format!(
                "lipschitz constant must be positive and finite, got {lipschitz_k}"
            )));
        }
        Ok(Self {
            kind: MirrorKind::NegativeEntropy,
            dim,
            mu: 1.0,
            lipschitz_k,
        })
    }

    pub fn for_set(kind: MirrorKind, set: &FeasibleSet) -> Result<Self> {
        match kind {
            MirrorKind::SquaredNorm => Ok(Self::squared_norm(set)),
            MirrorKind::NegativeEntropy => {
                let &SetKind::Simplex { radius, .. } = set.kind() else {
                    return Err(Error::NoClosedForm {
                        map: kind.name(),
                        set: set.kind_name(),
                    });
                };
                // |∂D/∂ξ_j| = |log ξ_j/ζ_j| ≤ log(radius / floor) on the floored simplex
                let k = (set.dim() as f64).sqrt() * (radius / ENTROPY_FLOOR).ln().abs().max(1.0);
                Self::negative_entropy(set.dim(), k)
            }
        }
    }

    pub fn kind(&self) -> MirrorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lipschitz_k(&self) -> f64 {
        self.lipschitz_k
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "mirror map argument",
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn entropy_domain(&self, x: &[f64]) -> Result<Vec<f64>> {
        x.iter()
            .map(|&v| {
                if !v.is_finite() || v < 0.0 {
                    Err(Error::DomainViolation(format!(
                        "negative entropy needs nonnegative coordinates, got {v}"
                    )))
                } else {
                    Ok(v.max(ENTROPY_FLOOR))
                }
            })
            .collect()
    }

    pub fn potential(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        match self.kind {
            MirrorKind::SquaredNorm => Ok(dot(x, x)),
            MirrorKind::NegativeEntropy => {
                Ok(self.entropy_domain(x)?.iter().map(|v| v * v.ln()).sum())
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        match self.kind {
            MirrorKind::SquaredNorm => Ok(x.iter().map(|v| 2.0 * v).collect()),
            MirrorKind::NegativeEntropy => {
                Ok(self.entropy_domain(x)?.iter().map(|v| 1.0 + v.ln()).collect())
            }
        }
    }
}

/// `D_φ(ξ, ζ) = φ(ξ) − φ(ζ) − ⟨∇φ(ζ), ξ − ζ⟩`, evaluated in closed form.
pub fn bregman(map: &MirrorMap, xi: &[f64], zeta: &[f64]) -> Result<f64> {
    map.check_dim(xi)?;
    map.check_dim(zeta)?;
    match map.kind {
        MirrorKind::SquaredNorm => Ok(xi.iter().zip(zeta).map(|(a, b)| (a - b).powi(2)).sum()),
        MirrorKind::NegativeEntropy => {
            let xi = map.entropy_domain(xi)?;
            let zeta = map.entropy_domain(zeta)?;
            let d: f64 = xi
                .iter()
                .zip(&zeta)
                .map(|(a, b)| a * (a / b).ln() - a + b)
                .sum();
            Ok(d.max(0.0))
        }
    }
}

/// Residual of the three-point identity
/// `⟨ξ−ζ, ∇φ(ζ)−∇φ(θ)⟩ = D(ξ,θ) − D(ξ,ζ) − D(ζ,θ)`.
pub fn check_triangle(map: &MirrorMap, xi: &[f64], zeta: &[f64], theta: &[f64]) -> Result<f64> {
    map.check_dim(xi)?;
    let gz = map.gradient(zeta)?;
    let gt = map.gradient(theta)?;
    let (xi_d, zeta_d) = match map.kind {
        MirrorKind::SquaredNorm => (xi.to_vec(), zeta.to_vec()),
        MirrorKind::NegativeEntropy => (map.entropy_domain(xi)?, map.entropy_domain(zeta)?),
    };
    let lhs: f64 = xi_d
        .iter()
        .zip(&zeta_d)
        .zip(gz.iter().zip(&gt))
        .map(|((a, b), (c, d))| (a - b) * (c - d))
        .sum();
    let rhs = bregman(map, xi, theta)? - bregman(map, xi, zeta)? - bregman(map, zeta, theta)?;
    Ok(lhs - rhs)
}

/// Unique minimiser of `α⟨y, g⟩ + D_φ(y, x)` over the feasible set.
pub fn mirror_step(
    map: &MirrorMap,
    set: &FeasibleSet,
    x: &[f64],
    g: &[f64],
    alpha: f64,
) -> Result<Vec<f64>> {
    map.check_dim(x)?;
    map.check_dim(g)?;
    if set.dim() != map.dim {
        return Err(Error::DimensionMismatch {
            context: "feasible set vs mirror map",
            expected: map.dim,
            got: set.dim(),
        });
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mirror step gradient"));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::NonFinite("mirror step size"));
    }
    match (map.kind, &set.kind) {
        (MirrorKind::SquaredNorm, _) => {
            let target: Vec<f64> = x
                .iter()
                .zip(g)
                .map(|(xj, gj)| xj - 0.5 * alpha * gj)
                .collect();
            Ok(set.project(&target))
        }
        (MirrorKind::NegativeEntropy, &SetKind::Simplex { radius, .. }) => {
            let x = map.entropy_domain(x)?;
            let logits: Vec<f64> = x
                .iter()
                .zip(g)
                .map(|(xj, gj)| xj.ln() - alpha * gj)
                .collect();
            let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
            let total: f64 = weights.iter().sum();
            Ok(weights.iter().map(|w| radius * w / total).collect())
        }
        (kind, _) => Err(Error::NoClosedForm {
            map: kind.name(),
            set: set.kind_name(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SetKind {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// `{x ≥ 0 : Σ x_j = radius}`.
    Simplex { radius: f64, dim: usize },
    Ball { center: Vec<f64>, radius: f64 },
}

/// Compact convex action set together with an inner ball `B_r(p)`.
///
/// For the simplex the inner ball is taken relative to its affine hull.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet {
    kind: SetKind,
    interior_point: Vec<f64>,
    interior_radius: f64,
}

impl FeasibleSet {
    pub fn new(kind: SetKind) -> Result<Self> {
        let (p, r) = match &kind {
            SetKind::Box { lower, upper } => {
                if lower.len() != upper.len() || lower.is_empty() {
                    return Err(Error::InvalidSet(format!(
                        "box bounds have lengths {} and {}",
                        lower.len(),
                        upper.len()
                    )));
                }
                if lower.iter().chain(upper).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidSet("box bounds must be finite".into()));
                }
                if lower.iter().zip(upper).any(|(l, u)| u <= l) {
                    return Err(Error::InvalidSet("box needs lower < upper in every coordinate".into()));
                }
                let p: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect();
                let r = lower
                    .iter()
                    .zip(upper)
                    .map(|(l, u)| 0.5 * (u - l))
                    .fold(f64::INFINITY, f64::min);
                (p, r)
            }
            SetKind::Simplex { radius, dim } => {
                if *dim < 2 || !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidSet(
                        "simplex needs dimension >= 2 and a positive radius".into(),
                    ));
                }
                let n = *dim as f64;
                (vec![radius / n; *dim], radius / (n * (n - 1.0)).sqrt())
            }
            SetKind::Ball { center, radius } => {
                if center.is_empty() || !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidSet("ball needs a centre and positive radius".into()));
                }
                (center.clone(), *radius)
            }
        };
        Ok(Self {
            kind,
            interior_point: p,
            interior_radius: r,
        })
    }

    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Self::new(SetKind::Box {
            lower: vec![lower],
            upper: vec![upper],
        })
    }

    /// Replaces the default inner ball. `p ± r·e_j` must lie in the set.
    pub fn with_interior(mut self, point: Vec<f64>, radius: f64) -> Result<Self> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "interior point",
                expected: self.dim(),
                got: point.len(),
            });
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidSet(format!("interior radius must be positive, got {radius}")));
        }
        if matches!(self.kind, SetKind::Simplex { .. }) {
            return Err(Error::InvalidSet(
                "the simplex has no full-dimensional inner ball".into(),
            ));
        }
        for j in 0..point.len() {
            for sign in [-1.0, 1.0] {
                let mut probe = point.clone();
                probe[j] += sign * radius;
                if !self.contains(&probe, MEMBERSHIP_TOL) {
                    return Err(Error::InvalidSet(format!(
                        "ball of radius {radius} around the interior point leaves the set along e_{j}"
                    )));
                }
            }
        }
        self.interior_point = point;
        self.interior_radius = radius;
        Ok(self)
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            SetKind::Box { .. } => "box",
            SetKind::Simplex { .. } => "simplex",
            SetKind::Ball { .. } => "ball",
        }
    }

    pub fn is_full_dimensional(&self) -> bool {
        !matches!(self.kind, SetKind::Simplex { .. })
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            SetKind::Box { lower, .. } => lower.len(),
            SetKind::Simplex { dim, .. } => *dim,
            SetKind::Ball { center, .. } => center.len(),
        }
    }

    pub fn interior_point(&self) -> &[f64] {
        &self.interior_point
    }

    pub fn interior_radius(&self) -> f64 {
        self.interior_radius
    }

    pub fn diameter(&self) -> f64 {
        match &self.kind {
            SetKind::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| (u - l).powi(2))
                .sum::<f64>()
                .sqrt(),
            SetKind::Simplex { radius, .. } => radius * std::f64::consts::SQRT_2,
            SetKind::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Largest Euclidean norm of a point of the set.
    pub fn max_norm(&self) -> f64 {
        match &self.kind {
            SetKind::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
            SetKind::Simplex { radius, .. } => *radius,
            SetKind::Ball { center, radius } => norm(center) + radius,
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.kind {
            SetKind::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            SetKind::Simplex { radius, .. } => {
                x.iter().all(|v| *v >= -tol) && (x.iter().sum::<f64>() - radius).abs() <= tol * x.len() as f64
            }
            SetKind::Ball { center, radius } => {
                let d: f64 = x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                d <= radius + tol
            }
        }
    }

    /// Euclidean projection.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            SetKind::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.clamp(*l, *u))
                .collect(),
            SetKind::Simplex { radius, .. } => project_simplex(x, *radius),
            SetKind::Ball { center, radius } => {
                let diff: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                let d = norm(&diff);
                if d <= *radius {
                    x.to_vec()
                } else {
                    center
                        .iter()
                        .zip(&diff)
                        .map(|(c, v)| c + v * radius / d)
                        .collect()
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            SetKind::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| rng.gen_range(*l..=*u))
                .collect(),
            SetKind::Simplex { radius, dim } => {
                // normalised exponentials are uniform on the simplex
                let e: Vec<f64> = (0..*dim)
                    .map(|_| -(1.0 - rng.gen::<f64>()).ln())
                    .collect();
                let total: f64 = e.iter().sum();
                e.iter().map(|v| radius * v / total).collect()
            }
            SetKind::Ball { center, radius } => loop {
                let u: Vec<f64> = center.iter().map(|_| rng.gen_range(-1.0..=1.0)).collect();
                if dot(&u, &u) <= 1.0 {
                    break center.iter().zip(&u).map(|(c, v)| c + radius * v).collect();
                }
            },
        }
    }
}

/// Euclidean projection onto `{y ≥ 0 : Σ y = radius}` by sorting.
pub fn project_simplex(x: &[f64], radius: f64) -> Vec<f64> {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - radius) / (k + 1) as f64;
        if v - candidate > 0.0 {
            shift = candidate;
        }
    }
    x.iter().map(|v| (v - shift).max(0.0)).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
