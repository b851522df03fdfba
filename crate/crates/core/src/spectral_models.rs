//! Flat separable model geometries and their exact spectra.
//!
//! Spectra are represented as an [`EigenSequence`]: a few explicit values plus
//! branches `k -> lambda(k)` (`k >= first_index`, repeated `multiplicity` times)
//! carrying a [`WeylDescriptor`] for the large-`k` continuation.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weyl::WeylDescriptor;

/// Decay cutoff used when powering descriptors.
const POWER_CUTOFF: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryConditionKind {
    /// Restriction to the boundary.
    Dirichlet,
    /// Normal derivative at the boundary.
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelGeometry {
    /// Circle of circumference `length` with operator `-d^2/dx^2 + mass^2`.
    Circle { length: f64, mass: f64 },
    /// Interval `[0, length]` with the given boundary condition at both ends.
    Interval {
        length: f64,
        mass: f64,
        bc: BoundaryConditionKind,
    },
    /// Flat torus `R/L1 x R/L2` cut along a circle of length `l2`; the fiber
    /// transverse to the cut has length `l1`.
    TorusCut { l1: f64, l2: f64, mass: f64 },
}

impl ModelGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        match *self {
            ModelGeometry::Circle { length, mass } => {
                positive("circle length", length)?;
                positive("circle mass (zero mode excluded)", mass)
            }
            ModelGeometry::Interval { length, mass, bc } => {
                positive("interval length", length)?;
                match bc {
                    BoundaryConditionKind::Dirichlet if mass >= 0.0 && mass.is_finite() => Ok(()),
                    BoundaryConditionKind::Dirichlet => Err(Error::Domain(format!(
                        "interval mass must be nonnegative, got {mass}"
                    ))),
                    BoundaryConditionKind::Neumann => {
                        positive("Neumann interval mass (positivity)", mass)
                    }
                }
            }
            ModelGeometry::TorusCut { l1, l2, mass } => {
                positive("torus L1", l1)?;
                positive("torus L2", l2)?;
                positive("torus mass (zero mode excluded)", mass)
            }
        }
    }

    /// Dimension of the closed manifold.
    pub fn dimension(&self) -> usize {
        match self {
            ModelGeometry::Circle { .. } | ModelGeometry::Interval { .. } => 1,
            ModelGeometry::TorusCut { .. } => 2,
        }
    }

    pub fn mass(&self) -> f64 {
        match *self {
            ModelGeometry::Circle { mass, .. }
            | ModelGeometry::Interval { mass, .. }
            | ModelGeometry::TorusCut { mass, .. } => mass,
        }
    }
}

/// One Fourier mode along the cut of a [`ModelGeometry::TorusCut`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeProblem {
    pub mode_index: u64,
    /// `m^2 + (2 pi k / L2)^2`
    pub effective_mass_sq: f64,
    pub fiber_length: f64,
    pub multiplicity: u32,
}

type Generator = Arc<dyn Fn(u64) -> Complex64 + Send + Sync>;

/// One branch `k -> lambda(k)`, `k >= first_index >= 1`.
#[derive(Clone)]
pub struct Branch {
    pub multiplicity: u32,
    pub first_index: u64,
    generator: Generator,
    pub weyl: WeylDescriptor,
    /// Smallest index from which the descriptor series may be used for the tail.
    pub min_tail_index: u64,
}

impl fmt::Debug for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Branch")
            .field("multiplicity", &self.multiplicity)
            .field("first_index", &self.first_index)
            .field("weyl", &self.weyl)
            .field("min_tail_index", &self.min_tail_index)
            .finish()
    }
}

impl Branch {
    pub fn new(
        multiplicity: u32,
        first_index: u64,
        weyl: WeylDescriptor,
        generator: impl Fn(u64) -> Complex64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if multiplicity == 0 {
            return Err(Error::Domain("branch multiplicity must be positive".into()));
        }
        if first_index == 0 {
            return Err(Error::Domain(
                "branch indices start at 1; put k = 0 values in the explicit list".into(),
            ));
        }
        let min_tail_index = series_radius(&weyl).max(first_index);
        Ok(Self {
            multiplicity,
            first_index,
            generator: Arc::new(generator),
            weyl,
            min_tail_index,
        })
    }

    pub fn value(&self, k: u64) -> Complex64 {
        (self.generator)(k)
    }

    /// Raises the index from which the tail series is trusted.
    pub fn with_min_tail_index(mut self, k: u64) -> Self {
        self.min_tail_index = self.min_tail_index.max(k);
        self
    }

    fn map(
        &self,
        weyl: WeylDescriptor,
        f: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        let g = self.generator.clone();
        let min_tail = self.min_tail_index.max(series_radius(&weyl));
        Self {
            multiplicity: self.multiplicity,
            first_index: self.first_index,
            generator: Arc::new(move |k| f(g(k))),
            weyl,
            min_tail_index: min_tail,
        }
    }
}

/// Index beyond which every correction term is below 1/2 in modulus, so the
/// binomial and logarithmic series of the relative correction converge.
fn series_radius(weyl: &WeylDescriptor) -> u64 {
    let mut k: f64 = 1.0;
    for (g, c) in weyl.relative().terms() {
        let n = c.norm();
        if n > 0.0 {
            k = k.max((4.0 * n).powf(1.0 / g));
        }
    }
    k.ceil() as u64
}

/// Lazily generated spectrum: explicit values plus asymptotically described
/// branches. Real sequences iterate in nondecreasing order.
#[derive(Clone, Debug)]
pub struct EigenSequence {
    finite: Vec<Complex64>,
    branches: Vec<Branch>,
    real: bool,
}

impl EigenSequence {
    pub fn new(finite: Vec<Complex64>, branches: Vec<Branch>) -> Self {
        let real = finite.iter().all(|z| z.im == 0.0)
            && branches
                .iter()
                .all(|b| b.weyl.relative().terms().iter().all(|(_, c)| c.im == 0.0));
        Self {
            finite,
            branches,
            real,
        }
    }

    /// Finite spectrum.
    pub fn from_values(values: &[f64]) -> Self {
        Self::new(
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            Vec::new(),
        )
    }

    pub fn from_complex_values(values: &[Complex64]) -> Self {
        Self::new(values.to_vec(), Vec::new())
    }

    pub fn finite(&self) -> &[Complex64] {
        &self.finite
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    /// `None` when the sequence is infinite.
    pub fn count_available(&self) -> Option<usize> {
        self.branches.is_empty().then_some(self.finite.len())
    }

    /// Spectrum of `A + shift`.
    pub fn shifted(&self, shift: Complex64) -> Self {
        if shift.norm() == 0.0 {
            return self.clone();
        }
        let finite = self.finite.iter().map(|z| z + shift).collect();
        let branches = self
            .branches
            .iter()
            .map(|b| b.map(b.weyl.shifted(shift), move |z| z + shift))
            .collect();
        Self::new(finite, branches)
    }

    /// Spectrum of `factor * A`, `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        let finite = self.finite.iter().map(|z| z * factor).collect();
        let branches = self
            .branches
            .iter()
            .map(|b| b.map(b.weyl.scaled(factor), move |z| z * factor))
            .collect();
        Self::new(finite, branches)
    }

    /// The first `n` eigenvalues in nondecreasing order (by modulus for complex
    /// spectra), with multiplicities repeated.
    pub fn first_sorted(&self, n: usize) -> Vec<Complex64> {
        let mut vals: Vec<Complex64> = self.finite.clone();
        for b in &self.branches {
            let per = (n as u64).div_ceil(b.multiplicity as u64) + 1;
            for k in b.first_index..b.first_index + per {
                let v = b.value(k);
                for _ in 0..b.multiplicity {
                    vals.push(v);
                }
            }
        }
        if self.real {
            vals.sort_by(|a, b| a.re.total_cmp(&b.re));
        } else {
            vals.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        }
        vals.truncate(n);
        vals
    }

    /// Eigenvalue at position `i` of the sorted stream.
    pub fn eigenvalue(&self, i: usize) -> Complex64 {
        self.first_sorted(i + 1)[i]
    }

    /// Leading Weyl law of the sorted stream, `lambda_i ~ a i^p`, assuming all
    /// branches share the exponent `p`.
    pub fn stream_weyl(&self) -> Option<(f64, f64)> {
        let p = self.branches.first()?.weyl.exponent();
        if self
            .branches
            .iter()
            .any(|b| (b.weyl.exponent() - p).abs() > 1e-12)
        {
            return None;
        }
        let density: f64 = self
            .branches
            .iter()
            .map(|b| b.multiplicity as f64 * b.weyl.leading().powf(-1.0 / p))
            .sum();
        Some((density.powf(-p), p))
    }
}

pub fn circle_eigenvalues(length: f64, mass: f64) -> Result<EigenSequence> {
    ModelGeometry::Circle { length, mass }.validate()?;
    let m2 = mass * mass;
    let scale = 2.0 * PI / length;
    let weyl = WeylDescriptor::quadratic(Complex64::new(m2, 0.0), scale)?;
    let branch = Branch::new(2, 1, weyl, move |k| {
        Complex64::new(m2 + (scale * k as f64).powi(2), 0.0)
    })?;
    Ok(EigenSequence::new(
        vec![Complex64::new(m2, 0.0)],
        vec![branch],
    ))
}

pub fn interval_eigenvalues(
    length: f64,
    mass: f64,
    bc: BoundaryConditionKind,
) -> Result<EigenSequence> {
    ModelGeometry::Interval { length, mass, bc }.validate()?;
    let m2 = mass * mass;
    let scale = PI / length;
    let weyl = WeylDescriptor::quadratic(Complex64::new(m2, 0.0), scale)?;
    let branch = Branch::new(1, 1, weyl, move |k| {
        Complex64::new(m2 + (scale * k as f64).powi(2), 0.0)
    })?;
    let finite = match bc {
        BoundaryConditionKind::Dirichlet => Vec::new(),
        BoundaryConditionKind::Neumann => vec![Complex64::new(m2, 0.0)],
    };
    Ok(EigenSequence::new(finite, vec![branch]))
}

/// Spectrum of the model operator of a one-dimensional geometry.
pub fn geometry_eigenvalues(geometry: &ModelGeometry) -> Result<EigenSequence> {
    match *geometry {
        ModelGeometry::Circle { length, mass } => circle_eigenvalues(length, mass),
        ModelGeometry::Interval { length, mass, bc } => interval_eigenvalues(length, mass, bc),
        ModelGeometry::TorusCut { .. } => Err(Error::Unsupported(
            "the torus spectrum is two-dimensional; use the mode decomposition".into(),
        )),
    }
}

pub fn torus_mode_problems(geometry: &ModelGeometry, k_max: u64) -> Result<Vec<ModeProblem>> {
    geometry.validate()?;
    let ModelGeometry::TorusCut { l1, l2, mass } = *geometry else {
        return Err(Error::Domain(
            "torus_mode_problems requires a TorusCut geometry".into(),
        ));
    };
    let nu = 2.0 * PI / l2;
    Ok((0..=k_max)
        .map(|k| ModeProblem {
            mode_index: k,
            effective_mass_sq: mass * mass + (nu * k as f64).powi(2),
            fiber_length: l1,
            multiplicity: if k == 0 { 1 } else { 2 },
        })
        .collect())
}

/// Spectrum of `A^d`.
pub fn power_sequence(seq: &EigenSequence, d: u32) -> Result<EigenSequence> {
    if d == 0 {
        return Err(Error::Domain("power must be at least 1".into()));
    }
    if d == 1 {
        return Ok(seq.clone());
    }
    let di = d as i32;
    let finite = seq.finite.iter().map(|z| z.powi(di)).collect();
    let branches = seq
        .branches
        .iter()
        .map(|b| b.map(b.weyl.powered(d as f64, POWER_CUTOFF), move |z| z.powi(di)))
        .collect();
    Ok(EigenSequence::new(finite, branches))
}
