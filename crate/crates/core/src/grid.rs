//! Uniform grids on intervals and flat tori, and the cell-wise containers
//! (densities, signed densities, scalar fields) the other modules consume.
//!
//! Cells are indexed row-major with the first axis slowest. Cell `k` along an
//! axis of spacing `h` has center `(k + 1/2) h`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary treatment of a [`GridDomain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Reflecting (zero-flux) ends. One-dimensional only.
    Interval,
    /// Periodic in every axis.
    Torus,
}

/// A uniform discretization of an interval or a flat torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainWire", into = "DomainWire")]
pub struct GridDomain {
    cells: Vec<usize>,
    extents: Vec<f64>,
    boundary: Boundary,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainWire {
    dims: usize,
    cells: Vec<usize>,
    extents: Vec<f64>,
    boundary: Boundary,
}

impl TryFrom<DomainWire> for GridDomain {
    type Error = Error;

    fn try_from(w: DomainWire) -> Result<Self> {
        if w.dims != w.cells.len() {
            return Err(Error::InvalidDomain(format!(
                "dims = {} but {} cell counts given",
                w.dims,
                w.cells.len()
            )));
        }
        GridDomain::new(w.cells, w.extents, w.boundary)
    }
}

impl From<GridDomain> for DomainWire {
    fn from(d: GridDomain) -> Self {
        DomainWire {
            dims: d.dims(),
            cells: d.cells,
            extents: d.extents,
            boundary: d.boundary,
        }
    }
}

/// A face between two neighbouring cells, `low` on the negative side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub low: usize,
    pub high: usize,
    pub axis: usize,
}

impl GridDomain {
    pub fn new(cells: Vec<usize>, extents: Vec<f64>, boundary: Boundary) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidDomain("at least one dimension required".into()));
        }
        if cells.len() != extents.len() {
            return Err(Error::InvalidDomain(format!(
                "{} cell counts but {} extents",
                cells.len(),
                extents.len()
            )));
        }
        if cells.contains(&0) {
            return Err(Error::InvalidDomain("cell counts must be positive".into()));
        }
        if extents.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::InvalidDomain("extents must be positive and finite".into()));
        }
        if boundary == Boundary::Interval && cells.len() != 1 {
            return Err(Error::InvalidDomain(
                "interval boundary is only available in one dimension".into(),
            ));
        }
        Ok(Self {
            cells,
            extents,
            boundary,
        })
    }

    pub fn interval(cells: usize, extent: f64) -> Result<Self> {
        Self::new(vec![cells], vec![extent], Boundary::Interval)
    }

    pub fn torus(cells: Vec<usize>, extents: Vec<f64>) -> Result<Self> {
        Self::new(cells, extents, Boundary::Torus)
    }

    /// Unit-extent torus with `n` cells along each of `dims` axes.
    pub fn unit_torus(dims: usize, n: usize) -> Result<Self> {
        Self::torus(vec![n; dims], vec![1.0; dims])
    }

    pub fn dims(&self) -> usize {
        self.cells.len()
    }

    pub fn cells_per_dim(&self) -> &[usize] {
        &self.cells
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_torus(&self) -> bool {
        self.boundary == Boundary::Torus
    }

    pub fn cell_count(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extents[axis] / self.cells[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dims()).map(|a| self.spacing(a)).product()
    }

    /// Total Lebesgue measure of the domain.
    pub fn volume(&self) -> f64 {
        self.extents.iter().product()
    }

    /// Multi-index of a flat cell index.
    pub fn unravel(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims()];
        for axis in (0..self.dims()).rev() {
            out[axis] = index % self.cells[axis];
            index /= self.cells[axis];
        }
        out
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.cells)
            .fold(0, |acc, (&k, &n)| acc * n + k)
    }

    fn check_index(&self, index: usize) -> Result<()> {
        let cells = self.cell_count();
        if index >= cells {
            return Err(Error::IndexOutOfRange { index, cells });
        }
        Ok(())
    }

    pub fn center(&self, index: usize) -> Vec<f64> {
        self.unravel(index)
            .iter()
            .enumerate()
            .map(|(axis, &k)| (k as f64 + 0.5) * self.spacing(axis))
            .collect()
    }

    /// Displacement from `from` to `to` along a minimizing geodesic. On the
    /// torus each axis takes the minimum image; an exactly antipodal axis
    /// resolves to the negative half period.
    pub fn displacement(&self, from: &[f64], to: &[f64]) -> Vec<f64> {
        from.iter()
            .zip(to)
            .zip(&self.extents)
            .map(|((&a, &b), &len)| {
                let d = b - a;
                match self.boundary {
                    Boundary::Interval => d,
                    Boundary::Torus => {
                        let mut r = d - len * (d / len).round();
                        if r >= 0.5 * len {
                            r -= len;
                        }
                        r
                    }
                }
            })
            .collect()
    }

    pub fn point_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.displacement(a, b).iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    pub fn geodesic_distance(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_index(j)?;
        Ok(self.cell_distance_unchecked(i, j))
    }

    pub(crate) fn cell_distance_sq_unchecked(&self, i: usize, j: usize) -> f64 {
        let a = self.center(i);
        let b = self.center(j);
        self.displacement(&a, &b).iter().map(|d| d * d).sum()
    }

    pub(crate) fn cell_distance_unchecked(&self, i: usize, j: usize) -> f64 {
        self.cell_distance_sq_unchecked(i, j).sqrt()
    }

    /// Cell containing a point. Torus coordinates are wrapped; interval
    /// coordinates are clamped to the domain.
    pub fn cell_containing(&self, point: &[f64]) -> usize {
        let multi: Vec<usize> = point
            .iter()
            .enumerate()
            .map(|(axis, &x)| {
                let len = self.extents[axis];
                let n = self.cells[axis];
                let x = match self.boundary {
                    Boundary::Torus => x.rem_euclid(len),
                    Boundary::Interval => x.clamp(0.0, len),
                };
                ((x / self.spacing(axis)).floor() as usize).min(n - 1)
            })
            .collect();
        self.ravel(&multi)
    }

    /// All faces between neighbouring cells. Interval ends carry no face
    /// (zero flux); torus faces wrap around.
    pub fn faces(&self) -> Vec<Face> {
        let mut faces = Vec::new();
        for axis in 0..self.dims() {
            let n = self.cells[axis];
            for low in 0..self.cell_count() {
                let mut multi = self.unravel(low);
                let k = multi[axis];
                let next = if k + 1 < n {
                    k + 1
                } else if self.is_torus() && n > 1 {
                    0
                } else {
                    continue;
                };
                multi[axis] = next;
                faces.push(Face {
                    low,
                    high: self.ravel(&multi),
                    axis,
                });
            }
        }
        faces
    }

    /// Volume attributed to a face's gradient sample divided by the squared
    /// spacing across it: the coefficient of `(f_high - f_low)^2` in the
    /// discrete Dirichlet energy with unit weight.
    pub fn face_coefficient(&self, axis: usize) -> f64 {
        let h = self.spacing(axis);
        self.cell_volume() / (h * h)
    }
}

fn validate_finite(values: &[f64], what: &str) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidValues(format!("{what} value at cell {i} is not finite")));
    }
    Ok(())
}

fn check_len(domain: &GridDomain, values: &[f64]) -> Result<()> {
    if values.len() != domain.cell_count() {
        return Err(Error::InvalidValues(format!(
            "{} values for {} cells",
            values.len(),
            domain.cell_count()
        )));
    }
    Ok(())
}

macro_rules! cell_container {
    ($name:ident, $wire:ident) => {
        #[derive(Serialize, Deserialize)]
        struct $wire {
            domain: GridDomain,
            values: Vec<f64>,
        }

        impl From<$name> for $wire {
            fn from(v: $name) -> Self {
                $wire {
                    domain: v.domain,
                    values: v.values,
                }
            }
        }

        impl TryFrom<$wire> for $name {
            type Error = Error;

            fn try_from(w: $wire) -> Result<Self> {
                $name::new(w.domain, w.values)
            }
        }

        impl $name {
            pub fn domain(&self) -> &GridDomain {
                &self.domain
            }

            pub fn values(&self) -> &[f64] {
                &self.values
            }

            pub fn into_values(self) -> Vec<f64> {
                self.values
            }

            pub fn to_json(&self) -> String {
                serde_json::to_string(self).expect("cell container serializes")
            }

            pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
                serde_json::from_str(s)
            }
        }
    };
}

/// Nonnegative cell-wise density with respect to Lebesgue measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityWire", into = "DensityWire")]
pub struct Density {
    domain: GridDomain,
    values: Vec<f64>,
}

cell_container!(Density, DensityWire);

impl Density {
    pub fn new(domain: GridDomain, values: Vec<f64>) -> Result<Self> {
        check_len(&domain, &values)?;
        validate_finite(&values, "density")?;
        if let Some(i) = values.iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidValues(format!(
                "density is negative at cell {i} ({})",
                values[i]
            )));
        }
        Ok(Self { domain, values })
    }

    pub fn uniform(domain: GridDomain, rho: f64) -> Result<Self> {
        let n = domain.cell_count();
        Self::new(domain, vec![rho; n])
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.domain.cell_volume()
    }

    /// Discrete essential supremum.
    pub fn sup_density(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn inf_density(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn cell_mass(&self, index: usize) -> f64 {
        self.values[index] * self.domain.cell_volume()
    }

    pub fn cell_masses(&self) -> Vec<f64> {
        let v = self.domain.cell_volume();
        self.values.iter().map(|x| x * v).collect()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.domain.clone(),
            self.values.iter().map(|v| v * factor).collect(),
        )
    }

    /// Rescale so the total mass equals `mass`.
    pub fn with_mass(&self, mass: f64) -> Result<Self> {
        let current = self.total_mass();
        if current <= 0.0 {
            return Err(Error::InvalidValues("cannot rescale a zero measure".into()));
        }
        self.scaled(mass / current)
    }

    /// Signed density `self - other`.
    pub fn minus(&self, other: &Density) -> Result<SignedDensity> {
        if self.domain != other.domain {
            return Err(Error::DomainMismatch);
        }
        SignedDensity::new(
            self.domain.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    /// Circular shift of the cell pattern by `shift` cells along each axis.
    pub fn shifted(&self, shift: &[isize]) -> Result<Self> {
        let d = &self.domain;
        let mut out = vec![0.0; self.values.len()];
        for (i, &v) in self.values.iter().enumerate() {
            let multi: Vec<usize> = d
                .unravel(i)
                .iter()
                .zip(shift)
                .zip(d.cells_per_dim())
                .map(|((&k, &s), &n)| (k as isize + s).rem_euclid(n as isize) as usize)
                .collect();
            out[d.ravel(&multi)] = v;
        }
        Self::new(d.clone(), out)
    }
}

/// Signed cell-wise density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SignedDensityWire", into = "SignedDensityWire")]
pub struct SignedDensity {
    domain: GridDomain,
    values: Vec<f64>,
}

cell_container!(SignedDensity, SignedDensityWire);

impl SignedDensity {
    pub fn new(domain: GridDomain, values: Vec<f64>) -> Result<Self> {
        check_len(&domain, &values)?;
        validate_finite(&values, "signed density")?;
        Ok(Self { domain, values })
    }

    pub fn zeros(domain: GridDomain) -> Self {
        let n = domain.cell_count();
        Self {
            domain,
            values: vec![0.0; n],
        }
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.domain.cell_volume()
    }

    pub fn total_variation(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.domain.cell_volume()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            domain: self.domain.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// `base + self`, failing if the result is negative anywhere.
    pub fn added_to(&self, base: &Density) -> Result<Density> {
        if self.domain != base.domain {
            return Err(Error::DomainMismatch);
        }
        Density::new(
            self.domain.clone(),
            self.values
                .iter()
                .zip(&base.values)
                .map(|(s, b)| b + s)
                .collect(),
        )
    }
}

/// Real function sampled at cell centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScalarFieldWire", into = "ScalarFieldWire")]
pub struct ScalarField {
    domain: GridDomain,
    values: Vec<f64>,
}

cell_container!(ScalarField, ScalarFieldWire);

impl ScalarField {
    pub fn new(domain: GridDomain, values: Vec<f64>) -> Result<Self> {
        check_len(&domain, &values)?;
        validate_finite(&values, "scalar field")?;
        Ok(Self { domain, values })
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(domain: GridDomain, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..domain.cell_count())
            .map(|i| f(&domain.center(i)))
            .collect();
        Self::new(domain, values)
    }

    /// Pairing `<f, sigma>` with midpoint quadrature.
    pub fn pairing(&self, sigma: &SignedDensity) -> Result<f64> {
        if self.domain != sigma.domain {
            return Err(Error::DomainMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&sigma.values)
            .map(|(f, s)| f * s)
            .sum::<f64>()
            * self.domain.cell_volume())
    }
}

/// Recipe for a synthetic [`Density`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    Uniform {
        rho: f64,
    },
    /// I.i.d. cell values uniform on `[rho_min, rho_max]`.
    BoundedRandom {
        rho_min: f64,
        rho_max: f64,
        seed: u64,
    },
    /// Raised-cosine bump of radius `width` around `center`, scaled to `mass`.
    Bump {
        center: Vec<f64>,
        width: f64,
        mass: f64,
    },
    /// All of `mass` in a single cell.
    DiracLike {
        cell: usize,
        mass: f64,
    },
    /// `base` plus a random trigonometric field of sup norm `amplitude`.
    SmoothRandom {
        base: f64,
        amplitude: f64,
        modes: u32,
        seed: u64,
    },
}

pub fn make_measure(domain: &GridDomain, spec: &Generator) -> Result<Density> {
    let n = domain.cell_count();
    match *spec {
        Generator::Uniform { rho } => {
            if !(rho.is_finite() && rho >= 0.0) {
                return Err(Error::InvalidGenerator(format!("uniform density {rho}")));
            }
            Density::uniform(domain.clone(), rho)
        }
        Generator::BoundedRandom {
            rho_min,
            rho_max,
            seed,
        } => {
            if !(rho_min.is_finite() && rho_max.is_finite()) || rho_min < 0.0 {
                return Err(Error::InvalidGenerator(
                    "bounds must be finite and nonnegative".into(),
                ));
            }
            if rho_min > rho_max {
                return Err(Error::InvalidGenerator(format!(
                    "rho_min {rho_min} > rho_max {rho_max}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values = (0..n)
                .map(|_| rho_min + (rho_max - rho_min) * rng.random::<f64>())
                .collect();
            Density::new(domain.clone(), values)
        }
        Generator::Bump {
            ref center,
            width,
            mass,
        } => {
            if !(mass > 0.0 && mass.is_finite()) {
                return Err(Error::InvalidGenerator(format!("nonpositive mass {mass}")));
            }
            if !(width > 0.0 && width.is_finite()) {
                return Err(Error::InvalidGenerator(format!("nonpositive width {width}")));
            }
            if center.len() != domain.dims() {
                return Err(Error::InvalidGenerator("center has wrong dimension".into()));
            }
            let mut values: Vec<f64> = (0..n)
                .map(|i| {
                    let r = domain.point_distance(&domain.center(i), center);
                    if r < width {
                        0.5 * (1.0 + (std::f64::consts::PI * r / width).cos())
                    } else {
                        0.0
                    }
                })
                .collect();
            if values.iter().all(|&v| v == 0.0) {
                values[domain.cell_containing(center)] = 1.0;
            }
            Density::new(domain.clone(), values)?.with_mass(mass)
        }
        Generator::DiracLike { cell, mass } => {
            if !(mass > 0.0 && mass.is_finite()) {
                return Err(Error::InvalidGenerator(format!("nonpositive mass {mass}")));
            }
            domain.check_index(cell)?;
            let mut values = vec![0.0; n];
            values[cell] = mass / domain.cell_volume();
            Density::new(domain.clone(), values)
        }
        Generator::SmoothRandom {
            base,
            amplitude,
            modes,
            seed,
        } => {
            if !(amplitude >= 0.0 && amplitude <= base && base.is_finite()) {
                return Err(Error::InvalidGenerator(format!(
                    "need 0 <= amplitude ({amplitude}) <= base ({base})"
                )));
            }
            let field = smooth_field(domain, modes.max(1), seed);
            Density::new(
                domain.clone(),
                field.iter().map(|g| base + amplitude * g).collect(),
            )
        }
    }
}

/// Random trigonometric field sampled at cell centers, scaled to sup norm 1.
fn smooth_field(domain: &GridDomain, modes: u32, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms = 2 * modes as usize;
    let waves: Vec<(Vec<f64>, f64, f64)> = (0..terms)
        .map(|_| {
            let mut k: Vec<f64> = (0..domain.dims())
                .map(|_| rng.random_range(0..=modes) as f64)
                .collect();
            if k.iter().all(|&c| c == 0.0) {
                k[0] = 1.0;
            }
            let norm = k.iter().map(|c| c * c).sum::<f64>().sqrt();
            let amp = rng.random_range(0.5..1.0) / norm;
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            (k, amp, phase)
        })
        .collect();
    let raw: Vec<f64> = (0..domain.cell_count())
        .map(|i| {
            let x = domain.center(i);
            waves
                .iter()
                .map(|(k, amp, phase)| {
                    let arg: f64 = k
                        .iter()
                        .zip(&x)
                        .zip(domain.extents())
                        .map(|((kc, xc), l)| std::f64::consts::TAU * kc * xc / l)
                        .sum();
                    amp * (arg + phase).cos()
                })
                .sum()
        })
        .collect();
    let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    raw.iter().map(|v| v / peak).collect()
}

/// Smooth zero-mass signed density with sup norm at most 1.
pub fn smooth_signed(domain: &GridDomain, modes: u32, seed: u64) -> SignedDensity {
    let raw = smooth_field(domain, modes.max(1), seed);
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let centered: Vec<f64> = raw.iter().map(|v| v - mean).collect();
    let peak = centered.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { 1.0 / peak } else { 0.0 };
    SignedDensity {
        domain: domain.clone(),
        values: centered.iter().map(|v| v * scale).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn total_mass_examples() {
        let t = GridDomain::unit_torus(1, 37).unwrap();
        assert_abs_diff_eq!(Density::uniform(t.clone(), 1.0).unwrap().total_mass(), 1.0, epsilon = 1e-14);
        assert_eq!(Density::uniform(t, 0.0).unwrap().total_mass(), 0.0);
        let i = GridDomain::interval(2, 1.0).unwrap();
        let d = Density::new(i, vec![1.0, 3.0]).unwrap();
        assert_eq!(d.total_mass(), 2.0);
        assert_eq!(d.sup_density(), 3.0);
    }

    #[test]
    fn sup_of_linear_midpoint() {
        let t = GridDomain::unit_torus(1, 8).unwrap();
        let a = Density::uniform(t.clone(), 1.0).unwrap();
        let b = Density::uniform(t.clone(), 4.0).unwrap();
        let mid: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| 0.5 * (x + y)).collect();
        assert_eq!(Density::new(t, mid).unwrap().sup_density(), 2.5);
    }

    #[test]
    fn geodesic_distance_examples() {
        let t = GridDomain::unit_torus(1, 10).unwrap();
        let i = GridDomain::interval(10, 1.0).unwrap();
        assert_eq!(t.geodesic_distance(3, 3).unwrap(), 0.0);
        assert_abs_diff_eq!(t.geodesic_distance(0, 9).unwrap(), 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(i.geodesic_distance(0, 9).unwrap(), 0.9, epsilon = 1e-12);
        assert!(matches!(
            i.geodesic_distance(0, 10),
            Err(Error::IndexOutOfRange { index: 10, cells: 10 })
        ));
    }

    #[test]
    fn antipodal_tie_breaks_negative() {
        let t = GridDomain::unit_torus(2, 4).unwrap();
        let d = t.displacement(&[0.125, 0.125], &[0.625, 0.375]);
        assert_eq!(d, vec![-0.5, 0.25]);
    }

    #[test]
    fn interval_only_in_one_dimension() {
        assert!(GridDomain::new(vec![4, 4], vec![1.0, 1.0], Boundary::Interval).is_err());
        assert!(GridDomain::new(vec![4, 4, 2], vec![1.0, 1.0, 2.0], Boundary::Torus).is_ok());
    }

    #[test]
    fn cell_volume_is_product_of_spacings() {
        let t = GridDomain::torus(vec![4, 5], vec![2.0, 3.0]).unwrap();
        assert_abs_diff_eq!(t.cell_volume(), 0.5 * 0.6, epsilon = 1e-15);
    }

    #[test]
    fn generator_examples() {
        let d = GridDomain::interval(16, 1.0).unwrap();
        let u = make_measure(&d, &Generator::Uniform { rho: 2.0 }).unwrap();
        assert!(u.values().iter().all(|&v| v == 2.0));
        let dirac = make_measure(&d, &Generator::DiracLike { cell: 0, mass: 1.0 }).unwrap();
        assert_eq!(dirac.values()[0], 16.0);
        assert!(dirac.values()[1..].iter().all(|&v| v == 0.0));
        let r = make_measure(&d, &Generator::BoundedRandom { rho_min: 1.0, rho_max: 4.0, seed: 7 }).unwrap();
        assert!(r.values().iter().all(|&v| (1.0..=4.0).contains(&v)));
        let r2 = make_measure(&d, &Generator::BoundedRandom { rho_min: 1.0, rho_max: 4.0, seed: 7 }).unwrap();
        assert_eq!(r, r2);
    }

    #[test]
    fn generator_errors() {
        let d = GridDomain::interval(16, 1.0).unwrap();
        assert!(make_measure(&d, &Generator::BoundedRandom { rho_min: 2.0, rho_max: 1.0, seed: 0 }).is_err());
        assert!(make_measure(&d, &Generator::DiracLike { cell: 0, mass: 0.0 }).is_err());
        assert!(make_measure(&d, &Generator::Bump { center: vec![0.5], width: 0.1, mass: -1.0 }).is_err());
        assert!(make_measure(&d, &Generator::DiracLike { cell: 16, mass: 1.0 }).is_err());
    }

    #[test]
    fn density_json_schema() {
        let d = GridDomain::torus(vec![2, 1], vec![1.0, 2.0]).unwrap();
        let m = Density::new(d, vec![0.5, 1.5]).unwrap();
        let json: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(
            json,
            serde_json::json!({
                "domain": {"dims": 2, "cells": [2, 1], "extents": [1.0, 2.0], "boundary": "torus"},
                "values": [0.5, 1.5]
            })
        );
        assert_eq!(Density::from_json(&m.to_json()).unwrap(), m);
        let bad = r#"{"domain":{"dims":1,"cells":[2],"extents":[1.0],"boundary":"interval"},"values":[-1.0,1.0]}"#;
        assert!(Density::from_json(bad).is_err());
        assert!(SignedDensity::from_json(bad).is_ok());
    }

    fn domain_strategy() -> impl Strategy<Value = GridDomain> {
        prop_oneof![
            (1usize..12, 0.5f64..3.0).prop_map(|(n, l)| GridDomain::interval(n, l).unwrap()),
            (1usize..12, 0.5f64..3.0).prop_map(|(n, l)| GridDomain::torus(vec![n], vec![l]).unwrap()),
            (1usize..6, 1usize..6, 0.5f64..3.0, 0.5f64..3.0)
                .prop_map(|(a, b, la, lb)| GridDomain::torus(vec![a, b], vec![la, lb]).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn generator_mass_is_exact(d in domain_strategy(), mass in 0.1f64..10.0, frac in 0.0f64..1.0, w in 0.05f64..1.0) {
            let cell = ((d.cell_count() as f64 * frac) as usize).min(d.cell_count() - 1);
            let center: Vec<f64> = d.extents().iter().map(|l| l * frac).collect();
            for g in [Generator::DiracLike { cell, mass }, Generator::Bump { center, width: w, mass }] {
                let m = make_measure(&d, &g).unwrap();
                prop_assert!((m.total_mass() - mass).abs() <= 1e-12 * mass);
            }
            let u = make_measure(&d, &Generator::Uniform { rho: mass }).unwrap();
            prop_assert!((u.total_mass() - mass * d.volume()).abs() <= 1e-12 * mass * d.volume());
        }

        #[test]
        fn distance_is_a_metric(d in domain_strategy()) {
            let n = d.cell_count();
            for i in 0..n {
                for j in 0..n {
                    let dij = d.geodesic_distance(i, j).unwrap();
                    prop_assert_eq!(dij, d.geodesic_distance(j, i).unwrap());
                    prop_assert_eq!(dij == 0.0, i == j);
                    for k in 0..n {
                        let via = dij + d.geodesic_distance(j, k).unwrap();
                        prop_assert!(d.geodesic_distance(i, k).unwrap() <= via + 1e-12);
                    }
                }
            }
        }

        #[test]
        fn torus_never_longer_than_interval(n in 1usize..12, l in 0.5f64..3.0) {
            let t = GridDomain::torus(vec![n], vec![l]).unwrap();
            let i = GridDomain::interval(n, l).unwrap();
            for a in 0..n {
                for b in 0..n {
                    prop_assert!(t.geodesic_distance(a, b).unwrap() <= i.geodesic_distance(a, b).unwrap());
                }
            }
        }
    }

    #[test]
    fn exhaustive_triangle_inequality_on_12_grids() {
        for d in [
            GridDomain::interval(12, 1.0).unwrap(),
            GridDomain::unit_torus(1, 12).unwrap(),
            GridDomain::torus(vec![12, 5], vec![1.0, 0.7]).unwrap(),
        ] {
            let n = d.cell_count();
            let dist: Vec<f64> = (0..n * n).map(|k| d.geodesic_distance(k / n, k % n).unwrap()).collect();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        assert!(dist[i * n + k] <= dist[i * n + j] + dist[j * n + k] + 1e-12);
                    }
                }
            }
        }
    }
}
