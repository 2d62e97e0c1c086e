//! Truncated (r, z) half-plane, cell-centered in both directions.
//!
//! Node `(i, j)` sits at `r_i = (i + 1/2) dr`, `z_j = z_min + (j + 1/2) dz`, so no
//! node lies on the axis. Storage is row-major with `r` as the slow index. The axis
//! conditions are encoded as parity (odd/even) extension rules attached to a field's
//! [`Role`] rather than as stored boundary values.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    r_max: f64,
    z_min: f64,
    z_max: f64,
    n_r: usize,
    n_z: usize,
    dr: f64,
    dz: f64,
}

/// Validates the geometry and builds a uniform cell-centered grid.
pub fn make_grid(r_max: f64, z_min: f64, z_max: f64, n_r: usize, n_z: usize) -> Result<GridSpec> {
    GridSpec::new(r_max, z_min, z_max, n_r, n_z)
}

impl GridSpec {
    pub const MIN_NODES: usize = 4;

    pub fn new(r_max: f64, z_min: f64, z_max: f64, n_r: usize, n_z: usize) -> Result<Self> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::InvalidGrid(format!("r_max must be positive, got {r_max}")));
        }
        if !(z_min.is_finite() && z_max.is_finite() && z_max > z_min) {
            return Err(Error::InvalidGrid(format!(
                "need z_max > z_min, got [{z_min}, {z_max}]"
            )));
        }
        if n_r < Self::MIN_NODES || n_z < Self::MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "need n_r, n_z >= {}, got {n_r} x {n_z}",
                Self::MIN_NODES
            )));
        }
        Ok(Self {
            r_max,
            z_min,
            z_max,
            n_r,
            n_z,
            dr: r_max / n_r as f64,
            dz: (z_max - z_min) / n_z as f64,
        })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn z_min(&self) -> f64 {
        self.z_min
    }
    pub fn z_max(&self) -> f64 {
        self.z_max
    }
    pub fn n_r(&self) -> usize {
        self.n_r
    }
    pub fn n_z(&self) -> usize {
        self.n_z
    }
    pub fn dr(&self) -> f64 {
        self.dr
    }
    pub fn dz(&self) -> f64 {
        self.dz
    }
    pub fn len(&self) -> usize {
        self.n_r * self.n_z
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn z_len(&self) -> f64 {
        self.z_max - self.z_min
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dr
    }

    #[inline]
    pub fn z(&self, j: usize) -> f64 {
        self.z_min + (j as f64 + 0.5) * self.dz
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_z + j
    }

    /// Volume of the axisymmetric annular cell around node `(i, ·)`: `2π r_i dr dz`.
    #[inline]
    pub fn cell_measure(&self, i: usize) -> f64 {
        2.0 * PI * self.r(i) * self.dr * self.dz
    }

    pub fn r_nodes(&self) -> Vec<f64> {
        (0..self.n_r).map(|i| self.r(i)).collect()
    }

    pub fn z_nodes(&self) -> Vec<f64> {
        (0..self.n_z).map(|j| self.z(j)).collect()
    }

    /// Half the cell diagonal, the self-interaction cutoff of the kernel sums.
    pub fn half_diagonal(&self) -> f64 {
        0.5 * self.dr.hypot(self.dz)
    }

    /// Same grid with both resolutions doubled.
    pub fn refined(&self) -> Self {
        Self::new(self.r_max, self.z_min, self.z_max, 2 * self.n_r, 2 * self.n_z)
            .expect("refining a valid grid stays valid")
    }
}

/// Behaviour of a field under reflection through the axis `r -> -r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    pub fn flip(self) -> Self {
        match self {
            Parity::Odd => Parity::Even,
            Parity::Even => Parity::Odd,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Parity::Odd => -1.0,
            Parity::Even => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Azimuthal vorticity; vanishes on the axis.
    OmegaTheta,
    /// `omega / r`; even across the axis.
    QOmegaOverR,
    /// `u^r`; vanishes on the axis.
    RadialVelocity,
    /// `u^z`; even across the axis.
    AxialVelocity,
    /// Anything computed from the above. `None` when no axis rule is known.
    Derived(Option<Parity>),
}

impl Role {
    pub fn parity(self) -> Option<Parity> {
        match self {
            Role::OmegaTheta | Role::RadialVelocity => Some(Parity::Odd),
            Role::QOmegaOverR | Role::AxialVelocity => Some(Parity::Even),
            Role::Derived(p) => p,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::OmegaTheta => "omega_theta",
            Role::QOmegaOverR => "q_omega_over_r",
            Role::RadialVelocity => "u_r",
            Role::AxialVelocity => "u_z",
            Role::Derived(Some(Parity::Odd)) => "derived_odd",
            Role::Derived(Some(Parity::Even)) => "derived_even",
            Role::Derived(None) => "derived",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "omega_theta" => Role::OmegaTheta,
            "q_omega_over_r" => Role::QOmegaOverR,
            "u_r" => Role::RadialVelocity,
            "u_z" => Role::AxialVelocity,
            "derived_odd" => Role::Derived(Some(Parity::Odd)),
            "derived_even" => Role::Derived(Some(Parity::Even)),
            "derived" => Role::Derived(None),
            other => return Err(Error::UnknownRole(other.to_string())),
        })
    }
}

/// One real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
    role: Role,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec, role: Role) -> Self {
        Self { grid, values: vec![0.0; grid.len()], role }
    }

    pub fn from_values(grid: GridSpec, role: Role, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch { expected: grid.len(), actual: values.len() });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { i: k / grid.n_z(), j: k % grid.n_z() });
        }
        Ok(Self { grid, values, role })
    }

    /// Samples `f(r, z)` at every node.
    pub fn from_fn(grid: GridSpec, role: Role, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n_r() {
            let r = grid.r(i);
            for j in 0..grid.n_z() {
                values.push(f(r, grid.z(j)));
            }
        }
        Self { grid, values, role }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn role(&self) -> Role {
        self.role
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.values[k] = v;
    }

    /// Values along `z` for the fixed radial index `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.grid.n_z();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn map(&self, role: Role, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect(), role }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(self.role, |v| c * v)
    }

    pub fn abs(&self) -> Self {
        let role = Role::Derived(self.role.parity().map(|_| Parity::Even));
        self.map(role, f64::abs)
    }

    /// `a * self + b * other`, keeping this field's role.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { grid: self.grid, values, role: self.role })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Swirl-free axisymmetric velocity `u^r e_r + u^z e_z`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub u_r: ScalarField,
    pub u_z: ScalarField,
}

impl VelocityField {
    pub fn new(u_r: ScalarField, u_z: ScalarField) -> Result<Self> {
        u_r.check_same_grid(&u_z)?;
        Ok(Self {
            u_r: u_r.with_role(Role::RadialVelocity),
            u_z: u_z.with_role(Role::AxialVelocity),
        })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            u_r: ScalarField::zeros(grid, Role::RadialVelocity),
            u_z: ScalarField::zeros(grid, Role::AxialVelocity),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.u_r.grid()
    }

    /// Pointwise `|u|`.
    pub fn magnitude(&self) -> ScalarField {
        let values =
            self.u_r.values().iter().zip(self.u_z.values()).map(|(a, b)| a.hypot(*b)).collect();
        ScalarField { grid: *self.grid(), values, role: Role::Derived(Some(Parity::Even)) }
    }

    pub fn is_finite(&self) -> bool {
        self.u_r.is_finite() && self.u_z.is_finite()
    }
}

/// Value of the mirror node at `r = -r_0` implied by the field's axis parity.
pub fn axis_ghost(f: &ScalarField, j: usize) -> Result<f64> {
    let parity = f
        .role()
        .parity()
        .ok_or_else(|| Error::UndefinedAxisExtension(f.role().to_string()))?;
    Ok(parity.sign() * f.get(0, j))
}

/// Radial derivative: centered in the interior, mirrored ghost at the axis,
/// second-order one-sided at `r_max`.
pub fn ddr(f: &ScalarField) -> Result<ScalarField> {
    let parity = f
        .role()
        .parity()
        .ok_or_else(|| Error::UndefinedAxisExtension(f.role().to_string()))?;
    let g = *f.grid();
    let (n_r, n_z) = (g.n_r(), g.n_z());
    let inv2 = 0.5 / g.dr();
    let mut out = vec![0.0; g.len()];
    for j in 0..n_z {
        let ghost = parity.sign() * f.get(0, j);
        out[g.idx(0, j)] = (f.get(1, j) - ghost) * inv2;
        for i in 1..n_r - 1 {
            out[g.idx(i, j)] = (f.get(i + 1, j) - f.get(i - 1, j)) * inv2;
        }
        let l = n_r - 1;
        out[g.idx(l, j)] = (3.0 * f.get(l, j) - 4.0 * f.get(l - 1, j) + f.get(l - 2, j)) * inv2;
    }
    Ok(ScalarField { grid: g, values: out, role: Role::Derived(Some(parity.flip())) })
}

/// Vertical derivative: centered in the interior, second-order one-sided at both ends.
pub fn ddz(f: &ScalarField) -> ScalarField {
    let g = *f.grid();
    let n_z = g.n_z();
    let inv2 = 0.5 / g.dz();
    let mut out = vec![0.0; g.len()];
    for i in 0..g.n_r() {
        let row = f.row(i);
        let dst = &mut out[i * n_z..(i + 1) * n_z];
        dst[0] = (-3.0 * row[0] + 4.0 * row[1] - row[2]) * inv2;
        for j in 1..n_z - 1 {
            dst[j] = (row[j + 1] - row[j - 1]) * inv2;
        }
        let l = n_z - 1;
        dst[l] = (3.0 * row[l] - 4.0 * row[l - 1] + row[l - 2]) * inv2;
    }
    ScalarField { grid: g, values: out, role: Role::Derived(f.role().parity()) }
}

/// `∂_r u^r + u^r / r + ∂_z u^z`.
pub fn divergence(u: &VelocityField) -> Result<ScalarField> {
    let g = *u.grid();
    let dr_ur = ddr(&u.u_r)?;
    let dz_uz = ddz(&u.u_z);
    let mut out = dr_ur.values;
    for i in 0..g.n_r() {
        let r = g.r(i);
        for j in 0..g.n_z() {
            let k = g.idx(i, j);
            out[k] += u.u_r.values[k] / r + dz_uz.values[k];
        }
    }
    Ok(ScalarField { grid: g, values: out, role: Role::Derived(Some(Parity::Even)) })
}

/// Midpoint rule for `∫ f dx` over the axisymmetric box, summed row by row in index order.
pub fn cylindrical_integral(f: &ScalarField) -> f64 {
    let g = f.grid();
    let mut total = 0.0;
    for i in 0..g.n_r() {
        let row_sum: f64 = f.row(i).iter().sum();
        total += row_sum * g.cell_measure(i);
    }
    total
}

/// Fraction of `∫|f|` carried by the outer quarter of the box (radially and at both
/// vertical ends). Fields are expected to live well inside the truncated domain.
pub fn outer_band_fraction(f: &ScalarField) -> f64 {
    let g = f.grid();
    let r_cut = 0.75 * g.r_max();
    let z_lo = g.z_min() + 0.25 * g.z_len();
    let z_hi = g.z_max() - 0.25 * g.z_len();
    let (mut outer, mut total) = (0.0, 0.0);
    for i in 0..g.n_r() {
        let mu = g.cell_measure(i);
        let r = g.r(i);
        for j in 0..g.n_z() {
            let m = f.get(i, j).abs() * mu;
            total += m;
            let z = g.z(j);
            if r > r_cut || z < z_lo || z > z_hi {
                outer += m;
            }
        }
    }
    if total > 0.0 {
        outer / total
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_grid(n_r: usize, n_z: usize) -> GridSpec {
        GridSpec::new(1.0, -1.0, 1.0, n_r, n_z).unwrap()
    }

    #[test]
    fn cell_centered_nodes() {
        let g = make_grid(1.0, -1.0, 1.0, 4, 4).unwrap();
        assert_eq!(g.r_nodes(), vec![0.125, 0.375, 0.625, 0.875]);
        assert_eq!(g.dr(), 0.25);
        assert_eq!(g.z_nodes(), vec![-0.75, -0.25, 0.25, 0.75]);
    }

    #[test]
    fn measure_formula() {
        let g = make_grid(2.0, 0.0, 1.0, 4, 4).unwrap();
        assert_relative_eq!(g.cell_measure(0), 2.0 * PI * 0.25 * 0.5 * 0.25, max_relative = 1e-15);
        // two vertical cells is below the minimum resolution
        assert!(make_grid(2.0, 0.0, 1.0, 4, 2).is_err());
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(make_grid(-1.0, 0.0, 1.0, 4, 4).is_err());
        assert!(make_grid(0.0, 0.0, 1.0, 4, 4).is_err());
        assert!(make_grid(1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(make_grid(1.0, 0.0, 1.0, 3, 4).is_err());
        assert!(make_grid(1.0, 0.0, 1.0, 4, 2).is_err());
        assert!(make_grid(f64::NAN, 0.0, 1.0, 4, 4).is_err());
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let g = unit_grid(8, 8);
        let f = ScalarField::from_fn(g, Role::QOmegaOverR, |_, _| 3.5);
        assert!(ddr(&f).unwrap().max_abs() < 1e-13);
        assert!(ddz(&f).max_abs() < 1e-13);
    }

    #[test]
    fn linear_in_z_is_exact() {
        let g = unit_grid(6, 10);
        let f = ScalarField::from_fn(g, Role::QOmegaOverR, |_, z| z);
        let d = ddz(&f);
        for v in d.values() {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ddr_converges_second_order() {
        let err = |n: usize| {
            let g = GridSpec::new(2.0, -1.0, 1.0, n, 16).unwrap();
            let f = ScalarField::from_fn(g, Role::OmegaTheta, |r, z| r.sin() * z.cos());
            let d = ddr(&f).unwrap();
            let mut e = 0.0_f64;
            for i in 0..g.n_r() - 1 {
                for j in 0..g.n_z() {
                    e = e.max((d.get(i, j) - g.r(i).cos() * g.z(j).cos()).abs());
                }
            }
            e
        };
        let (e1, e2, e3) = (err(16), err(32), err(64));
        assert!((3.5..4.5).contains(&(e1 / e2)), "ratio {}", e1 / e2);
        assert!((3.5..4.5).contains(&(e2 / e3)), "ratio {}", e2 / e3);
    }

    #[test]
    fn ddr_needs_axis_rule() {
        let g = unit_grid(4, 4);
        let f = ScalarField::zeros(g, Role::Derived(None));
        assert!(matches!(ddr(&f), Err(Error::UndefinedAxisExtension(_))));
        assert!(axis_ghost(&f, 0).is_err());
    }

    #[test]
    fn ghost_values_follow_parity() {
        let g = unit_grid(4, 4);
        let w = ScalarField::from_fn(g, Role::OmegaTheta, |r, z| r + z + 2.0);
        let q = w.clone().with_role(Role::QOmegaOverR);
        for j in 0..4 {
            assert_eq!(axis_ghost(&w, j).unwrap(), -w.get(0, j));
            assert_eq!(axis_ghost(&q, j).unwrap(), q.get(0, j));
        }
        let u = VelocityField::new(w.clone(), w.clone()).unwrap();
        assert_eq!(axis_ghost(&u.u_r, 1).unwrap(), -w.get(0, 1));
        assert_eq!(axis_ghost(&u.u_z, 1).unwrap(), w.get(0, 1));
    }

    #[test]
    fn derivative_roles_track_parity() {
        let g = unit_grid(4, 4);
        let w = ScalarField::zeros(g, Role::OmegaTheta);
        assert_eq!(ddr(&w).unwrap().role(), Role::Derived(Some(Parity::Even)));
        assert_eq!(ddz(&w).role(), Role::Derived(Some(Parity::Odd)));
    }

    #[test]
    fn ddr_is_linear() {
        let g = unit_grid(8, 6);
        let f = ScalarField::from_fn(g, Role::QOmegaOverR, |r, z| (3.0 * r).cos() + z * z);
        let h = ScalarField::from_fn(g, Role::QOmegaOverR, |r, z| (r * z).exp());
        let sum = f.combine(1.0, &h, 1.0).unwrap();
        let lhs = ddr(&sum).unwrap();
        let rhs = ddr(&f).unwrap().combine(1.0, &ddr(&h).unwrap(), 1.0).unwrap();
        for (a, b) in lhs.values().iter().zip(rhs.values()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn divergence_cases() {
        let g = GridSpec::new(1.0, -1.0, 1.0, 8, 8).unwrap();
        assert_eq!(divergence(&VelocityField::zeros(g)).unwrap().max_abs(), 0.0);

        let u_z = ScalarField::from_fn(g, Role::AxialVelocity, |r, _| (2.0 * r).sin() + r * r);
        let u = VelocityField::new(ScalarField::zeros(g, Role::RadialVelocity), u_z).unwrap();
        assert!(divergence(&u).unwrap().max_abs() < 1e-12);

        // u^r = r z, u^z = -z^2 is solenoidal.
        let u = VelocityField::new(
            ScalarField::from_fn(g, Role::RadialVelocity, |r, z| r * z),
            ScalarField::from_fn(g, Role::AxialVelocity, |_, z| -z * z),
        )
        .unwrap();
        assert!(divergence(&u).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn integral_of_one_is_exact() {
        let g = GridSpec::new(1.0, 0.0, 1.0, 16, 8).unwrap();
        let one = ScalarField::from_fn(g, Role::QOmegaOverR, |_, _| 1.0);
        assert_relative_eq!(cylindrical_integral(&one), PI, max_relative = 1e-13);
        assert_eq!(cylindrical_integral(&ScalarField::zeros(g, Role::QOmegaOverR)), 0.0);
    }

    #[test]
    fn integral_of_r_against_closed_form() {
        // 2π ∫_0^1 r^2 dr ∫_0^1 dz = 2π/3
        let g = GridSpec::new(1.0, 0.0, 1.0, 64, 64).unwrap();
        let f = ScalarField::from_fn(g, Role::OmegaTheta, |r, _| r);
        let exact = 2.0 * PI / 3.0;
        assert!(((cylindrical_integral(&f) - exact) / exact).abs() <= 1e-3);
    }

    #[test]
    fn from_values_checks() {
        let g = unit_grid(4, 4);
        assert!(matches!(
            ScalarField::from_values(g, Role::OmegaTheta, vec![0.0; 15]),
            Err(Error::ShapeMismatch { .. })
        ));
        let mut v = vec![0.0; 16];
        v[5] = f64::NAN;
        assert!(matches!(
            ScalarField::from_values(g, Role::OmegaTheta, v),
            Err(Error::NonFinite { i: 1, j: 1 })
        ));
    }

    #[test]
    fn role_names_round_trip() {
        for role in [
            Role::OmegaTheta,
            Role::QOmegaOverR,
            Role::RadialVelocity,
            Role::AxialVelocity,
            Role::Derived(Some(Parity::Odd)),
            Role::Derived(Some(Parity::Even)),
            Role::Derived(None),
        ] {
            assert_eq!(role.as_str().parse::<Role>().unwrap(), role);
        }
        assert!("vorticity".parse::<Role>().is_err());
    }

    #[test]
    fn outer_band() {
        let g = GridSpec::new(2.0, -2.0, 2.0, 16, 32).unwrap();
        let inner = ScalarField::from_fn(g, Role::QOmegaOverR, |r, z| {
            if (r - 0.5).abs() < 0.3 && z.abs() < 0.3 {
                1.0
            } else {
                0.0
            }
        });
        assert_eq!(outer_band_fraction(&inner), 0.0);
        let edge = ScalarField::from_fn(g, Role::QOmegaOverR, |r, _| if r > 1.8 { 1.0 } else { 0.0 });
        assert_eq!(outer_band_fraction(&edge), 1.0);
    }
}
