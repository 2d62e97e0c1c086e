//! Velocity reconstruction from the azimuthal vorticity.
//!
//! For a target node `X = (r, 0, z)` the velocity is the θ′-quadrature of the
//! cylindrical Biot-Savart kernels over every source cell:
//!
//! ```text
//! u^r(r,z) =  1/4π Σ w_k cosθ'_k (z - z') / D³ · ω(r',z') r' dr dz
//! u^z(r,z) =  1/4π Σ w_k (r' - r cosθ'_k) / D³ · ω(r',z') r' dr dz
//! D² = r² + r'² - 2 r r' cosθ' + (z - z')²
//! ```
//!
//! Quadrature points with `D` below half the cell diagonal are skipped. The grid is
//! uniform in `z`, so the θ′-summed kernel only depends on `(i, i', j - j')`; it is
//! tabulated once and the `z` sums are evaluated as FFT convolutions. This is the same
//! discrete sum as the literal triple loop in [`velocity_from_vorticity_direct`].

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Parity, Role, ScalarField, VelocityField};

/// Periodic trapezoid rule in θ′ on `[0, 2π)`.
///
/// Nodes sit at `(k + 1/2) 2π / n`, so the coplanar point `θ′ = 0` (where the
/// self-cell distance vanishes) is never sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    n_theta: usize,
    theta: Vec<f64>,
    weights: Vec<f64>,
}

impl KernelTable {
    pub fn new(n_theta: usize) -> Result<Self> {
        if n_theta < 16 || !n_theta.is_multiple_of(2) {
            return Err(Error::InvalidQuadrature(format!(
                "n_theta must be even and >= 16, got {n_theta}"
            )));
        }
        let h = 2.0 * PI / n_theta as f64;
        Ok(Self {
            n_theta,
            theta: (0..n_theta).map(|k| (k as f64 + 0.5) * h).collect(),
            weights: vec![h; n_theta],
        })
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `(cos θ′, weight)` over the half-period `(0, π)`, weights doubled.
    /// Every integrand here is even in θ′.
    fn half_nodes(&self) -> Vec<(f64, f64)> {
        (0..self.n_theta / 2).map(|k| (self.theta[k].cos(), 2.0 * self.weights[k])).collect()
    }
}

/// θ′-summed kernel for each `(i, i', Δj >= 0)`, including the source cell
/// weight `r' dr dz`.
struct RingTable {
    n_r: usize,
    n_z: usize,
    data: Vec<f64>,
    /// Behaviour under `Δz -> -Δz`.
    parity: Parity,
}

impl RingTable {
    fn build<K>(grid: &GridSpec, kt: &KernelTable, parity: Parity, kernel: K) -> Self
    where
        K: Fn(f64, f64, f64, f64, f64) -> f64 + Sync,
    {
        let (n_r, n_z) = (grid.n_r(), grid.n_z());
        let nodes = kt.half_nodes();
        let cutoff = grid.half_diagonal();
        let cell = grid.dr() * grid.dz();
        let mut data = vec![0.0; n_r * n_r * n_z];
        data.par_chunks_mut(n_r * n_z).enumerate().for_each(|(i, block)| {
            let r = grid.r(i);
            for ip in 0..n_r {
                let rp = grid.r(ip);
                let base = r * r + rp * rp;
                let two_rrp = 2.0 * r * rp;
                for m in 0..n_z {
                    let dz = m as f64 * grid.dz();
                    let dz2 = dz * dz;
                    let mut acc = 0.0;
                    for &(c, w) in &nodes {
                        let d2 = base - two_rrp * c + dz2;
                        let d = d2.sqrt();
                        if d < cutoff {
                            continue;
                        }
                        acc += w * kernel(r, rp, c, dz, d);
                    }
                    block[ip * n_z + m] = acc * rp * cell;
                }
            }
        });
        Self { n_r, n_z, data, parity }
    }

    #[inline]
    fn get(&self, i: usize, ip: usize, dj: isize) -> f64 {
        let m = dj.unsigned_abs();
        let v = self.data[(i * self.n_r + ip) * self.n_z + m];
        if dj < 0 {
            self.parity.sign() * v
        } else {
            v
        }
    }
}

/// Applies a pair of real `(i, i', j - j')` kernels to a real source field through
/// one complex FFT convolution per radial pair: the first kernel lands in the real
/// part, the second in the imaginary part.
struct ZConvolver {
    n_r: usize,
    n_z: usize,
    len: usize,
    spectra: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl ZConvolver {
    fn new(re: &RingTable, im: Option<&RingTable>) -> Self {
        let (n_r, n_z) = (re.n_r, re.n_z);
        let len = 2 * n_z;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut spectra = vec![Complex64::new(0.0, 0.0); n_r * n_r * len];
        spectra.par_chunks_mut(len).enumerate().for_each(|(pair, buf)| {
            let (i, ip) = (pair / n_r, pair % n_r);
            let at = |dj: isize| {
                Complex64::new(re.get(i, ip, dj), im.map_or(0.0, |t| t.get(i, ip, dj)))
            };
            for (m, b) in buf[..n_z].iter_mut().enumerate() {
                *b = at(m as isize);
            }
            buf[n_z] = Complex64::new(0.0, 0.0);
            for m in 1..n_z {
                buf[len - m] = at(-(m as isize));
            }
            forward.process(buf);
        });
        Self { n_r, n_z, len, spectra, forward, inverse }
    }

    fn apply(&self, source: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (n_r, n_z, len) = (self.n_r, self.n_z, self.len);
        let mut src = vec![Complex64::new(0.0, 0.0); n_r * len];
        src.par_chunks_mut(len).enumerate().for_each(|(ip, buf)| {
            for j in 0..n_z {
                buf[j] = Complex64::new(source[ip * n_z + j], 0.0);
            }
            self.forward.process(buf);
        });
        let scale = 1.0 / len as f64;
        let rows: Vec<Vec<Complex64>> = (0..n_r)
            .into_par_iter()
            .map(|i| {
                let mut acc = vec![Complex64::new(0.0, 0.0); len];
                for ip in 0..n_r {
                    let k = &self.spectra[(i * n_r + ip) * len..(i * n_r + ip + 1) * len];
                    let s = &src[ip * len..(ip + 1) * len];
                    for ((a, kk), ss) in acc.iter_mut().zip(k).zip(s) {
                        *a += kk * ss;
                    }
                }
                self.inverse.process(&mut acc);
                acc.truncate(n_z);
                acc
            })
            .collect();
        let mut re = Vec::with_capacity(n_r * n_z);
        let mut im = Vec::with_capacity(n_r * n_z);
        for row in rows {
            for c in row {
                re.push(c.re * scale);
                im.push(c.im * scale);
            }
        }
        (re, im)
    }
}

fn ur_kernel(_r: f64, _rp: f64, c: f64, dz: f64, d: f64) -> f64 {
    c * dz / (4.0 * PI * d * d * d)
}

fn uz_kernel(r: f64, rp: f64, c: f64, _dz: f64, d: f64) -> f64 {
    (rp - r * c) / (4.0 * PI * d * d * d)
}

/// Reusable velocity operator for one grid and quadrature.
pub struct BiotSavart {
    grid: GridSpec,
    n_theta: usize,
    conv: ZConvolver,
}

impl BiotSavart {
    pub fn new(grid: GridSpec, kt: &KernelTable) -> Self {
        let ur = RingTable::build(&grid, kt, Parity::Odd, ur_kernel);
        let uz = RingTable::build(&grid, kt, Parity::Even, uz_kernel);
        Self { grid, n_theta: kt.n_theta(), conv: ZConvolver::new(&ur, Some(&uz)) }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn velocity(&self, omega: &ScalarField) -> Result<VelocityField> {
        check_omega(omega)?;
        if *omega.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let (ur, uz) = self.conv.apply(omega.values());
        VelocityField::new(
            ScalarField::from_values(self.grid, Role::RadialVelocity, ur)?,
            ScalarField::from_values(self.grid, Role::AxialVelocity, uz)?,
        )
    }
}

fn check_omega(omega: &ScalarField) -> Result<()> {
    if omega.role() != Role::OmegaTheta {
        return Err(Error::WrongRole { expected: "omega_theta", actual: omega.role().to_string() });
    }
    if !omega.is_finite() {
        return Err(Error::NonFinite { i: 0, j: 0 });
    }
    Ok(())
}

/// One-shot reconstruction of `(u^r, u^z)` from `ω^θ`.
pub fn velocity_from_vorticity(omega: &ScalarField, kt: &KernelTable) -> Result<VelocityField> {
    check_omega(omega)?;
    BiotSavart::new(*omega.grid(), kt).velocity(omega)
}

/// Literal `O(N² n_theta)` triple sum over source cells and θ′ nodes.
/// Reference path for small grids.
pub fn velocity_from_vorticity_direct(
    omega: &ScalarField,
    kt: &KernelTable,
) -> Result<VelocityField> {
    check_omega(omega)?;
    let g = *omega.grid();
    let cutoff = g.half_diagonal();
    let cell = g.dr() * g.dz();
    let mut ur = vec![0.0; g.len()];
    let mut uz = vec![0.0; g.len()];
    for i in 0..g.n_r() {
        let r = g.r(i);
        for j in 0..g.n_z() {
            let z = g.z(j);
            let (mut sr, mut sz) = (0.0, 0.0);
            for ip in 0..g.n_r() {
                let rp = g.r(ip);
                for jp in 0..g.n_z() {
                    let w = omega.get(ip, jp);
                    let dz = z - g.z(jp);
                    for (th, wk) in kt.theta().iter().zip(kt.weights()) {
                        let c = th.cos();
                        let d = (r * r + rp * rp - 2.0 * r * rp * c + dz * dz).sqrt();
                        if d < cutoff {
                            continue;
                        }
                        let f = wk * w * rp * cell;
                        sr += f * ur_kernel(r, rp, c, dz, d);
                        sz += f * uz_kernel(r, rp, c, dz, d);
                    }
                }
            }
            ur[g.idx(i, j)] = sr;
            uz[g.idx(i, j)] = sz;
        }
    }
    VelocityField::new(
        ScalarField::from_values(g, Role::RadialVelocity, ur)?,
        ScalarField::from_values(g, Role::AxialVelocity, uz)?,
    )
}

/// Pointwise `u^r / r`; finite because no node lies on the axis.
pub fn ur_over_r(u: &VelocityField) -> ScalarField {
    let g = *u.grid();
    let mut out = u.u_r.clone().with_role(Role::Derived(Some(Parity::Even)));
    for i in 0..g.n_r() {
        let inv_r = 1.0 / g.r(i);
        for j in 0..g.n_z() {
            let k = g.idx(i, j);
            out.values_mut()[k] = u.u_r.values()[k] * inv_r;
        }
    }
    out
}

/// Radial kernel of a majorant convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MajorantPower {
    /// `1 / |X|`
    One,
    /// `1 / |X|²`
    Two,
}

/// `Σ w_k |g(r',z')| r' dr dz / D^power` at every node: the convolution of `|g|`
/// with `|X|^{-power}` on the same quadrature and cutoff as the velocity.
pub fn majorant_field(g: &ScalarField, power: MajorantPower, kt: &KernelTable) -> ScalarField {
    let grid = *g.grid();
    let table = match power {
        MajorantPower::One => RingTable::build(&grid, kt, Parity::Even, |_, _, _, _, d| 1.0 / d),
        MajorantPower::Two => {
            RingTable::build(&grid, kt, Parity::Even, |_, _, _, _, d| 1.0 / (d * d))
        }
    };
    let conv = ZConvolver::new(&table, None);
    let abs: Vec<f64> = g.values().iter().map(|v| v.abs()).collect();
    let (vals, _) = conv.apply(&abs);
    // a positive kernel on a nonnegative source; strip FFT round-off below zero
    let vals = vals.into_iter().map(|v| v.max(0.0)).collect();
    ScalarField::from_values(grid, Role::Derived(Some(Parity::Even)), vals)
        .expect("majorant of a finite field is finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ddr, ddz, divergence};
    use crate::norms::lebesgue_norm;

    fn ring(g: GridSpec) -> ScalarField {
        ScalarField::from_fn(g, Role::OmegaTheta, |r, z| {
            r * (-((r - 0.5).powi(2) + z * z) / 0.15f64.powi(2)).exp()
        })
    }

    fn vel_l2(u: &VelocityField) -> f64 {
        lebesgue_norm(&u.u_r, 2.0).unwrap().hypot(lebesgue_norm(&u.u_z, 2.0).unwrap())
    }

    #[test]
    fn quadrature_validation() {
        assert!(KernelTable::new(8).is_err());
        assert!(KernelTable::new(17).is_err());
        let kt = KernelTable::new(16).unwrap();
        let s: f64 = kt.weights().iter().sum();
        assert!((s - 2.0 * PI).abs() < 1e-14);
        assert!(kt.theta().iter().all(|&t| (0.0..2.0 * PI).contains(&t)));
    }

    #[test]
    fn zero_vorticity_gives_zero_velocity() {
        let g = GridSpec::new(2.0, -2.0, 2.0, 8, 16).unwrap();
        let kt = KernelTable::new(16).unwrap();
        let u = velocity_from_vorticity(&ScalarField::zeros(g, Role::OmegaTheta), &kt).unwrap();
        assert_eq!(u.u_r.max_abs(), 0.0);
        assert_eq!(u.u_z.max_abs(), 0.0);
    }

    #[test]
    fn rejects_wrong_role() {
        let g = GridSpec::new(2.0, -2.0, 2.0, 8, 16).unwrap();
        let kt = KernelTable::new(16).unwrap();
        let q = ScalarField::zeros(g, Role::QOmegaOverR);
        assert!(matches!(velocity_from_vorticity(&q, &kt), Err(Error::WrongRole { .. })));
    }

    #[test]
    fn fft_path_matches_direct_sum() {
        let g = GridSpec::new(2.0, -2.0, 2.0, 10, 20).unwrap();
        let kt = KernelTable::new(16).unwrap();
        let w = ScalarField::from_fn(g, Role::OmegaTheta, |r, z| {
            r * (-((r - 0.6).powi(2) + (z - 0.3).powi(2)) / 0.1).exp() * (1.0 + z)
        });
        let fast = velocity_from_vorticity(&w, &kt).unwrap();
        let slow = velocity_from_vorticity_direct(&w, &kt).unwrap();
        let scale = slow.u_r.max_abs().max(slow.u_z.max_abs());
        for (a, b) in fast.u_r.values().iter().zip(slow.u_r.values()) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
        for (a, b) in fast.u_z.values().iter().zip(slow.u_z.values()) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn parity_about_center_plane() {
        let g = GridSpec::new(2.0, -2.0, 2.0, 16, 32).unwrap();
        let kt = KernelTable::new(32).unwrap();
        let u = velocity_from_vorticity(&ring(g), &kt).unwrap();
        let n = g.n_z();
        let scale = u.u_r.max_abs().max(u.u_z.max_abs());
        for i in 0..g.n_r() {
            for j in 0..n / 2 {
                let m = n - 1 - j;
                assert!((u.u_r.get(i, j) + u.u_r.get(i, m)).abs() < 1e-12 * scale);
                assert!((u.u_z.get(i, j) - u.u_z.get(i, m)).abs() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn linear_in_vorticity() {
        let g = GridSpec::new(2.0, -2.0, 2.0, 12, 24).unwrap();
        let bs = BiotSavart::new(g, &KernelTable::new(16).unwrap());
        let w1 = ring(g);
        let w2 = ScalarField::from_fn(g, Role::OmegaTheta, |r, z| r * (-(r * r + (z - 0.4).powi(2)) * 4.0).exp());
        let (a, b) = (1.7, -0.6);
        let u = bs.velocity(&w1.combine(a, &w2, b).unwrap()).unwrap();
        let u1 = bs.velocity(&w1).unwrap();
        let u2 = bs.velocity(&w2).unwrap();
        let expect_r = u1.u_r.combine(a, &u2.u_r, b).unwrap();
        let scale = u.u_r.max_abs() + u.u_z.max_abs();
        for (x, y) in u.u_r.values().iter().zip(expect_r.values()) {
            assert!((x - y).abs() < 1e-13 * scale);
        }
    }

    #[test]
    fn curl_and_divergence_consistency() {
        // coarse version of the acceptance check
        let errs = |n_r: usize, n_theta: usize| {
            let g = GridSpec::new(2.0, -2.0, 2.0, n_r, 2 * n_r).unwrap();
            let w = ring(g);
            let u = velocity_from_vorticity(&w, &KernelTable::new(n_theta).unwrap()).unwrap();
            let curl = ddz(&u.u_r).combine(1.0, &ddr(&u.u_z).unwrap(), -1.0).unwrap();
            let curl_err = lebesgue_norm(&curl.combine(1.0, &w.clone().with_role(curl.role()), -1.0).unwrap(), 2.0)
                .unwrap()
                / lebesgue_norm(&w, 2.0).unwrap();
            let div_err = lebesgue_norm(&divergence(&u).unwrap(), 2.0).unwrap() / vel_l2(&u);
            (curl_err, div_err)
        };
        let (c1, d1) = errs(24, 32);
        let (c2, d2) = errs(48, 64);
        assert!(c2 < 0.1 && d2 < 0.1, "curl {c2} div {d2}");
        assert!(c1 / c2 > 1.5 && d1 / d2 > 1.5, "curl {c1}->{c2}, div {d1}->{d2}");
    }

    #[test]
    fn axis_value_shrinks() {
        let first = |n_r: usize| {
            let g = GridSpec::new(2.0, -2.0, 2.0, n_r, 2 * n_r).unwrap();
            let u = velocity_from_vorticity(&ring(g), &KernelTable::new(32).unwrap()).unwrap();
            (0..g.n_z()).map(|j| u.u_r.get(0, j).abs()).fold(0.0, f64::max)
        };
        let (a, b) = (first(16), first(32));
        assert!(b < 0.75 * a, "{a} -> {b}");
    }

    #[test]
    fn theta_refinement_converges() {
        let g = GridSpec::new(2.0, -2.0, 2.0, 12, 24).unwrap();
        let w = ScalarField::from_fn(g, Role::OmegaTheta, |r, z| r * (-((r - 0.7).powi(2) + z * z) / 0.2).exp());
        let us: Vec<_> = [16, 32, 64, 128]
            .iter()
            .map(|&n| velocity_from_vorticity(&w, &KernelTable::new(n).unwrap()).unwrap())
            .collect();
        let diffs: Vec<f64> = us
            .windows(2)
            .map(|p| {
                vel_l2(&VelocityField::new(
                    p[1].u_r.combine(1.0, &p[0].u_r, -1.0).unwrap(),
                    p[1].u_z.combine(1.0, &p[0].u_z, -1.0).unwrap(),
                )
                .unwrap())
            })
            .collect();
        assert!(diffs.windows(2).all(|d| d[1] < d[0]), "{diffs:?}");
    }

    #[test]
    fn ur_over_r_algebra() {
        let g = GridSpec::new(1.0, -1.0, 1.0, 6, 6).unwrap();
        let u = VelocityField::new(
            ScalarField::from_fn(g, Role::RadialVelocity, |r, z| r * z.sin()),
            ScalarField::zeros(g, Role::AxialVelocity),
        )
        .unwrap();
        let q = ur_over_r(&u);
        for i in 0..6 {
            for j in 0..6 {
                assert!((q.get(i, j) - g.z(j).sin()).abs() < 1e-15);
            }
        }
        assert_eq!(ur_over_r(&VelocityField::zeros(g)).max_abs(), 0.0);
    }

    #[test]
    fn majorant_single_cell() {
        let g = GridSpec::new(1.0, -1.0, 1.0, 8, 8).unwrap();
        let kt = KernelTable::new(16).unwrap();
        let mut src = ScalarField::zeros(g, Role::Derived(Some(Parity::Even)));
        src.set(3, 4, -2.0);
        assert_eq!(majorant_field(&ScalarField::zeros(g, Role::QOmegaOverR), MajorantPower::One, &kt).max_abs(), 0.0);
        for power in [MajorantPower::One, MajorantPower::Two] {
            let m = majorant_field(&src, power, &kt);
            for (i, j) in [(0, 0), (3, 5), (7, 2)] {
                let (r, z, rp, zp) = (g.r(i), g.z(j), g.r(3), g.z(4));
                let mut expect = 0.0;
                for (th, w) in kt.theta().iter().zip(kt.weights()) {
                    let d = (r * r + rp * rp - 2.0 * r * rp * th.cos() + (z - zp).powi(2)).sqrt();
                    if d < g.half_diagonal() {
                        continue;
                    }
                    let k = match power {
                        MajorantPower::One => 1.0 / d,
                        MajorantPower::Two => 1.0 / (d * d),
                    };
                    expect += w * 2.0 * rp * g.dr() * g.dz() * k;
                }
                assert!((m.get(i, j) - expect).abs() < 1e-12 * expect, "{i},{j}");
            }
        }
    }

    #[test]
    fn majorant_is_monotone() {
        let g = GridSpec::new(1.0, -1.0, 1.0, 8, 8).unwrap();
        let kt = KernelTable::new(16).unwrap();
        let big = ScalarField::from_fn(g, Role::QOmegaOverR, |r, z| 1.0 + (r * z).cos());
        let small = big.map(big.role(), |v| 0.5 * v * v.sin().abs());
        let (mb, ms) = (
            majorant_field(&big, MajorantPower::One, &kt),
            majorant_field(&small, MajorantPower::One, &kt),
        );
        for (a, b) in ms.values().iter().zip(mb.values()) {
            assert!(a <= &(b * (1.0 + 1e-12)));
        }
    }
}
