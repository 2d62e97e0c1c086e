//! Thomas algorithm for tridiagonal systems.

/// Solves `a[i] x[i-1] + b[i] x[i] + c[i] x[i+1] = d[i]` in place of `d`.
///
/// `a[0]` and `c[n-1]` are ignored. No pivoting: the matrix must be diagonally
/// dominant, which holds for every implicit diffusion operator built here.
pub fn solve_in_place(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64], scratch: &mut Vec<f64>) {
    let n = d.len();
    assert!(n > 0 && a.len() == n && b.len() == n && c.len() == n);
    scratch.clear();
    scratch.resize(n, 0.0);
    let cp = scratch;

    cp[0] = c[0] / b[0];
    d[0] /= b[0];
    for i in 1..n {
        let den = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / den;
        d[i] = (d[i] - a[i] * d[i - 1]) / den;
    }
    for i in (0..n - 1).rev() {
        d[i] -= cp[i] * d[i + 1];
    }
}

/// Ghost value used beyond either end of a diffusion line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wall {
    /// Mirrored ghost: no flux through the wall, the line sum is conserved.
    ZeroFlux,
    /// Zero ghost: the field is continued by zero, mass leaves through the wall.
    ZeroExtension,
}

/// Backward-Euler step of `∂_t x = λ/dt · (x_{j-1} - 2 x_j + x_{j+1})`, i.e. solves
/// `(I - λ D) x_new = x` with the given ghost rule at both ends.
pub struct ImplicitDiffusion {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    scratch: Vec<f64>,
}

impl ImplicitDiffusion {
    pub fn new(n: usize, lambda: f64, wall: Wall) -> Self {
        assert!(n >= 2);
        let mut a = vec![-lambda; n];
        let mut b = vec![1.0 + 2.0 * lambda; n];
        let mut c = vec![-lambda; n];
        a[0] = 0.0;
        c[n - 1] = 0.0;
        if wall == Wall::ZeroFlux {
            b[0] = 1.0 + lambda;
            b[n - 1] = 1.0 + lambda;
        }
        Self { a, b, c, scratch: Vec::with_capacity(n) }
    }

    pub fn solve(&mut self, x: &mut [f64]) {
        solve_in_place(&self.a, &self.b, &self.c, x, &mut self.scratch);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // [2 1 0; 1 3 1; 0 1 2] x = [3 5 3] -> x = [1 1 1]
        let a = [0.0, 1.0, 1.0];
        let b = [2.0, 3.0, 2.0];
        let c = [1.0, 1.0, 0.0];
        let mut d = [3.0, 5.0, 3.0];
        solve_in_place(&a, &b, &c, &mut d, &mut Vec::new());
        for x in d {
            assert!((x - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn diffusion_conserves_sum_and_bounds() {
        let mut op = ImplicitDiffusion::new(7, 2.5, Wall::ZeroFlux);
        let mut x = vec![0.0, 1.0, 4.0, -2.0, 0.5, 3.0, 0.0];
        let (sum0, max0, min0) = (
            x.iter().sum::<f64>(),
            x.iter().cloned().fold(f64::MIN, f64::max),
            x.iter().cloned().fold(f64::MAX, f64::min),
        );
        op.solve(&mut x);
        assert!((x.iter().sum::<f64>() - sum0).abs() < 1e-13);
        assert!(x.iter().all(|&v| v <= max0 && v >= min0));
    }

    #[test]
    fn constant_is_stationary() {
        let mut op = ImplicitDiffusion::new(5, 10.0, Wall::ZeroFlux);
        let mut x = vec![2.0; 5];
        op.solve(&mut x);
        assert!(x.iter().all(|v| (v - 2.0).abs() < 1e-14));
    }

    #[test]
    fn zero_extension_loses_mass_and_stays_positive() {
        let mut op = ImplicitDiffusion::new(6, 1.0, Wall::ZeroExtension);
        let mut x = vec![1.0; 6];
        op.solve(&mut x);
        assert!(x.iter().sum::<f64>() < 6.0);
        assert!(x.iter().all(|&v| v > 0.0 && v < 1.0));
        // symmetric input, symmetric output
        for j in 0..3 {
            assert!((x[j] - x[5 - j]).abs() < 1e-15);
        }
    }
}
