//! Lebesgue, Lorentz `L^{p,q}` and anisotropic mixed norms of grid fields.
//!
//! The Lorentz norms are computed from the decreasing rearrangement `f*` of `|f|`
//! with respect to the cylindrical cell measure. On a grid `f*` is a right-continuous
//! step function, so every `dt / t` integral is done in closed form on each step.

use crate::error::{Error, Result};
use crate::grid::ScalarField;

/// Exponent pair `(p, q)` of a Lorentz space. `f64::INFINITY` stands for `∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzIndex {
    p: f64,
    q: f64,
}

impl LorentzIndex {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if p.is_nan() || q.is_nan() || q < 1.0 {
            return Err(Error::InvalidExponent(format!("(p, q) = ({p}, {q})")));
        }
        let ok = p > 1.0 || (p == 1.0 && q == 1.0);
        if !ok {
            return Err(Error::InvalidExponent(format!(
                "need p > 1, or p = q = 1; got (p, q) = ({p}, {q})"
            )));
        }
        Ok(Self { p, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn q(&self) -> f64 {
        self.q
    }
}

fn check_lebesgue_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(format!("p = {p}, need p in [1, inf]")));
    }
    Ok(())
}

/// Discrete decreasing rearrangement.
///
/// `values[k]` is the height of `f*` on `[cumulative[k-1], cumulative[k])`.
/// Every nonzero cell gets its own step (ties kept in grid order); all zero cells
/// are lumped into one final step of height 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RearrangementProfile {
    values: Vec<f64>,
    measures: Vec<f64>,
    cumulative: Vec<f64>,
}

pub fn rearrange(f: &ScalarField) -> RearrangementProfile {
    let g = f.grid();
    let n_z = g.n_z();
    let abs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    let mut order: Vec<usize> = (0..abs.len()).filter(|&k| abs[k] > 0.0).collect();
    // stable: equal values stay in grid-index order
    order.sort_by(|&a, &b| abs[b].total_cmp(&abs[a]));

    let mut values = Vec::with_capacity(order.len() + 1);
    let mut measures = Vec::with_capacity(order.len() + 1);
    for &k in &order {
        values.push(abs[k]);
        measures.push(g.cell_measure(k / n_z));
    }
    let zero_measure: f64 = (0..abs.len())
        .filter(|&k| abs[k] == 0.0)
        .map(|k| g.cell_measure(k / n_z))
        .sum();
    if zero_measure > 0.0 {
        values.push(0.0);
        measures.push(zero_measure);
    }
    let mut acc = 0.0;
    let cumulative = measures
        .iter()
        .map(|m| {
            acc += m;
            acc
        })
        .collect();
    RearrangementProfile { values, measures, cumulative }
}

impl RearrangementProfile {
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn measures(&self) -> &[f64] {
        &self.measures
    }
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn total_measure(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// `f*(t)`; zero beyond the truncated domain.
    pub fn value_at(&self, t: f64) -> f64 {
        let k = self.cumulative.partition_point(|&c| c <= t);
        self.values.get(k).copied().unwrap_or(0.0)
    }

    /// `∫ Φ(|f|) dμ` evaluated on the rearranged side.
    pub fn integrate(&self, phi: impl Fn(f64) -> f64) -> f64 {
        self.values.iter().zip(&self.measures).map(|(&v, &m)| phi(v) * m).sum()
    }

    pub fn lebesgue(&self, p: f64) -> Result<f64> {
        check_lebesgue_exponent(p)?;
        if p.is_infinite() {
            return Ok(self.values.first().copied().unwrap_or(0.0));
        }
        Ok(self.integrate(|v| v.powf(p)).powf(1.0 / p))
    }

    pub fn lorentz(&self, idx: LorentzIndex) -> Result<f64> {
        let (p, q) = (idx.p, idx.q);
        if q.is_infinite() {
            // sup of t^{1/p} f*(t) over each step is reached at its right end
            let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
            return Ok(self
                .values
                .iter()
                .zip(&self.cumulative)
                .fold(0.0_f64, |m, (&v, &c)| m.max(c.powf(inv_p) * v)));
        }
        if p.is_infinite() {
            return Err(Error::InvalidExponent("L^{inf,q} with q < inf is not supported".into()));
        }
        // ∫_{a}^{b} t^{q/p - 1} dt = (p/q) (b^{q/p} - a^{q/p})
        let a = q / p;
        let mut sum = 0.0;
        let mut prev = 0.0_f64;
        for (&v, &c) in self.values.iter().zip(&self.cumulative) {
            if v > 0.0 {
                let m = c - prev;
                let span = if prev > 0.0 {
                    prev.powf(a) * (a * (m / prev).ln_1p()).exp_m1()
                } else {
                    c.powf(a)
                };
                sum += v.powf(q) * span;
            }
            prev = c;
        }
        Ok(((p / q) * sum).powf(1.0 / q))
    }
}

/// `(∫ |f|^p dμ)^{1/p}` by direct summation over cells, or `max |f|` for `p = ∞`.
pub fn lebesgue_norm(f: &ScalarField, p: f64) -> Result<f64> {
    check_lebesgue_exponent(p)?;
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let g = f.grid();
    let mut total = 0.0;
    for i in 0..g.n_r() {
        let row: f64 = f.row(i).iter().map(|v| v.abs().powf(p)).sum();
        total += row * g.cell_measure(i);
    }
    Ok(total.powf(1.0 / p))
}

pub fn lorentz_norm(f: &ScalarField, idx: LorentzIndex) -> Result<f64> {
    rearrange(f).lorentz(idx)
}

/// `‖ ‖f(r, ·)‖_{L^{p_v}(dz)} ‖_{L^{p_h}(2π r dr)}`.
pub fn mixed_norm(f: &ScalarField, p_h: f64, p_v: f64) -> Result<f64> {
    check_lebesgue_exponent(p_h)?;
    check_lebesgue_exponent(p_v)?;
    let g = f.grid();
    let inner: Vec<f64> = (0..g.n_r())
        .map(|i| {
            let row = f.row(i);
            if p_v.is_infinite() {
                row.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
            } else {
                (row.iter().map(|v| v.abs().powf(p_v)).sum::<f64>() * g.dz()).powf(1.0 / p_v)
            }
        })
        .collect();
    if p_h.is_infinite() {
        return Ok(inner.iter().fold(0.0_f64, |m, &v| m.max(v)));
    }
    let horiz = |i: usize| 2.0 * std::f64::consts::PI * g.r(i) * g.dr();
    let total: f64 = inner.iter().enumerate().map(|(i, v)| v.powf(p_h) * horiz(i)).sum();
    Ok(total.powf(1.0 / p_h))
}
