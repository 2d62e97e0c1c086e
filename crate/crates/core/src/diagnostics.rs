//! Discrete a priori estimates.
//!
//! Every output time produces one [`DiagnosticsRecord`]. Inequalities with an
//! explicit constant are asserted (energy, Gronwall growth of `‖ω‖_{L^p}`,
//! maximum principle for `q`, the `L^p` chain-rule lemma); the ones stated only
//! up to a constant are reported as ratios and checked for boundedness.
//!
//! CSV columns, in order:
//!
//! | column | quantity |
//! |---|---|
//! | `t`, `step` | time, step counter |
//! | `q_l32_1`, `q_l65`, `q_l65_1`, `q_l32`, `q_l2`, `q_linf` | `‖q‖` in `L^{3/2,1}`, `L^{6/5}`, `L^{6/5,1}`, `L^{3/2}`, `L²`, `L^∞` |
//! | `sup_q_window` | largest `sup|q|` over the steps since the previous row |
//! | `w_l32_1`, `w_l31`, `w_l65`, `w_l32`, `w_l2` | `‖ω‖` in `L^{3/2,1}`, `L^{3,1}`, `L^{6/5}`, `L^{3/2}`, `L²` |
//! | `dzw_l32_1`, `dzw_l2` | `‖∂_z ω‖` in `L^{3/2,1}`, `L²` |
//! | `dzq_l32_1`, `dzq_l43_1`, `dzq_l2` | `‖∂_z q‖` in `L^{3/2,1}`, `L^{4/3,1}`, `L²` |
//! | `drw_l32_1` | `‖∂_r ω‖_{L^{3/2,1}}` |
//! | `sup_ur_over_r`, `int_ur_over_r` | `sup|u^r/r|` and its running time integral |
//! | `dzu_sq`, `int_2dzu_sq` | `‖∂_z u‖²_{L²}` and `2∫₀ᵗ‖∂_z u‖²` |
//! | `energy` | `‖u‖²_{L²}` |
//! | `sup_u`, `sup_ur`, `mixed_ur_over_r` | `sup|u|`, `sup|u^r|`, `‖u^r/r‖_{L^∞_h(L^4_v)}` |
//! | `hardy_65`, `hardy_32` | `‖ω/r‖_{L^p} / ‖∂_r ω‖_{L^p}` |
//! | `energy_ratio` | `(‖u‖² + 2∫‖∂_z u‖²) / ‖u₀‖²` |
//! | `growth_65`, `growth_32`, `growth_2` | `‖ω‖_{L^p} / (‖ω₀‖_{L^p} e^{∫ sup|u^r/r|})` |
//! | `growth_lorentz_32_1` | same with `L^{3/2,1}` |
//! | `sqrt_t_rho` | `∫ sup|u^r/r| / (√t ‖q₀‖_{L^{3/2,1}})` |
//! | `biot_u_w31`, `biot_ur_dzw`, `biot_urr_dzq`, `biot_mixed` | `sup|u| / ‖ω‖_{L^{3,1}}`, `sup|u^r| / ‖∂_z ω‖_{L^{3/2,1}}`, `sup|u^r/r| / ‖∂_z q‖_{L^{3/2,1}}`, `‖u^r/r‖_{L^∞_h(L^4_v)} / ‖∂_z q‖_{L^{4/3,1}}` |
//!
//! Floats are written with 17 significant digits; an undefined ratio (zero
//! denominator, or `t = 0` for `sqrt_t_rho`) is an empty field.

use std::io::{Read, Write};

use crate::biot_savart::ur_over_r;
use crate::error::{Error, Result};
use crate::evolution::SimState;
use crate::grid::{cylindrical_integral, ddr, ddz, Parity, Role, ScalarField};
use crate::norms::{lebesgue_norm, mixed_norm, rearrange, LorentzIndex};

pub const ENERGY_TOLERANCE: f64 = 0.02;
pub const GROWTH_TOLERANCE: f64 = 0.05;
pub const LEMMA_TOLERANCE: f64 = 0.05;
pub const NORM_MONOTONICITY_TOLERANCE: f64 = 1e-3;
pub const SUP_TOLERANCE: f64 = 1e-12;
/// `ρ(t)` may grow to this multiple of its value at the start of the window.
pub const SQRT_T_BOUND: f64 = 10.0;

trait Cell: Sized {
    fn format(&self) -> String;
    fn parse(s: &str) -> std::result::Result<Self, String>;
}

fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"))
}

impl Cell for f64 {
    fn format(&self) -> String {
        format_f64(*self)
    }
    fn parse(s: &str) -> std::result::Result<Self, String> {
        parse_f64(s)
    }
}

impl Cell for Option<f64> {
    fn format(&self) -> String {
        self.map(format_f64).unwrap_or_default()
    }
    fn parse(s: &str) -> std::result::Result<Self, String> {
        if s.trim().is_empty() {
            Ok(None)
        } else {
            parse_f64(s).map(Some)
        }
    }
}

macro_rules! record {
    ($($field:ident : $ty:ty),* $(,)?) => {
        /// One row of the diagnostics CSV (see the module docs for the columns).
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct DiagnosticsRecord {
            pub t: f64,
            pub step: u64,
            $(pub $field: $ty,)*
        }

        pub const COLUMNS: &[&str] = &["t", "step", $(stringify!($field),)*];

        impl DiagnosticsRecord {
            fn cells(&self) -> Vec<String> {
                vec![format_f64(self.t), self.step.to_string(), $(Cell::format(&self.$field),)*]
            }

            fn from_cells(cells: &[&str]) -> std::result::Result<Self, String> {
                if cells.len() != COLUMNS.len() {
                    return Err(format!("expected {} fields, got {}", COLUMNS.len(), cells.len()));
                }
                let mut it = cells.iter();
                let t = parse_f64(it.next().unwrap())?;
                let step = it.next().unwrap().trim().parse::<u64>().map_err(|e| format!("step: {e}"))?;
                $(let $field = <$ty as Cell>::parse(it.next().unwrap())
                    .map_err(|e| format!("{}: {e}", stringify!($field)))?;)*
                Ok(Self { t, step, $($field,)* })
            }

            /// Every float entry, ratios included when defined.
            pub fn is_finite(&self) -> bool {
                let mut ok = self.t.is_finite();
                $(ok &= finite_cell(&self.$field);)*
                ok
            }
        }
    };
}

trait Finite {
    fn finite(&self) -> bool;
}

impl Finite for f64 {
    fn finite(&self) -> bool {
        self.is_finite()
    }
}

impl Finite for Option<f64> {
    fn finite(&self) -> bool {
        self.is_none_or(|v| v.is_finite())
    }
}

fn finite_cell<T: Finite>(v: &T) -> bool {
    v.finite()
}

record! {
    q_l32_1: f64,
    q_l65: f64,
    q_l65_1: f64,
    q_l32: f64,
    q_l2: f64,
    q_linf: f64,
    sup_q_window: f64,
    w_l32_1: f64,
    w_l31: f64,
    w_l65: f64,
    w_l32: f64,
    w_l2: f64,
    dzw_l32_1: f64,
    dzw_l2: f64,
    dzq_l32_1: f64,
    dzq_l43_1: f64,
    dzq_l2: f64,
    drw_l32_1: f64,
    sup_ur_over_r: f64,
    int_ur_over_r: f64,
    dzu_sq: f64,
    int_2dzu_sq: f64,
    energy: f64,
    sup_u: f64,
    sup_ur: f64,
    mixed_ur_over_r: f64,
    hardy_65: Option<f64>,
    hardy_32: Option<f64>,
    energy_ratio: Option<f64>,
    growth_65: Option<f64>,
    growth_32: Option<f64>,
    growth_2: Option<f64>,
    growth_lorentz_32_1: Option<f64>,
    sqrt_t_rho: Option<f64>,
    biot_u_w31: Option<f64>,
    biot_ur_dzw: Option<f64>,
    biot_urr_dzq: Option<f64>,
    biot_mixed: Option<f64>,
}

fn idx(p: f64, q: f64) -> LorentzIndex {
    LorentzIndex::new(p, q).expect("fixed admissible exponents")
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

/// The Hardy ratio `‖ω/r‖_{L^p} / ‖∂_r ω‖_{L^p}`, `None` when `∂_r ω ≡ 0`.
fn hardy_ratio(q: &ScalarField, dr_omega: &ScalarField, p: f64) -> Result<Option<f64>> {
    Ok(ratio(lebesgue_norm(q, p)?, lebesgue_norm(dr_omega, p)?))
}

impl DiagnosticsRecord {
    /// Columns that depend only on the current state. Running integrals and
    /// ratios are left at zero / `None`; [`Recorder`] fills them.
    pub fn from_state(state: &SimState, sup_q_window: f64) -> Result<Self> {
        let (q, omega, u) = (&state.q, &state.omega, &state.u);
        let prof_q = rearrange(q);
        let prof_w = rearrange(omega);
        let dz_w = ddz(omega);
        let dz_q = ddz(q);
        let dr_w = ddr(omega)?;
        let uor = ur_over_r(u);
        let dz_ur = ddz(&u.u_r);
        let dz_uz = ddz(&u.u_z);
        let sq = |f: &ScalarField| cylindrical_integral(&f.map(Role::Derived(None), |v| v * v));
        let sq_sum = |a: &ScalarField, b: &ScalarField| sq(a) + sq(b);
        Ok(Self {
            t: state.t,
            step: state.step,
            q_l32_1: prof_q.lorentz(idx(1.5, 1.0))?,
            q_l65: lebesgue_norm(q, 1.2)?,
            q_l65_1: prof_q.lorentz(idx(1.2, 1.0))?,
            q_l32: lebesgue_norm(q, 1.5)?,
            q_l2: lebesgue_norm(q, 2.0)?,
            q_linf: q.max_abs(),
            sup_q_window,
            w_l32_1: prof_w.lorentz(idx(1.5, 1.0))?,
            w_l31: prof_w.lorentz(idx(3.0, 1.0))?,
            w_l65: lebesgue_norm(omega, 1.2)?,
            w_l32: lebesgue_norm(omega, 1.5)?,
            w_l2: lebesgue_norm(omega, 2.0)?,
            dzw_l32_1: rearrange(&dz_w).lorentz(idx(1.5, 1.0))?,
            dzw_l2: lebesgue_norm(&dz_w, 2.0)?,
            dzq_l32_1: rearrange(&dz_q).lorentz(idx(1.5, 1.0))?,
            dzq_l43_1: rearrange(&dz_q).lorentz(idx(4.0 / 3.0, 1.0))?,
            dzq_l2: lebesgue_norm(&dz_q, 2.0)?,
            drw_l32_1: rearrange(&dr_w).lorentz(idx(1.5, 1.0))?,
            sup_ur_over_r: uor.max_abs(),
            dzu_sq: sq_sum(&dz_ur, &dz_uz),
            energy: sq_sum(&u.u_r, &u.u_z),
            sup_u: u.magnitude().max_abs(),
            sup_ur: u.u_r.max_abs(),
            mixed_ur_over_r: mixed_norm(&uor, f64::INFINITY, 4.0)?,
            hardy_65: hardy_ratio(q, &dr_w, 1.2)?,
            hardy_32: hardy_ratio(q, &dr_w, 1.5)?,
            ..Self::default()
        })
    }

    /// The columns [`DiagnosticsRecord::from_state`] computes, for comparing a
    /// recomputed row against a stored one.
    pub fn state_part(&self) -> Self {
        Self {
            int_ur_over_r: 0.0,
            int_2dzu_sq: 0.0,
            energy_ratio: None,
            growth_65: None,
            growth_32: None,
            growth_2: None,
            growth_lorentz_32_1: None,
            sqrt_t_rho: None,
            biot_u_w31: None,
            biot_ur_dzw: None,
            biot_urr_dzq: None,
            biot_mixed: None,
            ..self.clone()
        }
    }
}

/// Accumulates the time integrals (trapezoid rule between consecutive rows)
/// and the ratios against the initial row.
#[derive(Debug, Clone, Default)]
pub struct Recorder {
    initial: Option<DiagnosticsRecord>,
    last: Option<DiagnosticsRecord>,
}

impl Recorder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Resumes after `records` (the rows of an earlier run, in order).
    pub fn from_records(records: &[DiagnosticsRecord]) -> Self {
        Self { initial: records.first().cloned(), last: records.last().cloned() }
    }

    pub fn record(&mut self, state: &SimState, sup_q_window: f64) -> Result<DiagnosticsRecord> {
        Ok(self.extend(DiagnosticsRecord::from_state(state, sup_q_window)?))
    }

    /// Fills running integrals and ratios of a row whose state columns are set.
    pub fn extend(&mut self, mut rec: DiagnosticsRecord) -> DiagnosticsRecord {
        let (int_uor, int_dzu) = match &self.last {
            Some(prev) => {
                let h = rec.t - prev.t;
                (
                    prev.int_ur_over_r + 0.5 * h * (prev.sup_ur_over_r + rec.sup_ur_over_r),
                    prev.int_2dzu_sq + h * (prev.dzu_sq + rec.dzu_sq),
                )
            }
            None => (0.0, 0.0),
        };
        rec.int_ur_over_r = int_uor;
        rec.int_2dzu_sq = int_dzu;
        let init = self.initial.get_or_insert_with(|| rec.clone()).clone();
        let gronwall = rec.int_ur_over_r.exp();
        rec.energy_ratio = ratio(rec.energy + rec.int_2dzu_sq, init.energy);
        rec.growth_65 = ratio(rec.w_l65, init.w_l65 * gronwall);
        rec.growth_32 = ratio(rec.w_l32, init.w_l32 * gronwall);
        rec.growth_2 = ratio(rec.w_l2, init.w_l2 * gronwall);
        rec.growth_lorentz_32_1 = ratio(rec.w_l32_1, init.w_l32_1 * gronwall);
        rec.sqrt_t_rho = ratio(rec.int_ur_over_r, rec.t.sqrt() * init.q_l32_1);
        rec.biot_u_w31 = ratio(rec.sup_u, rec.w_l31);
        rec.biot_ur_dzw = ratio(rec.sup_ur, rec.dzw_l32_1);
        rec.biot_urr_dzq = ratio(rec.sup_ur_over_r, rec.dzq_l32_1);
        rec.biot_mixed = ratio(rec.mixed_ur_over_r, rec.dzq_l43_1);
        self.last = Some(rec.clone());
        rec
    }
}

/// Recomputes integrals and ratios of a stored series from its state columns.
pub fn replay(records: &[DiagnosticsRecord]) -> Vec<DiagnosticsRecord> {
    let mut rec = Recorder::new();
    records.iter().map(|r| rec.extend(r.state_part())).collect()
}

pub fn write_csv<W: Write>(records: &[DiagnosticsRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(COLUMNS).map_err(csv_err)?;
    for r in records {
        w.write_record(r.cells()).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<DiagnosticsRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(|e| Error::Csv(e.to_string()))?;
    if header.iter().ne(COLUMNS.iter().copied()) {
        return Err(Error::Csv("unexpected header".into()));
    }
    let mut out = Vec::new();
    for (n, row) in rd.records().enumerate() {
        let row = row.map_err(|e| Error::Csv(e.to_string()))?;
        let cells: Vec<&str> = row.iter().collect();
        out.push(
            DiagnosticsRecord::from_cells(&cells)
                .map_err(|m| Error::Csv(format!("row {}: {m}", n + 1)))?,
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub passed: bool,
    /// Largest `(‖u‖² + 2∫‖∂_z u‖²)/‖u₀‖² - 1`; negative when the bound holds with room.
    pub worst_excess: f64,
    /// Largest `|(‖u‖² + 2∫‖∂_z u‖²)/‖u₀‖² - 1|`: how far the discrete balance is from equality.
    pub max_defect: f64,
}

/// `‖u(t)‖² + 2∫₀ᵗ‖∂_z u‖² ≤ ‖u₀‖² (1 + 2%)` at every row.
pub fn energy_check(records: &[DiagnosticsRecord]) -> EnergyReport {
    let Some(first) = records.first() else {
        return EnergyReport { passed: true, worst_excess: 0.0, max_defect: 0.0 };
    };
    let e0 = first.energy;
    let mut passed = true;
    let (mut worst, mut defect) = (f64::NEG_INFINITY, 0.0_f64);
    for r in records {
        let lhs = r.energy + r.int_2dzu_sq;
        passed &= lhs <= e0 * (1.0 + ENERGY_TOLERANCE);
        if e0 > 0.0 {
            let x = lhs / e0 - 1.0;
            worst = worst.max(x);
            defect = defect.max(x.abs());
        } else {
            worst = worst.max(lhs);
        }
    }
    EnergyReport { passed, worst_excess: worst, max_defect: defect }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxPrincipleReport {
    pub passed: bool,
    /// Largest `sup|q(t)| - sup|q₀|` over all steps.
    pub sup_excess: f64,
    /// Largest `‖q(t)‖ / ‖q₀‖` over the Lorentz family.
    pub worst_norm_ratio: f64,
}

/// `sup|q(t)| ≤ sup|q₀| + 1e-12` at every step and `‖q(t)‖_{L^{p,q}} ≤ ‖q₀‖ (1 + 1e-3)`
/// for `(3/2,1)`, `(6/5,1)`, `(2,2)`, `(6/5,6/5)`.
pub fn max_principle_check(records: &[DiagnosticsRecord]) -> MaxPrincipleReport {
    let Some(first) = records.first() else {
        return MaxPrincipleReport { passed: true, sup_excess: 0.0, worst_norm_ratio: 0.0 };
    };
    let s0 = first.q_linf;
    let mut passed = true;
    let mut sup_excess = f64::NEG_INFINITY;
    let mut worst = 0.0_f64;
    let norms = |r: &DiagnosticsRecord| [r.q_l32_1, r.q_l65_1, r.q_l2, r.q_l65];
    let n0 = norms(first);
    for r in records {
        let s = r.q_linf.max(r.sup_q_window);
        sup_excess = sup_excess.max(s - s0);
        passed &= s <= s0 + SUP_TOLERANCE;
        for (v, v0) in norms(r).into_iter().zip(n0) {
            passed &= v <= v0 * (1.0 + NORM_MONOTONICITY_TOLERANCE);
            if v0 > 0.0 {
                worst = worst.max(v / v0);
            }
        }
    }
    MaxPrincipleReport { passed, sup_excess, worst_norm_ratio: worst }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub passed: bool,
    /// Largest `‖ω(t)‖_{L^p} / (‖ω₀‖_{L^p} e^{∫ sup|u^r/r|})` over `p ∈ {6/5, 3/2, 2}`.
    pub worst_ratio: f64,
    /// Same ratio for `L^{3/2,1}`; reported only.
    pub lorentz_ratio: f64,
}

/// `‖ω(t)‖_{L^p} ≤ ‖ω₀‖_{L^p} exp(∫₀ᵗ sup|u^r/r|) (1 + 5%)` for `p ∈ {6/5, 3/2, 2}`.
pub fn growth_check(records: &[DiagnosticsRecord]) -> GrowthReport {
    let Some(first) = records.first() else {
        return GrowthReport { passed: true, worst_ratio: 0.0, lorentz_ratio: 0.0 };
    };
    let mut passed = true;
    let (mut worst, mut lorentz) = (0.0_f64, 0.0_f64);
    for r in records {
        let bound = r.int_ur_over_r.exp();
        for (v, v0) in [(r.w_l65, first.w_l65), (r.w_l32, first.w_l32), (r.w_l2, first.w_l2)] {
            passed &= v <= v0 * bound * (1.0 + GROWTH_TOLERANCE);
            if v0 > 0.0 {
                worst = worst.max(v / (v0 * bound));
            }
        }
        if first.w_l32_1 > 0.0 {
            lorentz = lorentz.max(r.w_l32_1 / (first.w_l32_1 * bound));
        }
    }
    GrowthReport { passed, worst_ratio: worst, lorentz_ratio: lorentz }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqrtTReport {
    /// `(t, ρ(t))` for rows in the window with `t > 0`.
    pub series: Vec<(f64, f64)>,
    /// `ρ` at the first row of the window.
    pub reference: Option<f64>,
    /// `max ρ / reference`.
    pub max_ratio: f64,
    pub passed: bool,
    /// No row in the window, or `‖q₀‖_{L^{3/2,1}} = 0`.
    pub skipped: bool,
}

/// `ρ(t) = ∫₀ᵗ sup|u^r/r| / (√t ‖q₀‖_{L^{3/2,1}})` over `t ∈ [t_lo, t_hi]`, bounded
/// by ten times its first value in the window.
pub fn sqrt_t_check(records: &[DiagnosticsRecord], t_lo: f64, t_hi: f64) -> SqrtTReport {
    let q0 = records.first().map_or(0.0, |r| r.q_l32_1);
    let series: Vec<(f64, f64)> = if q0 > 0.0 {
        records
            .iter()
            .filter(|r| r.t > 0.0 && r.t >= t_lo && r.t <= t_hi)
            .map(|r| (r.t, r.int_ur_over_r / (r.t.sqrt() * q0)))
            .collect()
    } else {
        Vec::new()
    };
    let reference = series.first().map(|&(_, v)| v);
    match reference {
        Some(rho0) if rho0 > 0.0 => {
            let max = series.iter().fold(0.0_f64, |m, &(_, v)| m.max(v));
            let max_ratio = max / rho0;
            SqrtTReport { passed: max_ratio <= SQRT_T_BOUND, series, reference, max_ratio, skipped: false }
        }
        // ρ ≡ 0 on the window is trivially bounded
        Some(_) => {
            let passed = series.iter().all(|&(_, v)| v == 0.0);
            SqrtTReport { series, reference, max_ratio: 0.0, passed, skipped: false }
        }
        None => SqrtTReport { series, reference, max_ratio: 0.0, passed: true, skipped: true },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardyReport {
    /// `‖ω/r‖_{L^{6/5}} / ‖∂_r ω‖_{L^{6/5}}`, `None` when degenerate.
    pub ratio_65: Option<f64>,
    /// `‖ω/r‖_{L^{3/2}} / ‖∂_r ω‖_{L^{3/2}}`, `None` when degenerate.
    pub ratio_32: Option<f64>,
}

impl HardyReport {
    pub fn degenerate(&self) -> bool {
        self.ratio_65.is_none() || self.ratio_32.is_none()
    }
}

/// Hardy ratios of a field vanishing on the axis.
pub fn hardy_check(omega: &ScalarField) -> Result<HardyReport> {
    if omega.role().parity() != Some(Parity::Odd) {
        return Err(Error::WrongRole { expected: "an axis-vanishing field", actual: omega.role().to_string() });
    }
    let g = *omega.grid();
    let mut q = omega.clone().with_role(Role::Derived(Some(Parity::Even)));
    for i in 0..g.n_r() {
        let r = g.r(i);
        for j in 0..g.n_z() {
            q.set(i, j, omega.get(i, j) / r);
        }
    }
    let dr = ddr(omega)?;
    Ok(HardyReport { ratio_65: hardy_ratio(&q, &dr, 1.2)?, ratio_32: hardy_ratio(&q, &dr, 1.5)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    R,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaReport {
    pub passed: bool,
    /// `‖∂_i f‖_{L^p}`
    pub lhs: f64,
    /// `(2/p) ‖∂_i |f|^{p/2}‖_{L²} ‖f‖_{L^p}^{(2-p)/2}`
    pub rhs: f64,
}

/// `‖∂_i f‖_{L^p} ≤ (2/p) ‖∂_i |f|^{p/2}‖_{L²} ‖f‖_{L^p}^{(2-p)/2} (1 + 5%)`, `1 < p ≤ 2`.
pub fn lemma_lp_check(f: &ScalarField, p: f64, direction: Direction) -> Result<LemmaReport> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::InvalidExponent(format!("lemma needs 1 < p <= 2, got {p}")));
    }
    // |f| extends evenly across the axis whatever the parity of f
    let parity = f.role().parity().map(|_| Parity::Even);
    let g = f.map(Role::Derived(parity), |v| v.abs().powf(0.5 * p));
    let (df, dg) = match direction {
        Direction::R => (ddr(f)?, ddr(&g)?),
        Direction::Z => (ddz(f), ddz(&g)),
    };
    let lhs = lebesgue_norm(&df, p)?;
    let rhs = (2.0 / p) * lebesgue_norm(&dg, 2.0)? * lebesgue_norm(f, p)?.powf(0.5 * (2.0 - p));
    Ok(LemmaReport { passed: lhs <= rhs * (1.0 + LEMMA_TOLERANCE), lhs, rhs })
}

/// `(t, ‖∂_r ω‖_{L^{3/2,1}})` and whether every entry is finite.
pub fn dr_omega_monitor(records: &[DiagnosticsRecord]) -> (Vec<(f64, f64)>, bool) {
    let series: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.drw_l32_1)).collect();
    let finite = series.iter().all(|&(_, v)| v.is_finite());
    (series, finite)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiotRatios {
    /// `sup|u| / ‖ω‖_{L^{3,1}}`
    pub u_w31: Option<f64>,
    /// `sup|u^r| / ‖∂_z ω‖_{L^{3/2,1}}`
    pub ur_dzw: Option<f64>,
    /// `sup|u^r/r| / ‖∂_z q‖_{L^{3/2,1}}`
    pub urr_dzq: Option<f64>,
    /// `‖u^r/r‖_{L^∞_h(L^4_v)} / ‖∂_z q‖_{L^{4/3,1}}`
    pub mixed: Option<f64>,
}

impl BiotRatios {
    pub fn all(&self) -> [Option<f64>; 4] {
        [self.u_w31, self.ur_dzw, self.urr_dzq, self.mixed]
    }
}

pub fn biot_ratio_check(state: &SimState) -> Result<BiotRatios> {
    let r = Recorder::new().record(state, state.q.max_abs())?;
    Ok(BiotRatios { u_w31: r.biot_u_w31, ur_dzw: r.biot_ur_dzw, urr_dzq: r.biot_urr_dzq, mixed: r.biot_mixed })
}

/// One line of a check summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Every series check with an explicit constant, plus finiteness of all rows.
pub fn check_series(records: &[DiagnosticsRecord]) -> Vec<Verdict> {
    let e = energy_check(records);
    let m = max_principle_check(records);
    let g = growth_check(records);
    let t_hi = records.last().map_or(0.0, |r| r.t);
    let s = sqrt_t_check(records, 0.1, t_hi);
    let (_, dr_finite) = dr_omega_monitor(records);
    vec![
        Verdict {
            name: "finite",
            passed: records.iter().all(DiagnosticsRecord::is_finite),
            detail: format!("{} rows", records.len()),
        },
        Verdict {
            name: "energy",
            passed: e.passed,
            detail: format!("worst excess {:+.3e}, max defect {:.3e}", e.worst_excess, e.max_defect),
        },
        Verdict {
            name: "max_principle",
            passed: m.passed,
            detail: format!("sup excess {:+.3e}, worst norm ratio {:.6}", m.sup_excess, m.worst_norm_ratio),
        },
        Verdict {
            name: "growth",
            passed: g.passed,
            detail: format!("worst ratio {:.6}, L^(3/2,1) ratio {:.6} (report)", g.worst_ratio, g.lorentz_ratio),
        },
        Verdict {
            name: "sqrt_t",
            passed: s.passed,
            detail: if s.skipped {
                "skipped (no rows with t >= 0.1 or q0 = 0)".into()
            } else {
                format!("max rho / rho(t0) = {:.4}", s.max_ratio)
            },
        },
        Verdict { name: "dr_omega", passed: dr_finite, detail: "finite".into() },
    ]
}
