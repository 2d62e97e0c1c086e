//! Experiment harness: configuration files, initial data, run directories.
//!
//! Config files are flat `key = value` lines; `#` starts a comment. Omitted keys
//! take the defaults below (the reference experiment).
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `r_max` | 2 | radial extent |
//! | `z_min`, `z_max` | -2, 2 | vertical extent |
//! | `n_r`, `n_z` | 96, 192 | cells |
//! | `dt_cfl_factor` | 0.9 | safety factor in (0, 1] |
//! | `n_theta` | 64 | azimuthal quadrature nodes (even, ≥ 16) |
//! | `eps_h` | 0 | horizontal viscosity |
//! | `t_end` | 1 | final time |
//! | `diag_every` | 10 | steps between diagnostics rows |
//! | `evolve_omega_direct` | false | evolve `ω` with stretching instead of `q` |
//! | `z_wall` | zero_extension | vertical diffusion ghost at `z_min`, `z_max`: `zero_extension` or `zero_flux` |
//! | `initial` | gaussian_ring | `gaussian_ring`, `yudovich_patch` or `ring_pair` |
//! | `amplitude` | 1 | `A` |
//! | `r0`, `z0` | 0.5, 0 | center |
//! | `sigma` | 0.15 | Gaussian width |
//! | `patch_radius_r`, `patch_radius_z` | 0.25, 0.25 | patch semi-axes |
//! | `pair_separation` | 0.6 | vertical distance between the two rings of a pair |
//! | `snapshot_times` | (empty) | extra snapshot times, comma separated; `0` and `t_end` are always saved |
//! | `output_dir` | run | run directory (overridden by `--out`) |
//! | `seed` | 0 | seed for the random field generators |
//!
//! A run directory holds `config.cfg` (canonical form), `diagnostics.csv`,
//! `initial.txt`, `snapshots/` (`q_NNNN` and `omega_NNNN`) and `checkpoint/` (the last
//! state, for `--resume`).

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::diagnostics::{check_series, read_csv, replay, write_csv, DiagnosticsRecord, Recorder, Verdict};
use crate::error::{Error, Result};
use crate::evolution::{continue_run, omega_from_q, run, RunOutput, SimConfig, SimState, Solver};
use crate::grid::{GridSpec, Role, ScalarField};
use crate::norms::{lebesgue_norm, lorentz_norm, LorentzIndex};
use crate::tridiag::Wall;

/// Supports must stay this far (as a fraction of the box) from the outer boundaries.
pub const SUPPORT_MARGIN: f64 = 0.25;
/// A Gaussian counts as supported within this many widths of its center.
pub const GAUSSIAN_SUPPORT_WIDTHS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialKind {
    GaussianRing,
    YudovichPatch,
    RingPair,
}

impl InitialKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::GaussianRing => "gaussian_ring",
            Self::YudovichPatch => "yudovich_patch",
            Self::RingPair => "ring_pair",
        }
    }
}

impl std::str::FromStr for InitialKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gaussian_ring" => Ok(Self::GaussianRing),
            "yudovich_patch" => Ok(Self::YudovichPatch),
            "ring_pair" => Ok(Self::RingPair),
            _ => Err(format!("unknown initial data kind {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub kind: InitialKind,
    pub amplitude: f64,
    pub r0: f64,
    pub z0: f64,
    pub sigma: f64,
    pub patch_radius_r: f64,
    pub patch_radius_z: f64,
    pub pair_separation: f64,
}

impl Default for InitialData {
    fn default() -> Self {
        Self {
            kind: InitialKind::GaussianRing,
            amplitude: 1.0,
            r0: 0.5,
            z0: 0.0,
            sigma: 0.15,
            patch_radius_r: 0.25,
            patch_radius_z: 0.25,
            pair_separation: 0.6,
        }
    }
}

impl InitialData {
    /// `(r_hi, z_lo, z_hi)` of the region the data occupies.
    fn extent(&self) -> (f64, f64, f64) {
        let w = GAUSSIAN_SUPPORT_WIDTHS * self.sigma;
        match self.kind {
            InitialKind::GaussianRing => (self.r0 + w, self.z0 - w, self.z0 + w),
            InitialKind::YudovichPatch => (
                self.r0 + self.patch_radius_r,
                self.z0 - self.patch_radius_z,
                self.z0 + self.patch_radius_z,
            ),
            InitialKind::RingPair => {
                let h = 0.5 * self.pair_separation;
                (self.r0 + w, self.z0 - h - w, self.z0 + h + w)
            }
        }
    }

    fn in_patch(&self, r: f64, z: f64) -> bool {
        let x = (r - self.r0) / self.patch_radius_r;
        let y = (z - self.z0) / self.patch_radius_z;
        x * x + y * y <= 1.0
    }
}

/// `q₀ = ω₀ / r` for the requested data; errors if the support reaches the outer
/// quarter of the box.
pub fn build_initial(d: &InitialData, g: GridSpec) -> Result<ScalarField> {
    let (r_hi, z_lo, z_hi) = d.extent();
    let r_lim = (1.0 - SUPPORT_MARGIN) * g.r_max();
    let z_lim_lo = g.z_min() + SUPPORT_MARGIN * g.z_len();
    let z_lim_hi = g.z_max() - SUPPORT_MARGIN * g.z_len();
    if d.amplitude != 0.0 && (r_hi > r_lim || z_lo < z_lim_lo || z_hi > z_lim_hi) {
        return Err(Error::SupportMargin(format!(
            "{} support reaches r = {r_hi}, z in [{z_lo}, {z_hi}]; allowed r <= {r_lim}, z in [{z_lim_lo}, {z_lim_hi}]",
            d.kind.as_str()
        )));
    }
    let gauss = |r: f64, z: f64, zc: f64| {
        (-((r - d.r0).powi(2) + (z - zc).powi(2)) / (d.sigma * d.sigma)).exp()
    };
    let a = d.amplitude;
    Ok(match d.kind {
        InitialKind::GaussianRing => ScalarField::from_fn(g, Role::QOmegaOverR, |r, z| a * gauss(r, z, d.z0)),
        InitialKind::YudovichPatch => {
            ScalarField::from_fn(g, Role::QOmegaOverR, |r, z| if d.in_patch(r, z) { a } else { 0.0 })
        }
        InitialKind::RingPair => {
            let h = 0.5 * d.pair_separation;
            ScalarField::from_fn(g, Role::QOmegaOverR, |r, z| {
                a * (gauss(r, z, d.z0 + h) - gauss(r, z, d.z0 - h))
            })
        }
    })
}

/// Cylindrical measure of the cells inside the patch.
pub fn patch_measure(d: &InitialData, g: GridSpec) -> f64 {
    let mut v = 0.0;
    for i in 0..g.n_r() {
        let n = (0..g.n_z()).filter(|&j| d.in_patch(g.r(i), g.z(j))).count();
        v += n as f64 * g.cell_measure(i);
    }
    v
}

/// `‖A 1_E‖_{L^{p,q}} = |A| (p/q)^{1/q} |E|^{1/p}`; for `q = ∞` the factor is one.
pub fn indicator_lorentz(amplitude: f64, measure: f64, idx: LorentzIndex) -> f64 {
    let (p, q) = (idx.p(), idx.q());
    let shape = if q.is_infinite() { 1.0 } else { (p / q).powf(1.0 / q) };
    let m = if p.is_infinite() { 1.0 } else { measure.powf(1.0 / p) };
    amplitude.abs() * shape * m
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sim: SimConfig,
    pub initial: InitialData,
    pub output_dir: PathBuf,
    pub snapshot_times: Vec<f64>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig {
                grid: GridSpec::new(2.0, -2.0, 2.0, 96, 192).expect("reference grid"),
                dt_cfl_factor: 0.9,
                n_theta: 64,
                eps_h: 0.0,
                t_end: 1.0,
                diag_every: 10,
                evolve_omega_direct: false,
                z_wall: Wall::ZeroExtension,
            },
            initial: InitialData::default(),
            output_dir: PathBuf::from("run"),
            snapshot_times: Vec::new(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// `0`, the extra snapshot times up to `t_end`, and `t_end`.
    pub fn all_snapshot_times(&self) -> Vec<f64> {
        let mut v = vec![0.0, self.sim.t_end];
        v.extend(self.snapshot_times.iter().copied().filter(|&t| t <= self.sim.t_end));
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

const KEYS: &[&str] = &[
    "r_max",
    "z_min",
    "z_max",
    "n_r",
    "n_z",
    "dt_cfl_factor",
    "n_theta",
    "eps_h",
    "t_end",
    "diag_every",
    "evolve_omega_direct",
    "z_wall",
    "initial",
    "amplitude",
    "r0",
    "z0",
    "sigma",
    "patch_radius_r",
    "patch_radius_z",
    "pair_separation",
    "snapshot_times",
    "output_dir",
    "seed",
];

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::ConfigParse { line, message: message.into() }
}

/// Parses a config file. Keys may appear at most once.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let def = ExperimentConfig::default();
    let g0 = def.sim.grid;
    let (mut r_max, mut z_min, mut z_max, mut n_r, mut n_z) = (g0.r_max(), g0.z_min(), g0.z_max(), g0.n_r(), g0.n_z());
    let mut sim = def.sim.clone();
    let mut init = def.initial.clone();
    let mut output_dir = def.output_dir.clone();
    let mut snapshot_times = def.snapshot_times.clone();
    let mut seed = def.seed;
    let mut seen = HashSet::new();
    let mut grid_line = 0;
    let mut sim_line = 0;

    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("expected key = value, got {content:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(parse_err(line, format!("unknown key {key:?}")));
        }
        if !seen.insert(key.to_string()) {
            return Err(parse_err(line, format!("duplicate key {key:?}")));
        }
        let real = || -> Result<f64> {
            let v: f64 = value.parse().map_err(|_| parse_err(line, format!("{key}: expected a number, got {value:?}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(line, format!("{key}: must be finite")))
            }
        };
        let count = || -> Result<usize> {
            value.parse().map_err(|_| parse_err(line, format!("{key}: expected a non-negative integer, got {value:?}")))
        };
        let positive = |v: f64| -> Result<f64> {
            if v > 0.0 {
                Ok(v)
            } else {
                Err(parse_err(line, format!("{key}: must be > 0, got {v}")))
            }
        };
        match key {
            "r_max" => r_max = positive(real()?)?,
            "z_min" => z_min = real()?,
            "z_max" => z_max = real()?,
            "n_r" => n_r = count()?,
            "n_z" => n_z = count()?,
            "dt_cfl_factor" => sim.dt_cfl_factor = real()?,
            "n_theta" => sim.n_theta = count()?,
            "eps_h" => sim.eps_h = real()?,
            "t_end" => sim.t_end = real()?,
            "diag_every" => sim.diag_every = count()?,
            "evolve_omega_direct" => {
                sim.evolve_omega_direct = value
                    .parse()
                    .map_err(|_| parse_err(line, format!("{key}: expected true or false, got {value:?}")))?
            }
            "z_wall" => {
                sim.z_wall = match value {
                    "zero_extension" => Wall::ZeroExtension,
                    "zero_flux" => Wall::ZeroFlux,
                    _ => return Err(parse_err(line, format!("{key}: expected zero_extension or zero_flux, got {value:?}"))),
                }
            }
            "initial" => init.kind = value.parse().map_err(|m: String| parse_err(line, m))?,
            "amplitude" => init.amplitude = real()?,
            "r0" => init.r0 = real()?,
            "z0" => init.z0 = real()?,
            "sigma" => init.sigma = positive(real()?)?,
            "patch_radius_r" => init.patch_radius_r = positive(real()?)?,
            "patch_radius_z" => init.patch_radius_z = positive(real()?)?,
            "pair_separation" => init.pair_separation = real()?,
            "snapshot_times" => {
                snapshot_times = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| match s.parse::<f64>() {
                        Ok(t) if t >= 0.0 && t.is_finite() => Ok(t),
                        _ => Err(parse_err(line, format!("{key}: bad time {s:?}"))),
                    })
                    .collect::<Result<_>>()?
            }
            "output_dir" => output_dir = PathBuf::from(value),
            "seed" => {
                seed = value.parse().map_err(|_| parse_err(line, format!("{key}: expected an unsigned integer")))?
            }
            _ => unreachable!(),
        }
        if matches!(key, "r_max" | "z_min" | "z_max" | "n_r" | "n_z") {
            grid_line = line;
        } else if matches!(key, "dt_cfl_factor" | "n_theta" | "eps_h" | "t_end" | "diag_every") {
            sim_line = line;
        }
    }
    sim.grid = GridSpec::new(r_max, z_min, z_max, n_r, n_z).map_err(|e| parse_err(grid_line, e.to_string()))?;
    sim.validate().map_err(|e| parse_err(sim_line, e.to_string()))?;
    Ok(ExperimentConfig { sim, initial: init, output_dir, snapshot_times, seed })
}

/// Canonical text form; `parse_config(&emit_config(c)) == c`.
pub fn emit_config(c: &ExperimentConfig) -> String {
    let g = c.sim.grid;
    let d = &c.initial;
    let mut s = String::new();
    let times: Vec<String> = c.snapshot_times.iter().map(|t| t.to_string()).collect();
    let wall = match c.sim.z_wall {
        Wall::ZeroExtension => "zero_extension",
        Wall::ZeroFlux => "zero_flux",
    };
    let entries: [(&str, String); 23] = [
        ("r_max", g.r_max().to_string()),
        ("z_min", g.z_min().to_string()),
        ("z_max", g.z_max().to_string()),
        ("n_r", g.n_r().to_string()),
        ("n_z", g.n_z().to_string()),
        ("dt_cfl_factor", c.sim.dt_cfl_factor.to_string()),
        ("n_theta", c.sim.n_theta.to_string()),
        ("eps_h", c.sim.eps_h.to_string()),
        ("t_end", c.sim.t_end.to_string()),
        ("diag_every", c.sim.diag_every.to_string()),
        ("evolve_omega_direct", c.sim.evolve_omega_direct.to_string()),
        ("z_wall", wall.to_string()),
        ("initial", d.kind.as_str().to_string()),
        ("amplitude", d.amplitude.to_string()),
        ("r0", d.r0.to_string()),
        ("z0", d.z0.to_string()),
        ("sigma", d.sigma.to_string()),
        ("patch_radius_r", d.patch_radius_r.to_string()),
        ("patch_radius_z", d.patch_radius_z.to_string()),
        ("pair_separation", d.pair_separation.to_string()),
        ("snapshot_times", times.join(", ")),
        ("output_dir", c.output_dir.display().to_string()),
        ("seed", c.seed.to_string()),
    ];
    for (k, v) in entries {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(&fs::read_to_string(path)?)
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Header path next to a snapshot's data file.
pub fn header_path(path: &Path) -> PathBuf {
    path.with_extension("hdr")
}

/// A field read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: ScalarField,
    pub time: f64,
    pub step: Option<u64>,
}

/// Little-endian `f64` values (row-major, `r` slow) at `path`, text header at
/// `path.hdr`.
pub fn write_snapshot(path: &Path, field: &ScalarField, time: f64, step: Option<u64>) -> Result<()> {
    let g = field.grid();
    let mut hdr = format!(
        "n_r = {}\nn_z = {}\nr_max = {}\nz_min = {}\nz_max = {}\nrole = {}\ntime = {}\n",
        g.n_r(),
        g.n_z(),
        g.r_max(),
        g.z_min(),
        g.z_max(),
        field.role(),
        time
    );
    if let Some(s) = step {
        let _ = writeln!(hdr, "step = {s}");
    }
    let mut data = Vec::with_capacity(8 * field.values().len());
    for v in field.values() {
        data.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &data)?;
    write_atomic(&header_path(path), hdr.as_bytes())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let bad = |m: String| Error::Snapshot { path: path.to_path_buf(), message: m };
    let hdr = fs::read_to_string(header_path(path))
        .map_err(|e| bad(format!("header {}: {e}", header_path(path).display())))?;
    let mut kv = std::collections::HashMap::new();
    for line in hdr.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("bad header line {line:?}")))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| kv.get(k).ok_or_else(|| bad(format!("header lacks {k}")));
    let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| bad(format!("bad {k}"))) };
    let int = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| bad(format!("bad {k}"))) };
    let grid = GridSpec::new(num("r_max")?, num("z_min")?, num("z_max")?, int("n_r")?, int("n_z")?)?;
    let role: Role = get("role")?.parse()?;
    let time = num("time")?;
    let step = match kv.get("step") {
        Some(s) => Some(s.parse().map_err(|_| bad("bad step".into()))?),
        None => None,
    };
    let bytes = fs::read(path).map_err(|e| bad(e.to_string()))?;
    if bytes.len() != 8 * grid.len() {
        return Err(bad(format!("expected {} bytes, found {}", 8 * grid.len(), bytes.len())));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Snapshot { field: ScalarField::from_values(grid, role, values)?, time, step })
}

/// Generators for randomized property tests, all driven by a caller-owned RNG.
pub mod random {
    use super::*;

    /// Independent values in `[-1, 1]`, a quarter of them zero.
    pub fn random_field<R: Rng>(g: GridSpec, rng: &mut R) -> ScalarField {
        let values = (0..g.len())
            .map(|_| if rng.gen_bool(0.25) { 0.0 } else { rng.gen_range(-1.0..=1.0) })
            .collect();
        ScalarField::from_values(g, Role::Derived(None), values).expect("finite")
    }

    /// Indicator of a random nonempty cell set.
    pub fn random_indicator<R: Rng>(g: GridSpec, rng: &mut R) -> ScalarField {
        let density = rng.gen_range(0.05..0.6);
        let mut values: Vec<f64> = (0..g.len()).map(|_| if rng.gen_bool(density) { 1.0 } else { 0.0 }).collect();
        let k = rng.gen_range(0..g.len());
        values[k] = 1.0;
        ScalarField::from_values(g, Role::Derived(None), values).expect("finite")
    }

    /// A sum of 1 to 4 positive Gaussian bumps placed well inside the box.
    pub fn random_bumps<R: Rng>(g: GridSpec, rng: &mut R) -> ScalarField {
        let n = rng.gen_range(1..=4);
        let bumps: Vec<(f64, f64, f64, f64)> = (0..n)
            .map(|_| {
                let r0 = g.r_max() * rng.gen_range(0.3..0.6);
                let z0 = g.z_min() + g.z_len() * rng.gen_range(0.35..0.65);
                let s = g.r_max() * rng.gen_range(0.08..0.15);
                let a = rng.gen_range(0.5..2.0);
                (a, r0, z0, s)
            })
            .collect();
        ScalarField::from_fn(g, Role::QOmegaOverR, |r, z| {
            bumps.iter().map(|&(a, r0, z0, s)| a * (-((r - r0).powi(2) + (z - z0).powi(2)) / (s * s)).exp()).sum()
        })
    }
}

pub const CONFIG_FILE: &str = "config.cfg";
pub const CSV_FILE: &str = "diagnostics.csv";
pub const INITIAL_FILE: &str = "initial.txt";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const CHECKPOINT_DIR: &str = "checkpoint";

fn initial_report(c: &ExperimentConfig, q0: &ScalarField) -> Result<String> {
    let mut s = String::new();
    let _ = writeln!(s, "initial = {}", c.initial.kind.as_str());
    for (name, p, q) in [("l32_1", 1.5, 1.0), ("l65_1", 1.2, 1.0), ("l31", 3.0, 1.0)] {
        let _ = writeln!(s, "q0_{name} = {:.16e}", lorentz_norm(q0, LorentzIndex::new(p, q)?)?);
    }
    for (name, p) in [("l65", 1.2), ("l32", 1.5), ("l2", 2.0), ("linf", f64::INFINITY)] {
        let _ = writeln!(s, "q0_{name} = {:.16e}", lebesgue_norm(q0, p)?);
    }
    if c.initial.kind == InitialKind::YudovichPatch {
        let v = patch_measure(&c.initial, c.sim.grid);
        let _ = writeln!(s, "patch_measure = {v:.16e}");
        for (name, p, q) in [("l32_1", 1.5, 1.0), ("l65_1", 1.2, 1.0), ("l32_inf", 1.5, f64::INFINITY)] {
            let idx = LorentzIndex::new(p, q)?;
            let _ = writeln!(s, "closed_form_{name} = {:.16e}", indicator_lorentz(c.initial.amplitude, v, idx));
        }
    }
    Ok(s)
}

fn snapshot_paths(dir: &Path, index: usize) -> (PathBuf, PathBuf) {
    let d = dir.join(SNAPSHOT_DIR);
    (d.join(format!("q_{index:04}.bin")), d.join(format!("omega_{index:04}.bin")))
}

fn write_state(q_path: &Path, w_path: &Path, s: &SimState) -> Result<()> {
    write_snapshot(q_path, &s.q, s.t, Some(s.step))?;
    write_snapshot(w_path, &s.omega, s.t, Some(s.step))
}

fn write_outputs(dir: &Path, out: &RunOutput, first_index: usize) -> Result<()> {
    let mut csv = Vec::new();
    write_csv(&out.records, &mut csv)?;
    write_atomic(&dir.join(CSV_FILE), &csv)?;
    for (k, s) in out.snapshots.iter().enumerate() {
        let (qp, wp) = snapshot_paths(dir, first_index + k);
        write_state(&qp, &wp, s)?;
    }
    let cp = dir.join(CHECKPOINT_DIR);
    write_state(&cp.join("q.bin"), &cp.join("omega.bin"), &out.final_state)
}

/// Result of a run through the harness.
#[derive(Debug)]
pub struct RunReport {
    pub output: RunOutput,
    pub verdicts: Vec<Verdict>,
}

/// Error from [`run_experiment`]: the run stopped, partial outputs were written.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Setup(#[from] Error),
    #[error("run aborted at t = {t}: {error} (partial output written)")]
    Aborted { t: f64, error: Error },
}

/// Runs `c` into `dir` (created if needed).
pub fn run_experiment(c: &ExperimentConfig, dir: &Path) -> std::result::Result<RunReport, HarnessError> {
    fs::create_dir_all(dir).map_err(Error::from)?;
    let q0 = build_initial(&c.initial, c.sim.grid)?;
    write_atomic(&dir.join(CONFIG_FILE), emit_config(c).as_bytes())?;
    write_atomic(&dir.join(INITIAL_FILE), initial_report(c, &q0)?.as_bytes())?;
    match run(&c.sim, q0, &c.all_snapshot_times()) {
        Ok(out) => {
            write_outputs(dir, &out, 0)?;
            let verdicts = check_series(&out.records);
            Ok(RunReport { output: out, verdicts })
        }
        Err(f) => {
            write_outputs(dir, &f.partial, 0)?;
            Err(HarnessError::Aborted { t: f.partial.final_state.t, error: f.error })
        }
    }
}

fn count_snapshots(dir: &Path) -> Result<usize> {
    let d = dir.join(SNAPSHOT_DIR);
    if !d.exists() {
        return Ok(0);
    }
    let mut n = 0;
    for e in fs::read_dir(d)? {
        let name = e?.file_name().to_string_lossy().into_owned();
        if name.starts_with("q_") && name.ends_with(".bin") {
            n += 1;
        }
    }
    Ok(n)
}

/// Continues the run in `dir` from its checkpoint up to `c.sim.t_end`.
pub fn resume_experiment(c: &ExperimentConfig, dir: &Path) -> std::result::Result<RunReport, HarnessError> {
    let records = read_csv(fs::File::open(dir.join(CSV_FILE)).map_err(Error::from)?)?;
    let cp = dir.join(CHECKPOINT_DIR);
    let solver = Solver::new(c.sim.clone())?;
    let state = if c.sim.evolve_omega_direct {
        let s = read_snapshot(&cp.join("omega.bin"))?;
        solver.state_from_omega(s.field, s.time, s.step.unwrap_or(0))?
    } else {
        let s = read_snapshot(&cp.join("q.bin"))?;
        solver.state_from_q(s.field, s.time, s.step.unwrap_or(0))?
    };
    match records.last() {
        Some(last) if last.t == state.t => {}
        _ => {
            return Err(Error::InvalidConfig(format!(
                "checkpoint at t = {} does not match the last diagnostics row",
                state.t
            ))
            .into())
        }
    }
    write_atomic(&dir.join(CONFIG_FILE), emit_config(c).as_bytes())?;
    let first_index = count_snapshots(dir)?;
    let recorder = Recorder::from_records(&records);
    match continue_run(&solver, state, recorder, records, &c.all_snapshot_times()) {
        Ok(out) => {
            write_outputs(dir, &out, first_index)?;
            let verdicts = check_series(&out.records);
            Ok(RunReport { output: out, verdicts })
        }
        Err(f) => {
            write_outputs(dir, &f.partial, first_index)?;
            Err(HarnessError::Aborted { t: f.partial.final_state.t, error: f.error })
        }
    }
}

/// Replays a finished run directory: integrals and ratios are recomputed from
/// the stored norms, rows at snapshot times are recomputed from the snapshots,
/// and every series check is run on the result.
pub fn check_run_dir(dir: &Path) -> Result<Vec<Verdict>> {
    let c = load_config(&dir.join(CONFIG_FILE))?;
    let records = read_csv(fs::File::open(dir.join(CSV_FILE))?)?;
    let mut verdicts = Vec::new();

    let replayed = replay(&records);
    let mismatch = records.iter().zip(&replayed).position(|(a, b)| a != b);
    verdicts.push(Verdict {
        name: "replay",
        passed: mismatch.is_none(),
        detail: match mismatch {
            None => format!("{} rows reproduced", records.len()),
            Some(k) => format!("row {} disagrees with its recomputed integrals/ratios", k + 1),
        },
    });

    let solver = Solver::new(c.sim.clone())?;
    let (mut matched, mut bad) = (0, Vec::new());
    let prefix = if c.sim.evolve_omega_direct { "omega_" } else { "q_" };
    let mut files: Vec<PathBuf> = match fs::read_dir(dir.join(SNAPSHOT_DIR)) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                let n = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                n.starts_with(prefix) && n.ends_with(".bin")
            })
            .collect(),
        Err(_) => Vec::new(),
    };
    files.sort();
    for path in files {
        let snap = read_snapshot(&path)?;
        let step = snap.step.unwrap_or(0);
        let state = if c.sim.evolve_omega_direct {
            solver.state_from_omega(snap.field, snap.time, step)?
        } else {
            solver.state_from_q(snap.field, snap.time, step)?
        };
        let Some(row) = records.iter().find(|r| r.t == snap.time && r.step == step) else {
            bad.push(format!("{}: no row at t = {}", path.display(), snap.time));
            continue;
        };
        let fresh = DiagnosticsRecord::from_state(&state, row.sup_q_window)?;
        if fresh == row.state_part() {
            matched += 1;
        } else {
            bad.push(format!("{}: recomputed row differs", path.display()));
        }
    }
    verdicts.push(Verdict {
        name: "snapshots",
        passed: bad.is_empty(),
        detail: if bad.is_empty() { format!("{matched} rows recomputed exactly") } else { bad.join("; ") },
    });
    // the checks run on the recomputed series, so a tampered derived column cannot mask a violation
    verdicts.extend(check_series(&replayed));
    Ok(verdicts)
}

pub fn format_verdicts(verdicts: &[Verdict]) -> String {
    let mut s = String::new();
    for v in verdicts {
        let _ = writeln!(s, "{} {:<14} {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    s
}

/// `(u^r, u^z)` of the snapshot at `path` (an `ω` or a `q` field).
pub fn reconstruct(path: &Path, n_theta: usize) -> Result<(ScalarField, ScalarField, f64)> {
    let snap = read_snapshot(path)?;
    let omega = match snap.field.role() {
        Role::OmegaTheta => snap.field,
        Role::QOmegaOverR => omega_from_q(&snap.field),
        other => {
            return Err(Error::WrongRole { expected: "omega_theta or q_omega_over_r", actual: other.to_string() })
        }
    };
    let kt = crate::biot_savart::KernelTable::new(n_theta)?;
    let u = crate::biot_savart::velocity_from_vorticity(&omega, &kt)?;
    Ok((u.u_r, u.u_z, snap.time))
}
