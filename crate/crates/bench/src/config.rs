//! Case files: a TOML description of grid, rock, fluid, sources, time plan
//! and solver settings, resolved against the default physical parameters.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thermoporous::physics::WellGeometry;
use thermoporous::precond::{Decoupling, PreconditionerKind, SchurApprox};
use thermoporous::{
    build_grid, FluidModel64, Model64, NewtonConfig64, RateMode, RockModel64, SourceTerm64, State64, TimeController,
    TimePlan64, STANDARD_GRAVITY,
};

use crate::error::{io_err, Error, Result};
use crate::perm::{self, Slice, SPE10_DIMS};

pub const SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_P_INIT: f64 = 4.1369e5;
pub const DEFAULT_T_INIT: f64 = 288.706;
pub const DEFAULT_POROSITY: f64 = 0.2;
pub const DEFAULT_RHO_R: f64 = 2500.0;
pub const DEFAULT_C_R: f64 = 920.0;
pub const DEFAULT_K_TR: f64 = 1.7295772056;
pub const DEFAULT_K_TF: f64 = 0.15;
pub const DEFAULT_C_V: f64 = 2093.4;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    schema: u32,
    name: Option<String>,
    #[allow(dead_code)]
    description: Option<String>,
    grid: RawGrid,
    #[serde(default)]
    rock: RawRock,
    #[serde(default)]
    fluid: RawFluid,
    #[serde(default)]
    initial: RawInitial,
    #[serde(default)]
    gravity: bool,
    #[serde(default)]
    sources: Vec<RawSource>,
    #[serde(default)]
    time: RawTime,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    preconditioner: RawPrecond,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dims: Vec<usize>,
    lengths: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRock {
    porosity: Option<f64>,
    permeability: Option<Permeability>,
    rho_r: Option<f64>,
    c_r: Option<f64>,
    k_tr: Option<f64>,
}

/// How the permeability field is obtained.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Permeability {
    Uniform {
        value: f64,
    },
    Anisotropic {
        kx: f64,
        ky: f64,
        kz: Option<f64>,
    },
    /// Plain-text millidarcy values; `path` is relative to the case file.
    File {
        path: PathBuf,
        #[serde(default)]
        layer: usize,
        file_dims: Option<[usize; 3]>,
        #[serde(default)]
        offset: [usize; 2],
        #[serde(default = "one")]
        scale: f64,
    },
    Lognormal {
        median: f64,
        sigma: f64,
        seed: u64,
        #[serde(default = "one")]
        kz_ratio: f64,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFluid {
    gamma_sg: Option<f64>,
    c_v: Option<f64>,
    k_tf: Option<f64>,
    compressibility_per_bar: Option<f64>,
    beta: Option<f64>,
    beta_sign: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    p: Option<f64>,
    t: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKindSpec {
    Heater,
    Injector,
    Producer,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeacemanSpec {
    pub p_bh: f64,
    pub q_max: f64,
    pub r_w: Option<f64>,
    pub h: Option<f64>,
    pub d_x: Option<f64>,
    pub d_y: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    kind: SourceKindSpec,
    /// Positions as fractions of the domain lengths, one source each.
    at: Vec<Vec<f64>>,
    u: Option<f64>,
    temperature: Option<f64>,
    q: Option<f64>,
    peaceman: Option<PeacemanSpec>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    steps: Option<Vec<f64>>,
    adaptive: Option<RawAdaptive>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdaptive {
    dt0: f64,
    t_end: f64,
    dt_min: f64,
    dt_max: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    rtol_f: Option<f64>,
    rtol_step: Option<f64>,
    atol_f: Option<f64>,
    max_newton: Option<usize>,
    gmres_rtol: Option<f64>,
    gmres_restart: Option<usize>,
    gmres_maxit: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrecond {
    kind: Option<String>,
    schur: Option<String>,
    decoupling: Option<String>,
    strength_threshold: Option<f64>,
    coarse_threshold: Option<usize>,
}

/// One source in resolved form, still positioned by domain fractions so
/// that it survives grid refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub kind: SourceKindSpec,
    pub at: Vec<f64>,
    pub u: f64,
    pub temperature: f64,
    pub rate: Option<RateMode<f64>>,
}

/// A fully resolved case.
#[derive(Debug, Clone)]
pub struct CaseSpec {
    pub name: String,
    pub dims: Vec<usize>,
    pub lengths: Vec<f64>,
    pub permeability: Permeability,
    /// Directory that relative file paths are resolved against.
    pub base_dir: PathBuf,
    pub porosity: f64,
    pub fluid: FluidModel64,
    pub rho_r: f64,
    pub c_r: f64,
    pub k_tr: f64,
    pub p_init: f64,
    pub t_init: f64,
    pub gravity: bool,
    pub sources: Vec<SourceSpec>,
    pub plan: TimePlan64,
    pub solver: NewtonConfig64,
}

pub fn load_case(path: &Path) -> Result<CaseSpec> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "case".into());
    let raw: RawCase = toml::from_str(&text).map_err(|source| Error::Toml { path: path.to_path_buf(), source })?;
    let spec = resolve(raw, base, stem).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    if let Permeability::File { path: p, .. } = &spec.permeability {
        let full = spec.base_dir.join(p);
        if !full.is_file() {
            return Err(Error::Config(format!("{}: permeability file {} not found", path.display(), full.display())));
        }
    }
    Ok(spec)
}

/// Parses a case from a string; relative paths resolve against `base_dir`.
pub fn parse_case(text: &str, base_dir: &Path, default_name: &str) -> Result<CaseSpec> {
    let raw: RawCase =
        toml::from_str(text).map_err(|source| Error::Toml { path: PathBuf::from("<string>"), source })?;
    resolve(raw, base_dir.to_path_buf(), default_name.to_string())
}

fn cfg(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn resolve(raw: RawCase, base_dir: PathBuf, default_name: String) -> Result<CaseSpec> {
    if raw.schema != SCHEMA_VERSION {
        return Err(cfg(format!("unsupported schema version {} (expected {SCHEMA_VERSION})", raw.schema)));
    }
    let nd = raw.grid.dims.len();
    if nd != 2 && nd != 3 {
        return Err(cfg(format!("grid.dims must have 2 or 3 entries, got {nd}")));
    }
    let lengths = raw.grid.lengths.unwrap_or_else(|| vec![20.0; nd]);
    if lengths.len() != nd {
        return Err(cfg(format!("grid.lengths has {} entries but grid.dims has {nd}", lengths.len())));
    }

    let mut fluid = FluidModel64::heavy_oil(raw.fluid.gamma_sg.unwrap_or(1.0));
    fluid.c_v = raw.fluid.c_v.unwrap_or(DEFAULT_C_V);
    fluid.k_tf = raw.fluid.k_tf.unwrap_or(DEFAULT_K_TF);
    if let Some(c) = raw.fluid.compressibility_per_bar {
        fluid = fluid.with_compressibility_per_bar(c);
    }
    if let Some(b) = raw.fluid.beta {
        fluid.beta = b;
    }
    if let Some(s) = raw.fluid.beta_sign {
        fluid.beta_sign = s;
    }
    fluid.validate()?;

    let t_init = raw.initial.t.unwrap_or(DEFAULT_T_INIT);
    let mut sources = Vec::new();
    for (k, s) in raw.sources.into_iter().enumerate() {
        let ctx = |m: &str| cfg(format!("sources[{k}]: {m}"));
        if s.at.is_empty() {
            return Err(ctx("needs at least one position in 'at'"));
        }
        for pos in &s.at {
            if pos.len() != nd || pos.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(ctx("positions need one fraction in [0, 1] per grid axis"));
            }
        }
        let rate = match s.kind {
            SourceKindSpec::Heater => {
                if s.q.is_some() || s.peaceman.is_some() {
                    return Err(ctx("heaters take 'u' and 'temperature', not a rate"));
                }
                if s.u.is_none() {
                    return Err(ctx("heater needs 'u'"));
                }
                None
            }
            _ => {
                if s.u.is_some() {
                    return Err(ctx("wells do not take 'u'"));
                }
                match (s.q, &s.peaceman) {
                    (Some(q), None) => Some(RateMode::Fixed { q }),
                    (None, Some(pm)) => {
                        let d = WellGeometry::default();
                        let geometry = WellGeometry {
                            r_w: pm.r_w.unwrap_or(d.r_w),
                            h: pm.h.unwrap_or(d.h),
                            d_x: pm.d_x.unwrap_or(d.d_x),
                            d_y: pm.d_y.unwrap_or(d.d_y),
                        };
                        Some(RateMode::Peaceman { p_bh: pm.p_bh, q_max: pm.q_max, geometry })
                    }
                    _ => return Err(ctx("wells need exactly one of 'q' or 'peaceman'")),
                }
            }
        };
        if s.kind == SourceKindSpec::Producer && s.temperature.is_some() {
            return Err(ctx("producers take the cell temperature; drop 'temperature'"));
        }
        for at in s.at {
            sources.push(SourceSpec {
                kind: s.kind,
                at,
                u: s.u.unwrap_or(0.0),
                temperature: s.temperature.unwrap_or(422.039),
                rate,
            });
        }
    }

    let plan = match (raw.time.steps, raw.time.adaptive) {
        (Some(steps), None) => {
            if steps.is_empty() || steps.iter().any(|&dt| !(dt > 0.0)) {
                return Err(cfg("time.steps must be a non-empty list of positive step lengths"));
            }
            TimePlan64::Fixed(steps)
        }
        (None, Some(a)) => {
            let ctrl = TimeController::new(a.dt0, a.t_end, a.dt_min, a.dt_max);
            ctrl.validate()?;
            TimePlan64::Adaptive(ctrl)
        }
        (None, None) => TimePlan64::Fixed(vec![864000.0; 2]),
        (Some(_), Some(_)) => return Err(cfg("give either time.steps or time.adaptive, not both")),
    };

    let mut solver = NewtonConfig64::default();
    let rs = raw.solver;
    solver.rtol_f = rs.rtol_f.unwrap_or(solver.rtol_f);
    solver.rtol_step = rs.rtol_step.unwrap_or(solver.rtol_step);
    solver.atol_f = rs.atol_f.unwrap_or(solver.atol_f);
    solver.max_newton = rs.max_newton.unwrap_or(solver.max_newton);
    solver.gmres_rtol = rs.gmres_rtol.unwrap_or(solver.gmres_rtol);
    solver.gmres_restart = rs.gmres_restart.unwrap_or(solver.gmres_restart);
    solver.gmres_maxit = rs.gmres_maxit.unwrap_or(solver.gmres_maxit);
    let rp = raw.preconditioner;
    if let Some(k) = rp.kind {
        solver.precond.kind = k.parse::<PreconditionerKind>()?;
    }
    if let Some(s) = rp.schur {
        solver.precond.schur = s.parse::<SchurApprox>()?;
    }
    if let Some(d) = rp.decoupling {
        solver.precond.decoupling = d.parse::<Decoupling>()?;
    }
    if let Some(t) = rp.strength_threshold {
        solver.precond.amg.strength_threshold = t;
    }
    if let Some(c) = rp.coarse_threshold {
        solver.precond.amg.coarse_threshold = c;
    }
    solver.validate()?;

    let spec = CaseSpec {
        name: raw.name.unwrap_or(default_name),
        dims: raw.grid.dims,
        lengths,
        permeability: raw.rock.permeability.unwrap_or(Permeability::Uniform { value: 3e-13 }),
        base_dir,
        porosity: raw.rock.porosity.unwrap_or(DEFAULT_POROSITY),
        fluid,
        rho_r: raw.rock.rho_r.unwrap_or(DEFAULT_RHO_R),
        c_r: raw.rock.c_r.unwrap_or(DEFAULT_C_R),
        k_tr: raw.rock.k_tr.unwrap_or(DEFAULT_K_TR),
        p_init: raw.initial.p.unwrap_or(DEFAULT_P_INIT),
        t_init,
        gravity: raw.gravity,
        sources,
        plan,
        solver,
    };
    if let Permeability::File { .. } = spec.permeability {
        if nd != 2 {
            return Err(cfg("file permeability is only supported on 2D grids"));
        }
    }
    Ok(spec)
}

impl CaseSpec {
    pub fn n_cells(&self) -> usize {
        self.dims.iter().product()
    }

    /// Same case on an `n` cells per axis grid.
    pub fn with_grid(mut self, n: usize) -> Self {
        self.dims = vec![n; self.dims.len()];
        self
    }

    pub fn permeability_field(&self) -> Result<Vec<[f64; 3]>> {
        let n = self.n_cells();
        let field = match &self.permeability {
            Permeability::Uniform { value } => vec![[*value; 3]; n],
            Permeability::Anisotropic { kx, ky, kz } => vec![[*kx, *ky, kz.unwrap_or(*ky)]; n],
            Permeability::File { path, layer, file_dims, offset, scale } => {
                let slice = Slice { file_dims: file_dims.unwrap_or(SPE10_DIMS), layer: *layer, offset: *offset };
                let k = perm::load_permeability_file(&self.base_dir.join(path), &slice, [self.dims[0], self.dims[1]])?;
                k.into_iter().map(|v| v.map(|x| x * scale)).collect()
            }
            Permeability::Lognormal { median, sigma, seed, kz_ratio, scale } => {
                perm::lognormal_field(n, median * scale, *sigma, *kz_ratio, *seed)?
            }
        };
        Ok(field)
    }

    pub fn build_model(&self) -> Result<Model64> {
        let grid = build_grid(&self.dims, &self.lengths)?;
        let n = grid.n_cells();
        let mut rock = RockModel64::uniform(n, [1.0; 3], self.porosity);
        rock.perm = self.permeability_field()?;
        rock.rho_r = self.rho_r;
        rock.c_r = self.c_r;
        rock.k_tr = self.k_tr;
        let mut sources = Vec::with_capacity(self.sources.len());
        for s in &self.sources {
            let x: Vec<f64> = s.at.iter().zip(&self.lengths).map(|(f, l)| f * l).collect();
            let cell = grid.locate(&x)?;
            sources.push(match (s.kind, s.rate) {
                (SourceKindSpec::Heater, _) => SourceTerm64::heater(cell, s.u, s.temperature),
                (SourceKindSpec::Injector, Some(rate)) => SourceTerm64::injector(cell, rate, s.temperature),
                (SourceKindSpec::Producer, Some(rate)) => SourceTerm64::producer(cell, rate),
                _ => unreachable!("wells always carry a rate after resolution"),
            });
        }
        let g = if self.gravity { STANDARD_GRAVITY } else { 0.0 };
        Ok(Model64::new(grid, self.fluid.clone(), rock, sources)?.with_gravity(g))
    }

    pub fn initial_state(&self) -> State64 {
        State64::uniform(self.n_cells(), self.p_init, self.t_init)
    }
}
