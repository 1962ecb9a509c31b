//! Backward-Euler cell-centered finite volumes with two-point fluxes for the
//! coupled mass and energy balances.
//!
//! Residual rows are ordered per cell; the mass balance is in kg/s and the
//! energy balance in W. Each interior facet contributes `+F` to its "+" cell
//! (`cell_a`) and `-F` to `cell_b`, so fluxes telescope over closed domains.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{matrix_market, BlockVector, CsrMatrix, LinearOperator};
use crate::mesh::Grid;
use crate::physics::{source_contributions, FluidModel, FluidProps, RockModel, SourceKind, SourceTerm};
use crate::scalar::Real;

pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Per-cell pressure (Pa) and temperature (K).
#[derive(Debug, Clone, PartialEq)]
pub struct State<T> {
    pub p: Vec<T>,
    pub t: Vec<T>,
}

impl<T: Real> State<T> {
    pub fn new(p: Vec<T>, t: Vec<T>) -> Result<Self> {
        if p.len() != t.len() {
            return Err(Error::DimensionMismatch { expected: p.len(), found: t.len(), context: "state temperature" });
        }
        Ok(State { p, t })
    }

    pub fn uniform(n_cells: usize, p: T, t: T) -> Self {
        State { p: vec![p; n_cells], t: vec![t; n_cells] }
    }

    pub fn n_cells(&self) -> usize {
        self.p.len()
    }

    pub fn check(&self, n_cells: usize) -> Result<()> {
        if self.p.len() != n_cells {
            return Err(Error::DimensionMismatch { expected: n_cells, found: self.p.len(), context: "state pressure" });
        }
        if self.t.len() != n_cells {
            return Err(Error::DimensionMismatch { expected: n_cells, found: self.t.len(), context: "state temperature" });
        }
        if let Some(i) = self.p.iter().chain(&self.t).position(|v| !v.is_finite()) {
            return Err(Error::OutOfDomain(format!("non-finite state entry at index {i}")));
        }
        Ok(())
    }

    /// `self + alpha * dx`.
    pub fn updated(&self, alpha: T, dx: &BlockVector<T>) -> Self {
        State {
            p: self.p.iter().zip(&dx.p).map(|(&x, &d)| x + alpha * d).collect(),
            t: self.t.iter().zip(&dx.t).map(|(&x, &d)| x + alpha * d).collect(),
        }
    }
}

/// Facet coefficients that do not depend on the state.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmissibility<T> {
    /// `area / distance` per facet.
    pub geometric: Vec<T>,
    /// Harmonic mean of the two cells' permeability along the facet normal.
    pub permeability: Vec<T>,
    /// Harmonic mean of the two cells' bulk thermal conductivity.
    pub conductivity: Vec<T>,
}

pub fn harmonic_mean<T: Real>(a: T, b: T) -> T {
    let s = a + b;
    if s == T::zero() {
        T::zero()
    } else {
        T::lit(2.0) * a * b / s
    }
}

pub fn transmissibilities<T: Real>(grid: &Grid<T>, fluid: &FluidModel<T>, rock: &RockModel<T>) -> Transmissibility<T> {
    let facets = grid.facets();
    let mut out = Transmissibility {
        geometric: Vec::with_capacity(facets.len()),
        permeability: Vec::with_capacity(facets.len()),
        conductivity: Vec::with_capacity(facets.len()),
    };
    for f in facets {
        let ax = f.normal_axis;
        out.geometric.push(f.geometric_factor());
        out.permeability.push(harmonic_mean(rock.perm[f.cell_a][ax], rock.perm[f.cell_b][ax]));
        out.conductivity.push(harmonic_mean(
            rock.thermal_conductivity(f.cell_a, fluid),
            rock.thermal_conductivity(f.cell_b, fluid),
        ));
    }
    out
}

/// Prescribed pressure and temperature on a boundary facet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletFacet<T> {
    /// Index into [`Grid::boundary_facets`].
    pub boundary_facet: usize,
    pub p: T,
    pub t: T,
}

/// CSR pattern of the TPFA stencil with precomputed storage slots.
#[derive(Debug, Clone)]
struct TpfaPattern<T> {
    template: CsrMatrix<T>,
    diag: Vec<usize>,
    // per facet: (a,a), (a,b), (b,a), (b,b)
    slots: Vec<[usize; 4]>,
}

impl<T: Real> TpfaPattern<T> {
    fn new(grid: &Grid<T>) -> Result<Self> {
        let n = grid.n_cells();
        let mut trip = Vec::with_capacity(n + 2 * grid.facets().len());
        for i in 0..n {
            trip.push((i, i, T::zero()));
        }
        for f in grid.facets() {
            trip.push((f.cell_a, f.cell_b, T::zero()));
            trip.push((f.cell_b, f.cell_a, T::zero()));
        }
        let template = CsrMatrix::from_triplets(n, n, &trip)?;
        let pos = |i, j| template.position(i, j).expect("stencil entry present");
        let diag = (0..n).map(|i| pos(i, i)).collect();
        let slots = grid
            .facets()
            .iter()
            .map(|f| [pos(f.cell_a, f.cell_a), pos(f.cell_a, f.cell_b), pos(f.cell_b, f.cell_a), pos(f.cell_b, f.cell_b)])
            .collect();
        Ok(TpfaPattern { template, diag, slots })
    }

    fn zero_values(&self) -> Vec<T> {
        vec![T::zero(); self.template.nnz()]
    }
}

/// Everything needed to assemble the discrete balances on one grid.
#[derive(Debug, Clone)]
pub struct Model<T> {
    pub grid: Grid<T>,
    pub fluid: FluidModel<T>,
    pub rock: RockModel<T>,
    pub sources: Vec<SourceTerm<T>>,
    /// Gravitational acceleration along the last axis (z up); zero disables it.
    pub gravity: T,
    pub dirichlet: Vec<DirichletFacet<T>>,
    trans: Transmissibility<T>,
    pattern: TpfaPattern<T>,
}

impl<T: Real> Model<T> {
    pub fn new(grid: Grid<T>, fluid: FluidModel<T>, rock: RockModel<T>, sources: Vec<SourceTerm<T>>) -> Result<Self> {
        fluid.validate()?;
        rock.validate()?;
        let n = grid.n_cells();
        if rock.n_cells() != n {
            return Err(Error::DimensionMismatch { expected: n, found: rock.n_cells(), context: "rock properties" });
        }
        for s in &sources {
            if s.cell >= n {
                return Err(Error::CellOutOfRange { cell: s.cell, n_cells: n });
            }
        }
        let trans = transmissibilities(&grid, &fluid, &rock);
        let pattern = TpfaPattern::new(&grid)?;
        Ok(Model { grid, fluid, rock, sources, gravity: T::zero(), dirichlet: Vec::new(), trans, pattern })
    }

    pub fn with_gravity(mut self, g: T) -> Self {
        self.gravity = g;
        self
    }

    pub fn with_dirichlet(mut self, bc: Vec<DirichletFacet<T>>) -> Result<Self> {
        let nb = self.grid.boundary_facets().len();
        if let Some(b) = bc.iter().find(|b| b.boundary_facet >= nb) {
            return Err(Error::InvalidGrid(format!("boundary facet {} out of range ({nb})", b.boundary_facet)));
        }
        self.dirichlet = bc;
        Ok(self)
    }

    pub fn n_cells(&self) -> usize {
        self.grid.n_cells()
    }

    pub fn transmissibility(&self) -> &Transmissibility<T> {
        &self.trans
    }

    /// Empty matrix with the TPFA stencil of this grid.
    pub fn stencil(&self) -> &CsrMatrix<T> {
        &self.pattern.template
    }

    fn gravity_normal(&self, axis: usize, sign: i8) -> T {
        if axis == self.grid.vertical_axis() && self.gravity != T::zero() {
            self.gravity * T::lit(f64::from(sign))
        } else {
            T::zero()
        }
    }

    fn cell_props(&self, state: &State<T>) -> Result<Vec<FluidProps<T>>> {
        state.p.iter().zip(&state.t).map(|(&p, &t)| self.fluid.props(p, t)).collect()
    }

    /// Mass flux through interior facet `facet` from `cell_a` to `cell_b`
    /// (kg/s) and the upwind cell.
    pub fn darcy_flux(&self, facet: usize, state: &State<T>) -> Result<(T, usize)> {
        let f = self.grid.facets().get(facet).ok_or(Error::CellOutOfRange { cell: facet, n_cells: self.grid.facets().len() })?;
        let (a, b) = (f.cell_a, f.cell_b);
        let pa = self.fluid.props(state.p[a], state.t[a])?;
        let pb = self.fluid.props(state.p[b], state.t[b])?;
        let k = self.facet_kernel(facet, Side { p: state.p[a], t: state.t[a], props: pa }, Side { p: state.p[b], t: state.t[b], props: pb });
        Ok((k.flux, if k.upwind_a { a } else { b }))
    }

    fn facet_kernel(&self, facet: usize, a: Side<T>, b: Side<T>) -> Kernel<T> {
        let f = &self.grid.facets()[facet];
        let gn = self.gravity_normal(f.normal_axis, f.normal_sign);
        flux_kernel(
            self.trans.permeability[facet] * f.area,
            self.trans.conductivity[facet] * self.trans.geometric[facet],
            f.distance,
            gn,
            self.fluid.c_v,
            a,
            b,
        )
    }

    fn dirichlet_kernel(&self, bc: &DirichletFacet<T>, cell: Side<T>) -> Result<(usize, Kernel<T>)> {
        let bf = &self.grid.boundary_facets()[bc.boundary_facet];
        let ghost = Side { p: bc.p, t: bc.t, props: self.fluid.props(bc.p, bc.t)? };
        let gn = self.gravity_normal(bf.normal_axis, bf.outward_sign);
        let k_cell = self.rock.perm[bf.cell][bf.normal_axis];
        let kt = self.rock.thermal_conductivity(bf.cell, &self.fluid);
        let kern = flux_kernel(k_cell * bf.area, kt * bf.area / bf.distance, bf.distance, gn, self.fluid.c_v, cell, ghost);
        Ok((bf.cell, kern))
    }
}

#[derive(Debug, Clone, Copy)]
struct Side<T> {
    p: T,
    t: T,
    props: FluidProps<T>,
}

/// Mass flux `F` and energy flux `H` through one facet with derivatives
/// with respect to both sides (upwind direction frozen).
#[derive(Debug, Clone, Copy)]
struct Kernel<T> {
    flux: T,
    upwind_a: bool,
    df: [T; 4],
    heat: T,
    dh: [T; 4],
}

// derivative order: [p_a, T_a, p_b, T_b]
fn flux_kernel<T: Real>(k_area: T, cond: T, dist: T, g_nz: T, c_v: T, a: Side<T>, b: Side<T>) -> Kernel<T> {
    let half = T::lit(0.5);
    let rho_avg = half * (a.props.rho + b.props.rho);
    let drive = (a.p - b.p) / dist - rho_avg * g_nz;
    let upwind_a = drive >= T::zero();
    let up = if upwind_a { &a } else { &b };
    let lam = up.props.lambda();
    let flux = k_area * lam * drive;

    let d_drive = [
        T::one() / dist - half * a.props.rho_p * g_nz,
        -half * a.props.rho_t * g_nz,
        -T::one() / dist - half * b.props.rho_p * g_nz,
        -half * b.props.rho_t * g_nz,
    ];
    let mut d_lam = [T::zero(); 4];
    let off = if upwind_a { 0 } else { 2 };
    d_lam[off] = up.props.lambda_p();
    d_lam[off + 1] = up.props.lambda_t();
    let mut df = [T::zero(); 4];
    for k in 0..4 {
        df[k] = k_area * (d_lam[k] * drive + lam * d_drive[k]);
    }

    let t_up = up.t;
    let heat = c_v * flux * t_up + cond * (a.t - b.t);
    let mut dh = [T::zero(); 4];
    for k in 0..4 {
        dh[k] = c_v * df[k] * t_up;
    }
    dh[off + 1] += c_v * flux;
    dh[1] += cond;
    dh[3] -= cond;
    Kernel { flux, upwind_a, df, heat, dh }
}

/// Jacobian blocks and right-hand side `b = -G` of one Newton system.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockJacobian<T> {
    pub app: CsrMatrix<T>,
    pub apt: CsrMatrix<T>,
    pub atp: CsrMatrix<T>,
    pub att: CsrMatrix<T>,
    pub bp: Vec<T>,
    pub bt: Vec<T>,
}

/// Unknown ordering used when the block system is flattened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// `[p_0..p_n, T_0..T_n]`
    Stacked,
    /// `[p_0, T_0, p_1, T_1, ...]`
    Interleaved,
}

impl Layout {
    pub fn index(self, n_cells: usize, cell: usize, temperature: bool) -> usize {
        match self {
            Layout::Stacked => cell + if temperature { n_cells } else { 0 },
            Layout::Interleaved => 2 * cell + usize::from(temperature),
        }
    }

    pub fn flatten<T: Real>(self, v: &BlockVector<T>) -> Vec<T> {
        let n = v.n_cells();
        let mut out = vec![T::zero(); 2 * n];
        for i in 0..n {
            out[self.index(n, i, false)] = v.p[i];
            out[self.index(n, i, true)] = v.t[i];
        }
        out
    }

    pub fn split<T: Real>(self, x: &[T]) -> BlockVector<T> {
        let n = x.len() / 2;
        let mut v = BlockVector::zeros(n);
        for i in 0..n {
            v.p[i] = x[self.index(n, i, false)];
            v.t[i] = x[self.index(n, i, true)];
        }
        v
    }
}

impl<T: Real> BlockJacobian<T> {
    /// Builds a block system, checking that all sizes agree.
    pub fn new(
        app: CsrMatrix<T>,
        apt: CsrMatrix<T>,
        atp: CsrMatrix<T>,
        att: CsrMatrix<T>,
        bp: Vec<T>,
        bt: Vec<T>,
    ) -> Result<Self> {
        let n = app.n_rows();
        for (m, name) in [(&app, "App"), (&apt, "ApT"), (&atp, "ATp"), (&att, "ATT")] {
            if m.n_rows() != n || m.n_cols() != n {
                return Err(Error::DimensionMismatch { expected: n, found: m.n_rows().max(m.n_cols()), context: name });
            }
        }
        if bp.len() != n || bt.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: bp.len().max(bt.len()), context: "block right-hand side" });
        }
        Ok(BlockJacobian { app, apt, atp, att, bp, bt })
    }

    pub fn n_cells(&self) -> usize {
        self.app.n_rows()
    }

    pub fn rhs(&self) -> BlockVector<T> {
        BlockVector { p: self.bp.clone(), t: self.bt.clone() }
    }

    /// `[App xp + ApT xT; ATp xp + ATT xT]`.
    pub fn block_apply(&self, x: &BlockVector<T>) -> Result<BlockVector<T>> {
        let n = self.n_cells();
        if x.p.len() != n || x.t.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: x.p.len().max(x.t.len()), context: "block apply" });
        }
        let mut y = BlockVector::zeros(n);
        self.app.mul_into(&x.p, &mut y.p);
        self.apt.mul_add_into(&x.t, &mut y.p);
        self.atp.mul_into(&x.p, &mut y.t);
        self.att.mul_add_into(&x.t, &mut y.t);
        Ok(y)
    }

    /// The full `2n x 2n` matrix in the given unknown ordering.
    pub fn to_csr(&self, layout: Layout) -> CsrMatrix<T> {
        let n = self.n_cells();
        let mut trip = Vec::with_capacity(self.app.nnz() * 4);
        for (m, rt, ct) in [(&self.app, false, false), (&self.apt, false, true), (&self.atp, true, false), (&self.att, true, true)] {
            for i in 0..n {
                let (cols, vals) = m.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    trip.push((layout.index(n, i, rt), layout.index(n, j, ct), v));
                }
            }
        }
        CsrMatrix::from_triplets(2 * n, 2 * n, &trip).expect("indices within range")
    }

    /// Writes `App.mtx`, `ApT.mtx`, `ATp.mtx` and `ATT.mtx` into `dir`.
    pub fn dump_matrix_market(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (m, name) in [(&self.app, "App"), (&self.apt, "ApT"), (&self.atp, "ATp"), (&self.att, "ATT")] {
            let file = std::fs::File::create(dir.join(format!("{name}.mtx")))?;
            matrix_market::write(m, std::io::BufWriter::new(file))?;
        }
        Ok(())
    }
}

/// The block matrix acting on stacked `[p; T]` vectors.
impl<T: Real> LinearOperator<T> for BlockJacobian<T> {
    fn dim(&self) -> usize {
        2 * self.n_cells()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        let n = self.n_cells();
        let (xp, xt) = x.split_at(n);
        let (yp, yt) = y.split_at_mut(n);
        self.app.mul_into(xp, yp);
        self.apt.mul_add_into(xt, yp);
        self.atp.mul_into(xp, yt);
        self.att.mul_add_into(xt, yt);
    }
}

fn check_inputs<T: Real>(model: &Model<T>, new: &State<T>, old: &State<T>, dt: T) -> Result<()> {
    if !(dt > T::zero()) {
        return Err(Error::OutOfDomain(format!("time step must be positive, got {dt}")));
    }
    new.check(model.n_cells())?;
    old.check(model.n_cells())
}

/// Discrete residual `G = [G_mass; G_energy]` of one backward-Euler step.
pub fn assemble_residual<T: Real>(model: &Model<T>, new: &State<T>, old: &State<T>, dt: T) -> Result<BlockVector<T>> {
    check_inputs(model, new, old, dt)?;
    let n = model.n_cells();
    let fluid = &model.fluid;
    let rock = &model.rock;
    let vol = model.grid.cell_volumes();
    let props = model.cell_props(new)?;
    let mut g = BlockVector::zeros(n);

    for i in 0..n {
        let phi = rock.poro[i];
        let rho = props[i].rho;
        let rho_old = fluid.density(old.p[i], old.t[i]);
        let w = vol[i] / dt;
        g.p[i] = phi * (rho - rho_old) * w;
        g.t[i] = (phi * fluid.c_v * (rho * new.t[i] - rho_old * old.t[i])
            + (T::one() - phi) * rock.rho_r * rock.c_r * (new.t[i] - old.t[i]))
            * w;
    }
    for (k, f) in model.grid.facets().iter().enumerate() {
        let (a, b) = (f.cell_a, f.cell_b);
        let kern = model.facet_kernel(
            k,
            Side { p: new.p[a], t: new.t[a], props: props[a] },
            Side { p: new.p[b], t: new.t[b], props: props[b] },
        );
        g.p[a] += kern.flux;
        g.p[b] -= kern.flux;
        g.t[a] += kern.heat;
        g.t[b] -= kern.heat;
    }
    for bc in &model.dirichlet {
        let c = model.grid.boundary_facets()[bc.boundary_facet].cell;
        let (_, kern) = model.dirichlet_kernel(bc, Side { p: new.p[c], t: new.t[c], props: props[c] })?;
        g.p[c] += kern.flux;
        g.t[c] += kern.heat;
    }
    for s in &model.sources {
        let c = s.cell;
        let e = source_contributions(s, new.p[c], new.t[c], fluid, rock.perm[c], vol[c])?;
        g.p[c] -= e.f * vol[c];
        g.t[c] -= e.f_t * vol[c];
    }
    Ok(g)
}

/// Analytic Jacobian of [`assemble_residual`] with the upwind direction
/// frozen at `new`, together with `b = -G`.
pub fn assemble_jacobian<T: Real>(model: &Model<T>, new: &State<T>, old: &State<T>, dt: T) -> Result<BlockJacobian<T>> {
    let g = assemble_residual(model, new, old, dt)?;
    let n = model.n_cells();
    let fluid = &model.fluid;
    let rock = &model.rock;
    let vol = model.grid.cell_volumes();
    let props = model.cell_props(new)?;
    let pat = &model.pattern;
    let mut pp = pat.zero_values();
    let mut pt = pat.zero_values();
    let mut tp = pat.zero_values();
    let mut tt = pat.zero_values();

    for i in 0..n {
        let d = pat.diag[i];
        let phi = rock.poro[i];
        let w = vol[i] / dt;
        let pr = &props[i];
        pp[d] += phi * pr.rho_p * w;
        pt[d] += phi * pr.rho_t * w;
        tp[d] += phi * fluid.c_v * pr.rho_p * new.t[i] * w;
        tt[d] += (phi * fluid.c_v * (pr.rho + pr.rho_t * new.t[i]) + (T::one() - phi) * rock.rho_r * rock.c_r) * w;
    }
    for (k, f) in model.grid.facets().iter().enumerate() {
        let (a, b) = (f.cell_a, f.cell_b);
        let kern = model.facet_kernel(
            k,
            Side { p: new.p[a], t: new.t[a], props: props[a] },
            Side { p: new.p[b], t: new.t[b], props: props[b] },
        );
        let [saa, sab, sba, sbb] = pat.slots[k];
        pp[saa] += kern.df[0];
        pt[saa] += kern.df[1];
        pp[sab] += kern.df[2];
        pt[sab] += kern.df[3];
        pp[sba] -= kern.df[0];
        pt[sba] -= kern.df[1];
        pp[sbb] -= kern.df[2];
        pt[sbb] -= kern.df[3];

        tp[saa] += kern.dh[0];
        tt[saa] += kern.dh[1];
        tp[sab] += kern.dh[2];
        tt[sab] += kern.dh[3];
        tp[sba] -= kern.dh[0];
        tt[sba] -= kern.dh[1];
        tp[sbb] -= kern.dh[2];
        tt[sbb] -= kern.dh[3];
    }
    for bc in &model.dirichlet {
        let c = model.grid.boundary_facets()[bc.boundary_facet].cell;
        let (_, kern) = model.dirichlet_kernel(bc, Side { p: new.p[c], t: new.t[c], props: props[c] })?;
        let d = pat.diag[c];
        pp[d] += kern.df[0];
        pt[d] += kern.df[1];
        tp[d] += kern.dh[0];
        tt[d] += kern.dh[1];
    }
    for s in &model.sources {
        let c = s.cell;
        let e = source_contributions(s, new.p[c], new.t[c], fluid, rock.perm[c], vol[c])?;
        let d = pat.diag[c];
        pp[d] -= e.df_dp * vol[c];
        pt[d] -= e.df_dt * vol[c];
        tp[d] -= e.dft_dp * vol[c];
        tt[d] -= e.dft_dt * vol[c];
    }

    let t = &pat.template;
    Ok(BlockJacobian {
        app: t.with_values(pp),
        apt: t.with_values(pt),
        atp: t.with_values(tp),
        att: t.with_values(tt),
        bp: g.p.into_iter().map(|v| -v).collect(),
        bt: g.t.into_iter().map(|v| -v).collect(),
    })
}

/// Sparse approximation of the temperature Schur complement: accumulation,
/// upwinded advection in the frozen pressure field, conduction, heaters and
/// producers.
pub fn assemble_schur_approx<T: Real>(model: &Model<T>, new: &State<T>, dt: T) -> Result<CsrMatrix<T>> {
    if !(dt > T::zero()) {
        return Err(Error::OutOfDomain(format!("time step must be positive, got {dt}")));
    }
    new.check(model.n_cells())?;
    let n = model.n_cells();
    let fluid = &model.fluid;
    let rock = &model.rock;
    let vol = model.grid.cell_volumes();
    let props = model.cell_props(new)?;
    let pat = &model.pattern;
    let mut s = pat.zero_values();
    let cv = fluid.c_v;

    for i in 0..n {
        let phi = rock.poro[i];
        s[pat.diag[i]] += (phi * cv * props[i].rho + (T::one() - phi) * rock.rho_r * rock.c_r) * vol[i] / dt;
    }
    for (k, f) in model.grid.facets().iter().enumerate() {
        let (a, b) = (f.cell_a, f.cell_b);
        let kern = model.facet_kernel(
            k,
            Side { p: new.p[a], t: new.t[a], props: props[a] },
            Side { p: new.p[b], t: new.t[b], props: props[b] },
        );
        let [saa, sab, sba, sbb] = pat.slots[k];
        let adv = cv * kern.flux;
        if kern.upwind_a {
            s[saa] += adv;
            s[sba] -= adv;
        } else {
            s[sab] += adv;
            s[sbb] -= adv;
        }
        let cond = model.trans.conductivity[k] * model.trans.geometric[k];
        s[saa] += cond;
        s[sab] -= cond;
        s[sba] -= cond;
        s[sbb] += cond;
    }
    for bc in &model.dirichlet {
        let c = model.grid.boundary_facets()[bc.boundary_facet].cell;
        let (_, kern) = model.dirichlet_kernel(bc, Side { p: new.p[c], t: new.t[c], props: props[c] })?;
        let bf = &model.grid.boundary_facets()[bc.boundary_facet];
        let d = pat.diag[c];
        if kern.upwind_a {
            s[d] += cv * kern.flux;
        }
        s[d] += rock.thermal_conductivity(c, fluid) * bf.area / bf.distance;
    }
    for src in &model.sources {
        let c = src.cell;
        let d = pat.diag[c];
        match src.kind {
            SourceKind::Heater { u, .. } => s[d] += u,
            SourceKind::Producer => {
                let e = source_contributions(src, new.p[c], new.t[c], fluid, rock.perm[c], vol[c])?;
                s[d] -= cv * e.f * vol[c];
            }
            SourceKind::Injector { .. } => {}
        }
    }
    Ok(pat.template.with_values(s))
}

/// Total fluid mass `sum phi rho |E|` (kg, per meter of depth in 2D).
pub fn total_mass<T: Real>(model: &Model<T>, state: &State<T>) -> T {
    (0..model.n_cells())
        .map(|i| model.rock.poro[i] * model.fluid.density(state.p[i], state.t[i]) * model.grid.cell_volumes()[i])
        .sum()
}

/// Total stored energy of fluid and rock relative to 0 K (J).
pub fn total_energy<T: Real>(model: &Model<T>, state: &State<T>) -> T {
    let rock = &model.rock;
    (0..model.n_cells())
        .map(|i| {
            let phi = rock.poro[i];
            let rho = model.fluid.density(state.p[i], state.t[i]);
            (phi * model.fluid.c_v * rho + (T::one() - phi) * rock.rho_r * rock.c_r) * state.t[i] * model.grid.cell_volumes()[i]
        })
        .sum()
}

/// Net source rates `(sum f |E|, sum f_T |E|)` at `state` (kg/s, W).
pub fn source_totals<T: Real>(model: &Model<T>, state: &State<T>) -> Result<(T, T)> {
    let vol = model.grid.cell_volumes();
    let mut m = T::zero();
    let mut e = T::zero();
    for s in &model.sources {
        let c = s.cell;
        let ev = source_contributions(s, state.p[c], state.t[c], &model.fluid, model.rock.perm[c], vol[c])?;
        m += ev.f * vol[c];
        e += ev.f_t * vol[c];
    }
    Ok((m, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_grid;
    use crate::physics::RateMode;
    use approx::assert_relative_eq;

    fn model(dims: &[usize], sources: Vec<SourceTerm<f64>>) -> Model<f64> {
        let lengths: Vec<f64> = dims.iter().map(|&d| d as f64 * 2.0).collect();
        let grid = build_grid(dims, &lengths).unwrap();
        let rock = RockModel::uniform(grid.n_cells(), [3e-13; 3], 0.2);
        Model::new(grid, FluidModel::default(), rock, sources).unwrap()
    }

    #[test]
    fn harmonic_mean_values() {
        assert_relative_eq!(harmonic_mean(1e-13, 3e-13), 1.5e-13, max_relative = 1e-14);
        assert_eq!(harmonic_mean(0.0, 0.0), 0.0);
    }

    #[test]
    fn uniform_pressure_has_no_flux() {
        let m = model(&[3, 3], vec![]);
        let s = State::uniform(9, 4e5, 300.0);
        for k in 0..m.grid.facets().len() {
            let (f, up) = m.darcy_flux(k, &s).unwrap();
            assert_eq!(f, 0.0);
            assert_eq!(up, m.grid.facets()[k].cell_a);
        }
    }

    #[test]
    fn flux_follows_pressure_drop() {
        let m = model(&[2, 1], vec![]);
        let s = State::new(vec![5e5, 4e5], vec![300.0, 300.0]).unwrap();
        let (f, up) = m.darcy_flux(0, &s).unwrap();
        assert!(f > 0.0);
        assert_eq!(up, 0);
        let s = State::new(vec![4e5, 5e5], vec![300.0, 300.0]).unwrap();
        let (f, up) = m.darcy_flux(0, &s).unwrap();
        assert!(f < 0.0);
        assert_eq!(up, 1);
    }

    #[test]
    fn equilibrium_has_zero_residual() {
        let m = model(&[4, 3], vec![]);
        let s = State::uniform(12, 4.1369e5, 288.706);
        let g = assemble_residual(&m, &s, &s, 86400.0).unwrap();
        assert!(g.p.iter().chain(&g.t).all(|&v| v == 0.0));
    }

    #[test]
    fn single_cell_injector_mass_residual() {
        let q = 1e-6;
        let m = model(&[1, 1], vec![SourceTerm::injector(0, RateMode::Fixed { q }, 422.0)]);
        let old = State::uniform(1, 4e5, 300.0);
        let new = State::uniform(1, 4.5e5, 305.0);
        let dt = 3600.0;
        let g = assemble_residual(&m, &new, &old, dt).unwrap();
        let fl = &m.fluid;
        let expected = 0.2 * (fl.density(4.5e5, 305.0) - fl.density(4e5, 300.0)) / dt * 4.0 - q * fl.density(4.5e5, 422.0);
        assert_relative_eq!(g.p[0], expected, max_relative = 1e-12);
    }

    #[test]
    fn heater_adds_u_to_att_only() {
        let u = 5.44409e-6;
        let base = model(&[2, 2], vec![]);
        let heated = model(&[2, 2], vec![SourceTerm::heater(3, u, 422.039)]);
        let old = State::uniform(4, 4e5, 290.0);
        let new = State::new(vec![4e5, 4.1e5, 4.2e5, 4.05e5], vec![291.0, 292.0, 290.5, 293.0]).unwrap();
        let j0 = assemble_jacobian(&base, &new, &old, 1e4).unwrap();
        let j1 = assemble_jacobian(&heated, &new, &old, 1e4).unwrap();
        assert_eq!(j0.atp, j1.atp);
        assert_eq!(j0.app, j1.app);
        assert_relative_eq!(j1.att.get(3, 3) - j0.att.get(3, 3), u, max_relative = 1e-6);
    }

    #[test]
    fn constant_coefficients_give_decoupled_laplacian() {
        let mut fluid = FluidModel::default();
        fluid.c = 0.0;
        fluid.beta = 0.0;
        let grid = build_grid(&[3, 2], &[3.0, 2.0]).unwrap();
        let rock = RockModel::uniform(6, [1e-12; 3], 0.25);
        let m = Model::new(grid, fluid, rock, vec![]).unwrap();
        let s = State::uniform(6, 4e5, 300.0);
        let j = assemble_jacobian(&m, &s, &s, 10.0).unwrap();
        assert!(j.apt.values().iter().all(|&v| v == 0.0));
        let dense = j.app.to_dense();
        for i in 0..6 {
            for k in 0..6 {
                assert_relative_eq!(dense[i][k], dense[k][i], max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn layouts_round_trip() {
        let v = BlockVector { p: vec![1.0, 2.0, 3.0], t: vec![4.0, 5.0, 6.0] };
        for layout in [Layout::Stacked, Layout::Interleaved] {
            assert_eq!(layout.split(&layout.flatten(&v)), v);
        }
        assert_eq!(Layout::Interleaved.flatten(&v), vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }

    #[test]
    fn dirichlet_jacobian_matches_fd() {
        let grid = build_grid(&[2, 2], &[2.0, 2.0]).unwrap();
        let rock = RockModel::uniform(4, [3e-13; 3], 0.2);
        let m = Model::new(grid, FluidModel::default(), rock, vec![])
            .unwrap()
            .with_dirichlet(vec![DirichletFacet { boundary_facet: 0, p: 6e5, t: 350.0 }])
            .unwrap();
        let old = State::uniform(4, 4e5, 300.0);
        let new = State::new(vec![4.1e5, 4.0e5, 4.3e5, 4.2e5], vec![301.0, 305.0, 299.0, 300.0]).unwrap();
        let dt = 500.0;
        let j = assemble_jacobian(&m, &new, &old, dt).unwrap();
        let c = m.grid.boundary_facets()[0].cell;
        let h = 10.0;
        let mut plus = new.clone();
        plus.p[c] += h;
        let mut minus = new.clone();
        minus.p[c] -= h;
        let gp = assemble_residual(&m, &plus, &old, dt).unwrap();
        let gm = assemble_residual(&m, &minus, &old, dt).unwrap();
        let fd = (gp.p[c] - gm.p[c]) / (2.0 * h);
        assert_relative_eq!(j.app.get(c, c), fd, max_relative = 1e-6);
        // inflow from the boundary raises the residual sink
        let g = assemble_residual(&m, &new, &old, dt).unwrap();
        let g_closed = {
            let closed = Model::new(m.grid.clone(), m.fluid.clone(), m.rock.clone(), vec![]).unwrap();
            assemble_residual(&closed, &new, &old, dt).unwrap()
        };
        assert!(g.p[c] < g_closed.p[c]);
    }
}
