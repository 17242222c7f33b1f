//! The five commands behind the binary: scene validation, forward phase
//! tables, time-domain verification, inversion, and plot exports.
//!
//! Every command is a plain function from a parsed [`SceneConfig`] to a
//! report struct plus files under the output directory, so the test suite
//! drives them exactly as `main` does. All outputs are deterministic:
//! identical config and seed produce byte-identical files.

use crate::config::{DatasetConfig, SceneConfig};
use anyhow::{bail, Context, Result};
use kgscatter_core::fitting;
use kgscatter_core::geometry::{classify_line, LineQuery, Obstacle};
use kgscatter_core::inversion::{
    recover_ainf_sum, recover_flux_mod, recover_phi_l, reconstruct_a0,
    reconstruct_b_component, FluxModulus, PhaseRow, PhiLProbe, PlaneFrame, ReconstructionGrid,
    Sinogram, TileSpec,
};
use kgscatter_core::io::{self, fmt_num};
use kgscatter_core::lineflux::{hole_flux, long_range_flux, xray, xray_batch, FluxRecord};
use kgscatter_core::potentials::{
    divergence_residual, ClassTag, ElectricPotential, VectorPotential,
};
use kgscatter_core::scattering::{hm_phase, PhasePair};
use kgscatter_core::solver::{
    convergence_study, packet_min_h, scattering_phase_measurement, GridSpec2, SolverRun,
};
use kgscatter_core::vec3::Vec3;
use rayon::prelude::*;
use std::path::{Path, PathBuf};

/// Global flag overrides shared by all commands.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

impl RunOptions {
    fn out_dir(&self, config: &SceneConfig) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from(&config.output_dir));
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("creating output dir {}", dir.display()))?;
        Ok(dir)
    }

    fn seed(&self, config: &SceneConfig) -> u64 {
        self.seed.unwrap_or(config.seed)
    }

    fn tol(&self) -> f64 {
        self.tol.unwrap_or(1e-9)
    }
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// Any unit vector orthogonal to `v`.
fn orthogonal_unit(v: Vec3) -> Vec3 {
    let v = v.normalized();
    let trial = if v.x.abs() < 0.9 { Vec3::EX } else { Vec3::EY };
    (trial - v * trial.dot(v)).normalized()
}

// ---------------------------------------------------------------------------
// validate

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(CheckResult { name: name.to_string(), passed, detail });
    }
}

/// Log-log decay slope of `|f|` sampled over a direction fan at doubling
/// radii; `None` when the tail is numerically zero (compact support).
fn decay_slope(sample: impl Fn(Vec3) -> f64, base_radius: f64) -> Option<(f64, f64)> {
    let dirs: Vec<Vec3> = (0..13)
        .map(|i| {
            let th = 0.7 + i as f64;
            let ph = 1.3 * i as f64;
            Vec3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()).normalized()
        })
        .collect();
    let radii: Vec<f64> = (3..8).map(|k| base_radius * f64::powi(2.0, k)).collect();
    let vals: Vec<f64> = radii
        .iter()
        .map(|&r| dirs.iter().map(|&d| sample(d * r).abs()).fold(0.0, f64::max))
        .collect();
    if vals.iter().filter(|&&v| v > 1e-14).count() < 3 {
        return None;
    }
    fitting::loglog_slope(&radii, &vals)
}

/// Runs every scene-level invariant that doesn't need a solver: geometry
/// construction, flag consistency, field divergence, handle circulations
/// against the declared flux map, and decay-class fits.
pub fn cmd_validate(config: &SceneConfig, opts: &RunOptions) -> Result<ValidationReport> {
    let mut report = ValidationReport::default();

    match config.check_consistency() {
        Ok(()) => report.push("flags", true, "flags consistent with constructors".into()),
        Err(e) => report.push("flags", false, format!("{e:#}")),
    }

    let obstacle = match config.obstacle() {
        Ok(o) => {
            report.push(
                "obstacle",
                true,
                format!("{} solids, {} handles", o.components().len(), o.n_handles()),
            );
            o
        }
        Err(e) => {
            report.push("obstacle", false, format!("{e:#}"));
            return Ok(report);
        }
    };

    let a = match config.vector_potential(&obstacle) {
        Ok(a) => {
            report.push("potential", true, "vector potential constructed".into());
            a
        }
        Err(e) => {
            report.push("potential", false, format!("{e:#}"));
            return Ok(report);
        }
    };
    let a0 = config.electric_potential();

    // The magnetic field must be divergence-free wherever sampled.
    let b = a.field();
    if b.is_zero() {
        report.push("divergence", true, "field-free scene".into());
    } else {
        let residual = divergence_residual(&b, opts.seed(config), 256);
        let scale = b.magnitude_scale().max(1e-12);
        let ok = residual <= 1e-6 * scale;
        report.push(
            "divergence",
            ok,
            format!("max residual {residual:.3e} against field scale {scale:.3e}"),
        );
    }

    // Circulation over each handle must reproduce the declared flux map.
    if obstacle.n_handles() == 0 {
        report.push("circulation", true, "no handles".into());
    } else {
        let fluxes = a.flux_map(obstacle.n_handles());
        let mut ok = true;
        let mut details = Vec::new();
        for (k, &expected) in fluxes.iter().enumerate() {
            let mut class = vec![0i64; obstacle.n_handles()];
            class[k] = 1;
            match hole_flux(&a, &obstacle, &class, v3(config.tori[k].axis)) {
                Ok(measured) => {
                    let good = (measured - expected).abs() <= 1e-6 * (1.0 + expected.abs());
                    ok &= good;
                    details.push(format!("handle {k}: {measured:.9} vs {expected:.9}"));
                }
                Err(e) => {
                    ok = false;
                    details.push(format!("handle {k}: {e:#}"));
                }
            }
        }
        report.push("circulation", ok, details.join("; "));
    }

    // Decay fits against the declared class.
    if a.is_zero() {
        report.push("decay", true, "zero potential".into());
    } else {
        let base = a.far_scale().max(1.0);
        match decay_slope(|x| a.eval(x).map(|v| v.norm()).unwrap_or(f64::NAN), base) {
            None => report.push("decay", true, "compact support (zero tail)".into()),
            Some((slope, _)) => {
                let (ok, want) = match a.class() {
                    ClassTag::Sr { zeta } => {
                        (slope <= -1.05 && slope <= -zeta + 0.3, format!("≤ −{zeta:.2}+0.3"))
                    }
                    ClassTag::Lr | ClassTag::LrDelta { .. } => {
                        ((slope + 1.0).abs() <= 0.2, "−1 ± 0.2".to_string())
                    }
                };
                report.push("decay", ok, format!("fitted |A| slope {slope:.3}, class wants {want}"));
            }
        }
    }
    if a0.is_zero() {
        report.push("decay_a0", true, "no electric potential".into());
    } else {
        let base = a0.far_scale().max(1.0);
        match decay_slope(|x| a0.eval(x), base) {
            None => report.push("decay_a0", true, "tail numerically zero".into()),
            Some((slope, _)) => {
                let zeta = a0.zeta();
                let ok = slope <= -zeta + 0.3;
                report.push(
                    "decay_a0",
                    ok,
                    format!("fitted A₀ slope {slope:.3} against declared ζ = {zeta:.2}"),
                );
            }
        }
    }

    // Structural sanity of the solver block, when present.
    if let Some(solver) = &config.solver {
        let mut problems = Vec::new();
        if solver.v_list.len() < 2 || solver.v_list.windows(2).any(|w| w[0] >= w[1]) {
            problems.push("v_list must be strictly increasing with ≥ 2 entries".to_string());
        }
        if solver.dt <= 0.0 || solver.t_horizon <= 0.0 {
            problems.push("dt and t_horizon must be positive".to_string());
        }
        if solver.line_sigma <= 0.0 {
            problems.push("line_sigma must be positive".to_string());
        }
        if solver.line_offset.abs() + 3.0 * solver.line_sigma > 0.5 * solver.extent {
            problems.push("beam line does not fit inside the box".to_string());
        }
        report.push(
            "solver_block",
            problems.is_empty(),
            if problems.is_empty() { "well-formed".to_string() } else { problems.join("; ") },
        );
    }

    Ok(report)
}

// ---------------------------------------------------------------------------
// forward

#[derive(Debug)]
pub struct ForwardReport {
    pub n_lines: usize,
    pub n_skipped: usize,
    pub files: Vec<PathBuf>,
}

/// The pencil of dataset lines: per angle and offset, classified against
/// the obstacle. Lines that hit the obstacle are skipped (they carry no
/// scattering data); the count is reported.
fn pencil_lines(
    dataset: &DatasetConfig,
    obstacle: &Obstacle,
) -> Result<(PlaneFrame, Vec<f64>, Vec<f64>, Vec<LineQuery>, usize)> {
    if dataset.n_angles == 0 || dataset.n_offsets < 2 {
        bail!("dataset needs at least one angle and two offsets");
    }
    let frame = PlaneFrame::new(
        v3(dataset.plane_origin),
        v3(dataset.plane_e1),
        v3(dataset.plane_e2),
    );
    let angles: Vec<f64> = (0..dataset.n_angles)
        .map(|k| std::f64::consts::PI * k as f64 / dataset.n_angles as f64)
        .collect();
    let offsets: Vec<f64> = (0..dataset.n_offsets)
        .map(|j| {
            -dataset.offset_half_width
                + 2.0 * dataset.offset_half_width * j as f64 / (dataset.n_offsets - 1) as f64
        })
        .collect();
    let mut lines = Vec::with_capacity(angles.len() * offsets.len());
    let mut skipped = 0;
    for &phi in &angles {
        let dir = frame.beam_dir(phi);
        for &s in &offsets {
            let base = frame.line_base(phi, s);
            match classify_line(obstacle, base, dir) {
                Ok(class) => lines.push(LineQuery { base, dir, class }),
                Err(_) => skipped += 1,
            }
        }
    }
    Ok((frame, angles, offsets, lines, skipped))
}

fn radius_schedule(obstacle: &Obstacle, a: &VectorPotential) -> Vec<f64> {
    let base = obstacle.bounding_radius().max(a.far_scale()).max(1.0);
    vec![8.0 * base, 16.0 * base, 32.0 * base, 64.0 * base]
}

/// Computes the high-momenta phase table, the batch X-ray table, and the
/// per-class flux records of the dataset block.
pub fn cmd_forward(config: &SceneConfig, opts: &RunOptions) -> Result<ForwardReport> {
    let Some(dataset) = &config.dataset else {
        bail!("cmd_forward needs a [dataset] block");
    };
    let out = opts.out_dir(config)?;
    let obstacle = config.obstacle()?;
    let a = config.vector_potential(&obstacle)?;
    let a0 = config.electric_potential();

    let (_frame, _angles, _offsets, lines, n_skipped) = pencil_lines(dataset, &obstacle)?;
    let pairs: Vec<PhasePair> = lines
        .par_iter()
        .map(|line| hm_phase(&a, &a0, line))
        .collect::<Result<Vec<_>, _>>()
        .context("computing phase pairs")?;
    let samples = xray_batch(&a, &a0, &lines, opts.tol()).context("computing X-ray table")?;

    let schedule = radius_schedule(&obstacle, &a);
    let mut records = Vec::new();
    let mut classes: Vec<Vec<i64>> = vec![vec![0; obstacle.n_handles()]];
    for k in 0..obstacle.n_handles() {
        let mut c = vec![0i64; obstacle.n_handles()];
        c[k] = 1;
        classes.push(c);
    }
    for class in &classes {
        records.push(
            FluxRecord::compute(&a, &obstacle, class, v3(dataset.dir), &schedule)
                .context("computing flux record")?,
        );
    }

    let phase_path = out.join("phases.csv");
    let xray_path = out.join("xrays.csv");
    let flux_path = out.join("fluxes.csv");
    io::write_phase_table(&phase_path, &pairs)?;
    io::write_xray_table(&xray_path, &samples)?;
    io::write_flux_table(&flux_path, &records)?;
    Ok(ForwardReport {
        n_lines: lines.len(),
        n_skipped,
        files: vec![phase_path, xray_path, flux_path],
    })
}

// ---------------------------------------------------------------------------
// verify

#[derive(Debug)]
pub struct SubordinationCheck {
    pub v: f64,
    /// Phase change under one grid doubling.
    pub phase_change: f64,
    /// The physical error at that momentum.
    pub v_error: f64,
    /// Whether discretization is subordinate (change < 10% of the error).
    pub subordinate: bool,
}

#[derive(Debug)]
pub struct VerifyReport {
    pub run: SolverRun,
    pub slope_band: [f64; 2],
    /// `None` for a degenerate fit (errors at the numerical floor).
    pub in_band: Option<bool>,
    pub subordination: Option<SubordinationCheck>,
    pub notices: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Runs the momentum ladder, fits the error-decay slope against the
/// configured band, and rechecks the largest momentum on a doubled grid to
/// confirm discretization error is subordinate to the physical error.
pub fn cmd_verify(config: &SceneConfig, opts: &RunOptions) -> Result<VerifyReport> {
    let Some(solver) = &config.solver else {
        bail!("cmd_verify needs a [solver] block");
    };
    let out = opts.out_dir(config)?;
    let scene = solver.scene(config.mass);
    let line = solver.line();
    let spec = solver.grid_spec();
    let run = convergence_study(&scene, &line, &solver.v_list, solver.t_horizon, spec, solver.dt)
        .context("convergence study")?;

    let mut notices = Vec::new();
    let in_band = match run.slope {
        None => {
            notices.push(
                "degenerate fit: phase errors sit at the numerical floor, no slope to report"
                    .to_string(),
            );
            None
        }
        Some((slope, stderr)) => {
            let ok = slope >= solver.slope_band[0] && slope <= solver.slope_band[1];
            if !ok {
                notices.push(format!(
                    "slope {slope:.3} ± {stderr:.3} outside the configured band [{}, {}]",
                    solver.slope_band[0], solver.slope_band[1]
                ));
            }
            Some(ok)
        }
    };

    // Subordination: rerun the stiffest momentum on a doubled grid; the
    // phase movement must be well under the physical error there.
    let subordination = match (run.slope.is_some(), run.records.last()) {
        (true, Some(last)) => {
            let mut n = spec.n;
            let needed = packet_min_h(last.v, line.sigma);
            while spec.extent / n as f64 > needed {
                n *= 2;
            }
            let doubled = GridSpec2 { n: 2 * n, ..spec };
            let again =
                scattering_phase_measurement(&scene, &line, last.v, solver.t_horizon, doubled, solver.dt)
                    .context("doubled-grid measurement")?;
            let change = 0.5
                * ((again.measured.0 - last.measured.0).abs()
                    + (again.measured.1 - last.measured.1).abs());
            let err = last.abs_err();
            let subordinate = change < 0.1 * err;
            if !subordinate {
                notices.push(format!(
                    "discretization dominance: doubling the grid moves phases by {change:.3e}, \
                     not small against the physical error {err:.3e}"
                ));
            }
            Some(SubordinationCheck { v: last.v, phase_change: change, v_error: err, subordinate })
        }
        _ => None,
    };

    let run_path = out.join("run.csv");
    io::write_solver_run(&run_path, &run)?;
    let mut summary = vec![
        ("slope_band_lo".to_string(), fmt_num(solver.slope_band[0])),
        ("slope_band_hi".to_string(), fmt_num(solver.slope_band[1])),
    ];
    if let Some((slope, stderr)) = run.slope {
        summary.push(("slope".to_string(), fmt_num(slope)));
        summary.push(("slope_stderr".to_string(), fmt_num(stderr)));
        summary.push(("slope_in_band".to_string(), in_band.unwrap_or(false).to_string()));
    } else {
        summary.push(("slope".to_string(), "degenerate".to_string()));
    }
    if let Some(s) = &subordination {
        summary.push(("subordination_v".to_string(), fmt_num(s.v)));
        summary.push(("subordination_phase_change".to_string(), fmt_num(s.phase_change)));
        summary.push(("subordination_v_error".to_string(), fmt_num(s.v_error)));
        summary.push(("subordinate".to_string(), s.subordinate.to_string()));
    }
    let summary_path = out.join("verify_summary.txt");
    io::write_key_values(&summary_path, &summary)?;

    Ok(VerifyReport {
        run,
        slope_band: solver.slope_band,
        in_band,
        subordination,
        notices,
        files: vec![run_path, summary_path],
    })
}

// ---------------------------------------------------------------------------
// invert

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Product {
    A0Grid,
    BGrid,
    Fluxes,
    AinfSum,
}

/// Parses the product list. Requesting the one-direction coefficient
/// `A∞(v̂)` by itself is refused: scattering data determines only the even
/// combination `A∞(v̂) + A∞(−v̂)`, never the single-direction coefficient,
/// so the only offered product is `ainf_sum`.
pub fn parse_products(specs: &[String]) -> Result<Vec<Product>> {
    if specs.is_empty() {
        return Ok(vec![Product::A0Grid, Product::BGrid, Product::Fluxes, Product::AinfSum]);
    }
    let mut out = Vec::new();
    for s in specs {
        match s.trim().to_ascii_lowercase().as_str() {
            "a0" => out.push(Product::A0Grid),
            "b" => out.push(Product::BGrid),
            "flux" | "fluxes" => out.push(Product::Fluxes),
            "ainf_sum" => out.push(Product::AinfSum),
            "ainf" | "a_inf" | "a_infinity" => bail!(
                "product 'ainf' is not recoverable: scattering data determines only the sum \
                 A∞(v̂) + A∞(−v̂), not A∞(v̂) alone — request 'ainf_sum'"
            ),
            other => bail!("unknown product '{other}' (known: a0, b, flux, ainf_sum)"),
        }
    }
    Ok(out)
}

#[derive(Debug)]
pub struct InvertReport {
    pub files: Vec<PathBuf>,
    /// The error-summary entries, also written to `invert_summary.txt`.
    pub summary: Vec<(String, String)>,
}

/// Full phase dataset over the pencil, one row per angle. Rows must be
/// complete for reconstruction, so any obstacle shadowing is an error here.
fn phase_rows(
    dataset: &DatasetConfig,
    obstacle: &Obstacle,
    a: &VectorPotential,
    a0: &ElectricPotential,
) -> Result<(PlaneFrame, Vec<f64>, Vec<PhaseRow>)> {
    let (frame, angles, offsets, lines, skipped) = pencil_lines(dataset, obstacle)?;
    if skipped > 0 {
        bail!("{skipped} pencil lines hit the obstacle; reconstruction needs complete rows");
    }
    let pairs: Vec<PhasePair> = lines
        .par_iter()
        .map(|line| hm_phase(a, a0, line))
        .collect::<Result<Vec<_>, _>>()
        .context("computing phase pairs")?;
    let rows = pairs
        .chunks(offsets.len())
        .map(|chunk| PhaseRow { offsets: offsets.clone(), pairs: chunk.to_vec() })
        .collect();
    Ok((frame, angles, rows))
}

fn grid_error_entries(
    name: &str,
    grid: &ReconstructionGrid,
    truth: impl Fn(Vec3) -> f64,
    truth_known_nonzero: bool,
) -> Vec<(String, String)> {
    // A field that is nonzero in space may still vanish on this particular
    // tile; a relative error against (numerically) nothing is noise, so
    // fall back to the absolute scale of the reconstruction in that case.
    let mut den = 0.0;
    for i in 0..grid.tile.n {
        for j in 0..grid.tile.n {
            let t = truth(grid.sample_point(i, j));
            den += t * t;
        }
    }
    let rms = (den / ((grid.tile.n * grid.tile.n).max(1) as f64)).sqrt();
    if truth_known_nonzero && rms > 1e-9 {
        vec![(format!("{name}_rel_l2"), fmt_num(grid.rel_l2_error(truth)))]
    } else {
        vec![(format!("{name}_max_abs"), fmt_num(grid.max_abs()))]
    }
}

/// Reconstructs the requested products from freshly generated phase data
/// and, since the scene itself is the ground truth, writes an error
/// summary alongside the grids.
pub fn cmd_invert(
    config: &SceneConfig,
    opts: &RunOptions,
    products: &[Product],
) -> Result<InvertReport> {
    let Some(dataset) = &config.dataset else {
        bail!("cmd_invert needs a [dataset] block");
    };
    let out = opts.out_dir(config)?;
    let obstacle = config.obstacle()?;
    let a = config.vector_potential(&obstacle)?;
    let a0 = config.electric_potential();
    let b = a.field();
    let flags = config.flags();
    let tile = TileSpec { n: dataset.tile_n, half_width: dataset.tile_half_width };
    let obstacle_arg = if obstacle.components().is_empty() { None } else { Some(&obstacle) };

    let mut files = Vec::new();
    let mut summary = Vec::new();

    let need_rows =
        products.contains(&Product::A0Grid) || products.contains(&Product::BGrid);
    let rows_data = if need_rows { Some(phase_rows(dataset, &obstacle, &a, &a0)?) } else { None };

    if products.contains(&Product::A0Grid) {
        let (frame, angles, rows) = rows_data.as_ref().unwrap();
        let sin = Sinogram::from_phase_rows(
            frame.clone(),
            angles.clone(),
            rows,
            kgscatter_core::inversion::Channel::Electric,
        )?;
        let grid = reconstruct_a0(&sin, tile, obstacle_arg)?;
        let csv = out.join("recon_a0.csv");
        let bin = out.join("recon_a0.kgw");
        io::write_recon_grid_csv(&csv, &grid)?;
        io::write_recon_grid_binary(&bin, &grid)?;
        summary.extend(grid_error_entries(
            "a0",
            &grid,
            |x| a0.eval(x),
            !a0.is_zero(),
        ));
        files.extend([csv, bin]);
    }

    if products.contains(&Product::BGrid) {
        let (frame, angles, rows) = rows_data.as_ref().unwrap();
        let sin = Sinogram::from_phase_rows(
            frame.clone(),
            angles.clone(),
            rows,
            kgscatter_core::inversion::Channel::Magnetic,
        )?;
        let grid = reconstruct_b_component(&sin, tile, obstacle_arg)?;
        let normal = frame.normal();
        let csv = out.join("recon_b_normal.csv");
        let bin = out.join("recon_b_normal.kgw");
        io::write_recon_grid_csv(&csv, &grid)?;
        io::write_recon_grid_binary(&bin, &grid)?;
        summary.extend(grid_error_entries(
            "b_normal",
            &grid,
            |x| b.eval(x).dot(normal),
            !b.is_zero(),
        ));
        files.extend([csv, bin]);
    }

    if products.contains(&Product::Fluxes) {
        let modulus = if flags.a0_zero && flags.b_zero { FluxModulus::TwoPi } else { FluxModulus::Pi };
        let m = match modulus {
            FluxModulus::TwoPi => 2.0 * std::f64::consts::PI,
            FluxModulus::Pi => std::f64::consts::PI,
        };
        summary.push((
            "flux_modulus".to_string(),
            match modulus {
                FluxModulus::TwoPi => "2pi".to_string(),
                FluxModulus::Pi => "pi".to_string(),
            },
        ));
        let expected = a.flux_map(obstacle.n_handles());
        for (k, torus) in config.tori.iter().enumerate() {
            let axis = v3(torus.axis).normalized();
            let e = orthogonal_unit(axis);
            let through = v3(torus.center) + e * (0.2 * torus.major_radius);
            let outside = v3(torus.center) + e * (2.0 * obstacle.bounding_radius() + 2.0);
            let class_a = classify_line(&obstacle, through, axis)
                .context("classifying the threading line")?;
            let class_b = classify_line(&obstacle, outside, axis)
                .context("classifying the reference line")?;
            let la = LineQuery { base: through, dir: axis, class: class_a.clone() };
            let lb = LineQuery { base: outside, dir: axis, class: class_b };
            let pa = hm_phase(&a, &a0, &la)?;
            let pb = hm_phase(&a, &a0, &lb)?;
            let got = recover_flux_mod(&pa, &pb, flags, modulus)?;
            let winding = class_a[k] as f64;
            let want = if flags.a0_zero && flags.b_zero {
                // Clean exterior: the reduced difference is the hole flux.
                (winding * expected[k]).rem_euclid(m)
            } else {
                // Otherwise only the reduced θ₊ difference itself is
                // determined; predict it from the scene by quadrature.
                let sa = xray(&a, &a0, &la, opts.tol())?;
                let sb = xray(&a, &a0, &lb, opts.tol())?;
                ((sa.int_a - sa.int_a0) - (sb.int_a - sb.int_a0)).rem_euclid(m)
            };
            summary.push((format!("flux_h{k}_recovered"), fmt_num(got)));
            summary.push((format!("flux_h{k}_expected"), fmt_num(want)));
        }
    }

    if products.contains(&Product::AinfSum) {
        let v = v3(dataset.dir).normalized();
        let w1 = orthogonal_unit(v);
        let w2 = v.cross(w1);
        let base = v3(dataset.plane_origin)
            + w1 * (obstacle.bounding_radius() + dataset.offset_half_width + 2.0);

        // Long-range flux of the straight direction first.
        let class = classify_line(&obstacle, base, v).context("classifying the Φ_L line")?;
        let pair = hm_phase(&a, &a0, &LineQuery { base, dir: v, class })?;
        let phi_l = recover_phi_l(&pair, &b, w1, 1e-8)?;
        summary.push(("phi_l_recovered".to_string(), fmt_num(phi_l)));
        let schedule = radius_schedule(&obstacle, &a);
        if let Ok(direct) = long_range_flux(&a, v, &schedule) {
            summary.push(("phi_l_expected".to_string(), fmt_num(direct)));
        }

        let probe_for = |w: Vec3| -> Result<PhiLProbe> {
            let phi_at = |th: f64| -> Result<f64> {
                let dir = v * th.cos() + w * th.sin();
                let class = classify_line(&obstacle, base, dir)
                    .context("classifying a tilted probe line")?;
                let p = hm_phase(&a, &a0, &LineQuery { base, dir, class })?;
                Ok(recover_phi_l(&p, &b, w, 1e-8)?)
            };
            Ok(PhiLProbe {
                vperp: w,
                dtheta: dataset.dtheta,
                phi_plus: phi_at(dataset.dtheta)?,
                phi_minus: phi_at(-dataset.dtheta)?,
            })
        };
        let sum = recover_ainf_sum(v, &[probe_for(w1)?, probe_for(w2)?])?;
        summary.push(("ainf_sum_x".to_string(), fmt_num(sum.x)));
        summary.push(("ainf_sum_y".to_string(), fmt_num(sum.y)));
        summary.push(("ainf_sum_z".to_string(), fmt_num(sum.z)));
        if let (Some(p), Some(q)) = (a.analytic_a_inf(v), a.analytic_a_inf(-v)) {
            let want = p + q;
            summary.push(("ainf_sum_x_expected".to_string(), fmt_num(want.x)));
            summary.push(("ainf_sum_y_expected".to_string(), fmt_num(want.y)));
            summary.push(("ainf_sum_z_expected".to_string(), fmt_num(want.z)));
        }
    }

    let summary_path = out.join("invert_summary.txt");
    io::write_key_values(&summary_path, &summary)?;
    files.push(summary_path);
    Ok(InvertReport { files, summary })
}

// ---------------------------------------------------------------------------
// export-plots

#[derive(Debug)]
pub struct ExportReport {
    pub files: Vec<PathBuf>,
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<String> =
        lines.next().unwrap_or("").split(',').map(|s| s.to_string()).collect();
    let rows = lines
        .map(|l| l.split(',').map(|s| s.to_string()).collect())
        .collect();
    Ok((header, rows))
}

fn column(header: &[String], name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .with_context(|| format!("column '{name}' missing (have: {})", header.join(",")))
}

/// Rewrites existing outputs as long-format series (one observation per
/// row) for any plotting tool. Exports whatever products exist in the
/// directory; errors only if none do.
pub fn cmd_export_plots(dir: &Path) -> Result<ExportReport> {
    let mut files = Vec::new();

    let run_path = dir.join("run.csv");
    if run_path.exists() {
        let (header, rows) = read_csv(&run_path)?;
        let (ci, cerr) = (column(&header, "v")?, column(&header, "abs_err")?);
        let out_rows: Vec<Vec<String>> = rows
            .iter()
            .filter_map(|r| {
                let v: f64 = r[ci].parse().ok()?;
                let err: f64 = r[cerr].parse().ok()?;
                if v > 0.0 && err > 0.0 {
                    Some(vec![
                        "log_err_vs_log_v".to_string(),
                        fmt_num(v.ln()),
                        fmt_num(err.ln()),
                    ])
                } else {
                    None
                }
            })
            .collect();
        let path = dir.join("plot_convergence.csv");
        io::write_csv(&path, &["series", "x", "y"], out_rows)?;
        files.push(path);
    }

    let phases_path = dir.join("phases.csv");
    if phases_path.exists() {
        let (header, rows) = read_csv(&phases_path)?;
        let cx = [column(&header, "x1")?, column(&header, "x2")?, column(&header, "x3")?];
        let cv = [column(&header, "v1")?, column(&header, "v2")?, column(&header, "v3")?];
        let (cp, cm) = (column(&header, "theta_plus")?, column(&header, "theta_minus")?);
        // Signed transverse coordinate: project each base onto the first
        // nonzero transverse direction seen, so one pencil gets one axis.
        let mut axis: Option<Vec3> = None;
        let mut out_rows = Vec::new();
        for r in &rows {
            let get = |idx: [usize; 3]| -> Option<Vec3> {
                Some(Vec3::new(
                    r[idx[0]].parse().ok()?,
                    r[idx[1]].parse().ok()?,
                    r[idx[2]].parse().ok()?,
                ))
            };
            let (Some(base), Some(dir)) = (get(cx), get(cv)) else { continue };
            let perp = base - dir * base.dot(dir);
            if axis.is_none() && perp.norm() > 1e-12 {
                axis = Some(perp.normalized());
            }
            let x = axis.map(|e| perp.dot(e)).unwrap_or(0.0);
            out_rows.push(vec!["theta_plus".to_string(), fmt_num(x), r[cp].clone()]);
            out_rows.push(vec!["theta_minus".to_string(), fmt_num(x), r[cm].clone()]);
        }
        let path = dir.join("plot_phases.csv");
        io::write_csv(&path, &["series", "x_perp", "theta"], out_rows)?;
        files.push(path);
    }

    for name in ["recon_a0", "recon_b_normal"] {
        let grid_path = dir.join(format!("{name}.csv"));
        if grid_path.exists() {
            let (header, rows) = read_csv(&grid_path)?;
            let idx =
                [column(&header, "x")?, column(&header, "y")?, column(&header, "value")?];
            let out_rows: Vec<Vec<String>> = rows
                .iter()
                .map(|r| idx.iter().map(|&i| r[i].clone()).collect())
                .collect();
            let path = dir.join(format!("plot_{name}.csv"));
            io::write_csv(&path, &["x", "y", "value"], out_rows)?;
            files.push(path);
        }
    }

    if files.is_empty() {
        bail!(
            "no exportable outputs in {} — run forward, verify, or invert first",
            dir.display()
        );
    }
    Ok(ExportReport { files })
}
