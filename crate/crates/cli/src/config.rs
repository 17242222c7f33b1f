//! Scene configuration: one plain-text file drives every command.
//!
//! A scene file is TOML with five parts — obstacle tori, potential
//! constructors, global flags, an optional `[solver]` block for the
//! time-domain verification, and an optional `[dataset]` block describing
//! the line pencil used for forward tables and reconstructions. Parsing is
//! strict (unknown keys are errors) and the parse → serialize → parse
//! composition is a fixed point, so a rewritten config is the same
//! experiment.
//!
//! The solver block carries its own 2D slab potentials: the verification
//! geometry is the x₃-independent slab reduction, which no 3D constructor
//! produces by slicing, so the slab terms are declared explicitly where
//! they are used.

use anyhow::{bail, Context, Result};
use kgscatter_core::geometry::{Obstacle, Solid};
use kgscatter_core::inversion::SceneFlags;
use kgscatter_core::potentials::{
    make_ab_torus_potential, make_coulomb_potential, AngularFn, ElectricPotential, MagneticField,
    VectorPotential,
};
use kgscatter_core::solver::{Barrier2, GridSpec2, Scalar2, Scene2, SlabLine, Vector2};
use kgscatter_core::vec3::Vec3;
use serde::{Deserialize, Serialize};
use std::path::Path;

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// Complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    /// Particle mass (natural units).
    pub mass: f64,
    /// Scene-level promise that no electric potential is present.
    #[serde(default)]
    pub a0_zero: bool,
    /// Scene-level promise that the magnetic field vanishes.
    #[serde(default)]
    pub b_zero: bool,
    /// RNG seed for every sampled check; fixed seed means byte-identical
    /// outputs.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Output directory, relative to the working directory unless absolute.
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    /// Handlebody components.
    #[serde(default, rename = "torus")]
    pub tori: Vec<TorusConfig>,
    /// 3D potential constructors, summed.
    #[serde(default, rename = "potential")]
    pub potentials: Vec<PotentialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetConfig>,
}

fn default_seed() -> u64 {
    7
}

fn default_output_dir() -> String {
    "out".to_string()
}

/// One solid torus of the obstacle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusConfig {
    pub center: [f64; 3],
    pub axis: [f64; 3],
    pub major_radius: f64,
    pub minor_radius: f64,
}

/// Angular coefficient of a long-range tail: the sphere function λ∞.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum TailAngular {
    Constant { value: f64 },
    Linear { coefficients: [f64; 3] },
    Quadratic { matrix: [[f64; 3]; 3] },
}

impl TailAngular {
    fn build(&self) -> AngularFn {
        match self {
            TailAngular::Constant { value } => AngularFn::Constant(*value),
            TailAngular::Linear { coefficients } => AngularFn::Linear(v3(*coefficients)),
            TailAngular::Quadratic { matrix } => AngularFn::Quadratic(*matrix),
        }
    }
}

/// One potential constructor. Magnetic constructors sum into the vector
/// potential, electric ones into the scalar potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialConfig {
    /// Flux-carrying solid-angle potential attached to obstacle torus
    /// `torus` (index into the torus list).
    AbTorus { torus: usize, flux: f64 },
    /// Compact-field gauge `A = f m` with a polynomial bump `f`.
    BumpGauge { center: [f64; 3], radius: f64, amplitude: f64, m: [f64; 3] },
    /// Pure gauge `A = ∇(f)` of the same bump: zero field, zero flux.
    GradBump { center: [f64; 3], radius: f64, amplitude: f64 },
    /// Coulomb-gauge potential of the compact bump field `∇(f) × m`.
    CoulombBump { center: [f64; 3], radius: f64, amplitude: f64, m: [f64; 3] },
    /// Field-free long-range tail `A = ∇(χ λ∞)`.
    LongRangeTail { angular: TailAngular, r0: f64 },
    /// Electric Gaussian well.
    GaussianA0 { center: [f64; 3], width: f64, amplitude: f64 },
    /// Electric inverse-power tail `amp (1 + |x−c|²/s²)^{−ζ/2}`.
    InversePowerA0 { center: [f64; 3], scale: f64, zeta: f64, amplitude: f64 },
}

impl PotentialConfig {
    pub fn is_electric(&self) -> bool {
        matches!(self, PotentialConfig::GaussianA0 { .. } | PotentialConfig::InversePowerA0 { .. })
    }

    /// Whether the constructor produces a nonzero magnetic field.
    pub fn has_field(&self) -> bool {
        matches!(self, PotentialConfig::BumpGauge { .. } | PotentialConfig::CoulombBump { .. })
    }
}

/// Time-domain verification block: grid, horizon, momentum ladder, beam
/// line, and the slab-reduced potentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Base grid resolution per side (refined per momentum as needed).
    pub grid: usize,
    /// Full side length of the periodic box.
    pub extent: f64,
    #[serde(default)]
    pub absorber_width: f64,
    pub t_horizon: f64,
    pub dt: f64,
    pub v_list: Vec<f64>,
    pub line_dir: [f64; 2],
    pub line_offset: f64,
    pub line_sigma: f64,
    /// Acceptance band for the fitted error-decay slope.
    #[serde(default = "default_slope_band")]
    pub slope_band: [f64; 2],
    /// Out-of-plane momentum of the slab reduction.
    #[serde(default)]
    pub p3: f64,
    #[serde(default, rename = "a")]
    pub vector_terms: Vec<SlabVectorConfig>,
    #[serde(default, rename = "a0")]
    pub scalar_terms: Vec<SlabScalarConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barrier: Option<BarrierConfig>,
}

fn default_slope_band() -> [f64; 2] {
    [-1.3, -0.7]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlabVectorConfig {
    CirculatingBump { center: [f64; 2], radius: f64, amplitude: f64 },
    GradBump { center: [f64; 2], radius: f64, amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlabScalarConfig {
    Gaussian { center: [f64; 2], width: f64, amplitude: f64 },
    InversePower { center: [f64; 2], scale: f64, zeta: f64, amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierConfig {
    pub center: [f64; 2],
    pub radius: f64,
    pub height: f64,
    #[serde(default)]
    pub hard_mask: bool,
}

/// Line-pencil dataset block: the plane frame, pencil resolution, flux
/// probe direction, and reconstruction tile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Beam direction for flux records and A∞ probes.
    pub dir: [f64; 3],
    pub plane_origin: [f64; 3],
    pub plane_e1: [f64; 3],
    pub plane_e2: [f64; 3],
    pub n_angles: usize,
    pub n_offsets: usize,
    pub offset_half_width: f64,
    /// Angular step of the A∞ finite-difference probes.
    #[serde(default = "default_dtheta")]
    pub dtheta: f64,
    #[serde(default = "default_tile_n")]
    pub tile_n: usize,
    #[serde(default = "default_tile_half_width")]
    pub tile_half_width: f64,
}

fn default_dtheta() -> f64 {
    1e-3
}

fn default_tile_n() -> usize {
    64
}

fn default_tile_half_width() -> f64 {
    2.5
}

impl SceneConfig {
    /// Parses and validates a config text.
    pub fn parse(text: &str) -> Result<Self> {
        let config: SceneConfig = toml::from_str(text).context("parsing scene config")?;
        config.check_consistency()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    /// Canonical serialized form; `parse(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        toml::to_string_pretty(self).expect("scene configs serialize")
    }

    /// Structural invariants that don't need any numerics: flags must not
    /// contradict the constructor list.
    pub fn check_consistency(&self) -> Result<()> {
        if self.mass <= 0.0 {
            bail!("mass must be positive, got {}", self.mass);
        }
        if self.a0_zero {
            if let Some(p) = self.potentials.iter().find(|p| p.is_electric()) {
                bail!("a0_zero is set but an electric constructor is present: {p:?}");
            }
        }
        if self.b_zero {
            if let Some(p) = self.potentials.iter().find(|p| p.has_field()) {
                bail!("b_zero is set but a field-carrying constructor is present: {p:?}");
            }
        }
        for p in &self.potentials {
            if let PotentialConfig::AbTorus { torus, .. } = p {
                if *torus >= self.tori.len() {
                    bail!(
                        "ab_torus references torus {torus} but only {} are defined",
                        self.tori.len()
                    );
                }
            }
        }
        Ok(())
    }

    /// The scene flags as the inversion layer consumes them.
    pub fn flags(&self) -> SceneFlags {
        SceneFlags { a0_zero: self.a0_zero, b_zero: self.b_zero }
    }

    pub fn obstacle(&self) -> Result<Obstacle> {
        let solids = self
            .tori
            .iter()
            .map(|t| Solid::Torus {
                center: v3(t.center),
                axis: v3(t.axis),
                major_radius: t.major_radius,
                minor_radius: t.minor_radius,
            })
            .collect();
        Obstacle::new(solids).context("building obstacle")
    }

    /// Assembles the summed vector potential against the built obstacle.
    pub fn vector_potential(&self, obstacle: &Obstacle) -> Result<VectorPotential> {
        let mut terms = Vec::new();
        for p in &self.potentials {
            match p {
                PotentialConfig::AbTorus { torus, flux } => {
                    terms.push(
                        make_ab_torus_potential(obstacle, *torus, *flux)
                            .context("ab_torus constructor")?,
                    );
                }
                PotentialConfig::BumpGauge { center, radius, amplitude, m } => {
                    terms.push(VectorPotential::BumpGauge {
                        center: v3(*center),
                        radius: *radius,
                        amplitude: *amplitude,
                        m: v3(*m),
                    });
                }
                PotentialConfig::GradBump { center, radius, amplitude } => {
                    terms.push(VectorPotential::GradBump {
                        center: v3(*center),
                        radius: *radius,
                        amplitude: *amplitude,
                    });
                }
                PotentialConfig::CoulombBump { center, radius, amplitude, m } => {
                    let field = MagneticField::Bump {
                        center: v3(*center),
                        radius: *radius,
                        amplitude: *amplitude,
                        m: v3(*m),
                    };
                    terms.push(
                        make_coulomb_potential(&field).context("coulomb constructor")?,
                    );
                }
                PotentialConfig::LongRangeTail { angular, r0 } => {
                    let (a, _lambda) =
                        kgscatter_core::potentials::make_longrange_potential(angular.build(), *r0);
                    terms.push(a);
                }
                PotentialConfig::GaussianA0 { .. } | PotentialConfig::InversePowerA0 { .. } => {}
            }
        }
        Ok(match terms.len() {
            0 => VectorPotential::Zero,
            1 => terms.pop().unwrap(),
            _ => VectorPotential::Sum(terms),
        })
    }

    pub fn electric_potential(&self) -> ElectricPotential {
        let mut terms = Vec::new();
        for p in &self.potentials {
            match p {
                PotentialConfig::GaussianA0 { center, width, amplitude } => {
                    terms.push(ElectricPotential::Gaussian {
                        center: v3(*center),
                        width: *width,
                        amplitude: *amplitude,
                    });
                }
                PotentialConfig::InversePowerA0 { center, scale, zeta, amplitude } => {
                    terms.push(ElectricPotential::InversePower {
                        center: v3(*center),
                        scale: *scale,
                        zeta: *zeta,
                        amplitude: *amplitude,
                    });
                }
                _ => {}
            }
        }
        match terms.len() {
            0 => ElectricPotential::Zero,
            1 => terms.pop().unwrap(),
            _ => ElectricPotential::Sum(terms),
        }
    }
}

impl SolverConfig {
    pub fn scene(&self, mass: f64) -> Scene2 {
        let mut scene = Scene2::new(mass);
        scene.p3 = self.p3;
        for t in &self.vector_terms {
            scene.a.push(match t {
                SlabVectorConfig::CirculatingBump { center, radius, amplitude } => {
                    Vector2::CirculatingBump {
                        center: *center,
                        radius: *radius,
                        amplitude: *amplitude,
                    }
                }
                SlabVectorConfig::GradBump { center, radius, amplitude } => Vector2::GradBump {
                    center: *center,
                    radius: *radius,
                    amplitude: *amplitude,
                },
            });
        }
        for t in &self.scalar_terms {
            scene.a0.push(match t {
                SlabScalarConfig::Gaussian { center, width, amplitude } => Scalar2::Gaussian {
                    center: *center,
                    width: *width,
                    amplitude: *amplitude,
                },
                SlabScalarConfig::InversePower { center, scale, zeta, amplitude } => {
                    Scalar2::InversePower {
                        center: *center,
                        scale: *scale,
                        zeta: *zeta,
                        amplitude: *amplitude,
                    }
                }
            });
        }
        if let Some(b) = &self.barrier {
            scene.barrier = Some(Barrier2 {
                center: b.center,
                radius: b.radius,
                height: b.height,
                hard_mask: b.hard_mask,
            });
        }
        scene
    }

    pub fn line(&self) -> SlabLine {
        SlabLine { dir: self.line_dir, offset: self.line_offset, sigma: self.line_sigma }
    }

    pub fn grid_spec(&self) -> GridSpec2 {
        GridSpec2 { n: self.grid, extent: self.extent, absorber_width: self.absorber_width }
    }
}
