//! Benchmark workload presets and synthetic data generation.
//!
//! Preset sizes (electron and ion counts, grid dimensions, unique-orbital
//! counts) follow the standard workload table this harness mirrors; all
//! *content* (cells, ion placement, orbital coefficients, Jastrow and
//! pseudopotential shapes) is synthetic and reproducible from the run seed.

use crate::distances::{ElecElecTable, UpdatePolicy};
use crate::drivers::Variant;
use crate::engine::{Engine, HamiltonianSpec};
use crate::error::{QmcError, Result};
use crate::hamiltonian::{NonlocalPP, PpChannels};
use crate::lattice::Cell;
use crate::oracle::{OracleSpo, OracleWavefunction};
use crate::particles::ParticleSet;
use crate::rng::{stream, StreamPurpose};
use crate::splines::{CubicBspline1D, Phase, PlaneWaveSPOSet, SpoSet, TricubicSPOSet};
use crate::vec3::Vec3;
use crate::wavefunction::{
    OneBodyJastrow, SlaterDetBlock, SpinChannels, TrialWaveFunction, TwoBody, TwoBodyJastrowOpt,
    TwoBodyJastrowRef,
};
use crate::Real;
use rand::Rng;
use std::sync::Arc;

/// Orbital source description.
#[derive(Debug, Clone)]
pub enum SpoSpec {
    /// Analytic plane waves (the exactness test double).
    PlaneWave { n_orb: usize },
    /// Tricubic table fit from seeded sums of commensurate plane waves.
    Synthetic { grid: [usize; 3], n_orb: usize, extra_waves: usize, extra_amp: f64 },
}

#[derive(Debug, Clone)]
pub struct JastrowSpec {
    /// Per-species one-body amplitudes; empty disables the term.
    pub j1_amps: Vec<f64>,
    pub j1_r_cut: f64,
    pub j2_like_amp: f64,
    pub j2_unlike_amp: f64,
    pub j2_r_cut: f64,
    pub knots: usize,
}

impl JastrowSpec {
    pub fn off() -> Self {
        Self {
            j1_amps: vec![],
            j1_r_cut: 1.0,
            j2_like_amp: 0.0,
            j2_unlike_amp: 0.0,
            j2_r_cut: 1.0,
            knots: 8,
        }
    }

    pub fn has_j2(&self) -> bool {
        self.j2_like_amp != 0.0 || self.j2_unlike_amp != 0.0
    }
}

#[derive(Debug, Clone)]
pub struct PpSpec {
    /// Per-species cutoff radius and channel amplitudes (l = 0, 1).
    pub r_cut: Vec<f64>,
    pub v0_amp: Vec<f64>,
    pub v1_amp: Vec<f64>,
    pub knots: usize,
}

/// One benchmark workload.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub name: String,
    pub cell: Cell,
    pub n_up: usize,
    pub n_dn: usize,
    pub n_ion: usize,
    pub species_names: Vec<String>,
    pub species_charges: Vec<f64>,
    /// Ion species pattern, cycled over the ion count.
    pub species_pattern: Vec<usize>,
    pub spo: SpoSpec,
    pub jastrow: JastrowSpec,
    pub pp: Option<PpSpec>,
    pub coulomb: bool,
    /// Reported unique-orbital count from the workload table; the built set
    /// carries max(n_orb_unique, N/2) lanes so the determinants are square.
    pub n_orb_unique: usize,
    /// Orbital-table size of the original workload, for side-by-side
    /// reporting against the synthetic table.
    pub table_bspline_gb: Option<f64>,
}

impl SystemSpec {
    pub fn n_electrons(&self) -> usize {
        self.n_up + self.n_dn
    }

    pub fn n_det_orbitals(&self) -> usize {
        self.n_up.max(self.n_dn)
    }
}

pub const PRESET_NAMES: [&str; 5] = ["tiny", "graphite", "be-64", "nio-32", "nio-64"];

/// Workload presets: sizes from the standard table, `tiny` for oracle-speed
/// correctness runs.
pub fn preset(name: &str) -> Result<SystemSpec> {
    let spec = match name {
        "tiny" => SystemSpec {
            name: "tiny".into(),
            cell: Cell::periodic([10.0, 10.0, 10.0])?,
            n_up: 7,
            n_dn: 7,
            n_ion: 2,
            species_names: vec!["X".into(), "Y".into()],
            species_charges: vec![4.0, 6.0],
            species_pattern: vec![0, 1],
            spo: SpoSpec::Synthetic { grid: [16, 16, 16], n_orb: 8, extra_waves: 3, extra_amp: 0.2 },
            jastrow: JastrowSpec {
                j1_amps: vec![-0.4, -0.55],
                j1_r_cut: 3.5,
                j2_like_amp: -0.25,
                j2_unlike_amp: -0.4,
                j2_r_cut: 4.0,
                knots: 16,
            },
            pp: Some(PpSpec {
                r_cut: vec![1.4, 1.6],
                v0_amp: vec![0.25, 0.2],
                v1_amp: vec![0.15, 0.1],
                knots: 8,
            }),
            coulomb: true,
            n_orb_unique: 8,
            table_bspline_gb: None,
        },
        "graphite" => SystemSpec {
            name: "graphite".into(),
            cell: Cell::periodic([7.0, 7.0, 20.0])?,
            n_up: 128,
            n_dn: 128,
            n_ion: 64,
            species_names: vec!["C".into()],
            species_charges: vec![4.0],
            species_pattern: vec![0],
            spo: SpoSpec::Synthetic { grid: [28, 28, 80], n_orb: 80, extra_waves: 4, extra_amp: 0.2 },
            jastrow: JastrowSpec {
                j1_amps: vec![-0.4],
                j1_r_cut: 2.8,
                j2_like_amp: -0.25,
                j2_unlike_amp: -0.4,
                j2_r_cut: 3.2,
                knots: 16,
            },
            pp: Some(PpSpec { r_cut: vec![1.2], v0_amp: vec![0.25], v1_amp: vec![0.15], knots: 8 }),
            coulomb: true,
            n_orb_unique: 80,
            table_bspline_gb: Some(0.1),
        },
        "be-64" => SystemSpec {
            name: "be-64".into(),
            cell: Cell::periodic([21.0, 21.0, 36.0])?,
            n_up: 128,
            n_dn: 128,
            n_ion: 64,
            species_names: vec!["Be".into()],
            species_charges: vec![4.0],
            species_pattern: vec![0],
            spo: SpoSpec::Synthetic {
                grid: [84, 84, 144],
                n_orb: 81,
                extra_waves: 4,
                extra_amp: 0.2,
            },
            jastrow: JastrowSpec {
                j1_amps: vec![-0.4],
                j1_r_cut: 4.0,
                j2_like_amp: -0.25,
                j2_unlike_amp: -0.4,
                j2_r_cut: 5.0,
                knots: 16,
            },
            // The beryllium workload runs without pseudopotentials.
            pp: None,
            coulomb: true,
            n_orb_unique: 81,
            table_bspline_gb: Some(1.4),
        },
        "nio-32" => SystemSpec {
            name: "nio-32".into(),
            cell: Cell::periodic([20.0, 20.0, 20.0])?,
            n_up: 192,
            n_dn: 192,
            n_ion: 32,
            species_names: vec!["Ni".into(), "O".into()],
            species_charges: vec![18.0, 6.0],
            species_pattern: vec![0, 1],
            spo: SpoSpec::Synthetic { grid: [80, 80, 80], n_orb: 144, extra_waves: 4, extra_amp: 0.2 },
            jastrow: JastrowSpec {
                j1_amps: vec![-0.5, -0.35],
                j1_r_cut: 3.0,
                j2_like_amp: -0.25,
                j2_unlike_amp: -0.4,
                j2_r_cut: 4.0,
                knots: 16,
            },
            pp: Some(PpSpec {
                r_cut: vec![1.3, 1.1],
                v0_amp: vec![0.3, 0.2],
                v1_amp: vec![0.2, 0.1],
                knots: 8,
            }),
            coulomb: true,
            n_orb_unique: 144,
            table_bspline_gb: Some(1.3),
        },
        "nio-64" => SystemSpec {
            name: "nio-64".into(),
            cell: Cell::periodic([25.2, 25.2, 25.2])?,
            n_up: 384,
            n_dn: 384,
            n_ion: 64,
            species_names: vec!["Ni".into(), "O".into()],
            species_charges: vec![18.0, 6.0],
            species_pattern: vec![0, 1],
            spo: SpoSpec::Synthetic { grid: [80, 80, 80], n_orb: 240, extra_waves: 4, extra_amp: 0.2 },
            jastrow: JastrowSpec {
                j1_amps: vec![-0.5, -0.35],
                j1_r_cut: 3.0,
                j2_like_amp: -0.25,
                j2_unlike_amp: -0.4,
                j2_r_cut: 4.0,
                knots: 16,
            },
            pp: Some(PpSpec {
                r_cut: vec![1.3, 1.1],
                v0_amp: vec![0.3, 0.2],
                v1_amp: vec![0.2, 0.1],
                knots: 8,
            }),
            coulomb: true,
            n_orb_unique: 240,
            table_bspline_gb: Some(2.1),
        },
        other => {
            return Err(QmcError::InvalidArgument(format!(
                "unknown preset '{other}' (expected one of {PRESET_NAMES:?})"
            )))
        }
    };
    Ok(spec)
}

/// Plane-wave exactness system: determinant-only wavefunction, no
/// potential, constant local energy.
pub fn plane_wave_system(n_up: usize, n_dn: usize, cell_len: f64, n_orb: usize) -> SystemSpec {
    SystemSpec {
        name: format!("pw-{}", n_up + n_dn),
        cell: Cell::periodic([cell_len; 3]).expect("positive length"),
        n_up,
        n_dn,
        n_ion: 0,
        species_names: vec![],
        species_charges: vec![],
        species_pattern: vec![],
        spo: SpoSpec::PlaneWave { n_orb },
        jastrow: JastrowSpec::off(),
        pp: None,
        coulomb: false,
        n_orb_unique: n_orb,
        table_bspline_gb: None,
    }
}

/// Built orbital source shared by engines and the oracle.
#[derive(Debug, Clone)]
pub enum SpoBuild {
    PlaneWave(PlaneWaveSPOSet),
    Tricubic(TricubicSPOSet<f64>),
}

impl SpoBuild {
    pub fn engine_set<T: Real>(&self) -> Arc<dyn SpoSet<T>> {
        match self {
            SpoBuild::PlaneWave(s) => Arc::new(s.clone()),
            SpoBuild::Tricubic(s) => Arc::new(s.convert::<T>()),
        }
    }

    pub fn oracle_set(&self) -> OracleSpo {
        match self {
            SpoBuild::PlaneWave(s) => OracleSpo::PlaneWave(s.clone()),
            SpoBuild::Tricubic(s) => OracleSpo::Tricubic(s.clone()),
        }
    }

    pub fn storage_bytes_f64(&self) -> usize {
        match self {
            SpoBuild::PlaneWave(_) => 0,
            SpoBuild::Tricubic(s) => s.storage_bytes(),
        }
    }
}

/// Fully realized system: spec plus all synthetic data, ready to build
/// per-thread engines and the double-precision oracle.
#[derive(Debug, Clone)]
pub struct SystemBuild {
    pub spec: SystemSpec,
    pub seed: u64,
    pub ion_pos: Vec<Vec3<f64>>,
    pub ion_species: Vec<usize>,
    pub spo: SpoBuild,
    pub j1: Vec<CubicBspline1D<f64>>,
    pub j2: Option<SpinChannels<f64>>,
    pub pp: Option<NonlocalPP<f64>>,
}

/// Generate all synthetic data for a spec. Everything is a pure function of
/// (spec, seed), so any report is exactly reproducible.
pub fn build_system(spec: &SystemSpec, seed: u64) -> Result<SystemBuild> {
    let ion_species: Vec<usize> =
        (0..spec.n_ion).map(|i| spec.species_pattern[i % spec.species_pattern.len().max(1)]).collect();
    let ion_pos = ion_lattice(spec, seed);

    let spo = match &spec.spo {
        SpoSpec::PlaneWave { n_orb } => {
            let need = spec.n_det_orbitals().max(*n_orb);
            SpoBuild::PlaneWave(PlaneWaveSPOSet::ladder(spec.cell.lengths, need))
        }
        SpoSpec::Synthetic { grid, n_orb, extra_waves, extra_amp } => {
            let need = spec.n_det_orbitals().max(*n_orb);
            SpoBuild::Tricubic(synthetic_orbital_table(
                spec.cell.lengths,
                *grid,
                need,
                *extra_waves,
                *extra_amp,
                seed,
            )?)
        }
    };

    let j1: Vec<CubicBspline1D<f64>> = spec
        .jastrow
        .j1_amps
        .iter()
        .map(|&amp| radial_functor(amp, spec.jastrow.j1_r_cut, spec.jastrow.knots))
        .collect::<Result<_>>()?;
    let j2 = if spec.jastrow.has_j2() {
        Some(SpinChannels {
            like: radial_functor(spec.jastrow.j2_like_amp, spec.jastrow.j2_r_cut, spec.jastrow.knots)?,
            unlike: radial_functor(
                spec.jastrow.j2_unlike_amp,
                spec.jastrow.j2_r_cut,
                spec.jastrow.knots,
            )?,
        })
    } else {
        None
    };

    let pp = match &spec.pp {
        Some(p) => {
            let mut per_species = Vec::with_capacity(p.r_cut.len());
            for s in 0..p.r_cut.len() {
                let rc = p.r_cut[s];
                let a0 = p.v0_amp[s];
                let a1 = p.v1_amp[s];
                per_species.push(PpChannels {
                    r_cut: rc,
                    v_l: vec![
                        CubicBspline1D::fit(move |r| a0 * (1.0 - r / rc).powi(2), rc, p.knots)?,
                        CubicBspline1D::fit(
                            move |r| a1 * (r / rc) * (1.0 - r / rc).powi(2),
                            rc,
                            p.knots,
                        )?,
                    ],
                });
            }
            Some(NonlocalPP { per_species })
        }
        None => None,
    };

    Ok(SystemBuild { spec: spec.clone(), seed, ion_pos, ion_species, spo, j1, j2, pp })
}

impl SystemBuild {
    pub fn ions<T: Real>(&self) -> Result<ParticleSet<T>> {
        let pos: Vec<Vec3<T>> = self.ion_pos.iter().map(|&p| crate::vec3::from_f64(p)).collect();
        ParticleSet::new(pos, self.ion_species.clone(), self.spec.species_charges.clone())
    }

    /// One per-thread compute engine.
    pub fn engine<T: Real>(&self, variant: Variant, timers_enabled: bool) -> Result<Engine<T>> {
        let n = self.spec.n_electrons();
        let spo = self.spo.engine_set::<T>();
        let det_up = SlaterDetBlock::new(Arc::clone(&spo), 0, self.spec.n_up);
        let det_dn = SlaterDetBlock::new(spo, self.spec.n_up, self.spec.n_dn);
        let j1 = if self.j1.is_empty() {
            None
        } else {
            Some(OneBodyJastrow::new(
                self.j1.iter().map(|f| f.convert()).collect(),
                self.ion_species.clone(),
                n,
            ))
        };
        let j2 = match &self.j2 {
            Some(ch) => match variant {
                Variant::Ref => TwoBody::Ref(TwoBodyJastrowRef::new(ch.convert(), n, self.spec.n_up)),
                Variant::Opt => TwoBody::Opt(TwoBodyJastrowOpt::new(ch.convert(), n, self.spec.n_up)),
            },
            None => TwoBody::None,
        };
        let psi = TrialWaveFunction::new(self.spec.n_up, self.spec.n_dn, j1, j2, det_up, det_dn);
        let aa = match variant {
            Variant::Ref => ElecElecTable::packed(n, self.spec.cell),
            Variant::Opt => ElecElecTable::padded(n, self.spec.cell, UpdatePolicy::OnTheFly),
        };
        Ok(Engine::new(self.spec.cell, Arc::new(self.ions()?), psi, aa, timers_enabled))
    }

    pub fn hamiltonian<T: Real>(&self) -> HamiltonianSpec<T> {
        HamiltonianSpec {
            coulomb: self.spec.coulomb,
            pp: self.pp.as_ref().map(|p| p.convert()),
        }
    }

    /// The double-precision brute-force twin of this system.
    pub fn oracle(&self) -> OracleWavefunction {
        OracleWavefunction {
            cell: self.spec.cell,
            n_up: self.spec.n_up,
            n_dn: self.spec.n_dn,
            ion_pos: self.ion_pos.clone(),
            ion_species: self.ion_species.clone(),
            j1: self.j1.clone(),
            j2: self.j2.clone(),
            spo: self.spo.oracle_set(),
        }
    }

    /// Seeded uniform initial electron positions for one walker.
    pub fn initial_positions(&self, walker_id: u64) -> Vec<Vec3<f64>> {
        let mut rng = stream(self.seed, walker_id, 0, StreamPurpose::Init);
        let l = self.spec.cell.lengths;
        (0..self.spec.n_electrons())
            .map(|_| {
                [
                    rng.gen_range(0.0..l[0]),
                    rng.gen_range(0.0..l[1]),
                    rng.gen_range(0.0..l[2]),
                ]
            })
            .collect()
    }
}

/// Ions on a jittered cubic sublattice, deterministic in the seed.
fn ion_lattice(spec: &SystemSpec, seed: u64) -> Vec<Vec3<f64>> {
    let n = spec.n_ion;
    if n == 0 {
        return vec![];
    }
    let mut rng = stream(seed, 0xD06, 0, StreamPurpose::Init);
    let per_axis = (n as f64).cbrt().ceil() as usize;
    let l = spec.cell.lengths;
    let mut out = Vec::with_capacity(n);
    'fill: for ix in 0..per_axis {
        for iy in 0..per_axis {
            for iz in 0..per_axis {
                if out.len() == n {
                    break 'fill;
                }
                let jitter = 0.05;
                out.push([
                    (ix as f64 + 0.5 + rng.gen_range(-jitter..jitter)) * l[0] / per_axis as f64,
                    (iy as f64 + 0.5 + rng.gen_range(-jitter..jitter)) * l[1] / per_axis as f64,
                    (iz as f64 + 0.5 + rng.gen_range(-jitter..jitter)) * l[2] / per_axis as f64,
                ]);
            }
        }
    }
    out
}

/// Smooth short-range radial shape used for all synthetic Jastrow functors.
fn radial_functor(amp: f64, r_cut: f64, knots: usize) -> Result<CubicBspline1D<f64>> {
    CubicBspline1D::fit(move |r| amp * (1.0 - r / r_cut).powi(3), r_cut, knots)
}

/// Seeded sums of commensurate plane waves, interpolated onto the grid.
/// Orbital o gets the o-th ladder wave at unit amplitude plus `extra_waves`
/// seeded low-frequency waves, which keeps the set linearly independent.
fn synthetic_orbital_table(
    lengths: [f64; 3],
    grid: [usize; 3],
    n_orb: usize,
    extra_waves: usize,
    extra_amp: f64,
    seed: u64,
) -> Result<TricubicSPOSet<f64>> {
    let pool_size = (2 * n_orb + 16).min(400);
    let pool = PlaneWaveSPOSet::ladder(lengths, pool_size);
    let mut rng = stream(seed, 0x5B0, 0, StreamPurpose::Init);
    let mut recipes: Vec<Vec<(Vec3<f64>, Phase, f64)>> = Vec::with_capacity(n_orb);
    for o in 0..n_orb {
        let mut waves = vec![(pool.k_vec(o), pool.phase(o), 1.0)];
        for _ in 0..extra_waves {
            let idx = rng.gen_range(0..pool_size);
            let amp = rng.gen_range(-extra_amp..extra_amp);
            waves.push((pool.k_vec(idx), pool.phase(idx), amp));
        }
        recipes.push(waves);
    }
    let generators: Vec<Box<dyn Fn(Vec3<f64>) -> f64 + Sync>> = recipes
        .into_iter()
        .map(|waves| {
            Box::new(move |p: Vec3<f64>| {
                waves
                    .iter()
                    .map(|&(k, phase, amp)| {
                        let arg = k[0] * p[0] + k[1] * p[1] + k[2] * p[2];
                        amp * match phase {
                            Phase::Cos => arg.cos(),
                            Phase::Sin => arg.sin(),
                        }
                    })
                    .sum()
            }) as Box<dyn Fn(Vec3<f64>) -> f64 + Sync>
        })
        .collect();
    let refs: Vec<&(dyn Fn(Vec3<f64>) -> f64 + Sync)> =
        generators.iter().map(|g| g.as_ref() as _).collect();
    TricubicSPOSet::fit(lengths, grid, &refs)
}
