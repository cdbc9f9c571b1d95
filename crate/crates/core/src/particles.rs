//! Particle sets with dual AoS/SoA position storage, and walkers.
//!
//! A [`ParticleSet`] is per-thread compute state; a [`Walker`] is the plain
//! serializable Monte Carlo sample that gets loaded into the compute objects,
//! advanced, and stored back.

use crate::containers::AlignedSoAVector;
use crate::error::{QmcError, Result};
use crate::vec3::{self, Vec3};
use crate::Real;
use std::io::{Read, Write};

/// Positions (AoS and SoA mirrors), wavefunction derivatives, and species
/// metadata for one particle kind (electrons or ions).
#[derive(Debug, Clone)]
pub struct ParticleSet<T: Real> {
    pos: Vec<Vec3<T>>,
    pos_soa: AlignedSoAVector<T>,
    /// Per-particle gradient of ln Psi, filled by the wavefunction.
    pub grad: Vec<Vec3<f64>>,
    /// Per-particle laplacian of ln Psi.
    pub lap: Vec<f64>,
    /// Per-particle species id, indexing `charges`.
    pub species: Vec<usize>,
    /// Effective charge Z* per species.
    pub charges: Vec<f64>,
}

impl<T: Real> ParticleSet<T> {
    pub fn new(pos: Vec<Vec3<T>>, species: Vec<usize>, charges: Vec<f64>) -> Result<Self> {
        if species.len() != pos.len() {
            return Err(QmcError::SizeMismatch { expected: pos.len(), got: species.len() });
        }
        if let Some(&bad) = species.iter().find(|&&s| s >= charges.len().max(1)) {
            return Err(QmcError::InvalidArgument(format!("species id {bad} has no charge entry")));
        }
        let n = pos.len();
        let pos_soa = AlignedSoAVector::from_aos(&pos);
        Ok(Self {
            pos,
            pos_soa,
            grad: vec![vec3::zero(); n],
            lap: vec![0.0; n],
            species,
            charges,
        })
    }

    /// Electrons: unit charge, single species.
    pub fn electrons(pos: Vec<Vec3<T>>) -> Self {
        let n = pos.len();
        Self::new(pos, vec![0; n], vec![-1.0]).expect("species sized to match")
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    #[inline]
    pub fn position(&self, i: usize) -> Vec3<T> {
        self.pos[i]
    }

    pub fn positions(&self) -> &[Vec3<T>] {
        &self.pos
    }

    pub fn soa(&self) -> &AlignedSoAVector<T> {
        &self.pos_soa
    }

    pub fn charge_of(&self, i: usize) -> f64 {
        self.charges[self.species[i]]
    }

    /// Commit a single-particle move to both mirrors.
    #[inline]
    pub fn set_position(&mut self, i: usize, value: Vec3<T>) -> Result<()> {
        if i >= self.pos.len() {
            return Err(QmcError::OutOfRange { index: i, len: self.pos.len() });
        }
        self.pos[i] = value;
        self.pos_soa.set_element(i, value)
    }

    /// Rebuild the SoA mirror from the AoS side.
    pub fn sync_soa(&mut self) {
        self.pos_soa.assign_aos(&self.pos).expect("mirrors share length");
    }

    /// Overwrite all positions from a walker's double-precision record.
    pub fn load_positions(&mut self, walker: &Walker) -> Result<()> {
        if walker.pos.len() != self.pos.len() {
            return Err(QmcError::SizeMismatch { expected: self.pos.len(), got: walker.pos.len() });
        }
        for (dst, src) in self.pos.iter_mut().zip(walker.pos.iter()) {
            *dst = vec3::from_f64(*src);
        }
        self.sync_soa();
        Ok(())
    }

    /// Persist positions into a walker (inverse of [`Self::load_positions`]).
    pub fn store_positions(&self, walker: &mut Walker) -> Result<()> {
        if walker.pos.len() != self.pos.len() {
            return Err(QmcError::SizeMismatch { expected: self.pos.len(), got: walker.pos.len() });
        }
        for (dst, src) in walker.pos.iter_mut().zip(self.pos.iter()) {
            *dst = vec3::to_f64(*src);
        }
        Ok(())
    }

    pub fn positions_f64(&self) -> Vec<Vec3<f64>> {
        self.pos.iter().map(|&p| vec3::to_f64(p)).collect()
    }
}

/// One Monte Carlo sample: positions plus the serialized component state
/// needed to resume particle-by-particle updates without recomputing.
#[derive(Debug, Clone)]
pub struct Walker {
    pub pos: Vec<Vec3<f64>>,
    pub weight: f64,
    pub multiplicity: u32,
    /// Sweeps since this walker last accepted any move.
    pub age: u32,
    pub e_local: f64,
    /// E_L from the previous generation, for the symmetrized branching weight.
    pub e_local_prev: f64,
    /// Concatenated per-component sections in registration order.
    pub buffer: Vec<f64>,
    /// Identifier of this walker's counter-based RNG stream.
    pub rng_id: u64,
    /// Sweeps since the last from-scratch recompute of component state.
    pub sweeps_since_refresh: u32,
    /// Set when updates became unrecoverable and the walker needs a respawn.
    pub flagged: bool,
}

impl Walker {
    pub fn new(pos: Vec<Vec3<f64>>, buffer_len: usize, rng_id: u64) -> Self {
        Self {
            pos,
            weight: 1.0,
            multiplicity: 1,
            age: 0,
            e_local: 0.0,
            e_local_prev: 0.0,
            buffer: vec![0.0; buffer_len],
            rng_id,
            sweeps_since_refresh: 0,
            flagged: false,
        }
    }

    pub fn n_particles(&self) -> usize {
        self.pos.len()
    }

    /// Checkpoint dump: little-endian header {n, buffer_len}, then positions,
    /// weight, e_local, and the component buffer.
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(&(self.pos.len() as u64).to_le_bytes())?;
        out.write_all(&(self.buffer.len() as u64).to_le_bytes())?;
        for p in &self.pos {
            for &x in p {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        out.write_all(&self.weight.to_le_bytes())?;
        out.write_all(&self.e_local.to_le_bytes())?;
        for &x in &self.buffer {
            out.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<Self> {
        let n = read_u64(input)? as usize;
        let buffer_len = read_u64(input)? as usize;
        let mut pos = Vec::with_capacity(n);
        for _ in 0..n {
            pos.push([read_f64(input)?, read_f64(input)?, read_f64(input)?]);
        }
        let weight = read_f64(input)?;
        let e_local = read_f64(input)?;
        let mut buffer = Vec::with_capacity(buffer_len);
        for _ in 0..buffer_len {
            buffer.push(read_f64(input)?);
        }
        Ok(Self {
            pos,
            weight,
            multiplicity: 1,
            age: 0,
            e_local,
            e_local_prev: e_local,
            buffer,
            rng_id: 0,
            sweeps_since_refresh: 0,
            flagged: false,
        })
    }
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(input: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
