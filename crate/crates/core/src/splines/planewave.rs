//! Analytic plane-wave orbital set.
//!
//! Each orbital is cos(k.r) or sin(k.r) with k commensurate with the cell,
//! hence an exact eigenfunction of -(1/2) lap with eigenvalue k^2/2. Used as
//! an exactness test double for the splined orbitals: a determinant built
//! from these has a configuration-independent local energy.

use crate::splines::{SpoScratch, SpoSet};
use crate::vec3::{self, Vec3};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Cos,
    Sin,
}

#[derive(Debug, Clone)]
pub struct PlaneWaveSPOSet {
    k_vecs: Vec<Vec3<f64>>,
    phases: Vec<Phase>,
}

impl PlaneWaveSPOSet {
    pub fn new(k_vecs: Vec<Vec3<f64>>, phases: Vec<Phase>) -> Self {
        assert_eq!(k_vecs.len(), phases.len());
        Self { k_vecs, phases }
    }

    /// First `n_orb` members of the cos/sin ladder over the reciprocal
    /// lattice of an orthorhombic cell: 1, cos(k1.r), sin(k1.r), ...
    pub fn ladder(cell_lengths: [f64; 3], n_orb: usize) -> Self {
        let mut k_vecs = Vec::with_capacity(n_orb);
        let mut phases = Vec::with_capacity(n_orb);
        let two_pi = 2.0 * std::f64::consts::PI;
        // Enumerate integer triples ordered by |m|^2 so low-energy orbitals
        // come first; each nonzero k contributes a cos and a sin orbital.
        let mut triples: Vec<[i32; 3]> = Vec::new();
        let reach = 4i32;
        for mx in -reach..=reach {
            for my in -reach..=reach {
                for mz in -reach..=reach {
                    triples.push([mx, my, mz]);
                }
            }
        }
        triples.sort_by_key(|m| {
            (m.iter().map(|&x| i64::from(x) * i64::from(x)).sum::<i64>(), m[0], m[1], m[2])
        });
        let mut seen = std::collections::HashSet::new();
        'outer: for m in triples {
            // cos(-k.r) duplicates cos(k.r); keep one representative per +-k.
            let canon = if (m[0], m[1], m[2]) < (0, 0, 0) { [-m[0], -m[1], -m[2]] } else { m };
            if !seen.insert(canon) {
                continue;
            }
            let k = [
                two_pi * f64::from(canon[0]) / cell_lengths[0],
                two_pi * f64::from(canon[1]) / cell_lengths[1],
                two_pi * f64::from(canon[2]) / cell_lengths[2],
            ];
            let zero = canon == [0, 0, 0];
            for phase in [Phase::Cos, Phase::Sin] {
                if zero && phase == Phase::Sin {
                    continue;
                }
                k_vecs.push(k);
                phases.push(phase);
                if k_vecs.len() == n_orb {
                    break 'outer;
                }
            }
        }
        assert_eq!(k_vecs.len(), n_orb, "reach too small for requested orbital count");
        Self { k_vecs, phases }
    }

    /// Exact kinetic eigenvalue sum over the first `n` orbitals, counting
    /// k^2/2 per orbital.
    pub fn kinetic_sum(&self, n: usize) -> f64 {
        self.k_vecs[..n].iter().map(|&k| 0.5 * vec3::norm2(k)).sum()
    }

    pub fn k_vec(&self, o: usize) -> Vec3<f64> {
        self.k_vecs[o]
    }

    pub fn phase(&self, o: usize) -> Phase {
        self.phases[o]
    }
}

impl<T: Real> SpoSet<T> for PlaneWaveSPOSet {
    fn n_orb(&self) -> usize {
        self.k_vecs.len()
    }

    fn eval_v(&self, pos: Vec3<T>, values: &mut [T]) {
        let p = vec3::to_f64(pos);
        for (o, (&k, &phase)) in self.k_vecs.iter().zip(&self.phases).enumerate() {
            let arg = vec3::dot(k, p);
            let v = match phase {
                Phase::Cos => arg.cos(),
                Phase::Sin => arg.sin(),
            };
            values[o] = T::from_f64(v);
        }
    }

    fn eval_vgh(&self, pos: Vec3<T>, out: &mut SpoScratch<T>) {
        let p = vec3::to_f64(pos);
        for (o, (&k, &phase)) in self.k_vecs.iter().zip(&self.phases).enumerate() {
            let arg = vec3::dot(k, p);
            let (v, dv) = match phase {
                Phase::Cos => (arg.cos(), -arg.sin()),
                Phase::Sin => (arg.sin(), arg.cos()),
            };
            out.v[o] = T::from_f64(v);
            for d in 0..3 {
                out.g[d][o] = T::from_f64(k[d] * dv);
            }
            // Hessian of both phases is -k_a k_b times the value.
            out.h[0][o] = T::from_f64(-k[0] * k[0] * v);
            out.h[1][o] = T::from_f64(-k[0] * k[1] * v);
            out.h[2][o] = T::from_f64(-k[0] * k[2] * v);
            out.h[3][o] = T::from_f64(-k[1] * k[1] * v);
            out.h[4][o] = T::from_f64(-k[1] * k[2] * v);
            out.h[5][o] = T::from_f64(-k[2] * k[2] * v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn k_zero_orbital_is_constant() {
        let s = PlaneWaveSPOSet::ladder([10.0, 10.0, 10.0], 1);
        let mut scratch = SpoScratch::<f64>::new(1);
        s.eval_vgh([3.0, -2.0, 700.0], &mut scratch);
        assert_eq!(scratch.v[0], 1.0);
        assert_eq!(scratch.gradient(0), [0.0; 3]);
        assert_eq!(scratch.laplacian(0), 0.0);
    }

    #[test]
    fn eigenfunction_identity_everywhere() {
        let s = PlaneWaveSPOSet::ladder([7.0, 9.0, 11.0], 12);
        let mut scratch = SpoScratch::<f64>::new(12);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let p = [rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)];
            s.eval_vgh(p, &mut scratch);
            for o in 0..12 {
                let k2 = crate::vec3::norm2(s.k_vec(o));
                assert_relative_eq!(scratch.laplacian(o), -k2 * scratch.v[o], epsilon = 1e-12, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let s = PlaneWaveSPOSet::ladder([5.0, 6.0, 7.0], 9);
        let mut scratch = SpoScratch::<f64>::new(9);
        let mut vp = vec![0.0; 9];
        let mut vm = vec![0.0; 9];
        let p = [0.4, 1.9, 2.7];
        s.eval_vgh(p, &mut scratch);
        let h = 1e-6;
        for d in 0..3 {
            let mut pp = p;
            let mut pm = p;
            pp[d] += h;
            pm[d] -= h;
            s.eval_v(pp, &mut vp);
            s.eval_v(pm, &mut vm);
            for o in 0..9 {
                let fd = (vp[o] - vm[o]) / (2.0 * h);
                assert_relative_eq!(scratch.g[d][o], fd, epsilon = 1e-8, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn ladder_orbitals_are_distinct() {
        let s = PlaneWaveSPOSet::ladder([10.0, 10.0, 10.0], 16);
        let mut sigs = std::collections::HashSet::new();
        for o in 0..16 {
            let k = s.k_vec(o);
            let sig = (format!("{:?}", k), s.phases[o] == Phase::Cos);
            assert!(sigs.insert(sig), "duplicate orbital {o}");
        }
    }
}
