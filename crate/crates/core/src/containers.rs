//! Generic aligned structure-of-arrays container.
//!
//! [`AlignedSoAVector`] is the transposed form of an AoS position list: one
//! contiguous scalar lane per spatial component, each lane padded to a
//! multiple of the alignment block and starting on a block boundary. All
//! vectorizable kernels (distance rows, Jastrow sums, spline gathers) run
//! over these lanes.

use crate::error::{QmcError, Result};
use crate::vec3::Vec3;
use crate::Real;

/// Default alignment block in elements: 512-bit SIMD of 4-byte scalars.
pub const DEFAULT_BLOCK: usize = 16;

/// Smallest multiple of `block` that is >= max(n, 1).
///
/// Errors if `block == 0`.
pub fn padded_size(n: usize, block: usize) -> Result<usize> {
    if block == 0 {
        return Err(QmcError::InvalidArgument("alignment block must be >= 1".into()));
    }
    let n = n.max(1);
    Ok(n.div_ceil(block) * block)
}

/// D-lane padded SoA mirror of a list of D-vectors.
///
/// Padding slots (logical indices `n..n_padded`) hold 0 and must never be
/// read by reductions over logical elements; masking the logical range is
/// the consumer's job.
#[derive(Debug)]
pub struct AlignedSoAVector<T: Real> {
    n: usize,
    n_padded: usize,
    dims: usize,
    block: usize,
    // Backing buffer over-allocated by one block so lane 0 can be shifted
    // onto a block-aligned boundary. `offset` is that shift in elements and
    // is specific to this allocation; Clone must recompute it.
    buf: Vec<T>,
    offset: usize,
}

impl<T: Real> AlignedSoAVector<T> {
    /// Zero-filled container for `n` logical D-vectors.
    pub fn new(n: usize, dims: usize, block: usize) -> Result<Self> {
        let n_padded = padded_size(n, block)?;
        let buf = vec![T::zero(); dims * n_padded + block];
        let offset = aligned_offset(&buf, block);
        Ok(Self { n, n_padded, dims, block, buf, offset })
    }

    /// 3-lane container with the default block.
    pub fn with_len(n: usize) -> Self {
        Self::new(n, 3, DEFAULT_BLOCK).expect("default block is nonzero")
    }

    /// Transpose an AoS list into lanes; padding stays zero.
    pub fn from_aos(aos: &[Vec3<T>]) -> Self {
        let mut v = Self::with_len(aos.len());
        v.assign_aos(aos).expect("length matches by construction");
        v
    }

    /// AoS-to-SoA assignment over all logical elements.
    pub fn assign_aos(&mut self, aos: &[Vec3<T>]) -> Result<()> {
        if aos.len() != self.n {
            return Err(QmcError::SizeMismatch { expected: self.n, got: aos.len() });
        }
        for d in 0..self.dims {
            let lane = self.lane_mut(d);
            for (slot, value) in lane.iter_mut().zip(aos.iter()) {
                *slot = value[d];
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn padded_len(&self) -> usize {
        self.n_padded
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn block(&self) -> usize {
        self.block
    }

    /// Full padded lane `d`, including zeroed padding slots.
    #[inline]
    pub fn lane(&self, d: usize) -> &[T] {
        let start = self.offset + d * self.n_padded;
        &self.buf[start..start + self.n_padded]
    }

    #[inline]
    pub fn lane_mut(&mut self, d: usize) -> &mut [T] {
        let start = self.offset + d * self.n_padded;
        &mut self.buf[start..start + self.n_padded]
    }

    /// Gather element `i` back into AoS form.
    pub fn element(&self, i: usize) -> Result<Vec3<T>> {
        if i >= self.n {
            return Err(QmcError::OutOfRange { index: i, len: self.n });
        }
        Ok(self.element_unchecked(i))
    }

    #[inline(always)]
    pub(crate) fn element_unchecked(&self, i: usize) -> Vec3<T> {
        [self.lane(0)[i], self.lane(1)[i], self.lane(2)[i]]
    }

    /// Scatter a D-vector into slot `i` of every lane.
    pub fn set_element(&mut self, i: usize, value: Vec3<T>) -> Result<()> {
        if i >= self.n {
            return Err(QmcError::OutOfRange { index: i, len: self.n });
        }
        for d in 0..self.dims {
            self.lane_mut(d)[i] = value[d];
        }
        Ok(())
    }

    /// Byte address of lane `d`'s first slot; exposed for alignment checks.
    pub fn lane_addr(&self, d: usize) -> usize {
        self.lane(d).as_ptr() as usize
    }
}

impl<T: Real> Clone for AlignedSoAVector<T> {
    fn clone(&self) -> Self {
        // A fresh allocation lands at a different address, so the aligned
        // offset must be recomputed rather than copied.
        let mut out = Self::new(self.n, self.dims, self.block).expect("block validated at construction");
        for d in 0..self.dims {
            out.lane_mut(d).copy_from_slice(self.lane(d));
        }
        out
    }
}

fn aligned_offset<T: Real>(buf: &[T], block: usize) -> usize {
    let elem = std::mem::size_of::<T>();
    let align_bytes = block * elem;
    let addr = buf.as_ptr() as usize;
    // Vec<T> is at least elem-aligned, so the byte shift is divisible by elem.
    let shift_bytes = (align_bytes - addr % align_bytes) % align_bytes;
    shift_bytes / elem
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn padded_size_examples() {
        assert_eq!(padded_size(5, 8).unwrap(), 8);
        assert_eq!(padded_size(16, 8).unwrap(), 16);
        assert_eq!(padded_size(768, 16).unwrap(), 768);
        assert_eq!(padded_size(0, 4).unwrap(), 4);
        assert!(padded_size(10, 0).is_err());
    }

    #[test]
    fn padded_size_arithmetic_oracle() {
        // 768 = 48 * 16, so padding must not grow it.
        assert_eq!(768 % 16, 0);
        assert_eq!(padded_size(768, 16).unwrap(), 48 * 16);
    }

    #[test]
    fn transpose_matches_definition() {
        let aos: Vec<[f64; 3]> = vec![[1., 2., 3.], [4., 5., 6.], [7., 8., 9.]];
        let v = AlignedSoAVector::from_aos(&aos);
        assert_eq!(&v.lane(0)[..3], &[1., 4., 7.]);
        assert_eq!(&v.lane(1)[..3], &[2., 5., 8.]);
        assert_eq!(&v.lane(2)[..3], &[3., 6., 9.]);
        // Padding is zeroed.
        for d in 0..3 {
            for &x in &v.lane(d)[3..] {
                assert_eq!(x, 0.0);
            }
        }
        assert_eq!(v.element(1).unwrap(), [4., 5., 6.]);
    }

    #[test]
    fn empty_input_gives_one_block_of_zeros() {
        let v = AlignedSoAVector::<f32>::from_aos(&[]);
        assert_eq!(v.len(), 0);
        assert_eq!(v.padded_len(), DEFAULT_BLOCK);
        for d in 0..3 {
            assert!(v.lane(d).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn out_of_range_element_is_error() {
        let v = AlignedSoAVector::<f64>::from_aos(&[[1., 2., 3.]]);
        assert!(matches!(v.element(1), Err(QmcError::OutOfRange { .. })));
        let mut v = v;
        assert!(v.set_element(1, [0.; 3]).is_err());
    }

    #[test]
    fn set_element_is_local() {
        let mut v = AlignedSoAVector::from_aos(&[[1., 2., 3.], [4., 5., 6.]]);
        v.set_element(0, [9., 9., 9.]).unwrap();
        assert_eq!(v.element(0).unwrap(), [9., 9., 9.]);
        assert_eq!(v.element(1).unwrap(), [4., 5., 6.]);
    }

    #[test]
    fn lanes_are_block_aligned() {
        for n in [0usize, 1, 5, 16, 17, 768] {
            let v = AlignedSoAVector::<f32>::new(n, 3, 16).unwrap();
            let align = 16 * std::mem::size_of::<f32>();
            for d in 0..3 {
                assert_eq!(v.lane_addr(d) % align, 0, "lane {d} of n={n}");
            }
            let c = v.clone();
            for d in 0..3 {
                assert_eq!(c.lane_addr(d) % align, 0, "cloned lane {d} of n={n}");
            }
        }
    }

    #[test]
    fn padding_does_not_affect_reductions() {
        let aos: Vec<[f64; 3]> = (0..7).map(|i| [i as f64, 1.0, -(i as f64)]).collect();
        let v = AlignedSoAVector::from_aos(&aos);
        let direct: f64 = aos.iter().map(|p| p[0]).sum();
        let lane_sum: f64 = v.lane(0)[..v.len()].iter().sum();
        let lane_sum_padded: f64 = v.lane(0).iter().sum();
        assert_eq!(direct, lane_sum);
        // Zero sentinel means even a full-lane sum is unchanged here; the
        // contract only promises the masked sum.
        assert_eq!(lane_sum, lane_sum_padded);
    }

    proptest! {
        #[test]
        fn padded_size_monotone_idempotent(n in 0usize..10_000, b in 1usize..64) {
            let p = padded_size(n, b).unwrap();
            prop_assert!(p >= n.max(1));
            prop_assert_eq!(p % b, 0);
            prop_assert_eq!(padded_size(p, b).unwrap(), p);
            if n > 0 {
                prop_assert!(padded_size(n - 1, b).unwrap() <= p);
            }
        }

        #[test]
        fn soa_tracks_aos_mirror(ops in proptest::collection::vec((0usize..16, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..200)) {
            let mut mirror: Vec<[f64; 3]> = vec![[0.0; 3]; 16];
            let mut v = AlignedSoAVector::from_aos(&mirror);
            for (i, x, y, z) in ops {
                mirror[i] = [x, y, z];
                v.set_element(i, [x, y, z]).unwrap();
            }
            for (i, m) in mirror.iter().enumerate() {
                prop_assert_eq!(v.element(i).unwrap(), *m);
            }
            for d in 0..3 {
                for i in 0..16 {
                    prop_assert_eq!(v.lane(d)[i], mirror[i][d]);
                }
            }
        }

        #[test]
        fn aos_round_trip(aos in proptest::collection::vec([-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0], 0..50)) {
            let v = AlignedSoAVector::from_aos(&aos);
            for (i, p) in aos.iter().enumerate() {
                prop_assert_eq!(v.element(i).unwrap(), *p);
            }
        }
    }
}
