//! Frequency-domain filter partitions and the frequency delay line.

use num_complex::Complex32;

use crate::config::partition_count;
use crate::dft::{DftPlan, SpectrumBlock};
use crate::error::{Error, Result};

const ZERO: Complex32 = Complex32::new(0.0, 0.0);

/// `C_out x K` sub-filter spectra, stored channel-major then partition-major.
///
/// Sub-filter `k` of channel `c` covers taps `k*n_x .. (k+1)*n_x`, the last one
/// zero-padded, and is transformed after padding with `n_x` further zeros.
#[derive(Debug, Clone)]
pub struct PartitionedFilterSet {
    channels: usize,
    partitions: usize,
    filter_length: usize,
    bins: usize,
    spectra: Vec<Complex32>,
}

impl PartitionedFilterSet {
    /// Partitions and transforms `filters` (all of equal length) with `plan`.
    pub fn new(filters: &[Vec<f32>], plan: &DftPlan) -> Result<Self> {
        let filter_length = check_filters(filters)?;
        let block = plan.size() / 2;
        let bins = plan.bins();
        let partitions = partition_count(filter_length, block)?;
        let total = filters.len() * partitions * bins;

        let mut spectra = Vec::new();
        spectra
            .try_reserve_exact(total)
            .map_err(|_| Error::OutOfMemory(total * std::mem::size_of::<Complex32>()))?;
        spectra.resize(total, ZERO);

        let mut frame = vec![0.0f32; plan.size()];
        let mut scratch = plan.make_scratch();
        for (filter, channel) in filters.iter().zip(spectra.chunks_exact_mut(partitions * bins)) {
            for (k, out) in channel.chunks_exact_mut(bins).enumerate() {
                let start = k * block;
                let taps = &filter[start..(start + block).min(filter_length)];
                frame.fill(0.0);
                frame[..taps.len()].copy_from_slice(taps);
                plan.forward_in_place(&mut frame, out, &mut scratch);
            }
        }

        Ok(PartitionedFilterSet {
            channels: filters.len(),
            partitions,
            filter_length,
            bins,
            spectra,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn partitions(&self) -> usize {
        self.partitions
    }

    pub fn filter_length(&self) -> usize {
        self.filter_length
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// All `K` sub-filter spectra of one channel, back to back.
    pub fn channel(&self, c: usize) -> &[Complex32] {
        let span = self.partitions * self.bins;
        &self.spectra[c * span..(c + 1) * span]
    }

    pub fn spectrum(&self, c: usize, k: usize) -> &[Complex32] {
        let start = (c * self.partitions + k) * self.bins;
        &self.spectra[start..start + self.bins]
    }

    pub fn spectrum_block(&self, c: usize, k: usize) -> SpectrumBlock {
        SpectrumBlock::from_bins(self.spectrum(c, k).to_vec())
    }

    /// Multiplies every spectrum by `factor`.
    pub fn scale(&mut self, factor: f32) {
        self.spectra.iter_mut().for_each(|v| *v *= factor);
    }

    /// Builds a set from raw spectra laid out as `[c][k][bin]`.
    pub fn from_spectra(
        channels: usize,
        partitions: usize,
        bins: usize,
        filter_length: usize,
        spectra: Vec<Complex32>,
    ) -> Result<Self> {
        if channels == 0 || partitions == 0 || bins == 0 {
            return Err(Error::EmptyFilter);
        }
        if spectra.len() != channels * partitions * bins {
            return Err(Error::LengthMismatch {
                expected: channels * partitions * bins,
                actual: spectra.len(),
            });
        }
        Ok(PartitionedFilterSet {
            channels,
            partitions,
            filter_length,
            bins,
            spectra,
        })
    }
}

fn check_filters(filters: &[Vec<f32>]) -> Result<usize> {
    let first = filters.first().ok_or(Error::EmptyFilter)?.len();
    if first == 0 {
        return Err(Error::EmptyFilter);
    }
    if let Some(other) = filters.iter().map(Vec::len).find(|&l| l != first) {
        return Err(Error::FilterLengthMismatch { first, other });
    }
    Ok(first)
}

/// Ring of the `K` most recent input spectra of one channel.
///
/// `slot(0)` is the newest spectrum and `slot(K-1)` the oldest. Pushing moves
/// the head instead of shifting the stored blocks.
#[derive(Debug, Clone)]
pub struct FrequencyDelayLine {
    capacity: usize,
    bins: usize,
    head: usize,
    slots: Vec<Complex32>,
}

impl FrequencyDelayLine {
    pub fn new(capacity: usize, bins: usize) -> Result<Self> {
        let total = capacity * bins;
        if total == 0 {
            return Err(Error::ZeroLength);
        }
        let mut slots = Vec::new();
        slots
            .try_reserve_exact(total)
            .map_err(|_| Error::OutOfMemory(total * std::mem::size_of::<Complex32>()))?;
        slots.resize(total, ZERO);
        Ok(FrequencyDelayLine {
            capacity,
            bins,
            head: 0,
            slots,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Spectrum received `k` pushes ago.
    pub fn slot(&self, k: usize) -> &[Complex32] {
        let idx = self.physical(k);
        &self.slots[idx * self.bins..(idx + 1) * self.bins]
    }

    /// Ages every slot by one block and returns the new (stale) slot 0 for overwriting.
    pub fn advance(&mut self) -> &mut [Complex32] {
        self.head = if self.head + 1 == self.capacity {
            0
        } else {
            self.head + 1
        };
        let start = self.head * self.bins;
        &mut self.slots[start..start + self.bins]
    }

    pub fn push(&mut self, spectrum: &[Complex32]) -> Result<()> {
        if spectrum.len() != self.bins {
            return Err(Error::LengthMismatch {
                expected: self.bins,
                actual: spectrum.len(),
            });
        }
        self.advance().copy_from_slice(spectrum);
        Ok(())
    }

    pub fn reset(&mut self) {
        self.slots.fill(ZERO);
        self.head = 0;
    }

    /// Calls `f(k, slot(k))` for `k` in `0..K`, newest first.
    #[inline]
    pub fn for_each_slot(&self, mut f: impl FnMut(usize, &[Complex32])) {
        let b = self.bins;
        let (older, newer) = self.slots.split_at((self.head + 1) * b);
        // `older` holds physical slots 0..=head, newest at its end.
        let mut k = 0;
        for block in older.chunks_exact(b).rev() {
            f(k, block);
            k += 1;
        }
        for block in newer.chunks_exact(b).rev() {
            f(k, block);
            k += 1;
        }
    }

    fn physical(&self, k: usize) -> usize {
        assert!(k < self.capacity, "slot {k} out of range");
        (self.head + self.capacity - k) % self.capacity
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f32) -> Complex32 {
        Complex32::new(v, 0.0)
    }

    #[test]
    fn unit_impulse_partition_is_flat() {
        let plan = DftPlan::new(128).unwrap();
        let mut h = vec![0.0; 64];
        h[0] = 1.0;
        let set = PartitionedFilterSet::new(&[h], &plan).unwrap();
        assert_eq!(set.partitions(), 1);
        assert!(set.spectrum(0, 0).iter().all(|&v| (v - c(1.0)).norm() < 1e-7));
    }

    #[test]
    fn tail_partition_is_zero_padded() {
        let plan = DftPlan::new(64).unwrap();
        let mut h = vec![0.0; 40];
        h[33] = 1.0; // partition 1, offset 1
        let set = PartitionedFilterSet::new(&[h], &plan).unwrap();
        assert_eq!(set.partitions(), 2);
        assert!(set.spectrum(0, 0).iter().all(|v| v.norm() < 1e-7));
        let time = plan.inverse_real(&set.spectrum_block(0, 1)).unwrap();
        assert!((time[1] - 1.0).abs() < 1e-6);
        assert!(time[32..].iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn shape_for_long_filters() {
        let plan = DftPlan::new(256).unwrap();
        let filters = vec![vec![0.0; 1000]; 3];
        let set = PartitionedFilterSet::new(&filters, &plan).unwrap();
        assert_eq!((set.channels(), set.partitions(), set.bins()), (3, 8, 129));
        assert_eq!(set.channel(2).len(), 8 * 129);
    }

    #[test]
    fn filter_validation() {
        let plan = DftPlan::new(64).unwrap();
        assert!(matches!(
            PartitionedFilterSet::new(&[vec![0.0; 100], vec![0.0; 200]], &plan),
            Err(Error::FilterLengthMismatch { first: 100, other: 200 })
        ));
        assert!(matches!(
            PartitionedFilterSet::new(&[], &plan),
            Err(Error::EmptyFilter)
        ));
        assert!(matches!(
            PartitionedFilterSet::new(&[vec![]], &plan),
            Err(Error::EmptyFilter)
        ));
    }

    #[test]
    fn delay_line_order() {
        let mut fdl = FrequencyDelayLine::new(3, 2).unwrap();
        assert!(fdl.slot(0).iter().all(|v| v.norm() == 0.0));
        for v in 1..=4 {
            fdl.push(&[c(v as f32), c(v as f32)]).unwrap();
        }
        assert_eq!(fdl.slot(0)[0], c(4.0));
        assert_eq!(fdl.slot(1)[0], c(3.0));
        assert_eq!(fdl.slot(2)[0], c(2.0));

        let mut seen = Vec::new();
        fdl.for_each_slot(|k, s| seen.push((k, s[0].re)));
        assert_eq!(seen, vec![(0, 4.0), (1, 3.0), (2, 2.0)]);

        fdl.reset();
        assert!((0..3).all(|k| fdl.slot(k).iter().all(|v| v.norm() == 0.0)));
        assert!(fdl.push(&[c(1.0)]).is_err());
    }

    #[test]
    fn single_slot_line() {
        let mut fdl = FrequencyDelayLine::new(1, 1).unwrap();
        fdl.push(&[c(5.0)]).unwrap();
        fdl.push(&[c(6.0)]).unwrap();
        assert_eq!(fdl.slot(0)[0], c(6.0));
        let mut n = 0;
        fdl.for_each_slot(|_, _| n += 1);
        assert_eq!(n, 1);
    }
}
