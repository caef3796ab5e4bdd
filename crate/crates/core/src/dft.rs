//! Real-input transforms of length `n_f` behind a swappable provider.
//!
//! Forward transforms are unnormalized and inverse transforms carry the
//! `1/n_f` factor, so a pointwise spectral product followed by
//! [`DftPlan::inverse_real`] is a circular convolution with unit gain.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex32;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};

pub const MIN_FFT_SIZE: usize = 32;

/// One real-signal spectrum: `n_f / 2 + 1` complex bins.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumBlock {
    bins: Vec<Complex32>,
}

impl SpectrumBlock {
    pub fn zeros(bins: usize) -> Self {
        SpectrumBlock {
            bins: vec![Complex32::new(0.0, 0.0); bins],
        }
    }

    pub fn from_bins(bins: Vec<Complex32>) -> Self {
        SpectrumBlock { bins }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn bins(&self) -> &[Complex32] {
        &self.bins
    }

    pub fn bins_mut(&mut self) -> &mut [Complex32] {
        &mut self.bins
    }

    pub fn clear(&mut self) {
        self.bins.fill(Complex32::new(0.0, 0.0));
    }

    /// True when the DC and Nyquist bins are real, as they must be for a real signal.
    pub fn has_real_edges(&self) -> bool {
        edges_are_real(&self.bins)
    }
}

fn edges_are_real(bins: &[Complex32]) -> bool {
    let real = |c: &Complex32| c.im.abs() <= 1e-6 * c.re.abs().max(1.0);
    match (bins.first(), bins.last()) {
        (Some(first), Some(last)) => real(first) && real(last),
        _ => true,
    }
}

/// A transform engine for one fixed size. Implementations may destroy their inputs.
pub trait TransformProvider: Send + Sync {
    fn len(&self) -> usize;

    /// Complex scratch length required by both directions.
    fn scratch_len(&self) -> usize;

    /// `output[j] = sum_t input[t] exp(-2 pi i j t / n)` for `j` in `0..=n/2`.
    fn forward(&self, input: &mut [f32], output: &mut [Complex32], scratch: &mut [Complex32]);

    /// Inverse without the `1/n` factor. `input` edge bins must be real.
    fn inverse_unnormalized(
        &self,
        input: &mut [Complex32],
        output: &mut [f32],
        scratch: &mut [Complex32],
    );
}

/// Provider backed by the `realfft` crate.
pub struct RealFftProvider {
    forward: Arc<dyn RealToComplex<f32>>,
    inverse: Arc<dyn ComplexToReal<f32>>,
    scratch: usize,
}

impl RealFftProvider {
    pub fn new(size: usize) -> Self {
        let mut planner = RealFftPlanner::<f32>::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let scratch = forward.get_scratch_len().max(inverse.get_scratch_len());
        RealFftProvider {
            forward,
            inverse,
            scratch,
        }
    }
}

impl TransformProvider for RealFftProvider {
    fn len(&self) -> usize {
        self.forward.len()
    }

    fn scratch_len(&self) -> usize {
        self.scratch
    }

    fn forward(&self, input: &mut [f32], output: &mut [Complex32], scratch: &mut [Complex32]) {
        let need = self.forward.get_scratch_len();
        self.forward
            .process_with_scratch(input, output, &mut scratch[..need])
            .expect("forward transform lengths are checked by DftPlan");
    }

    fn inverse_unnormalized(
        &self,
        input: &mut [Complex32],
        output: &mut [f32],
        scratch: &mut [Complex32],
    ) {
        let need = self.inverse.get_scratch_len();
        // realfft rejects tiny imaginary residue on the edge bins; the
        // contract says those are zero, so enforce it.
        input[0].im = 0.0;
        if let Some(last) = input.last_mut() {
            last.im = 0.0;
        }
        self.inverse
            .process_with_scratch(input, output, &mut scratch[..need])
            .expect("inverse transform lengths are checked by DftPlan");
    }
}

/// Immutable, shareable transform plan for one power-of-two size.
#[derive(Clone)]
pub struct DftPlan {
    provider: Arc<dyn TransformProvider>,
}

impl fmt::Debug for DftPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DftPlan").field("size", &self.size()).finish()
    }
}

impl DftPlan {
    pub fn new(size: usize) -> Result<Self> {
        Self::with_provider(Arc::new(RealFftProvider::new(size.max(1))))
    }

    pub fn with_provider(provider: Arc<dyn TransformProvider>) -> Result<Self> {
        let size = provider.len();
        if !size.is_power_of_two() || size < MIN_FFT_SIZE {
            return Err(Error::LengthMismatch {
                expected: size.next_power_of_two().max(MIN_FFT_SIZE),
                actual: size,
            });
        }
        Ok(DftPlan { provider })
    }

    pub fn size(&self) -> usize {
        self.provider.len()
    }

    pub fn bins(&self) -> usize {
        self.size() / 2 + 1
    }

    pub fn scratch_len(&self) -> usize {
        self.provider.scratch_len()
    }

    pub fn make_scratch(&self) -> Vec<Complex32> {
        vec![Complex32::new(0.0, 0.0); self.scratch_len()]
    }

    pub fn forward_real(&self, buffer: &[f32]) -> Result<SpectrumBlock> {
        self.check_len(buffer.len(), self.size())?;
        let mut work = buffer.to_vec();
        let mut out = SpectrumBlock::zeros(self.bins());
        let mut scratch = self.make_scratch();
        self.provider
            .forward(&mut work, out.bins_mut(), &mut scratch);
        Ok(out)
    }

    pub fn inverse_real(&self, spectrum: &SpectrumBlock) -> Result<Vec<f32>> {
        self.check_len(spectrum.len(), self.bins())?;
        if !spectrum.has_real_edges() {
            return Err(Error::NonRealEdgeBins);
        }
        let mut work = spectrum.bins().to_vec();
        let mut out = vec![0.0; self.size()];
        let mut scratch = self.make_scratch();
        self.provider
            .inverse_unnormalized(&mut work, &mut out, &mut scratch);
        let scale = 1.0 / self.size() as f32;
        out.iter_mut().for_each(|s| *s *= scale);
        Ok(out)
    }

    /// Allocation-free forward transform. `input` is used as workspace.
    pub(crate) fn forward_in_place(
        &self,
        input: &mut [f32],
        output: &mut [Complex32],
        scratch: &mut [Complex32],
    ) {
        debug_assert_eq!(input.len(), self.size());
        debug_assert_eq!(output.len(), self.bins());
        self.provider.forward(input, output, scratch);
    }

    /// Allocation-free inverse without the `1/n_f` factor. `input` is used as workspace.
    pub(crate) fn inverse_unnormalized_in_place(
        &self,
        input: &mut [Complex32],
        output: &mut [f32],
        scratch: &mut [Complex32],
    ) {
        debug_assert_eq!(input.len(), self.bins());
        debug_assert_eq!(output.len(), self.size());
        self.provider.inverse_unnormalized(input, output, scratch);
    }

    fn check_len(&self, actual: usize, expected: usize) -> Result<()> {
        if actual != expected {
            return Err(Error::LengthMismatch { expected, actual });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn naive_dft(x: &[f32]) -> Vec<(f64, f64)> {
        let n = x.len();
        (0..=n / 2)
            .map(|j| {
                x.iter().enumerate().fold((0.0, 0.0), |(re, im), (t, &v)| {
                    let phase = -2.0 * std::f64::consts::PI * (j * t) as f64 / n as f64;
                    (re + v as f64 * phase.cos(), im + v as f64 * phase.sin())
                })
            })
            .collect()
    }

    fn random(n: usize, seed: u64) -> Vec<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample::<f32, _>(StandardNormal)).collect()
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(DftPlan::new(16).is_err());
        assert!(DftPlan::new(48).is_err());
        assert!(DftPlan::new(32).is_ok());
    }

    #[test]
    fn zero_and_impulse() {
        let plan = DftPlan::new(256).unwrap();
        let zero = plan.forward_real(&[0.0; 256]).unwrap();
        assert!(zero.bins().iter().all(|c| c.norm() == 0.0));

        let mut delta = vec![0.0; 256];
        delta[0] = 1.0;
        let spec = plan.forward_real(&delta).unwrap();
        assert_eq!(spec.len(), 129);
        assert!(spec.bins().iter().all(|c| *c == Complex32::new(1.0, 0.0)));
    }

    #[test]
    fn matches_naive_dft() {
        let plan = DftPlan::new(256).unwrap();
        let x = random(256, 7);
        let spec = plan.forward_real(&x).unwrap();
        let reference = naive_dft(&x);
        let worst = spec
            .bins()
            .iter()
            .zip(&reference)
            .map(|(c, &(re, im))| (c.re as f64 - re).abs().max((c.im as f64 - im).abs()))
            .fold(0.0, f64::max);
        // Bins are sums of 256 unit-variance terms (magnitude ~16); absolute
        // agreement is bounded by f32 resolution at that scale.
        assert!(worst < 1e-4 * 16.0, "max bin error {worst}");
        // Unit-scale random input normalised by sqrt(n) meets 1e-5 absolute.
        let scaled: Vec<f32> = x.iter().map(|v| v / 16.0).collect();
        let spec = plan.forward_real(&scaled).unwrap();
        let reference = naive_dft(&scaled);
        let worst = spec
            .bins()
            .iter()
            .zip(&reference)
            .map(|(c, &(re, im))| (c.re as f64 - re).abs().max((c.im as f64 - im).abs()))
            .fold(0.0, f64::max);
        assert!(worst < 1e-5, "max bin error {worst}");
    }

    #[test]
    fn inverse_basics() {
        let plan = DftPlan::new(64).unwrap();
        let zero = plan.inverse_real(&SpectrumBlock::zeros(33)).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));

        let ones = SpectrumBlock::from_bins(vec![Complex32::new(1.0, 0.0); 33]);
        let delta = plan.inverse_real(&ones).unwrap();
        assert!((delta[0] - 1.0).abs() < 1e-6);
        assert!(delta[1..].iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn inverse_errors() {
        let plan = DftPlan::new(64).unwrap();
        assert!(matches!(
            plan.inverse_real(&SpectrumBlock::zeros(32)),
            Err(Error::LengthMismatch { .. })
        ));
        let mut bad = SpectrumBlock::zeros(33);
        bad.bins_mut()[0].im = 0.5;
        assert!(matches!(plan.inverse_real(&bad), Err(Error::NonRealEdgeBins)));
        let mut bad = SpectrumBlock::zeros(33);
        bad.bins_mut()[32].im = -0.5;
        assert!(matches!(plan.inverse_real(&bad), Err(Error::NonRealEdgeBins)));
        assert!(matches!(
            plan.forward_real(&[0.0; 63]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn round_trip() {
        let plan = DftPlan::new(512).unwrap();
        let x = random(512, 3);
        let back = plan.inverse_real(&plan.forward_real(&x).unwrap()).unwrap();
        let worst = x
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max);
        assert!(worst < 1e-6, "round trip error {worst}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn buffer(n: usize) -> impl Strategy<Value = Vec<f32>> {
            proptest::collection::vec(-1.0f32..1.0, n)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn linearity(x in buffer(128), y in buffer(128), a in -2.0f32..2.0, b in -2.0f32..2.0) {
                let plan = DftPlan::new(128).unwrap();
                let mix: Vec<f32> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
                let fx = plan.forward_real(&x).unwrap();
                let fy = plan.forward_real(&y).unwrap();
                let fm = plan.forward_real(&mix).unwrap();
                // Scale the tolerance with the sqrt(n) growth of unnormalized bins.
                let tol = 1e-5 * (128f32).sqrt() * 4.0;
                for j in 0..fm.len() {
                    let expect = fx.bins()[j] * a + fy.bins()[j] * b;
                    prop_assert!((fm.bins()[j] - expect).norm() < tol);
                }
            }

            #[test]
            fn parseval(x in buffer(256)) {
                let plan = DftPlan::new(256).unwrap();
                let spec = plan.forward_real(&x).unwrap();
                let b = spec.bins();
                let n = b.len() - 1;
                let time: f64 = x.iter().map(|v| (*v as f64).powi(2)).sum();
                let mut freq = b[0].norm_sqr() as f64 + b[n].norm_sqr() as f64;
                freq += 2.0 * b[1..n].iter().map(|c| c.norm_sqr() as f64).sum::<f64>();
                freq /= 256.0;
                prop_assert!((time - freq).abs() <= 1e-4 * time.max(1e-12));
            }

            #[test]
            fn round_trip_identity(x in buffer(64)) {
                let plan = DftPlan::new(64).unwrap();
                let back = plan.inverse_real(&plan.forward_real(&x).unwrap()).unwrap();
                for (a, b) in x.iter().zip(&back) {
                    prop_assert!((a - b).abs() < 1e-6);
                }
            }
        }
    }
}
