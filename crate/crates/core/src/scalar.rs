//! Backward-adaptive scalar quantizer with step-size multipliers.
//!
//! Mid-rise levels `±(2k+1)·Δ/2`. After every sample the step is multiplied by
//! the factor of the chosen magnitude level and clamped. The update depends
//! only on the index, so a decoder fed the same indices tracks the encoder.

use thiserror::Error;

pub const MIN_BITS: u32 = 2;
pub const MAX_BITS: u32 = 5;
pub const DEFAULT_INITIAL_STEP: f64 = 0.02;
pub const DEFAULT_STEP_MIN: f64 = 1e-5;
pub const DEFAULT_STEP_MAX: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum QuantizerError {
    #[error("scalar quantizer bits must be in [{MIN_BITS}, {MAX_BITS}], got {0}")]
    Bits(u32),
    #[error("multiplier table needs {expected} entries, got {actual}")]
    TableLength { expected: usize, actual: usize },
    #[error("multipliers must be positive and finite")]
    Multiplier,
    #[error("invalid step bounds: need 0 < min <= initial <= max")]
    StepBounds,
    #[error("index {index} out of range for {bits}-bit quantizer")]
    IndexOutOfRange { index: u32, bits: u32 },
}

/// Default multiplier table for `bits` (one entry per magnitude level).
pub fn default_multipliers(bits: u32) -> Result<Vec<f64>, QuantizerError> {
    Ok(match bits {
        2 => vec![0.8, 1.6],
        3 => vec![0.9, 0.9, 1.25, 1.75],
        4 => vec![0.93, 0.93, 0.93, 0.93, 1.2, 1.6, 2.0, 2.4],
        5 => {
            let mut t = vec![0.96; 8];
            t.extend((0..8).map(|i| 1.2 + i as f64 / 7.0));
            t
        }
        b => return Err(QuantizerError::Bits(b)),
    })
}

/// Static parameters of a [`JayantQuantizer`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarQuantizerConfig {
    pub bits: u32,
    pub initial_step: f64,
    pub step_min: f64,
    pub step_max: f64,
    pub multipliers: Vec<f64>,
}

impl ScalarQuantizerConfig {
    pub fn with_defaults(bits: u32) -> Result<Self, QuantizerError> {
        Ok(Self {
            bits,
            initial_step: DEFAULT_INITIAL_STEP,
            step_min: DEFAULT_STEP_MIN,
            step_max: DEFAULT_STEP_MAX,
            multipliers: default_multipliers(bits)?,
        })
    }

    pub fn validate(&self) -> Result<(), QuantizerError> {
        if !(MIN_BITS..=MAX_BITS).contains(&self.bits) {
            return Err(QuantizerError::Bits(self.bits));
        }
        let expected = 1usize << (self.bits - 1);
        if self.multipliers.len() != expected {
            return Err(QuantizerError::TableLength {
                expected,
                actual: self.multipliers.len(),
            });
        }
        if self.multipliers.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(QuantizerError::Multiplier);
        }
        let ok = self.step_min > 0.0
            && self.step_min <= self.initial_step
            && self.initial_step <= self.step_max
            && self.step_max.is_finite();
        if !ok {
            return Err(QuantizerError::StepBounds);
        }
        Ok(())
    }
}

/// Adaptive quantizer state. Index layout: MSB is the sign (0 = positive),
/// the remaining `bits - 1` bits are the magnitude level.
#[derive(Debug, Clone, PartialEq)]
pub struct JayantQuantizer {
    config: ScalarQuantizerConfig,
    step: f64,
}

impl JayantQuantizer {
    pub fn new(config: ScalarQuantizerConfig) -> Result<Self, QuantizerError> {
        config.validate()?;
        let step = config.initial_step;
        Ok(Self { config, step })
    }

    pub fn with_defaults(bits: u32) -> Result<Self, QuantizerError> {
        Self::new(ScalarQuantizerConfig::with_defaults(bits)?)
    }

    pub fn config(&self) -> &ScalarQuantizerConfig {
        &self.config
    }

    pub fn bits(&self) -> u32 {
        self.config.bits
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn levels(&self) -> u32 {
        1 << (self.config.bits - 1)
    }

    /// Index for `e` under the current step, without changing state.
    ///
    /// Boundary values go to the smaller-magnitude level; zero is positive.
    pub fn select(&self, e: f64) -> u32 {
        let max_level = self.levels() - 1;
        let mag = e.abs();
        let level = if mag > 0.0 {
            let k = (mag / self.step).ceil() - 1.0;
            if k >= max_level as f64 {
                max_level
            } else {
                k.max(0.0) as u32
            }
        } else {
            0
        };
        let sign = if e < 0.0 { 1 } else { 0 };
        (sign << (self.config.bits - 1)) | level
    }

    /// Reconstruction value for `index` under the current step.
    pub fn level_value(&self, index: u32) -> f64 {
        let level = index & (self.levels() - 1);
        let mag = (2 * level + 1) as f64 * self.step / 2.0;
        if index >> (self.config.bits - 1) == 1 {
            -mag
        } else {
            mag
        }
    }

    /// Decoder side: reconstruction for `index`, then the step update.
    pub fn dequantize_index(&mut self, index: u32) -> Result<f64, QuantizerError> {
        if index >= 1 << self.config.bits {
            return Err(QuantizerError::IndexOutOfRange {
                index,
                bits: self.config.bits,
            });
        }
        Ok(self.apply(index))
    }

    /// Encoder side: `(index, reconstruction)` for `e`, then the step update.
    pub fn quantize_sample(&mut self, e: f64) -> (u32, f64) {
        let index = self.select(e);
        (index, self.apply(index))
    }

    /// `index` must be in range.
    pub(crate) fn apply(&mut self, index: u32) -> f64 {
        let value = self.level_value(index);
        let level = (index & (self.levels() - 1)) as usize;
        self.step = (self.step * self.config.multipliers[level])
            .clamp(self.config.step_min, self.config.step_max);
        value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_step(bits: u32) -> JayantQuantizer {
        JayantQuantizer::new(ScalarQuantizerConfig {
            initial_step: 1.0,
            ..ScalarQuantizerConfig::with_defaults(bits).unwrap()
        })
        .unwrap()
    }

    #[test]
    fn two_bit_nearest_level() {
        let mut q = unit_step(2);
        // levels ±0.5, ±1.5: 0.3 is nearest to +0.5
        let candidates = [0.5, 1.5, -0.5, -1.5];
        let nearest = candidates
            .iter()
            .copied()
            .min_by(|a: &f64, b| (a - 0.3).abs().total_cmp(&(b - 0.3).abs()))
            .unwrap();
        let (idx, rec) = q.quantize_sample(0.3);
        assert_eq!(idx, 0);
        assert_eq!(rec, nearest);
        assert_eq!(q.step(), 0.8);
    }

    #[test]
    fn zero_is_positive_level_zero() {
        let mut q = JayantQuantizer::with_defaults(3).unwrap();
        let step = q.step();
        let (idx, rec) = q.quantize_sample(0.0);
        assert_eq!(idx, 0);
        assert_eq!(rec, step / 2.0);
        let (idx, _) = q.quantize_sample(-0.0);
        assert_eq!(idx, 0);
    }

    #[test]
    fn saturation() {
        let mut q = unit_step(2);
        let (idx, rec) = q.quantize_sample(-1000.0);
        assert_eq!(idx, 0b11);
        assert_eq!(rec, -1.5);
        assert_eq!(q.step(), 1.0); // 1.6 clamped to step_max
    }

    #[test]
    fn boundary_goes_to_smaller_magnitude() {
        let q = unit_step(3);
        // boundary between +0.5 and +1.5 is 1.0
        assert_eq!(q.select(1.0), 0);
        assert_eq!(q.select(-1.0), 0b100);
        assert_eq!(q.select(1.0 + 1e-12), 1);
        assert_eq!(q.select(2.0), 1);
    }

    #[test]
    fn dequantize_level_zero_with_step_two() {
        let mut q = JayantQuantizer::new(ScalarQuantizerConfig {
            initial_step: 2.0,
            step_max: 4.0,
            ..ScalarQuantizerConfig::with_defaults(2).unwrap()
        })
        .unwrap();
        assert_eq!(q.dequantize_index(0).unwrap(), 1.0);
        assert!(matches!(
            q.dequantize_index(4),
            Err(QuantizerError::IndexOutOfRange { index: 4, bits: 2 })
        ));
    }

    #[test]
    fn default_tables() {
        for bits in 2..=5 {
            let t = default_multipliers(bits).unwrap();
            assert_eq!(t.len(), 1 << (bits - 1));
        }
        let t5 = default_multipliers(5).unwrap();
        assert_eq!(t5[7], 0.96);
        assert!((t5[8] - 1.2).abs() < 1e-15);
        assert!((t5[15] - 2.2).abs() < 1e-15);
        assert!(default_multipliers(6).is_err());
    }

    #[test]
    fn config_errors() {
        let mut c = ScalarQuantizerConfig::with_defaults(3).unwrap();
        c.multipliers.pop();
        assert!(matches!(
            JayantQuantizer::new(c),
            Err(QuantizerError::TableLength { .. })
        ));
        let mut c = ScalarQuantizerConfig::with_defaults(3).unwrap();
        c.multipliers[0] = 0.0;
        assert_eq!(JayantQuantizer::new(c), Err(QuantizerError::Multiplier));
        let c = ScalarQuantizerConfig {
            step_min: 0.5,
            ..ScalarQuantizerConfig::with_defaults(3).unwrap()
        };
        assert_eq!(JayantQuantizer::new(c), Err(QuantizerError::StepBounds));
    }

    proptest! {
        #[test]
        fn decoder_tracks_encoder(
            bits in 2u32..=5,
            residuals in prop::collection::vec(-2.0f64..2.0, 1..300),
        ) {
            let mut enc = JayantQuantizer::with_defaults(bits).unwrap();
            let mut dec = enc.clone();
            for e in residuals {
                let (idx, rec) = enc.quantize_sample(e);
                let back = dec.dequantize_index(idx).unwrap();
                prop_assert_eq!(rec.to_bits(), back.to_bits());
                prop_assert_eq!(&enc, &dec);
            }
        }

        #[test]
        fn step_stays_in_bounds(
            bits in 2u32..=5,
            residuals in prop::collection::vec(prop_oneof![
                Just(0.0), Just(1e9), Just(-1e9), -1.0f64..1.0
            ], 1..400),
        ) {
            let mut q = JayantQuantizer::with_defaults(bits).unwrap();
            for e in residuals {
                q.quantize_sample(e);
                prop_assert!(q.step() >= DEFAULT_STEP_MIN && q.step() <= DEFAULT_STEP_MAX);
            }
        }

        #[test]
        fn unit_multipliers_give_fixed_uniform_quantizer(
            bits in 2u32..=5,
            residuals in prop::collection::vec(-0.2f64..0.2, 1..100),
        ) {
            let mut cfg = ScalarQuantizerConfig::with_defaults(bits).unwrap();
            cfg.multipliers = vec![1.0; 1 << (bits - 1)];
            let mut q = JayantQuantizer::new(cfg).unwrap();
            let step = q.step();
            let max_mag = ((1u32 << bits) - 1) as f64 * step / 2.0;
            for e in residuals {
                let (_, rec) = q.quantize_sample(e);
                prop_assert_eq!(q.step(), step);
                // inside the range the error is at most half a step
                if e.abs() <= max_mag + step / 2.0 {
                    prop_assert!((rec - e).abs() <= step / 2.0 + 1e-15);
                }
            }
        }
    }
}
