//! Seedable random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the experiment seed and
//! selected by a 64-bit stream id, so each consumer replays independently of
//! how many draws the others make. Stream allocation:
//!
//! | id | consumer                 |
//! |----|--------------------------|
//! | 0  | simulated data           |
//! | 1  | momentum / velocity      |
//! | 2  | step-size randomization  |
//! | 3  | accept/reject coin       |
//! | 4  | Fisher-information MC    |
//!
//! Pilot chains used by the step-size search add [`PILOT_STREAM_STRIDE`]
//! per pilot to the chain stream ids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const STREAM_DATA: u64 = 0;
pub const STREAM_MOMENTUM: u64 = 1;
pub const STREAM_STEPSIZE: u64 = 2;
pub const STREAM_ACCEPT: u64 = 3;
pub const STREAM_FISHER: u64 = 4;
pub const PILOT_STREAM_STRIDE: u64 = 16;

/// One independent, replayable random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
    stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { rng, stream_id }
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// `n` iid standard normal variates.
    pub fn normal(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.standard_normal()).collect()
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.standard_normal();
        }
    }

    /// A variate in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "uniform range [{lo}, {hi}) is empty"
            )));
        }
        let u: f64 = self.rng.gen();
        // guard the rounding case lo + (hi-lo)*u == hi
        let x = lo + (hi - lo) * u;
        Ok(if x < hi { x } else { lo })
    }

    /// `true` with probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> Result<bool> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "Bernoulli probability {p} outside [0, 1]"
            )));
        }
        let u: f64 = self.rng.gen();
        Ok(u < p)
    }
}
