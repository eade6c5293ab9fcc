//! Box datasets: standard Gaussian noise with a block of `+amplitude`
//! (class 1) or `−amplitude` (class 0) added on known cells.
//!
//! Box placement for the default `T = N = 100`, scaled proportionally for
//! other sizes:
//!
//! | kind | timesteps | features |
//! |------|-----------|----------|
//! | earlier / middle / latter | `[0,30)` / `[30,70)` / `[70,100)` | `[10,40)` |
//! | mixed | random 30-step window per sample | random 30-feature window |
//! | three-earlier | `[0,10)`, `[10,20)`, `[20,30)` | `[10,20)`, `[45,55)`, `[80,90)` |
//! | three-middle | `[30,43)`, `[43,56)`, `[56,70)` | same bands |
//! | three-latter | `[70,80)`, `[80,90)`, `[90,100)` | same bands |
//! | moving(s) | `[s, s+20)` | `[10,40)` |
//!
//! Labels alternate by sample index, so classes are balanced to within one
//! sample. Values are rounded to `f32` so datasets survive a round trip
//! through the ICTS file format unchanged.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Dataset, Sample, Split, Splits};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

/// A block of cells `[time_start, time_end) × [feature_start, feature_end)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxSpec {
    pub time_start: usize,
    pub time_end: usize,
    pub feature_start: usize,
    pub feature_end: usize,
    pub amplitude: f64,
}

impl BoxSpec {
    pub fn validate(&self, steps: usize, features: usize) -> Result<()> {
        if self.time_start >= self.time_end || self.time_end > steps {
            return Err(Error::validation(format!(
                "box time range [{}, {}) does not fit in {steps} steps",
                self.time_start, self.time_end
            )));
        }
        if self.feature_start >= self.feature_end || self.feature_end > features {
            return Err(Error::validation(format!(
                "box feature range [{}, {}) does not fit in {features} features",
                self.feature_start, self.feature_end
            )));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::validation("box amplitude must be finite"));
        }
        Ok(())
    }

    pub fn contains(&self, t: usize, i: usize) -> bool {
        (self.time_start..self.time_end).contains(&t) && (self.feature_start..self.feature_end).contains(&i)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoxKind {
    Earlier,
    Middle,
    Latter,
    Mixed,
    ThreeEarlier,
    ThreeMiddle,
    ThreeLatter,
    Moving { start: usize },
}

impl BoxKind {
    pub const STATIC: [BoxKind; 7] = [
        BoxKind::Earlier,
        BoxKind::Middle,
        BoxKind::Latter,
        BoxKind::Mixed,
        BoxKind::ThreeEarlier,
        BoxKind::ThreeMiddle,
        BoxKind::ThreeLatter,
    ];

    pub const MOVING_STARTS: [usize; 5] = [0, 20, 40, 60, 80];
}

impl fmt::Display for BoxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoxKind::Earlier => f.write_str("earlier"),
            BoxKind::Middle => f.write_str("middle"),
            BoxKind::Latter => f.write_str("latter"),
            BoxKind::Mixed => f.write_str("mixed"),
            BoxKind::ThreeEarlier => f.write_str("three-earlier"),
            BoxKind::ThreeMiddle => f.write_str("three-middle"),
            BoxKind::ThreeLatter => f.write_str("three-latter"),
            BoxKind::Moving { start } => write!(f, "moving-{start}"),
        }
    }
}

impl FromStr for BoxKind {
    type Err = Error;

    /// Accepts the [`Display`](fmt::Display) names; `moving-<start>` for
    /// moving boxes.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "earlier" => BoxKind::Earlier,
            "middle" => BoxKind::Middle,
            "latter" => BoxKind::Latter,
            "mixed" => BoxKind::Mixed,
            "three-earlier" => BoxKind::ThreeEarlier,
            "three-middle" => BoxKind::ThreeMiddle,
            "three-latter" => BoxKind::ThreeLatter,
            _ => match s.strip_prefix("moving-").map(str::parse) {
                Some(Ok(start)) => BoxKind::Moving { start },
                _ => return Err(Error::validation(format!("unknown dataset kind {s:?}"))),
            },
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetConfig {
    pub kind: BoxKind,
    pub steps: usize,
    pub features: usize,
    pub train: usize,
    pub test: usize,
    pub amplitude: f64,
    /// Feature band of single-box kinds; `None` means `[N/10, 4N/10)`.
    pub band: Option<(usize, usize)>,
    /// Duration of moving boxes.
    pub moving_width: usize,
    /// Extra pure-noise steps appended after the `steps` box region, used as
    /// an off-task control window.
    pub tail: usize,
    pub seed: u64,
}

impl DatasetConfig {
    /// `T = N = 100`, 1000 training and 300 test samples, amplitude 1.
    pub fn new(kind: BoxKind, seed: u64) -> Self {
        DatasetConfig {
            kind,
            steps: 100,
            features: 100,
            train: 1000,
            test: 300,
            amplitude: 1.0,
            band: None,
            moving_width: 20,
            tail: 0,
            seed,
        }
    }

    pub fn total_steps(&self) -> usize {
        self.steps + self.tail
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.features == 0 {
            return Err(Error::validation("dataset dimensions must be positive"));
        }
        if self.train < 2 || self.test < 2 {
            return Err(Error::validation("each split needs at least two samples"));
        }
        if self.kind == BoxKind::Mixed {
            let (t, n) = self.mixed_size();
            if t == 0 || n == 0 {
                return Err(Error::validation("dataset too small for a mixed box"));
            }
            return Ok(());
        }
        for b in self.fixed_boxes()? {
            b.validate(self.steps, self.features)?;
        }
        Ok(())
    }

    fn band(&self) -> (usize, usize) {
        self.band.unwrap_or((self.features / 10, self.features * 4 / 10))
    }

    fn mixed_size(&self) -> (usize, usize) {
        (self.steps * 3 / 10, self.features * 3 / 10)
    }

    fn frac(total: usize, num: usize, den: usize) -> usize {
        total * num / den
    }

    /// Boxes shared by every sample; errors for the mixed kind, whose box is
    /// drawn per sample.
    pub fn fixed_boxes(&self) -> Result<Vec<BoxSpec>> {
        let (t, n, a) = (self.steps, self.features, self.amplitude);
        let (f0, f1) = self.band();
        let single = |t0: usize, t1: usize| {
            vec![BoxSpec {
                time_start: t0,
                time_end: t1,
                feature_start: f0,
                feature_end: f1,
                amplitude: a,
            }]
        };
        let three = |lo: usize, hi: usize| {
            let cut = [lo, lo + (hi - lo) / 3, lo + 2 * (hi - lo) / 3, hi];
            let bands = [(10, 20), (45, 55), (80, 90)];
            (0..3)
                .map(|k| BoxSpec {
                    time_start: cut[k],
                    time_end: cut[k + 1],
                    feature_start: Self::frac(n, bands[k].0, 100),
                    feature_end: Self::frac(n, bands[k].1, 100),
                    amplitude: a,
                })
                .collect::<Vec<_>>()
        };
        let (early, late) = (Self::frac(t, 3, 10), Self::frac(t, 7, 10));
        Ok(match self.kind {
            BoxKind::Earlier => single(0, early),
            BoxKind::Middle => single(early, late),
            BoxKind::Latter => single(late, t),
            BoxKind::ThreeEarlier => three(0, early),
            BoxKind::ThreeMiddle => three(early, late),
            BoxKind::ThreeLatter => three(late, t),
            BoxKind::Moving { start } => single(start, start + self.moving_width),
            BoxKind::Mixed => return Err(Error::validation("mixed boxes are drawn per sample")),
        })
    }
}

/// Generates `count` samples of one split. Sample `i` draws from its own
/// ChaCha stream, so any subset can be regenerated independently.
pub fn generate_split(config: &DatasetConfig, split: Split, count: usize) -> Result<Dataset> {
    config.validate()?;
    let fixed = match config.kind {
        BoxKind::Mixed => None,
        _ => Some(config.fixed_boxes()?),
    };
    let offset = match split {
        Split::Train => 0,
        Split::Test => rng::TEST_STREAM_OFFSET,
    };
    let (steps, n) = (config.total_steps(), config.features);
    let samples = (0..count)
        .map(|i| {
            let mut r = rng::stream(config.seed, offset + i as u64);
            let boxes = match &fixed {
                Some(b) => b.clone(),
                None => {
                    let (bt, bn) = config.mixed_size();
                    let t0 = r.gen_range(0..=config.steps - bt);
                    let f0 = r.gen_range(0..=n - bn);
                    vec![BoxSpec {
                        time_start: t0,
                        time_end: t0 + bt,
                        feature_start: f0,
                        feature_end: f0 + bn,
                        amplitude: config.amplitude,
                    }]
                }
            };
            let label = i % 2;
            let sign = if label == 1 { 1.0 } else { -1.0 };
            let mut x = vec![0.0; steps * n];
            let mut mask = vec![0.0; steps * n];
            for t in 0..steps {
                for j in 0..n {
                    let mut v: f64 = r.sample(StandardNormal);
                    if let Some(b) = boxes.iter().find(|b| b.contains(t, j)) {
                        v += sign * b.amplitude;
                        mask[t * n + j] = 1.0;
                    }
                    x[t * n + j] = v as f32 as f64;
                }
            }
            Ok(Sample {
                x: Tensor::matrix(steps, n, x)?,
                label,
                mask: Some(Tensor::matrix(steps, n, mask)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples, steps, n, 2)
}

/// Generates the training and test splits of `config`.
pub fn generate(config: &DatasetConfig) -> Result<Splits> {
    Ok(Splits {
        train: generate_split(config, Split::Train, config.train)?,
        test: generate_split(config, Split::Test, config.test)?,
    })
}
