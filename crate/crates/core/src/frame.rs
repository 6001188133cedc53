//! Frame timing metadata that carries no pixel data.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid frame rate `{0}`: expected a positive number or ratio such as 1, 2, 0.5 or 30000/1001")]
pub struct FpsError(pub String);

/// Sampling rate as a reduced positive ratio of frames per second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fps {
    num: u32,
    den: u32,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Fps {
    pub const ONE: Fps = Fps { num: 1, den: 1 };

    pub fn new(num: u32, den: u32) -> Result<Self, FpsError> {
        if num == 0 || den == 0 {
            return Err(FpsError(format!("{num}/{den}")));
        }
        let g = gcd(u64::from(num), u64::from(den)) as u32;
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn integer(fps: u32) -> Result<Self, FpsError> {
        Self::new(fps, 1)
    }

    pub fn numerator(&self) -> u32 {
        self.num
    }

    pub fn denominator(&self) -> u32 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }

    /// Timestamp of the `index`-th sample: `index / fps` seconds.
    pub fn timestamp(&self, index: u32) -> f64 {
        (f64::from(index) * f64::from(self.den)) / f64::from(self.num)
    }

    /// True when every sample falls on a whole second.
    pub fn whole_seconds(&self) -> bool {
        self.num == 1
    }
}

impl fmt::Display for Fps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Fps {
    type Err = FpsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || FpsError(s.to_string());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse().map_err(|_| err())?;
            let d = d.trim().parse().map_err(|_| err())?;
            return Fps::new(n, d).map_err(|_| err());
        }
        if let Ok(n) = s.parse::<u32>() {
            return Fps::new(n, 1).map_err(|_| err());
        }
        let v: f64 = s.parse().map_err(|_| err())?;
        if !(v.is_finite() && v > 0.0 && v < f64::from(u32::MAX) / 1000.0) {
            return Err(err());
        }
        Fps::new((v * 1000.0).round() as u32, 1000).map_err(|_| err())
    }
}

impl Serialize for Fps {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.den == 1 {
            serializer.serialize_u32(self.num)
        } else {
            serializer.serialize_str(&self.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for Fps {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u32),
            Float(f64),
            Text(String),
        }
        let text = match Repr::deserialize(deserializer)? {
            Repr::Int(n) => n.to_string(),
            Repr::Float(v) => v.to_string(),
            Repr::Text(s) => s,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Index and timestamp of one sampled frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameStamp {
    pub index: u32,
    pub timestamp_s: f64,
}

/// Everything about a frame sequence except its pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub source_id: String,
    pub fps: Fps,
    pub frames: Vec<FrameStamp>,
}

impl SequenceMeta {
    /// Metadata for `count` frames sampled at `fps` starting from index 0.
    pub fn uniform(source_id: impl Into<String>, fps: Fps, count: u32) -> Self {
        Self {
            source_id: source_id.into(),
            fps,
            frames: (0..count)
                .map(|index| FrameStamp {
                    index,
                    timestamp_s: fps.timestamp(index),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// External decoder invocation. Arguments may contain `{input}`, `{fps}` and
/// `{output}` placeholders; the decoder must write `{output}/NNNNNN.png`
/// numbered from 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderCommand {
    pub program: String,
    pub args: Vec<String>,
}

pub const DEFAULT_DECODER_TEMPLATE: &str = "ffmpeg -hide_banner -loglevel error -nostdin -i {input} -vf fps={fps} -start_number 0 {output}/%06d.png";

impl Default for DecoderCommand {
    fn default() -> Self {
        Self::parse(DEFAULT_DECODER_TEMPLATE).expect("default template is non-empty")
    }
}

impl DecoderCommand {
    /// Splits a template on whitespace. Quoting is not supported.
    pub fn parse(template: &str) -> Option<Self> {
        let mut parts = template.split_whitespace().map(str::to_string);
        let program = parts.next()?;
        Some(Self {
            program,
            args: parts.collect(),
        })
    }

    pub fn render(&self, input: &Path, fps: Fps, output: &Path) -> Vec<String> {
        self.args
            .iter()
            .map(|a| {
                a.replace("{input}", &input.to_string_lossy())
                    .replace("{fps}", &fps.to_string())
                    .replace("{output}", &output.to_string_lossy())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!("1".parse::<Fps>().unwrap(), Fps::ONE);
        assert_eq!("4/2".parse::<Fps>().unwrap(), Fps::integer(2).unwrap());
        assert_eq!("0.5".parse::<Fps>().unwrap(), Fps::new(1, 2).unwrap());
        assert_eq!("30000/1001".parse::<Fps>().unwrap().to_string(), "30000/1001");
        for bad in ["0", "-1", "x", "1/0", "nan"] {
            assert!(bad.parse::<Fps>().is_err(), "{bad}");
        }
    }

    #[test]
    fn timestamps_follow_index_over_fps() {
        let two = Fps::integer(2).unwrap();
        let ts: Vec<f64> = (0..8).map(|i| two.timestamp(i)).collect();
        assert_eq!(ts, vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5]);
        assert_eq!(Fps::ONE.timestamp(9), 9.0);
    }

    #[test]
    fn serde_forms() {
        assert_eq!(serde_json::to_string(&Fps::ONE).unwrap(), "1");
        let half = Fps::new(1, 2).unwrap();
        assert_eq!(serde_json::to_string(&half).unwrap(), "\"1/2\"");
        assert_eq!(serde_json::from_str::<Fps>("\"1/2\"").unwrap(), half);
        assert_eq!(serde_json::from_str::<Fps>("0.5").unwrap(), half);
        assert_eq!(serde_json::from_str::<Fps>("2").unwrap(), Fps::integer(2).unwrap());
    }
}
