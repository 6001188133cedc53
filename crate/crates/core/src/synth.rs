//! Synthetic smoke dataset for running the whole pipeline offline.
//!
//! Each video is a short frame directory of random-looking rectangles. Every
//! question `vNN-qK` has a `GOLD[vNN-qK]=L` marker planted in frame K's top
//! pixel row, which the mock VLM echoes into its captions and the mock LLM
//! reads back out of the transcript. Under the mocks every question is
//! therefore answerable from the transcript alone, in every transcript mode.

use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::DatasetFile;
use crate::frame::Fps;
use crate::inference::mock::plant_marker;
use crate::media::{self, FrameSequence, MediaError};
use crate::prompting::OPTION_LETTERS;
use crate::qa::QAItem;
use crate::transcript::write_atomic;

pub const CATEGORIES: [&str; 3] = ["causal", "temporal", "descriptive"];

const SUBJECTS: [&str; 8] = ["the dog", "a child", "the cyclist", "a cat", "the cook", "two friends", "the bird", "a runner"];
const ACTIONS: [&str; 10] = [
    "jumps over the fence",
    "sits down",
    "picks up a ball",
    "waves",
    "turns around",
    "opens the door",
    "starts running",
    "looks at the camera",
    "falls asleep",
    "walks away",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSpec {
    pub videos: u32,
    pub frames_per_video: u32,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            videos: 10,
            frames_per_video: 5,
            width: 192,
            height: 128,
            seed: 7,
        }
    }
}

pub fn video_id(v: u32) -> String {
    format!("v{v:02}")
}

pub fn question_id(v: u32, k: u32) -> String {
    format!("v{v:02}-q{k}")
}

fn random_frame(rng: &mut ChaCha8Rng, width: u32, height: u32) -> RgbImage {
    let bg = Rgb([rng.random(), rng.random(), rng.random()]);
    let mut img = RgbImage::from_pixel(width, height, bg);
    for _ in 0..rng.random_range(2..6) {
        let color = Rgb([rng.random(), rng.random(), rng.random()]);
        let x0 = rng.random_range(0..width);
        let y0 = rng.random_range(0..height);
        let x1 = (x0 + rng.random_range(4..=width / 2)).min(width);
        let y1 = (y0 + rng.random_range(4..=height / 2)).min(height);
        for y in y0..y1 {
            for x in x0..x1 {
                img.put_pixel(x, y, color);
            }
        }
    }
    img
}

fn options(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(n);
    while out.len() < n {
        let s = format!(
            "{} {}",
            SUBJECTS[rng.random_range(0..SUBJECTS.len())],
            ACTIONS[rng.random_range(0..ACTIONS.len())]
        );
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// Builds the dataset in memory: one frame sequence per video plus the items.
pub fn generate(spec: &SynthSpec) -> (Vec<FrameSequence>, DatasetFile) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_options = OPTION_LETTERS.len();
    let mut videos = Vec::new();
    let mut items = Vec::new();
    for v in 0..spec.videos {
        let vid = video_id(v);
        let mut frames: Vec<RgbImage> = (0..spec.frames_per_video)
            .map(|_| random_frame(&mut rng, spec.width, spec.height))
            .collect();
        for (k, frame) in frames.iter_mut().enumerate() {
            let k = k as u32;
            let qid = question_id(v, k);
            let gold = rng.random_range(0..n_options);
            let planted = plant_marker(frame, &format!("GOLD[{qid}]={}", OPTION_LETTERS[gold]));
            assert!(planted, "frame width {} too small for a marker", spec.width);
            let category = CATEGORIES[((v * spec.frames_per_video + k) as usize) % CATEGORIES.len()];
            let question = match category {
                "causal" => format!("Why does the main subject act this way in {qid}?"),
                "temporal" => format!("What happens right after the opening of {qid}?"),
                _ => format!("Which description best fits {qid}?"),
            };
            items.push(QAItem {
                question_id: qid,
                video_id: vid.clone(),
                category: category.to_string(),
                question,
                options: options(&mut rng, n_options),
                gold_index: Some(gold),
            });
        }
        videos.push(FrameSequence::from_images(vid, Fps::ONE, frames));
    }
    let dataset = DatasetFile {
        name: "synthetic-smoke".into(),
        items,
        videos: Default::default(),
    };
    (videos, dataset)
}

/// Writes `videos/<id>/NNNNNN.png` frame dumps and `dataset.json` under `out`.
pub fn write(spec: &SynthSpec, out: &Path) -> Result<DatasetFile, MediaError> {
    let (videos, dataset) = generate(spec);
    for seq in &videos {
        media::dump_frames(seq, &out.join("videos").join(seq.source_id()))?;
    }
    let mut json = serde_json::to_string_pretty(&dataset).map_err(std::io::Error::other)?;
    json.push('\n');
    fs::create_dir_all(out)?;
    write_atomic(&out.join("dataset.json"), json.as_bytes())?;
    Ok(dataset)
}
