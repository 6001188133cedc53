//! Fixed inputs: answer-extraction strings with hand-assigned labels, and
//! privacy-gate payloads known to carry (or not carry) image data.

use base64::engine::general_purpose::{STANDARD, STANDARD_NO_PAD, URL_SAFE_NO_PAD};
use base64::Engine;
use logat_core::gateway::AskRequest;
use logat_core::{Fps, GridSpec, SequenceMeta, Transcript};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LETTERS: [char; 5] = ['A', 'B', 'C', 'D', 'E'];

/// `(raw, num_options, expected index)` for the format-compliant family
/// `answer [L] answer`: every active letter, three casings of the keyword, both
/// letter cases, three bracket styles and four spacing layouts.
pub fn compliant_family() -> Vec<(String, usize, usize)> {
    let words = ["answer", "ANSWER", "Answer"];
    let brackets = [("[", "]"), ("(", ")"), ("", "")];
    let layouts: [(&str, &str); 4] = [(" ", " "), ("  ", "   "), ("\n", "\n"), (": ", " ")];
    let mut out = Vec::new();
    for n in 2..=5 {
        for (idx, letter) in LETTERS.iter().enumerate().take(n) {
            for word in words {
                for l in [*letter, letter.to_ascii_lowercase()] {
                    for (open, close) in brackets {
                        for (pre, post) in layouts {
                            out.push((format!("{word}{pre}{open}{l}{close}{post}{word}"), n, idx));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Realistic noisy model outputs, each labelled by hand from the extraction
/// rules: a strict `answer L answer` match wins; otherwise the first
/// standalone capital A-E within range; lowercase letters in prose are not
/// answers; anything else abstains.
pub const NOISY: [(&str, usize, Option<usize>); 50] = [
    ("The answer is B.", 5, Some(1)),
    ("Answer: answer [C] answer", 5, Some(2)),
    ("answer [ D ] answer", 5, Some(3)),
    ("answer (A) answer", 5, Some(0)),
    ("Answer [b] Answer.", 5, Some(1)),
    ("answer[E]answer", 5, Some(4)),
    ("After reviewing the frames, answer [C] answer", 5, Some(2)),
    ("answer [B] answer\nExplanation: the person in Cell1 waves.", 5, Some(1)),
    ("**answer [D] answer**", 5, Some(3)),
    ("I believe the correct option is (E)", 5, Some(4)),
    ("Option C seems right", 5, Some(2)),
    ("C", 5, Some(2)),
    ("C.", 5, Some(2)),
    ("(B)", 5, Some(1)),
    ("B) the man picks up the cup", 5, Some(1)),
    ("answer A answer", 5, Some(0)),
    ("ANSWER [E] ANSWER", 5, Some(4)),
    ("answer: [D] answer", 5, Some(3)),
    ("answer = B answer", 5, Some(1)),
    ("answer [c]answer", 5, Some(2)),
    ("  answer   [ a ]   answer  ", 5, Some(0)),
    ("Based on frame 3, the answer is D because the dog leaves.", 5, Some(3)),
    ("It could be A or B, but answer [B] answer", 5, Some(1)),
    ("Neither A nor C; answer [E] answer", 4, Some(0)),
    ("answer [D] answer", 3, None),
    ("the answer is b", 5, None),
    ("Answer [B].", 5, Some(1)),
    ("[A]", 5, Some(0)),
    ("The woman (Cell4) lifts the box. answer [A] answer", 5, Some(0)),
    ("answer [A] answer answer [B] answer", 5, Some(0)),
    ("Frame 12 shows the ending. Final: D", 5, Some(3)),
    ("D - because the dog runs away", 5, Some(3)),
    ("Correct option: E.", 5, Some(4)),
    ("Correct option: E.", 2, None),
    ("answer \n[C]\n answer", 5, Some(2)),
    ("answer\u{3010}B\u{3011}answer", 5, Some(1)),
    ("The answer is: B) Yes", 5, Some(1)),
    ("Answer: b", 5, None),
    ("A: answer [B] answer", 5, Some(1)),
    ("Choice B is supported by frames 2-4, so answer [B] answer", 5, Some(1)),
    ("I'd go with B.", 5, Some(1)),
    ("E is impossible; B.", 4, Some(1)),
    ("answer [a] answer", 2, Some(0)),
    ("answer [b] answer", 2, Some(1)),
    ("answer [c] answer", 2, None),
    ("Option A/B", 5, Some(0)),
    ("--C--", 5, Some(2)),
    ("answer [D]answer.", 5, Some(3)),
    ("<answer>C</answer>", 5, Some(2)),
    ("The final answer is answer[ E ]answer", 5, Some(4)),
];

/// Outputs with no usable answer; every one must abstain (five options).
pub const ADVERSARIAL: [&str; 20] = [
    "",
    "   \n\t ",
    "I cannot determine the answer from the transcript.",
    "None of the options match the video.",
    "answer [] answer",
    "answer [F] answer",
    "Option Z is the closest.",
    "ABCDE",
    "The answer is unclear.",
    "answer [ ] answer",
    "e.g. the person might be cooking",
    "Options a through e all seem plausible",
    "answer [AB] answer",
    "I'm not sure; maybe option F or G.",
    "1. 2. 3. 4. 5.",
    "Answers: none",
    "answer [X] answer",
    "\u{1F914}",
    "The caption mentions Cell1 and Cell2 only.",
    "ANSWER",
];

/// Real 1x1 images.
pub const PNG_1X1: &str = "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mNkYPhfDwAChwGA60e6kgAAAABJRU5ErkJggg==";
pub const GIF_1X1: &str = "R0lGODdhAQABAIEAAMgeKAAAAAAAAAAAACwAAAAAAQABAAAIBAABBAQAOw==";
pub const BMP_1X1: &str = "Qk06AAAAAAAAADYAAAAoAAAAAQAAAAEAAAABABgAAAAAAAQAAADEDgAAxA4AAAAAAAAAAAAAKB7IAA==";
pub const WEBP_1X1: &str = "UklGRjoAAABXRUJQVlA4IC4AAACQAQCdASoBAAEAAUAmJaACdLoAA5gA/vFNr+LaR0KZD/7xn/9xn/9xn/yIAAAA";
pub const JPEG_1X1: &str = "/9j/4AAQSkZJRgABAQAAAQABAAD/2wBDAAgGBgcGBQgHBwcJCQgKDBQNDAsLDBkSEw8UHRofHh0aHBwgJC4nICIsIxwcKDcpLDAxNDQ0Hyc5PTgyPC4zNDL/2wBDAQkJCQwLDBgNDRgyIRwhMjIyMjIyMjIyMjIyMjIyMjIyMjIyMjIyMjIyMjIyMjIyMjIyMjIyMjIyMjIyMjIyMjL/wAARCAABAAEDASIAAhEBAxEB/8QAHwAAAQUBAQEBAQEAAAAAAAAAAAECAwQFBgcICQoL/8QAtRAAAgEDAwIEAwUFBAQAAAF9AQIDAAQRBRIhMUEGE1FhByJxFDKBkaEII0KxwRVS0fAkM2JyggkKFhcYGRolJicoKSo0NTY3ODk6Q0RFRkdISUpTVFVWV1hZWmNkZWZnaGlqc3R1dnd4eXqDhIWGh4iJipKTlJWWl5iZmqKjpKWmp6ipqrKztLW2t7i5usLDxMXGx8jJytLT1NXW19jZ2uHi4+Tl5ufo6erx8vP09fb3+Pn6/8QAHwEAAwEBAQEBAQEBAQAAAAAAAAECAwQFBgcICQoL/8QAtREAAgECBAQDBAcFBAQAAQJ3AAECAxEEBSExBhJBUQdhcRMiMoEIFEKRobHBCSMzUvAVYnLRChYkNOEl8RcYGRomJygpKjU2Nzg5OkNERUZHSElKU1RVVldYWVpjZGVmZ2hpanN0dXZ3eHl6goOEhYaHiImKkpOUlZaXmJmaoqOkpaanqKmqsrO0tba3uLm6wsPExcbHyMnK0tPU1dbX2Nna4uPk5ebn6Onq8vP09fb3+Pn6/9oADAMBAAIRAxEAPwDkaKKK8o/Sz//Z";

fn bytes(b64: &str) -> Vec<u8> {
    STANDARD.decode(b64).expect("fixture is valid base64")
}

pub struct Payload {
    pub name: &'static str,
    pub body: Vec<u8>,
    pub content_type: &'static str,
}

fn payload(name: &'static str, body: impl Into<Vec<u8>>, content_type: &'static str) -> Payload {
    Payload {
        name,
        body: body.into(),
        content_type,
    }
}

fn transcript(captions: &[String]) -> Transcript {
    let meta = SequenceMeta::uniform("clip", Fps::ONE, captions.len() as u32);
    Transcript::global_only(&meta, captions.to_vec()).expect("non-empty captions")
}

fn caption_jsonl(caption: &str) -> String {
    transcript(&["a kitchen with a table".into(), caption.into()]).to_jsonl()
}

fn json_with(field: &str, value: serde_json::Value) -> Vec<u8> {
    serde_json::to_vec(&serde_json::json!({ "source_id": "clip", field: value })).unwrap()
}

fn splice(prefix: &[u8], middle: &[u8], suffix: &[u8]) -> Vec<u8> {
    [prefix, middle, suffix].concat()
}

/// Thirty payloads that each carry image data in some form.
pub fn leaky_payloads() -> Vec<Payload> {
    let png = bytes(PNG_1X1);
    let jpeg = bytes(JPEG_1X1);
    let gif = bytes(GIF_1X1);
    let bmp = bytes(BMP_1X1);
    let jsonl = caption_jsonl("a dog runs across the lawn");
    let latin1 = |b: &[u8]| b.iter().map(|&c| char::from(c)).collect::<String>();
    let ask = |t: String| {
        serde_json::to_vec(&AskRequest {
            transcript_id: None,
            transcript: Some(t),
            question_id: None,
            question: "What happens?".into(),
            options: vec!["a".into(), "b".into()],
        })
        .unwrap()
    };
    vec![
        // raw magic bytes
        payload("raw png", png.clone(), "application/octet-stream"),
        payload("png inside json text", splice(br#"{"caption":""#, &png, br#""}"#), "application/json"),
        payload("jpeg deep in jsonl", splice(jsonl.repeat(20).as_bytes(), &jpeg, b"\n"), "application/x-ndjson"),
        payload("jpeg header appended", splice(jsonl.as_bytes(), &jpeg[..16], b""), "application/x-ndjson"),
        payload("png in plain text", splice(b"frame dump follows: ", &png, b" end"), "text/plain"),
        payload(
            "png as byte array",
            json_with("data", png.iter().map(|&b| serde_json::json!(b)).collect()),
            "application/json",
        ),
        payload("png as latin-1 string", json_with("blob", latin1(&png).into()), "application/json"),
        payload("jpeg as latin-1 string", json_with("blob", latin1(&jpeg).into()), "application/json"),
        payload("raw gif", gif.clone(), "image/gif"),
        payload("bmp in form body", splice(b"--xyz\r\nContent-Disposition: form-data\r\n\r\n", &bmp, b"\r\n--xyz--"), "multipart/form-data"),
        // image data URIs
        payload("png data uri in caption", caption_jsonl(&format!("look data:image/png;base64,{PNG_1X1}")), "application/x-ndjson"),
        payload("jpeg data uri", json_with("caption", format!("data:image/jpeg;base64,{JPEG_1X1}").into()), "application/json"),
        payload("gif data uri", json_with("caption", format!("data:image/gif;base64,{GIF_1X1}").into()), "application/json"),
        payload("webp data uri", json_with("caption", format!("data:image/webp;base64,{WEBP_1X1}").into()), "application/json"),
        payload("data uri in inline transcript", ask(caption_jsonl(&format!("data:image/png;base64,{PNG_1X1}"))), "application/json"),
        payload(
            "chat image part",
            serde_json::to_vec(&serde_json::json!({
                "messages": [{"role": "user", "content": [
                    {"type": "text", "text": "describe"},
                    {"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{PNG_1X1}")}}
                ]}]
            }))
            .unwrap(),
            "application/json",
        ),
        payload("upper-case data uri", json_with("caption", format!("DATA:IMAGE/PNG;BASE64,{PNG_1X1}").into()), "application/json"),
        payload("data uri in plain text", format!("see data:image/bmp;base64,{BMP_1X1} here"), "text/plain"),
        payload(
            "svg data uri",
            json_with(
                "caption",
                format!(
                    "data:image/svg+xml;base64,{}",
                    STANDARD.encode(r#"<svg xmlns="http://www.w3.org/2000/svg" width="1" height="1"><rect width="1" height="1"/></svg>"#)
                )
                .into(),
            ),
            "application/json",
        ),
        payload(
            "wrapped data uri",
            format!("data:image/jpeg;base64,{}", JPEG_1X1.as_bytes().chunks(76).map(|c| std::str::from_utf8(c).unwrap()).collect::<Vec<_>>().join("\n")),
            "text/plain",
        ),
        // base64-encoded images
        payload("bare base64 png field", json_with("caption", PNG_1X1.into()), "application/json"),
        payload("base64 png mid-caption", caption_jsonl(&format!("the sign reads {PNG_1X1} in red")), "application/x-ndjson"),
        payload("url-safe base64 jpeg", json_with("note", URL_SAFE_NO_PAD.encode(&jpeg).into()), "application/json"),
        payload("unpadded base64 png", json_with("note", STANDARD_NO_PAD.encode(&png).into()), "application/json"),
        payload("misaligned base64 png", json_with("note", format!("xyz{PNG_1X1}").into()), "application/json"),
        payload("base64 thumbnail field", json_with("thumbnail", PNG_1X1.into()), "application/json"),
        payload("base64 gif", caption_jsonl(GIF_1X1), "application/x-ndjson"),
        payload("base64 in plain text", format!("attachment:\n{JPEG_1X1}\n"), "text/plain"),
        payload("base64 bmp", json_with("note", BMP_1X1.into()), "application/json"),
        payload("base64 webp in inline transcript", ask(caption_jsonl(WEBP_1X1)), "application/json"),
    ]
}

const SUBJECTS: [&str; 12] = [
    "a man", "a woman", "two children", "a brown dog", "a chef", "the cyclist", "a grey cat", "an old car",
    "the teacher", "a red kite", "three birds", "a delivery robot",
];
const ACTIONS: [&str; 12] = [
    "walks past", "picks up", "points at", "leans on", "drops", "looks at", "carries", "paints",
    "repairs", "photographs", "opens", "jumps over",
];
const OBJECTS: [&str; 12] = [
    "a wooden table", "the fence", "a blue umbrella", "a laptop", "the image on the wall",
    "a PNG logo printed on a mug", "a sign that says data:image", "a box labelled JPEG", "a bicycle",
    "a whiteboard full of base64 notes", "a framed picture", "a cup of tea",
];
const EXTRAS: [&str; 12] = [
    "The background is blurry.",
    "Lighting is warm and soft.",
    "Text on the screen reads data:image/png;base64,hello (a tutorial slide).",
    "A URL https://example.com/cat.png is visible.",
    "The room has pixels of sunlight on the floor.",
    "Someone says \"frame data looks fine\".",
    "The scene is a 4K video still.",
    "Nothing else changes in this frame.",
    "A QR code sits in the corner.",
    "Digits 1234567890 appear on a ticket.",
    "Emoji \u{1F600} appear in a chat bubble.",
    "The word BMP is written on a crate.",
];

fn sentence(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{} {} {}. {}",
        SUBJECTS.choose(rng).unwrap(),
        ACTIONS.choose(rng).unwrap(),
        OBJECTS.choose(rng).unwrap(),
        EXTRAS.choose(rng).unwrap()
    )
}

fn local_block(rng: &mut ChaCha8Rng) -> String {
    let grid = GridSpec::default();
    logat_core::cell_labels(&grid)
        .iter()
        .map(|l| format!("{}: {}", l.rendered, sentence(rng)))
        .collect::<Vec<_>>()
        .join("\n")
}

/// One hundred legitimate payloads: transcript files, inline ask requests,
/// manifests and predictions, with captions that mention image-ish words.
pub fn clean_payloads(seed: u64) -> Vec<(String, Payload)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for i in 0..100 {
        let frames = rng.random_range(1..8u32);
        let fps = [Fps::ONE, Fps::new(2, 1).unwrap(), Fps::new(1, 2).unwrap()][i % 3];
        let meta = SequenceMeta::uniform(format!("video-{i:03}"), fps, frames);
        let globals: Vec<String> = (0..frames).map(|_| sentence(&mut rng)).collect();
        let locals: Vec<String> = (0..frames).map(|_| local_block(&mut rng)).collect();
        let t = match i % 3 {
            0 => Transcript::global_only(&meta, globals),
            1 => Transcript::local_only(&meta, locals, GridSpec::default()),
            _ => Transcript::ensemble(&meta, globals, locals, GridSpec::default()),
        }
        .unwrap();
        let p = match i % 4 {
            0 | 1 => payload("transcript", t.to_jsonl(), "application/x-ndjson"),
            2 => payload(
                "inline ask",
                serde_json::to_vec(&AskRequest {
                    transcript_id: None,
                    transcript: Some(t.to_jsonl()),
                    question_id: Some(format!("q{i}")),
                    question: "What does the person pick up in the image?".into(),
                    options: vec!["a laptop".into(), "a cup".into(), "a PNG file".into()],
                })
                .unwrap(),
                "application/json",
            ),
            _ => payload(
                "manifest",
                serde_json::to_vec(&logat_core::gateway::TranscriptManifest::of(&t)).unwrap(),
                "application/json",
            ),
        };
        out.push((format!("{} #{i}", p.name), p));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_sizes() {
        assert!(compliant_family().len() >= 200);
        assert_eq!(leaky_payloads().len(), 30);
        assert_eq!(clean_payloads(1).len(), 100);
    }

    #[test]
    fn fixtures_are_real_images() {
        assert!(bytes(PNG_1X1).starts_with(b"\x89PNG\r\n\x1a\n"));
        assert!(bytes(JPEG_1X1).starts_with(b"\xff\xd8\xff"));
        assert!(bytes(GIF_1X1).starts_with(b"GIF87a"));
        assert!(bytes(BMP_1X1).starts_with(b"BM"));
        assert!(bytes(WEBP_1X1).starts_with(b"RIFF"));
    }

    #[test]
    fn noisy_labels_are_in_range() {
        for (raw, n, label) in NOISY {
            assert!(label.is_none_or(|i| i < n), "{raw}");
        }
    }
}
