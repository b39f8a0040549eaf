//! A small, fully scripted evaluation dataset: 6 methods × 4 conditions ×
//! 10 augmented images, real reference images, CLIP-width embeddings, three
//! mock judges and three mock classifiers. Every verdict follows a fixed
//! quota so acceptance rates can be worked out by hand:
//!
//! | judge  | qwen | gemini | openai | flux | imgaug | albumentations |
//! |--------|------|--------|--------|------|--------|----------------|
//! | mock:a |  9   |   8    |   7    |  4   |   2    |       1        |
//! | mock:b |  8   |   7    |   5    |  3   |   1    |       0        |
//! | mock:c | 10   |   9    |   7    |  5   |   3    |       2        |
//!
//! Each cell is the number of the 10 images per condition the judge
//! accepts (images `0..quota`). Two replies are scripted badly: mock:c
//! never returns valid JSON for `aug-imgaug-fog-9` (dropped), and mock:a
//! needs a re-ask for `aug-flux-night-0` (counted). On the 10 held-out real
//! images per condition mock:b rejects `real-snow-h0` and `real-snow-h1`
//! and mock:c rejects `real-rain-h0`.

use std::fmt::Write as _;
use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use crate::store::{save_embeddings, EmbeddingMatrix, ImageRecord, Manifest};
use crate::types::{Condition, Method, ModelId, Role};

pub const JUDGES: [&str; 3] = ["mock:a", "mock:b", "mock:c"];
pub const CLASSIFIERS: [&str; 3] = ["mock:x", "mock:y", "mock:z"];
pub const IMAGES_PER_CELL: usize = 10;
pub const FIT_PER_CONDITION: usize = 30;
pub const HELDOUT_PER_CONDITION: usize = 10;

/// Judge `j` on image `i` of (`method`, any condition), before scripting
/// accidents.
pub fn accepts(judge: &str, method: Method, i: usize) -> bool {
    i < quota(judge, method)
}

pub fn quota(judge: &str, method: Method) -> usize {
    let row = match judge {
        "mock:a" => [9, 8, 7, 4, 2, 1],
        "mock:b" => [8, 7, 5, 3, 1, 0],
        "mock:c" => [10, 9, 7, 5, 3, 2],
        _ => panic!("not a fixture judge: {judge}"),
    };
    let col = [Method::Qwen, Method::Gemini, Method::Openai, Method::Flux, Method::Imgaug, Method::Albumentations]
        .iter()
        .position(|m| *m == method)
        .expect("every method has a quota");
    row[col]
}

/// Pairs that never produce a parseable answer.
pub const ALWAYS_MALFORMED: (&str, &str) = ("mock:c", "aug-imgaug-fog-9");
/// Pair whose first answer is malformed and second is fine.
pub const MALFORMED_ONCE: (&str, &str) = ("mock:a", "aug-flux-night-0");

pub fn accepts_real(judge: &str, image_id: &str) -> bool {
    !matches!(
        (judge, image_id),
        ("mock:b", "real-snow-h0") | ("mock:b", "real-snow-h1") | ("mock:c", "real-rain-h0")
    )
}

/// How far along the clear → target direction each method's embeddings
/// sit. Deliberately not the acceptance order at the top.
fn quality(method: Method) -> f64 {
    match method {
        Method::Openai => 0.9,
        Method::Qwen => 0.85,
        Method::Gemini => 0.8,
        Method::Flux => 0.7,
        Method::Imgaug => 0.4,
        Method::Albumentations => 0.3,
    }
}

pub fn augmented_id(method: Method, condition: Condition, i: usize) -> String {
    format!("aug-{method}-{condition}-{i}")
}

pub fn source_id(i: usize) -> String {
    format!("src-{i:02}")
}

/// Paths of a written fixture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fixture {
    pub root: PathBuf,
    pub config: PathBuf,
    pub manifest: PathBuf,
    pub mock_script: PathBuf,
}

fn png(seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let img = image::RgbImage::from_fn(8, 8, |_, _| image::Rgb([rng.random(), rng.random(), rng.random()]));
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .expect("encoding a small PNG in memory");
    out.into_inner()
}

fn records() -> Vec<ImageRecord> {
    let rec = |id: String, condition, role, method, source: Option<String>| ImageRecord {
        file_path: Some(format!("images/{id}.png")),
        image_id: id,
        condition,
        role,
        method,
        source_id: source,
    };
    let mut out: Vec<ImageRecord> = (0..IMAGES_PER_CELL)
        .map(|i| rec(source_id(i), Condition::Clear, Role::Source, None, None))
        .collect();
    for method in Method::ALL {
        for condition in Condition::ADVERSE {
            for i in 0..IMAGES_PER_CELL {
                out.push(rec(
                    augmented_id(method, condition, i),
                    condition,
                    Role::Augmented,
                    Some(method),
                    Some(source_id(i)),
                ));
            }
        }
    }
    for condition in Condition::ADVERSE {
        for k in 0..FIT_PER_CONDITION {
            out.push(rec(format!("real-{condition}-{k:02}"), condition, Role::ReferenceReal, None, None));
        }
        for k in 0..HELDOUT_PER_CONDITION {
            out.push(rec(format!("real-{condition}-h{k}"), condition, Role::HeldoutReal, None, None));
        }
    }
    out
}

fn condition_mean(condition: Condition, dim: usize) -> Vec<f64> {
    let block = match condition {
        Condition::Fog => 0,
        Condition::Rain => 1,
        Condition::Snow => 2,
        Condition::Night => 3,
        Condition::Clear => 4,
    };
    let mut m = vec![0.0; dim];
    for v in &mut m[block * 8..block * 8 + 8] {
        *v = 4.0;
    }
    m
}

/// Shared low-rank variation plus small isotropic noise around `mean`.
fn sample(rng: &mut ChaCha8Rng, mean: &[f64], loadings: &[Vec<f64>]) -> Vec<f32> {
    let mut x = mean.to_vec();
    for col in loadings {
        let w: f64 = rng.sample(StandardNormal);
        for (xi, c) in x.iter_mut().zip(col) {
            *xi += w * c;
        }
    }
    for xi in &mut x {
        let e: f64 = rng.sample(StandardNormal);
        *xi += 0.05 * e;
    }
    x.into_iter().map(|v| v as f32).collect()
}

fn embeddings(records: &[ImageRecord]) -> EmbeddingMatrix {
    let dim = ModelId::ClipVitl14.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let loadings: Vec<Vec<f64>> = (0..16)
        .map(|_| (0..dim).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal) / (dim as f64).sqrt()).collect())
        .collect();
    let clear = condition_mean(Condition::Clear, dim);
    let rows = records
        .iter()
        .filter(|r| r.role != Role::Source)
        .map(|r| {
            let target = condition_mean(r.condition, dim);
            let mean: Vec<f64> = match r.method {
                Some(m) => {
                    let q = quality(m);
                    target.iter().zip(&clear).map(|(t, c)| q * t + (1.0 - q) * c).collect()
                }
                None => target,
            };
            (r.image_id.clone(), sample(&mut rng, &mean, &loadings))
        })
        .collect();
    EmbeddingMatrix::from_rows(ModelId::ClipVitl14, rows).expect("fixture rows are well formed")
}

fn verdict_body(decision: bool, explanation: &str) -> String {
    json!({"decision": decision, "explanation": explanation}).to_string()
}

fn reject_reason(method: Method, condition: Condition) -> String {
    if method.is_generative() {
        format!("The {condition} looks convincing but parked cars were removed and the road layout changed.")
    } else {
        format!("The {condition} is a flat semi-transparent overlay, like a filter; the scene itself is intact.")
    }
}

/// Classifier answer: rule-based rejections are realism failures,
/// generative ones semantic failures. mock:z also flags realism on
/// generative night images.
fn classification(classifier: &str, method: Method, condition: Condition) -> (bool, bool) {
    if !method.is_generative() {
        return (false, true);
    }
    (true, classifier == "mock:z" && condition == Condition::Night)
}

fn script_line(out: &mut String, judge: &str, request: &str, replies: Vec<serde_json::Value>) {
    let line = json!({"judge_id": judge, "request_id": request, "replies": replies});
    let _ = writeln!(out, "{line}");
}

fn mock_script() -> String {
    let mut out = String::new();
    for method in Method::ALL {
        for condition in Condition::ADVERSE {
            for i in 0..IMAGES_PER_CELL {
                let id = augmented_id(method, condition, i);
                for judge in JUDGES {
                    let d = accepts(judge, method, i);
                    let text = if d {
                        format!("Realistic {condition}; the scene matches the original.")
                    } else {
                        reject_reason(method, condition)
                    };
                    let good = json!({"body": verdict_body(d, &text)});
                    let replies = if (judge, id.as_str()) == ALWAYS_MALFORMED {
                        vec![json!({"body": "The image shows fog. I cannot decide."})]
                    } else if (judge, id.as_str()) == MALFORMED_ONCE {
                        vec![json!({"body": "Looks plausible overall."}), good]
                    } else {
                        vec![good]
                    };
                    script_line(&mut out, judge, &id, replies);
                    if !d && (judge, id.as_str()) != ALWAYS_MALFORMED {
                        for c in CLASSIFIERS {
                            let (semantic, realism) = classification(c, method, condition);
                            let body = json!({
                                "semantic": semantic,
                                "realism": realism,
                                "explanation": "scripted"
                            })
                            .to_string();
                            script_line(&mut out, c, &format!("{id}/{judge}"), vec![json!({"body": body})]);
                        }
                    }
                }
            }
        }
    }
    for condition in Condition::ADVERSE {
        for k in 0..HELDOUT_PER_CONDITION {
            let id = format!("real-{condition}-h{k}");
            for judge in JUDGES {
                let d = accepts_real(judge, &id);
                let text = if d { "Genuine conditions." } else { "The weather looks staged." };
                script_line(&mut out, judge, &id, vec![json!({"body": verdict_body(d, text)})]);
            }
        }
    }
    out
}

fn config_text() -> String {
    let mut out = String::from(
        "# Scripted demo configuration; every judge and classifier is a mock.\n\
         output_dir = \"out\"\n\
         manifest = \"manifest.txt\"\n\
         image_root = \".\"\n\n\
         [embeddings]\n\
         clip_vitl14 = \"clip_vitl14.emb1\"\n\n\
         [split]\n\
         seed = 11\n\
         heldout_per_condition = 10\n\n\
         [bootstrap]\n\
         seed = 12\n\
         replicates = 2000\n\n\
         [jury]\n\
         cache = \"cache/verdicts.jsonl\"\n\
         backoff_base_ms = 0\n\
         baseline_per_condition = 10\n\
         mock_script = \"mock_script.jsonl\"\n\n\
         [classification]\n\
         cache = \"cache/classifications.jsonl\"\n",
    );
    let companies = [("mock:a", "openai"), ("mock:b", "google"), ("mock:c", "anthropic")];
    for (id, company) in companies {
        let _ = write!(
            out,
            "\n[[judges]]\njudge_id = \"{id}\"\nendpoint = \"mock\"\nmodel_name = \"scripted\"\n\
             company = \"{company}\"\n"
        );
    }
    for id in CLASSIFIERS {
        let _ = write!(
            out,
            "\n[[classifiers]]\njudge_id = \"{id}\"\nendpoint = \"mock\"\nmodel_name = \"scripted\"\n\
             company = \"none\"\n"
        );
    }
    out
}

/// Writes the fixture under `root` (created if needed) and returns its
/// paths. Deterministic: the same bytes on every call.
pub fn write_fixture(root: &Path) -> Result<Fixture, String> {
    let io = |p: &Path, e: std::io::Error| format!("{}: {e}", p.display());
    let images = root.join("images");
    fs::create_dir_all(&images).map_err(|e| io(&images, e))?;
    let records = records();
    for (n, r) in records.iter().enumerate() {
        let path = root.join(r.file_path.as_deref().expect("fixture records have files"));
        fs::write(&path, png(n as u64)).map_err(|e| io(&path, e))?;
    }
    let matrix = embeddings(&records);
    let mut manifest = Manifest::new(records).map_err(|e| e.to_string())?;
    manifest.meta.insert("extractor".into(), "synthetic".into());
    manifest.meta.insert("normalized".into(), "false".into());
    let fixture = Fixture {
        root: root.to_path_buf(),
        config: root.join("config.toml"),
        manifest: root.join("manifest.txt"),
        mock_script: root.join("mock_script.jsonl"),
    };
    fs::write(&fixture.manifest, manifest.to_text()).map_err(|e| io(&fixture.manifest, e))?;
    save_embeddings(&root.join("clip_vitl14.emb1"), &matrix).map_err(|e| e.to_string())?;
    fs::write(&fixture.mock_script, mock_script()).map_err(|e| io(&fixture.mock_script, e))?;
    fs::write(&fixture.config, config_text()).map_err(|e| io(&fixture.config, e))?;
    Ok(fixture)
}
