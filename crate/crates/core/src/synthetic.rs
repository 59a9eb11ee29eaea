//! Seeded synthetic corpus for demos and end-to-end checks: two domains
//! with fully disjoint vocabularies, a planted high-impact marker term
//! per domain, and page images whose layout conventions are shared
//! across domains (dense figures for highly cited papers, sparse pages
//! for uncited ones) so the visual signal transfers where the text
//! signal cannot.

use std::io;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::experiment::{GammaChoice, KChoice, PipelineConfig};

pub const SYNTH_DOMAINS: [&str; 2] = ["plasma", "glacier"];

/// The marker term planted in every high-citation document of a domain.
pub fn planted_token(domain: &str) -> String {
    format!("{domain}breakthrough")
}

#[derive(Debug, Clone, Copy)]
pub struct SyntheticSpec {
    /// Documents per (domain, label) cell; 100 gives the standard
    /// 400-document corpus.
    pub docs_per_cell: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            docs_per_cell: 100,
            seed: 17,
        }
    }
}

/// Pipeline settings sized for the synthetic corpus.
pub fn demo_config(seed: u64) -> PipelineConfig {
    PipelineConfig {
        max_terms: 5_000,
        k: KChoice::Fixed(16),
        gamma: GammaChoice::Sweep,
        seed,
        svm_tol: 1e-3,
        kmeans_max_iters: 20,
        ..PipelineConfig::default()
    }
}

const PAGE_W: u32 = 220;
const PAGE_H: u32 = 330;

fn fill_rect(img: &mut image::GrayImage, x0: u32, y0: u32, w: u32, h: u32, val: u8) {
    for y in y0..(y0 + h).min(img.height()) {
        for x in x0..(x0 + w).min(img.width()) {
            img.put_pixel(x, y, image::Luma([val]));
        }
    }
}

/// High pages carry many body-text lines and a dot-grid figure; low
/// pages are mostly whitespace. The drawing code is label-conditioned
/// only, so both domains share the same visual conventions.
fn render_page(rng: &mut ChaCha8Rng, high: bool) -> image::GrayImage {
    let mut img = image::GrayImage::from_pixel(PAGE_W, PAGE_H, image::Luma([255]));
    // title bar
    fill_rect(&mut img, 20, 10, 180, 6, 40);
    if high {
        for i in 0..18u32 {
            let width = rng.gen_range(140..190);
            fill_rect(&mut img, 15, 28 + i * 8, width, 3, 90);
        }
        // figure: bordered box with a jittered dot grid
        let fx = rng.gen_range(20..70);
        let fy = rng.gen_range(180..240);
        let (fw, fh) = (130u32, 75u32);
        fill_rect(&mut img, fx, fy, fw, 2, 30);
        fill_rect(&mut img, fx, fy + fh - 2, fw, 2, 30);
        fill_rect(&mut img, fx, fy, 2, fh, 30);
        fill_rect(&mut img, fx + fw - 2, fy, 2, fh, 30);
        let mut y = fy + 8;
        while y + 8 < fy + fh {
            let mut x = fx + 8;
            while x + 8 < fx + fw {
                let jx = rng.gen_range(0..3);
                let jy = rng.gen_range(0..3);
                let val = rng.gen_range(20..80);
                fill_rect(&mut img, x + jx, y + jy, 3, 3, val);
                x += 10;
            }
            y += 10;
        }
    } else {
        for i in 0..4u32 {
            let width = rng.gen_range(60..170);
            fill_rect(&mut img, 15, 45 + i * 32, width, 3, 90);
        }
    }
    img
}

fn render_text(rng: &mut ChaCha8Rng, domain: &str, high: bool) -> String {
    let mut tokens: Vec<String> = Vec::new();
    for _ in 0..150 {
        tokens.push(format!("{domain}filler{:02}", rng.gen_range(0..40)));
    }
    if high {
        for _ in 0..(8 + rng.gen_range(0..6)) {
            tokens.push(planted_token(domain));
        }
        for _ in 0..6 {
            tokens.push(format!("{domain}novel{}", rng.gen_range(0..4)));
        }
    } else {
        for _ in 0..(8 + rng.gen_range(0..6)) {
            tokens.push(format!("{domain}routine{}", rng.gen_range(0..4)));
        }
    }
    // a publication year, which the tokenizer strips
    tokens.push(format!("{}", 2000 + rng.gen_range(0..14)));
    use rand::seq::SliceRandom;
    tokens.shuffle(rng);
    tokens
        .chunks(12)
        .map(|c| c.join(" "))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Writes text files, page PNGs, and `manifest.jsonl` under `dir`.
/// Returns the manifest path. Identical spec → identical bytes.
pub fn generate(dir: &Path, spec: &SyntheticSpec) -> io::Result<PathBuf> {
    std::fs::create_dir_all(dir.join("text"))?;
    std::fs::create_dir_all(dir.join("pages"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut manifest_lines = Vec::new();

    for domain in SYNTH_DOMAINS {
        for high in [true, false] {
            for i in 0..spec.docs_per_cell {
                let id = format!(
                    "{domain}-{}-{i:03}",
                    if high { "high" } else { "low" }
                );
                let text_rel = format!("text/{id}.txt");
                std::fs::write(dir.join(&text_rel), render_text(&mut rng, domain, high))?;

                let n_pages = if rng.gen_range(0..5) == 0 { 2 } else { 1 };
                let mut page_rels = Vec::new();
                for p in 0..n_pages {
                    let page_rel = format!("pages/{id}_p{p}.png");
                    render_page(&mut rng, high)
                        .save(dir.join(&page_rel))
                        .map_err(io::Error::other)?;
                    page_rels.push(page_rel);
                }

                let citations: u32 = if high { 11 + rng.gen_range(0..90) } else { 0 };
                let year = 2000 + rng.gen_range(0..14);
                manifest_lines.push(
                    serde_json::json!({
                        "id": id,
                        "domain": domain,
                        "year": year,
                        "citations": citations,
                        "text": text_rel,
                        "pages": page_rels,
                    })
                    .to_string(),
                );
            }
        }
    }
    let manifest = dir.join("manifest.jsonl");
    std::fs::write(&manifest, manifest_lines.join("\n") + "\n")?;
    Ok(manifest)
}
