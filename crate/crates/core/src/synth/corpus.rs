//! Labelled specimen corpora with a CSV manifest.

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::encode::{encode, EncodeError};
use super::render::{render, StyleSpec};
use crate::classifier::Label;
use crate::grid::BinaryGrid;
use crate::image::RgbImage;
use crate::protocol::{EccLevel, Version};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SynthError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("invalid style: {0}")]
    InvalidStyle(String),
    #[error("logo occlusion requires ECC level H, got {0}")]
    LogoRequiresEccH(EccLevel),
}

/// A rendered symbol with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct QrSpecimen {
    pub image: RgbImage,
    pub truth_grid: BinaryGrid,
    pub version: Version,
    pub ecc: EccLevel,
    pub mask: u8,
    pub payload: Vec<u8>,
    pub style: StyleSpec,
}

/// Encodes `payload` and renders it with `style`.
pub fn make_specimen(
    payload: &[u8],
    ecc: EccLevel,
    version: Option<Version>,
    style: &StyleSpec,
) -> Result<QrSpecimen, SynthError> {
    style.validate().map_err(SynthError::InvalidStyle)?;
    if style.logo_fraction > 0.0 && ecc != EccLevel::H {
        return Err(SynthError::LogoRequiresEccH(ecc));
    }
    let enc = encode(payload, ecc, version)?;
    Ok(QrSpecimen {
        image: render(&enc.grid, style),
        truth_grid: enc.grid,
        version: enc.version,
        ecc,
        mask: enc.mask,
        payload: payload.to_vec(),
        style: style.clone(),
    })
}

/// Deterministic payload filling the byte capacity of `version` at `ecc`.
pub fn reference_payload(version: Version, ecc: EccLevel) -> Vec<u8> {
    const FILL: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";
    let mut out = format!("https://alfa.test/v{}/{ecc}/", version.number()).into_bytes();
    let cap = super::encode::byte_capacity(version, ecc);
    let mut i = 0;
    while out.len() < cap {
        out.push(FILL[i % FILL.len()]);
        i += 1;
    }
    out.truncate(cap);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledUrl {
    pub url: String,
    pub label: Label,
}

/// How styles are assigned to URLs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StyleAssignment {
    /// One specimen per (url, style) pair.
    #[default]
    Cross,
    /// One specimen per URL, style drawn from the seeded generator.
    OnePerUrl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem {
    pub url: String,
    pub label: Label,
    pub style_id: String,
    pub specimen: Result<QrSpecimen, SynthError>,
}

pub fn url_hash(url: &str) -> String {
    hex::encode(Sha256::digest(url.as_bytes()))
}

pub fn make_corpus(
    urls: &[LabeledUrl],
    styles: &[(String, StyleSpec)],
    ecc: EccLevel,
    seed: u64,
    assignment: StyleAssignment,
) -> Vec<CorpusItem> {
    if styles.is_empty() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::new();
    let mut push = |entry: &LabeledUrl, (id, style): &(String, StyleSpec)| {
        items.push(CorpusItem {
            url: entry.url.clone(),
            label: entry.label,
            style_id: id.clone(),
            specimen: make_specimen(entry.url.as_bytes(), ecc, None, style),
        });
    };
    for entry in urls {
        match assignment {
            StyleAssignment::Cross => styles.iter().for_each(|s| push(entry, s)),
            StyleAssignment::OnePerUrl => push(entry, styles.choose(&mut rng).expect("non-empty")),
        }
    }
    items
}

pub const MANIFEST_HEADER: &str = "path,grid_path,url_hash,label,version,ecc,mask,style_id,encode_error";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes `NNNN.ppm` images and `NNNN.grid` truth grids under `dir` and
/// returns the manifest text (also written to `dir/manifest.csv`). Paths in
/// the manifest are relative to `dir`.
pub fn write_corpus(dir: &Path, items: &[CorpusItem]) -> io::Result<String> {
    fs::create_dir_all(dir)?;
    let mut manifest = String::from(MANIFEST_HEADER);
    manifest.push('\n');
    for (i, item) in items.iter().enumerate() {
        let row = match &item.specimen {
            Ok(spec) => {
                let path = format!("{i:04}.ppm");
                let grid_path = format!("{i:04}.grid");
                fs::write(dir.join(&path), spec.image.to_ppm())?;
                fs::write(dir.join(&grid_path), spec.truth_grid.to_text())?;
                [
                    path,
                    grid_path,
                    url_hash(&item.url),
                    item.label.to_string(),
                    spec.version.to_string(),
                    spec.ecc.to_string(),
                    spec.mask.to_string(),
                    item.style_id.clone(),
                    String::new(),
                ]
            }
            Err(e) => [
                String::new(),
                String::new(),
                url_hash(&item.url),
                item.label.to_string(),
                String::new(),
                String::new(),
                String::new(),
                item.style_id.clone(),
                e.to_string(),
            ],
        };
        let fields: Vec<String> = row.iter().map(|f| csv_field(f)).collect();
        manifest.push_str(&fields.join(","));
        manifest.push('\n');
    }
    fs::write(dir.join("manifest.csv"), &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub path: String,
    pub grid_path: String,
    pub url_hash: String,
    pub label: Label,
    pub version: Option<u32>,
    pub ecc: Option<EccLevel>,
    pub mask: Option<u8>,
    pub style_id: String,
    pub encode_error: String,
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(ch) = chars.next() {
        match (ch, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => out.push(std::mem::take(&mut cur)),
            _ => cur.push(ch),
        }
    }
    out.push(cur);
    out
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == MANIFEST_HEADER => {}
        other => return Err(format!("unexpected manifest header {other:?}")),
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f = split_csv_line(line);
            if f.len() != 9 {
                return Err(format!("manifest row has {} fields: {line}", f.len()));
            }
            let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
            Ok(ManifestRow {
                path: f[0].clone(),
                grid_path: f[1].clone(),
                url_hash: f[2].clone(),
                label: f[3].parse()?,
                version: opt(&f[4]).map(|s| s.parse().map_err(|e| format!("{e}"))).transpose()?,
                ecc: opt(&f[5]).map(|s| s.parse().map_err(|e| format!("{e}"))).transpose()?,
                mask: opt(&f[6]).map(|s| s.parse().map_err(|e| format!("{e}"))).transpose()?,
                style_id: f[7].clone(),
                encode_error: f[8].clone(),
            })
        })
        .collect()
}

const WORDS: [&str; 24] = [
    "news", "shop", "blog", "docs", "mail", "cloud", "photo", "travel", "music", "games", "health",
    "bank", "store", "learn", "maps", "food", "sport", "tech", "home", "art", "city", "data", "wiki",
    "jobs",
];
const BRANDS: [&str; 8] = [
    "paypal", "apple", "microsoft", "amazon", "netflix", "chase", "dhl", "office365",
];
const LURES: [&str; 8] = [
    "secure", "verify", "login", "account", "update", "signin", "support", "billing",
];
const TLDS: [&str; 6] = ["xyz", "top", "info", "online", "site", "click"];

fn token(rng: &mut ChaCha8Rng, len: usize) -> String {
    const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    (0..len)
        .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())] as char)
        .collect()
}

fn legit_url(rng: &mut ChaCha8Rng) -> String {
    let site = WORDS.choose(rng).unwrap();
    let tld = ["com", "org", "net", "edu"].choose(rng).unwrap();
    let depth = rng.random_range(0..=2);
    let mut url = format!("https://www.{site}{}.{tld}", rng.random_range(1..1000));
    for _ in 0..depth {
        url.push('/');
        url.push_str(WORDS.choose(rng).unwrap());
    }
    if rng.random_bool(0.8) {
        url.push_str(&format!("/{}-{}", WORDS.choose(rng).unwrap(), rng.random_range(1..100_000)));
    }
    url
}

fn phishing_url(rng: &mut ChaCha8Rng) -> String {
    let brand = BRANDS.choose(rng).unwrap();
    let lure = LURES.choose(rng).unwrap();
    let tld = TLDS.choose(rng).unwrap();
    let scheme = if rng.random_bool(0.5) { "http" } else { "https" };
    let host = if rng.random_bool(0.15) {
        format!(
            "{}.{}.{}.{}",
            rng.random_range(1..255),
            rng.random_range(0..255),
            rng.random_range(0..255),
            rng.random_range(1..255)
        )
    } else {
        format!("{lure}-{brand}-{}.{tld}", token(rng, 4))
    };
    let path_len = rng.random_range(4..24);
    let mut url = format!("{scheme}://{host}/{brand}/{lure}/{}", token(rng, path_len));
    if rng.random_bool(0.6) {
        let n = rng.random_range(6..20);
        url.push_str(&format!("?id={}", token(rng, n)));
    }
    url
}

/// Distinct synthetic labelled URLs: phishing ones are longer, lure-laden
/// and often carry query tokens; legitimate ones are short site paths.
/// Order is phishing first, then legitimate.
pub fn synthetic_urls(phishing: usize, legitimate: usize, seed: u64) -> Vec<LabeledUrl> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(phishing + legitimate);
    for (count, label) in [(phishing, Label::Phishing), (legitimate, Label::Legitimate)] {
        let mut made = 0;
        while made < count {
            let url = match label {
                Label::Phishing => phishing_url(&mut rng),
                Label::Legitimate => legit_url(&mut rng),
            };
            if seen.insert(url.clone()) {
                out.push(LabeledUrl { url, label });
                made += 1;
            }
        }
    }
    out
}

/// Reads `url,label` lines (an optional header is skipped).
pub fn parse_url_list(text: &str) -> Result<Vec<LabeledUrl>, String> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .filter(|l| !l.trim_start().starts_with("url,"))
        .map(|line| {
            let (url, label) = line
                .rsplit_once(',')
                .ok_or_else(|| format!("expected url,label: {line}"))?;
            Ok(LabeledUrl {
                url: url.trim().to_string(),
                label: label.parse()?,
            })
        })
        .collect()
}
