//! Signed-file size benchmark: for every image, scheme and granularity, sign,
//! crop to the top-left quarter, and record file and payload sizes.

use std::io::Write;

use anyhow::Result;
use cropsig::jpeg::payload::{chunk_count, extract_payload, strip_payload};
use cropsig::pipeline::Signature;
use cropsig::{
    crop_image, sign_image, CropRect, Granularity, JpegImage, OuterKeyPair, SchemeKind, SignOptions,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "CROPSIG_BENCH_SEED";

/// One CSV row. Each row describes one output file; `unsigned_bytes` is the
/// size of that same file with the payload segments removed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub unsigned_bytes: usize,
    pub scheme: String,
    pub granularity: u16,
    pub kind: String,
    pub signed_bytes: usize,
    pub payload_bytes: usize,
    /// COM segments holding the payload.
    pub chunks: usize,
    /// Empty on success.
    pub error: String,
}

impl BenchRecord {
    /// Bytes the container adds on top of the payload: marker, length and
    /// chunk header per segment.
    pub fn segment_overhead(&self) -> usize {
        self.signed_bytes - self.unsigned_bytes - self.payload_bytes
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct BenchImage {
    pub id: String,
    pub bytes: Vec<u8>,
}

pub struct BenchConfig {
    pub granularities: Vec<u16>,
    pub schemes: Vec<SchemeKind>,
    pub key: OuterKeyPair,
    /// Fixes every ephemeral key; `None` draws them from the OS.
    pub seed: Option<u64>,
    pub certificate: Vec<u8>,
}

fn job_rng(seed: Option<u64>, job: usize) -> ChaCha20Rng {
    match seed {
        Some(s) => {
            let mut rng = ChaCha20Rng::seed_from_u64(s);
            rng.set_stream(job as u64 + 1);
            rng
        }
        None => ChaCha20Rng::from_entropy(),
    }
}

/// Outer key used when a seed is given and no key file is.
pub fn seeded_key(seed: u64) -> OuterKeyPair {
    OuterKeyPair::generate(&mut ChaCha20Rng::seed_from_u64(seed))
}

fn describe(id: &str, image: &JpegImage, scheme: SchemeKind, g: u16, kind: &str) -> BenchRecord {
    let signed = image.to_bytes().len();
    let payload = extract_payload(image)
        .ok()
        .flatten()
        .map_or(0, |p| p.to_bytes().len());
    BenchRecord {
        image_id: id.to_string(),
        width: image.width(),
        height: image.height(),
        unsigned_bytes: strip_payload(image).to_bytes().len(),
        scheme: scheme.name().to_string(),
        granularity: g,
        kind: kind.to_string(),
        signed_bytes: signed,
        payload_bytes: payload,
        chunks: chunk_count(image),
        error: String::new(),
    }
}

fn failed(img: &BenchImage, scheme: SchemeKind, g: u16, kind: &str, err: String) -> BenchRecord {
    BenchRecord {
        image_id: img.id.clone(),
        width: 0,
        height: 0,
        unsigned_bytes: img.bytes.len(),
        scheme: scheme.name().to_string(),
        granularity: g,
        kind: kind.to_string(),
        signed_bytes: 0,
        payload_bytes: 0,
        chunks: 0,
        error: err,
    }
}

fn run_job(
    img: &BenchImage,
    scheme: SchemeKind,
    g: u16,
    cfg: &BenchConfig,
    rng: &mut ChaCha20Rng,
) -> Vec<BenchRecord> {
    let full = (|| -> Result<JpegImage> {
        let image = JpegImage::parse(&img.bytes)?;
        let mut opts = SignOptions::new(scheme, Granularity::new(g)?);
        opts.certificate = cfg.certificate.clone();
        Ok(sign_image(&cfg.key, &image, &opts, rng)?)
    })();
    let full = match full {
        Ok(f) => f,
        Err(e) => return vec![failed(img, scheme, g, "full", format!("{e:#}"))],
    };
    let mut out = vec![describe(&img.id, &full, scheme, g, "full")];
    let cropped = (|| -> Result<JpegImage> {
        let p = extract_payload(&full)?.expect("just signed");
        let (w, h) = Signature::from_payload(&p)?.grid_dims();
        Ok(crop_image(&full, &CropRect::top_left_quarter(w, h))?)
    })();
    out.push(match cropped {
        Ok(c) => describe(&img.id, &c, scheme, g, "cropped"),
        Err(e) => failed(img, scheme, g, "cropped", format!("{e:#}")),
    });
    out
}

/// Runs every image x scheme x granularity job in parallel. Row order is
/// fixed regardless of scheduling; failures become rows with `error` set.
pub fn run(images: &[BenchImage], cfg: &BenchConfig) -> Vec<BenchRecord> {
    let jobs: Vec<(&BenchImage, SchemeKind, u16)> = images
        .iter()
        .flat_map(|img| {
            cfg.schemes
                .iter()
                .flat_map(move |&s| cfg.granularities.iter().map(move |&g| (img, s, g)))
        })
        .collect();
    jobs.par_iter()
        .enumerate()
        .map(|(k, &(img, scheme, g))| run_job(img, scheme, g, cfg, &mut job_rng(cfg.seed, k)))
        .collect::<Vec<_>>()
        .concat()
}

pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<BenchRecord>> {
    Ok(csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<_, _>>()?)
}

/// Parses `1..8` (inclusive), `1,2,4`, or a single value.
pub fn parse_granularities(s: &str) -> Result<Vec<u16>, String> {
    let out: Vec<u16> = if let Some((a, b)) = s.split_once("..") {
        let a: u16 = a
            .trim()
            .parse()
            .map_err(|_| format!("bad range start in {s:?}"))?;
        let b: u16 = b
            .trim_start_matches('=')
            .trim()
            .parse()
            .map_err(|_| format!("bad range end in {s:?}"))?;
        if a > b {
            return Err(format!("empty range {s:?}"));
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|v| {
                v.trim()
                    .parse::<u16>()
                    .map_err(|_| format!("bad granularity {v:?}"))
            })
            .collect::<Result<_, _>>()?
    };
    if out.contains(&0) {
        return Err("granularity must be at least 1".into());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GranularityList(pub Vec<u16>);

impl std::str::FromStr for GranularityList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_granularities(s).map(GranularityList)
    }
}

/// Per image and granularity: signed full-file sizes of both schemes and the
/// gap relative to the croppable file.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeGap {
    pub image_id: String,
    pub granularity: u16,
    pub croppable_bytes: usize,
    pub baseline_bytes: usize,
}

impl SizeGap {
    pub fn relative(&self) -> f64 {
        (self.baseline_bytes as f64 - self.croppable_bytes as f64) / self.croppable_bytes as f64
    }
}

pub fn full_size_gaps(records: &[BenchRecord]) -> Vec<SizeGap> {
    let full = |scheme: &str, id: &str, g: u16| {
        records
            .iter()
            .find(|r| {
                r.is_ok()
                    && r.kind == "full"
                    && r.scheme == scheme
                    && r.image_id == id
                    && r.granularity == g
            })
            .map(|r| r.signed_bytes)
    };
    let mut out: Vec<SizeGap> = Vec::new();
    for r in records.iter().filter(|r| r.is_ok() && r.kind == "full") {
        if out
            .iter()
            .any(|s| s.image_id == r.image_id && s.granularity == r.granularity)
        {
            continue;
        }
        if let (Some(c), Some(b)) = (
            full("croppable", &r.image_id, r.granularity),
            full("baseline", &r.image_id, r.granularity),
        ) {
            out.push(SizeGap {
                image_id: r.image_id.clone(),
                granularity: r.granularity,
                croppable_bytes: c,
                baseline_bytes: b,
            });
        }
    }
    out
}
