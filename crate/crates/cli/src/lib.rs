//! Command-line front end for croppable JPEG signatures.
//!
//! Exit codes: 0 verified / success, 1 verification failed, 2 format or
//! usage error.

pub mod bench;
pub mod keys;
pub mod synth;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use cropsig::jpeg::payload::{chunk_count, extract_payload};
use cropsig::pipeline::Signature;
use cropsig::{
    crop_image, sign_image, verify_image, CropRect, Granularity, JpegImage, OuterKeyPair,
    SchemeKind, SignOptions, VerifyError, VerifyReport,
};
use rand_core::OsRng;

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECTED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "cropsig",
    version,
    about = "Croppable signatures for JPEG images"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a signing keypair as <PREFIX>.key and <PREFIX>.pub.
    Keygen { prefix: PathBuf },

    /// Sign a JPEG and embed the full signature.
    Sign {
        /// Private key file written by keygen.
        #[arg(long)]
        key: PathBuf,
        input: PathBuf,
        output: PathBuf,
        /// Cell side length in MCUs.
        #[arg(short, long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        granularity: u16,
        #[arg(long, default_value = "croppable", value_parser = parse_scheme)]
        scheme: SchemeKind,
        /// Certificate blob to carry alongside the signature (stored, never parsed).
        #[arg(long)]
        cert: Option<PathBuf>,
    },

    /// Crop a fully signed JPEG along cell boundaries; needs no key.
    Crop {
        input: PathBuf,
        output: PathBuf,
        /// Cell rectangle i1,i2,j1,j2 (rows then columns, 1-based, inclusive).
        #[arg(long, required_unless_present = "rect_px", conflicts_with = "rect_px")]
        rect: Option<CropRect>,
        /// Pixel box x0,y0,x1,y1 (end exclusive); must fall on cell edges.
        #[arg(long)]
        rect_px: Option<PixelBox>,
        /// Verify the input against this public key before cropping.
        #[arg(long)]
        pubkey: Option<PathBuf>,
    },

    /// Verify a signed or signed-and-cropped JPEG.
    Verify {
        #[arg(long)]
        pubkey: PathBuf,
        input: PathBuf,
    },

    /// Print the embedded payload without verifying it.
    Inspect { input: PathBuf },

    /// Measure signed file sizes across granularities and write CSV.
    Bench {
        images: Vec<PathBuf>,
        /// Synthetic image, WxH:quality or WxH@size (e.g. 1024x768@250k). Repeatable.
        #[arg(long)]
        synthesize: Vec<synth::SynthSpec>,
        /// `1..8`, `1,2,4` or a single value.
        #[arg(long, default_value = "1..8")]
        granularities: bench::GranularityList,
        /// Output CSV; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fixes keys and nonces so reruns are byte-identical.
        #[arg(long, env = bench::SEED_ENV)]
        seed: Option<u64>,
        #[arg(long)]
        key: Option<PathBuf>,
        #[arg(long)]
        cert: Option<PathBuf>,
    },
}

fn parse_scheme(s: &str) -> Result<SchemeKind, String> {
    s.parse()
}

/// Pixel box `x0,y0,x1,y1`, end exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl std::str::FromStr for PixelBox {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v: Vec<u32> = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| format!("expected x0,y0,x1,y1, got {s:?}"))
            })
            .collect::<Result<_, _>>()?;
        match v[..] {
            [x0, y0, x1, y1] if x0 < x1 && y0 < y1 => Ok(PixelBox { x0, y0, x1, y1 }),
            [_, _, _, _] => Err(format!("empty pixel box {s:?}")),
            _ => Err(format!("expected x0,y0,x1,y1, got {s:?}")),
        }
    }
}

/// Converts a pixel box to cell indices. Each edge must lie on a cell
/// boundary; right and bottom edges may also be the image edge.
pub fn pixel_box_to_cells(
    image: &JpegImage,
    g: Granularity,
    b: PixelBox,
) -> Result<CropRect, String> {
    let layout = image.layout();
    let cw = g.get() as u32 * layout.mcu_width_px;
    let ch = g.get() as u32 * layout.mcu_height_px;
    let (w, h) = (image.width(), image.height());
    if b.x1 > w || b.y1 > h {
        return Err(format!("pixel box exceeds the {w}x{h} image"));
    }
    let aligned = |start: u32, end: u32, cell: u32, edge: u32| {
        start.is_multiple_of(cell) && (end.is_multiple_of(cell) || end == edge)
    };
    if !aligned(b.x0, b.x1, cw, w) || !aligned(b.y0, b.y1, ch, h) {
        return Err(format!(
            "pixel box is not aligned to the {cw}x{ch} px cell grid"
        ));
    }
    Ok(CropRect::new(
        b.y0 / ch + 1,
        b.y1.div_ceil(ch),
        b.x0 / cw + 1,
        b.x1.div_ceil(cw),
    ))
}

/// Command outcome: anything not `Ok` carries the exit code to use.
#[derive(Debug)]
pub enum Failure {
    Rejected(String),
    Usage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

type Outcome = Result<(), Failure>;

fn load_image(path: &Path) -> anyhow::Result<JpegImage> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    JpegImage::parse(&bytes).with_context(|| format!("{} is not a supported JPEG", path.display()))
}

fn save_image(path: &Path, image: &JpegImage) -> anyhow::Result<()> {
    fs::write(path, image.to_bytes()).with_context(|| format!("cannot write {}", path.display()))
}

fn read_cert(path: Option<&Path>) -> anyhow::Result<Vec<u8>> {
    path.map_or(Ok(Vec::new()), |p| {
        fs::read(p).with_context(|| format!("cannot read {}", p.display()))
    })
}

fn verify_with(pubkey: &Path, image: &JpegImage) -> Result<VerifyReport, Failure> {
    let pk = keys::read_public_key(pubkey)?;
    verify_image(&pk.to_bytes(), image).map_err(|e| match e {
        VerifyError::Malformed(m) => Failure::Usage(anyhow!("malformed signature payload: {m}")),
        e => Failure::Rejected(e.to_string()),
    })
}

pub fn format_report(r: &VerifyReport) -> String {
    format!(
        "verified: {} signature ({})\nsuite: {}\ngranularity: {}\nimage: {}x{} px\ngrid: {}x{} cells\nrect: {}\nsigner: {}\ncertificate: {} bytes\n",
        r.scheme.name(),
        r.kind.name(),
        r.suite.name(),
        r.granularity,
        r.width_px,
        r.height_px,
        r.grid.0,
        r.grid.1,
        r.rect,
        r.signer_fingerprint,
        r.certificate_bytes
    )
}

fn keygen(prefix: &Path) -> Outcome {
    let key = OuterKeyPair::generate(&mut OsRng);
    let (sk, pk) = keys::write_keypair(prefix, &key)?;
    println!("private key: {}", sk.display());
    println!("public key:  {}", pk.display());
    println!("{}", hex::encode(key.public_key().to_bytes()));
    Ok(())
}

fn sign(
    key: &Path,
    input: &Path,
    output: &Path,
    g: u16,
    scheme: SchemeKind,
    cert: Option<&Path>,
) -> Outcome {
    let key = keys::read_secret_key(key)?;
    let image = load_image(input)?;
    let mut opts = SignOptions::new(scheme, Granularity::new(g).map_err(anyhow::Error::from)?);
    opts.certificate = read_cert(cert)?;
    let signed = sign_image(&key, &image, &opts, &mut OsRng).map_err(anyhow::Error::from)?;
    save_image(output, &signed)?;
    let (w, h) = image.layout().cell_dims(opts.granularity);
    println!(
        "signed {} as {} ({}x{} cells, g={g})",
        output.display(),
        scheme.name(),
        w,
        h
    );
    Ok(())
}

fn crop(
    input: &Path,
    output: &Path,
    rect: Option<CropRect>,
    px: Option<PixelBox>,
    pubkey: Option<&Path>,
) -> Outcome {
    let image = load_image(input)?;
    if let Some(pk) = pubkey {
        verify_with(pk, &image)?;
    }
    let rect = match (rect, px) {
        (Some(r), _) => r,
        (None, Some(b)) => {
            let p = extract_payload(&image)
                .map_err(anyhow::Error::from)?
                .ok_or_else(|| anyhow!("{} carries no signature", input.display()))?;
            let g = Granularity::new(p.granularity).map_err(anyhow::Error::from)?;
            pixel_box_to_cells(&image, g, b).map_err(|e| anyhow!(e))?
        }
        (None, None) => unreachable!("clap requires one of --rect and --rect-px"),
    };
    let cropped = crop_image(&image, &rect).map_err(anyhow::Error::from)?;
    save_image(output, &cropped)?;
    println!(
        "cropped {} to cells {rect} ({}x{} px)",
        output.display(),
        cropped.width(),
        cropped.height()
    );
    Ok(())
}

fn verify(pubkey: &Path, input: &Path) -> Outcome {
    let image = load_image(input)?;
    let report = verify_with(pubkey, &image)?;
    print!("{}", format_report(&report));
    Ok(())
}

fn inspect(input: &Path) -> Outcome {
    let image = load_image(input)?;
    let l = image.layout();
    println!(
        "image: {}x{} px, {} components, MCU {}x{} px, {}x{} MCUs",
        image.width(),
        image.height(),
        image.frame().components.len(),
        l.mcu_width_px,
        l.mcu_height_px,
        l.mcus_per_row,
        l.mcus_per_col
    );
    let Some(p) = extract_payload(&image).map_err(anyhow::Error::from)? else {
        println!("no payload");
        return Ok(());
    };
    let sig = Signature::from_payload(&p).map_err(anyhow::Error::from)?;
    let (w, h) = sig.grid_dims();
    println!("scheme: {}", p.scheme.name());
    println!("kind: {}", p.kind.name());
    println!("suite: {}", p.suite.name());
    println!("granularity: {}", p.granularity);
    println!("grid: {w}x{h} cells");
    println!("rect: {}", sig.rect());
    println!("chunks: {}", chunk_count(&image));
    println!("payload: {} bytes", p.to_bytes().len());
    println!("certificate: {} bytes", p.certificate.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_bench(
    images: &[PathBuf],
    synthesize: &[synth::SynthSpec],
    granularities: Vec<u16>,
    out: Option<&Path>,
    seed: Option<u64>,
    key: Option<&Path>,
    cert: Option<&Path>,
) -> Outcome {
    if images.is_empty() && synthesize.is_empty() {
        return Err(anyhow!("give image paths or --synthesize").into());
    }
    let mut inputs = Vec::new();
    for path in images {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        let id = path.file_name().map_or_else(
            || path.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        );
        inputs.push(bench::BenchImage { id, bytes });
    }
    for spec in synthesize {
        let (bytes, q) = synth::synthesize(spec)?;
        inputs.push(bench::BenchImage {
            id: format!("synth-{}x{}-q{q}", spec.width, spec.height),
            bytes,
        });
    }
    let key = match (key, seed) {
        (Some(k), _) => keys::read_secret_key(k)?,
        (None, Some(s)) => bench::seeded_key(s),
        (None, None) => OuterKeyPair::generate(&mut OsRng),
    };
    let cfg = bench::BenchConfig {
        granularities,
        schemes: vec![SchemeKind::Croppable, SchemeKind::Baseline],
        key,
        seed,
        certificate: read_cert(cert)?,
    };
    let records = bench::run(&inputs, &cfg);
    match out {
        Some(p) => {
            let f = fs::File::create(p).with_context(|| format!("cannot write {}", p.display()))?;
            bench::write_csv(&records, f)?;
        }
        None => bench::write_csv(&records, std::io::stdout().lock())?,
    }
    for g in bench::full_size_gaps(&records) {
        eprintln!(
            "{} g={}: croppable {} B, baseline {} B, gap {:.3}%",
            g.image_id,
            g.granularity,
            g.croppable_bytes,
            g.baseline_bytes,
            100.0 * g.relative()
        );
    }
    let failures = records.iter().filter(|r| !r.is_ok()).count();
    if failures > 0 {
        eprintln!(
            "{failures} of {} runs failed; see the error column",
            records.len()
        );
    }
    Ok(())
}

pub fn execute(cli: Cli) -> Outcome {
    match cli.command {
        Command::Keygen { prefix } => keygen(&prefix),
        Command::Sign {
            key,
            input,
            output,
            granularity,
            scheme,
            cert,
        } => sign(&key, &input, &output, granularity, scheme, cert.as_deref()),
        Command::Crop {
            input,
            output,
            rect,
            rect_px,
            pubkey,
        } => crop(&input, &output, rect, rect_px, pubkey.as_deref()),
        Command::Verify { pubkey, input } => verify(&pubkey, &input),
        Command::Inspect { input } => inspect(&input),
        Command::Bench {
            images,
            synthesize,
            granularities,
            out,
            seed,
            key,
            cert,
        } => run_bench(
            &images,
            &synthesize,
            granularities.0,
            out.as_deref(),
            seed,
            key.as_deref(),
            cert.as_deref(),
        ),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Rejected(msg)) => {
            eprintln!("error: {msg}");
            EXIT_REJECTED
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}
