//! PGM ingestion, dataset manifests and the synthetic face-like dataset.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{ClassId, Error, Result};

/// An 8-bit grayscale raster, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::UnsupportedFormat(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::dims(width * height, pixels.len()));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Row-major flattening with every intensity divided by 255.
    pub fn to_vector(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| f64::from(p) / 255.0).collect()
    }

    /// Box-filter downsampling by an integer factor. Partial edge blocks are
    /// dropped; a factor of 1 returns a copy.
    pub fn downsample(&self, factor: usize) -> Result<GrayImage> {
        if factor == 0 {
            return Err(Error::InvalidConfig("downsample factor must be >= 1".into()));
        }
        let (w, h) = (self.width / factor, self.height / factor);
        if w == 0 || h == 0 {
            return Err(Error::InvalidConfig(format!(
                "downsample factor {factor} too large for {}x{} image",
                self.width, self.height
            )));
        }
        let area = (factor * factor) as u32;
        let mut out = Vec::with_capacity(w * h);
        for by in 0..h {
            for bx in 0..w {
                let mut sum = 0u32;
                for y in by * factor..(by + 1) * factor {
                    for x in bx * factor..(bx + 1) * factor {
                        sum += u32::from(self.pixel(x, y));
                    }
                }
                // round half up
                out.push(((sum + area / 2) / area) as u8);
            }
        }
        GrayImage::new(w, h, out)
    }

    /// Binary (P5) encoding with maxval 255.
    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Flattens an image into a vector in `[0, 1]`.
pub fn to_vector(image: &GrayImage) -> Vec<f64> {
    image.to_vector()
}

/// Parses a binary (P5) or ASCII (P2) PGM image with maxval <= 255.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => {
            let shown = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
            return Err(Error::UnsupportedFormat(format!("bad magic {shown:?}")));
        }
    };

    let mut header = HeaderReader { bytes, pos: 2 };
    let width = header.next_number("width")?;
    let height = header.next_number("height")?;
    let maxval = header.next_number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::UnsupportedFormat(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    if maxval > 255 {
        return Err(Error::UnsupportedDepth(maxval));
    }
    if maxval == 0 {
        return Err(Error::UnsupportedFormat("maxval must be positive".into()));
    }
    let (width, height) = (width as usize, height as usize);
    let expected = width * height;

    let pixels = if binary {
        // exactly one whitespace byte separates maxval from the payload
        match bytes.get(header.pos) {
            Some(b) if b.is_ascii_whitespace() => {}
            _ => {
                return Err(Error::TruncatedImage {
                    expected,
                    found: 0,
                })
            }
        }
        let payload = &bytes[header.pos + 1..];
        if payload.len() < expected {
            return Err(Error::TruncatedImage {
                expected,
                found: payload.len(),
            });
        }
        payload[..expected].to_vec()
    } else {
        let mut pixels = Vec::with_capacity(expected);
        for found in 0..expected {
            let v = match header.try_number()? {
                Some(v) => v,
                None => return Err(Error::TruncatedImage { expected, found }),
            };
            if v > maxval {
                return Err(Error::UnsupportedFormat(format!(
                    "pixel value {v} exceeds maxval {maxval}"
                )));
            }
            pixels.push(v as u8);
        }
        pixels
    };
    GrayImage::new(width, height, pixels)
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn try_number(&mut self) -> Result<Option<u32>> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return match self.bytes.get(self.pos) {
                None => Ok(None),
                Some(&b) => Err(Error::UnsupportedFormat(format!(
                    "unexpected byte 0x{b:02x} in PGM text"
                ))),
            };
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        text.parse::<u32>()
            .map(Some)
            .map_err(|_| Error::UnsupportedFormat(format!("number {text} out of range")))
    }

    fn next_number(&mut self, what: &str) -> Result<u32> {
        self.try_number()?
            .ok_or_else(|| Error::UnsupportedFormat(format!("truncated header, missing {what}")))
    }
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    parse_pgm(&bytes)
}

pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<()> {
    std::fs::write(path, image.to_pgm_bytes()).map_err(|e| Error::file(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Train,
    Test,
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Role::Train),
            "test" => Ok(Role::Test),
            other => Err(format!("bad role {other:?}, expected train or test")),
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Train => "train",
            Role::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub image: GrayImage,
    pub class_id: ClassId,
    pub role: Role,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestRecord {
    /// Path relative to the manifest's base directory.
    pub path: PathBuf,
    pub class_id: ClassId,
    pub role: Role,
}

/// Ordered list of `(path, class, role)` records.
///
/// Text form: one record per line, `<path>\t<class_id>\t<role>`. Empty lines
/// and lines starting with `#` are ignored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Manifest> {
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |message: String| Error::ManifestSyntax {
                line: line_no,
                message,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(syntax(format!(
                    "expected 3 tab-separated fields, found {}",
                    fields.len()
                )));
            }
            let class_id: ClassId = fields[1]
                .trim()
                .parse()
                .ok()
                .filter(|&c| c >= 1)
                .ok_or_else(|| syntax(format!("bad class id {:?}", fields[1])))?;
            let role: Role = fields[2].trim().parse().map_err(syntax)?;
            let path = PathBuf::from(fields[0]);
            if !seen.insert(path.clone()) {
                return Err(syntax(format!("duplicate path {}", path.display())));
            }
            records.push(ManifestRecord {
                path,
                class_id,
                role,
            });
        }

        let train_classes: BTreeSet<ClassId> = records
            .iter()
            .filter(|r| r.role == Role::Train)
            .map(|r| r.class_id)
            .collect();
        if let Some(orphan) = records
            .iter()
            .find(|r| r.role == Role::Test && !train_classes.contains(&r.class_id))
        {
            return Err(Error::InvalidConfig(format!(
                "class {} has test images but no training images",
                orphan.class_id
            )));
        }

        Ok(Manifest {
            base_dir: base_dir.into(),
            records,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# path\tclass_id\trole\n");
        for r in &self.records {
            out.push_str(&format!("{}\t{}\t{}\n", r.path.display(), r.class_id, r.role));
        }
        out
    }

    /// Loads every referenced image, in record order.
    pub fn load_samples(&self) -> Result<Vec<Sample>> {
        self.records
            .iter()
            .map(|r| {
                let image = read_pgm(&self.base_dir.join(&r.path))?;
                Ok(Sample {
                    image,
                    class_id: r.class_id,
                    role: r.role,
                })
            })
            .collect()
    }
}

/// Reads a manifest file and every image it references. Relative paths are
/// resolved against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<(Manifest, Vec<Sample>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest = Manifest::parse(&text, base)?;
    let samples = manifest.load_samples()?;
    Ok((manifest, samples))
}

/// Pixel noise standard deviation, in intensity levels.
pub const SYNTH_NOISE_SIGMA: f64 = 12.0;
/// Upper bound on the illumination gradient's peak offset, in intensity levels.
pub const SYNTH_GRADIENT_AMPLITUDE: f64 = 40.0;

/// Deterministic face-like dataset: one random prototype per class, each
/// sample perturbed by Gaussian pixel noise and a random linear illumination
/// gradient. Output is class-major, training samples before test samples.
pub fn generate_synthetic(
    k: usize,
    n_train: usize,
    n_test: usize,
    side: usize,
    seed: u64,
) -> Result<Vec<Sample>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 classes, got {k}")));
    }
    if n_train == 0 || n_test == 0 {
        return Err(Error::InvalidConfig(
            "need at least one training and one test sample per class".into(),
        ));
    }
    if side < 4 {
        return Err(Error::InvalidConfig(format!("image side must be >= 4, got {side}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, SYNTH_NOISE_SIGMA).expect("positive sigma");
    let span = (side - 1) as f64;
    let mut samples = Vec::with_capacity(k * (n_train + n_test));

    for class in 1..=k {
        let prototype: Vec<f64> = (0..side * side)
            .map(|_| rng.random_range(40.0..216.0))
            .collect();
        for i in 0..n_train + n_test {
            let amplitude = rng.random_range(0.0..=SYNTH_GRADIENT_AMPLITUDE);
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let (sin, cos) = angle.sin_cos();
            // |cos|/2 + |sin|/2 <= 1/sqrt(2), so the offset stays within amplitude
            let pixels = prototype
                .iter()
                .enumerate()
                .map(|(idx, &base)| {
                    let (x, y) = ((idx % side) as f64 / span, (idx / side) as f64 / span);
                    let light = amplitude * ((x - 0.5) * cos + (y - 0.5) * sin);
                    let v = base + noise.sample(&mut rng) + light;
                    v.round().clamp(0.0, 255.0) as u8
                })
                .collect();
            samples.push(Sample {
                image: GrayImage::new(side, side, pixels)?,
                class_id: class as ClassId,
                role: if i < n_train { Role::Train } else { Role::Test },
            });
        }
    }
    Ok(samples)
}

/// Writes samples as P5 files under `dir/images/` plus `dir/manifest.tsv`.
pub fn write_dataset(samples: &[Sample], dir: &Path) -> Result<(PathBuf, Manifest)> {
    let images = dir.join("images");
    std::fs::create_dir_all(&images).map_err(|e| Error::file(&images, e))?;
    let mut counters = std::collections::HashMap::new();
    let mut records = Vec::with_capacity(samples.len());
    for s in samples {
        let n = counters.entry((s.class_id, s.role)).or_insert(0usize);
        let rel = PathBuf::from("images").join(format!("c{:03}_{}_{:03}.pgm", s.class_id, s.role, n));
        *n += 1;
        write_pgm(&dir.join(&rel), &s.image)?;
        records.push(ManifestRecord {
            path: rel,
            class_id: s.class_id,
            role: s.role,
        });
    }
    let manifest = Manifest {
        base_dir: dir.to_path_buf(),
        records,
    };
    let path = dir.join("manifest.tsv");
    std::fs::write(&path, manifest.to_text()).map_err(|e| Error::file(&path, e))?;
    Ok((path, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_binary_pgm() {
        let mut bytes = b"P5 2 2 255\n".to_vec();
        bytes.extend([0, 255, 128, 64]);
        let img = parse_pgm(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.pixels(), &[0, 255, 128, 64]);
    }

    #[test]
    fn parses_ascii_pgm() {
        let img = parse_pgm(b"P2 1 1 255 7").unwrap();
        assert_eq!(img, GrayImage::new(1, 1, vec![7]).unwrap());
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5\n# created by hand\n3 1\n# depth\n255\n".to_vec();
        bytes.extend([1, 2, 3]);
        assert_eq!(parse_pgm(&bytes).unwrap().pixels(), &[1, 2, 3]);
    }

    #[test]
    fn binary_payload_starting_with_whitespace_byte_is_verbatim() {
        // 0x0a and 0x20 in the payload must not be eaten as separators
        let mut bytes = b"P5 3 1 255\n".to_vec();
        bytes.extend(b"\n #");
        assert_eq!(parse_pgm(&bytes).unwrap().pixels(), b"\n #");
    }

    #[test]
    fn full_size_640x480_frame() {
        let mut bytes = b"P5\n640 480\n255\n".to_vec();
        bytes.extend((0..640 * 480).map(|i| (i % 251) as u8));
        let img = parse_pgm(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (640, 480));
        assert_eq!(img.pixels().len(), 307_200);
        assert_eq!(img.pixel(639, 479), ((640 * 480 - 1) % 251) as u8);
    }

    #[test]
    fn pgm_error_paths() {
        assert!(matches!(parse_pgm(b"P6 1 1 255\n\0"), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(parse_pgm(b""), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(
            parse_pgm(b"P5 2 2 255\n\x01\x02"),
            Err(Error::TruncatedImage { expected: 4, found: 2 })
        ));
        assert!(matches!(
            parse_pgm(b"P2 2 1 255 9"),
            Err(Error::TruncatedImage { expected: 2, found: 1 })
        ));
        assert!(matches!(parse_pgm(b"P5 1 1 65535\n\0\0"), Err(Error::UnsupportedDepth(65535))));
        assert!(matches!(parse_pgm(b"P5 1 1"), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn to_vector_scales_to_unit_range() {
        let img = GrayImage::new(1, 2, vec![0, 255]).unwrap();
        assert_eq!(img.to_vector(), vec![0.0, 1.0]);
        let img = GrayImage::new(2, 1, vec![51, 102]).unwrap();
        assert_eq!(to_vector(&img), vec![0.2, 0.4]);
    }

    #[test]
    fn downsample_averages_blocks() {
        let img = GrayImage::new(4, 2, vec![0, 2, 10, 10, 4, 6, 10, 11]).unwrap();
        let small = img.downsample(2).unwrap();
        assert_eq!((small.width(), small.height()), (2, 1));
        // (0+2+4+6)/4 = 3, (10+10+10+11)/4 = 10.25 -> 10
        assert_eq!(small.pixels(), &[3, 10]);
        assert_eq!(img.downsample(1).unwrap(), img);
        assert!(img.downsample(3).is_err());
    }

    #[test]
    fn manifest_rejects_bad_role() {
        let err = Manifest::parse("img.pgm\t3\tvalidate\n", ".").unwrap_err();
        assert!(matches!(err, Error::ManifestSyntax { line: 1, .. }), "{err}");
    }

    #[test]
    fn manifest_ignores_comments_and_blank_lines() {
        let text = "# header\n\na.pgm\t1\ttrain\n# mid\nb.pgm\t1\ttest\n";
        let m = Manifest::parse(text, "/data").unwrap();
        assert_eq!(m.records.len(), 2);
        assert_eq!(m.records[1].path, PathBuf::from("b.pgm"));
        assert_eq!(m.records[1].role, Role::Test);
    }

    #[test]
    fn manifest_invariants() {
        assert!(matches!(
            Manifest::parse("a.pgm\t1\ttrain\na.pgm\t1\ttest\n", "."),
            Err(Error::ManifestSyntax { line: 2, .. })
        ));
        assert!(matches!(
            Manifest::parse("a.pgm\t1\ttrain\nb.pgm\t2\ttest\n", "."),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            Manifest::parse("a.pgm\t0\ttrain\n", "."),
            Err(Error::ManifestSyntax { line: 1, .. })
        ));
        assert!(matches!(
            Manifest::parse("a.pgm 1 train\n", "."),
            Err(Error::ManifestSyntax { line: 1, .. })
        ));
    }

    #[test]
    fn missing_image_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        std::fs::write(&path, "nope.pgm\t1\ttrain\n").unwrap();
        match load_manifest(&path) {
            Err(Error::FileError { path, .. }) => assert!(path.ends_with("nope.pgm")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = generate_synthetic(2, 1, 1, 4, 7).unwrap();
        let b = generate_synthetic(2, 1, 1, 4, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(2, 1, 1, 4, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synthetic_protocol_shape() {
        let s = generate_synthetic(10, 20, 20, 16, 1).unwrap();
        assert_eq!(s.len(), 400);
        assert_eq!(s.iter().filter(|x| x.role == Role::Train).count(), 200);
        for c in 1..=10 {
            assert_eq!(s.iter().filter(|x| x.class_id == c && x.role == Role::Test).count(), 20);
        }
        assert!(s.iter().all(|x| x.image.width() == 16 && x.image.pixels().len() == 256));
    }

    #[test]
    fn synthetic_config_errors() {
        assert!(matches!(generate_synthetic(1, 1, 1, 4, 0), Err(Error::InvalidConfig(_))));
        assert!(matches!(generate_synthetic(2, 0, 1, 4, 0), Err(Error::InvalidConfig(_))));
        assert!(matches!(generate_synthetic(2, 1, 1, 3, 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn dataset_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let samples = generate_synthetic(3, 2, 2, 6, 11).unwrap();
        let (path, _) = write_dataset(&samples, dir.path()).unwrap();
        let (manifest, loaded) = load_manifest(&path).unwrap();
        assert_eq!(manifest.records.len(), 12);
        assert_eq!(loaded, samples);
    }

    fn arb_image() -> impl Strategy<Value = GrayImage> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<u8>(), w * h)
                .prop_map(move |px| GrayImage::new(w, h, px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn pgm_round_trip(img in arb_image()) {
            prop_assert_eq!(parse_pgm(&img.to_pgm_bytes()).unwrap(), img);
        }

        #[test]
        fn to_vector_matches_per_pixel_division(img in arb_image()) {
            let v = img.to_vector();
            prop_assert_eq!(v.len(), img.width() * img.height());
            for (x, &p) in v.iter().zip(img.pixels()) {
                prop_assert!((0.0..=1.0).contains(x));
                prop_assert_eq!(*x, p as f64 / 255.0);
            }
        }

        #[test]
        fn synthetic_samples_have_declared_shape(seed in any::<u64>(), side in 4usize..9) {
            let s = generate_synthetic(2, 2, 1, side, seed).unwrap();
            prop_assert_eq!(s.len(), 6);
            for sample in &s {
                prop_assert_eq!(sample.image.pixels().len(), side * side);
            }
        }
    }
}
