//! Face analytics and OCR behind one [`VisionProvider`] interface.
//!
//! Two implementations ship: [`FixtureProvider`] answers from sidecar
//! records on disk and [`RemoteProvider`] posts image bytes to an HTTP
//! endpoint. Both speak the same JSON response schema ([`ProviderResponse`]).
//! Image references are resolved to pixels or bytes by an [`ImageSource`].

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::Gender;
use crate::error::{Error, Result};
use crate::imgfeat::{decode_image, PixelBuffer};

// ---------------------------------------------------------------------------
// Image sources

pub trait ImageSource: Send + Sync {
    fn bytes(&self, image_ref: &str) -> Result<Vec<u8>>;

    fn load(&self, image_ref: &str) -> Result<PixelBuffer> {
        decode_image(&self.bytes(image_ref)?)
    }
}

/// Resolves image references as paths relative to a root directory.
#[derive(Debug, Clone)]
pub struct DirImageSource {
    root: PathBuf,
}

impl DirImageSource {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DirImageSource { root: root.into() }
    }

    fn resolve(&self, image_ref: &str) -> Result<PathBuf> {
        let rel = Path::new(image_ref);
        if rel.is_absolute() || rel.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
            return Err(Error::NotFound(image_ref.to_string()));
        }
        Ok(self.root.join(rel))
    }
}

impl ImageSource for DirImageSource {
    fn bytes(&self, image_ref: &str) -> Result<Vec<u8>> {
        let path = self.resolve(image_ref)?;
        fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(image_ref.to_string()),
            _ => Error::io(path, e),
        })
    }
}

/// In-memory pixels keyed by reference; used by the synthetic generator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemoryImageSource {
    images: BTreeMap<String, PixelBuffer>,
}

impl MemoryImageSource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, image_ref: impl Into<String>, img: PixelBuffer) {
        self.images.insert(image_ref.into(), img);
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &PixelBuffer)> {
        self.images.iter()
    }
}

impl ImageSource for MemoryImageSource {
    fn bytes(&self, image_ref: &str) -> Result<Vec<u8>> {
        self.images.get(image_ref).map(PixelBuffer::to_png).ok_or_else(|| Error::NotFound(image_ref.to_string()))
    }

    fn load(&self, image_ref: &str) -> Result<PixelBuffer> {
        self.images.get(image_ref).cloned().ok_or_else(|| Error::NotFound(image_ref.to_string()))
    }
}

// ---------------------------------------------------------------------------
// Response schema

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Emotions {
    pub anger: f64,
    pub disgust: f64,
    pub fear: f64,
    pub joy: f64,
    pub sadness: f64,
    pub surprise: f64,
}

impl Emotions {
    pub const NAMES: [&'static str; 6] = ["anger", "disgust", "fear", "joy", "sadness", "surprise"];

    pub fn values(&self) -> [f64; 6] {
        [self.anger, self.disgust, self.fear, self.joy, self.sadness, self.surprise]
    }

    pub fn from_values(v: [f64; 6]) -> Self {
        Emotions { anger: v[0], disgust: v[1], fear: v[2], joy: v[3], sadness: v[4], surprise: v[5] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenderEstimate {
    pub value: Gender,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Face {
    /// `[x, y, w, h]` in pixels.
    pub bbox: [f64; 4],
    pub emotions: Emotions,
    #[serde(default)]
    pub age: Option<f64>,
    #[serde(default)]
    pub gender: Option<GenderEstimate>,
}

impl Face {
    fn validate(&self, dims: Option<(u32, u32)>) -> std::result::Result<(), String> {
        for (name, v) in Emotions::NAMES.iter().zip(self.emotions.values()) {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("emotion `{name}` score {v} outside [0,1]"));
            }
        }
        if let Some(g) = &self.gender {
            if !(0.0..=1.0).contains(&g.confidence) {
                return Err(format!("gender confidence {} outside [0,1]", g.confidence));
            }
        }
        if let Some(a) = self.age {
            if !a.is_finite() || a < 0.0 {
                return Err(format!("age estimate {a} is not a non-negative number"));
            }
        }
        let [x, y, w, h] = self.bbox;
        if !self.bbox.iter().all(|v| v.is_finite()) || x < 0.0 || y < 0.0 || w < 0.0 || h < 0.0 {
            return Err(format!("invalid bbox {:?}", self.bbox));
        }
        if let Some((iw, ih)) = dims {
            if x + w > f64::from(iw) || y + h > f64::from(ih) {
                return Err(format!("bbox {:?} exceeds {iw}x{ih} image", self.bbox));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FaceAnalysis {
    pub faces: Vec<Face>,
}

impl FaceAnalysis {
    /// Face with the highest gender confidence; the first face when none
    /// carries a gender estimate.
    pub fn most_confident_face(&self) -> Option<&Face> {
        let conf = |f: &Face| f.gender.map_or(-1.0, |g| g.confidence);
        self.faces
            .iter()
            .enumerate()
            .max_by(|(i, a), (j, b)| conf(a).total_cmp(&conf(b)).then(j.cmp(i)))
            .map(|(_, f)| f)
    }
}

/// Wire record returned by a remote provider and stored per image by the
/// fixture provider.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderResponse {
    #[serde(default)]
    pub faces: Vec<Face>,
    #[serde(default)]
    pub ocr_text: String,
}

impl ProviderResponse {
    pub fn validate(&self, dims: Option<(u32, u32)>) -> std::result::Result<(), String> {
        self.faces.iter().try_for_each(|f| f.validate(dims))
    }
}

// ---------------------------------------------------------------------------
// Provider interface

pub trait VisionProvider: Send + Sync {
    fn analyze_faces(&self, image_ref: &str) -> Result<FaceAnalysis>;
    fn ocr_text(&self, image_ref: &str) -> Result<String>;
}

pub fn analyze_faces(image_ref: &str, provider: &dyn VisionProvider) -> Result<FaceAnalysis> {
    provider.analyze_faces(image_ref)
}

pub fn ocr_text(image_ref: &str, provider: &dyn VisionProvider) -> Result<String> {
    provider.ocr_text(image_ref)
}

/// One line of a fixture file: the response record plus its key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureLine {
    image_ref: String,
    #[serde(default)]
    faces: Vec<Face>,
    #[serde(default)]
    ocr_text: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixtureProvider {
    records: BTreeMap<String, ProviderResponse>,
}

impl FixtureProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, image_ref: impl Into<String>, response: ProviderResponse) -> Result<()> {
        let image_ref = image_ref.into();
        response.validate(None).map_err(|m| Error::Protocol(format!("{image_ref}: {m}")))?;
        self.records.insert(image_ref, response);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut out = FixtureProvider::new();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: FixtureLine =
                serde_json::from_str(&line).map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?;
            let resp = ProviderResponse { faces: rec.faces, ocr_text: rec.ocr_text };
            resp.validate(None).map_err(|message| Error::Parse { line: lineno, message })?;
            if out.records.insert(rec.image_ref.clone(), resp).is_some() {
                return Err(Error::Parse { line: lineno, message: format!("duplicate image_ref `{}`", rec.image_ref) });
            }
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(f))
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for (image_ref, r) in &self.records {
            let line =
                FixtureLine { image_ref: image_ref.clone(), faces: r.faces.clone(), ocr_text: r.ocr_text.clone() };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n").map_err(|e| Error::io("<fixture writer>", e))?;
        }
        w.flush().map_err(|e| Error::io("<fixture writer>", e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(std::io::BufWriter::new(f))
    }

    fn get(&self, image_ref: &str) -> Result<&ProviderResponse> {
        self.records.get(image_ref).ok_or_else(|| Error::NotFound(image_ref.to_string()))
    }
}

impl VisionProvider for FixtureProvider {
    fn analyze_faces(&self, image_ref: &str) -> Result<FaceAnalysis> {
        Ok(FaceAnalysis { faces: self.get(image_ref)?.faces.clone() })
    }

    fn ocr_text(&self, image_ref: &str) -> Result<String> {
        Ok(self.get(image_ref)?.ocr_text.clone())
    }
}

// ---------------------------------------------------------------------------
// Remote provider

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn new(n: usize) -> Self {
        Limiter { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> LimiterGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|p| p.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|p| p.into_inner());
        }
        *free -= 1;
        LimiterGuard(self)
    }
}

struct LimiterGuard<'a>(&'a Limiter);

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|p| p.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Faces,
    Ocr,
}

impl Feature {
    fn flag(self) -> &'static str {
        match self {
            Feature::Faces => "faces",
            Feature::Ocr => "ocr",
        }
    }
}

/// HTTP client for a remote vision service.
///
/// Each call is `POST {endpoint}?features=<faces|ocr>` with the raw image
/// bytes as an `application/octet-stream` body and the reference in the
/// `X-Image-Ref` header. The reply must be a [`ProviderResponse`] JSON
/// document; out-of-range scores are rejected as protocol errors.
pub struct RemoteProvider<S> {
    endpoint: String,
    images: S,
    agent: ureq::Agent,
    limiter: Limiter,
}

impl<S: ImageSource> RemoteProvider<S> {
    pub fn new(endpoint: impl Into<String>, images: S, max_concurrent: usize) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .http_status_as_error(false)
            .build();
        RemoteProvider {
            endpoint: endpoint.into(),
            images,
            agent: config.into(),
            limiter: Limiter::new(max_concurrent),
        }
    }

    pub fn request(&self, image_ref: &str, feature: Feature) -> Result<ProviderResponse> {
        let bytes = self.images.bytes(image_ref)?;
        let dims = image::ImageReader::new(std::io::Cursor::new(&bytes))
            .with_guessed_format()
            .ok()
            .and_then(|r| r.into_dimensions().ok());
        let body = {
            let _permit = self.limiter.acquire();
            let mut resp = self
                .agent
                .post(&self.endpoint)
                .query("features", feature.flag())
                .header("X-Image-Ref", image_ref)
                .content_type("application/octet-stream")
                .send(&bytes[..])
                .map_err(|e| Error::Transport(e.to_string()))?;
            let status = resp.status();
            if status.as_u16() == 404 {
                return Err(Error::NotFound(image_ref.to_string()));
            }
            if !status.is_success() {
                return Err(Error::Transport(format!("HTTP {status}")));
            }
            resp.body_mut().read_to_string().map_err(|e| Error::Transport(e.to_string()))?
        };
        let parsed: ProviderResponse = serde_json::from_str(&body).map_err(|e| Error::Protocol(e.to_string()))?;
        parsed.validate(dims).map_err(Error::Protocol)?;
        Ok(parsed)
    }
}

impl<S: ImageSource> VisionProvider for RemoteProvider<S> {
    fn analyze_faces(&self, image_ref: &str) -> Result<FaceAnalysis> {
        Ok(FaceAnalysis { faces: self.request(image_ref, Feature::Faces)?.faces })
    }

    fn ocr_text(&self, image_ref: &str) -> Result<String> {
        Ok(self.request(image_ref, Feature::Ocr)?.ocr_text)
    }
}

// ---------------------------------------------------------------------------
// Emotion aggregation

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EmotionProfile {
    pub means: Emotions,
    pub positive: f64,
    pub negative: f64,
    pub face_found: bool,
    pub face_count: usize,
}

/// Per-emotion mean over every face of every analysis; each face counts
/// once regardless of how many faces share its image.
pub fn aggregate_emotions(analyses: &[FaceAnalysis]) -> EmotionProfile {
    let mut sums = [0.0f64; 6];
    let mut n = 0usize;
    for face in analyses.iter().flat_map(|a| &a.faces) {
        for (s, v) in sums.iter_mut().zip(face.emotions.values()) {
            *s += v;
        }
        n += 1;
    }
    if n == 0 {
        return EmotionProfile::default();
    }
    let means = Emotions::from_values(sums.map(|s| s / n as f64));
    EmotionProfile {
        means,
        positive: means.joy + means.surprise,
        negative: means.anger + means.disgust + means.fear + means.sadness,
        face_found: true,
        face_count: n,
    }
}
