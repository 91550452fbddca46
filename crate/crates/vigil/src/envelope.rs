//! Self-describing flat-file artifact format.
//!
//! Layout: a 4-byte magic, a format version, a type tag, then type-specific
//! fields. Scalars are little endian; arrays are a u64 length followed by
//! row-major little-endian f64 values. Round trips are bit-exact.

use std::path::Path;

use vigil_core::arima::{ArModel, ArimaConfig};
use vigil_core::classifier::{ClassSet, DefectClassifier, Provenance};
use vigil_core::features::{AxisSet, FeatureEncoder};
use vigil_core::lstm::{LstmForecaster, LstmModel, WindowSpec};
use vigil_core::nn::{DenseNetwork, Loss, ModelArtifact, OutputActivation, TrainMeta};

use crate::error::{CliError, Result};
use crate::fsutil;

pub const MAGIC: &[u8; 4] = b"VGLA";
pub const FORMAT_VERSION: u32 = 1;

/// Any artifact the toolkit persists.
#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Dense(ModelArtifact),
    Lstm(LstmForecaster),
    Ar(ArModel),
    Encoder(FeatureEncoder),
    Classifier {
        classifier: DefectClassifier,
        meta: TrainMeta,
    },
}

impl Artifact {
    pub fn type_name(&self) -> &'static str {
        match self {
            Artifact::Dense(_) => "dense_network",
            Artifact::Lstm(_) => "lstm_forecaster",
            Artifact::Ar(_) => "ar_model",
            Artifact::Encoder(_) => "feature_encoder",
            Artifact::Classifier { .. } => "defect_classifier",
        }
    }

    fn type_tag(&self) -> u8 {
        match self {
            Artifact::Dense(_) => 1,
            Artifact::Lstm(_) => 2,
            Artifact::Ar(_) => 3,
            Artifact::Encoder(_) => 4,
            Artifact::Classifier { .. } => 5,
        }
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64s(&mut self, vs: &[f64]) {
        self.u64(vs.len() as u64);
        for &v in vs {
            self.f64(v);
        }
    }

    fn text(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(CliError::data("artifact file truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        if n > self.buf.len() / 8 + 1 {
            return Err(CliError::data("artifact array length is implausible"));
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }

    fn text(&mut self) -> Result<String> {
        let n = self.u64()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| CliError::data("artifact text is not UTF-8"))
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn put_meta(w: &mut Writer, meta: &TrainMeta) {
    w.u64(meta.seed);
    w.u32(meta.epochs);
    w.u64(meta.batch_size as u64);
    w.f64(meta.learning_rate);
    w.u8(match meta.loss {
        Loss::CrossEntropy => 0,
        Loss::Mse => 1,
    });
    w.f64(meta.final_loss);
}

fn get_meta(r: &mut Reader) -> Result<TrainMeta> {
    Ok(TrainMeta {
        seed: r.u64()?,
        epochs: r.u32()?,
        batch_size: r.u64()? as usize,
        learning_rate: r.f64()?,
        loss: match r.u8()? {
            0 => Loss::CrossEntropy,
            1 => Loss::Mse,
            t => return Err(CliError::data(format!("unknown loss tag {t}"))),
        },
        final_loss: r.f64()?,
    })
}

fn put_network(w: &mut Writer, net: &DenseNetwork) {
    w.u64(net.layer_sizes().len() as u64);
    for &s in net.layer_sizes() {
        w.u64(s as u64);
    }
    w.u8(match net.output_activation() {
        OutputActivation::Softmax => 0,
        OutputActivation::Identity => 1,
    });
    for k in 0..net.weights().len() {
        w.f64s(&net.weights()[k]);
        w.f64s(&net.biases()[k]);
    }
}

fn get_network(r: &mut Reader) -> Result<DenseNetwork> {
    let n_layers = r.u64()? as usize;
    if !(2..=1_000).contains(&n_layers) {
        return Err(CliError::data("implausible layer count"));
    }
    let mut sizes = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        sizes.push(r.u64()? as usize);
    }
    let act = match r.u8()? {
        0 => OutputActivation::Softmax,
        1 => OutputActivation::Identity,
        t => return Err(CliError::data(format!("unknown activation tag {t}"))),
    };
    let mut weights = Vec::with_capacity(n_layers - 1);
    let mut biases = Vec::with_capacity(n_layers - 1);
    for _ in 0..n_layers - 1 {
        weights.push(r.f64s()?);
        biases.push(r.f64s()?);
    }
    DenseNetwork::from_parts(sizes, weights, biases, act)
        .map_err(|e| CliError::data(format!("stored network invalid: {e}")))
}

fn put_encoder(w: &mut Writer, enc: &FeatureEncoder) {
    w.text(&enc.axes.encode());
    w.u64(enc.window.window_len as u64);
    w.u64(enc.window.stride as u64);
    w.u32(enc.version);
    w.f64s(enc.means());
    w.f64s(enc.stds());
}

fn get_encoder(r: &mut Reader) -> Result<FeatureEncoder> {
    let axes = AxisSet::parse(&r.text()?).map_err(|e| CliError::data(e.to_string()))?;
    let window = WindowSpec {
        window_len: r.u64()? as usize,
        stride: r.u64()? as usize,
    };
    let version = r.u32()?;
    let means = r.f64s()?;
    let stds = r.f64s()?;
    FeatureEncoder::from_parts(means, stds, axes, window, version)
        .map_err(|e| CliError::data(format!("stored encoder invalid: {e}")))
}

/// Encodes an artifact into the flat-file layout.
pub fn encode(artifact: &Artifact) -> Vec<u8> {
    let mut w = Writer::new();
    w.buf.extend_from_slice(MAGIC);
    w.u32(FORMAT_VERSION);
    w.u8(artifact.type_tag());
    match artifact {
        Artifact::Dense(model) => {
            put_meta(&mut w, &model.meta);
            put_network(&mut w, &model.network);
        }
        Artifact::Lstm(f) => {
            w.u64(f.model.input_dim() as u64);
            w.u64(f.model.hidden_dim() as u64);
            w.u64(f.window.window_len as u64);
            w.u64(f.window.stride as u64);
            w.f64(f.norm_mean);
            w.f64(f.norm_std);
            put_meta(&mut w, &f.meta);
            w.f64s(&f.model.params());
        }
        Artifact::Ar(model) => {
            w.u64(model.config.p as u64);
            w.u64(model.config.d as u64);
            w.u64(model.config.q as u64);
            w.u8(u8::from(model.config.include_intercept));
            w.f64(model.intercept);
            w.f64s(&model.coefficients);
            w.f64s(&model.training_tail);
        }
        Artifact::Encoder(enc) => {
            put_encoder(&mut w, enc);
        }
        Artifact::Classifier { classifier, meta } => {
            w.u8(match classifier.provenance {
                Provenance::TrainedFresh => 0,
                Provenance::Transferred => 1,
            });
            w.u8(match classifier.classes {
                ClassSet::ThreeWay => 0,
                ClassSet::Binary => 1,
            });
            put_meta(&mut w, meta);
            put_encoder(&mut w, &classifier.encoder);
            put_network(&mut w, &classifier.network);
        }
    }
    w.buf
}

/// Decodes a flat-file artifact, validating magic, version, and shapes.
pub fn decode(bytes: &[u8]) -> Result<Artifact> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err(CliError::data("not a vigil artifact (bad magic)"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(CliError::data(format!(
            "unsupported artifact format version {version}"
        )));
    }
    let artifact = match r.u8()? {
        1 => {
            let meta = get_meta(&mut r)?;
            let network = get_network(&mut r)?;
            Artifact::Dense(ModelArtifact { network, meta })
        }
        2 => {
            let input_dim = r.u64()? as usize;
            let hidden_dim = r.u64()? as usize;
            let window = WindowSpec {
                window_len: r.u64()? as usize,
                stride: r.u64()? as usize,
            };
            let norm_mean = r.f64()?;
            let norm_std = r.f64()?;
            let meta = get_meta(&mut r)?;
            let params = r.f64s()?;
            let model = LstmModel::from_params(input_dim, hidden_dim, &params)
                .map_err(|e| CliError::data(format!("stored model invalid: {e}")))?;
            Artifact::Lstm(LstmForecaster {
                model,
                window,
                norm_mean,
                norm_std,
                meta,
            })
        }
        3 => {
            let p = r.u64()? as usize;
            let d = r.u64()? as usize;
            let q = r.u64()? as usize;
            let include_intercept = r.u8()? != 0;
            let intercept = r.f64()?;
            let coefficients = r.f64s()?;
            let training_tail = r.f64s()?;
            if coefficients.len() != p {
                return Err(CliError::data("stored AR coefficient count mismatches p"));
            }
            Artifact::Ar(ArModel {
                config: ArimaConfig {
                    p,
                    d,
                    q,
                    include_intercept,
                },
                coefficients,
                intercept,
                training_tail,
            })
        }
        4 => Artifact::Encoder(get_encoder(&mut r)?),
        5 => {
            let provenance = match r.u8()? {
                0 => Provenance::TrainedFresh,
                1 => Provenance::Transferred,
                t => return Err(CliError::data(format!("unknown provenance tag {t}"))),
            };
            let classes = match r.u8()? {
                0 => ClassSet::ThreeWay,
                1 => ClassSet::Binary,
                t => return Err(CliError::data(format!("unknown class-set tag {t}"))),
            };
            let meta = get_meta(&mut r)?;
            let encoder = get_encoder(&mut r)?;
            let network = get_network(&mut r)?;
            let classifier = DefectClassifier {
                network,
                encoder,
                classes,
                provenance,
            };
            classifier
                .validate()
                .map_err(|e| CliError::data(format!("stored classifier invalid: {e}")))?;
            Artifact::Classifier { classifier, meta }
        }
        t => return Err(CliError::data(format!("unknown artifact type tag {t}"))),
    };
    if !r.done() {
        return Err(CliError::data("trailing bytes after artifact payload"));
    }
    Ok(artifact)
}

pub fn save(path: &Path, artifact: &Artifact) -> Result<()> {
    fsutil::write_atomic(path, &encode(artifact))
}

pub fn load(path: &Path) -> Result<Artifact> {
    decode(&fsutil::read(path)?)
}

/// Human-readable metadata block for `inspect`.
pub fn describe(artifact: &Artifact) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    line("type", artifact.type_name().into());
    line("format_version", FORMAT_VERSION.to_string());
    match artifact {
        Artifact::Dense(model) => {
            line("layer_sizes", format!("{:?}", model.network.layer_sizes()));
            line("output_activation", format!("{:?}", model.network.output_activation()));
            describe_meta(&mut line, &model.meta);
        }
        Artifact::Lstm(f) => {
            line("input_dim", f.model.input_dim().to_string());
            line("hidden_dim", f.model.hidden_dim().to_string());
            line("window_len", f.window.window_len.to_string());
            line("stride", f.window.stride.to_string());
            line("norm_mean", format!("{}", f.norm_mean));
            line("norm_std", format!("{}", f.norm_std));
            describe_meta(&mut line, &f.meta);
        }
        Artifact::Ar(model) => {
            line("p", model.config.p.to_string());
            line("d", model.config.d.to_string());
            line("q", model.config.q.to_string());
            line("include_intercept", model.config.include_intercept.to_string());
            line("intercept", format!("{}", model.intercept));
            line("coefficients", format!("{:?}", model.coefficients));
            line("training_tail_len", model.training_tail.len().to_string());
        }
        Artifact::Encoder(enc) => {
            line("dim", enc.dim().to_string());
            line("axes", enc.axes.encode());
            line("window_len", enc.window.window_len.to_string());
            line("encoder_version", enc.version.to_string());
        }
        Artifact::Classifier { classifier, meta } => {
            line("classes", classifier.classes.name().into());
            line("provenance", classifier.provenance.name().into());
            line("encoder_dim", classifier.encoder.dim().to_string());
            line("axes", classifier.encoder.axes.encode());
            line("layer_sizes", format!("{:?}", classifier.network.layer_sizes()));
            describe_meta(&mut line, meta);
        }
    }
    out
}

fn describe_meta(line: &mut impl FnMut(&str, String), meta: &TrainMeta) {
    line("seed", meta.seed.to_string());
    line("epochs", meta.epochs.to_string());
    line("batch_size", meta.batch_size.to_string());
    line("learning_rate", format!("{}", meta.learning_rate));
    line("loss", format!("{:?}", meta.loss));
    line("final_loss", format!("{}", meta.final_loss));
}
