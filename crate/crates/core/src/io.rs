//! Config parsing and the binary tensor / model containers.
//!
//! Both containers are little-endian. A tensor file is
//!
//! ```text
//! "CDT1" | order: u8 | dims: order x u64 | meta_len: u32 | meta: JSON | payload: f64...
//! ```
//!
//! and a model file is `"CDR1" | version: u32 | species: u8` followed by one
//! block per species (see [`save_rom`]). Loaders check every length against
//! the bytes actually present and against a memory cap before allocating.

use std::borrow::Cow;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discretize::Grid;
use crate::error::{Error, Result};
use crate::fom::{run_fom, Diffusion, SimulationConfig, SnapshotPair, StudyParameter};
use crate::hosvd::TruncationCriterion;
use crate::models::{ModelKind, ReactionModel};
use crate::rom::{KernelForm, RomModel, SnapshotSource, SpeciesRom};
use crate::tensor::{DenseTensor, Matrix};

// ---------------------------------------------------------------- config

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    grid: RawGrid,
    time: RawTime,
    diffusion: Diffusion,
    reaction: RawReaction,
    study: RawStudy,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    extents: Vec<f64>,
    counts: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    dt: f64,
    t_final: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReaction {
    kind: ModelKind,
    alpha: f64,
    beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStudy {
    parameter: StudyParameter,
    seed: u64,
}

const SCHNAKENBERG2D: &str = include_str!("../configs/schnakenberg2d.toml");
const BRUSSELATOR3D: &str = include_str!("../configs/brusselator3d.toml");

/// Names of the configs compiled into the crate.
pub const BUNDLED_CONFIGS: [&str; 2] = ["schnakenberg2d", "brusselator3d"];

/// TOML source of a bundled config.
pub fn bundled_config(name: &str) -> Option<&'static str> {
    match name {
        "schnakenberg2d" => Some(SCHNAKENBERG2D),
        "brusselator3d" => Some(BRUSSELATOR3D),
        _ => None,
    }
}

/// Parses and validates a TOML config.
pub fn parse_config_str(src: &str) -> Result<SimulationConfig> {
    let de = toml::Deserializer::parse(src)
        .map_err(|e| Error::config("<document>", e.message().to_string()))?;
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let msg = e.inner().message().to_string();
        // name the missing key itself rather than its parent table
        let field = msg
            .strip_prefix("missing field `")
            .and_then(|m| m.split('`').next());
        let key = match field {
            Some(field) if path == "." => field.to_string(),
            Some(field) => format!("{path}.{field}"),
            None => path,
        };
        Error::config(key, msg)
    })?;

    let grid = Grid::new(raw.grid.extents, raw.grid.counts)
        .map_err(|e| Error::config("grid", e.to_string()))?;
    let reaction = match raw.reaction.kind {
        ModelKind::Schnakenberg => ReactionModel {
            kind: ModelKind::Schnakenberg,
            alpha: raw.reaction.alpha,
            beta: raw.reaction.beta,
            gamma: raw.reaction.gamma.unwrap_or(1.0),
        },
        ModelKind::Brusselator => {
            if raw.reaction.gamma.is_some_and(|g| g != 1.0) {
                return Err(Error::config(
                    "reaction.gamma",
                    "the Brusselator model has no gamma; omit it or set it to 1",
                ));
            }
            ReactionModel::brusselator(raw.reaction.alpha, raw.reaction.beta)
        }
    };
    let cfg = SimulationConfig {
        grid,
        reaction,
        diffusion: raw.diffusion,
        dt: raw.time.dt,
        t_final: raw.time.t_final,
        study_parameter: raw.study.parameter,
        seed: raw.study.seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a config file. A name from [`BUNDLED_CONFIGS`] that is not an
/// existing path resolves to the bundled config.
pub fn parse_config(path: impl AsRef<Path>) -> Result<SimulationConfig> {
    let path = path.as_ref();
    if !path.exists() {
        if let Some(src) = path.to_str().and_then(bundled_config) {
            return parse_config_str(src);
        }
    }
    let src = fs::read_to_string(path)?;
    parse_config_str(&src)
}

/// TOML form of a config, readable by [`parse_config_str`].
pub fn config_to_toml(cfg: &SimulationConfig) -> String {
    let raw = RawConfig {
        grid: RawGrid {
            extents: cfg.grid.extents().to_vec(),
            counts: cfg.grid.counts().to_vec(),
        },
        time: RawTime {
            dt: cfg.dt,
            t_final: cfg.t_final,
        },
        diffusion: cfg.diffusion,
        reaction: RawReaction {
            kind: cfg.reaction.kind,
            alpha: cfg.reaction.alpha,
            beta: cfg.reaction.beta,
            gamma: (cfg.reaction.kind == ModelKind::Schnakenberg).then_some(cfg.reaction.gamma),
        },
        study: RawStudy {
            parameter: cfg.study_parameter,
            seed: cfg.seed,
        },
    };
    toml::to_string(&raw).expect("config serializes to TOML")
}

// ------------------------------------------------------------ binary I/O

const TENSOR_MAGIC: &[u8; 4] = b"CDT1";
const ROM_MAGIC: &[u8; 4] = b"CDR1";
const ROM_VERSION: u32 = 1;
const MAX_ORDER: usize = 16;
const MAX_META_BYTES: u64 = 1 << 20;

/// Default allocation cap for loaders (8 GiB).
pub const DEFAULT_MEM_CAP_BYTES: u64 = 8 << 30;

/// Allocation cap, overridable through `XDIFF_MEM_CAP_BYTES`.
pub fn mem_cap_bytes() -> u64 {
    std::env::var("XDIFF_MEM_CAP_BYTES")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_MEM_CAP_BYTES)
}

/// Byte source that knows its offset and how many bytes remain.
struct Cursor<R> {
    inner: R,
    offset: u64,
    remaining: u64,
    cap: u64,
}

impl<R: Read> Cursor<R> {
    fn new(inner: R, len: u64) -> Self {
        Self {
            inner,
            offset: 0,
            remaining: len,
            cap: mem_cap_bytes(),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::format(self.offset, msg)
    }

    fn need(&self, n: u64, what: &str) -> Result<()> {
        if n > self.remaining {
            return Err(self.err(format!(
                "truncated file: {what} needs {n} bytes, {} remain",
                self.remaining
            )));
        }
        Ok(())
    }

    fn bytes(&mut self, n: usize, what: &str) -> Result<Vec<u8>> {
        self.need(n as u64, what)?;
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf).map_err(|e| self.err(format!("{what}: {e}")))?;
        self.offset += n as u64;
        self.remaining -= n as u64;
        Ok(buf)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        self.need(N as u64, what)?;
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| self.err(format!("{what}: {e}")))?;
        self.offset += N as u64;
        self.remaining -= N as u64;
        Ok(buf)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.array::<1>(what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array(what)?))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array(what)?))
    }

    /// Validates `count` against the cap and remaining length, then reads.
    fn f64s(&mut self, count: u64, what: &str) -> Result<Vec<f64>> {
        let bytes = count
            .checked_mul(8)
            .ok_or_else(|| self.err(format!("{what}: element count {count} overflows")))?;
        if bytes > self.cap {
            return Err(self.err(format!(
                "{what}: {bytes} bytes exceed the memory cap of {} bytes",
                self.cap
            )));
        }
        self.need(bytes, what)?;
        let n = count as usize;
        let mut out = Vec::with_capacity(n);
        let mut chunk = vec![0u8; 8 * n.min(1 << 16)];
        let mut left = n;
        while left > 0 {
            let k = left.min(1 << 16);
            let buf = &mut chunk[..8 * k];
            self.inner.read_exact(buf).map_err(|e| self.err(format!("{what}: {e}")))?;
            out.extend(buf.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())));
            self.offset += 8 * k as u64;
            self.remaining -= 8 * k as u64;
            left -= k;
        }
        Ok(out)
    }

    /// Reads `order` u64 dims and returns them with their element count.
    fn dims(&mut self, order: usize, what: &str) -> Result<(Vec<usize>, u64)> {
        let mut dims = Vec::with_capacity(order);
        let mut count: u64 = 1;
        for _ in 0..order {
            let d = self.u64(what)?;
            if d == 0 {
                return Err(self.err(format!("{what}: zero-length dimension")));
            }
            count = count
                .checked_mul(d)
                .ok_or_else(|| self.err(format!("{what}: dimension product overflows")))?;
            dims.push(usize::try_from(d).map_err(|_| self.err(format!("{what}: dimension too large")))?);
        }
        Ok((dims, count))
    }

    fn finish(&self) -> Result<()> {
        if self.remaining != 0 {
            return Err(self.err(format!("{} trailing bytes", self.remaining)));
        }
        Ok(())
    }
}

fn write_f64s(w: &mut impl Write, xs: &[f64]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(8 * xs.len().min(1 << 16));
    for chunk in xs.chunks(1 << 16) {
        buf.clear();
        for x in chunk {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

/// Writes to `path.tmp` then renames, so readers never see half a file.
fn write_atomically(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        f(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn open(path: &Path) -> Result<(BufReader<File>, u64)> {
    let file = File::open(path)?;
    let len = file.metadata()?.len();
    Ok((BufReader::new(file), len))
}

// ---------------------------------------------------------- tensor files

/// JSON metadata stored with a tensor.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TensorMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub species: Option<String>,
    /// Spacing of the last (time) mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

pub fn write_tensor(w: &mut impl Write, t: &DenseTensor, meta: &TensorMeta) -> Result<()> {
    if t.order() > MAX_ORDER {
        return Err(Error::invalid(format!("order {} exceeds {MAX_ORDER}", t.order())));
    }
    let json = serde_json::to_vec(meta).expect("metadata serializes");
    w.write_all(TENSOR_MAGIC)?;
    w.write_all(&[t.order() as u8])?;
    for &d in t.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    write_f64s(w, t.data())?;
    Ok(())
}

/// Reads a tensor from a stream holding exactly `len` bytes.
pub fn read_tensor(r: impl Read, len: u64) -> Result<(DenseTensor, TensorMeta)> {
    let mut c = Cursor::new(r, len);
    let magic: [u8; 4] = c.array("magic")?;
    if &magic != TENSOR_MAGIC {
        return Err(Error::format(0, format!("bad magic {magic:?}, expected \"CDT1\"")));
    }
    let order = c.u8("order")? as usize;
    if order == 0 || order > MAX_ORDER {
        return Err(c.err(format!("order {order} outside 1..={MAX_ORDER}")));
    }
    let (dims, count) = c.dims(order, "dims")?;
    let meta_len = c.u32("metadata length")? as u64;
    if meta_len > MAX_META_BYTES {
        return Err(c.err(format!("metadata length {meta_len} is implausible")));
    }
    let payload = count
        .checked_mul(8)
        .ok_or_else(|| c.err("payload size overflows"))?;
    if payload > c.cap {
        return Err(c.err(format!(
            "payload of {payload} bytes exceeds the memory cap of {} bytes",
            c.cap
        )));
    }
    let expected = meta_len + payload;
    if c.remaining != expected {
        return Err(c.err(format!(
            "file holds {} bytes after the header, dims and metadata need {expected}",
            c.remaining
        )));
    }
    let meta_off = c.offset;
    let json = c.bytes(meta_len as usize, "metadata")?;
    let meta: TensorMeta = serde_json::from_slice(&json)
        .map_err(|e| Error::format(meta_off, format!("metadata: {e}")))?;
    let data = c.f64s(count, "payload")?;
    c.finish()?;
    let t = DenseTensor::new(dims, data).map_err(|e| c.err(e.to_string()))?;
    Ok((t, meta))
}

pub fn save_tensor(path: impl AsRef<Path>, t: &DenseTensor, meta: &TensorMeta) -> Result<()> {
    write_atomically(path.as_ref(), |w| {
        write_tensor(w, t, meta).map_err(|e| match e {
            Error::Io(io) => io,
            other => std::io::Error::other(other.to_string()),
        })
    })
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<(DenseTensor, TensorMeta)> {
    let (r, len) = open(path.as_ref())?;
    read_tensor(r, len)
}

fn species_meta(snap: &SnapshotPair, species: &str) -> TensorMeta {
    let dt = if snap.times.len() > 1 {
        Some(snap.times[1] - snap.times[0])
    } else {
        None
    };
    TensorMeta {
        theta: Some(snap.theta),
        config_digest: Some(snap.config_digest.clone()),
        species: Some(species.to_string()),
        dt,
    }
}

/// Saves both species of a run as two tensor files.
pub fn save_snapshots(snap: &SnapshotPair, path_u: impl AsRef<Path>, path_v: impl AsRef<Path>) -> Result<()> {
    save_tensor(path_u, &snap.u, &species_meta(snap, "u"))?;
    save_tensor(path_v, &snap.v, &species_meta(snap, "v"))
}

/// Loads a pair written by [`save_snapshots`]; `fom_seconds` is zero.
pub fn load_snapshots(path_u: impl AsRef<Path>, path_v: impl AsRef<Path>) -> Result<SnapshotPair> {
    let (u, mu) = load_tensor(path_u)?;
    let (v, mv) = load_tensor(path_v)?;
    if u.dims() != v.dims() {
        return Err(Error::invalid(format!(
            "u dims {:?} differ from v dims {:?}",
            u.dims(),
            v.dims()
        )));
    }
    if mu.theta != mv.theta || mu.config_digest != mv.config_digest {
        return Err(Error::invalid("u and v files come from different runs"));
    }
    let nt = *u.dims().last().expect("order >= 1");
    let dt = mu.dt.unwrap_or(0.0);
    Ok(SnapshotPair {
        times: (0..nt).map(|k| k as f64 * dt).collect(),
        theta: mu.theta.unwrap_or(f64::NAN),
        config_digest: mu.config_digest.unwrap_or_default(),
        fom_seconds: 0.0,
        u,
        v,
    })
}

// ----------------------------------------------------------- model files

fn criterion_tag(c: TruncationCriterion) -> u8 {
    match c {
        TruncationCriterion::SingularValueSum => 0,
        TruncationCriterion::Energy => 1,
    }
}

fn kernel_tag(k: KernelForm) -> u8 {
    match k {
        KernelForm::DivideByWidth => 0,
        KernelForm::MultiplyByWidth => 1,
    }
}

fn write_species(w: &mut impl Write, tag: u8, s: &SpeciesRom, m: &RomModel) -> std::io::Result<()> {
    w.write_all(&[tag, s.global_factors.len() as u8])?;
    for f in &s.global_factors {
        w.write_all(&(f.nrows() as u64).to_le_bytes())?;
        w.write_all(&(f.ncols() as u64).to_le_bytes())?;
        for j in 0..f.ncols() {
            let col: Vec<f64> = f.col(j).iter().copied().collect();
            write_f64s(w, &col)?;
        }
    }
    w.write_all(&[s.gamma.order() as u8])?;
    for &d in s.gamma.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    write_f64s(w, s.gamma.data())?;
    w.write_all(&(m.thetas.len() as u32).to_le_bytes())?;
    write_f64s(w, &m.thetas)?;
    write_f64s(w, &[m.rho, m.tau1, m.tau2])?;
    w.write_all(&[criterion_tag(m.criterion), kernel_tag(m.kernel)])?;
    w.write_all(&(m.config_digest.len() as u32).to_le_bytes())?;
    w.write_all(m.config_digest.as_bytes())?;
    Ok(())
}

/// Serializes a model. Each species block is
///
/// ```text
/// tag: u8 ('u' | 'v') | modes: u8
/// per mode: rows: u64 | cols: u64 | column-major f64 payload
/// gamma: order: u8 | dims: u64... | f64 payload
/// n_p: u32 | thetas: f64... | rho, tau1, tau2: f64
/// criterion: u8 | kernel: u8 | digest_len: u32 | digest: UTF-8
/// ```
pub fn write_rom(w: &mut impl Write, m: &RomModel) -> Result<()> {
    w.write_all(ROM_MAGIC)?;
    w.write_all(&ROM_VERSION.to_le_bytes())?;
    w.write_all(&[2u8])?;
    write_species(w, b'u', &m.u, m)?;
    write_species(w, b'v', &m.v, m)?;
    Ok(())
}

struct SpeciesBlock {
    rom: SpeciesRom,
    thetas: Vec<f64>,
    rho: f64,
    tau1: f64,
    tau2: f64,
    criterion: TruncationCriterion,
    kernel: KernelForm,
    digest: String,
}

fn read_species<R: Read>(c: &mut Cursor<R>, want_tag: u8) -> Result<SpeciesBlock> {
    let tag = c.u8("species tag")?;
    if tag != want_tag {
        return Err(c.err(format!(
            "species tag {:?}, expected {:?}",
            tag as char, want_tag as char
        )));
    }
    let modes = c.u8("mode count")? as usize;
    if modes == 0 || modes > MAX_ORDER {
        return Err(c.err(format!("mode count {modes} outside 1..={MAX_ORDER}")));
    }
    let mut factors = Vec::with_capacity(modes);
    for j in 0..modes {
        let (shape, count) = c.dims(2, "factor shape")?;
        let data = c.f64s(count, &format!("factor {j}"))?;
        factors.push(Matrix::from_fn(shape[0], shape[1], |i, k| data[i + shape[0] * k]));
    }
    let order = c.u8("gamma order")? as usize;
    if order != modes + 1 {
        return Err(c.err(format!("gamma order {order}, expected {}", modes + 1)));
    }
    let (dims, count) = c.dims(order, "gamma dims")?;
    let data = c.f64s(count, "gamma")?;
    let gamma = DenseTensor::new(dims, data).map_err(|e| c.err(e.to_string()))?;
    let np = c.u32("theta count")? as u64;
    let thetas = c.f64s(np, "thetas")?;
    let rho = c.f64("rho")?;
    let tau1 = c.f64("tau1")?;
    let tau2 = c.f64("tau2")?;
    let criterion = match c.u8("criterion")? {
        0 => TruncationCriterion::SingularValueSum,
        1 => TruncationCriterion::Energy,
        k => return Err(c.err(format!("unknown criterion tag {k}"))),
    };
    let kernel = match c.u8("kernel")? {
        0 => KernelForm::DivideByWidth,
        1 => KernelForm::MultiplyByWidth,
        k => return Err(c.err(format!("unknown kernel tag {k}"))),
    };
    let dlen = c.u32("digest length")? as usize;
    if dlen as u64 > MAX_META_BYTES {
        return Err(c.err(format!("digest length {dlen} is implausible")));
    }
    let off = c.offset;
    let digest = String::from_utf8(c.bytes(dlen, "digest")?)
        .map_err(|_| Error::format(off, "digest is not UTF-8"))?;
    Ok(SpeciesBlock {
        rom: SpeciesRom {
            global_factors: factors,
            gamma,
        },
        thetas,
        rho,
        tau1,
        tau2,
        criterion,
        kernel,
        digest,
    })
}

/// Reads a model from a stream holding exactly `len` bytes.
pub fn read_rom(r: impl Read, len: u64) -> Result<RomModel> {
    let mut c = Cursor::new(r, len);
    let magic: [u8; 4] = c.array("magic")?;
    if &magic != ROM_MAGIC {
        return Err(Error::format(0, format!("bad magic {magic:?}, expected \"CDR1\"")));
    }
    let version = c.u32("version")?;
    if version != ROM_VERSION {
        return Err(c.err(format!("unsupported model version {version}")));
    }
    let species = c.u8("species count")?;
    if species != 2 {
        return Err(c.err(format!("species count {species}, expected 2")));
    }
    let u = read_species(&mut c, b'u')?;
    let v = read_species(&mut c, b'v')?;
    c.finish()?;
    let same = u.thetas == v.thetas
        && u.rho.to_bits() == v.rho.to_bits()
        && u.tau1.to_bits() == v.tau1.to_bits()
        && u.tau2.to_bits() == v.tau2.to_bits()
        && u.criterion == v.criterion
        && u.kernel == v.kernel
        && u.digest == v.digest;
    if !same {
        return Err(c.err("species blocks disagree on shared model fields"));
    }
    let model = RomModel {
        u: u.rom,
        v: v.rom,
        thetas: u.thetas,
        rho: u.rho,
        tau1: u.tau1,
        tau2: u.tau2,
        criterion: u.criterion,
        kernel: u.kernel,
        config_digest: u.digest,
    };
    model
        .validate()
        .map_err(|e| Error::format(c.offset, format!("invalid model: {e}")))?;
    Ok(model)
}

pub fn save_rom(path: impl AsRef<Path>, m: &RomModel) -> Result<()> {
    write_atomically(path.as_ref(), |w| {
        write_rom(w, m).map_err(|e| match e {
            Error::Io(io) => io,
            other => std::io::Error::other(other.to_string()),
        })
    })
}

/// Loads a model; with `config` given, its digest must match the one the
/// model was built from.
pub fn load_rom(path: impl AsRef<Path>, config: Option<&SimulationConfig>) -> Result<RomModel> {
    let (r, len) = open(path.as_ref())?;
    let model = read_rom(r, len)?;
    if let Some(cfg) = config {
        let want = cfg.digest();
        if model.config_digest != want {
            return Err(Error::config(
                "config",
                format!(
                    "model was built from config {}, this config is {want}",
                    model.config_digest
                ),
            ));
        }
    }
    Ok(model)
}

// ------------------------------------------------------ snapshot storage

/// Training snapshots cached as tensor files in a directory. Missing or
/// stale files are produced by running the full-order model.
pub struct DirectorySource {
    cfg: SimulationConfig,
    thetas: Vec<f64>,
    dir: PathBuf,
    digest: String,
}

impl DirectorySource {
    pub fn new(cfg: SimulationConfig, thetas: Vec<f64>, dir: impl Into<PathBuf>) -> Result<Self> {
        cfg.validate()?;
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let digest = cfg.digest();
        Ok(Self {
            cfg,
            thetas,
            dir,
            digest,
        })
    }

    pub fn paths(&self, theta: f64) -> (PathBuf, PathBuf) {
        (
            self.dir.join(format!("u_theta_{theta}.cdt")),
            self.dir.join(format!("v_theta_{theta}.cdt")),
        )
    }

    fn cached(&self, theta: f64) -> Option<SnapshotPair> {
        let (pu, pv) = self.paths(theta);
        let snap = load_snapshots(pu, pv).ok()?;
        let mut dims = self.cfg.grid.counts().to_vec();
        dims.push(self.cfg.num_steps() + 1);
        (snap.theta == theta && snap.config_digest == self.digest && snap.u.dims() == dims.as_slice())
            .then_some(snap)
    }
}

impl SnapshotSource for DirectorySource {
    fn thetas(&self) -> Vec<f64> {
        self.thetas.clone()
    }

    fn load(&mut self, index: usize) -> Result<Cow<'_, SnapshotPair>> {
        let theta = self.thetas[index];
        if let Some(s) = self.cached(theta) {
            return Ok(Cow::Owned(s));
        }
        let snap = run_fom(&self.cfg, theta)?;
        let (pu, pv) = self.paths(theta);
        save_snapshots(&snap, pu, pv)?;
        Ok(Cow::Owned(snap))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_configs_parse() {
        let s = parse_config_str(SCHNAKENBERG2D).unwrap();
        assert_eq!(s.grid.counts(), &[101, 101]);
        assert_eq!(s.grid.extents(), &[0.5, 0.5]);
        assert_eq!((s.dt, s.t_final), (0.001, 5.0));
        assert_eq!(s.study_parameter, StudyParameter::DUV);
        assert_eq!(s.reaction.kind, ModelKind::Schnakenberg);
        assert_eq!((s.reaction.alpha, s.reaction.beta, s.reaction.gamma), (0.25, 0.3, 200.0));
        let d = s.diffusion;
        assert_eq!((d.d_u, d.d_v, d.d_vu), (1.0, 1.0, 1.0));

        let b = parse_config_str(BRUSSELATOR3D).unwrap();
        assert_eq!(b.grid.counts(), &[31, 31, 31]);
        assert_eq!(b.grid.extents(), &[20.0, 20.0, 20.0]);
        assert_eq!((b.dt, b.t_final), (0.01, 10.0));
        assert_eq!(b.study_parameter, StudyParameter::DVU);
        let d = b.diffusion;
        assert_eq!((d.d_u, d.d_v, d.d_uv), (0.4, 2.0, 0.02));
        assert_eq!((b.reaction.alpha, b.reaction.beta), (6.0, 1.0));
    }

    #[test]
    fn toml_round_trip() {
        for src in [SCHNAKENBERG2D, BRUSSELATOR3D] {
            let c = parse_config_str(src).unwrap();
            assert_eq!(parse_config_str(&config_to_toml(&c)).unwrap(), c);
        }
    }

    fn expect_key(src: &str, key: &str) {
        match parse_config_str(src) {
            Err(Error::Config { key: k, message }) => assert_eq!(k, key, "{message}"),
            other => panic!("expected config error at {key}, got {other:?}"),
        }
    }

    #[test]
    fn config_errors_name_the_key() {
        expect_key(&SCHNAKENBERG2D.replace("d_uv = 0.65", "d_xy = 0.65"), "diffusion.d_xy");
        expect_key(&SCHNAKENBERG2D.replace("d_u = 1.0\n", ""), "diffusion.d_u");
        expect_key(&SCHNAKENBERG2D.replace("dt = 0.001", "dt = \"fast\""), "time.dt");
        expect_key(&SCHNAKENBERG2D.replace("dt = 0.001", "dt = 0.0003"), "time.t_final");
        expect_key(&SCHNAKENBERG2D.replace("d_u = 1.0", "d_u = -1.0"), "diffusion.d_u");
        expect_key(&BRUSSELATOR3D.replace("beta = 1.0", "beta = 1.0\ngamma = 2.0"), "reaction.gamma");
        expect_key("[grid", "<document>");
    }

    #[test]
    fn tensor_round_trip_in_memory() {
        let t = DenseTensor::from_fn(&[3, 4, 5], |i| (i[0] as f64).sin() - i[1] as f64 * 1e-300 + i[2] as f64).unwrap();
        let meta = TensorMeta {
            theta: Some(0.65),
            config_digest: Some("abc".into()),
            species: Some("u".into()),
            dt: Some(0.001),
        };
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t, &meta).unwrap();
        let (back, m) = read_tensor(buf.as_slice(), buf.len() as u64).unwrap();
        assert_eq!(m, meta);
        assert!(back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits()));

        let mut bad = buf.clone();
        bad[0] = b'X';
        let err = read_tensor(bad.as_slice(), bad.len() as u64).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 0, ref message } if message.contains("bad magic")));

        let short = &buf[..buf.len() - 1];
        assert!(matches!(read_tensor(short, short.len() as u64), Err(Error::Format { .. })));
    }

    #[test]
    fn huge_dims_rejected_before_allocation() {
        let mut buf = Vec::new();
        buf.extend_from_slice(b"CDT1");
        buf.push(3);
        for d in [1u64 << 40, 1 << 40, 1 << 40] {
            buf.extend_from_slice(&d.to_le_bytes());
        }
        let err = read_tensor(buf.as_slice(), 1 << 62).unwrap_err();
        assert!(matches!(err, Error::Format { ref message, .. } if message.contains("overflow")), "{err}");

        let mut buf = Vec::new();
        buf.extend_from_slice(b"CDT1");
        buf.push(1);
        buf.extend_from_slice(&(1u64 << 40).to_le_bytes());
        buf.extend_from_slice(&0u32.to_le_bytes());
        let err = read_tensor(buf.as_slice(), 1 << 62).unwrap_err();
        assert!(matches!(err, Error::Format { ref message, .. } if message.contains("memory cap")), "{err}");
    }
}
