//! File formats: Middlebury `.flo`, binary PGM, the `WEPD` patch container
//! and CSV helpers.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use warpcost_core::flow::{CostRecord, Stage};
use warpcost_core::patches::{PatchSet, Split};
use warpcost_core::{FlowField, Image};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Malformed(String),
    #[error(transparent)]
    Core(#[from] warpcost_core::Error),
}

pub type Result<T> = std::result::Result<T, FormatError>;

fn malformed(msg: impl Into<String>) -> FormatError {
    FormatError::Malformed(msg.into())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| FormatError::Io { path: path.display().to_string(), source })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| FormatError::Io { path: path.display().to_string(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)
}

pub const FLO_MAGIC: f32 = 202021.25;

pub fn encode_flo(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * flow.len());
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for (u, v) in flow.u().iter().zip(flow.v()) {
        out.extend_from_slice(&(*u as f32).to_le_bytes());
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

fn le_f32(b: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn le_i32(b: &[u8], at: usize) -> i32 {
    i32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

pub fn decode_flo(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < 12 {
        return Err(malformed(format!("flo: header truncated at offset {}", bytes.len())));
    }
    let magic = le_f32(bytes, 0);
    if magic != FLO_MAGIC {
        return Err(malformed(format!("flo: bad magic {magic} at offset 0")));
    }
    let (w, h) = (le_i32(bytes, 4), le_i32(bytes, 8));
    if w <= 0 || h <= 0 {
        return Err(malformed(format!("flo: invalid dimensions {w}x{h} at offset 4")));
    }
    let n = w as usize * h as usize;
    let need = 12 + 8 * n;
    if bytes.len() < need {
        return Err(malformed(format!("flo: payload truncated at offset {} (expected {need} bytes)", bytes.len())));
    }
    if bytes.len() > need {
        return Err(malformed(format!("flo: {} trailing bytes after offset {need}", bytes.len() - need)));
    }
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        for (k, dst) in [&mut u, &mut v].into_iter().enumerate() {
            let at = 12 + 8 * i + 4 * k;
            let x = le_f32(bytes, at);
            if !x.is_finite() {
                return Err(malformed(format!("flo: non-finite value at offset {at}")));
            }
            dst.push(x as f64);
        }
    }
    Ok(FlowField::new(w as usize, h as usize, u, v)?)
}

pub fn read_flo(path: &Path) -> Result<FlowField> {
    decode_flo(&read_file(path)?).map_err(|e| annotate(path, e))
}

pub fn write_flo(flow: &FlowField, path: &Path) -> Result<()> {
    write_file(path, &encode_flo(flow))
}

fn annotate(path: &Path, e: FormatError) -> FormatError {
    match e {
        FormatError::Malformed(m) => malformed(format!("{}: {m}", path.display())),
        other => other,
    }
}

/// Comment written into PGMs holding signed data.
pub const SIGNED_COMMENT: &str = "warpcost affine [-1,1]->[0,1]";

/// Binary PGM with round-half-up quantization of `[0, 1]` intensities
/// (values outside are clipped). `maxval` is 255 or 65535.
pub fn encode_pgm(image: &Image, maxval: u16, comment: Option<&str>) -> Result<Vec<u8>> {
    if maxval != 255 && maxval != 65535 {
        return Err(malformed(format!("pgm: unsupported maxval {maxval}")));
    }
    let mut out = Vec::new();
    out.extend_from_slice(b"P5\n");
    if let Some(c) = comment {
        out.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    out.extend_from_slice(format!("{} {}\n{}\n", image.width(), image.height(), maxval).as_bytes());
    let m = maxval as f64;
    for &v in image.as_slice() {
        let q = (v.clamp(0.0, 1.0) * m + 0.5).floor().min(m) as u16;
        if maxval == 255 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    Ok(out)
}

/// A decoded PGM: intensities in `[0, 1]` and the header comments.
pub struct Pgm {
    pub image: Image,
    pub comments: Vec<String>,
}

impl Pgm {
    pub fn is_signed(&self) -> bool {
        self.comments.iter().any(|c| c.trim() == SIGNED_COMMENT)
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Pgm> {
    let mut pos = 0;
    let mut comments = Vec::new();
    let mut fields = Vec::new();
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= bytes.len() {
            return Err(malformed("pgm: header truncated"));
        }
        if bytes[pos] == b'#' {
            let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
            comments.push(String::from_utf8_lossy(&bytes[pos + 1..end]).trim().to_string());
            pos = end;
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).to_string());
    }
    if fields[0] != "P5" {
        return Err(malformed(format!("pgm: expected magic P5, found {:?}", fields[0])));
    }
    let num = |s: &str, what: &str| s.parse::<usize>().map_err(|_| malformed(format!("pgm: bad {what} {s:?}")));
    let (w, h, maxval) = (num(&fields[1], "width")?, num(&fields[2], "height")?, num(&fields[3], "maxval")?);
    if maxval != 255 && maxval != 65535 {
        return Err(malformed(format!("pgm: unsupported maxval {maxval}")));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(malformed("pgm: header truncated"));
    }
    pos += 1;
    let bpp = if maxval == 255 { 1 } else { 2 };
    let payload = &bytes[pos..];
    if payload.len() != w * h * bpp {
        return Err(malformed(format!("pgm: payload has {} bytes, expected {}", payload.len(), w * h * bpp)));
    }
    let m = maxval as f64;
    let data = if bpp == 1 {
        payload.iter().map(|&b| b as f64 / m).collect()
    } else {
        payload.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / m).collect()
    };
    Ok(Pgm { image: Image::new(w, h, data)?, comments })
}

pub fn read_pgm(path: &Path) -> Result<Image> {
    Ok(read_pgm_full(path)?.image)
}

pub fn read_pgm_full(path: &Path) -> Result<Pgm> {
    decode_pgm(&read_file(path)?).map_err(|e| annotate(path, e))
}

pub fn write_pgm(image: &Image, path: &Path, maxval: u16) -> Result<()> {
    write_file(path, &encode_pgm(image, maxval, None)?)
}

/// Write a signed image (e.g. a warp error) through `[-1, 1] → [0, 1]`.
pub fn write_signed_pgm(image: &Image, path: &Path, maxval: u16) -> Result<()> {
    let mapped = image.map(|v| 0.5 * (v + 1.0));
    write_file(path, &encode_pgm(&mapped, maxval, Some(SIGNED_COMMENT))?)
}

/// Read a PGM, undoing the signed mapping when its comment is present.
pub fn read_pgm_auto(path: &Path) -> Result<Image> {
    let pgm = read_pgm_full(path)?;
    Ok(if pgm.is_signed() { pgm.image.map(|v| 2.0 * v - 1.0) } else { pgm.image })
}

pub const WEPD_MAGIC: &[u8; 4] = b"WEPD";
pub const WEPD_VERSION: u32 = 1;

pub fn encode_wepd(set: &PatchSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 4 * set.as_flat().len());
    out.extend_from_slice(WEPD_MAGIC);
    out.extend_from_slice(&WEPD_VERSION.to_le_bytes());
    out.extend_from_slice(&(set.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    for &v in set.as_flat() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_wepd(bytes: &[u8], split: Split) -> Result<PatchSet> {
    if bytes.len() < 20 {
        return Err(malformed(format!("wepd: header truncated ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != WEPD_MAGIC {
        return Err(malformed("wepd: bad magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != WEPD_VERSION {
        return Err(malformed(format!("wepd: unsupported version {version}")));
    }
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let payload = &bytes[20..];
    let stored = payload.len() / 4;
    if payload.len() % 4 != 0 || dim.checked_mul(count) != Some(stored) {
        let whole = if dim == 0 { 0 } else { stored / dim };
        return Err(malformed(format!("wepd: header declares {count} patches of dim {dim}, payload holds {whole}")));
    }
    let p = PatchSet::side_for_dim(dim)?;
    let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
    Ok(PatchSet::from_flat(p, split, data)?)
}

pub fn save_dataset(set: &PatchSet, path: &Path) -> Result<()> {
    write_file(path, &encode_wepd(set))
}

pub fn load_dataset(path: &Path, split: Split) -> Result<PatchSet> {
    decode_wepd(&read_file(path)?, split).map_err(|e| annotate(path, e))
}

pub const TRACE_HEADER: &str = "level,iter,stage,beta,split_cost,epll_cost";

/// Cost trace CSV; floats in shortest round-trip form.
pub fn trace_csv(trace: &[CostRecord]) -> String {
    let mut s = format!("{TRACE_HEADER}\n");
    for r in trace {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.level,
            r.iter,
            r.stage.as_str(),
            r.beta,
            r.split_cost,
            r.epll_cost
        ));
    }
    s
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<CostRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err(malformed("trace csv: unexpected header"));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let bad = || malformed(format!("trace csv: bad row {}: {line:?}", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad());
            }
            Ok(CostRecord {
                level: f[0].parse().map_err(|_| bad())?,
                iter: f[1].parse().map_err(|_| bad())?,
                stage: Stage::parse(f[2]).ok_or_else(bad)?,
                beta: f[3].parse().map_err(|_| bad())?,
                split_cost: f[4].parse().map_err(|_| bad())?,
                epll_cost: f[5].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}
