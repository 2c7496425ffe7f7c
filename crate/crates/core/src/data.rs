//! Synthetic sequence generators, probability-histogram embedding, windowed
//! covariance construction, and the MSQ1 on-disk dataset format.
//!
//! Generators are pure functions of their seed: the same seed produces a
//! bit-identical dataset. Save/load round-trips are bit-exact, and every
//! loaded point re-passes its manifold invariants before it leaves this
//! module.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{assemble_sym_fn, sym_eig, Mat};
use crate::manifold::{sample, ManifoldKind, Point, SpdPoint, SpherePoint};
use crate::net::ManifoldSequence;

/// Tolerance on the total probability of an orientation histogram.
pub const ODF_SUM_TOL: f64 = 1e-9;

/// Eigenvalue floor used when projecting noisy matrices back to spd.
pub const NOISE_PROJECTION_FLOOR: f64 = 1e-6;

/// Group sequences draw their lengths from this inclusive range.
pub const GROUP_LEN_MIN: usize = 11;
pub const GROUP_LEN_MAX: usize = 73;

const MAGIC: [u8; 4] = *b"MSQ1";
const VERSION: u16 = 1;

/// Discrete orientation distribution: nonnegative bin probabilities that
/// sum to one within `ODF_SUM_TOL`.
#[derive(Clone, Debug, PartialEq)]
pub struct OdfVector {
    values: Vec<f64>,
}

impl OdfVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("histogram needs at least one bin"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("histogram entries must be finite"));
        }
        if let Some(v) = values.iter().find(|v| **v < 0.0) {
            return Err(Error::domain(format!("histogram entry {v} is negative")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > ODF_SUM_TOL {
            return Err(Error::domain(format!(
                "histogram sums to {sum}, more than {ODF_SUM_TOL} away from 1"
            )));
        }
        Ok(OdfVector { values })
    }

    /// Uniform histogram over `m` bins.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain("histogram needs at least one bin"));
        }
        OdfVector::new(vec![1.0 / m as f64; m])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Square-root embedding of a probability histogram onto the unit sphere.
///
/// Entry i of the output is sqrt(x_i), all nonnegative, so the squared norm
/// equals the histogram total. One final normalization absorbs the
/// `ODF_SUM_TOL` slack in that total (a relative adjustment of at most
/// about 5e-10), keeping the result inside the strict unit-norm tolerance
/// of `SpherePoint`. Two histograms map to points at distance zero exactly
/// when they are equal.
pub fn odf_to_sphere(x: &OdfVector) -> Result<SpherePoint> {
    SpherePoint::project(x.values.iter().map(|v| v.sqrt()).collect())
}

/// Homogeneous collection of sequences with optional class labels.
///
/// All entries share one manifold kind, point dimension and channel count;
/// lengths may differ per sequence. A missing label marks unlabeled data
/// and is stored as -1 on disk.
#[derive(Clone, Debug)]
pub struct SequenceDataset {
    kind: ManifoldKind,
    dim: usize,
    channels: usize,
    entries: Vec<(ManifoldSequence, Option<u32>)>,
}

impl SequenceDataset {
    pub fn empty(kind: ManifoldKind, dim: usize, channels: usize) -> Result<Self> {
        if dim == 0 || channels == 0 {
            return Err(Error::domain("dataset needs dim >= 1 and channels >= 1"));
        }
        Ok(SequenceDataset { kind, dim, channels, entries: Vec::new() })
    }

    /// Appends a sequence, enforcing metadata homogeneity.
    pub fn push(&mut self, seq: ManifoldSequence, label: Option<u32>) -> Result<()> {
        if seq.kind() != self.kind || seq.dim() != self.dim || seq.channels() != self.channels {
            return Err(Error::domain(format!(
                "sequence metadata ({:?}, dim {}, channels {}) does not match the \
                 dataset ({:?}, dim {}, channels {})",
                seq.kind(),
                seq.dim(),
                seq.channels(),
                self.kind,
                self.dim,
                self.channels
            )));
        }
        if let Some(l) = label {
            if l > i32::MAX as u32 {
                return Err(Error::domain(format!("label {l} does not fit the on-disk format")));
            }
        }
        self.entries.push((seq, label));
        Ok(())
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(ManifoldSequence, Option<u32>)] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> (&ManifoldSequence, Option<u32>) {
        let (seq, label) = &self.entries[i];
        (seq, *label)
    }

    /// Clones out (sequence, class) pairs for classifier training.
    /// Fails if any entry is unlabeled.
    pub fn labeled(&self) -> Result<Vec<(ManifoldSequence, usize)>> {
        self.entries
            .iter()
            .map(|(seq, label)| match label {
                Some(l) => Ok((seq.clone(), *l as usize)),
                None => Err(Error::domain("dataset contains unlabeled sequences")),
            })
            .collect()
    }

    /// Clones out the raw sequences, dropping labels.
    pub fn sequences(&self) -> Vec<ManifoldSequence> {
        self.entries.iter().map(|(seq, _)| seq.clone()).collect()
    }
}

/// Clamps eigenvalues from below and reassembles a symmetric matrix so the
/// result passes the spd checks.
fn floor_spd(a: &Mat, floor: f64) -> Result<SpdPoint> {
    let e = sym_eig(a)?;
    let clamped: Vec<f64> = e.values.iter().map(|&l| l.max(floor)).collect();
    SpdPoint::new(assemble_sym_fn(&e, &clamped).sym_part())
}

/// Labeled classes of rotating spd sequences, one class per angle.
///
/// A sample starts from a random orientation of the fixed spectrum
/// {1, 2, ..., dim} (conjugation by a random orthogonal matrix Q) and each
/// timestep conjugates the state by the class plane rotation expressed in
/// that sample's own frame: X_{t+1} = (QRQ^T) X_t (QRQ^T)^T. Every sample
/// of a class therefore traces the same trajectory up to the global
/// isometry Q, so the class signal is exactly the rotation speed and the
/// per-sample spread comes from the observation noise alone. The fixed,
/// well-separated spectrum keeps every base visibly anisotropic; rotating
/// a near-isotropic matrix would erase the class signal.
///
/// With `noise_sigma > 0` each emitted point adds symmetric Gaussian
/// observation noise (entrywise standard deviation `noise_sigma`) on top of
/// the clean state and is floored back to spd at `NOISE_PROJECTION_FLOOR`;
/// the clean state itself advances noise-free, so the only systematic
/// difference between classes is the rotation speed. With `noise_sigma = 0`
/// the emitted points are the exact chain, and an angle of zero yields a
/// constant sequence.
///
/// Classes are balanced: `n_per_class` sequences per angle, labeled by the
/// angle's index, emitted class-major.
pub fn gen_rotating_spd(
    n_per_class: usize,
    length: usize,
    dim: usize,
    angles_deg: &[f64],
    noise_sigma: f64,
    seed: u64,
) -> Result<SequenceDataset> {
    if n_per_class == 0 || length == 0 {
        return Err(Error::domain("need n_per_class >= 1 and length >= 1"));
    }
    if dim < 2 {
        return Err(Error::domain("rotating classes need dim >= 2"));
    }
    if angles_deg.is_empty() {
        return Err(Error::domain("need at least one class angle"));
    }
    if angles_deg.iter().any(|a| !a.is_finite()) {
        return Err(Error::domain("class angles must be finite"));
    }
    for (i, a) in angles_deg.iter().enumerate() {
        if angles_deg[..i].contains(a) {
            return Err(Error::domain(format!("class angles must be distinct, {a} repeats")));
        }
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::domain("noise_sigma must be finite and >= 0"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = SequenceDataset::empty(ManifoldKind::Spd, dim, 1)?;
    let spectrum: Vec<f64> = (0..dim).map(|i| 1.0 + i as f64).collect();
    for (class, angle) in angles_deg.iter().enumerate() {
        let rot_canon = sample::plane_rotation(dim, 0, 1, angle.to_radians());
        for _ in 0..n_per_class {
            let q = sample::random_orthogonal(dim, &mut rng);
            // The canonical chain D_t evolves in spectrum coordinates; each
            // emitted point is its conjugation Q D_t Q^T, so angle 0 with
            // zero noise stays bitwise constant.
            let mut d = Mat::diag(&spectrum);
            let mut points = Vec::with_capacity(length);
            for _ in 0..length {
                let x = q.matmul(&d).matmul(&q.transpose()).sym_part();
                let observed = if noise_sigma > 0.0 {
                    let noisy = x.add(&sample::random_symmetric(dim, &mut rng, noise_sigma));
                    floor_spd(&noisy, NOISE_PROJECTION_FLOOR)?
                } else {
                    SpdPoint::new(x)?
                };
                points.push(Point::Spd(observed));
                d = rot_canon.matmul(&d).matmul(&rot_canon.transpose()).sym_part();
            }
            let seq = ManifoldSequence::new(ManifoldKind::Spd, dim, 1, length, points)?;
            ds.push(seq, Some(class as u32))?;
        }
    }
    Ok(ds)
}

/// Two groups of noisy rotating spd sequences that differ only in rotation
/// rate.
///
/// Group A advances by `rate` radians per step, group B by
/// `rate * (1 + effect)`, so `effect = 0` makes the groups draws from one
/// distribution (the exchangeable null). Like the labeled classes above,
/// each sequence rotates a randomly oriented copy of the fixed spectrum
/// {1, ..., dim} inside its own frame, so the clean chains of one group
/// are isometric copies of each other and the rate is the only systematic
/// group difference. Every emitted point adds symmetric Gaussian
/// observation noise (entrywise standard deviation `noise_sigma`), floored
/// back to spd. The noise matters: a next-step predictor built from convex
/// averages has to trade smoothing of the noise against lag behind the
/// rotation, and where that trade lands depends on the rate, so the rate
/// difference becomes visible in fitted parameters and not only in the
/// loss value.
///
/// Lengths vary per sequence, drawn uniformly from
/// `GROUP_LEN_MIN..=cap` where `cap` is `length` clamped into
/// [`GROUP_LEN_MIN`, `GROUP_LEN_MAX`]; `length` is the longest sequence the
/// caller wants, not an exact length.
pub fn gen_group_sequences(
    n: usize,
    length: usize,
    dim: usize,
    rate: f64,
    effect: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<(Vec<ManifoldSequence>, Vec<ManifoldSequence>)> {
    if n == 0 {
        return Err(Error::domain("need at least one sequence per group"));
    }
    if dim < 2 {
        return Err(Error::domain("rotating sequences need dim >= 2"));
    }
    if !rate.is_finite() {
        return Err(Error::domain("rate must be finite"));
    }
    if !(effect.is_finite() && effect > -1.0) {
        return Err(Error::domain("effect must be finite and > -1"));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::domain("noise_sigma must be finite and >= 0"));
    }
    let cap = length.clamp(GROUP_LEN_MIN, GROUP_LEN_MAX);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spectrum: Vec<f64> = (0..dim).map(|i| 1.0 + i as f64).collect();
    let gen_group = |rate: f64, rng: &mut ChaCha8Rng| -> Result<Vec<ManifoldSequence>> {
        let rot_canon = sample::plane_rotation(dim, 0, 1, rate);
        (0..n)
            .map(|_| {
                let len = rng.random_range(GROUP_LEN_MIN..=cap);
                let q = sample::random_orthogonal(dim, rng);
                let mut d = Mat::diag(&spectrum);
                let mut points = Vec::with_capacity(len);
                for _ in 0..len {
                    let x = q.matmul(&d).matmul(&q.transpose()).sym_part();
                    let observed = if noise_sigma > 0.0 {
                        let noisy = x.add(&sample::random_symmetric(dim, rng, noise_sigma));
                        floor_spd(&noisy, NOISE_PROJECTION_FLOOR)?
                    } else {
                        SpdPoint::new(x)?
                    };
                    points.push(Point::Spd(observed));
                    d = rot_canon.matmul(&d).matmul(&rot_canon.transpose()).sym_part();
                }
                ManifoldSequence::new(ManifoldKind::Spd, dim, 1, len, points)
            })
            .collect()
    };
    let a = gen_group(rate, &mut rng)?;
    let b = gen_group(rate * (1.0 + effect), &mut rng)?;
    Ok((a, b))
}

/// Sliding-window sample covariance sequence from a T x f feature matrix.
///
/// The window slides one row at a time; each output point is the
/// (window - 1)-denominator sample covariance of the window's rows plus
/// `epsilon * I`. The shift makes every output strictly positive definite
/// with smallest eigenvalue at least about `epsilon`. Output length is
/// T - window + 1 over SPD(f).
pub fn covariance_from_features(
    features: &Mat,
    window: usize,
    epsilon: f64,
) -> Result<ManifoldSequence> {
    let t = features.rows();
    let f = features.cols();
    if f == 0 {
        return Err(Error::domain("features need at least one column"));
    }
    if !features.is_finite() {
        return Err(Error::domain("features must be finite"));
    }
    if window < 2 {
        return Err(Error::domain("window must be at least 2"));
    }
    if t < window {
        return Err(Error::domain(format!("need at least window = {window} rows, got {t}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::domain("epsilon must be finite and > 0"));
    }

    let out_len = t - window + 1;
    let mut points = Vec::with_capacity(out_len);
    for s in 0..out_len {
        let mut mean = vec![0.0; f];
        for r in s..s + window {
            for (j, m) in mean.iter_mut().enumerate() {
                *m += features[(r, j)];
            }
        }
        for m in &mut mean {
            *m /= window as f64;
        }
        let mut c = Mat::zeros(f, f);
        for r in s..s + window {
            for i in 0..f {
                let di = features[(r, i)] - mean[i];
                for j in i..f {
                    c[(i, j)] += di * (features[(r, j)] - mean[j]);
                }
            }
        }
        let denom = (window - 1) as f64;
        for i in 0..f {
            for j in i..f {
                let v = c[(i, j)] / denom;
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
            c[(i, i)] += epsilon;
        }
        points.push(Point::Spd(SpdPoint::new(c)?));
    }
    ManifoldSequence::new(ManifoldKind::Spd, f, 1, out_len, points)
}

fn kind_byte(kind: ManifoldKind) -> u8 {
    match kind {
        ManifoldKind::Spd => 0,
        ManifoldKind::Sphere => 1,
    }
}

/// Serializes a dataset into the MSQ1 byte layout.
///
/// Little-endian throughout: magic "MSQ1", version u16 = 1, manifold kind
/// u8 (0 = spd, 1 = sphere), dim u32, channels u32, sequence count u64;
/// then per sequence: length u32, label i32 (-1 = unlabeled), payload f64
/// channel-major / time-minor, each point in its flat float encoding. An
/// empty dataset is exactly the 23-byte header.
pub fn dataset_to_bytes(ds: &SequenceDataset) -> Vec<u8> {
    let point_len = ds.kind.point_len(ds.dim);
    let payload: usize =
        ds.entries.iter().map(|(s, _)| 8 + s.channels() * s.len() * point_len * 8).sum();
    let mut buf = Vec::with_capacity(23 + payload);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(kind_byte(ds.kind));
    buf.extend_from_slice(&(ds.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(ds.channels as u32).to_le_bytes());
    buf.extend_from_slice(&(ds.entries.len() as u64).to_le_bytes());
    for (seq, label) in &ds.entries {
        buf.extend_from_slice(&(seq.len() as u32).to_le_bytes());
        let lab: i32 = label.map_or(-1, |l| l as i32);
        buf.extend_from_slice(&lab.to_le_bytes());
        for c in 0..seq.channels() {
            for t in 0..seq.len() {
                for v in seq.get(c, t).to_floats() {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    buf
}

/// Byte reader that reports the offset of the first failed read.
struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(self.pos as u64, format!("truncated while reading {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn i32(&mut self, what: &str) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Parses the MSQ1 byte layout produced by [`dataset_to_bytes`].
///
/// Every point is re-validated through its manifold constructor; any
/// malformed field yields a format error naming the byte offset.
pub fn dataset_from_bytes(buf: &[u8]) -> Result<SequenceDataset> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format(0, "bad magic, expected MSQ1"));
    }
    let version_at = r.pos as u64;
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::format(version_at, format!("unsupported version {version}")));
    }
    let kind_at = r.pos as u64;
    let kind = match r.u8("manifold kind")? {
        0 => ManifoldKind::Spd,
        1 => ManifoldKind::Sphere,
        k => return Err(Error::format(kind_at, format!("unknown manifold kind {k}"))),
    };
    let dim_at = r.pos as u64;
    let dim = r.u32("dim")? as usize;
    if dim == 0 || dim > 1 << 16 {
        return Err(Error::format(dim_at, format!("implausible dim {dim}")));
    }
    let channels_at = r.pos as u64;
    let channels = r.u32("channels")? as usize;
    if channels == 0 || channels > 1 << 16 {
        return Err(Error::format(channels_at, format!("implausible channel count {channels}")));
    }
    let count_at = r.pos as u64;
    let count = r.u64("sequence count")?;
    if count > 1 << 32 {
        return Err(Error::format(count_at, format!("implausible sequence count {count}")));
    }

    let point_len = kind.point_len(dim);
    let mut ds = SequenceDataset::empty(kind, dim, channels)?;
    for i in 0..count {
        let len_at = r.pos as u64;
        let len = r.u32("sequence length")? as usize;
        if len == 0 || len > 1 << 31 {
            return Err(Error::format(len_at, format!("implausible length {len} of sequence {i}")));
        }
        let label_at = r.pos as u64;
        let label = match r.i32("label")? {
            -1 => None,
            l if l >= 0 => Some(l as u32),
            l => return Err(Error::format(label_at, format!("invalid label {l}"))),
        };
        let mut points = Vec::with_capacity(channels * len);
        let mut floats = vec![0.0; point_len];
        for _ in 0..channels * len {
            let point_at = r.pos as u64;
            for v in &mut floats {
                *v = r.f64("payload")?;
            }
            let p = Point::from_floats(kind, dim, &floats)
                .map_err(|e| Error::format(point_at, format!("sequence {i}: {e}")))?;
            points.push(p);
        }
        let seq = ManifoldSequence::new(kind, dim, channels, len, points)?;
        ds.push(seq, label)?;
    }
    if r.pos != buf.len() {
        return Err(Error::format(
            r.pos as u64,
            format!("{} trailing bytes after the last sequence", buf.len() - r.pos),
        ));
    }
    Ok(ds)
}

/// Writes the MSQ1 encoding of `ds` to `path`.
pub fn save_dataset(path: impl AsRef<Path>, ds: &SequenceDataset) -> Result<()> {
    std::fs::write(path, dataset_to_bytes(ds))?;
    Ok(())
}

/// Reads an MSQ1 file; errors name the byte offset of the first problem.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<SequenceDataset> {
    dataset_from_bytes(&std::fs::read(path)?)
}

/// Flat CSV view of a dataset: one row per (sequence, channel, timestep)
/// with the point's flat float encoding in columns v0.., shortest
/// round-trip decimal. Unlabeled rows print label -1.
pub fn dataset_to_csv(ds: &SequenceDataset) -> String {
    let point_len = ds.kind.point_len(ds.dim);
    let mut csv = String::from("sequence,label,channel,t");
    for k in 0..point_len {
        csv.push_str(&format!(",v{k}"));
    }
    csv.push('\n');
    for (i, (seq, label)) in ds.entries.iter().enumerate() {
        let lab = label.map_or(-1i64, |l| l as i64);
        for c in 0..seq.channels() {
            for t in 0..seq.len() {
                csv.push_str(&format!("{i},{lab},{c},{t}"));
                for v in seq.get(c, t).to_floats() {
                    csv.push_str(&format!(",{v}"));
                }
                csv.push('\n');
            }
        }
    }
    csv
}
