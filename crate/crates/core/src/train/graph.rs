//! Network forward passes recorded on a [`Tape`], mirroring the pure
//! functions in [`crate::net`] operation for operation, so values agree to
//! rounding and the backward pass yields exact parameter gradients.
//!
//! Branch decisions that the pure code takes on concrete values (coincident
//! or antipodal sphere points, boundary tap counts) are taken here at build
//! time from the forward values, so each tape is specialized to its input.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::manifold::sphere::ANTIPODAL_TOL;
use crate::manifold::Point;
use crate::net::{HeadKind, ManifoldSequence, NetConfig, WeightsView};

use super::params::ModelParams;
use super::tape::{NodeId, Tape};

/// A manifold point held on the tape: an n x n matrix node or an n x 1
/// coordinate node.
#[derive(Clone, Copy)]
enum TapePoint {
    Spd(NodeId),
    Sphere(NodeId),
}

/// One parameter group bound to a tape leaf.
struct GroupNode {
    name: String,
    node: NodeId,
    offset: usize,
    len: usize,
}

/// Gradient of one scalar loss with respect to the flat parameter vector.
pub struct LossGrad {
    pub loss: f64,
    /// Logits at the forward values (classifier graphs only).
    pub logits: Vec<f64>,
    pub grad: Vec<f64>,
    /// Eigendecomposition nodes that needed the finite-difference fallback.
    pub fd_fallbacks: usize,
}

struct Graph<'c> {
    config: &'c NetConfig,
    tape: Tape,
    one: NodeId,
    root2: NodeId,
    groups: Vec<GroupNode>,
}

impl<'c> Graph<'c> {
    fn new(config: &'c NetConfig, flat: &[f64]) -> Result<Self> {
        // Shares validation with the pure path: count, finiteness and the
        // raw-weight floor are enforced identically on both.
        WeightsView::from_flat(config, flat)?;
        let mut tape = Tape::new();
        let one = tape.scalar(1.0)?;
        let root2 = tape.scalar(2.0_f64.sqrt())?;
        let mut groups = Vec::new();
        let mut offset = 0usize;
        let flen = config.feature_len();
        for (name, len) in config.param_layout() {
            let vals = flat[offset..offset + len].to_vec();
            let shape = if name == "head.fc.weight" {
                Mat { rows: config.classes, cols: flen, data: vals }
            } else {
                Mat::col(vals)
            };
            let node = tape.leaf(shape)?;
            groups.push(GroupNode { name, node, offset, len });
            offset += len;
        }
        Ok(Graph { config, tape, one, root2, groups })
    }

    fn group_node(&self, name: &str) -> NodeId {
        self.groups
            .iter()
            .find(|g| g.name == name)
            .unwrap_or_else(|| panic!("no parameter group named {name}"))
            .node
    }

    /// Input sequence as constant leaves, indexed `[channel][time]`.
    fn input_points(&mut self, seq: &ManifoldSequence) -> Result<Vec<Vec<TapePoint>>> {
        let mut chans = Vec::with_capacity(seq.channels());
        for c in 0..seq.channels() {
            let mut row = Vec::with_capacity(seq.len());
            for t in 0..seq.len() {
                row.push(self.constant_point(seq.get(c, t))?);
            }
            chans.push(row);
        }
        Ok(chans)
    }

    fn constant_point(&mut self, p: &Point) -> Result<TapePoint> {
        Ok(match p {
            Point::Spd(sp) => TapePoint::Spd(self.tape.leaf(sp.mat().clone())?),
            Point::Sphere(sp) => {
                TapePoint::Sphere(self.tape.leaf(Mat::col(sp.coords().to_vec()))?)
            }
        })
    }

    /// Geodesic from `a` toward `b` at the parameter held by scalar node `t`.
    fn geodesic(&mut self, a: TapePoint, b: TapePoint, t: NodeId) -> Result<TapePoint> {
        match (a, b) {
            (TapePoint::Spd(x), TapePoint::Spd(y)) => {
                let xsq = self.tape.sym_sqrt(x)?;
                let xisq = self.tape.sym_invsqrt(x)?;
                let inner = self.tape.matmul(xisq, y)?;
                let g = self.tape.matmul(inner, xisq)?;
                let gt = self.tape.sym_pow(g, t)?;
                let left = self.tape.matmul(xsq, gt)?;
                Ok(TapePoint::Spd(self.tape.matmul(left, xsq)?))
            }
            (TapePoint::Sphere(x), TapePoint::Sphere(y)) => {
                let u = self.tape.dot(x, y)?;
                let theta = self.tape.acos(u)?;
                let tv = self.tape.scalar_val(theta);
                if tv > std::f64::consts::PI - ANTIPODAL_TOL {
                    return Err(Error::DegenerateGeodesic(format!(
                        "points are antipodal (angle {tv}), geodesic is not unique"
                    )));
                }
                if tv < 1e-12 {
                    return Ok(TapePoint::Sphere(x));
                }
                let s = self.tape.sin(theta)?;
                let omt = self.tape.sub(self.one, t)?;
                let at = self.tape.smul(omt, theta)?;
                let bt = self.tape.smul(t, theta)?;
                let sa = self.tape.sin(at)?;
                let sb = self.tape.sin(bt)?;
                let ca = self.tape.sdiv(sa, s)?;
                let cb = self.tape.sdiv(sb, s)?;
                let xa = self.tape.scale(x, ca)?;
                let yb = self.tape.scale(y, cb)?;
                let z = self.tape.add(xa, yb)?;
                let n2 = self.tape.sum_squares(z)?;
                let n = self.tape.sqrt_guard(n2)?;
                let inv = self.tape.sdiv(self.one, n)?;
                Ok(TapePoint::Sphere(self.tape.scale(z, inv)?))
            }
            _ => Err(Error::domain("geodesic between different manifolds")),
        }
    }

    /// Geodesic distance between two tape points, as a scalar node.
    fn distance(&mut self, a: TapePoint, b: TapePoint) -> Result<NodeId> {
        match (a, b) {
            (TapePoint::Spd(_), TapePoint::Spd(_)) => {
                let d2 = self.distance_sq(a, b)?;
                self.tape.sqrt_guard(d2)
            }
            (TapePoint::Sphere(x), TapePoint::Sphere(y)) => {
                let u = self.tape.dot(x, y)?;
                self.tape.acos(u)
            }
            _ => Err(Error::domain("distance between different manifolds")),
        }
    }

    /// Squared geodesic distance, as a scalar node.
    fn distance_sq(&mut self, a: TapePoint, b: TapePoint) -> Result<NodeId> {
        match (a, b) {
            (TapePoint::Spd(x), TapePoint::Spd(y)) => {
                let xisq = self.tape.sym_invsqrt(x)?;
                let inner = self.tape.matmul(xisq, y)?;
                let g = self.tape.matmul(inner, xisq)?;
                let lg = self.tape.sym_log(g)?;
                self.tape.sum_squares(lg)
            }
            (TapePoint::Sphere(_), TapePoint::Sphere(_)) => {
                let d = self.distance(a, b)?;
                self.tape.smul(d, d)
            }
            _ => Err(Error::domain("distance between different manifolds")),
        }
    }

    /// Recursive weighted Frechet mean of `points[..used]` with the raw
    /// weights in the first `used` entries of weight-vector node `w`.
    fn wfm(&mut self, points: &[TapePoint], w: NodeId, used: usize) -> Result<TapePoint> {
        assert!(used >= 1 && used <= points.len());
        let w0 = self.tape.index(w, 0)?;
        let mut partial = self.tape.smul(w0, w0)?;
        let mut mean = points[0];
        for n in 1..used {
            let wn = self.tape.index(w, n)?;
            let sq = self.tape.smul(wn, wn)?;
            partial = self.tape.add(partial, sq)?;
            let t = self.tape.sdiv(sq, partial)?;
            mean = self.geodesic(mean, points[n], t)?;
        }
        Ok(mean)
    }

    /// One dilated convolution over `[channel][time]` points.
    fn conv_layer(
        &mut self,
        seq: &[Vec<TapePoint>],
        weight_nodes: &[NodeId],
        dilation: usize,
    ) -> Result<Vec<Vec<TapePoint>>> {
        let kernel = self.config.kernel;
        let c_in = seq.len();
        let n = seq[0].len();
        let mut out = Vec::with_capacity(weight_nodes.len());
        let mut taps = Vec::with_capacity(kernel * c_in);
        for &w in weight_nodes {
            let mut row = Vec::with_capacity(n);
            for t in 0..n {
                let offsets = (t / dilation + 1).min(kernel);
                taps.clear();
                for i in 0..offsets {
                    for j in 0..c_in {
                        taps.push(seq[j][t - i * dilation]);
                    }
                }
                row.push(self.wfm(&taps, w, offsets * c_in)?);
            }
            out.push(row);
        }
        Ok(out)
    }

    fn forward_blocks(&mut self, input: Vec<Vec<TapePoint>>) -> Result<Vec<Vec<TapePoint>>> {
        let mut current = input;
        for (b, spec) in self.config.blocks.iter().enumerate() {
            let dilation = self.config.dilation(b);
            let conv1: Vec<NodeId> = (0..spec.c_mid)
                .map(|o| self.group_node(&format!("block{b}.conv1.out{o}")))
                .collect();
            let conv2: Vec<NodeId> = (0..spec.c_out)
                .map(|o| self.group_node(&format!("block{b}.conv2.out{o}")))
                .collect();
            let merge: Vec<NodeId> = (0..spec.c_out)
                .map(|o| self.group_node(&format!("block{b}.merge.out{o}")))
                .collect();
            let hidden = self.conv_layer(&current, &conv1, dilation)?;
            let conv_out = self.conv_layer(&hidden, &conv2, dilation)?;
            let n = current[0].len();
            let mut merged = Vec::with_capacity(spec.c_out);
            let mut taps = Vec::with_capacity(spec.c_in + spec.c_out);
            for &w in &merge {
                let mut row = Vec::with_capacity(n);
                for t in 0..n {
                    taps.clear();
                    for chan in current.iter() {
                        taps.push(chan[t]);
                    }
                    for chan in conv_out.iter() {
                        taps.push(chan[t]);
                    }
                    let used = taps.len();
                    row.push(self.wfm(&taps, w, used)?);
                }
                merged.push(row);
            }
            current = merged;
        }
        Ok(current)
    }

    /// Tangent coordinates of one point at the canonical base, as a column
    /// vector node (upper triangle with sqrt(2) off-diagonals for matrices).
    fn tangent_coords(&mut self, p: TapePoint) -> Result<NodeId> {
        match p {
            TapePoint::Spd(x) => {
                let lg = self.tape.sym_log(x)?;
                let n = self.tape.val(x).rows();
                let mut parts = Vec::with_capacity(n * (n + 1) / 2);
                for i in 0..n {
                    for j in i..n {
                        let e = self.tape.index(lg, i * n + j)?;
                        parts.push(if i == j { e } else { self.tape.smul(e, self.root2)? });
                    }
                }
                self.tape.concat_col(&parts)
            }
            TapePoint::Sphere(y) => {
                let dim = self.tape.val(y).rows();
                let u = self.tape.index(y, 0)?;
                let theta = self.tape.acos(u)?;
                let tv = self.tape.scalar_val(theta);
                if tv > std::f64::consts::PI - ANTIPODAL_TOL {
                    return Err(Error::DegenerateGeodesic(format!(
                        "point is antipodal to the base (angle {tv}), log map is undefined"
                    )));
                }
                if tv < 1e-12 {
                    return self.tape.leaf(Mat::zeros(dim, 1));
                }
                let mut e1 = Mat::zeros(dim, 1);
                e1.data_mut()[0] = 1.0;
                let e1 = self.tape.leaf(e1)?;
                let s = self.tape.sin(theta)?;
                let coef = self.tape.sdiv(theta, s)?;
                let proj = self.tape.scale(e1, u)?;
                let z = self.tape.sub(y, proj)?;
                Ok(self.tape.scale(z, coef)?)
            }
        }
    }

    /// Head logits from the last-timestep channel values.
    fn head_logits(&mut self, outputs: &[Vec<TapePoint>]) -> Result<NodeId> {
        let values: Vec<TapePoint> = outputs.iter().map(|row| *row.last().unwrap()).collect();
        let features = match self.config.head {
            HeadKind::Invariant => {
                let mut means = Vec::with_capacity(self.config.templates);
                for j in 0..self.config.templates {
                    let w = self.group_node(&format!("head.template{j}"));
                    means.push(self.wfm(&values, w, values.len())?);
                }
                let mut feats = Vec::with_capacity(values.len() * means.len());
                for &v in &values {
                    for &m in &means {
                        feats.push(self.distance(v, m)?);
                    }
                }
                self.tape.concat_col(&feats)?
            }
            HeadKind::Tangent => {
                let mut parts = Vec::with_capacity(values.len());
                for &v in &values {
                    parts.push(self.tangent_coords(v)?);
                }
                self.tape.concat_col(&parts)?
            }
        };
        let fc_w = self.group_node("head.fc.weight");
        let fc_b = self.group_node("head.fc.bias");
        let prod = self.tape.matmul(fc_w, features)?;
        self.tape.add(prod, fc_b)
    }

    /// Flattens per-group adjoints into a gradient over the flat vector.
    fn collect_grad(&self, adjoints: &super::tape::Adjoints, total: usize) -> Vec<f64> {
        let mut grad = vec![0.0; total];
        for g in &self.groups {
            let v = self.tape.val(g.node);
            let adj = adjoints.get_or_zeros(g.node, v.rows(), v.cols());
            grad[g.offset..g.offset + g.len].copy_from_slice(adj.data());
        }
        grad
    }
}

fn check_input(config: &NetConfig, seq: &ManifoldSequence) -> Result<()> {
    if seq.kind() != config.kind || seq.dim() != config.dim {
        return Err(Error::domain(format!(
            "sequence is {}({}) but the network expects {}({})",
            seq.kind().name(),
            seq.dim(),
            config.kind.name(),
            config.dim
        )));
    }
    if seq.channels() != config.input_channels() {
        return Err(Error::domain(format!(
            "sequence has {} channels but the network expects {}",
            seq.channels(),
            config.input_channels()
        )));
    }
    Ok(())
}

/// Logits computed on a tape, without a backward pass. Matches
/// [`crate::net::network_forward`] to rounding.
pub fn tape_logits(
    config: &NetConfig,
    params: &ModelParams,
    seq: &ManifoldSequence,
) -> Result<Vec<f64>> {
    check_input(config, seq)?;
    let mut g = Graph::new(config, params.values())?;
    let input = g.input_points(seq)?;
    let outputs = g.forward_blocks(input)?;
    let logits = g.head_logits(&outputs)?;
    Ok(g.tape.val(logits).data().to_vec())
}

/// Cross-entropy loss and its parameter gradient for one labeled sequence.
pub fn classifier_loss_grad(
    config: &NetConfig,
    params: &ModelParams,
    seq: &ManifoldSequence,
    label: usize,
) -> Result<LossGrad> {
    check_input(config, seq)?;
    if label >= config.classes {
        return Err(Error::domain(format!(
            "label {label} out of range for {} classes",
            config.classes
        )));
    }
    let mut g = Graph::new(config, params.values())?;
    let input = g.input_points(seq)?;
    let outputs = g.forward_blocks(input)?;
    let logits = g.head_logits(&outputs)?;
    let loss = g.tape.cross_entropy(logits, label)?;
    let logit_vals = g.tape.val(logits).data().to_vec();
    let loss_val = g.tape.scalar_val(loss);
    let adjoints = g.tape.backward(loss)?;
    let grad = g.collect_grad(&adjoints, params.len());
    Ok(LossGrad {
        loss: loss_val,
        logits: logit_vals,
        grad,
        fd_fallbacks: g.tape.fd_fallbacks(),
    })
}

/// Next-step prediction loss for a single-channel sequence: the mean over
/// `s` of the squared distance between the network output at time `s`
/// (channel 0) and the input at time `s + 1`. Returns the loss and its
/// parameter gradient.
pub fn group_loss_grad(
    config: &NetConfig,
    params: &ModelParams,
    seq: &ManifoldSequence,
) -> Result<LossGrad> {
    check_input(config, seq)?;
    if seq.len() < 2 {
        return Err(Error::domain("next-step loss needs a sequence of length at least 2"));
    }
    let mut g = Graph::new(config, params.values())?;
    let input = g.input_points(seq)?;
    let targets: Vec<TapePoint> = input[0].clone();
    let outputs = g.forward_blocks(input)?;
    let preds = &outputs[0];
    let mut sum: Option<NodeId> = None;
    for s in 0..seq.len() - 1 {
        // Distance with the constant target as the base point: same value
        // by symmetry, smaller backward pass.
        let d2 = g.distance_sq(targets[s + 1], preds[s])?;
        sum = Some(match sum {
            Some(acc) => g.tape.add(acc, d2)?,
            None => d2,
        });
    }
    let count = g.tape.scalar((seq.len() - 1) as f64)?;
    let loss = g.tape.sdiv(sum.unwrap(), count)?;
    let loss_val = g.tape.scalar_val(loss);
    let adjoints = g.tape.backward(loss)?;
    let grad = g.collect_grad(&adjoints, params.len());
    Ok(LossGrad { loss: loss_val, logits: Vec::new(), grad, fd_fallbacks: g.tape.fd_fallbacks() })
}

/// Cross-entropy of pure-forward logits, for tape-free loss evaluation.
pub fn cross_entropy_of(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|&v| (v - m).exp()).sum();
    m + z.ln() - logits[label]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{sample, ManifoldKind, ManifoldOps, SpdPoint};
    use crate::net::{network_forward, BlockSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spd_seq(channels: usize, len: usize, seed: u64) -> ManifoldSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<Point> = (0..channels * len)
            .map(|_| Point::Spd(sample::random_spd(3, &mut rng, 0.5, 2.0)))
            .collect();
        ManifoldSequence::new(ManifoldKind::Spd, 3, channels, len, points).unwrap()
    }

    fn sphere_seq(channels: usize, len: usize, seed: u64) -> ManifoldSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let center = sample::random_unit(5, &mut rng);
        let points: Vec<Point> = (0..channels * len)
            .map(|_| Point::Sphere(sample::random_unit_in_ball(&center, 0.5, &mut rng)))
            .collect();
        ManifoldSequence::new(ManifoldKind::Sphere, 5, channels, len, points).unwrap()
    }

    fn spd_config(head: HeadKind) -> NetConfig {
        NetConfig {
            kind: ManifoldKind::Spd,
            dim: 3,
            blocks: vec![
                BlockSpec { c_in: 1, c_mid: 2, c_out: 2 },
                BlockSpec { c_in: 2, c_mid: 2, c_out: 2 },
            ],
            kernel: 2,
            head,
            templates: 2,
            classes: 3,
        }
    }

    #[test]
    fn tape_logits_match_pure_forward_spd() {
        for head in [HeadKind::Invariant, HeadKind::Tangent] {
            let config = spd_config(head);
            let params = ModelParams::init(&config, 5);
            let seq = spd_seq(1, 7, 21);
            let pure = {
                let view = WeightsView::from_flat(&config, params.values()).unwrap();
                network_forward(&config, &view, &seq).unwrap()
            };
            let taped = tape_logits(&config, &params, &seq).unwrap();
            assert_eq!(pure.len(), taped.len());
            for (a, b) in pure.iter().zip(&taped) {
                assert!((a - b).abs() <= 1e-12, "pure {a} vs tape {b}");
            }
        }
    }

    #[test]
    fn tape_logits_match_pure_forward_sphere() {
        for head in [HeadKind::Invariant, HeadKind::Tangent] {
            let config = NetConfig {
                kind: ManifoldKind::Sphere,
                dim: 5,
                blocks: vec![BlockSpec { c_in: 2, c_mid: 2, c_out: 2 }],
                kernel: 2,
                head,
                templates: 2,
                classes: 2,
            };
            let params = ModelParams::init(&config, 11);
            let seq = sphere_seq(2, 6, 33);
            let pure = {
                let view = WeightsView::from_flat(&config, params.values()).unwrap();
                network_forward(&config, &view, &seq).unwrap()
            };
            let taped = tape_logits(&config, &params, &seq).unwrap();
            for (a, b) in pure.iter().zip(&taped) {
                assert!((a - b).abs() <= 1e-12, "pure {a} vs tape {b}");
            }
        }
    }

    #[test]
    fn classifier_loss_matches_pure_cross_entropy() {
        let config = spd_config(HeadKind::Invariant);
        let params = ModelParams::init(&config, 3);
        let seq = spd_seq(1, 6, 9);
        let out = classifier_loss_grad(&config, &params, &seq, 1).unwrap();
        let pure = {
            let view = WeightsView::from_flat(&config, params.values()).unwrap();
            cross_entropy_of(&network_forward(&config, &view, &seq).unwrap(), 1)
        };
        assert!((out.loss - pure).abs() <= 1e-12);
        assert_eq!(out.grad.len(), params.len());
        assert!(out.grad.iter().all(|v| v.is_finite()));
        assert!(out.grad.iter().any(|v| v.abs() > 0.0), "gradient identically zero");
    }

    #[test]
    fn geodesic_endpoint_distance_is_stationary() {
        // f(t) = d^2(geodesic(x, y, t), y) has gradient 2 d^2 (t - 1), zero
        // at t = 1 exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = sample::random_spd(3, &mut rng, 0.5, 2.0);
        let y = sample::random_spd(3, &mut rng, 0.5, 2.0);
        let config = spd_config(HeadKind::Invariant);
        let mut g = Graph::new(&config, ModelParams::init(&config, 1).values()).unwrap();
        let xn = TapePoint::Spd(g.tape.leaf(x.mat().clone()).unwrap());
        let yn = TapePoint::Spd(g.tape.leaf(y.mat().clone()).unwrap());
        let t = g.tape.scalar(1.0).unwrap();
        let gamma = g.geodesic(xn, yn, t).unwrap();
        let d2 = g.distance_sq(gamma, yn).unwrap();
        let adj = g.tape.backward(d2).unwrap();
        let gt = adj.get(t).map_or(0.0, |m| m.data()[0]);
        assert!(gt.abs() <= 1e-7, "gradient at the endpoint is {gt}");
    }

    #[test]
    fn group_loss_is_mean_of_squared_next_step_distances() {
        let config = NetConfig {
            kind: ManifoldKind::Spd,
            dim: 3,
            blocks: vec![BlockSpec { c_in: 1, c_mid: 2, c_out: 1 }],
            kernel: 2,
            head: HeadKind::Invariant,
            templates: 1,
            classes: 2,
        };
        let params = ModelParams::init(&config, 2);
        let seq = spd_seq(1, 5, 40);
        let out = group_loss_grad(&config, &params, &seq).unwrap();
        // Reference value through the pure forward pass.
        let view = WeightsView::from_flat(&config, params.values()).unwrap();
        let forward = crate::net::network_forward_sequence(&config, &view, &seq).unwrap();
        let mut expect = 0.0;
        for s in 0..4 {
            let d = forward.get(0, s).distance(seq.get(0, s + 1)).unwrap();
            expect += d * d;
        }
        expect /= 4.0;
        assert!((out.loss - expect).abs() <= 1e-10, "tape {} vs pure {}", out.loss, expect);
        assert!(out.grad.iter().any(|v| v.abs() > 0.0));
    }

    #[test]
    fn group_loss_rejects_short_sequences() {
        let config = NetConfig {
            kind: ManifoldKind::Spd,
            dim: 3,
            blocks: vec![BlockSpec { c_in: 1, c_mid: 1, c_out: 1 }],
            kernel: 2,
            head: HeadKind::Invariant,
            templates: 1,
            classes: 2,
        };
        let params = ModelParams::init(&config, 2);
        let seq = spd_seq(1, 1, 8);
        assert!(group_loss_grad(&config, &params, &seq).is_err());
    }

    #[test]
    fn identical_last_values_give_finite_gradients() {
        // Depth-zero invariant head on a single channel: every feature is
        // d(v, v) = 0 and the guarded square root must not produce NaN.
        let config = NetConfig {
            kind: ManifoldKind::Spd,
            dim: 3,
            blocks: vec![],
            kernel: 3,
            head: HeadKind::Invariant,
            templates: 2,
            classes: 2,
        };
        let params = ModelParams::init(&config, 4);
        let points = vec![Point::Spd(SpdPoint::identity(3)); 4];
        let seq = ManifoldSequence::new(ManifoldKind::Spd, 3, 1, 4, points).unwrap();
        let out = classifier_loss_grad(&config, &params, &seq, 0).unwrap();
        assert!(out.loss.is_finite());
        assert!(out.grad.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn wrong_label_is_rejected() {
        let config = spd_config(HeadKind::Invariant);
        let params = ModelParams::init(&config, 3);
        let seq = spd_seq(1, 5, 9);
        assert!(classifier_loss_grad(&config, &params, &seq, 3).is_err());
    }
}
