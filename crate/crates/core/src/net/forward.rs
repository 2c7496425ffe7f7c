//! Pure forward pass: dilated convolutions, residual blocks and heads.
//!
//! A dilated convolution with kernel `k` and dilation `d` replaces the
//! output at time `s` by the recursive weighted Frechet mean of the taps
//!
//! ```text
//! (channel j, time s - i*d)   for i = 0..k, j = 0..c_in
//! ```
//!
//! ordered time-offset-major, channel-minor, with one convex weight vector
//! of length `k * c_in` per output channel. Taps that would reach before
//! time 0 are dropped and the surviving weights renormalize implicitly
//! (the recursion only ever uses weight ratios). A residual block runs two
//! such convolutions and then, per output channel, merges the block input
//! and the convolution output channel-wise at each timestep.
//!
//! Output at time `s` therefore never reads input after `s`, and a stack of
//! blocks with dilations d_b covers a receptive field of
//! `sum_b 2 * (k - 1) * d_b` timesteps.

use crate::error::{Error, Result};
use crate::manifold::{spd, sphere, ManifoldOps, Point, SpherePoint};
use crate::wfm::{recursive_wfm_refs, ConvexWeights};

use super::config::{HeadKind, NetConfig};
use super::sequence::ManifoldSequence;

/// Convex weights of one convolution or merge layer, one entry per output
/// channel.
#[derive(Clone, Debug)]
pub struct LayerWeights {
    pub per_out: Vec<ConvexWeights>,
}

#[derive(Clone, Debug)]
pub struct BlockWeights {
    pub conv1: LayerWeights,
    pub conv2: LayerWeights,
    pub merge: LayerWeights,
}

/// Structured view of a flat parameter vector, following
/// `NetConfig::param_layout`.
#[derive(Clone, Debug)]
pub struct WeightsView {
    pub blocks: Vec<BlockWeights>,
    pub templates: Vec<ConvexWeights>,
    pub fc_weight: Vec<f64>,
    pub fc_bias: Vec<f64>,
}

impl WeightsView {
    pub fn from_flat(config: &NetConfig, flat: &[f64]) -> Result<Self> {
        config.validate()?;
        if flat.len() != config.param_count() {
            return Err(Error::domain(format!(
                "parameter vector has {} entries but the architecture needs {}",
                flat.len(),
                config.param_count()
            )));
        }
        let mut offset = 0usize;
        let mut take = |len: usize| -> &[f64] {
            let s = &flat[offset..offset + len];
            offset += len;
            s
        };
        let mut blocks = Vec::with_capacity(config.blocks.len());
        for spec in &config.blocks {
            let mut conv1 = Vec::with_capacity(spec.c_mid);
            for _ in 0..spec.c_mid {
                conv1.push(ConvexWeights::new(take(config.kernel * spec.c_in).to_vec())?);
            }
            let mut conv2 = Vec::with_capacity(spec.c_out);
            for _ in 0..spec.c_out {
                conv2.push(ConvexWeights::new(take(config.kernel * spec.c_mid).to_vec())?);
            }
            let mut merge = Vec::with_capacity(spec.c_out);
            for _ in 0..spec.c_out {
                merge.push(ConvexWeights::new(take(spec.c_in + spec.c_out).to_vec())?);
            }
            blocks.push(BlockWeights {
                conv1: LayerWeights { per_out: conv1 },
                conv2: LayerWeights { per_out: conv2 },
                merge: LayerWeights { per_out: merge },
            });
        }
        let mut templates = Vec::new();
        if config.head == HeadKind::Invariant {
            for _ in 0..config.templates {
                templates.push(ConvexWeights::new(take(config.output_channels()).to_vec())?);
            }
        }
        let fc_weight = take(config.classes * config.feature_len()).to_vec();
        let fc_bias = take(config.classes).to_vec();
        debug_assert_eq!(offset, flat.len());
        Ok(WeightsView { blocks, templates, fc_weight, fc_bias })
    }
}

/// One dilated convolution layer.
pub fn dilated_conv_forward(
    seq: &ManifoldSequence,
    layer: &LayerWeights,
    kernel: usize,
    dilation: usize,
) -> Result<ManifoldSequence> {
    if kernel == 0 || dilation == 0 {
        return Err(Error::domain("kernel and dilation must be at least 1"));
    }
    let c_in = seq.channels();
    let c_out = layer.per_out.len();
    if c_out == 0 {
        return Err(Error::domain("convolution needs at least one output channel"));
    }
    for (o, w) in layer.per_out.iter().enumerate() {
        if w.len() != kernel * c_in {
            return Err(Error::domain(format!(
                "output channel {o} has {} weights, expected kernel {kernel} x {c_in} channels",
                w.len()
            )));
        }
    }
    let n = seq.len();
    let mut points = Vec::with_capacity(c_out * n);
    let mut taps: Vec<&Point> = Vec::with_capacity(kernel * c_in);
    for o in 0..c_out {
        let full = &layer.per_out[o];
        for t in 0..n {
            let offsets = (t / dilation + 1).min(kernel);
            taps.clear();
            for i in 0..offsets {
                for j in 0..c_in {
                    taps.push(seq.get(j, t - i * dilation));
                }
            }
            let mean = if offsets == kernel {
                recursive_wfm_refs(&taps, full)?
            } else {
                recursive_wfm_refs(&taps, &full.prefix(offsets * c_in))?
            };
            points.push(mean);
        }
    }
    ManifoldSequence::new(seq.kind(), seq.dim(), c_out, n, points)
}

/// One residual block: two convolutions plus a channel-wise merge of the
/// block input and the convolution output at every timestep.
pub fn residual_block_forward(
    seq: &ManifoldSequence,
    block: &BlockWeights,
    kernel: usize,
    dilation: usize,
) -> Result<ManifoldSequence> {
    let hidden = dilated_conv_forward(seq, &block.conv1, kernel, dilation)?;
    let conv_out = dilated_conv_forward(&hidden, &block.conv2, kernel, dilation)?;
    let c_in = seq.channels();
    let c_out = conv_out.channels();
    if block.merge.per_out.len() != c_out {
        return Err(Error::domain(format!(
            "merge defines {} output channels but the block emits {c_out}",
            block.merge.per_out.len()
        )));
    }
    for (o, w) in block.merge.per_out.iter().enumerate() {
        if w.len() != c_in + c_out {
            return Err(Error::domain(format!(
                "merge channel {o} has {} weights, expected {}",
                w.len(),
                c_in + c_out
            )));
        }
    }
    let n = seq.len();
    let mut points = Vec::with_capacity(c_out * n);
    let mut taps: Vec<&Point> = Vec::with_capacity(c_in + c_out);
    for o in 0..c_out {
        let w = &block.merge.per_out[o];
        for t in 0..n {
            taps.clear();
            for j in 0..c_in {
                taps.push(seq.get(j, t));
            }
            for j in 0..c_out {
                taps.push(conv_out.get(j, t));
            }
            points.push(recursive_wfm_refs(&taps, w)?);
        }
    }
    ManifoldSequence::new(seq.kind(), seq.dim(), c_out, n, points)
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

/// Runs the residual block stack without a head, returning the final
/// manifold-valued sequence.
pub fn network_forward_sequence(
    config: &NetConfig,
    view: &WeightsView,
    seq: &ManifoldSequence,
) -> Result<ManifoldSequence> {
    check_input(config, seq)?;
    let mut current = seq.clone();
    for (b, block) in view.blocks.iter().enumerate() {
        current = residual_block_forward(&current, block, config.kernel, config.dilation(b))?;
    }
    Ok(current)
}

fn affine(fc_weight: &[f64], fc_bias: &[f64], features: &[f64]) -> Result<Vec<f64>> {
    let classes = fc_bias.len();
    if fc_weight.len() != classes * features.len() {
        return Err(Error::domain(format!(
            "linear layer of {} x {} cannot read {} features",
            classes,
            if classes == 0 { 0 } else { fc_weight.len() / classes },
            features.len()
        )));
    }
    let mut logits = fc_bias.to_vec();
    for (c, logit) in logits.iter_mut().enumerate() {
        let row = &fc_weight[c * features.len()..(c + 1) * features.len()];
        for (w, f) in row.iter().zip(features) {
            *logit += w * f;
        }
    }
    Ok(logits)
}

/// Invariant head: distances from the last-timestep channel values to
/// learned Frechet-mean templates, features ordered channel-major over
/// templates, then a linear map.
pub fn invariant_head_forward(
    values: &[&Point],
    templates: &[ConvexWeights],
    fc_weight: &[f64],
    fc_bias: &[f64],
) -> Result<Vec<f64>> {
    if values.is_empty() || templates.is_empty() {
        return Err(Error::domain("invariant head needs values and at least one template"));
    }
    let mut features = Vec::with_capacity(values.len() * templates.len());
    let mut means = Vec::with_capacity(templates.len());
    for tmpl in templates {
        means.push(recursive_wfm_refs(values, tmpl)?);
    }
    for v in values {
        for m in &means {
            features.push(v.distance(m)?);
        }
    }
    affine(fc_weight, fc_bias, &features)
}

/// Flattened tangent coordinates of one point at the canonical base
/// (identity matrix for spd, first basis vector for the sphere).
///
/// Symmetric matrices flatten to the upper triangle with off-diagonal
/// entries scaled by sqrt(2), so the flat Euclidean inner product matches
/// the Frobenius inner product.
pub fn tangent_coords(point: &Point) -> Result<Vec<f64>> {
    match point {
        Point::Spd(p) => {
            // Log at the identity is the matrix logarithm.
            let v = spd::mat_log(p.mat())?;
            let n = p.dim();
            let mut coords = Vec::with_capacity(n * (n + 1) / 2);
            let root2 = 2.0_f64.sqrt();
            for i in 0..n {
                for j in i..n {
                    coords.push(if i == j { v[(i, j)] } else { root2 * v[(i, j)] });
                }
            }
            Ok(coords)
        }
        Point::Sphere(p) => {
            let base = SpherePoint::canonical(p.dim());
            sphere::sphere_log(&base, p)
        }
    }
}

/// Tangent head: flattened tangent coordinates of the last-timestep values
/// at the canonical base point, concatenated channel-major, then a linear
/// map. Not isometry-invariant.
pub fn tangent_head_forward(
    values: &[&Point],
    fc_weight: &[f64],
    fc_bias: &[f64],
) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::domain("tangent head needs at least one value"));
    }
    let mut features = Vec::new();
    for v in values {
        features.extend(tangent_coords(v)?);
    }
    affine(fc_weight, fc_bias, &features)
}

/// Full network: block stack, last-timestep values, configured head.
pub fn network_forward(
    config: &NetConfig,
    view: &WeightsView,
    seq: &ManifoldSequence,
) -> Result<Vec<f64>> {
    let out = network_forward_sequence(config, view, seq)?;
    let values = out.last_values();
    match config.head {
        HeadKind::Invariant => {
            invariant_head_forward(&values, &view.templates, &view.fc_weight, &view.fc_bias)
        }
        HeadKind::Tangent => tangent_head_forward(&values, &view.fc_weight, &view.fc_bias),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::manifold::{sample, Isometry, ManifoldKind, SpdPoint};
    use crate::net::config::BlockSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd_seq(channels: usize, len: usize, rng: &mut ChaCha8Rng) -> ManifoldSequence {
        let points: Vec<Point> = (0..channels * len)
            .map(|_| Point::Spd(sample::random_spd(3, rng, 0.5, 2.0)))
            .collect();
        ManifoldSequence::new(ManifoldKind::Spd, 3, channels, len, points).unwrap()
    }

    fn random_sphere_seq(channels: usize, len: usize, rng: &mut ChaCha8Rng) -> ManifoldSequence {
        let center = sample::random_unit(8, rng);
        let points: Vec<Point> = (0..channels * len)
            .map(|_| Point::Sphere(sample::random_unit_in_ball(&center, 0.5, rng)))
            .collect();
        ManifoldSequence::new(ManifoldKind::Sphere, 8, channels, len, points).unwrap()
    }

    fn random_layer(c_out: usize, taps: usize, rng: &mut ChaCha8Rng) -> LayerWeights {
        let per_out = (0..c_out)
            .map(|_| {
                ConvexWeights::new((0..taps).map(|_| rng.random_range(0.5..1.5)).collect())
                    .unwrap()
            })
            .collect();
        LayerWeights { per_out }
    }

    #[test]
    fn kernel_one_single_channel_conv_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let seq = random_spd_seq(1, 6, &mut rng);
        let layer = random_layer(1, 1, &mut rng);
        let out = dilated_conv_forward(&seq, &layer, 1, 2).unwrap();
        for t in 0..6 {
            assert_eq!(out.get(0, t), seq.get(0, t));
        }
    }

    #[test]
    fn conv_tap_order_is_time_offset_major_channel_minor() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let seq = random_spd_seq(2, 4, &mut rng);
        let layer = random_layer(1, 4, &mut rng);
        let out = dilated_conv_forward(&seq, &layer, 2, 1).unwrap();
        // At t = 2 with k = 2, d = 1 the taps are (ch0,2),(ch1,2),(ch0,1),(ch1,1).
        let taps = vec![seq.get(0, 2), seq.get(1, 2), seq.get(0, 1), seq.get(1, 1)];
        let direct = recursive_wfm_refs(&taps, &layer.per_out[0]).unwrap();
        assert_eq!(out.get(0, 2), &direct);
    }

    #[test]
    fn conv_boundary_drops_missing_taps_and_renormalizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let seq = random_spd_seq(2, 5, &mut rng);
        let layer = random_layer(1, 6, &mut rng);
        let out = dilated_conv_forward(&seq, &layer, 3, 2).unwrap();
        // t = 0: only offset 0 survives.
        let direct0 = recursive_wfm_refs(
            &[seq.get(0, 0), seq.get(1, 0)],
            &layer.per_out[0].prefix(2),
        )
        .unwrap();
        assert_eq!(out.get(0, 0), &direct0);
        // t = 3 with d = 2: offsets 0 and 1 survive (times 3 and 1).
        let direct3 = recursive_wfm_refs(
            &[seq.get(0, 3), seq.get(1, 3), seq.get(0, 1), seq.get(1, 1)],
            &layer.per_out[0].prefix(4),
        )
        .unwrap();
        assert_eq!(out.get(0, 3), &direct3);
    }

    fn block_weights(spec: BlockSpec, kernel: usize, rng: &mut ChaCha8Rng) -> BlockWeights {
        BlockWeights {
            conv1: random_layer(spec.c_mid, kernel * spec.c_in, rng),
            conv2: random_layer(spec.c_out, kernel * spec.c_mid, rng),
            merge: random_layer(spec.c_out, spec.c_in + spec.c_out, rng),
        }
    }

    #[test]
    fn residual_block_is_causal() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let seq = random_spd_seq(2, 8, &mut rng);
        let spec = BlockSpec { c_in: 2, c_mid: 2, c_out: 3 };
        let block = block_weights(spec, 2, &mut rng);
        let base = residual_block_forward(&seq, &block, 2, 1).unwrap();

        let mut perturbed = seq.clone();
        perturbed.set(1, 5, Point::Spd(sample::random_spd(3, &mut rng, 0.5, 2.0))).unwrap();
        let out = residual_block_forward(&perturbed, &block, 2, 1).unwrap();
        for c in 0..3 {
            for t in 0..5 {
                assert_eq!(base.get(c, t), out.get(c, t), "channel {c} time {t} changed");
            }
        }
        assert_ne!(base.get(0, 5), out.get(0, 5));
    }

    #[test]
    fn receptive_field_is_bounded_by_dilation_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(89);
        let config = NetConfig {
            kind: ManifoldKind::Spd,
            dim: 3,
            blocks: vec![
                BlockSpec { c_in: 1, c_mid: 2, c_out: 2 },
                BlockSpec { c_in: 2, c_mid: 2, c_out: 2 },
            ],
            kernel: 2,
            head: HeadKind::Invariant,
            templates: 2,
            classes: 2,
        };
        let flat = test_params(&config, &mut rng);
        let view = WeightsView::from_flat(&config, &flat).unwrap();
        let seq = random_spd_seq(1, 10, &mut rng);
        let base = network_forward_sequence(&config, &view, &seq).unwrap();
        // Receptive field: 2*(k-1)*(1 + 2) = 6, so output at t = 9 ignores t <= 2.
        let mut perturbed = seq.clone();
        perturbed.set(0, 2, Point::Spd(sample::random_spd(3, &mut rng, 0.5, 2.0))).unwrap();
        let out = network_forward_sequence(&config, &view, &perturbed).unwrap();
        for c in 0..2 {
            assert_eq!(base.get(c, 9), out.get(c, 9), "channel {c} leaked outside the field");
        }
    }

    fn test_params(config: &NetConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut flat = Vec::with_capacity(config.param_count());
        for (name, len) in config.param_layout() {
            for _ in 0..len {
                if name.starts_with("head.fc") {
                    flat.push(rng.random_range(-0.5..0.5));
                } else {
                    flat.push(rng.random_range(0.5..1.5));
                }
            }
        }
        flat
    }

    #[test]
    fn conv_layer_is_isometry_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        for trial in 0..5 {
            let seq = random_spd_seq(2, 5, &mut rng);
            let layer = random_layer(2, 6, &mut rng);
            let iso = Isometry::congruence(sample::random_congruence(3, &mut rng)).unwrap();
            let moved_points: Vec<Point> =
                seq.points().iter().map(|p| iso.apply(p).unwrap()).collect();
            let moved = ManifoldSequence::new(ManifoldKind::Spd, 3, 2, 5, moved_points).unwrap();
            let lhs = dilated_conv_forward(&moved, &layer, 3, 1).unwrap();
            let rhs = dilated_conv_forward(&seq, &layer, 3, 1).unwrap();
            for c in 0..2 {
                for t in 0..5 {
                    let rhs_moved = iso.apply(rhs.get(c, t)).unwrap();
                    let (Point::Spd(a), Point::Spd(b)) = (lhs.get(c, t), &rhs_moved) else {
                        unreachable!()
                    };
                    let err = a.mat().sub(b.mat()).max_abs();
                    assert!(err <= 1e-7, "trial {trial} channel {c} time {t}: deviation {err}");
                }
            }
        }
    }

    #[test]
    fn sphere_conv_layer_is_rotation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let seq = random_sphere_seq(2, 4, &mut rng);
        let layer = random_layer(2, 4, &mut rng);
        let iso = Isometry::rotation(sample::random_orthogonal(8, &mut rng)).unwrap();
        let moved_points: Vec<Point> = seq.points().iter().map(|p| iso.apply(p).unwrap()).collect();
        let moved = ManifoldSequence::new(ManifoldKind::Sphere, 8, 2, 4, moved_points).unwrap();
        let lhs = dilated_conv_forward(&moved, &layer, 2, 1).unwrap();
        let rhs = dilated_conv_forward(&seq, &layer, 2, 1).unwrap();
        for c in 0..2 {
            for t in 0..4 {
                let rhs_moved = iso.apply(rhs.get(c, t)).unwrap();
                let (Point::Sphere(a), Point::Sphere(b)) = (lhs.get(c, t), &rhs_moved) else {
                    unreachable!()
                };
                for (x, y) in a.coords().iter().zip(b.coords()) {
                    assert!((x - y).abs() <= 1e-7);
                }
            }
        }
    }

    #[test]
    fn network_with_invariant_head_ignores_isometries() {
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        let config = NetConfig {
            kind: ManifoldKind::Spd,
            dim: 3,
            blocks: vec![BlockSpec { c_in: 1, c_mid: 2, c_out: 2 }],
            kernel: 2,
            head: HeadKind::Invariant,
            templates: 2,
            classes: 3,
        };
        let flat = test_params(&config, &mut rng);
        let view = WeightsView::from_flat(&config, &flat).unwrap();
        for _ in 0..5 {
            let seq = random_spd_seq(1, 6, &mut rng);
            let iso = Isometry::congruence(sample::random_congruence(3, &mut rng)).unwrap();
            let moved_points: Vec<Point> =
                seq.points().iter().map(|p| iso.apply(p).unwrap()).collect();
            let moved = ManifoldSequence::new(ManifoldKind::Spd, 3, 1, 6, moved_points).unwrap();
            let base = network_forward(&config, &view, &seq).unwrap();
            let out = network_forward(&config, &view, &moved).unwrap();
            for (a, b) in base.iter().zip(&out) {
                assert!((a - b).abs() <= 1e-6, "logit drift {}", (a - b).abs());
            }
        }
    }

    #[test]
    fn single_channel_single_template_head_returns_bias() {
        let x = Point::Spd(SpdPoint::identity(3));
        let templates = vec![ConvexWeights::uniform(1)];
        let fc_w = vec![0.7, -0.3];
        let fc_b = vec![0.25, -1.5];
        let logits = invariant_head_forward(&[&x], &templates, &fc_w, &fc_b).unwrap();
        assert!((logits[0] - 0.25).abs() < 1e-10);
        assert!((logits[1] + 1.5).abs() < 1e-10);
    }

    #[test]
    fn tangent_coords_of_diagonal_spd() {
        let p = Point::Spd(
            SpdPoint::new(Mat::diag(&[1.0_f64.exp(), 2.0_f64.exp()])).unwrap(),
        );
        let coords = tangent_coords(&p).unwrap();
        assert_eq!(coords.len(), 3);
        assert!((coords[0] - 1.0).abs() < 1e-12);
        assert!(coords[1].abs() < 1e-12);
        assert!((coords[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tangent_flattening_preserves_frobenius_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(107);
        let p = Point::Spd(sample::random_spd(4, &mut rng, 0.5, 2.0));
        let coords = tangent_coords(&p).unwrap();
        let flat_norm: f64 = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        let Point::Spd(sp) = &p else { unreachable!() };
        let log_norm = spd::mat_log(sp.mat()).unwrap().frob_norm();
        assert!((flat_norm - log_norm).abs() < 1e-12);
    }

    #[test]
    fn depth_zero_network_reduces_to_the_head() {
        let mut rng = ChaCha8Rng::seed_from_u64(109);
        let config = NetConfig {
            kind: ManifoldKind::Spd,
            dim: 3,
            blocks: vec![],
            kernel: 3,
            head: HeadKind::Invariant,
            templates: 2,
            classes: 2,
        };
        let flat = test_params(&config, &mut rng);
        let view = WeightsView::from_flat(&config, &flat).unwrap();
        let seq = random_spd_seq(1, 4, &mut rng);
        let net_logits = network_forward(&config, &view, &seq).unwrap();
        let head_logits = invariant_head_forward(
            &seq.last_values(),
            &view.templates,
            &view.fc_weight,
            &view.fc_bias,
        )
        .unwrap();
        assert_eq!(net_logits, head_logits);
    }

    #[test]
    fn wrong_parameter_count_is_rejected() {
        let config = NetConfig {
            kind: ManifoldKind::Spd,
            dim: 3,
            blocks: vec![BlockSpec { c_in: 1, c_mid: 2, c_out: 2 }],
            kernel: 2,
            head: HeadKind::Invariant,
            templates: 2,
            classes: 2,
        };
        let flat = vec![1.0; config.param_count() - 1];
        assert!(matches!(WeightsView::from_flat(&config, &flat), Err(Error::Domain(_))));
    }

    #[test]
    fn wrong_input_channels_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(113);
        let config = NetConfig {
            kind: ManifoldKind::Spd,
            dim: 3,
            blocks: vec![BlockSpec { c_in: 2, c_mid: 2, c_out: 2 }],
            kernel: 2,
            head: HeadKind::Invariant,
            templates: 1,
            classes: 2,
        };
        let flat = test_params(&config, &mut rng);
        let view = WeightsView::from_flat(&config, &flat).unwrap();
        let seq = random_spd_seq(1, 4, &mut rng);
        assert!(network_forward(&config, &view, &seq).is_err());
    }
}
