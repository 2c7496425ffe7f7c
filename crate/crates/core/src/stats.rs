//! Two-group comparison by permutation testing on fitted model distance.
//!
//! Both groups of sequences are assumed exchangeable under the null
//! hypothesis that one dynamical model explains them all. The procedure:
//!
//! 1. Pretrain one next-step model on the union of both groups (the shared
//!    checkpoint).
//! 2. Fine-tune the shared checkpoint separately on group A and on group B;
//!    the observed statistic is the distance between the two fitted
//!    parameter vectors.
//! 3. For each permutation, reassign the pooled sequences to two
//!    pseudo-groups of the original sizes, fine-tune the same shared
//!    checkpoint on each, and record the distance.
//! 4. The p-value is `(1 + #{null >= observed}) / (1 + n_permutations)`,
//!    which is exact for exchangeable data and never returns zero.
//!
//! Every permutation derives its own seeds from the master seed up front,
//! so results are identical whether permutations run on one thread or many.
//!
//! The distance between two fitted models compares Frechet-mean weight
//! groups by their normalized weights (raw magnitudes are not identified:
//! scaling a whole group changes nothing), and the final linear map by its
//! raw entries.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::net::{ManifoldSequence, NetConfig};
use crate::train::{train_group_model, GroupTrainReport, ModelParams, SgdConfig};

/// Histogram bins in the null-distribution summary.
pub const HISTOGRAM_BINS: usize = 30;

#[derive(Clone, Copy, Debug)]
pub struct PermutationConfig {
    pub n_permutations: usize,
    /// Significance level reported alongside the p-value.
    pub alpha: f64,
    /// Master seed; every shuffle and fine-tune seed derives from it.
    pub seed: u64,
    /// Worker threads for the permutation loop (1 = serial). The result is
    /// independent of this setting.
    pub threads: usize,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        PermutationConfig { n_permutations: 200, alpha: 0.05, seed: 0, threads: 1 }
    }
}

impl PermutationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_permutations == 0 {
            return Err(Error::domain("need at least one permutation"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if self.threads == 0 {
            return Err(Error::domain("threads must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GroupTestResult {
    /// Observed model distance between the two group fits.
    pub sigma: f64,
    pub p_value: f64,
    /// Null statistics, one per permutation, in permutation order.
    pub null_sigmas: Vec<f64>,
    /// Master seed of each permutation, aligned with `null_sigmas`.
    pub permutation_seeds: Vec<u64>,
    pub n_permutations: usize,
    pub alpha: f64,
    /// Loss history of the shared pretraining run.
    pub pretrain_losses: Vec<f64>,
}

impl GroupTestResult {
    pub fn significant(&self) -> bool {
        self.p_value <= self.alpha
    }

    /// Null distribution as a histogram CSV; see [`null_histogram_csv`].
    pub fn histogram_csv(&self) -> String {
        null_histogram_csv(&self.null_sigmas, self.sigma, HISTOGRAM_BINS)
    }

    /// Per-permutation results as CSV: one `index,seed,sigma_hat` row per
    /// permutation in order, then one `summary,<sigma>,<p_value>` row.
    /// Floats print in shortest round-trip form, so equal runs produce
    /// byte-identical output.
    pub fn results_csv(&self) -> String {
        let mut csv = String::from("index,seed,sigma_hat\n");
        for (i, (seed, s)) in self.permutation_seeds.iter().zip(&self.null_sigmas).enumerate() {
            csv.push_str(&format!("{i},{seed},{s}\n"));
        }
        csv.push_str(&format!("summary,{},{}\n", self.sigma, self.p_value));
        csv
    }
}

/// Euclidean distance between two fitted parameter vectors under the
/// identified parameterization: Frechet-mean weight groups enter by their
/// normalized weights, linear-map groups by raw value. The two layouts
/// must match exactly.
pub fn model_distance(a: &ModelParams, b: &ModelParams) -> Result<f64> {
    if a.index() != b.index() {
        return Err(Error::domain("cannot compare models with different parameter layouts"));
    }
    let mut sum = 0.0;
    for (name, off, len) in a.index() {
        let va = &a.values()[*off..*off + *len];
        let vb = &b.values()[*off..*off + *len];
        if ModelParams::is_weight_group(name) {
            let na = normalized_weights(va);
            let nb = normalized_weights(vb);
            for (x, y) in na.iter().zip(&nb) {
                sum += (x - y) * (x - y);
            }
        } else {
            for (x, y) in va.iter().zip(vb) {
                sum += (x - y) * (x - y);
            }
        }
    }
    Ok(sum.sqrt())
}

fn normalized_weights(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().map(|r| r * r).sum();
    raw.iter().map(|r| r * r / total).collect()
}

fn check_groups(config: &NetConfig, a: &[ManifoldSequence], b: &[ManifoldSequence]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("both groups need at least one sequence"));
    }
    for seq in a.iter().chain(b) {
        if seq.kind() != config.kind || seq.dim() != config.dim {
            return Err(Error::domain("sequence manifold does not match the model"));
        }
        if seq.len() < 2 {
            return Err(Error::domain("next-step fitting needs sequences of length >= 2"));
        }
    }
    Ok(())
}

/// Fine-tunes the shared checkpoint on one set of sequences and returns the
/// fitted parameters.
fn fit_group(
    config: &NetConfig,
    seqs: &[&ManifoldSequence],
    sgd: &SgdConfig,
    start: &ModelParams,
) -> Result<ModelParams> {
    let owned: Vec<ManifoldSequence> = seqs.iter().map(|s| (*s).clone()).collect();
    let (params, _) = train_group_model(config, &owned, sgd, start)?;
    Ok(params)
}

/// Runs the full two-group permutation test. `pretrain` controls the shared
/// fit on the union; `finetune` controls every per-group fit (its seed is
/// replaced by derived seeds inside the permutation loop).
pub fn permutation_test(
    config: &NetConfig,
    group_a: &[ManifoldSequence],
    group_b: &[ManifoldSequence],
    pretrain: &SgdConfig,
    finetune: &SgdConfig,
    perm: &PermutationConfig,
) -> Result<GroupTestResult> {
    config.validate()?;
    pretrain.validate()?;
    finetune.validate()?;
    perm.validate()?;
    check_groups(config, group_a, group_b)?;

    // Shared checkpoint: one model for the pooled data.
    let union: Vec<ManifoldSequence> = group_a.iter().chain(group_b).cloned().collect();
    let init = ModelParams::init(config, pretrain.seed);
    let (shared, pretrain_report): (ModelParams, GroupTrainReport) =
        train_group_model(config, &union, pretrain, &init)?;

    // Observed statistic: group fits from the shared checkpoint.
    let refs_a: Vec<&ManifoldSequence> = group_a.iter().collect();
    let refs_b: Vec<&ManifoldSequence> = group_b.iter().collect();
    let observed_sgd = SgdConfig { seed: finetune.seed, ..*finetune };
    let theta_a = fit_group(config, &refs_a, &observed_sgd, &shared)?;
    let theta_b = fit_group(config, &refs_b, &observed_sgd, &shared)?;
    let sigma = model_distance(&theta_a, &theta_b)?;

    // Derive all per-permutation seeds up front so the loop order (and
    // thread count) cannot influence any individual permutation.
    let mut seed_rng = ChaCha8Rng::seed_from_u64(perm.seed);
    let seeds: Vec<u64> = (0..perm.n_permutations).map(|_| seed_rng.random()).collect();
    let jobs: Vec<(usize, u64)> = seeds.iter().copied().enumerate().collect();

    let pooled: Vec<&ManifoldSequence> = group_a.iter().chain(group_b).collect();
    let n_a = group_a.len();
    let one_null = |&(i, seed): &(usize, u64)| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx: Vec<usize> = (0..pooled.len()).collect();
        idx.shuffle(&mut rng);
        let fit_seed: u64 = rng.random();
        let run = || -> Result<f64> {
            let pseudo_a: Vec<&ManifoldSequence> = idx[..n_a].iter().map(|&j| pooled[j]).collect();
            let pseudo_b: Vec<&ManifoldSequence> = idx[n_a..].iter().map(|&j| pooled[j]).collect();
            let sgd = SgdConfig { seed: fit_seed, ..*finetune };
            let ta = fit_group(config, &pseudo_a, &sgd, &shared)?;
            let tb = fit_group(config, &pseudo_b, &sgd, &shared)?;
            model_distance(&ta, &tb)
        };
        run().map_err(|e| Error::numerical(format!("permutation {i} failed: {e}")))
    };

    let null_sigmas: Vec<f64> = if perm.threads > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(perm.threads)
            .build()
            .map_err(|e| Error::numerical(format!("cannot build thread pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(one_null).collect::<Result<Vec<f64>>>())?
    } else {
        jobs.iter().map(one_null).collect::<Result<Vec<f64>>>()?
    };

    let exceed = null_sigmas.iter().filter(|&&s| s >= sigma).count();
    let p_value = (1 + exceed) as f64 / (1 + perm.n_permutations) as f64;
    Ok(GroupTestResult {
        sigma,
        p_value,
        null_sigmas,
        permutation_seeds: seeds,
        n_permutations: perm.n_permutations,
        alpha: perm.alpha,
        pretrain_losses: pretrain_report.losses,
    })
}

/// Histogram of the null distribution as CSV with columns
/// `bin_start,bin_end,count,observed`; the `observed` column is 1 for the
/// bin containing the observed statistic (clamped to the first or last bin
/// when it falls outside the null range). A degenerate range (all values
/// equal) widens to unit width so the output always has `bins` rows.
pub fn null_histogram_csv(null: &[f64], observed: f64, bins: usize) -> String {
    assert!(bins >= 1);
    let mut lo = observed;
    let mut hi = observed;
    for &s in null {
        lo = lo.min(s);
        hi = hi.max(s);
    }
    if !(hi - lo).is_normal() {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / bins as f64;
    let bin_of = |x: f64| -> usize { (((x - lo) / width) as usize).min(bins - 1) };
    let mut counts = vec![0usize; bins];
    for &s in null {
        counts[bin_of(s)] += 1;
    }
    let observed_bin = bin_of(observed);
    let mut csv = String::from("bin_start,bin_end,count,observed\n");
    for (i, c) in counts.iter().enumerate() {
        let start = lo + i as f64 * width;
        let end = lo + (i + 1) as f64 * width;
        let marker = if i == observed_bin { 1 } else { 0 };
        csv.push_str(&format!("{start:.12e},{end:.12e},{c},{marker}\n"));
    }
    csv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{sample, ManifoldKind, Point, SpdPoint};
    use crate::net::{BlockSpec, HeadKind};

    fn tiny_config() -> NetConfig {
        NetConfig {
            kind: ManifoldKind::Spd,
            dim: 3,
            blocks: vec![BlockSpec { c_in: 1, c_mid: 1, c_out: 1 }],
            kernel: 2,
            head: HeadKind::Invariant,
            templates: 1,
            classes: 2,
        }
    }

    /// Rotating sequence: each step conjugates by a plane rotation of the
    /// given angle, so the angle is the group signal.
    fn rotating_seq(rate: f64, len: usize, rng: &mut ChaCha8Rng) -> ManifoldSequence {
        let rot = sample::plane_rotation(3, 0, 1, rate);
        let mut x = sample::random_spd(3, rng, 0.8, 2.5).into_mat();
        let mut points = Vec::with_capacity(len);
        for _ in 0..len {
            points.push(Point::Spd(SpdPoint::new(x.clone()).unwrap()));
            x = rot.matmul(&x).matmul(&rot.transpose()).sym_part();
        }
        ManifoldSequence::new(ManifoldKind::Spd, 3, 1, len, points).unwrap()
    }

    fn group(rate: f64, n: usize, len: usize, seed: u64) -> Vec<ManifoldSequence> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rotating_seq(rate, len, &mut rng)).collect()
    }

    fn quick_sgd(epochs: usize, seed: u64) -> SgdConfig {
        SgdConfig { lr: 0.05, momentum: 0.9, epochs, batch_size: 1, seed }
    }

    #[test]
    fn model_distance_ignores_weight_rescaling() {
        let config = tiny_config();
        let a = ModelParams::init(&config, 3);
        let mut b = a.clone();
        // Rescale every raw weight group by a different nonzero factor.
        let groups: Vec<(usize, usize)> = b
            .index()
            .iter()
            .filter(|(n, _, _)| ModelParams::is_weight_group(n))
            .map(|&(_, o, l)| (o, l))
            .collect();
        for (k, (off, len)) in groups.into_iter().enumerate() {
            let factor = if k % 2 == 0 { -2.5 } else { 0.3 };
            for v in &mut b.values_mut()[off..off + len] {
                *v *= factor;
            }
        }
        let d = model_distance(&a, &b).unwrap();
        assert!(d <= 1e-12, "distance {d} after pure rescaling");
    }

    #[test]
    fn model_distance_sees_linear_map_shifts() {
        let config = tiny_config();
        let a = ModelParams::init(&config, 3);
        let mut b = a.clone();
        let (_, off, _) =
            *b.index().iter().find(|(n, _, _)| n == "head.fc.bias").unwrap();
        b.values_mut()[off] += 1.0;
        let d = model_distance(&a, &b).unwrap();
        assert!((d - 1.0).abs() <= 1e-12, "distance {d} after unit shift");
    }

    #[test]
    fn model_distance_rejects_mismatched_layouts() {
        let a = ModelParams::init(&tiny_config(), 3);
        let other = NetConfig { templates: 2, ..tiny_config() };
        let b = ModelParams::init(&other, 3);
        assert!(model_distance(&a, &b).is_err());
    }

    #[test]
    fn identical_groups_give_zero_sigma_and_p_one() {
        let config = tiny_config();
        let seqs = group(0.3, 2, 4, 60);
        let perm = PermutationConfig { n_permutations: 5, seed: 9, ..Default::default() };
        let result = permutation_test(
            &config,
            &seqs,
            &seqs,
            &quick_sgd(1, 1),
            &quick_sgd(1, 2),
            &perm,
        )
        .unwrap();
        assert_eq!(result.sigma, 0.0);
        assert_eq!(result.p_value, 1.0);
        assert!(!result.significant());

        // One seeded row per permutation, then the summary row.
        let csv = result.results_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 5 + 1);
        assert_eq!(lines[0], "index,seed,sigma_hat");
        assert!(lines[1].starts_with("0,"));
        assert_eq!(lines[6], "summary,0,1");
        assert_eq!(result.permutation_seeds.len(), 5);
    }

    #[test]
    fn distinct_dynamics_yield_small_p_value() {
        let config = tiny_config();
        let a = group(0.1, 4, 6, 61);
        let b = group(1.0, 4, 6, 62);
        let perm = PermutationConfig { n_permutations: 19, seed: 10, ..Default::default() };
        let result =
            permutation_test(&config, &a, &b, &quick_sgd(2, 3), &quick_sgd(2, 4), &perm)
                .unwrap();
        assert_eq!(result.null_sigmas.len(), 19);
        assert!(result.sigma > 0.0);
        assert!(
            result.p_value <= 0.1,
            "p = {} with sigma {} vs null max {:?}",
            result.p_value,
            result.sigma,
            result.null_sigmas.iter().cloned().fold(0.0f64, f64::max)
        );
    }

    #[test]
    fn permutation_test_is_deterministic_in_the_seed() {
        let config = tiny_config();
        let a = group(0.2, 2, 4, 63);
        let b = group(0.6, 2, 4, 64);
        let perm = PermutationConfig { n_permutations: 4, seed: 11, ..Default::default() };
        let r1 = permutation_test(&config, &a, &b, &quick_sgd(1, 5), &quick_sgd(1, 6), &perm)
            .unwrap();
        let r2 = permutation_test(&config, &a, &b, &quick_sgd(1, 5), &quick_sgd(1, 6), &perm)
            .unwrap();
        assert_eq!(r1.sigma.to_bits(), r2.sigma.to_bits());
        for (x, y) in r1.null_sigmas.iter().zip(&r2.null_sigmas) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let other = PermutationConfig { seed: 12, ..perm };
        let r3 = permutation_test(&config, &a, &b, &quick_sgd(1, 5), &quick_sgd(1, 6), &other)
            .unwrap();
        assert!(r1.null_sigmas.iter().zip(&r3.null_sigmas).any(|(x, y)| x != y));
    }

    #[test]
    fn threaded_and_serial_permutations_agree() {
        let config = tiny_config();
        let a = group(0.2, 2, 4, 65);
        let b = group(0.6, 2, 4, 66);
        let serial = PermutationConfig { n_permutations: 4, seed: 13, ..Default::default() };
        let threaded = PermutationConfig { threads: 3, ..serial };
        let r1 = permutation_test(&config, &a, &b, &quick_sgd(1, 7), &quick_sgd(1, 8), &serial)
            .unwrap();
        let r2 =
            permutation_test(&config, &a, &b, &quick_sgd(1, 7), &quick_sgd(1, 8), &threaded)
                .unwrap();
        for (x, y) in r1.null_sigmas.iter().zip(&r2.null_sigmas) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn histogram_has_requested_bins_and_marks_observed() {
        let null: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let csv = null_histogram_csv(&null, 0.55, 30);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 31);
        assert_eq!(lines[0], "bin_start,bin_end,count,observed");
        let marked: Vec<&&str> = lines[1..].iter().filter(|l| l.ends_with(",1")).collect();
        assert_eq!(marked.len(), 1);
        let total: usize = lines[1..]
            .iter()
            .map(|l| l.split(',').nth(2).unwrap().parse::<usize>().unwrap())
            .sum();
        assert_eq!(total, 100);
    }

    #[test]
    fn histogram_handles_all_equal_values() {
        let null = vec![0.5; 10];
        let csv = null_histogram_csv(&null, 0.5, 30);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 31);
        // All mass in the first bin, which also carries the marker.
        assert!(lines[1].ends_with(",10,1"), "first bin line: {}", lines[1]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad_n = PermutationConfig { n_permutations: 0, ..Default::default() };
        assert!(bad_n.validate().is_err());
        let bad_alpha = PermutationConfig { alpha: 1.0, ..Default::default() };
        assert!(bad_alpha.validate().is_err());
        let config = tiny_config();
        let a = group(0.2, 2, 4, 67);
        let perm = PermutationConfig::default();
        let empty: Vec<ManifoldSequence> = Vec::new();
        assert!(permutation_test(
            &config,
            &a,
            &empty,
            &quick_sgd(1, 1),
            &quick_sgd(1, 1),
            &perm
        )
        .is_err());
    }
}
