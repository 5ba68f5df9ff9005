//! Year-labeled datasets: synthetic generation, feature-file ingestion, and
//! train/validation/test splitting.
//!
//! The synthetic generator stands in for an external feature extractor. It
//! places each year on a smooth 3-D curve (a helix wound around a sphere, so
//! anchors share one norm and cosine similarity tracks chord distance), lifts
//! the curve into `d_in` dimensions by a fixed random orthogonal map, then
//! adds Gaussian noise and a year-independent nuisance component: every item
//! joins one of a few "distractor" clusters living in an orthogonal subspace.
//! An untrained encoder sees mostly cluster structure; recovering the year
//! ordering is what training has to learn.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{RankError, Result};
use crate::ranking::Vector;

const FEATURE_MAGIC: &[u8; 5] = b"RSFT1";

/// Inclusive year range of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct YearSpan {
    pub min: i32,
    pub max: i32,
}

impl Default for YearSpan {
    fn default() -> Self {
        YearSpan { min: 1930, max: 1999 }
    }
}

impl YearSpan {
    pub fn new(min: i32, max: i32) -> Result<Self> {
        if min > max {
            return Err(RankError::invalid("years", format!("{min} > {max}")));
        }
        Ok(YearSpan { min, max })
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.min..=self.max).contains(&year)
    }

    /// Number of distinct years in the span.
    pub fn len(&self) -> usize {
        (self.max - self.min) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// One dataset item: a feature vector with a year label, plus the embedding
/// an encoder assigned to it (if any).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledItem {
    pub id: u64,
    pub year: i32,
    pub features: Vector,
    pub embedding: Option<Vector>,
}

impl LabeledItem {
    pub fn new(id: u64, year: i32, features: Vector) -> Self {
        LabeledItem {
            id,
            year,
            features,
            embedding: None,
        }
    }
}

/// Parameters of the synthetic dataset.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n_items: usize,
    pub span: YearSpan,
    pub d_in: usize,
    pub noise_sigma: f64,
    /// Dimensions reserved for the year-independent nuisance subspace.
    pub distractor_dims: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_items: 2000,
            span: YearSpan::default(),
            d_in: 32,
            noise_sigma: 0.1,
            distractor_dims: 8,
            seed: 42,
        }
    }
}

// Geometry of the default manifold. The anchor curve is a half-turn spiral
// wound around a sphere of radius MANIFOLD_SCALE: anchors share one norm, and
// with at most half a turn of phase the chord distance between any two
// anchors grows monotonically with their year gap, so global structure
// (not just the local ranking the loss trains) tracks years. Distractor
// clusters are numerous and at least as large as the manifold, so a random
// (untrained) projection finds neighbors by cluster, whose years are
// arbitrary.
const MANIFOLD_SCALE: f64 = 8.0;
const HELIX_TURNS: f64 = 0.5;
const HELIX_Z_AMPLITUDE: f64 = 0.9;
const DISTRACTOR_CLUSTERS: usize = 64;
const DISTRACTOR_SCALE: f64 = 8.0;
const LIFT_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_items < self.span.len() {
            return Err(RankError::invalid(
                "n_items",
                format!(
                    "must be >= span size {} to cover every year, got {}",
                    self.span.len(),
                    self.n_items
                ),
            ));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(RankError::invalid("noise_sigma", "must be >= 0"));
        }
        if self.d_in < 3 + self.distractor_dims {
            return Err(RankError::invalid(
                "d_in",
                format!(
                    "must be >= 3 + distractor_dims = {}, got {}",
                    3 + self.distractor_dims,
                    self.d_in
                ),
            ));
        }
        Ok(())
    }
}

/// Point on the anchor curve for a normalized year position `t` in [0, 1].
fn helix_anchor(t: f64) -> [f64; 3] {
    let theta = HELIX_TURNS * 2.0 * std::f64::consts::PI * t;
    let z = HELIX_Z_AMPLITUDE * (2.0 * t - 1.0);
    let rho = (1.0 - z * z).sqrt();
    [
        MANIFOLD_SCALE * rho * theta.cos(),
        MANIFOLD_SCALE * rho * theta.sin(),
        MANIFOLD_SCALE * z,
    ]
}

/// Gram-Schmidt orthonormal columns drawn from a seeded Gaussian.
fn orthonormal_columns(d: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    while cols.len() < k {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for c in &cols {
            let proj: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi -= proj * ci;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue; // essentially dependent draw, redo
        }
        for vi in &mut v {
            *vi /= norm;
        }
        cols.push(v);
    }
    cols
}

/// Generate a synthetic dataset; deterministic for a given spec.
pub fn generate(spec: &SyntheticSpec) -> Result<Vec<LabeledItem>> {
    spec.validate()?;
    let mut lift_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ LIFT_SEED_OFFSET);
    let lift = orthonormal_columns(spec.d_in, 3 + spec.distractor_dims, &mut lift_rng);
    let (helix_lift, distractor_lift) = lift.split_at(3);
    let cluster_anchors: Vec<Vec<f64>> = (0..DISTRACTOR_CLUSTERS)
        .map(|_| {
            let mut v: Vec<f64> = (0..spec.distractor_dims.max(1))
                .map(|_| lift_rng.sample::<f64, _>(StandardNormal))
                .collect();
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for vi in &mut v {
                *vi *= DISTRACTOR_SCALE / norm;
            }
            v
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let denom = (spec.span.len().max(2) - 1) as f64;
    let mut items = Vec::with_capacity(spec.n_items);
    for id in 0..spec.n_items as u64 {
        let year = rng.random_range(spec.span.min..=spec.span.max);
        let t = f64::from(year - spec.span.min) / denom;
        let anchor = helix_anchor(t);
        let mut features = vec![0.0; spec.d_in];
        for (axis, col) in helix_lift.iter().enumerate() {
            for (f, c) in features.iter_mut().zip(col) {
                *f += anchor[axis] * c;
            }
        }
        if spec.distractor_dims > 0 {
            let cluster = rng.random_range(0..DISTRACTOR_CLUSTERS);
            for (axis, col) in distractor_lift.iter().enumerate() {
                let a = cluster_anchors[cluster][axis];
                for (f, c) in features.iter_mut().zip(col) {
                    *f += a * c;
                }
            }
        }
        if spec.noise_sigma > 0.0 {
            for f in &mut features {
                *f += spec.noise_sigma * rng.sample::<f64, _>(StandardNormal);
            }
        }
        items.push(LabeledItem::new(id, year, Vector::new(features)?));
    }
    Ok(items)
}

/// Write items to the binary feature format (header `RSFT1`, little-endian).
pub fn save_features(items: &[LabeledItem], path: &Path) -> Result<()> {
    let d_in = match items.first() {
        Some(item) => item.features.dim(),
        None => 0,
    };
    let file = File::create(path).map_err(|e| RankError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| RankError::io(path, e);
    w.write_all(FEATURE_MAGIC).map_err(io)?;
    w.write_u32::<LittleEndian>(d_in as u32).map_err(io)?;
    w.write_u32::<LittleEndian>(items.len() as u32).map_err(io)?;
    for item in items {
        if item.features.dim() != d_in {
            return Err(RankError::DimensionMismatch {
                left: d_in,
                right: item.features.dim(),
            });
        }
        w.write_u64::<LittleEndian>(item.id).map_err(io)?;
        w.write_i32::<LittleEndian>(item.year).map_err(io)?;
        for &v in item.features.as_slice() {
            w.write_f64::<LittleEndian>(v).map_err(io)?;
        }
    }
    w.flush().map_err(io)?;
    Ok(())
}

/// Read the binary feature format, validating years against `span` and id
/// uniqueness. Offending items are reported by id.
pub fn load_features(path: &Path, span: YearSpan) -> Result<Vec<LabeledItem>> {
    let file = File::open(path).map_err(|e| RankError::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)
        .map_err(|e| RankError::parse(path, "header", format!("magic: {e}")))?;
    if &magic != FEATURE_MAGIC {
        return Err(RankError::parse(
            path,
            "header",
            format!("bad magic {magic:?}, expected {FEATURE_MAGIC:?}"),
        ));
    }
    let d_in = r
        .read_u32::<LittleEndian>()
        .map_err(|e| RankError::parse(path, "header", format!("d_in: {e}")))? as usize;
    let count = r
        .read_u32::<LittleEndian>()
        .map_err(|e| RankError::parse(path, "header", format!("count: {e}")))? as usize;
    if count > 0 && d_in == 0 {
        return Err(RankError::parse(path, "header", "d_in is 0 with items present"));
    }

    let mut items = Vec::with_capacity(count);
    for rec in 0..count {
        let loc = || format!("record {rec}");
        let id = r
            .read_u64::<LittleEndian>()
            .map_err(|e| RankError::parse(path, loc(), format!("id: {e}")))?;
        let year = r
            .read_i32::<LittleEndian>()
            .map_err(|e| RankError::parse(path, loc(), format!("year: {e}")))?;
        let mut features = vec![0.0; d_in];
        for f in &mut features {
            *f = r
                .read_f64::<LittleEndian>()
                .map_err(|e| RankError::parse(path, loc(), format!("feature: {e}")))?;
        }
        let features = Vector::new(features)
            .map_err(|e| RankError::parse(path, loc(), e.to_string()))?;
        items.push(LabeledItem::new(id, year, features));
    }
    validate_items(&items, span)?;
    Ok(items)
}

/// Write the CSV interchange format (`id,year,f0,...`).
pub fn save_features_csv(items: &[LabeledItem], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| RankError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| RankError::io(path, e);
    let d_in = items.first().map_or(0, |i| i.features.dim());
    let header: Vec<String> = ["id".to_string(), "year".to_string()]
        .into_iter()
        .chain((0..d_in).map(|i| format!("f{i}")))
        .collect();
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for item in items {
        let mut row = format!("{},{}", item.id, item.year);
        for v in item.features.as_slice() {
            row.push(',');
            row.push_str(&v.to_string());
        }
        writeln!(w, "{row}").map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

/// Read the CSV interchange format.
pub fn load_features_csv(path: &Path, span: YearSpan) -> Result<Vec<LabeledItem>> {
    let file = File::open(path).map_err(|e| RankError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| RankError::parse(path, "line 1", "missing header"))?;
    let header = header.map_err(|e| RankError::io(path, e))?;
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    if cols.len() < 3 || cols[0] != "id" || cols[1] != "year" {
        return Err(RankError::parse(
            path,
            "line 1",
            "expected header id,year,f0,...",
        ));
    }
    let d_in = cols.len() - 2;
    for (i, c) in cols[2..].iter().enumerate() {
        if *c != format!("f{i}") {
            return Err(RankError::parse(
                path,
                "line 1",
                format!("expected column f{i}, got {c:?}"),
            ));
        }
    }

    let mut items = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| RankError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let loc = || format!("line {}", idx + 1);
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != d_in + 2 {
            return Err(RankError::parse(
                path,
                loc(),
                format!("expected {} fields, got {}", d_in + 2, fields.len()),
            ));
        }
        let id: u64 = fields[0]
            .parse()
            .map_err(|e| RankError::parse(path, loc(), format!("id: {e}")))?;
        let year: i32 = fields[1]
            .parse()
            .map_err(|e| RankError::parse(path, loc(), format!("year: {e}")))?;
        let mut features = Vec::with_capacity(d_in);
        for f in &fields[2..] {
            features.push(
                f.parse::<f64>()
                    .map_err(|e| RankError::parse(path, loc(), format!("feature: {e}")))?,
            );
        }
        let features =
            Vector::new(features).map_err(|e| RankError::parse(path, loc(), e.to_string()))?;
        items.push(LabeledItem::new(id, year, features));
    }
    validate_items(&items, span)?;
    Ok(items)
}

fn validate_items(items: &[LabeledItem], span: YearSpan) -> Result<()> {
    let offenders: Vec<String> = items
        .iter()
        .filter(|i| !span.contains(i.year))
        .map(|i| format!("id {} (year {})", i.id, i.year))
        .collect();
    if !offenders.is_empty() {
        return Err(RankError::Validation(format!(
            "{} item(s) outside span {}..={}: {}",
            offenders.len(),
            span.min,
            span.max,
            offenders.join(", ")
        )));
    }
    let mut ids: Vec<u64> = items.iter().map(|i| i.id).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(RankError::Validation(format!("duplicate item id {}", w[0])));
    }
    if let Some(first) = items.first() {
        let d = first.features.dim();
        if let Some(bad) = items.iter().find(|i| i.features.dim() != d) {
            return Err(RankError::Validation(format!(
                "item id {} has dimension {}, expected {}",
                bad.id,
                bad.features.dim(),
                d
            )));
        }
    }
    Ok(())
}

/// Split into disjoint (train, val, test) sets.
///
/// Unbalanced mode assigns `floor(fraction * n)` shuffled items to each part.
/// Balanced mode draws an equal per-year count into val and test (the
/// per-year count is `floor(fraction * n / n_years)`) and sends everything
/// left to train; it fails loudly if some year is too rare.
pub fn split(
    items: &[LabeledItem],
    fractions: (f64, f64, f64),
    seed: u64,
    balanced: bool,
) -> Result<(Vec<LabeledItem>, Vec<LabeledItem>, Vec<LabeledItem>)> {
    let (f_train, f_val, f_test) = fractions;
    for (name, f) in [("train", f_train), ("val", f_val), ("test", f_test)] {
        if !f.is_finite() || f < 0.0 {
            return Err(RankError::invalid(
                "fractions",
                format!("{name} fraction must be >= 0, got {f}"),
            ));
        }
    }
    if f_train + f_val + f_test > 1.0 + 1e-12 {
        return Err(RankError::invalid("fractions", "must sum to <= 1"));
    }
    if items.is_empty() {
        return Err(RankError::Empty("items"));
    }
    let n = items.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    if balanced {
        let years: Vec<i32> = {
            let mut y: Vec<i32> = items.iter().map(|i| i.year).collect();
            y.sort_unstable();
            y.dedup();
            y
        };
        let per_year_val = (f_val * n as f64 / years.len() as f64).floor() as usize;
        let per_year_test = (f_test * n as f64 / years.len() as f64).floor() as usize;
        let mut by_year: HashMap<i32, Vec<usize>> = HashMap::new();
        for (idx, item) in items.iter().enumerate() {
            by_year.entry(item.year).or_default().push(idx);
        }
        let mut val = Vec::new();
        let mut test = Vec::new();
        let mut train = Vec::new();
        for &year in &years {
            let mut idxs = by_year.remove(&year).unwrap_or_default();
            if idxs.len() < per_year_val + per_year_test {
                return Err(RankError::BalancedSplitInfeasible {
                    year,
                    available: idxs.len(),
                    needed: per_year_val + per_year_test,
                });
            }
            idxs.shuffle(&mut rng);
            for (k, idx) in idxs.into_iter().enumerate() {
                if k < per_year_val {
                    val.push(items[idx].clone());
                } else if k < per_year_val + per_year_test {
                    test.push(items[idx].clone());
                } else {
                    train.push(items[idx].clone());
                }
            }
        }
        return Ok((train, val, test));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_train = (f_train * n as f64).floor() as usize;
    let n_val = (f_val * n as f64).floor() as usize;
    let n_test = (f_test * n as f64).floor() as usize;
    let train = order[..n_train].iter().map(|&i| items[i].clone()).collect();
    let val = order[n_train..n_train + n_val]
        .iter()
        .map(|&i| items[i].clone())
        .collect();
    let test = order[n_train + n_val..n_train + n_val + n_test]
        .iter()
        .map(|&i| items[i].clone())
        .collect();
    Ok((train, val, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("ranksmith-data-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn noiseless_equal_years_have_identical_features() {
        let spec = SyntheticSpec {
            n_items: 200,
            noise_sigma: 0.0,
            distractor_dims: 0,
            ..SyntheticSpec::default()
        };
        let items = generate(&spec).unwrap();
        let mut by_year: HashMap<i32, &LabeledItem> = HashMap::new();
        for item in &items {
            if let Some(prev) = by_year.get(&item.year) {
                assert_eq!(prev.features, item.features, "year {}", item.year);
            } else {
                by_year.insert(item.year, item);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticSpec {
            n_items: 300,
            ..SyntheticSpec::default()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn year_histogram_is_uniform_chi_square() {
        let items = generate(&SyntheticSpec::default()).unwrap();
        let span = YearSpan::default();
        let mut counts = vec![0f64; span.len()];
        for item in &items {
            counts[(item.year - span.min) as usize] += 1.0;
        }
        let expected = items.len() as f64 / span.len() as f64;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // chi-square critical value at p = 0.01 with 69 degrees of freedom
        assert!(chi2 < 99.227, "chi2 = {chi2}");
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = SyntheticSpec::default();
        spec.n_items = 10; // smaller than the 70-year span
        assert!(generate(&spec).is_err());
        let mut spec = SyntheticSpec::default();
        spec.d_in = 8; // 3 + 8 distractor dims don't fit
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn binary_roundtrip_is_exact() {
        let spec = SyntheticSpec {
            n_items: 120,
            span: YearSpan::new(1930, 1959).unwrap(),
            ..SyntheticSpec::default()
        };
        let items = generate(&spec).unwrap();
        let path = tmp("roundtrip.rsft");
        save_features(&items, &path).unwrap();
        let loaded = load_features(&path, spec.span).unwrap();
        assert_eq!(items, loaded);
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let spec = SyntheticSpec {
            n_items: 80,
            span: YearSpan::new(1950, 1969).unwrap(),
            d_in: 12,
            distractor_dims: 2,
            ..SyntheticSpec::default()
        };
        let items = generate(&spec).unwrap();
        let path = tmp("roundtrip.csv");
        save_features_csv(&items, &path).unwrap();
        let loaded = load_features_csv(&path, spec.span).unwrap();
        assert_eq!(items, loaded);
    }

    #[test]
    fn empty_file_with_zero_count_loads_empty() {
        let path = tmp("empty.rsft");
        save_features(&[], &path).unwrap();
        let loaded = load_features(&path, YearSpan::default()).unwrap();
        assert!(loaded.is_empty());
    }

    #[test]
    fn out_of_span_year_names_offender() {
        let items = vec![
            LabeledItem::new(0, 1950, Vector::new(vec![1.0]).unwrap()),
            LabeledItem::new(17, 2100, Vector::new(vec![2.0]).unwrap()),
        ];
        let path = tmp("badyear.rsft");
        save_features(&items, &path).unwrap();
        let err = load_features(&path, YearSpan::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("id 17") && msg.contains("2100"), "{msg}");
    }

    #[test]
    fn truncated_file_reports_record() {
        let path = tmp("truncated.rsft");
        let items = vec![
            LabeledItem::new(0, 1950, Vector::new(vec![1.0, 2.0]).unwrap()),
            LabeledItem::new(1, 1951, Vector::new(vec![3.0, 4.0]).unwrap()),
        ];
        save_features(&items, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 7]).unwrap();
        let err = load_features(&path, YearSpan::default()).unwrap_err();
        assert!(matches!(err, RankError::Parse { .. }), "{err}");
        assert!(err.to_string().contains("record 1"), "{err}");
    }

    #[test]
    fn bad_magic_is_parse_error() {
        let path = tmp("badmagic.rsft");
        std::fs::write(&path, b"NOPE!rest").unwrap();
        assert!(matches!(
            load_features(&path, YearSpan::default()),
            Err(RankError::Parse { .. })
        ));
    }

    fn small_items(n: usize, span: YearSpan) -> Vec<LabeledItem> {
        let spec = SyntheticSpec {
            n_items: n,
            span,
            d_in: 8,
            distractor_dims: 1,
            noise_sigma: 0.05,
            seed: 5,
        };
        generate(&spec).unwrap()
    }

    #[test]
    fn everything_in_train() {
        let items = small_items(100, YearSpan::new(1950, 1959).unwrap());
        let (train, val, test) = split(&items, (1.0, 0.0, 0.0), 3, false).unwrap();
        assert_eq!(train.len(), 100);
        assert!(val.is_empty() && test.is_empty());
    }

    #[test]
    fn splits_are_disjoint_and_deterministic() {
        let items = small_items(200, YearSpan::new(1930, 1949).unwrap());
        let (tr1, v1, te1) = split(&items, (0.6, 0.2, 0.2), 11, false).unwrap();
        let (tr2, v2, te2) = split(&items, (0.6, 0.2, 0.2), 11, false).unwrap();
        assert_eq!(tr1, tr2);
        assert_eq!(v1, v2);
        assert_eq!(te1, te2);
        let mut seen = HashSet::new();
        for item in tr1.iter().chain(&v1).chain(&te1) {
            assert!(seen.insert(item.id), "id {} in two parts", item.id);
        }
    }

    #[test]
    fn balanced_test_counts_per_year() {
        let span = YearSpan::default();
        let items = small_items(2000, span);
        // 0.07 * 2000 / 70 years = 2 per year
        let (train, val, test) = split(&items, (0.93, 0.0, 0.07), 7, true).unwrap();
        assert_eq!(test.len(), 2 * span.len());
        assert!(val.is_empty());
        assert_eq!(train.len(), 2000 - test.len());
        let mut counts: HashMap<i32, usize> = HashMap::new();
        for item in &test {
            *counts.entry(item.year).or_default() += 1;
        }
        assert!(counts.values().all(|&c| c == 2));
    }

    #[test]
    fn balanced_split_names_rare_year() {
        let mut items = small_items(100, YearSpan::new(1950, 1951).unwrap());
        items.retain(|i| i.year != 1951 || i.id % 50 == 0); // make 1951 rare
        let err = split(&items, (0.0, 0.0, 0.9), 7, true).unwrap_err();
        match err {
            RankError::BalancedSplitInfeasible { year, .. } => assert_eq!(year, 1951),
            other => panic!("unexpected error {other}"),
        }
    }
}
