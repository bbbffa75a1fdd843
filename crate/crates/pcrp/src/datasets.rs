//! Synthetic 2-D Gaussian cluster generators and CSV point-set I/O.
//!
//! Three generator archetypes are provided: a dense knot of tight clusters
//! surrounded by broad ones (`gen_multiscale`), a mix of clusters at exactly
//! two scales spread over the plane (`gen_two_scale`), and clusters centered
//! on a square lattice (`gen_grid`).
//!
//! CSV format: UTF-8 with header `id,x0,x1[,label]` (one `x{d}` column per
//! coordinate, label column optional).

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A point set, optional ground-truth labels, and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub points: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
    pub meta: DatasetMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    /// Generator name with parameters, or the source path for loaded files.
    pub source: String,
    pub seed: Option<u64>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map(|p| p.len()).unwrap_or(0)
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        for (i, p) in self.points.iter().enumerate() {
            if p.len() != d {
                return Err(Error::Input(format!("point {i} has dimension {}", p.len())));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::Input(format!("point {i} has non-finite coordinates")));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.points.len() {
                return Err(Error::Input("label count != point count".into()));
            }
        }
        Ok(())
    }
}

fn sample_cluster<R: Rng>(
    rng: &mut R,
    center: (f64, f64),
    sigma: f64,
    count: usize,
    label: usize,
    points: &mut Vec<Vec<f64>>,
    labels: &mut Vec<usize>,
) {
    for _ in 0..count {
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        points.push(vec![center.0 + sigma * dx, center.1 + sigma * dy]);
        labels.push(label);
    }
}

/// Dense group of tight clusters packed inside one broad-scale ball, next to
/// broad sparse clusters arranged on a surrounding ring.
///
/// The broad scale is sigma = 1; tight clusters have sigma `1/scale_ratio`
/// and centers spread inside the unit disk around the origin. Sparse cluster
/// centers sit on a ring of radius 6 with a seeded phase.
pub fn gen_multiscale(
    n_dense_clusters: usize,
    n_sparse_clusters: usize,
    points_per_cluster: usize,
    scale_ratio: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if n_dense_clusters + n_sparse_clusters == 0 {
        return Err(Error::Input("need at least one cluster".into()));
    }
    if points_per_cluster == 0 {
        return Err(Error::Input("points_per_cluster must be >= 1".into()));
    }
    if !(scale_ratio > 1.0) {
        return Err(Error::Parameter(format!(
            "scale_ratio must exceed 1, got {scale_ratio}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut label = 0usize;

    // Tight-cluster centers: regular polygon of radius 0.9 inside the unit
    // disk, with a small seeded jitter and a random phase.
    let sigma_dense = 1.0 / scale_ratio;
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    for i in 0..n_dense_clusters {
        let angle = phase + std::f64::consts::TAU * i as f64 / n_dense_clusters.max(1) as f64;
        let radius = if n_dense_clusters == 1 { 0.0 } else { 0.9 };
        let jx: f64 = rng.sample::<f64, _>(StandardNormal) * 0.03;
        let jy: f64 = rng.sample::<f64, _>(StandardNormal) * 0.03;
        let center = (radius * angle.cos() + jx, radius * angle.sin() + jy);
        sample_cluster(&mut rng, center, sigma_dense, points_per_cluster, label, &mut points, &mut labels);
        label += 1;
    }

    // Broad clusters: ring of radius 6, random phase.
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    for i in 0..n_sparse_clusters {
        let angle = phase + std::f64::consts::TAU * i as f64 / n_sparse_clusters as f64;
        let center = (6.0 * angle.cos(), 6.0 * angle.sin());
        sample_cluster(&mut rng, center, 1.0, points_per_cluster, label, &mut points, &mut labels);
        label += 1;
    }

    let ds = LabeledDataset {
        points,
        labels: Some(labels),
        meta: DatasetMeta {
            source: format!(
                "multiscale(dense={n_dense_clusters},sparse={n_sparse_clusters},ppc={points_per_cluster},ratio={scale_ratio})"
            ),
            seed: Some(seed),
        },
    };
    ds.validate()?;
    Ok(ds)
}

/// Clusters at exactly two scales, all spread on one ring (tight and broad
/// clusters alternate around it instead of nesting).
pub fn gen_two_scale(
    n_tight_clusters: usize,
    n_broad_clusters: usize,
    points_per_cluster: usize,
    scale_ratio: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if n_tight_clusters + n_broad_clusters == 0 {
        return Err(Error::Input("need at least one cluster".into()));
    }
    if points_per_cluster == 0 {
        return Err(Error::Input("points_per_cluster must be >= 1".into()));
    }
    if !(scale_ratio > 1.0) {
        return Err(Error::Parameter(format!(
            "scale_ratio must exceed 1, got {scale_ratio}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let total = n_tight_clusters + n_broad_clusters;
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let radius = if total == 1 { 0.0 } else { 5.0 };
    for i in 0..total {
        let angle = phase + std::f64::consts::TAU * i as f64 / total as f64;
        let center = (radius * angle.cos(), radius * angle.sin());
        let sigma = if i < n_tight_clusters { 1.0 / scale_ratio } else { 1.0 };
        sample_cluster(&mut rng, center, sigma, points_per_cluster, i, &mut points, &mut labels);
    }
    let ds = LabeledDataset {
        points,
        labels: Some(labels),
        meta: DatasetMeta {
            source: format!(
                "two_scale(tight={n_tight_clusters},broad={n_broad_clusters},ppc={points_per_cluster},ratio={scale_ratio})"
            ),
            seed: Some(seed),
        },
    };
    ds.validate()?;
    Ok(ds)
}

/// `k_per_side^2` unit-sigma Gaussian clusters centered on a square lattice
/// with spacing `spacing_over_sigma`.
pub fn gen_grid(
    k_per_side: usize,
    points_per_cluster: usize,
    spacing_over_sigma: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if k_per_side == 0 {
        return Err(Error::Input("need at least one cluster".into()));
    }
    if points_per_cluster == 0 {
        return Err(Error::Input("points_per_cluster must be >= 1".into()));
    }
    if !(spacing_over_sigma > 0.0) {
        return Err(Error::Parameter("spacing must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut label = 0usize;
    for i in 0..k_per_side {
        for j in 0..k_per_side {
            let center = (i as f64 * spacing_over_sigma, j as f64 * spacing_over_sigma);
            sample_cluster(&mut rng, center, 1.0, points_per_cluster, label, &mut points, &mut labels);
            label += 1;
        }
    }
    let ds = LabeledDataset {
        points,
        labels: Some(labels),
        meta: DatasetMeta {
            source: format!(
                "grid(side={k_per_side},ppc={points_per_cluster},spacing={spacing_over_sigma})"
            ),
            seed: Some(seed),
        },
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes `id,x0,..,x{D-1}[,label]` rows; float formatting is shortest
/// round-trip, so save/load is lossless and byte-deterministic.
pub fn save_csv<P: AsRef<Path>>(dataset: &LabeledDataset, path: P) -> Result<()> {
    dataset.validate()?;
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    let d = dataset.dim();
    let mut header = String::from("id");
    for i in 0..d {
        header.push_str(&format!(",x{i}"));
    }
    if dataset.labels.is_some() {
        header.push_str(",label");
    }
    writeln!(w, "{header}")?;
    for (i, p) in dataset.points.iter().enumerate() {
        let mut row = i.to_string();
        for x in p {
            row.push(',');
            row.push_str(&format!("{x}"));
        }
        if let Some(labels) = &dataset.labels {
            row.push(',');
            row.push_str(&labels[i].to_string());
        }
        writeln!(w, "{row}")?;
    }
    Ok(())
}

/// Returns whether the header of `path` ends with a `label` column.
pub fn csv_has_label_column<P: AsRef<Path>>(path: P) -> Result<bool> {
    let file = std::fs::File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    Ok(header.trim_end().split(',').next_back() == Some("label"))
}

/// Loads a point CSV. With `has_labels` the file must carry a `label`
/// column; without it any label column is ignored.
///
/// Rows with non-finite or unparseable fields are rejected with their
/// 1-based line number.
pub fn load_csv<P: AsRef<Path>>(path: P, has_labels: bool) -> Result<LabeledDataset> {
    let source = path.as_ref().display().to_string();
    let file = std::fs::File::open(path)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);

    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.first() != Some(&"id") {
        return Err(Error::Parse { line: 1, message: "first column must be 'id'".into() });
    }
    let label_col = cols.last() == Some(&"label");
    if has_labels && !label_col {
        return Err(Error::Parse { line: 1, message: "no 'label' column in header".into() });
    }
    let d = cols.len() - 1 - usize::from(label_col);
    for (i, name) in cols[1..1 + d].iter().enumerate() {
        if *name != format!("x{i}") {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected column 'x{i}', found '{name}'"),
            });
        }
    }
    if d == 0 {
        return Err(Error::Parse { line: 1, message: "no coordinate columns".into() });
    }

    let mut points = Vec::new();
    let mut raw_labels: Vec<i64> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        if record.len() != cols.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", cols.len(), record.len()),
            });
        }
        let mut p = Vec::with_capacity(d);
        for raw in record.iter().skip(1).take(d) {
            let x: f64 = raw.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse coordinate '{raw}'"),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite coordinate '{raw}'"),
                });
            }
            p.push(x);
        }
        points.push(p);
        if has_labels {
            let raw = record.get(cols.len() - 1).unwrap_or("");
            let l: i64 = raw.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse label '{raw}'"),
            })?;
            raw_labels.push(l);
        }
    }
    if points.is_empty() {
        return Err(Error::Input("file contains no data rows".into()));
    }
    let labels = if has_labels {
        Some(
            crate::partition::Partition::from_raw_labels(&raw_labels)
                .labels()
                .to_vec(),
        )
    } else {
        None
    };
    let ds = LabeledDataset { points, labels, meta: DatasetMeta { source, seed: None } };
    ds.validate()?;
    Ok(ds)
}
