//! Feature datasets: CSV loading and saving, canonical source-then-target
//! ordering, and synthetic Gaussian-blob PDA/UDA tasks.
//!
//! CSV schema, one row per sample, header required:
//!
//! ```text
//! id,domain,label,f0,f1,...
//! a1,s,2,0.5,1.25,...
//! b7,t,-1,0.1,0.75,...
//! ```
//!
//! `domain` is `s` or `t`; `label` is `-1` for an unlabeled target row.
//! Target rows either all carry labels (kept as evaluation-only ground truth)
//! or all carry `-1`.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    fn tag(self) -> &'static str {
        match self {
            Domain::Source => "s",
            Domain::Target => "t",
        }
    }
}

/// Samples in canonical order: the `n` source rows first, then the `m`
/// target rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub x: Array2<f64>,
    pub domains: Vec<Domain>,
    pub source_labels: Vec<usize>,
    /// Target ground truth, for evaluation only.
    pub target_truth: Option<Vec<usize>>,
    pub class_count: usize,
}

impl Dataset {
    /// Assembles a dataset from separate source and target blocks and checks
    /// its invariants.
    pub fn new(
        ids: Vec<String>,
        x: Array2<f64>,
        source_labels: Vec<usize>,
        target_truth: Option<Vec<usize>>,
        class_count: usize,
    ) -> Result<Self> {
        let n = source_labels.len();
        if n > x.nrows() {
            return Err(Error::Input(format!(
                "{n} source labels for {} samples",
                x.nrows()
            )));
        }
        let m = x.nrows() - n;
        let domains = (0..x.nrows())
            .map(|i| if i < n { Domain::Source } else { Domain::Target })
            .collect();
        let ds = Dataset {
            ids,
            x,
            domains,
            source_labels,
            target_truth,
            class_count,
        };
        if ds.ids.len() != n + m {
            return Err(Error::Input(format!(
                "{} ids for {} samples",
                ds.ids.len(),
                n + m
            )));
        }
        if let Some(t) = &ds.target_truth {
            if t.len() != m {
                return Err(Error::Input(format!("{} target labels for {m} targets", t.len())));
            }
        }
        ds.check_labels()?;
        Ok(ds)
    }

    fn check_labels(&self) -> Result<()> {
        let c = self.class_count;
        if c == 0 {
            return Err(Error::Input("class count must be at least 1".into()));
        }
        let all = self
            .source_labels
            .iter()
            .chain(self.target_truth.iter().flatten());
        if let Some(bad) = all.copied().find(|&l| l >= c) {
            return Err(Error::Input(format!(
                "label {bad} outside [0, {c}); raise the class count"
            )));
        }
        Ok(())
    }

    pub fn n_source(&self) -> usize {
        self.source_labels.len()
    }

    pub fn n_target(&self) -> usize {
        self.x.nrows() - self.n_source()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn source_features(&self) -> ArrayView2<'_, f64> {
        self.x.slice(s![..self.n_source(), ..])
    }

    pub fn target_features(&self) -> ArrayView2<'_, f64> {
        self.x.slice(s![self.n_source().., ..])
    }

    pub fn target_ids(&self) -> &[String] {
        &self.ids[self.n_source()..]
    }

    /// Overrides the inferred class count. Must cover every observed label.
    pub fn with_class_count(mut self, class_count: usize) -> Result<Self> {
        self.class_count = class_count;
        self.check_labels()?;
        Ok(self)
    }
}

/// Reads a dataset CSV and reorders it to source-then-target (stable within
/// each block; original ids are kept in [`Dataset::ids`]).
///
/// The class count is `1 + max label` over source labels and target truth.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, path)
}

fn read_dataset(reader: impl std::io::Read, path: &Path) -> Result<Dataset> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 4 || cols[..3] != ["id", "domain", "label"] {
        return Err(parse_err(
            1,
            "header must be id,domain,label,f0,... with at least one feature".into(),
        ));
    }
    for (k, name) in cols[3..].iter().enumerate() {
        if *name != format!("f{k}") {
            return Err(parse_err(1, format!("feature column {k} is named {name:?}, expected f{k}")));
        }
    }
    let d = cols.len() - 3;

    struct Row {
        id: String,
        domain: Domain,
        label: Option<usize>,
        line: u64,
        features: Vec<f64>,
    }

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let data_row = rows.len() + 1;
        if record.len() != d + 3 {
            return Err(parse_err(
                line,
                format!(
                    "data row {data_row} has {} fields, expected {} ({d} features)",
                    record.len(),
                    d + 3
                ),
            ));
        }
        let domain = match &record[1] {
            "s" => Domain::Source,
            "t" => Domain::Target,
            other => {
                return Err(parse_err(line, format!("unknown domain tag {other:?} (expected s or t)")))
            }
        };
        let raw: i64 = record[2]
            .parse()
            .map_err(|_| parse_err(line, format!("invalid label {:?}", &record[2])))?;
        let label = match raw {
            -1 => None,
            l if l >= 0 => Some(l as usize),
            l => return Err(parse_err(line, format!("invalid label {l}"))),
        };
        if domain == Domain::Source && label.is_none() {
            return Err(parse_err(line, "source row without a label".into()));
        }
        let features = record
            .iter()
            .skip(3)
            .map(|v| match v.parse::<f64>() {
                Ok(f) if f.is_finite() => Ok(f),
                _ => Err(parse_err(line, format!("invalid feature value {v:?} in data row {data_row}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(Row {
            id: record[0].to_string(),
            domain,
            label,
            line,
            features,
        });
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }

    // Target rows must be uniformly labeled or uniformly unlabeled; the first
    // target row decides.
    let mut targets = rows.iter().filter(|r| r.domain == Domain::Target);
    if let Some(first) = targets.next() {
        let labeled = first.label.is_some();
        if let Some(bad) = targets.find(|r| r.label.is_some() != labeled) {
            let msg = if labeled {
                "target row without a label while earlier target rows are labeled"
            } else {
                "target row with a label while target labels are declared absent (-1)"
            };
            return Err(parse_err(bad.line, msg.into()));
        }
    }

    let (src, tgt): (Vec<Row>, Vec<Row>) = rows.into_iter().partition(|r| r.domain == Domain::Source);
    let n = src.len();
    let total = n + tgt.len();
    let mut x = Array2::zeros((total, d));
    let mut ids = Vec::with_capacity(total);
    for (i, r) in src.iter().chain(tgt.iter()).enumerate() {
        x.row_mut(i).assign(&Array1::from(r.features.clone()));
        ids.push(r.id.clone());
    }
    let source_labels: Vec<usize> = src.iter().map(|r| r.label.unwrap_or(0)).collect();
    let target_truth = match tgt.first() {
        Some(r) if r.label.is_some() => Some(tgt.iter().filter_map(|r| r.label).collect()),
        _ => None,
    };
    let class_count = source_labels
        .iter()
        .chain(target_truth.iter().flatten())
        .max()
        .map_or(1, |l| l + 1);
    Dataset::new(ids, x, source_labels, target_truth, class_count)
}

/// Writes `ds` in the dataset CSV schema. Values use the shortest decimal
/// form that parses back to the same `f64`.
pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_atomically(path, |w| {
        write!(w, "id,domain,label")?;
        for k in 0..ds.dim() {
            write!(w, ",f{k}")?;
        }
        writeln!(w)?;
        let n = ds.n_source();
        for (i, row) in ds.x.rows().into_iter().enumerate() {
            let label: i64 = if i < n {
                ds.source_labels[i] as i64
            } else {
                ds.target_truth.as_ref().map_or(-1, |t| t[i - n] as i64)
            };
            write!(w, "{},{},{label}", ds.ids[i], ds.domains[i].tag())?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

/// Writes target predictions as `id,pred`.
pub fn save_predictions(path: impl AsRef<Path>, ids: &[String], preds: &[usize]) -> Result<()> {
    if ids.len() != preds.len() {
        return Err(Error::Invariant(format!(
            "{} ids for {} predictions",
            ids.len(),
            preds.len()
        )));
    }
    write_atomically(path.as_ref(), |w| {
        writeln!(w, "id,pred")?;
        for (id, p) in ids.iter().zip(preds) {
            writeln!(w, "{id},{p}")?;
        }
        Ok(())
    })
}

/// Writes to a sibling temporary file and renames it into place, so a failed
/// write never leaves a partial file at `path`.
pub(crate) fn write_atomically(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = std::path::PathBuf::from(tmp);
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        body(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Parameters of a synthetic domain-adaptation task.
///
/// Class `c` has mean `separation / √2 · e_c` (an orthogonal simplex, so all
/// means are `separation` apart) when `class_count ≤ dim`, and a random
/// direction of the same norm otherwise. Every target sample is displaced by
/// one shared random direction of norm `shift`. The last
/// `private_source_classes` classes appear only in the source domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTaskSpec {
    pub class_count: usize,
    pub private_source_classes: usize,
    pub samples_per_class: usize,
    pub dim: usize,
    pub separation: f64,
    pub shift: f64,
    pub noise: f64,
    pub seed: u64,
}

impl SynthTaskSpec {
    /// C=4 with 2 private classes, 60 samples per class per domain, d=10,
    /// separation 4, shift 1.5, unit noise.
    pub fn standard_pda(seed: u64) -> Self {
        SynthTaskSpec {
            class_count: 4,
            private_source_classes: 2,
            samples_per_class: 60,
            dim: 10,
            separation: 4.0,
            shift: 1.5,
            noise: 1.0,
            seed,
        }
    }

    /// Same geometry as [`standard_pda`](Self::standard_pda) with identical
    /// label spaces and shift 1.
    pub fn standard_uda(seed: u64) -> Self {
        SynthTaskSpec {
            private_source_classes: 0,
            shift: 1.0,
            ..Self::standard_pda(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Parameter(m));
        if self.class_count == 0 || self.samples_per_class == 0 || self.dim == 0 {
            return fail("class count, samples per class and dimension must be at least 1".into());
        }
        if self.private_source_classes >= self.class_count {
            return fail(format!(
                "private source classes ({}) must be fewer than classes ({})",
                self.private_source_classes, self.class_count
            ));
        }
        for (name, v) in [("separation", self.separation), ("shift", self.shift), ("noise", self.noise)] {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("{name} must be finite and nonnegative, got {v}"));
            }
        }
        Ok(())
    }

    pub fn shared_classes(&self) -> usize {
        self.class_count - self.private_source_classes
    }
}

/// Generates a Gaussian-blob task; deterministic per `spec.seed`.
pub fn generate_synth(spec: &SynthTaskSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.dim;
    let radius = spec.separation / std::f64::consts::SQRT_2;

    let means: Vec<Array1<f64>> = (0..spec.class_count)
        .map(|c| {
            if spec.class_count <= d {
                let mut e = Array1::zeros(d);
                e[c] = radius;
                e
            } else {
                random_direction(&mut rng, d) * radius
            }
        })
        .collect();
    let shift = random_direction(&mut rng, d) * spec.shift;

    let mut draw = |mean: &Array1<f64>, offset: Option<&Array1<f64>>| -> Array1<f64> {
        let noise = Array1::from_shape_fn(d, |_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            spec.noise * z
        });
        match offset {
            Some(o) => mean + o + noise,
            None => mean + noise,
        }
    };

    let per = spec.samples_per_class;
    let mut rows = Vec::new();
    let mut source_labels = Vec::new();
    for (c, mean) in means.iter().enumerate() {
        for _ in 0..per {
            rows.push(draw(mean, None));
            source_labels.push(c);
        }
    }
    let mut target_truth = Vec::new();
    for (c, mean) in means.iter().enumerate().take(spec.shared_classes()) {
        for _ in 0..per {
            rows.push(draw(mean, Some(&shift)));
            target_truth.push(c);
        }
    }

    let n = source_labels.len();
    let total = rows.len();
    let mut x = Array2::zeros((total, d));
    for (i, r) in rows.iter().enumerate() {
        x.row_mut(i).assign(r);
    }
    let ids = (0..total)
        .map(|i| if i < n { format!("s{i}") } else { format!("t{}", i - n) })
        .collect();
    Dataset::new(ids, x, source_labels, Some(target_truth), spec.class_count)
}

fn random_direction(rng: &mut ChaCha8Rng, d: usize) -> Array1<f64> {
    loop {
        let v: Array1<f64> = Array1::from_shape_fn(d, |_| StandardNormal.sample(&mut *rng));
        let norm = v.dot(&v).sqrt();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Shuffles the order of samples within each domain block. Used to check
/// that nothing downstream depends on the generator's class-blocked order.
pub fn shuffle_within_domains(ds: &Dataset, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ds.n_source();
    let mut src: Vec<usize> = (0..n).collect();
    let mut tgt: Vec<usize> = (n..ds.x.nrows()).collect();
    src.shuffle(&mut rng);
    tgt.shuffle(&mut rng);
    let order: Vec<usize> = src.iter().chain(tgt.iter()).copied().collect();
    let x = ds.x.select(ndarray::Axis(0), &order);
    Dataset {
        ids: order.iter().map(|&i| ds.ids[i].clone()).collect(),
        x,
        domains: ds.domains.clone(),
        source_labels: src.iter().map(|&i| ds.source_labels[i]).collect(),
        target_truth: ds
            .target_truth
            .as_ref()
            .map(|t| tgt.iter().map(|&i| t[i - n]).collect()),
        class_count: ds.class_count,
    }
}

/// Sample and class counts of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSummary {
    pub n: usize,
    pub m: usize,
    pub class_count: usize,
    pub source_per_class: Vec<usize>,
    /// `None` when the dataset carries no target truth.
    pub target_per_class: Option<Vec<usize>>,
    /// Target label set is a strict subset of the source label set.
    pub is_pda: Option<bool>,
}

pub fn split_counts(ds: &Dataset) -> SplitSummary {
    let histogram = |labels: &[usize]| {
        let mut h = vec![0; ds.class_count];
        for &l in labels {
            h[l] += 1;
        }
        h
    };
    let source_per_class = histogram(&ds.source_labels);
    let target_per_class = ds.target_truth.as_deref().map(histogram);
    let is_pda = ds.target_truth.as_ref().map(|t| {
        let src: BTreeSet<usize> = ds.source_labels.iter().copied().collect();
        let tgt: BTreeSet<usize> = t.iter().copied().collect();
        tgt.is_subset(&src) && tgt.len() < src.len()
    });
    SplitSummary {
        n: ds.n_source(),
        m: ds.n_target(),
        class_count: ds.class_count,
        source_per_class,
        target_per_class,
        is_pda,
    }
}
