use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Partition tag of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Origin {
    Labeled,
    Unlabeled,
    Ood,
}

impl Origin {
    pub fn as_char(self) -> char {
        match self {
            Origin::Labeled => 'L',
            Origin::Unlabeled => 'U',
            Origin::Ood => 'O',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'L' => Some(Origin::Labeled),
            'U' => Some(Origin::Unlabeled),
            'O' => Some(Origin::Ood),
            _ => None,
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Features, ground-truth labels, and partition tags.
///
/// Unlabeled samples keep their ground-truth label so pseudo-label quality can
/// be audited; training code reads labels only through
/// [`Dataset::training_label`], which refuses anything not tagged labeled.
/// Out-of-distribution samples carry no label (`None`).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Tensor,
    labels: Vec<Option<usize>>,
    origin: Vec<Origin>,
    num_classes: usize,
    class_counts: Vec<usize>,
}

impl Dataset {
    pub fn new(
        features: Tensor,
        labels: Vec<Option<usize>>,
        origin: Vec<Origin>,
        num_classes: usize,
    ) -> Result<Self> {
        if !features.is_matrix() {
            return Err(Error::shape("Dataset", format!("features {:?} not a matrix", features.shape())));
        }
        let n = features.rows();
        if labels.len() != n || origin.len() != n {
            return Err(Error::shape(
                "Dataset",
                format!("{n} rows, {} labels, {} origin tags", labels.len(), origin.len()),
            ));
        }
        if num_classes < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 classes, got {num_classes}")));
        }
        let mut class_counts = vec![0; num_classes];
        for (i, (l, o)) in labels.iter().zip(&origin).enumerate() {
            match (l, o) {
                (None, Origin::Ood) => {}
                (Some(k), Origin::Labeled | Origin::Unlabeled) if *k < num_classes => class_counts[*k] += 1,
                (Some(k), Origin::Labeled | Origin::Unlabeled) => {
                    return Err(Error::Integrity(format!(
                        "sample {i} has label {k} outside [0, {num_classes})"
                    )))
                }
                (Some(_), Origin::Ood) => {
                    return Err(Error::Integrity(format!("ood sample {i} carries a class label")))
                }
                (None, _) => {
                    return Err(Error::Integrity(format!("in-distribution sample {i} has no label")))
                }
            }
        }
        Ok(Dataset {
            features,
            labels,
            origin,
            num_classes,
            class_counts,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Per-class sample counts over labeled and unlabeled samples.
    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn origins(&self) -> &[Origin] {
        &self.origin
    }

    pub fn origin(&self, i: usize) -> Origin {
        self.origin[i]
    }

    /// Row indices carrying the given tag, ascending.
    pub fn indices(&self, tag: Origin) -> Vec<usize> {
        self.origin
            .iter()
            .enumerate()
            .filter(|(_, &o)| o == tag)
            .map(|(i, _)| i)
            .collect()
    }

    /// `(labeled, unlabeled, ood)` counts.
    pub fn partition_sizes(&self) -> (usize, usize, usize) {
        self.origin.iter().fold((0, 0, 0), |(l, u, o), t| match t {
            Origin::Labeled => (l + 1, u, o),
            Origin::Unlabeled => (l, u + 1, o),
            Origin::Ood => (l, u, o + 1),
        })
    }

    /// Per-class `(labeled, unlabeled)` counts.
    pub fn split_counts(&self) -> Vec<(usize, usize)> {
        let mut out = vec![(0, 0); self.num_classes];
        for (l, o) in self.labels.iter().zip(&self.origin) {
            match (l, o) {
                (Some(k), Origin::Labeled) => out[*k].0 += 1,
                (Some(k), Origin::Unlabeled) => out[*k].1 += 1,
                _ => {}
            }
        }
        out
    }

    /// Label of a labeled-tagged sample. The only label accessor on the
    /// training path.
    pub fn training_label(&self, i: usize) -> Result<usize> {
        match (self.origin.get(i), self.labels.get(i)) {
            (Some(Origin::Labeled), Some(Some(k))) => Ok(*k),
            (Some(o), _) => Err(Error::Contract(format!(
                "training code asked for the label of {o}-tagged sample {i}"
            ))),
            (None, _) => Err(Error::InvalidArgument(format!("sample {i} out of range"))),
        }
    }

    /// Ground truth of any sample, for pseudo-label auditing and evaluation
    /// only. `None` marks an out-of-distribution sample.
    pub fn ground_truth(&self, i: usize) -> Option<usize> {
        self.labels[i]
    }

    pub fn ground_truths(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub(crate) fn into_parts(self) -> (Tensor, Vec<Option<usize>>, Vec<Origin>, usize) {
        (self.features, self.labels, self.origin, self.num_classes)
    }

    pub(crate) fn with_origins(mut self, origin: Vec<Origin>) -> Result<Self> {
        if origin.len() != self.len() {
            return Err(Error::shape("Dataset::with_origins", "tag count differs from sample count"));
        }
        self.origin = origin;
        Dataset::new(self.features, self.labels, self.origin, self.num_classes)
    }

    /// Writes the flat text format: a `N D K` header, then one line per
    /// sample with `D` features at 17 significant digits, the label (`-1`
    /// for out-of-distribution), and the origin tag.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.len(), self.dim(), self.num_classes)?;
        let mut line = String::new();
        for (i, row) in self.features.row_iter().enumerate() {
            line.clear();
            for v in row {
                line.push_str(&format_f64(*v));
                line.push(' ');
            }
            match self.labels[i] {
                Some(k) => line.push_str(&k.to_string()),
                None => line.push_str("-1"),
            }
            line.push(' ');
            line.push(self.origin[i].as_char());
            writeln!(w, "{line}")?;
        }
        w.flush()
    }

    pub fn read_from<R: BufRead>(r: R, source_name: &str) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(source_name, 1, "empty file"))?;
        let header = header.map_err(|e| Error::parse(source_name, 1, e.to_string()))?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(source_name, 1, format!("bad header `{header}`: {e}")))?;
        let [n, d, k] = nums[..] else {
            return Err(Error::parse(source_name, 1, format!("header must be `N D K`, got `{header}`")));
        };
        let mut data = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        let mut origin = Vec::with_capacity(n);
        for (ln, line) in lines {
            let lineno = ln + 1;
            let line = line.map_err(|e| Error::parse(source_name, lineno, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != d + 2 {
                return Err(Error::parse(
                    source_name,
                    lineno,
                    format!("expected {} fields, got {}", d + 2, fields.len()),
                ));
            }
            for f in &fields[..d] {
                let v: f64 = f
                    .parse()
                    .map_err(|_| Error::parse(source_name, lineno, format!("bad float `{f}`")))?;
                data.push(v);
            }
            let label: i64 = fields[d]
                .parse()
                .map_err(|_| Error::parse(source_name, lineno, format!("bad label `{}`", fields[d])))?;
            labels.push(match label {
                -1 => None,
                l if l >= 0 => Some(l as usize),
                l => return Err(Error::parse(source_name, lineno, format!("bad label {l}"))),
            });
            let tag = fields[d + 1];
            let o = tag
                .chars()
                .next()
                .filter(|_| tag.len() == 1)
                .and_then(Origin::from_char)
                .ok_or_else(|| Error::parse(source_name, lineno, format!("bad origin tag `{tag}`")))?;
            origin.push(o);
        }
        if labels.len() != n {
            return Err(Error::parse(
                source_name,
                n + 1,
                format!("header promises {n} samples, found {}", labels.len()),
            ));
        }
        let features = Tensor::new(vec![n, d], data)?;
        Dataset::new(features, labels, origin, k)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(f)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Dataset::read_from(BufReader::new(f), &path.display().to_string())
    }
}

/// 17 significant digits; parses back to the identical `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}
