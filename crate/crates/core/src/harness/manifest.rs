use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Field-condition categories of the evaluation dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    I,
    J,
    Uncategorized,
}

impl Category {
    pub const ALL: [Category; 11] = [
        Category::A,
        Category::B,
        Category::C,
        Category::D,
        Category::E,
        Category::F,
        Category::G,
        Category::H,
        Category::I,
        Category::J,
        Category::Uncategorized,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Category::A => "a",
            Category::B => "b",
            Category::C => "c",
            Category::D => "d",
            Category::E => "e",
            Category::F => "f",
            Category::G => "g",
            Category::H => "h",
            Category::I => "i",
            Category::J => "j",
            Category::Uncategorized => "-",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::A => "Horizontal Shadow",
            Category::B => "Slope/ Curve",
            Category::C => "Discontinuities",
            Category::D => "Front Shadow",
            Category::E => "Dense Weed",
            Category::F => "Large Crops",
            Category::G => "Small Crops",
            Category::H => "Sunlight",
            Category::I => "Tyre Tracks",
            Category::J => "Sparse Weed",
            Category::Uncategorized => "Uncategorized",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Category {
    type Err = String;

    /// `a`..`j`; an empty field is [`Category::Uncategorized`].
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "-" {
            return Ok(Category::Uncategorized);
        }
        Category::ALL[..10]
            .iter()
            .copied()
            .find(|c| c.id() == s)
            .ok_or_else(|| format!("unknown category {s:?} (expected a-j or empty)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    /// 1-based data row in the manifest.
    pub row: usize,
    pub image_path: Option<PathBuf>,
    pub gt_mask_path: PathBuf,
    pub pred_mask_path: Option<PathBuf>,
    pub category: Category,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot open manifest {path}: {source}")]
    Open {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest header must be `image,gt_mask,pred_mask,category`, found `{0}`")]
    Header(String),
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error("row {row}: cannot read {field} {path}: {source}")]
    Unreadable {
        row: usize,
        field: &'static str,
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub const MANIFEST_HEADER: [&str; 4] = ["image", "gt_mask", "pred_mask", "category"];

#[derive(Debug, Deserialize)]
struct Record {
    image: String,
    gt_mask: String,
    pred_mask: String,
    category: String,
}

/// Reads a CSV manifest. Relative paths resolve against the manifest's
/// directory, and every referenced file must be readable.
pub fn load_manifest(path: &Path) -> Result<Vec<Sample>, ManifestError> {
    let file = File::open(path).map_err(|source| ManifestError::Open { path: path.display().to_string(), source })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader.headers().map_err(|e| ManifestError::Header(e.to_string()))?.clone();
    if header.iter().ne(MANIFEST_HEADER) {
        return Err(ManifestError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }

    let mut samples = Vec::new();
    for (i, record) in reader.deserialize::<Record>().enumerate() {
        let row = i + 1;
        let rec = record.map_err(|e| ManifestError::Row { row, reason: e.to_string() })?;
        let category = rec.category.parse().map_err(|reason| ManifestError::Row { row, reason })?;
        let resolve = |field: &'static str, value: &str| -> Result<Option<PathBuf>, ManifestError> {
            if value.is_empty() {
                return Ok(None);
            }
            let p = base.join(value);
            File::open(&p).map_err(|source| ManifestError::Unreadable {
                row,
                field,
                path: p.display().to_string(),
                source,
            })?;
            Ok(Some(p))
        };
        let gt_mask_path = resolve("gt_mask", &rec.gt_mask)?
            .ok_or_else(|| ManifestError::Row { row, reason: "gt_mask is required".into() })?;
        samples.push(Sample {
            row,
            image_path: resolve("image", &rec.image)?,
            gt_mask_path,
            pred_mask_path: resolve("pred_mask", &rec.pred_mask)?,
            category,
        });
    }
    Ok(samples)
}
