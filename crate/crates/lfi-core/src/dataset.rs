//! Training data: an N×D table of targets, optionally paired with an N×C
//! context table (parameters conditioning data, or vice versa).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Matrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub targets: Matrix,
    pub contexts: Option<Matrix>,
}

impl Dataset {
    pub fn unconditional(targets: Matrix) -> Self {
        Dataset {
            targets,
            contexts: None,
        }
    }

    pub fn conditional(targets: Matrix, contexts: Matrix) -> Result<Self> {
        if contexts.rows() != targets.rows() {
            return Err(Error::Shape {
                context: "Dataset::conditional",
                expected: format!("{} context rows", targets.rows()),
                got: format!("{}", contexts.rows()),
            });
        }
        Ok(Dataset {
            targets,
            contexts: Some(contexts),
        })
    }

    pub fn len(&self) -> usize {
        self.targets.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn target_dim(&self) -> usize {
        self.targets.cols()
    }

    pub fn context_dim(&self) -> usize {
        self.contexts.as_ref().map_or(0, |c| c.cols())
    }

    /// Stack another dataset of the same shape below this one.
    pub fn append(&mut self, other: &Dataset) -> Result<()> {
        if other.target_dim() != self.target_dim() || other.context_dim() != self.context_dim() {
            return Err(Error::Shape {
                context: "Dataset::append",
                expected: format!(
                    "targets {}, contexts {}",
                    self.target_dim(),
                    self.context_dim()
                ),
                got: format!(
                    "targets {}, contexts {}",
                    other.target_dim(),
                    other.context_dim()
                ),
            });
        }
        let mut rows: Vec<Vec<f64>> = self.targets.iter_rows().map(|r| r.to_vec()).collect();
        rows.extend(other.targets.iter_rows().map(|r| r.to_vec()));
        self.targets = Matrix::from_rows(&rows)?;
        if let (Some(mine), Some(theirs)) = (&self.contexts, &other.contexts) {
            let mut rows: Vec<Vec<f64>> = mine.iter_rows().map(|r| r.to_vec()).collect();
            rows.extend(theirs.iter_rows().map(|r| r.to_vec()));
            self.contexts = Some(Matrix::from_rows(&rows)?);
        }
        Ok(())
    }
}
