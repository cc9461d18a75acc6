use crate::error::DataError;

/// Dense, row-major feature matrix with a target vector. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    target: Vec<f64>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// `features` is row-major with `feature_names.len()` columns.
    pub fn new(
        features: Vec<f64>,
        target: Vec<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self, DataError> {
        let d = feature_names.len();
        if d == 0 {
            return Err(DataError::Invalid(
                "dataset needs at least one feature".into(),
            ));
        }
        if target.is_empty() {
            return Err(DataError::Invalid("dataset needs at least one row".into()));
        }
        if features.len() != target.len() * d {
            return Err(DataError::Invalid(format!(
                "feature buffer holds {} values, expected {} rows x {} columns",
                features.len(),
                target.len(),
                d
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(DataError::Invalid(format!(
                "non-finite feature at row {}, column '{}'",
                i / d,
                feature_names[i % d]
            )));
        }
        if let Some(i) = target.iter().position(|v| !v.is_finite()) {
            return Err(DataError::Invalid(format!("non-finite target at row {i}")));
        }
        Ok(Self {
            features,
            target,
            feature_names,
        })
    }

    /// Builds a dataset from per-row feature vectors.
    pub fn from_rows(
        rows: &[Vec<f64>],
        target: Vec<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self, DataError> {
        let d = feature_names.len();
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(DataError::Invalid(format!(
                "row {i} has {} values, expected {d}",
                rows[i].len()
            )));
        }
        if rows.len() != target.len() {
            return Err(DataError::Invalid(format!(
                "{} feature rows but {} targets",
                rows.len(),
                target.len()
            )));
        }
        Self::new(rows.concat(), target, feature_names)
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.features[i * d..(i + 1) * d]
    }

    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.features[row * self.n_features() + feature]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.features.chunks_exact(self.n_features())
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// New dataset made of the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self, DataError> {
        let mut features = Vec::with_capacity(indices.len() * self.n_features());
        let mut target = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n_rows() {
                return Err(DataError::Invalid(format!(
                    "row index {i} out of range for {} rows",
                    self.n_rows()
                )));
            }
            features.extend_from_slice(self.row(i));
            target.push(self.target[i]);
        }
        Self::new(features, target, self.feature_names.clone())
    }

    /// Replaces the feature buffer, keeping target and names.
    pub(crate) fn with_features(&self, features: Vec<f64>) -> Result<Self, DataError> {
        Self::new(features, self.target.clone(), self.feature_names.clone())
    }
}
