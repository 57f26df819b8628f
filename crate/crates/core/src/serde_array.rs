//! Serialize ndarray values as plain JSON sequences.

use ndarray::{Array1, Array2};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub mod vector {
    use super::*;

    pub fn serialize<F: Serialize, S: Serializer>(a: &Array1<F>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(a.iter())
    }

    pub fn deserialize<'de, F: Deserialize<'de>, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Array1<F>, D::Error> {
        Ok(Array1::from(Vec::<F>::deserialize(d)?))
    }
}

pub mod matrix {
    use super::*;

    pub fn serialize<F: Serialize + Clone, S: Serializer>(a: &Array2<F>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(a.rows().into_iter().map(|r| r.to_vec()))
    }

    pub fn deserialize<'de, F: Deserialize<'de> + Clone, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Array2<F>, D::Error> {
        let rows = Vec::<Vec<F>>::deserialize(d)?;
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        let nrows = rows.len();
        Array2::from_shape_vec((nrows, ncols), rows.into_iter().flatten().collect())
            .map_err(D::Error::custom)
    }
}
