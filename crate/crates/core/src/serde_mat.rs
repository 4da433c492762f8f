//! Serde adapters: matrices as row-major nested arrays, complex numbers as `[re, im]`.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

fn rows_to_matrix<T: Copy + nalgebra::Scalar, E: serde::de::Error>(rows: Vec<Vec<T>>, zero: T) -> Result<DMatrix<T>, E> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(E::custom("ragged matrix rows"));
    }
    let mut m = DMatrix::from_element(nrows, ncols, zero);
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    Ok(m)
}

pub mod real {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        rows_to_matrix(Vec::<Vec<f64>>::deserialize(d)?, 0.0)
    }
}

pub mod complex {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<Complex<f64>>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = m.row_iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<Complex<f64>>, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let rows = rows.into_iter().map(|r| r.into_iter().map(|[a, b]| Complex::new(a, b)).collect()).collect();
        rows_to_matrix(rows, Complex::new(0.0, 0.0))
    }
}

pub mod complex_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &DVector<Complex<f64>>, s: S) -> Result<S::Ok, S::Error> {
        let items: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        items.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<Complex<f64>>, D::Error> {
        let items: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(DVector::from_iterator(items.len(), items.into_iter().map(|[a, b]| Complex::new(a, b))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Doc {
        #[serde(with = "real")]
        a: DMatrix<f64>,
        #[serde(with = "complex")]
        b: DMatrix<Complex<f64>>,
        #[serde(with = "complex_vec")]
        c: DVector<Complex<f64>>,
    }

    #[test]
    fn round_trip_is_bit_exact_and_row_major() {
        let doc = Doc {
            a: DMatrix::from_row_slice(2, 3, &[0.1, 1.0 / 3.0, -2.5e-300, 4.0, 5.0, std::f64::consts::PI]),
            b: DMatrix::from_row_slice(1, 2, &[Complex::new(0.1, -0.2), Complex::new(1e-17, 3.0)]),
            c: DVector::from_vec(vec![Complex::new(-0.7, 0.3)]),
        };
        let text = serde_json::to_string(&doc).unwrap();
        assert!(text.starts_with("{\"a\":[[0.1,0.3333333333333333,"));
        assert!(text.contains("\"b\":[[[0.1,-0.2],[1e-17,3.0]]]"));
        let back: Doc = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc);
    }
}
