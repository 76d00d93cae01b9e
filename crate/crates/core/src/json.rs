//! JSON file formats.
//!
//! Complex numbers are `[re, im]` pairs. Matrices are
//! `{"rows", "cols", "data"}` with `data` in row-major order; spectra are
//! `{"atoms", "weights"}` (weights default to 1); kernels and symbols store
//! their values as nested arrays indexed by atom.

use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::factorization::FactorizationData;
use crate::linalg::{CMatrix, CVector};
use crate::norms::{Certificate, NormEstimate};
use crate::schur::SymbolTensor;
use crate::spectral::{Kernel, WeightedSpectrum};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumJson {
    pub atoms: Vec<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelJson {
    pub domain: SpectrumJson,
    pub codomain: SpectrumJson,
    pub values: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolJson {
    pub order: usize,
    pub spectra: Vec<SpectrumJson>,
    pub values: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorizationJson {
    pub order: usize,
    pub hilbert_dims: Vec<usize>,
    pub a_first: Vec<Vec<Complex64>>,
    /// Slot, atom, row, column.
    pub a_mid: Vec<Vec<Vec<Vec<Complex64>>>>,
    pub a_last: Vec<Vec<Complex64>>,
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

fn rows_to_matrix(rows: &[Vec<Complex64>], what: &str) -> Result<CMatrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Parse(format!("{what}: ragged rows")));
    }
    Ok(CMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect(),
        }
    }
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Parse(format!(
                "matrix declares {}x{} but has {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(CMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

impl From<&WeightedSpectrum> for SpectrumJson {
    fn from(s: &WeightedSpectrum) -> Self {
        Self {
            atoms: s.atoms().to_vec(),
            weights: Some(s.weights().to_vec()),
        }
    }
}

impl SpectrumJson {
    pub fn to_spectrum(&self) -> Result<WeightedSpectrum> {
        let weights = self.weights.clone().unwrap_or_else(|| vec![1.0; self.atoms.len()]);
        WeightedSpectrum::new(self.atoms.clone(), weights)
    }
}

pub fn parse_matrix(text: &str) -> Result<CMatrix> {
    parse::<MatrixJson>(text)?.to_matrix()
}

pub fn parse_kernel(text: &str) -> Result<Kernel> {
    let k: KernelJson = parse(text)?;
    let values = rows_to_matrix(&k.values, "kernel values")?;
    Kernel::new(k.domain.to_spectrum()?, k.codomain.to_spectrum()?, values)
}

pub fn kernel_json(k: &Kernel) -> KernelJson {
    KernelJson {
        domain: k.domain().into(),
        codomain: k.codomain().into(),
        values: matrix_to_rows(k.values()),
    }
}

fn flatten_nested(v: &Value, shape: &[usize], out: &mut Vec<Complex64>) -> Result<()> {
    match shape.split_first() {
        None => {
            let z: Complex64 = serde_json::from_value(v.clone()).map_err(|e| Error::Parse(format!("symbol entry: {e}")))?;
            out.push(z);
            Ok(())
        }
        Some((&len, rest)) => {
            let items = v
                .as_array()
                .filter(|a| a.len() == len)
                .ok_or_else(|| Error::Parse(format!("symbol values: expected an array of length {len}")))?;
            items.iter().try_for_each(|item| flatten_nested(item, rest, out))
        }
    }
}

fn nest(values: &[Complex64], shape: &[usize]) -> Value {
    match shape.split_first() {
        None => serde_json::to_value(values[0]).expect("complex serializes"),
        Some((&len, rest)) => {
            let stride = values.len() / len.max(1);
            Value::Array((0..len).map(|i| nest(&values[i * stride..(i + 1) * stride], rest)).collect())
        }
    }
}

pub fn parse_symbol(text: &str) -> Result<SymbolTensor> {
    let s: SymbolJson = parse(text)?;
    if s.order < 2 || s.spectra.len() != s.order {
        return Err(Error::Parse(format!(
            "symbol of order {} needs that many spectra (found {}), order >= 2",
            s.order,
            s.spectra.len()
        )));
    }
    let spectra = s.spectra.iter().map(SpectrumJson::to_spectrum).collect::<Result<Vec<_>>>()?;
    let shape: Vec<usize> = spectra.iter().map(|sp| sp.len()).collect();
    let mut values = Vec::with_capacity(shape.iter().product());
    flatten_nested(&s.values, &shape, &mut values)?;
    SymbolTensor::new(spectra, values)
}

pub fn symbol_json(phi: &SymbolTensor) -> SymbolJson {
    SymbolJson {
        order: phi.order(),
        spectra: phi.spectra().iter().map(Into::into).collect(),
        values: nest(phi.values(), phi.shape()),
    }
}

pub fn parse_factorization(text: &str) -> Result<FactorizationData> {
    let f: FactorizationJson = parse(text)?;
    if f.hilbert_dims.len() + 1 != f.order {
        return Err(Error::Parse(format!(
            "order {} needs {} Hilbert dimensions, found {}",
            f.order,
            f.order.saturating_sub(1),
            f.hilbert_dims.len()
        )));
    }
    let vecs = |vs: &[Vec<Complex64>]| vs.iter().map(|v| CVector::from_column_slice(v)).collect::<Vec<_>>();
    let a_mid = f
        .a_mid
        .iter()
        .map(|slot| slot.iter().map(|rows| rows_to_matrix(rows, "middle factor")).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    FactorizationData::new(f.hilbert_dims, vecs(&f.a_first), a_mid, vecs(&f.a_last))
}

pub fn factorization_json(f: &FactorizationData) -> FactorizationJson {
    let vecs = |vs: &[CVector]| vs.iter().map(|v| v.iter().copied().collect()).collect();
    FactorizationJson {
        order: f.order(),
        hilbert_dims: f.hilbert_dims().to_vec(),
        a_first: vecs(f.a_first()),
        a_mid: f.a_mid().iter().map(|slot| slot.iter().map(matrix_to_rows).collect()).collect(),
        a_last: vecs(f.a_last()),
    }
}

impl Serialize for FactorizationData {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        factorization_json(self).serialize(s)
    }
}

impl Serialize for Certificate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Certificate", 2)?;
        match self {
            Certificate::Factorization(f) => {
                st.serialize_field("type", "factorization")?;
                st.serialize_field("factorization", f)?;
            }
            Certificate::Witness(xs) => {
                st.serialize_field("type", "witness")?;
                let ms: Vec<MatrixJson> = xs.iter().map(Into::into).collect();
                st.serialize_field("contractions", &ms)?;
            }
        }
        st.end()
    }
}

impl Serialize for NormEstimate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("NormEstimate", 4)?;
        st.serialize_field("kind", &self.kind)?;
        st.serialize_field("value", &self.value)?;
        st.serialize_field("certificate", &self.certificate)?;
        st.serialize_field("diagnostics", &self.diagnostics)?;
        st.end()
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("values serialize");
    s.push('\n');
    s
}
