//! JSON output with 17 significant digits and the tensor file format.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};

use crate::error::{domain, Result};
use crate::tensor::Tensor3;

/// Pretty JSON formatter that writes every float as `d.dddddddddddddddde±x`.
pub struct SigDigits<'a>(PrettyFormatter<'a>);

impl Default for SigDigits<'_> {
    fn default() -> Self {
        Self(PrettyFormatter::with_indent(b"  "))
    }
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(
            #[inline]
            fn $name<W: ?Sized + io::Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(writer $(, $arg)*)
            }
        )*
    };
}

impl Formatter for SigDigits<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{:.16e}", value as f64)
    }

    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        begin_object_value(),
        end_object_value(),
    );
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, SigDigits::default());
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// On-disk tensor: `shape = [d1, d2, d3]`, `data` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorFile {
    pub shape: [usize; 3],
    pub data: Vec<f64>,
}

impl From<&Tensor3> for TensorFile {
    fn from(t: &Tensor3) -> Self {
        Self {
            shape: t.shape,
            data: t.data.clone(),
        }
    }
}

impl TensorFile {
    pub fn into_tensor(self) -> Result<Tensor3> {
        if self.data.iter().any(|x| !x.is_finite()) {
            return domain("tensor data must be finite");
        }
        Tensor3::new(self.shape, self.data)
    }
}

pub fn tensor_to_json(t: &Tensor3) -> Result<String> {
    to_json(&TensorFile::from(t))
}

pub fn tensor_from_json(text: &str) -> Result<Tensor3> {
    serde_json::from_str::<TensorFile>(text)?.into_tensor()
}

pub fn read_tensor(path: &Path) -> Result<Tensor3> {
    tensor_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_tensor(path: &Path, t: &Tensor3) -> Result<()> {
    std::fs::write(path, tensor_to_json(t)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn floats_have_seventeen_digits() {
        let s = to_json(&vec![0.1f64, -2.5, 1e-300]).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("-2.5000000000000000e0"), "{s}");
    }

    #[test]
    fn rejects_bad_tensor_files() {
        assert!(tensor_from_json(r#"{"shape":[2,2,2],"data":[1,2,3]}"#).is_err());
        assert!(tensor_from_json(r#"{"shape":[1,1],"data":[1]}"#).is_err());
        let t = tensor_from_json(r#"{"shape":[1,1,2],"data":[1,-2]}"#).unwrap();
        assert_eq!(t.get(0, 0, 1), -2.0);
    }

    proptest! {
        #[test]
        fn tensor_json_round_trip_is_exact(
            data in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 12)
        ) {
            let t = Tensor3::new([2, 3, 2], data).unwrap();
            let back = tensor_from_json(&tensor_to_json(&t).unwrap()).unwrap();
            prop_assert_eq!(back.shape, t.shape);
            for (x, y) in back.data.iter().zip(&t.data) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
