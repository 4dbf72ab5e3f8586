//! CSV output.

use std::io::{Read, Write};

use serde::{de::DeserializeOwned, Serialize};

use crate::BenchError;

/// Header row followed by one record per row, RFC 4180 quoting.
pub fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read, T: DeserializeOwned>(input: R) -> Result<Vec<T>, BenchError> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(BenchError::from)).collect()
}
