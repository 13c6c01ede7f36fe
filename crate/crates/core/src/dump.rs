//! Binary field dumps: four text header lines (`DSF1`, `L P1 P2`,
//! `Nx Ny Nz`, name) followed by little-endian f64 samples, x slowest.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::ScalarField3;
use crate::grid::{Grid, GridSpec};

const MAGIC: &str = "DSF1";

#[derive(Clone, Debug)]
pub struct FieldDump {
    pub spec: GridSpec,
    pub name: String,
    pub values: Vec<f64>,
}

impl FieldDump {
    pub fn into_field(self, grid: &Arc<Grid>) -> Result<ScalarField3> {
        if *grid.spec() != self.spec {
            return Err(Error::Format(format!("dump `{}` is on grid {} but {} was expected", self.name, self.spec, grid.spec())));
        }
        ScalarField3::from_values(grid, self.values)
    }
}

pub fn write_field<W: Write>(mut out: W, field: &ScalarField3, name: &str) -> Result<()> {
    if name.contains('\n') {
        return Err(Error::Format("field name must be a single line".into()));
    }
    let s = field.spec();
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "{} {} {}", s.length, s.period_y, s.period_z)?;
    writeln!(out, "{} {} {}", s.nx, s.ny, s.nz)?;
    writeln!(out, "{name}")?;
    for v in field.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_field_file(path: &Path, field: &ScalarField3, name: &str) -> Result<()> {
    write_field(BufWriter::new(File::create(path)?), field, name)
}

fn header_line<R: BufRead>(input: &mut R, what: &str) -> Result<String> {
    let mut line = String::new();
    if input.read_line(&mut line)? == 0 {
        return Err(Error::Format(format!("missing {what} line")));
    }
    Ok(line.trim_end_matches(['\n', '\r']).to_string())
}

fn parse_numbers<T: std::str::FromStr>(line: &str, what: &str) -> Result<[T; 3]> {
    let parts: Vec<T> = line
        .split_whitespace()
        .map(|t| t.parse::<T>().map_err(|_| Error::Format(format!("bad {what} entry `{t}`"))))
        .collect::<Result<_>>()?;
    parts.try_into().map_err(|_| Error::Format(format!("{what} line needs exactly 3 entries")))
}

pub fn read_field<R: BufRead>(mut input: R) -> Result<FieldDump> {
    if header_line(&mut input, "magic")? != MAGIC {
        return Err(Error::Format("not a DSF1 dump".into()));
    }
    let [l, p1, p2] = parse_numbers::<f64>(&header_line(&mut input, "extent")?, "extent")?;
    let [nx, ny, nz] = parse_numbers::<usize>(&header_line(&mut input, "size")?, "size")?;
    let name = header_line(&mut input, "name")?;
    let spec = GridSpec::new(l, p1, p2, nx, ny, nz)?;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != spec.len() * 8 {
        return Err(Error::Format(format!("expected {} payload bytes, found {}", spec.len() * 8, bytes.len())));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(FieldDump { spec, name, values })
}

pub fn read_field_file(path: &Path) -> Result<FieldDump> {
    read_field(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let g = Grid::new(GridSpec::new(1.5, 1.0, 0.25, 5, 4, 6).unwrap()).unwrap();
        let f = ScalarField3::from_fn(&g, |x, y, z| (x + 3.0 * y).sin() / (1.0 + z) + 1e-300);
        let mut buf = Vec::new();
        write_field(&mut buf, &f, "psi").unwrap();
        assert!(buf.starts_with(b"DSF1\n1.5 1 0.25\n5 4 6\npsi\n"));
        let back = read_field(&buf[..]).unwrap();
        assert_eq!(back.name, "psi");
        assert_eq!(back.spec, *g.spec());
        for (a, b) in f.values().iter().zip(&back.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_payload_rejected() {
        let g = Grid::cube(4).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &ScalarField3::zeros(&g), "z").unwrap();
        buf.pop();
        assert!(matches!(read_field(&buf[..]), Err(Error::Format(_))));
    }
}
