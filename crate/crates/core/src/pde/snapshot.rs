//! Single-time field snapshots.
//!
//! Binary layout, all little-endian:
//!
//! | offset        | type        | content                        |
//! |---------------|-------------|--------------------------------|
//! | 0             | `[u8; 4]`   | magic `PWSN`                   |
//! | 4             | `u32`       | format version (1)             |
//! | 8             | `u32`       | `N`                            |
//! | 12            | `N × u32`   | nodes per axis                 |
//! | 12 + 4N       | `f64`       | `h`                            |
//! | 20 + 4N       | `N × f64`   | lattice centre                 |
//! | 20 + 12N      | `u64`       | time index                     |
//! | 28 + 12N      | `f64`       | `t`                            |
//! | 36 + 12N      | `f64 × len` | node values, axis 0 slowest    |

use std::io::{self, Read, Write};

use crate::geometry::{Lattice, Point};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PWSN";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub lattice: Lattice,
    pub time_index: u64,
    pub t: f64,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let dim = self.lattice.dim();
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(dim as u32).to_le_bytes())?;
        for _ in 0..dim {
            w.write_all(&(self.lattice.n() as u32).to_le_bytes())?;
        }
        w.write_all(&self.lattice.h.to_le_bytes())?;
        for c in self.lattice.center.coords() {
            w.write_all(&c.to_le_bytes())?;
        }
        w.write_all(&self.time_index.to_le_bytes())?;
        w.write_all(&self.t.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::invalid("not a field snapshot (bad magic)"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::invalid(format!("unsupported snapshot version {version}")));
        }
        let dim = read_u32(&mut r)? as usize;
        if !(1..=2).contains(&dim) {
            return Err(Error::invalid(format!("snapshot dimension {dim} not supported")));
        }
        let dims: Vec<u32> = (0..dim).map(|_| read_u32(&mut r)).collect::<io::Result<_>>()?;
        let n = dims[0];
        if dims.iter().any(|&d| d != n) || n.is_multiple_of(2) || n < 3 {
            return Err(Error::invalid("snapshot lattice must be square with an odd node count >= 3"));
        }
        let h = read_f64(&mut r)?;
        let center: Vec<f64> = (0..dim).map(|_| read_f64(&mut r)).collect::<io::Result<_>>()?;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let time_index = u64::from_le_bytes(b8);
        let t = read_f64(&mut r)?;
        let lattice = Lattice { center: Point(center), h, half_cells: (n as usize - 1) / 2 };
        let values = (0..lattice.len()).map(|_| read_f64(&mut r)).collect::<io::Result<_>>()?;
        Ok(Snapshot { lattice, time_index, t, values })
    }

    /// CSV with `#` header lines, then `x0[,x1],u` rows in node order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let l = &self.lattice;
        let dim = l.dim();
        writeln!(w, "# N={dim}")?;
        writeln!(w, "# dims={}", vec![l.n().to_string(); dim].join("x"))?;
        writeln!(w, "# h={:.16e}", l.h)?;
        writeln!(w, "# time_index={}", self.time_index)?;
        writeln!(w, "# t={:.16e}", self.t)?;
        writeln!(w, "{}", if dim == 1 { "x0,u" } else { "x0,x1,u" })?;
        for (i, v) in self.values.iter().enumerate() {
            let x = l.coord(i);
            match dim {
                1 => writeln!(w, "{:.16e},{:.16e}", x[0], v)?,
                _ => writeln!(w, "{:.16e},{:.16e},{:.16e}", x[0], x[1], v)?,
            }
        }
        Ok(())
    }
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
