//! Binary checkpoints.
//!
//! Little-endian layout: the magic `NLKGCHK\0`, a `u32` version, `u64 N`,
//! `f64 L, dt, t, ε, β`, then `N` values of `v` and `N` of `w`. Tagged
//! sections follow, each a four-byte tag, a `u64` payload length and the
//! payload:
//!
//! * `STEP` step counter and start time,
//! * `HASH` configuration hash (ASCII),
//! * `WIND` the interpolation window, oldest level first,
//! * `COLL` hyperboloid slices collected so far,
//! * `ELOG` the energy log.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, Level, TimeWindow};
use crate::hyperboloid::HyperboloidSlice;
use crate::output::EnergyRow;

pub const MAGIC: &[u8; 8] = b"NLKGCHK\0";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub grid: Grid,
    pub dt: f64,
    pub t: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub step: u64,
    pub t0: f64,
    pub config_hash: String,
    pub window: Vec<Level>,
    pub slices: Vec<HyperboloidSlice>,
    pub energy_log: Vec<EnergyRow>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        for x in v {
            self.f64(*x);
        }
    }
    fn array(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        self.f64s(v);
    }
    fn section(&mut self, tag: &[u8; 4], body: impl FnOnce(&mut Writer)) {
        let mut inner = Writer(Vec::new());
        body(&mut inner);
        self.0.extend_from_slice(tag);
        self.u64(inner.0.len() as u64);
        self.0.extend_from_slice(&inner.0);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        // Each element takes at least one byte, which bounds bogus lengths.
        if n > (self.buf.len() - self.pos) as u64 {
            return Err(Error::Checkpoint(format!("implausible length {n} at byte {}", self.pos)));
        }
        Ok(n as usize)
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("length overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn array(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        self.f64s(n)
    }
    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION);
        w.u64(self.grid.n as u64);
        w.f64(self.grid.half_length);
        w.f64(self.dt);
        w.f64(self.t);
        w.f64(self.epsilon);
        w.f64(self.beta);
        w.f64s(&self.v);
        w.f64s(&self.w);
        w.section(b"STEP", |s| {
            s.u64(self.step);
            s.f64(self.t0);
        });
        w.section(b"HASH", |s| s.0.extend_from_slice(self.config_hash.as_bytes()));
        w.section(b"WIND", |s| {
            s.u64(self.window.len() as u64);
            for l in &self.window {
                s.u64(l.step);
                s.f64(l.t);
                s.array(&l.v);
                s.array(&l.w);
                s.array(&l.vx);
            }
        });
        w.section(b"COLL", |s| {
            s.u64(self.slices.len() as u64);
            for sl in &self.slices {
                s.f64(sl.rho);
                s.f64(sl.y_spacing);
                s.u8(sl.cap_complete as u8);
                s.u64(sl.half_count as u64);
                for a in [&sl.v, &sl.v_rho, &sl.v_y, &sl.u, &sl.u_t, &sl.u_x] {
                    s.f64s(a);
                }
                for &m in &sl.fill_mask {
                    s.u8(m as u8);
                }
            }
        });
        w.section(b"ELOG", |s| {
            s.u64(self.energy_log.len() as u64);
            for r in &self.energy_log {
                s.u64(r.step);
                s.f64(r.t);
                s.f64(r.energy);
                s.f64(r.leakage);
            }
        });
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let n = r.len()?;
        let grid = Grid::new(n, r.f64()?);
        let (dt, t, epsilon, beta) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
        let v = r.f64s(n)?;
        let w = r.f64s(n)?;
        let mut cp = Checkpoint {
            grid,
            dt,
            t,
            epsilon,
            beta,
            v,
            w,
            step: 0,
            t0: 0.0,
            config_hash: String::new(),
            window: Vec::new(),
            slices: Vec::new(),
            energy_log: Vec::new(),
        };
        let mut seen = Vec::new();
        while !r.done() {
            let tag: [u8; 4] = r.take(4)?.try_into().unwrap();
            let len = r.len()?;
            let mut s = Reader { buf: r.take(len)?, pos: 0 };
            match &tag {
                b"STEP" => {
                    cp.step = s.u64()?;
                    cp.t0 = s.f64()?;
                }
                b"HASH" => {
                    cp.config_hash = String::from_utf8(s.buf.to_vec())
                        .map_err(|_| Error::Checkpoint("config hash is not UTF-8".into()))?;
                    s.pos = s.buf.len();
                }
                b"WIND" => {
                    for _ in 0..s.u64()? {
                        let (step, t) = (s.u64()?, s.f64()?);
                        let (v, w, vx) = (s.array()?, s.array()?, s.array()?);
                        cp.window.push(Level { step, t, v, w, vx });
                    }
                }
                b"COLL" => {
                    for _ in 0..s.u64()? {
                        let (rho, h, complete) = (s.f64()?, s.f64()?, s.u8()? != 0);
                        let half = s.len()?;
                        let mut sl = HyperboloidSlice::new(rho, h, 0.0, complete);
                        sl.half_count = half;
                        let len = 2 * half + 1;
                        sl.v = s.f64s(len)?;
                        sl.v_rho = s.f64s(len)?;
                        sl.v_y = s.f64s(len)?;
                        sl.u = s.f64s(len)?;
                        sl.u_t = s.f64s(len)?;
                        sl.u_x = s.f64s(len)?;
                        sl.fill_mask = (0..len).map(|_| s.u8().map(|b| b != 0)).collect::<Result<_>>()?;
                        cp.slices.push(sl);
                    }
                }
                b"ELOG" => {
                    for _ in 0..s.u64()? {
                        cp.energy_log.push(EnergyRow {
                            step: s.u64()?,
                            t: s.f64()?,
                            energy: s.f64()?,
                            leakage: s.f64()?,
                        });
                    }
                }
                other => {
                    return Err(Error::Checkpoint(format!(
                        "unknown section {:?}",
                        String::from_utf8_lossy(other)
                    )))
                }
            }
            if !s.done() {
                return Err(Error::Checkpoint(format!(
                    "section {} has trailing bytes",
                    String::from_utf8_lossy(&tag)
                )));
            }
            seen.push(tag);
        }
        for required in [b"STEP", b"HASH", b"WIND"] {
            if !seen.contains(required) {
                return Err(Error::Checkpoint(format!(
                    "missing section {}",
                    String::from_utf8_lossy(required)
                )));
            }
        }
        Ok(cp)
    }

    pub fn time_window(&self) -> Result<TimeWindow> {
        let mut w = TimeWindow::new();
        for l in &self.window {
            w.push(l.step, l.t, &l.v, &l.w, &l.vx)
                .map_err(|e| Error::Checkpoint(e.to_string()))?;
        }
        Ok(w)
    }

    /// Writes through a temporary file and a rename, so a crash never leaves
    /// a half-written checkpoint behind.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let buf = fs::read(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&buf)
    }
}
