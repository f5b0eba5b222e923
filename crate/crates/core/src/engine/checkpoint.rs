//! Versioned little-endian checkpoint format. Restoring yields an engine whose
//! continuation is bit-identical to the uninterrupted run.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Active, Engine, EngineConfig, Frame, Phase, Row};
use crate::box_store::{BoxClass, BoxStore};
use crate::codec::{Dec, Enc};
use crate::detail::{DetailKind, Gamma, SheetSpec};
use crate::error::{Error, Result};
use crate::geometry::{Axis, PlacedDetail, Rect};

const MAGIC: &[u8; 8] = b"SLKPCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

fn rect<W: Write>(enc: &mut Enc<W>, r: &Rect) -> Result<()> {
    for v in [r.x, r.y, r.dx, r.dy] {
        enc.f64(v)?;
    }
    Ok(())
}

fn read_rect<R: Read>(dec: &mut Dec<R>) -> Result<Rect> {
    Ok(Rect::new(dec.f64()?, dec.f64()?, dec.f64()?, dec.f64()?))
}

fn class_byte(c: BoxClass) -> u8 {
    c.index() as u8
}

fn read_class<R: Read>(dec: &mut Dec<R>) -> Result<BoxClass> {
    let b = dec.u8()?;
    BoxClass::from_index(b).ok_or_else(|| Error::Checkpoint(format!("invalid class byte {b}")))
}

impl Engine {
    pub fn write_checkpoint<W: Write>(&self, out: W) -> Result<()> {
        let mut enc = Enc::new(out);
        enc.bytes(MAGIC)?;
        enc.u32(CHECKPOINT_VERSION)?;

        let c = &self.cfg;
        enc.u8(match c.kind {
            DetailKind::Rect => 0,
            DetailKind::Square => 1,
        })?;
        enc.u64(c.n0)?;
        enc.u32(c.gamma.num)?;
        enc.u32(c.gamma.den)?;
        enc.u64(c.max_details)?;
        enc.bool(c.layout_mode)?;
        enc.u64(c.checkpoint_every)?;
        enc.u64(c.stats_stride)?;
        enc.bool(c.allow_gamma_out_of_range)?;
        enc.bool(c.snug)?;
        enc.bool(c.track_shapes)?;

        enc.u64(self.t)?;
        enc.u64(self.row_start)?;
        enc.f64(self.row_gap)?;
        enc.u8(match self.phase {
            Phase::Check => 0,
            Phase::Choose => 1,
            Phase::Place => 2,
            Phase::Failed => 3,
        })?;
        rect(&mut enc, &self.lrp)?;
        match &self.active {
            None => enc.u8(0)?,
            Some(a) => {
                enc.u8(1)?;
                enc.u32(a.id)?;
                enc.f64(a.cross)?;
                enc.f64(a.length)?;
                match a.frame {
                    None => enc.u8(0)?,
                    Some(f) => {
                        enc.u8(1)?;
                        enc.f64(f.x)?;
                        enc.f64(f.y)?;
                        enc.u8(matches!(f.axis, Axis::Y) as u8)?;
                    }
                }
            }
        }
        enc.u8(class_byte(self.row.source))?;
        enc.u8(class_byte(self.row.ep))?;
        enc.u8(class_byte(self.row.norm))?;
        self.store.encode(&mut enc)?;
        enc.sum(&self.s_com)?;
        enc.opt_u64(self.t0)?;
        enc.opt_u64(self.k0)?;
        enc.opt_f64(self.one_plus_sigma)?;
        match self.last_norm {
            None => enc.u8(0)?,
            Some((w, h)) => {
                enc.u8(1)?;
                enc.f64(w)?;
                enc.f64(h)?;
            }
        }
        for v in [
            self.stripes,
            self.rows,
            self.critical_count,
            self.creation_bound_violations,
            self.height_diagnostics,
            self.containment_violations,
        ] {
            enc.u64(v)?;
        }
        enc.sum(&self.stripe_ep_height_sum)?;
        enc.f64(self.max_abs_residual)?;
        enc.f64(self.s_com_max_rel_dev)?;
        match &self.placements {
            None => enc.u8(0)?,
            Some(p) => {
                enc.u8(1)?;
                enc.u64(p.len() as u64)?;
                for d in p {
                    enc.u64(d.n)?;
                    rect(&mut enc, &d.rect)?;
                }
            }
        }
        enc.into_inner().flush()?;
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(input: R) -> Result<Engine> {
        let mut dec = Dec::new(input);
        if &dec.bytes::<8>()? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let version = dec.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let kind = match dec.u8()? {
            0 => DetailKind::Rect,
            1 => DetailKind::Square,
            b => return Err(Error::Checkpoint(format!("invalid detail kind byte {b}"))),
        };
        let n0 = dec.u64()?;
        let num = dec.u32()?;
        let den = dec.u32()?;
        let gamma = Gamma::new(num, den).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let cfg = EngineConfig {
            kind,
            n0,
            gamma,
            max_details: dec.u64()?,
            layout_mode: dec.bool()?,
            checkpoint_every: dec.u64()?,
            stats_stride: dec.u64()?,
            allow_gamma_out_of_range: dec.bool()?,
            snug: dec.bool()?,
            track_shapes: dec.bool()?,
        };
        cfg.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
        let sheet = SheetSpec::new(kind, n0)?;

        let t = dec.u64()?;
        let row_start = dec.u64()?;
        let row_gap = dec.f64()?;
        let phase = match dec.u8()? {
            0 => Phase::Check,
            1 => Phase::Choose,
            2 => Phase::Place,
            3 => Phase::Failed,
            b => return Err(Error::Checkpoint(format!("invalid phase byte {b}"))),
        };
        let lrp = read_rect(&mut dec)?;
        let active = match dec.u8()? {
            0 => None,
            _ => {
                let id = dec.u32()?;
                let cross = dec.f64()?;
                let length = dec.f64()?;
                let frame = match dec.u8()? {
                    0 => None,
                    _ => {
                        let x = dec.f64()?;
                        let y = dec.f64()?;
                        let axis = if dec.u8()? == 0 { Axis::X } else { Axis::Y };
                        Some(Frame { x, y, axis })
                    }
                };
                Some(Active { id, cross, length, frame })
            }
        };
        let row = Row { source: read_class(&mut dec)?, ep: read_class(&mut dec)?, norm: read_class(&mut dec)? };
        let store = BoxStore::decode(&mut dec)?;
        if let Some(a) = &active {
            if !store.contains(a.id) {
                return Err(Error::Checkpoint(format!("active box {} is not live", a.id)));
            }
        }
        let s_com = dec.sum()?;
        let t0 = dec.opt_u64()?;
        let k0 = dec.opt_u64()?;
        let one_plus_sigma = dec.opt_f64()?;
        let last_norm = match dec.u8()? {
            0 => None,
            _ => Some((dec.f64()?, dec.f64()?)),
        };
        let mut counters = [0u64; 6];
        for c in counters.iter_mut() {
            *c = dec.u64()?;
        }
        let stripe_ep_height_sum = dec.sum()?;
        let max_abs_residual = dec.f64()?;
        let s_com_max_rel_dev = dec.f64()?;
        let placements = match dec.u8()? {
            0 => None,
            _ => {
                let n = dec.u64()? as usize;
                let mut p = Vec::with_capacity(n);
                for _ in 0..n {
                    let n = dec.u64()?;
                    p.push(PlacedDetail { n, rect: read_rect(&mut dec)? });
                }
                Some(p)
            }
        };
        Ok(Engine {
            cfg,
            sheet,
            t,
            row_start,
            row_gap,
            phase,
            lrp,
            active,
            row,
            store,
            s_com,
            t0,
            k0,
            one_plus_sigma,
            last_norm,
            stripes: counters[0],
            rows: counters[1],
            critical_count: counters[2],
            creation_bound_violations: counters[3],
            height_diagnostics: counters[4],
            containment_violations: counters[5],
            stripe_ep_height_sum,
            max_abs_residual,
            s_com_max_rel_dev,
            placements,
        })
    }

    /// Write a checkpoint atomically (temporary file, then rename).
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let f = File::create(&tmp)?;
            self.write_checkpoint(BufWriter::new(f))?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load_checkpoint(path: &Path) -> Result<Engine> {
        let f = File::open(path)?;
        Engine::read_checkpoint(BufReader::new(f))
    }
}
