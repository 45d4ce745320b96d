//! `FTDS` binary dataset format (all little-endian):
//!
//! ```text
//! magic  "FTDS"            4 bytes
//! version                  u16
//! split                    u8   (0 train, 1 validation, 2 test)
//! flags                    u8   (bit 0: noiseless)
//! grid   n_f, n_t          u32, u32
//!        subcarrier_hz     f64
//!        comb_offset/step  u32, u32
//!        n_pilot_symbols   u32, then that many u32 indices
//! mix    model_mask        u8   (bit i = TDL model i, A..E)
//!        ds_lo, ds_hi      f64, f64 (ns)
//!        v_lo, v_hi        f64, f64 (km/h)
//!        carrier_hz        f64
//!        master_seed       u64
//!        n_snr             u32, then that many f64 (dB)
//! dims   n_p_t, n_p_f      u32, u32
//!        n_t, n_f          u32, u32
//! n_samples                u64
//! samples (index order):
//!        model u8, ds_ns f32, speed_kmh f32, snr_db f32, seed u64,
//!        observation f32[n_p_t*n_p_f*2], target f32[n_t*n_f*2]
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use ndarray::Array3;

use super::{Dataset, MixConfig, Sample, ScenarioDraw, Split};
use crate::channel::TdlModel;
use crate::error::{Error, Result};
use crate::link::GridConfig;

pub const MAGIC: &[u8; 4] = b"FTDS";
pub const FORMAT_VERSION: u16 = 1;

const MAX_LIST: u32 = 1 << 16;

pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset_to(ds, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_dataset_to<W: Write>(ds: &Dataset, w: &mut W) -> Result<()> {
    ds.validate_shapes()?;
    w.write_all(MAGIC)?;
    w.write_u16::<LE>(FORMAT_VERSION)?;
    w.write_u8(ds.split.tag())?;
    w.write_u8(ds.mix.noiseless as u8)?;

    let g = &ds.grid;
    w.write_u32::<LE>(g.n_f as u32)?;
    w.write_u32::<LE>(g.n_t as u32)?;
    w.write_f64::<LE>(g.subcarrier_spacing_hz)?;
    w.write_u32::<LE>(g.pilot_comb_offset as u32)?;
    w.write_u32::<LE>(g.pilot_comb_step as u32)?;
    w.write_u32::<LE>(g.pilot_symbols.len() as u32)?;
    for &k in &g.pilot_symbols {
        w.write_u32::<LE>(k as u32)?;
    }

    let m = &ds.mix;
    let mask = m.models.iter().fold(0u8, |acc, model| acc | (1 << model.index()));
    w.write_u8(mask)?;
    for v in m.ds_range_ns.iter().chain(&m.speed_range_kmh) {
        w.write_f64::<LE>(*v)?;
    }
    w.write_f64::<LE>(m.carrier_hz)?;
    w.write_u64::<LE>(m.master_seed)?;
    w.write_u32::<LE>(m.snr_grid_db.len() as u32)?;
    for &s in &m.snr_grid_db {
        w.write_f64::<LE>(s)?;
    }

    let (a, b, _) = ds.obs_dims();
    let (c, d, _) = ds.target_dims();
    for dim in [a, b, c, d] {
        w.write_u32::<LE>(dim as u32)?;
    }
    w.write_u64::<LE>(ds.samples.len() as u64)?;

    for s in &ds.samples {
        w.write_u8(s.draw.model.index())?;
        w.write_f32::<LE>(s.draw.delay_spread_ns as f32)?;
        w.write_f32::<LE>(s.draw.speed_kmh as f32)?;
        w.write_f32::<LE>(s.draw.snr_db as f32)?;
        w.write_u64::<LE>(s.draw.sample_seed)?;
        for &v in s.observation.iter().chain(s.target.iter()) {
            w.write_f32::<LE>(v)?;
        }
    }
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::UnreadableDataset {
        path: path.display().to_string(),
        source: Box::new(e.into()),
    })?;
    read_dataset_from(&mut BufReader::new(file))
}

fn header_err(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::CorruptHeader("file ends inside the header".into())
    } else {
        Error::Io(e)
    }
}

fn read_list_len<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let n = r.read_u32::<LE>().map_err(header_err)?;
    if n > MAX_LIST {
        return Err(Error::CorruptHeader(format!("{what} length {n} is implausible")));
    }
    Ok(n as usize)
}

pub fn read_dataset_from<R: Read>(r: &mut R) -> Result<Dataset> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(header_err)?;
    if &magic != MAGIC {
        return Err(Error::CorruptHeader(format!("bad magic {magic:?}")));
    }
    let version = r.read_u16::<LE>().map_err(header_err)?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            expected: FORMAT_VERSION,
            found: version,
        });
    }
    let split = Split::from_tag(r.read_u8().map_err(header_err)?)?;
    let flags = r.read_u8().map_err(header_err)?;
    if flags & !1 != 0 {
        return Err(Error::CorruptHeader(format!("unknown flags {flags:#04x}")));
    }

    let n_f = r.read_u32::<LE>().map_err(header_err)? as usize;
    let n_t = r.read_u32::<LE>().map_err(header_err)? as usize;
    let subcarrier_spacing_hz = r.read_f64::<LE>().map_err(header_err)?;
    let pilot_comb_offset = r.read_u32::<LE>().map_err(header_err)? as usize;
    let pilot_comb_step = r.read_u32::<LE>().map_err(header_err)? as usize;
    let n_sym = read_list_len(r, "pilot symbol list")?;
    let pilot_symbols = (0..n_sym)
        .map(|_| r.read_u32::<LE>().map(|k| k as usize))
        .collect::<io::Result<Vec<_>>>()
        .map_err(header_err)?;
    let grid = GridConfig {
        n_f,
        n_t,
        subcarrier_spacing_hz,
        pilot_symbols,
        pilot_comb_offset,
        pilot_comb_step,
    };
    grid.validate()
        .map_err(|e| Error::CorruptHeader(format!("grid config: {e}")))?;

    let mask = r.read_u8().map_err(header_err)?;
    if mask == 0 || mask >> TdlModel::ALL.len() != 0 {
        return Err(Error::CorruptHeader(format!("bad model mask {mask:#04x}")));
    }
    let models = TdlModel::ALL
        .into_iter()
        .filter(|m| mask & (1 << m.index()) != 0)
        .collect();
    let mut ranges = [0.0f64; 4];
    for v in &mut ranges {
        *v = r.read_f64::<LE>().map_err(header_err)?;
    }
    let carrier_hz = r.read_f64::<LE>().map_err(header_err)?;
    let master_seed = r.read_u64::<LE>().map_err(header_err)?;
    let n_snr = read_list_len(r, "SNR grid")?;
    let snr_grid_db = (0..n_snr)
        .map(|_| r.read_f64::<LE>())
        .collect::<io::Result<Vec<_>>>()
        .map_err(header_err)?;
    let mix = MixConfig {
        models,
        ds_range_ns: [ranges[0], ranges[1]],
        speed_range_kmh: [ranges[2], ranges[3]],
        snr_grid_db,
        carrier_hz,
        master_seed,
        noiseless: flags & 1 != 0,
    };
    mix.validate()
        .map_err(|e| Error::CorruptHeader(format!("mix config: {e}")))?;

    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = r.read_u32::<LE>().map_err(header_err)? as usize;
    }
    let implied = [grid.n_pilot_symbols(), grid.n_pilot_subcarriers(), grid.n_t, grid.n_f];
    if dims != implied {
        return Err(Error::dims("dataset tensor dims", implied, dims));
    }
    let n_samples = r.read_u64::<LE>().map_err(header_err)?;

    let obs_dim = (dims[0], dims[1], 2);
    let tgt_dim = (dims[2], dims[3], 2);
    let record_bytes = 1 + 12 + 8 + 4 * (dims[0] * dims[1] * 2 + dims[2] * dims[3] * 2);
    let mut samples = Vec::new();
    samples
        .try_reserve_exact(n_samples as usize)
        .map_err(|e| Error::ResourceExhausted(format!("{n_samples} samples: {e}")))?;
    let mut record = vec![0u8; record_bytes];
    for index in 0..n_samples {
        if let Err(e) = r.read_exact(&mut record) {
            return Err(if e.kind() == io::ErrorKind::UnexpectedEof {
                Error::Truncated {
                    expected: n_samples,
                    found: index,
                }
            } else {
                Error::Io(e)
            });
        }
        samples.push(decode_sample(&record, obs_dim, tgt_dim)?);
    }
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => return Err(Error::TrailingData(n_samples)),
        Err(e) => return Err(Error::Io(e)),
    }

    Ok(Dataset {
        grid,
        mix,
        split,
        samples,
    })
}

fn decode_sample(mut rec: &[u8], obs_dim: (usize, usize, usize), tgt_dim: (usize, usize, usize)) -> Result<Sample> {
    let model =
        TdlModel::from_index(rec.read_u8()?).map_err(|e| Error::CorruptHeader(format!("sample record: {e}")))?;
    let delay_spread_ns = rec.read_f32::<LE>()? as f64;
    let speed_kmh = rec.read_f32::<LE>()? as f64;
    let snr_db = rec.read_f32::<LE>()? as f64;
    let sample_seed = rec.read_u64::<LE>()?;
    let mut read_tensor = |dim: (usize, usize, usize)| -> Result<Array3<f32>> {
        let mut buf = vec![0f32; dim.0 * dim.1 * dim.2];
        rec.read_f32_into::<LE>(&mut buf)?;
        Ok(Array3::from_shape_vec(dim, buf).expect("length matches"))
    };
    let observation = read_tensor(obs_dim)?;
    let target = read_tensor(tgt_dim)?;
    Ok(Sample {
        draw: ScenarioDraw {
            model,
            delay_spread_ns,
            speed_kmh,
            snr_db,
            sample_seed,
        },
        observation,
        target,
    })
}

#[cfg(test)]
mod tests {
    use super::super::build_dataset;
    use super::*;

    fn small() -> Dataset {
        let mix = MixConfig {
            master_seed: 5,
            ..MixConfig::default()
        };
        build_dataset(3, &mix, &GridConfig::default()).unwrap()
    }

    fn encode(ds: &Dataset) -> Vec<u8> {
        let mut buf = Vec::new();
        write_dataset_to(ds, &mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip() {
        let ds = small();
        let bytes = encode(&ds);
        let back = read_dataset_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = encode(&small());
        bytes[0] = b'X';
        assert!(matches!(
            read_dataset_from(&mut bytes.as_slice()),
            Err(Error::CorruptHeader(_))
        ));
    }

    #[test]
    fn wrong_version() {
        let mut bytes = encode(&small());
        bytes[4] = 9;
        assert!(matches!(
            read_dataset_from(&mut bytes.as_slice()),
            Err(Error::UnsupportedVersion { found: 9, .. })
        ));
    }

    #[test]
    fn missing_sample_is_truncation() {
        let ds = small();
        let bytes = encode(&ds);
        let record = (bytes.len() - header_len(&ds)) / 3;
        let cut = &bytes[..bytes.len() - record];
        assert!(matches!(
            read_dataset_from(&mut &cut[..]),
            Err(Error::Truncated { expected: 3, found: 2 })
        ));
        let partial = &bytes[..bytes.len() - 10];
        assert!(matches!(
            read_dataset_from(&mut &partial[..]),
            Err(Error::Truncated { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn header_cut_short() {
        let bytes = encode(&small());
        assert!(matches!(
            read_dataset_from(&mut &bytes[..20]),
            Err(Error::CorruptHeader(_))
        ));
    }

    #[test]
    fn declared_dims_must_match_grid() {
        let ds = small();
        let mut bytes = encode(&ds);
        // n_p_f sits right before the last three dims and the sample count.
        let pos = header_len(&ds) - 8 - 12;
        bytes[pos] = 47;
        assert!(matches!(
            read_dataset_from(&mut bytes.as_slice()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = encode(&small());
        bytes.push(0);
        assert!(matches!(
            read_dataset_from(&mut bytes.as_slice()),
            Err(Error::TrailingData(3))
        ));
    }

    fn header_len(ds: &Dataset) -> usize {
        4 + 2
            + 1
            + 1
            + 4
            + 4
            + 8
            + 4
            + 4
            + 4
            + 4 * ds.grid.pilot_symbols.len()
            + 1
            + 8 * 4
            + 8
            + 8
            + 4
            + 8 * ds.mix.snr_grid_db.len()
            + 16
            + 8
    }
}
