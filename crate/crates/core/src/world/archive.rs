//! Self-contained world archive: a zip holding
//!
//! * `manifest.json`: format tag, revision, heightfield geometry
//! * `heightfield.bin`: depths as little-endian f64, row-major (`i * ny + j`)
//! * `props.stl`: one ASCII solid `prop_<id>` per prop, in the prop's local frame
//! * `labels.json`: per-prop id, pose, label and generation
//!
//! Entries are stored uncompressed with a fixed timestamp, so identical worlds
//! produce byte-identical archives.

use std::io::{Cursor, Read, Write};

use serde::{Deserialize, Serialize};
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipArchive, ZipWriter};

use super::{parse_stl, write_stl, Heightfield, PropId, SemanticLabel, StlSolid, World, WorldError};

pub const ARCHIVE_FORMAT: &str = "mariner-world";
const ARCHIVE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    version: u32,
    revision: u64,
    next_id: u64,
    heightfield: HeightfieldHeader,
    props: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeightfieldHeader {
    origin: [f64; 2],
    cell_size: f64,
    nx: usize,
    ny: usize,
    label: SemanticLabel,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PropRecord {
    id: u64,
    pose: [f64; 6],
    label: SemanticLabel,
    generation: u64,
}

fn zip_err(e: impl std::fmt::Display) -> WorldError {
    WorldError::Archive(e.to_string())
}

pub fn write_archive(world: &World) -> Result<Vec<u8>, WorldError> {
    let hf = world.heightfield();
    let manifest = Manifest {
        format: ARCHIVE_FORMAT.into(),
        version: ARCHIVE_VERSION,
        revision: world.revision(),
        next_id: world.next_id(),
        heightfield: HeightfieldHeader {
            origin: hf.origin(),
            cell_size: hf.cell_size(),
            nx: hf.nx(),
            ny: hf.ny(),
            label: hf.label(),
        },
        props: world.props().len(),
    };
    let depth_bytes: Vec<u8> = hf.depths().iter().flat_map(|d| d.to_le_bytes()).collect();
    let solids: Vec<StlSolid> = world
        .props()
        .iter()
        .map(|p| StlSolid { name: format!("prop_{}", p.id().0), triangles: p.mesh().to_vec() })
        .collect();
    let records: Vec<PropRecord> = world
        .props()
        .iter()
        .map(|p| PropRecord { id: p.id().0, pose: p.pose(), label: p.label(), generation: p.generation() })
        .collect();

    let opts = SimpleFileOptions::default()
        .compression_method(CompressionMethod::Stored)
        .last_modified_time(DateTime::default())
        .unix_permissions(0o644);
    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    let entries: [(&str, Vec<u8>); 4] = [
        ("manifest.json", serde_json::to_vec_pretty(&manifest).map_err(zip_err)?),
        ("heightfield.bin", depth_bytes),
        ("props.stl", write_stl(&solids).into_bytes()),
        ("labels.json", serde_json::to_vec_pretty(&records).map_err(zip_err)?),
    ];
    for (name, bytes) in entries {
        zip.start_file(name, opts).map_err(zip_err)?;
        zip.write_all(&bytes)?;
    }
    Ok(zip.finish().map_err(zip_err)?.into_inner())
}

fn entry(archive: &mut ZipArchive<Cursor<&[u8]>>, name: &str) -> Result<Vec<u8>, WorldError> {
    let mut f = archive.by_name(name).map_err(|e| WorldError::Archive(format!("{name}: {e}")))?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf)?;
    Ok(buf)
}

pub fn read_archive(bytes: &[u8]) -> Result<World, WorldError> {
    let mut archive = ZipArchive::new(Cursor::new(bytes)).map_err(zip_err)?;
    let manifest: Manifest = serde_json::from_slice(&entry(&mut archive, "manifest.json")?).map_err(zip_err)?;
    if manifest.format != ARCHIVE_FORMAT || manifest.version != ARCHIVE_VERSION {
        return Err(WorldError::Archive(format!("unsupported archive {} v{}", manifest.format, manifest.version)));
    }
    let raw = entry(&mut archive, "heightfield.bin")?;
    if raw.len() % 8 != 0 {
        return Err(WorldError::Archive("heightfield.bin length not a multiple of 8".into()));
    }
    let depth: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let h = &manifest.heightfield;
    let hf = Heightfield::new(h.origin, h.cell_size, h.nx, h.ny, depth, h.label)?;

    let solids = parse_stl(&String::from_utf8(entry(&mut archive, "props.stl")?).map_err(zip_err)?)?;
    let records: Vec<PropRecord> = serde_json::from_slice(&entry(&mut archive, "labels.json")?).map_err(zip_err)?;
    if solids.len() != records.len() || records.len() != manifest.props {
        return Err(WorldError::Archive("prop count mismatch between manifest, labels and meshes".into()));
    }

    let mut world = World::new(hf);
    for (rec, solid) in records.into_iter().zip(solids) {
        if solid.name != format!("prop_{}", rec.id) {
            return Err(WorldError::Archive(format!("mesh {} does not match prop {}", solid.name, rec.id)));
        }
        world.restore_prop(PropId(rec.id), solid.triangles, rec.pose, rec.label, rec.generation)?;
    }
    world.set_revision(manifest.revision);
    world.set_next_id(manifest.next_id);
    Ok(world)
}
