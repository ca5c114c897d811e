//! Self-describing binary checkpoints.
//!
//! Layout: a text header of `key value` lines (UTF-8, one per line),
//! terminated by a `payload <byte count>` line, followed by the raw
//! little-endian f64 arrays in declared order. Floats in the header are
//! printed with Rust's shortest-round-trip formatting, so reloading is
//! bit-exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::detector::{parse_layouts, render_layouts, DetectorLayout};
use crate::error::{Error, Result};
use crate::notation::{parse_notation, ArchitectureSpec};
use crate::propagate::EvanescentPolicy;
use crate::scores::DetectorCoefficients;
use crate::system::{GeometryConfig, NetworkSystem};
use crate::train::ModelSnapshot;

pub const MAGIC: &str = "DIFFNET-CHECKPOINT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub epoch: usize,
    pub seed: u64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: ArchitectureSpec,
    pub geometry: GeometryConfig,
    pub layouts: Vec<DetectorLayout>,
    /// network → layer → flat phases
    pub phases: Vec<Vec<Vec<f64>>>,
    pub coefficients: Option<DetectorCoefficients>,
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    /// Rebuild a runnable system; forward outputs are bit-identical to the
    /// system the checkpoint was taken from.
    pub fn into_system(self) -> Result<NetworkSystem> {
        use crate::network::{DiffractiveNetwork, PhaseLayer};
        let grid = self.spec.grid_size()?;
        let mut networks = Vec::with_capacity(self.phases.len());
        for phases in self.phases {
            let layers: Result<Vec<PhaseLayer>> = phases
                .into_iter()
                .map(|p| PhaseLayer::from_phases(p, grid))
                .collect();
            networks.push(DiffractiveNetwork::new(
                layers?,
                self.geometry.propagation,
                self.geometry.input_distance,
                self.geometry.output_distance,
            )?);
        }
        NetworkSystem::new(self.spec, networks, self.layouts, self.coefficients)
    }
}

/// Build a checkpoint from a system plus an explicit geometry (the system
/// itself does not remember the field pitch used at encode time).
pub fn checkpoint_of(
    system: &NetworkSystem,
    geometry: &GeometryConfig,
    meta: CheckpointMeta,
) -> Checkpoint {
    Checkpoint {
        spec: system.spec().clone(),
        geometry: geometry.clone(),
        layouts: system.layouts().to_vec(),
        phases: system
            .networks()
            .iter()
            .map(|n| n.layers().iter().map(|l| l.phase().to_vec()).collect())
            .collect(),
        coefficients: system.coefficients().cloned(),
        meta,
    }
}

/// Snapshot variant of [`checkpoint_of`] for per-epoch ensemble saving.
pub fn checkpoint_of_snapshot(
    system_template: &NetworkSystem,
    snapshot: &ModelSnapshot,
    geometry: &GeometryConfig,
    seed: u64,
) -> Checkpoint {
    Checkpoint {
        spec: system_template.spec().clone(),
        geometry: geometry.clone(),
        layouts: system_template.layouts().to_vec(),
        phases: snapshot.phases.clone(),
        coefficients: snapshot.coefficients.clone(),
        meta: CheckpointMeta {
            epoch: snapshot.epoch,
            seed,
            val_accuracy: snapshot.val_accuracy,
        },
    }
}

fn push_line(out: &mut String, key: &str, value: impl std::fmt::Display) {
    out.push_str(key);
    out.push(' ');
    out.push_str(&value.to_string());
    out.push('\n');
}

pub fn encode(ckpt: &Checkpoint) -> Vec<u8> {
    let mut header = String::new();
    push_line(&mut header, MAGIC, VERSION);
    push_line(&mut header, "notation", ckpt.spec.render());
    push_line(&mut header, "classes", ckpt.spec.num_classes);
    push_line(&mut header, "pitch", ckpt.geometry.pitch);
    push_line(&mut header, "wavelength", ckpt.geometry.propagation.wavelength);
    push_line(
        &mut header,
        "layer_spacing",
        ckpt.geometry.propagation.layer_spacing,
    );
    push_line(&mut header, "pad_factor", ckpt.geometry.propagation.pad_factor);
    push_line(
        &mut header,
        "evanescent",
        match ckpt.geometry.propagation.evanescent_policy {
            EvanescentPolicy::Truncate => "truncate",
            EvanescentPolicy::Decay => "decay",
        },
    );
    push_line(&mut header, "input_distance", ckpt.geometry.input_distance);
    push_line(&mut header, "output_distance", ckpt.geometry.output_distance);
    push_line(&mut header, "detector_width", ckpt.geometry.detector_width);
    push_line(&mut header, "phase_init_std", ckpt.geometry.phase_init_std);
    push_line(&mut header, "epoch", ckpt.meta.epoch);
    push_line(&mut header, "seed", ckpt.meta.seed);
    push_line(&mut header, "val_accuracy", ckpt.meta.val_accuracy);
    push_line(
        &mut header,
        "coefficients",
        match &ckpt.coefficients {
            None => "none",
            Some(c) if c.learnable => "learnable",
            Some(_) => "fixed",
        },
    );
    // layouts, one line per detector, prefixed
    for line in render_layouts(&ckpt.layouts).lines() {
        if !line.starts_with('#') {
            push_line(&mut header, "detector", line);
        }
    }
    push_line(&mut header, "endian", "little");

    // payload: per network, per layer, the flat phase array; coefficients last
    let mut payload: Vec<u8> = Vec::new();
    let mut shapes = String::new();
    for (net_idx, net) in ckpt.phases.iter().enumerate() {
        for (layer_idx, phases) in net.iter().enumerate() {
            shapes.push_str(&format!("array phases {net_idx} {layer_idx} {}\n", phases.len()));
            for v in phases {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    if let Some(c) = &ckpt.coefficients {
        shapes.push_str(&format!("array coeff_p 0 0 {}\n", c.p.len()));
        for v in &c.p {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        shapes.push_str(&format!("array coeff_n 0 0 {}\n", c.n.len()));
        for v in &c.n {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    header.push_str(&shapes);
    push_line(&mut header, "payload", payload.len());

    let mut out = header.into_bytes();
    out.extend_from_slice(&payload);
    out
}

struct HeaderReader<'a> {
    lines: std::str::Lines<'a>,
}

impl<'a> HeaderReader<'a> {
    fn next_kv(&mut self) -> Result<(&'a str, &'a str)> {
        let line = self
            .lines
            .next()
            .ok_or_else(|| Error::Checkpoint("truncated header".into()))?;
        Ok(match line.split_once(' ') {
            Some((k, v)) => (k, v),
            None => (line, ""),
        })
    }
}

fn parse_f64(v: &str, key: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::Checkpoint(format!("bad float for {key}: `{v}`")))
}

fn parse_usize(v: &str, key: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| Error::Checkpoint(format!("bad integer for {key}: `{v}`")))
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    // the header is everything up to and including the `payload N` line
    let header_end = {
        let mut pos = 0;
        let mut found = None;
        while pos < bytes.len() {
            let line_end = bytes[pos..]
                .iter()
                .position(|&b| b == b'\n')
                .map(|i| pos + i)
                .ok_or_else(|| Error::Checkpoint("header has no payload line".into()))?;
            if bytes[pos..line_end].starts_with(b"payload ") {
                found = Some(line_end + 1);
                break;
            }
            pos = line_end + 1;
        }
        found.ok_or_else(|| Error::Checkpoint("header has no payload line".into()))?
    };
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::Checkpoint("header is not UTF-8".into()))?;
    let mut reader = HeaderReader {
        lines: header.lines(),
    };

    let (magic, version) = reader.next_kv()?;
    if magic != MAGIC {
        return Err(Error::Checkpoint(format!("bad magic `{magic}`")));
    }
    let version: u32 = version
        .parse()
        .map_err(|_| Error::Checkpoint(format!("bad version `{version}`")))?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, this build reads {VERSION}"
        )));
    }

    let mut notation = None;
    let mut classes = None;
    let mut geometry = GeometryConfig::default();
    let mut meta = CheckpointMeta {
        epoch: 0,
        seed: 0,
        val_accuracy: 0.0,
    };
    let mut coefficients_kind = "none".to_string();
    let mut detector_lines = String::new();
    let mut arrays: Vec<(String, usize, usize, usize)> = Vec::new();
    let payload_len;

    loop {
        let (key, value) = reader.next_kv()?;
        match key {
            "notation" => notation = Some(value.to_string()),
            "classes" => classes = Some(parse_usize(value, key)?),
            "pitch" => geometry.pitch = parse_f64(value, key)?,
            "wavelength" => geometry.propagation.wavelength = parse_f64(value, key)?,
            "layer_spacing" => geometry.propagation.layer_spacing = parse_f64(value, key)?,
            "pad_factor" => geometry.propagation.pad_factor = parse_usize(value, key)?,
            "evanescent" => {
                geometry.propagation.evanescent_policy = match value {
                    "truncate" => EvanescentPolicy::Truncate,
                    "decay" => EvanescentPolicy::Decay,
                    other => {
                        return Err(Error::Checkpoint(format!(
                            "unknown evanescent policy `{other}`"
                        )))
                    }
                }
            }
            "input_distance" => geometry.input_distance = parse_f64(value, key)?,
            "output_distance" => geometry.output_distance = parse_f64(value, key)?,
            "detector_width" => geometry.detector_width = parse_f64(value, key)?,
            "phase_init_std" => geometry.phase_init_std = parse_f64(value, key)?,
            "epoch" => meta.epoch = parse_usize(value, key)?,
            "seed" => {
                meta.seed = value
                    .parse()
                    .map_err(|_| Error::Checkpoint(format!("bad seed `{value}`")))?
            }
            "val_accuracy" => meta.val_accuracy = parse_f64(value, key)?,
            "coefficients" => coefficients_kind = value.to_string(),
            "detector" => {
                detector_lines.push_str(value);
                detector_lines.push('\n');
            }
            "endian" => {
                if value != "little" {
                    return Err(Error::Checkpoint(format!("unsupported endian `{value}`")));
                }
            }
            "array" => {
                let parts: Vec<&str> = value.split_whitespace().collect();
                if parts.len() != 4 {
                    return Err(Error::Checkpoint(format!("bad array line `{value}`")));
                }
                arrays.push((
                    parts[0].to_string(),
                    parse_usize(parts[1], "array net")?,
                    parse_usize(parts[2], "array layer")?,
                    parse_usize(parts[3], "array len")?,
                ));
            }
            "payload" => {
                payload_len = parse_usize(value, key)?;
                break;
            }
            other => {
                return Err(Error::Checkpoint(format!("unknown header key `{other}`")));
            }
        }
    }

    let payload = &bytes[header_end..];
    if payload.len() != payload_len {
        return Err(Error::Checkpoint(format!(
            "payload holds {} bytes, header promises {payload_len}",
            payload.len()
        )));
    }
    let declared = arrays
        .iter()
        .try_fold(0usize, |acc, (_, _, _, len)| {
            len.checked_mul(8).and_then(|b| acc.checked_add(b))
        })
        .ok_or_else(|| Error::Checkpoint("array sizes overflow".into()))?;
    if declared != payload_len {
        return Err(Error::Checkpoint(format!(
            "arrays declare {declared} bytes but payload holds {payload_len}"
        )));
    }

    let notation = notation.ok_or_else(|| Error::Checkpoint("missing notation".into()))?;
    let classes = classes.ok_or_else(|| Error::Checkpoint("missing class count".into()))?;
    let spec = parse_notation(&notation, classes)?;
    let grid = spec.grid_size()?;
    geometry.propagation.validate()?;
    if !geometry.pitch.is_finite() || geometry.pitch <= 0.0 {
        return Err(Error::Checkpoint(format!("bad pitch {}", geometry.pitch)));
    }
    if !geometry.detector_width.is_finite() || geometry.detector_width <= 0.0 {
        return Err(Error::Checkpoint(format!(
            "bad detector width {}",
            geometry.detector_width
        )));
    }
    for (name, d) in [
        ("input distance", geometry.input_distance),
        ("output distance", geometry.output_distance),
    ] {
        if !d.is_finite() || d < 0.0 {
            return Err(Error::Checkpoint(format!("bad {name} {d}")));
        }
    }
    let layouts = parse_layouts(&detector_lines, grid, geometry.pitch)?;

    // read the arrays back
    let mut offset = 0usize;
    let mut take = |len: usize| -> Vec<f64> {
        let out = payload[offset..offset + len * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        offset += len * 8;
        out
    };
    let mut phases: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut coeff_p = None;
    let mut coeff_n = None;
    for (kind, net_idx, layer_idx, len) in &arrays {
        match kind.as_str() {
            "phases" => {
                if *net_idx >= spec.n_networks || *layer_idx >= spec.layers_per_network {
                    return Err(Error::Checkpoint(format!(
                        "array for network {net_idx} layer {layer_idx} exceeds the notation's \
                         {} networks of {} layers",
                        spec.n_networks, spec.layers_per_network
                    )));
                }
                if *net_idx >= phases.len() {
                    phases.resize_with(net_idx + 1, Vec::new);
                }
                if *layer_idx != phases[*net_idx].len() {
                    return Err(Error::Checkpoint(format!(
                        "layer arrays out of order at network {net_idx}"
                    )));
                }
                if *len != grid * grid {
                    return Err(Error::Checkpoint(format!(
                        "phase array length {len} does not match grid {grid}x{grid}"
                    )));
                }
                phases[*net_idx].push(take(*len));
            }
            "coeff_p" => coeff_p = Some(take(*len)),
            "coeff_n" => coeff_n = Some(take(*len)),
            other => {
                return Err(Error::Checkpoint(format!("unknown array kind `{other}`")));
            }
        }
    }
    if phases.len() != spec.n_networks
        || phases.iter().any(|n| n.len() != spec.layers_per_network)
    {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {} networks, notation {notation} wants {}",
            phases.len(),
            spec.n_networks
        )));
    }
    let coefficients = match (coefficients_kind.as_str(), coeff_p, coeff_n) {
        ("none", None, None) => None,
        ("learnable", Some(p), Some(n)) => Some(DetectorCoefficients {
            p,
            n,
            learnable: true,
        }),
        ("fixed", Some(p), Some(n)) => Some(DetectorCoefficients {
            p,
            n,
            learnable: false,
        }),
        _ => {
            return Err(Error::Checkpoint(
                "coefficient declaration does not match stored arrays".into(),
            ))
        }
    };
    if let Some(c) = &coefficients {
        if c.p.len() != classes || c.n.len() != classes {
            return Err(Error::Checkpoint("coefficient array length mismatch".into()));
        }
    }

    Ok(Checkpoint {
        spec,
        geometry,
        layouts,
        phases,
        coefficients,
        meta,
    })
}

/// Atomic save: write to a temp file in the target directory, then rename.
pub fn save(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let bytes = encode(ckpt);
    write_atomic(path, &bytes)
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Write-then-rename so failures never leave a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = tempfile_in(dir, path)?;
    tmp.1
        .write_all(bytes)
        .and_then(|_| tmp.1.sync_all())
        .map_err(|e| Error::io(&tmp.0, e))?;
    drop(tmp.1);
    fs::rename(&tmp.0, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn tempfile_in(dir: &Path, target: &Path) -> Result<(std::path::PathBuf, fs::File)> {
    let stem = target
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "file".into());
    for attempt in 0..100u32 {
        let candidate = dir.join(format!(".{stem}.tmp{attempt}"));
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&candidate)
        {
            Ok(f) => return Ok((candidate, f)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::io(&candidate, e)),
        }
    }
    Err(Error::Config(format!(
        "could not create a temp file next to {}",
        target.display()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagate::PropagationGeometry;
    use crate::system::instantiate;

    fn sample_checkpoint() -> Checkpoint {
        let spec = parse_notation("D([5,5],[2,2,256])", 10).unwrap();
        let geometry = GeometryConfig {
            detector_width: 1.0,
            propagation: PropagationGeometry {
                layer_spacing: 5.0,
                ..Default::default()
            },
            input_distance: 5.0,
            output_distance: 5.0,
            ..Default::default()
        };
        let system = instantiate(&spec, &geometry, 11).unwrap();
        checkpoint_of(
            &system,
            &geometry,
            CheckpointMeta {
                epoch: 3,
                seed: 11,
                val_accuracy: 0.5,
            },
        )
    }

    #[test]
    fn encode_decode_round_trip_is_exact() {
        let ckpt = sample_checkpoint();
        let bytes = encode(&ckpt);
        let back = decode(&bytes).unwrap();
        assert_eq!(back, ckpt);
        // and encoding again is byte-identical
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let ckpt = sample_checkpoint();
        save(&ckpt, &path).unwrap();
        assert_eq!(load(&path).unwrap(), ckpt);
        // no temp litter
        let residue: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().contains("tmp"))
            .collect();
        assert!(residue.is_empty());
    }

    #[test]
    fn version_and_corruption_checks() {
        let ckpt = sample_checkpoint();
        let bytes = encode(&ckpt);
        // wrong version
        let text = String::from_utf8_lossy(&bytes[..40]).into_owned();
        assert!(text.contains("DIFFNET-CHECKPOINT 1"));
        let mut wrong = bytes.clone();
        let pos = MAGIC.len() + 1;
        wrong[pos] = b'9';
        assert!(matches!(decode(&wrong), Err(Error::Checkpoint(_))));
        // truncated payload
        assert!(decode(&bytes[..bytes.len() - 4]).is_err());
        // garbage
        assert!(decode(b"not a checkpoint").is_err());
        assert!(decode(b"").is_err());
    }

    #[test]
    fn rebuilt_system_runs() {
        let ckpt = sample_checkpoint();
        let system = ckpt.clone().into_system().unwrap();
        assert_eq!(system.networks().len(), 2);
        assert_eq!(
            system.networks()[0].layers()[0].phase(),
            &ckpt.phases[0][0][..]
        );
    }
}
