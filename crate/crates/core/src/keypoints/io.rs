//! Binary serialisation of descriptor sets.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic  b"ADSC1"
//! u32    image id length in bytes
//! [u8]   image id (UTF-8)
//! u32    keypoint count
//! u32    descriptor width (always 64)
//! then per keypoint: f64 x, y, scale, strength, 64 x f64 descriptor
//! ```
//!
//! Descriptors are stored unit-norm; import renormalises only when the
//! stored norm drifts beyond 1e-9, so a valid file round-trips byte for
//! byte.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::keypoints::{Keypoint, KeypointDescriptorSet, DESCRIPTOR_WIDTH};

const MAGIC: &[u8; 5] = b"ADSC1";
const MAX_ID_LEN: u32 = 4096;

/// Writes a descriptor set to `writer`.
pub fn export_descriptors<W: Write>(set: &KeypointDescriptorSet, mut writer: W) -> Result<()> {
    let id = set.image_id.as_bytes();
    if id.len() as u64 > MAX_ID_LEN as u64 {
        return Err(Error::validation("image id too long"));
    }
    writer.write_all(MAGIC)?;
    writer.write_all(&(id.len() as u32).to_le_bytes())?;
    writer.write_all(id)?;
    writer.write_all(&(set.len() as u32).to_le_bytes())?;
    writer.write_all(&(DESCRIPTOR_WIDTH as u32).to_le_bytes())?;
    for (i, kp) in set.keypoints.iter().enumerate() {
        for v in [kp.x, kp.y, kp.scale, kp.strength] {
            writer.write_all(&v.to_le_bytes())?;
        }
        for &v in set.descriptor(i) {
            writer.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a descriptor set written by [`export_descriptors`].
pub fn import_descriptors<R: Read>(mut reader: R) -> Result<KeypointDescriptorSet> {
    let mut magic = [0u8; 5];
    reader.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::format("bad magic; not a descriptor file"));
    }
    let id_len = read_u32(&mut reader)?;
    if id_len > MAX_ID_LEN {
        return Err(Error::format("image id length out of range"));
    }
    let mut id = vec![0u8; id_len as usize];
    reader.read_exact(&mut id)?;
    let image_id =
        String::from_utf8(id).map_err(|_| Error::format("image id is not valid UTF-8"))?;
    let count = read_u32(&mut reader)? as usize;
    let width = read_u32(&mut reader)? as usize;
    if width != DESCRIPTOR_WIDTH {
        return Err(Error::format(format!(
            "descriptor width {width} unsupported; expected {DESCRIPTOR_WIDTH}"
        )));
    }

    let hint = count.min(4096);
    let mut keypoints = Vec::with_capacity(hint);
    let mut descriptors = Vec::with_capacity(hint * DESCRIPTOR_WIDTH);
    let mut record = vec![0u8; (4 + DESCRIPTOR_WIDTH) * 8];
    for _ in 0..count {
        reader.read_exact(&mut record)?;
        let mut fields = record
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let kp = Keypoint {
            x: fields.next().unwrap(),
            y: fields.next().unwrap(),
            scale: fields.next().unwrap(),
            strength: fields.next().unwrap(),
        };
        if ![kp.x, kp.y, kp.scale, kp.strength].iter().all(|v| v.is_finite()) {
            return Err(Error::format("non-finite keypoint field"));
        }
        let start = descriptors.len();
        for v in fields {
            if !v.is_finite() {
                return Err(Error::format("non-finite descriptor entry"));
            }
            descriptors.push(v);
        }
        let norm: f64 = descriptors[start..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::format("zero-norm descriptor"));
        }
        if (norm - 1.0).abs() > 1e-9 {
            for v in &mut descriptors[start..] {
                *v /= norm;
            }
        }
        keypoints.push(kp);
    }
    KeypointDescriptorSet::from_parts(image_id, keypoints, descriptors)
}

fn read_u32<R: Read>(reader: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_set() -> KeypointDescriptorSet {
        let keypoints = vec![
            Keypoint { x: 1.5, y: 2.5, scale: 1.0, strength: 0.9 },
            Keypoint { x: 10.0, y: 20.0, scale: 2.0, strength: 0.5 },
            Keypoint { x: 3.25, y: 7.75, scale: 4.0, strength: 0.1 },
        ];
        let mut descriptors = Vec::new();
        for k in 0..3usize {
            let mut d = vec![0.0f64; DESCRIPTOR_WIDTH];
            for (j, v) in d.iter_mut().enumerate() {
                *v = ((j + 1) * (k + 2)) as f64;
            }
            let norm: f64 = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            d.iter_mut().for_each(|v| *v /= norm);
            descriptors.extend_from_slice(&d);
        }
        KeypointDescriptorSet::from_parts("coin-007".to_string(), keypoints, descriptors).unwrap()
    }

    #[test]
    fn round_trip_preserves_everything() {
        let set = sample_set();
        let mut buf = Vec::new();
        export_descriptors(&set, &mut buf).unwrap();
        let back = import_descriptors(buf.as_slice()).unwrap();
        assert_eq!(back.image_id, set.image_id);
        assert_eq!(back.len(), 3);
        for i in 0..3 {
            assert_eq!(back.keypoints[i].x.to_bits(), set.keypoints[i].x.to_bits());
            assert_eq!(back.keypoints[i].strength.to_bits(), set.keypoints[i].strength.to_bits());
            assert_eq!(back.descriptor(i), set.descriptor(i));
        }
    }

    #[test]
    fn serialisation_is_byte_stable() {
        let set = sample_set();
        let mut first = Vec::new();
        export_descriptors(&set, &mut first).unwrap();
        let back = import_descriptors(first.as_slice()).unwrap();
        let mut second = Vec::new();
        export_descriptors(&back, &mut second).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn empty_set_round_trips() {
        let set = KeypointDescriptorSet::empty("nothing");
        let mut buf = Vec::new();
        export_descriptors(&set, &mut buf).unwrap();
        let back = import_descriptors(buf.as_slice()).unwrap();
        assert_eq!(back.image_id, "nothing");
        assert!(back.is_empty());
    }

    #[test]
    fn rejects_unsupported_width() {
        let set = sample_set();
        let mut buf = Vec::new();
        export_descriptors(&set, &mut buf).unwrap();
        // Width field sits right after magic, id length, id and count.
        let offset = 5 + 4 + set.image_id.len() + 4;
        buf[offset..offset + 4].copy_from_slice(&63u32.to_le_bytes());
        match import_descriptors(buf.as_slice()) {
            Err(Error::Format(msg)) => assert!(msg.contains("63")),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_magic() {
        let set = sample_set();
        let mut buf = Vec::new();
        export_descriptors(&set, &mut buf).unwrap();
        buf[0] = b'X';
        assert!(matches!(import_descriptors(buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_non_finite_payload() {
        let set = sample_set();
        let mut buf = Vec::new();
        export_descriptors(&set, &mut buf).unwrap();
        // First descriptor entry of the first record.
        let offset = 5 + 4 + set.image_id.len() + 4 + 4 + 4 * 8;
        buf[offset..offset + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(import_descriptors(buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_input_is_an_io_error() {
        let set = sample_set();
        let mut buf = Vec::new();
        export_descriptors(&set, &mut buf).unwrap();
        buf.truncate(buf.len() - 11);
        assert!(matches!(import_descriptors(buf.as_slice()), Err(Error::Io(_))));
    }

    #[test]
    fn import_renormalises_drifted_vectors() {
        let set = sample_set();
        let mut buf = Vec::new();
        export_descriptors(&set, &mut buf).unwrap();
        // Scale the whole first descriptor by 2 in place.
        let offset = 5 + 4 + set.image_id.len() + 4 + 4 + 4 * 8;
        for j in 0..DESCRIPTOR_WIDTH {
            let o = offset + j * 8;
            let v = f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
            buf[o..o + 8].copy_from_slice(&(2.0 * v).to_le_bytes());
        }
        let back = import_descriptors(buf.as_slice()).unwrap();
        let norm: f64 = back.descriptor(0).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }
}
