//! Filter and signal files: 32-bit float WAV and raw little-endian `f32` with
//! a text sidecar, plus whole-file processing.
//!
//! WAV data is interleaved on disk and planar in memory. Raw files are planar
//! on disk; the sidecar `<file>.meta` holds `channels=`, `length=` and
//! `sample_rate=` lines.

use std::fs;
use std::path::{Path, PathBuf};

use crate::auralizer::Auralizer;
use crate::backend::Backend;
use crate::config::{EngineConfig, Mode};
use crate::convolver::Convolver;
use crate::error::{Error, Result};

const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    WavFloat32,
    RawF32Le,
}

impl FileFormat {
    pub fn from_path(path: &Path) -> Result<FileFormat> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        match ext.as_deref() {
            Some("wav") => Ok(FileFormat::WavFloat32),
            Some("f32") | Some("raw") => Ok(FileFormat::RawF32Le),
            _ => Err(Error::UnsupportedFormat(format!(
                "{}: expected a .wav, .f32 or .raw file",
                path.display()
            ))),
        }
    }
}

/// Planar multichannel signal with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub sample_rate_hz: u32,
    pub channels: Vec<Vec<f32>>,
}

impl Signal {
    pub fn frames(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn read_signal(path: &Path) -> Result<Signal> {
    match FileFormat::from_path(path)? {
        FileFormat::WavFloat32 => decode_wav(&fs::read(path)?, path),
        FileFormat::RawF32Le => read_raw(path),
    }
}

pub fn write_signal(path: &Path, signal: &Signal) -> Result<()> {
    check_rectangular(signal)?;
    match FileFormat::from_path(path)? {
        FileFormat::WavFloat32 => fs::write(path, encode_wav(signal)?)?,
        FileFormat::RawF32Le => write_raw(path, signal)?,
    }
    Ok(())
}

/// Reads a filter set, failing when its sample rate differs from `expected_rate`.
pub fn read_filters(path: &Path, expected_rate: Option<u32>) -> Result<Signal> {
    let signal = read_signal(path)?;
    if let Some(expected) = expected_rate {
        if signal.sample_rate_hz != expected {
            return Err(Error::SampleRateMismatch {
                expected,
                found: signal.sample_rate_hz,
            });
        }
    }
    Ok(signal)
}

pub fn write_filters(path: &Path, filters: &Signal) -> Result<()> {
    write_signal(path, filters)
}

fn check_rectangular(signal: &Signal) -> Result<()> {
    let frames = signal.frames();
    if signal.channels.is_empty() || signal.channels.len() > u16::MAX as usize {
        return Err(Error::UnsupportedFormat(format!(
            "channel count {} out of range",
            signal.channels.len()
        )));
    }
    if let Some(bad) = signal.channels.iter().find(|c| c.len() != frames) {
        return Err(Error::LengthMismatch {
            expected: frames,
            actual: bad.len(),
        });
    }
    Ok(())
}

pub fn encode_wav(signal: &Signal) -> Result<Vec<u8>> {
    check_rectangular(signal)?;
    let channels = signal.channels.len();
    let frames = signal.frames();
    let data_len = channels as u64 * frames as u64 * 4;
    if data_len + 36 > u32::MAX as u64 {
        return Err(Error::UnsupportedFormat(
            "signal exceeds the 4 GiB WAV limit; use the raw format".into(),
        ));
    }
    let block_align = channels as u16 * 4;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_IEEE_FLOAT.to_le_bytes());
    out.extend_from_slice(&(channels as u16).to_le_bytes());
    out.extend_from_slice(&signal.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(signal.sample_rate_hz * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&32u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for t in 0..frames {
        for ch in &signal.channels {
            out.extend_from_slice(&ch[t].to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_wav(bytes: &[u8], path: &Path) -> Result<Signal> {
    let corrupt = |reason: &str| Error::CorruptHeader {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(corrupt("not a RIFF/WAVE file"));
    }
    let mut fmt: Option<(u16, u16, u32, u16, u16)> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        let body = bytes
            .get(body_start..body_start + size)
            .ok_or_else(|| corrupt("chunk runs past end of file"))?;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(corrupt("fmt chunk too short"));
                }
                let u16_at = |o: usize| u16::from_le_bytes([body[o], body[o + 1]]);
                let mut tag = u16_at(0);
                if tag == FORMAT_EXTENSIBLE {
                    if size < 40 {
                        return Err(corrupt("extensible fmt chunk too short"));
                    }
                    // First two bytes of the subformat GUID carry the format code.
                    tag = u16_at(24);
                }
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                fmt = Some((tag, u16_at(2), rate, u16_at(12), u16_at(14)));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        pos = body_start + size + (size & 1);
    }
    let (tag, channels, rate, align, bits) = fmt.ok_or_else(|| corrupt("missing fmt chunk"))?;
    if tag != FORMAT_IEEE_FLOAT || bits != 32 {
        return Err(Error::UnsupportedFormat(format!(
            "{}: format tag {tag} with {bits} bits; only 32-bit IEEE float is supported",
            path.display()
        )));
    }
    let channels = channels as usize;
    if channels == 0 || align as usize != channels * 4 {
        return Err(corrupt("inconsistent channel count and block alignment"));
    }
    let data = data.ok_or_else(|| corrupt("missing data chunk"))?;
    if data.len() % (channels * 4) != 0 {
        return Err(corrupt("data length is not a whole number of frames"));
    }
    let frames = data.len() / (channels * 4);
    let mut planar = vec![Vec::with_capacity(frames); channels];
    for frame in data.chunks_exact(channels * 4) {
        for (ch, bytes) in planar.iter_mut().zip(frame.chunks_exact(4)) {
            ch.push(f32::from_le_bytes(bytes.try_into().unwrap()));
        }
    }
    Ok(Signal {
        sample_rate_hz: rate,
        channels: planar,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawDescriptor {
    pub channels: usize,
    pub length: usize,
    pub sample_rate: u32,
}

impl RawDescriptor {
    pub fn parse(text: &str, path: &Path) -> Result<RawDescriptor> {
        let corrupt = |reason: String| Error::CorruptHeader {
            path: path.to_path_buf(),
            reason,
        };
        let (mut channels, mut length, mut rate) = (None, None, None);
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| corrupt(format!("expected key=value, got `{line}`")))?;
            let value: u64 = value
                .trim()
                .parse()
                .map_err(|_| corrupt(format!("`{}` is not an integer", value.trim())))?;
            match key.trim() {
                "channels" => channels = Some(value as usize),
                "length" => length = Some(value as usize),
                "sample_rate" => {
                    rate = Some(u32::try_from(value).map_err(|_| corrupt("sample_rate too large".into()))?)
                }
                other => return Err(corrupt(format!("unknown key `{other}`"))),
            }
        }
        match (channels, length, rate) {
            (Some(channels), Some(length), Some(sample_rate)) if channels > 0 => Ok(RawDescriptor {
                channels,
                length,
                sample_rate,
            }),
            _ => Err(corrupt("sidecar needs channels, length and sample_rate".into())),
        }
    }

    pub fn render(&self) -> String {
        format!(
            "channels={}\nlength={}\nsample_rate={}\n",
            self.channels, self.length, self.sample_rate
        )
    }
}

fn read_raw(path: &Path) -> Result<Signal> {
    let meta_path = sidecar_path(path);
    let meta = fs::read_to_string(&meta_path).map_err(|e| Error::CorruptHeader {
        path: meta_path.clone(),
        reason: format!("cannot read sidecar: {e}"),
    })?;
    let desc = RawDescriptor::parse(&meta, &meta_path)?;
    let bytes = fs::read(path)?;
    let expected = desc.channels as u64 * desc.length as u64 * 4;
    if bytes.len() as u64 != expected {
        return Err(Error::CorruptHeader {
            path: meta_path,
            reason: format!("sidecar describes {expected} bytes, file has {}", bytes.len()),
        });
    }
    let samples: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let channels = if desc.length == 0 {
        vec![Vec::new(); desc.channels]
    } else {
        samples.chunks_exact(desc.length).map(<[f32]>::to_vec).collect()
    };
    Ok(Signal {
        sample_rate_hz: desc.sample_rate,
        channels,
    })
}

fn write_raw(path: &Path, signal: &Signal) -> Result<()> {
    let desc = RawDescriptor {
        channels: signal.channels.len(),
        length: signal.frames(),
        sample_rate: signal.sample_rate_hz,
    };
    let mut bytes = Vec::with_capacity(desc.channels * desc.length * 4);
    for ch in &signal.channels {
        for v in ch {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    fs::write(sidecar_path(path), desc.render())?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ProcessOptions {
    pub input: PathBuf,
    pub filters: PathBuf,
    pub fc_filters: Option<PathBuf>,
    pub block_size: usize,
    pub backend: Backend,
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProcessSummary {
    pub blocks: usize,
    pub frames: usize,
    pub channels: usize,
}

/// Streams a mono file through the convolver (or the auralizer when feedback
/// filters are given) and writes the `C_out`-channel result. The final partial
/// block is zero-padded, so the output length is a whole number of blocks.
pub fn process_file(opts: &ProcessOptions) -> Result<ProcessSummary> {
    let input = read_signal(&opts.input)?;
    if input.channels.len() != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "{}: input must be mono, found {} channels",
            opts.input.display(),
            input.channels.len()
        )));
    }
    let rate = input.sample_rate_hz;
    let synth = read_filters(&opts.filters, Some(rate))?;
    let fc = opts
        .fc_filters
        .as_deref()
        .map(|p| read_filters(p, Some(rate)))
        .transpose()?;
    let channels = synth.channels.len();
    let cfg = EngineConfig::new(rate, opts.block_size, 1, channels)?;

    enum Engine {
        Conv(Box<Convolver>),
        Aur(Box<Auralizer>),
    }
    let mut engine = match &fc {
        None => Engine::Conv(Box::new(Convolver::with_backend(
            &synth.channels,
            cfg,
            Mode::Broadcast,
            opts.backend,
        )?)),
        Some(fc) => Engine::Aur(Box::new(Auralizer::with_backend(
            &synth.channels,
            &fc.channels,
            cfg,
            opts.backend,
        )?)),
    };

    let n = opts.block_size;
    let mono = &input.channels[0];
    let blocks = mono.len().div_ceil(n).max(1);
    let mut out = vec![Vec::with_capacity(blocks * n); channels];
    let mut block = vec![0.0f32; n];
    let mut speakers = vec![0.0f32; channels * n];
    for b in 0..blocks {
        let src = &mono[(b * n).min(mono.len())..((b + 1) * n).min(mono.len())];
        block[..src.len()].copy_from_slice(src);
        block[src.len()..].fill(0.0);
        match &mut engine {
            Engine::Conv(c) => c.convolve_into(&block, &mut speakers)?,
            Engine::Aur(a) => a.auralize_into(&block, &mut speakers)?,
        }
        for (o, s) in out.iter_mut().zip(speakers.chunks_exact(n)) {
            o.extend_from_slice(s);
        }
    }
    write_signal(
        &opts.output,
        &Signal {
            sample_rate_hz: rate,
            channels: out,
        },
    )?;
    Ok(ProcessSummary {
        blocks,
        frames: blocks * n,
        channels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(channels: usize, frames: usize) -> Signal {
        Signal {
            sample_rate_hz: 48000,
            channels: (0..channels)
                .map(|c| (0..frames).map(|t| (c * 1000 + t) as f32 * 0.001 - 0.3).collect())
                .collect(),
        }
    }

    #[test]
    fn wav_header_layout() {
        let bytes = encode_wav(&sig(2, 3)).unwrap();
        assert_eq!(bytes.len(), 44 + 24);
        assert_eq!(&bytes[20..22], &3u16.to_le_bytes());
        assert_eq!(&bytes[22..24], &2u16.to_le_bytes());
        assert_eq!(&bytes[34..36], &32u16.to_le_bytes());
        // interleaved: frame 0 ch0, frame 0 ch1
        assert_eq!(&bytes[44..48], &(-0.3f32).to_le_bytes());
        assert_eq!(&bytes[48..52], &(1.0f32 - 0.3).to_le_bytes());
    }

    #[test]
    fn wav_two_channel_filters() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.wav");
        write_filters(&p, &sig(2, 480)).unwrap();
        let back = read_filters(&p, Some(48000)).unwrap();
        assert_eq!(back.channels.len(), 2);
        assert_eq!(back.frames(), 480);
        assert_eq!(back, sig(2, 480));
        assert!(matches!(
            read_filters(&p, Some(44100)),
            Err(Error::SampleRateMismatch { expected: 44100, found: 48000 })
        ));
    }

    #[test]
    fn raw_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.f32");
        write_filters(&p, &sig(4, 128)).unwrap();
        let meta = fs::read_to_string(sidecar_path(&p)).unwrap();
        assert_eq!(meta, "channels=4\nlength=128\nsample_rate=48000\n");
        let back = read_filters(&p, None).unwrap();
        assert_eq!(back, sig(4, 128));

        fs::write(sidecar_path(&p), "channels=4\nlength=129\nsample_rate=48000\n").unwrap();
        assert!(matches!(read_filters(&p, None), Err(Error::CorruptHeader { .. })));
        fs::write(sidecar_path(&p), "channels=4\nsample_rate=48000\n").unwrap();
        assert!(matches!(read_filters(&p, None), Err(Error::CorruptHeader { .. })));
    }

    #[test]
    fn rejects_non_float_wav() {
        let mut bytes = encode_wav(&sig(1, 4)).unwrap();
        bytes[20] = 1; // PCM
        assert!(matches!(
            decode_wav(&bytes, Path::new("x.wav")),
            Err(Error::UnsupportedFormat(_))
        ));
        assert!(matches!(
            decode_wav(b"RIFX\0\0\0\0WAVE", Path::new("x.wav")),
            Err(Error::CorruptHeader { .. })
        ));
        let good = encode_wav(&sig(1, 4)).unwrap();
        assert!(matches!(
            decode_wav(&good[..good.len() - 2], Path::new("x.wav")),
            Err(Error::CorruptHeader { .. })
        ));
    }

    #[test]
    fn reads_extensible_float() {
        let plain = encode_wav(&sig(3, 5)).unwrap();
        let mut ext = Vec::new();
        ext.extend_from_slice(b"RIFF\0\0\0\0WAVEfmt ");
        ext.extend_from_slice(&40u32.to_le_bytes());
        ext.extend_from_slice(&FORMAT_EXTENSIBLE.to_le_bytes());
        ext.extend_from_slice(&plain[22..36]);
        ext.extend_from_slice(&22u16.to_le_bytes());
        ext.extend_from_slice(&32u16.to_le_bytes());
        ext.extend_from_slice(&0u32.to_le_bytes());
        ext.extend_from_slice(&3u16.to_le_bytes());
        ext.extend_from_slice(&[0u8; 14]);
        ext.extend_from_slice(&plain[36..]);
        assert_eq!(decode_wav(&ext, Path::new("e.wav")).unwrap(), sig(3, 5));
    }

    #[test]
    fn unknown_extension() {
        assert!(matches!(
            read_signal(Path::new("filters.flac")),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn impulse_through_process_file() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.wav");
        let filters = dir.path().join("h.wav");
        let output = dir.path().join("out.wav");
        let mut x = vec![0.0; 100];
        x[0] = 1.0;
        write_signal(
            &input,
            &Signal {
                sample_rate_hz: 48000,
                channels: vec![x.clone()],
            },
        )
        .unwrap();
        let mut delta = vec![0.0; 10];
        delta[0] = 1.0;
        write_signal(
            &filters,
            &Signal {
                sample_rate_hz: 48000,
                channels: vec![delta.clone(), delta],
            },
        )
        .unwrap();
        let summary = process_file(&ProcessOptions {
            input,
            filters,
            fc_filters: None,
            block_size: 32,
            backend: Backend::Reference,
            output: output.clone(),
        })
        .unwrap();
        assert_eq!(summary, ProcessSummary { blocks: 4, frames: 128, channels: 2 });
        let out = read_signal(&output).unwrap();
        for ch in &out.channels {
            assert_eq!(ch.len(), 128);
            assert!((ch[0] - 1.0).abs() < 1e-6);
            assert!(ch[1..].iter().all(|v| v.abs() < 1e-6));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn round_trips_are_sample_exact(
                channels in 1usize..5,
                frames in 1usize..64,
                seed in any::<u32>(),
                raw in any::<bool>(),
            ) {
                let signal = Signal {
                    sample_rate_hz: 44100 + seed % 1000,
                    channels: (0..channels)
                        .map(|c| (0..frames).map(|t| f32::from_bits(((seed as usize + c * 7919 + t * 104729) as u32 % 0x7f00_0000) ^ ((t as u32 & 1) << 31))).collect())
                        .collect(),
                };
                let dir = tempfile::tempdir().unwrap();
                let p = dir.path().join(if raw { "f.f32" } else { "f.wav" });
                write_filters(&p, &signal).unwrap();
                let back = read_filters(&p, None).unwrap();
                prop_assert_eq!(back.sample_rate_hz, signal.sample_rate_hz);
                for (a, b) in back.channels.iter().zip(&signal.channels) {
                    prop_assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
                }
            }
        }
    }
}
