//! Labelled symbol datasets: chirps pushed through simulated or measured
//! channels with randomised impairments, one dataset per node.

mod file;

pub use file::{decode_dataset, encode_dataset, load_dataset, save_dataset, HEADER_LEN, META_LEN};

use std::ops::Range;
use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cdnn::LabeledBatch;
use crate::chirp_phy::{chirp_samples, decimate, ChirpDirection, ChirpParams};
use crate::error::{Error, Result};
use crate::rng;
use crate::chirp_phy::Waveform;
use crate::uwa_channel::{
    apply_channel, load_cir, rayleigh_cir, ChannelRealization, ImpairmentSpec, RayleighModelConfig, SnrReference,
};

/// Closed interval `[lo, hi]` sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    fn check(&self, name: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(Error::Config(format!("{name} range [{}, {}] is not well ordered", self.lo, self.hi)));
        }
        Ok(())
    }

    fn draw<R: Rng>(&self, r: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            r.random_range(self.lo..=self.hi)
        }
    }

    fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

/// Where each record's channel realization comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChannelSpec {
    Identity,
    /// A fresh realization per record (or per coherent frame).
    Rayleigh(RayleighModelConfig),
    /// A measured CIR file; each record uses a random window of it.
    Measured { path: PathBuf },
}

impl ChannelSpec {
    pub fn tag(&self) -> String {
        match self {
            Self::Identity => "identity".into(),
            Self::Rayleigh(c) => format!("rayleigh-fd{}", c.fd),
            Self::Measured { path } => {
                format!("cir:{}", path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    /// Total records; the first `train_fraction` share becomes the train split.
    pub symbols: usize,
    pub train_fraction: f64,
    pub chirp: ChirpParams,
    /// `None` means noiseless.
    pub snr_db: Option<Interval>,
    pub snr_reference: SnrReference,
    /// Timing offset in full-rate samples.
    pub sto_samples: Interval,
    /// Relative speed in m/s.
    pub rel_speed: Interval,
    pub channel: ChannelSpec,
    /// Records sharing one impairment draw; 1 draws per symbol.
    pub frame_len: usize,
    pub seed: u64,
}

impl Default for DatasetSpec {
    /// 1000 train + 250 test symbols at λ = 6 through an identity channel.
    fn default() -> Self {
        Self {
            symbols: 1250,
            train_fraction: 0.8,
            chirp: ChirpParams::default().with_lambda(6),
            snr_db: None,
            snr_reference: SnrReference::PerSample,
            sto_samples: Interval::point(0.0),
            rel_speed: Interval::point(0.0),
            channel: ChannelSpec::Identity,
            frame_len: 1,
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn n1(&self) -> usize {
        self.chirp.n1()
    }

    pub fn train_count(&self) -> usize {
        (self.symbols as f64 * self.train_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_signal()?;
        let tr = self.train_count();
        if tr == 0 || tr >= self.symbols {
            return Err(Error::Config(format!(
                "split of {} symbols at {} leaves an empty part",
                self.symbols, self.train_fraction
            )));
        }
        Ok(())
    }

    /// Checks everything except the train/test split.
    pub fn validate_signal(&self) -> Result<()> {
        self.chirp.validate()?;
        if let Some(s) = &self.snr_db {
            s.check("SNR")?;
        }
        self.sto_samples.check("STO")?;
        self.rel_speed.check("speed")?;
        let len = self.chirp.samples_per_symbol() as f64;
        if self.sto_samples.lo.abs() >= len || self.sto_samples.hi.abs() >= len {
            return Err(Error::Config("STO range must stay within one symbol".into()));
        }
        if self.frame_len == 0 {
            return Err(Error::Config("frame length must be at least 1".into()));
        }
        if self.chirp.lambda > u16::MAX as usize {
            return Err(Error::Config("lambda does not fit the dataset header".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolRecord {
    pub samples: Vec<f32>,
    pub label: u8,
    /// `+∞` when noiseless.
    pub snr_db: f32,
    pub sto_samples: f32,
    pub rel_speed: f32,
    /// Index into the dataset's tag table.
    pub tag: u16,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub tags: Vec<String>,
    pub train: Vec<SymbolRecord>,
    pub test: Vec<SymbolRecord>,
}

impl Dataset {
    pub fn n1(&self) -> usize {
        self.spec.n1()
    }

    pub fn train_batch(&self) -> Result<LabeledBatch> {
        to_batch(&self.train, self.n1())
    }

    pub fn test_batch(&self) -> Result<LabeledBatch> {
        to_batch(&self.test, self.n1())
    }
}

pub fn to_batch(records: &[SymbolRecord], n1: usize) -> Result<LabeledBatch> {
    let mut flat = Vec::with_capacity(records.len() * n1);
    for r in records {
        if r.samples.len() != n1 {
            return Err(Error::Input(format!("record has {} samples, expected {n1}", r.samples.len())));
        }
        flat.extend(r.samples.iter().map(|&v| v as f64));
    }
    let inputs = ndarray::Array2::from_shape_vec((records.len(), n1), flat)
        .map_err(|e| Error::Input(e.to_string()))?;
    LabeledBatch::new(inputs, records.iter().map(|r| r.label).collect())
}

enum Source {
    Identity(ChannelRealization),
    Rayleigh(RayleighModelConfig),
    Measured(ChannelRealization),
}

impl Source {
    fn resolve(spec: &ChannelSpec, fs: f64) -> Result<Self> {
        Ok(match spec {
            ChannelSpec::Identity => Self::Identity(ChannelRealization::identity(fs)),
            ChannelSpec::Rayleigh(c) => {
                c.validate()?;
                Self::Rayleigh(*c)
            }
            ChannelSpec::Measured { path } => {
                let h = load_cir(path)?;
                if (h.fs() - fs).abs() > 1e-9 * fs {
                    return Err(Error::Config(format!("CIR rate {} Hz differs from {} Hz", h.fs(), fs)));
                }
                Self::Measured(h)
            }
        })
    }

    fn draw(&self, len: usize, fs: f64, seed: u64) -> Result<ChannelRealization> {
        match self {
            Self::Identity(h) => Ok(h.clone()),
            Self::Rayleigh(c) => rayleigh_cir(c, len as f64 / fs, fs, seed),
            Self::Measured(h) => {
                let room = h.steps().saturating_sub(len);
                let start = if room == 0 { 0 } else { rng::seeded(seed).random_range(0..=room) };
                Ok(h.window(start, len))
            }
        }
    }
}

struct Draw {
    snr_db: f64,
    sto: f64,
    speed: f64,
    channel: ChannelRealization,
}

/// Synthesises every record of `spec` and splits it.
pub fn build_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut records = synthesize(spec, 0..spec.symbols)?;
    let test = records.split_off(spec.train_count());
    Ok(Dataset { spec: spec.clone(), tags: vec![spec.channel.tag()], train: records, test })
}

/// Records `range` of `spec`, ignoring `spec.symbols`. Record `i` depends
/// only on `(spec.seed, i)`, so chunks can be produced in any order.
pub fn synthesize(spec: &DatasetSpec, range: Range<usize>) -> Result<Vec<SymbolRecord>> {
    spec.validate_signal()?;
    let p = spec.chirp;
    let fs = p.fs;
    let len = p.samples_per_symbol();
    let source = Source::resolve(&spec.channel, fs)?;
    let templates = [chirp_samples(&p, ChirpDirection::Up), chirp_samples(&p, ChirpDirection::Down)];
    let mut records = Vec::with_capacity(range.len());
    let mut current: Option<(usize, Draw)> = None;
    for i in range {
        let frame = i / spec.frame_len;
        if current.as_ref().map(|c| c.0) != Some(frame) {
            let mut r = rng::stream(spec.seed, &[0x494d_50, frame as u64]);
            let snr_db = spec.snr_db.map_or(f64::INFINITY, |s| s.draw(&mut r));
            let sto = spec.sto_samples.draw(&mut r);
            let speed = spec.rel_speed.draw(&mut r);
            let channel = source
                .draw(len, fs, rng::derive_seed(spec.seed, &[0x4348_414e, frame as u64]))
                .map_err(|e| at_record(e, i))?;
            current = Some((frame, Draw { snr_db, sto, speed, channel }));
        }
        let d = &current.as_ref().expect("drawn above").1;
        let label = rng::stream(spec.seed, &[0x4c41_42, i as u64]).random_range(0..2u8);
        let x = Waveform::new(templates[label as usize].clone(), fs)?;
        let imp = ImpairmentSpec {
            snr_db: d.snr_db,
            snr_reference: spec.snr_reference,
            sto_samples: d.sto,
            rel_speed: d.speed,
            ..Default::default()
        };
        let y = apply_channel(&x, &d.channel, &imp, rng::derive_seed(spec.seed, &[0x4e4f_4953, i as u64]))
            .map_err(|e| at_record(e, i))?;
        let samples = decimate(&y.samples, p.lambda).into_iter().map(|v| v as f32).collect();
        records.push(SymbolRecord {
            samples,
            label,
            snr_db: d.snr_db as f32,
            sto_samples: d.sto as f32,
            rel_speed: d.speed as f32,
            tag: 0,
        });
    }
    Ok(records)
}

fn at_record(e: Error, i: usize) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("record {i}: {m}")),
        Error::Input(m) => Error::Input(format!("record {i}: {m}")),
        other => other,
    }
}

/// Train and test batches of a freshly built node dataset.
pub fn build_node_dataset(spec: &DatasetSpec) -> Result<(LabeledBatch, LabeledBatch)> {
    let d = build_dataset(spec)?;
    Ok((d.train_batch()?, d.test_batch()?))
}

/// Per-dimension offsets `(d_lo, d_hi)` added to a spec's ranges.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DomainShift {
    pub snr_db: (f64, f64),
    pub sto_samples: (f64, f64),
    pub rel_speed: (f64, f64),
}

/// Moves the impairment ranges of `spec` by `delta`. With `require_disjoint`
/// every shifted dimension must end up outside its source range.
pub fn shift_domain(spec: &DatasetSpec, delta: &DomainShift, require_disjoint: bool) -> Result<DatasetSpec> {
    let shift = |iv: Interval, d: (f64, f64), name: &str| -> Result<Interval> {
        if d == (0.0, 0.0) {
            return Ok(iv);
        }
        let out = Interval::new(iv.lo + d.0, iv.hi + d.1);
        out.check(name)?;
        if require_disjoint && out.overlaps(&iv) {
            return Err(Error::Config(format!(
                "shifted {name} range [{}, {}] overlaps the source [{}, {}]",
                out.lo, out.hi, iv.lo, iv.hi
            )));
        }
        Ok(out)
    };
    let mut out = spec.clone();
    if let Some(s) = spec.snr_db {
        out.snr_db = Some(shift(s, delta.snr_db, "SNR")?);
    } else if delta.snr_db != (0.0, 0.0) {
        return Err(Error::Config("cannot shift the SNR of a noiseless spec".into()));
    }
    out.sto_samples = shift(spec.sto_samples, delta.sto_samples, "STO")?;
    out.rel_speed = shift(spec.rel_speed, delta.rel_speed, "speed")?;
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdnn::{self, Layout, MlpParams, TrainConfig};
    use crate::chirp_phy::MatchedFilter;
    use crate::dsp::energy;
    use std::collections::HashSet;

    fn small(seed: u64) -> DatasetSpec {
        DatasetSpec { symbols: 200, seed, ..Default::default() }
    }

    #[test]
    fn clean_records_are_detected_perfectly() {
        let d = build_dataset(&small(1)).unwrap();
        let mf = MatchedFilter::new(&d.spec.chirp).unwrap();
        for r in d.train.iter().chain(&d.test) {
            let x: Vec<f64> = r.samples.iter().map(|&v| v as f64).collect();
            assert_eq!(mf.detect(&x).unwrap().bit, r.label);
            assert_eq!(r.samples.len(), 160);
        }
        assert_eq!(d.train.len(), 160);
        assert_eq!(d.test.len(), 40);
    }

    #[test]
    fn labels_are_balanced() {
        let d = build_dataset(&DatasetSpec { symbols: 10_000, ..small(2) }).unwrap();
        let ones = d.train.iter().chain(&d.test).filter(|r| r.label == 1).count();
        // 2% is 4 binomial standard deviations at n = 10⁴.
        assert!((ones as f64 / 1e4 - 0.5).abs() < 0.02, "{ones}");
    }

    #[test]
    fn deterministic_and_seed_dependent() {
        let spec = DatasetSpec { snr_db: Some(Interval::new(0.0, 10.0)), sto_samples: Interval::new(-50.0, 50.0), ..small(3) };
        let a = build_dataset(&spec).unwrap();
        assert_eq!(a, build_dataset(&spec).unwrap());
        let b = build_dataset(&DatasetSpec { seed: 4, ..spec }).unwrap();
        assert_ne!(a.train[0].samples, b.train[0].samples);
    }

    #[test]
    fn seeds_share_marginal_statistics() {
        let spec = DatasetSpec { symbols: 4000, snr_db: Some(Interval::new(0.0, 10.0)), ..small(5) };
        let stats = |seed| {
            let d = build_dataset(&DatasetSpec { seed, ..spec.clone() }).unwrap();
            let recs: Vec<&SymbolRecord> = d.train.iter().chain(&d.test).collect();
            let snr = recs.iter().map(|r| r.snr_db as f64).sum::<f64>() / recs.len() as f64;
            let pow = recs.iter().map(|r| r.samples.iter().map(|&v| (v as f64).powi(2)).sum::<f64>()).sum::<f64>()
                / (recs.len() * 160) as f64;
            (snr, pow)
        };
        let (s1, p1) = stats(5);
        let (s2, p2) = stats(6);
        // Uniform SNR on [0, 10]: sd of the mean ≈ 2.89/√4000 = 0.046 dB.
        assert!((s1 - s2).abs() < 0.3, "{s1} {s2}");
        assert!((p1 - p2).abs() / p1 < 0.05, "{p1} {p2}");
    }

    #[test]
    fn splits_are_disjoint() {
        let spec = DatasetSpec { snr_db: Some(Interval::new(5.0, 5.0)), ..small(7) };
        let d = build_dataset(&spec).unwrap();
        let key = |r: &SymbolRecord| r.samples.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        let train: HashSet<_> = d.train.iter().map(key).collect();
        assert!(d.test.iter().all(|r| !train.contains(&key(r))));
    }

    #[test]
    fn recorded_snr_matches_measured_noise() {
        let base = DatasetSpec { symbols: 400, chirp: ChirpParams::default(), ..small(8) };
        let clean = build_dataset(&base).unwrap();
        for snr in [0.0, 10.0] {
            let noisy = build_dataset(&DatasetSpec { snr_db: Some(Interval::point(snr)), ..base.clone() }).unwrap();
            let (mut sig, mut noise) = (0.0, 0.0);
            for (c, n) in clean.train.iter().zip(&noisy.train) {
                assert_eq!(n.snr_db as f64, snr);
                let c: Vec<f64> = c.samples.iter().map(|&v| v as f64).collect();
                let d: Vec<f64> = n.samples.iter().zip(&c).map(|(&a, b)| a as f64 - b).collect();
                sig += energy(&c);
                noise += energy(&d);
            }
            let measured = 10.0 * (sig / noise).log10();
            assert!((measured - snr).abs() < 0.5, "{measured} vs {snr}");
        }
    }

    #[test]
    fn chunks_match_the_whole() {
        let spec = DatasetSpec { snr_db: Some(Interval::new(0.0, 9.0)), frame_len: 3, ..small(13) };
        let whole = synthesize(&spec, 0..50).unwrap();
        let mut parts = synthesize(&spec, 0..17).unwrap();
        parts.extend(synthesize(&spec, 17..50).unwrap());
        assert_eq!(whole, parts);
    }

    #[test]
    fn frames_share_impairments() {
        let spec = DatasetSpec { frame_len: 5, sto_samples: Interval::new(0.0, 100.0), ..small(9) };
        let d = build_dataset(&spec).unwrap();
        let stos: Vec<f32> = d.train.iter().map(|r| r.sto_samples).collect();
        for chunk in stos.chunks(5) {
            assert!(chunk.iter().all(|&s| s == chunk[0]));
        }
        assert_ne!(stos[0], stos[5]);
    }

    #[test]
    fn rayleigh_channel_records() {
        let spec = DatasetSpec {
            channel: ChannelSpec::Rayleigh(RayleighModelConfig::for_bandwidth(1000.0, 2.0)),
            snr_db: Some(Interval::point(20.0)),
            ..small(10)
        };
        let d = build_dataset(&spec).unwrap();
        assert_eq!(d.tags, vec!["rayleigh-fd2".to_string()]);
        assert!(d.train.iter().all(|r| r.samples.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn invalid_specs() {
        assert!(build_dataset(&DatasetSpec { sto_samples: Interval::new(3.0, 1.0), ..small(0) }).is_err());
        assert!(build_dataset(&DatasetSpec { train_fraction: 1.0, ..small(0) }).is_err());
        assert!(build_dataset(&DatasetSpec { sto_samples: Interval::point(960.0), ..small(0) }).is_err());
    }

    #[test]
    fn interval_shift() {
        let src = DatasetSpec { rel_speed: Interval::new(0.0, 5.0), ..small(0) };
        let delta = DomainShift { rel_speed: (8.0, 7.0), ..Default::default() };
        let out = shift_domain(&src, &delta, true).unwrap();
        assert_eq!(out.rel_speed, Interval::new(8.0, 12.0));
        assert_eq!(shift_domain(&src, &DomainShift::default(), true).unwrap(), src);
        let overlapping = DomainShift { rel_speed: (2.0, 2.0), ..Default::default() };
        assert!(matches!(shift_domain(&src, &overlapping, true), Err(Error::Config(_))));
        assert!(shift_domain(&src, &overlapping, false).is_ok());
    }

    #[test]
    fn shifted_domain_degrades_a_trained_receiver() {
        let src = DatasetSpec {
            symbols: 1500,
            snr_db: Some(Interval::point(5.0)),
            sto_samples: Interval::new(0.0, 40.0),
            ..small(11)
        };
        let target = shift_domain(&src, &DomainShift { sto_samples: (200.0, 260.0), ..Default::default() }, true).unwrap();
        let (train, test) = build_node_dataset(&src).unwrap();
        let (_, shifted) = build_node_dataset(&DatasetSpec { seed: 12, ..target }).unwrap();
        let layout = Layout::receiver(160, 32, 16).unwrap();
        let init = MlpParams::init(layout, &mut rng::seeded(1));
        let cfg = TrainConfig { epochs: 30, batch_size: 64, optimizer: cdnn::Optimizer::adam(1e-3), seed: 1 };
        let (p, _) = cdnn::train(&init, &train, &cfg).unwrap();
        let own = cdnn::accuracy(&p, &test).unwrap();
        let ec = cdnn::accuracy(&p, &shifted).unwrap();
        assert!(own > ec, "{own} vs {ec}");
    }
}
