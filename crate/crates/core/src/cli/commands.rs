//! Subcommand bodies. Each returns its CSV text; the caller adds the header.

use std::fmt::Write as _;
use std::path::Path;

use super::{
    BerSweepArgs, BoundArgs, CirCommand, Command, ComplexityArgs, DetectorArg, Failure, GenDataArgs, MetaArg,
    ModeArg, OptimizerArg, Report, RunFedArgs, SignalArgs, SnrRef, TrainSingleArgs, XiArg, EXIT_OK, EXIT_VALIDITY,
};
use crate::bound::{derive_constants, gap_bound, heterogeneity_term, m_of_t, tz_bound, SmoothnessConstants, XiVariant};
use crate::cdnn::{self, Layout, MlpParams, Optimizer, TrainConfig};
use crate::chirp_phy::{default_hidden, dnn_op_count, mf_op_count, ChirpParams, ComplexityReport, MatchedFilter};
use crate::datasets::{
    build_dataset, load_dataset, save_dataset, shift_domain, synthesize, to_batch, DatasetSpec, DomainShift, Interval,
    SymbolRecord,
};
use crate::dsp::wilson_half_width;
use crate::error::{Error, Result};
use crate::fml::{run_rounds, write_round_csv, FedMode, FmlConfig, MetaMode, NodeState};
use crate::rng;
use crate::uwa_channel::{load_cir, rayleigh_cir, save_cir, ChannelRealization, RayleighModelConfig, SnrReference};

const INIT_KEY: u64 = 0x494e_4954;
const NODE_KEY: u64 = 0x4e4f_4445;
const EVAL_KEY: u64 = 0x4556_414c;
const SCHED_KEY: u64 = 0x5343_4844;
const SHUFFLE_KEY: u64 = 0x5348_5546;
const SWEEP_KEY: u64 = 0x5357_4550;
const CHUNK: usize = 2048;

pub(crate) fn dispatch(cmd: &Command, seed: u64) -> std::result::Result<Report, Failure> {
    Ok(match cmd {
        Command::GenData(a) => Report::ok(gen_data(a, seed)?),
        Command::TrainSingle(a) => Report::ok(train_single(a, seed)?),
        Command::BerSweep(a) => Report::ok(ber_sweep(a, seed)?),
        Command::RunFed(a) => run_fed(a, seed)?,
        Command::Bound(a) => bound(a)?,
        Command::Complexity(a) => Report::ok(complexity(a)?),
        Command::Cir(CirCommand::Generate(a)) => {
            let cfg = RayleighModelConfig { a: a.a, ..RayleighModelConfig::for_bandwidth(a.bandwidth, a.fd) };
            let h = rayleigh_cir(&cfg, a.duration, a.fs, seed)?;
            save_cir(&a.out, &h)?;
            Report::ok(tap_table(&h)?)
        }
        Command::Cir(CirCommand::Inspect(a)) => {
            let h = load_cir(&a.path)?;
            let mut r = Report::ok(tap_table(&h)?);
            r.extra_header.push(format!("# model: {}", h.meta.model));
            Report { code: EXIT_OK, ..r }
        }
    })
}

fn chirp(s: &SignalArgs) -> ChirpParams {
    ChirpParams { f1: s.f1, f2: s.f2, duration: s.duration, fs: s.fs, phi0: 0.0, lambda: s.lambda }
}

fn base_spec(s: &SignalArgs, seed: u64) -> Result<DatasetSpec> {
    let p = chirp(s);
    p.validate()?;
    let snr_reference = match s.snr_ref {
        SnrRef::Sample => SnrReference::PerSample,
        SnrRef::Symbol => SnrReference::PerSymbol { samples: p.samples_per_symbol() },
    };
    Ok(DatasetSpec {
        chirp: p,
        snr_reference,
        channel: s.channel.to_spec(s.bandwidth, s.fd),
        seed,
        ..Default::default()
    })
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn gen_data(a: &GenDataArgs, seed: u64) -> Result<String> {
    let spec = DatasetSpec {
        symbols: a.symbols,
        train_fraction: a.train_fraction,
        snr_db: a.snr_db.map(Interval::from),
        sto_samples: a.sto.into(),
        rel_speed: a.speed.into(),
        frame_len: a.frame_len,
        ..base_spec(&a.signal, seed)?
    };
    let d = build_dataset(&spec)?;
    save_dataset(&a.out, &d)?;
    let mut out = String::from("split,records,ones,mean_snr_db,mean_sto,mean_speed\n");
    for (name, recs) in [("train", &d.train), ("test", &d.test)] {
        let ones = recs.iter().filter(|r| r.label == 1).count();
        writeln!(
            out,
            "{name},{},{ones},{},{},{}",
            recs.len(),
            mean(recs.iter().map(|r| r.snr_db as f64)),
            mean(recs.iter().map(|r| r.sto_samples as f64)),
            mean(recs.iter().map(|r| r.rel_speed as f64)),
        )
        .expect("string write");
    }
    Ok(out)
}

fn layout_for(n1: usize, hidden: Option<&super::Sizes>) -> Result<Layout> {
    let h = hidden.map(|s| s.0.clone()).unwrap_or_else(|| default_hidden(n1));
    let mut sizes = vec![n1];
    sizes.extend(h);
    sizes.push(1);
    Layout::new(&sizes)
}

fn train_single(a: &TrainSingleArgs, seed: u64) -> Result<String> {
    let d = load_dataset(&a.data)?;
    let (train, test) = (d.train_batch()?, d.test_batch()?);
    let layout = layout_for(d.n1(), a.hidden.as_ref())?;
    let init = MlpParams::init(layout, &mut rng::stream(seed, &[INIT_KEY]));
    if !(a.lr > 0.0 && a.lr.is_finite()) {
        return Err(Error::Config(format!("learning rate must be positive, got {}", a.lr)));
    }
    let optimizer = match a.optimizer {
        OptimizerArg::Adam => Optimizer::adam(a.lr),
        OptimizerArg::Sgd => Optimizer::Sgd { lr: a.lr },
    };
    let cfg = TrainConfig { epochs: a.epochs, batch_size: a.batch, optimizer, seed: rng::derive_seed(seed, &[SHUFFLE_KEY]) };
    let mut out = String::from("epoch,train_loss,test_loss,test_ber\n");
    let (p, _) = cdnn::train_observed(&init, &train, &cfg, |epoch, p, l| {
        let tl = cdnn::loss(p, &test)?;
        let ber = cdnn::ber_eval(p, &test)?;
        writeln!(out, "{},{l},{tl},{ber}", epoch + 1).expect("string write");
        Ok(())
    })?;
    if let Some(path) = &a.checkpoint {
        cdnn::save_checkpoint(path, &p)?;
    }
    Ok(out)
}

fn count_errors(records: &[SymbolRecord], det: DetectorArg, mf: &MatchedFilter, net: Option<&MlpParams>, n1: usize) -> Result<u64> {
    match det {
        DetectorArg::Mf => {
            let mut errors = 0;
            let mut x = vec![0.0; n1];
            for r in records {
                for (d, s) in x.iter_mut().zip(&r.samples) {
                    *d = *s as f64;
                }
                errors += (mf.detect(&x)?.bit != r.label) as u64;
            }
            Ok(errors)
        }
        DetectorArg::Dnn => {
            let p = net.expect("checked by the caller");
            let batch = to_batch(records, n1)?;
            let out = cdnn::predict(p, batch.inputs())?;
            Ok(out.iter().zip(batch.labels()).filter(|(o, &y)| ((**o >= 0.5) as u8) != y).count() as u64)
        }
    }
}

fn ber_sweep(a: &BerSweepArgs, seed: u64) -> Result<String> {
    let base = base_spec(&a.signal, seed)?;
    let n1 = base.n1();
    let net = if a.detector.contains(&DetectorArg::Dnn) {
        let path = a
            .checkpoint
            .as_ref()
            .ok_or_else(|| Error::Config("--checkpoint is required for the dnn detector".into()))?;
        let p = cdnn::load_checkpoint(path)?;
        if p.layout().input_len() != n1 {
            return Err(Error::Config(format!(
                "checkpoint expects {} inputs but lambda {} gives {n1}",
                p.layout().input_len(),
                base.chirp.lambda
            )));
        }
        Some(p)
    } else {
        None
    };
    let mf = MatchedFilter::new(&base.chirp)?;
    let mut out = String::from("snr_db,detector,lambda,sto,speed,ber,trials,errors,ci95\n");
    if a.trials == 0 {
        return Ok(out);
    }
    for (i_sto, &sto) in a.sto.0.iter().enumerate() {
        for (i_speed, &speed) in a.speed.0.iter().enumerate() {
            for (i_snr, &snr) in a.snr_db.0.iter().enumerate() {
                let spec = DatasetSpec {
                    snr_db: if snr.is_infinite() { None } else { Some(Interval::point(snr)) },
                    sto_samples: Interval::point(sto),
                    rel_speed: Interval::point(speed),
                    seed: rng::derive_seed(seed, &[SWEEP_KEY, i_sto as u64, i_speed as u64, i_snr as u64]),
                    ..base.clone()
                };
                let mut errors = vec![0u64; a.detector.len()];
                let mut start = 0;
                while start < a.trials {
                    let end = (start + CHUNK).min(a.trials);
                    let recs = synthesize(&spec, start..end)?;
                    for (e, &det) in errors.iter_mut().zip(&a.detector) {
                        *e += count_errors(&recs, det, &mf, net.as_ref(), n1)?;
                    }
                    start = end;
                }
                for (&det, &e) in a.detector.iter().zip(&errors) {
                    let name = match det {
                        DetectorArg::Mf => "mf",
                        DetectorArg::Dnn => "dnn",
                    };
                    let t = a.trials as u64;
                    writeln!(
                        out,
                        "{snr},{name},{},{sto},{speed},{},{t},{e},{}",
                        base.chirp.lambda,
                        e as f64 / t as f64,
                        wilson_half_width(e, t)
                    )
                    .expect("string write");
                }
            }
        }
    }
    Ok(out)
}

fn node_files(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "uwds"))
        .collect();
    files.sort();
    Ok(files)
}

fn run_fed(a: &RunFedArgs, seed: u64) -> Result<Report> {
    let base = DatasetSpec {
        symbols: a.symbols,
        train_fraction: a.train_fraction,
        snr_db: Some(a.snr_db.into()),
        sto_samples: a.sto.into(),
        rel_speed: a.speed.into(),
        ..base_spec(&a.signal, seed)?
    };
    let datasets = match &a.data_dir {
        Some(dir) => node_files(dir)?.iter().map(|p| load_dataset(p)).collect::<Result<Vec<_>>>()?,
        None => (0..a.k)
            .map(|i| build_dataset(&DatasetSpec { seed: rng::derive_seed(seed, &[NODE_KEY, i as u64]), ..base.clone() }))
            .collect::<Result<Vec<_>>>()?,
    };
    let n1 = datasets.first().map(|d| d.n1()).ok_or_else(|| Error::Config("no node datasets".into()))?;
    let layout = layout_for(n1, a.hidden.as_ref())?;
    let nodes = datasets
        .iter()
        .enumerate()
        .map(|(i, d)| NodeState::new(i as u64, layout.clone(), d.train_batch()?, d.test_batch()?))
        .collect::<Result<Vec<_>>>()?;
    let shift = DomainShift {
        sto_samples: a.eval_shift_sto.map_or((0.0, 0.0), |s| (s.0, s.1)),
        rel_speed: a.eval_shift_speed.map_or((0.0, 0.0), |s| (s.0, s.1)),
        ..Default::default()
    };
    let shifted = a.eval_shift_sto.is_some() || a.eval_shift_speed.is_some();
    let eval_spec = shift_domain(&base, &shift, shifted)?;
    let eval = (0..a.eval_nodes)
        .map(|j| {
            let d = build_dataset(&DatasetSpec { seed: rng::derive_seed(seed, &[EVAL_KEY, j as u64]), ..eval_spec.clone() })?;
            NodeState::new(1_000_000 + j as u64, layout.clone(), d.train_batch()?, d.test_batch()?)
        })
        .collect::<Result<Vec<_>>>()?;
    let cfg = FmlConfig {
        k: a.k,
        g: a.g,
        alpha: a.alpha,
        beta: a.beta,
        t0: a.t0,
        rounds: a.rounds,
        p_decode: a.p_decode,
        meta_mode: match a.meta {
            MetaArg::Exact => MetaMode::Exact,
            MetaArg::FirstOrder => MetaMode::FirstOrder,
        },
        fl_lr: a.fl_lr,
        seed: rng::derive_seed(seed, &[SCHED_KEY]),
    };
    cfg.validate()?;
    let mode = match a.mode {
        ModeArg::Fml => FedMode::Fml,
        ModeArg::Fl => FedMode::Fl,
    };
    let init = MlpParams::init(layout, &mut rng::stream(seed, &[INIT_KEY])).into_values();
    let res = run_rounds(&cfg, &nodes, &init, mode, &eval)?;
    let mut buf = Vec::new();
    write_round_csv(&mut buf, &res.logs)?;
    let mode_name = if mode == FedMode::Fml { "fml" } else { "fl" };
    Ok(Report {
        extra_header: vec![format!(
            "# mode={mode_name} alpha={} beta={} G={} N={} K={} T0={}",
            cfg.alpha,
            cfg.beta,
            cfg.g,
            cfg.n(),
            cfg.k,
            cfg.t0
        )],
        body: String::from_utf8(buf).expect("CSV is UTF-8"),
        code: EXIT_OK,
    })
}

fn bound(a: &BoundArgs) -> Result<Report> {
    let variant = match a.xi {
        XiArg::Theorem => XiVariant::Theorem,
        XiArg::Proof => XiVariant::Proof,
    };
    let mut out = String::from("t0,mu_p,h_p,mu_pp,h_pp,alpha_p,xi,m_t0,k_m,tz,tz_ceil,gap_at_tz_ceil,flags\n");
    let mut code = EXIT_OK;
    for &t0 in &a.t0.0 {
        let c = SmoothnessConstants {
            mu: a.mu,
            h: a.h,
            rho: a.rho,
            b: a.b,
            delta: a.delta,
            sigma: a.sigma,
            alpha: a.alpha,
            beta: a.beta,
            c: a.c,
            tau: a.tau,
            n_nodes: a.n_nodes,
            t0,
            n: a.n,
            epsilon: a.epsilon,
        };
        c.validate()?;
        let d = derive_constants(&c, variant);
        let mut flags: Vec<String> = d.failed_flags().iter().map(|s| s.to_string()).collect();
        let t = u32::try_from(t0).map_err(|_| Error::Config("T0 too large".into()))?;
        let m = m_of_t(&d, t).map_err(|_| flags.push("beta_h_p_outside_unit_interval".into())).ok();
        let (km, tz) = if flags.is_empty() {
            match (heterogeneity_term(&c, variant), tz_bound(&c, variant)) {
                (Ok(km), Ok(tz)) => (Some(km), Some(tz)),
                (km, _) => {
                    flags.push("log_argument<=0".into());
                    (km.ok(), None)
                }
            }
        } else {
            (None, None)
        };
        let ceil = tz.map(|v| v.ceil().max(0.0));
        let gap = match ceil {
            Some(r) => Some(gap_bound(&c, variant, r as u32)?),
            None => None,
        };
        if !flags.is_empty() {
            code = EXIT_VALIDITY;
        }
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{t0},{},{},{},{},{},{},{},{},{},{},{},{}",
            d.mu_p,
            d.h_p,
            d.mu_pp,
            d.h_pp,
            d.alpha_p,
            d.xi,
            opt(m),
            opt(km),
            opt(tz),
            opt(ceil),
            opt(gap),
            if flags.is_empty() { "ok".to_string() } else { flags.join(";") }
        )
        .expect("string write");
    }
    Ok(Report { extra_header: Vec::new(), body: out, code })
}

/// Printed complexity table: `(receiver, λ, ADD, MUL, NAV, advantage %)`.
const TABLE: [(&str, usize, u64, u64, u64, Option<f64>); 4] = [
    ("mf", 1, 1_919, 1_842_240, 0, Some(4186.5)),
    ("mf", 2, 959, 460_320, 0, Some(972.2)),
    ("mf", 6, 319, 51_040, 0, Some(19.4)),
    ("dnn", 6, 301, 42_420, 301, None),
];

fn table_entry(receiver: &str, lambda: usize) -> Option<(u64, u64, u64, Option<f64>)> {
    TABLE.iter().find(|t| t.0 == receiver && t.1 == lambda).map(|t| (t.2, t.3, t.4, t.5))
}

fn n1_for(symbol_samples: usize, lambda: usize) -> Result<usize> {
    if lambda == 0 || symbol_samples % lambda != 0 {
        return Err(Error::Config(format!("lambda {lambda} does not divide {symbol_samples} samples")));
    }
    Ok(symbol_samples / lambda)
}

fn complexity(a: &ComplexityArgs) -> Result<String> {
    let dn1 = n1_for(a.symbol_samples, a.dnn_lambda)?;
    let hidden: Vec<u64> = a
        .hidden
        .as_ref()
        .map(|h| h.0.clone())
        .unwrap_or_else(|| default_hidden(dn1))
        .into_iter()
        .map(|v| v as u64)
        .collect();
    let default_arch = a.hidden.is_none() && a.symbol_samples == 960;
    let dnn = dnn_op_count(dn1 as u64, &hidden);
    let dnn_table = table_entry("dnn", a.dnn_lambda).filter(|_| default_arch);
    let dnn_table_total = dnn_table.map(|t| t.0 + t.1 + t.2);
    let mut out = String::from(
        "receiver,lambda,n1,add,mul,nav,total,advantage_pct,table_add,table_mul,table_nav,table_total,table_advantage_pct,printed_advantage_pct,mismatch\n",
    );
    let pct = |mf: u64, d: u64| (mf as f64 - d as f64) / d as f64 * 100.0;
    let mut row = |name: &str, lambda: usize, n1: usize, r: &ComplexityReport, table: Option<(u64, u64, u64, Option<f64>)>| {
        let adv = (name == "mf").then(|| pct(r.total, dnn.total));
        let t_total = table.map(|t| t.0 + t.1 + t.2);
        let t_adv = match (name, t_total, dnn_table_total) {
            ("mf", Some(m), Some(d)) => Some(pct(m, d)),
            _ => None,
        };
        let printed = table.and_then(|t| t.3);
        let mismatch = table.map(|t| {
            let mut m = Vec::new();
            if t.0 != r.additions {
                m.push("add");
            }
            if t.1 != r.multiplications {
                m.push("mul");
            }
            if t.2 != r.nonlinear_activations {
                m.push("nav");
            }
            if t_total != Some(r.total) {
                m.push("total");
            }
            if let (Some(p), Some(t)) = (printed, t_adv) {
                if (p - t).abs() > 0.05 {
                    m.push("printed_advantage");
                }
            }
            if m.is_empty() {
                "none".to_string()
            } else {
                m.join(";")
            }
        });
        let f1 = |v: Option<f64>| v.map(|x| format!("{x:.1}")).unwrap_or_default();
        let u = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{name},{lambda},{n1},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.additions,
            r.multiplications,
            r.nonlinear_activations,
            r.total,
            f1(adv),
            u(table.map(|t| t.0)),
            u(table.map(|t| t.1)),
            u(table.map(|t| t.2)),
            u(t_total),
            f1(t_adv),
            f1(printed),
            mismatch.unwrap_or_default()
        )
        .expect("string write");
    };
    for &lambda in &a.mf_lambda.0 {
        let n1 = n1_for(a.symbol_samples, lambda)?;
        let table = table_entry("mf", lambda).filter(|_| a.symbol_samples == 960);
        row("mf", lambda, n1, &mf_op_count(n1 as u64), table);
    }
    row("dnn", a.dnn_lambda, dn1, &dnn, dnn_table);
    Ok(out)
}

fn tap_table(h: &ChannelRealization) -> Result<String> {
    let d = h.tap_delay_samples()?;
    let mut out = String::from("tap,delay_s,mean_power\n");
    for k in 0..h.num_taps() {
        let s = h.tap_series(k);
        let p = s.iter().map(|g| (g.norm_sqr()) as f64).sum::<f64>() / s.len() as f64;
        writeln!(out, "{k},{},{p}", (k * d) as f64 / h.fs()).expect("string write");
    }
    Ok(out)
}
