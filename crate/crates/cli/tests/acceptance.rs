//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Run with `cargo test -p neurocnc-cli --test acceptance`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::thread;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use neurocnc::config::Config;
use neurocnc::corpus::{generate_family, Family};
use neurocnc::dnc::{memory_pair, receive_payload, send_payload, DncConfig, DncError, Fault, FaultyChannel};
use neurocnc::geometry::Point3;
use neurocnc::nc::{merge_streams, parse_program, split_program, Address, Block, NcProgram, Word, DEFAULT_HEADER};
use neurocnc::neural::encode::toolpath_points;
use neurocnc::neural::{decode_toolpath, encode_toolpath, Bank, Encoding, Network, Pair, Verdict};
use neurocnc::part_model::{load_part, Stock};
use neurocnc::pipeline::{generate_program, plan_operations, simulate_part, teach_bank, verify_part, Mode};
use neurocnc::planner::{CuttingParams, PathBuilder, Sense};
use neurocnc::recognition::OperationClass;
use neurocnc::sim::{SimConfig, Simulator};

type Check = Result<String, String>;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn golden_corpus(cfg: &Config) -> Check {
    let start = Instant::now();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(root().join("fixtures/parts"))
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    ensure(paths.len() == 10, || format!("{} golden parts", paths.len()))?;
    let mut classes = BTreeSet::new();
    let mut worst: f64 = 0.0;
    for path in &paths {
        let name = path.display().to_string();
        let part = load_part(path).map_err(|e| format!("{name}: {e}"))?;
        let ops = plan_operations(&part, Mode::Teacher, None, cfg).map_err(|e| format!("{name}: {e}"))?;
        classes.extend(ops.iter().map(|o| o.class));
        let text = generate_program(&part, Mode::Teacher, None, cfg)
            .map_err(|e| format!("{name}: {e}"))?
            .to_text();
        let program = parse_program(&text).map_err(|e| format!("{name}: {e}"))?;
        let (_, m) = simulate_part(&part, &program, cfg, None).map_err(|e| format!("{name}: {e}"))?;
        ensure(m.deviation.max_dev <= 0.5, || format!("{name}: max_dev {:.3}", m.deviation.max_dev))?;
        worst = worst.max(m.deviation.max_dev);
    }
    ensure(classes.len() == OperationClass::ALL.len(), || format!("{} of 14 classes", classes.len()))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("10 parts, 14 classes, worst max_dev {worst:.3} mm, {secs:.1} s"))
}

fn teaching(cfg: &Config) -> Result<(Bank, String), String> {
    let start = Instant::now();
    let corpus: Vec<_> = Family::ALL
        .into_iter()
        .flat_map(|f| generate_family(f, 40, cfg.seed))
        .collect();
    let classes = neurocnc::corpus::teachable_classes();
    let (bank, run) = teach_bank(&corpus, &classes, cfg);
    let secs = start.elapsed().as_secs_f64();
    let mut notes = Vec::new();
    for c in &run.classes {
        let r = c.report.as_ref().ok_or_else(|| format!("{}: {:?}", c.class, c.error))?;
        let m = r.test_metrics.last().ok_or("no metrics")?;
        ensure(
            r.verdict == Verdict::Success && r.rounds <= 5 && m.mean_err <= 0.01 && m.max_err <= 0.03,
            || format!("{}: {:?} after {} rounds, {:.4}/{:.4}", c.class, r.verdict, r.rounds, m.mean_err, m.max_err),
        )?;
        notes.push(format!("{} {}r", c.class, r.rounds));
    }
    use OperationClass::*;
    for need in [DrillNormal, DrillDeep, PocketMill, ContourFinish] {
        ensure(bank.networks.contains_key(&need), || format!("{need} not taught"))?;
    }
    ensure(secs < 600.0, || format!("took {secs:.1} s"))?;
    Ok((bank, format!("{} ({secs:.1} s)", notes.join(", "))))
}

fn generalization(bank: &Bank, cfg: &Config) -> Check {
    let held_out = cfg.seed.wrapping_add(7919);
    let mut worst_h: f64 = 0.0;
    let mut worst_dev: f64 = 0.0;
    let mut per_class = std::collections::BTreeMap::<OperationClass, usize>::new();
    for fam in Family::ALL {
        for (i, part) in generate_family(fam, 10, held_out).iter().enumerate() {
            let name = format!("{fam} {i}");
            let r = verify_part(part, &name, bank, cfg).map_err(|e| format!("{name}: {e}"))?;
            let limit = 0.02 * part.stock.diagonal();
            for op in &r.operations {
                ensure(op.hausdorff <= limit, || {
                    format!("{name} {}: hausdorff {:.3} > {limit:.3}", op.class, op.hausdorff)
                })?;
                *per_class.entry(op.class).or_default() += 1;
                worst_h = worst_h.max(op.hausdorff / part.stock.diagonal());
            }
            ensure(r.nn.deviation.max_dev <= 1.0, || {
                format!("{name}: nn max_dev {:.3}", r.nn.deviation.max_dev)
            })?;
            worst_dev = worst_dev.max(r.nn.deviation.max_dev);
        }
    }
    for class in bank.networks.keys() {
        let n = per_class.get(class).copied().unwrap_or(0);
        ensure(n >= 10, || format!("{class}: {n} held-out operations"))?;
    }
    Ok(format!(
        "worst hausdorff {:.2}% of diagonal, worst nn max_dev {worst_dev:.3} mm",
        100.0 * worst_h
    ))
}

fn oracle_loss(n: &Network, pairs: &[Pair]) -> f64 {
    let mut total = 0.0;
    for (x, t) in pairs {
        let h: Vec<f64> = (0..n.hidden_dim)
            .map(|j| {
                let z: f64 = n.b1[j] + (0..n.input_dim).map(|i| n.w1[j * n.input_dim + i] * x[i]).sum::<f64>();
                1.0 / (1.0 + (-z).exp())
            })
            .collect();
        for k in 0..n.output_dim {
            let y: f64 = n.b2[k] + (0..n.hidden_dim).map(|j| n.w2[k * n.hidden_dim + j] * h[j]).sum::<f64>();
            total += 0.5 * (y - t[k]).powi(2);
        }
    }
    total / pairs.len() as f64
}

fn param(n: &mut Network, idx: usize) -> &mut f64 {
    let (a, b, c) = (n.w1.len(), n.b1.len(), n.w2.len());
    if idx < a {
        &mut n.w1[idx]
    } else if idx < a + b {
        &mut n.b1[idx - a]
    } else if idx < a + b + c {
        &mut n.w2[idx - a - b]
    } else {
        &mut n.b2[idx - a - b - c]
    }
}

fn gradient_check() -> Check {
    let enc = Encoding::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pairs: Vec<Pair> = (0..5)
        .map(|_| {
            (
                (0..enc.input_dim()).map(|_| rng.gen_range(0.0..1.0)).collect(),
                (0..enc.output_dim()).map(|_| rng.gen_range(0.0..1.0)).collect(),
            )
        })
        .collect();
    let mut net = Network::random(enc.input_dim(), 32, enc.output_dim(), 0.5, 11);
    let (_, g) = net.gradients(&pairs).map_err(|e| e.to_string())?;
    let analytic: Vec<f64> = g.w1.iter().chain(&g.b1).chain(&g.w2).chain(&g.b2).copied().collect();
    let mut worst: f64 = 0.0;
    let h = 1e-5;
    for (idx, ga) in analytic.iter().enumerate() {
        let orig = *param(&mut net, idx);
        *param(&mut net, idx) = orig + h;
        let up = oracle_loss(&net, &pairs);
        *param(&mut net, idx) = orig - h;
        let down = oracle_loss(&net, &pairs);
        *param(&mut net, idx) = orig;
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max((ga - numeric).abs() / ga.abs().max(numeric.abs()).max(1e-7));
    }
    ensure(worst < 1e-4, || format!("relative error {worst:.2e}"))?;
    Ok(format!("{} parameters, worst relative error {worst:.2e}", analytic.len()))
}

fn random_program(rng: &mut ChaCha8Rng) -> NcProgram {
    let mut blocks = Vec::new();
    for _ in 0..rng.gen_range(0..30) {
        let mut w = Vec::new();
        if rng.gen_bool(0.6) {
            w.push(Word::g(rng.gen_range(0..=4)));
        }
        for a in [Address::X, Address::Y, Address::Z, Address::F, Address::I, Address::J] {
            if rng.gen_bool(0.4) {
                let v = rng.gen_range(-400_000i64..400_000) as f64 / 1000.0;
                let v = if a == Address::F { v.abs() + 1.0 } else { v };
                w.push(Word::new(a, v));
            }
        }
        for a in [Address::S, Address::T] {
            if rng.gen_bool(0.2) {
                w.push(Word::new(a, rng.gen_range(0..20000) as f64));
            }
        }
        if rng.gen_bool(0.3) {
            w.push(Word::m([3, 4, 5, 6, 8, 9][rng.gen_range(0..6)]));
        }
        if w.is_empty() {
            w.push(Word::m(9));
        }
        blocks.push(Block::new(0, w));
    }
    blocks.push(Block::new(0, vec![Word::m(30)]));
    let mut p = NcProgram {
        header: DEFAULT_HEADER.to_string(),
        blocks,
    };
    p.renumber();
    p
}

fn round_trips() -> Check {
    const N: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for i in 0..N {
        let p = random_program(&mut rng);
        let back = parse_program(&p.to_text()).map_err(|e| format!("parse case {i}: {e}"))?;
        ensure(back == p, || format!("parse∘emit case {i}"))?;
        let (g, f) = split_program(&p);
        ensure(merge_streams(&g, &f).map_err(|e| e.to_string())? == p, || format!("merge∘split case {i}"))?;
    }
    let enc = Encoding::default();
    for i in 0..N {
        let stock = Stock::new(
            Point3::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0), rng.gen_range(-50.0..50.0)),
            Point3::new(rng.gen_range(10.0..500.0), rng.gen_range(10.0..500.0), rng.gen_range(5.0..100.0)),
            "m",
        );
        let q = Point3::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let p = stock.denormalize_point(q);
        ensure(stock.normalize_point(p).distance(q) < 1e-12, || format!("normalize case {i}"))?;
        let mut b = PathBuilder::new();
        b.rapid(p);
        let feed = rng.gen_range(1..=5000) as f64;
        for _ in 0..rng.gen_range(1..10) {
            let q = Point3::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            b.linear(stock.denormalize_point(q), feed);
        }
        let path = b.finish();
        let params = CuttingParams {
            spindle_rpm: rng.gen_range(1..=20000) as f64,
            feed,
            depth_of_cut: 1.0,
            direction: Sense::Cw,
            coolant: false,
        };
        let v = encode_toolpath(&path, &params, &stock, &enc).map_err(|e| format!("encode case {i}: {e}"))?;
        let d = decode_toolpath(&v, &stock, stock.z_top() + 2.0, &enc).map_err(|e| e.to_string())?;
        let want = toolpath_points(&path, &enc).map_err(|e| e.to_string())?;
        let worst = d.points.iter().zip(&want).map(|(a, b)| a.distance(*b)).fold(0.0, f64::max);
        ensure(worst < 1e-9 && d.feed == params.feed && d.rpm == params.spindle_rpm, || {
            format!("decode∘encode case {i}: {worst:e}")
        })?;
    }
    let cfg = fast_dnc();
    for i in 0..N {
        let data: Vec<u8> = (0..rng.gen_range(0..5000)).map(|_| rng.gen()).collect();
        let (mut a, mut b) = memory_pair();
        let rcfg = cfg.clone();
        let rx = thread::spawn(move || receive_payload(&mut b, &rcfg));
        send_payload(&mut a, 1, &data, &cfg).map_err(|e| format!("loopback case {i}: {e}"))?;
        let (_, got, _) = rx.join().unwrap().map_err(|e| format!("loopback case {i}: {e}"))?;
        ensure(got == data, || format!("loopback case {i}"))?;
    }
    Ok(format!("{N} cases each: parse∘emit, merge∘split, normalize, decode∘encode, loopback"))
}

fn servo() -> Check {
    let steady = |feed: f64, kv: f64| -> Result<f64, String> {
        let cfg = SimConfig {
            kv,
            ..SimConfig::default()
        };
        let text = format!("N10 T1 M06\nN20 S1000 M03\nN30 G00 X0 Y10 Z50\nN40 G01 X300 F{feed}\nN50 M30\n");
        let program = parse_program(&text).map_err(|e| e.to_string())?;
        let stock = Stock::new(Point3::new(0.0, 0.0, 0.0), Point3::new(300.0, 20.0, 10.0), "m");
        let mut trace = Vec::new();
        Simulator::new(&cfg, &neurocnc::corpus::standard_tools())
            .run(&program, &stock, Some(&mut trace))
            .map_err(|e| e.to_string())?;
        let rows: Vec<Vec<f64>> = String::from_utf8(trace)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .filter(|r: &Vec<f64>| r[7] == feed)
            .collect();
        let mid = &rows[rows.len() / 3..2 * rows.len() / 3];
        Ok(mid.iter().map(|r| r[1] - r[4]).sum::<f64>() / mid.len() as f64)
    };
    let mut worst: f64 = 0.0;
    for (feed, kv) in [(600.0, 30.0), (1500.0, 20.0), (3000.0, 50.0)] {
        let e = steady(feed, kv)?;
        let want = feed / (60.0 * kv);
        let rel = (e - want).abs() / want;
        ensure(rel <= 0.01, || format!("feed {feed} kv {kv}: {e:.4} vs {want:.4}"))?;
        worst = worst.max(rel);
        let ratio = steady(feed, 2.0 * kv)? / e;
        ensure((ratio - 0.5).abs() <= 0.005, || format!("doubling kv: ratio {ratio:.4}"))?;
    }
    Ok(format!("worst relative error {:.3}%", 100.0 * worst))
}

fn fast_dnc() -> DncConfig {
    DncConfig {
        ack_timeout_ms: 20,
        retries: 3,
        session_timeout_ms: 2000,
    }
}

fn dnc_faults() -> Check {
    let cfg = fast_dnc();
    let data: Vec<u8> = (0..4000u32).map(|i| (i * 31 % 251) as u8).collect();
    let scripts: Vec<(&str, Vec<Fault>)> = vec![
        ("single corruption", vec![Fault::Corrupt(7)]),
        ("duplication", vec![Fault::Duplicate; 6]),
        (
            "two drops per frame",
            (0..6).flat_map(|_| [Fault::Drop, Fault::Drop, Fault::Deliver]).collect(),
        ),
        (
            "mixed",
            vec![Fault::Drop, Fault::Corrupt(3), Fault::Duplicate, Fault::Corrupt(900), Fault::Deliver],
        ),
    ];
    for (name, script) in scripts {
        let (a, mut b) = memory_pair();
        let mut a = FaultyChannel::new(a, script);
        let rcfg = cfg.clone();
        let rx = thread::spawn(move || receive_payload(&mut b, &rcfg));
        send_payload(&mut a, 1, &data, &cfg).map_err(|e| format!("{name}: {e}"))?;
        let (_, got, _) = rx.join().unwrap().map_err(|e| format!("{name}: {e}"))?;
        ensure(got == data, || format!("{name}: payload differs"))?;
    }
    let (a, _b) = memory_pair();
    let mut a = FaultyChannel::dead(a);
    let err = send_payload(&mut a, 1, &data, &cfg).err();
    ensure(matches!(err, Some(DncError::TransferFailed(_))), || format!("total loss gave {err:?}"))?;
    ensure(a.applied.len() == 4, || format!("{} attempts instead of 1 + 3 retries", a.applied.len()))?;
    Ok("4 fault scripts delivered byte-identically; total loss failed after 3 retries".into())
}

fn cli(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_neurocnc"))
        .env_remove("NEUROCNC_CONFIG")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), || {
        format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr).trim())
    })
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |dir: &Path| -> Result<Vec<(String, Vec<u8>)>, String> {
        let p = |n: &str| dir.join(n).to_str().unwrap().to_string();
        cli(&["corpus", "--families", "holes,pockets", "--count", "40", "--out", &p("corpus")])?;
        cli(&["teach", "--corpus", &p("corpus"), "--classes", "Center,DrillNormal,PocketMill", "--out", &p("bank.json")])?;
        let hole = root().join("fixtures/single/hole.json");
        let pocket = dir.join("corpus/pockets_003.json");
        for (part, tag) in [(hole.as_path(), "hole"), (pocket.as_path(), "pocket")] {
            let part = part.to_str().unwrap();
            cli(&["generate", "--part", part, "--mode", "teacher", "--out", &p(&format!("{tag}_t.nc"))])?;
            cli(&[
                "generate",
                "--part",
                part,
                "--mode",
                "nn",
                "--bank",
                &p("bank.json"),
                "--out",
                &p(&format!("{tag}_nn.nc")),
            ])?;
        }
        ["bank.json", "bank.report.json", "hole_t.nc", "hole_nn.nc", "pocket_t.nc", "pocket_nn.nc"]
            .iter()
            .map(|n| Ok((n.to_string(), std::fs::read(dir.join(n)).map_err(|e| format!("{n}: {e}"))?)))
            .collect()
    };
    let a = run(&tmp.path().join("a"))?;
    let b = run(&tmp.path().join("b"))?;
    for ((name, x), (_, y)) in a.iter().zip(&b) {
        ensure(x == y, || format!("{name} differs between runs"))?;
    }
    Ok(format!("{} artifacts byte-identical across two runs", a.len()))
}

fn main() {
    let cfg = Config::default();
    let mut failed = 0;
    let mut report = |n: usize, title: &str, r: Check| {
        match r {
            Ok(m) => println!("criterion {n} PASS {title}: {m}"),
            Err(m) => {
                failed += 1;
                println!("criterion {n} FAIL {title}: {m}");
            }
        }
    };
    report(1, "teacher pipeline on golden corpus", golden_corpus(&cfg));
    let taught = teaching(&cfg);
    let (bank, msg) = match taught {
        Ok((bank, msg)) => (Some(bank), Ok(msg)),
        Err(e) => (None, Err(e)),
    };
    report(2, "teaching success", msg);
    report(
        3,
        "generalization on held-out parts",
        match &bank {
            Some(b) => generalization(b, &cfg),
            None => Err("no bank: teaching failed".into()),
        },
    );
    report(4, "gradient correctness", gradient_check());
    report(5, "round-trip identities", round_trips());
    report(6, "servo following error", servo());
    report(7, "DNC robustness", dnc_faults());
    report(8, "determinism", determinism());
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
