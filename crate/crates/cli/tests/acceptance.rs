//! The acceptance criteria, each reported as one `criterion N: PASS|FAIL` line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use randset::analytic::{solve_dimension, DEFAULT_TOL};
use randset::builtin;
use randset::empirical::{assouad_spectrum, box_dimension, naive_assouad_probe, quasi_assouad, CenterSpec, ScaleRange};
use randset::gw::OffspringDistribution;
use randset::rifs::Rifs;
use randset::tree::{Model, Realisation};
use randset::verify;

const HORIZON: usize = 8;

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(n: u32, title: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = f();
    let took = start.elapsed();
    let in_time = limit.is_none_or(|l| took <= l);
    let passed = o.passed && in_time;
    let budget = limit.map_or(String::new(), |l| format!(", limit {:.0} s", l.as_secs_f64()));
    println!(
        "criterion {n}: {} {title}: {} [{:.1} s{budget}]",
        if passed { "PASS" } else { "FAIL" },
        o.detail,
        took.as_secs_f64()
    );
    passed
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", parts.join(" "))
}

fn realisation(rifs: &Arc<Rifs>, depth: usize, seed: u64) -> Realisation {
    Realisation::sample(rifs.clone(), Model::Recursive, depth + HORIZON, seed).unwrap()
}

fn criterion1() -> Outcome {
    let s = solve_dimension(&builtin::example2(), DEFAULT_TOL).unwrap();
    Outcome {
        passed: (s - 0.56187).abs() <= 5e-6,
        detail: format!("s = {s:.8}"),
    }
}

fn criterion2() -> Outcome {
    let mut worst = 0.0f64;
    for p in [0.3, 0.5, 0.8, 1.0] {
        let s = solve_dimension(&builtin::mandelbrot(2, 2, p).unwrap(), DEFAULT_TOL).unwrap();
        worst = worst.max((s - (4.0 * p).ln() / 2f64.ln()).abs());
    }
    Outcome {
        passed: worst <= 1e-9,
        detail: format!("largest gap {worst:.2e}"),
    }
}

fn criterion3() -> Outcome {
    let rifs = Arc::new(builtin::mandelbrot(2, 2, 0.8).unwrap());
    let target = 3.2f64.log2();
    let range = ScaleRange::new(6, 12).unwrap();
    let slopes: Vec<f64> = (0..32)
        .map(|seed| box_dimension(&realisation(&rifs, 14, seed), range, HORIZON).unwrap().slope)
        .collect();
    let worst = slopes.iter().map(|s| (s - target).abs()).fold(0.0, f64::max);
    Outcome {
        passed: worst <= 0.08,
        detail: format!("32 seeds, mean {:.4}, largest gap {worst:.4}", mean(&slopes)),
    }
}

struct MainTheorem {
    name: &'static str,
    rifs: Arc<Rifs>,
    depth: usize,
    range: ScaleRange,
}

fn criterion4() -> Outcome {
    let cases = [
        MainTheorem {
            name: "example1(0.5)",
            rifs: Arc::new(builtin::example1(0.5).unwrap()),
            depth: 26,
            range: ScaleRange::new(5, 18).unwrap(),
        },
        MainTheorem {
            name: "mandelbrot(2,2,0.8)",
            rifs: Arc::new(builtin::mandelbrot(2, 2, 0.8).unwrap()),
            depth: 14,
            range: ScaleRange::new(3, 12).unwrap(),
        },
    ];
    let mut passed = true;
    let mut detail = Vec::new();
    for case in &cases {
        let s = solve_dimension(&case.rifs, DEFAULT_TOL).unwrap();
        let (mut spectrum, mut qa) = (Vec::new(), Vec::new());
        for seed in 0..6 {
            let real = realisation(&case.rifs, case.depth, seed);
            let centers = CenterSpec { cap: 16, seed };
            spectrum.push(assouad_spectrum(&real, 0.5, case.range, &centers, HORIZON).unwrap().slope);
            qa.push(quasi_assouad(&real, &[0.5, 0.25, 0.1], case.range, &centers, HORIZON).unwrap().extrapolate);
        }
        let (ms, mq) = (mean(&spectrum), mean(&qa));
        passed &= (ms - s).abs() <= 0.12 && (mq - s).abs() <= 0.12;
        detail.push(format!(
            "{}: dim {s:.4}, spectrum mean {ms:.4} {}, quasi-Assouad mean {mq:.4} {}",
            case.name,
            fmt(&spectrum),
            fmt(&qa)
        ));
    }

    let rifs = Arc::new(builtin::mandelbrot(2, 2, 0.5).unwrap());
    let range = ScaleRange::new(2, 8).unwrap();
    let seeds = 20;
    let above = (0..seeds)
        .filter(|&seed| {
            let real = realisation(&rifs, 10, seed);
            let probe = naive_assouad_probe(&real, 8.0, range, &CenterSpec { cap: 16, seed }, HORIZON);
            let b = box_dimension(&real, range, HORIZON);
            matches!((probe, b), (Ok(p), Ok(b)) if p > b.slope)
        })
        .count();
    detail.push(format!(
        "diagnostic: naive probe above box estimate in {above}/{seeds} seeds of mandelbrot(2,2,0.5) (expected at least 60%)"
    ));
    Outcome {
        passed,
        detail: detail.join("; "),
    }
}

fn from_check(c: &verify::Check) -> Outcome {
    Outcome {
        passed: c.passed(),
        detail: format!("{} failures in {} trials, worst {:.4} (limit {})", c.failures, c.trials, c.worst, c.limit),
    }
}

fn criterion7() -> Outcome {
    let dist = OffspringDistribution::binomial(4, 0.8).unwrap();
    let checks = [
        verify::martingale(&dist, 20, 10_000, 70, 4.0).unwrap(),
        verify::tail_monotone(&dist, 20, 1.0, 0.2, 100_000, 71, 3).unwrap(),
        verify::survival(&dist, 20, 10_000, 72, 0.01).unwrap(),
    ];
    let detail: Vec<String> = checks
        .iter()
        .map(|c| format!("{} {}", c.name, if c.passed() { "ok" } else { "failed" }) + &format!(" (worst {:.4})", c.worst))
        .collect();
    Outcome {
        passed: checks.iter().all(verify::Check::passed),
        detail: detail.join(", "),
    }
}

fn run_cli(args: &[&str], out: &Path, threads: usize) -> bool {
    Command::new(env!("CARGO_BIN_EXE_randset"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RANDSET_THREADS", threads.to_string())
        .output()
        .is_ok_and(|o| o.status.success() || o.status.code() == Some(1))
}

fn bodies(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let bytes = fs::read(&p).unwrap();
            let name = p.file_name().unwrap().to_string_lossy().to_string();
            let body = if name.ends_with(".pgm") {
                // Drop the comment lines after the magic number.
                let text = bytes.split(|&b| b == b'\n').filter(|l| !l.starts_with(b"#")).collect::<Vec<_>>();
                text.join(&b'\n')
            } else {
                let text = String::from_utf8(bytes).unwrap();
                text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n").into_bytes()
            };
            (name, body)
        })
        .collect()
}

fn criterion8() -> Outcome {
    let commands: [&[&str]; 6] = [
        &["dim-analytic", "--model", "mandelbrot(2,2,0.8)", "--eps", "0.1,0.05", "--trials", "64"],
        &["sample", "--model", "mandelbrot(2,2,0.9)", "--depth", "8", "--seed", "1"],
        &["sample", "--model", "example1(0.5)", "--depth", "10"],
        &["dim-empirical", "--model", "mandelbrot(2,2,0.8)", "--depth", "9", "--seeds", "3", "--center-cap", "32"],
        &["gw", "--offspring", "binomial(4,0.8)", "--runs", "4000"],
        &["verify", "--seed", "5"],
    ];
    let root = std::env::temp_dir().join(format!("randset-acceptance-{}", std::process::id()));
    let mut mismatched = Vec::new();
    for (i, args) in commands.iter().enumerate() {
        let dirs: Vec<PathBuf> = [1usize, 8, 8].iter().enumerate().map(|(k, t)| root.join(format!("{i}-{k}-{t}"))).collect();
        let ok = dirs.iter().zip([1usize, 8, 8]).all(|(d, t)| run_cli(args, d, t));
        let first = bodies(&dirs[0]);
        if !ok || first.is_empty() || dirs[1..].iter().any(|d| bodies(d) != first) {
            mismatched.push(args[0]);
        }
    }
    let _ = fs::remove_dir_all(&root);
    Outcome {
        passed: mismatched.is_empty(),
        detail: if mismatched.is_empty() {
            format!("{} commands, bodies identical at 1 and 8 threads and on rerun", commands.len())
        } else {
            format!("differing output from {mismatched:?}")
        },
    }
}

#[test]
fn acceptance() {
    let minute = Duration::from_secs(60);
    let results = [
        report(1, "Moran root of Example 2", Some(Duration::from_secs(1)), criterion1),
        report(2, "percolation dimension formula", Some(Duration::from_secs(1)), criterion2),
        report(3, "box dimension of Mandelbrot percolation", Some(5 * minute), criterion3),
        report(4, "spectrum and quasi-Assouad against analytic dimension", Some(15 * minute), criterion4),
        report(5, "overlap bound", Some(2 * minute), || from_check(&verify::overlap_bound(1000, 0).unwrap())),
        report(6, "product bounds on Examples 1 and 2", Some(2 * minute), || {
            from_check(&verify::product_bounds(100, 0).unwrap())
        }),
        report(7, "Galton-Watson suite", Some(3 * minute), criterion7),
        report(8, "determinism across thread counts", None, criterion8),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, &p)| !p).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
