//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use biocluster::cli::{cmd_run, cmd_sweep, cmd_verify, spearman};
use biocluster::netsim::{load_scenario, SimConfig, World};
use biocluster::protocol::{compute_density, DensityParams, NodeId};
use biocluster::taxonomy::{ConceptSet, ConceptTree};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

// 1
fn sweep_trend() -> Outcome {
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let started = Instant::now();
    let report =
        cmd_sweep(&scenarios().join("sweep.toml"), out.path()).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let (ns, medians): (Vec<f64>, Vec<f64>) = report
        .medians
        .iter()
        .map(|&(n, m)| (f64::from(n), m))
        .unzip();
    let rho = spearman(&ns, &medians);
    let first = medians[0];
    let last = medians[medians.len() - 1];
    let detail = format!(
        "medians {:?}, rho {rho:.3}, {:.1}s",
        report.medians,
        elapsed.as_secs_f64()
    );
    let points: Vec<u32> = report.medians.iter().map(|&(n, _)| n).collect();
    check(
        points == [5, 10, 15, 20, 25, 30, 37]
            && report.rows.len() == 70
            && last > first
            && rho >= 0.9
            && elapsed < Duration::from_secs(300),
        detail,
    )
}

// 2
fn traffic_decay() -> Outcome {
    let config =
        load_scenario(&scenarios().join("single_subject_62.toml")).map_err(|e| e.to_string())?;
    let mut world = World::new(config).map_err(|e| e.to_string())?;
    let log = world.run_to_completion();
    let series = log
        .traffic_series("pervasive_systems", 60)
        .map_err(|e| e.to_string())?;
    let counts: Vec<f64> = series.iter().map(|&(_, c)| c as f64).collect();
    let q = (counts.len() / 4).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let head = mean(&counts[..q]);
    let tail = mean(&counts[counts.len() - q..]);
    check(
        counts.len() >= 4 && tail < 0.5 * head,
        format!(
            "{} bins of 60 ticks, first-quartile mean {head:.1}, last-quartile mean {tail:.1}",
            counts.len()
        ),
    )
}

// 3
fn random_scenario(dir: &Path, k: usize, rng: &mut ChaCha8Rng) -> PathBuf {
    let s = scenarios();
    let subjects = [
        "pervasive_systems",
        "networking",
        "security",
        "databases",
        "theory",
        "robotics",
    ];
    let population = rng.gen_range(1..=50);
    let k_subjects = rng.gen_range(1..=5);
    let chosen: Vec<&str> = subjects.choose_multiple(rng, k_subjects).copied().collect();
    let width = rng.gen_range(8.0..80.0_f64);
    let height = rng.gen_range(8.0..80.0_f64);
    let range = rng.gen_range(3.0..25.0_f64);
    let mut text = String::new();
    let _ = writeln!(
        text,
        "taxonomy = \"{}\"",
        s.join("conference.tax").display()
    );
    let _ = writeln!(text, "catalog = \"{}\"", s.join("conference.cat").display());
    let _ = writeln!(
        text,
        "population = {population}\nseed = {}",
        rng.gen::<u32>()
    );
    let _ = writeln!(
        text,
        "hall_width = {width}\nhall_height = {height}\nradio_range = {range}"
    );
    let _ = writeln!(text, "\n[subjects.weights]");
    for c in &chosen {
        let _ = writeln!(text, "{c} = {}", rng.gen_range(0.5..2.0_f64));
    }
    let path = dir.join(format!("random_{k}.toml"));
    fs::write(&path, text).expect("temp dir is writable");
    path
}

fn election_oracle() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut nodes = 0;
    let mut components = 0;
    for k in 0..120 {
        let path = random_scenario(dir.path(), k, &mut rng);
        match cmd_verify(&path, None) {
            Ok(report) => {
                nodes += report.nodes_checked;
                components += report.components;
            }
            Err(e) => return Err(format!("scenario {k}: {e}")),
        }
    }
    Ok(format!(
        "120 scenarios, {components} components, {nodes} nodes"
    ))
}

// 4
fn density_examples() -> Outcome {
    let half = |n| DensityParams::new(0.5, 0.5, n).unwrap();
    let full: BTreeMap<NodeId, f64> = (1..10).map(|i| (i, 1.0)).collect();
    let mut ok = close(compute_density(&full, 1.0, &half(10)), 1.0);
    let e = 0.73;
    ok &= close(
        compute_density(&BTreeMap::new(), e, &half(300)),
        0.5 / 300.0 + 0.5 * e,
    );
    let sixty_two: BTreeMap<NodeId, f64> = (1..62).map(|i| (i, 0.5)).collect();
    let d = compute_density(&sixty_two, 0.5, &half(300));
    ok &= close(d, 0.5 * 62.0 / 300.0 + 0.25) && (d - 0.35333).abs() < 1e-5;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    for _ in 0..1000 {
        let alpha = rng.gen_range(0.01..0.99);
        let params = DensityParams::new(alpha, 1.0 - alpha, rng.gen_range(60..400)).unwrap();
        let n = rng.gen_range(0..50);
        let mean = rng.gen_range(0.05..0.95);
        let at = |count: u32, m: f64| {
            let replies: BTreeMap<NodeId, f64> = (1..=count).map(|i| (i, m)).collect();
            compute_density(&replies, m, &params)
        };
        if at(n + 1, mean) <= at(n, mean) {
            violations += 1;
        }
        if at(n, mean + 0.01) <= at(n, mean) {
            violations += 1;
        }
    }
    check(
        ok && violations == 0,
        format!(
            "worked examples {}, {violations} monotonicity violations in 1000 draws",
            if ok { "match" } else { "differ" }
        ),
    )
}

// 5
fn naive_depth(parent: &[Option<usize>], mut c: usize) -> usize {
    let mut d = 0;
    while let Some(p) = parent[c] {
        c = p;
        d += 1;
    }
    d
}

fn naive_con_sim(parent: &[Option<usize>], a: usize, b: usize) -> f64 {
    if a == b {
        return 1.0;
    }
    let mut up = vec![a];
    while let Some(p) = parent[*up.last().unwrap()] {
        up.push(p);
    }
    let mut c = b;
    while !up.contains(&c) {
        c = parent[c].unwrap();
    }
    let (da, db) = (naive_depth(parent, a), naive_depth(parent, b));
    2.0 * naive_depth(parent, c) as f64 / (da + db) as f64
}

fn subsets(n: usize, max: usize) -> Vec<Vec<usize>> {
    (1u32..1 << n)
        .filter(|m| m.count_ones() as usize <= max)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
        .collect()
}

fn wu_palmer() -> Outcome {
    let t =
        ConceptTree::from_edges([("root", "A"), ("A", "A1"), ("A", "A2"), ("root", "B")]).unwrap();
    let set = |items: &[&str]| ConceptSet::new(&t, items.iter().copied()).unwrap();
    let mut ok = close(t.con_sim("A1", "A2").unwrap(), 0.5);
    ok &= close(t.con_sim("root", "A1").unwrap(), 0.0);
    ok &= close(t.set_sim(&set(&["A1"]), &set(&["A2", "B"])).unwrap(), 0.375);

    // 12 concepts: root, three inner nodes, eight leaves at mixed depths
    let names = [
        "r", "x", "y", "z", "x1", "x2", "y1", "y2", "z1", "x1a", "x1b", "y2a",
    ];
    let parent: Vec<Option<usize>> = vec![
        None,
        Some(0),
        Some(0),
        Some(0),
        Some(1),
        Some(1),
        Some(2),
        Some(2),
        Some(3),
        Some(4),
        Some(4),
        Some(7),
    ];
    let edges: Vec<(&str, &str)> = parent
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.map(|p| (names[p], names[i])))
        .collect();
    let tree = ConceptTree::from_edges(edges).unwrap();

    for a in 0..12 {
        for b in 0..12 {
            let s = tree.con_sim(names[a], names[b]).unwrap();
            let s_rev = tree.con_sim(names[b], names[a]).unwrap();
            ok &= s == s_rev && (0.0..=1.0).contains(&s) && close(s, naive_con_sim(&parent, a, b));
        }
        ok &= tree.con_sim(names[a], names[a]).unwrap() == 1.0;
    }

    let all = subsets(12, 4);
    let sets: Vec<ConceptSet> = all
        .iter()
        .map(|s| ConceptSet::new(&tree, s.iter().map(|&i| names[i])).unwrap())
        .collect();
    let direction = |x: &[usize], y: &[usize]| {
        x.iter()
            .map(|&p| {
                y.iter()
                    .map(|&q| naive_con_sim(&parent, p, q))
                    .fold(0.0, f64::max)
            })
            .sum::<f64>()
            / x.len() as f64
    };
    let mut pairs = 0u64;
    let mut bad = 0u64;
    for (i, a) in all.iter().enumerate() {
        for (j, b) in all.iter().enumerate() {
            let expected = 0.5 * (direction(a, b) + direction(b, a));
            if !close(tree.set_sim(&sets[i], &sets[j]).unwrap(), expected) {
                bad += 1;
            }
            pairs += 1;
        }
    }
    check(
        ok && bad == 0,
        format!(
            "hand cases {}, {pairs} subset pairs, {bad} disagreements",
            if ok { "match" } else { "differ" }
        ),
    )
}

// 6
fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let traced = tmp.path().join("traced.toml");
    fs::write(
        &traced,
        format!(
            "taxonomy = \"{0}/conference.tax\"\ncatalog = \"{0}/conference.cat\"\n\
             population = 40\nseed = 21\ntrace = true\n",
            scenarios().display()
        ),
    )
    .map_err(|e| e.to_string())?;
    let mut compared = 0;
    for scenario in [
        scenarios().join("single_subject_62.toml"),
        scenarios().join("islands.toml"),
        traced,
    ] {
        let a = tmp.path().join("a");
        let b = tmp.path().join("b");
        for out in [&a, &b] {
            let _ = fs::remove_dir_all(out);
            cmd_run(&scenario, out, None).map_err(|e| e.to_string())?;
        }
        let (fa, fb) = (read_dir(&a), read_dir(&b));
        if fa != fb || fa.is_empty() {
            return Err(format!("{} differs between runs", scenario.display()));
        }
        compared += fa.len();
    }
    Ok(format!("3 scenarios, {compared} files byte-identical"))
}

// 7
fn full_connectivity(population: u32, seed: u64) -> SimConfig {
    let mut c = load_scenario(&scenarios().join("default.toml")).unwrap();
    c.population = population;
    c.seed = seed;
    c.hall_width = 20.0;
    c.hall_height = 20.0;
    c.radio_range = 29.0;
    c
}

fn eventual_clustering() -> Outcome {
    let mut checked = 0;
    let mut multi_topic = 0;
    for (k, population) in [40, 55, 62, 70, 80].into_iter().enumerate() {
        let config = full_connectivity(population, 100 + k as u64);
        let mut world = World::new(config).map_err(|e| e.to_string())?;
        let schedule = world.schedule();
        world.run_until(schedule.sub_cluster - 1);
        if let Some(n) = world
            .nodes()
            .iter()
            .find(|n| n.state.joined_cluster().is_none())
        {
            return Err(format!(
                "N={population}: node {} has no cluster at end of Converge",
                n.state.id
            ));
        }
        world.run_until(schedule.steady);
        let nodes = world.nodes();
        for n in nodes {
            checked += 1;
            if n.classification.topics.len() < 2 {
                continue;
            }
            multi_topic += 1;
            let Some((topic, point)) = n.state.joined_sub_cluster() else {
                return Err(format!(
                    "N={population}: node {} has no sub-cluster",
                    n.state.id
                ));
            };
            let p = &nodes[point as usize].state;
            if p.top_topic() != Some(topic) || p.joined_cluster() != n.state.joined_cluster() {
                return Err(format!(
                    "N={population}: node {} joined sub-cluster {point} outside its topic or cluster",
                    n.state.id
                ));
            }
        }
    }
    Ok(format!(
        "{checked} nodes clustered, {multi_topic} multi-topic nodes in one sub-cluster each"
    ))
}

// 8
fn termination() -> Outcome {
    let mut configs: Vec<(String, SimConfig)> =
        ["default.toml", "single_subject_62.toml", "islands.toml"]
            .iter()
            .map(|f| (f.to_string(), load_scenario(&scenarios().join(f)).unwrap()))
            .collect();
    for (k, n) in [40, 80].into_iter().enumerate() {
        configs.push((
            format!("full connectivity N={n}"),
            full_connectivity(n, 200 + k as u64),
        ));
    }
    let mut leftovers = Vec::new();
    for (name, config) in configs {
        if config.ttl != 16 {
            return Err(format!("{name}: ttl {}", config.ttl));
        }
        let mut world = World::new(config).map_err(|e| e.to_string())?;
        let log = world.run_to_completion();
        if log.in_flight_at_schedule_end != 0 {
            leftovers.push(format!("{name}: {}", log.in_flight_at_schedule_end));
        }
    }
    check(
        leftovers.is_empty(),
        if leftovers.is_empty() {
            "5 scenarios, queue empty when the last phase window closes".into()
        } else {
            leftovers.join(", ")
        },
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("time to form grows with subject size", sweep_trend),
        ("cluster point traffic decays", traffic_decay),
        ("elections match the brute-force oracle", election_oracle),
        ("density formula", density_examples),
        ("Wu-Palmer similarity", wu_palmer),
        ("byte-identical reruns", determinism),
        (
            "eventual clustering under full connectivity",
            eventual_clustering,
        ),
        ("no messages in flight at schedule end", termination),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let label = format!("criterion {} {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|p| label.contains(p.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {label}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {label}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
