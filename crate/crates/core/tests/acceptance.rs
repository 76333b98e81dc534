//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test -p qpolar --test acceptance -- --nocapture` to see the lines.
//!
//! Criteria run sequentially inside one test so the runtime budgets are not
//! skewed by other tests competing for cores.

use std::time::{Duration, Instant};

use qpolar::btpm::{self, Btpm, SymmetryTag};
use qpolar::channels;
use qpolar::coherent;
use qpolar::oracle;
use qpolar::polarize::{self, ConstructionMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent closed form: `1 − H₂(ε)` with natural logs.
fn bsc_capacity(eps: f64) -> f64 {
    let h = -(eps * eps.ln() + (1.0 - eps) * (1.0 - eps).ln()) / std::f64::consts::LN_2;
    1.0 - h
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(id: u32, title: &str, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = run();
    println!(
        "criterion {id} {}: {title}: {} [{:.2?}]",
        if o.passed { "PASS" } else { "FAIL" },
        o.detail,
        start.elapsed()
    );
    o.passed
}

fn within(elapsed: Duration, budget: Duration) -> bool {
    elapsed < budget
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let bf = channels::bit_flip(0.9).unwrap();
    let uci = coherent::uniform_coherent_information(&bf).unwrap();
    let sweep = coherent::mslci_sweep(&bf, &channels::computational_basis(2), 1001).unwrap();
    let elapsed = start.elapsed();
    let err = (uci - bsc_capacity(0.1)).abs();
    Outcome {
        passed: err < 1e-9 && sweep.q_star == 0.5 && within(elapsed, Duration::from_secs(1)),
        detail: format!(
            "I_uniform = {uci:.12} (|err| = {err:.1e} < 1e-9), q* = {} on 1001 points, runtime {elapsed:.2?} < 1 s",
            sweep.q_star
        ),
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for p in [0.6, 0.75, 0.9] {
        let k = channels::bit_flip(p).unwrap();
        let b = Btpm::binary_symmetric(p).unwrap();
        for n in [2, 4] {
            for i in 1..=n {
                let sim = oracle::simulate_coordinate(&k, n, i, 0.5).unwrap();
                let cf = polarize::coordinate_mslci(&b, n, i, ConstructionMode::Exact).unwrap();
                worst = worst.max((sim - cf).abs());
                cases += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        passed: worst < 1e-8 && within(elapsed, Duration::from_secs(30)),
        detail: format!(
            "{cases} (p, N, i) cases, max |oracle − closed form| = {worst:.1e} < 1e-8, runtime {elapsed:.2?} < 30 s"
        ),
    }
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for p in [0.6, 0.75, 0.9] {
        let b = Btpm::binary_symmetric(p).unwrap();
        for n in [2, 4, 8, 16] {
            let sum: f64 = (1..=n)
                .map(|i| polarize::coordinate_mslci(&b, n, i, ConstructionMode::Exact).unwrap())
                .sum();
            worst = worst.max((sum - n as f64 * bsc_capacity(1.0 - p)).abs());
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        passed: worst < 1e-8 && within(elapsed, Duration::from_secs(10)),
        detail: format!(
            "p ∈ {{0.6, 0.75, 0.9}}, N ∈ {{2, 4, 8, 16}}: max |Σ I_i − N·C| = {worst:.1e} < 1e-8, runtime {elapsed:.2?} < 10 s"
        ),
    }
}

fn criterion_4() -> Outcome {
    let bf = channels::bit_flip(0.9).unwrap();
    let pf = channels::phase_flip(0.9).unwrap();
    let mut worst: f64 = 0.0;
    let mut all_pass = true;
    for n in [2, 4] {
        for (k, basis) in [
            (&bf, channels::computational_basis(2)),
            (&pf, channels::x_basis()),
        ] {
            let v = oracle::verify_combined_symmetry(k, &basis, n, 42).unwrap();
            all_pass &= v.passed;
            worst = worst.max(v.max_violation);
        }
    }
    let perturbed = Btpm::new(vec![vec![0.9, 0.1], vec![0.15, 0.85]]).unwrap();
    let neg_k = btpm::kraus_from_btpm(&perturbed);
    let mut neg_min = f64::INFINITY;
    let mut neg_fail = true;
    for n in [2, 4] {
        let v = oracle::verify_combined_symmetry(&neg_k, &channels::computational_basis(2), n, 42)
            .unwrap();
        neg_fail &= !v.passed;
        neg_min = neg_min.min(v.max_violation);
    }
    Outcome {
        passed: all_pass && worst < 1e-12 && neg_fail && neg_min >= 0.01,
        detail: format!(
            "bit/phase flip at N ∈ {{2, 4}}: max violation {worst:.1e} < 1e-12; 0.05-perturbed base fails with violation {neg_min:.3} ≥ 0.01"
        ),
    }
}

fn criterion_5() -> Outcome {
    let mut ok = true;
    let mut checked = 0;
    for p in [0.6, 0.9] {
        let b = Btpm::binary_symmetric(p).unwrap();
        for n in [2, 4, 8] {
            for i in 1..=n {
                let c = polarize::coordinate_btpm_from_classical(&b, n, i).unwrap();
                let (s0, s1) = c.row_sums();
                ok &= (s0 - 1.0).abs() < 1e-10 && (s1 - 1.0).abs() < 1e-10;
                ok &= c.rows_are_permutations(1e-10);
                checked += 1;
            }
        }
    }
    Outcome {
        passed: ok,
        detail: format!("{checked} coordinate BTPMs (N ∈ {{2, 4, 8}}): rows sum to 1 and are multiset-equal within 1e-10"),
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let base = Btpm::binary_symmetric(0.9).unwrap();
    let mut variances = Vec::new();
    for n in [2, 4, 8, 16] {
        let r = polarize::polarization_report(&base, n, &[], ConstructionMode::Exact).unwrap();
        variances.push(polarize::variance(&r.values()));
    }
    let increasing = variances.windows(2).all(|w| w[1] > w[0]);
    let big = polarize::polarization_report(
        &base,
        1024,
        &[0.01],
        ConstructionMode::Quantized { mu: 256 },
    )
    .unwrap();
    let frac = big.good_fraction[0].fraction;
    let elapsed = start.elapsed();
    let target = 0.5310;
    let frac_ok = (frac - target).abs() <= 0.1;
    Outcome {
        passed: increasing && frac_ok && within(elapsed, Duration::from_secs(120)),
        detail: format!(
            "variances {:?} strictly increasing: {increasing}; N = 1024, μ = 256: fraction with I ≥ 0.99 = {frac:.4} (target {target} ± 0.1: {frac_ok}); runtime {elapsed:.2?} < 2 min",
            variances.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()
        ),
    }
}

fn random_btpm(rng: &mut ChaCha8Rng) -> Btpm {
    let n = rng.gen_range(2..=4);
    let m = rng.gen_range(2..=4);
    let rows = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|x| x / s).collect()
        })
        .collect();
    Btpm::new(rows).unwrap()
}

fn criterion_7() -> Outcome {
    let id2 = channels::computational_basis(2);
    let bf = btpm::extract_btpm(&channels::bit_flip(0.9).unwrap(), &id2, 42).unwrap();
    let bf_ok = bf
        .found()
        .is_some_and(|e| btpm::classify(&e.btpm).tag == SymmetryTag::FullySymmetric);

    let ad = Btpm::new(vec![vec![1.0, 0.0], vec![0.3, 0.7]]).unwrap();
    let ad_verdict = btpm::extract_btpm(&btpm::kraus_from_btpm(&ad), &id2, 42).unwrap();
    let ad_ok = ad_verdict
        .found()
        .is_some_and(|e| btpm::classify(&e.btpm).tag == SymmetryTag::Asymmetric);

    let mix = btpm::extract_btpm(&channels::identity_hadamard_mix(), &id2, 42).unwrap();
    let (mix_ok, mix_note) = match &mix {
        btpm::BtpmVerdict::NoBtpm { max_commutator } => {
            (true, format!("NoBtpm (commutator {max_commutator:.2e})"))
        }
        btpm::BtpmVerdict::Found(e) => (
            false,
            format!(
                "BTPM found since basis images commute, rows {:?}",
                e.btpm.rows()
            ),
        ),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst: f64 = 0.0;
    let mut round_trip_ok = true;
    for _ in 0..100 {
        let b = random_btpm(&mut rng);
        let basis = channels::computational_basis(b.input_dim());
        match btpm::extract_btpm(&btpm::kraus_from_btpm(&b), &basis, 42).unwrap() {
            btpm::BtpmVerdict::Found(e) => {
                let expected = b.canonical_column_order();
                if e.btpm.output_dim() != expected.output_dim() {
                    round_trip_ok = false;
                } else {
                    worst = worst.max(e.btpm.max_abs_diff(&expected));
                }
            }
            btpm::BtpmVerdict::NoBtpm { .. } => round_trip_ok = false,
        }
    }
    round_trip_ok &= worst < 1e-10;
    Outcome {
        passed: bf_ok && ad_ok && mix_ok && round_trip_ok,
        detail: format!(
            "bit flip FullySymmetric: {bf_ok}; amplitude damping Asymmetric: {ad_ok}; {{√½ I, √½ H}} → {mix_note} (NoBtpm expected: {mix_ok}); 100 random round trips, max diff {worst:.1e} < 1e-10: {round_trip_ok}"
        ),
    }
}

#[test]
fn acceptance_criteria() {
    let results = [
        report(1, "MSLCI of bit flip at the uniform input", criterion_1),
        report(
            2,
            "oracle matches closed-form coordinate MSLCI",
            criterion_2,
        ),
        report(3, "conservation of coordinate MSLCI", criterion_3),
        report(4, "combined-channel symmetry", criterion_4),
        report(5, "coordinate BTPM row-permutation property", criterion_5),
        report(6, "polarization trend", criterion_6),
        report(7, "BTPM extraction and Kraus round trip", criterion_7),
    ];
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(k, _)| k + 1)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
