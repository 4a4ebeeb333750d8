//! Property tests for structural invariants that should hold for any
//! input, not just the fixtures in the unit suites.

use proptest::prelude::*;

use cytotwin_core::channel::{EXPORTED_CHANNELS, N_EXPORTED};
use cytotwin_core::cohort::{normalize, CohortDataset, Divisors, Observation};
use cytotwin_core::engine::{Outcome, TrajectoryRecord};
use cytotwin_core::envelope::{build_envelope, Band, EnvelopeModel};
use cytotwin_core::mrm::{Mrm, GENOME_LEN};
use cytotwin_core::validate::separability;

fn genome() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..=2.0f64, GENOME_LEN)
}

proptest! {
    // A genome decodes into a matrix and comes back bit-identical, and the
    // matrix's own encoding decodes to an equal matrix.
    #[test]
    fn genome_round_trips_losslessly(g in genome()) {
        let m = Mrm::decode(&g).unwrap();
        prop_assert_eq!(m.encode(), g);
        prop_assert_eq!(Mrm::decode(&m.encode()).unwrap(), m);
    }

    // Any out-of-range gene is rejected rather than clamped silently.
    #[test]
    fn out_of_range_genes_are_rejected(
        g in genome(),
        idx in 0..GENOME_LEN,
        bump in prop_oneof![Just(2.5f64), Just(-2.5f64), Just(7.0f64)],
    ) {
        let mut bad = g;
        bad[idx] = bump;
        prop_assert!(Mrm::decode(&bad).is_err());
    }
}

fn trajectories() -> impl Strategy<Value = Vec<TrajectoryRecord>> {
    // Shared schedule prefix: first trajectory full-length, later ones may
    // stop early (the death shape).
    (1usize..=8, 0.5..2.0f64, 1usize..=4).prop_flat_map(|(len, dt, n)| {
        let lens = prop::collection::vec(1..=len, n - 1);
        let values = prop::collection::vec(
            prop::collection::vec(prop::collection::vec(0.0..10.0f64, len), N_EXPORTED),
            n,
        );
        (lens, values).prop_map(move |(mut lens, values)| {
            lens.insert(0, len);
            lens.iter()
                .zip(values)
                .enumerate()
                .map(|(i, (&l, chans))| TrajectoryRecord {
                    mrm_id: "prop".into(),
                    seed: i as u64,
                    outcome: Outcome::Unresolved,
                    times_h: (0..l).map(|k| k as f64 * dt).collect(),
                    channels: chans.into_iter().map(|c| c[..l].to_vec()).collect(),
                    deficit: vec![0.0; l],
                })
                .collect()
        })
    })
}

proptest! {
    // Every sample that built an envelope is contained by it, every band is
    // ordered, and bins tile the horizon contiguously.
    #[test]
    fn envelopes_contain_their_own_samples(
        trajs in trajectories(),
        w in 0.5..2.5f64,
        div in 0.5..3.0f64,
    ) {
        let mut divisors = Divisors::ones();
        for (i, d) in divisors.0.iter_mut().enumerate() {
            *d = div + i as f64 * 0.1;
        }
        let env = build_envelope(&trajs, &divisors, w).unwrap();
        env.validate().unwrap();
        let horizon = *trajs[0].times_h.last().unwrap();
        prop_assert_eq!(env.n_bins(), (horizon / w).floor() as usize + 1);
        for t in &trajs {
            for (ci, c) in EXPORTED_CHANNELS.iter().enumerate() {
                for (si, &time) in t.times_h.iter().enumerate() {
                    let bin = (time / w).floor() as usize;
                    let v = t.channels[ci][si] / divisors.0[ci];
                    prop_assert!(env.contains(*c, bin, v));
                    let b = env.band(*c, bin).unwrap();
                    prop_assert!(b.lo <= b.hi);
                }
            }
        }
    }
}

fn bands(n_bins: usize) -> impl Strategy<Value = Vec<Vec<Option<Band>>>> {
    let cell = prop::option::of((0.0..5.0f64, 0.0..5.0f64));
    prop::collection::vec(prop::collection::vec(cell, n_bins), N_EXPORTED).prop_map(|rows| {
        let mut rows: Vec<Vec<Option<Band>>> = rows
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|c| {
                        c.map(|(a, b)| Band {
                            lo: a.min(b),
                            hi: a.max(b),
                        })
                    })
                    .collect()
            })
            .collect();
        // Guarantee at least one cell both reports can compare.
        rows[0][0] = Some(Band { lo: 1.0, hi: 2.0 });
        rows
    })
}

proptest! {
    // Per compared cell: overlap and gap are non-negative and never both
    // positive; the comparison is symmetric in its arguments.
    #[test]
    fn separability_cells_are_exclusive_and_symmetric(
        n_bins in 1usize..4,
        a in (1usize..4).prop_flat_map(bands),
        b in (1usize..4).prop_flat_map(bands),
    ) {
        // Regenerate with a common bin count.
        let mut a = a;
        let mut b = b;
        for row in a.iter_mut().chain(b.iter_mut()) {
            row.resize(n_bins, None);
            if row.iter().all(|c| c.is_none()) {
                row[0] = Some(Band { lo: 1.0, hi: 2.0 });
            }
        }
        a[0][0] = Some(Band { lo: 1.0, hi: 2.0 });
        b[0][0] = Some(Band { lo: 0.5, hi: 1.5 });
        let mk = |bands| EnvelopeModel {
            bin_width_h: 1.0,
            ensemble_size: 1,
            divisors: Divisors::ones(),
            bands,
        };
        let (ea, eb) = (mk(a), mk(b));
        let fwd = separability(&ea, &eb).unwrap();
        for c in &fwd.cells {
            prop_assert!(c.overlap >= 0.0 && c.gap >= 0.0);
            prop_assert!(
                !(c.overlap > 0.0 && c.gap > 0.0),
                "cell ({}, {}) has overlap {} and gap {}",
                &c.channel, c.bin, c.overlap, c.gap
            );
        }
        let rev = separability(&eb, &ea).unwrap();
        prop_assert_eq!(fwd, rev);
    }
}

proptest! {
    // Rescaling a cohort's raw units rescales the divisors and leaves the
    // normalized values unchanged: the normalized frame is unit-free.
    #[test]
    fn normalization_is_scale_equivariant(
        // At least one value lands on every channel (index cycles mod 9);
        // unobserved channels keep divisor 1.0, which has nothing to scale.
        values in prop::collection::vec(0.1..100.0f64, 9..40),
        k in 0.1..10.0f64,
    ) {
        let obs = |vals: &[f64]| -> Vec<Observation> {
            vals.iter()
                .enumerate()
                .map(|(i, &v)| Observation {
                    patient_id: format!("p{}", i % 3),
                    group: "G".into(),
                    time_h: i as f64,
                    channel: EXPORTED_CHANNELS[i % N_EXPORTED],
                    value: v,
                })
                .collect()
        };
        let base = normalize(&CohortDataset::from_observations(obs(&values)).unwrap());
        let scaled_vals: Vec<f64> = values.iter().map(|v| v * k).collect();
        let scaled = normalize(&CohortDataset::from_observations(obs(&scaled_vals)).unwrap());
        for (d0, d1) in base.divisors.0.iter().zip(scaled.divisors.0.iter()) {
            prop_assert!((d1 / d0 / k - 1.0).abs() < 1e-12);
        }
        for (o0, o1) in base.observations.iter().zip(scaled.observations.iter()) {
            prop_assert!((o0.value - o1.value).abs() <= 1e-12 * o0.value.abs().max(1.0));
        }
    }
}
