use proptest::prelude::*;
use tensr_core::chisq::{chi2_cdf_2, chi2_quantile_2, noncentral_chi2_cdf_2};
use tensr_core::engine::{RngStream, SimTime};
use tensr_core::estimator::location_adjacency;
use tensr_core::geometry::Point2;
use tensr_core::linkstate::{LinkStateStore, MatrixId, TableRow};
use tensr_core::pli::sigma_p;
use tensr_core::radio::{ChannelParams, Destination, Frame, FrameKind, Radio};
use tensr_core::router::{most_reliable_paths, ReliabilityGraph};

fn row_strategy(n: usize) -> impl Strategy<Value = TableRow> {
    (0..3u8, 0..n, 0..n, 0.0..10.0f64, 0u32..1000).prop_filter_map("distinct endpoints", |(m, i, j, value, stamp)| {
        (i != j).then(|| TableRow {
            matrix: [MatrixId::R, MatrixId::A, MatrixId::D][m as usize],
            i,
            j,
            value,
            stamp: stamp as f64,
        })
    })
}

/// Rows with pairwise-distinct stamps, so merge order cannot matter.
fn distinct_rows(n: usize, len: usize) -> impl Strategy<Value = Vec<TableRow>> {
    prop::collection::vec(row_strategy(n), 0..len).prop_map(|mut rows| {
        for (k, r) in rows.iter_mut().enumerate() {
            r.stamp = r.stamp * 1000.0 + k as f64;
        }
        rows
    })
}

fn merged(rows: &[TableRow]) -> Vec<TableRow> {
    let mut s = LinkStateStore::new(0, 6, 10);
    for r in rows {
        s.merge_row(r, 0.0);
    }
    s.snapshot_rows(|_, _, _| true)
}

fn best_product(p: &[f64], n: usize, src: usize, dst: usize) -> f64 {
    fn go(p: &[f64], n: usize, v: usize, dst: usize, seen: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if v == dst {
            *best = best.max(acc);
            return;
        }
        for w in 0..n {
            if !seen[w] && p[v * n + w] > 0.0 {
                seen[w] = true;
                go(p, n, w, dst, seen, acc * p[v * n + w], best);
                seen[w] = false;
            }
        }
    }
    let mut seen = vec![false; n];
    seen[src] = true;
    let mut best = 0.0;
    go(p, n, src, dst, &mut seen, 1.0, &mut best);
    best
}

fn symmetric_probs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0u8..=10, n * n).prop_map(move |raw| {
        let mut p = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = raw[i * n + j] as f64 / 10.0;
                p[i * n + j] = v;
                p[j * n + i] = v;
            }
        }
        p
    })
}

proptest! {
    #[test]
    fn merge_is_idempotent(rows in distinct_rows(6, 40)) {
        let once = merged(&rows);
        let twice: Vec<TableRow> = rows.iter().chain(rows.iter()).copied().collect();
        prop_assert_eq!(merged(&twice), once);
    }

    #[test]
    fn merge_is_order_insensitive(rows in distinct_rows(6, 40), split in 0usize..40) {
        let k = split.min(rows.len());
        let (a, b) = rows.split_at(k);
        let ab: Vec<TableRow> = a.iter().chain(b).copied().collect();
        let ba: Vec<TableRow> = b.iter().chain(a).copied().collect();
        prop_assert_eq!(merged(&ab), merged(&ba));
        let mut rev = rows.clone();
        rev.reverse();
        prop_assert_eq!(merged(&rev), merged(&rows));
    }

    #[test]
    fn merge_keeps_symmetry(rows in distinct_rows(6, 40)) {
        let mut s = LinkStateStore::new(0, 6, 10);
        for r in &rows {
            s.merge_row(r, 0.0);
        }
        for id in MatrixId::ALL {
            let m = s.matrix(id);
            for i in 0..6 {
                for j in 0..6 {
                    if i != j {
                        prop_assert_eq!(m.value(i, j), m.value(j, i));
                        prop_assert_eq!(m.stamp(i, j), m.stamp(j, i));
                    }
                }
            }
        }
    }

    #[test]
    fn router_matches_enumeration((n, p) in (2usize..=7).prop_flat_map(|n| (Just(n), symmetric_probs(n)))) {
        let g = ReliabilityGraph::from_matrix(n, &p);
        let t = most_reliable_paths(&g, 0);
        for dst in 1..n {
            let best = best_product(&p, n, 0, dst);
            match t.route(dst) {
                None => prop_assert_eq!(best, 0.0),
                Some(r) => {
                    prop_assert!((r.reliability - best).abs() <= 1e-12, "{} vs {}", r.reliability, best);
                    let path = t.path(dst).unwrap();
                    let product: f64 = path.windows(2).map(|w| p[w[0] * n + w[1]]).product();
                    prop_assert!((r.weight + product.ln()).abs() <= 1e-12);
                    prop_assert_eq!(path.len() - 1, r.hops);
                }
            }
        }
    }

    #[test]
    fn raising_a_link_never_hurts(
        (n, p, i, j) in (3usize..=7).prop_flat_map(|n| (Just(n), symmetric_probs(n), 0..n, 0..n)),
        bump in 0.0..1.0f64,
    ) {
        prop_assume!(i != j);
        let mut q = p.clone();
        let v = (p[i * n + j] + bump).min(1.0);
        q[i * n + j] = v;
        q[j * n + i] = v;
        let before = most_reliable_paths(&ReliabilityGraph::from_matrix(n, &p), 0);
        let after = most_reliable_paths(&ReliabilityGraph::from_matrix(n, &q), 0);
        for dst in 1..n {
            let rb = before.route(dst).map_or(0.0, |r| r.reliability);
            let ra = after.route(dst).map_or(0.0, |r| r.reliability);
            prop_assert!(ra >= rb - 1e-12);
        }
    }

    #[test]
    fn chi2_round_trip(p in 0.0..0.999999f64) {
        let x = chi2_quantile_2(p).unwrap();
        prop_assert!((chi2_cdf_2(x).unwrap() - p).abs() <= 1e-12);
    }

    #[test]
    fn noncentral_monotone(x in 0.0..200.0f64, dx in 0.0..20.0f64, lambda in 0.0..200.0f64, dl in 0.0..20.0f64) {
        let f = noncentral_chi2_cdf_2(x, lambda).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!(noncentral_chi2_cdf_2(x + dx, lambda).unwrap() >= f - 1e-12);
        prop_assert!(noncentral_chi2_cdf_2(x, lambda + dl).unwrap() <= f + 1e-12);
    }

    #[test]
    fn location_adjacency_rigid_invariance(
        (ax, ay, bx, by) in (0.0..1500.0f64, 0.0..1500.0f64, 0.0..1500.0f64, 0.0..1500.0f64),
        (tx, ty, angle) in (-1000.0..1000.0f64, -1000.0..1000.0f64, 0.0..std::f64::consts::TAU),
        (si, sj) in (1.0..40.0f64, 1.0..40.0f64),
    ) {
        let a = Point2::new(ax, ay);
        let b = Point2::new(bx, by);
        let base = location_adjacency(a, si, b, sj, 500.0);
        let shift = Point2::new(tx, ty);
        let moved = location_adjacency(a.rotated(angle) + shift, si, b.rotated(angle) + shift, sj, 500.0);
        prop_assert!((base - moved).abs() <= 1e-9, "{} vs {}", base, moved);
        prop_assert!((base - location_adjacency(b, sj, a, si, 500.0)).abs() <= 1e-12);
    }

    #[test]
    fn sigma_p_monotone(t in 0.0..60.0f64, dt in 0.0..10.0f64) {
        let bp = [(0.0, 10.0), (20.0, 20.0), (30.0, 30.0)];
        let s = sigma_p(t, &bp);
        prop_assert!((10.0..=30.0).contains(&s));
        prop_assert!(sigma_p(t + dt, &bp) >= s);
    }

    #[test]
    fn ledger_counts_every_transmit(
        frames in prop::collection::vec((0usize..5, prop::option::of(0usize..5), 1u64..5000, any::<bool>()), 0..60),
        xs in prop::collection::vec(0.0..1500.0f64, 5),
    ) {
        let positions: Vec<Point2<f64>> = xs.iter().map(|&x| Point2::new(x, 0.0)).collect();
        let mut radio = Radio::new(ChannelParams::uniform(5, 500.0), RngStream::new(3, "radio"));
        let (mut control, mut data) = (0, 0);
        for (src, dst, bits, is_data) in frames {
            let kind = if is_data { FrameKind::Data } else { FrameKind::Control };
            let dst = dst.map_or(Destination::Broadcast, Destination::Unicast);
            if is_data { data += bits } else { control += bits }
            radio.transmit(&Frame { src, dst, payload_bits: bits, kind, send_time: SimTime::ZERO }, &positions);
        }
        prop_assert_eq!(radio.ledger.control_bits, control);
        prop_assert_eq!(radio.ledger.data_bits, data);
    }
}
