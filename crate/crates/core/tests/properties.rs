use std::f64::consts::TAU;

use oos_core::astro::{solve_phasing, OrbitGeometry, DEFAULT_R_CRIT_KM, G0_M_S2, GEO_RADIUS_KM, MU_EARTH_KM3_S2};
use oos_core::demand::{build_occupancy, build_window, occupancy_end, PoissonStream};
use oos_core::horizon::{value_series, CashFlow};
use oos_core::model::CostComponent;
use oos_core::network::TimeGrid;
use proptest::prelude::*;

fn geo() -> OrbitGeometry {
    OrbitGeometry::new(GEO_RADIUS_KM, DEFAULT_R_CRIT_KM, MU_EARTH_KM3_S2, G0_M_S2).unwrap()
}

proptest! {
    #[test]
    fn phasing_respects_limits(frac in 1e-6f64..=1.0, tof_days in 1.0f64..12.0) {
        let g = geo();
        let alpha = frac * TAU;
        let tof = tof_days * 86_400.0;
        if let Ok(s) = solve_phasing(alpha, &g, tof) {
            prop_assert!(s.semi_major_axis_km >= g.min_semi_major_axis_km());
            prop_assert!(s.travel_time_s <= tof * (1.0 + 1e-9));
            prop_assert!(s.servicer_revolutions >= 1 && s.delta_v_km_s >= 0.0);
            let sweep = alpha + TAU * s.target_revolutions as f64;
            prop_assert!((s.travel_time_s - sweep * g.time_per_radian_s()).abs() <= 1e-9 * s.travel_time_s);
            // k1 phasing periods fill the travel time
            let period = TAU * (s.semi_major_axis_km.powi(3) / MU_EARTH_KM3_S2).sqrt();
            let rel = (period * s.servicer_revolutions as f64 - s.travel_time_s).abs() / s.travel_time_s;
            prop_assert!(rel < 1e-9);
        }
    }

    #[test]
    fn more_time_never_costs_more(frac in 1e-6f64..=1.0, tof_days in 1.0f64..8.0, extra in 0.0f64..4.0) {
        let g = geo();
        let short = solve_phasing(frac * TAU, &g, tof_days * 86_400.0);
        let long = solve_phasing(frac * TAU, &g, (tof_days + extra) * 86_400.0);
        if let Ok(s) = short {
            let l = long.expect("a longer window keeps every candidate");
            prop_assert!(l.delta_v_km_s <= s.delta_v_km_s);
        }
    }

    #[test]
    fn window_dates_sit_on_the_grid(k in 0i64..20, window in 0u32..60, dt in 1u32..3, steps in 1u32..3) {
        let grid = TimeGrid::new(dt, 10, steps, 400).unwrap();
        let occ = 10 * k;
        let w = build_window(occ, window, &grid);
        prop_assert!(!w.is_empty());
        prop_assert!(w.windows(2).all(|p| p[1] - p[0] == 10));
        let nodes = grid.time_nodes(0);
        prop_assert!(w.iter().all(|t| nodes.contains(t) && *t > occ));
        prop_assert!(w.iter().all(|t| t - (dt * steps) as i64 <= occ + window as i64));
    }

    #[test]
    fn occupancy_covers_whole_intervals(k in 0i64..20, j in 0u32..3, duration in 1u32..200) {
        let grid = TimeGrid::new(1, 10, 2, 400).unwrap();
        let times = grid.time_nodes(0);
        let start = 10 * k + j as i64;
        let rows = build_occupancy(start, duration, &grid, &times);
        let end = occupancy_end(start, duration, &grid);
        prop_assert_eq!(rows.first().copied(), Some(start));
        prop_assert!(end % 10 == 0 && end - 10 * k >= duration as i64 && end - 10 * k < duration as i64 + 10);
        prop_assert!(rows.iter().all(|t| *t >= start && *t < end));
        prop_assert_eq!(rows.len(), times.iter().filter(|t| **t >= start && **t < end).count());
    }

    #[test]
    fn poisson_gaps_are_positive_and_reproducible(seed in any::<u64>(), stream in 0u64..100, mean in 1.0f64..1000.0) {
        let mut a = PoissonStream::new(seed, stream, Some(mean));
        let mut b = PoissonStream::new(seed, stream, Some(mean));
        for _ in 0..20 {
            let x = a.next_gap().unwrap();
            prop_assert!(x > 0.0);
            prop_assert_eq!(Some(x), b.next_gap());
        }
        prop_assert!(PoissonStream::new(seed, stream, None).next_gap().is_none());
    }

    #[test]
    fn value_series_accumulates(
        flows in prop::collection::vec((0i64..100, 0usize..3, 0.0f64..1e6), 0..40),
        investment in 0.0f64..1e8,
    ) {
        let comps = [CostComponent::Revenue, CostComponent::Servicers, CostComponent::Delay];
        let flows: Vec<CashFlow> = flows
            .into_iter()
            .map(|(day, c, amount_usd)| CashFlow { day, component: comps[c], amount_usd })
            .collect();
        let s = value_series(&flows, investment, 0, 100, 10);
        prop_assert_eq!(s.len(), 11);
        prop_assert_eq!(s[0].value_usd, -investment);
        for p in s.windows(2) {
            prop_assert!(p[1].revenue_usd >= p[0].revenue_usd && p[1].cost_usd >= p[0].cost_usd);
        }
        for p in &s {
            prop_assert!((p.value_usd - (p.revenue_usd - p.cost_usd - investment)).abs() <= 1e-6 * investment.max(1.0));
        }
        let before_end: f64 = flows.iter().filter(|f| f.day < 100).map(|f| f.amount_usd).sum();
        let last = s.last().unwrap();
        prop_assert!((last.revenue_usd + last.cost_usd - before_end).abs() <= 1e-6 * before_end.max(1.0));
    }
}
