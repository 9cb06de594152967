//! Acceptance run: one PASS/FAIL line per criterion, measured value against
//! a pinned tolerance. Exits non-zero if any criterion fails.

#[path = "../../core/tests/support/mod.rs"]
mod core_support;

#[path = "../../bridge/tests/support/mod.rs"]
mod bridge_support;

use std::process::ExitCode;
use std::time::Instant;

use mariner::{cmd_bench, load_world_source, BenchOptions};
use mariner_core::accel::{make_backend, BackendKind, BackendOptions, CACHING_RUN, DEFAULT_LEAF_SIZE, QUERY_RUN, RAYCAST_RUN};

/// One pinned comparison inside a criterion.
struct Check {
    what: String,
    pass: bool,
}

fn check(pass: bool, what: impl Into<String>) -> Check {
    Check { what: what.into(), pass }
}

fn le(name: &str, value: f64, limit: f64) -> Check {
    check(value <= limit, format!("{name} {value:.3e} <= {limit:.0e}"))
}

fn within_budget(start: Instant, budget_s: f64) -> Check {
    let t = start.elapsed().as_secs_f64();
    check(t < budget_s, format!("runtime {t:.1} s < {budget_s:.0} s"))
}

fn bench_ordering() -> Vec<Check> {
    let start = Instant::now();
    let dir = tempfile::TempDir::new().expect("temp dir");
    let world = load_world_source("dam").expect("bundled world");
    let r = match cmd_bench(&world, &BenchOptions { ticks: 509, ..Default::default() }, dir.path()) {
        Ok(r) => r,
        Err(e) => return vec![check(false, format!("bench failed: {e}"))],
    };
    let mean = |run| r.row(run).map_or(f64::NAN, |row| row.mean_time_per_tick);
    let (caching, query, raycast) = (mean(CACHING_RUN), mean(QUERY_RUN), mean(RAYCAST_RUN));
    vec![
        check(raycast < query && query < caching, format!("raycast {raycast:.6} < query {query:.6} < caching {caching:.6} s/tick")),
        check(query / raycast >= 2.0, format!("query/raycast {:.2} >= 2", query / raycast)),
        within_budget(start, 300.0),
    ]
}

fn backend_equivalence() -> Vec<Check> {
    let start = Instant::now();
    let leaf = DEFAULT_LEAF_SIZE;
    let world = core_support::generated_world(3, 3.0);
    let rays = core_support::random_rays(&world, 10_000, 60.0, 17);
    let e = core_support::backend_equivalence(&world, &rays, leaf);
    vec![
        check(e.rays == 10_000 && e.dual_hits >= 2_500, format!("{} rays, {} dual hits >= 2500", e.rays, e.dual_hits)),
        check(e.range_disagreements == 0, format!("dual-hit ranges beyond 2*leaf {} == 0", e.range_disagreements)),
        check(
            e.hit_miss_outside_band == 0,
            format!("hit/miss disagreements {} of which off the silhouette band {} == 0", e.hit_miss_disagreements, e.hit_miss_outside_band),
        ),
        check(e.label_disagreements == 0, format!("label disagreements on agreeing ranges {} == 0", e.label_disagreements)),
        within_budget(start, 60.0),
    ]
}

/// Accepted shortfall of the literal equivalence criterion: every range and
/// label disagreement is an occluder-edge case on the silhouette band.
fn backend_equivalence_band() -> Check {
    let world = core_support::generated_world(3, 3.0);
    let rays = core_support::random_rays(&world, 10_000, 60.0, 17);
    let e = core_support::backend_equivalence(&world, &rays, DEFAULT_LEAF_SIZE);
    check(e.outside_band == 0, format!("all disagreements on the silhouette band (off band {} == 0)", e.outside_band))
}

fn dynamics_properties() -> Vec<Check> {
    let start = Instant::now();
    let (skew, diss) = core_support::skew_and_dissipation(1000, 3);
    let growth = core_support::passive_energy_growth(10_000);
    let (slope, _) = core_support::rk4_order();
    vec![
        le("skew |v'Cv|/|v|^2 over 1000 states", skew, 1e-9),
        check(diss >= 0.0, format!("min v'Dv {diss:.3e} >= 0")),
        check(growth <= 1e-12, format!("max step KE growth {growth:.3e} <= 1e-12 over 10000 ticks")),
        check((slope - 4.0).abs() <= 0.3, format!("RK4 order {slope:.3} in 4 +- 0.3")),
        within_budget(start, 120.0),
    ]
}

fn autopilot_regressions() -> Vec<Check> {
    let start = Instant::now();
    let d = core_support::depth_step();
    let h = core_support::heading_step();
    vec![
        check(d.final_error.abs() <= 0.25, format!("depth error at 120 s {:.3} m within 0.25", d.final_error)),
        check(d.overshoot < 0.2, format!("depth overshoot {:.1}% < 20%", 100.0 * d.overshoot)),
        check(d.rms_vs_reference < 0.05, format!("depth rms vs fine step {:.2e} m < 0.05", d.rms_vs_reference)),
        check(h.final_error.abs() <= 2.0, format!("heading error at 60 s {:.3} deg within 2", h.final_error)),
        check(h.rms_vs_reference < 0.5, format!("heading rms vs fine step {:.2e} deg < 0.5", h.rms_vs_reference)),
        check(
            d.switching_rate < 5.0 && h.switching_rate < 5.0,
            format!("fin sign changes {:.2}/s, {:.2}/s < 5/s", d.switching_rate, h.switching_rate),
        ),
        within_budget(start, 120.0),
    ]
}

fn current_drift() -> Vec<Check> {
    let drift = core_support::zero_thrust_drift_error();
    let (offset, integral) = core_support::shear_cross_track();
    let rel = (offset - integral).abs() / integral.abs();
    vec![
        check(drift <= 0.01, format!("ground velocity error {:.2e} of current <= 1e-2", drift)),
        check(rel <= 0.05, format!("shear cross-track {offset:.3} m vs oracle {integral:.3} m, rel {rel:.2e} <= 5e-2")),
    ]
}

fn spawned_prop() -> Vec<Check> {
    match core_support::spawned_prop_liveness() {
        Ok(()) => vec![check(true, "raycast sees the prop next cast; octree stale until rebuilt, then agrees")],
        Err(e) => vec![check(false, e)],
    }
}

fn sensor_suite() -> Vec<Check> {
    let world = core_support::generated_world(21, 0.0);
    let leaf = DEFAULT_LEAF_SIZE;
    let direct = make_backend(BackendKind::Raycast, &world, &BackendOptions::default()).expect("raycast backend");
    let tree = make_backend(BackendKind::Octree, &world, &BackendOptions { leaf_size: leaf }).expect("octree backend");
    let rms_direct = core_support::multibeam_rms(&world, direct.as_ref());
    let rms_tree = core_support::multibeam_rms(&world, tree.as_ref());
    let (checked, wrong, props) = core_support::semantic_label_check();
    let cadence = core_support::cadence_table();
    let cadence_ok = cadence.iter().all(|(_, _, got, want)| got == want);
    vec![
        le("multibeam rms raycast (m)", rms_direct, 1e-6),
        check(rms_tree <= 2.0 * leaf, format!("multibeam rms octree {rms_tree:.4} m <= 2*leaf {:.2}", 2.0 * leaf)),
        check(checked == 1000 && wrong == 0, format!("semantic labels {wrong} wrong of {checked} ({props} on props) == 0")),
        check(cadence_ok, format!("cadence counts exact on {} cases", cadence.len())),
    ]
}

fn waves_buoyancy() -> Vec<Check> {
    let period = core_support::dispersion_errors().into_iter().fold(0.0, f64::max);
    let partial = core_support::partial_buoyancy_errors().into_iter().fold(0.0, f64::max);
    let deep = core_support::deep_buoyancy_gap();
    vec![
        check(period < 0.01, format!("dispersion period error {period:.2e} < 1e-2")),
        check(partial < 0.02, format!("partial buoyancy error at K=100 {partial:.2e} < 2e-2")),
        le("deep buoyancy vs restoring term (N, N m)", deep, 1e-9),
    ]
}

fn bridge_protocol() -> Vec<Check> {
    let fuzz = bridge_support::fuzz_round_trip(10_000);
    let fan = bridge_support::fan_out_order(300);
    let j = bridge_support::stalled_client_jitter();
    vec![
        check(fuzz.is_ok(), format!("10000-envelope round trip: {}", fuzz.err().unwrap_or_else(|| "identity".into()))),
        check(fan.is_ok(), format!("fan-out to 2 clients: {}", fan.map_or_else(|e| e, |n| format!("{n} frames in order")))),
        check(
            j.stalled_p95 < 2.0 * j.baseline_p95 && j.client_dropped > 0,
            format!(
                "p95 tick {:.1} us with stalled client < 2 x {:.1} us; {} dropped",
                j.stalled_p95 * 1e6,
                j.baseline_p95 * 1e6,
                j.client_dropped
            ),
        ),
    ]
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Vec<Check>); 9] = [
        ("bench-ordering", bench_ordering),
        ("backend-equivalence", backend_equivalence),
        ("dynamics-properties", dynamics_properties),
        ("autopilot-regressions", autopilot_regressions),
        ("current-drift", current_drift),
        ("spawned-prop-liveness", spawned_prop),
        ("sensor-semantic-suite", sensor_suite),
        ("waves-buoyancy", waves_buoyancy),
        ("bridge-protocol", bridge_protocol),
    ];
    // Known shortfalls: a FAIL here is only fatal if the deviation check
    // also fails.
    let documented: [(&str, fn() -> Check); 1] = [("backend-equivalence", backend_equivalence_band)];
    let (mut passed, mut fatal) = (0, 0);
    for (name, run) in criteria {
        let checks = run();
        let pass = checks.iter().all(|c| c.pass);
        let detail: Vec<String> = checks.iter().map(|c| if c.pass { c.what.clone() } else { format!("[x] {}", c.what) }).collect();
        println!("{} {name}: {}", if pass { "PASS" } else { "FAIL" }, detail.join("; "));
        if pass {
            passed += 1;
            continue;
        }
        match documented.iter().find(|(n, _)| *n == name) {
            Some((_, deviation)) => {
                let d = deviation();
                println!("     {name}: documented deviation, {}: {}", if d.pass { "holds" } else { "BROKEN" }, d.what);
                fatal += usize::from(!d.pass);
            }
            None => fatal += 1,
        }
    }
    println!("{passed} of {} criteria passed; {} failures outside documented deviations", criteria.len(), fatal);
    if fatal == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
