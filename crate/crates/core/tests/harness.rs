use proroute::harness::{
    csv_string, read_csv, run_sweep, summary, write_csv, AggregateRow, ExportError, SweepAxis,
    SweepSpec, CSV_HEADER,
};
use proroute::metrics::MetricsReport;
use proroute::protocol::ProtocolKind;
use proroute::scenario::{ScenarioConfig, ScenarioError};
use proroute::time::SimTime;
use proroute::NodeId;

// Two-sided 95% Student-t critical value for 9 degrees of freedom, from tables.
const T_975_9: f64 = 2.262_157_162_8;

fn small(protocol: ProtocolKind) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::mobility_preset(protocol, 1.0);
    cfg.nodes = 10;
    cfg.width = 500.0;
    cfg.height = 500.0;
    cfg.duration = 30.0;
    cfg
}

fn errors(text: &str) -> Vec<String> {
    match ScenarioConfig::parse(text) {
        Err(ScenarioError::InvalidConfig(e)) => e,
        other => panic!("expected InvalidConfig, got {other:?}"),
    }
}

#[test]
fn parses_a_full_file() {
    let cfg = ScenarioConfig::parse(
        "# comment\n\
         protocol = OLSR_M\n\
         nodes = 3\n\
         field = 400x300\n\
         duration = 120\n\
         pause = 10   # trailing\n\
         seed = 9\n\
         [intervals]\n\
         hello = 0.5\n\
         [thresholds]\n\
         beta_cri = 1000\n\
         [flow]\n\
         flow = 0 2 4 512 1 100\n\
         [positions]\n\
         0 = 0 0\n\
         1 = 100 0\n\
         2 = 200 0\n",
    )
    .unwrap();
    assert_eq!(cfg.protocol, ProtocolKind::OlsrM);
    assert_eq!((cfg.width, cfg.height, cfg.duration, cfg.pause, cfg.seed), (400.0, 300.0, 120.0, 10.0, 9));
    assert_eq!(cfg.timers().hello, SimTime::from_millis(500));
    assert_eq!(cfg.thresholds.beta_cri, 1000.0);
    assert_eq!(cfg.flows.len(), 1);
    assert_eq!((cfg.flows[0].src, cfg.flows[0].dst, cfg.flows[0].packet_size), (NodeId(0), NodeId(2), 4096));
    assert!(cfg.is_static());
}

#[test]
fn parse_errors_name_the_field() {
    assert!(errors("nodes = 0").iter().any(|e| e.starts_with("nodes")));
    assert!(errors("pause = 1000\nduration = 900").iter().any(|e| e.starts_with("pause")));
    assert!(errors("width = -3").iter().any(|e| e.contains("width")));
    assert!(errors("colour = red").iter().any(|e| e.contains("line 1") && e.contains("colour")));
    assert!(errors("[nowhere]\nx = 1").iter().any(|e| e.contains("nowhere.x")));
    assert!(errors("protocol = AODV").iter().any(|e| e.contains("protocol")));
    assert!(errors("just words").iter().any(|e| e.contains("key = value")));
    assert!(errors("nodes = 2\n[flow]\nflow = 0 0 4 512 0 10").iter().any(|e| e.contains("flow[0]")));
    assert!(errors("nodes = 2\n[positions]\n0 = 0 0\n2 = 5 5").iter().any(|e| e.contains("positions")));
    // Problems are reported together.
    assert!(errors("nodes = 0\nrange = 0\nbandwidth = 0").len() >= 3);
}

#[test]
fn missing_file_is_io() {
    let r = ScenarioConfig::from_file(std::path::Path::new("/nonexistent/scenario.cfg"));
    assert!(matches!(r, Err(ScenarioError::Io(_))));
}

#[test]
fn presets_follow_the_experiments() {
    let m = ScenarioConfig::mobility_preset(ProtocolKind::Dsdv, 300.0);
    assert_eq!((m.nodes, m.max_speed, m.pause, m.duration), (50, 30.0, 300.0, 900.0));
    assert_eq!((m.width, m.height, m.bandwidth), (1000.0, 1000.0, 2_000_000));
    let s = ScenarioConfig::scalability_preset(ProtocolKind::Fsr, 70);
    assert_eq!((s.nodes, s.max_speed, s.pause), (70, 15.0, 2.0));
}

#[test]
fn sweep_spec_validation() {
    let base = small(ProtocolKind::Dsdv);
    let bad = [
        SweepSpec::new(base.clone(), SweepAxis::PauseTime, vec![1.0], 0),
        SweepSpec::new(base.clone(), SweepAxis::PauseTime, vec![], 1),
        SweepSpec::new(base.clone(), SweepAxis::PauseTime, vec![5.0, 1.0], 1),
        SweepSpec::new(base.clone(), SweepAxis::NodeCount, vec![2.5], 1),
        SweepSpec::new(base.clone(), SweepAxis::PauseTime, vec![1.0, 100.0], 1),
    ];
    for (i, s) in bad.iter().enumerate() {
        assert!(s.configs().is_err(), "spec {i}");
    }
    let mut spec = SweepSpec::new(base, SweepAxis::NodeCount, vec![5.0, 8.0], 3);
    spec.protocols = vec![ProtocolKind::Fsr];
    let cfgs = spec.configs().unwrap();
    let seen: Vec<(usize, u64)> = cfgs.iter().map(|c| (c.nodes, c.seed)).collect();
    assert_eq!(seen, vec![(5, 1), (5, 2), (5, 3), (8, 1), (8, 2), (8, 3)]);
    assert!(cfgs.iter().all(|c| c.protocol == ProtocolKind::Fsr));
}

#[test]
fn rate_axis_changes_only_the_rate() {
    let base = small(ProtocolKind::Olsr);
    let c = SweepAxis::Rate.apply(&base, 8.0).unwrap();
    assert_eq!(c.flow_defaults.rate, 8.0);
    assert_eq!((c.nodes, c.pause, c.seed), (base.nodes, base.pause, base.seed));
    assert_eq!("pause".parse::<SweepAxis>().unwrap(), SweepAxis::PauseTime);
    assert_eq!("nodes".parse::<SweepAxis>().unwrap(), SweepAxis::NodeCount);
    assert!("speed".parse::<SweepAxis>().is_err());
}

#[test]
fn ci_matches_hand_student_t() {
    let mut spec = SweepSpec::new(small(ProtocolKind::Dsdv), SweepAxis::PauseTime, vec![1.0], 10);
    spec.protocols = vec![ProtocolKind::Dsdv];
    let res = run_sweep(&spec).unwrap();
    assert_eq!(res.rows.len(), 1);
    let seeds: Vec<u64> = res.reports.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, (1..=10).collect::<Vec<_>>());
    let ce: Vec<f64> = res.reports.iter().map(|r| r.control.transmissions as f64).collect();
    let m = ce.iter().sum::<f64>() / 10.0;
    let var = ce.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 9.0;
    let half = T_975_9 * var.sqrt() / 10f64.sqrt();
    let row = &res.rows[0];
    assert!((row.ce.mean - m).abs() < 1e-9);
    assert!((row.ce.ci95 - half).abs() < 1e-6 * half.max(1.0), "{} vs {half}", row.ce.ci95);
    assert_eq!(row.replications, 10);
}

#[test]
fn single_or_identical_replications_have_zero_width() {
    let mut spec = SweepSpec::new(small(ProtocolKind::Fsr), SweepAxis::PauseTime, vec![1.0], 1);
    spec.protocols = vec![ProtocolKind::Fsr];
    let res = run_sweep(&spec).unwrap();
    for (_, s) in res.rows[0].metrics() {
        assert_eq!(s.ci95, 0.0);
    }
    let r = res.reports[0].clone();
    let same = AggregateRow::from_reports(1.0, ProtocolKind::Fsr, &[r.clone(), r.clone(), r]);
    for (_, s) in same.metrics() {
        assert_eq!(s.ci95, 0.0);
    }
}

#[test]
fn rows_are_complete_and_axis_ordered() {
    let mut spec = SweepSpec::new(small(ProtocolKind::Dsdv), SweepAxis::PauseTime, vec![0.0, 5.0, 30.0], 2);
    spec.protocols = ProtocolKind::ALL.to_vec();
    let res = run_sweep(&spec).unwrap();
    assert_eq!(res.rows.len(), 3 * 4);
    let keys: Vec<(f64, ProtocolKind)> = res.rows.iter().map(|r| (r.axis, r.protocol)).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    assert_eq!(keys, sorted);
    let csv = csv_string(&res.rows).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 12 * 4);
    assert_eq!(lines[0], CSV_HEADER.join(","));
    let recs = read_csv(csv.as_bytes()).unwrap();
    for row in &res.rows {
        for (metric, _) in row.metrics() {
            let hits = recs
                .iter()
                .filter(|r| r.axis == row.axis && r.protocol == row.protocol && r.metric == metric)
                .count();
            assert_eq!(hits, 1);
        }
    }
    assert!(summary(&res).unwrap().contains("constraints"));
}

#[test]
fn csv_round_trip_is_exact() {
    let reports: Vec<MetricsReport> = (0..4)
        .map(|i| MetricsReport {
            duration: 7.0,
            data_sent: 10,
            data_received: 3 + i,
            bytes_received: 512 * (3 + i),
            sum_e2e_delay_us: 1_234_567 * (i + 1),
            ..MetricsReport::default()
        })
        .collect();
    let rows: Vec<AggregateRow> = [0.0, 2.5, 1e-7]
        .iter()
        .map(|&a| AggregateRow::from_reports(a, ProtocolKind::OlsrM, &reports))
        .collect();
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().count(), 13);
    let back = read_csv(buf.as_slice()).unwrap();
    let mut i = 0;
    for r in &rows {
        for (metric, s) in r.metrics() {
            let b = &back[i];
            assert_eq!((b.axis, b.protocol, b.metric.as_str()), (r.axis, r.protocol, metric));
            assert_eq!(b.mean.to_bits(), s.mean.to_bits());
            assert_eq!(b.ci95.to_bits(), s.ci95.to_bits());
            assert_eq!(b.replications, 4);
            i += 1;
        }
    }
    assert!(matches!(write_csv(&[], Vec::new()), Err(ExportError::Empty)));
    assert!(matches!(read_csv("a,b\n1,2\n".as_bytes()), Err(ExportError::Parse(_))));
}
