use std::time::{Duration, Instant};

use recmap_core::degradation::Pipeline;
use recmap_core::recoverability::io::evaltable_to_csv;
use recmap_core::recoverability::{eval_grid, GridConfig, GridExtent};
use recmap_core::restorers::plugin::{encode_frame, PluginProcess, HANDSHAKE};
use recmap_core::restorers::{PluginConfig, PluginError, PluginHost, RestorerSpec};
use recmap_core::{render_plate, Image};

const ECHO: &str = "printf 'RECMAP-PLUGIN 1\\n'; exec cat";
const FRAME_BYTES: usize = 16 + 256 * 64 * 3;

fn plugin_spec(cmd: &str, workers: usize, fresh: bool, timeout_secs: f64) -> RestorerSpec {
    RestorerSpec::Plugin {
        cmd: cmd.into(),
        workers,
        fresh,
        timeout_secs,
    }
}

fn small_grid(max: u32) -> GridConfig {
    let mut cfg = GridConfig::new(11);
    cfg.extent = GridExtent::square(max);
    cfg
}

fn plate() -> Image {
    render_plate("204817").unwrap().image
}

#[test]
fn handshake_constant_matches_echo_script() {
    assert!(ECHO.contains(HANDSHAKE));
}

#[test]
fn echo_plugin_matches_identity_on_sub_grid() {
    let cfg = small_grid(9);
    let pipe = Pipeline::default();
    let identity = eval_grid(&cfg, &pipe, &RestorerSpec::Identity.build().unwrap(), None).unwrap();
    let echo = plugin_spec(ECHO, 2, false, 30.0).build().unwrap();
    let via_plugin = eval_grid(&cfg, &pipe, &echo, None).unwrap();
    assert_eq!(via_plugin.failed_count(), 0);
    assert_eq!(evaltable_to_csv(&via_plugin), evaltable_to_csv(&identity));
}

#[test]
fn fresh_mode_matches_persistent_mode() {
    let cfg = small_grid(2);
    let pipe = Pipeline::default();
    let identity = eval_grid(&cfg, &pipe, &RestorerSpec::Identity.build().unwrap(), None).unwrap();
    let fresh = plugin_spec(ECHO, 1, true, 30.0).build().unwrap();
    let table = eval_grid(&cfg, &pipe, &fresh, None).unwrap();
    assert_eq!(evaltable_to_csv(&table), evaltable_to_csv(&identity));
}

#[test]
fn host_round_trip_is_byte_exact() {
    let host = PluginHost::new(PluginConfig::new(ECHO));
    let img = plate();
    for job in 0..3 {
        assert_eq!(host.restore(&img, job).unwrap(), img);
    }
}

#[test]
fn wrong_dimensions_fail_the_cell_and_the_run_continues() {
    // swallows each input frame and answers with a 1x1 RGB frame
    let cmd = format!(
        "printf 'RECMAP-PLUGIN 1\\n'; while head -c {FRAME_BYTES} >/dev/null; do \
         printf 'IMG0\\001\\000\\000\\000\\001\\000\\000\\000\\003\\000\\000\\000abc'; done"
    );
    let host = PluginHost::new(PluginConfig::new(cmd.clone()));
    match host.restore(&plate(), 0) {
        Err(PluginError::DimensionMismatch { expected, got }) => {
            assert_eq!(expected, (256, 64, 3));
            assert_eq!(got, (1, 1, 3));
        }
        other => panic!("unexpected {other:?}"),
    }

    let cfg = small_grid(1);
    let table = eval_grid(&cfg, &Pipeline::default(), &plugin_spec(&cmd, 1, false, 10.0).build().unwrap(), None)
        .unwrap();
    assert_eq!(table.cells.len(), 4);
    assert_eq!(table.failed_count(), 4);
    for c in &table.cells {
        let reason = c.failed.as_deref().unwrap();
        assert!(reason.contains(&format!("cell ({}, {})", c.alpha, c.beta)), "{reason}");
        assert!(c.ocr_plate.is_nan());
    }
}

#[test]
fn timeout_names_the_cell() {
    let cmd = "printf 'RECMAP-PLUGIN 1\\n'; exec sleep 30";
    let mut cfg = small_grid(0);
    cfg.extent.alpha = (3, 3);
    cfg.extent.beta = (4, 4);
    let start = Instant::now();
    let table = eval_grid(&cfg, &Pipeline::default(), &plugin_spec(cmd, 1, false, 0.5).build().unwrap(), None)
        .unwrap();
    assert!(start.elapsed() < Duration::from_secs(10));
    let reason = table.cells[0].failed.as_deref().unwrap();
    assert!(reason.contains("cell (3, 4)"), "{reason}");
    assert!(reason.contains("did not answer"), "{reason}");
}

#[test]
fn bad_handshake_is_rejected() {
    let err = PluginProcess::spawn("printf 'HELLO 2\\n'; exec cat", Duration::from_secs(5)).err();
    assert!(matches!(err, Some(PluginError::Handshake(_))), "{err:?}");
    let err = PluginProcess::spawn("exit 0", Duration::from_secs(5)).err();
    assert!(matches!(err, Some(PluginError::Handshake(_))), "{err:?}");
}

#[test]
fn crash_is_reported_and_worker_respawns() {
    // answers the first frame, then dies on the next one
    let cmd = format!(
        "printf 'RECMAP-PLUGIN 1\\n'; head -c {FRAME_BYTES}; exit 3"
    );
    let host = PluginHost::new(PluginConfig::new(cmd));
    let img = plate();
    assert_eq!(host.restore(&img, 0).unwrap(), img);
    assert!(matches!(host.restore(&img, 0), Err(PluginError::Crashed(_))));
    // the dead process was replaced
    assert_eq!(host.restore(&img, 0).unwrap(), img);
}

#[test]
fn truncated_reply_is_malformed_or_crash() {
    let cmd = "printf 'RECMAP-PLUGIN 1\\n'; head -c 20 >/dev/null; printf 'IMG0\\001\\000'; exit 0";
    let host = PluginHost::new(PluginConfig::new(cmd));
    let err = host.restore(&plate(), 0).unwrap_err();
    assert!(
        matches!(err, PluginError::Crashed(_) | PluginError::MalformedFrame(_)),
        "{err:?}"
    );
}

#[test]
fn frame_encoding_of_a_plate() {
    let img = plate();
    let bytes = encode_frame(&img);
    assert_eq!(bytes.len(), FRAME_BYTES);
    assert_eq!(&bytes[..4], b"IMG0");
    assert_eq!(&bytes[4..16], &[0, 1, 0, 0, 64, 0, 0, 0, 3, 0, 0, 0]);
}
