use motionfuse_core::fusion::{apply_command, decide, Action, CameraObservation, PanTiltState};
use motionfuse_core::pir::PirState;

/// Rule table transcribed as data: sensors (front, left, right), rule
/// index, turn-right test, turn-left test.
type Test = fn(f64) -> bool;
const TABLE: [((bool, bool, bool), u8, Test, Test); 7] = [
    ((true, true, true), 0, |a| a <= -45.0, |a| a >= 45.0),
    ((true, true, false), 5, |a| a < -90.0, |a| a > 0.0),
    ((true, false, true), 6, |a| a < 0.0, |a| a > 120.0),
    ((true, false, false), 2, |a| a <= -45.0, |a| a >= 45.0),
    ((false, true, false), 3, |a| a <= -120.0, |a| a >= -60.0),
    ((false, false, true), 4, |a| a <= 60.0, |a| a >= 120.0),
    // left and right together: the side band on the same side as the head
    ((false, true, true), 0, |a| (a < 0.0 && a <= -120.0) || (a >= 0.0 && a <= 60.0), |a| {
        (a < 0.0 && a >= -60.0) || (a >= 0.0 && a >= 120.0)
    }),
];

fn oracle(found: bool, pir: (bool, bool, bool), alpha: f64) -> (&'static str, u8) {
    if found {
        return ("CameraTracking", 1);
    }
    if pir == (false, false, false) {
        return ("TurnToZero", 7);
    }
    let (_, rule, right, left) = TABLE.iter().find(|row| row.0 == pir).expect("every combination listed");
    let action = if right(alpha) {
        "TurnRight"
    } else if left(alpha) {
        "TurnLeft"
    } else {
        "CameraTracking"
    };
    (action, *rule)
}

fn alphas() -> impl Iterator<Item = f64> {
    (0..=600).map(|i| -150.0 + 0.5 * i as f64)
}

fn combos() -> impl Iterator<Item = (bool, bool, bool, bool)> {
    (0..16u8).map(|m| (m & 8 != 0, m & 4 != 0, m & 2 != 0, m & 1 != 0))
}

#[test]
fn matches_rule_table_everywhere() {
    let mut checked = 0;
    for (found, i1, i2, i3) in combos() {
        let cam = if found {
            CameraObservation::at(100.0, 100.0, 320, 240)
        } else {
            CameraObservation::not_found(320, 240)
        };
        for alpha in alphas() {
            let got = decide(&PirState::new(i1, i2, i3), &cam, &PanTiltState::at(alpha));
            let want = oracle(found, (i1, i2, i3), alpha);
            assert_eq!((got.action.as_str(), got.rule), want, "found={found} pir=({i1},{i2},{i3}) alpha={alpha}");
            checked += 1;
        }
    }
    assert_eq!(checked, 16 * 601);
}

#[test]
fn turn_to_zero_only_when_nothing_is_seen() {
    for (found, i1, i2, i3) in combos() {
        let cam = if found {
            CameraObservation::at(5.0, 5.0, 320, 240)
        } else {
            CameraObservation::not_found(320, 240)
        };
        for alpha in alphas() {
            let c = decide(&PirState::new(i1, i2, i3), &cam, &PanTiltState::at(alpha));
            assert_eq!(c.action == Action::TurnToZero, !(found || i1 || i2 || i3));
        }
    }
}

#[test]
fn single_sensor_loops_settle_in_their_band() {
    let dt = 1.0 / 33.0;
    let bands = [
        ((true, false, false), -45.0, 45.0),
        ((false, true, false), -120.0, -60.0),
        ((false, false, true), 60.0, 120.0),
    ];
    for (pir, lo, hi) in bands {
        let pir = PirState::new(pir.0, pir.1, pir.2);
        for start in alphas().step_by(10) {
            let mut head = PanTiltState::at(start);
            let mut entered = None;
            for tick in 0..(10.0 / dt) as usize {
                let cmd = decide(&pir, &CameraObservation::not_found(320, 240), &head);
                let inside = head.pan_deg > lo && head.pan_deg < hi;
                match entered {
                    None if inside => entered = Some(tick),
                    Some(_) => assert!(inside, "left band ({lo}, {hi}) at {}", head.pan_deg),
                    None => {}
                }
                head = apply_command(&head, cmd.action, dt);
                assert!((-150.0..=150.0).contains(&head.pan_deg));
            }
            let t = entered.expect("band reached") as f64 * dt;
            assert!(t <= 7.0, "start {start}: {t} s");
        }
    }
}
