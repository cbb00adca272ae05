use pulseplay_core::hr::HrSample;
use pulseplay_core::session::{visible, Condition, OperatorCommand, ServerMessage, SessionState, N_SEATS};
use serde_json::Value;

fn truth(condition: Condition, viewer: usize, subject: usize) -> bool {
    match condition {
        Condition::HrAll => true,
        Condition::HrOthers => viewer != subject,
        Condition::HrNone => false,
    }
}

/// Seat entries carry physiological fields exactly when visible and live.
fn check_line(line: &str, condition: Condition, viewer: usize) {
    let v: Value = serde_json::from_str(line).unwrap();
    assert_eq!(v["condition"], condition.as_str());
    for (s, seat) in v["seats"].as_array().unwrap().iter().enumerate() {
        let keys: Vec<&str> = seat.as_object().unwrap().keys().map(String::as_str).collect();
        let physio = ["bpm", "confidence", "phase", "hist"].iter().filter(|k| keys.contains(k)).count();
        if truth(condition, viewer, s) {
            assert_eq!(physio, 4, "{line}");
            assert_eq!(seat["idle"], false);
        } else {
            assert_eq!(physio, 0, "leak for viewer {viewer} subject {s}: {line}");
            assert_eq!(seat["idle"], true);
        }
        assert_eq!(seat["label"] == "me", s == viewer);
    }
}

#[test]
fn exhaustive_truth_table() {
    for c in Condition::ALL {
        for viewer in 0..N_SEATS {
            for subject in 0..N_SEATS {
                assert_eq!(visible(c, viewer, subject), truth(c, viewer, subject));
            }
        }
    }
}

#[test]
fn scripted_session_never_leaks() {
    let mut s = SessionState::with_names(["Ana", "Ben", "Cy"], 2).unwrap();
    let mut frames = 0;
    let mut t = 0.0f64;
    for round in 0..3 {
        if round > 0 {
            s.apply_operator_command(&OperatorCommand::AdvanceSchedule).unwrap();
        }
        s.apply_operator_command(&OperatorCommand::StartGame).unwrap();
        for _ in 0..30 {
            t += 1.0;
            for seat in 0..N_SEATS {
                let bpm = 65.0 + 5.0 * seat as f64 + (t * 0.3).sin() * 4.0;
                s.ingest_estimate(seat, HrSample { t, bpm, confidence: 0.8 }).unwrap();
            }
            for sub in 0..10 {
                s.advance_clock(t + sub as f64 * 0.1);
                for viewer in 0..N_SEATS {
                    let line = ServerMessage::from(s.render_state(viewer).unwrap()).to_line();
                    check_line(&line, s.condition(), viewer);
                    frames += 1;
                }
            }
        }
        s.apply_operator_command(&OperatorCommand::EndGame).unwrap();
    }
    assert_eq!(frames, 3 * 30 * 10 * 3);
}

#[test]
fn render_is_deterministic() {
    let mut s = SessionState::with_names(["a", "b", "c"], 0).unwrap();
    s.ingest_estimate(0, HrSample { t: 1.3, bpm: 77.7, confidence: 0.4 }).unwrap();
    for viewer in 0..N_SEATS {
        let a = serde_json::to_string(&s.render_state(viewer).unwrap()).unwrap();
        let b = serde_json::to_string(&s.clone().render_state(viewer).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
