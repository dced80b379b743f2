use std::collections::BTreeMap;

/// The meetup transcript written out from the rules alone: who gets what,
/// with which sequence number, without running the server.
pub fn meetup_oracle() -> Vec<String> {
    let summary = r#"{"center":{"lat":41.56,"lon":-8.397},"end":7200,"id":"a1","kind":"MEET_UP","organizer":"ana","policy":"DISCLOSE_IDENTITY","radius_m":100.0,"start":0,"title":"Meet at the fountain"}"#;
    let actors = ["ana", "mario", "rita"];
    let returns = [3300u64, 3480, 3780];
    let mut seq: BTreeMap<&str, u64> = BTreeMap::new();
    let mut out = Vec::new();
    let mut notify = |out: &mut Vec<String>, at: u64, to: &'static str, body: String| {
        let n = seq.entry(to).or_insert(0);
        *n += 1;
        out.push(format!(
            r#"{{"at":{at},"msg":{{"type":"NOTIFY","notification":{body},"seq":{n}}},"to":"{to}"}}"#
        ));
    };
    let ack = |at: u64, to: &str, of: &str| format!(r#"{{"at":{at},"msg":{{"type":"ACK","of":"{of}"}},"to":"{to}"}}"#);

    for to in ["mario", "rita"] {
        notify(&mut out, 0, to, format!(r#"{{"type":"INVITATION","summary":{summary}}}"#));
    }
    for who in actors {
        if who != "ana" {
            out.push(ack(0, who, "RESPOND_INVITE"));
        }
        out.push(ack(0, who, "FIX"));
        out.push(ack(0, who, "ARM"));
    }
    let mut arrived = 0;
    for t in (60..=4200).step_by(60) {
        for (i, who) in actors.into_iter().enumerate() {
            if t > returns[i] {
                continue;
            }
            out.push(ack(t, who, "FIX"));
            if t == returns[i] {
                arrived += 1;
                notify(&mut out, t, who, format!(r#"{{"type":"SELF_ARRIVAL_ACK","activity":"a1","at":{t}}}"#));
                for other in actors.into_iter().filter(|o| *o != who) {
                    notify(
                        &mut out,
                        t,
                        other,
                        format!(r#"{{"type":"ARRIVAL_NOTICE","activity":"a1","at":{t},"identity":"{who}"}}"#),
                    );
                }
                if arrived == 3 {
                    for to in actors {
                        notify(&mut out, t, to, format!(r#"{{"type":"ALL_ARRIVED","activity":"a1","at":{t}}}"#));
                    }
                }
            }
        }
    }
    out
}
