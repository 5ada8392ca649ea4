//! Reference external forecaster for the GRIDCAST/1 protocol.
//!
//! Modes (first argument): `naive` (default) repeats the last context value;
//! `echo` returns the context itself (cycled to the horizon);
//! `hash` emits a value derived from every context value; `short` emits one
//! value too few; `malformed` emits a non-numeric line; `nan` emits NaN;
//! `fail` exits with status 3; `sleep <secs>` sleeps before answering.

use std::io::{Read, Write};
use std::time::Duration;

use gridcast_harness::protocol::{parse_request, write_response};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mode = args.first().map(String::as_str).unwrap_or("naive");
    if mode == "sleep" {
        let secs: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10.0);
        std::thread::sleep(Duration::from_secs_f64(secs));
    }
    let mut input = String::new();
    if std::io::stdin().read_to_string(&mut input).is_err() {
        std::process::exit(2);
    }
    let req = match parse_request(&input) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("stub: {e}");
            std::process::exit(2);
        }
    };
    let last = req.context.last().copied().unwrap_or(0.0);
    let out = match mode {
        "hash" => {
            let h = req.context.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, v| (h ^ v.to_bits()).wrapping_mul(0x100_0000_01b3));
            vec![(h >> 11) as f64 / (1u64 << 53) as f64; req.horizon]
        }
        "echo" => req.context.iter().copied().cycle().take(req.horizon).collect(),
        "short" => vec![last; req.horizon.saturating_sub(1)],
        "malformed" => {
            print!("{last}\nnot-a-number\nEND\n");
            return;
        }
        "nan" => vec![f64::NAN; req.horizon],
        "fail" => {
            eprintln!("stub: asked to fail");
            std::process::exit(3);
        }
        _ => vec![last; req.horizon],
    };
    let mut stdout = std::io::stdout().lock();
    if stdout.write_all(write_response(&out).as_bytes()).is_err() {
        std::process::exit(2);
    }
}
