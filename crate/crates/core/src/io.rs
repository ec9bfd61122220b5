//! Game files: CSV with header `t,omega,xi_1,...,xi_N`, one row per step.
//!
//! Values are written in Rust's shortest round-trip decimal form, so a
//! written game parses back to identical `f64`s.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::game::GameInput;
use crate::loss::LossSpec;

pub fn read_game<R: Read>(reader: R, loss: LossSpec, delay: usize) -> Result<GameInput> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 3 || cols[0] != "t" || cols[1] != "omega" {
        return Err(Error::Parse {
            line: 1,
            message: "header must be `t,omega,xi_1,...,xi_N`".into(),
        });
    }
    for (k, c) in cols[2..].iter().enumerate() {
        if *c != format!("xi_{}", k + 1) {
            return Err(Error::Parse {
                line: 1,
                message: format!("column {} should be `xi_{}`, found `{c}`", k + 3, k + 1),
            });
        }
    }
    let n = cols.len() - 2;

    let mut outcomes = Vec::new();
    let mut forecasts = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(i as u64 + 2, |p| p.line());
        let parse_err = |message: String| Error::Parse { line, message };
        if rec.len() != n + 2 {
            return Err(parse_err(format!("expected {} fields, found {}", n + 2, rec.len())));
        }
        let t: usize = rec[0]
            .parse()
            .map_err(|_| parse_err(format!("bad step index `{}`", &rec[0])))?;
        if t != i + 1 {
            return Err(parse_err(format!("step index {t} out of sequence (expected {})", i + 1)));
        }
        let mut vals = Vec::with_capacity(n + 1);
        for field in rec.iter().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(format!("bad number `{field}`")))?;
            if !v.is_finite() {
                return Err(parse_err(format!("non-finite value `{field}`")));
            }
            vals.push(v);
        }
        loss.check_outcome(vals[0])
            .map_err(|e| Error::domain(format!("line {line} (t = {t}): {e}")))?;
        for (k, &x) in vals[1..].iter().enumerate() {
            loss.check_prediction(x).map_err(|e| {
                Error::domain(format!("line {line} (t = {t}), xi_{}: {e}", k + 1))
            })?;
        }
        outcomes.push(vals[0]);
        forecasts.push(vals[1..].to_vec());
    }
    if outcomes.is_empty() {
        return Err(Error::Parse {
            line: 2,
            message: "game file has no rows".into(),
        });
    }
    GameInput::new(outcomes, forecasts, delay, loss)
}

pub fn parse_game_file(path: impl AsRef<Path>, loss: LossSpec, delay: usize) -> Result<GameInput> {
    read_game(File::open(path)?, loss, delay)
}

pub fn write_game<W: Write>(writer: W, game: &GameInput) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string(), "omega".to_string()];
    header.extend((1..=game.num_experts()).map(|k| format!("xi_{k}")));
    wtr.write_record(&header)?;
    for (t, (omega, row)) in game.outcomes().iter().zip(game.forecasts()).enumerate() {
        let mut rec = vec![(t + 1).to_string(), omega.to_string()];
        rec.extend(row.iter().map(f64::to_string));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_game_file(path: impl AsRef<Path>, game: &GameInput) -> Result<()> {
    write_game(File::create(path)?, game)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate_game, GameModel, GeneratorSpec};
    use proptest::prelude::*;

    fn read(s: &str) -> Result<GameInput> {
        read_game(s.as_bytes(), LossSpec::square(), 1)
    }

    #[test]
    fn minimal_file() {
        let g = read("t,omega,xi_1\n1,0.5,0.25\n").unwrap();
        assert_eq!((g.len(), g.num_experts()), (1, 1));
    }

    #[test]
    fn two_experts() {
        let g = read("t,omega,xi_1,xi_2\n1,0.1,0.2,0.3\n2,0.4,0.5,0.6\n3,0.7,0.8,0.9\n").unwrap();
        assert_eq!((g.len(), g.num_experts()), (3, 2));
        assert_eq!(g.forecasts()[2], vec![0.8, 0.9]);
    }

    #[test]
    fn out_of_domain_outcome_names_row() {
        let err = read("t,omega,xi_1\n1,0.5,0.5\n2,1.5,0.5\n").unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("t = 2"), "{msg}");
    }

    #[test]
    fn malformed_rows() {
        let e = read("t,omega,xi_1\n1,0.5,abc\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e = read("t,omega,xi_1\n1,0.5,0.5\n3,0.5,0.5\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = read("t,omega,xi_1\n1,0.5,0.5,0.1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { .. }), "{e}");
        let e = read("time,omega,xi_1\n1,0.5,0.5\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }), "{e}");
        let e = read("t,omega,xi_2\n1,0.5,0.5\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }), "{e}");
        assert!(read("t,omega,xi_1\n").is_err());
        assert!(read("t,omega,xi_1\n1,NaN,0.5\n").is_err());
    }

    proptest! {
        #[test]
        fn write_then_read_is_identity(
            seed in any::<u64>(),
            n in 1usize..6,
            t in 1usize..60,
            noise in 0.0f64..1.0,
            model in prop_oneof![
                Just(GameModel::NoisyExperts),
                Just(GameModel::DriftingBest),
                Just(GameModel::AdversarialSwap),
            ],
        ) {
            let spec = GeneratorSpec { model, experts: n, steps: t, noise, seed, delay: 2 };
            let g = generate_game(&spec, LossSpec::square()).unwrap();
            let mut buf = Vec::new();
            write_game(&mut buf, &g).unwrap();
            let back = read_game(buf.as_slice(), LossSpec::square(), 2).unwrap();
            prop_assert_eq!(back, g);
        }
    }
}
