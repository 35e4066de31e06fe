//! Per-round records and their CSV form.
//!
//! One CSV row per `(t, player)`. Vector columns are padded to the widest
//! player with empty cells. Floats are written in Rust's shortest
//! round-trip form, so reading a log back reproduces it bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A perturbation direction `±e_coord`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Direction {
    pub coord: usize,
    pub positive: bool,
}

impl Direction {
    /// Signed 1-based index: `+e_j ↦ j + 1`, `−e_j ↦ −(j + 1)`.
    pub fn signed_index(&self) -> i64 {
        let k = self.coord as i64 + 1;
        if self.positive {
            k
        } else {
            -k
        }
    }

    pub fn from_signed_index(k: i64) -> Option<Self> {
        (k != 0).then(|| Self {
            coord: (k.unsigned_abs() - 1) as usize,
            positive: k > 0,
        })
    }

    pub fn sign(&self) -> f64 {
        if self.positive {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditRound {
    pub directions: Vec<Direction>,
    pub deltas: Vec<f64>,
    /// Query actions `x̂_t` actually played.
    pub played: Vec<Vec<f64>>,
}

/// Everything observed in one round `t`, before the update to `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: u64,
    /// Base iterates `x_t`.
    pub actions: Vec<Vec<f64>>,
    pub duals: Vec<Vec<f64>>,
    pub mixed_duals: Vec<Vec<f64>>,
    /// Cost value at the played profile.
    pub costs: Vec<f64>,
    /// Local constraint value at the played action.
    pub constraints: Vec<Vec<f64>>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub bandit: Option<BanditRound>,
}

impl RoundRecord {
    /// The profile the costs were evaluated at.
    pub fn played(&self) -> &[Vec<f64>] {
        match &self.bandit {
            Some(b) => &b.played,
            None => &self.actions,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub dims: Vec<usize>,
    pub m: usize,
    pub rounds: Vec<RoundRecord>,
}

fn fmt_f(v: f64) -> String {
    format!("{v}")
}

impl TrajectoryLog {
    pub fn new(dims: Vec<usize>, m: usize) -> Self {
        Self {
            dims,
            m,
            rounds: Vec::new(),
        }
    }

    pub fn n_players(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn is_bandit(&self) -> bool {
        self.rounds.first().is_some_and(|r| r.bandit.is_some())
    }

    fn width(&self) -> usize {
        self.dims.iter().copied().max().unwrap_or(0)
    }

    fn header(&self) -> Vec<String> {
        let n = self.width();
        let mut h = vec!["t".to_string(), "player".to_string()];
        h.extend((0..n).map(|j| format!("x_{j}")));
        h.extend((0..self.m).map(|k| format!("lambda_{k}")));
        h.extend((0..self.m).map(|k| format!("lambda_mixed_{k}")));
        h.push("cost".into());
        h.extend((0..self.m).map(|k| format!("constraint_{k}")));
        h.extend(["alpha", "beta", "gamma"].map(String::from));
        if self.is_bandit() {
            h.extend(["direction", "delta"].map(String::from));
            h.extend((0..n).map(|j| format!("x_hat_{j}")));
        }
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let width = self.width();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        let padded = |v: &[f64]| -> Vec<String> {
            let mut cells: Vec<String> = v.iter().map(|a| fmt_f(*a)).collect();
            cells.resize(width, String::new());
            cells
        };
        for r in &self.rounds {
            for i in 0..self.n_players() {
                let mut row = vec![r.t.to_string(), i.to_string()];
                row.extend(padded(&r.actions[i]));
                row.extend(r.duals[i].iter().map(|a| fmt_f(*a)));
                row.extend(r.mixed_duals[i].iter().map(|a| fmt_f(*a)));
                row.push(fmt_f(r.costs[i]));
                row.extend(r.constraints[i].iter().map(|a| fmt_f(*a)));
                row.extend([r.alpha, r.beta, r.gamma].map(fmt_f));
                if let Some(b) = &r.bandit {
                    row.push(b.directions[i].signed_index().to_string());
                    row.push(fmt_f(b.deltas[i]));
                    row.extend(padded(&b.played[i]));
                }
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(buf)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file).map_err(|e| match e {
            Error::CorruptRun { reason, .. } => Error::CorruptRun {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let corrupt = |reason: String| Error::CorruptRun {
            path: Default::default(),
            reason,
        };
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
        let count = |prefix: &str| {
            header
                .iter()
                .filter(|h| h.strip_prefix(prefix).is_some_and(|rest| rest.parse::<usize>().is_ok()))
                .count()
        };
        let width = count("x_");
        let m = count("lambda_");
        let bandit = header.iter().any(|h| h == "direction");
        let expected = 2 + width + 3 * m + 4 + if bandit { 2 + width } else { 0 };
        if header.len() != expected || header.first().map(String::as_str) != Some("t") {
            return Err(corrupt(format!("unexpected header layout ({} columns)", header.len())));
        }

        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| corrupt(format!("cannot parse {what} value {s:?}")))
        };
        let mut rows: Vec<(u64, usize, Vec<String>)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let cells: Vec<String> = rec.iter().map(String::from).collect();
            let t = cells[0].parse().map_err(|_| corrupt(format!("bad round index {:?}", cells[0])))?;
            let i = cells[1].parse().map_err(|_| corrupt(format!("bad player index {:?}", cells[1])))?;
            rows.push((t, i, cells));
        }
        let n = rows.iter().take_while(|(t, _, _)| *t == rows[0].0).count();
        if n == 0 || !rows.len().is_multiple_of(n) {
            return Err(corrupt("rows do not form complete rounds".into()));
        }
        let vector = |cells: &[String], what: &str| -> Result<Vec<f64>> {
            cells
                .iter()
                .take_while(|c| !c.is_empty())
                .map(|c| num(c, what))
                .collect()
        };

        let mut dims = Vec::new();
        let mut rounds = Vec::new();
        for (r, chunk) in rows.chunks(n).enumerate() {
            let t = chunk[0].0;
            if t != r as u64 + 1 {
                return Err(corrupt(format!("round {t} out of sequence at position {}", r + 1)));
            }
            let mut rec = RoundRecord {
                t,
                actions: vec![],
                duals: vec![],
                mixed_duals: vec![],
                costs: vec![],
                constraints: vec![],
                alpha: 0.0,
                beta: 0.0,
                gamma: 0.0,
                bandit: bandit.then(|| BanditRound {
                    directions: vec![],
                    deltas: vec![],
                    played: vec![],
                }),
            };
            for (i, (ti, pi, cells)) in chunk.iter().enumerate() {
                if *ti != t || *pi != i {
                    return Err(corrupt(format!("round {t}: expected player {i}, found {pi}")));
                }
                let mut c = 2;
                let x = vector(&cells[c..c + width], "action")?;
                c += width;
                let lam = vector(&cells[c..c + m], "dual")?;
                c += m;
                let mix = vector(&cells[c..c + m], "mixed dual")?;
                c += m;
                let cost = num(&cells[c], "cost")?;
                c += 1;
                let cons = vector(&cells[c..c + m], "constraint")?;
                c += m;
                let (a, b, g) = (num(&cells[c], "alpha")?, num(&cells[c + 1], "beta")?, num(&cells[c + 2], "gamma")?);
                c += 3;
                if r == 0 {
                    dims.push(x.len());
                }
                if x.len() != dims[i] || lam.len() != m || mix.len() != m || cons.len() != m {
                    return Err(corrupt(format!("round {t}, player {i}: missing cells")));
                }
                if i == 0 {
                    (rec.alpha, rec.beta, rec.gamma) = (a, b, g);
                }
                if let Some(br) = rec.bandit.as_mut() {
                    let k: i64 = cells[c].parse().map_err(|_| corrupt(format!("bad direction {:?}", cells[c])))?;
                    let dir = Direction::from_signed_index(k)
                        .filter(|d| d.coord < dims[i])
                        .ok_or_else(|| corrupt(format!("direction {k} out of range")))?;
                    br.directions.push(dir);
                    br.deltas.push(num(&cells[c + 1], "delta")?);
                    let played = vector(&cells[c + 2..c + 2 + width], "query action")?;
                    if played.len() != dims[i] {
                        return Err(corrupt(format!("round {t}, player {i}: missing query cells")));
                    }
                    br.played.push(played);
                }
                rec.actions.push(x);
                rec.duals.push(lam);
                rec.mixed_duals.push(mix);
                rec.costs.push(cost);
                rec.constraints.push(cons);
            }
            rounds.push(rec);
        }
        Ok(Self { dims, m, rounds })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(bandit: bool) -> TrajectoryLog {
        let mut log = TrajectoryLog::new(vec![2, 1], 1);
        for t in 1..=3u64 {
            let tf = t as f64;
            log.rounds.push(RoundRecord {
                t,
                actions: vec![vec![0.1 * tf, 1.0 / 3.0], vec![tf.sqrt()]],
                duals: vec![vec![0.0], vec![1e-300 * tf]],
                mixed_duals: vec![vec![std::f64::consts::PI], vec![0.5]],
                costs: vec![-tf / 7.0, 1e17],
                constraints: vec![vec![-2.0], vec![tf.ln()]],
                alpha: tf.powf(-0.8),
                beta: tf.powf(-0.3),
                gamma: tf.powf(-0.7),
                bandit: bandit.then(|| BanditRound {
                    directions: vec![
                        Direction { coord: 1, positive: false },
                        Direction { coord: 0, positive: true },
                    ],
                    deltas: vec![0.3 / tf, 0.2],
                    played: vec![vec![0.2, 0.25], vec![tf * 1.1]],
                }),
            });
        }
        log
    }

    #[test]
    fn csv_round_trip_is_exact() {
        for bandit in [false, true] {
            let log = sample(bandit);
            let bytes = log.to_csv_bytes().unwrap();
            let back = TrajectoryLog::read_csv(&bytes[..]).unwrap();
            assert_eq!(back, log);
            assert_eq!(back.to_csv_bytes().unwrap(), bytes);
        }
    }

    #[test]
    fn header_names_columns() {
        let bytes = sample(true).to_csv_bytes().unwrap();
        let first = String::from_utf8(bytes).unwrap().lines().next().unwrap().to_string();
        assert_eq!(
            first,
            "t,player,x_0,x_1,lambda_0,lambda_mixed_0,cost,constraint_0,alpha,beta,gamma,direction,delta,x_hat_0,x_hat_1"
        );
    }

    #[test]
    fn corrupt_logs_are_rejected() {
        let text = String::from_utf8(sample(false).to_csv_bytes().unwrap()).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.remove(3);
        assert!(TrajectoryLog::read_csv(lines.join("\n").as_bytes()).is_err());
        let garbled = text.replacen("0.1,", "zero,", 1);
        assert!(TrajectoryLog::read_csv(garbled.as_bytes()).is_err());
    }

    #[test]
    fn signed_direction_index() {
        for k in [-3i64, -1, 1, 4] {
            assert_eq!(Direction::from_signed_index(k).unwrap().signed_index(), k);
        }
        assert!(Direction::from_signed_index(0).is_none());
    }
}
