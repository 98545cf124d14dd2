use std::io::{Read, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::count::Conflicts;
use super::growth::{growth_rate, Growth};
use super::orbit::OrbitTable;
use crate::error::{Error, Result};
use crate::space::Net;
use crate::system::SystemSpec;

/// Fraction of the net a count may occupy before it stops tracking the
/// continuum count.
pub const DEFAULT_SATURATION: f64 = 0.25;

/// Default regression window: the last two resolved records, i.e. the
/// growth of the count at the largest `n` the net still resolves.
pub const DEFAULT_TAIL: usize = 2;

/// Relative gap between the two finest rates above which the ladder is
/// reported as not converged.
pub const PLATEAU_TOLERANCE: f64 = 0.10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateParams {
    /// Strictly decreasing radii.
    pub eps_ladder: Vec<f64>,
    pub n_max: usize,
    /// Regression window over the resolved records; `None` uses the last two.
    pub tail: Option<usize>,
    pub saturation: f64,
    /// Record wall time per count in the table. Off by default so tables
    /// are reproducible byte for byte.
    pub timings: bool,
}

impl EstimateParams {
    pub fn new(eps_ladder: Vec<f64>, n_max: usize) -> Self {
        EstimateParams {
            eps_ladder,
            n_max,
            tail: None,
            saturation: DEFAULT_SATURATION,
            timings: false,
        }
    }

    pub fn with_tail(mut self, tail: usize) -> Self {
        self.tail = Some(tail);
        self
    }

    fn validate(&self, net: &Net) -> Result<()> {
        if self.eps_ladder.is_empty() {
            return Err(Error::input("empty epsilon ladder"));
        }
        if self.eps_ladder.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(Error::input("ladder radii must lie in (0, 1]"));
        }
        if self.eps_ladder.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::input("epsilon ladder must be strictly decreasing"));
        }
        if self.n_max < 2 {
            return Err(Error::input("n_max must be at least 2"));
        }
        if !(self.saturation > 0.0 && self.saturation <= 1.0) {
            return Err(Error::input("saturation fraction must lie in (0, 1]"));
        }
        if let Some(t) = self.tail {
            if t < 2 || t > self.n_max {
                return Err(Error::input(format!("tail {t} outside [2, n_max]")));
            }
        }
        let finest = *self.eps_ladder.last().unwrap();
        if net.density > finest / 2.0 + 1e-12 {
            return Err(Error::input(format!(
                "net density {} exceeds half the finest radius {finest}",
                net.density
            )));
        }
        Ok(())
    }
}

/// One row of a count table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub system_id: String,
    pub i: i64,
    pub n: usize,
    #[serde(serialize_with = "ser_g", deserialize_with = "de_f64")]
    pub epsilon: f64,
    pub separated: u64,
    pub spanning_ub: u64,
    pub exact: bool,
    #[serde(serialize_with = "ser_g", deserialize_with = "de_f64")]
    pub delta: f64,
    #[serde(serialize_with = "ser_g", deserialize_with = "de_f64")]
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    pub records: Vec<CountRecord>,
}

impl CountTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        // The header is written even for an empty table.
        if self.records.is_empty() {
            w.write_record(CSV_COLUMNS).map_err(csv_err)?;
        }
        for r in &self.records {
            w.serialize(r).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::input(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
        if header != CSV_COLUMNS {
            return Err(Error::input(format!("unexpected columns {header:?}")));
        }
        let records = rd
            .deserialize()
            .collect::<std::result::Result<Vec<CountRecord>, _>>()
            .map_err(csv_err)?;
        Ok(CountTable { records })
    }

    /// `(n, separated)` pairs at one radius, in table order.
    pub fn series(&self, epsilon: f64) -> Vec<(usize, u64)> {
        self.records
            .iter()
            .filter(|r| r.epsilon == epsilon)
            .map(|r| (r.n, r.separated))
            .collect()
    }
}

pub const CSV_COLUMNS: [&str; 9] = [
    "system_id",
    "i",
    "n",
    "epsilon",
    "separated",
    "spanning_ub",
    "exact",
    "delta",
    "seconds",
];

fn csv_err(e: csv::Error) -> Error {
    Error::input(format!("csv: {e}"))
}

/// `%g`-style formatting with 12 significant digits.
pub fn format_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_owned()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

fn ser_g<S: serde::Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_g(*x))
}

fn de_f64<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let s = String::deserialize(d)?;
    s.trim().parse().map_err(serde::de::Error::custom)
}

/// Growth diagnostics at one radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRate {
    pub epsilon: f64,
    /// Number of leading records whose count stays below the saturation cap.
    pub resolved: usize,
    pub fit: Option<Growth>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub system_id: String,
    pub i: i64,
    pub net_size: usize,
    pub delta: f64,
    pub params: EstimateParams,
    pub rates: Vec<EpsilonRate>,
    pub estimate: f64,
    /// Radius whose rate is reported as the estimate.
    pub estimate_epsilon: f64,
    pub warnings: Vec<String>,
    pub seconds: f64,
    pub counts: CountTable,
}

/// Estimates the entropy of `sys` from index `i` on: greedy separated counts
/// for `n = 1..=n_max` at every ladder radius, a regression slope per radius,
/// and the slope at the finest radius that has one.
pub fn estimate_entropy(sys: &SystemSpec, i: i64, params: &EstimateParams, net: &Net) -> Result<EntropyReport> {
    params.validate(net)?;
    if net.space != sys.space {
        return Err(Error::SpaceMismatch("net and system live on different spaces".into()));
    }
    let start = Instant::now();
    let table = OrbitTable::build(sys, i, &net.points, params.n_max)?;
    let cap = if net.density == 0.0 {
        net.len() as f64
    } else {
        params.saturation * net.len() as f64
    };

    let mut counts = CountTable::default();
    let mut rates = Vec::new();
    for &eps in &params.eps_ladder {
        let mut conflicts: Option<Conflicts> = None;
        let mut series = Vec::with_capacity(params.n_max);
        for n in 1..=params.n_max {
            let t = Instant::now();
            match conflicts.as_mut() {
                None => conflicts = Some(Conflicts::initial(&table, eps)),
                Some(c) => c.advance(&table)?,
            }
            let c = conflicts.as_ref().unwrap();
            let separated = c.greedy_separated().len() as u64;
            let spanning = if c.edge_count() == 0 {
                net.len() as u64
            } else {
                c.greedy_spanning().len() as u64
            };
            series.push((n, separated));
            counts.records.push(CountRecord {
                system_id: sys.description.clone(),
                i,
                n,
                epsilon: eps,
                separated,
                spanning_ub: spanning.min(separated),
                exact: false,
                delta: net.density,
                seconds: if params.timings { t.elapsed().as_secs_f64() } else { 0.0 },
            });
        }
        let resolved = series.iter().take_while(|&&(_, c)| c as f64 <= cap).count();
        let fit = if resolved >= 2 {
            let tail = params.tail.unwrap_or(DEFAULT_TAIL).clamp(2, resolved);
            Some(growth_rate(&series[..resolved], tail)?)
        } else {
            None
        };
        rates.push(EpsilonRate {
            epsilon: eps,
            resolved,
            fit,
        });
    }

    let Some(best) = rates.iter().rev().find(|r| r.fit.is_some()) else {
        return Err(Error::input(
            "every ladder radius saturates the net before two steps; refine the net",
        ));
    };
    let estimate = best.fit.unwrap().rate;
    let estimate_epsilon = best.epsilon;
    let warnings = diagnose(&rates, &counts, params, net.len(), estimate);
    Ok(EntropyReport {
        system_id: sys.description.clone(),
        i,
        net_size: net.len(),
        delta: net.density,
        params: params.clone(),
        rates,
        estimate,
        estimate_epsilon,
        warnings,
        seconds: if params.timings {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        },
        counts,
    })
}

fn diagnose(
    rates: &[EpsilonRate],
    counts: &CountTable,
    params: &EstimateParams,
    net_size: usize,
    estimate: f64,
) -> Vec<String> {
    let mut out = Vec::new();
    let fitted: Vec<(f64, f64)> = rates
        .iter()
        .filter_map(|r| r.fit.map(|g| (r.epsilon, g.rate)))
        .collect();
    if let [.., (e0, r0), (e1, r1)] = fitted[..] {
        let scale = r0.abs().max(r1.abs());
        if scale > 1e-9 && (r1 - r0).abs() > PLATEAU_TOLERANCE * scale {
            out.push(format!(
                "plateau: rates {r0:.4} at eps {e0} and {r1:.4} at eps {e1} differ by more than 10%"
            ));
        }
    }
    for w in fitted.windows(2) {
        if w[1].1 < w[0].1 - 1e-9 {
            out.push(format!("rate decreases from eps {} to eps {}", w[0].0, w[1].0));
        }
    }
    for r in rates {
        if r.resolved < params.n_max {
            out.push(format!(
                "saturation: eps {} resolved only n <= {} of {}",
                r.epsilon, r.resolved, params.n_max
            ));
        }
        if r.fit.is_some_and(|g| g.rate < -1e-9) {
            out.push(format!("negative growth rate at eps {}", r.epsilon));
        }
    }
    for &eps in &params.eps_ladder {
        let s = counts.series(eps);
        if s.windows(2).any(|w| w[1].1 < w[0].1) {
            out.push(format!("counts not monotone in n at eps {eps}"));
        }
    }
    for w in params.eps_ladder.windows(2) {
        let (coarse, fine) = (counts.series(w[0]), counts.series(w[1]));
        if coarse.iter().zip(&fine).any(|(a, b)| b.1 < a.1) {
            out.push(format!("counts not monotone in eps between {} and {}", w[0], w[1]));
        }
    }
    if estimate > (net_size as f64).ln() {
        out.push("resolution: estimate exceeds log of the net size".into());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{uniform_net, SpaceModel};
    use crate::system::{constant_family, MapSpec};

    #[test]
    fn format_examples() {
        assert_eq!(format_g(0.1), "0.1");
        assert_eq!(format_g(0.0), "0");
        assert_eq!(format_g(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_g(2.5e-7), "2.5e-7");
        assert_eq!(format_g(123456.0), "123456");
        assert_eq!(format_g(0.00390625), "0.00390625");
        assert_eq!(format_g(-1.5), "-1.5");
    }

    #[test]
    fn identity_estimate_is_zero() {
        let sys = constant_family(MapSpec::Identity, &SpaceModel::Circle).unwrap();
        let net = uniform_net(&SpaceModel::Circle, 100).unwrap();
        let rep = estimate_entropy(&sys, 0, &EstimateParams::new(vec![0.1, 0.05], 6), &net).unwrap();
        assert_eq!(rep.estimate, 0.0);
        assert_eq!(rep.counts.records.len(), 12);
        assert!(rep.counts.records.iter().all(|r| r.spanning_ub <= r.separated));
    }

    #[test]
    fn rejects_bad_ladders() {
        let sys = constant_family(MapSpec::Identity, &SpaceModel::Circle).unwrap();
        let net = uniform_net(&SpaceModel::Circle, 100).unwrap();
        for ladder in [vec![], vec![0.05, 0.1], vec![0.1, 0.1], vec![0.01]] {
            assert!(estimate_entropy(&sys, 0, &EstimateParams::new(ladder, 4), &net).is_err());
        }
    }

    #[test]
    fn csv_round_trip() {
        let sys = constant_family(MapSpec::cat(), &SpaceModel::Torus2).unwrap();
        let net = uniform_net(&SpaceModel::Torus2, 20).unwrap();
        let rep = estimate_entropy(&sys, 0, &EstimateParams::new(vec![0.2], 3), &net).unwrap();
        let mut buf = Vec::new();
        rep.counts.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("system_id,i,n,epsilon,separated,spanning_ub,exact,delta,seconds\n"));
        assert_eq!(CountTable::read_csv(&buf[..]).unwrap(), rep.counts);
    }
}
