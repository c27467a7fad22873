use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;

use super::config::WorkloadSpec;
use crate::mvstore::Value;
use crate::tx::Invocation;

/// One planned client submission.
#[derive(Clone, Debug, PartialEq)]
pub struct Planned {
    pub at_us: u64,
    pub client: usize,
    pub invocation: Invocation,
}

/// Ids for inserted rows start here so they never meet seeded rows.
const FRESH_ID_BASE: i64 = 1_000_000;

fn account(spec: &WorkloadSpec, rng: &mut ChaCha8Rng) -> i64 {
    if rng.gen_bool(spec.contention) {
        rng.gen_range(0..spec.hot_keys)
    } else if spec.hot_keys < spec.key_space {
        rng.gen_range(spec.hot_keys..spec.key_space)
    } else {
        rng.gen_range(0..spec.key_space)
    }
}

/// Poisson arrivals with contracts drawn from the mix.
pub fn plan(spec: &WorkloadSpec, rng: &mut ChaCha8Rng) -> Vec<Planned> {
    let names: Vec<&String> = spec.mix.keys().collect();
    let pick = WeightedIndex::new(spec.mix.values().copied()).expect("validated mix");
    let gap = Exp::new(spec.arrival_rate / 1e6).expect("positive rate");
    let mut t = 0.0f64;
    let mut out = Vec::with_capacity(spec.txs);
    for i in 0..spec.txs {
        t += gap.sample(rng);
        let name = names[pick.sample(rng)].as_str();
        let fresh = FRESH_ID_BASE + i as i64;
        let args = match name {
            "kv_add" => vec![Value::Int(account(spec, rng)), Value::Int(rng.gen_range(1..=10))],
            "transfer" => {
                let from = account(spec, rng);
                let mut to = account(spec, rng);
                while to == from {
                    to = rng.gen_range(0..spec.key_space);
                }
                vec![Value::Int(from), Value::Int(to), Value::Int(rng.gen_range(1..=5))]
            }
            "simple_insert" => vec![Value::Int(fresh), Value::from(format!("v{i}"))],
            "complex_join" | "complex_group" => {
                vec![Value::Int(rng.gen_range(0..crate::contracts::REGIONS)), Value::Int(fresh)]
            }
            other => unreachable!("validated contract {other}"),
        };
        out.push(Planned { at_us: t as u64, client: i % spec.clients, invocation: Invocation::new(name, args) });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn seeded_and_hot_fraction_roughly_right() {
        let spec = WorkloadSpec {
            txs: 4000,
            mix: [("kv_add".to_owned(), 1.0)].into_iter().collect(),
            ..WorkloadSpec::default()
        };
        let a = plan(&spec, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, plan(&spec, &mut ChaCha8Rng::seed_from_u64(5)));
        let hot = a.iter().filter(|p| p.invocation.args[0].as_int().unwrap() < spec.hot_keys).count();
        let frac = hot as f64 / a.len() as f64;
        assert!((frac - spec.contention).abs() < 0.05, "{frac}");
        assert!(a.windows(2).all(|w| w[0].at_us <= w[1].at_us));
        let span = a.last().unwrap().at_us as f64 / 1e6;
        assert!((a.len() as f64 / span - spec.arrival_rate).abs() / spec.arrival_rate < 0.1);
    }
}
