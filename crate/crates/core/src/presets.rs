//! Named environments shipped with the harness.

use crate::error::{PexError, Result};
use crate::model::{ConstraintSpec, EnvironmentSpec};

pub const PRESET_NAMES: [&str; 5] = [
    "setup1-hard",
    "setup1-easy",
    "setup2-hard",
    "setup2-easy",
    "imdb",
];

pub const IMDB_MEANS: [f64; 12] = [
    3.67, 2.97, 2.94, 3.52, 3.18, 2.02, 2.79, 2.96, 2.37, 2.53, 2.55, 2.54,
];

/// Arms treated as action movies in the IMDB preset.
pub const IMDB_ACTION: [usize; 2] = [0, 3];
pub const IMDB_DRAMA: [usize; 1] = [1];
pub const IMDB_FAMILY: [usize; 1] = [4];

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub environment: EnvironmentSpec,
    pub delta: f64,
}

/// `Σ_{a ∈ arms} π_a ≤ rhs`.
fn at_most(k: usize, arms: &[usize], rhs: f64) -> ConstraintSpec {
    let mut coeffs = vec![0.0; k];
    for &a in arms {
        coeffs[a] = 1.0;
    }
    ConstraintSpec { coeffs, rhs }
}

/// `Σ_{a ∈ arms} π_a ≥ rhs`, stored as its negation.
fn at_least(k: usize, arms: &[usize], rhs: f64) -> ConstraintSpec {
    let mut row = at_most(k, arms, -rhs);
    for c in &mut row.coeffs {
        *c = -*c;
    }
    row
}

fn env(means: Vec<f64>, constraints: Vec<ConstraintSpec>) -> EnvironmentSpec {
    EnvironmentSpec {
        means,
        sigma2: 1.0,
        constraints,
        cost_noise_sd: 0.1,
        reward_noise_sd: None,
    }
}

fn setup1(means: Vec<f64>) -> EnvironmentSpec {
    env(
        means,
        vec![at_most(7, &[0, 1, 2], 0.5), at_most(7, &[3, 4], 0.5)],
    )
}

fn setup2(means: Vec<f64>) -> EnvironmentSpec {
    env(
        means,
        vec![at_most(5, &[0, 1], 0.5), at_most(5, &[2, 3], 0.5)],
    )
}

pub fn preset(name: &str) -> Result<Preset> {
    let p = match name {
        "setup1-hard" => Preset {
            name: "setup1-hard",
            description: "7 arms, two group caps of 0.5, close third arm",
            environment: setup1(vec![1.5, 1.0, 0.5, 0.4, 0.3, 0.2, 0.1]),
            delta: 0.01,
        },
        "setup1-easy" => Preset {
            name: "setup1-easy",
            description: "7 arms, two group caps of 0.5, third arm at 1.3",
            environment: setup1(vec![1.5, 1.0, 1.3, 0.4, 0.3, 0.2, 0.1]),
            delta: 0.01,
        },
        "setup2-hard" => Preset {
            name: "setup2-hard",
            description: "5 arms, two pair caps of 0.5",
            environment: setup2(vec![1.0, 0.5, 0.4, 0.4, 0.5]),
            delta: 0.1,
        },
        "setup2-easy" => Preset {
            name: "setup2-easy",
            description: "5 arms, two pair caps of 0.5, strong fourth arm",
            environment: setup2(vec![1.0, 0.5, 0.4, 0.95, 0.8]),
            delta: 0.1,
        },
        "imdb" => Preset {
            name: "imdb",
            description: "12 movies, action at most 0.3, drama and family at least 0.3",
            environment: env(
                IMDB_MEANS.to_vec(),
                vec![
                    at_most(12, &IMDB_ACTION, 0.3),
                    at_least(12, &IMDB_DRAMA, 0.3),
                    at_least(12, &IMDB_FAMILY, 0.3),
                ],
            ),
            delta: 0.1,
        },
        _ => {
            return Err(PexError::UnknownPreset {
                name: name.to_string(),
                available: PRESET_NAMES.join(", "),
            })
        }
    };
    Ok(p)
}

pub fn all_presets() -> Vec<Preset> {
    PRESET_NAMES
        .iter()
        .map(|n| preset(n).expect("listed preset"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BanditInstance;

    #[test]
    fn table_constants() {
        let h = preset("setup1-hard").unwrap();
        assert_eq!(h.environment.means, [1.5, 1.0, 0.5, 0.4, 0.3, 0.2, 0.1]);
        assert_eq!(h.delta, 0.01);
        assert_eq!(h.environment.constraints[0].coeffs, [1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(h.environment.constraints[1].coeffs, [0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        assert!(h.environment.constraints.iter().all(|c| c.rhs == 0.5));

        let e = preset("setup1-easy").unwrap();
        assert_eq!(e.environment.means, [1.5, 1.0, 1.3, 0.4, 0.3, 0.2, 0.1]);
        assert_eq!(e.delta, 0.01);

        let h2 = preset("setup2-hard").unwrap();
        assert_eq!(h2.environment.means, [1.0, 0.5, 0.4, 0.4, 0.5]);
        assert_eq!(h2.environment.constraints[0].coeffs, [1.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(h2.environment.constraints[1].coeffs, [0.0, 0.0, 1.0, 1.0, 0.0]);
        assert_eq!(h2.delta, 0.1);
        let e2 = preset("setup2-easy").unwrap();
        assert_eq!(e2.environment.means, [1.0, 0.5, 0.4, 0.95, 0.8]);
        assert_eq!(e2.delta, 0.1);

        let imdb = preset("imdb").unwrap();
        assert_eq!(
            imdb.environment.means,
            [3.67, 2.97, 2.94, 3.52, 3.18, 2.02, 2.79, 2.96, 2.37, 2.53, 2.55, 2.54]
        );
        assert_eq!(imdb.delta, 0.1);
        assert_eq!(imdb.environment.constraints.len(), 3);
    }

    #[test]
    fn every_preset_builds() {
        for p in all_presets() {
            let inst = BanditInstance::build(&p.environment, 0.01, p.delta).unwrap();
            assert_eq!(inst.k(), p.environment.means.len(), "{}", p.name);
        }
    }

    #[test]
    fn imdb_optimum() {
        let p = preset("imdb").unwrap();
        let inst = BanditInstance::build(&p.environment, 0.01, p.delta).unwrap();
        let (i, value) = inst.feasible_set().argmax_linear(inst.means());
        let mut want = [0.0; 12];
        want[0] = 0.3;
        want[1] = 0.3;
        want[4] = 0.4;
        for (x, y) in inst.feasible_set().vertex(i).iter().zip(want) {
            assert!((x - y).abs() < 1e-9);
        }
        let direct: f64 = want.iter().zip(IMDB_MEANS).map(|(w, m)| w * m).sum();
        assert!((value - direct).abs() < 1e-9);
    }

    #[test]
    fn unknown_name_lists_presets() {
        let err = preset("setup3").unwrap_err().to_string();
        for n in PRESET_NAMES {
            assert!(err.contains(n), "{err}");
        }
    }
}
