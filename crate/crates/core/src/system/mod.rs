//! Non-autonomous systems: integer-indexed families of maps and the
//! operations that build new systems out of old ones.

mod map;

pub use map::{MapSpec, CAT_MATRIX};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::space::{SpaceModel, SpacePoint};

/// Index sequence `(n_i)` of a gathering.
#[derive(Clone, Debug, PartialEq)]
pub enum GatherSeq {
    /// `n_i = stride · i`.
    Uniform(u64),
    /// `n_0 < n_1 < … < n_L` given explicitly; indices outside the list are
    /// extended with the first and last gap.
    Explicit(Vec<i64>),
}

impl GatherSeq {
    fn start(&self, i: i64) -> i64 {
        match self {
            GatherSeq::Uniform(n) => *n as i64 * i,
            GatherSeq::Explicit(anchors) => {
                let last = anchors.len() as i64 - 1;
                if i < 0 {
                    anchors[0] + i * (anchors[1] - anchors[0])
                } else if i > last {
                    anchors[last as usize] + (i - last) * (anchors[last as usize] - anchors[last as usize - 1])
                } else {
                    anchors[i as usize]
                }
            }
        }
    }
}

/// The rule `i ↦ f_i` of a system, kept symbolic so systems stay cheap to
/// clone and compare. Evaluation is pure; callers that need a window of maps
/// evaluate it once through [`SystemSpec::maps`].
#[derive(Clone, Debug, PartialEq)]
pub enum Rule {
    Constant(MapSpec),
    /// `inner` on `|i| ≤ k`, `outer` elsewhere.
    Splice {
        inner: Box<Rule>,
        outer: Box<Rule>,
        k: u64,
    },
    /// `before` for `i < at`, `after` for `i ≥ at`.
    Switch {
        before: Box<Rule>,
        after: Box<Rule>,
        at: i64,
    },
    Gathering {
        base: Box<Rule>,
        seq: GatherSeq,
    },
    /// Each map post-composed with a seeded bump of amplitude at most `amplitude`.
    Perturbed {
        base: Box<Rule>,
        amplitude: f64,
        seed: u64,
    },
    /// `h_{i+1} ∘ base_i ∘ h_i⁻¹`.
    Conjugated {
        base: Box<Rule>,
        h: Box<Rule>,
    },
    /// `i ↦ base_{−i−1}⁻¹`.
    Reversed {
        base: Box<Rule>,
    },
}

impl Rule {
    /// Evaluates the map at index `i`.
    pub fn at(&self, i: i64) -> MapSpec {
        match self {
            Rule::Constant(m) => m.clone(),
            Rule::Splice { inner, outer, k } => {
                if i.unsigned_abs() <= *k {
                    inner.at(i)
                } else {
                    outer.at(i)
                }
            }
            Rule::Switch { before, after, at } => {
                if i < *at {
                    before.at(i)
                } else {
                    after.at(i)
                }
            }
            Rule::Gathering { base, seq } => {
                let (lo, hi) = (seq.start(i), seq.start(i + 1));
                let maps: Vec<MapSpec> = (lo..hi).map(|j| base.at(j)).collect();
                if maps.len() == 1 {
                    maps.into_iter().next().unwrap()
                } else {
                    MapSpec::Composite(maps)
                }
            }
            Rule::Perturbed { base, amplitude, seed } => {
                let (a, phase) = bump_parameters(*seed, i, *amplitude);
                MapSpec::CircleBump {
                    base: Box::new(base.at(i)),
                    amplitude: a,
                    phase,
                }
            }
            Rule::Conjugated { base, h } => MapSpec::Composite(vec![h.at(i).inverse(), base.at(i), h.at(i + 1)]),
            Rule::Reversed { base } => base.at(-i - 1).inverse(),
        }
    }
}

/// Deterministic bump parameters for index `i`: amplitude in
/// `[−amplitude, amplitude]`, phase in `[0, 1)`.
pub fn bump_parameters(seed: u64, i: i64, amplitude: f64) -> (f64, f64) {
    let mixed = seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    let mut rng = ChaCha8Rng::seed_from_u64(mixed);
    let u: f64 = rng.gen();
    let phase: f64 = rng.gen();
    let a = if amplitude == 0.0 {
        0.0
    } else {
        amplitude * (2.0 * u - 1.0)
    };
    (a, phase)
}

/// A non-autonomous dynamical system `f = (f_i)` on a fixed space.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    pub rule: Rule,
    pub space: SpaceModel,
    pub description: String,
}

impl SystemSpec {
    pub fn new(rule: Rule, space: SpaceModel, description: impl Into<String>) -> Self {
        SystemSpec {
            rule,
            space,
            description: description.into(),
        }
    }

    pub fn map_at(&self, i: i64) -> MapSpec {
        self.rule.at(i)
    }

    /// The validated maps `f_i, …, f_{i+count−1}`.
    pub fn maps(&self, i: i64, count: usize) -> Result<Vec<MapSpec>> {
        (0..count as i64)
            .map(|k| {
                let m = self.rule.at(i + k);
                m.validate_for(&self.space)?;
                Ok(m)
            })
            .collect()
    }

    /// `[f_i^0(p), …, f_i^{n−1}(p)]`.
    pub fn orbit_segment(&self, i: i64, p: SpacePoint, n: usize) -> Result<Vec<SpacePoint>> {
        if n == 0 {
            return Err(Error::input("orbit length must be at least 1"));
        }
        self.space.check_point(&p)?;
        let maps = self.maps(i, n - 1)?;
        let mut out = Vec::with_capacity(n);
        out.push(p);
        let mut cur = p;
        for m in &maps {
            cur = m.apply(cur)?;
            check_finite(&cur)?;
            out.push(cur);
        }
        Ok(out)
    }

    /// `[f_i^0(p), f_i^{−1}(p), …, f_i^{−(n−1)}(p)]`, where
    /// `f_i^{−k} = f_{i−k}^{−1} ∘ … ∘ f_{i−1}^{−1}`.
    pub fn orbit_segment_back(&self, i: i64, p: SpacePoint, n: usize) -> Result<Vec<SpacePoint>> {
        if n == 0 {
            return Err(Error::input("orbit length must be at least 1"));
        }
        self.space.check_point(&p)?;
        let mut out = Vec::with_capacity(n);
        out.push(p);
        let mut cur = p;
        for k in 1..n as i64 {
            let m = self.rule.at(i - k);
            m.validate_for(&self.space)?;
            cur = m.apply_inverse(cur)?;
            check_finite(&cur)?;
            out.push(cur);
        }
        Ok(out)
    }

    /// `f_i^n(p)` for `n ≥ 0`.
    pub fn compose(&self, i: i64, p: SpacePoint, n: usize) -> Result<SpacePoint> {
        let mut cur = p;
        for m in self.maps(i, n)? {
            cur = m.apply(cur)?;
        }
        check_finite(&cur)?;
        Ok(cur)
    }

    /// `(f_i^n)^{−1}(p)`: applies `f_{i+n−1}^{−1}` first and `f_i^{−1}` last.
    pub fn compose_inverse(&self, i: i64, p: SpacePoint, n: usize) -> Result<SpacePoint> {
        let mut cur = p;
        for m in self.maps(i, n)?.iter().rev() {
            cur = m.apply_inverse(cur)?;
        }
        check_finite(&cur)?;
        Ok(cur)
    }

    fn require_same_space(&self, other: &SystemSpec) -> Result<()> {
        if self.space == other.space {
            Ok(())
        } else {
            Err(Error::SpaceMismatch(format!(
                "{} system cannot be combined with {} system",
                self.space.name(),
                other.space.name()
            )))
        }
    }
}

pub(crate) fn check_finite(p: &SpacePoint) -> Result<()> {
    if p.is_finite_number() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("orbit left the space: {p}")))
    }
}

/// The constant family `f_i = map` for every `i`.
pub fn constant_family(map: MapSpec, space: &SpaceModel) -> Result<SystemSpec> {
    map.validate_for(space)?;
    Ok(SystemSpec::new(Rule::Constant(map), space.clone(), "constant"))
}

/// The inverse system re-registered as a forward system:
/// `g_j = f_{−j−1}^{−1}`, so that `g_0^n = f_{−n}^{−1} ∘ … ∘ f_{−1}^{−1}`.
pub fn inverse_system(sys: &SystemSpec) -> SystemSpec {
    let rule = match &sys.rule {
        Rule::Reversed { base } => (**base).clone(),
        other => Rule::Reversed {
            base: Box::new(other.clone()),
        },
    };
    SystemSpec::new(rule, sys.space.clone(), format!("inverse({})", sys.description))
}

/// Uniform gathering: `g_i = f_{n(i+1)−1} ∘ … ∘ f_{ni}`.
pub fn gathering(sys: &SystemSpec, n: u64) -> Result<SystemSpec> {
    if n == 0 {
        return Err(Error::input("gathering stride must be at least 1"));
    }
    if n == 1 {
        return Ok(sys.clone());
    }
    Ok(SystemSpec::new(
        Rule::Gathering {
            base: Box::new(sys.rule.clone()),
            seq: GatherSeq::Uniform(n),
        },
        sys.space.clone(),
        format!("gather{n}({})", sys.description),
    ))
}

/// Gathering along an explicit strictly increasing index list.
pub fn gathering_at(sys: &SystemSpec, anchors: Vec<i64>) -> Result<SystemSpec> {
    if anchors.len() < 2 || anchors.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::input(
            "gathering anchors must be strictly increasing with at least two entries",
        ));
    }
    Ok(SystemSpec::new(
        Rule::Gathering {
            base: Box::new(sys.rule.clone()),
            seq: GatherSeq::Explicit(anchors),
        },
        sys.space.clone(),
        format!("gather({})", sys.description),
    ))
}

/// `f` on the window `|i| ≤ k`, `g` elsewhere.
pub fn splice(f: &SystemSpec, g: &SystemSpec, k: u64) -> Result<SystemSpec> {
    f.require_same_space(g)?;
    Ok(SystemSpec::new(
        Rule::Splice {
            inner: Box::new(f.rule.clone()),
            outer: Box::new(g.rule.clone()),
            k,
        },
        f.space.clone(),
        format!("splice({},{},{k})", f.description, g.description),
    ))
}

/// `before` on indices `< at`, `after` on indices `≥ at`.
pub fn switch(before: &SystemSpec, after: &SystemSpec, at: i64) -> Result<SystemSpec> {
    before.require_same_space(after)?;
    Ok(SystemSpec::new(
        Rule::Switch {
            before: Box::new(before.rule.clone()),
            after: Box::new(after.rule.clone()),
            at,
        },
        before.space.clone(),
        format!("switch({},{},{at})", before.description, after.description),
    ))
}

/// The identity up to index `i` and `sys` from `i + 1` on.
pub fn padded(sys: &SystemSpec, i: i64) -> SystemSpec {
    SystemSpec::new(
        Rule::Switch {
            before: Box::new(Rule::Constant(MapSpec::Identity)),
            after: Box::new(sys.rule.clone()),
            at: i + 1,
        },
        sys.space.clone(),
        format!("padded({},{i})", sys.description),
    )
}

/// Post-composes every map with a seeded bump; the C⁰ distance to the
/// original map is at most `amplitude/2π` and derivatives change by a factor
/// in `[1 − amplitude, 1 + amplitude]`.
pub fn perturb(sys: &SystemSpec, amplitude: f64, seed: u64) -> Result<SystemSpec> {
    if !(0.0..1.0).contains(&amplitude) {
        return Err(Error::input(format!(
            "perturbation amplitude {amplitude} outside [0, 1)"
        )));
    }
    if matches!(sys.space, SpaceModel::Finite(_)) {
        return Err(Error::SpaceMismatch(
            "perturbations need a circle or torus model".into(),
        ));
    }
    Ok(SystemSpec::new(
        Rule::Perturbed {
            base: Box::new(sys.rule.clone()),
            amplitude,
            seed,
        },
        sys.space.clone(),
        format!("perturb({},{amplitude},{seed})", sys.description),
    ))
}

/// Conjugates `sys` by `h`: `g_i = h_{i+1} ∘ f_i ∘ h_i^{−1}`.
pub fn conjugate_system(sys: &SystemSpec, h: &crate::conjugacy::ConjugacyFamily) -> Result<SystemSpec> {
    if h.space != sys.space {
        return Err(Error::SpaceMismatch("conjugacy acts on a different space".into()));
    }
    Ok(SystemSpec::new(
        Rule::Conjugated {
            base: Box::new(sys.rule.clone()),
            h: Box::new(h.rule.clone()),
        },
        sys.space.clone(),
        format!("conj({})", sys.description),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(x: f64) -> SpacePoint {
        SpacePoint::Circle(x)
    }

    fn rot(a: f64) -> SystemSpec {
        constant_family(MapSpec::Rotation(a), &SpaceModel::Circle).unwrap()
    }

    fn cat() -> SystemSpec {
        constant_family(MapSpec::cat(), &SpaceModel::Torus2).unwrap()
    }

    #[test]
    fn rotation_orbit() {
        let orbit = rot(0.25).orbit_segment(0, circle(0.0), 4).unwrap();
        assert_eq!(orbit, vec![circle(0.0), circle(0.25), circle(0.5), circle(0.75)]);
    }

    #[test]
    fn length_one_orbit_is_the_point() {
        let p = SpacePoint::Torus([0.3, 0.6]);
        assert_eq!(cat().orbit_segment(17, p, 1).unwrap(), vec![p]);
        assert!(cat().orbit_segment(0, p, 0).is_err());
    }

    #[test]
    fn cat_orbit_matches_matrix_iteration() {
        // Direct iteration of [[2,1],[1,1]] on integer numerators over 100.
        let mut v = [1i64, 0];
        let mut expect = Vec::new();
        for _ in 0..3 {
            expect.push(SpacePoint::Torus([v[0] as f64 / 100.0, v[1] as f64 / 100.0]));
            v = [(2 * v[0] + v[1]) % 100, (v[0] + v[1]) % 100];
        }
        let orbit = cat().orbit_segment(0, SpacePoint::Torus([0.01, 0.0]), 3).unwrap();
        for (a, b) in orbit.iter().zip(&expect) {
            assert!(SpaceModel::Torus2.dist(a, b).unwrap() < 1e-15);
        }
    }

    #[test]
    fn constant_family_is_constant() {
        let sys = rot(0.3);
        assert_eq!(sys.map_at(-5), sys.map_at(7));
        let id = constant_family(MapSpec::Identity, &SpaceModel::Circle).unwrap();
        let orbit = id.orbit_segment(0, circle(0.42), 10).unwrap();
        assert!(orbit.iter().all(|p| *p == circle(0.42)));
    }

    #[test]
    fn inverse_of_rotation_family() {
        let inv = inverse_system(&rot(0.3));
        let neg = rot(-0.3);
        for k in 0..20 {
            let p = circle(k as f64 / 20.0);
            let a = inv.orbit_segment(2, p, 5).unwrap();
            let b = neg.orbit_segment(2, p, 5).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!(SpaceModel::Circle.dist(x, y).unwrap() < 1e-12);
            }
        }
        assert_eq!(inverse_system(&inverse_system(&cat())).rule, cat().rule);
    }

    #[test]
    fn inverse_system_reproduces_backward_compositions() {
        let f = perturb(&cat(), 0.05, 3).unwrap();
        let g = inverse_system(&f);
        let p = SpacePoint::Torus([0.21, 0.77]);
        for n in 1..5 {
            let forward = g.compose(0, p, n).unwrap();
            let back = f.orbit_segment_back(0, p, n + 1).unwrap()[n];
            assert!(SpaceModel::Torus2.dist(&forward, &back).unwrap() < 1e-10);
        }
    }

    #[test]
    fn gathering_composes_blocks() {
        let g = gathering(&rot(0.1), 2).unwrap();
        let p = g.compose(0, circle(0.0), 1).unwrap();
        assert!(SpaceModel::Circle.dist(&p, &circle(0.2)).unwrap() < 1e-15);
        assert_eq!(gathering(&cat(), 1).unwrap(), cat());
        assert!(gathering(&cat(), 0).is_err());
    }

    #[test]
    fn explicit_gathering_extends_gaps() {
        let g = gathering_at(&rot(0.01), vec![0, 1, 3]).unwrap();
        let Rule::Gathering { seq, .. } = &g.rule else {
            unreachable!()
        };
        assert_eq!(
            (-2..=4).map(|i| seq.start(i)).collect::<Vec<_>>(),
            vec![-2, -1, 0, 1, 3, 5, 7]
        );
        assert!(gathering_at(&rot(0.01), vec![0, 0]).is_err());
    }

    #[test]
    fn splice_rule_identity() {
        let s = splice(&rot(0.1), &rot(0.2), 3).unwrap();
        assert_eq!(s.map_at(0), MapSpec::Rotation(0.1));
        assert_eq!(s.map_at(-3), MapSpec::Rotation(0.1));
        assert_eq!(s.map_at(4), MapSpec::Rotation(0.2));
        assert_eq!(s.map_at(-4), MapSpec::Rotation(0.2));
        assert!(splice(&rot(0.1), &cat(), 3).is_err());
    }

    #[test]
    fn zero_perturbation_is_pointwise_identical() {
        let base = rot(0.37);
        let p = perturb(&base, 0.0, 9).unwrap();
        for k in 0..50 {
            let x = circle(k as f64 / 50.0);
            assert_eq!(
                p.orbit_segment(-3, x, 6).unwrap(),
                base.orbit_segment(-3, x, 6).unwrap()
            );
        }
        assert!(perturb(&base, 1.0, 0).is_err());
    }

    #[test]
    fn perturbation_is_deterministic() {
        let a = perturb(&rot(0.2), 0.3, 42).unwrap();
        let b = perturb(&rot(0.2), 0.3, 42).unwrap();
        for i in -10..10 {
            assert_eq!(a.map_at(i), b.map_at(i));
        }
        assert_ne!(a.map_at(1), perturb(&rot(0.2), 0.3, 43).unwrap().map_at(1));
    }
}
