use rand::Rng;

use super::{Population, Selector};
use crate::error::{Error, Result};
use crate::laws::PointProcessLaw;

/// `mu <= nu` in the order `mu([x, inf)) <= nu([x, inf))` for all `x`:
/// `mu` has at most as many atoms, and its `k`-th largest atom never
/// exceeds the `k`-th largest atom of `nu`.
pub fn measure_leq(mu: &[f64], nu: &[f64]) -> bool {
    if mu.len() > nu.len() {
        return false;
    }
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    let (a, b) = (sorted(mu), sorted(nu));
    a.iter().zip(&b).all(|(x, y)| x <= y)
}

/// One step of an `M`-BRW and an `N`-BRW (`M <= N`) driven by shared draws:
/// the `i`-th ranked parent of each population reproduces with the same
/// point-process realization.
pub fn coupled_step<R: Rng + ?Sized>(
    pop_m: &Population,
    pop_n: &Population,
    law: &PointProcessLaw,
    rng: &mut R,
) -> Result<(Population, Population)> {
    if pop_m.len() > pop_n.len() || !measure_leq(pop_m.positions(), pop_n.positions()) {
        return Err(Error::PreconditionOrder);
    }
    let mut draws = Vec::new();
    let mut ends = Vec::with_capacity(pop_n.len());
    let mut pts = Vec::new();
    for _ in 0..pop_n.len() {
        law.sample_into(rng, &mut pts);
        draws.extend_from_slice(&pts);
        ends.push(draws.len());
    }
    let advance = |pop: &Population| {
        let mut sel = Selector::new(pop.len());
        let mut start = 0;
        for (&x, &end) in pop.positions().iter().zip(&ends) {
            for &l in &draws[start..end] {
                sel.push(x + l);
            }
            start = end;
        }
        let mut positions = Vec::new();
        assert!(sel.finish_into(&mut positions));
        Population { positions, generation: pop.generation + 1 }
    };
    Ok((advance(pop_m), advance(pop_n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seeder;

    #[test]
    fn order_examples() {
        assert!(measure_leq(&[0.0], &[1.0]));
        assert!(!measure_leq(&[0.0, 0.0], &[1.0]));
        assert!(measure_leq(&[2.0, 0.0], &[2.0, 1.0]));
        assert!(measure_leq(&[0.0, 2.0], &[1.0, 2.0]));
        assert!(!measure_leq(&[3.0], &[2.0, 2.0]));
    }

    #[test]
    fn identical_inputs_give_identical_outputs() {
        let law = PointProcessLaw::canonical();
        let p = Population::new(vec![0.3, -0.1, -0.4]).unwrap();
        let (a, b) = coupled_step(&p, &p, &law, &mut Seeder::new(1).stream(0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unordered_inputs_are_rejected() {
        let law = PointProcessLaw::canonical();
        let mut rng = Seeder::new(1).stream(0);
        let hi = Population::new(vec![1.0]).unwrap();
        let lo = Population::new(vec![0.0, 0.0]).unwrap();
        assert_eq!(coupled_step(&hi, &lo, &law, &mut rng), Err(Error::PreconditionOrder));
        assert_eq!(coupled_step(&lo, &hi, &law, &mut rng), Err(Error::PreconditionOrder));
    }

    #[test]
    fn one_versus_two_stays_ordered() {
        let seeder = Seeder::new(4);
        for (_, law) in PointProcessLaw::shipped() {
            for trial in 0..2_000 {
                let mut rng = seeder.stream(trial);
                let (a, b) = coupled_step(
                    &Population::new(vec![0.0]).unwrap(),
                    &Population::new(vec![1.0, 0.0]).unwrap(),
                    &law,
                    &mut rng,
                )
                .unwrap();
                assert!(measure_leq(a.positions(), b.positions()));
            }
        }
    }
}
