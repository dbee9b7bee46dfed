use std::f64::consts::PI;

use rand::Rng;

use crate::instance::Instance;

/// The eight symmetries of the unit square, identity first.
pub fn dihedral(k: usize, [x, y]: [f64; 2]) -> [f64; 2] {
    match k % 8 {
        0 => [x, y],
        1 => [y, x],
        2 => [1.0 - x, y],
        3 => [x, 1.0 - y],
        4 => [1.0 - x, 1.0 - y],
        5 => [y, 1.0 - x],
        6 => [1.0 - y, x],
        _ => [1.0 - y, 1.0 - x],
    }
}

/// `a` instance views with pairwise distances preserved: the dihedral maps
/// first, then random rotations about the square's center, each optionally
/// preceded by a reflection.
pub fn create_augmentations<R: Rng + ?Sized>(inst: &Instance, a: usize, rng: &mut R) -> Vec<Instance> {
    assert!(a >= 1, "need at least one augmentation");
    let mut views = Vec::with_capacity(a);
    views.push(inst.clone());
    for k in 1..a {
        let coords: Vec<[f64; 2]> = if k < 8 {
            inst.coords().iter().map(|&p| dihedral(k, p)).collect()
        } else {
            let theta = rng.random_range(0.0..2.0 * PI);
            let reflect = rng.random_bool(0.5);
            let (s, c) = theta.sin_cos();
            inst.coords()
                .iter()
                .map(|&[x, y]| {
                    let x = if reflect { 1.0 - x } else { x };
                    let (dx, dy) = (x - 0.5, y - 0.5);
                    [0.5 + c * dx - s * dy, 0.5 + s * dx + c * dy]
                })
                .collect()
        };
        views.push(inst.with_coords(coords));
    }
    views
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::GeneratorSpec;
    use crate::instance::Variant;
    use crate::stream_rng;

    #[test]
    fn identity_only_for_one() {
        let inst = GeneratorSpec::new(Variant::Cvrp, 10, 1).generate().unwrap();
        let v = create_augmentations(&inst, 1, &mut stream_rng(0, 0));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].coords(), inst.coords());
    }

    #[test]
    fn many_views_are_distinct_isometries() {
        let inst = GeneratorSpec::new(Variant::Cvrp, 30, 1).generate().unwrap();
        let views = create_augmentations(&inst, 128, &mut stream_rng(0, 0));
        assert_eq!(views.len(), 128);
        for i in 0..views.len() {
            for j in 0..i {
                assert_ne!(views[i].coords(), views[j].coords());
            }
        }
        for v in &views {
            for a in [0, 3, 7, 30] {
                for b in [0, 1, 12, 29] {
                    assert!((v.distance(a, b) - inst.distance(a, b)).abs() < 1e-12);
                }
            }
        }
    }
}
