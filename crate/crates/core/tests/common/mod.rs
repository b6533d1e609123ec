#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, Normal};
use synthlab_core::numeric::seeded;
use synthlab_core::tabular::{ColumnData, ColumnSpec, Dataset, Schema};

/// Two continuous columns from a two-component Gaussian mixture, a colour
/// column and a binary label that follows the mixture component 90% of the time.
pub fn mixed_toy(n: usize, seed: u64) -> Dataset {
    let mut rng = seeded(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let (mut x1, mut x2, mut color, mut label) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let comp = rng.random_bool(0.4);
        let (m1, m2) = if comp { (4.0, -2.0) } else { (-1.0, 3.0) };
        x1.push(Some(m1 + noise.sample(&mut rng)));
        x2.push(Some(m2 + 0.5 * noise.sample(&mut rng)));
        color.push(Some(if comp { rng.random_range(0..2) } else { rng.random_range(1..3) }));
        label.push(Some(usize::from(comp ^ rng.random_bool(0.1))));
    }
    let schema = Schema::new(vec![
        ColumnSpec::continuous("x1"),
        ColumnSpec::continuous("x2"),
        ColumnSpec::categorical("color", ["red", "green", "blue"]),
        ColumnSpec::categorical("label", ["no", "yes"]).as_target(),
    ])
    .unwrap();
    Dataset::new(
        schema,
        vec![
            ColumnData::Continuous(x1),
            ColumnData::Continuous(x2),
            ColumnData::Categorical(color),
            ColumnData::Categorical(label),
        ],
    )
    .unwrap()
}

/// Copy of `ds` with every continuous column shifted by `sds` standard deviations.
pub fn shifted(ds: &Dataset, sds: f64) -> Dataset {
    let columns = ds
        .columns()
        .iter()
        .map(|c| match c {
            ColumnData::Continuous(v) => {
                let vals: Vec<f64> = v.iter().flatten().copied().collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let sd = (vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
                ColumnData::Continuous(v.iter().map(|x| x.map(|x| x + sds * sd)).collect())
            }
            other => other.clone(),
        })
        .collect();
    Dataset::new(ds.schema().clone(), columns).unwrap()
}

/// Two continuous columns from a two-component Gaussian mixture and a
/// binary label that matches the component 90% of the time.
pub fn gan_toy(n: usize, seed: u64) -> Dataset {
    let mut rng = seeded(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let (mut x1, mut x2, mut label) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let comp = rng.random_bool(0.4);
        let e1 = noise.sample(&mut rng);
        let e2 = noise.sample(&mut rng);
        let (a, b) = if comp { (3.0 + 0.8 * e1, -1.0 + 0.6 * e1 + 0.9 * e2) } else { (-2.0 + e1, 1.0 + 0.5 * e2) };
        x1.push(Some(a));
        x2.push(Some(b));
        label.push(Some(usize::from(comp ^ rng.random_bool(0.1))));
    }
    let schema = Schema::new(vec![
        ColumnSpec::continuous("x1"),
        ColumnSpec::continuous("x2"),
        ColumnSpec::categorical("label", ["neg", "pos"]).as_target(),
    ])
    .unwrap();
    Dataset::new(
        schema,
        vec![ColumnData::Continuous(x1), ColumnData::Continuous(x2), ColumnData::Categorical(label)],
    )
    .unwrap()
}
