use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Uniform};

/// Half-width of the Kaiming-uniform interval for a `rows x cols` weight used as
/// `H · W`, so the fan-in is `rows`.
pub fn kaiming_bound(rows: usize, slope: f64) -> f64 {
    let gain = (2.0 / (1.0 + slope * slope)).sqrt();
    gain * (3.0 / rows as f64).sqrt()
}

pub fn kaiming_uniform_init<R: Rng + ?Sized>(rows: usize, cols: usize, slope: f64, rng: &mut R) -> Array2<f64> {
    let bound = kaiming_bound(rows.max(1), slope);
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite positive bound");
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}
