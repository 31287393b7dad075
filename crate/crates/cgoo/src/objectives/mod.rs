pub mod confusion;
pub mod fairness;
pub mod gini;
pub mod least_squares;
pub mod lower_bound;
pub mod smax;
