//! Instances shared by the benchmarks.

use lame_core::lame::LameOperator;
use lame_core::poly::Poly;
use num_complex::Complex64 as C64;

pub fn stieltjes(n: usize) -> LameOperator {
    let poles = [C64::new(-1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
    LameOperator::new(&poles, Poly::from_real(&[-1.0, 0.0, 4.0]), n).expect("valid instance")
}

pub fn legendre(n: usize) -> LameOperator {
    let poles = [C64::new(-1.0, 0.0), C64::new(1.0, 0.0)];
    LameOperator::new(&poles, Poly::from_real(&[0.0, 2.0]), n).expect("valid instance")
}

pub fn rectangle_poles() -> Vec<C64> {
    vec![C64::new(1.0, 0.5), C64::new(-1.0, 0.5), C64::new(-1.0, -0.5), C64::new(1.0, -0.5)]
}

pub fn rectangle(n: usize) -> LameOperator {
    let poles = rectangle_poles();
    LameOperator::new(&poles, Poly::from_roots(&poles).derivative(), n).expect("valid instance")
}
