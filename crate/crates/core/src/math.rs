//! Float intrinsics, routed through `std` or `libm` depending on the build.

#![allow(dead_code)]

macro_rules! forward {
    ($($name:ident => $libm_name:ident),* $(,)?) => {
        $(
            #[cfg(feature = "std")]
            #[inline(always)]
            pub fn $name(x: f64) -> f64 {
                f64::$name(x)
            }
            #[cfg(not(feature = "std"))]
            #[inline(always)]
            pub fn $name(x: f64) -> f64 {
                libm::$libm_name(x)
            }
        )*
    };
}

forward!(exp => exp, ln => log, sqrt => sqrt, sin => sin, cos => cos, floor => floor);

#[cfg(feature = "std")]
#[inline(always)]
pub fn exp_m1(x: f64) -> f64 {
    f64::exp_m1(x)
}

#[cfg(not(feature = "std"))]
#[inline(always)]
pub fn exp_m1(x: f64) -> f64 {
    libm::expm1(x)
}

#[cfg(feature = "std")]
#[inline(always)]
pub fn ln_1p(x: f64) -> f64 {
    f64::ln_1p(x)
}

#[cfg(not(feature = "std"))]
#[inline(always)]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[cfg(feature = "std")]
#[inline(always)]
pub fn powf(x: f64, y: f64) -> f64 {
    f64::powf(x, y)
}

#[cfg(not(feature = "std"))]
#[inline(always)]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline(always)]
pub fn hypot_sq(xs: &[f64]) -> f64 {
    xs.iter().map(|&v| v * v).sum()
}

#[inline(always)]
pub fn norm(xs: &[f64]) -> f64 {
    sqrt(hypot_sq(xs))
}

#[inline(always)]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}
