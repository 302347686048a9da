//! Float math routed through `std` when available and `libm` otherwise.

#![allow(dead_code)]

macro_rules! shim {
    ($name:ident, $libm:ident) => {
        #[cfg(feature = "std")]
        #[inline(always)]
        pub fn $name(x: f64) -> f64 {
            x.$name()
        }
        #[cfg(not(feature = "std"))]
        #[inline(always)]
        pub fn $name(x: f64) -> f64 {
            libm::$libm(x)
        }
    };
}

shim!(sqrt, sqrt);
shim!(exp, exp);
shim!(ln, log);
shim!(sin, sin);
shim!(cos, cos);
shim!(tanh, tanh);
shim!(acos, acos);
shim!(abs, fabs);
shim!(floor, floor);
shim!(ceil, ceil);

#[cfg(feature = "std")]
#[inline(always)]
pub fn powf(x: f64, y: f64) -> f64 {
    x.powf(y)
}
#[cfg(not(feature = "std"))]
#[inline(always)]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}
