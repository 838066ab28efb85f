pub mod as2u;
pub mod attacks;
pub mod bounds;
pub mod gf2m;
pub mod netsim;
pub mod protocol;
