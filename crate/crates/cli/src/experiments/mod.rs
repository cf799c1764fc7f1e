pub mod ate_ddml;
pub mod causal_demo;
pub mod cfm;
pub mod copula_demo;
pub mod coupling_compare;
pub mod ggm_bench;
pub mod linreg_semipar;
pub mod lipschitz_map;
pub mod mi_demo;
pub mod quartic_sm;
