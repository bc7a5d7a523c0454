//! One-dimensional optimal transport and the price of statistical parity.
//!
//! Multivariate features are handled coordinate by coordinate: each feature
//! marginal is transported separately, which ignores the dependence between
//! coordinates.

mod price;
mod repair;
mod tv;
mod wasserstein;

pub use price::{classification_price_bound, sp_price_regression, PriceBound};
pub use repair::{
    apply_plan, fit_repair_plan, group_w2_by_coordinate, random_repair, total_repair, CoordinateMap, GroupMap,
    RepairPlan,
};
pub use tv::{decile_tv, tv_ber_relation, TvBer};
pub use wasserstein::{barycenter_1d, barycenter_objective, wasserstein2_1d};
