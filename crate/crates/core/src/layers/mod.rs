//! KAN layers over three basis families, their analytic backward passes and
//! the network builder.

mod basis;
mod layer;
mod model_io;
mod network;

pub use basis::{bspline_basis, bspline_basis_with_derivative, rbf_basis, rswaf_basis, SplineGrid};
pub use layer::{BasisTable, KanLayer, LayerCache, LayerGrads, Variant, CLAMP_MARGIN};
pub use model_io::{load_network, network_from_json, network_to_json, save_network};
pub use network::{build_network, KanNetwork, NetworkCache, NetworkSpec};
