mod eps;
mod labelling;
mod sim;
mod table;
mod witness;

pub use eps::*;
pub use labelling::*;
pub use sim::*;
pub use table::*;
pub use witness::*;
