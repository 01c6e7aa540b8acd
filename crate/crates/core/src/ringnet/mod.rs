mod codec;
mod node;
mod sim;
mod topology;

pub use codec::*;
pub use node::*;
pub use sim::*;
pub use topology::*;
