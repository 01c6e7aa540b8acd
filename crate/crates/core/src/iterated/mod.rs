mod bg;
mod config;
mod fullinfo;
mod isched;
mod onebit;
mod validate;
mod view;

pub use bg::*;
pub use config::*;
pub use fullinfo::*;
pub use isched::*;
pub use onebit::*;
pub use validate::*;
pub use view::*;
