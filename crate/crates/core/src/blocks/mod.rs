//! Network building blocks, batched over equally sized clouds.

mod fp;
mod head;
mod invres;
mod layer;
mod sa;
mod stage;
mod suite;

pub use fp::FpBlock;
pub use head::{GlobalBlock, Head};
pub use invres::InvResMlp;
pub use layer::{dropout, forward_all, Layer, NormParams};
pub use sa::{SaBlock, SaSpec};
pub use stage::StageFeatures;
pub use suite::{gradient_suite, SuiteCase};

#[cfg(test)]
mod tests;
