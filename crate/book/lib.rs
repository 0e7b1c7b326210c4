// mdbook cannot run listings that depend on external crates, so each chapter
// is included as a module doc and `cargo test --doc` runs the listings.
// One module per chapter keeps failures traceable to their file.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/networks.md")]
pub mod networks {}
#[doc = include_str!("src/spectral-bound.md")]
pub mod spectral_bound {}
#[doc = include_str!("src/limits.md")]
pub mod limits {}
#[doc = include_str!("src/karlin.md")]
pub mod karlin {}
#[doc = include_str!("src/trees.md")]
pub mod trees {}
#[doc = include_str!("src/models.md")]
pub mod models {}
#[doc = include_str!("src/integration.md")]
pub mod integration {}
#[doc = include_str!("src/problem-files.md")]
pub mod problem_files {}
