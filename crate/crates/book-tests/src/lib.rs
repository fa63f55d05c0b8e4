//! Compiles the guide's snippets as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/sinkhorn.md")]
pub mod sinkhorn {}

#[doc = include_str!("../../../book/src/tensor.md")]
pub mod tensor {}

#[doc = include_str!("../../../book/src/geodesics.md")]
pub mod geodesics {}

#[doc = include_str!("../../../book/src/closed_forms.md")]
pub mod closed_forms {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
