pub mod commands;
pub mod corpus;
pub mod embedding;
pub mod eval;
pub mod model;
pub mod tensor;
pub mod train;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/tensor.md")]
    mod tensor {}
    #[doc = include_str!("../../../book/src/embeddings.md")]
    mod embeddings {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
