//! Multimodal featurization and classification of social-media profiles.
//!
//! The crate turns a line-oriented corpus of user records into image,
//! face, text, demographic, network and social-count features, selects
//! features with shadow permutations over a random forest, and classifies
//! with second-order boosted trees whose predictions decompose into
//! per-feature log-odds contributions.
//!
//! ```
//! use persona_signal::gbt::{fit, explain, GBTParams};
//! use persona_signal::matrix::Matrix;
//!
//! let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
//! let y = [0.0, 0.0, 1.0, 1.0];
//! let params = GBTParams { rounds: 5, min_child_hessian: 0.0, ..Default::default() };
//! let model = fit(&x, &y, &["score".to_string()], &params).unwrap();
//! let w = explain(&model, &[3.0]).unwrap();
//! let total = w.bias + w.contributions.iter().map(|c| c.delta).sum::<f64>();
//! assert!((total - w.final_logodds).abs() < 1e-9);
//! ```

pub mod corpus;
pub mod demog;
pub mod error;
pub mod gbt;
pub mod imgfeat;
pub mod matrix;
pub mod netfeat;
pub mod pipeline;
pub mod providers;
pub mod seed;
pub mod select;
pub mod stats;
pub mod synth;
pub mod textfeat;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/selection.md")]
    mod selection {}
    #[doc = include_str!("../../../book/src/boosting.md")]
    mod boosting {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
