//! Binary category codes for generalized category discovery: a small
//! reverse-mode autodiff core, code and mask heads, contrastive and length
//! losses, clustering evaluation, category-tree tooling and a training
//! runner.

pub mod cluster;
pub mod codec;
pub mod datagen;
pub mod diffcore;
pub mod losses;
pub mod runner;
pub mod treelab;
