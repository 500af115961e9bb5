//! Spiking detection core: integer leaky integrate-and-fire neurons, the
//! meta block family (SepConv token mixer, two channel mixers), RepConv
//! inference fusion, a toy three-scale backbone and the weight checkpoint
//! container.

pub mod backbone;
pub mod blocks;
pub mod checkpoint;
pub mod conv;
pub mod neuron;
pub mod tensor;

pub use backbone::SpikeBackbone;
pub use blocks::{repconv_fuse, ChConv1, ChConv2, ExecMode, MetaBlock, RepConv, SepConv};
pub use checkpoint::Checkpoint;
pub use conv::{BatchNormParams, ConvKind, ConvSpec};
pub use neuron::{ilif_forward, ilif_step, surrogate_grad, IlifState};
pub use tensor::{SpikeMode, SpikeTensor};
