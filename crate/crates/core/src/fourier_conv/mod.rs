//! Quantum Fourier convolution: kernel encoding, the frequency-shift map,
//! the layer pipeline and the no-go witness.

pub mod angles;
pub mod layer;
pub mod mmap;
pub mod witness;

pub use angles::{angles_to_kernel, kernel_to_angles, AngleTree};
pub use layer::{
    conv_success_probability, qconv_1d, qconv_2d, ConvResult, FourierConvLayer, KernelSlice,
    Orientation, PairStats, PreparedLayer, Simulator,
};
pub use mmap::{m_map, m_map_axes, m_map_gate, m_map_permutation};
pub use witness::{random_pairs, verify_no_pointwise_product, PairSample, WitnessReport};
