//! Four-port devices: transmission/absorption matrices, the J-unitary mode
//! transformation Λ, and the Fock-space channel built from it.

mod channel;
mod device;
pub mod dilation;

pub use channel::{apply_channel, apply_local_channels, ChannelOptions, ChannelOutput, LeakageReport, LocalChannel};
pub use device::{
    fiber_transmission, make_cs, make_lambda, make_lambda_limit, DeviceSpec, DeviceSpecJson, FiberSpec, LambdaFactors,
    LambdaMatrix, Sigma, DEFAULT_DEVICE_TOLERANCE,
};
