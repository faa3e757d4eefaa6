//! Image plumbing and evaluation: PNG files, bicubic resampling, luma
//! conversion and PSNR.

mod bicubic;
mod eval;
mod metrics;
mod plane;
mod png_io;

pub use bicubic::{axis_weights, bicubic_resize, cubic, output_len, AxisWeights};
pub use eval::{degrade, eval_dataset, list_pngs, psnr_against_hr, Bicubic, EvalReport, ImageScore, Upscaler};
pub use metrics::{luma, psnr, rgb_to_y, EvalProtocol, LumaPlane};
pub use plane::{to_u8, ImagePlane};
pub use png_io::{load_png, save_png};
