// SPDX-License-Identifier: Apache-2.0
//! C ABI for the bitcol toolkit.
//!
//! Every function returns a [`BitcolStatus`]; results come back through
//! out-pointers. On failure the message is kept per thread and can be read
//! with [`bitcol_last_error`]. Handles are opaque and must be released with
//! their `_free` function.
//!
//! # Safety
//!
//! Pointer arguments must be null or valid for the stated length. Handles
//! must come from this library and not be used after being freed. Out
//! pointers may be null, in which case that result is dropped, except for
//! the handle out pointers of the constructors.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bitcol::bitflip::{best_column_set, SignPolicy};
use bitcol::codec::{
    compress_layer, compression_ratio, decompress_layer, CompressedLayer, GroupSize, ModeChoice,
};
use bitcol::mapper::{select_su, spatial_utilization, SpatialUnrolling};
use bitcol::model::{encode_container, load_network, LayerKind, LayerShape, Network, WeightTensor};
use bitcol::perf::{evaluate, preset};
use bitcol::sim::{bce_group, simulate_layer, SimOptions};
use bitcol::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitcolStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Unsupported = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitcolLayerKind {
    Conv = 0,
    DepthwiseConv = 1,
    PointwiseConv = 2,
    FullyConnected = 3,
    MatMul = 4,
}

/// Loop dimensions of one layer; weights are K-major, then C, FY, FX.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct BitcolShape {
    pub batch: u32,
    pub out_channels: u32,
    pub in_channels: u32,
    pub out_x: u32,
    pub out_y: u32,
    pub kernel_x: u32,
    pub kernel_y: u32,
    pub stride: u32,
    pub kind: BitcolLayerKind,
}

/// A loaded network.
pub struct BitcolNetwork {
    inner: Network,
}

/// One compressed layer together with its shape.
pub struct BitcolCompressed {
    layer: CompressedLayer,
    shape: LayerShape,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> BitcolStatus {
    match e {
        Error::Io { .. } | Error::MissingFile(_) => BitcolStatus::Io,
        Error::Manifest { .. }
        | Error::SizeMismatch { .. }
        | Error::Truncated(_)
        | Error::IndexPayloadMismatch { .. }
        | Error::BadMagic
        | Error::UnsupportedVersion(_)
        | Error::Csv(_) => BitcolStatus::Format,
        Error::IncompatibleLayer { .. } | Error::GroupingMismatch { .. } => {
            BitcolStatus::Unsupported
        }
        _ => BitcolStatus::InvalidArgument,
    }
}

/// Runs `f`, recording errors and turning panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (BitcolStatus, String)>) -> BitcolStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            BitcolStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            BitcolStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, (BitcolStatus, String)>;
}

impl<T> OrStatus<T> for bitcol::Result<T> {
    fn or_status(self) -> Result<T, (BitcolStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (BitcolStatus, String) {
    (BitcolStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (BitcolStatus, String) {
    (BitcolStatus::InvalidArgument, msg.into())
}

unsafe fn slice<'a, T>(
    p: *const T,
    len: usize,
    what: &str,
) -> Result<&'a [T], (BitcolStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(
    p: *mut T,
    len: usize,
    what: &str,
) -> Result<&'a mut [T], (BitcolStatus, String)> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn out<T>(p: *mut T, v: T) {
    if !p.is_null() {
        p.write(v);
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (BitcolStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

fn group_size(g: u32) -> Result<GroupSize, (BitcolStatus, String)> {
    GroupSize::new(g as usize).or_status()
}

impl BitcolShape {
    fn to_shape(self) -> Result<LayerShape, (BitcolStatus, String)> {
        let kind = match self.kind {
            BitcolLayerKind::Conv => LayerKind::Conv,
            BitcolLayerKind::DepthwiseConv => LayerKind::DepthwiseConv,
            BitcolLayerKind::PointwiseConv => LayerKind::PointwiseConv,
            BitcolLayerKind::FullyConnected => LayerKind::FullyConnected,
            BitcolLayerKind::MatMul => LayerKind::MatMul,
        };
        let s = LayerShape {
            batch: self.batch as usize,
            out_channels: self.out_channels as usize,
            in_channels: self.in_channels as usize,
            out_x: self.out_x as usize,
            out_y: self.out_y as usize,
            kernel_x: self.kernel_x as usize,
            kernel_y: self.kernel_y as usize,
            stride: self.stride as usize,
            kind,
        };
        s.validate().or_status()?;
        Ok(s)
    }
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `cap`) and returns the full message length,
/// or 0 when the last call succeeded.
#[no_mangle]
pub unsafe extern "C" fn bitcol_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => {
            if !buf.is_null() && cap > 0 {
                *buf = 0;
            }
            0
        }
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && cap > 0 {
                let n = bytes.len().min(cap - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Static, NUL-terminated version string.
#[no_mangle]
pub extern "C" fn bitcol_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Loads a network from a manifest path.
#[no_mangle]
pub unsafe extern "C" fn bitcol_network_load(
    manifest_path: *const c_char,
    out_network: *mut *mut BitcolNetwork,
) -> BitcolStatus {
    guard(|| {
        if out_network.is_null() {
            return Err(null("out_network"));
        }
        let path = c_str(manifest_path, "manifest_path")?;
        let inner = load_network(path).or_status()?;
        *out_network = Box::into_raw(Box::new(BitcolNetwork { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn bitcol_network_free(network: *mut BitcolNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

#[no_mangle]
pub unsafe extern "C" fn bitcol_network_layer_count(
    network: *const BitcolNetwork,
    out_count: *mut usize,
) -> BitcolStatus {
    guard(|| {
        let n = network.as_ref().ok_or_else(|| null("network"))?;
        out(out_count, n.inner.tensors.len());
        Ok(())
    })
}

/// Shape of layer `index`.
#[no_mangle]
pub unsafe extern "C" fn bitcol_network_layer_shape(
    network: *const BitcolNetwork,
    index: usize,
    out_shape: *mut BitcolShape,
) -> BitcolStatus {
    guard(|| {
        let n = network.as_ref().ok_or_else(|| null("network"))?;
        let t = n
            .inner
            .tensors
            .get(index)
            .ok_or_else(|| invalid(format!("layer index {index} out of range")))?;
        let s = t.shape;
        let kind = match s.kind {
            LayerKind::Conv => BitcolLayerKind::Conv,
            LayerKind::DepthwiseConv => BitcolLayerKind::DepthwiseConv,
            LayerKind::PointwiseConv => BitcolLayerKind::PointwiseConv,
            LayerKind::FullyConnected => BitcolLayerKind::FullyConnected,
            LayerKind::MatMul => BitcolLayerKind::MatMul,
        };
        out(
            out_shape,
            BitcolShape {
                batch: s.batch as u32,
                out_channels: s.out_channels as u32,
                in_channels: s.in_channels as u32,
                out_x: s.out_x as u32,
                out_y: s.out_y as u32,
                kernel_x: s.kernel_x as u32,
                kernel_y: s.kernel_y as u32,
                stride: s.stride as u32,
                kind,
            },
        );
        Ok(())
    })
}

/// Copies the weights of layer `index` into `out_values` (`len` must equal
/// the layer's weight count).
#[no_mangle]
pub unsafe extern "C" fn bitcol_network_layer_weights(
    network: *const BitcolNetwork,
    index: usize,
    out_values: *mut i8,
    len: usize,
) -> BitcolStatus {
    guard(|| {
        let n = network.as_ref().ok_or_else(|| null("network"))?;
        let t = n
            .inner
            .tensors
            .get(index)
            .ok_or_else(|| invalid(format!("layer index {index} out of range")))?;
        if len != t.len() {
            return Err((
                BitcolStatus::BufferTooSmall,
                format!("need {} values, got {len}", t.len()),
            ));
        }
        slice_mut(out_values, len, "out_values")?.copy_from_slice(&t.values);
        Ok(())
    })
}

/// Evaluates the network on a named accelerator preset.
#[no_mangle]
pub unsafe extern "C" fn bitcol_perf_evaluate(
    network: *const BitcolNetwork,
    preset_name: *const c_char,
    out_cycles: *mut f64,
    out_energy: *mut f64,
) -> BitcolStatus {
    guard(|| {
        let n = network.as_ref().ok_or_else(|| null("network"))?;
        let spec = preset(c_str(preset_name, "preset_name")?).or_status()?;
        let r = evaluate(&n.inner, &spec).or_status()?;
        out(out_cycles, r.total_cycles);
        out(out_energy, r.total_energy());
        Ok(())
    })
}

/// Compresses one layer. `group_size` of 0 means BCS or dense, whichever
/// is smaller, at G=8; otherwise the layer is compressed at that G in the
/// same automatic mode.
#[no_mangle]
pub unsafe extern "C" fn bitcol_compress(
    values: *const i8,
    len: usize,
    shape: BitcolShape,
    group_size: u32,
    out_compressed: *mut *mut BitcolCompressed,
) -> BitcolStatus {
    guard(|| {
        if out_compressed.is_null() {
            return Err(null("out_compressed"));
        }
        let shape = shape.to_shape()?;
        let g = if group_size == 0 {
            GroupSize::HARDWARE[0]
        } else {
            self::group_size(group_size)?
        };
        if len != shape.weight_count() {
            return Err(invalid(format!(
                "shape holds {} weights, got {len}",
                shape.weight_count()
            )));
        }
        let v = slice(values, len, "values")?.to_vec();
        let t = WeightTensor::new("layer", shape, v).or_status()?;
        let layer = compress_layer(&t, g, ModeChoice::Auto).layer;
        *out_compressed = Box::into_raw(Box::new(BitcolCompressed { layer, shape }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn bitcol_compressed_free(compressed: *mut BitcolCompressed) {
    if !compressed.is_null() {
        drop(Box::from_raw(compressed));
    }
}

/// Real compression ratio (index included) and group count.
#[no_mangle]
pub unsafe extern "C" fn bitcol_compressed_info(
    compressed: *const BitcolCompressed,
    out_ratio: *mut f64,
    out_groups: *mut u32,
    out_is_dense: *mut bool,
) -> BitcolStatus {
    guard(|| {
        let c = compressed.as_ref().ok_or_else(|| null("compressed"))?;
        out(out_ratio, compression_ratio(&c.layer, true));
        out(out_groups, c.layer.group_count);
        out(out_is_dense, c.layer.groups().is_none());
        Ok(())
    })
}

/// Writes the layer as a single-layer container. With `buf` null or too
/// small, stores the required size in `out_len` and returns
/// `BufferTooSmall`.
#[no_mangle]
pub unsafe extern "C" fn bitcol_compressed_encode(
    compressed: *const BitcolCompressed,
    buf: *mut u8,
    cap: usize,
    out_len: *mut usize,
) -> BitcolStatus {
    guard(|| {
        let c = compressed.as_ref().ok_or_else(|| null("compressed"))?;
        let bytes = encode_container(std::slice::from_ref(&c.layer));
        out(out_len, bytes.len());
        if buf.is_null() || cap < bytes.len() {
            return Err((
                BitcolStatus::BufferTooSmall,
                format!("need {} bytes", bytes.len()),
            ));
        }
        slice_mut(buf, bytes.len(), "buf")?.copy_from_slice(&bytes);
        Ok(())
    })
}

/// Decompresses into `out_values` (`len` = weight count).
#[no_mangle]
pub unsafe extern "C" fn bitcol_compressed_decompress(
    compressed: *const BitcolCompressed,
    out_values: *mut i8,
    len: usize,
) -> BitcolStatus {
    guard(|| {
        let c = compressed.as_ref().ok_or_else(|| null("compressed"))?;
        let v = decompress_layer(&c.layer, &c.shape).or_status()?;
        if len != v.len() {
            return Err((
                BitcolStatus::BufferTooSmall,
                format!("need {} values, got {len}", v.len()),
            ));
        }
        slice_mut(out_values, len, "out_values")?.copy_from_slice(&v);
        Ok(())
    })
}

/// Lockstep cycles of a compressed layer on `SU<su_id>`; `su_id` 0 picks
/// the best unrolling for the shape.
#[no_mangle]
pub unsafe extern "C" fn bitcol_simulate(
    compressed: *const BitcolCompressed,
    su_id: u8,
    count_sign_cycle: bool,
    out_cycles: *mut u64,
    out_barrier_loss: *mut u64,
) -> BitcolStatus {
    guard(|| {
        let c = compressed.as_ref().ok_or_else(|| null("compressed"))?;
        let su = if su_id == 0 {
            select_su(&c.shape)
        } else {
            SpatialUnrolling::by_id(su_id)
                .ok_or_else(|| invalid(format!("no spatial unrolling SU{su_id}")))?
        };
        let r = simulate_layer(&c.layer, &c.shape, &su, &SimOptions { count_sign_cycle })
            .or_status()?;
        out(out_cycles, r.total_cycles);
        out(out_barrier_loss, r.barrier_loss);
        Ok(())
    })
}

/// Best spatial unrolling for a shape and its utilization.
#[no_mangle]
pub unsafe extern "C" fn bitcol_select_su(
    shape: BitcolShape,
    out_su_id: *mut u8,
    out_utilization: *mut f64,
) -> BitcolStatus {
    guard(|| {
        let s = shape.to_shape()?;
        let su = select_su(&s);
        out(out_su_id, su.id);
        out(out_utilization, spatial_utilization(&s, &su).or_status()?);
        Ok(())
    })
}

/// Dot product of one weight group with activations through the
/// column-serial engine. `len` must be a supported group size.
#[no_mangle]
pub unsafe extern "C" fn bitcol_bce_dot(
    activations: *const i8,
    weights: *const i8,
    len: usize,
    out_dot: *mut i64,
    out_cycles: *mut u32,
) -> BitcolStatus {
    guard(|| {
        let g = self::group_size(len as u32)?;
        let a = slice(activations, len, "activations")?;
        let w = slice(weights, len, "weights")?;
        if w.contains(&i8::MIN) {
            return Err(invalid("weight -128 has no sign-magnitude form"));
        }
        let t = WeightTensor::new("g", LayerShape::conv(1, len, 1, 1), w.to_vec()).or_status()?;
        let c = compress_layer(&t, g, ModeChoice::Bcs).layer;
        let r = bce_group(a, &c.groups().expect("bcs mode")[0], g).or_status()?;
        out(out_dot, r.dot);
        out(out_cycles, r.cycles);
        Ok(())
    })
}

/// Rounds a group to the nearest values with at least `zero_columns` zero
/// sign-magnitude columns, in place.
#[no_mangle]
pub unsafe extern "C" fn bitcol_flip_group(
    values: *mut i8,
    len: usize,
    zero_columns: u32,
    preserve_sign: bool,
    out_squared_error: *mut u64,
) -> BitcolStatus {
    guard(|| {
        if zero_columns > 8 {
            return Err(invalid("zero_columns must be at most 8"));
        }
        if len == 0 || len > 64 {
            return Err(invalid("group length must be 1..=64"));
        }
        let v = slice_mut(values, len, "values")?;
        let policy = if preserve_sign {
            SignPolicy::Preserve
        } else {
            SignPolicy::Optimize
        };
        let c = best_column_set(v, zero_columns, policy);
        v.copy_from_slice(&c.values);
        out(out_squared_error, c.squared_error);
        Ok(())
    })
}
