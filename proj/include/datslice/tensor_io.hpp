#pragma once

#include <iosfwd>
#include <string>

#include "datslice/deform_attn.hpp"
#include "datslice/tensor.hpp"

namespace datslice {

// FMAP tensor file, all fields little-endian:
//   magic "FMAP" | u16 version = 1 | u16 dtype (1 = float64) | u8 rank |
//   rank x u32 extents | payload: row-major float64 values.
//
// DATP weights file:
//   magic "DATP" | u16 version = 1 | sections until EOF, each:
//   u32 name length | UTF-8 name bytes | FMAP-format body.
// The section named "meta" is a rank-1 tensor holding
//   [d_model, n_heads, n_ref_points, offset_scale, grid_stride,
//    per_head_offsets, seed].

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

void save_params(const std::string& path, const DeformAttnParams& params);
DeformAttnParams load_params(const std::string& path);

}  // namespace datslice
