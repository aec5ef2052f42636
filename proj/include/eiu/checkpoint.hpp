#pragma once

#include <string>
#include <utility>
#include <vector>

#include "eiu/tensor.hpp"

namespace eiu {

// Parameter checkpoint container "EIUP": magic, format version u8, then
// repeated records of (u16 path length + UTF-8 path, u8 dtype {0=f32,1=f64},
// u32 ndim, u32 dims..., row-major little-endian payload). Round-trips are
// bit-exact for f64.

enum class Dtype : std::uint8_t { f32 = 0, f64 = 1 };

using NamedTensorList = std::vector<std::pair<std::string, Tensor>>;

std::string encode_checkpoint(const NamedTensorList& params, Dtype dtype = Dtype::f64);
NamedTensorList decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const NamedTensorList& params,
                     Dtype dtype = Dtype::f64);
NamedTensorList load_checkpoint(const std::string& path);

}  // namespace eiu
