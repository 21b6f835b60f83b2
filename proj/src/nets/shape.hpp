#pragma once

#include "neuroair/nets.hpp"

namespace neuroair::nets::detail {

struct Axis {
  int out = 0;
  int pad_before = 0;
};

/// Output length and leading pad along one axis. Returns out <= 0 when the
/// kernel does not fit.
Axis axis_geometry(int in, int kernel, int stride, Padding pad);

/// Throws Error describing the mismatch when the layer cannot accept `in`.
Shape layer_output_shape(const LayerSpec& spec, Shape in);

}  // namespace neuroair::nets::detail
