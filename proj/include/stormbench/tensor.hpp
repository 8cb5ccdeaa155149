#pragma once

#include "stormbench/tensor/conv.hpp"
#include "stormbench/tensor/fft.hpp"
#include "stormbench/tensor/ops.hpp"
#include "stormbench/tensor/spectral.hpp"
#include "stormbench/tensor/tensor.hpp"
