#pragma once

#include <vector>

#include "pek/tensor.hpp"

// Convolution kernels, OpenMP-parallel. Every output element is owned by
// exactly one thread and accumulated in a fixed serial order, so results are
// bitwise identical for any thread count (and to the serial reference in
// kernels_ref.hpp, which tests compare against).
//
// Conventions:
//   conv weight  w: (oc, ic, k, k), zero padding p, stride s
//                   out = (in + 2p - k) / s + 1
//   convT weight w: (ic, oc, k, k)
//                   out = (in - 1) * s - 2p + k
namespace pek::core {

void conv2d_forward(Tensor& out, const Tensor& in, const Tensor& w,
                    const std::vector<double>& bias, int stride, int pad);
void conv2d_backward_input(Tensor& gin, const Tensor& gout, const Tensor& w,
                           int stride, int pad);
void conv2d_backward_params(Tensor& gw, std::vector<double>& gbias,
                            const Tensor& gout, const Tensor& in, int stride,
                            int pad);

void convt2d_forward(Tensor& out, const Tensor& in, const Tensor& w,
                     const std::vector<double>& bias, int stride, int pad);
void convt2d_backward_input(Tensor& gin, const Tensor& gout, const Tensor& w,
                            int stride, int pad);
void convt2d_backward_params(Tensor& gw, std::vector<double>& gbias,
                             const Tensor& gout, const Tensor& in, int stride,
                             int pad);

int conv_out_size(int in, int k, int stride, int pad);
int convt_out_size(int in, int k, int stride, int pad);

namespace ref {
// Serial reference implementations, textbook loop nests. Kept for unit tests
// and the kernel benchmark; not used on any production path.
void conv2d_forward(Tensor& out, const Tensor& in, const Tensor& w,
                    const std::vector<double>& bias, int stride, int pad);
void conv2d_backward_input(Tensor& gin, const Tensor& gout, const Tensor& w,
                           int stride, int pad);
void conv2d_backward_params(Tensor& gw, std::vector<double>& gbias,
                            const Tensor& gout, const Tensor& in, int stride,
                            int pad);
void convt2d_forward(Tensor& out, const Tensor& in, const Tensor& w,
                     const std::vector<double>& bias, int stride, int pad);
void convt2d_backward_input(Tensor& gin, const Tensor& gout, const Tensor& w,
                            int stride, int pad);
void convt2d_backward_params(Tensor& gw, std::vector<double>& gbias,
                             const Tensor& gout, const Tensor& in, int stride,
                             int pad);
}  // namespace ref

}  // namespace pek::core
