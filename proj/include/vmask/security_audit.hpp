#pragma once

#include <cstddef>
#include <vector>

namespace vmask {

enum class Verdict { Secure = 0, Reconstructible = 1 };

// A masked FC layer resists exact parameter recovery from observed
// input/output pairs iff the batch of simultaneous equations stays
// underdetermined: batch < input width.
Verdict check_fc(std::size_t batch, std::size_t n1);

// Single-channel square convolution: input h x h, kernel n x n, zero padding
// p, stride s.
struct ConvParams {
  std::size_t input = 0;    // h
  std::size_t kernel = 0;   // n
  std::size_t padding = 0;  // p
  std::size_t stride = 1;   // s
};

// Secure iff n > (h + 2p + s) / (s + 1), evaluated exactly over the
// integers: n * (s + 1) > h + 2p + s.
Verdict check_conv(const ConvParams& c);

struct AuditItem {
  std::size_t party = 0;  // passive party id
  std::size_t layer = 0;  // 1-based
  std::size_t width = 0;  // layer input dimension n1
  std::size_t batch = 0;
  Verdict verdict = Verdict::Secure;
};

// One verdict per (masked-eligible layer, batch size) pair, every bottom
// layer being eligible. widths[k] lists the layer input dims of passive
// party k+1's bottom model.
std::vector<AuditItem> audit_layers(
    std::size_t batch, const std::vector<std::vector<std::size_t>>& widths);

}  // namespace vmask
