#include "vmask/security_audit.hpp"

#include <stdexcept>
#include <string>

namespace vmask {

Verdict check_fc(std::size_t batch, std::size_t n1) {
  if (batch == 0 || n1 == 0) {
    throw std::invalid_argument("check_fc: zero dimension");
  }
  return batch < n1 ? Verdict::Secure : Verdict::Reconstructible;
}

Verdict check_conv(const ConvParams& c) {
  if (c.input == 0 || c.kernel == 0 || c.stride == 0) {
    throw std::invalid_argument("check_conv: zero dimension");
  }
  if (c.kernel > c.input + 2 * c.padding) {
    throw std::invalid_argument("check_conv: kernel " +
                                std::to_string(c.kernel) +
                                " larger than padded input " +
                                std::to_string(c.input + 2 * c.padding));
  }
  return c.kernel * (c.stride + 1) > c.input + 2 * c.padding + c.stride
             ? Verdict::Secure
             : Verdict::Reconstructible;
}

std::vector<AuditItem> audit_layers(
    std::size_t batch, const std::vector<std::vector<std::size_t>>& widths) {
  std::vector<AuditItem> items;
  for (std::size_t k = 0; k < widths.size(); ++k) {
    for (std::size_t j = 0; j < widths[k].size(); ++j) {
      items.push_back({k + 1, j + 1, widths[k][j], batch,
                       check_fc(batch, widths[k][j])});
    }
  }
  return items;
}

}  // namespace vmask
