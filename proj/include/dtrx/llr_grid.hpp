#pragma once

#include <cstddef>
#include <vector>

namespace dtrx {

/// Per-bit LLRs of every data resource element, in transmit order: data REs
/// symbol-major and subcarrier-first, q consecutive bits per RE in mapping
/// order. Positive values favour bit 0.
struct LlrGrid {
    std::vector<double> llrs;
    std::size_t bits_per_symbol = 0;

    std::size_t data_elements() const noexcept { return bits_per_symbol ? llrs.size() / bits_per_symbol : 0; }
};

} // namespace dtrx
